//! Date and datestamp handling shared by every module.
//!
//! Everything is stored as a UTC instant with whole-second precision. Dates
//! with day granularity become midnight UTC.

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Timelike, Utc};

/// OAI-PMH seconds granularity, also used by the record store.
pub const DATESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

pub fn format_datestamp(instant: &DateTime<Utc>) -> String {
    instant.format(DATESTAMP_FORMAT).to_string()
}

/// Formats an instant as a plain `YYYY-MM-DD` date when it sits on midnight,
/// otherwise as a full datestamp.
pub fn format_date_or_datestamp(instant: &DateTime<Utc>) -> String {
    if instant.num_seconds_from_midnight() == 0 {
        instant.format("%Y-%m-%d").to_string()
    } else {
        format_datestamp(instant)
    }
}

pub fn truncate_to_seconds(instant: DateTime<Utc>) -> DateTime<Utc> {
    instant.with_nanosecond(0).unwrap_or(instant)
}

pub fn midnight(date: NaiveDate) -> DateTime<Utc> {
    Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).expect("midnight is valid"))
}

/// Granularity of a parsed OAI-PMH datestamp argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Day,
    Seconds,
}

/// Strict OAI-PMH datestamp parsing: `YYYY-MM-DD` or `YYYY-MM-DDThh:mm:ssZ`.
pub fn parse_oai_datestamp(s: &str) -> Option<(DateTime<Utc>, Granularity)> {
    if s.len() == 10 {
        let date = NaiveDate::parse_from_str(s, "%Y-%m-%d").ok()?;
        return Some((midnight(date), Granularity::Day));
    }
    if s.len() == 20 {
        let dt = NaiveDateTime::parse_from_str(s, DATESTAMP_FORMAT).ok()?;
        return Some((Utc.from_utc_datetime(&dt), Granularity::Seconds));
    }
    None
}

/// Lenient parser for dates found in metadata documents and API parameters.
///
/// Accepts RFC 3339 timestamps, `YYYY-MM-DDThh:mm:ss` without zone (read as
/// UTC), `YYYY-MM-DD`, `YYYY-MM`, `YYYY`, and the compact FGDC forms
/// `YYYYMMDD` and `YYYYMM`. Partial dates resolve to the first day of the
/// period. Returns `None` when nothing matches.
pub fn parse_flexible_date(raw: &str) -> Option<DateTime<Utc>> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(truncate_to_seconds(dt.with_timezone(&Utc)));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(truncate_to_seconds(Utc.from_utc_datetime(&dt)));
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(midnight(d));
    }
    let digits = s.bytes().all(|b| b.is_ascii_digit());
    let ymd = |y: &str, m: &str, d: &str| -> Option<DateTime<Utc>> {
        let date = NaiveDate::from_ymd_opt(y.parse().ok()?, m.parse().ok()?, d.parse().ok()?)?;
        Some(midnight(date))
    };
    match s.len() {
        8 if digits => ymd(&s[0..4], &s[4..6], &s[6..8]),
        6 if digits => ymd(&s[0..4], &s[4..6], "1"),
        4 if digits => ymd(s, "1", "1"),
        7 if s.as_bytes()[4] == b'-' => ymd(&s[0..4], &s[5..7], "1"),
        _ => None,
    }
}

/// Serde adapter for required datestamps.
pub mod datestamp_serde {
    use super::*;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_datestamp(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let raw = String::deserialize(d)?;
        parse_flexible_date(&raw).ok_or_else(|| D::Error::custom(format!("invalid datestamp {raw:?}")))
    }
}

/// Serde adapter for optional dates, written as `YYYY-MM-DD` when on midnight.
pub mod opt_date_serde {
    use super::*;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<DateTime<Utc>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_str(&format_date_or_datestamp(v)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DateTime<Utc>>, D::Error> {
        match Option::<String>::deserialize(d)? {
            None => Ok(None),
            Some(raw) => parse_flexible_date(&raw)
                .map(Some)
                .ok_or_else(|| D::Error::custom(format!("invalid date {raw:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oai_datestamps() {
        let (d, g) = parse_oai_datestamp("2003-07-01").unwrap();
        assert_eq!(g, Granularity::Day);
        assert_eq!(format_datestamp(&d), "2003-07-01T00:00:00Z");
        let (d, g) = parse_oai_datestamp("2003-07-01T10:52:37Z").unwrap();
        assert_eq!(g, Granularity::Seconds);
        assert_eq!(format_datestamp(&d), "2003-07-01T10:52:37Z");
        assert!(parse_oai_datestamp("2003-07-01T10:52:37").is_none());
        assert!(parse_oai_datestamp("2003-7-1").is_none());
        assert!(parse_oai_datestamp("2003-02-30").is_none());
    }

    #[test]
    fn flexible_forms() {
        let want = midnight(NaiveDate::from_ymd_opt(2003, 5, 1).unwrap());
        for s in ["2003-05-01", "20030501", "200305", "2003-05", " 2003-05-01 "] {
            assert_eq!(parse_flexible_date(s), Some(want), "{s}");
        }
        assert_eq!(
            parse_flexible_date("2003"),
            Some(midnight(NaiveDate::from_ymd_opt(2003, 1, 1).unwrap()))
        );
        assert_eq!(
            parse_flexible_date("2003-05-01T12:30:00+02:00").map(|d| format_datestamp(&d)),
            Some("2003-05-01T10:30:00Z".into())
        );
        for bad in ["", "Unknown", "2003-13-01", "20031301", "yesterday"] {
            assert_eq!(parse_flexible_date(bad), None, "{bad}");
        }
    }

    #[test]
    fn date_or_datestamp() {
        let d = midnight(NaiveDate::from_ymd_opt(2000, 1, 1).unwrap());
        assert_eq!(format_date_or_datestamp(&d), "2000-01-01");
        let t = d + chrono::Duration::seconds(5);
        assert_eq!(format_date_or_datestamp(&t), "2000-01-01T00:00:05Z");
    }
}
