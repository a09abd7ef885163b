//! Seeded synthetic metadata for tests, benchmarks and demos.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::record::{canonicalize, GeoBoundingBox, MetadataRecord, SchemaKind, TemporalExtent};

pub const WORDS: &[&str] = &[
    "soil", "moisture", "carbon", "flux", "forest", "canopy", "river", "discharge", "snow", "cover", "ocean",
    "salinity", "temperature", "precipitation", "drought", "wetland", "methane", "eagles", "nesting", "habitat",
    "lake", "sediment", "nitrogen", "biomass", "fire", "permafrost", "glacier", "tundra", "grassland", "aerosol",
    "radiation", "wind", "coastal", "estuary", "plankton", "coral", "reef", "albedo", "vegetation", "index",
    "phenology", "stream", "chemistry", "groundwater", "aquifer", "ice", "sheet", "land", "use", "crop", "yield",
    "harvest", "survey", "monitoring", "station", "satellite", "airborne", "model", "daily", "monthly",
];

pub const KEYWORDS: &[&str] = &[
    "Soil Moisture",
    "Carbon Flux",
    "Land Cover",
    "Bald Eagles",
    "Sea Surface Temperature",
    "Snow Water Equivalent",
    "Biomass",
    "Permafrost",
    "Water Quality",
    "Vegetation Index",
    "Precipitation",
    "Wildfire",
];

const SURNAMES: &[&str] = &["Smith", "Garcia", "Chen", "Okafor", "Novak", "Larsen", "Tanaka", "Silva", "Kumar"];
const GIVEN: &[&str] = &["A.", "B.", "J.", "M.", "R.", "S.", "T."];

const LIVE_SCHEMAS: [SchemaKind; 5] =
    [SchemaKind::OaiDc, SchemaKind::Fgdc, SchemaKind::Eml, SchemaKind::Dif, SchemaKind::Iso19115];

fn words(rng: &mut impl Rng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n).map(|_| *WORDS.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Coordinates on a quarter-degree grid so they print exactly.
fn grid(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let steps = ((hi - lo) * 4.0) as i64;
    lo + rng.random_range(0..=steps) as f64 / 4.0
}

fn bbox(rng: &mut impl Rng) -> GeoBoundingBox {
    let (s, n) = {
        let a = grid(rng, -90.0, 90.0);
        let b = grid(rng, -90.0, 90.0);
        (a.min(b), a.max(b))
    };
    let west = grid(rng, -180.0, 179.0);
    let width = grid(rng, 0.25, 60.0);
    let mut east = west + width;
    if east > 180.0 {
        east -= 360.0;
    }
    GeoBoundingBox::new(west, s, east, n).expect("generated box is valid")
}

fn day(rng: &mut impl Rng, from_year: i32, to_year: i32) -> DateTime<Utc> {
    let start = Utc.with_ymd_and_hms(from_year, 1, 1, 0, 0, 0).unwrap();
    let days = (to_year - from_year) as i64 * 365;
    start + Duration::days(rng.random_range(0..days))
}

fn temporal(rng: &mut impl Rng) -> TemporalExtent {
    let a = day(rng, 1980, 2024);
    let b = day(rng, 1980, 2024);
    let (start, end) = (a.min(b), a.max(b));
    match rng.random_range(0..6) {
        0 => TemporalExtent::new(Some(start), None),
        1 => TemporalExtent::new(None, Some(end)),
        _ => TemporalExtent::new(Some(start), Some(end)),
    }
    .expect("ordered extent")
}

fn base_record(rng: &mut impl Rng, source_id: &str, i: usize, schema: SchemaKind) -> MetadataRecord {
    let datestamp = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap() + Duration::seconds(rng.random_range(0..126_000_000));
    let mut r = MetadataRecord::new(
        format!("{source_id}:r{i:06}"),
        source_id,
        schema,
        capitalize(&words(rng, 2, 7)),
        datestamp,
    );
    r.r#abstract = capitalize(&words(rng, 0, 60));
    let k = rng.random_range(0..4);
    let mut kws: Vec<String> = KEYWORDS.choose_multiple(rng, k).map(|k| k.to_string()).collect();
    kws.sort();
    r.keywords = kws;
    r.authors = (0..rng.random_range(0..3))
        .map(|_| format!("{}, {}", SURNAMES.choose(rng).expect("non-empty"), GIVEN.choose(rng).expect("non-empty")))
        .collect();
    if rng.random_bool(0.5) {
        r.data_urls = vec![format!("https://data.example.org/{source_id}/{i}.csv")];
    }
    if rng.random_bool(0.7) {
        r.bbox = Some(bbox(rng));
    }
    r
}

/// Records across all five live schemas with optional bbox and temporal
/// extents. Identifiers are `{source_id}:r{i:06}`; deterministic per seed.
pub fn corpus(n: usize, seed: u64, source_id: &str) -> Vec<MetadataRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let schema = *LIVE_SCHEMAS.choose(&mut rng).expect("non-empty");
            let mut r = base_record(&mut rng, source_id, i, schema);
            if rng.random_bool(0.6) {
                r.temporal = Some(temporal(&mut rng));
            }
            canonicalize(r)
        })
        .collect()
}

/// Records that survive an `oai_dc` export and re-import unchanged: Dublin
/// Core schema, no temporal extent, and the source id as their only set.
pub fn dc_corpus(n: usize, seed: u64, source_id: &str) -> Vec<MetadataRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let mut r = base_record(&mut rng, source_id, i, SchemaKind::OaiDc);
            r.sets = vec![source_id.to_string()];
            canonicalize(r)
        })
        .collect()
}

/// Two records that share the word "eagles" in different fields: a music
/// album titled with it and a wildlife survey mentioning it in the abstract.
pub fn eagles(source_id: &str) -> Vec<MetadataRecord> {
    let when = Utc.with_ymd_and_hms(2023, 6, 1, 0, 0, 0).unwrap();
    let mut album = MetadataRecord::new(format!("{source_id}:album"), source_id, SchemaKind::OaiDc, "The Eagles Greatest Hits", when);
    album.keywords = vec!["Music".into()];
    let mut survey = MetadataRecord::new(
        format!("{source_id}:survey"),
        source_id,
        SchemaKind::OaiDc,
        "Raptor nest census",
        when + Duration::days(1),
    );
    survey.r#abstract = "Population survey of eagles (Haliaeetus)".into();
    survey.keywords = vec!["Bald Eagles".into()];
    survey.bbox = Some(GeoBoundingBox::new(-125.0, 40.0, -110.0, 49.0).expect("valid box"));
    vec![canonicalize(album), canonicalize(survey)]
}

/// A random edit that changes a record's fingerprint.
pub fn mutate(record: &MetadataRecord, rng: &mut impl Rng) -> MetadataRecord {
    let mut r = record.clone();
    match rng.random_range(0..3) {
        0 => r.title = format!("{} revised", r.title),
        1 => r.r#abstract = format!("{} {}", r.r#abstract, words(rng, 1, 5)).trim().to_string(),
        _ => {
            let k = format!("Revision {}", rng.random_range(0..1_000_000));
            r.keywords.push(k);
        }
    }
    canonicalize(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crosswalk::{crosswalk, to_oai_dc, ParseOptions};
    use crate::record::fingerprint;

    #[test]
    fn deterministic_and_valid() {
        let a = corpus(300, 5, "s");
        assert_eq!(a, corpus(300, 5, "s"));
        assert_ne!(a, corpus(300, 6, "s"));
        for r in &a {
            r.validate().unwrap();
            assert_eq!(canonicalize(r.clone()), *r);
        }
        assert!(a.iter().any(|r| r.bbox.is_some_and(|b| b.crosses_antimeridian())));
        assert!(a.iter().any(|r| r.temporal.is_some()));
    }

    #[test]
    fn dc_corpus_round_trips() {
        for r in dc_corpus(200, 3, "synth") {
            let doc = to_oai_dc(&r).unwrap();
            let local = r.identifier.strip_prefix("synth:").unwrap().to_string();
            let opts = ParseOptions {
                source_id: "synth".into(),
                local_id: Some(local),
                datestamp: Some(r.datestamp),
                sets: r.sets.clone(),
            };
            let back = crosswalk(&doc, &opts).unwrap();
            assert_eq!(fingerprint(&back), fingerprint(&r), "{}", r.identifier);
        }
    }

    #[test]
    fn mutation_changes_fingerprint() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for r in corpus(50, 2, "s") {
            assert_ne!(fingerprint(&mutate(&r, &mut rng)), fingerprint(&r));
        }
    }
}
