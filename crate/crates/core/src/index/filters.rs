//! Spatial and temporal predicates applied after boolean evaluation.

use chrono::{DateTime, Utc};

use super::query::SpatialRelation;
use crate::record::{GeoBoundingBox, LonSpan, TemporalExtent};

fn spans_overlap(a: LonSpan, b: LonSpan) -> bool {
    a.min <= b.max && b.min <= a.max
}

fn span_covers(outer: LonSpan, inner: LonSpan) -> bool {
    outer.min <= inner.min && inner.max <= outer.max
}

/// Every span of `inner` lies inside one span of `outer`. The spans of a
/// crossing box are disjoint on the flat longitude line, so an ordinary
/// interval covered by their union is covered by one of them.
fn box_covers(outer: &GeoBoundingBox, inner: &GeoBoundingBox) -> bool {
    outer.south <= inner.south
        && inner.north <= outer.north
        && inner.lon_spans().all(|i| outer.lon_spans().any(|o| span_covers(o, i)))
}

/// Evaluates a spatial relation between a record's box and a query box.
/// Antimeridian-crossing boxes are split into their two ordinary halves.
pub fn spatial_match(record: &GeoBoundingBox, query: &GeoBoundingBox, relation: SpatialRelation) -> bool {
    match relation {
        SpatialRelation::Intersects => {
            record.south <= query.north
                && query.south <= record.north
                && record.lon_spans().any(|r| query.lon_spans().any(|q| spans_overlap(r, q)))
        }
        SpatialRelation::Contains => box_covers(record, query),
        SpatialRelation::Within => box_covers(query, record),
    }
}

/// Interval overlap with absent bounds treated as infinite.
pub fn temporal_match(record: &TemporalExtent, start: Option<DateTime<Utc>>, end: Option<DateTime<Utc>>) -> bool {
    let starts_in_time = match (record.start, end) {
        (Some(rs), Some(qe)) => rs <= qe,
        _ => true,
    };
    let ends_in_time = match (record.end, start) {
        (Some(re), Some(qs)) => re >= qs,
        _ => true,
    };
    starts_in_time && ends_in_time
}
