//! Index vs. brute-force oracle over random corpora and queries.

use chrono::{Duration, TimeZone, Utc};
use metaharvest_core::index::{parse_query, Index, Query, SpatialRelation};
use metaharvest_core::record::{GeoBoundingBox, MetadataRecord};
use metaharvest_core::synth::{corpus, mutate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::{random_query, Oracle};

#[derive(Debug, Default)]
pub struct Equivalence {
    pub queries: usize,
    pub with_spatial: usize,
    pub with_temporal: usize,
    pub nonempty: usize,
    pub hit_set_mismatches: Vec<String>,
    pub max_relative_error: f64,
    pub order_violations: usize,
}

fn quarter(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + rng.random_range(0..=((hi - lo) * 4.0) as i64) as f64 / 4.0
}

fn random_box(rng: &mut impl Rng) -> GeoBoundingBox {
    let a = quarter(rng, -90.0, 90.0);
    let b = quarter(rng, -90.0, 90.0);
    let west = quarter(rng, -180.0, 180.0);
    let east = if rng.random_bool(0.2) { quarter(rng, -180.0, 180.0) } else { (west + quarter(rng, 0.0, 90.0)).min(180.0) };
    GeoBoundingBox::new(west, a.min(b), east, a.max(b)).unwrap()
}

fn random_filters(rng: &mut impl Rng, mut q: Query) -> Query {
    if rng.random_bool(0.3) {
        let rel = [SpatialRelation::Intersects, SpatialRelation::Contains, SpatialRelation::Within][rng.random_range(0..3)];
        q = q.with_spatial(random_box(rng), rel);
    }
    if rng.random_bool(0.3) {
        let base = Utc.with_ymd_and_hms(1980, 1, 1, 0, 0, 0).unwrap();
        let a = base + Duration::days(rng.random_range(0..16_000));
        let b = base + Duration::days(rng.random_range(0..16_000));
        let (s, e) = (a.min(b), a.max(b));
        q = match rng.random_range(0..3) {
            0 => q.with_temporal(Some(s), None),
            1 => q.with_temporal(None, Some(e)),
            _ => q.with_temporal(Some(s), Some(e)),
        };
    }
    q
}

/// Builds a corpus with some updates and deletions applied on top, so the
/// index has vacated slots, then compares `queries` random queries.
pub fn run(records: usize, queries: usize, seed: u64) -> Equivalence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = corpus(records, seed, "eq");
    let mut history: Vec<MetadataRecord> = base.clone();
    for r in base.iter().step_by(10) {
        history.push(mutate(r, &mut rng));
    }
    for r in base.iter().skip(3).step_by(20) {
        history.push(MetadataRecord::tombstone(r.identifier.clone(), r.source_id.clone(), r.schema, r.datestamp, vec![]));
    }
    let index = Index::new();
    for r in &history {
        index.upsert(r.clone());
    }
    let oracle = Oracle::new(&history);
    let snap = index.snapshot();
    assert_eq!(snap.len(), oracle.records().len());

    let mut report = Equivalence::default();
    while report.queries < queries {
        let text = random_query(&mut rng, oracle.records(), 3);
        let Ok(parsed) = parse_query(&text) else { continue };
        let q = random_filters(&mut rng, parsed);
        report.queries += 1;
        report.with_spatial += q.spatial.is_some() as usize;
        report.with_temporal += q.temporal.is_some() as usize;

        let expected = oracle.matching(&q);
        let got = snap.matching_ids(&q);
        if got != expected {
            report.hit_set_mismatches.push(format!("{text} ({} vs {} hits)", got.len(), expected.len()));
            continue;
        }
        report.nonempty += !got.is_empty() as usize;

        let scores = oracle.scores(&q);
        let mut hits = Vec::new();
        for page in 0.. {
            let res = snap.search(&q, page, 1000, &[]).unwrap();
            assert_eq!(res.total_hits, expected.len());
            if res.hits.is_empty() {
                break;
            }
            hits.extend(res.hits);
        }
        assert_eq!(hits.len(), expected.len());
        for w in hits.windows(2) {
            let ordered = w[0].score > w[1].score || (w[0].score == w[1].score && w[0].identifier < w[1].identifier);
            report.order_violations += !ordered as usize;
        }
        for h in &hits {
            let want = scores[&h.identifier];
            let scale = want.abs().max(h.score.abs());
            let rel = if scale == 0.0 { 0.0 } else { (h.score - want).abs() / scale };
            report.max_relative_error = report.max_relative_error.max(rel);
        }
    }
    report
}
