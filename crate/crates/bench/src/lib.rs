//! Shared inputs for the benchmarks.

use std::fs;
use std::path::{Path, PathBuf};

use metaharvest_core::index::Index;
use metaharvest_core::synth::{corpus, WORDS};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

/// Every checked-in crosswalk fixture as `(name, bytes)`.
pub fn fixture_documents() -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let Ok(dirs) = fs::read_dir(fixtures_dir()) else { return out };
    for dir in dirs.flatten() {
        let Ok(files) = fs::read_dir(dir.path()) else { continue };
        for f in files.flatten() {
            let path = f.path();
            if path.extension().is_some_and(|e| e == "xml") {
                if let Ok(bytes) = fs::read(&path) {
                    let name = format!("{}/{}", dir.file_name().to_string_lossy(), path.file_stem().unwrap().to_string_lossy());
                    out.push((name, bytes));
                }
            }
        }
    }
    out.sort();
    out
}

pub fn synthetic_index(n: usize) -> Index {
    Index::from_records(corpus(n, 42, "bench"))
}

/// Query strings of increasing complexity.
pub fn sample_queries() -> Vec<(&'static str, String)> {
    vec![
        ("term", WORDS[0].to_string()),
        ("fielded", format!("title:{}", WORDS[4])),
        ("or", format!("{} OR {} OR {}", WORDS[1], WORDS[7], WORDS[12])),
        ("and_not", format!("{} AND {} NOT {}", WORDS[2], WORDS[3], WORDS[9])),
        ("phrase", "\"soil moisture\"".to_string()),
        ("keyword", "keywords:\"Carbon Flux\"".to_string()),
    ]
}
