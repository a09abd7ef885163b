//! Checked-in crosswalk fixtures: `fixtures/{standard}/{name}.xml` next to
//! `{name}.expected.json`, which holds either the expected record (without
//! `raw_document`) or `{"error": "<kind>"}`.

use std::fs;
use std::path::{Path, PathBuf};

use metaharvest_core::crosswalk::{crosswalk, ParseOptions};
use metaharvest_core::record::{MetadataRecord, SchemaKind};

pub const STANDARDS: [&str; 5] = ["fgdc", "iso19115", "eml", "dif", "dublin_core"];

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub struct Outcome {
    pub standard: &'static str,
    pub name: String,
    pub result: Result<(), String>,
}

fn check(standard: &str, xml: &Path, expected: &Path) -> Result<(), String> {
    let name = xml.file_stem().unwrap().to_string_lossy().to_string();
    let doc = fs::read(xml).map_err(|e| e.to_string())?;
    let expected: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(expected).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let mut opts = ParseOptions::new("golden");
    // FGDC documents carry no identifier of their own.
    if standard == "fgdc" {
        opts.local_id = Some(name);
    }
    let actual = crosswalk(&doc, &opts);
    if let Some(kind) = expected.get("error").and_then(|k| k.as_str()) {
        return match actual {
            Err(e) if e.kind() == kind => Ok(()),
            other => Err(format!("expected error {kind}, got {other:?}")),
        };
    }
    let want: MetadataRecord = serde_json::from_value(expected).map_err(|e| format!("bad expected file: {e}"))?;
    let mut got = actual.map_err(|e| format!("parse failed: {e}"))?;
    if got.raw_document.as_deref() != Some(doc.as_slice()) {
        return Err("raw document not preserved".into());
    }
    got.raw_document = None;
    if got != want {
        return Err(format!("mismatch\n  got:  {}\n  want: {}", got.to_json_line(), want.to_json_line()));
    }
    let expected_schema = match standard {
        "fgdc" => vec![SchemaKind::Fgdc],
        "iso19115" => vec![SchemaKind::Iso19115],
        "eml" => vec![SchemaKind::Eml],
        "dif" => vec![SchemaKind::Dif],
        _ => vec![SchemaKind::OaiDc, SchemaKind::DublinCore],
    };
    if !expected_schema.contains(&got.schema) {
        return Err(format!("schema {} in {standard} directory", got.schema));
    }
    Ok(())
}

pub fn run_all() -> Vec<Outcome> {
    let mut out = Vec::new();
    for standard in STANDARDS {
        let dir = fixtures_dir().join(standard);
        let mut xmls: Vec<PathBuf> = fs::read_dir(&dir)
            .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|x| x == "xml"))
            .collect();
        xmls.sort();
        for xml in xmls {
            let expected = xml.with_extension("expected.json");
            let name = xml.file_stem().unwrap().to_string_lossy().to_string();
            out.push(Outcome { standard, name, result: check(standard, &xml, &expected) });
        }
    }
    out
}
