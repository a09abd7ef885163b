//! Protocol conformance checks for the OAI-PMH provider: every verb against
//! every combination of arguments, each error code, and pagination.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use metaharvest_core::crosswalk::{crosswalk, ParseOptions};
use metaharvest_core::datetime::format_datestamp;
use metaharvest_core::oaipmh::{handle_request, serialize_response, RepositoryConfig};
use metaharvest_core::record::{fingerprint, MetadataRecord, SchemaKind};
use metaharvest_core::store::Catalog;
use metaharvest_core::synth::dc_corpus;

const NS: &str = "http://www.openarchives.org/OAI/2.0/";
const VERBS: [&str; 6] = ["Identify", "ListMetadataFormats", "ListSets", "GetRecord", "ListIdentifiers", "ListRecords"];
const ARGS: [&str; 6] = ["identifier", "metadataPrefix", "from", "until", "set", "resumptionToken"];

pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

/// What a parsed response says, independent of the server's own types.
#[derive(Debug)]
struct Parsed {
    errors: Vec<String>,
    request_attrs: BTreeMap<String, String>,
    verb_element: Option<String>,
    response_date_ok: bool,
    records: usize,
    headers: Vec<(String, bool)>,
    token: Option<(String, Option<usize>, Option<usize>)>,
    metadata: Vec<String>,
}

fn parse(xml: &[u8]) -> Result<Parsed, String> {
    let text = std::str::from_utf8(xml).map_err(|e| e.to_string())?;
    let doc = roxmltree::Document::parse(text).map_err(|e| e.to_string())?;
    let root = doc.root_element();
    if root.tag_name().name() != "OAI-PMH" || root.tag_name().namespace() != Some(NS) {
        return Err("root is not OAI-PMH in the protocol namespace".into());
    }
    let child = |name: &str| root.children().find(|n| n.is_element() && n.tag_name().name() == name);
    let response_date_ok = child("responseDate")
        .and_then(|n| n.text())
        .is_some_and(|t| t.len() == 20 && DateTime::parse_from_rfc3339(t).is_ok() && t.ends_with('Z'));
    let request = child("request").ok_or("no request element")?;
    let request_attrs = request.attributes().map(|a| (a.name().to_string(), a.value().to_string())).collect();
    let errors = root
        .children()
        .filter(|n| n.is_element() && n.tag_name().name() == "error")
        .map(|n| n.attribute("code").unwrap_or_default().to_string())
        .collect();
    let verb_node = root.children().find(|n| n.is_element() && VERBS.contains(&n.tag_name().name()));
    let mut records = 0;
    let mut headers = Vec::new();
    let mut token = None;
    let mut metadata = Vec::new();
    if let Some(v) = verb_node {
        for n in v.descendants().filter(|n| n.is_element()) {
            match n.tag_name().name() {
                "record" => records += 1,
                "header" => {
                    let id = n
                        .children()
                        .find(|c| c.tag_name().name() == "identifier")
                        .and_then(|c| c.text())
                        .unwrap_or_default()
                        .to_string();
                    headers.push((id, n.attribute("status") == Some("deleted")));
                }
                "resumptionToken" => {
                    let num = |a: &str| n.attribute(a).and_then(|v| v.parse().ok());
                    token = Some((n.text().unwrap_or_default().to_string(), num("completeListSize"), num("cursor")));
                }
                "metadata" if n.parent().is_some_and(|p| p.tag_name().name() == "record") => {
                    if let Some(inner) = n.children().find(|c| c.is_element()) {
                        metadata.push(text[inner.range()].to_string());
                    }
                }
                _ => {}
            }
        }
    }
    Ok(Parsed {
        errors,
        request_attrs,
        verb_element: verb_node.map(|n| n.tag_name().name().to_string()),
        response_date_ok,
        records,
        headers,
        token,
        metadata,
    })
}

struct Repo {
    catalog: Catalog,
    config: RepositoryConfig,
    now: DateTime<Utc>,
}

impl Repo {
    fn call(&self, pairs: &[(&str, &str)]) -> Result<Parsed, String> {
        let pairs: Vec<(String, String)> = pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        parse(&serialize_response(&handle_request(&pairs, &self.catalog.view(), &self.config, self.now)))
    }
}

fn allowed(verb: &str) -> (&'static [&'static str], &'static [&'static str], bool) {
    // (required, optional, resumptionToken allowed as exclusive)
    match verb {
        "Identify" => (&[], &[], false),
        "ListMetadataFormats" => (&[], &["identifier"], false),
        "ListSets" => (&[], &[], true),
        "GetRecord" => (&["identifier", "metadataPrefix"], &[], false),
        _ => (&["metadataPrefix"], &["from", "until", "set"], true),
    }
}

/// Expected error code for a verb and argument set, or `None` for success.
fn expected(verb: &str, args: &[&str]) -> Option<&'static str> {
    let (required, optional, exclusive) = allowed(verb);
    let has_token = args.contains(&"resumptionToken");
    if has_token {
        if !exclusive || args.len() > 1 {
            return Some("badArgument");
        }
        return if verb == "ListSets" { Some("badResumptionToken") } else { None };
    }
    if args.iter().any(|a| !required.contains(a) && !optional.contains(a)) {
        return Some("badArgument");
    }
    if required.iter().any(|r| !args.contains(r)) {
        return Some("badArgument");
    }
    None
}

fn build_repo(sets_enabled: bool) -> (Repo, Vec<MetadataRecord>) {
    let mut records = dc_corpus(10, 21, "conf");
    for r in records.iter_mut().step_by(3) {
        r.sets.push("conf:sub".into());
    }
    let fgdc_doc = br#"<metadata><idinfo><citation><citeinfo><title>Native FGDC</title></citeinfo></citation></idinfo></metadata>"#;
    let mut opts = ParseOptions::new("conf");
    opts.local_id = Some("native".into());
    opts.datestamp = Some(Utc.with_ymd_and_hms(2021, 3, 4, 5, 6, 7).unwrap());
    records.push(crosswalk(fgdc_doc, &opts).unwrap());
    records.push(MetadataRecord::tombstone("conf:gone", "conf", SchemaKind::OaiDc, Utc.with_ymd_and_hms(2022, 1, 1, 0, 0, 0).unwrap(), vec![]));
    let catalog = Catalog::in_memory();
    catalog.apply_batch(records.clone()).unwrap();
    let mut config = RepositoryConfig::new("Conformance", "http://localhost/oai");
    config.page_size = 3;
    config.sets_enabled = sets_enabled;
    (Repo { catalog, config, now: Utc::now() }, records)
}

pub fn run() -> Vec<Check> {
    let mut checks = Vec::new();
    let mut push = |name: String, result: Result<(), String>| {
        let (ok, detail) = match result {
            Ok(()) => (true, String::new()),
            Err(e) => (false, e),
        };
        checks.push(Check { name, ok, detail });
    };
    let (repo, records) = build_repo(true);
    let live_id = records[0].identifier.clone();
    let earliest = records.iter().map(|r| r.datestamp).min().unwrap();
    let from = format_datestamp(&(earliest - Duration::seconds(1)));
    let until = "2100-01-01T00:00:00Z".to_string();
    let token_for = |verb: &str| -> String {
        let p = repo.call(&[("verb", verb), ("metadataPrefix", "oai_dc")]).unwrap();
        p.token.map(|t| t.0).unwrap_or_default()
    };
    let tokens: BTreeMap<&str, String> =
        [("ListIdentifiers", token_for("ListIdentifiers")), ("ListRecords", token_for("ListRecords"))].into();

    // Verb x argument-subset matrix.
    for verb in VERBS {
        for mask in 0u32..(1 << ARGS.len()) {
            let args: Vec<&str> = ARGS.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, a)| *a).collect();
            let value = |a: &str| -> String {
                match a {
                    "identifier" => live_id.clone(),
                    "metadataPrefix" => "oai_dc".into(),
                    "from" => from.clone(),
                    "until" => until.clone(),
                    "set" => "conf".into(),
                    _ => tokens.get(verb).cloned().unwrap_or_else(|| tokens["ListRecords"].clone()),
                }
            };
            let values: Vec<(String, String)> = args.iter().map(|a| (a.to_string(), value(a))).collect();
            let mut pairs: Vec<(&str, &str)> = vec![("verb", verb)];
            pairs.extend(values.iter().map(|(k, v)| (k.as_str(), v.as_str())));
            let want = expected(verb, &args);
            let result = repo.call(&pairs).and_then(|p| {
                if !p.response_date_ok {
                    return Err("bad responseDate".into());
                }
                match want {
                    Some(code) => {
                        if p.errors != [code] {
                            return Err(format!("expected {code}, got {:?}", p.errors));
                        }
                        if code == "badArgument" && !p.request_attrs.is_empty() {
                            return Err("request echoed attributes on badArgument".into());
                        }
                        Ok(())
                    }
                    None => {
                        if !p.errors.is_empty() {
                            return Err(format!("unexpected errors {:?}", p.errors));
                        }
                        if p.verb_element.as_deref() != Some(verb) {
                            return Err(format!("missing {verb} element"));
                        }
                        let mut echoed: BTreeMap<String, String> = values.iter().cloned().collect();
                        echoed.insert("verb".into(), verb.into());
                        if p.request_attrs != echoed {
                            return Err(format!("request echo {:?}", p.request_attrs));
                        }
                        Ok(())
                    }
                }
            });
            push(format!("{verb} with {{{}}}", args.join(",")), result);
        }
    }

    let expect_code = |pairs: &[(&str, &str)], code: &str| -> Result<(), String> {
        let p = repo.call(pairs)?;
        if p.errors == [code] { Ok(()) } else { Err(format!("expected {code}, got {:?}", p.errors)) }
    };
    let mut reached = std::collections::BTreeSet::new();
    let mut code_check = |name: &str, code: &'static str, result: Result<(), String>| {
        if result.is_ok() {
            reached.insert(code);
        }
        push(name.to_string(), result);
    };

    code_check("missing verb", "badVerb", expect_code(&[("metadataPrefix", "oai_dc")], "badVerb"));
    code_check("unknown verb", "badVerb", expect_code(&[("verb", "Frobnicate")], "badVerb"));
    code_check("repeated verb", "badVerb", expect_code(&[("verb", "Identify"), ("verb", "Identify")], "badVerb"));
    code_check(
        "repeated argument",
        "badArgument",
        expect_code(&[("verb", "ListRecords"), ("metadataPrefix", "oai_dc"), ("metadataPrefix", "oai_dc")], "badArgument"),
    );
    code_check(
        "malformed from",
        "badArgument",
        expect_code(&[("verb", "ListRecords"), ("metadataPrefix", "oai_dc"), ("from", "2001-13-45")], "badArgument"),
    );
    code_check(
        "mixed granularities",
        "badArgument",
        expect_code(
            &[("verb", "ListRecords"), ("metadataPrefix", "oai_dc"), ("from", "2001-01-01"), ("until", "2002-01-01T00:00:00Z")],
            "badArgument",
        ),
    );
    code_check(
        "from after until",
        "badArgument",
        expect_code(&[("verb", "ListRecords"), ("metadataPrefix", "oai_dc"), ("from", "2005-01-01"), ("until", "2001-01-01")], "badArgument"),
    );
    code_check(
        "forged token",
        "badResumptionToken",
        expect_code(&[("verb", "ListRecords"), ("resumptionToken", "not-a-token")], "badResumptionToken"),
    );
    let mut tampered = tokens["ListRecords"].clone().into_bytes();
    tampered[0] = if tampered[0] == b'A' { b'B' } else { b'A' };
    let tampered = String::from_utf8(tampered).unwrap();
    code_check(
        "tampered token",
        "badResumptionToken",
        expect_code(&[("verb", "ListRecords"), ("resumptionToken", &tampered)], "badResumptionToken"),
    );
    code_check(
        "token for another verb",
        "badResumptionToken",
        expect_code(&[("verb", "ListIdentifiers"), ("resumptionToken", &tokens["ListRecords"])], "badResumptionToken"),
    );
    code_check(
        "unsupported format in GetRecord",
        "cannotDisseminateFormat",
        expect_code(&[("verb", "GetRecord"), ("identifier", &live_id), ("metadataPrefix", "marc21")], "cannotDisseminateFormat"),
    );
    code_check(
        "unsupported format in ListRecords",
        "cannotDisseminateFormat",
        expect_code(&[("verb", "ListRecords"), ("metadataPrefix", "marc21")], "cannotDisseminateFormat"),
    );
    code_check(
        "native format of another schema",
        "cannotDisseminateFormat",
        expect_code(&[("verb", "GetRecord"), ("identifier", &live_id), ("metadataPrefix", "fgdc")], "cannotDisseminateFormat"),
    );
    code_check(
        "unknown identifier",
        "idDoesNotExist",
        expect_code(&[("verb", "GetRecord"), ("identifier", "conf:nope"), ("metadataPrefix", "oai_dc")], "idDoesNotExist"),
    );
    code_check(
        "unknown identifier for formats",
        "idDoesNotExist",
        expect_code(&[("verb", "ListMetadataFormats"), ("identifier", "conf:nope")], "idDoesNotExist"),
    );
    code_check(
        "empty window",
        "noRecordsMatch",
        expect_code(&[("verb", "ListIdentifiers"), ("metadataPrefix", "oai_dc"), ("from", "2099-01-01")], "noRecordsMatch"),
    );
    code_check(
        "unknown set",
        "noRecordsMatch",
        expect_code(&[("verb", "ListRecords"), ("metadataPrefix", "oai_dc"), ("set", "elsewhere")], "noRecordsMatch"),
    );
    code_check(
        "formats of a deleted record",
        "noMetadataFormats",
        expect_code(&[("verb", "ListMetadataFormats"), ("identifier", "conf:gone")], "noMetadataFormats"),
    );
    let (flat, _) = build_repo(false);
    code_check(
        "sets disabled",
        "noSetHierarchy",
        flat.call(&[("verb", "ListSets")]).and_then(|p| {
            if p.errors == ["noSetHierarchy"] { Ok(()) } else { Err(format!("{:?}", p.errors)) }
        }),
    );
    let all_codes = [
        "badArgument",
        "badResumptionToken",
        "badVerb",
        "cannotDisseminateFormat",
        "idDoesNotExist",
        "noRecordsMatch",
        "noMetadataFormats",
        "noSetHierarchy",
    ];
    let missing: Vec<&str> = all_codes.iter().copied().filter(|c| !reached.contains(c)).collect();
    push(
        "all eight error codes reachable".into(),
        if missing.is_empty() { Ok(()) } else { Err(format!("unreached: {missing:?}")) },
    );

    // Identify content.
    push(
        "Identify content".into(),
        (|| {
            let pairs = vec![("verb".to_string(), "Identify".to_string())];
            let xml = serialize_response(&handle_request(&pairs, &repo.catalog.view(), &repo.config, repo.now));
            let text = String::from_utf8(xml).unwrap();
            let doc = roxmltree::Document::parse(&text).map_err(|e| e.to_string())?;
            let get = |name: &str| doc.descendants().find(|n| n.tag_name().name() == name).and_then(|n| n.text()).map(str::to_string);
            let want = [
                ("protocolVersion", "2.0".to_string()),
                ("deletedRecord", "persistent".to_string()),
                ("granularity", "YYYY-MM-DDThh:mm:ssZ".to_string()),
                ("earliestDatestamp", format_datestamp(&earliest)),
                ("repositoryName", "Conformance".to_string()),
                ("baseURL", "http://localhost/oai".to_string()),
            ];
            for (name, value) in want {
                if get(name).as_deref() != Some(value.as_str()) {
                    return Err(format!("{name} = {:?}, want {value:?}", get(name)));
                }
            }
            Ok(())
        })(),
    );

    // Full pagination chains.
    for verb in ["ListRecords", "ListIdentifiers"] {
        push(
            format!("{verb} pagination chain"),
            (|| {
                let total = records.len();
                let mut seen = Vec::new();
                let mut page = repo.call(&[("verb", verb), ("metadataPrefix", "oai_dc")])?;
                let mut expected_cursor = 0;
                loop {
                    if !page.errors.is_empty() {
                        return Err(format!("errors {:?}", page.errors));
                    }
                    let n = page.headers.len();
                    seen.extend(page.headers.iter().cloned());
                    let (token, size, cursor) = page.token.clone().unwrap_or_default();
                    if page.token.is_some() {
                        if size != Some(total) || cursor != Some(expected_cursor) {
                            return Err(format!("token attrs size={size:?} cursor={cursor:?}, want {total}/{expected_cursor}"));
                        }
                    }
                    expected_cursor += n;
                    if token.is_empty() {
                        break;
                    }
                    page = repo.call(&[("verb", verb), ("resumptionToken", &token)])?;
                }
                if verb == "ListRecords" && seen.len() != total {
                    return Err(format!("{} records, want {total}", seen.len()));
                }
                let mut ids: Vec<&String> = seen.iter().map(|(id, _)| id).collect();
                ids.sort();
                ids.dedup();
                if ids.len() != total {
                    return Err(format!("{} distinct identifiers, want {total}", ids.len()));
                }
                if !seen.iter().any(|(id, deleted)| id == "conf:gone" && *deleted) {
                    return Err("deleted record not flagged".into());
                }
                Ok(())
            })(),
        );
    }

    push(
        "set filtering is hierarchical".into(),
        (|| {
            let sub = records.iter().filter(|r| r.sets.iter().any(|s| s == "conf:sub")).count();
            let mut n = 0;
            let mut page = repo.call(&[("verb", "ListIdentifiers"), ("metadataPrefix", "oai_dc"), ("set", "conf:sub")])?;
            loop {
                n += page.headers.len();
                match page.token.clone() {
                    Some((t, _, _)) if !t.is_empty() => {
                        page = repo.call(&[("verb", "ListIdentifiers"), ("resumptionToken", &t)])?
                    }
                    _ => break,
                }
            }
            if n == sub { Ok(()) } else { Err(format!("{n} in conf:sub, want {sub}")) }
        })(),
    );

    push(
        "GetRecord metadata round-trips".into(),
        (|| {
            let p = repo.call(&[("verb", "GetRecord"), ("identifier", &live_id), ("metadataPrefix", "oai_dc")])?;
            if p.records != 1 || p.metadata.len() != 1 {
                return Err("expected one record with metadata".into());
            }
            let mut opts = ParseOptions::new("conf");
            opts.local_id = Some(live_id.trim_start_matches("conf:").to_string());
            opts.sets = records[0].sets.clone();
            let back = crosswalk(p.metadata[0].as_bytes(), &opts).map_err(|e| e.to_string())?;
            if fingerprint(&back) == fingerprint(&records[0]) { Ok(()) } else { Err("fingerprint differs".into()) }
        })(),
    );

    push(
        "native format dissemination".into(),
        (|| {
            let p = repo.call(&[("verb", "GetRecord"), ("identifier", "conf:native"), ("metadataPrefix", "fgdc")])?;
            if p.metadata.len() == 1 && p.metadata[0].contains("Native FGDC") { Ok(()) } else { Err(format!("{p:?}")) }
        })(),
    );

    push(
        "deleted record is header only".into(),
        (|| {
            let p = repo.call(&[("verb", "GetRecord"), ("identifier", "conf:gone"), ("metadataPrefix", "oai_dc")])?;
            if p.headers == [("conf:gone".to_string(), true)] && p.metadata.is_empty() { Ok(()) } else { Err(format!("{p:?}")) }
        })(),
    );

    checks
}
