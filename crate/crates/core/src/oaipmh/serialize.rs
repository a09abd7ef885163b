use std::fmt::Write;

use super::{Header, OaiPayload, OaiRecord, OaiResponse, ResumptionInfo, GRANULARITY, OAI_PMH_NS, OAI_PMH_XSD};
use crate::crosswalk::xml::escape;
use crate::datetime::format_datestamp;

const XSI_NS: &str = "http://www.w3.org/2001/XMLSchema-instance";

fn element(out: &mut String, name: &str, text: &str) {
    let _ = write!(out, "<{name}>{}</{name}>", escape(text));
}

fn header(out: &mut String, h: &Header) {
    out.push_str(if h.deleted { "<header status=\"deleted\">" } else { "<header>" });
    element(out, "identifier", &h.identifier);
    element(out, "datestamp", &format_datestamp(&h.datestamp));
    for s in &h.sets {
        element(out, "setSpec", s);
    }
    out.push_str("</header>");
}

fn record(out: &mut String, r: &OaiRecord) {
    out.push_str("<record>");
    header(out, &r.header);
    if let Some(m) = &r.metadata {
        out.push_str("<metadata>");
        out.push_str(m);
        out.push_str("</metadata>");
    }
    out.push_str("</record>\n");
}

fn resumption(out: &mut String, rt: &Option<ResumptionInfo>) {
    let Some(rt) = rt else { return };
    let _ = write!(out, "<resumptionToken completeListSize=\"{}\" cursor=\"{}\"", rt.complete_list_size, rt.cursor);
    if let Some(exp) = &rt.expiration {
        let _ = write!(out, " expirationDate=\"{}\"", format_datestamp(exp));
    }
    if rt.token.is_empty() {
        out.push_str("/>\n");
    } else {
        let _ = writeln!(out, ">{}</resumptionToken>", escape(&rt.token));
    }
}

/// Renders a response as an OAI-PMH 2.0 document. Output depends only on
/// the response value.
pub fn serialize_response(resp: &OaiResponse) -> Vec<u8> {
    let mut out = String::with_capacity(4096);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<OAI-PMH xmlns=\"{OAI_PMH_NS}\" xmlns:xsi=\"{XSI_NS}\" xsi:schemaLocation=\"{OAI_PMH_NS} {OAI_PMH_XSD}\">"
    );
    element(&mut out, "responseDate", &format_datestamp(&resp.response_date));
    out.push('\n');
    out.push_str("<request");
    if let Some(req) = &resp.request {
        let _ = write!(out, " verb=\"{}\"", req.verb);
        for (k, v) in &req.arguments {
            let _ = write!(out, " {k}=\"{}\"", escape(v));
        }
    }
    let _ = writeln!(out, ">{}</request>", escape(&resp.base_url));

    match &resp.payload {
        OaiPayload::Errors(errors) => {
            for e in errors {
                let _ = writeln!(out, "<error code=\"{}\">{}</error>", e.code, escape(&e.message));
            }
        }
        OaiPayload::Identify(info) => {
            out.push_str("<Identify>");
            element(&mut out, "repositoryName", &info.repository_name);
            element(&mut out, "baseURL", &info.base_url);
            element(&mut out, "protocolVersion", "2.0");
            for a in &info.admin_emails {
                element(&mut out, "adminEmail", a);
            }
            element(&mut out, "earliestDatestamp", &format_datestamp(&info.earliest_datestamp));
            element(&mut out, "deletedRecord", "persistent");
            element(&mut out, "granularity", GRANULARITY);
            out.push_str("</Identify>\n");
        }
        OaiPayload::ListMetadataFormats(formats) => {
            out.push_str("<ListMetadataFormats>\n");
            for f in formats {
                out.push_str("<metadataFormat>");
                element(&mut out, "metadataPrefix", &f.prefix);
                element(&mut out, "schema", &f.schema);
                element(&mut out, "metadataNamespace", &f.namespace);
                out.push_str("</metadataFormat>\n");
            }
            out.push_str("</ListMetadataFormats>\n");
        }
        OaiPayload::ListSets(sets) => {
            out.push_str("<ListSets>\n");
            for s in sets {
                out.push_str("<set>");
                element(&mut out, "setSpec", &s.spec);
                element(&mut out, "setName", &s.name);
                out.push_str("</set>\n");
            }
            out.push_str("</ListSets>\n");
        }
        OaiPayload::ListIdentifiers(headers, rt) => {
            out.push_str("<ListIdentifiers>\n");
            for h in headers {
                header(&mut out, h);
                out.push('\n');
            }
            resumption(&mut out, rt);
            out.push_str("</ListIdentifiers>\n");
        }
        OaiPayload::ListRecords(records, rt) => {
            out.push_str("<ListRecords>\n");
            for r in records {
                record(&mut out, r);
            }
            resumption(&mut out, rt);
            out.push_str("</ListRecords>\n");
        }
        OaiPayload::GetRecord(r) => {
            out.push_str("<GetRecord>");
            record(&mut out, r);
            out.push_str("</GetRecord>\n");
        }
    }
    out.push_str("</OAI-PMH>\n");
    out.into_bytes()
}
