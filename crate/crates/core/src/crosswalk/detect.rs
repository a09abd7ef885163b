use roxmltree::Node;

use super::xml::{self, Scope};
use super::CrosswalkError;
use crate::record::SchemaKind;

pub(crate) const FGDC: Scope = Scope { ns: &[] };
pub(crate) const EML: Scope = Scope {
    ns: &["eml://ecoinformatics.org/eml-", "https://eml.ecoinformatics.org/eml-", "https://eml.ecoinformatics.org/"],
};
pub(crate) const DIF: Scope = Scope { ns: &["http://gcmd.gsfc.nasa.gov/Aboutus/xml/dif", "http://gcmd.nasa.gov/Aboutus/xml/dif"] };
pub(crate) const ISO: Scope = Scope {
    ns: &[
        "http://www.isotc211.org/2005/",
        "http://standards.iso.org/iso/19115/",
        "http://www.opengis.net/gml",
    ],
};
pub(crate) const DC: Scope = Scope {
    ns: &["http://purl.org/dc/elements/1.1/", "http://purl.org/dc/terms/"],
};

const OAI_DC_NS: &str = "http://www.openarchives.org/OAI/2.0/oai_dc/";
const DC_NS: &str = "http://purl.org/dc/elements/1.1/";

/// Identifies the standard from the root element signature:
///
/// | standard    | signature                                                   |
/// |-------------|-------------------------------------------------------------|
/// | FGDC        | root `metadata` (no namespace) with an `idinfo` child        |
/// | EML         | root `eml`                                                   |
/// | DIF         | root `DIF`                                                   |
/// | OaiDc       | root `dc` in the oai_dc namespace                            |
/// | DublinCore  | root `dc` otherwise, or any root with `dc:*` element children |
/// | ISO19115    | root `MD_Metadata` or `MI_Metadata`                          |
pub fn detect_schema(document: &[u8]) -> Result<SchemaKind, CrosswalkError> {
    let text = xml::decode(document)?;
    let doc = xml::parse_document(&text)?;
    let root = doc.root_element();
    let name = root.tag_name();
    let local = name.name();

    if FGDC.matches(root, "metadata") && FGDC.child(root, "idinfo").is_some() {
        return Ok(SchemaKind::Fgdc);
    }
    if EML.matches(root, "eml") {
        return Ok(SchemaKind::Eml);
    }
    if DIF.matches(root, "DIF") {
        return Ok(SchemaKind::Dif);
    }
    if ISO.matches(root, "MD_Metadata") || ISO.matches(root, "MI_Metadata") {
        return Ok(SchemaKind::Iso19115);
    }
    if local == "dc" {
        match name.namespace() {
            Some(OAI_DC_NS) => return Ok(SchemaKind::OaiDc),
            None | Some(DC_NS) => return Ok(SchemaKind::DublinCore),
            _ => {}
        }
    }
    if has_dc_children(root) {
        return Ok(SchemaKind::DublinCore);
    }
    let shown = match name.namespace() {
        Some(ns) => format!("{{{ns}}}{local}"),
        None => local.to_string(),
    };
    Err(CrosswalkError::UnknownSchema(shown))
}

fn has_dc_children(root: Node<'_, '_>) -> bool {
    root.children()
        .filter(|c| c.is_element())
        .any(|c| matches!(c.tag_name().namespace(), Some(ns) if DC.ns.contains(&ns)))
}
