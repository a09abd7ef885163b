//! Small navigation layer over `roxmltree` used by the per-standard mappers.

use std::borrow::Cow;

use roxmltree::{Document, Node};

use super::CrosswalkError;

/// Decodes raw document bytes to UTF-8 text, honoring a BOM or the encoding
/// named in the XML declaration.
pub fn decode(bytes: &[u8]) -> Result<Cow<'_, str>, CrosswalkError> {
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(CrosswalkError::MalformedXml("empty document".into()));
    }
    if let Some((enc, bom_len)) = encoding_rs::Encoding::for_bom(bytes) {
        let (text, had_errors) = enc.decode_without_bom_handling(&bytes[bom_len..]);
        if had_errors {
            return Err(CrosswalkError::MalformedXml(format!("invalid {} byte sequence", enc.name())));
        }
        return Ok(strip_declared_encoding(text));
    }
    if let Some(label) = declared_encoding(bytes) {
        let enc = encoding_rs::Encoding::for_label(label.as_bytes())
            .ok_or_else(|| CrosswalkError::MalformedXml(format!("unsupported encoding {label}")))?;
        if enc != encoding_rs::UTF_8 {
            let (text, had_errors) = enc.decode_without_bom_handling(bytes);
            if had_errors {
                return Err(CrosswalkError::MalformedXml(format!("invalid {} byte sequence", enc.name())));
            }
            return Ok(strip_declared_encoding(text));
        }
    }
    std::str::from_utf8(bytes)
        .map(Cow::Borrowed)
        .map_err(|e| CrosswalkError::MalformedXml(format!("invalid UTF-8: {e}")))
}

fn declared_encoding(bytes: &[u8]) -> Option<String> {
    let head = &bytes[..bytes.len().min(200)];
    let head = String::from_utf8_lossy(head);
    let decl = head.strip_prefix("<?xml")?;
    let decl = &decl[..decl.find("?>")?];
    let idx = decl.find("encoding")?;
    let rest = decl[idx + "encoding".len()..].trim_start().strip_prefix('=')?.trim_start();
    let quote = rest.chars().next().filter(|c| *c == '"' || *c == '\'')?;
    let rest = &rest[1..];
    Some(rest[..rest.find(quote)?].to_string())
}

/// Once decoded, the declaration's encoding label no longer describes the
/// text; drop the declaration entirely.
fn strip_declared_encoding(text: Cow<'_, str>) -> Cow<'_, str> {
    let owned = text.into_owned();
    if owned.starts_with("<?xml") {
        if let Some(end) = owned.find("?>") {
            return Cow::Owned(owned[end + 2..].to_string());
        }
    }
    Cow::Owned(owned)
}

pub fn parse_document(text: &str) -> Result<Document<'_>, CrosswalkError> {
    let opts = roxmltree::ParsingOptions { allow_dtd: true, ..Default::default() };
    Document::parse_with_options(text, opts).map_err(|e| CrosswalkError::MalformedXml(e.to_string()))
}

/// Namespace policy for one standard: an element matches a name when the
/// local names agree and it is either un-namespaced or in one of `ns`.
#[derive(Debug, Clone, Copy)]
pub struct Scope {
    pub ns: &'static [&'static str],
}

impl Scope {
    pub fn matches(&self, node: Node<'_, '_>, local: &str) -> bool {
        if !node.is_element() || node.tag_name().name() != local {
            return false;
        }
        match node.tag_name().namespace() {
            None => true,
            Some(ns) => self.ns.iter().any(|p| ns.starts_with(p)),
        }
    }

    pub fn children<'a, 'i>(&self, node: Node<'a, 'i>, local: &'a str) -> impl Iterator<Item = Node<'a, 'i>> + 'a {
        let scope = *self;
        node.children().filter(move |c| scope.matches(*c, local))
    }

    pub fn child<'a, 'i>(&self, node: Node<'a, 'i>, local: &'a str) -> Option<Node<'a, 'i>> {
        self.children(node, local).next()
    }

    /// All nodes reached by following `path` from `node`, in document order.
    pub fn select<'a, 'i>(&self, node: Node<'a, 'i>, path: &[&'a str]) -> Vec<Node<'a, 'i>> {
        let mut current = vec![node];
        for step in path {
            current = current.iter().flat_map(|n| self.children(*n, step)).collect();
            if current.is_empty() {
                break;
            }
        }
        current
    }

    pub fn first<'a, 'i>(&self, node: Node<'a, 'i>, path: &[&'a str]) -> Option<Node<'a, 'i>> {
        self.select(node, path).into_iter().next()
    }

    /// Text of the first non-empty match of `path`.
    pub fn first_text(&self, node: Node<'_, '_>, path: &[&str]) -> Option<String> {
        self.select(node, path).into_iter().map(text).find(|t| !t.is_empty())
    }

    pub fn all_text(&self, node: Node<'_, '_>, path: &[&str]) -> Vec<String> {
        self.select(node, path).into_iter().map(text).filter(|t| !t.is_empty()).collect()
    }

    pub fn descendants<'a, 'i>(&self, node: Node<'a, 'i>, local: &'a str) -> impl Iterator<Item = Node<'a, 'i>> + 'a {
        let scope = *self;
        node.descendants().filter(move |c| scope.matches(*c, local))
    }

    pub fn descendant_text(&self, node: Node<'_, '_>, local: &str) -> Option<String> {
        self.descendants(node, local).map(text).find(|t| !t.is_empty())
    }
}

/// Concatenated descendant text, trimmed.
pub fn text(node: Node<'_, '_>) -> String {
    let mut out = String::new();
    for d in node.descendants().filter(|d| d.is_text()) {
        out.push_str(d.text().unwrap_or_default());
    }
    out.trim().to_string()
}

/// Escapes text for element content and double-quoted attributes, dropping
/// characters XML 1.0 cannot carry.
pub fn escape(s: &str) -> Cow<'_, str> {
    if s.chars().all(is_xml_char) {
        return quick_xml::escape::escape(s);
    }
    let cleaned: String = s.chars().filter(|c| is_xml_char(*c)).collect();
    Cow::Owned(quick_xml::escape::escape(&cleaned).into_owned())
}

fn is_xml_char(c: char) -> bool {
    matches!(c, '\u{9}' | '\u{A}' | '\u{D}' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..)
}

/// Returns the XML of `node` as a standalone fragment: its source text with
/// every in-scope namespace declaration it relies on made explicit on the
/// start tag.
pub fn standalone_fragment(source: &str, node: Node<'_, '_>) -> String {
    let raw = &source[node.range()];
    let tag_end = start_tag_end(raw).unwrap_or(raw.len());
    let start_tag = &raw[..tag_end];
    let name_end = raw[1..]
        .find(|c: char| c.is_whitespace() || c == '>' || c == '/')
        .map(|i| i + 1)
        .unwrap_or(tag_end);

    let mut extra = String::new();
    for ns in node.namespaces() {
        if ns.uri() == "http://www.w3.org/XML/1998/namespace" {
            continue;
        }
        let attr = match ns.name() {
            Some(prefix) => format!("xmlns:{prefix}="),
            None => "xmlns=".to_string(),
        };
        if !start_tag.contains(&attr) {
            extra.push(' ');
            extra.push_str(&attr);
            extra.push('"');
            extra.push_str(&escape(ns.uri()));
            extra.push('"');
        }
    }
    let mut out = String::with_capacity(raw.len() + extra.len());
    out.push_str(&raw[..name_end]);
    out.push_str(&extra);
    out.push_str(&raw[name_end..]);
    out
}

fn start_tag_end(raw: &str) -> Option<usize> {
    let mut quote = None;
    for (i, c) in raw.char_indices() {
        match (quote, c) {
            (None, '"' | '\'') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, '>') => return Some(i),
            _ => {}
        }
    }
    None
}
