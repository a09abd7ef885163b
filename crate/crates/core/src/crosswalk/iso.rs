use roxmltree::Node;

use super::detect::ISO as S;
use super::xml::text;
use super::{Extracted, RawBox};

/// Text of a 19139 property: `gco:CharacterString`, `gmx:Anchor`,
/// `gco:Decimal`, `gco:Date`... or the element's own text.
fn value(node: Node<'_, '_>) -> Option<String> {
    let inner = node.children().find(|c| c.is_element()).map(text).unwrap_or_else(|| text(node));
    Some(inner).filter(|t| !t.is_empty())
}

fn first_value(root: Node<'_, '_>, path: &[&str]) -> Option<String> {
    S.select(root, path).into_iter().find_map(value)
}

pub(crate) fn extract(root: Node<'_, '_>) -> Extracted {
    let ident = S.first(root, &["identificationInfo", "MD_DataIdentification"]);
    let Some(ident) = ident else {
        return Extracted {
            local_id: first_value(root, &["fileIdentifier"]),
            datestamp: first_value(root, &["dateStamp"]),
            ..Default::default()
        };
    };
    let citation = S.first(ident, &["citation", "CI_Citation"]);

    let keywords = S
        .descendants(ident, "MD_Keywords")
        .flat_map(|k| S.children(k, "keyword").filter_map(value).collect::<Vec<_>>())
        .collect();

    let authors = citation
        .map(|c| {
            S.descendants(c, "CI_ResponsibleParty")
                .filter_map(|p| {
                    S.child(p, "individualName")
                        .and_then(value)
                        .or_else(|| S.child(p, "organisationName").and_then(value))
                })
                .collect()
        })
        .unwrap_or_default();

    let bbox = S.descendants(ident, "EX_GeographicBoundingBox").next().map(|b| RawBox {
        west: first_value(b, &["westBoundLongitude"]),
        south: first_value(b, &["southBoundLatitude"]),
        east: first_value(b, &["eastBoundLongitude"]),
        north: first_value(b, &["northBoundLatitude"]),
    });

    let temporal = S.descendants(ident, "EX_TemporalExtent").next().and_then(|t| {
        let begin = S.descendant_text(t, "beginPosition");
        let end = S.descendant_text(t, "endPosition");
        if begin.is_some() || end.is_some() {
            return Some((begin, end));
        }
        let instant = S.descendant_text(t, "timePosition")?;
        Some((Some(instant.clone()), Some(instant)))
    });

    let data_urls = S
        .first(root, &["distributionInfo"])
        .map(|d| {
            S.descendants(d, "CI_OnlineResource")
                .filter_map(|r| S.child(r, "linkage").and_then(value))
                .collect()
        })
        .unwrap_or_default();

    Extracted {
        local_id: first_value(root, &["fileIdentifier"]),
        title: citation.and_then(|c| first_value(c, &["title"])),
        r#abstract: first_value(ident, &["abstract"]),
        keywords,
        authors,
        data_urls,
        bbox,
        temporal,
        datestamp: first_value(root, &["dateStamp"]),
    }
}
