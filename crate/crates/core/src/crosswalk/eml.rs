use roxmltree::Node;

use super::detect::EML as S;
use super::xml::text;
use super::{Extracted, RawBox};

pub(crate) fn extract(root: Node<'_, '_>) -> Extracted {
    let dataset = S.child(root, "dataset");
    let Some(ds) = dataset else {
        return Extracted { local_id: root.attribute("packageId").map(str::to_owned), ..Default::default() };
    };

    let authors = S
        .children(ds, "creator")
        .filter_map(|creator| {
            if let Some(name) = S.child(creator, "individualName") {
                let surname = S.first_text(name, &["surName"]).unwrap_or_default();
                let given = S.all_text(name, &["givenName"]).join(" ");
                let full = match (surname.is_empty(), given.is_empty()) {
                    (false, false) => format!("{surname}, {given}"),
                    (false, true) => surname,
                    (true, _) => given,
                };
                return Some(full).filter(|s| !s.is_empty());
            }
            S.first_text(creator, &["organizationName"])
        })
        .collect();

    let bbox = S.first(ds, &["coverage", "geographicCoverage", "boundingCoordinates"]).map(|b| RawBox {
        west: S.first_text(b, &["westBoundingCoordinate"]),
        south: S.first_text(b, &["southBoundingCoordinate"]),
        east: S.first_text(b, &["eastBoundingCoordinate"]),
        north: S.first_text(b, &["northBoundingCoordinate"]),
    });

    let temporal = S.first(ds, &["coverage", "temporalCoverage"]).and_then(|tc| {
        if let Some(range) = S.child(tc, "rangeOfDates") {
            return Some((
                S.first_text(range, &["beginDate", "calendarDate"]),
                S.first_text(range, &["endDate", "calendarDate"]),
            ));
        }
        let single = S.first_text(tc, &["singleDateTime", "calendarDate"])?;
        Some((Some(single.clone()), Some(single)))
    });

    // Abstracts are usually wrapped in <para> elements; join them with spaces.
    let abstract_text = S.child(ds, "abstract").map(|a| {
        let paras: Vec<String> = a
            .descendants()
            .filter(|n| n.is_element() && n.tag_name().name() == "para")
            .map(text)
            .collect();
        if paras.is_empty() { text(a) } else { paras.join(" ") }
    });

    Extracted {
        local_id: root.attribute("packageId").map(str::to_owned),
        title: S.first_text(ds, &["title"]),
        r#abstract: abstract_text,
        keywords: S.all_text(ds, &["keywordSet", "keyword"]),
        authors,
        data_urls: S.all_text(ds, &["distribution", "online", "url"]),
        bbox,
        temporal,
        datestamp: S.first_text(ds, &["pubDate"]),
    }
}
