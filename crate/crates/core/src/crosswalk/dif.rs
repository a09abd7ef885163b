use roxmltree::Node;

use super::detect::DIF as S;
use super::xml::text;
use super::{Extracted, RawBox};

pub(crate) fn extract(root: Node<'_, '_>) -> Extracted {
    let entry_id = S.child(root, "Entry_ID").and_then(|e| {
        // DIF 10 nests the id in Short_Name; DIF 9 keeps it as text.
        S.first_text(e, &["Short_Name"]).or_else(|| Some(text(e)).filter(|t| !t.is_empty()))
    });

    let mut keywords = S.all_text(root, &["Keyword"]);
    for params in S.children(root, "Parameters").chain(S.children(root, "Science_Keywords")) {
        let parts: Vec<String> = params
            .children()
            .filter(|c| c.is_element())
            .map(text)
            .filter(|t| !t.is_empty())
            .collect();
        if !parts.is_empty() {
            keywords.push(parts.join(" > "));
        }
    }

    let bbox = S.first(root, &["Spatial_Coverage"]).map(|sc| RawBox {
        west: S.descendant_text(sc, "Westernmost_Longitude"),
        south: S.descendant_text(sc, "Southernmost_Latitude"),
        east: S.descendant_text(sc, "Easternmost_Longitude"),
        north: S.descendant_text(sc, "Northernmost_Latitude"),
    });

    let temporal = S.first(root, &["Temporal_Coverage"]).map(|tc| {
        (
            S.descendant_text(tc, "Start_Date").or_else(|| S.descendant_text(tc, "Beginning_Date_Time")),
            S.descendant_text(tc, "Stop_Date").or_else(|| S.descendant_text(tc, "Ending_Date_Time")),
        )
    });

    let summary = S
        .first_text(root, &["Summary", "Abstract"])
        .or_else(|| S.first_text(root, &["Summary"]));

    Extracted {
        local_id: entry_id,
        title: S.first_text(root, &["Entry_Title"]),
        r#abstract: summary,
        keywords,
        authors: S.all_text(root, &["Data_Set_Citation", "Dataset_Creator"]),
        data_urls: S.all_text(root, &["Related_URL", "URL"]),
        bbox,
        temporal,
        datestamp: S.first_text(root, &["Last_DIF_Revision_Date"]),
    }
}
