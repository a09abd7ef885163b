use roxmltree::Node;

use super::detect::FGDC as S;
use super::{Extracted, RawBox};

pub(crate) fn extract(root: Node<'_, '_>) -> Extracted {
    let cite = ["idinfo", "citation", "citeinfo"];
    let at = |tail: &[&'static str]| -> Vec<&'static str> { cite.iter().chain(tail).copied().collect() };

    let bounding = S.first(root, &["idinfo", "spdom", "bounding"]);
    let bbox = bounding.map(|b| RawBox {
        west: S.first_text(b, &["westbc"]),
        south: S.first_text(b, &["southbc"]),
        east: S.first_text(b, &["eastbc"]),
        north: S.first_text(b, &["northbc"]),
    });

    let temporal = S.first(root, &["idinfo", "timeperd", "timeinfo"]).and_then(|info| {
        if let Some(range) = S.first(info, &["rngdates"]) {
            return Some((S.first_text(range, &["begdate"]), S.first_text(range, &["enddate"])));
        }
        let single = S
            .first_text(info, &["sngdate", "caldate"])
            .or_else(|| S.first_text(info, &["mdattim", "sngdate", "caldate"]))?;
        Some((Some(single.clone()), Some(single)))
    });

    Extracted {
        local_id: None,
        title: S.first_text(root, &at(&["title"])),
        r#abstract: S.first_text(root, &["idinfo", "descript", "abstract"]),
        keywords: S.all_text(root, &["idinfo", "keywords", "theme", "themekey"]),
        authors: S.all_text(root, &at(&["origin"])),
        data_urls: S.all_text(root, &at(&["onlink"])),
        bbox,
        temporal,
        datestamp: S.first_text(root, &["metainfo", "metd"]),
    }
}
