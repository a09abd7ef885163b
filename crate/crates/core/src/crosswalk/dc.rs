use roxmltree::Node;

use super::detect::DC as S;
use super::export::parse_box_coverage;
use super::{Extracted, RawBox};

fn is_url(s: &str) -> bool {
    let lower = s.to_ascii_lowercase();
    ["http://", "https://", "ftp://", "ftps://"].iter().any(|p| lower.starts_with(p))
}

pub(crate) fn extract(root: Node<'_, '_>) -> Extracted {
    // Only direct children: oai_dc and bare DC containers are flat.
    let values = |local: &str| S.all_text(root, &[local]);

    let identifiers = values("identifier");
    let (urls, others): (Vec<String>, Vec<String>) = identifiers.into_iter().partition(|i| is_url(i));

    let bbox = values("coverage").iter().find_map(|c| parse_box_coverage(c)).map(|[w, s, e, n]| RawBox {
        west: Some(w.to_string()),
        south: Some(s.to_string()),
        east: Some(e.to_string()),
        north: Some(n.to_string()),
    });

    Extracted {
        local_id: others.into_iter().next(),
        title: values("title").into_iter().next(),
        r#abstract: values("description").into_iter().next(),
        keywords: values("subject"),
        authors: values("creator"),
        data_urls: urls,
        bbox,
        temporal: None,
        datestamp: values("date").into_iter().next(),
    }
}
