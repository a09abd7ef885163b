/// Splits text into lowercase tokens.
///
/// Any character that is not alphanumeric (in the Unicode sense) separates
/// tokens; digits are kept; there is no stemming and no stopword list.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(tokenize("Net Primary Productivity (NPP)"), ["net", "primary", "productivity", "npp"]);
        assert_eq!(tokenize("CO2-flux 2003"), ["co2", "flux", "2003"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn unicode() {
        assert_eq!(tokenize("Größe ÉTÉ_été"), ["größe", "été", "été"]);
        assert_eq!(tokenize("  --  "), Vec::<String>::new());
    }
}
