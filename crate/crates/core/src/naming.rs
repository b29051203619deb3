//! Identifier helpers shared by grouping and code generation.

/// `"search bar"`, `"search_bar"` and `"SearchBar"` all become `"SearchBar"`.
/// Returns `fallback` when nothing alphanumeric remains; identifiers never start with a digit.
pub fn pascal_case(raw: &str, fallback: &str) -> String {
    let mut out = String::new();
    for part in raw.split(|c: char| !c.is_ascii_alphanumeric()) {
        let mut chars = part.chars();
        if let Some(first) = chars.next() {
            out.push(first.to_ascii_uppercase());
            out.extend(chars);
        }
    }
    if out.is_empty() {
        return fallback.to_string();
    }
    if out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert_str(0, fallback);
    }
    out
}

/// Returns `base`, or `base_2`, `base_3`, … whichever is not yet in `taken`.
pub fn unique_name(base: &str, taken: &mut std::collections::HashSet<String>) -> String {
    if taken.insert(base.to_string()) {
        return base.to_string();
    }
    let mut n = 2;
    loop {
        let candidate = format!("{base}_{n}");
        if taken.insert(candidate.clone()) {
            return candidate;
        }
        n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn pascal() {
        assert_eq!(pascal_case("search bar", "X"), "SearchBar");
        assert_eq!(pascal_case("search_bar", "X"), "SearchBar");
        assert_eq!(pascal_case("SearchBar", "X"), "SearchBar");
        assert_eq!(pascal_case("  -- ", "Region"), "Region");
        assert_eq!(pascal_case("3 cards", "Region"), "Region3Cards");
        assert_eq!(pascal_case("café menu", "X"), "CafMenu");
    }

    #[test]
    fn uniqueness() {
        let mut taken = HashSet::new();
        assert_eq!(unique_name("A", &mut taken), "A");
        assert_eq!(unique_name("A", &mut taken), "A_2");
        assert_eq!(unique_name("A", &mut taken), "A_3");
    }
}
