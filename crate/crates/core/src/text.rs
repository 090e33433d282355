use crate::error::{Error, Result};

/// Width of every VARCHAR column in the schema.
pub const MAX_TEXT: usize = 255;

pub fn truncate_chars(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}

/// Trims and checks a required text field.
pub fn required(field: &str, value: &str) -> Result<String> {
    let v = value.trim();
    if v.is_empty() {
        return Err(Error::validation(format!("{field} must not be empty")));
    }
    bounded(field, v)
}

pub fn bounded(field: &str, value: &str) -> Result<String> {
    if value.chars().count() > MAX_TEXT {
        return Err(Error::validation(format!(
            "{field} exceeds {MAX_TEXT} characters"
        )));
    }
    Ok(value.to_string())
}

/// Optional text: blank collapses to `None`.
pub fn optional(field: &str, value: Option<&str>) -> Result<Option<String>> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => bounded(field, v).map(Some),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_counts_chars_not_bytes() {
        assert_eq!(truncate_chars("héllo", 2), "hé");
        assert_eq!(truncate_chars("ab", 5), "ab");
    }

    #[test]
    fn limits() {
        assert!(required("name", "  ").is_err());
        assert_eq!(required("name", " a ").unwrap(), "a");
        assert!(bounded("name", &"é".repeat(256)).is_err());
        assert!(bounded("name", &"é".repeat(255)).is_ok());
        assert_eq!(optional("d", Some("  ")).unwrap(), None);
    }
}
