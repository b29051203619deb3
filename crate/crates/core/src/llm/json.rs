use serde::de::DeserializeOwned;

/// Locate the JSON payload in a model answer: the first fenced block if any, otherwise
/// the span from the first `{`/`[` to the last matching closer.
pub fn extract_json(text: &str) -> Option<&str> {
    if let Some(start) = text.find("```") {
        let after = &text[start + 3..];
        let body_start = after.find('\n').map_or(0, |i| i + 1);
        let body = &after[body_start..];
        if let Some(end) = body.find("```") {
            let inner = body[..end].trim();
            if !inner.is_empty() {
                return Some(inner);
            }
        }
    }
    let open = text.find(['{', '['])?;
    let closer = if text[open..].starts_with('{') { '}' } else { ']' };
    let close = text.rfind(closer)?;
    (close > open).then(|| &text[open..=close])
}

pub fn parse_json_response<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let payload = extract_json(text).ok_or_else(|| "no JSON payload in response".to_string())?;
    serde_json::from_str(payload).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fenced_and_bare_payloads() {
        assert_eq!(extract_json("here:\n```json\n{\"a\":1}\n```\nbye"), Some("{\"a\":1}"));
        assert_eq!(extract_json("```\n[1,2]\n```"), Some("[1,2]"));
        assert_eq!(extract_json("sure {\"a\": {\"b\": 2}} done"), Some("{\"a\": {\"b\": 2}}"));
        assert_eq!(extract_json("no json"), None);
        assert_eq!(extract_json("} {"), None);
        let v: Vec<u8> = parse_json_response("[1, 2]").unwrap();
        assert_eq!(v, [1, 2]);
        assert!(parse_json_response::<Vec<u8>>("[1,").is_err());
    }
}
