//! Double-quoted string literals with backslash escapes, shared by the action
//! grammar and the compact screen format.

/// Wraps `s` in double quotes, escaping `"` and `\`.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuoteError {
    #[error("expected an opening double quote")]
    NotQuoted,
    #[error("unterminated quoted string")]
    Unterminated,
}

/// Reads one quoted literal from the start of `input`, returning the decoded
/// text and the remainder after the closing quote.
pub fn read_quoted(input: &str) -> Result<(String, &str), QuoteError> {
    let mut chars = input.char_indices();
    match chars.next() {
        Some((_, '"')) => {}
        _ => return Err(QuoteError::NotQuoted),
    }
    let mut out = String::new();
    let mut escaped = false;
    for (i, c) in chars {
        if escaped {
            out.push(c);
            escaped = false;
        } else if c == '\\' {
            escaped = true;
        } else if c == '"' {
            return Ok((out, &input[i + 1..]));
        } else {
            out.push(c);
        }
    }
    Err(QuoteError::Unterminated)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_quotes_and_backslashes() {
        assert_eq!(quote(r#"say "hi""#), r#""say \"hi\"""#);
        assert_eq!(quote(r"a\b"), r#""a\\b""#);
    }

    #[test]
    fn reads_back_with_remainder() {
        let (s, rest) = read_quoted(r#""say \"hi\"" to id=3"#).unwrap();
        assert_eq!(s, r#"say "hi""#);
        assert_eq!(rest, " to id=3");
    }

    #[test]
    fn rejects_unbalanced() {
        assert_eq!(read_quoted(r#""abc"#), Err(QuoteError::Unterminated));
        assert_eq!(read_quoted(r#""abc\""#), Err(QuoteError::Unterminated));
        assert_eq!(read_quoted("abc"), Err(QuoteError::NotQuoted));
    }
}
