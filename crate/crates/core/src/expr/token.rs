use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Number,
    Identifier,
    Operator,
    Punctuation,
    Keyword,
    String,
}

/// A lexeme borrowed from the source text, with its byte offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'src> {
    pub kind: TokenKind,
    pub text: &'src str,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("lex error at offset {position}: {message}")]
pub struct LexError {
    pub position: usize,
    pub message: String,
}

pub const KEYWORDS: [&str; 5] = ["not", "and", "or", "true", "false"];

/// Splits `source` into tokens. Whitespace is dropped, but every token keeps
/// its exact slice and offset, so the input can be rebuilt from the stream.
pub fn tokenize(source: &str) -> Result<Vec<Token<'_>>, LexError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut pos = 0;

    while pos < bytes.len() {
        let c = bytes[pos];
        if c.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        let start = pos;
        let kind = if c.is_ascii_digit() {
            pos = scan_number(bytes, pos);
            TokenKind::Number
        } else if c.is_ascii_alphabetic() || c == b'_' {
            while pos < bytes.len() && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_') {
                pos += 1;
            }
            if KEYWORDS.contains(&&source[start..pos]) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            }
        } else if c == b'"' {
            pos = scan_string(source, pos)?;
            TokenKind::String
        } else if matches!(c, b'(' | b')' | b',') {
            pos += 1;
            TokenKind::Punctuation
        } else if matches!(c, b'+' | b'-' | b'*' | b'/' | b'%' | b'^') {
            pos += 1;
            TokenKind::Operator
        } else if matches!(c, b'<' | b'>') {
            pos += 1;
            if bytes.get(pos) == Some(&b'=') {
                pos += 1;
            }
            TokenKind::Operator
        } else if matches!(c, b'=' | b'!') {
            if bytes.get(pos + 1) != Some(&b'=') {
                return Err(LexError {
                    position: pos,
                    message: format!("expected '=' after '{}'", c as char),
                });
            }
            pos += 2;
            TokenKind::Operator
        } else {
            let ch = source[pos..].chars().next().unwrap_or('?');
            return Err(LexError {
                position: pos,
                message: format!("unexpected character {ch:?}"),
            });
        };
        tokens.push(Token {
            kind,
            text: &source[start..pos],
            position: start,
        });
    }
    Ok(tokens)
}

fn scan_digits(bytes: &[u8], mut pos: usize) -> usize {
    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
        pos += 1;
    }
    pos
}

fn scan_number(bytes: &[u8], pos: usize) -> usize {
    let mut pos = scan_digits(bytes, pos);
    if bytes.get(pos) == Some(&b'.') && bytes.get(pos + 1).is_some_and(u8::is_ascii_digit) {
        pos = scan_digits(bytes, pos + 1);
    }
    if matches!(bytes.get(pos), Some(b'e' | b'E')) {
        let mut exp = pos + 1;
        if matches!(bytes.get(exp), Some(b'+' | b'-')) {
            exp += 1;
        }
        if bytes.get(exp).is_some_and(u8::is_ascii_digit) {
            pos = scan_digits(bytes, exp);
        }
    }
    pos
}

fn scan_string(source: &str, start: usize) -> Result<usize, LexError> {
    let bytes = source.as_bytes();
    let mut pos = start + 1;
    while pos < bytes.len() {
        match bytes[pos] {
            b'"' => return Ok(pos + 1),
            b'\\' => {
                if !matches!(bytes.get(pos + 1), Some(b'"' | b'\\' | b'n' | b't' | b'r')) {
                    return Err(LexError {
                        position: pos,
                        message: "invalid escape sequence".into(),
                    });
                }
                pos += 2;
            }
            _ => pos += 1,
        }
    }
    Err(LexError {
        position: start,
        message: "unterminated string".into(),
    })
}

/// Decodes the body of a string token (quotes included in `text`).
pub(crate) fn unescape(text: &str) -> String {
    let inner = &text[1..text.len() - 1];
    let mut out = String::with_capacity(inner.len());
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('r') => out.push('\r'),
                Some(other) => out.push(other),
                None => {}
            }
        } else {
            out.push(c);
        }
    }
    out
}

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            other => out.push(other),
        }
    }
    out.push('"');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<TokenKind> {
        tokenize(src).unwrap().iter().map(|t| t.kind).collect()
    }

    #[test]
    fn pv_formula_tokens() {
        use TokenKind::*;
        assert_eq!(
            kinds("eta * I * a"),
            [Identifier, Operator, Identifier, Operator, Identifier]
        );
    }

    #[test]
    fn conditional_call_has_eight_tokens() {
        assert_eq!(tokenize("if(c, 0, p)").unwrap().len(), 8);
    }

    #[test]
    fn unknown_character_reports_offset() {
        let err = tokenize("3 @ 4").unwrap_err();
        assert_eq!(err.position, 2);
    }

    #[test]
    fn lone_equals_is_rejected() {
        assert_eq!(tokenize("a = b").unwrap_err().position, 2);
    }

    #[test]
    fn numbers_and_strings() {
        let toks = tokenize("1.5e-3 42").unwrap();
        assert_eq!(toks[0].text, "1.5e-3");
        assert_eq!(toks[1].text, "42");
        // a trailing '.' is not part of the number
        assert_eq!(tokenize("7.").unwrap_err().position, 1);
        let toks = tokenize(r#""a \"q\"" <= 2"#).unwrap();
        assert_eq!(unescape(toks[0].text), "a \"q\"");
        assert_eq!(toks[1].text, "<=");
    }

    #[test]
    fn unterminated_string() {
        assert_eq!(tokenize("\"abc").unwrap_err().position, 0);
    }

    #[test]
    fn token_texts_rebuild_source() {
        let src = "if(x >= 2.5,  \"hi\",not y)  % 3";
        let toks = tokenize(src).unwrap();
        let mut rebuilt = String::new();
        for t in &toks {
            while rebuilt.len() < t.position {
                rebuilt.push_str(&src[rebuilt.len()..rebuilt.len() + 1]);
            }
            rebuilt.push_str(t.text);
        }
        rebuilt.push_str(&src[rebuilt.len()..]);
        assert_eq!(rebuilt, src);
    }
}
