use super::{AslError, ErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Dotted identifier such as `ip.src`.
    Path(String),
    Int(String),
    Decimal(String),
    /// Dotted-quad style numeric run, kept as text.
    Address(String),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Assign,
    Op(&'static str),
    And,
    Or,
    Not,
    Minus,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Path(s) | Tok::Int(s) | Tok::Decimal(s) | Tok::Address(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Op(op) => format!("`{op}`"),
            Tok::Eof => "end of input".into(),
            other => format!("{other:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn lex(src: &str) -> Result<Vec<Token>, AslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, msg: String| AslError::new(ErrorKind::Syntax, line, col, msg);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut advance = |n: usize, i: &mut usize| {
            *i += n;
            col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i);
            continue;
        }
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let tok = match two.as_str() {
            "==" => Some(Tok::Op("==")),
            "!=" => Some(Tok::Op("!=")),
            "<=" => Some(Tok::Op("<=")),
            ">=" => Some(Tok::Op(">=")),
            "&&" => Some(Tok::And),
            "||" => Some(Tok::Or),
            _ => None,
        };
        if let Some(tok) = tok {
            out.push(Token { tok, line: tl, col: tc });
            advance(2, &mut i);
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            ';' => Some(Tok::Semi),
            '=' => Some(Tok::Assign),
            '<' => Some(Tok::Op("<")),
            '>' => Some(Tok::Op(">")),
            '!' => Some(Tok::Not),
            '-' => Some(Tok::Minus),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, line: tl, col: tc });
            advance(1, &mut i);
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            let mut j = i + 1;
            loop {
                match chars.get(j) {
                    None | Some('\n') => return Err(err(tl, tc, "unterminated string".into())),
                    Some('"') => break,
                    Some('\\') => {
                        match chars.get(j + 1) {
                            Some('"') => s.push('"'),
                            Some('\\') => s.push('\\'),
                            Some('n') => s.push('\n'),
                            _ => return Err(err(tl, tc + j - i, "bad escape".into())),
                        }
                        j += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        j += 1;
                    }
                }
            }
            out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
            advance(j + 1 - i, &mut i);
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            if text.ends_with('.') {
                return Err(err(tl, tc, format!("malformed number `{text}`")));
            }
            if j < chars.len() && (chars[j].is_alphabetic() || chars[j] == '_') {
                return Err(err(tl, tc + j - i, format!("unexpected `{}` after number", chars[j])));
            }
            let tok = match text.matches('.').count() {
                0 => Tok::Int(text),
                1 => Tok::Decimal(text),
                _ => Tok::Address(text),
            };
            out.push(Token { tok, line: tl, col: tc });
            advance(j - i, &mut i);
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_' || chars[j] == '.') {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            if text.ends_with('.') || text.contains("..") {
                return Err(err(tl, tc, format!("malformed path `{text}`")));
            }
            let tok = match text.as_str() {
                "and" | "AND" => Tok::And,
                "or" | "OR" => Tok::Or,
                "not" | "NOT" => Tok::Not,
                _ if text.contains('.') => Tok::Path(text),
                _ => Tok::Ident(text),
            };
            out.push(Token { tok, line: tl, col: tc });
            advance(j - i, &mut i);
            continue;
        }
        return Err(err(tl, tc, format!("unexpected character `{c}`")));
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
