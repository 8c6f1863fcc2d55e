//! Tokenizer and token cursor shared by the `.ifsm`, `.pmap` and `.tfsm`
//! readers.

use super::{DslError, SourceSpan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u64),
    Sym(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

const SYMBOLS: [&str; 14] = ["->", "<-", "{", "}", "=", ";", ":", ",", "!", "?", "(", ")", "[", "]"];

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        let span = |len: usize| SourceSpan { line, column: col, length: len as u32 };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            i += 1;
            col += 1;
        } else if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                col += 1;
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            tokens.push(Token { tok: Tok::Ident(word), span: span(i - start) });
            col += (i - start) as u32;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let digits: String = chars[start..i].iter().collect();
            let value = digits.parse::<u64>().map_err(|_| {
                DslError::new("int-overflow", "integer literal does not fit in 64 bits", span(i - start))
            })?;
            tokens.push(Token { tok: Tok::Int(value), span: span(i - start) });
            col += (i - start) as u32;
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let sym = SYMBOLS
                .iter()
                .find(|s| s.len() == 2 && **s == two)
                .or_else(|| SYMBOLS.iter().find(|s| s.len() == 1 && s.starts_with(c)));
            let Some(sym) = sym else {
                return Err(DslError::new("unexpected-character", format!("unexpected character {c:?}"), span(1)));
            };
            tokens.push(Token { tok: Tok::Sym(sym), span: span(sym.len()) });
            i += sym.len();
            col += sym.len() as u32;
        }
    }
    let eof_span = tokens.last().map(|t| t.span).unwrap_or(SourceSpan { line: 1, column: 1, length: 0 });
    tokens.push(Token { tok: Tok::Eof, span: eof_span });
    Ok(tokens)
}

pub(crate) struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
}

impl Cursor {
    pub fn new(text: &str) -> Result<Self, DslError> {
        Ok(Cursor { tokens: tokenize(text)?, pos: 0 })
    }

    pub fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    pub fn span(&self) -> SourceSpan {
        self.peek().span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    pub fn error(&self, expected: &[&str]) -> DslError {
        let found = self.peek().tok.describe();
        let mut err =
            DslError::new("syntax", format!("expected {}, found {found}", expected.join(" or ")), self.span());
        err.expected = expected.iter().map(|s| s.to_string()).collect();
        err
    }

    pub fn at_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    pub fn at_sym(&self, sym: &str) -> bool {
        matches!(self.peek().tok, Tok::Sym(s) if s == sym)
    }

    pub fn at_int(&self) -> bool {
        matches!(self.peek().tok, Tok::Int(_))
    }

    pub fn eat_sym(&mut self, sym: &str) -> bool {
        if self.at_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, sym: &'static str) -> Result<SourceSpan, DslError> {
        if self.at_sym(sym) {
            Ok(self.bump().span)
        } else {
            Err(self.error(&[sym]))
        }
    }

    pub fn expect_kw(&mut self, kw: &'static str) -> Result<SourceSpan, DslError> {
        if self.at_kw(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.error(&[kw]))
        }
    }

    /// Accept one of several keywords, returning which.
    pub fn expect_one_of(&mut self, kws: &[&'static str]) -> Result<(&'static str, SourceSpan), DslError> {
        for kw in kws {
            if self.at_kw(kw) {
                return Ok((kw, self.bump().span));
            }
        }
        Err(self.error(kws))
    }

    pub fn expect_ident(&mut self, what: &'static str) -> Result<(String, SourceSpan), DslError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                Ok((s, self.bump().span))
            }
            _ => Err(self.error(&[what])),
        }
    }

    pub fn expect_int(&mut self, what: &'static str) -> Result<(u64, SourceSpan), DslError> {
        match self.peek().tok {
            Tok::Int(n) => Ok((n, self.bump().span)),
            _ => Err(self.error(&[what])),
        }
    }

    pub fn expect_u32(&mut self, what: &'static str) -> Result<(u32, SourceSpan), DslError> {
        let (n, span) = self.expect_int(what)?;
        let n =
            u32::try_from(n).map_err(|_| DslError::new("int-overflow", format!("{what} {n} exceeds 32 bits"), span))?;
        Ok((n, span))
    }

    pub fn expect_eof(&mut self) -> Result<(), DslError> {
        if self.peek().tok == Tok::Eof {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }
}
