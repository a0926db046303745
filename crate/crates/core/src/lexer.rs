//! A small lexer for Python and Java source text.
//!
//! Produces identifiers, numeric and string literals and punctuation, with
//! comments removed. It does not validate syntax; unterminated strings run to
//! the end of input.

use crate::corpus::Language;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    /// String or character literal; `text` holds the contents without
    /// quotes or prefix.
    Str,
    Punct,
    /// End of a logical Python line (only emitted by [`lex_lines`]).
    Newline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lexeme<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    pub offset: usize,
}

impl<'a> Lexeme<'a> {
    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == p
    }

    pub fn is_ident(&self) -> bool {
        self.kind == TokenKind::Ident
    }
}

const OPERATORS: [&str; 29] = [
    ">>>=", "**=", "//=", ">>=", "<<=", "...", ">>>", "->", "==", "!=", "<=", ">=", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "**", "//", "<<", ">>", "&&", "||", "++", "--", "::",
];

/// All lexemes except line ends.
pub fn lex(code: &str, language: Language) -> Vec<Lexeme<'_>> {
    lex_lines(code, language)
        .into_iter()
        .filter(|l| l.kind != TokenKind::Newline)
        .collect()
}

/// Lexemes including [`TokenKind::Newline`] markers at the end of each
/// logical Python line (outside brackets). Java never produces them.
pub fn lex_lines(code: &str, language: Language) -> Vec<Lexeme<'_>> {
    Lexer {
        src: code,
        bytes: code.as_bytes(),
        pos: 0,
        depth: 0,
        language,
        out: Vec::new(),
    }
    .run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    depth: usize,
    language: Language,
    out: Vec<Lexeme<'a>>,
}

impl<'a> Lexer<'a> {
    fn peek(&self, ahead: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(ahead)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s)
    }

    fn push(&mut self, kind: TokenKind, start: usize, end: usize) {
        self.out.push(Lexeme {
            kind,
            text: &self.src[start..end],
            offset: start,
        });
    }

    fn newline(&mut self) {
        if self.language == Language::Python
            && self.depth == 0
            && self.out.last().is_some_and(|l| l.kind != TokenKind::Newline)
        {
            self.out.push(Lexeme {
                kind: TokenKind::Newline,
                text: "",
                offset: self.pos,
            });
        }
    }

    fn run(mut self) -> Vec<Lexeme<'a>> {
        while let Some(c) = self.peek(0) {
            match c {
                '\n' => {
                    self.newline();
                    self.pos += 1;
                }
                '\\' if self.language == Language::Python && self.peek(1) == Some('\n') => {
                    self.pos += 2;
                }
                c if c.is_whitespace() => self.pos += c.len_utf8(),
                '#' if self.language == Language::Python => self.skip_line(),
                '/' if self.language == Language::Java && self.starts_with("//") => self.skip_line(),
                '/' if self.language == Language::Java && self.starts_with("/*") => {
                    match self.src[self.pos + 2..].find("*/") {
                        Some(end) => self.pos += end + 4,
                        None => self.pos = self.src.len(),
                    }
                }
                '"' | '\'' => self.string(0),
                c if c.is_alphabetic() || c == '_' || (c == '$' && self.language == Language::Java) => {
                    if let Some(prefix) = self.string_prefix() {
                        self.string(prefix);
                    } else {
                        self.ident();
                    }
                }
                c if c.is_ascii_digit() => self.number(),
                '.' if self.peek(1).is_some_and(|d| d.is_ascii_digit()) => self.number(),
                _ => self.punct(c),
            }
        }
        self.newline();
        self.out
    }

    fn skip_line(&mut self) {
        match self.src[self.pos..].find('\n') {
            Some(n) => self.pos += n,
            None => self.pos = self.src.len(),
        }
    }

    /// Length of a Python string prefix (`r`, `b`, `f`, `rb`, ...) directly
    /// followed by a quote.
    fn string_prefix(&self) -> Option<usize> {
        if self.language != Language::Python {
            return None;
        }
        let rest = &self.bytes[self.pos..];
        let is_prefix = |b: u8| matches!(b.to_ascii_lowercase(), b'r' | b'b' | b'u' | b'f');
        let quote = |b: Option<&u8>| matches!(b, Some(b'"') | Some(b'\''));
        if rest.first().copied().is_some_and(is_prefix) {
            if quote(rest.get(1)) {
                return Some(1);
            }
            if rest.get(1).copied().is_some_and(is_prefix) && quote(rest.get(2)) {
                return Some(2);
            }
        }
        None
    }

    fn string(&mut self, prefix: usize) {
        let start = self.pos;
        self.pos += prefix;
        let quote = self.bytes[self.pos];
        let triple = (self.language == Language::Python || quote == b'"')
            && self.bytes.get(self.pos + 1) == Some(&quote)
            && self.bytes.get(self.pos + 2) == Some(&quote);
        let qlen = if triple { 3 } else { 1 };
        self.pos += qlen;
        let content_start = self.pos;
        let mut content_end = self.src.len();
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'\\' {
                self.pos = (self.pos + 2).min(self.bytes.len());
                continue;
            }
            if b == b'\n' && !triple {
                content_end = self.pos;
                break;
            }
            if b == quote && (!triple || self.bytes[self.pos..].starts_with(&[quote; 3])) {
                content_end = self.pos;
                self.pos += qlen;
                break;
            }
            self.pos += 1;
        }
        if content_end == self.src.len() {
            self.pos = self.src.len();
        }
        // an escape may have jumped into the middle of a multibyte char
        let content_end = floor_char_boundary(self.src, content_end.max(content_start));
        self.out.push(Lexeme {
            kind: TokenKind::Str,
            text: &self.src[content_start..content_end],
            offset: start,
        });
        self.pos = ceil_char_boundary(self.src, self.pos);
    }

    fn ident(&mut self) {
        let start = self.pos;
        let java = self.language == Language::Java;
        let end = self.src[start..]
            .char_indices()
            .find(|&(_, c)| !(c.is_alphanumeric() || c == '_' || (java && c == '$')))
            .map_or(self.src.len(), |(i, _)| start + i);
        self.pos = end;
        self.push(TokenKind::Ident, start, end);
    }

    fn number(&mut self) {
        let start = self.pos;
        let mut prev = '\0';
        for (i, c) in self.src[start..].char_indices() {
            let exp_sign = (c == '+' || c == '-')
                && (prev == 'e' || prev == 'E')
                && !self.src[start..start + i].starts_with("0x")
                && !self.src[start..start + i].starts_with("0X");
            if !(c.is_ascii_alphanumeric() || c == '_' || c == '.' || exp_sign) {
                break;
            }
            // `1..2` or `x.method` after a number: stop before a second dot
            if c == '.' && self.src[start..start + i].contains('.') {
                break;
            }
            prev = c;
            self.pos = start + i + c.len_utf8();
        }
        self.push(TokenKind::Number, start, self.pos);
    }

    fn punct(&mut self, c: char) {
        let start = self.pos;
        let op = OPERATORS.iter().find(|op| self.starts_with(op));
        let len = op.map_or(c.len_utf8(), |op| op.len());
        match c {
            '(' | '[' | '{' => self.depth += 1,
            ')' | ']' | '}' => self.depth = self.depth.saturating_sub(1),
            _ => {}
        }
        self.pos += len;
        self.push(TokenKind::Punct, start, self.pos);
        if c == ';' && self.language == Language::Python {
            self.newline();
        }
    }
}

fn floor_char_boundary(s: &str, mut i: usize) -> usize {
    while i > 0 && !s.is_char_boundary(i) {
        i -= 1;
    }
    i
}

fn ceil_char_boundary(s: &str, mut i: usize) -> usize {
    while i < s.len() && !s.is_char_boundary(i) {
        i += 1;
    }
    i
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(code: &str, lang: Language) -> Vec<(TokenKind, &str)> {
        lex(code, lang).into_iter().map(|l| (l.kind, l.text)).collect()
    }

    #[test]
    fn python_call_chain() {
        use TokenKind::*;
        assert_eq!(
            texts("print(os.listdir(dname))", Language::Python),
            [
                (Ident, "print"),
                (Punct, "("),
                (Ident, "os"),
                (Punct, "."),
                (Ident, "listdir"),
                (Punct, "("),
                (Ident, "dname"),
                (Punct, ")"),
                (Punct, ")"),
            ]
        );
    }

    #[test]
    fn python_strings_numbers_and_comments() {
        use TokenKind::*;
        let toks = texts("x = r'a\\'b' + 1.5e-3 # note\ny = \"\"\"doc\"\"\"", Language::Python);
        assert_eq!(
            toks,
            [
                (Ident, "x"),
                (Punct, "="),
                (Str, "a\\'b"),
                (Punct, "+"),
                (Number, "1.5e-3"),
                (Ident, "y"),
                (Punct, "="),
                (Str, "doc"),
            ]
        );
    }

    #[test]
    fn python_logical_lines_ignore_bracketed_newlines() {
        let lines = lex_lines("from a import (b,\n c)\nd()\n", Language::Python);
        let newlines = lines.iter().filter(|l| l.kind == TokenKind::Newline).count();
        assert_eq!(newlines, 2);
    }

    #[test]
    fn java_comments_chars_and_generics() {
        use TokenKind::*;
        let toks = texts(
            "/* c */ List<String> xs = new ArrayList<>(); // tail\nchar c = 'q'; x >>>= 2;",
            Language::Java,
        );
        assert!(toks.contains(&(Str, "q")));
        assert!(toks.contains(&(Punct, ">>>=")));
        assert!(!toks.iter().any(|(_, t)| t.contains("tail") || *t == "c */"));
        assert_eq!(toks[0], (Ident, "List"));
    }

    #[test]
    fn unterminated_string_runs_to_end() {
        let toks = lex("x = 'abc", Language::Python);
        assert_eq!(toks.last().unwrap().text, "abc");
    }

    #[test]
    fn method_call_on_number_literal_boundary() {
        use TokenKind::*;
        assert_eq!(
            texts("1.0.hex()", Language::Python)[..3],
            [(Number, "1.0"), (Punct, "."), (Ident, "hex")]
        );
    }
}
