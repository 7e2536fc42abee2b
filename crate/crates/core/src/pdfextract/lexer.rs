//! Tokenizer and object parser for the PDF subset.

use std::collections::BTreeMap;

pub type Dict = BTreeMap<String, Object>;

#[derive(Debug, Clone, PartialEq)]
pub enum Object {
    Null,
    Bool(bool),
    Int(i64),
    Real(f64),
    Name(String),
    Str(Vec<u8>),
    Array(Vec<Object>),
    Dict(Dict),
    /// Dictionary plus still-encoded data.
    Stream(Dict, Vec<u8>),
    Ref(u32, u16),
}

impl Object {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Object::Int(i) => Some(*i as f64),
            Object::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn as_name(&self) -> Option<&str> {
        match self {
            Object::Name(n) => Some(n),
            _ => None,
        }
    }

    pub fn as_dict(&self) -> Option<&Dict> {
        match self {
            Object::Dict(d) | Object::Stream(d, _) => Some(d),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Token {
    Int(i64),
    Real(f64),
    Name(String),
    Str(Vec<u8>),
    DictOpen,
    DictClose,
    ArrayOpen,
    ArrayClose,
    /// `{` / `}` in PostScript calculator functions and CMaps.
    BraceOpen,
    BraceClose,
    Keyword(String),
}

pub fn is_whitespace(b: u8) -> bool {
    matches!(b, 0 | b'\t' | b'\n' | 0x0c | b'\r' | b' ')
}

fn is_delimiter(b: u8) -> bool {
    matches!(b, b'(' | b')' | b'<' | b'>' | b'[' | b']' | b'{' | b'}' | b'/' | b'%')
}

fn is_regular(b: u8) -> bool {
    !is_whitespace(b) && !is_delimiter(b)
}

pub struct Lexer<'a> {
    data: &'a [u8],
    pub pos: usize,
}

impl<'a> Lexer<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Lexer { data, pos: 0 }
    }

    pub fn at(data: &'a [u8], pos: usize) -> Self {
        Lexer { data, pos }
    }

    pub fn data(&self) -> &'a [u8] {
        self.data
    }

    pub fn skip_ws(&mut self) {
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            if is_whitespace(b) {
                self.pos += 1;
            } else if b == b'%' {
                while self.pos < self.data.len() && !matches!(self.data[self.pos], b'\n' | b'\r') {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
    }

    pub fn next_token(&mut self) -> Option<Token> {
        self.skip_ws();
        let b = *self.data.get(self.pos)?;
        match b {
            b'/' => {
                self.pos += 1;
                Some(Token::Name(self.read_name()))
            }
            b'(' => {
                self.pos += 1;
                Some(Token::Str(self.read_literal()))
            }
            b'<' if self.data.get(self.pos + 1) == Some(&b'<') => {
                self.pos += 2;
                Some(Token::DictOpen)
            }
            b'<' => {
                self.pos += 1;
                Some(Token::Str(self.read_hex()))
            }
            b'>' if self.data.get(self.pos + 1) == Some(&b'>') => {
                self.pos += 2;
                Some(Token::DictClose)
            }
            b'[' => {
                self.pos += 1;
                Some(Token::ArrayOpen)
            }
            b']' => {
                self.pos += 1;
                Some(Token::ArrayClose)
            }
            b'{' => {
                self.pos += 1;
                Some(Token::BraceOpen)
            }
            b'}' => {
                self.pos += 1;
                Some(Token::BraceClose)
            }
            b')' | b'>' => {
                // stray delimiter
                self.pos += 1;
                Some(Token::Keyword((b as char).to_string()))
            }
            _ => {
                let start = self.pos;
                while self.pos < self.data.len() && is_regular(self.data[self.pos]) {
                    self.pos += 1;
                }
                let word = &self.data[start..self.pos];
                Some(parse_number(word).unwrap_or_else(|| {
                    Token::Keyword(String::from_utf8_lossy(word).into_owned())
                }))
            }
        }
    }

    fn read_name(&mut self) -> String {
        let mut out = Vec::new();
        while self.pos < self.data.len() && is_regular(self.data[self.pos]) {
            let b = self.data[self.pos];
            if b == b'#' && self.pos + 2 < self.data.len() + 1 {
                if let Some(v) = self
                    .data
                    .get(self.pos + 1..self.pos + 3)
                    .and_then(|h| std::str::from_utf8(h).ok())
                    .and_then(|h| u8::from_str_radix(h, 16).ok())
                {
                    out.push(v);
                    self.pos += 3;
                    continue;
                }
            }
            out.push(b);
            self.pos += 1;
        }
        String::from_utf8_lossy(&out).into_owned()
    }

    fn read_literal(&mut self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut depth = 1;
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            self.pos += 1;
            match b {
                b'(' => {
                    depth += 1;
                    out.push(b);
                }
                b')' => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                    out.push(b);
                }
                b'\\' => {
                    let Some(&e) = self.data.get(self.pos) else { break };
                    self.pos += 1;
                    match e {
                        b'n' => out.push(b'\n'),
                        b'r' => out.push(b'\r'),
                        b't' => out.push(b'\t'),
                        b'b' => out.push(0x08),
                        b'f' => out.push(0x0c),
                        b'\r' => {
                            if self.data.get(self.pos) == Some(&b'\n') {
                                self.pos += 1;
                            }
                        }
                        b'\n' => {}
                        b'0'..=b'7' => {
                            let mut v = u32::from(e - b'0');
                            for _ in 0..2 {
                                match self.data.get(self.pos) {
                                    Some(&d @ b'0'..=b'7') => {
                                        v = v * 8 + u32::from(d - b'0');
                                        self.pos += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push((v & 0xff) as u8);
                        }
                        other => out.push(other),
                    }
                }
                _ => out.push(b),
            }
        }
        out
    }

    fn read_hex(&mut self) -> Vec<u8> {
        let mut digits = Vec::new();
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            self.pos += 1;
            if b == b'>' {
                break;
            }
            if let Some(d) = (b as char).to_digit(16) {
                digits.push(d as u8);
            }
        }
        if digits.len() % 2 == 1 {
            digits.push(0);
        }
        digits.chunks(2).map(|p| p[0] << 4 | p[1]).collect()
    }

    /// Parse one object, resolving `N G R` references lexically.
    pub fn parse_object(&mut self) -> Option<Object> {
        let tok = self.next_token()?;
        self.object_from(tok)
    }

    fn object_from(&mut self, tok: Token) -> Option<Object> {
        Some(match tok {
            Token::Int(n) => {
                let save = self.pos;
                if let (Some(Token::Int(g)), Some(Token::Keyword(k))) = (self.next_token(), self.next_token()) {
                    if k == "R" && n >= 0 && (0..=u16::MAX as i64).contains(&g) {
                        return Some(Object::Ref(n as u32, g as u16));
                    }
                }
                self.pos = save;
                Object::Int(n)
            }
            Token::Real(r) => Object::Real(r),
            Token::Name(n) => Object::Name(n),
            Token::Str(s) => Object::Str(s),
            Token::ArrayOpen => {
                let mut items = Vec::new();
                loop {
                    match self.next_token()? {
                        Token::ArrayClose => break,
                        t => items.push(self.object_from(t)?),
                    }
                }
                Object::Array(items)
            }
            Token::DictOpen => {
                let mut dict = Dict::new();
                loop {
                    match self.next_token()? {
                        Token::DictClose => break,
                        Token::Name(key) => {
                            let t = self.next_token()?;
                            if t == Token::DictClose {
                                dict.insert(key, Object::Null);
                                break;
                            }
                            let v = self.object_from(t)?;
                            dict.insert(key, v);
                        }
                        _ => continue,
                    }
                }
                Object::Dict(dict)
            }
            Token::Keyword(k) => match k.as_str() {
                "true" => Object::Bool(true),
                "false" => Object::Bool(false),
                "null" => Object::Null,
                _ => Object::Null,
            },
            Token::DictClose | Token::ArrayClose | Token::BraceOpen | Token::BraceClose => Object::Null,
        })
    }
}

fn parse_number(word: &[u8]) -> Option<Token> {
    let s = std::str::from_utf8(word).ok()?;
    let first = *word.first()?;
    if !(first.is_ascii_digit() || matches!(first, b'+' | b'-' | b'.')) {
        return None;
    }
    if let Ok(i) = s.parse::<i64>() {
        return Some(Token::Int(i));
    }
    if s.contains('.') {
        // PDF reals have no exponent
        if s.bytes().any(|b| b == b'e' || b == b'E') {
            return None;
        }
        if s == "." || s == "-." || s == "+." {
            return Some(Token::Real(0.0));
        }
        return s.parse::<f64>().ok().map(Token::Real);
    }
    None
}

pub fn find(haystack: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    if from >= haystack.len() {
        return None;
    }
    haystack[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(s: &str) -> Object {
        Lexer::new(s.as_bytes()).parse_object().unwrap()
    }

    #[test]
    fn scalars() {
        assert_eq!(obj("42"), Object::Int(42));
        assert_eq!(obj("-3.5"), Object::Real(-3.5));
        assert_eq!(obj(".5"), Object::Real(0.5));
        assert_eq!(obj("/Type"), Object::Name("Type".into()));
        assert_eq!(obj("/A#20B"), Object::Name("A B".into()));
        assert_eq!(obj("true"), Object::Bool(true));
        assert_eq!(obj("12 0 R"), Object::Ref(12, 0));
    }

    #[test]
    fn strings() {
        assert_eq!(obj("(a\\(b\\)c)"), Object::Str(b"a(b)c".to_vec()));
        assert_eq!(obj("(x (nested) y)"), Object::Str(b"x (nested) y".to_vec()));
        assert_eq!(obj("(\\101\\n)"), Object::Str(b"A\n".to_vec()));
        assert_eq!(obj("<48 65 6C6C 6F>"), Object::Str(b"Hello".to_vec()));
        assert_eq!(obj("<7>"), Object::Str(vec![0x70]));
    }

    #[test]
    fn containers() {
        let o = obj("<< /Type /Page /Kids [1 0 R 2 0 R] /Count 2 /X << /Y null >> >>");
        let d = o.as_dict().unwrap();
        assert_eq!(d["Type"], Object::Name("Page".into()));
        assert_eq!(d["Kids"], Object::Array(vec![Object::Ref(1, 0), Object::Ref(2, 0)]));
        assert_eq!(d["Count"], Object::Int(2));
        assert_eq!(d["X"].as_dict().unwrap()["Y"], Object::Null);
    }

    #[test]
    fn comments_skipped() {
        let mut lx = Lexer::new(b"% comment\n 7 % more\n 8");
        assert_eq!(lx.next_token(), Some(Token::Int(7)));
        assert_eq!(lx.next_token(), Some(Token::Int(8)));
        assert_eq!(lx.next_token(), None);
    }
}
