use std::fmt::Write as _;

use crate::{Letter, Word, WordError};

/// Generator names for a free group, used to parse and print words.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Alphabet {
    names: Vec<String>,
}

impl Alphabet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Alphabet {
        Alphabet {
            names: names.into_iter().map(Into::into).collect(),
        }
    }

    /// `a, b, c, ...`, continuing with `g26, g27, ...` past the alphabet.
    pub fn standard(rank: usize) -> Alphabet {
        Alphabet::new((0..rank).map(|i| {
            if i < 26 {
                ((b'a' + i as u8) as char).to_string()
            } else {
                format!("g{}", i)
            }
        }))
    }

    pub fn rank(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn gen(&self, name: &str) -> Option<Word> {
        self.index_of(name).map(Word::gen)
    }

    pub fn parse(&self, text: &str) -> Result<Word, WordError> {
        let mut p = Parser {
            alphabet: self,
            src: text.as_bytes(),
            pos: 0,
        };
        let w = p.product(&[])?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected character"));
        }
        Ok(w)
    }

    /// Juxtaposed names with integer exponents, `1` for the identity.
    pub fn format(&self, w: &Word) -> String {
        if w.is_identity() {
            return "1".to_string();
        }
        let mut out = String::new();
        let ls = w.letters();
        let mut i = 0;
        while i < ls.len() {
            let mut j = i;
            while j < ls.len() && ls[j] == ls[i] {
                j += 1;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            let name = self
                .names
                .get(ls[i].index())
                .cloned()
                .unwrap_or_else(|| format!("g{}", ls[i].index()));
            out.push_str(&name);
            let exp = (j - i) as i64 * ls[i].sign();
            if exp != 1 {
                let _ = write!(out, "^{}", exp);
            }
            i = j;
        }
        out
    }
}

struct Parser<'a> {
    alphabet: &'a Alphabet,
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> WordError {
        WordError::Parse {
            offset: self.pos,
            message: msg.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && (self.src[self.pos] as char).is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn product(&mut self, stops: &[u8]) -> Result<Word, WordError> {
        let mut w = Word::identity();
        while let Some(c) = self.peek() {
            if stops.contains(&c) {
                break;
            }
            let f = self.factor()?;
            w = w.mul(&f);
        }
        Ok(w)
    }

    fn factor(&mut self) -> Result<Word, WordError> {
        let base = match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                let u = self.product(b",]")?;
                if self.peek() != Some(b',') {
                    return Err(self.error("expected ','"));
                }
                self.pos += 1;
                let v = self.product(b",]")?;
                if self.peek() != Some(b']') {
                    return Err(self.error("expected ']'"));
                }
                self.pos += 1;
                Word::commutator(&u, &v)
            }
            Some(b'(') => {
                self.pos += 1;
                let u = self.product(b")")?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                u
            }
            Some(b'1') => {
                self.pos += 1;
                Word::identity()
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name()?,
            _ => return Err(self.error("expected generator, '[' or '('")),
        };
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let n = self.integer()?;
            return Ok(base.pow(n));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i64, WordError> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| WordError::Parse {
                offset: start,
                message: "expected integer exponent".into(),
            })
    }

    fn name(&mut self) -> Result<Word, WordError> {
        let start = self.pos;
        while self
            .src
            .get(self.pos)
            .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_' || *c == b'.')
        {
            self.pos += 1;
        }
        let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        if let Some(i) = self.alphabet.index_of(ident) {
            return Ok(Word::gen(i));
        }
        // `abab` reads as single-letter generators when every letter is one
        let split: Option<Vec<Letter>> = ident
            .chars()
            .map(|c| self.alphabet.index_of(&c.to_string()).map(Letter::gen))
            .collect();
        split
            .map(Word::from_letters)
            .ok_or_else(|| WordError::UnknownGenerator(ident.to_string()))
    }
}
