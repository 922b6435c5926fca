//! Text syntax for tower expressions.
//!
//! ```text
//! expr   := term ('*' term)*
//! term   := 'F' '(' INT ')' | 'F' '(' IDENT (',' IDENT)* ')' | 'Z' | '1'
//!         | 'S' '(' INT ')' | 'N' '(' INT ')' | '(' expr ')' | etage | atom
//! atom   := IDENT ['{' fact (',' fact)* '}']
//! fact   := 'one_ended' | 'many_ended' | 'prototype' | 'b1mod2' INT
//!         | ('square' | 'commutator' | 'nocyc' | 'elem') IDENT
//! etage  := 'etage' '{' 'surface' ':' SURFACE ';' 'bottoms' ':' '[' expr (',' expr)* ']' ';'
//!           'glue' ':' '[' glue (',' glue)* ']' [';' 'marker' ':' INT]
//!           [';' 'retraction' ':' '[' IDENT '->' WORD (',' IDENT '->' WORD)* ']'] [';'] '}'
//! glue   := '(' INT '->' ['#' INT ':'] WORD ')'
//! ```
//!
//! Boundary and bottom numbers are 1-based. A glue word without `#j:` must parse
//! in exactly one bottom. Text from `//` to the end of a line is
//! ignored.

use std::fmt;

use freegroup::{Alphabet, Word};
use thiserror::Error;

use crate::expr::{Atom, Fact, GroupExpr};
use crate::splitting::{parse_element, CenteredSplitting, Edge, SplittingError};
use crate::surface::Surface;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{column}: {message}{}", expected_list(.expected))]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub expected: Vec<String>,
}

fn expected_list(e: &[String]) -> String {
    if e.is_empty() {
        String::new()
    } else {
        format!(" (expected {})", e.join(", "))
    }
}

/// A parsed étage together with an optional user-supplied retraction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EtageSource {
    pub splitting: CenteredSplitting,
    pub marker: Option<usize>,
    /// Ambient generator name and image text over the base.
    pub retraction: Vec<(String, String)>,
}

const RESERVED: [&str; 5] = ["F", "Z", "S", "N", "etage"];

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    /// Retraction clauses, by étage in order of appearance.
    retractions: Vec<Vec<(String, String)>>,
}

pub fn parse_expr(text: &str) -> Result<GroupExpr, ParseError> {
    let mut p = Parser::new(text);
    let e = p.expr()?;
    p.end()?;
    Ok(e)
}

/// Parse a single étage, keeping its retraction clause.
pub fn parse_etage(text: &str) -> Result<EtageSource, ParseError> {
    let mut p = Parser::new(text);
    p.skip();
    let start = p.pos;
    let e = p.expr()?;
    p.end()?;
    match e {
        GroupExpr::Etage(et) => Ok(EtageSource {
            splitting: et.splitting,
            marker: et.marker,
            retraction: p.retractions.pop().unwrap_or_default(),
        }),
        _ => {
            p.pos = start;
            Err(p.error("expected an étage", &["etage"]))
        }
    }
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser {
            src,
            pos: 0,
            retractions: Vec::new(),
        }
    }

    fn error(&self, message: &str, expected: &[&str]) -> ParseError {
        let before = &self.src[..self.pos];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        ParseError {
            line,
            column,
            message: message.to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip(&mut self) {
        loop {
            let r = self.rest();
            let t = r.trim_start();
            self.pos += r.len() - t.len();
            if t.starts_with("//") {
                self.pos += t.find('\n').unwrap_or(t.len());
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip();
        self.rest().chars().next()
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.unexpected(&[tok]))
        }
    }

    fn unexpected(&mut self, expected: &[&str]) -> ParseError {
        let found = self.found();
        self.error(&format!("unexpected {}", found), expected)
    }

    fn found(&mut self) -> String {
        match self.peek() {
            None => "end of input".to_string(),
            Some(c) => format!("`{}`", c),
        }
    }

    fn end(&mut self) -> Result<(), ParseError> {
        if self.peek().is_some() {
            return Err(self.unexpected(&["*", "end of input"]));
        }
        Ok(())
    }

    fn ident(&mut self) -> Option<&'a str> {
        self.skip();
        let r = self.rest();
        let mut chars = r.char_indices();
        match chars.next() {
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
            _ => return None,
        }
        let end = chars
            .find(|(_, c)| !(c.is_ascii_alphanumeric() || *c == '_'))
            .map_or(r.len(), |(i, _)| i);
        self.pos += end;
        Some(&r[..end])
    }

    fn expect_ident(&mut self, what: &str) -> Result<&'a str, ParseError> {
        match self.ident() {
            Some(x) => Ok(x),
            None => Err(self.unexpected(&[what])),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        self.skip();
        let r = self.rest();
        let end = r
            .char_indices()
            .find(|&(i, c)| !(c.is_ascii_digit() || (i == 0 && c == '-')))
            .map_or(r.len(), |(i, _)| i);
        match r[..end].parse() {
            Ok(n) => {
                self.pos += end;
                Ok(n)
            }
            Err(_) => Err(self.unexpected(&["integer"])),
        }
    }

    fn count(&mut self) -> Result<u32, ParseError> {
        let at = self.pos;
        let n = self.int()?;
        u32::try_from(n).map_err(|_| {
            self.pos = at;
            self.error("expected a nonnegative integer", &["integer"])
        })
    }

    fn expr(&mut self) -> Result<GroupExpr, ParseError> {
        let mut factors = vec![self.term()?];
        while self.eat("*") {
            factors.push(self.term()?);
        }
        Ok(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            GroupExpr::product(factors)
        })
    }

    fn term(&mut self) -> Result<GroupExpr, ParseError> {
        const START: [&str; 8] = ["F(", "Z", "S(", "N(", "1", "(", "etage", "atom name"];
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(")")?;
                return Ok(e);
            }
            Some('1') => {
                self.pos += 1;
                return Ok(GroupExpr::Trivial);
            }
            _ => {}
        }
        let at = self.pos;
        let Some(name) = self.ident() else {
            return Err(self.unexpected(&START));
        };
        match name {
            "Z" => Ok(GroupExpr::z()),
            "F" => self.free(),
            "S" | "N" => {
                self.pos = at;
                let s = self.surface()?;
                if !s.is_closed() {
                    self.pos = at;
                    return Err(self.error("closed surface expected; write S(g) or N(g)", &[]));
                }
                if !s.is_hyperbolic() {
                    self.pos = at;
                    return Err(self.error(&format!("{} is not hyperbolic", s), &[]));
                }
                Ok(GroupExpr::ClosedSurface(s))
            }
            "etage" => self.etage(at),
            _ => self.atom(name),
        }
    }

    fn free(&mut self) -> Result<GroupExpr, ParseError> {
        self.expect("(")?;
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            let n = self.count()?;
            self.expect(")")?;
            return Ok(GroupExpr::free(n as usize));
        }
        let mut names = vec![self.expect_ident("generator name")?.to_string()];
        while self.eat(",") {
            names.push(self.expect_ident("generator name")?.to_string());
        }
        self.expect(")")?;
        Ok(GroupExpr::named_free(names))
    }

    fn surface(&mut self) -> Result<Surface, ParseError> {
        let at = self.pos;
        let kind = self.expect_ident("S or N")?;
        let orientable = match kind {
            "S" => true,
            "N" => false,
            _ => {
                self.pos = at;
                return Err(self.error(&format!("unexpected `{}`", kind), &["S", "N"]));
            }
        };
        self.expect("(")?;
        let g = self.count()?;
        let b = if self.eat(",") { self.count()? } else { 0 };
        self.expect(")")?;
        if orientable {
            Ok(Surface::orientable(g, b))
        } else {
            Surface::non_orientable(g, b).map_err(|e| {
                self.pos = at;
                self.error(&e.to_string(), &[])
            })
        }
    }

    fn atom(&mut self, name: &str) -> Result<GroupExpr, ParseError> {
        let mut atom = Atom::new(name);
        if self.eat("{") {
            loop {
                let at = self.pos;
                let key = self.expect_ident("fact")?;
                match key {
                    "one_ended" => atom.facts.one_ended = true,
                    "many_ended" => atom.facts.one_ended = false,
                    "prototype" => atom.facts.add(Fact::Prototype),
                    "b1mod2" => atom.facts.b1_mod2 = Some(self.count()?),
                    "square" | "commutator" | "nocyc" | "elem" => {
                        let e = self.expect_ident("element name")?.to_string();
                        match key {
                            "square" => atom.facts.add(Fact::Square(e)),
                            "commutator" => atom.facts.add(Fact::Commutator(e)),
                            "nocyc" => atom.facts.add(Fact::NoCyclicSplittingRel(e)),
                            _ => {
                                atom.facts.elements.insert(e);
                            }
                        }
                    }
                    other => {
                        self.pos = at;
                        return Err(self.error(
                            &format!("unknown fact `{}`", other),
                            &[
                                "one_ended",
                                "many_ended",
                                "prototype",
                                "b1mod2",
                                "square",
                                "commutator",
                                "nocyc",
                                "elem",
                            ],
                        ));
                    }
                }
                if !self.eat(",") {
                    break;
                }
            }
            self.expect("}")?;
        }
        Ok(GroupExpr::atom(atom))
    }

    fn etage(&mut self, at: usize) -> Result<GroupExpr, ParseError> {
        self.expect("{")?;
        self.keyword("surface")?;
        let s_at = self.pos;
        let surface = self.surface()?;
        self.expect(";")?;
        self.keyword("bottoms")?;
        self.expect("[")?;
        let mut bottoms = vec![self.expr()?];
        while self.eat(",") {
            bottoms.push(self.expr()?);
        }
        self.expect("]")?;
        self.expect(";")?;
        self.keyword("glue")?;
        self.expect("[")?;
        let mut edges = Vec::new();
        loop {
            edges.push(self.glue(&bottoms)?);
            if !self.eat(",") {
                break;
            }
        }
        self.expect("]")?;
        let mut marker = None;
        let mut retraction = Vec::new();
        while self.eat(";") {
            let k_at = self.pos;
            match self.ident() {
                None => break,
                Some("marker") => {
                    self.expect(":")?;
                    let m = self.count()? as usize;
                    if m == 0 || m > bottoms.len() {
                        self.pos = k_at;
                        return Err(self.error("marker names no bottom", &[]));
                    }
                    marker = Some(m - 1);
                }
                Some("retraction") => {
                    self.expect(":")?;
                    self.expect("[")?;
                    loop {
                        let g = self.expect_ident("generator name")?.to_string();
                        self.expect("->")?;
                        let w = self.raw_word(&[',', ']'])?;
                        retraction.push((g, w));
                        if !self.eat(",") {
                            break;
                        }
                    }
                    self.expect("]")?;
                }
                Some(other) => {
                    self.pos = k_at;
                    return Err(self.error(
                        &format!("unknown clause `{}`", other),
                        &["marker", "retraction", "}"],
                    ));
                }
            }
        }
        self.expect("}")?;
        let splitting = CenteredSplitting::new(surface, bottoms, edges).map_err(|e| {
            self.pos = if matches!(e, SplittingError::Surface(_)) { s_at } else { at };
            self.error(&e.to_string(), &[])
        })?;
        self.retractions.push(retraction);
        let mut e = GroupExpr::etage(splitting, None);
        if let GroupExpr::Etage(et) = &mut e {
            et.marker = marker;
        }
        Ok(e)
    }

    fn keyword(&mut self, k: &str) -> Result<(), ParseError> {
        let at = self.pos;
        match self.ident() {
            Some(x) if x == k => self.expect(":"),
            _ => {
                self.pos = at;
                Err(self.unexpected(&[k]))
            }
        }
    }

    /// Raw text of a word, up to one of `stops` at bracket depth zero.
    fn raw_word(&mut self, stops: &[char]) -> Result<String, ParseError> {
        self.skip();
        let r = self.rest();
        let mut depth = 0i32;
        let mut end = r.len();
        for (i, c) in r.char_indices() {
            match c {
                '(' | '[' => depth += 1,
                ')' | ']' if depth > 0 => depth -= 1,
                _ if depth == 0 && stops.contains(&c) => {
                    end = i;
                    break;
                }
                _ => {}
            }
        }
        let text = r[..end].trim();
        if text.is_empty() {
            return Err(self.error("empty word", &["word"]));
        }
        self.pos += end;
        Ok(text.to_string())
    }

    fn glue(&mut self, bottoms: &[GroupExpr]) -> Result<Edge, ParseError> {
        self.expect("(")?;
        let b_at = self.pos;
        let boundary = self.count()? as usize;
        if boundary == 0 {
            self.pos = b_at;
            return Err(self.error("boundary components are numbered from 1", &[]));
        }
        self.expect("->")?;
        let mut bottom = None;
        if self.eat("#") {
            let j_at = self.pos;
            let j = self.count()? as usize;
            if j == 0 || j > bottoms.len() {
                self.pos = j_at;
                return Err(self.error(&format!("no bottom #{}", j), &[]));
            }
            bottom = Some(j - 1);
            self.expect(":")?;
        }
        let w_at = self.pos;
        let text = self.raw_word(&[')'])?;
        self.expect(")")?;
        let (bottom, word) = match bottom {
            Some(j) => match parse_element(&bottoms[j], &text) {
                Ok(w) => (j, w),
                Err(e) => {
                    self.pos = w_at;
                    return Err(self.error(&e.to_string(), &[]));
                }
            },
            None => {
                let hits: Vec<(usize, Word)> = bottoms
                    .iter()
                    .enumerate()
                    .filter_map(|(j, b)| Alphabet::new(b.alphabet()).parse(&text).ok().map(|w| (j, w)))
                    .collect();
                if hits.len() != 1 {
                    self.pos = w_at;
                    let why = if hits.is_empty() {
                        format!("`{}` is not an element of any bottom (unknown atom or element)", text)
                    } else {
                        format!("`{}` is ambiguous between bottoms; write #j: word", text)
                    };
                    return Err(self.error(&why, &[]));
                }
                hits.into_iter().next().unwrap()
            }
        };
        Ok(Edge {
            boundary: boundary - 1,
            bottom,
            word,
        })
    }
}

fn write_atom(f: &mut fmt::Formatter<'_>, a: &Atom) -> fmt::Result {
    let mut items = Vec::new();
    if !a.facts.one_ended {
        items.push("many_ended".to_string());
    }
    let mut mentioned = std::collections::BTreeSet::new();
    for fact in &a.facts.facts {
        items.push(match fact {
            Fact::Prototype => "prototype".to_string(),
            Fact::Square(e) => format!("square {}", e),
            Fact::Commutator(e) => format!("commutator {}", e),
            Fact::NoCyclicSplittingRel(e) => format!("nocyc {}", e),
        });
        if let Some(e) = fact.element() {
            mentioned.insert(e);
        }
    }
    for e in &a.facts.elements {
        if !mentioned.contains(e.as_str()) {
            items.push(format!("elem {}", e));
        }
    }
    if let Some(b) = a.facts.b1_mod2 {
        items.push(format!("b1mod2 {}", b));
    }
    if items.is_empty() {
        return write!(f, "{}", a.name);
    }
    if a.facts.one_ended {
        items.insert(0, "one_ended".to_string());
    }
    write!(f, "{}{{{}}}", a.name, items.join(", "))
}

impl fmt::Display for GroupExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupExpr::Atom(a) => write_atom(f, a),
            GroupExpr::Free(names) => {
                if *self == GroupExpr::z() {
                    write!(f, "Z")
                } else if names.as_slice() == Alphabet::standard(names.len()).names() {
                    write!(f, "F({})", names.len())
                } else {
                    write!(f, "F({})", names.join(","))
                }
            }
            GroupExpr::ClosedSurface(s) => write!(f, "{}", s),
            GroupExpr::FreeProduct(fs) => {
                let parts: Vec<String> = fs.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join(" * "))
            }
            GroupExpr::Etage(e) => {
                let c = &e.splitting;
                let bottoms: Vec<String> = c.bottoms().iter().map(|b| b.to_string()).collect();
                let glue: Vec<String> = c
                    .edges()
                    .iter()
                    .enumerate()
                    .map(|(i, x)| format!("({} -> #{}: {})", x.boundary + 1, x.bottom + 1, c.edge_text(i)))
                    .collect();
                write!(
                    f,
                    "etage {{ surface: {}; bottoms: [{}]; glue: [{}]",
                    c.surface(),
                    bottoms.join(", "),
                    glue.join(", ")
                )?;
                if let Some(m) = e.marker {
                    write!(f, "; marker: {}", m + 1)?;
                }
                write!(f, " }}")
            }
            GroupExpr::Trivial => write!(f, "1"),
        }
    }
}

/// Reserved words cannot name atoms.
pub fn is_reserved(name: &str) -> bool {
    RESERVED.contains(&name)
}
