use std::fmt;

use serde::{Deserialize, Serialize};

use crate::WordError;

/// A generator or its inverse, stored as a nonzero signed integer:
/// `+(i + 1)` is generator `i`, `-(i + 1)` its inverse.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Letter(i32);

impl Letter {
    pub fn new(index: usize, inverse: bool) -> Letter {
        let v = index as i32 + 1;
        Letter(if inverse { -v } else { v })
    }

    pub fn gen(index: usize) -> Letter {
        Letter::new(index, false)
    }

    pub fn index(self) -> usize {
        (self.0.unsigned_abs() - 1) as usize
    }

    pub fn is_inverse(self) -> bool {
        self.0 < 0
    }

    pub fn sign(self) -> i64 {
        if self.0 < 0 {
            -1
        } else {
            1
        }
    }

    pub fn inv(self) -> Letter {
        Letter(-self.0)
    }

    /// Position in the enumeration order `a < a^-1 < b < b^-1 < ...`.
    pub fn rank_key(self) -> usize {
        2 * self.index() + self.is_inverse() as usize
    }

    pub fn from_rank_key(key: usize) -> Letter {
        Letter::new(key / 2, key % 2 == 1)
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_inverse() {
            write!(f, "g{}^-1", self.index())
        } else {
            write!(f, "g{}", self.index())
        }
    }
}

/// A freely reduced word. The empty word is the identity.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Word {
    letters: Vec<Letter>,
}

impl PartialOrd for Letter {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Letter {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.rank_key().cmp(&other.rank_key())
    }
}

fn push_reduced(out: &mut Vec<Letter>, l: Letter) {
    if out.last() == Some(&l.inv()) {
        out.pop();
    } else {
        out.push(l);
    }
}

/// Freely reduce a raw letter sequence, checking every index against `rank`.
pub fn reduce(raw: &[Letter], rank: usize) -> Result<Word, WordError> {
    if let Some(l) = raw.iter().find(|l| l.index() >= rank) {
        return Err(WordError::IndexOutOfRank {
            index: l.index(),
            rank,
        });
    }
    Ok(Word::from_letters(raw.iter().copied()))
}

impl Word {
    pub fn identity() -> Word {
        Word::default()
    }

    pub fn gen(index: usize) -> Word {
        Word {
            letters: vec![Letter::gen(index)],
        }
    }

    pub fn from_letters<I: IntoIterator<Item = Letter>>(letters: I) -> Word {
        let mut out = Vec::new();
        for l in letters {
            push_reduced(&mut out, l);
        }
        Word { letters: out }
    }

    /// Build from signed 1-based integers, e.g. `[1, -2]` is `a b^-1`.
    pub fn from_signed(ints: &[i32]) -> Word {
        Word::from_letters(ints.iter().map(|&i| {
            assert!(i != 0, "zero is not a letter");
            Letter::new(i.unsigned_abs() as usize - 1, i < 0)
        }))
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    /// One more than the largest generator index used.
    pub fn min_rank(&self) -> usize {
        self.letters.iter().map(|l| l.index() + 1).max().unwrap_or(0)
    }

    pub fn mul(&self, other: &Word) -> Word {
        let mut out = self.letters.clone();
        for &l in &other.letters {
            push_reduced(&mut out, l);
        }
        Word { letters: out }
    }

    pub fn inverse(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().map(|l| l.inv()).collect(),
        }
    }

    pub fn pow(&self, n: i64) -> Word {
        let base = if n < 0 { self.inverse() } else { self.clone() };
        let (core, conj) = cyclic_reduce(&base);
        let mut letters = Vec::with_capacity(conj.len() * 2 + core.len() * n.unsigned_abs() as usize);
        letters.extend_from_slice(&conj.letters);
        for _ in 0..n.unsigned_abs() {
            letters.extend_from_slice(&core.letters);
        }
        letters.extend(conj.letters.iter().rev().map(|l| l.inv()));
        Word::from_letters(letters)
    }

    /// `self * other * self^-1`
    pub fn conjugate(&self, other: &Word) -> Word {
        self.mul(other).mul(&self.inverse())
    }

    /// `[u, v] = u v u^-1 v^-1`
    pub fn commutator(u: &Word, v: &Word) -> Word {
        u.mul(v).mul(&u.inverse()).mul(&v.inverse())
    }

    pub fn product<'a, I: IntoIterator<Item = &'a Word>>(words: I) -> Word {
        let mut out = Vec::new();
        for w in words {
            for &l in &w.letters {
                push_reduced(&mut out, l);
            }
        }
        Word { letters: out }
    }

    pub fn exponent_sum(&self, index: usize) -> i64 {
        self.letters
            .iter()
            .filter(|l| l.index() == index)
            .map(|l| l.sign())
            .sum()
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        match (self.letters.first(), self.letters.last()) {
            (Some(&f), Some(&l)) => self.letters.len() == 1 || f != l.inv(),
            _ => true,
        }
    }

    /// Primitive root: the shortest `r` with `self = r^k`, `k >= 1`.
    pub fn root(&self) -> Word {
        let (core, conj) = cyclic_reduce(self);
        let n = core.len();
        for p in 1..=n {
            if n % p == 0 && (p..n).all(|i| core.letters[i] == core.letters[i - p]) {
                let r = Word {
                    letters: core.letters[..p].to_vec(),
                };
                return conj.conjugate(&r);
            }
        }
        Word::identity()
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "1");
        }
        for (i, l) in self.letters.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{:?}", l)?;
        }
        Ok(())
    }
}

/// Split `w` as `conjugator * core * conjugator^-1` with `core` cyclically reduced.
pub fn cyclic_reduce(w: &Word) -> (Word, Word) {
    let ls = &w.letters;
    let mut i = 0;
    let mut j = ls.len();
    while j - i >= 2 && ls[i] == ls[j - 1].inv() {
        i += 1;
        j -= 1;
    }
    (
        Word {
            letters: ls[i..j].to_vec(),
        },
        Word {
            letters: ls[..i].to_vec(),
        },
    )
}

fn find_rotation(hay: &[Letter], needle: &[Letter]) -> Option<usize> {
    // KMP over hay doubled
    let n = needle.len();
    if n == 0 {
        return Some(0);
    }
    let mut fail = vec![0usize; n];
    let mut k = 0;
    for i in 1..n {
        while k > 0 && needle[i] != needle[k] {
            k = fail[k - 1];
        }
        if needle[i] == needle[k] {
            k += 1;
        }
        fail[i] = k;
    }
    k = 0;
    for i in 0..(2 * n - 1) {
        let c = hay[i % n];
        while k > 0 && c != needle[k] {
            k = fail[k - 1];
        }
        if c == needle[k] {
            k += 1;
        }
        if k == n {
            return Some(i + 1 - n);
        }
    }
    None
}

pub fn is_conjugate(u: &Word, v: &Word) -> bool {
    conjugator(u, v).is_some()
}

/// Some `c` with `c * u * c^-1 = v`, if one exists.
pub fn conjugator(u: &Word, v: &Word) -> Option<Word> {
    let (cu, pu) = cyclic_reduce(u);
    let (cv, pv) = cyclic_reduce(v);
    if cu.len() != cv.len() {
        return None;
    }
    // cv is the rotation of cu starting at s: cu = p q, cv = q p = p^-1 cu p
    let s = find_rotation(&cu.letters, &cv.letters)?;
    let p = Word {
        letters: cu.letters[..s].to_vec(),
    };
    Some(pv.mul(&p.inverse()).mul(&pu.inverse()))
}
