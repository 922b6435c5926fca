use std::fmt;

use serde::{Deserialize, Serialize};

/// The search limits that were exhausted before an answer was found.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bound {
    pub search: String,
    pub limits: Vec<(String, u64)>,
    pub explored: u64,
}

impl Bound {
    pub fn new(search: impl Into<String>, explored: u64) -> Bound {
        Bound {
            search: search.into(),
            limits: Vec::new(),
            explored,
        }
    }

    pub fn limit(mut self, name: impl Into<String>, value: u64) -> Bound {
        self.limits.push((name.into(), value));
        self
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.search)?;
        for (k, v) in &self.limits {
            write!(f, " {}={}", k, v)?;
        }
        write!(f, " explored={}", self.explored)
    }
}

/// Three-valued answer: a checkable witness, a named obstruction, or the exhausted bound.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "detail")]
pub enum Decision<Y, N> {
    Yes(Y),
    No(N),
    Unknown(Bound),
}

impl<Y, N> Decision<Y, N> {
    pub fn is_yes(&self) -> bool {
        matches!(self, Decision::Yes(_))
    }

    pub fn is_no(&self) -> bool {
        matches!(self, Decision::No(_))
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Decision::Unknown(_))
    }

    pub fn verdict(&self) -> &'static str {
        match self {
            Decision::Yes(_) => "Yes",
            Decision::No(_) => "No",
            Decision::Unknown(_) => "Unknown",
        }
    }

    pub fn yes(self) -> Option<Y> {
        match self {
            Decision::Yes(y) => Some(y),
            _ => None,
        }
    }

    pub fn map_yes<Z>(self, f: impl FnOnce(Y) -> Z) -> Decision<Z, N> {
        match self {
            Decision::Yes(y) => Decision::Yes(f(y)),
            Decision::No(n) => Decision::No(n),
            Decision::Unknown(b) => Decision::Unknown(b),
        }
    }

    pub fn map_no<M>(self, f: impl FnOnce(N) -> M) -> Decision<Y, M> {
        match self {
            Decision::Yes(y) => Decision::Yes(y),
            Decision::No(n) => Decision::No(f(n)),
            Decision::Unknown(b) => Decision::Unknown(b),
        }
    }
}
