use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SurfaceError {
    #[error("non-orientable surfaces need genus at least 1")]
    ZeroCrosscaps,
    #[error("{0} is not hyperbolic (euler characteristic {1} >= 0)")]
    NotHyperbolic(Surface, i64),
    #[error("{0} has fewer than two boundary components")]
    TooFewBoundaries(Surface),
    #[error("{0} is not closed")]
    NotClosed(Surface),
    #[error("cannot read surface `{0}`")]
    Syntax(String),
}

/// A compact surface up to homeomorphism: genus, boundary count, orientability.
/// For non-orientable surfaces the genus counts crosscaps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Surface {
    pub genus: u32,
    pub boundary: u32,
    pub orientable: bool,
}

impl Surface {
    pub fn orientable(genus: u32, boundary: u32) -> Surface {
        Surface {
            genus,
            boundary,
            orientable: true,
        }
    }

    pub fn non_orientable(genus: u32, boundary: u32) -> Result<Surface, SurfaceError> {
        if genus == 0 {
            return Err(SurfaceError::ZeroCrosscaps);
        }
        Ok(Surface {
            genus,
            boundary,
            orientable: false,
        })
    }

    pub fn euler_char(&self) -> i64 {
        let (g, b) = (self.genus as i64, self.boundary as i64);
        if self.orientable {
            2 - 2 * g - b
        } else {
            2 - g - b
        }
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.euler_char() < 0
    }

    pub fn is_closed(&self) -> bool {
        self.boundary == 0
    }

    fn require_hyperbolic(&self) -> Result<(), SurfaceError> {
        if self.is_hyperbolic() {
            Ok(())
        } else {
            Err(SurfaceError::NotHyperbolic(*self, self.euler_char()))
        }
    }

    /// The pair of pants, the twice-punctured projective plane, the once-punctured
    /// Klein bottle and the closed genus-3 non-orientable surface.
    pub fn is_exceptional(&self) -> Result<bool, SurfaceError> {
        self.require_hyperbolic()?;
        let key = (self.orientable, self.genus, self.boundary);
        Ok(matches!(
            key,
            (true, 0, 3) | (false, 1, 2) | (false, 2, 1) | (false, 3, 0)
        ))
    }

    /// Cut off a pair of pants containing two boundary components.
    pub fn remove_pants(&self) -> Result<Surface, SurfaceError> {
        if self.boundary < 2 {
            return Err(SurfaceError::TooFewBoundaries(*self));
        }
        Ok(Surface {
            boundary: self.boundary - 1,
            ..*self
        })
    }

    pub fn b1_mod2_closed(&self) -> Result<u32, SurfaceError> {
        if !self.is_closed() {
            return Err(SurfaceError::NotClosed(*self));
        }
        Ok(if self.orientable {
            2 * self.genus
        } else {
            self.genus
        })
    }

    /// Rank of the free fundamental group when the boundary is nonempty.
    pub fn free_rank(&self) -> Option<u32> {
        (self.boundary > 0).then(|| (1 - self.euler_char()) as u32)
    }

    /// Number of generators `u_j` (and `v_j` when orientable) in the standard presentation.
    pub fn handle_generators(&self) -> u32 {
        if self.orientable {
            2 * self.genus
        } else {
            self.genus
        }
    }
}

impl fmt::Display for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = if self.orientable { 'S' } else { 'N' };
        if self.boundary == 0 {
            write!(f, "{}({})", letter, self.genus)
        } else {
            write!(f, "{}({},{})", letter, self.genus, self.boundary)
        }
    }
}

impl FromStr for Surface {
    type Err = SurfaceError;

    fn from_str(s: &str) -> Result<Surface, SurfaceError> {
        let bad = || SurfaceError::Syntax(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let orientable = match t.chars().next() {
            Some('S') => true,
            Some('N') => false,
            _ => return Err(bad()),
        };
        let inner = t[1..]
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let nums: Vec<u32> = inner
            .split(',')
            .map(|x| x.parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let (g, b) = match nums[..] {
            [g] => (g, 0),
            [g, b] => (g, b),
            _ => return Err(bad()),
        };
        if orientable {
            Ok(Surface::orientable(g, b))
        } else {
            Surface::non_orientable(g, b)
        }
    }
}
