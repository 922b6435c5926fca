use serde::{Deserialize, Serialize};

use crate::{Word, WordError};

/// A homomorphism between free groups given by the images of the source generators.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FreeHom {
    images: Vec<Word>,
}

impl FreeHom {
    pub fn new(images: Vec<Word>) -> FreeHom {
        FreeHom { images }
    }

    pub fn identity(rank: usize) -> FreeHom {
        FreeHom {
            images: (0..rank).map(Word::gen).collect(),
        }
    }

    pub fn source_rank(&self) -> usize {
        self.images.len()
    }

    pub fn images(&self) -> &[Word] {
        &self.images
    }

    pub fn image(&self, index: usize) -> &Word {
        &self.images[index]
    }

    pub fn set_image(&mut self, index: usize, w: Word) {
        self.images[index] = w;
    }

    pub fn apply(&self, w: &Word) -> Result<Word, WordError> {
        let mut out = Word::identity();
        for l in w.letters() {
            let img = self.images.get(l.index()).ok_or(WordError::IndexOutOfRank {
                index: l.index(),
                rank: self.images.len(),
            })?;
            out = if l.is_inverse() {
                out.mul(&img.inverse())
            } else {
                out.mul(img)
            };
        }
        Ok(out)
    }

    /// `self` followed by `next`, i.e. `next ∘ self`.
    pub fn then(&self, next: &FreeHom) -> Result<FreeHom, WordError> {
        let images = self
            .images
            .iter()
            .map(|w| next.apply(w))
            .collect::<Result<_, _>>()?;
        Ok(FreeHom { images })
    }

    pub fn power(&self, n: u32) -> Result<FreeHom, WordError> {
        let mut acc = FreeHom::identity(self.source_rank());
        for _ in 0..n {
            acc = acc.then(self)?;
        }
        Ok(acc)
    }
}

/// Exponent-sum vector of `w` in `Z^rank`, or in `(Z/2)^rank` when `modulus` is 2.
pub fn abelianize(w: &Word, rank: usize, modulus: u32) -> Vec<i64> {
    let mut v = vec![0i64; rank.max(w.min_rank())];
    for l in w.letters() {
        v[l.index()] += l.sign();
    }
    if modulus != 0 {
        let m = modulus as i64;
        for x in &mut v {
            *x = x.rem_euclid(m);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &[i32]) -> Word {
        Word::from_signed(s)
    }

    #[test]
    fn retraction_on_commutator() {
        // x, y are generators 2, 3 over bottom a, b
        let rho = FreeHom::new(vec![w(&[1]), w(&[2]), w(&[1]), w(&[2])]);
        let xy = Word::commutator(&w(&[3]), &w(&[4]));
        assert_eq!(rho.apply(&xy).unwrap(), Word::commutator(&w(&[1]), &w(&[2])));
    }

    #[test]
    fn twist_squared() {
        let ab = Word::commutator(&w(&[1]), &w(&[2]));
        let tau = FreeHom::new(vec![w(&[1]), w(&[2]), ab.conjugate(&w(&[3]))]);
        let tt = tau.power(2).unwrap();
        assert_eq!(tt.apply(&w(&[3])).unwrap(), ab.pow(2).conjugate(&w(&[3])));
        let id = FreeHom::identity(3);
        assert_eq!(id.apply(&ab).unwrap(), ab);
    }

    #[test]
    fn abelian_vectors() {
        assert_eq!(abelianize(&Word::commutator(&w(&[1]), &w(&[2])), 2, 0), vec![0, 0]);
        assert_eq!(abelianize(&w(&[1, 1, 2, 2]), 2, 2), vec![0, 0]);
        assert_eq!(abelianize(&w(&[1, 2, 1]), 2, 0), vec![2, 1]);
        assert_eq!(abelianize(&w(&[-1]), 2, 2), vec![1, 0]);
    }
}
