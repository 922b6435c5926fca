//! Exact arithmetic in finitely generated free groups.
//!
//! Words are kept freely reduced, so equality of group elements is equality
//! of letter sequences. On top of that sit conjugacy, homomorphisms, Stallings
//! folding and a bounded search for expressions as products of commutators or
//! squares.

mod decision;
mod fold;
mod genus;
mod hom;
mod syntax;
mod word;

use thiserror::Error;

pub use decision::{Bound, Decision};
pub use fold::{fold, is_free_basis, SubgroupGraph};
pub use genus::{
    genus_oracle, literal_pieces, search as genus_search, square_root, witness_product, AbelianObstruction, Ball,
    GenusDecision, GenusQuery, Pieces, DEFAULT_BUDGET, RADIUS_CAP,
};
pub use hom::{abelianize, FreeHom};
pub use syntax::Alphabet;
pub use word::{conjugator, cyclic_reduce, is_conjugate, reduce, Letter, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WordError {
    #[error("generator index {index} outside rank {rank}")]
    IndexOutOfRank { index: usize, rank: usize },
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("radius {radius} exceeds the hard cap {cap}")]
    RadiusCap { radius: usize, cap: usize },
    #[error("{0}")]
    InvalidArgument(&'static str),
}
