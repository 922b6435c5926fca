pub mod classify;
pub mod dsl;
pub mod expr;
pub mod limits;
pub mod retract;
pub mod splitting;
pub mod surface;
pub mod tower;

pub use expr::{Atom, AtomFacts, Etage, Fact, GroupExpr};
pub use retract::{decide_retractable, Obstruction, Retraction};
pub use splitting::{CenteredSplitting, Edge, SplittingError, Violation};
pub use surface::{Surface, SurfaceError};
pub use tower::{b1_mod2, Tower, TowerError};
