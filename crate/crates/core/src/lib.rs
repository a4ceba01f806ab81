pub mod arith;
pub mod error;
pub mod linalg;

pub use arith::Zq;
pub use error::{Error, Result};
pub mod fpring;
pub mod norm;

pub use fpring::{PerfMonomial, PerfPoly, PrecisionBudget, RingPresentation};
pub use norm::NormExponent;
pub mod witt;

pub use witt::{StructurePolyCache, TeichPoly, TeichRing, WittVec};
pub mod cech;
pub mod lens;
pub mod glue;
