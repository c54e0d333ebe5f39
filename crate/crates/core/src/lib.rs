pub mod catalog;
pub mod conformal;
pub mod error;
pub mod expansion;
pub mod geodesic;
pub mod jet;
pub mod metric;
pub mod quadrature;
pub mod series;

pub use error::{GeometryError, Result};
