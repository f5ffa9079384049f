//! Registration of planar closed curves by plane-curvature minimization, followed by a
//! Euclidean rigid fit, and statistical grouping of curve documents into writer hands.

pub mod bench;
pub mod classify;
pub mod config;
pub mod contour;
pub mod corpus;
pub mod error;
pub mod field;
pub mod geom;
pub mod raster;
pub mod register;
pub mod similarity;
pub mod stats;
pub mod store;
pub mod svg;
pub mod synth;

pub use contour::{Contour, Document};
pub use error::{Error, Result};
pub use field::{PointSample, ScalarField};
pub use geom::Vec2;
