//! Forward solves, boundary maps and singular-solution probes for planar
//! domains containing impedance cracks.

pub mod dnmap;
pub mod error;
pub mod fit;
pub mod forward;
pub mod geometry;
pub mod probe;
pub mod quad;
pub mod singular;
pub mod stability;

pub use error::{Error, Result};
