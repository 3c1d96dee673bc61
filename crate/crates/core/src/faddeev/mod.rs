//! Three-body kernel, open-channel pole handling and bound-state search.

mod solver;
mod types;

pub use solver::{
    pole_split, Kernel, PoleSplit, ScanPoint, ThreeBodyOptions, ThreeBodySolver, ThreeBodyState,
};
pub use types::{ChannelConfig, MassParams, Symmetry};

pub use crate::twobody::tau;
