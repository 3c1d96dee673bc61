pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod faddeev;
pub mod grids;
pub mod linalg;
pub mod potentials;
pub mod roots;
pub mod twobody;
pub mod wavefunction;
