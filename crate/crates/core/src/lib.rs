pub mod adapted;
pub mod cocycle;
pub mod experiment;
pub mod geometry;
pub mod lattice;
pub mod partition;
pub mod sampling;
pub mod shear;
pub mod stats;
pub mod torus;
