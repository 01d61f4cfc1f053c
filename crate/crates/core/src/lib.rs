//! Consensus-seeking gradient flows of multi-agent systems on implicit hypersurfaces.

pub mod analysis;
pub mod dynamics;
pub mod geometry;
pub mod graph;
pub mod integrator;
pub mod cli;
