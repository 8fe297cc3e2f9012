//! Gradient-damage fracture of quasi-brittle solids by staggered alternate
//! minimization.

pub mod assembly;
pub mod elements;
pub mod io;
pub mod material;
pub mod mesh;
pub mod solver;
pub mod sparse;
