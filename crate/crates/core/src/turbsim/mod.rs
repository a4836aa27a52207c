//! Test-data generators: a decaying-turbulence simulator and planted
//! Gaussian vortices with known truth.

mod sim;
mod synth;

pub use sim::{simulate, simulate_with, SimConfig, Simulation};
pub use synth::{
    add_gaussian, random_layout, synthesize, Background, LayoutSpec, PlantedVortex, SyntheticField,
};
