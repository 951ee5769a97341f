//! Synthetic measurements: focused beams, Foldy-Lax and coarse Lippmann-Schwinger scattering,
//! spectral noise and phantoms.

pub mod beam;
pub mod foldy;
pub mod hankel;
pub mod lippmann;
pub mod noise;
pub mod phantom;
pub mod sim;

pub use beam::{incident_beam, BeamQuadrature, DEFAULT_BEAM_NODES};
pub use foldy::{foldy_lax_solve, green_2d};
pub use lippmann::{disk_self_term, lippmann_schwinger_coarse, simulate_grid_data, MAX_CELLS};
pub use noise::perturb_spectra;
pub use phantom::{random_phantom, Phantom, PhantomOptions, PointScatterer};
pub use sim::{multiple_scattering_ratio, simulate_point_data, SimulationConfig, SimulationMode};
