//! Spectroscopic optical tomography under the N-species model.
//!
//! The target susceptibility is modelled as `eta(r, k0) = sum_s p_s(r) h_s(k0)`: a small number
//! of chemical species, each with a spatial density `p_s` and a complex spectral profile `h_s`.
//! Phase-resolved measurements are taken at a handful of focal planes and, after a transverse
//! DFT, decouple into one linear system per transverse frequency `q`:
//!
//! ```text
//! s^q = Phi^q p^q,    Phi^q = (1_Nf (x) H) (.) [A^q_1; ...; A^q_Nf]
//! ```
//!
//! where `A^q_f` are samples of the ISAM kernel integral and `(.)` is the row-wise Khatri-Rao
//! product.
//!
//! Crate layout:
//! - [`spectra`]: spectral profiles, libraries, Lorentzian synthesis, the spectra matrix `H`.
//! - [`geometry`] and [`kernel`]: imaging geometry, ISAM kernel quadrature and kernel tables.
//! - [`forward`]: matrix-free forward/adjoint operators and dense block assembly.
//! - [`uniqueness`]: passband bases and identifiability audits.
//! - [`scatter`]: Born and Foldy-Lax synthetic data, spectral noise, coarse Lippmann-Schwinger.
//! - [`recon`]: Tikhonov/CG and FISTA reconstruction, passband projection.
//! - [`analysis`]: singular-value scans, ensembles and image rendering.
//! - [`cast`]: the CAST binary array container.

pub mod analysis;
pub mod cast;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod kernel;
pub mod linalg;
pub mod quadrature;
pub mod recon;
pub mod rng;
pub mod scatter;
pub mod spectra;
pub mod uniqueness;

pub use error::{Error, Result};
pub use forward::{BlockSystem, DensityStack, MeasurementStack};

pub use geometry::ImagingGeometry;
pub use kernel::KernelTable;
pub use spectra::{SpectraMatrix, SpectralLibrary, SpectralProfile};

pub use num_complex::Complex64;
