//! Retrospective k-space subsampling and parallel-MRI reconstruction toolkit.
//!
//! The crate generates Cartesian subsampling masks for eight schemes,
//! applies the multi-coil forward model, estimates coil sensitivities from
//! the autocalibration region, reconstructs with classical solvers and
//! scores the result with SSIM, pSNR and NMSE.

pub mod bench;
pub mod calib;
pub mod error;
pub mod grid;
pub mod io;
pub mod masks;
pub mod metrics;
pub mod operators;
pub mod phantom;
pub mod recon;
pub mod rng;

pub use error::{Error, Result};
pub use grid::{
    achieved_acceleration, kspace_radius, AccelerationSpec, AcsGeometry, AcsRegion, CoilStack,
    ComplexImage, GridShape, MultiCoilKSpace, RealImage, SamplingMask, Scheme, SensitivityMaps,
};
pub use rustfft::num_complex::Complex64;
