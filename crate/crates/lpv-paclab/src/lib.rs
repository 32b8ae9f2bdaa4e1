//! Continuous-time linear parameter-varying (LPV) state-space systems with
//! affine scheduling dependence: simulation, Volterra-kernel machinery,
//! quadratic-stability certificates with weighted H2 norms, PAC
//! generalization bounds and a least-squares identification experiment.
//!
//! The library is organized around the workflow of learning an LPV model
//! from sampled input/scheduling/output trajectories and certifying how well
//! its empirical prediction error generalizes:
//!
//! - [`signals`]: sampled signals, datasets, the random data-generating
//!   process and CSV/JSON persistence.
//! - [`lpv`]: the model type and fixed-step Euler/RK4 simulation.
//! - [`volterra`]: weighted Volterra kernels and two independent series
//!   truncations that cross-check the simulator.
//! - [`stability`]: generalized Lyapunov solving, weighted H2 norms and
//!   output bounds.
//! - [`pac`]: losses, risks, the generalization-bound formulas and an
//!   empirical Rademacher diagnostic.
//! - [`ident`]: ARX regression recovering the experiment family parameters.
//! - [`experiment`]: the end-to-end experiment harness, Monte Carlo bound
//!   validation and SVG reporting.

pub mod error;
pub mod experiment;
pub mod ident;
pub mod linalg;
pub mod lpv;
pub mod pac;
pub mod plot;
pub mod signals;
pub mod stability;
pub mod volterra;

pub use error::{Error, Result};
