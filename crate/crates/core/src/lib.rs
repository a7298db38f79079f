//! Analysis of homogeneous polynomial systems `ẋ = Kx + 𝒜x^{k−1}` whose
//! tensor is orthogonally decomposable, `𝒜 = Σ_r λ_r v_r^{⊗k}`, under linear
//! feedback `K = Σ_r κ_r v_r v_rᵀ` sharing the same orthonormal basis.
//!
//! In modal coordinates `y = Vᵀx` the loop decouples into scalar equations
//! `ẏ_r = κ_r y_r + λ_r y_r^{p+1}` (`p = k − 2`), which this crate solves in
//! closed form. On top of that it provides:
//!
//! - [`tensor`]: dense and factored tensor contractions, Z-eigenpair residuals.
//! - [`modal`]: exact per-mode trajectories and their validity horizons.
//! - [`certify`]: region-of-attraction membership, settling and escape times.
//! - [`robust`]: bounds under matched bounded disturbances (even `p`).
//! - [`sim`]: a fixed-step RK4 oracle, disturbance signals and basin grids.
//! - [`io`]: system spec JSON and CSV formats.
//!
//! Mode indices are zero-based in the API and one-based in serialized output
//! and error messages.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod error;
pub mod io;
pub mod modal;
pub mod robust;
pub mod roots;
pub mod sim;
pub mod tensor;

pub use error::{Error, Result};
pub use modal::ModeParams;
pub use tensor::{OdecoSystem, Parity};
