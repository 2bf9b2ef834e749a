//! Fourier–Hermite symbol analysis for operator systems
//! `L_r = Q_r(D_t) + d_r P(x, D_x)` on `𝕋^m × ℝ^n`.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the bottom of this file fix the double-precision flavour used by the CLI.

pub mod diagnostics;
pub mod eigen;
pub mod error;
pub mod exact;
pub mod io;
pub mod liouville;
pub mod normal_form;
pub mod resonance;
pub mod scalar;
pub mod solver;
pub mod spectral;
pub mod symbols;
mod sweep;

pub use diagnostics::{
    decay_classify, diophantine_profile, hypoellipticity_verdict, solvability_verdict, ClassificationVerdict,
    DecayLabel, DecayProfile, DiophantineReport, Thresholds, Trend, Verdict, VerdictKind,
};
pub use eigen::{hermite_eval, weyl_fit, CustomSpectrum, EigenProvider, WeylFit};
pub use error::{Error, Result};
pub use exact::{parse_rational, Coefficient, ExactComplex};
pub use liouville::{
    convergents, exp_liouville_test, vector_coordinate_test, ContinuedFraction, ConvergentBounds, LiouvilleVerdict,
    VectorVerdict,
};
pub use normal_form::{
    average_coefficient, compat_integral, conjugation_residual, phase_a, psi_apply, reduce_system, Direction,
    NormalFormMap, TimeCoefficient, TimeCoefficientSet, TimeDependentSystem,
};
pub use resonance::{resonance_exact, Resonance};
pub use scalar::Real;
pub use solver::{
    admissibility_check, apply_system, counterexample_pair, solve, AdmissibilityReport, DataVector, Flavor,
};
pub use spectral::{enumerate_shells, reconstruct, weight, Bounds, ModeIndex, ShellPartition, SpaceParams, SpectralField};
pub use symbols::{zero_set, zero_set_flagged, OperatorSpec, SystemSpec, TabulatedSymbol, TimeSymbol};

/// Double-precision coefficient field.
pub type Field = SpectralField<f64>;
/// Double-precision system.
pub type System = SystemSpec<f64>;
/// Double-precision data vector.
pub type Data = DataVector<f64>;
/// Single-precision coefficient field.
pub type Field32 = SpectralField<f32>;
