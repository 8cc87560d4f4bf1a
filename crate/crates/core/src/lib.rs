//! Scattering data, resonances and Fredholm determinants for the
//! one-dimensional massless Dirac (Zakharov-Shabat) system with compactly
//! supported complex potentials.

pub mod determinant;
pub mod error;
pub mod identities;
pub mod neumann;
pub mod potential;
pub mod quadrature;
pub mod resonances;
pub mod scattering;
pub mod verify;

pub use determinant::{build_kernel, log_det, verify_a_equals_d, ADRecord, DeterminantResult, KernelDiscretization};
pub use error::{Error, Result};
pub use neumann::{a_series, a_series_auto, b_tilde_series, chi_series, SeriesResult};
pub use potential::{
    make_box, make_multibox, make_sampled, sample_fn, Piece, Potential, PotentialNorms,
    Representation,
};
pub use scattering::{
    a_derivative, a_jet, a_log_derivative, a_scaled, a_value, s_matrix, scattering_coefficients,
    scattering_phase, transfer, AJet, SMatrix, ScaledComplex, ScatteringCoefficients, Spinor2,
    TransferMatrix,
};
pub use resonances::{
    auto_depth, count_zeros_in_box, counting_report, find_resonances, forbidden_domain_check,
    AcceptedBox, ContourBox, CountingReport, ForbiddenDomainReport, Resonance, SearchResult,
    ZeroCount,
};
pub use identities::{
    breit_wigner_compare, breit_wigner_density, hadamard_eval, high_energy_check,
    phase_derivative_from_resonances, q0_action_check, resolvent_trace_sum, ActionReport,
    BreitWignerComparison, HighEnergyReport, ResolventTrace, TailModel, TruncatedSum,
};
pub use verify::{default_determinant_lambdas, run_verification, CheckRecord, VerificationReport, VerifyOptions, SUITE_NAMES};
