//! Fourier analysis on T^d: transforms, Sobolev-type norms, truncation,
//! directional weights, the θ-decomposition, lattice scans and decay fits.

mod diophantine;
mod fourier;
mod interp;
mod norms;
mod regularity;

pub use diophantine::{diophantine_scan, DiophantineScan, ScanRow, DOT_FLOOR};
pub use fourier::{analyze, index_to_freq, norm, synthesize, FourierField, GridField};
pub(crate) use fourier::{fft_nd, freq_to_index};
pub use interp::SpectralInterpolant;
pub use norms::{
    chain_exponent, directional_weighted_norm, fractional_derivative, l2_upgrade_check, monomial_weight, sobolev_norm,
    theta_bound_constant, theta_decomposition, truncate, InequalityCheck, L2UpgradeReport, L2Verdict, ThetaDecomposition,
    Truncation, GROWTH_EXPONENT,
};
pub use regularity::{
    regularity_report, regularity_report_coeffs, significant_coefficients, DecayModel, RegularityReport, ShellRow, FLOOR_MARGIN,
};
