//! String-stability analysis of mixed human/autonomous ring roads.
//!
//! Human drivers follow `F(s; α) = (α3 s + α1)/(s² + α2 s + α1)` and
//! autonomous vehicles `G(s; β)` of the same form. The crate computes the
//! margin `J*` that bounds the required AV penetration rate, searches the
//! admissible gain box for the best `β`, and checks the resulting ring by
//! eigenmodes, simulation and peak-gain arguments.

pub mod error;
pub mod hinf;
pub mod model;
pub mod optimizer;
pub mod param;
pub mod penetration;
pub mod platoon;

pub use error::{Error, Result};
pub use hinf::{hinf_norm, peak_gain, v_star, v_star_star, FactorProduct, PeakGain, VStarReport};
pub use model::{
    check_rdc, delta, log_magnitude, unstable_band, AvGains, Factor, GainBounds, HvParams,
    OpenInterval,
};
pub use optimizer::{
    lattice_starts, nelder_mead, procedure_lbf, procedure_lbf_multistart, BoundReport,
    SimplexConfig, SimplexResult,
};
pub use param::{
    beta_from_pqr, beta_from_psi, beta_from_theta, check_feasible, psi_from_theta, sigmoid,
    ParamConfig, PqrParams, PsiParams, Sigmoid, ThetaParams,
};
pub use penetration::{
    fleet_bounds, gamma_lower_bound, j_ratio, j_star, max_hvs, min_avs, Argmin, FleetBounds,
    MarginAnalyzer, MarginResult,
};
pub use platoon::{
    asymptotic_offset, canonical_rotation, chi, eigenmodes, greedy_placement, simulate,
    simulate_strided, string_stable, EigenmodeSet, PlatoonConfig, TrajectoryRecord, WindowNorms,
};
