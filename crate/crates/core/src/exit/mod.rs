//! EXIT-chart machinery: the J-function, variable- and check-node transfer
//! curves, and the two design algorithms (multiplier equalization and the
//! alternating degree-distribution LP).

mod chain;
mod design;
mod j;
mod multipliers;

pub use chain::{
    cnd_exit, cnd_exit_at_one, initial_mi_degree2, AppSource, AwgnSource, ChainModel, ChainOptions, ChainOutput,
};
pub use j::{consistent_probs, j_inv, j_mi, mi_of_probs, sample_consistent_llr, vnd_exit, JTable, SIGMA_MAX, SIGMA_STEP};
pub use multipliers::{
    optimize_multipliers, optimize_multipliers_with, EqualizerOptions, MeanMatrix, MultiplierDesign, DEFAULT_OPERATING_MI,
    MAX_EQUALIZATION_ROUNDS, SPREAD_TOLERANCE,
};
pub use design::{
    cnd_curves, optimize_degrees, standard_grid, tunnel_test, tunnel_threshold, vnd_curve, vnd_mixture, CndCurves, DegreeDesign,
    DesignSpec, ExitCurve, ExitOptions, TunnelReport, GRID_POINTS, GRID_TOP, MAX_DESIGN_ROUNDS, TUNNEL_LIMIT,
};
