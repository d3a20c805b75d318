pub mod closed_form;
pub mod design_builder;
pub mod error;
pub mod fp_solver;
mod linalg;
pub mod model_core;
pub mod simulator;
pub mod spectra;
pub mod validate;

pub use closed_form::{
    balanced_general_b, crossed_b, mp_density, mp_edges, mp_stieltjes, nested_b, oneway_b,
    ClosedFormUpdate,
};
pub use design_builder::{
    build_crossed, build_nested, build_oneway, projections, BalancedLattice, EstimatorMatrix,
    OneWayParts,
};
pub use error::{Error, Result};
pub use fp_solver::{
    a_update, b_update, moment_bracket, solve_at_z, solve_at_z_warm, solve_grid, sweep_grid,
    DensityRequest, FixedPoint, GridSolution, PointStatus, DEFAULT_EPSILON,
};
pub use simulator::{
    empirical_spectrum, manova_estimate, manova_estimate_dense, SimConfig, Simulator,
};
pub use spectra::{
    auto_density, cdf_from_density, density_moments, detect_support, empirical_cdf, AutoDensity,
    CdfTable, EmpiricalSpectrum, SpectralDensity, SpectrumMeta, StepCdf,
};
pub use model_core::{
    law_model, to_general_model, validate_components, Correction, CorrectionKind, DesignSpec,
    FFactor, GeneralModel, Sigma, SolverConfig, VarianceComponents,
};
pub use validate::{
    compare, invariant_suite, ks_distance, ComparisonReport, InvariantCheck, InvariantLedger,
    KS_THRESHOLD, MASS_FLOOR,
};
