//! Instantaneous-frequency fitting: IF extraction, noise calibration, the
//! wrapped-normal likelihood and its annealed multi-start maximization.

mod calibration;
mod estimator;
mod extract;
mod landscape;
mod likelihood;

pub use calibration::{
    default_snr_grid, estimate_snr, h_fit, sigma_hat, simulate_if_error, HTable, NoiseCalibration, ShotNoiseCurve,
    UNIFORM_VARIANCE,
};
pub use estimator::{anneal_schedule, calibrate, iff_estimate, truncation_for, IffOptions, SIGMA2_FLOOR, SIGMA2_RELAXED};
pub use extract::{extract_if, midpoint_times, IfSequence};
pub use landscape::{
    initial_lattice, rhombus_closed_form, rhombus_numeric, rhombus_numeric_with_step, Lattice, LatticeMode,
    RHOMBUS_SCAN_STEPS,
};
pub use likelihood::{deterministic_distance, wrapped_normal_loglik, IffProblem};
