//! Monte Carlo sweep engine: estimator dispatch, per-trial records and
//! RMSE summaries.

use std::fmt::Write as _;
use std::time::Instant;

use crate::cbf::{estimate_cbf, tsuchida_estimate, FrequencyEstimator};
use crate::error::{invalid, Result};
use crate::estimate::{Estimate, Method};
use crate::exec::Exec;
use crate::iff::{iff_estimate, HTable, IffOptions, LatticeMode};
use crate::mf::{mf_distance, mf_joint};
use crate::rng::derive_seed;
use crate::signal::{synth_measurement, velocity_to_doppler, AcquisitionConfig, Measurement, Target};
use crate::waveform::ModulationWaveform;
use crate::SPEED_OF_LIGHT;

/// Settings shared by every estimator call.
#[derive(Debug, Clone)]
pub struct EstimatorContext {
    pub htable: Option<HTable>,
    pub k: usize,
    pub gamma: f64,
    pub exec: Exec,
}

impl Default for EstimatorContext {
    fn default() -> Self {
        Self { htable: None, k: 2, gamma: 0.9, exec: Exec::default() }
    }
}

/// Runs `method` on `m`.
pub fn run_method(m: &Measurement, w: &ModulationWaveform, method: Method, ctx: &EstimatorContext) -> Result<Estimate> {
    match method {
        Method::Periodogram => estimate_cbf(m, w, FrequencyEstimator::Periodogram),
        Method::Lorentzian => estimate_cbf(m, w, FrequencyEstimator::Lorentzian),
        Method::Tsuchida => tsuchida_estimate(m, w),
        Method::MatchedFilter => mf_distance(m, w),
        Method::MatchedFilterJoint => mf_joint(m, w, ctx.exec),
        Method::Iff | Method::IffJoint => {
            let mode = if method == Method::Iff { LatticeMode::DistanceOnly } else { LatticeMode::Joint };
            let opts = IffOptions {
                linewidth: m.config.linewidth,
                k: ctx.k,
                gamma: ctx.gamma,
                mode,
                exec: ctx.exec,
                ..Default::default()
            };
            iff_estimate(m, w, ctx.htable.as_ref(), &opts)
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub waveform: ModulationWaveform,
    pub acquisition: AcquisitionConfig,
    pub distances: Vec<f64>,
    pub velocities: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: usize,
    pub master_seed: u64,
    /// Allows grid points outside (0, cT] × (−f_s/2, f_s/2].
    pub expect_ambiguous: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.acquisition.validate()?;
        if self.methods.is_empty() {
            return Err(invalid("sweep.methods must name at least one method"));
        }
        if self.distances.is_empty() || self.velocities.is_empty() {
            return Err(invalid("sweep grid must contain at least one distance and one velocity"));
        }
        if self.trials == 0 {
            return Err(invalid("sweep.trials must be positive"));
        }
        if self.distances.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(invalid("sweep.distances_m must be positive"));
        }
        if self.velocities.iter().any(|v| !v.is_finite()) {
            return Err(invalid("sweep.velocities_mps must be finite"));
        }
        if !self.expect_ambiguous {
            let d_max = SPEED_OF_LIGHT * self.waveform.chirp_duration();
            let f_max = 0.5 * self.acquisition.sampling_rate;
            for &d in &self.distances {
                if d > d_max {
                    return Err(invalid(format!("distance {d} m exceeds the unambiguous range {d_max:.3} m; set sweep.expect_ambiguous")));
                }
            }
            for &v in &self.velocities {
                let f = velocity_to_doppler(v, self.waveform.center_frequency());
                if !(f > -f_max && f <= f_max) {
                    return Err(invalid(format!("velocity {v} m/s aliases in Doppler; set sweep.expect_ambiguous")));
                }
            }
        }
        Ok(())
    }

    /// Grid points in row order: distance-major, then velocity.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.distances.iter().flat_map(|&d| self.velocities.iter().map(move |&v| (d, v))).collect()
    }
}

/// Seed of trial `trial` at grid point `point`.
pub fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    derive_seed(master, &[point as u64, trial as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub distance_m: f64,
    pub velocity_mps: f64,
    pub method: Method,
    pub trial: usize,
    pub seed: u64,
    pub d_hat_m: f64,
    pub v_hat_mps: f64,
    pub abs_err_d_m: f64,
    pub abs_err_v_mps: f64,
    pub runtime_ms: f64,
    pub converged: bool,
}

pub const RECORD_HEADER: &str =
    "distance_m,velocity_mps,method,trial,seed,d_hat_m,v_hat_mps,abs_err_d_m,abs_err_v_mps,runtime_ms,converged";

impl SweepRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.3},{}",
            self.distance_m,
            self.velocity_mps,
            self.method,
            self.trial,
            self.seed,
            self.d_hat_m,
            self.v_hat_mps,
            self.abs_err_d_m,
            self.abs_err_v_mps,
            self.runtime_ms,
            self.converged
        )
    }
}

/// One record per (point, method, trial), sorted in that order. Trials
/// that fail keep NaN estimates and `converged = false`.
pub fn run_sweep(spec: &SweepSpec, ctx: &EstimatorContext, exec: Exec) -> Result<Vec<SweepRecord>> {
    spec.validate()?;
    if spec.methods.iter().any(|m| m.needs_calibration()) && ctx.htable.is_none() {
        return Err(crate::error::Error::MissingCalibration("iff methods need an h table; run `fmcw hfit` first".into()));
    }
    let points = spec.points();
    let tasks: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..spec.trials).map(move |t| (p, t))).collect();
    let inner = EstimatorContext { exec: Exec::Sequential, ..ctx.clone() };
    let w = &spec.waveform;
    let per_task = exec.map(&tasks, |&(p, t)| {
        let (d, v) = points[p];
        let seed = trial_seed(spec.master_seed, p, t);
        let m = synth_measurement(w, &spec.acquisition, &Target::new(d, v), seed);
        spec.methods
            .iter()
            .map(|&method| {
                let start = Instant::now();
                let est = m.as_ref().map_err(Clone::clone).and_then(|m| run_method(m, w, method, &inner));
                let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
                let (d_hat, v_hat, converged) = match est {
                    Ok(e) => (e.distance, e.velocity, e.diagnostics.converged || !method.needs_calibration()),
                    Err(_) => (f64::NAN, f64::NAN, false),
                };
                SweepRecord {
                    distance_m: d,
                    velocity_mps: v,
                    method,
                    trial: t,
                    seed,
                    d_hat_m: d_hat,
                    v_hat_mps: v_hat,
                    abs_err_d_m: (d_hat - d).abs(),
                    abs_err_v_mps: (v_hat - v).abs(),
                    runtime_ms,
                    converged,
                }
            })
            .collect::<Vec<_>>()
    });
    let mut records: Vec<SweepRecord> = per_task.into_iter().flatten().collect();
    let method_rank = |m: Method| spec.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX);
    let point_index = |r: &SweepRecord| points.iter().position(|&(d, v)| d == r.distance_m && v == r.velocity_mps).unwrap_or(usize::MAX);
    records.sort_by_key(|r| (point_index(r), method_rank(r.method), r.trial));
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub distance_m: f64,
    pub velocity_mps: f64,
    pub method: Method,
    pub rmse_d: f64,
    pub rmse_v: f64,
    /// Sample standard deviation of the squared distance errors.
    pub se_std: f64,
}

pub const SUMMARY_HEADER: &str = "distance_m,velocity_mps,method,rmse_d,rmse_v,se_std";

impl SummaryRow {
    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.distance_m, self.velocity_mps, self.method, self.rmse_d, self.rmse_v, self.se_std)
    }
}

/// RMSE per (point, method), keeping the record order.
pub fn summarize(records: &[SweepRecord]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let r0 = &records[i];
        let mut j = i;
        while j < records.len()
            && records[j].distance_m == r0.distance_m
            && records[j].velocity_mps == r0.velocity_mps
            && records[j].method == r0.method
        {
            j += 1;
        }
        let group = &records[i..j];
        let n = group.len() as f64;
        let se: Vec<f64> = group.iter().map(|r| r.abs_err_d_m.powi(2)).collect();
        let mse_d = se.iter().sum::<f64>() / n;
        let mse_v = group.iter().map(|r| r.abs_err_v_mps.powi(2)).sum::<f64>() / n;
        let se_std = if group.len() > 1 { (se.iter().map(|s| (s - mse_d).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        rows.push(SummaryRow {
            distance_m: r0.distance_m,
            velocity_mps: r0.velocity_mps,
            method: r0.method,
            rmse_d: mse_d.sqrt(),
            rmse_v: mse_v.sqrt(),
            se_std,
        });
        i = j;
    }
    rows
}

pub fn records_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}
