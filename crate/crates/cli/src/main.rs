//! `fmcw` command-line front end.

mod config;
mod measfile;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fmcw_core::bounds::{crb_awgn_cbf, crb_delay, mcrb_delay, mmcrb, mmcrb_approx};
use fmcw_core::estimate::Method;
use fmcw_core::exec::{configure_threads, Exec};
use fmcw_core::iff::{h_fit, HTable, ShotNoiseCurve};
use fmcw_core::signal::{distance_to_delay, synth_measurement_with, Amplitudes, Measurement, NoiseSwitches};
use fmcw_core::sweep::{records_csv, run_method, run_sweep, summarize, summary_csv, EstimatorContext, SweepSpec};
use fmcw_core::{Error, SPEED_OF_LIGHT};

use config::{Config, ConfigError};
use measfile::{FormatError, MeasurementFile};

#[derive(Parser)]
#[command(name = "fmcw", version, about = "FMCW lidar simulation, estimation and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Overrides the configured seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a measurement file from a configuration.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Disable phase and shot noise.
        #[arg(long)]
        noiseless: bool,
    },
    /// Estimate distance and velocity from a measurement file.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Measurement file written by `simulate`.
        measurement: PathBuf,
        #[arg(long, default_value = "iff")]
        method: String,
        /// ĥ table written by `hfit`.
        #[arg(long, value_name = "PATH")]
        htable: Option<PathBuf>,
    },
    /// Run a Monte Carlo sweep and write per-trial and summary CSVs.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Per-trial records; the summary goes next to it with a `_summary` suffix.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[arg(long, value_name = "PATH")]
        htable: Option<PathBuf>,
    },
    /// Evaluate delay bounds.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "mmcrb")]
        method: BoundKind,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Use a stored ĥ table instead of fitting one in memory.
        #[arg(long, value_name = "PATH")]
        htable: Option<PathBuf>,
    },
    /// Fit the shot-noise IF error table ĥ.
    Hfit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[arg(long, value_name = "DB", allow_negative_numbers = true)]
        snr_min: Option<f64>,
        #[arg(long, value_name = "DB", allow_negative_numbers = true)]
        snr_max: Option<f64>,
        #[arg(long, value_name = "DB")]
        snr_step: Option<f64>,
        #[arg(long, value_name = "N")]
        samples: Option<usize>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundKind {
    Crb,
    Mcrb,
    Mmcrb,
    MmcrbApprox,
    AwgnCbf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Core(#[from] Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Format(_) | CliError::Io(_) => 2,
            CliError::Core(e) => match e {
                Error::InvalidArgument(_) | Error::TableFormat { .. } => 2,
                Error::MissingCalibration(_) => 3,
                Error::UnsupportedModulation { .. } => 4,
                _ => 5,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write(path: &Path, data: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, data).map_err(|e| io_err(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

impl Common {
    fn load(&self) -> CliResult<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::parse("", Path::new("."))?,
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn require_config(&self) -> CliResult<Config> {
        if self.config.is_none() {
            return Err(CliError::Config(ConfigError { line: None, field: "--config".into(), message: "required".into() }));
        }
        self.load()
    }

    fn exec(&self) -> CliResult<Exec> {
        match self.jobs {
            Some(0) => Err(Error::InvalidArgument("--jobs must be positive".into()).into()),
            Some(1) => Ok(Exec::Sequential),
            Some(n) => {
                configure_threads(n)?;
                Ok(Exec::default())
            }
            None => Ok(Exec::default()),
        }
    }
}

fn load_htable(flag: Option<&Path>, cfg: &Config) -> CliResult<Option<HTable>> {
    match flag.or(cfg.htable.as_deref()) {
        None => Ok(None),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            Ok(Some(HTable::from_csv(&text)?))
        }
    }
}

fn missing_table() -> CliError {
    Error::MissingCalibration("the iff methods need an ĥ table; run `fmcw hfit --out h.csv` and pass `--htable h.csv`".into()).into()
}

fn simulate(common: &Common, out: &Path, noiseless: bool) -> CliResult<()> {
    let cfg = common.require_config()?;
    let w = cfg.waveform.build()?;
    let noise = if noiseless { NoiseSwitches::NONE } else { NoiseSwitches::ALL };
    let m = synth_measurement_with(&w, &cfg.acquisition, &cfg.target, cfg.seed, noise)?;
    let file = MeasurementFile { config_echo: cfg.measurement_echo(), u: m.u, v_aux: m.v_aux };
    write(out, file.to_bytes())
}

fn estimate(common: &Common, path: &Path, method: &str, htable: Option<&Path>) -> CliResult<()> {
    let method: Method = method.parse()?;
    let bytes = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let file = MeasurementFile::from_bytes(&bytes)?;
    let meas_cfg = Config::parse(&file.config_echo, Path::new("."))?;
    if file.u.len() != meas_cfg.acquisition.num_samples {
        return Err(FormatError(format!(
            "{} samples stored but the echo records {}",
            file.u.len(),
            meas_cfg.acquisition.num_samples
        ))
        .into());
    }
    let run_cfg = common.load()?;
    let w = meas_cfg.waveform.build()?;
    let table = load_htable(htable, &run_cfg)?;
    if method.needs_calibration() && table.is_none() {
        return Err(missing_table());
    }
    let m = Measurement { u: file.u, v_aux: file.v_aux, config: meas_cfg.acquisition, seed: meas_cfg.seed };
    let ctx = EstimatorContext { htable: table, k: run_cfg.iff_k, gamma: run_cfg.iff_gamma, exec: common.exec()? };
    let start = Instant::now();
    let e = run_method(&m, &w, method, &ctx)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    for note in &e.diagnostics.notes {
        eprintln!("note: {note}");
    }
    println!("d_hat_m,v_hat_mps,objective,runtime_ms");
    println!("{},{},{},{ms:.3}", e.distance, e.velocity, e.objective);
    Ok(())
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sweep".into());
    let ext = out.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    out.with_file_name(format!("{stem}_summary{ext}"))
}

fn sweep(common: &Common, out: &Path, htable: Option<&Path>) -> CliResult<()> {
    let cfg = common.require_config()?;
    let exec = common.exec()?;
    let spec = SweepSpec {
        waveform: cfg.waveform.build()?,
        acquisition: cfg.acquisition,
        distances: cfg.sweep_distances.clone(),
        velocities: cfg.sweep_velocities.clone(),
        methods: cfg.sweep_methods.clone(),
        trials: cfg.sweep_trials,
        master_seed: cfg.seed,
        expect_ambiguous: cfg.expect_ambiguous,
    };
    spec.validate()?;
    let table = load_htable(htable, &cfg)?;
    if spec.methods.iter().any(|m| m.needs_calibration()) && table.is_none() {
        return Err(missing_table());
    }
    let ctx = EstimatorContext { htable: table, k: cfg.iff_k, gamma: cfg.iff_gamma, exec: Exec::Sequential };
    let records = run_sweep(&spec, &ctx, exec)?;
    let failed = records.iter().filter(|r| !r.converged).count();
    if failed > 0 {
        eprintln!("note: {failed} of {} trials did not converge", records.len());
    }
    write(out, records_csv(&records))?;
    write(&summary_path(out), summary_csv(&summarize(&records)))
}

fn shot_curve(cfg: &Config, htable: Option<&Path>, exec: Exec) -> CliResult<ShotNoiseCurve> {
    match load_htable(htable, cfg)? {
        Some(t) => Ok(ShotNoiseCurve::from_table(t)),
        None => Ok(h_fit(&cfg.hfit.grid(), cfg.hfit.samples, cfg.seed, exec)?),
    }
}

fn bounds(common: &Common, kind: BoundKind, out: Option<&Path>, htable: Option<&Path>) -> CliResult<()> {
    let cfg = common.load()?;
    let exec = common.exec()?;
    let acq = &cfg.acquisition;
    let mut text = String::new();
    let row = |text: &mut String, key: String, var_m2: f64| {
        text.push_str(&format!("{key},{var_m2:e},{:e}\n", var_m2.sqrt()));
    };
    match kind {
        BoundKind::Mmcrb | BoundKind::MmcrbApprox => {
            let shot = shot_curve(&cfg, htable, exec)?;
            text.push_str("waveform,bound_m2,bound_root_m\n");
            for &k in &cfg.bound_waveforms {
                let w = cfg.waveform.build_kind(k)?;
                let b = if kind == BoundKind::Mmcrb {
                    mmcrb(&w, acq, &shot, cfg.bound_nodes, exec)?
                } else {
                    mmcrb_approx(&w, acq, &shot, cfg.bound_nodes)?
                };
                row(&mut text, k.to_string(), b);
            }
        }
        BoundKind::Crb | BoundKind::Mcrb => {
            let shot = shot_curve(&cfg, htable, exec)?;
            let w = cfg.waveform.build()?;
            let f = if kind == BoundKind::Crb { crb_delay } else { mcrb_delay };
            let values = exec.map(&cfg.bound_distances, |&d| f(d, &w, acq, &shot));
            text.push_str("distance_m,bound_m2,bound_root_m\n");
            for (d, b) in cfg.bound_distances.iter().zip(values) {
                row(&mut text, d.to_string(), b?);
            }
        }
        BoundKind::AwgnCbf => {
            let w = &cfg.waveform;
            let n = (acq.sampling_rate * w.chirp_duration).round() as usize;
            let rate = w.bandwidth / w.chirp_duration;
            text.push_str("distance_m,bound_m2,bound_root_m\n");
            for &d in &cfg.bound_distances {
                if distance_to_delay(d) >= w.chirp_duration {
                    return Err(Error::InvalidArgument(format!("awgn-cbf needs τ < T; {d} m is out of range")).into());
                }
                let amp = Amplitudes::at(acq, d)?;
                let (var_tau, _) = crb_awgn_cbf(acq.sampling_rate, 2.0 * amp.noise_variance(), amp.a1, rate, n)?;
                row(&mut text, d.to_string(), var_tau * (SPEED_OF_LIGHT / 2.0).powi(2));
            }
        }
    }
    emit(out, &text)
}

fn hfit(common: &Common, out: &Path, min: Option<f64>, max: Option<f64>, step: Option<f64>, samples: Option<usize>) -> CliResult<()> {
    let mut cfg = common.load()?;
    let h = &mut cfg.hfit;
    h.snr_min_db = min.unwrap_or(h.snr_min_db);
    h.snr_max_db = max.unwrap_or(h.snr_max_db);
    h.snr_step_db = step.unwrap_or(h.snr_step_db);
    h.samples = samples.unwrap_or(h.samples);
    if !(h.snr_step_db > 0.0 && h.snr_max_db > h.snr_min_db) {
        return Err(Error::InvalidArgument("SNR grid needs --snr-max > --snr-min and a positive --snr-step".into()).into());
    }
    let curve = h_fit(&cfg.hfit.grid(), cfg.hfit.samples, cfg.seed, common.exec()?)?;
    write(out, curve.table.to_csv())
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate { common, out, noiseless } => simulate(common, out, *noiseless),
        Command::Estimate { common, measurement, method, htable } => estimate(common, measurement, method, htable.as_deref()),
        Command::Sweep { common, out, htable } => sweep(common, out, htable.as_deref()),
        Command::Bounds { common, method, out, htable } => bounds(common, *method, out.as_deref(), htable.as_deref()),
        Command::Hfit { common, out, snr_min, snr_max, snr_step, samples } => {
            hfit(common, out, *snr_min, *snr_max, *snr_step, *samples)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
