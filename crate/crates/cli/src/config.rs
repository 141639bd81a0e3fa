//! Flat `key = value` configuration with dotted section names.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fmcw_core::estimate::Method;
use fmcw_core::signal::{AcquisitionConfig, Target, DEFAULT_CENTER_FREQUENCY};
use fmcw_core::waveform::{ModulationWaveform, WaveformKind, WaveformTable};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}{field}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

fn err(line: Option<usize>, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, field: field.to_string(), message: message.into() }
}

const KEYS: &[&str] = &[
    "seed",
    "waveform.kind",
    "waveform.bandwidth_hz",
    "waveform.chirp_duration_s",
    "waveform.center_frequency_hz",
    "waveform.table",
    "acq.fs_hz",
    "acq.num_samples",
    "acq.linewidth_hz",
    "acq.tx_power_w",
    "acq.lo_power_w",
    "acq.aperture_m2",
    "acq.reflectivity",
    "acq.responsivity",
    "target.d_m",
    "target.v_mps",
    "sweep.distances_m",
    "sweep.velocities_mps",
    "sweep.methods",
    "sweep.trials",
    "sweep.expect_ambiguous",
    "iff.k",
    "iff.gamma",
    "iff.htable",
    "bounds.distances_m",
    "bounds.waveforms",
    "bounds.nodes",
    "hfit.snr_min_db",
    "hfit.snr_max_db",
    "hfit.snr_step_db",
    "hfit.samples",
];

/// Raw key-value pairs with the line each came from.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
    base_dir: PathBuf,
}

impl RawConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| err(Some(line), content, "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(err(Some(line), k, "unknown key"));
            }
            if v.is_empty() {
                return Err(err(Some(line), k, "missing value"));
            }
            if entries.insert(k.to_string(), (v.to_string(), line)).is_some() {
                return Err(err(Some(line), k, "duplicate key"));
            }
        }
        Ok(Self { entries, base_dir: base_dir.to_path_buf() })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| err(None, &path.display().to_string(), format!("cannot read: {e}")))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn num<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some((v, l)) => v.parse().map_err(|_| err(Some(l), key, format!("cannot parse '{v}' as a number"))),
        }
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, l)) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| err(Some(l), key, format!("cannot parse '{}' as a number", s.trim()))))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(|(v, _)| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                self.base_dir.join(p)
            }
        })
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.raw(key).map(|(_, l)| l)
    }

    fn check<T>(&self, key: &str, ok: bool, v: T, msg: &str) -> Result<T, ConfigError> {
        if ok {
            Ok(v)
        } else {
            Err(err(self.line(key), key, msg))
        }
    }
}

#[derive(Debug, Clone)]
pub struct WaveformSpec {
    pub kind: WaveformKind,
    pub bandwidth: f64,
    pub chirp_duration: f64,
    pub center_frequency: f64,
    pub table: Option<PathBuf>,
}

impl WaveformSpec {
    pub fn build(&self) -> Result<ModulationWaveform, ConfigError> {
        self.build_kind(self.kind)
    }

    pub fn build_kind(&self, kind: WaveformKind) -> Result<ModulationWaveform, ConfigError> {
        let (b, t, fc) = (self.bandwidth, self.chirp_duration, self.center_frequency);
        let r = match kind {
            WaveformKind::Triangular => ModulationWaveform::triangular(b, t, fc),
            WaveformKind::Sinusoidal => ModulationWaveform::sinusoidal(b, t, fc),
            WaveformKind::SmoothStair => ModulationWaveform::smooth_stair(b, t, fc),
            WaveformKind::Tabulated => {
                let path = self.table.as_ref().ok_or_else(|| err(None, "waveform.table", "required for tabulated waveforms"))?;
                let text = std::fs::read_to_string(path)
                    .map_err(|e| err(None, "waveform.table", format!("cannot read {}: {e}", path.display())))?;
                WaveformTable::from_csv(&text).and_then(|tab| ModulationWaveform::tabulated(tab, b, t, fc))
            }
        };
        r.map_err(|e| err(None, "waveform", e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct HfitSpec {
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub snr_step_db: f64,
    pub samples: usize,
}

impl HfitSpec {
    pub fn grid(&self) -> Vec<f64> {
        let n = ((self.snr_max_db - self.snr_min_db) / self.snr_step_db + 1e-9).floor() as usize;
        (0..=n).map(|i| self.snr_min_db + i as f64 * self.snr_step_db).collect()
    }
}

/// Fully resolved configuration with defaults filled in.
#[derive(Debug, Clone)]
pub struct Config {
    pub seed: u64,
    pub waveform: WaveformSpec,
    pub acquisition: AcquisitionConfig,
    pub target: Target,
    pub sweep_distances: Vec<f64>,
    pub sweep_velocities: Vec<f64>,
    pub sweep_methods: Vec<Method>,
    pub sweep_trials: usize,
    pub expect_ambiguous: bool,
    pub iff_k: usize,
    pub iff_gamma: f64,
    pub htable: Option<PathBuf>,
    pub bound_distances: Vec<f64>,
    pub bound_waveforms: Vec<WaveformKind>,
    pub bound_nodes: usize,
    pub hfit: HfitSpec,
}

impl Config {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let d_acq = AcquisitionConfig::default();
        let kind: WaveformKind = match raw.raw("waveform.kind") {
            None => WaveformKind::Triangular,
            Some((v, l)) => v.parse().map_err(|e: fmcw_core::Error| err(Some(l), "waveform.kind", e.to_string()))?,
        };
        let waveform = WaveformSpec {
            kind,
            bandwidth: raw.num("waveform.bandwidth_hz", 500e6)?,
            chirp_duration: raw.num("waveform.chirp_duration_s", 2e-6)?,
            center_frequency: raw.num("waveform.center_frequency_hz", DEFAULT_CENTER_FREQUENCY)?,
            table: raw.path("waveform.table"),
        };
        raw.check("waveform.bandwidth_hz", waveform.bandwidth > 0.0, (), "must be positive")?;
        raw.check("waveform.chirp_duration_s", waveform.chirp_duration > 0.0, (), "must be positive")?;
        raw.check("waveform.center_frequency_hz", waveform.center_frequency > 0.0, (), "must be positive")?;
        if kind == WaveformKind::Tabulated && waveform.table.is_none() {
            return Err(err(raw.line("waveform.kind"), "waveform.table", "required for tabulated waveforms"));
        }

        let acquisition = AcquisitionConfig {
            sampling_rate: raw.num("acq.fs_hz", d_acq.sampling_rate)?,
            num_samples: raw.num("acq.num_samples", d_acq.num_samples)?,
            linewidth: raw.num("acq.linewidth_hz", d_acq.linewidth)?,
            transmit_power: raw.num("acq.tx_power_w", d_acq.transmit_power)?,
            lo_power: raw.num("acq.lo_power_w", d_acq.lo_power)?,
            aperture_area: raw.num("acq.aperture_m2", d_acq.aperture_area)?,
            reflectivity: raw.num("acq.reflectivity", d_acq.reflectivity)?,
            responsivity: raw.num("acq.responsivity", d_acq.responsivity)?,
        };
        let a = &acquisition;
        raw.check("acq.fs_hz", a.sampling_rate > 0.0 && a.sampling_rate.is_finite(), (), "must be positive")?;
        raw.check("acq.num_samples", a.num_samples >= 16, (), "must be at least 16")?;
        raw.check("acq.linewidth_hz", a.linewidth >= 0.0 && a.linewidth.is_finite(), (), "must be non-negative")?;
        raw.check("acq.tx_power_w", a.transmit_power > 0.0, (), "must be positive")?;
        raw.check("acq.lo_power_w", a.lo_power > 0.0, (), "must be positive")?;
        raw.check("acq.aperture_m2", a.aperture_area > 0.0, (), "must be positive")?;
        raw.check("acq.reflectivity", a.reflectivity > 0.0 && a.reflectivity <= 1.0, (), "must lie in (0, 1]")?;
        raw.check("acq.responsivity", a.responsivity > 0.0, (), "must be positive")?;

        let target = Target::new(raw.num("target.d_m", 100.0)?, raw.num("target.v_mps", 0.0)?);
        raw.check("target.d_m", target.distance > 0.0 && target.distance.is_finite(), (), "must be positive")?;
        raw.check("target.v_mps", target.velocity.is_finite(), (), "must be finite")?;

        let sweep_distances = raw.list("sweep.distances_m")?.unwrap_or_else(|| vec![10.0, 60.0, 130.0, 300.0, 599.0]);
        raw.check("sweep.distances_m", !sweep_distances.is_empty() && sweep_distances.iter().all(|d| *d > 0.0), (), "distances must be positive")?;
        let sweep_velocities = raw.list("sweep.velocities_mps")?.unwrap_or_else(|| vec![0.0]);
        let sweep_methods = match raw.raw("sweep.methods") {
            None => vec![Method::Lorentzian, Method::MatchedFilter, Method::Iff],
            Some((v, l)) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<Method>().map_err(|e| err(Some(l), "sweep.methods", e.to_string())))
                .collect::<Result<Vec<_>, _>>()?,
        };
        raw.check("sweep.methods", !sweep_methods.is_empty(), (), "must name at least one method")?;
        let sweep_trials: usize = raw.num("sweep.trials", 20)?;
        raw.check("sweep.trials", sweep_trials > 0, (), "must be positive")?;
        let expect_ambiguous = match raw.raw("sweep.expect_ambiguous") {
            None => false,
            Some((v, l)) => v.parse().map_err(|_| err(Some(l), "sweep.expect_ambiguous", "expected true or false"))?,
        };

        let iff_k: usize = raw.num("iff.k", 2)?;
        raw.check("iff.k", iff_k >= 1, (), "must be at least 1")?;
        let iff_gamma: f64 = raw.num("iff.gamma", 0.9)?;
        raw.check("iff.gamma", iff_gamma > 0.0 && iff_gamma <= 1.0, (), "must lie in (0, 1]")?;

        let bound_distances = raw.list("bounds.distances_m")?.unwrap_or_else(|| (1..=12).map(|i| 50.0 * i as f64 - 25.0).collect());
        raw.check("bounds.distances_m", !bound_distances.is_empty() && bound_distances.iter().all(|d| *d > 0.0), (), "distances must be positive")?;
        let bound_waveforms = match raw.raw("bounds.waveforms") {
            None => vec![WaveformKind::Triangular, WaveformKind::Sinusoidal, WaveformKind::SmoothStair],
            Some((v, l)) => v
                .split(',')
                .map(|s| s.parse::<WaveformKind>().map_err(|e| err(Some(l), "bounds.waveforms", e.to_string())))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let bound_nodes: usize = raw.num("bounds.nodes", fmcw_core::bounds::MMCRB_NODES)?;
        raw.check("bounds.nodes", bound_nodes >= 32, (), "must be at least 32")?;

        let hfit = HfitSpec {
            snr_min_db: raw.num("hfit.snr_min_db", -30.0)?,
            snr_max_db: raw.num("hfit.snr_max_db", 40.0)?,
            snr_step_db: raw.num("hfit.snr_step_db", 1.0)?,
            samples: raw.num("hfit.samples", 10_000)?,
        };
        raw.check("hfit.snr_step_db", hfit.snr_step_db > 0.0, (), "must be positive")?;
        raw.check("hfit.snr_max_db", hfit.snr_max_db > hfit.snr_min_db, (), "must exceed hfit.snr_min_db")?;
        raw.check("hfit.samples", hfit.samples >= 2, (), "must be at least 2")?;

        Ok(Self {
            seed: raw.num("seed", 1)?,
            waveform,
            acquisition,
            target,
            sweep_distances,
            sweep_velocities,
            sweep_methods,
            sweep_trials,
            expect_ambiguous,
            iff_k,
            iff_gamma,
            htable: raw.path("iff.htable"),
            bound_distances,
            bound_waveforms,
            bound_nodes,
            hfit,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_raw(&RawConfig::load(path)?)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        Self::from_raw(&RawConfig::parse(text, base_dir)?)
    }

    /// Canonical text of the fields that define a measurement.
    pub fn measurement_echo(&self) -> String {
        let w = &self.waveform;
        let a = &self.acquisition;
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "waveform.kind = {}", w.kind);
        let _ = writeln!(s, "waveform.bandwidth_hz = {:e}", w.bandwidth);
        let _ = writeln!(s, "waveform.chirp_duration_s = {:e}", w.chirp_duration);
        let _ = writeln!(s, "waveform.center_frequency_hz = {:e}", w.center_frequency);
        if let Some(p) = &w.table {
            let abs = std::fs::canonicalize(p).unwrap_or_else(|_| p.clone());
            let _ = writeln!(s, "waveform.table = {}", abs.display());
        }
        let _ = writeln!(s, "acq.fs_hz = {:e}", a.sampling_rate);
        let _ = writeln!(s, "acq.num_samples = {}", a.num_samples);
        let _ = writeln!(s, "acq.linewidth_hz = {:e}", a.linewidth);
        let _ = writeln!(s, "acq.tx_power_w = {:e}", a.transmit_power);
        let _ = writeln!(s, "acq.lo_power_w = {:e}", a.lo_power);
        let _ = writeln!(s, "acq.aperture_m2 = {:e}", a.aperture_area);
        let _ = writeln!(s, "acq.reflectivity = {:e}", a.reflectivity);
        let _ = writeln!(s, "acq.responsivity = {:e}", a.responsivity);
        let _ = writeln!(s, "target.d_m = {:e}", self.target.distance);
        let _ = writeln!(s, "target.v_mps = {:e}", self.target.velocity);
        s
    }
}
