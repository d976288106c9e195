use gffperc::coarse::{Regime, Schedule, BOX_CAPACITY_C};
use gffperc::lattice::Enlargement;
use gffperc::observables::Ensemble;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::CliError;

/// One run, read from TOML and then patched by `--key=value` flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub d: usize,
    /// Side of the centred cubic domain.
    pub side: usize,
    /// Clusters reaching within `margin` of the domain edge count as infinite.
    pub margin: usize,
    pub seed: u64,
    pub samples: u64,
    /// Size of the worker pool, `0` for one per core and `1` for a sequential run.
    pub workers: usize,
    /// Level grid.
    pub h: Vec<f64>,
    /// Capacity brackets `N = 1..=n_max`.
    pub n_max: u64,
    pub observables: Vec<String>,
    pub output: PathBuf,
    /// Truncation tolerance of the free Green function.
    pub green_tol: f64,
    /// Known `h_*` estimate; takes precedence over a fresh scan.
    pub h_star: Option<f64>,
    /// Samples for a crossing scan of `h_*`; `0` skips it.
    pub h_star_samples: u64,
    pub schedule: ScheduleConfig,
    pub green: GreenConfig,
    pub capacity: CapacityConfig,
    pub sample: SampleConfig,
    pub theta: ThetaConfig,
    pub extend: ExtendConfig,
    pub coarse: CoarseSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub rho: f64,
    pub delta: f64,
    /// Base scale `L`.
    pub base: i64,
    /// Box-capacity constant inside `M`.
    pub c_box: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GreenConfig {
    /// Tabulate every displacement with sup norm up to this radius.
    pub radius: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityConfig {
    pub scales: Vec<i64>,
    /// Cube side whose equilibrium measure is exported.
    pub measure_side: usize,
    /// Random walks per site for the Monte Carlo comparison; `0` skips it.
    pub mc_walks: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThetaConfig {
    pub sides: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtendConfig {
    /// Imaginary parts; every level in `h` is paired with every entry.
    pub t: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoarseSection {
    /// Level of the sampled configurations.
    pub h: f64,
    pub configs: usize,
    pub max_draws: u64,
    pub eps0: f64,
    pub regime: Regime,
    pub scales: Vec<i64>,
    /// `[k_lo, k_hi]` of the K-kind box in units of the scale.
    pub enlargement: [i64; 2],
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            d: 3,
            side: 21,
            margin: 1,
            seed: 1,
            samples: 1000,
            workers: 0,
            h: vec![-1.0],
            n_max: 10,
            observables: vec!["one".into(), "size".into()],
            output: PathBuf::from("runs"),
            green_tol: 1e-10,
            h_star: None,
            h_star_samples: 0,
            schedule: ScheduleConfig::default(),
            green: GreenConfig::default(),
            capacity: CapacityConfig::default(),
            sample: SampleConfig::default(),
            theta: ThetaConfig::default(),
            extend: ExtendConfig::default(),
            coarse: CoarseSection::default(),
        }
    }
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig { rho: 3.0, delta: 0.5, base: 1, c_box: BOX_CAPACITY_C }
    }
}

impl Default for GreenConfig {
    fn default() -> Self {
        GreenConfig { radius: 4 }
    }
}

impl Default for CapacityConfig {
    fn default() -> Self {
        CapacityConfig { scales: (2..=16).collect(), measure_side: 3, mc_walks: 0 }
    }
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { count: 1 }
    }
}

impl Default for ThetaConfig {
    fn default() -> Self {
        ThetaConfig { sides: vec![11, 15, 21] }
    }
}

impl Default for ExtendConfig {
    fn default() -> Self {
        ExtendConfig { t: vec![0.2, 0.5] }
    }
}

impl Default for CoarseSection {
    fn default() -> Self {
        let e = Enlargement::compact();
        CoarseSection {
            h: 0.3,
            configs: 20,
            max_draws: 20_000,
            eps0: 0.2,
            regime: Regime::Supercritical,
            scales: vec![1, 2, 4],
            enlargement: [e.k_lo, e.k_hi],
        }
    }
}

/// Sets `path` (dotted) in `table`; the value is parsed as TOML and falls
/// back to a bare string.
fn set_key(table: &mut toml::Table, path: &str, raw: &str) -> Result<(), CliError> {
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut keys = path.split('.').peekable();
    let mut cur = table;
    while let Some(k) = keys.next() {
        if k.is_empty() {
            return Err(CliError::config(format!("empty key segment in --{path}")));
        }
        if keys.peek().is_none() {
            cur.insert(k.to_string(), value);
            return Ok(());
        }
        let entry = cur.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("--{path}: `{k}` is not a section")))?;
    }
    unreachable!("split yields at least one segment")
}

/// Reads the TOML file (or the empty document), applies the overrides and
/// validates the result.
pub fn load(text: Option<&str>, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut table: toml::Table = match text {
        Some(t) => toml::from_str(t).map_err(|e| CliError::config(format!("config file: {e}")))?,
        None => toml::Table::new(),
    };
    for o in overrides {
        let body = o
            .strip_prefix("--")
            .ok_or_else(|| CliError::config(format!("override {o:?} must look like --key=value")))?;
        let (k, v) = body
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override {o:?} must look like --key=value")))?;
        set_key(&mut table, k, v)?;
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(e.to_string().trim().to_string()))?;
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(CliError::config(problems.join("; ")));
    }
    Ok(cfg)
}

pub fn load_path(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("reading {}: {e}", p.display())))?;
            load(Some(&text), overrides)
        }
        None => load(None, overrides),
    }
}

impl RunConfig {
    /// Field-level validation messages; empty when the config is usable.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                p.push(msg);
            }
        };
        need(self.d >= 3, format!("d: potential-theoretic runs need d ≥ 3, got {}", self.d));
        need(self.side % 2 == 1, format!("side: must be odd so the origin is the centre, got {}", self.side));
        need(2 * self.margin + 3 <= self.side, format!("margin: {} leaves no interior in side {}", self.margin, self.side));
        need(!self.h.is_empty() && self.h.iter().all(|h| h.is_finite()), "h: need at least one finite level".into());
        need(self.n_max >= 1, "n_max: must be at least 1".into());
        need(self.green_tol > 0.0 && self.green_tol < 1e-3, format!("green_tol: must lie in (0, 1e-3), got {}", self.green_tol));
        need(self.h_star.is_none_or(f64::is_finite), "h_star: must be finite".into());
        for o in &self.observables {
            need(gffperc::analytic::ObservableSpec::by_name(o, self.d).is_some(), format!("observables: unknown observable {o:?}"));
        }
        need(self.schedule().is_ok(), format!("schedule: {}", self.schedule().err().unwrap_or_default()));
        need(self.capacity.scales.len() >= 2 && self.capacity.scales.iter().all(|&l| l >= 1), "capacity.scales: need two scales ≥ 1".into());
        need(self.capacity.measure_side >= 1, "capacity.measure_side: must be at least 1".into());
        need(self.theta.sides.iter().all(|&s| s % 2 == 1 && s >= 2 * self.margin + 3), "theta.sides: odd sides with room for the margin".into());
        need(self.extend.t.iter().all(|t| t.is_finite()), "extend.t: must be finite".into());
        need(self.coarse.h.is_finite(), "coarse.h: must be finite".into());
        need(self.coarse.eps0 > 0.0, "coarse.eps0: must be positive".into());
        need(!self.coarse.scales.is_empty() && self.coarse.scales.iter().all(|&l| l >= 1), "coarse.scales: need scales ≥ 1".into());
        need(self.enlargement().validate().is_ok(), "coarse.enlargement: must strictly contain [-3, 4]".into());
        p
    }

    pub fn schedule(&self) -> Result<Schedule, String> {
        let s = &self.schedule;
        Schedule::new(self.d, s.rho, s.delta, s.base, s.c_box).map_err(|e| e.to_string())
    }

    pub fn enlargement(&self) -> Enlargement {
        Enlargement { k_lo: self.coarse.enlargement[0], k_hi: self.coarse.enlargement[1] }
    }

    pub fn ensemble(&self) -> Ensemble {
        Ensemble { d: self.d, side: self.side, margin: self.margin, samples: self.samples, seed: self.seed }
    }
}
