//! Config-driven batch runs.
//!
//! A config names one algorithm, a stream recipe (or stream file), the
//! privacy parameters, a list of seeds and optionally a grid of horizons.
//! Every `(T, seed)` cell runs independently; results are merged in
//! `(T, seed)` order so output files do not depend on scheduling.
//!
//! Output directory layout:
//!
//! ```text
//! results.csv          one row per (T, seed)
//! params.json          effective eta / gamma / K per cell
//! traces/T<T>_seed<s>.jsonl
//! slope.json           sweeps with at least four horizons
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Read};
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::bandit::{run_bandit, BanditConfig, BanditVariant};
use crate::continuous::{generate_dr_stream, run_dr, BoxDomain, DrConfig, DrFamilyKind, OptimizerKind, DEFAULT_DELTA_PRIME};
use crate::error::{Error, Result};
use crate::full_info::run_full_info;
use crate::hedge::{calibrate_eta_bandit, calibrate_eta_full_info};
use crate::oracles::{offline_opt, one_minus_inv_e, regret_report_with_opt, subsets_up_to, OracleKind, BRUTE_FORCE_LIMIT};
use crate::submodular::{generate_stream, FunctionStream, StreamSpec};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "full_info")]
    FullInfo,
    #[serde(rename = "bandit:interval")]
    BanditInterval,
    #[serde(rename = "bandit:presampled")]
    BanditPresampled,
    #[serde(rename = "bandit:naive")]
    BanditNaive,
    #[serde(rename = "continuous")]
    Continuous,
}

impl Algorithm {
    pub fn bandit_variant(&self) -> Option<BanditVariant> {
        match self {
            Algorithm::BanditInterval => Some(BanditVariant::Interval),
            Algorithm::BanditPresampled => Some(BanditVariant::Presampled),
            Algorithm::BanditNaive => Some(BanditVariant::Naive),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StreamSource {
    /// Generated per run; the run seed is added to the spec's seed.
    Spec(StreamSpec),
    /// Fixed stream file, resolved relative to the config file.
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    /// Exact when the exhaustive search fits its budget, else greedy.
    #[default]
    Auto,
    Exact,
    Greedy,
}

/// Settings for the continuous algorithm on the unit box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousSection {
    pub family: DrFamilyKind,
    pub n: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Number of inner optimizers; calibrated from `T` when absent.
    #[serde(default, rename = "K")]
    pub k: Option<usize>,
    pub optimizer: OptimizerKind,
    #[serde(default = "default_delta_prime")]
    pub delta_prime: f64,
}

fn default_delta_prime() -> f64 {
    DEFAULT_DELTA_PRIME
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub stream: Option<StreamSource>,
    #[serde(default)]
    pub continuous: Option<ContinuousSection>,
    #[serde(default)]
    pub k: Option<usize>,
    pub eps: f64,
    #[serde(default)]
    pub delta: Option<f64>,
    pub seeds: Vec<u64>,
    /// Sweep grid; defaults to the stream's own horizon.
    #[serde(default)]
    pub horizons: Option<Vec<usize>>,
    #[serde(default)]
    /// Relative paths resolve against the config file.
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub oracle: OracleChoice,
    /// Bandit exploration override.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Learning-rate override (drops the privacy calibration).
    #[serde(default)]
    pub eta: Option<f64>,
}

impl ExperimentConfig {
    /// Parse JSON; errors carry the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        parse_json(text)
    }

    /// Read a config file; a relative stream file path is resolved against
    /// the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&read_text(path)?)?;
        if let Some(StreamSource::File(p)) = &mut cfg.stream {
            *p = relative_to(path, p);
        }
        if let Some(dir) = &mut cfg.output_dir {
            *dir = relative_to(path, dir);
        }
        Ok(cfg)
    }

    /// Horizons this config runs at.
    pub fn horizon_grid(&self) -> Result<Vec<usize>> {
        if let Some(h) = &self.horizons {
            return Ok(h.clone());
        }
        match (&self.stream, &self.continuous) {
            (Some(StreamSource::Spec(s)), _) => Ok(vec![s.horizon]),
            (_, Some(c)) => Ok(vec![c.horizon]),
            (Some(StreamSource::File(p)), _) => Ok(vec![load_stream(p)?.horizon()]),
            (None, None) => Err(Error::config("stream", "missing")),
        }
    }

    /// Structural checks (config errors with field paths), then a dry run
    /// of every calibration the runs will perform (precondition errors).
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed required"));
        }
        if let Some(h) = &self.horizons {
            if h.is_empty() {
                return Err(Error::config("horizons", "empty grid"));
            }
            if let Some(i) = h.iter().position(|&t| t == 0) {
                return Err(Error::config(format!("horizons[{i}]"), "horizon must be >= 1"));
            }
        }
        if self.gamma.is_some() && self.algorithm.bandit_variant().is_none() {
            return Err(Error::config("gamma", "only valid for bandit algorithms"));
        }
        if self.algorithm == Algorithm::Continuous {
            return self.validate_continuous();
        }
        if self.continuous.is_some() {
            return Err(Error::config("continuous", "only valid with algorithm `continuous`"));
        }
        let k = self.k.ok_or_else(|| Error::config("k", "missing"))?;
        if k == 0 {
            return Err(Error::config("k", "must be >= 1"));
        }
        let delta = self.delta.ok_or_else(|| Error::config("delta", "missing"))?;
        let n = match &self.stream {
            None => return Err(Error::config("stream", "missing")),
            Some(StreamSource::Spec(spec)) => {
                spec.validate().map_err(|e| Error::config("stream.spec", e.to_string()))?;
                spec.n
            }
            Some(StreamSource::File(p)) => {
                if self.horizons.is_some() {
                    return Err(Error::config("horizons", "a stream file has a fixed horizon"));
                }
                load_stream(p)?.ground().len()
            }
        };
        for t in self.horizon_grid()? {
            self.resolve_rates(n, t, delta)?;
        }
        Ok(())
    }

    fn validate_continuous(&self) -> Result<()> {
        if self.stream.is_some() {
            return Err(Error::config("stream", "the continuous algorithm takes a `continuous` section"));
        }
        if self.eta.is_some() {
            return Err(Error::config("eta", "not used by the continuous algorithm"));
        }
        let c = self
            .continuous
            .as_ref()
            .ok_or_else(|| Error::config("continuous", "missing"))?;
        if c.n == 0 {
            return Err(Error::config("continuous.n", "must be >= 1"));
        }
        if c.k == Some(0) {
            return Err(Error::config("continuous.K", "must be >= 1"));
        }
        for t in self.horizon_grid()? {
            self.dr_config(c, 0).resolve_k(t)?;
        }
        if !(self.eps > 0.0) {
            return Err(Error::param(format!("eps must be positive, got {}", self.eps)));
        }
        Ok(())
    }

    /// `(eta, gamma)` for a discrete run at horizon `t`. Presampled runs
    /// report the rate their realized explore count produces instead.
    fn resolve_rates(&self, n: usize, t: usize, delta: f64) -> Result<(f64, Option<f64>)> {
        let k = self.k.unwrap_or(1);
        let variant = self.algorithm.bandit_variant();
        let gamma = match variant {
            Some(v) => {
                let mut cfg = BanditConfig::new(v, k, self.eps, delta, 0);
                cfg.gamma = self.gamma;
                Some(cfg.resolve_gamma(n, t)?)
            }
            None => None,
        };
        let calibrated = match variant {
            None | Some(BanditVariant::Naive) => calibrate_eta_full_info(self.eps, delta, k, t)?,
            Some(_) => calibrate_eta_bandit(self.eps, delta, k, t, gamma.unwrap_or(1.0))?,
        };
        Ok((self.eta.unwrap_or(calibrated), gamma))
    }

    fn dr_config(&self, c: &ContinuousSection, seed: u64) -> DrConfig {
        DrConfig {
            eps: self.eps,
            k: c.k,
            optimizer: c.optimizer,
            delta_prime: c.delta_prime,
            seed,
        }
    }
}

pub(crate) fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    Ok(text)
}

pub(crate) fn relative_to(config: &Path, p: &Path) -> PathBuf {
    match config.parent() {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

pub(crate) fn load_stream(path: &Path) -> Result<FunctionStream> {
    let file = File::open(path).map_err(|e| Error::config(format!("stream.file ({})", path.display()), e.to_string()))?;
    FunctionStream::read_json(std::io::BufReader::new(file))
        .map_err(|e| Error::config(format!("stream.file ({})", path.display()), e.to_string()))
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seed: u64,
    pub eps: f64,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub payoff: f64,
    pub opt_value: f64,
    pub regret_1e: f64,
    pub oracle_kind: String,
    pub explore_count: usize,
}

/// Effective parameters of one cell, echoed to `params.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub seed: u64,
    pub stream_seed: Option<u64>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    #[serde(rename = "K")]
    pub k_inner: Option<usize>,
    pub eps_prime: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsReport {
    pub algorithm: Algorithm,
    pub k: Option<usize>,
    pub eps: f64,
    pub delta: Option<f64>,
    pub cells: Vec<CellParams>,
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
    /// Added to every configured seed.
    pub seed_base: u64,
    /// Output directory; overrides the config's `output_dir`.
    pub out: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: None,
            seed_base: 0,
            out: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<RunRow>,
    pub params: ParamsReport,
    /// Present for grids of at least four horizons with positive mean
    /// regret.
    pub slope: Option<SlopeFit>,
}

/// Run every `(T, seed)` cell of a validated config and write the output
/// files when an output directory is set.
pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<ExperimentResult> {
    config.validate()?;
    let horizons = config.horizon_grid()?;
    let seeds: Vec<u64> = config.seeds.iter().map(|s| s.wrapping_add(options.seed_base)).collect();
    let out = options.out.clone().or_else(|| config.output_dir.clone());
    if let Some(dir) = &out {
        fs::create_dir_all(dir.join("traces"))?;
    }
    let fixed_stream = match &config.stream {
        Some(StreamSource::File(p)) => Some(load_stream(p)?),
        _ => None,
    };
    let cells: Vec<(usize, u64)> = horizons
        .iter()
        .flat_map(|&t| seeds.iter().map(move |&s| (t, s)))
        .collect();
    let run_all = || {
        cells
            .par_iter()
            .map(|&(t, s)| run_cell(config, fixed_stream.as_ref(), t, s, out.as_deref()))
            .collect::<Result<Vec<_>>>()
    };
    let mut results = match options.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::param(format!("worker pool: {e}")))?
            .install(run_all)?,
        None => run_all()?,
    };
    results.sort_by_key(|(row, _)| (row.horizon, row.seed));
    let (rows, cells): (Vec<RunRow>, Vec<CellParams>) = results.into_iter().unzip();
    let params = ParamsReport {
        algorithm: config.algorithm,
        k: config.k,
        eps: config.eps,
        delta: config.delta,
        cells,
    };
    let slope = if horizons.len() >= 4 {
        match loglog_slope(&mean_regret_by_horizon(&rows)) {
            Ok(fit) => Some(fit),
            Err(e) => {
                warn!("no slope fit: {e}");
                None
            }
        }
    } else {
        None
    };
    if let Some(dir) = &out {
        write_csv(&rows, File::create(dir.join("results.csv"))?)?;
        serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("params.json"))?), &params)?;
        if let Some(fit) = &slope {
            serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("slope.json"))?), fit)?;
        }
    }
    Ok(ExperimentResult { rows, params, slope })
}

fn oracle_kind(choice: OracleChoice, n: usize, k: usize, t: usize) -> OracleKind {
    match choice {
        OracleChoice::Exact => OracleKind::Exact,
        OracleChoice::Greedy => OracleKind::Greedy,
        OracleChoice::Auto => {
            if subsets_up_to(n, k) * t as f64 <= BRUTE_FORCE_LIMIT {
                OracleKind::Exact
            } else {
                OracleKind::Greedy
            }
        }
    }
}

fn run_cell(
    config: &ExperimentConfig,
    fixed: Option<&FunctionStream>,
    t: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<(RunRow, CellParams)> {
    let trace_path = out.map(|d| d.join("traces").join(format!("T{t}_seed{seed}.jsonl")));
    if let Some(c) = &config.continuous {
        return run_continuous_cell(config, c, t, seed, trace_path);
    }
    let (stream, stream_seed) = match (fixed, &config.stream) {
        (Some(s), _) => (s.clone(), None),
        (None, Some(StreamSource::Spec(spec))) => {
            let stream_seed = spec.seed.wrapping_add(seed);
            (generate_stream(&spec.with_horizon(t).with_seed(stream_seed))?, Some(stream_seed))
        }
        _ => return Err(Error::config("stream", "missing")),
    };
    let k = config.k.unwrap_or(1);
    let delta = config.delta.unwrap_or(f64::NAN);
    let trace = match config.algorithm.bandit_variant() {
        None => match config.eta {
            Some(eta) => crate::full_info::run_full_info_with(
                &stream,
                k,
                crate::full_info::LearningRate::NonPrivate { eta },
                seed,
                false,
            )?,
            None => run_full_info(&stream, k, config.eps, delta, seed)?,
        },
        Some(variant) => {
            let cfg = BanditConfig {
                variant,
                eps: config.eps,
                delta,
                k,
                gamma: config.gamma,
                eta: config.eta,
                seed,
            };
            run_bandit(&stream, &cfg)?
        }
    };
    if let Some(p) = trace_path {
        trace.write_jsonl(stream.ground(), BufWriter::new(File::create(p)?))?;
    }
    let kind = oracle_kind(config.oracle, stream.ground().len(), k, stream.horizon());
    let opt = offline_opt(&stream, k, kind)?;
    let report = regret_report_with_opt(&trace, &stream, &opt, kind)?;
    let row = RunRow {
        horizon: stream.horizon(),
        seed,
        eps: config.eps,
        delta: config.delta,
        gamma: trace.params.gamma,
        eta: Some(trace.params.eta),
        payoff: report.payoff,
        opt_value: report.opt_value,
        regret_1e: report.regret_1e,
        oracle_kind: kind.as_str().to_string(),
        explore_count: trace.explore_count(),
    };
    let cell = CellParams {
        horizon: stream.horizon(),
        seed,
        stream_seed,
        eta: Some(trace.params.eta),
        gamma: trace.params.gamma,
        k_inner: None,
        eps_prime: None,
        sigma: None,
    };
    Ok((row, cell))
}

fn run_continuous_cell(
    config: &ExperimentConfig,
    c: &ContinuousSection,
    t: usize,
    seed: u64,
    trace_path: Option<PathBuf>,
) -> Result<(RunRow, CellParams)> {
    let stream_seed = c.seed.wrapping_add(seed);
    let stream = generate_dr_stream(c.family, c.n, t, stream_seed)?;
    let domain = BoxDomain::unit(c.n)?;
    let trace = run_dr(&stream, &domain, &config.dr_config(c, seed))?;
    if let Some(p) = trace_path {
        trace.write_jsonl(BufWriter::new(File::create(p)?))?;
    }
    // Monotone on the box, so the top corner is the offline optimum.
    let opt_value: f64 = stream.iter().map(|f| f.value(domain.hi())).sum();
    let payoff = trace.total_value();
    let row = RunRow {
        horizon: t,
        seed,
        eps: config.eps,
        delta: (c.optimizer == OptimizerKind::NoisyFollowTheLeader).then_some(c.delta_prime),
        gamma: None,
        eta: None,
        payoff,
        opt_value,
        regret_1e: one_minus_inv_e() * opt_value - payoff,
        oracle_kind: "box_top".to_string(),
        explore_count: 0,
    };
    let cell = CellParams {
        horizon: t,
        seed,
        stream_seed: Some(stream_seed),
        eta: None,
        gamma: None,
        k_inner: Some(trace.k),
        eps_prime: Some(trace.eps_prime),
        sigma: Some(trace.sigma),
    };
    Ok((row, cell))
}

pub fn write_csv<W: std::io::Write>(rows: &[RunRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r).map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<RunRow>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(csv_error))
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    Error::config("csv", e.to_string())
}

/// `(T, mean regret_1e over seeds)`, ascending in `T`.
pub fn mean_regret_by_horizon(rows: &[RunRow]) -> Vec<(f64, f64)> {
    let mut by_t: std::collections::BTreeMap<usize, (f64, usize)> = Default::default();
    for r in rows {
        let e = by_t.entry(r.horizon).or_insert((0.0, 0));
        e.0 += r.regret_1e;
        e.1 += 1;
    }
    by_t.into_iter().map(|(t, (s, c))| (t as f64, s / c as f64)).collect()
}

/// Least-squares fit of `ln R = a + b ln T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence interval for the slope.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Points used in the fit.
    pub points: usize,
    /// Points dropped for nonpositive regret.
    pub excluded: usize,
}

/// Fit the log-log slope of `(T, R)` points. Nonpositive points are
/// dropped with a warning; at least four must remain.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 4 {
        return Err(Error::param(format!("loglog_slope needs >= 4 points, got {}", points.len())));
    }
    let valid: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, r)| {
            let ok = *t > 0.0 && *r > 0.0;
            if !ok {
                warn!("excluding nonpositive point (T={t}, R={r}) from slope fit");
            }
            ok
        })
        .map(|(t, r)| (t.ln(), r.ln()))
        .collect();
    let excluded = points.len() - valid.len();
    if valid.len() < 4 {
        return Err(Error::param(format!(
            "loglog_slope: only {} positive points remain after excluding {excluded}",
            valid.len()
        )));
    }
    let m = valid.len() as f64;
    let mx = valid.iter().map(|p| p.0).sum::<f64>() / m;
    let my = valid.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = valid.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("loglog_slope: all points share one horizon"));
    }
    let sxy: f64 = valid.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = valid.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let se = (ssr / (m - 2.0) / sxx).sqrt();
    let tq = StudentsT::new(0.0, 1.0, m - 2.0)
        .map_err(|e| Error::param(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(SlopeFit {
        slope,
        intercept,
        ci_low: slope - tq * se,
        ci_high: slope + tq * se,
        points: valid.len(),
        excluded,
    })
}

/// Slope fit over a results CSV.
pub fn slope_from_csv(path: &Path) -> Result<SlopeFit> {
    let file = File::open(path).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
    loglog_slope(&mean_regret_by_horizon(&read_csv(file)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
            "schema_version": 1,
            "algorithm": "full_info",
            "stream": {"spec": {"family": "coverage", "n": 4, "horizon": 100,
                       "distribution": {"kind": "iid_uniform", "low": 0.0, "high": 1.0}, "seed": 7}},
            "k": 1, "eps": 1.0, "delta": 0.01, "seeds": [1, 2, 3]
        }"#
        .to_string()
    }

    #[test]
    fn power_laws() {
        let pts: Vec<(f64, f64)> = [1e3, 3e3, 1e4, 3e4, 1e5].iter().map(|&t| (t, 2.5 * f64::sqrt(t))).collect();
        let fit = loglog_slope(&pts).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-9);
        assert!((fit.ci_high - fit.ci_low).abs() < 1e-6);
        let pts: Vec<(f64, f64)> = [1e3, 1e4, 1e5, 1e6f64].iter().map(|&t| (t, 0.1 * t.powf(2.0 / 3.0))).collect();
        assert!((loglog_slope(&pts).unwrap().slope - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn slope_excludes_nonpositive() {
        let mut pts: Vec<(f64, f64)> = [1e3, 3e3, 1e4, 3e4f64].iter().map(|&t| (t, t.sqrt())).collect();
        pts.push((1e5, -1.0));
        let fit = loglog_slope(&pts).unwrap();
        assert_eq!(fit.excluded, 1);
        pts[0].1 = 0.0;
        assert!(loglog_slope(&pts).is_err());
        assert!(loglog_slope(&pts[..3]).is_err());
    }

    #[test]
    fn unknown_key_has_path() {
        let text = minimal().replace("\"k\": 1", "\"k\": 1, \"kk\": 2");
        match ExperimentConfig::from_json(&text) {
            Err(e @ Error::Config { .. }) => assert!(e.to_string().contains("kk")),
            other => panic!("{other:?}"),
        }
        let text = minimal().replace("\"n\": 4", "\"n\": 4, \"m\": 1");
        match ExperimentConfig::from_json(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "stream.spec.m"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn delta_precondition() {
        let text = minimal().replace("\"delta\": 0.01", "\"delta\": 2.0");
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        let e = cfg.validate().unwrap_err();
        assert!(!e.is_config_error());
        assert!(e.to_string().contains("calibrate_eta_full_info"));
    }

    #[test]
    fn minimal_run_in_memory() {
        let cfg = ExperimentConfig::from_json(&minimal()).unwrap();
        let r = run_experiment(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert!(r.rows.iter().all(|row| row.oracle_kind == "exact" && row.horizon == 100));
        assert_eq!(r.rows[0].eta, Some(calibrate_eta_full_info(1.0, 0.01, 1, 100).unwrap()));
        let again = run_experiment(&cfg, &RunOptions { workers: Some(1), ..Default::default() }).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn csv_round_trip() {
        let row = RunRow {
            horizon: 10,
            seed: 1,
            eps: 1.0,
            delta: Some(0.01),
            gamma: None,
            eta: Some(0.1),
            payoff: 3.5,
            opt_value: 6.0,
            regret_1e: 0.29,
            oracle_kind: "exact".into(),
            explore_count: 0,
        };
        let mut buf = Vec::new();
        write_csv(&[row.clone()], &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("T,seed,eps,delta,gamma,eta,payoff,opt_value,regret_1e,oracle_kind,explore_count\n"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), vec![row]);
    }
}
