//! Scenario files, parameter sweeps and tabular output.
//!
//! A scenario is a TOML file with `[model]`, `[bath]`, `[sweep]` and
//! `[output]` sections; see `figs/README.md` for the keys.

use qdcav::generator_builder::{build_generator, Engine, ModelConfig, PumpMode};
use qdcav::phonon_kernel::{calibrate_g1_abs, BathParams, PhononKernel};
use qdcav::photon_rate_reduction::{dressed_resonance, excess_emission, reduce};
use qdcav::steady_state::{solve_steady, Populations};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

pub mod check;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineSel {
    #[serde(alias = "full")]
    FullMe,
    #[default]
    Sme,
    Both,
}

impl EngineSel {
    pub fn engines(&self) -> Vec<Engine> {
        match self {
            EngineSel::FullMe => vec![Engine::FullMe],
            EngineSel::Sme => vec![Engine::Sme],
            EngineSel::Both => vec![Engine::FullMe, Engine::Sme],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Populations,
    MeanN,
    Excess,
    MeSmeCompare,
    RateeqSmeCompare,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Parameters a sweep may vary. `eta`, `delta` and `delta_p` set both dots.
pub const AXES: &[&str] = &[
    "eta",
    "delta",
    "delta_p",
    "temperature",
    "g1_abs",
    "alpha_p",
    "omega_b",
    "g1",
    "g2",
    "kappa",
    "gamma1",
    "gamma2",
    "gamma1p",
    "gamma2p",
    "eta1",
    "eta2",
    "delta1",
    "delta2",
    "delta1p",
    "delta2p",
    "delta_cp",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: ModelConfig,
    pub axis: String,
    pub grid: Vec<f64>,
    pub outputs: BTreeSet<Output>,
    pub engine: EngineSel,
    pub m_max: usize,
    /// Keep Δcp at −Ω′(Δ₁p, η₁) while the axis moves.
    pub track_dressed_resonance: bool,
    pub format: Format,
    /// (temperature, target ⟨B⟩) used to set g1_abs before the sweep.
    pub calibration: Option<(f64, f64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    model: ModelConfig,
    #[serde(default)]
    bath: BathSection,
    sweep: SweepSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct BathSection {
    alpha_p: f64,
    omega_b: f64,
    temperature: f64,
    g1_abs: f64,
    calibrate: bool,
    calibration_temperature: f64,
    calibration_target: f64,
}

impl Default for BathSection {
    fn default() -> Self {
        let b = BathParams::default();
        BathSection {
            alpha_p: b.alpha_p,
            omega_b: b.omega_b,
            temperature: b.temperature,
            g1_abs: b.g1_abs,
            calibrate: false,
            calibration_temperature: 5.0,
            calibration_target: 0.9,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    axis: String,
    grid: Option<Vec<f64>>,
    /// [start, stop, step], stop included when hit within step/1e6.
    range: Option<[f64; 3]>,
    #[serde(default)]
    engine: EngineSel,
    #[serde(default)]
    track_dressed_resonance: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OutputSection {
    outputs: Vec<Output>,
    format: Format,
    m_max: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { outputs: vec![Output::Populations, Output::MeanN, Output::Excess], format: Format::Csv, m_max: 4 }
    }
}

fn expand_range([start, stop, step]: [f64; 3]) -> Result<Vec<f64>, SpecError> {
    if !(step.is_finite() && step != 0.0 && (stop - start) / step >= 0.0) {
        return Err(SpecError::Invalid(format!("range [{start}, {stop}, {step}] is empty or unbounded")));
    }
    let n = ((stop - start) / step + 1e-6).floor() as usize;
    if n > 100_000 {
        return Err(SpecError::Invalid("range has more than 100000 points".into()));
    }
    // Round to 12 digits so grids like -20 + k/4 print cleanly.
    Ok((0..=n).map(|k| round_sig(start + k as f64 * step, 12)).collect())
}

fn round_sig(x: f64, digits: usize) -> f64 {
    format!("{:.*e}", digits - 1, x).parse().expect("formatted float")
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self, SpecError> {
        let f: ScenarioFile = toml::from_str(text)?;
        let grid = match (f.sweep.grid, f.sweep.range) {
            (Some(g), None) => g,
            (None, Some(r)) => expand_range(r)?,
            _ => return Err(SpecError::Invalid("give exactly one of sweep.grid or sweep.range".into())),
        };
        let mut base = f.model;
        base.bath = BathParams {
            alpha_p: f.bath.alpha_p,
            omega_b: f.bath.omega_b,
            temperature: f.bath.temperature,
            g1_abs: f.bath.g1_abs,
        };
        let spec = SweepSpec {
            base,
            axis: f.sweep.axis,
            grid,
            outputs: f.output.outputs.into_iter().collect(),
            engine: f.sweep.engine,
            m_max: f.output.m_max,
            track_dressed_resonance: f.sweep.track_dressed_resonance,
            format: f.output.format,
            calibration: f.bath.calibrate.then_some((f.bath.calibration_temperature, f.bath.calibration_target)),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|e| SpecError::Io { path: path.display().to_string(), source: e })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let inv = |m: String| Err(SpecError::Invalid(m));
        if !AXES.contains(&self.axis.as_str()) {
            return inv(format!("unknown axis '{}'; expected one of {}", self.axis, AXES.join(", ")));
        }
        if self.grid.is_empty() {
            return inv("grid is empty".into());
        }
        let up = self.grid.windows(2).all(|w| w[1] > w[0]);
        let down = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) || self.grid.iter().any(|v| !v.is_finite()) {
            return inv("grid must be finite and strictly monotone".into());
        }
        if self.m_max == 0 || self.m_max > self.base.n_max {
            return inv(format!("m_max = {} must lie in 1..=n_max", self.m_max));
        }
        if self.track_dressed_resonance && self.base.pump_mode != PumpMode::Coherent {
            return inv("track_dressed_resonance needs pump_mode = \"coherent\"".into());
        }
        if self.outputs.contains(&Output::MeSmeCompare) && self.engine != EngineSel::Both {
            return inv("me_sme_compare needs engine = \"both\"".into());
        }
        for &v in &self.grid {
            self.config_at(v).validate().map_err(|e| SpecError::Invalid(format!("at {} = {v}: {e}", self.axis)))?;
        }
        Ok(())
    }

    /// Model at one grid value (before calibration).
    pub fn config_at(&self, v: f64) -> ModelConfig {
        let mut c = self.base.clone();
        match self.axis.as_str() {
            "eta" => (c.eta1, c.eta2) = (v, v),
            "delta" => (c.delta1, c.delta2) = (v, v),
            "delta_p" => (c.delta1p, c.delta2p) = (v, v),
            "temperature" => c.bath.temperature = v,
            "g1_abs" => c.bath.g1_abs = v,
            "alpha_p" => c.bath.alpha_p = v,
            "omega_b" => c.bath.omega_b = v,
            "g1" => c.g1 = v,
            "g2" => c.g2 = v,
            "kappa" => c.kappa = v,
            "gamma1" => c.gamma1 = v,
            "gamma2" => c.gamma2 = v,
            "gamma1p" => c.gamma1p = v,
            "gamma2p" => c.gamma2p = v,
            "eta1" => c.eta1 = v,
            "eta2" => c.eta2 = v,
            "delta1" => c.delta1 = v,
            "delta2" => c.delta2 = v,
            "delta1p" => c.delta1p = v,
            "delta2p" => c.delta2p = v,
            "delta_cp" => c.delta_cp = v,
            other => unreachable!("axis {other} passed validation"),
        }
        if self.track_dressed_resonance {
            c.delta_cp = -dressed_resonance(c.delta1p, c.eta1);
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub axis: f64,
    pub engine: Engine,
    pub populations: Option<Populations>,
    pub mean_n: Option<f64>,
    /// k = 1..=m_max photon excess emission.
    pub excess: Option<Vec<f64>>,
    pub mean_n_rate_eq: Option<f64>,
    pub residual: Option<f64>,
    pub n_max: usize,
    pub b: f64,
    pub g1_abs: f64,
    pub flags: u32,
    pub error: Option<String>,
}

impl ResultRow {
    fn failed(axis: f64, engine: Engine, cfg: &ModelConfig, b: f64, err: String) -> Self {
        ResultRow {
            axis,
            engine,
            populations: None,
            mean_n: None,
            excess: None,
            mean_n_rate_eq: None,
            residual: None,
            n_max: cfg.n_max,
            b,
            g1_abs: cfg.bath.g1_abs,
            flags: 0,
            error: Some(err),
        }
    }

    /// `g1abs=…;bits=0x…`, plus `;err=…` for failed points.
    pub fn flag_field(&self) -> String {
        let mut s = format!("g1abs={};bits=0x{:x}", fmt12(self.g1_abs), self.flags);
        if let Some(e) = &self.error {
            s.push_str(";err=");
            s.push_str(&e.replace(['\n', '\r'], " "));
        }
        s
    }
}

fn bath_key(b: &BathParams) -> [u64; 4] {
    [b.alpha_p.to_bits(), b.omega_b.to_bits(), b.temperature.to_bits(), b.g1_abs.to_bits()]
}

type KernelMap = HashMap<[u64; 4], Result<Arc<PhononKernel>, String>>;

/// Applies the spec's calibration, if any, to the base bath.
pub fn calibrated_spec(spec: &SweepSpec) -> Result<SweepSpec, String> {
    let mut s = spec.clone();
    if let Some((t, target)) = spec.calibration {
        s.base.bath.g1_abs = calibrate_g1_abs(&spec.base.bath, t, target).map_err(|e| e.to_string())?;
    }
    Ok(s)
}

fn kernels_for(configs: &[ModelConfig]) -> KernelMap {
    let mut uniq: Vec<BathParams> = Vec::new();
    for c in configs {
        if !uniq.iter().any(|b| bath_key(b) == bath_key(&c.bath)) {
            uniq.push(c.bath);
        }
    }
    let built: Vec<_> =
        uniq.par_iter().map(|b| (bath_key(b), PhononKernel::new(*b).map(Arc::new).map_err(|e| e.to_string()))).collect();
    built.into_iter().collect()
}

fn eval_point(spec: &SweepSpec, v: f64, cfg: &ModelConfig, kernel: &Result<Arc<PhononKernel>, String>) -> Vec<ResultRow> {
    let engines = spec.engine.engines();
    let kernel = match kernel {
        Ok(k) => k,
        Err(e) => return engines.iter().map(|&en| ResultRow::failed(v, en, cfg, f64::NAN, format!("kernel: {e}"))).collect(),
    };
    let b = if cfg.phonons_enabled { kernel.franck_condon() } else { 1.0 };
    let want_excess = spec.outputs.contains(&Output::Excess) || spec.outputs.contains(&Output::RateeqSmeCompare);
    engines
        .iter()
        .map(|&engine| {
            let run = || -> Result<ResultRow, String> {
                let gen = build_generator(cfg, kernel, engine).map_err(|e| e.to_string())?;
                let ss = solve_steady(&gen).map_err(|e| e.to_string())?;
                let (excess, rate_eq) = if want_excess && engine == Engine::Sme {
                    let model = reduce(&gen, cfg.kappa, spec.m_max).map_err(|e| e.to_string())?;
                    let rep = excess_emission(&model, ss.mean_n);
                    (Some(rep.excess), Some(rep.mean_n_rate_eq))
                } else {
                    (None, None)
                };
                Ok(ResultRow {
                    axis: v,
                    engine,
                    populations: Some(ss.populations),
                    mean_n: Some(ss.mean_n),
                    excess,
                    mean_n_rate_eq: rate_eq,
                    residual: Some(ss.residual),
                    n_max: cfg.n_max,
                    b,
                    g1_abs: cfg.bath.g1_abs,
                    flags: gen.flags(),
                    error: None,
                })
            };
            run().unwrap_or_else(|e| ResultRow::failed(v, engine, cfg, b, e))
        })
        .collect()
}

/// One row per grid point and engine, ordered by (axis value, engine).
/// Failing points carry their error and do not stop the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Vec<ResultRow> {
    let spec = match calibrated_spec(spec) {
        Ok(s) => s,
        Err(e) => {
            let mut rows = Vec::new();
            for &v in &spec.grid {
                for en in spec.engine.engines() {
                    rows.push(ResultRow::failed(v, en, &spec.config_at(v), f64::NAN, format!("calibration: {e}")));
                }
            }
            return sort_rows(rows);
        }
    };
    let configs: Vec<ModelConfig> = spec.grid.iter().map(|&v| spec.config_at(v)).collect();
    let kernels = kernels_for(&configs);
    let rows: Vec<ResultRow> = spec
        .grid
        .par_iter()
        .zip(configs.par_iter())
        .flat_map_iter(|(&v, cfg)| eval_point(&spec, v, cfg, &kernels[&bath_key(&cfg.bath)]))
        .collect();
    sort_rows(rows)
}

fn sort_rows(mut rows: Vec<ResultRow>) -> Vec<ResultRow> {
    rows.sort_by(|a, b| a.axis.total_cmp(&b.axis).then(a.engine.cmp(&b.engine)));
    rows
}

/// Runs `f` on a pool with `workers` threads (all cores when None).
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w.max(1));
    }
    b.build().expect("thread pool").install(f)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub axis: f64,
    /// |full − sme| for ee, +, −, gg.
    pub population_diff: [f64; 4],
    pub mean_n_diff: f64,
    pub mean_n_rel: f64,
    /// |rate-eq − SME| / SME when available.
    pub rate_eq_rel: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub max_population_diff: f64,
    pub max_mean_n_rel: f64,
    pub max_rate_eq_rel: Option<f64>,
    pub failures: Vec<String>,
}

impl CompareReport {
    pub fn summary(&self) -> String {
        let r = self.max_rate_eq_rel.map(fmt12).unwrap_or_else(|| "n/a".into());
        format!(
            "max_population_diff={} max_mean_n_rel={} max_rate_eq_rel={} failures={}",
            fmt12(self.max_population_diff),
            fmt12(self.max_mean_n_rel),
            r,
            self.failures.len()
        )
    }

    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["axis", "d_p_ee", "d_p_plus", "d_p_minus", "d_p_gg", "d_mean_n", "rel_mean_n", "rel_rate_eq"])?;
        for r in &self.rows {
            let mut rec = vec![fmt12(r.axis)];
            rec.extend(r.population_diff.iter().map(|&x| fmt12(x)));
            rec.push(fmt12(r.mean_n_diff));
            rec.push(fmt12(r.mean_n_rel));
            rec.push(r.rate_eq_rel.map(fmt12).unwrap_or_default());
            out.write_record(&rec)?;
        }
        out.flush()
    }
}

/// Pairs the full-ME and SME rows of a `both` sweep.
pub fn compare_rows(rows: &[ResultRow]) -> CompareReport {
    let mut by_axis: Vec<(f64, Option<&ResultRow>, Option<&ResultRow>)> = Vec::new();
    for r in rows {
        let slot = match by_axis.iter_mut().find(|e| e.0.to_bits() == r.axis.to_bits()) {
            Some(s) => s,
            None => {
                by_axis.push((r.axis, None, None));
                by_axis.last_mut().expect("just pushed")
            }
        };
        match r.engine {
            Engine::FullMe => slot.1 = Some(r),
            Engine::Sme => slot.2 = Some(r),
        }
    }
    let mut report = CompareReport {
        rows: Vec::new(),
        max_population_diff: 0.0,
        max_mean_n_rel: 0.0,
        max_rate_eq_rel: None,
        failures: Vec::new(),
    };
    for (axis, full, sme) in by_axis {
        let (Some(full), Some(sme)) = (full, sme) else {
            report.failures.push(format!("axis {}: missing engine", fmt12(axis)));
            continue;
        };
        let (Some(pf), Some(ps), Some(nf), Some(ns)) = (full.populations, sme.populations, full.mean_n, sme.mean_n) else {
            let e = full.error.clone().or(sme.error.clone()).unwrap_or_default();
            report.failures.push(format!("axis {}: {e}", fmt12(axis)));
            continue;
        };
        let pa = pf.as_array();
        let sa = ps.as_array();
        let population_diff = std::array::from_fn(|k| (pa[k] - sa[k]).abs());
        let mean_n_diff = (nf - ns).abs();
        let mean_n_rel = if ns.abs() > 0.0 { mean_n_diff / ns.abs() } else { mean_n_diff };
        let rate_eq_rel = sme.mean_n_rate_eq.map(|r| (r - ns).abs() / ns.abs().max(f64::MIN_POSITIVE));
        report.max_population_diff = population_diff.iter().fold(report.max_population_diff, |m: f64, &d| m.max(d));
        report.max_mean_n_rel = report.max_mean_n_rel.max(mean_n_rel);
        if let Some(r) = rate_eq_rel {
            report.max_rate_eq_rel = Some(report.max_rate_eq_rel.unwrap_or(0.0).max(r));
        }
        report.rows.push(CompareRow { axis, population_diff, mean_n_diff, mean_n_rel, rate_eq_rel });
    }
    report
}

/// Runs the sweep with both engines and compares them point by point.
pub fn compare_engines(spec: &SweepSpec) -> CompareReport {
    let mut s = spec.clone();
    s.engine = EngineSel::Both;
    compare_rows(&run_sweep(&s))
}

/// Twelve significant digits, fixed exponent form.
pub fn fmt12(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.11e}")
    }
}

pub const COLUMNS: [&str; 15] = [
    "axis", "engine", "p_ee", "p_plus", "p_minus", "p_gg", "mean_n", "spee", "tpee", "thpee", "fpee", "residual", "n_max", "B",
    "flags",
];

fn cells(r: &ResultRow) -> [Option<String>; 15] {
    let p = r.populations.map(|p| p.as_array());
    let ex = |k: usize| r.excess.as_ref().and_then(|e| e.get(k)).map(|&x| fmt12(x));
    [
        Some(fmt12(r.axis)),
        Some(r.engine.as_str().to_string()),
        p.map(|p| fmt12(p[0])),
        p.map(|p| fmt12(p[1])),
        p.map(|p| fmt12(p[2])),
        p.map(|p| fmt12(p[3])),
        r.mean_n.map(fmt12),
        ex(0),
        ex(1),
        ex(2),
        ex(3),
        r.residual.map(fmt12),
        Some(r.n_max.to_string()),
        (!r.b.is_nan()).then(|| fmt12(r.b)),
        Some(r.flag_field()),
    ]
}

/// Writes rows as CSV or JSON. An empty `outputs` set gives a header-only
/// table (an empty array for JSON).
pub fn emit<W: Write>(rows: &[ResultRow], outputs: &BTreeSet<Output>, format: Format, mut w: W) -> std::io::Result<()> {
    let rows: &[ResultRow] = if outputs.is_empty() { &[] } else { rows };
    match format {
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(COLUMNS)?;
            for r in rows {
                out.write_record(cells(r).iter().map(|c| c.clone().unwrap_or_default()))?;
            }
            out.flush()
        }
        Format::Json => {
            let arr: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    let mut m = serde_json::Map::new();
                    for (k, (name, c)) in COLUMNS.iter().zip(cells(r)).enumerate() {
                        let v = match c {
                            None => serde_json::Value::Null,
                            Some(s) if k == 1 || k == 14 => serde_json::Value::String(s),
                            Some(s) if k == 12 => serde_json::Value::from(s.parse::<u64>().expect("integer")),
                            Some(s) => serde_json::Value::from(s.parse::<f64>().expect("formatted float")),
                        };
                        m.insert(name.to_string(), v);
                    }
                    serde_json::Value::Object(m)
                })
                .collect();
            serde_json::to_writer_pretty(&mut w, &arr)?;
            writeln!(w)
        }
    }
}

/// Parses CSV written by [`emit`] back into (column, value) records.
pub fn read_csv(text: &str) -> Result<Vec<HashMap<String, String>>, csv::Error> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let headers = rd.headers()?.clone();
    rd.records()
        .map(|rec| rec.map(|r| headers.iter().zip(r.iter()).map(|(h, v)| (h.to_string(), v.to_string())).collect()))
        .collect()
}
