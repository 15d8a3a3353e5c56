//! Evaluates figure scenarios point by point and keeps everything the
//! acceptance suite inspects: steady states, photon-rate models and the
//! invariant checks of each generator.

use qdcav::generator_builder::{build_generator, Engine, ModelConfig};
use qdcav::phonon_kernel::{BathParams, PhononKernel};
use qdcav::photon_rate_reduction::{excess_emission, reduce, EmissionReport, PhotonRateModel};
use qdcav::steady_state::{solve_steady, SteadyState};
use qdcav_sweep::check::{generator_checks, overflow_check, reduction_checks, schur_diagonal_check, steady_checks, Check};
use qdcav_sweep::{calibrated_spec, SweepSpec};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct Point {
    pub axis: f64,
    pub config: ModelConfig,
    pub engine: Engine,
    pub steady: SteadyState,
    pub flags: u32,
    /// Present for the simplified engine.
    pub reduced: Option<PhotonRateModel>,
    pub emission: Option<EmissionReport>,
    /// Trace, Hermiticity, steady-state and reduction conservation checks.
    pub conservation: Vec<Check>,
    pub schur: Option<Check>,
    pub overflow: Option<Check>,
}

#[derive(Clone, Debug)]
pub struct Grid {
    pub name: String,
    /// Sorted by axis value, then engine.
    pub points: Vec<Arc<Point>>,
}

impl Grid {
    pub fn engine(&self, engine: Engine) -> impl Iterator<Item = &Point> + '_ {
        self.points.iter().map(|p| p.as_ref()).filter(move |p| p.engine == engine)
    }

    /// (axis, ⟨n⟩) for one engine.
    pub fn mean_n(&self, engine: Engine) -> Vec<(f64, f64)> {
        self.engine(engine).map(|p| (p.axis, p.steady.mean_n)).collect()
    }

    pub fn at(&self, engine: Engine, axis: f64) -> Option<&Point> {
        self.engine(engine).find(|p| (p.axis - axis).abs() < 1e-9)
    }
}

fn bath_key(b: &BathParams) -> [u64; 4] {
    [b.alpha_p.to_bits(), b.omega_b.to_bits(), b.temperature.to_bits(), b.g1_abs.to_bits()]
}

/// Caches kernels per bath and points per (configuration, engine), so
/// scenarios sharing a grid are solved once.
pub struct Evaluator {
    figs: PathBuf,
    kernels: HashMap<[u64; 4], Arc<PhononKernel>>,
    points: HashMap<String, Arc<Point>>,
    grids: HashMap<String, Arc<Grid>>,
}

impl Evaluator {
    pub fn new(figs: impl AsRef<Path>) -> Self {
        Evaluator { figs: figs.as_ref().to_path_buf(), kernels: HashMap::new(), points: HashMap::new(), grids: HashMap::new() }
    }

    pub fn kernel(&mut self, bath: &BathParams) -> Result<Arc<PhononKernel>, String> {
        let key = bath_key(bath);
        if let Some(k) = self.kernels.get(&key) {
            return Ok(k.clone());
        }
        let k = Arc::new(PhononKernel::new(*bath).map_err(|e| e.to_string())?);
        self.kernels.insert(key, k.clone());
        Ok(k)
    }

    pub fn point(&mut self, axis: f64, cfg: &ModelConfig, engine: Engine, m_max: usize) -> Result<Arc<Point>, String> {
        let key = format!("{cfg:?}|{engine:?}|{m_max}");
        if let Some(p) = self.points.get(&key) {
            let mut p = p.as_ref().clone();
            p.axis = axis;
            return Ok(Arc::new(p));
        }
        let kernel = self.kernel(&cfg.bath)?;
        let tag = engine.as_str();
        let gen = build_generator(cfg, &kernel, engine).map_err(|e| format!("{tag}: {e}"))?;
        let steady = solve_steady(&gen).map_err(|e| format!("{tag}: {e}"))?;
        let mut conservation = generator_checks(tag, &gen);
        conservation.extend(steady_checks(tag, &steady));
        let (mut reduced, mut emission, mut schur, mut overflow) = (None, None, None, None);
        if engine == Engine::Sme {
            let m = reduce(&gen, cfg.kappa, m_max).map_err(|e| format!("{tag}: {e}"))?;
            conservation.extend(reduction_checks(tag, &m));
            schur = Some(schur_diagonal_check(tag, &m, &steady));
            overflow = Some(overflow_check(tag, &m));
            emission = Some(excess_emission(&m, steady.mean_n));
            reduced = Some(m);
        }
        let p = Arc::new(Point {
            axis,
            config: cfg.clone(),
            engine,
            steady,
            flags: gen.flags(),
            reduced,
            emission,
            conservation,
            schur,
            overflow,
        });
        self.points.insert(key, p.clone());
        Ok(p)
    }

    /// Every point of `spec` with every engine it selects.
    pub fn sweep(&mut self, name: &str, spec: &SweepSpec) -> Result<Grid, String> {
        let spec = calibrated_spec(spec)?;
        let mut points = Vec::with_capacity(spec.grid.len() * 2);
        for &v in &spec.grid {
            let cfg = spec.config_at(v);
            for engine in spec.engine.engines() {
                let p = self.point(v, &cfg, engine, spec.m_max).map_err(|e| format!("{name} at {v}: {e}"))?;
                points.push(p);
            }
        }
        Ok(Grid { name: name.to_string(), points })
    }

    /// Loads `<figs>/<name>.toml` and evaluates it.
    pub fn scenario(&mut self, name: &str) -> Result<Arc<Grid>, String> {
        if let Some(g) = self.grids.get(name) {
            return Ok(g.clone());
        }
        let spec = SweepSpec::from_path(&self.figs.join(format!("{name}.toml"))).map_err(|e| e.to_string())?;
        let g = Arc::new(self.sweep(name, &spec)?);
        self.grids.insert(name.to_string(), g.clone());
        Ok(g)
    }

    /// Every distinct (configuration, engine) solved so far, in a fixed order.
    pub fn solved(&self) -> Vec<Arc<Point>> {
        let mut keys: Vec<&String> = self.points.keys().collect();
        keys.sort();
        keys.into_iter().map(|k| self.points[k].clone()).collect()
    }

    /// Grids evaluated so far, in name order.
    pub fn grids(&self) -> Vec<Arc<Grid>> {
        let mut v: Vec<_> = self.grids.values().cloned().collect();
        v.sort_by(|a, b| a.name.cmp(&b.name));
        v
    }
}

/// Indices of strict interior local maxima.
pub fn local_maxima(ys: &[f64]) -> Vec<usize> {
    (1..ys.len().saturating_sub(1)).filter(|&i| ys[i] > ys[i - 1] && ys[i] > ys[i + 1]).collect()
}

pub fn argmax(ys: &[f64]) -> Option<usize> {
    (0..ys.len()).max_by(|&a, &b| ys[a].total_cmp(&ys[b]))
}
