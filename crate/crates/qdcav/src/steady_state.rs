//! Stationary states, time evolution and observables.

use crate::fock_algebra::{collective_projectors, number, HilbertLayout, OperatorMatrix, Qd, ONE, ZERO};
use crate::generator_builder::{build_generator, Engine, GeneratorError, ModelConfig, Superoperator};
use crate::phonon_kernel::PhononKernel;
use crate::sparse::CsrMatrix;
use faer::prelude::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyError {
    #[error("steady state not unique: null space dimension about {null_dim} ({detail})")]
    Degenerate { null_dim: usize, detail: String },
    #[error("linear solve failed: {0}")]
    Solver(String),
    #[error("step size collapsed to {h:e} at t = {t}")]
    StepCollapse { t: f64, h: f64 },
    #[error("n_max not converged up to {cap}: mean_n trend {trend:?}")]
    NotConverged { cap: usize, trend: Vec<(usize, f64)> },
    #[error(transparent)]
    Generator(#[from] GeneratorError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Populations {
    pub ee: f64,
    pub plus: f64,
    pub minus: f64,
    pub gg: f64,
}

impl Populations {
    pub fn as_array(&self) -> [f64; 4] {
        [self.ee, self.plus, self.minus, self.gg]
    }

    pub fn max_abs_diff(&self, other: &Populations) -> f64 {
        self.as_array().iter().zip(other.as_array()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observables {
    pub populations: Populations,
    pub mean_n: f64,
    pub pn: Vec<f64>,
    /// `pn_ab[q1 * 2 + q2][n]`, g = 0, e = 1.
    pub pn_ab: [Vec<f64>; 4],
}

pub fn observables(rho: &OperatorMatrix, layout: HilbertLayout) -> Observables {
    let p = collective_projectors(layout);
    let tr = |op: &OperatorMatrix| (op * rho).trace().re;
    let populations = Populations { ee: tr(&p.ee), plus: tr(&p.plus), minus: tr(&p.minus), gg: tr(&p.gg) };
    let mean_n = tr(&number(layout));
    let levels = layout.levels();
    let mut pn = vec![0.0; levels];
    let mut pn_ab: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; levels]);
    for q in 0..4 {
        for n in 0..levels {
            let i = layout.index(Qd::from_bit(q / 2), Qd::from_bit(q % 2), n);
            let v = rho.get(i, i).re;
            pn_ab[q][n] = v;
            pn[n] += v;
        }
    }
    Observables { populations, mean_n, pn, pn_ab }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: OperatorMatrix,
    /// max |L(ρ)|.
    pub residual: f64,
    /// max |L|, the scale for `residual`.
    pub generator_scale: f64,
    /// Half the anti-Hermitian part removed after the solve.
    pub hermiticity_correction: f64,
    pub min_eigenvalue: f64,
    pub populations: Populations,
    pub mean_n: f64,
    pub pn: Vec<f64>,
    pub pn_ab: [Vec<f64>; 4],
}

impl SteadyState {
    fn from_rho(rho: OperatorMatrix, gen: &Superoperator, hermiticity_correction: f64) -> Self {
        let layout = gen.layout();
        let residual = gen.matrix().matvec(&Superoperator::vectorize(&rho)).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let min_eigenvalue =
            rho.mat().self_adjoint_eigenvalues(Side::Lower).map(|v| v.first().copied().unwrap_or(0.0)).unwrap_or(f64::NAN);
        let o = observables(&rho, layout);
        SteadyState {
            rho,
            residual,
            generator_scale: gen.matrix().max_abs(),
            hermiticity_correction,
            min_eigenvalue,
            populations: o.populations,
            mean_n: o.mean_n,
            pn: o.pn,
            pn_ab: o.pn_ab,
        }
    }
}

/// Vectorized indices reachable from the density-matrix diagonal.
fn diagonal_sector(gen: &Superoperator) -> Vec<usize> {
    let d = gen.layout().dim();
    let comp = gen.matrix().components();
    let mut keep = vec![false; d * d];
    for i in 0..d {
        keep[comp[i + d * i]] = true;
    }
    (0..d * d).filter(|&k| keep[comp[k]]).collect()
}

fn sparse_lu(n: usize, trips: &[Triplet<usize, usize, C64>]) -> Result<Lu<usize, C64>, SteadyError> {
    let m = SparseColMat::try_new_from_triplets(n, n, trips).map_err(|e| SteadyError::Solver(format!("{e:?}")))?;
    m.sp_lu().map_err(|e| SteadyError::Solver(format!("{e:?}")))
}

fn solve_col(lu: &Lu<usize, C64>, b: &[C64]) -> Vec<C64> {
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    (0..b.len()).map(|i| x[(i, 0)]).collect()
}

fn null_dimension(a: &CsrMatrix) -> Result<(usize, f64), SteadyError> {
    let sv = a.to_dense().singular_values().map_err(|e| SteadyError::Solver(format!("{e:?}")))?;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    let small = sv.iter().filter(|&&s| s < 1e-10 * top).count();
    let mut sorted = sv.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite singular values"));
    Ok((small, sorted.get(1).copied().unwrap_or(0.0) / top))
}

/// Unique ρ with L(ρ) = 0 and tr ρ = 1.
pub fn solve_steady(gen: &Superoperator) -> Result<SteadyState, SteadyError> {
    let layout = gen.layout();
    let d = layout.dim();
    let sector = diagonal_sector(gen);
    let n = sector.len();
    let sub = gen.matrix().submatrix(&sector, &sector);
    // Vacuum diagonal |gg,0⟩⟨gg,0| sits at vectorized index 0.
    let vac = layout.index(Qd::G, Qd::G, 0);
    let row = sector.iter().position(|&k| k == vac + d * vac).expect("vacuum diagonal in sector");
    let is_diag: Vec<bool> = sector.iter().map(|&k| k % d == k / d).collect();
    let mut trips: Vec<_> = sub.iter().filter(|&(r, _, _)| r != row).map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    trips.extend((0..n).filter(|&c| is_diag[c]).map(|c| Triplet::new(row, c, ONE)));
    let mut b = vec![ZERO; n];
    b[row] = ONE;

    let degenerate = |why: String| -> SteadyError {
        match null_dimension(&sub) {
            Ok((dim, ratio)) => {
                SteadyError::Degenerate { null_dim: dim.max(1), detail: format!("{why}; sigma_2/sigma_max = {ratio:e}") }
            }
            Err(e) => e,
        }
    };
    let lu = sparse_lu(n, &trips).map_err(|e| degenerate(e.to_string()))?;
    let mut x = solve_col(&lu, &b);
    let a = CsrMatrix::from_triplets(n, n, trips.iter().map(|t| (t.row, t.col, t.val)).collect());
    let ax = a.matvec(&x);
    let r: Vec<C64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let dx = solve_col(&lu, &r);
    for (x, d) in x.iter_mut().zip(&dx) {
        *x += d;
    }
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(degenerate("non-finite solution".into()));
    }

    let mut m = Mat::<C64>::zeros(d, d);
    for (k, &idx) in sector.iter().enumerate() {
        m[(idx % d, idx / d)] = x[k];
    }
    let mut herm = 0.0f64;
    for i in 0..d {
        for j in 0..=i {
            let (a, b) = (m[(i, j)], m[(j, i)].conj());
            herm = herm.max((a - b).norm() / 2.0);
            let avg = (a + b) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let rho = OperatorMatrix::from_mat(layout, m).into_hermitian().expect("symmetrized");
    let ss = SteadyState::from_rho(rho, gen, herm);
    if !(ss.residual <= 1e-9 * ss.generator_scale) {
        return Err(degenerate(format!("residual {:e} after solve", ss.residual)));
    }
    Ok(ss)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_initial: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions { rtol: 1e-9, atol: 1e-12, h_initial: 1.0 / 64.0, h_min: 1e-12, max_steps: 200_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub trace: f64,
    pub populations: Populations,
    pub mean_n: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub final_state: SteadyState,
}

const TRBDF2_GAMMA: f64 = 2.0 - std::f64::consts::SQRT_2;

/// TR-BDF2 on the sparsity component(s) touched by ρ₀.
struct Stepper<'a> {
    a: CsrMatrix,
    d: f64,
    cache: HashMap<u64, Lu<usize, C64>>,
    _gen: &'a Superoperator,
}

impl<'a> Stepper<'a> {
    fn lu(&mut self, h: f64) -> Result<&Lu<usize, C64>, SteadyError> {
        let key = h.to_bits();
        if !self.cache.contains_key(&key) {
            let n = self.a.nrows();
            let dh = C64::new(-self.d * h, 0.0);
            let mut trips: Vec<_> = self.a.iter().map(|(r, c, v)| Triplet::new(r, c, v * dh)).collect();
            trips.extend((0..n).map(|i| Triplet::new(i, i, ONE)));
            let lu = sparse_lu(n, &trips)?;
            if self.cache.len() > 16 {
                self.cache.clear();
            }
            self.cache.insert(key, lu);
        }
        Ok(&self.cache[&key])
    }

    fn step(&mut self, y: &[C64], h: f64) -> Result<Vec<C64>, SteadyError> {
        let g = TRBDF2_GAMMA;
        let f = self.a.matvec(y);
        let rhs1: Vec<C64> = y.iter().zip(&f).map(|(y, f)| y + f * (0.5 * g * h)).collect();
        let yg = solve_col(self.lu(h)?, &rhs1);
        let (c1, c0) = (1.0 / (g * (2.0 - g)), (1.0 - g) * (1.0 - g) / (g * (2.0 - g)));
        let rhs2: Vec<C64> = yg.iter().zip(y).map(|(a, b)| a * c1 - b * c0).collect();
        Ok(solve_col(self.lu(h)?, &rhs2))
    }
}

/// Integrates dρ/dt = L(ρ) from ρ₀ up to `t_final`.
pub fn evolve(gen: &Superoperator, rho0: &OperatorMatrix, t_final: f64, opts: &EvolveOptions) -> Result<Trajectory, SteadyError> {
    let layout = gen.layout();
    let d = layout.dim();
    let full = Superoperator::vectorize(rho0);
    let comp = gen.matrix().components();
    let mut keep = vec![false; d * d];
    for (k, v) in full.iter().enumerate() {
        if *v != ZERO {
            keep[comp[k]] = true;
        }
    }
    let sector: Vec<usize> = (0..d * d).filter(|&k| keep[comp[k]]).collect();
    let a = gen.matrix().submatrix(&sector, &sector);
    let mut y: Vec<C64> = sector.iter().map(|&k| full[k]).collect();
    let mut st = Stepper { a, d: 0.5 * TRBDF2_GAMMA, cache: HashMap::new(), _gen: gen };

    let rebuild = |y: &[C64]| {
        let mut m = Mat::<C64>::zeros(d, d);
        for (k, &idx) in sector.iter().enumerate() {
            m[(idx % d, idx / d)] = y[k];
        }
        OperatorMatrix::from_mat(layout, m)
    };
    let snap = |t: f64, y: &[C64]| {
        let rho = rebuild(y);
        let o = observables(&rho, layout);
        Snapshot { t, trace: rho.trace().re, populations: o.populations, mean_n: o.mean_n }
    };

    let quantize = |h: f64| 2f64.powi(h.log2().floor() as i32);
    let mut t = 0.0;
    let mut h = quantize(opts.h_initial);
    let mut snapshots = vec![snap(0.0, &y)];
    let mut steps = 0;
    while t < t_final {
        if steps >= opts.max_steps {
            return Err(SteadyError::StepCollapse { t, h });
        }
        steps += 1;
        let last = t + h >= t_final;
        let hs = if last { t_final - t } else { h };
        let y1 = st.step(&y, hs)?;
        let yh = st.step(&y, 0.5 * hs)?;
        let y2 = st.step(&yh, 0.5 * hs)?;
        let scale = y2.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let err = y1.iter().zip(&y2).fold(0.0f64, |m, (a, b)| m.max((a - b).norm())) / 3.0;
        let tol = opts.atol + opts.rtol * scale;
        if err <= tol {
            y = y1.iter().zip(&y2).map(|(a, b)| b + (b - a) / 3.0).collect();
            t = if last { t_final } else { t + hs };
            snapshots.push(snap(t, &y));
        }
        let factor = if err == 0.0 { 2.0 } else { (0.9 * (tol / err).powf(1.0 / 3.0)).clamp(0.25, 2.0) };
        h = quantize(hs * factor);
        if h < opts.h_min {
            return Err(SteadyError::StepCollapse { t, h });
        }
    }
    let rho = rebuild(&y);
    let final_state = SteadyState::from_rho(rho, gen, 0.0);
    Ok(Trajectory { snapshots, final_state })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergeOptions {
    /// Relative change on ⟨n⟩; populations use the same number absolutely.
    pub tolerance: f64,
    pub step: usize,
    pub cap: usize,
}

impl Default for ConvergeOptions {
    fn default() -> Self {
        ConvergeOptions { tolerance: 1e-3, step: 4, cap: 40 }
    }
}

/// Grows n_max from `config.n_max` until ⟨n⟩ and the populations settle.
pub fn converge_n_max(
    config: &ModelConfig,
    kernel: &PhononKernel,
    engine: Engine,
    opts: &ConvergeOptions,
) -> Result<(usize, SteadyState), SteadyError> {
    let mut cfg = config.clone();
    let mut trend = Vec::new();
    let mut prev: Option<SteadyState> = None;
    loop {
        let ss = solve_steady(&build_generator(&cfg, kernel, engine)?)?;
        trend.push((cfg.n_max, ss.mean_n));
        if let Some(p) = &prev {
            let dn = (ss.mean_n - p.mean_n).abs() / ss.mean_n.abs().max(1e-12);
            let dp = ss.populations.max_abs_diff(&p.populations);
            if dn < opts.tolerance && dp < opts.tolerance {
                return Ok((cfg.n_max, ss));
            }
        }
        if cfg.n_max + opts.step > opts.cap {
            return Err(SteadyError::NotConverged { cap: opts.cap, trend });
        }
        prev = Some(ss);
        cfg.n_max += opts.step;
    }
}
