//! Invariant suite for a single model configuration.

use faer::Mat;
use num_complex::Complex64 as C64;
use qdcav::fock_algebra::OperatorMatrix;
use qdcav::generator_builder::{build_generator, Engine, ModelConfig, Superoperator};
use qdcav::phonon_kernel::PhononKernel;
use qdcav::photon_rate_reduction::{reduce, PhotonRateModel};
use qdcav::steady_state::{solve_steady, SteadyState};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    /// value ≤ limit
    Upper,
    /// value ≥ limit
    Lower,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub bound: Bound,
}

impl Check {
    pub fn upper(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, bound: Bound::Upper }
    }

    pub fn lower(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, limit, bound: Bound::Lower }
    }

    /// NaN never passes.
    pub fn passed(&self) -> bool {
        match self.bound {
            Bound::Upper => self.value <= self.limit,
            Bound::Lower => self.value >= self.limit,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.bound == Bound::Upper { "<=" } else { ">=" };
        let tag = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {:.3e} {op} {:.1e}", self.name, self.value, self.limit)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckReport {
    pub checks: Vec<Check>,
    /// Diagnostics that have no pass/fail threshold.
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

fn random_hermitian(gen: &Superoperator, rng: &mut StdRng) -> OperatorMatrix {
    let l = gen.layout();
    let d = l.dim();
    let m = Mat::from_fn(d, d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    OperatorMatrix::from_mat(l, Mat::from_fn(d, d, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5))
}

/// Trace and Hermiticity preservation of a generator.
pub fn generator_checks(tag: &str, gen: &Superoperator) -> Vec<Check> {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let herm = (0..3).map(|_| gen.hermiticity_defect(&random_hermitian(gen, &mut rng))).fold(0.0, f64::max);
    vec![
        Check::upper(format!("{tag} trace functional"), gen.trace_defect(), 1e-10),
        Check::upper(format!("{tag} hermiticity"), herm, 1e-12),
    ]
}

pub fn steady_checks(tag: &str, ss: &SteadyState) -> Vec<Check> {
    vec![
        Check::upper(format!("{tag} residual / |L|"), ss.residual / ss.generator_scale, 1e-9),
        Check::upper(format!("{tag} trace"), (ss.rho.trace().re - 1.0).abs(), 1e-12),
        Check::lower(format!("{tag} min eigenvalue"), ss.min_eigenvalue, -1e-7),
        Check::upper(format!("{tag} population sum"), (ss.populations.as_array().iter().sum::<f64>() - 1.0).abs(), 1e-10),
    ]
}

/// Conservation of the photon-number reduction.
pub fn reduction_checks(tag: &str, m: &PhotonRateModel) -> Vec<Check> {
    vec![
        Check::upper(format!("{tag} reduced column sums"), m.column_sum_defect(), 1e-8),
        Check::upper(format!("{tag} balance identity"), m.balance_defect(), 1e-8),
    ]
}

/// The reduced diagonal must equal the steady state it was eliminated from.
pub fn schur_diagonal_check(tag: &str, m: &PhotonRateModel, ss: &SteadyState) -> Check {
    let d = m.layout.dim();
    let diag = (0..d).map(|i| (m.diag_steady[i] - ss.rho.get(i, i).re).abs()).fold(0.0, f64::max);
    Check::upper(format!("{tag} reduced diagonal vs steady state"), diag, 1e-8)
}

pub fn overflow_check(tag: &str, m: &PhotonRateModel) -> Check {
    Check::upper(format!("{tag} overflow beyond m_max"), m.overflow_fraction(), 1e-4)
}

/// Builds both generators for `cfg` and runs every check.
pub fn check_config(cfg: &ModelConfig, kernel: &PhononKernel, m_max: usize) -> Result<CheckReport, String> {
    let mut report = CheckReport::default();
    let mut states = Vec::new();
    for engine in [Engine::FullMe, Engine::Sme] {
        let tag = engine.as_str();
        let gen = build_generator(cfg, kernel, engine).map_err(|e| format!("{tag}: {e}"))?;
        report.checks.extend(generator_checks(tag, &gen));
        let ss = solve_steady(&gen).map_err(|e| format!("{tag}: {e}"))?;
        report.checks.extend(steady_checks(tag, &ss));
        if engine == Engine::Sme {
            let m = reduce(&gen, cfg.kappa, m_max).map_err(|e| format!("{tag}: {e}"))?;
            report.checks.extend(reduction_checks(tag, &m));
            report.checks.push(schur_diagonal_check(tag, &m, &ss));
            report.checks.push(overflow_check(tag, &m));
            report.notes.push(format!(
                "{tag}: {} negative off-diagonal rates (most negative {:.3e}); dropped imaginary part {:.3e}",
                m.negative_count, m.most_negative, m.imag_residue
            ));
        }
        report.notes.push(format!("{tag}: mean_n = {:.6e}, flags = 0x{:x}", ss.mean_n, gen.flags()));
        states.push(ss);
    }
    report.checks.push(Check::upper(
        "full_me vs sme populations",
        states[0].populations.max_abs_diff(&states[1].populations),
        0.02,
    ));
    Ok(report)
}
