//! Hamiltonians and Liouvillian generators.
//!
//! Density matrices are vectorized column-stacked: ρ_ij sits at i + D·j, so
//! A ρ B becomes (Bᵀ ⊗ A) acting on vec(ρ).

use crate::fock_algebra::{annihilation, number, qd_sigma, Dot, HilbertLayout, Ladder, OperatorMatrix, ONE, ZERO};
use crate::phonon_kernel::{rates_coherent, rates_incoherent, BathParams, KernelError, PhononKernel, RateSet, MINUS, PLUS};
use crate::sparse::CsrMatrix;
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeneratorError {
    #[error("invalid model: {0}")]
    InvalidConfig(String),
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PumpMode {
    #[default]
    Incoherent,
    Coherent,
}

/// Detuning used in the cavity-coupling rates of the coherent model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavityRateDetuning {
    /// Δᵢp.
    #[default]
    Pump,
    /// Δᵢp − Δcp, the dot–cavity detuning.
    PumpMinusCavity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    FullMe,
    Sme,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::FullMe => "full_me",
            Engine::Sme => "sme",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub pump_mode: PumpMode,
    pub g1: f64,
    pub g2: f64,
    pub kappa: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma1p: f64,
    pub gamma2p: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta1p: f64,
    pub delta2p: f64,
    pub delta_cp: f64,
    pub n_max: usize,
    pub phonons_enabled: bool,
    pub cavity_rate_detuning: CavityRateDetuning,
    #[serde(skip)]
    pub bath: BathParams,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            pump_mode: PumpMode::Incoherent,
            g1: 1.0,
            g2: 1.0,
            kappa: 0.5,
            gamma1: 0.01,
            gamma2: 0.01,
            gamma1p: 0.01,
            gamma2p: 0.01,
            eta1: 0.0,
            eta2: 0.0,
            delta1: 0.0,
            delta2: 0.0,
            delta1p: 0.0,
            delta2p: 0.0,
            delta_cp: 0.0,
            n_max: 12,
            phonons_enabled: true,
            cavity_rate_detuning: CavityRateDetuning::Pump,
            bath: BathParams::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        let err = |m: String| Err(GeneratorError::InvalidConfig(m));
        let reals = [
            ("g1", self.g1),
            ("g2", self.g2),
            ("kappa", self.kappa),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma1p", self.gamma1p),
            ("gamma2p", self.gamma2p),
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("delta1p", self.delta1p),
            ("delta2p", self.delta2p),
            ("delta_cp", self.delta_cp),
        ];
        if let Some((k, _)) = reals.iter().find(|(_, v)| !v.is_finite()) {
            return err(format!("{k} is not finite"));
        }
        if self.kappa <= 0.0 {
            return err("kappa must be > 0".into());
        }
        if self.n_max < 4 {
            return err(format!("n_max = {} < 4", self.n_max));
        }
        for (k, v) in &reals[2..7] {
            if *v < 0.0 {
                return err(format!("{k} must be >= 0"));
            }
        }
        if self.pump_mode == PumpMode::Incoherent && (self.eta1 < 0.0 || self.eta2 < 0.0) {
            return err("incoherent pump rates must be >= 0".into());
        }
        let unread: &[(&str, f64)] = match self.pump_mode {
            PumpMode::Incoherent => &[("delta1p", self.delta1p), ("delta2p", self.delta2p), ("delta_cp", self.delta_cp)],
            PumpMode::Coherent => &[("delta1", self.delta1), ("delta2", self.delta2)],
        };
        if let Some((k, _)) = unread.iter().find(|(_, v)| *v != 0.0) {
            return err(format!("{k} is not used in {:?} mode and must be zero", self.pump_mode));
        }
        self.bath.validate()?;
        Ok(())
    }

    pub fn layout(&self) -> HilbertLayout {
        HilbertLayout::new(self.n_max)
    }

    /// Detunings entering the cavity-coupling rates.
    pub fn cavity_rate_detunings(&self) -> [f64; 2] {
        match (self.pump_mode, self.cavity_rate_detuning) {
            (PumpMode::Incoherent, _) => [self.delta1, self.delta2],
            (PumpMode::Coherent, CavityRateDetuning::Pump) => [self.delta1p, self.delta2p],
            (PumpMode::Coherent, CavityRateDetuning::PumpMinusCavity) => {
                [self.delta1p - self.delta_cp, self.delta2p - self.delta_cp]
            }
        }
    }
}

/// Bits recorded with every result that depends on a corrected reading of
/// the model equations.
pub mod flags {
    /// Ωᵢᵢ^{±±} jump terms present, entered as +Ω OρO.
    pub const OMEGA_JUMP_SIGN: u32 = 0x1;
    /// Cross dissipators present, right term ρO₂O₁.
    pub const CROSS_ORDER: u32 = 0x2;
    /// Coherent exchange term completed to Ω₊σ₁⁺aa†σ₂⁻.
    pub const COHERENT_EXCHANGE: u32 = 0x4;
    /// Pump-induced phonon terms present (relabelled Lindblad rates, shift
    /// without the stray i, Ω_p^{++} sign).
    pub const PUMP_BLOCK: u32 = 0x8;
    /// Coherent cavity rates evaluated at Δᵢp − Δcp.
    pub const CAVITY_DETUNING_SHIFTED: u32 = 0x10;
}

#[derive(Clone, Debug)]
pub struct Superoperator {
    layout: HilbertLayout,
    matrix: CsrMatrix,
    flags: u32,
}

impl Superoperator {
    pub fn from_matrix(layout: HilbertLayout, matrix: CsrMatrix) -> Self {
        let d2 = layout.dim() * layout.dim();
        assert_eq!((matrix.nrows(), matrix.ncols()), (d2, d2));
        Superoperator { layout, matrix, flags: 0 }
    }

    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn flags(&self) -> u32 {
        self.flags
    }

    /// Position of ρ_ij in the vectorized state.
    pub fn vec_index(&self, i: usize, j: usize) -> usize {
        i + self.layout.dim() * j
    }

    pub fn vectorize(rho: &OperatorMatrix) -> Vec<C64> {
        let d = rho.layout().dim();
        (0..d * d).map(|k| rho.get(k % d, k / d)).collect()
    }

    pub fn unvectorize(layout: HilbertLayout, v: &[C64]) -> OperatorMatrix {
        let d = layout.dim();
        OperatorMatrix::from_mat(layout, Mat::from_fn(d, d, |i, j| v[i + d * j]))
    }

    pub fn apply(&self, rho: &OperatorMatrix) -> OperatorMatrix {
        Self::unvectorize(self.layout, &self.matrix.matvec(&Self::vectorize(rho)))
    }

    pub fn add(&self, other: &Superoperator) -> Superoperator {
        assert_eq!(self.layout, other.layout);
        Superoperator { layout: self.layout, matrix: self.matrix.add(&other.matrix), flags: self.flags | other.flags }
    }

    /// max over columns of |Σ_i L_(ii),col|: how far tr∘L is from zero.
    pub fn trace_defect(&self) -> f64 {
        let d = self.layout.dim();
        let trace_row: Vec<C64> = (0..d * d).map(|k| if k % d == k / d { ONE } else { ZERO }).collect();
        self.matrix.vecmat(&trace_row).iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Max deviation of L(ρ) from Hermitian for a Hermitian ρ.
    pub fn hermiticity_defect(&self, rho: &OperatorMatrix) -> f64 {
        self.apply(rho).hermiticity_defect()
    }
}

/// Triplet accumulator for superoperator terms.
pub(crate) struct SuperBuilder {
    layout: HilbertLayout,
    trips: Vec<(usize, usize, C64)>,
    flags: u32,
}

impl SuperBuilder {
    pub(crate) fn new(layout: HilbertLayout) -> Self {
        SuperBuilder { layout, trips: Vec::new(), flags: 0 }
    }

    fn d(&self) -> usize {
        self.layout.dim()
    }

    /// c · A ρ
    pub(crate) fn left(&mut self, a: &OperatorMatrix, c: C64) {
        let d = self.d();
        for (i, j, v) in a.nonzeros() {
            for l in 0..d {
                self.trips.push((i + d * l, j + d * l, c * v));
            }
        }
    }

    /// c · ρ B
    pub(crate) fn right(&mut self, b: &OperatorMatrix, c: C64) {
        let d = self.d();
        for (k, l, v) in b.nonzeros() {
            for i in 0..d {
                self.trips.push((i + d * l, i + d * k, c * v));
            }
        }
    }

    /// c · A ρ B
    pub(crate) fn sandwich(&mut self, a: &OperatorMatrix, b: &OperatorMatrix, c: C64) {
        let d = self.d();
        let bn = b.nonzeros();
        for (i, j, va) in a.nonzeros() {
            for &(k, l, vb) in &bn {
                self.trips.push((i + d * l, j + d * k, c * va * vb));
            }
        }
    }

    /// −i[H, ρ]
    pub(crate) fn hamiltonian(&mut self, h: &OperatorMatrix) {
        self.left(h, C64::new(0.0, -1.0));
        self.right(h, C64::new(0.0, 1.0));
    }

    /// −(rate/2)(O†Oρ − 2OρO† + ρO†O)
    pub(crate) fn lindblad(&mut self, o: &OperatorMatrix, rate: f64) {
        if rate == 0.0 {
            return;
        }
        let od = o.adjoint();
        let odo = &od * o;
        let h = C64::new(-0.5 * rate, 0.0);
        self.left(&odo, h);
        self.right(&odo, h);
        self.sandwich(o, &od, C64::new(rate, 0.0));
    }

    /// −(rate/2)(O₂O₁ρ − 2O₁ρO₂ + ρO₂O₁)
    pub(crate) fn cross(&mut self, o1: &OperatorMatrix, o2: &OperatorMatrix, rate: C64) {
        if rate == ZERO {
            return;
        }
        self.flags |= flags::CROSS_ORDER;
        let o21 = o2 * o1;
        let h = rate * -0.5;
        self.left(&o21, h);
        self.right(&o21, h);
        self.sandwich(o1, o2, rate);
    }

    pub(crate) fn finish(self) -> Superoperator {
        let d2 = self.layout.dim() * self.layout.dim();
        Superoperator { layout: self.layout, matrix: CsrMatrix::from_triplets(d2, d2, self.trips), flags: self.flags }
    }
}

/// −(rate/2) L[O] as a standalone superoperator.
pub fn lindblad_dissipator(o: &OperatorMatrix, rate: f64) -> Superoperator {
    let mut b = SuperBuilder::new(o.layout());
    b.lindblad(o, rate);
    b.finish()
}

/// −(rate/2) L[O₁, O₂] as a standalone superoperator.
pub fn cross_dissipator(o1: &OperatorMatrix, o2: &OperatorMatrix, rate: C64) -> Superoperator {
    let mut b = SuperBuilder::new(o1.layout());
    b.cross(o1, o2, rate);
    b.finish()
}

struct Ops {
    a: OperatorMatrix,
    sp: [OperatorMatrix; 2],
    sm: [OperatorMatrix; 2],
}

impl Ops {
    fn new(layout: HilbertLayout) -> Self {
        Ops {
            a: annihilation(layout),
            sp: [qd_sigma(layout, Dot::One, Ladder::Raise), qd_sigma(layout, Dot::Two, Ladder::Raise)],
            sm: [qd_sigma(layout, Dot::One, Ladder::Lower), qd_sigma(layout, Dot::Two, Ladder::Lower)],
        }
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// S with X_g = S + S† and X_u = i(S − S†).
fn coupling_s(config: &ModelConfig, ops: &Ops) -> OperatorMatrix {
    let mut s = &ops.sp[0] * &ops.a;
    s = s.scale(re(config.g1));
    s = &s + &(&ops.sp[1] * &ops.a).scale(re(config.g2));
    if config.pump_mode == PumpMode::Coherent {
        s = &s + &ops.sp[0].scale(re(config.eta1));
        s = &s + &ops.sp[1].scale(re(config.eta2));
    }
    s
}

/// (X_g, X_u).
pub fn phonon_coupling_operators(config: &ModelConfig) -> (OperatorMatrix, OperatorMatrix) {
    let ops = Ops::new(config.layout());
    let s = coupling_s(config, &ops);
    let sd = s.adjoint();
    ((&s + &sd), (&s - &sd).scale(C64::new(0.0, 1.0)))
}

fn hamiltonian_with_b(config: &ModelConfig, ops: &Ops, b: f64) -> OperatorMatrix {
    let layout = config.layout();
    let n1 = &ops.sp[0] * &ops.sm[0];
    let n2 = &ops.sp[1] * &ops.sm[1];
    let mut h = match config.pump_mode {
        PumpMode::Incoherent => &n1.scale(re(config.delta1)) + &n2.scale(re(config.delta2)),
        PumpMode::Coherent => {
            let hd = &n1.scale(re(config.delta1p)) + &n2.scale(re(config.delta2p));
            &hd + &number(layout).scale(re(config.delta_cp))
        }
    };
    let s = coupling_s(config, ops);
    h = &h + &(&s + &s.adjoint()).scale(re(b));
    h.into_hermitian().expect("H_s is Hermitian by construction")
}

/// H_s with ⟨B⟩ from the kernel, or 1 when phonons are off.
pub fn system_hamiltonian(config: &ModelConfig, kernel: &PhononKernel) -> OperatorMatrix {
    let b = if config.phonons_enabled { kernel.franck_condon() } else { 1.0 };
    hamiltonian_with_b(config, &Ops::new(config.layout()), b)
}

/// −i[H_s, ·] with κ, γᵢ, γᵢ′ and (incoherent mode) ηᵢ dissipators.
fn bare_terms(config: &ModelConfig, ops: &Ops, b: f64) -> SuperBuilder {
    let mut sb = SuperBuilder::new(config.layout());
    sb.hamiltonian(&hamiltonian_with_b(config, ops, b));
    sb.lindblad(&ops.a, config.kappa);
    let gamma = [config.gamma1, config.gamma2];
    let dephase = [config.gamma1p, config.gamma2p];
    let eta = [config.eta1, config.eta2];
    for i in 0..2 {
        sb.lindblad(&ops.sm[i], gamma[i]);
        sb.lindblad(&(&ops.sp[i] * &ops.sm[i]), dephase[i]);
        if config.pump_mode == PumpMode::Incoherent {
            sb.lindblad(&ops.sp[i], eta[i]);
        }
    }
    sb
}

/// Generator without any phonon coupling, ⟨B⟩ = 1.
pub fn bare_generator(config: &ModelConfig) -> Result<Superoperator, GeneratorError> {
    config.validate()?;
    Ok(bare_terms(config, &Ops::new(config.layout()), 1.0).finish())
}

/// Eigendecomposition of a Hermitian matrix, block by block over the
/// connected components of its sparsity graph.
pub fn block_eigh(h: &OperatorMatrix) -> Result<(Vec<f64>, Mat<C64>), GeneratorError> {
    let d = h.layout().dim();
    if h.nonzeros().iter().any(|(_, _, v)| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(GeneratorError::Eigen("non-finite Hamiltonian entry".into()));
    }
    let graph = CsrMatrix::from_triplets(d, d, h.nonzeros());
    let comp = graph.components();
    let mut lambda = vec![0.0; d];
    let mut v = Mat::<C64>::zeros(d, d);
    let mut roots: Vec<usize> = comp.clone();
    roots.sort_unstable();
    roots.dedup();
    for root in roots {
        let idx: Vec<usize> = (0..d).filter(|&i| comp[i] == root).collect();
        let m = idx.len();
        let block = Mat::from_fn(m, m, |r, c| h.get(idx[r], idx[c]));
        let evd = block.self_adjoint_eigen(Side::Lower).map_err(|e| GeneratorError::Eigen(format!("{e:?}")))?;
        let (u, s) = (evd.U(), evd.S().column_vector());
        for c in 0..m {
            lambda[idx[c]] = s[c].re;
            for r in 0..m {
                v[(idx[r], idx[c])] = u[(r, c)];
            }
        }
    }
    Ok((lambda, v))
}

/// Full polaron master equation with the phonon term evaluated in the
/// eigenbasis of H_s.
pub fn full_polaron_generator(config: &ModelConfig, kernel: &PhononKernel) -> Result<Superoperator, GeneratorError> {
    config.validate()?;
    let ops = Ops::new(config.layout());
    if !config.phonons_enabled {
        return Ok(bare_terms(config, &ops, 1.0).finish());
    }
    let b = kernel.franck_condon();
    let mut sb = bare_terms(config, &ops, b);
    let h = hamiltonian_with_b(config, &ops, b);
    let (lambda, v) = block_eigh(&h)?;
    let layout = config.layout();
    let d = layout.dim();
    let vd = v.adjoint().to_owned();
    let (xg, xu) = phonon_coupling_operators(config);
    for (x, which) in [(xg, 0usize), (xu, 1usize)] {
        let xt = &vd * x.mat() * &v;
        let yt = Mat::from_fn(d, d, |a, c| {
            let e = xt[(a, c)];
            if e == ZERO {
                return ZERO;
            }
            let (kp, km) = kernel.half_fourier_pair(lambda[a] - lambda[c]);
            let k = if which == 0 { (kp + km) * 0.5 } else { (kp - km) * 0.5 };
            e * k
        });
        let y = OperatorMatrix::from_mat(layout, &v * &yt * &vd);
        let yd = y.adjoint();
        let m1 = C64::new(-1.0, 0.0);
        sb.left(&(&x * &y), m1);
        sb.sandwich(&y, &x, ONE);
        sb.right(&(&yd * &x), m1);
        sb.sandwich(&x, &yd, ONE);
    }
    Ok(sb.finish())
}

/// Coefficients of one two-operator block of the simplified equation, for
/// operators O₁, O₂ (σᵢ⁺a or σᵢ⁺).
struct BlockRates {
    /// L[Oᵢ] and L[Oᵢ†].
    lind: [f64; 2],
    lind_dag: [f64; 2],
    /// Hamiltonian shifts on Oᵢ†Oᵢ and OᵢOᵢ†.
    shift_dag_o: [f64; 2],
    shift_o_dag: [f64; 2],
    /// `[i][j]` multiplies L[Oⱼ, Oᵢ], L[Oⱼ†, Oᵢ†], L[Oⱼ†, Oᵢ] and L[Oⱼ, Oᵢ†].
    cross_oo: [[C64; 2]; 2],
    cross_dd: [[C64; 2]; 2],
    cross_do: [[C64; 2]; 2],
    cross_od: [[C64; 2]; 2],
    /// + c OᵢρOᵢ and + c Oᵢ†ρOᵢ†.
    jump: [C64; 2],
    jump_dag: [C64; 2],
    /// −i c O₁O₂, −i c O₁O₂†, −i c O₁†O₂, each plus h.c.
    h_oo: C64,
    h_od: C64,
    h_do: C64,
}

fn cavity_block(r: &RateSet) -> BlockRates {
    BlockRates {
        lind: [r.gamma_pm[0][MINUS], r.gamma_pm[1][MINUS]],
        lind_dag: [r.gamma_pm[0][PLUS], r.gamma_pm[1][PLUS]],
        shift_dag_o: [r.delta_pm[0][MINUS], r.delta_pm[1][MINUS]],
        shift_o_dag: [r.delta_pm[0][PLUS], r.delta_pm[1][PLUS]],
        cross_oo: r.gamma_ij_mm,
        cross_dd: r.gamma_ij_pp,
        cross_do: r.gamma_ij_mp,
        cross_od: r.gamma_ij_pm,
        jump: [r.omega_ii[0][MINUS], r.omega_ii[1][MINUS]],
        jump_dag: [r.omega_ii[0][PLUS], r.omega_ii[1][PLUS]],
        h_oo: r.omega_2ph,
        h_od: r.omega_pm[PLUS],
        h_do: r.omega_pm[MINUS],
    }
}

fn pump_block(r: &RateSet) -> BlockRates {
    // L[σⱼ^·, σᵢ^·] takes the rate labelled σⱼ^k σᵢ^l, stored at [k][l][j][i].
    let t = |k: usize, l: usize| {
        let s = &r.gamma_p_sigsig[k][l];
        [[s[0][0], s[1][0]], [s[0][1], s[1][1]]]
    };
    BlockRates {
        lind: [r.gamma_p_sigma_pm[0][MINUS], r.gamma_p_sigma_pm[1][MINUS]],
        lind_dag: [r.gamma_p_sigma_pm[0][PLUS], r.gamma_p_sigma_pm[1][PLUS]],
        shift_dag_o: [r.delta_p_sigma_pm[0][MINUS], r.delta_p_sigma_pm[1][MINUS]],
        shift_o_dag: [r.delta_p_sigma_pm[0][PLUS], r.delta_p_sigma_pm[1][PLUS]],
        cross_oo: t(MINUS, MINUS),
        cross_dd: t(PLUS, PLUS),
        cross_do: t(MINUS, PLUS),
        cross_od: t(PLUS, MINUS),
        jump: [r.omega_p_sigsig[0][PLUS], r.omega_p_sigsig[1][PLUS]],
        jump_dag: [r.omega_p_sigsig[0][MINUS], r.omega_p_sigsig[1][MINUS]],
        h_oo: r.omega_p_pp,
        h_od: r.omega_p_pm[PLUS],
        h_do: r.omega_p_pm[MINUS],
    }
}

fn add_block(sb: &mut SuperBuilder, h: &mut OperatorMatrix, o: [&OperatorMatrix; 2], r: &BlockRates) {
    let od = [o[0].adjoint(), o[1].adjoint()];
    for i in 0..2 {
        sb.lindblad(o[i], r.lind[i]);
        sb.lindblad(&od[i], r.lind_dag[i]);
        *h = &*h + &(&od[i] * o[i]).scale(re(r.shift_dag_o[i]));
        *h = &*h + &(o[i] * &od[i]).scale(re(r.shift_o_dag[i]));
        if r.jump[i] != ZERO || r.jump_dag[i] != ZERO {
            sb.flags |= flags::OMEGA_JUMP_SIGN;
            sb.sandwich(o[i], o[i], r.jump[i]);
            sb.sandwich(&od[i], &od[i], r.jump_dag[i]);
        }
    }
    for (i, j) in [(0usize, 1usize), (1, 0)] {
        sb.cross(o[j], o[i], r.cross_oo[i][j]);
        sb.cross(&od[j], &od[i], r.cross_dd[i][j]);
        sb.cross(&od[j], o[i], r.cross_do[i][j]);
        sb.cross(o[j], &od[i], r.cross_od[i][j]);
    }
    let mi = C64::new(0.0, -1.0);
    let terms = [(o[0] * o[1], r.h_oo), (o[0] * &od[1], r.h_od), (&od[0] * o[1], r.h_do)];
    for (op, c) in terms {
        if c == ZERO {
            continue;
        }
        let t = op.scale(mi * c);
        *h = &*h + &(&t + &t.adjoint());
    }
}

/// Rates matching the pump mode and cavity detuning convention of `config`.
pub fn rates_for(config: &ModelConfig, kernel: &PhononKernel) -> RateSet {
    let [d1, d2] = config.cavity_rate_detunings();
    match config.pump_mode {
        PumpMode::Incoherent => rates_incoherent(config.g1, config.g2, d1, d2, kernel),
        PumpMode::Coherent => {
            let r = rates_coherent(config.g1, config.g2, config.eta1, config.eta2, config.delta1p, config.delta2p, kernel);
            match config.cavity_rate_detuning {
                CavityRateDetuning::Pump => r,
                CavityRateDetuning::PumpMinusCavity => {
                    r.with_cavity_fields_of(&rates_incoherent(config.g1, config.g2, d1, d2, kernel))
                }
            }
        }
    }
}

/// Simplified master equation with phonon rates that depend on detunings
/// only.
pub fn sme_generator(config: &ModelConfig, kernel: &PhononKernel, rates: &RateSet) -> Result<Superoperator, GeneratorError> {
    config.validate()?;
    let ops = Ops::new(config.layout());
    if !config.phonons_enabled {
        return Ok(bare_terms(config, &ops, 1.0).finish());
    }
    let b = kernel.franck_condon();
    let mut sb = bare_terms(config, &ops, b);
    let mut h = OperatorMatrix::zeros(config.layout());
    let cav = [&ops.sp[0] * &ops.a, &ops.sp[1] * &ops.a];
    add_block(&mut sb, &mut h, [&cav[0], &cav[1]], &cavity_block(rates));
    let mut extra = 0;
    if config.pump_mode == PumpMode::Coherent {
        if rates.omega_pm[PLUS] != ZERO {
            extra |= flags::COHERENT_EXCHANGE;
        }
        if config.eta1 != 0.0 || config.eta2 != 0.0 {
            extra |= flags::PUMP_BLOCK;
        }
        if config.cavity_rate_detuning == CavityRateDetuning::PumpMinusCavity {
            extra |= flags::CAVITY_DETUNING_SHIFTED;
        }
        add_block(&mut sb, &mut h, [&ops.sp[0], &ops.sp[1]], &pump_block(rates));
    }
    sb.hamiltonian(&h);
    sb.flags |= extra;
    Ok(sb.finish())
}

/// Either engine, with rates computed from the kernel when needed.
pub fn build_generator(config: &ModelConfig, kernel: &PhononKernel, engine: Engine) -> Result<Superoperator, GeneratorError> {
    match engine {
        Engine::FullMe => full_polaron_generator(config, kernel),
        Engine::Sme => sme_generator(config, kernel, &rates_for(config, kernel)),
    }
}
