//! Phonon bath: spectral density, correlation function φ(τ), Franck–Condon
//! factor ⟨B⟩, polaron Green's functions and their half-sided Fourier
//! transforms, plus the scattering rates built from them.
//!
//! Frequencies are in units of g₁ (ħ = 1). Temperature enters through
//! ħω/2k_BT, which needs the absolute scale `g1_abs` in µeV.

use crate::quadrature::{self, gauss_kronrod, gauss_legendre, legendre_all, spherical_bessel_j, QuadOptions};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::Mutex;
use thiserror::Error;

/// Boltzmann constant in µeV/K.
pub const K_B_UEV_PER_K: f64 = 86.17333262;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid bath parameters: {0}")]
    InvalidBath(String),
    #[error(transparent)]
    Quadrature(#[from] quadrature::QuadError),
    #[error(
        "correlation function still at {residual:e} (relative) after {panels} panels up to tau = {tau}; tail bound {bound:e}"
    )]
    Tail { panels: usize, tau: f64, residual: f64, bound: f64 },
    #[error("calibration failed: {0}")]
    Calibration(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BathParams {
    /// Coupling strength in 1/g₁².
    pub alpha_p: f64,
    /// Cutoff frequency in g₁.
    pub omega_b: f64,
    /// Kelvin.
    pub temperature: f64,
    /// Absolute value of g₁ in µeV.
    pub g1_abs: f64,
}

impl Default for BathParams {
    fn default() -> Self {
        BathParams { alpha_p: 1.42e-3, omega_b: 10.0, temperature: 5.0, g1_abs: 100.0 }
    }
}

impl BathParams {
    pub fn validate(&self) -> Result<(), KernelError> {
        let bad = |m: &str| Err(KernelError::InvalidBath(m.to_string()));
        if !(self.alpha_p >= 0.0 && self.alpha_p.is_finite()) {
            return bad("alpha_p must be finite and >= 0");
        }
        if !(self.omega_b > 0.0 && self.omega_b.is_finite()) {
            return bad("omega_b must be > 0");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be >= 0");
        }
        if !(self.g1_abs > 0.0 && self.g1_abs.is_finite()) {
            return bad("g1_abs must be > 0");
        }
        Ok(())
    }

    /// ħ/(2 k_B T) per unit ω, or None at T = 0.
    fn half_beta(&self) -> Option<f64> {
        (self.temperature > 0.0).then(|| self.g1_abs / (2.0 * K_B_UEV_PER_K * self.temperature))
    }

    /// J(ω)/ω² · coth(ħω/2k_BT).
    fn even_weight(&self, omega: f64) -> f64 {
        let g = self.alpha_p * (-omega * omega / (2.0 * self.omega_b * self.omega_b)).exp();
        match self.half_beta() {
            None => g * omega,
            Some(hb) => {
                let x = hb * omega;
                let xc = if x < 1e-4 { 1.0 + x * x / 3.0 } else { x / x.tanh() };
                g * xc / hb
            }
        }
    }

    /// J(ω)/ω².
    fn odd_weight(&self, omega: f64) -> f64 {
        self.alpha_p * omega * (-omega * omega / (2.0 * self.omega_b * self.omega_b)).exp()
    }
}

/// J(ω) = α_p ω³ exp(−ω²/2ω_b²).
pub fn spectral_density(omega: f64, bath: &BathParams) -> f64 {
    bath.alpha_p * omega.powi(3) * (-omega * omega / (2.0 * bath.omega_b * bath.omega_b)).exp()
}

fn phi_quad_options() -> QuadOptions {
    QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_subdivisions: 4000 }
}

/// φ(τ) by adaptive Gauss–Kronrod in ω, split at multiples of ω_b.
pub fn phi(tau: f64, bath: &BathParams) -> Result<C64, KernelError> {
    phi_with(tau, bath, &phi_quad_options())
}

pub fn phi_with(tau: f64, bath: &BathParams, opts: &QuadOptions) -> Result<C64, KernelError> {
    bath.validate()?;
    assert!(tau >= 0.0, "phi needs tau >= 0");
    if bath.alpha_p == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let wb = bath.omega_b;
    let mut total = C64::new(0.0, 0.0);
    for k in 0..12 {
        let (a, b) = (k as f64 * wb, (k + 1) as f64 * wb);
        let r = gauss_kronrod(
            |w| {
                let (s, c) = (w * tau).sin_cos();
                C64::new(bath.even_weight(w) * c, -bath.odd_weight(w) * s)
            },
            a,
            b,
            opts,
        )?;
        total += r.value;
    }
    Ok(total)
}

/// φ(τ) at T = 0 in closed form through the Dawson integral.
pub fn phi_zero_temperature(tau: f64, bath: &BathParams) -> C64 {
    let (a, wb) = (bath.alpha_p, bath.omega_b);
    let x = wb * tau / std::f64::consts::SQRT_2;
    let re = a * wb * wb * (1.0 - 2.0 * x * quadrature::dawson(x));
    let im = -a * (std::f64::consts::PI / 2.0).sqrt() * wb.powi(3) * tau * (-x * x).exp();
    C64::new(re, im)
}

/// ⟨B⟩ = exp(−Re φ(0)/2).
pub fn franck_condon(bath: &BathParams) -> Result<f64, KernelError> {
    Ok((-phi(0.0, bath)?.re / 2.0).exp())
}

/// Chooses g1_abs so that ⟨B⟩ at `temperature` equals `target`.
pub fn calibrate_g1_abs(bath: &BathParams, temperature: f64, target: f64) -> Result<f64, KernelError> {
    if !(target > 0.0 && target < 1.0) {
        return Err(KernelError::Calibration(format!("target {target} outside (0, 1)")));
    }
    let b_at = |g: f64| franck_condon(&BathParams { g1_abs: g, temperature, ..*bath });
    // ⟨B⟩ grows with g1_abs: a larger energy unit means a colder bath.
    let (mut lo, mut hi) = (1e-3f64.ln(), 1e6f64.ln());
    let (blo, bhi) = (b_at(lo.exp())?, b_at(hi.exp())?);
    if !(blo < target && target < bhi) {
        return Err(KernelError::Calibration(format!("target {target} not bracketed: B ranges over [{blo}, {bhi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if b_at(mid.exp())? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Green {
    G,
    U,
    Plus,
    Minus,
}

/// e^z − 1 without cancellation for small |z|.
fn expm1c(z: C64) -> C64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    let cos_m1 = -2.0 * half * half;
    let er = z.re.exp_m1();
    C64::new(er * c + cos_m1, (er + 1.0) * s)
    // (e^x − 1)·cis(y) + (cis(y) − 1)
}

/// G_j from a value of φ.
pub fn greens_from_phi(phi: C64, b: f64, which: Green) -> C64 {
    let b2 = b * b;
    let gp = expm1c(phi) * b2;
    let gm = expm1c(-phi) * b2;
    match which {
        Green::Plus => gp,
        Green::Minus => gm,
        Green::G => (gp + gm) * 0.5,
        Green::U => (gp - gm) * 0.5,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelOptions {
    /// Gauss–Legendre points per τ panel.
    pub panel_order: usize,
    /// Stop once |φ(τ)| < tail_rel·|φ(0)|.
    pub tail_rel: f64,
    /// Panels are split until trailing Legendre coefficients fall below
    /// coef_tol·|G₊(0)|.
    pub coef_tol: f64,
    pub max_panels: usize,
    pub quad: QuadOptions,
}

impl Default for KernelOptions {
    fn default() -> Self {
        KernelOptions { panel_order: 24, tail_rel: 1e-10, coef_tol: 1e-13, max_panels: 4000, quad: phi_quad_options() }
    }
}

#[derive(Clone, Debug)]
struct Panel {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    phi: Vec<C64>,
    c_phi: Vec<C64>,
    c_plus: Vec<C64>,
    c_minus: Vec<C64>,
}

impl Panel {
    fn center(&self) -> f64 {
        0.5 * (self.a + self.b)
    }

    fn half(&self) -> f64 {
        0.5 * (self.b - self.a)
    }
}

/// Tabulated bath quantities for one set of bath parameters.
///
/// φ(τ) is stored as piecewise Legendre expansions on τ panels; the
/// transforms K(Δ) = ∫₀^∞ G(τ) e^{−iΔτ} dτ integrate those expansions exactly
/// against the exponential, so any Δ costs one pass over the panels.
#[derive(Debug)]
pub struct PhononKernel {
    bath: BathParams,
    b: f64,
    phi0: C64,
    tau_max: f64,
    tail_bound: f64,
    panels: Vec<Panel>,
    cache: Mutex<HashMap<u64, (C64, C64)>>,
}

impl PhononKernel {
    pub fn new(bath: BathParams) -> Result<Self, KernelError> {
        Self::with_options(bath, &KernelOptions::default())
    }

    pub fn with_options(bath: BathParams, opts: &KernelOptions) -> Result<Self, KernelError> {
        bath.validate()?;
        let empty = |b| PhononKernel {
            bath,
            b,
            phi0: C64::new(0.0, 0.0),
            tau_max: 0.0,
            tail_bound: 0.0,
            panels: Vec::new(),
            cache: Mutex::new(HashMap::new()),
        };
        if bath.alpha_p == 0.0 {
            return Ok(empty(1.0));
        }
        let eval = |tau: f64| -> Result<C64, KernelError> {
            if bath.temperature == 0.0 {
                Ok(phi_zero_temperature(tau, &bath))
            } else {
                phi_with(tau, &bath, &opts.quad)
            }
        };
        let phi0 = eval(0.0)?;
        let b = (-phi0.re / 2.0).exp();
        let g_scale = greens_from_phi(phi0, b, Green::Plus).norm().max(greens_from_phi(phi0, b, Green::Minus).norm());
        let tol = opts.coef_tol * g_scale;
        let n = opts.panel_order;
        let (xs, ws) = gauss_legendre(n);
        let mut pl = vec![0.0; n];
        let base = 1.0 / bath.omega_b;

        let mut panels = Vec::new();
        let mut a = 0.0f64;
        let mut width = base;
        loop {
            if panels.len() >= opts.max_panels {
                let r = eval(a)?.norm() / phi0.norm();
                return Err(KernelError::Tail { panels: panels.len(), tau: a, residual: r, bound: r * a });
            }
            let (c, h) = (a + 0.5 * width, 0.5 * width);
            let nodes: Vec<f64> = xs.iter().map(|x| c + h * x).collect();
            let phis = nodes.iter().map(|&t| eval(t)).collect::<Result<Vec<_>, _>>()?;
            let mut c_phi = vec![C64::new(0.0, 0.0); n];
            let mut c_plus = c_phi.clone();
            let mut c_minus = c_phi.clone();
            for (j, (&x, &w)) in xs.iter().zip(&ws).enumerate() {
                legendre_all(x, &mut pl);
                let gp = greens_from_phi(phis[j], b, Green::Plus);
                let gm = greens_from_phi(phis[j], b, Green::Minus);
                for k in 0..n {
                    let f = w * pl[k] * (2 * k + 1) as f64 / 2.0;
                    c_phi[k] += phis[j] * f;
                    c_plus[k] += gp * f;
                    c_minus[k] += gm * f;
                }
            }
            let tail = |cs: &[C64]| cs[n - 1].norm().max(cs[n - 2].norm());
            if (tail(&c_plus) > tol || tail(&c_minus) > tol) && width > 1e-6 * base {
                width *= 0.5;
                continue;
            }
            panels.push(Panel { a, b: a + width, nodes, phi: phis, c_phi, c_plus, c_minus });
            a += width;
            let end = eval(a)?;
            if end.norm() < opts.tail_rel * phi0.norm() {
                // |∫_a^∞ G| ≲ B²|φ(a)|·a for tails decaying at least like 1/τ².
                let tail_bound = b * b * end.norm() * a;
                return Ok(PhononKernel { bath, b, phi0, tau_max: a, tail_bound, panels, cache: Mutex::new(HashMap::new()) });
            }
            width = if a < 20.0 * base { (2.0 * width).min(base) } else { (0.5 * a).max(width) };
        }
    }

    pub fn bath(&self) -> &BathParams {
        &self.bath
    }

    /// ⟨B⟩.
    pub fn franck_condon(&self) -> f64 {
        self.b
    }

    pub fn phi0(&self) -> C64 {
        self.phi0
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    /// Rough bound on the neglected ∫_{τ_max}^∞ |G| dτ.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    /// The sampled (τ, φ(τ)) table.
    pub fn phi_table(&self) -> Vec<(f64, C64)> {
        self.panels.iter().flat_map(|p| p.nodes.iter().copied().zip(p.phi.iter().copied())).collect()
    }

    fn panel_at(&self, tau: f64) -> Option<&Panel> {
        if tau < 0.0 || tau > self.tau_max || self.panels.is_empty() {
            return None;
        }
        let k = self.panels.partition_point(|p| p.b < tau);
        self.panels.get(k.min(self.panels.len() - 1))
    }

    fn series(p: &Panel, cs: &[C64], tau: f64) -> C64 {
        let mut pl = vec![0.0; cs.len()];
        legendre_all(((tau - p.center()) / p.half()).clamp(-1.0, 1.0), &mut pl);
        cs.iter().zip(&pl).map(|(c, p)| c * p).sum()
    }

    /// φ(τ) from the table; zero beyond τ_max.
    pub fn phi(&self, tau: f64) -> C64 {
        match self.panel_at(tau) {
            Some(p) => Self::series(p, &p.c_phi, tau),
            None => C64::new(0.0, 0.0),
        }
    }

    pub fn greens(&self, tau: f64, which: Green) -> C64 {
        greens_from_phi(self.phi(tau), self.b, which)
    }

    /// (K₊(Δ), K₋(Δ)).
    pub fn half_fourier_pair(&self, delta: f64) -> (C64, C64) {
        let key = delta.to_bits();
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return *v;
        }
        let mut kp = C64::new(0.0, 0.0);
        let mut km = C64::new(0.0, 0.0);
        let mut j = Vec::new();
        for p in &self.panels {
            let n = p.c_plus.len();
            j.resize(n, 0.0);
            let (c, h) = (p.center(), p.half());
            spherical_bessel_j(delta * h, &mut j);
            let mut sp = C64::new(0.0, 0.0);
            let mut sm = C64::new(0.0, 0.0);
            let mut phase = C64::new(2.0, 0.0);
            for k in 0..n {
                let m = phase * j[k];
                sp += p.c_plus[k] * m;
                sm += p.c_minus[k] * m;
                phase *= C64::new(0.0, -1.0);
            }
            let pre = C64::from_polar(h, -delta * c);
            kp += pre * sp;
            km += pre * sm;
        }
        self.cache.lock().expect("cache lock").insert(key, (kp, km));
        (kp, km)
    }

    /// K_j(Δ) = ∫₀^∞ G_j(τ) e^{−iΔτ} dτ.
    pub fn half_fourier(&self, which: Green, delta: f64) -> C64 {
        let (kp, km) = self.half_fourier_pair(delta);
        match which {
            Green::Plus => kp,
            Green::Minus => km,
            Green::G => (kp + km) * 0.5,
            Green::U => (kp - km) * 0.5,
        }
    }

    fn kp(&self, d: f64) -> C64 {
        self.half_fourier_pair(d).0
    }

    fn km(&self, d: f64) -> C64 {
        self.half_fourier_pair(d).1
    }
}

/// Index of the '+' and '−' branches in the rate arrays.
pub const PLUS: usize = 0;
pub const MINUS: usize = 1;
const SIGNS: [f64; 2] = [1.0, -1.0];

/// Phonon-induced rates and shifts.
///
/// Arrays indexed `[i]` run over the dots, `[PLUS]`/`[MINUS]` over the
/// superscript sign. Pair rates `[i][j]` carry the dot indices in the order
/// of their subscripts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateSet {
    pub delta_pm: [[f64; 2]; 2],
    pub omega_2ph: C64,
    pub omega_pm: [C64; 2],
    pub gamma_pm: [[f64; 2]; 2],
    pub gamma_ij_pp: [[C64; 2]; 2],
    pub gamma_ij_mm: [[C64; 2]; 2],
    pub gamma_ij_pm: [[C64; 2]; 2],
    pub gamma_ij_mp: [[C64; 2]; 2],
    pub omega_ii: [[C64; 2]; 2],
    pub delta_p_sigma_pm: [[f64; 2]; 2],
    pub omega_p_pp: C64,
    pub omega_p_pm: [C64; 2],
    pub gamma_p_sigma_pm: [[f64; 2]; 2],
    /// `[k][l][i][j]` is the rate for σᵢ^k σⱼ^l.
    pub gamma_p_sigsig: [[[[C64; 2]; 2]; 2]; 2],
    pub omega_p_sigsig: [[C64; 2]; 2],
}

impl RateSet {
    /// Copies the cavity-coupling fields from another set.
    pub fn with_cavity_fields_of(mut self, other: &RateSet) -> Self {
        self.delta_pm = other.delta_pm;
        self.omega_2ph = other.omega_2ph;
        self.omega_pm = other.omega_pm;
        self.gamma_pm = other.gamma_pm;
        self.gamma_ij_pp = other.gamma_ij_pp;
        self.gamma_ij_mm = other.gamma_ij_mm;
        self.gamma_ij_pm = other.gamma_ij_pm;
        self.gamma_ij_mp = other.gamma_ij_mp;
        self.omega_ii = other.omega_ii;
        self
    }
}

fn cj(z: C64) -> C64 {
    z.conj()
}

/// Cavity-coupling rates for dots with couplings g and detunings Δ.
pub fn rates_incoherent(g1: f64, g2: f64, delta1: f64, delta2: f64, kernel: &PhononKernel) -> RateSet {
    let g = [g1, g2];
    let d = [delta1, delta2];
    let mut r = RateSet::default();
    for i in 0..2 {
        for (si, &s) in SIGNS.iter().enumerate() {
            let k = kernel.kp(-s * d[i]);
            r.delta_pm[i][si] = g[i] * g[i] * k.im;
            r.gamma_pm[i][si] = 2.0 * g[i] * g[i] * k.re;
            r.omega_ii[i][si] = (kernel.km(-s * d[i]) + cj(kernel.km(s * d[i]))) * (g[i] * g[i]);
        }
    }
    let h = 0.5 * g1 * g2;
    for (si, &s) in SIGNS.iter().enumerate() {
        r.omega_pm[si] = (kernel.kp(-s * d[1]) - cj(kernel.kp(-s * d[0]))) * h;
    }
    r.omega_2ph = (0..2).map(|i| kernel.km(d[i]) - cj(kernel.km(-d[i]))).sum::<C64>() * h;
    for i in 0..2 {
        for j in 0..2 {
            let gg = g[i] * g[j];
            r.gamma_ij_pp[i][j] = (kernel.km(-d[j]) + cj(kernel.km(d[i]))) * gg;
            r.gamma_ij_mm[i][j] = (kernel.km(d[j]) + cj(kernel.km(-d[i]))) * gg;
            r.gamma_ij_pm[i][j] = (kernel.kp(d[j]) + cj(kernel.kp(d[i]))) * gg;
            r.gamma_ij_mp[i][j] = (kernel.kp(-d[j]) + cj(kernel.kp(-d[i]))) * gg;
        }
    }
    r
}

/// Pump-induced rates for drive strengths η and pump detunings Δᵢp; the
/// cavity-coupling fields are evaluated at Δᵢ = Δᵢp.
pub fn rates_coherent(g1: f64, g2: f64, eta1: f64, eta2: f64, delta1p: f64, delta2p: f64, kernel: &PhononKernel) -> RateSet {
    let mut r = rates_incoherent(g1, g2, delta1p, delta2p, kernel);
    let e = [eta1, eta2];
    let d = [delta1p, delta2p];
    for i in 0..2 {
        for (si, &s) in SIGNS.iter().enumerate() {
            let k = kernel.kp(-s * d[i]);
            r.delta_p_sigma_pm[i][si] = e[i] * e[i] * k.im;
            r.gamma_p_sigma_pm[i][si] = 2.0 * e[i] * e[i] * k.re;
            r.omega_p_sigsig[i][si] = (kernel.km(s * d[i]) + cj(kernel.km(-s * d[i]))) * (e[i] * e[i]);
        }
    }
    let h = 0.5 * eta1 * eta2;
    for (si, &s) in SIGNS.iter().enumerate() {
        r.omega_p_pm[si] = (kernel.kp(-s * d[1]) - cj(kernel.kp(-s * d[0]))) * h;
    }
    r.omega_p_pp = (0..2).map(|i| kernel.km(d[i]) - cj(kernel.km(-d[i]))).sum::<C64>() * h;
    for (ki, &k) in SIGNS.iter().enumerate() {
        for (li, &l) in SIGNS.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    let ee = e[i] * e[j];
                    r.gamma_p_sigsig[ki][li][i][j] = if ki == li {
                        (kernel.km(-k * d[i]) + cj(kernel.km(k * d[j]))) * ee
                    } else {
                        (kernel.kp(-l * d[i]) + cj(kernel.kp(-l * d[j]))) * ee
                    };
                }
            }
        }
    }
    r
}
