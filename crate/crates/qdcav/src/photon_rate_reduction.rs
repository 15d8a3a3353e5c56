//! Reduction of a generator to a rate equation for the diagonal
//! populations P_n^{ab}, and the k-photon decomposition of ⟨n⟩.

use crate::fock_algebra::HilbertLayout;
use crate::generator_builder::Superoperator;
use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReductionError {
    #[error("coherence block could not be factorized: {0}")]
    SingularCoherenceBlock(String),
    #[error("m_max = {m_max} outside 1..={n_max}")]
    BadOrder { m_max: usize, n_max: usize },
    #[error("reduced generator has no normalizable null vector")]
    NoStationaryVector,
}

/// Rate equation over the diagonal index (ab, n), using the flat basis
/// index of the layout.
#[derive(Clone, Debug)]
pub struct PhotonRateModel {
    pub layout: HilbertLayout,
    pub m_max: usize,
    pub kappa: f64,
    /// Total non-κ outflow α_n^{ab} through photon-changing channels with
    /// |k| ≤ m_max.
    pub alpha: Vec<f64>,
    /// `emission[k - 1][j]`: rate G^{(k)} out of state j adding k photons.
    pub emission: Vec<Vec<f64>>,
    /// `absorption[k - 1][j]`: rate Γ^{(k)} out of state j removing k photons.
    pub absorption: Vec<Vec<f64>>,
    /// Photon-conserving transfers between dot labels.
    pub label_transfer: Vec<f64>,
    /// Outflow with |k| > m_max.
    pub overflow: Vec<f64>,
    /// Full reduced generator, κ included.
    pub reduced_generator: Mat<f64>,
    /// Normalized null vector of `reduced_generator`.
    pub diag_steady: Vec<f64>,
    /// Largest imaginary part dropped from the reduced generator.
    pub imag_residue: f64,
    pub negative_count: usize,
    pub most_negative: f64,
}

impl PhotonRateModel {
    /// max over columns of |Σ_i L_ij|.
    pub fn column_sum_defect(&self) -> f64 {
        let m = &self.reduced_generator;
        (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)]).sum::<f64>().abs()).fold(0.0, f64::max)
    }

    /// |Σα P − Σ(Γ + G) P| / Σα P.
    pub fn balance_defect(&self) -> f64 {
        let p = &self.diag_steady;
        let lhs: f64 = self.alpha.iter().zip(p).map(|(a, p)| a * p).sum();
        let rhs: f64 = (0..self.m_max)
            .map(|k| self.emission[k].iter().zip(&self.absorption[k]).zip(p).map(|((g, a), p)| (g + a) * p).sum::<f64>())
            .sum();
        let scale = lhs.abs().max(rhs.abs());
        if scale == 0.0 {
            0.0
        } else {
            (lhs - rhs).abs() / scale
        }
    }

    /// Steady-state flux through |k| > m_max relative to all photon-changing
    /// flux.
    pub fn overflow_fraction(&self) -> f64 {
        let p = &self.diag_steady;
        let over: f64 = self.overflow.iter().zip(p).map(|(o, p)| o.abs() * p).sum();
        let total: f64 = self.alpha.iter().zip(p).map(|(a, p)| a.abs() * p).sum::<f64>() + over;
        if total == 0.0 {
            0.0
        } else {
            over / total
        }
    }

    /// Σ_k k(G^{(k)} − Γ^{(k)})P/κ over every shift the truncation allows.
    pub fn mean_n_all_orders(&self) -> f64 {
        let l = &self.reduced_generator;
        let d = self.layout.dim();
        let mut s = 0.0;
        for j in 0..d {
            let nj = self.layout.label(j).n as f64;
            for i in 0..d {
                if i == j {
                    continue;
                }
                let k = self.layout.label(i).n as f64 - nj;
                s += k * (l[(i, j)] - self.kappa_part(i, j)) * self.diag_steady[j];
            }
        }
        s / self.kappa
    }

    fn kappa_part(&self, i: usize, j: usize) -> f64 {
        let (li, lj) = (self.layout.label(i), self.layout.label(j));
        if (li.qd1, li.qd2) == (lj.qd1, lj.qd2) && li.n + 1 == lj.n {
            self.kappa * lj.n as f64
        } else {
            0.0
        }
    }
}

/// Schur-eliminates the coherences of `gen` and classifies the remaining
/// transfers by photon-number change.
pub fn reduce(gen: &Superoperator, kappa: f64, m_max: usize) -> Result<PhotonRateModel, ReductionError> {
    let layout = gen.layout();
    let d = layout.dim();
    if m_max == 0 || m_max > layout.n_max() {
        return Err(ReductionError::BadOrder { m_max, n_max: layout.n_max() });
    }
    let l = gen.matrix();
    let comp = l.components();
    let mut keep = vec![false; d * d];
    for i in 0..d {
        keep[comp[i + d * i]] = true;
    }
    let diag: Vec<usize> = (0..d).map(|i| i + d * i).collect();
    let coh: Vec<usize> = (0..d * d).filter(|&k| keep[comp[k]] && k % d != k / d).collect();

    let l_dd = l.submatrix(&diag, &diag);
    let mut eff = l_dd.to_dense();
    if !coh.is_empty() {
        let l_cc = l.submatrix(&coh, &coh);
        let l_cd = l.submatrix(&coh, &diag);
        let l_dc = l.submatrix(&diag, &coh);
        let trips: Vec<_> = l_cc.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let lu = SparseColMat::try_new_from_triplets(coh.len(), coh.len(), &trips)
            .map_err(|e| ReductionError::SingularCoherenceBlock(format!("{e:?}")))?
            .sp_lu()
            .map_err(|e| ReductionError::SingularCoherenceBlock(format!("{e:?}")))?;
        let x = lu.solve(&l_cd.to_dense());
        if (0..d).any(|j| (0..coh.len()).any(|i| !x[(i, j)].re.is_finite() || !x[(i, j)].im.is_finite())) {
            return Err(ReductionError::SingularCoherenceBlock("non-finite solve".into()));
        }
        for (r, c, v) in l_dc.iter() {
            for j in 0..d {
                eff[(r, j)] -= v * x[(c, j)];
            }
        }
    }
    let mut imag_residue = 0.0f64;
    let reduced = Mat::from_fn(d, d, |i, j| {
        imag_residue = imag_residue.max(eff[(i, j)].im.abs());
        eff[(i, j)].re
    });
    let diag_steady = null_vector(&reduced)?;

    let mut model = PhotonRateModel {
        layout,
        m_max,
        kappa,
        alpha: vec![0.0; d],
        emission: vec![vec![0.0; d]; m_max],
        absorption: vec![vec![0.0; d]; m_max],
        label_transfer: vec![0.0; d],
        overflow: vec![0.0; d],
        reduced_generator: reduced,
        diag_steady,
        imag_residue,
        negative_count: 0,
        most_negative: 0.0,
    };
    for j in 0..d {
        let nj = layout.label(j).n as i64;
        for i in 0..d {
            if i == j {
                continue;
            }
            let v = model.reduced_generator[(i, j)] - model.kappa_part(i, j);
            if v < -1e-10 {
                model.negative_count += 1;
                model.most_negative = model.most_negative.min(v);
            }
            let k = layout.label(i).n as i64 - nj;
            let ka = k.unsigned_abs() as usize;
            if k == 0 {
                model.label_transfer[j] += v;
            } else if ka > m_max {
                model.overflow[j] += v;
            } else if k > 0 {
                model.emission[ka - 1][j] += v;
            } else {
                model.absorption[ka - 1][j] += v;
            }
        }
        let kappa_out = kappa * nj as f64;
        let outflow = -(model.reduced_generator[(j, j)] + kappa_out);
        model.alpha[j] = outflow - model.label_transfer[j] - model.overflow[j];
    }
    Ok(model)
}

/// Null vector normalized to unit sum, by replacing the vacuum row with the
/// normalization constraint.
fn null_vector(m: &Mat<f64>) -> Result<Vec<f64>, ReductionError> {
    let d = m.nrows();
    let a = Mat::from_fn(d, d, |i, j| if i == 0 { 1.0 } else { m[(i, j)] });
    let b = Mat::from_fn(d, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let x = a.partial_piv_lu().solve(&b);
    let v: Vec<f64> = (0..d).map(|i| x[(i, 0)]).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ReductionError::NoStationaryVector);
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmissionReport {
    /// `excess[k - 1]`: contribution of k-photon processes to ⟨n⟩.
    pub excess: Vec<f64>,
    pub mean_n_rate_eq: f64,
    pub mean_n_sme: f64,
    /// |rate-eq − SME| / SME.
    pub discrepancy: f64,
}

pub fn excess_emission(model: &PhotonRateModel, mean_n_sme: f64) -> EmissionReport {
    let p = &model.diag_steady;
    let excess: Vec<f64> = (0..model.m_max)
        .map(|k| {
            let s: f64 = model.emission[k].iter().zip(&model.absorption[k]).zip(p).map(|((g, a), p)| (g - a) * p).sum();
            (k + 1) as f64 * s / model.kappa
        })
        .collect();
    let total: f64 = excess.iter().sum();
    let discrepancy = if mean_n_sme == 0.0 { total.abs() } else { (total - mean_n_sme).abs() / mean_n_sme.abs() };
    EmissionReport { excess, mean_n_rate_eq: total, mean_n_sme, discrepancy }
}

/// Ω′ = √(Δp² + 4η²).
pub fn dressed_resonance(delta_p: f64, eta: f64) -> f64 {
    (delta_p * delta_p + 4.0 * eta * eta).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator_builder::{build_generator, Engine, ModelConfig, PumpMode};
    use crate::phonon_kernel::{BathParams, PhononKernel};
    use crate::steady_state::solve_steady;

    fn kernel() -> PhononKernel {
        PhononKernel::new(BathParams { temperature: 5.0, ..Default::default() }).unwrap()
    }

    fn coherent() -> ModelConfig {
        ModelConfig {
            pump_mode: PumpMode::Coherent,
            eta1: 3.0,
            eta2: 3.0,
            delta1p: -13.5,
            delta2p: -13.5,
            delta_cp: -14.75,
            n_max: 8,
            ..Default::default()
        }
    }

    #[test]
    fn cavity_ladder_alone_leaves_nothing() {
        let c = ModelConfig { g1: 0.0, g2: 0.0, n_max: 6, ..Default::default() };
        let gen = build_generator(&c, &kernel(), Engine::Sme).unwrap();
        let m = reduce(&gen, c.kappa, 4).unwrap();
        assert!(m.alpha.iter().all(|a| a.abs() < 1e-14));
        assert!(m.emission.iter().chain(&m.absorption).flatten().all(|g| g.abs() < 1e-14));
        assert!(m.overflow.iter().all(|g| g.abs() < 1e-14));
        assert!((m.diag_steady[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_orders_beyond_truncation() {
        let c = ModelConfig { n_max: 4, ..Default::default() };
        let gen = build_generator(&c, &kernel(), Engine::Sme).unwrap();
        assert_eq!(reduce(&gen, c.kappa, 5).unwrap_err(), ReductionError::BadOrder { m_max: 5, n_max: 4 });
        assert!(reduce(&gen, c.kappa, 0).is_err());
    }

    #[test]
    fn elimination_reproduces_steady_diagonal() {
        let k = kernel();
        let cases = [ModelConfig { eta1: 0.35, eta2: 0.35, n_max: 12, ..Default::default() }, coherent()];
        for c in cases {
            let gen = build_generator(&c, &k, Engine::Sme).unwrap();
            let ss = solve_steady(&gen).unwrap();
            let m = reduce(&gen, c.kappa, 4).unwrap();
            for i in 0..c.layout().dim() {
                let p = ss.rho.get(i, i).re;
                assert!((m.diag_steady[i] - p).abs() < 1e-8, "{:?} {i}: {} vs {p}", c.pump_mode, m.diag_steady[i]);
            }
            assert!(m.column_sum_defect() < 1e-8, "{}", m.column_sum_defect());
            assert!(m.balance_defect() < 1e-8, "{}", m.balance_defect());
            assert!(m.imag_residue < 1e-8, "{}", m.imag_residue);
            // Every shift counted, the flux identity is exact.
            assert!((m.mean_n_all_orders() - ss.mean_n).abs() < 1e-8 * ss.mean_n.max(1.0));
        }
    }

    #[test]
    fn excess_sums_to_total() {
        let c = ModelConfig { eta1: 0.5, eta2: 0.5, n_max: 12, ..Default::default() };
        let gen = build_generator(&c, &kernel(), Engine::Sme).unwrap();
        let ss = solve_steady(&gen).unwrap();
        let m = reduce(&gen, c.kappa, 4).unwrap();
        let r = excess_emission(&m, ss.mean_n);
        assert_eq!(r.excess.len(), 4);
        assert_eq!(r.excess.iter().sum::<f64>(), r.mean_n_rate_eq);
        assert_eq!(r.mean_n_sme, ss.mean_n);
    }

    #[test]
    fn dressed_resonance_values() {
        assert!((dressed_resonance(-13.5, 3.0) - 14.773287).abs() < 1e-6);
        assert!((dressed_resonance(-13.5, 1.9) - 14.024621).abs() < 1e-6);
        assert_eq!(dressed_resonance(-13.5, 0.0), 13.5);
    }
}
