//! Operators on QD₁ ⊗ QD₂ ⊗ truncated cavity Fock space.
//!
//! Basis order is (qd1, qd2, n) with the photon number varying fastest, so the
//! flat index is `(q1 * 2 + q2) * (n_max + 1) + n` with g = 0 and e = 1.

use faer::Mat;
use num_complex::Complex64 as C64;
use std::ops::{Add, Mul, Sub};

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Qd {
    G = 0,
    E = 1,
}

impl Qd {
    pub fn from_bit(b: usize) -> Qd {
        if b == 0 {
            Qd::G
        } else {
            Qd::E
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    pub qd1: Qd,
    pub qd2: Qd,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HilbertLayout {
    n_max: usize,
}

impl HilbertLayout {
    pub fn new(n_max: usize) -> Self {
        HilbertLayout { n_max }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Number of Fock levels, n_max + 1.
    pub fn levels(&self) -> usize {
        self.n_max + 1
    }

    pub fn dim(&self) -> usize {
        4 * self.levels()
    }

    pub fn index(&self, qd1: Qd, qd2: Qd, n: usize) -> usize {
        assert!(n <= self.n_max, "photon number {n} beyond truncation {}", self.n_max);
        ((qd1 as usize) * 2 + qd2 as usize) * self.levels() + n
    }

    pub fn label(&self, idx: usize) -> BasisLabel {
        assert!(idx < self.dim());
        let pair = idx / self.levels();
        BasisLabel { qd1: Qd::from_bit(pair / 2), qd2: Qd::from_bit(pair % 2), n: idx % self.levels() }
    }

    pub fn labels(&self) -> Vec<BasisLabel> {
        (0..self.dim()).map(|i| self.label(i)).collect()
    }

    /// Total excitation number (excited dots plus photons) of a basis state.
    pub fn excitations(&self, idx: usize) -> usize {
        let l = self.label(idx);
        l.qd1 as usize + l.qd2 as usize + l.n
    }

    pub fn basis_vector(&self, qd1: Qd, qd2: Qd, n: usize) -> Vec<C64> {
        let mut v = vec![ZERO; self.dim()];
        v[self.index(qd1, qd2, n)] = ONE;
        v
    }
}

/// Dense operator bound to a layout.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    layout: HilbertLayout,
    entries: Mat<C64>,
    hermitian: bool,
}

impl OperatorMatrix {
    pub fn zeros(layout: HilbertLayout) -> Self {
        let d = layout.dim();
        OperatorMatrix { layout, entries: Mat::zeros(d, d), hermitian: true }
    }

    pub fn identity(layout: HilbertLayout) -> Self {
        let d = layout.dim();
        OperatorMatrix { layout, entries: Mat::identity(d, d), hermitian: true }
    }

    pub fn from_mat(layout: HilbertLayout, entries: Mat<C64>) -> Self {
        assert_eq!((entries.nrows(), entries.ncols()), (layout.dim(), layout.dim()));
        OperatorMatrix { layout, entries, hermitian: false }
    }

    /// Marks the operator Hermitian after checking max|M − M†| < 1e-12.
    pub fn into_hermitian(mut self) -> Result<Self, f64> {
        let dev = self.hermiticity_defect();
        if dev < 1e-12 {
            self.hermitian = true;
            Ok(self)
        } else {
            Err(dev)
        }
    }

    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    pub fn mat(&self) -> &Mat<C64> {
        &self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.entries[(i, j)]
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.layout.dim();
        let mut m = 0.0f64;
        for j in 0..d {
            for i in 0..d {
                m = m.max((self.entries[(i, j)] - self.entries[(j, i)].conj()).norm());
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix { layout: self.layout, entries: self.entries.adjoint().to_owned(), hermitian: self.hermitian }
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut e = self.entries.clone();
        for j in 0..e.ncols() {
            for i in 0..e.nrows() {
                e[(i, j)] *= s;
            }
        }
        OperatorMatrix { layout: self.layout, entries: e, hermitian: self.hermitian && s.im == 0.0 }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn trace(&self) -> C64 {
        (0..self.layout.dim()).map(|i| self.entries[(i, i)]).sum()
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let d = self.layout.dim();
        assert_eq!(v.len(), d);
        (0..d).map(|i| (0..d).map(|j| self.entries[(i, j)] * v[j]).sum()).collect()
    }

    /// Non-zero entries as (row, col, value).
    pub fn nonzeros(&self) -> Vec<(usize, usize, C64)> {
        let d = self.layout.dim();
        let mut out = Vec::new();
        for j in 0..d {
            for i in 0..d {
                let v = self.entries[(i, j)];
                if v != ZERO {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = self.layout.dim();
        let mut m = 0.0f64;
        for j in 0..d {
            for i in 0..d {
                m = m.max((self.entries[(i, j)] - other.entries[(i, j)]).norm());
            }
        }
        m
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.layout, rhs.layout);
        OperatorMatrix { layout: self.layout, entries: &self.entries * &rhs.entries, hermitian: false }
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.layout, rhs.layout);
        OperatorMatrix { layout: self.layout, entries: &self.entries + &rhs.entries, hermitian: self.hermitian && rhs.hermitian }
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.layout, rhs.layout);
        OperatorMatrix { layout: self.layout, entries: &self.entries - &rhs.entries, hermitian: self.hermitian && rhs.hermitian }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dot {
    One,
    Two,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ladder {
    Raise,
    Lower,
}

fn from_map<F: Fn(BasisLabel) -> Option<(BasisLabel, f64)>>(layout: HilbertLayout, f: F) -> OperatorMatrix {
    let mut op = OperatorMatrix::zeros(layout);
    op.hermitian = false;
    for j in 0..layout.dim() {
        if let Some((to, amp)) = f(layout.label(j)) {
            let i = layout.index(to.qd1, to.qd2, to.n);
            op.entries[(i, j)] = C64::new(amp, 0.0);
        }
    }
    op
}

/// Cavity annihilation operator a.
pub fn annihilation(layout: HilbertLayout) -> OperatorMatrix {
    from_map(layout, |l| (l.n > 0).then(|| (BasisLabel { n: l.n - 1, ..l }, (l.n as f64).sqrt())))
}

pub fn creation(layout: HilbertLayout) -> OperatorMatrix {
    annihilation(layout).adjoint()
}

pub fn number(layout: HilbertLayout) -> OperatorMatrix {
    let mut op = OperatorMatrix::zeros(layout);
    for i in 0..layout.dim() {
        op.entries[(i, i)] = C64::new(layout.label(i).n as f64, 0.0);
    }
    op
}

/// σᵢ⁺ = |eᵢ⟩⟨gᵢ| or σᵢ⁻ on the chosen dot.
pub fn qd_sigma(layout: HilbertLayout, which: Dot, kind: Ladder) -> OperatorMatrix {
    let (from, to) = match kind {
        Ladder::Raise => (Qd::G, Qd::E),
        Ladder::Lower => (Qd::E, Qd::G),
    };
    from_map(layout, |l| match which {
        Dot::One if l.qd1 == from => Some((BasisLabel { qd1: to, ..l }, 1.0)),
        Dot::Two if l.qd2 == from => Some((BasisLabel { qd2: to, ..l }, 1.0)),
        _ => None,
    })
}

/// Projectors onto |e₁e₂⟩, |±⟩ = (|e₁g₂⟩ ± |g₁e₂⟩)/√2 and |g₁g₂⟩, each
/// summed over every photon number.
#[derive(Clone, Debug)]
pub struct CollectiveProjectors {
    pub ee: OperatorMatrix,
    pub plus: OperatorMatrix,
    pub minus: OperatorMatrix,
    pub gg: OperatorMatrix,
}

pub fn collective_projectors(layout: HilbertLayout) -> CollectiveProjectors {
    let diag = |q1: Qd, q2: Qd| {
        let mut p = OperatorMatrix::zeros(layout);
        for n in 0..layout.levels() {
            let i = layout.index(q1, q2, n);
            p.entries[(i, i)] = ONE;
        }
        p
    };
    let pm = |sign: f64| {
        let mut p = OperatorMatrix::zeros(layout);
        for n in 0..layout.levels() {
            let eg = layout.index(Qd::E, Qd::G, n);
            let ge = layout.index(Qd::G, Qd::E, n);
            p.entries[(eg, eg)] = C64::new(0.5, 0.0);
            p.entries[(ge, ge)] = C64::new(0.5, 0.0);
            p.entries[(eg, ge)] = C64::new(0.5 * sign, 0.0);
            p.entries[(ge, eg)] = C64::new(0.5 * sign, 0.0);
        }
        p
    };
    CollectiveProjectors { ee: diag(Qd::E, Qd::E), plus: pm(1.0), minus: pm(-1.0), gg: diag(Qd::G, Qd::G) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lay() -> HilbertLayout {
        HilbertLayout::new(3)
    }

    #[test]
    fn layout_bijection() {
        let l = lay();
        assert_eq!(l.dim(), 16);
        let labels = l.labels();
        for (i, lab) in labels.iter().enumerate() {
            assert_eq!(l.index(lab.qd1, lab.qd2, lab.n), i);
        }
        let mut uniq = labels.clone();
        uniq.dedup();
        assert_eq!(uniq.len(), 16);
    }

    #[test]
    fn cavity_block_for_single_photon_truncation() {
        let l = HilbertLayout::new(1);
        let a = annihilation(l);
        let i0 = l.index(Qd::E, Qd::G, 0);
        let i1 = l.index(Qd::E, Qd::G, 1);
        assert_eq!(a.get(i0, i1), ONE);
        assert_eq!(a.get(i1, i0), ZERO);
        assert_eq!(a.get(i0, i0), ZERO);
        assert_eq!(a.get(i1, i1), ZERO);
    }

    #[test]
    fn a_kills_vacuum() {
        let l = lay();
        let a = annihilation(l);
        let v = a.apply(&l.basis_vector(Qd::G, Qd::E, 0));
        assert!(v.iter().all(|x| *x == ZERO));
    }

    #[test]
    fn commutator_boundary() {
        let l = lay();
        let a = annihilation(l);
        let c = a.commutator(&creation(l));
        for i in 0..l.dim() {
            for j in 0..l.dim() {
                let lab = l.label(i);
                let expect = if i != j {
                    0.0
                } else if lab.n == l.n_max() {
                    -(l.n_max() as f64)
                } else {
                    1.0
                };
                assert!((c.get(i, j) - C64::new(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn sigma_algebra() {
        let l = lay();
        let s1p = qd_sigma(l, Dot::One, Ladder::Raise);
        let s1m = qd_sigma(l, Dot::One, Ladder::Lower);
        let s2p = qd_sigma(l, Dot::Two, Ladder::Raise);
        assert!((&s1p * &s1p).nonzeros().is_empty());
        let proj = &s1p * &s1m;
        for i in 0..l.dim() {
            let e = if l.label(i).qd1 == Qd::E { 1.0 } else { 0.0 };
            assert_eq!(proj.get(i, i), C64::new(e, 0.0));
        }
        assert_eq!(proj.trace(), C64::new(l.dim() as f64 / 2.0, 0.0));
        let both = &s1p * &s2p;
        for n in 0..l.levels() {
            let v = both.apply(&l.basis_vector(Qd::G, Qd::G, n));
            assert_eq!(v, l.basis_vector(Qd::E, Qd::E, n));
        }
    }

    #[test]
    fn projectors_resolve_identity() {
        let l = lay();
        let p = collective_projectors(l);
        let sum = &(&(&p.ee + &p.plus) + &p.minus) + &p.gg;
        assert!(sum.max_abs_diff(&OperatorMatrix::identity(l)) < 1e-15);
        assert!((&p.plus * &p.minus).nonzeros().iter().all(|t| t.2.norm() < 1e-16));
        let mut plus0 = vec![ZERO; l.dim()];
        plus0[l.index(Qd::E, Qd::G, 0)] = C64::new(0.5f64.sqrt(), 0.0);
        plus0[l.index(Qd::G, Qd::E, 0)] = C64::new(0.5f64.sqrt(), 0.0);
        let pv = p.plus.apply(&plus0);
        let ov: C64 = plus0.iter().zip(&pv).map(|(a, b)| a.conj() * b).sum();
        assert!((ov - ONE).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn operator_algebra_holds_below_truncation(n_max in 1usize..8, q1 in 0usize..2, q2 in 0usize..2) {
            let l = HilbertLayout::new(n_max);
            let a = annihilation(l);
            let ad = creation(l);
            let num = &ad * &a;
            prop_assert!(num.max_abs_diff(&number(l)) < 1e-13);
            for n in 0..n_max {
                let v = l.basis_vector(Qd::from_bit(q1), Qd::from_bit(q2), n);
                let up = ad.apply(&v);
                let back = a.apply(&up);
                let i = l.index(Qd::from_bit(q1), Qd::from_bit(q2), n);
                prop_assert!((back[i] - C64::new((n + 1) as f64, 0.0)).norm() < 1e-13);
            }
            for which in [Dot::One, Dot::Two] {
                let sp = qd_sigma(l, which, Ladder::Raise);
                let sm = qd_sigma(l, which, Ladder::Lower);
                prop_assert!(sp.adjoint().max_abs_diff(&sm) == 0.0);
                prop_assert!(a.commutator(&sp).nonzeros().is_empty());
                let anti = &(&sp * &sm) + &(&sm * &sp);
                prop_assert!(anti.max_abs_diff(&OperatorMatrix::identity(l)) == 0.0);
            }
        }
    }
}
