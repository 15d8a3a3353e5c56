//! Minimal CSR storage used for superoperators.
//!
//! Only what the generators and solvers need: assembly from triplets with
//! duplicate summation, products, sub-block extraction and conversion to faer.

use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64 as C64;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    /// Duplicates are summed; entries that sum to exactly zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trips: Vec<(usize, usize, C64)>) -> Self {
        trips.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut data: Vec<C64> = Vec::with_capacity(trips.len());
        let mut rows = Vec::with_capacity(trips.len());
        let mut it = trips.into_iter().peekable();
        while let Some((r, c, mut v)) = it.next() {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) outside {nrows}x{ncols}");
            while let Some(&(r2, c2, v2)) = it.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    it.next();
                } else {
                    break;
                }
            }
            if v != C64::new(0.0, 0.0) {
                rows.push(r);
                indices.push(c);
                data.push(v);
            }
        }
        for &r in &rows {
            indptr[r + 1] += 1;
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix { nrows, ncols, indptr, indices, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        self.indices[s..e].iter().copied().zip(self.data[s..e].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let (s, e) = (self.indptr[r], self.indptr[r + 1]);
        match self.indices[s..e].binary_search(&c) {
            Ok(k) => self.data[s + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).fold(C64::new(0.0, 0.0), |acc, (c, v)| acc + v * x[c])).collect()
    }

    /// y = xᵀ A, i.e. the action of a row functional.
    pub fn vecmat(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![C64::new(0.0, 0.0); self.ncols];
        for (r, c, v) in self.iter() {
            y[c] += x[r] * v;
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= s;
        }
        out
    }

    pub fn add(&self, other: &CsrMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let trips = self.iter().chain(other.iter()).collect();
        CsrMatrix::from_triplets(self.nrows, self.ncols, trips)
    }

    /// Rows and columns given as sorted or unsorted index lists into `self`.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut cmap = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            cmap[c] = k;
        }
        let mut trips = Vec::new();
        for (k, &r) in rows.iter().enumerate() {
            for (c, v) in self.row(r) {
                let j = cmap[c];
                if j != usize::MAX {
                    trips.push((k, j, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), trips)
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    pub fn to_faer(&self) -> SparseColMat<usize, C64> {
        let trips: Vec<_> = self.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trips).expect("valid triplets")
    }

    /// Connected components of the undirected graph with an edge for every
    /// stored entry. Returns a component id per index (square matrices only).
    pub fn components(&self) -> Vec<usize> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (r, c, _) in self.iter() {
            let (a, b) = (find(&mut parent, r), find(&mut parent, c));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        (0..n).map(|i| find(&mut parent, i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn duplicates_sum_and_zeros_drop() {
        let m =
            CsrMatrix::from_triplets(2, 3, vec![(0, 1, c(1.0)), (0, 1, c(2.0)), (1, 2, c(1.0)), (1, 2, c(-1.0)), (1, 0, c(4.0))]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 1), c(3.0));
        assert_eq!(m.get(1, 2), c(0.0));
        assert_eq!(m.matvec(&[c(1.0), c(1.0), c(1.0)]), vec![c(3.0), c(4.0)]);
        assert_eq!(m.vecmat(&[c(1.0), c(1.0)]), vec![c(4.0), c(3.0), c(0.0)]);
    }

    #[test]
    fn submatrix_and_components() {
        let m = CsrMatrix::from_triplets(4, 4, vec![(0, 0, c(1.0)), (0, 2, c(2.0)), (1, 1, c(3.0)), (3, 1, c(5.0))]);
        let s = m.submatrix(&[0, 2], &[0, 2]);
        assert_eq!(s.get(0, 1), c(2.0));
        let comp = m.components();
        assert_eq!(comp[0], comp[2]);
        assert_eq!(comp[1], comp[3]);
        assert_ne!(comp[0], comp[1]);
    }
}
