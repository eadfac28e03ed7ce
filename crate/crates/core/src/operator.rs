//! Compressed-sparse-row operators with complex entries.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::Basis;

/// Rows above which matrix-vector products are split across threads.
const PARALLEL_ROWS: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<C64>,
    hermitian: bool,
}

impl SparseOperator {
    /// Assembles an operator from `(row, col, value)` triplets. Duplicates are
    /// summed, exact zeros dropped, and the Hermitian flag set by an exact check.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Result<Self> {
        let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); dim];
        for (r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::Parameter(format!("triplet ({r}, {c}) outside a {dim}-dimensional operator")));
            }
            *rows[r].entry(c).or_insert(C64::new(0.0, 0.0)) += v;
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != C64::new(0.0, 0.0) {
                    cols.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        let mut op = SparseOperator { dim, row_ptr, cols, values, hermitian: false };
        op.hermitian = op.check_hermitian();
        Ok(op)
    }

    pub fn zeros(dim: usize) -> Self {
        SparseOperator { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), values: Vec::new(), hermitian: true }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Nonzero entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// Exact test that `(c, r, conj v)` accompanies every `(r, c, v)`.
    pub fn check_hermitian(&self) -> bool {
        self.triplets().all(|(r, c, v)| self.get(c, r) == v.conj())
    }

    pub fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            Ok(())
        } else {
            Err(Error::NotHermitian)
        }
    }

    /// `out = H x`. Each row is reduced in a fixed order, so results do not
    /// depend on the thread count.
    pub fn apply_into(&self, x: &[C64], out: &mut [C64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        let row = |(i, o): (usize, &mut C64)| {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            *o = acc;
        };
        if self.dim >= PARALLEL_ROWS {
            out.par_iter_mut().enumerate().for_each(row);
        } else {
            out.iter_mut().enumerate().for_each(row);
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.apply_into(x, &mut out);
        out
    }

    /// `<x|H|x>`.
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let hx = self.apply(x);
        x.iter().zip(&hx).map(|(a, b)| a.conj() * b).sum()
    }

    /// Largest absolute row sum, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.dim, self.dim, C64::new(0.0, 0.0));
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Real part as a dense matrix, or `None` when any entry is complex.
    pub fn to_dense_real(&self) -> Option<DMatrix<f64>> {
        if !self.is_real() {
            return None;
        }
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v.re;
        }
        Some(m)
    }

    /// Restriction to the states of `sub`, which must all belong to `parent`.
    pub fn restrict(&self, parent: &Basis, sub: &Basis) -> Result<SparseOperator> {
        if parent.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, found: parent.len() });
        }
        let map = sub
            .states()
            .iter()
            .map(|s| parent.require(s))
            .collect::<Result<Vec<_>>>()?;
        let mut triplets = Vec::new();
        for (new_r, &old_r) in map.iter().enumerate() {
            for (old_c, v) in self.row(old_r) {
                if let Some(new_c) = sub.index_of(&parent.state(old_c)) {
                    triplets.push((new_r, new_c, v));
                }
            }
        }
        SparseOperator::from_triplets(sub.len(), triplets)
    }

    /// Copy with every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> SparseOperator {
        let mut op = self.clone();
        for v in &mut op.values {
            *v *= factor;
        }
        op
    }

    /// Writes the header `dim nnz hermitian` and one `row col re im` line per entry.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.dim, self.nnz(), self.hermitian)?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {} {}", v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let bad = |position: usize, message: String| Error::Parse { position, message };
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad(0, "missing header".into()))??;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(bad(0, format!("bad header '{header}'")));
        }
        let dim: usize = h[0].parse().map_err(|_| bad(0, "bad dimension".into()))?;
        let nnz: usize = h[1].parse().map_err(|_| bad(0, "bad nnz".into()))?;
        let mut triplets = Vec::with_capacity(nnz);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != 4 {
                return Err(bad(i + 1, format!("expected 'row col re im', got '{line}'")));
            }
            let r = f[0].parse().map_err(|_| bad(i + 1, "bad row".into()))?;
            let c = f[1].parse().map_err(|_| bad(i + 1, "bad col".into()))?;
            let re = f[2].parse().map_err(|_| bad(i + 1, "bad real part".into()))?;
            let im = f[3].parse().map_err(|_| bad(i + 1, "bad imaginary part".into()))?;
            triplets.push((r, c, C64::new(re, im)));
        }
        if triplets.len() != nnz {
            return Err(bad(0, format!("header promises {nnz} entries, found {}", triplets.len())));
        }
        SparseOperator::from_triplets(dim, triplets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn duplicates_are_summed_and_zeros_dropped() {
        let op = SparseOperator::from_triplets(
            2,
            [(0, 1, c(1.0, 0.0)), (0, 1, c(-1.0, 0.0)), (1, 1, c(2.0, 0.0)), (1, 1, c(1.0, 0.0))],
        )
        .unwrap();
        assert_eq!(op.nnz(), 1);
        assert_eq!(op.get(1, 1), c(3.0, 0.0));
        assert!(op.is_hermitian());
    }

    #[test]
    fn hermiticity_is_exact() {
        let h = SparseOperator::from_triplets(2, [(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, -1.0))]).unwrap();
        assert!(h.is_hermitian());
        let nh = SparseOperator::from_triplets(2, [(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, 1.0))]).unwrap();
        assert!(!nh.is_hermitian());
        assert!(nh.require_hermitian().is_err());
        let nh = SparseOperator::from_triplets(2, [(0, 1, c(1.0, 0.0))]).unwrap();
        assert!(!nh.is_hermitian());
    }

    #[test]
    fn matvec() {
        let h = SparseOperator::from_triplets(2, [(0, 1, c(-1.0, 0.0)), (1, 0, c(-1.0, 0.0))]).unwrap();
        let y = h.apply(&[c(1.0, 0.0), c(0.0, 2.0)]);
        assert_eq!(y, vec![c(0.0, -2.0), c(-1.0, 0.0)]);
        assert_eq!(h.norm_bound(), 1.0);
    }

    #[test]
    fn triplet_text_roundtrip() {
        let h = SparseOperator::from_triplets(
            3,
            [(0, 1, c(0.25, -1.5)), (1, 0, c(0.25, 1.5)), (2, 2, c(-0.1, 0.0))],
        )
        .unwrap();
        let mut buf = Vec::new();
        h.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "3 3 true");
        assert_eq!(text.lines().nth(1).unwrap(), "0 1 0.25 -1.5");
        assert_eq!(SparseOperator::read_from(&buf[..]).unwrap(), h);
    }
}
