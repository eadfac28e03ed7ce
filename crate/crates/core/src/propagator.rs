//! Time evolution `exp(-iHt)|psi>` and Hermitian eigensolvers.
//!
//! Small operators are diagonalized once and propagated exactly. Large ones
//! use short-time Lanczos exponentials: each step builds an orthonormal
//! Krylov basis (fully reorthogonalized), exponentiates the projected
//! tridiagonal matrix, and shrinks the step until the a-posteriori error
//! estimate `beta_0 * beta_m * |e_m^T exp(-iT tau) e_1|` is below tolerance.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::Basis;
use crate::operator::SparseOperator;

/// Dimension up to which the dense path is used by [`Method::Auto`] and full
/// spectra are available.
pub const DENSE_THRESHOLD: usize = 4096;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct Wavefunction {
    pub amplitudes: Vec<C64>,
    /// Time in units of `1/J`.
    pub time: f64,
}

impl Wavefunction {
    pub fn new(amplitudes: Vec<C64>) -> Self {
        Wavefunction { amplitudes, time: 0.0 }
    }

    /// Unit vector on basis index `index`.
    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Wavefunction::new(amplitudes)
    }

    /// Product state `state` expressed in `basis`.
    pub fn product(basis: &Basis, state: &crate::fock::FockState) -> Result<Self> {
        Ok(Wavefunction::basis_state(basis.len(), basis.require(state)?))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Parameter("cannot normalize a zero vector".into()));
        }
        for a in &mut self.amplitudes {
            *a /= n;
        }
        Ok(self)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Wavefunction) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: other.dim() });
        }
        Ok(dot(&self.amplitudes, &other.amplitudes))
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Dense below [`DENSE_THRESHOLD`], Krylov above.
    #[default]
    Auto,
    Krylov,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionPlan {
    #[serde(default)]
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_krylov_dim() -> usize {
    30
}

fn default_tolerance() -> f64 {
    1e-9
}

impl EvolutionPlan {
    /// Grid from 0 to `t_end` in steps of `dt`, automatic method.
    pub fn new(t_end: f64, dt: f64) -> Self {
        EvolutionPlan {
            t_start: 0.0,
            t_end,
            dt,
            method: Method::Auto,
            krylov_dim: default_krylov_dim(),
            tolerance: default_tolerance(),
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_start(mut self, t_start: f64) -> Self {
        self.t_start = t_start;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= self.t_start) {
            return Err(Error::Parameter("end time precedes start time".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter("time step must be positive".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Parameter("tolerance must be positive".into()));
        }
        if self.krylov_dim < 2 {
            return Err(Error::Parameter("Krylov dimension must be at least 2".into()));
        }
        Ok(())
    }

    /// Output times `t_start, t_start + dt, ...`, ending exactly at `t_end`.
    pub fn times(&self) -> Vec<f64> {
        let span = self.t_end - self.t_start;
        let steps = (span / self.dt - 1e-9).ceil().max(0.0) as usize;
        let mut t: Vec<f64> = (0..=steps).map(|k| self.t_start + k as f64 * self.dt).collect();
        if let Some(last) = t.last_mut() {
            *last = last.min(self.t_end);
        }
        t
    }

    fn resolve(&self, dim: usize) -> Method {
        match self.method {
            Method::Auto if dim <= DENSE_THRESHOLD => Method::Dense,
            Method::Auto => Method::Krylov,
            m => m,
        }
    }
}

/// Full eigendecomposition of a Hermitian operator.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    pub values: Vec<f64>,
    vectors: Vectors,
}

#[derive(Debug, Clone)]
enum Vectors {
    Real(DMatrix<f64>),
    Complex(DMatrix<C64>),
}

impl DenseSpectrum {
    pub fn new(h: &SparseOperator) -> Result<Self> {
        h.require_hermitian()?;
        let (values, vectors) = match h.to_dense_real() {
            Some(m) => {
                let e = SymmetricEigen::new(m);
                (e.eigenvalues, Vectors::Real(e.eigenvectors))
            }
            None => {
                let e = SymmetricEigen::new(h.to_dense());
                (e.eigenvalues, Vectors::Complex(e.eigenvectors))
            }
        };
        // Ascending eigenvalue order.
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let values: Vec<f64> = order.iter().map(|&k| values[k]).collect();
        let vectors = match vectors {
            Vectors::Real(v) => Vectors::Real(v.select_columns(order.iter())),
            Vectors::Complex(v) => Vectors::Complex(v.select_columns(order.iter())),
        };
        Ok(DenseSpectrum { values, vectors })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        match &self.vectors {
            Vectors::Real(v) => v.column(k).iter().map(|&x| C64::new(x, 0.0)).collect(),
            Vectors::Complex(v) => v.column(k).iter().copied().collect(),
        }
    }

    /// Coefficients `V^dagger psi`.
    fn project(&self, psi: &[C64]) -> Vec<C64> {
        match &self.vectors {
            Vectors::Real(v) => {
                let re = DVector::from_iterator(psi.len(), psi.iter().map(|a| a.re));
                let im = DVector::from_iterator(psi.len(), psi.iter().map(|a| a.im));
                let (cr, ci) = (v.tr_mul(&re), v.tr_mul(&im));
                cr.iter().zip(ci.iter()).map(|(&r, &i)| C64::new(r, i)).collect()
            }
            Vectors::Complex(v) => {
                let x = DVector::from_column_slice(psi);
                v.ad_mul(&x).iter().copied().collect()
            }
        }
    }

    fn expand(&self, coeffs: &[C64]) -> Vec<C64> {
        match &self.vectors {
            Vectors::Real(v) => {
                let re = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|a| a.re));
                let im = DVector::from_iterator(coeffs.len(), coeffs.iter().map(|a| a.im));
                let (r, i) = (v * re, v * im);
                r.iter().zip(i.iter()).map(|(&r, &i)| C64::new(r, i)).collect()
            }
            Vectors::Complex(v) => {
                let x = DVector::from_column_slice(coeffs);
                (v * x).iter().copied().collect()
            }
        }
    }

    /// `exp(-i H tau) psi`.
    pub fn propagate(&self, psi: &[C64], tau: f64) -> Vec<C64> {
        let mut c = self.project(psi);
        for (ck, &e) in c.iter_mut().zip(&self.values) {
            *ck *= C64::from_polar(1.0, -e * tau);
        }
        self.expand(&c)
    }
}

/// Krylov propagator for `exp(-i H tau)` with adaptive sub-stepping.
#[derive(Debug, Clone)]
pub struct KrylovPropagator<'a> {
    h: &'a SparseOperator,
    subspace: usize,
    tolerance: f64,
}

impl<'a> KrylovPropagator<'a> {
    pub fn new(h: &'a SparseOperator, subspace: usize, tolerance: f64) -> Result<Self> {
        h.require_hermitian()?;
        Ok(KrylovPropagator { h, subspace: subspace.max(2), tolerance })
    }

    /// `exp(-i H tau) psi`, taking as many internal steps as needed.
    pub fn propagate(&self, psi: &[C64], tau: f64) -> Vec<C64> {
        let mut v = psi.to_vec();
        let mut done = 0.0;
        let total = tau.abs();
        let dir = tau.signum();
        let mut guess = total;
        while done < total {
            let remaining = total - done;
            let (next, taken) = self.step(&v, dir, guess.min(remaining));
            v = next;
            done += taken;
            // Next step starts from a slightly larger trial than the last accepted one.
            guess = if taken > 0.0 { taken * 1.5 } else { remaining };
            if remaining - taken <= 1e-14 * total.max(1.0) {
                break;
            }
        }
        v
    }

    /// One Lanczos exponential step of length at most `tau_max`. Returns the
    /// propagated vector and the step actually taken.
    fn step(&self, v: &[C64], dir: f64, tau_max: f64) -> (Vec<C64>, f64) {
        let beta0 = norm(v);
        if beta0 == 0.0 || tau_max == 0.0 {
            return (v.to_vec(), tau_max);
        }
        let n = v.len();
        let m = self.subspace.min(n);
        let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m);
        basis.push(v.iter().map(|x| x / beta0).collect());
        let mut alpha = Vec::with_capacity(m);
        let mut beta = Vec::with_capacity(m);
        let scale = self.h.norm_bound().max(1e-300);
        let mut breakdown = false;
        let mut w = vec![ZERO; n];
        for j in 0..m {
            self.h.apply_into(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            // Two passes of classical Gram-Schmidt against the whole basis.
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                }
            }
            let b = norm(&w);
            beta.push(b);
            if b <= 1e-12 * scale {
                breakdown = true;
                break;
            }
            if j + 1 < m {
                basis.push(w.iter().map(|x| x / b).collect());
            }
        }
        let k = alpha.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alpha[i];
            if i + 1 < k {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let coeffs = |tau: f64| -> Vec<C64> {
            (0..k)
                .map(|row| {
                    (0..k)
                        .map(|col| {
                            let s = eig.eigenvectors[(row, col)] * eig.eigenvectors[(0, col)];
                            C64::from_polar(s, -dir * eig.eigenvalues[col] * tau)
                        })
                        .sum()
                })
                .collect()
        };
        let mut tau = tau_max;
        let mut y = coeffs(tau);
        if !breakdown {
            let residual = beta[k - 1];
            for _ in 0..60 {
                let err = beta0 * residual * y[k - 1].norm();
                if err <= self.tolerance {
                    break;
                }
                let shrink = (0.9 * (self.tolerance / err).powf(1.0 / k as f64)).clamp(0.1, 0.9);
                tau *= shrink;
                y = coeffs(tau);
            }
        }
        let mut out = vec![ZERO; n];
        for (q, c) in basis.iter().zip(&y) {
            axpy(c * beta0, q, &mut out);
        }
        (out, tau)
    }
}

/// Either propagation route behind one interface.
pub enum Propagator<'a> {
    Dense(DenseSpectrum),
    Krylov(KrylovPropagator<'a>),
}

impl<'a> Propagator<'a> {
    pub fn new(h: &'a SparseOperator, plan: &EvolutionPlan) -> Result<Self> {
        plan.validate()?;
        h.require_hermitian()?;
        Ok(match plan.resolve(h.dim()) {
            Method::Dense => Propagator::Dense(DenseSpectrum::new(h)?),
            _ => Propagator::Krylov(KrylovPropagator::new(h, plan.krylov_dim, plan.tolerance)?),
        })
    }

    pub fn propagate(&self, psi: &[C64], tau: f64) -> Vec<C64> {
        match self {
            Propagator::Dense(d) => d.propagate(psi, tau),
            Propagator::Krylov(k) => k.propagate(psi, tau),
        }
    }
}

/// Evolves `psi0` along the plan's time grid, calling `visit` at every grid
/// time (including the start).
pub fn evolve_with<F>(h: &SparseOperator, psi0: &Wavefunction, plan: &EvolutionPlan, mut visit: F) -> Result<()>
where
    F: FnMut(&Wavefunction) -> Result<()>,
{
    if psi0.dim() != h.dim() {
        return Err(Error::Dimension { expected: h.dim(), found: psi0.dim() });
    }
    if (psi0.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("initial state is not normalized (norm {})", psi0.norm())));
    }
    let prop = Propagator::new(h, plan)?;
    let times = plan.times();
    let mut psi = Wavefunction { amplitudes: psi0.amplitudes.clone(), time: plan.t_start };
    visit(&psi)?;
    for w in times.windows(2) {
        // Dense propagation restarts from psi0 to avoid accumulating rounding.
        let amplitudes = match &prop {
            Propagator::Dense(d) => d.propagate(&psi0.amplitudes, w[1] - plan.t_start),
            Propagator::Krylov(k) => k.propagate(&psi.amplitudes, w[1] - w[0]),
        };
        psi = Wavefunction { amplitudes, time: w[1] };
        visit(&psi)?;
    }
    Ok(())
}

/// States at every grid time of `plan`.
pub fn evolve(h: &SparseOperator, psi0: &Wavefunction, plan: &EvolutionPlan) -> Result<Vec<Wavefunction>> {
    let mut out = Vec::with_capacity(plan.times().len());
    evolve_with(h, psi0, plan, |psi| {
        out.push(psi.clone());
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMode {
    /// Every eigenpair, dimension at most [`DENSE_THRESHOLD`].
    Full,
    /// The `k` pairs of largest `|lambda|`, by Lanczos iteration.
    Extremal(usize),
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C64>>,
}

impl EigenPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest `||H v - lambda v||` over all pairs.
    pub fn max_residual(&self, h: &SparseOperator) -> f64 {
        self.values
            .iter()
            .zip(&self.vectors)
            .map(|(&l, v)| residual(h, v, l))
            .fold(0.0, f64::max)
    }
}

pub fn residual(h: &SparseOperator, v: &[C64], lambda: f64) -> f64 {
    let hv = h.apply(v);
    hv.iter().zip(v).map(|(a, b)| (a - b * lambda).norm_sqr()).sum::<f64>().sqrt()
}

/// Rotates `v` so its largest-magnitude component (first on near ties) is real positive.
pub fn fix_phase(v: &mut [C64]) {
    let max = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().find(|x| x.norm() >= max * (1.0 - 1e-9)).copied().unwrap();
    let phase = pivot.conj() / pivot.norm();
    for x in v.iter_mut() {
        *x *= phase;
    }
}

const RESIDUAL_TOLERANCE: f64 = 1e-8;

pub fn eigensolve(h: &SparseOperator, mode: EigenMode) -> Result<EigenPairs> {
    h.require_hermitian()?;
    match mode {
        EigenMode::Full => {
            if h.dim() > DENSE_THRESHOLD {
                return Err(Error::Parameter(format!(
                    "full spectrum requested for dimension {} above the dense threshold {DENSE_THRESHOLD}",
                    h.dim()
                )));
            }
            let spec = DenseSpectrum::new(h)?;
            let vectors = (0..spec.dim())
                .map(|k| {
                    let mut v = spec.vector(k);
                    fix_phase(&mut v);
                    v
                })
                .collect();
            Ok(EigenPairs { values: spec.values, vectors })
        }
        EigenMode::Extremal(k) => lanczos_extremal(h, k),
    }
}

/// Deterministic pseudo-random start vector (SplitMix64).
fn start_vector(n: usize) -> Vec<C64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut next = || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let v: Vec<C64> = (0..n).map(|_| C64::new(next(), 0.0)).collect();
    let nv = norm(&v);
    v.into_iter().map(|x| x / nv).collect()
}

const LANCZOS_MAX_BASIS: usize = 600;

fn lanczos_extremal(h: &SparseOperator, k: usize) -> Result<EigenPairs> {
    let n = h.dim();
    if k == 0 || k > n {
        return Err(Error::Parameter(format!("requested {k} eigenpairs of a {n}-dimensional operator")));
    }
    let scale = h.norm_bound().max(1e-300);
    let max_basis = n.min(LANCZOS_MAX_BASIS);
    let mut basis: Vec<Vec<C64>> = vec![start_vector(n)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![ZERO; n];
    let mut worst = f64::INFINITY;
    loop {
        let j = basis.len() - 1;
        h.apply_into(&basis[j], &mut w);
        alpha.push(dot(&basis[j], &w).re);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = norm(&w);
        let exhausted = b <= 1e-12 * scale || basis.len() == max_basis;
        let size = alpha.len();
        if size >= k && (size.is_multiple_of(10) || exhausted) {
            let mut t = DMatrix::<f64>::zeros(size, size);
            for i in 0..size {
                t[(i, i)] = alpha[i];
                if i + 1 < size {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..size).collect();
            order.sort_by(|&a, &c| {
                eig.eigenvalues[c]
                    .abs()
                    .total_cmp(&eig.eigenvalues[a].abs())
                    .then(eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]))
            });
            let chosen = &order[..k];
            let estimates: Vec<f64> = chosen.iter().map(|&c| b * eig.eigenvectors[(size - 1, c)].abs()).collect();
            let converged = estimates.iter().all(|&e| e <= 1e-10 * scale);
            if converged || exhausted {
                let mut values = Vec::with_capacity(k);
                let mut vectors = Vec::with_capacity(k);
                for &c in chosen {
                    let mut v = vec![ZERO; n];
                    for (i, q) in basis.iter().enumerate().take(size) {
                        axpy(C64::new(eig.eigenvectors[(i, c)], 0.0), q, &mut v);
                    }
                    let nv = norm(&v);
                    v.iter_mut().for_each(|x| *x /= nv);
                    fix_phase(&mut v);
                    values.push(eig.eigenvalues[c]);
                    vectors.push(v);
                }
                let pairs = EigenPairs { values, vectors };
                worst = pairs.max_residual(h);
                if worst <= RESIDUAL_TOLERANCE {
                    return Ok(pairs);
                }
                if exhausted {
                    break;
                }
            }
        }
        if exhausted {
            break;
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x / b).collect());
    }
    Err(Error::NoConvergence { iterations: alpha.len(), residual: worst })
}

/// Sidecar metadata for a binary amplitude checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub dim: usize,
    pub time: f64,
    pub sites: usize,
    pub atoms: Option<usize>,
    pub boundary: crate::fock::Boundary,
    /// Free-form description of the basis (model, loadout, ...).
    pub label: String,
}

/// Writes `<stem>.bin` (little-endian `re, im` doubles) and `<stem>.json`.
pub fn write_checkpoint(stem: &Path, psi: &Wavefunction, basis: &Basis, label: &str) -> Result<()> {
    if psi.dim() != basis.len() {
        return Err(Error::Dimension { expected: basis.len(), found: psi.dim() });
    }
    let mut bin = BufWriter::new(File::create(stem.with_extension("bin"))?);
    for a in &psi.amplitudes {
        bin.write_all(&a.re.to_le_bytes())?;
        bin.write_all(&a.im.to_le_bytes())?;
    }
    bin.flush()?;
    let meta = CheckpointMeta {
        dim: psi.dim(),
        time: psi.time,
        sites: basis.sites(),
        atoms: basis.atoms(),
        boundary: basis.boundary(),
        label: label.to_string(),
    };
    serde_json::to_writer_pretty(File::create(stem.with_extension("json"))?, &meta)?;
    Ok(())
}

pub fn read_checkpoint(stem: &Path) -> Result<(Wavefunction, CheckpointMeta)> {
    let meta: CheckpointMeta = serde_json::from_reader(BufReader::new(File::open(stem.with_extension("json"))?))?;
    let mut bytes = Vec::new();
    File::open(stem.with_extension("bin"))?.read_to_end(&mut bytes)?;
    if bytes.len() != 16 * meta.dim {
        return Err(Error::Dimension { expected: 16 * meta.dim, found: bytes.len() });
    }
    let amplitudes = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect();
    Ok((Wavefunction { amplitudes, time: meta.time }, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::{build_anderson_chain, build_delta_chain};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn grid_times() {
        let p = EvolutionPlan::new(1.0, 0.25);
        assert_eq!(p.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let p = EvolutionPlan::new(1.0, 0.3);
        assert_eq!(p.times().last().copied(), Some(1.0));
        assert_eq!(EvolutionPlan::new(0.0, 0.1).times(), vec![0.0]);
        assert!(EvolutionPlan::new(1.0, 0.0).validate().is_err());
        assert!(EvolutionPlan::new(1.0, 0.1).with_start(2.0).validate().is_err());
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let h = SparseOperator::zeros(3);
        let psi = Wavefunction::new(vec![c(0.6), C64::new(0.0, 0.8), c(0.0)]);
        for method in [Method::Dense, Method::Krylov] {
            let out = evolve(&h, &psi, &EvolutionPlan::new(2.0, 0.5).with_method(method)).unwrap();
            assert!(out.iter().all(|w| w.amplitudes == psi.amplitudes));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let nh = SparseOperator::from_triplets(2, [(0, 1, c(1.0))]).unwrap();
        let psi = Wavefunction::basis_state(2, 0);
        assert!(matches!(evolve(&nh, &psi, &EvolutionPlan::new(1.0, 0.1)), Err(Error::NotHermitian)));
        let h = build_delta_chain(1, 0.0).unwrap();
        assert!(evolve(&h, &psi, &EvolutionPlan::new(1.0, 0.1)).is_err());
        let unnormalized = Wavefunction::new(vec![c(1.0), c(1.0), c(0.0)]);
        assert!(evolve(&h, &unnormalized, &EvolutionPlan::new(1.0, 0.1)).is_err());
    }

    #[test]
    fn two_level_hopping() {
        let h = SparseOperator::from_triplets(2, [(0, 1, c(-1.0)), (1, 0, c(-1.0))]).unwrap();
        let e = eigensolve(&h, EigenMode::Full).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
        assert!(e.max_residual(&h) < 1e-12);
        // Rabi oscillation: population returns to the first site as cos^2 t.
        let psi = Wavefunction::basis_state(2, 0);
        for method in [Method::Dense, Method::Krylov] {
            let out = evolve(&h, &psi, &EvolutionPlan::new(1.0, 0.5).with_method(method)).unwrap();
            for w in &out {
                assert!((w.amplitudes[0].norm_sqr() - w.time.cos().powi(2)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn extremal_matches_full() {
        let h = build_anderson_chain(40).unwrap();
        let full = eigensolve(&h, EigenMode::Full).unwrap();
        let ext = eigensolve(&h, EigenMode::Extremal(2)).unwrap();
        let mut want = [full.values[0], *full.values.last().unwrap()];
        want.sort_by(|a, b| a.total_cmp(b));
        let mut got = ext.values.clone();
        got.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in want.iter().zip(&got) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(ext.max_residual(&h) <= 1e-8);
    }

    #[test]
    fn phase_convention() {
        let mut v = vec![C64::new(0.0, -0.5), C64::new(0.0, 0.1)];
        fix_phase(&mut v);
        assert!((v[0] - c(0.5)).norm() < 1e-15);
        assert!((v[1] - c(-0.1)).norm() < 1e-15);
    }

    #[test]
    fn krylov_time_reversal_and_norm() {
        let h = build_delta_chain(60, 2.0).unwrap();
        let psi = Wavefunction::basis_state(h.dim(), 40);
        let k = KrylovPropagator::new(&h, 30, 1e-9).unwrap();
        let fwd = k.propagate(&psi.amplitudes, 15.0);
        assert!((norm(&fwd) - 1.0).abs() < 1e-9);
        let back = k.propagate(&fwd, -15.0);
        let err = back.iter().zip(&psi.amplitudes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn checkpoint_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let basis = crate::fock::enumerate_basis(3, 1, crate::fock::Boundary::Open).unwrap();
        let mut psi = Wavefunction::new(vec![C64::new(0.5, -0.5), c(0.0), c(0.5), c(0.0), C64::new(0.0, 0.5), c(0.0)]);
        psi.time = 1.25;
        let stem = dir.path().join("psi");
        write_checkpoint(&stem, &psi, &basis, "single atom").unwrap();
        let (back, meta) = read_checkpoint(&stem).unwrap();
        assert_eq!(back, psi);
        assert_eq!(meta.dim, 6);
        assert_eq!(meta.atoms, Some(1));
        assert_eq!(std::fs::metadata(stem.with_extension("bin")).unwrap().len(), 96);
    }
}
