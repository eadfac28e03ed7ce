//! Expectation values measured on wavefunctions over a Fock basis.

use std::io::Write;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::Basis;
use crate::propagator::Wavefunction;

/// Reference doublon numbers below this are left out of [`doublon_error`].
pub const DOUBLON_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityProfile {
    pub time: f64,
    pub up: Vec<f64>,
    pub down: Vec<f64>,
}

impl DensityProfile {
    pub fn sites(&self) -> usize {
        self.up.len()
    }

    pub fn total(&self) -> Vec<f64> {
        self.up.iter().zip(&self.down).map(|(u, d)| u + d).collect()
    }

    pub fn at(&self, site: usize) -> f64 {
        self.up[site] + self.down[site]
    }

    pub fn atoms(&self) -> f64 {
        self.up.iter().chain(&self.down).sum()
    }

    /// Total density strictly right of `j0`.
    pub fn right_of(&self, j0: usize) -> f64 {
        (j0 + 1..self.sites()).map(|j| self.at(j)).sum()
    }

    pub fn within(&self, sites: &[usize]) -> f64 {
        sites.iter().map(|&j| self.at(j)).sum()
    }
}

fn check(psi: &Wavefunction, basis: &Basis) -> Result<()> {
    if psi.dim() != basis.len() {
        return Err(Error::Dimension { expected: basis.len(), found: psi.dim() });
    }
    Ok(())
}

pub fn density(psi: &Wavefunction, basis: &Basis) -> Result<DensityProfile> {
    check(psi, basis)?;
    let l = basis.sites();
    let mut up = vec![0.0; l];
    let mut down = vec![0.0; l];
    for (s, a) in basis.states().iter().zip(&psi.amplitudes) {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let (mut u, mut d) = (s.up_mask(), s.down_mask());
        while u != 0 {
            up[u.trailing_zeros() as usize] += p;
            u &= u - 1;
        }
        while d != 0 {
            down[d.trailing_zeros() as usize] += p;
            d &= d - 1;
        }
    }
    Ok(DensityProfile { time: psi.time, up, down })
}

/// `sum_j <n_{j,up} n_{j,down}> / L`.
pub fn doublon_number(psi: &Wavefunction, basis: &Basis) -> Result<f64> {
    check(psi, basis)?;
    let total: f64 = basis
        .states()
        .iter()
        .zip(&psi.amplitudes)
        .map(|(s, a)| s.doublons() as f64 * a.norm_sqr())
        .sum();
    Ok(total / basis.sites() as f64)
}

/// Total density on sites `j > j0`.
pub fn transmitted(psi: &Wavefunction, basis: &Basis, j0: usize) -> Result<f64> {
    if j0 >= basis.sites() {
        return Err(Error::Parameter(format!("site {j0} outside a {}-site chain", basis.sites())));
    }
    Ok(density(psi, basis)?.right_of(j0))
}

/// Total density on the given sites.
pub fn initial_population(psi: &Wavefunction, basis: &Basis, sites: &[usize]) -> Result<f64> {
    if let Some(&j) = sites.iter().find(|&&j| j >= basis.sites()) {
        return Err(Error::Parameter(format!("site {j} outside a {}-site chain", basis.sites())));
    }
    Ok(density(psi, basis)?.within(sites))
}

/// `<a|b>` and its squared magnitude.
pub fn overlap(a: &Wavefunction, b: &Wavefunction) -> Result<(C64, f64)> {
    let z = a.inner(b)?;
    Ok((z, z.norm_sqr()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSeries {
    pub label: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(label: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension { expected: times.len(), found: values.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("times must be strictly increasing".into()));
        }
        Ok(TimeSeries { label: label.into(), times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Trapezoid-rule mean over `[t0, t1]`, using grid points inside the window.
    pub fn mean_over(&self, t0: f64, t1: f64) -> Result<f64> {
        let pts: Vec<(f64, f64)> = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12)
            .map(|(&t, &v)| (t, v))
            .collect();
        match pts.len() {
            0 => Err(Error::Parameter(format!("no samples in [{t0}, {t1}]"))),
            1 => Ok(pts[0].1),
            _ => {
                let area: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
                Ok(area / (pts.last().unwrap().0 - pts[0].0))
            }
        }
    }
}

/// Root-mean-square relative deviation of `series` from `ideal` over
/// `[0, t_end]`, by the trapezoid rule on the shared grid.
///
/// Grid points where `|ideal| < floor` are dropped together with the
/// intervals touching them, and the mean is taken over the remaining length.
pub fn doublon_error(series: &TimeSeries, ideal: &TimeSeries, t_end: f64, floor: f64) -> Result<f64> {
    if series.times != ideal.times {
        return Err(Error::Parameter("doublon series must share one time grid".into()));
    }
    if series.is_empty() || t_end > *series.times.last().unwrap() + 1e-12 {
        return Err(Error::Parameter(format!("end time {t_end} beyond the sampled range")));
    }
    let f: Vec<Option<f64>> = series
        .values
        .iter()
        .zip(&ideal.values)
        .map(|(&x, &y)| (y.abs() >= floor).then(|| ((x - y) / y).powi(2)))
        .collect();
    let mut area = 0.0;
    let mut length = 0.0;
    for k in 0..series.len() - 1 {
        let (t0, t1) = (series.times[k], series.times[k + 1]);
        if t1 > t_end + 1e-12 {
            break;
        }
        if let (Some(a), Some(b)) = (f[k], f[k + 1]) {
            area += 0.5 * (t1 - t0) * (a + b);
            length += t1 - t0;
        }
    }
    if length == 0.0 {
        return Err(Error::UndefinedMetric(format!(
            "reference doublon number below {floor} on every interval up to t = {t_end}"
        )));
    }
    Ok((area / length).sqrt())
}

/// Shortest round-trip decimal form of `x` after rounding to 12 significant digits.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap();
    if rounded == 0.0 {
        return "0".into();
    }
    rounded.to_string()
}

/// Writes `t,site,n_up,n_down,n_total` rows.
pub fn write_profiles_csv<W: Write>(mut w: W, profiles: &[DensityProfile]) -> Result<()> {
    writeln!(w, "t,site,n_up,n_down,n_total")?;
    for p in profiles {
        for j in 0..p.sites() {
            writeln!(
                w,
                "{},{j},{},{},{}",
                format_float(p.time),
                format_float(p.up[j]),
                format_float(p.down[j]),
                format_float(p.at(j))
            )?;
        }
    }
    Ok(())
}

/// Writes `t,value` rows.
pub fn write_series_csv<W: Write>(mut w: W, series: &TimeSeries) -> Result<()> {
    writeln!(w, "t,value")?;
    for (t, v) in series.times.iter().zip(&series.values) {
        writeln!(w, "{},{}", format_float(*t), format_float(*v))?;
    }
    Ok(())
}
