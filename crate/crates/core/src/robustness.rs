//! Agreement between the gauged Fermi-Hubbard model and its resonant limit:
//! doublon-error sweeps over `U/J` and the flux error, and the steady-state
//! doublon response to a detuned drive.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{parse_loadout, Boundary, FockState};
use crate::hamiltonians::{restricted, Effective, FluxError, Gauged, Model, ModelParams};
use crate::observables::{doublon_error, doublon_number, TimeSeries, DOUBLON_FLOOR};
use crate::propagator::{evolve_with, EvolutionPlan, Method, Wavefunction};

/// Eight periodic sites, vacancies on sites 1 and 4.
pub const LOADOUT: &str = "u.uu.uuu";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessSetup {
    pub loadout: String,
    #[serde(default = "periodic")]
    pub boundary: Boundary,
    pub u_over_j: f64,
    pub t_end: f64,
    pub dt: f64,
}

fn periodic() -> Boundary {
    Boundary::Periodic
}

impl Default for RobustnessSetup {
    fn default() -> Self {
        RobustnessSetup { loadout: LOADOUT.into(), boundary: Boundary::Periodic, u_over_j: 200.0, t_end: 10.0, dt: 0.05 }
    }
}

impl RobustnessSetup {
    pub fn with_u(mut self, u: f64) -> Self {
        self.u_over_j = u;
        self
    }

    pub fn seed(&self) -> Result<FockState> {
        parse_loadout(&self.loadout)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let seed = self.seed()?;
        if !(self.t_end > 0.0 && self.dt > 0.0) {
            return Err(Error::Parameter("robustness runs need positive t_end and dt".into()));
        }
        Ok(ModelParams::new(seed.sites(), self.boundary).resonant(self.u_over_j))
    }

    fn plan(&self) -> EvolutionPlan {
        EvolutionPlan::new(self.t_end, self.dt).with_method(Method::Krylov)
    }
}

/// Doublon number per site along `plan`, evolving `seed` within its
/// reachable subspace under `model`.
pub fn doublon_series<M: Model + ?Sized>(model: &M, seed: &FockState, plan: &EvolutionPlan) -> Result<TimeSeries> {
    let (basis, h) = restricted(model, &[*seed])?;
    let psi0 = Wavefunction::product(&basis, seed)?;
    let (mut times, mut values) = (Vec::new(), Vec::new());
    evolve_with(&h, &psi0, plan, |psi| {
        times.push(psi.time);
        values.push(doublon_number(psi, &basis)?);
        Ok(())
    })?;
    TimeSeries::new("doublon", times, values)
}

/// Root-mean-square relative doublon error of the gauged model (with the given
/// flux error) against the resonant limit over `[0, t_end]`.
pub fn model_error(setup: &RobustnessSetup, delta_phi: f64) -> Result<f64> {
    let seed = setup.seed()?;
    let params = setup.params()?;
    let plan = setup.plan();
    let ideal = doublon_series(&Effective(params.clone()), &seed, &plan)?;
    let full = if delta_phi == 0.0 {
        doublon_series(&Gauged(params), &seed, &plan)?
    } else {
        doublon_series(&FluxError(params.with_flux_error(delta_phi)), &seed, &plan)?
    };
    doublon_error(&full, &ideal, setup.t_end, DOUBLON_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub result: f64,
}

/// `model_error` at each `U/J` with zero flux error.
pub fn interaction_sweep(setup: &RobustnessSetup, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    grid.par_iter()
        .map(|&u| Ok(SweepPoint { value: u, result: model_error(&setup.clone().with_u(u), 0.0)? }))
        .collect()
}

/// `model_error` at each flux error.
pub fn flux_sweep(setup: &RobustnessSetup, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    grid.par_iter().map(|&dp| Ok(SweepPoint { value: dp, result: model_error(setup, dp)? })).collect()
}

/// Mean doublon number over `window` for the gauged model with
/// `Omega = U - detuning`, evolved to the end of the window.
pub fn steady_doublon(setup: &RobustnessSetup, detuning: f64, window: (f64, f64)) -> Result<f64> {
    let seed = setup.seed()?;
    let params = setup.params()?.with_detuning(detuning);
    let plan = EvolutionPlan { t_end: window.1, ..setup.plan() };
    let series = doublon_series(&Gauged(params), &seed, &plan)?;
    series.mean_over(window.0, window.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub amplitude: f64,
    pub width: f64,
    pub rms_residual: f64,
}

impl LorentzianFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude / (1.0 + (x / self.width).powi(2))
    }
}

/// Least-squares fit of `a / (1 + (x / w)^2)` by Levenberg-Marquardt.
pub fn fit_lorentzian(x: &[f64], y: &[f64]) -> Result<LorentzianFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Parameter("Lorentzian fit needs at least three (x, y) pairs".into()));
    }
    let model = |a: f64, w: f64, xi: f64| a / (1.0 + (xi / w).powi(2));
    let cost = |a: f64, w: f64| x.iter().zip(y).map(|(&xi, &yi)| (model(a, w, xi) - yi).powi(2)).sum::<f64>();
    // Start from the peak height and the half-maximum crossing.
    let (peak, _) = y.iter().zip(x).fold((f64::MIN, 0.0), |m, (&yi, &xi)| if yi > m.0 { (yi, xi) } else { m });
    let half = x
        .iter()
        .zip(y)
        .filter(|(_, &yi)| yi <= 0.5 * peak)
        .map(|(&xi, _)| xi.abs())
        .fold(f64::MAX, f64::min);
    let spread = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let (mut a, mut w) = (peak, if half.is_finite() && half < f64::MAX { half } else { spread.max(1.0) });
    let mut lambda = 1e-3;
    let mut c = cost(a, w);
    for _ in 0..500 {
        let (mut jtj, mut jtr) = ([[0.0; 2]; 2], [0.0; 2]);
        for (&xi, &yi) in x.iter().zip(y) {
            let q = 1.0 + (xi / w).powi(2);
            let r = model(a, w, xi) - yi;
            let g = [1.0 / q, 2.0 * a * xi * xi / (w.powi(3) * q * q)];
            for i in 0..2 {
                jtr[i] += g[i] * r;
                for j in 0..2 {
                    jtj[i][j] += g[i] * g[j];
                }
            }
        }
        let m = [[jtj[0][0] * (1.0 + lambda), jtj[0][1]], [jtj[1][0], jtj[1][1] * (1.0 + lambda)]];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let da = -(m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det;
        let dw = -(m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det;
        let (na, nw) = (a + da, w + dw);
        let nc = if nw > 0.0 { cost(na, nw) } else { f64::INFINITY };
        if nc < c {
            let converged = (c - nc) <= 1e-15 * c.max(1e-300) || (da.abs() < 1e-12 * a.abs() && dw.abs() < 1e-12 * w);
            a = na;
            w = nw;
            c = nc;
            lambda = (lambda * 0.3).max(1e-12);
            if converged {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    if !(a.is_finite() && w.is_finite() && w > 0.0) {
        return Err(Error::NoConvergence { iterations: 500, residual: c });
    }
    Ok(LorentzianFit { amplitude: a, width: w, rms_residual: (c / x.len() as f64).sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetuningSweep {
    pub u_over_j: f64,
    pub window: (f64, f64),
    pub reference: f64,
    pub points: Vec<SweepPoint>,
    pub fit: Option<LorentzianFit>,
}

/// Steady-state doublon number at each detuning, normalized by the zero
/// detuning value, with a Lorentzian fit when one converges.
pub fn detuning_sweep(setup: &RobustnessSetup, grid: &[f64], window: (f64, f64)) -> Result<DetuningSweep> {
    if grid.is_empty() {
        return Err(Error::Parameter("detuning grid is empty".into()));
    }
    let mut all: Vec<f64> = grid.to_vec();
    if !all.contains(&0.0) {
        all.push(0.0);
    }
    let raw: Vec<(f64, f64)> = all
        .par_iter()
        .map(|&d| Ok((d, steady_doublon(setup, d, window)?)))
        .collect::<Result<_>>()?;
    let reference = raw.iter().find(|(d, _)| *d == 0.0).unwrap().1;
    if reference <= 0.0 {
        return Err(Error::UndefinedMetric("no doublons at zero detuning".into()));
    }
    let points: Vec<SweepPoint> = grid
        .iter()
        .map(|&d| SweepPoint { value: d, result: raw.iter().find(|(x, _)| *x == d).unwrap().1 / reference })
        .collect();
    let xs: Vec<f64> = points.iter().map(|p| p.value).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.result).collect();
    let fit = fit_lorentzian(&xs, &ys).ok();
    Ok(DetuningSweep { u_over_j: setup.u_over_j, window, reference, points, fit })
}
