//! Collision of a mobile 2-tuplet with an orphan, and its single-particle
//! surrogate: one particle crossing a delta impurity on a tight-binding chain.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Boundary, FockState, SiteOccupation};
use crate::hamiltonians::{build_delta_chain, restricted, Effective, ModelParams};
use crate::observables::{transmitted, TimeSeries};
use crate::propagator::{evolve_with, EvolutionPlan, Wavefunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionSetup {
    pub sites: usize,
    pub orphan: usize,
    /// Sites between the orphan and the nearer atom of the incoming pair, plus one.
    pub gap: usize,
    pub t_end: f64,
    pub dt: f64,
}

impl Default for CollisionSetup {
    fn default() -> Self {
        CollisionSetup { sites: 41, orphan: 20, gap: 5, t_end: 25.0, dt: 0.25 }
    }
}

impl CollisionSetup {
    /// Up atoms on `orphan - gap - 1`, `orphan - gap` and `orphan`.
    pub fn initial_state(&self) -> Result<FockState> {
        if self.gap < 1 || self.orphan < self.gap + 1 || self.orphan >= self.sites {
            return Err(Error::Parameter(format!(
                "pair at gap {} does not fit left of the orphan at {} on {} sites",
                self.gap, self.orphan, self.sites
            )));
        }
        let mut s = FockState::vacuum(self.sites)?;
        for j in [self.orphan - self.gap - 1, self.orphan - self.gap, self.orphan] {
            s.set(j, SiteOccupation::Up);
        }
        Ok(s)
    }

    /// Starting position of the surrogate particle, counted in lattice sites
    /// from the impurity to the far atom of the pair.
    pub fn surrogate_start(&self) -> i64 {
        -(self.gap as i64 + 1)
    }

    fn plan(&self) -> EvolutionPlan {
        EvolutionPlan::new(self.t_end, self.dt)
    }
}

/// Population right of the orphan for the resonant three-atom problem on an
/// open chain.
pub fn collision_transmission(setup: &CollisionSetup) -> Result<TimeSeries> {
    let seed = setup.initial_state()?;
    let (basis, h) = restricted(&Effective(ModelParams::new(setup.sites, Boundary::Open)), &[seed])?;
    let psi0 = Wavefunction::product(&basis, &seed)?;
    let (mut times, mut values) = (Vec::new(), Vec::new());
    evolve_with(&h, &psi0, &setup.plan(), |psi| {
        times.push(psi.time);
        values.push(transmitted(psi, &basis, setup.orphan)?);
        Ok(())
    })?;
    TimeSeries::new("transmitted", times, values)
}

/// Twice the probability beyond the impurity of a particle started at
/// `m_init < 0` on a delta chain, read at chain time `t / 2` for each `t` in
/// `times`: the pair moves one site per two chain steps and carries two atoms.
pub fn surrogate_transmission(m_init: i64, depth: f64, times: &[f64]) -> Result<TimeSeries> {
    if m_init >= 0 {
        return Err(Error::Parameter(format!("surrogate must start left of the impurity, got m = {m_init}")));
    }
    let t_max = times.iter().copied().fold(0.0, f64::max);
    // Half-length well beyond the ballistic front at speed 2.
    let half = (m_init.unsigned_abs() as f64 + t_max + 20.0).ceil() as usize;
    let h = build_delta_chain(half, depth)?;
    let psi0 = Wavefunction::basis_state(h.dim(), (half as i64 + m_init) as usize);
    let mut values = Vec::with_capacity(times.len());
    let mut psi = psi0;
    let mut clock = 0.0;
    let krylov = crate::propagator::KrylovPropagator::new(&h, 30, 1e-10)?;
    for &t in times {
        let tau = 0.5 * t;
        if tau > clock {
            psi = Wavefunction { amplitudes: krylov.propagate(&psi.amplitudes, tau - clock), time: tau };
            clock = tau;
        }
        values.push(2.0 * psi.amplitudes[half + 1..].iter().map(|a| a.norm_sqr()).sum::<f64>());
    }
    TimeSeries::new("surrogate", times.to_vec(), values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollisionReport {
    pub setup: CollisionSetup,
    pub three_atom: TimeSeries,
    pub surrogate: TimeSeries,
    pub final_transmitted: f64,
    /// Largest pointwise gap once the surrogate wavefront has reached the impurity.
    pub max_deviation: f64,
    /// Largest pointwise gap over the whole run, rising edge included.
    pub max_deviation_all: f64,
    pub arrival: f64,
}

pub fn collision_report(setup: &CollisionSetup, depth: f64) -> Result<CollisionReport> {
    let three = collision_transmission(setup)?;
    let surrogate = surrogate_transmission(setup.surrogate_start(), depth, &three.times)?;
    let arrival = 2.0 * setup.surrogate_start().unsigned_abs() as f64;
    let (mut after, mut all) = (0.0f64, 0.0f64);
    for ((t, a), b) in three.times.iter().zip(&three.values).zip(&surrogate.values) {
        let d = (a - b).abs();
        all = all.max(d);
        if *t >= arrival {
            after = after.max(d);
        }
    }
    Ok(CollisionReport {
        setup: setup.clone(),
        final_transmitted: *three.values.last().unwrap(),
        three_atom: three,
        surrogate,
        max_deviation: after,
        max_deviation_all: all,
        arrival,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_state_layout() {
        let s = CollisionSetup { sites: 11, orphan: 7, gap: 3, ..Default::default() }.initial_state().unwrap();
        assert_eq!(s.to_string(), "...uu..u...");
        assert!(CollisionSetup { sites: 11, orphan: 2, gap: 3, ..Default::default() }.initial_state().is_err());
    }

    #[test]
    fn free_surrogate_splits_evenly() {
        // A site-localized start spreads symmetrically about m = -3, so just
        // under half ends up beyond the origin.
        let s = surrogate_transmission(-3, 0.0, &[0.0, 20.0, 40.0]).unwrap();
        assert_eq!(s.values[0], 0.0);
        assert!(s.values[1] < s.values[2] && s.values[2] < 1.0 && s.values[2] > 0.9, "{:?}", s.values);
    }

    #[test]
    fn nothing_transmitted_at_start() {
        let setup = CollisionSetup { t_end: 1.0, ..Default::default() };
        let r = collision_transmission(&setup).unwrap();
        assert_eq!(r.values[0], 0.0);
        assert!(r.values.iter().all(|v| *v < 1e-3));
    }
}
