//! Closed-form results for the three-atom bound states and for scattering
//! off a single impurity in a tight-binding chain.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fock::{Basis, SignMode};
use crate::hamiltonians::{restricted, Effective, ModelParams, VirtualChain, VirtualSite};
use crate::operator::SparseOperator;
use crate::propagator::{residual, Wavefunction};
use crate::quadrature::integrate;
use crate::Boundary;

/// Decay constant per virtual site, `sqrt(1 + sqrt 2)`.
pub fn falloff() -> f64 {
    (1.0 + SQRT_2).sqrt()
}

/// Bound-state energy `sqrt(2) b = sqrt(2 (1 + sqrt 2))` in units of `J`.
pub fn bound_energy() -> f64 {
    SQRT_2 * falloff()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundStateConstants {
    pub b: f64,
    pub energy: f64,
    /// Normalization of the bound states on an infinite chain.
    pub norm: f64,
    /// `|<3-tuplet|phi>|^2` on an infinite chain.
    pub overlap: f64,
    /// Population of the three central sites in either bound state.
    pub n_init_bound: f64,
    /// Long-time population of the three initial sites for a 3-tuplet.
    pub n_init_triplet: f64,
}

impl BoundStateConstants {
    pub fn new() -> Self {
        BoundStateConstants {
            b: falloff(),
            energy: bound_energy(),
            norm: 1.0 / (2.0 * SQRT_2).sqrt(),
            overlap: 1.0 / (2.0 * SQRT_2),
            n_init_bound: 2.0 + 1.0 / SQRT_2,
            n_init_triplet: 1.5 + 1.0 / SQRT_2,
        }
    }
}

impl Default for BoundStateConstants {
    fn default() -> Self {
        Self::new()
    }
}

/// Coefficients of the symmetric bound-state ansatz
/// `A|3> + B(|stuck_l> + |stuck_r>) + D sum_j (-1)^j b^(1-2j) |d_j> + S sum_j (-1)^j b^(-2j) |s_j>`,
/// where `d_j` holds a doublon `j` sites from the centre and `s_j` an up pair
/// starting `j` sites out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnsatzParams {
    pub a: f64,
    pub b_weight: f64,
    pub d: f64,
    pub s: f64,
    pub b: f64,
}

impl AnsatzParams {
    /// The two exact solutions, `sign = +1` for energy `+E` and `-1` for `-E`.
    pub fn bound(sign: f64) -> Self {
        let b = falloff();
        AnsatzParams { a: sign, b_weight: 1.0 / (SQRT_2 * b), d: 1.0, s: sign, b }
    }

    pub fn with_falloff(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    /// Amplitudes on the uniform Anderson chain (all links `-1`), before
    /// normalization.
    pub fn chain_amplitudes(&self, half_length: usize) -> Vec<C64> {
        let idx = |s| crate::hamiltonians::virtual_index(half_length, s);
        let mut v = vec![C64::new(0.0, 0.0); 2 * half_length + 3];
        // The alternating signs of the ansatz turn into uniform ones on the
        // chain: d_j picks up -(-1)^j, s_j picks up (-1)^j, the stuck states -1.
        v[idx(VirtualSite::Chain(0))] = C64::new(self.a, 0.0);
        v[idx(VirtualSite::ImpurityLeft)] = C64::new(-self.b_weight, 0.0);
        v[idx(VirtualSite::ImpurityRight)] = C64::new(-self.b_weight, 0.0);
        for m in 1..=half_length as i64 {
            let amp = if m % 2 == 1 { -self.d } else { self.s } * self.b.powi(-(m as i32));
            v[idx(VirtualSite::Chain(m))] = C64::new(amp, 0.0);
            v[idx(VirtualSite::Chain(-m))] = C64::new(amp, 0.0);
        }
        v
    }
}

/// Reachable subspace and effective Hamiltonian of a 3-tuplet centred on an
/// open chain with `padding` empty sites on either side.
#[derive(Debug, Clone)]
pub struct TripletProblem {
    pub padding: usize,
    pub chain: VirtualChain,
    pub basis: Basis,
    pub hamiltonian: SparseOperator,
}

impl TripletProblem {
    pub fn new(padding: usize, signs: SignMode) -> Result<Self> {
        if padding < 1 {
            return Err(Error::Parameter("padding must be at least 1".into()));
        }
        let sites = 2 * padding + 3;
        let chain = VirtualChain::three_tuplet(sites, signs)?;
        let model = Effective(ModelParams::new(sites, Boundary::Open).with_signs(signs));
        let (basis, hamiltonian) = restricted(&model, &[chain.state(VirtualSite::Chain(0))])?;
        Ok(TripletProblem { padding, chain, basis, hamiltonian })
    }

    pub fn sites(&self) -> usize {
        self.chain.sites()
    }

    /// The three initially occupied sites.
    pub fn initial_sites(&self) -> [usize; 3] {
        let c = self.chain.center();
        [c - 1, c, c + 1]
    }

    pub fn tuplet(&self) -> Result<Wavefunction> {
        Wavefunction::product(&self.basis, &self.chain.state(VirtualSite::Chain(0)))
    }

    /// Normalized ansatz vector over [`Self::basis`].
    pub fn ansatz(&self, params: &AnsatzParams) -> Result<Wavefunction> {
        let v = params.chain_amplitudes(self.chain.half_length());
        Wavefunction::new(self.chain.to_fock(&v, &self.basis)?).normalized()
    }
}

#[derive(Debug, Clone)]
pub struct TripletBoundState {
    pub problem: TripletProblem,
    pub state: Wavefunction,
    pub energy: f64,
}

impl TripletBoundState {
    /// `||(H - E) phi||`.
    pub fn residual(&self) -> f64 {
        residual(&self.problem.hamiltonian, &self.state.amplitudes, self.energy)
    }
}

/// The analytic bound state with energy `sign * E` for `padding` empty sites
/// on either side of the 3-tuplet.
pub fn triplet_bound_state(padding: usize, sign: f64) -> Result<TripletBoundState> {
    triplet_bound_state_with(padding, sign, &AnsatzParams::bound(sign.signum()), SignMode::Fermionic)
}

pub fn triplet_bound_state_with(
    padding: usize,
    sign: f64,
    params: &AnsatzParams,
    signs: SignMode,
) -> Result<TripletBoundState> {
    if padding < 2 {
        return Err(Error::Parameter(format!("bound state needs padding of at least 2, got {padding}")));
    }
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::Parameter(format!("branch sign must be +1 or -1, got {sign}")));
    }
    let problem = TripletProblem::new(padding, signs)?;
    let state = problem.ansatz(params)?;
    Ok(TripletBoundState { problem, state, energy: sign * bound_energy() })
}

/// `sum_k w_k n_k + (1 - sum_k w_k) * 1` for bound channels of weight `w_k`
/// holding `n_k` atoms near the origin; the remainder leaves one orphan behind.
pub fn predicted_localized_population(channels: &[(f64, f64)]) -> f64 {
    let weight: f64 = channels.iter().map(|c| c.0).sum();
    channels.iter().map(|(w, n)| w * n).sum::<f64>() + (1.0 - weight)
}

/// `3/2 + 1/sqrt(2)` from two bound channels.
pub fn predicted_triplet_population() -> f64 {
    let c = BoundStateConstants::new();
    predicted_localized_population(&[(c.overlap, c.n_init_bound), (c.overlap, c.n_init_bound)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transmission {
    pub value: f64,
    /// `k` sits on a band edge, where the limit value is returned.
    pub band_edge: bool,
}

/// Transmission probability `1 / |1 - U G_0(0,0;e)|^2 = 1 / (1 + U^2 / (4 sin^2 k))`
/// through a single site of depth `depth` for a particle of quasimomentum `k`.
pub fn transmission_at_k(k: f64, depth: f64) -> Transmission {
    let s2 = k.sin().powi(2);
    if s2 < 1e-30 {
        return Transmission { value: if depth == 0.0 { 1.0 } else { 0.0 }, band_edge: true };
    }
    Transmission { value: 1.0 / (1.0 + depth * depth / (4.0 * s2)), band_edge: false }
}

/// Average of [`transmission_at_k`] over the Brillouin zone.
pub fn transmission_total(depth: f64) -> Result<f64> {
    let r = integrate(|k| transmission_at_k(k, depth).value, 0.0, PI, 1e-10)?;
    Ok(r.value / PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{density, overlap};

    #[test]
    fn constants() {
        let c = BoundStateConstants::new();
        assert!((c.energy - (2.0 * (1.0 + SQRT_2)).sqrt()).abs() < 1e-15);
        assert!((c.energy - 2.197368).abs() < 1e-6);
        assert!((c.norm.powi(2) - c.overlap).abs() < 1e-15);
        assert!((predicted_triplet_population() - c.n_init_triplet).abs() < 1e-14);
        assert_eq!(predicted_localized_population(&[]), 1.0);
        assert!((predicted_localized_population(&[(1.0, c.n_init_bound)]) - c.n_init_bound).abs() < 1e-15);
    }

    #[test]
    fn residual_is_exponentially_small() {
        let b = falloff();
        for pad in [2, 4, 8, 12] {
            for sign in [1.0, -1.0] {
                let s = triplet_bound_state(pad, sign).unwrap();
                assert!(s.residual() <= 10.0 * b.powi(-2 * pad as i32), "pad {pad} sign {sign}: {}", s.residual());
            }
        }
    }

    #[test]
    fn residual_decay_rate() {
        let pts: Vec<(f64, f64)> = (4..=14)
            .map(|p| (p as f64, triplet_bound_state(p, 1.0).unwrap().residual().ln()))
            .collect();
        let n = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / n, sy / n);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope + 2.0 * falloff().ln()).abs() < 0.02, "{slope}");
    }

    #[test]
    fn overlaps_and_density() {
        let plus = triplet_bound_state(16, 1.0).unwrap();
        let minus = triplet_bound_state(16, -1.0).unwrap();
        let tuplet = plus.problem.tuplet().unwrap();
        for s in [&plus, &minus] {
            let p = overlap(&tuplet, &s.state).unwrap().1;
            assert!((p - 0.35355).abs() < 1e-4, "{p}");
            let n = density(&s.state, &s.problem.basis).unwrap().within(&s.problem.initial_sites());
            assert!((n - (2.0 + 1.0 / SQRT_2)).abs() < 1e-6, "{n}");
        }
        assert!(overlap(&plus.state, &minus.state).unwrap().1.sqrt() <= 1e-3);
    }

    #[test]
    fn hardcore_boson_frame_gives_same_energy() {
        let s = triplet_bound_state_with(6, -1.0, &AnsatzParams::bound(-1.0), SignMode::HardcoreBoson).unwrap();
        assert!(s.residual() <= 10.0 * falloff().powi(-12));
    }

    #[test]
    fn wrong_falloff_breaks_the_eigenstate() {
        let p = AnsatzParams::bound(1.0).with_falloff(falloff() * 1.01);
        let s = triplet_bound_state_with(10, 1.0, &p, SignMode::Fermionic).unwrap();
        assert!(s.residual() > 1e-3);
        assert!(triplet_bound_state(1, 1.0).is_err());
        assert!(triplet_bound_state(4, 0.5).is_err());
    }

    #[test]
    fn transmission() {
        assert!((transmission_at_k(PI / 2.0, 2.0).value - 0.5).abs() < 1e-15);
        for k in [0.1, 0.7, 1.3, 2.9] {
            assert_eq!(transmission_at_k(k, 0.0).value, 1.0);
            let t = transmission_at_k(k, 2.0).value;
            let c = k.cos();
            assert!((t - 1.0 / (1.0 + 1.0 / (1.0 - c * c))).abs() < 1e-12);
            assert!((t - transmission_at_k(PI - k, 2.0).value).abs() < 1e-12);
        }
        let edge = transmission_at_k(0.0, 2.0);
        assert!(edge.band_edge && edge.value == 0.0);
        assert!(transmission_at_k(1e-8, 2.0).value < 1e-15);
        assert!((transmission_total(2.0).unwrap() - (1.0 - 1.0 / SQRT_2)).abs() < 1e-9);
        assert!((transmission_total(0.0).unwrap() - 1.0).abs() < 1e-12);
        let mut last = 1.0;
        for u in [0.5, 1.0, 2.0, 5.0, 20.0, 100.0] {
            let t = transmission_total(u).unwrap();
            assert!(t < last);
            last = t;
        }
        assert!(last < 0.02);
    }
}
