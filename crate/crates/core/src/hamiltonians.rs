//! Hamiltonian builders: lab frame, gauged frame, the resonant
//! density-dependent tunneling limit, the flux-error model, and the
//! single-particle virtual chains used for the three-atom problem.
//!
//! Energies are in units of the tunneling `J`; the builders take `J` from
//! [`ModelParams`] so it can be varied, but every shipped scenario uses `J = 1`.

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{enumerate_basis, explore, reachable_subspace, Basis, Boundary, FockState, Mode, SignMode, SiteOccupation, Spin};
use crate::operator::SparseOperator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub sites: usize,
    #[serde(default)]
    pub boundary: Boundary,
    /// Tunneling `J`.
    #[serde(default = "unit")]
    pub tunneling: f64,
    /// On-site repulsion `U`.
    #[serde(default)]
    pub interaction: f64,
    /// Rabi frequency `Omega` of the drive.
    #[serde(default)]
    pub drive: f64,
    /// Deviation `delta phi` of the laser flux from `pi`, in radians.
    #[serde(default)]
    pub flux_error: f64,
    #[serde(default)]
    pub signs: SignMode,
}

fn unit() -> f64 {
    1.0
}

impl ModelParams {
    /// `J = 1`, `U = Omega = 0`, no flux error, fermionic signs.
    pub fn new(sites: usize, boundary: Boundary) -> Self {
        ModelParams {
            sites,
            boundary,
            tunneling: 1.0,
            interaction: 0.0,
            drive: 0.0,
            flux_error: 0.0,
            signs: SignMode::Fermionic,
        }
    }

    /// Sets `U = Omega = u` (zero detuning).
    pub fn resonant(mut self, u: f64) -> Self {
        self.interaction = u;
        self.drive = u;
        self
    }

    pub fn with_interaction(mut self, u: f64) -> Self {
        self.interaction = u;
        self
    }

    pub fn with_drive(mut self, omega: f64) -> Self {
        self.drive = omega;
        self
    }

    /// Keeps `U` and sets `Omega = U - detuning`.
    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.drive = self.interaction - detuning;
        self
    }

    pub fn with_flux_error(mut self, delta_phi: f64) -> Self {
        self.flux_error = delta_phi;
        self
    }

    pub fn with_signs(mut self, signs: SignMode) -> Self {
        self.signs = signs;
        self
    }

    /// `delta Omega = U - Omega`.
    pub fn detuning(&self) -> f64 {
        self.interaction - self.drive
    }

    pub fn validate(&self) -> Result<()> {
        FockState::vacuum(self.sites)?;
        if !(self.tunneling > 0.0 && self.tunneling.is_finite()) {
            return Err(Error::Parameter(format!("tunneling must be positive, got {}", self.tunneling)));
        }
        for (name, v) in [("interaction", self.interaction), ("drive", self.drive), ("flux_error", self.flux_error)] {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Conserved charge of the resonant model: doublon count plus magnetization.
pub fn conserved_charge(s: &FockState) -> f64 {
    s.doublons() as f64 + (s.n_up() as f64 - s.n_down() as f64) / 2.0
}

/// A Hamiltonian that can be applied to one Fock state at a time.
pub trait Model: Sync {
    fn params(&self) -> &ModelParams;

    /// Pushes every nonzero `(target, <target|H|state>)` onto `out`. The same
    /// target may appear more than once; callers sum the contributions.
    fn apply(&self, state: &FockState, out: &mut Vec<(FockState, C64)>);
}

fn push(out: &mut Vec<(FockState, C64)>, hopped: Option<(FockState, f64)>, amplitude: C64) {
    if let Some((t, sign)) = hopped {
        out.push((t, amplitude * sign));
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Driven Fermi-Hubbard model in the lab frame. The `Up` slot of a
/// [`FockState`] holds the excited species `e` and the `Down` slot the ground
/// species `g`.
#[derive(Debug, Clone)]
pub struct LabFrame(pub ModelParams);

impl Model for LabFrame {
    fn params(&self) -> &ModelParams {
        &self.0
    }

    fn apply(&self, s: &FockState, out: &mut Vec<(FockState, C64)>) {
        let p = &self.0;
        let diag = p.interaction * s.doublons() as f64;
        if diag != 0.0 {
            out.push((*s, re(diag)));
        }
        for (a, b, twist) in p.boundary.bonds(p.sites) {
            for (i, j) in [(a, b), (b, a)] {
                for spin in [Spin::Up, Spin::Down] {
                    push(out, s.hop(Mode::new(i, spin), Mode::new(j, spin), p.signs), re(-p.tunneling * twist));
                }
            }
        }
        if p.drive != 0.0 {
            for j in 0..p.sites {
                let rabi = if j % 2 == 0 { p.drive / 2.0 } else { -p.drive / 2.0 };
                push(out, s.hop(Mode::down(j), Mode::up(j), p.signs), re(rabi));
                push(out, s.hop(Mode::up(j), Mode::down(j), p.signs), re(rabi));
            }
        }
    }
}

fn field_and_interaction(p: &ModelParams, s: &FockState) -> f64 {
    p.interaction * s.doublons() as f64 + p.drive / 2.0 * (s.n_up() as f64 - s.n_down() as f64)
}

/// Fermi-Hubbard model in the rotated frame where the drive is a uniform
/// field `(Omega / 2)(n_up - n_down)` and every hop flips the spin.
#[derive(Debug, Clone)]
pub struct Gauged(pub ModelParams);

impl Model for Gauged {
    fn params(&self) -> &ModelParams {
        &self.0
    }

    fn apply(&self, s: &FockState, out: &mut Vec<(FockState, C64)>) {
        let p = &self.0;
        let diag = field_and_interaction(p, s);
        if diag != 0.0 {
            out.push((*s, re(diag)));
        }
        for (a, b, twist) in p.boundary.bonds(p.sites) {
            let amp = re(-p.tunneling * twist);
            for (i, j) in [(a, b), (b, a)] {
                push(out, s.hop(Mode::up(i), Mode::down(j), p.signs), amp);
                push(out, s.hop(Mode::down(i), Mode::up(j), p.signs), amp);
            }
        }
    }
}

/// Resonant `U = Omega -> infinity` limit: an up atom may hop onto a
/// neighbouring site that already holds an up atom, turning into a down atom
/// and forming a doublon, provided its own site holds no down atom; plus the
/// reverse process. No diagonal part.
#[derive(Debug, Clone)]
pub struct Effective(pub ModelParams);

impl Model for Effective {
    fn params(&self) -> &ModelParams {
        &self.0
    }

    fn apply(&self, s: &FockState, out: &mut Vec<(FockState, C64)>) {
        let p = &self.0;
        for (a, b, twist) in p.boundary.bonds(p.sites) {
            let amp = re(-p.tunneling * twist);
            // `dest` keeps its up atom throughout; `origin` must hold no down atom.
            for (dest, origin) in [(a, b), (b, a)] {
                if s.n_up_at(dest) == 1 && s.n_down_at(origin) == 0 {
                    push(out, s.hop(Mode::up(origin), Mode::down(dest), p.signs), amp);
                    push(out, s.hop(Mode::down(dest), Mode::up(origin), p.signs), amp);
                }
            }
        }
    }
}

/// Gauged model for a flux `pi + delta phi`: spin-conserving hops appear with
/// amplitude `-(J/2)(1 - e^{i delta phi})` and spin flips with
/// `-(J/2)(1 + e^{i delta phi})` for a step along the chain direction, complex
/// conjugated against it. Reduces to [`Gauged`] at `delta phi = 0`.
#[derive(Debug, Clone)]
pub struct FluxError(pub ModelParams);

impl Model for FluxError {
    fn params(&self) -> &ModelParams {
        &self.0
    }

    fn apply(&self, s: &FockState, out: &mut Vec<(FockState, C64)>) {
        let p = &self.0;
        let diag = field_and_interaction(p, s);
        if diag != 0.0 {
            out.push((*s, re(diag)));
        }
        let phase = C64::from_polar(1.0, p.flux_error);
        let one = re(1.0);
        for (a, b, twist) in p.boundary.bonds(p.sites) {
            let same = (one - phase) * (-0.5 * p.tunneling * twist);
            let flip = (one + phase) * (-0.5 * p.tunneling * twist);
            for (i, j, conj) in [(a, b, false), (b, a, true)] {
                let (same, flip) = if conj { (same.conj(), flip.conj()) } else { (same, flip) };
                if same != C64::new(0.0, 0.0) {
                    push(out, s.hop(Mode::up(i), Mode::up(j), p.signs), same);
                    push(out, s.hop(Mode::down(i), Mode::down(j), p.signs), same);
                }
                if flip != C64::new(0.0, 0.0) {
                    push(out, s.hop(Mode::up(i), Mode::down(j), p.signs), flip);
                    push(out, s.hop(Mode::down(i), Mode::up(j), p.signs), flip);
                }
            }
        }
    }
}

/// Assembles `model` over `basis`. Fails if the model couples a basis state to
/// a state outside the basis.
pub fn build<M: Model + ?Sized>(model: &M, basis: &Basis) -> Result<SparseOperator> {
    model.params().validate()?;
    if model.params().sites != basis.sites() {
        return Err(Error::Dimension { expected: model.params().sites, found: basis.sites() });
    }
    let columns: Vec<Result<Vec<(usize, usize, C64)>>> = basis
        .states()
        .par_iter()
        .enumerate()
        .map(|(col, s)| {
            let mut out = Vec::new();
            model.apply(s, &mut out);
            out.into_iter()
                .map(|(t, v)| {
                    let row = basis.index_of(&t).ok_or_else(|| {
                        Error::Parameter(format!("state {s} couples to {t}, which is outside the basis"))
                    })?;
                    Ok((row, col, v))
                })
                .collect()
        })
        .collect();
    let mut triplets = Vec::new();
    for c in columns {
        triplets.extend(c?);
    }
    SparseOperator::from_triplets(basis.len(), triplets)
}

pub fn build_lab_frame(params: &ModelParams, basis: &Basis) -> Result<SparseOperator> {
    build(&LabFrame(params.clone()), basis)
}

pub fn build_gauged(params: &ModelParams, basis: &Basis) -> Result<SparseOperator> {
    build(&Gauged(params.clone()), basis)
}

pub fn build_effective(params: &ModelParams, basis: &Basis) -> Result<SparseOperator> {
    build(&Effective(params.clone()), basis)
}

pub fn build_flux_error(params: &ModelParams, basis: &Basis) -> Result<SparseOperator> {
    build(&FluxError(params.clone()), basis)
}

/// States connected to `seeds` by `model`, found without enumerating the full sector.
pub fn reachable_states<M: Model + ?Sized>(model: &M, seeds: &[FockState]) -> Result<Basis> {
    let p = model.params();
    p.validate()?;
    if let Some(s) = seeds.iter().find(|s| s.sites() != p.sites) {
        return Err(Error::Parameter(format!("seed {s} does not have {} sites", p.sites)));
    }
    let mut buf = Vec::new();
    let states = explore(seeds, |s| {
        buf.clear();
        model.apply(s, &mut buf);
        buf.iter().filter(|(t, v)| t != s && v.norm() != 0.0).map(|(t, _)| *t).collect()
    });
    Basis::from_states(p.sites, p.boundary, states)
}

/// Reachable basis of `seeds` together with the model restricted to it.
pub fn restricted<M: Model + ?Sized>(model: &M, seeds: &[FockState]) -> Result<(Basis, SparseOperator)> {
    let basis = reachable_states(model, seeds)?;
    let h = build(model, &basis)?;
    Ok((basis, h))
}

/// Position on the virtual chain of the three-atom problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VirtualSite {
    /// Chain site `m`; `0` is the 3-tuplet, negative `m` the left-moving pair.
    Chain(i64),
    /// Stuck state with the doublon on the centre and the orphan to its left.
    ImpurityLeft,
    ImpurityRight,
}

/// Index layout shared by [`build_anderson_chain`] and [`VirtualChain`]:
/// chain sites `-M..=M` first, then the left and right impurity.
pub fn virtual_index(half_length: usize, site: VirtualSite) -> usize {
    let m = half_length as i64;
    match site {
        VirtualSite::Chain(k) => {
            assert!(k.abs() <= m, "virtual site {k} outside -{m}..={m}");
            (k + m) as usize
        }
        VirtualSite::ImpurityLeft => 2 * half_length + 1,
        VirtualSite::ImpurityRight => 2 * half_length + 2,
    }
}

/// Tight-binding chain of `2M + 1` sites with hopping `-1` plus two impurity
/// sites hanging off the centre with the same hopping.
pub fn build_anderson_chain(half_length: usize) -> Result<SparseOperator> {
    if half_length == 0 {
        return Err(Error::Parameter("half-chain length must be at least 1".into()));
    }
    let m = half_length as i64;
    let idx = |s| virtual_index(half_length, s);
    let mut triplets = Vec::new();
    let mut link = |a: usize, b: usize| {
        triplets.push((a, b, re(-1.0)));
        triplets.push((b, a, re(-1.0)));
    };
    for k in -m..m {
        link(idx(VirtualSite::Chain(k)), idx(VirtualSite::Chain(k + 1)));
    }
    link(idx(VirtualSite::Chain(0)), idx(VirtualSite::ImpurityLeft));
    link(idx(VirtualSite::Chain(0)), idx(VirtualSite::ImpurityRight));
    SparseOperator::from_triplets(2 * half_length + 3, triplets)
}

/// Tight-binding chain of `2M + 1` sites, hopping `-1`, on-site energy
/// `-depth` at the centre (index `M`).
pub fn build_delta_chain(half_length: usize, depth: f64) -> Result<SparseOperator> {
    if half_length == 0 {
        return Err(Error::Parameter("half-chain length must be at least 1".into()));
    }
    let dim = 2 * half_length + 1;
    let mut triplets = Vec::with_capacity(2 * dim);
    for k in 0..dim - 1 {
        triplets.push((k, k + 1, re(-1.0)));
        triplets.push((k + 1, k, re(-1.0)));
    }
    triplets.push((half_length, half_length, re(-depth)));
    SparseOperator::from_triplets(dim, triplets)
}

/// Relabeling of the three-atom states reachable from a centred 3-tuplet on
/// an open chain as sites of the Anderson chain.
///
/// Writing `c` for the centre site, chain site `m = 0` is the 3-tuplet;
/// `m = 2j - 1` puts a doublon on `c + j` with the orphan on `c - 1`, and
/// `m = 2j` puts up atoms on `c + j` and `c + j + 1` (mirror images for
/// negative `m`). The two impurities are the stuck states with a doublon on
/// `c` next to one orphan.
#[derive(Debug, Clone)]
pub struct VirtualChain {
    half_length: usize,
    center: usize,
    sites: usize,
    states: Vec<FockState>,
    /// `+-1` per virtual index such that the effective model equals
    /// `G P^T H_chain P G` with `G` this diagonal.
    gauge: Vec<f64>,
}

impl VirtualChain {
    /// Builds the mapping for an odd `sites >= 3` open chain, with gauge signs
    /// taken from the effective model with the given sign convention.
    pub fn three_tuplet(sites: usize, signs: SignMode) -> Result<Self> {
        if sites < 3 || sites.is_multiple_of(2) {
            return Err(Error::Parameter(format!("centred 3-tuplet needs an odd chain of at least 3 sites, got {sites}")));
        }
        FockState::vacuum(sites)?;
        let c = (sites - 1) / 2;
        let half_length = sites - 2;
        let dim = 2 * half_length + 3;
        let blank = FockState::vacuum(sites)?;
        let with = |occ: &[(usize, SiteOccupation)]| {
            let mut s = blank;
            for &(j, o) in occ {
                s.set(j, o);
            }
            s
        };
        use SiteOccupation::{Doublon as D, Up as U};
        let mut states = vec![blank; dim];
        let idx = |s| virtual_index(half_length, s);
        states[idx(VirtualSite::Chain(0))] = with(&[(c - 1, U), (c, U), (c + 1, U)]);
        states[idx(VirtualSite::ImpurityLeft)] = with(&[(c - 1, U), (c, D)]);
        states[idx(VirtualSite::ImpurityRight)] = with(&[(c, D), (c + 1, U)]);
        for m in 1..=half_length {
            let j = m.div_ceil(2);
            let (left, right) = if m % 2 == 1 {
                (with(&[(c - j, D), (c + 1, U)]), with(&[(c - 1, U), (c + j, D)]))
            } else {
                (with(&[(c - j - 1, U), (c - j, U), (c + 1, U)]), with(&[(c - 1, U), (c + j, U), (c + j + 1, U)]))
            };
            states[idx(VirtualSite::Chain(-(m as i64)))] = left;
            states[idx(VirtualSite::Chain(m as i64))] = right;
        }

        // Gauge signs along the tree of chain links, starting from the 3-tuplet.
        let model = Effective(ModelParams::new(sites, Boundary::Open).with_signs(signs));
        let element = |from: &FockState, to: &FockState| -> f64 {
            let mut out = Vec::new();
            model.apply(from, &mut out);
            out.iter().filter(|(t, _)| t == to).map(|(_, v)| v.re).sum()
        };
        let mut gauge = vec![0.0; dim];
        gauge[idx(VirtualSite::Chain(0))] = 1.0;
        let mut links = Vec::new();
        for dir in [-1i64, 1] {
            for m in 0..half_length as i64 {
                links.push((VirtualSite::Chain(dir * m), VirtualSite::Chain(dir * (m + 1))));
            }
        }
        links.push((VirtualSite::Chain(0), VirtualSite::ImpurityLeft));
        links.push((VirtualSite::Chain(0), VirtualSite::ImpurityRight));
        for (from, to) in links {
            let v = element(&states[idx(from)], &states[idx(to)]);
            if v == 0.0 {
                return Err(Error::Mapping(format!(
                    "no effective-model coupling between {} and {}",
                    states[idx(from)],
                    states[idx(to)]
                )));
            }
            // Chain links carry -1, so the gauge absorbs the sign of -v.
            gauge[idx(to)] = gauge[idx(from)] * (-v).signum();
        }
        Ok(VirtualChain { half_length, center: c, sites, states, gauge })
    }

    pub fn half_length(&self) -> usize {
        self.half_length
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn index(&self, site: VirtualSite) -> usize {
        virtual_index(self.half_length, site)
    }

    pub fn state(&self, site: VirtualSite) -> FockState {
        self.states[self.index(site)]
    }

    /// Fock states in virtual-index order.
    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn gauge(&self) -> &[f64] {
        &self.gauge
    }

    /// Maps a vector in virtual-index order to amplitudes over `basis`.
    pub fn to_fock(&self, virtual_amplitudes: &[C64], basis: &Basis) -> Result<Vec<C64>> {
        if virtual_amplitudes.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: virtual_amplitudes.len() });
        }
        let mut out = vec![C64::new(0.0, 0.0); basis.len()];
        for ((s, &g), &a) in self.states.iter().zip(&self.gauge).zip(virtual_amplitudes) {
            out[basis.require(s)?] = a * g;
        }
        Ok(out)
    }

    /// Largest element-wise difference between `G P^T chain P G` and
    /// `effective`, which must be expressed over `basis`.
    pub fn compare(&self, effective: &SparseOperator, basis: &Basis, chain: &SparseOperator) -> Result<f64> {
        if basis.len() != self.dim() || chain.dim() != self.dim() || effective.dim() != self.dim() {
            return Err(Error::Mapping(format!(
                "dimension mismatch: reachable subspace {}, virtual chain {}, operator {}",
                basis.len(),
                chain.dim(),
                effective.dim()
            )));
        }
        let perm = self
            .states
            .iter()
            .map(|s| basis.index_of(s).ok_or_else(|| Error::Mapping(format!("state {s} not reachable"))))
            .collect::<Result<Vec<_>>>()?;
        let mut worst: f64 = 0.0;
        for u in 0..self.dim() {
            for w in 0..self.dim() {
                let mapped = effective.get(perm[u], perm[w]) * (self.gauge[u] * self.gauge[w]);
                worst = worst.max((mapped - chain.get(u, w)).norm());
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MappingReport {
    pub sites: usize,
    pub dim: usize,
    pub max_difference: f64,
}

/// Builds the effective model on the reachable subspace of a centred 3-tuplet
/// and compares it with the Anderson chain of matching length.
pub fn verify_anderson_mapping(sites: usize, signs: SignMode) -> Result<MappingReport> {
    let chain_map = VirtualChain::three_tuplet(sites, signs)?;
    let params = ModelParams::new(sites, Boundary::Open).with_signs(signs);
    let full = enumerate_basis(sites, 3, Boundary::Open)?;
    let h_full = build_effective(&params, &full)?;
    let seed = chain_map.state(VirtualSite::Chain(0));
    let sub = reachable_subspace(&h_full, &full, &[seed])?;
    let h = h_full.restrict(&full, &sub)?;
    let chain = build_anderson_chain(chain_map.half_length())?;
    let max_difference = chain_map.compare(&h, &sub, &chain)?;
    Ok(MappingReport { sites, dim: sub.len(), max_difference })
}

/// Sums duplicate targets produced by [`Model::apply`].
pub fn apply_merged<M: Model + ?Sized>(model: &M, s: &FockState) -> HashMap<u128, (FockState, C64)> {
    let mut out = Vec::new();
    model.apply(s, &mut out);
    let mut merged: HashMap<u128, (FockState, C64)> = HashMap::new();
    for (t, v) in out {
        merged.entry(t.key()).or_insert((t, C64::new(0.0, 0.0))).1 += v;
    }
    merged.retain(|_, (_, v)| *v != C64::new(0.0, 0.0));
    merged
}
