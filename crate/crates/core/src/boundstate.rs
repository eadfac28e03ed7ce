//! Localized eigenstates of N-tuplets and the dressed three-body states used
//! to predict how many atoms a 5-tuplet leaves behind.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::predicted_localized_population;
use crate::error::{Error, Result};
use crate::fock::{Basis, Boundary, FockState, Mode, SignMode};
use crate::hamiltonians::{restricted, Effective, ModelParams};
use crate::observables::{density, initial_population, TimeSeries};
use crate::operator::SparseOperator;
use crate::propagator::{eigensolve, evolve_with, fix_phase, EigenMode, EvolutionPlan, Wavefunction, DENSE_THRESHOLD};

/// Default minimum share of the density inside the localization window.
pub const DEFAULT_FRACTION: f64 = 0.8;

/// Eigenvalues closer than this are treated as one eigenspace.
const DEGENERACY: f64 = 1e-8;

/// Eigenvectors with smaller squared overlap with the seed are dark.
const DARK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum LocalizationCriterion {
    /// At least `min_fraction` of all atoms on `sites`.
    Window { sites: Vec<usize>, min_fraction: f64 },
    /// Fock-space participation ratio `1 / sum |c|^4` at most `max_ratio`.
    Participation { max_ratio: f64 },
}

impl LocalizationCriterion {
    /// Window of the `atoms` sites starting at `first` plus one site either
    /// side, clipped to the chain.
    pub fn around(sites: usize, first: usize, atoms: usize) -> Self {
        let lo = first.saturating_sub(1);
        let hi = (first + atoms + 1).min(sites);
        LocalizationCriterion::Window { sites: (lo..hi).collect(), min_fraction: DEFAULT_FRACTION }
    }

    pub fn with_fraction(self, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Parameter(format!("window fraction {fraction} outside (0, 1]")));
        }
        Ok(match self {
            LocalizationCriterion::Window { sites, .. } => LocalizationCriterion::Window { sites, min_fraction: fraction },
            other => other,
        })
    }

    /// The localization score and whether it passes.
    pub fn evaluate(&self, psi: &Wavefunction, basis: &Basis) -> Result<(f64, bool)> {
        match self {
            LocalizationCriterion::Window { sites, min_fraction } => {
                let p = density(psi, basis)?;
                let total = p.atoms();
                let f = if total > 0.0 { p.within(sites) / total } else { 0.0 };
                Ok((f, f >= *min_fraction))
            }
            LocalizationCriterion::Participation { max_ratio } => {
                let pr = 1.0 / psi.amplitudes.iter().map(|a| a.norm_sqr().powi(2)).sum::<f64>();
                Ok((pr, pr <= *max_ratio))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundState {
    pub energy: f64,
    #[serde(skip)]
    pub state: Wavefunction,
    /// Window fraction or participation ratio, per the criterion used.
    pub score: f64,
    /// `|<seed|phi>|^2`, when a seed was given.
    pub seed_overlap: Option<f64>,
}

/// Eigenpairs of `h` that satisfy `criterion`, sorted by `|E|` and then `E`.
///
/// With a `seed`, each degenerate eigenspace is reduced to the normalized
/// projection of the seed onto it and eigenstates orthogonal to the seed are
/// dropped, so the result does not depend on how the eigensolver splits
/// degenerate levels.
pub fn find_bound_states(
    h: &SparseOperator,
    basis: &Basis,
    criterion: &LocalizationCriterion,
    seed: Option<&FockState>,
) -> Result<Vec<BoundState>> {
    if h.dim() != basis.len() {
        return Err(Error::Dimension { expected: basis.len(), found: h.dim() });
    }
    let pairs = if h.dim() <= DENSE_THRESHOLD {
        eigensolve(h, EigenMode::Full)?
    } else {
        eigensolve(h, EigenMode::Extremal(h.dim().min(24)))?
    };
    let seed_index = seed.map(|s| basis.require(s)).transpose()?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&a, &b| pairs.values[a].total_cmp(&pairs.values[b]));
    let mut candidates: Vec<(f64, Vec<C64>)> = Vec::new();
    let mut k = 0;
    while k < order.len() {
        let mut end = k + 1;
        while end < order.len() && pairs.values[order[end]] - pairs.values[order[end - 1]] < DEGENERACY {
            end += 1;
        }
        let cluster = &order[k..end];
        let energy = cluster.iter().map(|&i| pairs.values[i]).sum::<f64>() / cluster.len() as f64;
        match seed_index {
            Some(i0) if cluster.len() > 1 => {
                let mut v = vec![C64::new(0.0, 0.0); h.dim()];
                for &i in cluster {
                    let c = pairs.vectors[i][i0].conj();
                    for (x, y) in v.iter_mut().zip(&pairs.vectors[i]) {
                        *x += c * y;
                    }
                }
                let n = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                if n > DARK.sqrt() {
                    v.iter_mut().for_each(|x| *x /= n);
                    fix_phase(&mut v);
                    candidates.push((energy, v));
                }
            }
            _ => candidates.extend(cluster.iter().map(|&i| (pairs.values[i], pairs.vectors[i].clone()))),
        }
        k = end;
    }
    let mut found = Vec::new();
    for (energy, v) in candidates {
        let seed_overlap = seed_index.map(|i0| v[i0].norm_sqr());
        if seed_overlap.is_some_and(|p| p < DARK) {
            continue;
        }
        let state = Wavefunction::new(v);
        let (score, ok) = criterion.evaluate(&state, basis)?;
        if ok {
            found.push(BoundState { energy, state, score, seed_overlap });
        }
    }
    found.sort_by(|a, b| a.energy.abs().total_cmp(&b.energy.abs()).then(a.energy.total_cmp(&b.energy)));
    Ok(found)
}

/// `atoms` adjacent up atoms starting at `first`, with the effective model
/// restricted to the states they reach.
#[derive(Debug, Clone)]
pub struct TupletProblem {
    pub first: usize,
    pub atoms: usize,
    pub seed: FockState,
    pub basis: Basis,
    pub hamiltonian: SparseOperator,
}

impl TupletProblem {
    pub fn new(sites: usize, first: usize, atoms: usize, boundary: Boundary, signs: SignMode) -> Result<Self> {
        if atoms == 0 || first + atoms > sites {
            return Err(Error::Parameter(format!("{atoms}-tuplet at site {first} does not fit on {sites} sites")));
        }
        let mut seed = FockState::vacuum(sites)?;
        for j in first..first + atoms {
            seed.set(j, crate::fock::SiteOccupation::Up);
        }
        let model = Effective(ModelParams::new(sites, boundary).with_signs(signs));
        let (basis, hamiltonian) = restricted(&model, &[seed])?;
        Ok(TupletProblem { first, atoms, seed, basis, hamiltonian })
    }

    /// Tuplet in the middle of an open chain (left of centre when the parity
    /// of `sites` and `atoms` differs).
    pub fn centered(sites: usize, atoms: usize) -> Result<Self> {
        if atoms > sites {
            return Err(Error::Parameter(format!("{atoms}-tuplet does not fit on {sites} sites")));
        }
        TupletProblem::new(sites, (sites - atoms) / 2, atoms, Boundary::Open, SignMode::Fermionic)
    }

    pub fn sites(&self) -> usize {
        self.basis.sites()
    }

    pub fn initial_sites(&self) -> Vec<usize> {
        (self.first..self.first + self.atoms).collect()
    }

    pub fn criterion(&self) -> LocalizationCriterion {
        LocalizationCriterion::around(self.sites(), self.first, self.atoms)
    }

    pub fn initial_state(&self) -> Result<Wavefunction> {
        Wavefunction::product(&self.basis, &self.seed)
    }

    pub fn bound_states(&self, criterion: &LocalizationCriterion) -> Result<Vec<BoundState>> {
        find_bound_states(&self.hamiltonian, &self.basis, criterion, Some(&self.seed))
    }

    /// Population of the initial sites at every grid time.
    pub fn initial_population_series(&self, plan: &EvolutionPlan) -> Result<TimeSeries> {
        let sites = self.initial_sites();
        let mut times = Vec::new();
        let mut values = Vec::new();
        evolve_with(&self.hamiltonian, &self.initial_state()?, plan, |psi| {
            times.push(psi.time);
            values.push(initial_population(psi, &self.basis, &sites)?);
            Ok(())
        })?;
        TimeSeries::new(format!("n_init_{}", self.atoms), times, values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Bound triplet on the left three sites, pair leaving to the right.
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    /// Doublon on `j_m`.
    Doublon,
    /// Up atoms on `j_m` and `j_m + 1`.
    Pair,
}

/// A three-body bound state with an extra doublon or up pair created on top.
#[derive(Debug, Clone, Serialize)]
pub struct DressedState {
    pub side: Side,
    /// Sign of the bound-state energy.
    pub branch: f64,
    pub kind: PairKind,
    pub site: usize,
    /// Fock components, normalized when the set was built with renormalization.
    #[serde(skip)]
    pub components: Vec<(FockState, C64)>,
    /// Weight of the bound state that survived the creation operators.
    pub kept_weight: f64,
}

impl DressedState {
    pub fn atoms(&self) -> Option<usize> {
        let n = self.components.first()?.0.n_atoms();
        self.components.iter().all(|(s, _)| s.n_atoms() == n).then_some(n)
    }

    /// Components over `basis`; states outside it are dropped.
    pub fn project(&self, basis: &Basis) -> Vec<(usize, C64)> {
        self.components.iter().filter_map(|(s, a)| basis.index_of(s).map(|i| (i, *a))).collect()
    }
}

/// `<dressed|psi>` for a projected dressed state.
fn sparse_overlap(dressed: &[(usize, C64)], psi: &[C64]) -> C64 {
    dressed.iter().map(|(i, a)| a.conj() * psi[*i]).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct DressedSet {
    pub side: Side,
    pub branch: f64,
    pub energy: f64,
    pub states: Vec<DressedState>,
    /// Candidates whose every component conflicted with the bound state.
    pub skipped: Vec<(PairKind, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DressingOptions {
    pub renormalize: bool,
}

impl Default for DressingOptions {
    fn default() -> Self {
        DressingOptions { renormalize: true }
    }
}

/// Three-body bound states on one side of a 5-tuplet and the dressed states
/// built from each of them.
///
/// The bound states come from the three-atom problem on the same chain with
/// the 3-tuplet on the left (or right) three sites of the 5-tuplet. Each
/// admissible `j_m` strictly beyond those three sites, on the far side, gets
/// one doublon and one pair candidate.
pub fn build_dressed_states(five: &TupletProblem, side: Side, options: DressingOptions) -> Result<Vec<DressedSet>> {
    if five.atoms != 5 {
        return Err(Error::Parameter(format!("dressed states need a 5-tuplet, got {} atoms", five.atoms)));
    }
    let sites = five.sites();
    let first3 = match side {
        Side::Left => five.first,
        Side::Right => five.first + 2,
    };
    let three = TupletProblem::new(sites, first3, 3, five.basis.boundary(), SignMode::Fermionic)?;
    let bound = three.bound_states(&three.criterion())?;
    let mut candidates: Vec<(PairKind, usize)> = Vec::new();
    match side {
        Side::Left => {
            for j in first3 + 3..sites {
                candidates.push((PairKind::Doublon, j));
                if j + 1 < sites {
                    candidates.push((PairKind::Pair, j));
                }
            }
        }
        Side::Right => {
            for j in 0..first3 {
                candidates.push((PairKind::Doublon, j));
                if j + 1 < first3 {
                    candidates.push((PairKind::Pair, j));
                }
            }
        }
    }
    let mut sets = Vec::new();
    for b in &bound {
        let mut states = Vec::new();
        let mut skipped = Vec::new();
        for &(kind, j) in &candidates {
            let (first, second) = match kind {
                PairKind::Doublon => (Mode::down(j), Mode::up(j)),
                PairKind::Pair => (Mode::up(j + 1), Mode::up(j)),
            };
            let mut components = Vec::new();
            for (s, a) in three.basis.states().iter().zip(&b.state.amplitudes) {
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let Some((t1, g1)) = s.create(first, SignMode::Fermionic) else { continue };
                let Some((t2, g2)) = t1.create(second, SignMode::Fermionic) else { continue };
                components.push((t2, a * (g1 * g2)));
            }
            let kept: f64 = components.iter().map(|(_, a)| a.norm_sqr()).sum();
            if kept == 0.0 {
                skipped.push((kind, j));
                continue;
            }
            if options.renormalize {
                let n = kept.sqrt();
                components.iter_mut().for_each(|(_, a)| *a /= n);
            }
            states.push(DressedState { side, branch: b.energy.signum(), kind, site: j, components, kept_weight: kept });
        }
        sets.push(DressedSet { side, branch: b.energy.signum(), energy: b.energy, states, skipped });
    }
    Ok(sets)
}

/// `sum_d |<d|psi>|^2` over a projected set.
fn plain_weight(projected: &[Vec<(usize, C64)>], psi: &[C64]) -> f64 {
    projected.par_iter().map(|d| sparse_overlap(d, psi).norm_sqr()).sum()
}

/// Weight of `psi` in the span of the projected set, `v^H G^+ v` with Gram
/// matrix `G` and `v_d = <d|psi>`.
struct GramProjector {
    /// `G^{-1/2}`-style whitening: rows are orthonormalized combinations.
    whitening: DMatrix<C64>,
}

impl GramProjector {
    fn new(projected: &[Vec<(usize, C64)>], dim: usize) -> Self {
        let n = projected.len();
        let mut dense = DMatrix::<C64>::zeros(dim, n);
        for (c, d) in projected.iter().enumerate() {
            for &(i, a) in d {
                dense[(i, c)] = a;
            }
        }
        let gram = dense.adjoint() * &dense;
        let eig = gram.symmetric_eigen();
        let max = eig.eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x));
        let mut cols = Vec::new();
        for k in 0..n {
            let lambda = eig.eigenvalues[k];
            if lambda > 1e-12 * max.max(1e-300) {
                cols.push(eig.eigenvectors.column(k) / C64::new(lambda.sqrt(), 0.0));
            }
        }
        let whitening = if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        GramProjector { whitening }
    }

    fn weight(&self, overlaps: &DVector<C64>) -> f64 {
        (self.whitening.adjoint() * overlaps).norm_squared()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelSeries {
    pub side: Side,
    pub branch: f64,
    /// Sum of squared overlaps with every dressed state of the channel.
    pub plain: TimeSeries,
    /// Weight in the span of the channel's dressed states.
    pub gram: TimeSeries,
}

/// Evolves the 5-tuplet and records the dressed-state weight of each channel.
pub fn dressed_overlap_series(five: &TupletProblem, sets: &[DressedSet], plan: &EvolutionPlan) -> Result<Vec<ChannelSeries>> {
    let projected: Vec<Vec<Vec<(usize, C64)>>> =
        sets.iter().map(|s| s.states.iter().map(|d| d.project(&five.basis)).collect()).collect();
    let grams: Vec<GramProjector> = projected.iter().map(|p| GramProjector::new(p, five.basis.len())).collect();
    let mut times = Vec::new();
    let mut plain: Vec<Vec<f64>> = vec![Vec::new(); sets.len()];
    let mut gram: Vec<Vec<f64>> = vec![Vec::new(); sets.len()];
    evolve_with(&five.hamiltonian, &five.initial_state()?, plan, |psi| {
        times.push(psi.time);
        for (k, p) in projected.iter().enumerate() {
            plain[k].push(plain_weight(p, &psi.amplitudes));
            let v = DVector::from_iterator(p.len(), p.iter().map(|d| sparse_overlap(d, &psi.amplitudes)));
            gram[k].push(grams[k].weight(&v));
        }
        Ok(())
    })?;
    sets.iter()
        .enumerate()
        .map(|(k, s)| {
            let label = format!("{:?}{}", s.side, if s.branch > 0.0 { "+" } else { "-" }).to_lowercase();
            Ok(ChannelSeries {
                side: s.side,
                branch: s.branch,
                plain: TimeSeries::new(format!("{label}_plain"), times.clone(), plain[k].clone())?,
                gram: TimeSeries::new(format!("{label}_gram"), times.clone(), gram[k].clone())?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FivePipelineConfig {
    pub sites: usize,
    /// Averaging window for the dressed-state plateau.
    pub plateau: (f64, f64),
    pub dt: f64,
    pub dressing: DressingOptions,
    /// Use the span weight instead of the plain overlap sum.
    pub gram_corrected: bool,
}

impl Default for FivePipelineConfig {
    fn default() -> Self {
        FivePipelineConfig {
            sites: 19,
            plateau: (5.0, 15.0),
            dt: 0.05,
            dressing: DressingOptions::default(),
            gram_corrected: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundChannel {
    pub energy: f64,
    pub overlap: f64,
    pub central_population: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DressedChannel {
    pub side: Side,
    pub branch: f64,
    pub energy: f64,
    pub states: usize,
    pub weight: f64,
    /// Population of the bound triplet's own three sites.
    pub central_population: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FiveTupletReport {
    pub config: FivePipelineConfig,
    pub dim: usize,
    pub bound: Vec<BoundChannel>,
    pub dressed: Vec<DressedChannel>,
    pub three_body_weight: f64,
    pub prediction: f64,
}

/// Bound 5-body states of a centred 5-tuplet with their overlap and central
/// five-site population.
pub fn five_tuplet_bound_channels(five: &TupletProblem) -> Result<Vec<BoundChannel>> {
    let sites = five.initial_sites();
    five.bound_states(&five.criterion())?
        .into_iter()
        .map(|b| {
            Ok(BoundChannel {
                energy: b.energy,
                overlap: b.seed_overlap.unwrap_or(0.0),
                central_population: initial_population(&b.state, &five.basis, &sites)?,
            })
        })
        .collect()
}

/// Squared overlap of the centred 5-tuplet with each bound state on `sites` sites.
pub fn five_tuplet_bound_overlap(sites: usize) -> Result<Vec<f64>> {
    let five = TupletProblem::centered(sites, 5)?;
    Ok(five_tuplet_bound_channels(&five)?.into_iter().map(|c| c.overlap).collect())
}

/// Long-time population of the five initial sites: bound 5-body channels,
/// dressed three-body channels on both sides, and one orphan for the rest.
pub fn predicted_localized_population_5(config: &FivePipelineConfig) -> Result<FiveTupletReport> {
    let five = TupletProblem::centered(config.sites, 5)?;
    let bound = five_tuplet_bound_channels(&five)?;
    let plan = EvolutionPlan::new(config.plateau.1, config.dt);
    let mut dressed = Vec::new();
    for side in [Side::Left, Side::Right] {
        let sets = build_dressed_states(&five, side, config.dressing)?;
        let series = dressed_overlap_series(&five, &sets, &plan)?;
        let first3 = match side {
            Side::Left => five.first,
            Side::Right => five.first + 2,
        };
        let three = TupletProblem::new(config.sites, first3, 3, Boundary::Open, SignMode::Fermionic)?;
        let bound3 = three.bound_states(&three.criterion())?;
        for (set, s) in sets.iter().zip(&series) {
            let ts = if config.gram_corrected { &s.gram } else { &s.plain };
            let b3 = bound3
                .iter()
                .find(|b| (b.energy - set.energy).abs() < 1e-9)
                .ok_or_else(|| Error::Mapping("three-body bound state vanished".into()))?;
            dressed.push(DressedChannel {
                side,
                branch: set.branch,
                energy: set.energy,
                states: set.states.len(),
                weight: ts.mean_over(config.plateau.0, config.plateau.1)?,
                central_population: initial_population(&b3.state, &three.basis, &three.initial_sites())?,
            });
        }
    }
    let mut channels: Vec<(f64, f64)> = bound.iter().map(|b| (b.overlap, b.central_population)).collect();
    channels.extend(dressed.iter().map(|d| (d.weight, d.central_population)));
    let three_body_weight = dressed.iter().map(|d| d.weight).sum();
    Ok(FiveTupletReport {
        config: config.clone(),
        dim: five.basis.len(),
        bound,
        dressed,
        three_body_weight,
        prediction: predicted_localized_population(&channels),
    })
}

/// Total weight of `psi` on dressed states of one channel, without orthogonalization.
pub fn dressed_weight(psi: &Wavefunction, basis: &Basis, set: &DressedSet) -> f64 {
    let projected: Vec<Vec<(usize, C64)>> = set.states.iter().map(|d| d.project(basis)).collect();
    plain_weight(&projected, &psi.amplitudes)
}

/// Pairwise `|<a|b>|` between dressed states of one kind at different sites.
pub fn dressed_cross_overlaps(set: &DressedSet, kind: PairKind) -> Vec<(usize, usize, f64)> {
    let states: Vec<&DressedState> = set.states.iter().filter(|d| d.kind == kind).collect();
    let maps: Vec<HashMap<u128, C64>> =
        states.iter().map(|d| d.components.iter().map(|(s, a)| (s.key(), *a)).collect()).collect();
    let mut out = Vec::new();
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let z: C64 = maps[i].iter().filter_map(|(k, a)| maps[j].get(k).map(|b| a.conj() * b)).sum();
            out.push((states[i].site, states[j].site, z.norm()));
        }
    }
    out
}
