//! Runs the numbered release checks and collects a machine-readable report.

use std::f64::consts::SQRT_2;
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::analytic::{self, AnsatzParams, TripletProblem};
use crate::boundstate::{predicted_localized_population_5, FivePipelineConfig, TupletProblem};
use crate::error::Result;
use crate::fock::{enumerate_basis, parse_loadout, Boundary, SignMode};
use crate::hamiltonians::{
    build_effective, build_gauged, build_lab_frame, conserved_charge, verify_anderson_mapping, ModelParams,
};
use crate::observables::{density, overlap};
use crate::propagator::{evolve, EvolutionPlan, Method, Wavefunction};
use crate::robustness::{detuning_sweep, interaction_sweep, RobustnessSetup};
use crate::scars::{enumerate_frozen_states, scar_count, ScarCountVector};
use crate::scattering::{collision_report, CollisionSetup};

/// How a measured value is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tolerance {
    Within { target: f64, tolerance: f64 },
    AtMost { bound: f64 },
    AtLeast { bound: f64 },
    Equal { target: f64 },
}

impl Tolerance {
    pub fn accepts(&self, value: f64) -> bool {
        match *self {
            Tolerance::Within { target, tolerance } => (value - target).abs() <= tolerance,
            Tolerance::AtMost { bound } => value <= bound,
            Tolerance::AtLeast { bound } => value >= bound,
            Tolerance::Equal { target } => value == target,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: Tolerance,
    pub passed: bool,
}

fn check(name: impl Into<String>, value: f64, tolerance: Tolerance) -> Check {
    Check { name: name.into(), value, tolerance, passed: tolerance.accepts(value) }
}

fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Check {
    check(name, value, Tolerance::Within { target, tolerance })
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Values reported alongside the checks without gating the result.
    pub notes: Vec<(String, f64)>,
    pub error: Option<String>,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CriterionResult {
    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    /// Falloff used for the analytic bound-state checks; perturbing it must
    /// make them fail.
    pub falloff: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { falloff: analytic::falloff() }
    }
}

pub const CRITERIA: [(u32, &str, f64); 11] = [
    (1, "three-atom bound energies", 1.0),
    (2, "three-atom bound overlap", 1.0),
    (3, "3-tuplet localization", 10.0),
    (4, "2-tuplet transmission", 30.0),
    (5, "transmission quadrature", 0.1),
    (6, "Anderson mapping", 1.0),
    (7, "5-tuplet pipeline", 300.0),
    (8, "even/odd contrast", 600.0),
    (9, "frozen product states", 30.0),
    (10, "robustness", 1200.0),
    (11, "property suites", 60.0),
];

type Outcome = Result<(Vec<Check>, Vec<(String, f64)>)>;

pub fn run_criterion(id: u32, options: &VerifyOptions) -> Option<CriterionResult> {
    let &(id, title, budget) = CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let outcome: Outcome = match id {
        1 => bound_energies(),
        2 => bound_overlap(options),
        3 => triplet_localization(),
        4 => transmission(),
        5 => quadrature(),
        6 => mapping(),
        7 => five_tuplet(),
        8 => even_odd(),
        9 => scars(),
        10 => robustness(),
        _ => properties(),
    };
    let seconds = start.elapsed().as_secs_f64();
    Some(match outcome {
        Ok((checks, notes)) => CriterionResult {
            id,
            title,
            passed: !checks.is_empty() && checks.iter().all(|c| c.passed),
            checks,
            notes,
            error: None,
            seconds,
            budget_seconds: budget,
        },
        Err(e) => CriterionResult {
            id,
            title,
            passed: false,
            checks: Vec::new(),
            notes: Vec::new(),
            error: Some(e.to_string()),
            seconds,
            budget_seconds: budget,
        },
    })
}

/// Runs the selected criteria (all of them when `ids` is empty) in order.
pub fn run_verification_suite(ids: &[u32], options: &VerifyOptions) -> VerificationReport {
    let selected: Vec<u32> = if ids.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { ids.to_vec() };
    let criteria: Vec<CriterionResult> = selected.iter().filter_map(|&id| run_criterion(id, options)).collect();
    VerificationReport { passed: criteria.iter().all(|c| c.passed), criteria }
}

fn bound_energies() -> Outcome {
    let three = TupletProblem::centered(35, 3)?;
    let found = three.bound_states(&three.criterion())?;
    let e = analytic::bound_energy();
    let mut checks = vec![check("bound states found", found.len() as f64, Tolerance::Equal { target: 2.0 })];
    for b in &found {
        checks.push(within(format!("energy {:+.6}", b.energy), b.energy.abs(), e, 1e-4));
    }
    if found.len() == 2 {
        checks.push(check("opposite signs", (found[0].energy * found[1].energy < 0.0) as u8 as f64, Tolerance::Equal { target: 1.0 }));
    }
    Ok((checks, Vec::new()))
}

fn bound_overlap(options: &VerifyOptions) -> Outcome {
    let target = 1.0 / (2.0 * SQRT_2);
    let problem = TripletProblem::new(16, SignMode::Fermionic)?;
    let tuplet = problem.tuplet()?;
    let mut checks = Vec::new();
    for sign in [1.0, -1.0] {
        let params = AnsatzParams::bound(sign).with_falloff(options.falloff);
        let phi = problem.ansatz(&params)?;
        let r = crate::propagator::residual(&problem.hamiltonian, &phi.amplitudes, sign * analytic::bound_energy());
        checks.push(check(format!("ansatz residual ({sign:+})"), r, Tolerance::AtMost { bound: 1e-6 }));
        checks.push(within(format!("ansatz overlap ({sign:+})"), overlap(&tuplet, &phi)?.1, target, 5e-4));
    }
    let three = TupletProblem::centered(problem.sites(), 3)?;
    for b in three.bound_states(&three.criterion())? {
        checks.push(within(format!("eigenvector overlap ({:+.4})", b.energy), b.seed_overlap.unwrap_or(0.0), target, 5e-4));
    }
    Ok((checks, Vec::new()))
}

fn triplet_localization() -> Outcome {
    let three = TupletProblem::centered(35, 3)?;
    let series = three.initial_population_series(&EvolutionPlan::new(40.0, 0.05))?;
    let mean = series.mean_over(20.0, 40.0)?;
    Ok((vec![within("mean initial population, tJ in [20, 40]", mean, 2.207, 0.05)], Vec::new()))
}

fn transmission() -> Outcome {
    let report = collision_report(&CollisionSetup::default(), 2.0)?;
    Ok((
        vec![
            within("transmitted at tJ = 25", report.final_transmitted, 0.293, 0.02),
            check("surrogate gap after arrival", report.max_deviation, Tolerance::AtMost { bound: 0.03 }),
        ],
        vec![
            ("surrogate gap including rising edge".into(), report.max_deviation_all),
            ("surrogate arrival time".into(), report.arrival),
        ],
    ))
}

fn quadrature() -> Outcome {
    let v = analytic::transmission_total(2.0)?;
    Ok((vec![within("total transmission at depth 2", v, 1.0 - 1.0 / SQRT_2, 1e-6)], Vec::new()))
}

fn mapping() -> Outcome {
    let r = verify_anderson_mapping(11, SignMode::Fermionic)?;
    let rb = verify_anderson_mapping(11, SignMode::HardcoreBoson)?;
    Ok((
        vec![
            check("largest element difference", r.max_difference, Tolerance::Equal { target: 0.0 }),
            check("largest element difference (hardcore bosons)", rb.max_difference, Tolerance::Equal { target: 0.0 }),
            check("subspace dimension", r.dim as f64, Tolerance::Equal { target: (2 * 9 + 3) as f64 }),
        ],
        Vec::new(),
    ))
}

fn five_tuplet() -> Outcome {
    let report = predicted_localized_population_5(&FivePipelineConfig::default())?;
    let mut checks = vec![check("bound states found", report.bound.len() as f64, Tolerance::Equal { target: 2.0 })];
    for b in &report.bound {
        checks.push(within(format!("central population ({:+.4})", b.energy), b.central_population, 3.71, 0.05));
        checks.push(within(format!("5-tuplet overlap ({:+.4})", b.energy), b.overlap, 0.062, 0.005));
    }
    if report.bound.len() == 2 {
        let d = (report.bound[0].overlap - report.bound[1].overlap).abs();
        checks.push(check("branch overlap asymmetry", d, Tolerance::AtMost { bound: 1e-6 }));
    }
    checks.push(within("predicted localized population", report.prediction, 2.54, 0.05));
    let five = TupletProblem::centered(25, 5)?;
    let series = five.initial_population_series(&EvolutionPlan::new(60.0, 0.05))?;
    let plateau = series.mean_over(30.0, 60.0)?;
    checks.push(within("L = 25 plateau, tJ in [30, 60]", plateau, report.prediction, 0.1));
    let notes = vec![
        ("three-body channel weight".into(), report.three_body_weight),
        ("L = 25 plateau, tJ in [30, 200]".into(), five.initial_population_series(&EvolutionPlan::new(200.0, 0.1))?.mean_over(30.0, 200.0)?),
    ];
    Ok((checks, notes))
}

/// Tuplet sizes and chain lengths of the even/odd comparison.
pub const EVEN_ODD: [(usize, usize); 5] = [(2, 36), (3, 35), (4, 32), (5, 25), (6, 18)];

/// Mean initial-site population over `tJ in [15, 30]` in excess of the
/// uniform value `N^2 / L`.
pub fn plateau_excess(atoms: usize, sites: usize) -> Result<f64> {
    let tuplet = TupletProblem::centered(sites, atoms)?;
    let plan = EvolutionPlan::new(30.0, 0.1).with_method(Method::Krylov);
    let mean = tuplet.initial_population_series(&plan)?.mean_over(15.0, 30.0)?;
    Ok(mean - (atoms * atoms) as f64 / sites as f64)
}

fn even_odd() -> Outcome {
    use rayon::prelude::*;
    let excess: Vec<Result<f64>> = EVEN_ODD.par_iter().map(|&(n, l)| plateau_excess(n, l)).collect();
    let mut checks = Vec::new();
    for (&(n, l), e) in EVEN_ODD.iter().zip(excess) {
        let e = e?;
        let tol = if n % 2 == 1 { Tolerance::AtLeast { bound: 1.0 } } else { Tolerance::AtMost { bound: 1.0 } };
        checks.push(check(format!("N = {n}, L = {l} plateau excess"), e, tol));
    }
    Ok((checks, Vec::new()))
}

fn scars() -> Outcome {
    let mut checks = Vec::new();
    for l in 2..=8 {
        let states = enumerate_frozen_states(l)?;
        let tally = ScarCountVector::tally(&states)?;
        let expected = scar_count(l)?;
        checks.push(check(format!("L = {l} count"), states.len() as f64, Tolerance::Equal { target: expected.total() as f64 }));
        checks.push(check(
            format!("L = {l} split by last site"),
            (tally == expected) as u8 as f64,
            Tolerance::Equal { target: 1.0 },
        ));
    }
    let mut two: Vec<String> = enumerate_frozen_states(2)?.iter().map(|s| s.to_string()).collect();
    two.sort();
    let mut listed: Vec<String> = ["u.", ".u", "..", "uD", "Du", "DD"].iter().map(|s| s.to_string()).collect();
    listed.sort();
    checks.push(check("L = 2 states as listed", (two == listed) as u8 as f64, Tolerance::Equal { target: 1.0 }));
    Ok((checks, Vec::new()))
}

/// `U/J` grid of the doublon-error sweep.
pub const INTERACTION_GRID: [f64; 4] = [25.0, 50.0, 100.0, 200.0];
/// Detunings of the steady-state sweep, in units of `J`.
pub const DETUNING_GRID: [f64; 9] = [-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0];

fn robustness() -> Outcome {
    let setup = RobustnessSetup::default();
    let sweep = interaction_sweep(&setup, &INTERACTION_GRID)?;
    let mut checks = Vec::new();
    let at_200 = sweep.iter().find(|p| p.value == 200.0).map(|p| p.result).unwrap_or(f64::NAN);
    checks.push(check("doublon error at U/J = 200", at_200, Tolerance::AtMost { bound: 0.1 }));
    // Grid noise: allow 10% of the larger neighbour plus 1e-6.
    let worst_rise = sweep.windows(2).map(|w| w[1].result - (w[0].result * 1.1 + 1e-6)).fold(f64::MIN, f64::max);
    checks.push(check("largest rise along U/J beyond grid noise", worst_rise, Tolerance::AtMost { bound: 0.0 }));
    let mut notes: Vec<(String, f64)> = sweep.iter().map(|p| (format!("doublon error at U/J = {}", p.value), p.result)).collect();
    let detuned = detuning_sweep(&RobustnessSetup { t_end: 50.0, dt: 0.1, ..setup.clone() }, &DETUNING_GRID, (10.0, 50.0))?;
    match detuned.fit {
        Some(fit) => {
            let coefficient = setup.u_over_j / fit.width;
            checks.push(within("Lorentzian coefficient U/w", coefficient, 0.73 * setup.u_over_j, 0.25 * 0.73 * setup.u_over_j));
            notes.push(("Lorentzian half width w".into(), fit.width));
            notes.push(("Lorentzian amplitude".into(), fit.amplitude));
            notes.push(("Lorentzian rms residual".into(), fit.rms_residual));
        }
        None => checks.push(check("Lorentzian fit converged", 0.0, Tolerance::Equal { target: 1.0 })),
    }
    Ok((checks, notes))
}

fn spectrum(h: &crate::operator::SparseOperator) -> Vec<f64> {
    let mut ev: Vec<f64> = h.to_dense().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn properties() -> Outcome {
    let mut checks = Vec::new();
    let params = ModelParams::new(6, Boundary::Open).resonant(7.0);
    let basis = enumerate_basis(6, 4, Boundary::Open)?;

    let lab = build_lab_frame(&params, &basis)?;
    let gauged = build_gauged(&params, &basis)?;
    let effective = build_effective(&params, &basis)?;
    let hermitian = [&lab, &gauged, &effective].iter().all(|h| h.require_hermitian().is_ok());
    checks.push(check("Hermitian builders", hermitian as u8 as f64, Tolerance::Equal { target: 1.0 }));

    let mixed = crate::fock::Basis::all_sectors(4, Boundary::Periodic)?;
    let mixed_params = ModelParams::new(4, Boundary::Periodic).resonant(7.0).with_flux_error(0.3);
    let mut number_violation = 0usize;
    for h in [
        build_lab_frame(&mixed_params, &mixed)?,
        build_gauged(&mixed_params, &mixed)?,
        build_effective(&mixed_params, &mixed)?,
        crate::hamiltonians::build_flux_error(&mixed_params, &mixed)?,
    ] {
        for (row, col, _) in h.triplets() {
            number_violation = number_violation.max(mixed.state(row).n_atoms().abs_diff(mixed.state(col).n_atoms()));
        }
    }
    checks.push(check("atom number change across all sectors", number_violation as f64, Tolerance::Equal { target: 0.0 }));

    let mut charge_violation: f64 = 0.0;
    for (col, s) in basis.states().iter().enumerate() {
        for row in 0..basis.len() {
            if effective.get(row, col).norm() != 0.0 {
                charge_violation = charge_violation.max((conserved_charge(&basis.state(row)) - conserved_charge(s)).abs());
            }
        }
    }
    checks.push(check("conserved charge violation", charge_violation, Tolerance::Equal { target: 0.0 }));

    let (a, b) = (spectrum(&lab), spectrum(&gauged));
    let scale = a.iter().map(|x| x.abs()).fold(1.0, f64::max);
    let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale;
    checks.push(check("lab/gauged spectra relative gap", gap, Tolerance::AtMost { bound: 1e-10 }));

    let seed = parse_loadout("..uu..")?;
    let (sub, h) = crate::hamiltonians::restricted(&crate::hamiltonians::Gauged(params.clone()), &[seed])?;
    let psi0 = Wavefunction::product(&sub, &seed)?;
    let e0 = energy(&h, &psi0);
    let krylov = evolve(&h, &psi0, &EvolutionPlan::new(5.0, 0.5).with_method(Method::Krylov))?;
    let dense = evolve(&h, &psi0, &EvolutionPlan::new(5.0, 0.5).with_method(Method::Dense))?;
    let drift = krylov.iter().map(|w| (w.norm() - 1.0).abs().max((energy(&h, w) - e0).abs())).fold(0.0, f64::max);
    checks.push(check("norm and energy drift", drift, Tolerance::AtMost { bound: 1e-8 }));
    let diff = krylov
        .iter()
        .zip(&dense)
        .flat_map(|(x, y)| x.amplitudes.iter().zip(&y.amplitudes).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max);
    checks.push(check("Krylov/dense amplitude gap", diff, Tolerance::AtMost { bound: 1e-8 }));

    let tuplet = parse_loadout("...uuu...")?;
    let mut worst: f64 = 0.0;
    let mut profiles = Vec::new();
    for signs in [SignMode::Fermionic, SignMode::HardcoreBoson] {
        let model = crate::hamiltonians::Effective(ModelParams::new(9, Boundary::Open).with_signs(signs));
        let (sub, h) = crate::hamiltonians::restricted(&model, &[tuplet])?;
        let states = evolve(&h, &Wavefunction::product(&sub, &tuplet)?, &EvolutionPlan::new(4.0, 1.0))?;
        profiles.push(states.iter().map(|w| density(w, &sub)).collect::<Result<Vec<_>>>()?);
    }
    for (p, q) in profiles[0].iter().zip(&profiles[1]) {
        for (x, y) in p.total().iter().zip(q.total()) {
            worst = worst.max((x - y).abs());
        }
    }
    checks.push(check("fermion/hardcore-boson density gap", worst, Tolerance::AtMost { bound: 1e-10 }));
    Ok((checks, Vec::new()))
}

fn energy(h: &crate::operator::SparseOperator, psi: &Wavefunction) -> f64 {
    let hp = h.apply(&psi.amplitudes);
    psi.amplitudes.iter().zip(&hp).map(|(a, b)| a.conj() * b).sum::<C64>().re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_kinds() {
        assert!(Tolerance::Within { target: 1.0, tolerance: 0.1 }.accepts(1.05));
        assert!(!Tolerance::Within { target: 1.0, tolerance: 0.1 }.accepts(1.2));
        assert!(Tolerance::AtMost { bound: 0.0 }.accepts(-1.0));
        assert!(!Tolerance::Equal { target: 0.0 }.accepts(1e-300));
    }

    #[test]
    fn quick_criteria_pass() {
        let report = run_verification_suite(&[1, 2, 5, 6, 9, 11], &VerifyOptions::default());
        for c in &report.criteria {
            assert!(c.passed, "{c:?}");
        }
    }

    #[test]
    fn perturbed_falloff_fails_the_residual_check() {
        let options = VerifyOptions { falloff: analytic::falloff() * 1.01 };
        let r = run_criterion(2, &options).unwrap();
        assert!(!r.passed);
        assert!(r.failed_checks().iter().any(|c| c.name.starts_with("ansatz residual")));
    }

    #[test]
    fn unknown_criterion() {
        assert!(run_criterion(12, &VerifyOptions::default()).is_none());
    }
}
