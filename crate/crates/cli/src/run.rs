//! Drivers behind each subcommand. Each returns a short list of headline
//! values for the terminal; the full results go to files.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use leapfrog::analytic::{self, BoundStateConstants};
use leapfrog::boundstate::{predicted_localized_population_5, FiveTupletReport, TupletProblem};
use leapfrog::hamiltonians::{restricted, Effective, FluxError, Gauged, LabFrame, Model};
use leapfrog::observables::{density, doublon_number, initial_population, transmitted, write_profiles_csv};
use leapfrog::propagator::{evolve_with, DENSE_THRESHOLD};
use leapfrog::robustness::{detuning_sweep, flux_sweep, interaction_sweep, LorentzianFit, SweepPoint};
use leapfrog::scars::{enumerate_frozen_states, scar_count, write_counts_csv, ScarCountVector, TransferMatrix};
use leapfrog::scattering::collision_report;
use leapfrog::verify::{run_verification_suite, VerificationReport, VerifyOptions};
use leapfrog::{parse_loadout, EvolutionPlan, Method, Wavefunction};

use crate::config::{
    AnalyticConfig, BoundStatesConfig, ModelKind, Observable, ScarsConfig, ScatterConfig, ScenarioConfig,
    SweepConfig, SweptParameter,
};
use crate::error::CliError;
use crate::output::{Metadata, OutputDir};

pub type Headlines = Vec<(String, f64)>;

fn method_used(plan: &EvolutionPlan, dim: usize) -> Method {
    match plan.method {
        Method::Auto if dim <= DENSE_THRESHOLD => Method::Dense,
        Method::Auto => Method::Krylov,
        m => m,
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Auto => "auto",
        Method::Krylov => "krylov",
        Method::Dense => "dense",
    }
}

fn model_for(c: &ScenarioConfig) -> Box<dyn Model> {
    let p = c.params.clone();
    match c.model {
        ModelKind::LabFrame => Box::new(LabFrame(p)),
        ModelKind::Gauged => Box::new(Gauged(p)),
        ModelKind::Effective => Box::new(Effective(p)),
        ModelKind::FluxError => Box::new(FluxError(p)),
    }
}

#[derive(Serialize)]
struct ScenarioSummary<'a> {
    metadata: serde_json::Value,
    config: &'a ScenarioConfig,
    basis_dim: usize,
    final_time: f64,
    final_values: Vec<(String, f64)>,
}

/// Evolves the loadout inside the subspace it reaches under the chosen model
/// and writes one CSV per observable plus a JSON summary.
pub fn evolve_scenario(c: &ScenarioConfig, out: &Path) -> Result<Headlines, CliError> {
    let seed = c.seed()?;
    let model = model_for(c);
    let (basis, h) = restricted(model.as_ref(), &[seed])?;
    let psi0 = Wavefunction::product(&basis, &seed)?;
    let method = method_used(&c.plan, h.dim());

    let mut meta = Metadata::new("evolve");
    meta.push("model", c.model.name())
        .push_json("params", &c.params)
        .push("loadout", &c.loadout)
        .push("basis", format!("{} states reachable from the loadout", basis.len()))
        .push("method", method_name(method))
        .push_json("plan", &c.plan);

    let sites: Vec<Vec<usize>> = c
        .observables
        .iter()
        .map(|o| match o {
            Observable::InitialPopulation { sites: Some(s) } => s.clone(),
            _ => seed.occupied_sites(),
        })
        .collect();
    let targets: Vec<Option<usize>> = c
        .observables
        .iter()
        .map(|o| match o {
            Observable::Overlap { target } => parse_loadout(target).ok().and_then(|t| basis.index_of(&t)),
            _ => None,
        })
        .collect();

    let mut times = Vec::new();
    let mut profiles = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); c.observables.len()];
    evolve_with(&h, &psi0, &c.plan, |psi| {
        times.push(psi.time);
        for (k, obs) in c.observables.iter().enumerate() {
            let v = match obs {
                Observable::Density => {
                    let p = density(psi, &basis)?;
                    let atoms = p.atoms();
                    profiles.push(p);
                    atoms
                }
                Observable::Doublon => doublon_number(psi, &basis)?,
                Observable::Transmitted { j0 } => transmitted(psi, &basis, *j0)?,
                Observable::InitialPopulation { .. } => initial_population(psi, &basis, &sites[k])?,
                Observable::Overlap { .. } => targets[k].map_or(0.0, |i| psi.amplitudes[i].norm_sqr()),
            };
            columns[k].push(v);
        }
        Ok(())
    })?;

    let mut dir = OutputDir::create(out)?;
    let stem = &c.outputs.stem;
    let mut finals = Vec::new();
    for (k, obs) in c.observables.iter().enumerate() {
        let name = obs.name();
        match obs {
            Observable::Density => {
                let mut w = dir.csv(&format!("{stem}_density.csv"), &meta)?;
                write_profiles_csv(&mut w, &profiles)?;
                w.flush()?;
                finals.push(("atoms".to_string(), *columns[k].last().unwrap()));
            }
            _ => {
                let mut m = meta.clone();
                match obs {
                    Observable::Transmitted { j0 } => {
                        m.push("j0", j0);
                    }
                    Observable::InitialPopulation { .. } => {
                        m.push_json("sites", &sites[k]);
                    }
                    Observable::Overlap { target } => {
                        m.push("target", target);
                    }
                    _ => {}
                }
                let rows: Vec<Vec<f64>> = times.iter().zip(&columns[k]).map(|(&t, &v)| vec![t, v]).collect();
                dir.table(&format!("{stem}_{name}.csv"), &m, &["t", "value"], &rows)?;
                finals.push((name.to_string(), *columns[k].last().unwrap()));
            }
        }
    }
    let summary = ScenarioSummary {
        metadata: meta.to_json(),
        config: c,
        basis_dim: basis.len(),
        final_time: *times.last().unwrap(),
        final_values: finals.clone(),
    };
    dir.json(&format!("{stem}.json"), &summary)?;
    let mut head = vec![("basis states".to_string(), basis.len() as f64)];
    head.extend(finals.into_iter().map(|(k, v)| (format!("final {k}"), v)));
    Ok(head)
}

/// Three-atom collision next to its surrogate.
pub fn scatter(c: &ScatterConfig, out: &Path) -> Result<Headlines, CliError> {
    let report = collision_report(&c.setup, c.depth)?;
    let mut meta = Metadata::new("scatter");
    meta.push_json("setup", &c.setup)
        .push("depth", c.depth)
        .push("surrogate_start", c.setup.surrogate_start());
    let mut dir = OutputDir::create(out)?;
    let rows: Vec<Vec<f64>> = report
        .three_atom
        .times
        .iter()
        .zip(&report.three_atom.values)
        .zip(&report.surrogate.values)
        .map(|((&t, &a), &b)| vec![t, a, b])
        .collect();
    let stem = &c.outputs.stem;
    dir.table(&format!("{stem}.csv"), &meta, &["t", "three_atom", "surrogate"], &rows)?;
    dir.json(&format!("{stem}.json"), &report)?;
    Ok(vec![
        ("final transmitted".into(), report.final_transmitted),
        ("surrogate final".into(), *report.surrogate.values.last().unwrap()),
        ("largest gap after arrival".into(), report.max_deviation),
        ("transmission integral".into(), analytic::transmission_total(c.depth)?),
    ])
}

#[derive(Serialize)]
struct BoundRow {
    energy: f64,
    score: f64,
    seed_overlap: Option<f64>,
    initial_population: f64,
}

#[derive(Serialize)]
struct BoundStatesReport<'a> {
    metadata: serde_json::Value,
    config: &'a BoundStatesConfig,
    dim: usize,
    bound_states: Vec<BoundRow>,
    /// Long-time initial-site population predicted from the bound states alone.
    bound_prediction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pipeline: Option<FiveTupletReport>,
}

pub fn bound_states(c: &BoundStatesConfig, out: &Path) -> Result<Headlines, CliError> {
    let problem = TupletProblem::new(c.sites, c.first_site(), c.atoms, c.boundary, c.signs)?;
    let criterion = problem.criterion().with_fraction(c.min_fraction)?;
    let found = problem.bound_states(&criterion)?;
    let sites = problem.initial_sites();
    let rows: Vec<BoundRow> = found
        .iter()
        .map(|b| {
            Ok(BoundRow {
                energy: b.energy,
                score: b.score,
                seed_overlap: b.seed_overlap,
                initial_population: initial_population(&b.state, &problem.basis, &sites)?,
            })
        })
        .collect::<leapfrog::Result<_>>()?;
    let channels: Vec<(f64, f64)> =
        rows.iter().map(|r| (r.seed_overlap.unwrap_or(0.0), r.initial_population)).collect();
    let bound_prediction = analytic::predicted_localized_population(&channels);
    let pipeline = c.pipeline_config().map(|p| predicted_localized_population_5(&p)).transpose()?;

    let mut head = vec![("basis states".to_string(), problem.basis.len() as f64)];
    for r in &rows {
        head.push((format!("bound state E = {:+.6}, overlap", r.energy), r.seed_overlap.unwrap_or(f64::NAN)));
    }
    head.push(("bound-state prediction".into(), bound_prediction));
    if let Some(p) = &pipeline {
        head.push(("dressed prediction".into(), p.prediction));
    }
    let mut meta = Metadata::new("boundstates");
    meta.push("basis", problem.basis.len());
    let report = BoundStatesReport {
        metadata: meta.to_json(),
        config: c,
        dim: problem.basis.len(),
        bound_states: rows,
        bound_prediction,
        pipeline,
    };
    let mut dir = OutputDir::create(out)?;
    dir.json(&format!("{}.json", c.outputs.stem), &report)?;
    Ok(head)
}

#[derive(Serialize)]
struct ScarsReport {
    transfer_eigenvalues: [f64; 3],
    counts: Vec<(usize, ScarCountVector)>,
    enumerated: Vec<(usize, ScarCountVector)>,
}

pub fn scars(c: &ScarsConfig, out: &Path) -> Result<Headlines, CliError> {
    let counts: Vec<(usize, ScarCountVector)> =
        c.lengths.iter().map(|&l| Ok((l, scar_count(l)?))).collect::<leapfrog::Result<_>>()?;
    let mut enumerated = Vec::new();
    for l in 2..=c.enumerate_up_to {
        let tally = ScarCountVector::tally(&enumerate_frozen_states(l)?)?;
        if tally != scar_count(l)? {
            return Err(leapfrog::Error::Mapping(format!("enumeration and recursion disagree at L = {l}")).into());
        }
        enumerated.push((l, tally));
    }
    let mut dir = OutputDir::create(out)?;
    let stem = &c.outputs.stem;
    let path = out.join(format!("{stem}.csv"));
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path)?);
    write_counts_csv(&mut w, &c.lengths)?;
    w.flush()?;
    let report = ScarsReport { transfer_eigenvalues: TransferMatrix.eigenvalues(), counts, enumerated };
    dir.json(&format!("{stem}.json"), &report)?;
    let mut head: Headlines = report.counts.iter().map(|(l, v)| (format!("L = {l}"), v.total() as f64)).collect();
    head.push(("lengths checked by enumeration".into(), report.enumerated.len() as f64));
    Ok(head)
}

#[derive(Serialize)]
struct SweepReport<'a> {
    metadata: serde_json::Value,
    config: &'a SweepConfig,
    points: Vec<SweepPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<LorentzianFit>,
}

pub fn sweep(c: &SweepConfig, out: &Path) -> Result<Headlines, CliError> {
    let (points, reference, fit, header) = match c.parameter {
        SweptParameter::UOverJ => (interaction_sweep(&c.base, &c.values)?, None, None, ["u_over_j", "doublon_error"]),
        SweptParameter::DeltaPhi => (flux_sweep(&c.base, &c.values)?, None, None, ["delta_phi", "doublon_error"]),
        SweptParameter::DeltaOmega => {
            let d = detuning_sweep(&c.base, &c.values, c.window)?;
            (d.points, Some(d.reference), d.fit, ["delta_omega", "doublon_ratio"])
        }
    };
    let mut meta = Metadata::new("robustness");
    meta.push_json("base", &c.base).push_json("parameter", &c.parameter).push_json("reduction", &c.reduction);
    if c.parameter == SweptParameter::DeltaOmega {
        meta.push_json("window", &c.window);
    }
    let mut dir = OutputDir::create(out)?;
    let rows: Vec<Vec<f64>> = points.iter().map(|p| vec![p.value, p.result]).collect();
    dir.table(&format!("{}.csv", c.outputs.stem), &meta, &header, &rows)?;
    let mut head: Headlines = points.iter().map(|p| (format!("{} = {}", header[0], p.value), p.result)).collect();
    if let Some(f) = &fit {
        head.push(("Lorentzian half width".into(), f.width));
        head.push(("U / width".into(), c.base.u_over_j / f.width));
    }
    let report = SweepReport { metadata: meta.to_json(), config: c, points, reference, fit };
    dir.json(&format!("{}.json", c.outputs.stem), &report)?;
    Ok(head)
}

#[derive(Serialize)]
struct AnalyticReport {
    constants: BoundStateConstants,
    predicted_triplet_population: f64,
    depth: f64,
    transmission_total: f64,
    transfer_eigenvalues: [f64; 3],
}

pub fn analytic(c: &AnalyticConfig, out: &Path) -> Result<Headlines, CliError> {
    let report = AnalyticReport {
        constants: BoundStateConstants::new(),
        predicted_triplet_population: analytic::predicted_triplet_population(),
        depth: c.depth,
        transmission_total: analytic::transmission_total(c.depth)?,
        transfer_eigenvalues: TransferMatrix.eigenvalues(),
    };
    let mut dir = OutputDir::create(out)?;
    if c.k_points >= 2 {
        let mut meta = Metadata::new("analytic");
        meta.push("depth", c.depth);
        let rows: Vec<Vec<f64>> = (0..c.k_points)
            .map(|i| {
                let k = PI * i as f64 / (c.k_points - 1) as f64;
                vec![k, analytic::transmission_at_k(k, c.depth).value]
            })
            .collect();
        dir.table(&format!("{}_transmission.csv", c.outputs.stem), &meta, &["k", "transmission"], &rows)?;
    }
    dir.json(&format!("{}.json", c.outputs.stem), &report)?;
    Ok(vec![
        ("falloff b".into(), report.constants.b),
        ("bound energy".into(), report.constants.energy),
        ("tuplet overlap".into(), report.constants.overlap),
        ("predicted triplet population".into(), report.predicted_triplet_population),
        ("transmission integral".into(), report.transmission_total),
    ])
}

/// Runs the numbered checks; writes `verify.json` when `out` is given.
pub fn verify(ids: &[u32], options: &VerifyOptions, out: Option<&Path>) -> Result<VerificationReport, CliError> {
    if let Some(bad) = ids.iter().find(|id| !leapfrog::verify::CRITERIA.iter().any(|c| c.0 == **id)) {
        return Err(CliError::Config { field: "--criteria".into(), message: format!("no criterion {bad}") });
    }
    let report = run_verification_suite(ids, options);
    if let Some(dir) = out {
        OutputDir::create(dir)?.json("verify.json", &report)?;
    }
    Ok(report)
}
