use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;

use leapfrog::{Boundary, EvolutionPlan, Method, ModelParams};
use leapfrog_cli::config::{
    AnalyticConfig, BoundStatesConfig, ModelKind, Observable, Outputs, RunConfig, ScarsConfig, ScatterConfig,
    ScenarioConfig, SweepConfig,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_leapfrog"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// `(t, value)` rows of a two-column CSV with a `#` header.
fn read_series(path: &Path) -> Vec<(f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let mut it = l.split(',').map(|x| x.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect()
}

#[test]
fn shipped_configs_validate() {
    let mut seen = 0;
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_stem().unwrap().to_string_lossy().to_string();
        let checked = if name.starts_with("sweep_") {
            SweepConfig::load(&path).map(|_| ())
        } else if name == "collision" {
            ScatterConfig::load(&path).map(|_| ())
        } else if name.ends_with("boundstates") {
            BoundStatesConfig::load(&path).map(|_| ())
        } else if name == "scars" {
            ScarsConfig::load(&path).map(|_| ())
        } else if name == "analytic" {
            AnalyticConfig::load(&path).map(|_| ())
        } else {
            ScenarioConfig::load(&path).map(|_| ())
        };
        assert!(checked.is_ok(), "{name}: {checked:?}");
        seen += 1;
    }
    assert!(seen >= 15);
}

fn scenario() -> impl Strategy<Value = ScenarioConfig> {
    (
        3usize..=9,
        prop_oneof![Just(Boundary::Open), Just(Boundary::Periodic), Just(Boundary::Antiperiodic)],
        prop_oneof![Just(ModelKind::LabFrame), Just(ModelKind::Gauged), Just(ModelKind::Effective), Just(ModelKind::FluxError)],
        0.0f64..300.0,
        -0.3f64..0.3,
        0.01f64..1.0,
        1u32..50,
    )
        .prop_flat_map(|(l, b, m, u, dphi, dt, steps)| {
            (prop::collection::vec(prop::sample::select(vec!['.', 'u', 'd', 'D']), l), Just((l, b, m, u, dphi, dt, steps)))
        })
        .prop_filter("needs an atom", |(occ, _)| occ.iter().any(|&c| c != '.'))
        .prop_map(|(occ, (l, b, m, u, dphi, dt, steps))| ScenarioConfig {
            schema: 1,
            model: m,
            params: ModelParams::new(l, b).resonant(u).with_flux_error(dphi),
            loadout: occ.into_iter().collect(),
            plan: EvolutionPlan::new(dt * steps as f64, dt).with_method(Method::Krylov),
            observables: vec![
                Observable::Density,
                Observable::Doublon,
                Observable::Transmitted { j0: l / 2 },
                Observable::InitialPopulation { sites: Some(vec![0, l - 1]) },
            ],
            outputs: Outputs { stem: "case".into() },
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn scenario_config_round_trips(c in scenario()) {
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back = ScenarioConfig::from_json(&text).unwrap();
        prop_assert_eq!(back, c);
    }
}

#[test]
fn identical_runs_write_identical_bytes() {
    let cfg = configs().join("three_tuplet_periodic.json");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let o = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 3);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn unknown_keys_and_missing_files_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(configs().join("three_tuplet_open.json")).unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, text.replacen("\"loadout\"", "\"lodaout_typo\": 1, \"loadout\"", 1)).unwrap();
    let o = run(&["evolve", "--config", bad.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("lodaout_typo"));

    let o = run(&["evolve", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(code(&o), 1);

    let o = run(&["verify", "--criteria", "99"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn numerical_failures_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    // A lone up atom never forms a doublon, so the doublon error is undefined.
    let cfg = dir.path().join("lonely.json");
    fs::write(
        &cfg,
        r#"{"schema": 1, "base": {"loadout": "u.......", "u_over_j": 50.0, "t_end": 2.0, "dt": 0.1},
            "parameter": "delta_phi", "reduction": "doublon_error", "values": [0.1]}"#,
    )
    .unwrap();
    let o = run(&["robustness", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verification_exit_codes() {
    let o = run(&["verify", "--criteria", "5,6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let o = run(&["verify", "--criteria", "2", "--falloff", "1.57"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn open_chain_holds_more_than_the_ring() {
    let dir = tempfile::tempdir().unwrap();
    let mut means = Vec::new();
    for b in ["open", "periodic"] {
        let cfg = configs().join(format!("three_tuplet_{b}.json"));
        let o = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        let rows = read_series(&dir.path().join(format!("three_tuplet_{b}_initial_population.csv")));
        let late: Vec<f64> = rows.iter().filter(|r| r.0 >= 50.0).map(|r| r.1).collect();
        means.push(late.iter().sum::<f64>() / late.len() as f64);
    }
    assert!(means[0] > 2.2 && means[0] > means[1] + 0.1, "{means:?}");
}

#[test]
fn pair_spreads_ballistically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("two_tuplet_spread.json");
    let o = run(&["evolve", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("two_tuplet_density.csv")).unwrap();
    let mut rows = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(rows.next(), Some("t,site,n_up,n_down,n_total"));
    // Earliest time the density `d` sites right of the pair exceeds 0.01.
    let mut arrival = [f64::NAN; 3];
    for l in rows {
        let cells: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        let (t, site, n) = (cells[0], cells[1] as usize, cells[4]);
        for (k, d) in [4, 8, 12].into_iter().enumerate() {
            if site == 15 + d && n > 0.01 && arrival[k].is_nan() {
                arrival[k] = t;
            }
        }
    }
    assert!(arrival.iter().all(|t| t.is_finite()), "{arrival:?}");
    let speeds: Vec<f64> = arrival.iter().zip([4.0, 8.0, 12.0]).map(|(t, d)| d / t).collect();
    let (lo, hi) = speeds.iter().fold((f64::MAX, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    assert!(hi / lo < 1.35, "front speeds {speeds:?}");
}

#[test]
fn scars_csv_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["scars", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("scars.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("L,count_up,count_empty,count_doublon,total"));
    assert_eq!(lines.next(), Some("2,2,2,2,6"));
    assert_eq!(text.lines().count(), 20);
}

#[test]
fn threads_flag_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--threads", "2", "--seed", "7", "analytic", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("analytic.json")).unwrap()).unwrap();
    let t = report["transmission_total"].as_f64().unwrap();
    assert!((t - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-9);
}
