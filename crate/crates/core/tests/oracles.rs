//! Independent numerical oracles for the propagator, eigensolver and
//! reachability routines.

use leapfrog::analytic::{bound_energy, triplet_bound_state};
use leapfrog::boundstate::TupletProblem;
use leapfrog::hamiltonians::{build_anderson_chain, build_delta_chain, build_effective, reachable_states, Effective};
use leapfrog::propagator::{eigensolve, evolve, EigenMode, EvolutionPlan, Method, Wavefunction};
use leapfrog::{enumerate_basis, parse_loadout, Boundary, ModelParams};

/// Bessel function of the first kind by its power series.
fn bessel_j(n: i64, x: f64) -> f64 {
    let order = n.unsigned_abs();
    let mut term = (x / 2.0).powi(order as i32) / (1..=order).map(|k| k as f64).product::<f64>();
    let mut sum = term;
    for k in 1..200u64 {
        term *= -(x / 2.0).powi(2) / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    if n < 0 && order % 2 == 1 {
        -sum
    } else {
        sum
    }
}

#[test]
fn bessel_oracle_is_sane() {
    // J0(1) and J1(2.5) from tables.
    assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
    assert!((bessel_j(1, 2.5) - 0.497_094_102_464_274_4).abs() < 1e-13);
}

#[test]
fn single_particle_spreads_as_bessel() {
    let half = 50;
    let h = build_delta_chain(half, 0.0).unwrap();
    assert_eq!(h.dim(), 101);
    let psi0 = Wavefunction::basis_state(h.dim(), half);
    for method in [Method::Dense, Method::Krylov] {
        let states = evolve(&h, &psi0, &EvolutionPlan::new(8.0, 2.0).with_method(method)).unwrap();
        for psi in &states {
            for m in -30i64..=30 {
                let n = psi.amplitudes[(half as i64 + m) as usize].norm_sqr();
                let exact = bessel_j(m, 2.0 * psi.time).powi(2);
                assert!((n - exact).abs() < 1e-6, "{method:?} t = {} m = {m}: {n} vs {exact}", psi.time);
            }
        }
    }
}

#[test]
fn krylov_matches_dense_on_the_triplet_subspace() {
    let three = TupletProblem::centered(7, 3).unwrap();
    assert_eq!(three.basis.len(), 13);
    let psi0 = three.initial_state().unwrap();
    let plan = EvolutionPlan::new(20.0, 20.0);
    let k = evolve(&three.hamiltonian, &psi0, &plan.clone().with_method(Method::Krylov)).unwrap();
    let d = evolve(&three.hamiltonian, &psi0, &plan.with_method(Method::Dense)).unwrap();
    let gap = k[1].amplitudes.iter().zip(&d[1].amplitudes).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(gap <= 1e-9, "{gap}");
}

#[test]
fn anderson_chain_extremal_pairs() {
    let h = build_anderson_chain(200).unwrap();
    let pairs = eigensolve(&h, EigenMode::Extremal(2)).unwrap();
    let mut values = pairs.values.clone();
    values.sort_by(f64::total_cmp);
    assert!((values[0] + 2.1974).abs() < 1e-3 && (values[1] - 2.1974).abs() < 1e-3, "{values:?}");
    assert!(pairs.max_residual(&h) <= 1e-8);
}

#[test]
fn numerical_bound_states_match_the_ansatz() {
    for padding in [12, 14] {
        for sign in [1.0, -1.0] {
            let analytic = triplet_bound_state(padding, sign).unwrap();
            let problem = TupletProblem::centered(analytic.problem.sites(), 3).unwrap();
            let found = problem.bound_states(&problem.criterion()).unwrap();
            let numeric = found.iter().find(|b| b.energy.signum() == sign).unwrap();
            assert!((numeric.energy - sign * bound_energy()).abs() < 1e-6);
            let z: num_complex::Complex64 =
                analytic.state.amplitudes.iter().zip(&numeric.state.amplitudes).map(|(a, b)| a.conj() * b).sum();
            assert!((z.norm_sqr() - 1.0).abs() < 1e-8, "padding {padding}, sign {sign}: {}", z.norm_sqr());
        }
    }
}

#[test]
fn evolved_support_stays_in_the_reachable_subspace() {
    for loadout in ["...uuu...", "..uuuu..", "u.uu.u."] {
        let seed = parse_loadout(loadout).unwrap();
        let l = seed.sites();
        let params = ModelParams::new(l, Boundary::Open);
        let reach = reachable_states(&Effective(params.clone()), &[seed]).unwrap();
        let sector = enumerate_basis(l, seed.n_atoms(), Boundary::Open).unwrap();
        let h = build_effective(&params, &sector).unwrap();
        let psi0 = Wavefunction::product(&sector, &seed).unwrap();
        let states = evolve(&h, &psi0, &EvolutionPlan::new(40.0, 40.0).with_method(Method::Krylov)).unwrap();
        let end = &states[1];
        let mut populated = 0;
        for (i, a) in end.amplitudes.iter().enumerate() {
            if a.norm_sqr() > 1e-12 {
                populated += 1;
                assert!(reach.contains(&sector.state(i)), "{loadout}: {} populated outside BFS set", sector.state(i));
            }
        }
        assert!(populated > 1 && populated <= reach.len());
    }
}
