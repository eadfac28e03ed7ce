use leapfrog::hamiltonians::build_effective;
use leapfrog::observables::density;
use leapfrog::propagator::{evolve, EvolutionPlan, Method, Wavefunction};
use leapfrog::scars::{enumerate_frozen_states, scar_count};
use leapfrog::{enumerate_basis, Basis, Boundary, ModelParams};

#[test]
fn frozen_states_do_not_move() {
    let frozen = enumerate_frozen_states(8).unwrap();
    assert_eq!(frozen.len() as u128, scar_count(8).unwrap().total());
    let params = ModelParams::new(8, Boundary::Open);
    let step = frozen.len() / 10;
    for s in frozen.iter().step_by(step).take(10) {
        let sector = enumerate_basis(8, s.n_atoms(), Boundary::Open).unwrap();
        let h = build_effective(&params, &sector).unwrap();
        let psi0 = Wavefunction::product(&sector, s).unwrap();
        let start = density(&psi0, &sector).unwrap().total();
        let states = evolve(&h, &psi0, &EvolutionPlan::new(20.0, 5.0).with_method(Method::Krylov)).unwrap();
        for psi in &states {
            for (a, b) in density(psi, &sector).unwrap().total().iter().zip(&start) {
                assert!((a - b).abs() < 1e-10, "{s} moved at t = {}", psi.time);
            }
        }
    }
}

#[test]
fn frozen_states_are_annihilated_exactly() {
    let params = ModelParams::new(6, Boundary::Open);
    let all = Basis::all_sectors(6, Boundary::Open).unwrap();
    let h = build_effective(&params, &all).unwrap();
    for s in enumerate_frozen_states(6).unwrap() {
        let i = all.index_of(&s).unwrap();
        let out = h.apply(&Wavefunction::basis_state(all.len(), i).amplitudes);
        assert!(out.iter().all(|a| a.norm() == 0.0), "{s}");
    }
}

#[test]
fn moving_states_are_excluded() {
    let frozen: Vec<String> = enumerate_frozen_states(4).unwrap().iter().map(|s| s.to_string()).collect();
    for moving in ["uu..", ".uu.", "..uu", "u.Du", ".D.u"] {
        assert!(!frozen.iter().any(|f| f == moving), "{moving}");
    }
    for still in ["u.u.", "uDDu", "....", "DuDu"] {
        assert!(frozen.iter().any(|f| f == still), "{still}");
    }
}
