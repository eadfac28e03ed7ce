//! Randomized invariants of the builders, the propagator and the basis code.

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use leapfrog::hamiltonians::{
    build_effective, build_flux_error, build_gauged, build_lab_frame, conserved_charge, restricted, Effective, Gauged,
};
use leapfrog::observables::density;
use leapfrog::propagator::{evolve, EvolutionPlan, Method, Wavefunction};
use leapfrog::{enumerate_basis, Basis, Boundary, FockState, ModelParams, SignMode, SiteOccupation, SparseOperator};

fn occupation() -> impl Strategy<Value = SiteOccupation> {
    prop_oneof![
        Just(SiteOccupation::Empty),
        Just(SiteOccupation::Up),
        Just(SiteOccupation::Down),
        Just(SiteOccupation::Doublon),
    ]
}

fn loadout(max_sites: usize) -> impl Strategy<Value = FockState> {
    prop::collection::vec(occupation(), 2..=max_sites)
        .prop_map(|occ| FockState::from_occupations(&occ).unwrap())
        .prop_filter("needs an atom", |s| s.n_atoms() > 0)
}

fn up_loadout(max_sites: usize) -> impl Strategy<Value = FockState> {
    prop::collection::vec(prop_oneof![Just(SiteOccupation::Empty), Just(SiteOccupation::Up)], 3..=max_sites)
        .prop_map(|occ| FockState::from_occupations(&occ).unwrap())
        .prop_filter("needs two atoms", |s| s.n_atoms() > 1)
}

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Open), Just(Boundary::Periodic), Just(Boundary::Antiperiodic)]
}

fn spectrum(h: &SparseOperator) -> Vec<f64> {
    let mut ev: Vec<f64> = h.to_dense().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn expectation(h: &SparseOperator, psi: &Wavefunction) -> f64 {
    let hp = h.apply(&psi.amplitudes);
    psi.amplitudes.iter().zip(&hp).map(|(a, b)| a.conj() * b).sum::<C64>().re
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn builders_are_hermitian_and_conserve_number(
        sites in 2usize..=5,
        atoms in 1usize..=4,
        boundary in boundary(),
        u in 0.0f64..20.0,
        omega in 0.0f64..20.0,
        dphi in -0.5f64..0.5,
    ) {
        prop_assume!(atoms <= 2 * sites);
        let basis = enumerate_basis(sites, atoms, boundary).unwrap();
        let p = ModelParams::new(sites, boundary).with_interaction(u).with_drive(omega).with_flux_error(dphi);
        // Builders fail if a coupling leaves the fixed-N basis.
        for h in [
            build_lab_frame(&p, &basis).unwrap(),
            build_gauged(&p, &basis).unwrap(),
            build_effective(&p, &basis).unwrap(),
            build_flux_error(&p, &basis).unwrap(),
        ] {
            prop_assert!(h.require_hermitian().is_ok());
        }
    }

    #[test]
    fn effective_model_conserves_the_charge(seed in loadout(7)) {
        let p = ModelParams::new(seed.sites(), Boundary::Open);
        let (basis, _) = restricted(&Effective(p), &[seed]).unwrap();
        let c = conserved_charge(&seed);
        for s in basis.states() {
            prop_assert_eq!(s.n_atoms(), seed.n_atoms());
            prop_assert_eq!(conserved_charge(s), c);
        }
    }

    #[test]
    fn lab_and_gauged_frames_share_spectra(
        sites in 2usize..=5,
        atoms in 1usize..=4,
        u in 0.0f64..15.0,
        omega in 0.0f64..15.0,
    ) {
        prop_assume!(atoms <= 2 * sites);
        let basis = enumerate_basis(sites, atoms, Boundary::Open).unwrap();
        prop_assume!(basis.len() <= 5000);
        let p = ModelParams::new(sites, Boundary::Open).with_interaction(u).with_drive(omega);
        let a = spectrum(&build_lab_frame(&p, &basis).unwrap());
        let b = spectrum(&build_gauged(&p, &basis).unwrap());
        let scale = a.iter().map(|x| x.abs()).fold(1.0, f64::max);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * scale, "{} vs {}", x, y);
        }
    }

    #[test]
    fn evolution_conserves_norm_and_energy(seed in loadout(6), u in 2.0f64..20.0, t in 0.5f64..6.0) {
        let p = ModelParams::new(seed.sites(), Boundary::Open).resonant(u);
        let (basis, h) = restricted(&Gauged(p), &[seed]).unwrap();
        let psi0 = Wavefunction::product(&basis, &seed).unwrap();
        let e0 = expectation(&h, &psi0);
        let krylov = evolve(&h, &psi0, &EvolutionPlan::new(t, t / 3.0).with_method(Method::Krylov)).unwrap();
        for psi in &krylov {
            prop_assert!((psi.norm() - 1.0).abs() <= 1e-9);
            prop_assert!((expectation(&h, psi) - e0).abs() <= 1e-8 * h.norm_bound().max(1.0));
        }
        if h.dim() <= 4096 {
            let dense = evolve(&h, &psi0, &EvolutionPlan::new(t, t / 3.0).with_method(Method::Dense)).unwrap();
            for (a, b) in krylov.iter().zip(&dense) {
                let gap = a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                prop_assert!(gap <= 1e-8, "gap {}", gap);
            }
        }
    }

    #[test]
    fn evolution_reverses(seed in up_loadout(8), t in 0.5f64..10.0) {
        let (basis, h) = restricted(&Effective(ModelParams::new(seed.sites(), Boundary::Open)), &[seed]).unwrap();
        let psi0 = Wavefunction::product(&basis, &seed).unwrap();
        let fwd = evolve(&h, &psi0, &EvolutionPlan::new(t, t).with_method(Method::Krylov)).unwrap();
        let back = leapfrog::propagator::KrylovPropagator::new(&h, 30, 1e-9).unwrap().propagate(&fwd[1].amplitudes, -t);
        let gap = back.iter().zip(&psi0.amplitudes).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(gap <= 1e-8, "gap {}", gap);
    }

    #[test]
    fn fermions_and_hardcore_bosons_share_densities(seed in up_loadout(9), t in 0.5f64..8.0) {
        let mut profiles = Vec::new();
        for signs in [SignMode::Fermionic, SignMode::HardcoreBoson] {
            let model = Effective(ModelParams::new(seed.sites(), Boundary::Open).with_signs(signs));
            let (basis, h) = restricted(&model, &[seed]).unwrap();
            let states = evolve(&h, &Wavefunction::product(&basis, &seed).unwrap(), &EvolutionPlan::new(t, t / 2.0)).unwrap();
            profiles.push(states.iter().map(|w| density(w, &basis).unwrap().total()).collect::<Vec<_>>());
        }
        for (p, q) in profiles[0].iter().zip(&profiles[1]) {
            for (x, y) in p.iter().zip(q) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn reachability_is_idempotent(seed in loadout(7)) {
        let model = Effective(ModelParams::new(seed.sites(), Boundary::Open));
        let (basis, _) = restricted(&model, &[seed]).unwrap();
        let again = leapfrog::hamiltonians::reachable_states(&model, basis.states()).unwrap();
        prop_assert_eq!(again.states(), basis.states());
        let from_other = leapfrog::hamiltonians::reachable_states(&model, &[*basis.states().last().unwrap()]).unwrap();
        prop_assert_eq!(from_other.states(), basis.states());
    }

    #[test]
    fn basis_index_inverts_sequence(sites in 1usize..=6, atoms in 0usize..=4) {
        prop_assume!(atoms <= 2 * sites);
        let basis: Basis = enumerate_basis(sites, atoms, Boundary::Open).unwrap();
        for (i, s) in basis.states().iter().enumerate() {
            prop_assert_eq!(basis.index_of(s), Some(i));
            prop_assert_eq!(FockState::from_key(sites, s.key()).unwrap(), *s);
        }
    }
}
