//! Variational engines against the exact solver on a 4x4 lattice.

use hilbertnet::observables::{local_z_map, staggered_magnetization_sq};
use hilbertnet::{
    dmrg_ground_state, ed_ground_state, map_to_chain, ttn_ground_state, Boundary, CurveKind, DmrgConfig,
    IsingModel2D, SiteMapping, TtnConfig,
};

const ENERGY_TOL: f64 = 1e-6;
const OBSERVABLE_TOL: f64 = 1e-4;

fn check(lambda: f64, kind: CurveKind, boundary: Boundary, bond: usize) {
    let model = IsingModel2D::new(4, lambda, boundary).unwrap();
    let mapping = SiteMapping::new(kind, 4).unwrap();
    let terms = map_to_chain(&model, &mapping).unwrap();

    let exact = ed_ground_state(&terms, 1e-12).unwrap();
    let mps = dmrg_ground_state(&terms, &DmrgConfig::with_bond(bond)).unwrap();
    let ttn = ttn_ground_state(&terms, &TtnConfig::with_bond(bond)).unwrap();
    let label = format!("{kind} {boundary} lambda={lambda}");

    for (engine, energy) in [("mps", mps.energy), ("ttn", ttn.energy)] {
        assert!(energy >= exact.energy - 1e-8, "{label} {engine} below exact: {energy} < {}", exact.energy);
        assert!((energy - exact.energy) / 16.0 < ENERGY_TOL, "{label} {engine}: {energy} vs {}", exact.energy);
    }

    let exact_m2 = staggered_magnetization_sq(&exact, &mapping).unwrap();
    let exact_z = local_z_map(&exact, &mapping).unwrap();
    let engines = [
        ("mps", staggered_magnetization_sq(&mps.state, &mapping).unwrap(), local_z_map(&mps.state, &mapping).unwrap()),
        ("ttn", staggered_magnetization_sq(&ttn.state, &mapping).unwrap(), local_z_map(&ttn.state, &mapping).unwrap()),
    ];
    for (engine, m2, z) in engines {
        assert!((m2 - exact_m2).abs() < OBSERVABLE_TOL, "{label} {engine} M^2 {m2} vs {exact_m2}");
        let worst = z.values.iter().zip(&exact_z.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < OBSERVABLE_TOL, "{label} {engine} local z off by {worst}");
    }
}

#[test]
fn disordered_phase_open() {
    check(3.5, CurveKind::Hilbert, Boundary::Open, 64);
    check(3.5, CurveKind::Snake, Boundary::Open, 64);
}

// Wraparound bonds make the Hilbert chain long-ranged; m = 64 leaves about 5e-6 per site.
#[test]
fn near_transition_periodic() {
    check(2.9, CurveKind::Hilbert, Boundary::Periodic, 128);
    check(2.9, CurveKind::Snake, Boundary::Periodic, 128);
}

#[test]
fn ordered_phase_open() {
    check(1.0, CurveKind::Hilbert, Boundary::Open, 64);
}

#[test]
fn tree_engine_rejects_non_power_of_two_chains() {
    let model = IsingModel2D::new(3, 1.0, Boundary::Open).unwrap();
    let terms = map_to_chain(&model, &SiteMapping::new(CurveKind::Snake, 3).unwrap()).unwrap();
    assert!(ttn_ground_state(&terms, &TtnConfig::default()).is_err());
    assert!(dmrg_ground_state(&terms, &DmrgConfig::with_bond(8)).is_ok());
}
