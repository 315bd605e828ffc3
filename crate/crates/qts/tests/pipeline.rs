//! Cross-module checks: solver backends against each other, and the sweep
//! surface against the master-equation rate assembly.

use qts::bath::BathParams;
use qts::eigen::{dense_eigh, lanczos_lowest, OverlapTable, CLUSTER_TOL};
use qts::master::{assemble_rates, evolve, PopulationState, RateMode};
use qts::model::{down_hamiltonian, ModelSpec};
use qts::tomography::{
    coupler_for_kink, kink_reference_state, retained_up_manifold, run_sweep_with, SweepSpec,
};

#[test]
fn iterative_and_dense_solvers_agree_on_a_probe_chain() {
    let model = ModelSpec::kink_chain(8, 2.0, 2.0).unwrap();
    let h = model.source_hamiltonian().unwrap();
    let dense = dense_eigh(&h).unwrap();
    let lz = lanczos_lowest(&h, 9, 1e-10, 3).unwrap();
    // the nine-state band is nondegenerate here, so states compare one-to-one
    assert_eq!(dense.clusters(CLUSTER_TOL)[..9].len(), 9);
    let target = kink_reference_state(8, 4).unwrap();
    let td = OverlapTable::against_state(&dense, &target).unwrap();
    let tl = OverlapTable::against_state(&lz, &target).unwrap();
    for n in 0..9 {
        let de = dense.eigenvalue(n);
        assert!(
            (de - lz.eigenvalue(n)).abs() < 1e-7,
            "level {n}: {de} vs {}",
            lz.eigenvalue(n)
        );
        assert!((td.get(n, 0) - tl.get(n, 0)).abs() < 1e-8);
    }
}

fn sweep_setup() -> (
    ModelSpec,
    SweepSpec,
    BathParams,
    qts::EigenSet,
    qts::TomographyGrid,
) {
    let model = ModelSpec::kink_chain(3, 2.0, 0.5).unwrap();
    let sweep = SweepSpec {
        j_p: 2.0,
        delta_p: 0.01,
        l_list: vec![2],
        k_states: 4,
        epsilon_rel: None,
        seed: 11,
    };
    let bath = BathParams::fdt_from_mk(10.0, 12.0).unwrap();
    let up = retained_up_manifold(&model, sweep.k_states, sweep.seed).unwrap();
    let grid = run_sweep_with(&model, &sweep, &bath, &up).unwrap();
    (model, sweep, bath, up, grid)
}

#[test]
fn sweep_surface_matches_the_rate_matrix() {
    let (model, sweep, bath, up, grid) = sweep_setup();
    let h_s = model.source_hamiltonian().unwrap();
    let pc = coupler_for_kink(3, 2, sweep.j_p, sweep.delta_p).unwrap();
    let h_d = down_hamiltonian(&h_s, &pc.coupling_hamiltonian().unwrap()).unwrap();
    let down = dense_eigh(&h_d).unwrap();
    let table = OverlapTable::between(&up, &down).unwrap();
    let col = grid.column(0);
    let imax = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
    for ei in [imax, imax - 15, imax + 15] {
        let eps = grid.raw_epsilon(0, ei);
        let rm = assemble_rates(&up, &down, &table, eps, &bath, RateMode::Marcus).unwrap();
        let want = grid.value(0, ei);
        let got = rm.escape_rate(0);
        assert!(
            (got - want).abs() <= 1e-12 * want.max(1e-30),
            "ε index {ei}: {got} vs {want}"
        );
    }
}

#[test]
fn escape_rate_sets_the_initial_decay_slope() {
    let (model, sweep, bath, up, grid) = sweep_setup();
    let h_s = model.source_hamiltonian().unwrap();
    let pc = coupler_for_kink(3, 2, sweep.j_p, sweep.delta_p).unwrap();
    let h_d = down_hamiltonian(&h_s, &pc.coupling_hamiltonian().unwrap()).unwrap();
    let down = dense_eigh(&h_d).unwrap();
    let table = OverlapTable::between(&up, &down).unwrap();
    let col = grid.column(0);
    let imax = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
    let rm = assemble_rates(
        &up,
        &down,
        &table,
        grid.raw_epsilon(0, imax),
        &bath,
        RateMode::Marcus,
    )
    .unwrap();
    let gamma = rm.escape_rate(0);
    assert!(gamma > 0.0);
    let t = 1e-3 / gamma;
    let p0 = PopulationState::initial_down(&rm, 0).unwrap();
    let states = evolve(&rm, &p0, &[t]).unwrap();
    let p = states[0].probabilities()[0];
    // early times: back-transfer only enters at second order in Γ·t
    assert!(
        ((-p.ln()) / (gamma * t) - 1.0).abs() < 5e-3,
        "slope {} vs Γ {gamma}",
        -p.ln() / t
    );
}
