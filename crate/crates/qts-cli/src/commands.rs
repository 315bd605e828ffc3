//! Subcommand drivers: each builds its physics objects from the validated
//! plan, runs the computation, and emits artifacts through the output sink.

use qts::eigen::{lanczos_lowest, EigenSet, OverlapTable, CLUSTER_TOL};
use qts::master::{assemble_rates, evolve as integrate, PopulationState, RateMode};
use qts::model::down_hamiltonian;
use qts::pauli::{PauliSum, DENSE_QUBIT_LIMIT};
use qts::tomography::{
    coupler_for_kink, direct_kink_profile, extract_peaks, reconstruct_amplitudes,
    retained_up_manifold, run_sweep_with,
};
use qts::SweepSpec;

use crate::config::{Command, Plan};
use crate::error::Result;
use crate::output::{fmt_float, Artifact, Cell, Sink};

pub fn run(plan: &Plan) -> Result<()> {
    match plan.command {
        Command::Spectrum => spectrum(plan),
        Command::Sweep => sweep(plan),
        Command::Evolve => evolve(plan),
        Command::Validate => validate(plan),
    }
}

fn validate(plan: &Plan) -> Result<()> {
    println!("config ok");
    println!("{}", plan.resolved);
    Ok(())
}

fn spectrum(plan: &Plan) -> Result<()> {
    let up = retained_up_manifold(&plan.model, plan.k, plan.seed)?;
    let e0 = up.eigenvalue(0);
    let mut art = Artifact::new("spectrum", ["n", "energy_ghz", "energy_rel_ghz", "residual"]);
    for i in 0..up.len() {
        art.push(vec![
            i.into(),
            up.eigenvalue(i).into(),
            (up.eigenvalue(i) - e0).into(),
            up.residuals()[i].into(),
        ]);
    }
    art.note(
        "clusters",
        format!("{}", up.clusters(CLUSTER_TOL).len()),
    );
    let sink = Sink::new(plan);
    let path = sink.write(&art)?;
    println!(
        "spectrum: {} levels retained (requested {})",
        up.len(),
        plan.k
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn sweep(plan: &Plan) -> Result<()> {
    let spec = SweepSpec {
        j_p: plan.j_p,
        delta_p: plan.delta_p,
        l_list: plan.l_list.clone(),
        k_states: plan.k,
        epsilon_rel: plan.grid.clone(),
        seed: plan.seed,
    };
    let up = retained_up_manifold(&plan.model, plan.k, plan.seed)?;
    let mut grid = run_sweep_with(&plan.model, &spec, &plan.bath, &up)?;
    grid.set_normalized(plan.normalize);
    let peaks = extract_peaks(&grid, &up)?;
    let amp = reconstruct_amplitudes(&peaks);

    let mut sink = Sink::new(plan);
    for (li, r) in grid.reports().iter().enumerate() {
        if r.flagged {
            sink.warn(format!(
                "reference l={} fidelity {:.6} gap {:.6} GHz: reconstructed amplitudes \
                 in this column are biased",
                grid.l_list()[li],
                r.fidelity,
                r.gap
            ));
        }
    }
    for &(l, pos, height) in peaks.unmatched() {
        sink.warn(format!(
            "maximum in column l={l} at epsilon_rel={} (height {}) matches no retained level",
            fmt_float(pos),
            fmt_float(height)
        ));
    }

    let mut surface = Artifact::new(
        "grid",
        [
            "l",
            "epsilon_ghz",
            "epsilon_rel_ghz",
            "gamma_over_deltap_sq",
            "gamma_normalized",
        ],
    );
    for (li, &l) in grid.l_list().iter().enumerate() {
        for ei in 0..grid.epsilon_rel().len() {
            surface.push(vec![
                l.into(),
                grid.raw_epsilon(li, ei).into(),
                grid.epsilon_rel()[ei].into(),
                grid.value(li, ei).into(),
                grid.normalized_value(li, ei).into(),
            ]);
        }
    }
    surface.note("w_ghz", fmt_float(grid.w()));
    surface.note("global_max", fmt_float(grid.global_max()));

    let mut peak_art = Artifact::new(
        "peaks",
        [
            "l",
            "n",
            "multiplicity",
            "measured",
            "epsilon_rel_ghz",
            "epsilon_ghz",
            "height_over_deltap_sq",
            "sigma_ghz",
            "reference_fidelity",
        ],
    );
    for pk in peaks.peaks() {
        let li = peaks
            .l_list()
            .iter()
            .position(|&l| l == pk.l)
            .expect("peak columns come from the scanned list");
        peak_art.push(vec![
            pk.l.into(),
            pk.n.into(),
            pk.multiplicity.into(),
            pk.measured.into(),
            pk.position_rel.into(),
            pk.position_raw.into(),
            pk.height.into(),
            pk.width.into(),
            peaks.fidelities()[li].into(),
        ]);
    }

    let mut amp_art = Artifact::new(
        "amplitudes",
        ["n", "l", "amplitude_sq", "multiplicity", "fidelity_correction"],
    );
    for n in 0..amp.n_levels() {
        for (li, &l) in amp.l_list().iter().enumerate() {
            amp_art.push(vec![
                n.into(),
                l.into(),
                amp.value(n, li).into(),
                amp.multiplicity(n, li).into(),
                amp.correction(li).into(),
            ]);
        }
    }

    let surface_path = sink.write(&surface)?;
    let peaks_path = sink.write(&peak_art)?;
    let amp_path = sink.write(&amp_art)?;
    let mut written = vec![surface_path, peaks_path, amp_path];

    // For the chain shorthand the scanned basis is the kink basis, so the
    // exact profile is available from the eigenvectors for comparison.
    if plan.chain.is_some() {
        let direct = direct_kink_profile(&up)?;
        let mut oracle = Artifact::new(
            "oracle",
            ["n", "l", "direct_sq", "reconstructed_sq", "ratio"],
        );
        for (n, row) in direct.iter().enumerate() {
            for (li, &l) in amp.l_list().iter().enumerate() {
                let d = row[l - 1];
                let r = amp.value(n, li);
                oracle.push(vec![n.into(), l.into(), d.into(), r.into(), (r / d).into()]);
            }
        }
        written.push(sink.write(&oracle)?);
    }

    println!(
        "sweep: {} kink positions, {} retained levels, {} peaks, {} warnings",
        grid.l_list().len(),
        peaks.n_levels(),
        peaks.peaks().len(),
        sink.warnings().len()
    );
    for w in sink.warnings() {
        println!("warning: {w}");
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

/// Lowest part of a spectrum, truncated on a degenerate-cluster boundary at
/// or past `k` states. Mirrors the solver choice used inside the sweeps.
fn solve_manifold(op: &PauliSum, k: usize, seed: u64) -> Result<EigenSet> {
    let set = if op.n_qubits() <= DENSE_QUBIT_LIMIT {
        qts::eigen::dense_eigh(op)?
    } else {
        lanczos_lowest(op, (k + 4).min(op.dim()), 1e-10, seed)?
    };
    let boundary = set
        .clusters(CLUSTER_TOL)
        .into_iter()
        .find(|c| c.end >= k)
        .map(|c| c.end)
        .unwrap_or(set.len());
    Ok(set.truncated(boundary))
}

fn evolve(plan: &Plan) -> Result<()> {
    let n = plan.model.n_qubits();
    let l = plan.l_list[0];
    let up = retained_up_manifold(&plan.model, plan.k, plan.seed)?;
    let h_s = plan.model.source_hamiltonian()?;
    let pc = coupler_for_kink(n, l, plan.j_p, plan.delta_p)?;
    let h_d = down_hamiltonian(&h_s, &pc.coupling_hamiltonian()?)?;
    let down = solve_manifold(&h_d, 2, plan.seed)?;
    let table = OverlapTable::between(&up, &down)?;

    let eps = plan.epsilon_ghz.unwrap_or_else(|| {
        // default: ground-state resonance, mean of the lowest up cluster
        let c0 = &up.clusters(CLUSTER_TOL)[0];
        let mean0 =
            c0.clone().map(|i| up.eigenvalue(i)).sum::<f64>() / c0.len() as f64;
        mean0 - down.eigenvalue(0) + plan.bath.epsilon_p()
    });
    let rm = assemble_rates(&up, &down, &table, eps, &plan.bath, RateMode::Marcus)?;
    let escape_norm = rm.escape_rate(0);
    // rates carry 1/Δ_p²; physical time enters through τ = Δ_p²·t
    let dp_sq = plan.delta_p * plan.delta_p;
    let escape_ns = dp_sq * escape_norm;
    let t_max = plan.t_max_ns.unwrap_or_else(|| {
        if escape_ns > 0.0 && escape_ns.is_finite() {
            10.0 / escape_ns
        } else {
            1.0
        }
    });
    let steps = plan.time_steps;
    let times: Vec<f64> = (0..steps)
        .map(|i| t_max * i as f64 / (steps - 1) as f64)
        .collect();

    let p0 = PopulationState::initial_down(&rm, 0)?;
    let states = if dp_sq > 0.0 {
        let scaled: Vec<f64> = times[1..].iter().map(|t| t * dp_sq).collect();
        let mut out = vec![p0.clone()];
        out.extend(integrate(&rm, &p0, &scaled)?);
        out
    } else {
        // zero probe tunneling: nothing moves
        vec![p0; steps]
    };

    let mut columns = vec!["t_ns".to_string()];
    for m in 0..rm.n_down() {
        columns.push(format!("p_down_{m}"));
    }
    for k in 0..rm.n_up() {
        columns.push(format!("p_up_{k}"));
    }
    let mut art = Artifact::new("trajectory", columns);
    for (i, st) in states.iter().enumerate() {
        let mut row = vec![Cell::from(times[i])];
        row.extend(st.probabilities().iter().map(|&p| Cell::from(p)));
        art.push(row);
    }
    art.note("l", l.to_string());
    art.note("epsilon_ghz", fmt_float(eps));
    art.note("escape_rate_per_ns", fmt_float(escape_ns));
    let join = |es: &[f64]| {
        es.iter()
            .map(|&e| fmt_float(e))
            .collect::<Vec<_>>()
            .join(" ")
    };
    art.note("down_energies_ghz", join(rm.down_energies()));
    art.note("up_energies_ghz", join(rm.up_energies()));
    art.note(
        "final_total_probability",
        fmt_float(states.last().expect("at least two steps").total()),
    );

    let sink = Sink::new(plan);
    let path = sink.write(&art)?;
    println!(
        "evolve: l={l}, eps={} GHz, escape rate {} 1/ns, horizon {} ns",
        fmt_float(eps),
        fmt_float(escape_ns),
        fmt_float(t_max)
    );
    println!("wrote {}", path.display());
    Ok(())
}
