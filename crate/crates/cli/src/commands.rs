use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use qtraj_core::channel::{certify, default_primitivity_bound};
use qtraj_core::contractivity::{certify_primitive_word, fixed_point_residual, nd_falsifier, search_contractive_sequence_with, Certification};
use qtraj_core::ergodic::{ergodic_mean_trace, kernel_push, sample_invariant, wasserstein1_subsampled, EmpiricalMeasure, StateFunctional, SubsampledDistance};
use qtraj_core::io::InstrumentFile;
use qtraj_core::stats::{mean, quantile};
use qtraj_core::trajectory::{kernel_condition, run_pair, TrajectoryRecord};
use qtraj_core::{tolerances, Error, Instrument};

use crate::output::{complex, matrix_block, num, write, Csv, Metadata};
use crate::parse::{parse_observable, parse_state, slug};
use crate::{Common, ContractivityArgs, Failure, InvariantArgs, SimulateArgs};

const DEFAULT_OUT: &str = "qtraj-out";

type CmdResult = std::result::Result<(), Failure>;

fn invalid(e: Error) -> Failure {
    Failure::Validation(e.to_string())
}

fn load(common: &Common) -> std::result::Result<(InstrumentFile, Instrument), Failure> {
    let text = std::fs::read_to_string(&common.instrument)
        .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", common.instrument.display())))?;
    let file = InstrumentFile::from_json(&text).map_err(invalid)?;
    let instr = file.to_instrument().map_err(invalid)?;
    Ok((file, instr))
}

fn metadata(command: &str, common: &Common, file: &InstrumentFile) -> Metadata {
    let mut m = Metadata::new(command);
    m.push("instrument", common.instrument.display()).push("instrument_sha256", file.hash());
    m.tolerances(&tolerances());
    m
}

fn finish(meta: &mut Metadata, common: &Common) {
    if !common.no_timestamp {
        meta.timestamp();
    }
}

fn out_dir(common: &Common) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn emit_report(common: &Common, name: &str, text: &str) -> CmdResult {
    print!("{text}");
    if let Some(dir) = &common.out {
        write(dir, name, text)?;
    }
    Ok(())
}

pub fn validate(common: &Common) -> CmdResult {
    let (file, instr) = load(common)?;
    let mut meta = metadata("validate", common, &file);
    finish(&mut meta, common);
    let mut s = meta.header();
    let _ = writeln!(s, "status: valid");
    let _ = writeln!(s, "dim: {}", instr.dim());
    let _ = writeln!(s, "outcomes: {}", instr.labels().join(", "));
    let _ = writeln!(s, "completeness_residual: {:e}", instr.completeness_residual());
    if let Some(ops) = file.perfect_matrices()? {
        let _ = writeln!(s, "perfect_operators: {}", ops.len());
        let _ = writeln!(s, "perfect_completeness_residual: {:e}", qtraj_core::instrument::completeness_residual(&ops)?);
    }
    if let Some(eta) = &file.eta {
        let cols = eta.first().map_or(0, Vec::len);
        let sums: Vec<String> = (0..cols).map(|j| num(eta.iter().map(|r| r[j]).sum::<f64>())).collect();
        let _ = writeln!(s, "eta_column_sums: {}", sums.join(", "));
    }
    emit_report(common, "validate.txt", &s)
}

pub fn analyze(common: &Common) -> CmdResult {
    let (file, instr) = load(common)?;
    let cert = certify(&instr.total_channel())?;
    let mut meta = metadata("analyze", common, &file);
    meta.push("primitivity_bound", default_primitivity_bound(instr.dim()));
    finish(&mut meta, common);
    let mut s = meta.header();
    let _ = writeln!(s, "irreducible: {}", cert.irreducible);
    let _ = writeln!(s, "period: {}", cert.period.map_or("undefined".to_string(), |p| p.to_string()));
    let _ = writeln!(s, "primitive: {}", cert.primitive);
    let _ = writeln!(s, "fixed_space_dim: {}", cert.fixed_space_dim);
    let _ = writeln!(s, "min_eig_inv: {:e}", cert.min_eig_inv);
    let _ = writeln!(s, "spectral_radius: {}", cert.spectral_radius);
    let peri: Vec<String> = cert.peripheral_eigenvalues.iter().map(|&z| complex(z)).collect();
    let _ = writeln!(s, "peripheral_eigenvalues: {}", peri.join(", "));
    for note in &cert.notes {
        let _ = writeln!(s, "note: {note}");
    }
    s.push_str(&matrix_block("invariant_state", cert.invariant_state.matrix()));
    emit_report(common, "analyze.txt", &s)
}

fn run_csv(meta: &Metadata, instr: &Instrument, rec: &TrajectoryRecord) -> String {
    let labels = instr.labels();
    let mut csv = Csv::new(meta, &["step", "outcome", "fidelity", "log_likelihood"]);
    for k in 0..=rec.steps {
        let outcome = if k == 0 { String::new() } else { labels[rec.word[k - 1]].to_string() };
        csv.row(&[k.to_string(), outcome, num(rec.fidelities[k]), num(rec.log_likelihoods[k])]);
    }
    csv.into_string()
}

fn state_dump(meta: &Metadata, rec: &TrajectoryRecord) -> Option<String> {
    let (states, est) = (rec.states.as_ref()?, rec.est_states.as_ref()?);
    let mut s = meta.header();
    for (k, (rho, hat)) in states.iter().zip(est).enumerate() {
        s.push_str(&matrix_block(&format!("rho {k}"), rho.matrix()));
        s.push_str(&matrix_block(&format!("estimate {k}"), hat.matrix()));
    }
    Some(s)
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    let common = &args.common;
    let (file, instr) = load(common)?;
    let d = instr.dim();
    let rho0 = parse_state(&args.rho0, d).map_err(invalid)?;
    let est0 = parse_state(&args.estimate, d).map_err(invalid)?;
    if !kernel_condition(&rho0, &est0).holds {
        return Err(invalid(Error::KernelConditionViolated));
    }
    let seeds = args.seed.map_or(args.seeds.clone(), |s| s..s + 1);
    let runs: Vec<(u64, qtraj_core::Result<TrajectoryRecord>)> =
        seeds.clone().into_par_iter().map(|s| (s, run_pair(&instr, &rho0, &est0, args.steps, s, args.store_states))).collect();

    let dir = out_dir(common);
    let mut base = metadata("simulate", common, &file);
    base.push("rho0", &args.rho0).push("estimate", &args.estimate).push("steps", args.steps);
    let mut summary_meta = base.clone();
    summary_meta.push("seeds", format!("{}..{}", seeds.start, seeds.end));
    finish(&mut summary_meta, common);

    let mut summary = Csv::new(&summary_meta, &["seed", "status", "collapse_step", "final_fidelity", "log_likelihood"]);
    let mut finished = Vec::new();
    for (seed, result) in runs {
        match result {
            Ok(rec) => {
                let mut meta = base.clone();
                meta.push("seed", seed);
                finish(&mut meta, common);
                write(&dir, &format!("run_{seed}.csv"), &run_csv(&meta, &instr, &rec))?;
                if let Some(dump) = state_dump(&meta, &rec) {
                    write(&dir, &format!("run_{seed}_states.txt"), &dump)?;
                }
                summary.row(&[
                    seed.to_string(),
                    "ok".into(),
                    String::new(),
                    num(rec.final_fidelity()),
                    num(rec.log_likelihood()),
                ]);
                finished.push(rec);
            }
            Err(Error::FilterCollapse { step, .. }) => {
                summary.row(&[seed.to_string(), "filter_collapse".into(), step.to_string(), String::new(), String::new()]);
            }
            Err(e) => return Err(e.into()),
        }
    }
    write(&dir, "runs.csv", &summary.into_string())?;

    let mut agg = Csv::new(&summary_meta, &["step", "runs", "mean", "q10", "q50", "q90"]);
    for k in 0..=args.steps {
        let f: Vec<f64> = finished.iter().map(|r| r.fidelities[k]).collect();
        if f.is_empty() {
            break;
        }
        agg.row(&[
            k.to_string(),
            f.len().to_string(),
            num(mean(&f)),
            num(quantile(&f, 0.1)),
            num(quantile(&f, 0.5)),
            num(quantile(&f, 0.9)),
        ]);
    }
    write(&dir, "aggregate.csv", &agg.into_string())?;

    let total = seeds.end - seeds.start;
    println!("runs: {total}, completed: {}, filter collapses: {}", finished.len(), total as usize - finished.len());
    if !finished.is_empty() {
        let finals: Vec<f64> = finished.iter().map(TrajectoryRecord::final_fidelity).collect();
        println!(
            "final fidelity: median {}, q10 {}, q90 {}",
            quantile(&finals, 0.5),
            quantile(&finals, 0.1),
            quantile(&finals, 0.9)
        );
    }
    println!("output: {}", dir.display());
    Ok(())
}

pub fn contractivity(args: &ContractivityArgs) -> CmdResult {
    let common = &args.common;
    let (file, instr) = load(common)?;
    let probe = parse_state(&args.probe, instr.dim()).map_err(invalid)?;
    let mut meta = metadata("contractivity", common, &file);
    let result = match &args.word {
        Some(labels) => {
            let labels: Vec<&str> = labels.split(',').map(str::trim).collect();
            let word = instr.word_from_labels(&labels).map_err(invalid)?;
            meta.push("mode", "word").push("word", labels.join(",")).push("n_max", args.n_max);
            certify_primitive_word(&instr, &word, args.n_max)?
        }
        None => {
            meta.push("mode", "search")
                .push("max_len", args.max_len)
                .push("probe", &args.probe)
                .push("beam_width", args.beam_width)
                .push("beam_depth", args.beam_depth)
                .push("seed", args.seed);
            search_contractive_sequence_with(&instr, &probe, args.max_len, tolerances().cont, args.seed, args.beam_width, args.beam_depth)?
        }
    };
    let nd = if args.nd_subspaces > 0 {
        let ops = file
            .perfect_matrices()?
            .ok_or_else(|| Failure::Validation("the non-darkness check needs an instrument given by perfect_ops".into()))?;
        meta.push("nd_subspaces", args.nd_subspaces).push("nd_max_len", args.nd_max_len);
        Some(nd_falsifier(&ops, args.nd_subspaces, args.nd_max_len, args.seed)?)
    } else {
        None
    };
    finish(&mut meta, common);

    let mut s = meta.header();
    let _ = writeln!(s, "certified: {}", result.is_certified());
    let _ = writeln!(s, "best_defect: {:e}", result.best_defect());
    if let Certification::Certified(cert) = &result {
        let _ = writeln!(s, "word: {}", cert.word.join(","));
        let _ = writeln!(s, "word_length: {}", cert.word.len());
        let _ = writeln!(s, "defect: {:e}", cert.defect);
        let _ = writeln!(s, "top_singular: {}", cert.top_singular);
        let _ = writeln!(s, "reconstruction_error: {:e}", cert.reconstruction_error);
        let _ = writeln!(s, "fixed_point_residual: {:e}", fixed_point_residual(&instr, &cert.word_indices, &cert.z_est)?);
        s.push_str(&matrix_block("z_est", &cert.z_est));
        s.push_str(&matrix_block("x_est", &cert.x_est));
    }
    if let Some(report) = &nd {
        let _ = writeln!(s, "nd_subspaces_tested: {}", report.subspaces_tested);
        let _ = writeln!(s, "nd_words_tested: {}", report.words_tested);
        let _ = writeln!(s, "nd_refuted: {}", report.violation_lengths.len());
        let _ = writeln!(s, "nd_dark_candidates: {}", report.candidates.len());
        if let Some(m) = report.mean_violation_length() {
            let _ = writeln!(s, "nd_mean_violation_length: {m}");
        }
        for (k, cand) in report.candidates.iter().enumerate() {
            s.push_str(&matrix_block(&format!("dark_candidate {k} dim {}", cand.dim), &cand.basis));
        }
    }
    let dir = out_dir(common);
    let mut trace = Csv::new(&meta, &["length", "defect"]);
    for (len, defect) in result.defect_trace() {
        trace.row(&[len.to_string(), num(*defect)]);
    }
    write(&dir, "defect_trace.csv", &trace.into_string())?;
    write(&dir, "certificate.txt", &s)?;
    print!("{s}");
    Ok(())
}

fn atoms_csv(meta: &Metadata, mu: &EmpiricalMeasure) -> String {
    let d = mu.dim();
    let mut cols = vec!["weight".to_string()];
    for i in 0..d {
        for j in 0..d {
            cols.push(format!("rho{i}{j}_re"));
            cols.push(format!("rho{i}{j}_im"));
        }
    }
    let refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut csv = Csv::new(meta, &refs);
    for (rho, w) in mu.atoms() {
        let m = rho.matrix();
        let mut row = vec![num(*w)];
        for i in 0..d {
            for j in 0..d {
                row.push(num(m[(i, j)].re));
                row.push(num(m[(i, j)].im));
            }
        }
        csv.row(&row);
    }
    csv.into_string()
}

fn describe(w: &SubsampledDistance) -> String {
    if w.exact {
        format!("{} (exact)", num(w.mean))
    } else {
        format!("{} (spread {} over {} subsamples)", num(w.mean), num(w.spread), w.repetitions)
    }
}

fn trace_csv(meta: &Metadata, a: &[(usize, f64)], b: &[(usize, f64)]) -> String {
    let mut csv = Csv::new(meta, &["n", "mean_rho0", "mean_rho0_alt"]);
    for ((n, x), (_, y)) in a.iter().zip(b) {
        csv.row(&[n.to_string(), num(*x), num(*y)]);
    }
    csv.into_string()
}

pub fn invariant(args: &InvariantArgs) -> CmdResult {
    let common = &args.common;
    let (file, instr) = load(common)?;
    let d = instr.dim();
    let rho_a = parse_state(&args.rho0, d).map_err(invalid)?;
    let rho_b = parse_state(&args.rho0_alt, d).map_err(invalid)?;
    let observables: Vec<(String, StateFunctional)> = args
        .observables
        .iter()
        .map(|o| parse_observable(o, d).map(|g| (o.clone(), g)))
        .collect::<qtraj_core::Result<_>>()
        .map_err(invalid)?;
    let cert = certify(&instr.total_channel())?;

    let (a, b) = rayon::join(
        || sample_invariant(&instr, &rho_a, args.burn_in, args.samples, args.thin, args.seed),
        || sample_invariant(&instr, &rho_b, args.burn_in, args.samples, args.thin, args.seed + 1),
    );
    let (a, b) = (a?, b?);
    let replica = wasserstein1_subsampled(&a, &b, args.lp_cap, args.reps, args.seed + 2)?;
    let push_gap = |mu: &EmpiricalMeasure| -> qtraj_core::Result<SubsampledDistance> {
        wasserstein1_subsampled(mu, &kernel_push(&instr, mu)?, args.push_cap, args.reps, args.seed + 3)
    };
    let (push_a, push_b) = (push_gap(&a)?, push_gap(&b)?);

    let mut meta = metadata("invariant", common, &file);
    meta.push("rho0", &args.rho0)
        .push("rho0_alt", &args.rho0_alt)
        .push("samples", args.samples)
        .push("burn_in", args.burn_in)
        .push("thin", args.thin)
        .push("seed", args.seed)
        .push("lp_cap", args.lp_cap)
        .push("reps", args.reps)
        .push("push_cap", args.push_cap)
        .push("ergodic_steps", args.ergodic_steps)
        .push("trace_every", args.trace_every);
    finish(&mut meta, common);

    let dir = out_dir(common);
    write(&dir, "atoms.csv", &atoms_csv(&meta, &a))?;
    write(&dir, "atoms_alt.csv", &atoms_csv(&meta, &b))?;

    let mut s = meta.header();
    let _ = writeln!(s, "irreducible: {}", cert.irreducible);
    let _ = writeln!(s, "period: {}", cert.period.map_or("undefined".to_string(), |p| p.to_string()));
    let _ = writeln!(s, "w1_replicas: {}", describe(&replica));
    let _ = writeln!(s, "w1_push_rho0: {}", describe(&push_a));
    let _ = writeln!(s, "w1_push_rho0_alt: {}", describe(&push_b));
    if cert.period.is_some_and(|p| p > 1) {
        let _ = writeln!(s, "note: periodic channel; only Cesaro averages of the push are expected to converge");
    }
    for (k, (name, g)) in observables.iter().enumerate() {
        let seed = args.seed + 10 + 2 * k as u64;
        let ta = ergodic_mean_trace(&instr, &rho_a, g, args.ergodic_steps, seed, args.trace_every)?;
        let tb = ergodic_mean_trace(&instr, &rho_b, g, args.ergodic_steps, seed + 1, args.trace_every)?;
        let last = |t: &[(usize, f64)]| t.last().map_or(f64::NAN, |p| p.1);
        let _ = writeln!(s, "ergodic_mean {name}: rho0 {} rho0_alt {}", num(last(&ta)), num(last(&tb)));
        let _ = writeln!(s, "sample_mean {name}: rho0 {} rho0_alt {}", num(a.expectation(g)), num(b.expectation(g)));
        if let StateFunctional::Linear(op) = g {
            let _ = writeln!(s, "invariant_state_value {name}: {}", cert.invariant_state.expectation(op).re);
        }
        if args.emit_plot_data {
            write(&dir, &format!("ergodic_{}.csv", slug(name)), &trace_csv(&meta, &ta, &tb))?;
        }
    }
    write(&dir, "invariant.txt", &s)?;
    print!("{s}");
    Ok(())
}
