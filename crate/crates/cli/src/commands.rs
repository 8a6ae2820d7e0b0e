//! Command dispatch: each command writes its artifacts into the output
//! directory and returns the one-line summary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use coupled_parabolic::normalize::{normalize, zero_order_coupling, FlowOptions};
use coupled_parabolic::simulate::{
    discretize, fictitious_assembly, hum_sweep, loglog_slope, solve_forward, write_sweep_csv, write_trajectory_csv,
    AssemblyReport, ControlMode, Grid, HumOptions,
};
use coupled_parabolic::solvability::{
    assemble_full_solver, build_system_operators, check_condition, eliminate, verify_identity, EliminationOptions,
    SliceGrid, Verdict, DEFAULT_TOLERANCE,
};
use coupled_parabolic::spectral::{
    build_blended_potential_nd, build_counterexample_1d, consistent_potential, discrete_counterexample,
    fattorini_check, fattorini_coupled, sample_potential, witness_window, BlendedPotential, FattoriniMode,
    FattoriniReport,
};
use coupled_parabolic::symbolic::{parse_with, Expr};
use coupled_parabolic::system::{ParabolicSystem, SystemSpec};
use serde::Serialize;

use crate::config::{BlendedSpec, ExperimentConfig};

#[derive(Debug)]
pub enum Failure {
    /// Invalid configuration or unwritable output (exit 2).
    Config(Vec<String>),
    /// A library operation failed (exit 1).
    Domain(String),
}

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure::Domain(e.to_string())
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::Config(vec![format!("output: cannot write {}: {e}", path.display())])
}

struct Out<'a> {
    dir: &'a Path,
}

impl Out<'_> {
    fn with_file(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), Failure> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| io(&path, e))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        self.with_file(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<String, Failure> {
    let errs = cfg.validate();
    if !errs.is_empty() {
        return Err(Failure::Config(errs));
    }
    let dir = &cfg.output.as_ref().expect("validated").dir;
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let out = Out { dir };
    match cfg.command.as_deref().expect("validated") {
        "eliminate" => eliminate_cmd(cfg, &out),
        "check-condition" => check_condition_cmd(cfg, &out),
        "normalize" => normalize_cmd(cfg, &out),
        "simulate" => simulate_cmd(cfg, &out),
        "hum-sweep" => hum_sweep_cmd(cfg, &out),
        "counterexample" => counterexample_cmd(cfg, &out),
        "fattorini" => fattorini_cmd(cfg, &out),
        "assembly" => assembly_cmd(cfg, &out),
        other => unreachable!("unvalidated command {other}"),
    }
}

fn system(cfg: &ExperimentConfig) -> Result<(SystemSpec, ParabolicSystem), Failure> {
    let spec = cfg.system.clone().expect("validated");
    let sys = spec.build().map_err(domain)?;
    Ok((spec, sys))
}

fn blended(b: &BlendedSpec) -> Result<BlendedPotential, Failure> {
    build_blended_potential_nd(&b.domain, &b.omega, &b.omega1, &b.omega2, b.delta).map_err(domain)
}

fn eliminate_cmd(cfg: &ExperimentConfig, out: &Out) -> Result<String, Failure> {
    let (_, sys) = system(cfg)?;
    let ops = build_system_operators(&sys).map_err(domain)?;
    let elim = eliminate(&ops.l1, &ops.l3, &sys.control_window, &EliminationOptions::default()).map_err(domain)?;
    let solver = assemble_full_solver(&ops, &elim);
    let residual = verify_identity(&ops.l, &solver.m, &solver.window, cfg.numeric.trials, cfg.numeric.seed).map_err(domain)?;
    out.json(
        "elimination.json",
        &serde_json::json!({
            "elimination": elim.summary(),
            "solver": {
                "window": solver.window,
                "order_z": solver.order_z,
                "order_v": solver.order_v,
                "order_pair": solver.order_pair,
                "identity_residual": residual,
                "trials": cfg.numeric.trials,
                "seed": cfg.numeric.seed,
            }
        }),
    )?;
    Ok(format!(
        "eliminate: solvable after {} steps, pair order {}, z-rows {}, v-row {}, L∘M residual {residual:.3e}",
        elim.steps, elim.order, solver.order_z, solver.order_v
    ))
}

fn check_condition_cmd(cfg: &ExperimentConfig, out: &Out) -> Result<String, Failure> {
    let sys = match &cfg.blended {
        Some(b) => blended(b)?.system(b.horizon),
        None => system(cfg)?.1,
    };
    let ops = build_system_operators(&sys).map_err(domain)?;
    let report = check_condition(&ops, &sys.control_window, SliceGrid::default(), DEFAULT_TOLERANCE).map_err(domain)?;
    out.json("condition.json", &report)?;
    let verdict = match report.verdict {
        Verdict::Holds => "holds",
        Verdict::Fails => "fails (membership)",
        Verdict::Inconclusive => "inconclusive",
    };
    let worst = report.slices.iter().map(|s| s.residual).fold(0.0, f64::max);
    Ok(format!("check-condition: {verdict}, max slice residual {worst:.3e}"))
}

fn normalize_cmd(cfg: &ExperimentConfig, out: &Out) -> Result<String, Failure> {
    let (_, sys) = system(cfg)?;
    let n = &cfg.numeric;
    let opts = FlowOptions { ode_tol: n.ode_tol, s_cells: n.flow_cells, z_cells: n.flow_cells };
    let norm = normalize(&sys, &opts, n.coupling_tol).map_err(domain)?;
    let a21 = zero_order_coupling(&norm.system, 7).map_err(domain)?;
    let s = &norm.system;
    let texts = |v: &[Expr]| v.iter().map(|e| e.to_string()).collect::<Vec<_>>();
    out.json(
        "normalized.json",
        &serde_json::json!({
            "coupling_deviation": norm.coupling_deviation,
            "a21_residual": a21,
            "gauge": norm.gauge,
            "straightened": norm.flow.is_some(),
            "control_window": s.control_window,
            "system": {
                "d2": s.d2.iter().map(|r| texts(r)).collect::<Vec<_>>(),
                "g21": texts(&s.g21),
                "g22": texts(&s.g22),
                "a21": s.a21.to_string(),
                "a22": s.a22.to_string(),
            }
        }),
    )?;
    if let Some(flow) = &norm.flow {
        out.with_file("flow.csv", |w| flow.write_csv(w, sys.control_window.lo[0]))?;
    }
    Ok(format!("normalize: coupling deviation {:.3e}, |a21| after gauge {a21:.3e}", norm.coupling_deviation))
}

fn discrete(cfg: &ExperimentConfig, sys: &ParabolicSystem, spec: &SystemSpec) -> Result<(coupled_parabolic::simulate::DiscreteSystem, Vec<f64>), Failure> {
    let n = &cfg.numeric;
    let grid = Grid::new(&sys.domain, &n.cells, sys.horizon, n.steps.expect("validated")).map_err(domain)?;
    let ds = discretize(sys, &grid, n.theta.unwrap_or(1.0)).map_err(domain)?;
    let ctx = spec.parse_context();
    let init = n.initial.as_ref().expect("validated");
    let fields = [parse_with(&init[0], &ctx).map_err(domain)?, parse_with(&init[1], &ctx).map_err(domain)?];
    let y0 = ds.sample(&fields, 0).map_err(domain)?;
    Ok((ds, y0))
}

fn simulate_cmd(cfg: &ExperimentConfig, out: &Out) -> Result<String, Failure> {
    let (spec, sys) = system(cfg)?;
    let (ds, y0) = discrete(cfg, &sys, &spec)?;
    let traj = solve_forward(&ds, &y0, None).map_err(domain)?;
    out.with_file("trajectory.csv", |w| write_trajectory_csv(w, &ds, &traj, None))?;
    Ok(format!("simulate: ‖y(0)‖ = {:.6e}, ‖y(T)‖ = {:.6e}", ds.norm(&y0), ds.norm(traj.terminal())))
}

fn hum_sweep_cmd(cfg: &ExperimentConfig, out: &Out) -> Result<String, Failure> {
    let (spec, sys) = system(cfg)?;
    let (ds, y0) = discrete(cfg, &sys, &spec)?;
    let n = &cfg.numeric;
    let mode = if n.control_mode == "two" { ControlMode::TwoControl } else { ControlMode::OneControl };
    let opts = HumOptions { cg_tol: n.cg_tol, max_iter: n.max_iter };
    let res = hum_sweep(&ds, &y0, &n.epsilons, mode, opts).map_err(domain)?;
    out.with_file("sweep.csv", |w| write_sweep_csv(w, &res))?;
    let last = res.last().expect("non-empty sweep");
    let slope = if res.len() >= 2 { format!("{:.4}", loglog_slope(&res)) } else { "n/a".into() };
    Ok(format!(
        "hum-sweep: slope {slope}, ‖y(T)‖/‖y0‖ at ε = {:e}: {:.3e}",
        last.epsilon,
        last.terminal_norm / ds.norm(&y0)
    ))
}

fn counterexample_cmd(cfg: &ExperimentConfig, out: &Out) -> Result<String, Failure> {
    let opts = cfg.counterexample.clone().unwrap_or_default();
    let d = build_counterexample_1d(&opts).map_err(domain)?;
    for which in ["psi", "phi", "a"] {
        out.with_file(&format!("{which}.csv"), |w| d.write_samples(w, which, cfg.numeric.samples))?;
    }
    out.json("witness.json", &d.witness_json())?;
    Ok(format!(
        "counterexample: max|φ| on ω = {:.3e}, |φ(0)| = {:.3e}, |φ(π)| = {:.3e}, C = [{:.6}, {:.6}, {:.6}]",
        d.checks.max_phi_on_omega,
        d.checks.phi_at_0.abs(),
        d.checks.phi_at_pi.abs(),
        d.c[0],
        d.c[1],
        d.c[2]
    ))
}

fn fattorini_cmd(cfg: &ExperimentConfig, out: &Out) -> Result<String, Failure> {
    let f = cfg.fattorini.as_ref().expect("validated");
    let n = &cfg.numeric;
    let report: FattoriniReport = match f.mode {
        FattoriniMode::Single => {
            let b = cfg.blended.as_ref().expect("validated");
            let bp = blended(b)?;
            let grid = Grid::new(&bp.domain, &n.cells, 1.0, 1).map_err(domain)?;
            let a = if f.potential == "sampled" {
                sample_potential(&bp.a, &grid).map_err(domain)?
            } else {
                consistent_potential(&bp, &grid).map_err(domain)?
            };
            fattorini_check(&grid, &a, &bp.omega1, &f.options).map_err(domain)?
        }
        FattoriniMode::Coupled => {
            let data = build_counterexample_1d(&cfg.counterexample.clone().unwrap_or_default()).map_err(domain)?;
            let w = discrete_counterexample(&data, n.cells[0]).map_err(domain)?;
            let omega = f.omega.clone().unwrap_or_else(witness_window);
            let sys = w.system(&data, &omega, 1.0);
            let ds = w.discretize(&sys, n.steps.unwrap_or(1), n.theta.unwrap_or(1.0)).map_err(domain)?;
            fattorini_coupled(&ds, &f.options).map_err(domain)?
        }
    };
    out.json("fattorini.json", &report)?;
    let detail = match report.witness {
        Some(i) => {
            let p = &report.pairs[i];
            format!(", witness eigenvalue {:.10}, window quantity {:.3e}", p.eigenvalue, p.vanishing)
        }
        None => {
            let min = report.pairs.iter().map(|p| p.vanishing).fold(f64::INFINITY, f64::min);
            format!(", smallest window quantity {min:.3e}")
        }
    };
    let verdict = serde_json::to_value(report.verdict).map_err(domain)?;
    Ok(format!("fattorini: {}{detail}", verdict.as_str().unwrap_or("?")))
}

fn assembly_cmd(cfg: &ExperimentConfig, out: &Out) -> Result<String, Failure> {
    let (spec, sys) = system(cfg)?;
    let n = &cfg.numeric;
    let ops = build_system_operators(&sys).map_err(domain)?;
    let elim = eliminate(&ops.l1, &ops.l3, &sys.control_window, &EliminationOptions::default()).map_err(domain)?;
    let solver = assemble_full_solver(&ops, &elim);
    let y_hat = match &n.manufactured {
        Some(m) => {
            let ctx = spec.parse_context();
            [parse_with(&m[0], &ctx).map_err(domain)?, parse_with(&m[1], &ctx).map_err(domain)?]
        }
        None => {
            // C^11 bumps strictly inside the solver window
            let w = solver.window.shrink(0.05);
            let b = Expr::poly_bump(0, w.lo[0], w.hi[0], 12) * Expr::poly_bump(1, w.lo[1], w.hi[1], 12);
            [b.clone(), &b * (Expr::x(1) + 1.0)]
        }
    };
    let report = fictitious_assembly(&sys, &ops, &solver, &y_hat, &n.cells, n.theta.unwrap_or(0.5)).map_err(domain)?;
    out.json("assembly.json", &report)?;
    out.with_file("assembly.csv", |w| write_levels(w, &report))?;
    let orders: Vec<String> = report.orders.iter().map(|p| format!("{p:.3}")).collect();
    Ok(format!(
        "assembly: residual orders [{}], support inside ω_T: {}, max|y(T)| = {:e}",
        orders.join(", "),
        report.support_ok,
        report.terminal_max
    ))
}

fn write_levels<W: Write>(w: &mut W, r: &AssemblyReport) -> std::io::Result<()> {
    writeln!(w, "cells [1],h [length],dt [time],residual_max [1],residual_l2 [1],terminal_max [state],support_leak [1]")?;
    for l in &r.levels {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            l.cells, l.h, l.dt, l.residual_max, l.residual_l2, l.terminal_max, l.support_leak
        )?;
    }
    Ok(())
}
