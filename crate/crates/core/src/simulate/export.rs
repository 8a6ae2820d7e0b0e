use std::io::{self, Write};

use super::{ControlMode, DiscreteSystem, HumResult, Trajectory};

/// One row per time level and interior node: `t, x.., y1, y2, u`.
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    ds: &DiscreteSystem,
    traj: &Trajectory,
    control: Option<(&[Vec<f64>], ControlMode)>,
) -> io::Result<()> {
    let g = &ds.grid;
    let xs: Vec<String> = (1..=g.dimension).map(|i| format!("x{i} [length]")).collect();
    writeln!(out, "t [time],{},y1 [state],y2 [state],u [control]", xs.join(","))?;
    for (n, y) in traj.states.iter().enumerate() {
        for node in 0..g.nodes() {
            // controls act on the step leaving level n; the last level has none
            let u = match control {
                Some((u, mode)) if n < g.steps && ds.active_steps[n] => ds.actuator(mode, 0, node) * u[n][2 * node],
                _ => 0.0,
            };
            write!(out, "{:.16e}", g.time(n))?;
            for x in g.node_coords(node) {
                write!(out, ",{x:.16e}")?;
            }
            writeln!(out, ",{:.16e},{:.16e},{:.16e}", y[2 * node], y[2 * node + 1], u)?;
        }
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(out: &mut W, results: &[HumResult]) -> io::Result<()> {
    writeln!(out, "epsilon [1],terminal_norm [state L2],control_norm [control L2],iterations [1],converged [bool]")?;
    for r in results {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{}",
            r.epsilon, r.terminal_norm, r.control_norm, r.iterations, r.converged
        )?;
    }
    Ok(())
}
