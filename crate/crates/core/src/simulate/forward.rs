use super::{ControlMode, DiscreteSystem, SimError};

/// States at time levels `0..=K`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn terminal(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

fn check_finite(y: &[f64], step: usize) -> Result<(), SimError> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(SimError::NonFinite { step })
    }
}

/// `y^{n+1} = S y^n + B u^n`; `controls` holds one state-layout vector per step.
pub fn solve_forward(
    ds: &DiscreteSystem,
    y0: &[f64],
    controls: Option<(&[Vec<f64>], ControlMode)>,
) -> Result<Trajectory, SimError> {
    let len = ds.state_len();
    if y0.len() != len {
        return Err(SimError::Shape { expected: len, found: y0.len() });
    }
    if let Some((u, _)) = controls {
        if u.len() != ds.grid.steps {
            return Err(SimError::Shape { expected: ds.grid.steps, found: u.len() });
        }
        if let Some(bad) = u.iter().find(|v| v.len() != len) {
            return Err(SimError::Shape { expected: len, found: bad.len() });
        }
    }
    let mut states = Vec::with_capacity(ds.grid.steps + 1);
    states.push(y0.to_vec());
    for n in 0..ds.grid.steps {
        let next = ds.step(&states[n], controls.map(|(u, m)| (u[n].as_slice(), m)), n);
        check_finite(&next, n + 1)?;
        states.push(next);
    }
    Ok(Trajectory { states })
}

/// Forced evolution with `forcing(n)` the source at time level `n`.
pub fn solve_with_forcing(
    ds: &DiscreteSystem,
    y0: &[f64],
    mut forcing: impl FnMut(usize) -> Result<Vec<f64>, SimError>,
) -> Result<Trajectory, SimError> {
    let mut states = vec![y0.to_vec()];
    let mut f_now = forcing(0)?;
    for n in 0..ds.grid.steps {
        let f_next = forcing(n + 1)?;
        let next = ds.step_forced(&states[n], &f_now, &f_next);
        check_finite(&next, n + 1)?;
        states.push(next);
        f_now = f_next;
    }
    Ok(Trajectory { states })
}
