//! Experiment configuration: one JSON file per run.

use std::path::PathBuf;

use coupled_parabolic::spectral::{CounterexampleOptions, FattoriniMode, FattoriniOptions};
use coupled_parabolic::symbolic::{parse_with, ParseContext};
use coupled_parabolic::system::{BoxDomain, SystemSpec};
use serde::Deserialize;

pub const COMMANDS: [&str; 8] =
    ["eliminate", "check-condition", "normalize", "simulate", "hum-sweep", "counterexample", "fattorini", "assembly"];

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<String>,
    pub system: Option<SystemSpec>,
    #[serde(default)]
    pub numeric: Numeric,
    pub counterexample: Option<CounterexampleOptions>,
    pub blended: Option<BlendedSpec>,
    pub fattorini: Option<FattoriniSpec>,
    pub output: Option<Output>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numeric {
    /// Cells per axis (simulate, hum-sweep, fattorini) or the refinement
    /// levels of a 1D assembly study.
    pub cells: Vec<usize>,
    pub steps: Option<usize>,
    pub theta: Option<f64>,
    pub epsilons: Vec<f64>,
    pub seed: u64,
    /// Random test functions for identity checks.
    pub trials: usize,
    /// Initial state `(y1, y2)` as expression texts.
    pub initial: Option<[String; 2]>,
    /// "one" (control on equation 1) or "two".
    pub control_mode: String,
    /// `ŷ` for the assembly study; defaults to polynomial bumps in the window.
    pub manufactured: Option<[String; 2]>,
    /// Sample count of the counterexample CSVs.
    pub samples: usize,
    pub coupling_tol: f64,
    pub ode_tol: f64,
    pub flow_cells: usize,
    pub cg_tol: f64,
    pub max_iter: usize,
}

impl Default for Numeric {
    fn default() -> Self {
        Numeric {
            cells: Vec::new(),
            steps: None,
            theta: None,
            epsilons: Vec::new(),
            seed: 0,
            trials: 20,
            initial: None,
            control_mode: "one".into(),
            manufactured: None,
            samples: 1000,
            coupling_tol: 1e-5,
            ode_tol: 1e-9,
            flow_cells: 64,
            cg_tol: 1e-10,
            max_iter: 2000,
        }
    }
}

/// Potential with a flat eigenfunction: `ω1 ⊂ ω2`, `ω` the control region.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlendedSpec {
    pub domain: BoxDomain,
    pub omega: BoxDomain,
    pub omega1: BoxDomain,
    pub omega2: BoxDomain,
    pub delta: f64,
    #[serde(default = "one")]
    pub horizon: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FattoriniSpec {
    pub mode: FattoriniMode,
    #[serde(default, flatten)]
    pub options: FattoriniOptions,
    /// Single mode: "consistent" (discrete eigenpair exact) or "sampled".
    #[serde(default = "consistent")]
    pub potential: String,
    /// Coupled mode: control region; defaults to (7π/15, 8π/15).
    pub omega: Option<BoxDomain>,
}

fn consistent() -> String {
    "consistent".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
}

/// Command-line overrides of scalar fields.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub theta: Option<f64>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(dir) = &o.output {
            self.output = Some(Output { dir: dir.clone() });
        }
        if let Some(s) = o.seed {
            self.numeric.seed = s;
        }
        if let Some(s) = o.steps {
            self.numeric.steps = Some(s);
        }
        if let Some(t) = o.theta {
            self.numeric.theta = Some(t);
        }
    }

    /// Every problem with the config, one line per field.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.output.is_none() {
            errs.push("output.dir: required".to_string());
        }
        let command = match self.command.as_deref() {
            None => {
                errs.push(format!("command: required (one of {})", COMMANDS.join(", ")));
                return errs;
            }
            Some(c) if !COMMANDS.contains(&c) => {
                errs.push(format!("command: unknown \"{c}\" (one of {})", COMMANDS.join(", ")));
                return errs;
            }
            Some(c) => c,
        };
        let n = &self.numeric;
        let dim = self.system.as_ref().and_then(|s| s.dimension);

        let needs_system = match command {
            "check-condition" => self.blended.is_none(),
            "counterexample" | "fattorini" => false,
            _ => true,
        };
        if needs_system {
            match &self.system {
                None => errs.push("system: required".to_string()),
                Some(spec) => {
                    if let Err(e) = spec.build() {
                        match e {
                            coupled_parabolic::system::SystemError::Invalid(list) => errs.extend(list),
                            other => errs.push(format!("system: {other}")),
                        }
                    }
                }
            }
        }
        if let Some(t) = n.theta {
            if !(0.5..=1.0).contains(&t) {
                errs.push(format!("numeric.theta: {t} is not in [0.5, 1]"));
            }
        }
        if n.steps == Some(0) {
            errs.push("numeric.steps: must be positive".to_string());
        }
        if n.cells.iter().any(|&c| c < 2) {
            errs.push("numeric.cells: every entry must be ≥ 2".to_string());
        }

        match command {
            "simulate" | "hum-sweep" => {
                if let Some(d) = dim {
                    if n.cells.len() != d {
                        errs.push(format!("numeric.cells: needs {d} entries (one per axis), found {}", n.cells.len()));
                    }
                }
                if n.steps.is_none() {
                    errs.push("numeric.steps: required".to_string());
                }
                match &n.initial {
                    None => errs.push("numeric.initial: required".to_string()),
                    Some(init) => {
                        let ctx = self.system.as_ref().map(|s| s.parse_context()).unwrap_or_default();
                        check_texts(&mut errs, "numeric.initial", init, &ctx);
                    }
                }
                if command == "hum-sweep" {
                    if n.epsilons.is_empty() {
                        errs.push("numeric.epsilons: required (non-empty)".to_string());
                    }
                    if n.epsilons.iter().any(|&e| !(e > 0.0)) {
                        errs.push("numeric.epsilons: every entry must be positive".to_string());
                    }
                    if !matches!(n.control_mode.as_str(), "one" | "two") {
                        errs.push(format!("numeric.control_mode: \"{}\" is not \"one\" or \"two\"", n.control_mode));
                    }
                }
            }
            "assembly" => {
                if dim.is_some_and(|d| d != 1) {
                    errs.push("system.dimension: the assembly study is one-dimensional".to_string());
                }
                if n.cells.len() < 2 {
                    errs.push("numeric.cells: at least two refinement levels".to_string());
                }
                if let Some(m) = &n.manufactured {
                    let ctx = self.system.as_ref().map(|s| s.parse_context()).unwrap_or_default();
                    check_texts(&mut errs, "numeric.manufactured", m, &ctx);
                }
            }
            "fattorini" => match &self.fattorini {
                None => errs.push("fattorini: required".to_string()),
                Some(f) if f.mode == FattoriniMode::Single => {
                    match &self.blended {
                        None => errs.push("blended: required for mode single".to_string()),
                        Some(b) if n.cells.len() != b.domain.lo.len() => errs.push(format!(
                            "numeric.cells: needs {} entries (one per axis), found {}",
                            b.domain.lo.len(),
                            n.cells.len()
                        )),
                        Some(_) => {}
                    }
                    if !matches!(f.potential.as_str(), "consistent" | "sampled") {
                        errs.push(format!("fattorini.potential: \"{}\" is not \"consistent\" or \"sampled\"", f.potential));
                    }
                }
                Some(_) => {
                    if n.cells.len() != 1 {
                        errs.push("numeric.cells: coupled mode needs one entry".to_string());
                    }
                }
            },
            "counterexample" if n.samples < 2 => errs.push("numeric.samples: must be ≥ 2".to_string()),
            _ => {}
        }
        if let Some(b) = &self.blended {
            if !(b.delta > 0.0) {
                errs.push(format!("blended.delta: {} is not positive", b.delta));
            }
        }
        errs
    }
}

fn check_texts(errs: &mut Vec<String>, field: &str, texts: &[String; 2], ctx: &ParseContext) {
    for (i, t) in texts.iter().enumerate() {
        if let Err(e) = parse_with(t, ctx) {
            errs.push(format!("{field}[{i}]: {e} in \"{t}\""));
        }
    }
}
