//! TOML experiment configuration.
//!
//! ```toml
//! [model]
//! kind = "heston"        # black-scholes | linear-diffusion | heston
//! lambda = 0.47          # any omitted parameter takes its default value
//!
//! [preferences]
//! delta = 0.08
//! gamma = 2.0
//! psi = 1.2
//!
//! [constraints]
//! pi = "interval 0 0.1"  # interval lo hi | union [lo hi] ... | finite p1 p2 ... | full
//! c_hat = "interval 0 1" # optional
//!
//! [grid]
//! horizon = 10.0
//! steps = 100
//!
//! [mc]
//! paths = 100000
//! seed = 42
//! degree = 3
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use ezbsde_core::market::ModelKind;
use ezbsde_core::regression::BasisSpec;
use ezbsde_core::solver::SolverConfig;
use ezbsde_core::{ConstraintSet, GeneratorContext, MarketModel, Preferences, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_STEPS: usize = 100;
pub const DEFAULT_PATHS: usize = 100_000;
pub const DEFAULT_DEGREE: usize = 3;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub preferences: PreferencesSection,
    #[serde(default)]
    pub constraints: ConstraintsSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub run: RunSection,
}

/// Model kind and parameters. Every omitted parameter defaults to the
/// default calibration for that kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSection {
    BlackScholes {
        r: Option<f64>,
        mu: Option<f64>,
        sigma: Option<f64>,
    },
    LinearDiffusion {
        b: Option<f64>,
        a: Option<f64>,
        sigma: Option<f64>,
        r0: Option<f64>,
        r1: Option<f64>,
        lambda0: Option<f64>,
        lambda1: Option<f64>,
        rho: Option<f64>,
        x0: Option<f64>,
    },
    Heston {
        b: Option<f64>,
        l: Option<f64>,
        a: Option<f64>,
        r0: Option<f64>,
        r1: Option<f64>,
        sigma: Option<f64>,
        lambda: Option<f64>,
        rho: Option<f64>,
        x0: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferencesSection {
    pub delta: Option<f64>,
    pub gamma: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSection {
    /// Portfolio set; `full` when omitted.
    pub pi: Option<String>,
    /// Consumption-ratio set; unconstrained when omitted.
    pub c_hat: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub horizon: Option<f64>,
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    pub degree: Option<usize>,
    /// Overrides the default truncation level of `Z`.
    pub z_cap: Option<f64>,
    /// Weight of the implicit end of each step, 0.5 by default.
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub command: Option<String>,
    pub out: Option<PathBuf>,
    /// Initial wealth, 1 by default.
    pub wealth: Option<f64>,
    /// Number of paths written to `paths.csv`; none by default.
    pub write_paths: Option<usize>,
}

/// Command-line overrides applied after loading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Everything the solver pipeline needs, validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: MarketModel,
    pub prefs: Preferences,
    pub set_pi: ConstraintSet,
    pub set_c: Option<ConstraintSet>,
    pub grid: TimeGrid,
    pub paths: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub wealth: f64,
    pub write_paths: usize,
    pub out: PathBuf,
}

impl Resolved {
    pub fn context(&self) -> CliResult<GeneratorContext> {
        GeneratorContext::new(
            self.model.clone(),
            self.prefs,
            self.set_pi.clone(),
            self.set_c.clone(),
            self.grid.horizon,
        )
        .map_err(CliError::from)
    }
}

pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses and validates a configuration. Syntax errors carry the line
/// number, validation errors name the offending key.
pub fn parse_config(text: &str) -> CliResult<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    cfg.resolve(&Overrides::default())?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn kind(&self) -> ModelKind {
        match self.model {
            ModelSection::BlackScholes { .. } => ModelKind::BlackScholes,
            ModelSection::LinearDiffusion { .. } => ModelKind::LinearDiffusion,
            ModelSection::Heston { .. } => ModelKind::Heston,
        }
    }

    pub fn resolve(&self, ov: &Overrides) -> CliResult<Resolved> {
        let model = self.build_model()?;
        let p = &self.preferences;
        let delta = p.delta.unwrap_or(default_delta(self.kind()));
        check_finite("preferences.delta", delta)?;
        check_finite("preferences.gamma", p.gamma)?;
        check_finite("preferences.psi", p.psi)?;
        let prefs = Preferences::new(delta, p.gamma, p.psi).map_err(|e| keyed("preferences", e))?;

        let set_pi = match &self.constraints.pi {
            Some(s) => parse_constraint(s).map_err(|m| CliError::invalid("constraints.pi", m))?,
            None => ConstraintSet::full(model.asset_dim())?,
        };
        if set_pi.dim() != model.asset_dim() {
            return Err(CliError::invalid(
                "constraints.pi",
                format!("set has dimension {}, the model has {} assets", set_pi.dim(), model.asset_dim()),
            ));
        }
        let set_c = match &self.constraints.c_hat {
            Some(s) => {
                let set = parse_constraint(s).map_err(|m| CliError::invalid("constraints.c_hat", m))?;
                if set.dim() != 1 {
                    return Err(CliError::invalid("constraints.c_hat", "must be one-dimensional"));
                }
                Some(set)
            }
            None => None,
        };

        let horizon = self.grid.horizon.unwrap_or(default_horizon(self.kind()));
        check_finite("grid.horizon", horizon)?;
        let steps = ov.steps.or(self.grid.steps).unwrap_or(DEFAULT_STEPS);
        positive_count("grid.steps", steps)?;
        let grid = TimeGrid::new(horizon, steps).map_err(|e| keyed_as("grid.horizon", e))?;

        let paths = ov.paths.or(self.mc.paths).unwrap_or(DEFAULT_PATHS);
        positive_count("mc.paths", paths)?;
        let degree = self.mc.degree.unwrap_or(DEFAULT_DEGREE);
        let mut solver = SolverConfig {
            basis: BasisSpec::TotalDegree(degree),
            ..SolverConfig::default()
        };
        if let Some(cap) = self.mc.z_cap {
            if !(cap > 0.0 && cap.is_finite()) {
                return Err(CliError::invalid("mc.z_cap", "must be a positive finite number"));
            }
            solver.z_cap = Some(cap);
        }
        if let Some(theta) = self.mc.theta {
            if !(0.0..=1.0).contains(&theta) {
                return Err(CliError::invalid("mc.theta", "must lie in [0, 1]"));
            }
            solver.theta = theta;
        }

        let wealth = self.run.wealth.unwrap_or(1.0);
        if !(wealth > 0.0 && wealth.is_finite()) {
            return Err(CliError::invalid("run.wealth", "must be a positive finite number"));
        }
        if let Some(cmd) = &self.run.command {
            if !["solve", "sweep", "verify"].contains(&cmd.as_str()) {
                return Err(CliError::invalid("run.command", format!("unknown command `{cmd}`")));
            }
        }
        let out = ov
            .out
            .clone()
            .or_else(|| self.run.out.clone())
            .unwrap_or_else(|| PathBuf::from("out"));

        Ok(Resolved {
            model,
            prefs,
            set_pi,
            set_c,
            grid,
            paths,
            seed: ov.seed.or(self.mc.seed).unwrap_or(DEFAULT_SEED),
            solver,
            wealth,
            write_paths: self.run.write_paths.unwrap_or(0),
            out,
        })
    }

    fn build_model(&self) -> CliResult<MarketModel> {
        let model = match self.model {
            ModelSection::BlackScholes { r, mu, sigma } => {
                let r = param("r", r, 0.03)?;
                let mu = param("mu", mu, 0.05)?;
                let sigma = param("sigma", sigma, 0.17)?;
                MarketModel::black_scholes(r, mu, sigma)
            }
            ModelSection::LinearDiffusion {
                b,
                a,
                sigma,
                r0,
                r1,
                lambda0,
                lambda1,
                rho,
                x0,
            } => {
                let m = MarketModel::linear_diffusion(
                    param("b", b, 0.0226)?,
                    param("a", a, 0.0189)?,
                    param("sigma", sigma, 0.0436)?,
                    param("r0", r0, 0.0014)?,
                    param("r1", r1, 1.0)?,
                    param("lambda0", lambda0, 0.05)?,
                    param("lambda1", lambda1, 1.0)?,
                    param("rho", rho, -0.935)?,
                );
                match (m, x0) {
                    (Ok(m), Some(x)) => m.with_initial_state(vec![param("x0", Some(x), 0.0)?]),
                    (m, _) => m,
                }
            }
            ModelSection::Heston {
                b,
                l,
                a,
                r0,
                r1,
                sigma,
                lambda,
                rho,
                x0,
            } => {
                let m = MarketModel::heston(
                    param("b", b, 5.0)?,
                    param("l", l, 0.0225)?,
                    param("a", a, 0.25)?,
                    param("r0", r0, 0.05)?,
                    param("r1", r1, 0.0)?,
                    param("sigma", sigma, 1.0)?,
                    param("lambda", lambda, 0.47)?,
                    param("rho", rho, -0.5)?,
                );
                match (m, x0) {
                    (Ok(m), Some(x)) => m.with_initial_state(vec![param("x0", Some(x), 0.0)?]),
                    (m, _) => m,
                }
            }
        };
        model.map_err(|e| keyed("model", e))
    }
}

pub fn default_horizon(kind: ModelKind) -> f64 {
    match kind {
        ModelKind::LinearDiffusion => 1.0,
        ModelKind::Heston => 10.0,
        _ => 30.0,
    }
}

pub fn default_delta(kind: ModelKind) -> f64 {
    match kind {
        ModelKind::LinearDiffusion => 0.0052,
        _ => 0.08,
    }
}

fn param(name: &str, v: Option<f64>, default: f64) -> CliResult<f64> {
    let v = v.unwrap_or(default);
    check_finite(&format!("model.{name}"), v)?;
    Ok(v)
}

fn check_finite(key: &str, v: f64) -> CliResult<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(CliError::invalid(key, "must be a finite number"))
    }
}

fn positive_count(key: &str, v: usize) -> CliResult<()> {
    if v == 0 {
        Err(CliError::invalid(key, "must be a positive integer"))
    } else {
        Ok(())
    }
}

/// Attaches the section name to a domain error raised by the core crate.
fn keyed(section: &str, e: ezbsde_core::Error) -> CliError {
    match e {
        ezbsde_core::Error::Domain { name, .. } => {
            let name = if section == "model" && name == "sigma_scale" { "sigma" } else { name };
            CliError::invalid(&format!("{section}.{name}"), e.to_string())
        }
        ezbsde_core::Error::OutsideDomain { .. } => CliError::invalid(&format!("{section}.x0"), e.to_string()),
        other => CliError::Core(other),
    }
}

fn keyed_as(key: &str, e: ezbsde_core::Error) -> CliError {
    CliError::invalid(key, e.to_string())
}

/// Parses `full`, `interval lo hi`, `union [lo hi] [lo hi] ...` or
/// `finite p1 p2 ...`. Bounds accept `inf` and `-inf`.
pub fn parse_constraint(text: &str) -> Result<ConstraintSet, String> {
    let text = text.trim();
    let (head, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
    let numbers = |s: &str| -> Result<Vec<f64>, String> {
        s.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
            .collect()
    };
    let set = match head {
        "full" if rest.trim().is_empty() => ConstraintSet::full(1),
        "interval" => match numbers(rest)?.as_slice() {
            [lo, hi] => ConstraintSet::interval(*lo, *hi),
            _ => return Err("expected `interval lo hi`".into()),
        },
        "union" => {
            let mut pieces = Vec::new();
            let mut s = rest.trim();
            while !s.is_empty() {
                let inner = s
                    .strip_prefix('[')
                    .and_then(|t| t.split_once(']'))
                    .ok_or("expected `union [lo hi] [lo hi] ...`")?;
                match numbers(inner.0)?.as_slice() {
                    [lo, hi] => pieces.push((*lo, *hi)),
                    _ => return Err("each union piece is `[lo hi]`".into()),
                }
                s = inner.1.trim_start_matches(',').trim();
            }
            ConstraintSet::union(pieces)
        }
        "finite" => {
            let pts = numbers(rest)?;
            ConstraintSet::finite(pts.into_iter().map(|p| vec![p]).collect())
        }
        _ => return Err(format!("unknown constraint `{text}`")),
    };
    set.map_err(|e| e.to_string())
}

impl fmt::Display for ModelSection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ModelSection::BlackScholes { .. } => "black-scholes",
            ModelSection::LinearDiffusion { .. } => "linear-diffusion",
            ModelSection::Heston { .. } => "heston",
        };
        f.write_str(name)
    }
}
