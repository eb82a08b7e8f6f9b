//! Run configuration: a JSON file with an optional preset whose fields can be
//! overridden one by one.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sysid_sim::pendulum::{INITIAL_CONDITIONS, QUERY_POINTS, STEPS_PER_TRAJECTORY};
use sysid_sim::{AssumedModel, DynamicalSystem, LinearMap, Pendulum, PendulumParams, RandomLipschitzMap};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "pendulum")]
    Pendulum,
    #[serde(rename = "contraction-0.5")]
    Contraction,
    #[serde(rename = "period-2")]
    Period2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemConfig {
    Pendulum {
        #[serde(default)]
        params: PendulumParams,
        #[serde(default = "yes")]
        with_damping: bool,
    },
    /// `x⁺ = A x`, `A` row-major
    Linear { a: Vec<Vec<f64>> },
    RandomLipschitz { n: usize, lipschitz: f64, seed: u64 },
}

fn yes() -> bool {
    true
}

impl SystemConfig {
    pub fn dim(&self) -> usize {
        match self {
            SystemConfig::Pendulum { .. } => 2,
            SystemConfig::Linear { a } => a.len(),
            SystemConfig::RandomLipschitz { n, .. } => *n,
        }
    }

    pub fn build(&self) -> Box<dyn DynamicalSystem> {
        match self {
            SystemConfig::Pendulum { params, with_damping } => {
                Box::new(Pendulum { params: *params, with_damping: *with_damping })
            }
            SystemConfig::Linear { a } => Box::new(LinearMap { a: a.clone() }),
            SystemConfig::RandomLipschitz { n, lipschitz, seed } => Box::new(RandomLipschitzMap::new(*n, *lipschitz, *seed)),
        }
    }

    fn validate(&self) -> CliResult<()> {
        match self {
            SystemConfig::Pendulum { params, .. } => params.validate().map_err(CliError::Usage),
            SystemConfig::Linear { a } => {
                if a.is_empty() || a.iter().any(|r| r.len() != a.len() || r.iter().any(|v| !v.is_finite())) {
                    return Err(CliError::Usage("linear system needs a finite square matrix".into()));
                }
                Ok(())
            }
            SystemConfig::RandomLipschitz { n, lipschitz, .. } => {
                if *n == 0 || !(*lipschitz > 0.0 && lipschitz.is_finite()) {
                    return Err(CliError::Usage("random system needs n >= 1 and a positive Lipschitz constant".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EllipsoidConfig {
    pub max_balls: usize,
    pub audit_samples: usize,
    pub solver_tol: f64,
}

impl Default for EllipsoidConfig {
    fn default() -> Self {
        Self { max_balls: 50, audit_samples: 10_000, solver_tol: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvariantConfig {
    pub x_eq: Vec<f64>,
    pub n_sets: usize,
    pub domain: Option<DomainConfig>,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub grid_points: usize,
    pub max_iters: usize,
    pub feasibility_tol: f64,
    pub max_constraints: usize,
    pub inner_radius: Option<f64>,
    pub envelope_samples: usize,
    pub simulation_starts: usize,
    pub simulation_horizon: usize,
}

impl Default for InvariantConfig {
    fn default() -> Self {
        Self {
            x_eq: Vec::new(),
            n_sets: 1,
            domain: None,
            rho_lo: 0.0,
            rho_hi: 1.0,
            grid_points: 11,
            max_iters: 6,
            feasibility_tol: 1e-8,
            max_constraints: 64,
            inner_radius: None,
            envelope_samples: 1000,
            simulation_starts: 6,
            simulation_horizon: 10_000,
        }
    }
}

/// Raw configuration file. Every field overrides the preset value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<Preset>,
    pub system: Option<SystemConfig>,
    pub initial_conditions: Option<Vec<Vec<f64>>>,
    pub steps: Option<usize>,
    pub assumed_model: Option<AssumedModel>,
    pub lipschitz: Option<f64>,
    pub noise_radius: Option<f64>,
    pub redundancy_tol: Option<f64>,
    pub query_points: Option<Vec<Vec<f64>>>,
    /// trajectory lengths at which queries are repeated
    pub query_steps: Option<Vec<usize>>,
    pub ellipsoid: Option<EllipsoidConfig>,
    pub invariant: Option<InvariantConfig>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub envelope: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(s: &str) -> CliResult<Self> {
        serde_json::from_str(s).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn preset(p: Preset) -> Self {
        Self { preset: Some(p), ..Default::default() }
    }
}

/// Fully specified run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub system: SystemConfig,
    pub initial_conditions: Vec<Vec<f64>>,
    pub steps: usize,
    pub assumed_model: AssumedModel,
    pub lipschitz: f64,
    pub noise_radius: f64,
    pub redundancy_tol: Option<f64>,
    pub query_points: Vec<Vec<f64>>,
    pub query_steps: Vec<usize>,
    pub ellipsoid: EllipsoidConfig,
    pub invariant: Option<InvariantConfig>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dataset: PathBuf,
    pub envelope: PathBuf,
}

struct Base {
    system: Option<SystemConfig>,
    initial_conditions: Vec<Vec<f64>>,
    steps: usize,
    assumed_model: AssumedModel,
    lipschitz: Option<f64>,
    redundancy_tol: Option<f64>,
    query_points: Vec<Vec<f64>>,
    query_steps: Vec<usize>,
    invariant: Option<InvariantConfig>,
}

fn base(preset: Option<Preset>) -> Base {
    match preset {
        Some(Preset::Pendulum) => {
            let params = PendulumParams::default();
            Base {
                system: Some(SystemConfig::Pendulum { params, with_damping: true }),
                initial_conditions: INITIAL_CONDITIONS.iter().map(|v| v.to_vec()).collect(),
                steps: STEPS_PER_TRAJECTORY,
                assumed_model: AssumedModel::PendulumUndamped { params },
                lipschitz: None,
                redundancy_tol: None,
                query_points: QUERY_POINTS.iter().map(|v| v.to_vec()).collect(),
                query_steps: vec![100, STEPS_PER_TRAJECTORY],
                invariant: Some(InvariantConfig {
                    x_eq: vec![PI, 0.0],
                    n_sets: 2,
                    domain: Some(DomainConfig { lo: vec![0.0, -2.5], hi: vec![2.0 * PI, 2.5] }),
                    ..Default::default()
                }),
            }
        }
        Some(Preset::Contraction) => Base {
            system: Some(SystemConfig::Linear { a: vec![vec![0.5]] }),
            initial_conditions: vec![vec![1.0], vec![-1.0]],
            steps: 20,
            assumed_model: AssumedModel::Zero,
            lipschitz: None,
            redundancy_tol: None,
            query_points: vec![vec![0.75], vec![0.3], vec![0.0]],
            query_steps: Vec::new(),
            invariant: Some(InvariantConfig {
                x_eq: vec![0.0],
                n_sets: 1,
                domain: Some(DomainConfig { lo: vec![-1.0], hi: vec![1.0] }),
                ..Default::default()
            }),
        },
        Some(Preset::Period2) => Base {
            system: Some(SystemConfig::Linear { a: vec![vec![-1.0]] }),
            initial_conditions: vec![vec![1.0]],
            steps: 20,
            assumed_model: AssumedModel::Zero,
            lipschitz: None,
            redundancy_tol: Some(1e-9),
            query_points: vec![vec![0.5], vec![-0.25]],
            query_steps: Vec::new(),
            invariant: None,
        },
        None => Base {
            system: None,
            initial_conditions: Vec::new(),
            steps: 100,
            assumed_model: AssumedModel::Zero,
            lipschitz: None,
            redundancy_tol: None,
            query_points: Vec::new(),
            query_steps: Vec::new(),
            invariant: None,
        },
    }
}

/// Lipschitz constant of `f - f̄` when it is known from the construction.
fn derived_lipschitz(system: &SystemConfig, model: &AssumedModel) -> Option<f64> {
    match (system, model) {
        (SystemConfig::Pendulum { params, with_damping: true }, AssumedModel::PendulumUndamped { params: m })
            if params == m =>
        {
            Some(params.residual_lipschitz())
        }
        (SystemConfig::Linear { a }, AssumedModel::Zero) => {
            let n = a.len();
            Some(AssumedModel::Affine { a: a.clone(), b: vec![0.0; n] }.lipschitz_bound(n)?)
        }
        (SystemConfig::RandomLipschitz { lipschitz, .. }, AssumedModel::Zero) => Some(*lipschitz),
        _ => None,
    }
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_points(name: &str, pts: &[Vec<f64>], n: usize) -> CliResult<()> {
    for p in pts {
        if p.len() != n || p.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Usage(format!("{name}: expected finite points of dimension {n}, got {p:?}")));
        }
    }
    Ok(())
}

impl Resolved {
    /// Merges preset defaults, file values and command-line overrides, then
    /// validates the result.
    pub fn new(cfg: RunConfig, seed: Option<u64>, out: Option<PathBuf>) -> CliResult<Self> {
        let b = base(cfg.preset);
        let system = cfg.system.or(b.system).ok_or_else(|| CliError::Usage("config needs a preset or a system".into()))?;
        system.validate()?;
        let n = system.dim();
        let assumed_model = cfg.assumed_model.unwrap_or(b.assumed_model);
        let lipschitz = cfg
            .lipschitz
            .or(b.lipschitz)
            .or_else(|| derived_lipschitz(&system, &assumed_model))
            .ok_or_else(|| CliError::Usage("lipschitz is required for this system/model pair".into()))?;
        positive("lipschitz", lipschitz)?;
        let steps = cfg.steps.unwrap_or(b.steps);
        if steps == 0 {
            return Err(CliError::Usage("steps (N) must be at least 1".into()));
        }
        let noise_radius = cfg.noise_radius.unwrap_or(0.0);
        if !(noise_radius >= 0.0 && noise_radius.is_finite()) {
            return Err(CliError::Usage(format!("noise_radius must be nonnegative, got {noise_radius}")));
        }
        let redundancy_tol = cfg.redundancy_tol.or(b.redundancy_tol);
        if let Some(t) = redundancy_tol {
            positive("redundancy_tol", t)?;
        }
        let initial_conditions = cfg.initial_conditions.unwrap_or(b.initial_conditions);
        if initial_conditions.is_empty() {
            return Err(CliError::Usage("at least one initial condition is required".into()));
        }
        check_points("initial_conditions", &initial_conditions, n)?;
        let query_points = cfg.query_points.unwrap_or(b.query_points);
        check_points("query_points", &query_points, n)?;
        let mut query_steps = cfg.query_steps.unwrap_or(b.query_steps);
        query_steps.retain(|&s| s <= steps);
        if query_steps.iter().any(|&s| s == 0) {
            return Err(CliError::Usage("query_steps must be positive".into()));
        }
        let ellipsoid = cfg.ellipsoid.unwrap_or_default();
        positive("ellipsoid.solver_tol", ellipsoid.solver_tol)?;
        if ellipsoid.max_balls == 0 {
            return Err(CliError::Usage("ellipsoid.max_balls must be at least 1".into()));
        }
        let invariant = cfg.invariant.or(b.invariant);
        if let Some(inv) = &invariant {
            check_points("invariant.x_eq", std::slice::from_ref(&inv.x_eq), n)?;
            positive("invariant.feasibility_tol", inv.feasibility_tol)?;
            if inv.n_sets == 0 {
                return Err(CliError::Usage("invariant.n_sets must be at least 1".into()));
            }
            if let Some(d) = &inv.domain {
                check_points("invariant.domain", &[d.lo.clone(), d.hi.clone()], n)?;
            }
        }
        let out_dir = out.or(cfg.out_dir).unwrap_or_else(|| PathBuf::from("out"));
        let dataset = cfg.dataset.unwrap_or_else(|| out_dir.join("dataset.json"));
        let envelope = cfg.envelope.unwrap_or_else(|| out_dir.join("envelope.json"));
        Ok(Self {
            system,
            initial_conditions,
            steps,
            assumed_model,
            lipschitz,
            noise_radius,
            redundancy_tol,
            query_points,
            query_steps,
            ellipsoid,
            invariant,
            seed: seed.or(cfg.seed).unwrap_or(0),
            out_dir,
            dataset,
            envelope,
        })
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    /// True residual `f(x) - f̄(x)` at `x`.
    pub fn true_residual(&self, x: &[f64]) -> Vec<f64> {
        let y = self.system.build().step(x);
        let m = self.assumed_model.eval(x);
        y.iter().zip(&m).map(|(a, b)| a - b).collect()
    }
}
