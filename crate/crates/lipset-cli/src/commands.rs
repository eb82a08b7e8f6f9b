//! The six subcommands. Each returns a JSON summary and writes its artifacts
//! under the output directory.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use approx_ellipsoid::{contains_point, outer_ellipsoid_with, Ellipsoid, OuterOptions};
use invariant_synth::{
    recheck_certificate, synthesize_with, verify_by_simulation, AffineModel, BisectionConfig, DomainBox,
    EllipsoidalInvariantSet, EnvelopeCheckOptions, InvarianceOptions, SynthesisError,
};
use lipset_core::{
    bounding_box, diameter_bound_with, slice_member, slice_with, Execution, LipschitzEnvelope, LipsetError, SliceSet,
};
use serde::Serialize;
use serde_json::{json, Value};
use sysid_sim::{
    detect_periodicity, format_f64, residual_dataset, simulate, simulate_many, write_trajectory_csv, AssumedModel,
    TrajectoryDataset,
};

use crate::config::{Resolved, SystemConfig};
use crate::error::{CliError, CliResult};
use crate::svg::SvgPlot;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Learn,
    Query,
    Ellipsoid,
    Invariant,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Learn => "learn",
            Command::Query => "query",
            Command::Ellipsoid => "ellipsoid",
            Command::Invariant => "invariant",
            Command::Report => "report",
        }
    }
}

pub fn run(cmd: Command, cfg: &Resolved) -> CliResult<Value> {
    match cmd {
        Command::Simulate => cmd_simulate(cfg),
        Command::Learn => cmd_learn(cfg),
        Command::Query => cmd_query(cfg),
        Command::Ellipsoid => cmd_ellipsoid(cfg),
        Command::Invariant => cmd_invariant(cfg),
        Command::Report => cmd_report(cfg),
    }
}

/// Convergence tolerance used for the periodicity summary.
const PERIOD_TOL: f64 = 1e-6;
/// Relative slack when checking that the true residual lies in an interval.
const TRUTH_SLACK: f64 = 1e-12;
/// Boundary points per ellipse in CSV/SVG output.
const POLYLINE_POINTS: usize = 128;

fn exec() -> Execution {
    Execution::from_env()
}

/// Path as recorded in summaries: relative to the output directory when inside it.
fn shown(cfg: &Resolved, path: &Path) -> String {
    path.strip_prefix(&cfg.out_dir).unwrap_or(path).display().to_string()
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn load_dataset(cfg: &Resolved) -> CliResult<TrajectoryDataset> {
    let text = read_text(&cfg.dataset)?;
    let ds = TrajectoryDataset::from_json(&text)
        .map_err(|e| CliError::Data(format!("corrupt dataset {}: {e}", cfg.dataset.display())))?;
    if !ds.residual_pairs.is_empty() && ds.dim() != cfg.dim() {
        return Err(CliError::Usage(format!("dataset dimension {} does not match the system ({})", ds.dim(), cfg.dim())));
    }
    Ok(ds)
}

fn load_envelope(cfg: &Resolved) -> CliResult<LipschitzEnvelope> {
    let text = read_text(&cfg.envelope)?;
    let env = LipschitzEnvelope::from_json(&text)
        .map_err(|e| CliError::Data(format!("corrupt envelope {}: {e}", cfg.envelope.display())))?;
    if env.dimension() != cfg.dim() {
        return Err(CliError::Usage(format!(
            "envelope dimension {} does not match the system ({})",
            env.dimension(),
            cfg.dim()
        )));
    }
    Ok(env)
}

fn build_envelope(cfg: &Resolved, ds: &TrajectoryDataset) -> CliResult<(LipschitzEnvelope, sysid_sim::LearnStats)> {
    let (env, stats) = ds.envelope(cfg.lipschitz, cfg.redundancy_tol)?;
    if let Some(v) = env.lipschitz_violation(exec()) {
        let s = env.samples();
        return Err(CliError::Data(format!(
            "samples {} and {} violate L = {} by {:.3e}",
            s[v.first].index, s[v.second].index, cfg.lipschitz, v.excess
        )));
    }
    Ok((env, stats))
}

fn csv_row(fields: impl IntoIterator<Item = String>) -> String {
    let mut s = fields.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn coord_header(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

pub fn cmd_simulate(cfg: &Resolved) -> CliResult<Value> {
    let sys = cfg.system.build();
    let trajs = simulate_many(sys.as_ref(), &cfg.initial_conditions, cfg.steps, exec())?;
    let ds = residual_dataset(&trajs, cfg.assumed_model.clone(), cfg.noise_radius, cfg.seed)?;
    ensure_dir(&cfg.out_dir)?;
    let mut files = Vec::new();
    for (i, t) in ds.trajectories.iter().enumerate() {
        let path = cfg.out_dir.join(format!("trajectory_{}.csv", i + 1));
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, t)?;
        write_text(&path, &String::from_utf8_lossy(&buf))?;
        files.push(shown(cfg, &path));
    }
    let dataset_json = ds.to_json()?;
    write_text(&cfg.dataset, &(dataset_json + "\n"))?;
    let meta: Vec<Value> = trajs.iter().map(|t| json!(detect_periodicity(t, PERIOD_TOL))).collect();
    let mut derived = json!({ "lipschitz": cfg.lipschitz });
    if let SystemConfig::Pendulum { params, .. } = &cfg.system {
        derived["discrete_damping_gain"] = json!(params.discrete_damping_gain());
        derived["residual_lipschitz"] = json!(params.residual_lipschitz());
    }
    Ok(json!({
        "command": "simulate",
        "trajectories": trajs.len(),
        "steps": cfg.steps,
        "residual_pairs": ds.residual_pairs.len(),
        "noise_radius": cfg.noise_radius,
        "seed": cfg.seed,
        "assumed_model": cfg.assumed_model.tag(),
        "derived": derived,
        "periodicity": meta,
        "files": { "trajectories": files, "dataset": shown(cfg, &cfg.dataset) },
    }))
}

pub fn cmd_learn(cfg: &Resolved) -> CliResult<Value> {
    let ds = load_dataset(cfg)?;
    let (env, stats) = build_envelope(cfg, &ds)?;
    let mut warnings = Vec::new();
    if env.is_empty() {
        let w = "dataset holds no residual pairs; every slice of the envelope is unbounded";
        eprintln!("warning: {w}");
        warnings.push(w);
    }
    write_text(&cfg.envelope, &(env.to_json()? + "\n"))?;
    let summary = json!({
        "command": "learn",
        "samples": env.len(),
        "offered": stats.offered,
        "stored": stats.stored,
        "redundant": stats.redundant,
        "lipschitz": env.lipschitz_constant(),
        "noise_radius": env.noise_radius(),
        "warnings": warnings,
        "files": { "envelope": shown(cfg, &cfg.envelope) },
    });
    write_json(&cfg.out_dir.join("learn.json"), &summary)?;
    Ok(summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct PointReport {
    pub x: Vec<f64>,
    /// `None` when the envelope is empty (unbounded slice)
    pub intervals: Option<Vec<(f64, f64)>>,
    pub diameter_bound: Option<f64>,
    pub truth: Vec<f64>,
    pub truth_inside: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelReport {
    /// trajectory length, `None` for the stored envelope
    pub steps: Option<usize>,
    pub samples: usize,
    pub points: Vec<PointReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Shrinkage {
    pub point: usize,
    pub axis: usize,
    pub first_width: f64,
    pub last_width: f64,
    pub decrease_percent: f64,
    pub monotone: bool,
}

fn truth_inside(iv: &[(f64, f64)], t: &[f64]) -> bool {
    iv.iter().zip(t).all(|(&(lo, hi), &v)| {
        let slack = TRUTH_SLACK * (1.0 + v.abs());
        lo - slack <= v && v <= hi + slack
    })
}

fn query_point(cfg: &Resolved, env: &LipschitzEnvelope, x: &[f64]) -> CliResult<PointReport> {
    let truth = cfg.true_residual(x);
    match slice_with(env, x, exec()) {
        Err(LipsetError::UnboundedSlice) => {
            Ok(PointReport { x: x.to_vec(), intervals: None, diameter_bound: None, truth, truth_inside: true })
        }
        Err(e) => Err(e.into()),
        Ok(s) => {
            let iv = bounding_box(&s)?;
            let inside = truth_inside(&iv, &truth);
            Ok(PointReport {
                x: x.to_vec(),
                diameter_bound: Some(diameter_bound_with(&s, exec())),
                truth_inside: inside,
                intervals: Some(iv),
                truth,
            })
        }
    }
}

/// Width changes between consecutive levels for every point and axis.
pub fn shrinkage(levels: &[LevelReport]) -> Vec<Shrinkage> {
    let mut out = Vec::new();
    let Some(first) = levels.first().filter(|_| levels.len() >= 2) else {
        return out;
    };
    for (p, pt) in first.points.iter().enumerate() {
        let Some(iv) = &pt.intervals else { continue };
        for axis in 0..iv.len() {
            let widths: Vec<f64> = levels
                .iter()
                .filter_map(|l| l.points[p].intervals.as_ref().map(|v| v[axis].1 - v[axis].0))
                .collect();
            if widths.len() != levels.len() {
                continue;
            }
            let (a, b) = (widths[0], widths[widths.len() - 1]);
            let monotone = widths.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-300);
            let decrease_percent = if a > 0.0 { 100.0 * (a - b) / a } else { 0.0 };
            out.push(Shrinkage { point: p, axis, first_width: a, last_width: b, decrease_percent, monotone });
        }
    }
    out
}

pub fn query_levels(cfg: &Resolved) -> CliResult<Vec<LevelReport>> {
    let mut envs = Vec::new();
    if cfg.query_steps.is_empty() {
        envs.push((None, load_envelope(cfg)?));
    } else {
        let ds = load_dataset(cfg)?;
        for &n in &cfg.query_steps {
            envs.push((Some(n), build_envelope(cfg, &ds.truncated(n)?)?.0));
        }
    }
    envs.into_iter()
        .map(|(steps, env)| {
            let points = cfg.query_points.iter().map(|x| query_point(cfg, &env, x)).collect::<CliResult<Vec<_>>>()?;
            Ok(LevelReport { steps, samples: env.len(), points })
        })
        .collect()
}

pub fn cmd_query(cfg: &Resolved) -> CliResult<Value> {
    let levels = query_levels(cfg)?;
    let n = cfg.dim();
    let mut csv = csv_row(
        ["steps", "point"]
            .map(String::from)
            .into_iter()
            .chain(coord_header("x", n))
            .chain(["axis", "lo", "hi", "width", "truth"].map(String::from)),
    );
    for level in &levels {
        for (p, pt) in level.points.iter().enumerate() {
            let Some(iv) = &pt.intervals else { continue };
            for (axis, &(lo, hi)) in iv.iter().enumerate() {
                let steps = level.steps.map(|s| s.to_string()).unwrap_or_default();
                csv.push_str(&csv_row(
                    [steps, (p + 1).to_string()]
                        .into_iter()
                        .chain(pt.x.iter().map(|v| format_f64(*v)))
                        .chain([axis.to_string(), format_f64(lo), format_f64(hi), format_f64(hi - lo)])
                        .chain([format_f64(pt.truth[axis])]),
                ));
            }
        }
    }
    ensure_dir(&cfg.out_dir)?;
    write_text(&cfg.out_dir.join("query.csv"), &csv)?;
    let unbounded = levels.iter().any(|l| l.points.iter().any(|p| p.intervals.is_none()));
    if unbounded {
        eprintln!("notice: the envelope holds no samples; slices are unbounded");
    }
    let shrink = shrinkage(&levels);
    let summary = json!({
        "command": "query",
        "lipschitz": cfg.lipschitz,
        "noise_radius": cfg.noise_radius,
        "levels": levels,
        "shrinkage": shrink,
        "unbounded": unbounded,
    });
    write_json(&cfg.out_dir.join("query.json"), &summary)?;
    write_text(&cfg.out_dir.join("query.md"), &query_table(cfg, &levels))?;
    if let Some((l, p)) =
        levels.iter().find_map(|l| l.points.iter().find(|p| !p.truth_inside).map(|p| (l.steps, p.x.clone())))
    {
        return Err(CliError::Data(format!("true residual at {p:?} lies outside its interval (steps {l:?})")));
    }
    Ok(summary)
}

/// Markdown table with one row per query point and one column per
/// (level, axis).
pub fn query_table(cfg: &Resolved, levels: &[LevelReport]) -> String {
    let n = cfg.dim();
    let mut head = vec!["query".to_string()];
    for l in levels {
        for a in 0..n {
            let tag = l.steps.map(|s| format!("N={s}")).unwrap_or_else(|| "envelope".into());
            head.push(format!("{tag} axis {}", a + 1));
        }
    }
    let mut s = format!("| {} |\n|{}\n", head.join(" | "), "---|".repeat(head.len()));
    for p in 0..cfg.query_points.len() {
        let x: Vec<String> = cfg.query_points[p].iter().map(|v| format!("{v:.2}")).collect();
        let mut row = vec![format!("[{}]", x.join(", "))];
        for l in levels {
            for a in 0..n {
                row.push(match &l.points[p].intervals {
                    Some(iv) => format!("[{:.3e}, {:.3e}]", iv[a].0, iv[a].1),
                    None => "unbounded".into(),
                });
            }
        }
        s.push_str(&format!("| {} |\n", row.join(" | ")));
    }
    s
}

/// Closed boundary of the projection of `{(y - c)ᵀ R⁻¹ (y - c) ≤ 1}` onto
/// coordinates 0 and 1.
fn ellipse_polyline(c: &[f64], r: [[f64; 2]; 2], points: usize) -> Vec<(f64, f64)> {
    let l11 = r[0][0].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { r[1][0] / l11 } else { 0.0 };
    let l22 = (r[1][1] - l21 * l21).max(0.0).sqrt();
    (0..=points)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / points as f64;
            (c[0] + l11 * t.cos(), c[1] + l21 * t.cos() + l22 * t.sin())
        })
        .collect()
}

fn slice_svg(s: &SliceSet, e: &Ellipsoid, truth: &[f64]) -> String {
    let r = [[e.shape.get(0, 0), e.shape.get(0, 1)], [e.shape.get(1, 0), e.shape.get(1, 1)]];
    let outline = ellipse_polyline(e.center.as_slice(), r, POLYLINE_POINTS);
    let mut plot = SvgPlot::fit(480.0, 480.0, outline.iter().copied());
    for b in s.smallest(20).balls {
        let rr = b.radius * b.radius;
        plot.polyline(&ellipse_polyline(b.center.as_slice(), [[rr, 0.0], [0.0, rr]], POLYLINE_POINTS), "#9999cc", 0.5);
    }
    plot.polyline(&outline, "#cc3333", 1.5);
    plot.circle((truth[0], truth[1]), 3.0, "black");
    plot.render("y1", "y2")
}

pub fn cmd_ellipsoid(cfg: &Resolved) -> CliResult<Value> {
    let env = load_envelope(cfg)?;
    let opts = OuterOptions {
        max_balls: cfg.ellipsoid.max_balls,
        audit_samples: cfg.ellipsoid.audit_samples,
        seed: cfg.seed,
        solver_tol: cfg.ellipsoid.solver_tol,
        execution: exec(),
    };
    ensure_dir(&cfg.out_dir)?;
    let mut fits = Vec::new();
    for (i, x) in cfg.query_points.iter().enumerate() {
        let s = slice_with(&env, x, exec())?;
        let fit = outer_ellipsoid_with(&s, &opts)?;
        if !fit.audit.passed() {
            return Err(CliError::Solver(format!("ellipsoid at {x:?} failed its containment audit")));
        }
        let truth = cfg.true_residual(x);
        let inside = contains_point(&fit.ellipsoid, &truth)?;
        if cfg.dim() >= 2 {
            let e = &fit.ellipsoid;
            let r = [[e.shape.get(0, 0), e.shape.get(0, 1)], [e.shape.get(1, 0), e.shape.get(1, 1)]];
            let mut csv = csv_row(["k", "y1", "y2"].map(String::from));
            for (k, (a, b)) in ellipse_polyline(e.center.as_slice(), r, POLYLINE_POINTS).into_iter().enumerate() {
                csv.push_str(&csv_row([k.to_string(), format_f64(a), format_f64(b)]));
            }
            write_text(&cfg.out_dir.join(format!("ellipsoid_{}.csv", i + 1)), &csv)?;
            write_text(&cfg.out_dir.join(format!("slice_{}.svg", i + 1)), &slice_svg(&s, e, &truth))?;
        }
        fits.push(json!({
            "x": x,
            "ellipsoid": fit.ellipsoid,
            "axis_intervals": (0..cfg.dim()).map(|a| fit.ellipsoid.axis_interval(a)).collect::<Vec<_>>(),
            "trace": fit.ellipsoid.trace(),
            "balls_used": fit.balls_used,
            "solver_status": fit.solver_status,
            "solver_iterations": fit.solver_iterations,
            "min_slack_eigenvalue": fit.min_slack_eigenvalue,
            "audit": fit.audit,
            "truth": truth,
            "truth_inside": inside,
        }));
    }
    let summary = json!({ "command": "ellipsoid", "fits": fits });
    write_json(&cfg.out_dir.join("ellipsoids.json"), &summary)?;
    if let Some(f) = fits.iter().find(|f| f["truth_inside"] == json!(false)) {
        return Err(CliError::Data(format!("true residual at {} lies outside the outer ellipsoid", f["x"])));
    }
    Ok(summary)
}

/// `count` states at `fraction` of the way from `x_eq` to the boundary,
/// in directions spread over the plane of the first two coordinates (or
/// alternating signs in one dimension).
pub fn interior_starts(set: &EllipsoidalInvariantSet, count: usize, fraction: f64) -> Vec<Vec<f64>> {
    let n = set.dim();
    (0..count)
        .map(|k| {
            let mut dir = vec![0.0; n];
            if n == 1 {
                dir[0] = if k % 2 == 0 { 1.0 } else { -1.0 };
            } else {
                let t = 2.0 * PI * (k as f64 + 0.5) / count as f64;
                dir[0] = t.cos();
                dir[1] = t.sin();
            }
            let edge = set.boundary_point(&dir);
            set.equilibrium.iter().zip(&edge).map(|(c, e)| c + fraction * (e - c)).collect()
        })
        .collect()
}

/// Fraction of the way to the boundary used for simulation starts.
pub const START_FRACTION: f64 = 0.8;

pub fn invariance_options(cfg: &Resolved) -> CliResult<InvarianceOptions> {
    let inv = cfg.invariant.as_ref().ok_or_else(|| CliError::Usage("config has no invariant section".into()))?;
    let n = cfg.dim();
    let mut opts = InvarianceOptions::new(inv.x_eq.clone(), inv.n_sets).with_max_constraints(inv.max_constraints);
    if let Some(d) = &inv.domain {
        opts = opts.with_domain(DomainBox::new(d.lo.clone(), d.hi.clone())?);
    }
    if let Some(r) = inv.inner_radius {
        opts = opts.with_inner_radius(r);
    }
    match &cfg.assumed_model {
        AssumedModel::Zero => {}
        m => {
            let (a, b) = m.as_affine(n).ok_or_else(|| {
                CliError::Usage(format!("invariant synthesis needs an affine assumed model, got {}", m.tag()))
            })?;
            opts = opts.with_model(AffineModel::new(a, b)?);
        }
    }
    Ok(opts)
}

fn synthesis_error(e: SynthesisError) -> CliError {
    match e {
        SynthesisError::Input(e) => e.into(),
        SynthesisError::Solver { .. } => CliError::Solver(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

pub fn cmd_invariant(cfg: &Resolved) -> CliResult<Value> {
    let opts = invariance_options(cfg)?;
    let inv = cfg.invariant.clone().expect("checked by invariance_options");
    let env = load_envelope(cfg)?;
    let mut warnings = Vec::new();
    if !env.is_empty() {
        let s = slice_with(&env, &inv.x_eq, exec())?;
        let fixed: Vec<f64> = inv.x_eq.iter().zip(cfg.assumed_model.eval(&inv.x_eq)).map(|(x, m)| x - m).collect();
        if !slice_member(&s, &fixed)? {
            let w = format!("x_eq = {:?} is not a fixed point of the data; synthesis will likely fail", inv.x_eq);
            eprintln!("warning: {w}");
            warnings.push(w);
        }
    }
    let bisection = BisectionConfig {
        rho_lo: inv.rho_lo,
        rho_hi: inv.rho_hi,
        max_iters: inv.max_iters,
        feasibility_tol: inv.feasibility_tol,
        grid_points: inv.grid_points,
        ..Default::default()
    };
    let check = EnvelopeCheckOptions {
        samples: inv.envelope_samples,
        seed: cfg.seed,
        execution: exec(),
        ..Default::default()
    };
    ensure_dir(&cfg.out_dir)?;
    let syn = match synthesize_with(&env, &opts, &bisection, &check) {
        Ok(s) => s,
        Err(e) => {
            write_json(
                &cfg.out_dir.join("verification.json"),
                &json!({ "command": "invariant", "error": e.to_string(), "trials": e.trials(), "warnings": warnings }),
            )?;
            return Err(synthesis_error(e));
        }
    };
    let recheck = recheck_certificate(&env, &opts, &syn, inv.feasibility_tol)?;
    let sys = cfg.system.build();
    let step = |x: &[f64]| sys.step(x);
    let starts = interior_starts(&syn.set, inv.simulation_starts, START_FRACTION);
    let sim = verify_by_simulation(&syn.set, &step, &starts, inv.simulation_horizon, exec());

    write_text(&cfg.out_dir.join("invariant_set.json"), &(syn.set.to_json()? + "\n"))?;
    let n = cfg.dim();
    let mut csv;
    if n >= 2 {
        csv = csv_row(["set", "k", "x1", "x2"].map(String::from));
        for j in 0..syn.set.count() {
            for (k, (a, b)) in syn.set.boundary_polyline(j, 0, 1, POLYLINE_POINTS).into_iter().enumerate() {
                csv.push_str(&csv_row([(j + 1).to_string(), k.to_string(), format_f64(a), format_f64(b)]));
            }
        }
        write_text(&cfg.out_dir.join("invariant.svg"), &invariant_svg(cfg, &syn.set, &starts)?)?;
    } else {
        csv = csv_row(["set", "lo", "hi"].map(String::from));
        for j in 0..syn.set.count() {
            let h = 1.0 / syn.set.shapes[j].get(0, 0).sqrt();
            let c = syn.set.equilibrium[0];
            csv.push_str(&csv_row([(j + 1).to_string(), format_f64(c - h), format_f64(c + h)]));
        }
    }
    write_text(&cfg.out_dir.join("invariant_boundary.csv"), &csv)?;
    let summary = json!({
        "command": "invariant",
        "rho": syn.rho,
        "objective": syn.objective,
        "constraints_used": syn.constraints_used,
        "trials": syn.trials,
        "envelope_check": syn.envelope_check,
        "recheck": {
            "status": recheck.status,
            "min_slack_eigenvalue": recheck.min_slack_eigenvalue,
            "max_violation": recheck.max_violation,
        },
        "simulation": sim,
        "simulation_starts": starts,
        "set": syn.set,
        "warnings": warnings,
    });
    write_json(&cfg.out_dir.join("verification.json"), &summary)?;
    if !recheck.status.is_feasible() {
        return Err(CliError::Solver(format!(
            "certificate fails independent verification (max violation {:.3e})",
            recheck.max_violation
        )));
    }
    if let Some(e) = &sim.escape {
        return Err(CliError::Data(format!("trajectory from start {} left the set at step {}", e.start, e.step)));
    }
    Ok(summary)
}

fn invariant_svg(cfg: &Resolved, set: &EllipsoidalInvariantSet, starts: &[Vec<f64>]) -> CliResult<String> {
    let sys = cfg.system.build();
    let horizon = cfg.invariant.as_ref().map(|i| i.simulation_horizon).unwrap_or(1000).min(2000);
    let outlines: Vec<Vec<(f64, f64)>> =
        (0..set.count()).map(|j| set.boundary_polyline(j, 0, 1, POLYLINE_POINTS)).collect();
    let mut plot = SvgPlot::fit(560.0, 480.0, outlines.iter().flatten().copied());
    for x0 in starts {
        let t = simulate(sys.as_ref(), x0, horizon)?;
        let pts: Vec<(f64, f64)> = t.iter().map(|x| (x[0], x[1])).collect();
        plot.polyline(&pts, "#3366cc", 0.7);
        plot.circle((x0[0], x0[1]), 2.5, "#3366cc");
    }
    for o in &outlines {
        plot.polyline(o, "#cc3333", 1.5);
    }
    plot.circle((set.equilibrium[0], set.equilibrium[1]), 3.0, "black");
    Ok(plot.render("x1", "x2"))
}

pub fn cmd_report(cfg: &Resolved) -> CliResult<Value> {
    let mut sections = serde_json::Map::new();
    let mut steps = vec![Command::Simulate, Command::Learn];
    if !cfg.query_points.is_empty() {
        steps.push(Command::Query);
        steps.push(Command::Ellipsoid);
    }
    if cfg.invariant.is_some() {
        steps.push(Command::Invariant);
    }
    let mut failure = None;
    for c in steps {
        match run(c, cfg) {
            Ok(v) => {
                sections.insert(c.name().into(), v);
            }
            Err(e) => {
                sections.insert(c.name().into(), json!({ "error": e.to_string(), "exit_code": e.exit_code() }));
                failure = Some(e);
                break;
            }
        }
    }
    let summary = Value::Object(sections);
    write_json(&cfg.out_dir.join("report.json"), &summary)?;
    write_text(&cfg.out_dir.join("report.md"), &report_markdown(cfg, &summary))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(json!({ "command": "report", "sections": summary })),
    }
}

fn report_markdown(cfg: &Resolved, r: &Value) -> String {
    let mut s = String::from("# lipset run report\n\n");
    s.push_str(&format!(
        "- system: {}\n- assumed model: {}\n- L: {:e}\n- noise radius: {:e}\n- seed: {}\n\n",
        serde_json::to_string(&cfg.system).unwrap_or_default(),
        cfg.assumed_model.tag(),
        cfg.lipschitz,
        cfg.noise_radius,
        cfg.seed
    ));
    for (name, v) in r.as_object().into_iter().flatten() {
        if let Some(e) = v.get("error") {
            s.push_str(&format!("## {name}\n\nFAILED: {}\n\n", e.as_str().unwrap_or_default()));
        }
    }
    if let Some(sim) = r.get("simulate") {
        s.push_str(&format!(
            "## simulate\n\n{} trajectories of {} steps, {} residual pairs.\n\n",
            sim["trajectories"], sim["steps"], sim["residual_pairs"]
        ));
    }
    if let Some(l) = r.get("learn").filter(|l| l.get("error").is_none()) {
        s.push_str(&format!(
            "## learn\n\n{} samples stored ({} offered, {} redundant).\n\n",
            l["samples"], l["offered"], l["redundant"]
        ));
    }
    if let Ok(levels) = query_levels_from(r) {
        s.push_str("## query\n\n");
        s.push_str(&query_table(cfg, &levels));
        s.push('\n');
        if let Some(sh) = r["query"]["shrinkage"].as_array().filter(|a| !a.is_empty()) {
            s.push_str("| query | axis | width decrease (%) | monotone |\n|---|---|---|---|\n");
            for x in sh {
                s.push_str(&format!(
                    "| {} | {} | {:.1} | {} |\n",
                    x["point"].as_u64().unwrap_or(0) + 1,
                    x["axis"].as_u64().unwrap_or(0) + 1,
                    x["decrease_percent"].as_f64().unwrap_or(f64::NAN),
                    x["monotone"]
                ));
            }
            s.push('\n');
        }
    }
    if let Some(fits) = r["ellipsoid"]["fits"].as_array() {
        s.push_str("## ellipsoid\n\n| query | trace | balls | audit violations | truth inside |\n|---|---|---|---|---|\n");
        for f in fits {
            s.push_str(&format!(
                "| {} | {:.3e} | {} | {} | {} |\n",
                f["x"],
                f["trace"].as_f64().unwrap_or(f64::NAN),
                f["balls_used"],
                f["audit"]["violations"],
                f["truth_inside"]
            ));
        }
        s.push('\n');
    }
    let inv = &r["invariant"];
    if inv.get("rho").is_some() {
        s.push_str(&format!(
            "## invariant\n\nrho = {}, envelope check {} (worst bound {}), independent slack {}, simulation {}.\n",
            inv["rho"],
            inv["envelope_check"]["verdict"],
            inv["envelope_check"]["worst_bound"],
            inv["recheck"]["min_slack_eigenvalue"],
            if inv["simulation"]["passed"] == json!(true) { "stays inside" } else { "escapes" }
        ));
    }
    s
}

fn query_levels_from(r: &Value) -> Result<Vec<LevelReport>, ()> {
    let levels = r.get("query").and_then(|q| q.get("levels")).and_then(Value::as_array).ok_or(())?;
    levels
        .iter()
        .map(|l| {
            let points = l["points"]
                .as_array()
                .ok_or(())?
                .iter()
                .map(|p| PointReport {
                    x: serde_json::from_value(p["x"].clone()).unwrap_or_default(),
                    intervals: serde_json::from_value(p["intervals"].clone()).ok(),
                    diameter_bound: p["diameter_bound"].as_f64(),
                    truth: serde_json::from_value(p["truth"].clone()).unwrap_or_default(),
                    truth_inside: p["truth_inside"].as_bool().unwrap_or(false),
                })
                .collect();
            Ok(LevelReport {
                steps: l["steps"].as_u64().map(|v| v as usize),
                samples: l["samples"].as_u64().unwrap_or(0) as usize,
                points,
            })
        })
        .collect()
}
