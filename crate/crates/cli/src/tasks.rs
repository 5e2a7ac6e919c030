//! One pipeline per task. Each fills a metrics map and a list of artifacts.

use crate::config::*;
use crate::error::CliError;
use crate::fields;
use brane_core::actions::{centered_variation, dng_action, dng_first_variation, qec_action, qec_eom_residual, qec_first_variation};
use brane_core::background::BackgroundModel;
use brane_core::deformation::recompose;
use brane_core::embedding::Embedding;
use brane_core::geometry::GeometryCache;
use brane_core::grid::{field_csv, Boundary, Field, GridSpec, IndexKind};
use brane_core::linearized::{assemble, inner_product, kernel_threshold, p_squared_expanded, OpKind};
use brane_core::solver::{catenoid_neck, catenoid_profile_deviation, convergence_fit, relax_dng, solve_jacobi_kernel, RelaxParams};
use brane_core::symplectic::*;
use serde_json::{json, Map, Value};

/// Metrics, artifacts `(file name, contents)`, and an optional numerical
/// failure to report after the artifacts are written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub metrics: Map<String, Value>,
    pub files: Vec<(String, String)>,
    pub failure: Option<String>,
}

impl Outcome {
    fn put(&mut self, key: &str, v: impl Into<Value>) {
        self.metrics.insert(key.to_string(), v.into());
    }
}

pub struct Setup {
    pub grid: GridSpec,
    pub background: BackgroundModel,
    pub embedding: Embedding,
}

pub fn setup(cfg: &RunConfig, scale: usize) -> Result<Setup, CliError> {
    let grid = cfg.grid_spec(scale)?;
    let background = cfg.background_model()?;
    let embedding = match (&cfg.embedding, cfg.parametrization()) {
        (_, Some(p)) => p.sample(&grid, &background)?,
        (EmbeddingConfig::Csv { path }, None) => {
            let data = fields::read_table(&grid, path, background.dim(), "embedding.path")?;
            Embedding::new(&grid, &background, Field::from_data(&[(IndexKind::Ambient, background.dim())], data)?)?
        }
        _ => unreachable!("every other embedding is a parametrization"),
    };
    Ok(Setup { grid, background, embedding })
}

fn perturbation(cfg: &RunConfig, geom: &GeometryCache, name: &str) -> Result<(Field, Field), CliError> {
    let (i, p) = cfg.perturbations.iter().enumerate().find(|(_, p)| p.name == name).expect("validated name");
    fields::perturbation(&geom.grid, geom.codim(), p, i)
}

fn max_kept(geom: &GeometryCache, f: &Field, margin: usize, value: impl Fn(f64) -> f64) -> f64 {
    (0..geom.grid.len())
        .filter(|&k| geom.grid.boundary_distance(k) >= margin)
        .flat_map(|k| f.at(k).iter().map(|&v| value(v)))
        .fold(0.0, f64::max)
}

fn norm_mean_curvature(geom: &GeometryCache) -> Field {
    Field::from_fn(&geom.grid, &[], |k, o| o[0] = geom.k_mean.at(k).iter().map(|v| v * v).sum::<f64>().sqrt())
}

pub fn geometry(cfg: &RunConfig, scale: usize) -> Result<Outcome, CliError> {
    let s = setup(cfg, scale)?;
    let geom = GeometryCache::new(&s.grid, &s.background, &s.embedding)?;
    let task = cfg.geometry.clone().unwrap_or_default();
    let mut out = Outcome::default();
    out.put("nodes", geom.grid.len());
    out.put("dim", geom.dim());
    out.put("codim", geom.codim());
    out.put("area", geom.area());
    out.put("sqrt_g_min", geom.sqrt_g().data().iter().cloned().fold(f64::INFINITY, f64::min));
    out.put("sqrt_g_max", geom.sqrt_g().max_abs());
    out.put("eom_max_residual", max_kept(&geom, &geom.k_mean, task.margin, f64::abs));
    out.put("qec_eom_max_residual", max_kept(&geom, &qec_eom_residual(&geom)?, task.margin, f64::abs));
    if let Some(expected) = task.expected_mean_curvature {
        let norm = norm_mean_curvature(&geom);
        out.put("mean_curvature_error_max", max_kept(&geom, &norm, task.margin, |v| (v - expected).abs()));
    }
    let csv = field_csv(&geom.grid, &[("X", geom.embedding.field()), ("sqrt_g", geom.sqrt_g()), ("K", &geom.k_mean)]);
    out.files.push(("geometry.csv".into(), csv));
    Ok(out)
}

pub fn action(cfg: &RunConfig, scale: usize) -> Result<Outcome, CliError> {
    let s = setup(cfg, scale)?;
    let geom = GeometryCache::new(&s.grid, &s.background, &s.embedding)?;
    let task = cfg.action.clone().unwrap_or_default();
    let mut out = Outcome::default();
    out.put("dng_action", dng_action(&geom, task.mu));
    out.put("qec_action", qec_action(&geom, task.alpha));
    out.put("dng_eom_max_residual", geom.k_mean.max_abs());
    out.put("qec_eom_max_residual", qec_eom_residual(&geom)?.max_abs());
    if let Some(name) = &task.perturbation {
        let (t, phi) = perturbation(cfg, &geom, name)?;
        let dx = recompose(&geom, &t, &phi)?;
        let dng = dng_first_variation(&geom, &t, &phi, task.mu)?;
        let qec = qec_first_variation(&geom, &t, &phi, task.alpha)?;
        let fd_dng = centered_variation(&geom, &dx, task.eps, |g| dng_action(g, task.mu))?;
        let fd_qec = centered_variation(&geom, &dx, task.eps, |g| qec_action(g, task.alpha))?;
        for (key, b, fd) in [("dng", &dng, fd_dng), ("qec", &qec, fd_qec)] {
            out.put(&format!("{key}_variation"), b.total);
            out.put(&format!("{key}_bulk_term"), b.bulk_term);
            out.put(&format!("{key}_divergence_term"), b.divergence_term);
            out.put(&format!("{key}_finite_difference"), fd);
            out.put(&format!("{key}_relative_error"), (b.total - fd).abs() / fd.abs().max(f64::MIN_POSITIVE));
        }
        let csv = field_csv(&geom.grid, &[("dng_bulk", &dng.bulk_density), ("qec_bulk", &qec.bulk_density)]);
        out.files.push(("variation.csv".into(), csv));
    }
    Ok(out)
}

pub fn relax(cfg: &RunConfig, scale: usize) -> Result<Outcome, CliError> {
    let s = setup(cfg, scale)?;
    let task = cfg.relax.clone().unwrap_or_default();
    let g0 = GeometryCache::new(&s.grid, &s.background, &s.embedding)?;
    let mut params = RelaxParams::stable(&g0, task.max_iterations, task.target);
    if task.fixed == FixedNodes::None {
        params.fixed = vec![false; s.grid.len()];
        params.step = brane_core::solver::stable_step(&g0, &params.fixed);
    }
    if let Some(step) = task.step {
        params.step = step;
    }
    let res = relax_dng(&s.grid, &s.background, &s.embedding, &params)?;
    let mut out = Outcome::default();
    out.put("converged", res.converged);
    out.put("iterations", res.history.len() - 1);
    out.put("rejected_steps", res.rejected_steps);
    out.put("step", params.step);
    out.put("stability", res.stability);
    out.put("final_residual", res.residual());
    out.put("initial_area", res.history[0].area);
    out.put("final_area", res.history.last().expect("non-empty").area);
    out.put("area_monotone", res.area_monotone());
    if let Some(c) = &task.catenoid {
        let neck = catenoid_neck(c.half_height, c.radius)?;
        let h = axial_spacing(&s.grid);
        let dev = catenoid_profile_deviation(&res.embedding, neck);
        out.put("catenoid_neck", neck);
        out.put("profile_deviation", dev);
        out.put("axial_spacing", h);
        out.put("profile_deviation_over_h2", dev / (h * h));
    }
    out.files.push(("relaxed.csv".into(), field_csv(&s.grid, &[("X", res.embedding.field())])));
    let history: Vec<Value> =
        res.history.iter().map(|r| json!({"iteration": r.iteration, "step": r.step, "area": r.area, "residual": r.residual})).collect();
    out.files.push(("history.json".into(), pretty(&Value::Array(history))));
    if !res.converged {
        out.failure = Some(format!(
            "relaxation stopped after {} iterations with residual {:.3e} above target {:.3e}",
            task.max_iterations,
            res.residual(),
            task.target
        ));
    }
    Ok(out)
}

/// Spacing of the first open axis, or the largest spacing if none is open.
fn axial_spacing(grid: &GridSpec) -> f64 {
    grid.axes().iter().find(|a| a.boundary == Boundary::Open).map(|a| a.h).unwrap_or_else(|| grid.max_spacing())
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn op_kind(k: OperatorKind) -> OpKind {
    match k {
        OperatorKind::Jacobi => OpKind::Jacobi,
        OperatorKind::PSquaredExpanded => OpKind::PSquaredExpanded,
        OperatorKind::PSquaredComposed => OpKind::PSquaredComposed,
    }
}

pub fn jacobi(cfg: &RunConfig, scale: usize) -> Result<Outcome, CliError> {
    let s = setup(cfg, scale)?;
    let geom = GeometryCache::new(&s.grid, &s.background, &s.embedding)?;
    let task = cfg.jacobi.clone().unwrap_or_default();
    let kind = op_kind(task.operator);
    let op = assemble(kind, &geom, task.budget)?;
    let kernel = solve_jacobi_kernel(&geom, kind, task.budget)?;
    let mut out = Outcome::default();
    out.put("dofs", op.dofs());
    out.put("kernel_threshold", kernel_threshold(&geom));
    out.put("kernel_dim", kernel.len());
    out.put("kernel_sigmas", kernel.iter().map(|(s, _)| *s).collect::<Vec<f64>>());
    out.put("operator_norm", op.max_abs_row_sum());
    out.put("matrix_asymmetry", op.matrix_asymmetry());
    if task.persistence {
        let norms = kernel
            .iter()
            .map(|(_, v)| {
                let p2 = p_squared_expanded(&geom, v)?;
                Ok(inner_product(&geom, &p2, &p2)?.sqrt())
            })
            .collect::<Result<Vec<f64>, CliError>>()?;
        out.put("persistence_norms", norms);
    }
    let named: Vec<(String, &Field)> = kernel.iter().enumerate().map(|(i, (_, v))| (format!("v{i}"), v)).collect();
    let cols: Vec<(&str, &Field)> = named.iter().map(|(n, f)| (n.as_str(), *f)).collect();
    out.files.push(("kernel.csv".into(), field_csv(&geom.grid, &cols)));
    Ok(out)
}

fn current_of(geom: &GeometryCache, which: CurrentChoice, a: &(Field, Field), b: &(Field, Field), route: RouteMode) -> Result<Current, CliError> {
    Ok(match which {
        CurrentChoice::DngPair => dng_potential_pair(geom, Some(&a.0), &a.1, Some(&b.0), &b.1)?,
        CurrentChoice::QecAdjointPair => qec_current_adjoint_pair(geom, &a.1, &b.1)?,
        CurrentChoice::QecFromPotential => {
            let mode = match route {
                RouteMode::Extremal => MeanCurvature::Extremal,
                RouteMode::General => MeanCurvature::General,
            };
            qec_current_from_potential(geom, &a.1, &b.1, mode)?
        }
    })
}

pub fn current(cfg: &RunConfig, scale: usize) -> Result<Outcome, CliError> {
    let s = setup(cfg, scale)?;
    let geom = GeometryCache::new(&s.grid, &s.background, &s.embedding)?;
    let task = cfg.current.clone().expect("validated");
    let a = perturbation(cfg, &geom, &task.pair[0])?;
    let b = perturbation(cfg, &geom, &task.pair[1])?;
    let mut out = Outcome::default();
    let mut cols = Vec::new();
    let mut currents = Vec::new();
    for which in [CurrentChoice::DngPair, CurrentChoice::QecAdjointPair, CurrentChoice::QecFromPotential] {
        let c = current_of(&geom, which, &a, &b, task.route)?;
        let n = c.div_norms(&geom, task.margin)?;
        let name = c.kind.name();
        out.put(&format!("{name}_div_max"), n.max);
        out.put(&format!("{name}_div_l2"), n.l2);
        out.put(&format!("{name}_max_abs"), c.max_abs());
        cols.push((format!("{name}_div"), c.divergence(&geom)?));
        currents.push(c);
    }
    out.put("route_equality_residual", relative_difference(&currents[2], &currents[1]));
    let mut named: Vec<(String, &Field)> = currents.iter().map(|c| (c.kind.name().to_string(), &c.density)).collect();
    named.extend(cols.iter().map(|(n, f)| (n.clone(), f)));
    let refs: Vec<(&str, &Field)> = named.iter().map(|(n, f)| (n.as_str(), *f)).collect();
    out.files.push(("current.csv".into(), field_csv(&geom.grid, &refs)));
    Ok(out)
}

pub fn sympform(cfg: &RunConfig, scale: usize) -> Result<Outcome, CliError> {
    let s = setup(cfg, scale)?;
    let geom = GeometryCache::new(&s.grid, &s.background, &s.embedding)?;
    let task = cfg.sympform.clone().expect("validated");
    let a = perturbation(cfg, &geom, &task.pair[0])?;
    let b = perturbation(cfg, &geom, &task.pair[1])?;
    let c = current_of(&geom, task.current, &a, &b, RouteMode::Extremal)?;
    let values = omega_by_slice(&geom, &c, task.slice_axis, task.margin)?;
    if values.is_empty() {
        return Err(CliError::Config { path: "sympform.margin".into(), message: "leaves no slices".into() });
    }
    let omegas: Vec<f64> = values.iter().map(|v| v.omega).collect();
    let lo = omegas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = omegas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = Outcome::default();
    out.put("current", c.kind.name());
    out.put("slices", values.iter().map(|v| v.slice.index).collect::<Vec<usize>>());
    out.put("omega", omegas.clone());
    out.put("omega_mean", omegas.iter().sum::<f64>() / omegas.len() as f64);
    out.put("omega_spread", hi - lo);
    if let Some(r) = task.reference {
        out.put("omega_max_deviation", omegas.iter().map(|w| (w - r).abs()).fold(0.0, f64::max));
    }
    let ax = geom.grid.axis(task.slice_axis)?;
    let mut csv = format!("xi{},omega\n", task.slice_axis);
    for v in &values {
        csv.push_str(&format!("{:.12e},{:.12e}\n", ax.coord(v.slice.index), v.omega));
    }
    out.files.push(("omega.csv".into(), csv));
    Ok(out)
}

fn level_error(cfg: &RunConfig, task: &ConvergenceTask, scale: usize) -> Result<(f64, f64), CliError> {
    let s = setup(cfg, scale)?;
    let geom = GeometryCache::new(&s.grid, &s.background, &s.embedding)?;
    let err = match &task.quantity {
        Quantity::MeanCurvature { expected } => max_kept(&geom, &norm_mean_curvature(&geom), task.margin, |v| (v - expected).abs()),
        Quantity::CurrentDivergence { pair, current } => {
            let a = perturbation(cfg, &geom, &pair[0])?;
            let b = perturbation(cfg, &geom, &pair[1])?;
            current_of(&geom, *current, &a, &b, RouteMode::Extremal)?.div_norms(&geom, task.margin)?.max
        }
        Quantity::QecEom => max_kept(&geom, &qec_eom_residual(&geom)?, task.margin, f64::abs),
    };
    Ok((s.grid.max_spacing(), err))
}

pub fn convergence(cfg: &RunConfig, scale: usize) -> Result<Outcome, CliError> {
    let task = cfg.convergence.clone().expect("validated");
    let samples = task.ladder.iter().map(|&k| level_error(cfg, &task, scale * k)).collect::<Result<Vec<_>, _>>()?;
    let fit = convergence_fit(&samples, task.floor)?;
    let mut out = Outcome::default();
    out.put("fitted_order", fit.order.map_or(Value::Null, Value::from));
    out.put("constant", fit.constant.map_or(Value::Null, Value::from));
    out.put("monotone", fit.monotone);
    out.put("exact", fit.exact);
    let levels: Vec<Value> =
        task.ladder.iter().zip(&samples).map(|(k, (h, e))| json!({"scale": scale * k, "h": h, "error": e})).collect();
    out.put("levels", levels);
    let mut csv = String::from("scale,h,error\n");
    for (k, (h, e)) in task.ladder.iter().zip(&samples) {
        csv.push_str(&format!("{},{h:.12e},{e:.12e}\n", scale * k));
    }
    out.files.push(("convergence.csv".into(), csv));
    Ok(out)
}
