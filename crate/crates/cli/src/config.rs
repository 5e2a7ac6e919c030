//! Run configuration: JSON schema, parsing with path-qualified errors, and
//! constraint validation.

use crate::error::CliError;
use brane_core::background::{BackgroundKind, BackgroundModel};
use brane_core::embedding::Parametrization;
use brane_core::grid::{Axis, GridSpec};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Geometry,
    Action,
    Relax,
    Jacobi,
    Current,
    Sympform,
    Convergence,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Geometry => "geometry",
            TaskKind::Action => "action",
            TaskKind::Relax => "relax",
            TaskKind::Jacobi => "jacobi",
            TaskKind::Current => "current",
            TaskKind::Sympform => "sympform",
            TaskKind::Convergence => "convergence",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
    pub background: BackgroundConfig,
    pub grid: GridConfig,
    pub embedding: EmbeddingConfig,
    #[serde(default)]
    pub perturbations: Vec<PerturbationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<ActionTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relax: Option<RelaxTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jacobi: Option<JacobiTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<CurrentTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sympform: Option<SympformTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceTask>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackgroundConfig {
    Flat {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        signature: Option<Vec<f64>>,
    },
    ConstantCurvature {
        dim: usize,
        kappa: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        signature: Option<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub axes: Vec<AxisConfig>,
}

/// `n` counts nodes. Under a grid scale `k` open axes keep their end points
/// and get `k (n − 1) + 1` nodes; periodic and polar axes get `k n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AxisConfig {
    Open { start: f64, end: f64, n: usize },
    Periodic {
        #[serde(default)]
        start: f64,
        #[serde(default = "two_pi")]
        period: f64,
        n: usize,
    },
    Pole { n: usize, partner: usize },
}

fn two_pi() -> f64 {
    2.0 * PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingConfig {
    Plane { dim: usize, ambient: usize },
    Sphere { radius: f64 },
    Cylinder { radius: f64 },
    Catenoid { waist: f64 },
    Torus { major: f64, minor: f64 },
    Circle { center: Vec<f64>, radius: f64 },
    Helix { radius: f64, pitch: f64 },
    BentSegment { amplitude: f64, ambient: usize },
    Disk { radius: f64, bulge: f64 },
    /// Node table with the grid coordinates first, then the ambient point.
    Csv { path: String },
}

/// A named perturbation given by expressions in the grid coordinates
/// `x0, x1, …` (and `pi`), or read from a CSV node table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normal: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tangential: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryTask {
    /// Compared against `|K|` node by node when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected_mean_curvature: Option<f64>,
    #[serde(default)]
    pub margin: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionTask {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<String>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default = "one")]
    pub alpha: f64,
}

impl Default for ActionTask {
    fn default() -> Self {
        ActionTask { perturbation: None, eps: default_eps(), mu: 1.0, alpha: 1.0 }
    }
}

fn default_eps() -> f64 {
    1e-5
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedNodes {
    OpenEnds,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxTask {
    /// Defaults to the stable step `τ · scale = 0.4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_target")]
    pub target: f64,
    #[serde(default = "default_fixed")]
    pub fixed: FixedNodes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catenoid: Option<CatenoidCheck>,
}

impl Default for RelaxTask {
    fn default() -> Self {
        RelaxTask { step: None, max_iterations: default_max_iterations(), target: default_target(), fixed: FixedNodes::OpenEnds, catenoid: None }
    }
}

fn default_max_iterations() -> usize {
    100_000
}

fn default_target() -> f64 {
    1e-9
}

fn default_fixed() -> FixedNodes {
    FixedNodes::OpenEnds
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatenoidCheck {
    pub half_height: f64,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Jacobi,
    PSquaredExpanded,
    PSquaredComposed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JacobiTask {
    #[serde(default = "default_operator")]
    pub operator: OperatorKind,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Also apply the expanded squared operator to each kernel vector.
    #[serde(default)]
    pub persistence: bool,
}

impl Default for JacobiTask {
    fn default() -> Self {
        JacobiTask { operator: OperatorKind::Jacobi, budget: default_budget(), persistence: false }
    }
}

fn default_operator() -> OperatorKind {
    OperatorKind::Jacobi
}

fn default_budget() -> usize {
    brane_core::linearized::DOF_BUDGET
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteMode {
    Extremal,
    General,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrentTask {
    pub pair: [String; 2],
    #[serde(default = "default_route")]
    pub route: RouteMode,
    #[serde(default = "default_margin")]
    pub margin: usize,
}

fn default_route() -> RouteMode {
    RouteMode::Extremal
}

fn default_margin() -> usize {
    3
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentChoice {
    DngPair,
    QecAdjointPair,
    QecFromPotential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SympformTask {
    pub pair: [String; 2],
    pub current: CurrentChoice,
    pub slice_axis: usize,
    #[serde(default = "default_margin")]
    pub margin: usize,
    /// Expected value of ω, reported against every slice when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Quantity {
    /// `max | |K| − expected |` over nodes at least `margin` from an open end.
    MeanCurvature { expected: f64 },
    /// `max |∇_a j^a|` of a pair current.
    CurrentDivergence { pair: [String; 2], current: CurrentChoice },
    /// `max |E^i|` of the curvature-squared equation of motion.
    QecEom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceTask {
    pub quantity: Quantity,
    #[serde(default = "default_ladder")]
    pub ladder: Vec<usize>,
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default)]
    pub margin: usize,
}

fn default_ladder() -> Vec<usize> {
    vec![1, 2, 4]
}

fn default_floor() -> f64 {
    1e-12
}

fn invalid(path: impl Into<String>, msg: impl Into<String>) -> CliError {
    CliError::Config { path: path.into(), message: msg.into() }
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        invalid(if path == "." { String::new() } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.background_model()?;
        let grid = self.grid_spec(1)?;
        self.embedding_validate(&grid)?;
        let mut names = BTreeSet::new();
        for (i, p) in self.perturbations.iter().enumerate() {
            let path = format!("perturbations[{i}]");
            if !names.insert(p.name.as_str()) {
                return Err(invalid(format!("{path}.name"), format!("duplicate perturbation name `{}`", p.name)));
            }
            match (&p.normal, &p.csv) {
                (Some(_), Some(_)) => return Err(invalid(&path, "give either `normal` expressions or `csv`, not both")),
                (None, None) => return Err(invalid(&path, "needs `normal` expressions or `csv`")),
                _ => {}
            }
            if p.csv.is_some() && p.tangential.is_some() {
                return Err(invalid(format!("{path}.tangential"), "not allowed together with `csv`"));
            }
            for (key, list) in [("normal", &p.normal), ("tangential", &p.tangential)] {
                for (j, e) in list.iter().flatten().enumerate() {
                    crate::fields::compile(e, grid.dim()).map_err(|m| invalid(format!("{path}.{key}[{j}]"), m))?;
                }
            }
            if let Some(t) = &p.tangential {
                if t.len() != grid.dim() {
                    return Err(invalid(
                        format!("{path}.tangential"),
                        format!("needs {} components, got {}", grid.dim(), t.len()),
                    ));
                }
            }
        }
        let resolve = |path: String, name: &str| -> Result<(), CliError> {
            if names.contains(name) {
                Ok(())
            } else {
                Err(invalid(path, format!("unknown perturbation `{name}`")))
            }
        };
        if let Some(a) = &self.action {
            positive("action.eps", a.eps)?;
            if let Some(n) = &a.perturbation {
                resolve("action.perturbation".into(), n)?;
            }
        }
        if let Some(r) = &self.relax {
            if let Some(s) = r.step {
                positive("relax.step", s)?;
            }
            positive("relax.target", r.target)?;
            if let Some(c) = &r.catenoid {
                positive("relax.catenoid.half_height", c.half_height)?;
                positive("relax.catenoid.radius", c.radius)?;
            }
        }
        if let Some(c) = &self.current {
            for (i, n) in c.pair.iter().enumerate() {
                resolve(format!("current.pair[{i}]"), n)?;
            }
        }
        if let Some(s) = &self.sympform {
            for (i, n) in s.pair.iter().enumerate() {
                resolve(format!("sympform.pair[{i}]"), n)?;
            }
            if s.slice_axis >= grid.dim() {
                return Err(invalid("sympform.slice_axis", format!("grid has {} axes", grid.dim())));
            }
        }
        if let Some(c) = &self.convergence {
            if c.ladder.len() < 3 {
                return Err(invalid("convergence.ladder", format!("needs at least 3 levels, got {}", c.ladder.len())));
            }
            if c.ladder.iter().any(|&k| k == 0) || c.ladder.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("convergence.ladder", "scales must be positive and strictly increasing"));
            }
            if !(c.floor >= 0.0) {
                return Err(invalid("convergence.floor", "must be non-negative"));
            }
            if let Quantity::CurrentDivergence { pair, .. } = &c.quantity {
                for (i, n) in pair.iter().enumerate() {
                    resolve(format!("convergence.quantity.pair[{i}]"), n)?;
                    let p = self.perturbations.iter().find(|p| &p.name == n).expect("resolved");
                    if p.csv.is_some() {
                        return Err(invalid(format!("convergence.quantity.pair[{i}]"), "ladders need analytic perturbations"));
                    }
                }
            }
            if matches!(self.embedding, EmbeddingConfig::Csv { .. }) {
                return Err(invalid("embedding", "ladders need an analytic embedding"));
            }
        }
        Ok(())
    }

    pub fn background_model(&self) -> Result<BackgroundModel, CliError> {
        let (kind, dim, kappa, sig, path) = match &self.background {
            BackgroundConfig::Flat { dim, signature } => (BackgroundKind::Flat, *dim, 0.0, signature, "background"),
            BackgroundConfig::ConstantCurvature { dim, kappa, signature } => {
                if !kappa.is_finite() {
                    return Err(invalid("background.kappa", "must be finite"));
                }
                (BackgroundKind::ConstantCurvature, *dim, *kappa, signature, "background")
            }
        };
        if dim == 0 {
            return Err(invalid("background.dim", "must be at least 1"));
        }
        let signature = sig.clone().unwrap_or_else(|| vec![1.0; dim]);
        if signature.len() != dim {
            return Err(invalid("background.signature", format!("needs {dim} entries, got {}", signature.len())));
        }
        BackgroundModel::new(kind, signature, kappa).map_err(|e| invalid(path, e.to_string()))
    }

    /// Grid with every axis refined by `scale`.
    pub fn grid_spec(&self, scale: usize) -> Result<GridSpec, CliError> {
        if self.grid.axes.is_empty() {
            return Err(invalid("grid.axes", "needs at least one axis"));
        }
        let mut axes = Vec::new();
        for (i, a) in self.grid.axes.iter().enumerate() {
            let path = format!("grid.axes[{i}]");
            let axis = match *a {
                AxisConfig::Open { start, end, n } => {
                    if !(end > start) || !start.is_finite() || !end.is_finite() {
                        return Err(invalid(path, format!("spacing must be positive: end {end} must exceed start {start}")));
                    }
                    if n < 5 {
                        return Err(invalid(format!("{path}.n"), format!("open axes need at least 5 nodes, got {n}")));
                    }
                    Axis::open(start, end, scale * (n - 1) + 1)
                }
                AxisConfig::Periodic { start, period, n } => {
                    if !(period > 0.0) || !period.is_finite() || !start.is_finite() {
                        return Err(invalid(format!("{path}.period"), format!("spacing must be positive: period {period}")));
                    }
                    if n < 4 {
                        return Err(invalid(format!("{path}.n"), format!("periodic axes need at least 4 nodes, got {n}")));
                    }
                    Axis::periodic(start, period, scale * n)
                }
                AxisConfig::Pole { n, partner } => {
                    if n < 4 {
                        return Err(invalid(format!("{path}.n"), format!("pole axes need at least 4 nodes, got {n}")));
                    }
                    Axis::pole(scale * n, partner)
                }
            };
            axes.push(axis);
        }
        GridSpec::new(axes).map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn parametrization(&self) -> Option<Parametrization> {
        Some(match &self.embedding {
            EmbeddingConfig::Plane { dim, ambient } => Parametrization::Plane { dim: *dim, ambient: *ambient },
            EmbeddingConfig::Sphere { radius } => Parametrization::Sphere { radius: *radius },
            EmbeddingConfig::Cylinder { radius } => Parametrization::Cylinder { radius: *radius },
            EmbeddingConfig::Catenoid { waist } => Parametrization::Catenoid { waist: *waist },
            EmbeddingConfig::Torus { major, minor } => Parametrization::Torus { major: *major, minor: *minor },
            EmbeddingConfig::Circle { center, radius } => Parametrization::Circle { center: center.clone(), radius: *radius },
            EmbeddingConfig::Helix { radius, pitch } => Parametrization::Helix { radius: *radius, pitch: *pitch },
            EmbeddingConfig::BentSegment { amplitude, ambient } => {
                Parametrization::BentSegment { amplitude: *amplitude, ambient: *ambient }
            }
            EmbeddingConfig::Disk { radius, bulge } => Parametrization::Disk { radius: *radius, bulge: *bulge },
            EmbeddingConfig::Csv { .. } => return None,
        })
    }

    fn embedding_validate(&self, grid: &GridSpec) -> Result<(), CliError> {
        let bg_dim = match &self.background {
            BackgroundConfig::Flat { dim, .. } | BackgroundConfig::ConstantCurvature { dim, .. } => *dim,
        };
        match &self.embedding {
            EmbeddingConfig::Sphere { radius } | EmbeddingConfig::Cylinder { radius } => positive("embedding.radius", *radius)?,
            EmbeddingConfig::Catenoid { waist } => positive("embedding.waist", *waist)?,
            EmbeddingConfig::Torus { major, minor } => {
                positive("embedding.minor", *minor)?;
                if !(major > minor) {
                    return Err(invalid("embedding.major", format!("must exceed minor radius {minor}, got {major}")));
                }
            }
            EmbeddingConfig::Circle { radius, .. } | EmbeddingConfig::Helix { radius, .. } | EmbeddingConfig::Disk { radius, .. } => {
                positive("embedding.radius", *radius)?
            }
            EmbeddingConfig::Plane { dim, ambient } if dim >= ambient => {
                return Err(invalid("embedding.dim", format!("must be below the ambient dimension {ambient}")));
            }
            _ => {}
        }
        if let Some(p) = self.parametrization() {
            if p.ambient_dim() != bg_dim {
                return Err(invalid("embedding", format!("lives in {} dimensions, background has {bg_dim}", p.ambient_dim())));
            }
            if p.worldvolume_dim() != grid.dim() {
                return Err(invalid("grid.axes", format!("embedding needs {} axes, got {}", p.worldvolume_dim(), grid.dim())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(axes: &str, background: &str) -> String {
        format!(r#"{{ "background": {background}, "grid": {{ "axes": [{axes}] }}, "embedding": {{ "kind": "sphere", "radius": 1.0 }} }}"#)
    }

    #[test]
    fn scaling_keeps_open_end_points() {
        let cfg = parse_config(&base(
            r#"{ "kind": "open", "start": 0.5, "end": 2.5, "n": 9 }, { "kind": "periodic", "n": 16 }"#,
            r#"{ "kind": "flat", "dim": 3 }"#,
        ))
        .unwrap();
        let g = cfg.grid_spec(3).unwrap();
        let (u, v) = (&g.axes()[0], &g.axes()[1]);
        assert_eq!((u.n, v.n), (25, 48));
        assert_eq!(u.coord(0), 0.5);
        assert!((u.coord(24) - 2.5).abs() < 1e-14);
        assert!((v.h - 2.0 * std::f64::consts::PI / 48.0).abs() < 1e-15);
    }

    #[test]
    fn background_signature_and_kappa() {
        let axes = r#"{ "kind": "pole", "n": 8, "partner": 1 }, { "kind": "periodic", "n": 16 }"#;
        let cfg = parse_config(&base(axes, r#"{ "kind": "constant_curvature", "dim": 3, "kappa": -0.5 }"#)).unwrap();
        let bg = cfg.background_model().unwrap();
        assert_eq!((bg.kappa(), bg.signature()), (-0.5, &[1.0, 1.0, 1.0][..]));
        let err = parse_config(&base(axes, r#"{ "kind": "flat", "dim": 3, "signature": [1, 1] }"#)).unwrap_err();
        assert!(err.to_string().starts_with("background.signature"), "{err}");
    }

    #[test]
    fn too_few_nodes_is_rejected() {
        let err = parse_config(&base(r#"{ "kind": "open", "start": 0, "end": 1, "n": 3 }, { "kind": "periodic", "n": 16 }"#, r#"{ "kind": "flat", "dim": 3 }"#))
            .unwrap_err();
        assert!(err.to_string().starts_with("grid.axes[0].n"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn task_names_round_trip() {
        for t in [TaskKind::Geometry, TaskKind::Action, TaskKind::Relax, TaskKind::Jacobi, TaskKind::Current, TaskKind::Sympform, TaskKind::Convergence] {
            let parsed: TaskKind = serde_json::from_str(&format!("\"{}\"", t.name())).unwrap();
            assert_eq!(parsed, t);
        }
    }
}
