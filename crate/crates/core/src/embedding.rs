//! Embeddings `ξ ↦ X^μ(ξ)` sampled on a worldvolume grid, and a catalog of
//! closed-form parametrizations used by tests and the command-line driver.

use crate::background::BackgroundModel;
use crate::error::{BraneError, Result};
use crate::grid::{Field, GridSpec, IndexKind};

/// Ambient position of every node.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    x: Field,
}

impl Embedding {
    /// Wraps an ambient-vector field, checking every node against the chart domain.
    pub fn new(grid: &GridSpec, background: &BackgroundModel, x: Field) -> Result<Self> {
        let n = background.dim();
        if x.slots() != [(IndexKind::Ambient, n)] || x.nodes() != grid.len() {
            return Err(BraneError::Shape(format!(
                "embedding needs {} nodes of {n} ambient components, got {:?} x {}",
                grid.len(),
                x.slots(),
                x.nodes()
            )));
        }
        if n < grid.dim() + 1 {
            return Err(BraneError::Shape(format!(
                "ambient dimension {n} too small for a {}-dimensional worldvolume",
                grid.dim()
            )));
        }
        for node in 0..grid.len() {
            let p = x.at(node);
            if !background.in_domain(p) {
                background.conformal_factor(p)?;
            }
        }
        Ok(Self { x })
    }

    pub fn field(&self) -> &Field {
        &self.x
    }

    pub fn ambient_dim(&self) -> usize {
        self.x.ncomp()
    }

    pub fn point(&self, node: usize) -> &[f64] {
        self.x.at(node)
    }

    /// `X + s·δX` for an ambient displacement field.
    pub fn displaced(&self, grid: &GridSpec, background: &BackgroundModel, dx: &Field, s: f64) -> Result<Self> {
        Embedding::new(grid, background, self.x.axpy(s, dx)?)
    }
}

/// Node-wise evaluation of a closed-form map; no smoothing.
pub fn sample_parametrization(
    grid: &GridSpec,
    background: &BackgroundModel,
    map: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Embedding> {
    let n = background.dim();
    let mut x = Field::zeros(grid.len(), &[(IndexKind::Ambient, n)]);
    for node in 0..grid.len() {
        let p = map(&grid.coords(node));
        if p.len() != n {
            return Err(BraneError::Shape(format!(
                "parametrization returned {} coordinates, background has {n}",
                p.len()
            )));
        }
        x.at_mut(node).copy_from_slice(&p);
    }
    Embedding::new(grid, background, x)
}

/// Closed-form worldvolumes.
#[derive(Clone, Debug, PartialEq)]
pub enum Parametrization {
    /// `(ξ⁰, …, ξ^{D−1}, 0, …)` in an `ambient`-dimensional chart.
    Plane { dim: usize, ambient: usize },
    /// `(θ, φ) ↦ r (sin θ cos φ, sin θ sin φ, cos θ)`.
    Sphere { radius: f64 },
    /// `(θ, z) ↦ (r cos θ, r sin θ, z)`.
    Cylinder { radius: f64 },
    /// `(u, v) ↦ (c cosh(v/c) cos u, c cosh(v/c) sin u, v)`.
    Catenoid { waist: f64 },
    /// `(u, v) ↦ ((R + r cos v) cos u, (R + r cos v) sin u, r sin v)`.
    Torus { major: f64, minor: f64 },
    /// `s ↦ center + ρ (cos s, sin s, 0, …)`.
    Circle { center: Vec<f64>, radius: f64 },
    /// `s ↦ (a cos s, a sin s, b s)`.
    Helix { radius: f64, pitch: f64 },
    /// `s ↦ (s, A sin(π s), 0, …)`; a bent segment with fixed ends on `[0, 1]`.
    BentSegment { amplitude: f64, ambient: usize },
    /// Square `[−1,1]²` squeezed onto a disk of radius `r`, lifted by `bulge (1−u²)(1−v²)`.
    Disk { radius: f64, bulge: f64 },
}

impl Parametrization {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Parametrization::Plane { ambient, .. } => *ambient,
            Parametrization::Circle { center, .. } => center.len(),
            Parametrization::BentSegment { ambient, .. } => *ambient,
            _ => 3,
        }
    }

    pub fn worldvolume_dim(&self) -> usize {
        match self {
            Parametrization::Plane { dim, .. } => *dim,
            Parametrization::Circle { .. } | Parametrization::Helix { .. } | Parametrization::BentSegment { .. } => 1,
            _ => 2,
        }
    }

    pub fn eval(&self, xi: &[f64]) -> Vec<f64> {
        match self {
            Parametrization::Plane { dim, ambient } => {
                let mut p = vec![0.0; *ambient];
                p[..*dim].copy_from_slice(&xi[..*dim]);
                p
            }
            Parametrization::Sphere { radius } => {
                let (t, f) = (xi[0], xi[1]);
                vec![radius * t.sin() * f.cos(), radius * t.sin() * f.sin(), radius * t.cos()]
            }
            Parametrization::Cylinder { radius } => vec![radius * xi[0].cos(), radius * xi[0].sin(), xi[1]],
            Parametrization::Catenoid { waist } => {
                let rho = waist * (xi[1] / waist).cosh();
                vec![rho * xi[0].cos(), rho * xi[0].sin(), xi[1]]
            }
            Parametrization::Torus { major, minor } => {
                let rho = major + minor * xi[1].cos();
                vec![rho * xi[0].cos(), rho * xi[0].sin(), minor * xi[1].sin()]
            }
            Parametrization::Circle { center, radius } => {
                let mut p = center.clone();
                p[0] += radius * xi[0].cos();
                p[1] += radius * xi[0].sin();
                p
            }
            Parametrization::Helix { radius, pitch } => {
                vec![radius * xi[0].cos(), radius * xi[0].sin(), pitch * xi[0]]
            }
            Parametrization::BentSegment { amplitude, ambient } => {
                let mut p = vec![0.0; *ambient];
                p[0] = xi[0];
                p[1] = amplitude * (std::f64::consts::PI * xi[0]).sin();
                p
            }
            Parametrization::Disk { radius, bulge } => {
                let (u, v) = (xi[0], xi[1]);
                vec![
                    radius * u * (1.0 - 0.5 * v * v).sqrt(),
                    radius * v * (1.0 - 0.5 * u * u).sqrt(),
                    bulge * (1.0 - u * u) * (1.0 - v * v),
                ]
            }
        }
    }

    pub fn sample(&self, grid: &GridSpec, background: &BackgroundModel) -> Result<Embedding> {
        if grid.dim() != self.worldvolume_dim() {
            return Err(BraneError::Shape(format!(
                "parametrization is {}-dimensional, grid is {}-dimensional",
                self.worldvolume_dim(),
                grid.dim()
            )));
        }
        sample_parametrization(grid, background, |xi| self.eval(xi))
    }
}
