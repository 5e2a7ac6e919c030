//! Extremal surfaces by damped mean-curvature flow with fixed boundary nodes,
//! kernel solves on the assembled Jacobi operator, and refinement studies.

use crate::background::BackgroundModel;
use crate::embedding::Embedding;
use crate::error::{BraneError, Result};
use crate::geometry::GeometryCache;
use crate::grid::{Boundary, Field, GridSpec};
use crate::linearized::{assemble, inner_product, kernel_threshold, kernel_vectors, OpKind};

/// Slack allowed on the area decrease of an accepted step, relative to the area.
pub const AREA_SLACK: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct RelaxParams {
    pub step: f64,
    pub max_iterations: usize,
    /// Target on `max |K^i|` over the free nodes.
    pub target: f64,
    /// `true` for nodes held in place.
    pub fixed: Vec<bool>,
}

impl RelaxParams {
    /// Fixes every node on an open end of the grid.
    pub fn open_ends_fixed(grid: &GridSpec, step: f64, max_iterations: usize, target: f64) -> Self {
        let fixed = (0..grid.len()).map(|k| grid.boundary_distance(k) == 0).collect();
        RelaxParams { step, max_iterations, target, fixed }
    }

    /// Open ends fixed, with the step at `τ · laplacian_scale = 0.4`.
    pub fn stable(geom: &GeometryCache, max_iterations: usize, target: f64) -> Self {
        let mut p = Self::open_ends_fixed(&geom.grid, 0.0, max_iterations, target);
        p.step = stable_step(geom, &p.fixed);
        p
    }

    fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(BraneError::Parameter(format!("relaxation step must be positive, got {}", self.step)));
        }
        if !(self.target > 0.0) {
            return Err(BraneError::Parameter(format!("residual target must be positive, got {}", self.target)));
        }
        if self.fixed.len() != grid.len() {
            return Err(BraneError::Shape(format!("fixed mask has {} entries for {} nodes", self.fixed.len(), grid.len())));
        }
        let periodic = grid.axes().iter().all(|a| a.boundary != Boundary::Open);
        if !periodic && !self.fixed.iter().any(|&f| f) {
            return Err(BraneError::Parameter("open grid with no fixed nodes".into()));
        }
        Ok(())
    }
}

/// Largest eigenvalue bound of the discrete Laplacian over the free nodes,
/// `max Σ_a 4 γ^{aa} / h_a²`.
pub fn laplacian_scale(geom: &GeometryCache, fixed: &[bool]) -> f64 {
    let d = geom.dim();
    let hs: Vec<f64> = geom.grid.axes().iter().map(|a| a.h).collect();
    (0..geom.grid.len())
        .filter(|&k| !fixed[k])
        .map(|k| {
            let gi = geom.metric.gamma_inv.at(k);
            (0..d).map(|a| 4.0 * gi[a * d + a].abs() / (hs[a] * hs[a])).sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Step with `τ · laplacian_scale = 0.4`.
pub fn stable_step(geom: &GeometryCache, fixed: &[bool]) -> f64 {
    0.4 / laplacian_scale(geom, fixed)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxRecord {
    pub iteration: usize,
    pub step: f64,
    pub area: f64,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct RelaxOutcome {
    /// Final iterate, or the best one seen if the cap was reached.
    pub embedding: Embedding,
    pub history: Vec<RelaxRecord>,
    pub converged: bool,
    pub rejected_steps: usize,
    /// `τ · laplacian_scale` at the start.
    pub stability: f64,
}

impl RelaxOutcome {
    pub fn residual(&self) -> f64 {
        self.history.iter().map(|r| r.residual).fold(f64::INFINITY, f64::min)
    }

    /// Whether area never increased between accepted steps.
    pub fn area_monotone(&self) -> bool {
        self.history.windows(2).all(|w| w[1].area <= w[0].area + AREA_SLACK * w[0].area.abs())
    }
}

fn free_residual(geom: &GeometryCache, fixed: &[bool]) -> f64 {
    (0..geom.grid.len())
        .filter(|&k| !fixed[k])
        .flat_map(|k| geom.k_mean.at(k).iter().map(|v| v.abs()))
        .fold(0.0, f64::max)
}

/// Flows `X ← X − τ K^i n_i` (area-decreasing with the outward-positive
/// mean curvature), halving `τ` whenever the area would grow.
pub fn relax_dng(grid: &GridSpec, bg: &BackgroundModel, x0: &Embedding, params: &RelaxParams) -> Result<RelaxOutcome> {
    params.validate(grid)?;
    let mut geom = GeometryCache::new(grid, bg, x0)?;
    let stability = params.step * laplacian_scale(&geom, &params.fixed);
    if stability >= 0.5 {
        return Err(BraneError::Parameter(format!(
            "step {} exceeds the explicit stability bound (τ·scale = {stability:.3} ≥ 0.5)",
            params.step
        )));
    }
    let mut tau = params.step;
    let mut history = Vec::new();
    let mut rejected = 0;
    let mut area = geom.area();
    let mut best = (f64::INFINITY, x0.clone());
    for iteration in 0..=params.max_iterations {
        let residual = free_residual(&geom, &params.fixed);
        history.push(RelaxRecord { iteration, step: tau, area, residual });
        if residual < best.0 {
            best = (residual, geom.embedding.clone());
        }
        if residual <= params.target {
            return Ok(RelaxOutcome { embedding: geom.embedding, history, converged: true, rejected_steps: rejected, stability });
        }
        if iteration == params.max_iterations {
            break;
        }
        let mut dx = geom.normal_to_ambient(&geom.k_mean)?;
        for (k, &f) in params.fixed.iter().enumerate() {
            if f {
                dx.at_mut(k).fill(0.0);
            }
        }
        loop {
            let trial = geom.embedding.displaced(grid, bg, &dx, -tau).and_then(|e| GeometryCache::new(grid, bg, &e));
            match trial {
                Ok(next) if next.area() <= area + AREA_SLACK * area.abs() => {
                    area = next.area();
                    geom = next;
                    break;
                }
                Ok(_) | Err(BraneError::DegenerateMetric { .. }) | Err(BraneError::NormalFrame { .. }) => {
                    rejected += 1;
                    tau *= 0.5;
                    if tau < 1e-12 * params.step {
                        return Err(BraneError::NoConvergence { iterations: iteration, residual });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(RelaxOutcome { embedding: best.1, history, converged: false, rejected_steps: rejected, stability })
}

/// Stable-branch neck `c` of the catenoid `r = c cosh(z / c)` spanning two
/// coaxial rings of radius `radius` at `z = ±half_height`.
pub fn catenoid_neck(half_height: f64, radius: f64) -> Result<f64> {
    // c cosh(h/c) is smallest at h/c = t with t tanh t = 1.
    let t = bisect(|t| t * t.tanh() - 1.0, 0.5, 2.0);
    let c_min = half_height / t;
    let f = |c: f64| c * (half_height / c).cosh() - radius;
    if f(c_min) > 0.0 {
        return Err(BraneError::Parameter(format!(
            "rings of radius {radius} at ±{half_height} are too far apart for a catenoid"
        )));
    }
    Ok(bisect(f, c_min, radius))
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest `|r − c cosh(z/c)|` over the nodes of an axisymmetric surface
/// about the third ambient axis.
pub fn catenoid_profile_deviation(emb: &Embedding, c: f64) -> f64 {
    (0..emb.field().nodes())
        .map(|k| {
            let p = emb.point(k);
            ((p[0] * p[0] + p[1] * p[1]).sqrt() - c * (p[2] / c).cosh()).abs()
        })
        .fold(0.0, f64::max)
}

/// Near-kernel of the assembled operator, orthonormal in the measure-weighted
/// inner product. Returns `(‖Av‖, v)` pairs.
pub fn solve_jacobi_kernel(geom: &GeometryCache, kind: OpKind, budget: usize) -> Result<Vec<(f64, Field)>> {
    let op = assemble(kind, geom, budget)?;
    let kernel = kernel_vectors(geom, &op, kernel_threshold(geom));
    let mut out: Vec<(f64, Field)> = Vec::new();
    for (sigma, mut v) in kernel.vectors {
        for (_, u) in &out {
            v = v.axpy(-inner_product(geom, u, &v)?, u)?;
        }
        let norm = inner_product(geom, &v, &v)?.sqrt();
        if norm > 1e-8 {
            out.push((sigma, v.scaled(1.0 / norm)));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceFit {
    /// `(h, error)` per level, coarsest first.
    pub samples: Vec<(f64, f64)>,
    /// Least-squares slope of `log error` against `log h`.
    pub order: Option<f64>,
    /// `C` in `error ≈ C h^order`.
    pub constant: Option<f64>,
    pub monotone: bool,
    /// Every error is at or below the rounding floor.
    pub exact: bool,
}

/// Fits `error ≈ C h^p` to at least three levels. Non-monotone ladders and
/// ladders sitting on `floor` are flagged and left unfitted.
pub fn convergence_fit(samples: &[(f64, f64)], floor: f64) -> Result<ConvergenceFit> {
    if samples.len() < 3 {
        return Err(BraneError::Parameter(format!("convergence study needs at least 3 levels, got {}", samples.len())));
    }
    if samples.iter().any(|&(h, e)| !(h > 0.0) || !e.is_finite() || e < 0.0) {
        return Err(BraneError::Parameter("spacings must be positive and errors finite".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| b.0.total_cmp(&a.0));
    let exact = s.iter().all(|&(_, e)| e <= floor);
    let monotone = s.windows(2).all(|w| w[1].1 < w[0].1);
    let (order, constant) = if exact || !monotone {
        (None, None)
    } else {
        let lx: Vec<f64> = s.iter().map(|p| p.0.ln()).collect();
        let ly: Vec<f64> = s.iter().map(|p| p.1.ln()).collect();
        let n = lx.len() as f64;
        let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
        let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
        let p = num / den;
        (Some(p), Some((my - p * mx).exp()))
    };
    Ok(ConvergenceFit { samples: s, order, constant, monotone, exact })
}

/// Evaluates `level(n) -> (h, error)` over a ladder and fits the result.
pub fn convergence_study(ladder: &[usize], floor: f64, level: impl Fn(usize) -> Result<(f64, f64)>) -> Result<ConvergenceFit> {
    let samples = ladder.iter().map(|&n| level(n)).collect::<Result<Vec<_>>>()?;
    convergence_fit(&samples, floor)
}
