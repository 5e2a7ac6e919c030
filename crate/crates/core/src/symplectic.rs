//! Symplectic potentials and currents for the area and curvature-squared
//! theories, their divergences, and slice integrals of the resulting two-form.
//!
//! Currents are pair evaluations `j(φ1, φ2)` stored densitized, `√|γ| j^a`,
//! so conservation is the plain coordinate divergence. Every pair current is
//! built as `T(φ1, φ2) − T(φ2, φ1)` and is therefore exactly antisymmetric.

use crate::actions;
use crate::deformation::{decompose, deform_grad, deform_grad_mean_curvature, deform_mean_curvature, deform_measure, deform_metric, deform_tangential_oneform_pair};
use crate::embedding::Embedding;
use crate::error::{BraneError, Result};
use crate::geometry::GeometryCache;
use crate::grid::{density_divergence, pairwise_sum, Boundary, Field, IndexKind};

const W: IndexKind = IndexKind::World;
const NRM: IndexKind = IndexKind::Normal;

/// Which construction produced a current.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CurrentKind {
    DngPair,
    QecAdjointPair,
    QecFromPotential,
}

impl CurrentKind {
    pub fn name(self) -> &'static str {
        match self {
            CurrentKind::DngPair => "dng_pair",
            CurrentKind::QecAdjointPair => "qec_adjoint_pair",
            CurrentKind::QecFromPotential => "qec_from_potential",
        }
    }
}

/// Densitized current `√|γ| j^a`, slots `[World]`.
#[derive(Clone, Debug)]
pub struct Current {
    pub kind: CurrentKind,
    pub density: Field,
}

/// Max and L² norms of a divergence over the nodes kept by a margin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DivNorms {
    pub max: f64,
    pub l2: f64,
}

impl Current {
    /// `∂_a(√|γ| j^a)`.
    pub fn divergence(&self, geom: &GeometryCache) -> Result<Field> {
        density_divergence(&geom.grid, &self.density)
    }

    /// Norms of `∇_a j^a = (1/√|γ|) ∂_a(√|γ| j^a)` over nodes at least
    /// `margin` nodes from any open end.
    pub fn div_norms(&self, geom: &GeometryCache, margin: usize) -> Result<DivNorms> {
        let div = self.divergence(geom)?;
        let q = geom.grid.quadrature_weights();
        let (mut max, mut sq) = (0.0f64, Vec::new());
        for k in 0..geom.grid.len() {
            if geom.grid.boundary_distance(k) < margin {
                continue;
            }
            let s = geom.sqrt_g().at(k)[0];
            let v = div.at(k)[0] / s;
            max = max.max(v.abs());
            sq.push(v * v * s * q[k]);
        }
        Ok(DivNorms { max, l2: pairwise_sum(&sq).sqrt() })
    }

    pub fn max_abs(&self) -> f64 {
        self.density.max_abs()
    }
}

fn check_normal(geom: &GeometryCache, phi: &Field) -> Result<()> {
    if phi.slots() != [(NRM, geom.codim())] || phi.nodes() != geom.grid.len() {
        return Err(BraneError::Shape(format!(
            "expected a normal field with {} components on {} nodes, got {:?} on {}",
            geom.codim(),
            geom.grid.len(),
            phi.slots(),
            phi.nodes()
        )));
    }
    Ok(())
}

/// `√|γ| (T(1,2) − T(2,1))^a`, with `t(x, y, node, a)` the unsymmetrized term.
fn antisymmetrize(geom: &GeometryCache, kind: CurrentKind, t: impl Fn(usize, usize, usize, usize) -> f64) -> Current {
    let d = geom.dim();
    let density = Field::from_fn(&geom.grid, &[(W, d)], |k, o| {
        let s = geom.sqrt_g().at(k)[0];
        for (a, x) in o.iter_mut().enumerate() {
            *x = s * (t(0, 1, k, a) - t(1, 0, k, a));
        }
    });
    Current { kind, density }
}

/// Area-theory pair current `√|γ| [φ1_i ∇̃^a φ2^i − φ2_i ∇̃^a φ1^i]`, plus the
/// `K^{ab}_i(φ1^i φ2_b − φ2^i φ1_b)` term when tangential parts are given
/// (upper index).
pub fn dng_potential_pair(
    geom: &GeometryCache,
    t1: Option<&Field>,
    phi1: &Field,
    t2: Option<&Field>,
    phi2: &Field,
) -> Result<Current> {
    check_normal(geom, phi1)?;
    check_normal(geom, phi2)?;
    let zero = Field::zeros(geom.grid.len(), &[(W, geom.dim())]);
    let one_form = deform_tangential_oneform_pair(geom, t1.unwrap_or(&zero), phi1, t2.unwrap_or(&zero), phi2)?;
    let density = Field::from_fn(&geom.grid, &[(W, geom.dim())], |k, o| {
        let s = geom.sqrt_g().at(k)[0];
        for (x, v) in o.iter_mut().zip(one_form.at(k)) {
            *x = -s * v;
        }
    });
    Ok(Current { kind: CurrentKind::DngPair, density })
}

/// `Ψ^a = √|γ| [φ_i ∇̃^a K^i − K_i ∇̃^a φ^i]` with the tangential part gauged away.
pub fn qec_potential(geom: &GeometryCache, phi: &Field) -> Result<Field> {
    let zero = Field::zeros(geom.grid.len(), &[(W, geom.dim())]);
    actions::qec_potential(geom, &zero, phi, 0.5)
}

struct Derived {
    phi: Field,
    grad_up: Field,
    lap: Field,
    grad_lap_up: Field,
}

fn derived(geom: &GeometryCache, phi: &Field) -> Result<Derived> {
    let lap = geom.laplacian(phi)?;
    Ok(Derived {
        phi: phi.clone(),
        grad_up: geom.raise_world(&geom.cov_grad(phi)?, 0)?,
        grad_lap_up: geom.raise_world(&geom.cov_grad(&lap)?, 0)?,
        lap,
    })
}

/// `M` with its rounding-level asymmetry removed.
fn symmetric_mass(geom: &GeometryCache) -> Field {
    let m = geom.codim();
    let mass = geom.mass();
    Field::from_fn(&geom.grid, &[(NRM, m), (NRM, m)], |k, o| {
        let v = mass.at(k);
        for i in 0..m {
            for j in 0..m {
                o[i * m + j] = 0.5 * (v[i * m + j] + v[j * m + i]);
            }
        }
    })
}

/// Curvature-squared pair current from the adjointness of the squared
/// Jacobi operator:
/// `φ1∇̃^aΔ̃φ2 + Δ̃φ1∇̃^aφ2 − ∇̃^aφ1Δ̃φ2 − ∇̃^aΔ̃φ1φ2
///  + 2Q φ1∇̃^aφ2 − 2A φ1∇̃^aφ2 − 2Q ∇̃^aφ1 φ2 + 2A ∇̃^aφ1 φ2`.
pub fn qec_current_adjoint_pair(geom: &GeometryCache, phi1: &Field, phi2: &Field) -> Result<Current> {
    check_normal(geom, phi1)?;
    check_normal(geom, phi2)?;
    let m = geom.codim();
    let f = [derived(geom, phi1)?, derived(geom, phi2)?];
    let mass = symmetric_mass(geom);
    Ok(antisymmetrize(geom, CurrentKind::QecAdjointPair, |x, y, k, a| {
        let (fx, fy) = (&f[x], &f[y]);
        let (px, gy, lx, gly) = (fx.phi.at(k), fy.grad_up.at(k), fx.lap.at(k), fy.grad_lap_up.at(k));
        let mm = mass.at(k);
        let mut s = 0.0;
        for i in 0..m {
            s += px[i] * gly[a * m + i] + lx[i] * gy[a * m + i];
            for j in 0..m {
                s -= 2.0 * px[i] * mm[i * m + j] * gy[a * m + j];
            }
        }
        s
    }))
}

/// How the mean curvature enters the potential route.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeanCurvature {
    /// Use the computed `K^i`.
    General,
    /// Set `K^i ≡ 0`, as on an extremal surface; `K_ab^i` is kept.
    Extremal,
}

/// Pair evaluation of `δΨ^a` with `φ^a = 0`: `V(φ1; φ2) − V(φ2; φ1)` where
/// `V(x; y)` varies `Ψ^a(y)` along `x` with `y` held fixed,
/// `V = (D√γ) γ^{ab} h_b + √γ (Dγ^{ab}) h_b + √γ γ^{ab}[(D̃∇̃_b K)·y − (D̃K)·∇̃_b y − K·D̃∇̃_b y]`,
/// `h_b(y) = y·∇̃_b K − K·∇̃_b y`.
pub fn qec_current_from_potential(
    geom: &GeometryCache,
    phi1: &Field,
    phi2: &Field,
    mode: MeanCurvature,
) -> Result<Current> {
    check_normal(geom, phi1)?;
    check_normal(geom, phi2)?;
    let owned;
    let g = match mode {
        MeanCurvature::General => geom,
        MeanCurvature::Extremal => {
            let mut c = geom.clone();
            c.k_mean = Field::zeros(geom.grid.len(), &[(NRM, geom.codim())]);
            owned = c;
            &owned
        }
    };
    let (d, m) = (g.dim(), g.codim());
    let phis = [phi1, phi2];
    let grad_k = g.cov_grad(&g.k_mean)?;
    let zero = Field::zeros(g.grid.len(), &[(NRM, m)]);
    struct Var {
        measure: Field,
        metric_up: Field,
        dgk: Field,
        dk: Field,
    }
    let mut grads = Vec::new();
    let mut vars = Vec::new();
    for p in phis {
        grads.push(g.cov_grad(p)?);
        vars.push(Var {
            measure: deform_measure(g, p)?,
            metric_up: deform_metric(g, p)?.1,
            dgk: deform_grad_mean_curvature(g, p)?,
            dk: deform_mean_curvature(g, p)?,
        });
    }
    // D̃_x ∇̃_b y for the fixed one-form y.
    let dgy = [[deform_grad(g, phi1, &zero, phi1)?, deform_grad(g, phi2, &zero, phi1)?], [
        deform_grad(g, phi1, &zero, phi2)?,
        deform_grad(g, phi2, &zero, phi2)?,
    ]];
    let density = Field::from_fn(&g.grid, &[(W, d)], |k, o| {
        let s = g.sqrt_g().at(k)[0];
        let gi = g.metric.gamma_inv.at(k);
        let km = g.k_mean.at(k);
        let gk = grad_k.at(k);
        let v = |x: usize, y: usize, a: usize| -> f64 {
            let (py, gy) = (phis[y].at(k), grads[y].at(k));
            let h = |b: usize| (0..m).map(|i| py[i] * gk[b * m + i] - km[i] * gy[b * m + i]).sum::<f64>();
            let var = &vars[x];
            let (dm, mu) = (var.measure.at(k)[0], var.metric_up.at(k));
            let (dgk, dk, dg) = (var.dgk.at(k), var.dk.at(k), dgy[x][y].at(k));
            let mut out = 0.0;
            for b in 0..d {
                let hb = h(b);
                out += (dm * gi[a * d + b] + s * mu[a * d + b]) * hb;
                let mut bracket = 0.0;
                for i in 0..m {
                    bracket += dgk[b * m + i] * py[i] - dk[i] * gy[b * m + i] - km[i] * dg[b * m + i];
                }
                out += s * gi[a * d + b] * bracket;
            }
            out
        };
        for (a, x) in o.iter_mut().enumerate() {
            *x = v(0, 1, a) - v(1, 0, a);
        }
    });
    Ok(Current { kind: CurrentKind::QecFromPotential, density })
}

/// `max_k |a_k − b_k| / max_k |b_k|` over every component.
pub fn relative_difference(a: &Current, b: &Current) -> f64 {
    let scale = b.max_abs().max(a.max_abs());
    if scale == 0.0 {
        return 0.0;
    }
    a.density.data().iter().zip(b.density.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// A slice `ξ^{axis} = const` through the node layer `index`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SliceSpec {
    pub axis: usize,
    pub index: usize,
}

/// `ω` on one slice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymplecticValue {
    pub omega: f64,
    pub slice: SliceSpec,
}

/// `ω = ∫_Σ √|γ| j^{a₀} dΣ` with trapezoid weights over the remaining axes.
pub fn symplectic_form(geom: &GeometryCache, current: &Current, slice: SliceSpec) -> Result<SymplecticValue> {
    let grid = &geom.grid;
    let ax = grid.axis(slice.axis)?;
    if slice.index >= ax.n {
        return Err(BraneError::Grid(format!("slice index {} outside axis with {} nodes", slice.index, ax.n)));
    }
    let mut terms = Vec::new();
    for k in 0..grid.len() {
        if grid.component(k, slice.axis) != slice.index {
            continue;
        }
        let mut w = 1.0;
        for (b, axb) in grid.axes().iter().enumerate() {
            if b == slice.axis {
                continue;
            }
            let kb = grid.component(k, b);
            let end = axb.boundary == Boundary::Open && (kb == 0 || kb == axb.n - 1);
            w *= if end { 0.5 * axb.h } else { axb.h };
        }
        terms.push(w * current.density.at(k)[slice.axis]);
    }
    Ok(SymplecticValue { omega: pairwise_sum(&terms), slice })
}

/// `ω` on every slice along `axis` at least `margin` nodes from an open end.
pub fn omega_by_slice(geom: &GeometryCache, current: &Current, axis: usize, margin: usize) -> Result<Vec<SymplecticValue>> {
    let ax = geom.grid.axis(axis)?.clone();
    let range: Vec<usize> = match ax.boundary {
        Boundary::Open => (margin..ax.n.saturating_sub(margin)).collect(),
        _ => (0..ax.n).collect(),
    };
    range.into_iter().map(|index| symplectic_form(geom, current, SliceSpec { axis, index })).collect()
}

/// Outcome of pushing a purely tangential variation through every construction.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeReport {
    /// `max |φ^i|` of the decomposed variation.
    pub normal_residual: f64,
    /// `max |j|` over each current, divided by the partner scale.
    pub current_ratios: Vec<(CurrentKind, f64)>,
}

impl GaugeReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.normal_residual <= tol && self.current_ratios.iter().all(|(_, r)| *r <= tol)
    }
}

/// Decomposes a tangential ambient variation and evaluates all currents of its
/// normal part against `partner`. The partner scale is
/// `max √|γ| · max(|φ|, |∇̃φ|, |Δ̃φ|, |∇̃Δ̃φ|)` of the partner.
pub fn gauge_degeneracy_check(geom: &GeometryCache, dx: &Field, partner: &Field) -> Result<GaugeReport> {
    check_normal(geom, partner)?;
    let (_, phi) = decompose(geom, dx)?;
    let pd = derived(geom, partner)?;
    let field_scale = [&pd.phi, &pd.grad_up, &pd.lap, &pd.grad_lap_up].iter().map(|f| f.max_abs()).fold(0.0, f64::max);
    let scale = geom.sqrt_g().max_abs() * field_scale;
    let currents = [
        dng_potential_pair(geom, None, &phi, None, partner)?,
        qec_current_adjoint_pair(geom, &phi, partner)?,
        qec_current_from_potential(geom, &phi, partner, MeanCurvature::General)?,
    ];
    Ok(GaugeReport {
        normal_residual: phi.max_abs(),
        current_ratios: currents.iter().map(|c| (c.kind, c.max_abs() / scale)).collect(),
    })
}

/// Change of `ω` on `slice` when the potential is shifted by `δη`, where
/// `η^a` is evaluated on an embedding. The shift contributes the pair
/// `δ₁(δ₂η) − δ₂(δ₁η)`. Both variations are the fixed ambient displacements
/// `n_i φ^i` of the base geometry, so they commute, and each second variation
/// is a nested centered difference of step `eps`.
pub fn potential_shift_change(
    geom: &GeometryCache,
    eta: &dyn Fn(&GeometryCache) -> Result<Field>,
    phi1: &Field,
    phi2: &Field,
    eps: f64,
    slice: SliceSpec,
) -> Result<f64> {
    check_normal(geom, phi1)?;
    check_normal(geom, phi2)?;
    let (grid, bg) = (&geom.grid, &geom.background);
    let dx1 = geom.normal_to_ambient(phi1)?;
    let dx2 = geom.normal_to_ambient(phi2)?;
    let eval = |emb: &Embedding| -> Result<Field> { eta(&GeometryCache::new(grid, bg, emb)?) };
    // δ_y η on an embedding, by a centered difference.
    let first = |base: &Embedding, dy: &Field| -> Result<Field> {
        let plus = eval(&base.displaced(grid, bg, dy, eps)?)?;
        let minus = eval(&base.displaced(grid, bg, dy, -eps)?)?;
        Ok(plus.axpy(-1.0, &minus)?.scaled(0.5 / eps))
    };
    let second = |dx: &Field, dy: &Field| -> Result<Field> {
        let plus = first(&geom.embedding.displaced(grid, bg, dx, eps)?, dy)?;
        let minus = first(&geom.embedding.displaced(grid, bg, dx, -eps)?, dy)?;
        Ok(plus.axpy(-1.0, &minus)?.scaled(0.5 / eps))
    };
    let shift = second(&dx1, &dx2)?.axpy(-1.0, &second(&dx2, &dx1)?)?;
    let current = Current { kind: CurrentKind::QecFromPotential, density: shift };
    Ok(symplectic_form(geom, &current, slice)?.omega)
}
