//! Worldvolume parameter grids, sampled fields and second-order
//! finite-difference calculus.
//!
//! Nodes are stored node-major (axis 0 slowest). Every field carries a list
//! of index slots so that derivatives across a polar axis can apply the
//! correct reflection parity to worldvolume-indexed components.

use crate::error::{BraneError, Result};
use std::f64::consts::PI;

/// How an axis behaves past its first and last node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Boundary {
    /// One-sided second-order stencils at the ends.
    Open,
    /// Wraps around; `n * h` is the period.
    Periodic,
    /// Polar angle θ on `(0, π)` with nodes at `(k + ½) h`. Stepping past an
    /// end lands on the mirrored ring shifted half a turn along `partner`,
    /// which must be periodic with an even node count.
    Pole { partner: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub n: usize,
    pub h: f64,
    pub start: f64,
    pub boundary: Boundary,
}

impl Axis {
    /// `n` nodes spanning `[start, end]` inclusive.
    pub fn open(start: f64, end: f64, n: usize) -> Self {
        let h = (end - start) / (n.max(2) - 1) as f64;
        Self { n, h, start, boundary: Boundary::Open }
    }

    /// `n` nodes covering one period starting at `start`.
    pub fn periodic(start: f64, period: f64, n: usize) -> Self {
        Self { n, h: period / n as f64, start, boundary: Boundary::Periodic }
    }

    /// Polar axis over `(0, π)` paired with the periodic axis `partner`.
    pub fn pole(n: usize, partner: usize) -> Self {
        let h = PI / n as f64;
        Self { n, h, start: 0.5 * h, boundary: Boundary::Pole { partner } }
    }

    pub fn coord(&self, k: usize) -> f64 {
        self.start + k as f64 * self.h
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.boundary, Boundary::Periodic)
    }

    /// Same coordinate range with `k` times as many intervals.
    pub fn refined(&self, k: usize) -> Self {
        match self.boundary {
            Boundary::Open => {
                let end = self.start + (self.n - 1) as f64 * self.h;
                Axis::open(self.start, end, (self.n - 1) * k + 1)
            }
            Boundary::Periodic => Axis::periodic(self.start, self.n as f64 * self.h, self.n * k),
            Boundary::Pole { partner } => Axis::pole(self.n * k, partner),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

impl GridSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(BraneError::Grid("grid needs at least one axis".into()));
        }
        for (a, ax) in axes.iter().enumerate() {
            if !(ax.h > 0.0) || !ax.h.is_finite() {
                return Err(BraneError::Grid(format!("axis {a}: spacing must be positive, got {}", ax.h)));
            }
            if !ax.start.is_finite() {
                return Err(BraneError::Grid(format!("axis {a}: non-finite start")));
            }
            match ax.boundary {
                Boundary::Open if ax.n < 5 => {
                    return Err(BraneError::Grid(format!(
                        "axis {a}: open axes need at least 5 nodes, got {}",
                        ax.n
                    )))
                }
                Boundary::Periodic if ax.n < 3 => {
                    return Err(BraneError::Grid(format!("axis {a}: periodic axes need at least 3 nodes")))
                }
                Boundary::Pole { partner } => {
                    if ax.n < 2 {
                        return Err(BraneError::Grid(format!("axis {a}: pole axis needs at least 2 nodes")));
                    }
                    let ok = axes
                        .get(partner)
                        .map(|p| partner != a && p.is_periodic() && p.n % 2 == 0)
                        .unwrap_or(false);
                    if !ok {
                        return Err(BraneError::Grid(format!(
                            "axis {a}: pole partner {partner} must be a distinct periodic axis with an even node count"
                        )));
                    }
                }
                _ => {}
            }
        }
        let mut strides = vec![1; axes.len()];
        for a in (0..axes.len() - 1).rev() {
            strides[a] = strides[a + 1] * axes[a + 1].n;
        }
        let len = strides[0] * axes[0].n;
        Ok(Self { axes, strides, len })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, a: usize) -> Result<&Axis> {
        self.axes.get(a).ok_or(BraneError::AxisOutOfRange { axis: a, dim: self.dim() })
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    pub fn component(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.axes[axis].n
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.component(node, a)).collect()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.axes[a].coord(self.component(node, a))).collect()
    }

    /// Grid with every axis refined `k`-fold over the same coordinate range.
    pub fn refined(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(BraneError::Grid("refinement factor must be positive".into()));
        }
        GridSpec::new(self.axes.iter().map(|a| a.refined(k)).collect())
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.axes.iter().map(|a| a.h).fold(0.0, f64::max)
    }

    /// Node count to the nearest open boundary (`usize::MAX` if none).
    pub fn boundary_distance(&self, node: usize) -> usize {
        let mut d = usize::MAX;
        for (a, ax) in self.axes.iter().enumerate() {
            if ax.boundary == Boundary::Open {
                let k = self.component(node, a);
                d = d.min(k).min(ax.n - 1 - k);
            }
        }
        d
    }

    /// Neighbor `offset` steps along `axis`. Returns the node and whether the
    /// step crossed a pole (so odd components flip sign).
    pub fn neighbor(&self, node: usize, axis: usize, offset: isize) -> Option<(usize, bool)> {
        let ax = &self.axes[axis];
        let k = self.component(node, axis) as isize;
        let n = ax.n as isize;
        let t = k + offset;
        let base = node - (k as usize) * self.strides[axis];
        match ax.boundary {
            Boundary::Open => {
                if t < 0 || t >= n {
                    None
                } else {
                    Some((base + t as usize * self.strides[axis], false))
                }
            }
            Boundary::Periodic => {
                let t = t.rem_euclid(n) as usize;
                Some((base + t * self.strides[axis], false))
            }
            Boundary::Pole { partner } => {
                let (t, reflected) = if t < 0 {
                    (-t - 1, true)
                } else if t >= n {
                    (2 * n - 1 - t, true)
                } else {
                    (t, false)
                };
                if t < 0 || t >= n {
                    return None;
                }
                let mut idx = base + t as usize * self.strides[axis];
                if reflected {
                    let pn = self.axes[partner].n;
                    let kp = self.component(idx, partner);
                    let shifted = (kp + pn / 2) % pn;
                    idx = idx - kp * self.strides[partner] + shifted * self.strides[partner];
                }
                Some((idx, reflected))
            }
        }
    }

    /// Tensor-product trapezoid weights (uniform on periodic and polar axes).
    pub fn quadrature_weights(&self) -> Vec<f64> {
        (0..self.len)
            .map(|node| {
                let mut w = 1.0;
                for (a, ax) in self.axes.iter().enumerate() {
                    let k = self.component(node, a);
                    let end = ax.boundary == Boundary::Open && (k == 0 || k == ax.n - 1);
                    w *= if end { 0.5 * ax.h } else { ax.h };
                }
                w
            })
            .collect()
    }
}

/// Kind of an extra index carried by a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexKind {
    /// Worldvolume index `a`.
    World,
    /// Normal-frame index `i`.
    Normal,
    /// Ambient chart index `μ`.
    Ambient,
}

/// Values sampled on every node, with `slots` describing the per-node tensor
/// layout (row-major over slots).
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    slots: Vec<(IndexKind, usize)>,
    ncomp: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(nodes: usize, slots: &[(IndexKind, usize)]) -> Self {
        let ncomp = slots.iter().map(|s| s.1).product();
        Self { slots: slots.to_vec(), ncomp, data: vec![0.0; nodes * ncomp] }
    }

    pub fn scalar(values: Vec<f64>) -> Self {
        Self { slots: Vec::new(), ncomp: 1, data: values }
    }

    pub fn from_data(slots: &[(IndexKind, usize)], data: Vec<f64>) -> Result<Self> {
        let ncomp: usize = slots.iter().map(|s| s.1).product();
        if ncomp == 0 || data.len() % ncomp != 0 {
            return Err(BraneError::Shape(format!(
                "{} values do not divide into {ncomp} components",
                data.len()
            )));
        }
        Ok(Self { slots: slots.to_vec(), ncomp, data })
    }

    pub fn from_fn(grid: &GridSpec, slots: &[(IndexKind, usize)], mut f: impl FnMut(usize, &mut [f64])) -> Self {
        let mut out = Self::zeros(grid.len(), slots);
        let nc = out.ncomp;
        for (node, chunk) in out.data.chunks_mut(nc).enumerate() {
            f(node, chunk);
        }
        out
    }

    pub fn slots(&self) -> &[(IndexKind, usize)] {
        &self.slots
    }

    pub fn ncomp(&self) -> usize {
        self.ncomp
    }

    pub fn nodes(&self) -> usize {
        self.data.len() / self.ncomp
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn at(&self, node: usize) -> &[f64] {
        &self.data[node * self.ncomp..(node + 1) * self.ncomp]
    }

    pub fn at_mut(&mut self, node: usize) -> &mut [f64] {
        &mut self.data[node * self.ncomp..(node + 1) * self.ncomp]
    }

    pub fn is_scalar(&self) -> bool {
        self.ncomp == 1 && self.slots.iter().all(|s| s.1 == 1)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Componentwise `self + s * other`.
    pub fn axpy(&self, s: f64, other: &Field) -> Result<Field> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Field {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn check_same_shape(&self, other: &Field) -> Result<()> {
        if self.slots != other.slots || self.data.len() != other.data.len() {
            return Err(BraneError::Shape(format!(
                "field shapes differ: {:?}x{} vs {:?}x{}",
                self.slots,
                self.nodes(),
                other.slots,
                other.nodes()
            )));
        }
        Ok(())
    }

    /// Sign each component picks up under reflection through a pole of `axis`:
    /// −1 per worldvolume index equal to `axis`.
    pub fn reflection_parity(&self, axis: usize) -> Vec<f64> {
        let mut parity = vec![1.0; self.ncomp];
        for (c, p) in parity.iter_mut().enumerate() {
            let mut rem = c;
            for &(kind, dim) in self.slots.iter().rev() {
                let idx = rem % dim;
                rem /= dim;
                if kind == IndexKind::World && idx == axis {
                    *p = -*p;
                }
            }
        }
        parity
    }
}

/// Second-order partial derivative of every component along `axis`.
///
/// Interior and periodic/polar nodes use the centered stencil. Open ends use
/// a four-point one-sided stencil whose leading error `h² f‴/6` matches the
/// centered one, so a second derivative taken by composition stays second
/// order up to the boundary.
pub fn partial_derivative(grid: &GridSpec, f: &Field, axis: usize) -> Result<Field> {
    signed_partial(grid, f, axis, 1.0)
}

/// Like [`partial_derivative`] for a density: `√|γ|` changes sign under the
/// continuation through a pole, on top of the tensor parity.
pub fn partial_derivative_density(grid: &GridSpec, f: &Field, axis: usize) -> Result<Field> {
    signed_partial(grid, f, axis, -1.0)
}

fn signed_partial(grid: &GridSpec, f: &Field, axis: usize, pole_sign: f64) -> Result<Field> {
    let ax = grid.axis(axis)?.clone();
    if f.nodes() != grid.len() {
        return Err(BraneError::Shape(format!("field has {} nodes, grid has {}", f.nodes(), grid.len())));
    }
    let parity: Vec<f64> = f.reflection_parity(axis).into_iter().map(|p| p * pole_sign).collect();
    let nc = f.ncomp;
    let mut out = Field { slots: f.slots.clone(), ncomp: nc, data: vec![0.0; f.data.len()] };
    let inv2h = 0.5 / ax.h;
    for node in 0..grid.len() {
        let dst = &mut out.data[node * nc..(node + 1) * nc];
        match (grid.neighbor(node, axis, -1), grid.neighbor(node, axis, 1)) {
            (Some((m, rm)), Some((p, rp))) => {
                for c in 0..nc {
                    let fm = if rm { parity[c] } else { 1.0 } * f.data[m * nc + c];
                    let fp = if rp { parity[c] } else { 1.0 } * f.data[p * nc + c];
                    dst[c] = (fp - fm) * inv2h;
                }
            }
            (None, Some((p1, _))) => {
                let (p2, _) = grid.neighbor(node, axis, 2).expect("open axis has at least 5 nodes");
                let (p3, _) = grid.neighbor(node, axis, 3).expect("open axis has at least 5 nodes");
                for c in 0..nc {
                    let v = |k: usize| f.data[k * nc + c];
                    dst[c] = (-4.0 * v(node) + 7.0 * v(p1) - 4.0 * v(p2) + v(p3)) * inv2h;
                }
            }
            (Some((m1, _)), None) => {
                let (m2, _) = grid.neighbor(node, axis, -2).expect("open axis has at least 5 nodes");
                let (m3, _) = grid.neighbor(node, axis, -3).expect("open axis has at least 5 nodes");
                for c in 0..nc {
                    let v = |k: usize| f.data[k * nc + c];
                    dst[c] = (4.0 * v(node) - 7.0 * v(m1) + 4.0 * v(m2) - v(m3)) * inv2h;
                }
            }
            (None, None) => unreachable!("axis with fewer than two nodes"),
        }
    }
    Ok(out)
}

/// Derivatives along every axis, stacked as a new leading worldvolume slot.
pub fn gradient(grid: &GridSpec, f: &Field) -> Result<Field> {
    let d = grid.dim();
    let mut slots = vec![(IndexKind::World, d)];
    slots.extend_from_slice(&f.slots);
    let mut out = Field::zeros(grid.len(), &slots);
    let nc = f.ncomp;
    for a in 0..d {
        let da = partial_derivative(grid, f, a)?;
        for node in 0..grid.len() {
            out.at_mut(node)[a * nc..(a + 1) * nc].copy_from_slice(da.at(node));
        }
    }
    Ok(out)
}

/// Coordinate divergence `∂_a v^a` of a field whose leading slot is worldvolume.
pub fn divergence(grid: &GridSpec, v: &Field) -> Result<Field> {
    divergence_with(grid, v, partial_derivative)
}

/// `∂_a 𝒱^a` of a vector density such as `√|γ| v^a`.
pub fn density_divergence(grid: &GridSpec, v: &Field) -> Result<Field> {
    divergence_with(grid, v, partial_derivative_density)
}

fn divergence_with(
    grid: &GridSpec,
    v: &Field,
    deriv: fn(&GridSpec, &Field, usize) -> Result<Field>,
) -> Result<Field> {
    let d = grid.dim();
    match v.slots.first() {
        Some(&(IndexKind::World, n)) if n == d => {}
        _ => return Err(BraneError::IndexKind("divergence needs a leading worldvolume slot".into())),
    }
    let inner = v.ncomp / d;
    let mut out = Field::zeros(grid.len(), &v.slots[1..]);
    for a in 0..d {
        let da = deriv(grid, v, a)?;
        for node in 0..grid.len() {
            let src = &da.at(node)[a * inner..(a + 1) * inner];
            for (o, s) in out.at_mut(node).iter_mut().zip(src) {
                *o += s;
            }
        }
    }
    Ok(out)
}

/// Pairwise summation in a fixed order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// `∫ f · weight d^Dξ` with the tensor-product trapezoid rule.
pub fn integrate_scalar(grid: &GridSpec, f: &Field, weight: &Field) -> Result<f64> {
    if !f.is_scalar() || !weight.is_scalar() {
        return Err(BraneError::Shape("integrate_scalar takes scalar fields".into()));
    }
    if f.nodes() != grid.len() || weight.nodes() != grid.len() {
        return Err(BraneError::Shape(format!(
            "integrand has {} nodes, weight {}, grid {}",
            f.nodes(),
            weight.nodes(),
            grid.len()
        )));
    }
    let q = grid.quadrature_weights();
    let terms: Vec<f64> = (0..grid.len()).map(|k| q[k] * f.data[k] * weight.data[k]).collect();
    Ok(pairwise_sum(&terms))
}

/// CSV text: ξ-coordinates, then one column per component.
pub fn field_csv(grid: &GridSpec, fields: &[(&str, &Field)]) -> String {
    let mut out = String::new();
    let mut header: Vec<String> = (0..grid.dim()).map(|a| format!("xi{a}")).collect();
    for (name, f) in fields {
        if f.ncomp == 1 {
            header.push((*name).to_string());
        } else {
            header.extend((0..f.ncomp).map(|c| format!("{name}_{c}")));
        }
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for node in 0..grid.len() {
        let mut row: Vec<String> = grid.coords(node).iter().map(|v| format!("{v:.12e}")).collect();
        for (_, f) in fields {
            row.extend(f.at(node).iter().map(|v| format!("{v:.12e}")));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
