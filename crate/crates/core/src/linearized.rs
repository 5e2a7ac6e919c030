//! Linearized operators about a worldvolume: the mass matrix, the Jacobi
//! operator `P = Δ̃ + Q − A`, its square written out term by term, and sparse
//! assembled versions for adjointness and spectral checks.

use crate::error::{BraneError, Result};
use crate::geometry::GeometryCache;
use crate::grid::{Field, IndexKind};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use std::collections::HashSet;

const NRM: IndexKind = IndexKind::Normal;

/// Default ceiling on assembled degrees of freedom.
pub const DOF_BUDGET: usize = 10_000;

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

/// `M^i_j = −K_ab^i K^{ab}_j + A^i_j`.
pub fn mass_matrix(geom: &GeometryCache) -> Field {
    geom.mass()
}

/// Node-wise `(L φ)^i = L^i_j φ^j` for a `[Normal, Normal]` field `L`.
fn mat_vec(l: &Field, phi: &Field, m: usize) -> Field {
    let mut out = phi.clone();
    for k in 0..phi.nodes() {
        let (a, p) = (l.at(k), phi.at(k));
        let o = out.at_mut(k);
        for i in 0..m {
            o[i] = (0..m).map(|j| a[i * m + j] * p[j]).sum();
        }
    }
    out
}

/// Node-wise product of two `[Normal, Normal]` fields.
fn mat_mat(a: &Field, b: &Field, m: usize) -> Field {
    let mut out = a.clone();
    for k in 0..a.nodes() {
        let (x, y) = (a.at(k), b.at(k));
        let o = out.at_mut(k);
        for i in 0..m {
            for j in 0..m {
                o[i * m + j] = (0..m).map(|l| x[i * m + l] * y[l * m + j]).sum();
            }
        }
    }
    out
}

/// `(∇̃^c L^i_j)(∇̃_c φ^j)`.
fn grad_contract(geom: &GeometryCache, l: &Field, phi: &Field) -> Result<Field> {
    let (d, m) = (geom.dim(), geom.codim());
    let gl = geom.raise_world(&geom.cov_grad(l)?, 0)?;
    let gp = geom.cov_grad(phi)?;
    Ok(Field::from_fn(&geom.grid, &[(NRM, m)], |k, o| {
        let (a, b) = (gl.at(k), gp.at(k));
        for i in 0..m {
            o[i] = (0..d)
                .map(|c| (0..m).map(|j| a[(c * m + i) * m + j] * b[c * m + j]).sum::<f64>())
                .sum();
        }
    }))
}

fn sum_fields(terms: &[(f64, &Field)]) -> Field {
    let mut out = terms[0].1.scaled(terms[0].0);
    for (s, f) in &terms[1..] {
        out = out.axpy(*s, f).expect("same shape");
    }
    out
}

/// `P φ = Δ̃φ + Q φ − A φ`.
pub fn jacobi_apply(geom: &GeometryCache, phi: &Field) -> Result<Field> {
    check_normal(geom, phi)?;
    let m = geom.codim();
    let lap = geom.laplacian(phi)?;
    let q = mat_vec(&geom.q, phi, m);
    let a = mat_vec(&geom.riem_a, phi, m);
    Ok(sum_fields(&[(1.0, &lap), (1.0, &q), (-1.0, &a)]))
}

/// `P²φ` written out as
/// `Δ̃Δ̃φ + 2QΔ̃φ + 2∇̃Q·∇̃φ + (Δ̃Q)φ + QQφ − 2AΔ̃φ − (Δ̃A)φ − AQφ − QAφ − 2∇̃A·∇̃φ + AAφ`.
pub fn p_squared_expanded(geom: &GeometryCache, phi: &Field) -> Result<Field> {
    check_normal(geom, phi)?;
    let m = geom.codim();
    let (q, a) = (&geom.q, &geom.riem_a);
    let lap = geom.laplacian(phi)?;
    let laplap = geom.laplacian(&lap)?;
    let q_lap = mat_vec(q, &lap, m);
    let gq = grad_contract(geom, q, phi)?;
    let lapq = mat_vec(&geom.laplacian(q)?, phi, m);
    let qq = mat_vec(&mat_mat(q, q, m), phi, m);
    let a_lap = mat_vec(a, &lap, m);
    let lapa = mat_vec(&geom.laplacian(a)?, phi, m);
    let aq = mat_vec(&mat_mat(a, q, m), phi, m);
    let qa = mat_vec(&mat_mat(q, a, m), phi, m);
    let ga = grad_contract(geom, a, phi)?;
    let aa = mat_vec(&mat_mat(a, a, m), phi, m);
    Ok(sum_fields(&[
        (1.0, &laplap),
        (2.0, &q_lap),
        (2.0, &gq),
        (1.0, &lapq),
        (1.0, &qq),
        (-2.0, &a_lap),
        (-1.0, &lapa),
        (-1.0, &aq),
        (-1.0, &qa),
        (-2.0, &ga),
        (1.0, &aa),
    ]))
}

/// Same operator through the mass matrix:
/// `Δ̃Δ̃φ − 2MΔ̃φ − 2∇̃M·∇̃φ − (Δ̃M)φ + MMφ`.
pub fn p_squared_mass_form(geom: &GeometryCache, phi: &Field) -> Result<Field> {
    check_normal(geom, phi)?;
    let m = geom.codim();
    let mm = geom.mass();
    let lap = geom.laplacian(phi)?;
    let laplap = geom.laplacian(&lap)?;
    let m_lap = mat_vec(&mm, &lap, m);
    let gm = grad_contract(geom, &mm, phi)?;
    let lapm = mat_vec(&geom.laplacian(&mm)?, phi, m);
    let m2 = mat_vec(&mat_mat(&mm, &mm, m), phi, m);
    Ok(sum_fields(&[(1.0, &laplap), (-2.0, &m_lap), (-2.0, &gm), (-1.0, &lapm), (1.0, &m2)]))
}

/// `P(Pφ)`.
pub fn p_squared_composed(geom: &GeometryCache, phi: &Field) -> Result<Field> {
    jacobi_apply(geom, &jacobi_apply(geom, phi)?)
}

/// Measure-weighted inner product `∫ √|γ| u_i v^i`.
pub fn inner_product(geom: &GeometryCache, u: &Field, v: &Field) -> Result<f64> {
    u.check_same_shape(v)?;
    let f = Field::scalar((0..u.nodes()).map(|k| u.at(k).iter().zip(v.at(k)).map(|(a, b)| a * b).sum()).collect());
    geom.integrate(&f)
}

/// `‖Pφ‖` in the measure-weighted L² norm.
pub fn dng_jacobi_residual(geom: &GeometryCache, phi: &Field) -> Result<f64> {
    let p = jacobi_apply(geom, phi)?;
    Ok(inner_product(geom, &p, &p)?.max(0.0).sqrt())
}

/// Which operator to assemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpKind {
    Jacobi,
    PSquaredExpanded,
    PSquaredComposed,
}

impl OpKind {
    pub fn apply(self, geom: &GeometryCache, phi: &Field) -> Result<Field> {
        match self {
            OpKind::Jacobi => jacobi_apply(geom, phi),
            OpKind::PSquaredExpanded => p_squared_expanded(geom, phi),
            OpKind::PSquaredComposed => p_squared_composed(geom, phi),
        }
    }

    /// Grid steps that bound the operator's stencil along each axis
    /// (two per derivative, covering one-sided end stencils).
    fn reach(self) -> usize {
        match self {
            OpKind::Jacobi => 4,
            _ => 8,
        }
    }
}

/// Sparse operator over `(node, normal index)` degrees of freedom, `dof = node·m + i`.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub kind: OpKind,
    pub codim: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    /// Quadrature weight times `√|γ|` for every degree of freedom.
    pub weights: Vec<f64>,
    /// Degrees of freedom far enough from open ends that compactly supported
    /// fields there never meet a one-sided stencil.
    pub interior: Vec<bool>,
}

fn box_reach(geom: &GeometryCache, node: usize, r: usize) -> Vec<usize> {
    let mut set = vec![node];
    for axis in 0..geom.dim() {
        let mut next = HashSet::new();
        for &k in &set {
            next.insert(k);
            for off in -(r as isize)..=(r as isize) {
                if let Some((nb, _)) = geom.grid.neighbor(k, axis, off) {
                    next.insert(nb);
                }
            }
        }
        set = next.into_iter().collect();
    }
    set.sort_unstable();
    set
}

/// Greedy distance-`2r` coloring so that same-colored nodes have disjoint reach.
fn color_nodes(geom: &GeometryCache, r: usize) -> Vec<Vec<usize>> {
    let n = geom.grid.len();
    let mut color = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for node in 0..n {
        let used: HashSet<usize> =
            box_reach(geom, node, 2 * r).into_iter().map(|k| color[k]).filter(|&c| c != usize::MAX).collect();
        let c = (0..).find(|c| !used.contains(c)).unwrap();
        if c == groups.len() {
            groups.push(Vec::new());
        }
        groups[c].push(node);
        color[node] = c;
    }
    groups
}

/// Assembles `kind` column by column, probing groups of columns whose
/// stencils cannot overlap.
pub fn assemble(kind: OpKind, geom: &GeometryCache, budget: usize) -> Result<DiscreteOperator> {
    let m = geom.codim();
    let nodes = geom.grid.len();
    let dofs = nodes * m;
    if dofs > budget {
        return Err(BraneError::Budget { dofs, budget });
    }
    let r = kind.reach();
    let groups = color_nodes(geom, r);
    let probes: Vec<(usize, usize)> = (0..groups.len()).flat_map(|c| (0..m).map(move |i| (c, i))).collect();
    // Columns as (row, value) lists, gathered per probe in parallel.
    let results: Vec<Result<Vec<(usize, usize, f64)>>> = probes
        .par_iter()
        .map(|&(c, i)| {
            let mut v = Field::zeros(nodes, &[(NRM, m)]);
            let mut owner = vec![usize::MAX; nodes];
            for &k in &groups[c] {
                v.at_mut(k)[i] = 1.0;
                for o in box_reach(geom, k, r) {
                    owner[o] = k;
                }
            }
            let y = kind.apply(geom, &v)?;
            let mut entries = Vec::new();
            for o in 0..nodes {
                for j in 0..m {
                    let val = y.at(o)[j];
                    if val != 0.0 {
                        if owner[o] == usize::MAX {
                            return Err(BraneError::Shape(format!(
                                "operator stencil reaches beyond {r} steps at node {o}"
                            )));
                        }
                        entries.push((o * m + j, owner[o] * m + i, val));
                    }
                }
            }
            Ok(entries)
        })
        .collect();
    let mut triplets = Vec::new();
    for r in results {
        triplets.extend(r?);
    }
    triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut indptr = vec![0usize; dofs + 1];
    let mut indices = Vec::with_capacity(triplets.len());
    let mut values = Vec::with_capacity(triplets.len());
    for &(row, col, val) in &triplets {
        indptr[row + 1] += 1;
        indices.push(col);
        values.push(val);
    }
    for k in 0..dofs {
        indptr[k + 1] += indptr[k];
    }
    let q = geom.grid.quadrature_weights();
    let margin = 2 * r;
    let mut weights = Vec::with_capacity(dofs);
    let mut interior = Vec::with_capacity(dofs);
    for k in 0..nodes {
        let inside = geom.grid.boundary_distance(k) >= margin;
        for _ in 0..m {
            weights.push(q[k] * geom.sqrt_g().at(k)[0]);
            interior.push(inside);
        }
    }
    Ok(DiscreteOperator { kind, codim: m, indptr, indices, values, weights, interior })
}

/// Eigenpairs of the measure-symmetrized operator, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Eigenvectors in field scaling, one per column, over the selected DOFs.
    pub vectors: DMatrix<f64>,
    pub dofs: Vec<usize>,
}

impl DiscreteOperator {
    pub fn dofs(&self) -> usize {
        self.weights.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dofs())
            .map(|r| (self.indptr[r]..self.indptr[r + 1]).map(|k| self.values[k] * x[self.indices[k]]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dofs();
        let mut a = DMatrix::zeros(n, n);
        for r in 0..n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                a[(r, self.indices[k])] = self.values[k];
            }
        }
        a
    }

    /// Row sums `Σ_c A_rc`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dofs()).map(|r| self.values[self.indptr[r]..self.indptr[r + 1]].iter().sum()).collect()
    }

    /// Largest absolute row sum `max_r Σ_c |A_rc|`.
    pub fn max_abs_row_sum(&self) -> f64 {
        (0..self.dofs())
            .map(|r| self.values[self.indptr[r]..self.indptr[r + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn selected(&self) -> Vec<usize> {
        (0..self.dofs()).filter(|&k| self.interior[k]).collect()
    }

    /// `|⟨u, A v⟩ − ⟨A u, v⟩| / (‖u‖‖v‖)` in the measure-weighted inner product.
    pub fn pair_asymmetry(&self, u: &[f64], v: &[f64]) -> f64 {
        let (au, av) = (self.apply(u), self.apply(v));
        let ip = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).zip(&self.weights).map(|((a, b), w)| a * b * w).sum() };
        (ip(u, &av) - ip(&au, v)).abs() / (ip(u, u) * ip(v, v)).sqrt()
    }

    /// `‖WA − (WA)ᵀ‖_max / ‖WA‖_max` over the interior block.
    pub fn matrix_asymmetry(&self) -> f64 {
        let sel = self.selected();
        let mut pos = vec![usize::MAX; self.dofs()];
        for (p, &k) in sel.iter().enumerate() {
            pos[k] = p;
        }
        let mut entries = std::collections::HashMap::new();
        let mut scale: f64 = 0.0;
        for &r in &sel {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                if pos[c] != usize::MAX {
                    let v = self.weights[r] * self.values[k];
                    scale = scale.max(v.abs());
                    entries.insert((r, c), v);
                }
            }
        }
        let mut worst: f64 = 0.0;
        for (&(r, c), &v) in &entries {
            let t = entries.get(&(c, r)).copied().unwrap_or(0.0);
            worst = worst.max((v - t).abs());
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// `W^{1/2} A W^{−1/2}` on the interior block.
    fn weighted_block(&self) -> (Vec<usize>, DMatrix<f64>) {
        let sel = self.selected();
        let n = sel.len();
        let mut pos = vec![usize::MAX; self.dofs()];
        for (p, &k) in sel.iter().enumerate() {
            pos[k] = p;
        }
        let mut s = DMatrix::zeros(n, n);
        for (p, &r) in sel.iter().enumerate() {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                if pos[c] != usize::MAX {
                    s[(p, pos[c])] = self.weights[r].sqrt() * self.values[k] / self.weights[c].sqrt();
                }
            }
        }
        (sel, s)
    }

    fn eigen_sorted(&self, sel: Vec<usize>, sym: DMatrix<f64>) -> Spectrum {
        let n = sel.len();
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = DMatrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            for (p, &dof) in sel.iter().enumerate() {
                vectors[(p, col)] = eig.eigenvectors[(p, k)] / self.weights[dof].sqrt();
            }
        }
        Spectrum { values, vectors, dofs: sel }
    }

    /// Spectrum of `W^{1/2} A W^{−1/2}` (symmetrized) on the interior block.
    pub fn spectrum(&self) -> Spectrum {
        let (sel, s) = self.weighted_block();
        self.eigen_sorted(sel, (&s + s.transpose()) * 0.5)
    }

    /// Weighted singular values squared, i.e. the spectrum of `SᵀS` with
    /// `S = W^{1/2} A W^{−1/2}`; does not assume `A` is self-adjoint.
    pub fn singular_spectrum(&self) -> Spectrum {
        let (sel, s) = self.weighted_block();
        self.eigen_sorted(sel, s.transpose() * &s)
    }
}

/// Kernel threshold `τ = 10 h² · max(1, max_node Σ_j |M^i_j|)`.
pub fn kernel_threshold(geom: &GeometryCache) -> f64 {
    let h = geom.grid.max_spacing();
    let m = geom.codim();
    let mass = geom.mass();
    let mut scale: f64 = 1.0;
    for k in 0..geom.grid.len() {
        for i in 0..m {
            scale = scale.max((0..m).map(|j| mass.at(k)[i * m + j].abs()).sum());
        }
    }
    10.0 * h * h * scale
}

/// Near-kernel of an assembled operator.
#[derive(Clone, Debug)]
pub struct Kernel {
    /// `(‖Av‖, v)` pairs, measure-orthonormal.
    pub vectors: Vec<(f64, Field)>,
}

impl Kernel {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }
}

/// Right singular vectors of the assembled operator with `‖Av‖ ≤ τ‖v‖` in the
/// measure-weighted norm.
pub fn kernel_vectors(geom: &GeometryCache, op: &DiscreteOperator, tau: f64) -> Kernel {
    let spec = op.singular_spectrum();
    let m = geom.codim();
    let mut vectors = Vec::new();
    for (col, &s2) in spec.values.iter().enumerate() {
        let sigma = s2.max(0.0).sqrt();
        if sigma > tau {
            continue;
        }
        let mut f = Field::zeros(geom.grid.len(), &[(NRM, m)]);
        for (p, &dof) in spec.dofs.iter().enumerate() {
            f.data_mut()[dof] = spec.vectors[(p, col)];
        }
        let norm = inner_product(geom, &f, &f).expect("same shape").sqrt();
        vectors.push((sigma, f.scaled(1.0 / norm)));
    }
    Kernel { vectors }
}

/// Flattens a normal field into the DOF vector layout.
pub fn to_dofs(phi: &Field) -> Vec<f64> {
    phi.data().to_vec()
}
