//! Induced and extrinsic geometry of a sampled embedding: tangent frame,
//! induced metric, orthonormal normal frame, extrinsic curvature, normal
//! twist potential, projected background curvature, and the normal-covariant
//! calculus built on top of them.
//!
//! Worldvolume indices are stored lowered unless a name says otherwise.
//! Normal frames are orthonormal and spacelike, so normal indices are raised
//! and lowered trivially.

use crate::background::{riemann_contract, BackgroundModel};
use crate::embedding::Embedding;
use crate::error::{BraneError, Result};
use crate::grid::{density_divergence, gradient, partial_derivative, Field, GridSpec, IndexKind};
use nalgebra::DMatrix;

const W: IndexKind = IndexKind::World;
const NRM: IndexKind = IndexKind::Normal;
const AMB: IndexKind = IndexKind::Ambient;

/// Relative threshold below which the induced metric counts as degenerate.
const DEGENERATE_DET: f64 = 1e-12;
/// A Gram–Schmidt candidate shorter than this (relative) is skipped.
const CANDIDATE_EPS: f64 = 1e-6;

/// `e_a^μ = ∂_a X^μ`, slots `[World, Ambient]`.
pub fn tangent_frame(grid: &GridSpec, emb: &Embedding) -> Result<Field> {
    gradient(grid, emb.field())
}

/// Ambient metric at the embedding, induced metric, its inverse and `√|γ|`.
#[derive(Clone, Debug)]
pub struct InducedMetric {
    pub ambient: Field,
    pub gamma: Field,
    pub gamma_inv: Field,
    pub sqrt_g: Field,
}

pub fn induced_metric(grid: &GridSpec, bg: &BackgroundModel, emb: &Embedding, e: &Field) -> Result<InducedMetric> {
    let (d, n) = (grid.dim(), bg.dim());
    let mut ambient = Field::zeros(grid.len(), &[(AMB, n), (AMB, n)]);
    let mut gamma = Field::zeros(grid.len(), &[(W, d), (W, d)]);
    let mut gamma_inv = gamma.clone();
    let mut sqrt_g = Field::zeros(grid.len(), &[]);
    for node in 0..grid.len() {
        let g = bg.metric_at(emb.point(node))?;
        ambient.at_mut(node).copy_from_slice(&g);
        let ea = e.at(node);
        let gm = DMatrix::from_fn(d, d, |a, b| inner(&g, n, &ea[a * n..(a + 1) * n], &ea[b * n..(b + 1) * n]));
        let det = gm.determinant();
        let scale: f64 = (0..d).map(|a| gm[(a, a)].abs()).product();
        if !det.is_finite() || det.abs() <= DEGENERATE_DET * scale.max(f64::MIN_POSITIVE) {
            return Err(BraneError::DegenerateMetric { node, det });
        }
        let inv = gm.clone().try_inverse().ok_or(BraneError::DegenerateMetric { node, det })?;
        for a in 0..d {
            for b in 0..d {
                gamma.at_mut(node)[a * d + b] = gm[(a, b)];
                gamma_inv.at_mut(node)[a * d + b] = 0.5 * (inv[(a, b)] + inv[(b, a)]);
            }
        }
        sqrt_g.at_mut(node)[0] = det.abs().sqrt();
    }
    Ok(InducedMetric { ambient, gamma, gamma_inv, sqrt_g })
}

fn inner(g: &[f64], n: usize, u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for mu in 0..n {
        for nu in 0..n {
            s += g[mu * n + nu] * u[mu] * v[nu];
        }
    }
    s
}

fn lower(g: &[f64], n: usize, u: &[f64]) -> Vec<f64> {
    (0..n).map(|mu| (0..n).map(|nu| g[mu * n + nu] * u[nu]).sum()).collect()
}

/// Orthonormal normal frame, upper (`n^{iμ}`) and lowered (`n^i_μ`) ambient index.
#[derive(Clone, Debug)]
pub struct NormalFrame {
    pub up: Field,
    pub low: Field,
}

/// Gram–Schmidt of the ambient coordinate axes against the tangent space.
///
/// The last normal is oriented so that `(e_1, …, e_D, n^1, …, n^m)` is
/// positively oriented in the chart.
pub fn normal_frame(grid: &GridSpec, bg: &BackgroundModel, e: &Field, metric: &InducedMetric) -> Result<NormalFrame> {
    let (d, n) = (grid.dim(), bg.dim());
    let m = n - d;
    let mut up = Field::zeros(grid.len(), &[(NRM, m), (AMB, n)]);
    let mut low = up.clone();
    for node in 0..grid.len() {
        let g = metric.ambient.at(node);
        let ea = e.at(node);
        let ginv = metric.gamma_inv.at(node);
        let mut found: Vec<Vec<f64>> = Vec::with_capacity(m);
        for axis in 0..n {
            if found.len() == m {
                break;
            }
            let mut v = vec![0.0; n];
            v[axis] = 1.0;
            let len0 = g[axis * n + axis].abs().sqrt();
            let proj: Vec<f64> = (0..d).map(|b| inner(g, n, &ea[b * n..(b + 1) * n], &v)).collect();
            for a in 0..d {
                let c: f64 = (0..d).map(|b| ginv[a * d + b] * proj[b]).sum();
                for mu in 0..n {
                    v[mu] -= c * ea[a * n + mu];
                }
            }
            for u in &found {
                let c = inner(g, n, u, &v);
                for mu in 0..n {
                    v[mu] -= c * u[mu];
                }
            }
            let norm2 = inner(g, n, &v, &v);
            if norm2 <= 0.0 || norm2.sqrt() < CANDIDATE_EPS * len0 {
                continue;
            }
            let s = 1.0 / norm2.sqrt();
            v.iter_mut().for_each(|x| *x *= s);
            found.push(v);
        }
        if found.len() < m {
            return Err(BraneError::NormalFrame { node, found: found.len(), needed: m });
        }
        if m > 0 {
            let mat = DMatrix::from_fn(n, n, |mu, col| if col < d { ea[col * n + mu] } else { found[col - d][mu] });
            if mat.determinant() < 0.0 {
                found[m - 1].iter_mut().for_each(|x| *x = -*x);
            }
        }
        for (i, v) in found.iter().enumerate() {
            up.at_mut(node)[i * n..(i + 1) * n].copy_from_slice(v);
            low.at_mut(node)[i * n..(i + 1) * n].copy_from_slice(&lower(g, n, v));
        }
    }
    Ok(NormalFrame { up, low })
}

/// Normal frame from given upper components (for gauge rotations).
pub fn normal_frame_from(grid: &GridSpec, bg: &BackgroundModel, metric: &InducedMetric, up: Field) -> Result<NormalFrame> {
    let n = bg.dim();
    let m = n - grid.dim();
    if up.slots() != [(NRM, m), (AMB, n)] || up.nodes() != grid.len() {
        return Err(BraneError::Shape(format!("normal frame needs slots [Normal {m}, Ambient {n}]")));
    }
    let mut low = up.clone();
    for node in 0..grid.len() {
        let g = metric.ambient.at(node);
        for i in 0..m {
            let l = lower(g, n, &up.at(node)[i * n..(i + 1) * n]);
            low.at_mut(node)[i * n..(i + 1) * n].copy_from_slice(&l);
        }
    }
    Ok(NormalFrame { up, low })
}

/// `D_a e_b^μ = ∂_a e_b^μ + Γ^μ_{νρ} e_a^ν e_b^ρ`, slots `[World, World, Ambient]`.
pub fn frame_covariant_derivative(grid: &GridSpec, bg: &BackgroundModel, emb: &Embedding, e: &Field) -> Result<Field> {
    let (d, n) = (grid.dim(), bg.dim());
    let mut de = gradient(grid, e)?;
    if bg.is_flat() {
        return Ok(de);
    }
    for node in 0..grid.len() {
        let gam = bg.christoffel_at(emb.point(node))?;
        let ea = e.at(node).to_vec();
        let out = de.at_mut(node);
        for a in 0..d {
            for b in 0..d {
                for mu in 0..n {
                    let mut s = 0.0;
                    for nu in 0..n {
                        for rho in 0..n {
                            s += gam[(mu * n + nu) * n + rho] * ea[a * n + nu] * ea[b * n + rho];
                        }
                    }
                    out[(a * d + b) * n + mu] += s;
                }
            }
        }
    }
    Ok(de)
}

/// Extrinsic curvature `K_ab^i = −g(D_a e_b, n^i)` (slots `[World, World, Normal]`)
/// and worldvolume connection `γ_ab^c = g(D_a e_b, e^c)` (slots `[World, World, World]`),
/// both symmetrized in `ab`.
pub fn extrinsic_curvature(
    grid: &GridSpec,
    bg: &BackgroundModel,
    emb: &Embedding,
    e: &Field,
    metric: &InducedMetric,
    normals: &NormalFrame,
) -> Result<(Field, Field)> {
    let (d, n) = (grid.dim(), bg.dim());
    let m = n - d;
    let dae = frame_covariant_derivative(grid, bg, emb, e)?;
    let mut k = Field::zeros(grid.len(), &[(W, d), (W, d), (NRM, m)]);
    let mut conn = Field::zeros(grid.len(), &[(W, d), (W, d), (W, d)]);
    for node in 0..grid.len() {
        let g = metric.ambient.at(node);
        let ea = e.at(node);
        let ginv = metric.gamma_inv.at(node);
        let nl = normals.low.at(node);
        let de = dae.at(node);
        let mut kk = vec![0.0; d * d * m];
        let mut cc = vec![0.0; d * d * d];
        for a in 0..d {
            for b in 0..d {
                let v = &de[(a * d + b) * n..(a * d + b + 1) * n];
                for i in 0..m {
                    kk[(a * d + b) * m + i] = -(0..n).map(|mu| v[mu] * nl[i * n + mu]).sum::<f64>();
                }
                let proj: Vec<f64> = (0..d).map(|f| inner(g, n, v, &ea[f * n..(f + 1) * n])).collect();
                for c in 0..d {
                    cc[(a * d + b) * d + c] = (0..d).map(|f| proj[f] * ginv[f * d + c]).sum();
                }
            }
        }
        let ko = k.at_mut(node);
        for a in 0..d {
            for b in 0..d {
                for i in 0..m {
                    ko[(a * d + b) * m + i] = 0.5 * (kk[(a * d + b) * m + i] + kk[(b * d + a) * m + i]);
                }
            }
        }
        let co = conn.at_mut(node);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    co[(a * d + b) * d + c] = 0.5 * (cc[(a * d + b) * d + c] + cc[(b * d + a) * d + c]);
                }
            }
        }
    }
    Ok((k, conn))
}

/// Twist potential `ω_a^{ij} = g(D_a n^i, n^j)`, antisymmetrized; slots `[World, Normal, Normal]`.
pub fn twist_potential(
    grid: &GridSpec,
    bg: &BackgroundModel,
    emb: &Embedding,
    e: &Field,
    normals: &NormalFrame,
) -> Result<Field> {
    let (d, n) = (grid.dim(), bg.dim());
    let m = n - d;
    let mut dn = gradient(grid, &normals.up)?;
    if !bg.is_flat() {
        for node in 0..grid.len() {
            let gam = bg.christoffel_at(emb.point(node))?;
            let ea = e.at(node).to_vec();
            let nu_ = normals.up.at(node).to_vec();
            let out = dn.at_mut(node);
            for a in 0..d {
                for i in 0..m {
                    for mu in 0..n {
                        let mut s = 0.0;
                        for nu in 0..n {
                            for rho in 0..n {
                                s += gam[(mu * n + nu) * n + rho] * ea[a * n + nu] * nu_[i * n + rho];
                            }
                        }
                        out[(a * m + i) * n + mu] += s;
                    }
                }
            }
        }
    }
    let mut omega = Field::zeros(grid.len(), &[(W, d), (NRM, m), (NRM, m)]);
    for node in 0..grid.len() {
        let nl = normals.low.at(node);
        let v = dn.at(node);
        let raw: Vec<f64> = (0..d * m * m)
            .map(|idx| {
                let (a, i, j) = (idx / (m * m), (idx / m) % m, idx % m);
                (0..n).map(|mu| v[(a * m + i) * n + mu] * nl[j * n + mu]).sum()
            })
            .collect();
        let o = omega.at_mut(node);
        for a in 0..d {
            for i in 0..m {
                for j in 0..m {
                    o[(a * m + i) * m + j] = 0.5 * (raw[(a * m + i) * m + j] - raw[(a * m + j) * m + i]);
                }
            }
        }
    }
    Ok(omega)
}

/// Background curvature projected onto the frame:
/// `A^i_j = g(R(e_a, n_j) e^a, n^i)` `[Normal, Normal]`,
/// `B_ab^{ij} = g(R(e_a, n_j) e_b, n^i)` `[World, World, Normal, Normal]`,
/// `C_b^{jik} = g(R(n_k, e_b) n^j, n^i)` `[World, Normal, Normal, Normal]` stored `(b, j, i, k)`.
pub fn projected_riemann(
    grid: &GridSpec,
    bg: &BackgroundModel,
    emb: &Embedding,
    e: &Field,
    metric: &InducedMetric,
    normals: &NormalFrame,
) -> Result<(Field, Field, Field)> {
    let (d, n) = (grid.dim(), bg.dim());
    let m = n - d;
    let mut a_f = Field::zeros(grid.len(), &[(NRM, m), (NRM, m)]);
    let mut b_f = Field::zeros(grid.len(), &[(W, d), (W, d), (NRM, m), (NRM, m)]);
    let mut c_f = Field::zeros(grid.len(), &[(W, d), (NRM, m), (NRM, m), (NRM, m)]);
    if bg.is_flat() {
        return Ok((a_f, b_f, c_f));
    }
    for node in 0..grid.len() {
        let r = bg.riemann_at(emb.point(node))?;
        let ea = e.at(node);
        let nu = normals.up.at(node);
        let ginv = metric.gamma_inv.at(node);
        let ev = |a: usize| &ea[a * n..(a + 1) * n];
        let nv = |i: usize| &nu[i * n..(i + 1) * n];
        let e_up: Vec<Vec<f64>> = (0..d)
            .map(|a| (0..n).map(|mu| (0..d).map(|b| ginv[a * d + b] * ea[b * n + mu]).sum()).collect())
            .collect();
        for i in 0..m {
            for j in 0..m {
                let s: f64 = (0..d).map(|a| riemann_contract(&r, n, ev(a), nv(j), &e_up[a], nv(i))).sum();
                a_f.at_mut(node)[i * m + j] = s;
                for a in 0..d {
                    for b in 0..d {
                        b_f.at_mut(node)[((a * d + b) * m + i) * m + j] = riemann_contract(&r, n, ev(a), nv(j), ev(b), nv(i));
                    }
                }
                for k in 0..m {
                    for b in 0..d {
                        c_f.at_mut(node)[((b * m + j) * m + i) * m + k] =
                            riemann_contract(&r, n, nv(k), ev(b), nv(j), nv(i));
                    }
                }
            }
        }
    }
    Ok((a_f, b_f, c_f))
}

/// Every geometric quantity of one embedding, computed once.
#[derive(Clone, Debug)]
pub struct GeometryCache {
    pub grid: GridSpec,
    pub background: BackgroundModel,
    pub embedding: Embedding,
    pub e: Field,
    pub metric: InducedMetric,
    pub normals: NormalFrame,
    pub k_ab: Field,
    pub conn: Field,
    /// `K^i = γ^{ab} K_ab^i`.
    pub k_mean: Field,
    pub omega: Field,
    pub riem_a: Field,
    pub riem_b: Field,
    pub riem_c: Field,
    /// `Q^{ij} = K_ab^i K^{ab j}`.
    pub q: Field,
}

impl GeometryCache {
    pub fn new(grid: &GridSpec, bg: &BackgroundModel, emb: &Embedding) -> Result<Self> {
        let e = tangent_frame(grid, emb)?;
        let metric = induced_metric(grid, bg, emb, &e)?;
        let normals = normal_frame(grid, bg, &e, &metric)?;
        Self::assemble(grid, bg, emb, e, metric, normals)
    }

    /// Same embedding with the normal frame rotated node-wise, `n'^i = R^i_j n^j`.
    pub fn with_rotated_normals(&self, rotation: &Field) -> Result<Self> {
        let (n, m) = (self.ambient_dim(), self.codim());
        if rotation.slots() != [(NRM, m), (NRM, m)] {
            return Err(BraneError::Shape("rotation needs slots [Normal, Normal]".into()));
        }
        let up = Field::from_fn(&self.grid, &[(NRM, m), (AMB, n)], |node, out| {
            let r = rotation.at(node);
            let nu = self.normals.up.at(node);
            for i in 0..m {
                for mu in 0..n {
                    out[i * n + mu] = (0..m).map(|j| r[i * m + j] * nu[j * n + mu]).sum();
                }
            }
        });
        let normals = normal_frame_from(&self.grid, &self.background, &self.metric, up)?;
        Self::assemble(&self.grid, &self.background, &self.embedding, self.e.clone(), self.metric.clone(), normals)
    }

    fn assemble(
        grid: &GridSpec,
        bg: &BackgroundModel,
        emb: &Embedding,
        e: Field,
        metric: InducedMetric,
        normals: NormalFrame,
    ) -> Result<Self> {
        let (k_ab, conn) = extrinsic_curvature(grid, bg, emb, &e, &metric, &normals)?;
        let omega = twist_potential(grid, bg, emb, &e, &normals)?;
        let (riem_a, riem_b, riem_c) = projected_riemann(grid, bg, emb, &e, &metric, &normals)?;
        let d = grid.dim();
        let m = bg.dim() - d;
        let mut k_mean = Field::zeros(grid.len(), &[(NRM, m)]);
        let mut q = Field::zeros(grid.len(), &[(NRM, m), (NRM, m)]);
        for node in 0..grid.len() {
            let gi = metric.gamma_inv.at(node);
            let k = k_ab.at(node);
            for i in 0..m {
                k_mean.at_mut(node)[i] = (0..d * d).map(|ab| gi[ab] * k[ab * m + i]).sum();
            }
            // K^{ab}_i with both worldvolume indices raised.
            let mut kup = vec![0.0; d * d * m];
            for a in 0..d {
                for b in 0..d {
                    for i in 0..m {
                        let mut s = 0.0;
                        for c in 0..d {
                            for f in 0..d {
                                s += gi[a * d + c] * gi[b * d + f] * k[(c * d + f) * m + i];
                            }
                        }
                        kup[(a * d + b) * m + i] = s;
                    }
                }
            }
            for i in 0..m {
                for j in 0..m {
                    q.at_mut(node)[i * m + j] = (0..d * d).map(|ab| k[ab * m + i] * kup[ab * m + j]).sum();
                }
            }
        }
        Ok(Self {
            grid: grid.clone(),
            background: bg.clone(),
            embedding: emb.clone(),
            e,
            metric,
            normals,
            k_ab,
            conn,
            k_mean,
            omega,
            riem_a,
            riem_b,
            riem_c,
            q,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.background.dim()
    }

    pub fn codim(&self) -> usize {
        self.ambient_dim() - self.dim()
    }

    pub fn sqrt_g(&self) -> &Field {
        &self.metric.sqrt_g
    }

    /// Jacobi mass matrix `M^i_j = −Q^i_j + A^i_j`.
    pub fn mass(&self) -> Field {
        self.riem_a.axpy(-1.0, &self.q).expect("same shape")
    }

    /// `K^{ab}_i`, both worldvolume indices raised.
    pub fn k_up(&self) -> Field {
        let t = self.raise_world(&self.k_ab, 0).expect("world slot");
        self.raise_world(&t, 1).expect("world slot")
    }

    /// Raises worldvolume slot `slot` with `γ^{ab}`.
    pub fn raise_world(&self, f: &Field, slot: usize) -> Result<Field> {
        let d = self.dim();
        match f.slots().get(slot) {
            Some(&(W, dd)) if dd == d => {}
            _ => return Err(BraneError::IndexKind(format!("slot {slot} is not a worldvolume index"))),
        }
        let strides = slot_strides(f.slots());
        let st = strides[slot];
        let mut out = f.clone();
        for node in 0..self.grid.len() {
            let gi = self.metric.gamma_inv.at(node);
            let src = f.at(node);
            let dst = out.at_mut(node);
            for c in 0..f.ncomp() {
                let a = (c / st) % d;
                let base = c - a * st;
                dst[c] = (0..d).map(|b| gi[a * d + b] * src[base + b * st]).sum();
            }
        }
        Ok(out)
    }

    fn check_tensor(&self, f: &Field) -> Result<()> {
        if f.nodes() != self.grid.len() {
            return Err(BraneError::Shape(format!("field has {} nodes, grid has {}", f.nodes(), self.grid.len())));
        }
        for &(kind, dim) in f.slots() {
            let ok = match kind {
                W => dim == self.dim(),
                NRM => dim == self.codim(),
                AMB => false,
            };
            if !ok {
                return Err(BraneError::IndexKind(format!(
                    "normal-covariant calculus acts on worldvolume/normal slots, got {:?}",
                    f.slots()
                )));
            }
        }
        Ok(())
    }

    /// Subtracts the connection terms for every slot of `f` along direction `a`:
    /// `−γ_{a s}^c f_{..c..}` on worldvolume slots, `−ω_a^{ik} f_{..k..}` on normal slots.
    fn connection_terms(&self, node: usize, a: usize, f: &[f64], slots: &[(IndexKind, usize)], out: &mut [f64]) {
        let (d, m) = (self.dim(), self.codim());
        let strides = slot_strides(slots);
        let conn = self.conn.at(node);
        let om = self.omega.at(node);
        for c in 0..f.len() {
            let mut s = 0.0;
            for (slot, &(kind, dim)) in slots.iter().enumerate() {
                let st = strides[slot];
                let idx = (c / st) % dim;
                let base = c - idx * st;
                match kind {
                    W => {
                        for k in 0..d {
                            s += conn[(a * d + idx) * d + k] * f[base + k * st];
                        }
                    }
                    _ => {
                        for k in 0..m {
                            s += om[(a * m + idx) * m + k] * f[base + k * st];
                        }
                    }
                }
            }
            out[c] -= s;
        }
    }

    /// Normal-covariant gradient `∇̃_a f`, a new leading worldvolume slot.
    pub fn cov_grad(&self, f: &Field) -> Result<Field> {
        self.check_tensor(f)?;
        let mut g = gradient(&self.grid, f)?;
        let nc = f.ncomp();
        for node in 0..self.grid.len() {
            let src = f.at(node);
            let dst = g.at_mut(node);
            for a in 0..self.dim() {
                self.connection_terms(node, a, src, f.slots(), &mut dst[a * nc..(a + 1) * nc]);
            }
        }
        Ok(g)
    }

    /// Normal-covariant divergence `∇̃_a V^a` of a field whose leading slot is an
    /// upper worldvolume index, in density form `(1/√γ) ∂_a(√γ V^a)`.
    pub fn cov_div(&self, v: &Field) -> Result<Field> {
        self.check_tensor(v)?;
        let d = self.dim();
        match v.slots().first() {
            Some(&(W, dd)) if dd == d => {}
            _ => return Err(BraneError::IndexKind("divergence needs a leading worldvolume slot".into())),
        }
        let mut dens = v.clone();
        for node in 0..self.grid.len() {
            let s = self.metric.sqrt_g.at(node)[0];
            dens.at_mut(node).iter_mut().for_each(|x| *x *= s);
        }
        let mut out = density_divergence(&self.grid, &dens)?;
        let rest = &v.slots()[1..];
        let inner = v.ncomp() / d;
        for node in 0..self.grid.len() {
            let s = self.metric.sqrt_g.at(node)[0];
            let src = v.at(node).to_vec();
            let dst = out.at_mut(node);
            dst.iter_mut().for_each(|x| *x /= s);
            for a in 0..d {
                self.connection_terms(node, a, &src[a * inner..(a + 1) * inner], rest, dst);
            }
        }
        Ok(out)
    }

    /// Normal-covariant Laplacian `Δ̃ f = ∇̃_a(γ^{ab} ∇̃_b f)`.
    ///
    /// The pure second-derivative pieces `∂_a(√γ γ^{aa} ∂_a f)` use the
    /// compact three-point flux form wherever both neighbours exist; composing
    /// two centered differences there would decouple even and odd nodes.
    /// Across a pole the flux coefficient is odd, so no flux passes the pole.
    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        let g = self.cov_grad(f)?;
        let mut out = self.cov_div(&self.raise_world(&g, 0)?)?;
        let (d, nc) = (self.dim(), f.ncomp());
        for a in 0..d {
            let h = self.grid.axes()[a].h;
            let coef: Vec<f64> = (0..self.grid.len())
                .map(|k| self.metric.sqrt_g.at(k)[0] * self.metric.gamma_inv.at(k)[a * d + a])
                .collect();
            let parity = f.reflection_parity(a);
            let mut t = partial_derivative(&self.grid, f, a)?;
            for k in 0..self.grid.len() {
                t.at_mut(k).iter_mut().for_each(|x| *x *= coef[k]);
            }
            let centered = partial_derivative(&self.grid, &t, a)?;
            for k in 0..self.grid.len() {
                let (Some((m, rm)), Some((p, rp))) = (self.grid.neighbor(k, a, -1), self.grid.neighbor(k, a, 1)) else {
                    continue;
                };
                let side = |nb: usize, refl: bool| {
                    let s = if refl { -1.0 } else { 1.0 };
                    (0.5 * (coef[k] + s * coef[nb]), refl)
                };
                let ((cm, rm), (cp, rp)) = (side(m, rm), side(p, rp));
                let sg = self.metric.sqrt_g.at(k)[0];
                let (fk, fm, fp) = (f.at(k), f.at(m), f.at(p));
                let dst = out.at_mut(k);
                for c in 0..nc {
                    let vm = if rm { parity[c] } else { 1.0 } * fm[c];
                    let vp = if rp { parity[c] } else { 1.0 } * fp[c];
                    let compact = (cp * (vp - fk[c]) - cm * (fk[c] - vm)) / (h * h);
                    dst[c] += (compact - centered.at(k)[c]) / sg;
                }
            }
        }
        Ok(out)
    }

    /// `∇̃_a ∇̃_b f`, slots `[World, World, …]`.
    pub fn hessian(&self, f: &Field) -> Result<Field> {
        self.cov_grad(&self.cov_grad(f)?)
    }

    /// Integral of a scalar against `√|γ| d^Dξ`.
    pub fn integrate(&self, f: &Field) -> Result<f64> {
        crate::grid::integrate_scalar(&self.grid, f, &self.metric.sqrt_g)
    }

    /// Worldvolume area `∫ √|γ|`.
    pub fn area(&self) -> f64 {
        let one = Field::scalar(vec![1.0; self.grid.len()]);
        self.integrate(&one).expect("scalar")
    }

    /// Normal components `φ^i = g(δX, n^i)` of an ambient displacement.
    pub fn normal_part(&self, dx: &Field) -> Result<Field> {
        let (n, m) = (self.ambient_dim(), self.codim());
        if dx.slots() != [(AMB, n)] {
            return Err(BraneError::IndexKind("expected an ambient vector field".into()));
        }
        Ok(Field::from_fn(&self.grid, &[(NRM, m)], |node, out| {
            let v = dx.at(node);
            let nl = self.normals.low.at(node);
            for i in 0..m {
                out[i] = (0..n).map(|mu| nl[i * n + mu] * v[mu]).sum();
            }
        }))
    }

    /// Tangential components `φ^a = γ^{ab} g(δX, e_b)` of an ambient displacement.
    pub fn tangential_part(&self, dx: &Field) -> Result<Field> {
        let (n, d) = (self.ambient_dim(), self.dim());
        if dx.slots() != [(AMB, n)] {
            return Err(BraneError::IndexKind("expected an ambient vector field".into()));
        }
        Ok(Field::from_fn(&self.grid, &[(W, d)], |node, out| {
            let v = dx.at(node);
            let g = self.metric.ambient.at(node);
            let ea = self.e.at(node);
            let gi = self.metric.gamma_inv.at(node);
            let low: Vec<f64> = (0..d).map(|b| inner(g, n, &ea[b * n..(b + 1) * n], v)).collect();
            for a in 0..d {
                out[a] = (0..d).map(|b| gi[a * d + b] * low[b]).sum();
            }
        }))
    }

    /// Ambient displacement `φ^i n_i^μ` from normal components.
    pub fn normal_to_ambient(&self, phi: &Field) -> Result<Field> {
        let (n, m) = (self.ambient_dim(), self.codim());
        if phi.slots() != [(NRM, m)] {
            return Err(BraneError::IndexKind("expected a normal vector field".into()));
        }
        Ok(Field::from_fn(&self.grid, &[(AMB, n)], |node, out| {
            let p = phi.at(node);
            let nu = self.normals.up.at(node);
            for mu in 0..n {
                out[mu] = (0..m).map(|i| p[i] * nu[i * n + mu]).sum();
            }
        }))
    }
}

/// Row-major stride of each slot.
pub(crate) fn slot_strides(slots: &[(IndexKind, usize)]) -> Vec<usize> {
    let mut st = vec![1; slots.len()];
    for s in (0..slots.len().saturating_sub(1)).rev() {
        st[s] = st[s + 1] * slots[s + 1].1;
    }
    st
}
