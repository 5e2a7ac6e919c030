//! Covariant deformation calculus: how every geometric object responds to a
//! normal perturbation `δX = n_i φ^i`.
//!
//! One-forms on the space of embeddings are represented by their value on a
//! concrete perturbation, two-forms by antisymmetric evaluation on a pair.
//! Fundamental perturbations carry no second variation, `D̃_δ φ^i = 0`.

use crate::error::{BraneError, Result};
use crate::geometry::GeometryCache;
use crate::grid::{Field, IndexKind};

const W: IndexKind = IndexKind::World;
const NRM: IndexKind = IndexKind::Normal;

fn check_normal(geom: &GeometryCache, phi: &Field) -> Result<()> {
    if phi.slots() != [(NRM, geom.codim())] || phi.nodes() != geom.grid.len() {
        return Err(BraneError::IndexKind(format!(
            "expected a normal vector field with {} components, got {:?}",
            geom.codim(),
            phi.slots()
        )));
    }
    Ok(())
}

/// Splits an ambient variation into tangential `φ^a` and normal `φ^i` parts.
pub fn decompose(geom: &GeometryCache, dx: &Field) -> Result<(Field, Field)> {
    Ok((geom.tangential_part(dx)?, geom.normal_part(dx)?))
}

/// `e_a φ^a + n_i φ^i`.
pub fn recompose(geom: &GeometryCache, phi_t: &Field, phi: &Field) -> Result<Field> {
    let (d, n) = (geom.dim(), geom.ambient_dim());
    if phi_t.slots() != [(W, d)] {
        return Err(BraneError::IndexKind("tangential part needs one worldvolume slot".into()));
    }
    let mut out = geom.normal_to_ambient(phi)?;
    for node in 0..geom.grid.len() {
        let e = geom.e.at(node);
        let t = phi_t.at(node).to_vec();
        for (mu, o) in out.at_mut(node).iter_mut().enumerate() {
            *o += (0..d).map(|a| t[a] * e[a * n + mu]).sum::<f64>();
        }
    }
    Ok(out)
}

/// `β_ab = K_ab^i φ_i`.
pub fn beta(geom: &GeometryCache, phi: &Field) -> Result<Field> {
    check_normal(geom, phi)?;
    let (d, m) = (geom.dim(), geom.codim());
    Ok(Field::from_fn(&geom.grid, &[(W, d), (W, d)], |node, out| {
        let k = geom.k_ab.at(node);
        let p = phi.at(node);
        for ab in 0..d * d {
            out[ab] = (0..m).map(|i| k[ab * m + i] * p[i]).sum();
        }
    }))
}

/// `(D_δ γ_ab, D_δ γ^{ab}) = (2 K_ab^i φ_i, −2 β^{ab})`.
pub fn deform_metric(geom: &GeometryCache, phi: &Field) -> Result<(Field, Field)> {
    let b = beta(geom, phi)?;
    let up = geom.raise_world(&geom.raise_world(&b, 0)?, 1)?;
    Ok((b.scaled(2.0), up.scaled(-2.0)))
}

/// `D_δ √|γ| = √|γ| K^i φ_i`.
pub fn deform_measure(geom: &GeometryCache, phi: &Field) -> Result<Field> {
    check_normal(geom, phi)?;
    let m = geom.codim();
    Ok(Field::from_fn(&geom.grid, &[], |node, out| {
        let k = geom.k_mean.at(node);
        let p = phi.at(node);
        out[0] = geom.sqrt_g().at(node)[0] * (0..m).map(|i| k[i] * p[i]).sum::<f64>();
    }))
}

/// `(β_ab, J_a^i = ∇̃_a φ^i)`.
pub fn deform_tangent(geom: &GeometryCache, phi: &Field) -> Result<(Field, Field)> {
    Ok((beta(geom, phi)?, geom.cov_grad(phi)?))
}

/// `D̃_δ K_ab^i = −∇̃_a∇̃_b φ^i + (K_ac^i K^c_{bj} + B_ab^{ij}) φ^j`.
///
/// The curvature term carries the sign that makes the trace agree with
/// [`deform_mean_curvature`] under the same Riemann convention.
pub fn deform_extrinsic(geom: &GeometryCache, phi: &Field) -> Result<Field> {
    check_normal(geom, phi)?;
    let (d, m) = (geom.dim(), geom.codim());
    let hess = geom.hessian(phi)?;
    let k_mixed = geom.raise_world(&geom.k_ab, 0)?; // K^c_b^j, stored (c, b, j)
    Ok(Field::from_fn(&geom.grid, &[(W, d), (W, d), (NRM, m)], |node, out| {
        let (h, k, km, bb, p) = (hess.at(node), geom.k_ab.at(node), k_mixed.at(node), geom.riem_b.at(node), phi.at(node));
        for a in 0..d {
            for b in 0..d {
                for i in 0..m {
                    let mut s = -h[(a * d + b) * m + i];
                    for j in 0..m {
                        let mut kk = 0.0;
                        for c in 0..d {
                            kk += k[(a * d + c) * m + i] * km[(c * d + b) * m + j];
                        }
                        s += (kk + bb[((a * d + b) * m + i) * m + j]) * p[j];
                    }
                    out[(a * d + b) * m + i] = s;
                }
            }
        }
    }))
}

/// `D̃_δ K^i = −Δ̃φ^i − Q^i_j φ^j + A^i_j φ^j`.
pub fn deform_mean_curvature(geom: &GeometryCache, phi: &Field) -> Result<Field> {
    check_normal(geom, phi)?;
    let lap = geom.laplacian(phi)?;
    let mass = geom.mass();
    let m = geom.codim();
    Ok(Field::from_fn(&geom.grid, &[(NRM, m)], |node, out| {
        let (l, mm, p) = (lap.at(node), mass.at(node), phi.at(node));
        for i in 0..m {
            out[i] = -l[i] + (0..m).map(|j| mm[i * m + j] * p[j]).sum::<f64>();
        }
    }))
}

/// `D_δ ω_a^{ij} − ∇̃_a γ^{ij} = −K_ab^i ∇̃^b φ^j + K_ab^j ∇̃^b φ^i + g(R(n_k, e_a) n^j, n^i) φ^k`,
/// slots `[World, Normal, Normal]`.
pub fn deform_twist(geom: &GeometryCache, phi: &Field) -> Result<Field> {
    check_normal(geom, phi)?;
    let (d, m) = (geom.dim(), geom.codim());
    let grad_up = geom.raise_world(&geom.cov_grad(phi)?, 0)?;
    Ok(Field::from_fn(&geom.grid, &[(W, d), (NRM, m), (NRM, m)], |node, out| {
        let (k, g, c, p) = (geom.k_ab.at(node), grad_up.at(node), geom.riem_c.at(node), phi.at(node));
        for a in 0..d {
            for i in 0..m {
                for j in 0..m {
                    let mut s = 0.0;
                    for b in 0..d {
                        s += -k[(a * d + b) * m + i] * g[b * m + j] + k[(a * d + b) * m + j] * g[b * m + i];
                    }
                    for kk in 0..m {
                        s += c[((a * m + j) * m + i) * m + kk] * p[kk];
                    }
                    out[(a * m + i) * m + j] = s;
                }
            }
        }
    }))
}

/// `D̃_δ ∇̃_b ψ^i = ∇̃_b(D̃_δ ψ^i) − (D_δ ω_b^{ij} − ∇̃_b γ^{ij}) ψ_j`, given `D̃_δ ψ`.
pub fn deform_grad(geom: &GeometryCache, psi: &Field, deformed_psi: &Field, phi: &Field) -> Result<Field> {
    check_normal(geom, psi)?;
    let grad = geom.cov_grad(deformed_psi)?;
    let tw = deform_twist(geom, phi)?;
    let (d, m) = (geom.dim(), geom.codim());
    Ok(Field::from_fn(&geom.grid, &[(W, d), (NRM, m)], |node, out| {
        let (g, t, s) = (grad.at(node), tw.at(node), psi.at(node));
        for b in 0..d {
            for i in 0..m {
                out[b * m + i] = g[b * m + i] - (0..m).map(|j| t[(b * m + i) * m + j] * s[j]).sum::<f64>();
            }
        }
    }))
}

/// `D̃_δ ∇̃_b φ^i` for the perturbation itself: `−(D_δ ω_b^{ij} − ∇̃_b γ^{ij}) φ_j`.
pub fn deform_grad_phi(geom: &GeometryCache, phi: &Field) -> Result<Field> {
    let zero = Field::zeros(geom.grid.len(), &[(NRM, geom.codim())]);
    deform_grad(geom, phi, &zero, phi)
}

/// `D̃_δ ∇̃_b K^i`, expanded term by term:
/// `−∇̃_bΔ̃φ^i − Q^i_j∇̃_bφ^j − (∇̃_bQ^i_j)φ^j + (∇̃_bA^i_j)φ^j + A^i_j∇̃_bφ^j
///  + K_b^{a i}∇̃_aφ^j K_j − K_b^{a j}∇̃_aφ^i K_j − g(R(n_k,e_b)n^j,n^i)φ^k K_j`.
pub fn deform_grad_mean_curvature(geom: &GeometryCache, phi: &Field) -> Result<Field> {
    check_normal(geom, phi)?;
    let (d, m) = (geom.dim(), geom.codim());
    let grad_lap = geom.cov_grad(&geom.laplacian(phi)?)?;
    let grad_phi = geom.cov_grad(phi)?;
    let grad_up = geom.raise_world(&grad_phi, 0)?;
    let grad_q = geom.cov_grad(&geom.q)?;
    let grad_a = geom.cov_grad(&geom.riem_a)?;
    Ok(Field::from_fn(&geom.grid, &[(W, d), (NRM, m)], |node, out| {
        let (gl, gp, gu) = (grad_lap.at(node), grad_phi.at(node), grad_up.at(node));
        let (q, a, gq, ga) = (geom.q.at(node), geom.riem_a.at(node), grad_q.at(node), grad_a.at(node));
        let (k, km, c, p) = (geom.k_ab.at(node), geom.k_mean.at(node), geom.riem_c.at(node), phi.at(node));
        for b in 0..d {
            for i in 0..m {
                let mut s = -gl[b * m + i];
                for j in 0..m {
                    s += -q[i * m + j] * gp[b * m + j] - gq[(b * m + i) * m + j] * p[j]
                        + ga[(b * m + i) * m + j] * p[j]
                        + a[i * m + j] * gp[b * m + j];
                    for aa in 0..d {
                        s += (k[(b * d + aa) * m + i] * gu[aa * m + j] - k[(b * d + aa) * m + j] * gu[aa * m + i]) * km[j];
                    }
                    for kk in 0..m {
                        s -= c[((b * m + j) * m + i) * m + kk] * p[kk] * km[j];
                    }
                }
                out[b * m + i] = s;
            }
        }
    }))
}

/// Pair evaluation of the exterior derivative of the tangential one-form,
/// `−[K^{ab}_i (φ1^i φ2_b − φ2^i φ1_b) + (φ1_i ∇̃^a φ2^i − φ2_i ∇̃^a φ1^i)]`,
/// an upper worldvolume vector. Tangential parts are given with upper index.
pub fn deform_tangential_oneform_pair(
    geom: &GeometryCache,
    t1: &Field,
    phi1: &Field,
    t2: &Field,
    phi2: &Field,
) -> Result<Field> {
    let (d, m) = (geom.dim(), geom.codim());
    for t in [t1, t2] {
        if t.slots() != [(W, d)] {
            return Err(BraneError::IndexKind("tangential part needs one worldvolume slot".into()));
        }
    }
    let g1 = geom.raise_world(&geom.cov_grad(phi1)?, 0)?;
    let g2 = geom.raise_world(&geom.cov_grad(phi2)?, 0)?;
    let k_up = geom.k_up();
    Ok(Field::from_fn(&geom.grid, &[(W, d)], |node, out| {
        let gm = geom.metric.gamma.at(node);
        let low = |t: &[f64], b: usize| (0..d).map(|c| gm[b * d + c] * t[c]).sum::<f64>();
        let (a1, a2) = (t1.at(node), t2.at(node));
        let (p1, p2) = (phi1.at(node), phi2.at(node));
        let ku = k_up.at(node);
        for a in 0..d {
            let mut s = 0.0;
            for b in 0..d {
                let (l1, l2) = (low(a1, b), low(a2, b));
                for i in 0..m {
                    s += ku[(a * d + b) * m + i] * (p1[i] * l2 - p2[i] * l1);
                }
            }
            for i in 0..m {
                s += p1[i] * g2.at(node)[a * m + i] - p2[i] * g1.at(node)[a * m + i];
            }
            out[a] = -s;
        }
    }))
}
