//! Area (DNG) and curvature-squared (QEC) actions, their first variations split
//! into bulk and divergence parts, and the equation-of-motion residuals.

use crate::embedding::Embedding;
use crate::error::{BraneError, Result};
use crate::geometry::GeometryCache;
use crate::grid::{density_divergence, integrate_scalar, Field, IndexKind};

const W: IndexKind = IndexKind::World;
const NRM: IndexKind = IndexKind::Normal;

/// First variation `δS = bulk + divergence`, with per-node integrands.
/// The bulk density already includes `√|γ|`; the divergence density is the
/// coordinate divergence of a vector density.
#[derive(Clone, Debug)]
pub struct ActionBreakdown {
    pub total: f64,
    pub bulk_term: f64,
    pub divergence_term: f64,
    pub bulk_density: Field,
    pub divergence_density: Field,
}

fn unit_weight(geom: &GeometryCache) -> Field {
    Field::scalar(vec![1.0; geom.grid.len()])
}

fn breakdown(geom: &GeometryCache, bulk_density: Field, potential: &Field) -> Result<ActionBreakdown> {
    let one = unit_weight(geom);
    let divergence_density = density_divergence(&geom.grid, potential)?;
    let bulk_term = integrate_scalar(&geom.grid, &bulk_density, &one)?;
    let divergence_term = integrate_scalar(&geom.grid, &divergence_density, &one)?;
    Ok(ActionBreakdown { total: bulk_term + divergence_term, bulk_term, divergence_term, bulk_density, divergence_density })
}

fn check_pair(geom: &GeometryCache, phi_t: &Field, phi: &Field) -> Result<()> {
    if phi_t.slots() != [(W, geom.dim())] || phi.slots() != [(NRM, geom.codim())] {
        return Err(BraneError::Shape(format!(
            "perturbation needs tangential [World {}] and normal [Normal {}] parts, got {:?} and {:?}",
            geom.dim(),
            geom.codim(),
            phi_t.slots(),
            phi.slots()
        )));
    }
    if phi_t.nodes() != geom.grid.len() || phi.nodes() != geom.grid.len() {
        return Err(BraneError::Shape("perturbation node count differs from grid".into()));
    }
    Ok(())
}

fn dot_normal(geom: &GeometryCache, a: &Field, b: &Field) -> Field {
    let m = geom.codim();
    Field::from_fn(&geom.grid, &[], |k, o| o[0] = (0..m).map(|i| a.at(k)[i] * b.at(k)[i]).sum())
}

/// `S = −μ ∫ √|γ| d^Dξ`.
pub fn dng_action(geom: &GeometryCache, mu: f64) -> f64 {
    -mu * geom.area()
}

/// DNG equation of motion `K^i = 0`; returns `K^i`.
pub fn dng_eom_residual(geom: &GeometryCache) -> Field {
    geom.k_mean.clone()
}

/// DNG symplectic potential density `−μ √|γ| φ^a`.
pub fn dng_potential(geom: &GeometryCache, phi_t: &Field, mu: f64) -> Field {
    let d = geom.dim();
    Field::from_fn(&geom.grid, &[(W, d)], |k, o| {
        let s = geom.sqrt_g().at(k)[0];
        for a in 0..d {
            o[a] = -mu * s * phi_t.at(k)[a];
        }
    })
}

/// `δS = −μ ∫ ∂_a(√|γ| φ^a) − μ ∫ √|γ| K^i φ_i`.
pub fn dng_first_variation(geom: &GeometryCache, phi_t: &Field, phi: &Field, mu: f64) -> Result<ActionBreakdown> {
    check_pair(geom, phi_t, phi)?;
    let kphi = dot_normal(geom, &geom.k_mean, phi);
    let bulk = Field::from_fn(&geom.grid, &[], |k, o| o[0] = -mu * geom.sqrt_g().at(k)[0] * kphi.at(k)[0]);
    breakdown(geom, bulk, &dng_potential(geom, phi_t, mu))
}

/// `S₂ = α ∫ √|γ| K_i K^i d^Dξ`.
pub fn qec_action(geom: &GeometryCache, alpha: f64) -> f64 {
    let k2 = dot_normal(geom, &geom.k_mean, &geom.k_mean);
    alpha * geom.integrate(&k2).expect("scalar")
}

/// `E^i = Δ̃K^i + (−A^{ji} + K_ab^j K^{ab i} − ½ K^j K^i) K_j`; QEC extremals have `E = 0`.
pub fn qec_eom_residual(geom: &GeometryCache) -> Result<Field> {
    let m = geom.codim();
    let lap = geom.laplacian(&geom.k_mean)?;
    Ok(Field::from_fn(&geom.grid, &[(NRM, m)], |k, o| {
        let (l, a, q, km) = (lap.at(k), geom.riem_a.at(k), geom.q.at(k), geom.k_mean.at(k));
        for i in 0..m {
            o[i] = l[i]
                + (0..m)
                    .map(|j| (-a[j * m + i] + q[j * m + i] - 0.5 * km[j] * km[i]) * km[j])
                    .sum::<f64>();
        }
    }))
}

/// QEC symplectic potential density `Ψ^a = √|γ| [½ K² φ^a + φ_i ∇̃^a K^i − K_i ∇̃^a φ^i]`, times `2α`.
pub fn qec_potential(geom: &GeometryCache, phi_t: &Field, phi: &Field, alpha: f64) -> Result<Field> {
    check_pair(geom, phi_t, phi)?;
    let (d, m) = (geom.dim(), geom.codim());
    let grad_k = geom.raise_world(&geom.cov_grad(&geom.k_mean)?, 0)?;
    let grad_phi = geom.raise_world(&geom.cov_grad(phi)?, 0)?;
    Ok(Field::from_fn(&geom.grid, &[(W, d)], |k, o| {
        let (km, p, t) = (geom.k_mean.at(k), phi.at(k), phi_t.at(k));
        let (gk, gp) = (grad_k.at(k), grad_phi.at(k));
        let k2: f64 = km.iter().map(|v| v * v).sum();
        let s = geom.sqrt_g().at(k)[0];
        for a in 0..d {
            let mut v = 0.5 * k2 * t[a];
            for i in 0..m {
                v += p[i] * gk[a * m + i] - km[i] * gp[a * m + i];
            }
            o[a] = 2.0 * alpha * s * v;
        }
    }))
}

/// `δS₂ = −2α ∫ √|γ| E^i φ_i + ∫ ∂_a Ψ^a`.
pub fn qec_first_variation(geom: &GeometryCache, phi_t: &Field, phi: &Field, alpha: f64) -> Result<ActionBreakdown> {
    check_pair(geom, phi_t, phi)?;
    let e = qec_eom_residual(geom)?;
    let ephi = dot_normal(geom, &e, phi);
    let bulk = Field::from_fn(&geom.grid, &[], |k, o| {
        o[0] = -2.0 * alpha * geom.sqrt_g().at(k)[0] * ephi.at(k)[0];
    });
    breakdown(geom, bulk, &qec_potential(geom, phi_t, phi, alpha)?)
}

/// Centered difference `(S[X + ε δX] − S[X − ε δX]) / 2ε` of an action functional.
pub fn centered_variation(
    geom: &GeometryCache,
    dx: &Field,
    eps: f64,
    action: impl Fn(&GeometryCache) -> f64,
) -> Result<f64> {
    let at = |s: f64| -> Result<f64> {
        let emb: Embedding = geom.embedding.displaced(&geom.grid, &geom.background, dx, s)?;
        Ok(action(&GeometryCache::new(&geom.grid, &geom.background, &emb)?))
    };
    Ok((at(eps)? - at(-eps)?) / (2.0 * eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::BackgroundModel;
    use crate::embedding::Parametrization;
    use crate::grid::{Axis, GridSpec};
    use std::f64::consts::PI;

    fn cache(grid: GridSpec, p: Parametrization) -> GeometryCache {
        let bg = BackgroundModel::euclidean(p.ambient_dim());
        let emb = p.sample(&grid, &bg).unwrap();
        GeometryCache::new(&grid, &bg, &emb).unwrap()
    }

    fn sphere(n: usize) -> GeometryCache {
        cache(
            GridSpec::new(vec![Axis::pole(n, 1), Axis::periodic(0.0, 2.0 * PI, 2 * n)]).unwrap(),
            Parametrization::Sphere { radius: 1.0 },
        )
    }

    #[test]
    fn unit_square_action() {
        let g = cache(
            GridSpec::new(vec![Axis::open(0.0, 1.0, 9), Axis::open(0.0, 1.0, 9)]).unwrap(),
            Parametrization::Plane { dim: 2, ambient: 3 },
        );
        assert!((dng_action(&g, 1.0) + 1.0).abs() < 1e-12);
        assert_eq!(qec_action(&g, 1.0), 0.0);
    }

    #[test]
    fn sphere_actions_converge() {
        let errs: Vec<(f64, f64)> = [16, 32]
            .iter()
            .map(|&n| {
                let g = sphere(n);
                ((dng_action(&g, 1.0) + 4.0 * PI).abs(), (qec_action(&g, 1.0) - 16.0 * PI).abs())
            })
            .collect();
        for (a, b) in [(errs[0].0, errs[1].0), (errs[0].1, errs[1].1)] {
            let order = (a / b).log2();
            assert!((1.8..2.3).contains(&order), "{errs:?}");
        }
    }

    #[test]
    fn catenoid_band_area() {
        let exact = 2.0 * PI * (1.0 + 0.5 * 2f64.sinh());
        let errs: Vec<f64> = [32, 64]
            .iter()
            .map(|&n| {
                let g = cache(
                    GridSpec::new(vec![Axis::periodic(0.0, 2.0 * PI, n), Axis::open(-1.0, 1.0, n + 1)]).unwrap(),
                    Parametrization::Catenoid { waist: 1.0 },
                );
                (dng_action(&g, 1.0) + exact).abs()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!((1.8..2.3).contains(&order), "{errs:?}");
    }

    #[test]
    fn cylinder_qec_value() {
        let (r, l) = (2.0, 3.0);
        let g = cache(
            GridSpec::new(vec![Axis::periodic(0.0, 2.0 * PI, 128), Axis::open(0.0, l, 9)]).unwrap(),
            Parametrization::Cylinder { radius: r },
        );
        let exact = 2.0 * PI * l / r;
        assert!((qec_action(&g, 1.0) - exact).abs() < 1e-3 * exact);
    }

    #[test]
    fn qec_is_scale_invariant_for_surfaces() {
        let grid = GridSpec::new(vec![Axis::periodic(0.0, 2.0 * PI, 32), Axis::periodic(0.0, 2.0 * PI, 16)]).unwrap();
        let base = cache(grid.clone(), Parametrization::Torus { major: 2.0, minor: 1.0 });
        let big = cache(grid, Parametrization::Torus { major: 5.0, minor: 2.5 });
        let (a, b) = (qec_action(&base, 1.0), qec_action(&big, 1.0));
        assert!((a - b).abs() <= 1e-10 * a.abs());
    }

    #[test]
    fn sphere_qec_residual_cancels() {
        // Centered differences rescale each tangent by a constant on the
        // polar grid, so the sampled sphere stays umbilic and E vanishes
        // up to rounding amplified by the Laplacian.
        for n in [16, 32] {
            let e = qec_eom_residual(&sphere(n)).unwrap().max_abs();
            assert!(e < 1e-7, "{e}");
        }
    }

    #[test]
    fn constant_push_of_sphere() {
        let g = sphere(32);
        let phi = Field::from_fn(&g.grid, &[(NRM, 1)], |_, o| o[0] = 1.0);
        let t = Field::zeros(g.grid.len(), &[(W, 2)]);
        let dng = dng_first_variation(&g, &t, &phi, 1.0).unwrap();
        assert!((dng.total + 8.0 * PI).abs() < 1e-1, "{}", dng.total);
        assert_eq!(dng.divergence_term, 0.0);
        let qec = qec_first_variation(&g, &t, &phi, 1.0).unwrap();
        assert!(qec.total.abs() < 2e-2, "{}", qec.total);
    }

    #[test]
    fn periodic_divergence_terms_vanish() {
        let g = cache(
            GridSpec::new(vec![Axis::periodic(0.0, 2.0 * PI, 32), Axis::periodic(0.0, 2.0 * PI, 16)]).unwrap(),
            Parametrization::Torus { major: 2.0, minor: 1.0 },
        );
        let t = Field::from_fn(&g.grid, &[(W, 2)], |k, o| {
            let x = g.grid.coords(k);
            o.copy_from_slice(&[x[0].sin() + 0.3, (x[1] + x[0]).cos()]);
        });
        let phi = Field::from_fn(&g.grid, &[(NRM, 1)], |k, o| o[0] = g.grid.coords(k)[1].sin());
        for b in [dng_first_variation(&g, &t, &phi, 1.0).unwrap(), qec_first_variation(&g, &t, &phi, 1.0).unwrap()] {
            assert!(b.divergence_term.abs() < 1e-12, "{}", b.divergence_term);
            assert!((b.total - b.bulk_term - b.divergence_term).abs() <= 1e-12 * b.total.abs().max(1.0));
        }
    }

    #[test]
    fn tangential_displacement_has_no_bulk() {
        let g = sphere(12);
        let dx = Field::from_fn(&g.grid, &[(IndexKind::Ambient, 3)], |k, o| {
            let e = g.e.at(k);
            let x = g.grid.coords(k);
            for mu in 0..3 {
                o[mu] = x[0].sin() * e[mu] + 0.4 * e[3 + mu];
            }
        });
        let (t, phi) = crate::deformation::decompose(&g, &dx).unwrap();
        assert!(phi.max_abs() < 1e-12);
        let b = dng_first_variation(&g, &t, &phi, 1.0).unwrap();
        assert!(b.bulk_term.abs() < 1e-12);
        let b = qec_first_variation(&g, &t, &phi, 1.0).unwrap();
        assert!(b.bulk_term.abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let g = sphere(6);
        let bad = Field::zeros(g.grid.len(), &[(NRM, 2)]);
        let t = Field::zeros(g.grid.len(), &[(W, 2)]);
        assert!(matches!(dng_first_variation(&g, &t, &bad, 1.0), Err(BraneError::Shape(_))));
    }
}
