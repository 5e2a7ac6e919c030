//! Every deformation formula against finite differences of the sampled
//! geometry under `X → X + ε n_i φ^i`.

use brane_core::background::BackgroundModel;
use brane_core::deformation::*;
use brane_core::embedding::Parametrization;
use brane_core::geometry::GeometryCache;
use brane_core::grid::{Axis, Field, GridSpec, IndexKind};
use std::f64::consts::PI;

const NRM: IndexKind = IndexKind::Normal;

fn torus(n: usize) -> GeometryCache {
    let grid = GridSpec::new(vec![Axis::periodic(0.0, 2.0 * PI, 2 * n), Axis::periodic(0.0, 2.0 * PI, n)]).unwrap();
    let bg = BackgroundModel::euclidean(3);
    let emb = Parametrization::Torus { major: 2.0, minor: 1.0 }.sample(&grid, &bg).unwrap();
    GeometryCache::new(&grid, &bg, &emb).unwrap()
}

fn torus_phi(g: &GeometryCache) -> Field {
    Field::from_fn(&g.grid, &[(NRM, 1)], |k, o| {
        let x = g.grid.coords(k);
        o[0] = 0.3 + 0.2 * x[0].cos() * x[1].sin();
    })
}

fn pushed(g: &GeometryCache, phi: &Field, eps: f64) -> GeometryCache {
    let dx = g.normal_to_ambient(phi).unwrap();
    let emb = g.embedding.displaced(&g.grid, &g.background, &dx, eps).unwrap();
    GeometryCache::new(&g.grid, &g.background, &emb).unwrap()
}

fn fd(a: &Field, b: &Field, eps: f64) -> Field {
    b.axpy(-1.0, a).unwrap().scaled(1.0 / eps)
}

fn err(a: &Field, b: &Field) -> f64 {
    a.axpy(-1.0, b).unwrap().max_abs()
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

type Probe = fn(&GeometryCache) -> Field;

fn torus_quantities() -> Vec<(&'static str, Probe, fn(&GeometryCache, &Field) -> Field)> {
    vec![
        ("metric", |g| g.metric.gamma.clone(), |g, p| deform_metric(g, p).unwrap().0),
        ("inverse metric", |g| g.metric.gamma_inv.clone(), |g, p| deform_metric(g, p).unwrap().1),
        ("measure", |g| g.sqrt_g().clone(), |g, p| deform_measure(g, p).unwrap()),
        ("extrinsic", |g| g.k_ab.clone(), |g, p| deform_extrinsic(g, p).unwrap()),
        ("mean curvature", |g| g.k_mean.clone(), |g, p| deform_mean_curvature(g, p).unwrap()),
        ("grad mean curvature", |g| g.cov_grad(&g.k_mean).unwrap(), |g, p| deform_grad_mean_curvature(g, p).unwrap()),
    ]
}

fn interior_err(g: &GeometryCache, a: &Field, b: &Field, margin: usize) -> f64 {
    (0..g.grid.len())
        .filter(|&k| g.grid.boundary_distance(k) >= margin)
        .map(|k| a.at(k).iter().zip(b.at(k)).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
        .fold(0.0, f64::max)
}

#[test]
fn torus_deformations_converge_to_finite_differences() {
    let eps = 1e-6;
    for (name, probe, formula) in torus_quantities() {
        let errs: Vec<f64> = [32, 64]
            .iter()
            .map(|&n| {
                let g = torus(n);
                let phi = torus_phi(&g);
                err(&fd(&probe(&g), &probe(&pushed(&g, &phi, eps)), eps), &formula(&g, &phi))
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!(errs[1] < 5e-3, "{name}: {errs:?}");
        assert!((1.8..2.2).contains(&order), "{name}: order {order}");
    }
}

#[test]
fn one_sided_difference_error_is_first_order_in_epsilon() {
    let g = torus(64);
    let phi = torus_phi(&g);
    let epss = [4e-2, 2e-2, 1e-2];
    for (name, probe, _) in torus_quantities() {
        if name == "extrinsic" {
            // K_ab of a parallel surface is affine in ε; nothing to fit.
            continue;
        }
        let q0 = probe(&g);
        let floor = fd(&q0, &probe(&pushed(&g, &phi, 1e-7)), 1e-7);
        let errs: Vec<f64> = epss
            .iter()
            .map(|&e| {
                let d = fd(&q0, &probe(&pushed(&g, &phi, e)), e);
                err(&d, &floor)
            })
            .collect();
        let order = slope(&epss, &errs);
        assert!((0.9..1.1).contains(&order), "{name}: {errs:?} order {order}");
    }
}

#[test]
fn expanded_and_composite_grad_of_mean_curvature_agree() {
    let errs: Vec<f64> = [32, 64]
        .iter()
        .map(|&n| {
            let g = torus(n);
            let phi = torus_phi(&g);
            let dk = deform_mean_curvature(&g, &phi).unwrap();
            let composite = deform_grad(&g, &g.k_mean, &dk, &phi).unwrap();
            err(&composite, &deform_grad_mean_curvature(&g, &phi).unwrap())
        })
        .collect();
    let order = (errs[0] / errs[1]).log2();
    assert!((1.8..2.3).contains(&order), "{errs:?}");
}

fn geodesic_line(n: usize) -> GeometryCache {
    let grid = GridSpec::new(vec![Axis::open(-1.5, 1.5, n + 1)]).unwrap();
    let bg = BackgroundModel::constant_curvature(2, 1.0);
    let emb = Parametrization::Plane { dim: 1, ambient: 2 }.sample(&grid, &bg).unwrap();
    GeometryCache::new(&grid, &bg, &emb).unwrap()
}

#[test]
fn geodesic_extrinsic_deformation_includes_curvature_term() {
    let eps = 1e-6;
    let errs: Vec<f64> = [64, 128]
        .iter()
        .map(|&n| {
            let g = geodesic_line(n);
            let phi = Field::from_fn(&g.grid, &[(NRM, 1)], |k, o| o[0] = 0.5 + 0.3 * g.grid.coords(k)[0].sin());
            let d = fd(&g.k_ab, &pushed(&g, &phi, eps).k_ab, eps);
            let f = deform_extrinsic(&g, &phi).unwrap();
            // With the −B φ term dropped the mismatch stays O(1).
            let hess = g.hessian(&phi).unwrap().scaled(-1.0);
            assert!(interior_err(&g, &d, &hess, 3) > 0.1);
            interior_err(&g, &d, &f, 3)
        })
        .collect();
    let order = (errs[0] / errs[1]).log2();
    assert!(errs[1] < 1e-3 && (1.8..2.3).contains(&order), "{errs:?}");
}

#[test]
fn great_circle_jacobi_field_has_no_mean_curvature_response() {
    let g = geodesic_line(256);
    // Chart arclength along the line is s = 2 atan(x / 2).
    let phi = Field::from_fn(&g.grid, &[(NRM, 1)], |k, o| o[0] = (2.0 * (g.grid.coords(k)[0] / 2.0).atan()).sin());
    let dk = deform_mean_curvature(&g, &phi).unwrap();
    let zero = Field::zeros(g.grid.len(), &[(NRM, 1)]);
    assert!(interior_err(&g, &dk, &zero, 2) < 1e-4);
}

fn helix(n: usize) -> GeometryCache {
    let grid = GridSpec::new(vec![Axis::open(0.0, 3.0, n + 1)]).unwrap();
    let bg = BackgroundModel::euclidean(3);
    let emb = Parametrization::Helix { radius: 1.0, pitch: 0.5 }.sample(&grid, &bg).unwrap();
    GeometryCache::new(&grid, &bg, &emb).unwrap()
}

#[test]
fn helix_twist_deformation_matches_frame_differences() {
    let eps = 1e-6;
    let errs: Vec<f64> = [64, 128]
        .iter()
        .map(|&n| {
            let g = helix(n);
            let phi = Field::from_fn(&g.grid, &[(NRM, 2)], |k, o| {
                let s = g.grid.coords(k)[0];
                o.copy_from_slice(&[0.3 * s.sin(), 0.2 * (2.0 * s).cos()]);
            });
            let gp = pushed(&g, &phi, eps);
            let d_omega = fd(&g.omega, &gp.omega, eps);
            // Rotation of the pushed frame relative to the original one.
            let rot = Field::from_fn(&g.grid, &[(NRM, 2), (NRM, 2)], |k, o| {
                let (a, b) = (gp.normals.up.at(k), g.normals.low.at(k));
                let dot = |i: usize, j: usize| (0..3).map(|mu| a[i * 3 + mu] * b[j * 3 + mu]).sum::<f64>();
                let r = 0.5 * (dot(0, 1) - dot(1, 0)) / eps;
                o.copy_from_slice(&[0.0, r, -r, 0.0]);
            });
            let target = d_omega.axpy(-1.0, &g.cov_grad(&rot).unwrap()).unwrap();
            interior_err(&g, &target, &deform_twist(&g, &phi).unwrap(), 4)
        })
        .collect();
    let order = (errs[0] / errs[1]).log2();
    assert!(errs[1] < 1e-2 && (1.8..2.3).contains(&order), "{errs:?}");
}

#[test]
fn constant_normal_rotation_commutes_with_covariant_gradient() {
    let g = helix(64);
    let (c, s) = (0.6f64, 0.8f64);
    let rot = Field::from_fn(&g.grid, &[(NRM, 2), (NRM, 2)], |_, o| o.copy_from_slice(&[c, -s, s, c]));
    let g2 = g.with_rotated_normals(&rot).unwrap();
    let phi = Field::from_fn(&g.grid, &[(NRM, 2)], |k, o| {
        let x = g.grid.coords(k)[0];
        o.copy_from_slice(&[x.sin(), x * x]);
    });
    let rphi = Field::from_fn(&g.grid, &[(NRM, 2)], |k, o| {
        let p = phi.at(k);
        o.copy_from_slice(&[c * p[0] - s * p[1], s * p[0] + c * p[1]]);
    });
    let a = g.cov_grad(&phi).unwrap();
    let b = g2.cov_grad(&rphi).unwrap();
    for k in 0..g.grid.len() {
        let (x, y) = (a.at(k), b.at(k));
        assert!((c * x[0] - s * x[1] - y[0]).abs() < 1e-10);
        assert!((s * x[0] + c * x[1] - y[1]).abs() < 1e-10);
    }
    let kk = |g: &GeometryCache| Field::from_fn(&g.grid, &[], |k, o| o[0] = g.k_mean.at(k).iter().map(|v| v * v).sum());
    assert!(err(&kk(&g), &kk(&g2)) < 1e-10);
}
