//! Conservation of the pair currents on Jacobi fields, agreement of the two
//! curvature-squared constructions, and slice independence of ω.

use brane_core::background::BackgroundModel;
use brane_core::embedding::Parametrization;
use brane_core::geometry::GeometryCache;
use brane_core::grid::{Axis, Field, GridSpec, IndexKind};
use brane_core::symplectic::*;
use std::f64::consts::PI;

fn cache(grid: GridSpec, bg: BackgroundModel, p: Parametrization) -> GeometryCache {
    let emb = p.sample(&grid, &bg).unwrap();
    GeometryCache::new(&grid, &bg, &emb).unwrap()
}

fn great_circle(n: usize) -> GeometryCache {
    cache(
        GridSpec::new(vec![Axis::periodic(0.0, 2.0 * PI, n)]).unwrap(),
        BackgroundModel::constant_curvature(2, 1.0),
        Parametrization::Circle { center: vec![1.0, 0.0], radius: 5f64.sqrt() },
    )
}

fn arclength(t: f64) -> f64 {
    let k = ((5.0 - 5f64.sqrt()) / (5.0 + 5f64.sqrt())).sqrt();
    2.0 * (k * (0.5 * t).sin()).atan2((0.5 * t).cos())
}

fn flat(n: usize) -> GeometryCache {
    cache(
        GridSpec::new(vec![Axis::open(0.0, 1.0, n + 1), Axis::open(0.0, 1.0, n + 1)]).unwrap(),
        BackgroundModel::euclidean(3),
        Parametrization::Plane { dim: 2, ambient: 3 },
    )
}

fn catenoid_band(n: usize) -> GeometryCache {
    cache(
        GridSpec::new(vec![Axis::periodic(0.0, 2.0 * PI, 2 * n), Axis::open(-1.0, 1.0, n + 1)]).unwrap(),
        BackgroundModel::euclidean(3),
        Parametrization::Catenoid { waist: 1.0 },
    )
}

fn normal(g: &GeometryCache, f: impl Fn(&[f64]) -> f64) -> Field {
    Field::from_fn(&g.grid, &[(IndexKind::Normal, 1)], |k, o| o[0] = f(&g.grid.coords(k)))
}

fn currents(g: &GeometryCache, a: &Field, b: &Field) -> Vec<Current> {
    vec![dng_potential_pair(g, None, a, None, b).unwrap(), qec_current_adjoint_pair(g, a, b).unwrap()]
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[test]
fn great_circle_currents_are_conserved() {
    let res: Vec<Vec<f64>> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let g = great_circle(n);
            let a = normal(&g, |c| arclength(c[0]).sin());
            let b = normal(&g, |c| arclength(c[0]).cos());
            currents(&g, &a, &b).iter().map(|c| c.div_norms(&g, 0).unwrap().l2).collect()
        })
        .collect();
    for c in 0..2 {
        let p = order(res[1][c], res[2][c]);
        assert!(p >= 1.8, "{res:?}");
    }
}

#[test]
fn flat_harmonic_pair_currents_are_conserved() {
    let div = |n: usize| -> Vec<f64> {
        let g = flat(n);
        let a = normal(&g, |c| c[0].exp() * c[1].cos());
        let b = normal(&g, |c| c[0].sin() * c[1].cosh());
        currents(&g, &a, &b).iter().map(|c| c.div_norms(&g, 3).unwrap().max).collect()
    };
    let res: Vec<Vec<f64>> = [16, 32, 64, 128].iter().map(|&n| div(n)).collect();
    let dng = order(res[2][0], res[3][0]);
    assert!((1.8..2.2).contains(&dng), "{res:?}");
    // The fourth-order current superconverges on flat grids until it meets
    // the rounding floor near n = 128.
    let qec = order(res[1][1], res[2][1]);
    assert!(qec >= 3.0, "{res:?}");
}

#[test]
fn shared_exponential_pair_is_discretely_divergence_free() {
    // The common e^x factor cancels node by node in the area current.
    let g = flat(32);
    let a = normal(&g, |c| c[0].exp() * c[1].cos());
    let b = normal(&g, |c| c[0].exp() * c[1].sin());
    let d = dng_potential_pair(&g, None, &a, None, &b).unwrap().div_norms(&g, 3).unwrap();
    assert!(d.max < 1e-11, "{d:?}");
}

#[test]
fn potential_route_agrees_with_adjoint_route() {
    let cases: Vec<(GeometryCache, fn(&[f64]) -> f64, fn(&[f64]) -> f64)> = vec![
        (great_circle(64), |c| arclength(c[0]).sin(), |c| (2.0 * c[0]).cos()),
        (flat(32), |c| c[0].exp() * c[1].cos(), |c| (c[0] * c[1]).sin()),
        (catenoid_band(24), |c| c[1].tanh() + c[0].cos() / c[1].cosh(), |c| c[1] * c[1] + (2.0 * c[0]).sin()),
    ];
    for (g, f1, f2) in cases {
        let (a, b) = (normal(&g, f1), normal(&g, f2));
        let adj = qec_current_adjoint_pair(&g, &a, &b).unwrap();
        let pot = qec_current_from_potential(&g, &a, &b, MeanCurvature::Extremal).unwrap();
        let d = relative_difference(&pot, &adj);
        assert!(d <= 1e-10, "{d}");
    }
}

fn catenoid_pair(g: &GeometryCache) -> (Field, Field) {
    (
        normal(g, |c| c[1].tanh() + 0.5 * c[0].cos() / c[1].cosh()),
        normal(g, |c| c[1] * c[1].tanh() - 1.0 + 0.3 * c[0].cos() / c[1].cosh()),
    )
}

fn worst(v: &[SymplecticValue], target: f64) -> f64 {
    v.iter().map(|s| (s.omega - target).abs()).fold(0.0, f64::max)
}

#[test]
fn catenoid_jacobi_pair_has_closed_form_omega_on_every_slice() {
    let res: Vec<(f64, f64)> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let g = catenoid_band(n);
            let (a, b) = catenoid_pair(&g);
            let [dng, qec] = <[Current; 2]>::try_from(currents(&g, &a, &b)).unwrap();
            // The Wronskian of the axisymmetric pair is identically one, and
            // the curvature-squared current cancels on any Jacobi pair.
            (worst(&omega_by_slice(&g, &dng, 1, 3).unwrap(), 2.0 * PI), worst(&omega_by_slice(&g, &qec, 1, 3).unwrap(), 0.0))
        })
        .collect();
    assert!(order(res[1].0, res[2].0) >= 1.8, "{res:?}");
    assert!(order(res[1].1, res[2].1) >= 1.8, "{res:?}");
}

fn cylinder(n: usize) -> GeometryCache {
    cache(
        GridSpec::new(vec![Axis::periodic(0.0, 2.0 * PI, n), Axis::open(0.0, 2.0, n + 1)]).unwrap(),
        BackgroundModel::euclidean(3),
        Parametrization::Cylinder { radius: 1.0 },
    )
}

#[test]
fn cylinder_generalized_kernel_pair_has_constant_omega() {
    // cos z is a Jacobi field and z cos z is sent to one by the Jacobi operator.
    let res: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let g = cylinder(n);
            let a = normal(&g, |c| c[1].cos());
            let b = normal(&g, |c| c[1] * c[1].cos());
            let qec = qec_current_adjoint_pair(&g, &a, &b).unwrap();
            worst(&omega_by_slice(&g, &qec, 1, 3).unwrap(), -4.0 * PI)
        })
        .collect();
    assert!(res[2] < 1e-2 * 4.0 * PI && order(res[1], res[2]) >= 1.8, "{res:?}");
}

