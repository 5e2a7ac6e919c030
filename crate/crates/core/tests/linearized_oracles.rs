use brane_core::background::BackgroundModel;
use brane_core::embedding::Parametrization;
use brane_core::geometry::GeometryCache;
use brane_core::grid::{Axis, Field, GridSpec, IndexKind};
use brane_core::linearized::*;
use std::f64::consts::PI;

const NRM: IndexKind = IndexKind::Normal;

fn cache(grid: GridSpec, bg: BackgroundModel, p: Parametrization) -> GeometryCache {
    let emb = p.sample(&grid, &bg).unwrap();
    GeometryCache::new(&grid, &bg, &emb).unwrap()
}

fn sphere(n: usize) -> GeometryCache {
    cache(
        GridSpec::new(vec![Axis::pole(n, 1), Axis::periodic(0.0, 2.0 * PI, 2 * n)]).unwrap(),
        BackgroundModel::euclidean(3),
        Parametrization::Sphere { radius: 1.0 },
    )
}

fn great_circle(n: usize) -> GeometryCache {
    cache(
        GridSpec::new(vec![Axis::periodic(0.0, 2.0 * PI, n)]).unwrap(),
        BackgroundModel::constant_curvature(2, 1.0),
        Parametrization::Circle { center: vec![1.0, 0.0], radius: 5f64.sqrt() },
    )
}

fn catenoid_band(n: usize) -> GeometryCache {
    cache(
        GridSpec::new(vec![Axis::periodic(0.0, 2.0 * PI, 2 * n), Axis::open(-1.0, 1.0, n + 1)]).unwrap(),
        BackgroundModel::euclidean(3),
        Parametrization::Catenoid { waist: 1.0 },
    )
}

fn norm(g: &GeometryCache, f: &Field) -> f64 {
    inner_product(g, f, f).unwrap().sqrt()
}

/// Largest `‖P²v‖` over the resolved kernel of the assembled `P`.
fn persistence(g: &GeometryCache, expected: usize) -> f64 {
    let op = assemble(OpKind::Jacobi, g, DOF_BUDGET).unwrap();
    let ker = kernel_vectors(g, &op, kernel_threshold(g));
    assert_eq!(ker.dim(), expected);
    ker.vectors.iter().map(|(_, v)| norm(g, &p_squared_expanded(g, v).unwrap())).fold(0.0, f64::max)
}

fn order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

#[test]
fn sphere_kernel_persists_under_the_square() {
    // Q and A are constant here, so the expanded square is P∘P and the
    // decay is faster than second order.
    let e: Vec<f64> = [12, 24].iter().map(|&n| persistence(&sphere(n), 3)).collect();
    let p = order(e[0], e[1], 2.0);
    assert!(p >= 1.8, "{e:?} {p}");
}

#[test]
fn great_circle_kernel_persists_under_the_square() {
    let e: Vec<f64> = [32, 64, 128].iter().map(|&n| persistence(&great_circle(n), 2)).collect();
    let p = order(e[1], e[2], 2.0);
    assert!(p >= 1.8, "{e:?} {p}");
}

fn bump(v: f64) -> f64 {
    let t = v / 0.7;
    if t.abs() >= 1.0 { 0.0 } else { (1.0 - t * t).powi(4) }
}

fn pair(g: &GeometryCache) -> (Vec<f64>, Vec<f64>) {
    let f = |h: &dyn Fn(&[f64]) -> f64| {
        Field::from_fn(&g.grid, &[(NRM, 1)], |k, o| o[0] = h(&g.grid.coords(k))).into_data()
    };
    (
        f(&|c| bump(c[1]) * (c[0].cos() + 0.3 * c[1])),
        f(&|c| bump(c[1] - 0.1) * (c[0].cos() + (2.0 * c[0]).sin()) * (1.0 + c[1])),
    )
}

#[test]
fn jacobi_operator_is_self_adjoint_on_the_catenoid() {
    for n in [16, 32] {
        let g = catenoid_band(n);
        let op = assemble(OpKind::Jacobi, &g, DOF_BUDGET).unwrap();
        let (u, v) = pair(&g);
        assert!(op.pair_asymmetry(&u, &v) < 1e-12);
        assert!(op.matrix_asymmetry() < 1e-12);
    }
}

#[test]
fn expanded_square_is_self_adjoint_to_second_order() {
    let e: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| {
            let g = catenoid_band(n);
            let op = assemble(OpKind::PSquaredExpanded, &g, DOF_BUDGET).unwrap();
            let (u, v) = pair(&g);
            op.pair_asymmetry(&u, &v)
        })
        .collect();
    let p = order(e[1], e[2], 2.0);
    assert!((1.8..2.2).contains(&p), "{e:?} {p}");
}

#[test]
fn flat_jacobi_operator_is_symmetric() {
    let g = cache(
        GridSpec::new(vec![Axis::open(0.0, 1.0, 64), Axis::open(0.0, 1.0, 64)]).unwrap(),
        BackgroundModel::euclidean(3),
        Parametrization::Plane { dim: 2, ambient: 3 },
    );
    let op = assemble(OpKind::Jacobi, &g, DOF_BUDGET).unwrap();
    let f = |h: &dyn Fn(f64, f64) -> f64| {
        Field::from_fn(&g.grid, &[(NRM, 1)], |k, o| {
            let c = g.grid.coords(k);
            o[0] = bump(2.0 * c[0] - 1.0) * bump(2.0 * c[1] - 1.0) * h(c[0], c[1]);
        })
        .into_data()
    };
    let (u, v) = (f(&|x, y| (3.0 * x).sin() + y), f(&|x, y| (x * y).exp()));
    assert!(op.pair_asymmetry(&u, &v) <= 1e-10);
}
