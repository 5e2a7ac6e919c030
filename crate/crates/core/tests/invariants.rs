//! Structural invariants over randomly drawn shapes and fields.

use brane_core::actions::dng_action;
use brane_core::background::BackgroundModel;
use brane_core::deformation::{deform_mean_curvature, deform_measure};
use brane_core::embedding::{Embedding, Parametrization};
use brane_core::geometry::GeometryCache;
use brane_core::grid::{Axis, Field, GridSpec, IndexKind};
use brane_core::linearized::{assemble, jacobi_apply, OpKind, DOF_BUDGET};
use brane_core::symplectic::*;
use proptest::prelude::*;
use std::f64::consts::PI;

const NRM: IndexKind = IndexKind::Normal;

fn torus(major: f64, minor: f64) -> GeometryCache {
    let grid = GridSpec::new(vec![Axis::periodic(0.0, 2.0 * PI, 16), Axis::periodic(0.0, 2.0 * PI, 8)]).unwrap();
    let bg = BackgroundModel::euclidean(3);
    let emb = Parametrization::Torus { major, minor }.sample(&grid, &bg).unwrap();
    GeometryCache::new(&grid, &bg, &emb).unwrap()
}

fn field(g: &GeometryCache, c: &[f64; 4]) -> Field {
    Field::from_fn(&g.grid, &[(NRM, 1)], |k, o| {
        let x = g.grid.coords(k);
        o[0] = c[0] + c[1] * x[0].sin() + c[2] * (x[0] + x[1]).cos() + c[3] * (2.0 * x[1]).sin();
    })
}

fn close(a: &Field, b: &Field, tol: f64) -> bool {
    a.axpy(-1.0, b).unwrap().max_abs() <= tol * a.max_abs().max(b.max_abs()).max(1.0)
}

fn coeffs() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.0..1.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn scalars_are_invariant_under_rigid_motions(
        major in 1.5..3.0f64, minor in 0.3..1.0f64,
        angle in 0.0..(2.0 * PI), shift in prop::array::uniform3(-2.0..2.0f64),
    ) {
        let g = torus(major, minor);
        let (c, s) = (angle.cos(), angle.sin());
        let moved = Field::from_fn(&g.grid, &[(IndexKind::Ambient, 3)], |k, o| {
            let p = g.embedding.point(k);
            o.copy_from_slice(&[c * p[0] - s * p[2] + shift[0], p[1] + shift[1], s * p[0] + c * p[2] + shift[2]]);
        });
        let emb = Embedding::new(&g.grid, &g.background, moved).unwrap();
        let h = GeometryCache::new(&g.grid, &g.background, &emb).unwrap();
        prop_assert!(close(g.sqrt_g(), h.sqrt_g(), 1e-12));
        prop_assert!(close(&g.q, &h.q, 1e-10));
        let k2 = |g: &GeometryCache| Field::from_fn(&g.grid, &[], |k, o| o[0] = g.k_mean.at(k)[0].powi(2));
        prop_assert!(close(&k2(&g), &k2(&h), 1e-10));
        prop_assert!((dng_action(&g, 1.0) - dng_action(&h, 1.0)).abs() <= 1e-12 * dng_action(&g, 1.0).abs());
    }

    #[test]
    fn deformations_are_linear(a in coeffs(), b in coeffs(), s in -2.0..2.0f64) {
        let g = torus(2.0, 0.7);
        let (u, v) = (field(&g, &a), field(&g, &b));
        let w = u.axpy(s, &v).unwrap();
        for op in [
            |g: &GeometryCache, f: &Field| deform_measure(g, f).unwrap(),
            |g: &GeometryCache, f: &Field| deform_mean_curvature(g, f).unwrap(),
            |g: &GeometryCache, f: &Field| jacobi_apply(g, f).unwrap(),
        ] {
            let sum = op(&g, &u).axpy(s, &op(&g, &v)).unwrap();
            prop_assert!(close(&op(&g, &w), &sum, 1e-12));
        }
    }

    #[test]
    fn omega_is_antisymmetric_and_bilinear(a in coeffs(), b in coeffs(), c in coeffs(), s in -2.0..2.0f64, slice in 0usize..8) {
        let g = torus(2.0, 0.7);
        let (u, v, w) = (field(&g, &a), field(&g, &b), field(&g, &c));
        let spec = SliceSpec { axis: 1, index: slice };
        let om = |x: &Field, y: &Field| {
            [
                symplectic_form(&g, &dng_potential_pair(&g, None, x, None, y).unwrap(), spec).unwrap().omega,
                symplectic_form(&g, &qec_current_adjoint_pair(&g, x, y).unwrap(), spec).unwrap().omega,
            ]
        };
        let (uv, vu, uw, uu) = (om(&u, &v), om(&v, &u), om(&u, &w), om(&u, &u));
        let mixed = om(&u, &v.axpy(s, &w).unwrap());
        for i in 0..2 {
            let scale = uv[i].abs().max(uw[i].abs()).max(1.0);
            prop_assert_eq!(uv[i], -vu[i]);
            prop_assert_eq!(uu[i], 0.0);
            prop_assert!((mixed[i] - uv[i] - s * uw[i]).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn closed_torus_jacobi_operator_is_symmetric(major in 1.5..3.0f64, minor in 0.3..1.0f64) {
        let g = torus(major, minor);
        let op = assemble(OpKind::Jacobi, &g, DOF_BUDGET).unwrap();
        let scale = op.max_abs_row_sum();
        prop_assert!(op.matrix_asymmetry() <= 1e-12 * scale, "{}", op.matrix_asymmetry());
    }
}
