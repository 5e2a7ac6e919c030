//! Ambient spacetimes with closed-form metric, connection and curvature.
//!
//! Two families are provided: flat space of arbitrary signature, and the
//! constant-curvature family in the conformally flat chart
//! `g = Ω² η`, `Ω = 1 / (1 + κ η(x,x) / 4)`. For Euclidean signature and
//! `κ > 0` this is the stereographic chart of a round sphere of radius
//! `1/√κ`; for `κ < 0` it is the Poincaré ball.
//!
//! Tensor layouts are flat row-major `Vec<f64>`:
//! metric `g[μ*N + ν]`, Christoffel `Γ^μ_{νρ}` at `[(μ*N + ν)*N + ρ]`,
//! Riemann `R_{μνρσ}` (all indices lowered) at `[((μ*N + ν)*N + ρ)*N + σ]`.

use crate::error::{BraneError, Result};

/// Smallest admissible conformal denominator `1 + κ η(x,x)/4`.
pub const CHART_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackgroundKind {
    Flat,
    ConstantCurvature,
}

/// Chart coordinates of an ambient point.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimePoint(pub Vec<f64>);

#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundModel {
    kind: BackgroundKind,
    signature: Vec<f64>,
    kappa: f64,
}

impl BackgroundModel {
    pub fn new(kind: BackgroundKind, signature: Vec<f64>, kappa: f64) -> Result<Self> {
        if signature.is_empty() {
            return Err(BraneError::Parameter("empty signature".into()));
        }
        if signature.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(BraneError::Parameter(format!(
                "signature entries must be ±1, got {signature:?}"
            )));
        }
        if !kappa.is_finite() {
            return Err(BraneError::Parameter("curvature must be finite".into()));
        }
        let kappa = match kind {
            BackgroundKind::Flat => 0.0,
            BackgroundKind::ConstantCurvature => kappa,
        };
        Ok(Self { kind, signature, kappa })
    }

    pub fn euclidean(n: usize) -> Self {
        Self { kind: BackgroundKind::Flat, signature: vec![1.0; n], kappa: 0.0 }
    }

    /// Flat space with signature `(−, +, …, +)`.
    pub fn minkowski(n: usize) -> Self {
        let mut signature = vec![1.0; n];
        signature[0] = -1.0;
        Self { kind: BackgroundKind::Flat, signature, kappa: 0.0 }
    }

    /// Euclidean-signature constant-curvature space (sphere for κ>0, hyperbolic for κ<0).
    pub fn constant_curvature(n: usize, kappa: f64) -> Self {
        Self { kind: BackgroundKind::ConstantCurvature, signature: vec![1.0; n], kappa }
    }

    pub fn kind(&self) -> BackgroundKind {
        self.kind
    }

    pub fn signature(&self) -> &[f64] {
        &self.signature
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.signature.len()
    }

    pub fn is_flat(&self) -> bool {
        self.kappa == 0.0
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(BraneError::Shape(format!(
                "point has {} coordinates, background has {}",
                p.len(),
                self.dim()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(BraneError::Domain { point: p.to_vec(), denominator: f64::NAN });
        }
        Ok(())
    }

    /// `1 + κ η(x,x)/4`, rejected when it approaches the conformal pole.
    fn denominator(&self, p: &[f64]) -> Result<f64> {
        self.check_point(p)?;
        if self.kappa == 0.0 {
            return Ok(1.0);
        }
        let q: f64 = p.iter().zip(&self.signature).map(|(x, s)| s * x * x).sum();
        let den = 1.0 + 0.25 * self.kappa * q;
        if !(den > CHART_EPS) {
            return Err(BraneError::Domain { point: p.to_vec(), denominator: den });
        }
        Ok(den)
    }

    /// Conformal factor Ω at `p` (1 for flat backgrounds).
    pub fn conformal_factor(&self, p: &[f64]) -> Result<f64> {
        Ok(1.0 / self.denominator(p)?)
    }

    pub fn in_domain(&self, p: &[f64]) -> bool {
        self.denominator(p).is_ok()
    }

    pub fn metric_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        let omega = self.conformal_factor(p)?;
        let n = self.dim();
        let mut g = vec![0.0; n * n];
        for mu in 0..n {
            g[mu * n + mu] = omega * omega * self.signature[mu];
        }
        Ok(g)
    }

    pub fn christoffel_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        let den = self.denominator(p)?;
        let n = self.dim();
        let mut gamma = vec![0.0; n * n * n];
        if self.kappa == 0.0 {
            return Ok(gamma);
        }
        // g = e^{2σ} η with σ = −ln(den); ∂_λσ = −(κ/2) η_λλ x^λ / den.
        let dsigma: Vec<f64> = (0..n)
            .map(|l| -0.5 * self.kappa * self.signature[l] * p[l] / den)
            .collect();
        for mu in 0..n {
            for nu in 0..n {
                for rho in 0..n {
                    let mut v = 0.0;
                    if mu == nu {
                        v += dsigma[rho];
                    }
                    if mu == rho {
                        v += dsigma[nu];
                    }
                    if nu == rho {
                        v -= self.signature[nu] * self.signature[mu] * dsigma[mu];
                    }
                    gamma[(mu * n + nu) * n + rho] = v;
                }
            }
        }
        Ok(gamma)
    }

    /// `R_{μνρσ} = κ (g_{μρ} g_{νσ} − g_{μσ} g_{νρ})`.
    pub fn riemann_at(&self, p: &[f64]) -> Result<Vec<f64>> {
        let g = self.metric_at(p)?;
        let n = self.dim();
        let mut r = vec![0.0; n * n * n * n];
        if self.kappa == 0.0 {
            return Ok(r);
        }
        for mu in 0..n {
            for nu in 0..n {
                for rho in 0..n {
                    for sig in 0..n {
                        r[((mu * n + nu) * n + rho) * n + sig] = self.kappa
                            * (g[mu * n + rho] * g[nu * n + sig] - g[mu * n + sig] * g[nu * n + rho]);
                    }
                }
            }
        }
        Ok(r)
    }

    /// Ambient inner product `g(u, v)` at `p`.
    pub fn inner(&self, p: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let omega = self.conformal_factor(p)?;
        Ok(omega * omega * dot_signature(&self.signature, u, v))
    }
}

pub(crate) fn dot_signature(sig: &[f64], u: &[f64], v: &[f64]) -> f64 {
    sig.iter().zip(u).zip(v).map(|((s, a), b)| s * a * b).sum()
}

/// Contract a lowered Riemann tensor in the slot order
/// `g(R(Y1,Y2)Y3,Y4) = R_{μναβ} Y1^ν Y2^μ Y3^α Y4^β`.
pub fn riemann_contract(r: &[f64], n: usize, y1: &[f64], y2: &[f64], y3: &[f64], y4: &[f64]) -> f64 {
    let mut acc = 0.0;
    for mu in 0..n {
        if y2[mu] == 0.0 {
            continue;
        }
        for nu in 0..n {
            if y1[nu] == 0.0 {
                continue;
            }
            let w = y2[mu] * y1[nu];
            let base = (mu * n + nu) * n * n;
            for al in 0..n {
                if y3[al] == 0.0 {
                    continue;
                }
                let row = &r[base + al * n..base + al * n + n];
                let s: f64 = row.iter().zip(y4).map(|(a, b)| a * b).sum();
                acc += w * y3[al] * s;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Centered difference of the metric, Richardson-combined over (h, h/2).
    fn fd_christoffel(bg: &BackgroundModel, p: &[f64], h: f64) -> Vec<f64> {
        let n = bg.dim();
        let dg = |step: f64| -> Vec<f64> {
            // dg[λ][μ][ν] = ∂_λ g_{μν}
            let mut out = vec![0.0; n * n * n];
            for l in 0..n {
                let mut pp = p.to_vec();
                let mut pm = p.to_vec();
                pp[l] += step;
                pm[l] -= step;
                let gp = bg.metric_at(&pp).unwrap();
                let gm = bg.metric_at(&pm).unwrap();
                for k in 0..n * n {
                    out[l * n * n + k] = (gp[k] - gm[k]) / (2.0 * step);
                }
            }
            out
        };
        let d1 = dg(h);
        let d2 = dg(h / 2.0);
        let d: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| (4.0 * b - a) / 3.0).collect();
        let g = bg.metric_at(p).unwrap();
        let mut out = vec![0.0; n * n * n];
        for mu in 0..n {
            let ginv = 1.0 / g[mu * n + mu];
            for nu in 0..n {
                for rho in 0..n {
                    let v = d[nu * n * n + mu * n + rho] + d[rho * n * n + mu * n + nu]
                        - d[mu * n * n + nu * n + rho];
                    out[(mu * n + nu) * n + rho] = 0.5 * ginv * v;
                }
            }
        }
        out
    }

    #[test]
    fn flat_metric_is_signature() {
        let bg = BackgroundModel::euclidean(3);
        assert_eq!(bg.metric_at(&[0.3, -2.0, 5.0]).unwrap(), vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        let mk = BackgroundModel::minkowski(4);
        assert!(mk.christoffel_at(&[1.0, 2.0, 3.0, 4.0]).unwrap().iter().all(|&v| v == 0.0));
        assert!(mk.riemann_at(&[1.0, 2.0, 3.0, 4.0]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conformal_metric_values() {
        let bg = BackgroundModel::constant_curvature(3, 1.0);
        let g0 = bg.metric_at(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(g0, vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        // Ω(2,0,0) = 1/(1 + 4/4) = 1/2
        let g = bg.metric_at(&[2.0, 0.0, 0.0]).unwrap();
        for (k, v) in g.iter().enumerate() {
            let expect = if k % 4 == 0 { 0.25 } else { 0.0 };
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn hyperbolic_chart_rejects_pole() {
        let bg = BackgroundModel::constant_curvature(2, -1.0);
        assert!(bg.metric_at(&[0.5, 0.5]).is_ok());
        let err = bg.metric_at(&[2.0, 0.0]).unwrap_err();
        assert!(matches!(err, BraneError::Domain { .. }));
        assert!(bg.metric_at(&[3.0, 0.0]).is_err());
    }

    #[test]
    fn christoffel_matches_metric_differences_to_second_order() {
        let bg = BackgroundModel::constant_curvature(3, 1.0);
        let p = [1.0, 0.0, 0.0];
        let exact = bg.christoffel_at(&p).unwrap();
        // Richardson pair at h = 1e-3 is accurate well beyond 1e-8.
        let fd = fd_christoffel(&bg, &p, 1e-3);
        for (a, b) in exact.iter().zip(&fd) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        // plain centered differences converge at second order
        let n = 3;
        let err = |h: f64| {
            let mut worst: f64 = 0.0;
            for l in 0..n {
                let mut pp = p.to_vec();
                let mut pm = p.to_vec();
                pp[l] += h;
                pm[l] -= h;
                let gp = bg.metric_at(&pp).unwrap();
                let gm = bg.metric_at(&pm).unwrap();
                let g = bg.metric_at(&p).unwrap();
                // Γ_{l l l} with all indices along l only involves ∂_l g_ll
                let fd = 0.5 / g[l * n + l] * (gp[l * n + l] - gm[l * n + l]) / (2.0 * h);
                worst = worst.max((fd - exact[(l * n + l) * n + l]).abs());
            }
            worst
        };
        let (e1, e2) = (err(0.02), err(0.01));
        let order = (e1 / e2).log2();
        assert!((1.8..=2.2).contains(&order), "order {order}");
    }

    #[test]
    fn riemann_symmetries_and_sectional_curvature() {
        for kappa in [1.0, -1.0, 0.5] {
            let bg = BackgroundModel::constant_curvature(3, kappa);
            let p = [0.3, -0.2, 0.4];
            let r = bg.riemann_at(&p).unwrap();
            let n = 3;
            let at = |a: usize, b: usize, c: usize, d: usize| r[((a * n + b) * n + c) * n + d];
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        for d in 0..n {
                            assert!((at(a, b, c, d) + at(b, a, c, d)).abs() < 1e-14);
                            assert!((at(a, b, c, d) + at(a, b, d, c)).abs() < 1e-14);
                            assert!((at(a, b, c, d) - at(c, d, a, b)).abs() < 1e-14);
                            let bianchi = at(a, b, c, d) + at(a, c, d, b) + at(a, d, b, c);
                            assert!(bianchi.abs() < 1e-12);
                        }
                    }
                }
            }
            // orthonormal pair along axes 0, 1
            let omega = bg.conformal_factor(&p).unwrap();
            let mut x = vec![0.0; 3];
            let mut y = vec![0.0; 3];
            x[0] = 1.0 / omega;
            y[1] = 1.0 / omega;
            let sec = riemann_contract(&r, n, &y, &x, &x, &y);
            assert!((sec - kappa).abs() < 1e-12, "sectional {sec}");
        }
    }

    #[test]
    fn negative_curvature_component_at_origin() {
        let bg = BackgroundModel::constant_curvature(2, -1.0);
        let r = bg.riemann_at(&[0.0, 0.0]).unwrap();
        // R_{1212} with 1-based axes = R[0,1,0,1]
        assert!((r[((0 * 2 + 1) * 2 + 0) * 2 + 1] + 1.0).abs() < 1e-15);
    }
}
