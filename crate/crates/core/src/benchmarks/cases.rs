//! Closed-form data of the benchmark problems, evaluated on coordinate jets.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::diff_engine::Jet2;

type J = Jet2<f64>;

/// Rounded standard value of the tangency offset in the piecewise 1D example.
pub const BETA_PRINTED: f64 = 0.02376;
/// Rounded standard value of the free-boundary radius in the 2D obstacle example.
pub const R_STAR_PRINTED: f64 = 0.6979651482;
/// Exponent in the piecewise 1D obstacle.
pub const PIECEWISE_ALPHA: f64 = 0.4;

// exp(−1/z) is flushed to zero below this argument.
const MU_FLUSH: f64 = 1e-3 / 709.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BenchmarkKind {
    /// `−u'' ` on (0,1) with a symmetric parabolic obstacle.
    Obstacle1dSym,
    /// `−u'' + u'` on (−2,2) with obstacle `1 − x²`.
    Obstacle1dNonsym,
    /// `−u''` on (−1,1) with a smooth-bump obstacle of limited regularity.
    Obstacle1dPiecewise { beta: f64 },
    /// `−Δu` on (−2,2)² with a hemispherical obstacle.
    Obstacle2d { r_star: f64 },
    /// Elasto-plastic torsion of a disk: `|∇u| ≤ 1`, `−Δu = c` where inactive.
    Torsion { c: f64, radius: f64 },
    /// Bingham flow in a disk: `−Δu` with yield stress `τ` and pressure drop `c`.
    Bingham { c: f64, tau: f64, radius: f64 },
    /// `−Δu + u` on the unit square with friction on `{1} × [0,1]`.
    Friction { tau: f64 },
}

fn one_minus(x: &J) -> J {
    x.scale(-1.0).add_scalar(1.0)
}

fn sq(x: &J) -> J {
    x.mul_jet(x)
}

fn radius_sq(xs: &[J]) -> J {
    &sq(&xs[0]) + &sq(&xs[1])
}

fn zero_vec(d: usize) -> Vec<J> {
    vec![J::constant(d, 0.0); d]
}

fn sym_kink() -> f64 {
    1.0 / (2.0 * 2f64.sqrt())
}

fn sym_u(x: &J) -> J {
    let s = sym_kink();
    if x.value < s {
        x.scale(100.0 - 50.0 * 2f64.sqrt())
    } else if x.value < 1.0 - s {
        x.mul_jet(&one_minus(x)).scale(100.0).add_scalar(-12.5)
    } else {
        sym_u(&one_minus(x))
    }
}

fn sym_psi(x: f64) -> f64 {
    if x <= 0.25 {
        100.0 * x * x
    } else if x <= 0.5 {
        100.0 * x * (1.0 - x) - 12.5
    } else {
        sym_psi(1.0 - x)
    }
}

fn nonsym_slope() -> f64 {
    4.0 - 2.0 * 3f64.sqrt()
}

fn nonsym_u(x: &J) -> J {
    let s3 = 3f64.sqrt();
    if x.value < -2.0 + s3 {
        x.add_scalar(2.0).scale(nonsym_slope())
    } else if x.value < 2.0 - s3 {
        one_minus(&sq(x))
    } else {
        x.scale(-1.0).add_scalar(2.0).scale(nonsym_slope())
    }
}

fn nonsym_source(x: f64) -> f64 {
    let s3 = 3f64.sqrt();
    if x < -2.0 + s3 {
        nonsym_slope()
    } else if x <= 2.0 - s3 {
        -(2.0 * s3 - 2.0)
    } else {
        -nonsym_slope()
    }
}

/// `exp(−1/z)` for `z > 0`, else 0.
fn mu(z: &J) -> J {
    if z.value <= MU_FLUSH {
        z.constant_like(0.0)
    } else {
        z.recip().scale(-1.0).exp()
    }
}

/// Smooth cutoff: 1 for `|y| ≤ 0.3`, 0 for `|y| ≥ 0.4`.
fn bump(y: &J) -> J {
    let ay = y.abs();
    let a = mu(&ay.scale(-1.0).add_scalar(0.4));
    let b = mu(&ay.add_scalar(-0.3));
    a.div_jet(&(&a + &b))
}

/// The piecewise obstacle. Its second derivative is unbounded at `x = ±½`;
/// there the jet carries the value only.
pub(crate) fn piecewise_psi(x: &J) -> J {
    let y = if x.value <= 0.0 { x.add_scalar(0.5) } else { x.add_scalar(-0.5) };
    if y.value == 0.0 {
        return x.constant_like(1.0);
    }
    let cap = y.abs().powf(2.0 - PIECEWISE_ALPHA).scale(-12.0).add_scalar(1.5);
    bump(&y).mul_jet(&cap).add_scalar(-0.5)
}

fn psi_value(x: f64) -> f64 {
    piecewise_psi(&J::constant(1, x)).value
}

fn piecewise_u(x: &J, beta: f64) -> J {
    let v = x.value;
    if v < -beta - 0.5 {
        x.add_scalar(1.0).scale(psi_value(-beta - 0.5) / (0.5 - beta))
    } else if v < -0.5 {
        piecewise_psi(x)
    } else if v < 0.5 {
        x.constant_like(1.0)
    } else if v < 0.5 + beta {
        piecewise_psi(x)
    } else {
        x.add_scalar(-1.0).scale(psi_value(beta + 0.5) / (beta - 0.5))
    }
}

/// Tangency condition `ψ(x₀) − (0.5 − β)ψ'(x₀)` at `x₀ = −β − ½`.
fn tangency_defect(beta: f64) -> f64 {
    let x0 = Jet2::lift(&[-beta - 0.5], 0).expect("1D");
    let p = piecewise_psi(&x0);
    p.value - (0.5 - beta) * p.grad[0]
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves the tangency condition of the piecewise 1D example for `β ∈ (0, 0.3)`.
pub fn refine_beta() -> f64 {
    bisect(tangency_defect, 1e-3, 0.3)
}

/// Solves `r²(1 − ln(r/2)) = 1` for `r ∈ (0, 1)`.
pub fn refine_r_star() -> f64 {
    bisect(|r| r * r * (1.0 - (r / 2.0).ln()) - 1.0, 0.1, 1.0)
}

fn obstacle2d_u(xs: &[J], r_star: f64) -> J {
    let r2 = radius_sq(xs);
    if r2.value <= r_star * r_star {
        one_minus(&r2).sqrt()
    } else {
        // ln(|x|/2) = ½ ln|x|² − ln 2
        let k = -r_star * r_star / (1.0 - r_star * r_star).sqrt();
        r2.ln().scale(0.5).add_scalar(-LN_2).scale(k)
    }
}

/// Transfinite interpolation of the exact solution from the edges of
/// `[−2,2]²`.
fn obstacle2d_g(xs: &[J], r_star: f64) -> J {
    let (a, b, c, d) = (-2.0, 2.0, -2.0, 2.0);
    let u = |p: &J, q: &J| obstacle2d_u(&[p.clone(), q.clone()], r_star);
    let uc = |p: f64, q: f64| obstacle2d_u(&[J::constant(2, p), J::constant(2, q)], r_star).value;
    let (x1, x2) = (&xs[0], &xs[1]);
    let ca = x1.constant_like(a);
    let cb = x1.constant_like(b);
    let cc = x1.constant_like(c);
    let cd = x1.constant_like(d);
    let w1 = x1.add_scalar(-a).scale(1.0 / (b - a));
    let w2 = x2.add_scalar(-c).scale(1.0 / (d - c));
    let v1 = one_minus(&w1);
    let v2 = one_minus(&w2);
    let edges = &(&v1.mul_jet(&u(&ca, x2)) + &w1.mul_jet(&u(&cb, x2)))
        + &(&v2.mul_jet(&u(x1, &cc)) + &w2.mul_jet(&u(x1, &cd)));
    let corners = &(&v1.mul_jet(&v2).scale(uc(a, c)) + &v1.mul_jet(&w2).scale(uc(a, d)))
        + &(&w1.mul_jet(&v2).scale(uc(b, c)) + &w1.mul_jet(&w2).scale(uc(b, d)));
    &edges - &corners
}

fn torsion_u(xs: &[J], c: f64, radius: f64) -> J {
    let r2 = radius_sq(xs);
    let elastic = |r2: &J| r2.scale(-1.0).add_scalar(radius * radius).scale(c / 4.0);
    if c * radius <= 2.0 {
        return elastic(&r2);
    }
    let r0 = 2.0 / c;
    if r2.value >= r0 * r0 {
        r2.sqrt().scale(-1.0).add_scalar(radius)
    } else {
        elastic(&r2).add_scalar(-c / 4.0 * (radius - r0).powi(2))
    }
}

/// Multiplier with `∇u − ηλ` projecting back onto `∇u`: zero where
/// `|∇u| < 1`, `(cr/2 − 1)x/r` on the plastic ring.
fn torsion_lambda(xs: &[J], c: f64, radius: f64) -> Vec<J> {
    let r2 = radius_sq(xs);
    let r0 = 2.0 / c;
    if c * radius <= 2.0 || r2.value < r0 * r0 {
        return zero_vec(2);
    }
    let r = r2.sqrt();
    xs.iter().map(|x| &x.scale(c / 2.0) - &x.div_jet(&r)).collect()
}

fn bingham_plug(c: f64, tau: f64) -> f64 {
    2.0 * tau / c
}

fn bingham_u(xs: &[J], c: f64, tau: f64, radius: f64) -> J {
    if c * radius <= 2.0 * tau {
        return xs[0].constant_like(0.0);
    }
    let rp = bingham_plug(c, tau);
    let r2 = radius_sq(xs);
    if r2.value <= rp * rp {
        xs[0].constant_like((radius - rp) / 2.0 * (c * (radius + rp) / 2.0 - 2.0 * tau))
    } else {
        let r = r2.sqrt();
        r.scale(-0.5)
            .add_scalar(radius / 2.0)
            .mul_jet(&r.scale(c / 2.0).add_scalar(c * radius / 2.0 - 2.0 * tau))
    }
}

/// `(c/2)x` in the plug, `τx/|x|` in the yielded region.
fn bingham_lambda(xs: &[J], c: f64, tau: f64, radius: f64) -> Vec<J> {
    let rp = bingham_plug(c, tau);
    let r2 = radius_sq(xs);
    if c * radius <= 2.0 * tau || r2.value <= rp * rp {
        return xs.iter().map(|x| x.scale(c / 2.0)).collect();
    }
    let r = r2.sqrt();
    xs.iter().map(|x| x.div_jet(&r).scale(tau)).collect()
}

fn friction_u(xs: &[J]) -> J {
    let s1 = 1f64.sin();
    let left = &xs[0].sin() - &xs[0].scale(s1);
    left.mul_jet(&xs[1].scale(2.0 * PI).sin())
}

fn friction_source(x: &[f64]) -> f64 {
    let s1 = 1f64.sin();
    let k = 4.0 * PI * PI;
    ((2.0 + k) * x[0].sin() - (1.0 + k) * x[0] * s1) * (2.0 * PI * x[1]).sin()
}

impl BenchmarkKind {
    pub fn dim(&self) -> usize {
        match self {
            BenchmarkKind::Obstacle1dSym
            | BenchmarkKind::Obstacle1dNonsym
            | BenchmarkKind::Obstacle1dPiecewise { .. } => 1,
            _ => 2,
        }
    }

    /// Exact solution on coordinate jets.
    pub fn u_jet(&self, xs: &[J]) -> J {
        match *self {
            BenchmarkKind::Obstacle1dSym => sym_u(&xs[0]),
            BenchmarkKind::Obstacle1dNonsym => nonsym_u(&xs[0]),
            BenchmarkKind::Obstacle1dPiecewise { beta } => piecewise_u(&xs[0], beta),
            BenchmarkKind::Obstacle2d { r_star } => obstacle2d_u(xs, r_star),
            BenchmarkKind::Torsion { c, radius } => torsion_u(xs, c, radius),
            BenchmarkKind::Bingham { c, tau, radius } => bingham_u(xs, c, tau, radius),
            BenchmarkKind::Friction { .. } => friction_u(xs),
        }
    }

    pub fn obstacle(&self, x: &[f64]) -> Option<f64> {
        match *self {
            BenchmarkKind::Obstacle1dSym => Some(sym_psi(x[0])),
            BenchmarkKind::Obstacle1dNonsym => Some(1.0 - x[0] * x[0]),
            BenchmarkKind::Obstacle1dPiecewise { .. } => Some(psi_value(x[0])),
            BenchmarkKind::Obstacle2d { .. } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                Some(if r2 <= 1.0 { (1.0 - r2).sqrt() } else { -1.0 })
            }
            _ => None,
        }
    }

    pub fn source(&self, x: &[f64]) -> f64 {
        match *self {
            BenchmarkKind::Obstacle1dNonsym => nonsym_source(x[0]),
            BenchmarkKind::Torsion { c, .. } | BenchmarkKind::Bingham { c, .. } => c,
            BenchmarkKind::Friction { .. } => friction_source(x),
            _ => 0.0,
        }
    }

    /// The factor `h` of the surrogate, vanishing on the Dirichlet boundary.
    pub fn h_jet(&self, xs: &[J]) -> J {
        match *self {
            BenchmarkKind::Obstacle1dSym => xs[0].mul_jet(&one_minus(&xs[0])),
            BenchmarkKind::Obstacle1dNonsym => xs[0]
                .add_scalar(2.0)
                .mul_jet(&xs[0].scale(-1.0).add_scalar(2.0))
                .scale(0.25),
            BenchmarkKind::Obstacle1dPiecewise { .. } => one_minus(&sq(&xs[0])),
            BenchmarkKind::Obstacle2d { .. } => {
                let side = |x: &J| x.add_scalar(2.0).mul_jet(&x.scale(-1.0).add_scalar(2.0));
                side(&xs[0]).mul_jet(&side(&xs[1])).scale(1.0 / 16.0)
            }
            BenchmarkKind::Torsion { radius, .. } | BenchmarkKind::Bingham { radius, .. } => {
                radius_sq(xs).scale(-1.0).add_scalar(radius * radius)
            }
            BenchmarkKind::Friction { .. } => xs[0]
                .mul_jet(&xs[1].mul_jet(&one_minus(&xs[1])))
                .scale(4.0),
        }
    }

    /// The lift `g` of the boundary values.
    pub fn g_jet(&self, xs: &[J]) -> J {
        match *self {
            BenchmarkKind::Obstacle2d { r_star } => obstacle2d_g(xs, r_star),
            _ => xs[0].constant_like(0.0),
        }
    }

    /// A multiplier consistent with the exact solution: the vector field of
    /// the gradient-constrained problems, or the scalar on the contact edge
    /// of the friction problem (`∂u/∂x₁`).
    pub fn multiplier_jets(&self, xs: &[J]) -> Option<Vec<J>> {
        match *self {
            BenchmarkKind::Torsion { c, radius } => Some(torsion_lambda(xs, c, radius)),
            BenchmarkKind::Bingham { c, tau, radius } => Some(bingham_lambda(xs, c, tau, radius)),
            BenchmarkKind::Friction { .. } => {
                let du = friction_u(xs).grad[0];
                Some(vec![xs[0].constant_like(du)])
            }
            _ => None,
        }
    }

    /// Distance to the nearest seam of the piecewise exact solution or its
    /// data (`∞` for smooth problems).
    pub fn seam_distance(&self, x: &[f64]) -> f64 {
        let to_points = |v: f64, seams: &[f64]| seams.iter().map(|s| (v - s).abs()).fold(f64::INFINITY, f64::min);
        let r = || x[0].hypot(x[1]);
        match *self {
            BenchmarkKind::Obstacle1dSym => to_points(x[0], &[sym_kink(), 1.0 - sym_kink()]),
            BenchmarkKind::Obstacle1dNonsym => {
                let s3 = 3f64.sqrt();
                to_points(x[0], &[-2.0 + s3, 2.0 - s3])
            }
            BenchmarkKind::Obstacle1dPiecewise { beta } => {
                to_points(x[0], &[-0.5 - beta, -0.5, 0.5, 0.5 + beta])
            }
            BenchmarkKind::Obstacle2d { r_star } => to_points(r(), &[r_star]),
            BenchmarkKind::Torsion { c, radius } => {
                if c * radius <= 2.0 {
                    f64::INFINITY
                } else {
                    to_points(r(), &[2.0 / c])
                }
            }
            BenchmarkKind::Bingham { c, tau, radius } => {
                if c * radius <= 2.0 * tau {
                    f64::INFINITY
                } else {
                    to_points(r(), &[bingham_plug(c, tau)])
                }
            }
            BenchmarkKind::Friction { .. } => f64::INFINITY,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(kind: BenchmarkKind, x: &[f64]) -> J {
        kind.u_jet(&J::lift_all(x))
    }

    #[test]
    fn reference_point_values() {
        assert!((u(BenchmarkKind::Obstacle1dSym, &[0.5]).value - 12.5).abs() < 1e-12);
        assert!((BenchmarkKind::Obstacle1dSym.obstacle(&[0.1]).unwrap() - 1.0).abs() < 1e-12);
        let bingham = BenchmarkKind::Bingham { c: 10.0, tau: 1.0, radius: 1.0 };
        assert!((u(bingham, &[0.0, 0.0]).value - 1.6).abs() < 1e-12);
        let torsion = BenchmarkKind::Torsion { c: 1.0, radius: 1.0 };
        assert!((u(torsion, &[0.0, 0.0]).value - 0.25).abs() < 1e-15);
        assert!(u(torsion, &[0.6, 0.8]).value.abs() < 1e-15);
        assert_eq!(u(BenchmarkKind::Friction { tau: 1.0 }, &[0.3, 0.0]).value, 0.0);
        let ob2 = BenchmarkKind::Obstacle2d { r_star: R_STAR_PRINTED };
        assert_eq!(ob2.obstacle(&[2.0, 0.0]), Some(-1.0));
    }

    #[test]
    fn nonsym_operator_on_contact_branch() {
        // −u'' + u' for u = 1 − x² at 0
        let j = u(BenchmarkKind::Obstacle1dNonsym, &[0.0]);
        assert!((-j.hess_diag[0] + j.grad[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn refined_constants_agree_with_rounded() {
        // the constants are rounded to the digits shown
        assert!((refine_beta() - BETA_PRINTED).abs() < 5e-6);
        assert!((refine_r_star() - R_STAR_PRINTED).abs() < 1e-10);
        let r = refine_r_star();
        assert!((r * r * (1.0 - (r / 2.0).ln()) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn transfinite_lift_matches_corners() {
        let kind = BenchmarkKind::Obstacle2d { r_star: R_STAR_PRINTED };
        for p in [[-2.0, -2.0], [-2.0, 2.0], [2.0, -2.0], [2.0, 2.0]] {
            let g = kind.g_jet(&J::lift_all(&p)).value;
            assert!((g - u(kind, &p).value).abs() < 1e-14, "{p:?}");
        }
    }

    #[test]
    fn bump_limits() {
        let b = |y: f64| bump(&J::constant(1, y)).value;
        assert_eq!(b(0.1), 1.0);
        assert_eq!(b(0.45), 0.0);
        assert!(b(0.35) > 0.0 && b(0.35) < 1.0);
    }
}
