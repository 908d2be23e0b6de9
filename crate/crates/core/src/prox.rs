//! Closed-form pointwise proximal maps.
//!
//! Each map is generic over [`Scalar`] so the same formula is evaluated on
//! plain numbers and recorded on the training tape. The `f64` entry points
//! validate their arguments; the generic cores assume validated input.

use crate::diff_engine::Scalar;
use crate::error::{arg_err, Result};

/// Which proximal map a nonsmooth term induces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProxKind {
    /// Indicator of `{v ≥ ψ}`: `max{w, ψ}`.
    ObstacleClamp { psi: f64 },
    /// `κ|v|`: soft thresholding with `κ = τη`.
    SoftThreshold { kappa: f64 },
    /// Indicator of the unit ball: radial projection.
    UnitBallProject,
    /// `κ|v|` on vectors: block shrinkage with `κ = τη`.
    VectorShrink { kappa: f64 },
}

impl ProxKind {
    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        match *self {
            ProxKind::ObstacleClamp { psi } => Ok(w.iter().map(|&v| obstacle_clamp(v, psi)).collect()),
            ProxKind::SoftThreshold { kappa } => w.iter().map(|&v| soft_threshold(v, kappa)).collect(),
            ProxKind::UnitBallProject => Ok(unit_ball_project(w)),
            ProxKind::VectorShrink { kappa } => vector_shrink(w, kappa),
        }
    }
}

pub fn obstacle_clamp(w: f64, psi: f64) -> f64 {
    w.max(psi)
}

pub fn soft_threshold(w: f64, kappa: f64) -> Result<f64> {
    check_kappa(kappa)?;
    Ok(soft_threshold_s(w, kappa))
}

pub fn unit_ball_project(q: &[f64]) -> Vec<f64> {
    unit_ball_project_s(q)
}

pub fn vector_shrink(w: &[f64], kappa: f64) -> Result<Vec<f64>> {
    check_kappa(kappa)?;
    Ok(vector_shrink_s(w, kappa))
}

fn check_kappa(kappa: f64) -> Result<()> {
    if kappa >= 0.0 {
        Ok(())
    } else {
        arg_err(format!("threshold must be nonnegative, got {kappa}"))
    }
}

/// `sgn(w)·max{|w| − κ, 0}` with `sgn(0) = 0`.
pub fn soft_threshold_s<T: Scalar>(w: T, kappa: f64) -> T {
    let v = w.value();
    if v > kappa {
        w - kappa
    } else if v < -kappa {
        w + kappa
    } else {
        w.zero_like()
    }
}

pub fn norm_s<T: Scalar>(w: &[T]) -> T {
    let sq = w[1..].iter().fold(w[0] * w[0], |acc, &v| acc + v * v);
    sq.sqrt()
}

fn norm_value<T: Scalar>(w: &[T]) -> f64 {
    w.iter().map(|v| v.value().powi(2)).sum::<f64>().sqrt()
}

/// `q / max{1, |q|}`.
pub fn unit_ball_project_s<T: Scalar>(q: &[T]) -> Vec<T> {
    if norm_value(q) <= 1.0 {
        return q.to_vec();
    }
    let n = norm_s(q);
    q.iter().map(|&v| v / n).collect()
}

/// `w/|w| · max{|w| − κ, 0}`, zero whenever `|w| ≤ κ` (including `w = 0`).
pub fn vector_shrink_s<T: Scalar>(w: &[T], kappa: f64) -> Vec<T> {
    if let [v] = w {
        // w/|w| = sgn(w) in one dimension
        return vec![soft_threshold_s(*v, kappa)];
    }
    if norm_value(w) <= kappa {
        return w.iter().map(|v| v.zero_like()).collect();
    }
    let n = norm_s(w);
    let factor = (n - kappa) / n;
    w.iter().map(|&v| v * factor).collect()
}
