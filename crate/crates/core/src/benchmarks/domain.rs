//! Benchmark domains, samplers and evaluation grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum DomainSpec {
    Interval { a: f64, b: f64 },
    Rectangle { a: f64, b: f64, c: f64, d: f64 },
    Disk { center: [f64; 2], radius: f64 },
}

/// A part of the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    All,
    /// `x₁ = a`
    Left,
    /// `x₁ = b`
    Right,
    /// `x₂ = c`
    Bottom,
    /// `x₂ = d`
    Top,
}

/// Points stored contiguously, with optional outward unit normals.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub normals: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            coords: Vec::new(),
            normals: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn normal(&self, i: usize) -> Option<&[f64]> {
        self.normals.get(i * self.dim..(i + 1) * self.dim)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

// Boundary samples may sit this far from the analytic boundary.
const BOUNDARY_TOL: f64 = 1e-12;

impl DomainSpec {
    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Interval { .. } => 1,
            _ => 2,
        }
    }

    /// Membership of the open domain.
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            DomainSpec::Interval { a, b } => x[0] > a && x[0] < b,
            DomainSpec::Rectangle { a, b, c, d } => x[0] > a && x[0] < b && x[1] > c && x[1] < d,
            DomainSpec::Disk { center, radius } => {
                (x[0] - center[0]).hypot(x[1] - center[1]) < radius
            }
        }
    }

    /// Membership of the closure, with a small tolerance.
    pub fn contains_closed(&self, x: &[f64]) -> bool {
        let t = BOUNDARY_TOL;
        match *self {
            DomainSpec::Interval { a, b } => x[0] >= a - t && x[0] <= b + t,
            DomainSpec::Rectangle { a, b, c, d } => {
                x[0] >= a - t && x[0] <= b + t && x[1] >= c - t && x[1] <= d + t
            }
            DomainSpec::Disk { center, radius } => {
                (x[0] - center[0]).hypot(x[1] - center[1]) <= radius + t
            }
        }
    }

    /// Distance to the boundary for points of the closure.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match *self {
            DomainSpec::Interval { a, b } => (x[0] - a).abs().min((b - x[0]).abs()),
            DomainSpec::Rectangle { a, b, c, d } => (x[0] - a)
                .abs()
                .min((b - x[0]).abs())
                .min((x[1] - c).abs())
                .min((d - x[1]).abs()),
            DomainSpec::Disk { center, radius } => {
                (radius - (x[0] - center[0]).hypot(x[1] - center[1])).abs()
            }
        }
    }

    /// Uniform i.i.d. samples from the open domain.
    pub fn sample_interior(&self, count: usize, seed: u64) -> PointSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = PointSet::new(self.dim());
        out.coords.reserve(count * self.dim());
        while out.len() < count {
            let p: Vec<f64> = match *self {
                DomainSpec::Interval { a, b } => vec![rng.gen_range(a..b)],
                DomainSpec::Rectangle { a, b, c, d } => vec![rng.gen_range(a..b), rng.gen_range(c..d)],
                DomainSpec::Disk { center, radius } => {
                    let r = radius * rng.gen::<f64>().sqrt();
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    vec![center[0] + r * theta.cos(), center[1] + r * theta.sin()]
                }
            };
            if self.contains(&p) {
                out.coords.extend(p);
            }
        }
        out
    }

    /// Uniform samples on a boundary segment, each with its outward normal.
    pub fn sample_boundary(&self, segment: Segment, count: usize, seed: u64) -> Result<PointSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = PointSet::new(self.dim());
        match *self {
            DomainSpec::Interval { a, b } => {
                for i in 0..count {
                    let right = match segment {
                        Segment::Left => false,
                        Segment::Right => true,
                        // both endpoints equally often
                        Segment::All => i % 2 == 1,
                        _ => return arg_err(format!("interval has no {segment:?} segment")),
                    };
                    out.coords.push(if right { b } else { a });
                    out.normals.push(if right { 1.0 } else { -1.0 });
                }
            }
            DomainSpec::Rectangle { a, b, c, d } => {
                let (w, h) = (b - a, d - c);
                for _ in 0..count {
                    let side = match segment {
                        Segment::All => {
                            // perimeter-proportional choice of side
                            let s = rng.gen_range(0.0..2.0 * (w + h));
                            if s < h {
                                Segment::Left
                            } else if s < 2.0 * h {
                                Segment::Right
                            } else if s < 2.0 * h + w {
                                Segment::Bottom
                            } else {
                                Segment::Top
                            }
                        }
                        s => s,
                    };
                    let (p, n) = match side {
                        Segment::Left => ([a, rng.gen_range(c..=d)], [-1.0, 0.0]),
                        Segment::Right => ([b, rng.gen_range(c..=d)], [1.0, 0.0]),
                        Segment::Bottom => ([rng.gen_range(a..=b), c], [0.0, -1.0]),
                        Segment::Top => ([rng.gen_range(a..=b), d], [0.0, 1.0]),
                        Segment::All => unreachable!(),
                    };
                    out.coords.extend(p);
                    out.normals.extend(n);
                }
            }
            DomainSpec::Disk { center, radius } => {
                if segment != Segment::All {
                    return arg_err(format!("disk has no {segment:?} segment"));
                }
                for _ in 0..count {
                    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                    let (s, c) = theta.sin_cos();
                    out.coords.extend([center[0] + radius * c, center[1] + radius * s]);
                    out.normals.extend([c, s]);
                }
            }
        }
        Ok(out)
    }

    /// Uniform evaluation grid over the closure: `n` nodes in 1D, `n × n`
    /// nodes in 2D (disk grids keep the nodes of the bounding square that
    /// lie in the closed disk). `n = 1` gives the midpoint.
    pub fn grid(&self, n: usize) -> Result<PointSet> {
        if n == 0 {
            return arg_err("grid needs at least one node per side");
        }
        let ticks = |lo: f64, hi: f64| -> Vec<f64> {
            if n == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }
        };
        let mut out = PointSet::new(self.dim());
        match *self {
            DomainSpec::Interval { a, b } => out.coords = ticks(a, b),
            DomainSpec::Rectangle { a, b, c, d } => {
                for y in ticks(c, d) {
                    for x in ticks(a, b) {
                        out.coords.extend([x, y]);
                    }
                }
            }
            DomainSpec::Disk { center, radius } => {
                let xs = ticks(center[0] - radius, center[0] + radius);
                let ys = ticks(center[1] - radius, center[1] + radius);
                for &y in &ys {
                    for &x in &xs {
                        if (x - center[0]).hypot(y - center[1]) <= radius {
                            out.coords.extend([x, y]);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
