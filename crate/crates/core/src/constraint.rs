//! Closed constraint sets with distance and nearest-point projection.
//!
//! Sets need not be convex. When several points are nearest, the
//! lexicographically smallest one is returned.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::{norm, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConstraintSet {
    /// All of `R^dim`.
    Full { dim: usize },
    /// `[lo, hi]` in one dimension; either end may be infinite.
    Interval { lo: f64, hi: f64 },
    /// Product of closed intervals.
    Box(Vec<(f64, f64)>),
    /// Finite union of closed intervals in one dimension, kept sorted.
    Union(Vec<(f64, f64)>),
    /// Finitely many points of equal dimension.
    Finite(Vec<Vec<f64>>),
}

/// Result of projecting onto the image `{sigma' pi : pi in set}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageProjection {
    /// Preimage of the nearest point, in the set's own coordinates.
    pub pi: Vec<f64>,
    /// The nearest point of the image.
    pub p: Vec<f64>,
    pub dist: f64,
}

impl ConstraintSet {
    pub fn full(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptySet);
        }
        Ok(ConstraintSet::Full { dim })
    }

    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        check_interval(lo, hi)?;
        Ok(ConstraintSet::Interval { lo, hi })
    }

    pub fn boxed(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::EmptySet);
        }
        for &(lo, hi) in &bounds {
            check_interval(lo, hi)?;
        }
        Ok(ConstraintSet::Box(bounds))
    }

    pub fn union(mut pieces: Vec<(f64, f64)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::EmptySet);
        }
        for &(lo, hi) in &pieces {
            check_interval(lo, hi)?;
        }
        pieces.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        Ok(ConstraintSet::Union(pieces))
    }

    pub fn finite(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().ok_or(Error::EmptySet)?.len();
        if dim == 0 {
            return Err(Error::EmptySet);
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::Invalid("finite set point must be finite".into()));
            }
        }
        Ok(ConstraintSet::Finite(points))
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintSet::Full { dim } => *dim,
            ConstraintSet::Interval { .. } | ConstraintSet::Union(_) => 1,
            ConstraintSet::Box(b) => b.len(),
            ConstraintSet::Finite(p) => p[0].len(),
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            ConstraintSet::Full { .. } | ConstraintSet::Interval { .. } | ConstraintSet::Box(_) => {
                true
            }
            ConstraintSet::Union(p) => p.len() == 1,
            ConstraintSet::Finite(p) => p.len() == 1,
        }
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        if u.len() != self.dim() {
            return false;
        }
        match self {
            ConstraintSet::Full { .. } => u.iter().all(|v| !v.is_nan()),
            ConstraintSet::Interval { lo, hi } => *lo <= u[0] && u[0] <= *hi,
            ConstraintSet::Box(b) => b.iter().zip(u).all(|(&(lo, hi), &v)| lo <= v && v <= hi),
            ConstraintSet::Union(p) => p.iter().any(|&(lo, hi)| lo <= u[0] && u[0] <= hi),
            ConstraintSet::Finite(p) => p.iter().any(|q| q.as_slice() == u),
        }
    }

    /// `inf_{p in set} |u - p|`.
    pub fn distance(&self, u: &[f64]) -> Result<f64> {
        self.check_dim(u)?;
        Ok(self
            .candidates(u)
            .iter()
            .map(|c| dist(u, c))
            .fold(f64::INFINITY, f64::min))
    }

    /// A nearest point of the set to `u`.
    pub fn project(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u)?;
        let cands = self.candidates(u);
        let dists: Vec<f64> = cands.iter().map(|c| dist(u, c)).collect();
        Ok(cands[select(&cands, &dists, u)].clone())
    }

    /// `(0, 0)` when the origin belongs to the set, otherwise the minimum-norm
    /// point and its norm.
    pub fn bounded_element(&self) -> (Vec<f64>, f64) {
        let zero = vec![0.0; self.dim()];
        if self.contains(&zero) {
            return (zero, 0.0);
        }
        let p = self.project(&zero).expect("dimension matches by construction");
        let n = norm(&p);
        (p, n)
    }

    /// Nearest point of the linear image `{sigma' pi : pi in set}` to `u`.
    ///
    /// Candidates are generated in the set's own coordinates so a binding
    /// bound is returned exactly (a clamped `pi` equals the bound bit for bit).
    /// Box constraints require a diagonal `sigma` in more than one dimension.
    pub fn project_image(&self, sigma: &Matrix, u: &[f64]) -> Result<ImageProjection> {
        let n = self.dim();
        if sigma.rows() != n || sigma.cols() != n {
            return Err(Error::Dimension {
                expected: n,
                found: sigma.rows(),
            });
        }
        self.check_dim(u)?;
        let cands_pi: Vec<Vec<f64>> = match self {
            ConstraintSet::Full { .. } => {
                let pi = sigma.transpose().solve(u)?;
                return Ok(ImageProjection {
                    pi,
                    p: u.to_vec(),
                    dist: 0.0,
                });
            }
            ConstraintSet::Interval { lo, hi } => {
                vec![vec![clamp(scaled(u[0], sigma[(0, 0)])?, *lo, *hi)]]
            }
            ConstraintSet::Union(pieces) => {
                let x = scaled(u[0], sigma[(0, 0)])?;
                pieces.iter().map(|&(lo, hi)| vec![clamp(x, lo, hi)]).collect()
            }
            ConstraintSet::Box(bounds) => {
                if n > 1 && !sigma.is_diagonal() {
                    return Err(Error::Unsupported(
                        "box constraint under a non-diagonal volatility",
                    ));
                }
                let pi = bounds
                    .iter()
                    .enumerate()
                    .map(|(j, &(lo, hi))| Ok(clamp(scaled(u[j], sigma[(j, j)])?, lo, hi)))
                    .collect::<Result<Vec<f64>>>()?;
                vec![pi]
            }
            ConstraintSet::Finite(points) => points.clone(),
        };
        let cands_p: Vec<Vec<f64>> = cands_pi.iter().map(|pi| sigma.tr_mat_vec(pi)).collect();
        let dists: Vec<f64> = cands_p.iter().map(|c| dist(u, c)).collect();
        let i = select(&cands_p, &dists, u);
        Ok(ImageProjection {
            pi: cands_pi[i].clone(),
            p: cands_p[i].clone(),
            dist: dists[i],
        })
    }

    /// Minimum norm over the image `{sigma' pi : pi in set}`.
    pub fn image_min_norm(&self, sigma: &Matrix) -> Result<f64> {
        let zero = vec![0.0; self.dim()];
        if self.contains(&zero) {
            return Ok(0.0);
        }
        Ok(self.project_image(sigma, &zero)?.dist)
    }

    /// Closest point of the set for each convex piece; the nearest point of
    /// the set is among these.
    fn candidates(&self, u: &[f64]) -> Vec<Vec<f64>> {
        match self {
            ConstraintSet::Full { .. } => vec![u.to_vec()],
            ConstraintSet::Interval { lo, hi } => vec![vec![clamp(u[0], *lo, *hi)]],
            ConstraintSet::Box(b) => vec![b
                .iter()
                .zip(u)
                .map(|(&(lo, hi), &v)| clamp(v, lo, hi))
                .collect()],
            ConstraintSet::Union(p) => p.iter().map(|&(lo, hi)| vec![clamp(u[0], lo, hi)]).collect(),
            ConstraintSet::Finite(p) => p.clone(),
        }
    }

    fn check_dim(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                found: u.len(),
            });
        }
        Ok(())
    }
}

pub fn pi_to_p(sigma: &Matrix, pi: &[f64]) -> Vec<f64> {
    sigma.tr_mat_vec(pi)
}

pub fn p_to_pi(sigma: &Matrix, p: &[f64]) -> Result<Vec<f64>> {
    sigma.transpose().solve(p)
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
        return Err(Error::Invalid(alloc::format!("invalid interval [{lo}, {hi}]")));
    }
    Ok(())
}

fn clamp(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

fn scaled(u: f64, s: f64) -> Result<f64> {
    if s == 0.0 || !s.is_finite() {
        return Err(Error::Singular("volatility"));
    }
    Ok(u / s)
}

fn dist(u: &[f64], p: &[f64]) -> f64 {
    u.iter()
        .zip(p)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Index of the nearest candidate; distances within rounding of the minimum
/// count as ties and go to the lexicographically smallest point.
fn select(cands: &[Vec<f64>], dists: &[f64], u: &[f64]) -> usize {
    let dmin = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let mag = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let umag = mag(u);
    let mut best: Option<usize> = None;
    for (i, (c, &d)) in cands.iter().zip(dists).enumerate() {
        let tol = 2.0 * f64::EPSILON * (umag + mag(c));
        if d > dmin + tol {
            continue;
        }
        best = match best {
            Some(j) if lex_cmp(&cands[j], c) != Ordering::Greater => Some(j),
            _ => Some(i),
        };
    }
    best.expect("candidate list is never empty")
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}
