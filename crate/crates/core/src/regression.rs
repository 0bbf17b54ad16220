//! Least-squares regression on polynomial bases, the conditional-expectation
//! estimator behind the backward Monte-Carlo recursions.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::linalg::{Cholesky, Matrix};
use crate::{Error, Result};

/// Ridge added to the normalised Gram matrix, except on the constant term.
pub const RIDGE: f64 = 1e-10;

/// Which monomials enter the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BasisSpec {
    /// All monomials of total degree `<= d`.
    TotalDegree(usize),
    /// All monomials with every exponent `<= d`.
    Tensor(usize),
}

impl BasisSpec {
    pub fn degree(&self) -> usize {
        match *self {
            BasisSpec::TotalDegree(d) | BasisSpec::Tensor(d) => d,
        }
    }
}

/// A monomial basis in standardised variables `(x - mean) / scale`.
/// Variables with zero sample spread are dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Basis {
    dim: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// One row of exponents (length `dim`) per basis function.
    exponents: Vec<Vec<u32>>,
}

impl Basis {
    /// Fits the standardisation to `xs` (row-major, `len / dim` samples).
    pub fn fit(spec: BasisSpec, dim: usize, xs: &[f64]) -> Result<Self> {
        if dim == 0 || xs.len() % dim != 0 || xs.is_empty() {
            return Err(Error::Dimension {
                expected: dim,
                found: xs.len(),
            });
        }
        let m = xs.len() / dim;
        let mut mean = vec![0.0; dim];
        let mut scale = vec![0.0; dim];
        for d in 0..dim {
            let mu = (0..m).map(|j| xs[j * dim + d]).sum::<f64>() / m as f64;
            let var = (0..m)
                .map(|j| {
                    let e = xs[j * dim + d] - mu;
                    e * e
                })
                .sum::<f64>()
                / m as f64;
            mean[d] = mu;
            scale[d] = var.sqrt();
        }
        let active: Vec<usize> = (0..dim)
            .filter(|&d| scale[d] > 1e-12 * (1.0 + mean[d].abs()))
            .collect();
        let exponents = monomials(spec, dim, &active);
        Ok(Basis {
            dim,
            mean,
            scale,
            exponents,
        })
    }

    /// Constant-only basis.
    pub fn constant(dim: usize) -> Self {
        Basis {
            dim,
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
            exponents: vec![vec![0; dim]],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let z: Vec<f64> = (0..self.dim)
            .map(|d| {
                if self.scale[d] > 0.0 {
                    (x[d] - self.mean[d]) / self.scale[d]
                } else {
                    0.0
                }
            })
            .collect();
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            let mut v = 1.0;
            for (zd, &p) in z.iter().zip(e) {
                for _ in 0..p {
                    v *= zd;
                }
            }
            *o = v;
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(x, &mut out);
        out
    }
}

fn monomials(spec: BasisSpec, dim: usize, active: &[usize]) -> Vec<Vec<u32>> {
    let deg = spec.degree() as u32;
    let mut out = vec![vec![0u32; dim]];
    // Grow one active variable at a time; each pass keeps existing rows.
    for &d in active {
        let mut next = Vec::new();
        for row in &out {
            let used: u32 = row.iter().sum();
            let cap = match spec {
                BasisSpec::TotalDegree(_) => deg - used,
                BasisSpec::Tensor(_) => deg,
            };
            for p in 0..=cap {
                let mut r = row.clone();
                r[d] = p;
                next.push(r);
            }
        }
        out = next;
    }
    out.sort_by(|a, b| {
        let sa: u32 = a.iter().sum();
        let sb: u32 = b.iter().sum();
        sa.cmp(&sb).then_with(|| b.cmp(a))
    });
    out
}

/// A fitted function `x -> coeffs . basis(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representation {
    pub basis: Basis,
    pub coeffs: Vec<f64>,
}

impl Representation {
    pub fn constant(dim: usize, value: f64) -> Self {
        Representation {
            basis: Basis::constant(dim),
            coeffs: vec![value],
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.basis
            .eval(x)
            .iter()
            .zip(&self.coeffs)
            .map(|(b, c)| b * c)
            .sum()
    }
}

/// A design matrix with its factored Gram matrix, reusable across targets.
#[derive(Debug, Clone)]
pub struct Regression {
    basis: Basis,
    samples: usize,
    design: Vec<f64>,
    gram: Cholesky,
}

impl Regression {
    /// `step` only labels a rank-deficiency error.
    pub fn new(basis: Basis, xs: &[f64], step: usize) -> Result<Self> {
        let dim = basis.dim();
        if xs.len() % dim != 0 || xs.is_empty() {
            return Err(Error::Dimension {
                expected: dim,
                found: xs.len(),
            });
        }
        let m = xs.len() / dim;
        let p = basis.len();
        let mut design = vec![0.0; m * p];
        for j in 0..m {
            basis.eval_into(&xs[j * dim..(j + 1) * dim], &mut design[j * p..(j + 1) * p]);
        }
        let mut g = Matrix::zeros(p, p);
        for j in 0..m {
            let row = &design[j * p..(j + 1) * p];
            for a in 0..p {
                for b in a..p {
                    g[(a, b)] += row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in a..p {
                // The constant column (always first) is left unpenalised.
                let v = g[(a, b)] / m as f64 + if a == b && a > 0 { RIDGE } else { 0.0 };
                g[(a, b)] = v;
                g[(b, a)] = v;
            }
        }
        let gram = g.cholesky().map_err(|_| Error::RankDeficient { step })?;
        Ok(Regression {
            basis,
            samples: m,
            design,
            gram,
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Least-squares coefficients for one target vector.
    pub fn fit(&self, target: &[f64]) -> Result<Vec<f64>> {
        if target.len() != self.samples {
            return Err(Error::Dimension {
                expected: self.samples,
                found: target.len(),
            });
        }
        let p = self.basis.len();
        let mut rhs = vec![0.0; p];
        for (j, t) in target.iter().enumerate() {
            let row = &self.design[j * p..(j + 1) * p];
            for a in 0..p {
                rhs[a] += row[a] * t;
            }
        }
        for v in &mut rhs {
            *v /= self.samples as f64;
        }
        Ok(self.gram.solve(&rhs))
    }

    /// Fitted value at sample `j`.
    pub fn fitted(&self, coeffs: &[f64], j: usize) -> f64 {
        let p = self.basis.len();
        self.design[j * p..(j + 1) * p]
            .iter()
            .zip(coeffs)
            .map(|(b, c)| b * c)
            .sum()
    }

    pub fn fitted_all(&self, coeffs: &[f64]) -> Vec<f64> {
        (0..self.samples).map(|j| self.fitted(coeffs, j)).collect()
    }

    pub fn representation(&self, coeffs: Vec<f64>) -> Representation {
        Representation {
            basis: self.basis.clone(),
            coeffs,
        }
    }
}

/// Coefficient of determination; a constant target counts as fully explained.
pub fn r_squared(target: &[f64], fitted: &[f64]) -> f64 {
    let n = target.len() as f64;
    let mean = target.iter().sum::<f64>() / n;
    let ss_tot: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
    let ss_res: f64 = target
        .iter()
        .zip(fitted)
        .map(|(t, f)| (t - f) * (t - f))
        .sum();
    if ss_tot <= 1e-300 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
