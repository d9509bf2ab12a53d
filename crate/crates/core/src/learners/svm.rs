//! Soft-margin SVM trained by sequential minimal optimization on the dual,
//! with second-order working-set selection. Multiclass is one-vs-rest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const KKT_TOL: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
    Poly { gamma: f64, degree: u32 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            // coef0 fixed at 1
            Kernel::Poly { gamma, degree } => (gamma * dot(a, b) + 1.0).powi(degree as i32),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One binary one-vs-rest head: support vectors with dual coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmHead {
    /// alpha_i * y_i per support vector.
    pub coef: Vec<f64>,
    /// Support vectors, row-major.
    pub support: Vec<f64>,
    pub bias: f64,
    /// Full alpha vector over the training set, kept for dual diagnostics.
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    pub kernel: Kernel,
    pub c: f64,
    pub heads: Vec<SvmHead>,
}

impl SvmModel {
    pub fn head_score(&self, head: &SvmHead, row: &[f64], d: usize) -> f64 {
        let mut s = head.bias;
        for (i, coef) in head.coef.iter().enumerate() {
            s += coef * self.kernel.eval(&head.support[i * d..(i + 1) * d], row);
        }
        s
    }

    /// Mean absolute primal weight across heads; linear kernel only.
    pub fn linear_importance(&self, d: usize) -> Option<Vec<f64>> {
        if self.kernel != Kernel::Linear {
            return None;
        }
        let mut acc = vec![0.0; d];
        for head in &self.heads {
            let mut w = vec![0.0; d];
            for (i, coef) in head.coef.iter().enumerate() {
                for j in 0..d {
                    w[j] += coef * head.support[i * d + j];
                }
            }
            for j in 0..d {
                acc[j] += w[j].abs() / self.heads.len() as f64;
            }
        }
        Some(acc)
    }
}

/// Solve the binary soft-margin dual for labels y in {-1,+1}.
/// Returns (alpha, bias, final KKT gap).
pub fn solve_smo(kmat: &[f64], y: &[f64], c: f64, tol: f64) -> Result<(Vec<f64>, f64, f64)> {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // gradient of the dual objective 1/2 a'Qa - e'a, Q_ij = y_i y_j K_ij
    let mut grad = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * kmat[i * n + j];

    let max_iter = 100_000.max(100 * n);
    let mut gap = f64::INFINITY;
    for _ in 0..max_iter {
        // working set selection
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            if in_up {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let in_low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if in_low {
                let v = y[t] * grad[t];
                if v > gmax2 {
                    gmax2 = v;
                }
                let grad_diff = gmax + y[t] * grad[t];
                if grad_diff > 0.0 {
                    let mut quad =
                        kmat[i_sel * n + i_sel] + kmat[t * n + t] - 2.0 * kmat[i_sel * n + t];
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -(grad_diff * grad_diff) / quad;
                    if obj < obj_min {
                        obj_min = obj;
                        j_sel = t;
                    }
                }
            }
        }
        gap = gmax + gmax2;
        if gap < tol || j_sel == usize::MAX {
            break;
        }
        let (i, j) = (i_sel, j_sel);
        let old_ai = alpha[i];
        let old_aj = alpha[j];
        if y[i] * y[j] < 0.0 {
            let mut quad = kmat[i * n + i] + kmat[j * n + j] - 2.0 * kmat[i * n + j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kmat[i * n + i] + kmat[j * n + j] - 2.0 * kmat[i * n + j];
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let dai = alpha[i] - old_ai;
        let daj = alpha[j] - old_aj;
        for t in 0..n {
            grad[t] += q(i, t) * dai + q(j, t) * daj;
        }
    }

    // bias from the free support vectors, else midpoint of the bounds
    let mut n_free = 0usize;
    let mut sum_free = 0.0;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            n_free += 1;
            sum_free += yg;
        } else if (alpha[t] == 0.0 && y[t] > 0.0) || (alpha[t] == c && y[t] < 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        0.5 * (ub + lb)
    };
    if !rho.is_finite() {
        return Err(Error::Data("SMO produced non-finite bias".into()));
    }
    Ok((alpha, -rho, gap))
}

/// Fit one one-vs-rest head for class `positive` (targets as class indices).
pub fn fit_head(
    data: &[f64],
    n: usize,
    d: usize,
    targets: &[usize],
    positive: usize,
    kernel: Kernel,
    c: f64,
) -> Result<SvmHead> {
    let y: Vec<f64> = targets.iter().map(|&t| if t == positive { 1.0 } else { -1.0 }).collect();
    let mut kmat = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = kernel.eval(&data[i * d..(i + 1) * d], &data[j * d..(j + 1) * d]);
            kmat[i * n + j] = k;
            kmat[j * n + i] = k;
        }
    }
    let (alpha, bias, _) = solve_smo(&kmat, &y, c, KKT_TOL)?;
    let mut coef = Vec::new();
    let mut support = Vec::new();
    for i in 0..n {
        if alpha[i] > 0.0 {
            coef.push(alpha[i] * y[i]);
            support.extend_from_slice(&data[i * d..(i + 1) * d]);
        }
    }
    Ok(SvmHead { coef, support, bias, alpha })
}
