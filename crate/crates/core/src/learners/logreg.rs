//! Regularized logistic regression, one one-vs-rest head per class.
//!
//! The penalized negative log-likelihood
//!   sum_i log(1 + exp(-y_i (w.x_i + b))) + R(w)
//! with R = ||w||^2 / (2C) (L2) or ||w||_1 / C (L1) is minimized by
//! accelerated proximal gradient descent (soft-thresholding for L1, the bias
//! unpenalized), stopping at prox-gradient norm <= 1e-6 or 10 000 iterations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAD_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Penalty {
    L1,
    L2,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogRegHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogRegHead {
    pub fn score(&self, row: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

fn log1p_exp(t: f64) -> f64 {
    // log(1 + e^t), stable for large |t|
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Penalized loss at (w, b).
pub fn objective(data: &[f64], n: usize, d: usize, y: &[f64], w: &[f64], b: f64, penalty: Penalty, c: f64) -> f64 {
    let mut loss = 0.0;
    for i in 0..n {
        let z = b + w.iter().zip(&data[i * d..(i + 1) * d]).map(|(w, x)| w * x).sum::<f64>();
        loss += log1p_exp(-y[i] * z);
    }
    loss + match penalty {
        Penalty::L2 => w.iter().map(|v| v * v).sum::<f64>() / (2.0 * c),
        Penalty::L1 => w.iter().map(|v| v.abs()).sum::<f64>() / c,
    }
}

/// Gradient of the smooth part (loss, plus the L2 term when applicable).
fn smooth_grad(
    data: &[f64],
    n: usize,
    d: usize,
    y: &[f64],
    w: &[f64],
    b: f64,
    penalty: Penalty,
    c: f64,
    gw: &mut [f64],
) -> f64 {
    gw.iter_mut().for_each(|g| *g = 0.0);
    let mut gb = 0.0;
    for i in 0..n {
        let row = &data[i * d..(i + 1) * d];
        let z = b + w.iter().zip(row).map(|(w, x)| w * x).sum::<f64>();
        // sigma(-y z)
        let p = 1.0 / (1.0 + (y[i] * z).exp());
        let f = -y[i] * p;
        for j in 0..d {
            gw[j] += f * row[j];
        }
        gb += f;
    }
    if penalty == Penalty::L2 {
        for j in 0..d {
            gw[j] += w[j] / c;
        }
    }
    gb
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Spectral-norm bound of [X 1] via power iteration, for the step size.
fn lipschitz(data: &[f64], n: usize, d: usize, penalty: Penalty, c: f64) -> f64 {
    let dim = d + 1;
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut sigma2 = 1.0;
    for _ in 0..60 {
        // u = A v; A is n x (d+1) with trailing ones column
        let mut u = vec![0.0; n];
        for i in 0..n {
            let row = &data[i * d..(i + 1) * d];
            u[i] = v[d] + row.iter().zip(&v[..d]).map(|(x, vv)| x * vv).sum::<f64>();
        }
        // v = A' u
        let mut nv = vec![0.0; dim];
        for i in 0..n {
            let row = &data[i * d..(i + 1) * d];
            for j in 0..d {
                nv[j] += row[j] * u[i];
            }
            nv[d] += u[i];
        }
        sigma2 = nv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if sigma2 == 0.0 {
            break;
        }
        for x in &mut nv {
            *x /= sigma2;
        }
        v = nv;
    }
    let mut l = sigma2 / 4.0;
    if penalty == Penalty::L2 {
        l += 1.0 / c;
    }
    l.max(1e-12) * 1.05
}

/// Fit one head on labels y in {-1,+1} by FISTA with adaptive restart.
pub fn fit_head(data: &[f64], n: usize, d: usize, y: &[f64], penalty: Penalty, c: f64) -> Result<LogRegHead> {
    if !(c > 0.0) {
        return Err(Error::Parameter(format!("LogReg C must be positive, got {c}")));
    }
    let step = 1.0 / lipschitz(data, n, d, penalty, c);
    let l1_t = match penalty {
        Penalty::L1 => step / c,
        Penalty::L2 => 0.0,
    };

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut wy = w.clone();
    let mut by = b;
    let mut t: f64 = 1.0;
    let mut gw = vec![0.0; d];

    for iter in 0..MAX_ITER {
        let gb = smooth_grad(data, n, d, y, &wy, by, penalty, c, &mut gw);
        let mut w_new = vec![0.0; d];
        for j in 0..d {
            let v = wy[j] - step * gw[j];
            w_new[j] = if penalty == Penalty::L1 { soft_threshold(v, l1_t) } else { v };
        }
        let b_new = by - step * gb;

        // restart momentum when the step direction reverses
        let mut restart = (by - b_new) * (b_new - b) > 0.0;
        if !restart {
            let s: f64 = (0..d).map(|j| (wy[j] - w_new[j]) * (w_new[j] - w[j])).sum();
            restart = s > 0.0;
        }
        let t_new = if restart { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let mom = if restart { 0.0 } else { (t - 1.0) / t_new };
        for j in 0..d {
            wy[j] = w_new[j] + mom * (w_new[j] - w[j]);
        }
        by = b_new + mom * (b_new - b);
        w = w_new;
        b = b_new;
        t = t_new;

        if iter % 10 == 9 {
            // prox-gradient residual at the current iterate
            let gb2 = smooth_grad(data, n, d, y, &w, b, penalty, c, &mut gw);
            let mut norm2 = gb2 * gb2;
            for j in 0..d {
                let v = w[j] - step * gw[j];
                let p = if penalty == Penalty::L1 { soft_threshold(v, l1_t) } else { v };
                let r = (w[j] - p) / step;
                norm2 += r * r;
            }
            if norm2.sqrt() <= GRAD_TOL {
                break;
            }
        }
    }
    Ok(LogRegHead { weights: w, bias: b })
}
