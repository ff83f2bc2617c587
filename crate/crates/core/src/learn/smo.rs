//! Sequential minimal optimization for the C-SVM dual.
//!
//! Solves `min f(a) = 1/2 a'Qa - e'a` subject to `0 <= a_i <= C` and `y'a = 0`, where
//! `Q_ij = y_i y_j K_ij`. Each iteration picks the maximal violating pair
//! `i = argmax_{I_up} -y G`, `j = argmin_{I_low} -y G` and optimizes the two multipliers
//! analytically. Exact ties in the selection are broken uniformly at random from a seeded
//! generator. The solver stops once `max_{I_up} -y G - min_{I_low} -y G < tol`.

use rand::Rng;

use super::kernel::Gram;
use crate::rng::rng_for;

/// Curvature floor for non-positive-definite pairs (e.g. duplicate points).
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoSettings {
    pub cost: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Record the dual objective after every iteration (O(n) extra work per step).
    pub record_trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    /// Multipliers, each in `[0, cost]`.
    pub alpha: Vec<f64>,
    /// Offset; decision values are `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Maximal KKT violation `m - M` at exit.
    pub violation: f64,
    /// Dual objective `e'a - 1/2 a'Qa`, starting at 0 before the first step.
    pub objective_trace: Vec<f64>,
}

impl SmoSolution {
    /// Dual coefficients `alpha_i * y_i`.
    pub fn coefficients(&self, y: &[f64]) -> Vec<f64> {
        self.alpha.iter().zip(y).map(|(a, y)| a * y).collect()
    }
}

fn in_up(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha < c) || (y < 0.0 && alpha > 0.0)
}

fn in_low(alpha: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && alpha > 0.0) || (y < 0.0 && alpha < c)
}

/// Dual objective from the gradient: `-f(a) = -1/2 sum_i a_i (G_i - 1)`.
fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

/// Runs SMO on a precomputed kernel matrix with labels in {-1, +1}.
pub fn solve(gram: &Gram, y: &[f64], s: &SmoSettings) -> SmoSolution {
    let n = y.len();
    assert_eq!(gram.len(), n, "kernel matrix does not match label count");
    let c = s.cost;
    let mut rng = rng_for(s.seed, &[n as u64]);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut trace = Vec::new();
    if s.record_trace {
        trace.push(0.0);
    }
    let mut iterations = 0;
    let mut converged = false;
    let mut violation;

    loop {
        // Maximal violating pair; reservoir sampling breaks exact ties.
        let (mut i, mut gmax, mut ties_i) = (usize::MAX, f64::NEG_INFINITY, 0u32);
        let (mut j, mut gmin, mut ties_j) = (usize::MAX, f64::INFINITY, 0u32);
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t], c) {
                if v > gmax {
                    (i, gmax, ties_i) = (t, v, 1);
                } else if v == gmax {
                    ties_i += 1;
                    if rng.gen_range(0..ties_i) == 0 {
                        i = t;
                    }
                }
            }
            if in_low(alpha[t], y[t], c) {
                if v < gmin {
                    (j, gmin, ties_j) = (t, v, 1);
                } else if v == gmin {
                    ties_j += 1;
                    if rng.gen_range(0..ties_j) == 0 {
                        j = t;
                    }
                }
            }
        }
        violation = if i == usize::MAX || j == usize::MAX {
            0.0
        } else {
            gmax - gmin
        };
        if violation < s.tol {
            converged = true;
            break;
        }
        if iterations >= s.max_iter {
            break;
        }
        iterations += 1;

        let ki = gram.row(i);
        let kj = gram.row(j);
        let (yi, yj) = (y[i], y[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = yi * yj * ki[j];
        let (qii, qjj) = (ki[i], kj[j]);

        if yi != yj {
            let mut quad = qii + qjj + 2.0 * qij;
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
            let mut quad = qii + qjj - 2.0 * qij;
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

        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        debug_assert!((0.0..=c).contains(&alpha[i]) && (0.0..=c).contains(&alpha[j]));
        // Change of f along the step, from the gradient before the update; must not increase f.
        let df = grad[i] * di + grad[j] * dj + 0.5 * (qii * di * di + qjj * dj * dj) + qij * di * dj;
        debug_assert!(
            df <= 1e-9 * (1.0 + df.abs()),
            "SMO step increased the objective by {df}"
        );

        let (si, sj) = (yi * di, yj * dj);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += y[t] * (ki[t] * si + kj[t] * sj);
        }
        if s.record_trace {
            trace.push(dual_objective(&alpha, &grad));
        }
    }

    let rho = offset(&alpha, &grad, y, c);
    SmoSolution {
        alpha,
        rho,
        iterations,
        converged,
        violation,
        objective_trace: trace,
    }
}

/// Average of `y_i G_i` over free multipliers, or the midpoint of the feasible interval.
fn offset(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    if free > 0 {
        sum_free / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    }
}
