use serde::{Deserialize, Serialize};

use super::kernel::{Gram, Kernel};
use super::smo::{solve, SmoSettings, SmoSolution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Box constraint C.
    pub cost: f64,
    /// RBF bandwidth in `exp(-gamma * |x - z|^2)`.
    pub gamma: f64,
    /// KKT tolerance on the maximal violating pair.
    pub tol: f64,
    pub max_iter: usize,
    /// Seed for tie-breaking in working-pair selection.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            cost: 1.0,
            gamma: 0.125,
            tol: 1e-3,
            max_iter: 10_000_000,
            seed: 0,
        }
    }
}

impl SvmParams {
    pub fn new(cost: f64, gamma: f64) -> Self {
        SvmParams {
            cost,
            gamma,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.cost) && ok(self.gamma) && ok(self.tol)) {
            return Err(Error::Config(format!(
                "cost, gamma and tol must be positive, got C={} gamma={} tol={}",
                self.cost, self.gamma, self.tol
            )));
        }
        Ok(())
    }

    pub(crate) fn smo(&self, seed: u64) -> SmoSettings {
        SmoSettings {
            cost: self.cost,
            tol: self.tol,
            max_iter: self.max_iter,
            seed,
            record_trace: false,
        }
    }
}

/// A trained two-class kernel machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub kernel: Kernel,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i`, each within `[-cost, cost]`.
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl BinarySvm {
    pub(crate) fn from_solution(kernel: Kernel, cost: f64, points: &[Vec<f64>], y: &[f64], sol: &SmoSolution) -> Self {
        let mut support_vectors = Vec::new();
        let mut coefficients = Vec::new();
        for ((p, &yi), &a) in points.iter().zip(y).zip(&sol.alpha) {
            if a > 0.0 {
                support_vectors.push(p.clone());
                coefficients.push(a * yi);
            }
        }
        BinarySvm {
            kernel,
            support_vectors,
            coefficients,
            bias: -sol.rho,
            cost,
            converged: sol.converged,
            iterations: sol.iterations,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        self.support_vectors.first().map(Vec::len)
    }

    /// `sum_i coef_i K(sv_i, x) + bias`. Terms are summed in sorted order, so the value does not
    /// depend on how the support vectors are stored.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if let Some(d) = self.dim() {
            if d != x.len() {
                return Err(Error::DimensionMismatch {
                    channel: "svm".into(),
                    image_id: "<query>".into(),
                    expected: d,
                    found: x.len(),
                });
            }
        }
        let mut terms: Vec<f64> = self
            .support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, c)| c * self.kernel.eval(sv, x))
            .collect();
        terms.sort_by(f64::total_cmp);
        Ok(terms.iter().sum::<f64>() + self.bias)
    }
}

fn check_points(points: &[Vec<f64>]) -> Result<()> {
    let dim = points.first().map_or(0, Vec::len);
    if let Some((i, p)) = points.iter().enumerate().find(|(_, p)| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            channel: "svm".into(),
            image_id: format!("#{i}"),
            expected: dim,
            found: p.len(),
        });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config("training points must be finite".into()));
    }
    Ok(())
}

pub(crate) fn signed_labels(labels: &[bool]) -> Result<Vec<f64>> {
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::DegenerateTraining(format!(
            "{pos} positive and {} negative examples; both classes are required",
            labels.len() - pos
        )));
    }
    Ok(labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect())
}

/// Trains an SVM with the given kernel. A fit that hits the iteration cap is returned with
/// `converged == false`.
pub fn train_with_kernel(
    points: &[Vec<f64>],
    labels: &[bool],
    kernel: Kernel,
    params: &SvmParams,
) -> Result<BinarySvm> {
    params.validate()?;
    check_points(points)?;
    if points.len() != labels.len() {
        return Err(Error::Config("point and label counts differ".into()));
    }
    let y = signed_labels(labels)?;
    let gram = Gram::new(points, &kernel);
    let sol = solve(&gram, &y, &params.smo(params.seed));
    if !sol.converged {
        log::warn!(
            "SMO stopped after {} iterations with violation {}",
            sol.iterations,
            sol.violation
        );
    }
    Ok(BinarySvm::from_solution(kernel, params.cost, points, &y, &sol))
}

/// Trains a Gaussian-RBF SVM; `labels[i]` marks the positive class.
pub fn train_binary(points: &[Vec<f64>], labels: &[bool], params: &SvmParams) -> Result<BinarySvm> {
    train_with_kernel(points, labels, Kernel::Rbf { gamma: params.gamma }, params)
}
