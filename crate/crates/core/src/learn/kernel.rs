use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    /// `exp(-gamma * |x - z|^2)`
    Rbf {
        gamma: f64,
    },
    Linear,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Rbf { gamma } => (-gamma * squared_distance(a, b)).exp(),
            Kernel::Linear => dot(a, b),
        }
    }
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    data: Vec<f64>,
}

impl Gram {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let mut data = vec![0.0; n * n];
        data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = f(i, j);
            }
        });
        Gram { n, data }
    }

    pub fn new(points: &[Vec<f64>], kernel: &Kernel) -> Self {
        Gram::from_fn(points.len(), |i, j| kernel.eval(&points[i], &points[j]))
    }

    pub fn squared_distances(points: &[Vec<f64>]) -> Self {
        Gram::from_fn(points.len(), |i, j| squared_distance(&points[i], &points[j]))
    }

    /// Elementwise `exp(-gamma * d)` of a squared-distance matrix.
    pub fn rbf_from_distances(distances: &Gram, gamma: f64) -> Self {
        Gram {
            n: distances.n,
            data: distances.data.par_iter().map(|d| (-gamma * d).exp()).collect(),
        }
    }

    /// The submatrix on `idx` x `idx`.
    pub fn select(&self, idx: &[usize]) -> Self {
        let m = idx.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in idx {
            let row = self.row(i);
            data.extend(idx.iter().map(|&j| row[j]));
        }
        Gram { n: m, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}
