//! Independent reference implementations used as test oracles.
//!
//! Descriptor oracles work on integer pixel coordinates with exact integer arithmetic
//! wherever the production code uses floating point.

#![allow(dead_code)]

use facelayout_core::learn::{Gram, Kernel};
use facelayout_core::{FaceBox, FaceSource, ImageRecord};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn face(cx: i64, cy: i64, w: i64, h: i64, orientation: i32) -> FaceBox {
    FaceBox::new(cx as f64, cy as f64, w as f64, h as f64, FaceSource::GroundTruth).with_orientation(orientation)
}

/// Record with 0..=20 faces at integer positions and sizes.
pub fn random_record<R: Rng>(rng: &mut R, id: usize) -> ImageRecord {
    let width = rng.gen_range(200..=1200i64);
    let height = rng.gen_range(200..=1000i64);
    let n = rng.gen_range(0..=20usize);
    // Some records crowd faces into a small area so several share positions.
    let spread = if rng.gen_bool(0.2) { 3 } else { width.max(height) };
    let faces = (0..n)
        .map(|_| {
            face(
                rng.gen_range(0..=spread.min(width)),
                rng.gen_range(0..=spread.min(height)),
                rng.gen_range(10..=120),
                rng.gen_range(10..=120),
                15 * rng.gen_range(-6..=6),
            )
        })
        .collect();
    ImageRecord::new(format!("r{id}"), width as f64, height as f64, "x").with_faces(faces)
}

pub fn shuffled<R: Rng>(rng: &mut R, record: &ImageRecord) -> ImageRecord {
    let mut r = record.clone();
    r.faces.shuffle(rng);
    r
}

pub fn translated(record: &ImageRecord, tx: i64, ty: i64) -> ImageRecord {
    let mut r = record.clone();
    for f in &mut r.faces {
        f.cx += tx as f64;
        f.cy += ty as f64;
    }
    r
}

/// Integer offsets `N*x_i - sum(x)` and the face count.
fn int_offsets(r: &ImageRecord) -> (i128, Vec<(i128, i128)>) {
    let n = r.faces.len() as i128;
    let sx: i128 = r.faces.iter().map(|f| f.cx as i128).sum();
    let sy: i128 = r.faces.iter().map(|f| f.cy as i128).sum();
    let offs = r
        .faces
        .iter()
        .map(|f| (n * f.cx as i128 - sx, n * f.cy as i128 - sy))
        .collect();
    (n, offs)
}

pub fn oracle_hfo(r: &ImageRecord) -> Vec<f64> {
    (0..13)
        .map(|k| {
            let angle = -90 + 15 * k;
            r.faces.iter().filter(|f| f.orientation == Some(angle)).count() as f64
        })
        .collect()
}

pub fn oracle_hfd(r: &ImageRecord) -> Vec<f64> {
    let count = |p: &dyn Fn(i32) -> bool| r.faces.iter().filter(|f| p(f.orientation.unwrap())).count() as f64;
    vec![
        count(&|o| o <= -45),
        count(&|o| (-30..=30).contains(&o)),
        count(&|o| o >= 45),
    ]
}

/// Smallest m in 1..=k with (m * N * S)^2 >= |offset|^2, else k.
pub fn oracle_df(r: &ImageRecord, k: usize) -> Vec<f64> {
    let mut bins = vec![0.0; k];
    if r.faces.is_empty() {
        return bins;
    }
    let s = r.faces.iter().map(|f| f.w.max(f.h) as i128).max().unwrap();
    let (n, offs) = int_offsets(r);
    for (x, y) in offs {
        let d2 = x * x + y * y;
        let m = (1..=k as i128)
            .find(|m| (m * n * s) * (m * n * s) >= d2)
            .unwrap_or(k as i128);
        bins[m as usize - 1] += 1.0;
    }
    bins
}

/// Six 60° sectors decided by signs and the exact comparison `y^2 < 3 x^2` (tan 60° = sqrt 3).
pub fn oracle_chfl60(r: &ImageRecord) -> Vec<f64> {
    let mut bins = vec![0.0; 6];
    let (_, offs) = int_offsets(r);
    for (x, y) in offs {
        let shallow = y * y < 3 * x * x;
        let sector = match (x.signum(), y.signum()) {
            (0, 0) => 0,
            (_, 0) => {
                if x > 0 {
                    0
                } else {
                    3
                }
            }
            (sx, 1) => {
                if sx > 0 && shallow {
                    0
                } else if sx < 0 && shallow {
                    2
                } else {
                    1
                }
            }
            (sx, _) => {
                if sx < 0 && shallow {
                    3
                } else if sx > 0 && shallow {
                    5
                } else {
                    4
                }
            }
        };
        bins[sector] += 1.0;
    }
    bins
}

/// Cell j along an axis spans offsets [(j - c/2) E/c, (j + 1 - c/2) E/c); outer cells are open.
fn oracle_cell(scaled: i128, n: i128, extent: i128, cells: usize) -> usize {
    let c = cells as i128;
    let v = 2 * c * scaled;
    (0..c)
        .find(|&j| {
            let upper = (2 * j + 2 - c) * n * extent;
            j == c - 1 || v < upper
        })
        .unwrap() as usize
}

pub fn oracle_ghfl(r: &ImageRecord, rows: usize, cols: usize) -> Vec<f64> {
    let mut bins = vec![0.0; rows * cols];
    let (n, offs) = int_offsets(r);
    for (x, y) in offs {
        let col = oracle_cell(x, n, r.width as i128, cols);
        let row = oracle_cell(y, n, r.height as i128, rows);
        bins[row * cols + col] += 1.0;
    }
    bins
}

pub fn oracle_dir_count(r: &ImageRecord) -> f64 {
    oracle_hfd(r).iter().filter(|&&c| c > 0.0).count() as f64
}

/// AP by counting: the rank of item i is 1 + #items ranked before it (higher score, or equal
/// score and earlier position).
pub fn oracle_ap(scored: &[(f64, bool)]) -> Option<f64> {
    let before = |i: usize, j: usize| scored[j].0 > scored[i].0 || (scored[j].0 == scored[i].0 && j < i);
    let positives: Vec<usize> = (0..scored.len()).filter(|&i| scored[i].1).collect();
    if positives.is_empty() {
        return None;
    }
    let total: f64 = positives
        .iter()
        .map(|&i| {
            let rank = 1 + (0..scored.len()).filter(|&j| before(i, j)).count();
            let hits = 1 + positives.iter().filter(|&&j| before(i, j)).count();
            hits as f64 / rank as f64
        })
        .sum();
    Some(total / positives.len() as f64)
}

fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                let pivot_row = a[col].clone();
                for (v, p) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                    *v -= f * p;
                }
                b[row] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Exact solution of the C-SVM dual for a handful of points: every assignment of each
/// multiplier to {0, C, free} is tried, the free block solved from the KKT equations, and the
/// feasible KKT point with the best dual objective kept. Returns `(alpha, bias)`.
pub fn reference_qp(points: &[Vec<f64>], y: &[f64], kernel: &Kernel, c: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let gram = Gram::new(points, kernel);
    let q = |i: usize, j: usize| y[i] * y[j] * gram.get(i, j);
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for code in 0..3usize.pow(n as u32) {
        let state: Vec<usize> = (0..n).map(|i| code / 3usize.pow(i as u32) % 3).collect();
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 2).collect();
        let mut alpha: Vec<f64> = state.iter().map(|&s| if s == 1 { c } else { 0.0 }).collect();
        let mut bias = f64::NAN;
        if !free.is_empty() {
            // [Q_FF   y_F] [a_F]   [1 - Q_FB a_B]
            // [y_F'   0  ] [ b ] = [   -y_B' a_B ]
            let m = free.len();
            let mut a = vec![vec![0.0; m + 1]; m + 1];
            let mut rhs = vec![0.0; m + 1];
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[r][s] = q(i, j);
                }
                a[r][m] = y[i];
                a[m][r] = y[i];
                rhs[r] = 1.0 - (0..n).filter(|j| state[*j] == 1).map(|j| q(i, j) * c).sum::<f64>();
            }
            rhs[m] = -(0..n).filter(|j| state[*j] == 1).map(|j| y[j] * c).sum::<f64>();
            let Some(sol) = solve_linear(a, rhs) else { continue };
            if sol[..m].iter().any(|&v| v <= 0.0 || v >= c) {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
            bias = sol[m];
        }
        if (0..n).map(|i| y[i] * alpha[i]).sum::<f64>().abs() > 1e-9 {
            continue;
        }
        // Margin y_i f(x_i) with f = sum a_j y_j K + b must satisfy the bound conditions.
        let margin_wo_bias: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q(i, j) * alpha[j]).sum()).collect();
        if bias.is_nan() {
            // Every multiplier at a bound: take the middle of the feasible bias interval.
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..n {
                let need = (1.0 - margin_wo_bias[i]) * y[i];
                let lower = (state[i] == 0) == (y[i] > 0.0);
                if lower {
                    lo = lo.max(need);
                } else {
                    hi = hi.min(need);
                }
            }
            if lo > hi + 1e-9 {
                continue;
            }
            bias = if lo.is_finite() && hi.is_finite() {
                (lo + hi) / 2.0
            } else {
                lo.max(hi.min(0.0))
            };
        }
        let ok = (0..n).all(|i| {
            let m = margin_wo_bias[i] + y[i] * bias;
            match state[i] {
                0 => m >= 1.0 - 1e-9,
                1 => m <= 1.0 + 1e-9,
                _ => (m - 1.0).abs() < 1e-9,
            }
        });
        if !ok {
            continue;
        }
        let obj = alpha.iter().sum::<f64>()
            - 0.5
                * (0..n)
                    .map(|i| (0..n).map(|j| alpha[i] * alpha[j] * q(i, j)).sum::<f64>())
                    .sum::<f64>();
        if !matches!(&best, Some((b, _, _)) if obj <= *b) {
            best = Some((obj, alpha, bias));
        }
    }
    let (_, alpha, bias) = best.expect("the dual always has a KKT point");
    (alpha, bias)
}

/// Largest KKT violation `max_{I_up} -y G - min_{I_low} -y G`, recomputed from scratch.
pub fn kkt_violation(gram: &Gram, y: &[f64], alpha: &[f64], c: f64) -> f64 {
    let n = y.len();
    let grad: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| y[i] * y[j] * gram.get(i, j) * alpha[j]).sum::<f64>() - 1.0)
        .collect();
    let up = (0..n).filter(|&i| (y[i] > 0.0 && alpha[i] < c) || (y[i] < 0.0 && alpha[i] > 0.0));
    let low = (0..n).filter(|&i| (y[i] > 0.0 && alpha[i] > 0.0) || (y[i] < 0.0 && alpha[i] < c));
    let m = up.map(|i| -y[i] * grad[i]).fold(f64::NEG_INFINITY, f64::max);
    let big_m = low.map(|i| -y[i] * grad[i]).fold(f64::INFINITY, f64::min);
    m - big_m
}

/// Two Gaussian blobs in `dim` dimensions whose means are `separation` standard deviations apart.
pub fn blobs<R: Rng>(rng: &mut R, per_class: usize, dim: usize, separation: f64) -> (Vec<Vec<f64>>, Vec<bool>) {
    use rand_distr::{Distribution, StandardNormal};
    let mut x = Vec::new();
    let mut y = Vec::new();
    for label in [false, true] {
        let shift = if label { separation / 2.0 } else { -separation / 2.0 };
        for _ in 0..per_class {
            let mut p: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            p[0] += shift;
            x.push(p);
            y.push(label);
        }
    }
    (x, y)
}
