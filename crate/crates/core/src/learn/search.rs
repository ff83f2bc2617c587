//! Hyperparameter selection over a cost x gamma grid by inner cross-validated mAP.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::Gram;
use super::ovr::{class_seed, LabeledData, Standardizer};
use super::smo::solve;
use super::svm::SvmParams;
use crate::error::{Error, Result};
use crate::eval::{average_precision, stratified_assignment};
use crate::rng::derive_seed;

/// Seed tag separating inner-fold shuffles from other uses of the base seed.
const SEARCH_TAG: u64 = 0x6772_6964;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub costs: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl Default for ParamGrid {
    /// Costs {0.1, 1, 10, 100} and gammas 2^-7 … 2^3.
    fn default() -> Self {
        ParamGrid {
            costs: vec![0.1, 1.0, 10.0, 100.0],
            gammas: (-7..=3).map(|e| 2f64.powi(e)).collect(),
        }
    }
}

impl ParamGrid {
    pub fn single(cost: f64, gamma: f64) -> Self {
        ParamGrid {
            costs: vec![cost],
            gammas: vec![gamma],
        }
    }

    /// Grid points ordered by cost, then gamma, without duplicates.
    pub fn points(&self) -> Result<Vec<(f64, f64)>> {
        let ok = |v: &f64| v.is_finite() && *v > 0.0;
        if self.costs.is_empty() || self.gammas.is_empty() {
            return Err(Error::Config("parameter grid is empty".into()));
        }
        if !self.costs.iter().all(ok) || !self.gammas.iter().all(ok) {
            return Err(Error::Config("grid values must be positive".into()));
        }
        let mut costs = self.costs.clone();
        let mut gammas = self.gammas.clone();
        for v in [&mut costs, &mut gammas] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        Ok(costs
            .iter()
            .flat_map(|&c| gammas.iter().map(move |&g| (c, g)))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub cost: f64,
    pub gamma: f64,
    pub map: f64,
}

/// Inner-CV mAP of every grid point, in grid order, and the selected parameters.
///
/// Features are z-scored once with statistics of `data`; inner folds are stratified. The best
/// mAP wins, ties going to the smaller cost and then the smaller gamma. A one-point grid is
/// returned without evaluation.
pub fn grid_search_table(
    data: &LabeledData,
    grid: &ParamGrid,
    base: &SvmParams,
    inner_folds: usize,
) -> Result<(SvmParams, Vec<GridPoint>)> {
    let points = grid.points()?;
    let with = |(cost, gamma): (f64, f64)| SvmParams { cost, gamma, ..*base };
    if points.len() == 1 {
        return Ok((with(points[0]), Vec::new()));
    }
    base.validate()?;
    data.check_trainable()?;
    let smallest = data.class_counts().into_iter().min().unwrap_or(0);
    let k = inner_folds.min(smallest);
    if k < 2 {
        return Err(Error::DegenerateTraining(format!(
            "grid search needs at least 2 examples per class, smallest class has {smallest}"
        )));
    }
    let assignment = stratified_assignment(&data.y, &data.class_names, k, derive_seed(base.seed, &[SEARCH_TAG]))?;
    let folds: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| assignment[i] == f);
            (train, val)
        })
        .collect();

    let z = Standardizer::fit(&data.x).transform_all(&data.x);
    let distances = Gram::squared_distances(&z);
    let mut gammas: Vec<f64> = points.iter().map(|p| p.1).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();

    let by_gamma: Vec<Vec<GridPoint>> = gammas
        .par_iter()
        .map(|&gamma| {
            let full = Gram::rbf_from_distances(&distances, gamma);
            let subs: Vec<Gram> = folds.iter().map(|(train, _)| full.select(train)).collect();
            points
                .iter()
                .filter(|p| p.1 == gamma)
                .map(|&(cost, gamma)| {
                    let params = with((cost, gamma));
                    let map = inner_map(data, &folds, &subs, &full, &params);
                    GridPoint { cost, gamma, map }
                })
                .collect()
        })
        .collect();

    let mut table: Vec<GridPoint> = by_gamma.into_iter().flatten().collect();
    table.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(a.gamma.total_cmp(&b.gamma)));
    let best = table
        .iter()
        .fold(None::<&GridPoint>, |best, p| match best {
            Some(b) if b.map >= p.map => Some(b),
            _ => Some(p),
        })
        .expect("grid has points");
    Ok((with((best.cost, best.gamma)), table))
}

/// Selects one parameter set for all classes; see [`grid_search_table`].
pub fn grid_search(data: &LabeledData, grid: &ParamGrid, base: &SvmParams, inner_folds: usize) -> Result<SvmParams> {
    grid_search_table(data, grid, base, inner_folds).map(|(p, _)| p)
}

/// Pooled held-out mAP over the inner folds for one parameter setting.
fn inner_map(
    data: &LabeledData,
    folds: &[(Vec<usize>, Vec<usize>)],
    subs: &[Gram],
    full: &Gram,
    params: &SvmParams,
) -> f64 {
    let n_classes = data.n_classes();
    let mut scores = vec![vec![0.0; data.len()]; n_classes];
    for ((train, val), sub) in folds.iter().zip(subs) {
        for (c, class_scores) in scores.iter_mut().enumerate() {
            let y: Vec<f64> = train.iter().map(|&i| if data.y[i] == c { 1.0 } else { -1.0 }).collect();
            let sol = solve(sub, &y, &params.smo(class_seed(params, c)));
            let coef = sol.coefficients(&y);
            for &v in val {
                let row = full.row(v);
                let s: f64 = train.iter().zip(&coef).map(|(&t, a)| a * row[t]).sum();
                class_scores[v] = s - sol.rho;
            }
        }
    }
    let aps: Vec<f64> = (0..n_classes)
        .map(|c| {
            let ranked: Vec<(f64, bool)> = scores[c].iter().zip(&data.y).map(|(&s, &l)| (s, l == c)).collect();
            average_precision(&ranked).unwrap_or(0.0)
        })
        .collect();
    aps.iter().sum::<f64>() / n_classes as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> LabeledData {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for c in 0..2 {
            for k in 0..10 {
                x.push(vec![c as f64 * 10.0 + (k as f64 * 0.37).sin(), (k as f64).cos()]);
                y.push(c);
            }
        }
        LabeledData::new(x, y, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn single_point_grid() {
        let p = grid_search(&separable(), &ParamGrid::single(3.0, 0.25), &SvmParams::default(), 3).unwrap();
        assert_eq!((p.cost, p.gamma), (3.0, 0.25));
    }

    #[test]
    fn ties_prefer_smaller_cost_then_gamma() {
        // separable data: every point reaches mAP 1
        let grid = ParamGrid {
            costs: vec![10.0, 1.0],
            gammas: vec![0.5, 0.25],
        };
        let (p, table) = grid_search_table(&separable(), &grid, &SvmParams::default(), 3).unwrap();
        assert!(table.iter().all(|g| g.map == 1.0), "{table:?}");
        assert_eq!((p.cost, p.gamma), (1.0, 0.25));
    }

    #[test]
    fn empty_grid_rejected() {
        let grid = ParamGrid {
            costs: vec![],
            gammas: vec![1.0],
        };
        assert!(grid_search(&separable(), &grid, &SvmParams::default(), 3).is_err());
    }
}
