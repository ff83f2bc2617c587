use crate::error::{Error, Result};

/// Average precision of a scored list: rank by descending score (ties keep input order) and
/// average precision@r over the ranks r of the positives.
pub fn average_precision(scored: &[(f64, bool)]) -> Result<f64> {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].0.total_cmp(&scored[a].0));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if scored[i].1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    if hits == 0 {
        return Err(Error::UndefinedAp);
    }
    Ok(sum / hits as f64)
}

/// Unweighted mean of per-class APs.
pub fn mean_ap(aps: &[f64]) -> f64 {
    if aps.is_empty() {
        return 0.0;
    }
    aps.iter().sum::<f64>() / aps.len() as f64
}
