use super::LinModelError;

/// Area under the ROC curve as the Mann–Whitney statistic, with tied scores
/// sharing their average rank.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, LinModelError> {
    if scores.len() != labels.len() {
        return Err(LinModelError::Length(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(LinModelError::SingleClass);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(LinModelError::Domain("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; the tie block [i, j] shares the midrank
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    let u = rank_sum_pos - np * (np + 1.0) / 2.0;
    Ok(u / (np * n_neg as f64))
}

/// Share of the reduced model's residual variance explained by the added
/// regressors: `(R²_full − R²_reduced) / (1 − R²_reduced)`.
pub fn partial_r2(r2_full: f64, r2_reduced: f64) -> Result<f64, LinModelError> {
    if !(0.0..=1.0).contains(&r2_full) || !(0.0..=1.0).contains(&r2_reduced) {
        return Err(LinModelError::Domain(format!(
            "R² values must lie in [0, 1] (full {r2_full}, reduced {r2_reduced})"
        )));
    }
    if r2_reduced > r2_full {
        return Err(LinModelError::Domain(format!(
            "reduced R² {r2_reduced} exceeds full R² {r2_full}"
        )));
    }
    if r2_reduced >= 1.0 {
        return Err(LinModelError::Domain("reduced model already fits exactly".into()));
    }
    Ok(((r2_full - r2_reduced) / (1.0 - r2_reduced)).clamp(0.0, 1.0))
}
