use alloc::vec::Vec;

/// `β γ c_j + (1 - β) S(i, j)` for one candidate.
pub fn ranking_score(beta: f64, gamma: f64, contribution: f64, rec: f64) -> f64 {
    beta * gamma * contribution + (1.0 - beta) * rec
}

/// Orders the selected candidate indices by descending ranking score, ties to the
/// lower index (candidates are indexed in item-id order).
pub fn rank_selected(
    selected: &[usize],
    rec: &[f64],
    contribution: &[f64],
    beta: f64,
    gamma: f64,
) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = selected
        .iter()
        .map(|&j| (ranking_score(beta, gamma, contribution[j], rec[j]), j))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    scored.into_iter().map(|(_, j)| j).collect()
}
