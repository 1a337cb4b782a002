use log::warn;

use super::model::RatingModelParams;
use super::MatchRecord;
use crate::error::{CdnError, Result};

/// Settings not learned from the log. `None` values derive from the scores.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Initial skill spread; defaults to the root mean square deviation of
    /// the player scores from `mu`, the maximum-likelihood spread of a
    /// Gaussian located at `mu`.
    pub sigma0: Option<f64>,
    pub beta: Option<f64>,
    pub rho: f64,
    pub grid_points: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { sigma0: None, beta: None, rho: 0.5, grid_points: 201 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: RatingModelParams,
    /// Teams whose performances entered the fit.
    pub teams: usize,
    pub notes: Vec<String>,
}

/// Sets each cutpoint at the boundary between the pooled team performances
/// (sums of player scores) at or below a placement level and those above
/// it, halfway across the gap. `mu` is the minimum player score. Boundaries
/// that do not increase pool the level above into the one below.
pub fn fit_cutpoints(history: &[MatchRecord], config: &FitConfig) -> Result<FitReport> {
    let mut notes = Vec::new();
    let mut perf: Vec<(u32, f64)> = Vec::new();
    let mut scores: Vec<f64> = Vec::new();
    let mut unscored = 0;
    for r in history {
        match r.team_scores() {
            Some(ts) => {
                perf.extend(r.levels().into_iter().zip(ts));
                scores.extend(r.scores.iter().flatten().flatten());
            }
            None => unscored += 1,
        }
    }
    if perf.is_empty() {
        return Err(CdnError::InsufficientData("no game in the history has player scores".into()));
    }
    if unscored > 0 {
        notes.push(format!("{unscored} game(s) without scores were skipped"));
    }
    let n = scores.len() as f64;
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sd = (scores.iter().map(|s| (s - min).powi(2)).sum::<f64>() / n).sqrt();
    let sigma0 = match config.sigma0 {
        Some(s) => s,
        None if sd > 0.0 => sd,
        None => {
            notes.push("scores have no spread; using sigma0 = 1".into());
            1.0
        }
    };
    let mut params = RatingModelParams::from_spread(min, sigma0, (min + max) / 2.0);
    params.rho = config.rho;
    if let Some(b) = config.beta {
        params.beta = b;
        params.team_means = (1..=params.team_means.len()).map(|k| k as f64 * b).collect();
    }
    params.grid.points = config.grid_points;

    let top = perf.iter().map(|p| p.0).max().expect("nonempty");
    let mut sorted: Vec<f64> = perf.iter().map(|p| p.1).collect();
    sorted.sort_by(f64::total_cmp);
    let mut level_map = vec![1u32];
    for i in 1..top {
        let below = perf.iter().filter(|p| p.0 <= i).count();
        let theta = (sorted[below - 1] + sorted[below]) / 2.0;
        if params.cutpoints.last().is_none_or(|&c| theta > c) {
            params.cutpoints.push(theta);
        } else {
            let msg = format!("boundary above level {i} does not increase; level {} pooled into level {i}", i + 1);
            warn!("{msg}");
            notes.push(msg);
        }
        level_map.push(params.cutpoints.len() as u32 + 1);
    }
    if top == 1 {
        let msg = "every team shares one rank level; no cutpoints".to_string();
        warn!("{msg}");
        notes.push(msg);
    }
    params.level_map = level_map;
    params.validate()?;
    Ok(FitReport { params, teams: perf.len(), notes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::{GameType, RankPolarity};

    fn duel(scores: (f64, f64), ranks: (i64, i64)) -> MatchRecord {
        MatchRecord::new(
            "g",
            GameType::HeadToHead,
            vec![vec!["a".into()], vec!["b".into()]],
            vec![ranks.0, ranks.1],
            Some(vec![vec![scores.0], vec![scores.1]]),
            0,
            RankPolarity::LowerIsBetter,
        )
        .unwrap()
    }

    #[test]
    fn clean_split_at_ten() {
        let history = vec![duel((12.0, 8.0), (1, 2)), duel((9.0, 11.0), (2, 1))];
        let fit = fit_cutpoints(&history, &FitConfig::default()).unwrap();
        assert_eq!(fit.params.cutpoints, vec![10.0]);
        assert_eq!(fit.params.mu, 8.0);
        assert_eq!(fit.params.level_map, vec![1, 2]);
    }

    #[test]
    fn single_level_has_no_cutpoints() {
        let history = vec![duel((3.0, 4.0), (1, 1))];
        let fit = fit_cutpoints(&history, &FitConfig::default()).unwrap();
        assert!(fit.params.cutpoints.is_empty());
        assert!(!fit.notes.is_empty());
    }

    #[test]
    fn empty_history_is_rejected() {
        assert!(matches!(fit_cutpoints(&[], &FitConfig::default()), Err(CdnError::InsufficientData(_))));
    }

    #[test]
    fn tied_boundaries_are_pooled() {
        let teams: Vec<Vec<String>> = (0..3).map(|i| vec![format!("p{i}")]).collect();
        let r = MatchRecord::new(
            "g",
            GameType::FreeForAll,
            teams,
            vec![3, 2, 1],
            Some(vec![vec![5.0], vec![5.0], vec![5.0]]),
            0,
            RankPolarity::LowerIsBetter,
        )
        .unwrap();
        let fit = fit_cutpoints(&[r], &FitConfig::default()).unwrap();
        assert_eq!(fit.params.cutpoints, vec![5.0]);
        assert_eq!(fit.params.level_map, vec![1, 2, 2]);
    }
}
