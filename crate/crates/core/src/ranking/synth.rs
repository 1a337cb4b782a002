use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{GameType, MatchRecord, RankPolarity};
use crate::error::{CdnError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub players: usize,
    pub games: usize,
    pub game_type: GameType,
    /// Standard deviation of per-game score noise.
    pub noise: f64,
    pub skill_mean: f64,
    pub skill_sd: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            players: 200,
            games: 2000,
            game_type: GameType::HeadToHead,
            noise: 2.0,
            skill_mean: 25.0,
            skill_sd: 8.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLog {
    pub records: Vec<MatchRecord>,
    /// Latent skill of every player.
    pub skills: BTreeMap<String, f64>,
}

impl SyntheticLog {
    /// Ordering by summed latent skills, best first, ties to the earlier team.
    pub fn clairvoyant(&self, record: &MatchRecord) -> Vec<usize> {
        let perf: Vec<f64> = record.teams.iter().map(|t| t.iter().map(|p| self.skills[p]).sum()).collect();
        let mut order: Vec<usize> = (0..perf.len()).collect();
        order.sort_by(|&a, &b| perf[b].total_cmp(&perf[a]));
        order
    }
}

fn layout(game_type: GameType, rng: &mut impl Rng) -> (usize, usize) {
    match game_type {
        GameType::HeadToHead => (2, 1),
        GameType::SmallTeam => (2, 2),
        GameType::LargeTeam => (2, 4),
        GameType::FreeForAll => (rng.random_range(3..=8), 1),
    }
}

/// Draws latent skills, then per game samples players into teams, scores
/// each player as skill plus noise and ranks teams by summed score (rank 1
/// best, equal sums share a rank).
pub fn generate_synthetic_log(config: &SynthConfig) -> Result<SyntheticLog> {
    if config.players == 0 || !(config.noise >= 0.0) || !(config.skill_sd > 0.0) {
        return Err(CdnError::InvalidParams("players and skill_sd must be positive and noise nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let width = config.players.to_string().len().max(3);
    let ids: Vec<String> = (0..config.players).map(|i| format!("p{i:0width$}")).collect();
    let skill_dist = Normal::new(config.skill_mean, config.skill_sd).expect("positive sd");
    let skills: BTreeMap<String, f64> = ids.iter().map(|id| (id.clone(), skill_dist.sample(&mut rng))).collect();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut records = Vec::with_capacity(config.games);
    for g in 0..config.games {
        let (n_teams, size) = layout(config.game_type, &mut rng);
        let needed = n_teams * size;
        if needed > config.players {
            return Err(CdnError::InvalidParams(format!(
                "a {} game needs {needed} players but only {} exist",
                config.game_type, config.players
            )));
        }
        let picked = sample(&mut rng, config.players, needed).into_vec();
        let teams: Vec<Vec<String>> = picked.chunks(size).map(|c| c.iter().map(|&i| ids[i].clone()).collect()).collect();
        let scores: Vec<Vec<f64>> = teams
            .iter()
            .map(|t| t.iter().map(|p| skills[p] + config.noise * unit.sample(&mut rng)).collect())
            .collect();
        let sums: Vec<f64> = scores.iter().map(|s| s.iter().sum()).collect();
        let ranks: Vec<i64> = sums.iter().map(|s| 1 + sums.iter().filter(|o| *o > s).count() as i64).collect();
        records.push(MatchRecord::new(
            format!("g{g:05}"),
            config.game_type,
            teams,
            ranks,
            Some(scores),
            g as u64,
            RankPolarity::LowerIsBetter,
        )?);
    }
    Ok(SyntheticLog { records, skills })
}
