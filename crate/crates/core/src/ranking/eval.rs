use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::RatingModelParams;
use super::skills::{predict, update_skills, SkillStore};
use super::MatchRecord;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Seed of the random baseline.
    pub seed: u64,
    /// Run the Elo baseline on two-team games.
    pub elo: bool,
    pub elo_k: f64,
    pub elo_initial: f64,
    /// Block length for smoothing the cumulative error series.
    pub window: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { seed: 0, elo: true, elo_k: 24.0, elo_initial: 1500.0, window: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionScore {
    /// Fraction of teams whose predicted placement falls outside the
    /// placements their observed rank allows.
    pub slot_error: f64,
    /// Fraction of pairs with different observed ranks predicted in the
    /// wrong order; `None` when every team tied.
    pub inversion: Option<f64>,
}

/// Scores a predicted ordering (team indices, best first) against the
/// observed ranks.
pub fn score_prediction(record: &MatchRecord, ordering: &[usize]) -> PredictionScore {
    let levels = record.levels();
    let n = levels.len();
    let mut pos = vec![0; n];
    for (p, &t) in ordering.iter().enumerate() {
        pos[t] = p;
    }
    let mut wrong = 0;
    for t in 0..n {
        // placements 0-based from the best: teams strictly better come first
        let better = levels.iter().filter(|&&l| l > levels[t]).count();
        let tied = levels.iter().filter(|&&l| l == levels[t]).count();
        if pos[t] < better || pos[t] >= better + tied {
            wrong += 1;
        }
    }
    let (mut pairs, mut inverted) = (0, 0);
    for a in 0..n {
        for b in a + 1..n {
            if levels[a] != levels[b] {
                pairs += 1;
                if (levels[a] > levels[b]) != (pos[a] < pos[b]) {
                    inverted += 1;
                }
            }
        }
    }
    PredictionScore {
        slot_error: wrong as f64 / n as f64,
        inversion: (pairs > 0).then(|| inverted as f64 / pairs as f64),
    }
}

/// Elo ratings per player; a team's rating is the mean of its members.
#[derive(Debug, Clone, PartialEq)]
pub struct EloRatings {
    pub ratings: BTreeMap<String, f64>,
    pub k: f64,
    pub initial: f64,
}

impl EloRatings {
    pub fn new(k: f64, initial: f64) -> Self {
        EloRatings { ratings: BTreeMap::new(), k, initial }
    }

    fn team(&self, team: &[String]) -> f64 {
        team.iter().map(|p| self.ratings.get(p).copied().unwrap_or(self.initial)).sum::<f64>() / team.len() as f64
    }

    /// Ordering of a two-team game; `None` for other games.
    pub fn predict(&self, record: &MatchRecord) -> Option<Vec<usize>> {
        (record.teams.len() == 2).then(|| {
            if self.team(&record.teams[0]) >= self.team(&record.teams[1]) {
                vec![0, 1]
            } else {
                vec![1, 0]
            }
        })
    }

    pub fn update(&mut self, record: &MatchRecord) {
        if record.teams.len() != 2 {
            return;
        }
        let (ra, rb) = (self.team(&record.teams[0]), self.team(&record.teams[1]));
        let expected_a = 1.0 / (1.0 + 10f64.powf((rb - ra) / 400.0));
        let levels = record.levels();
        let actual_a = match levels[0].cmp(&levels[1]) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Less => 0.0,
        };
        let delta = self.k * (actual_a - expected_a);
        for (team, d) in record.teams.iter().zip([delta, -delta]) {
            for p in team {
                *self.ratings.entry(p.clone()).or_insert(self.initial) += d;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameEval {
    pub index: usize,
    pub game_id: String,
    pub model: PredictionScore,
    pub random: PredictionScore,
    pub elo: Option<PredictionScore>,
    pub cold_start: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub games: Vec<GameEval>,
    /// Mean model error over the first `i + 1` games.
    pub model_cumulative: Vec<f64>,
    pub random_cumulative: Vec<f64>,
    /// Cumulative Elo error over the games Elo scored.
    pub elo_cumulative: Vec<f64>,
    pub window: usize,
    pub skills: SkillStore,
}

fn cumulative(errors: &[f64]) -> Vec<f64> {
    let mut total = 0.0;
    errors
        .iter()
        .enumerate()
        .map(|(i, e)| {
            total += e;
            total / (i + 1) as f64
        })
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn final_quartile(errors: &[f64]) -> f64 {
    mean(&errors[errors.len() - errors.len() / 4..])
}

/// Means of consecutive complete blocks of `window` values.
pub fn smoothed_series(series: &[f64], window: usize) -> Vec<f64> {
    if window == 0 {
        return Vec::new();
    }
    series.chunks_exact(window).map(mean).collect()
}

impl EvalReport {
    pub fn model_errors(&self) -> Vec<f64> {
        self.games.iter().map(|g| g.model.slot_error).collect()
    }

    pub fn random_errors(&self) -> Vec<f64> {
        self.games.iter().map(|g| g.random.slot_error).collect()
    }

    pub fn elo_errors(&self) -> Vec<f64> {
        self.games.iter().filter_map(|g| g.elo.map(|e| e.slot_error)).collect()
    }

    pub fn final_model_error(&self) -> f64 {
        self.model_cumulative.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_random_error(&self) -> f64 {
        self.random_cumulative.last().copied().unwrap_or(f64::NAN)
    }

    pub fn final_elo_error(&self) -> Option<f64> {
        self.elo_cumulative.last().copied()
    }

    /// Mean model error over the last quarter of the games.
    pub fn model_final_quartile(&self) -> f64 {
        final_quartile(&self.model_errors())
    }

    pub fn random_final_quartile(&self) -> f64 {
        final_quartile(&self.random_errors())
    }

    pub fn model_inversion_rate(&self) -> f64 {
        let v: Vec<f64> = self.games.iter().filter_map(|g| g.model.inversion).collect();
        mean(&v)
    }

    /// Block means of the cumulative model error.
    pub fn smoothed_model_series(&self) -> Vec<f64> {
        smoothed_series(&self.model_cumulative, self.window)
    }

    pub fn smoothed_is_non_increasing(&self) -> bool {
        self.smoothed_model_series().windows(2).all(|w| w[1] <= w[0])
    }

    /// Two columns: game index and cumulative model error.
    pub fn series_text(&self) -> String {
        let mut out = String::from("# game\tcumulative_error\n");
        for (i, e) in self.model_cumulative.iter().enumerate() {
            let _ = writeln!(out, "{}\t{e:.6}", i + 1);
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "games\t{}", self.games.len());
        let _ = writeln!(
            out,
            "model\tfinal {:.4}\tfinal_quartile {:.4}\tinversion {:.4}",
            self.final_model_error(),
            self.model_final_quartile(),
            self.model_inversion_rate()
        );
        let _ = writeln!(
            out,
            "random\tfinal {:.4}\tfinal_quartile {:.4}",
            self.final_random_error(),
            self.random_final_quartile()
        );
        match self.final_elo_error() {
            Some(e) => {
                let _ = writeln!(out, "elo\tfinal {e:.4}\tfinal_quartile {:.4}\tgames {}", final_quartile(&self.elo_errors()), self.elo_cumulative.len());
            }
            None => {
                let _ = writeln!(out, "elo\tnot run");
            }
        }
        let smoothed: Vec<String> = self.smoothed_model_series().iter().map(|v| format!("{v:.4}")).collect();
        let _ = writeln!(out, "smoothed\t{}", smoothed.join(" "));
        out
    }
}

/// Replays `history` in order: predict each game with the current skills,
/// score the prediction, then learn from the outcome.
pub fn evaluate_stream(history: &[MatchRecord], params: &RatingModelParams, config: &EvalConfig) -> Result<EvalReport> {
    let mut skills = SkillStore::from_params(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut elo = EloRatings::new(config.elo_k, config.elo_initial);
    let mut games = Vec::with_capacity(history.len());
    for (index, record) in history.iter().enumerate() {
        let prediction = predict(record, &skills);
        let mut random: Vec<usize> = (0..record.teams.len()).collect();
        random.shuffle(&mut rng);
        let elo_score = if config.elo {
            elo.predict(record).map(|o| score_prediction(record, &o))
        } else {
            None
        };
        games.push(GameEval {
            index,
            game_id: record.game_id.clone(),
            model: score_prediction(record, &prediction.ordering),
            random: score_prediction(record, &random),
            elo: elo_score,
            cold_start: prediction.cold_start.len(),
        });
        for p in record.teams.iter().flatten() {
            skills.ensure(p);
        }
        update_skills(record, &mut skills, params)?;
        if config.elo {
            elo.update(record);
        }
    }
    let model: Vec<f64> = games.iter().map(|g| g.model.slot_error).collect();
    let random: Vec<f64> = games.iter().map(|g| g.random.slot_error).collect();
    let elo_errors: Vec<f64> = games.iter().filter_map(|g| g.elo.map(|e| e.slot_error)).collect();
    Ok(EvalReport {
        model_cumulative: cumulative(&model),
        random_cumulative: cumulative(&random),
        elo_cumulative: cumulative(&elo_errors),
        games,
        window: config.window,
        skills,
    })
}
