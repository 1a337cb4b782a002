//! Structured ranking of multiplayer games: per-game CDNs, online skill
//! learning from DSP messages, prediction and evaluation.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CdnError, Result};

mod eval;
mod fit;
mod log;
mod model;
mod skills;
mod synth;

pub use self::eval::{
    evaluate_stream, score_prediction, smoothed_series, EloRatings, EvalConfig, EvalReport, GameEval,
    PredictionScore,
};
pub use self::fit::{fit_cutpoints, FitConfig, FitReport};
pub use self::log::{parse_match_log, read_match_log, write_match_log, LogFormat, MatchLog};
pub use self::model::{
    build_match_cdn, ordering_function, team_function, GridConfig, MatchCdn, PriorConfig, RatingModelParams,
    MAX_TEAM_SIZE,
};
pub use self::skills::{predict, skill_mode, update_skills, Prediction, SkillGrid, SkillStore, UpdateReport};
pub use self::synth::{generate_synthetic_log, SynthConfig, SyntheticLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GameType {
    LargeTeam,
    SmallTeam,
    HeadToHead,
    FreeForAll,
}

impl fmt::Display for GameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GameType::LargeTeam => "LargeTeam",
            GameType::SmallTeam => "SmallTeam",
            GameType::HeadToHead => "HeadToHead",
            GameType::FreeForAll => "FreeForAll",
        })
    }
}

impl FromStr for GameType {
    type Err = CdnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LargeTeam" => Ok(GameType::LargeTeam),
            "SmallTeam" => Ok(GameType::SmallTeam),
            "HeadToHead" => Ok(GameType::HeadToHead),
            "FreeForAll" => Ok(GameType::FreeForAll),
            other => Err(CdnError::InvalidMatch(format!("unknown game type `{other}`"))),
        }
    }
}

/// Which end of the observed rank numbers is the best placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPolarity {
    #[default]
    LowerIsBetter,
    HigherIsBetter,
}

impl FromStr for RankPolarity {
    type Err = CdnError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lower_is_better" => Ok(RankPolarity::LowerIsBetter),
            "higher_is_better" => Ok(RankPolarity::HigherIsBetter),
            other => Err(CdnError::InvalidMatch(format!(
                "rank polarity must be lower_is_better or higher_is_better, got `{other}`"
            ))),
        }
    }
}

impl fmt::Display for RankPolarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankPolarity::LowerIsBetter => "lower_is_better",
            RankPolarity::HigherIsBetter => "higher_is_better",
        })
    }
}

/// One finished game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub game_id: String,
    pub game_type: GameType,
    /// Player ids per team.
    pub teams: Vec<Vec<String>>,
    /// Observed rank per team, read with `polarity`.
    pub ranks: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub timestamp: u64,
    #[serde(skip)]
    pub polarity: RankPolarity,
}

impl MatchRecord {
    pub fn new(
        game_id: impl Into<String>,
        game_type: GameType,
        teams: Vec<Vec<String>>,
        ranks: Vec<i64>,
        scores: Option<Vec<Vec<f64>>>,
        timestamp: u64,
        polarity: RankPolarity,
    ) -> Result<Self> {
        let record = MatchRecord {
            game_id: game_id.into(),
            game_type,
            teams,
            ranks,
            scores,
            timestamp,
            polarity,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        if self.teams.len() < 2 {
            return Err(CdnError::InvalidMatch(format!(
                "game `{}` has {} team(s); at least 2 are required",
                self.game_id,
                self.teams.len()
            )));
        }
        if self.ranks.len() != self.teams.len() {
            return Err(CdnError::InvalidMatch(format!(
                "game `{}` has {} teams but {} ranks",
                self.game_id,
                self.teams.len(),
                self.ranks.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for team in &self.teams {
            if team.is_empty() {
                return Err(CdnError::InvalidMatch(format!("game `{}` has an empty team", self.game_id)));
            }
            for p in team {
                if !seen.insert(p) {
                    return Err(CdnError::InvalidMatch(format!(
                        "player `{p}` appears twice in game `{}`",
                        self.game_id
                    )));
                }
            }
        }
        if let Some(scores) = &self.scores {
            let shape_ok = scores.len() == self.teams.len()
                && scores.iter().zip(&self.teams).all(|(s, t)| s.len() == t.len());
            if !shape_ok {
                return Err(CdnError::InvalidMatch(format!(
                    "scores of game `{}` do not match its teams",
                    self.game_id
                )));
            }
            if scores.iter().flatten().any(|s| !s.is_finite()) {
                return Err(CdnError::InvalidMatch(format!("game `{}` has a non-finite score", self.game_id)));
            }
        }
        Ok(())
    }

    /// Placement level per team: 1 is the worst placement in this game and
    /// tied teams share a level.
    pub fn levels(&self) -> Vec<u32> {
        let mut distinct: Vec<i64> = self.ranks.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if self.polarity == RankPolarity::LowerIsBetter {
            distinct.reverse();
        }
        self.ranks
            .iter()
            .map(|r| distinct.iter().position(|d| d == r).expect("rank is present") as u32 + 1)
            .collect()
    }

    /// Sum of player scores per team, when scores are present.
    pub fn team_scores(&self) -> Option<Vec<f64>> {
        self.scores.as_ref().map(|s| s.iter().map(|t| t.iter().sum()).collect())
    }

    pub fn player_count(&self) -> usize {
        self.teams.iter().map(Vec::len).sum()
    }
}
