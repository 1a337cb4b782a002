use std::collections::BTreeMap;

use log::{debug, info, warn};
use serde::{Deserialize, Serialize};

use super::model::{build_match_cdn, RatingModelParams};
use super::MatchRecord;
use crate::dsp::{marginalize_rest, propagate};
use crate::error::{CdnError, Result};
use crate::mvn::normal_cdf;

/// Uniform grid shared by every skill function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl SkillGrid {
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.point(i)).collect()
    }
}

/// Per-player skill CDFs sampled on a shared grid, each with top value 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillStore {
    grid: SkillGrid,
    prior: Vec<f64>,
    skills: BTreeMap<String, Vec<f64>>,
}

impl SkillStore {
    /// Empty store whose cold-start skill is a Gaussian CDF.
    pub fn new(grid: SkillGrid, prior_mean: f64, prior_sd: f64) -> Result<Self> {
        if grid.points < 2 || !(grid.lo < grid.hi) || !(prior_sd > 0.0) {
            return Err(CdnError::InvalidParams("invalid skill grid or prior".into()));
        }
        let mut prior: Vec<f64> = grid.values().iter().map(|&x| normal_cdf((x - prior_mean) / prior_sd)).collect();
        let top = *prior.last().expect("grid has points");
        if !(top > 0.0) {
            return Err(CdnError::InvalidParams("prior has no mass on the grid".into()));
        }
        prior.iter_mut().for_each(|v| *v /= top);
        Ok(SkillStore { grid, prior, skills: BTreeMap::new() })
    }

    pub fn from_params(params: &RatingModelParams) -> Result<Self> {
        let g = &params.grid;
        Self::new(SkillGrid { lo: g.lo, hi: g.hi, points: g.points }, params.prior.mean, params.prior.sd)
    }

    pub fn grid(&self) -> &SkillGrid {
        &self.grid
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn get(&self, player: &str) -> Option<&[f64]> {
        self.skills.get(player).map(Vec::as_slice)
    }

    /// The player's skill, or the prior for an unseen player.
    pub fn skill_or_prior(&self, player: &str) -> &[f64] {
        self.get(player).unwrap_or(&self.prior)
    }

    /// Adds `player` with the prior skill; returns whether it was new.
    pub fn ensure(&mut self, player: &str) -> bool {
        if self.skills.contains_key(player) {
            return false;
        }
        self.skills.insert(player.to_string(), self.prior.clone());
        true
    }

    /// Stores a skill after checking it is a valid sampled CDF with top 1.
    pub fn insert(&mut self, player: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.grid.points {
            return Err(CdnError::InvalidParams(format!(
                "skill has {} values on a {}-point grid",
                values.len(),
                self.grid.points
            )));
        }
        let valid = values.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v))
            && values.windows(2).all(|w| w[1] >= w[0] - 1e-9)
            && (values[values.len() - 1] - 1.0).abs() <= 1e-12;
        if !valid {
            return Err(CdnError::InvalidParams("skill must be nondecreasing in [0, 1] with top 1".into()));
        }
        self.skills.insert(player.into(), values);
        Ok(())
    }

    pub fn players(&self) -> impl Iterator<Item = &str> {
        self.skills.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.skills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.skills.is_empty()
    }
}

/// Grid index of the largest backward difference of a sampled CDF, the
/// value one step below the grid taken as 0. Ties go to the lowest index.
pub fn skill_mode(values: &[f64]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    let mut prev = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let d = v - prev;
        if d > best.1 {
            best = (i, d);
        }
        prev = v;
    }
    best.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Modal performance per player, by team.
    pub modes: Vec<Vec<f64>>,
    /// Sum of member modes per team.
    pub team_performance: Vec<f64>,
    /// Team indices from predicted best to worst; ties keep team order.
    pub ordering: Vec<usize>,
    /// Players scored with the prior because the store lacked them.
    pub cold_start: Vec<String>,
}

impl Prediction {
    /// Predicted placement of each team, 0 for the best.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.ordering.len()];
        for (p, &t) in self.ordering.iter().enumerate() {
            pos[t] = p;
        }
        pos
    }
}

/// Predicts the ordering of teams from the modes of their players' skills.
pub fn predict(record: &MatchRecord, skills: &SkillStore) -> Prediction {
    let mut cold_start = Vec::new();
    let modes: Vec<Vec<f64>> = record
        .teams
        .iter()
        .map(|team| {
            team.iter()
                .map(|p| {
                    if skills.get(p).is_none() {
                        info!("player `{p}` has no skill yet; using the prior");
                        cold_start.push(p.clone());
                    }
                    skills.grid.point(skill_mode(skills.skill_or_prior(p)))
                })
                .collect()
        })
        .collect();
    let team_performance: Vec<f64> = modes.iter().map(|m| m.iter().sum()).collect();
    let mut ordering: Vec<usize> = (0..record.teams.len()).collect();
    ordering.sort_by(|&a, &b| team_performance[b].total_cmp(&team_performance[a]));
    Prediction { modes, team_performance, ordering, cold_start }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct UpdateReport {
    pub updated: usize,
    /// Grid values raised to keep an updated skill nondecreasing.
    pub clamped: usize,
    /// Players whose message vanished on the whole grid.
    pub skipped: Vec<String>,
}

/// Runs DSP on the game CDN rooted at each player in turn, with every rank
/// observed, teammates observed at their scores when the record has them and
/// other players marginalized, then multiplies the player's skill by the
/// message from the team factor and rescales it to top value 1.
pub fn update_skills(record: &MatchRecord, skills: &mut SkillStore, params: &RatingModelParams) -> Result<UpdateReport> {
    let cdn = build_match_cdn(record, skills, params)?;
    let base = cdn.rank_evidence();
    let (lo, hi) = (params.grid.lo, params.grid.hi);
    let mut messages = Vec::new();
    for (t, team) in record.teams.iter().enumerate() {
        for (j, player) in team.iter().enumerate() {
            let x = cdn.players[t][j];
            let mut evidence = base.clone();
            if let Some(scores) = &record.scores {
                for (i, &y) in cdn.players[t].iter().enumerate() {
                    if i != j {
                        let s = scores[t][i];
                        if !(lo..=hi).contains(&s) {
                            debug!("score {s} of a teammate of `{player}` clamped to the skill grid");
                        }
                        evidence.insert(y, s.clamp(lo, hi));
                    }
                }
            }
            let reduced = marginalize_rest(&cdn.graph, x, &evidence)?;
            let result = propagate(&reduced, &evidence, x)?;
            let message = result
                .root_messages
                .into_iter()
                .find(|(f, _)| *f == cdn.team_factors[t])
                .map(|(_, m)| m.mu)
                .ok_or_else(|| CdnError::ScheduleError(format!("no team message reached `{player}`")))?;
            messages.push((player.clone(), message));
        }
    }
    let mut report = UpdateReport::default();
    for (player, message) in messages {
        let current = skills.skill_or_prior(&player);
        let mut next: Vec<f64> = current.iter().zip(&message).map(|(s, m)| s * m).collect();
        let top = next[next.len() - 1];
        if !(top > 0.0 && top.is_finite()) {
            warn!("message to `{player}` vanished at the grid top; skill left unchanged");
            report.skipped.push(player);
            continue;
        }
        next.iter_mut().for_each(|v| *v /= top);
        let mut running = 0.0f64;
        for v in next.iter_mut() {
            if *v < running {
                if running - *v > 1e-9 {
                    warn!("updated skill of `{player}` decreased by {:.3e}; clamped", running - *v);
                }
                report.clamped += 1;
                *v = running;
            }
            running = *v;
        }
        *next.last_mut().expect("grid has points") = 1.0;
        skills.skills.insert(player, next);
        report.updated += 1;
    }
    Ok(report)
}
