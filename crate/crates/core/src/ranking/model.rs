use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::skills::SkillStore;
use super::MatchRecord;
use crate::error::{CdnError, Result};
use crate::functions::{GaussAxis, GaussianCdf, SampledCdf, MAX_GAUSSIAN_ARITY};
use crate::graph::{Assignment, CdnGraph, FunctionId, VariableDomain, VariableId};

/// Largest team: the team factor covers the players plus one rank variable.
pub const MAX_TEAM_SIZE: usize = MAX_GAUSSIAN_ARITY - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// Initial skill CDF: Gaussian with this mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    pub mean: f64,
    pub sd: f64,
}

/// Parameters of the game model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatingModelParams {
    /// Strictly increasing thresholds on team performance between
    /// consecutive rank levels; the top level's threshold is +inf.
    pub cutpoints: Vec<f64>,
    /// Model level (1-based) of each placement level; empty means identity.
    #[serde(default)]
    pub level_map: Vec<u32>,
    /// Team performance noise scale.
    pub beta: f64,
    /// Player score spread.
    pub sigma: f64,
    /// Player score location.
    pub mu: f64,
    /// Coupling between consecutive team performances.
    pub rho: f64,
    /// Mean of each rank slot in the ordering factors, worst slot first.
    pub team_means: Vec<f64>,
    pub grid: GridConfig,
    pub prior: PriorConfig,
}

impl Default for RatingModelParams {
    fn default() -> Self {
        Self::from_spread(0.0, 1.0, 0.0)
    }
}

impl RatingModelParams {
    /// Defaults derived from a score location `mu`, an initial skill spread
    /// `sigma0` and the prior skill mean. No cutpoints are set.
    pub fn from_spread(mu: f64, sigma0: f64, prior_mean: f64) -> Self {
        let beta = sigma0 / 2.0;
        RatingModelParams {
            cutpoints: Vec::new(),
            level_map: Vec::new(),
            beta,
            sigma: sigma0,
            mu,
            rho: 0.5,
            team_means: (1..=16).map(|n| n as f64 * beta).collect(),
            grid: GridConfig {
                lo: mu - 4.0 * sigma0,
                hi: mu + 6.0 * sigma0,
                points: 201,
            },
            prior: PriorConfig { mean: prior_mean, sd: sigma0 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CdnError::InvalidParams(m));
        if self.cutpoints.iter().any(|c| !c.is_finite()) || self.cutpoints.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("cutpoints {:?} must be finite and strictly increasing", self.cutpoints));
        }
        for (name, v) in [("beta", self.beta), ("sigma", self.sigma), ("prior.sd", self.prior.sd)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !self.mu.is_finite() || !self.prior.mean.is_finite() {
            return bad("mu and prior.mean must be finite".into());
        }
        if !(self.rho.abs() < 1.0) {
            return bad(format!("rho must lie in (-1, 1), got {}", self.rho));
        }
        if self.team_means.len() < 2
            || self.team_means.iter().any(|m| !m.is_finite())
            || self.team_means.windows(2).any(|w| w[0] > w[1])
        {
            return bad("team_means needs at least two finite nondecreasing entries".into());
        }
        let k = self.level_count();
        if self.level_map.iter().any(|&l| l == 0 || l > k) || self.level_map.windows(2).any(|w| w[0] > w[1]) {
            return bad(format!("level_map {:?} must be nondecreasing within 1..={k}", self.level_map));
        }
        if !(self.grid.lo < self.grid.hi) || !self.grid.lo.is_finite() || !self.grid.hi.is_finite() || self.grid.points < 2 {
            return bad("grid needs finite lo < hi and at least two points".into());
        }
        Ok(())
    }

    /// Number of model rank levels.
    pub fn level_count(&self) -> u32 {
        self.cutpoints.len() as u32 + 1
    }

    /// Model level of a placement level.
    pub fn model_level(&self, placement: u32) -> Result<u32> {
        let level = if self.level_map.is_empty() {
            placement
        } else {
            *self.level_map.get(placement as usize - 1).ok_or_else(|| {
                CdnError::InvalidMatch(format!("placement level {placement} is outside the fitted alphabet"))
            })?
        };
        if level == 0 || level > self.level_count() {
            return Err(CdnError::InvalidMatch(format!(
                "placement level {placement} exceeds the {} model levels",
                self.level_count()
            )));
        }
        Ok(level)
    }

    fn rank_levels(&self) -> Vec<f64> {
        (1..=self.level_count()).map(f64::from).collect()
    }

    /// Rank levels mapped to their cutpoints, the top level to +inf.
    fn rank_axis(&self) -> GaussAxis {
        let mut thresholds = self.cutpoints.clone();
        thresholds.push(f64::INFINITY);
        GaussAxis::Thresholded { levels: self.rank_levels(), thresholds }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let params: Self = toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| {
                    let before = &text[..s.start.min(text.len())];
                    let line = before.matches('\n').count() + 1;
                    (line, s.start - before.rfind('\n').map_or(0, |i| i + 1) + 1)
                })
                .unwrap_or((0, 0));
            CdnError::parse(line, column, e.message().to_string())
        })?;
        params.validate()?;
        Ok(params)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("parameters serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CdnError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| e.with_path(path.display().to_string()))
    }
}

/// Team factor over `(player scores, R)`: the joint Gaussian CDF of
/// `(U, T)` with `U ~ N(mu 1, sigma^2 I)` and `T = 1'U + beta Z`, where rank
/// level `i` is evaluated at cutpoint `i` and the top level at +inf.
pub fn team_function(team_size: usize, params: &RatingModelParams) -> Result<GaussianCdf> {
    if team_size == 0 || team_size > MAX_TEAM_SIZE {
        return Err(CdnError::TeamTooLarge(team_size));
    }
    let d = team_size;
    let (s2, b2) = (params.sigma * params.sigma, params.beta * params.beta);
    let n = d + 1;
    let mut cov = vec![0.0; n * n];
    for i in 0..d {
        cov[i * n + i] = s2;
        cov[i * n + d] = s2;
        cov[d * n + i] = s2;
    }
    cov[d * n + d] = d as f64 * s2 + b2;
    let mut mean = vec![params.mu; d];
    mean.push(d as f64 * params.mu);
    let mut axes = vec![GaussAxis::Continuous; d];
    axes.push(params.rank_axis());
    GaussianCdf::with_axes(mean, cov, axes)
}

/// Ordering factor between rank slots `slot` and `slot + 1` (0-based, worst
/// first): a bivariate Gaussian CDF with means from `team_means` and
/// covariance `beta^2 [[1, rho], [rho, 1]]`. Like the team factor, rank
/// level `i` is evaluated at cutpoint `i` and the top level at +inf.
pub fn ordering_function(slot: usize, params: &RatingModelParams) -> Result<GaussianCdf> {
    let (Some(&a), Some(&b)) = (params.team_means.get(slot), params.team_means.get(slot + 1)) else {
        return Err(CdnError::InvalidParams(format!(
            "team_means has no entries for slots {} and {}",
            slot + 1,
            slot + 2
        )));
    };
    if a > b {
        return Err(CdnError::InvalidParams(format!("team means {a} > {b} break the slot ordering")));
    }
    let b2 = params.beta * params.beta;
    let axis = params.rank_axis();
    GaussianCdf::with_axes(vec![a, b], vec![b2, params.rho * b2, params.rho * b2, b2], vec![axis.clone(), axis])
}

/// A game CDN with handles to its variables and factors. Team-indexed
/// vectors follow the record's team order.
#[derive(Debug, Clone)]
pub struct MatchCdn {
    pub graph: CdnGraph,
    pub players: Vec<Vec<VariableId>>,
    pub ranks: Vec<VariableId>,
    /// Model rank level of each team.
    pub levels: Vec<u32>,
    /// Team indices from the worst placement to the best.
    pub slots: Vec<usize>,
    pub skill_factors: Vec<Vec<FunctionId>>,
    pub team_factors: Vec<FunctionId>,
    pub ordering_factors: Vec<FunctionId>,
}

impl MatchCdn {
    /// Every rank variable at its observed level.
    pub fn rank_evidence(&self) -> Assignment {
        self.ranks.iter().zip(&self.levels).map(|(&r, &l)| (r, f64::from(l))).collect()
    }

    /// Rank variable of slot `n`, worst first.
    pub fn slot_rank(&self, n: usize) -> VariableId {
        self.ranks[self.slots[n]]
    }
}

/// Builds the game CDN: a skill factor per player, a team factor per team
/// and ordering factors between consecutive rank slots.
pub fn build_match_cdn(record: &MatchRecord, skills: &SkillStore, params: &RatingModelParams) -> Result<MatchCdn> {
    record.validate()?;
    params.validate()?;
    if skills.grid().lo != params.grid.lo || skills.grid().hi != params.grid.hi || skills.grid().points != params.grid.points {
        return Err(CdnError::InvalidParams("skill store grid differs from the model grid".into()));
    }
    if let Some(t) = record.teams.iter().find(|t| t.len() > MAX_TEAM_SIZE) {
        return Err(CdnError::TeamTooLarge(t.len()));
    }
    if record.teams.len() > params.team_means.len() {
        return Err(CdnError::InvalidParams(format!(
            "{} teams but only {} team means",
            record.teams.len(),
            params.team_means.len()
        )));
    }
    let levels = record
        .levels()
        .into_iter()
        .map(|l| params.model_level(l))
        .collect::<Result<Vec<u32>>>()?;
    let mut slots: Vec<usize> = (0..record.teams.len()).collect();
    slots.sort_by_key(|&t| levels[t]);

    let grid = &params.grid;
    let score_domain = VariableDomain::continuous(grid.lo, grid.hi, grid.points)?;
    let rank_domain = VariableDomain::discrete(params.rank_levels())?;
    let mut graph = CdnGraph::new();
    let mut players = Vec::new();
    let mut skill_factors = Vec::new();
    for team in &record.teams {
        let mut vars = Vec::new();
        let mut factors = Vec::new();
        for p in team {
            let values = skills.get(p).ok_or_else(|| CdnError::UnknownPlayer(p.clone()))?;
            let x = graph.add_variable(format!("x:{p}"), score_domain.clone())?;
            let s = SampledCdf::new(grid.lo, grid.hi, values.to_vec())?;
            factors.push(graph.add_labeled_function(Some(format!("s:{p}")), &[x], Arc::new(s))?);
            vars.push(x);
        }
        players.push(vars);
        skill_factors.push(factors);
    }
    let mut ranks = vec![None; record.teams.len()];
    for (n, &t) in slots.iter().enumerate() {
        ranks[t] = Some(graph.add_variable(format!("R{}", n + 1), rank_domain.clone())?);
    }
    let ranks: Vec<VariableId> = ranks.into_iter().map(|r| r.expect("every team has a slot")).collect();
    let mut team_factors = Vec::new();
    for (t, vars) in players.iter().enumerate() {
        let g = team_function(vars.len(), params)?;
        let mut scope = vars.clone();
        scope.push(ranks[t]);
        team_factors.push(graph.add_labeled_function(Some(format!("g:{t}")), &scope, Arc::new(g))?);
    }
    let mut ordering_factors = Vec::new();
    for n in 0..slots.len() - 1 {
        let h = ordering_function(n, params)?;
        let scope = [ranks[slots[n]], ranks[slots[n + 1]]];
        ordering_factors.push(graph.add_labeled_function(Some(format!("h:{}", n + 1)), &scope, Arc::new(h))?);
    }
    let structure = graph.validate_structure();
    if !structure.is_tree {
        let cycle = structure.cycle.as_deref().map(|c| graph.describe_cycle(c)).unwrap_or_default();
        return Err(CdnError::NotATree { cycle });
    }
    Ok(MatchCdn {
        graph,
        players,
        ranks,
        levels,
        slots,
        skill_factors,
        team_factors,
        ordering_factors,
    })
}
