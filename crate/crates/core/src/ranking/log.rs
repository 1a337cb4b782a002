//! Match log files: one JSON object per line, or flat CSV with one row per
//! player. A `#! rank_polarity = ...` directive line sets the polarity.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GameType, MatchRecord, RankPolarity};
use crate::error::{CdnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchLog {
    pub polarity: RankPolarity,
    pub records: Vec<MatchRecord>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct JsonRecord {
    #[serde(alias = "gameId")]
    game_id: String,
    #[serde(alias = "gameType")]
    game_type: GameType,
    teams: Vec<Vec<String>>,
    ranks: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scores: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    timestamp: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    #[serde(alias = "gameId")]
    game_id: String,
    #[serde(alias = "gameType")]
    game_type: GameType,
    #[serde(default)]
    timestamp: Option<u64>,
    team: usize,
    player: String,
    rank: i64,
    #[serde(default)]
    score: Option<f64>,
}

fn directive(line: &str, number: usize) -> Result<Option<RankPolarity>> {
    let Some(body) = line.trim_start().strip_prefix("#!") else {
        return Ok(None);
    };
    let Some((key, value)) = body.split_once('=') else {
        return Err(CdnError::parse(number, 1, "directive must have the form `#! key = value`"));
    };
    if key.trim() != "rank_polarity" {
        return Err(CdnError::parse(number, 3, format!("unknown directive `{}`", key.trim())));
    }
    value
        .trim()
        .parse()
        .map(Some)
        .map_err(|e: CdnError| CdnError::parse(number, line.find('=').unwrap_or(0) + 2, e.to_string()))
}

/// Parses a match log held in memory. Syntax errors carry line and column;
/// records that parse but break the schema carry their 0-based index.
pub fn parse_match_log(text: &str) -> Result<MatchLog> {
    let mut polarity = RankPolarity::default();
    let mut format = None;
    for (i, line) in text.lines().enumerate() {
        if let Some(p) = directive(line, i + 1)? {
            polarity = p;
            continue;
        }
        let t = line.trim();
        if format.is_none() && !t.is_empty() && !t.starts_with('#') {
            format = Some(if t.starts_with('{') { LogFormat::Jsonl } else { LogFormat::Csv });
        }
    }
    let mut records = match format {
        None => Vec::new(),
        Some(LogFormat::Jsonl) => parse_jsonl(text)?,
        Some(LogFormat::Csv) => parse_csv(text)?,
    };
    for (index, r) in records.iter_mut().enumerate() {
        r.polarity = polarity;
        r.validate().map_err(|e| CdnError::Schema { index, message: e.to_string() })?;
    }
    Ok(MatchLog { polarity, records })
}

fn parse_jsonl(text: &str) -> Result<Vec<MatchRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let index = out.len();
        let raw: JsonRecord = serde_json::from_str(t).map_err(|e| {
            if e.is_data() {
                CdnError::Schema { index, message: e.to_string() }
            } else {
                let offset = line.len() - line.trim_start().len();
                CdnError::parse(i + 1, e.column() + offset, e.to_string())
            }
        })?;
        out.push(MatchRecord {
            game_id: raw.game_id,
            game_type: raw.game_type,
            teams: raw.teams,
            ranks: raw.ranks,
            scores: raw.scores,
            timestamp: raw.timestamp.unwrap_or(index as u64),
            polarity: RankPolarity::default(),
        });
    }
    Ok(out)
}

fn parse_csv(text: &str) -> Result<Vec<MatchRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out: Vec<MatchRecord> = Vec::new();
    let mut score_flags: Vec<bool> = Vec::new();
    for row in reader.deserialize::<CsvRow>() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            CdnError::parse(line, 1, e.to_string())
        })?;
        let index = match out.last() {
            Some(last) if last.game_id == row.game_id => out.len() - 1,
            _ => {
                out.push(MatchRecord {
                    game_id: row.game_id.clone(),
                    game_type: row.game_type,
                    teams: Vec::new(),
                    ranks: Vec::new(),
                    scores: None,
                    timestamp: row.timestamp.unwrap_or(out.len() as u64),
                    polarity: RankPolarity::default(),
                });
                score_flags.push(row.score.is_some());
                out.len() - 1
            }
        };
        let schema = |message: String| CdnError::Schema { index, message };
        let record = &mut out[index];
        if row.game_type != record.game_type {
            return Err(schema("rows of one game disagree on game_type".into()));
        }
        if row.score.is_some() != score_flags[index] {
            return Err(schema("either every row of a game has a score or none does".into()));
        }
        if row.team == record.teams.len() {
            record.teams.push(Vec::new());
            record.ranks.push(row.rank);
            if row.score.is_some() {
                record.scores.get_or_insert_with(Vec::new).push(Vec::new());
            }
        } else if row.team > record.teams.len() {
            return Err(schema(format!("team {} appears before team {}", row.team, record.teams.len())));
        } else if record.ranks[row.team] != row.rank {
            return Err(schema(format!("rows of team {} disagree on rank", row.team)));
        }
        record.teams[row.team].push(row.player);
        if let (Some(s), Some(scores)) = (row.score, record.scores.as_mut()) {
            scores[row.team].push(s);
        }
    }
    Ok(out)
}

/// Reads and parses a log file; parse errors carry the path.
pub fn read_match_log(path: &Path) -> Result<MatchLog> {
    let text = std::fs::read_to_string(path).map_err(|e| CdnError::io(path, e))?;
    parse_match_log(&text).map_err(|e| e.with_path(path.display().to_string()))
}

/// Renders a log in the requested format, directive first.
pub fn write_match_log(log: &MatchLog, format: LogFormat) -> String {
    let mut out = format!("#! rank_polarity = {}\n", log.polarity);
    match format {
        LogFormat::Jsonl => {
            for r in &log.records {
                let raw = JsonRecord {
                    game_id: r.game_id.clone(),
                    game_type: r.game_type,
                    teams: r.teams.clone(),
                    ranks: r.ranks.clone(),
                    scores: r.scores.clone(),
                    timestamp: Some(r.timestamp),
                };
                out.push_str(&serde_json::to_string(&raw).expect("records serialize"));
                out.push('\n');
            }
        }
        LogFormat::Csv => {
            out.push_str("game_id,game_type,timestamp,team,player,rank,score\n");
            for r in &log.records {
                for (t, team) in r.teams.iter().enumerate() {
                    for (j, p) in team.iter().enumerate() {
                        let score = r.scores.as_ref().map(|s| s[t][j].to_string()).unwrap_or_default();
                        let _ = writeln!(out, "{},{},{},{t},{p},{},{score}", r.game_id, r.game_type, r.timestamp, r.ranks[t]);
                    }
                }
            }
        }
    }
    out
}
