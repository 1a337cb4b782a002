use std::fmt::Write;
use std::path::{Path, PathBuf};

use clap::{Subcommand, ValueEnum};
use log::warn;

use cdn_core::ranking::{
    evaluate_stream, fit_cutpoints, generate_synthetic_log, predict, read_match_log, write_match_log, EvalConfig,
    FitConfig, GameType, LogFormat, MatchLog, MatchRecord, RankPolarity, RatingModelParams, SynthConfig,
};
use cdn_core::Result;

use crate::output::emit;
use crate::Context;

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit cutpoints and spread parameters from a scored history; writes TOML.
    Fit {
        log: PathBuf,
        /// Fixed skill spread instead of the fitted one.
        #[arg(long)]
        sigma0: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        rho: f64,
        #[arg(long, default_value_t = 201)]
        grid_points: usize,
    },
    /// Replay a log online; writes the cumulative error series and a summary.
    Eval {
        log: PathBuf,
        /// Parameter file; fitted from the log when omitted.
        #[arg(long, short)]
        params: Option<PathBuf>,
        /// Games per smoothing window.
        #[arg(long, default_value_t = 200)]
        window: usize,
        #[arg(long)]
        no_elo: bool,
    },
    /// Learn from a history, then predict orderings for upcoming games.
    Predict {
        /// Games to learn from, in order.
        history: PathBuf,
        /// Games to predict; their ranks are ignored.
        upcoming: PathBuf,
        #[arg(long, short)]
        params: Option<PathBuf>,
    },
    /// Generate a synthetic match log from latent skills.
    Synth {
        #[arg(long, default_value_t = 200)]
        players: usize,
        #[arg(long, default_value_t = 2000)]
        games: usize,
        #[arg(long, default_value = "HeadToHead")]
        game_type: GameType,
        /// Score noise standard deviation.
        #[arg(long, default_value_t = 2.0)]
        noise: f64,
        #[arg(long, value_enum, default_value_t = Format::Jsonl)]
        format: Format,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

pub fn run(ctx: &Context, cmd: &Command) -> Result<u8> {
    match cmd {
        Command::Fit { log, sigma0, beta, rho, grid_points } => {
            let history = read_match_log(log)?;
            let config = FitConfig { sigma0: *sigma0, beta: *beta, rho: *rho, grid_points: *grid_points };
            let report = fit_cutpoints(&history.records, &config)?;
            for note in &report.notes {
                warn!("{note}");
            }
            if report.params.cutpoints.is_empty() {
                warn!("the log has a single rank level; the cutpoint list is empty");
            }
            emit(ctx.output.as_deref(), &report.params.to_toml_string())?;
            Ok(0)
        }
        Command::Eval { log, params, window, no_elo } => {
            let history = read_match_log(log)?;
            let params = load_or_fit(params.as_deref(), &history.records)?;
            let config = EvalConfig { seed: ctx.seed, elo: !no_elo, window: *window, ..EvalConfig::default() };
            let report = evaluate_stream(&history.records, &params, &config)?;
            let summary = report.summary();
            let mut text = report.series_text();
            for line in summary.lines() {
                let _ = writeln!(text, "# {line}");
            }
            emit(ctx.output.as_deref(), &text)?;
            if ctx.output.is_some() {
                print!("{summary}");
            }
            Ok(0)
        }
        Command::Predict { history, upcoming, params } => {
            let history = read_match_log(history)?;
            let upcoming = read_match_log(upcoming)?;
            let params = load_or_fit(params.as_deref(), &history.records)?;
            let config = EvalConfig { seed: ctx.seed, elo: false, ..EvalConfig::default() };
            let learned = evaluate_stream(&history.records, &params, &config)?;
            let mut out = String::from("game_id\tordering\tteam_performance\n");
            for record in &upcoming.records {
                let p = predict(record, &learned.skills);
                for player in &p.cold_start {
                    eprintln!("notice: game {}: player `{player}` is unseen; using the prior skill", record.game_id);
                }
                let ordering: Vec<String> = p.ordering.iter().map(usize::to_string).collect();
                let perf: Vec<String> = p.team_performance.iter().map(|v| format!("{v:.4}")).collect();
                let _ = writeln!(out, "{}\t{}\t{}", record.game_id, ordering.join(","), perf.join(","));
            }
            emit(ctx.output.as_deref(), &out)?;
            Ok(0)
        }
        Command::Synth { players, games, game_type, noise, format } => {
            let config = SynthConfig {
                players: *players,
                games: *games,
                game_type: *game_type,
                noise: *noise,
                seed: ctx.seed,
                ..SynthConfig::default()
            };
            let synth = generate_synthetic_log(&config)?;
            let log = MatchLog { polarity: RankPolarity::LowerIsBetter, records: synth.records };
            let format = match format {
                Format::Jsonl => LogFormat::Jsonl,
                Format::Csv => LogFormat::Csv,
            };
            emit(ctx.output.as_deref(), &write_match_log(&log, format))?;
            Ok(0)
        }
    }
}

fn load_or_fit(path: Option<&Path>, history: &[MatchRecord]) -> Result<RatingModelParams> {
    match path {
        Some(p) => RatingModelParams::load(p),
        None => {
            warn!("no parameter file given; fitting parameters on the log itself");
            Ok(fit_cutpoints(history, &FitConfig::default())?.params)
        }
    }
}
