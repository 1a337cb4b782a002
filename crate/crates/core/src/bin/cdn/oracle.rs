use std::fmt::Write;

use clap::ValueEnum;
use log::warn;
use rayon::prelude::*;

use cdn_core::oracle::table1_battery;
use cdn_core::oracle::mutation::run_mutation;
use cdn_core::oracle::suite::{dsp_equivalence_suite_with, RandomTreeSpec, EQUIVALENCE_TOLERANCE};
use cdn_core::Result;

use crate::output::emit;
use crate::Context;

#[derive(Debug, Clone, Copy, PartialEq, ValueEnum)]
pub enum Suite {
    Table1,
    Dsp,
    Mutation,
    All,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    suite: Suite,
    /// Number of seeds for the randomized suites, starting at --seed.
    #[arg(long, default_value_t = 100)]
    seeds: u64,
}

pub fn run(ctx: &Context, args: &Args) -> Result<u8> {
    let mut out = String::new();
    let mut ok = true;
    let seeds = ctx.seed..ctx.seed.saturating_add(args.seeds);
    if args.seeds == 0 && args.suite != Suite::Table1 {
        warn!("--seeds 0: the randomized suites run no cases");
    }
    if matches!(args.suite, Suite::Table1 | Suite::All) {
        for case in table1_battery() {
            let r = &case.result;
            let w = r
                .witness
                .as_ref()
                .map(|w| format!("\twitness P={} vs {}", w.joint, w.product))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "table1\t{}\t{}\tmax_deviation {}{w}",
                case.label,
                if case.passed() { "PASS" } else { "FAIL" },
                r.max_deviation
            );
            ok &= case.passed();
        }
    }
    if matches!(args.suite, Suite::Dsp | Suite::All) {
        let tolerance = ctx.tolerance.unwrap_or(EQUIVALENCE_TOLERANCE);
        let report = dsp_equivalence_suite_with(seeds.clone(), &RandomTreeSpec::default());
        let _ = write!(out, "{report}");
        let max = report.max_deviation();
        let pass = report.rows.iter().all(|r| r.error.is_none()) && max <= tolerance;
        let _ = writeln!(out, "dsp\tseeds {}\tmax_deviation {max:.3e}\t{}", report.rows.len(), if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    }
    if matches!(args.suite, Suite::Mutation | Suite::All) {
        let outcomes: Vec<_> = seeds.clone().into_par_iter().map(run_mutation).collect::<Result<_>>()?;
        let detected = outcomes.iter().filter(|o| o.detected).count();
        for o in &outcomes {
            let _ = writeln!(
                out,
                "mutation\t{}\t{}\t{}\t{}\t{}",
                o.seed,
                o.kind,
                o.target,
                if o.detected { "DETECTED" } else { "MISSED" },
                o.witness.as_deref().unwrap_or("-")
            );
        }
        let _ = writeln!(out, "mutation\tdetected {detected}/{}", outcomes.len());
        ok &= detected == outcomes.len();
    }
    emit(ctx.output.as_deref(), &out)?;
    Ok(if ok { 0 } else { 1 })
}
