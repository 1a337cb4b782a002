use std::fmt::Write;
use std::path::PathBuf;

use cdn_core::functions::validity::{check_graph, subset_list, MonotonicityOptions};
use cdn_core::model_file::read_model;
use cdn_core::Result;

use crate::output::emit;
use crate::Context;

const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Model file.
    model: PathBuf,
    /// Random points per function for the monotonicity check.
    #[arg(long, default_value_t = 200)]
    samples: usize,
}

pub fn run(ctx: &Context, args: &Args) -> Result<u8> {
    let graph = read_model(&args.model)?;
    let tolerance = ctx.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    let opts = MonotonicityOptions { samples: args.samples, seed: ctx.seed, ..MonotonicityOptions::default() };
    let report = check_graph(&graph, tolerance, &opts)?;
    let mut out = String::new();
    let s = &report.structure;
    let _ = writeln!(
        out,
        "structure\t{}\tvariables {}\tfunctions {}\tedges {}\tcomponents {}",
        verdict(s.is_forest()),
        s.variable_count,
        s.function_count,
        s.edge_count,
        s.components.len()
    );
    if let Some(cycle) = &s.cycle {
        let _ = writeln!(out, "cycle\t{}", graph.describe_cycle(cycle));
    }
    for (id, r) in &report.positive {
        let _ = writeln!(
            out,
            "positive\t{}\t{}\tvalue {:.12}\tprobe {:?}",
            graph.function_name(*id),
            verdict(r.passed),
            r.value,
            r.probe
        );
    }
    for r in &report.negative {
        let witness = r.witness.map(|f| graph.function_name(f)).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "negative\t{}\t{}\tmin {:.3e}\twitness {witness}",
            graph.variable_name(r.variable),
            verdict(r.passed),
            r.min_value
        );
    }
    let m = &report.monotonicity;
    let _ = writeln!(out, "monotonicity\t{}\tevaluations {}", verdict(m.passed), m.evaluations);
    if let Some(w) = &m.function_witness {
        let _ = writeln!(
            out,
            "witness\t{}\tsubset {:?}\tpoint {:?}\tvalue {:.6e}",
            graph.function_name(w.function),
            subset_list(w.subset),
            w.point,
            w.value
        );
    }
    if let Some(w) = &m.variable_witness {
        let point: Vec<String> = w.point.iter().map(|(v, x)| format!("{}={x}", graph.variable_name(*v))).collect();
        let _ = writeln!(
            out,
            "witness\tvariable {}\tpoint {}\tvalue {:.6e}",
            graph.variable_name(w.variable),
            point.join(","),
            w.value
        );
    }
    let _ = writeln!(out, "result\t{}", verdict(report.passed()));
    emit(ctx.output.as_deref(), &out)?;
    Ok(if report.passed() { 0 } else { 1 })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}
