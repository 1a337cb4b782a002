use std::fmt::Write;
use std::path::PathBuf;

use cdn_core::dsp::{conditional_cdf, joint_pdf};
use cdn_core::graph::Assignment;
use cdn_core::model_file::{read_evidence, read_model};
use cdn_core::{CdnError, Result};

use crate::output::emit;
use crate::Context;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Model file.
    model: PathBuf,
    /// Evidence file with one `variable = value` per line.
    #[arg(long, short)]
    evidence: Option<PathBuf>,
    /// Variable whose conditional CDF is written.
    #[arg(long, short)]
    query: Option<String>,
}

pub fn run(ctx: &Context, args: &Args) -> Result<u8> {
    let graph = read_model(&args.model)?;
    let evidence = match &args.evidence {
        Some(p) => read_evidence(p, &graph)?,
        None => Assignment::new(),
    };
    let query = match &args.query {
        Some(name) => Some(
            graph
                .variable_id(name)
                .ok_or_else(|| CdnError::InvalidQuery(format!("unknown query variable `{name}`")))?,
        ),
        None => None,
    };
    let structure = graph.validate_structure();
    if !structure.is_forest() {
        let cycle = structure.cycle.as_ref().map(|c| graph.describe_cycle(c)).unwrap_or_default();
        eprintln!("error: model is not a tree; cycle {cycle}");
        return Ok(1);
    }
    let mut out = String::new();
    if evidence.len() == graph.variable_count() {
        if query.is_some() {
            return Err(CdnError::InvalidQuery("every variable is observed; there is nothing to query".into()));
        }
        let pdf = joint_pdf(&graph, &evidence)?;
        let _ = writeln!(out, "rootPdf\t{pdf:.12e}");
    } else {
        let Some(query) = query else {
            return Err(CdnError::InvalidQuery("--query is required unless every variable is observed".into()));
        };
        let c = conditional_cdf(&graph, query, &evidence)?;
        let _ = writeln!(out, "# {}", graph.variable_name(query));
        let _ = writeln!(out, "support\tmu\tlambda\tcdf");
        for i in 0..c.support.len() {
            let _ = writeln!(out, "{}\t{:.12e}\t{:.12e}\t{:.12}", c.support[i], c.mu[i], c.lambda[i], c.cdf[i]);
        }
    }
    emit(ctx.output.as_deref(), &out)?;
    Ok(0)
}
