//! Seeded corruptions of valid graphs that the validity checks must catch.

use std::fmt;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::suite::{random_tree_cdn, RandomTreeSpec};
use crate::error::{CdnError, Result};
use crate::functions::validity::{check_graph, subset_list, MonotonicityOptions, CONVERGENCE_TOLERANCE};
use crate::functions::{DiscreteTable, FloorWrapper, FunctionRef, GaussianCdf};
use crate::graph::{CdnGraph, FunctionId, VariableDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MutationKind {
    /// One cumulative table entry lowered until a mixed difference is negative.
    DecreasedTableEntry,
    /// Every factor touching one continuous variable gets a positive floor.
    NonVanishingLowerTail,
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MutationKind::DecreasedTableEntry => "decreased-entry",
            MutationKind::NonVanishingLowerTail => "lower-tail",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutationOutcome {
    pub seed: u64,
    pub kind: MutationKind,
    /// What was corrupted.
    pub target: String,
    pub detected: bool,
    /// The validity check's witness, when it points at the corruption.
    pub witness: Option<String>,
}

/// Copy of `graph` with function `id` replaced.
pub fn replace_function(graph: &CdnGraph, id: FunctionId, function: FunctionRef) -> Result<CdnGraph> {
    let mut out = CdnGraph::new();
    for v in graph.variables() {
        out.add_variable(v.name.clone(), v.domain.clone())?;
    }
    for node in graph.functions() {
        let f = if node.id == id { function.clone() } else { node.function.clone() };
        out.add_labeled_function(node.label.clone(), &node.scope, f)?;
    }
    Ok(out)
}

fn decreased_entry(seed: u64) -> Result<MutationOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = random_tree_cdn(&mut rng, &RandomTreeSpec::default())?;
    let ids: Vec<FunctionId> = graph.functions().map(|f| f.id).collect();
    let fid = *ids.choose(&mut rng).expect("random graphs have factors");
    let node = graph.function(fid).expect("chosen from the graph");
    let levels: Vec<Vec<f64>> = (0..node.degree())
        .map(|p| match node.function.axis(p) {
            crate::functions::AxisKind::Discrete(l) => Ok(l.to_vec()),
            _ => Err(CdnError::InvalidFunction("random graphs are discrete".into())),
        })
        .collect::<Result<_>>()?;
    let original = DiscreteTable::new_unvalidated(
        levels.clone(),
        crate::oracle::suite::joint_assignments_of(&levels)
            .iter()
            .map(|z| node.function.evaluate(z))
            .collect::<Result<Vec<f64>>>()?,
    )?;
    let flat = rng.random_range(0..original.values().len());
    // the smallest difference anchored at this entry, over nonempty subsets
    let slack = (1..1u32 << levels.len())
        .map(|s| original.difference_array(s)[flat])
        .fold(f64::INFINITY, f64::min);
    let mut values = original.values().to_vec();
    values[flat] -= slack + rng.random_range(0.01..0.1);
    let mutated = DiscreteTable::new_unvalidated(levels, values)?;
    let index = mutated.unflatten(flat);
    let graph = replace_function(&graph, fid, Arc::new(mutated))?;
    let report = check_graph(&graph, CONVERGENCE_TOLERANCE, &MonotonicityOptions { seed, ..Default::default() })?;
    let witness = report
        .monotonicity
        .function_witness
        .as_ref()
        .filter(|w| w.function == fid)
        .map(|w| format!("{} subset {:?} at {:?} = {:.3e}", w.function, subset_list(w.subset), w.point, w.value));
    Ok(MutationOutcome {
        seed,
        kind: MutationKind::DecreasedTableEntry,
        target: format!("{fid} entry {index:?}"),
        detected: !report.passed() && witness.is_some(),
        witness,
    })
}

fn lower_tail(seed: u64) -> Result<MutationOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=4usize);
    let mut graph = CdnGraph::new();
    let domain = VariableDomain::continuous(-6.0, 6.0, 25)?;
    let ids: Vec<_> = (0..n)
        .map(|i| graph.add_variable(format!("x{i}"), domain.clone()))
        .collect::<Result<_>>()?;
    for i in 1..n {
        let anchor = ids[rng.random_range(0..i)];
        let rho: f64 = rng.random_range(-0.8..0.8);
        let (m0, m1) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let f = GaussianCdf::new(vec![m0, m1], vec![1.0, rho, rho, 1.0])?;
        graph.add_function(&[anchor, ids[i]], Arc::new(f))?;
    }
    let victim = ids[rng.random_range(0..n)];
    let floor = rng.random_range(0.05..0.5);
    let mut mutated = graph.clone();
    let neighbors = graph.neighbors(victim).to_vec();
    for &fid in &neighbors {
        let inner = graph.function(fid).expect("adjacent").function.clone();
        mutated = replace_function(&mutated, fid, Arc::new(FloorWrapper::new(floor, inner)?))?;
    }
    let report = check_graph(&mutated, CONVERGENCE_TOLERANCE, &MonotonicityOptions { seed, ..Default::default() })?;
    let failure = report.negative.iter().find(|r| r.variable == victim && !r.passed);
    let witness = failure
        .and_then(|r| r.witness.map(|w| (w, r.min_value)))
        .filter(|(w, _)| neighbors.contains(w))
        .map(|(w, v)| format!("{} at the lower probe of {} = {v:.3e}", w, graph.variable_name(victim)));
    Ok(MutationOutcome {
        seed,
        kind: MutationKind::NonVanishingLowerTail,
        target: format!("{} floored at {floor:.3}", graph.variable_name(victim)),
        detected: !report.passed() && witness.is_some(),
        witness,
    })
}

/// Runs one mutation; even seeds corrupt a table entry, odd seeds floor a
/// lower tail.
pub fn run_mutation(seed: u64) -> Result<MutationOutcome> {
    if seed % 2 == 0 {
        decreased_entry(seed)
    } else {
        lower_tail(seed)
    }
}

/// Runs seeds `0..count` in parallel.
pub fn mutation_suite(count: u64) -> Result<Vec<MutationOutcome>> {
    (0..count).into_par_iter().map(run_mutation).collect()
}
