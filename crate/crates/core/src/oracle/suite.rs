//! Randomized equivalence of DSP against inclusion-exclusion.

use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::brute_force_pdf_discrete;
use crate::dsp::joint_pdf;
use crate::error::Result;
use crate::functions::DiscreteTable;
use crate::graph::{Assignment, CdnGraph, VariableDomain, VariableId};

/// Pass threshold on the absolute deviation between DSP and brute force.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-12;

/// Shape limits for [`random_tree_cdn`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomTreeSpec {
    pub min_variables: usize,
    pub max_variables: usize,
    pub max_levels: usize,
    /// Largest factor scope, at most 3.
    pub max_degree: usize,
    /// Chance that each variable also gets a unary factor.
    pub unary_probability: f64,
}

impl Default for RandomTreeSpec {
    fn default() -> Self {
        RandomTreeSpec {
            min_variables: 2,
            max_variables: 7,
            max_levels: 3,
            max_degree: 3,
            unary_probability: 0.3,
        }
    }
}

/// A cumulative table over `levels` built from random masses that sum to 1.
pub fn random_table(rng: &mut impl Rng, levels: Vec<Vec<f64>>) -> Result<DiscreteTable> {
    let size: usize = levels.iter().map(Vec::len).product();
    let mut masses: Vec<f64> = (0..size)
        .map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random::<f64>() })
        .collect();
    if masses.iter().all(|&m| m == 0.0) {
        masses[0] = 1.0;
    }
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    DiscreteTable::from_masses(levels, masses)
}

/// A random discrete tree CDN. Each non-unary factor joins one variable
/// already in the tree with fresh ones, so the result is always a tree.
pub fn random_tree_cdn(rng: &mut impl Rng, spec: &RandomTreeSpec) -> Result<CdnGraph> {
    let n = rng.random_range(spec.min_variables.max(1)..=spec.max_variables.max(spec.min_variables.max(1)));
    let mut graph = CdnGraph::new();
    let mut levels = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let k = rng.random_range(2..=spec.max_levels.max(2));
        let lv: Vec<f64> = (0..k).map(|l| l as f64).collect();
        ids.push(graph.add_variable(format!("x{i}"), VariableDomain::discrete(lv.clone())?)?);
        levels.push(lv);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut joined = vec![order[0]];
    let mut next = 1;
    while next < n {
        let fresh = rng.random_range(1..=(spec.max_degree.clamp(2, 3) - 1)).min(n - next);
        let anchor = joined[rng.random_range(0..joined.len())];
        let mut scope = vec![anchor];
        scope.extend(&order[next..next + fresh]);
        joined.extend(&order[next..next + fresh]);
        next += fresh;
        scope.shuffle(rng);
        let table = random_table(rng, scope.iter().map(|&v| levels[v].clone()).collect())?;
        let vars: Vec<VariableId> = scope.iter().map(|&v| ids[v]).collect();
        graph.add_function(&vars, Arc::new(table))?;
    }
    for v in 0..n {
        if n == 1 || rng.random_bool(spec.unary_probability) {
            let table = random_table(rng, vec![levels[v].clone()])?;
            graph.add_function(&[ids[v]], Arc::new(table))?;
        }
    }
    Ok(graph)
}

/// Every level tuple over `levels`, last axis fastest.
pub fn joint_assignments_of(levels: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in levels {
        out = out
            .into_iter()
            .flat_map(|t: Vec<f64>| {
                axis.iter().map(move |&x| {
                    let mut u = t.clone();
                    u.push(x);
                    u
                })
            })
            .collect();
    }
    out
}

/// Every joint assignment of a discrete graph, last variable fastest.
pub fn joint_assignments(graph: &CdnGraph) -> Vec<Assignment> {
    let mut out = vec![Assignment::new()];
    for var in graph.variables() {
        let support = var.domain.support();
        out = out
            .into_iter()
            .flat_map(|a| {
                support.iter().map(move |&x| {
                    let mut b = a.clone();
                    b.insert(var.id, x);
                    b
                })
            })
            .collect();
    }
    out
}

/// Largest absolute gap between the DSP joint PDF and the brute-force PDF
/// over every joint assignment, with the number of assignments checked.
pub fn max_equivalence_deviation(graph: &CdnGraph) -> Result<(usize, f64)> {
    let assignments = joint_assignments(graph);
    let mut worst = 0.0f64;
    for a in &assignments {
        let dsp = joint_pdf(graph, a)?;
        let brute = brute_force_pdf_discrete(graph, a)?;
        worst = worst.max((dsp - brute).abs());
    }
    Ok((assignments.len(), worst))
}

/// One seed of the suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub seed: u64,
    pub shape: String,
    pub assignments: usize,
    pub max_deviation: f64,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteReport {
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    pub fn max_deviation(&self) -> f64 {
        self.rows.iter().map(|r| r.max_deviation).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "seed\tshape\tassignments\tmax_deviation\tverdict")?;
        for r in &self.rows {
            let verdict = match (&r.error, r.passed) {
                (Some(e), _) => format!("ERROR {e}"),
                (None, true) => "PASS".to_string(),
                (None, false) => "FAIL".to_string(),
            };
            writeln!(f, "{}\t{}\t{}\t{:.3e}\t{}", r.seed, r.shape, r.assignments, r.max_deviation, verdict)?;
        }
        Ok(())
    }
}

/// Compact description of a graph: variable level counts and factor degrees.
pub fn graph_shape(graph: &CdnGraph) -> String {
    let levels: Vec<String> = graph.variables().map(|v| v.domain.support().len().to_string()).collect();
    let degrees: Vec<String> = graph.functions().map(|f| f.degree().to_string()).collect();
    format!("levels=[{}] degrees=[{}]", levels.join(","), degrees.join(","))
}

fn run_seed(seed: u64, spec: &RandomTreeSpec) -> SuiteRow {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcome = random_tree_cdn(&mut rng, spec).and_then(|g| {
        let shape = graph_shape(&g);
        max_equivalence_deviation(&g).map(|(n, dev)| (shape, n, dev))
    });
    match outcome {
        Ok((shape, assignments, max_deviation)) => SuiteRow {
            seed,
            shape,
            assignments,
            max_deviation,
            passed: max_deviation <= EQUIVALENCE_TOLERANCE,
            error: None,
        },
        Err(e) => SuiteRow {
            seed,
            shape: String::new(),
            assignments: 0,
            max_deviation: f64::INFINITY,
            passed: false,
            error: Some(e.to_string()),
        },
    }
}

/// Runs seeds `0..seed_count` with the default shape limits.
pub fn dsp_equivalence_suite(seed_count: u64) -> SuiteReport {
    dsp_equivalence_suite_with(0..seed_count, &RandomTreeSpec::default())
}

/// Runs the given seeds in parallel; rows come back in seed order.
pub fn dsp_equivalence_suite_with(seeds: impl IntoIterator<Item = u64>, spec: &RandomTreeSpec) -> SuiteReport {
    let seeds: Vec<u64> = seeds.into_iter().collect();
    let rows = seeds.par_iter().map(|&s| run_seed(s, spec)).collect();
    SuiteReport { rows }
}
