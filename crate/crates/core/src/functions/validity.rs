//! Checks of the positive convergence, negative convergence and
//! monotonicity conditions on functions and graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{subset_positions, AxisKind, CumulativeFunction, Subset};
use crate::error::Result;
use crate::graph::{Assignment, CdnGraph, FunctionId, StructureReport, VariableDomain, VariableId};

/// Default tolerance for the convergence checks.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-6;

/// Mixed differences above this are accepted as nonnegative.
pub const MONOTONICITY_TOLERANCE: f64 = 1e-10;

const POSITIVE_NOTE: &str = "reaching 1 at the supremum is sufficient for a valid joint CDF, not necessary";

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub passed: bool,
    /// Value at the last probe.
    pub value: f64,
    pub residual: f64,
    pub probe: Vec<f64>,
    pub note: &'static str,
}

/// Evaluates `f` along `probe_budget` points moving toward its upper probe
/// and requires the last value to be within `tolerance` of 1.
pub fn check_positive_convergence(
    f: &dyn CumulativeFunction,
    probe_budget: usize,
    tolerance: f64,
) -> Result<ConvergenceReport> {
    let upper = f.upper_probe();
    let steps = probe_budget.max(1);
    let mut probe = upper.clone();
    let mut value = 0.0;
    for k in 1..=steps {
        let w = k as f64 / steps as f64;
        for (pos, p) in probe.iter_mut().enumerate() {
            if f.axis(pos) == AxisKind::Continuous {
                let lower = f.lower_probe(pos);
                let mid = 0.5 * (lower + upper[pos]);
                *p = mid + w * (upper[pos] - mid);
            }
        }
        value = f.evaluate(&probe)?;
    }
    let residual = (1.0 - value).abs();
    Ok(ConvergenceReport {
        passed: residual <= tolerance,
        value,
        residual,
        probe,
        note: POSITIVE_NOTE,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NegativeConvergence {
    pub variable: VariableId,
    pub passed: bool,
    /// Neighbor with the smallest value at the bottom probe.
    pub witness: Option<FunctionId>,
    pub min_value: f64,
}

/// For every variable, requires some neighbor to vanish as the variable
/// goes to its infimum with the other arguments at their suprema.
///
/// Ordinal variables pass by convention: every discrete cumulative function
/// is 0 below the lowest level.
pub fn check_negative_convergence(graph: &CdnGraph, tolerance: f64) -> Result<Vec<NegativeConvergence>> {
    let mut out = Vec::new();
    for var in graph.variables() {
        if var.domain.is_discrete() {
            out.push(NegativeConvergence {
                variable: var.id,
                passed: true,
                witness: None,
                min_value: 0.0,
            });
            continue;
        }
        let mut best: Option<(FunctionId, f64)> = None;
        for &fid in graph.neighbors(var.id) {
            let node = graph.function(fid).expect("adjacency is consistent");
            let pos = node.scope.iter().position(|&v| v == var.id).expect("in scope");
            let mut z = node.function.upper_probe();
            z[pos] = node.function.lower_probe(pos).min(var.domain.lo());
            let v = node.function.evaluate(&z)?;
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((fid, v));
            }
        }
        let min_value = best.map_or(1.0, |(_, v)| v);
        out.push(NegativeConvergence {
            variable: var.id,
            passed: min_value <= tolerance,
            witness: best.map(|(f, _)| f),
            min_value,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityOptions {
    pub samples: usize,
    /// Largest differentiation subset checked per function.
    pub max_subset: usize,
    pub seed: u64,
    /// All-discrete functions with at most this many level tuples are
    /// checked at every tuple instead of at samples.
    pub exhaustive_limit: usize,
}

impl Default for MonotonicityOptions {
    fn default() -> Self {
        MonotonicityOptions {
            samples: 200,
            max_subset: 3,
            seed: 0,
            exhaustive_limit: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionWitness {
    pub function: FunctionId,
    pub subset: Subset,
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableWitness {
    pub variable: VariableId,
    pub point: Assignment,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub passed: bool,
    pub evaluations: usize,
    pub function_witness: Option<FunctionWitness>,
    pub variable_witness: Option<VariableWitness>,
}

/// Checks nonnegative mixed differences of every function over subsets up
/// to `max_subset`, and the per-variable condition
/// `sum_c d_i phi_c / phi_c >= 0` at random points where `F > 0`.
pub fn check_monotonicity(graph: &CdnGraph, opts: &MonotonicityOptions) -> Result<MonotonicityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut evaluations = 0;
    let mut function_witness: Option<FunctionWitness> = None;

    for node in graph.functions() {
        let domains: Vec<&VariableDomain> = node
            .scope
            .iter()
            .map(|&v| &graph.variable(v).expect("scope is valid").domain)
            .collect();
        let points = sample_points(&domains, opts, &mut rng);
        let arity = node.degree();
        let subsets: Vec<Subset> = (1..1u32 << arity)
            .filter(|s| s.count_ones() as usize <= opts.max_subset)
            .collect();
        for z in &points {
            for &s in &subsets {
                let v = node.function.mixed_diff(s, z)?;
                evaluations += 1;
                if v < -MONOTONICITY_TOLERANCE && function_witness.as_ref().is_none_or(|w| v < w.value) {
                    function_witness = Some(FunctionWitness {
                        function: node.id,
                        subset: s,
                        point: z.clone(),
                        value: v,
                    });
                }
            }
        }
    }

    let mut variable_witness: Option<VariableWitness> = None;
    let vars: Vec<_> = graph.variables().map(|v| (v.id, v.domain.clone())).collect();
    for _ in 0..opts.samples {
        let point: Assignment = vars.iter().map(|(id, d)| (*id, sample_value(d, &mut rng))).collect();
        for (id, domain) in &vars {
            let v = per_variable_slope(graph, *id, domain, &point)?;
            evaluations += 1;
            if let Some(v) = v {
                if v < -MONOTONICITY_TOLERANCE && variable_witness.as_ref().is_none_or(|w| v < w.value) {
                    variable_witness = Some(VariableWitness {
                        variable: *id,
                        point: point.clone(),
                        value: v,
                    });
                }
            }
        }
    }

    Ok(MonotonicityReport {
        passed: function_witness.is_none() && variable_witness.is_none(),
        evaluations,
        function_witness,
        variable_witness,
    })
}

/// Continuous: `sum_c d_i phi_c / phi_c`. Discrete: the backward difference
/// of the neighbor product. `None` where the neighbor product is 0.
fn per_variable_slope(
    graph: &CdnGraph,
    var: VariableId,
    domain: &VariableDomain,
    point: &Assignment,
) -> Result<Option<f64>> {
    let mut sum = 0.0;
    let (mut now, mut before) = (1.0, 1.0);
    for &fid in graph.neighbors(var) {
        let node = graph.function(fid).expect("adjacency is consistent");
        let z: Vec<f64> = node.scope.iter().map(|v| point[v]).collect();
        let pos = node.scope.iter().position(|&v| v == var).expect("in scope");
        let phi = node.function.evaluate(&z)?;
        let d = node.function.mixed_diff(1 << pos, &z)?;
        if phi <= 0.0 {
            return Ok(None);
        }
        sum += d / phi;
        now *= phi;
        before *= phi - d;
    }
    Ok(Some(if domain.is_discrete() { now - before } else { sum }))
}

fn sample_value(domain: &VariableDomain, rng: &mut ChaCha8Rng) -> f64 {
    match domain {
        VariableDomain::DiscreteOrdinal { levels } => levels[rng.random_range(0..levels.len())],
        VariableDomain::ContinuousGrid { lo, hi, .. } => rng.random_range(*lo..=*hi),
    }
}

fn sample_points(domains: &[&VariableDomain], opts: &MonotonicityOptions, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let discrete: Option<Vec<&Vec<f64>>> = domains
        .iter()
        .map(|d| match d {
            VariableDomain::DiscreteOrdinal { levels } => Some(levels),
            VariableDomain::ContinuousGrid { .. } => None,
        })
        .collect();
    if let Some(levels) = discrete {
        let total: usize = levels.iter().map(|l| l.len()).product();
        if total <= opts.exhaustive_limit {
            return (0..total)
                .map(|mut flat| {
                    let mut z = vec![0.0; levels.len()];
                    for (i, l) in levels.iter().enumerate().rev() {
                        z[i] = l[flat % l.len()];
                        flat /= l.len();
                    }
                    z
                })
                .collect();
        }
    }
    (0..opts.samples)
        .map(|_| domains.iter().map(|d| sample_value(d, rng)).collect())
        .collect()
}

/// Outcome of the full validity battery on a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub structure: StructureReport,
    pub positive: Vec<(FunctionId, ConvergenceReport)>,
    pub negative: Vec<NegativeConvergence>,
    pub monotonicity: MonotonicityReport,
}

impl ValidityReport {
    pub fn passed(&self) -> bool {
        self.structure.is_forest()
            && self.positive.iter().all(|(_, r)| r.passed)
            && self.negative.iter().all(|r| r.passed)
            && self.monotonicity.passed
    }
}

/// Runs the structure check and all three validity conditions.
pub fn check_graph(graph: &CdnGraph, tolerance: f64, opts: &MonotonicityOptions) -> Result<ValidityReport> {
    let positive = graph
        .functions()
        .map(|f| Ok((f.id, check_positive_convergence(f.function.as_ref(), 8, tolerance)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ValidityReport {
        structure: graph.validate_structure(),
        positive,
        negative: check_negative_convergence(graph, tolerance)?,
        monotonicity: check_monotonicity(graph, opts)?,
    })
}

/// Subset positions as a list, for reports.
pub fn subset_list(subset: Subset) -> Vec<usize> {
    subset_positions(subset).collect()
}
