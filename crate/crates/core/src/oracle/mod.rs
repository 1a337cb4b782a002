//! Brute-force reference computations used to check the message passing
//! engine, plus exact independence testing on small joint tables.

use crate::error::{CdnError, Result};
use crate::graph::{Assignment, CdnGraph, VariableDomain, VariableId};

mod joint;
pub mod mutation;
pub mod suite;

pub use joint::{
    independence_test, table1_battery, table1_fixture, BatteryCase, DiscreteJoint, IndependenceResult,
    IndependenceWitness, Probability,
};

/// Largest subset accepted by [`numeric_mixed_partial`].
pub const MAX_NUMERIC_SUBSET: usize = 8;

/// Largest number of variables accepted by [`brute_force_pdf_discrete`].
pub const MAX_BRUTE_FORCE_VARIABLES: usize = 24;

/// `F(x)` as the product of every factor evaluated directly.
pub fn brute_force_cdf(graph: &CdnGraph, assignment: &Assignment) -> Result<f64> {
    let mut value = graph.constant();
    for node in graph.functions() {
        let mut z = Vec::with_capacity(node.scope.len());
        for v in &node.scope {
            z.push(*assignment.get(v).ok_or_else(|| {
                CdnError::DomainError(format!("variable `{}` is unassigned", graph.variable_name(*v)))
            })?);
        }
        value *= node.function.evaluate(&z)?;
    }
    Ok(value)
}

/// Probability of a discrete assignment by inclusion-exclusion over the
/// corners one level below it, with `F = 0` below the lowest level.
pub fn brute_force_pdf_discrete(graph: &CdnGraph, assignment: &Assignment) -> Result<f64> {
    let mut vars: Vec<(VariableId, &[f64], usize)> = Vec::new();
    for var in graph.variables() {
        let VariableDomain::DiscreteOrdinal { levels } = &var.domain else {
            return Err(CdnError::DomainError(format!("variable `{}` is not discrete", var.name)));
        };
        let x = *assignment
            .get(&var.id)
            .ok_or_else(|| CdnError::DomainError(format!("variable `{}` is unassigned", var.name)))?;
        let i = levels
            .iter()
            .position(|l| (l - x).abs() <= 1e-9)
            .ok_or_else(|| CdnError::DomainError(format!("{x} is not a level of `{}`", var.name)))?;
        vars.push((var.id, levels, i));
    }
    if vars.len() > MAX_BRUTE_FORCE_VARIABLES {
        return Err(CdnError::SubsetTooLarge(vars.len()));
    }
    let mut total = 0.0;
    let mut corner = assignment.clone();
    'corners: for s in 0u32..1 << vars.len() {
        for (bit, &(id, levels, i)) in vars.iter().enumerate() {
            let step = (s >> bit & 1) as usize;
            if step > i {
                continue 'corners;
            }
            corner.insert(id, levels[i - step]);
        }
        let f = brute_force_cdf(graph, &corner)?;
        if s.count_ones() % 2 == 0 {
            total += f;
        } else {
            total -= f;
        }
    }
    Ok(total)
}

/// Central-difference mixed partial of `F` over continuous `subset`, with
/// `2^|subset|` evaluations. The truncation error is `O(step^2)`.
pub fn numeric_mixed_partial(
    graph: &CdnGraph,
    subset: &[VariableId],
    assignment: &Assignment,
    step: f64,
) -> Result<f64> {
    if subset.len() > MAX_NUMERIC_SUBSET {
        return Err(CdnError::SubsetTooLarge(subset.len()));
    }
    if !(step > 0.0) {
        return Err(CdnError::InvalidQuery(format!("step must be positive, got {step}")));
    }
    for v in subset {
        let var = graph
            .variable(*v)
            .ok_or_else(|| CdnError::UnknownVariable(v.to_string()))?;
        if var.domain.is_discrete() {
            return Err(CdnError::DomainError(format!("variable `{}` is not continuous", var.name)));
        }
        if !assignment.contains_key(v) {
            return Err(CdnError::DomainError(format!("variable `{}` is unassigned", var.name)));
        }
    }
    let mut point = assignment.clone();
    let mut total = 0.0;
    for signs in 0u32..1 << subset.len() {
        let mut sign = 1.0;
        for (bit, v) in subset.iter().enumerate() {
            let up = signs >> bit & 1 == 1;
            point.insert(*v, assignment[v] + if up { step } else { -step });
            if !up {
                sign = -sign;
            }
        }
        total += sign * brute_force_cdf(graph, &point)?;
    }
    Ok(total / (2.0 * step).powi(subset.len() as i32))
}
