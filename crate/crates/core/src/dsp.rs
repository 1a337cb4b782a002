//! Derivative-sum-product message passing on tree-structured graphs.
//!
//! Every variable except the root must be observed; unobserved variables are
//! removed first with [`CdnGraph::marginalize_unobserved`]. Messages from
//! observed variables live on the single evidence point, messages to the root
//! on its whole support.
//!
//! On a discrete variable the backward difference obeys
//! `D[f g](x) = D f(x) g(x-) + f(x) D g(x)`, where `g(x-) = mu - lambda` is
//! the message one level down. The continuous product rule is recovered
//! by using `mu` in place of `g(x-)`.

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, warn};

use crate::error::{CdnError, Result};
use crate::functions::{CumulativeFunction, Subset};
use crate::graph::{Assignment, CdnGraph, FunctionId, NodeRef, VariableId};

/// Largest number of other scope variables a function message expands over.
pub const MAX_EXPANSION: usize = 20;

/// Negative message values down to this are treated as rounding noise.
const NEGATIVE_SLACK: f64 = 1e-12;

/// Pair of messages about one variable: `mu` and its derivative or
/// backward difference `lambda`, both sampled on `support`.
///
/// Stored values are the true ones divided by `2^log2_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessagePair {
    pub target: VariableId,
    pub support: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub log2_scale: i64,
}

impl MessagePair {
    /// The message of a variable with no other neighbors.
    pub fn unit(target: VariableId, support: Vec<f64>) -> Self {
        let n = support.len();
        MessagePair {
            target,
            support,
            mu: vec![1.0; n],
            lambda: vec![0.0; n],
            log2_scale: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `mu` at index `i` with the scale folded in.
    pub fn mu_at(&self, i: usize) -> f64 {
        unscale(self.mu[i], self.log2_scale)
    }

    /// `lambda` at index `i` with the scale folded in.
    pub fn lambda_at(&self, i: usize) -> f64 {
        unscale(self.lambda[i], self.log2_scale)
    }

    /// Value one level down, `mu - lambda`, on discrete targets.
    fn below(&self, i: usize, discrete: bool) -> f64 {
        if discrete {
            self.mu[i] - self.lambda[i]
        } else {
            self.mu[i]
        }
    }

    /// Divides both sequences by the power of two nearest their maximum.
    fn rescale(&mut self) {
        let max = self
            .mu
            .iter()
            .chain(&self.lambda)
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if max == 0.0 || !max.is_finite() {
            return;
        }
        let (_, e) = libm::frexp(max);
        if e == 0 {
            return;
        }
        for v in self.mu.iter_mut().chain(self.lambda.iter_mut()) {
            *v = libm::ldexp(*v, -e);
        }
        self.log2_scale += e as i64;
    }
}

fn unscale(v: f64, log2_scale: i64) -> f64 {
    libm::ldexp(v, log2_scale.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
}

fn clamp_small_negatives(values: &mut [f64], what: &str) {
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for v in values.iter_mut() {
        if *v < 0.0 {
            if *v < -NEGATIVE_SLACK * scale {
                warn!("{what} value {v:.3e} is negative beyond rounding; clamped to 0");
            } else {
                debug!("{what} value {v:.3e} clamped to 0");
            }
            *v = 0.0;
        }
    }
}

/// Product-rule combination of the messages a variable received from its
/// other neighbors. With no incoming messages the result is `(1, 0)`.
pub fn variable_to_function_message(
    target: VariableId,
    discrete: bool,
    support: &[f64],
    incoming: &[&MessagePair],
) -> Result<MessagePair> {
    let n = support.len();
    if let Some(m) = incoming.iter().find(|m| m.len() != n || m.target != target) {
        return Err(CdnError::ScheduleError(format!(
            "message about {} on {} points cannot combine at {target} on {n} points",
            m.target,
            m.len()
        )));
    }
    let mut out = MessagePair::unit(target, support.to_vec());
    if incoming.is_empty() {
        return Ok(out);
    }
    out.log2_scale = incoming.iter().map(|m| m.log2_scale).sum();
    let k = incoming.len();
    let mut suffix = vec![1.0; k + 1];
    for i in 0..n {
        for c in (0..k).rev() {
            suffix[c] = suffix[c + 1] * incoming[c].mu[i];
        }
        let mut prefix = 1.0;
        let mut lambda = 0.0;
        for (c, m) in incoming.iter().enumerate() {
            lambda += prefix * m.lambda[i] * suffix[c + 1];
            prefix *= m.below(i, discrete);
        }
        out.mu[i] = suffix[0];
        out.lambda[i] = lambda;
    }
    clamp_small_negatives(&mut out.lambda, "variable lambda");
    out.rescale();
    Ok(out)
}

/// Message from a scope variable into a function, with the kind of that
/// variable.
#[derive(Debug, Clone, Copy)]
pub struct ScopeMessage<'a> {
    pub message: &'a MessagePair,
    pub discrete: bool,
}

/// Message from `function` to its argument at position `target`, sampled on
/// `support`. Every other position needs a single-point incoming message.
///
/// Returns the message and the number of product-rule terms expanded,
/// `2^(arity - 1)` per support point.
pub fn function_to_variable_message(
    function: &dyn CumulativeFunction,
    target: usize,
    target_id: VariableId,
    support: &[f64],
    incoming: &[Option<ScopeMessage<'_>>],
) -> Result<(MessagePair, u64)> {
    let arity = function.arity();
    if incoming.len() != arity || target >= arity {
        return Err(CdnError::ScheduleError(format!(
            "{} of arity {arity} received {} messages for position {target}",
            function.family(),
            incoming.len()
        )));
    }
    let rest: Vec<usize> = (0..arity).filter(|&p| p != target).collect();
    if rest.len() > MAX_EXPANSION {
        return Err(CdnError::DegreeTooLarge(arity));
    }
    let mut point = vec![0.0; arity];
    let mut below = vec![0.0; arity];
    let mut slope = vec![0.0; arity];
    let mut log2_scale = 0;
    for &p in &rest {
        let m = incoming[p].ok_or_else(|| {
            CdnError::ScheduleError(format!("missing message for position {p} of {}", function.family()))
        })?;
        if m.message.len() != 1 {
            return Err(CdnError::ScheduleError(format!(
                "message for position {p} must be a single observed point"
            )));
        }
        point[p] = m.message.support[0];
        below[p] = m.message.below(0, m.discrete);
        slope[p] = m.message.lambda[0];
        log2_scale += m.message.log2_scale;
    }

    // coefficient of d_A phi: prod_{A} mu^- prod_{rest \ A} lambda
    let terms = 1usize << rest.len();
    let mut coef = Vec::with_capacity(terms);
    for a in 0..terms as u32 {
        let mut c = 1.0;
        let mut mask: Subset = 0;
        for (bit, &p) in rest.iter().enumerate() {
            if a >> bit & 1 == 1 {
                c *= below[p];
                mask |= 1 << p;
            } else {
                c *= slope[p];
            }
        }
        coef.push((mask, c));
    }

    let t_bit: Subset = 1 << target;
    let mut out = MessagePair {
        target: target_id,
        support: support.to_vec(),
        mu: vec![0.0; support.len()],
        lambda: vec![0.0; support.len()],
        log2_scale,
    };
    for (i, &x) in support.iter().enumerate() {
        point[target] = x;
        let (mut mu, mut lambda) = (0.0, 0.0);
        for &(mask, c) in &coef {
            if c == 0.0 {
                continue;
            }
            mu += c * function.mixed_diff(mask, &point)?;
            lambda += c * function.mixed_diff(mask | t_bit, &point)?;
        }
        out.mu[i] = mu;
        out.lambda[i] = lambda;
    }
    clamp_small_negatives(&mut out.mu, "function mu");
    clamp_small_negatives(&mut out.lambda, "function lambda");
    out.rescale();
    Ok((out, (terms * support.len()) as u64))
}

/// Terms expanded by one function during a sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TermCount {
    /// Message values emitted.
    pub values: u64,
    /// Product-rule terms expanded for those values.
    pub terms: u64,
}

/// Conditional CDF of the root given the evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCdf {
    pub variable: VariableId,
    pub support: Vec<f64>,
    /// Combined message at the root, divided by its value at the top.
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub cdf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub root: VariableId,
    /// Joint density or mass at the evidence when every variable is observed.
    pub root_pdf: Option<f64>,
    /// Natural log of `root_pdf`, kept when the value itself underflows.
    pub log_root_pdf: Option<f64>,
    pub conditional: Option<ConditionalCdf>,
    pub term_counts: BTreeMap<FunctionId, TermCount>,
    /// Messages the root received from each neighbor function.
    pub root_messages: Vec<(FunctionId, MessagePair)>,
}

/// Runs one leaves-to-root sweep per component.
///
/// The component holding `root` is swept toward `root`; other components
/// toward their smallest variable. Every variable other than `root` must be
/// observed. With `root` observed as well, the result carries the joint
/// PDF; otherwise it carries the conditional CDF of `root`.
pub fn propagate(graph: &CdnGraph, evidence: &Assignment, root: VariableId) -> Result<InferenceResult> {
    if graph.variable_count() == 0 {
        return Err(CdnError::EmptyGraph);
    }
    if graph.variable(root).is_none() {
        return Err(CdnError::InvalidQuery(format!("root {root} is not in the graph")));
    }
    let report = graph.validate_structure();
    if !report.is_forest() {
        let cycle = report
            .cycle
            .as_deref()
            .map_or_else(|| "an unknown cycle".to_string(), |c| graph.describe_cycle(c));
        return Err(CdnError::NotATree { cycle });
    }
    for &v in evidence.keys() {
        if graph.variable(v).is_none() {
            return Err(CdnError::InvalidQuery(format!("evidence names unknown variable {v}")));
        }
        graph.value_of(evidence, v)?;
    }
    for var in graph.variables() {
        if var.id != root && !evidence.contains_key(&var.id) {
            return Err(CdnError::InvalidQuery(format!(
                "variable `{}` is neither observed nor the root; marginalize it first",
                var.name
            )));
        }
    }

    let mut sweep = Sweep {
        graph,
        evidence,
        messages: BTreeMap::new(),
        term_counts: BTreeMap::new(),
    };
    let mut log2_pdf = graph.constant().log2();
    let mut conditional = None;
    let mut root_messages = Vec::new();
    for comp in &report.components {
        let r = if comp.variables.contains(&root) { root } else { comp.variables[0] };
        let combined = sweep.run(r)?;
        if r == root {
            root_messages = graph
                .neighbors(root)
                .iter()
                .map(|&f| (f, sweep.messages[&NodeRef::Function(f)].clone()))
                .collect();
        }
        if r == root && !evidence.contains_key(&root) {
            conditional = Some(normalize(root, combined)?);
        } else {
            log2_pdf += combined.lambda[0].log2() + combined.log2_scale as f64;
        }
    }
    let observed = evidence.contains_key(&root);
    Ok(InferenceResult {
        root,
        root_pdf: observed.then(|| log2_pdf.exp2()),
        log_root_pdf: observed.then(|| log2_pdf * std::f64::consts::LN_2),
        conditional,
        term_counts: sweep.term_counts,
        root_messages,
    })
}

fn normalize(root: VariableId, combined: MessagePair) -> Result<ConditionalCdf> {
    let top = *combined.mu.last().expect("support is non-empty");
    if !(top > 0.0) {
        return Err(CdnError::ZeroEvidenceDensity);
    }
    let mu: Vec<f64> = combined.mu.iter().map(|v| v / top).collect();
    let lambda = combined.lambda.iter().map(|v| v / top).collect();
    let cdf = mu.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Ok(ConditionalCdf {
        variable: root,
        support: combined.support,
        mu,
        lambda,
        cdf,
    })
}

struct Sweep<'a> {
    graph: &'a CdnGraph,
    evidence: &'a Assignment,
    /// Message each node sent to its parent.
    messages: BTreeMap<NodeRef, MessagePair>,
    term_counts: BTreeMap<FunctionId, TermCount>,
}

impl Sweep<'_> {
    fn support(&self, v: VariableId) -> Vec<f64> {
        match self.evidence.get(&v) {
            Some(&x) => vec![x],
            None => self.graph.variable(v).expect("known variable").domain.support(),
        }
    }

    fn discrete(&self, v: VariableId) -> bool {
        self.graph.variable(v).expect("known variable").domain.is_discrete()
    }

    /// Sends every message toward `root` and returns the product of the
    /// root's incoming messages.
    fn run(&mut self, root: VariableId) -> Result<MessagePair> {
        let order = self.preorder(root);
        for &(node, parent) in order.iter().rev() {
            let Some(parent) = parent else { continue };
            let msg = match (node, parent) {
                (NodeRef::Variable(v), NodeRef::Function(p)) => {
                    let incoming: Vec<&MessagePair> = self
                        .graph
                        .neighbors(v)
                        .iter()
                        .filter(|&&f| f != p)
                        .map(|&f| &self.messages[&NodeRef::Function(f)])
                        .collect();
                    variable_to_function_message(v, self.discrete(v), &self.support(v), &incoming)?
                }
                (NodeRef::Function(f), NodeRef::Variable(u)) => {
                    let node = self.graph.function(f).expect("known function");
                    let target = node.scope.iter().position(|&v| v == u).expect("in scope");
                    let incoming: Vec<Option<ScopeMessage<'_>>> = node
                        .scope
                        .iter()
                        .map(|&v| {
                            (v != u).then(|| ScopeMessage {
                                message: &self.messages[&NodeRef::Variable(v)],
                                discrete: self.discrete(v),
                            })
                        })
                        .collect();
                    let (msg, terms) = function_to_variable_message(
                        node.function.as_ref(),
                        target,
                        u,
                        &self.support(u),
                        &incoming,
                    )?;
                    let count = self.term_counts.entry(f).or_default();
                    count.values += msg.len() as u64;
                    count.terms += terms;
                    msg
                }
                _ => unreachable!("the graph is bipartite"),
            };
            self.messages.insert(node, msg);
        }
        let incoming: Vec<&MessagePair> = self
            .graph
            .neighbors(root)
            .iter()
            .map(|&f| &self.messages[&NodeRef::Function(f)])
            .collect();
        variable_to_function_message(root, self.discrete(root), &self.support(root), &incoming)
    }

    /// Nodes of the tree under `root` with their parents, parents first and
    /// siblings by ascending id.
    fn preorder(&self, root: VariableId) -> Vec<(NodeRef, Option<NodeRef>)> {
        let mut order = Vec::new();
        let mut stack = vec![(NodeRef::Variable(root), None)];
        while let Some((node, parent)) = stack.pop() {
            order.push((node, parent));
            let children: Vec<NodeRef> = match node {
                NodeRef::Variable(v) => self
                    .graph
                    .neighbors(v)
                    .iter()
                    .map(|&f| NodeRef::Function(f))
                    .filter(|&n| Some(n) != parent)
                    .collect(),
                NodeRef::Function(f) => self
                    .graph
                    .function(f)
                    .expect("known function")
                    .scope
                    .iter()
                    .map(|&v| NodeRef::Variable(v))
                    .filter(|&n| Some(n) != parent)
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect(),
            };
            for c in children.into_iter().rev() {
                stack.push((c, Some(node)));
            }
        }
        order
    }
}

/// Conditional CDF of `query` given `evidence`, after marginalizing every
/// other unobserved variable. Empty evidence yields the marginal CDF.
pub fn conditional_cdf(graph: &CdnGraph, query: VariableId, evidence: &Assignment) -> Result<ConditionalCdf> {
    if graph.variable(query).is_none() {
        return Err(CdnError::InvalidQuery(format!("query {query} is not in the graph")));
    }
    if evidence.contains_key(&query) {
        return Err(CdnError::InvalidQuery(format!(
            "query `{}` is observed",
            graph.variable_name(query)
        )));
    }
    let reduced = marginalize_rest(graph, query, evidence)?;
    let result = propagate(&reduced, evidence, query)?;
    Ok(result.conditional.expect("the query is unobserved"))
}

/// Joint density of a fully observed graph, rooted at the smallest id.
pub fn joint_pdf(graph: &CdnGraph, evidence: &Assignment) -> Result<f64> {
    let root = graph.variables().next().ok_or(CdnError::EmptyGraph)?.id;
    Ok(propagate(graph, evidence, root)?.root_pdf.expect("root is observed"))
}

/// Marginalizes every variable that is neither observed nor `keep`.
pub fn marginalize_rest(graph: &CdnGraph, keep: VariableId, evidence: &Assignment) -> Result<CdnGraph> {
    let drop: BTreeSet<VariableId> = graph
        .variables()
        .map(|v| v.id)
        .filter(|v| *v != keep && !evidence.contains_key(v))
        .collect();
    if drop.is_empty() {
        Ok(graph.clone())
    } else {
        graph.marginalize_unobserved(&drop)
    }
}

/// Conditional CDFs of every unobserved variable, one sweep per variable.
pub fn all_conditionals(graph: &CdnGraph, evidence: &Assignment) -> Result<Vec<ConditionalCdf>> {
    graph
        .variables()
        .filter(|v| !evidence.contains_key(&v.id))
        .map(|v| conditional_cdf(graph, v.id, evidence))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::functions::{DiscreteTable, GaussianCdf};
    use crate::graph::VariableDomain;
    use crate::mvn::normal_cdf;

    fn pair(target: VariableId, x: f64, mu: f64, lambda: f64) -> MessagePair {
        MessagePair {
            target,
            support: vec![x],
            mu: vec![mu],
            lambda: vec![lambda],
            log2_scale: 0,
        }
    }

    #[test]
    fn two_incoming_follow_the_product_rule() {
        let mut g = CdnGraph::new();
        let v = g.add_variable("x", VariableDomain::continuous(0.0, 1.0, 2).unwrap()).unwrap();
        let a = pair(v, 0.5, 0.3, 0.7);
        let b = pair(v, 0.5, 0.6, 0.2);
        let m = variable_to_function_message(v, false, &[0.5], &[&a, &b]).unwrap();
        assert!((m.mu_at(0) - 0.18).abs() < 1e-15);
        assert!((m.lambda_at(0) - (0.7 * 0.6 + 0.3 * 0.2)).abs() < 1e-15);
        let leaf = variable_to_function_message(v, false, &[0.5], &[]).unwrap();
        assert_eq!((leaf.mu_at(0), leaf.lambda_at(0)), (1.0, 0.0));
        let one = variable_to_function_message(v, false, &[0.5], &[&a]).unwrap();
        assert!((one.mu_at(0) - 0.3).abs() < 1e-16 && (one.lambda_at(0) - 0.7).abs() < 1e-16);
    }

    #[test]
    fn independent_gaussian_root_pdf() {
        let mut g = CdnGraph::new();
        let d = VariableDomain::continuous(-4.0, 4.0, 9).unwrap();
        let x = g.add_variable("x", d.clone()).unwrap();
        let y = g.add_variable("y", d).unwrap();
        let f = GaussianCdf::new(vec![0.0, 0.0], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        g.add_function(&[x, y], Arc::new(f)).unwrap();
        let ev: Assignment = [(x, 0.0), (y, 0.0)].into();
        let r = propagate(&g, &ev, x).unwrap();
        assert!((r.root_pdf.unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(r.term_counts.values().next().unwrap().terms, 2);
    }

    #[test]
    fn separable_conditional_is_the_marginal() {
        let mut g = CdnGraph::new();
        let d = VariableDomain::continuous(-3.0, 3.0, 13).unwrap();
        let x = g.add_variable("x", d.clone()).unwrap();
        let y = g.add_variable("y", d).unwrap();
        g.add_function(&[x], Arc::new(GaussianCdf::univariate(0.0, 1.0).unwrap())).unwrap();
        g.add_function(&[y], Arc::new(GaussianCdf::univariate(0.0, 1.0).unwrap())).unwrap();
        let c = conditional_cdf(&g, x, &[(y, 0.0)].into()).unwrap();
        let top = normal_cdf(3.0);
        for (s, p) in c.support.iter().zip(&c.cdf) {
            assert!((p - normal_cdf(*s) / top).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_evidence_density() {
        let mut g = CdnGraph::new();
        let x = g.add_variable("x", VariableDomain::binary()).unwrap();
        let y = g.add_variable("y", VariableDomain::binary()).unwrap();
        // y = 1 never happens together with anything: F(x, 0) = F(x, 1)
        let t = DiscreteTable::new(vec![vec![0.0, 1.0]; 2], vec![0.5, 0.5, 1.0, 1.0], true).unwrap();
        g.add_function(&[x, y], Arc::new(t)).unwrap();
        assert!(matches!(conditional_cdf(&g, x, &[(y, 1.0)].into()), Err(CdnError::ZeroEvidenceDensity)));
    }
}
