//! Bipartite graph of variables and cumulative functions.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::error::{CdnError, Result};
use crate::functions::{level_index, validate_levels, AxisKind, FunctionRef, Pinned};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VariableId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FunctionId(usize);

impl VariableId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl FunctionId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

/// Values assigned to variables, keyed by id.
pub type Assignment = BTreeMap<VariableId, f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum VariableDomain {
    DiscreteOrdinal { levels: Vec<f64> },
    /// Continuous variable whose messages are stored on `grid_points`
    /// uniform points of `[lo, hi]`.
    ContinuousGrid { lo: f64, hi: f64, grid_points: usize },
}

impl VariableDomain {
    pub fn discrete(levels: Vec<f64>) -> Result<Self> {
        validate_levels(&levels)?;
        Ok(VariableDomain::DiscreteOrdinal { levels })
    }

    pub fn binary() -> Self {
        VariableDomain::DiscreteOrdinal {
            levels: vec![0.0, 1.0],
        }
    }

    pub fn continuous(lo: f64, hi: f64, grid_points: usize) -> Result<Self> {
        let d = VariableDomain::ContinuousGrid { lo, hi, grid_points };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            VariableDomain::DiscreteOrdinal { levels } => validate_levels(levels),
            VariableDomain::ContinuousGrid { lo, hi, grid_points } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(CdnError::InvalidDomain(format!("grid [{lo}, {hi}] is empty")));
                }
                if *grid_points < 2 {
                    return Err(CdnError::InvalidDomain(format!(
                        "grid needs at least 2 points, got {grid_points}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, VariableDomain::DiscreteOrdinal { .. })
    }

    /// Levels, or grid points of a continuous domain.
    pub fn support(&self) -> Vec<f64> {
        match self {
            VariableDomain::DiscreteOrdinal { levels } => levels.clone(),
            VariableDomain::ContinuousGrid { lo, hi, grid_points } => {
                let step = (hi - lo) / (*grid_points - 1) as f64;
                (0..*grid_points)
                    .map(|i| if i + 1 == *grid_points { *hi } else { lo + i as f64 * step })
                    .collect()
            }
        }
    }

    pub fn lo(&self) -> f64 {
        match self {
            VariableDomain::DiscreteOrdinal { levels } => levels[0],
            VariableDomain::ContinuousGrid { lo, .. } => *lo,
        }
    }

    pub fn hi(&self) -> f64 {
        match self {
            VariableDomain::DiscreteOrdinal { levels } => *levels.last().expect("non-empty"),
            VariableDomain::ContinuousGrid { hi, .. } => *hi,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        match self {
            VariableDomain::DiscreteOrdinal { levels } => level_index(levels, x).is_ok(),
            VariableDomain::ContinuousGrid { lo, hi, .. } => *lo <= x && x <= *hi,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VariableNode {
    pub id: VariableId,
    pub name: String,
    pub domain: VariableDomain,
}

#[derive(Debug, Clone)]
pub struct FunctionNode {
    pub id: FunctionId,
    pub label: Option<String>,
    pub scope: Vec<VariableId>,
    pub function: FunctionRef,
}

impl FunctionNode {
    pub fn degree(&self) -> usize {
        self.scope.len()
    }
}

/// Node of the bipartite graph, used in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeRef {
    Variable(VariableId),
    Function(FunctionId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub variables: Vec<VariableId>,
    pub functions: Vec<FunctionId>,
    pub edges: usize,
}

impl Component {
    /// A connected component is a tree iff it has one edge fewer than nodes.
    pub fn is_tree(&self) -> bool {
        self.edges + 1 == self.variables.len() + self.functions.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub is_bipartite: bool,
    pub is_connected: bool,
    pub is_tree: bool,
    pub variable_count: usize,
    pub function_count: usize,
    pub edge_count: usize,
    pub components: Vec<Component>,
    /// A closed walk through the graph, first node repeated at the end.
    pub cycle: Option<Vec<NodeRef>>,
}

impl StructureReport {
    /// Every component is acyclic, so inference can run per component.
    pub fn is_forest(&self) -> bool {
        self.components.iter().all(Component::is_tree)
    }
}

/// Joint CDF `F(x) = c * prod_c phi_c(x_c)` over a bipartite graph.
#[derive(Debug, Clone)]
pub struct CdnGraph {
    variables: BTreeMap<VariableId, VariableNode>,
    functions: BTreeMap<FunctionId, FunctionNode>,
    by_name: HashMap<String, VariableId>,
    adjacency: BTreeMap<VariableId, Vec<FunctionId>>,
    next_variable: usize,
    next_function: usize,
    constant: f64,
}

impl Default for CdnGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl CdnGraph {
    pub fn new() -> Self {
        CdnGraph {
            variables: BTreeMap::new(),
            functions: BTreeMap::new(),
            by_name: HashMap::new(),
            adjacency: BTreeMap::new(),
            next_variable: 0,
            next_function: 0,
            constant: 1.0,
        }
    }

    pub fn add_variable(&mut self, name: impl Into<String>, domain: VariableDomain) -> Result<VariableId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(CdnError::DuplicateName(name));
        }
        domain.validate()?;
        let id = VariableId(self.next_variable);
        self.next_variable += 1;
        self.by_name.insert(name.clone(), id);
        self.adjacency.insert(id, Vec::new());
        self.variables.insert(id, VariableNode { id, name, domain });
        Ok(id)
    }

    pub fn add_function(&mut self, scope: &[VariableId], function: FunctionRef) -> Result<FunctionId> {
        self.add_labeled_function(None, scope, function)
    }

    pub fn add_labeled_function(
        &mut self,
        label: Option<String>,
        scope: &[VariableId],
        function: FunctionRef,
    ) -> Result<FunctionId> {
        let id = FunctionId(self.next_function);
        self.insert_function(id, label, scope.to_vec(), function)?;
        self.next_function += 1;
        Ok(id)
    }

    fn insert_function(
        &mut self,
        id: FunctionId,
        label: Option<String>,
        scope: Vec<VariableId>,
        function: FunctionRef,
    ) -> Result<()> {
        if scope.is_empty() {
            return Err(CdnError::InvalidScope("scope is empty".into()));
        }
        let distinct: BTreeSet<_> = scope.iter().collect();
        if distinct.len() != scope.len() {
            return Err(CdnError::InvalidScope("scope repeats a variable".into()));
        }
        if function.arity() != scope.len() {
            return Err(CdnError::ArityMismatch {
                arity: function.arity(),
                scope: scope.len(),
            });
        }
        for (pos, v) in scope.iter().enumerate() {
            let node = self
                .variables
                .get(v)
                .ok_or_else(|| CdnError::UnknownVariable(v.to_string()))?;
            match (function.axis(pos), &node.domain) {
                (AxisKind::Continuous, VariableDomain::ContinuousGrid { .. }) => {}
                (AxisKind::Discrete(a), VariableDomain::DiscreteOrdinal { levels })
                    if a.len() == levels.len()
                        && a.iter().zip(levels).all(|(x, y)| (x - y).abs() <= 1e-9) => {}
                (axis, domain) => {
                    return Err(CdnError::DomainMismatch(format!(
                        "{} argument {pos} is {axis:?} but variable `{}` has domain {domain:?}",
                        function.family(),
                        node.name
                    )))
                }
            }
        }
        for v in &scope {
            self.adjacency.get_mut(v).expect("checked above").push(id);
        }
        self.functions.insert(
            id,
            FunctionNode {
                id,
                label,
                scope,
                function,
            },
        );
        Ok(())
    }

    pub fn variable(&self, id: VariableId) -> Option<&VariableNode> {
        self.variables.get(&id)
    }

    pub fn variable_id(&self, name: &str) -> Option<VariableId> {
        self.by_name.get(name).copied()
    }

    pub fn variable_name(&self, id: VariableId) -> String {
        self.variables
            .get(&id)
            .map_or_else(|| id.to_string(), |v| v.name.clone())
    }

    pub fn function(&self, id: FunctionId) -> Option<&FunctionNode> {
        self.functions.get(&id)
    }

    pub fn function_name(&self, id: FunctionId) -> String {
        self.functions
            .get(&id)
            .and_then(|f| f.label.clone())
            .unwrap_or_else(|| id.to_string())
    }

    /// Variables in id order.
    pub fn variables(&self) -> impl Iterator<Item = &VariableNode> {
        self.variables.values()
    }

    /// Functions in id order.
    pub fn functions(&self) -> impl Iterator<Item = &FunctionNode> {
        self.functions.values()
    }

    /// Functions whose scope contains `id`, in id order.
    pub fn neighbors(&self, id: VariableId) -> &[FunctionId] {
        self.adjacency.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn variable_count(&self) -> usize {
        self.variables.len()
    }

    pub fn function_count(&self) -> usize {
        self.functions.len()
    }

    pub fn edge_count(&self) -> usize {
        self.functions.values().map(FunctionNode::degree).sum()
    }

    /// Constant factor left by functions whose arguments were all pinned.
    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `F(x)` at an assignment covering every variable.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<f64> {
        let mut product = self.constant;
        let mut z = Vec::new();
        for f in self.functions.values() {
            z.clear();
            for v in &f.scope {
                z.push(self.value_of(assignment, *v)?);
            }
            product *= f.function.evaluate(&z)?;
        }
        Ok(product)
    }

    pub(crate) fn value_of(&self, assignment: &Assignment, v: VariableId) -> Result<f64> {
        let x = *assignment
            .get(&v)
            .ok_or_else(|| CdnError::DomainError(format!("variable `{}` is unassigned", self.variable_name(v))))?;
        let domain = &self.variables[&v].domain;
        if !domain.contains(x) {
            return Err(CdnError::DomainError(format!(
                "{x} is outside the domain of `{}`",
                self.variable_name(v)
            )));
        }
        Ok(x)
    }

    /// Connected components, each listed by ascending ids, ordered by their
    /// smallest variable id.
    pub fn components(&self) -> Vec<Component> {
        let mut seen: BTreeSet<VariableId> = BTreeSet::new();
        let mut out = Vec::new();
        for &start in self.variables.keys() {
            if !seen.insert(start) {
                continue;
            }
            let mut vars = vec![start];
            let mut funcs = BTreeSet::new();
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &f in self.neighbors(v) {
                    if funcs.insert(f) {
                        for &w in &self.functions[&f].scope {
                            if seen.insert(w) {
                                vars.push(w);
                                queue.push_back(w);
                            }
                        }
                    }
                }
            }
            vars.sort();
            let edges = funcs.iter().map(|f| self.functions[f].degree()).sum();
            out.push(Component {
                variables: vars,
                functions: funcs.into_iter().collect(),
                edges,
            });
        }
        out
    }

    pub fn validate_structure(&self) -> StructureReport {
        let components = self.components();
        let is_connected = components.len() == 1;
        StructureReport {
            is_bipartite: true,
            is_connected,
            is_tree: is_connected && components[0].is_tree(),
            variable_count: self.variables.len(),
            function_count: self.functions.len(),
            edge_count: self.edge_count(),
            components,
            cycle: self.find_cycle(),
        }
    }

    /// First cycle closed by an edge in id order, found with a union-find
    /// forest.
    fn find_cycle(&self) -> Option<Vec<NodeRef>> {
        let mut forest: BTreeMap<NodeRef, Vec<NodeRef>> = BTreeMap::new();
        let mut parent: BTreeMap<NodeRef, NodeRef> = BTreeMap::new();
        fn root(parent: &mut BTreeMap<NodeRef, NodeRef>, mut n: NodeRef) -> NodeRef {
            while let Some(&p) = parent.get(&n) {
                if p == n {
                    break;
                }
                n = p;
            }
            n
        }
        for f in self.functions.values() {
            let a = NodeRef::Function(f.id);
            parent.entry(a).or_insert(a);
            for &v in &f.scope {
                let b = NodeRef::Variable(v);
                parent.entry(b).or_insert(b);
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                if ra == rb {
                    let mut path = forest_path(&forest, b, a);
                    path.push(b);
                    return Some(path);
                }
                parent.insert(ra, rb);
                forest.entry(a).or_default().push(b);
                forest.entry(b).or_default().push(a);
            }
        }
        None
    }

    /// Readable form of a cycle, such as `x - f0 - y - f1 - x`.
    pub fn describe_cycle(&self, cycle: &[NodeRef]) -> String {
        cycle
            .iter()
            .map(|n| match *n {
                NodeRef::Variable(v) => self.variable_name(v),
                NodeRef::Function(f) => self.function_name(f),
            })
            .collect::<Vec<_>>()
            .join(" - ")
    }

    /// Removes `vars` by pinning their arguments to the suprema in every
    /// neighboring function. Ids of the remaining nodes are unchanged.
    pub fn marginalize_unobserved(&self, vars: &BTreeSet<VariableId>) -> Result<CdnGraph> {
        for v in vars {
            if !self.variables.contains_key(v) {
                return Err(CdnError::UnknownVariable(v.to_string()));
            }
        }
        let mut out = CdnGraph {
            variables: self
                .variables
                .iter()
                .filter(|(id, _)| !vars.contains(id))
                .map(|(id, n)| (*id, n.clone()))
                .collect(),
            functions: BTreeMap::new(),
            by_name: HashMap::new(),
            adjacency: BTreeMap::new(),
            next_variable: self.next_variable,
            next_function: self.next_function,
            constant: self.constant,
        };
        for n in out.variables.values() {
            out.by_name.insert(n.name.clone(), n.id);
            out.adjacency.insert(n.id, Vec::new());
        }
        for f in self.functions.values() {
            let mask = f
                .scope
                .iter()
                .enumerate()
                .filter(|(_, v)| vars.contains(v))
                .fold(0u32, |m, (i, _)| m | 1 << i);
            if mask == 0 {
                out.insert_function(f.id, f.label.clone(), f.scope.clone(), f.function.clone())?;
                continue;
            }
            match f.function.pin_to_sup(mask)? {
                Pinned::Constant(c) => out.constant *= c,
                Pinned::Function(g) => {
                    let scope = f.scope.iter().copied().filter(|v| !vars.contains(v)).collect();
                    out.insert_function(f.id, f.label.clone(), scope, g)?;
                }
            }
        }
        Ok(out)
    }
}

/// Path between two nodes of a forest, inclusive.
fn forest_path(forest: &BTreeMap<NodeRef, Vec<NodeRef>>, from: NodeRef, to: NodeRef) -> Vec<NodeRef> {
    let mut prev: BTreeMap<NodeRef, NodeRef> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    prev.insert(from, from);
    while let Some(n) = queue.pop_front() {
        if n == to {
            break;
        }
        for &m in forest.get(&n).map_or(&[][..], Vec::as_slice) {
            if let std::collections::btree_map::Entry::Vacant(e) = prev.entry(m) {
                e.insert(n);
                queue.push_back(m);
            }
        }
    }
    let mut path = vec![to];
    let mut n = to;
    while n != from {
        n = prev[&n];
        path.push(n);
    }
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::functions::{DiscreteTable, GaussianCdf};

    fn table2() -> FunctionRef {
        Arc::new(
            DiscreteTable::new(vec![vec![0.0, 1.0]; 2], vec![0.2, 0.5, 0.3, 1.0], true).unwrap(),
        )
    }

    #[test]
    fn registration_and_errors() {
        let mut g = CdnGraph::new();
        let x = g.add_variable("x1", VariableDomain::binary()).unwrap();
        assert!(matches!(g.add_variable("x1", VariableDomain::binary()), Err(CdnError::DuplicateName(_))));
        let y = g.add_variable("x2", VariableDomain::binary()).unwrap();
        let z = g.add_variable("x3", VariableDomain::binary()).unwrap();
        g.add_function(&[x, y], table2()).unwrap();
        assert!(matches!(g.add_function(&[x, y, z], table2()), Err(CdnError::ArityMismatch { arity: 2, scope: 3 })));
        let c = g.add_variable("c", VariableDomain::continuous(-5.0, 5.0, 11).unwrap()).unwrap();
        assert!(matches!(g.add_function(&[x, c], table2()), Err(CdnError::DomainMismatch(_))));
        assert_eq!(g.variable_count(), 4);
    }

    #[test]
    fn parallel_factors_form_a_cycle() {
        let mut g = CdnGraph::new();
        let x = g.add_variable("x", VariableDomain::binary()).unwrap();
        let y = g.add_variable("y", VariableDomain::binary()).unwrap();
        g.add_function(&[x, y], table2()).unwrap();
        assert!(g.validate_structure().is_tree);
        g.add_function(&[x, y], table2()).unwrap();
        let report = g.validate_structure();
        assert!(!report.is_tree && report.is_connected);
        let cycle = report.cycle.unwrap();
        assert_eq!(cycle.len(), 5);
        assert_eq!(cycle.first(), cycle.last());
        assert_eq!(g.describe_cycle(&cycle), "y - f0 - x - f1 - y");
    }

    #[test]
    fn marginalizing_everything_leaves_the_constant() {
        let mut g = CdnGraph::new();
        let x = g.add_variable("x", VariableDomain::continuous(-4.0, 4.0, 9).unwrap()).unwrap();
        let y = g.add_variable("y", VariableDomain::continuous(-4.0, 4.0, 9).unwrap()).unwrap();
        let f = Arc::new(GaussianCdf::new(vec![0.0, 0.0], vec![1.0, 0.5, 0.5, 1.0]).unwrap());
        g.add_function(&[x, y], f).unwrap();
        let all: BTreeSet<_> = [x, y].into();
        let m = g.marginalize_unobserved(&all).unwrap();
        assert_eq!(m.variable_count(), 0);
        assert_eq!(m.function_count(), 0);
        assert_eq!(m.constant(), 1.0);
    }
}
