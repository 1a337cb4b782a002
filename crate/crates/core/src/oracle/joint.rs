use std::collections::BTreeMap;
use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive};

use crate::error::{CdnError, Result};

/// Scalar usable as a probability: `f64` or an exact rational.
pub trait Probability: Clone + Debug + PartialOrd + Signed + ToPrimitive {}

impl<T: Clone + Debug + PartialOrd + Signed + ToPrimitive> Probability for T {}

/// Dense joint distribution over ordinal variables, last variable fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint<P> {
    variables: Vec<String>,
    levels: Vec<usize>,
    probabilities: Vec<P>,
}

impl<P: Probability> DiscreteJoint<P> {
    /// Fails unless every entry is nonnegative and the entries sum to 1
    /// within `tolerance`.
    pub fn new(variables: Vec<String>, levels: Vec<usize>, probabilities: Vec<P>, tolerance: P) -> Result<Self> {
        if variables.len() != levels.len() || variables.is_empty() {
            return Err(CdnError::InvalidQuery("one level count per variable is required".into()));
        }
        if levels.contains(&0) {
            return Err(CdnError::InvalidDomain("every variable needs at least one level".into()));
        }
        let size: usize = levels.iter().product();
        if probabilities.len() != size {
            return Err(CdnError::InvalidQuery(format!(
                "expected {size} probabilities, got {}",
                probabilities.len()
            )));
        }
        if probabilities.iter().any(|p| p.is_negative()) {
            return Err(CdnError::InvalidQuery("probabilities must be nonnegative".into()));
        }
        let total = probabilities.iter().cloned().fold(P::zero(), |a, b| a + b);
        if (total.clone() - P::one()).abs() > tolerance {
            return Err(CdnError::InvalidQuery(format!("probabilities sum to {total:?}")));
        }
        Ok(DiscreteJoint { variables, levels, probabilities })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn probabilities(&self) -> &[P] {
        &self.probabilities
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.levels.len()];
        for (slot, &n) in out.iter_mut().zip(&self.levels).rev() {
            *slot = flat % n;
            flat /= n;
        }
        out
    }

    /// Probability of one joint level tuple.
    pub fn probability(&self, index: &[usize]) -> Result<P> {
        if index.len() != self.levels.len() || index.iter().zip(&self.levels).any(|(i, n)| i >= n) {
            return Err(CdnError::InvalidQuery(format!("index {index:?} out of range")));
        }
        let flat = index.iter().zip(&self.levels).fold(0, |acc, (i, n)| acc * n + i);
        Ok(self.probabilities[flat].clone())
    }

    /// Marginal over `vars`, keyed by their level tuple in the given order.
    pub fn marginal(&self, vars: &[usize]) -> BTreeMap<Vec<usize>, P> {
        let mut out = BTreeMap::new();
        for (flat, p) in self.probabilities.iter().enumerate() {
            let idx = self.unflatten(flat);
            let key: Vec<usize> = vars.iter().map(|&v| idx[v]).collect();
            let slot = out.entry(key).or_insert_with(P::zero);
            *slot = slot.clone() + p.clone();
        }
        out
    }

    /// `P(event | given)`, where both are lists of `(variable, level)`.
    pub fn conditional(&self, event: &[(usize, usize)], given: &[(usize, usize)]) -> Result<P> {
        let matches = |idx: &[usize], cond: &[(usize, usize)]| cond.iter().all(|&(v, l)| idx[v] == l);
        for &(v, l) in event.iter().chain(given) {
            if v >= self.levels.len() || l >= self.levels[v] {
                return Err(CdnError::InvalidQuery(format!("variable {v} level {l} out of range")));
            }
        }
        let (mut num, mut den) = (P::zero(), P::zero());
        for (flat, p) in self.probabilities.iter().enumerate() {
            let idx = self.unflatten(flat);
            if matches(&idx, given) {
                den = den + p.clone();
                if matches(&idx, event) {
                    num = num + p.clone();
                }
            }
        }
        if den.is_zero() {
            return Err(CdnError::ZeroEvidenceDensity);
        }
        Ok(num / den)
    }
}

/// The level combination at which the factorization fails worst.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceWitness<P> {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub c: Vec<usize>,
    /// `P(a, b | c)`.
    pub joint: P,
    /// `P(a | c) P(b | c)`.
    pub product: P,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceResult<P> {
    pub independent: bool,
    pub max_deviation: P,
    pub witness: Option<IndependenceWitness<P>>,
}

/// Tests `A ⫫ B | C` by comparing `P(a,b|c)` with `P(a|c)P(b|c)` at every
/// level combination with `P(c) > 0`. An empty `c` tests marginal
/// independence.
pub fn independence_test<P: Probability>(
    joint: &DiscreteJoint<P>,
    a: &[usize],
    b: &[usize],
    c: &[usize],
    tolerance: P,
) -> Result<IndependenceResult<P>> {
    if a.is_empty() || b.is_empty() {
        return Err(CdnError::InvalidQuery("both tested sets must be nonempty".into()));
    }
    let mut seen = vec![false; joint.levels.len()];
    for &v in a.iter().chain(b).chain(c) {
        if v >= seen.len() {
            return Err(CdnError::InvalidQuery(format!("variable index {v} out of range")));
        }
        if seen[v] {
            return Err(CdnError::InvalidQuery(format!(
                "variable `{}` appears in more than one set",
                joint.variables[v]
            )));
        }
        seen[v] = true;
    }
    let concat = |x: &[usize], y: &[usize]| [x, y].concat();
    let p_abc = joint.marginal(&concat(&concat(a, b), c));
    let p_ac = joint.marginal(&concat(a, c));
    let p_bc = joint.marginal(&concat(b, c));
    let p_c = joint.marginal(c);

    let mut max_deviation = P::zero();
    let mut witness = None;
    for (key, pabc) in &p_abc {
        let (ka, rest) = key.split_at(a.len());
        let (kb, kc) = rest.split_at(b.len());
        let pc = &p_c[kc];
        if pc.is_zero() {
            continue;
        }
        let j = pabc.clone() / pc.clone();
        let pa = p_ac[&concat(ka, kc)].clone() / pc.clone();
        let pb = p_bc[&concat(kb, kc)].clone() / pc.clone();
        let product = pa * pb;
        let dev = (j.clone() - product.clone()).abs();
        if witness.is_none() || dev > max_deviation {
            max_deviation = dev;
            witness = Some(IndependenceWitness {
                a: ka.to_vec(),
                b: kb.to_vec(),
                c: kc.to_vec(),
                joint: j,
                product,
            });
        }
    }
    Ok(IndependenceResult {
        independent: max_deviation <= tolerance,
        max_deviation,
        witness,
    })
}

const EXAMPLE_NUMERATORS: [i64; 16] = [343, 392, 105, 168, 105, 120, 87, 120, 49, 56, 15, 24, 63, 72, 33, 48];

/// The four-binary-variable example joint over `(x1, x2, x3, x4)`, exact
/// rationals over 1800.
pub fn table1_fixture() -> DiscreteJoint<Ratio<i64>> {
    DiscreteJoint {
        variables: (1..=4).map(|i| format!("x{i}")).collect(),
        levels: vec![2; 4],
        probabilities: EXAMPLE_NUMERATORS.iter().map(|&n| Ratio::new(n, 1800)).collect(),
    }
}

/// One (in)dependence claim about the fixture and its computed verdict.
#[derive(Debug, Clone)]
pub struct BatteryCase {
    pub label: String,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub c: Vec<usize>,
    pub expected_independent: bool,
    pub result: IndependenceResult<Ratio<i64>>,
}

impl BatteryCase {
    pub fn passed(&self) -> bool {
        self.result.independent == self.expected_independent
    }
}

/// The eight claims about [`table1_fixture`], tested exactly.
pub fn table1_battery() -> Vec<BatteryCase> {
    let joint = table1_fixture();
    let claims: [(usize, usize, Option<usize>, bool); 8] = [
        (0, 2, Some(1), false),
        (1, 3, Some(2), false),
        (0, 1, None, false),
        (1, 2, None, false),
        (2, 3, None, false),
        (0, 3, None, true),
        (0, 2, None, true),
        (1, 3, None, true),
    ];
    claims
        .iter()
        .map(|&(a, b, c, expected)| {
            let c: Vec<usize> = c.into_iter().collect();
            let rel = if expected { "indep" } else { "dep" };
            let label = match c.first() {
                Some(k) => format!("x{} {rel} x{} | x{}", a + 1, b + 1, k + 1),
                None => format!("x{} {rel} x{}", a + 1, b + 1),
            };
            let result = independence_test(&joint, &[a], &[b], &c, Ratio::from_integer(0))
                .expect("fixture sets are disjoint");
            BatteryCase { label, a: vec![a], b: vec![b], c, expected_independent: expected, result }
        })
        .collect()
}
