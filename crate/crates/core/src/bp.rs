//! Belief-propagation guided decimation.
//!
//! The rule sets the root to 1 with probability `mu / (mu + 1)`, where `mu` is
//! the ratio of satisfying assignments of the neighborhood with the root at 1
//! to those with the root at 0. Counts are exact: dynamic programming on
//! tree-shaped balls, variable elimination on balls with cycles.
//! [`bp_messages`] is the sum-product evaluator; on trees with `r/2` rounds
//! it reproduces the exact ratio.



use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::decimation::{AuxStream, LocalRule, Verdict};
use crate::error::{Error, Result};
use crate::instance::{is_forest, Clause, Formula, Neighborhood, Sign, Var};

/// Maximum number of variables in one intermediate table when a ball has cycles.
pub const WIDTH_LIMIT: usize = 22;

/// Maximum number of variables for [`count_by_enumeration`].
pub const ENUMERATION_LIMIT: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marginal {
    /// Satisfying assignments of the ball with the root at 1.
    pub count1: BigUint,
    /// Satisfying assignments of the ball with the root at 0.
    pub count0: BigUint,
}

impl Marginal {
    /// `count1 / count0`; infinite when only the root-at-1 side has solutions.
    pub fn mu(&self) -> f64 {
        if self.count0.is_zero() {
            if self.count1.is_zero() {
                f64::NAN
            } else {
                f64::INFINITY
            }
        } else {
            ratio(&self.count1, &self.count0)
        }
    }

    /// `mu / (mu + 1)`, or 1/2 when the ball is unsatisfiable.
    pub fn tau(&self) -> f64 {
        let total = &self.count1 + &self.count0;
        // Computed from the smaller count so that swapping the counts gives
        // exactly `1 - tau`.
        if total.is_zero() {
            0.5
        } else if self.count1 <= self.count0 {
            ratio(&self.count1, &total)
        } else {
            1.0 - ratio(&self.count0, &total)
        }
    }
}

/// `a / b` as a float, rescaling values beyond the `f64` range.
fn ratio(a: &BigUint, b: &BigUint) -> f64 {
    let shift = b.bits().saturating_sub(960);
    let (a, b) = (a >> shift, b >> shift);
    a.to_f64().unwrap_or(f64::INFINITY) / b.to_f64().unwrap_or(f64::INFINITY)
}

pub fn exact_marginal(nb: &Neighborhood) -> Result<Marginal> {
    let root = nb.local_root();
    let count = |value| -> Result<BigUint> {
        let reduced = nb.formula.reduce(root, value)?;
        count_solutions(&reduced)
    };
    Ok(Marginal {
        count1: count(true)?,
        count0: count(false)?,
    })
}

/// Number of assignments of the unfixed variables satisfying every clause.
/// A formula that already recorded a violation has none.
pub fn count_solutions(formula: &Formula) -> Result<BigUint> {
    if formula.violations() > 0 {
        return Ok(BigUint::zero());
    }
    if is_forest(formula) {
        return Ok(forest_count(formula));
    }
    let free = formula.fixed().iter().filter(|v| v.is_none()).count();
    if free < 128 {
        Ok(BigUint::from(eliminate::<u128>(formula)?))
    } else {
        eliminate::<BigUint>(formula)
    }
}

/// Exhaustive count over all `2^n` assignments; the reference for small instances.
pub fn count_by_enumeration(formula: &Formula) -> Result<BigUint> {
    let free: Vec<usize> = (0..formula.num_vars())
        .filter(|&i| formula.fixed()[i].is_none())
        .collect();
    if free.len() > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            what: "enumeration",
            size: free.len(),
            limit: ENUMERATION_LIMIT,
        });
    }
    if formula.violations() > 0 {
        return Ok(BigUint::zero());
    }
    let mut bits = vec![false; formula.num_vars()];
    let mut count = 0u64;
    for mask in 0u64..(1u64 << free.len()) {
        for (j, &i) in free.iter().enumerate() {
            bits[i] = (mask >> j) & 1 == 1;
        }
        if formula.is_satisfied_by(&bits) {
            count += 1;
        }
    }
    Ok(BigUint::from(count))
}

/// A table over `vars`; bit `i` of an index is the value of `vars[i]`.
struct Factor<T> {
    vars: Vec<usize>,
    table: Vec<T>,
}

fn clause_factor<T: Count>(clause: &Clause) -> Factor<T> {
    let width = clause.width();
    let table = (0..1usize << width)
        .map(|bits| {
            let truth = |i: usize| clause.literals[i].eval(bits >> i & 1 == 1);
            let any_true = (0..width).any(truth);
            let any_false = (0..width).any(|i| !truth(i));
            let ok = match clause.sign {
                Sign::Neutral => any_true && any_false,
                Sign::Plus => any_false,
                Sign::Minus => any_true,
            };
            if ok {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    Factor {
        vars: clause.literals.iter().map(|l| l.var.index()).collect(),
        table,
    }
}

/// Sum-product variable elimination in min-degree order.
fn eliminate<T: Count>(formula: &Formula) -> Result<T> {
    let n = formula.num_vars();
    let mut factors: Vec<Option<Factor<T>>> =
        formula.clauses().iter().map(|c| Some(clause_factor(c))).collect();
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (fi, f) in factors.iter().enumerate() {
        for &v in &f.as_ref().expect("fresh").vars {
            touching[v].push(fi);
        }
    }
    let mut pending: Vec<usize> = (0..n).filter(|&v| formula.fixed()[v].is_none()).collect();
    let mut total = T::one();
    let scope = |v: usize, touching: &[Vec<usize>], factors: &[Option<Factor<T>>]| {
        let mut vars: Vec<usize> = touching[v]
            .iter()
            .flat_map(|&fi| factors[fi].as_ref().expect("live factor").vars.iter().copied())
            .collect();
        vars.sort_unstable();
        vars.dedup();
        vars
    };
    // scope sizes only change for variables sharing the eliminated scope
    let mut width: Vec<usize> = (0..n).map(|v| scope(v, &touching, &factors).len()).collect();
    while !pending.is_empty() {
        let pos = (0..pending.len())
            .min_by_key(|&pos| width[pending[pos]])
            .expect("pending is non-empty");
        let v = pending.swap_remove(pos);
        let vars = scope(v, &touching, &factors);
        if vars.is_empty() {
            total = total.clone() + total;
            continue;
        }
        if vars.len() > WIDTH_LIMIT {
            return Err(Error::TooLarge {
                what: "elimination width",
                size: vars.len(),
                limit: WIDTH_LIMIT,
            });
        }
        let inputs: Vec<Factor<T>> = std::mem::take(&mut touching[v])
            .into_iter()
            .map(|fi| factors[fi].take().expect("live factor"))
            .collect();
        for f in &inputs {
            for w in &f.vars {
                touching[*w].retain(|&fi| factors[fi].is_some());
            }
        }
        let v_bit = vars.iter().position(|&w| w == v).expect("v in its own scope");
        // positions of each input's variables inside `vars`
        let maps: Vec<Vec<usize>> = inputs
            .iter()
            .map(|f| f.vars.iter().map(|w| vars.binary_search(w).expect("in scope")).collect())
            .collect();
        let out_vars: Vec<usize> = vars.iter().copied().filter(|&w| w != v).collect();
        let mut table = vec![T::zero(); 1 << out_vars.len()];
        for (out_index, slot) in table.iter_mut().enumerate() {
            let low = out_index & ((1 << v_bit) - 1);
            let high = (out_index >> v_bit) << (v_bit + 1);
            let mut sum = T::zero();
            for value in 0..2usize {
                let full = high | (value << v_bit) | low;
                let mut product = T::one();
                for (f, map) in inputs.iter().zip(&maps) {
                    let index = map
                        .iter()
                        .enumerate()
                        .fold(0, |acc, (i, &bit)| acc | ((full >> bit & 1) << i));
                    product = product * f.table[index].clone();
                    if product.is_zero() {
                        break;
                    }
                }
                sum = sum + product;
            }
            *slot = sum;
        }
        if out_vars.is_empty() {
            total = total * table.pop().expect("scalar");
            continue;
        }
        let fi = factors.len();
        for &w in &out_vars {
            touching[w].push(fi);
        }
        factors.push(Some(Factor {
            vars: out_vars.clone(),
            table,
        }));
        for w in out_vars {
            width[w] = scope(w, &touching, &factors).len();
        }
    }
    Ok(total)
}

/// Counts satisfying assignments of a formula whose factor graph is a forest.
fn forest_count(formula: &Formula) -> BigUint {
    let free = formula.fixed().iter().filter(|v| v.is_none()).count();
    // every intermediate count is at most 2^free
    if free < 128 {
        BigUint::from(forest_count_in::<u128>(formula))
    } else {
        forest_count_in::<BigUint>(formula)
    }
}

trait Count: Clone + Zero + One + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> {}
impl<T> Count for T where T: Clone + Zero + One + std::ops::Add<Output = T> + std::ops::Sub<Output = T> {}

fn forest_count_in<T: Count>(formula: &Formula) -> T {
    let n = formula.num_vars();
    let clauses = formula.clauses();
    let occ = formula.occurrences();
    let mut total = T::one();
    let mut visited = vec![false; n];
    let mut var_msg: Vec<Option<[T; 2]>> = vec![None; n];
    let mut clause_msg: Vec<Option<[T; 2]>> = vec![None; clauses.len()];
    for start in 0..n {
        if visited[start] || formula.fixed()[start].is_some() {
            continue;
        }
        if occ[start].is_empty() {
            visited[start] = true;
            total = total.clone() + total;
            continue;
        }
        let [m0, m1] = tree_root_messages(
            clauses,
            &occ,
            Var(start as u32),
            &mut visited,
            &mut var_msg,
            &mut clause_msg,
        );
        total = total * (m0 + m1);
    }
    total
}

/// Node of the rooted factor tree; `parent` is the position of the parent node.
enum Node {
    Var { var: usize, parent_clause: Option<usize> },
    Clause { clause: usize, parent_var: usize },
}

/// Upward dynamic programming from the leaves to `root`; returns the
/// unnormalized counts for `root = 0` and `root = 1`.
fn tree_root_messages<T: Count>(
    clauses: &[Clause],
    occ: &[Vec<u32>],
    root: Var,
    visited: &mut [bool],
    var_msg: &mut [Option<[T; 2]>],
    clause_msg: &mut [Option<[T; 2]>],
) -> [T; 2] {
    let mut nodes = vec![Node::Var {
        var: root.index(),
        parent_clause: None,
    }];
    visited[root.index()] = true;
    let mut i = 0;
    while i < nodes.len() {
        match nodes[i] {
            Node::Var { var, parent_clause } => {
                for &c in &occ[var] {
                    if Some(c as usize) != parent_clause {
                        nodes.push(Node::Clause {
                            clause: c as usize,
                            parent_var: var,
                        });
                    }
                }
            }
            Node::Clause { clause, parent_var } => {
                for lit in &clauses[clause].literals {
                    let w = lit.var.index();
                    if w != parent_var {
                        visited[w] = true;
                        nodes.push(Node::Var {
                            var: w,
                            parent_clause: Some(clause),
                        });
                    }
                }
            }
        }
        i += 1;
    }

    for node in nodes.iter().rev() {
        match *node {
            Node::Var { var, parent_clause } => {
                let mut m = [T::one(), T::one()];
                for &c in &occ[var] {
                    let c = c as usize;
                    if Some(c) == parent_clause {
                        continue;
                    }
                    let [c0, c1] = clause_msg[c].take().expect("child clause processed");
                    let [m0, m1] = m;
                    m = [m0 * c0, m1 * c1];
                }
                var_msg[var] = Some(m);
            }
            Node::Clause { clause, parent_var } => {
                let c = &clauses[clause];
                let mut children = Vec::with_capacity(c.width());
                let mut parent_negated = false;
                for lit in &c.literals {
                    let w = lit.var.index();
                    if w == parent_var {
                        parent_negated = lit.negated;
                    } else {
                        let m = var_msg[w].take().expect("child variable processed");
                        let [m0, m1] = m;
                        // (assignments making the literal true, making it false)
                        children.push(if lit.negated { (m0, m1) } else { (m1, m0) });
                    }
                }
                clause_msg[clause] = Some(clause_counts(c.sign, parent_negated, children));
            }
        }
    }
    var_msg[root.index()].take().expect("root processed")
}

/// Clause-to-parent counts given per-child (literal true, literal false) counts.
fn clause_counts<T: Count>(sign: Sign, parent_negated: bool, children: Vec<(T, T)>) -> [T; 2] {
    let mut all = T::one();
    let mut all_true = T::one();
    let mut all_false = T::one();
    for (t, f) in children {
        all = all * (t.clone() + f.clone());
        all_true = all_true * t;
        all_false = all_false * f;
    }
    let for_value = |value: bool| -> T {
        let lit_true = value != parent_negated;
        match (sign, lit_true) {
            (Sign::Neutral, true) | (Sign::Plus, true) => all.clone() - all_true.clone(),
            (Sign::Neutral, false) | (Sign::Minus, false) => all.clone() - all_false.clone(),
            (Sign::Plus, false) | (Sign::Minus, true) => all.clone(),
        }
    };
    [for_value(false), for_value(true)]
}

/// Synchronous sum-product from uniform messages; returns the root's
/// probability of being 1 after `rounds` clause-then-variable rounds.
pub fn bp_messages(nb: &Neighborhood, rounds: usize) -> f64 {
    let formula = &nb.formula;
    let clauses = formula.clauses();
    let occ = formula.occurrences();
    // edge index of (clause, position)
    let mut offset = Vec::with_capacity(clauses.len());
    let mut edges = 0usize;
    for c in clauses {
        offset.push(edges);
        edges += c.width();
    }
    let edge_of = |c: usize, v: usize| -> usize {
        offset[c]
            + clauses[c]
                .literals
                .iter()
                .position(|l| l.var.index() == v)
                .expect("variable in clause")
    };
    let mut to_clause = vec![[0.5f64, 0.5]; edges];
    let mut to_var = vec![[0.5f64, 0.5]; edges];

    for _ in 0..rounds {
        for (ci, c) in clauses.iter().enumerate() {
            for (p, lit) in c.literals.iter().enumerate() {
                let (mut all, mut all_true, mut all_false) = (1.0, 1.0, 1.0);
                for (q, other) in c.literals.iter().enumerate() {
                    if q == p {
                        continue;
                    }
                    let m = to_clause[offset[ci] + q];
                    let (t, f) = (m[usize::from(!other.negated)], m[usize::from(other.negated)]);
                    all *= t + f;
                    all_true *= t;
                    all_false *= f;
                }
                let value = |v: bool| -> f64 {
                    match (c.sign, v != lit.negated) {
                        (Sign::Neutral, true) | (Sign::Plus, true) => all - all_true,
                        (Sign::Neutral, false) | (Sign::Minus, false) => all - all_false,
                        _ => all,
                    }
                };
                to_var[offset[ci] + p] = normalized([value(false), value(true)]);
            }
        }
        for (ci, c) in clauses.iter().enumerate() {
            for (p, lit) in c.literals.iter().enumerate() {
                let mut m = [1.0, 1.0];
                for &d in &occ[lit.var.index()] {
                    let d = d as usize;
                    if d == ci {
                        continue;
                    }
                    let incoming = to_var[edge_of(d, lit.var.index())];
                    m[0] *= incoming[0];
                    m[1] *= incoming[1];
                }
                to_clause[offset[ci] + p] = normalized(m);
            }
        }
    }

    let root = nb.local_root().index();
    let mut belief = [1.0, 1.0];
    for &d in &occ[root] {
        let incoming = to_var[edge_of(d as usize, root)];
        belief[0] *= incoming[0];
        belief[1] *= incoming[1];
    }
    let total = belief[0] + belief[1];
    if total > 0.0 {
        belief[1] / total
    } else {
        0.5
    }
}

/// Zero vectors stay zero: an impossible subtree keeps contributing nothing.
fn normalized(m: [f64; 2]) -> [f64; 2] {
    let s = m[0] + m[1];
    if s > 0.0 {
        [m[0] / s, m[1] / s]
    } else {
        m
    }
}

/// What [`BpRule`] does when a cyclic ball's elimination width exceeds [`WIDTH_LIMIT`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LargeBall {
    Fail,
    /// Use `radius / 2` rounds of [`bp_messages`] instead.
    Messages,
}

#[derive(Debug, Clone, Copy)]
pub struct BpRule {
    pub radius: usize,
    pub large: LargeBall,
}

impl BpRule {
    pub fn new(radius: usize) -> Result<Self> {
        if radius < 2 || !radius.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "BP radius {radius} must be even and at least 2"
            )));
        }
        Ok(BpRule {
            radius,
            large: LargeBall::Messages,
        })
    }
}

impl LocalRule for BpRule {
    fn name(&self) -> String {
        format!("bp(r={})", self.radius)
    }

    fn radius(&self) -> usize {
        self.radius
    }

    fn decide(&self, nb: &Neighborhood, _aux: &mut AuxStream) -> Result<Verdict> {
        match exact_marginal(nb) {
            Ok(m) => Ok(Verdict::Tau(m.tau())),
            Err(Error::TooLarge { .. }) if self.large == LargeBall::Messages => {
                Ok(Verdict::Tau(bp_messages(nb, self.radius / 2)))
            }
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, ClauseId, Literal};

    fn nb(clauses: Vec<Clause>, n: usize, radius: usize) -> Neighborhood {
        Neighborhood::from_formula(Formula::new(n, 3, clauses).unwrap(), radius).unwrap()
    }

    #[test]
    fn fresh_ball_has_unit_ratio() {
        let f = generate(60, 3, 2.0, 4).unwrap();
        for x in 0..10 {
            let b = f.neighborhood(Var(x), 2).unwrap();
            let m = exact_marginal(&b).unwrap();
            assert_eq!(m.count1, m.count0);
            assert_eq!(m.tau(), 0.5);
            if b.is_tree() {
                assert_eq!(bp_messages(&b, 1), 0.5);
            }
        }
    }

    #[test]
    fn minus_unit_root_forces_one() {
        let b = nb(
            vec![Clause {
                id: ClauseId(0),
                literals: vec![Literal::positive(0)],
                sign: Sign::Minus,
            }],
            1,
            2,
        );
        let m = exact_marginal(&b).unwrap();
        assert!(m.count0.is_zero());
        assert_eq!(m.mu(), f64::INFINITY);
        assert_eq!(m.tau(), 1.0);
        assert_eq!(bp_messages(&b, 1), 1.0);
    }

    #[test]
    fn unsatisfiable_ball_is_half() {
        let b = nb(
            vec![
                Clause {
                    id: ClauseId(0),
                    literals: vec![Literal::positive(1)],
                    sign: Sign::Minus,
                },
                Clause {
                    id: ClauseId(1),
                    literals: vec![Literal::positive(1)],
                    sign: Sign::Plus,
                },
                Clause {
                    id: ClauseId(2),
                    literals: vec![Literal::positive(0), Literal::positive(1)],
                    sign: Sign::Plus,
                },
            ],
            2,
            2,
        );
        let m = exact_marginal(&b).unwrap();
        assert!(m.count0.is_zero() && m.count1.is_zero());
        assert_eq!(m.tau(), 0.5);
    }

    #[test]
    fn cyclic_balls_count_exactly() {
        // dense formula: most radius-2 balls contain cycles
        let f = generate(12, 3, 3.0, 8).unwrap();
        let mut cyclic = 0;
        for x in 0..12 {
            let b = f.neighborhood(Var(x), 2).unwrap();
            if !b.is_tree() {
                cyclic += 1;
            }
            for value in [false, true] {
                let reduced = b.formula.reduce(Var(0), value).unwrap();
                assert_eq!(
                    count_solutions(&reduced).unwrap(),
                    count_by_enumeration(&reduced).unwrap()
                );
            }
        }
        assert!(cyclic > 0);
    }

    #[test]
    fn ratio_handles_huge_counts() {
        let a = BigUint::one() << 5000u32;
        let b = (BigUint::one() << 5001u32) + 1u32;
        assert!((ratio(&a, &b) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rule_rejects_bad_radius() {
        assert!(BpRule::new(0).is_err());
        assert!(BpRule::new(3).is_err());
        assert!(BpRule::new(4).is_ok());
    }
}
