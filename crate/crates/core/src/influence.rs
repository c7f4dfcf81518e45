//! Influence ranges of a local algorithm.
//!
//! `x` influences `y` when a chain `x = y0, y1, ..., yt = y` exists in which
//! consecutive variables are within `r` hops of each other in the variable
//! graph of the original formula and every step goes to a variable decided
//! later. All distances here are variable-graph hops: two variables are
//! adjacent when they share a clause.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::decimation::{run_assignment, LocalRule, Ordering, Seeds};
use crate::error::{Error, Result};
use crate::instance::{Formula, Var};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InfluenceSet {
    pub source: Var,
    /// Sorted; always contains `source`.
    pub members: Vec<Var>,
}

impl InfluenceSet {
    pub fn contains(&self, v: Var) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Variables within `r` hops of `root`, excluding `root`.
fn within_hops(graph: &[Vec<u32>], root: usize, r: usize, dist: &mut [usize], touched: &mut Vec<usize>) {
    dist[root] = 0;
    touched.push(root);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        if dist[v] == r {
            continue;
        }
        for &w in &graph[v] {
            let w = w as usize;
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                touched.push(w);
                queue.push_back(w);
            }
        }
    }
}

/// Searcher reusing its scratch space across sources.
pub struct InfluenceSearch<'a> {
    graph: Vec<Vec<u32>>,
    z: &'a Ordering,
    r: usize,
}

impl<'a> InfluenceSearch<'a> {
    pub fn new(formula: &Formula, z: &'a Ordering, r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("influence radius must be at least 1"));
        }
        if z.len() != formula.num_vars() {
            return Err(Error::invalid(format!(
                "ordering has {} weights for {} variables",
                z.len(),
                formula.num_vars()
            )));
        }
        Ok(InfluenceSearch {
            graph: formula.variable_graph(),
            z,
            r,
        })
    }

    pub fn range(&self, x: Var) -> InfluenceSet {
        let n = self.graph.len();
        let mut member = vec![false; n];
        let mut dist = vec![usize::MAX; n];
        let mut touched = Vec::new();
        member[x.index()] = true;
        let mut stack = vec![x.index()];
        while let Some(v) = stack.pop() {
            within_hops(&self.graph, v, self.r, &mut dist, &mut touched);
            for &w in &touched {
                if !member[w] && self.z.precedes(Var(v as u32), Var(w as u32)) {
                    member[w] = true;
                    stack.push(w);
                }
            }
            for w in touched.drain(..) {
                dist[w] = usize::MAX;
            }
        }
        InfluenceSet {
            source: x,
            members: (0..n).filter(|&i| member[i]).map(|i| Var(i as u32)).collect(),
        }
    }
}

pub fn influence_range(formula: &Formula, z: &Ordering, r: usize, x: Var) -> Result<InfluenceSet> {
    if x.index() >= formula.num_vars() {
        return Err(Error::invalid(format!("{x} out of range")));
    }
    Ok(InfluenceSearch::new(formula, z, r)?.range(x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceStats {
    pub max: usize,
    pub mean: f64,
    /// Range size to number of variables with that size.
    pub histogram: BTreeMap<usize, usize>,
}

pub fn max_influence_stats(formula: &Formula, z: &Ordering, r: usize) -> Result<InfluenceStats> {
    let search = InfluenceSearch::new(formula, z, r)?;
    let sizes: Vec<usize> = (0..formula.num_vars())
        .into_par_iter()
        .map(|i| search.range(Var(i as u32)).len())
        .collect();
    let mut histogram = BTreeMap::new();
    for &s in &sizes {
        *histogram.entry(s).or_insert(0) += 1;
    }
    Ok(InfluenceStats {
        max: sizes.iter().copied().max().unwrap_or(0),
        mean: if sizes.is_empty() {
            0.0
        } else {
            sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
        },
        histogram,
    })
}

/// Writes `size,count` rows.
pub fn write_histogram_csv<W: Write>(stats: &InfluenceStats, mut out: W) -> std::io::Result<()> {
    writeln!(out, "size,count")?;
    for (size, count) in &stats.histogram {
        writeln!(out, "{size},{count}")?;
    }
    Ok(())
}

/// Variables whose decision differs between the runs with `u` and `u2`.
///
/// The seeds may differ in at most one variable's block (threshold and
/// auxiliary stream); identical seeds give the empty set.
pub fn diff_set(
    formula: &Formula,
    z: &Ordering,
    u: &Seeds,
    u2: &Seeds,
    rule: &dyn LocalRule,
) -> Result<Vec<Var>> {
    if u.len() != u2.len() {
        return Err(Error::invalid("seed vectors have different lengths"));
    }
    let differing = u.differing(u2);
    if differing.len() > 1 {
        return Err(Error::invalid(format!(
            "seeds differ in {} coordinates; at most one allowed",
            differing.len()
        )));
    }
    if differing.is_empty() {
        return Ok(Vec::new());
    }
    let (a, _) = run_assignment(formula, rule, z, u)?;
    let (b, _) = run_assignment(formula, rule, z, u2)?;
    Ok(a.iter()
        .zip(&b)
        .enumerate()
        .filter(|(_, (x, y))| x != y)
        .map(|(i, _)| Var(i as u32))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthRow {
    pub t: usize,
    pub mean: f64,
    pub max: usize,
    pub roots: usize,
}

/// Sizes of the `t`-hop balls, `t = 0..=t_max`, around each root.
pub fn ball_growth(formula: &Formula, t_max: usize, roots: &[Var]) -> Result<Vec<GrowthRow>> {
    if roots.is_empty() {
        return Err(Error::invalid("ball growth needs at least one root"));
    }
    if let Some(v) = roots.iter().find(|v| v.index() >= formula.num_vars()) {
        return Err(Error::invalid(format!("{v} out of range")));
    }
    let graph = formula.variable_graph();
    let per_root: Vec<Vec<usize>> = roots
        .par_iter()
        .map(|root| {
            let mut dist = vec![usize::MAX; graph.len()];
            let mut touched = Vec::new();
            within_hops(&graph, root.index(), t_max, &mut dist, &mut touched);
            let mut counts = vec![0usize; t_max + 1];
            for &w in &touched {
                counts[dist[w]] += 1;
            }
            for t in 1..=t_max {
                counts[t] += counts[t - 1];
            }
            counts
        })
        .collect();
    Ok((0..=t_max)
        .map(|t| GrowthRow {
            t,
            mean: per_root.iter().map(|c| c[t]).sum::<usize>() as f64 / roots.len() as f64,
            max: per_root.iter().map(|c| c[t]).max().unwrap_or(0),
            roots: roots.len(),
        })
        .collect())
}

/// Writes `t,mean,max,roots` rows.
pub fn write_growth_csv<W: Write>(rows: &[GrowthRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,mean,max,roots")?;
    for row in rows {
        writeln!(out, "{},{},{},{}", row.t, row.mean, row.max, row.roots)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_formula;

    #[test]
    fn no_clauses_means_singletons() {
        let f = Formula::new(5, 3, vec![]).unwrap();
        let z = Ordering::from_weights(vec![0.1, 0.9, 0.5, 0.3, 0.7]).unwrap();
        for i in 0..5 {
            assert_eq!(influence_range(&f, &z, 3, Var(i)).unwrap().members, vec![Var(i)]);
        }
        assert_eq!(max_influence_stats(&f, &z, 2).unwrap().max, 1);
        let rows = ball_growth(&f, 3, &[Var(0), Var(2)]).unwrap();
        assert!(rows.iter().all(|r| r.max == 1 && r.mean == 1.0));
    }

    #[test]
    fn triangle() {
        let f = parse_formula("p naesat 3 1 3\nn 1 2 3 0\n").unwrap();
        let z = Ordering::from_weights(vec![0.9, 0.5, 0.1]).unwrap();
        let ir = |i| influence_range(&f, &z, 2, Var(i)).unwrap().members;
        assert_eq!(ir(0), vec![Var(0), Var(1), Var(2)]);
        assert_eq!(ir(1), vec![Var(1), Var(2)]);
        assert_eq!(ir(2), vec![Var(2)]);
        let stats = max_influence_stats(&f, &z, 2).unwrap();
        assert_eq!(stats.max, 3);
        assert_eq!(stats.histogram, BTreeMap::from([(1, 1), (2, 1), (3, 1)]));
        let mut csv = Vec::new();
        write_histogram_csv(&stats, &mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "size,count\n1,1\n2,1\n3,1\n");
    }

    #[test]
    fn path_needs_enough_hops() {
        // x1 - x2 - x3 along two clauses, decided in index order
        let f = parse_formula("p naesat 3 2 2\nn 1 2 0\nn 2 3 0\n").unwrap();
        let z = Ordering::from_weights(vec![0.9, 0.1, 0.5]).unwrap();
        // x2 is last: x1 reaches x3 directly only with two hops
        assert_eq!(influence_range(&f, &z, 1, Var(0)).unwrap().members, vec![Var(0), Var(1)]);
        assert_eq!(
            influence_range(&f, &z, 2, Var(0)).unwrap().members,
            vec![Var(0), Var(1), Var(2)]
        );
    }

    #[test]
    fn rejects_bad_arguments() {
        let f = Formula::new(2, 3, vec![]).unwrap();
        let z = Ordering::from_weights(vec![0.1, 0.2]).unwrap();
        assert!(influence_range(&f, &z, 0, Var(0)).is_err());
        assert!(influence_range(&f, &z, 1, Var(2)).is_err());
        assert!(ball_growth(&f, 2, &[]).is_err());
    }
}
