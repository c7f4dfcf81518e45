//! Geometry of the solution space.
//!
//! `SAT(Phi; beta, eta, m)` is the set of ordered `m`-tuples of satisfying
//! assignments whose pairwise Hamming distances all lie in the window
//! `[(beta - eta) n, beta n]`, taken over integers as
//! `[ceil((beta - eta) n), floor(beta n)]`.

use std::io::Write;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::decimation::{run_assignment, LocalRule, Ordering, Seeds};
use crate::error::{Error, Result};
use crate::instance::{clause_count, hamming, Formula};
use crate::rng::Streams;

/// Largest `n` accepted by [`census`] and [`solutions`].
pub const CENSUS_LIMIT: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapParams {
    pub beta: f64,
    pub eta: f64,
    pub m: usize,
}

impl OverlapParams {
    pub fn new(beta: f64, eta: f64, m: usize) -> Result<Self> {
        let p = OverlapParams { beta, eta, m };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid(format!("beta {} not in (0, 1)", self.beta)));
        }
        if !(self.eta > 0.0 && self.eta < self.beta) {
            return Err(Error::invalid(format!(
                "eta {} not in (0, beta={})",
                self.eta, self.beta
            )));
        }
        if self.m == 0 {
            return Err(Error::invalid("tuple size m must be at least 1"));
        }
        Ok(())
    }

    /// The window must sit inside `[0, 1/2]` for the interpolation argument.
    pub fn check_half_window(&self) -> Result<()> {
        self.validate()?;
        if self.beta > 0.5 {
            return Err(Error::invalid(format!(
                "window [{}, {}] leaves [0, 1/2]",
                self.beta - self.eta,
                self.beta
            )));
        }
        Ok(())
    }

    /// Integer distance window for `n` variables.
    pub fn window(&self, n: usize) -> (usize, usize) {
        let lo = ((self.beta - self.eta) * n as f64 - 1e-9).ceil().max(0.0) as usize;
        let hi = (self.beta * n as f64 + 1e-9).floor() as usize;
        (lo, hi)
    }
}

/// `beta = ln K / K`, `eta = beta^2`, `m = ceil(eps^2 K / ln K)`.
pub fn default_params(k: usize, eps: f64) -> Result<OverlapParams> {
    if k < 2 {
        return Err(Error::invalid(format!("K={k} must be at least 2")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("epsilon {eps} not in (0, 1)")));
    }
    let kf = k as f64;
    let beta = kf.ln() / kf;
    let m = (eps * eps * kf / kf.ln() - 1e-12).ceil().max(1.0) as usize;
    OverlapParams::new(beta, beta * beta, m)
}

/// All satisfying assignments as bit masks (bit `i` is variable `i`), in increasing order.
pub fn solutions(formula: &Formula) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    visit_solutions(formula, &mut |mask| {
        out.push(mask);
        true
    })?;
    Ok(out)
}

/// Exhaustive satisfiability check, stopping at the first solution.
pub fn is_satisfiable(formula: &Formula) -> Result<bool> {
    let mut found = false;
    visit_solutions(formula, &mut |_| {
        found = true;
        false
    })?;
    Ok(found)
}

/// Backtracking over variables in index order; `visit` returns false to stop.
fn visit_solutions(formula: &Formula, visit: &mut dyn FnMut(u64) -> bool) -> Result<()> {
    let n = formula.num_vars();
    if n > CENSUS_LIMIT {
        return Err(Error::TooLarge {
            what: "census instance",
            size: n,
            limit: CENSUS_LIMIT,
        });
    }
    if formula.violations() > 0 {
        return Ok(());
    }
    // clauses checked once their highest variable is set
    let mut closing: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ci, c) in formula.clauses().iter().enumerate() {
        if let Some(top) = c.literals.iter().map(|l| l.var.index()).max() {
            closing[top].push(ci);
        }
    }
    fn go(
        i: usize,
        formula: &Formula,
        closing: &[Vec<usize>],
        bits: &mut Vec<bool>,
        visit: &mut dyn FnMut(u64) -> bool,
    ) -> bool {
        if i == bits.len() {
            return visit(bits.iter().enumerate().map(|(j, &b)| (b as u64) << j).sum());
        }
        let choices: &[bool] = match formula.fixed()[i] {
            Some(false) => &[false],
            Some(true) => &[true],
            None => &[false, true],
        };
        for &value in choices {
            bits[i] = value;
            if closing[i]
                .iter()
                .all(|&ci| formula.clauses()[ci].satisfied_by(bits))
                && !go(i + 1, formula, closing, bits, visit)
            {
                return false;
            }
        }
        true
    }
    go(0, formula, &closing, &mut vec![false; n], visit);
    Ok(())
}

pub fn mask_to_bits(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Census {
    pub n: usize,
    pub solutions: usize,
    pub empty: bool,
    /// A tuple in the set, as bit masks, when it is nonempty.
    pub witness: Option<Vec<u64>>,
}

/// Depth-first search over ordered tuples; `visit` returns false to stop.
fn tuples(sols: &[u64], lo: usize, hi: usize, m: usize, visit: &mut dyn FnMut(&[usize]) -> bool) {
    let ok = |a: u64, b: u64| {
        let d = (a ^ b).count_ones() as usize;
        lo <= d && d <= hi
    };
    fn extend(
        chosen: &mut Vec<usize>,
        sols: &[u64],
        m: usize,
        ok: &dyn Fn(u64, u64) -> bool,
        visit: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        if chosen.len() == m {
            return visit(chosen);
        }
        for i in 0..sols.len() {
            if chosen.iter().all(|&j| ok(sols[i], sols[j])) {
                chosen.push(i);
                let go_on = extend(chosen, sols, m, ok, visit);
                chosen.pop();
                if !go_on {
                    return false;
                }
            }
        }
        true
    }
    extend(&mut Vec::with_capacity(m), sols, m, &ok, visit);
}

pub fn census(formula: &Formula, p: &OverlapParams) -> Result<Census> {
    p.validate()?;
    let sols = solutions(formula)?;
    let (lo, hi) = p.window(formula.num_vars());
    let mut witness = None;
    tuples(&sols, lo, hi, p.m, &mut |t| {
        witness = Some(t.iter().map(|&i| sols[i]).collect());
        false
    });
    Ok(Census {
        n: formula.num_vars(),
        solutions: sols.len(),
        empty: witness.is_none(),
        witness,
    })
}

/// Number of ordered tuples in `SAT(Phi; beta, eta, m)`.
pub fn count_tuples(formula: &Formula, p: &OverlapParams) -> Result<u128> {
    p.validate()?;
    let sols = solutions(formula)?;
    let (lo, hi) = p.window(formula.num_vars());
    let mut count = 0u128;
    tuples(&sols, lo, hi, p.m, &mut |_| {
        count += 1;
        true
    });
    Ok(count)
}

/// Probability that a random clause is violated by both of two assignments
/// at normalized distance `x`, with the clause's variables drawn independently.
pub fn pair_unsat_prob(k: usize, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid(format!("distance fraction {x} not in [0, 1]")));
    }
    Ok(2f64.powi(1 - k as i32) * (x.powi(k as i32) + (1.0 - x).powi(k as i32)))
}

fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let shift = x.bits().saturating_sub(1000);
    (x >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

fn binomial(n: usize, r: usize) -> BigUint {
    let mut b = BigUint::one();
    for i in 0..r {
        b = b * (n - i) / (i + 1);
    }
    b
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstMoment {
    /// Natural log of the upper bound on the expected number of tuples.
    pub ln_bound: f64,
    /// Per-clause truncated inclusion-exclusion factor.
    pub factor: f64,
    pub clauses: usize,
}

/// Upper bound on `ln E[|SAT(Phi; beta, eta, m)|]` for `Phi` with
/// `clause_count(n, d)` clauses.
pub fn first_moment_bound(n: usize, k: usize, d: f64, p: &OverlapParams) -> Result<FirstMoment> {
    p.validate()?;
    if k < 2 || n == 0 || d < 0.0 {
        return Err(Error::invalid(format!("bad instance parameters n={n} K={k} d={d}")));
    }
    let (lo, hi) = p.window(n);
    let mut shell = BigUint::zero();
    for r in lo..=hi.min(n) {
        shell += binomial(n, r);
    }
    let q = 2f64.powi(1 - k as i32);
    // x^K + (1-x)^K is convex, so its maximum on the window is at an endpoint
    let edge = |x: f64| x.powi(k as i32) + (1.0 - x).powi(k as i32);
    let worst = edge(p.beta - p.eta).max(edge(p.beta));
    let m = p.m as f64;
    let factor = 1.0 - m * q + m * (m - 1.0) / 2.0 * q * worst;
    if !(factor > 0.0 && factor <= 1.0) {
        return Err(Error::BoundInvalid { factor });
    }
    let clauses = clause_count(n, d);
    let count_part = if p.m == 1 {
        0.0
    } else {
        (p.m - 1) as f64 * ln_big(&shell)
    };
    Ok(FirstMoment {
        ln_bound: n as f64 * std::f64::consts::LN_2 + count_part + clauses as f64 * factor.ln(),
        factor,
        clauses,
    })
}

/// `V^{t,j}`: the first `t` variables of the decision order take their seeds
/// from `uj`, the rest from `u0`.
pub fn splice(z: &Ordering, u0: &Seeds, uj: &Seeds, t: usize) -> Seeds {
    let mut v = u0.clone();
    for &x in &z.order()[..t] {
        v.0[x.index()] = uj.0[x.index()];
    }
    v
}

/// Distances `rho(sigma_{V^{t+1}}, sigma_{V^t})` for `t = 0..n`.
pub fn increments(
    formula: &Formula,
    rule: &dyn LocalRule,
    z: &Ordering,
    u0: &Seeds,
    uj: &Seeds,
) -> Result<Vec<usize>> {
    let runs: Vec<Vec<bool>> = (0..=formula.num_vars())
        .into_par_iter()
        .map(|t| run_assignment(formula, rule, z, &splice(z, u0, uj, t)).map(|r| r.0))
        .collect::<Result<_>>()?;
    runs.windows(2).map(|w| hamming(&w[0], &w[1])).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct InterpolateOptions {
    pub replicates: usize,
    /// Upper slack above the target; defaults to `max(n^(1/3), 2 SE)`.
    pub slack: Option<f64>,
    /// Master seed for the replicate and tuple streams.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TupleReport {
    pub n: usize,
    pub rule: String,
    pub params: OverlapParams,
    pub replicates: usize,
    pub t0: usize,
    pub target: f64,
    pub estimate: f64,
    pub standard_error: f64,
    pub slack: f64,
    /// Assignments as strings of `0`/`1`, variable 1 first.
    pub assignments: Vec<String>,
    pub distances: Vec<Vec<usize>>,
    pub violations: Vec<usize>,
    pub all_satisfying: bool,
    pub window_respected: bool,
}

impl TupleReport {
    pub fn write_json<W: Write>(&self, out: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(out, self)
    }
}

/// Runs `m` coupled decimations whose mutual distances are steered into the
/// overlap window by splicing seeds at a common index `t0`.
///
/// `t0` is the smallest `t` (by bisection) whose replicate estimate of
/// `E rho(sigma_{U^0}, sigma_{V^{t,1}})` reaches `(beta - eta/2) n`; the same
/// replicate seeds are used for every `t`. The rule should be balanced.
pub fn interpolate(
    formula: &Formula,
    rule: &dyn LocalRule,
    z: &Ordering,
    p: &OverlapParams,
    options: InterpolateOptions,
) -> Result<TupleReport> {
    p.check_half_window()?;
    let n = formula.num_vars();
    if options.replicates < 2 {
        return Err(Error::invalid("interpolation needs at least two replicates"));
    }
    let streams = Streams::new(options.seed);
    let draw = |label: String| Seeds::draw(n, &mut streams.stream(&label));
    let target = (p.beta - p.eta / 2.0) * n as f64;

    let (t0, estimate, se) = if p.m == 1 {
        (0, 0.0, 0.0)
    } else {
        let pairs: Vec<(Seeds, Seeds, Vec<bool>)> = (0..options.replicates)
            .into_par_iter()
            .map(|r| {
                let (a, b) = (draw(format!("rep/{r}/0")), draw(format!("rep/{r}/1")));
                let base = run_assignment(formula, rule, z, &a)?.0;
                Ok((a, b, base))
            })
            .collect::<Result<_>>()?;
        let estimate_at = |t: usize| -> Result<(f64, f64)> {
            let d: Vec<f64> = pairs
                .par_iter()
                .map(|(a, b, base)| {
                    let run = run_assignment(formula, rule, z, &splice(z, a, b, t))?.0;
                    Ok(hamming(base, &run)? as f64)
                })
                .collect::<Result<_>>()?;
            let mean = d.iter().sum::<f64>() / d.len() as f64;
            let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
            Ok((mean, (var / d.len() as f64).sqrt()))
        };
        let top = estimate_at(n)?;
        if top.0 < target {
            return Err(Error::WindowUnreachable {
                target,
                reached: top.0,
            });
        }
        let (mut lo, mut hi, mut best) = (0usize, n, top);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let e = estimate_at(mid)?;
            if e.0 >= target {
                hi = mid;
                best = e;
            } else {
                lo = mid + 1;
            }
        }
        (hi, best.0, best.1)
    };
    let slack = options
        .slack
        .unwrap_or_else(|| (n as f64).cbrt().max(2.0 * se));

    let u0 = draw("tuple/0".into());
    let mut runs = vec![run_assignment(formula, rule, z, &u0)?];
    for j in 1..p.m {
        let uj = draw(format!("tuple/{j}"));
        runs.push(run_assignment(formula, rule, z, &splice(z, &u0, &uj, t0))?);
    }
    let mut distances = vec![vec![0usize; p.m]; p.m];
    for a in 0..p.m {
        for b in a + 1..p.m {
            let d = hamming(&runs[a].0, &runs[b].0)?;
            distances[a][b] = d;
            distances[b][a] = d;
        }
    }
    let (wlo, whi) = p.window(n);
    Ok(TupleReport {
        n,
        rule: rule.name(),
        params: *p,
        replicates: options.replicates,
        t0,
        target,
        estimate,
        standard_error: se,
        slack,
        assignments: runs
            .iter()
            .map(|(bits, _)| bits.iter().map(|&b| if b { '1' } else { '0' }).collect())
            .collect(),
        violations: runs.iter().map(|r| r.1).collect(),
        all_satisfying: runs.iter().all(|r| r.1 == 0),
        window_respected: (0..p.m)
            .all(|a| (a + 1..p.m).all(|b| (wlo..=whi).contains(&distances[a][b]))),
        distances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_formula;

    #[test]
    fn defaults_at_k16() {
        let p = default_params(16, 0.5).unwrap();
        assert!((p.beta - 0.173286795).abs() < 1e-8);
        assert!((p.eta - 0.030028313).abs() < 1e-8);
        assert_eq!(p.m, 2);
        assert!(p.check_half_window().is_ok());
        assert!(default_params(1, 0.5).is_err());
        assert!(default_params(16, 1.0).is_err());
    }

    #[test]
    fn window_rounds_inward() {
        let p = OverlapParams::new(0.4, 0.15, 2).unwrap();
        assert_eq!(p.window(12), (3, 4));
        assert_eq!(p.window(20), (5, 8));
        assert!(OverlapParams::new(0.3, 0.3, 2).is_err());
        assert!(OverlapParams::new(0.6, 0.1, 2).unwrap().check_half_window().is_err());
    }

    #[test]
    fn pair_probability_endpoints() {
        assert_eq!(pair_unsat_prob(3, 0.0).unwrap(), 0.25);
        assert_eq!(pair_unsat_prob(3, 1.0).unwrap(), 0.25);
        assert!((pair_unsat_prob(3, 1.0 / 3.0).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!(pair_unsat_prob(3, 1.5).is_err());
    }

    #[test]
    fn bound_special_cases() {
        let p1 = OverlapParams::new(0.4, 0.15, 1).unwrap();
        let b = first_moment_bound(12, 3, 2.0, &p1).unwrap();
        let expect = 12.0 * 2f64.ln() + 24.0 * (0.75f64).ln();
        assert!((b.ln_bound - expect).abs() < 1e-12);
        let b = first_moment_bound(12, 3, 0.0, &p1).unwrap();
        assert!((b.ln_bound - 12.0 * 2f64.ln()).abs() < 1e-12);
        // m=2, window {3,4}: C(12,3)+C(12,4) = 220+495
        let p2 = OverlapParams::new(0.4, 0.15, 2).unwrap();
        let b = first_moment_bound(12, 3, 2.0, &p2).unwrap();
        let worst = 0.25f64.powi(3) + 0.75f64.powi(3);
        let factor = 1.0 - 2.0 * 0.25 + 0.25 * worst;
        let expect = 12.0 * 2f64.ln() + 715f64.ln() + 24.0 * factor.ln();
        assert!((b.ln_bound - expect).abs() < 1e-9);
    }

    #[test]
    fn bound_flags_invalid_factor() {
        // near-identical tuples: the pair terms outweigh the single terms
        let p = OverlapParams::new(0.2, 0.1, 5).unwrap();
        assert!(matches!(
            first_moment_bound(10, 3, 1.0, &p),
            Err(Error::BoundInvalid { .. })
        ));
    }

    #[test]
    fn big_binomials() {
        assert_eq!(binomial(10, 3), BigUint::from(120u32));
        let ln = ln_big(&binomial(3000, 1500));
        // Stirling: ln C(2k, k) ~ 2k ln 2 - ln(pi k)/2
        let approx = 3000.0 * 2f64.ln() - (std::f64::consts::PI * 1500.0).ln() / 2.0;
        assert!((ln - approx).abs() < 1e-3);
    }

    #[test]
    fn unsatisfiable_and_single_tuples() {
        let unsat = parse_formula("p naesat 1 2 3\nm 1 0\np 1 0\n").unwrap();
        let p = OverlapParams::new(0.4, 0.2, 1).unwrap();
        assert!(census(&unsat, &p).unwrap().empty);
        let sat = parse_formula("p naesat 3 1 3\nn 1 2 3 0\n").unwrap();
        let c = census(&sat, &p).unwrap();
        assert_eq!(c.solutions, 6);
        assert!(!c.empty);
        assert_eq!(count_tuples(&sat, &p).unwrap(), 6);
    }

    #[test]
    fn census_guard() {
        let big = Formula::new(27, 3, vec![]).unwrap();
        let p = OverlapParams::new(0.4, 0.2, 2).unwrap();
        assert!(matches!(census(&big, &p), Err(Error::TooLarge { .. })));
    }
}
