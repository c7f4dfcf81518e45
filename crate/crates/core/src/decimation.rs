//! The sequential local decimation engine.
//!
//! Variables are visited in decreasing order of their ordering weights. At
//! each step the engine cuts the depth-`r` ball around the current variable
//! out of the *current* reduced formula, asks the local rule for a verdict,
//! fixes the variable and reduces. Violated clauses are counted and dropped;
//! the run always assigns every variable.

use std::cmp::Ordering as CmpOrdering;
use std::io::Write;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{collect_ball, Clause, Fate, Formula, Neighborhood, Sign, Var};

/// Random ordering weights and the induced visiting order.
///
/// Ties in weight are broken by variable index (the larger index is visited
/// first), so the order is always strict.
#[derive(Debug, Clone, PartialEq)]
pub struct Ordering {
    weights: Vec<f64>,
    order: Vec<Var>,
    rank: Vec<u32>,
}

impl Ordering {
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("ordering needs at least one variable"));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::invalid(format!("ordering weight {w} outside [0, 1]")));
        }
        let mut order: Vec<Var> = (0..weights.len() as u32).map(Var).collect();
        order.sort_by(|a, b| key_cmp(&weights, *b, *a));
        let mut rank = vec![0u32; weights.len()];
        for (pos, v) in order.iter().enumerate() {
            rank[v.index()] = pos as u32;
        }
        Ok(Ordering {
            weights,
            order,
            rank,
        })
    }

    pub fn draw<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let weights = (0..n).map(|_| rng.gen::<f64>()).collect();
        Ordering::from_weights(weights)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Variables in visiting order (largest weight first).
    pub fn order(&self) -> &[Var] {
        &self.order
    }

    /// Position of `v` in the visiting order.
    pub fn rank(&self, v: Var) -> usize {
        self.rank[v.index()] as usize
    }

    /// True when `a` is decided strictly before `b` (its weight key is larger).
    pub fn precedes(&self, a: Var, b: Var) -> bool {
        self.rank[a.index()] < self.rank[b.index()]
    }
}

fn key_cmp(weights: &[f64], a: Var, b: Var) -> CmpOrdering {
    weights[a.index()]
        .total_cmp(&weights[b.index()])
        .then(a.cmp(&b))
}

/// Per-variable randomness of one run.
///
/// `threshold` is the uniform compared against a rule's probability; `aux`
/// seeds the private stream of sampling rules; `mirrored` marks the
/// complement-coupled copy of that stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub threshold: f64,
    pub aux: u64,
    pub mirrored: bool,
}

impl Seed {
    pub fn complement(self) -> Seed {
        Seed {
            threshold: 1.0 - self.threshold,
            aux: self.aux,
            mirrored: !self.mirrored,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds(pub Vec<Seed>);

impl Seeds {
    pub fn draw<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Self {
        Seeds(
            (0..n)
                .map(|_| Seed {
                    threshold: rng.gen(),
                    aux: rng.gen(),
                    mirrored: false,
                })
                .collect(),
        )
    }

    /// Seeds with the given thresholds and auxiliary streams derived from `aux_base`.
    pub fn from_thresholds(thresholds: &[f64], aux_base: u64) -> Self {
        Seeds(
            thresholds
                .iter()
                .enumerate()
                .map(|(i, &t)| Seed {
                    threshold: t,
                    aux: aux_base ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                    mirrored: false,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `1 - u` on every threshold and the mirrored auxiliary streams.
    pub fn complement(&self) -> Seeds {
        Seeds(self.0.iter().map(|s| s.complement()).collect())
    }

    /// Indices where the two seed vectors differ.
    pub fn differing(&self, other: &Seeds) -> Vec<usize> {
        self.0
            .iter()
            .zip(&other.0)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i)
            .collect()
    }
}

/// The private random stream a sampling rule may consume for one decision.
///
/// A mirrored stream yields the same uniforms but reports itself mirrored
/// and flips every coin, so a rule can produce the complement-coupled draw.
pub struct AuxStream {
    rng: ChaCha8Rng,
    mirrored: bool,
}

impl AuxStream {
    pub fn new(seed: u64, mirrored: bool) -> Self {
        AuxStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            mirrored,
        }
    }

    pub fn from_seed(seed: &Seed) -> Self {
        AuxStream::new(seed.aux, seed.mirrored)
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen()
    }

    pub fn coin(&mut self) -> bool {
        self.rng.gen::<bool>() != self.mirrored
    }

    pub fn next_seed(&mut self) -> u64 {
        self.rng.gen()
    }
}

/// What a local rule says about the root of a neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// Probability of setting the root to 1; the engine thresholds it.
    Tau(f64),
    /// A decision already sampled from the rule's private stream.
    Bit(bool),
}

impl Verdict {
    /// `u <= tau` sets the variable to 1.
    pub fn resolve(self, threshold: f64) -> bool {
        match self {
            Verdict::Tau(tau) => threshold <= tau,
            Verdict::Bit(b) => b,
        }
    }
}

/// A map from rooted neighborhoods to decisions about the root.
pub trait LocalRule: Send + Sync {
    fn name(&self) -> String;

    /// Even factor-graph radius of the neighborhoods the rule reads.
    fn radius(&self) -> usize;

    fn decide(&self, nb: &Neighborhood, aux: &mut AuxStream) -> Result<Verdict>;
}

/// `tau` regardless of the neighborhood. Balanced only for `tau = 1/2`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantRule {
    pub tau: f64,
    pub radius: usize,
}

impl LocalRule for ConstantRule {
    fn name(&self) -> String {
        format!("const({})", self.tau)
    }

    fn radius(&self) -> usize {
        self.radius
    }

    fn decide(&self, _nb: &Neighborhood, _aux: &mut AuxStream) -> Result<Verdict> {
        Ok(Verdict::Tau(self.tau))
    }
}

/// Follows signed unit clauses on the root; 1/2 when none or when they conflict.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitClauseRule;

impl UnitClauseRule {
    pub fn tau(nb: &Neighborhood) -> f64 {
        let root = nb.local_root();
        let (mut to_one, mut to_zero) = (false, false);
        for clause in nb.formula.clauses() {
            if clause.width() != 1 || clause.literals[0].var != root {
                continue;
            }
            // minus needs a true literal, plus needs a false one
            let literal_must_be = match clause.sign {
                Sign::Minus => true,
                Sign::Plus => false,
                Sign::Neutral => continue,
            };
            if literal_must_be != clause.literals[0].negated {
                to_one = true;
            } else {
                to_zero = true;
            }
        }
        match (to_one, to_zero) {
            (true, false) => 1.0,
            (false, true) => 0.0,
            _ => 0.5,
        }
    }
}

impl LocalRule for UnitClauseRule {
    fn name(&self) -> String {
        "uc".into()
    }

    fn radius(&self) -> usize {
        2
    }

    fn decide(&self, nb: &Neighborhood, _aux: &mut AuxStream) -> Result<Verdict> {
        Ok(Verdict::Tau(Self::tau(nb)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub var: Var,
    pub verdict: Verdict,
    pub value: bool,
    /// Clauses satisfied and deleted by this decision.
    pub satisfied: usize,
    /// Clauses violated and deleted by this decision.
    pub violated: usize,
    /// Neutral clauses that became signed.
    pub signed: usize,
    /// The rooted ball the rule saw, in the text format, when recorded.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub neighborhood: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rule: String,
    pub order: Vec<Var>,
    pub steps: Vec<StepRecord>,
    pub assignment: Vec<bool>,
    pub violations: usize,
}

impl RunTrace {
    /// One JSON object per step, newline separated.
    pub fn write_json_lines<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for step in &self.steps {
            serde_json::to_writer(&mut out, step)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Keep each step's neighborhood as text in the trace.
    pub record_neighborhoods: bool,
}

/// Mutable reduced formula owned by a single run.
pub(crate) struct WorkingFormula {
    k: usize,
    clauses: Vec<Clause>,
    alive: Vec<bool>,
    occ: Vec<Vec<u32>>,
    fixed: Vec<Option<bool>>,
    violations: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Effects {
    satisfied: usize,
    violated: usize,
    signed: usize,
}

impl WorkingFormula {
    pub(crate) fn new(formula: &Formula) -> Result<Self> {
        if formula.fixed().iter().any(Option::is_some) {
            return Err(Error::invalid(
                "decimation runs start from a formula with no fixed variables",
            ));
        }
        Ok(WorkingFormula {
            k: formula.k(),
            clauses: formula.clauses().to_vec(),
            alive: vec![true; formula.num_clauses()],
            occ: formula.occurrences(),
            fixed: vec![None; formula.num_vars()],
            violations: formula.violations(),
        })
    }

    pub(crate) fn ball(&self, root: Var, radius: usize) -> Neighborhood {
        collect_ball(
            &self.clauses,
            |c| self.alive[c],
            &self.occ,
            root,
            radius,
            self.k,
        )
    }

    pub(crate) fn assign(&mut self, var: Var, value: bool) -> Effects {
        debug_assert!(self.fixed[var.index()].is_none());
        self.fixed[var.index()] = Some(value);
        let mut fx = Effects::default();
        for &ci in &self.occ[var.index()] {
            let ci = ci as usize;
            if !self.alive[ci] {
                continue;
            }
            let was_neutral = self.clauses[ci].sign == Sign::Neutral;
            match self.clauses[ci].fix(var, value) {
                Fate::Kept => {
                    if was_neutral {
                        fx.signed += 1;
                    }
                }
                Fate::Satisfied => {
                    self.alive[ci] = false;
                    fx.satisfied += 1;
                }
                Fate::Violated => {
                    self.alive[ci] = false;
                    fx.violated += 1;
                }
            }
        }
        self.violations += fx.violated;
        fx
    }

    #[cfg(test)]
    pub(crate) fn violations(&self) -> usize {
        self.violations
    }

    #[cfg(test)]
    pub(crate) fn live_clauses(&self) -> Vec<Clause> {
        self.clauses
            .iter()
            .zip(&self.alive)
            .filter(|(_, a)| **a)
            .map(|(c, _)| c.clone())
            .collect()
    }
}

fn check_run_inputs(formula: &Formula, rule: &dyn LocalRule, z: &Ordering, u: &Seeds) -> Result<()> {
    let n = formula.num_vars();
    if z.len() != n || u.len() != n {
        return Err(Error::invalid(format!(
            "ordering ({}) and seeds ({}) must both have length n={n}",
            z.len(),
            u.len()
        )));
    }
    if !rule.radius().is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "rule radius {} must be even",
            rule.radius()
        )));
    }
    Ok(())
}

/// Runs the local algorithm to completion.
pub fn run(formula: &Formula, rule: &dyn LocalRule, z: &Ordering, u: &Seeds) -> Result<RunTrace> {
    run_with(formula, rule, z, u, RunOptions::default())
}

pub fn run_with(
    formula: &Formula,
    rule: &dyn LocalRule,
    z: &Ordering,
    u: &Seeds,
    options: RunOptions,
) -> Result<RunTrace> {
    check_run_inputs(formula, rule, z, u)?;
    let mut work = WorkingFormula::new(formula)?;
    let radius = rule.radius();
    let mut assignment = vec![false; formula.num_vars()];
    let mut steps = Vec::with_capacity(formula.num_vars());
    for (step, &var) in z.order().iter().enumerate() {
        let nb = work.ball(var, radius);
        let seed = &u.0[var.index()];
        let verdict = rule.decide(&nb, &mut AuxStream::from_seed(seed))?;
        let value = verdict.resolve(seed.threshold);
        let fx = work.assign(var, value);
        assignment[var.index()] = value;
        steps.push(StepRecord {
            step,
            var,
            verdict,
            value,
            satisfied: fx.satisfied,
            violated: fx.violated,
            signed: fx.signed,
            neighborhood: options
                .record_neighborhoods
                .then(|| nb.formula.to_dimacs()),
        });
    }
    Ok(RunTrace {
        rule: rule.name(),
        order: z.order().to_vec(),
        steps,
        assignment,
        violations: work.violations,
    })
}

/// Final assignment and violation count, without the per-step trace.
pub fn run_assignment(
    formula: &Formula,
    rule: &dyn LocalRule,
    z: &Ordering,
    u: &Seeds,
) -> Result<(Vec<bool>, usize)> {
    check_run_inputs(formula, rule, z, u)?;
    let mut work = WorkingFormula::new(formula)?;
    let mut assignment = vec![false; formula.num_vars()];
    for &var in z.order() {
        let nb = work.ball(var, rule.radius());
        let seed = &u.0[var.index()];
        let value = rule
            .decide(&nb, &mut AuxStream::from_seed(seed))?
            .resolve(seed.threshold);
        work.assign(var, value);
        assignment[var.index()] = value;
    }
    Ok((assignment, work.violations))
}

/// Runs only until `target` is decided and returns its value.
pub fn run_until(
    formula: &Formula,
    rule: &dyn LocalRule,
    z: &Ordering,
    u: &Seeds,
    target: Var,
) -> Result<bool> {
    check_run_inputs(formula, rule, z, u)?;
    let mut work = WorkingFormula::new(formula)?;
    for &var in z.order() {
        let nb = work.ball(var, rule.radius());
        let seed = &u.0[var.index()];
        let value = rule
            .decide(&nb, &mut AuxStream::from_seed(seed))?
            .resolve(seed.threshold);
        if var == target {
            return Ok(value);
        }
        work.assign(var, value);
    }
    Err(Error::invalid(format!("{target} not in ordering")))
}

/// Decides the first `prefix` variables of the ordering with `rule`, then
/// returns the radius-`radius` balls of the next `count` variables in the
/// reduced formula. A source of realistic partially decimated neighborhoods.
pub fn reduced_balls(
    formula: &Formula,
    rule: &dyn LocalRule,
    z: &Ordering,
    u: &Seeds,
    prefix: usize,
    count: usize,
    radius: usize,
) -> Result<Vec<Neighborhood>> {
    check_run_inputs(formula, rule, z, u)?;
    if prefix > formula.num_vars() {
        return Err(Error::invalid(format!(
            "prefix {prefix} exceeds n={}",
            formula.num_vars()
        )));
    }
    let mut work = WorkingFormula::new(formula)?;
    for &var in &z.order()[..prefix] {
        let nb = work.ball(var, rule.radius());
        let seed = &u.0[var.index()];
        let value = rule
            .decide(&nb, &mut AuxStream::from_seed(seed))?
            .resolve(seed.threshold);
        work.assign(var, value);
    }
    Ok(z.order()[prefix..]
        .iter()
        .take(count)
        .map(|&v| work.ball(v, radius))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub checked: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// The first neighborhood whose deviation exceeded the tolerance, as text.
    pub witness: Option<String>,
}

impl BalanceReport {
    pub fn is_balanced(&self) -> bool {
        self.witness.is_none()
    }
}

pub const BALANCE_TOLERANCE: f64 = 1e-12;

/// Deviation from balance on one neighborhood.
///
/// For probability verdicts this is `|tau(complement) - (1 - tau)|`. For
/// sampled bits the complement is decided with the mirrored auxiliary
/// stream and the deviation is 0 when the bits are opposite, 1 otherwise.
pub fn balance_deviation(rule: &dyn LocalRule, nb: &Neighborhood, aux_seed: u64) -> Result<f64> {
    let direct = rule.decide(nb, &mut AuxStream::new(aux_seed, false))?;
    let mirrored = rule.decide(&nb.complement(), &mut AuxStream::new(aux_seed, true))?;
    Ok(match (direct, mirrored) {
        (Verdict::Tau(a), Verdict::Tau(b)) => (b - (1.0 - a)).abs(),
        (Verdict::Bit(a), Verdict::Bit(b))
            if a != b => {
                0.0
            }
        _ => 1.0,
    })
}

/// Checks balance on every sampled neighborhood.
pub fn check_balance<'a, I>(rule: &dyn LocalRule, samples: I, aux_seed: u64) -> Result<BalanceReport>
where
    I: IntoIterator<Item = &'a Neighborhood>,
{
    let mut report = BalanceReport {
        checked: 0,
        max_deviation: 0.0,
        tolerance: BALANCE_TOLERANCE,
        witness: None,
    };
    let mut stream = ChaCha8Rng::seed_from_u64(aux_seed);
    for nb in samples {
        let dev = balance_deviation(rule, nb, stream.gen())?;
        report.checked += 1;
        if dev > report.max_deviation {
            report.max_deviation = dev;
        }
        if dev > report.tolerance && report.witness.is_none() {
            report.witness = Some(nb.formula.to_dimacs());
        }
    }
    if report.checked == 0 {
        return Err(Error::invalid("balance check needs at least one sample"));
    }
    Ok(report)
}
