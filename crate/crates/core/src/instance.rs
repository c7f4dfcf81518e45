//! Reduced and non-reduced NAE-K-SAT instances.
//!
//! A clause of width `K` is *neutral* and asks for at least one true and one
//! false literal. Fixing variables shortens clauses and decorates them with a
//! sign: `Plus` once a true literal has been seen (the clause still needs a
//! false one), `Minus` once a false literal has been seen (it still needs a
//! true one). Satisfied and violated clauses are dropped; violations are
//! counted on the formula instead of aborting.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zero-based variable index. Text formats use `index + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Var(pub u32);

impl Var {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0 + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: Var,
    pub negated: bool,
}

impl Literal {
    pub fn new(var: Var, negated: bool) -> Self {
        Literal { var, negated }
    }

    pub fn positive(var: u32) -> Self {
        Literal::new(Var(var), false)
    }

    pub fn negative(var: u32) -> Self {
        Literal::new(Var(var), true)
    }

    /// Truth value of the literal when its variable takes `value`.
    #[inline]
    pub fn eval(self, value: bool) -> bool {
        value != self.negated
    }

    /// Signed one-based integer used by the text format.
    pub fn to_dimacs(self) -> i64 {
        let v = self.var.0 as i64 + 1;
        if self.negated {
            -v
        } else {
            v
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Neutral,
    /// A true literal was already removed; some remaining literal must be false.
    Plus,
    /// A false literal was already removed; some remaining literal must be true.
    Minus,
}

impl Sign {
    pub fn flipped(self) -> Sign {
        match self {
            Sign::Neutral => Sign::Neutral,
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    fn letter(self) -> char {
        match self {
            Sign::Neutral => 'n',
            Sign::Plus => 'p',
            Sign::Minus => 'm',
        }
    }
}

/// Stable clause identifier; survives reductions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClauseId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    pub id: ClauseId,
    pub literals: Vec<Literal>,
    pub sign: Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseStatus {
    Satisfied,
    Violated,
    Undetermined,
}

/// What happened to a clause when one of its variables was fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Fate {
    Kept,
    Satisfied,
    Violated,
}

impl Clause {
    pub fn width(&self) -> usize {
        self.literals.len()
    }

    pub fn contains(&self, var: Var) -> bool {
        self.literals.iter().any(|l| l.var == var)
    }

    pub fn complement(&self) -> Clause {
        Clause {
            id: self.id,
            literals: self.literals.clone(),
            sign: self.sign.flipped(),
        }
    }

    /// Status under a possibly partial assignment.
    pub fn status(&self, assignment: &Assignment) -> Result<ClauseStatus> {
        let (mut has_true, mut has_false, mut unset) = (false, false, 0usize);
        for lit in &self.literals {
            let value = assignment.values.get(lit.var.index()).ok_or_else(|| {
                Error::CorruptInstance(format!(
                    "literal {} outside assignment of length {}",
                    lit.var,
                    assignment.len()
                ))
            })?;
            match value {
                Some(v) if lit.eval(*v) => has_true = true,
                Some(_) => has_false = true,
                None => unset += 1,
            }
        }
        let satisfied = match self.sign {
            Sign::Neutral => has_true && has_false,
            Sign::Plus => has_false,
            Sign::Minus => has_true,
        };
        Ok(if satisfied {
            ClauseStatus::Satisfied
        } else if unset == 0 {
            ClauseStatus::Violated
        } else {
            ClauseStatus::Undetermined
        })
    }

    /// Whether a total assignment (indexed by variable) satisfies the clause.
    #[inline]
    pub fn satisfied_by(&self, bits: &[bool]) -> bool {
        let mut has_true = false;
        let mut has_false = false;
        for lit in &self.literals {
            if lit.eval(bits[lit.var.index()]) {
                has_true = true;
            } else {
                has_false = true;
            }
        }
        match self.sign {
            Sign::Neutral => has_true && has_false,
            Sign::Plus => has_false,
            Sign::Minus => has_true,
        }
    }

    /// Removes `var` from the clause after it has been fixed to `value`.
    pub(crate) fn fix(&mut self, var: Var, value: bool) -> Fate {
        let Some(pos) = self.literals.iter().position(|l| l.var == var) else {
            return Fate::Kept;
        };
        let lit_true = self.literals[pos].eval(value);
        match (self.sign, lit_true) {
            (Sign::Plus, false) | (Sign::Minus, true) => return Fate::Satisfied,
            (Sign::Neutral, true) => self.sign = Sign::Plus,
            (Sign::Neutral, false) => self.sign = Sign::Minus,
            _ => {}
        }
        self.literals.remove(pos);
        if self.literals.is_empty() {
            Fate::Violated
        } else {
            Fate::Kept
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Fresh,
    Reduced,
}

/// Per-variable values in `{0, 1, unset}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: Vec<Option<bool>>,
}

impl Assignment {
    pub fn unset(n: usize) -> Self {
        Assignment {
            values: vec![None; n],
        }
    }

    pub fn total(bits: &[bool]) -> Self {
        Assignment {
            values: bits.iter().map(|&b| Some(b)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_total(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// The bit vector of a total assignment.
    pub fn bits(&self) -> Option<Vec<bool>> {
        self.values.iter().copied().collect()
    }

    pub fn complement(&self) -> Assignment {
        Assignment {
            values: self.values.iter().map(|v| v.map(|b| !b)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub sat: bool,
    /// Positions (in `Formula::clauses`) of violated clauses.
    pub violated: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    num_vars: usize,
    k: usize,
    clauses: Vec<Clause>,
    fixed: Vec<Option<bool>>,
    violations: usize,
}

impl Formula {
    /// Builds a formula, checking every clause invariant against `k`.
    pub fn new(num_vars: usize, k: usize, clauses: Vec<Clause>) -> Result<Self> {
        let formula = Formula {
            num_vars,
            k,
            clauses,
            fixed: vec![None; num_vars],
            violations: 0,
        };
        formula.validate()?;
        Ok(formula)
    }

    /// Convenience constructor for neutral clauses given as signed one-based integers.
    pub fn from_dimacs_clauses(num_vars: usize, k: usize, clauses: &[Vec<i64>]) -> Result<Self> {
        let clauses = clauses
            .iter()
            .enumerate()
            .map(|(i, lits)| {
                let literals = lits
                    .iter()
                    .map(|&l| literal_from_dimacs(l, num_vars))
                    .collect::<Result<Vec<_>>>()?;
                let sign = if literals.len() == k {
                    Sign::Neutral
                } else {
                    return Err(Error::CorruptInstance(format!(
                        "clause {i} has width {} but no sign",
                        literals.len()
                    )));
                };
                Ok(Clause {
                    id: ClauseId(i as u32),
                    literals,
                    sign,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Formula::new(num_vars, k, clauses)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Number of clauses violated (and deleted) by reductions so far.
    pub fn violations(&self) -> usize {
        self.violations
    }

    pub fn fixed(&self) -> &[Option<bool>] {
        &self.fixed
    }

    pub fn origin(&self) -> Origin {
        let reduced = self.violations > 0
            || self.fixed.iter().any(Option::is_some)
            || self.clauses.iter().any(|c| c.sign != Sign::Neutral);
        if reduced {
            Origin::Reduced
        } else {
            Origin::Fresh
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::CorruptInstance(format!(
                "clause width K={} below 2",
                self.k
            )));
        }
        if self.fixed.len() != self.num_vars {
            return Err(Error::CorruptInstance("fixed-value table length".into()));
        }
        for clause in &self.clauses {
            let w = clause.width();
            if w == 0 || w > self.k {
                return Err(Error::CorruptInstance(format!(
                    "clause {:?} has width {w} outside 1..={}",
                    clause.id, self.k
                )));
            }
            if (clause.sign == Sign::Neutral) != (w == self.k) {
                return Err(Error::CorruptInstance(format!(
                    "clause {:?}: sign {:?} inconsistent with width {w}",
                    clause.id, clause.sign
                )));
            }
            for (i, lit) in clause.literals.iter().enumerate() {
                if lit.var.index() >= self.num_vars {
                    return Err(Error::CorruptInstance(format!(
                        "clause {:?} references {} but n={}",
                        clause.id, lit.var, self.num_vars
                    )));
                }
                if self.fixed[lit.var.index()].is_some() {
                    return Err(Error::CorruptInstance(format!(
                        "clause {:?} references fixed variable {}",
                        clause.id, lit.var
                    )));
                }
                if clause.literals[..i].iter().any(|o| o.var == lit.var) {
                    return Err(Error::CorruptInstance(format!(
                        "clause {:?} repeats variable {}",
                        clause.id, lit.var
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn clause_status(&self, index: usize, assignment: &Assignment) -> Result<ClauseStatus> {
        self.clauses[index].status(assignment)
    }

    /// Evaluates every remaining clause under a total assignment.
    pub fn evaluate(&self, assignment: &Assignment) -> Result<Evaluation> {
        if assignment.len() != self.num_vars {
            return Err(Error::invalid(format!(
                "assignment has {} entries, formula has {} variables",
                assignment.len(),
                self.num_vars
            )));
        }
        let bits = assignment
            .bits()
            .ok_or_else(|| Error::invalid("evaluate needs a total assignment"))?;
        Ok(self.evaluate_bits(&bits))
    }

    /// Like [`Formula::evaluate`] for a plain bit vector of length `n`.
    pub fn evaluate_bits(&self, bits: &[bool]) -> Evaluation {
        assert_eq!(bits.len(), self.num_vars, "assignment length");
        let violated: Vec<usize> = self
            .clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.satisfied_by(bits))
            .map(|(i, _)| i)
            .collect();
        Evaluation {
            sat: violated.is_empty(),
            violated,
        }
    }

    pub fn is_satisfied_by(&self, bits: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.satisfied_by(bits))
    }

    /// Same literals, `Plus` and `Minus` exchanged. The record of fixed
    /// values is complemented too, so the result is what reducing the
    /// complemented parent with the complemented values produces.
    pub fn complement(&self) -> Formula {
        Formula {
            num_vars: self.num_vars,
            k: self.k,
            clauses: self.clauses.iter().map(Clause::complement).collect(),
            fixed: self.fixed.iter().map(|v| v.map(|b| !b)).collect(),
            violations: self.violations,
        }
    }

    /// Fixes `var` to `value` and simplifies. Violations are counted, not fatal.
    pub fn reduce(&self, var: Var, value: bool) -> Result<Formula> {
        let mut out = self.clone();
        out.reduce_in_place(var, value)?;
        Ok(out)
    }

    pub(crate) fn reduce_in_place(&mut self, var: Var, value: bool) -> Result<()> {
        let slot = self.fixed.get_mut(var.index()).ok_or_else(|| {
            Error::invalid(format!("{var} out of range for n={}", self.num_vars))
        })?;
        if slot.is_some() {
            return Err(Error::invalid(format!("{var} is already fixed")));
        }
        *slot = Some(value);
        let mut violations = 0;
        self.clauses.retain_mut(|clause| match clause.fix(var, value) {
            Fate::Kept => true,
            Fate::Satisfied => false,
            Fate::Violated => {
                violations += 1;
                false
            }
        });
        self.violations += violations;
        Ok(())
    }

    /// Clause positions incident to each variable.
    pub fn occurrences(&self) -> Vec<Vec<u32>> {
        let mut occ = vec![Vec::new(); self.num_vars];
        for (ci, clause) in self.clauses.iter().enumerate() {
            for lit in &clause.literals {
                occ[lit.var.index()].push(ci as u32);
            }
        }
        occ
    }

    /// The depth-`radius` factor-graph ball around `root` as a rooted sub-instance.
    pub fn neighborhood(&self, root: Var, radius: usize) -> Result<Neighborhood> {
        if !radius.is_multiple_of(2) {
            return Err(Error::invalid(format!("radius {radius} must be even")));
        }
        if root.index() >= self.num_vars {
            return Err(Error::invalid(format!("{root} out of range")));
        }
        let occ = self.occurrences();
        Ok(collect_ball(
            &self.clauses,
            |_| true,
            &occ,
            root,
            radius,
            self.k,
        ))
    }

    /// Variable-to-variable adjacency: two variables are adjacent iff they share a clause.
    pub fn variable_graph(&self) -> Vec<Vec<u32>> {
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); self.num_vars];
        for clause in &self.clauses {
            for a in &clause.literals {
                for b in &clause.literals {
                    if a.var != b.var {
                        adj[a.var.index()].push(b.var.0);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        writeln!(out, "c naesat instance").unwrap();
        if self.violations > 0 {
            writeln!(out, "c violations {}", self.violations).unwrap();
        }
        let fixed: Vec<String> = self
            .fixed
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| format!("{}={}", i + 1, u8::from(b))))
            .collect();
        if !fixed.is_empty() {
            writeln!(out, "c fixed {}", fixed.join(" ")).unwrap();
        }
        let contiguous = self
            .clauses
            .iter()
            .enumerate()
            .all(|(i, c)| c.id.0 as usize == i);
        if !contiguous {
            let ids: Vec<String> = self.clauses.iter().map(|c| c.id.0.to_string()).collect();
            writeln!(out, "c ids {}", ids.join(" ")).unwrap();
        }
        writeln!(
            out,
            "p naesat {} {} {}",
            self.num_vars,
            self.clauses.len(),
            self.k
        )
        .unwrap();
        for clause in &self.clauses {
            out.push(clause.sign.letter());
            for lit in &clause.literals {
                write!(out, " {}", lit.to_dimacs()).unwrap();
            }
            out.push_str(" 0\n");
        }
        out
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dimacs())
    }
}

impl std::str::FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_formula(s)
    }
}

fn literal_from_dimacs(value: i64, num_vars: usize) -> Result<Literal> {
    if value == 0 || value.unsigned_abs() as usize > num_vars {
        return Err(Error::CorruptInstance(format!(
            "literal {value} outside 1..={num_vars}"
        )));
    }
    Ok(Literal::new(
        Var((value.unsigned_abs() - 1) as u32),
        value < 0,
    ))
}

/// Parses the extended-DIMACS text produced by [`Formula::to_dimacs`].
pub fn parse_formula(text: &str) -> Result<Formula> {
    let perr = |line: usize, message: String| Error::Parse { line, message };
    let mut header: Option<(usize, usize, usize, usize)> = None;
    let mut violations = 0usize;
    let mut fixed_pairs: Vec<(usize, usize, bool)> = Vec::new();
    let mut ids: Option<(usize, Vec<u32>)> = None;
    let mut clauses = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('c') {
            if !(rest.is_empty() || rest.starts_with(char::is_whitespace)) {
                return Err(perr(lineno, format!("unknown line `{line}`")));
            }
            let mut words = rest.split_whitespace();
            match words.next() {
                Some("violations") => {
                    violations = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| perr(lineno, "bad violations count".into()))?;
                }
                Some("fixed") => {
                    for pair in words {
                        let (v, b) = pair
                            .split_once('=')
                            .ok_or_else(|| perr(lineno, format!("bad fixed entry `{pair}`")))?;
                        let v: usize = v
                            .parse()
                            .map_err(|_| perr(lineno, format!("bad variable `{v}`")))?;
                        let b = match b {
                            "0" => false,
                            "1" => true,
                            _ => return Err(perr(lineno, format!("bad value `{b}`"))),
                        };
                        fixed_pairs.push((lineno, v, b));
                    }
                }
                Some("ids") => {
                    let list = words
                        .map(|w| w.parse::<u32>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| perr(lineno, format!("bad clause id: {e}")))?;
                    ids = Some((lineno, list));
                }
                _ => {}
            }
            continue;
        }
        let is_header = line.strip_prefix('p').is_some_and(|rest| {
            rest.split_whitespace()
                .next()
                .is_some_and(|w| w.parse::<i64>().is_err())
        });
        if let Some(rest) = line.strip_prefix('p').filter(|_| is_header) {
            if header.is_some() {
                return Err(perr(lineno, "duplicate header".into()));
            }
            let words: Vec<&str> = rest.split_whitespace().collect();
            if words.len() != 4 || words[0] != "naesat" {
                return Err(perr(
                    lineno,
                    format!("expected `p naesat <n> <m> <K>`, got `{line}`"),
                ));
            }
            let num = |w: &str| {
                w.parse::<usize>()
                    .map_err(|_| perr(lineno, format!("bad number `{w}` in header")))
            };
            let (n, m, k) = (num(words[1])?, num(words[2])?, num(words[3])?);
            if k < 2 {
                return Err(perr(lineno, format!("K={k} must be at least 2")));
            }
            header = Some((lineno, n, m, k));
            continue;
        }
        let Some((_, n, _, k)) = header else {
            return Err(perr(lineno, "clause before header".into()));
        };
        let mut words = line.split_whitespace();
        let sign = match words.next() {
            Some("n") => Sign::Neutral,
            Some("p") => Sign::Plus,
            Some("m") => Sign::Minus,
            Some(other) => return Err(perr(lineno, format!("unknown clause sign `{other}`"))),
            None => unreachable!("blank lines are skipped"),
        };
        let mut literals = Vec::new();
        let mut terminated = false;
        for w in words {
            if terminated {
                return Err(perr(lineno, "tokens after terminating 0".into()));
            }
            let value: i64 = w
                .parse()
                .map_err(|_| perr(lineno, format!("bad literal `{w}`")))?;
            if value == 0 {
                terminated = true;
                continue;
            }
            let lit = literal_from_dimacs(value, n).map_err(|e| perr(lineno, e.to_string()))?;
            if literals.iter().any(|l: &Literal| l.var == lit.var) {
                return Err(perr(lineno, format!("variable {} repeated", lit.var)));
            }
            literals.push(lit);
        }
        if !terminated {
            return Err(perr(lineno, "clause line not terminated by 0".into()));
        }
        if literals.is_empty() || literals.len() > k {
            return Err(perr(
                lineno,
                format!("clause width {} outside 1..={k}", literals.len()),
            ));
        }
        if (sign == Sign::Neutral) != (literals.len() == k) {
            return Err(perr(
                lineno,
                format!(
                    "sign `{}` inconsistent with width {} (K={k})",
                    sign.letter(),
                    literals.len()
                ),
            ));
        }
        clauses.push((lineno, Clause {
            id: ClauseId(clauses.len() as u32),
            literals,
            sign,
        }));
    }

    let Some((hline, n, m, k)) = header else {
        return Err(perr(text.lines().count().max(1), "missing header".into()));
    };
    if clauses.len() != m {
        return Err(perr(
            hline,
            format!("header declares {m} clauses, found {}", clauses.len()),
        ));
    }
    let mut fixed = vec![None; n];
    for (lineno, v, b) in fixed_pairs {
        if v == 0 || v > n {
            return Err(perr(lineno, format!("fixed variable {v} outside 1..={n}")));
        }
        fixed[v - 1] = Some(b);
    }
    if let Some((lineno, ids)) = ids {
        if ids.len() != clauses.len() {
            return Err(perr(lineno, "clause id count mismatch".into()));
        }
        for ((_, c), id) in clauses.iter_mut().zip(ids) {
            c.id = ClauseId(id);
        }
    }
    for (lineno, clause) in &clauses {
        if let Some(lit) = clause
            .literals
            .iter()
            .find(|l| fixed[l.var.index()].is_some())
        {
            return Err(perr(*lineno, format!("clause uses fixed variable {}", lit.var)));
        }
    }
    Ok(Formula {
        num_vars: n,
        k,
        clauses: clauses.into_iter().map(|(_, c)| c).collect(),
        fixed,
        violations,
    })
}

/// `floor(d * n)` with a small guard against representation error (`0.29 * 100`).
pub fn clause_count(n: usize, density: f64) -> usize {
    (density * n as f64 + 1e-9).floor() as usize
}

/// Random fresh instance: `floor(d n)` clauses, each on `K` distinct uniform
/// variables with independent fair negations.
///
/// Draw order (each draw a uniform `f64` in `[0, 1)` from the generator's
/// `Standard` distribution): for every clause, variables are drawn by
/// rejection as `floor(u * n)` until `K` distinct ones are collected, then `K`
/// further draws decide negation (`u < 0.5` negates) in slot order.
pub fn generate(n: usize, k: usize, density: f64, seed: u64) -> Result<Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_with(n, k, density, &mut rng)
}

pub fn generate_with<R: RngCore + ?Sized>(
    n: usize,
    k: usize,
    density: f64,
    rng: &mut R,
) -> Result<Formula> {
    if k < 2 || n < k {
        return Err(Error::invalid(format!("need n >= K >= 2, got n={n}, K={k}")));
    }
    if !density.is_finite() || density < 0.0 {
        return Err(Error::invalid(format!("density {density} must be >= 0")));
    }
    let m = clause_count(n, density);
    let mut clauses = Vec::with_capacity(m);
    for j in 0..m {
        let mut vars: Vec<u32> = Vec::with_capacity(k);
        while vars.len() < k {
            let u: f64 = rng.gen();
            let v = ((u * n as f64) as usize).min(n - 1) as u32;
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        let literals = vars
            .into_iter()
            .map(|v| {
                let u: f64 = rng.gen();
                Literal::new(Var(v), u < 0.5)
            })
            .collect();
        clauses.push(Clause {
            id: ClauseId(j as u32),
            literals,
            sign: Sign::Neutral,
        });
    }
    Ok(Formula {
        num_vars: n,
        k,
        clauses,
        fixed: vec![None; n],
        violations: 0,
    })
}

/// Number of coordinates where two total assignments differ.
pub fn hamming(a: &[bool], b: &[bool]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "assignments of different length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// A rooted reduced sub-instance: the depth-`radius` factor-graph ball.
///
/// Local variable `0` is the root; `to_parent[i]` maps local variable `i`
/// back to the formula it was cut from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub root: Var,
    pub radius: usize,
    pub formula: Formula,
    pub to_parent: Vec<Var>,
}

impl Neighborhood {
    /// Wraps an instance whose variable 0 is the root.
    pub fn from_formula(formula: Formula, radius: usize) -> Result<Self> {
        if formula.num_vars() == 0 {
            return Err(Error::invalid("rooted instance needs at least one variable"));
        }
        let to_parent = (0..formula.num_vars() as u32).map(Var).collect();
        Ok(Neighborhood {
            root: Var(0),
            radius,
            formula,
            to_parent,
        })
    }

    pub fn local_root(&self) -> Var {
        Var(0)
    }

    pub fn num_vars(&self) -> usize {
        self.formula.num_vars()
    }

    pub fn complement(&self) -> Neighborhood {
        Neighborhood {
            root: self.root,
            radius: self.radius,
            formula: self.formula.complement(),
            to_parent: self.to_parent.clone(),
        }
    }

    /// True when the ball's factor graph has no cycle.
    pub fn is_tree(&self) -> bool {
        is_forest(&self.formula)
    }
}

/// Whether the factor graph of `formula` is a forest.
pub fn is_forest(formula: &Formula) -> bool {
    // union-find over variables; clause c links its variables as a star
    let mut parent: Vec<u32> = (0..formula.num_vars() as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    for clause in formula.clauses() {
        let first = clause.literals[0].var.0;
        for lit in &clause.literals[1..] {
            let (a, b) = (find(&mut parent, first), find(&mut parent, lit.var.0));
            if a == b {
                return false;
            }
            parent[a as usize] = b;
        }
    }
    true
}

/// Breadth-first ball collection shared by [`Formula::neighborhood`] and the
/// decimation engine's working state.
pub(crate) fn collect_ball(
    clauses: &[Clause],
    live: impl Fn(usize) -> bool,
    occ: &[Vec<u32>],
    root: Var,
    radius: usize,
    k: usize,
) -> Neighborhood {
    let mut local: HashMap<u32, u32> = HashMap::new();
    let mut to_parent = vec![root];
    local.insert(root.0, 0);
    let mut seen_clause: HashMap<u32, ()> = HashMap::new();
    let mut picked: Vec<usize> = Vec::new();
    let mut frontier = vec![root];
    // each iteration walks variable -> clause -> variable, i.e. two factor-graph edges
    for _ in 0..radius / 2 {
        let mut next = Vec::new();
        for v in frontier {
            for &ci in &occ[v.index()] {
                if !live(ci as usize) || seen_clause.contains_key(&ci) {
                    continue;
                }
                let clause = &clauses[ci as usize];
                if !clause.contains(v) {
                    continue;
                }
                seen_clause.insert(ci, ());
                picked.push(ci as usize);
                for lit in &clause.literals {
                    if let std::collections::hash_map::Entry::Vacant(e) = local.entry(lit.var.0) {
                        e.insert(to_parent.len() as u32);
                        to_parent.push(lit.var);
                        next.push(lit.var);
                    }
                }
            }
        }
        frontier = next;
    }
    let sub_clauses = picked
        .into_iter()
        .map(|ci| {
            let c = &clauses[ci];
            Clause {
                id: c.id,
                literals: c
                    .literals
                    .iter()
                    .map(|l| Literal::new(Var(local[&l.var.0]), l.negated))
                    .collect(),
                sign: c.sign,
            }
        })
        .collect();
    let n = to_parent.len();
    Neighborhood {
        root,
        radius,
        formula: Formula {
            num_vars: n,
            k,
            clauses: sub_clauses,
            fixed: vec![None; n],
            violations: 0,
        },
        to_parent,
    }
}
