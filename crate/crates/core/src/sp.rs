//! Survey-propagation guided decimation.
//!
//! Messages live on the edges of a neighborhood's factor graph. Edges are
//! numbered clause by clause, literal by literal, in the order the
//! neighborhood stores them. Every round is synchronous: all new messages are
//! computed from the previous round's values.
//!
//! The subtracted term in the variable-to-clause and field updates is the
//! product of `1 - (Q_S + Q_U)` over the other clauses, i.e. the star update
//! itself. All arithmetic is arranged so that exchanging the S and U roles of
//! every message performs exactly the same floating-point operations, which
//! makes the complement coupling bit-exact.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decimation::{AuxStream, LocalRule, Verdict};
use crate::error::{Error, Result};
use crate::instance::{Neighborhood, Sign};

/// Position of a draw inside an edge's five raw values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    VarS = 0,
    VarU = 1,
    VarStar = 2,
    ClauseS = 3,
    ClauseU = 4,
}

/// Raw uniforms for every edge, before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpInit {
    pub draws: Vec<[f64; 5]>,
}

impl SpInit {
    pub fn draw<R: Rng + ?Sized>(edges: usize, rng: &mut R) -> Self {
        SpInit {
            draws: (0..edges)
                .map(|_| std::array::from_fn(|_| rng.gen::<f64>()))
                .collect(),
        }
    }

    /// Five draws per edge from `aux`; swapped when the stream is mirrored.
    pub fn from_aux(edges: usize, aux: &mut AuxStream) -> Self {
        let init = SpInit {
            draws: (0..edges)
                .map(|_| std::array::from_fn(|_| aux.uniform()))
                .collect(),
        };
        if aux.is_mirrored() {
            swap_init(&init)
        } else {
            init
        }
    }

    pub fn get(&self, edge: usize, role: Role) -> Option<f64> {
        self.draws.get(edge).map(|d| d[role as usize])
    }
}

/// Exchanges the S and U draws on both edge directions.
pub fn swap_init(init: &SpInit) -> SpInit {
    SpInit {
        draws: init
            .draws
            .iter()
            .map(|&[s, u, star, cs, cu]| [u, s, star, cu, cs])
            .collect(),
    }
}

/// Message state after `t` rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpState {
    pub t: usize,
    /// Variable-to-clause `(S, U, *)` per edge.
    pub to_clause: Vec<[f64; 3]>,
    /// Clause-to-variable `(S, U)` per edge.
    pub to_var: Vec<[f64; 2]>,
}

impl SpState {
    /// The state with S and U exchanged on every message.
    pub fn swapped(&self) -> SpState {
        SpState {
            t: self.t,
            to_clause: self.to_clause.iter().map(|&[s, u, x]| [u, s, x]).collect(),
            to_var: self.to_var.iter().map(|&[s, u]| [u, s]).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WFields {
    pub one: f64,
    pub zero: f64,
    pub star: f64,
}

pub fn num_edges(nb: &Neighborhood) -> usize {
    nb.formula.clauses().iter().map(|c| c.width()).sum()
}

/// Start offset of each clause's edges.
fn offsets(nb: &Neighborhood) -> Vec<usize> {
    let mut acc = 0;
    nb.formula
        .clauses()
        .iter()
        .map(|c| {
            let o = acc;
            acc += c.width();
            o
        })
        .collect()
}

/// `(S, U, *)` scaled to sum 1; all zero becomes `(0, 0, 1)`.
fn normalize_triple(s: f64, u: f64, star: f64) -> [f64; 3] {
    let total = (s + u) + star;
    if total > 0.0 {
        [s / total, u / total, star / total]
    } else {
        [0.0, 0.0, 1.0]
    }
}

pub fn sp_init(nb: &Neighborhood, init: &SpInit) -> Result<SpState> {
    let edges = num_edges(nb);
    if init.draws.len() != edges {
        return Err(Error::InvalidInit(format!(
            "{} edge draws for {edges} edges",
            init.draws.len()
        )));
    }
    let mut to_clause = Vec::with_capacity(edges);
    let mut to_var = Vec::with_capacity(edges);
    for (e, d) in init.draws.iter().enumerate() {
        if d.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidInit(format!("edge {e} has a draw outside [0, 1]")));
        }
        to_clause.push(normalize_triple(d[0], d[1], d[2]));
        let pair = d[3] + d[4];
        to_var.push(if pair > 0.0 {
            [d[3] / pair, d[4] / pair]
        } else {
            [0.5, 0.5]
        });
    }
    Ok(SpState {
        t: 0,
        to_clause,
        to_var,
    })
}

/// One synchronous round.
pub fn sp_iterate(state: &SpState, nb: &Neighborhood) -> SpState {
    let clauses = nb.formula.clauses();
    let offset = offsets(nb);
    let occ = nb.formula.occurrences();
    let mut to_var = Vec::with_capacity(state.to_var.len());
    for (ci, c) in clauses.iter().enumerate() {
        for p in 0..c.width() {
            let (mut prod_u, mut prod_s) = (1.0, 1.0);
            for q in (0..c.width()).filter(|&q| q != p) {
                let m = state.to_clause[offset[ci] + q];
                prod_s *= m[0];
                prod_u *= m[1];
            }
            to_var.push(match c.sign {
                Sign::Neutral => [prod_u, prod_s],
                Sign::Plus => [0.0, prod_s],
                Sign::Minus => [prod_u, 0.0],
            });
        }
    }

    let mut to_clause = Vec::with_capacity(state.to_clause.len());
    for (ci, c) in clauses.iter().enumerate() {
        for lit in &c.literals {
            let x = lit.var.index();
            let (mut acc_s, mut acc_u, mut star) = (1.0, 1.0, 1.0);
            for &d in &occ[x] {
                let d = d as usize;
                if d == ci {
                    continue;
                }
                let other = &clauses[d];
                let pos = other
                    .literals
                    .iter()
                    .position(|l| l.var.index() == x)
                    .expect("occurrence lists match clauses");
                let [qs, qu] = state.to_var[offset[d] + pos];
                if other.literals[pos].negated != lit.negated {
                    acc_s *= 1.0 - qs;
                    acc_u *= 1.0 - qu;
                } else {
                    acc_s *= 1.0 - qu;
                    acc_u *= 1.0 - qs;
                }
                star *= 1.0 - (qs + qu);
            }
            let r_s = (acc_s - star).max(0.0);
            let r_u = (acc_u - star).max(0.0);
            to_clause.push(normalize_triple(r_s, r_u, star.max(0.0)));
        }
    }
    SpState {
        t: state.t + 1,
        to_clause,
        to_var,
    }
}

/// Fields of the root.
pub fn sp_fields(state: &SpState, nb: &Neighborhood) -> WFields {
    let root = nb.local_root();
    let clauses = nb.formula.clauses();
    let offset = offsets(nb);
    let (mut acc1, mut acc0, mut star) = (1.0, 1.0, 1.0);
    for (ci, c) in clauses.iter().enumerate() {
        let Some(pos) = c.literals.iter().position(|l| l.var == root) else {
            continue;
        };
        let [qs, qu] = state.to_var[offset[ci] + pos];
        if c.literals[pos].negated {
            acc1 *= 1.0 - qs;
            acc0 *= 1.0 - qu;
        } else {
            acc1 *= 1.0 - qu;
            acc0 *= 1.0 - qs;
        }
        star *= 1.0 - (qs + qu);
    }
    let [one, zero, star] =
        normalize_triple((acc1 - star).max(0.0), (acc0 - star).max(0.0), star.max(0.0));
    WFields { one, zero, star }
}

/// `rounds` rounds from `init`; returns the states at `t = 0..=rounds`.
pub fn sp_trajectory(nb: &Neighborhood, init: &SpInit, rounds: usize) -> Result<Vec<SpState>> {
    let mut states = vec![sp_init(nb, init)?];
    for _ in 0..rounds {
        let next = sp_iterate(states.last().unwrap(), nb);
        states.push(next);
    }
    Ok(states)
}

/// Fields of the root after `rounds` rounds from `init`.
pub fn sp_run(nb: &Neighborhood, init: &SpInit, rounds: usize) -> Result<WFields> {
    let mut state = sp_init(nb, init)?;
    for _ in 0..rounds {
        state = sp_iterate(&state, nb);
    }
    Ok(sp_fields(&state, nb))
}

/// Writes the trajectory as a JSON array of states.
pub fn write_trajectory<W: std::io::Write>(states: &[SpState], out: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, states)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpMode {
    /// One initialization; the decision is the comparison itself.
    Sample,
    /// Fraction of `samples` initializations with `W(1) > W(0)`, ties counting half.
    Estimate { samples: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct SpRule {
    pub rounds: usize,
    pub mode: SpMode,
}

impl SpRule {
    pub fn new(rounds: usize, mode: SpMode) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::invalid("SP needs at least one round"));
        }
        if let SpMode::Estimate { samples: 0 } = mode {
            return Err(Error::invalid("SP estimate mode needs at least one sample"));
        }
        Ok(SpRule { rounds, mode })
    }
}

impl LocalRule for SpRule {
    fn name(&self) -> String {
        match self.mode {
            SpMode::Sample => format!("sp(t={})", self.rounds),
            SpMode::Estimate { samples } => format!("sp(t={},s={samples})", self.rounds),
        }
    }

    fn radius(&self) -> usize {
        2 * self.rounds
    }

    fn decide(&self, nb: &Neighborhood, aux: &mut AuxStream) -> Result<Verdict> {
        let edges = num_edges(nb);
        match self.mode {
            SpMode::Sample => {
                let w = sp_run(nb, &SpInit::from_aux(edges, aux), self.rounds)?;
                Ok(Verdict::Bit(if w.one == w.zero {
                    aux.coin()
                } else {
                    w.one > w.zero
                }))
            }
            SpMode::Estimate { samples } => {
                let mut halves = 0usize;
                for _ in 0..samples {
                    let w = sp_run(nb, &SpInit::from_aux(edges, aux), self.rounds)?;
                    halves += if w.one > w.zero {
                        2
                    } else if w.one == w.zero {
                        1
                    } else {
                        0
                    };
                }
                Ok(Verdict::Tau(halves as f64 / (2 * samples) as f64))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Clause, ClauseId, Formula, Literal};

    fn ball(clauses: Vec<Clause>, n: usize) -> Neighborhood {
        Neighborhood::from_formula(Formula::new(n, 3, clauses).unwrap(), 2).unwrap()
    }

    fn clause(id: u32, lits: &[i64], sign: Sign) -> Clause {
        Clause {
            id: ClauseId(id),
            literals: lits
                .iter()
                .map(|&l| {
                    if l > 0 {
                        Literal::positive(l as u32 - 1)
                    } else {
                        Literal::negative((-l) as u32 - 1)
                    }
                })
                .collect(),
            sign,
        }
    }

    #[test]
    fn init_normalizes() {
        let nb = ball(vec![clause(0, &[1], Sign::Minus)], 1);
        let s = sp_init(
            &nb,
            &SpInit {
                draws: vec![[0.2, 0.2, 0.6, 0.3, 0.1]],
            },
        )
        .unwrap();
        assert!((s.to_clause[0][0] - 0.2).abs() < 1e-15);
        assert!((s.to_clause[0][2] - 0.6).abs() < 1e-15);
        assert!((s.to_var[0][0] - 0.75).abs() < 1e-15);
        assert!((s.to_var[0][1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn init_rejects_wrong_size_and_range() {
        let nb = ball(vec![clause(0, &[1, 2], Sign::Plus)], 2);
        assert!(matches!(
            sp_init(&nb, &SpInit { draws: vec![[0.5; 5]] }),
            Err(Error::InvalidInit(_))
        ));
        assert!(matches!(
            sp_init(
                &nb,
                &SpInit {
                    draws: vec![[0.5; 5], [0.5, 1.5, 0.5, 0.5, 0.5]]
                }
            ),
            Err(Error::InvalidInit(_))
        ));
    }

    #[test]
    fn zero_inputs_and_lonely_variables() {
        let nb = ball(vec![clause(0, &[1, 2, 3], Sign::Neutral)], 3);
        // every incoming U is zero
        let init = SpInit {
            draws: vec![[0.5, 0.0, 0.5, 0.5, 0.5]; 3],
        };
        let next = sp_iterate(&sp_init(&nb, &init).unwrap(), &nb);
        assert_eq!(next.to_var[0][0], 0.0);
        // each variable sits in one clause only
        for m in &next.to_clause {
            assert_eq!(*m, [0.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn isolated_root_has_star_field() {
        let nb = ball(vec![], 1);
        let w = sp_run(&nb, &SpInit { draws: vec![] }, 3).unwrap();
        assert_eq!(w, WFields { one: 0.0, zero: 0.0, star: 1.0 });
    }

    #[test]
    fn swap_is_an_involution() {
        let mut rng = rand::thread_rng();
        let init = SpInit::draw(7, &mut rng);
        assert_eq!(swap_init(&swap_init(&init)), init);
        for (a, b) in init.draws.iter().zip(&swap_init(&init).draws) {
            assert_eq!(a[Role::VarStar as usize], b[Role::VarStar as usize]);
        }
    }

    #[test]
    fn minus_unit_pushes_root_to_one() {
        let nb = ball(vec![clause(0, &[1], Sign::Minus)], 1);
        let w = sp_run(
            &nb,
            &SpInit {
                draws: vec![[0.3, 0.3, 0.3, 0.3, 0.3]],
            },
            1,
        )
        .unwrap();
        // empty product forces S=1, U=0
        assert_eq!(w, WFields { one: 1.0, zero: 0.0, star: 0.0 });
    }

    #[test]
    fn rule_validates_parameters() {
        assert!(SpRule::new(0, SpMode::Sample).is_err());
        assert!(SpRule::new(1, SpMode::Estimate { samples: 0 }).is_err());
        assert_eq!(SpRule::new(3, SpMode::Sample).unwrap().radius(), 6);
    }
}
