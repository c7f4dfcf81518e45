//! Success-probability experiments.
//!
//! Trial `i` draws its formula from stream `phi/i`, its ordering weights from
//! `z/i`, its thresholds from `u/i` and the private stream of variable `x`
//! from the seed of `spinit/i/x`. The same master seed therefore reuses the
//! ordering and thresholds across densities, and the formula at a higher
//! density extends the one at a lower density.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::BpRule;
use crate::decimation::{run_assignment, LocalRule, Ordering, Seed, Seeds, UnitClauseRule};
use crate::error::{Error, Result};
use crate::instance::{generate_with, Formula};
use crate::overlap::is_satisfiable;
use crate::rng::Streams;
use crate::sp::{SpMode, SpRule};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "NAESAT_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Uc,
    Bp,
    Sp,
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uc" => Ok(Algorithm::Uc),
            "bp" => Ok(Algorithm::Bp),
            "sp" => Ok(Algorithm::Sp),
            other => Err(Error::invalid(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    pub n: usize,
    pub densities: Vec<f64>,
    /// BP reads radius `2 t`; SP runs `t` rounds on radius `2 t`. Ignored by UC.
    pub rounds: usize,
    pub trials: usize,
    pub seed: u64,
    pub sp_mode: SpMode,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.n < self.k {
            return Err(Error::invalid(format!(
                "need n >= K >= 2, got n={}, K={}",
                self.n, self.k
            )));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be positive"));
        }
        if self.densities.is_empty() {
            return Err(Error::invalid("density grid is empty"));
        }
        if let Some(d) = self.densities.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
            return Err(Error::invalid(format!("density {d} must be finite and >= 0")));
        }
        if self.algorithm != Algorithm::Uc && self.rounds == 0 {
            return Err(Error::invalid("rounds must be positive for bp and sp"));
        }
        Ok(())
    }

    pub fn rule(&self) -> Result<Box<dyn LocalRule>> {
        Ok(match self.algorithm {
            Algorithm::Uc => Box::new(UnitClauseRule),
            Algorithm::Bp => Box::new(BpRule::new(2 * self.rounds)?),
            Algorithm::Sp => Box::new(SpRule::new(self.rounds, self.sp_mode)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub rule: String,
    pub k: usize,
    pub n: usize,
    pub density: f64,
    pub trials: usize,
    pub successes: usize,
    pub alpha: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_violations: f64,
    pub max_violations: usize,
    pub seed: u64,
    /// Not serialized, so repeated runs produce identical files.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// The formula, ordering and seeds of trial `i`.
pub fn trial_inputs(streams: &Streams, i: usize, n: usize, k: usize, d: f64) -> Result<(Formula, Ordering, Seeds)> {
    let formula = generate_with(n, k, d, &mut streams.stream(&format!("phi/{i}")))?;
    let z = Ordering::draw(n, &mut streams.stream(&format!("z/{i}")))?;
    let mut u_stream = streams.stream(&format!("u/{i}"));
    let u = Seeds(
        (0..n)
            .map(|x| Seed {
                threshold: rand::Rng::gen(&mut u_stream),
                aux: streams.seed(&format!("spinit/{i}/{x}")),
                mirrored: false,
            })
            .collect(),
    );
    Ok((formula, z, u))
}

/// Success rate of `rule` at one density.
pub fn estimate_alpha_with(
    rule: &dyn LocalRule,
    n: usize,
    k: usize,
    density: f64,
    trials: usize,
    seed: u64,
) -> Result<ResultRecord> {
    let mut record = estimate_alpha_on(rule, trials, seed, |streams, i| {
        trial_inputs(streams, i, n, k, density)
    })?;
    record.density = density;
    Ok(record)
}

/// Success rate of `rule` over trials whose inputs come from `inputs`.
pub fn estimate_alpha_on<F>(rule: &dyn LocalRule, trials: usize, seed: u64, inputs: F) -> Result<ResultRecord>
where
    F: Fn(&Streams, usize) -> Result<(Formula, Ordering, Seeds)> + Sync,
{
    let start = Instant::now();
    let streams = Streams::new(seed);
    let outcomes: Vec<(bool, usize, usize, usize, f64)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let (formula, z, u) = inputs(&streams, i)?;
            let (assignment, violations) = run_assignment(&formula, rule, &z, &u)?;
            let density = formula.num_clauses() as f64 / formula.num_vars() as f64;
            // judged on the original formula, not on the run's bookkeeping
            let ok = violations == 0 && formula.is_satisfied_by(&assignment);
            Ok((ok, violations, formula.num_vars(), formula.k(), density))
        })
        .collect::<Result<_>>()?;
    let successes = outcomes.iter().filter(|o| o.0).count();
    let (ci_low, ci_high) = wilson_interval(successes, trials);
    let first = outcomes.first();
    Ok(ResultRecord {
        rule: rule.name(),
        k: first.map_or(0, |o| o.3),
        n: first.map_or(0, |o| o.2),
        density: first.map_or(0.0, |o| o.4),
        trials,
        successes,
        alpha: successes as f64 / trials as f64,
        ci_low,
        ci_high,
        mean_violations: outcomes.iter().map(|o| o.1).sum::<usize>() as f64 / trials as f64,
        max_violations: outcomes.iter().map(|o| o.1).max().unwrap_or(0),
        seed,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Success rate at the first density of the grid.
pub fn estimate_alpha(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    let rule = config.rule()?;
    estimate_alpha_with(
        rule.as_ref(),
        config.n,
        config.k,
        config.densities[0],
        config.trials,
        config.seed,
    )
}

/// One record per grid density, in grid order.
pub fn density_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    config.validate()?;
    let rule = config.rule()?;
    config
        .densities
        .iter()
        .map(|&d| estimate_alpha_with(rule.as_ref(), config.n, config.k, d, config.trials, config.seed))
        .collect()
}

/// Least-squares non-increasing fit by pooling adjacent violators.
pub fn isotonic_decreasing(values: &[f64]) -> Vec<f64> {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 >= s2 / c2 as f64 {
                break;
            }
            blocks.pop();
            *blocks.last_mut().unwrap() = (s1 + s2, c1 + c2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, c)| std::iter::repeat_n(s / c as f64, c))
        .collect()
}

pub fn write_records_csv<W: Write>(records: &[ResultRecord], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "rule,k,n,density,trials,successes,alpha,ci_low,ci_high,mean_violations,max_violations,seed"
    )?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.rule,
            r.k,
            r.n,
            r.density,
            r.trials,
            r.successes,
            r.alpha,
            r.ci_low,
            r.ci_high,
            r.mean_violations,
            r.max_violations,
            r.seed
        )?;
    }
    Ok(())
}

pub fn write_records_json<W: Write>(records: &[ResultRecord], out: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SatRecord {
    pub n: usize,
    pub k: usize,
    pub density: f64,
    pub instances: usize,
    pub satisfiable: usize,
    pub fraction: f64,
}

/// Fraction of satisfiable random instances, decided exhaustively.
pub fn sat_probability(n: usize, k: usize, density: f64, instances: usize, seed: u64) -> Result<SatRecord> {
    let streams = Streams::new(seed);
    let sat: Vec<bool> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let f = generate_with(n, k, density, &mut streams.stream(&format!("phi/{i}")))?;
            is_satisfiable(&f)
        })
        .collect::<Result<_>>()?;
    let satisfiable = sat.iter().filter(|&&s| s).count();
    Ok(SatRecord {
        n,
        k,
        density,
        instances,
        satisfiable,
        fraction: satisfiable as f64 / instances.max(1) as f64,
    })
}

/// `2^(K-1) ln 2 - ln 2 / 2 - 1/4`, the large-K satisfiability threshold without its vanishing correction.
pub fn asymptotic_threshold(k: usize) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    2f64.powi(k as i32 - 1) * ln2 - ln2 / 2.0 - 0.25
}

/// Builds the global worker pool, honoring [`THREADS_ENV`]. Later calls are no-ops.
pub fn init_thread_pool() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Error::invalid(format!("{THREADS_ENV}={value:?} is not a positive integer")))?;
    // an already-built pool is fine
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decimation::ConstantRule;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wilson_covers_at_nominal_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = 0.3;
        let mut covered = 0;
        for _ in 0..1000 {
            let s = (0..100).filter(|_| rng.gen::<f64>() < p).count();
            let (lo, hi) = wilson_interval(s, 100);
            covered += usize::from(lo <= p && p <= hi);
        }
        assert!(covered >= 930, "coverage {covered}/1000");
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
        let (lo, hi) = wilson_interval(10, 10);
        assert!(lo > 0.7 && hi > 0.999);
    }

    #[test]
    fn no_clauses_always_succeeds() {
        let r = estimate_alpha_with(&UnitClauseRule, 50, 3, 0.0, 20, 1).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert_eq!(r.successes, 20);
    }

    #[test]
    fn all_ones_fails_with_positive_clause() {
        let rule = ConstantRule { tau: 1.0, radius: 2 };
        let r = estimate_alpha_on(&rule, 20, 1, |streams, i| {
            let (mut f, z, u) = trial_inputs(streams, i, 30, 3, 1.0)?;
            let mut clauses = f.clauses().to_vec();
            clauses.push(crate::instance::Clause {
                id: crate::instance::ClauseId(clauses.len() as u32),
                literals: (0..3).map(crate::instance::Literal::positive).collect(),
                sign: crate::instance::Sign::Neutral,
            });
            f = Formula::new(30, 3, clauses)?;
            Ok((f, z, u))
        })
        .unwrap();
        assert_eq!(r.alpha, 0.0);
        assert!(r.mean_violations >= 1.0);
        assert_eq!((r.n, r.k), (30, 3));
    }

    #[test]
    fn isotonic_pools_violators() {
        let fit = isotonic_decreasing(&[1.0, 0.8, 0.9, 0.1]);
        for (a, b) in fit.iter().zip([1.0, 0.85, 0.85, 0.1]) {
            assert!((a - b).abs() < 1e-12);
        }
        let fit = isotonic_decreasing(&[0.2, 0.4]);
        assert!(fit.iter().all(|v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn config_validation_and_rules() {
        let mut c = ExperimentConfig {
            algorithm: Algorithm::Bp,
            k: 3,
            n: 50,
            densities: vec![1.0],
            rounds: 1,
            trials: 4,
            seed: 0,
            sp_mode: SpMode::Sample,
        };
        assert_eq!(c.rule().unwrap().radius(), 2);
        c.rounds = 0;
        assert!(c.validate().is_err());
        c.algorithm = Algorithm::Uc;
        assert!(c.validate().is_ok());
        c.densities = vec![-1.0];
        assert!(c.validate().is_err());
        assert!("xx".parse::<Algorithm>().is_err());
        assert_eq!("sp".parse::<Algorithm>().unwrap(), Algorithm::Sp);
    }

    #[test]
    fn threshold_formula_at_k3() {
        assert!((asymptotic_threshold(3) - 2.1760).abs() < 1e-3);
    }
}
