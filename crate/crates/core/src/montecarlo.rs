//! Seeded episode simulation with common random numbers.
//!
//! Episode `i` draws its gains from `SeededStream(master_seed, i)` and every
//! policy in the experiment runs on that same gain sequence. Episodes are
//! simulated in parallel chunks but folded into the statistics strictly in
//! episode order, so a summary depends only on the configuration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, SeededStream};
use crate::error::{Result, SchedError};
use crate::policies::{
    causal_dual_energy, causal_primal_bits, deadline_flush, equal_bit, noncausal_dual,
    noncausal_primal, slot_bits, slot_energy, EnergyState, PolicyKind, PolicySpec, Problem,
    QueueState,
};
use crate::thresholds::{expected_dual_bits, expected_primal_cost, MonomialCost};

const CHUNK: usize = 4096;

/// One realized schedule. Vectors are ordered `t = T, ..., 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub gains: Vec<f64>,
    /// Bits (primal) or energy (dual) spent in each slot.
    pub allocations: Vec<f64>,
    /// Energy (primal) or bits (dual) resulting from each allocation.
    pub per_slot_cost: Vec<f64>,
    pub total: f64,
}

/// Runs `spec` over one gain sequence `g_T..g_1`, spending `budget`.
pub fn run_episode(
    spec: &PolicySpec,
    problem: Problem,
    gains: &[f64],
    budget: f64,
) -> Result<EpisodeTrace> {
    if gains.is_empty() {
        return Err(SchedError::EmptyHorizon);
    }
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(SchedError::InvalidParameter(format!("budget = {budget}")));
    }
    check_problem(spec, problem)?;
    let horizon = gains.len();
    let cost = spec.cost();
    let planned = match spec.kind() {
        PolicyKind::NonCausalPrimal => Some(noncausal_primal(budget, gains, cost)?),
        PolicyKind::NonCausalDual => Some(noncausal_dual(budget, gains, cost)?),
        _ => None,
    };
    let mut remaining = budget;
    let mut allocations = Vec::with_capacity(horizon);
    let mut per_slot_cost = Vec::with_capacity(horizon);
    let mut total = Neumaier::default();
    for (idx, &g) in gains.iter().enumerate() {
        let t = horizon - idx;
        let alloc = if t == 1 {
            remaining
        } else {
            let a = match (spec.kind(), &planned) {
                (_, Some(plan)) => plan[idx],
                (PolicyKind::CausalPrimal, _) => {
                    causal_primal_bits(QueueState { beta: remaining, t }, g, spec)?
                }
                (PolicyKind::CausalDual, _) => {
                    causal_dual_energy(EnergyState { eps: remaining, t }, g, spec)?
                }
                (PolicyKind::EqualBit, _) => equal_bit(QueueState { beta: remaining, t })?,
                (PolicyKind::DeadlineFlush, _) => {
                    deadline_flush(QueueState { beta: remaining, t })?
                }
                (kind, None) => unreachable!("{kind} has a plan"),
            };
            a.clamp(0.0, remaining)
        };
        remaining = (remaining - alloc).max(0.0);
        let c = match problem {
            Problem::Primal => slot_energy(alloc, g, cost)?,
            Problem::Dual => slot_bits(alloc, g, cost)?,
        };
        total.add(c);
        allocations.push(alloc);
        per_slot_cost.push(c);
    }
    Ok(EpisodeTrace {
        gains: gains.to_vec(),
        allocations,
        per_slot_cost,
        total: total.value(),
    })
}

fn check_problem(spec: &PolicySpec, problem: Problem) -> Result<()> {
    match spec.kind().problem() {
        Some(p) if p != problem => Err(SchedError::TableMismatch(format!(
            "{} cannot run a {problem:?} experiment",
            spec.kind()
        ))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub channel: Channel,
    pub cost: MonomialCost,
    pub horizon: usize,
    pub problem: Problem,
    /// Bits `B` (primal) or energy `E` (dual).
    pub budget: f64,
    pub policies: Vec<PolicySpec>,
    pub episodes: usize,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(SchedError::Config("episodes must be >= 1".into()));
        }
        if self.horizon == 0 {
            return Err(SchedError::EmptyHorizon);
        }
        if !(self.budget.is_finite() && self.budget >= 0.0) {
            return Err(SchedError::Config(format!(
                "budget must be nonnegative, got {}",
                self.budget
            )));
        }
        if self.policies.is_empty() {
            return Err(SchedError::Config(
                "experiment needs at least one policy".into(),
            ));
        }
        for spec in &self.policies {
            if spec.cost() != self.cost {
                return Err(SchedError::TableMismatch(format!(
                    "{} uses n = {}, experiment uses n = {}",
                    spec.kind(),
                    spec.cost().n(),
                    self.cost.n()
                )));
            }
            check_problem(spec, self.problem)?;
            spec.check_horizon(self.horizon)?;
        }
        Ok(())
    }
}

/// Compensated (Kahan–Babuška–Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, Copy)]
struct Accumulator {
    count: usize,
    sum: Neumaier,
    mean: f64,
    m2: f64,
    min: f64,
    max: f64,
}

impl Default for Accumulator {
    fn default() -> Self {
        Self {
            count: 0,
            sum: Neumaier::default(),
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum.add(x);
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn mean(&self) -> f64 {
        self.sum.value() / self.count as f64
    }

    fn std_error(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let var = self.m2 / (self.count - 1) as f64;
        (var / self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub mean: f64,
    pub std_error: f64,
    pub min: f64,
    pub max: f64,
    pub episodes: usize,
    /// `B^n xi_T` for the causal primal rule, `(zeta_T E)^(1/n)` for the
    /// causal dual rule.
    pub closed_form_prediction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub problem: Problem,
    pub n: f64,
    pub horizon: usize,
    pub budget: f64,
    pub episodes: usize,
    pub master_seed: u64,
    pub policies: Vec<PolicySummary>,
}

impl McSummary {
    pub fn get(&self, policy: PolicyKind) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == policy.name())
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<McSummary> {
    run_experiment_with(cfg, |_, _| Ok(()))
}

/// Like [`run_experiment`], also handing each episode's totals (one per
/// policy, in config order) to `sink`, in episode order.
pub fn run_experiment_with<F>(cfg: &ExperimentConfig, mut sink: F) -> Result<McSummary>
where
    F: FnMut(usize, &[f64]) -> Result<()>,
{
    cfg.validate()?;
    let mut accs = vec![Accumulator::default(); cfg.policies.len()];
    let mut start = 0;
    while start < cfg.episodes {
        let end = (start + CHUNK).min(cfg.episodes);
        let chunk: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map_init(Vec::new, |gains, i| {
                cfg.channel.sample_into(
                    SeededStream::new(cfg.master_seed, i as u64),
                    cfg.horizon,
                    gains,
                );
                cfg.policies
                    .iter()
                    .map(|spec| {
                        run_episode(spec, cfg.problem, gains, cfg.budget).map(|tr| tr.total)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        for (offset, totals) in chunk.iter().enumerate() {
            for (acc, &x) in accs.iter_mut().zip(totals) {
                acc.push(x);
            }
            sink(start + offset, totals)?;
        }
        start = end;
    }

    let policies = cfg
        .policies
        .iter()
        .zip(&accs)
        .map(|(spec, acc)| PolicySummary {
            policy: spec.kind().name().to_string(),
            mean: acc.mean(),
            std_error: acc.std_error(),
            min: acc.min,
            max: acc.max,
            episodes: acc.count,
            closed_form_prediction: prediction(spec, cfg.budget, cfg.horizon),
        })
        .collect();
    Ok(McSummary {
        problem: cfg.problem,
        n: cfg.cost.n(),
        horizon: cfg.horizon,
        budget: cfg.budget,
        episodes: cfg.episodes,
        master_seed: cfg.master_seed,
        policies,
    })
}

fn prediction(spec: &PolicySpec, budget: f64, horizon: usize) -> Option<f64> {
    let table = spec.table()?;
    match spec.kind() {
        PolicyKind::CausalPrimal => expected_primal_cost(budget, table, horizon).ok(),
        PolicyKind::CausalDual => expected_dual_bits(budget, table, horizon).ok(),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub policy: String,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub better: String,
    pub worse: String,
    pub difference: f64,
    pub combined_std_error: f64,
    /// Means closer than two combined standard errors.
    pub indistinguishable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub entries: Vec<RankEntry>,
    pub pairs: Vec<PairComparison>,
}

/// Orders policies best first (least energy for the primal, most bits for
/// the dual) and compares every pair.
pub fn compare_report(summary: &McSummary) -> Ranking {
    let mut order: Vec<&PolicySummary> = summary.policies.iter().collect();
    order.sort_by(|a, b| match summary.problem {
        Problem::Primal => a.mean.total_cmp(&b.mean),
        Problem::Dual => b.mean.total_cmp(&a.mean),
    });
    let entries = order
        .iter()
        .enumerate()
        .map(|(i, p)| RankEntry {
            rank: i + 1,
            policy: p.policy.clone(),
            mean: p.mean,
            std_error: p.std_error,
        })
        .collect();
    let mut pairs = Vec::new();
    for (i, a) in order.iter().enumerate() {
        for b in &order[i + 1..] {
            let difference = (b.mean - a.mean).abs();
            let combined = (a.std_error * a.std_error + b.std_error * b.std_error).sqrt();
            // relative slack absorbs rounding between mathematically equal means
            let slack = 1e-12 * a.mean.abs().max(b.mean.abs());
            pairs.push(PairComparison {
                better: a.policy.clone(),
                worse: b.policy.clone(),
                difference,
                combined_std_error: combined,
                indistinguishable: difference <= 2.0 * combined + slack,
            });
        }
    }
    Ranking { entries, pairs }
}
