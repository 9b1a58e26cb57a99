//! Scheduling policies.
//!
//! Slots are indexed by the number of slots remaining: `t = T` is the first
//! slot and `t = 1` the deadline. Gain vectors are ordered the same way,
//! `gains[0]` being the gain of slot `T`.
//!
//! The causal primal rule splits the queue `beta` between now and later in the
//! ratio `g^(1/(n-1)) : eta_t`; the causal dual rule does the same for the
//! remaining energy with `zeta_{t-1}^(1/(n-1))` as the deferral weight. Both
//! flush everything at `t = 1` since the deadline admits no outage.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SchedError};
use crate::thresholds::{MonomialCost, TableKind, ThresholdTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    CausalPrimal,
    CausalDual,
    NonCausalPrimal,
    NonCausalDual,
    /// `beta_t / t` every slot; the large-`n` limit of the causal rule.
    EqualBit,
    /// Nothing until the deadline, then everything.
    DeadlineFlush,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::CausalPrimal => "causal_primal",
            PolicyKind::CausalDual => "causal_dual",
            PolicyKind::NonCausalPrimal => "non_causal_primal",
            PolicyKind::NonCausalDual => "non_causal_dual",
            PolicyKind::EqualBit => "equal_bit",
            PolicyKind::DeadlineFlush => "deadline_flush",
        }
    }

    /// The problem this policy is defined for; `None` for the baselines,
    /// which split whatever budget they are given.
    pub fn problem(self) -> Option<Problem> {
        match self {
            PolicyKind::CausalPrimal | PolicyKind::NonCausalPrimal => Some(Problem::Primal),
            PolicyKind::CausalDual | PolicyKind::NonCausalDual => Some(Problem::Dual),
            PolicyKind::EqualBit | PolicyKind::DeadlineFlush => None,
        }
    }

    pub fn table_kind(self) -> Option<TableKind> {
        match self {
            PolicyKind::CausalPrimal => Some(TableKind::PrimalXi),
            PolicyKind::CausalDual => Some(TableKind::DualZeta),
            _ => None,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Primal: deliver a bit budget at least energy. Dual: deliver the most bits
/// from an energy budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    #[default]
    Primal,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueState {
    pub beta: f64,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyState {
    pub eps: f64,
    pub t: usize,
}

fn check_amount(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(SchedError::InvalidParameter(format!(
            "{what} must be finite and nonnegative, got {x}"
        )))
    }
}

fn check_slot(t: usize) -> Result<()> {
    if t == 0 {
        Err(SchedError::InvalidParameter(
            "slots remaining must be >= 1".into(),
        ))
    } else {
        Ok(())
    }
}

fn check_gain(g: f64) -> Result<()> {
    if g.is_finite() && g > 0.0 {
        Ok(())
    } else {
        Err(SchedError::NonPositiveGain(g))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySpec {
    kind: PolicyKind,
    cost: MonomialCost,
    table: Option<Arc<ThresholdTable>>,
}

impl PolicySpec {
    pub fn new(
        kind: PolicyKind,
        cost: MonomialCost,
        table: Option<Arc<ThresholdTable>>,
    ) -> Result<Self> {
        match (kind.table_kind(), &table) {
            (Some(want), Some(tab)) => {
                if tab.kind != want {
                    return Err(SchedError::TableMismatch(format!(
                        "{kind} needs a {want:?} table, got {:?}",
                        tab.kind
                    )));
                }
                if tab.n != cost.n() {
                    return Err(SchedError::TableMismatch(format!(
                        "{kind} uses n = {}, table was built for n = {}",
                        cost.n(),
                        tab.n
                    )));
                }
            }
            (Some(want), None) => {
                return Err(SchedError::TableMismatch(format!(
                    "{kind} needs a {want:?} table"
                )))
            }
            (None, Some(_)) => {
                return Err(SchedError::TableMismatch(format!(
                    "{kind} takes no threshold table"
                )))
            }
            (None, None) => {}
        }
        Ok(Self { kind, cost, table })
    }

    pub fn baseline(kind: PolicyKind, cost: MonomialCost) -> Result<Self> {
        Self::new(kind, cost, None)
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn cost(&self) -> MonomialCost {
        self.cost
    }

    pub fn table(&self) -> Option<&ThresholdTable> {
        self.table.as_deref()
    }

    /// Checks that the spec can run a `horizon`-slot episode.
    pub fn check_horizon(&self, horizon: usize) -> Result<()> {
        if horizon == 0 {
            return Err(SchedError::EmptyHorizon);
        }
        match self.table() {
            Some(tab) if tab.horizon < horizon.saturating_sub(1) => {
                Err(SchedError::TableMismatch(format!(
                    "{} table covers t <= {}, episode needs t <= {}",
                    self.kind,
                    tab.horizon,
                    horizon - 1
                )))
            }
            _ => Ok(()),
        }
    }

    fn eta(&self, t: usize, want: PolicyKind) -> Result<f64> {
        if self.kind != want {
            return Err(SchedError::TableMismatch(format!(
                "{want} called with a {} spec",
                self.kind
            )));
        }
        let tab = self
            .table()
            .ok_or_else(|| SchedError::TableMismatch(format!("{want} spec has no table")))?;
        if t - 1 > tab.horizon {
            return Err(SchedError::TableMismatch(format!(
                "slot {t} needs the table at t = {}, table horizon is {}",
                t - 1,
                tab.horizon
            )));
        }
        tab.eta(t)
    }
}

/// `b^n / g`
pub fn slot_energy(b: f64, g: f64, cost: MonomialCost) -> Result<f64> {
    check_gain(g)?;
    check_amount(b, "bits")?;
    if b == 0.0 {
        return Ok(0.0);
    }
    Ok(b.powf(cost.n()) / g)
}

/// `(g e)^(1/n)`, the inverse of [`slot_energy`].
pub fn slot_bits(e: f64, g: f64, cost: MonomialCost) -> Result<f64> {
    check_gain(g)?;
    check_amount(e, "energy")?;
    if e == 0.0 {
        return Ok(0.0);
    }
    Ok((g * e).powf(1.0 / cost.n()))
}

/// `num * w / (w + eta)` clamped to `[0, num]`.
fn split(num: f64, w: f64, eta: f64) -> f64 {
    if num == 0.0 {
        return 0.0;
    }
    (num * (w / (w + eta))).clamp(0.0, num)
}

/// Optimal causal bit allocation for the energy minimization problem.
pub fn causal_primal_bits(state: QueueState, g: f64, spec: &PolicySpec) -> Result<f64> {
    check_amount(state.beta, "queue")?;
    check_slot(state.t)?;
    check_gain(g)?;
    if state.t == 1 {
        if spec.kind != PolicyKind::CausalPrimal {
            return Err(SchedError::TableMismatch(format!(
                "causal_primal called with a {} spec",
                spec.kind
            )));
        }
        return Ok(state.beta);
    }
    let eta = spec.eta(state.t, PolicyKind::CausalPrimal)?;
    Ok(split(state.beta, spec.cost.root(g), eta))
}

/// Optimal causal energy allocation for the rate maximization problem.
pub fn causal_dual_energy(state: EnergyState, g: f64, spec: &PolicySpec) -> Result<f64> {
    check_amount(state.eps, "energy")?;
    check_slot(state.t)?;
    check_gain(g)?;
    if state.t == 1 {
        if spec.kind != PolicyKind::CausalDual {
            return Err(SchedError::TableMismatch(format!(
                "causal_dual called with a {} spec",
                spec.kind
            )));
        }
        return Ok(state.eps);
    }
    let weight = spec.eta(state.t, PolicyKind::CausalDual)?;
    Ok(split(state.eps, spec.cost.root(g), weight))
}

/// Budget split in proportion to `g^(1/(n-1))`, renormalized so the parts
/// sum to `budget`.
fn proportional(budget: f64, gains: &[f64], cost: MonomialCost) -> Result<Vec<f64>> {
    check_amount(budget, "budget")?;
    if gains.is_empty() {
        return Err(SchedError::EmptyHorizon);
    }
    for &g in gains {
        check_gain(g)?;
    }
    // scale by the largest log-weight so huge exponents cannot overflow
    let logs: Vec<f64> = gains.iter().map(|g| g.ln() / cost.m()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut out: Vec<f64> = weights.iter().map(|w| budget * (w / total)).collect();
    let residual = budget - out.iter().sum::<f64>();
    if residual != 0.0 {
        // park the rounding residual on the largest share, where it is
        // relatively smallest
        let (imax, _) = out
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
        out[imax] = (out[imax] + residual).max(0.0);
    }
    Ok(out)
}

/// Optimal bit allocation when all gains `g_T..g_1` are known up front.
pub fn noncausal_primal(bits: f64, gains: &[f64], cost: MonomialCost) -> Result<Vec<f64>> {
    proportional(bits, gains, cost)
}

/// Optimal energy allocation when all gains are known up front. Same
/// proportions as [`noncausal_primal`].
pub fn noncausal_dual(energy: f64, gains: &[f64], cost: MonomialCost) -> Result<Vec<f64>> {
    proportional(energy, gains, cost)
}

pub fn equal_bit(state: QueueState) -> Result<f64> {
    check_amount(state.beta, "queue")?;
    check_slot(state.t)?;
    Ok(state.beta / state.t as f64)
}

pub fn deadline_flush(state: QueueState) -> Result<f64> {
    check_amount(state.beta, "queue")?;
    check_slot(state.t)?;
    Ok(if state.t == 1 { state.beta } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FadingModel;
    use crate::quadrature::QuadratureConfig;
    use crate::thresholds::{xi_table, zeta_table};

    fn cost(n: f64) -> MonomialCost {
        MonomialCost::new(n).unwrap()
    }

    fn two_atom_spec(kind: PolicyKind, n: f64, horizon: usize) -> PolicySpec {
        let ch = FadingModel::Discrete {
            atoms: vec![(1.0, 0.5), (4.0, 0.5)],
        }
        .validate()
        .unwrap();
        let cfg = QuadratureConfig::default();
        let tab = match kind {
            PolicyKind::CausalPrimal => xi_table(&ch, cost(n), horizon, &cfg).unwrap(),
            _ => zeta_table(&ch, cost(n), horizon, &cfg).unwrap(),
        };
        PolicySpec::new(kind, cost(n), Some(Arc::new(tab))).unwrap()
    }

    fn det_spec(kind: PolicyKind, c: f64, n: f64, horizon: usize) -> PolicySpec {
        let ch = FadingModel::Deterministic { c }.validate().unwrap();
        let cfg = QuadratureConfig::default();
        let tab = match kind {
            PolicyKind::CausalPrimal => xi_table(&ch, cost(n), horizon, &cfg).unwrap(),
            _ => zeta_table(&ch, cost(n), horizon, &cfg).unwrap(),
        };
        PolicySpec::new(kind, cost(n), Some(Arc::new(tab))).unwrap()
    }

    #[test]
    fn slot_cost_examples() {
        assert_eq!(slot_energy(0.0, 3.0, cost(2.0)).unwrap(), 0.0);
        assert_eq!(slot_energy(2.0, 4.0, cost(2.0)).unwrap(), 1.0);
        assert!((slot_energy(2.0, 1.0, cost(2.67)).unwrap() - 6.364_291_870_039_349).abs() < 1e-12);
        assert_eq!(slot_bits(0.0, 3.0, cost(2.0)).unwrap(), 0.0);
        assert_eq!(slot_bits(1.0, 4.0, cost(2.0)).unwrap(), 2.0);
        assert!(matches!(
            slot_energy(1.0, 0.0, cost(2.0)),
            Err(SchedError::NonPositiveGain(_))
        ));
        assert!(matches!(
            slot_bits(1.0, -1.0, cost(2.0)),
            Err(SchedError::NonPositiveGain(_))
        ));
    }

    #[test]
    fn slot_cost_round_trip() {
        for n in [1.5, 2.0, 2.67, 7.0] {
            for b in [0.1, 1.0, 10.0] {
                for g in [0.01, 1.0, 30.0] {
                    let e = slot_energy(b, g, cost(n)).unwrap();
                    let back = slot_bits(e, g, cost(n)).unwrap();
                    assert!((back - b).abs() <= 1e-12 * b, "n={n} b={b} g={g}");
                }
            }
        }
    }

    #[test]
    fn causal_primal_examples() {
        let spec = two_atom_spec(PolicyKind::CausalPrimal, 2.0, 4);
        let flush = causal_primal_bits(QueueState { beta: 7.0, t: 1 }, 0.01, &spec).unwrap();
        assert_eq!(flush, 7.0);
        let b = causal_primal_bits(QueueState { beta: 10.0, t: 2 }, 1.0, &spec).unwrap();
        assert!((b - 10.0 / 2.6).abs() < 1e-12);

        let det = det_spec(PolicyKind::CausalPrimal, 2.5, 2.67, 8);
        for t in 1..=8 {
            let b = causal_primal_bits(QueueState { beta: 3.0, t }, 2.5, &det).unwrap();
            assert!((b - 3.0 / t as f64).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn causal_dual_examples() {
        let det = det_spec(PolicyKind::CausalDual, 1.0, 2.0, 4);
        assert_eq!(
            causal_dual_energy(EnergyState { eps: 3.0, t: 1 }, 0.2, &det).unwrap(),
            3.0
        );
        let e = causal_dual_energy(EnergyState { eps: 8.0, t: 4 }, 1.0, &det).unwrap();
        assert!((e - 2.0).abs() < 1e-12);
        let spec = two_atom_spec(PolicyKind::CausalDual, 2.0, 2);
        let e = causal_dual_energy(EnergyState { eps: 10.0, t: 2 }, 4.0, &spec).unwrap();
        assert!((e - 6.4).abs() < 1e-12);
    }

    #[test]
    fn zero_queue_allocates_nothing() {
        let spec = two_atom_spec(PolicyKind::CausalPrimal, 2.0, 4);
        assert_eq!(
            causal_primal_bits(QueueState { beta: 0.0, t: 3 }, 2.0, &spec).unwrap(),
            0.0
        );
    }

    #[test]
    fn spec_validation() {
        let primal = two_atom_spec(PolicyKind::CausalPrimal, 2.0, 3);
        let tab = Arc::new(primal.table().unwrap().clone());
        assert!(PolicySpec::new(PolicyKind::CausalDual, cost(2.0), Some(tab.clone())).is_err());
        assert!(PolicySpec::new(PolicyKind::CausalPrimal, cost(3.0), Some(tab.clone())).is_err());
        assert!(PolicySpec::new(PolicyKind::CausalPrimal, cost(2.0), None).is_err());
        assert!(PolicySpec::new(PolicyKind::EqualBit, cost(2.0), Some(tab)).is_err());
        // slot 5 needs xi_4 but the table stops at 3
        assert!(matches!(
            causal_primal_bits(QueueState { beta: 1.0, t: 5 }, 1.0, &primal),
            Err(SchedError::TableMismatch(_))
        ));
        assert!(primal.check_horizon(4).is_ok());
        assert!(primal.check_horizon(5).is_err());
        let dual = two_atom_spec(PolicyKind::CausalDual, 2.0, 3);
        assert!(causal_primal_bits(QueueState { beta: 1.0, t: 2 }, 1.0, &dual).is_err());
    }

    #[test]
    fn noncausal_examples() {
        let b = noncausal_primal(10.0, &[4.0, 1.0], cost(2.0)).unwrap();
        assert!((b[0] - 8.0).abs() < 1e-12 && (b[1] - 2.0).abs() < 1e-12);
        let b = noncausal_primal(10.0, &[8.0, 1.0], cost(3.0)).unwrap();
        let r = 8f64.sqrt();
        assert!((b[0] - 10.0 * r / (r + 1.0)).abs() < 1e-12);
        assert!(
            (b[0] - 7.387_961_250_362_586).abs() < 1e-12
                && (b[1] - 2.612_038_749_637_414).abs() < 1e-12
        );
        let e = noncausal_dual(10.0, &[4.0, 1.0], cost(2.0)).unwrap();
        assert!((e[0] - 8.0).abs() < 1e-12 && (e[1] - 2.0).abs() < 1e-12);
        let eq = noncausal_primal(6.0, &[1.7; 4], cost(2.67)).unwrap();
        assert!(eq.iter().all(|&x| (x - 1.5).abs() < 1e-12));
        assert!(matches!(
            noncausal_primal(1.0, &[], cost(2.0)),
            Err(SchedError::EmptyHorizon)
        ));
        assert!(noncausal_dual(1.0, &[1.0, 0.0], cost(2.0)).is_err());
    }

    #[test]
    fn noncausal_survives_extreme_weights() {
        let b = noncausal_primal(1.0, &[1e-3, 1e3, 1.0], cost(1.05)).unwrap();
        assert!(b.iter().all(|x| x.is_finite() && *x >= 0.0));
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn baselines() {
        assert_eq!(equal_bit(QueueState { beta: 10.0, t: 5 }).unwrap(), 2.0);
        assert_eq!(equal_bit(QueueState { beta: 3.5, t: 1 }).unwrap(), 3.5);
        let mut beta = 12.0;
        for t in (1..=4).rev() {
            let b = equal_bit(QueueState { beta, t }).unwrap();
            assert!((b - 3.0).abs() < 1e-12);
            beta -= b;
        }
        assert_eq!(deadline_flush(QueueState { beta: 4.0, t: 3 }).unwrap(), 0.0);
        assert_eq!(deadline_flush(QueueState { beta: 4.0, t: 1 }).unwrap(), 4.0);
    }

    #[test]
    fn quadratic_ratio_identity() {
        let spec = two_atom_spec(PolicyKind::CausalPrimal, 2.0, 6);
        let tab = spec.table().unwrap();
        for t in 2..=6 {
            for g in [0.3, 1.0, 4.0, 17.0] {
                let beta = 5.0;
                let b = causal_primal_bits(QueueState { beta, t }, g, &spec).unwrap();
                let lhs = b / (beta - b);
                let rhs = g * tab.value(t - 1).unwrap();
                assert!((lhs / rhs - 1.0).abs() < 1e-12);
            }
        }
    }
}
