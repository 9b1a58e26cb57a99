//! Invariant suites run by `fadesched verify`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::channel::{Channel, FadingModel, SeededStream};
use crate::error::Result;
use crate::oracle::{dp_solve_dual, dp_solve_primal, one_step_argmin, GridSpec};
use crate::policies::{
    causal_primal_bits, noncausal_dual, noncausal_primal, PolicyKind, PolicySpec, QueueState,
};
use crate::quadrature::QuadratureConfig;
use crate::thresholds::{
    expected_dual_bits, expected_primal_cost, limit_gap, xi_table, zeta_table, MonomialCost,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Thresholds,
    Policy,
    Dp,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Thresholds, Suite::Policy, Suite::Dp];
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    /// Orders to sweep; `None` uses each suite's default set.
    pub orders: Option<Vec<f64>>,
    pub policy_tol: f64,
    pub dp_points: usize,
    /// Relative value tolerance for the DP suite; `None` scales 0.5% at 512
    /// points by `(512 / points)^2`, the interpolation error rate.
    pub dp_tol: Option<f64>,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            orders: None,
            policy_tol: 1e-8,
            dp_points: 512,
            dp_tol: None,
            seed: 0x5eed,
        }
    }
}

impl VerifyOptions {
    pub fn dp_tolerance(&self) -> f64 {
        self.dp_tol
            .unwrap_or_else(|| 0.005 * (512.0 / self.dp_points as f64).powi(2).max(1.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub limit: f64,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}/{}: observed {:.3e}, limit {:.3e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.observed,
            self.limit
        )
    }
}

fn check(suite: &'static str, name: impl Into<String>, observed: f64, limit: f64) -> Check {
    Check {
        suite,
        name: name.into(),
        passed: observed <= limit,
        observed,
        limit,
    }
}

fn reference_models() -> Vec<(&'static str, Channel)> {
    vec![
        ("deterministic(1)", FadingModel::Deterministic { c: 1.0 }),
        (
            "two_atom",
            FadingModel::Discrete {
                atoms: vec![(1.0, 0.5), (4.0, 0.5)],
            },
        ),
        ("truncated_exp", FadingModel::reference_default()),
    ]
    .into_iter()
    .map(|(name, m)| (name, m.validate().expect("reference models are valid")))
    .collect()
}

pub fn run(suites: &[Suite], opts: &VerifyOptions) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for suite in suites {
        match suite {
            Suite::Thresholds => thresholds_suite(opts, &mut out)?,
            Suite::Policy => policy_suite(opts, &mut out)?,
            Suite::Dp => dp_suite(opts, &mut out)?,
        }
    }
    Ok(out)
}

fn thresholds_suite(opts: &VerifyOptions, out: &mut Vec<Check>) -> Result<()> {
    let cfg = QuadratureConfig::default();
    let orders = opts
        .orders
        .clone()
        .unwrap_or_else(|| vec![1.5, 2.0, 2.67, 5.0, 20.0]);
    let horizon = 50;
    for (name, ch) in reference_models() {
        for &n in &orders {
            let tab = xi_table(&ch, MonomialCost::new(n)?, horizon, &cfg)?;
            // worst violation of xi_t <= xi_{t-1}, relative
            let xi_up = tab
                .values
                .windows(2)
                .map(|w| (w[1] - w[0]) / w[0])
                .fold(f64::NEG_INFINITY, f64::max);
            out.push(check(
                "thresholds",
                format!("xi nonincreasing {name} n={n}"),
                xi_up,
                0.0,
            ));
            let eta_down = tab
                .roots
                .windows(2)
                .map(|w| (w[0] - w[1]) / w[0])
                .fold(f64::NEG_INFINITY, f64::max);
            out.push(check(
                "thresholds",
                format!("eta increasing {name} n={n}"),
                eta_down,
                -1e-12,
            ));
        }
    }
    for c in [0.5, 1.0, 3.0] {
        let ch = FadingModel::Deterministic { c }.validate()?;
        for &n in &orders {
            let cost = MonomialCost::new(n)?;
            let xi = xi_table(&ch, cost, horizon, &cfg)?;
            let zeta = zeta_table(&ch, cost, horizon, &cfg)?;
            let mut worst: f64 = 0.0;
            for t in 1..=horizon {
                let scale = c * (t as f64).powf(n - 1.0);
                worst = worst.max((xi.values[t - 1] * scale - 1.0).abs());
                worst = worst.max((zeta.values[t - 1] / scale - 1.0).abs());
            }
            out.push(check(
                "thresholds",
                format!("deterministic closed form c={c} n={n}"),
                worst,
                1e-12,
            ));
        }
    }
    let unit = FadingModel::Deterministic { c: 1.0 }.validate()?;
    let texp = FadingModel::reference_default().validate()?;
    for &n in &orders {
        let tab = xi_table(&unit, MonomialCost::new(n)?, horizon, &cfg)?;
        let worst = (1..=horizon)
            .map(|t| limit_gap(&tab, t))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.push(check(
            "thresholds",
            format!("limit gap deterministic(1) n={n}"),
            worst,
            0.0,
        ));
    }
    let tab = xi_table(&texp, MonomialCost::new(200.0)?, 5, &cfg)?;
    let worst = (1..=5)
        .map(|t| limit_gap(&tab, t))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    out.push(check(
        "thresholds",
        "limit gap truncated_exp n=200 t<=5",
        worst,
        0.10,
    ));
    Ok(())
}

fn policy_suite(opts: &VerifyOptions, out: &mut Vec<Check>) -> Result<()> {
    let cfg = QuadratureConfig::default();
    let orders = opts
        .orders
        .clone()
        .unwrap_or_else(|| vec![1.5, 2.0, 2.67, 5.0]);
    let mut u = SeededStream::new(opts.seed, 0).uniforms();
    let mut draw = move |lo: f64, hi: f64| lo * (hi / lo).powf(u.next().unwrap_or(0.5));
    let horizon = 6;
    for (name, ch) in reference_models() {
        for &n in &orders {
            let cost = MonomialCost::new(n)?;
            let tab = Arc::new(xi_table(&ch, cost, horizon, &cfg)?);
            let spec = PolicySpec::new(PolicyKind::CausalPrimal, cost, Some(tab.clone()))?;
            let (mut foc, mut oracle, mut ratio): (f64, f64, f64) = (0.0, 0.0, 0.0);
            for k in 0..200 {
                let beta = draw(0.1, 100.0);
                let g = draw(0.01, 100.0);
                let t = 2 + k % (horizon - 1);
                let b = causal_primal_bits(QueueState { beta, t }, g, &spec)?;
                let xi_prev = tab.values[t - 2];
                let now = n * b.powf(n - 1.0) / g;
                let later = n * (beta - b).powf(n - 1.0) * xi_prev;
                foc = foc.max((now - later).abs() / (now + later));
                let argmin = one_step_argmin(beta, g, cost, xi_prev)?;
                oracle = oracle.max((argmin - b).abs() / beta);
                let w = cost.root(g);
                let eta = tab.roots[t - 2];
                ratio =
                    ratio.max((b * eta - (beta - b) * w).abs() / (b * eta).max(f64::MIN_POSITIVE));
            }
            out.push(check(
                "policy",
                format!("first-order residual {name} n={n}"),
                foc,
                opts.policy_tol,
            ));
            out.push(check(
                "policy",
                format!("argmin oracle {name} n={n}"),
                oracle,
                opts.policy_tol,
            ));
            out.push(check(
                "policy",
                format!("ratio identity {name} n={n}"),
                ratio,
                1e-12,
            ));
        }
    }
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let len = 1 + k % 16;
        let gains: Vec<f64> = (0..len).map(|_| draw(0.01, 100.0)).collect();
        let cost = MonomialCost::new(orders[k % orders.len()])?;
        let b = noncausal_primal(3.0, &gains, cost)?;
        let e = noncausal_dual(7.0, &gains, cost)?;
        for (bt, et) in b.iter().zip(&e) {
            worst = worst.max((bt / 3.0 - et / 7.0).abs());
        }
    }
    out.push(check(
        "policy",
        "non-causal primal/dual proportions",
        worst,
        1e-12,
    ));

    let texp = FadingModel::reference_default().validate()?;
    let mut prev = f64::INFINITY;
    for n in [5.0, 20.0, 100.0] {
        let cost = MonomialCost::new(n)?;
        let tab = Arc::new(xi_table(&texp, cost, 10, &cfg)?);
        let spec = PolicySpec::new(PolicyKind::CausalPrimal, cost, Some(tab))?;
        let dev = (1..=10)
            .map(|t| {
                causal_primal_bits(QueueState { beta: 1.0, t }, 1.0, &spec)
                    .map(|b| (b - 1.0 / t as f64).abs())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.push(check(
            "policy",
            format!("equal-bit deviation shrinks at n={n}"),
            dev,
            prev,
        ));
        prev = dev;
    }
    Ok(())
}

fn dp_suite(opts: &VerifyOptions, out: &mut Vec<Check>) -> Result<()> {
    let cfg = QuadratureConfig::default();
    let orders = opts.orders.clone().unwrap_or_else(|| vec![2.0, 2.67]);
    let ch = FadingModel::Discrete {
        atoms: vec![(1.0, 0.5), (4.0, 0.5)],
    }
    .validate()?;
    let tol = opts.dp_tolerance();
    let horizon = 4;
    for &n in &orders {
        let cost = MonomialCost::new(n)?;
        let xi = xi_table(&ch, cost, horizon, &cfg)?;
        let sol = dp_solve_primal(
            &ch,
            cost,
            horizon,
            GridSpec::square(opts.dp_points, 16, 1.0),
        )?;
        let mut worst: f64 = 0.0;
        for t in 1..=horizon {
            let want = expected_primal_cost(1.0, &xi, t)?;
            worst = worst.max((sol.expected_value(t, 1.0)? / want - 1.0).abs());
        }
        out.push(check(
            "dp",
            format!("primal value n={n} grid={}", opts.dp_points),
            worst,
            tol,
        ));

        let zeta = zeta_table(&ch, cost, horizon, &cfg)?;
        let sol = dp_solve_dual(
            &ch,
            cost,
            horizon,
            GridSpec::square(opts.dp_points, 16, 1.0),
        )?;
        let mut worst: f64 = 0.0;
        for t in 1..=horizon {
            let want = expected_dual_bits(1.0, &zeta, t)?;
            worst = worst.max((sol.expected_value(t, 1.0)? / want - 1.0).abs());
        }
        out.push(check(
            "dp",
            format!("dual value n={n} grid={}", opts.dp_points),
            worst,
            tol,
        ));
    }
    Ok(())
}
