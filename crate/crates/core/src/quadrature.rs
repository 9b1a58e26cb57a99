//! Globally adaptive composite Gauss–Legendre quadrature on a finite interval.
//!
//! Each panel is integrated with a fixed Gauss–Legendre rule and with the same
//! rule on its two halves; the difference is the panel's error estimate. The
//! panel with the largest estimate is bisected until the summed estimate falls
//! below `max(abs_tol, rel_tol * |I|)` or the subdivision budget runs out.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SchedError};

const RULE_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_subdivisions: 1 << 16,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(SchedError::InvalidParameter(format!(
                "quadrature tolerances must be positive (rel_tol={}, abs_tol={})",
                self.rel_tol, self.abs_tol
            )));
        }
        if self.max_subdivisions < 16 {
            return Err(SchedError::InvalidParameter(format!(
                "max_subdivisions must be at least 16, got {}",
                self.max_subdivisions
            )));
        }
        Ok(())
    }
}

/// Nodes and weights of the Gauss–Legendre rule on [-1, 1].
fn rule() -> &'static [(f64, f64); RULE_POINTS] {
    static RULE: OnceLock<[(f64, f64); RULE_POINTS]> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre::<RULE_POINTS>())
}

/// Newton iteration on P_n starting from the Chebyshev-like guess.
fn gauss_legendre<const N: usize>() -> [(f64, f64); N] {
    let n = N as f64;
    let mut out = [(0.0, 0.0); N];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(N, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(N, x);
        if d != 0.0 {
            dp = d;
        }
        *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
    }
    out
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn panel_rule<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule()
        .iter()
        .map(|&(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    left: f64,
    right: f64,
    err: f64,
}

impl Panel {
    fn new<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64) -> Self {
        let m = 0.5 * (a + b);
        let left = panel_rule(f, a, m);
        let right = panel_rule(f, m, b);
        let err = (whole - (left + right)).abs();
        Self {
            a,
            b,
            left,
            right,
            err,
        }
    }

    fn value(&self) -> f64 {
        self.left + self.right
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err.total_cmp(&other.err) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Integral of `f` over `[a, b]` (finite, `a < b`).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(SchedError::InvalidParameter(format!(
            "integration interval [{a}, {b}] must be finite and non-empty"
        )));
    }
    let whole = panel_rule(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel::new(&f, a, b, whole));

    let mut splits = 0usize;
    let mut total = heap.peek().map_or(0.0, Panel::value);
    let mut err = heap.peek().map_or(0.0, |p| p.err);
    loop {
        if splits % 256 == 0 {
            // Running sums drift; re-sum exactly now and then.
            (total, err) = heap
                .iter()
                .fold((0.0, 0.0), |(s, e), p| (s + p.value(), e + p.err));
        }
        if !total.is_finite() || !err.is_finite() {
            return Err(SchedError::QuadratureNotConverged {
                estimate: total,
                error_bound: err,
            });
        }
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if err <= tol {
            let exact = heap.iter().map(Panel::value).sum::<f64>();
            return Ok(exact);
        }
        if splits >= cfg.max_subdivisions {
            return Err(SchedError::QuadratureNotConverged {
                estimate: total,
                error_bound: err,
            });
        }
        let Some(worst) = heap.pop() else {
            unreachable!("heap never empties")
        };
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            // cannot bisect further in floating point
            err -= worst.err;
            heap.push(Panel { err: 0.0, ..worst });
            splits += 1;
            continue;
        }
        let l = Panel::new(&f, worst.a, m, worst.left);
        let r = Panel::new(&f, m, worst.b, worst.right);
        total += l.value() + r.value() - worst.value();
        err += l.err + r.err - worst.err;
        heap.push(l);
        heap.push(r);
        splits += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_weights_sum_to_two() {
        let s: f64 = rule().iter().map(|&(_, w)| w).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn polynomials_are_exact() {
        let cfg = QuadratureConfig::default();
        let v = integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, &cfg).unwrap();
        assert!((v - (32.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn log_singularity_converges() {
        // ∫_0^1 -ln(u) du = 1
        let cfg = QuadratureConfig::default();
        let v = integrate(|u: f64| -u.ln(), 0.0, 1.0, &cfg).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let cfg = QuadratureConfig {
            rel_tol: 1e-15,
            abs_tol: 1e-300,
            max_subdivisions: 16,
        };
        let err = integrate(|u: f64| u.powf(-0.9), 0.0, 1.0, &cfg).unwrap_err();
        match err {
            SchedError::QuadratureNotConverged {
                estimate,
                error_bound,
            } => {
                assert!(estimate > 0.0 && error_bound > 0.0)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = QuadratureConfig {
            max_subdivisions: 4,
            ..Default::default()
        };
        assert!(integrate(|x| x, 0.0, 1.0, &cfg).is_err());
    }
}
