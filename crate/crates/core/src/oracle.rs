//! Brute-force checks for the closed-form schedulers.
//!
//! [`dp_solve_primal`] and [`dp_solve_dual`] run backward induction on a
//! geometric grid over the remaining bits (or energy), with the gain
//! distribution quantized to a handful of atoms and the per-slot decision
//! found by an action-grid scan refined with golden-section search. Nothing
//! here touches the threshold recursions or the policy formulas; only the
//! per-slot cost maps are shared.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{Channel, FadingModel};
use crate::error::{Result, SchedError};
use crate::policies::{slot_bits, slot_energy, Problem};
use crate::thresholds::{fmt_num, MonomialCost};

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Smallest positive grid point as a fraction of `state_max`.
const GRID_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub state_points: usize,
    pub action_points: usize,
    /// Quantization level for continuous models; atomic models are used as is.
    pub gain_atoms: usize,
    pub state_max: f64,
}

impl GridSpec {
    pub fn square(points: usize, gain_atoms: usize, state_max: f64) -> Self {
        Self {
            state_points: points,
            action_points: points,
            gain_atoms,
            state_max,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.state_points < 8 || self.action_points < 8 || self.gain_atoms < 8 {
            return Err(SchedError::InvalidParameter(format!(
                "grid counts must all be >= 8, got {self:?}"
            )));
        }
        if !(self.state_max.is_finite() && self.state_max > 0.0) {
            return Err(SchedError::InvalidParameter(format!(
                "state_max must be positive, got {}",
                self.state_max
            )));
        }
        Ok(())
    }
}

/// Geometric grid `0, x_1, ..., state_max` with constant ratio between
/// consecutive positive points.
#[derive(Debug, Clone, PartialEq)]
struct StateGrid {
    points: Vec<f64>,
    log_lo: f64,
    log_step: f64,
}

impl StateGrid {
    fn new(count: usize, max: f64) -> Self {
        let positive = count - 1;
        let lo = max * GRID_FLOOR;
        let log_lo = lo.ln();
        let log_step = (max.ln() - log_lo) / (positive - 1) as f64;
        let mut points = Vec::with_capacity(count);
        points.push(0.0);
        for k in 0..positive {
            points.push((log_lo + k as f64 * log_step).exp());
        }
        points[count - 1] = max;
        Self {
            points,
            log_lo,
            log_step,
        }
    }

    /// Piecewise-linear interpolation of `values` (one per grid point).
    fn interp(&self, values: &[f64], x: f64) -> f64 {
        let pts = &self.points;
        let last = pts.len() - 1;
        if x <= 0.0 {
            return values[0];
        }
        if x >= pts[last] {
            return values[last];
        }
        let seg = if x < pts[1] {
            0
        } else {
            let guess = ((x.ln() - self.log_lo) / self.log_step).floor() as isize + 1;
            let mut j = guess.clamp(1, last as isize - 1) as usize;
            while j > 1 && pts[j] > x {
                j -= 1;
            }
            while j + 1 < last && pts[j + 1] <= x {
                j += 1;
            }
            j
        };
        let (x0, x1) = (pts[seg], pts[seg + 1]);
        let w = (x - x0) / (x1 - x0);
        values[seg] + w * (values[seg + 1] - values[seg])
    }
}

/// Tabulated backward-induction solution. Indices run `[t - 1][state][atom]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    pub problem: Problem,
    pub horizon: usize,
    pub atoms: Vec<(f64, f64)>,
    grid: StateGrid,
    /// Optimal cost-to-go given the current gain atom.
    pub value: Vec<Vec<Vec<f64>>>,
    /// Maximizing/minimizing allocation for the current slot.
    pub greedy_action: Vec<Vec<Vec<f64>>>,
    /// Value averaged over the gain atoms, `[t - 1][state]`.
    pub expected: Vec<Vec<f64>>,
}

impl DpSolution {
    pub fn states(&self) -> &[f64] {
        &self.grid.points
    }

    fn check_t(&self, t: usize) -> Result<usize> {
        if t == 0 || t > self.horizon {
            Err(SchedError::IndexOutOfHorizon {
                t,
                horizon: self.horizon,
            })
        } else {
            Ok(t - 1)
        }
    }

    /// Interpolated expected value with `t` slots left and `state` bits (or
    /// energy) remaining, before the current gain is revealed.
    pub fn expected_value(&self, t: usize, state: f64) -> Result<f64> {
        let i = self.check_t(t)?;
        Ok(self.grid.interp(&self.expected[i], state))
    }

    /// Interpolated greedy action at gain atom `atom`.
    pub fn action(&self, t: usize, state: f64, atom: usize) -> Result<f64> {
        let i = self.check_t(t)?;
        let column: Vec<f64> = self.greedy_action[i].iter().map(|row| row[atom]).collect();
        Ok(self.grid.interp(&column, state))
    }

    /// Columns `t, state, atom, value, action`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "state", "atom", "value", "action"])?;
        for (ti, (vals, acts)) in self.value.iter().zip(&self.greedy_action).enumerate() {
            for (si, (vrow, arow)) in vals.iter().zip(acts).enumerate() {
                for (k, (v, a)) in vrow.iter().zip(arow).enumerate() {
                    out.write_record([
                        (ti + 1).to_string(),
                        fmt_num(self.grid.points[si]),
                        k.to_string(),
                        fmt_num(*v),
                        fmt_num(*a),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Equal-probability atoms at quantile midpoints; atomic models are returned
/// unchanged.
pub fn quantize(channel: &Channel, count: usize) -> Vec<(f64, f64)> {
    match channel.model() {
        FadingModel::Deterministic { c } => vec![(*c, 1.0)],
        FadingModel::Discrete { atoms } => atoms.clone(),
        _ => {
            let p = 1.0 / count as f64;
            (0..count)
                .map(|k| (channel.quantile((k as f64 + 0.5) * p), p))
                .collect()
        }
    }
}

/// Golden-section search on `[lo, hi]` driven by a strict "is `x` better than
/// `y`" comparison. Stops when the bracket is narrower than `tol`.
fn golden_search<F: Fn(f64, f64) -> bool>(better: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        if better(x1, x2) {
            hi = x2;
            x2 = x1;
            x1 = hi - GOLDEN * (hi - lo);
        } else {
            lo = x1;
            x1 = x2;
            x2 = lo + GOLDEN * (hi - lo);
        }
    }
    0.5 * (lo + hi)
}

/// `(c + d)^n - c^n` without cancellation when `d` is small against `c`.
fn pow_diff(c: f64, d: f64, n: f64) -> f64 {
    if c == 0.0 {
        return d.powf(n);
    }
    c.powf(n) * (n * (d / c).ln_1p()).exp_m1()
}

/// Minimizer of `b^n / g + xi_prev (beta - b)^n` over `[0, beta]`, by
/// golden-section search to `1e-12 beta`. The search compares objective values
/// through cancellation-free differences so it keeps resolving the minimizer
/// well below the square-root-of-epsilon floor of plain value comparisons.
pub fn one_step_argmin(beta: f64, g: f64, cost: MonomialCost, xi_prev: f64) -> Result<f64> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(SchedError::InvalidParameter(format!("beta = {beta}")));
    }
    if !(g.is_finite() && g > 0.0) {
        return Err(SchedError::NonPositiveGain(g));
    }
    if !(xi_prev.is_finite() && xi_prev > 0.0) {
        return Err(SchedError::InvalidParameter(format!("xi_prev = {xi_prev}")));
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    let n = cost.n();
    let better = |x1: f64, x2: f64| {
        let now = pow_diff(x2, x1 - x2, n) / g;
        let later = xi_prev * pow_diff(beta - x2, x2 - x1, n);
        now + later < 0.0
    };
    Ok(golden_search(better, 0.0, beta, 1e-12 * beta))
}

/// Backward induction for `J_t(beta, g) = min_b b^n/g + E J_{t-1}(beta - b)`
/// with `J_1(beta, g) = beta^n / g`.
pub fn dp_solve_primal(
    channel: &Channel,
    cost: MonomialCost,
    horizon: usize,
    grid: GridSpec,
) -> Result<DpSolution> {
    solve(channel, cost, horizon, grid, Problem::Primal)
}

/// Backward induction for `W_t(E, g) = max_e (g e)^(1/n) + E W_{t-1}(E - e)`
/// with `W_1(E, g) = (g E)^(1/n)`.
pub fn dp_solve_dual(
    channel: &Channel,
    cost: MonomialCost,
    horizon: usize,
    grid: GridSpec,
) -> Result<DpSolution> {
    solve(channel, cost, horizon, grid, Problem::Dual)
}

fn solve(
    channel: &Channel,
    cost: MonomialCost,
    horizon: usize,
    spec: GridSpec,
    problem: Problem,
) -> Result<DpSolution> {
    spec.validate()?;
    if horizon == 0 {
        return Err(SchedError::EmptyHorizon);
    }
    let atoms = quantize(channel, spec.gain_atoms);
    let grid = StateGrid::new(spec.state_points, spec.state_max);
    let reward = |x: f64, g: f64| -> f64 {
        match problem {
            Problem::Primal => slot_energy(x, g, cost).unwrap_or(f64::NAN),
            Problem::Dual => slot_bits(x, g, cost).unwrap_or(f64::NAN),
        }
    };
    // primal minimizes, dual maximizes
    let prefer = |a: f64, b: f64| match problem {
        Problem::Primal => a < b,
        Problem::Dual => a > b,
    };

    let mut value = Vec::with_capacity(horizon);
    let mut greedy = Vec::with_capacity(horizon);
    let mut expected: Vec<Vec<f64>> = Vec::with_capacity(horizon);

    let terminal: Vec<Vec<f64>> = grid
        .points
        .iter()
        .map(|&x| atoms.iter().map(|&(g, _)| reward(x, g)).collect())
        .collect();
    let terminal_action: Vec<Vec<f64>> =
        grid.points.iter().map(|&x| vec![x; atoms.len()]).collect();
    expected.push(average(&terminal, &atoms));
    value.push(terminal);
    greedy.push(terminal_action);

    let steps = spec.action_points - 1;
    for _ in 2..=horizon {
        let next = expected.last().expect("terminal stage present").clone();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = grid
            .points
            .par_iter()
            .map(|&x| {
                let mut vals = Vec::with_capacity(atoms.len());
                let mut acts = Vec::with_capacity(atoms.len());
                for &(g, _) in &atoms {
                    let objective = |b: f64| reward(b, g) + grid.interp(&next, x - b);
                    if x == 0.0 {
                        vals.push(objective(0.0));
                        acts.push(0.0);
                        continue;
                    }
                    let cell = x / steps as f64;
                    let mut best_j = 0;
                    let mut best_v = objective(0.0);
                    for j in 1..=steps {
                        let v = objective(cell * j as f64);
                        if prefer(v, best_v) {
                            best_j = j;
                            best_v = v;
                        }
                    }
                    let lo = cell * best_j.saturating_sub(1) as f64;
                    let hi = (cell * (best_j + 1) as f64).min(x);
                    let b =
                        golden_search(|p, q| prefer(objective(p), objective(q)), lo, hi, 1e-12 * x);
                    let (b, v) = {
                        let v = objective(b);
                        if prefer(v, best_v) {
                            (b, v)
                        } else {
                            (cell * best_j as f64, best_v)
                        }
                    };
                    vals.push(v);
                    acts.push(b);
                }
                (vals, acts)
            })
            .collect();
        let (vals, acts): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let avg = average(&vals, &atoms);
        if let Some(i) = avg
            .windows(2)
            .position(|w| w[1] < w[0] - 1e-12 * w[0].abs().max(w[1].abs()))
        {
            return Err(SchedError::GridTooCoarse(format!(
                "expected value decreases between states {} and {} at t = {}",
                grid.points[i],
                grid.points[i + 1],
                value.len() + 1
            )));
        }
        expected.push(avg);
        value.push(vals);
        greedy.push(acts);
    }
    Ok(DpSolution {
        problem,
        horizon,
        atoms,
        grid,
        value,
        greedy_action: greedy,
        expected,
    })
}

fn average(rows: &[Vec<f64>], atoms: &[(f64, f64)]) -> Vec<f64> {
    rows.iter()
        .map(|row| row.iter().zip(atoms).map(|(v, (_, p))| p * v).sum())
        .collect()
}
