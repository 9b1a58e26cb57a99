//! Threshold constants for the causal schedulers.
//!
//! For cost order `n` and `m = n - 1`, the primal constants obey
//!
//! ```text
//! xi_1 = E[1/g]
//! xi_t = E[(g^(1/m) + xi_{t-1}^(-1/m))^(-m)]            t >= 2
//! ```
//!
//! and `beta^n * xi_t` is the optimal expected energy for `beta` bits with `t`
//! slots to go. The dual constants obey
//!
//! ```text
//! zeta_1 = E[g^(1/n)]^n
//! zeta_t = E[(g^(1/m) + zeta_{t-1}^(1/m))^(m/n)]^n       t >= 2
//! ```
//!
//! Both recursions are carried in root form, `h_t = xi_t^(-1/m)` and
//! `z_t = zeta_t^(1/m)`, which stay O(t) for every `n`; the raw constants
//! underflow or overflow like `t^(-m)` and `t^m` once `n` is large.

use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::error::{Result, SchedError};
use crate::quadrature::QuadratureConfig;

pub const MAX_HORIZON: usize = 10_000;

/// Monomial energy-bit cost `E = b^n / g` with order `n > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCost")]
pub struct MonomialCost {
    n: f64,
}

#[derive(Deserialize)]
struct RawCost {
    n: f64,
}

impl TryFrom<RawCost> for MonomialCost {
    type Error = SchedError;
    fn try_from(raw: RawCost) -> Result<Self> {
        MonomialCost::new(raw.n)
    }
}

impl MonomialCost {
    pub fn new(n: f64) -> Result<Self> {
        if n.is_finite() && n > 1.0 {
            Ok(Self { n })
        } else {
            Err(SchedError::InvalidOrder(n))
        }
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    /// `n - 1`
    pub fn m(&self) -> f64 {
        self.n - 1.0
    }

    /// `x^(1/(n-1))` evaluated as `exp(ln x / (n-1))`.
    pub fn root(&self, x: f64) -> f64 {
        (x.ln() / self.m()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    PrimalXi,
    DualZeta,
}

/// Precomputed constants for `t = 1..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub n: f64,
    pub horizon: usize,
    pub kind: TableKind,
    /// `xi_t` or `zeta_t`, index `t - 1`.
    pub values: Vec<f64>,
    /// `xi_t^(-1/m)` or `zeta_t^(1/m)`, index `t - 1`.
    pub roots: Vec<f64>,
}

impl ThresholdTable {
    pub fn cost(&self) -> MonomialCost {
        MonomialCost { n: self.n }
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

    pub fn value(&self, t: usize) -> Result<f64> {
        Ok(self.values[self.check_t(t)?])
    }

    pub fn root(&self, t: usize) -> Result<f64> {
        Ok(self.roots[self.check_t(t)?])
    }

    /// Deferral weight used at slot `t >= 2`: the root of the constant one
    /// slot closer to the deadline. For the primal table this is
    /// `eta_t = (1/xi_{t-1})^(1/(n-1))`.
    pub fn eta(&self, t: usize) -> Result<f64> {
        if t < 2 {
            return Err(SchedError::IndexOutOfHorizon {
                t,
                horizon: self.horizon,
            });
        }
        self.root(t - 1)
    }

    /// The eta column, `t = 2..=horizon`.
    pub fn eta_column(&self) -> &[f64] {
        &self.roots[..self.horizon.saturating_sub(1)]
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "value", "eta"])?;
        for t in 1..=self.horizon {
            let eta = if t >= 2 {
                fmt_num(self.roots[t - 2])
            } else {
                String::new()
            };
            out.write_record([t.to_string(), fmt_num(self.values[t - 1]), eta])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a CSV with `t`, `value` and `eta` columns, as written by
    /// [`write_csv`](Self::write_csv). Files holding several orders carry an
    /// `n` column; only rows matching `cost` are read. `kind` comes from the
    /// caller.
    pub fn read_csv<R: std::io::Read>(r: R, cost: MonomialCost, kind: TableKind) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let missing =
            |name: &str| SchedError::Config(format!("threshold csv has no `{name}` column"));
        let (t_col, v_col, e_col) = (
            col("t").ok_or_else(|| missing("t"))?,
            col("value").ok_or_else(|| missing("value"))?,
            col("eta").ok_or_else(|| missing("eta"))?,
        );
        let n_col = col("n");
        let mut values = Vec::new();
        let mut etas = Vec::new();
        let mut orders_seen = false;
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad =
                |what: &str| SchedError::Config(format!("threshold csv row {}: {what}", i + 1));
            let field = |c: usize| rec.get(c).and_then(|s| s.trim().parse::<f64>().ok());
            if let Some(c) = n_col {
                orders_seen = true;
                if field(c).ok_or_else(|| bad("n"))? != cost.n() {
                    continue;
                }
            }
            let t: usize = rec
                .get(t_col)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad("t"))?;
            if t != values.len() + 1 {
                return Err(bad("rows must be t = 1, 2, ..."));
            }
            values.push(field(v_col).ok_or_else(|| bad("value"))?);
            if t >= 2 {
                etas.push(field(e_col).ok_or_else(|| bad("eta"))?);
            }
        }
        if values.is_empty() && orders_seen {
            return Err(SchedError::TableMismatch(format!(
                "threshold csv has no rows for n = {}",
                cost.n()
            )));
        }
        if values.is_empty() {
            return Err(SchedError::Config("threshold csv has no rows".into()));
        }
        let last = *values.last().unwrap_or(&f64::NAN);
        let last_root = match kind {
            TableKind::PrimalXi => (-last.ln() / cost.m()).exp(),
            TableKind::DualZeta => (last.ln() / cost.m()).exp(),
        };
        etas.push(last_root);
        Ok(Self {
            n: cost.n(),
            horizon: values.len(),
            kind,
            values,
            roots: etas,
        })
    }
}

/// 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(SchedError::EmptyHorizon);
    }
    if horizon > MAX_HORIZON {
        return Err(SchedError::InvalidParameter(format!(
            "horizon {horizon} exceeds cap {MAX_HORIZON}"
        )));
    }
    Ok(())
}

/// Primal constants `xi_{n,t}`, `t = 1..=horizon`.
pub fn xi_table(
    channel: &Channel,
    cost: MonomialCost,
    horizon: usize,
    cfg: &QuadratureConfig,
) -> Result<ThresholdTable> {
    check_horizon(horizon)?;
    let m = cost.m();
    let xi1 = channel.expect(|g| 1.0 / g, cfg)?;
    if !(xi1.is_finite() && xi1 > 0.0) {
        return Err(SchedError::DivergentInverseMoment(format!(
            "E[1/g] = {xi1}"
        )));
    }
    let atom_root = channel.is_deterministic().map(|c| cost.root(c));
    let mut roots = Vec::with_capacity(horizon);
    let mut h = match atom_root {
        Some(w) => w,
        None => (-xi1.ln() / m).exp(),
    };
    roots.push(h);
    for _ in 2..=horizon {
        h = match atom_root {
            // (w + h)^(-m) has root w + h exactly
            Some(w) => h + w,
            None => {
                let inv_h = 1.0 / h;
                let r = channel.expect(|g| (-m * (cost.root(g) * inv_h).ln_1p()).exp(), cfg)?;
                h * (-r.ln() / m).exp()
            }
        };
        roots.push(h);
    }
    let mut values: Vec<f64> = roots.iter().map(|&h| h.powf(-m)).collect();
    values[0] = xi1;
    Ok(ThresholdTable {
        n: cost.n(),
        horizon,
        kind: TableKind::PrimalXi,
        values,
        roots,
    })
}

/// Dual constants `zeta_{n,t}`, `t = 1..=horizon`.
pub fn zeta_table(
    channel: &Channel,
    cost: MonomialCost,
    horizon: usize,
    cfg: &QuadratureConfig,
) -> Result<ThresholdTable> {
    check_horizon(horizon)?;
    let n = cost.n();
    let m = cost.m();
    let moment = channel.expect(|g| (g.ln() / n).exp(), cfg)?;
    if !(moment.is_finite() && moment > 0.0) {
        return Err(SchedError::InvalidParameter(format!(
            "E[g^(1/n)] must be finite and positive, got {moment}"
        )));
    }
    let atom_root = channel.is_deterministic().map(|c| cost.root(c));
    let mut z = match atom_root {
        Some(w) => w,
        None => (n / m * moment.ln()).exp(),
    };
    let mut roots = Vec::with_capacity(horizon);
    roots.push(z);
    for _ in 2..=horizon {
        z = match atom_root {
            Some(w) => z + w,
            None => {
                let inv_z = 1.0 / z;
                let r = channel.expect(|g| (m / n * (cost.root(g) * inv_z).ln_1p()).exp(), cfg)?;
                z * (n / m * r.ln()).exp()
            }
        };
        roots.push(z);
    }
    let mut values: Vec<f64> = roots.iter().map(|&z| z.powf(m)).collect();
    if atom_root.is_none() {
        values[0] = moment.powf(n);
    }
    Ok(ThresholdTable {
        n,
        horizon,
        kind: TableKind::DualZeta,
        values,
        roots,
    })
}

fn require_kind(table: &ThresholdTable, kind: TableKind) -> Result<()> {
    if table.kind == kind {
        Ok(())
    } else {
        Err(SchedError::TableMismatch(format!(
            "expected a {kind:?} table, got {:?}",
            table.kind
        )))
    }
}

/// `beta^n * xi_t`: optimal expected energy for `beta` bits with `t` slots left.
pub fn expected_primal_cost(beta: f64, table: &ThresholdTable, t: usize) -> Result<f64> {
    require_kind(table, TableKind::PrimalXi)?;
    let xi = table.value(t)?;
    if beta == 0.0 {
        return Ok(0.0);
    }
    Ok(beta.powf(table.n) * xi)
}

/// `(zeta_t * energy)^(1/n)`: optimal expected bits for `energy` with `t`
/// slots left.
pub fn expected_dual_bits(energy: f64, table: &ThresholdTable, t: usize) -> Result<f64> {
    require_kind(table, TableKind::DualZeta)?;
    let z = table.root(t)?;
    if energy == 0.0 {
        return Ok(0.0);
    }
    // zeta^(1/n) = z^(m/n)
    let m = table.n - 1.0;
    Ok((m / table.n * z.ln()).exp() * energy.powf(1.0 / table.n))
}

/// Relative distance `|xi_t^(-1/(n-1)) - t| / t` from the large-`n` limit.
pub fn limit_gap(table: &ThresholdTable, t: usize) -> Result<f64> {
    require_kind(table, TableKind::PrimalXi)?;
    let h = table.root(t)?;
    let t = t as f64;
    Ok((h - t).abs() / t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FadingModel;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn two_atom() -> Channel {
        FadingModel::Discrete {
            atoms: vec![(1.0, 0.5), (4.0, 0.5)],
        }
        .validate()
        .unwrap()
    }

    fn det(c: f64) -> Channel {
        FadingModel::Deterministic { c }.validate().unwrap()
    }

    /// Recursion written directly in xi; safe for moderate n.
    fn xi_direct(ch: &Channel, n: f64, horizon: usize) -> Vec<f64> {
        let m = n - 1.0;
        let mut out = vec![ch.expect(|g| 1.0 / g, &cfg()).unwrap()];
        for t in 1..horizon {
            let prev = out[t - 1];
            let v = ch
                .expect(
                    |g| (g.powf(1.0 / m) + (1.0 / prev).powf(1.0 / m)).powf(-m),
                    &cfg(),
                )
                .unwrap();
            out.push(v);
        }
        out
    }

    #[test]
    fn rejects_non_convex_order() {
        for n in [1.0, 0.5, -2.0, f64::NAN, f64::INFINITY] {
            assert!(MonomialCost::new(n).is_err());
        }
        assert!(serde_json::from_str::<MonomialCost>(r#"{"n": 1.0}"#).is_err());
        assert_eq!(
            serde_json::from_str::<MonomialCost>(r#"{"n": 2.67}"#)
                .unwrap()
                .n(),
            2.67
        );
    }

    #[test]
    fn two_atom_xi() {
        let tab = xi_table(&two_atom(), MonomialCost::new(2.0).unwrap(), 2, &cfg()).unwrap();
        assert_eq!(tab.values[0], 0.625);
        // 0.5 * (1/2.6 + 1/5.6)
        let expected = 0.5 * (1.0 / 2.6 + 1.0 / 5.6);
        assert!((tab.values[1] / expected - 1.0).abs() < 1e-14);
        assert!((tab.values[1] - 0.281_593_4).abs() < 1e-7);
    }

    #[test]
    fn deterministic_closed_forms() {
        for c in [0.5, 1.0, 3.0] {
            for n in [1.5, 2.0, 2.67, 5.0] {
                let cost = MonomialCost::new(n).unwrap();
                let xi = xi_table(&det(c), cost, 30, &cfg()).unwrap();
                let zeta = zeta_table(&det(c), cost, 30, &cfg()).unwrap();
                for t in 1..=30 {
                    let s = (t as f64).powf(n - 1.0);
                    assert!((xi.value(t).unwrap() * c * s - 1.0).abs() < 1e-12);
                    assert!((zeta.value(t).unwrap() / (c * s) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn unit_deterministic_zeta_quadratic() {
        let tab = zeta_table(&det(1.0), MonomialCost::new(2.0).unwrap(), 4, &cfg()).unwrap();
        assert_eq!(tab.values, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn two_atom_zeta_first_slot() {
        let tab = zeta_table(&two_atom(), MonomialCost::new(2.0).unwrap(), 1, &cfg()).unwrap();
        assert!((tab.values[0] - 2.25).abs() < 1e-15);
    }

    #[test]
    fn direct_and_root_forms_agree() {
        let channels = [
            two_atom(),
            FadingModel::reference_default().validate().unwrap(),
        ];
        for ch in &channels {
            for n in [1.5, 2.0, 2.67, 5.0] {
                let tab = xi_table(ch, MonomialCost::new(n).unwrap(), 12, &cfg()).unwrap();
                for (a, b) in tab.values.iter().zip(xi_direct(ch, n, 12)) {
                    assert!((a / b - 1.0).abs() < 1e-9, "n={n}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn expected_cost_examples() {
        let cost = MonomialCost::new(2.0).unwrap();
        let unit = xi_table(&det(1.0), cost, 5, &cfg()).unwrap();
        assert_eq!(expected_primal_cost(0.0, &unit, 3).unwrap(), 0.0);
        assert!((expected_primal_cost(10.0, &unit, 5).unwrap() - 20.0).abs() < 1e-12);
        let tab = xi_table(&two_atom(), cost, 2, &cfg()).unwrap();
        assert!((expected_primal_cost(1.0, &tab, 2).unwrap() - 0.281_593_4).abs() < 1e-7);
        assert!(matches!(
            expected_primal_cost(1.0, &tab, 3),
            Err(SchedError::IndexOutOfHorizon { t: 3, horizon: 2 })
        ));
        let zeta = zeta_table(&two_atom(), cost, 2, &cfg()).unwrap();
        assert!(matches!(
            expected_primal_cost(1.0, &zeta, 1),
            Err(SchedError::TableMismatch(_))
        ));
    }

    #[test]
    fn limit_gap_examples() {
        for n in [1.5, 2.0, 7.0, 50.0] {
            let tab = xi_table(&det(1.0), MonomialCost::new(n).unwrap(), 10, &cfg()).unwrap();
            for t in 1..=10 {
                assert_eq!(limit_gap(&tab, t).unwrap(), 0.0);
            }
        }
        let ch = FadingModel::reference_default().validate().unwrap();
        let tab = xi_table(&ch, MonomialCost::new(2.0).unwrap(), 1, &cfg()).unwrap();
        let gap = limit_gap(&tab, 1).unwrap();
        assert!((gap - (1.0 - 1.0 / ch.inverse_moment())).abs() < 1e-12);
        assert!((gap - 0.842).abs() < 1e-3);
    }

    #[test]
    fn large_order_does_not_underflow() {
        let ch = FadingModel::reference_default().validate().unwrap();
        let tab = xi_table(&ch, MonomialCost::new(200.0).unwrap(), 50, &cfg()).unwrap();
        assert!(tab.roots.iter().all(|r| r.is_finite() && *r > 0.0));
        for w in tab.roots.windows(2) {
            assert!(w[1] > w[0]);
        }
        for t in 1..=5 {
            assert!(limit_gap(&tab, t).unwrap() <= 0.1);
        }
    }

    #[test]
    fn horizon_bounds() {
        let cost = MonomialCost::new(2.0).unwrap();
        assert!(matches!(
            xi_table(&det(1.0), cost, 0, &cfg()),
            Err(SchedError::EmptyHorizon)
        ));
        assert!(xi_table(&det(1.0), cost, MAX_HORIZON + 1, &cfg()).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_roots() {
        let cost = MonomialCost::new(2.67).unwrap();
        let tab = xi_table(&two_atom(), cost, 6, &cfg()).unwrap();
        let mut buf = Vec::new();
        tab.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,value,eta\n1,"));
        let back = ThresholdTable::read_csv(&buf[..], cost, TableKind::PrimalXi).unwrap();
        assert_eq!(back.values, tab.values);
        assert_eq!(back.roots[..5], tab.roots[..5]);
        assert!((back.roots[5] / tab.roots[5] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn csv_with_order_column_selects_rows() {
        let text = "n,t,value,eta\n2,1,1,\n2,2,0.5,1\n3,1,1,\n3,2,0.25,1\n";
        let cost3 = MonomialCost::new(3.0).unwrap();
        let tab = ThresholdTable::read_csv(text.as_bytes(), cost3, TableKind::PrimalXi).unwrap();
        assert_eq!(tab.values, vec![1.0, 0.25]);
        assert!((tab.roots[1] - 2.0).abs() < 1e-15);
        let cost4 = MonomialCost::new(4.0).unwrap();
        assert!(matches!(
            ThresholdTable::read_csv(text.as_bytes(), cost4, TableKind::PrimalXi),
            Err(SchedError::TableMismatch(_))
        ));
    }
}
