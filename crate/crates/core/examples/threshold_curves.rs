//! Threshold tables for the truncated exponential channel at several cost
//! orders, plus a CSV round trip.
//!
//!     cargo run --example threshold_curves

use fadesched::thresholds::{limit_gap, xi_table, zeta_table};
use fadesched::{FadingModel, MonomialCost, QuadratureConfig, TableKind, ThresholdTable};

fn main() -> fadesched::Result<()> {
    let channel = FadingModel::reference_default().validate()?;
    let cfg = QuadratureConfig::default();
    println!("E[1/g] = {:.6}", channel.inverse_moment());

    let horizon = 10;
    println!("\n  n    t      xi_t          root_t   gap");
    for n in [2.0, 2.67, 5.0, 100.0] {
        let cost = MonomialCost::new(n)?;
        let xi = xi_table(&channel, cost, horizon, &cfg)?;
        for t in [1, 2, 5, 10] {
            println!(
                "{n:>6} {t:>3} {:>12.6e} {:>8.4} {:>6.4}",
                xi.value(t)?,
                xi.root(t)?,
                limit_gap(&xi, t)?
            );
        }
    }

    let cost = MonomialCost::new(2.0)?;
    let zeta = zeta_table(&channel, cost, horizon, &cfg)?;
    println!("\nzeta at n = 2: {:?}", &zeta.values[..4]);

    let mut buf = Vec::new();
    zeta.write_csv(&mut buf)?;
    let back = ThresholdTable::read_csv(&buf[..], cost, TableKind::DualZeta)?;
    assert_eq!(back.values, zeta.values);
    println!("csv round trip ok ({} bytes)", buf.len());
    Ok(())
}
