//! Brute-force backward induction against the closed-form value functions.
//!
//!     cargo run --release --example dp_oracle

use fadesched::oracle::{dp_solve_dual, dp_solve_primal, one_step_argmin, GridSpec};
use fadesched::thresholds::{expected_dual_bits, expected_primal_cost, xi_table, zeta_table};
use fadesched::{FadingModel, MonomialCost, QuadratureConfig};

fn main() -> fadesched::Result<()> {
    let channel = FadingModel::Discrete {
        atoms: vec![(1.0, 0.5), (4.0, 0.5)],
    }
    .validate()?;
    let cost = MonomialCost::new(2.67)?;
    let horizon = 5;
    let cfg = QuadratureConfig::default();
    let xi = xi_table(&channel, cost, horizon, &cfg)?;
    let zeta = zeta_table(&channel, cost, horizon, &cfg)?;

    for points in [64, 128, 256] {
        let grid = GridSpec::square(points, 16, 1.0);
        let primal = dp_solve_primal(&channel, cost, horizon, grid)?;
        let dual = dp_solve_dual(&channel, cost, horizon, grid)?;
        println!("grid {points}");
        for t in 1..=horizon {
            let (jp, jc) = (
                primal.expected_value(t, 1.0)?,
                expected_primal_cost(1.0, &xi, t)?,
            );
            let (wp, wc) = (
                dual.expected_value(t, 1.0)?,
                expected_dual_bits(1.0, &zeta, t)?,
            );
            println!(
                "  t={t}  energy dp {jp:.6} closed {jc:.6} ({:+.1e})   bits dp {wp:.6} closed {wc:.6} ({:+.1e})",
                jp / jc - 1.0,
                wp / wc - 1.0
            );
        }
    }

    let b = one_step_argmin(1.0, 4.0, cost, xi.value(2)?)?;
    println!("one-step argmin with 1 bit, g = 4, three slots left: {b:.12}");
    Ok(())
}
