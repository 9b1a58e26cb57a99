//! One episode of the optimal causal energy-minimizing scheduler next to the
//! equal-bit baseline on the same gains.
//!
//!     cargo run --example causal_episode

use std::sync::Arc;

use fadesched::montecarlo::run_episode;
use fadesched::policies::Problem;
use fadesched::thresholds::{expected_primal_cost, xi_table};
use fadesched::{
    FadingModel, MonomialCost, PolicyKind, PolicySpec, QuadratureConfig, SeededStream,
};

fn main() -> fadesched::Result<()> {
    let channel = FadingModel::reference_default().validate()?;
    let cost = MonomialCost::new(2.67)?;
    let horizon = 8;
    let bits = 4.0;
    let table = Arc::new(xi_table(
        &channel,
        cost,
        horizon,
        &QuadratureConfig::default(),
    )?);
    let causal = PolicySpec::new(PolicyKind::CausalPrimal, cost, Some(table.clone()))?;
    let equal = PolicySpec::baseline(PolicyKind::EqualBit, cost)?;

    let gains = channel.sample(SeededStream::new(2024, 0), horizon);
    let a = run_episode(&causal, Problem::Primal, &gains, bits)?;
    let b = run_episode(&equal, Problem::Primal, &gains, bits)?;

    println!("slots left   gain    causal bits  equal bits");
    for (i, g) in gains.iter().enumerate() {
        println!(
            "{:>10} {g:>7.3} {:>12.4} {:>11.4}",
            horizon - i,
            a.allocations[i],
            b.allocations[i]
        );
    }
    println!("energy: causal {:.4}, equal-bit {:.4}", a.total, b.total);
    println!(
        "expected optimal energy {:.4}",
        expected_primal_cost(bits, &table, horizon)?
    );
    Ok(())
}
