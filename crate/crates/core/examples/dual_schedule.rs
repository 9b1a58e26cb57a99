//! The dual problem: spend a fixed energy budget to push as many bits as
//! possible before the deadline.
//!
//!     cargo run --example dual_schedule

use std::sync::Arc;

use fadesched::montecarlo::run_episode;
use fadesched::policies::{noncausal_dual, Problem};
use fadesched::thresholds::{expected_dual_bits, zeta_table};
use fadesched::{
    FadingModel, MonomialCost, PolicyKind, PolicySpec, QuadratureConfig, SeededStream,
};

fn main() -> fadesched::Result<()> {
    let channel = FadingModel::Discrete {
        atoms: vec![(1.0, 0.5), (4.0, 0.5)],
    }
    .validate()?;
    let cost = MonomialCost::new(2.0)?;
    let horizon = 4;
    let energy = 1.0;
    let table = Arc::new(zeta_table(
        &channel,
        cost,
        horizon,
        &QuadratureConfig::default(),
    )?);
    let spec = PolicySpec::new(PolicyKind::CausalDual, cost, Some(table.clone()))?;

    let gains = channel.sample(SeededStream::new(7, 0), horizon);
    let trace = run_episode(&spec, Problem::Dual, &gains, energy)?;
    let hindsight = noncausal_dual(energy, &gains, cost)?;
    println!("gain  causal energy  hindsight energy  bits");
    for i in 0..horizon {
        println!(
            "{:>4} {:>14.4} {:>17.4} {:>5.3}",
            gains[i], trace.allocations[i], hindsight[i], trace.per_slot_cost[i]
        );
    }
    println!("bits delivered {:.4}", trace.total);
    println!(
        "expected optimum {:.4}",
        expected_dual_bits(energy, &table, horizon)?
    );
    Ok(())
}
