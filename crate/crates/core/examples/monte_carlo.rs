//! A seeded Monte Carlo comparison with per-episode streaming, checked
//! against the closed-form prediction.
//!
//!     cargo run --release --example monte_carlo

use std::sync::Arc;

use fadesched::montecarlo::{compare_report, run_experiment_with, ExperimentConfig};
use fadesched::policies::Problem;
use fadesched::thresholds::xi_table;
use fadesched::{FadingModel, MonomialCost, PolicyKind, PolicySpec, QuadratureConfig};

fn main() -> fadesched::Result<()> {
    let channel = FadingModel::Discrete {
        atoms: vec![(1.0, 0.5), (4.0, 0.5)],
    }
    .validate()?;
    let cost = MonomialCost::new(2.0)?;
    let table = Arc::new(xi_table(&channel, cost, 2, &QuadratureConfig::default())?);
    let cfg = ExperimentConfig {
        channel,
        cost,
        horizon: 2,
        problem: Problem::Primal,
        budget: 1.0,
        policies: vec![
            PolicySpec::new(PolicyKind::CausalPrimal, cost, Some(table))?,
            PolicySpec::baseline(PolicyKind::EqualBit, cost)?,
        ],
        episodes: 100_000,
        master_seed: 42,
    };

    // paired difference per episode
    let mut wins = 0usize;
    let summary = run_experiment_with(&cfg, |_, totals| {
        if totals[0] < totals[1] {
            wins += 1;
        }
        Ok(())
    })?;
    for p in &summary.policies {
        print!("{:<14} mean {:.6} ± {:.1e}", p.policy, p.mean, p.std_error);
        if let Some(pred) = p.closed_form_prediction {
            print!("  predicted {pred:.6}");
        }
        println!();
    }
    println!(
        "causal strictly cheaper in {wins} of {} episodes",
        summary.episodes
    );
    println!(
        "{}",
        serde_json::to_string_pretty(&compare_report(&summary))?
    );
    Ok(())
}
