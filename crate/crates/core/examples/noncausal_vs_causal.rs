//! How much knowing the future is worth: non-causal, causal and the two
//! baselines on identical gain paths.
//!
//!     cargo run --release --example noncausal_vs_causal

use std::sync::Arc;

use fadesched::montecarlo::{compare_report, run_experiment, ExperimentConfig};
use fadesched::policies::Problem;
use fadesched::thresholds::xi_table;
use fadesched::{FadingModel, MonomialCost, PolicyKind, PolicySpec, QuadratureConfig};

fn main() -> fadesched::Result<()> {
    let channel = FadingModel::reference_default().validate()?;
    for n in [2.0, 5.0, 20.0] {
        let cost = MonomialCost::new(n)?;
        let horizon = 10;
        let table = Arc::new(xi_table(
            &channel,
            cost,
            horizon,
            &QuadratureConfig::default(),
        )?);
        let cfg = ExperimentConfig {
            channel: channel.clone(),
            cost,
            horizon,
            problem: Problem::Primal,
            budget: 1.0,
            policies: vec![
                PolicySpec::baseline(PolicyKind::NonCausalPrimal, cost)?,
                PolicySpec::new(PolicyKind::CausalPrimal, cost, Some(table))?,
                PolicySpec::baseline(PolicyKind::EqualBit, cost)?,
                PolicySpec::baseline(PolicyKind::DeadlineFlush, cost)?,
            ],
            episodes: 20_000,
            master_seed: 1,
        };
        let summary = run_experiment(&cfg)?;
        let ranking = compare_report(&summary);
        println!("n = {n}");
        for e in &ranking.entries {
            println!(
                "  {}. {:<18} {:.4e} ± {:.1e}",
                e.rank, e.policy, e.mean, e.std_error
            );
        }
        let causal = summary.get(PolicyKind::CausalPrimal).unwrap();
        let oracle = summary.get(PolicyKind::NonCausalPrimal).unwrap();
        println!(
            "  causal / non-causal energy = {:.3}",
            causal.mean / oracle.mean
        );
    }
    Ok(())
}
