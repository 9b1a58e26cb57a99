//! Fading models: validation, expectations by quadrature and seeded sampling.
//!
//!     cargo run --example channel_expectations

use fadesched::quadrature::integrate;
use fadesched::{FadingModel, QuadratureConfig, SeededStream};

fn main() -> fadesched::Result<()> {
    let cfg = QuadratureConfig::default();
    let models = [
        FadingModel::Deterministic { c: 2.0 },
        FadingModel::Discrete {
            atoms: vec![(1.0, 1.0), (4.0, 3.0)],
        },
        FadingModel::reference_default(),
        FadingModel::TabulatedPdf {
            grid: vec![(0.1, 0.0), (1.0, 1.0), (3.0, 0.0)],
        },
    ];
    for model in &models {
        let ch = model.validate_with(&cfg)?;
        let mean = ch.expect(|g| g, &cfg)?;
        let draws = ch.sample(SeededStream::new(3, 0), 100_000);
        let sample_mean = draws.iter().sum::<f64>() / draws.len() as f64;
        println!(
            "{}\n  E[g] = {mean:.5}  sample {sample_mean:.5}  E[1/g] = {:.5}  median {:.5}",
            serde_json::to_string(model)?,
            ch.inverse_moment(),
            ch.quantile(0.5)
        );
    }

    for bad in [
        FadingModel::TruncatedExponential {
            threshold: 0.0,
            rate: 1.0,
        },
        FadingModel::Discrete {
            atoms: vec![(0.0, 1.0)],
        },
    ] {
        println!(
            "{} -> {}",
            serde_json::to_string(&bad)?,
            bad.validate().unwrap_err()
        );
    }

    let area = integrate(|u: f64| -u.ln(), 0.0, 1.0, &cfg)?;
    println!("integral of -ln u over (0, 1] = {area:.14}");
    Ok(())
}
