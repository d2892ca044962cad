//! Monte Carlo check of the uncertainty closed forms at the optimal phase.
//!
//! cargo run --release --example monte_carlo_oracle -- [seed]

use phase_amp::metrology::{mc_uncertainty, ErrorModel, UncertaintyScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(7u64);
    let cells = [
        (UncertaintyScenario::SingleQubit, 1e-2, 1_000_000),
        (UncertaintyScenario::Noon { n: 4 }, 1e-2, 1_000_000),
        (UncertaintyScenario::Weak { epsilon: 5e-3 }, 3e-3, 1_000_000_000),
        (UncertaintyScenario::NoonWeak { n: 2, epsilon: 1.5e-3 }, 0.0, 1_000_000_000),
    ];
    for (scenario, rho, n) in cells {
        let model = ErrorModel::new(rho, n)?;
        let r = mc_uncertainty(&scenario, &model, scenario.sweet_spot_phase(), 4000, seed)?;
        println!(
            "{:<28} analytic {:.5e}  mc {:.5e} +/- {:.1e}  ({:.2} SE, bias {:+.1e})",
            scenario.to_string(),
            r.analytic_delta_phi,
            r.mc_delta_phi,
            r.mc_standard_error,
            r.discrepancy_sigmas(),
            r.mc_bias
        );
    }
    Ok(())
}
