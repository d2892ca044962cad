//! Closed-form phase uncertainty of the four estimation schemes as the
//! systematic error grows, plus the shot-noise comparison.

use phase_amp::metrology::{analytic_uncertainty, sql_comparison, ErrorModel, UncertaintyScenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 3;
    let eps = 1.5e-3;
    let scenarios = [
        UncertaintyScenario::SingleQubit,
        UncertaintyScenario::Noon { n },
        UncertaintyScenario::Weak { epsilon: eps },
        UncertaintyScenario::NoonWeak { n, epsilon: eps },
    ];
    let sample_size = 1_000_000;

    print!("{:>10}", "rho(mrad)");
    for s in &scenarios {
        print!("{:>16}", s.label());
    }
    println!("   (delta phi in mrad, N = {sample_size})");
    for rho in [0.0, 1e-3, 3e-3, 1e-2, 3e-2, 0.1] {
        let model = ErrorModel::new(rho, sample_size)?;
        print!("{:>10}", rho * 1e3);
        for s in &scenarios {
            print!("{:>16.5}", analytic_uncertainty(s, &model)? * 1e3);
        }
        println!();
    }

    let ideal = ErrorModel::new(0.0, sample_size)?;
    for n in 1..=5 {
        let cmp = sql_comparison(n, &ideal, eps)?;
        println!(
            "n = {n}: {:.5} mrad vs shot-noise {:.5} mrad, beats: {}",
            cmp.noon_weak_delta_phi * 1e3,
            cmp.sql_bound * 1e3,
            cmp.beats
        );
    }
    Ok(())
}
