//! The textbook weak-value scheme next to the amplifier: same amplified
//! phase to first order, half the post-selection probability.

use phase_amp::apparatus::{compare_schemes, run_standard_wv};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let eps = 1.5e-3;
    println!("{:>10} {:>14} {:>14} {:>14} {:>8}", "phi/eps", "P amplifier", "P standard", "meter (mrad)", "ratio");
    for frac in [0.001, 0.005, 0.01, 0.02, 0.05] {
        let phi = frac * eps;
        let cmp = compare_schemes(phi, eps)?;
        println!(
            "{frac:>10} {:>14.6e} {:>14.6e} {:>14.6} {:>8.5}",
            cmp.amplifier.success_probability,
            cmp.standard.success_probability,
            cmp.standard.meter_relative_phase * 1e3,
            cmp.ratio
        );
    }

    let wv = run_standard_wv(1e-6, eps)?;
    println!("weak value: exact {:.3}, first order {:.3}", wv.weak_value_exact, wv.weak_value);

    // Outside the weak regime the comparison is refused.
    match compare_schemes(0.5 * eps, eps) {
        Ok(_) => println!("unexpected: strong regime accepted"),
        Err(e) => println!("phi/eps = 0.5: {e}"),
    }
    Ok(())
}
