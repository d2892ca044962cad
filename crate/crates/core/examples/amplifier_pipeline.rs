//! Walks one setting through the amplifier and compares the result with the
//! closed form and with the small-angle gain 1/(2 eps).
//!
//! cargo run --example amplifier_pipeline -- [phi_mrad] [eps_mrad]

use phase_amp::apparatus::{closed_form_amplified_phase, prepare_input, run_amplifier, AmplifierConfig, BalanceMode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>());
    let phi = args.next().transpose()?.unwrap_or(1.0) * 1e-3;
    let eps = args.next().transpose()?.unwrap_or(1.5) * 1e-3;

    let input = prepare_input(phi)?;
    println!("input relative phase    {:.6} mrad", input.relative_phase()? * 1e3);

    for balance in [BalanceMode::ExactNumeric, BalanceMode::Analytic] {
        let config = AmplifierConfig::new(phi, eps)?.with_balance(balance);
        let out = run_amplifier(&config)?;
        println!(
            "{balance:?}: phi' = {:.4} mrad, P = {:.4e}, arm transmissions = ({:.4e}, {:.4e})",
            out.amplified_phase * 1e3,
            out.success_probability,
            out.arm_transmissions.0,
            out.arm_transmissions.1
        );
    }
    let closed = closed_form_amplified_phase(phi, eps)?;
    println!("closed form             {:.4} mrad", closed * 1e3);
    println!("gain                    {:.2} (1/(2 eps) = {:.2})", closed / phi, 1.0 / (2.0 * eps));
    println!("2 eps^2                 {:.4e}", 2.0 * eps * eps);
    Ok(())
}
