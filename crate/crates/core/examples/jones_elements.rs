//! Basic Jones calculus: wave plates, polarizers with finite extinction and
//! analyzer probabilities.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use phase_amp::jones::{Extinction, OpticalElement, PolarizationState, Projector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = PolarizationState::horizontal();

    let hwp = OpticalElement::half_wave(FRAC_PI_4 / 2.0)?;
    let diag = hwp * h;
    println!("HWP at 22.5 deg on |H>: P(diagonal) = {:.6}", diag.detection_probability(&Projector::analyzer(0.0)));

    let qwp = OpticalElement::quarter_wave(FRAC_PI_4)?;
    let circ = qwp * h;
    println!("QWP at 45 deg on |H>: relative phase = {:.6} rad", circ.relative_phase()?);

    for ratio in [100.0, 1e4, 1e6] {
        let pol = OpticalElement::polarizer(0.0, Extinction::Ratio(ratio))?;
        let leaked = (pol * PolarizationState::vertical()).norm_sqr();
        println!("polarizer, extinction {ratio:e}: V leakage {leaked:.3e}, singular values {:?}", pol.singular_values());
    }

    let chain = OpticalElement::retarder(0.3)?.after(&OpticalElement::rotation(FRAC_PI_2 / 3.0)?);
    println!("rotation then retarder: unitarity defect {:.2e}", chain.unitarity_defect());

    let state = PolarizationState::balanced(0.4);
    for beta in [0.0, 0.4, 1.0, 0.4 + std::f64::consts::PI] {
        println!("analyzer {beta:.3}: P = {:.6}", state.detection_probability(&Projector::analyzer(beta)));
    }
    Ok(())
}
