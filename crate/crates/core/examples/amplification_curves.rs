//! Tabulates the amplified phase against phi for several rotation offsets
//! and writes the plot to amplification_curves.svg.

use phase_amp::cli::{amplification_curves, Axis};
use phase_amp::plot::{Plot, Series};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let phis: Vec<f64> = (0..=12).map(|k| k as f64 * 0.5e-3).collect();
    let epsilons = [1.5e-3, 3e-3, 5e-3, 10e-3];
    let curves = amplification_curves(Axis::Phi, &phis, &epsilons)?;

    print!("{:>10}", "phi (mrad)");
    for c in &curves {
        print!("{:>12}", format!("eps={}", c.fixed * 1e3));
    }
    println!();
    for (i, phi) in phis.iter().enumerate() {
        print!("{:>10.1}", phi * 1e3);
        for c in &curves {
            print!("{:>12.2}", c.samples[i].2 * 1e3);
        }
        println!();
    }

    let mut plot = Plot::new("Amplified phase", "phi (mrad)", "phi' (mrad)");
    for (i, c) in curves.iter().enumerate() {
        let pts = c.samples.iter().map(|s| (s.0 * 1e3, s.2 * 1e3)).collect();
        plot.add(Series::line(format!("eps = {} mrad", c.fixed * 1e3), pts, i));
    }
    std::fs::write("amplification_curves.svg", plot.to_svg())?;
    println!("wrote amplification_curves.svg");
    Ok(())
}
