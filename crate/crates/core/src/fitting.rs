//! Phase recovery from scanned fringes.
//!
//! The analyzer phase `beta` is the controlled variable and the fringe has
//! unit frequency in it, so a pattern is fitted with the linear model
//! `c0 + c1 cos(beta) + c2 sin(beta)`. The fringe phase is `atan2(c2, c1)`,
//! its amplitude `hypot(c1, c2)` and its visibility `amplitude / c0`.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::apparatus::{run_amplifier, scan_pattern, AmplifierConfig};
use crate::error::{Error, Result};
use crate::jones::wrap_phase;

/// Largest normal-matrix condition number accepted by the fit.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScanMode {
    /// Values are detection probabilities.
    Exact,
    /// Values are detector counts out of `shots` trials per point.
    Counts { shots: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    pub beta: f64,
    pub value: f64,
}

/// A sampled fringe over analyzer phases.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPattern {
    points: Vec<ScanPoint>,
    mode: ScanMode,
}

impl ScanPattern {
    /// Requires at least 3 distinct phases spanning more than pi.
    pub fn new(points: Vec<ScanPoint>, mode: ScanMode) -> Result<Self> {
        if points.iter().any(|p| !p.beta.is_finite() || !p.value.is_finite()) {
            return Err(Error::invalid("points", "all phases and values must be finite"));
        }
        if let ScanMode::Counts { shots } = mode {
            if shots == 0 {
                return Err(Error::invalid("shots_per_point", "must be positive"));
            }
            if let Some(p) = points.iter().find(|p| p.value < 0.0 || p.value > shots as f64) {
                return Err(Error::invalid(
                    "points",
                    format!("count {} outside [0, {shots}]", p.value),
                ));
            }
        }

        let mut betas: Vec<f64> = points.iter().map(|p| p.beta).collect();
        betas.sort_by(f64::total_cmp);
        betas.dedup();
        if betas.len() < 3 {
            return Err(Error::DegenerateGrid(format!(
                "need at least 3 distinct analyzer phases, got {}",
                betas.len()
            )));
        }
        let span = betas[betas.len() - 1] - betas[0];
        if span <= PI {
            return Err(Error::DegenerateGrid(format!(
                "analyzer phases span {span:.6} rad, need more than pi"
            )));
        }
        Ok(Self { points, mode })
    }

    pub fn points(&self) -> &[ScanPoint] {
        &self.points
    }

    pub fn mode(&self) -> ScanMode {
        self.mode
    }

    /// Values converted to probabilities (counts / shots).
    pub fn probabilities(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let scale = match self.mode {
            ScanMode::Exact => 1.0,
            ScanMode::Counts { shots } => 1.0 / shots as f64,
        };
        self.points.iter().map(move |p| (p.beta, p.value * scale))
    }
}

/// Per-point weights of the least-squares problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    #[default]
    Uniform,
    /// Inverse binomial variance from a first uniform pass. Counts only.
    Binomial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub offset: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub visibility: f64,
    pub residual_rms: f64,
    /// Covariance of `(c0, c1, c2)`.
    pub covariance: [[f64; 3]; 3],
    pub coefficients: [f64; 3],
}

impl FitResult {
    pub fn evaluate(&self, beta: f64) -> f64 {
        let [c0, c1, c2] = self.coefficients;
        c0 + c1 * beta.cos() + c2 * beta.sin()
    }

    fn propagate(&self, gradient: [f64; 3]) -> f64 {
        let mut var = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                var += gradient[i] * self.covariance[i][j] * gradient[j];
            }
        }
        var.max(0.0).sqrt()
    }

    /// Standard deviation of the fitted phase (delta method).
    pub fn phase_std(&self) -> f64 {
        let [_, c1, c2] = self.coefficients;
        let a2 = c1 * c1 + c2 * c2;
        self.propagate([0.0, -c2 / a2, c1 / a2])
    }

    pub fn amplitude_std(&self) -> f64 {
        let [_, c1, c2] = self.coefficients;
        let a = self.amplitude;
        self.propagate([0.0, c1 / a, c2 / a])
    }

    pub fn visibility_std(&self) -> f64 {
        let [c0, c1, c2] = self.coefficients;
        let a = self.amplitude;
        self.propagate([-a / (c0 * c0), c1 / (a * c0), c2 / (a * c0)])
    }
}

fn basis(beta: f64) -> Vector3<f64> {
    Vector3::new(1.0, beta.cos(), beta.sin())
}

fn condition_number(normal: &Matrix3<f64>) -> f64 {
    let eig = SymmetricEigen::new(*normal).eigenvalues;
    let max = eig.iter().copied().fold(f64::MIN, f64::max);
    let min = eig.iter().copied().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

struct Solution {
    coefficients: Vector3<f64>,
    normal_inverse: Matrix3<f64>,
}

fn solve_weighted(data: &[(f64, f64)], weights: &[f64]) -> Result<Solution> {
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (&(beta, y), &w) in data.iter().zip(weights) {
        let x = basis(beta);
        normal += w * x * x.transpose();
        rhs += w * y * x;
    }
    let cond = condition_number(&normal);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::DegenerateGrid(format!(
            "normal matrix condition number {cond:.3e} exceeds {MAX_CONDITION:.0e}"
        )));
    }
    let chol = normal
        .cholesky()
        .ok_or_else(|| Error::DegenerateGrid("normal matrix is not positive definite".into()))?;
    Ok(Solution {
        coefficients: chol.solve(&rhs),
        normal_inverse: chol.inverse(),
    })
}

fn to_array(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = m[(i, j)];
        }
    }
    out
}

fn binomial_variance(fitted: f64, shots: u64) -> f64 {
    let floor = 1.0 / shots as f64;
    let q = fitted.clamp(floor, 1.0 - floor);
    q * (1.0 - q) / shots as f64
}

/// Unweighted least-squares fit of a unit-frequency sinusoid.
pub fn fit_sinusoid(pattern: &ScanPattern) -> Result<FitResult> {
    fit_sinusoid_with(pattern, Weighting::Uniform)
}

/// Least-squares sinusoid fit with the chosen weighting.
///
/// Probability patterns get the residual-variance covariance
/// `s^2 (X^T X)^-1`. Count patterns get the covariance implied by binomial
/// shot noise at the fitted fringe: the sandwich
/// `(X^T X)^-1 X^T diag(var) X (X^T X)^-1` for uniform weights, or
/// `(X^T W X)^-1` with `W = 1/var` for binomial weights.
pub fn fit_sinusoid_with(pattern: &ScanPattern, weighting: Weighting) -> Result<FitResult> {
    let data: Vec<(f64, f64)> = pattern.probabilities().collect();
    let n = data.len();
    let uniform = vec![1.0; n];
    let first = solve_weighted(&data, &uniform)?;

    let fitted_at = |coef: &Vector3<f64>, beta: f64| basis(beta).dot(coef);

    let (solution, covariance) = match (pattern.mode(), weighting) {
        (ScanMode::Exact, Weighting::Uniform) => {
            let rss: f64 = data
                .iter()
                .map(|&(beta, y)| (y - fitted_at(&first.coefficients, beta)).powi(2))
                .sum();
            let dof = n.saturating_sub(3);
            let s2 = if dof == 0 { 0.0 } else { rss / dof as f64 };
            let cov = first.normal_inverse * s2;
            (first, cov)
        }
        (ScanMode::Exact, Weighting::Binomial) => {
            return Err(Error::invalid(
                "weighting",
                "binomial weights need a counts pattern",
            ));
        }
        (ScanMode::Counts { shots }, Weighting::Uniform) => {
            let mut meat = Matrix3::zeros();
            for &(beta, _) in &data {
                let x = basis(beta);
                let var = binomial_variance(fitted_at(&first.coefficients, beta), shots);
                meat += var * x * x.transpose();
            }
            let cov = first.normal_inverse * meat * first.normal_inverse;
            (first, cov)
        }
        (ScanMode::Counts { shots }, Weighting::Binomial) => {
            let weights: Vec<f64> = data
                .iter()
                .map(|&(beta, _)| 1.0 / binomial_variance(fitted_at(&first.coefficients, beta), shots))
                .collect();
            let second = solve_weighted(&data, &weights)?;
            let cov = second.normal_inverse;
            (second, cov)
        }
    };

    let c = solution.coefficients;
    let residual_rms = (data
        .iter()
        .map(|&(beta, y)| (y - fitted_at(&c, beta)).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let amplitude = c[1].hypot(c[2]);
    // Symmetrize against rounding in the triple product.
    let covariance = (covariance + covariance.transpose()) * 0.5;
    Ok(FitResult {
        offset: c[0],
        amplitude,
        phase: wrap_phase(c[2].atan2(c[1])),
        visibility: amplitude / c[0],
        residual_rms,
        covariance: to_array(&covariance),
        coefficients: [c[0], c[1], c[2]],
    })
}

/// `a.phase - b.phase`, wrapped to (-pi, pi].
pub fn phase_between(a: &FitResult, b: &FitResult) -> f64 {
    wrap_phase(a.phase - b.phase)
}

/// Reference (phi = 0) and signal scans with their fits.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialScan {
    pub reference: ScanPattern,
    pub signal: ScanPattern,
    pub reference_fit: FitResult,
    pub signal_fit: FitResult,
    /// Fitted signal phase minus fitted reference phase.
    pub phase_shift: f64,
}

/// Scans the amplifier at `phi = 0` and at `config.phi`, fits both fringes
/// and differences their phases. With shots, the reference uses stream
/// family `seed` and the signal `seed + 1`.
pub fn measure_amplified_phase(
    config: &AmplifierConfig,
    beta_grid: &[f64],
    shots: Option<u64>,
    seed: Option<u64>,
) -> Result<DifferentialScan> {
    run_amplifier(config)?;
    let reference_config = config.with_phi(0.0);
    let reference = scan_pattern(&reference_config, beta_grid, shots, seed)?;
    let signal = scan_pattern(config, beta_grid, shots, seed.map(|s| s.wrapping_add(1)))?;
    let reference_fit = fit_sinusoid(&reference)?;
    let signal_fit = fit_sinusoid(&signal)?;
    Ok(DifferentialScan {
        phase_shift: phase_between(&signal_fit, &reference_fit),
        reference,
        signal,
        reference_fit,
        signal_fit,
    })
}

pub fn extract_amplified_phase(
    config: &AmplifierConfig,
    beta_grid: &[f64],
    shots: Option<u64>,
    seed: Option<u64>,
) -> Result<f64> {
    Ok(measure_amplified_phase(config, beta_grid, shots, seed)?.phase_shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apparatus::{closed_form_amplified_phase, uniform_beta_grid};
    use proptest::prelude::*;

    fn synthetic(phase: f64, visibility: f64, offset: f64, grid: &[f64]) -> ScanPattern {
        let points = grid
            .iter()
            .map(|&beta| ScanPoint {
                beta,
                value: offset * (1.0 + visibility * (phase - beta).cos()),
            })
            .collect();
        ScanPattern::new(points, ScanMode::Exact).unwrap()
    }

    #[test]
    fn noiseless_recovery() {
        let fit = fit_sinusoid(&synthetic(0.3, 1.0, 0.5, &uniform_beta_grid(24))).unwrap();
        assert!((fit.phase - 0.3).abs() < 1e-9);
        assert!((fit.amplitude - 0.5).abs() < 1e-9);
        assert!((fit.offset - 0.5).abs() < 1e-9);
        assert!(fit.residual_rms < 1e-9);

        let fit = fit_sinusoid(&synthetic(0.321_751_104_397_203_9, 0.8, 0.5, &uniform_beta_grid(36)))
            .unwrap();
        assert!((fit.phase - 0.321_751_104_397_203_9).abs() < 1e-9);
        assert!((fit.visibility - 0.8).abs() < 1e-9);
    }

    #[test]
    fn covariance_is_psd() {
        let config = AmplifierConfig::new(0.005, 0.0015).unwrap();
        let grid = uniform_beta_grid(36);
        let pattern = scan_pattern(&config, &grid, Some(10_000), Some(5)).unwrap();
        for weighting in [Weighting::Uniform, Weighting::Binomial] {
            let fit = fit_sinusoid_with(&pattern, weighting).unwrap();
            let cov = Matrix3::from_fn(|i, j| fit.covariance[i][j]);
            let eig = SymmetricEigen::new(cov).eigenvalues;
            assert!(eig.iter().all(|&e| e >= -1e-18), "{eig:?}");
            assert!((fit.phase - 1.030_381_164_771_213_7).abs() <= 3.0 * fit.phase_std());
        }
    }

    #[test]
    fn degenerate_grids_rejected() {
        let point = |beta| ScanPoint { beta, value: 0.5 };
        assert!(matches!(
            ScanPattern::new(vec![point(0.0), point(1.0)], ScanMode::Exact),
            Err(Error::DegenerateGrid(_))
        ));
        assert!(matches!(
            ScanPattern::new(vec![point(0.0), point(0.0), point(1.0)], ScanMode::Exact),
            Err(Error::DegenerateGrid(_))
        ));
        assert!(matches!(
            ScanPattern::new(vec![point(0.0), point(1.0), point(2.0)], ScanMode::Exact),
            Err(Error::DegenerateGrid(_))
        ));
        // Aliased grid: beta and beta + 2pi give identical rows.
        let aliased = vec![point(0.0), point(2.0 * PI), point(4.0 * PI)];
        let pattern = ScanPattern::new(aliased, ScanMode::Exact).unwrap();
        assert!(matches!(fit_sinusoid(&pattern), Err(Error::DegenerateGrid(_))));
    }

    #[test]
    fn count_validation() {
        let pts = uniform_beta_grid(6)
            .into_iter()
            .map(|beta| ScanPoint { beta, value: 11.0 })
            .collect::<Vec<_>>();
        assert!(ScanPattern::new(pts.clone(), ScanMode::Counts { shots: 10 }).is_err());
        assert!(ScanPattern::new(pts.clone(), ScanMode::Counts { shots: 0 }).is_err());
        assert!(ScanPattern::new(pts, ScanMode::Counts { shots: 20 }).is_ok());
        let exact = synthetic(0.1, 1.0, 0.5, &uniform_beta_grid(8));
        assert!(fit_sinusoid_with(&exact, Weighting::Binomial).is_err());
    }

    #[test]
    fn phase_differences() {
        let with_phase = |phase| {
            let mut fit = fit_sinusoid(&synthetic(0.0, 1.0, 0.5, &uniform_beta_grid(8))).unwrap();
            fit.phase = phase;
            fit
        };
        assert!((phase_between(&with_phase(0.347), &with_phase(0.0)) - 0.347).abs() < 1e-15);
        let wrapped = phase_between(&with_phase(-3.0), &with_phase(3.0));
        assert!((wrapped - (2.0 * PI - 6.0)).abs() < 1e-12);
        assert!((wrapped - 0.28319).abs() < 1e-5);
        assert_eq!(phase_between(&with_phase(1.2), &with_phase(1.2)), 0.0);
    }

    #[test]
    fn differential_extraction() {
        let grid = uniform_beta_grid(36);
        for &(phi, eps) in &[(0.001, 0.0015), (0.005, 0.0015), (0.0, 0.0015), (0.0, 0.02)] {
            let config = AmplifierConfig::new(phi, eps).unwrap();
            let got = extract_amplified_phase(&config, &grid, None, None).unwrap();
            let expected = closed_form_amplified_phase(phi, eps).unwrap();
            assert!((got - expected).abs() < 1e-9, "phi={phi} got={got}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]

        #[test]
        fn round_trip(phase in -3.1f64..3.1, vis in 0.05f64..1.0, offset in 0.1f64..2.0, n in 5usize..60) {
            let fit = fit_sinusoid(&synthetic(phase, vis, offset, &uniform_beta_grid(n))).unwrap();
            prop_assert!(wrap_phase(fit.phase - phase).abs() <= 1e-9);
            prop_assert!((fit.visibility - vis).abs() <= 1e-9);
            prop_assert!((fit.offset - offset).abs() <= 1e-9);
            prop_assert!(fit.residual_rms <= 1e-9);
        }

        #[test]
        fn shift_equivariance(phase in -3.0f64..3.0, shift in -3.0f64..3.0) {
            let grid = uniform_beta_grid(36);
            let base = fit_sinusoid(&synthetic(phase, 0.9, 0.5, &grid)).unwrap();
            // Same samples attributed to analyzer phases shifted by `shift`.
            let shifted_points = synthetic(phase, 0.9, 0.5, &grid)
                .points()
                .iter()
                .map(|p| ScanPoint { beta: p.beta + shift, value: p.value })
                .collect();
            let shifted = fit_sinusoid(&ScanPattern::new(shifted_points, ScanMode::Exact).unwrap()).unwrap();
            prop_assert!(wrap_phase(shifted.phase - base.phase - shift).abs() <= 1e-9);
        }
    }
}
