//! Phase-uncertainty budgets with a Gaussian systematic error.
//!
//! A run of `N` probes sees one systematic phase offset drawn from
//! `Normal(0, rho^2)` on top of binomial shot noise. The closed forms below
//! give the RMS phase error for four estimation schemes:
//!
//! | scenario     | fringe phase   | samples    | delta phi                               |
//! |--------------|----------------|------------|-----------------------------------------|
//! | single qubit | `phi`          | `N`        | `sqrt(rho^2 + 1/N)`                     |
//! | N00N         | `n phi`        | `N/n`      | `sqrt(rho^2/n^2 + 1/(nN))`              |
//! | weak         | `phi/(2 eps)`  | `2eps^2 N` | `2 sqrt(eps^2 rho^2 + 1/(2N))`          |
//! | N00N + weak  | `n phi/(2eps)` | `2eps^2N/n`| `2 sqrt(eps^2 rho^2/n^2 + 1/(2nN))`     |
//!
//! [`mc_uncertainty`] checks them by simulating the physical process with an
//! `arccos` plug-in estimator, independently of the moment algebra.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{require_finite, Error, Result};
use crate::rng::stream_rng;

/// `rho` above which the small-error expansions lose accuracy.
pub const SMALL_ERROR_LIMIT: f64 = 0.3;

/// Smallest binomial sample size a Monte Carlo cell may use.
pub const MIN_EFFECTIVE_SAMPLES: u64 = 10;

/// Agreement threshold between Monte Carlo and closed form, in standard errors.
pub const AGREEMENT_SIGMAS: f64 = 4.0;

/// Clamped trials above this fraction flag a Monte Carlo cell.
pub const CLAMP_FLAG_RATE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorModel {
    /// Standard deviation of the systematic phase error, radians.
    pub rho: f64,
    /// Total number of probe photons `N`.
    pub sample_size: u64,
}

impl ErrorModel {
    pub fn new(rho: f64, sample_size: u64) -> Result<Self> {
        require_finite("rho", rho)?;
        if rho < 0.0 {
            return Err(Error::invalid("rho", format!("must be >= 0, got {rho}")));
        }
        if sample_size == 0 {
            return Err(Error::invalid("sample_size", "must be >= 1"));
        }
        Ok(Self { rho, sample_size })
    }

    /// True when `rho` is large enough that the expansions are unreliable.
    pub fn outside_small_error_regime(&self) -> bool {
        self.rho > SMALL_ERROR_LIMIT
    }

    fn n(&self) -> f64 {
        self.sample_size as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum UncertaintyScenario {
    SingleQubit,
    Noon { n: u32 },
    Weak { epsilon: f64 },
    NoonWeak { n: u32, epsilon: f64 },
}

impl UncertaintyScenario {
    pub fn validate(&self) -> Result<()> {
        let check_n = |n: u32| {
            if n == 0 {
                Err(Error::invalid("n", "photon number must be >= 1"))
            } else {
                Ok(())
            }
        };
        let check_eps = |eps: f64| {
            require_finite("epsilon", eps)?;
            if eps == 0.0 {
                Err(Error::invalid("epsilon", "must be nonzero"))
            } else {
                Ok(())
            }
        };
        match *self {
            UncertaintyScenario::SingleQubit => Ok(()),
            UncertaintyScenario::Noon { n } => check_n(n),
            UncertaintyScenario::Weak { epsilon } => check_eps(epsilon),
            UncertaintyScenario::NoonWeak { n, epsilon } => {
                check_n(n)?;
                check_eps(epsilon)
            }
        }
    }

    pub fn photon_number(&self) -> u32 {
        match *self {
            UncertaintyScenario::Noon { n } | UncertaintyScenario::NoonWeak { n, .. } => n,
            _ => 1,
        }
    }

    pub fn epsilon(&self) -> Option<f64> {
        match *self {
            UncertaintyScenario::Weak { epsilon } | UncertaintyScenario::NoonWeak { epsilon, .. } => {
                Some(epsilon)
            }
            _ => None,
        }
    }

    /// Factor between the phase under test and the phase the fringe sees.
    pub fn phase_gain(&self) -> f64 {
        let n = self.photon_number() as f64;
        match self.epsilon() {
            Some(eps) => n / (2.0 * eps),
            None => n,
        }
    }

    pub fn effective_phase(&self, phi: f64) -> f64 {
        self.phase_gain() * phi
    }

    /// Number of detected events the fringe is estimated from, unrounded.
    pub fn effective_samples(&self, sample_size: u64) -> f64 {
        let n = self.photon_number() as f64;
        let total = sample_size as f64;
        match self.epsilon() {
            Some(eps) => 2.0 * eps * eps * total / n,
            None => total / n,
        }
    }

    /// Phase under test at which the fringe sits at pi/2.
    pub fn sweet_spot_phase(&self) -> f64 {
        FRAC_PI_2 / self.phase_gain()
    }

    pub fn label(&self) -> &'static str {
        match self {
            UncertaintyScenario::SingleQubit => "single_qubit",
            UncertaintyScenario::Noon { .. } => "noon",
            UncertaintyScenario::Weak { .. } => "weak",
            UncertaintyScenario::NoonWeak { .. } => "noon_weak",
        }
    }
}

impl fmt::Display for UncertaintyScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            UncertaintyScenario::SingleQubit => write!(f, "single_qubit"),
            UncertaintyScenario::Noon { n } => write!(f, "noon(n={n})"),
            UncertaintyScenario::Weak { epsilon } => write!(f, "weak(eps={epsilon})"),
            UncertaintyScenario::NoonWeak { n, epsilon } => {
                write!(f, "noon_weak(n={n}, eps={epsilon})")
            }
        }
    }
}

/// `(1 + cos(g phi + phi_err)) / 2` with `g` the scenario's phase gain.
pub fn detection_prob(scenario: &UncertaintyScenario, phi: f64, phi_err: f64) -> f64 {
    0.5 * (1.0 + (scenario.effective_phase(phi) + phi_err).cos())
}

fn near_multiple_of_pi(phi: f64) -> bool {
    let k = (phi / PI).round();
    (phi - k * PI).abs() <= 1e-12 * phi.abs().max(1.0)
}

/// Single-qubit uncertainty at an arbitrary phase,
/// `sqrt(rho^2 + 1/N + rho^2/(N sin^2 phi))`.
pub fn analytic_uncertainty_full(phi: f64, model: &ErrorModel) -> Result<f64> {
    require_finite("phi", phi)?;
    if near_multiple_of_pi(phi) {
        return Err(Error::Divergent { phi });
    }
    let rho2 = model.rho * model.rho;
    let n = model.n();
    Ok((rho2 + 1.0 / n + rho2 / (n * phi.sin().powi(2))).sqrt())
}

/// The same expression in the scenario's fringe variables, mapped back to
/// the phase under test.
pub fn scenario_uncertainty_full(
    scenario: &UncertaintyScenario,
    model: &ErrorModel,
    phi: f64,
) -> Result<f64> {
    scenario.validate()?;
    let effective = scenario.effective_phase(phi);
    if near_multiple_of_pi(effective) {
        return Err(Error::Divergent { phi });
    }
    let rho2 = model.rho * model.rho;
    let m = scenario.effective_samples(model.sample_size);
    let var = rho2 + 1.0 / m + rho2 / (m * effective.sin().powi(2));
    Ok(var.sqrt() / scenario.phase_gain().abs())
}

/// `arcsin(2 / sqrt(N))`, the phase whose fringe offset matches the 1/N
/// probability resolution.
pub fn minimum_measurable_phase(sample_size: u64) -> Result<f64> {
    if sample_size < 4 {
        return Err(Error::invalid("N", format!("must be >= 4, got {sample_size}")));
    }
    Ok((2.0 / (sample_size as f64).sqrt()).asin())
}

/// Closed-form RMS phase error for the scenario at its optimal phase.
pub fn analytic_uncertainty(scenario: &UncertaintyScenario, model: &ErrorModel) -> Result<f64> {
    scenario.validate()?;
    let rho2 = model.rho * model.rho;
    let big_n = model.n();
    Ok(match *scenario {
        UncertaintyScenario::SingleQubit => (rho2 + 1.0 / big_n).sqrt(),
        UncertaintyScenario::Noon { n } => {
            let n = n as f64;
            (rho2 / (n * n) + 1.0 / (n * big_n)).sqrt()
        }
        UncertaintyScenario::Weak { epsilon } => {
            2.0 * (epsilon * epsilon * rho2 + 1.0 / (2.0 * big_n)).sqrt()
        }
        UncertaintyScenario::NoonWeak { n, epsilon } => {
            let n = n as f64;
            2.0 * (epsilon * epsilon * rho2 / (n * n) + 1.0 / (2.0 * n * big_n)).sqrt()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UncertaintyReport {
    pub scenario: UncertaintyScenario,
    pub model: ErrorModel,
    pub true_phi: f64,
    /// Reference Delta phi: the closed form at the optimal phase, otherwise
    /// the full expression at `true_phi`.
    pub analytic_delta_phi: f64,
    /// Full expression at `true_phi`; `None` where it diverges.
    pub analytic_full_delta_phi: Option<f64>,
    /// RMS deviation of the estimate from `true_phi` over all trials.
    pub mc_delta_phi: f64,
    /// Jackknife standard error of `mc_delta_phi`.
    pub mc_standard_error: f64,
    /// Mean deviation (bias) and spread about that mean.
    pub mc_bias: f64,
    pub mc_std: f64,
    pub trials: usize,
    pub effective_sample_size: u64,
    /// Trials whose probability estimate hit 0 or 1 and was clamped.
    pub clamped: usize,
}

impl UncertaintyReport {
    /// `|analytic - mc| / se`.
    pub fn discrepancy_sigmas(&self) -> f64 {
        (self.analytic_delta_phi - self.mc_delta_phi).abs() / self.mc_standard_error
    }

    pub fn agrees(&self) -> bool {
        self.discrepancy_sigmas() <= AGREEMENT_SIGMAS
    }

    pub fn clamp_rate(&self) -> f64 {
        self.clamped as f64 / self.trials as f64
    }

    /// Too many clamped trials for the comparison to be meaningful.
    pub fn flagged(&self) -> bool {
        self.clamp_rate() >= CLAMP_FLAG_RATE
    }
}

struct Trial {
    deviation: f64,
    clamped: bool,
}

fn nearest_branch(principal: f64, target: f64) -> f64 {
    let two_pi = 2.0 * PI;
    [principal, -principal]
        .into_iter()
        .map(|base| base + two_pi * ((target - base) / two_pi).round())
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
        .unwrap_or(principal)
}

fn run_trial(
    scenario: &UncertaintyScenario,
    systematic: Option<&Normal<f64>>,
    samples: u64,
    true_phi: f64,
    rng: &mut impl rand::Rng,
) -> Trial {
    let phi_err = systematic.map_or(0.0, |d| d.sample(rng));
    let p = detection_prob(scenario, true_phi, phi_err).clamp(0.0, 1.0);
    let successes = Binomial::new(samples, p)
        .expect("probability clamped to [0, 1]")
        .sample(rng);

    let floor = 1.0 / samples as f64;
    let raw = successes as f64 / samples as f64;
    let estimate = raw.clamp(floor, 1.0 - floor);
    let clamped = estimate != raw;

    // The estimator does not know phi_err.
    let principal = (2.0 * estimate - 1.0).clamp(-1.0, 1.0).acos();
    let gain = scenario.phase_gain();
    let effective = nearest_branch(principal, gain * true_phi);
    Trial {
        deviation: effective / gain - true_phi,
        clamped,
    }
}

/// Jackknife standard error of `sqrt(mean(x))` over the squared deviations.
fn jackknife_rms_error(squares: &[f64]) -> f64 {
    let t = squares.len() as f64;
    let total: f64 = squares.iter().sum();
    let leave_one_out: Vec<f64> = squares
        .iter()
        .map(|s| ((total - s) / (t - 1.0)).max(0.0).sqrt())
        .collect();
    let mean = leave_one_out.iter().sum::<f64>() / t;
    let spread: f64 = leave_one_out.iter().map(|r| (r - mean).powi(2)).sum();
    ((t - 1.0) / t * spread).sqrt()
}

/// Monte Carlo estimate of the RMS phase error.
///
/// Each trial is one run: a single systematic offset, `M` binomial
/// detections at the scenario's fringe, and an `arccos` inversion taken on
/// the branch nearest the true fringe phase. Trial `i` draws from stream
/// `i` of `rng_seed`, so the result does not depend on thread scheduling.
pub fn mc_uncertainty(
    scenario: &UncertaintyScenario,
    model: &ErrorModel,
    true_phi: f64,
    trials: usize,
    rng_seed: u64,
) -> Result<UncertaintyReport> {
    scenario.validate()?;
    require_finite("true_phi", true_phi)?;
    if trials < 100 {
        return Err(Error::invalid("trials", format!("must be >= 100, got {trials}")));
    }
    let samples = scenario.effective_samples(model.sample_size).round();
    if !(samples >= MIN_EFFECTIVE_SAMPLES as f64) {
        return Err(Error::invalid(
            "sample_size",
            format!(
                "effective sample size {samples} for {scenario} is below {MIN_EFFECTIVE_SAMPLES}"
            ),
        ));
    }
    let samples = samples as u64;
    let systematic = if model.rho > 0.0 {
        Some(Normal::new(0.0, model.rho).map_err(|e| Error::invalid("rho", e.to_string()))?)
    } else {
        None
    };

    let outcomes: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(rng_seed, i as u64);
            run_trial(scenario, systematic.as_ref(), samples, true_phi, &mut rng)
        })
        .collect();

    let t = trials as f64;
    let squares: Vec<f64> = outcomes.iter().map(|o| o.deviation * o.deviation).collect();
    let mean_square = squares.iter().sum::<f64>() / t;
    let bias = outcomes.iter().map(|o| o.deviation).sum::<f64>() / t;
    let spread = outcomes
        .iter()
        .map(|o| (o.deviation - bias).powi(2))
        .sum::<f64>()
        / (t - 1.0);

    let full = scenario_uncertainty_full(scenario, model, true_phi).ok();
    let at_sweet_spot = (scenario.effective_phase(true_phi).sin().powi(2) - 1.0).abs() < 1e-9;
    let analytic_delta_phi = if at_sweet_spot {
        analytic_uncertainty(scenario, model)?
    } else {
        full.ok_or(Error::Divergent { phi: true_phi })?
    };

    Ok(UncertaintyReport {
        scenario: *scenario,
        model: *model,
        true_phi,
        analytic_delta_phi,
        analytic_full_delta_phi: full,
        mc_delta_phi: mean_square.sqrt(),
        mc_standard_error: jackknife_rms_error(&squares),
        mc_bias: bias,
        mc_std: spread.sqrt(),
        trials,
        effective_sample_size: samples,
        clamped: outcomes.iter().filter(|o| o.clamped).count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqlComparison {
    pub noon_weak_delta_phi: f64,
    /// Shot-noise bound `1/sqrt(N)`.
    pub sql_bound: f64,
    pub beats: bool,
}

/// Compares N00N + weak measurement against the standard quantum limit.
pub fn sql_comparison(n: u32, model: &ErrorModel, epsilon: f64) -> Result<SqlComparison> {
    let scenario = UncertaintyScenario::NoonWeak { n, epsilon };
    let delta = analytic_uncertainty(&scenario, model)?;
    // N * delta^2 < 1, expanded so the rho = 0 boundary at n = 2 is exact.
    let nf = n as f64;
    let scaled = 4.0 * epsilon * epsilon * model.rho * model.rho * model.n() / (nf * nf) + 2.0 / nf;
    Ok(SqlComparison {
        noon_weak_delta_phi: delta,
        sql_bound: 1.0 / model.n().sqrt(),
        beats: scaled < 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(rho: f64, n: u64) -> ErrorModel {
        ErrorModel::new(rho, n).unwrap()
    }

    #[test]
    fn detection_probabilities() {
        use UncertaintyScenario::*;
        assert_eq!(detection_prob(&SingleQubit, 0.0, 0.0), 1.0);
        assert!((detection_prob(&Noon { n: 3 }, PI / 6.0, 0.0) - 0.5).abs() < 1e-15);
        // (1 + cos(1/3))/2
        let p = detection_prob(&Weak { epsilon: 0.0015 }, 0.001, 0.0);
        assert!((p - 0.972_478_473_157_368_8).abs() < 1e-12);
        assert!((detection_prob(&SingleQubit, 0.2, 0.1) - 0.5 * (1.0 + 0.3f64.cos())).abs() < 1e-15);
    }

    #[test]
    fn full_expression_values() {
        assert!((analytic_uncertainty_full(FRAC_PI_2, &model(0.0, 100)).unwrap() - 0.1).abs() < 1e-15);
        let v = analytic_uncertainty_full(FRAC_PI_2, &model(0.01, 10_000)).unwrap();
        assert!((v - 0.014_142_489_172_702_237).abs() < 1e-12);
        let v = analytic_uncertainty_full(0.02, &model(0.01, 10_000)).unwrap();
        assert!((v - 0.015_000_111_119_589).abs() < 1e-12);
        for phi in [0.0, PI, -2.0 * PI] {
            assert!(matches!(
                analytic_uncertainty_full(phi, &model(0.01, 100)),
                Err(Error::Divergent { .. })
            ));
        }
    }

    #[test]
    fn minimum_phase() {
        assert_eq!(minimum_measurable_phase(4).unwrap(), FRAC_PI_2);
        assert!((minimum_measurable_phase(1_000_000).unwrap() - 0.002_000_001_333_335_733).abs() < 1e-12);
        assert!((minimum_measurable_phase(400).unwrap() - 0.100_167_421_161_559_8).abs() < 1e-12);
        assert!(minimum_measurable_phase(3).is_err());
    }

    #[test]
    fn closed_forms() {
        use UncertaintyScenario::*;
        let v = analytic_uncertainty(&SingleQubit, &model(0.01, 10_000)).unwrap();
        assert!((v - 0.014_142_135_623_730_95).abs() < 1e-12);
        let v = analytic_uncertainty(&Weak { epsilon: 0.0015 }, &model(0.01, 1_000_000)).unwrap();
        assert!((v - 1.414_531_724_635_400_2e-3).abs() < 1e-12);
        let v = analytic_uncertainty(&NoonWeak { n: 4, epsilon: 0.0015 }, &model(0.01, 1_000_000)).unwrap();
        assert!((v - 7.071_465_548_243_872e-4).abs() < 1e-12);
        let v = analytic_uncertainty(&SingleQubit, &model(0.01, 1_000_000)).unwrap();
        assert!((v - 0.010_049_875_621_120_89).abs() < 1e-12);
        assert!(analytic_uncertainty(&Noon { n: 0 }, &model(0.01, 10)).is_err());
        assert!(analytic_uncertainty(&Weak { epsilon: 0.0 }, &model(0.01, 10)).is_err());
    }

    #[test]
    fn limits_are_exact() {
        use UncertaintyScenario::*;
        for rho in [0.0, 0.003, 0.1] {
            for n_total in [10u64, 12_345, 1_000_000] {
                let m = model(rho, n_total);
                assert_eq!(
                    analytic_uncertainty(&Noon { n: 1 }, &m).unwrap(),
                    analytic_uncertainty(&SingleQubit, &m).unwrap()
                );
                assert_eq!(
                    analytic_uncertainty(&NoonWeak { n: 1, epsilon: 0.004 }, &m).unwrap(),
                    analytic_uncertainty(&Weak { epsilon: 0.004 }, &m).unwrap()
                );
            }
        }
    }

    #[test]
    fn error_model_validation() {
        assert!(ErrorModel::new(-0.1, 10).is_err());
        assert!(ErrorModel::new(f64::NAN, 10).is_err());
        assert!(ErrorModel::new(0.1, 0).is_err());
        assert!(model(0.4, 10).outside_small_error_regime());
        assert!(!model(0.01, 10).outside_small_error_regime());
    }

    #[test]
    fn sql_rule() {
        for n in [1, 2] {
            assert!(!sql_comparison(n, &model(0.0, 1_000_000), 0.0015).unwrap().beats);
        }
        let three = sql_comparison(3, &model(0.0, 1_000_000), 0.0015).unwrap();
        assert!(three.beats);
        assert!((three.noon_weak_delta_phi - 8.164_965_809_277_26e-4).abs() < 1e-12);
        assert_eq!(three.sql_bound, 1e-3);
        // Systematic error can cancel the advantage.
        assert!(!sql_comparison(3, &model(0.1, 1_000_000_000), 0.05).unwrap().beats);
    }

    #[test]
    fn mc_pure_shot_noise() {
        let r = mc_uncertainty(&UncertaintyScenario::SingleQubit, &model(0.0, 10_000), FRAC_PI_2, 2000, 1)
            .unwrap();
        assert!((r.analytic_delta_phi - 0.01).abs() < 1e-15);
        assert!(r.mc_standard_error > 1e-4 && r.mc_standard_error < 3e-4);
        assert!(r.agrees(), "{r:?}");
        assert_eq!(r.clamped, 0);
    }

    #[test]
    fn mc_with_systematic_error() {
        let r = mc_uncertainty(&UncertaintyScenario::SingleQubit, &model(0.01, 1_000_000), FRAC_PI_2, 2000, 2)
            .unwrap();
        assert!(r.agrees(), "{r:?}");

        let weak = UncertaintyScenario::Weak { epsilon: 0.0015 };
        let r = mc_uncertainty(&weak, &model(0.01, 100_000_000), weak.sweet_spot_phase(), 2000, 3).unwrap();
        assert_eq!(r.effective_sample_size, 450);
        assert!((r.analytic_delta_phi - 1.445_683_229_480_096e-4).abs() < 1e-12);
        assert!(r.agrees(), "{r:?}");
    }

    #[test]
    fn mc_is_deterministic() {
        let s = UncertaintyScenario::Noon { n: 3 };
        let a = mc_uncertainty(&s, &model(0.01, 100_000), s.sweet_spot_phase(), 500, 9).unwrap();
        let b = mc_uncertainty(&s, &model(0.01, 100_000), s.sweet_spot_phase(), 500, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mc_off_sweet_spot_uses_full_expression() {
        let s = UncertaintyScenario::SingleQubit;
        let m = model(0.01, 10_000);
        let r = mc_uncertainty(&s, &m, 1.0, 2000, 4).unwrap();
        assert_eq!(r.analytic_delta_phi, analytic_uncertainty_full(1.0, &m).unwrap());
        assert!(r.agrees(), "{r:?}");
    }

    #[test]
    fn mc_preconditions() {
        let s = UncertaintyScenario::Weak { epsilon: 0.0015 };
        assert!(mc_uncertainty(&s, &model(0.01, 1000), 0.001, 2000, 1).is_err());
        assert!(mc_uncertainty(&UncertaintyScenario::SingleQubit, &model(0.01, 1000), 1.0, 99, 1).is_err());
    }

    #[test]
    fn clamping_is_counted() {
        // Ten detections at the bright fringe: most trials see p-hat = 1.
        let r = mc_uncertainty(&UncertaintyScenario::SingleQubit, &model(0.0, 10), 0.05, 200, 1).unwrap();
        assert!(r.clamped > 0);
        assert!(r.flagged());
    }

    #[test]
    fn branch_selection() {
        assert!((nearest_branch(0.5, -0.4) + 0.5).abs() < 1e-15);
        assert!((nearest_branch(0.5, 2.0 * PI + 0.4) - (2.0 * PI + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn jackknife_of_constant_is_zero() {
        assert!(jackknife_rms_error(&[4.0; 50]) < 1e-12);
    }

    #[test]
    fn full_expression_dominates_simplified() {
        for rho in [0.0, 0.01, 0.1] {
            for n_total in [10u64, 1000, 1_000_000] {
                let m = model(rho, n_total);
                let simple = analytic_uncertainty(&UncertaintyScenario::SingleQubit, &m).unwrap();
                for k in 1..50 {
                    let phi = k as f64 * 0.06;
                    assert!(analytic_uncertainty_full(phi, &m).unwrap() >= simple);
                }
                let at_peak = analytic_uncertainty_full(FRAC_PI_2, &m).unwrap();
                let extra = (at_peak * at_peak - simple * simple - rho * rho / n_total as f64).abs();
                assert!(extra < 1e-15);
            }
        }
    }

    fn arb_scenario() -> impl Strategy<Value = UncertaintyScenario> {
        prop_oneof![
            Just(UncertaintyScenario::SingleQubit),
            (1u32..10).prop_map(|n| UncertaintyScenario::Noon { n }),
            (1e-4f64..0.1).prop_map(|epsilon| UncertaintyScenario::Weak { epsilon }),
            (1u32..10, 1e-4f64..0.1).prop_map(|(n, epsilon)| UncertaintyScenario::NoonWeak { n, epsilon }),
        ]
    }

    proptest! {
        #[test]
        fn monotone_in_n_and_rho(s in arb_scenario(), rho in 0.0f64..0.3, n_total in 1u64..1_000_000_000) {
            let base = analytic_uncertainty(&s, &model(rho, n_total)).unwrap();
            prop_assert!(analytic_uncertainty(&s, &model(rho, n_total * 2)).unwrap() <= base);
            prop_assert!(analytic_uncertainty(&s, &model(rho + 0.01, n_total)).unwrap() >= base);
        }

        #[test]
        fn noon_strictly_improves_with_n(rho in 0.0f64..0.3, n_total in 1u64..1_000_000_000, n in 1u32..20) {
            let m = model(rho, n_total);
            let a = analytic_uncertainty(&UncertaintyScenario::Noon { n }, &m).unwrap();
            let b = analytic_uncertainty(&UncertaintyScenario::Noon { n: n + 1 }, &m).unwrap();
            prop_assert!(b < a);
        }

        #[test]
        fn weak_crossover(eps in 1e-4f64..0.3, rho in 0.0f64..0.3, n_total in 1u64..100_000_000) {
            let m = model(rho, n_total);
            let weak = analytic_uncertainty(&UncertaintyScenario::Weak { epsilon: eps }, &m).unwrap();
            let single = analytic_uncertainty(&UncertaintyScenario::SingleQubit, &m).unwrap();
            let nf = n_total as f64;
            let lhs = 4.0 * eps * eps * rho * rho + 2.0 / nf;
            let rhs = rho * rho + 1.0 / nf;
            prop_assume!((lhs - rhs).abs() > 1e-12 * rhs);
            prop_assert_eq!(weak < single, lhs < rhs);
        }
    }
}
