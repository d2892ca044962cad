//! The two amplification pipelines built from Jones elements.
//!
//! [`run_amplifier`] is the post-selected Sagnac amplifier: a retarder
//! imprints a small phase `phi` on `(|H> + |V>)/sqrt(2)`, the rotation
//! `U(pi/4 - eps)` nearly cancels the V component while magnifying its phase,
//! and the arms of a polarizing Sagnac loop rebalance the two intensities.
//! The surviving photon carries relative phase
//! `ang(sin 2eps cos phi + i sin phi)`, which is about `phi / (2 eps)`.
//!
//! [`run_standard_wv`] is the textbook weak-value scheme for comparison: a
//! polarization system weakly coupled to a two-path meter and post-selected
//! onto a nearly orthogonal polarization state.
//!
//! The Sagnac loop sorts H and V deterministically and recombines them, so
//! its two arms are carried by the polarization vector alone. The standard
//! scheme needs the path explicitly and runs on a 4-component vector.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rand_distr::{Binomial, Distribution};

use crate::error::{require_finite, Error, Result};
use crate::fitting::{ScanMode, ScanPattern, ScanPoint};
use crate::jones::{wrap_phase, Extinction, OpticalElement, PolarizationState, Projector};
use crate::rng::stream_rng;

/// How the Sagnac-arm attenuators are set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BalanceMode {
    /// Nominal setting: the H arm transmits amplitude `eps`, the V arm is open.
    Analytic,
    /// Attenuate the brighter arm until `|amp_h| == |amp_v|` exactly.
    #[default]
    ExactNumeric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplifierConfig {
    /// Initial phase imprinted by the retarder, radians.
    pub phi: f64,
    /// Deviation of the rotation angle from pi/4, radians.
    pub epsilon: f64,
    /// Polarizer in the transmitted (H) arm.
    pub extinction_transmitted: Extinction,
    /// Polarizer in the reflected (V) arm.
    pub extinction_reflected: Extinction,
    pub balance: BalanceMode,
    /// Fringe contrast applied when scanning, in (0, 1].
    pub visibility: f64,
}

impl AmplifierConfig {
    /// Ideal polarizers, exact balancing, unit visibility.
    pub fn new(phi: f64, epsilon: f64) -> Result<Self> {
        let config = Self {
            phi,
            epsilon,
            extinction_transmitted: Extinction::Ideal,
            extinction_reflected: Extinction::Ideal,
            balance: BalanceMode::ExactNumeric,
            visibility: 1.0,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_balance(mut self, balance: BalanceMode) -> Self {
        self.balance = balance;
        self
    }

    pub fn with_extinctions(mut self, transmitted: Extinction, reflected: Extinction) -> Self {
        self.extinction_transmitted = transmitted;
        self.extinction_reflected = reflected;
        self
    }

    pub fn with_visibility(mut self, visibility: f64) -> Self {
        self.visibility = visibility;
        self
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi = phi;
        self
    }

    /// Rotation angle `alpha = pi/4 - eps` of the first wave plate.
    pub fn alpha(&self) -> f64 {
        FRAC_PI_4 - self.epsilon
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("phi", self.phi)?;
        require_finite("epsilon", self.epsilon)?;
        if self.phi.abs() >= PI {
            return Err(Error::invalid("phi", format!("|phi| must be < pi, got {}", self.phi)));
        }
        if self.epsilon == 0.0 {
            return Err(Error::invalid("epsilon", "must be nonzero"));
        }
        if self.epsilon.abs() >= FRAC_PI_4 {
            return Err(Error::invalid(
                "epsilon",
                format!("|epsilon| must be < pi/4, got {}", self.epsilon),
            ));
        }
        self.extinction_transmitted.checked("extinction_transmitted")?;
        self.extinction_reflected.checked("extinction_reflected")?;
        if !(self.visibility > 0.0 && self.visibility <= 1.0) {
            return Err(Error::invalid(
                "visibility",
                format!("must lie in (0, 1], got {}", self.visibility),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplifierOutcome {
    /// Post-selected, balanced output; its squared norm is the success probability.
    pub output_state: PolarizationState,
    pub success_probability: f64,
    pub amplified_phase: f64,
    /// Amplitude transmissions (H arm, V arm) the attenuators were set to.
    pub arm_transmissions: (f64, f64),
}

impl AmplifierOutcome {
    /// `phi' / phi`; NaN at `phi = 0`.
    pub fn gain(&self, phi: f64) -> f64 {
        self.amplified_phase / phi
    }
}

/// `(|H> + e^{i phi}|V>)/sqrt(2)`, prepared as a retarder acting on `|+>`.
pub fn prepare_input(phi: f64) -> Result<PolarizationState> {
    let phi = require_finite("phi", phi)?;
    if phi.abs() > PI {
        return Err(Error::invalid("phi", format!("|phi| must be <= pi, got {phi}")));
    }
    Ok(OpticalElement::retarder(phi)?.apply(&PolarizationState::balanced(0.0)))
}

/// `ang(sin 2eps cos phi + i sin phi)`, in (-pi, pi].
pub fn closed_form_amplified_phase(phi: f64, epsilon: f64) -> Result<f64> {
    require_finite("phi", phi)?;
    require_finite("epsilon", epsilon)?;
    if epsilon == 0.0 {
        return Err(Error::invalid("epsilon", "must be nonzero"));
    }
    Ok(wrap_phase(phi.sin().atan2((2.0 * epsilon).sin() * phi.cos())))
}

pub fn run_amplifier(config: &AmplifierConfig) -> Result<AmplifierOutcome> {
    config.validate()?;

    let rotated = OpticalElement::rotation(config.alpha())?.apply(&prepare_input(config.phi)?);

    // PBS: H is transmitted, V reflected. Each arm's polarizer is aligned
    // with the light it carries.
    let zero = Complex64::new(0.0, 0.0);
    let h_arm = OpticalElement::polarizer(0.0, config.extinction_transmitted)?
        .apply(&PolarizationState::new(rotated.amp_h, zero));
    let v_arm = OpticalElement::polarizer(FRAC_PI_2, config.extinction_reflected)?
        .apply(&PolarizationState::new(zero, rotated.amp_v));

    let h_norm = h_arm.norm_sqr().sqrt();
    let v_norm = v_arm.norm_sqr().sqrt();
    if !(h_norm > 0.0) {
        return Err(Error::UndefinedPhase("H"));
    }
    if !(v_norm > 0.0) {
        return Err(Error::UndefinedPhase("V"));
    }

    let (t_h, t_v) = match config.balance {
        BalanceMode::Analytic => (config.epsilon.abs(), 1.0),
        BalanceMode::ExactNumeric => {
            let ratio = v_norm / h_norm;
            if ratio <= 1.0 {
                (ratio, 1.0)
            } else {
                (1.0, 1.0 / ratio)
            }
        }
    };
    let h_arm = OpticalElement::attenuator(t_h, t_h)?.apply(&h_arm);
    let v_arm = OpticalElement::attenuator(t_v, t_v)?.apply(&v_arm);

    let output_state = PolarizationState::new(h_arm.amp_h + v_arm.amp_h, h_arm.amp_v + v_arm.amp_v);
    Ok(AmplifierOutcome {
        output_state,
        success_probability: output_state.norm_sqr(),
        amplified_phase: output_state.relative_phase()?,
        arm_transmissions: (t_h, t_v),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardWvOutcome {
    /// Phase of path |1> relative to path |0> in the post-selected meter.
    pub meter_relative_phase: f64,
    pub success_probability: f64,
    /// First-order weak value `1/eps`.
    pub weak_value: f64,
    /// `<f|sigma_z|i> / <f|i>` from the actual amplitudes.
    pub weak_value_exact: f64,
    /// Unnormalized meter amplitudes for paths |0> and |1>.
    pub meter: [Complex64; 2],
}

/// Standard weak-value scheme on the (path x polarization) space.
///
/// The system `|i> = (|H> + |V>)/sqrt(2)` and meter `(|0> + |1>)/sqrt(2)`
/// interact through `exp(-i phi/4 sigma_z (x) sigma_z)`; the system is then
/// post-selected onto `|f> = sin(pi/4 + eps)|H> - cos(pi/4 + eps)|V>`.
pub fn run_standard_wv(phi: f64, epsilon: f64) -> Result<StandardWvOutcome> {
    require_finite("phi", phi)?;
    require_finite("epsilon", epsilon)?;
    if epsilon == 0.0 {
        return Err(Error::UndefinedPhase("meter"));
    }

    // Basis order: |0 H>, |0 V>, |1 H>, |1 V>.
    let half = Complex64::new(0.5, 0.0);
    let mut state = [half; 4];
    for (idx, amp) in state.iter_mut().enumerate() {
        let path_sign = if idx < 2 { 1.0 } else { -1.0 };
        let pol_sign = if idx % 2 == 0 { 1.0 } else { -1.0 };
        *amp *= Complex64::from_polar(1.0, -phi / 4.0 * path_sign * pol_sign);
    }

    let f = [(FRAC_PI_4 + epsilon).sin(), -(FRAC_PI_4 + epsilon).cos()];
    let meter = [
        state[0] * f[0] + state[1] * f[1],
        state[2] * f[0] + state[3] * f[1],
    ];
    let success_probability = meter[0].norm_sqr() + meter[1].norm_sqr();
    let meter_state = PolarizationState::new(meter[0], meter[1]);
    let meter_relative_phase = meter_state
        .relative_phase()
        .map_err(|_| Error::UndefinedPhase("meter"))?;

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let overlap = (f[0] + f[1]) * s;
    let sigma_z = (f[0] - f[1]) * s;
    Ok(StandardWvOutcome {
        meter_relative_phase,
        success_probability,
        weak_value: 1.0 / epsilon,
        weak_value_exact: sigma_z / overlap,
        meter,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeComparison {
    pub amplifier: AmplifierOutcome,
    pub standard: StandardWvOutcome,
    /// Amplifier success probability over standard-scheme success probability.
    pub ratio: f64,
}

/// Largest `|phi / eps|` for which both schemes are compared.
pub const WEAK_REGIME_LIMIT: f64 = 0.05;

pub fn compare_schemes(phi: f64, epsilon: f64) -> Result<SchemeComparison> {
    let config = AmplifierConfig::new(phi, epsilon)?;
    if (phi / epsilon).abs() > WEAK_REGIME_LIMIT {
        return Err(Error::invalid(
            "phi",
            format!("|phi/epsilon| must be <= {WEAK_REGIME_LIMIT}, got {}", (phi / epsilon).abs()),
        ));
    }
    let amplifier = run_amplifier(&config)?;
    let standard = run_standard_wv(phi, epsilon)?;
    Ok(SchemeComparison {
        ratio: amplifier.success_probability / standard.success_probability,
        amplifier,
        standard,
    })
}

/// Scans the analyzer phase `beta` across the normalized amplifier output.
///
/// Without `shots` the pattern holds exact detection probabilities
/// `(1 + V cos(phi' - beta))/2`. With `shots` every point is an independent
/// binomial draw from stream `index` of `seed`.
pub fn scan_pattern(
    config: &AmplifierConfig,
    beta_grid: &[f64],
    shots: Option<u64>,
    seed: Option<u64>,
) -> Result<ScanPattern> {
    if beta_grid.is_empty() {
        return Err(Error::invalid("beta_grid", "must not be empty"));
    }
    if shots == Some(0) {
        return Err(Error::invalid("shots_per_point", "must be positive"));
    }
    let seed = match (shots, seed) {
        (Some(_), None) => return Err(Error::invalid("rng_seed", "required when sampling shots")),
        (_, seed) => seed.unwrap_or(0),
    };
    let output = run_amplifier(config)?.output_state.normalized()?;

    let points = beta_grid
        .iter()
        .enumerate()
        .map(|(index, &beta)| {
            require_finite("beta_grid", beta)?;
            let ideal = Projector::analyzer(beta).probability(&output);
            let p = (0.5 + config.visibility * (ideal - 0.5)).clamp(0.0, 1.0);
            let value = match shots {
                None => p,
                Some(n) => {
                    let binomial = Binomial::new(n, p)
                        .map_err(|e| Error::invalid("probability", e.to_string()))?;
                    binomial.sample(&mut stream_rng(seed, index as u64)) as f64
                }
            };
            Ok(ScanPoint { beta, value })
        })
        .collect::<Result<Vec<_>>>()?;

    let mode = match shots {
        None => ScanMode::Exact,
        Some(shots) => ScanMode::Counts { shots },
    };
    ScanPattern::new(points, mode)
}

/// Evenly spaced analyzer phases over one full turn, starting at 0.
pub fn uniform_beta_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| 2.0 * PI * k as f64 / points as f64)
        .collect()
}

/// An experimentally reported amplified phase, kept as reference metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredPoint {
    pub phi: f64,
    pub epsilon: f64,
    pub measured_phase: f64,
}

/// Amplified phases measured on the tabletop Sagnac amplifier.
///
/// They sit above the closed-form prediction (by about 8% at phi = 1 mrad
/// and 17% at phi = 0.26 mrad); no hidden parameter is tuned to absorb this.
pub const MEASURED_POINTS: [MeasuredPoint; 3] = [
    MeasuredPoint { phi: 1.0e-3, epsilon: 1.5e-3, measured_phase: 0.347 },
    MeasuredPoint { phi: 5.0e-3, epsilon: 1.5e-3, measured_phase: 1.023 },
    MeasuredPoint { phi: 0.26e-3, epsilon: 1.5e-3, measured_phase: 0.101 },
];

/// Measured amplification gain lower bound at phi = 0.26 mrad, eps = 1.5 mrad.
pub const MEASURED_GAIN_FLOOR: f64 = 388.0;

pub fn measured_point(phi: f64, epsilon: f64) -> Option<MeasuredPoint> {
    MEASURED_POINTS
        .iter()
        .copied()
        .find(|p| (p.phi - phi).abs() < 1e-9 && (p.epsilon - epsilon).abs() < 1e-9)
}
