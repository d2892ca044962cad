//! Jones calculus over the {H, V} polarization basis.
//!
//! States are complex 2-vectors and optical elements are 2x2 complex
//! operators. Nothing here renormalizes implicitly: after lossy elements
//! (polarizers, attenuators) the squared norm of a state is the survival
//! probability of the photon, and callers that want a unit vector must ask
//! for one with [`PolarizationState::normalized`].

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use num_complex::Complex64;

use crate::error::{require_finite, Error, Result};

/// Magnitude below which an amplitude is treated as exactly zero.
pub const AMPLITUDE_FLOOR: f64 = 1e-300;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Wraps an angle into (-pi, pi].
pub fn wrap_phase(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let mut wrapped = angle.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped -= 2.0 * PI;
    }
    wrapped
}

/// Jones vector `amp_h |H> + amp_v |V>`, possibly sub-normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    pub amp_h: Complex64,
    pub amp_v: Complex64,
}

impl PolarizationState {
    pub const fn new(amp_h: Complex64, amp_v: Complex64) -> Self {
        Self { amp_h, amp_v }
    }

    pub const fn horizontal() -> Self {
        Self::new(ONE, ZERO)
    }

    pub const fn vertical() -> Self {
        Self::new(ZERO, ONE)
    }

    /// `(|H> + e^{i phase}|V>)/sqrt(2)`.
    pub fn balanced(phase: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(Complex64::new(s, 0.0), Complex64::from_polar(s, phase))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp_h.norm_sqr() + self.amp_v.norm_sqr()
    }

    /// Returns the unit vector along this state.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if !(norm > AMPLITUDE_FLOOR) || !norm.is_finite() {
            return Err(Error::invalid("state", "cannot normalize a null state"));
        }
        Ok(self.scaled(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::new(self.amp_h * factor, self.amp_v * factor)
    }

    /// `<self|other>`
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amp_h.conj() * other.amp_h + self.amp_v.conj() * other.amp_v
    }

    /// Phase of `amp_v / amp_h`, in (-pi, pi].
    pub fn relative_phase(&self) -> Result<f64> {
        if !(self.amp_h.norm() > AMPLITUDE_FLOOR) {
            return Err(Error::UndefinedPhase("H"));
        }
        if !(self.amp_v.norm() > AMPLITUDE_FLOOR) {
            return Err(Error::UndefinedPhase("V"));
        }
        // arg(v * conj(h)) avoids the division and is scale invariant.
        let ratio = self.amp_v * self.amp_h.conj();
        Ok(wrap_phase(ratio.arg()))
    }

    /// Born-rule probability `|<target|self>|^2` of passing the projector.
    pub fn detection_probability(&self, projector: &Projector) -> f64 {
        projector.probability(self)
    }
}

/// Polarizer extinction ratio (transmitted over blocked intensity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extinction {
    Ideal,
    Ratio(f64),
}

impl Extinction {
    /// Amplitude transmission `1/sqrt(e)` of the blocked axis.
    pub fn leak_amplitude(&self) -> f64 {
        match *self {
            Extinction::Ideal => 0.0,
            Extinction::Ratio(e) => 1.0 / e.sqrt(),
        }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        match *self {
            Extinction::Ideal => Ok(()),
            Extinction::Ratio(e) if e.is_finite() && e >= 1.0 => Ok(()),
            Extinction::Ratio(e) => Err(Error::invalid(
                name,
                format!("extinction ratio must be finite and >= 1, got {e}"),
            )),
        }
    }
}

impl Extinction {
    pub(crate) fn checked(self, name: &'static str) -> Result<Self> {
        self.validate(name).map(|_| self)
    }
}

/// Which constructor built an element, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementKind {
    Retarder { delta: f64 },
    Rotation { alpha: f64 },
    HalfWave { axis: f64 },
    QuarterWave { axis: f64 },
    Polarizer { axis: f64, extinction: Extinction },
    Attenuator { t_h: f64, t_v: f64 },
    Custom,
}

/// A 2x2 complex Jones operator, stored row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalElement {
    pub matrix: [[Complex64; 2]; 2],
    pub kind: ElementKind,
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn real_matrix(m: [[f64; 2]; 2]) -> [[Complex64; 2]; 2] {
    [[real(m[0][0]), real(m[0][1])], [real(m[1][0]), real(m[1][1])]]
}

fn matmul(a: &[[Complex64; 2]; 2], b: &[[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let mut out = [[ZERO; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Frame rotation R(theta) M R(-theta) with R the active rotation
/// [[cos, -sin], [sin, cos]].
fn in_lab_frame(theta: f64, local: [[Complex64; 2]; 2]) -> [[Complex64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    let r = real_matrix([[c, -s], [s, c]]);
    let r_inv = real_matrix([[c, s], [-s, c]]);
    matmul(&matmul(&r, &local), &r_inv)
}

impl OpticalElement {
    pub fn custom(matrix: [[Complex64; 2]; 2]) -> Self {
        Self {
            matrix,
            kind: ElementKind::Custom,
        }
    }

    pub fn identity() -> Self {
        Self::custom([[ONE, ZERO], [ZERO, ONE]])
    }

    /// `U(alpha) = [[cos a, sin a], [-sin a, cos a]]`, the rotation the
    /// amplifier's first wave plate implements.
    pub fn rotation(alpha: f64) -> Result<Self> {
        let alpha = require_finite("alpha", alpha)?;
        let (s, c) = alpha.sin_cos();
        Ok(Self {
            matrix: real_matrix([[c, s], [-s, c]]),
            kind: ElementKind::Rotation { alpha },
        })
    }

    /// `diag(1, e^{i delta})`: adds `delta` to the V-relative-H phase.
    pub fn retarder(delta: f64) -> Result<Self> {
        let delta = require_finite("delta", delta)?;
        Ok(Self {
            matrix: [[ONE, ZERO], [ZERO, Complex64::from_polar(1.0, delta)]],
            kind: ElementKind::Retarder { delta },
        })
    }

    /// Physical half-wave plate with fast axis at `axis`: a reflection,
    /// `[[cos 2t, sin 2t], [sin 2t, -cos 2t]]`.
    pub fn half_wave(axis: f64) -> Result<Self> {
        let axis = require_finite("axis", axis)?;
        let (s, c) = (2.0 * axis).sin_cos();
        Ok(Self {
            matrix: real_matrix([[c, s], [s, -c]]),
            kind: ElementKind::HalfWave { axis },
        })
    }

    /// Quarter-wave plate with fast axis at `axis`.
    pub fn quarter_wave(axis: f64) -> Result<Self> {
        let axis = require_finite("axis", axis)?;
        let local = [[ONE, ZERO], [ZERO, Complex64::new(0.0, 1.0)]];
        Ok(Self {
            matrix: in_lab_frame(axis, local),
            kind: ElementKind::QuarterWave { axis },
        })
    }

    /// Linear polarizer transmitting along `axis`. In its own frame the
    /// operator is `diag(1, 1/sqrt(e))`.
    pub fn polarizer(axis: f64, extinction: Extinction) -> Result<Self> {
        let axis = require_finite("axis_angle", axis)?;
        let extinction = extinction.checked("extinction_ratio")?;
        let local = real_matrix([[1.0, 0.0], [0.0, extinction.leak_amplitude()]]);
        Ok(Self {
            matrix: in_lab_frame(axis, local),
            kind: ElementKind::Polarizer { axis, extinction },
        })
    }

    /// `diag(t_h, t_v)` with amplitude transmissions in [0, 1].
    pub fn attenuator(t_h: f64, t_v: f64) -> Result<Self> {
        for (name, t) in [("amplitude_transmission_h", t_h), ("amplitude_transmission_v", t_v)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid(name, format!("must lie in [0, 1], got {t}")));
            }
        }
        Ok(Self {
            matrix: real_matrix([[t_h, 0.0], [0.0, t_v]]),
            kind: ElementKind::Attenuator { t_h, t_v },
        })
    }

    pub fn apply(&self, state: &PolarizationState) -> PolarizationState {
        let m = &self.matrix;
        PolarizationState::new(
            m[0][0] * state.amp_h + m[0][1] * state.amp_v,
            m[1][0] * state.amp_h + m[1][1] * state.amp_v,
        )
    }

    /// The operator that applies `first`, then `self`.
    pub fn after(&self, first: &OpticalElement) -> OpticalElement {
        OpticalElement::custom(matmul(&self.matrix, &first.matrix))
    }

    pub fn adjoint(&self) -> OpticalElement {
        let m = &self.matrix;
        OpticalElement::custom([
            [m[0][0].conj(), m[1][0].conj()],
            [m[0][1].conj(), m[1][1].conj()],
        ])
    }

    /// Largest elementwise deviation of `M^dagger M` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.adjoint().after(self).matrix;
        let mut worst: f64 = 0.0;
        for (i, row) in gram.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((cell - target).norm());
            }
        }
        worst
    }

    /// Singular values, largest first.
    pub fn singular_values(&self) -> [f64; 2] {
        let g = self.adjoint().after(self).matrix;
        let trace = g[0][0].re + g[1][1].re;
        let det = (g[0][0] * g[1][1] - g[0][1] * g[1][0]).re;
        let disc = (trace * trace / 4.0 - det).max(0.0).sqrt();
        let hi = (trace / 2.0 + disc).max(0.0).sqrt();
        let lo = (trace / 2.0 - disc).max(0.0).sqrt();
        [hi, lo]
    }
}

impl Mul for OpticalElement {
    type Output = OpticalElement;

    /// Operator product: `(a * b).apply(s) == a.apply(&b.apply(s))`.
    fn mul(self, rhs: OpticalElement) -> OpticalElement {
        self.after(&rhs)
    }
}

impl Mul<PolarizationState> for OpticalElement {
    type Output = PolarizationState;

    fn mul(self, rhs: PolarizationState) -> PolarizationState {
        self.apply(&rhs)
    }
}

impl fmt::Display for PolarizationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})|H> + ({})|V>", self.amp_h, self.amp_v)
    }
}

/// Projective detection onto a normalized target state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projector {
    target: PolarizationState,
}

impl Projector {
    /// Projection onto `(|H> + e^{i beta}|V>)/sqrt(2)`.
    pub fn analyzer(beta: f64) -> Self {
        Self {
            target: PolarizationState::balanced(beta),
        }
    }

    pub fn onto(target: &PolarizationState) -> Result<Self> {
        Ok(Self {
            target: target.normalized()?,
        })
    }

    pub fn target(&self) -> &PolarizationState {
        &self.target
    }

    pub fn probability(&self, state: &PolarizationState) -> f64 {
        self.target.inner(state).norm_sqr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn states_close(a: &PolarizationState, b: &PolarizationState, tol: f64) -> bool {
        close(a.amp_h, b.amp_h, tol) && close(a.amp_v, b.amp_v, tol)
    }

    #[test]
    fn rotation_values() {
        let id = OpticalElement::rotation(0.0).unwrap();
        assert_eq!(id.matrix, OpticalElement::identity().matrix);

        let q = OpticalElement::rotation(FRAC_PI_4).unwrap();
        let h = FRAC_1_SQRT_2;
        let expect = [[h, h], [-h, h]];
        for (row, want) in q.matrix.iter().zip(expect) {
            for (got, w) in row.iter().zip(want) {
                assert!((got - real(w)).norm() < 1e-15);
            }
        }
        assert!(q.unitarity_defect() < 1e-12);

        let out = OpticalElement::rotation(FRAC_PI_2)
            .unwrap()
            .apply(&PolarizationState::horizontal());
        assert!(states_close(&out, &PolarizationState::new(ZERO, real(-1.0)), 1e-15));
    }

    #[test]
    fn rotation_amplifies_small_phase() {
        let u = OpticalElement::rotation(FRAC_PI_4 - 0.0015).unwrap();
        let out = u.apply(&PolarizationState::balanced(0.001));
        // atan2(sin 0.001, sin 0.003 cos 0.001)
        assert!((out.relative_phase().unwrap() - 0.321_751_104_397_203_9).abs() < 1e-9);

        let chain = u * OpticalElement::retarder(0.005).unwrap();
        let out = chain.apply(&PolarizationState::balanced(0.0));
        assert!((out.relative_phase().unwrap() - 1.030_381_164_771_213_7).abs() < 1e-9);
    }

    #[test]
    fn non_finite_parameters_rejected() {
        assert!(matches!(
            OpticalElement::rotation(f64::NAN),
            Err(Error::InvalidParameter { name: "alpha", .. })
        ));
        assert!(OpticalElement::retarder(f64::INFINITY).is_err());
        assert!(OpticalElement::half_wave(f64::NAN).is_err());
    }

    #[test]
    fn retarder_sets_relative_phase() {
        let plus = PolarizationState::balanced(0.0);
        assert_eq!(
            OpticalElement::retarder(0.0).unwrap().matrix,
            OpticalElement::identity().matrix
        );
        for delta in [0.001, PI] {
            let out = OpticalElement::retarder(delta).unwrap().apply(&plus);
            assert!((out.relative_phase().unwrap() - delta).abs() < 1e-12);
        }
    }

    #[test]
    fn polarizer_leakage() {
        let plus = PolarizationState::balanced(0.0);
        let ideal = OpticalElement::polarizer(0.0, Extinction::Ideal).unwrap();
        let out = ideal.apply(&plus);
        assert!(states_close(&out, &PolarizationState::new(real(FRAC_1_SQRT_2), ZERO), 1e-15));
        assert!((out.norm_sqr() - 0.5).abs() < 1e-15);
        assert!((Projector::analyzer(0.0).probability(&plus) - 1.0).abs() < 1e-15);

        let p4 = OpticalElement::polarizer(0.0, Extinction::Ratio(1e4)).unwrap();
        assert!((p4.apply(&PolarizationState::vertical()).norm_sqr() - 1e-4).abs() < 1e-16);

        let p5 = OpticalElement::polarizer(FRAC_PI_2, Extinction::Ratio(1e5)).unwrap();
        assert!((p5.apply(&PolarizationState::horizontal()).norm_sqr() - 1e-5).abs() < 1e-16);

        let sv = p5.singular_values();
        assert!((sv[0] - 1.0).abs() < 1e-12 && (sv[1] - 1e-5f64.sqrt()).abs() < 1e-12);

        assert!(OpticalElement::polarizer(0.0, Extinction::Ratio(0.5)).is_err());
    }

    #[test]
    fn attenuator_behaviour() {
        assert_eq!(
            OpticalElement::attenuator(1.0, 1.0).unwrap().matrix,
            OpticalElement::identity().matrix
        );
        let out = OpticalElement::attenuator(0.0, 1.0)
            .unwrap()
            .apply(&PolarizationState::balanced(0.0));
        assert!(states_close(&out, &PolarizationState::new(ZERO, real(FRAC_1_SQRT_2)), 1e-15));
        assert!((out.norm_sqr() - 0.5).abs() < 1e-15);
        assert!(OpticalElement::attenuator(1.1, 0.0).is_err());
        assert!(OpticalElement::attenuator(0.5, -0.1).is_err());
    }

    #[test]
    fn attenuated_post_selection_norm() {
        let eps = 0.0015;
        let rotated = OpticalElement::rotation(FRAC_PI_4 - eps)
            .unwrap()
            .apply(&PolarizationState::balanced(1e-6));
        let out = OpticalElement::attenuator(eps, 1.0).unwrap().apply(&rotated.normalized().unwrap());
        let target = 2.0 * eps * eps;
        assert!((out.norm_sqr() - target).abs() / target < 0.01);
    }

    #[test]
    fn relative_phase_cases() {
        assert!((PolarizationState::balanced(0.3).relative_phase().unwrap() - 0.3).abs() < 1e-15);
        let s = FRAC_1_SQRT_2;
        let g = PolarizationState::new(Complex64::from_polar(s, 1.0), Complex64::from_polar(s, 1.3));
        assert!((g.relative_phase().unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(
            PolarizationState::horizontal().relative_phase(),
            Err(Error::UndefinedPhase("V"))
        );
        assert_eq!(
            PolarizationState::vertical().relative_phase(),
            Err(Error::UndefinedPhase("H"))
        );
        // The branch cut maps to +pi.
        let minus = PolarizationState::new(real(1.0), real(-1.0));
        assert_eq!(minus.relative_phase().unwrap(), PI);
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(-PI), PI);
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-6.0) - (2.0 * PI - 6.0)).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI + 0.1) - (-PI + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn analyzer_extremes() {
        let plus = PolarizationState::balanced(0.0);
        assert!((plus.detection_probability(&Projector::analyzer(0.0)) - 1.0).abs() < 1e-15);
        assert!(plus.detection_probability(&Projector::analyzer(PI)) < 1e-30);
    }

    #[test]
    fn wave_plates_unitary_with_expected_determinant() {
        let hwp = OpticalElement::half_wave(0.3).unwrap();
        assert!(hwp.unitarity_defect() < 1e-12);
        let m = hwp.matrix;
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!((det - real(-1.0)).norm() < 1e-12);
        assert!(OpticalElement::quarter_wave(0.7).unwrap().unitarity_defect() < 1e-12);
    }

    #[test]
    fn quarter_and_half_wave_analyzer_projects_onto_balanced_states() {
        // A QWP at pi/4 maps (|H> + e^{i beta}|V>)/sqrt2 onto a linear state,
        // so HWP2 followed by an H polarizer selects one beta per HWP angle.
        let qwp = OpticalElement::quarter_wave(FRAC_PI_4).unwrap();
        let pol = OpticalElement::polarizer(0.0, Extinction::Ideal).unwrap();
        for theta in [0.0, 0.1, 0.4, 1.0] {
            let chain = pol * OpticalElement::half_wave(theta).unwrap() * qwp;
            // The row of the chain that survives the polarizer is <target|.
            let row = chain.matrix[0];
            let target = PolarizationState::new(row[0].conj(), row[1].conj());
            let target = target.normalized().unwrap();
            assert!((target.amp_h.norm() - FRAC_1_SQRT_2).abs() < 1e-12);
            assert!((target.amp_v.norm() - FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }

    fn arb_state() -> impl Strategy<Value = PolarizationState> {
        (0.05f64..1.0, -PI..PI, -PI..PI).prop_map(|(mix, a, b)| {
            let h = mix.sqrt();
            let v = (1.0 - mix).sqrt();
            PolarizationState::new(Complex64::from_polar(h, a), Complex64::from_polar(v, b))
        })
    }

    fn arb_unitary() -> impl Strategy<Value = OpticalElement> {
        (0usize..4, -10.0f64..10.0).prop_map(|(which, x)| match which {
            0 => OpticalElement::rotation(x).unwrap(),
            1 => OpticalElement::retarder(x).unwrap(),
            2 => OpticalElement::half_wave(x).unwrap(),
            _ => OpticalElement::quarter_wave(x).unwrap(),
        })
    }

    fn arb_lossy() -> impl Strategy<Value = OpticalElement> {
        prop_oneof![
            (-PI..PI, 1.0f64..1e6)
                .prop_map(|(a, e)| OpticalElement::polarizer(a, Extinction::Ratio(e)).unwrap()),
            (-PI..PI).prop_map(|a| OpticalElement::polarizer(a, Extinction::Ideal).unwrap()),
            (0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(h, v)| OpticalElement::attenuator(h, v).unwrap()),
        ]
    }

    fn arb_element() -> impl Strategy<Value = OpticalElement> {
        prop_oneof![arb_unitary(), arb_lossy()]
    }

    proptest! {
        #[test]
        fn unitary_elements_are_unitary(u in arb_unitary(), s in arb_state()) {
            prop_assert!(u.unitarity_defect() <= 1e-12);
            prop_assert!((u.apply(&s).norm_sqr() - s.norm_sqr()).abs() <= 1e-12);
        }

        #[test]
        fn lossy_elements_never_gain(e in arb_lossy(), s in arb_state()) {
            prop_assert!(e.apply(&s).norm_sqr() <= s.norm_sqr() + 1e-12);
            let sv = e.singular_values();
            prop_assert!(sv[0] <= 1.0 + 1e-12 && sv[1] >= -1e-12);
        }

        #[test]
        fn global_phase_invariance(s in arb_state(), gamma in -PI..PI, beta in -PI..PI) {
            let shifted = s.scaled(Complex64::from_polar(1.0, gamma));
            let a = s.relative_phase().unwrap();
            let b = shifted.relative_phase().unwrap();
            prop_assert!(wrap_phase(a - b).abs() <= 1e-12);
            let p = Projector::analyzer(beta);
            prop_assert!((p.probability(&s) - p.probability(&shifted)).abs() <= 1e-12);
        }

        #[test]
        fn composition_matches_sequential(a in arb_element(), b in arb_element(), s in arb_state()) {
            let seq = a.apply(&b.apply(&s));
            let composed = (a * b).apply(&s);
            prop_assert!(states_close(&seq, &composed, 1e-12));
        }

        #[test]
        fn balanced_born_rule(phase in -PI..PI, beta in -PI..PI) {
            let p = Projector::analyzer(beta).probability(&PolarizationState::balanced(phase));
            prop_assert!((p - 0.5 * (1.0 + (phase - beta).cos())).abs() <= 1e-12);
        }
    }
}
