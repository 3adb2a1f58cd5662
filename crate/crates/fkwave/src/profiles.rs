//! Closed-form ingredients: the explicit approximate profile, the odd and even
//! kernel carriers, the blend function, the mollified force and the beta
//! saturation. Every profile supports derivatives of arbitrary order.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dispersion::{Params, K0};
use crate::error::{Result, WaveError};

/// Amplitudes and decay rate of the approximate profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSpec {
    /// Weight of the exponential part.
    pub exp_amplitude: f64,
    /// Weight of the oscillatory part.
    pub trig_amplitude: f64,
    pub decay_rate: f64,
}

impl ProfileSpec {
    pub fn new(p: &Params) -> Self {
        let k0 = p.k0;
        let b2 = p.alpha / p.c2 * k0 / (2.0 - k0);
        let denom = p.c2 * (b2 + k0 * k0);
        Self {
            exp_amplitude: (p.c2 * k0 * k0 - p.alpha) / denom,
            trig_amplitude: (p.alpha + b2 * p.c2) / denom,
            decay_rate: b2.sqrt(),
        }
    }

    /// Derivative of order `d` of the x > 0 branch.
    fn positive_branch(&self, x: f64, d: u32) -> f64 {
        let e = (-self.decay_rate * x).exp();
        if d == 0 {
            self.exp_amplitude * (1.0 - e) + self.trig_amplitude * (1.0 - (K0 * x).cos())
        } else {
            -self.exp_amplitude * (-self.decay_rate).powi(d as i32) * e
                - self.trig_amplitude * trig_d(Trig::Cos, K0, x, d)
        }
    }
}

/// Approximate profile sgn(x)[A(1 - e^{-b|x|}) + B(1 - cos(k0 x))].
pub fn u_pa(x: f64, spec: &ProfileSpec) -> f64 {
    u_pa_d(x, 0, spec)
}

/// Derivative of order `d` of the approximate profile. Even-order derivatives
/// jump at the origin and take the mean value 0 there.
pub fn u_pa_d(x: f64, d: u32, spec: &ProfileSpec) -> f64 {
    if x > 0.0 {
        spec.positive_branch(x, d)
    } else if x < 0.0 {
        let sign = if d.is_multiple_of(2) { -1.0 } else { 1.0 };
        sign * spec.positive_branch(-x, d)
    } else if d % 2 == 1 {
        spec.positive_branch(0.0, d)
    } else {
        0.0
    }
}

#[derive(Clone, Copy)]
pub(crate) enum Trig {
    Sin,
    Cos,
}

/// d-th derivative of sin(kx) or cos(kx), with exact quarter-period phases.
pub(crate) fn trig_d(kind: Trig, k: f64, x: f64, d: u32) -> f64 {
    let scale = k.powi(d as i32);
    let (s, c) = (k * x).sin_cos();
    let shift = match kind {
        Trig::Sin => d % 4,
        Trig::Cos => (d + 1) % 4,
    };
    scale
        * match shift {
            0 => s,
            1 => c,
            2 => -s,
            _ => -c,
        }
}

/// d-th derivative of the polynomial sum_i coeffs[i] x^i.
pub(crate) fn poly_d(coeffs: &[f64], x: f64, d: u32) -> f64 {
    let d = d as usize;
    if d >= coeffs.len() {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in (d..coeffs.len()).rev() {
        let falling: f64 = ((i - d + 1)..=i).map(|j| j as f64).product();
        acc = acc * x + coeffs[i] * falling;
    }
    acc
}

const ODD_QUINTIC: [f64; 6] = [
    0.0,
    7.0 * K0 / 8.0,
    0.0,
    -10.0 * K0 / 8.0,
    0.0,
    3.0 * K0 / 8.0,
];
const EVEN_QUARTIC: [f64; 5] = [1.0 - K0 * K0 / 8.0, 0.0, K0 * K0 / 4.0, 0.0, -K0 * K0 / 8.0];
const BLEND_QUINTIC: [f64; 6] = [0.0, 15.0 / 16.0, 0.0, -10.0 / 16.0, 0.0, 3.0 / 16.0];

/// Odd carrier: sgn(x) cos(k0 x) for |x| >= 1, C^2 quintic inside.
pub fn u_odd(x: f64) -> f64 {
    u_odd_d(x, 0)
}

pub fn u_odd_d(x: f64, d: u32) -> f64 {
    if x.abs() < 1.0 {
        poly_d(&ODD_QUINTIC, x, d)
    } else {
        x.signum() * trig_d(Trig::Cos, K0, x, d)
    }
}

/// Even carrier: sgn(x) sin(k0 x) for |x| >= 1, C^2 quartic inside.
pub fn u_even(x: f64) -> f64 {
    u_even_d(x, 0)
}

pub fn u_even_d(x: f64, d: u32) -> f64 {
    if x.abs() < 1.0 {
        poly_d(&EVEN_QUARTIC, x, d)
    } else {
        x.signum() * trig_d(Trig::Sin, K0, x, d)
    }
}

/// Blend lambda(x) = s((x+1)/2) - 1/2 with the quintic smoothstep
/// s(t) = 6t^5 - 15t^4 + 10t^3, saturating at -+1/2 outside [-1, 1].
pub fn lambda_blend(x: f64) -> f64 {
    lambda_blend_d(x, 0)
}

pub fn lambda_blend_d(x: f64, d: u32) -> f64 {
    if x.abs() < 1.0 {
        // Expanded form of the smoothstep in x: (15x - 10x^3 + 3x^5)/16.
        poly_d(&BLEND_QUINTIC, x, d)
    } else if d == 0 {
        0.5 * x.signum()
    } else {
        0.0
    }
}

/// Mollified force psi'_eps(s) = sin(pi s / 2 eps) inside (-eps, eps), sgn(s) outside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mollifier {
    pub epsilon: f64,
}

impl Mollifier {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(WaveError::NonPositiveEpsilon(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn prime(&self, s: f64) -> f64 {
        if s.abs() < self.epsilon {
            (0.5 * PI * s / self.epsilon).sin()
        } else {
            sign(s)
        }
    }

    pub fn second(&self, s: f64) -> f64 {
        if s.abs() < self.epsilon {
            0.5 * PI / self.epsilon * (0.5 * PI * s / self.epsilon).cos()
        } else {
            0.0
        }
    }

    /// Potential psi_eps with psi_eps(0) = 0, continuous at +-eps.
    pub fn potential(&self, s: f64) -> f64 {
        let e = self.epsilon;
        let inner = 2.0 * e / PI;
        if s.abs() < e {
            inner * (1.0 - (0.5 * PI * s / e).cos())
        } else {
            s.abs() - e + inner
        }
    }

    /// d/du of the localized potential: psi'_eps(u) for |x| <= 1, sgn(x) beyond.
    pub fn partial1(&self, u: f64, x: f64) -> f64 {
        if x.abs() <= 1.0 {
            self.prime(u)
        } else {
            sign(x)
        }
    }

    /// Second u-derivative of the localized potential.
    pub fn partial11(&self, u: f64, x: f64) -> f64 {
        if x.abs() <= 1.0 {
            self.second(u)
        } else {
            0.0
        }
    }

    /// Envelope constant mu = 2^{5/2}/eps of the second-derivative bound.
    pub fn envelope_constant(&self) -> f64 {
        2f64.powf(2.5) / self.epsilon
    }
}

/// psi'_eps(s).
pub fn psi_eps_prime(s: f64, eps: f64) -> Result<f64> {
    Ok(Mollifier::new(eps)?.prime(s))
}

/// psi''_eps(s).
pub fn psi_eps_second(s: f64, eps: f64) -> Result<f64> {
    Ok(Mollifier::new(eps)?.second(s))
}

/// Partial u-derivative of the localized potential.
pub fn psi_partial1(u: f64, x: f64, eps: f64) -> Result<f64> {
    Ok(Mollifier::new(eps)?.partial1(u, x))
}

/// Sign with sgn(0) = 0.
pub fn sign(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Values below this magnitude are treated as exact zeros by [`snapped_sign`].
pub const SIGN_SNAP: f64 = 1e-12;

/// Sign that maps rounding-level values to 0.
pub fn snapped_sign(s: f64) -> f64 {
    if s.abs() < SIGN_SNAP {
        0.0
    } else {
        sign(s)
    }
}

/// Output of the beta saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Saturation {
    pub value: f64,
    pub derivative: f64,
    pub clamped: bool,
}

/// Odd C^1 saturation: identity on [-beta_max, beta_max], cubic Hermite blend
/// on [beta_max, 2 beta_max] reaching (4/3) beta_max with zero slope, constant after.
pub fn xi_saturate(beta: f64, beta_max: f64) -> Saturation {
    let a = beta.abs();
    let sgn = if beta < 0.0 { -1.0 } else { 1.0 };
    if a <= beta_max {
        return Saturation {
            value: beta,
            derivative: 1.0,
            clamped: false,
        };
    }
    if a >= 2.0 * beta_max {
        return Saturation {
            value: sgn * 4.0 / 3.0 * beta_max,
            derivative: 0.0,
            clamped: true,
        };
    }
    let s = (a - beta_max) / beta_max;
    Saturation {
        value: sgn * beta_max * (s * s * s / 3.0 - s * s + s + 1.0),
        derivative: (1.0 - s) * (1.0 - s),
        clamped: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fd(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn amplitudes_sum_to_one_and_match_closed_forms() {
        for c2 in [0.83, 0.85, 0.9, 0.95, 1.0] {
            let p = Params::new(c2).unwrap();
            let s = ProfileSpec::new(&p);
            assert!((s.exp_amplitude + s.trig_amplitude - 1.0).abs() < 1e-14);
            let k0 = p.k0;
            let b_alt = (c2 * k0 * k0 - 2.0) / (c2 * k0 * k0 - k0);
            let k_alt = 1.0 - (2.0 - k0) / (c2 * k0 * k0 - k0);
            assert!((s.trig_amplitude - b_alt).abs() < 1e-12);
            assert!((b_alt - k_alt).abs() < 1e-12);
        }
        let s = ProfileSpec::new(&Params::new(1.0).unwrap());
        assert!((s.trig_amplitude - 0.5213).abs() < 1e-4);
        assert!((s.decay_rate - 1.3079).abs() < 1e-4);
    }

    #[test]
    fn profile_is_odd_and_vanishes_at_origin() {
        let s = ProfileSpec::new(&Params::new(0.9).unwrap());
        assert_eq!(u_pa(0.0, &s), 0.0);
        for x in [0.1, 0.7, 3.3, 20.0] {
            assert!((u_pa(x, &s) + u_pa(-x, &s)).abs() < 1e-15);
            assert!((u_pa_d(x, 1, &s) - u_pa_d(-x, 1, &s)).abs() < 1e-15);
        }
    }

    #[test]
    fn profile_second_derivative_jump() {
        let p = Params::new(0.9).unwrap();
        let s = ProfileSpec::new(&p);
        let jump = u_pa_d(1e-12, 2, &s) - u_pa_d(-1e-12, 2, &s);
        assert!((jump - 2.0 * p.alpha / p.c2).abs() < 1e-9);
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        let s = ProfileSpec::new(&Params::new(0.85).unwrap());
        for x in [-2.3, -0.4, 0.6, 5.1] {
            for d in 0..3 {
                let f = |y: f64| u_pa_d(y, d, &s);
                assert!((fd(&f, x, 1e-5) - u_pa_d(x, d + 1, &s)).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn carriers_at_seams() {
        assert!(u_odd(1.0).abs() < 1e-15);
        assert!((u_odd_d(1.0, 1) + K0).abs() < 1e-15);
        assert!((u_odd(2.0) + 1.0).abs() < 1e-15);
        assert!((u_even(1.0) - 1.0).abs() < 1e-15);
        assert!(u_even_d(1.0, 1).abs() < 1e-15);
        assert!((u_even_d(1.0, 2) + K0 * K0).abs() < 1e-14);
        assert!((u_even(0.0) - (1.0 - PI * PI / 32.0)).abs() < 1e-15);
        assert!((u_even(0.0) - 0.69158).abs() < 1e-5);
        assert!((u_even(3.0) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn carriers_are_c2_across_seams() {
        let carriers: [fn(f64, u32) -> f64; 2] = [u_odd_d, u_even_d];
        for f in carriers {
            for seam in [-1.0, 1.0] {
                for d in 0..=2 {
                    let left = f(seam - 1e-9, d);
                    let right = f(seam + 1e-9, d);
                    assert!((left - right).abs() < 1e-7, "d={d} seam={seam}");
                }
                // Second-order one-sided second differences agree across the seam to O(h^2).
                let h = 1e-3;
                let g = |y: f64| f(y, 0);
                let left = (2.0 * g(seam) - 5.0 * g(seam - h) + 4.0 * g(seam - 2.0 * h)
                    - g(seam - 3.0 * h))
                    / (h * h);
                let right = (2.0 * g(seam) - 5.0 * g(seam + h) + 4.0 * g(seam + 2.0 * h)
                    - g(seam + 3.0 * h))
                    / (h * h);
                assert!((left - right).abs() < 100.0 * h * h, "{left} {right}");
            }
        }
    }

    #[test]
    fn carriers_agree_with_far_fields_exactly() {
        for x in [1.0f64, 1.5, 2.0, 7.25, -1.0, -3.5] {
            for d in 0..=2 {
                let far_odd = x.signum() * trig_d(Trig::Cos, K0, x, d);
                let far_even = x.signum() * trig_d(Trig::Sin, K0, x, d);
                assert_eq!(u_odd_d(x, d), far_odd);
                assert_eq!(u_even_d(x, d), far_even);
            }
        }
    }

    #[test]
    fn blend_matches_smoothstep() {
        for i in 0..=200 {
            let x = -1.0 + i as f64 / 100.0;
            let t: f64 = (x + 1.0) / 2.0;
            let s = 6.0 * t.powi(5) - 15.0 * t.powi(4) + 10.0 * t.powi(3);
            assert!((lambda_blend(x) - (s - 0.5)).abs() < 1e-14);
        }
        assert_eq!(lambda_blend(0.0), 0.0);
        assert_eq!(lambda_blend(1.0), 0.5);
        assert_eq!(lambda_blend(-1.0), -0.5);
        for x in [-1.0, 1.0] {
            assert!(lambda_blend_d(x - 1e-12, 1).abs() < 1e-10);
            assert!(lambda_blend_d(x + 1e-12, 2).abs() < 1e-10);
            let f = |y: f64| lambda_blend(y);
            assert!(fd(&f, x, 1e-4).abs() < 1e-6);
        }
    }

    #[test]
    fn blend_monotone() {
        let mut prev = lambda_blend(-1.5);
        for i in 1..10_000 {
            let v = lambda_blend(-1.5 + 3.0 * i as f64 / 9_999.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn mollifier_values() {
        let eps = 0.02;
        let m = Mollifier::new(eps).unwrap();
        assert_eq!(m.prime(eps), 1.0);
        assert!(m.second(eps - 1e-15).abs() < 1e-9);
        assert!((m.prime(eps / 2.0) - 0.707_106_781_186_547_5).abs() < 1e-15);
        assert!((m.second(0.0) - PI / (2.0 * eps)).abs() < 1e-12);
        assert!(PI / (2.0 * eps) <= 2.0 / eps);
        assert!(matches!(
            psi_eps_prime(0.1, 0.0),
            Err(WaveError::NonPositiveEpsilon(_))
        ));
        assert!(matches!(
            psi_eps_second(0.1, -1.0),
            Err(WaveError::NonPositiveEpsilon(_))
        ));
    }

    #[test]
    fn localized_force() {
        let eps = 0.01;
        assert_eq!(psi_partial1(-3.0, 5.0, eps).unwrap(), 1.0);
        assert_eq!(psi_partial1(2.0 * eps, 0.0, eps).unwrap(), 1.0);
        assert_eq!(psi_partial1(0.0, 0.0, eps).unwrap(), 0.0);
    }

    #[test]
    fn envelope_bound_on_grid() {
        let m = Mollifier::new(0.03).unwrap();
        let mu = m.envelope_constant();
        for i in 0..400 {
            let x = -4.0 + 8.0 * i as f64 / 399.0;
            for j in 0..200 {
                let u = -0.05 + 0.1 * j as f64 / 199.0;
                let v = (1.0 + x * x).powf(1.5) * m.partial11(u, x).abs();
                assert!(v <= mu);
            }
        }
    }

    #[test]
    fn potential_is_antiderivative() {
        let m = Mollifier::new(0.05).unwrap();
        for s in [-0.2, -0.03, 0.01, 0.049, 0.3] {
            let f = |y: f64| m.potential(y);
            assert!((fd(&f, s, 1e-6) - m.prime(s)).abs() < 1e-6);
        }
    }

    #[test]
    fn saturation_cases() {
        let bm = 0.1;
        let s = xi_saturate(0.05, bm);
        assert_eq!((s.value, s.derivative, s.clamped), (0.05, 1.0, false));
        let s = xi_saturate(0.3, bm);
        assert!(s.value.abs() <= 4.0 / 3.0 * bm && s.clamped);
        // C^1 at both joins.
        for b in [bm, 2.0 * bm] {
            let lo = xi_saturate(b - 1e-9, bm);
            let hi = xi_saturate(b + 1e-9, bm);
            assert!((lo.value - hi.value).abs() < 1e-8);
            assert!((lo.derivative - hi.derivative).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn psi_prime_odd_monotone(s in -0.1f64..0.1, ds in 0.0f64..0.05, eps in 1e-3f64..0.05) {
            let m = Mollifier::new(eps).unwrap();
            prop_assert!((m.prime(s) + m.prime(-s)).abs() < 1e-15);
            prop_assert!(m.prime(s + ds) >= m.prime(s) - 1e-15);
            prop_assert_eq!(m.prime(eps), 1.0);
            prop_assert_eq!(m.prime(-eps), -1.0);
        }

        #[test]
        fn xi_odd_bounded(beta in -1.0f64..1.0, bm in 1e-3f64..0.5) {
            let a = xi_saturate(beta, bm);
            let b = xi_saturate(-beta, bm);
            prop_assert!((a.value + b.value).abs() < 1e-15);
            prop_assert!(a.derivative >= 0.0 && a.derivative <= 1.0);
            prop_assert!(a.value.abs() <= 4.0 / 3.0 * bm + 1e-15);
        }

        #[test]
        fn carrier_tails_vanish(x in 1.0f64..50.0, d in 0u32..3) {
            let w = 1.0 + x * x;
            for y in [x, -x] {
                let odd = u_odd_d(y, d) - y.signum() * trig_d(Trig::Cos, K0, y, d);
                let even = u_even_d(y, d) - y.signum() * trig_d(Trig::Sin, K0, y, d);
                prop_assert_eq!(w * odd, 0.0);
                prop_assert_eq!(w * even, 0.0);
            }
        }

        #[test]
        fn carriers_have_parity(x in -10.0f64..10.0) {
            prop_assert!((u_odd(x) + u_odd(-x)).abs() < 1e-15);
            prop_assert!((u_even(x) - u_even(-x)).abs() < 1e-15);
            prop_assert!((lambda_blend(x) + lambda_blend(-x)).abs() < 1e-15);
        }
    }
}
