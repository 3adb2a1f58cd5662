//! Dispersion function of the linearized chain, the speed/stiffness coupling
//! and the constants of the weighted inversion bound.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::error::{Result, WaveError};

/// Kernel wavenumber: the positive root of the dispersion function.
pub const K0: f64 = FRAC_PI_2;

/// Admissible range of the squared wave speed.
pub const C2_MIN: f64 = 0.83;
pub const C2_MAX: f64 = 1.0;

/// Default cap on the kernel-mode amplitude |gamma|.
pub const GAMMA_CAP: f64 = 0.05;

/// Default mollification half-width.
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Number of samples in the root certification scan.
pub const CERTIFICATION_SAMPLES: usize = 10_000;

/// Model constants. `alpha` and `k0` are always derived from `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    pub c: f64,
    pub c2: f64,
    pub alpha: f64,
    pub k0: f64,
    pub epsilon: f64,
    pub gamma: f64,
    /// Corrector ball radius; `None` selects 0.9 times the measured sign margin.
    pub rho: Option<f64>,
}

impl Params {
    /// Builds parameters from the squared wave speed.
    pub fn new(c2: f64) -> Result<Self> {
        if !c2.is_finite() || !(C2_MIN..=C2_MAX).contains(&c2) {
            return Err(WaveError::InvalidParams(format!(
                "c^2 = {c2} lies outside [{C2_MIN}, {C2_MAX}]"
            )));
        }
        Ok(Self {
            c: c2.sqrt(),
            c2,
            alpha: alpha_of(c2),
            k0: K0,
            epsilon: DEFAULT_EPSILON,
            gamma: 0.0,
            rho: None,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(WaveError::NonPositiveEpsilon(epsilon));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma.abs() > GAMMA_CAP {
            return Err(WaveError::InvalidParams(format!(
                "|gamma| = {} exceeds the cap {GAMMA_CAP}",
                gamma.abs()
            )));
        }
        self.gamma = gamma;
        Ok(self)
    }

    pub fn with_rho(mut self, rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho <= 0.0 {
            return Err(WaveError::InvalidParams(format!(
                "rho must be positive, got {rho}"
            )));
        }
        self.rho = Some(rho);
        Ok(self)
    }

    /// Orthogonality denominator 2(c^2 k0 - 1).
    pub fn orthogonality_constant(&self) -> f64 {
        2.0 * (self.c2 * self.k0 - 1.0)
    }
}

/// alpha(c) = c^2 (pi/2)^2 - 2, which makes +-pi/2 roots of the symbol.
pub fn alpha_of(c2: f64) -> f64 {
    c2 * K0 * K0 - 2.0
}

/// Symbol D(zeta) = -c^2 zeta^2 + 4 sin^2(zeta/2) + alpha.
pub fn symbol(zeta: f64, c2: f64, alpha: f64) -> f64 {
    let s = (0.5 * zeta).sin();
    -c2 * zeta * zeta + 4.0 * s * s + alpha
}

/// Derivative D'(zeta) = -2 c^2 zeta + 2 sin(zeta).
pub fn symbol_prime(zeta: f64, c2: f64) -> f64 {
    -2.0 * c2 * zeta + 2.0 * zeta.sin()
}

/// Returns (D(zeta), D'(zeta)).
pub fn dispersion_eval(zeta: f64, p: &Params) -> (f64, f64) {
    (symbol(zeta, p.c2, p.alpha), symbol_prime(zeta, p.c2))
}

/// The kernel roots together with the scan that certifies there are no others.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelRoots {
    pub positive: f64,
    pub negative: f64,
    pub certified: bool,
    pub sign_changes: usize,
}

/// Returns +-k0 after checking on [k0/4, 3 pi/2] that D changes sign only at k0.
pub fn kernel_roots(p: &Params) -> Result<KernelRoots> {
    let lo = 0.25 * p.k0;
    let hi = 1.5 * PI;
    let step = (hi - lo) / (CERTIFICATION_SAMPLES - 1) as f64;
    let mut changes = 0;
    let mut prev = symbol(lo, p.c2, p.alpha);
    for i in 1..CERTIFICATION_SAMPLES {
        let z = lo + step * i as f64;
        let cur = symbol(z, p.c2, p.alpha);
        // A sample landing exactly on a root counts once, with the interval after it.
        if prev * cur < 0.0 || (cur == 0.0 && prev != 0.0) {
            changes += 1;
            let brackets_k0 = z - step <= p.k0 + 1e-12 && p.k0 <= z + 1e-12;
            if !brackets_k0 {
                return Err(WaveError::CertificationFailed { zeta: z });
            }
        }
        prev = cur;
    }
    if changes != 1 {
        return Err(WaveError::CertificationFailed { zeta: p.k0 });
    }
    Ok(KernelRoots {
        positive: p.k0,
        negative: -p.k0,
        certified: true,
        sign_changes: changes,
    })
}

/// Constants of the weighted H^2 inversion bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InversionConstants {
    pub c1: f64,
    pub bound_factor: f64,
}

/// C1^2 = max{|D(k0/2)|^-2, |D(3k0/2)|^-2} + (k0/2)|D'(k0/2)|^-2 and
/// bound_factor = C1 + ((4 + alpha) C1 + 1)/c^2.
pub fn inversion_constants(p: &Params) -> Result<InversionConstants> {
    let d_half = symbol(0.5 * p.k0, p.c2, p.alpha);
    let d_three_half = symbol(1.5 * p.k0, p.c2, p.alpha);
    let dp_half = symbol_prime(0.5 * p.k0, p.c2);
    for (name, v) in [
        ("D(k0/2)", d_half),
        ("D(3k0/2)", d_three_half),
        ("D'(k0/2)", dp_half),
    ] {
        if v.abs() < 1e-12 {
            return Err(WaveError::DegenerateConstant(format!("{name} = {v:.3e}")));
        }
    }
    let c1 = (d_half.powi(-2).max(d_three_half.powi(-2)) + 0.5 * p.k0 * dp_half.powi(-2)).sqrt();
    let bound_factor = c1 + ((4.0 + p.alpha) * c1 + 1.0) / p.c2;
    Ok(InversionConstants { c1, bound_factor })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roots_vanish_at_every_admissible_speed() {
        for c2 in [0.83, 0.87, 0.9, 0.95, 1.0] {
            let p = Params::new(c2).unwrap();
            assert!(dispersion_eval(K0, &p).0.abs() < 1e-14);
            assert!(dispersion_eval(-K0, &p).0.abs() < 1e-14);
        }
    }

    #[test]
    fn symbol_values_at_unit_speed() {
        let p = Params::new(1.0).unwrap();
        let alpha = PI * PI / 4.0 - 2.0;
        assert!((p.alpha - alpha).abs() < 1e-15);
        assert!((dispersion_eval(0.0, &p).0 - 0.467_401_100_272_339_6).abs() < 1e-12);
        // -pi^2 + 4 + alpha
        assert!((dispersion_eval(PI, &p).0 - (-PI * PI + 4.0 + alpha)).abs() < 1e-12);
        assert!((dispersion_eval(PI, &p).0 + 5.402).abs() < 1e-3);
    }

    #[test]
    fn certification_passes_in_regime() {
        for c2 in [0.83, 0.9, 1.0] {
            let roots = kernel_roots(&Params::new(c2).unwrap()).unwrap();
            assert!(roots.certified);
            assert_eq!(roots.positive, K0);
            assert_eq!(roots.negative, -K0);
        }
    }

    #[test]
    fn out_of_range_speeds_rejected() {
        for c2 in [0.5, 0.0, 1.01, f64::NAN] {
            assert!(matches!(Params::new(c2), Err(WaveError::InvalidParams(_))));
        }
    }

    #[test]
    fn builder_validation() {
        let p = Params::new(0.9).unwrap();
        assert!(matches!(
            p.with_epsilon(0.0),
            Err(WaveError::NonPositiveEpsilon(_))
        ));
        assert!(p.with_gamma(0.5).is_err());
        assert!(p.with_rho(-1.0).is_err());
        assert_eq!(p.with_gamma(0.01).unwrap().gamma, 0.01);
    }

    #[test]
    fn inversion_constants_at_unit_speed() {
        // Oracle: D(pi/4) = -pi^2/16 + 4 sin^2(pi/8) + alpha, etc., combined by hand.
        let alpha = PI * PI / 4.0 - 2.0;
        let d1 = -PI * PI / 16.0 + 4.0 * (PI / 8.0).sin().powi(2) + alpha;
        let d3 = -9.0 * PI * PI / 16.0 + 4.0 * (3.0 * PI / 8.0).sin().powi(2) + alpha;
        let dp = -PI / 2.0 + 2.0 * (PI / 4.0).sin();
        assert!((d1 - 0.4363).abs() < 1e-4);
        assert!((d3 + 1.670).abs() < 1e-3);
        assert!((dp + 0.1566).abs() < 1e-4);
        let c1 = ((1.0 / (d1 * d1)).max(1.0 / (d3 * d3)) + PI / 4.0 / (dp * dp)).sqrt();
        let k = inversion_constants(&Params::new(1.0).unwrap()).unwrap();
        assert!((k.c1 - c1).abs() < 1e-12);
        assert!((k.c1 - 6.106).abs() < 1e-3);
        assert!((k.bound_factor - 34.385).abs() < 1e-2);
    }

    #[test]
    fn frozen_constants_across_regime() {
        let frozen = [
            (0.95, 11.72, 66.38),
            (0.85, 12.86, 76.03),
            (0.83, 11.48, 68.69),
        ];
        for (c2, c1, bf) in frozen {
            let k = inversion_constants(&Params::new(c2).unwrap()).unwrap();
            assert!((k.c1 - c1).abs() < 1e-2 * c1, "c2={c2}: {}", k.c1);
            assert!(
                (k.bound_factor - bf).abs() < 1e-2 * bf,
                "c2={c2}: {}",
                k.bound_factor
            );
        }
    }

    #[test]
    fn orthogonality_constant_at_unit_speed() {
        let p = Params::new(1.0).unwrap();
        assert!((p.orthogonality_constant() - 1.141_592_653_589_793).abs() < 1e-14);
    }
}
