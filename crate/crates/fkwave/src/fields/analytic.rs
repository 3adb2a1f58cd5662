//! Closed-form functions of x, evaluated exactly at any real point together
//! with derivatives of any order.

use crate::dispersion::{Params, K0};
use crate::profiles::{lambda_blend_d, trig_d, u_even_d, u_odd_d, u_pa_d, ProfileSpec, Trig};

use super::Grid;

/// Expression tree for the non-decaying parts of composite fields.
#[derive(Debug, Clone, PartialEq)]
pub enum Analytic {
    Zero,
    Const(f64),
    /// sgn(x); its derivatives are taken to be 0.
    Sign,
    /// The approximate profile u_pa.
    Profile(ProfileSpec),
    OddCarrier,
    EvenCarrier,
    /// sin(k0 x)
    KernelSin,
    /// cos(k0 x)
    KernelCos,
    /// The blend lambda.
    Blend,
    Scale(f64, Box<Analytic>),
    Sum(Vec<Analytic>),
    Product(Box<Analytic>, Box<Analytic>),
    /// f(x - shift)
    Shift(f64, Box<Analytic>),
    /// c^2 f'' - (f(x+1) - 2f(x) + f(x-1)) + alpha f
    LImage {
        c2: f64,
        alpha: f64,
        inner: Box<Analytic>,
    },
}

impl Analytic {
    pub fn eval(&self, x: f64) -> f64 {
        self.eval_d(x, 0)
    }

    /// Derivative of order `d` at `x`.
    pub fn eval_d(&self, x: f64, d: u32) -> f64 {
        match self {
            Analytic::Zero => 0.0,
            Analytic::Const(c) => {
                if d == 0 {
                    *c
                } else {
                    0.0
                }
            }
            Analytic::Sign => {
                if d == 0 {
                    crate::profiles::sign(x)
                } else {
                    0.0
                }
            }
            Analytic::Profile(spec) => u_pa_d(x, d, spec),
            Analytic::OddCarrier => u_odd_d(x, d),
            Analytic::EvenCarrier => u_even_d(x, d),
            Analytic::KernelSin => trig_d(Trig::Sin, K0, x, d),
            Analytic::KernelCos => trig_d(Trig::Cos, K0, x, d),
            Analytic::Blend => lambda_blend_d(x, d),
            Analytic::Scale(a, f) => a * f.eval_d(x, d),
            Analytic::Sum(terms) => terms.iter().map(|t| t.eval_d(x, d)).sum(),
            Analytic::Product(f, g) => {
                let mut acc = 0.0;
                let mut binom = 1.0;
                for j in 0..=d {
                    acc += binom * f.eval_d(x, j) * g.eval_d(x, d - j);
                    binom = binom * (d - j) as f64 / (j + 1) as f64;
                }
                acc
            }
            Analytic::Shift(s, f) => f.eval_d(x - s, d),
            Analytic::LImage { c2, alpha, inner } => {
                let f0 = inner.eval_d(x, d);
                c2 * inner.eval_d(x, d + 2)
                    - (inner.eval_d(x + 1.0, d) - 2.0 * f0 + inner.eval_d(x - 1.0, d))
                    + alpha * f0
            }
        }
    }

    /// Structural test for the zero function.
    pub fn is_zero(&self) -> bool {
        match self {
            Analytic::Zero => true,
            Analytic::Const(c) => *c == 0.0,
            Analytic::Scale(a, f) => *a == 0.0 || f.is_zero(),
            Analytic::Sum(terms) => terms.iter().all(Analytic::is_zero),
            Analytic::Product(f, g) => f.is_zero() || g.is_zero(),
            Analytic::Shift(_, f) => f.is_zero(),
            Analytic::LImage { inner, .. } => inner.is_zero(),
            _ => false,
        }
    }

    pub fn scaled(self, a: f64) -> Analytic {
        if a == 1.0 {
            self
        } else {
            Analytic::Scale(a, Box::new(self))
        }
    }

    pub fn plus(self, other: Analytic) -> Analytic {
        if other.is_zero() {
            return self;
        }
        if self.is_zero() {
            return other;
        }
        match self {
            Analytic::Sum(mut terms) => {
                terms.push(other);
                Analytic::Sum(terms)
            }
            s => Analytic::Sum(vec![s, other]),
        }
    }

    pub fn times(self, other: Analytic) -> Analytic {
        Analytic::Product(Box::new(self), Box::new(other))
    }

    pub fn shifted(self, shift: f64) -> Analytic {
        Analytic::Shift(shift, Box::new(self))
    }

    /// Closed-form image under the advance-delay operator.
    pub fn l_image(&self, p: &Params) -> Analytic {
        if self.is_zero() {
            return Analytic::Zero;
        }
        Analytic::LImage {
            c2: p.c2,
            alpha: p.alpha,
            inner: Box::new(self.clone()),
        }
    }

    /// Samples the derivative of order `d` on the grid nodes.
    pub fn sample(&self, grid: &Grid, d: u32) -> Vec<f64> {
        if self.is_zero() {
            return vec![0.0; grid.n_points()];
        }
        (0..grid.n_points())
            .map(|i| self.eval_d(grid.x(i), d))
            .collect()
    }
}
