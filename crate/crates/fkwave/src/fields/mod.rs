//! Functions on the truncated real line, stored as a closed-form analytic part
//! plus a decaying corrector sampled on a uniform periodic grid.

mod analytic;
pub mod io;
pub mod spectral;

use std::f64::consts::PI;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;
use serde::Serialize;

pub use analytic::Analytic;
pub use spectral::SpectralField;

use crate::dispersion::{Params, K0};
use crate::error::{Result, WaveError};

/// Default bound on the grid part inside the outer band |x| > X - 4.
pub const DEFAULT_TAIL_TOL: f64 = 1e-9;

/// Width of the outer band inspected by the tail check.
pub const TAIL_BAND: f64 = 4.0;

/// Uniform periodic grid x_i = -X + i/m on [-X, X).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    half_length: usize,
    points_per_unit: usize,
    tail_tol: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            half_length: 64,
            points_per_unit: 16,
            tail_tol: DEFAULT_TAIL_TOL,
        }
    }
}

impl Grid {
    /// `half_length` must be even (so +-k0 are grid wavenumbers) and at least 8.
    pub fn new(half_length: usize, points_per_unit: usize) -> Result<Self> {
        if half_length < 8 || !half_length.is_multiple_of(2) {
            return Err(WaveError::InvalidParams(format!(
                "half-length X = {half_length} must be an even integer >= 8"
            )));
        }
        if points_per_unit == 0 {
            return Err(WaveError::InvalidParams(
                "points per unit must be positive".into(),
            ));
        }
        Ok(Self {
            half_length,
            points_per_unit,
            tail_tol: DEFAULT_TAIL_TOL,
        })
    }

    pub fn with_tail_tol(mut self, tail_tol: f64) -> Self {
        self.tail_tol = tail_tol;
        self
    }

    pub fn half_length(&self) -> usize {
        self.half_length
    }

    pub fn points_per_unit(&self) -> usize {
        self.points_per_unit
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub fn n_points(&self) -> usize {
        2 * self.half_length * self.points_per_unit
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.points_per_unit as f64
    }

    /// Index of x = 0.
    pub fn center(&self) -> usize {
        self.half_length * self.points_per_unit
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) / self.points_per_unit as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points()).map(|i| self.x(i)).collect()
    }

    /// Grid index of `x`, if `x` is a node.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let t = x * self.points_per_unit as f64 + self.center() as f64;
        let i = t.round();
        if (t - i).abs() < 1e-9 && i >= 0.0 && (i as usize) < self.n_points() {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Index of the node at -x_i under periodic wrap.
    pub fn mirror(&self, i: usize) -> usize {
        (self.n_points() - i) % self.n_points()
    }

    /// Signed wavenumber k_j = pi j / X of DFT index `j`.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.n_points();
        let signed = if j <= n / 2 {
            j as f64
        } else {
            j as f64 - n as f64
        };
        PI * signed / self.half_length as f64
    }

    /// DFT indices of +-k0.
    pub fn kernel_indices(&self) -> [usize; 2] {
        let j = self.half_length / 2;
        [j, self.n_points() - j]
    }

    pub fn in_tail(&self, i: usize) -> bool {
        self.x(i).abs() > self.half_length as f64 - TAIL_BAND
    }
}

/// Declared symmetry of a field about x = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Odd,
    Even,
    None,
}

/// Kernel mode used in moments and projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    Sin,
    Cos,
}

impl KernelMode {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            KernelMode::Sin => (K0 * x).sin(),
            KernelMode::Cos => (K0 * x).cos(),
        }
    }

    /// The mode that does not vanish against fields of `parity`.
    pub fn matching(parity: Parity) -> Option<KernelMode> {
        match parity {
            Parity::Odd => Some(KernelMode::Sin),
            Parity::Even => Some(KernelMode::Cos),
            Parity::None => None,
        }
    }
}

/// Analytic part plus gridded corrector.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeField {
    pub grid: Grid,
    pub analytic: Analytic,
    pub grid_part: Vec<f64>,
    pub parity: Parity,
}

impl CompositeField {
    pub fn new(grid: Grid, analytic: Analytic, grid_part: Vec<f64>, parity: Parity) -> Self {
        assert_eq!(
            grid_part.len(),
            grid.n_points(),
            "grid part length mismatch"
        );
        Self {
            grid,
            analytic,
            grid_part,
            parity,
        }
    }

    pub fn zeros(grid: Grid, parity: Parity) -> Self {
        Self::new(grid, Analytic::Zero, vec![0.0; grid.n_points()], parity)
    }

    pub fn from_analytic(grid: Grid, analytic: Analytic, parity: Parity) -> Self {
        Self::new(grid, analytic, vec![0.0; grid.n_points()], parity)
    }

    pub fn from_grid(grid: Grid, values: Vec<f64>, parity: Parity) -> Self {
        Self::new(grid, Analytic::Zero, values, parity)
    }

    /// Samples of the analytic part.
    pub fn analytic_samples(&self) -> Vec<f64> {
        self.analytic.sample(&self.grid, 0)
    }

    /// Samples of analytic plus grid part.
    pub fn total(&self) -> Vec<f64> {
        let mut t = self.analytic_samples();
        for (ti, gi) in t.iter_mut().zip(&self.grid_part) {
            *ti += gi;
        }
        t
    }

    pub fn value_at_index(&self, i: usize) -> f64 {
        self.analytic.eval(self.grid.x(i)) + self.grid_part[i]
    }

    /// Derivative samples: analytic part exactly, grid part spectrally.
    pub fn derivative_samples(&self, d: u32) -> Vec<f64> {
        let mut a = self.analytic.sample(&self.grid, d);
        let g = spectral::derivative(&self.grid_part, &self.grid, d);
        for (ai, gi) in a.iter_mut().zip(&g) {
            *ai += gi;
        }
        a
    }

    /// Moves the analytic part into the grid part. Only meaningful for
    /// analytic parts that decay inside the domain.
    pub fn folded(&self) -> CompositeField {
        if self.analytic.is_zero() {
            return self.clone();
        }
        Self::from_grid(self.grid, self.total(), self.parity)
    }

    pub fn tail_magnitude(&self) -> f64 {
        tail_magnitude(&self.grid_part, &self.grid)
    }

    pub fn check_tail(&self) -> Result<()> {
        check_tail(&self.grid_part, &self.grid)
    }

    /// Enforces the declared parity on the grid part.
    pub fn symmetrize(&mut self) {
        symmetrize(&mut self.grid_part, &self.grid, self.parity);
    }

    pub fn symmetrized(mut self) -> Self {
        self.symmetrize();
        self
    }

    /// Largest pointwise violation of the declared parity by the total field.
    pub fn parity_defect(&self) -> f64 {
        parity_defect(&self.total(), &self.grid, self.parity)
    }
}

pub fn tail_magnitude(values: &[f64], grid: &Grid) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|(i, _)| grid.in_tail(*i))
        .map(|(_, v)| v.abs())
        .fold(0.0, f64::max)
}

pub fn check_tail(values: &[f64], grid: &Grid) -> Result<()> {
    let tail = tail_magnitude(values, grid);
    if tail > grid.tail_tol() {
        Err(WaveError::TailTooLarge {
            tail,
            tol: grid.tail_tol(),
        })
    } else {
        Ok(())
    }
}

/// Odd: f_i <- (f_i - f_{-i})/2; even: f_i <- (f_i + f_{-i})/2.
pub fn symmetrize(values: &mut [f64], grid: &Grid, parity: Parity) {
    let sign = match parity {
        Parity::Odd => -1.0,
        Parity::Even => 1.0,
        Parity::None => return,
    };
    let n = grid.n_points();
    let orig = values.to_vec();
    for i in 0..n {
        values[i] = 0.5 * (orig[i] + sign * orig[grid.mirror(i)]);
    }
}

pub fn parity_defect(values: &[f64], grid: &Grid, parity: Parity) -> f64 {
    let sign = match parity {
        Parity::Odd => -1.0,
        Parity::Even => 1.0,
        Parity::None => return 0.0,
    };
    (1..grid.n_points())
        .map(|i| (values[i] - sign * values[grid.mirror(i)]).abs())
        .fold(0.0, f64::max)
}

/// L_h on grid samples: spectral second derivative plus exact unit index shifts
/// with periodic wrap.
pub fn apply_l_values(values: &[f64], grid: &Grid, p: &Params) -> Vec<f64> {
    let n = grid.n_points();
    let m = grid.points_per_unit();
    let second = spectral::derivative(values, grid, 2);
    (0..n)
        .map(|i| {
            let lap = values[(i + m) % n] - 2.0 * values[i] + values[(i + n - m) % n];
            p.c2 * second[i] - lap + p.alpha * values[i]
        })
        .collect()
}

/// Applies c^2 f'' - Delta_D f + alpha f: closed form on the analytic part,
/// spectral plus index shifts on the grid part.
pub fn apply_l(f: &CompositeField, p: &Params) -> Result<CompositeField> {
    f.check_tail()?;
    let grid_part = if f.grid_part.iter().all(|v| *v == 0.0) {
        vec![0.0; f.grid.n_points()]
    } else {
        apply_l_values(&f.grid_part, &f.grid, p)
    };
    Ok(CompositeField::new(
        f.grid,
        f.analytic.l_image(p),
        grid_part,
        f.parity,
    ))
}

/// Trapezoid (periodic Riemann sum) of samples against the kernel mode.
pub fn discrete_moment(values: &[f64], grid: &Grid, mode: KernelMode) -> f64 {
    let h = grid.spacing();
    h * values
        .iter()
        .enumerate()
        .map(|(i, v)| v * mode.eval(grid.x(i)))
        .sum::<f64>()
}

/// Number of Gauss-Legendre nodes per unit panel.
pub const PANEL_NODES: usize = 10;

fn panel_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(PANEL_NODES).expect("valid Gauss-Legendre degree"))
}

/// Integral of the analytic part over [-X, X] on unit panels. Every profile
/// breakpoint is an integer, so each panel integrand is smooth.
pub fn analytic_integral(a: &Analytic, grid: &Grid, weight: impl Fn(f64) -> f64) -> f64 {
    if a.is_zero() {
        return 0.0;
    }
    let rule = panel_rule();
    let x_half = grid.half_length() as i64;
    (-x_half..x_half)
        .map(|k| {
            let lo = k as f64;
            rule.integrate(lo, lo + 1.0, |x| a.eval(x) * weight(x))
        })
        .sum()
}

/// Integral of f against sin(k0 x) or cos(k0 x) over the domain.
pub fn kernel_moment(f: &CompositeField, mode: KernelMode) -> Result<f64> {
    f.check_tail()?;
    Ok(discrete_moment(&f.grid_part, &f.grid, mode)
        + analytic_integral(&f.analytic, &f.grid, |x| mode.eval(x)))
}

/// Discrete L^2 norm sqrt(h sum f_i^2).
pub fn l2_norm(values: &[f64], grid: &Grid) -> f64 {
    (grid.spacing() * values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// ||(1 + k^2) f^|| of grid samples, equal to the L^2 norm of f - f''.
pub fn h2_norm_values(values: &[f64], grid: &Grid) -> f64 {
    let c = spectral::forward(values);
    let h = grid.spacing();
    let s: f64 = c
        .iter()
        .enumerate()
        .map(|(j, cj)| {
            let k = grid.wavenumber(j);
            (1.0 + k * k).powi(2) * cj.norm_sqr()
        })
        .sum();
    (s * h * h / (2.0 * grid.half_length() as f64)).sqrt()
}

pub fn h2_norm(f: &CompositeField) -> Result<f64> {
    if !f.analytic.is_zero() {
        return Err(WaveError::NonDecayingInput);
    }
    Ok(h2_norm_values(&f.grid_part, &f.grid))
}

/// Power of the (1 + x^2) weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeightPower {
    /// ||(1 + x^2) f||_{L^2}
    One,
    /// ||(1 + x^2)^{3/2} f||_{L^inf}
    ThreeHalves,
}

pub fn weighted_norm_values(values: &[f64], grid: &Grid, power: WeightPower) -> f64 {
    match power {
        WeightPower::One => {
            let h = grid.spacing();
            (h * values
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let x = grid.x(i);
                    ((1.0 + x * x) * v).powi(2)
                })
                .sum::<f64>())
            .sqrt()
        }
        WeightPower::ThreeHalves => values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = grid.x(i);
                (1.0 + x * x).powf(1.5) * v.abs()
            })
            .fold(0.0, f64::max),
    }
}

/// Weighted norm of the total field. Both parts must be below the tail
/// tolerance in the outer band.
pub fn weighted_norm(f: &CompositeField, power: WeightPower) -> Result<f64> {
    let total = f.total();
    check_tail(&total, &f.grid)?;
    Ok(weighted_norm_values(&total, &f.grid, power))
}

/// (sup |f|, sup |f'|) of a grid-only field; the derivative is spectral.
pub fn sup_norms(f: &CompositeField) -> Result<(f64, f64)> {
    if !f.analytic.is_zero() {
        return Err(WaveError::NonDecayingInput);
    }
    let d = spectral::derivative(&f.grid_part, &f.grid, 1);
    let sup = |v: &[f64]| v.iter().map(|x| x.abs()).fold(0.0, f64::max);
    Ok((sup(&f.grid_part), sup(&d)))
}
