//! Time-domain check of traveling waves on the discrete chain
//! u_k'' = u_{k+1} - 2u_k + u_{k-1} - alpha u_k + alpha psi'(u_k).

use num_complex::Complex64;
use serde::Serialize;

use crate::dispersion::Params;
use crate::error::{Result, WaveError};
use crate::fields::{spectral, CompositeField};
use crate::profiles::{snapped_sign, Mollifier};

/// Sites at each end that follow the exact translate.
pub const DRIVEN_BAND: usize = 4;

/// Largest admissible time step.
pub const MAX_DT: f64 = 0.05;

/// Amplitude beyond which a run is declared unstable.
pub const BLOW_UP: f64 = 1e3;

/// On-site force of the chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainForce {
    Sign,
    Mollified(Mollifier),
    /// Drops the psi' term: u'' = Delta u - alpha u.
    Linear,
}

impl ChainForce {
    fn prime(&self, u: f64) -> f64 {
        match self {
            ChainForce::Sign => snapped_sign(u),
            ChainForce::Mollified(m) => m.prime(u),
            ChainForce::Linear => 0.0,
        }
    }

    fn potential(&self, u: f64) -> f64 {
        match self {
            ChainForce::Sign => u.abs(),
            ChainForce::Mollified(m) => m.potential(u),
            ChainForce::Linear => 0.0,
        }
    }
}

/// Positions and velocities on sites -K..=K.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    pub time: f64,
    /// True for the sites that follow the exact translate.
    pub driven: Vec<bool>,
}

impl ChainState {
    pub fn new(positions: Vec<f64>, velocities: Vec<f64>) -> Self {
        assert_eq!(positions.len(), velocities.len());
        let n = positions.len();
        let driven = (0..n)
            .map(|i| i < DRIVEN_BAND || i + DRIVEN_BAND >= n)
            .collect();
        Self {
            positions,
            velocities,
            time: 0.0,
            driven,
        }
    }

    /// Total energy with bonds between neighbouring sites.
    pub fn energy(&self, p: &Params, force: ChainForce) -> f64 {
        let u = &self.positions;
        let kinetic: f64 = self.velocities.iter().map(|v| 0.5 * v * v).sum();
        let bonds: f64 = u.windows(2).map(|w| 0.5 * (w[1] - w[0]).powi(2)).sum();
        let onsite: f64 = u
            .iter()
            .map(|x| 0.5 * p.alpha * x * x - p.alpha * force.potential(*x))
            .sum();
        kinetic + bonds + onsite
    }
}

/// Chain accelerations; end sites get zero.
pub fn accelerations(u: &[f64], p: &Params, force: ChainForce) -> Vec<f64> {
    let n = u.len();
    let mut a = vec![0.0; n];
    for i in 1..n.saturating_sub(1) {
        a[i] = u[i + 1] - 2.0 * u[i] + u[i - 1] - p.alpha * u[i] + p.alpha * force.prime(u[i]);
    }
    a
}

/// One velocity-Verlet step. `drive` overwrites the driven sites after the
/// position update.
pub fn verlet_step(
    state: &mut ChainState,
    acc: &mut Vec<f64>,
    p: &Params,
    force: ChainForce,
    dt: f64,
    drive: impl Fn(f64, &mut [f64], &[bool]),
) {
    for ((u, v), a) in state
        .positions
        .iter_mut()
        .zip(&state.velocities)
        .zip(acc.iter())
    {
        *u += dt * v + 0.5 * dt * dt * a;
    }
    state.time += dt;
    drive(state.time, &mut state.positions, &state.driven);
    let next = accelerations(&state.positions, p, force);
    for i in 0..state.velocities.len() {
        state.velocities[i] += 0.5 * dt * (acc[i] + next[i]);
    }
    *acc = next;
}

/// Evaluates a composite profile and its translates at integer sites.
/// The gridded part is band-limited interpolated and extended by zero
/// outside [-X, X).
pub struct SiteEvaluator {
    field: CompositeField,
    /// Fourier coefficients of the gridded part, normalized by 1/n.
    coefficients: Vec<Complex64>,
    wavenumbers: Vec<f64>,
    derivative: Vec<f64>,
}

impl SiteEvaluator {
    pub fn new(field: &CompositeField) -> Self {
        let grid = field.grid;
        let n = grid.n_points() as f64;
        let coefficients = spectral::forward(&field.grid_part)
            .into_iter()
            .map(|c| c / n)
            .collect();
        let wavenumbers = (0..grid.n_points()).map(|j| grid.wavenumber(j)).collect();
        Self {
            field: field.clone(),
            coefficients,
            wavenumbers,
            derivative: spectral::derivative(&field.grid_part, &grid, 1),
        }
    }

    /// Gridded part at sites -X..X-1 shifted by s, i.e. g(k - s), periodically.
    fn grid_translate(&self, s: f64) -> Vec<f64> {
        let half = self.field.grid.half_length();
        let period = 2 * half;
        let mut fold = vec![Complex64::new(0.0, 0.0); period];
        for (j, (c, k)) in self.coefficients.iter().zip(&self.wavenumbers).enumerate() {
            let signed = if j > self.coefficients.len() / 2 {
                j as isize - self.coefficients.len() as isize
            } else {
                j as isize
            };
            let slot = signed.rem_euclid(period as isize) as usize;
            fold[slot] += c * Complex64::from_polar(1.0, -k * s);
        }
        spectral::inverse_in_place(&mut fold);
        fold.iter().map(|c| c.re).collect()
    }

    /// u(k - s) at the given integer sites.
    pub fn values(&self, sites: &[i64], s: f64) -> Vec<f64> {
        let half = self.field.grid.half_length() as i64;
        let g = self.grid_translate(s);
        sites
            .iter()
            .map(|&k| {
                let y = k as f64 - s;
                let a = self.field.analytic.eval(y);
                let inside = y >= -(half as f64) && y < half as f64 && k >= -half && k < half;
                a + if inside { g[(k + half) as usize] } else { 0.0 }
            })
            .collect()
    }

    /// u'(k) at integer sites.
    pub fn slopes(&self, sites: &[i64]) -> Vec<f64> {
        let grid = self.field.grid;
        let half = grid.half_length() as i64;
        let m = grid.points_per_unit() as i64;
        sites
            .iter()
            .map(|&k| {
                let a = self.field.analytic.eval_d(k as f64, 1);
                let g = if k >= -half && k < half {
                    self.derivative[((k + half) * m) as usize]
                } else {
                    0.0
                };
                a + g
            })
            .collect()
    }
}

/// One row of the trajectory summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub max_error: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub max_error: f64,
    pub sites: usize,
    pub steps: usize,
    pub dt: f64,
    pub t_final: f64,
    /// Running max error at T divided by that at T/2.
    pub half_time_ratio: f64,
    pub trajectory: Vec<TrajectorySample>,
}

/// Integrates the chain from u_k(0) = u(k), u_k'(0) = -c u'(k) and returns the
/// largest interior deviation from the translate u(k - ct).
pub fn simulate(
    u: &CompositeField,
    p: &Params,
    sites: usize,
    t_final: f64,
    dt: f64,
    force: ChainForce,
) -> Result<SimulationReport> {
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(WaveError::InvalidParams(format!(
            "dt = {dt} must lie in (0, {MAX_DT}]"
        )));
    }
    if !t_final.is_finite() || t_final <= 0.0 {
        return Err(WaveError::InvalidParams(format!(
            "T = {t_final} must be positive"
        )));
    }
    if sites <= 2 * DRIVEN_BAND {
        return Err(WaveError::DomainTooSmall(format!(
            "K = {sites} leaves no interior sites"
        )));
    }
    if sites > u.grid.half_length() {
        return Err(WaveError::DomainTooSmall(format!(
            "K = {sites} exceeds the grid half-length {}",
            u.grid.half_length()
        )));
    }
    let eval = SiteEvaluator::new(u);
    let k = sites as i64;
    let site_list: Vec<i64> = (-k..=k).collect();
    let positions = eval.values(&site_list, 0.0);
    let velocities = eval.slopes(&site_list).iter().map(|d| -p.c * d).collect();
    let mut state = ChainState::new(positions, velocities);
    let mut acc = accelerations(&state.positions, p, force);
    let steps = (t_final / dt).round() as usize;
    let every = ((0.1 / dt).round() as usize).max(1);

    let mut trajectory = vec![TrajectorySample {
        t: 0.0,
        max_error: 0.0,
        energy: state.energy(p, force),
    }];
    let mut max_error: f64 = 0.0;
    let mut half_error = f64::NAN;
    for step in 1..=steps {
        let t = step as f64 * dt;
        let exact = eval.values(&site_list, p.c * t);
        verlet_step(&mut state, &mut acc, p, force, dt, |_, pos, driven| {
            for i in 0..pos.len() {
                if driven[i] {
                    pos[i] = exact[i];
                }
            }
        });
        let mut err: f64 = 0.0;
        for ((&v, &driven), e) in state.positions.iter().zip(&state.driven).zip(&exact) {
            if !v.is_finite() || v.abs() > BLOW_UP {
                return Err(WaveError::BlowUp { time: t });
            }
            if !driven {
                err = err.max((v - e).abs());
            }
        }
        max_error = max_error.max(err);
        if step == steps / 2 {
            half_error = max_error;
        }
        if step % every == 0 || step == steps {
            trajectory.push(TrajectorySample {
                t,
                max_error: err,
                energy: state.energy(p, force),
            });
        }
    }
    Ok(SimulationReport {
        max_error,
        sites,
        steps,
        dt,
        t_final,
        half_time_ratio: max_error / half_error,
        trajectory,
    })
}

/// Relative energy drift per unit time of the linear chain with both ends
/// held at zero, started from a smooth hump.
pub fn clamped_linear_energy_drift(p: &Params, sites: usize, t_final: f64, dt: f64) -> f64 {
    let n = 2 * sites + 1;
    let positions: Vec<f64> = (0..n)
        .map(|i| {
            let y = i as f64 / (n - 1) as f64;
            if i == 0 || i == n - 1 {
                0.0
            } else {
                0.01 * (std::f64::consts::PI * y).sin().powi(2)
            }
        })
        .collect();
    let mut state = ChainState::new(positions, vec![0.0; n]);
    let force = ChainForce::Linear;
    let e0 = state.energy(p, force);
    let mut acc = accelerations(&state.positions, p, force);
    let steps = (t_final / dt).round() as usize;
    for _ in 0..steps {
        verlet_step(&mut state, &mut acc, p, force, dt, |_, pos, _| {
            pos[0] = 0.0;
            let last = pos.len() - 1;
            pos[last] = 0.0;
        });
    }
    (state.energy(p, force) - e0).abs() / (e0 * t_final)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Analytic, Grid, Parity};

    fn params() -> Params {
        Params::new(0.9).unwrap()
    }

    #[test]
    fn evaluator_matches_grid_samples_and_shifts() {
        let g = Grid::new(16, 8).unwrap();
        let vals: Vec<f64> = g.xs().iter().map(|x| (-x * x / 4.0).exp()).collect();
        let f = CompositeField::new(g, Analytic::KernelSin, vals, Parity::None);
        let ev = SiteEvaluator::new(&f);
        let sites: Vec<i64> = (-10..=10).collect();
        for (s, shift) in [(0.0, 0.0), (0.37, 0.37), (-1.25, -1.25)] {
            let got = ev.values(&sites, s);
            for (k, v) in sites.iter().zip(&got) {
                let y = *k as f64 - shift;
                let want = (std::f64::consts::FRAC_PI_2 * y).sin() + (-y * y / 4.0).exp();
                assert!((v - want).abs() < 1e-10, "{k} {s}: {v} vs {want}");
            }
        }
        let d = ev.slopes(&[0, 1, 2]);
        for (k, v) in [0.0f64, 1.0, 2.0].iter().zip(&d) {
            let want = std::f64::consts::FRAC_PI_2 * (std::f64::consts::FRAC_PI_2 * k).cos()
                - k / 2.0 * (-k * k / 4.0).exp();
            assert!((v - want).abs() < 1e-10);
        }
    }

    fn linear_error(dt: f64) -> f64 {
        let p = params();
        let g = Grid::new(32, 4).unwrap();
        let f = CompositeField::from_analytic(g, Analytic::KernelSin.scaled(1e-3), Parity::Odd);
        simulate(&f, &p, 30, 5.0, dt, ChainForce::Linear)
            .unwrap()
            .max_error
    }

    #[test]
    fn kernel_mode_translates_with_second_order_error() {
        let (e1, e2) = (linear_error(0.04), linear_error(0.02));
        let ratio = e1 / e2;
        assert!((3.0..=5.0).contains(&ratio), "{e1} {e2} {ratio}");
    }

    #[test]
    fn clamped_linear_energy_is_conserved() {
        let drift = clamped_linear_energy_drift(&params(), 32, 100.0, 0.01);
        assert!(drift <= 1e-6, "{drift}");
    }

    #[test]
    fn mollified_wave_travels_on_the_chain() {
        use crate::waves::{solve_stage1, solve_stage2, SolverConfig};
        let p = params().with_epsilon(0.01).unwrap();
        let g = Grid::new(64, 1024).unwrap();
        let cfg = SolverConfig::default();
        let s1 = solve_stage1(&p, &g, &cfg).unwrap();
        let sol = solve_stage2(&p, &g, &cfg, &s1).unwrap();
        let m = Mollifier::new(0.01).unwrap();
        let rep = simulate(&sol.u, &p, 64, 20.0, 0.01, ChainForce::Mollified(m)).unwrap();
        assert!(rep.max_error <= 1e-3, "{}", rep.max_error);
        assert_eq!(rep.trajectory.len(), 201);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = params();
        let g = Grid::new(16, 4).unwrap();
        let f = CompositeField::zeros(g, Parity::Odd);
        assert!(matches!(
            simulate(&f, &p, 10, 1.0, 0.1, ChainForce::Linear),
            Err(WaveError::InvalidParams(_))
        ));
        assert!(matches!(
            simulate(&f, &p, 4, 1.0, 0.01, ChainForce::Linear),
            Err(WaveError::DomainTooSmall(_))
        ));
        assert!(matches!(
            simulate(&f, &p, 20, 1.0, 0.01, ChainForce::Linear),
            Err(WaveError::DomainTooSmall(_))
        ));
    }

    #[test]
    fn unstable_run_reports_blow_up() {
        let p = params();
        let g = Grid::new(16, 4).unwrap();
        let f = CompositeField::from_analytic(g, Analytic::Const(2000.0), Parity::None);
        let r = simulate(&f, &p, 12, 1.0, 0.05, ChainForce::Sign);
        assert!(matches!(r, Err(WaveError::BlowUp { .. })), "{r:?}");
    }
}
