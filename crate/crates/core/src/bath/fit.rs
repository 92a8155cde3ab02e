//! Damped-exponential fit of C(t).
//!
//! The singularities of S_β(ω) in the lower half plane (the Matsubara poles,
//! the cutoff pole and, for s < 1, the branch cut) all sit on the negative
//! imaginary axis, so C(t) is fitted by non-oscillating terms d_k e^{-γ_k t}
//! with complex amplitudes. Amplitudes enter linearly and are projected out
//! (variable projection); the rates are refined by Levenberg–Marquardt.
//! Poles are grown one at a time: every K-pole start is the (K−1)-pole
//! optimum with one extra rate inserted into a gap or beyond either end.
//! The fitted spectrum is pinned to S_β at a few frequencies by extra
//! weighted rows in the linear solve.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::correlation::CorrelationOracle;
use super::modes::{BathModes, Mode};
use super::spec::BathSpec;
use crate::error::{HeomError, Result};

/// Sampling times for the fit.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    pub times: Vec<f64>,
}

impl TimeGrid {
    /// Uniform spacing 0.1/ω_c up to `dense_until`, then logarithmic to `t_fit`.
    pub fn for_bath(spec: &BathSpec, t_fit: f64, log_points: usize) -> Self {
        let h = 0.1 / spec.omega_c;
        let dense_until = (50.0 * h).max(1.0).min(t_fit);
        let n_dense = (dense_until / h).round() as usize;
        let mut times: Vec<f64> = (0..=n_dense).map(|i| i as f64 * h).collect();
        if t_fit > dense_until && log_points > 0 {
            let (a, b) = (dense_until.ln(), t_fit.ln());
            for i in 1..=log_points {
                times.push((a + (b - a) * i as f64 / log_points as f64).exp());
            }
        }
        Self { times }
    }

    /// `n` log-spaced times interleaved with, but not on, the default grid.
    pub fn held_out(spec: &BathSpec, t_fit: f64, n: usize) -> Self {
        let first = 0.37 / spec.omega_c;
        let (a, b) = (first.ln(), (0.993 * t_fit).ln());
        let times = (0..n)
            .map(|i| (a + (b - a) * (i as f64 + 0.5) / n as f64).exp())
            .collect();
        Self { times }
    }
}

/// Default relative tolerance: 1e-3 for s ≥ 1/4, 1e-2 deeper in the sub-Ohmic range.
pub fn default_tolerance(s: f64) -> f64 {
    if s >= 0.25 - 1e-12 {
        1e-3
    } else {
        1e-2
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub k_max: usize,
    /// Maximum of |C_fit − C| over the grid, relative to |C(0)|.
    pub tol: f64,
    /// Frequencies where the fitted spectrum must reproduce S_β(ω).
    pub spectral_checks: Vec<f64>,
    pub spectral_rtol: f64,
    /// Upper bound on fitted damping rates.
    pub gamma_max: f64,
    /// Levenberg–Marquardt iterations per start.
    pub max_iterations: usize,
}

impl FitOptions {
    pub fn for_spec(spec: &BathSpec) -> Self {
        Self {
            k_max: 32,
            tol: default_tolerance(spec.s),
            spectral_checks: vec![1.0, -1.0],
            spectral_rtol: 1e-2,
            gamma_max: 20.0 * spec.omega_c,
            max_iterations: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub modes: BathModes,
    /// max_t |C_fit − C| / |C(0)| on the fit grid.
    pub residual: f64,
    pub c0: f64,
    /// Relative spectral errors at `FitOptions::spectral_checks`.
    pub spectral_errors: Vec<f64>,
}

/// Fits the minimal number of modes meeting `opts` on `grid`.
pub fn fit_modes(spec: &BathSpec, grid: &TimeGrid, opts: &FitOptions) -> Result<FitReport> {
    let oracle = CorrelationOracle::new(*spec)?;
    let samples = oracle.eval_many(&grid.times)?;
    fit_samples(&oracle, &grid.times, &samples, opts)
}

/// Fit against precomputed oracle samples.
pub fn fit_samples(
    oracle: &CorrelationOracle,
    times: &[f64],
    samples: &[Complex64],
    opts: &FitOptions,
) -> Result<FitReport> {
    if times.len() != samples.len() || times.is_empty() {
        return Err(HeomError::InvalidParameter {
            name: "grid",
            reason: "times and samples must be non-empty and of equal length".into(),
        });
    }
    if !(opts.tol > 0.0 && opts.gamma_max > 0.0 && opts.k_max > 0) {
        return Err(HeomError::InvalidParameter {
            name: "fit options",
            reason: format!("tol, gamma_max and k_max must be positive, got {opts:?}"),
        });
    }
    let spec = *oracle.spec();
    let c0 = oracle.c0();
    let spectral_weight = 10.0 * (times.len() as f64).sqrt() / opts.spectral_rtol;
    let problem = Problem {
        t: times.to_vec(),
        c: samples.to_vec(),
        w: samples.iter().map(|c| 1.0 / (c.norm() + opts.tol * c0)).collect(),
        spectral: opts
            .spectral_checks
            .iter()
            .map(|&w| {
                let s = spec.noise_power(w);
                (w, s, spectral_weight / s)
            })
            .collect(),
        cap: opts.gamma_max,
    };

    let mut rates: Vec<f64> = Vec::new();
    let mut best: Option<(f64, usize)> = None;
    for k in 1..=opts.k_max {
        let mut winner: Option<(f64, Vec<f64>)> = None;
        for start in insertion_starts(&rates, opts.gamma_max) {
            let (cost, refined) = problem.refine(start, opts.max_iterations);
            if winner.as_ref().map_or(true, |(c, _)| cost < *c) {
                winner = Some((cost, refined));
            }
        }
        let Some((_, refined)) = winner else { break };
        rates = refined;
        let Some(modes) = problem.modes(&rates) else { continue };

        let residual = problem.max_residual(&modes) / c0;
        let spectral_errors: Vec<f64> = problem
            .spectral
            .iter()
            .map(|&(w, s, _)| ((modes.noise_power(w) - s) / s).abs())
            .collect();
        log::debug!("fit K={k}: residual {residual:.3e}, spectral {spectral_errors:?}");
        if best.map_or(true, |(r, _)| residual < r) {
            best = Some((residual, k));
        }
        let spectral_ok = spectral_errors.iter().all(|e| *e <= opts.spectral_rtol);
        if residual <= opts.tol && spectral_ok && modes.validate().is_ok() {
            return Ok(FitReport { modes, residual, c0, spectral_errors });
        }
    }
    let (best_residual, best_k) = best.unwrap_or((f64::INFINITY, 0));
    Err(HeomError::FitFailed { k_max: opts.k_max, best_k, best_residual })
}

/// Starting rate sets for K poles from the (K−1)-pole optimum.
fn insertion_starts(rates: &[f64], cap: f64) -> Vec<Vec<f64>> {
    if rates.is_empty() {
        return vec![vec![1.0_f64.min(0.5 * cap)]];
    }
    let mut sorted = rates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0] / 3.0;
    let hi = (sorted[sorted.len() - 1] * 3.0).min(0.9 * cap);
    let mut extra = vec![lo, hi];
    extra.extend(sorted.windows(2).map(|w| (w[0] * w[1]).sqrt()));
    extra
        .into_iter()
        .map(|q| {
            let mut s = sorted.clone();
            s.push(q);
            s.sort_by(f64::total_cmp);
            s
        })
        .collect()
}

struct Problem {
    t: Vec<f64>,
    c: Vec<Complex64>,
    w: Vec<f64>,
    /// (ω, S_β(ω), row weight).
    spectral: Vec<(f64, f64, f64)>,
    cap: f64,
}

/// Linear least-squares solution at fixed rates.
struct Projection {
    x: DVector<f64>,
    residual: DVector<f64>,
    /// Orthonormal basis of the range of the design matrix.
    basis: DMatrix<f64>,
}

impl Problem {
    fn rows(&self) -> usize {
        2 * self.t.len() + self.spectral.len()
    }

    fn rhs(&self) -> DVector<f64> {
        let n = self.t.len();
        DVector::from_fn(self.rows(), |i, _| {
            if i < n {
                self.w[i] * self.c[i].re
            } else if i < 2 * n {
                self.w[i - n] * self.c[i - n].im
            } else {
                let (_, s, weight) = self.spectral[i - 2 * n];
                weight * s
            }
        })
    }

    /// Columns k (real amplitude) and K + k (imaginary amplitude) for rate γ,
    /// or their γ-derivatives when `derivative` is set.
    fn fill_columns(&self, a: &mut DMatrix<f64>, k: usize, kk: usize, gamma: f64, derivative: bool) {
        let n = self.t.len();
        for i in 0..n {
            let t = self.t[i];
            let e = self.w[i] * (-gamma * t).exp();
            let v = if derivative { -t * e } else { e };
            a[(i, k)] = v;
            a[(n + i, kk + k)] = v;
        }
        for (j, &(omega, _, weight)) in self.spectral.iter().enumerate() {
            // (1/π) Re[(x_re + i x_im)/(γ − iω)]
            let den = PI * (gamma * gamma + omega * omega);
            let (re, im) = if derivative {
                (
                    weight * (omega * omega - gamma * gamma) / (den * (gamma * gamma + omega * omega)),
                    weight * 2.0 * omega * gamma / (den * (gamma * gamma + omega * omega)),
                )
            } else {
                (weight * gamma / den, -weight * omega / den)
            };
            a[(2 * n + j, k)] = re;
            a[(2 * n + j, kk + k)] = im;
        }
    }

    fn design(&self, rates: &[f64]) -> DMatrix<f64> {
        let kk = rates.len();
        let mut a = DMatrix::zeros(self.rows(), 2 * kk);
        for (k, &g) in rates.iter().enumerate() {
            self.fill_columns(&mut a, k, kk, g, false);
        }
        a
    }

    fn project(&self, rates: &[f64]) -> Option<Projection> {
        let a = self.design(rates);
        let b = self.rhs();
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let rank = svd.singular_values.iter().filter(|&&s| s > 1e-13 * smax).count();
        let x = svd.solve(&b, 1e-13 * smax).ok()?;
        let u = svd.u.as_ref()?;
        let basis = u.columns(0, rank).into_owned();
        let residual = &a * &x - b;
        x.iter().all(|v| v.is_finite()).then_some(Projection { x, residual, basis })
    }

    /// Variable-projection Levenberg–Marquardt on u_k with γ_k = cap·σ(u_k).
    fn refine(&self, start: Vec<f64>, max_iter: usize) -> (f64, Vec<f64>) {
        let kk = start.len();
        let mut u: Vec<f64> = start.iter().map(|&g| coord_of(g, self.cap)).collect();
        let rates_of = |u: &[f64]| u.iter().map(|&v| gamma_of(v, self.cap)).collect::<Vec<_>>();
        let Some(mut proj) = self.project(&rates_of(&u)) else {
            return (f64::INFINITY, start);
        };
        let mut cost = proj.residual.norm_squared();
        let mut mu = 1e-3;
        let mut stall = 0;
        for _ in 0..max_iter {
            let rates = rates_of(&u);
            // Kaufman's approximation: J_k = −P⊥ (∂A/∂u_k) x.
            let mut jac = DMatrix::zeros(self.rows(), kk);
            let mut da = DMatrix::zeros(self.rows(), 2 * kk);
            for (k, &g) in rates.iter().enumerate() {
                self.fill_columns(&mut da, k, kk, g, true);
                let dg = g * (1.0 - g / self.cap);
                let v = (da.column(k) * proj.x[k] + da.column(kk + k) * proj.x[kk + k]) * dg;
                let coeffs = proj.basis.tr_mul(&v);
                let col = v - &proj.basis * coeffs;
                jac.set_column(k, &col);
            }
            let jtj = jac.tr_mul(&jac);
            let jtr = jac.tr_mul(&proj.residual);
            let mut improved = false;
            for _ in 0..10 {
                let mut lhs = jtj.clone();
                for a in 0..kk {
                    lhs[(a, a)] += mu * jtj[(a, a)].max(1e-14);
                }
                let Some(chol) = lhs.cholesky() else {
                    mu *= 10.0;
                    continue;
                };
                let step = chol.solve(&(-&jtr));
                let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, d)| a + d.clamp(-3.0, 3.0)).collect();
                if let Some(p) = self.project(&rates_of(&trial)) {
                    let c = p.residual.norm_squared();
                    if c.is_finite() && c < cost {
                        let gain = (cost - c) / cost.max(f64::MIN_POSITIVE);
                        u = trial;
                        proj = p;
                        cost = c;
                        mu = (mu / 3.0).max(1e-12);
                        improved = true;
                        stall = if gain < 1e-8 { stall + 1 } else { 0 };
                        break;
                    }
                }
                mu *= 4.0;
            }
            if !improved || stall >= 3 {
                break;
            }
        }
        (cost, rates_of(&u))
    }

    fn modes(&self, rates: &[f64]) -> Option<BathModes> {
        let kk = rates.len();
        let proj = self.project(rates)?;
        let mut modes: Vec<Mode> = rates
            .iter()
            .enumerate()
            .map(|(k, &gamma)| Mode { d_re: proj.x[k], d_im: proj.x[kk + k], omega: 0.0, gamma })
            .collect();
        modes.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
        Some(BathModes { modes })
    }

    fn max_residual(&self, modes: &BathModes) -> f64 {
        self.t
            .iter()
            .zip(&self.c)
            .map(|(&t, &c)| (modes.correlation(t) - c).norm())
            .fold(0.0, f64::max)
    }
}

fn gamma_of(u: f64, cap: f64) -> f64 {
    cap / (1.0 + (-u).exp())
}

fn coord_of(gamma: f64, cap: f64) -> f64 {
    let x = (gamma / cap).clamp(1e-300, 1.0 - 1e-12);
    (x / (1.0 - x)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insertion_covers_gaps_and_ends() {
        let starts = insertion_starts(&[1.0, 100.0], 1000.0);
        assert_eq!(starts.len(), 3);
        assert!(starts.iter().all(|s| s.len() == 3));
        let inserted: Vec<f64> = starts.iter().map(|s| s.iter().copied().find(|g| *g != 1.0 && *g != 100.0).unwrap()).collect();
        assert!(inserted.contains(&(1.0 / 3.0)));
        assert!(inserted.contains(&300.0));
        assert!(inserted.iter().any(|g| (g - 10.0).abs() < 1e-12));
    }

    #[test]
    fn logistic_rate_map_round_trips() {
        for g in [1e-3, 0.5, 50.0, 999.0] {
            assert!((gamma_of(coord_of(g, 1000.0), 1000.0) - g).abs() < 1e-9 * g.max(1.0));
        }
    }

    #[test]
    fn grid_is_dense_then_logarithmic() {
        let spec = BathSpec::reference(1.0);
        let g = TimeGrid::for_bath(&spec, 200.0, 300);
        assert_eq!(g.times[0], 0.0);
        assert!((g.times[1] - 0.002).abs() < 1e-15);
        assert!((g.times.last().unwrap() - 200.0).abs() < 1e-9);
        assert!(g.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn tolerance_policy() {
        assert_eq!(default_tolerance(1.0), 1e-3);
        assert_eq!(default_tolerance(0.25), 1e-3);
        assert_eq!(default_tolerance(0.125), 1e-2);
    }
}
