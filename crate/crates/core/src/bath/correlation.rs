//! Exact bath autocorrelation C(t) = ∫ dω S_β(ω) e^{-iωt} by quadrature.
//!
//! Writing coth(βω/2) = 1 + 2 n_β(ω) splits C(t) into a zero-temperature
//! piece ∫₀^∞ J(ω) e^{-iωt} dω and a thermal piece 2∫₀^∞ J(ω) n_β(ω) cos ωt dω.
//! The first is integrated along the ray ω = r e^{-iπ/4}, where the
//! integrand decays like e^{-rt/√2} instead of oscillating; the sector between
//! the ray and the real axis holds no poles of J, whose only singularities
//! sit at ±iω_c. The thermal piece is exponentially cut off by n_β and is
//! integrated on the real axis with the substitution ω = ω₀ u^{1/s} near the
//! integrable ω^{s-1} singularity.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;

use super::spec::BathSpec;
use crate::error::Result;
use crate::quad::{integrate, integrate_real, QuadOptions};

/// Relative accuracy requested from the correlation quadrature.
pub const CORRELATION_RTOL: f64 = 1e-10;

/// Quadrature evaluator for C(t); caches |C(0)| to set absolute tolerances.
#[derive(Clone, Debug)]
pub struct CorrelationOracle {
    spec: BathSpec,
    scale: f64,
}

impl CorrelationOracle {
    pub fn new(spec: BathSpec) -> Result<Self> {
        spec.validate()?;
        let mut oracle = Self { spec, scale: 1.0 };
        let c0 = oracle.zero_temperature(0.0)? + oracle.thermal(0.0)?;
        oracle.scale = c0.norm().max(f64::MIN_POSITIVE);
        Ok(oracle)
    }

    pub fn spec(&self) -> &BathSpec {
        &self.spec
    }

    /// |C(0)|, the normalisation used for relative fit tolerances.
    pub fn c0(&self) -> f64 {
        self.scale
    }

    fn opts(&self) -> QuadOptions {
        QuadOptions {
            abs_tol: 1e-2 * CORRELATION_RTOL * self.scale,
            rel_tol: CORRELATION_RTOL,
            max_panels: 50_000,
        }
    }

    /// C(t) for t ≥ 0.
    pub fn eval(&self, t: f64) -> Result<Complex64> {
        let t = t.max(0.0);
        Ok(self.zero_temperature(t)? + self.thermal(t)?)
    }

    pub fn eval_many(&self, times: &[f64]) -> Result<Vec<Complex64>> {
        use rayon::prelude::*;
        times.par_iter().map(|&t| self.eval(t)).collect()
    }

    fn j_complex(&self, w: Complex64) -> Complex64 {
        let sp = &self.spec;
        let x = w / sp.omega_c;
        let cut = Complex64::new(1.0, 0.0) + x * x;
        w.powf(sp.s) * (sp.kappa * sp.omega_ph.powf(1.0 - sp.s)) / (cut * cut)
    }

    fn zero_temperature(&self, t: f64) -> Result<Complex64> {
        let sp = self.spec;
        let wc = sp.omega_c;
        let opts = self.opts();
        if t == 0.0 {
            let low = self.low_panel(0.0, wc, |w| sp.spectral_density(w), opts)?;
            let high = integrate_real(
                |v| {
                    if v <= 0.0 {
                        return 0.0;
                    }
                    let w = wc / v;
                    sp.spectral_density(w) * wc / (v * v)
                },
                0.0,
                1.0,
                4,
                opts,
            )?
            .0;
            return Ok(Complex64::new(low + high, 0.0));
        }
        let phase = Complex64::from_polar(1.0, -FRAC_PI_4);
        let integrand = |r: f64| -> Complex64 {
            let w = phase * r;
            let e = (Complex64::new(0.0, -t) * w).exp();
            self.j_complex(w) * e * phase
        };
        let reach = 46.0 / (t * FRAC_PI_4.sin());
        if reach <= wc {
            let r = self.complex_low_panel(0.0, reach, &integrand, 8, opts)?;
            return Ok(r);
        }
        let low = self.complex_low_panel(0.0, wc, &integrand, 8, opts)?;
        let high = integrate(
            |v| {
                if v <= 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                integrand(wc / v) * (wc / (v * v))
            },
            0.0,
            1.0,
            4,
            opts,
        )?
        .value;
        Ok(low + high)
    }

    fn thermal(&self, t: f64) -> Result<Complex64> {
        let sp = self.spec;
        let opts = self.opts();
        let top = 46.0 / sp.beta;
        let knee = top.min(1.0);
        let f = |w: f64| 2.0 * sp.spectral_density(w) * sp.bose(w) * (w * t).cos();
        let low = self.low_panel(0.0, knee, f, opts)?;
        let panels = ((top - knee) * t / std::f64::consts::PI).ceil().max(4.0) as usize;
        let high = integrate_real(f, knee, top, panels, opts)?.0;
        Ok(Complex64::new(low + high, 0.0))
    }

    /// ∫_a^b f over a panel starting at zero, using ω = b u^{1/s} for s < 1.
    fn low_panel<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F, opts: QuadOptions) -> Result<f64> {
        debug_assert_eq!(a, 0.0);
        let s = self.spec.s;
        if s >= 1.0 {
            return Ok(integrate_real(f, a, b, 4, opts)?.0);
        }
        let p = 1.0 / s;
        Ok(integrate_real(
            |u| {
                if u <= 0.0 {
                    return 0.0;
                }
                let w = b * u.powf(p);
                f(w) * b * p * u.powf(p - 1.0)
            },
            0.0,
            1.0,
            8,
            opts,
        )?
        .0)
    }

    fn complex_low_panel<F: Fn(f64) -> Complex64>(
        &self,
        a: f64,
        b: f64,
        f: &F,
        panels: usize,
        opts: QuadOptions,
    ) -> Result<Complex64> {
        debug_assert_eq!(a, 0.0);
        let s = self.spec.s;
        if s >= 1.0 {
            return Ok(integrate(f, a, b, panels, opts)?.value);
        }
        let p = 1.0 / s;
        Ok(integrate(
            |u| {
                if u <= 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let w = b * u.powf(p);
                f(w) * (b * p * u.powf(p - 1.0))
            },
            0.0,
            1.0,
            panels,
            opts,
        )?
        .value)
    }
}

/// Exponent of the short-time "universal decoherence" law,
/// Γ(t) = 4 ∫₀^∞ dω J(ω) coth(βω/2) (1 − cos ωt)/ω², so that ⟨σ_z(t)⟩ = e^{−Γ(t)}
/// for a qubit starting in |1⟩ when the system Hamiltonian is negligible.
pub fn decoherence_exponent(spec: &BathSpec, t: f64) -> Result<f64> {
    spec.validate()?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let sp = *spec;
    let f = move |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let half = 0.5 * w * t;
        let one_minus_cos = 2.0 * half.sin() * half.sin();
        let coth = 1.0 / (0.5 * sp.beta * w).tanh();
        4.0 * sp.spectral_density(w) * coth * one_minus_cos / (w * w)
    };
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-11,
        max_panels: 50_000,
    };
    let knee = 1.0;
    let low = if sp.s >= 1.0 {
        integrate_real(f, 0.0, knee, 4, opts)?.0
    } else {
        let p = 1.0 / sp.s;
        integrate_real(
            |u| {
                if u <= 0.0 {
                    return 0.0;
                }
                f(knee * u.powf(p)) * knee * p * u.powf(p - 1.0)
            },
            0.0,
            1.0,
            8,
            opts,
        )?
        .0
    };
    let wc = sp.omega_c.max(knee);
    let mid = integrate_real(f, knee, wc, 8, opts)?.0;
    let high = integrate_real(
        |v| {
            if v <= 0.0 {
                return 0.0;
            }
            f(wc / v) * wc / (v * v)
        },
        0.0,
        1.0,
        4,
        opts,
    )?
    .0;
    Ok(low + mid + high)
}
