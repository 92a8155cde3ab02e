//! Adaptive Gauss–Kronrod (7/15) quadrature for complex-valued integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64;

use crate::error::{HeomError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Outcome of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct QuadResult {
    pub value: Complex64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_panels: 20_000,
        }
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    let value = k * h;
    let err = ((k - g) * h).norm();
    (value, err)
}

/// Integrates `f` over `[a, b]`, first splitting it into `initial` equal panels.
pub fn integrate<F>(mut f: F, a: f64, b: f64, initial: usize, opts: QuadOptions) -> Result<QuadResult>
where
    F: FnMut(f64) -> Complex64,
{
    let initial = initial.max(1);
    let mut heap = BinaryHeap::with_capacity(initial * 4);
    let mut total = Complex64::new(0.0, 0.0);
    let mut total_err = 0.0;
    let width = (b - a) / initial as f64;
    for i in 0..initial {
        let lo = a + width * i as f64;
        let hi = if i + 1 == initial { b } else { lo + width };
        let (value, error) = kronrod(&mut f, lo, hi);
        total += value;
        total_err += error;
        heap.push(Panel { a: lo, b: hi, value, error });
    }
    let mut panels = initial;
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.norm());
        if total_err <= tol {
            break;
        }
        if panels >= opts.max_panels {
            return Err(HeomError::Quadrature {
                achieved: total_err,
                requested: tol,
            });
        }
        let worst = heap.pop().expect("heap never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            return Err(HeomError::Quadrature {
                achieved: total_err,
                requested: tol,
            });
        }
        let (v1, e1) = kronrod(&mut f, worst.a, mid);
        let (v2, e2) = kronrod(&mut f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        panels += 1;
    }
    // Re-sum to shed the drift of incremental updates.
    let value = heap.iter().fold(Complex64::new(0.0, 0.0), |acc, p| acc + p.value);
    let abs_error = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult {
        value,
        abs_error,
        evaluations: panels * 15,
    })
}

/// Real-valued convenience wrapper.
pub fn integrate_real<F>(mut f: F, a: f64, b: f64, initial: usize, opts: QuadOptions) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let r = integrate(|x| Complex64::new(f(x), 0.0), a, b, initial, opts)?;
    Ok((r.value.re, r.abs_error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let (v, _) = integrate_real(|x| 3.0 * x * x, 0.0, 2.0, 1, QuadOptions::default()).unwrap();
        assert!((v - 8.0).abs() < 1e-14);
    }

    #[test]
    fn oscillatory_complex() {
        let t = 50.0;
        let r = integrate(
            |x| Complex64::new(0.0, -x * t).exp(),
            0.0,
            3.0,
            4,
            QuadOptions::default(),
        )
        .unwrap();
        let exact = (Complex64::new(0.0, -3.0 * t).exp() - 1.0) / Complex64::new(0.0, -t);
        assert!((r.value - exact).norm() < 1e-11);
    }

    #[test]
    fn endpoint_singularity() {
        let (v, _) = integrate_real(|x| x.powf(-0.5), 0.0, 1.0, 1, QuadOptions::default()).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }

    #[test]
    fn reports_failure() {
        let opts = QuadOptions { max_panels: 3, ..Default::default() };
        let err = integrate_real(|x| (1.0 / x).sin(), 1e-6, 1.0, 1, opts).unwrap_err();
        assert!(matches!(err, HeomError::Quadrature { .. }));
    }
}
