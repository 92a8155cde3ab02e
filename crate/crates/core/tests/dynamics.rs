use std::f64::consts::PI;

use heom_core::baseline::{lindblad_rhs, Lindblad, LindbladRates};
use heom_core::bath::BathSpec;
use heom_core::control::*;
use heom_core::qubit::{fidelity, Bloch4, Matrix2};
use nalgebra::{Complex, Matrix2 as NMatrix2};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn to_na(m: &Matrix2<f64>) -> NMatrix2<C> {
    NMatrix2::new(m[0][0], m[0][1], m[1][0], m[1][1])
}

fn sqrtm(m: &NMatrix2<C>) -> NMatrix2<C> {
    let eig = m.symmetric_eigen();
    let d = NMatrix2::from_diagonal(&eig.eigenvalues.map(|l| Complex::new(l.max(0.0).sqrt(), 0.0)));
    eig.eigenvectors * d * eig.eigenvectors.adjoint()
}

fn random_state(rng: &mut ChaCha8Rng) -> Bloch4<f64> {
    let r: f64 = rng.gen_range(0.0..0.999);
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..2.0 * PI);
    let rho = (1.0 - z * z).sqrt();
    Bloch4::state(r * rho * phi.cos(), r * rho * phi.sin(), r * z)
}

#[test]
fn closed_form_fidelity_matches_matrix_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let (a, b) = (random_state(&mut rng), random_state(&mut rng));
        let sa = sqrtm(&to_na(&a.to_matrix()));
        let inner = sqrtm(&(sa * to_na(&b.to_matrix()) * sa));
        let oracle = inner.trace().re.powi(2);
        let ours = fidelity(&a, &b, 1e-8).unwrap();
        assert!((ours - oracle).abs() < 1e-10, "{ours} vs {oracle}");
        assert!((0.0..=1.0).contains(&ours));
        assert!((fidelity(&b, &a, 1e-8).unwrap() - ours).abs() < 1e-14);
    }
}

#[test]
fn isolated_sequences_match_closed_form() {
    let start = [Bloch4::excited(), Bloch4::ground(), Bloch4::new(1.0, 0.0, 0.0, -0.7)];
    for gate in Gate::ALL {
        for amplitude in [f64::INFINITY, 1.0, 0.5, 1.0 / 3.0] {
            for dt_over_pi in [0.0, 1.0, 1.5, 2.0] {
                let program = build_sequence(gate, amplitude, dt_over_pi * PI).unwrap();
                for rho0 in start {
                    let exact = closed_form_checkpoints(&program, rho0, 1.0);
                    let mut iso = Isolated::new(rho0, 1e-3);
                    let mut evs: [&mut dyn Evolution<f64>; 1] = [&mut iso];
                    let got = run_program(&program, 1.0, &mut evs, &mut |_, _, _| {}).unwrap();
                    for (d, (g, e)) in got.iter().zip(&exact).enumerate() {
                        let err = g[0].sub(*e).max_abs();
                        assert!(err < 1e-8, "{gate} Ω={amplitude} Δt={dt_over_pi}π d={d}: {err:e}");
                    }
                }
            }
        }
    }
}

#[test]
fn rotation_conventions() {
    let quarter = Bloch4::<f64>::ground().rotate([1.0, 0.0, 0.0], PI / 2.0);
    assert!(quarter.sub(Bloch4::state(0.0, 1.0, 0.0)).max_abs() < 1e-15);

    let lab = Bloch4::<f64>::state(1.0, 0.0, 0.0);
    let s = bloch(&lab, PI / 2.0, 1.0);
    assert!((s.rotating[0]).abs() < 1e-15 && (s.rotating[1] + 1.0).abs() < 1e-15);

    let run = |gate, rho0| {
        let p = build_sequence(gate, f64::INFINITY, 0.0).unwrap();
        *closed_form_checkpoints(&p, rho0, 1.0).last().unwrap()
    };
    assert!(run(Gate::RxPi, Bloch4::excited()).sub(Bloch4::ground()).max_abs() < 1e-12);
    let three_quarters = run(Gate::RxHalfPi, Bloch4::ground());
    assert!(three_quarters.sub(Bloch4::state(0.0, -1.0, 0.0)).max_abs() < 1e-12);
    let h = run(Gate::Hadamard, Bloch4::ground());
    assert!(h.sub(Bloch4::state(1.0, 0.0, 0.0)).max_abs() < 1e-12, "{h:?}");
}

type M = [[C; 2]; 2];

fn mm(a: &M, b: &M) -> M {
    let mut o = [[C::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                o[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    o
}

fn dag(a: &M) -> M {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn axpy(y: &M, a: C, x: &M) -> M {
    let mut o = *y;
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] += a * x[i][j];
        }
    }
    o
}

/// Matrix-form master equation: −i[H, ρ] + Σ Γ (LρL† − ½{L†L, ρ}).
fn matrix_rhs(rho: &M, h: &M, rates: &LindbladRates) -> M {
    let zero = C::new(0.0, 0.0);
    let one = C::new(1.0, 0.0);
    // Index 0 is |1⟩ (excited), index 1 is |0⟩.
    let lower: M = [[zero, zero], [one, zero]];
    let raise = dag(&lower);
    let mut d = axpy(&mm(h, rho), C::new(-1.0, 0.0), &mm(rho, h));
    d = d.map(|row| row.map(|v| v * C::new(0.0, -1.0)));
    for (l, g) in [(lower, rates.rate_down), (raise, rates.rate_up)] {
        let ld = dag(&l);
        let ll = mm(&ld, &l);
        let jump = mm(&mm(&l, rho), &ld);
        let anti = axpy(&mm(&ll, rho), one, &mm(rho, &ll));
        d = axpy(&d, C::new(g, 0.0), &jump);
        d = axpy(&d, C::new(-0.5 * g, 0.0), &anti);
    }
    d
}

#[test]
fn lindblad_bloch_form_matches_matrix_form() {
    let rates = LindbladRates::from_spec(&BathSpec::reference(1.0), 1.0);
    let drive = DriveParams::resonant(1.0, 0.4, 0.3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let rho = random_state(&mut rng);
        let t: f64 = rng.gen_range(0.0..10.0);
        let h = hamiltonian(&drive, t);
        let ours = lindblad_rhs(&rho, &h, &rates).to_matrix();
        let oracle = matrix_rhs(&rho.to_matrix(), &h.to_matrix(), &rates);
        // to_matrix maps (a₀, a) to (a₀ + a·σ)/2, which is linear, so derivatives compare directly.
        for i in 0..2 {
            for j in 0..2 {
                assert!((ours[i][j] - oracle[i][j]).norm() < 1e-14);
            }
        }
    }
}

#[test]
fn lindblad_propagation_matches_matrix_integration() {
    let rates = LindbladRates::from_spec(&BathSpec::reference(0.25), 1.0);
    let drive = DriveParams::resonant(1.0, 0.5, -0.4);
    let mut ours = Lindblad::new(Bloch4::excited(), rates, 1e-3);
    ours.evolve(&drive, 30.0, &mut |_, _| {}).unwrap();

    let mut rho = Bloch4::<f64>::excited().to_matrix();
    let n = 60_000;
    let h = 30.0 / n as f64;
    for k in 0..n {
        let t = k as f64 * h;
        let f = |t: f64, r: &M| matrix_rhs(r, &hamiltonian(&drive, t).to_matrix(), &rates);
        let k1 = f(t, &rho);
        let k2 = f(t + h / 2.0, &axpy(&rho, C::new(h / 2.0, 0.0), &k1));
        let k3 = f(t + h / 2.0, &axpy(&rho, C::new(h / 2.0, 0.0), &k2));
        let k4 = f(t + h, &axpy(&rho, C::new(h, 0.0), &k3));
        let mut next = rho;
        for (kk, w) in [(k1, 1.0), (k2, 2.0), (k3, 2.0), (k4, 1.0)] {
            next = axpy(&next, C::new(h * w / 6.0, 0.0), &kk);
        }
        rho = next;
    }
    let got = ours.rho.to_matrix();
    for i in 0..2 {
        for j in 0..2 {
            assert!((got[i][j] - rho[i][j]).norm() < 1e-9);
        }
    }
}

#[test]
fn lindblad_relaxes_to_detailed_balance_from_either_pole() {
    let rates = LindbladRates::from_spec(&BathSpec::reference(1.0), 1.0);
    let target = rates.equilibrium_z();
    assert!((target / 2.0 + 0.5 * (2.5f64).tanh()).abs() < 1e-12);
    for start in [Bloch4::excited(), Bloch4::ground()] {
        let mut l = Lindblad::new(start, rates, 0.01);
        let mut worst = 0.0f64;
        l.evolve(&DriveParams::idle(1.0), 600.0, &mut |_, r| {
            worst = worst.max(r.length());
            assert!((r.trace() - 1.0).abs() < 1e-12);
        })
        .unwrap();
        assert!(worst <= 1.0 + 1e-10);
        assert!((l.rho.z - target).abs() < 1e-8, "{} vs {target}", l.rho.z);
    }
}

#[test]
fn lindblad_rates_do_not_depend_on_the_exponent() {
    let a = LindbladRates::from_spec(&BathSpec::reference(1.0), 1.0);
    for s in [0.5, 0.25, 1.0 / 14.0] {
        let b = LindbladRates::from_spec(&BathSpec::reference(s), 1.0);
        assert!((a.rate_down - b.rate_down).abs() < 1e-15 && (a.rate_up - b.rate_up).abs() < 1e-15);
    }
}

#[test]
fn zero_rates_reduce_to_the_closed_system() {
    let program = build_sequence(Gate::Hadamard, 0.5, 1.5 * PI).unwrap();
    let mut l = Lindblad::new(Bloch4::excited(), LindbladRates::zero(), 1e-3);
    let mut iso = Isolated::new(Bloch4::excited(), 1e-3);
    let mut evs: [&mut dyn Evolution<f64>; 2] = [&mut l, &mut iso];
    let cps = run_program(&program, 1.0, &mut evs, &mut |_, _, _| {}).unwrap();
    for c in cps {
        assert!(c[0].sub(c[1]).max_abs() < 1e-14);
    }
}
