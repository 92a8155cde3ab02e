//! Dense reference for the smallest hierarchy, shared by the integration tests.

use std::collections::HashMap;

use heom_core::bath::{BathModes, Mode};
use heom_core::hierarchy::{HeomConfig, HierarchyState, Propagator};
use heom_core::qubit::{Bloch4, Hamiltonian};
use nalgebra::DMatrix;
use num_complex::Complex64 as C;

type M2 = [[C; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
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

fn lin(a: &M2, ca: C, b: &M2, cb: C) -> M2 {
    let mut o = [[C::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] = ca * a[i][j] + cb * b[i][j];
        }
    }
    o
}

fn comm(v: &M2, r: &M2) -> M2 {
    lin(&mul(v, r), C::new(1.0, 0.0), &mul(r, v), C::new(-1.0, 0.0))
}

fn anti(v: &M2, r: &M2) -> M2 {
    lin(&mul(v, r), C::new(1.0, 0.0), &mul(r, v), C::new(1.0, 0.0))
}

/// Dense generator of the K = 1 hierarchy written straight from the matrix form
/// of the equation of motion, over the stack of 2×2 ADOs with m + n ≤ n_max.
pub fn dense_generator(mode: &Mode, n_max: usize, h: &M2) -> (DMatrix<C>, Vec<(usize, usize)>) {
    let tuples: Vec<(usize, usize)> = (0..=n_max).flat_map(|m| (0..=n_max - m).map(move |n| (m, n))).collect();
    let pos: HashMap<(usize, usize), usize> = tuples.iter().enumerate().map(|(i, &t)| (t, i)).collect();
    let dim = 4 * tuples.len();
    let zero = C::new(0.0, 0.0);
    let one = C::new(1.0, 0.0);
    let i_unit = C::new(0.0, 1.0);
    let v: M2 = [[zero, one], [one, zero]];
    let (dr, di) = (mode.d_re, mode.d_im);
    let mut l = DMatrix::<C>::zeros(dim, dim);
    for col in 0..dim {
        let mut stack = vec![[[zero; 2]; 2]; tuples.len()];
        stack[col / 4][(col % 4) / 2][col % 2] = one;
        let get = |m: isize, n: isize| -> M2 {
            if m < 0 || n < 0 {
                return [[zero; 2]; 2];
            }
            pos.get(&(m as usize, n as usize)).map_or([[zero; 2]; 2], |&j| stack[j])
        };
        for (i, &(m, n)) in tuples.iter().enumerate() {
            let (mi, ni) = (m as isize, n as isize);
            let (mf, nf) = (m as f64, n as f64);
            let r = stack[i];
            let mut d = lin(&comm(h, &r), -i_unit, &r, C::new(-(mf + nf) * mode.gamma, 0.0));
            d = lin(&d, one, &get(mi - 1, ni + 1), C::new(mode.omega * (mf * (nf + 1.0)).sqrt(), 0.0));
            d = lin(&d, one, &get(mi + 1, ni - 1), C::new(-mode.omega * ((mf + 1.0) * nf).sqrt(), 0.0));
            d = lin(&d, one, &comm(&v, &get(mi + 1, ni)), -i_unit * (mf + 1.0).sqrt());
            let down_m = get(mi - 1, ni);
            d = lin(&d, one, &comm(&v, &down_m), -i_unit * dr * mf.sqrt());
            d = lin(&d, one, &anti(&v, &down_m), C::new(di * mf.sqrt(), 0.0));
            let down_n = get(mi, ni - 1);
            d = lin(&d, one, &comm(&v, &down_n), -i_unit * di * nf.sqrt());
            d = lin(&d, one, &anti(&v, &down_n), C::new(-dr * nf.sqrt(), 0.0));
            for a in 0..2 {
                for b in 0..2 {
                    l[(4 * i + 2 * a + b, col)] = d[a][b];
                }
            }
        }
    }
    (l, tuples)
}

/// Largest entry-wise difference between the propagator and the exponentiated
/// dense generator for K = 1, N_max = 2, over ten steps of 0.5.
pub fn small_instance_max_deviation() -> f64 {
    let mode = Mode { d_re: 0.05, d_im: 0.02, omega: 0.7, gamma: 1.3 };
    let modes = BathModes::new(vec![mode]).unwrap();
    let ham = Hamiltonian { h0: 0.0, h: [0.15, 0.0, 0.5] };
    let (gen, tuples) = dense_generator(&mode, 2, &ham.to_matrix());

    let mut config = HeomConfig::new(modes, 2);
    config.dt = 1e-3;
    let mut prop = Propagator::<f64>::new(&config).unwrap();
    let start = Bloch4::state(0.3, -0.2, 0.8);
    let mut state = HierarchyState::factorized(prop.indices().clone(), start);
    assert_eq!(state.len(), tuples.len());

    let mut x = nalgebra::DVector::<C>::zeros(4 * tuples.len());
    let rho0 = start.to_matrix();
    for a in 0..2 {
        for b in 0..2 {
            x[2 * a + b] = rho0[a][b];
        }
    }
    let step = 0.5;
    let u = (gen * C::new(step, 0.0)).exp();
    let mut worst = 0.0f64;
    for _ in 0..10 {
        x = &u * x;
        prop.evolve(&mut state, &|_| ham, step, |_| {}).unwrap();
        for (j, &(m, n)) in tuples.iter().enumerate() {
            let i = state.indices.position(&[m as u8], &[n as u8]).unwrap();
            let ours = state.ado(i).to_matrix();
            for a in 0..2 {
                for b in 0..2 {
                    worst = worst.max((ours[a][b] - x[4 * j + 2 * a + b]).norm());
                }
            }
        }
    }
    worst
}
