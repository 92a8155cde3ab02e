//! Two-level operators in the generalized Bloch representation.
//!
//! A Hermitian 2×2 operator is stored as ρ = (a₀·1 + a·σ)/2, so a₀ is the
//! trace and a the Bloch vector. Matrix views use the σ_z eigenbasis with the
//! +1 eigenvector (the excited state |1⟩) first.

use num_complex::Complex;

use crate::error::{HeomError, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Bloch4<T> {
    pub a0: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

pub type Matrix2<T> = [[Complex<T>; 2]; 2];

impl<T: Real> Bloch4<T> {
    pub fn new(a0: T, x: T, y: T, z: T) -> Self {
        Self { a0, x, y, z }
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [T; 4] {
        [self.a0, self.x, self.y, self.z]
    }

    /// Unit-trace state with the given Bloch vector.
    pub fn state(x: T, y: T, z: T) -> Self {
        Self::new(T::one(), x, y, z)
    }

    /// |1⟩⟨1|, the +z state.
    pub fn excited() -> Self {
        Self::state(T::zero(), T::zero(), T::one())
    }

    /// |0⟩⟨0|, the −z state.
    pub fn ground() -> Self {
        Self::state(T::zero(), T::zero(), -T::one())
    }

    pub fn mixed() -> Self {
        Self::state(T::zero(), T::zero(), T::zero())
    }

    pub fn trace(&self) -> T {
        self.a0
    }

    pub fn vector(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn length(&self) -> T {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// ⟨1|ρ|1⟩.
    pub fn excited_population(&self) -> T {
        (self.a0 + self.z) / T::of(2.0)
    }

    /// ⟨0|ρ|0⟩.
    pub fn ground_population(&self) -> T {
        (self.a0 - self.z) / T::of(2.0)
    }

    pub fn determinant(&self) -> T {
        (self.a0 * self.a0 - self.x * self.x - self.y * self.y - self.z * self.z) / T::of(4.0)
    }

    pub fn min_eigenvalue(&self) -> T {
        (self.a0 - self.length()) / T::of(2.0)
    }

    pub fn scale(self, c: T) -> Self {
        Self::new(self.a0 * c, self.x * c, self.y * c, self.z * c)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.a0 + o.a0, self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Self) -> Self {
        Self::new(self.a0 - o.a0, self.x - o.x, self.y - o.y, self.z - o.z)
    }

    pub fn max_abs(&self) -> T {
        self.to_array().iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Rotation of the Bloch vector by `angle` about the unit axis `n`
    /// (right-handed), i.e. ρ ↦ UρU† with U = exp(−i angle n·σ/2).
    pub fn rotate(self, n: [T; 3], angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let v = self.vector();
        let dot = n[0] * v[0] + n[1] * v[1] + n[2] * v[2];
        let cross = [
            n[1] * v[2] - n[2] * v[1],
            n[2] * v[0] - n[0] * v[2],
            n[0] * v[1] - n[1] * v[0],
        ];
        let k = (T::one() - c) * dot;
        Self::new(
            self.a0,
            v[0] * c + cross[0] * s + n[0] * k,
            v[1] * c + cross[1] * s + n[1] * k,
            v[2] * c + cross[2] * s + n[2] * k,
        )
    }

    pub fn rotate_z(self, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(self.a0, c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    pub fn to_matrix(&self) -> Matrix2<T> {
        let half = T::of(0.5);
        [
            [
                Complex::new((self.a0 + self.z) * half, T::zero()),
                Complex::new(self.x * half, -self.y * half),
            ],
            [
                Complex::new(self.x * half, self.y * half),
                Complex::new((self.a0 - self.z) * half, T::zero()),
            ],
        ]
    }

    /// Hermitian part of `m`, together with ‖m − m†‖_max.
    pub fn from_matrix(m: &Matrix2<T>) -> (Self, T) {
        let defect = [
            (m[0][0] - m[0][0].conj()).norm(),
            (m[1][1] - m[1][1].conj()).norm(),
            (m[0][1] - m[1][0].conj()).norm(),
        ]
        .into_iter()
        .fold(T::zero(), T::max);
        let off = (m[1][0] + m[0][1].conj()) * T::of(0.5);
        let b = Self::new(m[0][0].re + m[1][1].re, off.re * T::of(2.0), off.im * T::of(2.0), m[0][0].re - m[1][1].re);
        (b, defect)
    }

    /// Checks that this is a density matrix: unit trace and no eigenvalue below −`tol`.
    pub fn validate_state(&self, tol: T) -> Result<()> {
        let finite = self.to_array().iter().all(|v| v.is_finite());
        if !finite || (self.a0 - T::one()).abs() > tol || self.min_eigenvalue() < -tol {
            return Err(HeomError::InvalidState(format!(
                "not a density matrix: trace {}, smallest eigenvalue {}",
                self.a0,
                self.min_eigenvalue()
            )));
        }
        Ok(())
    }
}

/// Hamiltonian H = h₀·1 + h·σ as (h₀, h).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Hamiltonian<T> {
    pub h0: T,
    pub h: [T; 3],
}

impl<T: Real> Hamiltonian<T> {
    pub fn to_matrix(&self) -> Matrix2<T> {
        let [x, y, z] = self.h;
        [
            [Complex::new(self.h0 + z, T::zero()), Complex::new(x, -y)],
            [Complex::new(x, y), Complex::new(self.h0 - z, T::zero())],
        ]
    }

    /// −i[H, ρ] for ρ in Bloch form: the vector part rotates as 2 h × a.
    pub fn commutator(&self, a: Bloch4<T>) -> Bloch4<T> {
        let two = T::of(2.0);
        let [hx, hy, hz] = self.h;
        Bloch4::new(
            T::zero(),
            two * (hy * a.z - hz * a.y),
            two * (hz * a.x - hx * a.z),
            two * (hx * a.y - hy * a.x),
        )
    }
}

/// Uhlmann fidelity of two qubit states, F = tr(ρ_aρ_b) + 2√(det ρ_a det ρ_b).
///
/// Inputs must be density matrices up to `tol` (trace and eigenvalues);
/// slightly negative determinants are clamped to zero.
pub fn fidelity<T: Real>(a: &Bloch4<T>, b: &Bloch4<T>, tol: T) -> Result<T> {
    a.validate_state(tol)?;
    b.validate_state(tol)?;
    let overlap = (a.a0 * b.a0 + a.x * b.x + a.y * b.y + a.z * b.z) / T::of(2.0);
    let det = a.determinant().max(T::zero()) * b.determinant().max(T::zero());
    Ok((overlap + T::of(2.0) * det.sqrt()).max(T::zero()).min(T::one()))
}
