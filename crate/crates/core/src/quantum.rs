// SPDX-License-Identifier: Apache-2.0

//! States, bases and the Choi–Jamiolkowski representation of channels.
//!
//! The Choi matrix of a channel `E` on `C^d` is
//! `chi = (I ⊗ E)(|omega><omega|)` with `|omega> = d^{-1/2} sum_j |j>|j>`
//! in the computational basis. Input comes first in every tensor product.
//! Storage is 0-based; every phase formula below uses the 1-based labels
//! `j, k = 1..d`.

use nalgebra::ComplexField;
use crate::error::{Error, Result};
use crate::linalg::{
    self, basis_vector, braket, kron_vec, max_abs_diff, norm, CMat, CVec,
};
use crate::scalar::{cis, cr, Real, C};

/// A normalized pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState<T: Real> {
    amps: CVec<T>,
}

impl<T: Real> PureState<T> {
    /// Wraps amplitudes that are already normalized.
    pub fn new(amps: CVec<T>) -> Result<Self> {
        let n = norm(&amps);
        if (n - T::one()).abs() > T::tol(|t| t.check) {
            return Err(Error::Invariant(format!("state norm {n} differs from 1")));
        }
        Ok(Self { amps })
    }

    /// Normalizes `amps`.
    pub fn from_unnormalized(amps: CVec<T>) -> Result<Self> {
        let n = norm(&amps);
        if n <= T::zero() {
            return Err(Error::ZeroOperator);
        }
        Ok(Self { amps: amps.unscale(n) })
    }

    pub(crate) fn from_raw(amps: CVec<T>) -> Self {
        Self { amps }
    }

    /// Computational basis state `|i>` (0-based).
    pub fn computational(d: usize, i: usize) -> Self {
        Self { amps: basis_vector(d, i) }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVec<T> {
        &self.amps
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &Self) -> C<T> {
        braket(&self.amps, &other.amps)
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self { amps: kron_vec(&self.amps, &other.amps) }
    }

    pub fn projector(&self) -> CMat<T> {
        linalg::projector(&self.amps)
    }
}

/// An ordered orthonormal basis of `C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis<T: Real> {
    vectors: Vec<PureState<T>>,
}

impl<T: Real> Basis<T> {
    /// Validates orthonormality to the `check` tolerance.
    pub fn new(vectors: Vec<PureState<T>>) -> Result<Self> {
        let d = vectors.len();
        if d == 0 {
            return Err(Error::InvalidDimension(0, "basis must be nonempty"));
        }
        if let Some(v) = vectors.iter().find(|v| v.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: v.dim() });
        }
        let basis = Self { vectors };
        let dev = basis.orthonormality_error();
        if dev > T::tol(|t| t.check) {
            return Err(Error::Invariant(format!("basis not orthonormal (deviation {dev})")));
        }
        Ok(basis)
    }

    pub(crate) fn from_raw(vectors: Vec<PureState<T>>) -> Self {
        Self { vectors }
    }

    pub fn computational(d: usize) -> Self {
        Self { vectors: (0..d).map(|i| PureState::computational(d, i)).collect() }
    }

    /// Columns of `m` as a basis.
    pub fn from_columns(m: &CMat<T>) -> Result<Self> {
        let vectors = m.column_iter().map(|c| PureState::from_raw(c.into_owned())).collect();
        Self::new(vectors)
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[PureState<T>] {
        &self.vectors
    }

    pub fn get(&self, i: usize) -> &PureState<T> {
        &self.vectors[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PureState<T>> {
        self.vectors.iter()
    }

    /// Matrix whose columns are the basis vectors.
    pub fn matrix(&self) -> CMat<T> {
        CMat::from_columns(&self.vectors.iter().map(|v| v.amps.clone()).collect::<Vec<_>>())
    }

    /// `max |<b_i|b_j> - delta_ij|`.
    pub fn orthonormality_error(&self) -> T {
        let m = self.matrix();
        max_abs_diff(&(m.adjoint() * &m), &linalg::identity(self.dim()))
    }

    /// `max | |<a_j|b_k>| - d^{-1/2} |` against another basis.
    pub fn unbiasedness_error(&self, other: &Self) -> T {
        let target = T::one() / T::from_usize_lossy(self.dim()).sqrt();
        let mut worst = T::zero();
        for a in &self.vectors {
            for b in &other.vectors {
                worst = worst.max((a.overlap(b).modulus() - target).abs());
            }
        }
        worst
    }

    /// Applies a matrix to every vector.
    pub fn transformed(&self, u: &CMat<T>) -> Result<Self> {
        Self::new(self.vectors.iter().map(|v| PureState::from_raw(u * &v.amps)).collect())
    }
}

/// Choi matrix of a (possibly trace-decreasing) channel on `C^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiMatrix<T: Real> {
    d: usize,
    mat: CMat<T>,
}

impl<T: Real> ChoiMatrix<T> {
    /// Validates shape, Hermiticity and positive semidefiniteness.
    pub fn from_matrix(mat: CMat<T>) -> Result<Self> {
        let n = mat.nrows();
        let d = (n as f64).sqrt().round() as usize;
        if d * d != n || !mat.is_square() || d < 1 {
            return Err(Error::InvalidDimension(n, "Choi matrix must be d^2 x d^2"));
        }
        let tol = T::tol(|t| t.check);
        let scale = T::one() + mat.iter().fold(T::zero(), |m, z| m.max(z.modulus()));
        if !linalg::is_hermitian(&mat, tol * scale) {
            return Err(Error::Invariant("Choi matrix is not Hermitian".into()));
        }
        let min = linalg::min_eigenvalue(&mat);
        if min < -T::tol(|t| t.zero_eigenvalue) * scale {
            return Err(Error::Invariant(format!("Choi matrix not PSD (min eigenvalue {min})")));
        }
        Ok(Self { d, mat })
    }

    pub(crate) fn from_raw(d: usize, mat: CMat<T>) -> Self {
        Self { d, mat }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &CMat<T> {
        &self.mat
    }

    pub fn trace(&self) -> T {
        self.mat.trace().re
    }

    /// `a * self + b * other`, for nonnegative weights.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: other.d });
        }
        Ok(Self { d: self.d, mat: &self.mat * cr(a) + &other.mat * cr(b) })
    }
}

/// `|omega> = d^{-1/2} sum_j |j>|j>`.
pub fn maximally_entangled_state<T: Real>(d: usize) -> Result<PureState<T>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d, "need d >= 2"));
    }
    let s = T::one() / T::from_usize_lossy(d).sqrt();
    let mut v = CVec::zeros(d * d);
    for j in 0..d {
        v[j * d + j] = cr(s);
    }
    Ok(PureState::from_raw(v))
}

/// `f_k = d^{-1/2} sum_j exp(2 pi i j k / d) e_j`, `j, k = 1..d`.
pub fn fourier_basis<T: Real>(e: &Basis<T>) -> Result<Basis<T>> {
    let dev = e.orthonormality_error();
    if dev > T::tol(|t| t.check) {
        return Err(Error::Invariant(format!("input basis not orthonormal (deviation {dev})")));
    }
    let d = e.dim();
    let df = T::from_usize_lossy(d);
    let s = T::one() / df.sqrt();
    let vectors = (1..=d)
        .map(|k| {
            let mut v = CVec::zeros(d);
            for j in 1..=d {
                // reduce j*k mod d before scaling to keep the phase exact
                let jk = (j * k) % d;
                let phase = T::two_pi() * T::from_usize_lossy(jk) / df;
                v += e.get(j - 1).amplitudes() * (cis(phase) * cr(s));
            }
            PureState::from_raw(v)
        })
        .collect();
    Ok(Basis::from_raw(vectors))
}

/// `H^{⊗n}|k_1...k_n>` ordered by the binary index `k`.
pub fn hadamard_product_basis<T: Real>(n: usize) -> Result<Basis<T>> {
    if n == 0 {
        return Err(Error::InvalidDimension(0, "need at least one qubit"));
    }
    let d = 1usize << n;
    let s = T::one() / T::from_usize_lossy(d).sqrt();
    let vectors = (0..d)
        .map(|k| {
            // <j|H^n|k> = 2^{-n/2} (-1)^{popcount(j & k)}
            let v = CVec::from_fn(d, |j, _| {
                if (j & k).count_ones() % 2 == 0 {
                    cr(s)
                } else {
                    cr(-s)
                }
            });
            PureState::from_raw(v)
        })
        .collect();
    Ok(Basis::from_raw(vectors))
}

/// The `d^2` maximally entangled states `|omega_jk> = (Z^{j-1} W^{k-1} ⊗ I)|omega>`
/// with the shift `Z|e_j> = |e_{j+1 mod d}>` and the clock
/// `W|e_j> = exp(2 pi i j / d)|e_j>`. Ordered with `j` outer, `k` inner.
pub fn bell_mub_basis<T: Real>(d: usize) -> Result<Vec<PureState<T>>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d, "need d >= 2"));
    }
    let df = T::from_usize_lossy(d);
    let s = T::one() / df.sqrt();
    let mut out = Vec::with_capacity(d * d);
    for shift in 0..d {
        for clock in 0..d {
            let mut v = CVec::zeros(d * d);
            for j in 1..=d {
                let phase = T::two_pi() * T::from_usize_lossy((clock * j) % d) / df;
                let row = (j - 1 + shift) % d;
                v[row * d + (j - 1)] = cis(phase) * cr(s);
            }
            out.push(PureState::from_raw(v));
        }
    }
    Ok(out)
}

/// `chi = sum_i (I ⊗ K_i)|omega><omega|(I ⊗ K_i^dag)`.
pub fn choi_of_kraus<T: Real>(kraus: &[CMat<T>]) -> Result<ChoiMatrix<T>> {
    let first = kraus.first().ok_or(Error::InvalidDimension(0, "empty Kraus list"))?;
    let d = first.nrows();
    if d == 0 {
        return Err(Error::InvalidDimension(0, "empty operator"));
    }
    let mut gram = CMat::zeros(d, d);
    for k in kraus {
        if k.nrows() != d || k.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: k.nrows().max(k.ncols()) });
        }
        gram += k.adjoint() * k;
    }
    let top = linalg::eigenvalues(&gram).last().copied().unwrap_or_else(T::zero);
    if top > T::one() + T::lit(1e-9).max(T::tol(|t| t.check)) {
        return Err(Error::TraceIncreasing(top.to_f64_lossy()));
    }
    let mut mat = CMat::zeros(d * d, d * d);
    for k in kraus {
        let w = choi_vector(k);
        mat += &w * w.adjoint();
    }
    Ok(ChoiMatrix::from_raw(d, mat))
}

/// `|omega_K> = (I ⊗ K)|omega>`, i.e. entries `K[b, a] / sqrt(d)` at `(a, b)`.
pub fn choi_vector<T: Real>(k: &CMat<T>) -> CVec<T> {
    let d = k.nrows();
    let s = T::one() / T::from_usize_lossy(d).sqrt();
    let mut w = CVec::zeros(d * d);
    for a in 0..d {
        for b in 0..d {
            w[a * d + b] = k[(b, a)] * cr(s);
        }
    }
    w
}

/// `F = Tr(chi chi_F) / (Tr chi Tr chi_F)`.
pub fn process_fidelity<T: Real>(chi: &ChoiMatrix<T>, target: &ChoiMatrix<T>) -> Result<T> {
    if chi.d != target.d {
        return Err(Error::DimensionMismatch { expected: target.d, found: chi.d });
    }
    let (ta, tb) = (chi.trace(), target.trace());
    if ta <= T::zero() || tb <= T::zero() {
        return Err(Error::DegenerateChannel);
    }
    Ok(linalg::trace_product(&chi.mat, &target.mat) / (ta * tb))
}

/// Unnormalized output `d Tr_in(chi (|psi><psi|)^T ⊗ I)`.
pub fn output_state<T: Real>(chi: &ChoiMatrix<T>, psi: &PureState<T>) -> Result<CMat<T>> {
    output_of_input(chi, &psi.projector())
}

/// Unnormalized output `d Tr_in(chi rho^T ⊗ I)` for a density matrix `rho`.
pub fn output_of_input<T: Real>(chi: &ChoiMatrix<T>, rho: &CMat<T>) -> Result<CMat<T>> {
    let d = chi.d;
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: rho.nrows() });
    }
    let df = cr(T::from_usize_lossy(d));
    let mut out = CMat::zeros(d, d);
    for a in 0..d {
        for ap in 0..d {
            // (rho^T)[ap, a] = rho[a, ap]
            let w = rho[(a, ap)];
            if w == cr(T::zero()) {
                continue;
            }
            for b in 0..d {
                for bp in 0..d {
                    out[(b, bp)] += chi.mat[(a * d + b, ap * d + bp)] * w;
                }
            }
        }
    }
    Ok(out * df)
}
