// SPDX-License-Identifier: Apache-2.0

//! Dense complex linear algebra helpers on top of `nalgebra`.
//!
//! Tensor products are ordered `input ⊗ output`; the basis index of
//! `|a>|b>` on `C^d ⊗ C^d` is `a * d + b`.

use nalgebra::ComplexField;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::scalar::{c, cr, Real, C};

pub type CMat<T> = DMatrix<C<T>>;
pub type CVec<T> = DVector<C<T>>;

/// `<a|b>`.
pub fn braket<T: Real>(a: &CVec<T>, b: &CVec<T>) -> C<T> {
    a.iter().zip(b.iter()).fold(C::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}

pub fn norm<T: Real>(v: &CVec<T>) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr()).sqrt()
}

/// `|v><v|`.
pub fn projector<T: Real>(v: &CVec<T>) -> CMat<T> {
    v * v.adjoint()
}

/// `<v|M|v>`, real part.
pub fn expectation<T: Real>(m: &CMat<T>, v: &CVec<T>) -> T {
    braket(v, &(m * v)).re
}

pub fn identity<T: Real>(n: usize) -> CMat<T> {
    CMat::identity(n, n)
}

pub fn basis_vector<T: Real>(d: usize, i: usize) -> CVec<T> {
    let mut v = CVec::zeros(d);
    v[i] = cr(T::one());
    v
}

pub fn kron<T: Real>(a: &CMat<T>, b: &CMat<T>) -> CMat<T> {
    a.kronecker(b)
}

pub fn kron_vec<T: Real>(a: &CVec<T>, b: &CVec<T>) -> CVec<T> {
    a.kronecker(b)
}

pub fn trace<T: Real>(m: &CMat<T>) -> C<T> {
    m.trace()
}

/// Real part of `Tr(a b)`.
pub fn trace_product<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    let n = a.nrows();
    let mut acc = T::zero();
    for i in 0..n {
        for k in 0..n {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// Elementwise `max |a_ij - b_ij|`.
pub fn max_abs_diff<T: Real>(a: &CMat<T>, b: &CMat<T>) -> T {
    a.iter().zip(b.iter()).fold(T::zero(), |m, (x, y)| m.max((*x - *y).modulus()))
}

pub fn is_hermitian<T: Real>(m: &CMat<T>, tol: T) -> bool {
    m.is_square() && max_abs_diff(m, &m.adjoint()) <= tol
}

/// Entrywise complex conjugate `M^*`; for a projector `|v><v|` this equals
/// the transpose in the computational basis.
pub fn conj<T: Real>(m: &CMat<T>) -> CMat<T> {
    m.map(|z| z.conj())
}

pub fn conj_vec<T: Real>(v: &CVec<T>) -> CVec<T> {
    v.map(|z| z.conj())
}

/// Trace over the first (input) factor of `C^d ⊗ C^d`.
pub fn partial_trace_input<T: Real>(m: &CMat<T>, d: usize) -> CMat<T> {
    let mut out = CMat::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            for bp in 0..d {
                out[(b, bp)] += m[(a * d + b, a * d + bp)];
            }
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in ascending order.
pub fn hermitian_eigen<T: Real>(m: &CMat<T>) -> (Vec<T>, CMat<T>) {
    let h = (m + m.adjoint()) * cr(T::lit(0.5));
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_columns(
        &order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
    );
    (values, vectors)
}

pub fn eigenvalues<T: Real>(m: &CMat<T>) -> Vec<T> {
    hermitian_eigen(m).0
}

pub fn min_eigenvalue<T: Real>(m: &CMat<T>) -> T {
    eigenvalues(m).first().copied().unwrap_or_else(T::zero)
}

/// Largest singular value.
pub fn spectral_norm<T: Real>(m: &CMat<T>) -> T {
    let g = m.adjoint() * m;
    eigenvalues(&g).last().copied().unwrap_or_else(T::zero).max(T::zero()).sqrt()
}

/// Orthogonalize `v` against `against` (modified Gram-Schmidt, two passes).
pub fn orthogonalize<T: Real>(v: &CVec<T>, against: &[CVec<T>]) -> CVec<T> {
    let mut r = v.clone();
    for _ in 0..2 {
        for u in against {
            let proj = braket(u, &r);
            r -= u * proj;
        }
    }
    r
}

/// Completes an orthonormal list to a basis of `C^d` by Gram-Schmidt over
/// the computational vectors in order, skipping candidates whose residual
/// norm is below `drop_tol`.
pub fn complete_basis<T: Real>(start: &[CVec<T>], d: usize, drop_tol: T) -> Vec<CVec<T>> {
    let mut out: Vec<CVec<T>> = start.to_vec();
    for i in 0..d {
        if out.len() >= d {
            break;
        }
        let r = orthogonalize(&basis_vector(d, i), &out);
        let n = norm(&r);
        if n > drop_tol {
            out.push(r.unscale(n));
        }
    }
    out
}

/// Multiplies `v` by the phase that makes its first largest-modulus entry
/// real and positive; returns the rephased vector and the applied phase.
pub fn fix_phase<T: Real>(v: &CVec<T>) -> (CVec<T>, C<T>) {
    let max = v.iter().fold(T::zero(), |m, z| m.max(z.modulus()));
    let slack = T::tol(|t| t.construct) * (T::one() + max);
    match v.iter().find(|z| z.modulus() >= max - slack) {
        Some(z) if z.modulus() > T::zero() => {
            let phase = z.conj() / cr(z.modulus());
            (v * phase, phase)
        }
        _ => (v.clone(), cr(T::one())),
    }
}

/// Standard complex Gaussian sample `(x + iy)/sqrt(2)`.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> C<T> {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    c(T::lit(x * s), T::lit(y * s))
}

/// `d x d` Ginibre matrix.
pub fn ginibre<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat<T> {
    CMat::from_fn(d, d, |_, _| complex_gaussian(rng))
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix with
/// the diagonal of R made positive.
pub fn random_unitary<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat<T> {
    let g: CMat<T> = ginibre(d, rng);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q.clone();
    for j in 0..d {
        let z = r[(j, j)];
        let n = z.modulus();
        if n > T::zero() {
            let phase = z / cr(n);
            for i in 0..d {
                u[(i, j)] = q[(i, j)] * phase;
            }
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partial_trace_of_product() {
        let a = CMat::<f64>::from_fn(2, 2, |i, j| c((i + 2 * j) as f64, i as f64 - j as f64));
        let a = &a + a.adjoint();
        let b = CMat::<f64>::from_fn(2, 2, |i, j| c(1.0 + (i * j) as f64, 0.0));
        let pt = partial_trace_input(&kron(&a, &b), 2);
        assert!(max_abs_diff(&pt, &(b * a.trace())) < 1e-14);
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: CMat<f64> = random_unitary(4, &mut rng);
        assert!(max_abs_diff(&(u.adjoint() * &u), &identity(4)) < 1e-12);
    }

    #[test]
    fn completion_keeps_prefix() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let first = CVec::<f64>::from_vec(vec![cr(s), cr(s), cr(0.0)]);
        let b = complete_basis(std::slice::from_ref(&first), 3, 1e-8);
        assert_eq!(b.len(), 3);
        assert_eq!(b[0], first);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((braket(&b[i], &b[j]) - cr(want)).modulus() < 1e-12);
            }
        }
    }

    #[test]
    fn phase_fix_makes_largest_entry_positive() {
        let v = CVec::<f64>::from_vec(vec![c(0.1, 0.0), c(0.0, -0.9)]);
        let (w, _) = fix_phase(&v);
        assert!(w[1].im.abs() < 1e-15 && w[1].re > 0.0);
    }
}
