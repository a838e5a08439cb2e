// SPDX-License-Identifier: Apache-2.0

//! Numerical certificates for the operator inequalities behind the bounds.
//!
//! The lower bound rests on positivity of
//!
//! ```text
//! R = |ω><ω| - Σ_j (|e_j><e_j|)^T ⊗ |e_j><e_j| - Σ_k (|f_k><f_k|)^T ⊗ |f_k><f_k| + I ⊗ I
//! ```
//!
//! for the basis pair `(e, f)`. Positivity is asserted here only for the
//! computational/Fourier pair and the computational/qubitwise-Hadamard pair;
//! [`build_r`] accepts any pair for experimentation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::quantum::{bell_mub_basis, hadamard_product_basis, maximally_entangled_state, Basis};
use crate::scalar::{cr, Real};

/// Eigenvalues within this distance are merged into one histogram bin.
const BIN_WIDTH: f64 = 1e-6;

/// One distinct eigenvalue and its multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpectrumBin<T: Real> {
    pub value: T,
    pub count: usize,
}

/// Spectral summary of a Hermitian witness operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct WitnessReport<T: Real> {
    pub min_eigenvalue: T,
    pub max_eigenvalue: T,
    /// Eigenvalues with modulus at most the zero threshold.
    pub zero_space_dim: usize,
    pub rank: usize,
    pub histogram: Vec<SpectrumBin<T>>,
    /// Largest off-diagonal modulus in the basis the spectrum was read from;
    /// `None` when the spectrum came from a full eigendecomposition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub off_diagonal: Option<T>,
}

impl<T: Real> WitnessReport<T> {
    /// Summarizes an already computed list of eigenvalues.
    pub fn from_eigenvalues(mut eig: Vec<T>, off_diagonal: Option<T>) -> Self {
        eig.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        let zero = T::tol(|t| t.zero_eigenvalue);
        let zero_space_dim = eig.iter().filter(|x| x.abs() <= zero).count();
        let mut histogram: Vec<SpectrumBin<T>> = Vec::new();
        for &x in &eig {
            match histogram.last_mut() {
                Some(bin) if (x - bin.value).abs() <= T::lit(BIN_WIDTH) => bin.count += 1,
                _ => histogram.push(SpectrumBin { value: x, count: 1 }),
            }
        }
        Self {
            min_eigenvalue: eig.first().copied().unwrap_or_else(T::zero),
            max_eigenvalue: eig.last().copied().unwrap_or_else(T::zero),
            zero_space_dim,
            rank: eig.len() - zero_space_dim,
            histogram,
            off_diagonal,
        }
    }

    /// Eigendecomposes a Hermitian matrix.
    pub fn of_matrix(m: &CMat<T>) -> Self {
        Self::from_eigenvalues(linalg::eigenvalues(m), None)
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= -T::tol(|t| t.zero_eigenvalue)
    }

    /// True if every eigenvalue is within the zero threshold of 0 or 1.
    pub fn is_projector_spectrum(&self) -> bool {
        let tol = T::tol(|t| t.zero_eigenvalue);
        self.histogram
            .iter()
            .all(|b| b.value.abs() <= tol || (b.value - T::one()).abs() <= tol)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn transposed_tensor_sum<T: Real>(b: &Basis<T>) -> CMat<T> {
    let d = b.dim();
    let mut out = CMat::zeros(d * d, d * d);
    for v in b.iter() {
        let p = v.projector();
        out += linalg::kron(&p.transpose(), &p);
    }
    out
}

/// The witness operator `R` of the pair `(e, f)`.
pub fn build_r<T: Real>(e: &Basis<T>, f: &Basis<T>) -> Result<CMat<T>> {
    let d = e.dim();
    if f.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: f.dim() });
    }
    let omega = maximally_entangled_state::<T>(d)?;
    Ok(omega.projector() - transposed_tensor_sum(e) - transposed_tensor_sum(f) + linalg::identity(d * d))
}

/// `Σ_{j,k >= 2} |ω_jk><ω_jk|`, the diagonal form of `R` for the
/// computational/Fourier pair.
pub fn bell_diagonal_r<T: Real>(d: usize) -> Result<CMat<T>> {
    let states = bell_mub_basis::<T>(d)?;
    let mut out = CMat::zeros(d * d, d * d);
    for shift in 1..d {
        for clock in 1..d {
            out += states[shift * d + clock].projector();
        }
    }
    Ok(out)
}

/// `(I ⊗ K) R (I ⊗ K^dag)`.
pub fn conjugate_output<T: Real>(r: &CMat<T>, k: &CMat<T>) -> CMat<T> {
    let lift = linalg::kron(&linalg::identity(k.nrows()), k);
    &lift * r * lift.adjoint()
}

/// Index of `|j_1..j_n>|k_1..k_n>` after regrouping into `|j_1 k_1>..|j_n k_n>`.
fn regroup_index(n: usize, idx: usize) -> usize {
    let (j, k) = (idx >> n, idx & ((1 << n) - 1));
    let mut out = 0;
    for m in 0..n {
        let shift = n - 1 - m;
        let pair = (((j >> shift) & 1) << 1) | ((k >> shift) & 1);
        out = (out << 2) | pair;
    }
    out
}

/// Bell basis `Φ+, Φ-, Ψ+, Ψ-` as columns.
fn bell_columns<T: Real>() -> CMat<T> {
    let s = cr(T::one() / T::lit(2.0).sqrt());
    let z = cr(T::zero());
    CMat::from_row_slice(4, 4, &[s, s, z, z, z, z, s, s, z, z, s, -s, s, -s, z, z])
}

/// Spectrum of `R` for the computational/Hadamard pair on `n` qubits, read
/// off the diagonal after regrouping input and output qubits pairwise and
/// rotating into the product Bell basis.
pub fn hadamard_r_spectrum<T: Real>(n: usize) -> Result<WitnessReport<T>> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidDimension(n, "qubit count must be 1, 2 or 3"));
    }
    let d = 1usize << n;
    let r = build_r(&Basis::computational(d), &hadamard_product_basis(n)?)?;
    let dim = d * d;
    let perm: Vec<usize> = (0..dim).map(|i| regroup_index(n, i)).collect();
    let mut grouped = CMat::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            grouped[(perm[a], perm[b])] = r[(a, b)];
        }
    }
    let bell = bell_columns::<T>();
    let mut basis = bell.clone();
    for _ in 1..n {
        basis = linalg::kron(&basis, &bell);
    }
    let rotated = basis.adjoint() * grouped * basis;
    let mut off = T::zero();
    for a in 0..dim {
        for b in 0..dim {
            if a != b {
                off = off.max(rotated[(a, b)].norm_sqr().sqrt());
            }
        }
    }
    let diag = (0..dim).map(|i| rotated[(i, i)].re).collect();
    Ok(WitnessReport::from_eigenvalues(diag, Some(off)))
}

/// Minimum eigenvalues of `Σ_j |ω_j1><ω_j1| - |ω_11><ω_11|` and
/// `Σ_k |ω_1k><ω_1k| - |ω_11><ω_11|`.
pub fn upper_inequality_witnesses<T: Real>(d: usize) -> Result<(T, T)> {
    let (a, b) = upper_inequality_operators::<T>(d)?;
    Ok((linalg::min_eigenvalue(&a), linalg::min_eigenvalue(&b)))
}

/// The two operators whose positivity gives the upper bounds.
pub fn upper_inequality_operators<T: Real>(d: usize) -> Result<(CMat<T>, CMat<T>)> {
    let states = bell_mub_basis::<T>(d)?;
    let sum = |pick: &dyn Fn(usize) -> usize| -> CMat<T> {
        let mut m = CMat::zeros(d * d, d * d);
        for i in 0..d {
            m += states[pick(i)].projector();
        }
        m - states[0].projector()
    };
    Ok((sum(&|j| j * d), sum(&|k| k)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::random_filter;
    use crate::linalg::random_unitary;
    use crate::quantum::fourier_basis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fourier_r(d: usize) -> CMat<f64> {
        let e = Basis::computational(d);
        build_r(&e, &fourier_basis(&e).unwrap()).unwrap()
    }

    #[test]
    fn fourier_pair_rank_law() {
        for d in 2..=8 {
            let rep = WitnessReport::of_matrix(&fourier_r(d));
            assert!(rep.is_psd(), "d={d}: {}", rep.min_eigenvalue);
            assert!(rep.is_projector_spectrum());
            assert_eq!(rep.rank, (d - 1) * (d - 1), "d={d}");
        }
    }

    #[test]
    fn d2_fourier_is_rank_one() {
        let rep = WitnessReport::of_matrix(&fourier_r(2));
        assert!(rep.min_eigenvalue.abs() < 1e-12);
        assert_eq!(rep.rank, 1);
    }

    #[test]
    fn bell_form_matches_direct_construction() {
        for d in 2..=5 {
            let diff = linalg::max_abs_diff(&bell_diagonal_r::<f64>(d).unwrap(), &fourier_r(d));
            assert!(diff < 1e-10, "d={d}: {diff}");
        }
        let r3 = bell_diagonal_r::<f64>(3).unwrap();
        assert!((linalg::trace(&r3).re - 4.0).abs() < 1e-12);
        let r2 = bell_diagonal_r::<f64>(2).unwrap();
        let w22 = &bell_mub_basis::<f64>(2).unwrap()[3];
        assert!(linalg::max_abs_diff(&r2, &w22.projector()) < 1e-12);
    }

    #[test]
    fn hadamard_pair_zero_space() {
        for (n, ones) in [(1, 1), (2, 9), (3, 49)] {
            let rep = hadamard_r_spectrum::<f64>(n).unwrap();
            let dim = 1 << (2 * n);
            assert_eq!(rep.zero_space_dim, (1 << (n + 1)) - 1, "n={n}");
            assert_eq!(rep.rank, dim - rep.zero_space_dim);
            assert_eq!(rep.rank, ones);
            assert!(rep.off_diagonal.unwrap() < 1e-10);
            assert!(rep.is_projector_spectrum() && rep.is_psd());
        }
    }

    #[test]
    fn hadamard_spectrum_agrees_with_eigensolver() {
        for n in 1..=3 {
            let d = 1 << n;
            let r = build_r(&Basis::computational(d), &hadamard_product_basis::<f64>(n).unwrap()).unwrap();
            let direct = WitnessReport::of_matrix(&r);
            let grouped = hadamard_r_spectrum::<f64>(n).unwrap();
            assert_eq!(direct.zero_space_dim, grouped.zero_space_dim);
        }
    }

    #[test]
    fn regrouping_is_a_permutation() {
        for n in 1..=3 {
            let mut seen: Vec<usize> = (0..1 << (2 * n)).map(|i| regroup_index(n, i)).collect();
            seen.sort_unstable();
            assert!(seen.iter().enumerate().all(|(i, &x)| i == x));
        }
        // |j1 j2>|k1 k2> = |10>|01> -> |j1 k1>|j2 k2> = |10>|01>
        assert_eq!(regroup_index(2, 0b1001), 0b1001);
        // |01>|10> -> |01>|10>
        assert_eq!(regroup_index(2, 0b0110), 0b0110);
        // |11>|00> -> |10>|10>
        assert_eq!(regroup_index(2, 0b1100), 0b1010);
    }

    #[test]
    fn upper_witnesses_are_psd() {
        for d in 2..=5 {
            let (a, b) = upper_inequality_witnesses::<f64>(d).unwrap();
            assert!(a >= -1e-10 && b >= -1e-10, "d={d}: {a} {b}");
            let (ma, mb) = upper_inequality_operators::<f64>(d).unwrap();
            assert!((linalg::trace(&ma).re - (d - 1) as f64).abs() < 1e-10);
            assert!((linalg::trace(&mb).re - (d - 1) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn unitary_conjugation_preserves_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = fourier_r(3);
        let base = linalg::eigenvalues(&r);
        for _ in 0..20 {
            let u = random_unitary::<f64, _>(3, &mut rng);
            let x = conjugate_output(&r, &u);
            let eig = linalg::eigenvalues(&x);
            for (a, b) in base.iter().zip(&eig) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn filtered_witness_stays_psd() {
        let r = fourier_r(4);
        for seed in 0..25 {
            let k = random_filter::<f64>(4, seed).unwrap();
            let m = conjugate_output(&r, k.kraus());
            assert!(linalg::min_eigenvalue(&m) >= -1e-9);
        }
    }

    #[test]
    fn report_round_trips_through_json() {
        let rep = hadamard_r_spectrum::<f64>(2).unwrap();
        let back: WitnessReport<f64> = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(rep, back);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        assert!(build_r(&Basis::<f64>::computational(2), &Basis::computational(3)).is_err());
        assert!(hadamard_r_spectrum::<f64>(4).is_err());
    }
}
