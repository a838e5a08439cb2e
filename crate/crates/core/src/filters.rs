// SPDX-License-Identifier: Apache-2.0

//! Quantum filters: single-Kraus probabilistic operations `rho -> K rho K^dag`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, basis_vector, complete_basis, fix_phase, norm, orthogonalize, CMat, CVec};
use crate::quantum::{choi_of_kraus, Basis, ChoiMatrix, PureState};
use crate::scalar::{c, cr, Real};

/// A filter `K` together with its canonical singular value decomposition
/// `K = sum_l sqrt(lambda_l) |v_l><w_l|`.
///
/// Singular values are sorted in descending order. Inside a degenerate
/// subspace the right vectors are obtained by projecting the computational
/// basis vectors in order, so e.g. a diagonal `K` keeps computational
/// eigenvectors. Each `v_l` is rephased so its first largest-modulus entry is
/// real positive and `w_l` carries the same phase.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumFilter<T: Real> {
    kraus: CMat<T>,
    singular: Vec<T>,
    left: Basis<T>,
    right: Basis<T>,
}

impl<T: Real> QuantumFilter<T> {
    pub fn new(kraus: CMat<T>) -> Result<Self> {
        let d = kraus.nrows();
        if d == 0 || !kraus.is_square() {
            return Err(Error::InvalidDimension(d, "filter must be a nonempty square matrix"));
        }
        let top = linalg::spectral_norm(&kraus);
        if top > T::one() + T::lit(1e-9).max(T::tol(|t| t.check)) {
            return Err(Error::TraceIncreasing((top * top).to_f64_lossy()));
        }
        let (singular, left, right) = canonical_svd(&kraus);
        Ok(Self { kraus, singular, left, right })
    }

    pub fn dim(&self) -> usize {
        self.kraus.nrows()
    }

    pub fn kraus(&self) -> &CMat<T> {
        &self.kraus
    }

    /// `sqrt(lambda_l)`, descending.
    pub fn singular_values(&self) -> &[T] {
        &self.singular
    }

    /// `lambda_l`, the eigenvalues of `K^dag K`.
    pub fn lambdas(&self) -> Vec<T> {
        self.singular.iter().map(|s| *s * *s).collect()
    }

    /// Left singular vectors `v_l`.
    pub fn left(&self) -> &Basis<T> {
        &self.left
    }

    /// Right singular vectors `w_l`.
    pub fn right(&self) -> &Basis<T> {
        &self.right
    }

    /// `Tr(K^dag K)`.
    pub fn gram_trace(&self) -> T {
        self.kraus.iter().fold(T::zero(), |a, z| a + z.norm_sqr())
    }

    /// Mean eigenvalue of `K^dag K`.
    pub fn lambda_mean(&self) -> T {
        self.gram_trace() / T::from_usize_lossy(self.dim())
    }

    /// `d / Tr(K^dag K) = 1 / Tr(chi_F)`.
    pub fn delta(&self) -> T {
        T::from_usize_lossy(self.dim()) / self.gram_trace()
    }

    pub fn gram(&self) -> CMat<T> {
        self.kraus.adjoint() * &self.kraus
    }

    /// Success probability `<psi|K^dag K|psi>`.
    pub fn weight(&self, psi: &PureState<T>) -> T {
        let kpsi = &self.kraus * psi.amplitudes();
        kpsi.iter().fold(T::zero(), |a, z| a + z.norm_sqr())
    }

    pub fn choi(&self) -> ChoiMatrix<T> {
        choi_of_kraus(std::slice::from_ref(&self.kraus)).expect("validated filter")
    }

    /// `sum_l sqrt(lambda_l) |v_l><w_l|`.
    pub fn reconstruct(&self) -> CMat<T> {
        let d = self.dim();
        let mut k = CMat::zeros(d, d);
        for l in 0..d {
            k += self.left.get(l).amplitudes() * self.right.get(l).amplitudes().adjoint() * cr(self.singular[l]);
        }
        k
    }

    pub fn to_json(&self) -> FilterJson {
        FilterJson::from_matrix(&self.kraus)
    }

    pub fn from_json(json: &FilterJson) -> Result<Self> {
        Self::new(json.to_matrix()?)
    }
}

fn canonical_svd<T: Real>(k: &CMat<T>) -> (Vec<T>, Basis<T>, Basis<T>) {
    let d = k.nrows();
    let gram = k.adjoint() * k;
    let (mut vals, vecs) = linalg::hermitian_eigen(&gram);
    vals.reverse();
    let cols: Vec<CVec<T>> = (0..d).rev().map(|i| vecs.column(i).into_owned()).collect();

    let group_tol = T::lit(1e-9).max(T::tol(|t| t.check)) * (T::one() + vals[0].abs());
    let drop = T::tol(|t| t.rank);
    let mut right: Vec<CVec<T>> = Vec::with_capacity(d);
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d && (vals[end - 1] - vals[end]).abs() <= group_tol {
            end += 1;
        }
        let block = &cols[start..end];
        let mut chosen: Vec<CVec<T>> = Vec::new();
        for i in 0..d {
            if chosen.len() == block.len() {
                break;
            }
            let e = basis_vector::<T>(d, i);
            let mut p = CVec::zeros(d);
            for q in block {
                p += q * linalg::braket(q, &e);
            }
            let r = orthogonalize(&p, &chosen);
            let n = norm(&r);
            if n > drop {
                chosen.push(r.unscale(n));
            }
        }
        if chosen.len() < block.len() {
            chosen = block.to_vec();
        }
        right.extend(chosen);
        start = end;
    }

    let zero = T::tol(|t| t.zero_weight).sqrt();
    let mut singular = Vec::with_capacity(d);
    let mut left: Vec<Option<CVec<T>>> = Vec::with_capacity(d);
    for w in &right {
        let kw = k * w;
        let s = norm(&kw);
        if s > zero {
            singular.push(s);
            left.push(Some(kw.unscale(s)));
        } else {
            singular.push(T::zero());
            left.push(None);
        }
    }
    let known: Vec<CVec<T>> = left.iter().flatten().cloned().collect();
    let mut extra = complete_basis(&known, d, drop).into_iter().skip(known.len());
    let left: Vec<CVec<T>> = left
        .into_iter()
        .map(|v| v.unwrap_or_else(|| extra.next().expect("completion")))
        .collect();

    let mut vs = Vec::with_capacity(d);
    let mut ws = Vec::with_capacity(d);
    for (v, w) in left.iter().zip(&right) {
        let (v, phase) = fix_phase(v);
        vs.push(PureState::from_raw(v));
        ws.push(PureState::from_raw(w * phase));
    }
    (singular, Basis::from_raw(vs), Basis::from_raw(ws))
}

/// Two-photon filter realized by a partially polarizing beam splitter with
/// real amplitude transmittances `th`, `tv` (lossless, `t^2 + r^2 = 1`).
pub fn ppbs_filter<T: Real>(th: T, tv: T) -> Result<QuantumFilter<T>> {
    for (name, t) in [("t_H", th), ("t_V", tv)] {
        if !(t >= T::zero() && t <= T::one()) {
            return Err(Error::OutOfRange { name, value: t.to_f64_lossy() });
        }
    }
    let rh = (T::one() - th * th).max(T::zero()).sqrt();
    let rv = (T::one() - tv * tv).max(T::zero()).sqrt();
    let z = T::zero();
    #[rustfmt::skip]
    let m = [
        th * th - rh * rh, z, z, z,
        z, th * tv, -rh * rv, z,
        z, -rh * rv, th * tv, z,
        z, z, z, tv * tv - rv * rv,
    ];
    QuantumFilter::new(CMat::from_row_iterator(4, 4, m.into_iter().map(cr)))
}

/// The filter used throughout the case study: `t_H = 1`, `t_V = sqrt(T_V)`.
pub fn ppbs_from_intensity<T: Real>(tv_intensity: T) -> Result<QuantumFilter<T>> {
    if !(tv_intensity >= T::zero() && tv_intensity <= T::one()) {
        return Err(Error::OutOfRange { name: "T_V", value: tv_intensity.to_f64_lossy() });
    }
    ppbs_filter(T::one(), tv_intensity.sqrt())
}

/// Normalized ideal output `K|psi>/|K psi|` and its weight `<psi|K^dag K|psi>`.
pub fn ideal_output<T: Real>(k: &QuantumFilter<T>, psi: &PureState<T>) -> Result<(PureState<T>, T)> {
    if psi.dim() != k.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), found: psi.dim() });
    }
    let kpsi = k.kraus() * psi.amplitudes();
    let weight = kpsi.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
    if weight < T::tol(|t| t.zero_weight) {
        return Err(Error::FilteredToZero(weight.to_f64_lossy()));
    }
    Ok((PureState::from_raw(kpsi.unscale(weight.sqrt())), weight))
}

/// Ginibre matrix rescaled to unit spectral norm.
pub fn random_filter<T: Real>(d: usize, seed: u64) -> Result<QuantumFilter<T>> {
    random_filter_with(d, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn random_filter_with<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<QuantumFilter<T>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d, "need d >= 2"));
    }
    let g: CMat<T> = linalg::ginibre(d, rng);
    let s = linalg::spectral_norm(&g);
    QuantumFilter::new(g.unscale(s))
}

/// `chi = p chi_K + (1 - p) chi_K'`.
#[derive(Debug, Clone)]
pub struct MixtureChannel<T: Real> {
    pub p: T,
    pub ideal: QuantumFilter<T>,
    pub perturber: QuantumFilter<T>,
    pub choi: ChoiMatrix<T>,
}

pub fn mixture_channel<T: Real>(
    ideal: &QuantumFilter<T>,
    perturber: &QuantumFilter<T>,
    p: T,
) -> Result<MixtureChannel<T>> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::OutOfRange { name: "p", value: p.to_f64_lossy() });
    }
    if ideal.dim() != perturber.dim() {
        return Err(Error::DimensionMismatch { expected: ideal.dim(), found: perturber.dim() });
    }
    let choi = ideal.choi().combine(p, &perturber.choi(), T::one() - p)?;
    Ok(MixtureChannel { p, ideal: ideal.clone(), perturber: perturber.clone(), choi })
}

/// `|Tr(a^dag b)|^2 / (Tr(a^dag a) Tr(b^dag b))`.
pub fn filter_fidelity<T: Real>(a: &QuantumFilter<T>, b: &QuantumFilter<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let (na, nb) = (a.gram_trace(), b.gram_trace());
    if na <= T::zero() || nb <= T::zero() {
        return Err(Error::ZeroOperator);
    }
    let overlap = (a.kraus().adjoint() * b.kraus()).trace();
    Ok(overlap.norm_sqr() / (na * nb))
}

/// Wire format `{"d": int, "re": [[...]], "im": [[...]]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterJson {
    pub d: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl FilterJson {
    pub fn from_matrix<T: Real>(m: &CMat<T>) -> Self {
        let d = m.nrows();
        let re = (0..d).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re.to_f64_lossy()).collect()).collect();
        let im = (0..d).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im.to_f64_lossy()).collect()).collect();
        Self { d, re, im }
    }

    pub fn to_matrix<T: Real>(&self) -> Result<CMat<T>> {
        let d = self.d;
        let ok = |rows: &Vec<Vec<f64>>| rows.len() == d && rows.iter().all(|r| r.len() == d);
        if !ok(&self.re) || !ok(&self.im) {
            return Err(Error::Schema(format!("filter arrays must be {d}x{d}")));
        }
        Ok(CMat::from_fn(d, d, |i, j| c(T::lit(self.re[i][j]), T::lit(self.im[i][j]))))
    }
}
