// SPDX-License-Identifier: Apache-2.0

//! Analytical fidelity bounds for a target filter `K` from reduced probe data.
//!
//! With `Delta = d / Tr(K^dag K)`, relative success probabilities `P_j`,
//! `Q_k`, `R_j` and normalized output overlaps, the lower bound reads
//!
//! ```text
//! F >= sum_j p_j <e~_j|rho~_j|e~_j> + sum_k q_k <f~_k|xi~_k|f~_k> - Delta Tr(K K^dag Omega~)
//! p_j = Delta P_j <e_j|K^dag K|e_j>,   q_k = Delta Q_k <f_k|K^dag K|f_k>
//! Tr(K K^dag Omega~) = sum_{j,l} lambda_l R_j <v_l|zeta~_j|v_l>
//! ```
//!
//! and each of the two weighted sums is on its own an upper bound. Terms
//! whose probe is annihilated by `K` are skipped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::QuantumFilter;
use crate::linalg::{self, CVec};
use crate::probe::{EnsembleStats, ReducedStats};
use crate::quantum::Basis;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LowerFormula {
    General,
    Eigenprobe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BoundsReport<T: Real> {
    pub lower: T,
    pub upper_e: T,
    pub upper_f: T,
    /// `p_j`; `None` where the probe is annihilated by the target.
    pub p_weights: Vec<Option<T>>,
    pub q_weights: Vec<Option<T>>,
    /// `Tr(K K^dag Omega~)`.
    pub kk_omega: T,
    /// `Delta * Tr(K K^dag Omega~)`.
    pub correction: T,
    pub delta: T,
    pub lambda_mean: T,
    pub formula: LowerFormula,
}

impl<T: Real> BoundsReport<T> {
    pub fn upper(&self) -> T {
        self.upper_e.min(self.upper_f)
    }
}

/// Hofmann's bounds for a unitary target: `(F1 + F2 - 1, min(F1, F2))`.
pub fn hofmann_unitary_bounds<T: Real>(f1: T, f2: T) -> (T, T) {
    (f1 + f2 - T::one(), f1.min(f2))
}

/// `sum_j Delta P_j <e_j|K^dag K|e_j> <e~_j|rho~_j|e~_j>` and the weights.
fn weighted_sum<T: Real>(k: &QuantumFilter<T>, stats: &ReducedStats<T>) -> Result<(T, Vec<Option<T>>)> {
    check_dim(k, stats)?;
    let delta = k.delta();
    let threshold = T::tol(|t| t.zero_weight);
    let mut sum = T::zero();
    let mut weights = Vec::with_capacity(stats.dim());
    for (j, probe) in stats.set.probes.iter().enumerate() {
        let kpsi = k.kraus() * probe.amplitudes();
        let w = linalg::norm(&kpsi).powi(2);
        if w < threshold {
            weights.push(None);
            continue;
        }
        let ideal = kpsi.unscale(w.sqrt());
        let overlap = stats
            .overlap_along(j, &ideal)
            .ok_or(Error::MissingIdealOutcome { probe: j })?
            .unwrap_or_else(T::zero);
        let p = delta * stats.probs[j] * w;
        sum += p * overlap;
        weights.push(Some(p));
    }
    Ok((sum, weights))
}

fn check_dim<T: Real>(k: &QuantumFilter<T>, stats: &ReducedStats<T>) -> Result<()> {
    if stats.dim() != k.dim() {
        return Err(Error::DimensionMismatch { expected: k.dim(), found: stats.dim() });
    }
    Ok(())
}

/// `Tr(K K^dag Omega~) = sum_{j,l} lambda_l R_j <v_l|zeta~_j|v_l>`.
pub fn kk_omega_term<T: Real>(k: &QuantumFilter<T>, u: &ReducedStats<T>) -> Result<T> {
    check_dim(k, u)?;
    let lambdas = k.lambdas();
    let mut total = T::zero();
    for j in 0..u.dim() {
        if u.outcomes[j].is_none() {
            continue;
        }
        let mut row = T::zero();
        for (l, lambda) in lambdas.iter().enumerate() {
            if *lambda == T::zero() {
                continue;
            }
            let o = u
                .overlap_along(j, k.left().get(l).amplitudes())
                .ok_or(Error::IncompleteCrossOverlaps { probe: j, vector: l })?
                .unwrap_or_else(T::zero);
            row += *lambda * o;
        }
        total += u.probs[j] * row;
    }
    Ok(total)
}

/// `max_j |K^dag K e_j - <e_j|K^dag K|e_j> e_j|`.
pub fn eigenbasis_residual<T: Real>(k: &QuantumFilter<T>, e: &Basis<T>) -> T {
    let g = k.gram();
    e.iter()
        .map(|v| {
            let a = v.amplitudes();
            let ga = &g * a;
            let mu = linalg::braket(a, &ga);
            linalg::norm(&(ga - a * mu))
        })
        .fold(T::zero(), |m, r| m.max(r))
}

fn require_eigenbasis<T: Real>(k: &QuantumFilter<T>, e: &ReducedStats<T>) -> Result<()> {
    let r = eigenbasis_residual(k, &e.set.probes);
    if r > T::lit(1e-8).max(T::tol(|t| t.check)) {
        return Err(Error::NotEigenbasis(r.to_f64_lossy()));
    }
    Ok(())
}

/// General lower bound. Without `u` statistics the `e` probes must be an
/// eigenbasis of `K^dag K`; their record then doubles as the `u` record.
pub fn general_lower_bound<T: Real>(
    k: &QuantumFilter<T>,
    e: &ReducedStats<T>,
    f: &ReducedStats<T>,
    u: Option<&ReducedStats<T>>,
) -> Result<T> {
    let u = match u {
        Some(u) => u,
        None => {
            require_eigenbasis(k, e).map_err(|_| Error::MissingUBasis)?;
            e
        }
    };
    let (se, _) = weighted_sum(k, e)?;
    let (sf, _) = weighted_sum(k, f)?;
    Ok(se + sf - k.delta() * kk_omega_term(k, u)?)
}

/// Lower bound for eigenprobes `e_j = w_j`:
/// `sum_k Q_k <f~_k|xi~_k|f~_k> - sum_{j != l} (lambda_l / lambda_mean) P_j <e~_l|rho~_j|e~_l>`.
pub fn eigenprobe_lower_bound<T: Real>(k: &QuantumFilter<T>, e: &ReducedStats<T>, f: &ReducedStats<T>) -> Result<T> {
    check_dim(k, e)?;
    require_eigenbasis(k, e)?;
    let mean = k.lambda_mean();
    let threshold = T::tol(|t| t.zero_weight);
    let ideals: Vec<Option<(T, CVec<T>)>> = e
        .set
        .probes
        .iter()
        .map(|p| {
            let kp = k.kraus() * p.amplitudes();
            let lambda = linalg::norm(&kp).powi(2);
            (lambda >= threshold).then(|| (lambda, kp.unscale(lambda.sqrt())))
        })
        .collect();
    let mut cross = T::zero();
    for j in 0..e.dim() {
        if e.outcomes[j].is_none() {
            continue;
        }
        for (l, ideal) in ideals.iter().enumerate() {
            let Some((lambda, v)) = ideal else { continue };
            if l == j {
                continue;
            }
            let o = e
                .overlap_along(j, v)
                .ok_or(Error::IncompleteCrossOverlaps { probe: j, vector: l })?
                .unwrap_or_else(T::zero);
            cross += *lambda / mean * e.probs[j] * o;
        }
    }
    let (sf, _) = weighted_sum(k, f)?;
    Ok(sf - cross)
}

/// `(sum_j p_j <e~_j|rho~_j|e~_j>, sum_k q_k <f~_k|xi~_k|f~_k>)`.
pub fn upper_bounds<T: Real>(k: &QuantumFilter<T>, e: &ReducedStats<T>, f: &ReducedStats<T>) -> Result<(T, T)> {
    Ok((weighted_sum(k, e)?.0, weighted_sum(k, f)?.0))
}

/// All analytical bounds for one reduced record. Records without a `u`
/// set are treated as eigenprobe data.
pub fn analytical_bounds<T: Real>(k: &QuantumFilter<T>, stats: &EnsembleStats<T>) -> Result<BoundsReport<T>> {
    let (upper_e, p_weights) = weighted_sum(k, &stats.e)?;
    let (upper_f, q_weights) = weighted_sum(k, &stats.f)?;
    let u = stats.u.as_ref().unwrap_or(&stats.e);
    if stats.u.is_none() {
        require_eigenbasis(k, &stats.e)?;
    }
    let kk_omega = kk_omega_term(k, u)?;
    let delta = k.delta();
    let (lower, formula) = match &stats.u {
        Some(_) => (upper_e + upper_f - delta * kk_omega, LowerFormula::General),
        None => (eigenprobe_lower_bound(k, &stats.e, &stats.f)?, LowerFormula::Eigenprobe),
    };
    Ok(BoundsReport {
        lower,
        upper_e,
        upper_f,
        p_weights,
        q_weights,
        kk_omega,
        correction: delta * kk_omega,
        delta,
        lambda_mean: k.lambda_mean(),
        formula,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{mixture_channel, ppbs_from_intensity, random_filter, QuantumFilter};
    use crate::probe::{reduce_record, run_ensemble, ProbeEnsemble};
    use crate::quantum::{choi_of_kraus, fourier_basis, hadamard_product_basis, ChoiMatrix};
    use crate::scalar::cr;

    fn stats(k: &QuantumFilter<f64>, chi: &ChoiMatrix<f64>, ens: &ProbeEnsemble<f64>) -> EnsembleStats<f64> {
        reduce_record(&run_ensemble(chi, ens, None, 0).unwrap(), k).unwrap()
    }

    #[test]
    fn hofmann_examples() {
        assert_eq!(hofmann_unitary_bounds(1.0, 1.0), (1.0, 1.0));
        let (l, u) = hofmann_unitary_bounds(0.9f64, 0.85);
        assert!((l - 0.75).abs() < 1e-15 && u == 0.85);
        let (l, u) = hofmann_unitary_bounds(0.4f64, 0.4);
        assert!((l + 0.2).abs() < 1e-15 && u == 0.4);
    }

    #[test]
    fn eigenprobes_tight_for_perfect_channel() {
        for d in 2..=4 {
            let k = random_filter::<f64>(d, 100 + d as u64).unwrap();
            let ens = ProbeEnsemble::eigen(&k).unwrap();
            let s = stats(&k, &k.choi(), &ens);
            let lower = general_lower_bound(&k, &s.e, &s.f, None).unwrap();
            assert!((lower - 1.0).abs() < 1e-9);
            assert!((eigenprobe_lower_bound(&k, &s.e, &s.f).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn eigenprobe_upper_e_for_perfect_channel() {
        // upper_e = sum_j (lambda_j / mean) P_j with P_j = lambda_j / sum lambda
        let k = random_filter::<f64>(3, 1).unwrap();
        let s = stats(&k, &k.choi(), &ProbeEnsemble::eigen(&k).unwrap());
        let (ue, uf) = upper_bounds(&k, &s.e, &s.f).unwrap();
        let l = k.lambdas();
        let sum: f64 = l.iter().sum();
        let oracle = 3.0 * l.iter().map(|x| x * x).sum::<f64>() / (sum * sum);
        assert!((ue - oracle).abs() < 1e-10);
        assert!((uf - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ppbs_product_probe_tightness() {
        for (tv, tight) in [(0.5, true), (1.0, true), (0.75, false)] {
            let k = ppbs_from_intensity(tv).unwrap();
            let s = stats(&k, &k.choi(), &ProbeEnsemble::product(&k).unwrap());
            let lower = general_lower_bound(&k, &s.e, &s.f, s.u.as_ref()).unwrap();
            if tight {
                assert!((lower - 1.0).abs() < 1e-9, "T_V={tv}: {lower}");
            } else {
                assert!(lower > 0.99 && lower < 1.0, "T_V={tv}: {lower}");
            }
            let (ue, uf) = upper_bounds(&k, &s.e, &s.f).unwrap();
            assert!(ue >= 1.0 - 1e-10 && uf >= 1.0 - 1e-10);
        }
    }

    #[test]
    fn kk_omega_examples() {
        let id = QuantumFilter::new(linalg::identity::<f64>(4)).unwrap();
        let kp = random_filter::<f64>(4, 4).unwrap();
        let s = stats(&id, &kp.choi(), &ProbeEnsemble::product(&id).unwrap());
        assert!((kk_omega_term(&id, s.u.as_ref().unwrap()).unwrap() - 1.0).abs() < 1e-12);

        let k = ppbs_from_intensity(0.7).unwrap();
        let s = stats(&k, &k.choi(), &ProbeEnsemble::product(&k).unwrap());
        let l = k.lambdas();
        let oracle = l.iter().map(|x| x * x).sum::<f64>() / l.iter().sum::<f64>();
        assert!((kk_omega_term(&k, s.u.as_ref().unwrap()).unwrap() - oracle).abs() < 1e-12);

        let mixed = ChoiMatrix::from_matrix(linalg::identity::<f64>(16) * cr(1.0 / 16.0)).unwrap();
        let s = stats(&k, &mixed, &ProbeEnsemble::product(&k).unwrap());
        assert!((kk_omega_term(&k, s.u.as_ref().unwrap()).unwrap() - k.lambda_mean()).abs() < 1e-12);
    }

    #[test]
    fn eigen_formula_matches_general() {
        let k = ppbs_from_intensity(0.6).unwrap();
        let kp = random_filter::<f64>(4, 77).unwrap();
        let chi = mixture_channel(&k, &kp, 0.8).unwrap().choi;
        let s = stats(&k, &chi, &ProbeEnsemble::eigen(&k).unwrap());
        let a = eigenprobe_lower_bound(&k, &s.e, &s.f).unwrap();
        let b = general_lower_bound(&k, &s.e, &s.f, None).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn eigenprobe_rejects_non_eigenbasis() {
        let k = ppbs_from_intensity(0.6).unwrap();
        let s = stats(&k, &k.choi(), &ProbeEnsemble::product(&k).unwrap());
        assert!(matches!(eigenprobe_lower_bound(&k, &s.e, &s.f), Err(Error::NotEigenbasis(_))));
        assert_eq!(general_lower_bound(&k, &s.e, &s.f, None), Err(Error::MissingUBasis));
    }

    #[test]
    fn orthogonal_channel_bounds_are_ordered() {
        // Tr(I Z) = 0
        let z = CMat::from_diagonal(&CVec::from_vec(vec![cr(1.0), cr(-1.0)]));
        let k = QuantumFilter::new(linalg::identity(2)).unwrap();
        let chi = choi_of_kraus(&[z]).unwrap();
        let ens = ProbeEnsemble::build(crate::probe::ProbeChoice::Fourier, &k).unwrap();
        let r = analytical_bounds(&k, &stats(&k, &chi, &ens)).unwrap();
        let f = crate::quantum::process_fidelity(&chi, &k.choi()).unwrap();
        assert_eq!(f, 0.0);
        assert!(r.upper_e >= f - 1e-12 && r.upper_f >= f - 1e-12);
        assert!(r.lower <= f + 1e-12);
    }

    use crate::linalg::CMat;

    #[test]
    fn unitary_reduction() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let d = 3;
        let u = linalg::random_unitary::<f64, _>(d, &mut rng);
        let v = linalg::random_unitary::<f64, _>(d, &mut rng);
        let k = QuantumFilter::new(u.clone()).unwrap();
        let chi = choi_of_kraus(&[u.clone() * cr(0.8f64.sqrt()), v * cr(0.2f64.sqrt())]).unwrap();
        let e = Basis::computational(d);
        let f = fourier_basis(&e).unwrap();
        let ens = ProbeEnsemble::general(&k, e.clone(), f.clone()).unwrap();
        let r = analytical_bounds(&k, &stats(&k, &chi, &ens)).unwrap();
        let avg = |b: &Basis<f64>| {
            b.iter()
                .map(|p| {
                    let rho = crate::quantum::output_state(&chi, p).unwrap();
                    linalg::expectation(&rho, &(&u * p.amplitudes()))
                })
                .sum::<f64>()
                / d as f64
        };
        let (f1, f2) = (avg(&e), avg(&f));
        assert!((r.lower - (f1 + f2 - 1.0)).abs() < 1e-10);
        assert!((r.upper_e - f1).abs() < 1e-10 && (r.upper_f - f2).abs() < 1e-10);
        assert!((r.correction - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fourier_flatness() {
        for d in 2..=5 {
            let k = random_filter::<f64>(d, 40 + d as u64).unwrap();
            let f = fourier_basis(k.right()).unwrap();
            for p in f.iter() {
                assert!((k.weight(p) - k.lambda_mean()).abs() < 1e-10);
            }
        }
        // diagonal two-qubit filter and the Hadamard pair
        let k = ppbs_from_intensity(0.3).unwrap();
        for p in hadamard_product_basis::<f64>(2).unwrap().iter() {
            assert!((k.weight(p) - k.lambda_mean()).abs() < 1e-12);
        }
    }
}
