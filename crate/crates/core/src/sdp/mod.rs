// SPDX-License-Identifier: Apache-2.0

//! Tightest fidelity bounds compatible with measured data.
//!
//! Every channel consistent with the data has a normalized Choi matrix
//! `A = chi / Tr chi` obeying `A ⪰ 0`, `Tr A = 1` and one linear equality
//! per recorded outcome. Minimizing and maximizing the fidelity
//! `Δ Tr(A |ω_K><ω_K|)` over that set gives the optimal bounds. The complex
//! problem is mapped to a real one through `A ↦ [[Re A, -Im A], [Im A, Re A]]`
//! and handed to [`solver`].

pub mod solver;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::QuantumFilter;
use crate::linalg::{self, CMat};
use crate::probe::MeasurementRecord;
use crate::scalar::{c, Real};
use solver::{BlockProblem, Exit, Settings};

/// Where a constraint came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Normalization,
    Outcome { basis: String, probe: usize, outcome: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T: Real> {
    pub matrix: CMat<T>,
    pub value: T,
    pub provenance: Provenance,
}

/// Linearly independent equality constraints `Tr(A M_k) = r_k`; the first
/// one is always the normalization `Tr A = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet<T: Real> {
    pub d: usize,
    pub constraints: Vec<Constraint<T>>,
}

impl<T: Real> ConstraintSet<T> {
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Number of data constraints, excluding normalization.
    pub fn data_len(&self) -> usize {
        self.constraints.iter().filter(|c| c.provenance != Provenance::Normalization).count()
    }

    /// `max_k |Tr(A M_k) - r_k|`.
    pub fn max_violation(&self, a: &CMat<T>) -> T {
        self.constraints
            .iter()
            .map(|c| (linalg::trace_product(a, &c.matrix) - c.value).abs())
            .fold(T::zero(), T::max)
    }

    pub fn to_json(&self) -> ConstraintSetJson {
        ConstraintSetJson {
            d: self.d,
            constraints: self
                .constraints
                .iter()
                .map(|c| ConstraintJson {
                    matrix: MatrixJson::from_matrix(&c.matrix),
                    value: c.value.to_f64_lossy(),
                    provenance: c.provenance.clone(),
                })
                .collect(),
        }
    }

    /// Parses and re-prunes, so hand-written files need not be independent.
    pub fn from_json(json: &ConstraintSetJson) -> Result<Self> {
        let n = json.d * json.d;
        let mut pruner = Pruner::new(json.d);
        let mut constraints = vec![normalization(json.d)];
        for cj in &json.constraints {
            if cj.provenance == Provenance::Normalization {
                continue;
            }
            let m = cj.matrix.to_matrix::<T>(n)?;
            if !linalg::is_hermitian(&m, T::tol(|t| t.check)) {
                return Err(Error::Schema("constraint matrix is not Hermitian".into()));
            }
            if pruner.admit(&m) {
                constraints.push(Constraint { matrix: m, value: T::lit(cj.value), provenance: cj.provenance.clone() });
            }
        }
        Ok(Self { d: json.d, constraints })
    }
}

/// `{"re": [[...]], "im": [[...]]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixJson {
    pub fn from_matrix<T: Real>(m: &CMat<T>) -> Self {
        let part = |f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(i, j)).collect()).collect()
        };
        Self {
            re: part(&|i, j| m[(i, j)].re.to_f64_lossy()),
            im: part(&|i, j| m[(i, j)].im.to_f64_lossy()),
        }
    }

    pub fn to_matrix<T: Real>(&self, n: usize) -> Result<CMat<T>> {
        let ok = |rows: &Vec<Vec<f64>>| rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !ok(&self.re) || !ok(&self.im) {
            return Err(Error::Schema(format!("matrix arrays must be {n}x{n}")));
        }
        Ok(CMat::from_fn(n, n, |i, j| c(T::lit(self.re[i][j]), T::lit(self.im[i][j]))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintJson {
    pub matrix: MatrixJson,
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSetJson {
    pub d: usize,
    pub constraints: Vec<ConstraintJson>,
}

fn normalization<T: Real>(d: usize) -> Constraint<T> {
    Constraint { matrix: linalg::identity(d * d), value: T::one(), provenance: Provenance::Normalization }
}

/// Greedy Gram-Schmidt over Hermitian matrices with the trace inner product.
struct Pruner<T: Real> {
    basis: Vec<DVector<T>>,
    tol: T,
}

impl<T: Real> Pruner<T> {
    fn new(d: usize) -> Self {
        let mut p = Self { basis: Vec::new(), tol: T::tol(|t| t.rank) };
        p.admit(&linalg::identity::<T>(d * d));
        p
    }

    fn vectorize(m: &CMat<T>) -> DVector<T> {
        DVector::from_iterator(2 * m.len(), m.iter().map(|z| z.re).chain(m.iter().map(|z| z.im)))
    }

    fn admit(&mut self, m: &CMat<T>) -> bool {
        let v = Self::vectorize(m);
        let scale = v.norm();
        if scale == T::zero() {
            return false;
        }
        let mut r = v;
        for _ in 0..2 {
            for q in &self.basis {
                let proj = q.dot(&r);
                r.axpy(-proj, q, T::one());
            }
        }
        let rn = r.norm();
        if rn <= self.tol * scale {
            return false;
        }
        self.basis.push(r / rn);
        true
    }
}

/// Emits `Tr(A (|m_j><m_j|)^T ⊗ |n_jk><n_jk|) = f_jk / Σ_lm f_lm` for every
/// probe `m_j` and measurement vector `n_jk`, then keeps a linearly
/// independent subset in (record, basis, probe, outcome) order.
pub fn assemble_constraints<T: Real>(records: &[MeasurementRecord<T>]) -> Result<ConstraintSet<T>> {
    let d = records
        .iter()
        .find_map(MeasurementRecord::dim)
        .ok_or(Error::EmptyRecord)?;
    let mut pruner = Pruner::new(d);
    let mut constraints = vec![normalization(d)];
    let mut any = false;
    for record in records {
        for block in &record.blocks {
            if block.set.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: block.set.dim() });
            }
            let total = block.f.iter().flatten().fold(T::zero(), |a, &x| a + x);
            if total <= T::zero() {
                return Err(Error::AllZeroRecord);
            }
            any = true;
            for (j, (probe, meas)) in block.set.probes.iter().zip(&block.set.measurements).enumerate() {
                let input = probe.projector().transpose();
                for (k, n) in meas.iter().enumerate() {
                    let m = linalg::kron(&input, &n.projector());
                    if pruner.admit(&m) {
                        constraints.push(Constraint {
                            matrix: m,
                            value: block.f[j][k] / total,
                            provenance: Provenance::Outcome { basis: block.set.label.clone(), probe: j, outcome: k },
                        });
                    }
                }
            }
        }
    }
    if !any {
        return Err(Error::EmptyRecord);
    }
    Ok(ConstraintSet { d, constraints })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

/// One optimized bound with its convergence certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution<T: Real> {
    /// Certified bound: the dual objective, which is a valid bound whenever
    /// the dual iterate is feasible.
    pub value: T,
    pub primal_value: T,
    pub dual_value: T,
    /// Optimal normalized Choi matrix `A`.
    pub primal: CMat<T>,
    pub gap: T,
    pub primal_residual: T,
    pub dual_residual: T,
    pub max_violation: T,
    pub iterations: usize,
    pub status: SdpStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolutionJson {
    pub value: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub max_violation: f64,
    pub iterations: usize,
    pub status: SdpStatus,
    pub primal: MatrixJson,
}

impl<T: Real> SdpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    pub fn to_json(&self) -> SdpSolutionJson {
        SdpSolutionJson {
            value: self.value.to_f64_lossy(),
            primal_value: self.primal_value.to_f64_lossy(),
            dual_value: self.dual_value.to_f64_lossy(),
            gap: self.gap.to_f64_lossy(),
            primal_residual: self.primal_residual.to_f64_lossy(),
            dual_residual: self.dual_residual.to_f64_lossy(),
            max_violation: self.max_violation.to_f64_lossy(),
            iterations: self.iterations,
            status: self.status,
            primal: MatrixJson::from_matrix(&self.primal),
        }
    }
}

/// `[[Re M, -Im M], [Im M, Re M]] / 2`, so that `Tr(M A) = <embed(M), embed(A)>`
/// when the variable is embedded without the factor.
fn embed_half<T: Real>(m: &CMat<T>) -> DMatrix<T> {
    let n = m.nrows();
    let half = T::lit(0.5);
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        let v = match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        };
        v * half
    })
}

fn unembed<T: Real>(x: &DMatrix<T>) -> CMat<T> {
    let n = x.nrows() / 2;
    let half = T::lit(0.5);
    CMat::from_fn(n, n, |i, j| {
        let re = (x[(i, j)] + x[(i + n, j + n)]) * half;
        let im = (x[(i + n, j)] - x[(i, j + n)]) * half;
        c(re, im)
    })
}

fn settings<T: Real>() -> Settings {
    Settings { gap_tol: T::TOL.sdp_gap, residual_tol: T::TOL.sdp_residual, max_iter: 200 }
}

/// Builds the real block problem `min <sign * C, X>`. With `epsilon > 0`
/// every data equality becomes the interval `|Tr(A M_k) - r_k| <= epsilon`
/// through a pair of nonnegative slacks.
fn build_problem<T: Real>(set: &ConstraintSet<T>, objective: &CMat<T>, sign: T, epsilon: T) -> BlockProblem<T> {
    let n2 = 2 * set.d * set.d;
    let mut sizes = vec![n2];
    let mut a = Vec::new();
    let mut b = Vec::new();
    for con in &set.constraints {
        let m = embed_half(&con.matrix);
        if epsilon > T::zero() && con.provenance != Provenance::Normalization {
            for (shift, coef) in [(epsilon, T::one()), (-epsilon, -T::one())] {
                let blk = sizes.len();
                sizes.push(1);
                a.push(vec![(0, m.clone()), (blk, DMatrix::from_element(1, 1, coef))]);
                b.push(con.value + shift);
            }
        } else {
            a.push(vec![(0, m)]);
            b.push(con.value);
        }
    }
    let mut c = vec![embed_half(objective) * sign];
    c.extend(sizes[1..].iter().map(|_| DMatrix::zeros(1, 1)));
    BlockProblem { sizes, c, a, b: DVector::from_vec(b) }
}

fn optimize<T: Real>(set: &ConstraintSet<T>, objective: &CMat<T>, sign: T, epsilon: T) -> SdpSolution<T> {
    let problem = build_problem(set, objective, sign, epsilon);
    let raw = solver::solve(&problem, &settings::<T>());
    let primal = unembed(&raw.x[0]);
    let max_violation = set.max_violation(&primal);
    let allowed = epsilon + T::tol(|t| t.sdp_residual).sqrt();
    let status = match raw.exit {
        Exit::Converged => SdpStatus::Optimal,
        Exit::PrimalInfeasible => SdpStatus::Infeasible,
        _ if max_violation > allowed => SdpStatus::Infeasible,
        _ => SdpStatus::MaxIter,
    };
    SdpSolution {
        value: sign * raw.dual_obj,
        primal_value: sign * raw.primal_obj,
        dual_value: sign * raw.dual_obj,
        primal,
        gap: raw.rel_gap,
        primal_residual: raw.primal_res,
        dual_residual: raw.dual_res,
        max_violation,
        iterations: raw.iterations,
        status,
    }
}

/// Minimizes and maximizes `Δ Tr(A |ω_K><ω_K|)` over the data-consistent set.
/// Returns `(lower, upper)`.
pub fn solve_bounds<T: Real>(
    set: &ConstraintSet<T>,
    k: &QuantumFilter<T>,
    epsilon: T,
) -> Result<(SdpSolution<T>, SdpSolution<T>)> {
    if k.dim() != set.d {
        return Err(Error::DimensionMismatch { expected: set.d, found: k.dim() });
    }
    if epsilon < T::zero() {
        return Err(Error::OutOfRange { name: "slack epsilon", value: epsilon.to_f64_lossy() });
    }
    let objective = k.choi().matrix() * c(k.delta(), T::zero());
    let lower = optimize(set, &objective, T::one(), epsilon);
    let upper = optimize(set, &objective, -T::one(), epsilon);
    Ok((lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{mixture_channel, ppbs_from_intensity, random_filter};
    use crate::probe::{run_ensemble, ProbeChoice, ProbeEnsemble};
    use crate::quantum::{choi_of_kraus, ChoiMatrix};

    fn exact(chi: &ChoiMatrix<f64>, ens: &ProbeEnsemble<f64>) -> MeasurementRecord<f64> {
        run_ensemble(chi, ens, None, 0).unwrap()
    }

    #[test]
    fn embedding_round_trip_and_trace() {
        let k = random_filter::<f64>(3, 5).unwrap();
        let chi = k.choi();
        let m = chi.matrix();
        let x = embed_half(m) * 2.0;
        assert!(linalg::max_abs_diff(&unembed(&x), m) < 1e-14);
        let other = random_filter::<f64>(3, 6).unwrap().choi();
        let lhs = linalg::trace_product(m, other.matrix());
        let rhs = embed_half(other.matrix()).dot(&x);
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn one_basis_gives_fifteen_constraints() {
        let k = ppbs_from_intensity(0.5f64).unwrap();
        let ens = ProbeEnsemble::product(&k).unwrap();
        let rec = exact(&k.choi(), &ens);
        for block in &rec.blocks {
            let single = MeasurementRecord { mode: rec.mode, blocks: vec![block.clone()] };
            let set = assemble_constraints(&[single]).unwrap();
            assert_eq!(set.data_len(), 15, "basis {}", block.set.label);
        }
        let all = assemble_constraints(std::slice::from_ref(&rec)).unwrap();
        assert!(all.data_len() <= 45);
    }

    #[test]
    fn duplicate_records_are_pruned() {
        let k = random_filter::<f64>(4, 3).unwrap();
        let ens = ProbeEnsemble::build(ProbeChoice::Fourier, &k).unwrap();
        let rec = exact(&k.choi(), &ens);
        let once = assemble_constraints(std::slice::from_ref(&rec)).unwrap();
        let twice = assemble_constraints(&[rec.clone(), rec]).unwrap();
        assert_eq!(once.len(), twice.len());
    }

    #[test]
    fn empty_and_zero_records_rejected() {
        assert_eq!(assemble_constraints::<f64>(&[]).unwrap_err(), Error::EmptyRecord);
        let k = random_filter::<f64>(2, 1).unwrap();
        let ens = ProbeEnsemble::build(ProbeChoice::Fourier, &k).unwrap();
        let mut rec = exact(&k.choi(), &ens);
        for row in rec.blocks[0].f.iter_mut() {
            row.iter_mut().for_each(|x| *x = 0.0);
        }
        assert_eq!(assemble_constraints(&[rec]).unwrap_err(), Error::AllZeroRecord);
    }

    #[test]
    fn true_choi_satisfies_constraints() {
        let k = random_filter::<f64>(4, 8).unwrap();
        let mix = mixture_channel(&k, &random_filter(4, 9).unwrap(), 0.7).unwrap();
        let ens = ProbeEnsemble::product(&k).unwrap();
        let set = assemble_constraints(&[exact(&mix.choi, &ens)]).unwrap();
        let a = mix.choi.matrix() / nalgebra::Complex::new(mix.choi.trace(), 0.0);
        assert!(set.max_violation(&a) < 1e-9);
    }

    #[test]
    fn unconstrained_upper_bound_is_top_eigenvalue() {
        let k = random_filter::<f64>(3, 4).unwrap();
        let set = ConstraintSet { d: 3, constraints: vec![normalization(3)] };
        let (lo, hi) = solve_bounds(&set, &k, 0.0).unwrap();
        assert!(lo.is_optimal() && hi.is_optimal());
        let obj = k.choi().matrix() * c(k.delta(), 0.0);
        let eig = linalg::eigenvalues(&obj);
        assert!((hi.value - eig[eig.len() - 1]).abs() < 1e-7, "{} vs {:?}", hi.value, eig);
        assert!((lo.value - eig[0]).abs() < 1e-7);
    }

    #[test]
    fn mixture_bounds_sandwich_truth() {
        let k = random_filter::<f64>(3, 21).unwrap();
        let mix = mixture_channel(&k, &random_filter(3, 22).unwrap(), 0.8).unwrap();
        let ens = ProbeEnsemble::build(ProbeChoice::Fourier, &k).unwrap();
        let set = assemble_constraints(&[exact(&mix.choi, &ens)]).unwrap();
        let (lo, hi) = solve_bounds(&set, &k, 0.0).unwrap();
        let truth = crate::quantum::process_fidelity(&mix.choi, &k.choi()).unwrap();
        assert!(lo.is_optimal() && hi.is_optimal(), "{:?} {:?}", lo.status, hi.status);
        assert!(lo.value <= truth + 1e-7 && truth <= hi.value + 1e-7, "{} {} {}", lo.value, truth, hi.value);
        assert!(lo.gap <= 1e-7 && hi.gap <= 1e-7);
    }

    #[test]
    fn perfect_channel_is_pinned() {
        let k = ppbs_from_intensity(0.5f64).unwrap();
        for choice in [ProbeChoice::Product, ProbeChoice::Eigen] {
            let ens = ProbeEnsemble::build(choice, &k).unwrap();
            let set = assemble_constraints(&[exact(&k.choi(), &ens)]).unwrap();
            let (lo, hi) = solve_bounds(&set, &k, 0.0).unwrap();
            assert!((lo.value - 1.0).abs() < 1e-6, "{choice:?} lo {}", lo.value);
            assert!((hi.value - 1.0).abs() < 1e-6, "{choice:?} hi {}", hi.value);
        }
    }

    #[test]
    fn slack_widens_the_interval() {
        let k = random_filter::<f64>(2, 30).unwrap();
        let mix = mixture_channel(&k, &random_filter(2, 31).unwrap(), 0.6).unwrap();
        let ens = ProbeEnsemble::build(ProbeChoice::Fourier, &k).unwrap();
        let set = assemble_constraints(&[exact(&mix.choi, &ens)]).unwrap();
        let (lo0, hi0) = solve_bounds(&set, &k, 0.0).unwrap();
        let (lo1, hi1) = solve_bounds(&set, &k, 0.02).unwrap();
        assert!(lo1.is_optimal() && hi1.is_optimal());
        assert!(lo1.value <= lo0.value + 1e-7 && hi1.value >= hi0.value - 1e-7);
    }

    #[test]
    fn inconsistent_data_reports_infeasible() {
        let k = random_filter::<f64>(2, 40).unwrap();
        let ens = ProbeEnsemble::build(ProbeChoice::Fourier, &k).unwrap();
        let mut set = assemble_constraints(&[exact(&k.choi(), &ens)]).unwrap();
        // push one outcome probability above what any PSD A allows
        set.constraints[1].value += 0.9;
        let (lo, _) = solve_bounds(&set, &k, 0.0).unwrap();
        assert_eq!(lo.status, SdpStatus::Infeasible);
        assert!(lo.max_violation > 1e-3);
    }

    #[test]
    fn solutions_are_deterministic() {
        let k = random_filter::<f64>(2, 50).unwrap();
        let chi = choi_of_kraus(&[k.kraus() * nalgebra::Complex::new(0.9, 0.0)]).unwrap();
        let ens = ProbeEnsemble::build(ProbeChoice::Fourier, &k).unwrap();
        let set = assemble_constraints(&[exact(&chi, &ens)]).unwrap();
        let a = solve_bounds(&set, &k, 0.0).unwrap();
        let b = solve_bounds(&set, &k, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constraint_json_round_trip() {
        let k = random_filter::<f64>(2, 60).unwrap();
        let ens = ProbeEnsemble::build(ProbeChoice::Fourier, &k).unwrap();
        let set = assemble_constraints(&[exact(&k.choi(), &ens)]).unwrap();
        let text = serde_json::to_string(&set.to_json()).unwrap();
        let back = ConstraintSet::<f64>::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.len(), set.len());
        assert!(linalg::max_abs_diff(&back.constraints[3].matrix, &set.constraints[3].matrix) < 1e-15);
        let (lo, _) = solve_bounds(&set, &k, 0.0).unwrap();
        let js = serde_json::to_value(lo.to_json()).unwrap();
        assert_eq!(js["status"], "optimal");
    }
}
