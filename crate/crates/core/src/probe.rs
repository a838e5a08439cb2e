// SPDX-License-Identifier: Apache-2.0

//! Probe-and-measure simulation.
//!
//! Each probe state is sent through the channel and the (unnormalized)
//! output is measured in a basis attached to that probe. The resulting
//! outcome weights `f_jk` are the only data the bounds consume.

use nalgebra::ComplexField;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{ideal_output, QuantumFilter};
use crate::linalg::{self, complete_basis, CVec};
use crate::quantum::{fourier_basis, output_state, Basis, ChoiMatrix, PureState};
use crate::scalar::{c, cr, Real};

/// Probe states of one basis, each with its own measurement basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet<T: Real> {
    pub label: String,
    pub probes: Basis<T>,
    pub measurements: Vec<Basis<T>>,
}

impl<T: Real> ProbeSet<T> {
    pub fn new(label: impl Into<String>, probes: Basis<T>, measurements: Vec<Basis<T>>) -> Result<Self> {
        let d = probes.dim();
        if measurements.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: measurements.len() });
        }
        if let Some(m) = measurements.iter().find(|m| m.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: m.dim() });
        }
        Ok(Self { label: label.into(), probes, measurements })
    }

    /// Measures every output in a basis whose first element is the ideal
    /// output of `k`, completed by Gram-Schmidt over computational vectors.
    /// Probes the filter annihilates are measured computationally.
    pub fn with_ideal_outputs(label: impl Into<String>, probes: Basis<T>, k: &QuantumFilter<T>) -> Result<Self> {
        let d = probes.dim();
        let drop = T::tol(|t| t.rank);
        let measurements = probes
            .iter()
            .map(|p| match ideal_output(k, p) {
                Ok((out, _)) => {
                    let vs = complete_basis(&[out.amplitudes().clone()], d, drop);
                    Basis::new(vs.into_iter().map(PureState::from_raw).collect())
                }
                Err(Error::FilteredToZero(_)) => Ok(Basis::computational(d)),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(label, probes, measurements)
    }

    /// Measures every output in the same basis.
    pub fn in_basis(label: impl Into<String>, probes: Basis<T>, meas: &Basis<T>) -> Result<Self> {
        let measurements = vec![meas.clone(); probes.dim()];
        Self::new(label, probes, measurements)
    }

    /// Right singular vectors of `k` as probes; probe `j` is measured in the
    /// left singular basis reordered so that `v_j` comes first.
    pub fn eigenprobes(label: impl Into<String>, k: &QuantumFilter<T>) -> Result<Self> {
        let d = k.dim();
        let left = k.left();
        let measurements = (0..d)
            .map(|j| {
                let mut vs = vec![left.get(j).clone()];
                vs.extend((0..d).filter(|&l| l != j).map(|l| left.get(l).clone()));
                Basis::new(vs)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(label, k.right().clone(), measurements)
    }

    pub fn dim(&self) -> usize {
        self.probes.dim()
    }
}

/// Which probe construction produced an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeChoice {
    /// `|0±>, |1±>` and `|±0>, |±1>` with computational auxiliary probes.
    Product,
    /// Right eigenbasis of the target and its Fourier transform.
    Eigen,
    /// Computational basis and its Fourier transform, computational auxiliary probes.
    Fourier,
    /// Computational basis and its qubit-wise Hadamard transform, computational auxiliary probes.
    Hadamard,
}

impl std::str::FromStr for ProbeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" => Ok(Self::Product),
            "eigen" => Ok(Self::Eigen),
            "fourier" => Ok(Self::Fourier),
            "hadamard" => Ok(Self::Hadamard),
            other => Err(Error::Schema(format!("unknown probe choice '{other}'"))),
        }
    }
}

/// The `e`, `f` and optional auxiliary `u` probe sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeEnsemble<T: Real> {
    pub e: ProbeSet<T>,
    pub f: ProbeSet<T>,
    pub u: Option<ProbeSet<T>>,
}

impl<T: Real> ProbeEnsemble<T> {
    pub fn build(choice: ProbeChoice, k: &QuantumFilter<T>) -> Result<Self> {
        match choice {
            ProbeChoice::Product => Self::product(k),
            ProbeChoice::Eigen => Self::eigen(k),
            ProbeChoice::Fourier => {
                let e = Basis::computational(k.dim());
                let f = fourier_basis(&e)?;
                Self::general(k, e, f)
            }
            ProbeChoice::Hadamard => {
                let d = k.dim();
                if !d.is_power_of_two() || d < 2 {
                    return Err(Error::InvalidDimension(d, "Hadamard probes need d = 2^n"));
                }
                let f = crate::quantum::hadamard_product_basis(d.trailing_zeros() as usize)?;
                Self::general(k, Basis::computational(d), f)
            }
        }
    }

    /// Two-qubit product probes `e = |0+>,|0->,|1+>,|1->`,
    /// `f = (H ⊗ H) e = |+0>,|+1>,|-0>,|-1>`.
    pub fn product(k: &QuantumFilter<T>) -> Result<Self> {
        if k.dim() != 4 {
            return Err(Error::InvalidDimension(k.dim(), "product probes are two-qubit"));
        }
        let s = T::one() / T::lit(2.0).sqrt();
        let q = |a: T, b: T| PureState::from_raw(CVec::from_vec(vec![cr(a), cr(b)]));
        let (zero, one) = (q(T::one(), T::zero()), q(T::zero(), T::one()));
        let (plus, minus) = (q(s, s), q(s, -s));
        let e = Basis::new(vec![
            zero.tensor(&plus),
            zero.tensor(&minus),
            one.tensor(&plus),
            one.tensor(&minus),
        ])?;
        let f = Basis::new(vec![
            plus.tensor(&zero),
            plus.tensor(&one),
            minus.tensor(&zero),
            minus.tensor(&one),
        ])?;
        Self::general(k, e, f)
    }

    /// Arbitrary `e`, `f` probes with computational auxiliary probes measured
    /// in the left singular basis of `k`.
    pub fn general(k: &QuantumFilter<T>, e: Basis<T>, f: Basis<T>) -> Result<Self> {
        let d = k.dim();
        Ok(Self {
            e: ProbeSet::with_ideal_outputs("e", e, k)?,
            f: ProbeSet::with_ideal_outputs("f", f, k)?,
            u: Some(ProbeSet::in_basis("u", Basis::computational(d), k.left())?),
        })
    }

    /// Eigenprobes: no auxiliary set is needed.
    pub fn eigen(k: &QuantumFilter<T>) -> Result<Self> {
        let f = fourier_basis(k.right())?;
        Ok(Self {
            e: ProbeSet::eigenprobes("e", k)?,
            f: ProbeSet::with_ideal_outputs("f", f, k)?,
            u: None,
        })
    }

    pub fn sets(&self) -> impl Iterator<Item = &ProbeSet<T>> {
        [Some(&self.e), Some(&self.f), self.u.as_ref()].into_iter().flatten()
    }

    pub fn dim(&self) -> usize {
        self.e.dim()
    }
}

/// `p_k = d Tr(chi (|m><m|)^T ⊗ |n_k><n_k|)`. Roundoff negatives are
/// clipped to zero; anything below `-construct` tolerance is an error.
pub fn theoretical_probabilities<T: Real>(
    chi: &ChoiMatrix<T>,
    probe: &PureState<T>,
    meas: &Basis<T>,
) -> Result<Vec<T>> {
    if meas.dim() != chi.dim() {
        return Err(Error::DimensionMismatch { expected: chi.dim(), found: meas.dim() });
    }
    let rho = output_state(chi, probe)?;
    meas.iter()
        .map(|n| {
            let p = linalg::expectation(&rho, n.amplitudes());
            if p >= T::zero() {
                Ok(p)
            } else if p >= -T::tol(|t| t.construct) {
                Ok(T::zero())
            } else {
                Err(Error::NegativeProbability(p.to_f64_lossy()))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    /// Shots per probe state.
    Sampled(u64),
}

/// Outcome weights for one probe set; `f[j][k]` belongs to probe `j` and
/// measurement vector `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordBlock<T: Real> {
    pub set: ProbeSet<T>,
    pub f: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord<T: Real> {
    pub mode: Mode,
    pub blocks: Vec<RecordBlock<T>>,
}

impl<T: Real> MeasurementRecord<T> {
    pub fn dim(&self) -> Option<usize> {
        self.blocks.first().map(|b| b.set.dim())
    }

    pub fn block(&self, label: &str) -> Option<&RecordBlock<T>> {
        self.blocks.iter().find(|b| b.set.label == label)
    }
}

/// Simulates every probe of `ensemble` on `chi`. With `shots`, each probe is
/// tried `shots` times and the detected outcomes are drawn from the
/// multinomial law including the no-detection event; probe `i` (counted
/// across the whole ensemble) uses ChaCha stream `i` of `seed`.
pub fn run_ensemble<T: Real>(
    chi: &ChoiMatrix<T>,
    ensemble: &ProbeEnsemble<T>,
    shots: Option<u64>,
    seed: u64,
) -> Result<MeasurementRecord<T>> {
    if ensemble.dim() != chi.dim() {
        return Err(Error::DimensionMismatch { expected: chi.dim(), found: ensemble.dim() });
    }
    if shots == Some(0) {
        return Err(Error::ZeroShots);
    }
    let mut stream = 0u64;
    let mut blocks = Vec::new();
    for set in ensemble.sets() {
        let mut rows = Vec::with_capacity(set.dim());
        for (probe, meas) in set.probes.iter().zip(&set.measurements) {
            let probs = theoretical_probabilities(chi, probe, meas)?;
            let row = match shots {
                None => probs,
                Some(n) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(stream);
                    sample_counts(&probs, n, &mut rng)
                        .into_iter()
                        .map(|x| T::lit(x as f64))
                        .collect()
                }
            };
            stream += 1;
            rows.push(row);
        }
        blocks.push(RecordBlock { set: set.clone(), f: rows });
    }
    let mode = shots.map_or(Mode::Exact, Mode::Sampled);
    Ok(MeasurementRecord { mode, blocks })
}

/// Multinomial draw over `probs` plus an implicit failure outcome carrying
/// the remaining mass, by sequential conditional binomials.
fn sample_counts<T: Real>(probs: &[T], shots: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut left = shots;
    let mut mass = 1.0f64;
    probs
        .iter()
        .map(|p| {
            let p = p.to_f64_lossy().max(0.0);
            if left == 0 || mass <= 0.0 {
                return 0;
            }
            let q = (p / mass).clamp(0.0, 1.0);
            let k = Binomial::new(left, q).map(|b| b.sample(rng)).unwrap_or(0);
            left -= k;
            mass -= p;
            k
        })
        .collect()
}

/// Relative success probabilities and normalized outcome distributions of
/// one probe set.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedStats<T: Real> {
    pub set: ProbeSet<T>,
    /// `P_j`, summing to one over the set.
    pub probs: Vec<T>,
    /// `f_jk / sum_k f_jk`; `None` for probes with no counts and zero ideal weight.
    pub outcomes: Vec<Option<Vec<T>>>,
}

impl<T: Real> ReducedStats<T> {
    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn label(&self) -> &str {
        &self.set.label
    }

    /// Overlap `<n_j1| rho~_j |n_j1>` with the first measurement vector.
    pub fn first_overlap(&self, j: usize) -> Option<T> {
        self.outcomes[j].as_ref().map(|o| o[0])
    }

    /// `<x|rho~_j|x>` if `x` is (up to phase) one of probe `j`'s measurement
    /// vectors. `Ok(None)` when the probe was dropped.
    pub fn overlap_along(&self, j: usize, x: &CVec<T>) -> Option<Option<T>> {
        let hit = T::one() - T::tol(|t| t.rank);
        let k = self.set.measurements[j]
            .iter()
            .position(|n| linalg::braket(n.amplitudes(), x).modulus() >= hit)?;
        Some(self.outcomes[j].as_ref().map(|o| o[k]))
    }
}

/// Reduces one record block. An empty row is a dropped term in exact mode.
/// With sampled data it is an error unless `k` annihilates the probe too.
pub fn reduce<T: Real>(block: &RecordBlock<T>, k: &QuantumFilter<T>, mode: Mode) -> Result<ReducedStats<T>> {
    let d = block.set.dim();
    if block.f.len() != d || block.f.iter().any(|r| r.len() != d) {
        return Err(Error::Schema(format!("block '{}' must hold {d}x{d} outcomes", block.set.label)));
    }
    if k.dim() != d {
        return Err(Error::DimensionMismatch { expected: k.dim(), found: d });
    }
    if block.f.iter().flatten().any(|x| !(*x >= T::zero())) {
        return Err(Error::Schema("outcome weights must be nonnegative".into()));
    }
    let totals: Vec<T> = block.f.iter().map(|r| r.iter().fold(T::zero(), |a, x| a + *x)).collect();
    let grand = totals.iter().fold(T::zero(), |a, x| a + *x);
    if grand <= T::zero() {
        return Err(Error::AllZeroRecord);
    }
    // rows carrying only roundoff relative to the block count as empty
    let floor = grand * T::tol(|t| t.zero_weight);
    let mut outcomes = Vec::with_capacity(d);
    for (j, (row, total)) in block.f.iter().zip(&totals).enumerate() {
        if *total > floor {
            outcomes.push(Some(row.iter().map(|x| *x / *total).collect()));
        } else if matches!(mode, Mode::Sampled(_)) && k.weight(block.set.probes.get(j)) >= T::tol(|t| t.zero_weight) {
            return Err(Error::InsufficientData { basis: block.set.label.clone(), probe: j });
        } else {
            outcomes.push(None);
        }
    }
    Ok(ReducedStats {
        set: block.set.clone(),
        probs: totals.iter().map(|t| *t / grand).collect(),
        outcomes,
    })
}

/// Reduced statistics of a whole record, keyed by probe-set label.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats<T: Real> {
    pub e: ReducedStats<T>,
    pub f: ReducedStats<T>,
    pub u: Option<ReducedStats<T>>,
}

pub fn reduce_record<T: Real>(record: &MeasurementRecord<T>, k: &QuantumFilter<T>) -> Result<EnsembleStats<T>> {
    if record.blocks.is_empty() {
        return Err(Error::EmptyRecord);
    }
    let get = |label: &str| -> Result<Option<ReducedStats<T>>> {
        record.block(label).map(|b| reduce(b, k, record.mode)).transpose()
    };
    let missing = |l: &str| Error::Schema(format!("record lacks the '{l}' probe set"));
    Ok(EnsembleStats {
        e: get("e")?.ok_or_else(|| missing("e"))?,
        f: get("f")?.ok_or_else(|| missing("f"))?,
        u: get("u")?,
    })
}

/// `{"re": [...], "im": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorJson {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl VectorJson {
    pub fn from_state<T: Real>(s: &PureState<T>) -> Self {
        let a = s.amplitudes();
        Self {
            re: a.iter().map(|z| z.re.to_f64_lossy()).collect(),
            im: a.iter().map(|z| z.im.to_f64_lossy()).collect(),
        }
    }

    pub fn to_state<T: Real>(&self, d: usize) -> Result<PureState<T>> {
        if self.re.len() != d || self.im.len() != d {
            return Err(Error::Schema(format!("state vectors must have {d} entries")));
        }
        PureState::new(CVec::from_fn(d, |i, _| c(T::lit(self.re[i]), T::lit(self.im[i]))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisJson {
    pub label: String,
    pub probes: Vec<VectorJson>,
    pub measurements: Vec<Vec<VectorJson>>,
}

/// Interchange format between simulation (or an experiment) and the bound
/// computation. Rows of `f` follow the order of `bases`, `d` rows each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordJson {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    pub bases: Vec<BasisJson>,
    pub f: Vec<Vec<f64>>,
}

impl<T: Real> MeasurementRecord<T> {
    pub fn to_json(&self) -> RecordJson {
        let (mode, shots) = match self.mode {
            Mode::Exact => ("exact".to_string(), None),
            Mode::Sampled(n) => ("sampled".to_string(), Some(n)),
        };
        let bases = self
            .blocks
            .iter()
            .map(|b| BasisJson {
                label: b.set.label.clone(),
                probes: b.set.probes.iter().map(VectorJson::from_state).collect(),
                measurements: b
                    .set
                    .measurements
                    .iter()
                    .map(|m| m.iter().map(VectorJson::from_state).collect())
                    .collect(),
            })
            .collect();
        let f = self
            .blocks
            .iter()
            .flat_map(|b| b.f.iter().map(|r| r.iter().map(|x| x.to_f64_lossy()).collect()))
            .collect();
        RecordJson { mode, shots, bases, f }
    }

    pub fn from_json(json: &RecordJson) -> Result<Self> {
        let mode = match (json.mode.as_str(), json.shots) {
            ("exact", _) => Mode::Exact,
            ("sampled", Some(0)) => return Err(Error::ZeroShots),
            ("sampled", Some(n)) => Mode::Sampled(n),
            ("sampled", None) => return Err(Error::Schema("sampled record needs 'shots'".into())),
            (other, _) => return Err(Error::Schema(format!("unknown mode '{other}'"))),
        };
        let first = json.bases.first().ok_or(Error::EmptyRecord)?;
        let d = first.probes.len();
        if json.f.len() != d * json.bases.len() {
            return Err(Error::Schema(format!("'f' must have {} rows", d * json.bases.len())));
        }
        let mut blocks = Vec::with_capacity(json.bases.len());
        for (i, b) in json.bases.iter().enumerate() {
            let states = |vs: &[VectorJson]| -> Result<Basis<T>> {
                Basis::new(vs.iter().map(|v| v.to_state(d)).collect::<Result<Vec<_>>>()?)
            };
            let probes = states(&b.probes)?;
            let measurements = b.measurements.iter().map(|m| states(m)).collect::<Result<Vec<_>>>()?;
            let set = ProbeSet::new(b.label.clone(), probes, measurements)?;
            let f = json.f[i * d..(i + 1) * d]
                .iter()
                .map(|r| {
                    if r.len() != d {
                        return Err(Error::Schema(format!("'f' rows must have {d} entries")));
                    }
                    Ok(r.iter().map(|x| T::lit(*x)).collect())
                })
                .collect::<Result<Vec<_>>>()?;
            blocks.push(RecordBlock { set, f });
        }
        Ok(Self { mode, blocks })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{ppbs_from_intensity, random_filter};

    #[test]
    fn probabilities_examples() {
        let chi = QuantumFilter::new(linalg::identity::<f64>(2)).unwrap().choi();
        let p = theoretical_probabilities(&chi, &PureState::computational(2, 0), &Basis::computational(2)).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-14 && p[1].abs() < 1e-14);

        let k = ppbs_from_intensity(0.5f64).unwrap();
        let ens = ProbeEnsemble::product(&k).unwrap();
        let p = theoretical_probabilities(&k.choi(), ens.e.probes.get(0), &ens.e.measurements[0]).unwrap();
        // oracle: <psi|K^dag K|psi> = (1 + 0.5) / 2
        assert!((p[0] - 0.75).abs() < 1e-14);
        assert!(p[1..].iter().all(|x| x.abs() < 1e-14));

        let mixed = ChoiMatrix::from_matrix(linalg::identity::<f64>(16) * cr(1.0 / 16.0)).unwrap();
        let p = theoretical_probabilities(&mixed, ens.f.probes.get(2), &ens.f.measurements[2]).unwrap();
        // d Tr(I/16 (m m^T ⊗ n n^dag)) = 4/16
        assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-14));
    }

    #[test]
    fn exact_record_normalization_identity() {
        let k = ppbs_from_intensity(0.6f64).unwrap();
        let kp = random_filter::<f64>(4, 3).unwrap();
        let chi = crate::filters::mixture_channel(&k, &kp, 0.7).unwrap().choi;
        let ens = ProbeEnsemble::product(&k).unwrap();
        let rec = run_ensemble(&chi, &ens, None, 0).unwrap();
        assert_eq!(rec.blocks.len(), 3);
        for b in &rec.blocks {
            let total: f64 = b.f.iter().flatten().sum();
            assert!((total - 4.0 * chi.trace()).abs() < 1e-10);
            for (row, p) in b.f.iter().zip(b.set.probes.iter()) {
                let tr = output_state(&chi, p).unwrap().trace().re;
                assert!((row.iter().sum::<f64>() - tr).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn perfect_channel_overlaps_are_one() {
        let k = ppbs_from_intensity(0.3f64).unwrap();
        let ens = ProbeEnsemble::product(&k).unwrap();
        let rec = run_ensemble(&k.choi(), &ens, None, 0).unwrap();
        let stats = reduce_record(&rec, &k).unwrap();
        for j in 0..4 {
            assert!((stats.e.first_overlap(j).unwrap() - 1.0).abs() < 1e-12);
            assert!((stats.f.first_overlap(j).unwrap() - 1.0).abs() < 1e-12);
            let want = k.weight(ens.e.probes.get(j)) / k.gram_trace();
            assert!((stats.e.probs[j] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_filter_cross_overlaps_are_kronecker() {
        let k = ppbs_from_intensity(0.5f64).unwrap();
        let ens = ProbeEnsemble::product(&k).unwrap();
        let rec = run_ensemble(&k.choi(), &ens, None, 0).unwrap();
        let u = reduce(rec.block("u").unwrap(), &k, rec.mode).unwrap();
        // |11> is annihilated: no counts, zero ideal weight, dropped
        assert!(u.outcomes[3].is_none());
        for j in 0..3 {
            for l in 0..4 {
                let v = k.left().get(l).amplitudes();
                let got = u.overlap_along(j, v).unwrap().unwrap();
                let want = if v[j].modulus() > 0.5 { 1.0 } else { 0.0 };
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uniform_record_gives_uniform_probs() {
        let k = QuantumFilter::new(linalg::identity::<f64>(3)).unwrap();
        let set = ProbeSet::in_basis("e", Basis::computational(3), &Basis::computational(3)).unwrap();
        let block = RecordBlock { set, f: vec![vec![1.0; 3]; 3] };
        let s = reduce(&block, &k, Mode::Exact).unwrap();
        assert!(s.probs.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn reduce_errors() {
        let k = QuantumFilter::new(linalg::identity::<f64>(2)).unwrap();
        let set = ProbeSet::in_basis("e", Basis::computational(2), &Basis::computational(2)).unwrap();
        let block = RecordBlock { set: set.clone(), f: vec![vec![0.0, 0.0], vec![1.0, 0.0]] };
        assert!(matches!(reduce(&block, &k, Mode::Sampled(10)), Err(Error::InsufficientData { probe: 0, .. })));
        // an exact zero row is a measured zero transmission probability
        let s = reduce(&block, &k, Mode::Exact).unwrap();
        assert!(s.outcomes[0].is_none() && s.probs[0] == 0.0);
        let block = RecordBlock { set, f: vec![vec![0.0, 0.0], vec![0.0, 0.0]] };
        assert_eq!(reduce(&block, &k, Mode::Exact), Err(Error::AllZeroRecord));
    }

    #[test]
    fn eigen_ensemble_reuses_e_record() {
        // R_j = P_j and zeta~_j = rho~_j when u = e = w
        let k = random_filter::<f64>(3, 8).unwrap();
        let kp = random_filter::<f64>(3, 9).unwrap();
        let chi = crate::filters::mixture_channel(&k, &kp, 0.6).unwrap().choi;
        let ens = ProbeEnsemble::eigen(&k).unwrap();
        let mut with_u = ens.clone();
        with_u.u = Some(ProbeSet::in_basis("u", k.right().clone(), k.left()).unwrap());
        let rec = run_ensemble(&chi, &with_u, None, 0).unwrap();
        let s = reduce_record(&rec, &k).unwrap();
        let u = s.u.unwrap();
        for j in 0..3 {
            assert!((u.probs[j] - s.e.probs[j]).abs() < 1e-10);
            for l in 0..3 {
                let v = k.left().get(l).amplitudes();
                let a = u.overlap_along(j, v).unwrap().unwrap();
                let b = s.e.overlap_along(j, v).unwrap().unwrap();
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_rejects_zero_shots() {
        let k = ppbs_from_intensity(0.75f64).unwrap();
        let ens = ProbeEnsemble::product(&k).unwrap();
        let chi = k.choi();
        let a = run_ensemble(&chi, &ens, Some(1000), 17).unwrap();
        let b = run_ensemble(&chi, &ens, Some(1000), 17).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mode, Mode::Sampled(1000));
        assert_eq!(run_ensemble(&chi, &ens, Some(0), 17), Err(Error::ZeroShots));
    }

    #[test]
    fn sampling_converges() {
        let k = ppbs_from_intensity(0.6f64).unwrap();
        let kp = random_filter::<f64>(4, 21).unwrap();
        let chi = crate::filters::mixture_channel(&k, &kp, 0.5).unwrap().choi;
        let ens = ProbeEnsemble::product(&k).unwrap();
        let exact = run_ensemble(&chi, &ens, None, 0).unwrap();
        let n = 10_000_000u64;
        let sampled = run_ensemble(&chi, &ens, Some(n), 5).unwrap();
        for (be, bs) in exact.blocks.iter().zip(&sampled.blocks) {
            for (re, rs) in be.f.iter().zip(&bs.f) {
                for (p, cnt) in re.iter().zip(rs) {
                    let sigma = (p * (1.0 - p) / n as f64).sqrt();
                    assert!((cnt / n as f64 - p).abs() <= 3.0 * sigma + 1e-12);
                }
            }
        }
    }

    #[test]
    fn sampling_is_unbiased() {
        let k = ppbs_from_intensity(0.75f64).unwrap();
        let kp = random_filter::<f64>(4, 2).unwrap();
        let chi = crate::filters::mixture_channel(&k, &kp, 0.8).unwrap().choi;
        let ens = ProbeEnsemble::product(&k).unwrap();
        let exact = run_ensemble(&chi, &ens, None, 0).unwrap();
        let shots = 1000u64;
        let seeds = 200u64;
        let mut mean = vec![vec![vec![0.0; 4]; 4]; 3];
        for s in 0..seeds {
            let rec = run_ensemble(&chi, &ens, Some(shots), s).unwrap();
            for (b, blk) in rec.blocks.iter().enumerate() {
                for j in 0..4 {
                    for kk in 0..4 {
                        mean[b][j][kk] += blk.f[j][kk] / shots as f64 / seeds as f64;
                    }
                }
            }
        }
        for (b, blk) in exact.blocks.iter().enumerate() {
            for j in 0..4 {
                for kk in 0..4 {
                    let p = blk.f[j][kk];
                    let sigma = (p * (1.0 - p) / (shots * seeds) as f64).sqrt();
                    assert!((mean[b][j][kk] - p).abs() <= 4.0 * sigma + 1e-12);
                }
            }
        }
    }

    #[test]
    fn record_json_round_trip() {
        let k = ppbs_from_intensity(0.75f64).unwrap();
        let ens = ProbeEnsemble::product(&k).unwrap();
        let rec = run_ensemble(&k.choi(), &ens, Some(50), 1).unwrap();
        let text = serde_json::to_string(&rec.to_json()).unwrap();
        assert!(text.contains("\"mode\":\"sampled\""));
        let back = MeasurementRecord::<f64>::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.mode, rec.mode);
        assert_eq!(back.blocks.len(), 3);
        for (a, b) in back.blocks.iter().zip(&rec.blocks) {
            assert_eq!(a.f, b.f);
            assert!(linalg::max_abs_diff(&a.set.probes.matrix(), &b.set.probes.matrix()) < 1e-15);
        }
        let mut bad = rec.to_json();
        bad.f.pop();
        assert!(matches!(MeasurementRecord::<f64>::from_json(&bad), Err(Error::Schema(_))));
    }

    #[test]
    fn probe_set_shape_is_checked() {
        let e = Basis::<f64>::computational(2);
        let r = ProbeSet::new("e", e, vec![Basis::computational(2)]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }
}
