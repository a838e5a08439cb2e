// SPDX-License-Identifier: Apache-2.0

//! Dense primal-dual interior-point method for real block-diagonal SDPs
//!
//! ```text
//! min <C, X>  s.t.  <A_i, X> = b_i,  X ⪰ 0
//! max b^T y   s.t.  Σ y_i A_i + S = C,  S ⪰ 0
//! ```
//!
//! Infeasible start, Nesterov-Todd scaling, Mehrotra predictor-corrector.
//! Blocks of order one carry ordinary nonnegative variables.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::scalar::Real;

/// Real block-diagonal problem. Each constraint lists only its nonzero blocks.
#[derive(Debug, Clone)]
pub struct BlockProblem<T: Real> {
    pub sizes: Vec<usize>,
    pub c: Vec<DMatrix<T>>,
    pub a: Vec<Vec<(usize, DMatrix<T>)>>,
    pub b: DVector<T>,
}

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub gap_tol: f64,
    pub residual_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Converged,
    MaxIter,
    /// Step lengths collapsed or the scaling broke down.
    Stalled,
    /// The dual iterates form a ray certifying that no feasible `X` exists.
    PrimalInfeasible,
}

#[derive(Debug, Clone)]
pub struct BlockSolution<T: Real> {
    pub x: Vec<DMatrix<T>>,
    pub y: DVector<T>,
    pub s: Vec<DMatrix<T>>,
    pub primal_obj: T,
    pub dual_obj: T,
    pub rel_gap: T,
    pub primal_res: T,
    pub dual_res: T,
    pub iterations: usize,
    pub exit: Exit,
}

type Blocks<T> = Vec<DMatrix<T>>;

fn inner<T: Real>(a: &[DMatrix<T>], b: &[DMatrix<T>]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + x.dot(y))
}

fn frob<T: Real>(a: &[DMatrix<T>]) -> T {
    inner(a, a).sqrt()
}

impl<T: Real> BlockProblem<T> {
    fn order(&self) -> usize {
        self.sizes.iter().sum()
    }

    fn apply(&self, x: &[DMatrix<T>]) -> DVector<T> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|row| {
            row.iter().fold(T::zero(), |acc, (blk, m)| acc + m.dot(&x[*blk]))
        }))
    }

    fn adjoint(&self, y: &DVector<T>) -> Blocks<T> {
        let mut out: Blocks<T> = self.sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (row, yi) in self.a.iter().zip(y.iter()) {
            for (blk, m) in row {
                out[*blk] += m * *yi;
            }
        }
        out
    }
}

/// Per-block NT scaling `W = G G^T` with `G^{-1} X G^{-T} = G^T S G = diag(d)`.
struct Scaling<T: Real> {
    g: Blocks<T>,
    g_inv: Blocks<T>,
    d: Vec<DVector<T>>,
}

fn nt_scaling<T: Real>(x: &[DMatrix<T>], s: &[DMatrix<T>]) -> Option<Scaling<T>> {
    let mut g = Vec::with_capacity(x.len());
    let mut g_inv = Vec::with_capacity(x.len());
    let mut d = Vec::with_capacity(x.len());
    for (xb, sb) in x.iter().zip(s) {
        let l = Cholesky::new(xb.clone())?.unpack();
        let eig = (l.transpose() * sb * &l).symmetric_eigen();
        if eig.eigenvalues.iter().any(|&v| v <= T::zero() || !v.is_finite()) {
            return None;
        }
        let quarter = eig.eigenvalues.map(|v| v.sqrt().sqrt());
        let l_inv = l.clone().try_inverse()?;
        let q = eig.eigenvectors;
        let mut gb = &l * &q;
        for (j, mut col) in gb.column_iter_mut().enumerate() {
            col /= quarter[j];
        }
        let mut gi = q.transpose() * l_inv;
        for (i, mut row) in gi.row_iter_mut().enumerate() {
            row *= quarter[i];
        }
        g.push(gb);
        g_inv.push(gi);
        d.push(eig.eigenvalues.map(|v| v.sqrt()));
    }
    Some(Scaling { g, g_inv, d })
}

/// Search direction, unscaled and in NT-scaled coordinates.
struct Direction<T: Real> {
    dx: Blocks<T>,
    dy: DVector<T>,
    ds: Blocks<T>,
    dx_scaled: Blocks<T>,
    ds_scaled: Blocks<T>,
}

/// Newton system for one iterate; the Schur complement is factored once and
/// shared by predictor and corrector.
struct Newton<'a, T: Real> {
    problem: &'a BlockProblem<T>,
    sc: &'a Scaling<T>,
    scaled_a: Vec<Vec<(usize, DMatrix<T>)>>,
    schur: Cholesky<T, nalgebra::Dyn>,
    rd: &'a [DMatrix<T>],
    rd_scaled: Blocks<T>,
    rp: &'a DVector<T>,
}

impl<'a, T: Real> Newton<'a, T> {
    fn new(problem: &'a BlockProblem<T>, sc: &'a Scaling<T>, rp: &'a DVector<T>, rd: &'a [DMatrix<T>]) -> Option<Self> {
        let scaled_a: Vec<Vec<(usize, DMatrix<T>)>> = problem
            .a
            .iter()
            .map(|row| row.iter().map(|(blk, m)| (*blk, congruence(&sc.g[*blk], m))).collect())
            .collect();
        let m = scaled_a.len();
        let mut schur = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let mut v = T::zero();
                for (bi, ai) in &scaled_a[i] {
                    for (bj, aj) in &scaled_a[j] {
                        if bi == bj {
                            v += ai.dot(aj);
                        }
                    }
                }
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let schur = regularized_cholesky(schur)?;
        let rd_scaled = rd.iter().zip(&sc.g).map(|(r, g)| congruence(g, r)).collect();
        Some(Self { problem, sc, scaled_a, schur, rd, rd_scaled, rp })
    }

    /// `W M W` with `W = G G^T`.
    fn sandwich_w(&self, blk: usize, m: &DMatrix<T>) -> DMatrix<T> {
        let g = &self.sc.g[blk];
        g * congruence(g, m) * g.transpose()
    }

    /// Solves for the direction given the scaled complementarity right-hand
    /// side `D(dX~ + dS~) + (dX~ + dS~)D = rc`. The dual step is formed in
    /// unscaled coordinates and the primal one is refined against the
    /// unscaled equality residual, since the scaling is ill-conditioned near
    /// the optimum.
    fn solve(&self, rc: &[DMatrix<T>]) -> Direction<T> {
        let h: Blocks<T> = rc
            .iter()
            .zip(&self.sc.d)
            .map(|(r, d)| DMatrix::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)] / (d[i] + d[j])))
            .collect();
        let mut rhs = self.rp.clone();
        for (i, row) in self.scaled_a.iter().enumerate() {
            for (blk, a) in row {
                rhs[i] -= a.dot(&(&h[*blk] - &self.rd_scaled[*blk]));
            }
        }
        let mut dy = self.schur.solve(&rhs);
        let aty = self.problem.adjoint(&dy);
        let mut ds: Blocks<T> = self.rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
        let mut dx: Blocks<T> = h
            .iter()
            .enumerate()
            .map(|(blk, hb)| {
                let g = &self.sc.g[blk];
                g * (hb - congruence(g, &ds[blk])) * g.transpose()
            })
            .collect();
        for _ in 0..2 {
            let res = self.rp - self.problem.apply(&dx);
            let z = self.schur.solve(&res);
            let az = self.problem.adjoint(&z);
            for (blk, a) in az.iter().enumerate() {
                ds[blk] -= a;
                dx[blk] += self.sandwich_w(blk, a);
            }
            dy += z;
        }
        let dx_scaled = dx.iter().zip(&self.sc.g_inv).map(|(m, gi)| gi * m * gi.transpose()).collect();
        let ds_scaled = ds.iter().zip(&self.sc.g).map(|(m, g)| congruence(g, m)).collect();
        Direction { dx, dy, ds, dx_scaled, ds_scaled }
    }
}

/// `G^T M G`.
fn congruence<T: Real>(g: &DMatrix<T>, m: &DMatrix<T>) -> DMatrix<T> {
    g.transpose() * m * g
}

/// Cholesky factor, shifting the diagonal when the Schur complement has lost
/// definiteness to roundoff near a degenerate optimum.
fn regularized_cholesky<T: Real>(m: DMatrix<T>) -> Option<Cholesky<T, nalgebra::Dyn>> {
    let top = m.diagonal().iter().fold(T::zero(), |a, &v| a.max(v));
    let mut shift = T::zero();
    for _ in 0..8 {
        let mut trial = m.clone();
        for i in 0..trial.nrows() {
            trial[(i, i)] += shift;
        }
        if let Some(ch) = Cholesky::new(trial) {
            return Some(ch);
        }
        shift = if shift == T::zero() { top * T::default_epsilon() * T::lit(16.0) } else { shift * T::lit(100.0) };
    }
    None
}

/// Largest step keeping `diag(d) + alpha * m` positive semidefinite.
fn max_step<T: Real>(d: &[DVector<T>], m: &[DMatrix<T>]) -> T {
    let mut alpha = T::max_value().unwrap_or_else(|| T::lit(1e300));
    for (db, mb) in d.iter().zip(m) {
        let scaled = DMatrix::from_fn(mb.nrows(), mb.ncols(), |i, j| mb[(i, j)] / (db[i] * db[j]).sqrt());
        let lo = scaled.symmetric_eigenvalues().min();
        if lo < T::zero() {
            alpha = alpha.min(-T::one() / lo);
        }
    }
    alpha
}

fn diag_blocks<T: Real>(d: &[DVector<T>], f: impl Fn(T) -> T) -> Blocks<T> {
    d.iter().map(|v| DMatrix::from_diagonal(&v.map(&f))).collect()
}

/// `<diag(d) + a dX, diag(d) + b dS>`.
fn shifted_inner<T: Real>(d: &[DVector<T>], dx: &[DMatrix<T>], ds: &[DMatrix<T>], a: T, b: T) -> T {
    let mut v = T::zero();
    for ((db, x), s) in d.iter().zip(dx).zip(ds) {
        let xs = DMatrix::from_diagonal(db) + x * a;
        let ss = DMatrix::from_diagonal(db) + s * b;
        v += xs.dot(&ss);
    }
    v
}

fn aty_plus_s<T: Real>(aty: &[DMatrix<T>], s: &[DMatrix<T>]) -> Blocks<T> {
    aty.iter().zip(s).map(|(a, s)| a + s).collect()
}

/// Iterations without dual improvement before giving up.
const STALL_WINDOW: usize = 25;

pub fn solve<T: Real>(p: &BlockProblem<T>, settings: &Settings) -> BlockSolution<T> {
    let n = p.order();
    let nf = T::from_usize_lossy(n);
    // X0 spreads the first constraint's right-hand side evenly; S0 = I.
    let scale = if p.b.is_empty() { T::one() } else { p.b[0].abs().max(T::one()) };
    let mut x: Blocks<T> = p.sizes.iter().map(|&k| DMatrix::identity(k, k) * (scale / nf)).collect();
    let mut s: Blocks<T> = p.sizes.iter().map(|&k| DMatrix::identity(k, k)).collect();
    let mut y = DVector::zeros(p.b.len());
    let (gap_tol, res_tol) = (T::lit(settings.gap_tol), T::lit(settings.residual_tol));
    let b_norm = T::one() + p.b.norm();
    let c_norm = T::one() + frob(&p.c);
    let mut iterations = 0;
    let mut exit = Exit::MaxIter;
    // Dual-feasible iterate with the largest dual objective; returned when
    // the method fails to converge, since its dual value is still a bound.
    let mut best: Option<BlockSolution<T>> = None;
    let mut since_best = 0;

    loop {
        let rp = &p.b - p.apply(&x);
        let aty = p.adjoint(&y);
        let rd: Blocks<T> = p.c.iter().zip(&s).zip(&aty).map(|((c, s), a)| c - s - a).collect();
        let (pobj, dobj) = (inner(&p.c, &x), p.b.dot(&y));
        let gap = (pobj - dobj).abs() / (T::one() + pobj.abs() + dobj.abs());
        let (pres, dres) = (rp.norm() / b_norm, frob(&rd) / c_norm);
        if gap <= gap_tol && pres <= res_tol && dres <= res_tol {
            exit = Exit::Converged;
        } else if dobj > T::zero() && frob(&aty_plus_s(&aty, &s)) / dobj < res_tol {
            exit = Exit::PrimalInfeasible;
        } else if !(pobj.is_finite() && dobj.is_finite()) {
            exit = Exit::Stalled;
        }
        if exit == Exit::MaxIter && dres <= res_tol && dobj.is_finite() {
            if best.as_ref().is_none_or(|b| dobj > b.dual_obj) {
                best = Some(BlockSolution {
                    x: x.clone(), y: y.clone(), s: s.clone(), primal_obj: pobj, dual_obj: dobj, rel_gap: gap, primal_res: pres, dual_res: dres, iterations, exit,
                });
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        if since_best >= STALL_WINDOW {
            exit = Exit::Stalled;
        }
        let finish = |x, y, s, exit| {
            let current = BlockSolution { x, y, s, primal_obj: pobj, dual_obj: dobj, rel_gap: gap, primal_res: pres, dual_res: dres, iterations, exit };
            match (exit, best.clone()) {
                (Exit::MaxIter | Exit::Stalled, Some(b)) => BlockSolution { iterations, exit, ..b },
                _ => current,
            }
        };
        if exit != Exit::MaxIter || iterations >= settings.max_iter {
            return finish(x, y, s, exit);
        }
        let stalled = |x, y, s| finish(x, y, s, Exit::Stalled);

        let mu = inner(&x, &s) / nf;
        let Some(sc) = nt_scaling(&x, &s) else { return stalled(x, y, s) };
        let Some(newton) = Newton::new(p, &sc, &rp, &rd) else { return stalled(x, y, s) };

        // predictor
        let rc_aff = diag_blocks(&sc.d, |v| -(v + v) * v);
        let aff = newton.solve(&rc_aff);
        let (dx_a, ds_a) = (&aff.dx_scaled, &aff.ds_scaled);
        let ap = T::one().min(max_step(&sc.d, dx_a));
        let ad = T::one().min(max_step(&sc.d, ds_a));
        let mu_aff = shifted_inner(&sc.d, dx_a, ds_a, ap, ad) / nf;
        let ratio = (mu_aff / mu).max(T::zero());
        let sigma = T::one().min(ratio * ratio * ratio);

        // corrector
        let target = T::lit(2.0) * sigma * mu;
        let rc: Blocks<T> = sc
            .d
            .iter()
            .zip(dx_a.iter().zip(ds_a))
            .map(|(d, (dx, ds))| {
                let k = d.len();
                let cross = dx * ds + ds * dx;
                DMatrix::from_fn(k, k, |i, j| {
                    let diag = if i == j { target - T::lit(2.0) * d[i] * d[i] } else { T::zero() };
                    diag - cross[(i, j)]
                })
            })
            .collect();
        let dir = newton.solve(&rc);
        let (mp, md) = (max_step(&sc.d, &dir.dx_scaled), max_step(&sc.d, &dir.ds_scaled));
        let gamma = T::lit(0.9) + T::lit(0.09) * mp.min(md).min(T::one());
        let ap = T::one().min(gamma * mp);
        let ad = T::one().min(gamma * md);
        if ap < T::lit(1e-12) && ad < T::lit(1e-12) {
            return stalled(x, y, s);
        }
        for (blk, (dxb, dsb)) in dir.dx.iter().zip(&dir.ds).enumerate() {
            x[blk] += dxb * ap;
            x[blk] = (&x[blk] + x[blk].transpose()) * T::lit(0.5);
            s[blk] += dsb * ad;
            s[blk] = (&s[blk] + s[blk].transpose()) * T::lit(0.5);
        }
        y.axpy(ad, &dir.dy, T::one());
        iterations += 1;
    }
}
