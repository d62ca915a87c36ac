//! Shift-and-invert Arnoldi for the assembled eigenproblem.
//!
//! The operator is real nonsymmetric, so eigenvalues near the shift are
//! extracted from a Krylov space of `(A - sigma I)^{-1}` built on one sparse
//! LU factorization. Right eigenvectors come from the Ritz vectors once
//! their true residuals meet the tolerance; left eigenvectors come from a
//! second Krylov space of the transposed solves and are matched by
//! eigenvalue. The left/right pairing defines the discrete inner product
//! under which distinct modes are orthogonal.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::hessenberg::hessenberg_eigen;
use super::operator::Csr;
use crate::{Error, Result};

const ARNOLDI_SEED: u64 = 0x5351_5a46_4f52_4745;

pub(crate) struct EigenPair {
    /// Eigenvalue of A (beta^2).
    pub value: f64,
    /// Unit-norm right eigenvector.
    pub right: Vec<f64>,
    /// Unit-norm left eigenvector (eigenvector of A^T for the same value).
    pub left: Vec<f64>,
    /// Relative residual `|A v - lambda v| / |lambda|` with `|v| = 1`.
    pub residual: f64,
}

struct ShiftInvert {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl ShiftInvert {
    fn new(a: &Csr, sigma: f64) -> Result<Self> {
        let mut trips: Vec<Triplet<usize, usize, f64>> = Vec::with_capacity(a.nnz() + a.n);
        for r in 0..a.n {
            let mut saw_diag = false;
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.col[k];
                let mut v = a.val[k];
                if c == r {
                    v -= sigma;
                    saw_diag = true;
                }
                trips.push(Triplet::new(r, c, v));
            }
            if !saw_diag {
                trips.push(Triplet::new(r, r, -sigma));
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &trips)
            .map_err(|e| Error::Config(format!("sparse matrix assembly failed: {e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| Error::NonConvergence {
            what: format!("sparse LU at shift {sigma:.6e} ({e:?})"),
            residual: f64::NAN,
        })?;
        Ok(Self { lu, n: a.n })
    }

    fn solve(&self, x: &[f64], transpose: bool) -> Vec<f64> {
        let mut rhs = Mat::<f64>::zeros(self.n, 1);
        for (i, v) in x.iter().enumerate() {
            rhs[(i, 0)] = *v;
        }
        if transpose {
            let out = self.lu.solve_transpose(&rhs);
            (0..self.n).map(|i| out[(i, 0)]).collect()
        } else {
            self.lu.solve_in_place(&mut rhs);
            (0..self.n).map(|i| rhs[(i, 0)]).collect()
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// One growing Arnoldi recurrence.
struct Arnoldi {
    basis: Vec<Vec<f64>>,
    h_cols: Vec<Vec<f64>>,
    broke_down: bool,
}

impl Arnoldi {
    fn new(v0: Vec<f64>) -> Self {
        Self { basis: vec![v0], h_cols: Vec::new(), broke_down: false }
    }

    fn extend(&mut self, m_target: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) {
        while self.h_cols.len() < m_target && !self.broke_down {
            let j = self.h_cols.len();
            let mut w = apply(&self.basis[j]);
            let mut hcol = vec![0.0; j + 2];
            // modified Gram-Schmidt with one reorthogonalization pass
            for _ in 0..2 {
                for (i, vi) in self.basis.iter().enumerate() {
                    let c = dot(&w, vi);
                    hcol[i] += c;
                    for (wk, vk) in w.iter_mut().zip(vi.iter()) {
                        *wk -= c * vk;
                    }
                }
            }
            let beta = norm(&w);
            hcol[j + 1] = beta;
            self.h_cols.push(hcol);
            if beta < 1e-13 {
                self.broke_down = true;
                break;
            }
            for x in w.iter_mut() {
                *x /= beta;
            }
            self.basis.push(w);
        }
    }

    fn m(&self) -> usize {
        self.h_cols.len()
    }

    /// Ritz pairs of the current projection plus the trailing subdiagonal.
    fn ritz(&self) -> (super::hessenberg::HessEig, f64) {
        let m = self.m();
        let mut hm = vec![vec![0.0; m]; m];
        for (j, col) in self.h_cols.iter().enumerate() {
            for i in 0..col.len().min(m) {
                hm[i][j] = col[i];
            }
        }
        let beta_last = self.h_cols[m - 1][m];
        (hessenberg_eigen(&hm), beta_last)
    }

    /// Lifts the k-th Ritz vector into the full space (real representative).
    fn lift(&self, vectors: &[Vec<num_complex::Complex64>], k: usize) -> Vec<f64> {
        let n = self.basis[0].len();
        let m = self.m();
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for (i, vi) in self.basis.iter().take(m).enumerate() {
            let c = vectors[k][i];
            if c.re != 0.0 {
                for (zk, vk) in re.iter_mut().zip(vi.iter()) {
                    *zk += c.re * vk;
                }
            }
            if c.im != 0.0 {
                for (zk, vk) in im.iter_mut().zip(vi.iter()) {
                    *zk += c.im * vk;
                }
            }
        }
        if norm(&im) > norm(&re) {
            im
        } else {
            re
        }
    }
}

struct Candidate {
    value: f64,
    vector: Vec<f64>,
    residual: f64,
}

/// Runs one side (right or transposed) until the `n_wanted` nearest
/// eigenpairs have true relative residuals below `tol`.
fn converge_side(
    a: &Csr,
    op: &ShiftInvert,
    sigma: f64,
    n_wanted: usize,
    tol: f64,
    transpose: bool,
    m_cap: usize,
) -> Vec<Candidate> {
    let n = a.n;
    let mut rng = ChaCha8Rng::seed_from_u64(ARNOLDI_SEED ^ (transpose as u64));
    let mut v0: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    normalize(&mut v0);
    let mut run = Arnoldi::new(v0);
    let mut m_target = (2 * n_wanted + 16).min(m_cap);

    let mut av = vec![0.0; n];
    loop {
        run.extend(m_target, |v| op.solve(v, transpose));
        let m = run.m();
        let (eig, beta_last) = run.ritz();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.values[j].norm().partial_cmp(&eig.values[i].norm()).unwrap());

        let est_ok = order.iter().take(n_wanted.min(m)).all(|&k| {
            let mu = eig.values[k].norm().max(1e-300);
            beta_last * eig.vectors[k][m - 1].norm() / mu < 1e-9
        });

        if est_ok || m >= m_cap || run.broke_down {
            let mut out: Vec<Candidate> = Vec::new();
            let mut all_good = true;
            for &k in order.iter().take((n_wanted + 4).min(m)) {
                let mu = eig.values[k];
                if mu.norm() < 1e-300 {
                    continue;
                }
                let lam = mu.inv() + sigma;
                if lam.im.abs() > 1e-6 * (1.0 + lam.re.abs()) {
                    continue;
                }
                let mut z = run.lift(&eig.vectors, k);
                if normalize(&mut z) == 0.0 {
                    continue;
                }
                // true residual against A (or A^T)
                if transpose {
                    av.iter_mut().for_each(|x| *x = 0.0);
                    for r in 0..n {
                        let zr = z[r];
                        if zr == 0.0 {
                            continue;
                        }
                        for kk in a.row_ptr[r]..a.row_ptr[r + 1] {
                            av[a.col[kk]] += a.val[kk] * zr;
                        }
                    }
                } else {
                    a.matvec(&z, &mut av);
                }
                let lam_rq = dot(&z, &av);
                let mut r2 = 0.0;
                for i in 0..n {
                    let d = av[i] - lam_rq * z[i];
                    r2 += d * d;
                }
                let res = r2.sqrt() / lam_rq.abs().max(1e-300);
                if res < tol {
                    let dup = out.iter().any(|c: &Candidate| {
                        (c.value - lam_rq).abs() < 1e-8 * (1.0 + c.value.abs())
                            && dot(&c.vector, &z).abs() > 0.9
                    });
                    if !dup {
                        out.push(Candidate { value: lam_rq, vector: z, residual: res });
                    }
                } else {
                    all_good = false;
                }
                if out.len() >= n_wanted + 2 {
                    break;
                }
            }
            if (all_good && out.len() >= n_wanted.min(out.len().max(1)))
                || m >= m_cap
                || run.broke_down
            {
                return out;
            }
        }
        if m >= m_cap || run.broke_down {
            unreachable!("handled above");
        }
        m_target = (m + 16).min(m_cap);
    }
}

/// Finds up to `n_wanted` eigenpairs of `a` nearest the shift, each meeting
/// `tol` relative residual, sorted by descending eigenvalue.
pub(crate) fn shift_invert_eigs(
    a: &Csr,
    sigma: f64,
    n_wanted: usize,
    tol: f64,
) -> Result<Vec<EigenPair>> {
    let n = a.n;
    let op = ShiftInvert::new(a, sigma)?;
    let m_cap = if n > 200_000 { 96 } else { 160 }.min(n);

    let rights = converge_side(a, &op, sigma, n_wanted, tol, false, m_cap);
    if rights.is_empty() {
        return Err(Error::NonConvergence {
            what: format!("shift-invert Arnoldi at sigma {sigma:.6e}"),
            residual: f64::NAN,
        });
    }
    let lefts = converge_side(a, &op, sigma, n_wanted, tol * 10.0, true, m_cap);

    let mut pairs: Vec<EigenPair> = Vec::new();
    for cand in rights {
        let left = lefts
            .iter()
            .filter(|l| (l.value - cand.value).abs() < 1e-7 * (1.0 + cand.value.abs()))
            .min_by(|a, b| {
                (a.value - cand.value)
                    .abs()
                    .partial_cmp(&(b.value - cand.value).abs())
                    .unwrap()
            });
        let Some(left) = left else { continue };
        let mut right = cand.vector;
        let mut lvec = left.vector.clone();
        // canonical sign: largest-magnitude right entry positive, and the
        // left/right product positive
        let mut idx = 0;
        let mut best = 0.0;
        for (i, v) in right.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                idx = i;
            }
        }
        if right[idx] < 0.0 {
            for v in right.iter_mut() {
                *v = -*v;
            }
        }
        if dot(&lvec, &right) < 0.0 {
            for v in lvec.iter_mut() {
                *v = -*v;
            }
        }
        pairs.push(EigenPair { value: cand.value, right, left: lvec, residual: cand.residual });
        if pairs.len() == n_wanted {
            break;
        }
    }
    if pairs.is_empty() {
        return Err(Error::NonConvergence {
            what: format!("left/right eigenvalue matching at sigma {sigma:.6e}"),
            residual: f64::NAN,
        });
    }
    pairs.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap());
    Ok(pairs)
}
