//! Dense eigensolver for small upper-Hessenberg matrices.
//!
//! Complex single-shift QR with Wilkinson shifts and Givens rotations,
//! followed by triangular back-substitution for the eigenvectors. Sized for
//! the Krylov projections of the shift-invert solver (m up to a few
//! hundred), where an O(m^3) dense method is negligible next to one sparse
//! factorization.

use num_complex::Complex64;

type C = Complex64;

pub(crate) struct HessEig {
    pub values: Vec<C>,
    /// Unit-norm eigenvectors, column k belongs to `values[k]`.
    pub vectors: Vec<Vec<C>>,
}

/// Eigendecomposition of a real upper-Hessenberg matrix given by rows.
pub(crate) fn hessenberg_eigen(h_rows: &[Vec<f64>]) -> HessEig {
    let m = h_rows.len();
    let mut h: Vec<C> = Vec::with_capacity(m * m);
    for row in h_rows {
        debug_assert_eq!(row.len(), m);
        h.extend(row.iter().map(|v| C::new(*v, 0.0)));
    }
    let mut q = identity(m);

    schur_in_place(&mut h, &mut q, m);

    let values: Vec<C> = (0..m).map(|i| h[i * m + i]).collect();
    let vectors = (0..m).map(|k| eigenvector(&h, &q, m, k)).collect();
    HessEig { values, vectors }
}

fn identity(m: usize) -> Vec<C> {
    let mut q = vec![C::new(0.0, 0.0); m * m];
    for i in 0..m {
        q[i * m + i] = C::new(1.0, 0.0);
    }
    q
}

/// Complex Givens rotation with |c|^2 + |s|^2 = 1 zeroing the second entry.
fn givens(a: C, b: C) -> (f64, C) {
    let bn = b.norm();
    if bn == 0.0 {
        return (1.0, C::new(0.0, 0.0));
    }
    let an = a.norm();
    let r = (an * an + bn * bn).sqrt();
    if an == 0.0 {
        return (0.0, C::new(1.0, 0.0));
    }
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s)
}

/// Reduces H (row-major, m x m) to upper-triangular complex Schur form,
/// accumulating the similarity into Q.
fn schur_in_place(h: &mut [C], q: &mut [C], m: usize) {
    if m == 0 {
        return;
    }
    let at = |h: &[C], i: usize, j: usize| h[i * m + j];
    let mut p = m - 1;
    let mut sweeps = 0usize;
    let max_sweeps = 40 * m + 100;

    while p > 0 {
        sweeps += 1;
        if sweeps > max_sweeps {
            // leave whatever is left; callers verify residuals downstream
            break;
        }
        // deflate converged subdiagonals
        let tiny = |h: &[C], i: usize| {
            let s = at(h, i - 1, i - 1).norm() + at(h, i, i).norm();
            at(h, i, i - 1).norm() <= f64::EPSILON * s.max(1e-300) * 4.0
        };
        if tiny(h, p) {
            h[p * m + (p - 1)] = C::new(0.0, 0.0);
            p -= 1;
            continue;
        }
        // find the start of the active unreduced block
        let mut qstart = p;
        while qstart > 0 && !tiny(h, qstart) {
            qstart -= 1;
        }
        if qstart > 0 {
            h[qstart * m + (qstart - 1)] = C::new(0.0, 0.0);
        }

        // Wilkinson shift from the trailing 2x2 of the block
        let (a, b, c, d) = (
            at(h, p - 1, p - 1),
            at(h, p - 1, p),
            at(h, p, p - 1),
            at(h, p, p),
        );
        let tr2 = (a + d) * 0.5;
        let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
        let e1 = tr2 + disc;
        let e2 = tr2 - disc;
        let mu = if (e1 - d).norm() <= (e2 - d).norm() { e1 } else { e2 };

        // one implicit single-shift sweep (bulge chase) on [qstart..=p]
        for k in qstart..p {
            let (x, z) = if k == qstart {
                (at(h, qstart, qstart) - mu, at(h, qstart + 1, qstart))
            } else {
                (at(h, k, k - 1), at(h, k + 1, k - 1))
            };
            let (cc, ss) = givens(x, z);
            // similarity: rows (k, k+1) ...
            for j in k.saturating_sub(1)..m {
                let hk = h[k * m + j];
                let hk1 = h[(k + 1) * m + j];
                h[k * m + j] = hk * cc + hk1 * ss;
                h[(k + 1) * m + j] = -hk * ss.conj() + hk1 * cc;
            }
            // ... then columns (k, k+1), which pushes the bulge one row down
            let row_hi = ((k + 2).min(p)) + 1;
            for i in 0..row_hi {
                let hik = h[i * m + k];
                let hik1 = h[i * m + k + 1];
                h[i * m + k] = hik * cc + hik1 * ss.conj();
                h[i * m + k + 1] = -hik * ss + hik1 * cc;
            }
            for i in 0..m {
                let qik = q[i * m + k];
                let qik1 = q[i * m + k + 1];
                q[i * m + k] = qik * cc + qik1 * ss.conj();
                q[i * m + k + 1] = -qik * ss + qik1 * cc;
            }
            if k > qstart {
                // the chased bulge entry is annihilated exactly
                h[(k + 1) * m + (k - 1)] = C::new(0.0, 0.0);
            }
        }
    }
}

/// Eigenvector of the triangular Schur factor for eigenvalue k, rotated back
/// through Q and normalized.
fn eigenvector(t: &[C], q: &[C], m: usize, k: usize) -> Vec<C> {
    let at = |a: &[C], i: usize, j: usize| a[i * m + j];
    let lambda = at(t, k, k);
    let mut y = vec![C::new(0.0, 0.0); m];
    y[k] = C::new(1.0, 0.0);
    let scale: f64 = (0..m).map(|i| at(t, i, i).norm()).fold(0.0, f64::max).max(1e-300);
    for i in (0..k).rev() {
        let mut s = C::new(0.0, 0.0);
        for j in i + 1..=k {
            s += at(t, i, j) * y[j];
        }
        let mut denom = at(t, i, i) - lambda;
        if denom.norm() < 1e-14 * scale {
            denom = C::new(1e-14 * scale, 0.0);
        }
        y[i] = -s / denom;
    }
    let mut v = vec![C::new(0.0, 0.0); m];
    for i in 0..m {
        let mut s = C::new(0.0, 0.0);
        for j in 0..=k {
            s += at(q, i, j) * y[j];
        }
        v[i] = s;
    }
    let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        for c in &mut v {
            *c /= norm;
        }
    }
    v
}
