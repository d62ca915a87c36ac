//! Finite-difference assembly of the coupled transverse-H eigenproblem.
//!
//! Unknowns are the transverse magnetic-field components (Hx, Hy) collocated
//! at cell centers; the eigenvalue is beta^2. With the solver-frame
//! permittivities `ex` (E along horizontal x), `ey` (E along vertical y) and
//! `ez` (E along propagation), the coupled equations read
//!
//! ```text
//! b^2 Hx = dxx Hx + ey dy (1/ez dy Hx) + ey k0^2 Hx
//!        + dxdy Hy - ey dy (1/ez dx Hy)
//! b^2 Hy = dyy Hy + ex dx (1/ez dx Hy) + ex k0^2 Hy
//!        + dydx Hx - ex dx (1/ez dy Hx)
//! ```
//!
//! which reduces to the exact scalar limits for slab TE/TM and has no cross
//! coupling in homogeneous isotropic regions. The window boundary is a
//! perfect electric conductor: the normal H component vanishes there while
//! the tangential component has zero normal derivative, implemented with
//! mirror ghost cells (antisymmetric / symmetric respectively).
//!
//! Cell tensors map onto the solver frame as `ex = xx`, `ey = zz`
//! (vertical), `ez = yy` (propagation).

use crate::material::PermittivityMap;

/// Compressed sparse rows with summed duplicate entries.
pub(crate) struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(n: usize, mut trips: Vec<(usize, usize, f64)>) -> Csr {
        trips.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col: Vec<usize> = Vec::with_capacity(trips.len());
        let mut val: Vec<f64> = Vec::with_capacity(trips.len());
        let mut prev: Option<(usize, usize)> = None;
        for (r, c, v) in trips {
            if prev == Some((r, c)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(c);
                val.push(v);
                row_ptr[r + 1] += 1;
                prev = Some((r, c));
            }
        }
        for k in 0..n {
            row_ptr[k + 1] += row_ptr[k];
        }
        Csr { n, row_ptr, col, val }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[r] = s;
        }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }
}

const HX: usize = 0;
const HY: usize = 1;

/// Mirror ghost handling: returns the folded index and sign for a neighbor
/// offset of -1 or +1 steps outside `[0, n)`.
#[inline]
fn reflect(i: isize, n: usize, antisymmetric: bool) -> (usize, f64) {
    let sign = if antisymmetric { -1.0 } else { 1.0 };
    if i < 0 {
        (0, sign)
    } else if i as usize >= n {
        (n - 1, sign)
    } else {
        (i as usize, 1.0)
    }
}

pub(crate) fn assemble(map: &PermittivityMap, k0_per_um: f64) -> Csr {
    let g = &map.grid;
    let (nx, ny) = (g.nx, g.ny);
    let n = 2 * nx * ny;
    let dx = g.dx_um;
    let dy = g.dy_um;
    let idx2 = 1.0 / (dx * dx);
    let idy2 = 1.0 / (dy * dy);
    let ixy = 1.0 / (4.0 * dx * dy);
    let k0sq = k0_per_um * k0_per_um;

    // solver-frame permittivities per cell
    let ex = |i: usize, j: usize| map.cell(i, j).xx;
    let ey = |i: usize, j: usize| map.cell(i, j).zz;
    let ez = |i: usize, j: usize| map.cell(i, j).yy;

    let id = |i: usize, j: usize, comp: usize| (j * nx + i) * 2 + comp;

    let mut trips: Vec<(usize, usize, f64)> = Vec::with_capacity(n * 12);
    // Hx: antisymmetric across x walls, symmetric across y walls; Hy mirrored
    let hx_par = (true, false);
    let hy_par = (false, true);

    let add = |trips: &mut Vec<(usize, usize, f64)>,
                   row: usize,
                   i: isize,
                   j: isize,
                   comp: usize,
                   coeff: f64| {
        if coeff == 0.0 {
            return;
        }
        let (px, py) = if comp == HX { hx_par } else { hy_par };
        let (iu, sx) = reflect(i, nx, px);
        let (ju, sy) = reflect(j, ny, py);
        trips.push((row, id(iu, ju, comp), coeff * sx * sy));
    };

    for j in 0..ny {
        for i in 0..nx {
            let (fi, fj) = (i as isize, j as isize);
            let e_v = ey(i, j);
            let e_h = ex(i, j);
            // interface-harmonic weights for the 1/ez fluxes
            let wyp = if j + 1 < ny { 2.0 / (ez(i, j) + ez(i, j + 1)) } else { 0.0 };
            let wym = if j > 0 { 2.0 / (ez(i, j) + ez(i, j - 1)) } else { 0.0 };
            let wxp = if i + 1 < nx { 2.0 / (ez(i, j) + ez(i + 1, j)) } else { 0.0 };
            let wxm = if i > 0 { 2.0 / (ez(i, j) + ez(i - 1, j)) } else { 0.0 };

            // ---- Hx row ----
            let r = id(i, j, HX);
            // dxx Hx (Dirichlet fold at x walls)
            add(&mut trips, r, fi - 1, fj, HX, idx2);
            add(&mut trips, r, fi + 1, fj, HX, idx2);
            add(&mut trips, r, fi, fj, HX, -2.0 * idx2);
            // ey dy (1/ez dy Hx): zero-flux at y walls
            add(&mut trips, r, fi, fj + 1, HX, e_v * wyp * idy2);
            add(&mut trips, r, fi, fj - 1, HX, e_v * wym * idy2);
            add(&mut trips, r, fi, fj, HX, -e_v * (wyp + wym) * idy2);
            // ey k0^2
            add(&mut trips, r, fi, fj, HX, e_v * k0sq);
            // dxdy Hy
            add(&mut trips, r, fi + 1, fj + 1, HY, ixy);
            add(&mut trips, r, fi - 1, fj + 1, HY, -ixy);
            add(&mut trips, r, fi + 1, fj - 1, HY, -ixy);
            add(&mut trips, r, fi - 1, fj - 1, HY, ixy);
            // - ey dy (1/ez dx Hy), flux form at j +- 1/2
            let fp = e_v * wyp * ixy;
            let fm = e_v * wym * ixy;
            add(&mut trips, r, fi + 1, fj + 1, HY, -fp);
            add(&mut trips, r, fi + 1, fj, HY, -fp + fm);
            add(&mut trips, r, fi - 1, fj + 1, HY, fp);
            add(&mut trips, r, fi - 1, fj, HY, fp - fm);
            add(&mut trips, r, fi + 1, fj - 1, HY, fm);
            add(&mut trips, r, fi - 1, fj - 1, HY, -fm);

            // ---- Hy row ----
            let r = id(i, j, HY);
            // dyy Hy (Dirichlet fold at y walls)
            add(&mut trips, r, fi, fj - 1, HY, idy2);
            add(&mut trips, r, fi, fj + 1, HY, idy2);
            add(&mut trips, r, fi, fj, HY, -2.0 * idy2);
            // ex dx (1/ez dx Hy): zero-flux at x walls
            add(&mut trips, r, fi + 1, fj, HY, e_h * wxp * idx2);
            add(&mut trips, r, fi - 1, fj, HY, e_h * wxm * idx2);
            add(&mut trips, r, fi, fj, HY, -e_h * (wxp + wxm) * idx2);
            // ex k0^2
            add(&mut trips, r, fi, fj, HY, e_h * k0sq);
            // dydx Hx
            add(&mut trips, r, fi + 1, fj + 1, HX, ixy);
            add(&mut trips, r, fi - 1, fj + 1, HX, -ixy);
            add(&mut trips, r, fi + 1, fj - 1, HX, -ixy);
            add(&mut trips, r, fi - 1, fj - 1, HX, ixy);
            // - ex dx (1/ez dy Hx), flux form at i +- 1/2
            let gp = e_h * wxp * ixy;
            let gm = e_h * wxm * ixy;
            add(&mut trips, r, fi + 1, fj + 1, HX, -gp);
            add(&mut trips, r, fi, fj + 1, HX, -gp + gm);
            add(&mut trips, r, fi + 1, fj - 1, HX, gp);
            add(&mut trips, r, fi, fj - 1, HX, gp - gm);
            add(&mut trips, r, fi - 1, fj + 1, HX, gm);
            add(&mut trips, r, fi - 1, fj - 1, HX, -gm);
        }
    }

    Csr::from_triplets(n, trips)
}
