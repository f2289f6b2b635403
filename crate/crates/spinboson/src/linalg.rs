//! Dense complex linear-algebra kernels: products, adjoints, Hermitian
//! eigendecomposition, matrix exponentials and an LU solver.
//!
//! Everything here is self-contained (no BLAS/LAPACK linkage). Dimensions in
//! this crate stay below ~200, where a cyclic Jacobi eigensolver is accurate
//! and fast enough.

use ndarray::{linalg::general_mat_mul, Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    let mut out = CMat::zeros((a.ncols(), a.nrows()));
    for ((i, j), v) in a.indexed_iter() {
        out[[j, i]] = v.conj();
    }
    out
}

/// `a @ b` into a fresh matrix.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    let mut c = CMat::zeros((a.nrows(), b.ncols()));
    general_mat_mul(ONE, a, b, ZERO, &mut c);
    c
}

/// `c = alpha * a @ b` with no allocation.
pub fn matmul_into(alpha: C64, a: &CMat, b: &CMat, c: &mut CMat) {
    general_mat_mul(alpha, a, b, ZERO, c);
}

/// `c += alpha * a @ b`.
pub fn matmul_acc(alpha: C64, a: &CMat, b: &CMat, c: &mut CMat) {
    general_mat_mul(alpha, a, b, ONE, c);
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    ndarray::linalg::kron(a, b)
}

pub fn identity(d: usize) -> CMat {
    CMat::eye(d)
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(a: &CMat) -> C64 {
    a.diag().iter().sum()
}

/// max |A - A†|, absolute.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let d = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            let e = (a[[i, j]] - a[[j, i]].conj()).norm();
            if e > worst {
                worst = e;
            }
        }
    }
    worst
}

pub fn is_hermitian(a: &CMat, rel_tol: f64) -> bool {
    let scale = max_abs(a);
    hermiticity_defect(a) <= rel_tol * scale.max(1e-300)
}

pub fn is_anti_hermitian(a: &CMat, rel_tol: f64) -> bool {
    let scale = max_abs(a).max(1e-300);
    let d = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in i..d {
            let e = (a[[i, j]] + a[[j, i]].conj()).norm();
            if e > worst {
                worst = e;
            }
        }
    }
    worst <= rel_tol * scale
}

/// Eigendecomposition of a Hermitian matrix.
pub struct Eig {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: CMat,
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// Accurate to ~1e-14 relative; the input is symmetrized first so callers may
/// pass matrices that are Hermitian only up to roundoff. Eigenvector phases
/// are normalized (largest component real positive) so results are
/// deterministic.
pub fn eigh(a: &CMat) -> Result<Eig> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "eigh needs a square matrix, got {}x{}",
            d,
            a.ncols()
        )));
    }
    let mut m = CMat::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            m[[i, j]] = 0.5 * (a[[i, j]] + a[[j, i]].conj());
        }
    }
    let mut v = identity(d);
    let fro = frobenius(&m).max(1e-300);
    let tol = 1e-15 * fro;
    let max_sweeps = 60;
    let mut converged = false;
    for _sweep in 0..max_sweeps {
        let mut off = 0.0f64;
        for p in 0..d {
            for q in (p + 1)..d {
                off += m[[p, q]].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= tol {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[[p, q]];
                let r = apq.norm();
                if r <= tol / (d as f64) {
                    continue;
                }
                let w = apq / r; // unit phase
                let app = m[[p, p]].re;
                let aqq = m[[q, q]].re;
                // zeroing condition: t² - 2 tau t - 1 = 0, small root
                let tau = (aqq - app) / (2.0 * r);
                let hyp = (1.0 + tau * tau).sqrt();
                let t = if tau >= 0.0 {
                    -1.0 / (tau + hyp)
                } else {
                    1.0 / (-tau + hyp)
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // columns: col_p <- c col_p + s w~ col_q ; col_q <- -s w col_p + c col_q
                let (sw, swc) = (s * w, s * w.conj());
                for i in 0..d {
                    let mp = m[[i, p]];
                    let mq = m[[i, q]];
                    m[[i, p]] = c * mp + swc * mq;
                    m[[i, q]] = -sw * mp + c * mq;
                }
                // rows: row_p <- c row_p + s w row_q ; row_q <- -s w~ row_p + c row_q
                for j in 0..d {
                    let mp = m[[p, j]];
                    let mq = m[[q, j]];
                    m[[p, j]] = c * mp + sw * mq;
                    m[[q, j]] = -swc * mp + c * mq;
                }
                for i in 0..d {
                    let vp = v[[i, p]];
                    let vq = v[[i, q]];
                    v[[i, p]] = c * vp + swc * vq;
                    v[[i, q]] = -sw * vp + c * vq;
                }
            }
        }
    }
    if !converged {
        // one last check: quadratic convergence usually lands well before 60
        let mut off = 0.0f64;
        for p in 0..d {
            for q in (p + 1)..d {
                off += m[[p, q]].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() > tol * 10.0 {
            return Err(Error::EigNoConvergence(max_sweeps));
        }
    }
    let mut idx: Vec<usize> = (0..d).collect();
    let vals: Vec<f64> = (0..d).map(|i| m[[i, i]].re).collect();
    idx.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap());
    let mut values = Vec::with_capacity(d);
    let mut vectors = CMat::zeros((d, d));
    for (col, &i) in idx.iter().enumerate() {
        values.push(vals[i]);
        // deterministic phase: largest-magnitude component real positive
        let mut best = 0usize;
        let mut best_n = -1.0f64;
        for row in 0..d {
            let nrm = v[[row, i]].norm();
            if nrm > best_n {
                best_n = nrm;
                best = row;
            }
        }
        let phase = if best_n > 0.0 {
            v[[best, i]].conj() / best_n
        } else {
            ONE
        };
        for row in 0..d {
            vectors[[row, col]] = v[[row, i]] * phase;
        }
    }
    Ok(Eig { values, vectors })
}

/// `V f(Λ) V†` for a Hermitian decomposition.
pub fn from_eig(eig: &Eig, f: impl Fn(f64) -> C64) -> CMat {
    let d = eig.values.len();
    let mut scaled = eig.vectors.clone();
    for (col, &lam) in eig.values.iter().enumerate() {
        let flam = f(lam);
        for row in 0..d {
            scaled[[row, col]] *= flam;
        }
    }
    matmul(&scaled, &dagger(&eig.vectors))
}

/// Matrix exponential.
///
/// (Anti-)Hermitian generators go through the eigendecomposition; anything
/// else falls back to Pade scaling-and-squaring. All physical generators in
/// this crate are anti-Hermitian, so the fallback is rarely exercised.
pub fn expm(a: &CMat) -> Result<CMat> {
    if is_hermitian(a, 1e-12) {
        let eig = eigh(a)?;
        Ok(from_eig(&eig, |x| C64::new(x.exp(), 0.0)))
    } else if is_anti_hermitian(a, 1e-12) {
        // a = iH with H Hermitian
        let h = a.mapv(|z| z * (-I));
        let eig = eigh(&h)?;
        Ok(from_eig(&eig, |x| C64::new(0.0, x).exp()))
    } else {
        expm_pade(a)
    }
}

/// Degree-13 Pade approximant with scaling and squaring (Higham 2005).
pub fn expm_pade(a: &CMat) -> Result<CMat> {
    const THETA13: f64 = 5.371920351148152;
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let d = a.nrows();
    // 1-norm
    let norm1 = (0..d)
        .map(|j| (0..d).map(|i| a[[i, j]].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scale = C64::new(0.5f64.powi(s), 0.0);
    let asc = a.mapv(|z| z * scale);
    let a2 = matmul(&asc, &asc);
    let a4 = matmul(&a2, &a2);
    let a6 = matmul(&a2, &a4);
    let eye = identity(d);
    let mut inner = a6.mapv(|z| z * B[13]);
    inner.zip_mut_with(&a4, |x, &y| *x += y * B[11]);
    inner.zip_mut_with(&a2, |x, &y| *x += y * B[9]);
    let mut u = matmul(&a6, &inner);
    u.zip_mut_with(&a6, |x, &y| *x += y * B[7]);
    u.zip_mut_with(&a4, |x, &y| *x += y * B[5]);
    u.zip_mut_with(&a2, |x, &y| *x += y * B[3]);
    u.zip_mut_with(&eye, |x, &y| *x += y * B[1]);
    let u = matmul(&asc, &u);
    let mut inner = a6.mapv(|z| z * B[12]);
    inner.zip_mut_with(&a4, |x, &y| *x += y * B[10]);
    inner.zip_mut_with(&a2, |x, &y| *x += y * B[8]);
    let mut v = matmul(&a6, &inner);
    v.zip_mut_with(&a6, |x, &y| *x += y * B[6]);
    v.zip_mut_with(&a4, |x, &y| *x += y * B[4]);
    v.zip_mut_with(&a2, |x, &y| *x += y * B[2]);
    v.zip_mut_with(&eye, |x, &y| *x += y * B[0]);
    // (V - U) X = (V + U)
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut x = lu_solve(&lhs, &rhs)?;
    for _ in 0..s {
        x = matmul(&x, &x);
    }
    Ok(x)
}

/// Solve `A X = B` by LU with partial pivoting.
pub fn lu_solve(a: &CMat, b: &CMat) -> Result<CMat> {
    let d = a.nrows();
    if a.ncols() != d || b.nrows() != d {
        return Err(Error::DimensionMismatch("lu_solve shapes".into()));
    }
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..d).collect();
    for k in 0..d {
        let mut piv = k;
        let mut piv_val = lu[[k, k]].norm();
        for i in (k + 1)..d {
            let v = lu[[i, k]].norm();
            if v > piv_val {
                piv_val = v;
                piv = i;
            }
        }
        if piv_val == 0.0 {
            return Err(Error::InvalidParams("singular matrix in lu_solve".into()));
        }
        if piv != k {
            for j in 0..d {
                let tmp = lu[[k, j]];
                lu[[k, j]] = lu[[piv, j]];
                lu[[piv, j]] = tmp;
            }
            perm.swap(k, piv);
        }
        let pivot = lu[[k, k]];
        for i in (k + 1)..d {
            let f = lu[[i, k]] / pivot;
            lu[[i, k]] = f;
            for j in (k + 1)..d {
                let sub = f * lu[[k, j]];
                lu[[i, j]] -= sub;
            }
        }
    }
    let nrhs = b.ncols();
    let mut x = CMat::zeros((d, nrhs));
    for j in 0..nrhs {
        for i in 0..d {
            x[[i, j]] = b[[perm[i], j]];
        }
    }
    // forward
    for k in 0..d {
        for i in (k + 1)..d {
            let f = lu[[i, k]];
            for j in 0..nrhs {
                let sub = f * x[[k, j]];
                x[[i, j]] -= sub;
            }
        }
    }
    // backward
    for k in (0..d).rev() {
        let pivot = lu[[k, k]];
        for j in 0..nrhs {
            x[[k, j]] /= pivot;
        }
        for i in 0..k {
            let f = lu[[i, k]];
            for j in 0..nrhs {
                let sub = f * x[[k, j]];
                x[[i, j]] -= sub;
            }
        }
    }
    Ok(x)
}
