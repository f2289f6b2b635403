//! Operators on the truncated spin (x) boson Hilbert space.
//!
//! Conventions, used everywhere in this crate:
//! * spin basis ordering is (|e>, |g>), so `sigma_z = diag(+1, -1)`;
//! * composite operators are `spin (x) boson` Kronecker products;
//! * the boson space keeps the lowest `N` Fock states.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

/// Relative tolerance backing `hermitian_hint`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Absolute tolerance backing `unitary_hint`.
pub const UNITARY_TOL: f64 = 1e-10;

/// A dense operator tagged with its subsystem dimensions.
///
/// `dim_spin` is 1 or 2 and `dim_boson` is 1 or the Fock truncation `N`;
/// single-subsystem operators use 1 for the factor they do not touch.
#[derive(Debug, Clone)]
pub struct Operator {
    mat: CMat,
    dim_spin: usize,
    dim_boson: usize,
    hermitian_hint: bool,
    unitary_hint: bool,
}

impl Operator {
    pub fn new(mat: CMat, dim_spin: usize, dim_boson: usize) -> Result<Self> {
        let d = dim_spin * dim_boson;
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, expected {}x{} (spin {} x boson {})",
                mat.nrows(),
                mat.ncols(),
                d,
                d,
                dim_spin,
                dim_boson
            )));
        }
        Ok(Self {
            mat,
            dim_spin,
            dim_boson,
            hermitian_hint: false,
            unitary_hint: false,
        })
    }

    /// Construct with the Hermitian hint set; the hint is verified.
    pub fn hermitian(mat: CMat, dim_spin: usize, dim_boson: usize) -> Result<Self> {
        let mut op = Self::new(mat, dim_spin, dim_boson)?;
        let defect = linalg::hermiticity_defect(&op.mat);
        let scale = linalg::max_abs(&op.mat).max(1e-300);
        if defect > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(defect));
        }
        op.hermitian_hint = true;
        Ok(op)
    }

    /// Construct with the unitary hint set; the hint is verified.
    pub fn unitary(mat: CMat, dim_spin: usize, dim_boson: usize) -> Result<Self> {
        let mut op = Self::new(mat, dim_spin, dim_boson)?;
        let utu = linalg::matmul(&linalg::dagger(&op.mat), &op.mat);
        let defect = linalg::max_abs_diff(&utu, &linalg::identity(op.dim()));
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        op.unitary_hint = true;
        Ok(op)
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.dim_spin * self.dim_boson
    }

    pub fn dim_spin(&self) -> usize {
        self.dim_spin
    }

    pub fn dim_boson(&self) -> usize {
        self.dim_boson
    }

    pub fn hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn unitary_hint(&self) -> bool {
        self.unitary_hint
    }

    pub fn dagger(&self) -> Operator {
        Operator {
            mat: linalg::dagger(&self.mat),
            dim_spin: self.dim_spin,
            dim_boson: self.dim_boson,
            hermitian_hint: self.hermitian_hint,
            unitary_hint: self.unitary_hint,
        }
    }

    pub fn dot(&self, rhs: &Operator) -> Result<Operator> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch(format!(
                "product of {}-dim and {}-dim operators",
                self.dim(),
                rhs.dim()
            )));
        }
        Ok(Operator {
            mat: linalg::matmul(&self.mat, &rhs.mat),
            dim_spin: self.dim_spin.max(rhs.dim_spin),
            dim_boson: self.dim_boson.max(rhs.dim_boson),
            hermitian_hint: false,
            unitary_hint: self.unitary_hint && rhs.unitary_hint,
        })
    }

    pub fn add(&self, rhs: &Operator) -> Result<Operator> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch("operator sum".into()));
        }
        Ok(Operator {
            mat: &self.mat + &rhs.mat,
            dim_spin: self.dim_spin.max(rhs.dim_spin),
            dim_boson: self.dim_boson.max(rhs.dim_boson),
            hermitian_hint: self.hermitian_hint && rhs.hermitian_hint,
            unitary_hint: false,
        })
    }

    pub fn scaled(&self, z: C64) -> Operator {
        Operator {
            mat: self.mat.mapv(|x| x * z),
            dim_spin: self.dim_spin,
            dim_boson: self.dim_boson,
            hermitian_hint: self.hermitian_hint && z.im == 0.0,
            unitary_hint: self.unitary_hint && (z.norm() - 1.0).abs() < 1e-15,
        }
    }

    /// Matrix exponential; sets the unitary hint when the generator is
    /// anti-Hermitian.
    pub fn expm(&self) -> Result<Operator> {
        let mat = linalg::expm(&self.mat)?;
        let anti = linalg::is_anti_hermitian(&self.mat, 1e-12);
        Ok(Operator {
            mat,
            dim_spin: self.dim_spin,
            dim_boson: self.dim_boson,
            hermitian_hint: false,
            unitary_hint: anti,
        })
    }

    /// Hermitian PSD square root. Eigenvalues in `[-neg_tol, 0)` are clipped
    /// to zero; anything below `-neg_tol` is an error.
    pub fn herm_sqrt_tol(&self, neg_tol: f64) -> Result<Operator> {
        let defect = linalg::hermiticity_defect(&self.mat);
        let scale = linalg::max_abs(&self.mat).max(1e-300);
        if defect > 1e-10 * scale {
            return Err(Error::NotHermitian(defect));
        }
        let eig = linalg::eigh(&self.mat)?;
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min < -neg_tol {
            return Err(Error::NotPsd(min));
        }
        let mat = linalg::from_eig(&eig, |x| C64::new(x.max(0.0).sqrt(), 0.0));
        Operator::hermitian(mat, self.dim_spin, self.dim_boson)
    }

    /// Hermitian PSD square root with the default negative-eigenvalue
    /// tolerance of 1e-8.
    pub fn herm_sqrt(&self) -> Result<Operator> {
        self.herm_sqrt_tol(1e-8)
    }
}

/// Annihilation operator `a` on the lowest `n` Fock states:
/// `<m| a |m+1> = sqrt(m+1)`.
pub fn fock_annihilate(n: usize) -> Result<Operator> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "Fock truncation must be >= 2, got {n}"
        )));
    }
    let mut m = CMat::zeros((n, n));
    for k in 0..(n - 1) {
        m[[k, k + 1]] = C64::new(((k + 1) as f64).sqrt(), 0.0);
    }
    Operator::new(m, 1, n)
}

/// Number operator `a† a`.
pub fn fock_number(n: usize) -> Result<Operator> {
    if n < 2 {
        return Err(Error::InvalidDimension(format!(
            "Fock truncation must be >= 2, got {n}"
        )));
    }
    let mut m = CMat::zeros((n, n));
    for k in 0..n {
        m[[k, k]] = C64::new(k as f64, 0.0);
    }
    Operator::hermitian(m, 1, n)
}

pub fn boson_identity(n: usize) -> Operator {
    Operator::unitary(linalg::identity(n), 1, n).expect("identity is unitary")
}

pub fn spin_identity() -> Operator {
    Operator::unitary(linalg::identity(2), 2, 1).expect("identity is unitary")
}

fn spin_op(entries: [[C64; 2]; 2]) -> CMat {
    let mut m = CMat::zeros((2, 2));
    for i in 0..2 {
        for j in 0..2 {
            m[[i, j]] = entries[i][j];
        }
    }
    m
}

pub fn sigma_x() -> Operator {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    Operator::hermitian(spin_op([[z, o], [o, z]]), 2, 1).unwrap()
}

pub fn sigma_y() -> Operator {
    let z = C64::new(0.0, 0.0);
    let i = C64::new(0.0, 1.0);
    Operator::hermitian(spin_op([[z, -i], [i, z]]), 2, 1).unwrap()
}

pub fn sigma_z() -> Operator {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    Operator::hermitian(spin_op([[o, z], [z, -o]]), 2, 1).unwrap()
}

/// `sigma^+ = |e><g|`.
pub fn sigma_plus() -> Operator {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    Operator::new(spin_op([[z, o], [z, z]]), 2, 1).unwrap()
}

/// `sigma^- = |g><e|`.
pub fn sigma_minus() -> Operator {
    let z = C64::new(0.0, 0.0);
    let o = C64::new(1.0, 0.0);
    Operator::new(spin_op([[z, z], [o, z]]), 2, 1).unwrap()
}

/// Displacement operator `D(alpha) = exp(alpha a† - alpha* a)` on the
/// truncated space.
pub fn displacement(alpha: C64, n: usize) -> Result<Operator> {
    let a = fock_annihilate(n)?;
    let gen = {
        let ad = linalg::dagger(a.mat());
        let mut g = ad.mapv(|z| z * alpha);
        g.zip_mut_with(a.mat(), |x, &y| *x -= alpha.conj() * y);
        g
    };
    let mat = linalg::expm(&gen)?;
    Operator::unitary(mat, 1, n)
}

/// Squeezing operator `exp((z/2)((a†)² - a²))` for real `z`.
///
/// Fails when the truncation cannot hold the squeezed vacuum: the population
/// leaked above level `n - 4` must stay below 1e-6.
pub fn squeeze(z: f64, n: usize) -> Result<Operator> {
    if n < 4 {
        return Err(Error::InvalidDimension(format!(
            "squeeze needs n >= 4, got {n}"
        )));
    }
    let a = fock_annihilate(n)?;
    let ad = linalg::dagger(a.mat());
    let a2 = linalg::matmul(a.mat(), a.mat());
    let ad2 = linalg::matmul(&ad, &ad);
    let mut g = ad2.mapv(|x| x * C64::new(z / 2.0, 0.0));
    g.zip_mut_with(&a2, |x, &y| *x -= C64::new(z / 2.0, 0.0) * y);
    let mat = linalg::expm(&g)?;
    let leak: f64 = (n.saturating_sub(4)..n).map(|m| mat[[m, 0]].norm_sqr()).sum();
    if leak >= 1e-6 {
        return Err(Error::TruncationTooSmall(format!(
            "squeeze(z = {z}) leaks {leak:.2e} of the vacuum above level {}",
            n - 4
        )));
    }
    Operator::unitary(mat, 1, n)
}

/// `spin (x) boson` Kronecker embedding.
pub fn embed(spin_part: &Operator, boson_part: &Operator) -> Result<Operator> {
    if spin_part.dim_spin() != 2 || spin_part.dim_boson() != 1 {
        return Err(Error::DimensionMismatch(
            "embed: first argument must be a bare 2x2 spin operator".into(),
        ));
    }
    if boson_part.dim_spin() != 1 {
        return Err(Error::DimensionMismatch(
            "embed: second argument must be a bare boson operator".into(),
        ));
    }
    let mat = linalg::kron(spin_part.mat(), boson_part.mat());
    let mut op = Operator::new(mat, 2, boson_part.dim_boson())?;
    op.hermitian_hint = spin_part.hermitian_hint && boson_part.hermitian_hint;
    op.unitary_hint = spin_part.unitary_hint && boson_part.unitary_hint;
    Ok(op)
}

/// `|k><j|` on a `d`-dimensional space.
pub fn ketbra(k: usize, j: usize, d: usize) -> CMat {
    let mut m = CMat::zeros((d, d));
    m[[k, j]] = C64::new(1.0, 0.0);
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, identity, matmul, max_abs_diff};

    #[test]
    fn smallest_ladder() {
        let a = fock_annihilate(2).unwrap();
        assert_eq!(a.mat()[[0, 1]], C64::new(1.0, 0.0));
        assert_eq!(a.mat()[[0, 0]], C64::new(0.0, 0.0));
        assert_eq!(a.mat()[[1, 0]], C64::new(0.0, 0.0));
        assert_eq!(a.mat()[[1, 1]], C64::new(0.0, 0.0));
        assert!(fock_annihilate(1).is_err());
    }

    #[test]
    fn number_operator_from_ladder() {
        let n = 11;
        let a = fock_annihilate(n).unwrap();
        let num = matmul(&dagger(a.mat()), a.mat());
        for m in 0..n {
            assert!((num[[m, m]] - C64::new(m as f64, 0.0)).norm() <= 4.0 * f64::EPSILON * n as f64);
        }
        assert!(max_abs_diff(&num, fock_number(n).unwrap().mat()) <= 4.0 * f64::EPSILON * n as f64);
    }

    #[test]
    fn truncation_edge_commutator() {
        // [a, a†] = I - N |N-1><N-1| exactly on the truncated space
        let n = 9;
        let a = fock_annihilate(n).unwrap();
        let ad = dagger(a.mat());
        let comm = &matmul(a.mat(), &ad) - &matmul(&ad, a.mat());
        let mut expected = identity(n);
        expected[[n - 1, n - 1]] = C64::new(1.0 - n as f64, 0.0);
        assert!(max_abs_diff(&comm, &expected) <= 4.0 * f64::EPSILON * n as f64);
    }

    #[test]
    fn raising_action_exact() {
        for n in [2usize, 5, 17] {
            let a = fock_annihilate(n).unwrap();
            let ad = dagger(a.mat());
            for m in 0..(n - 1) {
                assert_eq!(ad[[m + 1, m]], C64::new(((m + 1) as f64).sqrt(), 0.0));
            }
        }
    }

    #[test]
    fn displacement_identity_at_zero() {
        let d = displacement(C64::new(0.0, 0.0), 8).unwrap();
        assert!(max_abs_diff(d.mat(), &identity(8)) <= 1e-14);
        assert!(d.unitary_hint());
    }

    #[test]
    fn displacement_vacuum_overlap() {
        // |<0|D(alpha)|0>| = exp(-|alpha|^2/2) for |alpha|^2 <= N/4
        let n = 24;
        for alpha in [C64::new(0.7, 0.0), C64::new(0.0, 1.1), C64::new(-0.9, 1.2)] {
            let d = displacement(alpha, n).unwrap();
            let expected = (-alpha.norm_sqr() / 2.0).exp();
            assert!((d.mat()[[0, 0]].norm() - expected).abs() <= 1e-8);
        }
    }

    #[test]
    fn displacement_inverse_interior() {
        let n = 24;
        let alpha = C64::new(0.4, -1.0);
        let d = displacement(alpha, n).unwrap();
        let dinv = displacement(-alpha, n).unwrap();
        let prod = matmul(d.mat(), dinv.mat());
        let keep = n - (4.0 * alpha.norm_sqr()).ceil() as usize;
        let mut worst = 0.0f64;
        for i in 0..keep {
            for j in 0..keep {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[[i, j]] - C64::new(expect, 0.0)).norm());
            }
        }
        assert!(worst <= 1e-9, "interior deviation {worst:.2e}");
    }

    #[test]
    fn squeeze_bogoliubov_scaling() {
        // with S = exp((z/2)(a†² - a²)): a -> a cosh z + a† sinh z, so the
        // position quadrature variance scales as e^{2z} and the momentum one
        // as e^{-2z}; checked by brute-force matrix products
        let n = 40;
        let z = 0.3;
        let s = squeeze(z, n).unwrap();
        let a = fock_annihilate(n).unwrap();
        let x = &dagger(a.mat()) + a.mat();
        let p = (a.mat() - &dagger(a.mat())).mapv(|v| v * C64::new(0.0, 1.0));
        for (quad, scale) in [(x, (2.0 * z).exp()), (p, (-2.0 * z).exp())] {
            let q2 = matmul(&quad, &quad);
            let inner = matmul(&dagger(s.mat()), &matmul(&q2, s.mat()));
            let got = inner[[0, 0]].re;
            let expected = scale * q2[[0, 0]].re;
            assert!(
                (got - expected).abs() <= 1e-8 * expected.abs(),
                "{got} vs {expected}"
            );
        }
    }

    #[test]
    fn squeeze_inverse_and_identity() {
        let n = 40;
        assert!(max_abs_diff(squeeze(0.0, n).unwrap().mat(), &identity(n)) <= 1e-13);
        let s = squeeze(0.25, n).unwrap();
        let si = squeeze(-0.25, n).unwrap();
        let prod = matmul(s.mat(), si.mat());
        let keep = n - 8;
        let mut worst = 0.0f64;
        for i in 0..keep {
            for j in 0..keep {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod[[i, j]] - C64::new(expect, 0.0)).norm());
            }
        }
        assert!(worst <= 1e-9);
    }

    #[test]
    fn squeeze_truncation_error() {
        assert!(matches!(
            squeeze(1.4, 8),
            Err(Error::TruncationTooSmall(_))
        ));
    }

    #[test]
    fn embed_identities_and_mixed_product() {
        let n = 6;
        let lhs = embed(&spin_identity(), &boson_identity(n)).unwrap();
        assert!(max_abs_diff(lhs.mat(), &identity(2 * n)) == 0.0);
        let a = fock_annihilate(n).unwrap();
        let sz_a = embed(&sigma_z(), &a).unwrap();
        let sz_i = embed(&sigma_z(), &boson_identity(n)).unwrap();
        let i_a = embed(&spin_identity(), &a).unwrap();
        let prod = sz_i.dot(&i_a).unwrap();
        assert!(max_abs_diff(prod.mat(), sz_a.mat()) == 0.0);
        let num = fock_number(n).unwrap();
        let tr = crate::linalg::trace(embed(&sigma_z(), &num).unwrap().mat());
        assert!(tr.norm() <= 1e-14);
    }

    #[test]
    fn herm_sqrt_examples() {
        let id = Operator::hermitian(identity(4), 2, 2).unwrap();
        assert!(max_abs_diff(id.herm_sqrt().unwrap().mat(), &identity(4)) <= 1e-14);
        let mut m = CMat::zeros((2, 2));
        m[[0, 0]] = C64::new(4.0, 0.0);
        m[[1, 1]] = C64::new(9.0, 0.0);
        let op = Operator::hermitian(m, 2, 1).unwrap();
        let r = op.herm_sqrt().unwrap();
        assert_eq!(r.mat()[[0, 0]], C64::new(2.0, 0.0));
        assert_eq!(r.mat()[[1, 1]], C64::new(3.0, 0.0));
        let mut neg = CMat::zeros((2, 2));
        neg[[0, 0]] = C64::new(-1.0, 0.0);
        neg[[1, 1]] = C64::new(1.0, 0.0);
        let op = Operator::hermitian(neg, 2, 1).unwrap();
        assert!(matches!(op.herm_sqrt(), Err(Error::NotPsd(_))));
    }

    #[test]
    fn hint_verification() {
        let mut m = identity(3);
        m[[0, 1]] = C64::new(0.1, 0.0);
        assert!(Operator::hermitian(m.clone(), 1, 3).is_err());
        assert!(Operator::unitary(m, 1, 3).is_err());
    }
}
