//! Density matrices, canonical initial states, and the state functionals
//! (Uhlmann fidelity, purity, truncation leakage) used by every scenario.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::operator::Operator;

pub const DEFAULT_TRACE_TOL: f64 = 1e-8;
const HERM_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = 1e-8;

/// A normalized positive Hermitian operator.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    op: Operator,
    trace_tol: f64,
}

impl DensityMatrix {
    /// Validates trace (within `trace_tol`), Hermiticity (1e-10) and
    /// positivity (min eigenvalue >= -1e-8).
    pub fn new(mat: CMat, dim_spin: usize, dim_boson: usize) -> Result<Self> {
        Self::with_trace_tol(mat, dim_spin, dim_boson, DEFAULT_TRACE_TOL)
    }

    pub fn with_trace_tol(
        mat: CMat,
        dim_spin: usize,
        dim_boson: usize,
        trace_tol: f64,
    ) -> Result<Self> {
        let tr = linalg::trace(&mat);
        if (tr - C64::new(1.0, 0.0)).norm() > trace_tol {
            return Err(Error::InvalidState(format!(
                "trace {tr} deviates from 1 beyond {trace_tol:.1e}"
            )));
        }
        let defect = linalg::hermiticity_defect(&mat);
        if defect > HERM_TOL {
            return Err(Error::InvalidState(format!(
                "Hermiticity defect {defect:.2e} exceeds {HERM_TOL:.1e}"
            )));
        }
        let eig = linalg::eigh(&mat)?;
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "min eigenvalue {min:.2e} below -{POSITIVITY_TOL:.1e}"
            )));
        }
        let op = Operator::new(mat, dim_spin, dim_boson)?;
        Ok(Self { op, trace_tol })
    }

    pub fn from_pure(psi: &CVec, dim_spin: usize, dim_boson: usize) -> Result<Self> {
        let d = dim_spin * dim_boson;
        if psi.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "state vector length {} vs dimension {}",
                psi.len(),
                d
            )));
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let scale = 1.0 / norm.sqrt();
        let mut mat = CMat::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                mat[[i, j]] = psi[i] * psi[j].conj() * scale * scale;
            }
        }
        Self::new(mat, dim_spin, dim_boson)
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn mat(&self) -> &CMat {
        self.op.mat()
    }

    pub fn into_mat(self) -> CMat {
        self.op.into_mat()
    }

    pub fn dim_spin(&self) -> usize {
        self.op.dim_spin()
    }

    pub fn dim_boson(&self) -> usize {
        self.op.dim_boson()
    }

    pub fn trace_tol(&self) -> f64 {
        self.trace_tol
    }

    pub fn purity(&self) -> f64 {
        purity(self.mat())
    }
}

/// Spin basis states in the (|e>, |g>) ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpinState {
    Excited,
    Ground,
    Plus,
    Minus,
}

impl SpinState {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "e" | "excited" => Ok(Self::Excited),
            "g" | "ground" => Ok(Self::Ground),
            "+" | "plus" => Ok(Self::Plus),
            "-" | "minus" => Ok(Self::Minus),
            other => Err(Error::Config(format!("unknown spin state `{other}`"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Excited => "e",
            Self::Ground => "g",
            Self::Plus => "+",
            Self::Minus => "-",
        }
    }

    pub fn vector(&self) -> CVec {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Self::Excited => CVec::from(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            Self::Ground => CVec::from(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
            Self::Plus => CVec::from(vec![C64::new(r, 0.0), C64::new(r, 0.0)]),
            Self::Minus => CVec::from(vec![C64::new(r, 0.0), C64::new(-r, 0.0)]),
        }
    }
}

/// Fock basis vector |m> on `n` levels.
pub fn fock_vector(m: usize, n: usize) -> Result<CVec> {
    if m >= n {
        return Err(Error::InvalidDimension(format!(
            "Fock index {m} outside truncation {n}"
        )));
    }
    let mut v = CVec::zeros(n);
    v[m] = C64::new(1.0, 0.0);
    Ok(v)
}

/// Coherent state |alpha> = D(alpha)|0> as a density matrix on the boson
/// space. Requires |alpha|^2 <= n/4 so the truncated support is negligible.
pub fn coherent_state(alpha: C64, n: usize) -> Result<DensityMatrix> {
    if alpha.norm_sqr() > n as f64 / 4.0 {
        return Err(Error::TruncationTooSmall(format!(
            "coherent amplitude |alpha|^2 = {:.3} exceeds n/4 = {:.3}",
            alpha.norm_sqr(),
            n as f64 / 4.0
        )));
    }
    let d = crate::operator::displacement(alpha, n)?;
    let psi = d.mat().column(0).to_owned();
    DensityMatrix::from_pure(&psi, 1, n)
}

/// Tail weight of a thermal distribution beyond the truncation.
pub fn thermal_tail(nbar: f64, n: usize) -> f64 {
    if nbar <= 0.0 {
        0.0
    } else {
        (nbar / (nbar + 1.0)).powi(n as i32)
    }
}

/// Thermal state with mean occupation `nbar` on `n` Fock levels:
/// p_k = nbar^k / (nbar+1)^{k+1}, renormalized on the truncated space.
/// The discarded tail must be below 1e-8.
pub fn thermal_state(nbar: f64, n: usize) -> Result<DensityMatrix> {
    if nbar < 0.0 {
        return Err(Error::InvalidParams(format!(
            "thermal occupation must be >= 0, got {nbar}"
        )));
    }
    let tail = thermal_tail(nbar, n);
    if tail >= 1e-8 {
        return Err(Error::TruncationTooSmall(format!(
            "thermal tail {tail:.2e} beyond {n} levels exceeds 1e-8"
        )));
    }
    let mut p: Vec<f64> = (0..n)
        .map(|k| nbar.powi(k as i32) / (nbar + 1.0).powi(k as i32 + 1))
        .collect();
    let norm: f64 = p.iter().sum();
    for x in &mut p {
        *x /= norm;
    }
    let mut mat = CMat::zeros((n, n));
    for (k, &pk) in p.iter().enumerate() {
        mat[[k, k]] = C64::new(pk, 0.0);
    }
    DensityMatrix::new(mat, 1, n)
}

/// `spin (x) boson` product state.
pub fn product_state(spin: &DensityMatrix, boson: &DensityMatrix) -> Result<DensityMatrix> {
    if spin.dim_spin() != 2 || spin.dim_boson() != 1 || boson.dim_spin() != 1 {
        return Err(Error::DimensionMismatch(
            "product_state expects a bare spin state and a bare boson state".into(),
        ));
    }
    let mat = linalg::kron(spin.mat(), boson.mat());
    DensityMatrix::new(mat, 2, boson.dim_boson())
}

pub fn spin_pure(s: SpinState) -> DensityMatrix {
    DensityMatrix::from_pure(&s.vector(), 2, 1).expect("valid spin state")
}

/// Tr rho^2 without forming the square (rho Hermitian).
pub fn purity(rho: &CMat) -> f64 {
    rho.iter().map(|z| z.norm_sqr()).sum()
}

/// Population of the top 4 Fock levels, the truncation-quality monitor.
pub fn leakage_top4(rho: &CMat, dim_boson: usize) -> f64 {
    let d = rho.nrows();
    let dim_spin = d / dim_boson;
    let mut total = 0.0;
    for s in 0..dim_spin {
        for m in dim_boson.saturating_sub(4)..dim_boson {
            total += rho[[s * dim_boson + m, s * dim_boson + m]].re;
        }
    }
    total
}

/// Uhlmann fidelity `(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`.
///
/// Accepts slightly indefinite inputs (negative eigenvalues above -1e-5 are
/// clipped; the engine's positivity floor is -1e-6 and flags them); anything
/// more negative is rejected.
pub fn fidelity(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if rho.nrows() != sigma.nrows() || rho.ncols() != sigma.ncols() {
        return Err(Error::DimensionMismatch("fidelity of unequal dims".into()));
    }
    let d = rho.nrows();
    let op = Operator::new(rho.clone(), 1, d)?;
    let sqrt_rho = op.herm_sqrt_tol(1e-5)?;
    let inner = linalg::matmul(
        sqrt_rho.mat(),
        &linalg::matmul(sigma, sqrt_rho.mat()),
    );
    let eig = linalg::eigh(&inner)?;
    if let Some(&min) = eig.values.first() {
        if min < -1e-5 {
            return Err(Error::NotPsd(min));
        }
    }
    let root_sum: f64 = eig.values.iter().map(|&x| x.max(0.0).sqrt()).sum();
    Ok((root_sum * root_sum).min(1.0))
}

pub fn fidelity_dm(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    fidelity(rho.mat(), sigma.mat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{fock_annihilate, fock_number};

    #[test]
    fn thermal_examples() {
        let n = 30;
        let vac = thermal_state(0.0, n).unwrap();
        assert!((vac.mat()[[0, 0]].re - 1.0).abs() <= 1e-14);
        let th = thermal_state(0.25, n).unwrap();
        assert!((th.mat()[[0, 0]].re - 0.8).abs() <= 1e-8);
        let num = fock_number(n).unwrap();
        let mean: C64 = linalg::trace(&linalg::matmul(th.mat(), num.mat()));
        assert!((mean.re - 0.25).abs() <= 1e-8);
        // purity of a thermal state: 1/(2 nbar + 1)
        let th = thermal_state(0.75, 24).unwrap();
        assert!((th.purity() - 0.4).abs() <= 1e-8);
        assert!(matches!(
            thermal_state(0.75, 12),
            Err(Error::TruncationTooSmall(_))
        ));
    }

    #[test]
    fn coherent_examples() {
        let n = 24;
        let vac = coherent_state(C64::new(0.0, 0.0), n).unwrap();
        assert!((vac.mat()[[0, 0]].re - 1.0).abs() <= 1e-14);
        let alpha = C64::new(0.5, 0.0);
        let st = coherent_state(alpha, n).unwrap();
        let num = fock_number(n).unwrap();
        let mean = linalg::trace(&linalg::matmul(st.mat(), num.mat()));
        assert!((mean.re - 0.25).abs() <= 1e-8);
        let a = fock_annihilate(n).unwrap();
        let expect_a = linalg::trace(&linalg::matmul(st.mat(), a.mat()));
        assert!((expect_a - alpha).norm() <= 1e-8);
        assert!(coherent_state(C64::new(4.0, 0.0), 16).is_err());
    }

    #[test]
    fn fidelity_basics() {
        let th = thermal_state(0.75, 24).unwrap();
        assert!((fidelity(th.mat(), th.mat()).unwrap() - 1.0).abs() <= 1e-9);
        // fidelity with a pure state is <psi|rho|psi>: F(rho_th, |0><0|) = p0
        let vac = thermal_state(0.0, 24).unwrap();
        let f = fidelity(th.mat(), vac.mat()).unwrap();
        assert!((f - 1.0 / 1.75).abs() <= 1e-8);
        // orthogonal pure states
        let f0 = fock_vector(0, 8).unwrap();
        let f1 = fock_vector(1, 8).unwrap();
        let r0 = DensityMatrix::from_pure(&f0, 1, 8).unwrap();
        let r1 = DensityMatrix::from_pure(&f1, 1, 8).unwrap();
        assert!(fidelity(r0.mat(), r1.mat()).unwrap() <= 1e-12);
    }

    #[test]
    fn purity_values() {
        let n = 8;
        let maximally_mixed = {
            let mut m = CMat::zeros((n, n));
            for k in 0..n {
                m[[k, k]] = C64::new(1.0 / n as f64, 0.0);
            }
            m
        };
        assert!((purity(&maximally_mixed) - 1.0 / n as f64).abs() <= 1e-14);
        let pure = DensityMatrix::from_pure(&fock_vector(2, n).unwrap(), 1, n).unwrap();
        assert!((pure.purity() - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn density_validation() {
        let mut m = CMat::zeros((2, 2));
        m[[0, 0]] = C64::new(0.9, 0.0);
        assert!(DensityMatrix::new(m.clone(), 2, 1).is_err()); // trace
        m[[1, 1]] = C64::new(0.1, 0.0);
        m[[0, 1]] = C64::new(0.5, 0.0);
        m[[1, 0]] = C64::new(0.5, 0.0);
        assert!(DensityMatrix::new(m, 2, 1).is_err()); // negative eigenvalue
    }
}
