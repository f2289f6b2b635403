//! The unitary frame machinery linking the physical and simulated pictures:
//! the spin-dependent displacement, the composite map built from the two
//! rotating frames, and state transport along it.

use num_complex::Complex64 as C64;

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::SystemParams;
use crate::operator::{displacement, Operator};

/// Frequencies defining the frame map; derived from [`SystemParams`] so the
/// two cannot drift apart.
#[derive(Debug, Clone, Copy)]
pub struct FrameSpec {
    pub delta0: f64,
    pub nu: f64,
    pub nu_tilde: f64,
    pub omega_tilde: f64,
    pub eta: f64,
    pub t0: f64,
}

impl FrameSpec {
    pub fn from_params(p: &SystemParams) -> Self {
        Self {
            delta0: p.delta0(),
            nu: p.nu,
            nu_tilde: p.nu_tilde,
            omega_tilde: p.omega_tilde,
            eta: p.eta,
            t0: p.t0,
        }
    }
}

/// Spin-dependent displacement, in the (|e>, |g>) spin basis:
/// `T(alpha) = 2^{-1/2} [[D†(alpha), D(alpha)], [-D†(alpha), D(alpha)]]`.
pub fn t_operator(alpha: C64, n_boson: usize) -> Result<Operator> {
    let d = displacement(alpha, n_boson)?;
    let dd = linalg::dagger(d.mat());
    let dim = 2 * n_boson;
    let mut mat = CMat::zeros((dim, dim));
    let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for i in 0..n_boson {
        for j in 0..n_boson {
            mat[[i, j]] = r * dd[[i, j]];
            mat[[i, n_boson + j]] = r * d.mat()[[i, j]];
            mat[[n_boson + i, j]] = -r * dd[[i, j]];
            mat[[n_boson + i, n_boson + j]] = r * d.mat()[[i, j]];
        }
    }
    Operator::unitary(mat, 2, n_boson)
}

/// Cached pieces of the frame map for repeated evaluation over a time grid.
pub struct FrameMap {
    spec: FrameSpec,
    n_boson: usize,
    tdag: CMat,
}

impl FrameMap {
    pub fn new(spec: FrameSpec, n_boson: usize) -> Result<Self> {
        let t = t_operator(C64::new(0.0, spec.eta / 2.0), n_boson)?;
        Ok(Self {
            spec,
            n_boson,
            tdag: linalg::dagger(t.mat()),
        })
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn n_boson(&self) -> usize {
        self.n_boson
    }

    /// The composite map at time `t`: the inner rotating frame, then the
    /// inverse spin-dependent displacement, then the outer rotating frame.
    pub fn eval(&self, t: f64) -> CMat {
        let tau = t - self.spec.t0;
        let n = self.n_boson;
        let d = 2 * n;
        // right factor: spin rotation exp(i tau delta0 sx / 2) (x) 1
        let half = tau * self.spec.delta0 / 2.0;
        let (c, s) = (half.cos(), half.sin());
        let ua = [
            [C64::new(c, 0.0), C64::new(0.0, s)],
            [C64::new(0.0, s), C64::new(c, 0.0)],
        ];
        // out = diag(U_b†) @ T† @ (ua (x) 1)
        let mut out = CMat::zeros((d, d));
        for i in 0..d {
            for jm in 0..n {
                let from_e = self.tdag[[i, jm]];
                let from_g = self.tdag[[i, n + jm]];
                out[[i, jm]] = from_e * ua[0][0] + from_g * ua[1][0];
                out[[i, n + jm]] = from_e * ua[0][1] + from_g * ua[1][1];
            }
        }
        let rot = self.spec.nu - self.spec.nu_tilde;
        for s_idx in 0..2 {
            let zsign = if s_idx == 0 { 1.0 } else { -1.0 };
            for m in 0..n {
                let phase =
                    C64::new(0.0, tau * (rot * m as f64 - self.spec.omega_tilde * zsign / 2.0))
                        .exp();
                for j in 0..d {
                    out[[s_idx * n + m, j]] *= phase;
                }
            }
        }
        out
    }

    /// `Gamma rho Gamma†`.
    pub fn apply(&self, rho: &CMat, t: f64) -> CMat {
        let g = self.eval(t);
        linalg::matmul(&g, &linalg::matmul(rho, &linalg::dagger(&g)))
    }

    /// `Gamma† rho Gamma`.
    pub fn apply_inverse(&self, rho: &CMat, t: f64) -> CMat {
        let g = self.eval(t);
        linalg::matmul(&linalg::dagger(&g), &linalg::matmul(rho, &g))
    }
}

/// One-shot construction of the frame map at time `t`.
pub fn gamma(t: f64, spec: &FrameSpec, n_boson: usize) -> Result<Operator> {
    let map = FrameMap::new(*spec, n_boson)?;
    Operator::unitary(map.eval(t), 2, n_boson)
}

fn edge_leakage(rho: &CMat, n_boson: usize) -> f64 {
    crate::density::leakage_top4(rho, n_boson)
}

/// Transport a physical-frame state into the simulated frame.
pub fn to_simulated_frame(
    rho: &DensityMatrix,
    t: f64,
    spec: &FrameSpec,
    n_boson: usize,
) -> Result<DensityMatrix> {
    if rho.dim_boson() != n_boson || rho.dim_spin() != 2 {
        return Err(Error::DimensionMismatch("to_simulated_frame".into()));
    }
    let map = FrameMap::new(*spec, n_boson)?;
    let out = map.apply(rho.mat(), t);
    if edge_leakage(&out, n_boson) > 1e-3 {
        log::warn!("frame transport: truncation-edge population above 1e-3");
    }
    DensityMatrix::new(out, 2, n_boson)
}

/// Transport a simulated-frame state back to the physical frame.
pub fn from_simulated_frame(
    rho: &DensityMatrix,
    t: f64,
    spec: &FrameSpec,
    n_boson: usize,
) -> Result<DensityMatrix> {
    if rho.dim_boson() != n_boson || rho.dim_spin() != 2 {
        return Err(Error::DimensionMismatch("from_simulated_frame".into()));
    }
    let map = FrameMap::new(*spec, n_boson)?;
    let out = map.apply_inverse(rho.mat(), t);
    if edge_leakage(&out, n_boson) > 1e-3 {
        log::warn!("frame transport: truncation-edge population above 1e-3");
    }
    DensityMatrix::new(out, 2, n_boson)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{fidelity, fock_vector, product_state, spin_pure, SpinState};
    use crate::linalg::{dagger, identity, matmul, max_abs, max_abs_diff};
    use crate::model::DrivingTerm;
    use crate::operator::{embed, sigma_x, sigma_z};
    use rand::{Rng, SeedableRng};

    fn spec(eta: f64, scale: f64) -> FrameSpec {
        let nu_tilde = 1.0 / scale;
        FrameSpec {
            delta0: (nu_tilde - 1.0) - nu_tilde,
            nu: 1.0,
            nu_tilde,
            omega_tilde: nu_tilde,
            eta,
            t0: 0.0,
        }
    }

    fn random_density(n: usize, seed: u64) -> CMat {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = 2 * n;
        let mut a = CMat::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                a[[i, j]] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
        }
        let aa = matmul(&a, &dagger(&a));
        let tr = linalg::trace(&aa);
        aa.mapv(|z| z / tr)
    }

    #[test]
    fn t_at_zero_is_spin_rotation() {
        let n = 6;
        let t = t_operator(C64::new(0.0, 0.0), n).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut spin = CMat::zeros((2, 2));
        spin[[0, 0]] = C64::new(r, 0.0);
        spin[[0, 1]] = C64::new(r, 0.0);
        spin[[1, 0]] = C64::new(-r, 0.0);
        spin[[1, 1]] = C64::new(r, 0.0);
        let expected = linalg::kron(&spin, &identity(n));
        assert!(max_abs_diff(t.mat(), &expected) <= 1e-14);
    }

    #[test]
    fn map_sends_sx_to_minus_sz() {
        let n = 16;
        let f = spec(0.4, 50.0);
        let map = FrameMap::new(f, n).unwrap();
        let sx = embed(&sigma_x(), &crate::operator::boson_identity(n)).unwrap();
        let msz = embed(&sigma_z(), &crate::operator::boson_identity(n))
            .unwrap()
            .scaled(C64::new(-1.0, 0.0));
        for t in [0.0, 13.7, 211.0] {
            let g = map.eval(t);
            let transformed = matmul(&g, &matmul(sx.mat(), &dagger(&g)));
            assert!(max_abs_diff(&transformed, msz.mat()) <= 1e-11);
        }
    }

    #[test]
    fn gamma_is_t_dagger_at_t0() {
        let n = 12;
        let f = spec(0.3, 100.0);
        let g0 = gamma(f.t0, &f, n).unwrap();
        let t = t_operator(C64::new(0.0, f.eta / 2.0), n).unwrap();
        assert!(max_abs_diff(g0.mat(), &dagger(t.mat())) <= 1e-13);
    }

    #[test]
    fn gamma_unitary_at_random_times() {
        let n = 14;
        let f = spec(0.5, 80.0);
        let map = FrameMap::new(f, n).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let t: f64 = rng.gen_range(0.0..500.0);
            let g = map.eval(t);
            let gtg = matmul(&dagger(&g), &g);
            assert!(max_abs_diff(&gtg, &identity(2 * n)) <= 1e-9);
        }
    }

    #[test]
    fn gamma_factorizes() {
        // applying U_a, then T†, then U_b† sequentially equals the composite
        let n = 10;
        let f = spec(0.35, 60.0);
        let map = FrameMap::new(f, n).unwrap();
        let t = 7.31;
        let ua = {
            let gen = embed(&sigma_x(), &crate::operator::boson_identity(n))
                .unwrap()
                .scaled(C64::new(0.0, t * f.delta0 / 2.0));
            gen.expm().unwrap()
        };
        let tdag = dagger(t_operator(C64::new(0.0, f.eta / 2.0), n).unwrap().mat());
        let ub_dag = {
            let mut m = CMat::zeros((2 * n, 2 * n));
            for s in 0..2 {
                let zs = if s == 0 { 1.0 } else { -1.0 };
                for k in 0..n {
                    m[[s * n + k, s * n + k]] = C64::new(
                        0.0,
                        t * ((f.nu - f.nu_tilde) * k as f64 - f.omega_tilde * zs / 2.0),
                    )
                    .exp();
                }
            }
            m
        };
        let sequential = matmul(&ub_dag, &matmul(&tdag, ua.mat()));
        assert!(max_abs_diff(&sequential, &map.eval(t)) <= 1e-12);
    }

    #[test]
    fn transport_roundtrip_and_purity() {
        let n = 12;
        let f = spec(0.4, 70.0);
        let map = FrameMap::new(f, n).unwrap();
        let rho = random_density(n, 3);
        let t = 91.2;
        let fwd = map.apply(&rho, t);
        let back = map.apply_inverse(&fwd, t);
        assert!(max_abs_diff(&back, &rho) <= 1e-10);
        let p0 = crate::density::purity(&rho);
        let p1 = crate::density::purity(&fwd);
        assert!((p0 - p1).abs() <= 1e-9);
    }

    #[test]
    fn frame_covariance_of_expectations() {
        // <O>_{Gamma rho Gamma†} = <Gamma† O Gamma>_rho
        let n = 10;
        let f = spec(0.3, 90.0);
        let map = FrameMap::new(f, n).unwrap();
        let rho = random_density(n, 5);
        let o = embed(&sigma_z(), &crate::operator::fock_number(n).unwrap()).unwrap();
        let t = 17.0;
        let lhs = linalg::trace(&matmul(&map.apply(&rho, t), o.mat()));
        let g = map.eval(t);
        let o_back = matmul(&dagger(&g), &matmul(o.mat(), &g));
        let rhs = linalg::trace(&matmul(&rho, &o_back));
        assert!((lhs - rhs).norm() <= 1e-9);
    }

    #[test]
    fn initial_state_preparation_inverse_pair() {
        // rho_G(t0) = T rho_n(t0) T†, and the map returns rho_n
        let n = 12;
        let f = spec(0.35, 100.0);
        let psi_n = {
            let spin = spin_pure(SpinState::Excited);
            let boson = DensityMatrix::from_pure(&fock_vector(0, n).unwrap(), 1, n).unwrap();
            product_state(&spin, &boson).unwrap()
        };
        let t = t_operator(C64::new(0.0, f.eta / 2.0), n).unwrap();
        let rho_g = matmul(t.mat(), &matmul(psi_n.mat(), &dagger(t.mat())));
        let rho_g = DensityMatrix::new(rho_g, 2, n).unwrap();
        let back = to_simulated_frame(&rho_g, f.t0, &f, n).unwrap();
        assert!(max_abs_diff(back.mat(), psi_n.mat()) <= 1e-12);
    }

    #[test]
    fn blockade_steady_state_maps_to_fock() {
        // Gamma applied to D(i eta/2)|m_s>|+> gives |m_s>|g> up to phase
        let n = 16;
        let mut f = spec(0.639, 200.0);
        f.delta0 = -(f.nu_tilde - f.nu) - f.omega_tilde; // blue sideband bias
        let m_s = 8;
        let disp = displacement(C64::new(0.0, f.eta / 2.0), n).unwrap();
        let psi_b = disp.mat().column(m_s).to_owned();
        let spin = SpinState::Plus.vector();
        let mut psi = crate::linalg::CVec::zeros(2 * n);
        for s in 0..2 {
            for m in 0..n {
                psi[s * n + m] = spin[s] * psi_b[m];
            }
        }
        let rho_g = DensityMatrix::from_pure(&psi, 2, n).unwrap();
        let map = FrameMap::new(f, n).unwrap();
        let target = {
            let spin = spin_pure(SpinState::Ground);
            let boson = DensityMatrix::from_pure(&fock_vector(m_s, n).unwrap(), 1, n).unwrap();
            product_state(&spin, &boson).unwrap()
        };
        for t in [0.0, 5.0, 123.4] {
            let mapped = map.apply(rho_g.mat(), t);
            let fid = fidelity(&mapped, target.mat()).unwrap();
            assert!(fid >= 1.0 - 1e-6, "t={t}: fidelity {fid}");
        }
    }

    #[test]
    fn eta_zero_is_pure_spin_basis_change() {
        let n = 8;
        let mut f = spec(0.0, 50.0);
        f.delta0 = 0.0;
        f.omega_tilde = 0.0;
        f.nu_tilde = f.nu;
        let map = FrameMap::new(f, n).unwrap();
        let t0map = map.eval(0.0);
        let t1map = map.eval(37.5);
        assert!(max_abs_diff(&t0map, &t1map) <= 1e-12);
        let _ = max_abs(&t0map);
        validate_params_roundtrip();
    }

    fn validate_params_roundtrip() {
        let p = SystemParams {
            nu: 1.0,
            eta: 0.1,
            nu_tilde: 0.01,
            omega_tilde: 0.02,
            drivings: vec![DrivingTerm {
                amplitude: 0.3,
                detuning: -0.7,
            }],
            red: vec![],
            blue: vec![],
            t0: 0.0,
        };
        let f = FrameSpec::from_params(&p);
        assert_eq!(f.delta0, -0.7);
        assert_eq!(f.nu_tilde, 0.01);
    }
}
