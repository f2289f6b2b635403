//! Physical and target Hamiltonians: the generalized driven Rabi model, the
//! multi-boson exchange models it simulates, the Fock-dependent coupling
//! operator, sideband selection, and the quadratic-field-term removal.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::operator::{
    self, embed, fock_annihilate, fock_number, sigma_plus, sigma_x, sigma_y, sigma_z, Operator,
};

/// One spin driving: amplitude and detuning (both in units of the boson
/// frequency).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivingTerm {
    pub amplitude: f64,
    pub detuning: f64,
}

/// Red (lowering, `s+ a^n`) or blue (raising, `s+ a†^n`) sideband.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sideband {
    Red,
    Blue,
}

/// All physical frequencies of the driven linear spin-boson system and the
/// bookkeeping of which drivings realize which sidebands.
#[derive(Debug, Clone)]
pub struct SystemParams {
    /// Boson frequency; sets the unit (1.0 by convention).
    pub nu: f64,
    /// Dimensionless spin-boson coupling.
    pub eta: f64,
    /// Simulated boson frequency.
    pub nu_tilde: f64,
    /// Simulated spin frequency.
    pub omega_tilde: f64,
    /// Drivings; index 0 is mandatory and defines the bias `delta_0`.
    pub drivings: Vec<DrivingTerm>,
    /// Red-sideband orders (terms `s+ a^n`).
    pub red: Vec<usize>,
    /// Blue-sideband orders (terms `s+ a†^m`).
    pub blue: Vec<usize>,
    /// Initial time of the frame transformations.
    pub t0: f64,
}

impl SystemParams {
    pub fn delta0(&self) -> f64 {
        self.drivings[0].detuning
    }

    /// Number of drivings beyond the first.
    pub fn n_d(&self) -> usize {
        self.drivings.len() - 1
    }

    /// Relative driving frequency `Delta_j = delta_j - delta_0`.
    pub fn big_delta(&self, j: usize) -> f64 {
        self.drivings[j].detuning - self.delta0()
    }

    /// Index of the driving resonant with the given sideband.
    pub fn driving_for(&self, order: usize, side: Sideband) -> Result<usize> {
        let target = sideband_frequency(order, side, self.nu, self.nu_tilde, self.omega_tilde);
        let tol = 1e-12 * self.nu;
        self.drivings
            .iter()
            .position(|d| (d.detuning - target).abs() <= tol)
            .ok_or_else(|| {
                Error::InvalidParams(format!(
                    "no driving matches the {side:?} sideband of order {order} \
                     (needs detuning {target:.6e})"
                ))
            })
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu <= 0.0 {
            return Err(Error::InvalidParams("nu must be positive".into()));
        }
        if self.nu_tilde < 0.0 {
            return Err(Error::InvalidParams("nu_tilde must be >= 0".into()));
        }
        if self.drivings.is_empty() {
            return Err(Error::InvalidParams(
                "at least one driving (the bias) is required".into(),
            ));
        }
        for &n in &self.red {
            self.driving_for(n, Sideband::Red)?;
        }
        for &m in &self.blue {
            self.driving_for(m, Sideband::Blue)?;
        }
        Ok(())
    }
}

/// Detuning that makes the sideband of the given order resonant:
/// `±n (nu_tilde - nu) - omega_tilde` (+ for red, - for blue).
pub fn sideband_frequency(
    order: usize,
    side: Sideband,
    nu: f64,
    nu_tilde: f64,
    omega_tilde: f64,
) -> f64 {
    let sign = match side {
        Sideband::Red => 1.0,
        Sideband::Blue => -1.0,
    };
    sign * order as f64 * (nu_tilde - nu) - omega_tilde
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Effective coupling and phase of an order-`n` sideband in the Lamb-Dicke
/// regime: `g = eta^n Omega / (2 n!)`, `phi = n pi / 2`.
pub fn effective_coupling(order: usize, amplitude: f64, eta: f64) -> (f64, f64) {
    let g = eta.powi(order as i32) * amplitude / (2.0 * factorial(order));
    let phi = order as f64 * std::f64::consts::FRAC_PI_2;
    (g, phi)
}

/// Fock-number-dependent coupling operator, diagonal in the Fock basis:
/// `f_n(a†a) = exp(-eta²/2) sum_l (i eta)^{2l+n} / (l!(l+n)!) a†^l a^l`.
///
/// Each diagonal entry is a finite sum (terms with `l > m` annihilate `|m>`),
/// so the operator is exact on the truncated space.
pub fn f_n_operator(order: usize, eta: f64, n_boson: usize) -> Result<Operator> {
    if n_boson < order + 1 {
        return Err(Error::InvalidDimension(format!(
            "f_{order} needs at least {} Fock levels, got {n_boson}",
            order + 1
        )));
    }
    let mut mat = CMat::zeros((n_boson, n_boson));
    let prefactor = (-eta * eta / 2.0).exp();
    let i_eta = C64::new(0.0, eta);
    for m in 0..n_boson {
        // term_l = (i eta)^{2l+n} / (l!(l+n)!) * m!/(m-l)!, built by recurrence
        let mut term = i_eta.powu(order as u32) / factorial(order);
        let mut sum = term;
        for l in 0..m {
            let ratio = i_eta * i_eta * (m - l) as f64
                / ((l + 1) as f64 * (l + 1 + order) as f64);
            term *= ratio;
            sum += term;
        }
        mat[[m, m]] = prefactor * sum;
    }
    Operator::new(mat, 1, n_boson)
}

/// `f_n(0) = exp(-eta²/2) (i eta)^n / n!`, the constant the operator reduces
/// to deep in the Lamb-Dicke regime.
pub fn f_n_at_vacuum(order: usize, eta: f64) -> C64 {
    (-eta * eta / 2.0).exp() * C64::new(0.0, eta).powu(order as u32) / factorial(order)
}

fn num_embedded(n: usize) -> Result<CMat> {
    Ok(embed(&operator::spin_identity(), &fock_number(n)?)?.into_mat())
}

/// The driven linear spin-boson Hamiltonian at time `t`:
/// `nu a†a + (delta_0/2) sx + sum_j (Omega_j/2)[cos(Delta_j t) sz +
/// sin(Delta_j t) sy] + i (eta nu / 2) sx (a - a†)`.
pub fn build_hg(p: &SystemParams, t: f64, n_boson: usize) -> Result<Operator> {
    let mut h = build_hg_static_part(p, n_boson, CouplingQuadrature::Momentum)?;
    add_driving_terms(p, t, n_boson, &mut h)?;
    Operator::hermitian(h, 2, n_boson)
}

/// Variant with the spin-boson coupling along `(a + a†)`; this is the form
/// the quadratic-field analysis (squeezing removal) is phrased in.
pub fn build_hg_position(p: &SystemParams, t: f64, n_boson: usize) -> Result<Operator> {
    let mut h = build_hg_static_part(p, n_boson, CouplingQuadrature::Position)?;
    add_driving_terms(p, t, n_boson, &mut h)?;
    Operator::hermitian(h, 2, n_boson)
}

#[derive(Clone, Copy)]
pub(crate) enum CouplingQuadrature {
    /// `i (eta nu / 2) sx (a - a†)`
    Momentum,
    /// `(eta nu / 2) sx (a + a†)`
    Position,
}

pub(crate) fn build_hg_static_part(
    p: &SystemParams,
    n_boson: usize,
    quad: CouplingQuadrature,
) -> Result<CMat> {
    let a = fock_annihilate(n_boson)?;
    let ad = linalg::dagger(a.mat());
    let mut h = num_embedded(n_boson)?.mapv(|z| z * p.nu);
    let sx = embed(&sigma_x(), &operator::boson_identity(n_boson))?;
    h.zip_mut_with(sx.mat(), |x, &y| *x += y * (p.delta0() / 2.0));
    let coupling = match quad {
        CouplingQuadrature::Momentum => {
            let diff = a.mat() - &ad;
            linalg::kron(sigma_x().mat(), &diff.mapv(|z| z * C64::new(0.0, p.eta * p.nu / 2.0)))
        }
        CouplingQuadrature::Position => {
            let sum = a.mat() + &ad;
            linalg::kron(sigma_x().mat(), &sum.mapv(|z| z * (p.eta * p.nu / 2.0)))
        }
    };
    h += &coupling;
    Ok(h)
}

pub(crate) fn add_driving_terms(
    p: &SystemParams,
    t: f64,
    n_boson: usize,
    h: &mut CMat,
) -> Result<()> {
    let id = operator::boson_identity(n_boson);
    let sz = embed(&sigma_z(), &id)?;
    let sy = embed(&sigma_y(), &id)?;
    for j in 0..p.drivings.len() {
        let omega = p.drivings[j].amplitude;
        let delta_j = p.big_delta(j);
        let (c, s) = ((delta_j * t).cos(), (delta_j * t).sin());
        h.zip_mut_with(sz.mat(), |x, &y| *x += y * (omega / 2.0 * c));
        h.zip_mut_with(sy.mat(), |x, &y| *x += y * (omega / 2.0 * s));
    }
    Ok(())
}

fn boson_power(base: &CMat, order: usize) -> CMat {
    let mut out = linalg::identity(base.nrows());
    for _ in 0..order {
        out = linalg::matmul(&out, base);
    }
    out
}

fn free_target_part(p: &SystemParams, n_boson: usize) -> Result<CMat> {
    let mut h = num_embedded(n_boson)?.mapv(|z| z * p.nu_tilde);
    let sz = embed(&sigma_z(), &operator::boson_identity(n_boson))?;
    h.zip_mut_with(sz.mat(), |x, &y| *x += y * (p.omega_tilde / 2.0));
    Ok(h)
}

/// The multi-boson model reached in the Lamb-Dicke regime:
/// `nu~ a†a + (w~/2) sz + sum_B [g_m e^{i phi_m} s+ a†^m + H.c.]
///  + sum_R [g_n e^{i phi_n} s+ a^n + H.c.]`.
pub fn build_hn(p: &SystemParams, n_boson: usize) -> Result<Operator> {
    if p.red.is_empty() && p.blue.is_empty() {
        log::warn!("target model has empty sideband sets; building the free Hamiltonian");
    }
    let mut h = free_target_part(p, n_boson)?;
    let a = fock_annihilate(n_boson)?;
    let ad = linalg::dagger(a.mat());
    for (orders, raising) in [(&p.red, false), (&p.blue, true)] {
        for &n in orders.iter() {
            let side = if raising { Sideband::Blue } else { Sideband::Red };
            let j = p.driving_for(n, side)?;
            let (g, phi) = effective_coupling(n, p.drivings[j].amplitude, p.eta);
            let boson = if raising {
                boson_power(&ad, n)
            } else {
                boson_power(a.mat(), n)
            };
            let coeff = C64::new(0.0, phi).exp() * g;
            let term = linalg::kron(sigma_plus().mat(), &boson.mapv(|z| z * coeff));
            h += &term;
            h += &linalg::dagger(&term);
        }
    }
    Operator::hermitian(h, 2, n_boson)
}

/// The nonlinear counterpart, with the Fock-dependent coupling kept:
/// blue terms `(Omega/2) s+ a†^m f_m(a†a)`, red terms
/// `(Omega/2) s+ f_n(a†a) a^n` (plus conjugates).
pub fn build_hn_eta(p: &SystemParams, n_boson: usize) -> Result<Operator> {
    if p.red.is_empty() && p.blue.is_empty() {
        log::warn!("target model has empty sideband sets; building the free Hamiltonian");
    }
    let mut h = free_target_part(p, n_boson)?;
    let a = fock_annihilate(n_boson)?;
    let ad = linalg::dagger(a.mat());
    for (orders, raising) in [(&p.red, false), (&p.blue, true)] {
        for &n in orders.iter() {
            let side = if raising { Sideband::Blue } else { Sideband::Red };
            let j = p.driving_for(n, side)?;
            let omega = p.drivings[j].amplitude;
            let f = f_n_operator(n, p.eta, n_boson)?;
            let boson = if raising {
                linalg::matmul(&boson_power(&ad, n), f.mat())
            } else {
                linalg::matmul(f.mat(), &boson_power(a.mat(), n))
            };
            let term = linalg::kron(
                sigma_plus().mat(),
                &boson.mapv(|z| z * (omega / 2.0)),
            );
            h += &term;
            h += &linalg::dagger(&term);
        }
    }
    Operator::hermitian(h, 2, n_boson)
}

/// Builds either the Lamb-Dicke model or its nonlinear counterpart.
pub fn build_target(p: &SystemParams, nonlinear: bool, n_boson: usize) -> Result<Operator> {
    if nonlinear {
        build_hn_eta(p, n_boson)
    } else {
        build_hn(p, n_boson)
    }
}

/// Which named model a parameter set realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Excitation-conserving exchange, `s+ a^n` (red set only).
    Jcm,
    /// Co-raising exchange, `s+ a†^n` (blue set only).
    AntiJcm,
    /// Both rotating and counter-rotating terms of one order.
    Qrm,
    /// Anything else (general multi-sideband model).
    General,
}

#[derive(Debug, Clone)]
pub struct TargetModel {
    pub kind: ModelKind,
    pub nonlinear: bool,
    /// Dominant exchange order.
    pub order: usize,
    /// Lamb-Dicke effective coupling of that order.
    pub coupling: f64,
    /// Coupling phase `n pi / 2`.
    pub phase: f64,
    pub nu_tilde: f64,
    pub omega_tilde: f64,
}

pub fn classify_target(p: &SystemParams, nonlinear: bool) -> Result<TargetModel> {
    let kind = match (p.red.as_slice(), p.blue.as_slice()) {
        ([n], []) => (ModelKind::Jcm, *n),
        ([], [m]) => (ModelKind::AntiJcm, *m),
        ([n], [m]) if n == m => (ModelKind::Qrm, *n),
        _ => (ModelKind::General, *p.red.first().or(p.blue.first()).unwrap_or(&0)),
    };
    let (kind, order) = kind;
    let (coupling, phase) = if order > 0 {
        let side = if p.red.contains(&order) {
            Sideband::Red
        } else {
            Sideband::Blue
        };
        let j = p.driving_for(order, side)?;
        effective_coupling(order, p.drivings[j].amplitude, p.eta)
    } else {
        (0.0, 0.0)
    };
    Ok(TargetModel {
        kind,
        nonlinear,
        order,
        coupling,
        phase,
        nu_tilde: p.nu_tilde,
        omega_tilde: p.omega_tilde,
    })
}

/// Result of removing a quadratic-field term `D (a+a†)²` by a squeezing
/// transformation.
#[derive(Debug, Clone)]
pub struct QuadraticRemoval {
    /// Squeezing parameter that cancels the quadratic term.
    pub z_s: f64,
    /// Parameters with the renormalized coupling and boson frequency.
    pub params: SystemParams,
    /// Additive energy constant `-nu e^{-z_s} sinh(z_s)`.
    pub energy_shift: f64,
}

/// Finds the squeezing parameter `z_s = -(1/4) ln(1 + 4D/nu)` that brings
/// `H + D (a+a†)²` back to the linear form, with renormalized
/// `eta -> eta e^{3 z_s}` and `nu -> nu e^{-2 z_s}`.
pub fn remove_a2(p: &SystemParams, d_strength: f64) -> Result<QuadraticRemoval> {
    let arg = 1.0 + 4.0 * d_strength / p.nu;
    if arg <= 0.0 {
        return Err(Error::UnstablePotential(arg));
    }
    let z_s = -0.25 * arg.ln();
    let mut params = p.clone();
    params.eta = p.eta * (3.0 * z_s).exp();
    params.nu = p.nu * (-2.0 * z_s).exp();
    let energy_shift = -p.nu * (-z_s).exp() * z_s.sinh();
    Ok(QuadraticRemoval {
        z_s,
        params,
        energy_shift,
    })
}

/// The simulated-frame generator before any rotating-wave approximation:
/// `nu~ a†a + (w~/2) sz + sum_j (Omega_j/2)[s+ e^{-i(w~+delta_j)t}
/// e^{i eta (a(t)+a†(t))} + H.c.]`.
///
/// Evolving a state under this Hamiltonian together with the exactly
/// transformed jump operators reproduces the frame image of the physical
/// evolution up to integrator error, with no approximation content.
pub struct ExactFrameGenerator {
    free: CMat,
    d_fixed: CMat,
    omegas: Vec<f64>,
    deltas: Vec<f64>,
    omega_tilde: f64,
    rot: f64,
    n_boson: usize,
}

impl ExactFrameGenerator {
    pub fn new(p: &SystemParams, n_boson: usize) -> Result<Self> {
        if p.t0 != 0.0 {
            return Err(Error::InvalidParams(
                "the exact frame generator is implemented for t0 = 0".into(),
            ));
        }
        let d_fixed = operator::displacement(C64::new(0.0, p.eta), n_boson)?.into_mat();
        Ok(Self {
            free: free_target_part(p, n_boson)?,
            d_fixed,
            omegas: p.drivings.iter().map(|d| d.amplitude).collect(),
            deltas: p.drivings.iter().map(|d| d.detuning).collect(),
            omega_tilde: p.omega_tilde,
            rot: p.nu - p.nu_tilde,
            n_boson,
        })
    }

    pub fn eval(&self, t: f64) -> CMat {
        let n = self.n_boson;
        let mut h = self.free.clone();
        // D(i eta e^{i rot t}) from the fixed displacement by phase conjugation
        let phases: Vec<C64> = (0..n)
            .map(|m| C64::new(0.0, self.rot * t * m as f64).exp())
            .collect();
        let mut coeff = C64::new(0.0, 0.0);
        for (om, de) in self.omegas.iter().zip(&self.deltas) {
            coeff += C64::new(0.0, -(self.omega_tilde + de) * t).exp() * (om / 2.0);
        }
        // s+ block is rows 0..n, cols n..2n (spin basis e, g)
        for i in 0..n {
            for j in 0..n {
                let dt_ij = phases[i] * self.d_fixed[[i, j]] * phases[j].conj();
                let x = coeff * dt_ij;
                h[[i, n + j]] += x;
                h[[n + j, i]] += x.conj();
            }
        }
        h
    }
}
