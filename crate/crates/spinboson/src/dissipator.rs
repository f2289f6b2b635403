//! Jump-operator catalogue: the standard channels, their exact
//! frame-transformed (time-dependent) forms, the static Lamb-Dicke
//! approximations, engineered sources, and dressed-basis dissipation.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::frame::{FrameMap, FrameSpec};
use crate::linalg::{self, CMat};
use crate::operator::{
    self, displacement, embed, fock_annihilate, fock_number, ketbra, sigma_minus, sigma_plus,
    sigma_x, sigma_z, Operator,
};

/// The six standard dissipation channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    SpinDephasing,
    SpontEmission,
    SpontAbsorption,
    BosonLeak,
    BosonHeat,
    BosonDephasing,
}

impl JumpKind {
    pub const ALL: [JumpKind; 6] = [
        JumpKind::SpinDephasing,
        JumpKind::SpontEmission,
        JumpKind::SpontAbsorption,
        JumpKind::BosonLeak,
        JumpKind::BosonHeat,
        JumpKind::BosonDephasing,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "spin_dephasing" | "sd" => Ok(Self::SpinDephasing),
            "spont_emission" | "se" => Ok(Self::SpontEmission),
            "spont_absorption" | "sa" => Ok(Self::SpontAbsorption),
            "boson_leak" | "bl" => Ok(Self::BosonLeak),
            "boson_heat" | "bh" => Ok(Self::BosonHeat),
            "boson_dephasing" | "bd" => Ok(Self::BosonDephasing),
            other => Err(Error::Config(format!("unknown channel kind `{other}`"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::SpinDephasing => "sd",
            Self::SpontEmission => "se",
            Self::SpontAbsorption => "sa",
            Self::BosonLeak => "bl",
            Self::BosonHeat => "bh",
            Self::BosonDephasing => "bd",
        }
    }
}

/// The bare jump operator of a standard channel, embedded on spin (x) boson.
pub fn standard_jump(kind: JumpKind, n_boson: usize) -> Result<Operator> {
    let id_b = operator::boson_identity(n_boson);
    match kind {
        JumpKind::SpinDephasing => embed(&sigma_z(), &id_b),
        JumpKind::SpontEmission => embed(&sigma_minus(), &id_b),
        JumpKind::SpontAbsorption => embed(&sigma_plus(), &id_b),
        JumpKind::BosonLeak => embed(&operator::spin_identity(), &fock_annihilate(n_boson)?),
        JumpKind::BosonHeat => {
            let a = fock_annihilate(n_boson)?;
            embed(&operator::spin_identity(), &a.dagger())
        }
        JumpKind::BosonDephasing => embed(&operator::spin_identity(), &fock_number(n_boson)?),
    }
}

/// A dissipation channel: a rate and a (possibly time-dependent) jump
/// operator.
#[derive(Clone)]
pub struct Channel {
    pub rate: f64,
    pub jump: Jump,
    pub label: String,
}

#[derive(Clone)]
pub enum Jump {
    Static(CMat),
    TimeDep(Arc<dyn Fn(f64) -> CMat + Send + Sync>),
}

impl std::fmt::Debug for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.jump {
            Jump::Static(_) => "static",
            Jump::TimeDep(_) => "time-dependent",
        };
        write!(f, "Channel({}, rate {:.3e}, {})", self.label, self.rate, kind)
    }
}

impl Channel {
    pub fn new_static(rate: f64, jump: CMat, label: impl Into<String>) -> Result<Self> {
        if rate < 0.0 {
            return Err(Error::InvalidParams(format!("negative rate {rate}")));
        }
        Ok(Self {
            rate,
            jump: Jump::Static(jump),
            label: label.into(),
        })
    }

    pub fn new_time_dep(
        rate: f64,
        jump: Arc<dyn Fn(f64) -> CMat + Send + Sync>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if rate < 0.0 {
            return Err(Error::InvalidParams(format!("negative rate {rate}")));
        }
        Ok(Self {
            rate,
            jump: Jump::TimeDep(jump),
            label: label.into(),
        })
    }

    pub fn eval(&self, t: f64) -> CMat {
        match &self.jump {
            Jump::Static(m) => m.clone(),
            Jump::TimeDep(f) => f(t),
        }
    }
}

/// Exact transformed jump: the frame map applied to `F` at time `t`, by
/// direct matrix conjugation. This is the reference the closed forms are
/// checked against.
pub fn transformed_jump_numeric(
    f: &Operator,
    t: f64,
    spec: &FrameSpec,
    n_boson: usize,
) -> Result<Operator> {
    if f.dim() != 2 * n_boson {
        return Err(Error::DimensionMismatch(
            "transformed_jump_numeric expects a composite operator".into(),
        ));
    }
    let map = FrameMap::new(*spec, n_boson)?;
    let g = map.eval(t);
    let out = linalg::matmul(&g, &linalg::matmul(f.mat(), &linalg::dagger(&g)));
    Operator::new(out, 2, n_boson)
}

/// Fast evaluator for the closed-form transformed jumps.
///
/// The only time dependence is through scalar phases and the displacement
/// `D(i eta e^{i (nu - nu~) tau})`, which is obtained from a fixed `D(i eta)`
/// by diagonal phase conjugation, so evaluation is O(d²).
pub struct ClosedFormJump {
    kind: JumpKind,
    spec: FrameSpec,
    n_boson: usize,
    /// D(i eta) on the boson factor (spin channels only).
    d_eta: Option<CMat>,
    /// annihilation operator (boson channels only).
    a_mat: Option<CMat>,
}

impl ClosedFormJump {
    pub fn new(kind: JumpKind, spec: FrameSpec, n_boson: usize) -> Result<Self> {
        let needs_d = matches!(
            kind,
            JumpKind::SpinDephasing | JumpKind::SpontEmission | JumpKind::SpontAbsorption
        );
        let d_eta = if needs_d {
            Some(displacement(C64::new(0.0, spec.eta), n_boson)?.into_mat())
        } else {
            None
        };
        let a_mat = if matches!(
            kind,
            JumpKind::BosonLeak | JumpKind::BosonHeat | JumpKind::BosonDephasing
        ) {
            Some(fock_annihilate(n_boson)?.into_mat())
        } else {
            None
        };
        Ok(Self {
            kind,
            spec,
            n_boson,
            d_eta,
            a_mat,
        })
    }

    pub fn eval(&self, t: f64) -> CMat {
        let n = self.n_boson;
        let d = 2 * n;
        let tau = t - self.spec.t0;
        let theta = (self.spec.nu - self.spec.nu_tilde) * tau;
        let mut out = CMat::zeros((d, d));
        match self.kind {
            JumpKind::SpinDephasing | JumpKind::SpontEmission | JumpKind::SpontAbsorption => {
                let dm = self.d_eta.as_ref().unwrap();
                let phases: Vec<C64> =
                    (0..n).map(|m| C64::new(0.0, theta * m as f64).exp()).collect();
                let spin_phase = C64::new(0.0, -tau * (self.spec.delta0 + self.spec.omega_tilde))
                    .exp();
                // (plus_coeff) s+ (x) D(tau) + (minus_coeff) s- (x) D†(tau) + z_coeff sz
                let (plus, minus, zc) = match self.kind {
                    JumpKind::SpinDephasing => (spin_phase, spin_phase.conj(), 0.0),
                    JumpKind::SpontEmission => {
                        (-0.5 * spin_phase, 0.5 * spin_phase.conj(), -0.5)
                    }
                    JumpKind::SpontAbsorption => {
                        (0.5 * spin_phase, -0.5 * spin_phase.conj(), -0.5)
                    }
                    _ => unreachable!(),
                };
                for i in 0..n {
                    for j in 0..n {
                        let dt_ij = phases[i] * dm[[i, j]] * phases[j].conj();
                        out[[i, n + j]] = plus * dt_ij;
                        out[[n + j, i]] = minus * dt_ij.conj();
                    }
                }
                for m in 0..n {
                    out[[m, m]] += zc;
                    out[[n + m, n + m]] -= zc;
                }
            }
            JumpKind::BosonLeak => {
                let a = self.a_mat.as_ref().unwrap();
                let ph = C64::new(0.0, -theta).exp();
                for s in 0..2 {
                    for i in 0..n {
                        for j in 0..n {
                            out[[s * n + i, s * n + j]] = ph * a[[i, j]];
                        }
                    }
                }
                let z = C64::new(0.0, -self.spec.eta / 2.0);
                for m in 0..n {
                    out[[m, m]] += z;
                    out[[n + m, n + m]] -= z;
                }
            }
            JumpKind::BosonHeat => {
                let a = self.a_mat.as_ref().unwrap();
                let ph = C64::new(0.0, theta).exp();
                for s in 0..2 {
                    for i in 0..n {
                        for j in 0..n {
                            out[[s * n + i, s * n + j]] = ph * a[[j, i]].conj();
                        }
                    }
                }
                let z = C64::new(0.0, self.spec.eta / 2.0);
                for m in 0..n {
                    out[[m, m]] += z;
                    out[[n + m, n + m]] -= z;
                }
            }
            JumpKind::BosonDephasing => {
                // a†a + (eta/2) sz (i a e^{-i theta} + H.c.); the additive
                // constant eta²/4 of the exact conjugation is dropped
                let a = self.a_mat.as_ref().unwrap();
                let ph = C64::new(0.0, -theta).exp() * C64::new(0.0, self.spec.eta / 2.0);
                for s in 0..2 {
                    let sign = if s == 0 { 1.0 } else { -1.0 };
                    for i in 0..n {
                        for j in 0..n {
                            let v = ph * a[[i, j]] * sign;
                            out[[s * n + i, s * n + j]] += v;
                            out[[s * n + j, s * n + i]] += v.conj();
                        }
                        out[[s * n + i, s * n + i]] += i as f64;
                    }
                }
            }
        }
        out
    }
}

/// The paper-catalogue closed form of a transformed standard jump at one
/// time. Additive constants on Hermitian jumps (boson dephasing) are
/// dropped; they leave the dissipator invariant.
pub fn transformed_jump_closed_form(
    kind: JumpKind,
    t: f64,
    spec: &FrameSpec,
    n_boson: usize,
) -> Result<Operator> {
    let cf = ClosedFormJump::new(kind, *spec, n_boson)?;
    Operator::new(cf.eval(t), 2, n_boson)
}

/// A channel whose jump is the exact transformed form of a standard jump,
/// evaluated on demand.
pub fn transformed_channel(
    kind: JumpKind,
    rate: f64,
    spec: &FrameSpec,
    n_boson: usize,
) -> Result<Channel> {
    let cf = ClosedFormJump::new(kind, *spec, n_boson)?;
    Channel::new_time_dep(
        rate,
        Arc::new(move |t| cf.eval(t)),
        format!("{}~", kind.label()),
    )
}

/// Static Lamb-Dicke approximation of a transformed channel, as a list of
/// channels with scaled rates.
pub fn approx_dissipator(
    kind: JumpKind,
    rate: f64,
    eta: f64,
    n_boson: usize,
) -> Result<Vec<Channel>> {
    let id_b = operator::boson_identity(n_boson);
    let sz = embed(&sigma_z(), &id_b)?.into_mat();
    let quarter = rate / 4.0;
    let eta_sq = rate * eta * eta / 4.0;
    let mk = |rate: f64, m: CMat, label: &str| Channel::new_static(rate, m, label);
    match kind {
        JumpKind::SpinDephasing => Ok(vec![mk(
            rate,
            embed(&sigma_x(), &id_b)?.into_mat(),
            "sd~sx",
        )?]),
        JumpKind::SpontEmission | JumpKind::SpontAbsorption => Ok(vec![
            mk(quarter, sz, &format!("{}~sz", kind.label()))?,
            mk(
                quarter,
                embed(&sigma_minus(), &id_b)?.into_mat(),
                &format!("{}~sm", kind.label()),
            )?,
            mk(
                quarter,
                embed(&sigma_plus(), &id_b)?.into_mat(),
                &format!("{}~sp", kind.label()),
            )?,
        ]),
        JumpKind::BosonLeak => Ok(vec![
            mk(
                rate,
                embed(&operator::spin_identity(), &fock_annihilate(n_boson)?)?.into_mat(),
                "bl~a",
            )?,
            mk(eta_sq, sz, "bl~sz")?,
        ]),
        JumpKind::BosonHeat => {
            let ad = fock_annihilate(n_boson)?.dagger();
            Ok(vec![
                mk(
                    rate,
                    embed(&operator::spin_identity(), &ad)?.into_mat(),
                    "bh~ad",
                )?,
                mk(eta_sq, sz, "bh~sz")?,
            ])
        }
        JumpKind::BosonDephasing => {
            let a = fock_annihilate(n_boson)?;
            let a_sz = embed(&sigma_z(), &a)?.into_mat();
            let ad_sz = embed(&sigma_z(), &a.dagger())?.into_mat();
            Ok(vec![
                mk(
                    rate,
                    embed(&operator::spin_identity(), &fock_number(n_boson)?)?.into_mat(),
                    "bd~n",
                )?,
                mk(eta_sq, a_sz, "bd~asz")?,
                mk(eta_sq, ad_sz, "bd~adsz")?,
            ])
        }
    }
}

/// A jump operator to place in the physical-frame master equation so that
/// the simulated frame sees the requested standard channel.
pub struct EngineeredSource {
    pub channel: Channel,
    /// Whether the source is a single static operator (true for spontaneous
    /// emission/absorption, whose residual time dependence is a global
    /// phase).
    pub is_static: bool,
}

pub fn engineered_source(
    target: JumpKind,
    rate: f64,
    spec: &FrameSpec,
    n_boson: usize,
) -> Result<EngineeredSource> {
    match target {
        JumpKind::SpontEmission | JumpKind::SpontAbsorption => {
            // (1/2) D(±i eta) (sz ∓ i sy); time dependence is a global phase
            let sign = if target == JumpKind::SpontEmission {
                1.0
            } else {
                -1.0
            };
            let d = displacement(C64::new(0.0, sign * spec.eta), n_boson)?;
            let n = n_boson;
            let mut mat = CMat::zeros((2 * n, 2 * n));
            // sz - i sy = [[1,-1],[1,-1]]; sz + i sy = [[1,1],[-1,-1]]
            let blocks = if sign > 0.0 {
                [[1.0, -1.0], [1.0, -1.0]]
            } else {
                [[1.0, 1.0], [-1.0, -1.0]]
            };
            for (si, row) in blocks.iter().enumerate() {
                for (sj, &b) in row.iter().enumerate() {
                    for i in 0..n {
                        for j in 0..n {
                            mat[[si * n + i, sj * n + j]] = 0.5 * b * d.mat()[[i, j]];
                        }
                    }
                }
            }
            Ok(EngineeredSource {
                channel: Channel::new_static(rate, mat, format!("eng_{}", target.label()))?,
                is_static: true,
            })
        }
        _ => {
            let map = FrameMap::new(*spec, n_boson)?;
            let f_target = standard_jump(target, n_boson)?.into_mat();
            let label = format!("eng_{}", target.label());
            let jump = Arc::new(move |t: f64| {
                let g = map.eval(t);
                linalg::matmul(
                    &linalg::dagger(&g),
                    &linalg::matmul(&f_target, &g),
                )
            });
            Ok(EngineeredSource {
                channel: Channel::new_time_dep(rate, jump, label)?,
                is_static: false,
            })
        }
    }
}

/// Frequency-dependent rate profile for dressed-basis dissipation.
#[derive(Debug, Clone, Copy)]
pub enum SpectralRate {
    /// Frequency-independent rate (the default used by the scenarios).
    Flat(f64),
    /// Ohmic profile peaking at the cutoff, zero at and below zero
    /// frequency: `gamma (w/wc) exp(1 - w/wc)`.
    Ohmic { gamma_peak: f64, cutoff: f64 },
}

impl SpectralRate {
    pub fn eval(&self, omega: f64) -> f64 {
        match *self {
            Self::Flat(g) => g,
            Self::Ohmic { gamma_peak, cutoff } => {
                if omega <= 0.0 {
                    0.0
                } else {
                    gamma_peak * (omega / cutoff) * (1.0 - omega / cutoff).exp()
                }
            }
        }
    }
}

/// Zero-temperature dressed-basis dissipation for a static Hamiltonian:
/// one diagonal pure-dephasing operator plus rank-one channels between
/// eigenstates, with rates evaluated at the transition frequencies.
pub struct DressedDissipators {
    /// Eigenbasis, columns ordered ascending in energy (ties broken by
    /// descending spin polarization, then descending occupation).
    pub basis: CMat,
    pub energies: Vec<f64>,
    /// Diagonal entries of the dephasing operator in the eigenbasis.
    pub dephasing_diag: Vec<f64>,
    /// `rates[(j, k)]` is the total downward rate k -> j (j != k entries
    /// from spin dephasing; k > j additionally from boson leakage).
    pub rates: ndarray::Array2<f64>,
    pub degenerate: bool,
}

pub fn dressed_dissipators(
    h: &Operator,
    gamma_sd: &SpectralRate,
    gamma_bl: &SpectralRate,
    n_boson: usize,
) -> Result<DressedDissipators> {
    if h.dim() != 2 * n_boson {
        return Err(Error::DimensionMismatch(
            "dressed_dissipators expects a composite Hamiltonian".into(),
        ));
    }
    let eig = linalg::eigh(h.mat())?;
    let d = 2 * n_boson;
    let sz = embed(&sigma_z(), &operator::boson_identity(n_boson))?;
    let a = fock_annihilate(n_boson)?;
    let x_op = {
        let x = a.mat() + &linalg::dagger(a.mat());
        linalg::kron(&linalg::identity(2), &x)
    };
    let num = embed(&operator::spin_identity(), &fock_number(n_boson)?)?;
    // diagnostic expectations for the tie-break ordering
    let span = eig.values.last().unwrap() - eig.values.first().unwrap();
    let tie_tol = 1e-9 * span.max(1e-30);
    let sz_v = linalg::matmul(
        &linalg::dagger(&eig.vectors),
        &linalg::matmul(sz.mat(), &eig.vectors),
    );
    let n_v = linalg::matmul(
        &linalg::dagger(&eig.vectors),
        &linalg::matmul(num.mat(), &eig.vectors),
    );
    let mut order: Vec<usize> = (0..d).collect();
    let key = |i: usize| (eig.values[i], sz_v[[i, i]].re, n_v[[i, i]].re);
    order.sort_by(|&i, &j| {
        let (ei, si, ni) = key(i);
        let (ej, sj, nj) = key(j);
        if (ei - ej).abs() > tie_tol {
            ei.partial_cmp(&ej).unwrap()
        } else if (si - sj).abs() > 1e-12 {
            sj.partial_cmp(&si).unwrap()
        } else {
            nj.partial_cmp(&ni).unwrap()
        }
    });
    let mut degenerate = false;
    for w in order.windows(2) {
        if (eig.values[w[1]] - eig.values[w[0]]).abs() <= tie_tol {
            degenerate = true;
        }
    }
    if degenerate {
        log::warn!("dressed basis: degenerate eigenvalues; ordering fixed by spin/occupation");
    }
    let mut basis = CMat::zeros((d, d));
    let mut energies = Vec::with_capacity(d);
    for (col, &i) in order.iter().enumerate() {
        energies.push(eig.values[i]);
        for row in 0..d {
            basis[[row, col]] = eig.vectors[[row, i]];
        }
    }
    let sz_d = linalg::matmul(&linalg::dagger(&basis), &linalg::matmul(sz.mat(), &basis));
    let x_d = linalg::matmul(&linalg::dagger(&basis), &linalg::matmul(&x_op, &basis));
    let g_sd0 = gamma_sd.eval(0.0);
    let dephasing_diag: Vec<f64> = (0..d).map(|k| g_sd0.sqrt() * sz_d[[k, k]].re).collect();
    let mut rates = ndarray::Array2::<f64>::zeros((d, d));
    for j in 0..d {
        for k in 0..d {
            if j == k {
                continue;
            }
            let omega = energies[k] - energies[j];
            let mut r = gamma_sd.eval(omega) * sz_d[[j, k]].norm_sqr();
            if k > j {
                r += gamma_bl.eval(omega) * x_d[[j, k]].norm_sqr();
            }
            rates[[j, k]] = r;
        }
    }
    Ok(DressedDissipators {
        basis,
        energies,
        dephasing_diag,
        rates,
        degenerate,
    })
}

impl DressedDissipators {
    /// Explicit channel list: the diagonal dephasing operator (rate 1, the
    /// rate is folded into the operator) and one rank-one channel per
    /// nonzero transition rate.
    pub fn channels(&self) -> Vec<Channel> {
        let d = self.energies.len();
        let mut out = Vec::new();
        let mut a_diag = CMat::zeros((d, d));
        for k in 0..d {
            a_diag[[k, k]] = C64::new(self.dephasing_diag[k], 0.0);
        }
        let a_full = linalg::matmul(
            &self.basis,
            &linalg::matmul(&a_diag, &linalg::dagger(&self.basis)),
        );
        out.push(Channel::new_static(1.0, a_full, "dressed_deph").expect("rate 1"));
        let max_rate = self.rates.iter().fold(0.0f64, |acc, &r| acc.max(r));
        for j in 0..d {
            for k in 0..d {
                let r = self.rates[[j, k]];
                if r > 1e-14 * max_rate.max(1e-300) {
                    let b = linalg::matmul(
                        &self.basis,
                        &linalg::matmul(&ketbra(j, k, d), &linalg::dagger(&self.basis)),
                    );
                    out.push(
                        Channel::new_static(r, b, format!("dressed_{j}_{k}")).expect("rate >= 0"),
                    );
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, matmul, max_abs, max_abs_diff};
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

    fn dissipator_action(f: &CMat, rho: &CMat) -> CMat {
        let fd = dagger(f);
        let ff = matmul(&fd, f);
        let mut out = matmul(f, &matmul(rho, &fd));
        let anti = matmul(&ff, rho) + matmul(rho, &ff);
        out.zip_mut_with(&anti, |x, &y| *x -= 0.5 * y);
        out
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
    fn standard_jump_structure() {
        let n = 5;
        let sz = standard_jump(JumpKind::SpinDephasing, n).unwrap();
        for m in 0..n {
            assert_eq!(sz.mat()[[m, m]], C64::new(1.0, 0.0));
            assert_eq!(sz.mat()[[n + m, n + m]], C64::new(-1.0, 0.0));
        }
        let bl = standard_jump(JumpKind::BosonLeak, n).unwrap();
        assert_eq!(bl.mat()[[0, 1]], C64::new(1.0, 0.0));
        assert_eq!(bl.mat()[[n, n + 1]], C64::new(1.0, 0.0));
        // s+s- + s-s+ = 1
        let sp = standard_jump(JumpKind::SpontAbsorption, n).unwrap();
        let sm = standard_jump(JumpKind::SpontEmission, n).unwrap();
        let sum = &matmul(sp.mat(), sm.mat()) + &matmul(sm.mat(), sp.mat());
        assert!(max_abs_diff(&sum, &linalg::identity(2 * n)) == 0.0);
    }

    #[test]
    fn closed_form_matches_numeric_all_kinds() {
        let n = 20;
        let f = spec(0.35, 60.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let keep = n - 10;
        for kind in JumpKind::ALL {
            let bare = standard_jump(kind, n).unwrap();
            for _ in 0..6 {
                let t: f64 = rng.gen_range(0.0..400.0);
                let num = transformed_jump_numeric(&bare, t, &f, n).unwrap();
                let cf = transformed_jump_closed_form(kind, t, &f, n).unwrap();
                let mut shift = CMat::zeros((2 * n, 2 * n));
                if kind == JumpKind::BosonDephasing {
                    // the closed form drops the constant eta^2/4
                    let c = f.eta * f.eta / 4.0;
                    for i in 0..2 * n {
                        shift[[i, i]] = C64::new(c, 0.0);
                    }
                }
                let mut worst = 0.0f64;
                for si in 0..2 {
                    for sj in 0..2 {
                        for i in 0..keep {
                            for j in 0..keep {
                                let (r, c_) = (si * n + i, sj * n + j);
                                let diff =
                                    (num.mat()[[r, c_]] - cf.mat()[[r, c_]] - shift[[r, c_]])
                                        .norm();
                                worst = worst.max(diff);
                            }
                        }
                    }
                }
                assert!(worst <= 1e-8, "{kind:?} at t={t}: {worst:.2e}");
            }
        }
    }

    #[test]
    fn sx_transforms_to_minus_sz() {
        let n = 12;
        let f = spec(0.5, 40.0);
        let sx = embed(&sigma_x(), &operator::boson_identity(n)).unwrap();
        for t in [0.0, 3.3, 47.0] {
            let tr = transformed_jump_numeric(&sx, t, &f, n).unwrap();
            let msz = embed(&sigma_z(), &operator::boson_identity(n))
                .unwrap()
                .scaled(C64::new(-1.0, 0.0));
            assert!(max_abs_diff(tr.mat(), msz.mat()) <= 1e-10);
        }
    }

    #[test]
    fn spin_dephasing_lamb_dicke_limit() {
        // eta -> 0 at t = 0: the transformed dephasing jump reduces to sx
        let n = 8;
        let f = spec(1e-9, 50.0);
        let cf = transformed_jump_closed_form(JumpKind::SpinDephasing, 0.0, &f, n).unwrap();
        let sx = embed(&sigma_x(), &operator::boson_identity(n)).unwrap();
        assert!(max_abs_diff(cf.mat(), sx.mat()) <= 1e-8);
    }

    #[test]
    fn emission_closed_form_at_t0() {
        // (1/2)(-sz - D(i eta) s+ + D†(i eta) s-)
        let n = 14;
        let f = spec(0.4, 50.0);
        let cf = transformed_jump_closed_form(JumpKind::SpontEmission, 0.0, &f, n).unwrap();
        let d = displacement(C64::new(0.0, f.eta), n).unwrap();
        let mut expected = CMat::zeros((2 * n, 2 * n));
        for i in 0..n {
            for j in 0..n {
                expected[[i, n + j]] = -0.5 * d.mat()[[i, j]];
                expected[[n + j, i]] = 0.5 * d.mat()[[i, j]].conj();
            }
        }
        for m in 0..n {
            expected[[m, m]] -= 0.5;
            expected[[n + m, n + m]] += 0.5;
        }
        assert!(max_abs_diff(cf.mat(), &expected) <= 1e-12);
    }

    #[test]
    fn approx_lists() {
        let n = 6;
        let eta = 0.05;
        let sd = approx_dissipator(JumpKind::SpinDephasing, 1.0, eta, n).unwrap();
        assert_eq!(sd.len(), 1);
        assert_eq!(sd[0].rate, 1.0);
        let bl = approx_dissipator(JumpKind::BosonLeak, 1.0, eta, n).unwrap();
        assert_eq!(bl.len(), 2);
        assert!((bl[1].rate - 6.25e-4).abs() <= 1e-18);
        let bh = approx_dissipator(JumpKind::BosonHeat, 1.0, eta, n).unwrap();
        let ad = fock_annihilate(n).unwrap().dagger();
        let expect = embed(&operator::spin_identity(), &ad).unwrap();
        match &bh[0].jump {
            Jump::Static(m) => assert!(max_abs_diff(m, expect.mat()) == 0.0),
            _ => panic!("static expected"),
        }
        let se = approx_dissipator(JumpKind::SpontEmission, 1.0, eta, n).unwrap();
        assert_eq!(se.len(), 3);
        assert!(se.iter().all(|c| (c.rate - 0.25).abs() < 1e-15));
    }

    #[test]
    fn engineered_emission_superaction() {
        let n = 18;
        for eta in [0.1, 0.639, 0.8] {
            let f = spec(eta, 60.0);
            let src = engineered_source(JumpKind::SpontEmission, 1.0, &f, n).unwrap();
            assert!(src.is_static);
            let map = FrameMap::new(f, n).unwrap();
            let target = standard_jump(JumpKind::SpontEmission, n).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
            for trial in 0..4 {
                let rho = random_density(n, 100 + trial);
                let t: f64 = rng.gen_range(0.0..200.0);
                let g = map.eval(t);
                let f_src = src.channel.eval(t);
                let transformed = matmul(&g, &matmul(&f_src, &dagger(&g)));
                let lhs = dissipator_action(&transformed, &rho);
                let rhs = dissipator_action(target.mat(), &rho);
                assert!(
                    max_abs_diff(&lhs, &rhs) <= 1e-8,
                    "eta={eta} trial={trial}: {:.2e}",
                    max_abs_diff(&lhs, &rhs)
                );
            }
        }
    }

    #[test]
    fn engineered_eta_zero_is_spin_jump_in_rotated_basis() {
        let n = 6;
        let f = spec(0.0, 50.0);
        let src = engineered_source(JumpKind::SpontEmission, 1.0, &f, n).unwrap();
        let m = src.channel.eval(0.0);
        // (1/2)(sz - i sy) (x) 1
        let mut expected = CMat::zeros((2 * n, 2 * n));
        for k in 0..n {
            expected[[k, k]] = C64::new(0.5, 0.0);
            expected[[k, n + k]] = C64::new(-0.5, 0.0);
            expected[[n + k, k]] = C64::new(0.5, 0.0);
            expected[[n + k, n + k]] = C64::new(-0.5, 0.0);
        }
        assert!(max_abs_diff(&m, &expected) <= 1e-12);
    }

    #[test]
    fn engineered_time_dependent_target_flagged() {
        let n = 8;
        let f = spec(0.3, 50.0);
        let src = engineered_source(JumpKind::BosonLeak, 1.0, &f, n).unwrap();
        assert!(!src.is_static);
        // the source conjugates back to the target exactly
        let map = FrameMap::new(f, n).unwrap();
        let target = standard_jump(JumpKind::BosonLeak, n).unwrap();
        let t = 11.3;
        let g = map.eval(t);
        let back = matmul(&g, &matmul(&src.channel.eval(t), &dagger(&g)));
        assert!(max_abs_diff(&back, target.mat()) <= 1e-9);
    }

    #[test]
    fn dissipator_phase_invariance() {
        // D_{e^{i theta} F} = D_F exactly
        let n = 6;
        let f = standard_jump(JumpKind::SpontEmission, n).unwrap();
        let rho = random_density(n, 1);
        let lhs = dissipator_action(&f.mat().mapv(|z| z * C64::new(0.0, 0.73).exp()), &rho);
        let rhs = dissipator_action(f.mat(), &rho);
        assert!(max_abs_diff(&lhs, &rhs) <= 1e-15);
    }

    #[test]
    fn dissipator_hermitian_shift_invariance() {
        // D_{F + c} = D_F for Hermitian F and real c
        let n = 6;
        let f = standard_jump(JumpKind::BosonDephasing, n).unwrap();
        let rho = random_density(n, 2);
        let mut shifted = f.mat().clone();
        for i in 0..2 * n {
            shifted[[i, i]] += 0.37;
        }
        let lhs = dissipator_action(&shifted, &rho);
        let rhs = dissipator_action(f.mat(), &rho);
        assert!(max_abs_diff(&lhs, &rhs) <= 1e-13 * max_abs(&rhs).max(1.0));
    }

    #[test]
    fn dressed_reduces_to_bare_at_zero_coupling() {
        // eta = 0, flat rates: leakage channels are |m-1,s><m,s| with rate
        // gamma m, and the dephasing operator is sqrt(gamma_sd) sz
        let n = 6;
        let p = crate::model::SystemParams {
            nu: 1.0,
            eta: 0.0,
            nu_tilde: 0.0,
            omega_tilde: 0.0,
            drivings: vec![crate::model::DrivingTerm {
                amplitude: 0.3,
                detuning: 0.0,
            }],
            red: vec![],
            blue: vec![],
            t0: 0.0,
        };
        let h = crate::model::build_hg(&p, 0.0, n).unwrap();
        let gamma_sd = SpectralRate::Flat(0.01);
        let gamma_bl = SpectralRate::Flat(0.1);
        let dd = dressed_dissipators(&h, &gamma_sd, &gamma_bl, n).unwrap();
        for k in 0..2 * n {
            assert!((dd.dephasing_diag[k].abs() - 0.1).abs() <= 1e-9);
        }
        // heating (upward) channels absent: rates from bl only for k > j
        let num = embed(&operator::spin_identity(), &fock_number(n).unwrap()).unwrap();
        let n_diag: Vec<f64> = (0..2 * n)
            .map(|k| {
                let col = dd.basis.column(k);
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..2 * n {
                    for j in 0..2 * n {
                        acc += col[i].conj() * num.mat()[[i, j]] * col[j];
                    }
                }
                acc.re
            })
            .collect();
        for k in 0..2 * n {
            let m_k = n_diag[k].round();
            let total_down: f64 = (0..2 * n)
                .filter(|&j| j != k)
                .map(|j| dd.rates[[j, k]])
                .sum();
            // spin-dephasing contributes nothing off-diagonal at eta = 0
            assert!(
                (total_down - 0.1 * m_k).abs() <= 1e-8,
                "state {k}: total rate {total_down} vs {}",
                0.1 * m_k
            );
        }
        // no channel moves occupation upward
        for j in 0..2 * n {
            for k in 0..2 * n {
                if dd.rates[[j, k]] > 1e-12 {
                    assert!(n_diag[j] < n_diag[k] + 1e-6);
                }
            }
        }
    }
}
