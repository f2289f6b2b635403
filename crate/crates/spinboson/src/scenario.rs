//! Config-driven orchestration: load a scenario, build the physical and
//! simulated problems, evolve both, compare through the frame map, and emit
//! CSV.
//!
//! All configured frequencies are ratios (`*_over_nu_tilde`), so changing
//! the hierarchy factor `scale = nu / nu_tilde` is a one-knob operation.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::density::{
    coherent_state, fock_vector, product_state, spin_pure, thermal_state, DensityMatrix,
    SpinState,
};
use crate::dissipator::{
    approx_dissipator, dressed_dissipators, engineered_source, standard_jump,
    transformed_channel, Channel, JumpKind, SpectralRate,
};
use crate::error::{Error, Result};
use crate::frame::{FrameMap, FrameSpec};
use crate::lindblad::{
    evolve, linear_grid, Dissipation, EvolutionProblem, Hamiltonian, Observable, Trajectory,
};
use crate::linalg::CMat;
use crate::model::{
    build_hg_static_part, build_target, f_n_at_vacuum, sideband_frequency, CouplingQuadrature,
    DrivingTerm, Sideband, SystemParams,
};

/// Reporting floor for infidelities (values below are clamped up to it).
pub const INFIDELITY_FLOOR: f64 = 1e-6;
/// Smallest allowed frequency hierarchy `nu / nu_tilde`.
pub const MIN_SCALE: f64 = 50.0;

// ---------------------------------------------------------------------------
// configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub model: ModelSection,
    #[serde(default)]
    pub dissipation: DissipationSection,
    pub initial: InitialSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub name: String,
    /// Frequency hierarchy nu / nu_tilde.
    pub scale: f64,
    /// Fock truncation N.
    pub dim: usize,
    /// Integrator steps per boson period (dt = 2 pi / (k nu)).
    #[serde(default = "default_steps")]
    pub steps_per_period: usize,
    /// Scale used by the source publication, for `--paper-scale` runs.
    #[serde(default)]
    pub paper_scale: Option<f64>,
}

fn default_steps() -> usize {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSection {
    /// Dimensionless coupling; may be omitted when derivable from a driving
    /// that fixes both its amplitude and its effective coupling.
    #[serde(default)]
    pub eta: Option<f64>,
    pub omega_tilde_over_nu_tilde: f64,
    /// Use the Fock-dependent (nonlinear) target Hamiltonian.
    #[serde(default)]
    pub nonlinear: bool,
    pub drivings: Vec<DrivingConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrivingConfig {
    /// "red" or "blue".
    pub side: String,
    pub order: usize,
    /// Amplitude Omega / nu_tilde.
    #[serde(default)]
    pub omega_over_nu_tilde: Option<f64>,
    /// Lamb-Dicke effective coupling g / nu_tilde (g = eta^n Omega / 2 n!).
    #[serde(default)]
    pub g_over_nu_tilde: Option<f64>,
    /// Coupling in the f_n-based convention: g_f = Omega |f_n(0)| / 2.
    #[serde(default)]
    pub g_f_over_nu_tilde: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DissipationSection {
    #[serde(default)]
    pub channels: Vec<ChannelConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// One of sd/se/sa/bl/bh/bd or the long names.
    pub kind: String,
    pub rate_over_nu_tilde: f64,
    /// "exact_transformed", "approx_static" or "dressed".
    #[serde(default = "default_mode")]
    pub mode: String,
    /// The channel kind names the process wanted in the simulated frame;
    /// the physical frame gets the engineered source operator.
    #[serde(default)]
    pub engineered: bool,
    /// "flat" (default) or "ohmic:<peak_over_nu>"; dressed mode only.
    #[serde(default)]
    pub spectral: Option<String>,
}

fn default_mode() -> String {
    "exact_transformed".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialSection {
    /// "fock:M", "coherent:RE[,IM]" (in units of 1), or "thermal:NBAR".
    pub boson: String,
    /// "e", "g", "+", "-".
    pub spin: String,
    /// Which frame the initial state is stated in: "target" or "physical".
    #[serde(default = "default_frame")]
    pub frame: String,
}

fn default_frame() -> String {
    "target".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSection {
    /// End time in units of 1/nu_tilde.
    pub t_end_over_nu_tilde: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub observables: Vec<String>,
    /// Output CSV path (joined with the CLI --out directory when relative).
    #[serde(default)]
    pub out: Option<String>,
}

fn default_samples() -> usize {
    80
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("TOML parse: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DissipationMode {
    ExactTransformed,
    ApproxStatic,
    Dressed,
}

impl DissipationMode {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "exact_transformed" => Ok(Self::ExactTransformed),
            "approx_static" => Ok(Self::ApproxStatic),
            "dressed" => Ok(Self::Dressed),
            other => Err(Error::Config(format!("unknown dissipation mode `{other}`"))),
        }
    }
}

struct ResolvedChannel {
    kind: JumpKind,
    rate: f64,
    mode: DissipationMode,
    engineered: bool,
    spectral: SpectralRate,
}

/// A fully specified scenario with concrete frequencies.
pub struct Resolved {
    pub name: String,
    pub params: SystemParams,
    pub nonlinear: bool,
    pub n_boson: usize,
    pub dt: f64,
    pub t_grid: Vec<f64>,
    pub observables: Vec<Observable>,
    channels: Vec<ResolvedChannel>,
    initial_boson: String,
    initial_spin: SpinState,
    initial_frame_target: bool,
    pub out: Option<String>,
}

fn parse_boson_state(s: &str, n: usize) -> Result<DensityMatrix> {
    if let Some(m) = s.strip_prefix("fock:") {
        let m: usize = m
            .parse()
            .map_err(|_| Error::Config(format!("bad fock index in `{s}`")))?;
        return DensityMatrix::from_pure(&fock_vector(m, n)?, 1, n);
    }
    if let Some(rest) = s.strip_prefix("coherent:") {
        let mut parts = rest.split(',');
        let re: f64 = parts
            .next()
            .and_then(|x| x.parse().ok())
            .ok_or_else(|| Error::Config(format!("bad coherent amplitude in `{s}`")))?;
        let im: f64 = match parts.next() {
            None => 0.0,
            Some(x) => x
                .parse()
                .map_err(|_| Error::Config(format!("bad coherent amplitude in `{s}`")))?,
        };
        return coherent_state(C64::new(re, im), n);
    }
    if let Some(nbar) = s.strip_prefix("thermal:") {
        let nbar: f64 = nbar
            .parse()
            .map_err(|_| Error::Config(format!("bad thermal occupation in `{s}`")))?;
        return thermal_state(nbar, n);
    }
    Err(Error::Config(format!("unknown boson state `{s}`")))
}

fn parse_spectral(s: &Option<String>, rate: f64) -> Result<SpectralRate> {
    match s.as_deref() {
        None | Some("flat") => Ok(SpectralRate::Flat(rate)),
        Some(rest) if rest.starts_with("ohmic:") => {
            let cutoff: f64 = rest[6..]
                .parse()
                .map_err(|_| Error::Config(format!("bad spectral profile `{rest}`")))?;
            Ok(SpectralRate::Ohmic {
                gamma_peak: rate,
                cutoff,
            })
        }
        Some(other) => Err(Error::Config(format!("unknown spectral profile `{other}`"))),
    }
}

pub fn resolve(cfg: &ScenarioConfig) -> Result<Resolved> {
    let scale = cfg.scenario.scale;
    if !(MIN_SCALE..=1e7).contains(&scale) {
        return Err(Error::Config(format!(
            "scale {scale} outside [{MIN_SCALE}, 1e7]; the mapping needs nu_tilde << nu"
        )));
    }
    let nu = 1.0;
    let nu_tilde = nu / scale;
    let omega_tilde = cfg.model.omega_tilde_over_nu_tilde * nu_tilde;
    let n_boson = cfg.scenario.dim;
    if n_boson < 2 {
        return Err(Error::Config("dim must be at least 2".into()));
    }
    if cfg.model.drivings.is_empty() {
        return Err(Error::Config("at least one driving is required".into()));
    }
    // eta: explicit, or derived from a driving that pins both amplitude and
    // coupling
    let eta = match cfg.model.eta {
        Some(e) => e,
        None => {
            let mut found = None;
            for d in &cfg.model.drivings {
                if let (Some(om), Some(g)) = (d.omega_over_nu_tilde, d.g_over_nu_tilde) {
                    let fact: f64 = (1..=d.order).map(|k| k as f64).product();
                    found = Some((2.0 * g * fact / om).powf(1.0 / d.order as f64));
                    break;
                }
            }
            found.ok_or_else(|| {
                Error::Config(
                    "eta not given and no driving specifies both omega and g".into(),
                )
            })?
        }
    };
    let mut drivings = Vec::new();
    let mut red = Vec::new();
    let mut blue = Vec::new();
    for d in &cfg.model.drivings {
        let side = match d.side.as_str() {
            "red" => Sideband::Red,
            "blue" => Sideband::Blue,
            other => return Err(Error::Config(format!("unknown sideband side `{other}`"))),
        };
        let fact: f64 = (1..=d.order).map(|k| k as f64).product();
        let amplitude = if let Some(om) = d.omega_over_nu_tilde {
            om * nu_tilde
        } else if let Some(g) = d.g_over_nu_tilde {
            2.0 * g * nu_tilde * fact / eta.powi(d.order as i32)
        } else if let Some(gf) = d.g_f_over_nu_tilde {
            let f0 = f_n_at_vacuum(d.order, eta).norm();
            if f0 == 0.0 {
                return Err(Error::Config("f_n(0) vanishes; cannot fix amplitude".into()));
            }
            2.0 * gf * nu_tilde / f0
        } else {
            return Err(Error::Config(format!(
                "driving (side {}, order {}) needs omega, g or g_f",
                d.side, d.order
            )));
        };
        let detuning = sideband_frequency(d.order, side, nu, nu_tilde, omega_tilde);
        drivings.push(DrivingTerm {
            amplitude,
            detuning,
        });
        match side {
            Sideband::Red => red.push(d.order),
            Sideband::Blue => blue.push(d.order),
        }
    }
    let params = SystemParams {
        nu,
        eta,
        nu_tilde,
        omega_tilde,
        drivings,
        red,
        blue,
        t0: 0.0,
    };
    params.validate()?;
    let mut channels = Vec::new();
    for c in &cfg.dissipation.channels {
        let kind = JumpKind::parse(&c.kind)?;
        let rate = c.rate_over_nu_tilde * nu_tilde;
        if rate < 0.0 {
            return Err(Error::Config("negative channel rate".into()));
        }
        channels.push(ResolvedChannel {
            kind,
            rate,
            mode: DissipationMode::parse(&c.mode)?,
            engineered: c.engineered,
            spectral: parse_spectral(&c.spectral, rate)?,
        });
    }
    let dressed_count = channels
        .iter()
        .filter(|c| c.mode == DissipationMode::Dressed)
        .count();
    if dressed_count > 0 && dressed_count != channels.len() {
        return Err(Error::Config(
            "dressed mode applies to the whole scenario; mixed modes are not supported".into(),
        ));
    }
    let dt = 2.0 * std::f64::consts::PI / (cfg.scenario.steps_per_period as f64 * nu);
    let t_end = cfg.run.t_end_over_nu_tilde / nu_tilde;
    let t_grid = linear_grid(0.0, t_end, cfg.run.samples);
    let mut observables = Vec::new();
    for o in &cfg.run.observables {
        observables.push(Observable::parse(o)?);
    }
    Ok(Resolved {
        name: cfg.scenario.name.clone(),
        params,
        nonlinear: cfg.model.nonlinear,
        n_boson,
        dt,
        t_grid,
        observables,
        channels,
        initial_boson: cfg.initial.boson.clone(),
        initial_spin: SpinState::parse(&cfg.initial.spin)?,
        initial_frame_target: match cfg.initial.frame.as_str() {
            "target" => true,
            "physical" => false,
            other => return Err(Error::Config(format!("unknown frame `{other}`"))),
        },
        out: cfg.run.out.clone(),
    })
}

// ---------------------------------------------------------------------------
// running
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ResultRow {
    pub t: f64,
    pub target_obs: Vec<f64>,
    pub mapped_obs: Vec<f64>,
    pub fidelity: f64,
    pub infidelity: f64,
    pub purity_g: f64,
    pub purity_target: f64,
    pub leakage_g: f64,
    pub leakage_target: f64,
    pub trace_dev_g: f64,
    pub trace_dev_target: f64,
    pub quality: String,
}

#[derive(Debug, Clone)]
pub struct Summary {
    pub name: String,
    pub max_infidelity: f64,
    pub final_fidelity: f64,
    pub final_purity_g: f64,
    pub final_purity_target: f64,
    pub max_leakage: f64,
    pub wall_seconds: f64,
    pub quality_ok: bool,
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "scenario {}: max_infidelity={:.3e} final_fidelity={:.6} purity_g={:.6} \
             purity_target={:.6} max_leakage={:.2e} quality={} wall={:.1}s",
            self.name,
            self.max_infidelity,
            self.final_fidelity,
            self.final_purity_g,
            self.final_purity_target,
            self.max_leakage,
            if self.quality_ok { "ok" } else { "degraded" },
            self.wall_seconds
        )
    }
}

pub struct ScenarioResult {
    pub header: Vec<String>,
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
    pub traj_g: Trajectory,
    pub traj_target: Option<Trajectory>,
    /// `Gamma rho_G Gamma†` at the final sample.
    pub mapped_final: CMat,
}

/// Reusable evaluator for the physical Hamiltonian over time.
struct HgEvaluator {
    static_part: CMat,
    sz: CMat,
    sy: CMat,
    amps: Vec<f64>,
    deltas: Vec<f64>,
}

impl HgEvaluator {
    fn new(p: &SystemParams, n_boson: usize) -> Result<Self> {
        let static_part = build_hg_static_part(p, n_boson, CouplingQuadrature::Momentum)?;
        let id_b = crate::operator::boson_identity(n_boson);
        let sz = crate::operator::embed(&crate::operator::sigma_z(), &id_b)?.into_mat();
        let sy = crate::operator::embed(&crate::operator::sigma_y(), &id_b)?.into_mat();
        Ok(Self {
            static_part,
            sz,
            sy,
            amps: p.drivings.iter().map(|d| d.amplitude).collect(),
            deltas: (0..p.drivings.len()).map(|j| p.big_delta(j)).collect(),
        })
    }

    fn eval(&self, t: f64) -> CMat {
        let mut h = self.static_part.clone();
        let mut cz = 0.0;
        let mut cy = 0.0;
        for (a, d) in self.amps.iter().zip(&self.deltas) {
            cz += a / 2.0 * (d * t).cos();
            cy += a / 2.0 * (d * t).sin();
        }
        h.zip_mut_with(&self.sz, |x, &y| *x += y * cz);
        h.zip_mut_with(&self.sy, |x, &y| *x += y * cy);
        h
    }

    fn is_static(&self) -> bool {
        self.deltas.iter().all(|&d| d == 0.0)
    }
}

fn initial_states(r: &Resolved, map: &FrameMap) -> Result<(DensityMatrix, DensityMatrix)> {
    let boson = parse_boson_state(&r.initial_boson, r.n_boson)?;
    let stated = product_state(&spin_pure(r.initial_spin), &boson)?;
    let t0 = r.t_grid[0];
    if r.initial_frame_target {
        let rho_g = map.apply_inverse(stated.mat(), t0);
        Ok((DensityMatrix::new(rho_g, 2, r.n_boson)?, stated))
    } else {
        let rho_n = map.apply(stated.mat(), t0);
        Ok((stated, DensityMatrix::new(rho_n, 2, r.n_boson)?))
    }
}

fn physical_channels(r: &Resolved, spec: &FrameSpec) -> Result<Vec<Channel>> {
    let mut out = Vec::new();
    for c in &r.channels {
        if c.engineered {
            out.push(engineered_source(c.kind, c.rate, spec, r.n_boson)?.channel);
        } else {
            out.push(Channel::new_static(
                c.rate,
                standard_jump(c.kind, r.n_boson)?.into_mat(),
                c.kind.label(),
            )?);
        }
    }
    Ok(out)
}

fn target_channels(r: &Resolved, spec: &FrameSpec) -> Result<Vec<Channel>> {
    let mut out = Vec::new();
    for c in &r.channels {
        if c.engineered {
            // the simulated frame sees the named process directly
            out.push(Channel::new_static(
                c.rate,
                standard_jump(c.kind, r.n_boson)?.into_mat(),
                c.kind.label(),
            )?);
            continue;
        }
        match c.mode {
            DissipationMode::ExactTransformed => {
                out.push(transformed_channel(c.kind, c.rate, spec, r.n_boson)?);
            }
            DissipationMode::ApproxStatic => {
                out.extend(approx_dissipator(c.kind, c.rate, spec.eta, r.n_boson)?);
            }
            DissipationMode::Dressed => unreachable!("dressed handled separately"),
        }
    }
    Ok(out)
}

/// Run one scenario: both trajectories, compared sample by sample.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult> {
    let r = resolve(cfg)?;
    let started = Instant::now();
    let spec = FrameSpec::from_params(&r.params);
    let map = FrameMap::new(spec, r.n_boson)?;
    if r
        .channels
        .iter()
        .any(|c| c.mode == DissipationMode::Dressed)
    {
        return run_scenario_dressed(&r, spec, map, started);
    }
    let hg = HgEvaluator::new(&r.params, r.n_boson)?;
    let h_g = if hg.is_static() {
        Hamiltonian::Static(hg.eval(0.0))
    } else {
        let hg = Arc::new(hg);
        Hamiltonian::TimeDep(Arc::new(move |t| hg.eval(t)))
    };
    let h_target = Hamiltonian::Static(build_target(&r.params, r.nonlinear, r.n_boson)?.into_mat());
    let (rho_g0, rho_n0) = initial_states(&r, &map)?;
    let p_g = EvolutionProblem {
        hamiltonian: h_g,
        dissipation: Dissipation::Channels(physical_channels(&r, &spec)?),
        rho0: rho_g0,
        t_grid: r.t_grid.clone(),
        dt: r.dt,
        observables: r.observables.clone(),
    };
    let p_n = EvolutionProblem {
        hamiltonian: h_target,
        dissipation: Dissipation::Channels(target_channels(&r, &spec)?),
        rho0: rho_n0,
        t_grid: r.t_grid.clone(),
        dt: r.dt,
        observables: r.observables.clone(),
    };
    // the two trajectories are independent; evolve them concurrently
    let (res_g, res_n) = std::thread::scope(|s| {
        let hg = s.spawn(|| evolve(&p_g));
        let hn = s.spawn(|| evolve(&p_n));
        (hg.join().expect("no panic"), hn.join().expect("no panic"))
    });
    let traj_g = res_g?;
    let traj_n = res_n?;
    assemble(&r, &map, traj_g, Some(traj_n), started)
}

fn run_scenario_dressed(
    r: &Resolved,
    spec: FrameSpec,
    map: FrameMap,
    started: Instant,
) -> Result<ScenarioResult> {
    let hg = HgEvaluator::new(&r.params, r.n_boson)?;
    if !hg.is_static() {
        return Err(Error::Config(
            "dressed dissipation needs a time-independent physical Hamiltonian".into(),
        ));
    }
    let h = crate::operator::Operator::hermitian(hg.eval(0.0), 2, r.n_boson)?;
    let mut gamma_sd = SpectralRate::Flat(0.0);
    let mut gamma_bl = SpectralRate::Flat(0.0);
    for c in &r.channels {
        match c.kind {
            JumpKind::SpinDephasing => gamma_sd = c.spectral,
            JumpKind::BosonLeak => gamma_bl = c.spectral,
            other => {
                return Err(Error::Config(format!(
                    "dressed mode supports spin dephasing and boson leak, got {other:?}"
                )))
            }
        }
    }
    let dd = dressed_dissipators(&h, &gamma_sd, &gamma_bl, r.n_boson)?;
    let (rho_g0, _) = initial_states(r, &map)?;
    let p_g = EvolutionProblem {
        hamiltonian: Hamiltonian::Static(h.mat().clone()),
        dissipation: Dissipation::Dressed(Arc::new(dd)),
        rho0: rho_g0,
        t_grid: r.t_grid.clone(),
        dt: r.dt,
        observables: r.observables.clone(),
    };
    let traj_g = evolve(&p_g)?;
    let _ = spec;
    assemble(r, &map, traj_g, None, started)
}

fn assemble(
    r: &Resolved,
    map: &FrameMap,
    traj_g: Trajectory,
    traj_n: Option<Trajectory>,
    started: Instant,
) -> Result<ScenarioResult> {
    let mut obs_mats = Vec::new();
    for o in &r.observables {
        obs_mats.push((o.name(), o.matrix(r.n_boson)?));
    }
    let mut header = vec!["t".to_string()];
    for (name, _) in &obs_mats {
        header.push(format!("target_{name}"));
        header.push(format!("mapped_{name}"));
    }
    header.extend(
        [
            "fidelity",
            "infidelity",
            "purity_g",
            "purity_target",
            "leakage_g",
            "leakage_target",
            "trace_dev_g",
            "trace_dev_target",
            "quality",
        ]
        .map(String::from),
    );
    let mut rows = Vec::with_capacity(traj_g.times.len());
    let mut max_infid: f64 = 0.0;
    let mut mapped_final = CMat::zeros(
        (traj_g.states[0].nrows(), traj_g.states[0].ncols()),
    );
    for (k, (&t_raw, rho_g)) in traj_g.times.iter().zip(&traj_g.states).enumerate() {
        let mapped = map.apply(rho_g, t_raw);
        let expect = |m: &CMat, rho: &CMat| -> f64 {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..rho.nrows() {
                for j in 0..rho.ncols() {
                    acc += rho[[i, j]] * m[[j, i]];
                }
            }
            acc.re
        };
        let mapped_obs: Vec<f64> = obs_mats.iter().map(|(_, m)| expect(m, &mapped)).collect();
        let (target_obs, fid, purity_target, leakage_target, trace_dev_target, flag_n) =
            match &traj_n {
                Some(tn) => {
                    let fid = crate::density::fidelity(&tn.states[k], &mapped)?;
                    (
                        tn.values[k].iter().map(|v| v.re).collect::<Vec<f64>>(),
                        fid,
                        tn.purity[k],
                        tn.leakage[k],
                        tn.trace_dev[k],
                        tn.flags[k].clone(),
                    )
                }
                None => (
                    mapped_obs.clone(),
                    f64::NAN,
                    crate::density::purity(&mapped),
                    crate::density::leakage_top4(&mapped, r.n_boson),
                    traj_g.trace_dev[k],
                    "dressed".to_string(),
                ),
            };
        let infid = if fid.is_nan() {
            f64::NAN
        } else {
            (1.0 - fid).max(INFIDELITY_FLOOR)
        };
        if !infid.is_nan() {
            max_infid = max_infid.max(infid);
        }
        let quality = if traj_g.flags[k] == "ok" && flag_n == "ok" {
            "ok".to_string()
        } else {
            format!("g:{};target:{}", traj_g.flags[k], flag_n)
        };
        rows.push(ResultRow {
            t: t_raw * r.params.nu_tilde,
            target_obs,
            mapped_obs,
            fidelity: fid,
            infidelity: infid,
            purity_g: traj_g.purity[k],
            purity_target,
            leakage_g: traj_g.leakage[k],
            leakage_target,
            trace_dev_g: traj_g.trace_dev[k],
            trace_dev_target,
            quality,
        });
        if k + 1 == traj_g.times.len() {
            mapped_final = mapped;
        }
    }
    let last = rows.last().expect("at least one sample");
    let quality_ok = traj_g.quality.warnings.is_empty()
        && traj_n
            .as_ref()
            .map(|t| t.quality.warnings.is_empty())
            .unwrap_or(true);
    let summary = Summary {
        name: r.name.clone(),
        max_infidelity: max_infid,
        final_fidelity: last.fidelity,
        final_purity_g: last.purity_g,
        final_purity_target: last.purity_target,
        max_leakage: traj_g
            .quality
            .max_leakage
            .max(traj_n.as_ref().map(|t| t.quality.max_leakage).unwrap_or(0.0)),
        wall_seconds: started.elapsed().as_secs_f64(),
        quality_ok,
    };
    Ok(ScenarioResult {
        header,
        rows,
        summary,
        traj_g,
        traj_target: traj_n,
        mapped_final,
    })
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_csv<W: std::io::Write>(res: &ScenarioResult, mut w: W) -> Result<()> {
    writeln!(w, "{}", res.header.join(","))?;
    for row in &res.rows {
        let mut fields = vec![fmt_float(row.t)];
        for (a, b) in row.target_obs.iter().zip(&row.mapped_obs) {
            fields.push(fmt_float(*a));
            fields.push(fmt_float(*b));
        }
        fields.push(fmt_float(row.fidelity));
        fields.push(fmt_float(row.infidelity));
        fields.push(fmt_float(row.purity_g));
        fields.push(fmt_float(row.purity_target));
        fields.push(fmt_float(row.leakage_g));
        fields.push(fmt_float(row.leakage_target));
        fields.push(fmt_float(row.trace_dev_g));
        fields.push(fmt_float(row.trace_dev_target));
        fields.push(row.quality.clone());
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweeps and convergence
// ---------------------------------------------------------------------------

/// Set a numeric sweep axis on a copy of the config.
pub fn set_axis(cfg: &ScenarioConfig, axis: &str, value: f64) -> Result<ScenarioConfig> {
    let mut out = cfg.clone();
    match axis {
        "eta" => out.model.eta = Some(value),
        "scale" => out.scenario.scale = value,
        "dim" => out.scenario.dim = value as usize,
        "omega_tilde_over_nu_tilde" => out.model.omega_tilde_over_nu_tilde = value,
        "t_end_over_nu_tilde" => out.run.t_end_over_nu_tilde = value,
        "g_over_nu_tilde" => {
            for d in &mut out.model.drivings {
                d.g_over_nu_tilde = Some(value);
                d.omega_over_nu_tilde = None;
                d.g_f_over_nu_tilde = None;
            }
        }
        "omega_over_nu_tilde" => {
            for d in &mut out.model.drivings {
                d.omega_over_nu_tilde = Some(value);
                d.g_over_nu_tilde = None;
                d.g_f_over_nu_tilde = None;
            }
        }
        "rate_over_nu_tilde" => {
            for c in &mut out.dissipation.channels {
                c.rate_over_nu_tilde = value;
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown sweep axis `{other}` (supported: eta, scale, dim, \
                 omega_tilde_over_nu_tilde, t_end_over_nu_tilde, g_over_nu_tilde, \
                 omega_over_nu_tilde, rate_over_nu_tilde)"
            )))
        }
    }
    // keep the label distinct per point
    out.scenario.name = format!("{}_{}={}", cfg.scenario.name, axis, value);
    Ok(out)
}

pub struct SweepPoint {
    pub value: f64,
    pub result: ScenarioResult,
}

/// Run the scenario once per axis value, up to `workers` points at a time.
pub fn run_sweep(
    cfg: &ScenarioConfig,
    axis: &str,
    values: &[f64],
    workers: usize,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let configs: Result<Vec<ScenarioConfig>> =
        values.iter().map(|&v| set_axis(cfg, axis, v)).collect();
    let configs = configs?;
    let workers = workers.max(1);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<ScenarioResult>>> =
        (0..configs.len()).map(|_| None).collect();
    let slots_mutex = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..workers.min(configs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= configs.len() {
                    break;
                }
                let res = run_scenario(&configs[i]);
                slots_mutex.lock().expect("no poison")[i] = Some(res);
            });
        }
    });
    let mut out = Vec::with_capacity(values.len());
    for (v, slot) in values.iter().zip(slots.into_iter()) {
        let res = slot.expect("worker filled the slot")?;
        out.push(SweepPoint {
            value: *v,
            result: res,
        });
    }
    Ok(out)
}

pub fn sweep_summary_csv(points: &[SweepPoint], axis: &str) -> String {
    let mut s = format!("{axis},max_infidelity,final_fidelity\n");
    for p in points {
        s.push_str(&format!(
            "{},{},{}\n",
            fmt_float(p.value),
            fmt_float(p.result.summary.max_infidelity),
            fmt_float(p.result.summary.final_fidelity)
        ));
    }
    s
}

pub struct ConvergenceReport {
    pub scales: Vec<f64>,
    pub max_infidelities: Vec<f64>,
    pub strictly_decreasing: bool,
}

/// Re-run the scenario across frequency hierarchies and check that the
/// simulation error falls as the hierarchy grows.
pub fn rwa_convergence(
    cfg: &ScenarioConfig,
    scales: &[f64],
    workers: usize,
) -> Result<ConvergenceReport> {
    if scales.is_empty() {
        return Err(Error::Config("convergence needs at least one scale".into()));
    }
    if scales.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("scales must be ascending".into()));
    }
    let points = run_sweep(cfg, "scale", scales, workers)?;
    let max_infidelities: Vec<f64> =
        points.iter().map(|p| p.result.summary.max_infidelity).collect();
    let strictly_decreasing = max_infidelities.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceReport {
        scales: scales.to_vec(),
        max_infidelities,
        strictly_decreasing,
    })
}
