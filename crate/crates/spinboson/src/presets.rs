//! Built-in scenarios matching the published parameter sets, at a
//! desk-friendly default hierarchy of `nu / nu_tilde = 200`. The
//! publication-scale hierarchy is stored alongside for `--paper-scale` runs.

use crate::error::{Error, Result};
use crate::scenario::{
    ChannelConfig, DissipationSection, DrivingConfig, InitialSection, ModelSection, RunSection,
    ScenarioConfig, ScenarioSection,
};

pub const PRESET_NAMES: [&str; 6] = [
    "fig2_1JCM",
    "fig2_2JCM",
    "fig3_1QRM",
    "fig3_2QRM",
    "fig4_1aJCM",
    "fig5_blockade",
];

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

fn scenario(name: &str, scale: f64, dim: usize, steps: usize, paper: f64) -> ScenarioSection {
    ScenarioSection {
        name: name.into(),
        scale,
        dim,
        steps_per_period: steps,
        paper_scale: Some(paper),
    }
}

fn channel(kind: &str, rate: f64, mode: &str) -> ChannelConfig {
    ChannelConfig {
        kind: kind.into(),
        rate_over_nu_tilde: rate,
        mode: mode.into(),
        engineered: false,
        spectral: None,
    }
}

fn driving_g(side: &str, order: usize, g: f64) -> DrivingConfig {
    DrivingConfig {
        side: side.into(),
        order,
        omega_over_nu_tilde: None,
        g_over_nu_tilde: Some(g),
        g_f_over_nu_tilde: None,
    }
}

fn driving_omega(side: &str, order: usize, omega: f64) -> DrivingConfig {
    DrivingConfig {
        side: side.into(),
        order,
        omega_over_nu_tilde: Some(omega),
        g_over_nu_tilde: None,
        g_f_over_nu_tilde: None,
    }
}

fn driving_gf(side: &str, order: usize, gf: f64) -> DrivingConfig {
    DrivingConfig {
        side: side.into(),
        order,
        omega_over_nu_tilde: None,
        g_over_nu_tilde: None,
        g_f_over_nu_tilde: Some(gf),
    }
}

/// Build a named preset at the given hierarchy factor.
pub fn preset(name: &str, scale: Option<f64>) -> Result<ScenarioConfig> {
    let mut cfg = match name {
        // one-boson exchange model: w~ = nu~, g1 = nu~/2, leak nu~/2,
        // dephasing nu~/40, starting from |0>|e>
        "fig2_1JCM" | "fig2_1jcm" => ScenarioConfig {
            scenario: scenario("fig2_1JCM", 200.0, 20, 50, 2000.0),
            model: ModelSection {
                eta: Some(0.05),
                omega_tilde_over_nu_tilde: 1.0,
                nonlinear: false,
                drivings: vec![driving_g("red", 1, 0.5)],
            },
            dissipation: DissipationSection {
                channels: vec![
                    channel("boson_leak", 0.5, "exact_transformed"),
                    channel("spin_dephasing", 0.025, "exact_transformed"),
                ],
            },
            initial: InitialSection {
                boson: "fock:0".into(),
                spin: "e".into(),
                frame: "target".into(),
            },
            run: RunSection {
                t_end_over_nu_tilde: 10.0 * TWO_PI,
                samples: 80,
                observables: vec!["sz".into(), "n".into()],
                out: None,
            },
        },
        // two-boson exchange model: w~ = 2 nu~, g2 = nu~/10
        "fig2_2JCM" | "fig2_2jcm" => ScenarioConfig {
            scenario: scenario("fig2_2JCM", 200.0, 20, 60, 2000.0),
            model: ModelSection {
                eta: Some(0.1414213562373095),
                omega_tilde_over_nu_tilde: 2.0,
                nonlinear: false,
                drivings: vec![driving_g("red", 2, 0.1)],
            },
            dissipation: DissipationSection {
                channels: vec![
                    channel("boson_leak", 0.5, "exact_transformed"),
                    channel("spin_dephasing", 0.025, "exact_transformed"),
                ],
            },
            initial: InitialSection {
                boson: "fock:0".into(),
                spin: "e".into(),
                frame: "target".into(),
            },
            run: RunSection {
                t_end_over_nu_tilde: 10.0 * TWO_PI,
                samples: 80,
                observables: vec!["sz".into(), "n".into()],
                out: None,
            },
        },
        // deep-strong one-boson Rabi model: w~ = 0, Omega_0 = Omega_1 = 50 nu~,
        // g1/nu~ = 5/4 (eta derived), leak nu~/50, dephasing nu~/100,
        // starting from |alpha=1/2>|e>
        "fig3_1QRM" | "fig3_1qrm" => ScenarioConfig {
            scenario: scenario("fig3_1QRM", 200.0, 34, 160, 5000.0),
            model: ModelSection {
                eta: None,
                omega_tilde_over_nu_tilde: 0.0,
                nonlinear: false,
                drivings: vec![
                    DrivingConfig {
                        side: "red".into(),
                        order: 1,
                        omega_over_nu_tilde: Some(50.0),
                        g_over_nu_tilde: Some(1.25),
                        g_f_over_nu_tilde: None,
                    },
                    driving_omega("blue", 1, 50.0),
                ],
            },
            dissipation: DissipationSection {
                channels: vec![
                    channel("boson_leak", 0.02, "approx_static"),
                    channel("spin_dephasing", 0.01, "approx_static"),
                ],
            },
            initial: InitialSection {
                boson: "coherent:0.5".into(),
                spin: "e".into(),
                frame: "target".into(),
            },
            run: RunSection {
                t_end_over_nu_tilde: 2.0 * TWO_PI,
                samples: 80,
                observables: vec!["sz".into(), "n".into()],
                out: None,
            },
        },
        // two-boson Rabi model: w~ = 2 nu~, g2 = nu~/10, thermal(0.25) x |+>
        "fig3_2QRM" | "fig3_2qrm" => ScenarioConfig {
            scenario: scenario("fig3_2QRM", 200.0, 16, 200, 5000.0),
            model: ModelSection {
                eta: None,
                omega_tilde_over_nu_tilde: 2.0,
                nonlinear: false,
                drivings: vec![
                    DrivingConfig {
                        side: "red".into(),
                        order: 2,
                        omega_over_nu_tilde: Some(50.0),
                        g_over_nu_tilde: Some(0.1),
                        g_f_over_nu_tilde: None,
                    },
                    driving_omega("blue", 2, 50.0),
                ],
            },
            dissipation: DissipationSection {
                channels: vec![
                    channel("boson_leak", 0.02, "approx_static"),
                    channel("spin_dephasing", 0.01, "approx_static"),
                ],
            },
            initial: InitialSection {
                boson: "thermal:0.25".into(),
                spin: "+".into(),
                frame: "target".into(),
            },
            run: RunSection {
                t_end_over_nu_tilde: 2.0 * TWO_PI,
                samples: 80,
                observables: vec!["sz".into(), "n".into()],
                out: None,
            },
        },
        // nonlinear one-boson anti-exchange model at eta = 0.8 with exact
        // transformed boson leak; the initial state is stated in the
        // physical frame (thermal(0.75) x |g>)
        "fig4_1aJCM" | "fig4_1ajcm" => ScenarioConfig {
            scenario: scenario("fig4_1aJCM", 200.0, 22, 160, 1000.0),
            model: ModelSection {
                eta: Some(0.8),
                omega_tilde_over_nu_tilde: 1.0,
                nonlinear: true,
                drivings: vec![driving_gf("blue", 1, 2.0)],
            },
            dissipation: DissipationSection {
                channels: vec![channel("boson_leak", 0.5, "exact_transformed")],
            },
            initial: InitialSection {
                boson: "thermal:0.75".into(),
                spin: "g".into(),
                frame: "physical".into(),
            },
            run: RunSection {
                t_end_over_nu_tilde: 10.0 * TWO_PI,
                samples: 80,
                observables: vec!["sz".into(), "n".into()],
                out: None,
            },
        },
        // Fock-state preparation through the coupling zero at eta = 0.639:
        // engineered spontaneous emission at 4 nu~, target |8>|g>
        "fig5_blockade" => ScenarioConfig {
            scenario: scenario("fig5_blockade", 200.0, 18, 160, 1000.0),
            model: ModelSection {
                eta: Some(0.639),
                omega_tilde_over_nu_tilde: 1.0,
                nonlinear: true,
                drivings: vec![driving_gf("blue", 1, 2.0)],
            },
            dissipation: DissipationSection {
                channels: vec![ChannelConfig {
                    kind: "spont_emission".into(),
                    rate_over_nu_tilde: 4.0,
                    mode: "exact_transformed".into(),
                    engineered: true,
                    spectral: None,
                }],
            },
            initial: InitialSection {
                boson: "fock:0".into(),
                spin: "g".into(),
                frame: "target".into(),
            },
            run: RunSection {
                t_end_over_nu_tilde: 20.0 * TWO_PI,
                samples: 80,
                observables: vec!["n".into(), "sz".into(), "pop:8:g".into()],
                out: None,
            },
        },
        other => return Err(Error::UnknownPreset(other.into())),
    };
    if let Some(s) = scale {
        cfg.scenario.scale = s;
    }
    Ok(cfg)
}
