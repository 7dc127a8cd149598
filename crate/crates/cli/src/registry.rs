//! Named figure experiments at two scales.
//!
//! Paper scale uses the coherence length, grids and trial counts of the
//! original study. Desk scale keeps every structural parameter but caps
//! `T` at 100, `N` at 128 and the trial count at 2000, and evaluates the
//! simulated secrecy rate on at most 20 slots.

use hwisec::channel_sim::{mc_eve_capacity, mc_secrecy_rate, TGrid};
use hwisec::closed_form::{eve_capacity_ub, training_statistics, UserModel};
use hwisec::core_model::Scenario;
use hwisec::design_opt::{best_phi, max_tolerable_ne};
use hwisec::Backend;
use serde::Serialize;

use crate::spec::Scale;
use crate::table::ResultTable;

/// Grid, trial count and slot policy of one figure at one scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleSetup {
    pub t_coh: usize,
    pub grid: Vec<f64>,
    /// Zero when the figure has no simulated curve.
    pub trials: usize,
    pub t_points: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
pub struct Figure {
    pub id: &'static str,
    pub caption: &'static str,
    pub x: &'static str,
    pub curves: &'static str,
}

pub const FIGURES: [Figure; 6] = [
    Figure {
        id: "fig1",
        caption: "N=128, N_o=4, N_E=16, P_T=10 dB, phi=0.25, kappa_t_bs=0.15^2",
        x: "beta (K = round(beta N))",
        curves: "eavesdropper capacity bound and simulation for M_o in {1,2,4}",
    },
    Figure {
        id: "fig2",
        caption: "N=128, N_o=2, N_E=16, K=B=16, p_tau=P_T/K, P_T=10 dB, phi=0.5, kappa=0.05^2",
        x: "sigma (deg)",
        curves: "rate bound, lambda_bar and a_k for B_o in {1,2,16}",
    },
    Figure {
        id: "fig3",
        caption: "K=B=4, N_E=4, N_o=16, B_o=1, p_tau=P_T/K, P_T=10 dB, kappa=0.15^2, optimal phi",
        x: "N",
        curves: "secrecy rate bound and simulation for sigma in {0.6,6} deg and M_o in {1,4,16}",
    },
    Figure {
        id: "fig4",
        caption: "K=B=4, N=128, N_o=M_o=2, N_E=4, p_tau=P_T/K, P_T=10 dB, kappa=0.15^2",
        x: "phi",
        curves: "secrecy rate for SO/TO pilots at sigma in {0.6,6} deg, plus ideal hardware",
    },
    Figure {
        id: "fig5",
        caption: "N=128, M_o=2, p_tau=P_T/K, P_T=10 dB, sigma=6 deg, kappa=0.15^2",
        x: "beta (K = round(beta N))",
        curves: "alpha_an and alpha_sec for N_o in {2,4} with SO, TO and phase-noise-free SO",
    },
    Figure {
        id: "fig6",
        caption: "N=128, K=B=32, N_E=4, N_o=M_o=2, p_tau=P_T/K, P_T=10 dB, other kappa=0.15^2",
        x: "kappa_t_bs",
        curves: "secrecy rate for phi in {0.05,0.25} and sigma in {0.06,6} deg",
    },
];

pub fn find(id: &str) -> Option<&'static Figure> {
    FIGURES.iter().find(|f| f.id == id)
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n)
        .map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

impl Figure {
    pub fn setup(&self, scale: Scale) -> ScaleSetup {
        let paper = scale == Scale::Paper;
        let (t_coh, t_points) = if paper { (500, None) } else { (100, Some(10)) };
        let (grid, trials) = match (self.id, paper) {
            ("fig1", true) => (steps(0.025, 0.45, 0.025), 5000),
            ("fig1", false) => (vec![0.05, 0.1, 0.2], 1000),
            ("fig2", true) => (steps(0.0, 30.0, 1.0), 0),
            ("fig2", false) => (steps(0.0, 30.0, 5.0), 0),
            ("fig3", true) => (steps(64.0, 512.0, 64.0), 5000),
            ("fig3", false) => (vec![64.0, 128.0], 200),
            ("fig4", true) => (steps(0.05, 1.0, 0.05), 5000),
            ("fig4", false) => (vec![0.1, 0.3, 0.5, 0.7, 0.9], 200),
            ("fig5", true) => (steps(0.025, 0.45, 0.025), 0),
            ("fig5", false) => (vec![0.05, 0.1, 0.2, 0.3, 0.4], 0),
            ("fig6", true) => (steps(0.0, 0.1, 0.005), 0),
            ("fig6", false) => (steps(0.0, 0.1, 0.02), 0),
            _ => unreachable!("unregistered figure {}", self.id),
        };
        ScaleSetup {
            t_coh,
            grid,
            trials,
            t_points: if trials > 0 { t_points } else { None },
        }
    }
}

/// One output curve and the scenario it was computed from (before the
/// swept parameter is applied).
pub struct Curve {
    pub table: ResultTable,
    pub base: Scenario,
}

fn t_grid(setup: &ScaleSetup) -> TGrid {
    match setup.t_points {
        Some(n) => TGrid::Uniform(n),
        None => TGrid::Full,
    }
}

fn users(s: Scenario, beta: f64) -> Scenario {
    let k = (beta * s.n_bs as f64).round() as usize;
    s.with_users(k)
}

fn tag(v: f64) -> String {
    v.to_string().replace('.', "p")
}

/// Compute every curve of a figure.
pub fn reproduce(
    fig: &Figure,
    scale: Scale,
    seed: u64,
    backend: Backend,
) -> anyhow::Result<Vec<Curve>> {
    let setup = fig.setup(scale);
    let t = setup.t_coh;
    let mut out = Vec::new();
    match fig.id {
        "fig1" => {
            for m_groups in [1, 2, 4] {
                let base = Scenario {
                    m_groups,
                    t_coh: t,
                    ..Scenario::fig1()
                };
                let mut table = ResultTable::new(
                    format!("fig1_mo{m_groups}"),
                    &["beta", "k_users", "eve_ub", "eve_mc", "eve_mc_se"],
                );
                for &beta in &setup.grid {
                    let Ok(cfg) = users(base.clone(), beta).build() else {
                        continue;
                    };
                    let ub = eve_capacity_ub(&cfg).bits().unwrap_or(f64::INFINITY);
                    let (mc, se) = match mc_eve_capacity(
                        &cfg,
                        cfg.first_data_slot(),
                        setup.trials,
                        seed,
                        backend,
                    ) {
                        hwisec::channel_sim::EveEstimate::Finite { mean, se } => (mean, se),
                        hwisec::channel_sim::EveEstimate::Unbounded => (f64::INFINITY, f64::NAN),
                    };
                    table.push(vec![beta, cfg.dims().k_users as f64, ub, mc, se]);
                }
                out.push(Curve { table, base });
            }
        }
        "fig2" => {
            for b_o in [1, 2, 16] {
                let base = Scenario {
                    b_o,
                    t_coh: t,
                    ..Scenario::fig2()
                };
                let mut table = ResultTable::new(
                    format!("fig2_bo{b_o}"),
                    &["sigma_deg", "rate_lb", "lambda_bar", "a_k", "secrecy_lb"],
                );
                for &sigma in &setup.grid {
                    let cfg = base.clone().with_sigma(sigma).build()?;
                    let stats = training_statistics(&cfg, cfg.t0());
                    let m = UserModel::new(&cfg, &stats, cfg.reference_user());
                    let co = m.coefficients(cfg.first_data_slot());
                    table.push(vec![
                        sigma,
                        m.mean_rate(),
                        co.lambda_bar_k,
                        co.a_k,
                        m.secrecy_rate(eve_capacity_ub(&cfg)),
                    ]);
                }
                out.push(Curve { table, base });
            }
        }
        "fig3" => {
            for sigma in [0.6, 6.0] {
                for m_groups in [1, 4, 16] {
                    let base = Scenario {
                        m_groups,
                        t_coh: t,
                        ..Scenario::fig3().with_sigma(sigma)
                    };
                    let mut table = ResultTable::new(
                        format!("fig3_sigma{}_mo{m_groups}", tag(sigma)),
                        &["n_bs", "phi_opt", "secrecy_lb", "secrecy_mc"],
                    );
                    for &n in &setup.grid {
                        let s = Scenario {
                            n_bs: n as usize,
                            ..base.clone()
                        };
                        if s.clone().with_phi(1.0).build().is_err() {
                            continue;
                        }
                        let Ok((phi, lb)) = best_phi(&s, backend) else {
                            continue;
                        };
                        let cfg = s.with_phi(phi).build()?;
                        let mc =
                            mc_secrecy_rate(&cfg, setup.trials, &t_grid(&setup), seed, backend)
                                .rate;
                        table.push(vec![n, phi, lb, mc]);
                    }
                    out.push(Curve { table, base });
                }
            }
        }
        "fig4" => {
            let cases = [
                ("so_sigma0p6", 1, Some(0.6)),
                ("to_sigma0p6", 4, Some(0.6)),
                ("so_sigma6", 1, Some(6.0)),
                ("to_sigma6", 4, Some(6.0)),
                ("ideal", 1, None),
            ];
            for (name, b_o, sigma) in cases {
                let mut base = Scenario {
                    b_o,
                    t_coh: t,
                    ..Scenario::fig4()
                };
                base = match sigma {
                    Some(s) => base.with_sigma(s),
                    None => base.with_sigma(0.0).with_kappa(0.0),
                };
                let mut table =
                    ResultTable::new(format!("fig4_{name}"), &["phi", "secrecy_lb", "secrecy_mc"]);
                for &phi in &setup.grid {
                    let cfg = base.clone().with_phi(phi).build()?;
                    let lb = UserModel::for_user(&cfg, cfg.reference_user())
                        .secrecy_rate(eve_capacity_ub(&cfg));
                    let mc =
                        mc_secrecy_rate(&cfg, setup.trials, &t_grid(&setup), seed, backend).rate;
                    table.push(vec![phi, lb, mc]);
                }
                out.push(Curve { table, base });
            }
        }
        "fig5" => {
            for n_lo in [2, 4] {
                for (name, to, sigma) in [
                    ("so", false, 6.0),
                    ("to", true, 6.0),
                    ("so_sigma0", false, 0.0),
                ] {
                    let base = Scenario {
                        n_lo,
                        t_coh: t,
                        ..Scenario::fig5().with_sigma(sigma)
                    };
                    let mut table = ResultTable::new(
                        format!("fig5_no{n_lo}_{name}"),
                        &[
                            "beta",
                            "k_users",
                            "alpha_an",
                            "alpha_sec",
                            "ne_max_an",
                            "ne_max_sec",
                        ],
                    );
                    for &beta in &setup.grid {
                        let mut s = users(base.clone(), beta);
                        if to {
                            s.b_o = s.k_users;
                        }
                        let Ok(cfg) = s.build() else { continue };
                        let dc =
                            UserModel::for_user(&cfg, cfg.reference_user()).design_coefficients();
                        table.push(vec![
                            beta,
                            cfg.dims().k_users as f64,
                            dc.alpha_an(),
                            dc.alpha_sec(),
                            max_tolerable_ne(&cfg, false) as f64,
                            max_tolerable_ne(&cfg, true) as f64,
                        ]);
                    }
                    out.push(Curve { table, base });
                }
            }
        }
        "fig6" => {
            for phi in [0.05, 0.25] {
                for sigma in [0.06, 6.0] {
                    let base = Scenario {
                        t_coh: t,
                        ..Scenario::fig6().with_phi(phi).with_sigma(sigma)
                    };
                    let mut table = ResultTable::new(
                        format!("fig6_phi{}_sigma{}", tag(phi), tag(sigma)),
                        &["kappa_t_bs", "secrecy_lb", "benefit_lhs", "benefit_rhs"],
                    );
                    for &kappa in &setup.grid {
                        let mut s = base.clone();
                        s.hwi.kappa_t_bs = kappa;
                        let cfg = s.build()?;
                        let m = UserModel::for_user(&cfg, cfg.reference_user());
                        let b = m.design_coefficients().distortion_benefit();
                        table.push(vec![
                            kappa,
                            m.secrecy_rate(eve_capacity_ub(&cfg)),
                            b.lhs,
                            b.rhs,
                        ]);
                    }
                    out.push(Curve { table, base });
                }
            }
        }
        other => anyhow::bail!("unregistered figure {other}"),
    }
    Ok(out)
}

/// Human-readable registry listing.
pub fn listing() -> String {
    let mut s = String::new();
    for f in &FIGURES {
        s.push_str(&format!("{}  {}\n", f.id, f.curves));
        s.push_str(&format!("      caption: {}\n", f.caption));
        s.push_str(&format!("      x: {}\n", f.x));
        for (label, scale) in [("paper", Scale::Paper), ("desk", Scale::Desk)] {
            let st = f.setup(scale);
            let grid: Vec<String> = st.grid.iter().map(|v| format!("{v}")).collect();
            let mc = if st.trials > 0 {
                format!(
                    ", trials={}, slots={}",
                    st.trials,
                    st.t_points.map_or("all".to_string(), |n| n.to_string())
                )
            } else {
                String::new()
            };
            s.push_str(&format!(
                "      {label}: T={}{mc}, grid=[{}]\n",
                st.t_coh,
                grid.join(", ")
            ));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_scale_respects_caps() {
        for f in &FIGURES {
            let st = f.setup(Scale::Desk);
            assert!(st.t_coh <= 100);
            assert!(st.trials <= 2000);
            assert!(st.t_points.unwrap_or(0) <= 20);
            if f.id == "fig3" {
                assert!(st.grid.iter().all(|&n| n <= 128.0));
            }
        }
    }

    #[test]
    fn grids_include_endpoints() {
        assert_eq!(steps(0.0, 0.1, 0.02).len(), 6);
        assert_eq!(*steps(0.05, 1.0, 0.05).last().unwrap(), 1.0);
    }

    #[test]
    fn listing_names_every_figure() {
        let l = listing();
        for f in &FIGURES {
            assert!(l.contains(f.id));
        }
    }
}
