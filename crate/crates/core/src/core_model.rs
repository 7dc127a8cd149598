//! Validated system configuration shared by every evaluator.
//!
//! A [`Scenario`] is the flat, serializable description of a system (it is
//! what the JSON experiment files contain). [`Scenario::build`] checks it and
//! produces a [`Config`], an immutable bundle of [`SystemDims`],
//! [`HwiParams`], [`PilotSchedule`], [`PowerAllocation`] and
//! [`PathLossProfile`]. Everything downstream takes `&Config`, so a `Config`
//! can be shared freely between worker threads.
//!
//! ```
//! use hwisec::core_model::Scenario;
//!
//! let cfg = Scenario::fig4().build().unwrap();
//! assert_eq!(cfg.dims().an_dims(), 60);
//! assert!((cfg.power().p_data * 4.0 + cfg.power().q_an * 60.0 - 10.0).abs() < 1e-12);
//! ```

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reasons a configuration is rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{what} must be at least 1")]
    Zero { what: &'static str },
    #[error("{num_name}={num} is not divisible by {den_name}={den}")]
    NotDivisible {
        num_name: &'static str,
        num: usize,
        den_name: &'static str,
        den: usize,
    },
    #[error("m_groups={m_groups} must lie in 1..=n_lo={n_lo}")]
    GroupsOutOfRange { m_groups: usize, n_lo: usize },
    #[error("b_o={b_o} exceeds k_users={k_users}, leaving a sub-phase without users")]
    EmptySubPhase { b_o: usize, k_users: usize },
    #[error("b_train={b_train} must be smaller than t_coh={t_coh}")]
    TrainingTooLong { b_train: usize, t_coh: usize },
    #[error("k_users={k_users} exceeds b_train={b_train}; orthogonal pilots impossible")]
    TooManyUsers { k_users: usize, b_train: usize },
    #[error("phi_split={0} is outside (0, 1]")]
    PhiOutOfRange(f64),
    #[error("no AN dimensions left (L = n_bs/m_groups - k_users = {0}) but phi_split < 1")]
    NoAnDimensions(i64),
    #[error("{what}={value} is invalid: {reason}")]
    BadValue {
        what: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("beta_k has {got} entries, expected {expected}")]
    PathLossLength { got: usize, expected: usize },
    #[error("t0={t0} must lie in {lo}..={hi}")]
    DesignSlot { t0: usize, lo: usize, hi: usize },
}

/// Convert a phase standard deviation in degrees to a variance in rad².
pub fn deg_to_rad2(deg: f64) -> f64 {
    let r = deg * PI / 180.0;
    r * r
}

/// Convert a power in dB (relative to the unit noise floor) to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Antenna, user, oscillator and slot counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SystemDims {
    pub n_bs: usize,
    pub k_users: usize,
    pub n_eve: usize,
    pub n_lo: usize,
    pub m_groups: usize,
    pub t_coh: usize,
    pub b_train: usize,
}

impl SystemDims {
    /// Signed AN dimension count `N/M_o - K`.
    pub fn an_dims_signed(&self) -> i64 {
        (self.n_bs / self.m_groups) as i64 - self.k_users as i64
    }

    /// AN dimension count, clamped at zero.
    pub fn an_dims(&self) -> usize {
        self.an_dims_signed().max(0) as usize
    }

    /// Antennas per local oscillator.
    pub fn antennas_per_lo(&self) -> usize {
        self.n_bs / self.n_lo
    }

    /// Antennas per AN precoder group.
    pub fn antennas_per_group(&self) -> usize {
        self.n_bs / self.m_groups
    }

    /// Loading ratio `K/N`.
    pub fn beta_loading(&self) -> f64 {
        self.k_users as f64 / self.n_bs as f64
    }
}

/// Hardware impairment parameters, in linear units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HwiParams {
    pub kappa_t_mt: f64,
    pub kappa_r_bs: f64,
    pub kappa_t_bs: f64,
    pub kappa_r_mt: f64,
    pub sigma_psi_deg: f64,
    pub sigma_phi_deg: f64,
    pub xi_ul: f64,
    pub xi_dl: f64,
}

impl HwiParams {
    /// All four distortion ratios set to `kappa`, no phase noise, the given noise floors.
    pub fn uniform(kappa: f64, sigma_deg: f64, xi: f64) -> Self {
        Self {
            kappa_t_mt: kappa,
            kappa_r_bs: kappa,
            kappa_t_bs: kappa,
            kappa_r_mt: kappa,
            sigma_psi_deg: sigma_deg,
            sigma_phi_deg: sigma_deg,
            xi_ul: xi,
            xi_dl: xi,
        }
    }

    /// BS phase-increment variance in rad².
    pub fn sigma_psi2(&self) -> f64 {
        deg_to_rad2(self.sigma_psi_deg)
    }

    /// MT phase-increment variance in rad².
    pub fn sigma_phi2(&self) -> f64 {
        deg_to_rad2(self.sigma_phi_deg)
    }

    /// Combined per-slot phase variance `σ_ψ² + σ_φ²`.
    pub fn sigma_sum2(&self) -> f64 {
        self.sigma_psi2() + self.sigma_phi2()
    }
}

/// Partition of the training window into sub-phases with orthogonal pilots.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSchedule {
    pub b_o: usize,
    pub sub_phase_lengths: Vec<usize>,
    pub assignments: Vec<Vec<usize>>,
    pub pilot_matrices: Vec<DMatrix<Complex64>>,
    pub p_tau: f64,
}

impl PilotSchedule {
    /// Sub-phase index holding user `k`.
    pub fn sub_phase_of(&self, k: usize) -> usize {
        k % self.b_o
    }

    /// Column of user `k` inside its sub-phase's pilot matrix.
    pub fn column_of(&self, k: usize) -> usize {
        k / self.b_o
    }

    /// Absolute training slots (1-based) of sub-phase `b`.
    pub fn slots(&self, b: usize) -> RangeInclusive<usize> {
        let start: usize = self.sub_phase_lengths[..b].iter().sum::<usize>() + 1;
        start..=start + self.sub_phase_lengths[b] - 1
    }

    /// Pilot sequence of user `k`.
    pub fn pilot(&self, k: usize) -> DVector<Complex64> {
        let b = self.sub_phase_of(k);
        self.pilot_matrices[b]
            .column(self.column_of(k))
            .into_owned()
    }
}

/// Build an equal-length schedule with round-robin user assignment and
/// scaled DFT pilot columns.
pub fn build_pilot_schedule(
    b_train: usize,
    b_o: usize,
    k_users: usize,
    p_tau: f64,
) -> Result<PilotSchedule, ConfigError> {
    if b_o == 0 {
        return Err(ConfigError::Zero { what: "b_o" });
    }
    if k_users == 0 {
        return Err(ConfigError::Zero { what: "k_users" });
    }
    if b_o > k_users {
        return Err(ConfigError::EmptySubPhase { b_o, k_users });
    }
    if b_train % b_o != 0 {
        return Err(ConfigError::NotDivisible {
            num_name: "b_train",
            num: b_train,
            den_name: "b_o",
            den: b_o,
        });
    }
    if k_users % b_o != 0 {
        return Err(ConfigError::NotDivisible {
            num_name: "k_users",
            num: k_users,
            den_name: "b_o",
            den: b_o,
        });
    }
    let b_len = b_train / b_o;
    let per_phase = k_users / b_o;
    if per_phase > b_len {
        return Err(ConfigError::TooManyUsers { k_users, b_train });
    }
    if !(p_tau > 0.0 && p_tau.is_finite()) {
        return Err(ConfigError::BadValue {
            what: "p_tau",
            value: p_tau,
            reason: "must be positive and finite",
        });
    }

    let amp = p_tau.sqrt();
    let dft = DMatrix::from_fn(b_len, per_phase, |i, j| {
        // Reduce the exponent mod b_len first so large products stay exact.
        let e = ((i * j) % b_len) as f64 / b_len as f64;
        Complex64::from_polar(amp, -2.0 * PI * e)
    });
    let assignments = (0..b_o)
        .map(|b| (0..k_users).filter(|k| k % b_o == b).collect())
        .collect();

    Ok(PilotSchedule {
        b_o,
        sub_phase_lengths: vec![b_len; b_o],
        assignments,
        pilot_matrices: vec![dft; b_o],
        p_tau,
    })
}

/// Downlink power split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerAllocation {
    pub p_total: f64,
    pub phi_split: f64,
    pub p_data: f64,
    pub q_an: f64,
}

/// Per-user data power and per-dimension AN power for a given split.
pub fn derived_powers(
    p_total: f64,
    phi_split: f64,
    dims: &SystemDims,
) -> Result<PowerAllocation, ConfigError> {
    if !(phi_split > 0.0 && phi_split <= 1.0) {
        return Err(ConfigError::PhiOutOfRange(phi_split));
    }
    let l = dims.an_dims_signed();
    let q_an = if phi_split == 1.0 {
        0.0
    } else if l >= 1 {
        (1.0 - phi_split) * p_total / l as f64
    } else {
        return Err(ConfigError::NoAnDimensions(l));
    };
    Ok(PowerAllocation {
        p_total,
        phi_split,
        p_data: phi_split * p_total / dims.k_users as f64,
        q_an,
    })
}

/// Large-scale fading of the users and the eavesdropper.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossProfile {
    pub beta_k: Vec<f64>,
    pub beta_eve: f64,
}

/// A checked, immutable system configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    dims: SystemDims,
    hwi: HwiParams,
    sched: PilotSchedule,
    power: PowerAllocation,
    pathloss: PathLossProfile,
    t0: usize,
}

impl Config {
    pub fn dims(&self) -> &SystemDims {
        &self.dims
    }
    pub fn hwi(&self) -> &HwiParams {
        &self.hwi
    }
    pub fn schedule(&self) -> &PilotSchedule {
        &self.sched
    }
    pub fn power(&self) -> &PowerAllocation {
        &self.power
    }
    pub fn pathloss(&self) -> &PathLossProfile {
        &self.pathloss
    }
    /// Slot at which the precoders are designed.
    pub fn t0(&self) -> usize {
        self.t0
    }
    /// First data slot.
    pub fn first_data_slot(&self) -> usize {
        self.dims.b_train + 1
    }
    /// Data slots `B+1..=T`.
    pub fn data_slots(&self) -> RangeInclusive<usize> {
        self.first_data_slot()..=self.dims.t_coh
    }
    /// Default user for single-user quantities: the last user, which sits in
    /// the last training sub-phase.
    pub fn reference_user(&self) -> usize {
        self.dims.k_users - 1
    }
}

/// Check every structural and numerical invariant and assemble a [`Config`].
pub fn validate_config(
    dims: SystemDims,
    hwi: HwiParams,
    sched: PilotSchedule,
    power: PowerAllocation,
    pathloss: PathLossProfile,
    t0: usize,
) -> Result<Config, ConfigError> {
    for (what, v) in [
        ("n_bs", dims.n_bs),
        ("k_users", dims.k_users),
        ("n_eve", dims.n_eve),
        ("n_lo", dims.n_lo),
        ("m_groups", dims.m_groups),
        ("b_train", dims.b_train),
    ] {
        if v == 0 {
            return Err(ConfigError::Zero { what });
        }
    }
    if dims.n_bs % dims.n_lo != 0 {
        return Err(ConfigError::NotDivisible {
            num_name: "n_bs",
            num: dims.n_bs,
            den_name: "n_lo",
            den: dims.n_lo,
        });
    }
    if dims.m_groups > dims.n_lo {
        return Err(ConfigError::GroupsOutOfRange {
            m_groups: dims.m_groups,
            n_lo: dims.n_lo,
        });
    }
    if dims.n_lo % dims.m_groups != 0 {
        return Err(ConfigError::NotDivisible {
            num_name: "n_lo",
            num: dims.n_lo,
            den_name: "m_groups",
            den: dims.m_groups,
        });
    }
    if dims.b_train >= dims.t_coh {
        return Err(ConfigError::TrainingTooLong {
            b_train: dims.b_train,
            t_coh: dims.t_coh,
        });
    }
    if dims.k_users > dims.b_train {
        return Err(ConfigError::TooManyUsers {
            k_users: dims.k_users,
            b_train: dims.b_train,
        });
    }

    for (what, v) in [
        ("kappa_t_mt", hwi.kappa_t_mt),
        ("kappa_r_bs", hwi.kappa_r_bs),
        ("kappa_t_bs", hwi.kappa_t_bs),
        ("kappa_r_mt", hwi.kappa_r_mt),
        ("sigma_psi_deg", hwi.sigma_psi_deg),
        ("sigma_phi_deg", hwi.sigma_phi_deg),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(ConfigError::BadValue {
                what,
                value: v,
                reason: "must be finite and non-negative",
            });
        }
    }
    for (what, v) in [("xi_ul", hwi.xi_ul), ("xi_dl", hwi.xi_dl)] {
        if !(v >= 1.0 && v.is_finite()) {
            return Err(ConfigError::BadValue {
                what,
                value: v,
                reason: "amplified noise cannot fall below the unit thermal floor",
            });
        }
    }

    let sum_b: usize = sched.sub_phase_lengths.iter().sum();
    if sum_b != dims.b_train
        || sched.assignments.len() != sched.b_o
        || sched.pilot_matrices.len() != sched.b_o
    {
        return Err(ConfigError::BadValue {
            what: "schedule",
            value: sum_b as f64,
            reason: "sub-phase layout does not match b_train",
        });
    }
    if sched.assignments.iter().any(Vec::is_empty) {
        return Err(ConfigError::EmptySubPhase {
            b_o: sched.b_o,
            k_users: dims.k_users,
        });
    }
    let mut seen = vec![false; dims.k_users];
    for (b, users) in sched.assignments.iter().enumerate() {
        for &u in users {
            if u >= dims.k_users || seen[u] || sched.sub_phase_of(u) != b {
                return Err(ConfigError::BadValue {
                    what: "schedule",
                    value: u as f64,
                    reason: "user assignment is not a round-robin partition",
                });
            }
            seen[u] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(ConfigError::BadValue {
            what: "schedule",
            value: dims.k_users as f64,
            reason: "not every user is assigned to a sub-phase",
        });
    }

    if !(power.p_total > 0.0 && power.p_total.is_finite()) {
        return Err(ConfigError::BadValue {
            what: "p_total",
            value: power.p_total,
            reason: "must be positive and finite",
        });
    }
    if !(power.phi_split > 0.0 && power.phi_split <= 1.0) {
        return Err(ConfigError::PhiOutOfRange(power.phi_split));
    }
    if power.phi_split < 1.0 && dims.an_dims_signed() < 1 {
        return Err(ConfigError::NoAnDimensions(dims.an_dims_signed()));
    }

    if pathloss.beta_k.len() != dims.k_users {
        return Err(ConfigError::PathLossLength {
            got: pathloss.beta_k.len(),
            expected: dims.k_users,
        });
    }
    for &b in pathloss
        .beta_k
        .iter()
        .chain(std::iter::once(&pathloss.beta_eve))
    {
        if !(b > 0.0 && b.is_finite()) {
            return Err(ConfigError::BadValue {
                what: "path loss",
                value: b,
                reason: "must be positive and finite",
            });
        }
    }

    let lo = dims.b_train + 1;
    if t0 < lo || t0 > dims.t_coh {
        return Err(ConfigError::DesignSlot {
            t0,
            lo,
            hi: dims.t_coh,
        });
    }

    Ok(Config {
        dims,
        hwi,
        sched,
        power,
        pathloss,
        t0,
    })
}

fn one() -> f64 {
    1.0
}

/// Flat, serializable system description.
///
/// `p_total_db` is in dB relative to the unit noise floor; the noise floors
/// `xi_ul`/`xi_dl` are linear multiples of it. Phase standard deviations are
/// in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub n_bs: usize,
    pub k_users: usize,
    pub n_eve: usize,
    pub n_lo: usize,
    pub m_groups: usize,
    pub t_coh: usize,
    pub b_train: usize,
    pub b_o: usize,
    pub p_total_db: f64,
    pub phi_split: f64,
    pub hwi: HwiParams,
    /// Per-pilot power; defaults to `P_T / K`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_tau: Option<f64>,
    /// Per-user path loss; defaults to 1 for every user.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_k: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub beta_eve: f64,
    /// Precoder design slot; defaults to `b_train + 1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t0: Option<usize>,
}

impl Scenario {
    /// Validate and assemble.
    pub fn build(&self) -> Result<Config, ConfigError> {
        let dims = SystemDims {
            n_bs: self.n_bs,
            k_users: self.k_users,
            n_eve: self.n_eve,
            n_lo: self.n_lo,
            m_groups: self.m_groups,
            t_coh: self.t_coh,
            b_train: self.b_train,
        };
        if dims.k_users == 0 {
            return Err(ConfigError::Zero { what: "k_users" });
        }
        if dims.m_groups == 0 {
            return Err(ConfigError::Zero { what: "m_groups" });
        }
        if !self.p_total_db.is_finite() {
            return Err(ConfigError::BadValue {
                what: "p_total_db",
                value: self.p_total_db,
                reason: "must be finite",
            });
        }
        let p_total = db_to_linear(self.p_total_db);
        let p_tau = self.p_tau.unwrap_or(p_total / self.k_users as f64);
        let sched = build_pilot_schedule(self.b_train, self.b_o, self.k_users, p_tau)?;
        let power = derived_powers(p_total, self.phi_split, &dims)?;
        let pathloss = PathLossProfile {
            beta_k: self
                .beta_k
                .clone()
                .unwrap_or_else(|| vec![1.0; self.k_users]),
            beta_eve: self.beta_eve,
        };
        let t0 = self.t0.unwrap_or(self.b_train + 1);
        validate_config(dims, self.hwi, sched, power, pathloss, t0)
    }

    /// Set all four distortion ratios to `kappa`.
    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.hwi.kappa_t_mt = kappa;
        self.hwi.kappa_r_bs = kappa;
        self.hwi.kappa_t_bs = kappa;
        self.hwi.kappa_r_mt = kappa;
        self
    }

    /// Set both phase-noise standard deviations to `deg`.
    pub fn with_sigma(mut self, deg: f64) -> Self {
        self.hwi.sigma_psi_deg = deg;
        self.hwi.sigma_phi_deg = deg;
        self
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.phi_split = phi;
        self
    }

    /// Users equal to training slots with the given pilot partition.
    pub fn with_users(mut self, k: usize) -> Self {
        self.k_users = k;
        self.b_train = k;
        self.beta_k = None;
        self
    }

    fn base(n_bs: usize, k: usize, n_eve: usize, n_lo: usize, m_groups: usize) -> Self {
        Self {
            n_bs,
            k_users: k,
            n_eve,
            n_lo,
            m_groups,
            t_coh: 500,
            b_train: k,
            b_o: 1,
            p_total_db: 10.0,
            phi_split: 0.5,
            hwi: HwiParams::uniform(0.15 * 0.15, 0.0, 1.58),
            p_tau: None,
            beta_k: None,
            beta_eve: 1.0,
            t0: None,
        }
    }

    /// Eavesdropper-capacity study: `N=128, N_o=4, N_E=16, φ=0.25`, `K=32`.
    pub fn fig1() -> Self {
        Self {
            phi_split: 0.25,
            ..Self::base(128, 32, 16, 4, 1)
        }
    }

    /// Pilot-partition study: `N=128, N_o=2, N_E=16, K=B=16, φ=0.5, κ=0.05²`.
    pub fn fig2() -> Self {
        Self::base(128, 16, 16, 2, 2).with_kappa(0.05 * 0.05)
    }

    /// G-NS study: `K=B=4, N_E=4, N_o=16, B_o=1, κ=0.15²`, `N=128`.
    pub fn fig3() -> Self {
        Self::base(128, 4, 4, 16, 1).with_sigma(6.0)
    }

    /// Power-split study: `K=B=4, N=128, N_o=M_o=2, N_E=4, κ=0.15²`.
    pub fn fig4() -> Self {
        Self::base(128, 4, 4, 2, 2).with_sigma(0.6)
    }

    /// Eavesdropper-antenna study: `N=128, N_o=M_o=2, σ=6°, κ=0.15²`, `K=16`.
    pub fn fig5() -> Self {
        Self::base(128, 16, 1, 2, 2).with_sigma(6.0)
    }

    /// BS-distortion study: `N=128, K=B=32, N_E=4, N_o=M_o=2`, `B_o=2`.
    pub fn fig6() -> Self {
        Self {
            b_o: 2,
            phi_split: 0.25,
            ..Self::base(128, 32, 4, 2, 2).with_sigma(0.06)
        }
    }
}
