//! Parameter sweeps and argmax searches over the closed-form evaluator.
//!
//! A [`SweepSpec`] names one scenario parameter, a grid of values and an
//! objective. [`sweep`] rebuilds the scenario at every grid value, skips the
//! values that fail validation, and reports the objective together with the
//! reference user's SINR coefficients at the first data slot. Ties in the
//! argmax go to the smallest parameter value, so the result does not depend
//! on the order of the grid.
//!
//! ```
//! use hwisec::core_model::Scenario;
//! use hwisec::design_opt::{sweep, Objective, SweepParam, SweepSpec};
//! use hwisec::Backend;
//!
//! let spec = SweepSpec {
//!     param: SweepParam::Phi,
//!     grid: vec![0.25, 0.5, 0.75],
//!     objective: Objective::SecrecyRateLb,
//! };
//! let res = sweep(&Scenario::fig4(), &spec, Backend::default()).unwrap();
//! assert_eq!(res.rows.len(), 3);
//! ```

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed_form::{eve_capacity_ub, training_statistics, EveBound, UserModel};
use crate::core_model::{Config, ConfigError, Scenario};
use crate::exec::{map_slice, Backend};

/// Scenario parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Fraction of transmit power spent on data.
    Phi,
    /// Number of pilot sub-phases.
    BO,
    /// Number of AN precoder groups.
    MO,
    /// Number of BS oscillators.
    NO,
    /// Phase-noise standard deviation of both ends, in degrees.
    Sigma,
    /// BS transmit distortion ratio.
    KappaTBs,
    /// BS antenna count.
    NBs,
    /// Users per BS antenna; sets `K = B = round(β N)`.
    BetaLoading,
}

impl SweepParam {
    /// Scenario with this parameter set to `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Result<Scenario, PointError> {
        if !value.is_finite() {
            return Err(PointError::NotFinite);
        }
        let as_count = || -> Result<usize, PointError> {
            if value < 1.0 || value.fract() != 0.0 {
                Err(PointError::NotACount)
            } else {
                Ok(value as usize)
            }
        };
        let mut s = base.clone();
        match self {
            SweepParam::Phi => s.phi_split = value,
            SweepParam::BO => s.b_o = as_count()?,
            SweepParam::MO => s.m_groups = as_count()?,
            SweepParam::NO => s.n_lo = as_count()?,
            SweepParam::Sigma => s = s.with_sigma(value),
            SweepParam::KappaTBs => s.hwi.kappa_t_bs = value,
            SweepParam::NBs => s.n_bs = as_count()?,
            SweepParam::BetaLoading => {
                let k = (value * s.n_bs as f64).round();
                if k < 1.0 {
                    return Err(PointError::NotACount);
                }
                s = s.with_users(k as usize);
            }
        }
        Ok(s)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepParam::Phi => "phi",
            SweepParam::BO => "b_o",
            SweepParam::MO => "m_o",
            SweepParam::NO => "n_o",
            SweepParam::Sigma => "sigma",
            SweepParam::KappaTBs => "kappa_t_bs",
            SweepParam::NBs => "n_bs",
            SweepParam::BetaLoading => "beta_loading",
        };
        f.write_str(s)
    }
}

/// Quantity evaluated at every grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Time-averaged secrecy-rate lower bound of the reference user.
    SecrecyRateLb,
    /// Time-averaged achievable-rate lower bound of the reference user.
    RateLb,
    /// Eavesdropper capacity upper bound.
    EveCapacityUb,
    AlphaAn,
    AlphaSec,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Objective::SecrecyRateLb => "secrecy_rate_lb",
            Objective::RateLb => "rate_lb",
            Objective::EveCapacityUb => "eve_capacity_ub",
            Objective::AlphaAn => "alpha_an",
            Objective::AlphaSec => "alpha_sec",
        };
        f.write_str(s)
    }
}

/// Objective value; only the eavesdropper bound can be unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveValue {
    Finite(f64),
    Unbounded,
}

impl ObjectiveValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            ObjectiveValue::Finite(v) => Some(v),
            ObjectiveValue::Unbounded => None,
        }
    }

    /// Total order with `Unbounded` above every finite value.
    pub fn cmp_total(self, other: Self) -> Ordering {
        match (self, other) {
            (ObjectiveValue::Finite(a), ObjectiveValue::Finite(b)) => a.total_cmp(&b),
            (ObjectiveValue::Unbounded, ObjectiveValue::Unbounded) => Ordering::Equal,
            (ObjectiveValue::Unbounded, _) => Ordering::Greater,
            (_, ObjectiveValue::Unbounded) => Ordering::Less,
        }
    }
}

impl fmt::Display for ObjectiveValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectiveValue::Finite(v) => write!(f, "{v:?}"),
            ObjectiveValue::Unbounded => f.write_str("inf"),
        }
    }
}

/// One parameter, its grid and the objective to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub grid: Vec<f64>,
    pub objective: Objective,
}

/// Objective and reference-user coefficients at one grid value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub objective: ObjectiveValue,
    pub lambda_bar: f64,
    pub a_k: f64,
    pub c_k: f64,
    pub mu_k: f64,
}

/// Why a grid value was skipped.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PointError {
    #[error("value is not finite")]
    NotFinite,
    #[error("value must be a positive integer for this parameter")]
    NotACount,
    #[error(transparent)]
    Invalid(#[from] ConfigError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("the sweep grid is empty")]
    EmptyGrid,
    #[error("no grid value gives a valid configuration (first failure at {value}: {error})")]
    AllInvalid { value: f64, error: PointError },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub param: SweepParam,
    pub objective: Objective,
    /// Valid grid points in grid order.
    pub rows: Vec<SweepRow>,
    /// Grid values that failed validation, in grid order.
    pub skipped: Vec<(f64, PointError)>,
    /// Index into `rows` of the best point.
    pub argmax: usize,
}

impl SweepResult {
    pub fn best(&self) -> &SweepRow {
        &self.rows[self.argmax]
    }
}

/// Evaluate one objective on a built configuration.
pub fn evaluate_objective(cfg: &Config, objective: Objective) -> (ObjectiveValue, SweepRow) {
    let stats = training_statistics(cfg, cfg.t0());
    let model = UserModel::new(cfg, &stats, cfg.reference_user());
    let co = model.coefficients(cfg.first_data_slot());
    let value = match objective {
        Objective::SecrecyRateLb => {
            ObjectiveValue::Finite(model.secrecy_rate(eve_capacity_ub(cfg)))
        }
        Objective::RateLb => ObjectiveValue::Finite(model.mean_rate()),
        Objective::EveCapacityUb => match eve_capacity_ub(cfg) {
            EveBound::Bounded(v) => ObjectiveValue::Finite(v),
            EveBound::Unbounded => ObjectiveValue::Unbounded,
        },
        Objective::AlphaAn => ObjectiveValue::Finite(model.design_coefficients().alpha_an()),
        Objective::AlphaSec => ObjectiveValue::Finite(model.design_coefficients().alpha_sec()),
    };
    let row = SweepRow {
        value: f64::NAN,
        objective: value,
        lambda_bar: co.lambda_bar_k,
        a_k: co.a_k,
        c_k: co.c_k,
        mu_k: co.mu_k,
    };
    (value, row)
}

fn argmax_by<T>(
    items: &[T],
    key: impl Fn(&T) -> ObjectiveValue,
    value: impl Fn(&T) -> f64,
) -> usize {
    let mut best = 0;
    for i in 1..items.len() {
        let ord = key(&items[i]).cmp_total(key(&items[best]));
        if ord == Ordering::Greater
            || (ord == Ordering::Equal && value(&items[i]) < value(&items[best]))
        {
            best = i;
        }
    }
    best
}

/// Evaluate `spec.objective` at every grid value.
pub fn sweep(
    base: &Scenario,
    spec: &SweepSpec,
    backend: Backend,
) -> Result<SweepResult, SweepError> {
    if spec.grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    let evaluated = map_slice(backend, &spec.grid, |&v| {
        let s = spec.param.apply(base, v)?;
        let cfg = s.build()?;
        let (_, mut row) = evaluate_objective(&cfg, spec.objective);
        row.value = v;
        Ok::<_, PointError>(row)
    });
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (v, r) in spec.grid.iter().zip(evaluated) {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => skipped.push((*v, e)),
        }
    }
    if rows.is_empty() {
        let (value, error) = skipped.swap_remove(0);
        return Err(SweepError::AllInvalid { value, error });
    }
    let argmax = argmax_by(&rows, |r| r.objective, |r| r.value);
    Ok(SweepResult {
        param: spec.param,
        objective: spec.objective,
        rows,
        skipped,
        argmax,
    })
}

/// Power-split grid: 0.05 to 1 in steps of 0.05, plus 0.01 and 0.99.
pub fn phi_grid() -> Vec<f64> {
    let mut g = vec![0.01];
    g.extend((1..=20).map(|i| i as f64 / 20.0));
    g.push(0.99);
    g.sort_by(f64::total_cmp);
    g
}

/// Power split maximizing the secrecy-rate bound, with the value reached.
pub fn best_phi(base: &Scenario, backend: Backend) -> Result<(f64, f64), SweepError> {
    let spec = SweepSpec {
        param: SweepParam::Phi,
        grid: phi_grid(),
        objective: Objective::SecrecyRateLb,
    };
    let res = sweep(base, &spec, backend)?;
    let best = res.best();
    Ok((best.value, best.objective.finite().unwrap_or(0.0)))
}

fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n % d == 0).collect()
}

/// Sub-phase count maximizing the secrecy-rate bound at phase-noise level
/// `sigma_deg`.
///
/// Candidates default to the divisors of the training length. When several
/// candidates give the same secrecy rate (typically all zero at strong phase
/// noise) the one with the larger time-averaged rate wins, and after that the
/// smallest count.
pub fn best_pilot_partition(
    base: &Scenario,
    sigma_deg: f64,
    candidates: Option<&[usize]>,
) -> Result<usize, SweepError> {
    let grid: Vec<usize> = match candidates {
        Some(c) => c.to_vec(),
        None => divisors(base.b_train),
    };
    if grid.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    let mut best: Option<(usize, f64, f64)> = None;
    let mut first_err = None;
    for b_o in grid {
        let s = Scenario {
            b_o,
            ..base.clone().with_sigma(sigma_deg)
        };
        let cfg = match s.build() {
            Ok(c) => c,
            Err(e) => {
                first_err.get_or_insert((b_o as f64, PointError::from(e)));
                continue;
            }
        };
        let stats = training_statistics(&cfg, cfg.t0());
        let m = UserModel::new(&cfg, &stats, cfg.reference_user());
        let sec = m.secrecy_rate(eve_capacity_ub(&cfg));
        let rate = m.mean_rate();
        let better = match best {
            None => true,
            Some((bb, bs, br)) => {
                (sec, rate, std::cmp::Reverse(b_o)).partial_cmp(&(bs, br, std::cmp::Reverse(bb)))
                    == Some(Ordering::Greater)
            }
        };
        if better {
            best = Some((b_o, sec, rate));
        }
    }
    match best {
        Some((b, _, _)) => Ok(b),
        None => {
            let (value, error) = first_err.expect("nonempty grid");
            Err(SweepError::AllInvalid { value, error })
        }
    }
}

/// Number of AN precoder groups maximizing the secrecy-rate bound, with the
/// power split optimized separately for each candidate. Candidates are the
/// divisors of the oscillator count.
pub fn best_mo(base: &Scenario, backend: Backend) -> Result<usize, SweepError> {
    let grid = divisors(base.n_lo);
    let results = map_slice(backend, &grid, |&m| {
        let s = Scenario {
            m_groups: m,
            ..base.clone()
        };
        best_phi(&s, Backend::Sequential).map(|(_, v)| (m as f64, ObjectiveValue::Finite(v)))
    });
    let ok: Vec<(f64, ObjectiveValue)> = results
        .iter()
        .filter_map(|r| r.as_ref().ok().copied())
        .collect();
    if ok.is_empty() {
        return Err(results
            .into_iter()
            .find_map(Result::err)
            .unwrap_or(SweepError::EmptyGrid));
    }
    let i = argmax_by(&ok, |r| r.1, |r| r.0);
    Ok(ok[i].0 as usize)
}

/// Largest eavesdropper antenna count that still leaves a positive secrecy
/// rate, `⌊α N⌋` with `α = α_sec` when AN is used and `α_AN` otherwise.
pub fn max_tolerable_ne(cfg: &Config, with_an: bool) -> usize {
    let dc = UserModel::for_user(cfg, cfg.reference_user()).design_coefficients();
    let alpha = if with_an {
        dc.alpha_sec()
    } else {
        dc.alpha_an()
    };
    floor_count(alpha * cfg.dims().n_bs as f64)
}

fn floor_count(x: f64) -> usize {
    if x.is_nan() || x <= 0.0 {
        0
    } else {
        x.floor() as usize
    }
}
