//! Monte Carlo link-level simulation of training, estimation, precoding and
//! downlink reception, used to check the closed-form bounds empirically.
//!
//! One trial draws a channel realization and phase trajectories, simulates
//! the uplink training, forms LMMSE estimates, builds the matched-filter and
//! grouped null-space precoders, and records the per-slot quantities whose
//! ensemble means enter the SINR. Trials are seeded independently from
//! `(seed, trial index)`, grouped into fixed-size chunks, and reduced in
//! chunk order, so results do not depend on the backend or the thread count.
//!
//! ```
//! use hwisec::channel_sim::mc_downlink_sinr;
//! use hwisec::core_model::Scenario;
//! use hwisec::Backend;
//!
//! let cfg = Scenario::fig4().build().unwrap();
//! let est = mc_downlink_sinr(&cfg, cfg.first_data_slot(), 50, 7, Backend::default());
//! assert_eq!(est.len(), 4);
//! ```

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::closed_form::{training_statistics, TrainingStats};
use crate::core_model::Config;
use crate::exec::{map_chunks, Backend};

type CMat = DMatrix<Complex64>;
type CVec = DVector<Complex64>;

/// Trials per reduction chunk. Fixed so the summation order never changes.
const CHUNK: usize = 16;

/// Independent generator for one trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Circularly symmetric complex Gaussian sample with the given variance.
fn cn<R: Rng + ?Sized>(rng: &mut R, var: f64) -> Complex64 {
    let s = (0.5 * var).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// One draw of every random channel quantity in a coherence block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// User channels, `N × K`, column `k` with per-entry variance `β_k`.
    pub g: CMat,
    /// Eavesdropper channel, `N × N_E`, per-entry variance `β_E`.
    pub g_eve: CMat,
    /// BS oscillator phases, `N_o × T`; column `t-1` holds slot `t`.
    pub psi_traj: DMatrix<f64>,
    /// User oscillator phases, `K × T`; column `t-1` holds slot `t`.
    pub phi_traj: DMatrix<f64>,
    pub seed: u64,
}

impl ChannelRealization {
    /// Phase rotation seen on antenna `i` of user `k` at slot `t`.
    pub fn rotation(&self, cfg: &Config, i: usize, k: usize, t: usize) -> Complex64 {
        let lo = i / cfg.dims().antennas_per_lo();
        Complex64::from_polar(1.0, self.psi_traj[(lo, t - 1)] + self.phi_traj[(k, t - 1)])
    }

    /// BS-only phase rotation of antenna `i` at slot `t`.
    pub fn bs_rotation(&self, cfg: &Config, i: usize, t: usize) -> Complex64 {
        let lo = i / cfg.dims().antennas_per_lo();
        Complex64::from_polar(1.0, self.psi_traj[(lo, t - 1)])
    }

    /// Effective channel `Θ_k(t) g_k`.
    pub fn effective_channel(&self, cfg: &Config, k: usize, t: usize) -> CVec {
        CVec::from_fn(cfg.dims().n_bs, |i, _| {
            self.rotation(cfg, i, k, t) * self.g[(i, k)]
        })
    }
}

fn wiener<R: Rng + ?Sized>(rng: &mut R, rows: usize, t_len: usize, var: f64) -> DMatrix<f64> {
    let sd = var.sqrt();
    let mut m = DMatrix::zeros(rows, t_len);
    for r in 0..rows {
        for t in 1..t_len {
            let step: f64 = rng.sample(StandardNormal);
            m[(r, t)] = m[(r, t - 1)] + sd * step;
        }
    }
    m
}

/// Draw channels and phase trajectories from `rng`.
pub fn draw_realization_from<R: Rng + ?Sized>(
    cfg: &Config,
    rng: &mut R,
    seed: u64,
) -> ChannelRealization {
    let d = cfg.dims();
    let beta = &cfg.pathloss().beta_k;
    let mut g = CMat::zeros(d.n_bs, d.k_users);
    for k in 0..d.k_users {
        for i in 0..d.n_bs {
            g[(i, k)] = cn(rng, beta[k]);
        }
    }
    let beta_e = cfg.pathloss().beta_eve;
    let mut g_eve = CMat::zeros(d.n_bs, d.n_eve);
    for e in 0..d.n_eve {
        for i in 0..d.n_bs {
            g_eve[(i, e)] = cn(rng, beta_e);
        }
    }
    let psi_traj = wiener(rng, d.n_lo, d.t_coh, cfg.hwi().sigma_psi2());
    let phi_traj = wiener(rng, d.k_users, d.t_coh, cfg.hwi().sigma_phi2());
    ChannelRealization {
        g,
        g_eve,
        psi_traj,
        phi_traj,
        seed,
    }
}

/// Draw a realization fully determined by `seed`.
pub fn draw_realization(cfg: &Config, seed: u64) -> ChannelRealization {
    draw_realization_from(cfg, &mut trial_rng(seed, 0), seed)
}

/// Received training signals, one `N × B_b` matrix per sub-phase whose
/// column `i` is the vector received in the sub-phase's `i`-th slot.
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkObservations {
    pub per_phase: Vec<CMat>,
}

/// Simulate the uplink training window for a realization.
///
/// User transmit distortion is drawn independently on every receive
/// antenna, matching the per-antenna covariance `U ⊗ I_N` that the
/// closed-form analysis is built on. Receive distortion uses the realized
/// per-antenna power `κ_r^BS p_τ Σ_k |g_k^i|²`.
pub fn simulate_training<R: Rng + ?Sized>(
    real: &ChannelRealization,
    cfg: &Config,
    rng: &mut R,
) -> UplinkObservations {
    simulate_training_scaled(real, cfg, rng, 1.0)
}

/// Training with every additive noise source scaled by `noise`.
pub(crate) fn simulate_training_scaled<R: Rng + ?Sized>(
    real: &ChannelRealization,
    cfg: &Config,
    rng: &mut R,
    noise: f64,
) -> UplinkObservations {
    let sched = cfg.schedule();
    let hwi = cfg.hwi();
    let n = cfg.dims().n_bs;
    let pt = sched.p_tau;
    let mut per_phase = Vec::with_capacity(sched.b_o);
    for b in 0..sched.b_o {
        let users = &sched.assignments[b];
        let mut y = CMat::zeros(n, sched.sub_phase_lengths[b]);
        for (i, tau) in sched.slots(b).enumerate() {
            for &k in users {
                let pilot = sched.pilot_matrices[b][(i, sched.column_of(k))];
                for a in 0..n {
                    let s = pilot + cn(rng, noise * hwi.kappa_t_mt * pt);
                    y[(a, i)] += real.rotation(cfg, a, k, tau) * real.g[(a, k)] * s;
                }
            }
            for a in 0..n {
                let power: f64 = users.iter().map(|&k| pt * real.g[(a, k)].norm_sqr()).sum();
                y[(a, i)] += cn(rng, noise * hwi.kappa_r_bs * power) + cn(rng, noise * hwi.xi_ul);
            }
        }
        per_phase.push(y);
    }
    UplinkObservations { per_phase }
}

/// LMMSE estimates of every user's effective channel at the design slot, `N × K`.
pub fn lmmse_estimate(obs: &UplinkObservations, stats: &TrainingStats, cfg: &Config) -> CMat {
    let d = cfg.dims();
    let sched = cfg.schedule();
    let mut est = CMat::zeros(d.n_bs, d.k_users);
    for k in 0..d.k_users {
        let w = stats.lmmse_weights(cfg, k).map(|v| v.conj());
        est.set_column(k, &(&obs.per_phase[sched.sub_phase_of(k)] * w));
    }
    est
}

/// Matched-filter data precoder and grouped null-space AN precoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoders {
    /// `N × K`, unit-norm columns.
    pub f_mat: CMat,
    /// `N × L`, orthonormal columns, each group block orthogonal to that
    /// group's slice of every estimate.
    pub a_mat: CMat,
}

/// Orthonormal basis of the orthogonal complement of the columns of `g`,
/// truncated to `count` vectors.
pub fn null_space_basis(g: &CMat, count: usize) -> CMat {
    let n = g.nrows();
    let r = g.ncols().min(n);
    let qr = g.clone().qr();
    let mut qh = CMat::identity(n, n);
    qr.q_tr_mul(&mut qh);
    // Rows r.. of Qᴴ span the complement; take the first `count` of them.
    qh.rows(r, count.min(n - r)).adjoint()
}

/// Build the precoders from channel estimates.
pub fn build_precoders(est: &CMat, cfg: &Config) -> Precoders {
    let d = cfg.dims();
    let mut f_mat = est.clone();
    for mut col in f_mat.column_iter_mut() {
        let nrm = col.norm();
        col /= Complex64::new(nrm, 0.0);
    }
    let l = d.an_dims();
    let mut a_mat = CMat::zeros(d.n_bs, l);
    if l > 0 {
        let ng = d.antennas_per_group();
        let scale = Complex64::new(1.0 / (d.m_groups as f64).sqrt(), 0.0);
        for m in 0..d.m_groups {
            let block = est.rows(m * ng, ng).into_owned();
            let basis = null_space_basis(&block, l);
            a_mat.rows_mut(m * ng, ng).copy_from(&(basis * scale));
        }
    }
    Precoders { f_mat, a_mat }
}

/// Everything a trial needs after training: realization, estimates, precoders.
#[derive(Debug, Clone)]
pub struct TrialState {
    pub real: ChannelRealization,
    pub estimates: CMat,
    pub precoders: Precoders,
    /// Diagonal of the BS transmit distortion covariance.
    pub upsilon: DVector<f64>,
}

/// Run one complete trial up to precoder construction.
pub fn run_trial(cfg: &Config, stats: &TrainingStats, seed: u64, trial: u64) -> TrialState {
    let mut rng = trial_rng(seed, trial);
    let real = draw_realization_from(cfg, &mut rng, seed);
    let obs = simulate_training(&real, cfg, &mut rng);
    let estimates = lmmse_estimate(&obs, stats, cfg);
    let precoders = build_precoders(&estimates, cfg);
    let upsilon = bs_distortion_diag(cfg, &precoders);
    TrialState {
        real,
        estimates,
        precoders,
        upsilon,
    }
}

/// `κ_t^BS · diag(p F Fᴴ + q A Aᴴ)`.
pub fn bs_distortion_diag(cfg: &Config, prec: &Precoders) -> DVector<f64> {
    let pw = cfg.power();
    let kappa = cfg.hwi().kappa_t_bs;
    DVector::from_fn(cfg.dims().n_bs, |i, _| {
        let f: f64 = prec.f_mat.row(i).iter().map(|v| v.norm_sqr()).sum();
        let a: f64 = prec.a_mat.row(i).iter().map(|v| v.norm_sqr()).sum();
        kappa * (pw.p_data * f + pw.q_an * a)
    })
}

/// Per-user sample at one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSample {
    /// `g_k(t)ᴴ f_k`.
    pub desired: Complex64,
    /// `|g_k(t)ᴴ f_l|²` for every `l`.
    pub cross: Vec<f64>,
    /// `g_k(t)ᴴ (q A Aᴴ + Υ) g_k(t)`.
    pub an_and_distortion: f64,
    /// Receiver distortion power at the user, `κ_r^MT g_k(t)ᴴ X g_k(t)` with
    /// `X = (P_T/N) I` the transmit covariance averaged over the channel
    /// ensemble.
    pub mt_distortion: f64,
}

/// Downlink samples of every user at slot `t` for one trial.
pub fn user_samples(cfg: &Config, st: &TrialState, t: usize) -> Vec<UserSample> {
    let d = cfg.dims();
    let pw = cfg.power();
    let kappa_r = cfg.hwi().kappa_r_mt;
    let prec = &st.precoders;
    (0..d.k_users)
        .map(|k| {
            let g = st.real.effective_channel(cfg, k, t);
            let gf = prec.f_mat.ad_mul(&g);
            let cross: Vec<f64> = gf.iter().map(|v| v.norm_sqr()).collect();
            let an = if pw.q_an > 0.0 {
                prec.a_mat.ad_mul(&g).norm_squared()
            } else {
                0.0
            };
            let dist: f64 = g
                .iter()
                .zip(st.upsilon.iter())
                .map(|(v, u)| u * v.norm_sqr())
                .sum();
            UserSample {
                desired: gf[k].conj(),
                an_and_distortion: pw.q_an * an + dist,
                mt_distortion: kappa_r * pw.p_total / d.n_bs as f64 * g.norm_squared(),
                cross,
            }
        })
        .collect()
}

/// Eavesdropper SINR against user `k` at slot `t`, or `None` when the
/// interference-plus-distortion matrix it inverts is singular.
pub fn eve_sinr(cfg: &Config, st: &TrialState, k: usize, t: usize) -> Option<f64> {
    let d = cfg.dims();
    let pw = cfg.power();
    let kappa = cfg.hwi().kappa_t_bs;
    if kappa == 0.0 && (pw.q_an == 0.0 || d.n_eve > d.an_dims()) {
        return None;
    }
    let h = CMat::from_fn(d.n_bs, d.n_eve, |i, e| {
        st.real.bs_rotation(cfg, i, t) * st.real.g_eve[(i, e)]
    });
    let mut x = CMat::zeros(d.n_eve, d.n_eve);
    if pw.q_an > 0.0 {
        let ah = st.precoders.a_mat.ad_mul(&h);
        x += ah.ad_mul(&ah) * Complex64::new(pw.q_an, 0.0);
    }
    let ups = st.upsilon.map(|u| Complex64::new(u, 0.0));
    let uh = CMat::from_fn(d.n_bs, d.n_eve, |i, e| ups[i] * h[(i, e)]);
    x += h.ad_mul(&uh);
    let hf = h.ad_mul(&st.precoders.f_mat.column(k));
    let chol = Cholesky::<Complex64, Dyn>::new(x)?;
    let sol = chol.solve(&hf);
    let g = pw.p_data * hf.dotc(&sol).re;
    g.is_finite().then_some(g)
}

/// Running sums for one user at one slot.
#[derive(Debug, Clone)]
struct UserAcc {
    /// Sums of `(Re d, Im d, Σ_l cross, quad, mt)`.
    s: [f64; 5],
    /// Sums of outer products of the same vector.
    ss: [[f64; 5]; 5],
    cross: Vec<f64>,
}

impl UserAcc {
    fn new(k_users: usize) -> Self {
        Self {
            s: [0.0; 5],
            ss: [[0.0; 5]; 5],
            cross: vec![0.0; k_users],
        }
    }

    fn add(&mut self, u: &UserSample) {
        let x = [
            u.desired.re,
            u.desired.im,
            u.cross.iter().sum(),
            u.an_and_distortion,
            u.mt_distortion,
        ];
        for i in 0..5 {
            self.s[i] += x[i];
            for j in 0..5 {
                self.ss[i][j] += x[i] * x[j];
            }
        }
        for (a, b) in self.cross.iter_mut().zip(&u.cross) {
            *a += b;
        }
    }

    fn merge(&mut self, o: &UserAcc) {
        for i in 0..5 {
            self.s[i] += o.s[i];
            for j in 0..5 {
                self.ss[i][j] += o.ss[i][j];
            }
        }
        for (a, b) in self.cross.iter_mut().zip(&o.cross) {
            *a += b;
        }
    }
}

#[derive(Debug, Clone)]
struct EveAcc {
    sum: f64,
    sumsq: f64,
    singular: usize,
}

#[derive(Debug, Clone)]
struct Acc {
    trials: usize,
    users: Vec<Vec<UserAcc>>,
    eve: Vec<EveAcc>,
}

impl Acc {
    fn new(n_t: usize, k_users: usize) -> Self {
        Self {
            trials: 0,
            users: vec![vec![UserAcc::new(k_users); k_users]; n_t],
            eve: vec![
                EveAcc {
                    sum: 0.0,
                    sumsq: 0.0,
                    singular: 0
                };
                n_t
            ],
        }
    }

    fn merge(&mut self, o: &Acc) {
        self.trials += o.trials;
        for (a, b) in self.users.iter_mut().zip(&o.users) {
            for (x, y) in a.iter_mut().zip(b) {
                x.merge(y);
            }
        }
        for (a, b) in self.eve.iter_mut().zip(&o.eve) {
            a.sum += b.sum;
            a.sumsq += b.sumsq;
            a.singular += b.singular;
        }
    }
}

/// Ensemble statistics of one user at one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSlotStats {
    /// Mean of `g_k(t)ᴴ f_k`.
    pub desired_mean: Complex64,
    /// Mean of `|g_k(t)ᴴ f_l|²` for every `l`.
    pub cross_second_moments: Vec<f64>,
    /// Mean of `g_k(t)ᴴ (q A Aᴴ + Υ) g_k(t)`.
    pub an_distortion_mean: f64,
    /// Mean receiver distortion power.
    pub mt_distortion_mean: f64,
    /// SINR assembled from the means above.
    pub gamma: f64,
    /// Delta-method standard error of `gamma`.
    pub gamma_se: f64,
}

/// Monte Carlo estimate of the eavesdropper capacity at one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EveEstimate {
    Finite {
        mean: f64,
        se: f64,
    },
    /// At least one realization produced a singular eavesdropper matrix.
    Unbounded,
}

impl EveEstimate {
    pub fn mean(self) -> Option<f64> {
        match self {
            EveEstimate::Finite { mean, .. } => Some(mean),
            EveEstimate::Unbounded => None,
        }
    }
}

/// Ensemble moments for a list of slots.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub slots: Vec<usize>,
    /// Indexed `[slot index][user]`.
    pub users: Vec<Vec<UserSlotStats>>,
    /// Eavesdropper capacity against `eve_user`, per slot.
    pub eve: Vec<EveEstimate>,
    pub eve_user: usize,
    pub trial_count: usize,
    pub seed: u64,
}

fn finish_user(cfg: &Config, a: &UserAcc, n: usize) -> UserSlotStats {
    let nf = n as f64;
    let m: Vec<f64> = a.s.iter().map(|v| v / nf).collect();
    let p = cfg.power().p_data;
    let xi = cfg.hwi().xi_dl;
    let num = p * (m[0] * m[0] + m[1] * m[1]);
    let den = p * m[2] - num + m[3] + m[4] + xi;
    let gamma = num / den;
    let gamma_se = if n > 1 {
        let d2 = den * den;
        let grad = [
            2.0 * p * m[0] * (den + num) / d2,
            2.0 * p * m[1] * (den + num) / d2,
            -num * p / d2,
            -num / d2,
            -num / d2,
        ];
        let mut var = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                let cov = (a.ss[i][j] - nf * m[i] * m[j]) / (nf - 1.0);
                var += grad[i] * grad[j] * cov;
            }
        }
        (var.max(0.0) / nf).sqrt()
    } else {
        f64::NAN
    };
    UserSlotStats {
        desired_mean: Complex64::new(m[0], m[1]),
        cross_second_moments: a.cross.iter().map(|v| v / nf).collect(),
        an_distortion_mean: m[3],
        mt_distortion_mean: m[4],
        gamma,
        gamma_se,
    }
}

/// Run `trials` independent trials and collect statistics at every slot in `slots`.
pub fn mc_ensemble(
    cfg: &Config,
    slots: &[usize],
    trials: usize,
    seed: u64,
    backend: Backend,
) -> EnsembleResult {
    assert!(trials >= 1, "at least one trial is required");
    let stats = training_statistics(cfg, cfg.t0());
    let k_users = cfg.dims().k_users;
    let eve_user = cfg.reference_user();
    let parts = map_chunks(backend, trials, CHUNK, |range| {
        let mut acc = Acc::new(slots.len(), k_users);
        for trial in range {
            let st = run_trial(cfg, &stats, seed, trial as u64);
            for (ti, &t) in slots.iter().enumerate() {
                for (k, s) in user_samples(cfg, &st, t).iter().enumerate() {
                    acc.users[ti][k].add(s);
                }
                match eve_sinr(cfg, &st, eve_user, t) {
                    Some(g) => {
                        let c = g.ln_1p() / std::f64::consts::LN_2;
                        acc.eve[ti].sum += c;
                        acc.eve[ti].sumsq += c * c;
                    }
                    None => acc.eve[ti].singular += 1,
                }
            }
            acc.trials += 1;
        }
        acc
    });
    let mut total = Acc::new(slots.len(), k_users);
    for p in &parts {
        total.merge(p);
    }

    let n = total.trials;
    let users = total
        .users
        .iter()
        .map(|row| row.iter().map(|a| finish_user(cfg, a, n)).collect())
        .collect();
    let eve = total
        .eve
        .iter()
        .map(|e| {
            if e.singular > 0 {
                EveEstimate::Unbounded
            } else {
                let nf = n as f64;
                let mean = e.sum / nf;
                let var = if n > 1 {
                    ((e.sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0)
                } else {
                    0.0
                };
                EveEstimate::Finite {
                    mean,
                    se: (var / nf).sqrt(),
                }
            }
        })
        .collect();
    EnsembleResult {
        slots: slots.to_vec(),
        users,
        eve,
        eve_user,
        trial_count: n,
        seed,
    }
}

/// Per-user SINR estimates `(γ̂_k(t), standard error)` at slot `t`.
pub fn mc_downlink_sinr(
    cfg: &Config,
    t: usize,
    trials: usize,
    seed: u64,
    backend: Backend,
) -> Vec<(f64, f64)> {
    let res = mc_ensemble(cfg, &[t], trials, seed, backend);
    res.users[0].iter().map(|u| (u.gamma, u.gamma_se)).collect()
}

/// Eavesdropper capacity estimate at slot `t` against the reference user.
pub fn mc_eve_capacity(
    cfg: &Config,
    t: usize,
    trials: usize,
    seed: u64,
    backend: Backend,
) -> EveEstimate {
    mc_ensemble(cfg, &[t], trials, seed, backend).eve[0]
}

/// Which data slots the secrecy-rate estimate evaluates directly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TGrid {
    /// Every data slot.
    Full,
    /// `n` slots spread evenly over the data window, endpoints included.
    Uniform(usize),
    /// An explicit list of slots.
    Slots(Vec<usize>),
}

impl TGrid {
    /// Resolve to a sorted, de-duplicated list of slots in `B+1..=T`.
    pub fn resolve(&self, cfg: &Config) -> Vec<usize> {
        let lo = cfg.first_data_slot();
        let hi = cfg.dims().t_coh;
        let mut v: Vec<usize> = match self {
            TGrid::Full => (lo..=hi).collect(),
            TGrid::Uniform(n) => {
                let n = (*n).max(1);
                if n == 1 {
                    vec![lo]
                } else {
                    (0..n)
                        .map(|i| {
                            lo + ((hi - lo) as f64 * i as f64 / (n - 1) as f64).round() as usize
                        })
                        .collect()
                }
            }
            TGrid::Slots(s) => s
                .iter()
                .copied()
                .filter(|t| (lo..=hi).contains(t))
                .collect(),
        };
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Monte Carlo secrecy-rate estimate with its per-slot ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct SecrecyEstimate {
    /// Estimated ergodic secrecy rate of the reference user.
    pub rate: f64,
    pub slots: Vec<usize>,
    /// `[log₂(1+γ̂) − Ĉ_E]⁺` at each evaluated slot (0 when unbounded).
    pub per_slot: Vec<f64>,
    pub ensemble: EnsembleResult,
}

/// Linear interpolation of `(xs, ys)` summed over every integer in `lo..=hi`.
/// Values outside the sampled range are held constant.
fn interpolated_sum(xs: &[usize], ys: &[f64], lo: usize, hi: usize) -> f64 {
    let mut sum = 0.0;
    let mut seg = 0;
    for t in lo..=hi {
        while seg + 1 < xs.len() && xs[seg + 1] <= t {
            seg += 1;
        }
        let v = if t <= xs[0] {
            ys[0]
        } else if seg + 1 >= xs.len() {
            ys[xs.len() - 1]
        } else {
            let (x0, x1) = (xs[seg] as f64, xs[seg + 1] as f64);
            let w = (t as f64 - x0) / (x1 - x0);
            ys[seg] * (1.0 - w) + ys[seg + 1] * w
        };
        sum += v;
    }
    sum
}

/// Estimate the secrecy rate of the reference user from simulated slots,
/// filling the remaining data slots by linear interpolation.
pub fn mc_secrecy_rate(
    cfg: &Config,
    trials: usize,
    t_grid: &TGrid,
    seed: u64,
    backend: Backend,
) -> SecrecyEstimate {
    let slots = t_grid.resolve(cfg);
    assert!(!slots.is_empty(), "the slot grid has no data slots");
    let ens = mc_ensemble(cfg, &slots, trials, seed, backend);
    let k = ens.eve_user;
    let per_slot: Vec<f64> = (0..slots.len())
        .map(|i| match ens.eve[i].mean() {
            Some(ce) => (ens.users[i][k].gamma.ln_1p() / std::f64::consts::LN_2 - ce).max(0.0),
            None => 0.0,
        })
        .collect();
    let sum = interpolated_sum(&slots, &per_slot, cfg.first_data_slot(), cfg.dims().t_coh);
    SecrecyEstimate {
        rate: sum / cfg.dims().t_coh as f64,
        slots,
        per_slot,
        ensemble: ens,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core_model::Scenario;
    use approx::assert_relative_eq;

    #[test]
    fn no_phase_noise_means_flat_trajectories() {
        let cfg = Scenario::fig4().with_sigma(0.0).build().unwrap();
        let r = draw_realization(&cfg, 3);
        assert!(r.psi_traj.iter().all(|&v| v == 0.0));
        assert!(r.phi_traj.iter().all(|&v| v == 0.0));
        assert_eq!(r.rotation(&cfg, 5, 1, 300), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn same_seed_same_realization() {
        let cfg = Scenario::fig4().with_sigma(6.0).build().unwrap();
        assert_eq!(draw_realization(&cfg, 11), draw_realization(&cfg, 11));
        assert_ne!(draw_realization(&cfg, 11).g, draw_realization(&cfg, 12).g);
    }

    #[test]
    fn noiseless_training_returns_scaled_channel() {
        let mut s = Scenario::fig4()
            .with_sigma(0.0)
            .with_kappa(0.0)
            .with_users(1);
        s.b_train = 3;
        let cfg = s.build().unwrap();
        let mut rng = trial_rng(1, 0);
        let real = draw_realization_from(&cfg, &mut rng, 1);
        let obs = simulate_training_scaled(&real, &cfg, &mut rng, 0.0);
        let om = cfg.schedule().pilot(0);
        for i in 0..3 {
            let want = real.g.column(0) * om[i];
            assert!((obs.per_phase[0].column(i) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn silent_users_do_not_leak_into_other_phases() {
        let mut s = Scenario::fig4().with_sigma(0.0).with_kappa(0.0);
        s.b_o = 4;
        let cfg = s.build().unwrap();
        let mut rng = trial_rng(2, 0);
        let real = draw_realization_from(&cfg, &mut rng, 2);
        let obs = simulate_training_scaled(&real, &cfg, &mut rng, 0.0);
        for b in 0..4 {
            let om = cfg.schedule().pilot(b)[0];
            let want = real.g.column(b) * om;
            assert!((obs.per_phase[b].column(0) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn single_slot_estimate_uses_scalar_weight() {
        let mut s = Scenario::fig4().with_sigma(6.0);
        s.b_o = 4;
        let cfg = s.build().unwrap();
        let stats = training_statistics(&cfg, cfg.t0());
        let mut rng = trial_rng(5, 0);
        let real = draw_realization_from(&cfg, &mut rng, 5);
        let obs = simulate_training(&real, &cfg, &mut rng);
        let est = lmmse_estimate(&obs, &stats, &cfg);
        let hwi = cfg.hwi();
        let pt = cfg.schedule().p_tau;
        for k in 0..4 {
            let decay = (-0.5 * hwi.sigma_sum2() * (cfg.t0() - (k + 1)) as f64).exp();
            let om = cfg.schedule().pilot(k)[0];
            let w = om.conj() * decay / (pt * (1.0 + hwi.kappa_t_mt + hwi.kappa_r_bs) + hwi.xi_ul);
            let want = obs.per_phase[k].column(0) * w;
            assert!((est.column(k) - &want).norm() < 1e-10 * want.norm());
        }
    }

    #[test]
    fn precoder_invariants() {
        for m_groups in [1, 2, 4] {
            let mut s = Scenario::fig4();
            s.n_bs = 64;
            s.n_lo = 4;
            s.m_groups = m_groups;
            let cfg = s.build().unwrap();
            let mut rng = trial_rng(9, m_groups as u64);
            let est = CMat::from_fn(64, 4, |_, _| cn(&mut rng, 1.0));
            let p = build_precoders(&est, &cfg);
            let l = 64 / m_groups - 4;
            assert_eq!(p.a_mat.shape(), (64, l));
            for col in p.f_mat.column_iter() {
                assert_relative_eq!(col.norm(), 1.0, max_relative = 1e-12);
            }
            let gram = p.a_mat.ad_mul(&p.a_mat) - CMat::identity(l, l);
            assert!(gram.norm() < 1e-10, "{}", gram.norm());
            let ng = 64 / m_groups;
            for m in 0..m_groups {
                let g = est.rows(m * ng, ng);
                let a = p.a_mat.rows(m * ng, ng);
                let leak = g.ad_mul(&a).norm() / g.norm();
                assert!(leak < 1e-10, "{leak}");
            }
        }
    }

    #[test]
    fn rank_deficient_estimates_still_give_l_columns() {
        let mut rng = trial_rng(4, 0);
        let col = CVec::from_fn(16, |_, _| cn(&mut rng, 1.0));
        let g = CMat::from_columns(&[col.clone(), col.clone() * Complex64::new(2.0, 0.0)]);
        let b = null_space_basis(&g, 14);
        assert_eq!(b.shape(), (16, 14));
        assert!(g.ad_mul(&b).norm() < 1e-10 * g.norm());
        assert!((b.ad_mul(&b) - CMat::identity(14, 14)).norm() < 1e-10);
    }

    #[test]
    fn eve_sinr_ignores_eve_path_loss() {
        let cfg = Scenario::fig1().build().unwrap();
        let stats = training_statistics(&cfg, cfg.t0());
        let st = run_trial(&cfg, &stats, 21, 0);
        let mut scaled = st.clone();
        scaled.real.g_eve *= Complex64::new(10f64.sqrt(), 0.0);
        let a = eve_sinr(&cfg, &st, 31, 40).unwrap();
        let b = eve_sinr(&cfg, &scaled, 31, 40).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-10);
    }

    #[test]
    fn an_only_jamming_keeps_eve_finite() {
        let mut s = Scenario::fig1();
        s.hwi.kappa_t_bs = 0.0;
        let cfg = s.build().unwrap();
        let stats = training_statistics(&cfg, cfg.t0());
        let st = run_trial(&cfg, &stats, 3, 0);
        assert!(eve_sinr(&cfg, &st, 0, 33).is_some());
        let cfg = Scenario::fig1()
            .with_phi(1.0)
            .with_kappa(0.0)
            .build()
            .unwrap();
        let st = run_trial(&cfg, &stats, 3, 0);
        assert!(eve_sinr(&cfg, &st, 0, 33).is_none());
    }

    #[test]
    fn interpolation_is_exact_on_full_grid() {
        let xs: Vec<usize> = (5..=10).collect();
        let ys = vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        assert_eq!(interpolated_sum(&xs, &ys, 5, 10), 63.0);
        assert_eq!(
            interpolated_sum(&[5, 9], &[1.0, 5.0], 5, 10),
            1.0 + 2.0 + 3.0 + 4.0 + 5.0 + 5.0
        );
        assert_eq!(interpolated_sum(&[7], &[2.0], 5, 10), 12.0);
    }

    #[test]
    fn uniform_grid_spans_window() {
        let cfg = Scenario::fig4().build().unwrap();
        let g = TGrid::Uniform(5).resolve(&cfg);
        assert_eq!(g.first(), Some(&5));
        assert_eq!(g.last(), Some(&500));
        assert_eq!(g.len(), 5);
        assert_eq!(TGrid::Full.resolve(&cfg).len(), 496);
        assert_eq!(TGrid::Slots(vec![1, 9, 9, 600]).resolve(&cfg), vec![9]);
    }
}
