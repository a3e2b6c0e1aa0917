//! Joint uplink optimization: weighted-MMSE block coordinate descent over
//! receive combiners, MSE weights, user transmit powers, and repeater
//! amplification gains, under power and interaction-stability
//! constraints.
//!
//! Weighted sum-rate maximization is equivalent to weighted MSE
//! minimization, which splits into four blocks with exact minimizers:
//! MMSE combiners, closed-form weights `1/xi`, a closed-form per-user
//! power clamp, and a convex QP in the gains. Each pass runs the blocks
//! in that order; the weighted sum rate after a full pass is monotone
//! nondecreasing (up to solver tolerance) as long as the feasible set is
//! fixed, i.e. the repeater power coupling (C5) is off.
//!
//! The optimization itself treats the swarm as non-interacting
//! (`G = D_a`); the stability constraint keeps the coupling small enough
//! for that to be a good approximation, and the certified margin `eta`
//! keeps the true system away from the instability boundary.

use num_complex::Complex64;

use crate::channel::{ChannelSet, RepeaterConfig};
use crate::numerics::{dot_h, solve_qp, CMat, NumericsError, QpProblem};
use crate::scenario::{NoisePowers, Scenario};
use crate::uplink::{assemble, mmse_combiners, weighted_sum_rate, RateUnit, UplinkSystem};

/// Which row of the stability constraint (C3) bounds the gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum C3Variant {
    /// `alpha_n * sum_n' |h_nn'| <= eta` for every n: a per-gain cap,
    /// folded into the box bounds.
    #[default]
    RowGain,
    /// `sum_n' alpha_n' |h_nn'| <= eta` for every n: coupled linear rows.
    ColumnGain,
}

/// Tuning of one optimization run.
#[derive(Debug, Clone)]
pub struct OptConfig {
    /// Stability margin in (0, 1].
    pub eta: f64,
    pub c3_variant: C3Variant,
    /// Cap gains by the repeater transmit power budget (couples the QP
    /// bounds to the current user powers).
    pub enforce_c5: bool,
    pub i_max: usize,
    /// Stop when the weighted sum rate improves by less than this.
    pub eps: f64,
    /// Per-user rate weights.
    pub gamma: Vec<f64>,
    pub rate_unit: RateUnit,
    pub qp_tol: f64,
}

impl OptConfig {
    /// Sum-rate maximization defaults: eta 0.9, first (C3) row, repeater
    /// power cap on, at most 50 passes, 1e-3 bps/Hz stopping threshold.
    pub fn equal_weights(k: usize) -> Self {
        OptConfig {
            eta: 0.9,
            c3_variant: C3Variant::RowGain,
            enforce_c5: true,
            i_max: 50,
            eps: 1e-3,
            gamma: vec![1.0; k],
            rate_unit: RateUnit::Bits,
            qp_tol: 1e-8,
        }
    }
}

/// Physical limits and noise powers the optimizer works under.
#[derive(Debug, Clone, Copy)]
pub struct OptLimits {
    /// User power cap, watts.
    pub p_max_w: f64,
    /// Repeater power cap, watts.
    pub p_max_rep_w: f64,
    /// Maximum amplification gain, linear amplitude.
    pub a_max: f64,
    pub sigma_b2: f64,
    pub sigma_r2: f64,
}

impl OptLimits {
    pub fn from_scenario(s: &Scenario) -> Self {
        let noise = s.noise_power();
        OptLimits {
            p_max_w: crate::units::dbm_to_watts(s.p_max_dbm),
            p_max_rep_w: crate::units::dbm_to_watts(s.p_max_rep_dbm),
            a_max: crate::units::db_to_amplitude(s.a_max_db),
            sigma_b2: noise.bs_w,
            sigma_r2: noise.rep_w,
        }
    }

    fn noise(&self) -> NoisePowers {
        NoisePowers {
            bs_w: self.sigma_b2,
            rep_w: self.sigma_r2,
        }
    }
}

/// Iterates of one optimization run.
#[derive(Debug, Clone)]
pub struct OptState {
    pub combiners: Vec<Vec<Complex64>>,
    /// MSE weights, at least 1 since the MMSE error never exceeds 1.
    pub varpi: Vec<f64>,
    /// User powers in `[0, P_max]`, watts.
    pub rho: Vec<f64>,
    /// Repeater gains in `[0, A_max]`, linear amplitude.
    pub alpha: Vec<f64>,
    /// Weighted sum rate after each full pass.
    pub trace: Vec<f64>,
    pub iter: usize,
    /// Times the MSE had to be clamped away from zero.
    pub degenerate_mse_events: usize,
}

/// Feasible starting point: full user power and a common gain at half of
/// the tightest cap (gain limit, stability row, and, when enforced, the
/// repeater power bound at full user power).
pub fn initialize(cs: &ChannelSet, limits: &OptLimits, cfg: &OptConfig) -> OptState {
    let k = cs.n_users();
    let n = cs.n_repeaters();
    let rho = vec![limits.p_max_w; k];
    let mut cap = limits.a_max;
    if n > 0 {
        let max_row_sum = (0..n)
            .map(|i| (0..n).map(|j| cs.hr.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max);
        if max_row_sum > 0.0 {
            cap = cap.min(cfg.eta / max_row_sum);
        }
        if cfg.enforce_c5 {
            for bound in c5_bounds(cs, &rho, limits) {
                cap = cap.min(bound);
            }
        }
    }
    OptState {
        combiners: vec![vec![Complex64::new(0.0, 0.0); cs.n_antennas()]; k],
        varpi: vec![1.0; k],
        rho,
        alpha: vec![0.5 * cap; n],
        trace: Vec::new(),
        iter: 0,
        degenerate_mse_events: 0,
    }
}

/// MMSE combiners for the current powers (block 1 of each pass).
pub fn update_combiners(sys: &UplinkSystem, st: &OptState) -> Vec<Vec<Complex64>> {
    mmse_combiners(sys, &st.rho)
}

/// Optimal MSE weights `1 / (1 - sqrt(rho_k) h_k^H c_k)` for the current
/// MMSE combiners. Returns the weights and the number of degenerate
/// clamps applied.
pub fn update_weights(sys: &UplinkSystem, st: &OptState) -> (Vec<f64>, usize) {
    let mut clamps = 0;
    let w = (0..sys.h.cols())
        .map(|k| {
            let xi = 1.0 - st.rho[k].sqrt() * dot_h(&sys.h.col(k), &st.combiners[k]).re;
            if xi <= 0.0 {
                clamps += 1;
                1.0 / 1e-12
            } else {
                1.0 / xi
            }
        })
        .collect();
    (w, clamps)
}

/// Closed-form power update, decoupled across users:
/// `rho_k = min(P_max, (gamma_k w_k Re(c_k^H h_k) / sum_k' gamma_k' w_k'
/// |c_k'^H h_k|^2)^2)`. A vanishing numerator silences the user.
pub fn update_powers(sys: &UplinkSystem, st: &OptState, gamma: &[f64], p_max_w: f64) -> Vec<f64> {
    let k = sys.h.cols();
    (0..k)
        .map(|uk| {
            let hk = sys.h.col(uk);
            let num = gamma[uk] * st.varpi[uk] * dot_h(&st.combiners[uk], &hk).re;
            if num <= 0.0 {
                return 0.0;
            }
            let den: f64 = (0..k)
                .map(|kp| gamma[kp] * st.varpi[kp] * dot_h(&st.combiners[kp], &hk).norm_sqr())
                .sum();
            (num / den).powi(2).min(p_max_w)
        })
        .collect()
}

/// Repeater power caps (C5): `alpha_n <= sqrt(P_rep / (sum_k rho_k
/// |h^U_nk|^2 + sigma_R^2))`, recomputed from the current user powers.
fn c5_bounds(cs: &ChannelSet, rho: &[f64], limits: &OptLimits) -> Vec<f64> {
    let n = cs.n_repeaters();
    (0..n)
        .map(|i| {
            let input_power: f64 = (0..cs.n_users())
                .map(|k| rho[k] * cs.hu.get(i, k).norm_sqr())
                .sum::<f64>()
                + limits.sigma_r2;
            if input_power <= 0.0 {
                f64::INFINITY
            } else {
                (limits.p_max_rep_w / input_power).sqrt()
            }
        })
        .collect()
}

/// Build the convex QP of the gain update (block 4).
///
/// With the repeater phase shifts absorbed into the BS-repeater columns,
/// the weighted MSE is the quadratic `1/2 a' Gamma a + psi' a` with
/// `Gamma = sum_k gamma_k w_k Re(D_phi^H (H^U D_rho H^U^H + s_R^2 I) D_phi)`
/// and the matching linear term; bounds come from the gain cap, the
/// chosen (C3) row, and optionally the power cap (C5).
pub fn build_alpha_qp(
    cs: &ChannelSet,
    st: &OptState,
    cfg: &OptConfig,
    limits: &OptLimits,
) -> QpProblem {
    let n = cs.n_repeaters();
    let k = cs.n_users();
    let omega = cs.center_omega();

    // phase-absorbed BS-repeater columns: e^{+j w nu_n} h^B_n
    let mut hb_tilde = cs.hb.clone();
    for (c, &nu) in cs.rep_delays_s.iter().enumerate() {
        hb_tilde.scale_col(c, Complex64::from_polar(1.0, omega * nu));
    }

    // M_u = H^U D_rho (H^U)^H + s_R^2 I, shared by every user's quadratic
    let mut m_u = CMat::identity(n).scale(Complex64::new(limits.sigma_r2, 0.0));
    for uk in 0..k {
        if st.rho[uk] == 0.0 {
            continue;
        }
        let col = cs.hu.col(uk);
        for i in 0..n {
            for j in 0..n {
                let v = m_u.get(i, j) + st.rho[uk] * col[i] * col[j].conj();
                m_u.set(i, j, v);
            }
        }
    }

    let mut q = vec![0.0f64; n * n];
    let mut lin = vec![0.0f64; n];
    for uk in 0..k {
        let weight = cfg.gamma[uk] * st.varpi[uk];
        if weight == 0.0 {
            continue;
        }
        let ck = &st.combiners[uk];
        let phi = hb_tilde.hermitian().mul_vec(ck);
        // v = H^U D_rho (H^D)^H c_k - sqrt(rho_k) h^U_k
        let hd_c = cs.hd.hermitian().mul_vec(ck);
        let scaled: Vec<Complex64> = hd_c.iter().zip(&st.rho).map(|(v, &r)| v * r).collect();
        let mut v = cs.hu.mul_vec(&scaled);
        let sqrt_rho = st.rho[uk].sqrt();
        for (i, vi) in v.iter_mut().enumerate() {
            *vi -= sqrt_rho * cs.hu.get(i, uk);
        }
        for i in 0..n {
            lin[i] += weight * (phi[i].conj() * v[i]).re;
            for j in i..n {
                let g = weight * (phi[i].conj() * m_u.get(i, j) * phi[j]).re;
                q[i * n + j] += g;
                if j != i {
                    q[j * n + i] += g;
                }
            }
        }
    }

    // box: 0 <= alpha <= min(A_max, C3 row cap, C5 power cap)
    let row_sums: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| cs.hr.get(i, j).norm()).sum())
        .collect();
    let c5 = if cfg.enforce_c5 {
        c5_bounds(cs, &st.rho, limits)
    } else {
        vec![f64::INFINITY; n]
    };
    let upper: Vec<f64> = (0..n)
        .map(|i| {
            let mut u = limits.a_max.min(c5[i]);
            if cfg.c3_variant == C3Variant::RowGain && row_sums[i] > 0.0 {
                // shaved so that alpha * row_sum <= eta survives rounding
                u = u.min(cfg.eta * (1.0 - 1e-12) / row_sums[i]);
            }
            u
        })
        .collect();

    // coupled stability rows, normalized to O(1) coefficients
    let (ineq_a, ineq_b) = if cfg.c3_variant == C3Variant::ColumnGain {
        let mut a = Vec::with_capacity(n * n);
        let mut b = Vec::with_capacity(n);
        for i in 0..n {
            let scale = (0..n)
                .map(|j| cs.hr.get(i, j).norm())
                .fold(0.0f64, f64::max);
            if scale == 0.0 {
                continue;
            }
            for j in 0..n {
                a.push(cs.hr.get(i, j).norm() / scale);
            }
            b.push(cfg.eta / scale);
        }
        (a, b)
    } else {
        (Vec::new(), Vec::new())
    };

    QpProblem {
        q,
        c: lin,
        lower: vec![0.0; n],
        upper,
        ineq_a,
        ineq_b,
    }
}

/// Exact-feasibility backstop: scale the gains down if a coupled (C3)
/// row is violated by solver roundoff. The rows are homogeneous in the
/// gains, so a uniform shrink restores feasibility exactly.
fn enforce_c3_rows(cs: &ChannelSet, alpha: &mut [f64], cfg: &OptConfig) {
    if cfg.c3_variant != C3Variant::ColumnGain {
        return;
    }
    let n = cs.n_repeaters();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let v: f64 = (0..n).map(|j| cs.hr.get(i, j).norm() * alpha[j]).sum();
        worst = worst.max(v / cfg.eta);
    }
    if worst > 1.0 {
        let shrink = (1.0 - 1e-12) / worst;
        for a in alpha.iter_mut() {
            *a *= shrink;
        }
    }
}

/// Largest violation of (C1), (C2), the chosen (C3) row, and (C5) when
/// enabled; used to assert per-pass feasibility.
pub fn feasibility_violation(
    cs: &ChannelSet,
    st: &OptState,
    cfg: &OptConfig,
    limits: &OptLimits,
) -> f64 {
    let mut v: f64 = 0.0;
    for &r in &st.rho {
        v = v.max(-r).max(r - limits.p_max_w);
    }
    for &a in &st.alpha {
        v = v.max(-a).max(a - limits.a_max);
    }
    let n = cs.n_repeaters();
    match cfg.c3_variant {
        C3Variant::RowGain => {
            for i in 0..n {
                let s: f64 = (0..n).map(|j| cs.hr.get(i, j).norm()).sum();
                v = v.max(st.alpha[i] * s - cfg.eta);
            }
        }
        C3Variant::ColumnGain => {
            for i in 0..n {
                let s: f64 = (0..n).map(|j| cs.hr.get(i, j).norm() * st.alpha[j]).sum();
                v = v.max(s - cfg.eta);
            }
        }
    }
    if cfg.enforce_c5 {
        for (a, bound) in st.alpha.iter().zip(c5_bounds(cs, &st.rho, limits)) {
            v = v.max(a - bound);
        }
    }
    v
}

fn repeater_cfg(cs: &ChannelSet, alpha: &[f64]) -> RepeaterConfig {
    RepeaterConfig {
        alpha: alpha.to_vec(),
        nu_s: cs.rep_delays_s.clone(),
    }
}

/// Evaluate the weighted sum rate of a state, optionally under the full
/// swarm response instead of the `G = D_a` optimization model.
pub fn evaluate_wsr(
    cs: &ChannelSet,
    st: &OptState,
    cfg: &OptConfig,
    limits: &OptLimits,
    use_full_g: bool,
) -> Result<f64, NumericsError> {
    let sys = assemble(cs, &repeater_cfg(cs, &st.alpha), limits.noise(), use_full_g)?;
    Ok(weighted_sum_rate(&sys, &st.rho, &cfg.gamma, cfg.rate_unit))
}

/// Run the block coordinate descent from a feasible initial state.
///
/// Each pass updates combiners, weights, powers, and gains in order,
/// then records the weighted sum rate of the new operating point. Stops
/// when the improvement falls below `eps` or after `i_max` passes. With
/// no repeaters the gain block is skipped and the loop reduces to MMSE
/// combining plus power control.
pub fn run(
    cs: &ChannelSet,
    limits: &OptLimits,
    cfg: &OptConfig,
    init: OptState,
) -> Result<OptState, NumericsError> {
    assert_eq!(cfg.gamma.len(), cs.n_users(), "one weight per user");
    let mut st = init;
    let mut sys = assemble(cs, &repeater_cfg(cs, &st.alpha), limits.noise(), false)?;
    // the loop guard compares successive objective values, starting from
    // the rate of the feasible initial point
    let mut prev_wsr = weighted_sum_rate(&sys, &st.rho, &cfg.gamma, cfg.rate_unit);
    for iter in 1..=cfg.i_max {
        st.combiners = update_combiners(&sys, &st);
        let (varpi, clamps) = update_weights(&sys, &st);
        st.varpi = varpi;
        st.degenerate_mse_events += clamps;
        st.rho = update_powers(&sys, &st, &cfg.gamma, limits.p_max_w);
        if cs.n_repeaters() > 0 {
            let qp = build_alpha_qp(cs, &st, cfg, limits);
            let mut alpha = solve_qp(&qp, cfg.qp_tol)?;
            enforce_c3_rows(cs, &mut alpha, cfg);
            st.alpha = alpha;
        }
        sys = assemble(cs, &repeater_cfg(cs, &st.alpha), limits.noise(), false)?;
        let wsr = weighted_sum_rate(&sys, &st.rho, &cfg.gamma, cfg.rate_unit);
        st.trace.push(wsr);
        st.iter = iter;
        debug_assert!(
            feasibility_violation(cs, &st, cfg, limits) <= 1e-9,
            "iterate left the feasible set"
        );
        if (wsr - prev_wsr).abs() < cfg.eps {
            break;
        }
        prev_wsr = wsr;
    }
    Ok(st)
}
