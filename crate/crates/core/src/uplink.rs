//! Uplink performance of the repeater-assisted system.
//!
//! Builds the composite channel `H = H^D + H^B G H^U` and the colored
//! noise covariance `Sigma = s_B^2 I + s_R^2 H^B G G^H (H^B)^H`, then
//! evaluates sum capacity, the capacity region for small user counts,
//! per-user SINR under arbitrary and MMSE combining, and MSE.

use std::fmt;

use num_complex::Complex64;

use crate::channel::{effective_g, ChannelSet, RepeaterConfig};
use crate::numerics::{dot_h, norm_sq, CMat, CholeskyFactor, NumericsError};
use crate::scenario::NoisePowers;

/// Base of the rate logarithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateUnit {
    /// bits (bps/Hz)
    #[default]
    Bits,
    /// nats
    Nats,
}

impl RateUnit {
    fn convert_ln(self, nats: f64) -> f64 {
        match self {
            RateUnit::Bits => nats / std::f64::consts::LN_2,
            RateUnit::Nats => nats,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UplinkError {
    /// SINR of an all-zero combiner is undefined.
    ZeroCombiner,
    /// Capacity-region enumeration is capped to keep 2^K tractable.
    TooManyUsers { k: usize, cap: usize },
}

impl fmt::Display for UplinkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UplinkError::ZeroCombiner => write!(f, "combiner must be nonzero"),
            UplinkError::TooManyUsers { k, cap } => {
                write!(
                    f,
                    "capacity region enumeration capped at {cap} users, got {k}"
                )
            }
        }
    }
}

impl std::error::Error for UplinkError {}

/// Composite channel and aggregate noise statistics at one frequency.
#[derive(Debug, Clone)]
pub struct UplinkSystem {
    /// Composite uplink channel, M x K.
    pub h: CMat,
    /// Aggregate noise covariance, M x M Hermitian positive definite.
    pub sigma: CMat,
    pub sigma_b2: f64,
    pub sigma_r2: f64,
}

/// Transmit powers, receive combiners, and rate weights of the users.
#[derive(Debug, Clone)]
pub struct UserState {
    /// Transmit powers, watts, within `[0, P_max]`.
    pub rho: Vec<f64>,
    /// One length-M combiner per user.
    pub combiners: Vec<Vec<Complex64>>,
    /// Rate priority weights, nonnegative.
    pub gamma: Vec<f64>,
}

impl UserState {
    /// Full power, zero combiners, equal weights.
    pub fn full_power(k: usize, m: usize, p_max_w: f64) -> Self {
        UserState {
            rho: vec![p_max_w; k],
            combiners: vec![vec![Complex64::new(0.0, 0.0); m]; k],
            gamma: vec![1.0; k],
        }
    }
}

/// Assemble the uplink system for a channel realization and repeater
/// configuration.
///
/// With `use_full_g` the exact swarm response `G = (I - D_a H^R)^{-1} D_a`
/// is used (stability should have been certified; an unstable
/// configuration surfaces as `SingularMatrix`). Otherwise the interaction
/// is ignored and `G = D_a`, the approximation used inside the optimizer.
pub fn assemble(
    cs: &ChannelSet,
    cfg: &RepeaterConfig,
    noise: NoisePowers,
    use_full_g: bool,
) -> Result<UplinkSystem, NumericsError> {
    let m = cs.n_antennas();
    let omega = cs.center_omega();
    let hbg = if cs.n_repeaters() == 0 {
        CMat::zeros(m, 0)
    } else if use_full_g {
        let g = effective_g(cs, cfg, omega)?;
        cs.hb.mul(&g)
    } else {
        let a = cfg.response(omega);
        let mut hb = cs.hb.clone();
        for (c, &ac) in a.iter().enumerate() {
            hb.scale_col(c, ac);
        }
        hb
    };
    let h = if cs.n_repeaters() == 0 {
        cs.hd.clone()
    } else {
        cs.hd.add(&hbg.mul(&cs.hu))
    };
    let mut sigma = CMat::identity(m).scale(Complex64::new(noise.bs_w, 0.0));
    if noise.rep_w > 0.0 && cs.n_repeaters() > 0 {
        sigma = sigma.add(
            &hbg.mul(&hbg.hermitian())
                .scale(Complex64::new(noise.rep_w, 0.0)),
        );
    }
    Ok(UplinkSystem {
        h,
        sigma,
        sigma_b2: noise.bs_w,
        sigma_r2: noise.rep_w,
    })
}

/// `A = H D_rho H^H + Sigma`, the interference-plus-noise-plus-signal
/// Gram matrix every MMSE quantity is built from.
pub fn signal_gram(sys: &UplinkSystem, rho: &[f64]) -> CMat {
    let m = sys.h.rows();
    let k = sys.h.cols();
    assert_eq!(rho.len(), k);
    let mut a = sys.sigma.clone();
    for uk in 0..k {
        if rho[uk] == 0.0 {
            continue;
        }
        let hk = sys.h.col(uk);
        for r in 0..m {
            for c in 0..m {
                let v = a.get(r, c) + rho[uk] * hk[r] * hk[c].conj();
                a.set(r, c, v);
            }
        }
    }
    a
}

/// Sum capacity `log det(I + P_max Sigma^{-1} H H^H)`, computed through
/// pre-whitening `W = L^{-1} H` with `Sigma = L L^H` for conditioning.
pub fn sum_capacity(sys: &UplinkSystem, p_max_w: f64, unit: RateUnit) -> f64 {
    let w = whiten(sys);
    let k = w.cols();
    subset_capacity_nats(&w, p_max_w, &(0..k).collect::<Vec<_>>())
        .map(|nats| unit.convert_ln(nats))
        .unwrap_or(0.0)
}

fn whiten(sys: &UplinkSystem) -> CMat {
    let chol = sys
        .sigma
        .cholesky()
        .expect("noise covariance must be positive definite (sigma_b2 > 0)");
    chol.forward_solve_mat(&sys.h)
}

/// `ln det(I_{|S|} + P W_S^H W_S)` over the whitened columns in `S`.
fn subset_capacity_nats(w: &CMat, p_max_w: f64, subset: &[usize]) -> Option<f64> {
    let s = subset.len();
    if s == 0 {
        return Some(0.0);
    }
    let cols: Vec<Vec<Complex64>> = subset.iter().map(|&k| w.col(k)).collect();
    let mut b = CMat::identity(s);
    for i in 0..s {
        for j in 0..s {
            let v = b.get(i, j) + p_max_w * dot_h(&cols[i], &cols[j]);
            b.set(i, j, v);
        }
    }
    b.cholesky().ok().map(|f| f.ln_det())
}

/// All `2^K - 1` capacity-region constraints `(subset, bound)`.
///
/// The bound for subset `S` is `log det(I + P Sigma^{-1} sum_{k in S}
/// h_k h_k^H)`; the full-set bound equals the sum capacity exactly.
pub fn capacity_region_constraints(
    sys: &UplinkSystem,
    p_max_w: f64,
    k_max: usize,
    unit: RateUnit,
) -> Result<Vec<(Vec<usize>, f64)>, UplinkError> {
    let k = sys.h.cols();
    if k > k_max {
        return Err(UplinkError::TooManyUsers { k, cap: k_max });
    }
    let w = whiten(sys);
    let mut out = Vec::with_capacity((1usize << k) - 1);
    for mask in 1..(1usize << k) {
        let subset: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        let nats = subset_capacity_nats(&w, p_max_w, &subset).unwrap_or(0.0);
        out.push((subset, unit.convert_ln(nats)));
    }
    Ok(out)
}

/// Instantaneous SINR of user `k` under the combiner in `st`: a
/// generalized Rayleigh quotient, invariant to combiner scaling.
pub fn sinr(sys: &UplinkSystem, st: &UserState, k: usize) -> Result<f64, UplinkError> {
    let c = &st.combiners[k];
    if norm_sq(c) == 0.0 {
        return Err(UplinkError::ZeroCombiner);
    }
    let hk = sys.h.col(k);
    let signal = st.rho[k] * dot_h(c, &hk).norm_sqr();
    // interference-plus-noise quadratic form
    let mut denom = {
        let sc = sys.sigma.mul_vec(c);
        dot_h(c, &sc).re
    };
    for kp in 0..sys.h.cols() {
        if kp == k || st.rho[kp] == 0.0 {
            continue;
        }
        denom += st.rho[kp] * dot_h(c, &sys.h.col(kp)).norm_sqr();
    }
    Ok(signal / denom)
}

/// MMSE combiners for every user at once, sharing one Cholesky of the
/// signal Gram matrix: `c_k = sqrt(rho_k) A^{-1} h_k`.
pub fn mmse_combiners(sys: &UplinkSystem, rho: &[f64]) -> Vec<Vec<Complex64>> {
    let chol = signal_gram(sys, rho)
        .cholesky()
        .expect("signal gram matrix must be positive definite");
    (0..sys.h.cols())
        .map(|k| {
            let x = chol.solve_vec(&sys.h.col(k));
            x.into_iter().map(|v| v * rho[k].sqrt()).collect()
        })
        .collect()
}

/// MMSE combiner of a single user.
pub fn mmse_combiner(sys: &UplinkSystem, st: &UserState, k: usize) -> Vec<Complex64> {
    mmse_combiners(sys, &st.rho).swap_remove(k)
}

/// MMSE SINR through the matrix-inversion-lemma route:
/// `1 / (1 - rho_k h_k^H A^{-1} h_k) - 1`.
pub fn mmse_sinr_direct(sys: &UplinkSystem, rho: &[f64], k: usize) -> f64 {
    let chol = signal_gram(sys, rho)
        .cholesky()
        .expect("signal gram matrix must be positive definite");
    mmse_sinr_from_chol(sys, &chol, rho, k)
}

fn mmse_sinr_from_chol(sys: &UplinkSystem, chol: &CholeskyFactor, rho: &[f64], k: usize) -> f64 {
    let hk = sys.h.col(k);
    let x = chol.solve_vec(&hk);
    let q = rho[k] * dot_h(&hk, &x).re;
    1.0 / (1.0 - q) - 1.0
}

/// Mean squared symbol estimation error of user `k`:
/// `c^H A c - 2 sqrt(rho_k) Re(c^H h_k) + 1`.
pub fn mse(sys: &UplinkSystem, st: &UserState, k: usize) -> f64 {
    let c = &st.combiners[k];
    let a = signal_gram(sys, &st.rho);
    let ac = a.mul_vec(c);
    let quad = dot_h(c, &ac).re;
    let cross = dot_h(c, &sys.h.col(k)).re;
    quad - 2.0 * st.rho[k].sqrt() * cross + 1.0
}

/// Weighted sum rate under MMSE combining,
/// `sum_k gamma_k log(1 + SINR_k^mmse)`, with one shared factorization.
pub fn weighted_sum_rate(sys: &UplinkSystem, rho: &[f64], gamma: &[f64], unit: RateUnit) -> f64 {
    let chol = signal_gram(sys, rho)
        .cholesky()
        .expect("signal gram matrix must be positive definite");
    (0..sys.h.cols())
        .map(|k| {
            if rho[k] == 0.0 || gamma[k] == 0.0 {
                return 0.0;
            }
            let s = mmse_sinr_from_chol(sys, &chol, rho, k);
            gamma[k] * unit.convert_ln((1.0 + s).ln())
        })
        .sum()
}

/// Estimator variance of the orthogonal two-user/one-repeater toy system:
/// `(1 + a^2) / (1 + 2 a^2) * sigma2`. Approaches `sigma2 / 2` as the
/// gain grows, so even an ideal noiseless repeater placed between two
/// interfering users buys at most 3 dB.
pub fn blue_variance_toy(alpha: f64, sigma2: f64) -> f64 {
    assert!(alpha >= 0.0);
    (1.0 + alpha * alpha) / (1.0 + 2.0 * alpha * alpha) * sigma2
}
