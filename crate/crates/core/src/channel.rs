//! Channel synthesis from geometry and a configurable propagation model.
//!
//! Produces the four channel matrices of the system at one frequency
//! (direct, user-repeater, repeater-BS, and inter-repeater), plus the
//! repeater frequency responses and the swarm's effective transfer
//! matrix `G = (I - D_a H^R)^{-1} D_a`.
//!
//! Pathloss coefficients live in configuration. Two presets ship:
//! `free-space` (exact `c/(2 w d)` amplitude, always line-of-sight, no
//! shadowing; used by all stability tests) and `uma-umi-approx`
//! (log-distance fits of the urban macro / urban micro models with
//! distance-dependent LoS probability and lognormal shadowing). The
//! synthesis is frequency-flat per evaluation frequency; inter-repeater
//! propagation delays are retained so stability sweeps can re-phase the
//! matrix exactly across a band.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::numerics::{CMat, NumericsError};
use crate::rng::{stream_rng, StreamPurpose};
use crate::scenario::{Point3, Scenario};
use crate::units::{db_to_amplitude, SPEED_OF_LIGHT};

/// Links are evaluated at no less than this distance to avoid near-field
/// blowup on degenerate layouts.
const MIN_LINK_DIST_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelError {
    /// Self-interference loop gain reaches or exceeds unity.
    DivergentLoop { alpha: f64, beta: f64 },
    /// Pathloss configuration violates an invariant.
    InvalidModel(String),
}

impl fmt::Display for ChannelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelError::DivergentLoop { alpha, beta } => {
                write!(
                    f,
                    "self-interference loop diverges: alpha*beta = {}",
                    alpha * beta
                )
            }
            ChannelError::InvalidModel(w) => write!(f, "invalid pathloss model: {w}"),
        }
    }
}

impl std::error::Error for ChannelError {}

/// The four link classes of the system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkClass {
    /// User to BS.
    Direct,
    /// User to repeater.
    UserRepeater,
    /// Repeater to BS.
    RepeaterBs,
    /// Repeater to repeater.
    InterRepeater,
}

/// Log-distance pathloss fit: `PL(d) = intercept + slope * log10(d / reference)` dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogFit {
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
    #[serde(default = "default_reference_m")]
    pub reference_m: f64,
}

fn default_reference_m() -> f64 {
    1.0
}

impl LogFit {
    pub fn pathloss_db(&self, d_m: f64) -> f64 {
        self.intercept_db + self.slope_db_per_decade * (d_m / self.reference_m).log10()
    }
}

/// Distance-dependent LoS probability: 1 up to `full_prob_dist_m`, then
/// `d0/d + exp(-d/decay)(1 - d0/d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LosProbability {
    pub full_prob_dist_m: f64,
    pub decay_dist_m: f64,
}

impl LosProbability {
    pub fn prob(&self, d2d_m: f64) -> f64 {
        if d2d_m <= self.full_prob_dist_m {
            return 1.0;
        }
        let frac = self.full_prob_dist_m / d2d_m;
        (frac + (-d2d_m / self.decay_dist_m).exp() * (1.0 - frac)).clamp(0.0, 1.0)
    }
}

/// Coefficients for one link class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassParams {
    pub los: LogFit,
    pub nlos: LogFit,
    pub shadow_los_db: f64,
    pub shadow_nlos_db: f64,
    pub los_prob: LosProbability,
    /// Fixed antenna/link-budget gain folded into the amplitude, dB.
    #[serde(default)]
    pub extra_gain_db: f64,
}

impl ClassParams {
    fn validate(&self) -> Result<(), ChannelError> {
        for fit in [&self.los, &self.nlos] {
            if fit.slope_db_per_decade < 0.0 {
                return Err(ChannelError::InvalidModel(
                    "slope must be nonnegative".into(),
                ));
            }
            if fit.reference_m <= 0.0 {
                return Err(ChannelError::InvalidModel(
                    "reference_m must be positive".into(),
                ));
            }
        }
        if self.shadow_los_db < 0.0 || self.shadow_nlos_db < 0.0 {
            return Err(ChannelError::InvalidModel(
                "shadowing std must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Configurable propagation model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathlossModel {
    /// Exact free-space amplitude `c / (2 w d)`, always LoS, no shadowing.
    FreeSpace,
    /// Per-class log-distance fits with probabilistic LoS and shadowing.
    PerClass {
        direct: ClassParams,
        user_repeater: ClassParams,
        repeater_bs: ClassParams,
        inter_repeater: ClassParams,
    },
}

impl PathlossModel {
    pub fn free_space() -> Self {
        PathlossModel::FreeSpace
    }

    /// Log-distance approximation of the urban-macro / urban-micro street
    /// canyon models at the given carrier: direct and repeater-BS links
    /// use the macro coefficients, user-repeater and inter-repeater links
    /// the micro ones. The BS-side links carry an 8 dBi antenna gain.
    pub fn uma_umi(carrier_hz: f64) -> Self {
        let fc = carrier_hz / 1e9; // GHz
        let uma_los = |_h_ut: f64| LogFit {
            intercept_db: 28.0 + 20.0 * fc.log10(),
            slope_db_per_decade: 22.0,
            reference_m: 1.0,
        };
        let uma_nlos = |h_ut: f64| LogFit {
            intercept_db: 13.54 + 20.0 * fc.log10() - 0.6 * (h_ut - 1.5),
            slope_db_per_decade: 39.08,
            reference_m: 1.0,
        };
        let umi_los = |_h_ut: f64| LogFit {
            intercept_db: 32.4 + 20.0 * fc.log10(),
            slope_db_per_decade: 21.0,
            reference_m: 1.0,
        };
        let umi_nlos = |h_ut: f64| LogFit {
            intercept_db: 22.4 + 21.3 * fc.log10() - 0.3 * (h_ut - 1.5),
            slope_db_per_decade: 35.3,
            reference_m: 1.0,
        };
        let uma_prob = LosProbability {
            full_prob_dist_m: 18.0,
            decay_dist_m: 63.0,
        };
        let umi_prob = LosProbability {
            full_prob_dist_m: 18.0,
            decay_dist_m: 36.0,
        };
        PathlossModel::PerClass {
            direct: ClassParams {
                los: uma_los(1.5),
                nlos: uma_nlos(1.5),
                shadow_los_db: 4.0,
                shadow_nlos_db: 6.0,
                los_prob: uma_prob,
                extra_gain_db: 8.0,
            },
            user_repeater: ClassParams {
                los: umi_los(1.5),
                nlos: umi_nlos(1.5),
                shadow_los_db: 4.0,
                shadow_nlos_db: 7.82,
                los_prob: umi_prob,
                extra_gain_db: 0.0,
            },
            repeater_bs: ClassParams {
                los: uma_los(10.0),
                nlos: uma_nlos(10.0),
                shadow_los_db: 4.0,
                shadow_nlos_db: 6.0,
                los_prob: uma_prob,
                extra_gain_db: 8.0,
            },
            inter_repeater: ClassParams {
                los: umi_los(10.0),
                nlos: umi_nlos(10.0),
                shadow_los_db: 4.0,
                shadow_nlos_db: 7.82,
                los_prob: umi_prob,
                extra_gain_db: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if let PathlossModel::PerClass {
            direct,
            user_repeater,
            repeater_bs,
            inter_repeater,
        } = self
        {
            for c in [direct, user_repeater, repeater_bs, inter_repeater] {
                c.validate()?;
            }
        }
        Ok(())
    }

    fn class(&self, class: LinkClass) -> Option<&ClassParams> {
        match self {
            PathlossModel::FreeSpace => None,
            PathlossModel::PerClass {
                direct,
                user_repeater,
                repeater_bs,
                inter_repeater,
            } => Some(match class {
                LinkClass::Direct => direct,
                LinkClass::UserRepeater => user_repeater,
                LinkClass::RepeaterBs => repeater_bs,
                LinkClass::InterRepeater => inter_repeater,
            }),
        }
    }

    /// Large-scale draw for one link: LoS state and shadowing.
    pub fn draw_link(
        &self,
        class: LinkClass,
        d2d_m: f64,
        force_los: bool,
        los_rng: &mut ChaCha8Rng,
        shadow_rng: &mut ChaCha8Rng,
    ) -> LinkDraw {
        match self.class(class) {
            None => LinkDraw {
                los: true,
                shadow_db: 0.0,
            },
            Some(params) => {
                // always consume both draws so the stream stays aligned
                // regardless of forcing
                let u: f64 = los_rng.gen();
                let g: f64 = StandardNormal.sample(shadow_rng);
                let los = force_los || u < params.los_prob.prob(d2d_m);
                let sigma = if los {
                    params.shadow_los_db
                } else {
                    params.shadow_nlos_db
                };
                LinkDraw {
                    los,
                    shadow_db: sigma * g,
                }
            }
        }
    }

    /// Expected power gain of a link: the LoS-probability mixture
    /// `p beta_los + (1 - p) beta_nlos` with no shadowing. Used by the
    /// deterministic placement analyses.
    pub fn mean_power_gain(&self, class: LinkClass, d2d_m: f64, d3d_m: f64, omega: f64) -> f64 {
        let los_amp = self.amplitude(
            class,
            d3d_m,
            omega,
            &LinkDraw {
                los: true,
                shadow_db: 0.0,
            },
        );
        match self.class(class) {
            None => los_amp * los_amp,
            Some(params) => {
                let p = params.los_prob.prob(d2d_m);
                let nlos_amp = self.amplitude(
                    class,
                    d3d_m,
                    omega,
                    &LinkDraw {
                        los: false,
                        shadow_db: 0.0,
                    },
                );
                p * los_amp * los_amp + (1.0 - p) * nlos_amp * nlos_amp
            }
        }
    }

    /// Amplitude gain `sqrt(beta)` of a link with the given large-scale
    /// draw. Monotone nonincreasing in distance for zero shadowing.
    pub fn amplitude(&self, class: LinkClass, d3d_m: f64, omega: f64, draw: &LinkDraw) -> f64 {
        let d = d3d_m.max(MIN_LINK_DIST_M);
        match self.class(class) {
            None => SPEED_OF_LIGHT / (2.0 * omega * d),
            Some(params) => {
                // the NLoS fit is floored at the LoS one: excess loss
                // cannot be negative
                let pl_db = if draw.los {
                    params.los.pathloss_db(d)
                } else {
                    params.nlos.pathloss_db(d).max(params.los.pathloss_db(d))
                };
                db_to_amplitude(params.extra_gain_db - pl_db - draw.shadow_db)
            }
        }
    }
}

/// Config-file form of the propagation model: the two shipped presets
/// plus fully explicit per-class tables, in the same TOML format as the
/// scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathlossConfig {
    FreeSpace,
    UmaUmiApprox,
    PerClass {
        direct: ClassParams,
        user_repeater: ClassParams,
        repeater_bs: ClassParams,
        inter_repeater: ClassParams,
    },
}

impl PathlossConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ChannelError> {
        toml::from_str(text).map_err(|e| ChannelError::InvalidModel(e.to_string()))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ChannelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ChannelError::InvalidModel(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Instantiate the model; the urban preset needs the carrier to pin
    /// its frequency-dependent intercepts.
    pub fn build(&self, carrier_hz: f64) -> Result<PathlossModel, ChannelError> {
        let model = match self {
            PathlossConfig::FreeSpace => PathlossModel::FreeSpace,
            PathlossConfig::UmaUmiApprox => PathlossModel::uma_umi(carrier_hz),
            PathlossConfig::PerClass {
                direct,
                user_repeater,
                repeater_bs,
                inter_repeater,
            } => PathlossModel::PerClass {
                direct: *direct,
                user_repeater: *user_repeater,
                repeater_bs: *repeater_bs,
                inter_repeater: *inter_repeater,
            },
        };
        model.validate()?;
        Ok(model)
    }
}

/// LoS state and shadowing realization of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDraw {
    pub los: bool,
    pub shadow_db: f64,
}

/// Random streams consumed by channel synthesis for one trial.
pub struct ChannelRngs {
    pub los: ChaCha8Rng,
    pub shadow: ChaCha8Rng,
    pub fading: ChaCha8Rng,
}

impl ChannelRngs {
    pub fn for_trial(seed: u64, trial: u64) -> Self {
        ChannelRngs {
            los: stream_rng(seed, StreamPurpose::LosDraw, trial),
            shadow: stream_rng(seed, StreamPurpose::Shadowing, trial),
            fading: stream_rng(seed, StreamPurpose::Fading, trial),
        }
    }
}

fn rayleigh(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) / 2f64.sqrt()
}

/// Complex gain of one scalar link: deterministic `exp(-j w d / c)` phase
/// when LoS, unit-variance circular Gaussian small-scale factor otherwise.
/// Returns the gain and the LoS flag.
pub fn link_gain(
    model: &PathlossModel,
    class: LinkClass,
    tx: &Point3,
    rx: &Point3,
    omega: f64,
    force_los: bool,
    rngs: &mut ChannelRngs,
) -> (Complex64, bool) {
    let draw = model.draw_link(
        class,
        tx.dist_2d(rx),
        force_los,
        &mut rngs.los,
        &mut rngs.shadow,
    );
    let d3cd = tx.dist_3d(rx);
    let amp = model.amplitude(class, d3cd, omega, &draw);
    let g = if draw.los {
        let phase = -omega * d3cd / SPEED_OF_LIGHT;
        Complex64::from_polar(amp, phase)
    } else {
        rayleigh(&mut rngs.fading) * amp
    };
    (g, draw.los)
}

/// Gain column toward the BS array: one large-scale draw shared by all
/// antennas, per-antenna LoS phase or independent Rayleigh factors.
fn bs_column_gain(
    model: &PathlossModel,
    class: LinkClass,
    tx: &Point3,
    antennas: &[Point3],
    bs_center: &Point3,
    omega: f64,
    force_los: bool,
    rngs: &mut ChannelRngs,
) -> Vec<Complex64> {
    let draw = model.draw_link(
        class,
        tx.dist_2d(bs_center),
        force_los,
        &mut rngs.los,
        &mut rngs.shadow,
    );
    let amp = model.amplitude(class, tx.dist_3d(bs_center), omega, &draw);
    antennas
        .iter()
        .map(|ant| {
            if draw.los {
                let phase = -omega * tx.dist_3d(ant) / SPEED_OF_LIGHT;
                Complex64::from_polar(amp, phase)
            } else {
                rayleigh(&mut rngs.fading) * amp
            }
        })
        .collect()
}

/// Positions of the BS antennas: a half-wavelength uniform linear array
/// along the x axis, centered on the BS.
pub fn bs_antenna_positions(bs_pos: &Point3, m: usize, carrier_hz: f64) -> Vec<Point3> {
    let half_lambda = SPEED_OF_LIGHT / carrier_hz / 2.0;
    (0..m)
        .map(|i| {
            let off = (i as f64 - (m as f64 - 1.0) / 2.0) * half_lambda;
            Point3::new(bs_pos.x + off, bs_pos.y, bs_pos.z)
        })
        .collect()
}

/// The four channel matrices at one frequency, plus the propagation
/// delays needed to re-phase the inter-repeater matrix across a band.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// Direct links, M x K.
    pub hd: CMat,
    /// User-repeater links, N x K.
    pub hu: CMat,
    /// Repeater-BS links, M x N.
    pub hb: CMat,
    /// Inter-repeater links, N x N; symmetric, zero diagonal unless
    /// self-interference is explicitly enabled.
    pub hr: CMat,
    /// Inter-repeater propagation delays, N x N row-major, seconds.
    pub hr_tau_s: Vec<f64>,
    /// Repeater device delays, seconds.
    pub rep_delays_s: Vec<f64>,
    /// Frequency the matrices were synthesized at.
    pub freq_hz: f64,
}

impl ChannelSet {
    pub fn n_repeaters(&self) -> usize {
        self.hr.rows()
    }

    pub fn n_users(&self) -> usize {
        self.hd.cols()
    }

    pub fn n_antennas(&self) -> usize {
        self.hd.rows()
    }

    pub fn center_omega(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.freq_hz
    }

    /// Inter-repeater matrix re-phased to angular frequency `omega`:
    /// amplitudes are frequency-flat, phases advance with the recorded
    /// propagation delays relative to the synthesis frequency.
    pub fn hr_at(&self, omega: f64) -> CMat {
        let n = self.n_repeaters();
        let dw = omega - self.center_omega();
        CMat::from_fn(n, n, |i, j| {
            let h = self.hr.get(i, j);
            if h == Complex64::new(0.0, 0.0) {
                return h;
            }
            h * Complex64::from_polar(1.0, -dw * self.hr_tau_s[i * n + j])
        })
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        let n = self.n_repeaters();
        if self.hr.cols() != n || self.hr_tau_s.len() != n * n || self.rep_delays_s.len() != n {
            return Err(ChannelError::InvalidModel(
                "inter-repeater matrix and delay shapes disagree".into(),
            ));
        }
        let scale = self.hr.max_abs().max(1e-300);
        for i in 0..n {
            for j in 0..n {
                let sym = (self.hr.get(i, j) - self.hr.get(j, i)).norm();
                if sym > 1e-12 * scale {
                    return Err(ChannelError::InvalidModel(
                        "inter-repeater matrix must be symmetric".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Fill the diagonal of the inter-repeater matrix with loopback
    /// amplitudes (self-interference explicitly enabled).
    pub fn with_self_interference(mut self, beta_loop_amp: &[f64]) -> Self {
        let n = self.n_repeaters();
        assert_eq!(beta_loop_amp.len(), n);
        for (i, &b) in beta_loop_amp.iter().enumerate() {
            self.hr.set(i, i, Complex64::new(b, 0.0));
            self.hr_tau_s[i * n + i] = 0.0;
        }
        self
    }

    /// Stability-only channel set: `n` repeaters equally spaced on a
    /// circle, ideal LoS free-space links between them, no users or BS.
    ///
    /// Distances come from the chord formula `d_i = 2 R sin(i pi / n)` of
    /// the index gap, so the matrix is bit-exactly circulant.
    pub fn circle_free_space(n: usize, radius_m: f64, freq_hz: f64) -> ChannelSet {
        let omega = 2.0 * std::f64::consts::PI * freq_hz;
        let mut hr = CMat::zeros(n, n);
        let mut tau = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let gap = (i as i64 - j as i64).unsigned_abs() as usize;
                let gap = gap.min(n - gap);
                let d = 2.0 * radius_m * (gap as f64 * std::f64::consts::PI / n as f64).sin();
                let amp = SPEED_OF_LIGHT / (2.0 * omega * d.max(MIN_LINK_DIST_M));
                let t = d / SPEED_OF_LIGHT;
                hr.set(i, j, Complex64::from_polar(amp, -omega * t));
                tau[i * n + j] = t;
            }
        }
        ChannelSet {
            hd: CMat::zeros(0, 0),
            hu: CMat::zeros(n, 0),
            hb: CMat::zeros(0, n),
            hr,
            hr_tau_s: tau,
            rep_delays_s: vec![0.0; n],
            freq_hz,
        }
    }

    /// Stability-only channel set for two repeaters with a single
    /// frequency-flat link of amplitude `sqrt_beta` and delay `tau`.
    pub fn two_repeater(sqrt_beta: f64, tau_s: f64, freq_hz: f64) -> ChannelSet {
        let omega = 2.0 * std::f64::consts::PI * freq_hz;
        let h = Complex64::from_polar(sqrt_beta, -omega * tau_s);
        let mut hr = CMat::zeros(2, 2);
        hr.set(0, 1, h);
        hr.set(1, 0, h);
        ChannelSet {
            hd: CMat::zeros(0, 0),
            hu: CMat::zeros(2, 0),
            hb: CMat::zeros(0, 2),
            hr,
            hr_tau_s: vec![0.0, tau_s, tau_s, 0.0],
            rep_delays_s: vec![0.0; 2],
            freq_hz,
        }
    }
}

/// Amplification gains and delays of all repeaters.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeaterConfig {
    /// Linear amplitude gains, nonnegative.
    pub alpha: Vec<f64>,
    /// Device delays, seconds, nonnegative.
    pub nu_s: Vec<f64>,
}

impl RepeaterConfig {
    /// All repeaters at the same gain, zero delay.
    pub fn uniform(n: usize, alpha: f64) -> Self {
        RepeaterConfig {
            alpha: vec![alpha; n],
            nu_s: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// Frequency responses `a_n(j w) = alpha_n exp(-j w nu_n)`.
    pub fn response(&self, omega: f64) -> Vec<Complex64> {
        self.alpha
            .iter()
            .zip(&self.nu_s)
            .map(|(&a, &nu)| Complex64::from_polar(a, -omega * nu))
            .collect()
    }
}

/// Effective transfer matrix of the swarm,
/// `G(jw) = (I - D_a(jw) H^R(jw))^{-1} D_a(jw)`.
///
/// `G` is symmetric whenever `H^R` is, but not Hermitian. Fails with
/// `SingularMatrix` when `(I - D_a H^R)` is at or inside the instability
/// boundary; the caller should have certified stability first.
pub fn effective_g(
    cs: &ChannelSet,
    cfg: &RepeaterConfig,
    omega: f64,
) -> Result<CMat, NumericsError> {
    let n = cs.n_repeaters();
    assert_eq!(
        cfg.n(),
        n,
        "repeater config size must match the channel set"
    );
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let a = cfg.response(omega);
    let hr = cs.hr_at(omega);
    // I - D_a H^R, rows scaled by a_n
    let mut m = CMat::identity(n);
    for r in 0..n {
        for c in 0..n {
            let v = m.get(r, c) - a[r] * hr.get(r, c);
            m.set(r, c, v);
        }
    }
    let inv = m.inverse()?;
    // right-multiply by D_a: scale columns
    let mut g = inv;
    for (c, &ac) in a.iter().enumerate() {
        g.scale_col(c, ac);
    }
    Ok(g)
}

/// Effective gain of a single repeater with loopback gain `beta`:
/// `alpha / (1 - alpha beta)`.
pub fn self_interference_gain(alpha: f64, beta_loop: f64) -> Result<f64, ChannelError> {
    if alpha * beta_loop >= 1.0 {
        return Err(ChannelError::DivergentLoop {
            alpha,
            beta: beta_loop,
        });
    }
    Ok(alpha / (1.0 - alpha * beta_loop))
}

/// Synthesize all channel matrices for one scenario realization.
///
/// Large-scale draws (LoS state, shadowing) happen once per link; the
/// upper triangle of the inter-repeater matrix is drawn and mirrored, so
/// reciprocity holds by construction. Deterministic given
/// `(scenario.seed, trial)`.
pub fn build_channels(
    s: &Scenario,
    layout: &crate::scenario::Layout,
    model: &PathlossModel,
    trial: u64,
) -> ChannelSet {
    let omega = 2.0 * std::f64::consts::PI * s.carrier_hz;
    let mut rngs = ChannelRngs::for_trial(s.seed, trial);
    let m = s.m;
    let k = layout.user_pos.len();
    let n = layout.rep_pos.len();
    let antennas = bs_antenna_positions(&layout.bs_pos, m, s.carrier_hz);

    let mut hd = CMat::zeros(m, k);
    for (uk, user) in layout.user_pos.iter().enumerate() {
        let col = bs_column_gain(
            model,
            LinkClass::Direct,
            user,
            &antennas,
            &layout.bs_pos,
            omega,
            false,
            &mut rngs,
        );
        for (r, v) in col.into_iter().enumerate() {
            hd.set(r, uk, v);
        }
    }

    let mut hb = CMat::zeros(m, n);
    for (rn, rep) in layout.rep_pos.iter().enumerate() {
        let col = bs_column_gain(
            model,
            LinkClass::RepeaterBs,
            rep,
            &antennas,
            &layout.bs_pos,
            omega,
            s.los_r2b_forced,
            &mut rngs,
        );
        for (r, v) in col.into_iter().enumerate() {
            hb.set(r, rn, v);
        }
    }

    let mut hu = CMat::zeros(n, k);
    for (rn, rep) in layout.rep_pos.iter().enumerate() {
        for (uk, user) in layout.user_pos.iter().enumerate() {
            let (g, _) = link_gain(
                model,
                LinkClass::UserRepeater,
                user,
                rep,
                omega,
                false,
                &mut rngs,
            );
            hu.set(rn, uk, g);
        }
    }

    let mut hr = CMat::zeros(n, n);
    let mut hr_tau = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (g, _) = link_gain(
                model,
                LinkClass::InterRepeater,
                &layout.rep_pos[i],
                &layout.rep_pos[j],
                omega,
                false,
                &mut rngs,
            );
            let tau = layout.rep_pos[i].dist_3d(&layout.rep_pos[j]) / SPEED_OF_LIGHT;
            hr.set(i, j, g);
            hr.set(j, i, g);
            hr_tau[i * n + j] = tau;
            hr_tau[j * n + i] = tau;
        }
    }

    ChannelSet {
        hd,
        hu,
        hb,
        hr,
        hr_tau_s: hr_tau,
        rep_delays_s: vec![0.0; n],
        freq_hz: s.carrier_hz,
    }
}
