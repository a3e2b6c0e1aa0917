//! Interaction-stability certification of a configured repeater swarm.
//!
//! The swarm is stable when the image of `det(I - D_a(jw) H^R(jw))` over
//! frequency does not encircle the origin. This module provides the
//! numeric form of that test (a frequency sweep with a wrapped-phase
//! winding count), the much cheaper sufficient Gershgorin conditions
//! `D_1`, `D_2`, the common-gain bound `alpha_G`, and closed forms for
//! the two-repeater and repeaters-on-a-circle special cases.
//!
//! Sweeps use frequency-flat link amplitudes with exact propagation
//! phases `exp(-j w tau)` and repeater phases `exp(-j w nu)`; the swept
//! band defaults to the operational band, which is generally sufficient
//! because antennas act as bandpass filters. Any finite sweep
//! approximates the all-frequency criterion, so the step size stays a
//! visible knob rather than a hidden constant.

use std::fmt;

use num_complex::Complex64;

use crate::channel::{ChannelSet, RepeaterConfig};
use crate::numerics::CMat;
use crate::units::amplitude_to_db;

/// Report-only threshold: a minimum determinant magnitude below this is
/// flagged as marginal, the verdict itself stays winding-based.
pub const MARGINAL_MIN_ABS_DET: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub enum StabilityError {
    /// A consecutive phase increment exceeded pi/2 even after one round
    /// of grid refinement; the winding number cannot be trusted.
    GridTooCoarse { max_step_rad: f64 },
    /// Grid parameters violate their invariants.
    InvalidGrid(String),
}

impl fmt::Display for StabilityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StabilityError::GridTooCoarse { max_step_rad } => write!(
                f,
                "frequency grid too coarse: phase step {max_step_rad:.3} rad exceeds pi/2; refine the step"
            ),
            StabilityError::InvalidGrid(w) => write!(f, "invalid sweep grid: {w}"),
        }
    }
}

impl std::error::Error for StabilityError {}

/// Frequency grid for a stability sweep, covering
/// `[center - span/2, center + span/2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepGrid {
    pub center_hz: f64,
    pub span_hz: f64,
    pub step_hz: f64,
}

impl SweepGrid {
    pub fn new(center_hz: f64, span_hz: f64, step_hz: f64) -> Result<Self, StabilityError> {
        let g = SweepGrid {
            center_hz,
            span_hz,
            step_hz,
        };
        g.validate()?;
        Ok(g)
    }

    /// The default used by the circle experiments: a 20 MHz band at
    /// 100 Hz steps around the given center.
    pub fn operational(center_hz: f64) -> Self {
        SweepGrid {
            center_hz,
            span_hz: 20.0e6,
            step_hz: 100.0,
        }
    }

    pub fn validate(&self) -> Result<(), StabilityError> {
        if self.step_hz.is_nan() || self.step_hz <= 0.0 {
            return Err(StabilityError::InvalidGrid("step must be positive".into()));
        }
        if self.span_hz < self.step_hz {
            return Err(StabilityError::InvalidGrid(
                "span must be at least one step".into(),
            ));
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        (self.span_hz / self.step_hz).round() as usize + 1
    }

    /// Sample frequencies in ascending order.
    pub fn freqs_hz(&self) -> Vec<f64> {
        let n = self.n_points();
        let lo = self.center_hz - self.span_hz / 2.0;
        (0..n).map(|i| lo + i as f64 * self.step_hz).collect()
    }

    fn refined(&self) -> SweepGrid {
        SweepGrid {
            step_hz: self.step_hz / 2.0,
            ..*self
        }
    }
}

/// Outcome of a stability certification.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// Row-sum Gershgorin metric `max_n alpha_n sum_n' |h_nn'|`.
    pub d1: f64,
    /// Column-weighted Gershgorin metric `max_n sum_n' alpha_n' |h_nn'|`.
    pub d2: f64,
    /// `min(d1, d2)`.
    pub d: f64,
    /// Common-gain bound, linear amplitude; infinite for a decoupled swarm.
    pub alpha_g: f64,
    pub min_abs_det: f64,
    pub winding_number: i64,
    pub gershgorin_pass: bool,
    pub nyquist_pass: bool,
    /// Minimum determinant magnitude fell below [`MARGINAL_MIN_ABS_DET`].
    pub marginal: bool,
}

/// Gershgorin metrics `(D1, D2, D)` of the configured swarm.
///
/// Amplitudes are frequency-flat by construction of [`ChannelSet`], so
/// the supremum over any grid equals this single evaluation.
pub fn gershgorin_metrics(cs: &ChannelSet, cfg: &RepeaterConfig) -> (f64, f64, f64) {
    let n = cs.n_repeaters();
    assert_eq!(cfg.n(), n);
    let mut d1: f64 = 0.0;
    let mut d2: f64 = 0.0;
    for i in 0..n {
        let mut row_sum = 0.0;
        let mut weighted = 0.0;
        for j in 0..n {
            let h = cs.hr.get(i, j).norm();
            row_sum += h;
            weighted += cfg.alpha[j] * h;
        }
        d1 = d1.max(cfg.alpha[i] * row_sum);
        d2 = d2.max(weighted);
    }
    (d1, d2, d1.min(d2))
}

/// Largest common amplification gain guaranteed stable by the Gershgorin
/// condition: `1 / max_n sum_n' |h_nn'|`. Infinite when the repeaters do
/// not couple at all.
pub fn alpha_g(cs: &ChannelSet) -> f64 {
    let n = cs.n_repeaters();
    let max_row: f64 = (0..n)
        .map(|i| (0..n).map(|j| cs.hr.get(i, j).norm()).sum::<f64>())
        .fold(0.0, f64::max);
    if max_row == 0.0 {
        f64::INFINITY
    } else {
        1.0 / max_row
    }
}

/// Result of a Nyquist determinant sweep.
#[derive(Debug, Clone)]
pub struct NyquistSweep {
    pub freqs_hz: Vec<f64>,
    pub det: Vec<Complex64>,
    pub min_abs_det: f64,
    pub winding_number: i64,
    /// The grid was automatically refined once to keep phase steps sane.
    pub refined: bool,
}

/// Determinant samples `det(I - D_a(jw) H^R(jw))` over the grid and the
/// winding number of the resulting closed curve around the origin.
///
/// Phase increments are accumulated between consecutive ordered samples,
/// wrapped to `(-pi, pi]`, and the curve is closed back to its first
/// sample. If any consecutive increment exceeds pi/2 the grid is refined
/// once (halved step); if that still fails, [`StabilityError::GridTooCoarse`]
/// is returned and the caller must choose a finer step.
pub fn nyquist_sweep(
    cs: &ChannelSet,
    cfg: &RepeaterConfig,
    grid: &SweepGrid,
) -> Result<NyquistSweep, StabilityError> {
    grid.validate()?;
    match sweep_once(cs, cfg, grid) {
        Ok(mut s) => {
            s.refined = false;
            Ok(s)
        }
        Err(StabilityError::GridTooCoarse { .. }) => {
            let finer = grid.refined();
            let mut s = sweep_once(cs, cfg, &finer)?;
            s.refined = true;
            Ok(s)
        }
        Err(e) => Err(e),
    }
}

fn sweep_once(
    cs: &ChannelSet,
    cfg: &RepeaterConfig,
    grid: &SweepGrid,
) -> Result<NyquistSweep, StabilityError> {
    let freqs = grid.freqs_hz();
    let det: Vec<Complex64> = freqs
        .iter()
        .map(|&f| loop_det(cs, cfg, 2.0 * std::f64::consts::PI * f))
        .collect();
    let min_abs_det = det.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let (winding_number, max_step) = winding_number(&det);
    if max_step > std::f64::consts::FRAC_PI_2 {
        return Err(StabilityError::GridTooCoarse {
            max_step_rad: max_step,
        });
    }
    Ok(NyquistSweep {
        freqs_hz: freqs,
        det,
        min_abs_det,
        winding_number,
        refined: false,
    })
}

/// `det(I - D_a(jw) H^R(jw))` at one angular frequency.
pub fn loop_det(cs: &ChannelSet, cfg: &RepeaterConfig, omega: f64) -> Complex64 {
    let n = cs.n_repeaters();
    let a = cfg.response(omega);
    let dw = omega - cs.center_omega();
    let m = CMat::from_fn(n, n, |i, j| {
        let delta = if i == j {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let h = cs.hr.get(i, j);
        if h == Complex64::new(0.0, 0.0) {
            return delta;
        }
        let phased = h * Complex64::from_polar(1.0, -dw * cs.hr_tau_s[i * n + j]);
        delta - a[i] * phased
    });
    m.det()
}

/// Wrapped-phase winding count over ordered samples, closing the curve.
/// Returns the winding number and the largest consecutive increment.
fn winding_number(det: &[Complex64]) -> (i64, f64) {
    if det.len() < 2 {
        return (0, 0.0);
    }
    let mut total = 0.0;
    let mut max_step: f64 = 0.0;
    for w in det.windows(2) {
        let d = phase_increment(w[0], w[1]);
        max_step = max_step.max(d.abs());
        total += d;
    }
    // close back to the first sample; band truncation makes this edge
    // arbitrary, so it does not participate in the coarseness check
    total += phase_increment(det[det.len() - 1], det[0]);
    (
        (total / (2.0 * std::f64::consts::PI)).round() as i64,
        max_step,
    )
}

fn phase_increment(from: Complex64, to: Complex64) -> f64 {
    if from.norm() == 0.0 || to.norm() == 0.0 {
        return 0.0;
    }
    (to / from).arg()
}

/// Minimum determinant magnitude over the grid for each common gain in
/// `alphas` (ascending), with the repeater delays taken from the channel
/// set. Locates the empirical instability transition.
pub fn margin_sweep(cs: &ChannelSet, alphas: &[f64], grid: &SweepGrid) -> Vec<(f64, f64)> {
    let freqs = grid.freqs_hz();
    alphas
        .iter()
        .map(|&alpha| {
            let cfg = RepeaterConfig {
                alpha: vec![alpha; cs.n_repeaters()],
                nu_s: cs.rep_delays_s.clone(),
            };
            let min = freqs
                .iter()
                .map(|&f| loop_det(cs, &cfg, 2.0 * std::f64::consts::PI * f).norm())
                .fold(f64::INFINITY, f64::min);
            (alpha, min)
        })
        .collect()
}

/// Closed-form determinant for an odd number of repeaters equally spaced
/// on a circle: the inter-repeater matrix is symmetric circulant, its
/// eigenvalues are the DFT of the hop-gain vector, and the determinant is
/// the product
/// `prod_m (1 - 2 alpha sum_i sqrt(beta_i) cos(2 pi i m / n) e^{-jw(tau_i+nu)})`.
///
/// `amp_at(d)` supplies the hop amplitude `sqrt(beta)` at chord distance
/// `d`; delays are `d / c`.
pub fn circle_det_closed_form(
    n: usize,
    radius_m: f64,
    alpha: f64,
    nu_s: f64,
    omega: f64,
    amp_at: impl Fn(f64) -> f64,
) -> Complex64 {
    assert!(n >= 3 && n % 2 == 1, "closed form requires an odd n >= 3");
    let n0 = (n - 1) / 2;
    let chords: Vec<f64> = (1..=n0)
        .map(|i| 2.0 * radius_m * (i as f64 * std::f64::consts::PI / n as f64).sin())
        .collect();
    let hops: Vec<Complex64> = chords
        .iter()
        .map(|&d| {
            let tau = d / crate::units::SPEED_OF_LIGHT;
            Complex64::from_polar(amp_at(d), -omega * (tau + nu_s))
        })
        .collect();
    let mut det = Complex64::new(1.0, 0.0);
    for m in 0..n {
        let mut lambda = Complex64::new(0.0, 0.0);
        for (i, h) in hops.iter().enumerate() {
            let c = (2.0 * std::f64::consts::PI * (i + 1) as f64 * m as f64 / n as f64).cos();
            lambda += h * c;
        }
        det *= Complex64::new(1.0, 0.0) - 2.0 * alpha * lambda;
    }
    det
}

/// First `n_terms` impulses of the two-repeater loopback response
/// `p(t) = sum_i (alpha^2 beta)^i delta(t - 2 i (tau + nu))`: the
/// ping-pong echo between the pair. Stable exactly when
/// `alpha^2 beta < 1`, where the train decays geometrically.
pub fn two_repeater_impulse_train(
    alpha: f64,
    beta: f64,
    tau_s: f64,
    nu_s: f64,
    n_terms: usize,
) -> Vec<(f64, f64)> {
    assert!(n_terms >= 1);
    let ratio = alpha * alpha * beta;
    (0..n_terms)
        .map(|i| (2.0 * i as f64 * (tau_s + nu_s), ratio.powi(i as i32)))
        .collect()
}

/// Full certification: Gershgorin metrics, the common-gain bound, and the
/// Nyquist sweep, combined into one report. When `eta` is given the
/// Gershgorin verdict uses `d <= eta` instead of the strict `d < 1`.
pub fn certify(
    cs: &ChannelSet,
    cfg: &RepeaterConfig,
    grid: &SweepGrid,
    eta: Option<f64>,
) -> Result<StabilityReport, StabilityError> {
    let (d1, d2, d) = gershgorin_metrics(cs, cfg);
    let sweep = nyquist_sweep(cs, cfg, grid)?;
    let gershgorin_pass = match eta {
        Some(margin) => d <= margin,
        None => d < 1.0,
    };
    Ok(StabilityReport {
        d1,
        d2,
        d,
        alpha_g: alpha_g(cs),
        min_abs_det: sweep.min_abs_det,
        winding_number: sweep.winding_number,
        gershgorin_pass,
        nyquist_pass: sweep.winding_number == 0 && sweep.min_abs_det > 0.0,
        marginal: sweep.min_abs_det < MARGINAL_MIN_ABS_DET,
    })
}

/// CSV rows `(omega_rad_s, det_re, det_im)` of a sweep, the data behind a
/// Nyquist-image plot.
pub fn nyquist_csv(sweep: &NyquistSweep) -> String {
    let mut out = String::from("omega_rad_s,det_re,det_im\n");
    for (f, z) in sweep.freqs_hz.iter().zip(&sweep.det) {
        out.push_str(&format!(
            "{:.11e},{:.11e},{:.11e}\n",
            2.0 * std::f64::consts::PI * f,
            z.re,
            z.im
        ));
    }
    out
}

/// CSV rows `(alpha_db, min_abs_det)` of a margin sweep.
pub fn margin_csv(points: &[(f64, f64)]) -> String {
    let mut out = String::from("alpha_db,min_abs_det\n");
    for (alpha, min) in points {
        out.push_str(&format!("{:.11e},{:.11e}\n", amplitude_to_db(*alpha), min));
    }
    out
}
