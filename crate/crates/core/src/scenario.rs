//! Experiment scenarios: node placement, power/noise/band parameters, and
//! deterministic randomness.
//!
//! A [`Scenario`] is the single source of experimental truth. It loads
//! from a TOML file (unknown keys are rejected) and, together with a seed,
//! fully determines the [`Layout`] and every downstream random draw.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{stream_rng, StreamPurpose};

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    /// A scenario field violates its invariant.
    Invalid(String),
    /// The requested repeater count does not fit in the disc.
    PackingFailed { requested: usize, available: usize },
    /// Config file could not be read or parsed.
    Config(String),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Invalid(w) => write!(f, "invalid scenario: {w}"),
            ScenarioError::PackingFailed {
                requested,
                available,
            } => write!(
                f,
                "hexagonal packing failed: requested {requested} repeaters, only {available} lattice points fit"
            ),
            ScenarioError::Config(w) => write!(f, "scenario config error: {w}"),
        }
    }
}

impl std::error::Error for ScenarioError {}

/// A point in 3-D space, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    /// Horizontal (ground-plane) distance.
    pub fn dist_2d(&self, other: &Point3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    /// Full 3-D distance.
    pub fn dist_3d(&self, other: &Point3) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

/// Geometry, node counts, and power/noise/band parameters of one cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    /// Cell radius in meters.
    pub cell_radius_m: f64,
    /// BS antenna count.
    pub m: usize,
    /// User count.
    pub k: usize,
    /// Repeater count.
    pub n: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub h_bs_m: f64,
    pub h_rep_m: f64,
    pub h_ue_m: f64,
    /// User transmit power cap, dBm.
    pub p_max_dbm: f64,
    /// Repeater transmit power cap, dBm.
    pub p_max_rep_dbm: f64,
    /// Maximum amplification gain, amplitude dB.
    pub a_max_db: f64,
    pub noise_figure_db: f64,
    pub noise_density_dbm_hz: f64,
    /// Repeater-to-BS noise power ratio, linear.
    pub rep_noise_ratio: f64,
    pub min_ue_bs_dist_m: f64,
    pub min_rep_bs_dist_m: f64,
    pub seed: u64,
    /// Stability margin in (0, 1].
    pub eta: f64,
    /// Force line-of-sight on repeater-to-BS links.
    pub los_r2b_forced: bool,
}

impl Default for Scenario {
    /// The FR1 defaults: 6 GHz carrier, 20 MHz bandwidth, 1000 m cell.
    fn default() -> Self {
        Scenario {
            cell_radius_m: 1000.0,
            m: 64,
            k: 20,
            n: 40,
            carrier_hz: 6.0e9,
            bandwidth_hz: 20.0e6,
            h_bs_m: 25.0,
            h_rep_m: 10.0,
            h_ue_m: 1.5,
            p_max_dbm: 23.0,
            p_max_rep_dbm: 23.0,
            a_max_db: 90.0,
            noise_figure_db: 9.0,
            noise_density_dbm_hz: -174.0,
            rep_noise_ratio: 1.0,
            min_ue_bs_dist_m: 35.0,
            min_rep_bs_dist_m: 100.0,
            seed: 1,
            eta: 0.9,
            los_r2b_forced: true,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.m < self.n {
            return Err(ScenarioError::Invalid(format!(
                "BS antenna count must be at least the repeater count ({} < {})",
                self.m, self.n
            )));
        }
        if self.m == 0 || self.k == 0 {
            return Err(ScenarioError::Invalid(
                "antenna and user counts must be at least 1".into(),
            ));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(ScenarioError::Invalid(format!(
                "eta must lie in (0, 1], got {}",
                self.eta
            )));
        }
        for (name, v) in [
            ("cell_radius_m", self.cell_radius_m),
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("h_bs_m", self.h_bs_m),
            ("h_rep_m", self.h_rep_m),
            ("h_ue_m", self.h_ue_m),
        ] {
            if v.is_nan() || v <= 0.0 {
                return Err(ScenarioError::Invalid(format!("{name} must be positive")));
            }
        }
        if self.min_ue_bs_dist_m < 0.0
            || self.min_rep_bs_dist_m < 0.0
            || self.min_ue_bs_dist_m >= self.cell_radius_m
        {
            return Err(ScenarioError::Invalid(
                "minimum distances must be nonnegative and below the cell radius".into(),
            ));
        }
        if self.rep_noise_ratio < 0.0 {
            return Err(ScenarioError::Invalid(
                "rep_noise_ratio must be nonnegative".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Noise powers `(bs, repeater)` in linear watts.
    pub fn noise_power(&self) -> NoisePowers {
        let bs_dbm =
            self.noise_density_dbm_hz + self.noise_figure_db + 10.0 * self.bandwidth_hz.log10();
        let bs_w = crate::units::dbm_to_watts(bs_dbm);
        NoisePowers {
            bs_w,
            rep_w: self.rep_noise_ratio * bs_w,
        }
    }
}

/// Per-receiver noise powers in watts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePowers {
    pub bs_w: f64,
    pub rep_w: f64,
}

/// Node positions for one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub bs_pos: Point3,
    pub user_pos: Vec<Point3>,
    pub rep_pos: Vec<Point3>,
}

impl Layout {
    /// Construct the full layout for a scenario: users dropped uniformly
    /// from the placement stream of `(seed, trial)`, repeaters on the
    /// deterministic hexagonal lattice.
    pub fn build(s: &Scenario, trial: u64) -> Result<Layout, ScenarioError> {
        s.validate()?;
        let mut rng = stream_rng(s.seed, StreamPurpose::Placement, trial);
        let user_pos = place_users(s, &mut rng);
        let rep_pos = place_repeaters_hex(s)?;
        Ok(Layout {
            bs_pos: Point3::new(0.0, 0.0, s.h_bs_m),
            user_pos,
            rep_pos,
        })
    }
}

/// Drop `K` users uniformly over the annulus between the minimum BS
/// distance and the cell radius. Deterministic given the generator state.
pub fn place_users(s: &Scenario, rng: &mut impl Rng) -> Vec<Point3> {
    let r_min = s.min_ue_bs_dist_m;
    let r_max = s.cell_radius_m;
    (0..s.k)
        .map(|_| {
            // area-uniform radius on the annulus
            let u: f64 = rng.gen();
            let r = (u * (r_max * r_max - r_min * r_min) + r_min * r_min).sqrt();
            let theta: f64 = rng.gen::<f64>() * 2.0 * std::f64::consts::PI;
            Point3::new(r * theta.cos(), r * theta.sin(), s.h_ue_m)
        })
        .collect()
}

/// Place `N` repeaters on a hexagonal lattice centered at the BS.
///
/// The lattice pitch is the largest one whose points, restricted to the
/// annulus between the BS exclusion radius and the cell radius, still
/// number at least `N`; it is found by bisection. Points are then taken
/// in order of increasing BS distance (angle breaks ties), which skips
/// the excluded inner points in favor of the next ring out. The result is
/// fully deterministic.
pub fn place_repeaters_hex(s: &Scenario) -> Result<Vec<Point3>, ScenarioError> {
    if s.n == 0 {
        return Ok(Vec::new());
    }
    let r = s.cell_radius_m;
    let excl = s.min_rep_bs_dist_m;

    // repeaters are never packed tighter than a meter apart
    let pitch_min = 1.0;
    let available = count_lattice_points(pitch_min, r, excl);
    if available < s.n {
        return Err(ScenarioError::PackingFailed {
            requested: s.n,
            available,
        });
    }
    let mut lo = pitch_min;
    let mut hi = 2.0 * r;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if count_lattice_points(mid, r, excl) >= s.n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let pitch = lo * (1.0 - 1e-12);
    let mut pts = lattice_points(pitch, r, excl);
    pts.truncate(s.n);
    Ok(pts
        .into_iter()
        .map(|(x, y)| Point3::new(x, y, s.h_rep_m))
        .collect())
}

fn for_each_lattice_point(pitch: f64, radius: f64, excl: f64, mut f: impl FnMut(f64, f64)) {
    let span = (radius / pitch).ceil() as i64 + 2;
    let sqrt3_2 = 3f64.sqrt() / 2.0;
    for i in -span..=span {
        for j in -span..=span {
            let x = pitch * (i as f64 + 0.5 * j as f64);
            let y = pitch * sqrt3_2 * j as f64;
            let d = (x * x + y * y).sqrt();
            if d <= radius && d >= excl {
                f(x, y);
            }
        }
    }
}

fn count_lattice_points(pitch: f64, radius: f64, excl: f64) -> usize {
    let mut count = 0;
    for_each_lattice_point(pitch, radius, excl, |_, _| count += 1);
    count
}

/// Hexagonal lattice points with the given pitch inside the annulus
/// `[excl, radius]`, sorted by (BS distance, angle).
fn lattice_points(pitch: f64, radius: f64, excl: f64) -> Vec<(f64, f64)> {
    let mut pts = Vec::new();
    for_each_lattice_point(pitch, radius, excl, |x, y| pts.push((x, y)));
    pts.sort_by(|a, b| {
        let da = (a.0 * a.0 + a.1 * a.1).sqrt();
        let db = (b.0 * b.0 + b.1 * b.1).sqrt();
        let ang_a = a.1.atan2(a.0);
        let ang_b = b.1.atan2(b.0);
        da.partial_cmp(&db)
            .unwrap()
            .then(ang_a.partial_cmp(&ang_b).unwrap())
    });
    pts
}

/// Place `n` repeaters equally spaced on a circle of the given radius,
/// at angles `2*pi*i/n`. Chord distances between repeaters `i` apart are
/// `2 R sin(i pi / n)`.
pub fn place_repeaters_circle(n: usize, radius_m: f64) -> Vec<Point3> {
    assert!(n >= 2, "a circle layout needs at least two repeaters");
    (0..n)
        .map(|i| {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            Point3::new(radius_m * theta.cos(), radius_m * theta.sin(), 0.0)
        })
        .collect()
}
