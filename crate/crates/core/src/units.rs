//! Unit conversions used throughout the crate.
//!
//! Power quantities are kept in linear watts internally; amplification and
//! channel gains are linear amplitude factors. Amplitude decibels use
//! `20 log10`, power decibels use `10 log10`.

/// Propagation speed used for delays and free-space gains, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// dBm to linear watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Linear watts to dBm.
pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Amplitude decibels to a linear amplitude factor.
pub fn db_to_amplitude(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Linear amplitude factor to decibels.
pub fn amplitude_to_db(amp: f64) -> f64 {
    20.0 * amp.log10()
}

/// Power decibels to a linear power factor.
pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
