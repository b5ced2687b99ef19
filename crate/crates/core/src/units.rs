//! dB / dBm / linear conversions.
//!
//! Everything inside the solver is linear (watts for powers, pure ratios for
//! gains). Decibel values appear only at configuration boundaries.

/// Convert a ratio in dB to linear scale.
#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10.0_f64.powf(db / 10.0)
}

/// Convert a linear ratio to dB.
#[inline]
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Convert a power in dBm to watts.
#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10.0_f64.powf((dbm - 30.0) / 10.0)
}

/// Convert a power in watts to dBm.
#[inline]
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_reference_points() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-15);
        assert!((watts_to_dbm(1.0) - 30.0).abs() < 1e-12);
    }

    #[test]
    fn db_roundtrip() {
        for v in [1e-9, 1e-3, 1.0, 42.0, 3.9811e4] {
            let back = db_to_linear(linear_to_db(v));
            assert!((back - v).abs() / v < 1e-12);
        }
    }
}
