//! Virtual time.
//!
//! All simulated time is integer microseconds from the run epoch. Integer
//! time keeps conservation checks exact and makes event ordering total.

/// Microseconds of virtual time (or a duration in microseconds).
pub type Micros = i64;

pub const MICROS_PER_MS: Micros = 1_000;
pub const MICROS_PER_SEC: Micros = 1_000_000;

/// Converts milliseconds (possibly fractional) to microseconds, rounding to
/// the nearest microsecond.
pub fn ms(value: f64) -> Micros {
    (value * MICROS_PER_MS as f64).round() as Micros
}

pub fn secs(value: f64) -> Micros {
    (value * MICROS_PER_SEC as f64).round() as Micros
}

pub fn as_ms(value: Micros) -> f64 {
    value as f64 / MICROS_PER_MS as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_round_to_microseconds() {
        assert_eq!(ms(15.0), 15_000);
        assert_eq!(ms(0.0004), 0);
        assert_eq!(ms(0.0006), 1);
        assert_eq!(secs(1.5), 1_500_000);
        assert_eq!(as_ms(2_500), 2.5);
    }
}
