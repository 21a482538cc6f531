//! Durations with a mandatory unit suffix.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::Deserialize;

/// A duration in seconds, written in config files as `"40.599ms"`, `"0.1s"`
/// or `"500us"`. Bare numbers are rejected.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Duration(pub f64);

impl Duration {
    pub fn secs(self) -> f64 {
        self.0
    }

    pub fn millis(self) -> f64 {
        self.0 * 1000.0
    }
}

pub fn parse_duration(text: &str) -> Result<Duration, String> {
    let t = text.trim();
    let (number, exponent) = if let Some(n) = t.strip_suffix("ms") {
        (n, -3)
    } else if let Some(n) = t.strip_suffix("us") {
        (n, -6)
    } else if let Some(n) = t.strip_suffix('s') {
        (n, 0)
    } else {
        return Err(format!("`{t}` has no unit; use a suffix of ms, s or us"));
    };
    let number = number.trim();
    let bad = || format!("`{t}` is not a number followed by a unit");
    // Shifting the decimal exponent keeps "40.599ms" at the double nearest 0.040599.
    let v: f64 = if number.contains(['e', 'E']) {
        number.parse::<f64>().map_err(|_| bad())? * 10f64.powi(exponent)
    } else {
        number.parse::<f64>().map_err(|_| bad())?;
        format!("{number}e{exponent}").parse().map_err(|_| bad())?
    };
    if !v.is_finite() || v < 0.0 {
        return Err(format!("`{t}` must be finite and non-negative"));
    }
    Ok(Duration(v))
}

struct DurationVisitor;

impl Visitor<'_> for DurationVisitor {
    type Value = Duration;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a duration string with a unit, e.g. \"40.599ms\"")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Duration, E> {
        parse_duration(v).map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Duration, E> {
        Err(E::custom(format!("duration {v} has no unit; write it as a string such as \"{v}ms\"")))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Duration, E> {
        Err(E::custom(format!("duration {v} has no unit; write it as a string such as \"{v}ms\"")))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Duration, E> {
        Err(E::custom(format!("duration {v} has no unit; write it as a string such as \"{v}ms\"")))
    }
}

impl<'de> Deserialize<'de> for Duration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(DurationVisitor)
    }
}
