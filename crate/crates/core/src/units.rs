//! Frequency and time units.
//!
//! Everything inside the crate is angular frequency in rad/us and time in us.
//! Config files and reports use ordinary frequency (GHz, MHz, kHz).

use std::f64::consts::TAU;

/// rad/us per MHz of ordinary frequency.
pub const RAD_PER_US_PER_MHZ: f64 = TAU;

pub fn ghz(f: f64) -> f64 {
    f * 1e3 * TAU
}

pub fn mhz(f: f64) -> f64 {
    f * TAU
}

pub fn khz(f: f64) -> f64 {
    f * 1e-3 * TAU
}

pub fn to_ghz(w: f64) -> f64 {
    w / TAU * 1e-3
}

pub fn to_mhz(w: f64) -> f64 {
    w / TAU
}

pub fn to_khz(w: f64) -> f64 {
    w / TAU * 1e3
}

/// Parse a frequency with an explicit unit suffix ("5.627 GHz", "-123 kHz").
/// Returns rad/us. Unitless values are rejected.
pub fn parse_frequency(text: &str) -> Result<f64, String> {
    let (value, unit) = split_value_unit(text)?;
    let scale = match unit {
        "GHz" => 1e3,
        "MHz" => 1.0,
        "kHz" => 1e-3,
        "Hz" => 1e-6,
        "" => return Err(format!("frequency `{text}` has no unit (expected GHz, MHz, kHz or Hz)")),
        other => return Err(format!("unknown frequency unit `{other}` in `{text}`")),
    };
    Ok(mhz(value * scale))
}

/// Parse a duration with an explicit unit suffix ("20 us", "300 ns"). Returns us.
pub fn parse_duration(text: &str) -> Result<f64, String> {
    let (value, unit) = split_value_unit(text)?;
    let scale = match unit {
        "s" => 1e6,
        "ms" => 1e3,
        "us" | "µs" => 1.0,
        "ns" => 1e-3,
        "" => return Err(format!("duration `{text}` has no unit (expected s, ms, us or ns)")),
        other => return Err(format!("unknown time unit `{other}` in `{text}`")),
    };
    Ok(value * scale)
}

fn split_value_unit(text: &str) -> Result<(f64, &str), String> {
    let text = text.trim();
    let split = text
        .find(|c: char| c.is_alphabetic() || c == 'µ')
        .unwrap_or(text.len());
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse number in `{text}`"))?;
    if !value.is_finite() {
        return Err(format!("non-finite value in `{text}`"));
    }
    Ok((value, unit.trim()))
}

/// Format rad/us as a frequency string with the given unit.
pub fn format_frequency(w: f64, unit: &str) -> String {
    let v = match unit {
        "GHz" => to_ghz(w),
        "MHz" => to_mhz(w),
        "kHz" => to_khz(w),
        _ => to_mhz(w),
    };
    format!("{v} {unit}")
}
