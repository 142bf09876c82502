//! Device files.
//!
//! A device file is TOML where every frequency and time carries an explicit
//! unit suffix (`"5.627 GHz"`, `"-123 kHz"`, `"300 ns"`). Unitless values are
//! rejected and errors name the offending field, e.g. `mode[Q1].frequency`.
//! Modes are laid out in declaration order: list qubits first, then couplers.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::device::{Coherence, CouplingForm, CouplingSpec, DeviceSpec, ModeRole, ModeSpec};
use crate::error::{Error, Result};
use crate::units::{parse_duration, parse_frequency, to_mhz};

pub const TABLE_S1: &str = include_str!("../devices/table-s1.device");
pub const CHAIN_S6: &str = include_str!("../devices/chain-s6.device");

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    name: String,
    coupling_form: Option<String>,
    #[serde(default)]
    mode: Vec<RawMode>,
    #[serde(default)]
    coupling: Vec<RawCoupling>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMode {
    name: String,
    role: String,
    frequency: String,
    anharmonicity: String,
    levels: i64,
    t1: Option<String>,
    t2_star: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    between: [String; 2],
    strength: String,
}

fn config_err(field: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

pub fn parse_device(text: &str) -> Result<DeviceSpec> {
    let raw: RawDevice = toml::from_str(text).map_err(|e| {
        let path = e.message().to_string();
        config_err("<document>", format!("{path}{}", e.span().map(|s| format!(" (bytes {}..{})", s.start, s.end)).unwrap_or_default()))
    })?;

    let coupling_form = match raw.coupling_form.as_deref() {
        None | Some("full") => CouplingForm::Full,
        Some("exchange") => CouplingForm::Exchange,
        Some(other) => return Err(config_err("coupling_form", format!("unknown coupling form `{other}` (full|exchange)"))),
    };

    let mut modes = Vec::with_capacity(raw.mode.len());
    for m in &raw.mode {
        let field = |f: &str| format!("mode[{}].{f}", m.name);
        let role = match m.role.as_str() {
            "qubit" => ModeRole::Qubit,
            "coupler" => ModeRole::Coupler,
            other => return Err(config_err(field("role"), format!("unknown role `{other}` (qubit|coupler)"))),
        };
        let frequency = parse_frequency(&m.frequency).map_err(|e| config_err(field("frequency"), e))?;
        let anharmonicity = parse_frequency(&m.anharmonicity).map_err(|e| config_err(field("anharmonicity"), e))?;
        if m.levels < 2 {
            return Err(config_err(field("levels"), format!("truncation must be >= 2, got {}", m.levels)));
        }
        let coherence = match (&m.t1, &m.t2_star) {
            (None, None) => None,
            (Some(t1), Some(t2)) => Some(Coherence {
                t1: parse_duration(t1).map_err(|e| config_err(field("t1"), e))?,
                t2_star: parse_duration(t2).map_err(|e| config_err(field("t2_star"), e))?,
            }),
            _ => return Err(config_err(field("t1"), "t1 and t2_star must be given together")),
        };
        modes.push(ModeSpec {
            name: m.name.clone(),
            role,
            frequency,
            anharmonicity,
            levels: m.levels as usize,
            coherence,
        });
    }

    let mut couplings = Vec::with_capacity(raw.coupling.len());
    for c in &raw.coupling {
        let [a, b] = &c.between;
        let strength = parse_frequency(&c.strength)
            .map_err(|e| config_err(format!("coupling[{a}-{b}].strength"), e))?;
        couplings.push(CouplingSpec { mode_a: a.clone(), mode_b: b.clone(), strength });
    }

    let spec = DeviceSpec { name: raw.name, coupling_form, modes, couplings };
    spec.validate()?;
    Ok(spec)
}

pub fn load_device(path: &Path) -> Result<DeviceSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_device(&text)
}

/// Serialize back to device-file text. Frequencies are written in MHz.
pub fn to_device_text(spec: &DeviceSpec) -> String {
    let mut out = String::new();
    let form = match spec.coupling_form {
        CouplingForm::Full => "full",
        CouplingForm::Exchange => "exchange",
    };
    writeln!(out, "name = {:?}", spec.name).unwrap();
    writeln!(out, "coupling_form = \"{form}\"").unwrap();
    for m in &spec.modes {
        let role = match m.role {
            ModeRole::Qubit => "qubit",
            ModeRole::Coupler => "coupler",
        };
        writeln!(out, "\n[[mode]]").unwrap();
        writeln!(out, "name = {:?}", m.name).unwrap();
        writeln!(out, "role = \"{role}\"").unwrap();
        writeln!(out, "frequency = \"{} MHz\"", to_mhz(m.frequency)).unwrap();
        writeln!(out, "anharmonicity = \"{} MHz\"", to_mhz(m.anharmonicity)).unwrap();
        writeln!(out, "levels = {}", m.levels).unwrap();
        if let Some(c) = m.coherence {
            writeln!(out, "t1 = \"{} us\"", c.t1).unwrap();
            writeln!(out, "t2_star = \"{} us\"", c.t2_star).unwrap();
        }
    }
    for c in &spec.couplings {
        writeln!(out, "\n[[coupling]]").unwrap();
        writeln!(out, "between = [{:?}, {:?}]", c.mode_a, c.mode_b).unwrap();
        writeln!(out, "strength = \"{} MHz\"", to_mhz(c.strength)).unwrap();
    }
    out
}

/// The bundled two-qubit device.
pub fn table_s1() -> DeviceSpec {
    parse_device(TABLE_S1).expect("bundled table-s1 device parses")
}

/// The bundled three-qubit, two-coupler chain.
pub fn chain_s6() -> DeviceSpec {
    parse_device(CHAIN_S6).expect("bundled chain-s6 device parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{ghz, khz, mhz};

    #[test]
    fn bundled_table_s1() {
        let spec = table_s1();
        assert_eq!(spec.modes.len(), 3);
        assert_eq!(spec.coupling_form, CouplingForm::Full);
        let c = spec.mode("C").unwrap();
        assert!((c.frequency - ghz(6.363)).abs() < 1e-9);
        assert!((c.anharmonicity - khz(-123.0)).abs() < 1e-12);
        assert_eq!(c.levels, 5);
        assert!((spec.coupling("C", "Q2").unwrap() - mhz(228.0)).abs() < 1e-12);
        assert_eq!(spec.mode("Q1").unwrap().coherence.unwrap().t1, 20.0);
        assert_eq!(spec.qubit_indices(), vec![0, 1]);
        assert_eq!(spec.coupler_indices(), vec![2]);
    }

    #[test]
    fn bundled_chain() {
        let spec = chain_s6();
        assert_eq!(spec.layout().total_dim(), 432);
        assert_eq!(spec.couplings.len(), 6);
    }

    #[test]
    fn unitless_frequency_names_the_field() {
        let text = TABLE_S1.replace("\"5.627 GHz\"", "\"5.627\"");
        match parse_device(&text) {
            Err(Error::Config { field, message }) => {
                assert_eq!(field, "mode[Q1].frequency");
                assert!(message.contains("no unit"), "{message}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
        let text = TABLE_S1.replace("\"16 MHz\"", "\"16 furlongs\"");
        match parse_device(&text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "coupling[Q1-Q2].strength"),
            other => panic!("expected config error, got {other:?}"),
        }
        let text = TABLE_S1.replace("t1 = \"20 us\"", "t1 = \"20\"");
        assert!(matches!(parse_device(&text), Err(Error::Config { field, .. }) if field == "mode[Q1].t1"));
    }

    #[test]
    fn syntax_and_schema_errors() {
        assert!(matches!(parse_device("name = "), Err(Error::Config { .. })));
        assert!(matches!(parse_device("name = \"x\"\nbogus = 1\n"), Err(Error::Config { .. })));
        let text = TABLE_S1.replace("between = [\"Q1\", \"Q2\"]", "between = [\"Q1\", \"Q9\"]");
        assert!(matches!(parse_device(&text), Err(Error::UnknownMode(_))));
    }

    #[test]
    fn text_round_trip() {
        for spec in [table_s1(), chain_s6()] {
            let text = to_device_text(&spec);
            let back = parse_device(&text).unwrap();
            assert_eq!(to_device_text(&back), text);
            for (a, b) in spec.modes.iter().zip(&back.modes) {
                assert_eq!(a.name, b.name);
                assert!((a.frequency - b.frequency).abs() <= 1e-12 * a.frequency);
                assert!((a.anharmonicity - b.anharmonicity).abs() <= 1e-12 * a.anharmonicity.abs());
            }
        }
    }
}
