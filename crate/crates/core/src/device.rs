//! Device model and Hamiltonian builders.
//!
//! All frequencies are stored in rad/us; use [`crate::units`] to convert.
//! The static Hamiltonian is
//!
//! H0 = Σ_i ω_i a_i†a_i + (η_i/2) a_i†a_i†a_i a_i + Σ_{i<j} g_ij C_ij
//!
//! where the coupling term C_ij is either the number-conserving exchange
//! `a_i†a_j + a_i a_j†` or the full charge-type product `(a_i + a_i†)(a_j + a_j†)`.

use serde::{Deserialize, Serialize};

use crate::dynamics::Envelope;
use crate::error::{Error, Result};
use crate::qops::{self, Op, SpaceLayout};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeRole {
    Qubit,
    Coupler,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CouplingForm {
    /// g (a_i†a_j + a_i a_j†), conserves total excitation number.
    Exchange,
    /// g (a_i + a_i†)(a_j + a_j†), keeps the counter-rotating terms.
    #[default]
    Full,
}

/// Energy relaxation and Ramsey dephasing times, in us.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coherence {
    pub t1: f64,
    pub t2_star: f64,
}

impl Coherence {
    /// Pure dephasing time from 1/T2* = 1/(2 T1) + 1/Tφ. Infinite when T2* = 2 T1.
    pub fn t_phi(&self) -> f64 {
        let rate = 1.0 / self.t2_star - 0.5 / self.t1;
        if rate <= 0.0 {
            f64::INFINITY
        } else {
            1.0 / rate
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeSpec {
    pub name: String,
    pub role: ModeRole,
    /// Bare frequency, rad/us.
    pub frequency: f64,
    /// Anharmonicity, rad/us.
    pub anharmonicity: f64,
    pub levels: usize,
    pub coherence: Option<Coherence>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSpec {
    pub mode_a: String,
    pub mode_b: String,
    /// rad/us
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeviceSpec {
    pub name: String,
    pub coupling_form: CouplingForm,
    pub modes: Vec<ModeSpec>,
    pub couplings: Vec<CouplingSpec>,
}

/// A coherent tone on one mode. `envelope: None` means a flat, always-on drive.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveTone {
    pub target: String,
    /// rad/us
    pub frequency: f64,
    /// Peak amplitude Ω_d, rad/us.
    pub amplitude: f64,
    pub envelope: Option<Envelope>,
}

impl DriveTone {
    pub fn flat(target: impl Into<String>, frequency: f64, amplitude: f64) -> Self {
        DriveTone { target: target.into(), frequency, amplitude, envelope: None }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        DriveTone { amplitude, ..self.clone() }
    }
}

impl DeviceSpec {
    pub fn validate(&self) -> Result<()> {
        for (i, m) in self.modes.iter().enumerate() {
            if m.levels < 2 {
                return Err(Error::InvalidDevice(format!("mode {} has {} levels (< 2)", m.name, m.levels)));
            }
            if !(m.frequency > 0.0) {
                return Err(Error::InvalidDevice(format!("mode {} has non-positive frequency", m.name)));
            }
            if self.modes[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::InvalidDevice(format!("duplicate mode name {}", m.name)));
            }
        }
        let mut pairs = Vec::new();
        for c in &self.couplings {
            let a = self.mode_index(&c.mode_a)?;
            let b = self.mode_index(&c.mode_b)?;
            if a == b {
                return Err(Error::InvalidDevice(format!("self-coupling on {}", c.mode_a)));
            }
            let key = (a.min(b), a.max(b));
            if pairs.contains(&key) {
                return Err(Error::InvalidDevice(format!("coupling {}-{} declared twice", c.mode_a, c.mode_b)));
            }
            pairs.push(key);
        }
        if self.qubit_indices().len() < 2 {
            return Err(Error::InvalidDevice("at least two qubit modes are required".into()));
        }
        Ok(())
    }

    pub fn mode_index(&self, name: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m.name == name)
            .ok_or_else(|| Error::UnknownMode(name.to_string()))
    }

    pub fn mode(&self, name: &str) -> Result<&ModeSpec> {
        Ok(&self.modes[self.mode_index(name)?])
    }

    pub fn qubit_indices(&self) -> Vec<usize> {
        self.indices_with_role(ModeRole::Qubit)
    }

    pub fn coupler_indices(&self) -> Vec<usize> {
        self.indices_with_role(ModeRole::Coupler)
    }

    fn indices_with_role(&self, role: ModeRole) -> Vec<usize> {
        self.modes.iter().enumerate().filter(|(_, m)| m.role == role).map(|(i, _)| i).collect()
    }

    pub fn layout(&self) -> SpaceLayout {
        SpaceLayout::from_levels(&self.modes.iter().map(|m| m.levels).collect::<Vec<_>>())
            .expect("validated truncations")
    }

    pub fn coupling(&self, a: &str, b: &str) -> Option<f64> {
        self.couplings
            .iter()
            .find(|c| (c.mode_a == a && c.mode_b == b) || (c.mode_a == b && c.mode_b == a))
            .map(|c| c.strength)
    }

    /// Copy with the named mode truncated to `levels`.
    pub fn with_levels(&self, name: &str, levels: usize) -> Result<DeviceSpec> {
        let mut out = self.clone();
        let i = self.mode_index(name)?;
        out.modes[i].levels = levels;
        out.validate()?;
        Ok(out)
    }

    /// Copy with the named mode's bare frequency replaced.
    pub fn with_frequency(&self, name: &str, frequency: f64) -> Result<DeviceSpec> {
        let mut out = self.clone();
        let i = self.mode_index(name)?;
        out.modes[i].frequency = frequency;
        out.validate()?;
        Ok(out)
    }

    /// Copy with one coupling strength replaced (added if absent).
    pub fn with_coupling(&self, a: &str, b: &str, strength: f64) -> Result<DeviceSpec> {
        let mut out = self.clone();
        match out
            .couplings
            .iter_mut()
            .find(|c| (c.mode_a == a && c.mode_b == b) || (c.mode_a == b && c.mode_b == a))
        {
            Some(c) => c.strength = strength,
            None => out.couplings.push(CouplingSpec { mode_a: a.into(), mode_b: b.into(), strength }),
        }
        out.validate()?;
        Ok(out)
    }

    /// Copy with every coupling strength set to zero.
    pub fn uncoupled(&self) -> DeviceSpec {
        let mut out = self.clone();
        for c in &mut out.couplings {
            c.strength = 0.0;
        }
        out
    }

    /// Copy with the order of two modes exchanged (labels travel with the modes).
    pub fn with_modes_swapped(&self, a: &str, b: &str) -> Result<DeviceSpec> {
        let mut out = self.clone();
        let (i, j) = (self.mode_index(a)?, self.mode_index(b)?);
        out.modes.swap(i, j);
        Ok(out)
    }
}

/// Static Hamiltonian H0 in rad/us.
pub fn build_static_hamiltonian(spec: &DeviceSpec) -> Result<Op> {
    spec.validate()?;
    let layout = spec.layout();
    let dim = layout.total_dim();
    let lowering: Vec<Op> =
        (0..spec.modes.len()).map(|i| qops::annihilation(&layout, i)).collect::<Result<_>>()?;
    let mut h = Op::zeros(dim);
    for (i, mode) in spec.modes.iter().enumerate() {
        let n = qops::number(&layout, i)?;
        // a†a†aa = n(n-1)
        let nn1 = &(&n * &n) - &n;
        h = &h + &n.scale(mode.frequency);
        h = &h + &nn1.scale(mode.anharmonicity / 2.0);
    }
    for c in &spec.couplings {
        let i = spec.mode_index(&c.mode_a)?;
        let j = spec.mode_index(&c.mode_b)?;
        let (ai, aj) = (&lowering[i], &lowering[j]);
        let term = match spec.coupling_form {
            CouplingForm::Exchange => &(&ai.dagger() * aj) + &(ai * &aj.dagger()),
            CouplingForm::Full => {
                let xi = &ai.dagger() + ai;
                let xj = &aj.dagger() + aj;
                &xi * &xj
            }
        };
        h = &h + &term.scale(c.strength);
    }
    h.hermitian = true;
    Ok(h)
}

/// H0 − ω_d N_total + (Ω_d/2)(a_c + a_c†): every mode in one frame rotating at
/// the drive frequency, counter-rotating drive terms dropped. Only static for
/// number-conserving couplings, so full-coupling devices are rejected; use
/// [`crate::frame::DrivenFrame`] for those.
pub fn build_drive_rotating_hamiltonian(spec: &DeviceSpec, tone: &DriveTone) -> Result<Op> {
    if spec.coupling_form != CouplingForm::Exchange {
        return Err(Error::Frame(
            "a common bare-basis rotating frame is time-dependent for full (counter-rotating) couplings".into(),
        ));
    }
    if tone.envelope.is_some() {
        return Err(Error::InvalidArgument("rotating-frame Hamiltonian needs a flat tone".into()));
    }
    if tone.amplitude < 0.0 {
        return Err(Error::InvalidArgument("drive amplitude must be non-negative".into()));
    }
    let target = spec.mode_index(&tone.target)?;
    let layout = spec.layout();
    let h0 = build_static_hamiltonian(spec)?;
    let n_total = qops::total_number(&layout);
    let a = qops::annihilation(&layout, target)?;
    let drive = &a + &a.dagger();
    let mut h = &(&h0 - &n_total.scale(tone.frequency)) + &drive.scale(tone.amplitude / 2.0);
    h.hermitian = true;
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config;
    use crate::linalg::{commutator, eigh, max_abs};
    use crate::units::{ghz, mhz};

    fn single_mode(levels: usize) -> DeviceSpec {
        DeviceSpec {
            name: "one".into(),
            coupling_form: CouplingForm::Exchange,
            modes: vec![
                ModeSpec { name: "Q".into(), role: ModeRole::Qubit, frequency: ghz(5.0), anharmonicity: mhz(-200.0), levels, coherence: None },
                ModeSpec { name: "R".into(), role: ModeRole::Qubit, frequency: ghz(6.0), anharmonicity: 0.0, levels: 2, coherence: None },
            ],
            couplings: vec![],
        }
    }

    #[test]
    fn uncoupled_ladder_is_diagonal() {
        let spec = single_mode(3);
        let h = build_static_hamiltonian(&spec).unwrap();
        // entries for mode R in ground: rows 0, 2, 4
        let w = ghz(5.0);
        let eta = mhz(-200.0);
        assert!((h.matrix[(0, 0)].re - 0.0).abs() < 1e-9);
        assert!((h.matrix[(2, 2)].re - w).abs() < 1e-9);
        assert!((h.matrix[(4, 4)].re - (2.0 * w + eta)).abs() < 1e-9);
        let off: f64 = h.matrix.iter().enumerate().filter(|(k, _)| k % 7 != 0).map(|(_, z)| z.norm()).sum();
        assert!(off < 1e-12);
    }

    #[test]
    fn table_s1_structure() {
        for form in [CouplingForm::Exchange, CouplingForm::Full] {
            let mut spec = config::table_s1();
            spec.coupling_form = form;
            let h = build_static_hamiltonian(&spec).unwrap();
            assert!(h.hermiticity_defect() < 1e-12 * max_abs(&h.matrix).max(1.0));
            let layout = spec.layout();
            let n = qops::total_number(&layout);
            for (r, occ_r) in layout.states().enumerate() {
                for (c, occ_c) in layout.states().enumerate() {
                    if r == c || h.matrix[(r, c)].norm() == 0.0 {
                        continue;
                    }
                    let nr: usize = occ_r.iter().sum();
                    let nc: usize = occ_c.iter().sum();
                    match form {
                        CouplingForm::Exchange => assert_eq!(nr, nc),
                        CouplingForm::Full => assert!(nr == nc || nr.abs_diff(nc) == 2),
                    }
                }
            }
            let comm = max_abs(&commutator(&h.matrix, &n.matrix));
            match form {
                CouplingForm::Exchange => assert!(comm < 1e-9, "{comm}"),
                CouplingForm::Full => assert!(comm > 1.0),
            }
        }
    }

    #[test]
    fn zero_coupling_eigenvalues_are_ladder_sums() {
        let spec = config::table_s1().uncoupled();
        let h = build_static_hamiltonian(&spec).unwrap();
        let mut expected: Vec<f64> = spec
            .layout()
            .states()
            .map(|occ| {
                occ.iter()
                    .zip(&spec.modes)
                    .map(|(&n, m)| {
                        let n = n as f64;
                        m.frequency * n + 0.5 * m.anharmonicity * n * (n - 1.0)
                    })
                    .sum()
            })
            .collect();
        expected.sort_by(f64::total_cmp);
        let eig = eigh(&h.matrix);
        for (a, b) in eig.values.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn undriven_rotating_frame_subtracts_number() {
        let mut spec = config::table_s1();
        spec.coupling_form = CouplingForm::Exchange;
        let tone = DriveTone::flat("C", ghz(6.354), 0.0);
        let h = build_drive_rotating_hamiltonian(&spec, &tone).unwrap();
        let h0 = build_static_hamiltonian(&spec).unwrap();
        let n = qops::total_number(&spec.layout());
        let diff = &(&h0 - &n.scale(tone.frequency)) - &h;
        assert!(max_abs(&diff.matrix) < 1e-9);
        assert!(max_abs(&commutator(&h.matrix, &n.matrix)) < 1e-9);
    }

    #[test]
    fn driven_frame_only_breaks_number_on_coupler_neighbors() {
        let mut spec = config::table_s1();
        spec.coupling_form = CouplingForm::Exchange;
        let tone = DriveTone::flat("C", ghz(6.354), mhz(0.66));
        let h = build_drive_rotating_hamiltonian(&spec, &tone).unwrap();
        assert!(h.hermiticity_defect() < 1e-12);
        let layout = spec.layout();
        let c = spec.mode_index("C").unwrap();
        for (r, occ_r) in layout.states().enumerate() {
            for (col, occ_c) in layout.states().enumerate() {
                if h.matrix[(r, col)].norm() == 0.0 {
                    continue;
                }
                let nr: usize = occ_r.iter().sum();
                let nc: usize = occ_c.iter().sum();
                if nr != nc {
                    assert_eq!(occ_r[c].abs_diff(occ_c[c]), 1);
                    for m in 0..occ_r.len() {
                        if m != c {
                            assert_eq!(occ_r[m], occ_c[m]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn two_level_drive_matrix() {
        // one two-level mode plus an inert spectator keeps the 2x2 block visible
        let spec = DeviceSpec {
            name: "tls".into(),
            coupling_form: CouplingForm::Exchange,
            modes: vec![
                ModeSpec { name: "A".into(), role: ModeRole::Qubit, frequency: ghz(1.0), anharmonicity: 0.0, levels: 2, coherence: None },
                ModeSpec { name: "C".into(), role: ModeRole::Qubit, frequency: ghz(6.0), anharmonicity: 0.0, levels: 2, coherence: None },
            ],
            couplings: vec![],
        };
        let delta = mhz(3.0);
        let omega = mhz(1.5);
        let tone = DriveTone::flat("C", ghz(6.0) + delta, omega);
        let h = build_drive_rotating_hamiltonian(&spec, &tone).unwrap();
        // block with A in |0>: rows 0 (C=0) and 1 (C=1)
        assert!(h.matrix[(0, 0)].norm() < 1e-9);
        assert!((h.matrix[(0, 1)].re - omega / 2.0).abs() < 1e-12);
        assert!((h.matrix[(1, 1)].re + delta).abs() < 1e-9);
        let block = crate::linalg::CMat::from_fn(2, 2, |i, j| h.matrix[(i, j)]);
        let eig = eigh(&block);
        let root = (delta * delta + omega * omega).sqrt();
        assert!((eig.values[0] - (-delta - root) / 2.0).abs() < 1e-9);
        assert!((eig.values[1] - (-delta + root) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn full_coupling_rejected_by_bare_frame() {
        let spec = config::table_s1();
        let tone = DriveTone::flat("C", ghz(6.354), mhz(0.5));
        assert!(matches!(build_drive_rotating_hamiltonian(&spec, &tone), Err(Error::Frame(_))));
    }

    #[test]
    fn validation_errors() {
        let mut spec = config::table_s1();
        spec.couplings[0].mode_b = "nope".into();
        assert!(matches!(build_static_hamiltonian(&spec), Err(Error::UnknownMode(_))));
        let spec = config::table_s1();
        let tone = DriveTone::flat("X", 1.0, 1.0);
        let mut ex = spec.clone();
        ex.coupling_form = CouplingForm::Exchange;
        assert!(matches!(build_drive_rotating_hamiltonian(&ex, &tone), Err(Error::UnknownMode(_))));
        assert!(spec.with_levels("Q1", 1).is_err());
    }

    #[test]
    fn dephasing_time_from_ramsey() {
        let c = Coherence { t1: 20.0, t2_star: 28.5 };
        let tphi = c.t_phi();
        assert!((1.0 / c.t2_star - (0.5 / c.t1 + 1.0 / tphi)).abs() < 1e-15);
        assert!(Coherence { t1: 10.0, t2_star: 20.0 }.t_phi().is_infinite());
    }
}
