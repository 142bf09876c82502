//! Emulated Ramsey-type experiments on the default qubit pair.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;
use serde::Serialize;

use crate::cancel::operating_frequency;
use crate::device::{DeviceSpec, DriveTone};
use crate::dynamics::{Axis, Envelope, PulseSchedule, Simulator};
use crate::error::{Error, Result};
use crate::fit::{fit_sinusoid, fit_sinusoid_fixed, SinusoidFit};
use crate::frame::{computational_labels, Tone};
use crate::linalg::CVec;
use crate::spectrum::{default_pair, pair_summary};
use crate::units::{to_khz, RAD_PER_US_PER_MHZ};

/// Rise and fall time of the cancellation pulse, us.
pub const DEFAULT_EDGE: f64 = 0.3;

/// A coupler tone switched on for each idle period.
#[derive(Clone, Debug, PartialEq)]
pub struct IdleDrive {
    pub target: String,
    /// rad/us
    pub frequency: f64,
    /// Peak amplitude, rad/us; zero disables the drive.
    pub amplitude: f64,
    /// Rise/fall duration, us.
    pub edge: f64,
}

impl IdleDrive {
    /// Tone on the default pair's coupler at (ω_c^{ee} + ω_c^{eg})/2.
    pub fn at_operating_point(spec: &DeviceSpec, amplitude: f64) -> Result<Self> {
        let (q1, q2, c) = default_pair(spec)?;
        let spectrum = crate::spectrum::static_spectrum(spec)?;
        let summary = pair_summary(spec, &spectrum, q1, q2, c)?;
        Ok(IdleDrive {
            target: spec.modes[c].name.clone(),
            frequency: operating_frequency(&summary),
            amplitude,
            edge: DEFAULT_EDGE,
        })
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        IdleDrive { amplitude, ..self.clone() }
    }

    fn tone(&self, envelope: Envelope) -> DriveTone {
        DriveTone {
            target: self.target.clone(),
            frequency: self.frequency,
            amplitude: self.amplitude,
            envelope: Some(envelope),
        }
    }

    /// Flat-top pulse filling an idle of length `duration`; edges shrink to
    /// half the idle when it is shorter than two edges.
    pub fn pulse(&self, duration: f64) -> Option<DriveTone> {
        if self.amplitude == 0.0 || duration <= 0.0 {
            return None;
        }
        let edge = self.edge.min(duration / 2.0);
        let env = if edge > 0.0 {
            Envelope::cosine(edge, duration - 2.0 * edge, edge)
        } else {
            Envelope::square(duration)
        };
        Some(self.tone(env))
    }

    /// Pulse whose plateau lasts `plateau`, with edges outside it.
    pub fn pulse_around(&self, plateau: f64) -> Option<DriveTone> {
        if self.amplitude == 0.0 {
            return None;
        }
        Some(self.tone(Envelope::cosine(self.edge, plateau, self.edge)))
    }
}

fn with_idle(schedule: PulseSchedule, drive: &IdleDrive, start: f64, duration: f64) -> PulseSchedule {
    match drive.pulse(duration) {
        Some(t) => schedule.tone(t, start),
        None => schedule,
    }
}

/// Population with qubit mode `q` in |e>.
fn excited_population(sim: &Simulator, psi: &CVec, q: usize) -> f64 {
    (0..sim.dim()).filter(|&k| sim.label_of(k)[q] == 1).map(|k| psi[k].norm_sqr()).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct RamseyTrace {
    /// Delays in us, or second-pulse phases in rad.
    pub axis: Vec<f64>,
    pub population: Vec<f64>,
    pub fit: SinusoidFit,
    /// Fringe frequency, cycles/us. Without a resolved fringe this is the
    /// largest frequency consistent with the observed swing.
    pub frequency: f64,
    /// Set when no fringe is resolved within the delay span.
    pub below_resolution: bool,
}

impl RamseyTrace {
    /// Fringe frequency of a delay-axis trace, kHz.
    pub fn frequency_khz(&self) -> f64 {
        self.frequency * 1e3
    }
}

/// Smallest fitted fringe amplitude accepted as an oscillation; the ideal
/// echo fringe has amplitude 1/2.
pub const MIN_FRINGE_CONTRAST: f64 = 0.1;

/// Upper bound on the fringe frequency of an echo trace that starts at its
/// maximum and never falls more than `max(P(0) - P)` below it.
pub fn fringe_bound(delays: &[f64], population: &[f64]) -> f64 {
    let drop = population.iter().map(|p| population[0] - p).fold(0.0, f64::max).min(1.0);
    let span = delays[delays.len() - 1] - delays[0];
    (1.0 - 2.0 * drop).acos() / (TAU * span)
}

/// Frequency resolution of an echoed trace whose longest delay is `max_delay`
/// per idle, cycles/us: a quarter period over the total evolution 2·max_delay.
pub fn echo_resolution(max_delay: f64) -> f64 {
    1.0 / (4.0 * 2.0 * max_delay)
}

/// Echoed ZZ Ramsey on the second qubit of the default pair:
/// Y/2 -> idle τ -> X(π) on both -> idle τ -> Y/2, one trace per amplitude.
/// The fitted fringe frequency equals |χ_zz|.
pub fn echoed_zz_ramsey(spec: &DeviceSpec, drive: &IdleDrive, amplitudes: &[f64], delays: &[f64]) -> Result<Vec<RamseyTrace>> {
    let sim = Simulator::new(spec)?;
    echoed_zz_ramsey_with(&sim, drive, amplitudes, delays)
}

pub fn echoed_zz_ramsey_with(sim: &Simulator, drive: &IdleDrive, amplitudes: &[f64], delays: &[f64]) -> Result<Vec<RamseyTrace>> {
    let spec = sim.spec();
    let (q1, q2, _) = default_pair(spec)?;
    if delays.len() < 4 || delays.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("delay axis needs at least four increasing points".into()));
    }
    let ground = sim.basis_state(&vec![0; spec.modes.len()])?;
    let cells: Vec<(usize, usize)> =
        (0..amplitudes.len()).flat_map(|i| (0..delays.len()).map(move |j| (i, j))).collect();
    let pops: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let d = drive.with_amplitude(amplitudes[i]);
            let tau = delays[j];
            let mut s = PulseSchedule::idle(2.0 * tau).rotate(q2, Axis::Y, FRAC_PI_2, 0.0);
            s = with_idle(s, &d, 0.0, tau);
            s = s.rotate(q1, Axis::X, PI, tau).rotate(q2, Axis::X, PI, tau);
            s = with_idle(s, &d, tau, tau);
            s = s.rotate(q2, Axis::Y, FRAC_PI_2, 2.0 * tau);
            let out = sim.evolve(&s, &ground)?;
            Ok(excited_population(sim, &out.final_state, q2))
        })
        .collect::<Result<_>>()?;
    let step = delays.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let resolution = echo_resolution(delays[delays.len() - 1] - delays[0]);
    amplitudes
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let population = pops[i * delays.len()..(i + 1) * delays.len()].to_vec();
            let fit = fit_sinusoid(delays, &population, 0.5 / step)?;
            let (frequency, below_resolution) = if fit.amplitude.abs() >= MIN_FRINGE_CONTRAST {
                (fit.frequency, fit.frequency < resolution)
            } else {
                (fringe_bound(delays, &population), true)
            };
            Ok(RamseyTrace { axis: delays.to_vec(), population, fit, frequency, below_resolution })
        })
        .collect()
}

/// Phase-swept Ramsey on `target` with `control` prepared in |g> or |e>.
/// The drive plateau spans the idle τ; its edges sit outside the two π/2
/// pulses. The trace's fitted phase is the phase accumulated by the target
/// in its dressed frame during τ.
pub fn conditional_ramsey(
    sim: &Simulator,
    control: usize,
    control_excited: bool,
    target: usize,
    drive: &IdleDrive,
    tau: f64,
    phases: &[f64],
) -> Result<RamseyTrace> {
    let spec = sim.spec();
    let ground = sim.basis_state(&vec![0; spec.modes.len()])?;
    let lead = if drive.amplitude == 0.0 { 0.0 } else { drive.edge };
    let total = tau + 2.0 * lead;
    let population = phases
        .par_iter()
        .map(|&phi| {
            let mut s = PulseSchedule::idle(total);
            if control_excited {
                s = s.rotate(control, Axis::X, PI, 0.0);
            }
            if let Some(t) = drive.pulse_around(tau) {
                s = s.tone(t, 0.0);
            }
            s = s.rotate(target, Axis::X, FRAC_PI_2, lead).rotate(target, Axis::Phi(phi), FRAC_PI_2, lead + tau);
            let out = sim.evolve(&s, &ground)?;
            Ok(excited_population(sim, &out.final_state, target))
        })
        .collect::<Result<Vec<f64>>>()?;
    let fit = fit_sinusoid_fixed(phases, &population, 1.0 / TAU)?;
    Ok(RamseyTrace { axis: phases.to_vec(), population, frequency: fit.frequency, fit, below_resolution: false })
}

/// Conditional-Ramsey frequency shifts of |ge>, |eg>, |ee> relative to |gg>,
/// beyond the static dressed qubit frequencies, per drive amplitude (rad/us).
#[derive(Clone, Debug, Serialize)]
pub struct FrequencyShiftSet {
    pub amplitudes: Vec<f64>,
    pub shift_ge: Vec<f64>,
    pub shift_eg: Vec<f64>,
    pub shift_ee: Vec<f64>,
    pub chi_zz: Vec<f64>,
}

impl FrequencyShiftSet {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("drive_amp_mhz,shift_ge_khz,shift_eg_khz,shift_ee_khz,chi_zz_khz\n");
        for i in 0..self.amplitudes.len() {
            out += &format!(
                "{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                self.amplitudes[i] / RAD_PER_US_PER_MHZ,
                to_khz(self.shift_ge[i]),
                to_khz(self.shift_eg[i]),
                to_khz(self.shift_ee[i]),
                to_khz(self.chi_zz[i])
            );
        }
        out
    }
}

/// Pick the 2π branch of a phase closest to `predicted`.
fn unwrap_near(phase: f64, predicted: f64) -> f64 {
    phase + TAU * ((predicted - phase) / TAU).round()
}

pub fn frequency_shifts(spec: &DeviceSpec, drive: &IdleDrive, amplitudes: &[f64], tau: f64, phases: &[f64]) -> Result<FrequencyShiftSet> {
    let sim = Simulator::new(spec)?;
    let (q1, q2, c) = default_pair(spec)?;
    let w1 = sim.frame().qubit_frequency(q1)?;
    let w2 = sim.frame().qubit_frequency(q2)?;
    let labels = computational_labels(spec.modes.len(), q1, q2);
    let mut set = FrequencyShiftSet {
        amplitudes: amplitudes.to_vec(),
        shift_ge: vec![],
        shift_eg: vec![],
        shift_ee: vec![],
        chi_zz: vec![],
    };
    for &amp in amplitudes {
        let d = drive.with_amplitude(amp);
        // model prediction only picks the 2π branch
        let tone = Tone { coupler: c, frequency: d.frequency, amplitude: amp };
        let e = sim.frame().track(&labels, &[tone])?.energies;
        let predict = [e[1] - e[0] - w2, e[2] - e[0] - w1, e[3] - e[2] - w2];
        let measure = |control: usize, excited: bool, target: usize, predicted: f64| -> Result<f64> {
            let trace = conditional_ramsey(&sim, control, excited, target, &d, tau, phases)?;
            // P_e = (1 + cos(φ + θ))/2 with θ = (ω − ref)·τ
            let theta = trace.fit.phase;
            Ok(unwrap_near(theta, predicted * tau) / tau)
        };
        let ge = measure(q1, false, q2, predict[0])?;
        let eg = measure(q2, false, q1, predict[1])?;
        let ee_minus_eg = measure(q1, true, q2, predict[2])?;
        let ee = ee_minus_eg + eg;
        set.shift_ge.push(ge);
        set.shift_eg.push(eg);
        set.shift_ee.push(ee);
        set.chi_zz.push(ee - ge - eg);
    }
    Ok(set)
}

/// Single-qubit and correlated Z expectations from a simultaneous Ramsey run.
#[derive(Clone, Debug, Serialize)]
pub struct CorrelationTrace {
    pub delays: Vec<f64>,
    pub sz1: Vec<f64>,
    pub sz2: Vec<f64>,
    pub szz: Vec<f64>,
    pub czz: Vec<f64>,
}

impl CorrelationTrace {
    pub fn max_abs_czz(&self) -> f64 {
        self.czz.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delay_us,sz1,sz2,sz1sz2,czz\n");
        for i in 0..self.delays.len() {
            out += &format!(
                "{:.6},{:.9},{:.9},{:.9},{:.9}\n",
                self.delays[i], self.sz1[i], self.sz2[i], self.szz[i], self.czz[i]
            );
        }
        out
    }
}

/// Qubit-pair populations (P_gg, P_ge, P_eg, P_ee), normalized over the
/// computational qubit levels and summed over everything else.
pub fn pair_populations(sim: &Simulator, psi: &CVec, q1: usize, q2: usize) -> [f64; 4] {
    let mut p = [0.0; 4];
    for k in 0..sim.dim() {
        let l = sim.label_of(k);
        if l[q1] <= 1 && l[q2] <= 1 {
            p[2 * l[q1] + l[q2]] += psi[k].norm_sqr();
        }
    }
    let total: f64 = p.iter().sum();
    p.map(|x| x / total)
}

/// Both qubits: X/2 -> idle τ (drive pulse inside) -> X/2, with frame detunings
/// (rad/us) on the two qubits.
pub fn simultaneous_ramsey(spec: &DeviceSpec, drive: &IdleDrive, detunings: (f64, f64), delays: &[f64]) -> Result<CorrelationTrace> {
    let sim = Simulator::new(spec)?;
    simultaneous_ramsey_with(&sim, drive, detunings, delays)
}

pub fn simultaneous_ramsey_with(sim: &Simulator, drive: &IdleDrive, detunings: (f64, f64), delays: &[f64]) -> Result<CorrelationTrace> {
    let spec = sim.spec();
    let (q1, q2, _) = default_pair(spec)?;
    let ground = sim.basis_state(&vec![0; spec.modes.len()])?;
    let pops: Vec<[f64; 4]> = delays
        .par_iter()
        .map(|&tau| {
            let mut s = PulseSchedule::idle(tau)
                .detune(q1, detunings.0)
                .detune(q2, detunings.1)
                .rotate(q1, Axis::X, FRAC_PI_2, 0.0)
                .rotate(q2, Axis::X, FRAC_PI_2, 0.0);
            s = with_idle(s, drive, 0.0, tau);
            s = s.rotate(q1, Axis::X, FRAC_PI_2, tau).rotate(q2, Axis::X, FRAC_PI_2, tau);
            let out = sim.evolve(&s, &ground)?;
            Ok(pair_populations(sim, &out.final_state, q1, q2))
        })
        .collect::<Result<_>>()?;
    let mut trace = CorrelationTrace { delays: delays.to_vec(), sz1: vec![], sz2: vec![], szz: vec![], czz: vec![] };
    for [gg, ge, eg, ee] in pops {
        let s1 = gg + ge - eg - ee;
        let s2 = gg - ge + eg - ee;
        let s12 = gg - ge - eg + ee;
        trace.sz1.push(s1);
        trace.sz2.push(s2);
        trace.szz.push(s12);
        trace.czz.push(s12 - s1 * s2);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::table_s1;
    use crate::spectrum::dispersive_summary;
    use crate::units::{khz, mhz};

    #[test]
    fn fringe_bound_recovers_slow_cosine() {
        let f = 0.004;
        let delays: Vec<f64> = (0..=60).map(|k| k as f64 * 0.25).collect();
        let pop: Vec<f64> = delays.iter().map(|t| 0.5 * (1.0 + (TAU * f * t).cos())).collect();
        assert!((fringe_bound(&delays, &pop) - f).abs() < 1e-12);
        assert_eq!(fringe_bound(&delays, &vec![1.0; delays.len()]), 0.0);
    }

    #[test]
    fn idle_pulse_shrinks_edges() {
        let d = IdleDrive { target: "C".into(), frequency: 1.0, amplitude: 1.0, edge: 0.3 };
        let t = d.pulse(0.4).unwrap().envelope.unwrap();
        assert_eq!((t.rise, t.plateau, t.fall), (0.2, 0.0, 0.2));
        let t = d.pulse(2.0).unwrap().envelope.unwrap();
        assert!((t.duration() - 2.0).abs() < 1e-12);
        assert!(d.with_amplitude(0.0).pulse(2.0).is_none());
        assert!(d.pulse(0.0).is_none());
    }

    #[test]
    fn uncoupled_correlations_vanish() {
        let spec = table_s1().uncoupled();
        let drive = IdleDrive::at_operating_point(&spec, 0.0).unwrap();
        let delays: Vec<f64> = (0..20).map(|k| k as f64 * 0.5).collect();
        let t = simultaneous_ramsey(&spec, &drive, (mhz(-0.5), mhz(0.1)), &delays).unwrap();
        assert!(t.max_abs_czz() < 1e-6);
        for i in 0..delays.len() {
            assert!(t.sz1[i].abs() <= 1.0 + 1e-12 && t.sz2[i].abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn uncoupled_conditional_traces_agree() {
        let spec = table_s1().uncoupled();
        let sim = Simulator::new(&spec).unwrap();
        let drive = IdleDrive::at_operating_point(&spec, 0.0).unwrap();
        let phases: Vec<f64> = (0..12).map(|k| k as f64 * TAU / 12.0).collect();
        let g = conditional_ramsey(&sim, 0, false, 1, &drive, 5.0, &phases).unwrap();
        let e = conditional_ramsey(&sim, 0, true, 1, &drive, 5.0, &phases).unwrap();
        for (a, b) in g.population.iter().zip(&e.population) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn conditional_shift_matches_static_zz() {
        let spec = table_s1();
        let d = dispersive_summary(&spec).unwrap();
        let drive = IdleDrive::at_operating_point(&spec, 0.0).unwrap();
        let phases: Vec<f64> = (0..16).map(|k| k as f64 * TAU / 16.0).collect();
        for tau in [2.0, 5.0] {
            let set = frequency_shifts(&spec, &drive, &[0.0], tau, &phases).unwrap();
            assert!((set.chi_zz[0] - d.chi_zz_static).abs() < khz(0.5), "{}", to_khz(set.chi_zz[0]));
            assert!(set.shift_ge[0].abs() < khz(0.1) && set.shift_eg[0].abs() < khz(0.1));
        }
    }

    #[test]
    fn echo_at_zero_drive_gives_static_zz() {
        let spec = table_s1();
        let d = dispersive_summary(&spec).unwrap();
        let drive = IdleDrive::at_operating_point(&spec, 0.0).unwrap();
        let delays: Vec<f64> = (0..=30).map(|k| k as f64 * 0.5).collect();
        let t = echoed_zz_ramsey(&spec, &drive, &[0.0], &delays).unwrap();
        assert!((t[0].frequency_khz() - to_khz(d.chi_zz_static).abs()).abs() < 1.0, "{}", t[0].frequency_khz());
        assert!(!t[0].below_resolution);
    }
}
