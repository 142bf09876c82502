//! Pure-state time evolution under shaped coupler tones.
//!
//! States live in the dressed eigenbasis of the static Hamiltonian, in the
//! frame where every qubit rotates at its dressed frequency (plus an optional
//! detuning offset), each driven coupler at its tone frequency and each
//! undriven coupler at its dressed frequency. Qubit rotations are ideal and
//! instantaneous, acting on the 0/1 levels of the dressed qubit labels.

use serde::Serialize;

use crate::device::{DeviceSpec, DriveTone, ModeRole};
use crate::error::{Error, Result};
use crate::frame::{DrivenFrame, Tone};
use crate::linalg::{commutator, CMat, CVec, C64, I, ONE, ZERO};

/// Local error bound per accepted step (state-vector max norm).
pub const STEP_TOLERANCE: f64 = 1e-9;

/// Smallest step before the integrator gives up, us.
pub const MIN_STEP: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvelopeKind {
    FlatTopCosine,
    Square,
}

/// Pulse shape with unit peak; times in us.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub rise: f64,
    pub plateau: f64,
    pub fall: f64,
}

impl Envelope {
    pub fn cosine(rise: f64, plateau: f64, fall: f64) -> Self {
        Envelope { kind: EnvelopeKind::FlatTopCosine, rise, plateau, fall }
    }

    pub fn square(duration: f64) -> Self {
        Envelope { kind: EnvelopeKind::Square, rise: 0.0, plateau: duration, fall: 0.0 }
    }

    pub fn duration(&self) -> f64 {
        self.rise + self.plateau + self.fall
    }

    /// Relative amplitude at time `t` after the pulse start.
    pub fn value(&self, t: f64) -> f64 {
        let total = self.duration();
        if t < 0.0 || t > total {
            return 0.0;
        }
        match self.kind {
            EnvelopeKind::Square => 1.0,
            EnvelopeKind::FlatTopCosine => {
                if t < self.rise {
                    0.5 * (1.0 - (std::f64::consts::PI * t / self.rise).cos())
                } else if t <= self.rise + self.plateau {
                    1.0
                } else {
                    let s = total - t;
                    0.5 * (1.0 - (std::f64::consts::PI * s / self.fall).cos())
                }
            }
        }
    }

    /// Times (relative to pulse start) where the shape is not smooth.
    fn knots(&self) -> [f64; 4] {
        [0.0, self.rise, self.rise + self.plateau, self.duration()]
    }

    /// True when the amplitude is constant on (a, b), both relative to start.
    fn constant_on(&self, a: f64, b: f64) -> bool {
        let [t0, t1, t2, t3] = self.knots();
        b <= t0 || a >= t3 || self.kind == EnvelopeKind::Square || (a >= t1 && b <= t2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Axis {
    X,
    Y,
    Z,
    /// Equatorial axis cos(φ)·X + sin(φ)·Y.
    Phi(f64),
}

/// exp(−i angle σ_axis / 2) on a single qubit, rows/columns ordered (g, e).
pub fn rotation_2x2(axis: Axis, angle: f64) -> [[C64; 2]; 2] {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    let phi = match axis {
        Axis::X => 0.0,
        Axis::Y => std::f64::consts::FRAC_PI_2,
        Axis::Phi(p) => p,
        Axis::Z => return [[C64::new(c, -s), ZERO], [ZERO, C64::new(c, s)]],
    };
    // σ_φ = [[0, e^{−iφ}], [e^{iφ}, 0]]
    let off = |sign: f64| C64::new(0.0, -s) * C64::from_polar(1.0, sign * phi);
    [[C64::new(c, 0.0), off(-1.0)], [off(1.0), C64::new(c, 0.0)]]
}

/// Instantaneous rotation R_axis(angle) = exp(−i angle σ/2) on one qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QubitRotation {
    pub qubit: usize,
    pub axis: Axis,
    pub angle: f64,
    pub time: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledTone {
    pub tone: DriveTone,
    pub start: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct PulseSchedule {
    pub tones: Vec<ScheduledTone>,
    pub rotations: Vec<QubitRotation>,
    /// Qubit frame offsets (mode index, rad/us) added to the dressed frequency.
    pub detunings: Vec<(usize, f64)>,
    pub total: f64,
}

impl PulseSchedule {
    pub fn idle(total: f64) -> Self {
        PulseSchedule { total, ..Default::default() }
    }

    pub fn tone(mut self, tone: DriveTone, start: f64) -> Self {
        self.tones.push(ScheduledTone { tone, start });
        self
    }

    pub fn rotate(mut self, qubit: usize, axis: Axis, angle: f64, time: f64) -> Self {
        self.rotations.push(QubitRotation { qubit, axis, angle, time });
        self
    }

    pub fn detune(mut self, qubit: usize, offset: f64) -> Self {
        self.detunings.push((qubit, offset));
        self
    }

    fn validate(&self, spec: &DeviceSpec) -> Result<()> {
        let eps = 1e-12;
        if !(self.total >= 0.0) {
            return Err(Error::InvalidArgument("schedule duration must be non-negative".into()));
        }
        for st in &self.tones {
            let len = st.tone.envelope.map_or(f64::INFINITY, |e| e.duration());
            if st.start < -eps || (st.tone.envelope.is_some() && st.start + len > self.total + eps) {
                return Err(Error::InvalidArgument(format!("tone on {} extends past the schedule", st.tone.target)));
            }
        }
        for r in &self.rotations {
            if r.time < -eps || r.time > self.total + eps {
                return Err(Error::InvalidArgument(format!("rotation at {} us outside the schedule", r.time)));
            }
            if spec.modes.get(r.qubit).map(|m| m.role) != Some(ModeRole::Qubit) {
                return Err(Error::InvalidArgument(format!("rotation target {} is not a qubit", r.qubit)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    /// Dressed-state populations at each sample, indexed by eigen index.
    pub populations: Vec<Vec<f64>>,
    /// Dressed-label coupler occupation per sample, one entry per coupler.
    pub coupler_excitation: Vec<Vec<f64>>,
    pub final_state: CVec,
    pub max_norm_error: f64,
    pub steps: usize,
}

struct ActiveTone {
    tone: Tone,
    envelope: Option<crate::dynamics::Envelope>,
    start: f64,
}

impl ActiveTone {
    fn amplitude(&self, t: f64) -> f64 {
        match self.envelope {
            None => self.tone.amplitude,
            Some(e) => self.tone.amplitude * e.value(t - self.start),
        }
    }
}

struct Block {
    idx: Vec<usize>,
    diag: CMat,
    drives: Vec<CMat>,
}

/// Reusable evolution context for one device.
#[derive(Clone, Debug)]
pub struct Simulator {
    spec: DeviceSpec,
    frame: DrivenFrame,
    base_refs: Vec<f64>,
}

impl Simulator {
    pub fn new(spec: &DeviceSpec) -> Result<Self> {
        let frame = DrivenFrame::new(spec)?;
        Self::with_frame(spec, frame)
    }

    pub fn with_frame(spec: &DeviceSpec, frame: DrivenFrame) -> Result<Self> {
        let base_refs = (0..spec.modes.len())
            .map(|m| {
                let mut occ = vec![0; spec.modes.len()];
                let e0 = frame.spectrum().energy(&occ)?;
                occ[m] = 1;
                Ok(frame.spectrum().energy(&occ)? - e0)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(Simulator { spec: spec.clone(), frame, base_refs })
    }

    pub fn frame(&self) -> &DrivenFrame {
        &self.frame
    }

    pub fn spec(&self) -> &DeviceSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    /// Dressed basis state adiabatically connected to the bare `label`.
    pub fn basis_state(&self, label: &[usize]) -> Result<CVec> {
        let k = self.frame.spectrum().index_of(label)?;
        let mut v = CVec::zeros(self.dim());
        v[k] = ONE;
        Ok(v)
    }

    pub fn label_of(&self, k: usize) -> &[usize] {
        self.frame.spectrum().label_of(k)
    }

    /// Population of dressed state `label` in `state`.
    pub fn population(&self, state: &CVec, label: &[usize]) -> Result<f64> {
        Ok(state[self.frame.spectrum().index_of(label)?].norm_sqr())
    }

    /// Dressed-label occupation of `mode` in `state`.
    pub fn mode_occupation(&self, state: &CVec, mode: usize) -> f64 {
        (0..self.dim()).map(|k| state[k].norm_sqr() * self.label_of(k)[mode] as f64).sum()
    }

    /// Matrix of an ideal qubit rotation in the dressed basis. Levels above
    /// |1> of the target qubit are left untouched.
    pub fn rotation_matrix(&self, qubit: usize, axis: Axis, angle: f64) -> CMat {
        let u = rotation_2x2(axis, angle);
        let n = self.dim();
        let mut m = CMat::zeros(n, n);
        let spectrum = self.frame.spectrum();
        for k in 0..n {
            let label = spectrum.label_of(k);
            let level = label[qubit];
            if level > 1 {
                m[(k, k)] = ONE;
                continue;
            }
            for out in 0..2 {
                let mut l = label.to_vec();
                l[qubit] = out;
                let j = spectrum.index_of(&l).expect("qubit partner state exists");
                m[(j, k)] += u[out][level];
            }
        }
        m
    }

    /// Invariant subspaces of the drive: states that differ only in driven
    /// coupler levels.
    fn blocks(&self, tones: &[Tone], energies: &[f64], drives: &[CMat]) -> Vec<Block> {
        let driven: Vec<usize> = tones.iter().map(|t| t.coupler).collect();
        let mut keyed: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for k in 0..self.dim() {
            let key: Vec<usize> = self
                .label_of(k)
                .iter()
                .enumerate()
                .map(|(m, &n)| if driven.contains(&m) { 0 } else { n })
                .collect();
            match keyed.iter_mut().find(|(kk, _)| *kk == key) {
                Some((_, idx)) => idx.push(k),
                None => keyed.push((key, vec![k])),
            }
        }
        keyed
            .into_iter()
            .map(|(_, idx)| {
                let n = idx.len();
                let diag = CMat::from_fn(n, n, |i, j| if i == j { C64::new(energies[idx[i]], 0.0) } else { ZERO });
                let drives = drives.iter().map(|d| CMat::from_fn(n, n, |i, j| d[(idx[i], idx[j])])).collect();
                Block { idx, diag, drives }
            })
            .collect()
    }

    fn refs_for(&self, schedule: &PulseSchedule, tones: &[ActiveTone]) -> Vec<f64> {
        let mut refs = self.base_refs.clone();
        for &(q, off) in &schedule.detunings {
            refs[q] += off;
        }
        for t in tones {
            refs[t.tone.coupler] = t.tone.frequency;
        }
        refs
    }

    pub fn evolve(&self, schedule: &PulseSchedule, initial: &CVec) -> Result<EvolutionResult> {
        self.evolve_sampled(schedule, initial, &[])
    }

    /// Evolve and record observables at `samples` (us, within the schedule)
    /// plus the final time.
    pub fn evolve_sampled(&self, schedule: &PulseSchedule, initial: &CVec, samples: &[f64]) -> Result<EvolutionResult> {
        schedule.validate(&self.spec)?;
        if initial.len() != self.dim() {
            return Err(Error::InvalidArgument(format!("state has dimension {}, expected {}", initial.len(), self.dim())));
        }
        let norm0 = initial.norm();
        if (norm0 - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!("initial state norm {norm0} is not 1")));
        }
        let active: Vec<ActiveTone> = schedule
            .tones
            .iter()
            .map(|st| {
                let c = self.spec.mode_index(&st.tone.target)?;
                Ok(ActiveTone {
                    tone: Tone { coupler: c, frequency: st.tone.frequency, amplitude: st.tone.amplitude },
                    envelope: st.tone.envelope,
                    start: st.start,
                })
            })
            .collect::<Result<_>>()?;
        // pulses sharing a coupler are summed onto one frame tone
        let mut channels: Vec<(Tone, Vec<usize>)> = Vec::new();
        for (i, a) in active.iter().enumerate() {
            match channels.iter_mut().find(|(t, _)| t.coupler == a.tone.coupler) {
                Some((t, members)) => {
                    if (t.frequency - a.tone.frequency).abs() > 1e-12 {
                        return Err(Error::Frame(format!("two tone frequencies on coupler {}", t.coupler)));
                    }
                    members.push(i);
                }
                None => channels.push((Tone { amplitude: 1.0, ..a.tone }, vec![i])),
            }
        }
        let tones: Vec<Tone> = channels.iter().map(|(t, _)| *t).collect();
        let refs = self.refs_for(schedule, &active);
        let (diag, drives) = self.frame.split_hamiltonian(&tones, &refs)?;
        let energies: Vec<f64> = (0..self.dim()).map(|k| diag[(k, k)].re).collect();
        let blocks = self.blocks(&tones, &energies, &drives);
        let amps_at = |s: f64| -> Vec<f64> {
            channels.iter().map(|(_, members)| members.iter().map(|&i| active[i].amplitude(s)).sum()).collect()
        };

        // event times: knots, rotations, samples
        let mut events: Vec<f64> = vec![0.0, schedule.total];
        for a in &active {
            if let Some(e) = a.envelope {
                events.extend(e.knots().iter().map(|k| k + a.start));
            } else {
                events.push(a.start);
            }
        }
        events.extend(schedule.rotations.iter().map(|r| r.time));
        events.extend(samples.iter().copied());
        events.retain(|t| *t >= 0.0 && *t <= schedule.total);
        events.sort_by(f64::total_cmp);
        events.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let mut rotations = schedule.rotations.clone();
        rotations.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut next_rot = 0;
        let mut sample_idx: Vec<f64> = samples.to_vec();
        sample_idx.sort_by(f64::total_cmp);

        let mut psi = initial.clone();
        let mut result = EvolutionResult {
            times: Vec::new(),
            populations: Vec::new(),
            coupler_excitation: Vec::new(),
            final_state: CVec::zeros(0),
            max_norm_error: 0.0,
            steps: 0,
        };
        let couplers = self.spec.coupler_indices();
        let record = |psi: &CVec, t: f64, result: &mut EvolutionResult| {
            result.times.push(t);
            result.populations.push(psi.iter().map(|c| c.norm_sqr()).collect());
            result.coupler_excitation.push(couplers.iter().map(|&c| self.mode_occupation(psi, c)).collect());
            result.max_norm_error = result.max_norm_error.max((psi.norm() - 1.0).abs());
        };

        let mut si = 0;
        for (idx, &t) in events.iter().enumerate() {
            while next_rot < rotations.len() && (rotations[next_rot].time - t).abs() < 1e-12 {
                let r = rotations[next_rot];
                psi = self.rotation_matrix(r.qubit, r.axis, r.angle) * psi;
                next_rot += 1;
            }
            while si < sample_idx.len() && (sample_idx[si] - t).abs() < 1e-12 {
                record(&psi, t, &mut result);
                si += 1;
            }
            let Some(&t_next) = events.get(idx + 1) else { break };
            let constant = active.iter().all(|a| a.envelope.is_none_or(|e| e.constant_on(t - a.start, t_next - a.start)));
            let dt = t_next - t;
            let amps = amps_at(0.5 * (t + t_next));
            if constant && amps.iter().all(|a| *a == 0.0) {
                for (k, c) in psi.iter_mut().enumerate() {
                    *c *= C64::from_polar(1.0, -energies[k] * dt);
                }
                result.steps += 1;
                continue;
            }
            for block in &blocks {
                let mut sub = CVec::from_iterator(block.idx.len(), block.idx.iter().map(|&k| psi[k]));
                if sub.iter().all(|c| *c == ZERO) {
                    continue;
                }
                if constant {
                    let h = assemble(&block.diag, &block.drives, &amps);
                    sub = crate::linalg::expm_hermitian(&h, dt) * sub;
                    result.steps += 1;
                } else {
                    result.steps += magnus_adaptive(&block.diag, &block.drives, &amps_at, t, t_next, &mut sub)?;
                }
                for (j, &k) in block.idx.iter().enumerate() {
                    psi[k] = sub[j];
                }
            }
        }
        if result.times.last().is_none_or(|&last| (last - schedule.total).abs() > 1e-12) {
            record(&psi, schedule.total, &mut result);
        }
        result.final_state = psi;
        if result.max_norm_error > 1e-8 {
            return Err(Error::InvalidArgument(format!("norm drifted by {:.3e}", result.max_norm_error)));
        }
        Ok(result)
    }
}

fn assemble(diag: &CMat, drives: &[CMat], amps: &[f64]) -> CMat {
    let mut h = diag.clone();
    for (d, &a) in drives.iter().zip(amps) {
        if a != 0.0 {
            h += d * C64::new(a, 0.0);
        }
    }
    h
}

/// One fourth-order Magnus step from t over h.
fn magnus_step<F: Fn(f64) -> Vec<f64>>(diag: &CMat, drives: &[CMat], amps: &F, t: f64, h: f64, psi: &CVec) -> CVec {
    let r = 3f64.sqrt() / 6.0;
    let h1 = assemble(diag, drives, &amps(t + h * (0.5 - r)));
    let h2 = assemble(diag, drives, &amps(t + h * (0.5 + r)));
    let k = (&h1 + &h2) * C64::new(h / 2.0, 0.0) - commutator(&h2, &h1) * (I * (3f64.sqrt() / 12.0 * h * h));
    let k = (&k + k.adjoint()) * C64::new(0.5, 0.0);
    crate::linalg::expm_hermitian(&k, 1.0) * psi
}

fn magnus_adaptive<F: Fn(f64) -> Vec<f64>>(
    diag: &CMat,
    drives: &[CMat],
    amps: &F,
    t0: f64,
    t1: f64,
    psi: &mut CVec,
) -> Result<usize> {
    let mut t = t0;
    let mut h = (t1 - t0).min(0.01);
    let mut steps = 0;
    while t1 - t > 1e-13 {
        h = h.min(t1 - t);
        let full = magnus_step(diag, drives, amps, t, h, psi);
        let half = magnus_step(diag, drives, amps, t, h / 2.0, psi);
        let two = magnus_step(diag, drives, amps, t + h / 2.0, h / 2.0, &half);
        let err = (&two - &full).iter().map(|c| c.norm()).fold(0.0, f64::max) / 15.0;
        if err <= STEP_TOLERANCE {
            *psi = two;
            t += h;
            steps += 1;
            let grow = if err > 0.0 { 0.9 * (STEP_TOLERANCE / err).powf(0.2) } else { 2.0 };
            h *= grow.clamp(0.2, 2.0);
        } else {
            h *= (0.9 * (STEP_TOLERANCE / err).powf(0.2)).max(0.1);
            if h < MIN_STEP {
                return Err(Error::StepUnderflow { time_us: t, step_us: h });
            }
        }
    }
    Ok(steps)
}

/// Plateau durations averaged over by default: 1 to 3 us in 50 ns steps.
pub fn default_leakage_plateaus() -> Vec<f64> {
    (0..=40).map(|k| 1.0 + 0.05 * k as f64).collect()
}

/// Residual coupler excitation after a flat-top pulse, averaged over the four
/// computational states of the default pair and over `plateaus`, one entry
/// per edge duration.
pub fn coupler_leakage_vs_edges(
    spec: &DeviceSpec,
    tone: &DriveTone,
    plateaus: &[f64],
    edges: &[f64],
) -> Result<Vec<(f64, f64)>> {
    use rayon::prelude::*;
    if plateaus.is_empty() || plateaus.iter().chain(edges).any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidArgument("plateaus and edges must be non-negative and plateaus non-empty".into()));
    }
    let sim = Simulator::new(spec)?;
    let (q1, q2, c) = crate::spectrum::default_pair(spec)?;
    let labels = crate::frame::computational_labels(spec.modes.len(), q1, q2);
    let cells: Vec<(f64, f64)> = edges.iter().flat_map(|&e| plateaus.iter().map(move |&p| (e, p))).collect();
    let values = cells
        .par_iter()
        .map(|&(edge, plateau)| {
            let env = if edge == 0.0 { Envelope::square(plateau) } else { Envelope::cosine(edge, plateau, edge) };
            let pulse = DriveTone { envelope: Some(env), ..tone.clone() };
            let schedule = PulseSchedule::idle(env.duration()).tone(pulse, 0.0);
            let mut total = 0.0;
            for l in &labels {
                let out = sim.evolve(&schedule, &sim.basis_state(l)?)?;
                total += sim.mode_occupation(&out.final_state, c);
            }
            Ok(total / labels.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(edges
        .iter()
        .zip(values.chunks(plateaus.len()))
        .map(|(&e, v)| (e, v.iter().sum::<f64>() / v.len() as f64))
        .collect())
}

/// Time series as CSV: time, dressed-state populations for `labels`, coupler occupations.
pub fn time_series_csv(sim: &Simulator, result: &EvolutionResult, labels: &[Vec<usize>]) -> Result<String> {
    let spec = sim.spec();
    let mut header = vec!["time_us".to_string()];
    for l in labels {
        header.push(format!("p_{}", l.iter().map(|n| n.to_string()).collect::<String>()));
    }
    for c in spec.coupler_indices() {
        header.push(format!("n_{}", spec.modes[c].name));
    }
    let idx: Vec<usize> = labels.iter().map(|l| sim.frame().spectrum().index_of(l)).collect::<Result<_>>()?;
    let mut out = header.join(",") + "\n";
    for (s, &t) in result.times.iter().enumerate() {
        let mut row = vec![format!("{t:.6}")];
        row.extend(idx.iter().map(|&k| format!("{:.9}", result.populations[s][k])));
        row.extend(result.coupler_excitation[s].iter().map(|n| format!("{n:.9}")));
        out += &(row.join(",") + "\n");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cancel::operating_frequency;
    use crate::config::table_s1;
    use crate::spectrum::dispersive_summary;
    use crate::units::mhz;
    use std::f64::consts::PI;

    #[test]
    fn rotation_matrices() {
        let x = rotation_2x2(Axis::X, PI / 2.0);
        let px = rotation_2x2(Axis::Phi(0.0), PI / 2.0);
        let y = rotation_2x2(Axis::Y, PI);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((x[0][1] - C64::new(0.0, -s)).norm() < 1e-15 && x == px);
        // Y(π)|g> = |e>
        assert!((y[1][0] - ONE).norm() < 1e-15 && y[0][0].norm() < 1e-15);
    }

    #[test]
    fn envelope_shape() {
        let e = Envelope::cosine(0.3, 1.0, 0.2);
        assert_eq!(e.duration(), 1.5);
        assert_eq!(e.value(0.0), 0.0);
        assert!((e.value(0.15) - 0.5).abs() < 1e-12);
        assert_eq!(e.value(0.8), 1.0);
        assert!(e.value(1.5).abs() < 1e-12);
        assert!((e.value(1.4) - 0.5).abs() < 1e-12);
        // continuity at the knots
        for t in [0.3, 1.3] {
            assert!((e.value(t - 1e-9) - e.value(t + 1e-9)).abs() < 1e-6);
        }
        assert_eq!(Envelope::square(1.0).value(0.0), 1.0);
    }

    #[test]
    fn idle_keeps_populations() {
        let spec = table_s1();
        let sim = Simulator::new(&spec).unwrap();
        let mut psi = CVec::zeros(sim.dim());
        psi[sim.frame().spectrum().index_of(&[0, 0, 0]).unwrap()] = C64::new(0.6, 0.0);
        psi[sim.frame().spectrum().index_of(&[1, 1, 0]).unwrap()] = C64::new(0.0, 0.8);
        let out = sim.evolve_sampled(&PulseSchedule::idle(3.0), &psi, &[1.0, 2.0]).unwrap();
        for p in &out.populations {
            for k in 0..sim.dim() {
                assert!((p[k] - psi[k].norm_sqr()).abs() < 1e-12);
            }
        }
        assert_eq!(out.times, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn pi_pulse_flips_qubit() {
        let spec = table_s1();
        let sim = Simulator::new(&spec).unwrap();
        let s = PulseSchedule::idle(0.1).rotate(1, Axis::X, PI, 0.05);
        let out = sim.evolve(&s, &sim.basis_state(&[0, 0, 0]).unwrap()).unwrap();
        assert!(sim.population(&out.final_state, &[0, 1, 0]).unwrap() > 0.999);
    }

    #[test]
    fn conditional_phase_matches_static_zz() {
        let spec = table_s1();
        let sim = Simulator::new(&spec).unwrap();
        let d = dispersive_summary(&spec).unwrap();
        let tau = 5.0;
        let phase = |q1_excited: bool| {
            let mut s = PulseSchedule::idle(tau);
            if q1_excited {
                s = s.rotate(0, Axis::X, PI, 0.0);
            }
            s = s.rotate(1, Axis::Y, PI / 2.0, 0.0);
            let out = sim.evolve(&s, &sim.basis_state(&[0, 0, 0]).unwrap()).unwrap();
            let a = if q1_excited { [1, 0, 0] } else { [0, 0, 0] };
            let b = if q1_excited { [1, 1, 0] } else { [0, 1, 0] };
            let ia = sim.frame().spectrum().index_of(&a).unwrap();
            let ib = sim.frame().spectrum().index_of(&b).unwrap();
            (out.final_state[ib] / out.final_state[ia]).arg()
        };
        let dphi = phase(true) - phase(false);
        let wrapped = (dphi + PI).rem_euclid(2.0 * PI) - PI;
        let expect = -d.chi_zz_static * tau;
        let expect_wrapped = (expect + PI).rem_euclid(2.0 * PI) - PI;
        assert!((wrapped - expect_wrapped).abs() < 0.02 * expect.abs(), "{wrapped} vs {expect_wrapped}");
    }

    fn cancellation_tone(spec: &DeviceSpec, env: Envelope) -> DriveTone {
        let d = dispersive_summary(spec).unwrap();
        DriveTone { target: "C".into(), frequency: operating_frequency(&d), amplitude: mhz(0.66), envelope: Some(env) }
    }

    #[test]
    fn norm_preserved_and_time_reversal() {
        let spec = table_s1();
        let sim = Simulator::new(&spec).unwrap();
        let env = Envelope::cosine(0.2, 0.5, 0.35);
        let fwd = PulseSchedule::idle(1.2).tone(cancellation_tone(&spec, env), 0.1);
        let rev_env = Envelope::cosine(0.35, 0.5, 0.2);
        let rev = PulseSchedule::idle(1.2).tone(cancellation_tone(&spec, rev_env), 0.05);
        let mut psi0 = CVec::zeros(sim.dim());
        for (label, amp) in [([0, 0, 0], 0.5), ([1, 0, 0], 0.5), ([0, 1, 0], 0.5), ([1, 1, 0], 0.5)] {
            psi0[sim.frame().spectrum().index_of(&label).unwrap()] = C64::new(amp, 0.0);
        }
        let out = sim.evolve(&fwd, &psi0).unwrap();
        assert!(out.max_norm_error < 1e-8);
        let back = sim.evolve(&rev, &out.final_state.conjugate()).unwrap();
        let overlap = (psi0.conjugate().adjoint() * &back.final_state)[(0, 0)].norm_sqr();
        assert!(overlap > 1.0 - 1e-6, "{overlap}");
    }

    #[test]
    fn pulses_on_one_coupler_add() {
        let spec = table_s1();
        let sim = Simulator::new(&spec).unwrap();
        let env = Envelope::cosine(0.2, 0.3, 0.2);
        let tone = cancellation_tone(&spec, env);
        let doubled = DriveTone { amplitude: 2.0 * tone.amplitude, ..tone.clone() };
        let psi = sim.basis_state(&[1, 0, 0]).unwrap();
        let a = sim.evolve(&PulseSchedule::idle(0.8).tone(tone.clone(), 0.05).tone(tone, 0.05), &psi).unwrap();
        let b = sim.evolve(&PulseSchedule::idle(0.8).tone(doubled, 0.05), &psi).unwrap();
        assert!((&a.final_state - &b.final_state).norm() < 1e-7);
        let other = DriveTone { frequency: tone_freq_shift(&spec), ..cancellation_tone(&spec, env) };
        let clash = PulseSchedule::idle(0.8).tone(cancellation_tone(&spec, env), 0.0).tone(other, 0.0);
        assert!(sim.evolve(&clash, &psi).is_err());
    }

    fn tone_freq_shift(spec: &DeviceSpec) -> f64 {
        operating_frequency(&dispersive_summary(spec).unwrap()) + mhz(1.0)
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = table_s1();
        let sim = Simulator::new(&spec).unwrap();
        let psi = sim.basis_state(&[0, 0, 0]).unwrap();
        assert!(sim.evolve(&PulseSchedule::idle(1.0).rotate(2, Axis::X, PI, 0.5), &psi).is_err());
        assert!(sim.evolve(&PulseSchedule::idle(1.0), &(psi.clone() * C64::new(2.0, 0.0))).is_err());
        let long = cancellation_tone(&spec, Envelope::cosine(0.3, 1.0, 0.3));
        assert!(sim.evolve(&PulseSchedule::idle(1.0).tone(long, 0.0), &psi).is_err());
    }

    #[test]
    fn square_pulse_leaks_more_than_cosine() {
        let spec = table_s1();
        let tone = cancellation_tone(&spec, Envelope::square(1.0));
        let out = coupler_leakage_vs_edges(&spec, &tone, &default_leakage_plateaus(), &[0.0, 0.3]).unwrap();
        assert!(out[0].1 > out[1].1, "{out:?}");
        assert!(out[1].1 <= 0.01);
    }

    #[test]
    fn single_plateau_matches_direct_evolution() {
        let spec = table_s1();
        let tone = cancellation_tone(&spec, Envelope::square(1.0));
        let env = Envelope::cosine(0.1, 0.7, 0.1);
        let sim = Simulator::new(&spec).unwrap();
        let pulse = DriveTone { envelope: Some(env), ..tone.clone() };
        let schedule = PulseSchedule::idle(env.duration()).tone(pulse, 0.0);
        let direct: f64 = crate::frame::computational_labels(3, 0, 1)
            .iter()
            .map(|l| sim.mode_occupation(&sim.evolve(&schedule, &sim.basis_state(l).unwrap()).unwrap().final_state, 2))
            .sum::<f64>()
            / 4.0;
        let out = coupler_leakage_vs_edges(&spec, &tone, &[0.7], &[0.1]).unwrap();
        assert!((out[0].1 - direct).abs() < 1e-12);
        assert!(coupler_leakage_vs_edges(&spec, &tone, &[], &[0.1]).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let spec = table_s1();
        let sim = Simulator::new(&spec).unwrap();
        let out = sim.evolve_sampled(&PulseSchedule::idle(1.0), &sim.basis_state(&[0, 0, 0]).unwrap(), &[0.5]).unwrap();
        let csv = time_series_csv(&sim, &out, &[vec![0, 0, 0]]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "time_us,p_000,n_C");
        assert_eq!(lines.len(), 3);
    }
}
