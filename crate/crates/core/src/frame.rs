//! Drive-rotating frame in the dressed eigenbasis of the static Hamiltonian.
//!
//! Each dressed state carries the label (n_1, ..., n_M) of the bare state it
//! connects to. The frame rotates mode m at a reference frequency r_m, so a
//! dressed level sits at E_k − Σ_m n_m r_m. A tone on coupler c is kept only
//! through its dressed matrix elements that raise the coupler label by one and
//! leave every other label unchanged; with r_c equal to the tone frequency
//! those terms are static. Everything else rotates at GHz rates and is dropped.
//!
//! Because kept terms never change non-driven labels, the Hamiltonian splits
//! into blocks labeled by the occupations of all non-driven modes.

use std::collections::HashMap;

use crate::device::{DeviceSpec, ModeRole};
use crate::error::{Error, Result};
use crate::linalg::{eigh, real, CMat, CVec, ZERO};
use crate::qops;
use crate::spectrum::{static_spectrum, LabeledSpectrum};
use crate::units::{mhz, to_mhz};

/// Largest amplitude increment used when following dressed states, rad/us.
pub const CONTINUATION_STEP: f64 = 0.05 * crate::units::RAD_PER_US_PER_MHZ;

/// Successive continuation steps must overlap by more than this, and so must
/// each followed state with its undriven origin. An exact 50/50 split (drive
/// on resonance) counts as a failure.
pub const CONTINUATION_OVERLAP: f64 = 0.5 + 1e-9;

/// A flat tone on a coupler, in internal units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tone {
    pub coupler: usize,
    pub frequency: f64,
    pub amplitude: f64,
}

/// Raising-part matrix elements of (a_c + a_c†) between dressed states.
#[derive(Clone, Debug)]
struct LadderElements {
    /// (upper eigen index, lower eigen index, <upper|a_c†|lower>)
    entries: Vec<(usize, usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct DrivenFrame {
    spectrum: LabeledSpectrum,
    roles: Vec<ModeRole>,
    ladders: HashMap<usize, LadderElements>,
}

/// Dressed states followed from zero drive to the target amplitudes.
#[derive(Clone, Debug)]
pub struct Tracked {
    /// Frame energies, rad/us, one per requested label.
    pub energies: Vec<f64>,
    /// Dressed-basis state vectors, full dimension.
    pub vectors: Vec<CVec>,
    /// Smallest step-to-step overlap met along the way.
    pub min_overlap: f64,
    pub steps: usize,
}

impl DrivenFrame {
    pub fn new(spec: &DeviceSpec) -> Result<Self> {
        Self::from_spectrum(spec, static_spectrum(spec)?)
    }

    pub fn from_spectrum(spec: &DeviceSpec, spectrum: LabeledSpectrum) -> Result<Self> {
        let layout = spec.layout();
        let mut ladders = HashMap::new();
        for c in spec.coupler_indices() {
            let a = qops::annihilation(&layout, c)?;
            let x = &a.matrix + a.matrix.adjoint();
            let xv = &x * &spectrum.eigenvectors;
            let mut entries = Vec::new();
            for lower in 0..spectrum.dim() {
                let label = spectrum.label_of(lower);
                if label[c] + 1 >= layout.dims()[c].levels() {
                    continue;
                }
                let mut up_label = label.to_vec();
                up_label[c] += 1;
                let upper = spectrum.index_of(&up_label)?;
                let v_up = spectrum.eigenvectors.column(upper);
                let elem = v_up.adjoint() * xv.column(lower);
                entries.push((upper, lower, elem[(0, 0)].re));
            }
            ladders.insert(c, LadderElements { entries });
        }
        Ok(DrivenFrame { spectrum, roles: spec.modes.iter().map(|m| m.role).collect(), ladders })
    }

    pub fn spectrum(&self) -> &LabeledSpectrum {
        &self.spectrum
    }

    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    fn check_tones(&self, tones: &[Tone]) -> Result<()> {
        for (i, t) in tones.iter().enumerate() {
            if !self.ladders.contains_key(&t.coupler) {
                return Err(Error::InvalidArgument(format!("mode {} is not a coupler", t.coupler)));
            }
            if tones[..i].iter().any(|o| o.coupler == t.coupler) {
                return Err(Error::Frame(format!("two tones on coupler {}", t.coupler)));
            }
        }
        Ok(())
    }

    /// Eigen indices sharing the non-driven labels of `label`.
    pub fn block_of(&self, label: &[usize], tones: &[Tone]) -> Vec<usize> {
        let key = |l: &[usize]| -> Vec<usize> {
            l.iter()
                .enumerate()
                .map(|(m, &n)| if tones.iter().any(|t| t.coupler == m) { 0 } else { n })
                .collect()
        };
        let target = key(label);
        (0..self.dim()).filter(|&k| key(self.spectrum.label_of(k)) == target).collect()
    }

    /// Frame energy of dressed state `k` with per-mode reference frequencies.
    pub fn frame_energy(&self, k: usize, refs: &[f64]) -> f64 {
        let label = self.spectrum.label_of(k);
        self.spectrum.eigenvalues[k] - label.iter().zip(refs).map(|(&n, &r)| n as f64 * r).sum::<f64>()
    }

    /// Reference frequencies with driven couplers at their tone frequency and
    /// all other modes at zero.
    pub fn tone_refs(&self, tones: &[Tone]) -> Vec<f64> {
        let mut refs = vec![0.0; self.roles.len()];
        for t in tones {
            refs[t.coupler] = t.frequency;
        }
        refs
    }

    /// Frame Hamiltonian restricted to `block` (eigen indices), in that order.
    pub fn block_hamiltonian(&self, block: &[usize], tones: &[Tone], refs: &[f64]) -> CMat {
        let pos: HashMap<usize, usize> = block.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let n = block.len();
        let mut h = CMat::zeros(n, n);
        for (i, &k) in block.iter().enumerate() {
            h[(i, i)] = real(self.frame_energy(k, refs));
        }
        for t in tones {
            for &(up, low, x) in &self.ladders[&t.coupler].entries {
                if let (Some(&i), Some(&j)) = (pos.get(&up), pos.get(&low)) {
                    let v = real(0.5 * t.amplitude * x);
                    h[(i, j)] += v;
                    h[(j, i)] += v;
                }
            }
        }
        h
    }

    /// Full-dimension frame Hamiltonian in the dressed basis.
    pub fn hamiltonian(&self, tones: &[Tone], refs: &[f64]) -> Result<CMat> {
        self.check_tones(tones)?;
        let mut refs = refs.to_vec();
        for t in tones {
            refs[t.coupler] = t.frequency;
        }
        let all: Vec<usize> = (0..self.dim()).collect();
        Ok(self.block_hamiltonian(&all, tones, &refs))
    }

    /// Static diagonal part and per-tone drive operators (unit amplitude, i.e.
    /// the matrix multiplying Ω_t) of the full frame Hamiltonian.
    pub fn split_hamiltonian(&self, tones: &[Tone], refs: &[f64]) -> Result<(CMat, Vec<CMat>)> {
        self.check_tones(tones)?;
        let mut refs = refs.to_vec();
        for t in tones {
            refs[t.coupler] = t.frequency;
        }
        let n = self.dim();
        let diag = CMat::from_fn(n, n, |i, j| if i == j { real(self.frame_energy(i, &refs)) } else { ZERO });
        let drives = tones
            .iter()
            .map(|t| {
                let mut d = CMat::zeros(n, n);
                for &(up, low, x) in &self.ladders[&t.coupler].entries {
                    d[(up, low)] += real(0.5 * x);
                    d[(low, up)] += real(0.5 * x);
                }
                d
            })
            .collect();
        Ok((diag, drives))
    }

    /// Follow the dressed states labeled `labels` from zero amplitude to the
    /// tone amplitudes, in steps no larger than [`CONTINUATION_STEP`] per tone.
    pub fn track(&self, labels: &[Vec<usize>], tones: &[Tone]) -> Result<Tracked> {
        self.check_tones(tones)?;
        let refs = self.tone_refs(tones);
        let max_amp = tones.iter().map(|t| t.amplitude.abs()).fold(0.0, f64::max);
        let steps = (max_amp / CONTINUATION_STEP).ceil().max(0.0) as usize;

        // group requested labels by block
        let mut blocks: Vec<(Vec<usize>, Vec<(usize, usize)>)> = Vec::new();
        for (slot, label) in labels.iter().enumerate() {
            let k = self.spectrum.index_of(label)?;
            let block = self.block_of(label, tones);
            let local = block.iter().position(|&b| b == k).expect("state in own block");
            match blocks.iter_mut().find(|(b, _)| *b == block) {
                Some((_, members)) => members.push((slot, local)),
                None => blocks.push((block, vec![(slot, local)])),
            }
        }

        let mut energies = vec![0.0; labels.len()];
        let mut vectors = vec![CVec::zeros(self.dim()); labels.len()];
        let mut min_overlap: f64 = 1.0;
        for (block, members) in &blocks {
            let n = block.len();
            let mut current: Vec<CVec> = members
                .iter()
                .map(|&(_, local)| CVec::from_fn(n, |i, _| if i == local { real(1.0) } else { ZERO }))
                .collect();
            let mut current_e: Vec<f64> =
                members.iter().map(|&(_, local)| self.frame_energy(block[local], &refs)).collect();
            for step in 1..=steps {
                let frac = step as f64 / steps as f64;
                let scaled: Vec<Tone> = tones.iter().map(|t| Tone { amplitude: t.amplitude * frac, ..*t }).collect();
                let h = self.block_hamiltonian(block, &scaled, &refs);
                let eig = eigh(&h);
                let mut taken = vec![false; n];
                for (m, prev) in current.iter_mut().enumerate() {
                    let (best, ov) = (0..n)
                        .map(|j| (j, (eig.vectors.column(j).adjoint() * &*prev)[(0, 0)].norm_sqr()))
                        .max_by(|a, b| a.1.total_cmp(&b.1))
                        .unwrap();
                    min_overlap = min_overlap.min(ov);
                    if ov <= CONTINUATION_OVERLAP || taken[best] {
                        return Err(Error::Continuation { amplitude_mhz: to_mhz(max_amp * frac), overlap: ov });
                    }
                    taken[best] = true;
                    let mut v: CVec = eig.vectors.column(best).into_owned();
                    // fix the gauge against the previous step
                    let phase = (v.adjoint() * &*prev)[(0, 0)];
                    if phase.norm() > 0.0 {
                        v *= phase / phase.norm();
                    }
                    // the state must still be mostly the undriven one it started from
                    let local = members[m].1;
                    let own = v[local].norm_sqr();
                    if own <= CONTINUATION_OVERLAP {
                        return Err(Error::Continuation { amplitude_mhz: to_mhz(max_amp * frac), overlap: own });
                    }
                    *prev = v;
                    current_e[m] = eig.values[best];
                }
            }
            for (m, &(slot, _)) in members.iter().enumerate() {
                energies[slot] = current_e[m];
                let mut full = CVec::zeros(self.dim());
                for (i, &k) in block.iter().enumerate() {
                    full[k] = current[m][i];
                }
                vectors[slot] = full;
            }
        }
        Ok(Tracked { energies, vectors, min_overlap, steps })
    }

    /// Net ZZ between qubits `q1`, `q2` (other modes in ground), rad/us.
    pub fn chi_zz(&self, q1: usize, q2: usize, tones: &[Tone]) -> Result<f64> {
        let e = self.track(&computational_labels(self.roles.len(), q1, q2), tones)?.energies;
        Ok(e[0] + e[3] - e[1] - e[2])
    }

    /// Dressed coupler 0-1 frequency with qubits `excited` (others ground), rad/us.
    pub fn coupler_frequency(&self, coupler: usize, excited: &[usize]) -> Result<f64> {
        let mut occ = vec![0; self.roles.len()];
        for &q in excited {
            occ[q] = 1;
        }
        let e0 = self.spectrum.energy(&occ)?;
        occ[coupler] = 1;
        Ok(self.spectrum.energy(&occ)? - e0)
    }

    /// Dressed 0-1 frequency of a qubit with every other mode in ground, rad/us.
    pub fn qubit_frequency(&self, qubit: usize) -> Result<f64> {
        let mut occ = vec![0; self.roles.len()];
        let e0 = self.spectrum.energy(&occ)?;
        occ[qubit] = 1;
        Ok(self.spectrum.energy(&occ)? - e0)
    }

    /// <label + e_c| (a_c + a_c†) |label> in the dressed basis.
    pub fn ladder_element(&self, coupler: usize, label: &[usize]) -> Result<f64> {
        let lower = self.spectrum.index_of(label)?;
        let ladder = self.ladders.get(&coupler).ok_or_else(|| Error::InvalidArgument(format!("mode {coupler} is not a coupler")))?;
        ladder
            .entries
            .iter()
            .find(|e| e.1 == lower)
            .map(|e| e.2)
            .ok_or_else(|| Error::InvalidArgument(format!("no coupler level above {label:?}")))
    }

    pub fn roles(&self) -> &[ModeRole] {
        &self.roles
    }
}

/// Labels |gg0>, |ge0>, |eg0>, |ee0> for the pair (q1, q2) in an M-mode device.
pub fn computational_labels(modes: usize, q1: usize, q2: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(4);
    for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let mut occ = vec![0; modes];
        occ[q1] = a;
        occ[q2] = b;
        out.push(occ);
    }
    out
}

/// Convenience for tests and examples: a tone with MHz amplitude.
pub fn tone_mhz(coupler: usize, frequency: f64, amplitude_mhz: f64) -> Tone {
    Tone { coupler, frequency, amplitude: mhz(amplitude_mhz) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::table_s1;
    use crate::device::{build_drive_rotating_hamiltonian, CouplingForm, DriveTone};
    use crate::spectrum::{diagonalize_labeled, dispersive_summary};
    use crate::units::to_khz;

    #[test]
    fn zero_drive_reproduces_static_zz() {
        let spec = table_s1();
        let frame = DrivenFrame::new(&spec).unwrap();
        let d = dispersive_summary(&spec).unwrap();
        let wd = 0.5 * (d.coupler_freq_ee + d.coupler_freq_eg);
        let zz = frame.chi_zz(0, 1, &[Tone { coupler: 2, frequency: wd, amplitude: 0.0 }]).unwrap();
        assert!((zz - d.chi_zz_static).abs() < 1e-9);
    }

    #[test]
    fn blocks_follow_qubit_labels() {
        let spec = table_s1();
        let frame = DrivenFrame::new(&spec).unwrap();
        let tones = [Tone { coupler: 2, frequency: 1.0, amplitude: 1.0 }];
        let block = frame.block_of(&[1, 0, 0], &tones);
        assert_eq!(block.len(), 5);
        for k in block {
            let l = frame.spectrum().label_of(k);
            assert_eq!(&l[..2], &[1, 0]);
        }
    }

    #[test]
    fn matches_bare_common_frame_for_exchange_coupling() {
        // Independent route: continuation on the literal H0 − ω_d N + (Ω/2)(a_c + a_c†)
        let mut spec = table_s1();
        spec.coupling_form = CouplingForm::Exchange;
        let frame = DrivenFrame::new(&spec).unwrap();
        let d = dispersive_summary(&spec).unwrap();
        let wd = 0.5 * (d.coupler_freq_ee + d.coupler_freq_eg);
        let amp = mhz(0.6);
        let ours = frame.chi_zz(0, 1, &[Tone { coupler: 2, frequency: wd, amplitude: amp }]).unwrap();

        let labels = computational_labels(3, 0, 1);
        let h_at = |a: f64| build_drive_rotating_hamiltonian(&spec, &DriveTone::flat("C", wd, a)).unwrap();
        let start = diagonalize_labeled(&h_at(0.0), &spec.layout()).unwrap();
        let mut vecs: Vec<CVec> =
            labels.iter().map(|l| start.eigenvectors.column(start.index_of(l).unwrap()).into_owned()).collect();
        let mut energies = vec![0.0; 4];
        let steps = 40;
        for s in 1..=steps {
            let eig = eigh(&h_at(amp * s as f64 / steps as f64).matrix);
            for (m, v) in vecs.iter_mut().enumerate() {
                let best = (0..eig.values.len())
                    .max_by(|&a, &b| {
                        let oa = (eig.vectors.column(a).adjoint() * &*v)[(0, 0)].norm_sqr();
                        let ob = (eig.vectors.column(b).adjoint() * &*v)[(0, 0)].norm_sqr();
                        oa.total_cmp(&ob)
                    })
                    .unwrap();
                *v = eig.vectors.column(best).into_owned();
                energies[m] = eig.values[best];
            }
        }
        let bare = energies[0] + energies[3] - energies[1] - energies[2];
        assert!(to_khz(ours - bare).abs() < 0.05, "{} vs {}", to_khz(ours), to_khz(bare));
    }

    #[test]
    fn rejects_duplicate_tones() {
        let frame = DrivenFrame::new(&table_s1()).unwrap();
        let t = Tone { coupler: 2, frequency: 1.0, amplitude: 0.1 };
        assert!(frame.chi_zz(0, 1, &[t, t]).is_err());
        let bad = Tone { coupler: 0, ..t };
        assert!(frame.chi_zz(0, 1, &[bad]).is_err());
    }

    #[test]
    fn continuation_fails_on_resonance() {
        let spec = table_s1();
        let frame = DrivenFrame::new(&spec).unwrap();
        let wc_eg = frame.coupler_frequency(2, &[0]).unwrap();
        let res = frame.chi_zz(0, 1, &[Tone { coupler: 2, frequency: wc_eg, amplitude: mhz(1.0) }]);
        assert!(matches!(res, Err(Error::Continuation { .. })), "{res:?}");
    }
}
