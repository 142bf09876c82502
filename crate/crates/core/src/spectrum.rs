//! Labeled diagonalization and static dispersive quantities.

use std::collections::HashMap;

use serde::Serialize;

use crate::device::{build_static_hamiltonian, DeviceSpec, ModeRole};
use crate::error::{Error, Result};
use crate::linalg::{eigh, CMat};
use crate::qops::{Op, SpaceLayout};
use crate::units::{to_ghz, to_khz, to_mhz};

/// Eigendecomposition with every eigenvector tagged by the bare product state
/// it is adiabatically connected to in the dispersive regime.
#[derive(Clone, Debug)]
pub struct LabeledSpectrum {
    pub layout: SpaceLayout,
    /// rad/us, ascending
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMat,
    labels: HashMap<Vec<usize>, usize>,
    /// occupation tuple of each eigenvector
    eigen_labels: Vec<Vec<usize>>,
    /// squared overlap of each bare state (by basis index) with its eigenvector
    pub overlap_quality: Vec<f64>,
}

impl LabeledSpectrum {
    pub fn index_of(&self, occupations: &[usize]) -> Result<usize> {
        self.labels
            .get(occupations)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no eigenstate labeled {occupations:?}")))
    }

    /// Dressed energy of the state labeled `occupations`, rad/us.
    pub fn energy(&self, occupations: &[usize]) -> Result<f64> {
        Ok(self.eigenvalues[self.index_of(occupations)?])
    }

    pub fn label_of(&self, eigen_index: usize) -> &[usize] {
        &self.eigen_labels[eigen_index]
    }

    pub fn quality(&self, occupations: &[usize]) -> Result<f64> {
        Ok(self.overlap_quality[self.layout.basis_index(occupations)?])
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Label every eigenvector; collisions are errors for all states.
pub fn diagonalize_labeled(h: &Op, layout: &SpaceLayout) -> Result<LabeledSpectrum> {
    diagonalize_labeled_protected(h, layout, |_| true)
}

/// Greedy maximum-overlap labeling. Pairs (bare state, eigenvector) are taken
/// in order of descending overlap; a bare state in the `protect` set whose
/// best eigenvector was already claimed is a collision, as is a protected
/// label with overlap <= 0.5. Unprotected states take whatever is left.
pub fn diagonalize_labeled_protected(
    h: &Op,
    layout: &SpaceLayout,
    protect: impl Fn(&[usize]) -> bool,
) -> Result<LabeledSpectrum> {
    let n = layout.total_dim();
    if h.dim() != n {
        return Err(Error::InvalidArgument(format!("operator dim {} != layout dim {n}", h.dim())));
    }
    let eig = eigh(&h.matrix);
    let overlaps = CMat::map(&eig.vectors, |z| num_complex::Complex64::new(z.norm_sqr(), 0.0));
    let overlap = |i: usize, k: usize| overlaps[(i, k)].re;

    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for k in 0..n {
            pairs.push((i, k));
        }
    }
    pairs.sort_by(|a, b| overlap(b.0, b.1).total_cmp(&overlap(a.0, a.1)).then(a.cmp(b)));

    let mut bare_to_eigen = vec![usize::MAX; n];
    let mut eigen_to_bare = vec![usize::MAX; n];
    let mut assigned = 0;
    for &(i, k) in &pairs {
        if bare_to_eigen[i] != usize::MAX || eigen_to_bare[k] != usize::MAX {
            continue;
        }
        bare_to_eigen[i] = k;
        eigen_to_bare[k] = i;
        assigned += 1;
        if assigned == n {
            break;
        }
    }

    let occupations: Vec<Vec<usize>> = layout.states().collect();
    let mut labels = HashMap::with_capacity(n);
    let mut eigen_labels = vec![Vec::new(); n];
    let mut quality = vec![0.0; n];
    for i in 0..n {
        let k = bare_to_eigen[i];
        quality[i] = overlap(i, k);
        if protect(&occupations[i]) {
            let best = (0..n).max_by(|&a, &b| overlap(i, a).total_cmp(&overlap(i, b))).unwrap();
            if best != k && overlap(i, best) > overlap(i, k) {
                return Err(Error::LabelCollision {
                    first: occupations[eigen_to_bare[best]].clone(),
                    second: occupations[i].clone(),
                    eigen: best,
                });
            }
            if quality[i] <= 0.5 {
                return Err(Error::AmbiguousLabel { label: occupations[i].clone(), overlap: quality[i] });
            }
        }
        labels.insert(occupations[i].clone(), k);
        eigen_labels[k] = occupations[i].clone();
    }

    Ok(LabeledSpectrum {
        layout: layout.clone(),
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        labels,
        eigen_labels,
        overlap_quality: quality,
    })
}

/// Protected label set for device spectra: qubits in {g, e} and at most two
/// photons over all couplers.
pub fn computational_protect(spec: &DeviceSpec) -> impl Fn(&[usize]) -> bool + '_ {
    move |occ: &[usize]| {
        let mut photons = 0;
        for (&n, m) in occ.iter().zip(&spec.modes) {
            match m.role {
                ModeRole::Qubit if n > 1 => return false,
                ModeRole::Qubit => {}
                ModeRole::Coupler => photons += n,
            }
        }
        photons <= 2
    }
}

/// Labeled spectrum of the static Hamiltonian of `spec`.
pub fn static_spectrum(spec: &DeviceSpec) -> Result<LabeledSpectrum> {
    let h = build_static_hamiltonian(spec)?;
    diagonalize_labeled_protected(&h, &spec.layout(), computational_protect(spec))
}

/// Occupation tuple with the given qubits excited and everything else empty,
/// plus `coupler_n` photons in `coupler`.
pub fn occupation(spec: &DeviceSpec, excited: &[usize], coupler: Option<(usize, usize)>) -> Vec<usize> {
    let mut occ = vec![0; spec.modes.len()];
    for &q in excited {
        occ[q] = 1;
    }
    if let Some((c, n)) = coupler {
        occ[c] = n;
    }
    occ
}

/// Static dispersive quantities for a qubit pair sharing a coupler, all other
/// modes in their ground state. Internal units (rad/us).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersiveSummary {
    pub coupler_freq_gg: f64,
    pub coupler_freq_ge: f64,
    pub coupler_freq_eg: f64,
    pub coupler_freq_ee: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub chi_zz_static: f64,
    pub qubit_dressed_freqs: [f64; 2],
}

impl DispersiveSummary {
    pub fn report(&self) -> DispersiveReport {
        DispersiveReport {
            coupler_freq_gg_ghz: to_ghz(self.coupler_freq_gg),
            coupler_freq_ge_ghz: to_ghz(self.coupler_freq_ge),
            coupler_freq_eg_ghz: to_ghz(self.coupler_freq_eg),
            coupler_freq_ee_ghz: to_ghz(self.coupler_freq_ee),
            chi1_mhz: to_mhz(self.chi1),
            chi2_mhz: to_mhz(self.chi2),
            chi_zz_static_khz: to_khz(self.chi_zz_static),
            qubit1_dressed_ghz: to_ghz(self.qubit_dressed_freqs[0]),
            qubit2_dressed_ghz: to_ghz(self.qubit_dressed_freqs[1]),
        }
    }
}

/// [`DispersiveSummary`] in reporting units.
#[derive(Clone, Debug, Serialize)]
pub struct DispersiveReport {
    pub coupler_freq_gg_ghz: f64,
    pub coupler_freq_ge_ghz: f64,
    pub coupler_freq_eg_ghz: f64,
    pub coupler_freq_ee_ghz: f64,
    pub chi1_mhz: f64,
    pub chi2_mhz: f64,
    pub chi_zz_static_khz: f64,
    pub qubit1_dressed_ghz: f64,
    pub qubit2_dressed_ghz: f64,
}

/// The pair (first two qubits, first coupler) of a device.
pub fn default_pair(spec: &DeviceSpec) -> Result<(usize, usize, usize)> {
    let q = spec.qubit_indices();
    let c = spec.coupler_indices();
    if q.len() < 2 || c.is_empty() {
        return Err(Error::InvalidDevice("need two qubits and a coupler".into()));
    }
    Ok((q[0], q[1], c[0]))
}

pub fn dispersive_summary(spec: &DeviceSpec) -> Result<DispersiveSummary> {
    let (q1, q2, c) = default_pair(spec)?;
    let spectrum = static_spectrum(spec)?;
    pair_summary(spec, &spectrum, q1, q2, c)
}

/// Dispersive summary for qubits `q1`, `q2` and coupler `c` from an existing spectrum.
pub fn pair_summary(
    spec: &DeviceSpec,
    spectrum: &LabeledSpectrum,
    q1: usize,
    q2: usize,
    c: usize,
) -> Result<DispersiveSummary> {
    let e = |excited: &[usize], photons: usize| spectrum.energy(&occupation(spec, excited, Some((c, photons))));
    let coupler_freq = |excited: &[usize]| -> Result<f64> { Ok(e(excited, 1)? - e(excited, 0)?) };
    let gg = coupler_freq(&[])?;
    let ge = coupler_freq(&[q2])?;
    let eg = coupler_freq(&[q1])?;
    let ee = coupler_freq(&[q1, q2])?;
    let (e_gg, e_ge, e_eg, e_ee) = (e(&[], 0)?, e(&[q2], 0)?, e(&[q1], 0)?, e(&[q1, q2], 0)?);
    Ok(DispersiveSummary {
        coupler_freq_gg: gg,
        coupler_freq_ge: ge,
        coupler_freq_eg: eg,
        coupler_freq_ee: ee,
        chi1: eg - gg,
        chi2: ge - gg,
        chi_zz_static: e_gg + e_ee - e_ge - e_eg,
        qubit_dressed_freqs: [e_eg - e_gg, e_ge - e_gg],
    })
}

/// Inputs of the fourth-order static ZZ estimate (rad/us).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbativeInputs {
    pub delta_12: f64,
    pub delta_1c: f64,
    pub delta_2c: f64,
    pub sigma_1c: f64,
    pub sigma_2c: f64,
    pub g_eff: f64,
    pub v: f64,
}

impl PerturbativeInputs {
    pub fn new(spec: &DeviceSpec) -> Result<Self> {
        let q = spec.qubit_indices();
        let c = spec.coupler_indices();
        if q.len() != 2 || c.len() != 1 {
            return Err(Error::InvalidArgument("perturbative formula needs exactly two qubits and one coupler".into()));
        }
        let (m1, m2, mc) = (&spec.modes[q[0]], &spec.modes[q[1]], &spec.modes[c[0]]);
        let g = |a: &str, b: &str| spec.coupling(a, b).unwrap_or(0.0);
        let (g12, g1c, g2c) = (g(&m1.name, &m2.name), g(&m1.name, &mc.name), g(&m2.name, &mc.name));
        let delta_12 = m1.frequency - m2.frequency;
        let delta_1c = m1.frequency - mc.frequency;
        let delta_2c = m2.frequency - mc.frequency;
        let sigma_1c = m1.frequency + mc.frequency;
        let sigma_2c = m2.frequency + mc.frequency;
        let g_eff = g12 + g1c * g2c * (1.0 / delta_1c + 1.0 / delta_2c - 1.0 / sigma_1c - 1.0 / sigma_2c) / 2.0;
        let v = g1c * g2c / (2.0 * delta_1c * delta_2c);
        Ok(PerturbativeInputs { delta_12, delta_1c, delta_2c, sigma_1c, sigma_2c, g_eff, v })
    }
}

/// Smallest allowed |Δ12 + η1| and |Δ12 − η2|.
pub const RESONANCE_TOLERANCE: f64 = crate::units::RAD_PER_US_PER_MHZ;

/// Fourth-order perturbative static ZZ, rad/us.
pub fn perturbative_chi_zz(spec: &DeviceSpec) -> Result<f64> {
    let p = PerturbativeInputs::new(spec)?;
    let q = spec.qubit_indices();
    let c = spec.coupler_indices()[0];
    let (eta1, eta2, eta_c) = (spec.modes[q[0]].anharmonicity, spec.modes[q[1]].anharmonicity, spec.modes[c].anharmonicity);
    let d12 = p.delta_12;
    let left = d12 + eta1;
    let right = d12 - eta2;
    if left.abs() < RESONANCE_TOLERANCE {
        return Err(Error::ResonantDenominator { which: "Δ12 + η1", value_mhz: to_mhz(left) });
    }
    if right.abs() < RESONANCE_TOLERANCE {
        return Err(Error::ResonantDenominator { which: "Δ12 − η2", value_mhz: to_mhz(right) });
    }
    let denom = left * right;
    let g = p.g_eff;
    let v = p.v;
    let first = 2.0 * ((eta1 + eta2) * g * g - 2.0 * v * (2.0 * eta1 * eta2 + (eta1 - eta2) * d12) * g) / denom;
    let second = 2.0 * v * v * (4.0 * eta_c + (eta1 + eta2) * d12 * d12 / denom);
    Ok(first + second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::table_s1;
    use crate::device::CouplingForm;
    use crate::linalg::{real, ZERO};
    use crate::units::{khz, mhz};

    #[test]
    fn diagonal_hamiltonian_labels_identity() {
        let layout = SpaceLayout::from_levels(&[2, 3]).unwrap();
        let diag: Vec<f64> = vec![0.0, 5.0, 9.0, 2.0, 7.0, 11.0];
        let h = Op::hermitian(CMat::from_fn(6, 6, |i, j| if i == j { real(diag[i]) } else { ZERO }));
        let s = diagonalize_labeled(&h, &layout).unwrap();
        for (i, occ) in layout.states().enumerate() {
            assert!((s.energy(&occ).unwrap() - diag[i]).abs() < 1e-12);
            assert!((s.quality(&occ).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weakly_coupled_pair_keeps_ground_label() {
        let (g, delta) = (0.05, 1.0);
        let layout = SpaceLayout::from_levels(&[2]).unwrap();
        let h = Op::hermitian(CMat::from_row_slice(2, 2, &[ZERO, real(g), real(g), real(delta)]));
        let s = diagonalize_labeled(&h, &layout).unwrap();
        assert_eq!(s.index_of(&[0]).unwrap(), 0);
        // closed form: tan(2θ) = 2g/Δ, overlap cos²θ
        let theta = 0.5 * (2.0 * g / delta).atan();
        let expected = theta.cos().powi(2);
        assert!((s.quality(&[0]).unwrap() - expected).abs() < 1e-12);
        assert!((expected - (1.0 - g * g / (delta * delta))).abs() < 1e-4);
    }

    #[test]
    fn resonant_pair_is_ambiguous() {
        let layout = SpaceLayout::from_levels(&[2]).unwrap();
        let h = Op::hermitian(CMat::from_row_slice(2, 2, &[ZERO, real(1.0), real(1.0), ZERO]));
        assert!(matches!(diagonalize_labeled(&h, &layout), Err(Error::AmbiguousLabel { .. } | Error::LabelCollision { .. })));
    }

    #[test]
    fn table_s1_labels_are_clean() {
        let spec = table_s1();
        let s = static_spectrum(&spec).unwrap();
        for q1 in 0..2 {
            for q2 in 0..2 {
                let q = s.quality(&[q1, q2, 0]).unwrap();
                assert!(q > 0.9, "({q1},{q2},0): {q}");
            }
        }
        // the same assignment survives a larger truncation
        let big = spec.with_levels("C", 7).unwrap().with_levels("Q1", 4).unwrap();
        let sb = static_spectrum(&big).unwrap();
        for q1 in 0..2 {
            for q2 in 0..2 {
                for c in 0..2 {
                    let e = s.energy(&[q1, q2, c]).unwrap();
                    let eb = sb.energy(&[q1, q2, c]).unwrap();
                    assert!((e - eb).abs() < mhz(0.5), "({q1},{q2},{c})");
                }
            }
        }
    }

    #[test]
    fn eigenvalue_sum_is_trace() {
        let spec = table_s1();
        let h = build_static_hamiltonian(&spec).unwrap();
        let s = static_spectrum(&spec).unwrap();
        let sum: f64 = s.eigenvalues.iter().sum();
        let tr = h.trace().re;
        assert!(((sum - tr) / tr).abs() < 1e-8);
    }

    #[test]
    fn summary_identities_hold_exactly() {
        let d = dispersive_summary(&table_s1()).unwrap();
        assert_eq!(d.coupler_freq_eg - d.coupler_freq_gg, d.chi1);
        assert_eq!(d.coupler_freq_ge - d.coupler_freq_gg, d.chi2);
    }

    #[test]
    fn table_s1_dispersive_values() {
        let d = dispersive_summary(&table_s1()).unwrap().report();
        assert!((d.chi1_mhz / -6.79 - 1.0).abs() < 0.02, "{}", d.chi1_mhz);
        assert!((d.chi2_mhz / -4.80 - 1.0).abs() < 0.02, "{}", d.chi2_mhz);
        assert!((d.chi_zz_static_khz + 103.0).abs() < 5.0, "{}", d.chi_zz_static_khz);
    }

    #[test]
    fn uncoupled_device_has_no_dispersive_shifts() {
        for form in [CouplingForm::Exchange, CouplingForm::Full] {
            let mut spec = table_s1().uncoupled();
            spec.coupling_form = form;
            let d = dispersive_summary(&spec).unwrap();
            assert!(d.chi1.abs() < 1e-9);
            assert!(d.chi2.abs() < 1e-9);
            assert!(d.chi_zz_static.abs() < 1e-9);
        }
    }

    #[test]
    fn coupler_truncation_converges() {
        let spec = table_s1();
        let z5 = dispersive_summary(&spec).unwrap().chi_zz_static;
        let z7 = dispersive_summary(&spec.with_levels("C", 7).unwrap()).unwrap().chi_zz_static;
        assert!(to_khz(z5 - z7).abs() < 1.0);
    }

    #[test]
    fn qubit_relabeling_leaves_zz_unchanged() {
        let spec = table_s1();
        let swapped = spec.with_modes_swapped("Q1", "Q2").unwrap();
        let a = dispersive_summary(&spec).unwrap();
        let b = dispersive_summary(&swapped).unwrap();
        assert!(to_khz(a.chi_zz_static - b.chi_zz_static).abs() < 1e-6);
        assert!((a.chi1 - b.chi2).abs() < 1e-9);
    }

    #[test]
    fn perturbative_table_s1() {
        let spec = table_s1();
        let p = PerturbativeInputs::new(&spec).unwrap();
        assert!((to_mhz(p.g_eff) + 11.6).abs() < 0.2, "{}", to_mhz(p.g_eff));
        let zz = to_khz(perturbative_chi_zz(&spec).unwrap());
        assert!((zz + 101.3).abs() < 0.5, "{zz}");
    }

    #[test]
    fn perturbative_zero_coupling() {
        assert_eq!(perturbative_chi_zz(&table_s1().uncoupled()).unwrap(), 0.0);
    }

    #[test]
    fn perturbative_rejects_straddling_resonance() {
        let spec = table_s1();
        // put Δ12 = −η1 exactly
        let q2 = spec.mode("Q2").unwrap().frequency;
        let eta1 = spec.mode("Q1").unwrap().anharmonicity;
        let bad = spec.with_frequency("Q1", q2 - eta1).unwrap();
        assert!(matches!(perturbative_chi_zz(&bad), Err(Error::ResonantDenominator { .. })));
    }

    #[test]
    fn perturbative_tracks_diagonalization() {
        let spec = table_s1();
        let g2c = spec.coupling("Q2", "C").unwrap();
        for scale in [0.9, 0.95, 1.0, 1.05, 1.1] {
            let s = spec.with_coupling("Q2", "C", g2c * scale).unwrap();
            let exact = dispersive_summary(&s).unwrap().chi_zz_static;
            let approx = perturbative_chi_zz(&s).unwrap();
            assert!(((approx - exact) / exact).abs() < 0.15, "scale {scale}: {} vs {}", to_khz(approx), to_khz(exact));
        }
        let _ = khz(0.0);
    }
}
