//! Two-qubit state tomography with maximum-likelihood reconstruction and the
//! idle-gate tomography experiment.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::device::DeviceSpec;
use crate::dynamics::{rotation_2x2, Axis, PulseSchedule, Simulator};
use crate::error::{Error, Result};
use crate::experiments::IdleDrive;
use crate::linalg::{eigh, kron, CMat, CVec, C64, ONE, ZERO};
use crate::spectrum::default_pair;

pub const MLE_MAX_ITER: usize = 10_000;
pub const MLE_GRAD_TOL: f64 = 1e-10;

/// 4×4 density matrix over (gg, ge, eg, ee), first qubit most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(pub CMat);

#[derive(Serialize)]
struct DensityJson {
    basis: [&'static str; 4],
    real: Vec<Vec<f64>>,
    imag: Vec<Vec<f64>>,
}

impl DensityMatrix {
    pub fn from_pure(psi: &CVec) -> Self {
        DensityMatrix(psi * psi.adjoint())
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    /// Checks Hermiticity, unit trace and positivity within `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        let m = &self.0;
        crate::linalg::hermiticity_defect(m) <= tol
            && (m.trace().re - 1.0).abs() <= tol
            && m.trace().im.abs() <= tol
            && eigh(&((m + m.adjoint()) * C64::new(0.5, 0.0))).values[0] >= -tol
    }

    /// Phase of the |mn> amplitude relative to |gg>, from ρ_{mn,gg}.
    pub fn phase(&self, index: usize) -> f64 {
        self.0[(index, 0)].arg()
    }

    /// Δφ = φ_ee − φ_ge − φ_eg, wrapped to (−π, π].
    pub fn entangling_phase(&self) -> f64 {
        wrap(self.phase(3) - self.phase(1) - self.phase(2))
    }

    /// |Tr(ρ ρ_ideal)| against the product state that carries this matrix's
    /// own single-qubit phases and no conditional phase.
    pub fn local_corrected_fidelity(&self) -> f64 {
        let (a, b) = (self.phase(2), self.phase(1));
        let psi = CVec::from_vec(vec![
            C64::new(0.5, 0.0),
            C64::from_polar(0.5, b),
            C64::from_polar(0.5, a),
            C64::from_polar(0.5, a + b),
        ]);
        (psi.adjoint() * &self.0 * &psi)[(0, 0)].norm()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let m = &self.0;
        serde_json::to_value(DensityJson {
            basis: ["gg", "ge", "eg", "ee"],
            real: (0..4).map(|i| (0..4).map(|j| m[(i, j)].re).collect()).collect(),
            imag: (0..4).map(|i| (0..4).map(|j| m[(i, j)].im).collect()).collect(),
        })
        .expect("plain data serializes")
    }
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI { PI } else { y }
}

fn single(axis: Axis, angle: f64) -> CMat {
    let u = rotation_2x2(axis, angle);
    CMat::from_fn(2, 2, |i, j| u[i][j])
}

/// The 16 pre-rotations {I, X/2, Y/2, X}⊗2, first qubit slowest.
pub fn pre_rotations() -> Vec<CMat> {
    let set = [CMat::identity(2, 2), single(Axis::X, FRAC_PI_2), single(Axis::Y, FRAC_PI_2), single(Axis::X, PI)];
    let mut out = Vec::with_capacity(16);
    for a in &set {
        for b in &set {
            out.push(kron(a, b));
        }
    }
    out
}

/// Measurement operators E_k = U_k† |gg><gg| U_k.
pub fn measurement_operators() -> Vec<CMat> {
    let mut proj = CMat::zeros(4, 4);
    proj[(0, 0)] = ONE;
    pre_rotations().iter().map(|u| u.adjoint() * &proj * u).collect()
}

/// Noiseless ⟨M_k⟩ = Tr(E_k ρ) for the 16 settings.
pub fn expectations(rho: &DensityMatrix) -> Vec<f64> {
    measurement_operators().iter().map(|e| (e * &rho.0).trace().re).collect()
}

/// Replace each expectation by the mean of `shots` Bernoulli outcomes.
pub fn sample_shots(values: &[f64], shots: u64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    values
        .iter()
        .map(|&p| {
            let p = p.clamp(0.0, 1.0);
            (0..shots).filter(|_| rng.random::<f64>() < p).count() as f64 / shots as f64
        })
        .collect()
}

fn paulis() -> Vec<CMat> {
    let i = CMat::identity(2, 2);
    let x = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let y = CMat::from_row_slice(2, 2, &[ZERO, C64::new(0.0, -1.0), C64::new(0.0, 1.0), ZERO]);
    let z = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    let one = [i, x, y, z];
    let mut out = Vec::new();
    for a in &one {
        for b in &one {
            out.push(kron(a, b));
        }
    }
    out
}

/// Linear inversion of the 16 expectations (may be unphysical).
pub fn linear_inversion(values: &[f64]) -> Result<CMat> {
    let ops = measurement_operators();
    let ps = paulis();
    let a = DMatrix::from_fn(16, 16, |k, j| (&ops[k] * &ps[j]).trace().re / 4.0);
    let r = a
        .lu()
        .solve(&DVector::from_column_slice(values))
        .ok_or_else(|| Error::Fit("tomography settings are not informationally complete".into()))?;
    let mut rho = CMat::zeros(4, 4);
    for (j, p) in ps.iter().enumerate() {
        rho += p * C64::new(r[j] / 4.0, 0.0);
    }
    Ok((&rho + rho.adjoint()) * C64::new(0.5, 0.0))
}

/// Closest physical state in the eigenvalue sense: shift the spectrum to unit
/// trace and zero out negative weight, redistributing it over the rest.
pub fn project_physical(m: &CMat) -> CMat {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let e = eigh(&h);
    let n = e.values.len();
    let tr: f64 = e.values.iter().sum();
    let mut lam: Vec<f64> = e.values.iter().map(|v| v / if tr.abs() > 1e-12 { tr } else { 1.0 }).collect();
    // descending order for the redistribution sweep
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lam[b].total_cmp(&lam[a]));
    let mut acc = 0.0;
    let mut keep = n;
    for idx in (0..n).rev() {
        let k = order[idx];
        if lam[k] + acc / keep as f64 >= 0.0 {
            break;
        }
        acc += lam[k];
        lam[k] = 0.0;
        keep -= 1;
    }
    for &k in order.iter().take(keep) {
        lam[k] += acc / keep as f64;
    }
    let mut out = CMat::zeros(n, n);
    for k in 0..n {
        let v = e.vectors.column(k);
        out += v * v.adjoint() * C64::new(lam[k], 0.0);
    }
    out
}

#[derive(Clone, Debug)]
pub struct MleResult {
    pub rho: DensityMatrix,
    /// Gaussian log-likelihood −Σ w_k (p_k − m_k)² / 2.
    pub log_likelihood: f64,
    pub iterations: usize,
}

/// Lower-triangular L from 16 reals: 4 diagonal, then 6 (re, im) pairs.
fn unpack(theta: &[f64]) -> CMat {
    let mut l = CMat::zeros(4, 4);
    let mut k = 4;
    for i in 0..4 {
        l[(i, i)] = C64::new(theta[i], 0.0);
        for j in 0..i {
            l[(i, j)] = C64::new(theta[k], theta[k + 1]);
            k += 2;
        }
    }
    l
}

fn pack(l: &CMat) -> Vec<f64> {
    let mut theta = vec![0.0; 16];
    let mut k = 4;
    for i in 0..4 {
        theta[i] = l[(i, i)].re;
        for j in 0..i {
            theta[k] = l[(i, j)].re;
            theta[k + 1] = l[(i, j)].im;
            k += 2;
        }
    }
    theta
}

struct Objective {
    ops: Vec<CMat>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl Objective {
    fn eval(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let l = unpack(theta);
        let a = &l * l.adjoint();
        let t = a.trace().re;
        let mut cost = 0.0;
        let mut m = CMat::zeros(4, 4);
        for ((e, &v), &w) in self.ops.iter().zip(&self.values).zip(&self.weights) {
            let p = (e * &a).trace().re / t;
            let g = w * (p - v);
            cost += 0.5 * w * (p - v).powi(2);
            m += (e - CMat::identity(4, 4) * C64::new(p, 0.0)) * C64::new(g / t, 0.0);
        }
        // d cost = 2 Re Tr(L† M dL)
        let lm = l.adjoint() * &m;
        let mut grad = vec![0.0; 16];
        let mut k = 4;
        for i in 0..4 {
            grad[i] = 2.0 * lm[(i, i)].re;
            for j in 0..i {
                grad[k] = 2.0 * lm[(j, i)].re;
                grad[k + 1] = -2.0 * lm[(j, i)].im;
                k += 2;
            }
        }
        (cost, grad)
    }
}

/// Maximum-likelihood reconstruction from noiseless expectations.
pub fn tomography_mle(values: &[f64]) -> Result<MleResult> {
    tomography_mle_weighted(values, None)
}

/// With `shots`, residuals are weighted by the binomial variance.
pub fn tomography_mle_weighted(values: &[f64], shots: Option<u64>) -> Result<MleResult> {
    if values.len() != 16 {
        return Err(Error::InvalidArgument(format!("expected 16 expectation values, got {}", values.len())));
    }
    let weights = match shots {
        None => vec![1.0; 16],
        Some(n) => {
            let n = n as f64;
            values.iter().map(|&m| n / (m * (1.0 - m)).max(1.0 / n)).collect()
        }
    };
    let obj = Objective { ops: measurement_operators(), values: values.to_vec(), weights };

    let start = project_physical(&linear_inversion(values)?);
    let start = start * C64::new(0.999, 0.0) + CMat::identity(4, 4) * C64::new(0.001 / 4.0, 0.0);
    let chol = nalgebra::Cholesky::new(start).ok_or_else(|| Error::Fit("start point is not positive definite".into()))?;
    let mut theta = pack(&chol.l());

    // BFGS with Armijo backtracking
    let n = 16;
    let mut h = DMatrix::<f64>::identity(n, n);
    let (mut f, mut g) = obj.eval(&theta);
    let mut iterations = 0;
    let mut stalled = false;
    while iterations < MLE_MAX_ITER {
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm < MLE_GRAD_TOL || stalled {
            break;
        }
        iterations += 1;
        let gv = DVector::from_column_slice(&g);
        let mut dir = -(&h * &gv);
        if dir.dot(&gv) >= 0.0 {
            h = DMatrix::identity(n, n);
            dir = -gv.clone();
        }
        let mut step = 1.0;
        let slope = dir.dot(&gv);
        let (theta_new, f_new, g_new) = loop {
            let trial: Vec<f64> = theta.iter().zip(dir.iter()).map(|(t, d)| t + step * d).collect();
            let (ft, gt) = obj.eval(&trial);
            if ft.is_finite() && ft <= f + 1e-4 * step * slope {
                break (trial, ft, gt);
            }
            step *= 0.5;
            if step < 1e-20 {
                break (theta.clone(), f, g.clone());
            }
        };
        if step < 1e-20 || f - f_new <= f.abs() * 1e-16 {
            stalled = true;
        }
        let s = DVector::from_iterator(n, theta_new.iter().zip(&theta).map(|(a, b)| a - b));
        let y = DVector::from_iterator(n, g_new.iter().zip(&g).map(|(a, b)| a - b));
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - &s * y.transpose() * rho;
            let right = &i - &y * s.transpose() * rho;
            h = &left * &h * &right + &s * s.transpose() * rho;
        }
        theta = theta_new;
        f = f_new;
        g = g_new;
    }
    if iterations >= MLE_MAX_ITER {
        return Err(Error::MleNonConvergence { iterations });
    }
    let l = unpack(&theta);
    let a = &l * l.adjoint();
    let t = a.trace().re;
    let mut rho = a * C64::new(1.0 / t, 0.0);
    rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    Ok(MleResult { rho: DensityMatrix(rho), log_likelihood: -f, iterations })
}

/// Reduced qubit-pair density matrix of a dressed-basis state, traced over
/// all other labels and renormalized on the qubits' {0, 1} levels.
pub fn pair_density(sim: &Simulator, psi: &CVec, q1: usize, q2: usize) -> DensityMatrix {
    use std::collections::HashMap;
    let mut groups: HashMap<Vec<usize>, [C64; 4]> = HashMap::new();
    for k in 0..sim.dim() {
        let l = sim.label_of(k);
        if l[q1] > 1 || l[q2] > 1 {
            continue;
        }
        let mut rest = l.to_vec();
        rest[q1] = 0;
        rest[q2] = 0;
        groups.entry(rest).or_insert([ZERO; 4])[2 * l[q1] + l[q2]] = psi[k];
    }
    let mut rho = CMat::zeros(4, 4);
    for amps in groups.values() {
        let v = CVec::from_row_slice(amps);
        rho += &v * v.adjoint();
    }
    let t = rho.trace().re;
    DensityMatrix(rho * C64::new(1.0 / t, 0.0))
}

#[derive(Clone, Debug)]
pub struct TomographyPoint {
    pub tau: f64,
    pub fidelity: f64,
    pub entangling_phase: f64,
    pub rho: DensityMatrix,
}

/// Prepare (|g>+|e>)⊗(|g>+|e>)/2, idle τ with the drive pulse inside the
/// idle, reconstruct by MLE and compare with the local-phase-corrected ideal.
pub fn idle_tomography_suite(
    spec: &DeviceSpec,
    drive: &IdleDrive,
    delays: &[f64],
    shots: Option<(u64, u64)>,
) -> Result<Vec<TomographyPoint>> {
    let sim = Simulator::new(spec)?;
    idle_tomography_with(&sim, drive, delays, shots)
}

pub fn idle_tomography_with(
    sim: &Simulator,
    drive: &IdleDrive,
    delays: &[f64],
    shots: Option<(u64, u64)>,
) -> Result<Vec<TomographyPoint>> {
    let (q1, q2, _) = default_pair(sim.spec())?;
    let ground = sim.basis_state(&vec![0; sim.spec().modes.len()])?;
    delays
        .par_iter()
        .enumerate()
        .map(|(i, &tau)| {
            let mut s = PulseSchedule::idle(tau).rotate(q1, Axis::Y, FRAC_PI_2, 0.0).rotate(q2, Axis::Y, FRAC_PI_2, 0.0);
            if let Some(t) = drive.pulse(tau) {
                s = s.tone(t, 0.0);
            }
            let out = sim.evolve(&s, &ground)?;
            let actual = pair_density(sim, &out.final_state, q1, q2);
            let mut values = expectations(&actual);
            let mle = match shots {
                None => tomography_mle(&values)?,
                Some((n, seed)) => {
                    values = sample_shots(&values, n, seed.wrapping_add(i as u64));
                    tomography_mle_weighted(&values, Some(n))?
                }
            };
            Ok(TomographyPoint {
                tau,
                fidelity: mle.rho.local_corrected_fidelity(),
                entangling_phase: mle.rho.entangling_phase(),
                rho: mle.rho,
            })
        })
        .collect()
}

/// Random full-rank density matrix (Ginibre construction).
pub fn random_density(rng: &mut impl Rng) -> DensityMatrix {
    let g = CMat::from_fn(4, 4, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let a = &g * g.adjoint();
    let t = a.trace().re;
    DensityMatrix(a * C64::new(1.0 / t, 0.0))
}

/// |Tr(ρ σ)|
pub fn trace_overlap(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    (&a.0 * &b.0).trace().norm()
}

/// Uhlmann fidelity (Tr √(√ρ σ √ρ))², used to score reconstructions.
pub fn uhlmann_fidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let sqrt = |m: &CMat| {
        let e = eigh(m);
        let mut out = CMat::zeros(4, 4);
        for k in 0..4 {
            let v = e.vectors.column(k);
            out += v * v.adjoint() * C64::new(e.values[k].max(0.0).sqrt(), 0.0);
        }
        out
    };
    let s = sqrt(&a.0);
    let inner = &s * &b.0 * &s;
    let inner = (&inner + inner.adjoint()) * C64::new(0.5, 0.0);
    let e = eigh(&inner);
    e.values.iter().map(|v| v.max(0.0).sqrt()).sum::<f64>().powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bell() -> DensityMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        DensityMatrix::from_pure(&CVec::from_vec(vec![C64::new(s, 0.0), ZERO, ZERO, C64::new(s, 0.0)]))
    }

    #[test]
    fn ground_state_round_trip() {
        let gg = DensityMatrix::from_pure(&CVec::from_vec(vec![ONE, ZERO, ZERO, ZERO]));
        let r = tomography_mle(&expectations(&gg)).unwrap();
        assert!(uhlmann_fidelity(&r.rho, &gg) > 0.9999);
        assert!(r.rho.is_physical(1e-9));
    }

    #[test]
    fn bell_round_trip() {
        let r = tomography_mle(&expectations(&bell())).unwrap();
        assert!(uhlmann_fidelity(&r.rho, &bell()) > 0.999);
    }

    #[test]
    fn linear_inversion_is_exact_on_exact_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho = random_density(&mut rng);
        let lin = linear_inversion(&expectations(&rho)).unwrap();
        assert!(crate::linalg::max_abs(&(lin - &rho.0)) < 1e-12);
    }

    #[test]
    fn projection_is_physical() {
        let mut m = CMat::zeros(4, 4);
        for (i, v) in [0.7, 0.5, -0.1, -0.1].iter().enumerate() {
            m[(i, i)] = C64::new(*v, 0.0);
        }
        let p = DensityMatrix(project_physical(&m));
        assert!(p.is_physical(1e-12));
    }

    #[test]
    fn entangling_phase_gauge_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random_density(&mut rng);
        let z = kron(&single(Axis::Z, 0.7), &single(Axis::Z, -1.9));
        let rotated = DensityMatrix(&z * &rho.0 * z.adjoint());
        assert!((wrap(rho.entangling_phase() - rotated.entangling_phase())).abs() < 1e-9);
    }

    #[test]
    fn conditional_flip_fidelity() {
        // equal superposition with a π conditional phase: F = |<ideal|actual>|² = 1/4
        let v = CVec::from_vec(vec![C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(0.5, 0.0), C64::new(-0.5, 0.0)]);
        let rho = DensityMatrix::from_pure(&v);
        assert!((rho.local_corrected_fidelity() - 0.25).abs() < 1e-12);
        assert!((rho.entangling_phase().abs() - PI).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn mle_output_is_physical_under_noise(seed in 0u64..1000, shots in 50u64..2000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(&mut rng);
            let noisy = sample_shots(&expectations(&rho), shots, seed);
            let r = tomography_mle_weighted(&noisy, Some(shots)).unwrap();
            prop_assert!(r.rho.is_physical(1e-9));
        }
    }
}
