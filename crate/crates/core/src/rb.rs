//! Simultaneous single-qubit Clifford randomized benchmarking of a two-qubit
//! idle. Cliffords are ideal and instantaneous; the idle is a 4×4
//! density-matrix channel made of a coherent ZZ phase followed by amplitude
//! damping and pure dephasing on each qubit.
//!
//! Two-qubit basis order is |gg>, |ge>, |eg>, |ee> with the first qubit as
//! the left tensor factor.

use nalgebra::{Matrix2, Matrix4, SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::device::Coherence;
use crate::error::{Error, Result};
use crate::fit::{fit_decay, fit_proportional, DecayFit, LineFit};
use crate::linalg::{C64, I, ONE, ZERO};

pub type M2 = Matrix2<C64>;
pub type M4 = Matrix4<C64>;
type Superop = SMatrix<C64, 16, 16>;
type VecRho = SVector<C64, 16>;

pub const DEFAULT_RANDOMIZATIONS: usize = 80;

/// Largest allowed deviation of Σ K†K from the identity.
pub const CPTP_TOLERANCE: f64 = 1e-10;

/// Physical and virtual single-qubit gates of the Clifford decompositions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Gate {
    I,
    X,
    MinusX,
    Y,
    MinusY,
    X2,
    MinusX2,
    Y2,
    MinusY2,
    Z,
    MinusZ,
    Z2,
    MinusZ2,
}

impl Gate {
    pub fn label(self) -> &'static str {
        match self {
            Gate::I => "I",
            Gate::X => "X",
            Gate::MinusX => "-X",
            Gate::Y => "Y",
            Gate::MinusY => "-Y",
            Gate::X2 => "X/2",
            Gate::MinusX2 => "-X/2",
            Gate::Y2 => "Y/2",
            Gate::MinusY2 => "-Y/2",
            Gate::Z => "Z",
            Gate::MinusZ => "-Z",
            Gate::Z2 => "Z/2",
            Gate::MinusZ2 => "-Z/2",
        }
    }

    /// Z rotations are frame updates and take no time.
    pub fn is_virtual(self) -> bool {
        matches!(self, Gate::Z | Gate::MinusZ | Gate::Z2 | Gate::MinusZ2)
    }

    /// exp(-iθσ/2)
    pub fn unitary(self) -> M2 {
        use std::f64::consts::{FRAC_PI_2, PI};
        let (axis, angle) = match self {
            Gate::I => return M2::identity(),
            Gate::X => ('x', PI),
            Gate::MinusX => ('x', -PI),
            Gate::Y => ('y', PI),
            Gate::MinusY => ('y', -PI),
            Gate::X2 => ('x', FRAC_PI_2),
            Gate::MinusX2 => ('x', -FRAC_PI_2),
            Gate::Y2 => ('y', FRAC_PI_2),
            Gate::MinusY2 => ('y', -FRAC_PI_2),
            Gate::Z => ('z', PI),
            Gate::MinusZ => ('z', -PI),
            Gate::Z2 => ('z', FRAC_PI_2),
            Gate::MinusZ2 => ('z', -FRAC_PI_2),
        };
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let c = C64::new(c, 0.0);
        match axis {
            'x' => M2::new(c, -I * s, -I * s, c),
            'y' => M2::new(c, C64::new(-s, 0.0), C64::new(s, 0.0), c),
            _ => M2::new(C64::from_polar(1.0, -angle / 2.0), ZERO, ZERO, C64::from_polar(1.0, angle / 2.0)),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CliffordGate {
    pub id: usize,
    /// In time order.
    pub gates: Vec<Gate>,
    #[serde(skip)]
    pub unitary: M2,
}

const DECOMPOSITIONS: [&[Gate]; 24] = {
    use Gate::*;
    [
        // Paulis
        &[I],
        &[X],
        &[Y],
        &[Z, I],
        // 2π/3 rotations
        &[Y2, MinusZ2],
        &[MinusY2, Z2],
        &[Y2, Z2],
        &[MinusY2, MinusZ2],
        &[X2, MinusZ2],
        &[MinusX2, Z2],
        &[X2, Z2],
        &[MinusX2, MinusZ2],
        // π/2 rotations
        &[X2],
        &[MinusX2],
        &[Y2],
        &[MinusY2],
        &[Z2, I],
        &[MinusZ2, I],
        // Hadamard-like
        &[Y2, MinusZ],
        &[MinusY2, Z],
        &[X2, Z],
        &[MinusX2, MinusZ],
        &[MinusX, Z2],
        &[MinusZ2, MinusY],
    ]
};

/// The 24 single-qubit Cliffords; each unitary is the time-ordered product
/// of its gates.
pub fn clifford_table() -> Vec<CliffordGate> {
    DECOMPOSITIONS
        .iter()
        .enumerate()
        .map(|(id, gates)| {
            let unitary = gates.iter().fold(M2::identity(), |u, g| g.unitary() * u);
            CliffordGate { id, gates: gates.to_vec(), unitary }
        })
        .collect()
}

/// 1 − |tr(a†b)|/2; zero iff a and b agree up to a global phase.
pub fn phase_distance(a: &M2, b: &M2) -> f64 {
    1.0 - (a.adjoint() * b).trace().norm() / 2.0
}

/// Clifford table with its multiplication and inverse tables.
#[derive(Clone, Debug)]
pub struct CliffordGroup {
    pub gates: Vec<CliffordGate>,
    /// `product[i][j]` is the element equal to U_i·U_j.
    product: Vec<[usize; 24]>,
    inverse: [usize; 24],
}

impl CliffordGroup {
    pub fn new() -> Result<Self> {
        let gates = clifford_table();
        let find = |u: &M2| gates.iter().position(|g| phase_distance(&g.unitary, u) < 1e-9);
        let mut product = vec![[0; 24]; 24];
        for i in 0..24 {
            for j in 0..24 {
                product[i][j] = find(&(gates[i].unitary * gates[j].unitary))
                    .ok_or_else(|| Error::InvalidArgument(format!("Clifford table not closed at ({i}, {j})")))?;
            }
        }
        let mut inverse = [0; 24];
        for i in 0..24 {
            inverse[i] = (0..24).find(|&j| product[i][j] == 0).expect("closed group has inverses");
        }
        Ok(CliffordGroup { gates, product, inverse })
    }

    pub fn compose(&self, later: usize, earlier: usize) -> usize {
        self.product[later][earlier]
    }

    pub fn inverse(&self, i: usize) -> usize {
        self.inverse[i]
    }

    pub fn find(&self, u: &M2) -> Option<usize> {
        self.gates.iter().position(|g| phase_distance(&g.unitary, u) < 1e-9)
    }
}

fn kron2(a: &M2, b: &M2) -> M4 {
    M4::from_fn(|i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
}

/// Superoperator acting on the column-major vectorization of ρ.
fn superop(kraus: &[M4]) -> Superop {
    let mut s = Superop::zeros();
    for k in kraus {
        for c in 0..16 {
            for r in 0..16 {
                // vec(KρK†) = (conj(K) ⊗ K) vec(ρ)
                s[(r, c)] += k[(r / 4, c / 4)].conj() * k[(r % 4, c % 4)];
            }
        }
    }
    s
}

/// Idle channel for two qubits.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseChannel {
    /// Energy relaxation per qubit, us; infinite disables it.
    pub t1: [f64; 2],
    /// Pure dephasing per qubit, us; infinite disables it.
    pub t_phi: [f64; 2],
    /// Coherent ZZ rate, rad/us: the idle applies exp(-i χ τ |ee><ee|).
    pub chi_zz: f64,
    /// Idle duration τ, us.
    pub duration: f64,
}

impl NoiseChannel {
    pub fn ideal(duration: f64) -> Self {
        NoiseChannel { t1: [f64::INFINITY; 2], t_phi: [f64::INFINITY; 2], chi_zz: 0.0, duration }
    }

    /// Tφ from 1/T2* = 1/(2T1) + 1/Tφ for each qubit.
    pub fn from_coherence(coherence: [Coherence; 2], chi_zz: f64, duration: f64) -> Self {
        NoiseChannel {
            t1: [coherence[0].t1, coherence[1].t1],
            t_phi: [coherence[0].t_phi(), coherence[1].t_phi()],
            chi_zz,
            duration,
        }
    }

    pub fn with_duration(&self, duration: f64) -> Self {
        NoiseChannel { duration, ..*self }
    }

    pub fn with_chi_zz(&self, chi_zz: f64) -> Self {
        NoiseChannel { chi_zz, ..*self }
    }

    fn validate(&self) -> Result<()> {
        let times = self.t1.iter().chain(&self.t_phi);
        if !(self.duration >= 0.0) || !self.chi_zz.is_finite() || times.clone().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidArgument(format!("invalid noise channel {self:?}")));
        }
        Ok(())
    }

    fn qubit_kraus(&self, q: usize) -> Vec<M2> {
        let gamma = 1.0 - (-self.duration / self.t1[q]).exp();
        let lambda = (-self.duration / self.t_phi[q]).exp();
        let r = |x: f64| C64::new(x, 0.0);
        let ad = [M2::new(ONE, ZERO, ZERO, r((1.0 - gamma).sqrt())), M2::new(ZERO, r(gamma.sqrt()), ZERO, ZERO)];
        let dp = [M2::identity() * r(((1.0 + lambda) / 2.0).sqrt()), M2::new(ONE, ZERO, ZERO, -ONE) * r(((1.0 - lambda) / 2.0).sqrt())];
        dp.iter().flat_map(|d| ad.iter().map(move |a| d * a)).collect()
    }

    /// Kraus operators: dissipation after the coherent ZZ phase.
    pub fn kraus(&self) -> Vec<M4> {
        let mut zz = M4::identity();
        zz[(3, 3)] = C64::from_polar(1.0, -self.chi_zz * self.duration);
        let k1 = self.qubit_kraus(0);
        let k2 = self.qubit_kraus(1);
        k1.iter().flat_map(|a| k2.iter().map(move |b| kron2(a, b) * zz)).collect()
    }

    /// max |Σ K†K − I|
    pub fn trace_preservation_defect(&self) -> f64 {
        let sum = self.kraus().iter().fold(M4::zeros(), |s, k| s + k.adjoint() * k);
        (sum - M4::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn apply(&self, rho: &M4) -> M4 {
        self.kraus().iter().fold(M4::zeros(), |s, k| s + k * rho * k.adjoint())
    }
}

/// Sequence-fidelity readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Survival {
    /// Population of the expected two-qubit outcome |gg>.
    #[default]
    Joint,
    /// Mean of the two single-qubit |g> populations.
    Averaged,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RbConfig {
    pub m_axis: Vec<usize>,
    pub n_random: usize,
    pub seed: u64,
    pub survival: Survival,
}

pub fn default_m_axis() -> Vec<usize> {
    vec![1, 2, 3, 4, 6, 8, 10, 12, 15, 20, 25, 30, 40, 50, 60, 80, 100]
}

impl Default for RbConfig {
    fn default() -> Self {
        RbConfig { m_axis: default_m_axis(), n_random: DEFAULT_RANDOMIZATIONS, seed: 0, survival: Survival::Joint }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RbResult {
    pub m: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub fit: DecayFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct InterleavedRb {
    pub reference: RbResult,
    pub interleaved: RbResult,
    pub epsilon: f64,
    /// 95% interval from the fitted p uncertainties.
    pub epsilon_ci: [f64; 2],
}

impl InterleavedRb {
    pub fn to_csv(&self, seed: u64) -> String {
        let mut out = String::from("m,f_ref_mean,f_ref_std,f_int_mean,f_int_std,seed\n");
        for (k, m) in self.reference.m.iter().enumerate() {
            out.push_str(&format!(
                "{m},{:.12},{:.12},{:.12},{:.12},{seed}\n",
                self.reference.mean[k], self.reference.std[k], self.interleaved.mean[k], self.interleaved.std[k]
            ));
        }
        out
    }
}

/// ε = (3/4)(1 − p_int/p_ref)
pub fn interleaved_error(p_ref: f64, p_int: f64) -> f64 {
    0.75 * (1.0 - p_int / p_ref)
}

fn superop_of_unitary(u: &M4) -> Superop {
    superop(std::slice::from_ref(u))
}

struct Prepared {
    group: CliffordGroup,
    /// Superoperator of U_a ⊗ U_b at index 24·a + b.
    pairs: Vec<Superop>,
}

impl Prepared {
    fn new() -> Result<Self> {
        let group = CliffordGroup::new()?;
        let pairs = (0..576)
            .map(|k| superop_of_unitary(&kron2(&group.gates[k / 24].unitary, &group.gates[k % 24].unitary)))
            .collect();
        Ok(Prepared { group, pairs })
    }
}

fn readout(v: &VecRho, survival: Survival) -> f64 {
    // diagonal of ρ sits at vec index 5k
    let p = |k: usize| v[5 * k].re;
    match survival {
        Survival::Joint => p(0),
        Survival::Averaged => 0.5 * ((p(0) + p(1)) + (p(0) + p(2))),
    }
}

/// Fidelity of one random sequence of `m` cycles; `idle` is applied after
/// every Clifford pair.
fn sequence_fidelity(prep: &Prepared, idle: Option<&Superop>, m: usize, rng: &mut ChaCha8Rng, survival: Survival) -> f64 {
    let mut v = VecRho::zeros();
    v[0] = ONE;
    let (mut net1, mut net2) = (0usize, 0usize);
    for _ in 0..m {
        let a = rng.random_range(0..24);
        let b = rng.random_range(0..24);
        v = prep.pairs[24 * a + b] * v;
        net1 = prep.group.compose(a, net1);
        net2 = prep.group.compose(b, net2);
        if let Some(s) = idle {
            v = s * v;
        }
    }
    let r = 24 * prep.group.inverse(net1) + prep.group.inverse(net2);
    v = prep.pairs[r] * v;
    readout(&v, survival)
}

fn run_one(prep: &Prepared, idle: Option<&Superop>, cfg: &RbConfig, stream_base: u64) -> Result<RbResult> {
    let per_m: Vec<(f64, f64)> = cfg
        .m_axis
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let values: Vec<f64> = (0..cfg.n_random)
                .into_par_iter()
                .map(|r| {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(stream_base + ((mi as u64) << 20) + r as u64);
                    sequence_fidelity(prep, idle, m, &mut rng, cfg.survival)
                })
                .collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            (mean.clamp(0.0, 1.0), var.sqrt())
        })
        .collect();
    let mean: Vec<f64> = per_m.iter().map(|p| p.0).collect();
    let std: Vec<f64> = per_m.iter().map(|p| p.1).collect();
    let m_f: Vec<f64> = cfg.m_axis.iter().map(|&m| m as f64).collect();
    let asymptote = match cfg.survival {
        Survival::Joint => 0.25,
        Survival::Averaged => 0.5,
    };
    let fit = fit_decay(&m_f, &mean, asymptote)?;
    if !(fit.p > 0.0 && fit.p <= 1.0) {
        return Err(Error::Fit(format!("decay constant {} outside (0, 1]", fit.p)));
    }
    Ok(RbResult { m: cfg.m_axis.clone(), mean, std, fit })
}

fn check_config(cfg: &RbConfig) -> Result<()> {
    if cfg.n_random == 0 || cfg.m_axis.len() < 4 || cfg.m_axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("RB needs n_random ≥ 1 and at least four increasing m values".into()));
    }
    Ok(())
}

/// Reference RB (no idle) and interleaved RB (the idle `noise` after every
/// Clifford pair) with the derived idle error.
pub fn run_rb(noise: &NoiseChannel, cfg: &RbConfig) -> Result<InterleavedRb> {
    noise.validate()?;
    check_config(cfg)?;
    let defect = noise.trace_preservation_defect();
    if defect > CPTP_TOLERANCE {
        return Err(Error::InvalidArgument(format!("idle channel is not trace preserving ({defect:.2e})")));
    }
    let prep = Prepared::new()?;
    let idle = superop(&noise.kraus());
    let reference = run_one(&prep, None, cfg, 0)?;
    let interleaved = run_one(&prep, Some(&idle), cfg, 1 << 40)?;
    let (pr, pi) = (reference.fit.p, interleaved.fit.p);
    let epsilon = interleaved_error(pr, pi);
    let rel = ((reference.fit.p_stderr / pr).powi(2) + (interleaved.fit.p_stderr / pi).powi(2)).sqrt();
    let half = 1.96 * 0.75 * (pi / pr) * rel;
    Ok(InterleavedRb { reference, interleaved, epsilon, epsilon_ci: [epsilon - half, epsilon + half] })
}

#[derive(Clone, Debug, Serialize)]
pub struct IdleErrorPoint {
    pub tau: f64,
    pub epsilon: f64,
    pub epsilon_ci: [f64; 2],
    pub p_ref: f64,
    pub p_int: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IdleErrorSweep {
    pub points: Vec<IdleErrorPoint>,
    /// ε = slope·τ fitted through the origin, per us.
    pub slope: LineFit,
}

impl IdleErrorSweep {
    pub fn to_csv(&self, seed: u64) -> String {
        let mut out = String::from("tau_us,epsilon,epsilon_lo,epsilon_hi,p_ref,p_int,seed\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{:.12},{:.12},{:.12},{:.12},{:.12},{seed}\n",
                p.tau, p.epsilon, p.epsilon_ci[0], p.epsilon_ci[1], p.p_ref, p.p_int
            ));
        }
        out
    }
}

/// Interleaved RB for each idle duration in `taus` with the channel
/// parameters of `noise`, plus the proportional slope of ε(τ).
pub fn error_vs_idle_duration(noise: &NoiseChannel, taus: &[f64], cfg: &RbConfig) -> Result<IdleErrorSweep> {
    if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidArgument("idle durations must be positive".into()));
    }
    let points = taus
        .iter()
        .map(|&tau| {
            let r = run_rb(&noise.with_duration(tau), cfg)?;
            Ok(IdleErrorPoint { tau, epsilon: r.epsilon, epsilon_ci: r.epsilon_ci, p_ref: r.reference.fit.p, p_int: r.interleaved.fit.p })
        })
        .collect::<Result<Vec<_>>>()?;
    let eps: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let slope = fit_proportional(taus, &eps)?;
    Ok(IdleErrorSweep { points, slope })
}

/// (1/3)(τ/T1^{Q1} + τ/T1^{Q2}) per unit τ.
pub fn coherence_limit_slope(t1: [f64; 2]) -> f64 {
    (1.0 / t1[0] + 1.0 / t1[1]) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_matches_listed_decompositions() {
        let t = clifford_table();
        assert_eq!(t.len(), 24);
        let names = |k: usize| t[k].gates.iter().map(|g| g.label()).collect::<Vec<_>>().join(",");
        assert_eq!(names(3), "Z,I");
        assert_eq!(names(4), "Y/2,-Z/2");
        assert_eq!(names(16), "Z/2,I");
        assert_eq!(names(22), "-X,Z/2");
        assert_eq!(names(23), "-Z/2,-Y");
        // one physical pulse per Clifford
        for g in &t {
            assert!(g.gates.iter().filter(|x| !x.is_virtual()).count() <= 1);
        }
    }

    #[test]
    fn group_closure_and_distinctness() {
        let t = clifford_table();
        for i in 0..24 {
            for j in 0..i {
                assert!(phase_distance(&t[i].unitary, &t[j].unitary) > 0.1, "{i} == {j}");
            }
        }
        let g = CliffordGroup::new().unwrap();
        for i in 0..24 {
            for j in 0..24 {
                let k = g.compose(i, j);
                assert!(phase_distance(&g.gates[k].unitary, &(t[i].unitary * t[j].unitary)) < 1e-9);
            }
            assert_eq!(g.compose(g.inverse(i), i), 0);
        }
        let x = &t[1].unitary;
        assert!(phase_distance(&(x * x), &M2::identity()) < 1e-12);
    }

    #[test]
    fn vectorized_superop_matches_kraus_sum() {
        let n = NoiseChannel { t1: [20.0, 24.0], t_phi: [99.0, 160.0], chi_zz: 0.6, duration: 1.3 };
        let mut rho = M4::zeros();
        let psi = [C64::new(0.5, 0.1), C64::new(0.2, -0.4), C64::new(-0.3, 0.3), C64::new(0.1, 0.58)];
        for i in 0..4 {
            for j in 0..4 {
                rho[(i, j)] = psi[i] * psi[j].conj();
            }
        }
        let direct = n.apply(&rho);
        let v = superop(&n.kraus()) * VecRho::from_column_slice(rho.as_slice());
        let back = M4::from_column_slice(v.as_slice());
        assert!((direct - back).iter().all(|z| z.norm() < 1e-14));
    }

    proptest! {
        #[test]
        fn channel_is_cptp(t1a in 1.0f64..100.0, t1b in 1.0f64..100.0, tpa in 1.0f64..500.0, tpb in 1.0f64..500.0,
                           chi in -2.0f64..2.0, tau in 0.0f64..5.0) {
            let n = NoiseChannel { t1: [t1a, t1b], t_phi: [tpa, tpb], chi_zz: chi, duration: tau };
            prop_assert!(n.trace_preservation_defect() < CPTP_TOLERANCE);
        }
    }

    #[test]
    fn noiseless_rb_is_perfect() {
        let cfg = RbConfig { n_random: 10, ..RbConfig::default() };
        let r = run_rb(&NoiseChannel::ideal(0.0), &cfg).unwrap();
        assert!(r.interleaved.mean.iter().all(|f| (f - 1.0).abs() < 1e-12));
        assert_eq!(r.interleaved.fit.p, 1.0);
        assert_eq!(r.epsilon, 0.0);
    }

    #[test]
    fn recovery_inverts_each_sequence() {
        let prep = Prepared::new().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in [1, 5, 17] {
            let f = sequence_fidelity(&prep, None, m, &mut rng, Survival::Joint);
            assert!((f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn epsilon_arithmetic() {
        assert!((interleaved_error(0.99, 0.98) - 0.0075757575).abs() < 1e-9);
    }

    #[test]
    fn seeded_runs_reproduce() {
        let n = NoiseChannel { t1: [20.0, 24.0], t_phi: [99.0, 160.0], chi_zz: 0.3, duration: 1.0 };
        let cfg = RbConfig { n_random: 12, seed: 5, ..RbConfig::default() };
        let a = run_rb(&n, &cfg).unwrap();
        let b = run_rb(&n, &cfg).unwrap();
        assert_eq!(a.to_csv(5), b.to_csv(5));
        let c = run_rb(&n, &RbConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.interleaved.mean, c.interleaved.mean);
    }

    #[test]
    fn no_noise_no_slope() {
        let cfg = RbConfig { n_random: 8, ..RbConfig::default() };
        let s = error_vs_idle_duration(&NoiseChannel::ideal(0.0), &[0.5, 1.0, 2.0], &cfg).unwrap();
        assert_eq!(s.slope.slope, 0.0);
    }

    #[test]
    fn bad_inputs() {
        let cfg = RbConfig::default();
        let bad = NoiseChannel { t1: [0.0, 1.0], ..NoiseChannel::ideal(1.0) };
        assert!(run_rb(&bad, &cfg).is_err());
        assert!(run_rb(&NoiseChannel::ideal(1.0), &RbConfig { m_axis: vec![3, 2, 5, 6], ..cfg.clone() }).is_err());
        assert!(error_vs_idle_duration(&NoiseChannel::ideal(1.0), &[0.0], &cfg).is_err());
    }
}
