//! Pairwise ZZ in a three-qubit, two-coupler chain Q1–C1–Q2–C2–Q3 with one
//! cancellation tone per coupler. Pair ZZ is taken with the third qubit in |g>.

use rayon::prelude::*;
use serde::Serialize;

use crate::cancel::find_cancellation_in;
use crate::config::chain_s6;
use crate::device::DeviceSpec;
use crate::error::{Error, Result};
use crate::frame::{DrivenFrame, Tone};
use crate::spectrum::pair_summary;
use crate::units::{to_ghz, to_khz, to_mhz};

/// Two neighbouring qubits and the coupler between them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainPair {
    pub q1: usize,
    pub q2: usize,
    pub coupler: usize,
    /// Operating tone frequency, rad/us.
    pub drive_freq: f64,
}

#[derive(Clone, Debug)]
pub struct ChainSpec {
    pub spec: DeviceSpec,
    pub frame: DrivenFrame,
    pub pairs: [ChainPair; 2],
}

/// Midpoint between ω_c^{ee} and the dressed coupler line closest to it.
pub fn pair_operating_frequency(spec: &DeviceSpec, frame: &DrivenFrame, q1: usize, q2: usize, c: usize) -> Result<f64> {
    let s = pair_summary(spec, frame.spectrum(), q1, q2, c)?;
    let nearest = [s.coupler_freq_eg, s.coupler_freq_ge, s.coupler_freq_gg]
        .into_iter()
        .min_by(|a, b| (a - s.coupler_freq_ee).abs().total_cmp(&(b - s.coupler_freq_ee).abs()))
        .expect("three lines");
    Ok(0.5 * (nearest + s.coupler_freq_ee))
}

impl ChainSpec {
    /// Qubits and couplers are taken in declaration order: Q1, Q2, Q3 and C1
    /// (between Q1, Q2), C2 (between Q2, Q3).
    pub fn from_spec(spec: &DeviceSpec) -> Result<Self> {
        let q = spec.qubit_indices();
        let c = spec.coupler_indices();
        if q.len() != 3 || c.len() != 2 {
            return Err(Error::InvalidDevice("a chain needs three qubits and two couplers".into()));
        }
        let name = |i: usize| spec.modes[i].name.as_str();
        for (a, b) in [(q[0], c[0]), (q[1], c[0]), (q[1], c[1]), (q[2], c[1])] {
            if spec.coupling(name(a), name(b)).is_none_or(|g| g == 0.0) {
                return Err(Error::InvalidDevice(format!("chain coupling {}–{} missing", name(a), name(b))));
            }
        }
        let frame = DrivenFrame::new(spec)?;
        let pair = |a: usize, b: usize, cc: usize| -> Result<ChainPair> {
            Ok(ChainPair { q1: a, q2: b, coupler: cc, drive_freq: pair_operating_frequency(spec, &frame, a, b, cc)? })
        };
        let pairs = [pair(q[0], q[1], c[0])?, pair(q[1], q[2], c[1])?];
        Ok(ChainSpec { spec: spec.clone(), frame, pairs })
    }

    /// Tones for the two couplers; zero amplitudes are left out.
    pub fn tones(&self, amp1: f64, amp2: f64) -> Vec<Tone> {
        self.pairs
            .iter()
            .zip([amp1, amp2])
            .filter(|(_, a)| *a != 0.0)
            .map(|(p, a)| Tone { coupler: p.coupler, frequency: p.drive_freq, amplitude: a })
            .collect()
    }

    /// (χ_zz^{Q1Q2}, χ_zz^{Q2Q3}) in rad/us; `None` where continuation fails.
    pub fn pair_chi(&self, amp1: f64, amp2: f64) -> (Option<f64>, Option<f64>) {
        let tones = self.tones(amp1, amp2);
        let [a, b] = self.pairs;
        (self.frame.chi_zz(a.q1, a.q2, &tones).ok(), self.frame.chi_zz(b.q1, b.q2, &tones).ok())
    }
}

pub fn default_chain() -> Result<ChainSpec> {
    ChainSpec::from_spec(&chain_s6())
}

/// Pair ZZ over a two-axis grid, rad/us.
#[derive(Clone, Debug, Serialize)]
pub struct PairwiseZZ {
    /// CSV column names, units included.
    pub axis_names: [String; 2],
    /// rad/us
    pub axis1: Vec<f64>,
    /// rad/us
    pub axis2: Vec<f64>,
    pub chi12: Vec<Vec<Option<f64>>>,
    pub chi23: Vec<Vec<Option<f64>>>,
}

impl PairwiseZZ {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{},chi_zz_q1q2_khz,chi_zz_q2q3_khz,flags\n", self.axis_names[0], self.axis_names[1]);
        let fmt = |v: Option<f64>| v.map_or("NaN".to_string(), |x| format!("{:.6}", to_khz(x)));
        for (i, a) in self.axis1.iter().enumerate() {
            for (j, b) in self.axis2.iter().enumerate() {
                let (x, y) = (self.chi12[i][j], self.chi23[i][j]);
                let flags = match (x.is_some(), y.is_some()) {
                    (true, true) => "ok",
                    (false, true) => "q1q2_invalid",
                    (true, false) => "q2q3_invalid",
                    (false, false) => "both_invalid",
                };
                out.push_str(&format!("{:.6},{:.6},{},{},{flags}\n", to_mhz(*a), to_mhz(*b), fmt(x), fmt(y)));
            }
        }
        out
    }
}

fn check_axis(axis: &[f64], what: &str) -> Result<()> {
    if axis.is_empty() || axis.windows(2).any(|w| w[1] <= w[0]) || axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} axis must be non-empty and increasing")));
    }
    Ok(())
}

/// First zero crossing of `row` along `axis`, refined with `root`.
fn crossing(axis: &[f64], row: &[Option<f64>], root: impl Fn(f64, f64) -> Result<f64>) -> Option<f64> {
    for j in 0..axis.len() {
        if row[j] == Some(0.0) {
            return Some(axis[j]);
        }
        if j + 1 < axis.len() {
            if let (Some(a), Some(b)) = (row[j], row[j + 1]) {
                if a.signum() != b.signum() {
                    return root(axis[j], axis[j + 1]).ok();
                }
            }
        }
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct DetuningSweep {
    /// axis1 = Δ12 = ω_Q1 − ω_Q2 (bare), axis2 = Ω_d^{C1}.
    pub grid: PairwiseZZ,
    /// C1 tone frequency per Δ12, rad/us.
    pub drive_freqs: Vec<f64>,
    /// Cancellation amplitude of χ_zz^{Q1Q2} per Δ12, rad/us.
    pub crossings: Vec<Option<f64>>,
}

impl DetuningSweep {
    pub fn crossings_csv(&self) -> String {
        let mut out = String::from("delta12_mhz,drive_freq_ghz,cancel_amp_mhz\n");
        for (i, d) in self.grid.axis1.iter().enumerate() {
            let amp = self.crossings[i].map_or("NaN".to_string(), |a| format!("{:.6}", to_mhz(a)));
            out.push_str(&format!("{:.6},{:.9},{amp}\n", to_mhz(*d), to_ghz(self.drive_freqs[i])));
        }
        out
    }
}

/// χ_zz^{Q1Q2} over qubit detuning Δ12 (realized by moving ω_Q1) and the C1
/// tone amplitude, with the C1 tone at each detuning's operating frequency.
pub fn zz_vs_detuning_and_amp(chain: &ChainSpec, detunings: &[f64], amps: &[f64]) -> Result<DetuningSweep> {
    check_axis(detunings, "detuning")?;
    check_axis(amps, "amplitude")?;
    let [p, _] = chain.pairs;
    let q1_name = chain.spec.modes[p.q1].name.clone();
    let w2 = chain.spec.modes[p.q2].frequency;
    let default_delta = chain.spec.modes[p.q1].frequency - w2;
    let rows = detunings
        .par_iter()
        .map(|&delta| {
            let shifted = if delta == default_delta {
                chain.clone()
            } else {
                ChainSpec::from_spec(&chain.spec.with_frequency(&q1_name, w2 + delta)?)?
            };
            let row: Vec<(Option<f64>, Option<f64>)> = amps.iter().map(|&a| shifted.pair_chi(a, 0.0)).collect();
            let chi12: Vec<Option<f64>> = row.iter().map(|r| r.0).collect();
            let sp = shifted.pairs[0];
            let root = |lo: f64, hi: f64| {
                find_cancellation_in(&shifted.frame, sp.q1, sp.q2, sp.coupler, sp.drive_freq, (lo, hi)).map(|c| c.drive_amp)
            };
            let cross = crossing(amps, &chi12, root);
            Ok((chi12, row.iter().map(|r| r.1).collect::<Vec<_>>(), sp.drive_freq, cross))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grid = PairwiseZZ {
        axis_names: ["delta12_mhz".into(), "amp_c1_mhz".into()],
        axis1: detunings.to_vec(),
        axis2: amps.to_vec(),
        chi12: Vec::new(),
        chi23: Vec::new(),
    };
    let mut drive_freqs = Vec::new();
    let mut crossings = Vec::new();
    for (c12, c23, f, x) in rows {
        grid.chi12.push(c12);
        grid.chi23.push(c23);
        drive_freqs.push(f);
        crossings.push(x);
    }
    Ok(DetuningSweep { grid, drive_freqs, crossings })
}

/// Both pair ZZ values over the joint (Ω_d^{C1}, Ω_d^{C2}) grid.
pub fn simultaneous_cancellation(chain: &ChainSpec, amps1: &[f64], amps2: &[f64]) -> Result<PairwiseZZ> {
    check_axis(amps1, "C1 amplitude")?;
    check_axis(amps2, "C2 amplitude")?;
    let cells: Vec<(usize, usize)> = (0..amps1.len()).flat_map(|i| (0..amps2.len()).map(move |j| (i, j))).collect();
    let values: Vec<(Option<f64>, Option<f64>)> = cells.par_iter().map(|&(i, j)| chain.pair_chi(amps1[i], amps2[j])).collect();
    let rows = |pick: fn(&(Option<f64>, Option<f64>)) -> Option<f64>| -> Vec<Vec<Option<f64>>> {
        values.chunks(amps2.len()).map(|r| r.iter().map(pick).collect()).collect()
    };
    Ok(PairwiseZZ {
        axis_names: ["amp_c1_mhz".into(), "amp_c2_mhz".into()],
        axis1: amps1.to_vec(),
        axis2: amps2.to_vec(),
        chi12: rows(|v| v.0),
        chi23: rows(|v| v.1),
    })
}

/// How much each pair's ZZ at its own cancellation point moves when the
/// other coupler's tone is swept.
#[derive(Clone, Debug, Serialize)]
pub struct Independence {
    /// Cancellation amplitudes of χ_zz^{Q1Q2} (C1) and χ_zz^{Q2Q3} (C2) with
    /// the other tone off, rad/us.
    pub roots: [f64; 2],
    /// max − min of χ_zz^{Q1Q2}(root1, Ω2) over the C2 axis, rad/us.
    pub shift12: f64,
    /// max − min of χ_zz^{Q2Q3}(Ω1, root2) over the C1 axis, rad/us.
    pub shift23: f64,
    /// |∂χ12/∂Ω2| / |∂χ12/∂Ω1| at (root1, root2), central differences.
    pub spectator_ratio12: f64,
    pub spectator_ratio23: f64,
}

pub fn independence(chain: &ChainSpec, amps1: &[f64], amps2: &[f64], bracket1: (f64, f64), bracket2: (f64, f64)) -> Result<Independence> {
    check_axis(amps1, "C1 amplitude")?;
    check_axis(amps2, "C2 amplitude")?;
    let [a, b] = chain.pairs;
    let r1 = find_cancellation_in(&chain.frame, a.q1, a.q2, a.coupler, a.drive_freq, bracket1)?.drive_amp;
    let r2 = find_cancellation_in(&chain.frame, b.q1, b.q2, b.coupler, b.drive_freq, bracket2)?.drive_amp;
    let missing = |what: &str| Error::InvalidArgument(format!("continuation failed for {what}"));
    let spread = |v: Vec<Option<f64>>, what: &str| -> Result<f64> {
        let v: Vec<f64> = v.into_iter().map(|x| x.ok_or_else(|| missing(what))).collect::<Result<_>>()?;
        Ok(v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min))
    };
    let shift12 = spread(amps2.par_iter().map(|&o| chain.pair_chi(r1, o).0).collect(), "Q1Q2")?;
    let shift23 = spread(amps1.par_iter().map(|&o| chain.pair_chi(o, r2).1).collect(), "Q2Q3")?;
    let h = 0.02 * r1.max(r2);
    let get = |x: f64, y: f64, pick: usize| -> Result<f64> {
        let v = chain.pair_chi(x, y);
        (if pick == 0 { v.0 } else { v.1 }).ok_or_else(|| missing("derivative"))
    };
    let d = |dx: f64, dy: f64, pick: usize| -> Result<f64> {
        Ok((get(r1 + dx, r2 + dy, pick)? - get(r1 - dx, r2 - dy, pick)?).abs() / (2.0 * h))
    };
    Ok(Independence {
        roots: [r1, r2],
        shift12,
        shift23,
        spectator_ratio12: d(0.0, h, 0)? / d(h, 0.0, 0)?,
        spectator_ratio23: d(h, 0.0, 1)? / d(0.0, h, 1)?,
    })
}
