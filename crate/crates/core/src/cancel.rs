//! Coupler-drive ZZ cancellation: Stark shifts, driven ZZ maps and the
//! cancellation-point finder.

use rayon::prelude::*;
use serde::Serialize;

use crate::device::{DeviceSpec, DriveTone, ModeRole};
use crate::error::{Error, Result};
use crate::frame::{DrivenFrame, Tone};
use crate::spectrum::{default_pair, pair_summary, DispersiveSummary};
use crate::units::{to_ghz, to_khz, to_mhz, RAD_PER_US_PER_MHZ};

/// Residual tolerance of the root finder, rad/us (0.1 kHz).
pub const ROOT_TOLERANCE: f64 = 1e-4 * RAD_PER_US_PER_MHZ;

/// Two-level ac Stark shift of a level detuned by Δ from a drive of strength Ω.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StarkShift {
    pub detuning: f64,
    pub amplitude: f64,
    pub shift: f64,
}

impl StarkShift {
    /// Eigenvalues E± of [[0, Ω/2], [Ω/2, −Δ]] in the drive frame.
    pub fn dressed_energies(&self) -> (f64, f64) {
        let r = (self.detuning * self.detuning + self.amplitude * self.amplitude).sqrt();
        ((-self.detuning + r) / 2.0, (-self.detuning - r) / 2.0)
    }
}

pub fn stark_shift_two_level(detuning: f64, amplitude: f64) -> StarkShift {
    let mag = ((detuning * detuning + amplitude * amplitude).sqrt() - detuning.abs()) / 2.0;
    // degenerate point: pick the upper branch
    let shift = if detuning < 0.0 { -mag } else { mag };
    StarkShift { detuning, amplitude, shift }
}

/// Four-term Stark estimate of the drive-induced ZZ change, rad/us, using
/// Δ_mn = ω_d − ω_c^{mn}.
pub fn stark_sum(summary: &DispersiveSummary, drive_freq: f64, amplitude: f64) -> f64 {
    let d = |wc: f64| stark_shift_two_level(drive_freq - wc, amplitude).shift;
    d(summary.coupler_freq_gg) + d(summary.coupler_freq_ee) - d(summary.coupler_freq_ge) - d(summary.coupler_freq_eg)
}

/// As [`stark_sum`], with each amplitude scaled by the dressed coupler
/// matrix element <mn1|(a_c + a_c†)|mn0>.
pub fn stark_sum_dressed(frame: &DrivenFrame, q1: usize, q2: usize, c: usize, drive_freq: f64, amplitude: f64) -> Result<f64> {
    let labels = crate::frame::computational_labels(frame.roles().len(), q1, q2);
    let signs = [1.0, -1.0, -1.0, 1.0];
    let mut total = 0.0;
    for (label, sign) in labels.iter().zip(signs) {
        let excited: Vec<usize> = [q1, q2].into_iter().filter(|&q| label[q] == 1).collect();
        let wc = frame.coupler_frequency(c, &excited)?;
        let x = frame.ladder_element(c, label)?;
        total += sign * stark_shift_two_level(drive_freq - wc, amplitude * x).shift;
    }
    Ok(total)
}

/// Default operating frequency, midway between ω_c^{ee} and ω_c^{eg}.
pub fn operating_frequency(summary: &DispersiveSummary) -> f64 {
    0.5 * (summary.coupler_freq_ee + summary.coupler_freq_eg)
}

fn flat_tone(spec: &DeviceSpec, tone: &DriveTone) -> Result<Tone> {
    let c = spec.mode_index(&tone.target)?;
    if spec.modes[c].role != ModeRole::Coupler {
        return Err(Error::InvalidArgument(format!("drive target {} is not a coupler", tone.target)));
    }
    if tone.envelope.is_some() {
        return Err(Error::InvalidArgument("driven ZZ needs a flat tone".into()));
    }
    Ok(Tone { coupler: c, frequency: tone.frequency, amplitude: tone.amplitude })
}

/// Net ZZ of the device's default pair under a flat coupler tone, rad/us.
pub fn chi_zz_driven(spec: &DeviceSpec, tone: &DriveTone) -> Result<f64> {
    let t = flat_tone(spec, tone)?;
    let (q1, q2, _) = default_pair(spec)?;
    DrivenFrame::new(spec)?.chi_zz(q1, q2, &[t])
}

/// Driven ZZ over a grid of drive frequencies and amplitudes.
#[derive(Clone, Debug, Serialize)]
pub struct ZZMap {
    /// ω_c^{gg}, rad/us. Frequencies on the axis are absolute.
    pub reference: f64,
    pub freq_axis: Vec<f64>,
    pub amp_axis: Vec<f64>,
    /// `grid[i][j]` at `freq_axis[i]`, `amp_axis[j]`; `None` where continuation failed.
    pub grid: Vec<Vec<Option<f64>>>,
    /// Smallest continuation overlap met in each cell (0 when it failed).
    pub min_overlap: Vec<Vec<f64>>,
}

impl ZZMap {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.grid[i][j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("drive_freq_ghz,drive_offset_mhz,drive_amp_mhz,chi_zz_khz,valid\n");
        for (i, &f) in self.freq_axis.iter().enumerate() {
            for (j, &a) in self.amp_axis.iter().enumerate() {
                let (v, ok) = match self.grid[i][j] {
                    Some(x) => (format!("{:.6}", to_khz(x)), 1),
                    None => ("NaN".to_string(), 0),
                };
                out += &format!(
                    "{:.9},{:.6},{:.6},{},{}\n",
                    to_ghz(f),
                    to_mhz(f - self.reference),
                    to_mhz(a),
                    v,
                    ok
                );
            }
        }
        out
    }
}

fn check_sorted(axis: &[f64], name: &str) -> Result<()> {
    if axis.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(format!("{name} axis is not sorted ascending")));
    }
    Ok(())
}

/// Driven-ZZ map of the default pair. Axes are absolute frequencies and
/// amplitudes in rad/us.
pub fn zz_map(spec: &DeviceSpec, freq_axis: &[f64], amp_axis: &[f64]) -> Result<ZZMap> {
    check_sorted(freq_axis, "frequency")?;
    check_sorted(amp_axis, "amplitude")?;
    let (q1, q2, c) = default_pair(spec)?;
    let frame = DrivenFrame::new(spec)?;
    let summary = pair_summary(spec, frame.spectrum(), q1, q2, c)?;
    let cells: Vec<(usize, usize)> =
        (0..freq_axis.len()).flat_map(|i| (0..amp_axis.len()).map(move |j| (i, j))).collect();
    let values: Vec<(Option<f64>, f64)> = cells
        .par_iter()
        .map(|&(i, j)| {
            let tone = Tone { coupler: c, frequency: freq_axis[i], amplitude: amp_axis[j] };
            let labels = crate::frame::computational_labels(spec.modes.len(), q1, q2);
            match frame.track(&labels, &[tone]) {
                Ok(t) => (Some(t.energies[0] + t.energies[3] - t.energies[1] - t.energies[2]), t.min_overlap),
                Err(_) => (None, 0.0),
            }
        })
        .collect();
    let mut grid = vec![vec![None; amp_axis.len()]; freq_axis.len()];
    let mut min_overlap = vec![vec![0.0; amp_axis.len()]; freq_axis.len()];
    for (&(i, j), (v, ov)) in cells.iter().zip(values) {
        grid[i][j] = v;
        min_overlap[i][j] = ov;
    }
    Ok(ZZMap {
        reference: summary.coupler_freq_gg,
        freq_axis: freq_axis.to_vec(),
        amp_axis: amp_axis.to_vec(),
        grid,
        min_overlap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CancellationPoint {
    /// rad/us
    pub drive_freq: f64,
    /// rad/us
    pub drive_amp: f64,
    /// rad/us
    pub residual: f64,
    /// min over the computational states of |ω_d − ω_c^{mn}| / Ω_d
    pub min_detuning_ratio: f64,
    pub iterations: usize,
}

impl CancellationPoint {
    pub fn report(&self) -> CancellationReport {
        CancellationReport {
            drive_freq_ghz: to_ghz(self.drive_freq),
            drive_amp_mhz: to_mhz(self.drive_amp),
            residual_khz: to_khz(self.residual),
            min_detuning_ratio: self.min_detuning_ratio,
            iterations: self.iterations,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CancellationReport {
    pub drive_freq_ghz: f64,
    pub drive_amp_mhz: f64,
    pub residual_khz: f64,
    pub min_detuning_ratio: f64,
    pub iterations: usize,
}

/// Brent root of `f` on [a, b]; `fa`, `fb` must bracket a sign change.
/// Returns (root, f(root), evaluations).
pub fn brent<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, ftol: f64, max_iter: usize) -> Result<(f64, f64, usize)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;
    for iter in 1..=max_iter {
        if fb.abs() < ftol {
            return Ok((b, fb, iter - 1));
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc)) + b * fa * fc / ((fb - fa) * (fb - fc)) + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let between = (s > lo.min(b)) && (s < lo.max(b));
        let tiny = 1e-15 * (1.0 + b.abs());
        if !between
            || (bisected && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!bisected && (s - b).abs() >= (c - d).abs() / 2.0)
            || (bisected && (b - c).abs() < tiny)
            || (!bisected && (c - d).abs() < tiny)
        {
            s = (a + b) / 2.0;
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s)?;
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
        if (b - a).abs() < tiny {
            return Ok((b, fb, iter));
        }
    }
    if fb.abs() < ftol {
        Ok((b, fb, max_iter))
    } else {
        Err(Error::InvalidArgument(format!("root finder did not converge in {max_iter} iterations")))
    }
}

/// Drive amplitude in `bracket` (rad/us) at which the default pair's ZZ vanishes.
pub fn find_cancellation(spec: &DeviceSpec, drive_freq: f64, bracket: (f64, f64)) -> Result<CancellationPoint> {
    let (q1, q2, c) = default_pair(spec)?;
    let frame = DrivenFrame::new(spec)?;
    let summary = pair_summary(spec, frame.spectrum(), q1, q2, c)?;
    let point = find_cancellation_in(&frame, q1, q2, c, drive_freq, bracket)?;
    Ok(CancellationPoint { min_detuning_ratio: detuning_ratio(&summary, drive_freq, point.drive_amp), ..point })
}

/// Root finding on an existing frame for the pair (q1, q2) sharing coupler `c`.
pub fn find_cancellation_in(
    frame: &DrivenFrame,
    q1: usize,
    q2: usize,
    c: usize,
    drive_freq: f64,
    bracket: (f64, f64),
) -> Result<CancellationPoint> {
    let f = |amp: f64| frame.chi_zz(q1, q2, &[Tone { coupler: c, frequency: drive_freq, amplitude: amp }]);
    let (lo, hi) = bracket;
    let flo = f(lo)?;
    let done = |amp: f64, res: f64, it: usize| CancellationPoint {
        drive_freq,
        drive_amp: amp,
        residual: res,
        min_detuning_ratio: f64::INFINITY,
        iterations: it,
    };
    if flo.abs() < ROOT_TOLERANCE {
        return Ok(done(lo, flo, 0));
    }
    let fhi = f(hi)?;
    if fhi.abs() < ROOT_TOLERANCE {
        return Ok(done(hi, fhi, 0));
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoSignChange {
            lo_mhz: to_mhz(lo),
            hi_mhz: to_mhz(hi),
            f_lo_khz: to_khz(flo),
            f_hi_khz: to_khz(fhi),
        });
    }
    let (root, res, it) = brent(f, lo, hi, flo, fhi, ROOT_TOLERANCE, 100)?;
    Ok(done(root, res, it))
}

/// min_mn |ω_d − ω_c^{mn}| / Ω_d
pub fn detuning_ratio(summary: &DispersiveSummary, drive_freq: f64, amp: f64) -> f64 {
    [summary.coupler_freq_gg, summary.coupler_freq_ge, summary.coupler_freq_eg, summary.coupler_freq_ee]
        .iter()
        .map(|wc| (drive_freq - wc).abs() / amp.abs())
        .fold(f64::INFINITY, f64::min)
}
