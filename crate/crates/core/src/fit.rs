//! Small least-squares fits used by the experiment emulations.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};

/// y ≈ offset + amplitude·cos(2π·frequency·x + phase)
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SinusoidFit {
    /// Cycles per unit of x, ≥ 0.
    pub frequency: f64,
    pub phase: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub rms: f64,
}

/// Best (c0, c1, c2) for y ≈ c0 + c1 cos(wx) + c2 sin(wx) and the residual sum of squares.
fn linear_sinusoid(x: &[f64], y: &[f64], w: f64) -> (Vector3<f64>, f64) {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let row = Vector3::new(1.0, (w * xi).cos(), (w * xi).sin());
        ata += row * row.transpose();
        aty += row * yi;
    }
    // at w = 0 the basis is rank deficient; fall back to a pseudo-inverse
    let c = ata.pseudo_inverse(1e-12).map(|p| p * aty).unwrap_or_else(|_| Vector3::zeros());
    let rss = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let m = c[0] + c[1] * (w * xi).cos() + c[2] * (w * xi).sin();
            (yi - m).powi(2)
        })
        .sum();
    (c, rss)
}

fn to_fit(x: &[f64], y: &[f64], f: f64) -> SinusoidFit {
    let (c, rss) = linear_sinusoid(x, y, 2.0 * std::f64::consts::PI * f);
    SinusoidFit {
        frequency: f,
        phase: (-c[2]).atan2(c[1]),
        amplitude: c[1].hypot(c[2]),
        offset: c[0],
        rms: (rss / x.len() as f64).sqrt(),
    }
}

/// Fit a single sinusoid with unknown frequency in [0, f_max]. The frequency
/// is found by a dense scan (spacing 1/(20·span)) followed by golden-section
/// refinement; amplitude, phase and offset are linear at fixed frequency.
pub fn fit_sinusoid(x: &[f64], y: &[f64], f_max: f64) -> Result<SinusoidFit> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(Error::Fit("need at least four points".into()));
    }
    let span = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) || !(f_max > 0.0) {
        return Err(Error::Fit("degenerate sample axis".into()));
    }
    let df = 1.0 / (20.0 * span);
    let n = (f_max / df).ceil() as usize;
    let rss = |f: f64| linear_sinusoid(x, y, 2.0 * std::f64::consts::PI * f).1;
    let (best_i, _) = (0..=n)
        .map(|i| (i, rss(i as f64 * df)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let (mut a, mut b) = (((best_i as f64) - 1.0).max(0.0) * df, ((best_i + 1) as f64 * df).min(f_max));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (rss(c), rss(d));
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = rss(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = rss(d);
        }
    }
    let f = 0.5 * (a + b);
    let grid_best = best_i as f64 * df;
    Ok(if rss(f) <= rss(grid_best) { to_fit(x, y, f) } else { to_fit(x, y, grid_best) })
}

/// Fit y ≈ offset + amplitude·cos(frequency·2π·x + phase) at a known frequency.
pub fn fit_sinusoid_fixed(x: &[f64], y: &[f64], frequency: f64) -> Result<SinusoidFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Fit("need at least three points".into()));
    }
    Ok(to_fit(x, y, frequency))
}

/// F(m) = a·p^m + b with parameter covariance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub a: f64,
    pub p: f64,
    pub b: f64,
    pub p_stderr: f64,
    pub rms: f64,
}

/// Levenberg–Marquardt fit of a·p^m + b. `b_guess` seeds the asymptote.
pub fn fit_decay(m: &[f64], y: &[f64], b_guess: f64) -> Result<DecayFit> {
    if m.len() != y.len() || m.len() < 4 {
        return Err(Error::Fit("need at least four points".into()));
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    if y.iter().all(|v| (v - mean).abs() < 1e-12) {
        return Ok(DecayFit { a: 0.0, p: 1.0, b: mean, p_stderr: 0.0, rms: 0.0 });
    }
    let model = |t: &Vector3<f64>, mi: f64| t[0] * t[1].powf(mi) + t[2];
    let rss = |t: &Vector3<f64>| m.iter().zip(y).map(|(&mi, &yi)| (yi - model(t, mi)).powi(2)).sum::<f64>();

    // seed from a scan over p with (a, b) solved linearly at each p
    let linear_ab = |p: f64| -> (f64, f64, f64) {
        let (mut s1, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&mi, &yi) in m.iter().zip(y) {
            let x = p.powf(mi);
            s1 += 1.0;
            sx += x;
            sxx += x * x;
            sy += yi;
            sxy += x * yi;
        }
        let det = s1 * sxx - sx * sx;
        let (a, b) = if det.abs() > 1e-14 { ((s1 * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det) } else { (0.0, b_guess) };
        let rss = m.iter().zip(y).map(|(&mi, &yi)| (yi - a * p.powf(mi) - b).powi(2)).sum();
        (a, b, rss)
    };
    let (p0, (a0, b0, _)) = (1..400)
        .map(|k| {
            let p = 1.0 - 0.999 * 10f64.powf(-3.0 * k as f64 / 400.0);
            (p, linear_ab(p))
        })
        .min_by(|x, y| x.1 .2.total_cmp(&y.1 .2))
        .expect("non-empty scan");
    let mut t = Vector3::new(a0, p0, b0);
    let mut lambda = 1e-3;
    let mut cost = rss(&t);
    let jac_row = |t: &Vector3<f64>, mi: f64| Vector3::new(t[1].powf(mi), t[0] * mi * t[1].powf(mi - 1.0), 1.0);
    for _ in 0..500 {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (&mi, &yi) in m.iter().zip(y) {
            let j = jac_row(&t, mi);
            jtj += j * j.transpose();
            jtr += j * (yi - model(&t, mi));
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] *= 1.0 + lambda;
                damped[(k, k)] += 1e-300;
            }
            let Some(step) = damped.lu().solve(&jtr) else { break };
            let mut trial = t + step;
            trial[1] = trial[1].clamp(1e-12, 1.0);
            let c = rss(&trial);
            if c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                t = trial;
                cost = c;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    improved = false;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    if !t.iter().all(|v| v.is_finite()) {
        return Err(Error::Fit("decay fit diverged".into()));
    }
    let dof = (m.len() as f64 - 3.0).max(1.0);
    let mut jtj = Matrix3::zeros();
    for &mi in m {
        let j = jac_row(&t, mi);
        jtj += j * j.transpose();
    }
    let s2 = cost / dof;
    let p_stderr = jtj.try_inverse().map(|c| (c[(1, 1)] * s2).max(0.0).sqrt()).unwrap_or(f64::INFINITY);
    Ok(DecayFit { a: t[0], p: t[1], b: t[2], p_stderr, rms: (cost / m.len() as f64).sqrt() })
}

/// Ordinary least-squares line y = slope·x + intercept.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Fit("need at least two points".into()));
    }
    let a = DMatrix::from_fn(x.len(), 2, |i, j| if j == 0 { x[i] } else { 1.0 });
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let sol = svd.solve(&b, 1e-12).map_err(|e| Error::Fit(e.to_string()))?;
    let resid = &b - &a * &sol;
    let dof = (x.len() as f64 - 2.0).max(1.0);
    let s2 = resid.norm_squared() / dof;
    let cov = (a.transpose() * &a).try_inverse().unwrap_or_else(|| DMatrix::from_element(2, 2, f64::INFINITY));
    Ok(LineFit { slope: sol[0], intercept: sol[1], slope_stderr: (cov[(0, 0)] * s2).sqrt() })
}

/// Least-squares y = slope·x with no intercept.
pub fn fit_proportional(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Fit("need at least one point".into()));
    }
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all x are zero".into()));
    }
    let slope = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / sxx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a).powi(2)).sum();
    let dof = (x.len() as f64 - 1.0).max(1.0);
    Ok(LineFit { slope, intercept: 0.0, slope_stderr: (rss / dof / sxx).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn recovers_sinusoid() {
        let x: Vec<f64> = (0..61).map(|i| i as f64 * 0.25).collect();
        let y: Vec<f64> = x.iter().map(|&t| 0.5 - 0.4 * (2.0 * std::f64::consts::PI * 0.103 * t + 0.3).cos()).collect();
        let f = fit_sinusoid(&x, &y, 2.0).unwrap();
        assert!((f.frequency - 0.103).abs() < 1e-7, "{}", f.frequency);
        assert!((f.amplitude - 0.4).abs() < 1e-6);
        assert!(f.rms < 1e-8);
    }

    #[test]
    fn flat_data_gives_low_frequency() {
        let x: Vec<f64> = (0..61).map(|i| i as f64 * 0.25).collect();
        let y = vec![0.3; x.len()];
        let f = fit_sinusoid(&x, &y, 2.0).unwrap();
        assert!(f.rms < 1e-9);
        assert!(f.amplitude < 1e-6 || f.frequency < 0.01);
    }

    proptest! {
        #[test]
        fn decay_fit_round_trip(a in 0.3f64..0.8, p in 0.5f64..0.995, b in 0.0f64..0.3) {
            let m: Vec<f64> = [1, 2, 4, 8, 12, 16, 24, 32, 48, 64, 80, 100].iter().map(|&v| v as f64).collect();
            let y: Vec<f64> = m.iter().map(|&k| a * p.powf(k) + b).collect();
            let f = fit_decay(&m, &y, 0.25).unwrap();
            prop_assert!((f.p - p).abs() < 1e-6, "{} vs {}", f.p, p);
        }
    }

    #[test]
    fn line_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let l = fit_line(&x, &y).unwrap();
        assert!((l.slope - 2.0).abs() < 1e-12 && (l.intercept - 1.0).abs() < 1e-12);
        let p = fit_proportional(&x, &[0.0, 2.0, 4.0, 6.0]).unwrap();
        assert!((p.slope - 2.0).abs() < 1e-12 && p.slope_stderr < 1e-12);
    }

    #[test]
    fn constant_decay_data_is_p_one() {
        let f = fit_decay(&[1.0, 2.0, 5.0, 10.0], &[1.0; 4], 0.25).unwrap();
        assert_eq!((f.p, f.a, f.b), (1.0, 0.0, 1.0));
    }
}
