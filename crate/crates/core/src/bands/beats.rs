use std::f64::consts::PI;

use serde::Serialize;

use super::Periodic;
use crate::error::{Error, Result};
use crate::propagate::{self, Options, WaveState, WaveTrace};
use crate::roots::illinois;

/// `|D|` closer to 1 than this is treated as a zone edge.
const EDGE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct BeatReport {
    pub energy: f64,
    pub periods: usize,
    pub discriminant: f64,
    /// Largest `||lambda| - 1|` over both multipliers.
    pub modulus_defect: f64,
    /// Floquet phase per period, in `(0, pi)`.
    pub phase: f64,
    /// `2 pi / phase`, in periods.
    pub predicted_beat: f64,
    /// Beat period, in periods, from the autocorrelation of `strobe`.
    pub measured_beat: Option<f64>,
    pub beat_error: Option<f64>,
    /// The same estimate applied to `envelope`. In higher bands the maximum
    /// over a period is dominated by its second harmonic, so this can lock
    /// onto half the beat period; it is reported for inspection only.
    pub envelope_beat: Option<f64>,
    /// `psi` at the start of each period.
    pub strobe: Vec<f64>,
    /// Largest value of `psi` in each period.
    pub envelope: Vec<f64>,
    /// Largest `|psi|` in each period.
    pub amplitude: Vec<f64>,
    /// `max / min` of `amplitude`.
    pub amplitude_ratio: f64,
    pub bounded: bool,
}

/// Integrates the solution with `psi = 1, psi' = 0.5` at the cell start over
/// `periods` cells and studies how its amplitude is modulated from period to
/// period.
pub fn beating_envelope(p: &Periodic, energy: f64, periods: usize) -> Result<BeatReport> {
    if periods < 4 {
        return Err(Error::InvalidArgument("need at least 4 periods".into()));
    }
    if !p.is_real() {
        return Err(Error::InvalidArgument("beating analysis needs a real potential".into()));
    }
    let m = p.monodromy(energy)?;
    let d = m.discriminant().re;
    if (d.abs() - 1.0).abs() <= EDGE_SLACK {
        return Err(Error::DegenerateEdge { energy });
    }
    if d.abs() > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "E = {energy} lies in a forbidden zone (|D| = {})",
            d.abs()
        )));
    }
    let (lp, lm) = m.multipliers();
    let modulus_defect = (lp.norm() - 1.0).abs().max((lm.norm() - 1.0).abs());
    let phase = d.acos();
    let predicted_beat = 2.0 * PI / phase;

    let a = p.period();
    let opts = Options::with_h(p.h.min(a / 64.0));
    let t = propagate::integrate(
        p.hamiltonian().clone(),
        energy,
        0.0,
        a * periods as f64,
        &WaveState::scalar(1.0, 0.5),
        opts,
    )?;
    let (envelope, amplitude) = period_extrema(&t, a, periods);
    let amp_max = amplitude.iter().copied().fold(0.0, f64::max);
    let amp_min = amplitude.iter().copied().fold(f64::INFINITY, f64::min);
    let amplitude_ratio = amp_max / amp_min;
    let bounded = amplitude_ratio.is_finite() && amp_min > 0.0;

    let mut strobe = Vec::with_capacity(periods);
    for j in 0..periods {
        strobe.push(t.state_at(a * j as f64)?.psi[0].re);
    }
    let measured_beat = autocorrelation_period(&strobe);
    let envelope_beat = autocorrelation_period(&envelope);
    let beat_error = measured_beat.map(|b| (b - predicted_beat).abs() / predicted_beat);
    Ok(BeatReport {
        energy,
        periods,
        discriminant: d,
        modulus_defect,
        phase,
        predicted_beat,
        measured_beat,
        beat_error,
        envelope_beat,
        strobe,
        envelope,
        amplitude,
        amplitude_ratio,
        bounded,
    })
}

/// Per-period maximum of `psi` and of `|psi|`. Candidates are the samples
/// (spike cusps included) and the refined zeros of `psi'`.
fn period_extrema(t: &WaveTrace, a: f64, periods: usize) -> (Vec<f64>, Vec<f64>) {
    let mut hi = vec![f64::NEG_INFINITY; periods];
    let mut lo = vec![f64::INFINITY; periods];
    let tol = 1e-12 * a;
    let mut record = |x: f64, v: f64| {
        let j = (x / a).floor() as isize;
        for jj in [j - 1, j, j + 1] {
            if jj < 0 || jj as usize >= periods {
                continue;
            }
            let (l, r) = (jj as f64 * a - tol, (jj + 1) as f64 * a + tol);
            if x >= l && x <= r {
                let k = jj as usize;
                hi[k] = hi[k].max(v);
                lo[k] = lo[k].min(v);
            }
        }
    };
    for &(s, e) in &t.segments {
        for i in s..=e {
            record(t.x[i], t.psi[0][i].re);
        }
        for i in s..e {
            let (q0, q1) = (t.dpsi[0][i].re, t.dpsi[0][i + 1].re);
            if q0 == 0.0 || q0 * q1 >= 0.0 {
                continue;
            }
            let (p0, x0) = (t.psi[0][i].re, t.x[i]);
            let w = t.x[i + 1] - x0;
            let dstar = illinois(|dd| t.advance_real(s, e, x0, p0, q0, dd).1, 0.0, w, 0.0);
            let (v, _) = t.advance_real(s, e, x0, p0, q0, dstar);
            record(x0 + dstar, v);
        }
    }
    let amplitude = hi.iter().zip(&lo).map(|(h, l)| h.max(-l)).collect();
    (hi, amplitude)
}

/// Beat period of a sequence from the peaks of its autocorrelation: the
/// first peak sets a guess, later peaks near its multiples are refined by a
/// parabola and combined by a least-squares fit through the origin.
fn autocorrelation_period(signal: &[f64]) -> Option<f64> {
    let n = signal.len();
    let mean = signal.iter().sum::<f64>() / n as f64;
    let e: Vec<f64> = signal.iter().map(|v| v - mean).collect();
    let max_lag = n / 2;
    let r: Vec<f64> = (0..=max_lag + 1)
        .map(|l| {
            let m = n - l;
            (0..m).map(|j| e[j] * e[j + l]).sum::<f64>() / m as f64
        })
        .collect();
    if r[0] <= 0.0 {
        return None;
    }
    let is_peak = |l: usize| l >= 1 && l <= max_lag && r[l] >= r[l - 1] && r[l] >= r[l + 1] && r[l] > 0.0;
    let refine = |l: usize| {
        let (a, b, c) = (r[l - 1], r[l], r[l + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            l as f64 + 0.5 * (a - c) / den
        } else {
            l as f64
        }
    };
    // the first peak after the correlation has gone negative
    let first_neg = (1..=max_lag).find(|&l| r[l] < 0.0)?;
    let l1 = (first_neg..=max_lag).find(|&l| is_peak(l))?;
    let guess = refine(l1);
    let mut num = guess;
    let mut den = 1.0;
    let mut mult = 2.0;
    while mult * guess + 1.0 <= max_lag as f64 {
        let centre = mult * guess;
        let window = (guess / 3.0).max(1.0);
        let best = (1..=max_lag)
            .filter(|&l| (l as f64 - centre).abs() <= window && is_peak(l))
            .max_by(|&x, &y| r[x].total_cmp(&r[y]));
        if let Some(l) = best {
            num += mult * refine(l);
            den += mult * mult;
        }
        mult += 1.0;
    }
    Some(num / den)
}
