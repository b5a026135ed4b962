use num_complex::Complex64 as C64;
use serde::Serialize;

use super::engine;
use super::trace::WaveTrace;
use crate::error::{Error, Result};

/// Spacing the finite-difference stencil aims for; smaller spacings let
/// roundoff dominate the second difference.
const FD_SPACING: f64 = 2.5e-3;

/// Zeros of channel `a`, in increasing order.
///
/// Sign changes between neighbouring samples are refined by Illinois
/// iteration on the propagated solution (closed form on constant pieces).
/// Double zeros, where the derivative vanishes too, are dropped.
pub fn find_knots(t: &WaveTrace, a: usize) -> Result<Vec<f64>> {
    if a >= t.channels() {
        return Err(Error::InvalidArgument(format!("no channel {a}")));
    }
    if !t.is_real_channel(a) {
        return Err(Error::KnotsUndefined);
    }
    let psi = &t.psi[a];
    let dpsi = &t.dpsi[a];
    let big = psi.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let dbig = dpsi.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let tangent_tol = 1e-12 * dbig.max(big);
    let zero_tol = 1e-12 * big;

    let mut knots: Vec<f64> = Vec::new();
    let mut push = |x: f64, slope: f64| {
        if slope.abs() <= tangent_tol {
            return;
        }
        if let Some(&last) = knots.last() {
            if (x - last).abs() <= super::snap_tol(x) {
                return;
            }
        }
        knots.push(x);
    };

    for &(s, e) in &t.segments {
        for i in s..=e {
            if psi[i].re.abs() <= zero_tol {
                push(t.x[i], dpsi[i].re);
            }
        }
        for i in s..e {
            let (f0, f1) = (psi[i].re, psi[i + 1].re);
            if f0 * f1 >= 0.0 || f0.abs() <= zero_tol || f1.abs() <= zero_tol {
                continue;
            }
            let (x, slope) = refine(t, a, s, e, i);
            push(x, slope);
        }
    }
    knots.sort_by(f64::total_cmp);
    Ok(knots)
}

/// Illinois iteration for the zero between samples `i` and `i + 1`.
fn refine(t: &WaveTrace, a: usize, s: usize, e: usize, i: usize) -> (f64, f64) {
    let st = t.state(i);
    let eval = |d: f64| {
        let (p, q) = engine::advance_within(&t.ham, t.energy, t.x[s], t.x[e], t.x[i], &st.psi, &st.dpsi, d);
        (p[a].re, q[a].re)
    };
    let w = t.x[i + 1] - t.x[i];
    let (mut lo, mut hi) = (0.0, w);
    let (mut flo, mut fhi) = (t.psi[a][i].re, t.psi[a][i + 1].re);
    let scale = flo.abs().max(fhi.abs());
    let mut side = 0i8;
    let mut best = if flo.abs() < fhi.abs() { lo } else { hi };
    for _ in 0..200 {
        let mid = (lo * fhi - hi * flo) / (fhi - flo);
        let mid = if mid > lo && mid < hi { mid } else { 0.5 * (lo + hi) };
        let (fm, _) = eval(mid);
        best = mid;
        if fm.abs() <= 1e-15 * scale || hi - lo <= 4.0 * f64::EPSILON * (t.x[i].abs() + w) {
            break;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            fhi = fm;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    let (_, slope) = eval(best);
    (t.x[i] + best, slope)
}

/// Local behaviour of the curvature relative to the axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bending {
    /// `E > V`: the wave curves back toward the axis.
    TowardAxis,
    /// `E < V`: the wave curves away from the axis.
    FromAxis,
    /// At a knot or where `E = V`.
    Neutral,
}

#[derive(Debug, Clone, Serialize)]
pub struct BendingSample {
    pub x: f64,
    pub kinetic: f64,
    pub psi: f64,
    pub class: Bending,
    /// Whether the sign of `-psi'' psi` from finite differences agrees with
    /// the classification. `None` where no stencil fits.
    pub curvature_agrees: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// `max |psi'' - (A - E) psi|` over stencil centres.
    pub max_abs: f64,
    /// `max_abs` divided by `max|psi| * max(1, max|E - V|)`.
    pub relative: f64,
    pub points_checked: usize,
    /// Per channel, per sample; uses the diagonal `E - eps_a - V_aa`.
    pub bending: Vec<Vec<BendingSample>>,
}

/// Five-point second differences of every channel, at the samples where a
/// stencil with spacing near [`FD_SPACING`] fits inside one smooth piece.
pub(crate) fn second_derivatives(t: &WaveTrace) -> Vec<Vec<Option<C64>>> {
    let n = t.channels();
    let mut fd: Vec<Vec<Option<C64>>> = vec![vec![None; t.len()]; n];
    for &(s, e) in &t.segments {
        if e <= s {
            continue;
        }
        let d0 = (t.x[e] - t.x[s]) / (e - s) as f64;
        let stride = ((FD_SPACING / d0).round() as usize).max(1);
        if e - s < 4 * stride {
            continue;
        }
        let d = d0 * stride as f64;
        for i in s + 2 * stride..=e - 2 * stride {
            if let Some(l) = &t.log_scale {
                if l[i - 2 * stride] != l[i + 2 * stride] {
                    continue;
                }
            }
            for r in 0..n {
                let p = &t.psi[r];
                let second = (-p[i - 2 * stride] + p[i - stride] * 16.0 - p[i] * 30.0 + p[i + stride] * 16.0
                    - p[i + 2 * stride])
                    / (12.0 * d * d);
                fd[r][i] = Some(second);
            }
        }
    }
    fd
}

/// Substitutes the trace back into the equation with five-point finite
/// differences inside each smooth piece, and classifies bending per sample.
pub fn residual_check(t: &WaveTrace) -> ResidualReport {
    let n = t.channels();
    let ham = &t.ham;
    let mut a = vec![C64::new(0.0, 0.0); n * n];
    let mut max_abs: f64 = 0.0;
    let mut points = 0usize;
    let mut max_kin: f64 = 0.0;
    let fd = second_derivatives(t);

    for i in 0..t.len() {
        if fd[0][i].is_none() {
            continue;
        }
        ham.fill_matrix(t.x[i], &mut a);
        for r in 0..n {
            let mut rhs = -t.psi[r][i] * t.energy;
            for b in 0..n {
                rhs += a[r * n + b] * t.psi[b][i];
            }
            if let Some(second) = fd[r][i] {
                max_abs = max_abs.max((second - rhs).norm());
            }
        }
        points += 1;
    }

    let mut bending = Vec::with_capacity(n);
    for r in 0..n {
        let mut row = Vec::with_capacity(t.len());
        for i in 0..t.len() {
            ham.fill_matrix(t.x[i], &mut a);
            let kinetic = t.energy - a[r * n + r].re;
            max_kin = max_kin.max(kinetic.abs());
            let psi = t.psi[r][i].re;
            let class = if psi == 0.0 || kinetic == 0.0 {
                Bending::Neutral
            } else if kinetic > 0.0 {
                Bending::TowardAxis
            } else {
                Bending::FromAxis
            };
            let curvature_agrees = fd[r][i].map(|second| {
                let bend = -second.re * psi;
                match class {
                    Bending::TowardAxis => bend > 0.0,
                    Bending::FromAxis => bend < 0.0,
                    Bending::Neutral => true,
                }
            });
            row.push(BendingSample {
                x: t.x[i],
                kinetic,
                psi,
                class,
                curvature_agrees,
            });
        }
        bending.push(row);
    }

    let big = t
        .psi
        .iter()
        .flatten()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let denom = big * max_kin.max(1.0);
    ResidualReport {
        max_abs,
        relative: if denom > 0.0 { max_abs / denom } else { max_abs },
        points_checked: points,
        bending,
    }
}
