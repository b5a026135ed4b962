use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use super::{Periodic, Zone};
use crate::error::{Error, Result};
use crate::propagate::{self, find_knots, Options, WaveState, WaveTrace};

/// `|D|` may fall short of 1 by this much and still count as a gap edge.
const EDGE_SLACK: f64 = 1e-8;

/// Two fundamental solutions in a forbidden zone.
#[derive(Debug, Clone)]
pub struct GapSolutionPair {
    pub energy: f64,
    pub offset: f64,
    pub periods: usize,
    pub discriminant: f64,
    /// `|lambda_plus| >= 1 >= |lambda_minus|`; both real and of the sign of
    /// `D` inside a gap.
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Starts from the eigenvector of `lambda_plus` at `offset`.
    pub growing: WaveTrace,
    /// Integrated backward from `offset + n a`, starting on the eigenvector
    /// of `lambda_minus`.
    pub decaying: WaveTrace,
    pub checks: GapChecks,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapChecks {
    /// Largest relative deviation of the state after each period from
    /// `lambda` times the state before it.
    pub ratio_error_growing: f64,
    pub ratio_error_decaying: f64,
    /// Relative deviation of the total growth over all periods from
    /// `lambda_plus^n`.
    pub total_growth_error: f64,
    /// Largest distance between a knot shifted by one period and the nearest
    /// knot, over both solutions.
    pub knot_shift_error: f64,
    pub knots_per_period: usize,
    pub passed: bool,
}

/// Forbidden-zone fundamental solutions of a real lattice at `energy`, over
/// `periods` cells starting at `offset`.
pub fn gap_solutions(p: &Periodic, energy: f64, periods: usize, offset: f64) -> Result<GapSolutionPair> {
    if periods == 0 {
        return Err(Error::InvalidArgument("need at least one period".into()));
    }
    let m = p.monodromy_from(offset, energy)?;
    let d = m.discriminant().re;
    if d.abs() < 1.0 - EDGE_SLACK || !p.is_real() {
        return Err(Error::NotAGap {
            energy,
            abs_discriminant: d.abs(),
        });
    }
    let r = (d * d - 1.0).max(0.0).sqrt();
    let lp = d + d.signum() * r;
    let lm = 1.0 / lp;
    let a = p.period();
    let x_end = offset + a * periods as f64;
    let opts = Options::with_h(p.h.min(a / 64.0));

    let real_vec = |l: f64| {
        let v = m.eigenvector(C64::new(l, 0.0));
        // real eigenvector with a positive leading nonzero entry
        let (mut a, mut b) = (v[0].re, v[1].re);
        if a.abs() < 1e-300 && b.abs() < 1e-300 {
            a = v[0].im;
            b = v[1].im;
        }
        let s = if a.abs() > 1e-12 { a.signum() } else { b.signum() };
        let n = (a * a + b * b).sqrt();
        WaveState::scalar(s * a / n, s * b / n)
    };

    let ham = p.hamiltonian().clone();
    let growing = propagate::integrate(ham.clone(), energy, offset, x_end, &real_vec(lp), opts)?;
    let decaying = propagate::integrate(ham, energy, x_end, offset, &real_vec(lm), opts)?;

    let ratio = |t: &WaveTrace, l: f64| -> Result<f64> {
        let mut worst: f64 = 0.0;
        let mut prev = t.state_at(offset)?;
        for j in 1..=periods {
            let next = t.state_at(offset + a * j as f64)?;
            let num = ((next.psi[0] - prev.psi[0] * l).norm_sqr() + (next.dpsi[0] - prev.dpsi[0] * l).norm_sqr()).sqrt();
            let den = l.abs() * (prev.psi[0].norm_sqr() + prev.dpsi[0].norm_sqr()).sqrt();
            worst = worst.max(num / den);
            prev = next;
        }
        Ok(worst)
    };
    let ratio_error_growing = ratio(&growing, lp)?;
    let ratio_error_decaying = ratio(&decaying, lm)?;
    let s0 = growing.state(0);
    let s1 = growing.state(growing.len() - 1);
    let norm = |s: &WaveState| (s.psi[0].norm_sqr() + s.dpsi[0].norm_sqr()).sqrt();
    let total = norm(&s1) / norm(&s0);
    let want = lp.abs().powi(periods as i32);
    let total_growth_error = (total - want).abs() / want;

    let (shift_g, per_g) = knot_shift(&find_knots(&growing, 0)?, offset, x_end, a);
    let (shift_d, _) = knot_shift(&find_knots(&decaying, 0)?, offset, x_end, a);
    let knot_shift_error = shift_g.max(shift_d);
    let passed = ratio_error_growing < 1e-6 && ratio_error_decaying < 1e-6 && knot_shift_error < 1e-6;

    Ok(GapSolutionPair {
        energy,
        offset,
        periods,
        discriminant: d,
        lambda_plus: lp,
        lambda_minus: lm,
        growing,
        decaying,
        checks: GapChecks {
            ratio_error_growing,
            ratio_error_decaying,
            total_growth_error,
            knot_shift_error,
            knots_per_period: per_g,
            passed,
        },
    })
}

/// Largest distance from `k + a` to the nearest knot, over knots `k` whose
/// shifted image lies inside the run, and the typical knot count per period.
fn knot_shift(knots: &[f64], x0: f64, x1: f64, a: f64) -> (f64, usize) {
    let tol = 1e-9 * a;
    let mut worst: f64 = 0.0;
    for &k in knots {
        let target = k + a;
        if target > x1 - tol || k < x0 + tol {
            continue;
        }
        let i = knots.partition_point(|&v| v < target);
        let mut best = f64::INFINITY;
        for j in [i.saturating_sub(1), i.min(knots.len() - 1)] {
            best = best.min((knots[j] - target).abs());
        }
        worst = worst.max(best);
    }
    let per = knots.iter().filter(|&&k| k >= x0 + tol && k < x0 + a + tol).count();
    (worst, per)
}

/// Integrals over one bump, the stretch between consecutive knots.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Bump {
    pub start: f64,
    pub end: f64,
    pub length: f64,
    pub int_psi2: f64,
    pub int_dpsi2: f64,
    /// `int (E - V) psi^2`, spikes included.
    pub int_kinetic: f64,
    /// `int (E - V) psi^2 / int psi^2`.
    pub avg_kinetic: f64,
    /// `|int_kinetic - int_dpsi2| / int_dpsi2`.
    pub identity_defect: f64,
}

/// Per-bump integrals of a real scalar trace by composite Simpson between
/// samples, with exact midpoints. Spikes inside a bump add `-g psi^2` to
/// the kinetic integral.
pub fn bump_metrics(t: &WaveTrace) -> Result<Vec<Bump>> {
    if t.channels() != 1 {
        return Err(Error::InvalidArgument("bump metrics need a scalar trace".into()));
    }
    if t.log_scale.is_some() {
        return Err(Error::InvalidArgument("bump metrics need an unscaled trace".into()));
    }
    let knots = find_knots(t, 0)?;
    if knots.len() < 2 {
        return Err(Error::NoBumps { knots: knots.len() });
    }
    let ham = t.hamiltonian();
    let e = t.energy;

    // nodes: every sample plus the knots, in order; spikes show up as
    // repeated x with a derivative jump
    let mut bumps = Vec::with_capacity(knots.len() - 1);
    let mut acc = [0.0f64; 3];
    let mut k = 0usize;
    let mut started = false;

    for &(s, en) in &t.segments {
        let (xa, xb) = (t.x[s], t.x[en]);
        let constant = ham.constant_on(xa, xb);
        let kin = |x: f64| -> f64 {
            match &constant {
                Some(a) => e - a[(0, 0)].re,
                None => {
                    let mut buf = [C64::new(0.0, 0.0)];
                    ham.fill_matrix(x, &mut buf);
                    e - buf[0].re
                }
            }
        };
        // spike at the start of this piece: jump relative to the previous sample
        if s > 0 && t.x[s - 1] == t.x[s] && started && k < knots.len() {
            let jump = t.dpsi[0][s].re - t.dpsi[0][s - 1].re;
            acc[2] -= t.psi[0][s].re * jump;
        }
        let mut nodes: Vec<(f64, f64, f64)> = (s..=en).map(|i| (t.x[i], t.psi[0][i].re, t.dpsi[0][i].re)).collect();
        for &kx in knots.iter().filter(|&&kx| kx > xa && kx < xb) {
            let st = t.state_at(kx)?;
            nodes.push((kx, 0.0, st.dpsi[0].re));
        }
        nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
        nodes.dedup_by(|a, b| (a.0 - b.0).abs() <= 1e-13 * (1.0 + a.0.abs()));

        for w in nodes.windows(2) {
            let (u, pu, qu) = w[0];
            let (v, pv, qv) = w[1];
            while k < knots.len() && knots[k] <= u + 1e-13 * (1.0 + u.abs()) {
                if started {
                    finish(&mut bumps, &mut acc, knots[k - 1], knots[k]);
                }
                started = true;
                k += 1;
            }
            if !started || k >= knots.len() {
                continue;
            }
            let mid = 0.5 * (u + v);
            let (pm, qm) = t.advance_real(s, en, u, pu, qu, mid - u);
            let h6 = (v - u) / 6.0;
            acc[0] += h6 * (pu * pu + 4.0 * pm * pm + pv * pv);
            acc[1] += h6 * (qu * qu + 4.0 * qm * qm + qv * qv);
            acc[2] += h6 * (kin(u) * pu * pu + 4.0 * kin(mid) * pm * pm + kin(v) * pv * pv);
        }
    }
    while k < knots.len() {
        if started {
            finish(&mut bumps, &mut acc, knots[k - 1], knots[k]);
        }
        started = true;
        k += 1;
    }
    Ok(bumps)
}

fn finish(bumps: &mut Vec<Bump>, acc: &mut [f64; 3], start: f64, end: f64) {
    let [p2, d2, kin] = *acc;
    bumps.push(Bump {
        start,
        end,
        length: end - start,
        int_psi2: p2,
        int_dpsi2: d2,
        int_kinetic: kin,
        avg_kinetic: kin / p2,
        identity_defect: (kin - d2).abs() / d2.abs(),
    });
    *acc = [0.0; 3];
}

/// One energy of a permanent-resonance table.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceRow {
    pub energy: f64,
    pub discriminant: f64,
    /// Signed multiplier of the growing solution.
    pub multiplier: f64,
    /// `|lambda_plus|`, the growth per period.
    pub growth: f64,
    pub knots_per_period: usize,
    pub knot_spacing_mean: f64,
    /// Largest distance between a knot shifted by `a` and the nearest knot.
    pub knot_shift_error: f64,
    pub ratio_error: f64,
    pub avg_kinetic_mean: f64,
    pub avg_kinetic_min: f64,
    pub avg_kinetic_max: f64,
    pub bump_identity_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceReport {
    pub gap_lower: f64,
    pub gap_upper: f64,
    pub period: f64,
    pub offset: f64,
    pub periods: usize,
    pub rows: Vec<ResonanceRow>,
    /// Knot pattern repeats with the lattice period at every sampled energy.
    pub knots_translate: bool,
    /// `|lambda_plus| > 1 + 1e-6` at every interior energy.
    pub interior_growth: bool,
    /// `|lambda_plus| - 1 < 1e-4` at both edges.
    pub edge_growth: bool,
    /// Spread of the bump-averaged kinetic energy across the gap, reported
    /// rather than asserted.
    pub avg_kinetic_spread: f64,
}

/// Samples `m >= 2` energies across a gap, edges included, and tabulates knot
/// spacing, growth factor and bump-averaged kinetic energy of the growing
/// solution.
pub fn permanent_resonance_report(
    p: &Periodic,
    gap: &Zone,
    m: usize,
    periods: usize,
    offset: f64,
) -> Result<ResonanceReport> {
    if m < 2 {
        return Err(Error::InvalidArgument("need at least 2 energy samples".into()));
    }
    if !(gap.upper > gap.lower) {
        return Err(Error::InvalidArgument(format!(
            "gap [{}, {}] has no interior",
            gap.lower, gap.upper
        )));
    }
    let a = p.period();
    let energies: Vec<f64> = (0..m)
        .map(|i| gap.lower + (gap.upper - gap.lower) * i as f64 / (m - 1) as f64)
        .collect();
    let rows: Vec<ResonanceRow> = energies
        .par_iter()
        .map(|&e| {
            let pair = gap_solutions(p, e, periods, offset)?;
            let knots = find_knots(&pair.growing, 0)?;
            let spacing_mean = if knots.len() > 1 {
                (knots[knots.len() - 1] - knots[0]) / (knots.len() - 1) as f64
            } else {
                f64::NAN
            };
            let bumps = bump_metrics(&pair.growing)?;
            let avg: Vec<f64> = bumps.iter().map(|b| b.avg_kinetic).collect();
            Ok(ResonanceRow {
                energy: e,
                discriminant: pair.discriminant,
                multiplier: pair.lambda_plus,
                growth: pair.lambda_plus.abs(),
                knots_per_period: pair.checks.knots_per_period,
                knot_spacing_mean: spacing_mean,
                knot_shift_error: pair.checks.knot_shift_error,
                ratio_error: pair.checks.ratio_error_growing,
                avg_kinetic_mean: avg.iter().sum::<f64>() / avg.len() as f64,
                avg_kinetic_min: avg.iter().copied().fold(f64::INFINITY, f64::min),
                avg_kinetic_max: avg.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                bump_identity_max: bumps.iter().map(|b| b.identity_defect).fold(0.0, f64::max),
            })
        })
        .collect::<Result<_>>()?;

    let knots_translate = rows.iter().all(|r| r.knot_shift_error < 1e-5 * a);
    let interior_growth = rows[1..m - 1].iter().all(|r| r.growth > 1.0 + 1e-6);
    let edge_growth = (rows[0].growth - 1.0).abs() < 1e-4 && (rows[m - 1].growth - 1.0).abs() < 1e-4;
    let means: Vec<f64> = rows.iter().map(|r| r.avg_kinetic_mean).collect();
    let avg_kinetic_spread = means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - means.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ResonanceReport {
        gap_lower: gap.lower,
        gap_upper: gap.upper,
        period: a,
        offset,
        periods,
        rows,
        knots_translate,
        interior_growth,
        edge_growth,
        avg_kinetic_spread,
    })
}
