use rayon::prelude::*;
use serde::Serialize;

use super::{real_multipliers, Periodic, Zone};
use crate::error::{Error, Result};
use crate::propagate::{self, Options, WaveState};
use crate::roots::bisect;

/// Interior scan points used to bracket roots.
pub const TAMM_SCAN_POINTS: usize = 1000;

#[derive(Debug, Clone, Serialize)]
pub struct TammReport {
    pub gap_lower: f64,
    pub gap_upper: f64,
    /// Wall position relative to the cell start.
    pub wall_offset: f64,
    pub roots: Vec<f64>,
    /// `(E, f(E))` over the interior scan.
    pub scan: Vec<(f64, f64)>,
    /// Energies where the `psi'`-positive convention failed and `psi`-positive
    /// was used instead.
    pub convention_switches: Vec<f64>,
    /// Sign changes that did not converge to a zero, e.g. across a
    /// convention switch.
    pub discontinuities: Vec<f64>,
    pub edge_values: (f64, f64),
}

/// `psi` component of the unit decaying Floquet eigenvector at the wall,
/// signed so that the `psi'` component is positive. The flag reports a
/// switch to the `psi`-positive convention.
fn decaying_component(p: &Periodic, offset: f64, energy: f64) -> Result<(f64, bool)> {
    let m = p.monodromy_from(offset, energy)?;
    let d = m.discriminant().re;
    let lm = if d.abs() >= 1.0 { real_multipliers(d).1.re } else { d };
    let v = m.eigenvector(num_complex::Complex64::new(lm, 0.0));
    let (a, b) = (v[0].re, v[1].re);
    let n = (a * a + b * b).sqrt();
    let (a, b) = (a / n, b / n);
    if b.abs() > 1e-8 {
        Ok((a * b.signum(), false))
    } else {
        Ok((a.abs(), true))
    }
}

/// Surface states of the half line `x > wall` bounded by an impenetrable
/// wall: energies in the open gap where the decaying solution vanishes at
/// the wall.
pub fn tamm_search(p: &Periodic, gap: &Zone, wall_offset: f64) -> Result<TammReport> {
    if !(gap.upper > gap.lower) {
        return Err(Error::InvalidArgument(format!(
            "gap [{}, {}] has no interior",
            gap.lower, gap.upper
        )));
    }
    if !p.is_real() {
        return Err(Error::InvalidArgument("surface states need a real potential".into()));
    }
    let (lo, hi) = (gap.lower, gap.upper);
    let n = TAMM_SCAN_POINTS;
    let grid: Vec<f64> = (1..=n).map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64).collect();
    let vals: Vec<(f64, bool)> = grid
        .par_iter()
        .map(|&e| decaying_component(p, wall_offset, e))
        .collect::<Result<_>>()?;

    let f = |e: f64| decaying_component(p, wall_offset, e).map(|v| v.0).unwrap_or(f64::NAN);
    let mut roots = Vec::new();
    let mut discontinuities = Vec::new();
    for i in 0..n - 1 {
        let (a, b) = (vals[i].0, vals[i + 1].0);
        if a == 0.0 {
            roots.push(grid[i]);
            continue;
        }
        if a * b >= 0.0 {
            continue;
        }
        let r = bisect(f, grid[i], grid[i + 1], 0.0);
        let scale = a.abs().max(b.abs());
        if f(r).abs() <= 1e-6 * scale.max(1e-3) {
            roots.push(r);
        } else {
            discontinuities.push(r);
        }
    }
    let convention_switches = grid
        .iter()
        .zip(&vals)
        .filter(|(_, v)| v.1)
        .map(|(&e, _)| e)
        .collect();
    let edge_values = (f(lo), f(hi));
    Ok(TammReport {
        gap_lower: lo,
        gap_upper: hi,
        wall_offset,
        roots,
        scan: grid.iter().zip(&vals).map(|(&e, v)| (e, v.0)).collect(),
        convention_switches,
        discontinuities,
        edge_values,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TammVerification {
    pub energy: f64,
    pub periods: usize,
    /// `|(psi, psi')|` at the wall and after each period.
    pub norms: Vec<f64>,
    /// `|lambda_minus|`.
    pub expected_ratio: f64,
    /// Largest relative deviation of the per-period ratio from
    /// `|lambda_minus|` over the first half of the run.
    pub ratio_error: f64,
    /// No sample exceeds the largest `|psi|` of the first period.
    pub bounded: bool,
    /// The norm shrinks every period.
    pub decays: bool,
}

/// Integrates `psi = 0, psi' = 1` from the wall over `periods` cells and
/// checks that the solution decays like the Floquet multiplier.
pub fn verify_tamm(p: &Periodic, energy: f64, wall_offset: f64, periods: usize) -> Result<TammVerification> {
    let a = p.period();
    let m = p.monodromy_from(wall_offset, energy)?;
    let d = m.discriminant().re;
    if d.abs() <= 1.0 {
        return Err(Error::NotAGap {
            energy,
            abs_discriminant: d.abs(),
        });
    }
    let expected_ratio = real_multipliers(d).1.re.abs();
    let x1 = wall_offset + a * periods as f64;
    let t = propagate::integrate(
        p.hamiltonian().clone(),
        energy,
        wall_offset,
        x1,
        &WaveState::scalar(0.0, 1.0),
        Options::with_h(p.h.min(a / 64.0)),
    )?;
    let mut norms = Vec::with_capacity(periods + 1);
    for j in 0..=periods {
        let s = t.state_at(wall_offset + a * j as f64)?;
        norms.push((s.psi[0].norm_sqr() + s.dpsi[0].norm_sqr()).sqrt());
    }
    let ratio_error = norms
        .windows(2)
        .take(periods / 2)
        .map(|w| (w[1] / w[0] - expected_ratio).abs() / expected_ratio)
        .fold(0.0, f64::max);
    let first_max = t
        .x
        .iter()
        .zip(&t.psi[0])
        .filter(|(&x, _)| x <= wall_offset + a)
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    let bounded = t.psi[0].iter().all(|z| z.norm() <= first_max * (1.0 + 1e-12));
    let decays = norms.windows(2).all(|w| w[1] < w[0]);
    Ok(TammVerification {
        energy,
        periods,
        norms,
        expected_ratio,
        ratio_error,
        bounded,
        decays,
    })
}
