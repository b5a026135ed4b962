//! Complex periodic potentials `V_R + i t V_I`, both as a complex scalar
//! equation and as two coupled real equations for `psi = R + i I`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bands::{zone_edges, Monodromy, Periodic};
use crate::error::{Error, Result};
use crate::model::PotentialSpec;
use crate::propagate::{self, Hamiltonian, Options, WaveState, WaveTrace, DEFAULT_H};
use crate::roots::bisect;

/// `||lambda| - 1|` below this puts an energy in the spectrum.
pub const UNIT_CIRCLE_TOL: f64 = 1e-8;
/// Near `D = +-1` the multipliers are too sensitive; a discriminant this
/// close is classified by `D` itself.
const EDGE_BAND: f64 = 1e-6;
const EDGE_D_TOL: f64 = 1e-10;
/// Energy tolerance of the gap boundaries.
pub const BOUNDARY_TOL: f64 = 1e-10;
/// Probes used to re-find a gap after `t` moved.
const GAP_PROBES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexLattice {
    pub real: PotentialSpec,
    pub imag: PotentialSpec,
    /// Multiplier of the imaginary part.
    pub t: f64,
}

impl ComplexLattice {
    pub fn new(real: PotentialSpec, imag: PotentialSpec, t: f64) -> Result<Self> {
        let cl = Self { real, imag, t };
        cl.period()?;
        Ok(cl)
    }

    /// `amplitude * e^{i k x}` as `amplitude (cos kx + i sin kx)`.
    pub fn single_harmonic(amplitude: f64, wavenumber: f64) -> Result<Self> {
        Self::new(
            PotentialSpec::cosine(amplitude, wavenumber, 0.0),
            PotentialSpec::cosine(amplitude, wavenumber, -FRAC_PI_2),
            1.0,
        )
    }

    pub fn with_t(&self, t: f64) -> Self {
        Self {
            t,
            ..self.clone()
        }
    }

    /// Common period of both parts; a vanishing part adopts the other's.
    pub fn period(&self) -> Result<f64> {
        for (name, p) in [("real", &self.real), ("imag", &self.imag)] {
            p.validate()?;
            if !p.is_real() {
                return Err(Error::InvalidArgument(format!("{name} part must be real-valued")));
            }
        }
        if !self.t.is_finite() {
            return Err(Error::InvalidArgument(format!("t = {} not finite", self.t)));
        }
        match (self.real.period(), self.imag.period()) {
            (Some(a), Some(b)) if (a - b).abs() <= 1e-12 * a.max(b) => Ok(a),
            (Some(a), Some(b)) => Err(Error::InvalidArgument(format!(
                "real and imaginary parts have periods {a} and {b}"
            ))),
            (Some(a), None) if self.imag == PotentialSpec::zero() => Ok(a),
            (None, Some(b)) if self.real == PotentialSpec::zero() => Ok(b),
            _ => Err(Error::InvalidArgument("both parts must be periodic".into())),
        }
    }

    /// Scalar complex Hamiltonian `V_R + i t V_I`.
    pub fn hamiltonian(&self) -> Hamiltonian {
        Hamiltonian::from_terms(
            vec![0.0],
            vec![vec![vec![
                (C64::new(1.0, 0.0), self.real.clone()),
                (C64::new(0.0, self.t), self.imag.clone()),
            ]]],
            Vec::new(),
        )
    }

    pub fn periodic(&self) -> Result<Periodic> {
        Periodic::from_hamiltonian(self.hamiltonian(), self.period()?)
    }
}

/// The two-channel real system for `(R, I)`:
/// `R'' = (V_R - E) R - V_I I`, `I'' = (V_R - E) I + V_I R`.
pub fn ri_hamiltonian(v_r: &PotentialSpec, v_i: &PotentialSpec) -> Hamiltonian {
    let one = C64::new(1.0, 0.0);
    Hamiltonian::from_terms(
        vec![0.0, 0.0],
        vec![
            vec![vec![(one, v_r.clone())], vec![(-one, v_i.clone())]],
            vec![vec![(one, v_i.clone())], vec![(one, v_r.clone())]],
        ],
        Vec::new(),
    )
}

/// Integrates the real and imaginary parts of `psi` as two coupled real
/// channels. `init` holds `(R, I)` and `(R', I')` at `x0`.
pub fn ri_integrate(
    v_r: &PotentialSpec,
    v_i: &PotentialSpec,
    energy: f64,
    init: &WaveState,
    x0: f64,
    x1: f64,
    h: f64,
) -> Result<WaveTrace> {
    for p in [v_r, v_i] {
        p.validate()?;
        if !p.is_real() {
            return Err(Error::InvalidArgument("both parts must be real-valued".into()));
        }
    }
    if init.channels() != 2 || init.psi.iter().chain(&init.dpsi).any(|z| z.im != 0.0) {
        return Err(Error::InvalidArgument("init must hold real (R, I) values".into()));
    }
    if !(x0 < x1) {
        return Err(Error::InvalidArgument(format!("need x0 < x1, got [{x0}, {x1}]")));
    }
    propagate::integrate(
        Arc::new(ri_hamiltonian(v_r, v_i)),
        energy,
        x0,
        x1,
        init,
        Options::with_h(h),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplexBandPoint {
    pub energy: f64,
    pub monodromy: Monodromy,
    pub discriminant: C64,
    pub det_defect: f64,
    pub lambda_plus: C64,
    pub lambda_minus: C64,
    pub in_spectrum: bool,
    /// Classified from `D` because it sat within the edge band of `+-1`.
    pub edge_rule: bool,
}

/// Monodromy of the complex lattice at a real energy with its multipliers
/// and spectrum membership.
pub fn complex_monodromy(cl: &ComplexLattice, energy: f64) -> Result<ComplexBandPoint> {
    classify(&cl.periodic()?, energy)
}

fn classify(p: &Periodic, energy: f64) -> Result<ComplexBandPoint> {
    let m = p.monodromy(energy)?;
    let d = m.discriminant();
    let (lp, lm) = m.multipliers();
    let edge_rule = (d * d - 1.0).norm() < EDGE_BAND;
    let in_spectrum = if edge_rule {
        d.im.abs() <= EDGE_D_TOL && d.re.abs() <= 1.0 + EDGE_D_TOL
    } else {
        (lp.norm() - 1.0).abs().min((lm.norm() - 1.0).abs()) < UNIT_CIRCLE_TOL
    };
    Ok(ComplexBandPoint {
        energy,
        monodromy: m,
        discriminant: d,
        det_defect: (m.det() - 1.0).norm(),
        lambda_plus: lp,
        lambda_minus: lm,
        in_spectrum,
        edge_rule,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapScanOptions {
    /// Energy range of the real scan that picks the gap at `t = 0`.
    pub emin: f64,
    pub emax: f64,
    pub h: f64,
}

impl Default for GapScanOptions {
    fn default() -> Self {
        Self {
            emin: -2.0,
            emax: 20.0,
            h: DEFAULT_H,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GapWidthRow {
    pub t: f64,
    pub lower: f64,
    pub upper: f64,
    pub width: f64,
    /// The gap has closed and the neighbouring bands merged.
    pub merged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapWidthTable {
    pub gap_index: usize,
    /// In the order of the input `t` grid.
    pub rows: Vec<GapWidthRow>,
    /// Widths never grow as `|t|` increases away from 0.
    pub monotone_shrink: bool,
}

/// Follows gap number `gap_index` (0-based, interior gaps of the real scan
/// at `t = 0`) of the family `V_R + i t V_I` along the `t` grid.
pub fn gap_width_scan(
    family: &ComplexLattice,
    ts: &[f64],
    gap_index: usize,
    opts: &GapScanOptions,
) -> Result<GapWidthTable> {
    if !ts.iter().any(|&t| t == 0.0) {
        return Err(Error::InvalidArgument("t grid must include 0".into()));
    }
    if ts.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("t grid not finite".into()));
    }
    let base = family.with_t(0.0).periodic()?.with_h(opts.h);
    let zones = zone_edges(&base, opts.emin, opts.emax, None)?;
    let gap = zones
        .interior_gaps()
        .get(gap_index)
        .copied()
        .filter(|g| g.width() > 0.0)
        .ok_or_else(|| {
            Error::NoGapToTrack(format!(
                "no open gap #{gap_index} in [{}, {}] at t = 0",
                opts.emin, opts.emax
            ))
        })?;

    let mut order: Vec<usize> = (0..ts.len()).collect();
    order.sort_by(|&i, &j| ts[i].abs().total_cmp(&ts[j].abs()));
    let mut rows: Vec<Option<GapWidthRow>> = vec![None; ts.len()];
    for side in [1.0, -1.0] {
        let mut prev = (gap.lower, gap.upper);
        for &i in order.iter().filter(|&&i| ts[i] * side > 0.0 || ts[i] == 0.0) {
            let t = ts[i];
            let row = if t == 0.0 {
                GapWidthRow {
                    t,
                    lower: gap.lower,
                    upper: gap.upper,
                    width: gap.width(),
                    merged: false,
                }
            } else {
                track(&family.with_t(t).periodic()?.with_h(opts.h), t, prev)?
            };
            if !row.merged {
                prev = (row.lower, row.upper);
            }
            rows[i] = Some(row);
        }
    }
    let rows: Vec<GapWidthRow> = rows.into_iter().map(|r| r.expect("every t visited")).collect();
    let mut monotone_shrink = true;
    for side in [1.0, -1.0] {
        let mut last = f64::INFINITY;
        for &i in order.iter().filter(|&&i| ts[i] * side >= 0.0) {
            if rows[i].width > last + 1e-9 {
                monotone_shrink = false;
            }
            last = rows[i].width;
        }
    }
    Ok(GapWidthTable {
        gap_index,
        rows,
        monotone_shrink,
    })
}

/// Re-finds the gap near `prev` and bisects both of its boundaries.
fn track(p: &Periodic, t: f64, prev: (f64, f64)) -> Result<GapWidthRow> {
    let in_gap = |e: f64| classify(p, e).map(|c| !c.in_spectrum).unwrap_or(false);
    let (lo, hi) = prev;
    let centre = 0.5 * (lo + hi);
    let seed = if in_gap(centre) {
        Some(centre)
    } else {
        let probes: Vec<f64> = (1..GAP_PROBES)
            .map(|j| lo + (hi - lo) * j as f64 / GAP_PROBES as f64)
            .collect();
        let flags: Vec<bool> = probes.par_iter().map(|&e| in_gap(e)).collect();
        probes
            .iter()
            .zip(&flags)
            .filter(|(_, &g)| g)
            .map(|(&e, _)| e)
            .min_by(|a, b| (a - centre).abs().total_cmp(&(b - centre).abs()))
    };
    let Some(seed) = seed else {
        return Ok(GapWidthRow {
            t,
            lower: centre,
            upper: centre,
            width: 0.0,
            merged: true,
        });
    };
    let step0 = ((hi - lo) / 50.0).max(1e-6);
    let outward = |dir: f64| -> f64 {
        let mut inside = seed;
        let mut step = step0;
        loop {
            let probe = inside + dir * step;
            if !in_gap(probe) {
                return bisect(
                    |e| if in_gap(e) { 1.0 } else { -1.0 },
                    inside.min(probe),
                    inside.max(probe),
                    BOUNDARY_TOL,
                );
            }
            inside = probe;
            step *= 2.0;
        }
    };
    let lower = outward(-1.0);
    let upper = outward(1.0);
    Ok(GapWidthRow {
        t,
        lower,
        upper,
        width: upper - lower,
        merged: false,
    })
}
