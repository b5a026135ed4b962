use rayon::prelude::*;
use serde::Serialize;

use super::Periodic;
use crate::error::{Error, Result};
use crate::roots::{bisect, golden_max};

/// Edge solver tolerance in energy.
pub const EDGE_TOL: f64 = 1e-10;
/// Default number of scan intervals.
pub const DEFAULT_SCAN_POINTS: usize = 2000;
/// A local maximum of `|D|` within this of 1 counts as touching bands.
const TOUCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneKind {
    Band,
    Gap,
}

/// An interval `[lower, upper]` of the scan range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Zone {
    pub kind: ZoneKind,
    pub lower: f64,
    pub upper: f64,
    /// False when the end is the scan boundary rather than a `|D| = 1` point.
    pub lower_is_edge: bool,
    pub upper_is_edge: bool,
}

impl Zone {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ZoneReport {
    pub emin: f64,
    pub emax: f64,
    pub step: f64,
    pub tolerance: f64,
    /// Bands and gaps in increasing energy. Touching bands are separated by a
    /// gap of zero width.
    pub zones: Vec<Zone>,
    /// Largest `|det M - 1|` seen over the scan.
    pub max_det_defect: f64,
    /// Set when a gap was found only through a local extremum of `|D|`,
    /// meaning the scan step was too coarse to bracket it.
    pub warning: Option<String>,
}

impl ZoneReport {
    pub fn gaps(&self) -> impl Iterator<Item = &Zone> {
        self.zones.iter().filter(|z| z.kind == ZoneKind::Gap)
    }

    pub fn bands(&self) -> impl Iterator<Item = &Zone> {
        self.zones.iter().filter(|z| z.kind == ZoneKind::Band)
    }

    /// Gaps with both ends at genuine zone edges.
    pub fn interior_gaps(&self) -> Vec<Zone> {
        self.gaps()
            .filter(|z| z.lower_is_edge && z.upper_is_edge)
            .copied()
            .collect()
    }
}

/// Locates all zone edges of a real periodic problem in `[emin, emax]`.
///
/// Sign changes of `D - 1` and `D + 1` on the scan grid are bisected to
/// [`EDGE_TOL`]. Local maxima of `|D|` that stay below 1 on the grid are
/// refined by golden section, catching touching bands and gaps narrower than
/// the step.
pub fn zone_edges(p: &Periodic, emin: f64, emax: f64, step: Option<f64>) -> Result<ZoneReport> {
    if !(emin < emax) || !emin.is_finite() || !emax.is_finite() {
        return Err(Error::InvalidArgument(format!("empty energy range [{emin}, {emax}]")));
    }
    if !p.is_real() {
        return Err(Error::InvalidArgument(
            "zone edges need a real potential; use the complex lattice tools".into(),
        ));
    }
    let step = step.unwrap_or((emax - emin) / DEFAULT_SCAN_POINTS as f64);
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("scan step must be positive, got {step}")));
    }
    let count = ((emax - emin) / step).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=count)
        .map(|j| if j == count { emax } else { emin + step * j as f64 })
        .collect();
    let evals: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&e| {
            let m = p.monodromy(e)?;
            Ok((m.discriminant().re, (m.det().re - 1.0).abs().max(m.det().im.abs())))
        })
        .collect::<Result<_>>()?;
    let d: Vec<f64> = evals.iter().map(|v| v.0).collect();
    let mut max_det_defect = evals.iter().map(|v| v.1).fold(0.0, f64::max);

    let disc = |e: f64| p.discriminant(e).unwrap_or(f64::NAN);

    let mut edges: Vec<f64> = Vec::new();
    let mut touches: Vec<f64> = Vec::new();
    let mut warning = None;

    for j in 0..count {
        for target in [1.0, -1.0] {
            let (a, b) = (d[j] - target, d[j + 1] - target);
            if a == 0.0 {
                edges.push(grid[j]);
            } else if a * b < 0.0 {
                edges.push(bisect(|e| disc(e) - target, grid[j], grid[j + 1], EDGE_TOL));
            }
        }
    }
    if d[count] == 1.0 || d[count] == -1.0 {
        edges.push(grid[count]);
    }

    // extrema of |D| that the grid does not bracket
    for j in 0..=count {
        let here = d[j].abs();
        let left = if j > 0 { d[j - 1].abs() } else { f64::NEG_INFINITY };
        let right = if j < count { d[j + 1].abs() } else { f64::NEG_INFINITY };
        if here > 1.0 || here < left || here < right {
            continue;
        }
        let lo = grid[j.saturating_sub(1)];
        let hi = grid[(j + 1).min(count)];
        // skip when a neighbouring interval already holds an edge
        if edges.iter().any(|&x| x >= lo && x <= hi) {
            continue;
        }
        let sign = d[j].signum();
        let (emax_at, peak) = golden_max(|e| sign * disc(e), lo, hi, 1e-13 * (1.0 + hi.abs()));
        if peak > 1.0 + TOUCH_TOL {
            let target = sign;
            let l = bisect(|e| disc(e) - target, lo.min(emax_at), emax_at, EDGE_TOL);
            let r = bisect(|e| disc(e) - target, emax_at, hi.max(emax_at), EDGE_TOL);
            edges.push(l);
            edges.push(r);
            warning = Some(format!(
                "gap near E = {emax_at} found only by extremum refinement; scan step {step} is too coarse"
            ));
        } else if peak >= 1.0 - TOUCH_TOL {
            touches.push(emax_at);
        }
    }

    edges.sort_by(f64::total_cmp);
    edges.dedup_by(|a, b| (*a - *b).abs() <= EDGE_TOL);

    let mut zones: Vec<Zone> = Vec::new();
    let mut points = vec![(emin, false)];
    points.extend(edges.iter().map(|&e| (e, true)));
    points.push((emax, false));
    for w in points.windows(2) {
        let ((lo, lo_edge), (hi, hi_edge)) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let m = p.monodromy(mid)?;
        max_det_defect = max_det_defect.max((m.det() - 1.0).norm());
        let kind = if m.discriminant().re.abs() > 1.0 {
            ZoneKind::Gap
        } else {
            ZoneKind::Band
        };
        // touching points strictly inside this band split it
        let mut start = (lo, lo_edge);
        if kind == ZoneKind::Band {
            for &t in touches.iter().filter(|&&t| t > lo && t < hi) {
                push_zone(&mut zones, ZoneKind::Band, start, (t, true));
                push_zone(&mut zones, ZoneKind::Gap, (t, true), (t, true));
                start = (t, true);
            }
        }
        push_zone(&mut zones, kind, start, (hi, hi_edge));
    }

    Ok(ZoneReport {
        emin,
        emax,
        step,
        tolerance: EDGE_TOL,
        zones,
        max_det_defect,
        warning,
    })
}

fn push_zone(zones: &mut Vec<Zone>, kind: ZoneKind, lo: (f64, bool), hi: (f64, bool)) {
    if let Some(last) = zones.last_mut() {
        if last.kind == kind && last.upper == lo.0 && !(kind == ZoneKind::Gap && last.lower == last.upper) {
            last.upper = hi.0;
            last.upper_is_edge = hi.1;
            return;
        }
    }
    zones.push(Zone {
        kind,
        lower: lo.0,
        upper: hi.0,
        lower_is_edge: lo.1,
        upper_is_edge: hi.1,
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_dirac_comb, Element, PotentialSpec};
    use std::f64::consts::PI;

    fn comb(g: f64) -> Periodic {
        Periodic::new(&builtin_dirac_comb(g, PI).unwrap()).unwrap()
    }

    fn alternates(r: &ZoneReport) -> bool {
        r.zones.windows(2).all(|w| w[0].kind != w[1].kind && w[0].upper == w[1].lower)
            && r.zones.first().unwrap().lower == r.emin
            && r.zones.last().unwrap().upper == r.emax
    }

    #[test]
    fn free_lattice_has_only_closed_gaps() {
        let free = PotentialSpec::Lattice {
            cell: vec![Element::constant(PI, 0.0)],
            period: PI,
        };
        let r = zone_edges(&Periodic::new(&free).unwrap(), 0.1, 25.0, None).unwrap();
        assert!(alternates(&r));
        assert!(r.gaps().all(|g| g.width() < 1e-9));
        // the touching points n^2 are all reported
        let touch: Vec<f64> = r.gaps().map(|g| g.lower).collect();
        for n in 1..=4 {
            assert!(touch.iter().any(|&t| (t - (n * n) as f64).abs() < 1e-6), "{touch:?}");
        }
    }

    #[test]
    fn comb_first_gap() {
        let r = zone_edges(&comb(2.0), 0.05, 10.0, None).unwrap();
        assert!(alternates(&r));
        let gaps = r.interior_gaps();
        assert!((gaps[0].lower - 1.0).abs() < 1e-9, "{gaps:?}");
        assert!(gaps[0].upper > 1.9 && gaps[0].upper < 2.0);
        assert!(r.max_det_defect < 1e-12);
    }

    #[test]
    fn wells_open_gaps_below_squares() {
        let r = zone_edges(&comb(-2.0), 0.05, 10.0, None).unwrap();
        for g in r.interior_gaps() {
            // upper edge at n^2 for wells
            let n = g.upper.sqrt().round();
            assert!((g.upper - n * n).abs() < 1e-9, "{g:?}");
        }
    }

    #[test]
    fn coarse_scan_flags_narrow_gap() {
        // a weak comb has a narrow gap above E = 1
        let r = zone_edges(&comb(0.02), 0.55, 1.55, Some(0.1)).unwrap();
        let g = r.interior_gaps();
        assert_eq!(g.len(), 1);
        assert!((g[0].lower - 1.0).abs() < 1e-9);
        assert!(r.warning.is_some() || g[0].width() > 0.1);
    }
}
