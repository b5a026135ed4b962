use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::*;
use super::output::{to_json, Cell, Table};
use super::Format;
use crate::bands::{
    beating_envelope, permanent_resonance_report, tamm_search, verify_tamm, zone_edges, Periodic, Zone, ZoneKind,
};
use crate::bsec;
use crate::channels::{scattering_channels, scattering_scalar, verify_transparent, ScatterOptions, DECOUPLING_TOL};
use crate::cxperiodic::{gap_width_scan, ComplexLattice, GapScanOptions};
use crate::error::{Error, Result};
use crate::model::builtin_transparent_pair;
use crate::propagate::{integrate_scalar, residual_check, WaveState};

/// Rendered output and, for commands with a pass/fail verdict, the reason it
/// failed.
pub struct Output {
    pub text: String,
    pub failure: Option<String>,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, failure: None }
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        match v {
            Some(v) => Cell::F(v),
            None => Cell::S(String::new()),
        }
    }
}

fn render<T: Serialize>(format: Format, table: impl FnOnce() -> Table, value: &T) -> String {
    match format {
        Format::Csv => table().render(),
        Format::Json => to_json(value),
    }
}

fn options(window: Option<[f64; 2]>, h: f64) -> ScatterOptions {
    ScatterOptions {
        window: window.map(|[a, b]| (a, b)),
        h,
    }
}

fn points(s: &Sweep) -> Result<Vec<f64>> {
    s.points().map_err(Error::InvalidArgument)
}

fn interior_gap(p: &Periodic, emin: f64, emax: f64, index: usize) -> Result<Zone> {
    zone_edges(p, emin, emax, None)?
        .interior_gaps()
        .get(index)
        .copied()
        .filter(|g| g.width() > 0.0)
        .ok_or_else(|| Error::NoGapToTrack(format!("no open gap #{index} in [{emin}, {emax}]")))
}

pub fn bands(c: &BandsConfig, format: Format) -> Result<Output> {
    if c.samples < 2 {
        return Err(Error::InvalidArgument("samples must be >= 2".into()));
    }
    let p = Periodic::new(&c.potential)?.with_h(c.h);
    let step = c.step.unwrap_or((c.emax - c.emin) / c.samples as f64);
    let report = zone_edges(&p, c.emin, c.emax, Some(step))?;
    let table = || {
        let mut t = Table::new(&["kind", "lower", "upper", "width", "lower_is_edge", "upper_is_edge"]);
        for z in &report.zones {
            let kind = match z.kind {
                ZoneKind::Band => "band",
                ZoneKind::Gap => "gap",
            };
            t.push(vec![
                kind.into(),
                z.lower.into(),
                z.upper.into(),
                z.width().into(),
                z.lower_is_edge.into(),
                z.upper_is_edge.into(),
            ]);
        }
        t
    };
    Ok(Output::ok(render(format, table, &report)))
}

pub fn gap(c: &GapConfig, format: Format) -> Result<Output> {
    let p = Periodic::new(&c.potential)?.with_h(c.h);
    let gap = interior_gap(&p, c.emin, c.emax, c.gap_index)?;
    let report = permanent_resonance_report(&p, &gap, c.samples, c.periods, c.offset)?;
    let table = || {
        let mut t = Table::new(&[
            "energy",
            "discriminant",
            "multiplier",
            "growth",
            "knots_per_period",
            "knot_spacing_mean",
            "knot_shift_error",
            "ratio_error",
            "avg_kinetic_mean",
            "avg_kinetic_min",
            "avg_kinetic_max",
            "bump_identity_max",
        ]);
        for r in &report.rows {
            t.push(vec![
                r.energy.into(),
                r.discriminant.into(),
                r.multiplier.into(),
                r.growth.into(),
                r.knots_per_period.into(),
                r.knot_spacing_mean.into(),
                r.knot_shift_error.into(),
                r.ratio_error.into(),
                r.avg_kinetic_mean.into(),
                r.avg_kinetic_min.into(),
                r.avg_kinetic_max.into(),
                r.bump_identity_max.into(),
            ]);
        }
        t
    };
    Ok(Output::ok(render(format, table, &report)))
}

pub fn beats(c: &BeatsConfig, format: Format) -> Result<Output> {
    let p = Periodic::new(&c.potential)?.with_h(c.h);
    let reports = points(&c.energies)?
        .par_iter()
        .map(|&e| beating_envelope(&p, e, c.periods))
        .collect::<Result<Vec<_>>>()?;
    let table = || {
        let mut t = Table::new(&[
            "energy",
            "discriminant",
            "modulus_defect",
            "phase",
            "predicted_beat",
            "measured_beat",
            "beat_error",
            "envelope_beat",
            "amplitude_ratio",
            "bounded",
        ]);
        for r in &reports {
            t.push(vec![
                r.energy.into(),
                r.discriminant.into(),
                r.modulus_defect.into(),
                r.phase.into(),
                r.predicted_beat.into(),
                r.measured_beat.into(),
                r.beat_error.into(),
                r.envelope_beat.into(),
                r.amplitude_ratio.into(),
                r.bounded.into(),
            ]);
        }
        t
    };
    Ok(Output::ok(render(format, table, &reports)))
}

pub fn tamm(c: &TammConfig, format: Format) -> Result<Output> {
    let p = Periodic::new(&c.potential)?.with_h(c.h);
    let gap = interior_gap(&p, c.emin, c.emax, c.gap_index)?;
    let offset = c.wall_offset.unwrap_or(p.period() / 4.0);
    let search = tamm_search(&p, &gap, offset)?;
    let checks = search
        .roots
        .iter()
        .map(|&e| verify_tamm(&p, e, offset, c.periods))
        .collect::<Result<Vec<_>>>()?;
    let table = || {
        let mut t = Table::new(&[
            "energy",
            "gap_lower",
            "gap_upper",
            "wall_offset",
            "expected_ratio",
            "ratio_error",
            "bounded",
            "decays",
        ]);
        for v in &checks {
            t.push(vec![
                v.energy.into(),
                search.gap_lower.into(),
                search.gap_upper.into(),
                offset.into(),
                v.expected_ratio.into(),
                v.ratio_error.into(),
                v.bounded.into(),
                v.decays.into(),
            ]);
        }
        t
    };
    let value = json!({ "search": search, "verification": checks });
    Ok(Output::ok(render(format, table, &value)))
}

pub fn scatter(c: &ScatterConfig, format: Format) -> Result<Output> {
    let opts = options(c.window, c.h);
    let results = points(&c.energies)?
        .par_iter()
        .map(|&e| scattering_scalar(&c.potential, e, &opts))
        .collect::<Result<Vec<_>>>()?;
    let table = || {
        let mut t = Table::new(&["energy", "R2", "T2", "unitarity_defect", "r_re", "r_im", "t_re", "t_im"]);
        for s in &results {
            let (r, tr) = (s.r_left[0][0], s.t_left[0][0]);
            t.push(vec![
                s.energy.into(),
                s.reflection(0, 0).into(),
                s.transmission(0, 0).into(),
                s.unitarity_defect().into(),
                r.re.into(),
                r.im.into(),
                tr.re.into(),
                tr.im.into(),
            ]);
        }
        t
    };
    Ok(Output::ok(render(format, table, &results)))
}

pub fn channels(c: &ChannelsConfig, format: Format) -> Result<Output> {
    c.system.validate()?;
    let opts = options(c.window, c.h);
    let results = points(&c.energies)?
        .par_iter()
        .map(|&e| scattering_channels(&c.system, e, &opts))
        .collect::<Result<Vec<_>>>()?;
    let table = || {
        let mut t = Table::new(&[
            "energy",
            "incoming",
            "outgoing",
            "R2",
            "T2",
            "unitarity_defect",
            "reciprocity_defect",
        ]);
        for s in &results {
            let (u, rec) = (s.unitarity_defect(), s.reciprocity_defect());
            for a in 0..s.open {
                for b in 0..s.open {
                    t.push(vec![
                        s.energy.into(),
                        a.into(),
                        b.into(),
                        s.reflection(b, a).into(),
                        s.transmission(b, a).into(),
                        u.into(),
                        rec.into(),
                    ]);
                }
            }
        }
        t
    };
    Ok(Output::ok(render(format, table, &results)))
}

pub fn transparent(c: &TransparentConfig, format: Format) -> Result<Output> {
    let mut sys = builtin_transparent_pair(c.variant, c.kappa)?;
    if c.detune != 1.0 {
        let off = sys.matrix[0][1].scaled(c.detune);
        sys.matrix[0][1] = off.clone();
        sys.matrix[1][0] = off;
    }
    let report = verify_transparent(&sys, &points(&c.energies)?, &options(None, c.h))?;
    let table = || {
        let mut t = Table::new(&[
            "energy",
            "reflection",
            "unitarity_defect",
            "decoupling_residual",
            "transparent",
        ]);
        for r in &report.rows {
            t.push(vec![
                r.energy.into(),
                r.reflection.into(),
                r.unitarity_defect.into(),
                report.decoupling_residual.into(),
                r.transparent.into(),
            ]);
        }
        t
    };
    let mut failures: Vec<String> = report
        .rows
        .iter()
        .filter(|r| !r.transparent)
        .map(|r| format!("reflection {:e} at E = {}", r.reflection, r.energy))
        .collect();
    if report.decoupling_residual >= DECOUPLING_TOL {
        failures.push(format!("decoupling residual {:e}", report.decoupling_residual));
    }
    Ok(Output {
        text: render(format, table, &report),
        failure: (!failures.is_empty()).then(|| format!("not transparent: {}", failures.join("; "))),
    })
}

pub fn complexbands(c: &ComplexBandsConfig, format: Format) -> Result<Output> {
    let family = ComplexLattice::new(c.real.clone(), c.imag.clone(), 0.0)?;
    let opts = GapScanOptions {
        emin: c.emin,
        emax: c.emax,
        h: c.h,
    };
    let table_data = gap_width_scan(&family, &points(&c.t)?, c.gap_index, &opts)?;
    let table = || {
        let mut t = Table::new(&["t", "lower", "upper", "width", "merged"]);
        for r in &table_data.rows {
            t.push(vec![
                r.t.into(),
                r.lower.into(),
                r.upper.into(),
                r.width.into(),
                r.merged.into(),
            ]);
        }
        t
    };
    Ok(Output::ok(render(format, table, &table_data)))
}

pub fn bsec(c: &BsecConfig, format: Format) -> Result<Output> {
    let energy = c
        .energy
        .unwrap_or((c.mode as f64 * std::f64::consts::PI / c.length).powi(2));
    let sol = bsec::construct(energy, c.threshold, c.length, c.mode, c.a0, c.a_l)?;
    let report = bsec::verify(&sol)?;
    let text = match format {
        Format::Json => to_json(&json!({
            "solution": sol,
            "report": report,
            "passed": report.passed(),
        })),
        Format::Csv => {
            if c.samples < 2 {
                return Err(Error::InvalidArgument("samples must be >= 2".into()));
            }
            let mut buf = Vec::new();
            sol.write_csv(&mut buf, c.samples)
                .expect("writing to memory cannot fail");
            String::from_utf8(buf).expect("CSV is UTF-8")
        }
    };
    Ok(Output {
        text,
        failure: report.ensure().err().map(|e| e.to_string()),
    })
}

#[derive(Serialize)]
struct ResidualRow {
    x: f64,
    psi: f64,
    dpsi: f64,
    kinetic: f64,
    class: crate::propagate::Bending,
    curvature_agrees: Option<bool>,
}

pub fn residual(c: &ResidualConfig, format: Format) -> Result<Output> {
    if !c.potential.is_real() {
        return Err(Error::InvalidArgument("residual needs a real potential".into()));
    }
    let t = integrate_scalar(&c.potential, c.energy, c.x0, c.x1, &WaveState::scalar(c.psi, c.dpsi), c.h)?;
    let report = residual_check(&t);
    let n = t.len();
    let idx: Vec<usize> = match c.samples {
        Some(m) if m < 2 => return Err(Error::InvalidArgument("samples must be >= 2".into())),
        Some(m) if m < n => (0..m).map(|j| j * (n - 1) / (m - 1)).collect(),
        _ => (0..n).collect(),
    };
    let rows: Vec<ResidualRow> = idx
        .iter()
        .map(|&i| {
            let b = &report.bending[0][i];
            ResidualRow {
                x: b.x,
                psi: t.psi[0][i].re,
                dpsi: t.dpsi[0][i].re,
                kinetic: b.kinetic,
                class: b.class,
                curvature_agrees: b.curvature_agrees,
            }
        })
        .collect();
    let table = || {
        let mut tab = Table::new(&["x", "psi", "dpsi", "kinetic", "class", "curvature_agrees"]);
        for r in &rows {
            let class = match r.class {
                crate::propagate::Bending::TowardAxis => "toward_axis",
                crate::propagate::Bending::FromAxis => "from_axis",
                crate::propagate::Bending::Neutral => "neutral",
            };
            let agrees = r.curvature_agrees.map(|a| a.to_string()).unwrap_or_default();
            tab.push(vec![
                r.x.into(),
                r.psi.into(),
                r.dpsi.into(),
                r.kinetic.into(),
                class.into(),
                Cell::S(agrees),
            ]);
        }
        tab
    };
    let value = json!({
        "energy": c.energy,
        "max_abs": report.max_abs,
        "relative": report.relative,
        "points_checked": report.points_checked,
        "rows": rows,
    });
    Ok(Output::ok(render(format, table, &value)))
}
