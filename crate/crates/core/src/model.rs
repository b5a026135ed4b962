//! Potential and channel-system specifications.
//!
//! Units are fixed so that the kinetic operator reads `-psi''`: energies and
//! lengths are dimensionless and `-psi'' + V psi = E psi`.
//!
//! Delta spikes are kept as zero-width elements. They never show up in
//! [`PotentialSpec::evaluate`]; propagation applies them as derivative jumps.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Relative tolerance used when comparing a lattice period with the summed
/// widths of its cell.
const PERIOD_RTOL: f64 = 1e-12;

/// Serde helper for energies that may be complex: a bare number reads as a
/// real value, a two-element array `[re, im]` as a complex one.
pub mod cplx {
    use num_complex::Complex64 as C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Real(f64),
        Pair([f64; 2]),
    }

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        if z.im == 0.0 {
            Repr::Real(z.re).serialize(s)
        } else {
            Repr::Pair([z.re, z.im]).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Real(re) => C64::new(re, 0.0),
            Repr::Pair([re, im]) => C64::new(re, im),
        })
    }
}

/// One piece of a piecewise potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Element {
    Const {
        width: f64,
        #[serde(with = "cplx")]
        height: C64,
    },
    Delta {
        #[serde(with = "cplx")]
        strength: C64,
    },
}

impl Element {
    pub fn constant(width: f64, height: f64) -> Self {
        Element::Const {
            width,
            height: C64::new(height, 0.0),
        }
    }

    pub fn delta(strength: f64) -> Self {
        Element::Delta {
            strength: C64::new(strength, 0.0),
        }
    }

    fn width(&self) -> f64 {
        match self {
            Element::Const { width, .. } => *width,
            Element::Delta { .. } => 0.0,
        }
    }

    fn scaled(&self, c: f64) -> Self {
        match self {
            Element::Const { width, height } => Element::Const {
                width: *width,
                height: height * c,
            },
            Element::Delta { strength } => Element::Delta {
                strength: strength * c,
            },
        }
    }

    fn is_real(&self) -> bool {
        match self {
            Element::Const { height, .. } => height.im == 0.0,
            Element::Delta { strength } => strength.im == 0.0,
        }
    }
}

/// The named closed-form potentials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalyticForm {
    Zero,
    /// `depth * sech^2(scale * (x - center))`
    Sech2 { depth: f64, scale: f64, center: f64 },
    /// `amplitude * cos(wavenumber * x + phase)`
    Cosine {
        amplitude: f64,
        wavenumber: f64,
        phase: f64,
    },
    /// `amplitude * exp(i * wavenumber * x)`. A purely imaginary wavenumber
    /// gives a real exponential.
    Cexp {
        #[serde(with = "cplx")]
        amplitude: C64,
        #[serde(with = "cplx")]
        wavenumber: C64,
    },
}

impl AnalyticForm {
    fn value_at(&self, x: f64) -> C64 {
        match *self {
            AnalyticForm::Zero => C64::new(0.0, 0.0),
            AnalyticForm::Sech2 {
                depth,
                scale,
                center,
            } => {
                let s = 1.0 / (scale * (x - center)).cosh();
                C64::new(depth * s * s, 0.0)
            }
            AnalyticForm::Cosine {
                amplitude,
                wavenumber,
                phase,
            } => C64::new(amplitude * (wavenumber * x + phase).cos(), 0.0),
            AnalyticForm::Cexp {
                amplitude,
                wavenumber,
            } => amplitude * (C64::i() * wavenumber * x).exp(),
        }
    }
}

/// A scalar potential `V(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// Elements laid out from `start`; zero outside the support.
    Piecewise { elements: Vec<Element>, start: f64 },
    Analytic(AnalyticForm),
    /// The cell repeated with period `period`; the cell starts at `x = 0`.
    Lattice { cell: Vec<Element>, period: f64 },
}

/// Discontinuities of a potential inside an interval: points where the
/// smooth part may jump, and delta spikes with their strengths.
#[derive(Debug, Clone, Default)]
pub(crate) struct Features {
    pub breaks: Vec<f64>,
    pub deltas: Vec<(f64, C64)>,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec::Analytic(AnalyticForm::Zero)
    }

    pub fn sech2(depth: f64, scale: f64, center: f64) -> Self {
        PotentialSpec::Analytic(AnalyticForm::Sech2 {
            depth,
            scale,
            center,
        })
    }

    pub fn cosine(amplitude: f64, wavenumber: f64, phase: f64) -> Self {
        PotentialSpec::Analytic(AnalyticForm::Cosine {
            amplitude,
            wavenumber,
            phase,
        })
    }

    pub fn cexp(amplitude: C64, wavenumber: C64) -> Self {
        PotentialSpec::Analytic(AnalyticForm::Cexp {
            amplitude,
            wavenumber,
        })
    }

    /// Every violated invariant, in spec order. Empty means valid.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        match self {
            PotentialSpec::Piecewise { elements, start } => {
                if !start.is_finite() {
                    out.push(Violation::new("start", "support start not finite"));
                }
                check_elements("elements", elements, &mut out);
            }
            PotentialSpec::Lattice { cell, period } => {
                check_elements("cell", cell, &mut out);
                if !(period.is_finite() && *period > 0.0) {
                    out.push(Violation::new("period", "period must be > 0"));
                } else {
                    let sum: f64 = cell.iter().map(Element::width).sum();
                    if (sum - period).abs() > PERIOD_RTOL * period.abs().max(1.0) {
                        out.push(Violation::new(
                            "period",
                            format!("period mismatch: a = {period} but cell widths sum to {sum}"),
                        ));
                    }
                }
            }
            PotentialSpec::Analytic(form) => match *form {
                AnalyticForm::Zero => {}
                AnalyticForm::Sech2 {
                    depth,
                    scale,
                    center,
                } => {
                    if !(depth.is_finite() && center.is_finite()) {
                        out.push(Violation::new("sech2", "parameters not finite"));
                    }
                    if !(scale.is_finite() && scale > 0.0) {
                        out.push(Violation::new("sech2.scale", "scale must be > 0"));
                    }
                }
                AnalyticForm::Cosine {
                    amplitude,
                    wavenumber,
                    phase,
                } => {
                    if !(amplitude.is_finite() && wavenumber.is_finite() && phase.is_finite()) {
                        out.push(Violation::new("cosine", "parameters not finite"));
                    }
                }
                AnalyticForm::Cexp {
                    amplitude,
                    wavenumber,
                } => {
                    if !(finite(amplitude) && finite(wavenumber)) {
                        out.push(Violation::new("cexp", "parameters not finite"));
                    }
                }
            },
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        into_result(self.violations())
    }

    /// Smooth part of `V(x)`; delta spikes are not included.
    pub fn evaluate(&self, x: f64) -> Result<C64> {
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("x = {x} is not finite")));
        }
        self.validate()?;
        Ok(self.value_at(x))
    }

    /// Unchecked evaluation for validated specs. Element boundaries belong to
    /// the element on their right.
    pub(crate) fn value_at(&self, x: f64) -> C64 {
        match self {
            PotentialSpec::Analytic(form) => form.value_at(x),
            PotentialSpec::Piecewise { elements, start } => {
                piece_value(elements, x - start).unwrap_or(C64::new(0.0, 0.0))
            }
            PotentialSpec::Lattice { cell, period } => {
                let r = x.rem_euclid(*period);
                piece_value(cell, r)
                    .or_else(|| last_height(cell))
                    .unwrap_or(C64::new(0.0, 0.0))
            }
        }
    }

    /// The spatial period, if the potential is periodic.
    pub fn period(&self) -> Option<f64> {
        match self {
            PotentialSpec::Lattice { period, .. } => Some(*period),
            PotentialSpec::Analytic(AnalyticForm::Cosine { wavenumber, .. }) if *wavenumber != 0.0 => {
                Some(2.0 * PI / wavenumber.abs())
            }
            PotentialSpec::Analytic(AnalyticForm::Cexp { wavenumber, .. })
                if wavenumber.im == 0.0 && wavenumber.re != 0.0 =>
            {
                Some(2.0 * PI / wavenumber.re.abs())
            }
            _ => None,
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            PotentialSpec::Piecewise { elements, .. } => elements.iter().all(Element::is_real),
            PotentialSpec::Lattice { cell, .. } => cell.iter().all(Element::is_real),
            PotentialSpec::Analytic(AnalyticForm::Cexp {
                amplitude,
                wavenumber,
            }) => *amplitude == C64::new(0.0, 0.0) || (wavenumber.re == 0.0 && amplitude.im == 0.0),
            PotentialSpec::Analytic(_) => true,
        }
    }

    /// True when the smooth part is constant between feature points, so that
    /// propagation can be done in closed form.
    pub fn is_piecewise_constant(&self) -> bool {
        !matches!(
            self,
            PotentialSpec::Analytic(
                AnalyticForm::Sech2 { .. } | AnalyticForm::Cosine { .. } | AnalyticForm::Cexp { .. }
            )
        )
    }

    /// `c * V(x)`, including delta strengths.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            PotentialSpec::Piecewise { elements, start } => PotentialSpec::Piecewise {
                elements: elements.iter().map(|e| e.scaled(c)).collect(),
                start: *start,
            },
            PotentialSpec::Lattice { cell, period } => PotentialSpec::Lattice {
                cell: cell.iter().map(|e| e.scaled(c)).collect(),
                period: *period,
            },
            PotentialSpec::Analytic(form) => PotentialSpec::Analytic(match *form {
                AnalyticForm::Zero => AnalyticForm::Zero,
                AnalyticForm::Sech2 {
                    depth,
                    scale,
                    center,
                } => AnalyticForm::Sech2 {
                    depth: depth * c,
                    scale,
                    center,
                },
                AnalyticForm::Cosine {
                    amplitude,
                    wavenumber,
                    phase,
                } => AnalyticForm::Cosine {
                    amplitude: amplitude * c,
                    wavenumber,
                    phase,
                },
                AnalyticForm::Cexp {
                    amplitude,
                    wavenumber,
                } => AnalyticForm::Cexp {
                    amplitude: amplitude * c,
                    wavenumber,
                },
            }),
        }
    }

    /// Smoothness breaks and delta spikes lying in `[x0, x1]`, widened by a
    /// small tolerance so that features at the endpoints are reported.
    pub(crate) fn features(&self, x0: f64, x1: f64) -> Features {
        let (lo, hi) = (x0.min(x1), x0.max(x1));
        let tol = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        let mut f = Features::default();
        let push = |f: &mut Features, x: f64, delta: Option<C64>| {
            if x >= lo - tol && x <= hi + tol {
                match delta {
                    Some(g) => f.deltas.push((x, g)),
                    None => f.breaks.push(x),
                }
            }
        };
        match self {
            PotentialSpec::Analytic(_) => {}
            PotentialSpec::Piecewise { elements, start } => {
                let mut pos = *start;
                push(&mut f, pos, None);
                for e in elements {
                    match e {
                        Element::Const { width, .. } => {
                            pos += width;
                            push(&mut f, pos, None);
                        }
                        Element::Delta { strength } => push(&mut f, pos, Some(*strength)),
                    }
                }
            }
            PotentialSpec::Lattice { cell, period } => {
                let a = *period;
                let m0 = (lo / a).floor() as i64 - 1;
                let m1 = (hi / a).floor() as i64 + 1;
                for m in m0..=m1 {
                    let base = m as f64 * a;
                    let mut off = 0.0;
                    push(&mut f, base, None);
                    for e in cell {
                        match e {
                            Element::Const { width, .. } => {
                                off += width;
                                // the cell end coincides with the next cell start
                                if off < a * (1.0 - PERIOD_RTOL) {
                                    push(&mut f, base + off, None);
                                }
                            }
                            Element::Delta { strength } => {
                                let at = if off >= a * (1.0 - PERIOD_RTOL) {
                                    (m + 1) as f64 * a
                                } else {
                                    base + off
                                };
                                push(&mut f, at, Some(*strength));
                            }
                        }
                    }
                }
            }
        }
        f
    }

    /// Interval outside of which `|V| < tol`, if the potential decays.
    pub(crate) fn decay_window(&self, tol: f64) -> Result<Option<(f64, f64)>> {
        match self {
            PotentialSpec::Analytic(AnalyticForm::Zero) => Ok(None),
            PotentialSpec::Analytic(AnalyticForm::Sech2 {
                depth,
                scale,
                center,
            }) => {
                if depth.abs() < tol {
                    return Ok(None);
                }
                let reach = (depth.abs() / tol).sqrt().acosh() / scale;
                Ok(Some((center - reach, center + reach)))
            }
            PotentialSpec::Piecewise { elements, start } => {
                let len: f64 = elements.iter().map(Element::width).sum();
                Ok(Some((*start, start + len)))
            }
            PotentialSpec::Analytic(AnalyticForm::Cexp { amplitude, .. })
                if amplitude.norm() < tol =>
            {
                Ok(None)
            }
            PotentialSpec::Analytic(AnalyticForm::Cosine { amplitude, .. }) if amplitude.abs() < tol => {
                Ok(None)
            }
            other => Err(Error::NotDecaying(format!(
                "{} has no finite window where |V| < {tol:e}",
                other.kind_name()
            ))),
        }
    }

    pub(crate) fn kind_name(&self) -> &'static str {
        match self {
            PotentialSpec::Piecewise { .. } => "piecewise",
            PotentialSpec::Lattice { .. } => "lattice",
            PotentialSpec::Analytic(AnalyticForm::Zero) => "zero",
            PotentialSpec::Analytic(AnalyticForm::Sech2 { .. }) => "sech2",
            PotentialSpec::Analytic(AnalyticForm::Cosine { .. }) => "cosine",
            PotentialSpec::Analytic(AnalyticForm::Cexp { .. }) => "cexp",
        }
    }
}

fn finite(z: C64) -> bool {
    z.re.is_finite() && z.im.is_finite()
}

fn check_elements(label: &str, elements: &[Element], out: &mut Vec<Violation>) {
    for (i, e) in elements.iter().enumerate() {
        match e {
            Element::Const { width, height } => {
                if !(width.is_finite() && *width > 0.0) {
                    out.push(Violation::new(format!("{label}[{i}]"), "width must be > 0"));
                }
                if !finite(*height) {
                    out.push(Violation::new(format!("{label}[{i}]"), "height not finite"));
                }
            }
            Element::Delta { strength } => {
                if !finite(*strength) {
                    out.push(Violation::new(format!("{label}[{i}]"), "strength not finite"));
                }
            }
        }
    }
}

fn piece_value(elements: &[Element], r: f64) -> Option<C64> {
    if r < 0.0 {
        return None;
    }
    let mut pos = 0.0;
    for e in elements {
        if let Element::Const { width, height } = e {
            if r < pos + width {
                return Some(*height);
            }
            pos += width;
        }
    }
    None
}

fn last_height(elements: &[Element]) -> Option<C64> {
    elements.iter().rev().find_map(|e| match e {
        Element::Const { height, .. } => Some(*height),
        Element::Delta { .. } => None,
    })
}

fn into_result(violations: Vec<Violation>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(violations))
    }
}

/// A delta-coupling matrix located at one point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointCoupling {
    pub position: f64,
    /// `strengths[a][b]` adds `strengths[a][b] * psi_b` to the jump of `psi_a'`.
    pub strengths: Vec<Vec<f64>>,
}

/// Coupled channels `-psi_a'' = (E - eps_a) psi_a - sum_b V_ab psi_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSystemSpec {
    /// Channel thresholds, ascending. Their count is the channel count.
    pub thresholds: Vec<f64>,
    pub matrix: Vec<Vec<PotentialSpec>>,
    #[serde(default)]
    pub point_couplings: Vec<PointCoupling>,
}

impl ChannelSystemSpec {
    pub fn channels(&self) -> usize {
        self.thresholds.len()
    }

    /// Uncoupled system with the given diagonal potentials.
    pub fn diagonal(thresholds: Vec<f64>, diagonal: Vec<PotentialSpec>) -> Self {
        let n = diagonal.len();
        let matrix = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        if a == b {
                            diagonal[a].clone()
                        } else {
                            PotentialSpec::zero()
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            thresholds,
            matrix,
            point_couplings: Vec::new(),
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.thresholds.len();
        if n == 0 {
            out.push(Violation::new("thresholds", "channel count must be >= 1"));
            return out;
        }
        if self.thresholds.iter().any(|t| !t.is_finite()) {
            out.push(Violation::new("thresholds", "thresholds not finite"));
        }
        if self.thresholds.windows(2).any(|w| w[1] < w[0]) {
            out.push(Violation::new("thresholds", "thresholds not sorted ascending"));
        }
        if self.matrix.len() != n || self.matrix.iter().any(|row| row.len() != n) {
            out.push(Violation::new("matrix", format!("matrix must be {n}x{n}")));
            return out;
        }
        for a in 0..n {
            for b in 0..n {
                let entry = &self.matrix[a][b];
                for v in entry.violations() {
                    out.push(Violation::new(format!("matrix[{a}][{b}].{}", v.path), v.message));
                }
                if !entry.is_real() {
                    out.push(Violation::new(
                        format!("matrix[{a}][{b}]"),
                        "interaction matrix entries must be real",
                    ));
                }
                if b > a && self.matrix[a][b] != self.matrix[b][a] {
                    out.push(Violation::new(
                        "matrix",
                        format!("V{}{} ≠ V{}{}", a + 1, b + 1, b + 1, a + 1),
                    ));
                }
            }
        }
        for (i, pc) in self.point_couplings.iter().enumerate() {
            let path = format!("point_couplings[{i}]");
            if !pc.position.is_finite() {
                out.push(Violation::new(&path, "position not finite"));
            }
            if pc.strengths.len() != n || pc.strengths.iter().any(|r| r.len() != n) {
                out.push(Violation::new(&path, format!("strengths must be {n}x{n}")));
                continue;
            }
            for a in 0..n {
                for b in 0..n {
                    if !pc.strengths[a][b].is_finite() {
                        out.push(Violation::new(&path, "strength not finite"));
                    }
                    if b > a && pc.strengths[a][b] != pc.strengths[b][a] {
                        out.push(Violation::new(
                            &path,
                            format!("g{}{} ≠ g{}{}", a + 1, b + 1, b + 1, a + 1),
                        ));
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        into_result(self.violations())
    }
}

/// Comb of delta spikes of strength `g`, one per period at `x = k a`.
pub fn builtin_dirac_comb(g: f64, a: f64) -> Result<PotentialSpec> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidArgument(format!("period a = {a} must be > 0")));
    }
    if !g.is_finite() {
        return Err(Error::InvalidArgument(format!("strength g = {g} not finite")));
    }
    Ok(PotentialSpec::Lattice {
        cell: vec![Element::constant(a, 0.0), Element::delta(g)],
        period: a,
    })
}

/// Reflectionless well `-2 kappa^2 sech^2(kappa (x - center))`.
pub fn builtin_soliton(kappa: f64, center: f64) -> Result<PotentialSpec> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::InvalidArgument(format!("kappa = {kappa} must be > 0")));
    }
    Ok(PotentialSpec::sech2(-2.0 * kappa * kappa, kappa, center))
}

/// Sign pattern of the off-diagonal half-soliton in a transparent pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransparentVariant {
    /// All four entries equal to half the soliton.
    A,
    /// Off-diagonal entries carry the opposite sign.
    B,
}

impl std::str::FromStr for TransparentVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "A" => Ok(TransparentVariant::A),
            "b" | "B" => Ok(TransparentVariant::B),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

/// Two equal-threshold channels whose every matrix element is half of the
/// single-channel soliton, up to sign.
pub fn builtin_transparent_pair(variant: TransparentVariant, kappa: f64) -> Result<ChannelSystemSpec> {
    let full = builtin_soliton(kappa, 0.0)?;
    let half = full.scaled(0.5);
    let off = match variant {
        TransparentVariant::A => half.clone(),
        TransparentVariant::B => full.scaled(-0.5),
    };
    Ok(ChannelSystemSpec {
        thresholds: vec![0.0, 0.0],
        matrix: vec![vec![half.clone(), off.clone()], vec![off, half]],
        point_couplings: Vec::new(),
    })
}
