use serde::Serialize;

use crate::error::{Error, Result};
use crate::propagate::{second_derivatives, WaveTrace};

/// Samples with `|psi_a|` below this fraction of its maximum are masked.
pub const KNOT_MASK: f64 = 1e-6;

/// How an off-diagonal coupling acts on channel `a` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingSign {
    /// `psi_a psi_b >= 0`: a positive coupling pushes up, a negative one pulls
    /// down.
    Normal,
    /// `psi_a psi_b < 0`: a barrier acts attractive and a well repulsive.
    Inverted,
}

/// Contribution `V_ab psi_b / psi_a` of one coupling to the effective
/// potential of channel `a`, with its sign class.
pub fn classify_coupling(v_ab: f64, psi_a: f64, psi_b: f64) -> (f64, CouplingSign) {
    let sign = if psi_a * psi_b < 0.0 {
        CouplingSign::Inverted
    } else {
        CouplingSign::Normal
    };
    (v_ab * psi_b / psi_a, sign)
}

/// Effective scalar potential felt by one channel along a trace.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveTrace {
    pub channel: usize,
    pub x: Vec<f64>,
    /// `sum_{b != a} V_ab psi_b / psi_a`, `None` where masked.
    pub u_eff: Vec<Option<f64>>,
    pub masked: Vec<bool>,
    /// `signs[b][i]`: class of coupling `b` at sample `i`; `None` for `b = a`
    /// and masked samples.
    pub signs: Vec<Vec<Option<CouplingSign>>>,
    /// Largest `|psi_a'' - (eps_a + V_aa + U_eff - E) psi_a|` over unmasked
    /// finite-difference points, divided by `max|psi| * max(1, max|E - A|)`.
    pub identity_residual: f64,
    pub identity_points: usize,
}

impl EffectiveTrace {
    pub fn masked_count(&self) -> usize {
        self.masked.iter().filter(|&&m| m).count()
    }

    pub fn inverted_count(&self) -> usize {
        self.signs
            .iter()
            .flatten()
            .filter(|s| **s == Some(CouplingSign::Inverted))
            .count()
    }
}

/// Folds the off-diagonal couplings of channel `a` into a scalar potential
/// using the trace itself.
pub fn effective_potential(t: &WaveTrace, a: usize) -> Result<EffectiveTrace> {
    let n = t.channels();
    if a >= n {
        return Err(Error::InvalidArgument(format!("no channel {a}")));
    }
    if !t.is_real() {
        return Err(Error::InvalidArgument("effective potential needs a real trace".into()));
    }
    let ham = t.hamiltonian();
    let eps = ham.thresholds();
    let psi = |b: usize, i: usize| t.psi[b][i].re;
    let big_a = t.psi[a].iter().map(|z| z.re.abs()).fold(0.0, f64::max);
    let cut = KNOT_MASK * big_a;
    let fd = second_derivatives(t);

    let len = t.len();
    let mut u_eff = vec![None; len];
    let mut masked = vec![false; len];
    let mut signs = vec![vec![None; len]; n];
    let mut worst: f64 = 0.0;
    let mut points = 0;
    let mut max_kin: f64 = 0.0;
    for i in 0..len {
        let x = t.x[i];
        let vaa = ham.coupling(a, a, x).re;
        max_kin = max_kin.max((t.energy - eps[a] - vaa).abs());
        let pa = psi(a, i);
        if pa.abs() < cut || pa == 0.0 {
            masked[i] = true;
            continue;
        }
        let mut u = 0.0;
        for b in (0..n).filter(|&b| b != a) {
            let (c, s) = classify_coupling(ham.coupling(a, b, x).re, pa, psi(b, i));
            u += c;
            signs[b][i] = Some(s);
        }
        u_eff[i] = Some(u);
        if let Some(second) = fd[a][i] {
            let r = second.re - (eps[a] + vaa + u - t.energy) * pa;
            worst = worst.max(r.abs());
            points += 1;
        }
    }
    let big = t.psi.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
    let denom = big * max_kin.max(1.0);
    Ok(EffectiveTrace {
        channel: a,
        x: t.x.clone(),
        u_eff,
        masked,
        signs,
        identity_residual: if denom > 0.0 { worst / denom } else { worst },
        identity_points: points,
    })
}
