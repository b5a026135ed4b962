use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ChannelSystemSpec, PotentialSpec};
use crate::propagate::{self, Hamiltonian, Options, WaveState, WaveTrace};

/// Which end of the line the fit window belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    /// `psi ~ e^{kappa x}` toward `-inf`.
    Left,
    /// `psi ~ e^{-kappa x}` toward `+inf`.
    Right,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelDecay {
    pub channel: usize,
    /// `sqrt(eps_a - E)` for a closed channel.
    pub nominal: Option<f64>,
    /// Fitted decay rate toward the tail; positive means decaying. NaN when
    /// fewer than two usable points remain, e.g. an open channel whose
    /// oscillation is longer than the window.
    pub fitted: f64,
    /// The channel changed sign inside the window and only the local maxima
    /// of `|psi|` were fitted.
    pub low_confidence: bool,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub energy: f64,
    pub window: (f64, f64),
    pub tail: Tail,
    pub channels: Vec<ChannelDecay>,
    /// A closed channel with the smaller nominal `kappa` decays faster than
    /// one with a larger `kappa`.
    pub inversion: bool,
}

/// Least-squares decay rates of `ln|psi_a|` over `window`.
pub fn decay_exponents(t: &WaveTrace, window: (f64, f64), tail: Tail) -> Result<DecayReport> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi}]")));
    }
    if t.x.first().map_or(true, |&x| x > lo) || t.x.last().map_or(true, |&x| x < hi) {
        return Err(Error::InvalidArgument(format!(
            "trace does not cover the window [{lo}, {hi}]"
        )));
    }
    let eps = t.hamiltonian().thresholds();
    let idx: Vec<usize> = (0..t.len()).filter(|&i| t.x[i] >= lo && t.x[i] <= hi).collect();
    let mut channels = Vec::with_capacity(t.channels());
    for a in 0..t.channels() {
        let mags: Vec<f64> = idx.iter().map(|&i| t.psi[a][i].norm()).collect();
        let mut crosses = mags.iter().any(|&m| m == 0.0);
        if t.is_real_channel(a) {
            crosses |= idx.windows(2).any(|w| t.psi[a][w[0]].re * t.psi[a][w[1]].re < 0.0);
        }
        let pts: Vec<(f64, f64)> = if crosses {
            (1..idx.len().saturating_sub(1))
                .filter(|&j| mags[j] > 0.0 && mags[j] >= mags[j - 1] && mags[j] >= mags[j + 1])
                .map(|j| (t.x[idx[j]], mags[j].ln()))
                .collect()
        } else {
            idx.iter().zip(&mags).map(|(&i, m)| (t.x[i], m.ln())).collect()
        };
        let fitted = if pts.len() < 2 {
            f64::NAN
        } else {
            match tail {
                Tail::Left => slope(&pts),
                Tail::Right => -slope(&pts),
            }
        };
        channels.push(ChannelDecay {
            channel: a,
            nominal: (eps[a] > t.energy).then(|| (eps[a] - t.energy).sqrt()),
            fitted,
            low_confidence: crosses,
            points: pts.len(),
        });
    }
    let inversion = channels.iter().any(|p| {
        channels.iter().any(|q| match (p.nominal, q.nominal) {
            (Some(kp), Some(kq)) => kp < kq && p.fitted > q.fitted,
            _ => false,
        })
    });
    Ok(DecayReport {
        energy: t.energy,
        window,
        tail,
        channels,
        inversion,
    })
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Two closed channels coupled by `V12 = c e^{-mu x}`, each started at
/// `start` on a unit decaying tail and integrated toward smaller `x`. The
/// right-tail decay rates are then fitted over `window` for every `c`.
#[derive(Debug, Clone, Serialize)]
pub struct InversionScan {
    pub thresholds: [f64; 2],
    pub energy: f64,
    pub mu: f64,
    pub couplings: Vec<f64>,
    pub start: f64,
    pub end: f64,
    pub window: (f64, f64),
    pub h: f64,
}

impl Default for InversionScan {
    fn default() -> Self {
        Self {
            thresholds: [0.0, 1.0],
            energy: -0.25,
            mu: 1.0,
            couplings: (0..=16).map(|j| 10f64.powf(0.5 * j as f64 - 4.0)).collect(),
            start: 20.0,
            end: 1.0,
            window: (2.0, 8.0),
            h: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InversionScanRow {
    pub coupling: f64,
    pub report: DecayReport,
}

impl InversionScan {
    pub fn system(&self, c: f64) -> ChannelSystemSpec {
        let off = PotentialSpec::cexp(C64::new(c, 0.0), C64::new(0.0, self.mu));
        ChannelSystemSpec {
            thresholds: self.thresholds.to_vec(),
            matrix: vec![
                vec![PotentialSpec::zero(), off.clone()],
                vec![off, PotentialSpec::zero()],
            ],
            point_couplings: Vec::new(),
        }
    }
}

/// Runs the coupling scan; rows follow `couplings`.
pub fn decay_inversion_scan(scan: &InversionScan) -> Result<Vec<InversionScanRow>> {
    let [e1, e2] = scan.thresholds;
    if !(scan.energy < e1 && e1 < e2) {
        return Err(Error::InvalidArgument(
            "need E below both thresholds and eps1 < eps2".into(),
        ));
    }
    let k1 = (e1 - scan.energy).sqrt();
    let k2 = (e2 - scan.energy).sqrt();
    let init = WaveState::real(&[1.0, 1.0], &[-k1, -k2]);
    scan.couplings
        .par_iter()
        .map(|&c| {
            let sys = scan.system(c);
            sys.validate()?;
            let t = propagate::integrate(
                Arc::new(Hamiltonian::from_channels(&sys)),
                scan.energy,
                scan.start,
                scan.end,
                &init,
                Options::with_h(scan.h),
            )?;
            Ok(InversionScanRow {
                coupling: c,
                report: decay_exponents(&t, scan.window, Tail::Right)?,
            })
        })
        .collect()
}
