//! A two-channel state at an energy inside the open channel's continuum
//! whose open component is confined to `[0, L]` by two point couplings.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use serde::Serialize;

use crate::channels::{decay_exponents, Tail};
use crate::error::{Error, Result};
use crate::model::{ChannelSystemSpec, PointCoupling, PotentialSpec};
use crate::propagate::{self, Hamiltonian, Options, WaveState};

/// Allowed relative mismatch between `k L` and `n pi`.
const SUPPORT_TOL: f64 = 1e-10;
pub const ODE_TOL: f64 = 1e-9;
pub const JUMP_TOL: f64 = 1e-12;
pub const LEAKAGE_TOL: f64 = 1e-8;
pub const TAIL_TOL: f64 = 1e-3;
/// Free margin on both sides of the support used by the checks.
pub const MARGIN: f64 = 5.0;
/// Step of the shooting run and of the residual grid.
const STEP: f64 = 1e-3;
/// Second-difference spacing for the residual check.
const FD: f64 = 2e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BsecSolution {
    pub length: f64,
    pub energy: f64,
    pub mode: u32,
    pub k: f64,
    /// Threshold of the closed channel; the open one starts at 0.
    pub threshold: f64,
    pub kappa: f64,
    pub a0: f64,
    pub a_l: f64,
    /// Off-diagonal strengths at `0` and `L`.
    pub g0: f64,
    pub g_l: f64,
    /// Closed-channel diagonal strengths at `0` and `L`.
    pub h0: f64,
    pub h_l: f64,
}

/// Builds the solution and the point couplings that carry it. `energy` must
/// equal `(n pi / L)^2`.
pub fn construct(energy: f64, threshold: f64, length: f64, mode: u32, a0: f64, a_l: f64) -> Result<BsecSolution> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::InvalidArgument(format!("L = {length} must be > 0")));
    }
    if mode == 0 {
        return Err(Error::InvalidArgument("mode n must be >= 1".into()));
    }
    if !(energy.is_finite() && energy > 0.0) {
        return Err(Error::InvalidArgument(format!("E = {energy} must be > 0")));
    }
    if !(a0.is_finite() && a_l.is_finite() && a0 != 0.0 && a_l != 0.0) {
        return Err(Error::InvalidArgument("A0 and AL must be nonzero".into()));
    }
    let k = energy.sqrt();
    let target = mode as f64 * PI;
    if (k * length - target).abs() > SUPPORT_TOL * target {
        return Err(Error::SupportMismatch { kl: k * length, mode });
    }
    if !(threshold.is_finite() && threshold > energy) {
        return Err(Error::ChannelNotClosed { threshold, energy });
    }
    let kappa = (threshold - energy).sqrt();
    let decay = (-kappa * length).exp();
    let p0 = a0 + a_l * decay;
    let pl = a0 * decay + a_l;
    if p0 == 0.0 || pl == 0.0 {
        return Err(Error::InvalidArgument(
            "closed-channel wave vanishes at a coupling point".into(),
        ));
    }
    let parity = if mode % 2 == 0 { -1.0 } else { 1.0 };
    Ok(BsecSolution {
        length,
        energy,
        mode,
        k,
        threshold,
        kappa,
        a0,
        a_l,
        g0: k / p0,
        g_l: k * parity / pl,
        h0: -2.0 * kappa * a0 / p0,
        h_l: -2.0 * kappa * a_l / pl,
    })
}

/// One of the four coupling strengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    G0,
    GL,
    H0,
    HL,
}

impl Strength {
    pub const ALL: [Strength; 4] = [Strength::G0, Strength::GL, Strength::H0, Strength::HL];
}

impl BsecSolution {
    /// The channel system with the two point couplings.
    pub fn system(&self) -> ChannelSystemSpec {
        let z = PotentialSpec::zero;
        ChannelSystemSpec {
            thresholds: vec![0.0, self.threshold],
            matrix: vec![vec![z(), z()], vec![z(), z()]],
            point_couplings: vec![
                PointCoupling {
                    position: 0.0,
                    strengths: vec![vec![0.0, self.g0], vec![self.g0, self.h0]],
                },
                PointCoupling {
                    position: self.length,
                    strengths: vec![vec![0.0, self.g_l], vec![self.g_l, self.h_l]],
                },
            ],
        }
    }

    /// A copy with one strength multiplied by `1 + rel`.
    pub fn detuned(&self, which: Strength, rel: f64) -> Self {
        let mut s = self.clone();
        let f = 1.0 + rel;
        match which {
            Strength::G0 => s.g0 *= f,
            Strength::GL => s.g_l *= f,
            Strength::H0 => s.h0 *= f,
            Strength::HL => s.h_l *= f,
        }
        s
    }

    /// `(psi_1, psi_2)` of the closed form.
    pub fn psi(&self, x: f64) -> [f64; 2] {
        let open = if (0.0..=self.length).contains(&x) {
            (self.k * x).sin()
        } else {
            0.0
        };
        let closed = self.a0 * (-self.kappa * x.abs()).exp() + self.a_l * (-self.kappa * (x - self.length).abs()).exp();
        [open, closed]
    }

    /// `(psi_1', psi_2')` of the closed form; `right` picks the one-sided
    /// limit at the coupling points.
    pub fn dpsi(&self, x: f64, right: bool) -> [f64; 2] {
        let l = self.length;
        let inside = if right { x >= 0.0 && x < l } else { x > 0.0 && x <= l };
        let open = if inside { self.k * (self.k * x).cos() } else { 0.0 };
        let side = |d: f64| {
            if d > 0.0 || (d == 0.0 && right) {
                -1.0
            } else {
                1.0
            }
        };
        let closed = self.kappa
            * (side(x) * self.a0 * (-self.kappa * x.abs()).exp()
                + side(x - l) * self.a_l * (-self.kappa * (x - l).abs()).exp());
        [open, closed]
    }

    /// `int psi_2^2 dx` over the whole line.
    pub fn closed_norm(&self) -> f64 {
        let (k, l) = (self.kappa, self.length);
        (self.a0 * self.a0 + self.a_l * self.a_l) / k + 2.0 * self.a0 * self.a_l * (-k * l).exp() * (l + 1.0 / k)
    }

    /// Writes `x, psi1, psi2` at `samples` evenly spaced points of
    /// `[-MARGIN, L + MARGIN]`.
    pub fn write_csv<W: Write>(&self, mut w: W, samples: usize) -> io::Result<()> {
        writeln!(w, "x,psi1,psi2")?;
        let (lo, hi) = (-MARGIN, self.length + MARGIN);
        let n = samples.max(2);
        for j in 0..n {
            let x = lo + (hi - lo) * j as f64 / (n - 1) as f64;
            let [p1, p2] = self.psi(x);
            writeln!(w, "{},{},{}", crate::fmt_f64(x), crate::fmt_f64(p1), crate::fmt_f64(p2))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BsecReport {
    /// Largest relative residual of the closed form in the smooth regions.
    pub ode_residual: f64,
    /// Largest mismatch of the four jump conditions.
    pub jump_residual: f64,
    /// The larger of the two shooting leakages.
    pub leakage: f64,
    /// `max|psi_1|` beyond `L` over `max|psi_1|` on `[0, L]`, shooting the
    /// coupled system from `-MARGIN` with `psi_1 = 0` and a decaying `psi_2`.
    pub forward_leakage: f64,
    /// The mirror image: shooting from `L + MARGIN`, measured below 0.
    pub backward_leakage: f64,
    pub closed_norm: f64,
    /// Decay rate of `psi_2` fitted on `[L + 1, L + MARGIN]`.
    pub tail_exponent: f64,
    pub tail_error: f64,
    pub ode_ok: bool,
    pub jump_ok: bool,
    pub support_ok: bool,
    pub tail_ok: bool,
}

impl BsecReport {
    pub fn passed(&self) -> bool {
        self.ode_ok && self.jump_ok && self.support_ok && self.tail_ok
    }

    /// Named descriptions of the failed checks.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.ode_ok {
            out.push(format!("ode residual {:e} exceeds {ODE_TOL:e}", self.ode_residual));
        }
        if !self.jump_ok {
            out.push(format!("jump residual {:e} exceeds {JUMP_TOL:e}", self.jump_residual));
        }
        if !self.support_ok {
            out.push(format!("open-channel leakage {:e} exceeds {LEAKAGE_TOL:e}", self.leakage));
        }
        if !self.tail_ok {
            out.push(format!("tail exponent error {:e} exceeds {TAIL_TOL:e}", self.tail_error));
        }
        out
    }

    pub fn ensure(&self) -> Result<()> {
        let f = self.failures();
        if f.is_empty() {
            Ok(())
        } else {
            Err(Error::VerificationFailed(f.join("; ")))
        }
    }
}

/// Runs the four checks. A failed check is reported in the result, not as an
/// error; use [`BsecReport::ensure`] to turn it into one.
pub fn verify(sol: &BsecSolution) -> Result<BsecReport> {
    let l = sol.length;
    let e = sol.energy;

    // closed-form residual in the three smooth regions
    let mut worst: f64 = 0.0;
    let mut big: f64 = 0.0;
    for (lo, hi) in [(-MARGIN, 0.0), (0.0, l), (l, l + MARGIN)] {
        let n = ((hi - lo) / STEP).ceil() as usize;
        for j in 0..=n {
            let x = lo + (hi - lo) * j as f64 / n as f64;
            if x - 2.0 * FD <= lo || x + 2.0 * FD >= hi {
                continue;
            }
            let f = |y: f64| sol.psi(y);
            let v = f(x);
            let s = [f(x - 2.0 * FD), f(x - FD), f(x + FD), f(x + 2.0 * FD)];
            for a in 0..2 {
                let second = (-s[0][a] + 16.0 * s[1][a] - 30.0 * v[a] + 16.0 * s[2][a] - s[3][a]) / (12.0 * FD * FD);
                let eps = if a == 0 { 0.0 } else { sol.threshold };
                worst = worst.max((second - (eps - e) * v[a]).abs());
                big = big.max(v[a].abs());
            }
        }
    }
    let scale = big * e.max(sol.threshold - e).max(1.0);
    let ode_residual = worst / scale;

    // jump conditions
    let mut jump_residual: f64 = 0.0;
    for (x, g, h) in [(0.0, sol.g0, sol.h0), (l, sol.g_l, sol.h_l)] {
        let p = sol.psi(x);
        let (dl, dr) = (sol.dpsi(x, false), sol.dpsi(x, true));
        jump_residual = jump_residual.max((dr[0] - dl[0] - g * p[1]).abs());
        jump_residual = jump_residual.max((dr[1] - dl[1] - g * p[0] - h * p[1]).abs());
    }
    jump_residual /= sol.k.max(sol.kappa).max(1.0);

    // shooting from either tail with the open channel at rest
    let ham = Arc::new(Hamiltonian::from_channels(&sol.system()));
    let opts = Options::with_h(STEP);
    let p2 = sol.psi(-MARGIN)[1];
    let init = WaveState::real(&[0.0, p2], &[0.0, sol.kappa * p2]);
    let fwd = propagate::integrate(ham.clone(), e, -MARGIN, l + MARGIN, &init, opts)?;
    let p2 = sol.psi(l + MARGIN)[1];
    let init = WaveState::real(&[0.0, p2], &[0.0, -sol.kappa * p2]);
    let bwd = propagate::integrate(ham, e, l + MARGIN, -MARGIN, &init, opts)?;
    let ratio = |t: &propagate::WaveTrace, outside: &dyn Fn(f64) -> bool| {
        let (mut inside, mut out) = (0.0f64, 0.0f64);
        for i in 0..t.len() {
            let v = t.psi[0][i].norm();
            if t.x[i] >= 0.0 && t.x[i] <= l {
                inside = inside.max(v);
            } else if outside(t.x[i]) {
                out = out.max(v);
            }
        }
        out / inside
    };
    let forward_leakage = ratio(&fwd, &|x| x > l);
    let backward_leakage = ratio(&bwd, &|x| x < 0.0);
    let leakage = forward_leakage.max(backward_leakage);
    let tail_exponent = decay_exponents(&fwd, (l + 1.0, l + MARGIN), Tail::Right)?.channels[1].fitted;
    let tail_error = (tail_exponent - sol.kappa).abs() / sol.kappa;
    let closed_norm = sol.closed_norm();

    Ok(BsecReport {
        ode_residual,
        jump_residual,
        leakage,
        forward_leakage,
        backward_leakage,
        closed_norm,
        tail_exponent,
        tail_error,
        ode_ok: ode_residual < ODE_TOL,
        jump_ok: jump_residual < JUMP_TOL,
        support_ok: leakage < LEAKAGE_TOL,
        tail_ok: tail_error < TAIL_TOL && closed_norm.is_finite() && closed_norm > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_strengths() {
        let s = construct(1.0, 2.0, PI, 1, 1.0, 1.0).unwrap();
        let p = 1.0 + (-PI).exp();
        assert!((s.g0 - 1.0 / p).abs() < 1e-15);
        assert!((s.g_l - 1.0 / p).abs() < 1e-15);
        assert!((s.h0 + 2.0 / p).abs() < 1e-15 && s.h0 == s.h_l);
    }

    #[test]
    fn reference_passes() {
        let s = construct(1.0, 2.0, PI, 1, 1.0, 1.0).unwrap();
        let r = verify(&s).unwrap();
        assert!(r.passed(), "{r:?}");
        let s2 = construct(4.0, 5.0, PI, 2, 1.0, 1.0).unwrap();
        assert!(s2.g_l == -s2.g0);
        let r2 = verify(&s2).unwrap();
        assert!(r2.passed(), "{r2:?}");
    }

    #[test]
    fn detuning_leaks() {
        let s = construct(1.0, 2.0, PI, 1, 1.0, 1.0).unwrap();
        for w in Strength::ALL {
            let r = verify(&s.detuned(w, 0.01)).unwrap();
            assert!(r.leakage > 1e-4, "{w:?}: {}", r.leakage);
            assert!(r.ensure().is_err());
        }
    }

    #[test]
    fn bad_parameters() {
        assert!(matches!(
            construct(1.1, 2.0, PI, 1, 1.0, 1.0),
            Err(Error::SupportMismatch { .. })
        ));
        assert!(matches!(
            construct(1.0, 0.5, PI, 1, 1.0, 1.0),
            Err(Error::ChannelNotClosed { .. })
        ));
    }
}
