use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64 as C64;

use super::engine::{self, Recorder};
use super::{Hamiltonian, Options, WaveState};
use crate::error::{Error, Result};

/// A sampled solution at fixed energy.
///
/// Samples are ordered by `x`; a spike position appears twice, left limit
/// first. `psi[a][i]` is channel `a` at sample `i`.
#[derive(Debug, Clone)]
pub struct WaveTrace {
    pub energy: f64,
    pub h: f64,
    pub x: Vec<f64>,
    pub psi: Vec<Vec<C64>>,
    pub dpsi: Vec<Vec<C64>>,
    /// Natural log of the factor removed from each sample, when the run was
    /// rescaled.
    pub log_scale: Option<Vec<f64>>,
    /// Inclusive sample ranges of the smooth pieces.
    pub(crate) segments: Vec<(usize, usize)>,
    pub(crate) ham: Arc<Hamiltonian>,
}

impl WaveTrace {
    pub(crate) fn from_recorder(
        mut rec: Recorder,
        ham: Arc<Hamiltonian>,
        energy: f64,
        opts: Options,
        reversed: bool,
    ) -> Self {
        let len = rec.x.len();
        if reversed {
            rec.x.reverse();
            rec.psi.iter_mut().for_each(|v| v.reverse());
            rec.dpsi.iter_mut().for_each(|v| v.reverse());
            rec.log_scale.reverse();
            rec.segments = rec
                .segments
                .into_iter()
                .rev()
                .map(|(a, b)| (len - 1 - b, len - 1 - a))
                .collect();
        }
        let log_scale = opts.rescale.then_some(rec.log_scale);
        Self {
            energy,
            h: opts.h,
            x: rec.x,
            psi: rec.psi,
            dpsi: rec.dpsi,
            log_scale,
            segments: rec.segments,
            ham,
        }
    }

    pub fn channels(&self) -> usize {
        self.psi.len()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.ham
    }

    /// True when channel `a` carries no imaginary part beyond roundoff.
    pub fn is_real_channel(&self, a: usize) -> bool {
        let scale = self.psi[a].iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tol = 1e-13 * scale;
        self.psi[a].iter().all(|z| z.im.abs() <= tol)
    }

    pub fn is_real(&self) -> bool {
        (0..self.channels()).all(|a| self.is_real_channel(a))
    }

    pub fn state(&self, i: usize) -> WaveState {
        WaveState::new(
            self.psi.iter().map(|v| v[i]).collect(),
            self.dpsi.iter().map(|v| v[i]).collect(),
        )
        .at(self.x[i], self.energy)
    }

    /// Index of the smooth piece that contains `x`, preferring the right one
    /// at a boundary.
    pub(crate) fn segment_of(&self, x: f64) -> Option<usize> {
        let mut found = None;
        for (k, &(s, e)) in self.segments.iter().enumerate() {
            if self.x[s] <= x && x <= self.x[e] && s < e {
                found = Some(k);
                if x < self.x[e] {
                    break;
                }
            }
        }
        found
    }

    /// The state at an arbitrary `x` inside the trace, propagated from the
    /// nearest sample to its left. At a spike this is the right limit.
    /// Ignores rescaling.
    pub fn state_at(&self, x: f64) -> Result<WaveState> {
        let j = self.x.partition_point(|&v| v <= x);
        if j > 0 && self.x[j - 1] == x {
            return Ok(self.state(j - 1));
        }
        let k = self
            .segment_of(x)
            .ok_or_else(|| Error::InvalidArgument(format!("x = {x} outside the trace")))?;
        let (s, e) = self.segments[k];
        let i = s + self.x[s..=e].partition_point(|&v| v <= x).saturating_sub(1);
        let i = i.min(e);
        let st = self.state(i);
        let (p, q) = engine::advance_within(
            &self.ham,
            self.energy,
            self.x[s],
            self.x[e],
            self.x[i],
            &st.psi,
            &st.dpsi,
            x - self.x[i],
        );
        Ok(WaveState::new(p, q).at(x, self.energy))
    }

    /// Real scalar state `(psi, psi')` at `x + d`, propagated inside the
    /// smooth piece spanning samples `s..=e`.
    pub(crate) fn advance_real(&self, s: usize, e: usize, x: f64, psi: f64, dpsi: f64, d: f64) -> (f64, f64) {
        let (p, q) = engine::advance_within(
            &self.ham,
            self.energy,
            self.x[s],
            self.x[e],
            x,
            &[C64::new(psi, 0.0)],
            &[C64::new(dpsi, 0.0)],
            d,
        );
        (p[0].re, q[0].re)
    }

    /// Writes the trace as CSV: `x`, then per channel `psi_re, psi_im,
    /// dpsi_re, dpsi_im` with 1-based channel suffixes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["x".to_string()];
        for a in 1..=self.channels() {
            for col in ["psi_re", "psi_im", "dpsi_re", "dpsi_im"] {
                header.push(format!("{col}{a}"));
            }
        }
        if self.log_scale.is_some() {
            header.push("log_scale".into());
        }
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row = vec![crate::fmt_f64(self.x[i])];
            for a in 0..self.channels() {
                let (p, q) = (self.psi[a][i], self.dpsi[a][i]);
                for v in [p.re, p.im, q.re, q.im] {
                    row.push(crate::fmt_f64(v));
                }
            }
            if let Some(l) = &self.log_scale {
                row.push(crate::fmt_f64(l[i]));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `sum_a (psi1_a psi2_a' - psi1_a' psi2_a)` at every shared sample. For a
/// scalar problem this is the ordinary Wronskian.
pub fn wronskian(t1: &WaveTrace, t2: &WaveTrace) -> Result<Vec<C64>> {
    if t1.energy != t2.energy {
        return Err(Error::GridMismatch(format!(
            "energies differ: {} vs {}",
            t1.energy, t2.energy
        )));
    }
    if t1.x != t2.x || t1.channels() != t2.channels() {
        return Err(Error::GridMismatch(format!(
            "traces have {} and {} samples over different grids",
            t1.len(),
            t2.len()
        )));
    }
    if t1.log_scale.is_some() || t2.log_scale.is_some() {
        return Err(Error::GridMismatch("rescaled traces have no common normalisation".into()));
    }
    Ok((0..t1.len())
        .map(|i| {
            (0..t1.channels())
                .map(|a| t1.psi[a][i] * t2.dpsi[a][i] - t1.dpsi[a][i] * t2.psi[a][i])
                .sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_dirac_comb, ChannelSystemSpec, PotentialSpec};
    use crate::propagate::{integrate_channels, integrate_scalar};
    use std::f64::consts::PI;

    #[test]
    fn cos_sin_wronskian_is_one() {
        let z = PotentialSpec::zero();
        let c = integrate_scalar(&z, 1.0, 0.0, 10.0, &WaveState::scalar(1.0, 0.0), 0.01).unwrap();
        let s = integrate_scalar(&z, 1.0, 0.0, 10.0, &WaveState::scalar(0.0, 1.0), 0.01).unwrap();
        for w in wronskian(&c, &s).unwrap() {
            assert!((w - C64::new(1.0, 0.0)).norm() < 1e-13);
        }
        let c2 = integrate_scalar(&z, 1.0, 0.0, 10.0, &WaveState::scalar(2.0, 0.0), 0.01).unwrap();
        for w in wronskian(&c, &c2).unwrap() {
            assert!(w.norm() < 1e-12);
        }
    }

    #[test]
    fn mismatched_grids_rejected() {
        let z = PotentialSpec::zero();
        let a = integrate_scalar(&z, 1.0, 0.0, 1.0, &WaveState::scalar(1.0, 0.0), 0.01).unwrap();
        let b = integrate_scalar(&z, 1.0, 0.0, 1.0, &WaveState::scalar(1.0, 0.0), 0.02).unwrap();
        assert!(matches!(wronskian(&a, &b), Err(Error::GridMismatch(_))));
        let c = integrate_scalar(&z, 2.0, 0.0, 1.0, &WaveState::scalar(1.0, 0.0), 0.01).unwrap();
        assert!(matches!(wronskian(&a, &c), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn coupled_flux_is_constant() {
        let sys = ChannelSystemSpec {
            thresholds: vec![0.0, 0.4],
            matrix: vec![
                vec![PotentialSpec::sech2(-1.0, 1.0, 0.0), PotentialSpec::sech2(0.6, 1.3, 0.2)],
                vec![PotentialSpec::sech2(0.6, 1.3, 0.2), PotentialSpec::cosine(0.3, 2.0, 0.0)],
            ],
            point_couplings: vec![crate::model::PointCoupling {
                position: 0.5,
                strengths: vec![vec![0.2, -0.7], vec![-0.7, 1.1]],
            }],
        };
        let a = integrate_channels(&sys, 1.3, -5.0, 5.0, &WaveState::real(&[1.0, 0.0], &[0.0, 1.0]), 1e-3).unwrap();
        let b = integrate_channels(&sys, 1.3, -5.0, 5.0, &WaveState::real(&[0.3, 1.0], &[-1.0, 0.2]), 1e-3).unwrap();
        let w = wronskian(&a, &b).unwrap();
        for v in &w {
            assert!((v - w[0]).norm() < 1e-10);
        }
    }

    #[test]
    fn comb_wronskian_over_many_periods() {
        let comb = builtin_dirac_comb(2.0, PI).unwrap();
        let a = integrate_scalar(&comb, 2.5, 0.0, 100.0 * PI, &WaveState::scalar(1.0, 0.0), 0.1).unwrap();
        let b = integrate_scalar(&comb, 2.5, 0.0, 100.0 * PI, &WaveState::scalar(0.0, 1.0), 0.1).unwrap();
        let w = wronskian(&a, &b).unwrap();
        let dev = w.iter().map(|v| (v - w[0]).norm()).fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");
    }

    #[test]
    fn csv_layout() {
        let t = integrate_scalar(&PotentialSpec::zero(), 1.0, 0.0, 0.5, &WaveState::scalar(1.0, 0.0), 0.25).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "x,psi_re1,psi_im1,dpsi_re1,dpsi_im1");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0.0000000000000000e0,1.0000000000000000e0"));
    }

    #[test]
    fn state_at_interpolates_exactly() {
        let t = integrate_scalar(&PotentialSpec::zero(), 1.0, 0.0, 3.0, &WaveState::scalar(0.0, 1.0), 0.5).unwrap();
        let s = t.state_at(1.234).unwrap();
        assert!((s.psi[0].re - 1.234f64.sin()).abs() < 1e-14);
    }
}
