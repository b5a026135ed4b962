//! Multichannel scattering and channel-coupling diagnostics.

mod decay;
mod effective;
mod transparent;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;

pub use decay::{decay_exponents, decay_inversion_scan, ChannelDecay, DecayReport, InversionScan, InversionScanRow, Tail};
pub use effective::{classify_coupling, effective_potential, CouplingSign, EffectiveTrace};
pub use transparent::{verify_transparent, TransparentReport, TransparentRow, DECOUPLING_TOL, REFLECTION_TOL};

use crate::error::{Error, Result};
use crate::model::{ChannelSystemSpec, PotentialSpec};
use crate::propagate::engine::{self, Block, RunConfig};
use crate::propagate::{Hamiltonian, DEFAULT_H};

/// Potentials below this magnitude are treated as zero when choosing the
/// matching window.
pub const WINDOW_TOL: f64 = 1e-10;
/// Free margin added on both sides of the automatic window.
const WINDOW_PAD: f64 = 1.0;
/// Matching matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterOptions {
    /// Matching window; chosen from the potentials when `None`.
    pub window: Option<(f64, f64)>,
    pub h: f64,
}

impl Default for ScatterOptions {
    fn default() -> Self {
        Self {
            window: None,
            h: DEFAULT_H,
        }
    }
}

/// Amplitudes for unit plane waves `e^{+-i k x}` incident from either side.
///
/// Open channels are the first `open` ones. `r_left[b][a]` is the amplitude
/// of `e^{-i k_b x}` on the left for a wave `e^{i k_a x}` coming in from the
/// left in channel `a`; `t_left[b][a]` the amplitude of `e^{i k_b x}` on the
/// right. `r_right` and `t_right` describe incidence `e^{-i k_a x}` from the
/// right.
#[derive(Debug, Clone, Serialize)]
pub struct ScatteringResult {
    pub energy: f64,
    pub open: usize,
    /// `k_a = sqrt(E - eps_a)` for the open channels.
    pub momenta: Vec<f64>,
    /// `kappa_a = sqrt(eps_a - E)` for the closed channels.
    pub decay: Vec<f64>,
    pub r_left: Vec<Vec<C64>>,
    pub t_left: Vec<Vec<C64>>,
    pub r_right: Vec<Vec<C64>>,
    pub t_right: Vec<Vec<C64>>,
    pub window: (f64, f64),
    /// Condition number of the column-normalised matching matrix.
    pub condition: f64,
}

impl ScatteringResult {
    fn flux(&self, b: usize, a: usize) -> f64 {
        self.momenta[b] / self.momenta[a]
    }

    /// Flux-normalised reflection probability `b <- a` for incidence from
    /// the left.
    pub fn reflection(&self, b: usize, a: usize) -> f64 {
        self.flux(b, a) * self.r_left[b][a].norm_sqr()
    }

    pub fn transmission(&self, b: usize, a: usize) -> f64 {
        self.flux(b, a) * self.t_left[b][a].norm_sqr()
    }

    /// Largest `|sum_b (k_b / k_a)(|r_ba|^2 + |t_ba|^2) - 1|` over incident
    /// channels and both sides.
    pub fn unitarity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.open {
            for (r, t) in [(&self.r_left, &self.t_left), (&self.r_right, &self.t_right)] {
                let s: f64 = (0..self.open)
                    .map(|b| self.flux(b, a) * (r[b][a].norm_sqr() + t[b][a].norm_sqr()))
                    .sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }

    /// Largest `|k_b t_left[b][a] - k_a t_right[a][b]|`, with the
    /// corresponding symmetry of the left reflection block.
    pub fn reciprocity_defect(&self) -> f64 {
        let k = &self.momenta;
        let mut worst: f64 = 0.0;
        for a in 0..self.open {
            for b in 0..self.open {
                worst = worst.max((self.t_left[b][a] * k[b] - self.t_right[a][b] * k[a]).norm());
                worst = worst.max((self.r_left[b][a] * k[b] - self.r_left[a][b] * k[a]).norm());
            }
        }
        worst
    }

    /// Largest total reflection `sqrt(sum_b (k_b/k_a)|r_ba|^2)` over incident
    /// channels and both sides.
    pub fn total_reflection(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.open {
            for r in [&self.r_left, &self.r_right] {
                let s: f64 = (0..self.open).map(|b| self.flux(b, a) * r[b][a].norm_sqr()).sum();
                worst = worst.max(s.sqrt());
            }
        }
        worst
    }
}

/// Scattering off a single decaying potential at `E > 0`.
pub fn scattering_scalar(p: &PotentialSpec, energy: f64, opts: &ScatterOptions) -> Result<ScatteringResult> {
    p.validate()?;
    if !(energy > 0.0) {
        return Err(Error::NoOpenChannels { energy });
    }
    let window = match opts.window {
        Some(w) => checked_window(w)?,
        None => padded(p.decay_window(WINDOW_TOL)?),
    };
    solve(&Hamiltonian::scalar(p), energy, window, opts.h)
}

/// Scattering in a coupled-channel system. Closed channels are matched to
/// decaying exponentials on both sides.
pub fn scattering_channels(
    sys: &ChannelSystemSpec,
    energy: f64,
    opts: &ScatterOptions,
) -> Result<ScatteringResult> {
    sys.validate()?;
    let window = match opts.window {
        Some(w) => checked_window(w)?,
        None => auto_window(sys)?,
    };
    solve(&Hamiltonian::from_channels(sys), energy, window, opts.h)
}

/// Interval outside which every matrix entry is below [`WINDOW_TOL`] and no
/// point coupling sits, padded by a free margin.
pub fn auto_window(sys: &ChannelSystemSpec) -> Result<(f64, f64)> {
    let mut span: Option<(f64, f64)> = None;
    let mut add = |w: (f64, f64)| {
        span = Some(match span {
            Some((a, b)) => (a.min(w.0), b.max(w.1)),
            None => w,
        });
    };
    for p in sys.matrix.iter().flatten() {
        if let Some(w) = p.decay_window(WINDOW_TOL)? {
            add(w);
        }
    }
    for pc in &sys.point_couplings {
        add((pc.position, pc.position));
    }
    Ok(padded(span))
}

fn padded(span: Option<(f64, f64)>) -> (f64, f64) {
    match span {
        Some((a, b)) => (a - WINDOW_PAD, b + WINDOW_PAD),
        None => (-WINDOW_PAD, WINDOW_PAD),
    }
}

fn checked_window(w: (f64, f64)) -> Result<(f64, f64)> {
    if w.0.is_finite() && w.1.is_finite() && w.0 < w.1 {
        Ok(w)
    } else {
        Err(Error::InvalidArgument(format!("bad matching window [{}, {}]", w.0, w.1)))
    }
}

fn basis_column(n: usize, channel: usize, psi: C64, dpsi: C64, p: &mut Vec<C64>, q: &mut Vec<C64>) {
    for b in 0..n {
        let on = b == channel;
        p.push(if on { psi } else { C64::new(0.0, 0.0) });
        q.push(if on { dpsi } else { C64::new(0.0, 0.0) });
    }
}

/// Inward matching at the window midpoint.
fn solve(ham: &Hamiltonian, energy: f64, window: (f64, f64), h: f64) -> Result<ScatteringResult> {
    let n = ham.channels();
    let eps = ham.thresholds();
    if !energy.is_finite() || energy <= eps[0] {
        return Err(Error::NoOpenChannels { energy });
    }
    let no = eps.iter().filter(|&&t| energy > t).count();
    let nc = n - no;
    let momenta: Vec<f64> = eps[..no].iter().map(|t| (energy - t).sqrt()).collect();
    let decay: Vec<f64> = eps[no..].iter().map(|t| (t - energy).sqrt()).collect();
    let (xl, xr) = window;
    let xm = 0.5 * (xl + xr);
    let i = C64::new(0.0, 1.0);

    // left: [e^{ikx} (no), e^{-ikx} (no), e^{kappa (x - xl)} (nc)]
    let (mut p, mut q) = (Vec::new(), Vec::new());
    for (a, &k) in momenta.iter().enumerate() {
        let w = (i * k * xl).exp();
        basis_column(n, a, w, i * k * w, &mut p, &mut q);
    }
    for (a, &k) in momenta.iter().enumerate() {
        let w = (-i * k * xl).exp();
        basis_column(n, a, w, -i * k * w, &mut p, &mut q);
    }
    for (c, &kap) in decay.iter().enumerate() {
        basis_column(n, no + c, C64::new(1.0, 0.0), C64::new(kap, 0.0), &mut p, &mut q);
    }
    let mut left = Block { n, m: 2 * no + nc, p, q };

    // right: [e^{ikx} (no), e^{-ikx} (no), e^{-kappa (x - xr)} (nc)]
    let (mut p, mut q) = (Vec::new(), Vec::new());
    for (a, &k) in momenta.iter().enumerate() {
        let w = (i * k * xr).exp();
        basis_column(n, a, w, i * k * w, &mut p, &mut q);
    }
    for (a, &k) in momenta.iter().enumerate() {
        let w = (-i * k * xr).exp();
        basis_column(n, a, w, -i * k * w, &mut p, &mut q);
    }
    for (c, &kap) in decay.iter().enumerate() {
        basis_column(n, no + c, C64::new(1.0, 0.0), C64::new(-kap, 0.0), &mut p, &mut q);
    }
    let mut right = Block { n, m: 2 * no + nc, p, q };

    let cfg = RunConfig {
        h,
        sample: false,
        rescale: false,
    };
    engine::run(ham, energy, xl, xm, &mut left, cfg, None)?;
    engine::run(ham, energy, xr, xm, &mut right, cfg, None)?;
    let l = left.to_matrix();
    let r = right.to_matrix();

    // columns: [L_out, L_closed, -R_in, -R_closed]
    let mut a = DMatrix::<C64>::zeros(2 * n, 2 * n);
    for j in 0..no {
        a.set_column(j, &l.column(no + j));
        a.set_column(no + nc + j, &(-r.column(j)));
    }
    for j in 0..nc {
        a.set_column(no + j, &l.column(2 * no + j));
        a.set_column(2 * no + nc + j, &(-r.column(2 * no + j)));
    }
    let norms: Vec<f64> = (0..2 * n).map(|j| a.column(j).norm()).collect();
    for (j, &s) in norms.iter().enumerate() {
        if !(s > 0.0) {
            return Err(Error::MatchingDegenerate {
                condition: f64::INFINITY,
            });
        }
        a.column_mut(j).scale_mut(1.0 / s);
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::MatchingDegenerate { condition });
    }
    let lu = a.lu();
    let solve_for = |b: DVector<C64>| -> Result<Vec<C64>> {
        let u = lu.solve(&b).ok_or(Error::MatchingDegenerate {
            condition: f64::INFINITY,
        })?;
        Ok(u.iter().zip(&norms).map(|(v, s)| v / s).collect())
    };

    let zero = vec![vec![C64::new(0.0, 0.0); no]; no];
    let (mut r_left, mut t_left, mut r_right, mut t_right) = (zero.clone(), zero.clone(), zero.clone(), zero);
    for al in 0..no {
        let u = solve_for(-l.column(al).into_owned())?;
        for b in 0..no {
            r_left[b][al] = u[b];
            t_left[b][al] = u[no + nc + b];
        }
        let u = solve_for(r.column(no + al).into_owned())?;
        for b in 0..no {
            t_right[b][al] = u[b];
            r_right[b][al] = u[no + nc + b];
        }
    }
    Ok(ScatteringResult {
        energy,
        open: no,
        momenta,
        decay,
        r_left,
        t_left,
        r_right,
        t_right,
        window,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_soliton, builtin_transparent_pair, Element, TransparentVariant};

    fn opts() -> ScatterOptions {
        ScatterOptions::default()
    }

    #[test]
    fn free_space_is_transparent() {
        let s = scattering_scalar(&PotentialSpec::zero(), 1.0, &opts()).unwrap();
        assert!(s.r_left[0][0].norm() < 1e-14);
        assert!((s.t_left[0][0] - 1.0).norm() < 1e-14);
    }

    #[test]
    fn delta_reflection() {
        for g in [0.5, 2.0, -1.5] {
            let p = PotentialSpec::Piecewise {
                elements: vec![Element::delta(g)],
                start: 0.0,
            };
            let s = scattering_scalar(&p, 1.0, &opts()).unwrap();
            let want = g * g / (g * g + 4.0);
            assert!((s.reflection(0, 0) - want).abs() < 1e-13, "{g}: {}", s.reflection(0, 0));
            assert!(s.unitarity_defect() < 1e-13);
        }
    }

    #[test]
    fn soliton_reflectionless() {
        let p = builtin_soliton(1.0, 0.0).unwrap();
        for e in [0.5, 1.0, 5.0] {
            let s = scattering_scalar(&p, e, &opts()).unwrap();
            assert!(s.r_left[0][0].norm() < 1e-6, "{e}: {}", s.r_left[0][0].norm());
            assert!((s.t_left[0][0].norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn below_threshold_rejected() {
        assert!(matches!(
            scattering_scalar(&PotentialSpec::zero(), 0.0, &opts()),
            Err(Error::NoOpenChannels { .. })
        ));
        let sys = ChannelSystemSpec::diagonal(vec![0.5, 1.0], vec![PotentialSpec::zero(), PotentialSpec::zero()]);
        assert!(matches!(
            scattering_channels(&sys, 0.2, &opts()),
            Err(Error::NoOpenChannels { .. })
        ));
    }

    #[test]
    fn uncoupled_matches_scalar() {
        let v1 = PotentialSpec::sech2(-1.3, 0.8, 0.3);
        let v2 = PotentialSpec::sech2(0.7, 1.2, -0.4);
        let sys = ChannelSystemSpec::diagonal(vec![0.0, 0.5], vec![v1.clone(), v2.clone()]);
        let s = scattering_channels(&sys, 1.7, &opts()).unwrap();
        let o = ScatterOptions {
            window: Some(s.window),
            ..opts()
        };
        let s1 = scattering_scalar(&v1, 1.7, &o).unwrap();
        let s2 = scattering_scalar(&v2, 1.2, &o).unwrap();
        for (c, sc) in [(0, &s1), (1, &s2)] {
            assert!((s.r_left[c][c] - sc.r_left[0][0]).norm() < 1e-10);
            assert!((s.t_left[c][c] - sc.t_left[0][0]).norm() < 1e-10);
            assert!((s.r_right[c][c] - sc.r_right[0][0]).norm() < 1e-10);
        }
        assert!(s.r_left[0][1].norm() < 1e-14 && s.t_left[1][0].norm() < 1e-14);
    }

    fn coupled_sample() -> ChannelSystemSpec {
        let off = PotentialSpec::sech2(0.8, 1.1, 0.2);
        ChannelSystemSpec {
            thresholds: vec![0.0, 0.6],
            matrix: vec![
                vec![PotentialSpec::sech2(-1.5, 1.0, 0.0), off.clone()],
                vec![off, PotentialSpec::sech2(0.9, 0.7, -0.3)],
            ],
            point_couplings: vec![crate::model::PointCoupling {
                position: 0.4,
                strengths: vec![vec![0.3, -0.5], vec![-0.5, 0.2]],
            }],
        }
    }

    #[test]
    fn coupled_flux_unitarity_and_reciprocity() {
        let sys = coupled_sample();
        for e in [0.3, 0.9, 2.5] {
            let s = scattering_channels(&sys, e, &opts()).unwrap();
            assert_eq!(s.open, if e > 0.6 { 2 } else { 1 });
            assert!(s.unitarity_defect() < 1e-8, "{e}: {}", s.unitarity_defect());
            assert!(s.reciprocity_defect() < 1e-8, "{e}: {}", s.reciprocity_defect());
        }
    }

    #[test]
    fn transparent_pair_at_one() {
        let sys = builtin_transparent_pair(TransparentVariant::A, 1.0).unwrap();
        let s = scattering_channels(&sys, 1.0, &opts()).unwrap();
        assert!(s.total_reflection() < 1e-6, "{}", s.total_reflection());
    }
}
