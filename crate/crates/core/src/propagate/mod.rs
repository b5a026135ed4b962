//! Integration of the single- and multichannel stationary equations.

mod diagnostics;
pub(crate) mod engine;
mod system;
mod trace;

use std::sync::Arc;

use num_complex::Complex64 as C64;

pub use diagnostics::{find_knots, residual_check, Bending, BendingSample, ResidualReport};
pub use system::Hamiltonian;
pub(crate) use diagnostics::second_derivatives;
pub(crate) use system::snap_tol;
pub use trace::{wronskian, WaveTrace};

use crate::error::{Error, Result};
use crate::model::{ChannelSystemSpec, PotentialSpec};
use engine::{Block, Recorder, RunConfig};

/// Default RK4 step for analytic forms.
pub const DEFAULT_H: f64 = 1e-3;

/// Value and derivative of every channel at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub x: f64,
    pub energy: f64,
    pub psi: Vec<C64>,
    pub dpsi: Vec<C64>,
}

impl WaveState {
    pub fn new(psi: Vec<C64>, dpsi: Vec<C64>) -> Self {
        Self {
            x: 0.0,
            energy: 0.0,
            psi,
            dpsi,
        }
    }

    /// Real single-channel state.
    pub fn scalar(psi: f64, dpsi: f64) -> Self {
        Self::new(vec![C64::new(psi, 0.0)], vec![C64::new(dpsi, 0.0)])
    }

    /// Real multichannel state.
    pub fn real(psi: &[f64], dpsi: &[f64]) -> Self {
        Self::new(
            psi.iter().map(|&v| C64::new(v, 0.0)).collect(),
            dpsi.iter().map(|&v| C64::new(v, 0.0)).collect(),
        )
    }

    pub fn at(mut self, x: f64, energy: f64) -> Self {
        self.x = x;
        self.energy = energy;
        self
    }

    pub fn channels(&self) -> usize {
        self.psi.len()
    }

    fn check(&self, n: usize) -> Result<()> {
        if self.psi.len() != n || self.dpsi.len() != n {
            return Err(Error::InvalidArgument(format!(
                "initial state has {} channel(s), system has {n}",
                self.psi.len()
            )));
        }
        if !self
            .psi
            .iter()
            .chain(&self.dpsi)
            .all(|z| z.re.is_finite() && z.im.is_finite())
        {
            return Err(Error::InvalidArgument("initial state is not finite".into()));
        }
        Ok(())
    }
}

/// Exact single-channel step over a region of constant local kinetic energy
/// `k2 = E - V`.
pub fn step_constant(s: &WaveState, k2: C64, w: f64) -> WaveState {
    let t = engine::scalar_transfer(k2, w);
    let mut out = s.clone();
    for (p, q) in out.psi.iter_mut().zip(out.dpsi.iter_mut()) {
        let (p0, q0) = (*p, *q);
        *p = t[0][0] * p0 + t[0][1] * q0;
        *q = t[1][0] * p0 + t[1][1] * q0;
    }
    out.x += w;
    out
}

/// Crossing a spike of strength `g`: `psi' -> psi' + g psi`.
pub fn apply_delta(s: &WaveState, g: C64) -> WaveState {
    let mut out = s.clone();
    for (p, q) in out.psi.iter().zip(out.dpsi.iter_mut()) {
        *q += g * p;
    }
    out
}

/// Options for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct Options {
    /// Sampling step; also the RK4 step on analytic forms.
    pub h: f64,
    /// Renormalise large amplitudes and keep the logarithm of the scale.
    pub rescale: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            h: DEFAULT_H,
            rescale: false,
        }
    }
}

impl Options {
    pub fn with_h(h: f64) -> Self {
        Self {
            h,
            ..Self::default()
        }
    }
}

/// Integrates a scalar potential from `x0` to `x1 > x0`.
pub fn integrate_scalar(
    p: &PotentialSpec,
    energy: f64,
    x0: f64,
    x1: f64,
    init: &WaveState,
    h: f64,
) -> Result<WaveTrace> {
    p.validate()?;
    forward_only(x0, x1)?;
    integrate(
        Arc::new(Hamiltonian::scalar(p)),
        energy,
        x0,
        x1,
        init,
        Options::with_h(h),
    )
}

/// Integrates a channel system from `x0` to `x1 > x0`.
pub fn integrate_channels(
    sys: &ChannelSystemSpec,
    energy: f64,
    x0: f64,
    x1: f64,
    init: &WaveState,
    h: f64,
) -> Result<WaveTrace> {
    sys.validate()?;
    forward_only(x0, x1)?;
    integrate(
        Arc::new(Hamiltonian::from_channels(sys)),
        energy,
        x0,
        x1,
        init,
        Options::with_h(h),
    )
}

fn forward_only(x0: f64, x1: f64) -> Result<()> {
    if x0 < x1 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("need x0 < x1, got [{x0}, {x1}]")))
    }
}

/// General integration in either direction. `init` holds the state at `x0`
/// (as a right limit if a spike sits there); its `x` and `energy` fields are
/// ignored. The returned trace is always ordered by increasing `x`.
pub fn integrate(
    ham: Arc<Hamiltonian>,
    energy: f64,
    x0: f64,
    x1: f64,
    init: &WaveState,
    opts: Options,
) -> Result<WaveTrace> {
    if !(opts.h > 0.0 && opts.h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {}", opts.h)));
    }
    if !(x0.is_finite() && x1.is_finite() && energy.is_finite()) || x0 == x1 {
        return Err(Error::InvalidArgument(format!(
            "bad interval [{x0}, {x1}] or energy {energy}"
        )));
    }
    init.check(ham.channels())?;
    let mut block = Block::single(&init.psi, &init.dpsi);
    let mut rec = Recorder::default();
    engine::run(
        &ham,
        energy,
        x0,
        x1,
        &mut block,
        RunConfig {
            h: opts.h,
            sample: true,
            rescale: opts.rescale,
        },
        Some(&mut rec),
    )?;
    Ok(WaveTrace::from_recorder(rec, ham, energy, opts, x1 < x0))
}

/// Final state only, without sampling.
pub fn propagate_state(
    ham: &Hamiltonian,
    energy: f64,
    x0: f64,
    x1: f64,
    init: &WaveState,
    h: f64,
) -> Result<WaveState> {
    init.check(ham.channels())?;
    let mut block = Block::single(&init.psi, &init.dpsi);
    engine::run(
        ham,
        energy,
        x0,
        x1,
        &mut block,
        RunConfig {
            h,
            sample: false,
            rescale: false,
        },
        None,
    )?;
    Ok(WaveState::new(block.p, block.q).at(x1, energy))
}

/// The `2n x 2n` matrix mapping `(psi, psi')` at `x0` to `x1`. Constant
/// pieces are crossed exactly; analytic forms use RK4 with step `h`.
pub fn transfer_matrix(
    ham: &Hamiltonian,
    energy: f64,
    x0: f64,
    x1: f64,
    h: f64,
) -> Result<nalgebra::DMatrix<C64>> {
    engine::transfer(ham, energy, x0, x1, h)
}
