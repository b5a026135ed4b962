//! Periodic potentials: monodromy, zones, gap and band solutions, surface
//! states.

mod beats;
mod gap;
mod tamm;
mod zones;

use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::Serialize;

pub use beats::{beating_envelope, BeatReport};
pub use gap::{
    bump_metrics, gap_solutions, permanent_resonance_report, Bump, GapChecks, GapSolutionPair, ResonanceReport,
    ResonanceRow,
};
pub use tamm::{tamm_search, verify_tamm, TammReport, TammVerification};
pub use zones::{zone_edges, Zone, ZoneKind, ZoneReport};

use crate::error::{Error, Result};
use crate::model::PotentialSpec;
use crate::propagate::{self, Hamiltonian, DEFAULT_H};

/// One-period transfer matrix at energy `E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monodromy {
    pub energy: f64,
    pub m: [[C64; 2]; 2],
}

impl Monodromy {
    /// `D = tr M / 2`.
    pub fn discriminant(&self) -> C64 {
        (self.m[0][0] + self.m[1][1]) * 0.5
    }

    pub fn det(&self) -> C64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    /// Eigenvalues `(lambda_plus, lambda_minus)` with `|lambda_plus| >=
    /// |lambda_minus|`, from the characteristic polynomial.
    pub fn multipliers(&self) -> (C64, C64) {
        let d = self.discriminant();
        let det = self.det();
        let root = (d * d - det).sqrt();
        let (a, b) = (d + root, d - root);
        if a.norm() >= b.norm() {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// A unit eigenvector `(psi, psi')` for the eigenvalue `lambda`.
    pub fn eigenvector(&self, lambda: C64) -> [C64; 2] {
        let m = &self.m;
        let u = [m[0][1], lambda - m[0][0]];
        let v = [lambda - m[1][1], m[1][0]];
        let nu = (u[0].norm_sqr() + u[1].norm_sqr()).sqrt();
        let nv = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        if nu >= nv && nu > 0.0 {
            [u[0] / nu, u[1] / nu]
        } else if nv > 0.0 {
            [v[0] / nv, v[1] / nv]
        } else {
            // M is a multiple of the identity: every vector is an eigenvector
            [C64::new(1.0, 0.0), C64::new(0.0, 0.0)]
        }
    }
}

/// A periodic single-channel problem ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct Periodic {
    ham: Arc<Hamiltonian>,
    period: f64,
    /// RK4 step for analytic forms.
    pub h: f64,
}

impl Periodic {
    /// Wraps a lattice or a periodic analytic form.
    pub fn new(p: &PotentialSpec) -> Result<Self> {
        p.validate()?;
        let period = p.period().ok_or_else(|| {
            Error::InvalidArgument(format!("{} potential has no period", p.kind_name()))
        })?;
        Ok(Self {
            ham: Arc::new(Hamiltonian::scalar(p)),
            period,
            h: DEFAULT_H,
        })
    }

    /// A single-channel Hamiltonian with a known period.
    pub fn from_hamiltonian(ham: Hamiltonian, period: f64) -> Result<Self> {
        if ham.channels() != 1 {
            return Err(Error::InvalidArgument("periodic analysis needs one channel".into()));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidArgument(format!("period must be positive, got {period}")));
        }
        Ok(Self {
            ham: Arc::new(ham),
            period,
            h: DEFAULT_H,
        })
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = h;
        self
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn hamiltonian(&self) -> &Arc<Hamiltonian> {
        &self.ham
    }

    pub fn is_real(&self) -> bool {
        self.ham.is_real()
    }

    /// Monodromy over the cell starting at `offset`.
    pub fn monodromy_from(&self, offset: f64, energy: f64) -> Result<Monodromy> {
        let t = propagate::transfer_matrix(&self.ham, energy, offset, offset + self.period, self.h)?;
        Ok(Monodromy {
            energy,
            m: [[t[(0, 0)], t[(0, 1)]], [t[(1, 0)], t[(1, 1)]]],
        })
    }

    pub fn monodromy(&self, energy: f64) -> Result<Monodromy> {
        self.monodromy_from(0.0, energy)
    }

    /// Real part of the discriminant, the quantity that decides zones for
    /// real potentials.
    pub fn discriminant(&self, energy: f64) -> Result<f64> {
        Ok(self.monodromy(energy)?.discriminant().re)
    }
}

/// Monodromy of a lattice over the cell `[0, a]`.
pub fn monodromy(lattice: &PotentialSpec, energy: f64) -> Result<Monodromy> {
    Periodic::new(lattice)?.monodromy(energy)
}

/// Floquet multipliers `lambda_plus, lambda_minus` of a real lattice at a
/// real discriminant `d`, with `|lambda_plus| >= 1`. Inside a band the pair
/// is complex conjugate.
pub(crate) fn real_multipliers(d: f64) -> (C64, C64) {
    if d.abs() >= 1.0 {
        let r = (d * d - 1.0).sqrt();
        let big = d + d.signum() * r;
        (C64::new(big, 0.0), C64::new(1.0 / big, 0.0))
    } else {
        let s = (1.0 - d * d).sqrt();
        (C64::new(d, s), C64::new(d, -s))
    }
}
