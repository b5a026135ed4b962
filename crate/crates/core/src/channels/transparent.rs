use rayon::prelude::*;
use serde::Serialize;

use super::{auto_window, scattering_channels, ScatterOptions};
use crate::error::{Error, Result};
use crate::model::ChannelSystemSpec;
use crate::propagate::Hamiltonian;

/// Sample count for the decoupling residual.
const RESIDUAL_SAMPLES: usize = 4001;
pub const REFLECTION_TOL: f64 = 1e-6;
pub const DECOUPLING_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct TransparentRow {
    pub energy: f64,
    pub reflection: f64,
    pub unitarity_defect: f64,
    pub transparent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransparentReport {
    /// Largest off-diagonal element of the matrix in the basis
    /// `(psi_1 +- psi_2) / sqrt 2`, thresholds included.
    pub decoupling_residual: f64,
    pub rows: Vec<TransparentRow>,
    pub all_transparent: bool,
}

/// Checks a two-channel system for total transparency at each energy.
pub fn verify_transparent(sys: &ChannelSystemSpec, energies: &[f64], opts: &ScatterOptions) -> Result<TransparentReport> {
    sys.validate()?;
    if sys.channels() != 2 {
        return Err(Error::InvalidArgument("transparency check needs two channels".into()));
    }
    let (lo, hi) = match opts.window {
        Some(w) => w,
        None => auto_window(sys)?,
    };
    let ham = Hamiltonian::from_channels(sys);
    let mut residual = 0.5 * (sys.thresholds[0] - sys.thresholds[1]).abs();
    for j in 0..RESIDUAL_SAMPLES {
        let x = lo + (hi - lo) * j as f64 / (RESIDUAL_SAMPLES - 1) as f64;
        let d = ham.coupling(0, 0, x) - ham.coupling(1, 1, x);
        residual = residual.max(0.5 * d.norm());
    }
    for pc in &sys.point_couplings {
        residual = residual.max(0.5 * (pc.strengths[0][0] - pc.strengths[1][1]).abs());
    }
    let rows: Vec<TransparentRow> = energies
        .par_iter()
        .map(|&e| {
            let s = scattering_channels(sys, e, opts)?;
            let reflection = s.total_reflection();
            Ok(TransparentRow {
                energy: e,
                reflection,
                unitarity_defect: s.unitarity_defect(),
                transparent: reflection < REFLECTION_TOL && residual < DECOUPLING_TOL,
            })
        })
        .collect::<Result<_>>()?;
    let all_transparent = rows.iter().all(|r| r.transparent);
    Ok(TransparentReport {
        decoupling_residual: residual,
        rows,
        all_transparent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin_transparent_pair, TransparentVariant};

    #[test]
    fn both_variants_transparent() {
        for v in [TransparentVariant::A, TransparentVariant::B] {
            let sys = builtin_transparent_pair(v, 1.0).unwrap();
            let r = verify_transparent(&sys, &[0.3, 1.0, 5.0], &ScatterOptions::default()).unwrap();
            assert!(r.decoupling_residual < 1e-12);
            assert!(r.all_transparent, "{r:?}");
        }
    }

    #[test]
    fn detuned_pair_reflects() {
        let mut sys = builtin_transparent_pair(TransparentVariant::A, 1.0).unwrap();
        let off = sys.matrix[0][1].scaled(1.1);
        sys.matrix[0][1] = off.clone();
        sys.matrix[1][0] = off;
        let r = verify_transparent(&sys, &[0.3, 1.0], &ScatterOptions::default()).unwrap();
        for row in &r.rows {
            assert!(row.reflection > 1e-3, "{row:?}");
            assert!(!row.transparent);
        }
    }
}
