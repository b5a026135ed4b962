use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::model::{ChannelSystemSpec, PotentialSpec};

/// Channel-space coefficients of a linear second-order system
/// `psi'' = (A(x) - E) psi` with `A = V + diag(eps)` and delta jumps.
///
/// Each matrix entry is a short sum of scaled potential specs, which covers
/// plain scalar problems, coupled channels, and complex sums such as
/// `V_R + i t V_I` without a dedicated spec type.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    thresholds: Vec<f64>,
    terms: Vec<Vec<Vec<(C64, PotentialSpec)>>>,
    points: Vec<(f64, DMatrix<C64>)>,
}

/// A point where the propagation has to stop: a smoothness break, optionally
/// carrying a jump matrix for `psi'`.
#[derive(Debug, Clone)]
pub(crate) struct Event {
    pub x: f64,
    pub jump: Option<DMatrix<C64>>,
}

pub(crate) fn snap_tol(x: f64) -> f64 {
    1e-12 * x.abs().max(1.0)
}

impl Hamiltonian {
    pub fn scalar(p: &PotentialSpec) -> Self {
        Self {
            thresholds: vec![0.0],
            terms: vec![vec![vec![(C64::new(1.0, 0.0), p.clone())]]],
            points: Vec::new(),
        }
    }

    pub fn from_channels(sys: &ChannelSystemSpec) -> Self {
        let terms = sys
            .matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|p| vec![(C64::new(1.0, 0.0), p.clone())])
                    .collect()
            })
            .collect();
        let n = sys.channels();
        let points = sys
            .point_couplings
            .iter()
            .map(|pc| {
                let m = DMatrix::from_fn(n, n, |a, b| C64::new(pc.strengths[a][b], 0.0));
                (pc.position, m)
            })
            .collect();
        Self {
            thresholds: sys.thresholds.clone(),
            terms,
            points,
        }
    }

    /// General constructor: `terms[a][b]` is summed into `V_ab`.
    pub fn from_terms(
        thresholds: Vec<f64>,
        terms: Vec<Vec<Vec<(C64, PotentialSpec)>>>,
        points: Vec<(f64, DMatrix<C64>)>,
    ) -> Self {
        Self {
            thresholds,
            terms,
            points,
        }
    }

    pub fn channels(&self) -> usize {
        self.thresholds.len()
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// `V_ab(x)`, smooth part only.
    pub fn coupling(&self, a: usize, b: usize, x: f64) -> C64 {
        self.terms[a][b]
            .iter()
            .map(|(c, p)| c * p.value_at(x))
            .sum()
    }

    /// Fills `out` (row-major, n x n) with `A(x) = V(x) + diag(eps)`.
    pub(crate) fn fill_matrix(&self, x: f64, out: &mut [C64]) {
        let n = self.channels();
        for a in 0..n {
            for b in 0..n {
                let mut v = self.coupling(a, b, x);
                if a == b {
                    v += self.thresholds[a];
                }
                out[a * n + b] = v;
            }
        }
    }

    pub(crate) fn matrix_at(&self, x: f64) -> DMatrix<C64> {
        let n = self.channels();
        let mut buf = vec![C64::new(0.0, 0.0); n * n];
        self.fill_matrix(x, &mut buf);
        DMatrix::from_row_slice(n, n, &buf)
    }

    pub fn is_real(&self) -> bool {
        self.terms
            .iter()
            .flatten()
            .flatten()
            .all(|(c, p)| c.im == 0.0 && p.is_real())
            && self.points.iter().all(|(_, m)| m.iter().all(|z| z.im == 0.0))
    }

    fn piecewise_constant(&self) -> bool {
        self.terms
            .iter()
            .flatten()
            .flatten()
            .all(|(_, p)| p.is_piecewise_constant())
    }

    /// The constant matrix `A` on `(xa, xb)`, if every term is constant there.
    pub(crate) fn constant_on(&self, xa: f64, xb: f64) -> Option<DMatrix<C64>> {
        if self.piecewise_constant() {
            Some(self.matrix_at(0.5 * (xa + xb)))
        } else {
            None
        }
    }

    /// Breaks and delta jumps in `[lo, hi]`, sorted and merged.
    pub(crate) fn events(&self, lo: f64, hi: f64) -> Vec<Event> {
        let n = self.channels();
        let mut raw: Vec<(f64, Option<DMatrix<C64>>)> = Vec::new();
        for a in 0..n {
            for b in 0..n {
                for (c, p) in &self.terms[a][b] {
                    let f = p.features(lo, hi);
                    raw.extend(f.breaks.into_iter().map(|x| (x, None)));
                    for (x, g) in f.deltas {
                        let mut m = DMatrix::zeros(n, n);
                        m[(a, b)] = c * g;
                        raw.push((x, Some(m)));
                    }
                }
            }
        }
        for (x, m) in &self.points {
            let tol = snap_tol(*x);
            if *x >= lo - tol && *x <= hi + tol {
                raw.push((*x, Some(m.clone())));
            }
        }
        raw.sort_by(|p, q| p.0.total_cmp(&q.0));

        let mut out: Vec<Event> = Vec::new();
        for (x, jump) in raw {
            match out.last_mut() {
                Some(last) if (x - last.x).abs() <= snap_tol(x) => {
                    if let Some(j) = jump {
                        last.jump = Some(match last.jump.take() {
                            Some(prev) => prev + j,
                            None => j,
                        });
                    }
                }
                _ => out.push(Event { x, jump }),
            }
        }
        out
    }
}
