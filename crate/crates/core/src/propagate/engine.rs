//! Leg-by-leg propagation of a block of solutions.
//!
//! The interval is cut at every smoothness break and delta spike. Constant
//! legs are crossed with the closed-form transfer matrix, smooth legs with
//! fixed-step RK4. States are right limits: a spike at the far end of a
//! forward run is applied, a spike at its start is not.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::system::{snap_tol, Hamiltonian};
use crate::error::{Error, Result};

/// Amplitudes above this are reported as overflow.
pub(crate) const OVERFLOW_GUARD: f64 = 1e200;
/// Threshold for the opt-in log-rescaling mode.
const RESCALE_AT: f64 = 1e100;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// `m` solutions of an `n`-channel system, column-major.
#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub n: usize,
    pub m: usize,
    pub p: Vec<C64>,
    pub q: Vec<C64>,
}

impl Block {
    pub fn identity(n: usize) -> Self {
        let m = 2 * n;
        let mut p = vec![ZERO; n * m];
        let mut q = vec![ZERO; n * m];
        for a in 0..n {
            p[a + n * a] = C64::new(1.0, 0.0);
            q[a + n * (n + a)] = C64::new(1.0, 0.0);
        }
        Self { n, m, p, q }
    }

    pub fn single(psi: &[C64], dpsi: &[C64]) -> Self {
        Self {
            n: psi.len(),
            m: 1,
            p: psi.to_vec(),
            q: dpsi.to_vec(),
        }
    }

    /// `(psi; psi')` stacked per column into a `2n x m` matrix.
    pub fn to_matrix(&self) -> DMatrix<C64> {
        let n = self.n;
        DMatrix::from_fn(2 * n, self.m, |r, j| {
            if r < n {
                self.p[r + n * j]
            } else {
                self.q[r - n + n * j]
            }
        })
    }

    fn max_abs(&self) -> f64 {
        self.p
            .iter()
            .chain(&self.q)
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    fn finite(&self) -> bool {
        self.p
            .iter()
            .chain(&self.q)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    fn scale(&mut self, s: f64) {
        self.p.iter_mut().chain(self.q.iter_mut()).for_each(|z| *z *= s);
    }

    /// Applies a `2n x 2n` row-major matrix to every column.
    fn apply(&mut self, t: &[C64]) {
        let n = self.n;
        let mut y = vec![ZERO; 2 * n];
        for j in 0..self.m {
            for r in 0..2 * n {
                let row = &t[r * 2 * n..(r + 1) * 2 * n];
                let mut acc = ZERO;
                for a in 0..n {
                    acc += row[a] * self.p[a + n * j] + row[n + a] * self.q[a + n * j];
                }
                y[r] = acc;
            }
            self.p[n * j..n * (j + 1)].copy_from_slice(&y[..n]);
            self.q[n * j..n * (j + 1)].copy_from_slice(&y[n..]);
        }
    }

    /// `psi' += sign * J psi`.
    fn jump(&mut self, jmat: &DMatrix<C64>, sign: f64) {
        let n = self.n;
        for j in 0..self.m {
            for a in 0..n {
                let mut acc = ZERO;
                for b in 0..n {
                    acc += jmat[(a, b)] * self.p[b + n * j];
                }
                self.q[a + n * j] += acc * sign;
            }
        }
    }
}

/// Closed-form transfer `[[c, s], [s', c]]` for `psi'' = -k2 psi` over `w`.
pub(crate) fn scalar_transfer(k2: C64, w: f64) -> [[C64; 2]; 2] {
    let one = C64::new(1.0, 0.0);
    if k2.im == 0.0 {
        let k2 = k2.re;
        let (c, s, sp) = if k2 > 0.0 {
            let k = k2.sqrt();
            let (sn, cs) = (k * w).sin_cos();
            (cs, sn / k, -k * sn)
        } else if k2 < 0.0 {
            let kappa = (-k2).sqrt();
            let (sh, ch) = ((kappa * w).sinh(), (kappa * w).cosh());
            (ch, sh / kappa, kappa * sh)
        } else {
            (1.0, w, 0.0)
        };
        return [
            [C64::new(c, 0.0), C64::new(s, 0.0)],
            [C64::new(sp, 0.0), C64::new(c, 0.0)],
        ];
    }
    let k = k2.sqrt();
    if (k * w).norm() < 1e-6 {
        let w2 = w * w;
        let c = one - k2 * w2 / 2.0 + k2 * k2 * w2 * w2 / 24.0;
        let s = (one - k2 * w2 / 6.0 + k2 * k2 * w2 * w2 / 120.0) * w;
        return [[c, s], [-k2 * s, c]];
    }
    let kw = k * w;
    let c = kw.cos();
    let s = kw.sin() / k;
    [[c, s], [-k2 * s, c]]
}

/// Row-major `2n x 2n` transfer over `w` for the constant matrix `A`.
fn constant_transfer(a: &DMatrix<C64>, e: f64, w: f64) -> Vec<C64> {
    let n = a.nrows();
    let mut t = vec![ZERO; 4 * n * n];
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] == ZERO));
    if diagonal {
        for i in 0..n {
            let s = scalar_transfer(C64::new(e, 0.0) - a[(i, i)], w);
            t[i * 2 * n + i] = s[0][0];
            t[i * 2 * n + n + i] = s[0][1];
            t[(n + i) * 2 * n + i] = s[1][0];
            t[(n + i) * 2 * n + n + i] = s[1][1];
        }
        return t;
    }
    let mut g = DMatrix::<C64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        g[(i, n + i)] = C64::new(w, 0.0);
        for j in 0..n {
            let mut v = a[(i, j)];
            if i == j {
                v -= e;
            }
            g[(n + i, j)] = v * w;
        }
    }
    let ex = g.exp();
    for r in 0..2 * n {
        for c in 0..2 * n {
            t[r * 2 * n + c] = ex[(r, c)];
        }
    }
    t
}

/// Scratch space for RK4 steps.
struct Rk4 {
    a: Vec<C64>,
    kp: [Vec<C64>; 4],
    kq: [Vec<C64>; 4],
    tp: Vec<C64>,
    tq: Vec<C64>,
}

impl Rk4 {
    fn new(n: usize, m: usize) -> Self {
        let z = vec![ZERO; n * m];
        Self {
            a: vec![ZERO; n * n],
            kp: [z.clone(), z.clone(), z.clone(), z.clone()],
            kq: [z.clone(), z.clone(), z.clone(), z.clone()],
            tp: z.clone(),
            tq: z,
        }
    }

    /// Stage derivative at the trial state: `kp = q`, `kq = (A(x) - E) p`.
    fn deriv(&mut self, ham: &Hamiltonian, e: f64, x: f64, stage: usize, n: usize, m: usize) {
        ham.fill_matrix(x, &mut self.a);
        let (p, q) = (&self.tp, &self.tq);
        for j in 0..m {
            for r in 0..n {
                let mut acc = -e * p[r + n * j];
                for b in 0..n {
                    acc += self.a[r * n + b] * p[b + n * j];
                }
                self.kq[stage][r + n * j] = acc;
                self.kp[stage][r + n * j] = q[r + n * j];
            }
        }
    }

    fn step(&mut self, ham: &Hamiltonian, e: f64, x: f64, w: f64, y: &mut Block) {
        let (n, m) = (y.n, y.m);
        let len = n * m;
        self.tp.copy_from_slice(&y.p);
        self.tq.copy_from_slice(&y.q);
        self.deriv(ham, e, x, 0, n, m);
        for (stage, (frac, xoff)) in [(0.5, 0.5), (0.5, 0.5), (1.0, 1.0)].into_iter().enumerate() {
            for i in 0..len {
                self.tp[i] = y.p[i] + self.kp[stage][i] * (frac * w);
                self.tq[i] = y.q[i] + self.kq[stage][i] * (frac * w);
            }
            self.deriv(ham, e, x + xoff * w, stage + 1, n, m);
        }
        let c = w / 6.0;
        for i in 0..len {
            y.p[i] += (self.kp[0][i] + self.kp[1][i] * 2.0 + self.kp[2][i] * 2.0 + self.kp[3][i]) * c;
            y.q[i] += (self.kq[0][i] + self.kq[1][i] * 2.0 + self.kq[2][i] * 2.0 + self.kq[3][i]) * c;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct RunConfig {
    /// Maximum substep; RK4 legs always honour it, constant legs only when
    /// sampling.
    pub h: f64,
    pub sample: bool,
    pub rescale: bool,
}

/// Samples collected during a single-column run, in travel order.
#[derive(Debug, Default)]
pub(crate) struct Recorder {
    pub x: Vec<f64>,
    pub psi: Vec<Vec<C64>>,
    pub dpsi: Vec<Vec<C64>>,
    pub log_scale: Vec<f64>,
    /// Inclusive sample ranges of each smooth leg.
    pub segments: Vec<(usize, usize)>,
}

impl Recorder {
    fn push(&mut self, x: f64, y: &Block, log: f64) {
        if self.psi.is_empty() {
            self.psi = vec![Vec::new(); y.n];
            self.dpsi = vec![Vec::new(); y.n];
        }
        self.x.push(x);
        for a in 0..y.n {
            self.psi[a].push(y.p[a]);
            self.dpsi[a].push(y.q[a]);
        }
        self.log_scale.push(log);
    }
}

enum Leg {
    Smooth { xa: f64, xb: f64 },
    Jump { matrix: DMatrix<C64>, x: f64 },
}

fn plan(ham: &Hamiltonian, x0: f64, x1: f64) -> Vec<Leg> {
    let forward = x1 >= x0;
    let (lo, hi) = if forward { (x0, x1) } else { (x1, x0) };
    let mut events = ham.events(lo, hi);
    if !forward {
        events.reverse();
    }
    let mut legs = Vec::new();
    let mut at = x0;
    for ev in events {
        let at_start = (ev.x - x0).abs() <= snap_tol(x0);
        let at_end = (ev.x - x1).abs() <= snap_tol(x1);
        if at_start {
            // a spike at the start of a backward run is crossed first
            if !forward {
                if let Some(m) = ev.jump {
                    legs.push(Leg::Jump { matrix: m, x: x0 });
                }
            }
            continue;
        }
        let x = if at_end { x1 } else { ev.x };
        legs.push(Leg::Smooth { xa: at, xb: x });
        at = x;
        if let Some(m) = ev.jump {
            if forward || !at_end {
                legs.push(Leg::Jump { matrix: m, x });
            }
        }
    }
    if (at - x1).abs() > snap_tol(x1) || legs.iter().all(|l| !matches!(l, Leg::Smooth { .. })) {
        legs.push(Leg::Smooth { xa: at, xb: x1 });
    } else if let Some(Leg::Smooth { xb, .. }) = legs.iter_mut().rev().find(|l| matches!(l, Leg::Smooth { .. })) {
        *xb = x1;
    }
    legs
}

/// Propagates `y` from `x0` to `x1` (either direction).
pub(crate) fn run(
    ham: &Hamiltonian,
    e: f64,
    x0: f64,
    x1: f64,
    y: &mut Block,
    cfg: RunConfig,
    mut rec: Option<&mut Recorder>,
) -> Result<()> {
    let forward = x1 >= x0;
    let mut rk = Rk4::new(y.n, y.m);
    let mut log = 0.0;
    let mut last_x = x0;
    if let Some(r) = rec.as_deref_mut() {
        r.push(x0, y, log);
    }
    for leg in plan(ham, x0, x1) {
        match leg {
            Leg::Jump { matrix, x } => {
                y.jump(&matrix, if forward { 1.0 } else { -1.0 });
                if let Some(r) = rec.as_deref_mut() {
                    r.push(x, y, log);
                }
            }
            Leg::Smooth { xa, xb } => {
                let len = (xb - xa).abs();
                let seg_start = rec.as_deref().map(|r| r.x.len() - 1);
                if len > 0.0 {
                    let constant = ham.constant_on(xa, xb);
                    let steps = if constant.is_some() && !cfg.sample {
                        1
                    } else {
                        ((len / cfg.h) - 1e-9).ceil().max(1.0) as usize
                    };
                    let w = (xb - xa) / steps as f64;
                    let transfer = constant.map(|a| constant_transfer(&a, e, w));
                    for j in 1..=steps {
                        let xs = xa + w * (j - 1) as f64;
                        match &transfer {
                            Some(t) => y.apply(t),
                            None => rk.step(ham, e, xs, w, y),
                        }
                        let xn = if j == steps { xb } else { xa + (xb - xa) * (j as f64 / steps as f64) };
                        let big = y.max_abs();
                        if !y.finite() || big > OVERFLOW_GUARD {
                            return Err(Error::AmplitudeOverflow { last_x });
                        }
                        if cfg.rescale && big > RESCALE_AT {
                            y.scale(1.0 / big);
                            log += big.ln();
                        }
                        last_x = xn;
                        if let Some(r) = rec.as_deref_mut() {
                            r.push(xn, y, log);
                        }
                    }
                }
                if let (Some(r), Some(s)) = (rec.as_deref_mut(), seg_start) {
                    r.segments.push((s, r.x.len() - 1));
                }
            }
        }
    }
    Ok(())
}

/// Advances a single state by `t` inside one smooth leg whose extent is
/// `[xa, xb]`: closed form when the leg is constant, one RK4 step otherwise.
pub(crate) fn advance_within(
    ham: &Hamiltonian,
    e: f64,
    xa: f64,
    xb: f64,
    x: f64,
    psi: &[C64],
    dpsi: &[C64],
    t: f64,
) -> (Vec<C64>, Vec<C64>) {
    let mut y = Block::single(psi, dpsi);
    if t != 0.0 {
        match ham.constant_on(xa, xb) {
            Some(a) => y.apply(&constant_transfer(&a, e, t)),
            None => Rk4::new(y.n, 1).step(ham, e, x, t, &mut y),
        }
    }
    (y.p, y.q)
}

/// Full `2n x 2n` transfer matrix from `x0` to `x1`.
pub(crate) fn transfer(ham: &Hamiltonian, e: f64, x0: f64, x1: f64, h: f64) -> Result<DMatrix<C64>> {
    let mut y = Block::identity(ham.channels());
    run(
        ham,
        e,
        x0,
        x1,
        &mut y,
        RunConfig {
            h,
            sample: false,
            rescale: false,
        },
        None,
    )?;
    Ok(y.to_matrix())
}
