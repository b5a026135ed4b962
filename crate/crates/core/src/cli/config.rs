//! Versioned JSON configs, one per command. Every field except `schema` has
//! a default; unknown fields are rejected.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::model::{
    builtin_dirac_comb, builtin_soliton, ChannelSystemSpec, PointCoupling, PotentialSpec, TransparentVariant,
};
use crate::propagate::DEFAULT_H;

pub const SCHEMA: u32 = 1;

fn comb() -> PotentialSpec {
    builtin_dirac_comb(2.0, PI).expect("valid comb")
}

/// Parses a config and checks its schema version.
pub fn parse<T: DeserializeOwned + Versioned>(text: &str) -> Result<T, String> {
    let cfg: T = serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
    match cfg.schema() {
        Some(SCHEMA) => Ok(cfg),
        Some(v) => Err(format!("config: unsupported schema {v}, expected {SCHEMA}")),
        None => Err(format!("config: missing field `schema` (use {SCHEMA})")),
    }
}

pub trait Versioned {
    fn schema(&self) -> Option<u32>;
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn schema(&self) -> Option<u32> {
                self.schema
            }
        })*
    };
}

versioned!(
    BandsConfig,
    GapConfig,
    BeatsConfig,
    TammConfig,
    ScatterConfig,
    ChannelsConfig,
    TransparentConfig,
    ComplexBandsConfig,
    BsecConfig,
    ResidualConfig
);

/// An explicit list of energies, or an evenly spaced range when `range` is
/// set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub values: Vec<f64>,
    pub range: Option<[f64; 2]>,
    pub samples: usize,
}

impl Sweep {
    fn list(values: &[f64]) -> Self {
        Self {
            values: values.to_vec(),
            range: None,
            samples: 2,
        }
    }

    pub fn points(&self) -> Result<Vec<f64>, String> {
        match self.range {
            Some([lo, hi]) => {
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return Err(format!("config: empty range [{lo}, {hi}]"));
                }
                if self.samples < 2 {
                    return Err("config: samples must be >= 2".into());
                }
                let n = self.samples - 1;
                Ok((0..=n).map(|j| lo + (hi - lo) * j as f64 / n as f64).collect())
            }
            None if self.values.is_empty() => Err("config: no values given".into()),
            None => Ok(self.values.clone()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandsConfig {
    pub schema: Option<u32>,
    pub potential: PotentialSpec,
    pub emin: f64,
    pub emax: f64,
    /// Scan step; `(emax - emin) / samples` when absent.
    pub step: Option<f64>,
    pub samples: usize,
    pub h: f64,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self {
            schema: None,
            potential: comb(),
            emin: 0.05,
            emax: 10.0,
            step: None,
            samples: 2000,
            h: DEFAULT_H,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapConfig {
    pub schema: Option<u32>,
    pub potential: PotentialSpec,
    pub emin: f64,
    pub emax: f64,
    /// Index among the gaps with both edges inside `[emin, emax]`.
    pub gap_index: usize,
    /// Energies across the gap, edges included.
    pub samples: usize,
    pub periods: usize,
    pub offset: f64,
    pub h: f64,
}

impl Default for GapConfig {
    fn default() -> Self {
        Self {
            schema: None,
            potential: comb(),
            emin: 0.05,
            emax: 10.0,
            gap_index: 0,
            samples: 11,
            periods: 10,
            offset: 0.0,
            h: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeatsConfig {
    pub schema: Option<u32>,
    pub potential: PotentialSpec,
    pub energies: Sweep,
    pub periods: usize,
    pub h: f64,
}

impl Default for BeatsConfig {
    fn default() -> Self {
        Self {
            schema: None,
            potential: comb(),
            energies: Sweep::list(&[2.2, 3.0, 3.5, 3.7]),
            periods: 100,
            h: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TammConfig {
    pub schema: Option<u32>,
    pub potential: PotentialSpec,
    pub emin: f64,
    pub emax: f64,
    pub gap_index: usize,
    /// Wall position inside the cell; a quarter period when absent.
    pub wall_offset: Option<f64>,
    pub periods: usize,
    pub h: f64,
}

impl Default for TammConfig {
    fn default() -> Self {
        Self {
            schema: None,
            potential: comb(),
            emin: 0.05,
            emax: 3.0,
            gap_index: 0,
            wall_offset: None,
            periods: 20,
            h: DEFAULT_H,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterConfig {
    pub schema: Option<u32>,
    pub potential: PotentialSpec,
    pub energies: Sweep,
    pub window: Option<[f64; 2]>,
    pub h: f64,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            schema: None,
            potential: builtin_soliton(1.0, 0.0).expect("valid soliton"),
            energies: Sweep::list(&[0.5, 1.0, 5.0]),
            window: None,
            h: DEFAULT_H,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelsConfig {
    pub schema: Option<u32>,
    pub system: ChannelSystemSpec,
    pub energies: Sweep,
    pub window: Option<[f64; 2]>,
    pub h: f64,
}

impl Default for ChannelsConfig {
    fn default() -> Self {
        let off = PotentialSpec::sech2(0.8, 1.1, 0.2);
        Self {
            schema: None,
            system: ChannelSystemSpec {
                thresholds: vec![0.0, 0.6],
                matrix: vec![
                    vec![PotentialSpec::sech2(-1.5, 1.0, 0.0), off.clone()],
                    vec![off, PotentialSpec::sech2(0.9, 0.7, -0.3)],
                ],
                point_couplings: vec![PointCoupling {
                    position: 0.4,
                    strengths: vec![vec![0.3, -0.5], vec![-0.5, 0.2]],
                }],
            },
            energies: Sweep::list(&[0.3, 0.9, 2.5]),
            window: None,
            h: DEFAULT_H,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransparentConfig {
    pub schema: Option<u32>,
    pub variant: TransparentVariant,
    pub kappa: f64,
    /// Scale of the off-diagonal entries; 1 is the exact construction.
    pub detune: f64,
    pub energies: Sweep,
    pub h: f64,
}

impl Default for TransparentConfig {
    fn default() -> Self {
        Self {
            schema: None,
            variant: TransparentVariant::A,
            kappa: 1.0,
            detune: 1.0,
            energies: Sweep::list(&[0.3, 1.0, 5.0]),
            h: DEFAULT_H,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexBandsConfig {
    pub schema: Option<u32>,
    pub real: PotentialSpec,
    pub imag: PotentialSpec,
    /// Values of the imaginary-part multiplier; must include 0.
    pub t: Sweep,
    pub gap_index: usize,
    pub emin: f64,
    pub emax: f64,
    pub h: f64,
}

impl Default for ComplexBandsConfig {
    fn default() -> Self {
        Self {
            schema: None,
            real: PotentialSpec::cosine(2.0, 2.0, 0.0),
            imag: PotentialSpec::cosine(2.0, 2.0, -FRAC_PI_2),
            t: Sweep::list(&[0.0, 0.25, 0.5, 0.75, 0.9, 1.0]),
            gap_index: 0,
            emin: -2.0,
            emax: 6.0,
            h: DEFAULT_H,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BsecConfig {
    pub schema: Option<u32>,
    /// `(mode pi / length)^2` when absent.
    pub energy: Option<f64>,
    pub threshold: f64,
    pub length: f64,
    pub mode: u32,
    pub a0: f64,
    pub a_l: f64,
    /// Points of the exported trace.
    pub samples: usize,
}

impl Default for BsecConfig {
    fn default() -> Self {
        Self {
            schema: None,
            energy: None,
            threshold: 2.0,
            length: PI,
            mode: 1,
            a0: 1.0,
            a_l: 1.0,
            samples: 201,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResidualConfig {
    pub schema: Option<u32>,
    pub potential: PotentialSpec,
    pub energy: f64,
    pub x0: f64,
    pub x1: f64,
    pub psi: f64,
    pub dpsi: f64,
    pub h: f64,
    /// Largest number of rows written; all samples when absent.
    pub samples: Option<usize>,
}

impl Default for ResidualConfig {
    fn default() -> Self {
        Self {
            schema: None,
            potential: PotentialSpec::sech2(2.0, 1.0, 0.0),
            energy: 1.0,
            x0: -4.0,
            x1: 4.0,
            psi: 1.0,
            dpsi: 0.0,
            h: 1e-2,
            samples: None,
        }
    }
}
