//! Voxel-wise approximate predictive entropy of the MC-mean class distribution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scalar::Real;
use crate::volgrid::ScalarVolume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Base2,
}

impl LogBase {
    pub fn name(self) -> &'static str {
        match self {
            LogBase::Natural => "natural",
            LogBase::Base2 => "base2",
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "natural" | "e" | "nats" => Ok(LogBase::Natural),
            "base2" | "2" | "bits" => Ok(LogBase::Base2),
            other => Err(Error::InvalidConfig(format!("unknown log base '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EntropyConfig {
    pub log_base: LogBase,
}

/// Binary entropy of a foreground probability, with `0 log 0 = 0`.
#[inline]
pub fn binary_entropy<T: Real>(p: T, base: LogBase) -> T {
    let term = |q: T| if q > T::zero() { q * q.ln() } else { T::zero() };
    let h = -(term(p) + term(T::one() - p));
    let h = h.max(T::zero());
    match base {
        LogBase::Natural => h,
        LogBase::Base2 => h / T::LN_2(),
    }
}

pub fn predictive_entropy<T: Real>(prob: &ScalarVolume<T>, cfg: EntropyConfig) -> ScalarVolume<T> {
    let data = prob
        .data()
        .par_iter()
        .map(|&p| binary_entropy(p, cfg.log_base))
        .collect();
    ScalarVolume::new(*prob.shape(), data).expect("entropy of a probability is finite")
}
