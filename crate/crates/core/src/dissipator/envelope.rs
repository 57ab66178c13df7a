use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frequency-domain weight `q(ν)` applied to the Bohr components of a jump.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    /// `exp(-(βν)²/8)`
    Gaussian,
    /// `1`
    Flat,
    /// `exp(-sqrt(1 + (βν)²)/4)`
    SmoothedMh,
    /// `exp(-ν²/2)`, independent of temperature.
    FixedGaussian,
}

impl EnvelopeKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvelopeKind::Gaussian => "gaussian",
            EnvelopeKind::Flat => "flat",
            EnvelopeKind::SmoothedMh => "smoothed_mh",
            EnvelopeKind::FixedGaussian => "fixed_gaussian",
        }
    }
}

impl FromStr for EnvelopeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(EnvelopeKind::Gaussian),
            "flat" => Ok(EnvelopeKind::Flat),
            "smoothed_mh" => Ok(EnvelopeKind::SmoothedMh),
            "fixed_gaussian" => Ok(EnvelopeKind::FixedGaussian),
            other => Err(Error::InvalidParameter(format!("unknown envelope `{other}`"))),
        }
    }
}

impl fmt::Display for EnvelopeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub beta: f64,
}

impl Envelope {
    pub fn new(kind: EnvelopeKind, beta: f64) -> Self {
        Envelope { kind, beta }
    }

    pub fn eval(&self, nu: f64) -> f64 {
        let bn = self.beta * nu;
        match self.kind {
            EnvelopeKind::Gaussian => (-bn * bn / 8.0).exp(),
            EnvelopeKind::Flat => 1.0,
            EnvelopeKind::SmoothedMh => (-(1.0 + bn * bn).sqrt() / 4.0).exp(),
            EnvelopeKind::FixedGaussian => (-nu * nu / 2.0).exp(),
        }
    }
}

/// Evaluates `q(ν)`.
pub fn envelope_eval(q: &Envelope, nu: f64) -> f64 {
    q.eval(nu)
}
