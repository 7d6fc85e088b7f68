//! Receiver noise, per-user SINR and the sum-SINR reward.
//!
//! All terms are electrical powers: the signal is `(R_n P)^2`, each active
//! co-channel access point adds `(R_n P')^2` of interference, and the
//! preamplifier contributes `sigma^2 = NSD^2 * B`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::channel::{PowerMatrix, ReceiverSpec};
use crate::mdp::Assignment;
use crate::{Error, Result};

/// Preamplifier noise variance, `NSD^2 * bandwidth`, in A².
pub fn noise_power(rx: &ReceiverSpec) -> f64 {
    rx.noise_spectral_density * rx.noise_spectral_density * rx.bandwidth
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    variance_per_user: Vec<f64>,
}

impl NoiseModel {
    pub fn new(variance_per_user: Vec<f64>) -> Result<Self> {
        if let Some(v) = variance_per_user
            .iter()
            .find(|v| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {v}"
            )));
        }
        Ok(Self { variance_per_user })
    }

    pub fn from_receivers(receivers: &[ReceiverSpec]) -> Result<Self> {
        Self::new(receivers.iter().map(noise_power).collect())
    }

    pub fn variance(&self, user: usize) -> f64 {
        self.variance_per_user[user]
    }

    pub fn len(&self) -> usize {
        self.variance_per_user.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variance_per_user.is_empty()
    }
}

/// How per-user SINRs are combined into the reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scale", rename_all = "lowercase")]
pub enum RewardScale {
    /// Sum of linear SINRs.
    Linear,
    /// Sum of per-user SINR in dB, each clamped below at `floor_db`.
    Db { floor_db: f64 },
}

impl RewardScale {
    pub const DB: RewardScale = RewardScale::Db { floor_db: 0.0 };

    pub fn name(&self) -> &'static str {
        match self {
            RewardScale::Linear => "linear",
            RewardScale::Db { .. } => "db",
        }
    }

    /// Contribution of one user's linear SINR.
    pub fn term(&self, sinr: f64) -> f64 {
        match *self {
            RewardScale::Linear => sinr,
            RewardScale::Db { floor_db } => to_db(sinr).max(floor_db),
        }
    }

    /// The other scale, keeping a dB floor of 0 when switching to dB.
    pub fn alternate(&self) -> RewardScale {
        match self {
            RewardScale::Linear => RewardScale::DB,
            RewardScale::Db { .. } => RewardScale::Linear,
        }
    }
}

/// Per-user SINR under one assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    pub per_user_sinr_db: Vec<f64>,
    pub per_user_sinr_linear: Vec<f64>,
    pub sum_sinr: f64,
    pub scale: RewardScale,
    pub assignment: Assignment,
}

/// Received optical power together with the detector responsivity and noise
/// needed to turn it into SINR.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub power: PowerMatrix,
    /// A/W, one per wavelength.
    pub responsivity: Vec<f64>,
    pub noise: NoiseModel,
}

impl LinkBudget {
    pub fn new(power: PowerMatrix, responsivity: Vec<f64>, noise: NoiseModel) -> Result<Self> {
        if responsivity.len() != power.wavelengths() {
            return Err(Error::InvalidArgument(format!(
                "{} responsivities for {} wavelengths",
                responsivity.len(),
                power.wavelengths()
            )));
        }
        if noise.len() != power.users() {
            return Err(Error::InvalidArgument(format!(
                "{} noise variances for {} users",
                noise.len(),
                power.users()
            )));
        }
        Ok(Self {
            power,
            responsivity,
            noise,
        })
    }

    pub fn users(&self) -> usize {
        self.power.users()
    }

    pub fn aps(&self) -> usize {
        self.power.aps()
    }

    pub fn wavelengths(&self) -> usize {
        self.power.wavelengths()
    }

    /// Photocurrent power `(R_n P[k][l][n])^2`, A².
    fn electrical(&self, k: usize, l: usize, n: usize) -> f64 {
        let i = self.responsivity[n] * self.power.get(k, l, n);
        i * i
    }

    /// SINR of user `k` with interference from every other access point the
    /// assignment activates on the same wavelength.
    pub fn sinr(&self, k: usize, assignment: &Assignment) -> Result<f64> {
        let slot = assignment
            .get(k)
            .ok_or_else(|| Error::InvalidState(format!("user {k} is not assigned")))?;
        if k >= self.users() || slot.ap >= self.aps() || slot.wavelength >= self.wavelengths() {
            return Err(Error::InvalidArgument(format!(
                "user {k} slot {slot:?} outside {:?}",
                self.power.dims()
            )));
        }
        let n = slot.wavelength;
        let interferers: BTreeSet<usize> = assignment
            .iter()
            .filter(|(j, s)| *j != k && s.wavelength == n && s.ap != slot.ap)
            .map(|(_, s)| s.ap)
            .collect();
        let mut interference = 0.0;
        for l in interferers {
            if l >= self.aps() {
                return Err(Error::InvalidArgument(format!("AP index {l} out of range")));
            }
            interference += self.electrical(k, l, n);
        }
        Ok(self.electrical(k, slot.ap, n) / (interference + self.noise.variance(k)))
    }

    /// Sum of per-user SINR terms in the given scale.
    pub fn sum_sinr(&self, assignment: &Assignment, scale: RewardScale) -> Result<f64> {
        let mut total = 0.0;
        for k in 0..self.users() {
            total += scale.term(self.sinr(k, assignment)?);
        }
        Ok(total)
    }

    pub fn report(&self, assignment: &Assignment, scale: RewardScale) -> Result<LinkReport> {
        let linear = (0..self.users())
            .map(|k| self.sinr(k, assignment))
            .collect::<Result<Vec<_>>>()?;
        let sum_sinr = linear.iter().map(|s| scale.term(*s)).sum();
        Ok(LinkReport {
            per_user_sinr_db: linear.iter().copied().map(to_db).collect(),
            per_user_sinr_linear: linear,
            sum_sinr,
            scale,
            assignment: assignment.clone(),
        })
    }
}
