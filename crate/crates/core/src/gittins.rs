//! Gittins index of the AoI bandit process with a random termination delay.
//!
//! For a penalty `p` and i.i.d. transmission time `T`, the index at AoI `δ` is
//! the smallest running average of `E[p(δ + k + T)]` over deterministic
//! stopping times `τ ≥ 1`:
//!
//! ```text
//! γ(δ) = inf_{τ ≥ 1} (1/τ) Σ_{k<τ} E[p(δ + k + T)]
//! ```
//!
//! With the hold-last extension every term with `δ + k ≥ δ_max` equals the
//! plateau value `c = p(δ_max)`, so the running average past that point moves
//! monotonically towards `c`. The infimum is therefore the minimum over the
//! finitely many averages that end before the plateau, together with `c`
//! itself. A consequence is `γ(δ) ≤ c` for every δ, and `γ(δ) = c` for
//! `δ ≥ δ_max`.

use std::ops::RangeInclusive;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::penalty::{PenaltyCurve, ServiceTimeDistribution};

/// `E[p(a + T)]`.
pub fn expected_penalty_after_service(
    penalty: &PenaltyCurve,
    service: &ServiceTimeDistribution,
    aoi: usize,
) -> f64 {
    if aoi >= penalty.delta_max() {
        return penalty.plateau();
    }
    let mut acc = CompensatedSum::new();
    for &(t, prob) in service.pmf() {
        acc.add(prob * penalty.at(aoi + t));
    }
    acc.value()
}

/// Smallest `τ_max` for which the exhaustive search is guaranteed to reach the plateau.
pub fn safe_horizon(penalty: &PenaltyCurve, service: &ServiceTimeDistribution) -> usize {
    penalty.delta_max() + service.max_value() + 1
}

/// Gittins index at a single AoI, searching `τ ∈ 1..=tau_max`.
pub fn gittins_index(
    penalty: &PenaltyCurve,
    service: &ServiceTimeDistribution,
    delta: usize,
    tau_max: usize,
) -> Result<f64> {
    let required = safe_horizon(penalty, service);
    if tau_max < required {
        return Err(Error::HorizonTooShort { tau_max, required });
    }
    let after: Vec<f64> = (0..penalty.delta_max())
        .map(|a| expected_penalty_after_service(penalty, service, a))
        .collect();
    Ok(index_from_expectations(&after, penalty.plateau(), delta, tau_max))
}

/// `after[a] = E[p(a + T)]` for `a < δ_max`; `plateau` for larger `a`.
fn index_from_expectations(after: &[f64], plateau: f64, delta: usize, tau_max: usize) -> f64 {
    let mut best = plateau;
    let mut acc = CompensatedSum::new();
    for tau in 1..=tau_max {
        let a = delta + tau - 1;
        if a >= after.len() {
            // every further term equals the plateau; the average only drifts towards it
            break;
        }
        acc.add(after[a]);
        let avg = acc.value() / tau as f64;
        if avg < best {
            best = avg;
        }
    }
    best
}

/// Gittins indices for `δ = 0..=δ_max`, held constant beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct GittinsTable {
    values: Vec<f64>,
    tau_max: usize,
}

impl GittinsTable {
    /// Tabulates with the safe search horizon `δ_max + T_max + 1`.
    pub fn new(penalty: &PenaltyCurve, service: &ServiceTimeDistribution) -> Self {
        let tau_max = safe_horizon(penalty, service);
        Self::build(penalty, service, tau_max)
    }

    pub fn with_horizon(
        penalty: &PenaltyCurve,
        service: &ServiceTimeDistribution,
        tau_max: usize,
    ) -> Result<Self> {
        let required = safe_horizon(penalty, service);
        if tau_max < required {
            return Err(Error::HorizonTooShort { tau_max, required });
        }
        Ok(Self::build(penalty, service, tau_max))
    }

    fn build(penalty: &PenaltyCurve, service: &ServiceTimeDistribution, tau_max: usize) -> Self {
        let after: Vec<f64> = (0..penalty.delta_max())
            .map(|a| expected_penalty_after_service(penalty, service, a))
            .collect();
        let plateau = penalty.plateau();
        let values = (0..=penalty.delta_max())
            .map(|d| index_from_expectations(&after, plateau, d, tau_max))
            .collect();
        Self { values, tau_max }
    }

    /// `γ(δ)`.
    #[inline]
    pub fn at(&self, delta: usize) -> f64 {
        self.values[delta.min(self.values.len() - 1)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Last tabulated AoI; the index is constant from here on.
    pub fn delta_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn tau_max(&self) -> usize {
        self.tau_max
    }

    /// `sup_δ γ(δ)`, attained on the plateau.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `(δ, γ(δ))` rows over an arbitrary AoI range.
    pub fn tabulate(&self, range: RangeInclusive<usize>) -> Vec<(usize, f64)> {
        range.map(|d| (d, self.at(d))).collect()
    }
}

/// Batch form of [`gittins_index`] over `delta_range`.
pub fn gittins_table(
    penalty: &PenaltyCurve,
    service: &ServiceTimeDistribution,
    delta_range: RangeInclusive<usize>,
    tau_max: usize,
) -> Result<Vec<(usize, f64)>> {
    Ok(GittinsTable::with_horizon(penalty, service, tau_max)?.tabulate(delta_range))
}
