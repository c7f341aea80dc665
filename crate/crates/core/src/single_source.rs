//! Optimal scheduling of a single source.
//!
//! A threshold policy with buffer offset `b` submits the `(b+1)`-th freshest
//! feature at the first idle slot whose AoI satisfies `γ(Δ(t)) ≥ β`. Its
//! long-run average penalty follows from renewal-reward over inter-delivery
//! cycles, and the optimal threshold `β_b` is the unique root of
//!
//! ```text
//! f(β) = E[cycle cost](β) − β · E[cycle length](β)
//! ```
//!
//! which also equals the optimal average penalty for that offset. The best
//! offset minimises `β_b` over the buffer. [`mdp_oracle_average_cost`]
//! solves the same problem by relative value iteration and serves as an
//! independent check.

use crate::error::{Error, Result};
use crate::gittins::GittinsTable;
use crate::numeric::CompensatedSum;
use crate::penalty::{PenaltyCurve, ServiceTimeDistribution};

const ROOT_TOLERANCE: f64 = 1e-13;
const MAX_BISECTIONS: usize = 200;

/// Expected cost and length of one inter-delivery cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleStatistics {
    pub expected_cost: f64,
    pub expected_length: f64,
}

impl CycleStatistics {
    /// `cost − β · length`.
    pub fn excess(&self, beta: f64) -> f64 {
        self.expected_cost - beta * self.expected_length
    }

    pub fn average(&self) -> f64 {
        self.expected_cost / self.expected_length
    }
}

/// Threshold rule `γ(Δ) ≥ β` for a fixed buffer offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPolicy {
    pub offset: usize,
    pub beta: f64,
}

/// Best offset over a buffer of size `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferSelection {
    pub offset: usize,
    pub beta: f64,
    /// `β_b` for every `b < B`.
    pub roots: Vec<f64>,
}

/// Smallest `z ≥ 0` with `γ(T + b + z) ≥ β`.
pub fn waiting_time(t: usize, b: usize, beta: f64, gittins: &GittinsTable) -> Result<usize> {
    let start = t + b;
    let end = start.max(gittins.delta_max());
    (start..=end)
        .find(|&a| gittins.at(a) >= beta)
        .map(|a| a - start)
        .ok_or(Error::UnreachableThreshold {
            beta,
            sup: gittins.at(gittins.delta_max()),
        })
}

/// Penalty, service law and the derived tables the renewal evaluator needs.
#[derive(Debug, Clone)]
pub struct SingleSource {
    penalty: PenaltyCurve,
    service: ServiceTimeDistribution,
    gittins: GittinsTable,
    // service_cost[a] = E[Σ_{j<T} p(a+j)] for a ≤ δ_max
    service_cost: Vec<f64>,
}

impl SingleSource {
    pub fn new(penalty: PenaltyCurve, service: ServiceTimeDistribution) -> Self {
        let gittins = GittinsTable::new(&penalty, &service);
        let service_cost = (0..=penalty.delta_max())
            .map(|a| expected_service_cost(&penalty, &service, a))
            .collect();
        Self {
            penalty,
            service,
            gittins,
            service_cost,
        }
    }

    pub fn penalty(&self) -> &PenaltyCurve {
        &self.penalty
    }

    pub fn service(&self) -> &ServiceTimeDistribution {
        &self.service
    }

    pub fn gittins(&self) -> &GittinsTable {
        &self.gittins
    }

    /// `E[Σ_{j<T} p(a + j)]`, the penalty accrued while a feature is in service.
    pub fn service_cost(&self, a: usize) -> f64 {
        if a >= self.service_cost.len() {
            self.penalty.plateau() * self.service.mean()
        } else {
            self.service_cost[a]
        }
    }

    pub fn waiting_time(&self, t: usize, b: usize, beta: f64) -> Result<usize> {
        waiting_time(t, b, beta, &self.gittins)
    }

    /// Exact double expectation over the service law of the cycle cost and length.
    pub fn cycle_statistics(&self, b: usize, beta: f64) -> Result<CycleStatistics> {
        let mut cost = CompensatedSum::new();
        let mut length = CompensatedSum::new();
        for &(t, prob) in self.service.pmf() {
            let z = self.waiting_time(t, b, beta)?;
            let mut waiting = CompensatedSum::new();
            for k in t..t + z {
                waiting.add(self.penalty.at(k + b));
            }
            cost.add(prob * (waiting.value() + self.service_cost(t + z + b)));
            length.add(prob * z as f64);
        }
        length.add(self.service.mean());
        Ok(CycleStatistics {
            expected_cost: cost.value(),
            expected_length: length.value(),
        })
    }

    /// `f(β)`, with unreachable thresholds treated as `−∞`.
    fn excess(&self, b: usize, beta: f64) -> Result<f64> {
        match self.cycle_statistics(b, beta) {
            Ok(s) => Ok(s.excess(beta)),
            Err(Error::UnreachableThreshold { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }

    /// `β_b`: bisection on `[min p, sup γ]` followed by one fixed-point step.
    pub fn threshold_root(&self, b: usize) -> Result<ThresholdPolicy> {
        let beta = root_of_decreasing(
            self.penalty.min_value(),
            self.gittins.at(self.gittins.delta_max()),
            |beta| self.excess(b, beta),
            |beta| self.cycle_statistics(b, beta),
        )?;
        Ok(ThresholdPolicy { offset: b, beta })
    }

    /// `b* = argmin_{b<B} β_b`, ties to the smaller offset.
    pub fn optimal_buffer_offset(&self, buffer: usize) -> Result<BufferSelection> {
        if buffer == 0 {
            return Err(Error::Config("buffer size must be at least 1".into()));
        }
        let roots = (0..buffer)
            .map(|b| self.threshold_root(b).map(|p| p.beta))
            .collect::<Result<Vec<_>>>()?;
        let mut offset = 0;
        for (b, &r) in roots.iter().enumerate() {
            if r < roots[offset] {
                offset = b;
            }
        }
        Ok(BufferSelection {
            offset,
            beta: roots[offset],
            roots,
        })
    }
}

/// `E[Σ_{j<T} p(a + j)]`.
pub fn expected_service_cost(
    penalty: &PenaltyCurve,
    service: &ServiceTimeDistribution,
    a: usize,
) -> f64 {
    if a >= penalty.delta_max() {
        return penalty.plateau() * service.mean();
    }
    let mut acc = CompensatedSum::new();
    for &(t, prob) in service.pmf() {
        let mut run = CompensatedSum::new();
        for j in 0..t {
            run.add(penalty.at(a + j));
        }
        acc.add(prob * run.value());
    }
    acc.value()
}

/// Root of a nonincreasing `f` on `[lo, hi]` with `f(lo) ≥ 0 ≥ f(hi)`.
///
/// After bisection the ratio `cost/length` at the midpoint is tried as a
/// Dinkelbach step; whichever point has the smaller `|f|` is returned.
pub(crate) fn root_of_decreasing(
    lo: f64,
    hi: f64,
    f: impl Fn(f64) -> Result<f64>,
    stats: impl Fn(f64) -> Result<CycleStatistics>,
) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    if f(hi)? >= 0.0 {
        return Ok(hi);
    }
    if f(lo)? <= 0.0 {
        return Ok(lo);
    }
    let scale = lo.abs().max(hi.abs()).max(1.0);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= ROOT_TOLERANCE * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let f_mid = f(mid)?;
    let mut best = (mid, f_mid.abs());
    if let Ok(s) = stats(mid) {
        let candidate = s.average();
        if candidate.is_finite() {
            let fc = f(candidate)?.abs();
            if fc < best.1 {
                best = (candidate, fc);
            }
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Numeric(format!("no finite root near {mid}")));
    }
    Ok(best.0)
}

/// Free-function form of [`SingleSource::cycle_statistics`].
pub fn cycle_statistics(
    penalty: &PenaltyCurve,
    service: &ServiceTimeDistribution,
    b: usize,
    beta: f64,
) -> Result<CycleStatistics> {
    SingleSource::new(penalty.clone(), service.clone()).cycle_statistics(b, beta)
}

/// Free-function form of [`SingleSource::threshold_root`].
pub fn threshold_root(
    penalty: &PenaltyCurve,
    service: &ServiceTimeDistribution,
    b: usize,
) -> Result<f64> {
    Ok(SingleSource::new(penalty.clone(), service.clone())
        .threshold_root(b)?
        .beta)
}

/// Free-function form of [`SingleSource::optimal_buffer_offset`].
pub fn optimal_buffer_offset(
    penalty: &PenaltyCurve,
    service: &ServiceTimeDistribution,
    buffer: usize,
) -> Result<BufferSelection> {
    SingleSource::new(penalty.clone(), service.clone()).optimal_buffer_offset(buffer)
}

// ---------------------------------------------------------------------------
// Relative value iteration oracle
// ---------------------------------------------------------------------------

/// Decision at an idle slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleAction {
    Idle,
    Send { offset: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub gain: f64,
    /// Greedy action for AoI `0..=δ_truncate`.
    pub policy: Vec<OracleAction>,
    pub sweeps: usize,
}

/// Relative value iteration on the semi-Markov decision process observed at idle slots.
///
/// From AoI `δ` the controller either idles (cost `p(δ)`, one slot, next AoI
/// `δ+1`) or sends the feature at offset `b` (cost `E[Σ_{k<T} p(δ+k)]`,
/// `E[T]` slots, next AoI `T+b`). AoIs are clamped at `δ_truncate`; every
/// AoI at or past `δ_max` has identical costs and transitions, so the clamp
/// is exact once `δ_truncate ≥ δ_max`.
#[derive(Debug, Clone)]
pub struct RelativeValueIteration {
    max_sweeps: usize,
    tolerance: f64,
    aperiodicity: f64,
}

impl Default for RelativeValueIteration {
    fn default() -> Self {
        Self {
            max_sweeps: 1_000_000,
            tolerance: 1e-10,
            aperiodicity: 0.9,
        }
    }
}

impl RelativeValueIteration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_max_sweeps(mut self, n: usize) -> Self {
        self.max_sweeps = n;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn solve(
        &self,
        penalty: &PenaltyCurve,
        service: &ServiceTimeDistribution,
        buffer: usize,
        delta_truncate: usize,
    ) -> Result<OracleSolution> {
        if buffer == 0 {
            return Err(Error::Config("buffer size must be at least 1".into()));
        }
        if delta_truncate < penalty.delta_max() {
            return Err(Error::Config(format!(
                "delta_truncate {delta_truncate} is below delta_max {}",
                penalty.delta_max()
            )));
        }
        let n = delta_truncate + 1;
        let eta = self.aperiodicity;
        let mean_t = service.mean();
        let idle_cost: Vec<f64> = (0..n).map(|d| penalty.at(d)).collect();
        let send_cost: Vec<f64> = (0..n)
            .map(|d| expected_service_cost(penalty, service, d) / mean_t)
            .collect();
        let anchor = service.min_value().min(n - 1);

        let expected_after_send = |h: &[f64]| -> (usize, f64) {
            let mut best = (0, f64::INFINITY);
            for b in 0..buffer {
                let mut acc = CompensatedSum::new();
                for &(t, prob) in service.pmf() {
                    acc.add(prob * h[(t + b).min(n - 1)]);
                }
                if acc.value() < best.1 {
                    best = (b, acc.value());
                }
            }
            best
        };

        let mut h = vec![0.0; n];
        let mut next = vec![0.0; n];
        for sweep in 1..=self.max_sweeps {
            let (_, after_send) = expected_after_send(&h);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for d in 0..n {
                let idle = idle_cost[d] + eta * h[(d + 1).min(n - 1)] + (1.0 - eta) * h[d];
                let k = eta / mean_t;
                let send = send_cost[d] + k * after_send + (1.0 - k) * h[d];
                let v = idle.min(send);
                next[d] = v;
                let diff = v - h[d];
                lo = lo.min(diff);
                hi = hi.max(diff);
            }
            let shift = next[anchor];
            for d in 0..n {
                h[d] = next[d] - shift;
            }
            if hi - lo < self.tolerance {
                let gain = 0.5 * (lo + hi);
                let (offset, after_send) = expected_after_send(&h);
                let k = eta / mean_t;
                let policy = (0..n)
                    .map(|d| {
                        let idle = idle_cost[d] + eta * h[(d + 1).min(n - 1)] + (1.0 - eta) * h[d];
                        let send = send_cost[d] + k * after_send + (1.0 - k) * h[d];
                        if send <= idle {
                            OracleAction::Send { offset }
                        } else {
                            OracleAction::Idle
                        }
                    })
                    .collect();
                return Ok(OracleSolution {
                    gain,
                    policy,
                    sweeps: sweep,
                });
            }
        }
        Err(Error::Numeric(format!(
            "relative value iteration did not converge in {} sweeps",
            self.max_sweeps
        )))
    }
}

/// Optimal average penalty by relative value iteration with default settings.
pub fn mdp_oracle_average_cost(
    penalty: &PenaltyCurve,
    service: &ServiceTimeDistribution,
    buffer: usize,
    delta_truncate: usize,
) -> Result<OracleSolution> {
    RelativeValueIteration::new().solve(penalty, service, buffer, delta_truncate)
}
