//! Whittle indices for many sources sharing one channel.
//!
//! Every (source `l`, buffer offset `b`) pair is an arm. With `z` the wait
//! until `γ_l(T₁ + b + z) ≥ γ_l(δ)`, the Whittle index is
//!
//! ```text
//! W(δ) = (w / E[T]) · ( E[z + T₂] · γ(δ) − E[Σ_{t=T₁}^{T₁+z+T₂−1} p(t + b)] )
//! ```
//!
//! i.e. `−(w/E[T]) · f(γ(δ))` in terms of the single-source renewal function.
//! The scheduler sends the arm with the largest non-negative index whenever
//! the channel is idle.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::penalty::PenaltyCurve;
use crate::single_source::{root_of_decreasing, waiting_time, CycleStatistics, SingleSource};

/// A buffered feature of one source, viewed as a restless arm.
#[derive(Debug, Clone)]
pub struct Arm {
    pub source: usize,
    pub offset: usize,
    pub weight: f64,
    pub model: Arc<SingleSource>,
}

impl Arm {
    pub fn new(source: usize, offset: usize, weight: f64, model: Arc<SingleSource>) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::Config(format!("weight of source {source} must be positive, got {weight}")));
        }
        Ok(Self {
            source,
            offset,
            weight,
            model,
        })
    }
}

/// Smallest `z ≥ 0` with `γ(T + b + z) ≥ γ(δ)`; always finite.
pub fn whittle_waiting_time(arm: &Arm, t: usize, delta: usize) -> usize {
    let g = arm.model.gittins();
    waiting_time(t, arm.offset, g.at(delta), g).expect("γ(δ) never exceeds sup γ")
}

/// `W_{l,b}(δ)`.
pub fn whittle_index(arm: &Arm, delta: usize) -> f64 {
    let model = &arm.model;
    let gamma = model.gittins().at(delta);
    let stats = model
        .cycle_statistics(arm.offset, gamma)
        .expect("γ(δ) never exceeds sup γ");
    arm.weight / model.service().mean() * -stats.excess(gamma)
}

/// `w · [δ·p(δ+1) − Σ_{t=1}^{δ} p(t)]`, valid for nondecreasing `p`, unit service, `b = 0`.
pub fn whittle_special_case(weight: f64, penalty: &PenaltyCurve, delta: usize) -> Result<f64> {
    if !penalty.is_nondecreasing() {
        return Err(Error::Misuse("closed form needs a nondecreasing penalty".into()));
    }
    if delta == 0 {
        return Err(Error::Misuse("closed form needs delta >= 1".into()));
    }
    let mut acc = CompensatedSum::new();
    acc.add(delta as f64 * penalty.at(delta + 1));
    for t in 1..=delta {
        acc.add(-penalty.at(t));
    }
    Ok(weight * acc.value())
}

/// Whittle indices of every arm for `δ = 0..=δ_max` of its source (constant beyond).
#[derive(Debug, Clone)]
pub struct WhittleTable {
    arms: Vec<Arm>,
    values: Vec<Vec<f64>>,
}

impl WhittleTable {
    pub fn new(arms: Vec<Arm>) -> Self {
        let values = arms
            .par_iter()
            .map(|arm| {
                (0..=arm.model.penalty().delta_max())
                    .map(|d| whittle_index(arm, d))
                    .collect()
            })
            .collect();
        Self { arms, values }
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    /// Index of arm `i` at AoI `delta`.
    #[inline]
    pub fn at(&self, i: usize, delta: usize) -> f64 {
        let v = &self.values[i];
        v[delta.min(v.len() - 1)]
    }

    /// `(source, offset, δ, W)` rows for `δ = 0..=delta_max`.
    pub fn rows(&self, delta_max: usize) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for (i, arm) in self.arms.iter().enumerate() {
            for d in 0..=delta_max {
                out.push((arm.source, arm.offset, d, self.at(i, d)));
            }
        }
        out
    }
}

/// The scheduling decision at one slot: `(source, offset)` or nothing.
///
/// Only arms are considered; ties go to the smaller source, then the smaller
/// offset, and nothing is sent when the channel is busy or every index is
/// negative.
pub fn whittle_decide(
    table: &WhittleTable,
    aois: &[usize],
    channel_idle: bool,
) -> Option<(usize, usize)> {
    if !channel_idle {
        return None;
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for (i, arm) in table.arms().iter().enumerate() {
        let w = table.at(i, aois[arm.source]);
        let better = match best {
            None => true,
            Some((bw, bl, bb)) => w > bw || (w == bw && (arm.source, arm.offset) < (bl, bb)),
        };
        if better {
            best = Some((w, arm.source, arm.offset));
        }
    }
    best.filter(|(w, _, _)| *w >= 0.0).map(|(_, l, b)| (l, b))
}

/// Outcome of [`indexability_diagnostic`].
#[derive(Debug, Clone, PartialEq)]
pub struct IndexabilityReport {
    pub lambdas: Vec<f64>,
    /// `β̄(λ)` per grid point.
    pub betas: Vec<f64>,
    /// `β̄(λ)` pinned at the upper bracket `w·sup γ` (the root lies beyond it).
    pub saturated: Vec<bool>,
    /// Size of the passive set `{δ ≤ δ_max : w·γ(δ) ≤ β̄(λ)}`.
    pub passive_sizes: Vec<usize>,
    pub strictly_increasing: bool,
    pub nested: bool,
}

impl IndexabilityReport {
    pub fn is_indexable(&self) -> bool {
        self.strictly_increasing && self.nested && !self.saturated.iter().any(|&s| s)
    }
}

/// `β̄(λ)`, the root of `f_w(β) + λ·E[T] = 0`, over a sorted grid of charges.
pub fn indexability_diagnostic(arm: &Arm, lambdas: &[f64]) -> Result<IndexabilityReport> {
    if lambdas.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Misuse("lambda grid must be sorted".into()));
    }
    let model = &arm.model;
    let w = arm.weight;
    let mean_t = model.service().mean();
    let gittins = model.gittins();
    let top = w * gittins.at(gittins.delta_max());
    let stats = |beta: f64, lambda: f64| -> Result<CycleStatistics> {
        let s = model.cycle_statistics(arm.offset, beta / w)?;
        Ok(CycleStatistics {
            expected_cost: w * s.expected_cost + lambda * mean_t,
            expected_length: s.expected_length,
        })
    };
    let f = |beta: f64, lambda: f64| -> Result<f64> {
        match stats(beta, lambda) {
            Ok(s) => Ok(s.excess(beta)),
            Err(Error::UnreachableThreshold { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    };

    let mut betas = Vec::with_capacity(lambdas.len());
    let mut saturated = Vec::with_capacity(lambdas.len());
    let mut passive_sizes = Vec::with_capacity(lambdas.len());
    let mut passive_sets: Vec<Vec<bool>> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        saturated.push(f(top, lambda)? > 0.0);
        let beta = root_of_decreasing(
            w * model.penalty().min_value(),
            top,
            |b| f(b, lambda),
            |b| stats(b, lambda),
        )?;
        let passive: Vec<bool> = (0..=gittins.delta_max())
            .map(|d| w * gittins.at(d) <= beta)
            .collect();
        passive_sizes.push(passive.iter().filter(|&&p| p).count());
        passive_sets.push(passive);
        betas.push(beta);
    }
    let strictly_increasing = betas.windows(2).all(|b| b[0] < b[1]);
    let nested = passive_sets
        .windows(2)
        .all(|s| s[0].iter().zip(&s[1]).all(|(a, b)| !a || *b));
    Ok(IndexabilityReport {
        lambdas: lambdas.to_vec(),
        betas,
        saturated,
        passive_sizes,
        strictly_increasing,
        nested,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::ServiceTimeDistribution;
    use proptest::prelude::*;

    fn arm(penalty: PenaltyCurve, service: ServiceTimeDistribution, offset: usize, weight: f64) -> Arm {
        Arm::new(0, offset, weight, Arc::new(SingleSource::new(penalty, service))).unwrap()
    }

    fn linear() -> PenaltyCurve {
        PenaltyCurve::from_fn(64, |d| d as f64).unwrap()
    }

    fn unit() -> ServiceTimeDistribution {
        ServiceTimeDistribution::constant(1).unwrap()
    }

    #[test]
    fn index_examples() {
        let a = arm(linear(), unit(), 0, 1.0);
        assert!((whittle_index(&a, 3) - 6.0).abs() < 1e-12);
        assert!((whittle_index(&a, 1) - 1.0).abs() < 1e-12);
        let c = arm(PenaltyCurve::new(vec![0.4; 12]).unwrap(), ServiceTimeDistribution::geometric(0.5, 20).unwrap(), 1, 2.0);
        for d in 0..30 {
            assert!(whittle_index(&c, d).abs() < 1e-12);
        }
    }

    #[test]
    fn waiting_examples() {
        let a = arm(linear(), unit(), 0, 1.0);
        for d in 0..20 {
            assert_eq!(whittle_waiting_time(&a, 1, d), d.saturating_sub(1));
        }
        let b = arm(linear(), unit(), 2, 1.0);
        assert_eq!(whittle_waiting_time(&b, 1, 2), 0);
        let dip = PenaltyCurve::from_fn(60, |d| {
            let r = (d as f64 - 10.0) / 10.0;
            0.05 + 0.6 * (r * r).min(1.0)
        })
        .unwrap();
        let a = arm(dip, unit(), 0, 1.0);
        assert!(whittle_waiting_time(&a, 1, 30) > 10);
    }

    #[test]
    fn special_case_examples() {
        assert_eq!(whittle_special_case(1.0, &linear(), 3).unwrap(), 6.0);
        assert_eq!(whittle_special_case(2.0, &linear(), 3).unwrap(), 12.0);
        let c = PenaltyCurve::new(vec![0.3; 5]).unwrap();
        assert!(whittle_special_case(1.0, &c, 7).unwrap().abs() < 1e-15);
        assert!(whittle_special_case(1.0, &linear(), 0).is_err());
        let nonmono = PenaltyCurve::new(vec![1.0, 0.0, 2.0]).unwrap();
        assert!(matches!(whittle_special_case(1.0, &nonmono, 1), Err(Error::Misuse(_))));
    }

    #[test]
    fn decision_rule() {
        let l = linear();
        let m = Arc::new(SingleSource::new(l, unit()));
        let arms = vec![
            Arm::new(0, 0, 1.0, m.clone()).unwrap(),
            Arm::new(1, 0, 1.0, m.clone()).unwrap(),
        ];
        let table = WhittleTable::new(arms);
        assert_eq!(whittle_decide(&table, &[3, 1], true), Some((0, 0)));
        assert_eq!(whittle_decide(&table, &[1, 3], true), Some((1, 0)));
        assert_eq!(whittle_decide(&table, &[2, 2], true), Some((0, 0)));
        assert_eq!(whittle_decide(&table, &[3, 1], false), None);

    }

    #[test]
    fn negative_indices_mean_no_transmission() {
        // after a delivery the AoI sits at 1 where p is high; waiting is better
        let p = PenaltyCurve::new(vec![1.0, 1.0, 0.2, 0.2, 0.2, 1.0]).unwrap();
        let a = arm(p, unit(), 0, 1.0);
        let table = WhittleTable::new(vec![a]);
        let w = table.at(0, 2);
        assert!(w < 0.0, "{w}");
        assert_eq!(whittle_decide(&table, &[2], true), None);
    }

    #[test]
    fn indexability_on_linear_and_dip() {
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 * 0.1).collect();
        let a = arm(PenaltyCurve::from_fn(200, |d| d as f64).unwrap(), unit(), 0, 1.0);
        let r = indexability_diagnostic(&a, &grid).unwrap();
        assert!(r.is_indexable(), "{r:?}");
        let single = a.model.threshold_root(0).unwrap().beta;
        assert!((r.betas[0] - single).abs() < 1e-9);
        assert!(indexability_diagnostic(&a, &[1.0, 0.5]).is_err());
    }

    #[test]
    fn saturation_is_reported() {
        let a = arm(PenaltyCurve::from_fn(4, |d| d as f64).unwrap(), unit(), 0, 1.0);
        let r = indexability_diagnostic(&a, &[0.0, 100.0, 200.0]).unwrap();
        assert!(r.saturated[2]);
        assert!(!r.is_indexable());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn closed_form_recovered(mut values in prop::collection::vec(0.0f64..2.0, 3..40), w in 0.1f64..5.0) {
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let p = PenaltyCurve::new(values).unwrap();
            let a = arm(p.clone(), unit(), 0, w);
            for d in 1..=p.delta_max() + 3 {
                let general = whittle_index(&a, d);
                let closed = whittle_special_case(w, &p, d).unwrap();
                prop_assert!((general - closed).abs() <= 1e-12 * closed.abs().max(1.0), "δ={d}: {general} vs {closed}");
            }
        }

        #[test]
        fn index_is_linear_in_weight(values in prop::collection::vec(0.0f64..2.0, 3..30), w in 0.1f64..5.0) {
            let p = PenaltyCurve::new(values).unwrap();
            let s = ServiceTimeDistribution::geometric(0.6, 10).unwrap();
            let m = Arc::new(SingleSource::new(p.clone(), s));
            let one = Arm::new(0, 1, 1.0, m.clone()).unwrap();
            let scaled = Arm::new(0, 1, w, m).unwrap();
            for d in 0..=p.delta_max() {
                prop_assert!((whittle_index(&scaled, d) - w * whittle_index(&one, d)).abs() < 1e-9);
            }
        }
    }
}
