//! Scheduling policies, registered by name and built against a [`System`].
//!
//! A policy only decides what to send when the channel is idle; the
//! simulator owns all state. Policies are immutable, so one instance serves
//! every replication concurrently.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gittins::GittinsTable;
use crate::multi_source::{Arm, WhittleTable};
use crate::single_source::SingleSource;

/// One source: its penalty/service model, weight and buffer size `B`.
#[derive(Debug, Clone)]
pub struct SourceModel {
    pub model: Arc<SingleSource>,
    pub weight: f64,
    pub buffer: usize,
}

/// All sources sharing the channel.
#[derive(Debug, Clone)]
pub struct System {
    pub sources: Vec<SourceModel>,
}

impl System {
    pub fn new(sources: Vec<SourceModel>) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Config("a system needs at least one source".into()));
        }
        for (l, s) in sources.iter().enumerate() {
            if s.buffer == 0 {
                return Err(Error::Config(format!("source {l}: buffer size must be at least 1")));
            }
            if !(s.weight.is_finite() && s.weight > 0.0) {
                return Err(Error::Config(format!("source {l}: weight must be positive")));
            }
        }
        Ok(Self { sources })
    }

    pub fn single(model: SingleSource, buffer: usize) -> Result<Self> {
        Self::new(vec![SourceModel {
            model: Arc::new(model),
            weight: 1.0,
            buffer,
        }])
    }

    fn only_source(&self, policy: &str) -> Result<&SourceModel> {
        match self.sources.as_slice() {
            [s] => Ok(s),
            _ => Err(Error::Config(format!(
                "policy `{policy}` schedules exactly one source, got {}",
                self.sources.len()
            ))),
        }
    }
}

/// How features enter the source buffers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSupply {
    /// A fresh feature every slot; the buffer holds the `B` most recent.
    AtWill,
    /// One feature every `period` slots from slot 0 into a FIFO queue of `capacity`.
    Periodic { period: u64, capacity: usize },
}

/// What the simulator shows a policy at an idle slot.
#[derive(Debug, Clone, Copy)]
pub struct SlotState<'a> {
    pub slot: u64,
    pub aoi: &'a [usize],
    /// Queued features per source (periodic supply only).
    pub queued: &'a [usize],
}

/// Submit the feature at `offset` (0 = freshest) of `source`; under periodic
/// supply the head of the queue is sent and `offset` is ignored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transmission {
    pub source: usize,
    pub offset: usize,
}

pub trait SchedulingPolicy: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;

    fn supply(&self) -> FeatureSupply {
        FeatureSupply::AtWill
    }

    /// Called only when the channel is idle.
    fn decide(&self, state: &SlotState<'_>) -> Option<Transmission>;
}

/// Policy selection with optional parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub name: String,
    /// Buffer offset for `threshold`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    /// Explicit threshold for `threshold`; the optimal root when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Generation period for `periodic`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<u64>,
}

impl PolicySpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            ..Self::default()
        }
    }
}

pub trait PolicyFactory: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn build(&self, system: &System, spec: &PolicySpec) -> Result<Arc<dyn SchedulingPolicy>>;
}

/// Name → factory map.
#[derive(Clone, Default)]
pub struct PolicyRegistry {
    factories: BTreeMap<String, Arc<dyn PolicyFactory>>,
}

impl PolicyRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with every built-in policy.
    pub fn with_defaults() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(ZeroWaitFactory));
        r.register(Arc::new(ThresholdFactory));
        r.register(Arc::new(SelectionFromBufferFactory));
        r.register(Arc::new(PeriodicFactory));
        r.register(Arc::new(MafFactory));
        r.register(Arc::new(WhittleFactory { selection: false }));
        r.register(Arc::new(WhittleFactory { selection: true }));
        r
    }

    pub fn register(&mut self, factory: Arc<dyn PolicyFactory>) {
        self.factories.insert(factory.name().to_string(), factory);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn PolicyFactory>> {
        self.factories.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }

    pub fn build(&self, system: &System, spec: &PolicySpec) -> Result<Arc<dyn SchedulingPolicy>> {
        self.get(&spec.name)
            .ok_or_else(|| Error::UnknownPolicy(spec.name.clone()))?
            .build(system, spec)
    }
}

fn reject_params(spec: &PolicySpec, allowed: &[&str]) -> Result<()> {
    let given = [
        ("offset", spec.offset.is_some()),
        ("beta", spec.beta.is_some()),
        ("period", spec.period.is_some()),
    ];
    for (key, present) in given {
        if present && !allowed.contains(&key) {
            return Err(Error::Config(format!("policy `{}` takes no `{key}` parameter", spec.name)));
        }
    }
    Ok(())
}

// --- single source ----------------------------------------------------------

#[derive(Debug)]
pub struct ZeroWait;

impl SchedulingPolicy for ZeroWait {
    fn name(&self) -> &str {
        "zero_wait"
    }

    fn decide(&self, _: &SlotState<'_>) -> Option<Transmission> {
        Some(Transmission { source: 0, offset: 0 })
    }
}

struct ZeroWaitFactory;

impl PolicyFactory for ZeroWaitFactory {
    fn name(&self) -> &'static str {
        "zero_wait"
    }

    fn description(&self) -> &'static str {
        "send the freshest feature whenever the channel is idle"
    }

    fn build(&self, system: &System, spec: &PolicySpec) -> Result<Arc<dyn SchedulingPolicy>> {
        reject_params(spec, &[])?;
        system.only_source(self.name())?;
        Ok(Arc::new(ZeroWait))
    }
}

/// Send the feature at `offset` once `γ(Δ) ≥ β`.
#[derive(Debug)]
pub struct Threshold {
    name: &'static str,
    offset: usize,
    beta: f64,
    gittins: GittinsTable,
}

impl Threshold {
    pub fn new(offset: usize, beta: f64, gittins: GittinsTable) -> Self {
        Self {
            name: "threshold",
            offset,
            beta,
            gittins,
        }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl SchedulingPolicy for Threshold {
    fn name(&self) -> &str {
        self.name
    }

    fn decide(&self, state: &SlotState<'_>) -> Option<Transmission> {
        (self.gittins.at(state.aoi[0]) >= self.beta).then_some(Transmission {
            source: 0,
            offset: self.offset,
        })
    }
}

struct ThresholdFactory;

impl PolicyFactory for ThresholdFactory {
    fn name(&self) -> &'static str {
        "threshold"
    }

    fn description(&self) -> &'static str {
        "fixed buffer offset b, send when the Gittins index reaches beta (default: the optimal root for b)"
    }

    fn build(&self, system: &System, spec: &PolicySpec) -> Result<Arc<dyn SchedulingPolicy>> {
        reject_params(spec, &["offset", "beta"])?;
        let src = system.only_source(self.name())?;
        let offset = spec.offset.unwrap_or(0);
        if offset >= src.buffer {
            return Err(Error::Config(format!(
                "offset {offset} does not fit a buffer of {}",
                src.buffer
            )));
        }
        let beta = match spec.beta {
            Some(b) => b,
            None => src.model.threshold_root(offset)?.beta,
        };
        Ok(Arc::new(Threshold::new(offset, beta, src.model.gittins().clone())))
    }
}

struct SelectionFromBufferFactory;

impl PolicyFactory for SelectionFromBufferFactory {
    fn name(&self) -> &'static str {
        "selection_from_buffer"
    }

    fn description(&self) -> &'static str {
        "optimal offset b* over the buffer with its optimal threshold"
    }

    fn build(&self, system: &System, spec: &PolicySpec) -> Result<Arc<dyn SchedulingPolicy>> {
        reject_params(spec, &[])?;
        let src = system.only_source(self.name())?;
        let sel = src.model.optimal_buffer_offset(src.buffer)?;
        let mut t = Threshold::new(sel.offset, sel.beta, src.model.gittins().clone());
        t.name = "selection_from_buffer";
        Ok(Arc::new(t))
    }
}

/// Generate every `period` slots, queue up to `capacity`, serve FCFS.
#[derive(Debug)]
pub struct Periodic {
    period: u64,
    capacity: usize,
}

impl SchedulingPolicy for Periodic {
    fn name(&self) -> &str {
        "periodic"
    }

    fn supply(&self) -> FeatureSupply {
        FeatureSupply::Periodic {
            period: self.period,
            capacity: self.capacity,
        }
    }

    fn decide(&self, state: &SlotState<'_>) -> Option<Transmission> {
        (state.queued[0] > 0).then_some(Transmission { source: 0, offset: 0 })
    }
}

struct PeriodicFactory;

impl PolicyFactory for PeriodicFactory {
    fn name(&self) -> &'static str {
        "periodic"
    }

    fn description(&self) -> &'static str {
        "features generated every `period` slots into a FIFO queue of the buffer size"
    }

    fn build(&self, system: &System, spec: &PolicySpec) -> Result<Arc<dyn SchedulingPolicy>> {
        reject_params(spec, &["period"])?;
        let src = system.only_source(self.name())?;
        let period = spec
            .period
            .ok_or_else(|| Error::Config("policy `periodic` needs `period`".into()))?;
        if period == 0 {
            return Err(Error::Config("period must be at least 1".into()));
        }
        Ok(Arc::new(Periodic {
            period,
            capacity: src.buffer,
        }))
    }
}

// --- multiple sources -------------------------------------------------------

/// Maximum age first: the oldest source sends its freshest feature.
#[derive(Debug)]
pub struct Maf;

impl SchedulingPolicy for Maf {
    fn name(&self) -> &str {
        "maf"
    }

    fn decide(&self, state: &SlotState<'_>) -> Option<Transmission> {
        let mut best = 0;
        for (l, &a) in state.aoi.iter().enumerate() {
            if a > state.aoi[best] {
                best = l;
            }
        }
        Some(Transmission { source: best, offset: 0 })
    }
}

struct MafFactory;

impl PolicyFactory for MafFactory {
    fn name(&self) -> &'static str {
        "maf"
    }

    fn description(&self) -> &'static str {
        "maximum age first, zero wait, freshest feature"
    }

    fn build(&self, _system: &System, spec: &PolicySpec) -> Result<Arc<dyn SchedulingPolicy>> {
        reject_params(spec, &[])?;
        Ok(Arc::new(Maf))
    }
}

/// Largest non-negative Whittle index wins.
///
/// Per source and AoI the best offset is precomputed, so a decision costs
/// one lookup per source.
#[derive(Debug)]
pub struct Whittle {
    name: &'static str,
    // best[l][δ] = (W, offset) maximising over offsets, ties to the smaller offset
    best: Vec<Vec<(f64, usize)>>,
}

impl Whittle {
    pub fn new(system: &System, selection: bool) -> Result<Self> {
        let mut arms = Vec::new();
        for (l, s) in system.sources.iter().enumerate() {
            let offsets = if selection { s.buffer } else { 1 };
            for b in 0..offsets {
                arms.push(Arm::new(l, b, s.weight, s.model.clone())?);
            }
        }
        let table = WhittleTable::new(arms);
        let mut best: Vec<Vec<(f64, usize)>> = system
            .sources
            .iter()
            .map(|s| vec![(f64::NEG_INFINITY, 0); s.model.penalty().delta_max() + 1])
            .collect();
        for (i, arm) in table.arms().iter().enumerate() {
            for (d, slot) in best[arm.source].iter_mut().enumerate() {
                let w = table.at(i, d);
                if w > slot.0 {
                    *slot = (w, arm.offset);
                }
            }
        }
        Ok(Self {
            name: if selection { "whittle_sfb" } else { "whittle_gaw" },
            best,
        })
    }
}

impl SchedulingPolicy for Whittle {
    fn name(&self) -> &str {
        self.name
    }

    fn decide(&self, state: &SlotState<'_>) -> Option<Transmission> {
        let mut choice: Option<(f64, usize, usize)> = None;
        for (l, table) in self.best.iter().enumerate() {
            let (w, b) = table[state.aoi[l].min(table.len() - 1)];
            if choice.is_none_or(|(bw, _, _)| w > bw) {
                choice = Some((w, l, b));
            }
        }
        choice
            .filter(|(w, _, _)| *w >= 0.0)
            .map(|(_, source, offset)| Transmission { source, offset })
    }
}

struct WhittleFactory {
    selection: bool,
}

impl PolicyFactory for WhittleFactory {
    fn name(&self) -> &'static str {
        if self.selection {
            "whittle_sfb"
        } else {
            "whittle_gaw"
        }
    }

    fn description(&self) -> &'static str {
        if self.selection {
            "Whittle index over every (source, buffer offset) arm"
        } else {
            "Whittle index with the freshest feature only"
        }
    }

    fn build(&self, system: &System, spec: &PolicySpec) -> Result<Arc<dyn SchedulingPolicy>> {
        reject_params(spec, &[])?;
        Ok(Arc::new(Whittle::new(system, self.selection)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multi_source::whittle_decide;
    use crate::penalty::{PenaltyCurve, ServiceTimeDistribution};

    fn linear_model() -> SingleSource {
        SingleSource::new(
            PenaltyCurve::from_fn(40, |d| d as f64).unwrap(),
            ServiceTimeDistribution::constant(1).unwrap(),
        )
    }

    fn state<'a>(aoi: &'a [usize], queued: &'a [usize]) -> SlotState<'a> {
        SlotState { slot: 0, aoi, queued }
    }

    #[test]
    fn registry_lists_and_rejects() {
        let r = PolicyRegistry::with_defaults();
        assert_eq!(
            r.names(),
            vec!["maf", "periodic", "selection_from_buffer", "threshold", "whittle_gaw", "whittle_sfb", "zero_wait"]
        );
        let sys = System::single(linear_model(), 3).unwrap();
        assert!(matches!(r.build(&sys, &PolicySpec::named("lifo")), Err(Error::UnknownPolicy(_))));
        let bad = PolicySpec {
            period: Some(3),
            ..PolicySpec::named("zero_wait")
        };
        assert!(matches!(r.build(&sys, &bad), Err(Error::Config(_))));
        assert!(r.build(&sys, &PolicySpec::named("periodic")).is_err());
        let off = PolicySpec {
            offset: Some(3),
            ..PolicySpec::named("threshold")
        };
        assert!(r.build(&sys, &off).is_err());
    }

    #[test]
    fn single_source_policies_need_one_source() {
        let r = PolicyRegistry::with_defaults();
        let s = SourceModel {
            model: Arc::new(linear_model()),
            weight: 1.0,
            buffer: 1,
        };
        let sys = System::new(vec![s.clone(), s]).unwrap();
        assert!(r.build(&sys, &PolicySpec::named("zero_wait")).is_err());
        assert!(r.build(&sys, &PolicySpec::named("maf")).is_ok());
    }

    #[test]
    fn threshold_defaults_to_root() {
        let r = PolicyRegistry::with_defaults();
        let sys = System::single(linear_model(), 1).unwrap();
        let p = r.build(&sys, &PolicySpec::named("threshold")).unwrap();
        // β = 1 and γ(δ) = δ + 1: always send
        for d in 0..5 {
            assert_eq!(p.decide(&state(&[d], &[0])), Some(Transmission { source: 0, offset: 0 }));
        }
        let strict = PolicySpec {
            beta: Some(4.0),
            ..PolicySpec::named("threshold")
        };
        let p = r.build(&sys, &strict).unwrap();
        assert_eq!(p.decide(&state(&[2], &[0])), None);
        assert!(p.decide(&state(&[3], &[0])).is_some());
    }

    #[test]
    fn periodic_serves_queue() {
        let r = PolicyRegistry::with_defaults();
        let sys = System::single(linear_model(), 2).unwrap();
        let spec = PolicySpec {
            period: Some(3),
            ..PolicySpec::named("periodic")
        };
        let p = r.build(&sys, &spec).unwrap();
        assert_eq!(p.supply(), FeatureSupply::Periodic { period: 3, capacity: 2 });
        assert_eq!(p.decide(&state(&[4], &[0])), None);
        assert!(p.decide(&state(&[4], &[1])).is_some());
    }

    #[test]
    fn maf_and_whittle_agree_on_symmetric_linear_sources() {
        let m = Arc::new(linear_model());
        let s = SourceModel {
            model: m.clone(),
            weight: 1.0,
            buffer: 1,
        };
        let sys = System::new(vec![s.clone(), s]).unwrap();
        let whittle = Whittle::new(&sys, false).unwrap();
        let arms = vec![Arm::new(0, 0, 1.0, m.clone()).unwrap(), Arm::new(1, 0, 1.0, m).unwrap()];
        let table = WhittleTable::new(arms);
        for a in 1..12 {
            for b in 1..12 {
                let aoi = [a, b];
                let w = whittle.decide(&state(&aoi, &[0, 0]));
                assert_eq!(w, Maf.decide(&state(&aoi, &[0, 0])));
                assert_eq!(w.map(|t| (t.source, t.offset)), whittle_decide(&table, &aoi, true));
            }
        }
    }
}
