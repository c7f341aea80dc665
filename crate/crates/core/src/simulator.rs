//! Slot-synchronous simulation of sources sharing one non-preemptive channel.
//!
//! Within a slot the order is: delivery (AoI resets to `T + b`, the ACK
//! arrives in the same slot), periodic feature generation, the policy's
//! decision if the channel is idle, and finally the penalty `p_l(Δ_l(t))` is
//! accrued once the warmup has passed.

use std::collections::VecDeque;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::policy::{FeatureSupply, SchedulingPolicy, SlotState, System};

/// Run length, warmup, seeding and replication count.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: u64,
    /// Defaults to `10 · (δ_max + T_max)` over the sources.
    pub warmup: Option<u64>,
    pub seed: u64,
    pub replications: usize,
    /// `Δ(0)`; defaults to `1 + min T` per source.
    pub initial_aoi: Option<usize>,
    /// Per-slot rows to keep for the first replication (0 disables the trace).
    pub trace_limit: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 100_000,
            warmup: None,
            seed: 0,
            replications: 1,
            initial_aoi: None,
            trace_limit: 0,
        }
    }
}

impl SimConfig {
    pub fn resolved_warmup(&self, system: &System) -> u64 {
        self.warmup.unwrap_or_else(|| {
            system
                .sources
                .iter()
                .map(|s| 10 * (s.model.penalty().delta_max() + s.model.service().max_value()) as u64)
                .max()
                .unwrap_or(0)
        })
    }
}

/// One slot of the optional trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub slot: u64,
    pub aoi: Vec<usize>,
    pub penalty: f64,
    pub delivered: Option<usize>,
    pub sent: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Time-average of `Σ_l w_l p_l(Δ_l(t))` after warmup.
    pub average_error: f64,
    /// Time-average of `p_l(Δ_l(t))` per source (unweighted).
    pub per_source: Vec<f64>,
    pub mean_aoi: Vec<f64>,
    pub max_aoi: Vec<usize>,
    pub transmissions: u64,
    pub deliveries: u64,
    pub dropped: u64,
    pub measured_slots: u64,
    pub trace: Vec<TraceRow>,
}

struct InService {
    source: usize,
    generated: i64,
    done: u64,
}

/// One replication with its own RNG stream.
pub fn simulate(
    system: &System,
    policy: &dyn SchedulingPolicy,
    config: &SimConfig,
    stream: u64,
) -> Result<SimResult> {
    let warmup = config.resolved_warmup(system);
    if config.horizon <= warmup {
        return Err(Error::Config(format!(
            "horizon {} must exceed warmup {warmup}",
            config.horizon
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(stream);

    let n = system.sources.len();
    let supply = policy.supply();
    let mut aoi: Vec<usize> = system
        .sources
        .iter()
        .map(|s| config.initial_aoi.unwrap_or(1 + s.model.service().min_value()))
        .collect();
    let mut queues: Vec<VecDeque<i64>> = vec![VecDeque::new(); n];
    let mut queued = vec![0usize; n];
    let mut channel: Option<InService> = None;

    let mut total = 0.0f64;
    let mut per_source = vec![0.0f64; n];
    let mut aoi_sum = vec![0.0f64; n];
    let mut max_aoi = vec![0usize; n];
    let (mut transmissions, mut deliveries, mut dropped) = (0u64, 0u64, 0u64);
    let mut trace = Vec::new();

    for t in 0..config.horizon {
        if t > 0 {
            aoi.iter_mut().for_each(|a| *a += 1);
        }

        let mut delivered = None;
        if let Some(job) = channel.as_ref().filter(|j| j.done == t) {
            let age = (t as i64 - job.generated) as usize;
            // Δ = D − G even when the delivered feature is older than the previous one
            aoi[job.source] = age;
            delivered = Some(job.source);
            deliveries += 1;
            channel = None;
        }

        if let FeatureSupply::Periodic { period, capacity } = supply {
            if t % period == 0 {
                for (q, c) in queues.iter_mut().zip(queued.iter_mut()) {
                    if q.len() < capacity {
                        q.push_back(t as i64);
                        *c = q.len();
                    } else {
                        dropped += 1;
                    }
                }
            }
        }

        let mut sent = None;
        if channel.is_none() {
            let state = SlotState {
                slot: t,
                aoi: &aoi,
                queued: &queued,
            };
            if let Some(tx) = policy.decide(&state) {
                let source = tx.source;
                let generated = match supply {
                    FeatureSupply::AtWill => {
                        if tx.offset >= system.sources[source].buffer {
                            return Err(Error::Misuse(format!(
                                "policy chose offset {} beyond buffer {}",
                                tx.offset, system.sources[source].buffer
                            )));
                        }
                        // the buffer holds features generated at t, t−1, …, t−B+1;
                        // the source has been sampling since before slot 0
                        t as i64 - tx.offset as i64
                    }
                    FeatureSupply::Periodic { .. } => {
                        let g = queues[source]
                            .pop_front()
                            .ok_or_else(|| Error::Misuse("policy served an empty queue".into()))?;
                        queued[source] = queues[source].len();
                        g
                    }
                };
                let service = system.sources[source].model.service().sample(&mut rng) as u64;
                channel = Some(InService {
                    source,
                    generated,
                    done: t + service,
                });
                transmissions += 1;
                sent = Some((source, tx.offset));
            }
        }

        let mut slot_penalty = 0.0;
        for (l, s) in system.sources.iter().enumerate() {
            let p = s.model.penalty().at(aoi[l]);
            slot_penalty += s.weight * p;
            if t >= warmup {
                per_source[l] += p;
                aoi_sum[l] += aoi[l] as f64;
                max_aoi[l] = max_aoi[l].max(aoi[l]);
            }
        }
        if t >= warmup {
            total += slot_penalty;
        }
        if trace.len() < config.trace_limit {
            trace.push(TraceRow {
                slot: t,
                aoi: aoi.clone(),
                penalty: slot_penalty,
                delivered,
                sent,
            });
        }
    }

    let measured = (config.horizon - warmup) as f64;
    Ok(SimResult {
        average_error: total / measured,
        per_source: per_source.iter().map(|v| v / measured).collect(),
        mean_aoi: aoi_sum.iter().map(|v| v / measured).collect(),
        max_aoi,
        transmissions,
        deliveries,
        dropped,
        measured_slots: config.horizon - warmup,
        trace,
    })
}

/// Mean and standard error of one statistic over replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Sample standard deviation over `√n`; zero for a single run.
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        if samples.len() < 2 {
            return Self { mean, stderr: 0.0 };
        }
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        Self {
            mean,
            stderr: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub average_error: Estimate,
    pub per_source: Vec<Estimate>,
    pub mean_aoi: Vec<Estimate>,
    pub runs: Vec<SimResult>,
}

/// Independent replications on streams `0..n` of the base seed, run in parallel.
pub fn replicate(
    system: &System,
    policy: &dyn SchedulingPolicy,
    config: &SimConfig,
) -> Result<Aggregate> {
    if config.replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    let runs = (0..config.replications)
        .into_par_iter()
        .map(|i| {
            let mut c = config.clone();
            if i > 0 {
                c.trace_limit = 0;
            }
            simulate(system, policy, &c, i as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    let pick = |f: &dyn Fn(&SimResult) -> f64| {
        Estimate::from_samples(&runs.iter().map(f).collect::<Vec<_>>())
    };
    let n = system.sources.len();
    Ok(Aggregate {
        average_error: pick(&|r| r.average_error),
        per_source: (0..n).map(|l| pick(&|r| r.per_source[l])).collect(),
        mean_aoi: (0..n).map(|l| pick(&|r| r.mean_aoi[l])).collect(),
        runs,
    })
}

/// Trace as CSV: `slot,aoi_0[,aoi_1…],penalty,delivered,sent_source,sent_offset`.
pub fn write_trace(rows: &[TraceRow], mut out: impl Write) -> std::io::Result<()> {
    let n = rows.first().map_or(0, |r| r.aoi.len());
    write!(out, "slot")?;
    for l in 0..n {
        write!(out, ",aoi_{l}")?;
    }
    writeln!(out, ",penalty,delivered,sent_source,sent_offset")?;
    for r in rows {
        write!(out, "{}", r.slot)?;
        for a in &r.aoi {
            write!(out, ",{a}")?;
        }
        let opt = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
        writeln!(
            out,
            ",{},{},{},{}",
            r.penalty,
            opt(r.delivered),
            opt(r.sent.map(|s| s.0)),
            opt(r.sent.map(|s| s.1))
        )?;
    }
    Ok(())
}
