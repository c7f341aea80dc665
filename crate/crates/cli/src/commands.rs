//! One function per subcommand; each returns the CSV body without the hash header.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use aoi_sched::gittins::GittinsTable;
use aoi_sched::info_metrics::{freshness_cross_curve, freshness_decomposition, TimeSeriesDataset};
use aoi_sched::multi_source::{Arm, WhittleTable};
use aoi_sched::penalty::{PenaltyCurve, ServiceSpec};
use aoi_sched::policy::{PolicyRegistry, SourceModel, System};
use aoi_sched::simulator::{replicate, write_trace, SimConfig};
use aoi_sched::single_source::{mdp_oracle_average_cost, SingleSource};
use aoi_sched::{Error, Result};

use crate::config::{
    GittinsConfig, Loaded, MetricsConfig, SimulateConfig, SourceConfig, SweepParameter,
    ThresholdConfig, WhittleConfig,
};

/// CSV body plus `key=value` notes echoed to stderr and appended as comments.
#[derive(Debug, Default)]
pub struct Output {
    pub body: String,
    pub notes: Vec<String>,
}

fn csv_text(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

fn model(loaded: &Loaded<impl Sized>, penalty: &Path, service: &ServiceSpec) -> Result<SingleSource> {
    let p = PenaltyCurve::from_csv(loaded.path(penalty))?;
    Ok(SingleSource::new(p, service.build()?))
}

pub fn metrics(cfg: &Loaded<MetricsConfig>) -> Result<Output> {
    let c = &cfg.config;
    let data = TimeSeriesDataset::from_csv(cfg.path(&c.data), c.window)?;
    let body = match &c.train {
        Some(train) => {
            let train = TimeSeriesDataset::from_csv(cfg.path(train), c.window)?;
            let curve = freshness_cross_curve(&data, &train, c.loss, c.theta_max)?;
            csv_text(|w| curve.write_csv(w))
        }
        None => {
            let d = freshness_decomposition(&data, c.loss, c.theta_max)?;
            csv_text(|w| d.write_csv(w))
        }
    };
    Ok(Output {
        body,
        notes: Vec::new(),
    })
}

pub fn gittins(cfg: &Loaded<GittinsConfig>) -> Result<Output> {
    let c = &cfg.config;
    let p = PenaltyCurve::from_csv(cfg.path(&c.penalty))?;
    let s = c.service.build()?;
    let table = match c.tau_max {
        Some(tau) => GittinsTable::with_horizon(&p, &s, tau).map_err(|e| match e {
            Error::HorizonTooShort { .. } => Error::Config(e.to_string()),
            e => e,
        })?,
        None => GittinsTable::new(&p, &s),
    };
    let last = c.delta_max.unwrap_or(p.delta_max() + s.max_value());
    let mut body = String::from("delta,gittins\n");
    for (d, g) in table.tabulate(0..=last) {
        writeln!(body, "{d},{g}").unwrap();
    }
    Ok(Output {
        body,
        notes: vec![format!("tau_max={}", table.tau_max())],
    })
}

pub fn threshold(cfg: &Loaded<ThresholdConfig>, oracle: bool) -> Result<Output> {
    let c = &cfg.config;
    let m = model(cfg, &c.penalty, &c.service)?;
    let sel = m.optimal_buffer_offset(c.buffer)?;
    let mut body = String::from("b,beta\n");
    for (b, beta) in sel.roots.iter().enumerate() {
        writeln!(body, "{b},{beta}").unwrap();
    }
    let mut notes = vec![format!("b_star={}", sel.offset), format!("beta_star={}", sel.beta)];
    if oracle {
        let truncate = c
            .delta_truncate
            .unwrap_or(4 * (m.penalty().delta_max() + m.service().max_value()));
        let rvi = mdp_oracle_average_cost(m.penalty(), m.service(), c.buffer, truncate)?;
        notes.push(format!("oracle_gain={}", rvi.gain));
        notes.push(format!("oracle_delta={:e}", (rvi.gain - sel.beta).abs()));
        notes.push(format!("oracle_sweeps={}", rvi.sweeps));
    }
    Ok(Output { body, notes })
}

pub fn whittle(cfg: &Loaded<WhittleConfig>) -> Result<Output> {
    let c = &cfg.config;
    let mut arms = Vec::new();
    let mut last = 0;
    for (l, src) in c.sources.iter().enumerate() {
        check_buffer(src)?;
        let m = Arc::new(model(cfg, &src.penalty, &src.service)?);
        last = last.max(m.penalty().delta_max() + m.service().max_value());
        for b in 0..src.buffer {
            arms.push(Arm::new(l, b, src.weight, m.clone())?);
        }
    }
    let table = WhittleTable::new(arms);
    let mut body = String::from("l,b,delta,whittle\n");
    for (l, b, d, w) in table.rows(c.delta_max.unwrap_or(last)) {
        writeln!(body, "{l},{b},{d},{w}").unwrap();
    }
    Ok(Output {
        body,
        notes: Vec::new(),
    })
}

fn check_buffer(src: &SourceConfig) -> Result<()> {
    if src.buffer == 0 {
        return Err(Error::Config("buffer must be at least 1".into()));
    }
    Ok(())
}

fn build_system(cfg: &Loaded<SimulateConfig>, sources: &[SourceConfig]) -> Result<System> {
    let models = sources
        .iter()
        .map(|src| {
            check_buffer(src)?;
            Ok(SourceModel {
                model: Arc::new(model(cfg, &src.penalty, &src.service)?),
                weight: src.weight,
                buffer: src.buffer,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    System::new(models)
}

/// The source list for every sweep point, labelled `parameter=value` (one unlabelled point without a sweep).
fn sweep_points(c: &SimulateConfig) -> Result<Vec<(String, Vec<SourceConfig>)>> {
    let Some(sweep) = &c.sweep else {
        return Ok(vec![(String::new(), c.sources.clone())]);
    };
    if sweep.source >= c.sources.len() {
        return Err(Error::Config(format!("sweep source {} does not exist", sweep.source)));
    }
    if sweep.values.is_empty() {
        return Err(Error::Config("sweep has no values".into()));
    }
    sweep
        .values
        .iter()
        .map(|&v| {
            let mut sources = c.sources.clone();
            let target = &mut sources[sweep.source];
            let label = match sweep.parameter {
                SweepParameter::Weight => {
                    target.weight = v;
                    format!("weight={v}")
                }
                SweepParameter::Sigma => {
                    let ServiceSpec::Lognormal { sigma, .. } = &mut target.service else {
                        return Err(Error::Config("a sigma sweep needs a lognormal service".into()));
                    };
                    *sigma = v;
                    format!("sigma={v}")
                }
            };
            Ok((label, sources))
        })
        .collect()
}

pub fn simulate(cfg: &Loaded<SimulateConfig>, trace: Option<&Path>) -> Result<Output> {
    let c = &cfg.config;
    if c.policies.is_empty() {
        return Err(Error::Config("no policies to simulate".into()));
    }
    let registry = PolicyRegistry::with_defaults();
    let mut body = String::from("policy,source,metric,value,stderr\n");
    let mut trace_rows = None;
    for (label, sources) in sweep_points(c)? {
        let system = build_system(cfg, &sources)?;
        let mut sim = SimConfig {
            horizon: 0,
            warmup: c.warmup,
            seed: c.seed,
            replications: c.replications,
            initial_aoi: c.initial_aoi,
            trace_limit: if trace.is_some() && trace_rows.is_none() { c.trace_limit } else { 0 },
        };
        sim.horizon = sim.resolved_warmup(&system) + c.horizon;
        for spec in &c.policies {
            let policy = registry.build(&system, spec)?;
            let agg = replicate(&system, policy.as_ref(), &sim)?;
            let name = if label.is_empty() {
                spec.name.clone()
            } else {
                format!("{}@{label}", spec.name)
            };
            let e = agg.average_error;
            writeln!(body, "{name},all,average_error,{},{}", e.mean, e.stderr).unwrap();
            for (l, (p, a)) in agg.per_source.iter().zip(&agg.mean_aoi).enumerate() {
                writeln!(body, "{name},{l},penalty,{},{}", p.mean, p.stderr).unwrap();
                writeln!(body, "{name},{l},mean_aoi,{},{}", a.mean, a.stderr).unwrap();
            }
            if sim.trace_limit > 0 && trace_rows.is_none() {
                trace_rows = Some(agg.runs[0].trace.clone());
                sim.trace_limit = 0;
            }
        }
    }
    if let (Some(path), Some(rows)) = (trace, trace_rows) {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        write_trace(&rows, std::io::BufWriter::new(file)).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(Output {
        body,
        notes: Vec::new(),
    })
}
