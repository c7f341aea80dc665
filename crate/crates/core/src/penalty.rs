//! AoI penalty curves and feature transmission-time distributions.
//!
//! A [`PenaltyCurve`] tabulates the expected inference error `p(δ)` for
//! `δ = 0..=δ_max` and holds the last value for every larger AoI, so the
//! bound `|p(δ)| ≤ M` extends to the whole half-line. A
//! [`ServiceTimeDistribution`] is a finite pmf over transmission times
//! `T ≥ 1` slots.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info_metrics::FreshnessCurve;
use crate::numeric::{compensated_sum, normal_cdf, normal_sf};

/// Mass a truncated service distribution may discard before it is rejected.
pub const MAX_TRUNCATION_MASS: f64 = 1e-6;

const MASS_TOLERANCE: f64 = 1e-9;

/// Tabulated AoI penalty with hold-last extension beyond `δ_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyCurve {
    values: Vec<f64>,
    bound: f64,
}

impl PenaltyCurve {
    /// Builds a curve with `M = max |p(δ)|`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let bound = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        Self::with_bound(values, bound)
    }

    pub fn with_bound(values: Vec<f64>, bound: f64) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidPenalty(format!(
                "need delta_max >= 1, got {} value(s)",
                values.len()
            )));
        }
        if let Some((d, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidPenalty(format!("p({d}) = {v} is not finite")));
        }
        if !bound.is_finite() {
            return Err(Error::InvalidPenalty(format!("bound {bound} is not finite")));
        }
        if let Some((d, v)) = values.iter().enumerate().find(|(_, v)| v.abs() > bound) {
            return Err(Error::InvalidPenalty(format!(
                "|p({d})| = {} exceeds bound {bound}",
                v.abs()
            )));
        }
        Ok(Self { values, bound })
    }

    /// Builds a curve by evaluating `f` on `0..=delta_max`.
    pub fn from_fn(delta_max: usize, f: impl Fn(usize) -> f64) -> Result<Self> {
        Self::new((0..=delta_max).map(f).collect())
    }

    /// `p(δ)`, holding the last tabulated value for `δ > δ_max`.
    #[inline]
    pub fn at(&self, delta: usize) -> f64 {
        self.values[delta.min(self.values.len() - 1)]
    }

    pub fn delta_max(&self) -> usize {
        self.values.len() - 1
    }

    /// The bound `M` with `|p(δ)| ≤ M` for all δ.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value held for every `δ ≥ δ_max`.
    pub fn plateau(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_bound(
            self.values.iter().map(|v| v * factor).collect(),
            self.bound * factor.abs(),
        )
    }

    pub fn shifted(&self, offset: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v + offset).collect())
    }

    /// Loads a `delta,penalty` CSV with contiguous δ starting at 0.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(file, path)
    }

    pub fn from_csv_reader(reader: impl Read, origin: impl AsRef<Path>) -> Result<Self> {
        let origin = origin.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::format(origin, 1, e.to_string()))?
            .clone();
        if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
            return Err(Error::format(origin, 1, "empty file"));
        }
        if headers.len() != 2 || &headers[0] != "delta" || &headers[1] != "penalty" {
            return Err(Error::format(
                origin,
                1,
                format!("expected header `delta,penalty`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut values = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::format(origin, line, e.to_string())
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let delta: usize = record[0]
                .parse()
                .map_err(|_| Error::format(origin, line, format!("delta `{}` is not a non-negative integer", &record[0])))?;
            let penalty: f64 = record[1]
                .parse()
                .map_err(|_| Error::format(origin, line, format!("penalty `{}` is not numeric", &record[1])))?;
            if delta != values.len() {
                return Err(Error::format(
                    origin,
                    line,
                    format!("expected delta = {}, found {delta}", values.len()),
                ));
            }
            values.push(penalty);
        }
        if values.is_empty() {
            return Err(Error::format(origin, 1, "no penalty rows"));
        }
        Self::new(values).map_err(|e| Error::format(origin, 0, e.to_string()))
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "delta,penalty")?;
        for (d, v) in self.values.iter().enumerate() {
            writeln!(out, "{d},{v}")?;
        }
        Ok(())
    }

    /// Uses an inference-error curve directly as the penalty, `p(δ) := curve(δ)`.
    pub fn from_inference_curve(curve: &FreshnessCurve) -> Result<Self> {
        let mut values = curve.values().to_vec();
        if values.len() == 1 {
            values.push(values[0]);
        }
        Self::new(values)
    }
}

/// Finite pmf of feature transmission times (slots, each ≥ 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceTimeDistribution {
    pmf: Vec<(usize, f64)>,
    cumulative: Vec<f64>,
    mean: f64,
}

impl ServiceTimeDistribution {
    /// Validates and normalizes-by-sort a pmf. Zero-probability entries are dropped.
    pub fn new(pmf: Vec<(usize, f64)>) -> Result<Self> {
        let mut pmf: Vec<(usize, f64)> = pmf;
        if let Some(&(v, p)) = pmf.iter().find(|(_, p)| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidService(format!("P(T = {v}) = {p} is not a probability")));
        }
        pmf.retain(|&(_, p)| p > 0.0);
        if pmf.is_empty() {
            return Err(Error::InvalidService("empty support".into()));
        }
        pmf.sort_by_key(|&(v, _)| v);
        if pmf.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidService("duplicate support value".into()));
        }
        if pmf[0].0 < 1 {
            return Err(Error::InvalidService("transmission times must be >= 1 slot".into()));
        }
        let total = compensated_sum(pmf.iter().map(|&(_, p)| p));
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidService(format!("probabilities sum to {total}")));
        }
        let mean = compensated_sum(pmf.iter().map(|&(v, p)| v as f64 * p));
        let mut acc = 0.0;
        let cumulative = pmf
            .iter()
            .map(|&(_, p)| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            pmf,
            cumulative,
            mean,
        })
    }

    /// Point mass at `t`.
    pub fn constant(t: usize) -> Result<Self> {
        if t < 1 {
            return Err(Error::InvalidService(format!("constant transmission time {t} < 1")));
        }
        Self::new(vec![(t, 1.0)])
    }

    /// `P(T = k) ∝ q (1 − q)^{k−1}` on `1..=t_max`, renormalized.
    pub fn geometric(q: f64, t_max: usize) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidService(format!("geometric parameter q = {q} not in (0, 1]")));
        }
        if t_max < 1 {
            return Err(Error::InvalidService("t_max must be >= 1".into()));
        }
        let raw: Vec<f64> = (1..=t_max).map(|k| q * (1.0 - q).powi(k as i32 - 1)).collect();
        let total = compensated_sum(raw.iter().copied());
        Self::new(
            raw.into_iter()
                .enumerate()
                .map(|(i, p)| (i + 1, p / total))
                .collect(),
        )
    }

    /// Discretized log-normal `T = ⌈α e^{σZ} / E[e^{σZ}]⌉`, truncated at `t_max`.
    ///
    /// Cell masses come from normal-CDF differences; the mass beyond `t_max`
    /// must stay below [`MAX_TRUNCATION_MASS`].
    pub fn lognormal(alpha: f64, sigma: f64, t_max: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidService(format!("alpha = {alpha} must be > 0")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidService(format!("sigma = {sigma} must be >= 0")));
        }
        let smallest = alpha.ceil() as usize;
        if t_max < smallest {
            return Err(Error::InvalidService(format!(
                "t_max = {t_max} is below ceil(alpha) = {smallest}"
            )));
        }
        if sigma == 0.0 {
            return Self::constant(smallest.max(1));
        }
        // T <= k  <=>  Z <= (ln(k / alpha) + sigma^2 / 2) / sigma
        let z = |k: usize| -> f64 {
            if k == 0 {
                f64::NEG_INFINITY
            } else {
                ((k as f64 / alpha).ln() + 0.5 * sigma * sigma) / sigma
            }
        };
        let tail = normal_sf(z(t_max));
        if tail >= MAX_TRUNCATION_MASS {
            return Err(Error::ExcessiveTruncation { mass: tail, t_max });
        }
        let kept = 1.0 - tail;
        let pmf = (1..=t_max)
            .map(|k| {
                let (lo, hi) = (z(k - 1), z(k));
                let mass = if lo > 0.0 {
                    normal_sf(lo) - normal_sf(hi)
                } else {
                    normal_cdf(hi) - normal_cdf(lo)
                };
                (k, mass / kept)
            })
            .collect();
        Self::new(pmf)
    }

    /// Smallest truncation point keeping the discarded log-normal mass below the limit.
    pub fn lognormal_auto(alpha: f64, sigma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidService(format!(
                "lognormal parameters alpha = {alpha}, sigma = {sigma}"
            )));
        }
        let mut t_max = (alpha.ceil() as usize).max(1);
        if sigma > 0.0 {
            while normal_sf(((t_max as f64 / alpha).ln() + 0.5 * sigma * sigma) / sigma)
                >= MAX_TRUNCATION_MASS
            {
                t_max += 1;
            }
        }
        Self::lognormal(alpha, sigma, t_max)
    }

    pub fn pmf(&self) -> &[(usize, f64)] {
        &self.pmf
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn min_value(&self) -> usize {
        self.pmf[0].0
    }

    pub fn max_value(&self) -> usize {
        self.pmf[self.pmf.len() - 1].0
    }

    pub fn is_deterministic(&self) -> bool {
        self.pmf.len() == 1
    }

    /// Draws one transmission time by inverse-CDF lookup.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.pmf.len() == 1 {
            return self.pmf[0].0;
        }
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.pmf[idx.min(self.pmf.len() - 1)].0
    }
}

/// Service-distribution description as it appears in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceSpec {
    Constant {
        t: usize,
    },
    Geometric {
        q: f64,
        t_max: usize,
    },
    Lognormal {
        alpha: f64,
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_max: Option<usize>,
    },
    Table {
        pmf: Vec<(usize, f64)>,
    },
}

impl ServiceSpec {
    pub fn build(&self) -> Result<ServiceTimeDistribution> {
        match self {
            ServiceSpec::Constant { t } => ServiceTimeDistribution::constant(*t),
            ServiceSpec::Geometric { q, t_max } => ServiceTimeDistribution::geometric(*q, *t_max),
            ServiceSpec::Lognormal {
                alpha,
                sigma,
                t_max: Some(t_max),
            } => ServiceTimeDistribution::lognormal(*alpha, *sigma, *t_max),
            ServiceSpec::Lognormal {
                alpha,
                sigma,
                t_max: None,
            } => ServiceTimeDistribution::lognormal_auto(*alpha, *sigma),
            ServiceSpec::Table { pmf } => ServiceTimeDistribution::new(pmf.clone()),
        }
    }
}
