use std::io::{Read, Write};
use std::path::Path;

use super::distribution::{Alphabet, JointDistribution, Symbol, TripleJoint};
use super::loss::LossFunction;
use super::measures::{
    epsilon_markov_coefficient, l_conditional_cross_entropy, l_conditional_entropy,
    l_conditional_mutual_information,
};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Labelled time series `(y_t, v_t)` with feature window length `u`.
///
/// The feature observed at lag `θ` for slot `t` is the window
/// `X_{t−θ} = (V_{t−θ}, …, V_{t−θ−u+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    labels: Vec<Symbol>,
    features: Vec<Vec<Symbol>>,
    window: usize,
}

impl TimeSeriesDataset {
    pub fn new(labels: Vec<Symbol>, features: Vec<Vec<Symbol>>, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("feature window must be at least 1".into()));
        }
        if labels.len() != features.len() {
            return Err(Error::Config(format!(
                "{} labels but {} feature rows",
                labels.len(),
                features.len()
            )));
        }
        if let Some(first) = features.first() {
            if first.is_empty() || features.iter().any(|f| f.len() != first.len()) {
                return Err(Error::Config("feature rows must have one common, non-zero width".into()));
            }
        }
        Ok(Self {
            labels,
            features,
            window,
        })
    }

    pub fn from_csv(path: impl AsRef<Path>, window: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_csv_reader(file, path, window)
    }

    /// Reads `t,y,v1[,v2,…]` with consecutive integer slots.
    pub fn from_csv_reader(reader: impl Read, origin: impl AsRef<Path>, window: usize) -> Result<Self> {
        let origin = origin.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::format(origin, 1, e.to_string()))?
            .clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 3 || cols[0] != "t" || cols[1] != "y" {
            return Err(Error::format(origin, 1, "expected header `t,y,v1[,v2,...]`"));
        }
        for (i, c) in cols[2..].iter().enumerate() {
            if *c != format!("v{}", i + 1) {
                return Err(Error::format(origin, 1, format!("unexpected column `{c}`")));
            }
        }
        let mut labels = Vec::new();
        let mut features = Vec::new();
        let mut previous: Option<i64> = None;
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                Error::format(origin, line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let t: i64 = record[0]
                .parse()
                .map_err(|_| Error::format(origin, line, format!("slot `{}` is not an integer", &record[0])))?;
            if let Some(prev) = previous {
                if t != prev + 1 {
                    return Err(Error::format(origin, line, format!("slot {t} does not follow {prev}")));
                }
            }
            previous = Some(t);
            labels.push(Symbol::parse(&record[1]));
            features.push(record.iter().skip(2).map(Symbol::parse).collect());
        }
        if labels.is_empty() {
            return Err(Error::format(origin, 1, "no data rows"));
        }
        Self::new(labels, features, window)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn labels(&self) -> &[Symbol] {
        &self.labels
    }

    /// `X_{t−θ}`; a bare symbol when the window holds a single scalar.
    pub fn feature_window(&self, t: usize, theta: usize) -> Symbol {
        let end = t - theta;
        let mut items = Vec::with_capacity(self.window * self.features[end].len());
        for s in 0..self.window {
            items.extend(self.features[end - s].iter().cloned());
        }
        if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Symbol::Tuple(items)
        }
    }

    /// Slots `t ∈ [max_lag + u − 1, len − 1]`, or insufficient data for `theta`.
    fn slots(&self, max_lag: usize, theta: usize) -> Result<std::ops::Range<usize>> {
        let first = max_lag + self.window - 1;
        if first >= self.len() {
            return Err(Error::InsufficientData { theta });
        }
        Ok(first..self.len())
    }

    fn label_alphabet(&self) -> Alphabet {
        Alphabet::from_observed(self.labels.iter().cloned()).expect("dataset is non-empty")
    }

    fn pair_samples(&self, theta: usize, max_lag: usize) -> Result<Vec<(Symbol, Symbol)>> {
        Ok(self
            .slots(max_lag, theta)?
            .map(|t| (self.labels[t].clone(), self.feature_window(t, theta)))
            .collect())
    }
}

fn joint_from_pairs(
    pairs: &[(Symbol, Symbol)],
    labels: &Alphabet,
    features: &Alphabet,
) -> Result<JointDistribution> {
    JointDistribution::from_samples(
        labels.clone(),
        features.clone(),
        pairs.iter().map(|(y, x)| {
            (
                labels.index_of(y).expect("label in alphabet"),
                features.index_of(x).expect("feature in alphabet"),
            )
        }),
    )
}

/// Stationary finite Markov chain `V_t` with label `Y_t = V_{t−d}` and window `u = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
    delay: usize,
}

impl ChainModel {
    /// Builds the model and solves for the stationary law of an irreducible chain.
    pub fn new(transition: Vec<Vec<f64>>, delay: usize) -> Result<Self> {
        let n = transition.len();
        if n == 0 || transition.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidDistribution("transition matrix must be square".into()));
        }
        for (i, row) in transition.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDistribution(format!("row {i} is not a pmf")));
            }
        }
        let stationary = stationary_law(&transition)?;
        Ok(Self {
            transition,
            stationary,
            delay,
        })
    }

    /// Two-state chain that flips with probability `flip` each slot.
    pub fn symmetric_binary(flip: f64, delay: usize) -> Result<Self> {
        Self::new(vec![vec![1.0 - flip, flip], vec![flip, 1.0 - flip]], delay)
    }

    /// I.i.d. states drawn from `pmf`.
    pub fn iid(pmf: &[f64], delay: usize) -> Result<Self> {
        Self::new(vec![pmf.to_vec(); pmf.len()], delay)
    }

    pub fn states(&self) -> usize {
        self.transition.len()
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    fn matrix_power(&self, k: usize) -> Vec<Vec<f64>> {
        let n = self.states();
        let mut out: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        for _ in 0..k {
            out = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).map(|m| out[i][m] * self.transition[m][j]).sum())
                        .collect()
                })
                .collect();
        }
        out
    }

    /// Joint pmf of `(V_{−l_1}, …, V_{−l_m})`, first variable most significant.
    pub fn joint_at_lags(&self, lags: &[usize]) -> Vec<f64> {
        let n = self.states();
        let m = lags.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(lags[i]));
        let steps: Vec<Vec<Vec<f64>>> = order
            .windows(2)
            .map(|w| self.matrix_power(lags[w[0]] - lags[w[1]]))
            .collect();
        let total = n.pow(m as u32);
        (0..total)
            .map(|code| {
                let mut states = vec![0usize; m];
                let mut c = code;
                for i in (0..m).rev() {
                    states[i] = c % n;
                    c /= n;
                }
                let mut prob = self.stationary[states[order[0]]];
                for (k, w) in order.windows(2).enumerate() {
                    prob *= steps[k][states[w[0]]][states[w[1]]];
                }
                prob
            })
            .collect()
    }
}

/// Solves `πP = π`, `Σπ = 1` by Gaussian elimination with partial pivoting.
fn stationary_law(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = p.len();
    // rows: (P^T − I) with the last equation replaced by normalisation
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| p[j][i] - if i == j { 1.0 } else { 0.0 }).collect();
            row.push(0.0);
            row
        })
        .collect();
    a[n - 1] = vec![1.0; n + 1];
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::InvalidDistribution(
                "chain has no unique stationary distribution".into(),
            ));
        }
        a.swap(col, pivot);
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                if f != 0.0 {
                    for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * p;
                    }
                }
            }
        }
    }
    let pi: Vec<f64> = (0..n).map(|i| (a[i][n] / a[i][i]).max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|v| v / s).collect())
}

/// A source of aligned `(Y_0, X_{−θ})` joints.
///
/// `max_lag` fixes the sample window for empirical data so that every joint
/// requested with the same `max_lag` is computed from the same slots; analytic
/// models ignore it.
pub trait LaggedSource {
    fn pair_joint(&self, theta: usize, max_lag: usize) -> Result<JointDistribution>;

    /// Joint of `(Y_0, X_{−k}, X_{−k−1})`.
    fn triple_joint(&self, k: usize, max_lag: usize) -> Result<TripleJoint>;
}

impl LaggedSource for TimeSeriesDataset {
    fn pair_joint(&self, theta: usize, max_lag: usize) -> Result<JointDistribution> {
        let pairs = self.pair_samples(theta, max_lag)?;
        let features = Alphabet::from_observed(pairs.iter().map(|(_, x)| x.clone()))?;
        joint_from_pairs(&pairs, &self.label_alphabet(), &features)
    }

    fn triple_joint(&self, k: usize, max_lag: usize) -> Result<TripleJoint> {
        let slots = self.slots(max_lag.max(k + 1), k + 1)?;
        let rows: Vec<(Symbol, Symbol, Symbol)> = slots
            .map(|t| {
                (
                    self.labels[t].clone(),
                    self.feature_window(t, k),
                    self.feature_window(t, k + 1),
                )
            })
            .collect();
        let ya = self.label_alphabet();
        let xa = Alphabet::from_observed(rows.iter().map(|r| r.1.clone()))?;
        let za = Alphabet::from_observed(rows.iter().map(|r| r.2.clone()))?;
        TripleJoint::from_samples(
            ya.clone(),
            xa.clone(),
            za.clone(),
            rows.iter().map(|(y, x, z)| {
                (
                    ya.index_of(y).unwrap(),
                    xa.index_of(x).unwrap(),
                    za.index_of(z).unwrap(),
                )
            }),
        )
    }
}

impl LaggedSource for ChainModel {
    fn pair_joint(&self, theta: usize, _max_lag: usize) -> Result<JointDistribution> {
        let n = self.states();
        JointDistribution::new(
            Alphabet::integers(n),
            Alphabet::integers(n),
            self.joint_at_lags(&[self.delay, theta]),
        )
    }

    fn triple_joint(&self, k: usize, _max_lag: usize) -> Result<TripleJoint> {
        let n = self.states();
        TripleJoint::new(
            Alphabet::integers(n),
            Alphabet::integers(n),
            Alphabet::integers(n),
            self.joint_at_lags(&[self.delay, k, k + 1]),
        )
    }
}

/// Inference error as a function of the AoI `θ = 0..=θ_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreshnessCurve {
    values: Vec<f64>,
    loss: Option<LossFunction>,
}

impl FreshnessCurve {
    pub fn from_values(values: Vec<f64>, loss: Option<LossFunction>) -> Self {
        Self { values, loss }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn loss(&self) -> Option<LossFunction> {
        self.loss
    }

    pub fn theta_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn at(&self, theta: usize) -> f64 {
        self.values[theta]
    }

    /// `Σ_θ P_Θ(θ) · curve(θ)` for a random AoI with pmf `(θ, P(θ))`.
    pub fn average(&self, pmf: &[(usize, f64)]) -> Result<f64> {
        let mut acc = CompensatedSum::new();
        for &(theta, p) in pmf {
            if p == 0.0 {
                continue;
            }
            if theta > self.theta_max() {
                return Err(Error::SupportExceedsHorizon {
                    theta_max: self.theta_max(),
                });
            }
            acc.add(p * self.values[theta]);
        }
        Ok(acc.value())
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "theta,value")?;
        for (t, v) in self.values.iter().enumerate() {
            writeln!(out, "{t},{v}")?;
        }
        Ok(())
    }
}

/// `H_L(Y_0 | X_{−θ})` with a per-θ sample window for empirical data.
pub fn freshness_curve(
    source: &dyn LaggedSource,
    loss: LossFunction,
    theta_max: usize,
) -> Result<FreshnessCurve> {
    let values = (0..=theta_max)
        .map(|theta| l_conditional_entropy(&source.pair_joint(theta, theta)?, loss))
        .collect::<Result<Vec<_>>>()?;
    Ok(FreshnessCurve::from_values(values, Some(loss)))
}

/// Cross-entropy curve of predictors fitted on `train` and evaluated on `infer`.
pub fn freshness_cross_curve(
    infer: &TimeSeriesDataset,
    train: &TimeSeriesDataset,
    loss: LossFunction,
    theta_max: usize,
) -> Result<FreshnessCurve> {
    let labels = infer.label_alphabet().union(&train.label_alphabet());
    let mut values = Vec::with_capacity(theta_max + 1);
    for theta in 0..=theta_max {
        let ip = infer.pair_samples(theta, theta)?;
        let tp = train.pair_samples(theta, theta)?;
        let features = Alphabet::from_observed(ip.iter().chain(&tp).map(|(_, x)| x.clone()))?;
        let ij = joint_from_pairs(&ip, &labels, &features)?;
        let tj = joint_from_pairs(&tp, &labels, &features)?;
        values.push(l_conditional_cross_entropy(&ij, &tj, loss)?);
    }
    Ok(FreshnessCurve::from_values(values, Some(loss)))
}

/// The two monotone parts of the freshness curve, `direct = g1 − g2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub direct: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    /// ε-Markov coefficient of `X_{−θ−1} → X_{−θ} → Y_0`.
    pub epsilon: Vec<f64>,
}

impl Decomposition {
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "theta,value,g1,g2,epsilon")?;
        for t in 0..self.direct.len() {
            writeln!(
                out,
                "{t},{},{},{},{}",
                self.direct[t], self.g1[t], self.g2[t], self.epsilon[t]
            )?;
        }
        Ok(())
    }
}

/// `g1(θ) = H(Y_0|X_0) + Σ_{k<θ} I(Y_0; X_{−k} | X_{−k−1})`,
/// `g2(θ) = Σ_{k<θ} I(Y_0; X_{−k−1} | X_{−k})`.
///
/// For empirical data every term uses the common window of lag `θ_max + 1`,
/// so the telescoping identity `g1 − g2 = direct` holds exactly.
pub fn freshness_decomposition(
    source: &dyn LaggedSource,
    loss: LossFunction,
    theta_max: usize,
) -> Result<Decomposition> {
    let max_lag = theta_max + 1;
    let direct = (0..=theta_max)
        .map(|theta| l_conditional_entropy(&source.pair_joint(theta, max_lag)?, loss))
        .collect::<Result<Vec<_>>>()?;
    let mut g1 = vec![direct[0]];
    let mut g2 = vec![0.0];
    let mut epsilon = Vec::with_capacity(theta_max + 1);
    for k in 0..=theta_max {
        let triple = source.triple_joint(k, max_lag)?;
        epsilon.push(epsilon_markov_coefficient(&triple));
        if k < theta_max {
            let forward = l_conditional_mutual_information(&triple, loss)?;
            let backward = l_conditional_mutual_information(&triple.swap_xz(), loss)?;
            g1.push(g1[k] + forward);
            g2.push(g2[k] + backward);
        }
    }
    Ok(Decomposition {
        direct,
        g1,
        g2,
        epsilon,
    })
}

/// Averages of a curve under two AoI laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderReport {
    pub h1: f64,
    pub h2: f64,
    /// `h1 ≤ h2` up to tolerance; a diagnostic, not a guarantee.
    pub ordered: bool,
}

/// Checks `Θ1 ≤_st Θ2` and reports the averaged curve under each.
pub fn stochastic_order_check(
    curve: &FreshnessCurve,
    theta1: &[(usize, f64)],
    theta2: &[(usize, f64)],
) -> Result<OrderReport> {
    let top = theta1.iter().chain(theta2).map(|&(t, _)| t).max().unwrap_or(0);
    let cdf = |pmf: &[(usize, f64)]| {
        let mut c = vec![0.0; top + 1];
        for &(t, p) in pmf {
            c[t] += p;
        }
        let mut acc = 0.0;
        c.iter_mut().for_each(|v| {
            acc += *v;
            *v = acc;
        });
        c
    };
    let (c1, c2) = (cdf(theta1), cdf(theta2));
    if let Some(t) = (0..=top).find(|&t| c1[t] < c2[t] - 1e-12) {
        return Err(Error::NotStochasticallyOrdered(format!(
            "P(Θ1 ≤ {t}) = {} < P(Θ2 ≤ {t}) = {}",
            c1[t], c2[t]
        )));
    }
    let h1 = curve.average(theta1)?;
    let h2 = curve.average(theta2)?;
    Ok(OrderReport {
        h1,
        h2,
        ordered: h1 <= h2 + 1e-12,
    })
}
