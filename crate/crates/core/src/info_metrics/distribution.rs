use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::numeric::compensated_sum;

const MASS_TOLERANCE: f64 = 1e-9;

/// A discrete symbol: label value, feature component, or a window of them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Int(i64),
    Text(String),
    Tuple(Vec<Symbol>),
}

impl Symbol {
    /// Integers become [`Symbol::Int`], anything else is kept verbatim as text.
    pub fn parse(raw: &str) -> Self {
        let trimmed = raw.trim();
        match trimmed.parse::<i64>() {
            Ok(v) => Symbol::Int(v),
            Err(_) => Symbol::Text(trimmed.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Symbol::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

impl From<i64> for Symbol {
    fn from(v: i64) -> Self {
        Symbol::Int(v)
    }
}

impl From<&str> for Symbol {
    fn from(v: &str) -> Self {
        Symbol::Text(v.to_string())
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Int(v) => write!(f, "{v}"),
            Symbol::Text(s) => write!(f, "{s}"),
            Symbol::Tuple(items) => {
                write!(f, "(")?;
                for (i, s) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, "|")?;
                    }
                    write!(f, "{s}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Ordered set of distinct symbols with an index bijection.
#[derive(Debug, Clone)]
pub struct Alphabet {
    symbols: Vec<Symbol>,
    index: HashMap<Symbol, usize>,
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        self.symbols == other.symbols
    }
}

impl Alphabet {
    pub fn new(symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidAlphabet("alphabet is empty".into()));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i).is_some() {
                return Err(Error::InvalidAlphabet(format!("duplicate symbol {s}")));
            }
        }
        Ok(Self { symbols, index })
    }

    /// `{0, 1, …, n−1}` as integer symbols.
    pub fn integers(n: usize) -> Self {
        Self::new((0..n as i64).map(Symbol::Int).collect()).expect("n must be positive")
    }

    /// Sorted distinct symbols of an iterator.
    pub fn from_observed<I: IntoIterator<Item = Symbol>>(symbols: I) -> Result<Self> {
        let mut v: Vec<Symbol> = symbols.into_iter().collect();
        v.sort();
        v.dedup();
        Self::new(v)
    }

    /// Pairs `(a, b)` in `self`-major order.
    pub fn product(&self, other: &Alphabet) -> Self {
        let symbols = self
            .symbols
            .iter()
            .flat_map(|a| {
                other
                    .symbols
                    .iter()
                    .map(move |b| Symbol::Tuple(vec![a.clone(), b.clone()]))
            })
            .collect();
        Self::new(symbols).expect("product of distinct symbols is distinct")
    }

    pub fn union(&self, other: &Alphabet) -> Self {
        Self::from_observed(self.symbols.iter().chain(&other.symbols).cloned())
            .expect("union of non-empty alphabets")
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, i: usize) -> &Symbol {
        &self.symbols[i]
    }

    pub fn index_of(&self, s: &Symbol) -> Option<usize> {
        self.index.get(s).copied()
    }

    /// Numeric values of integer symbols; `None` if any symbol is not an integer.
    pub fn numeric_values(&self) -> Option<Vec<f64>> {
        self.symbols.iter().map(Symbol::as_f64).collect()
    }
}

fn check_masses(mass: &[f64], what: &str) -> Result<()> {
    if let Some(m) = mass.iter().find(|m| !m.is_finite() || **m < 0.0) {
        return Err(Error::InvalidDistribution(format!("{what}: mass {m} is not a probability")));
    }
    let total = compensated_sum(mass.iter().copied());
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("{what}: masses sum to {total}")));
    }
    Ok(())
}

/// Probability mass function on an [`Alphabet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    alphabet: Alphabet,
    mass: Vec<f64>,
}

impl Distribution {
    pub fn new(alphabet: Alphabet, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != alphabet.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} masses for {} symbols",
                mass.len(),
                alphabet.len()
            )));
        }
        check_masses(&mass, "distribution")?;
        Ok(Self { alphabet, mass })
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let n = alphabet.len();
        Self {
            mass: vec![1.0 / n as f64; n],
            alphabet,
        }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.mass[i]
    }
}

/// Joint pmf of a label `Y` and a feature `X`, stored label-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    labels: Alphabet,
    features: Alphabet,
    mass: Vec<f64>,
}

impl JointDistribution {
    /// `mass[y * |X| + x] = P(Y = y, X = x)`.
    pub fn new(labels: Alphabet, features: Alphabet, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != labels.len() * features.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} masses for a {}x{} table",
                mass.len(),
                labels.len(),
                features.len()
            )));
        }
        check_masses(&mass, "joint")?;
        Ok(Self {
            labels,
            features,
            mass,
        })
    }

    pub fn from_fn(
        labels: Alphabet,
        features: Alphabet,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self> {
        let nx = features.len();
        let mass = (0..labels.len() * nx).map(|i| f(i / nx, i % nx)).collect();
        Self::new(labels, features, mass)
    }

    /// Empirical joint of index pairs `(y, x)`, each with equal weight.
    pub fn from_samples(
        labels: Alphabet,
        features: Alphabet,
        samples: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let nx = features.len();
        let mut counts = vec![0u64; labels.len() * nx];
        let mut n = 0u64;
        for (y, x) in samples {
            counts[y * nx + x] += 1;
            n += 1;
        }
        if n == 0 {
            return Err(Error::InvalidDistribution("no samples".into()));
        }
        let mass = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Self::new(labels, features, mass)
    }

    pub fn labels(&self) -> &Alphabet {
        &self.labels
    }

    pub fn features(&self) -> &Alphabet {
        &self.features
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    #[inline]
    pub fn prob(&self, y: usize, x: usize) -> f64 {
        self.mass[y * self.features.len() + x]
    }

    pub fn label_marginal(&self) -> Distribution {
        let nx = self.features.len();
        let mass = (0..self.labels.len())
            .map(|y| compensated_sum((0..nx).map(|x| self.prob(y, x))))
            .collect();
        Distribution {
            alphabet: self.labels.clone(),
            mass,
        }
    }

    pub fn feature_marginal(&self) -> Distribution {
        let ny = self.labels.len();
        let mass = (0..self.features.len())
            .map(|x| compensated_sum((0..ny).map(|y| self.prob(y, x))))
            .collect();
        Distribution {
            alphabet: self.features.clone(),
            mass,
        }
    }

    /// `(P_X(x), P_{Y|X=x})`; the conditional is `None` when `P_X(x) = 0`.
    pub fn conditional(&self, x: usize) -> (f64, Option<Vec<f64>>) {
        let column: Vec<f64> = (0..self.labels.len()).map(|y| self.prob(y, x)).collect();
        let px = compensated_sum(column.iter().copied());
        if px <= 0.0 {
            return (0.0, None);
        }
        (px, Some(column.into_iter().map(|m| m / px).collect()))
    }

    /// The same table with the roles of label and feature exchanged.
    pub fn transpose(&self) -> Self {
        let (ny, nx) = (self.labels.len(), self.features.len());
        let mut mass = vec![0.0; ny * nx];
        for y in 0..ny {
            for x in 0..nx {
                mass[x * ny + y] = self.prob(y, x);
            }
        }
        Self {
            labels: self.features.clone(),
            features: self.labels.clone(),
            mass,
        }
    }
}

/// Joint pmf of `(Y, X, Z)`, stored `Y`-major then `X` then `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleJoint {
    y: Alphabet,
    x: Alphabet,
    z: Alphabet,
    mass: Vec<f64>,
}

impl TripleJoint {
    pub fn new(y: Alphabet, x: Alphabet, z: Alphabet, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != y.len() * x.len() * z.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} masses for a {}x{}x{} table",
                mass.len(),
                y.len(),
                x.len(),
                z.len()
            )));
        }
        check_masses(&mass, "triple joint")?;
        Ok(Self { y, x, z, mass })
    }

    pub fn from_fn(
        y: Alphabet,
        x: Alphabet,
        z: Alphabet,
        f: impl Fn(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let (nx, nz) = (x.len(), z.len());
        let mass = (0..y.len() * nx * nz)
            .map(|i| f(i / (nx * nz), (i / nz) % nx, i % nz))
            .collect();
        Self::new(y, x, z, mass)
    }

    pub fn from_samples(
        y: Alphabet,
        x: Alphabet,
        z: Alphabet,
        samples: impl IntoIterator<Item = (usize, usize, usize)>,
    ) -> Result<Self> {
        let (nx, nz) = (x.len(), z.len());
        let mut counts = vec![0u64; y.len() * nx * nz];
        let mut n = 0u64;
        for (a, b, c) in samples {
            counts[(a * nx + b) * nz + c] += 1;
            n += 1;
        }
        if n == 0 {
            return Err(Error::InvalidDistribution("no samples".into()));
        }
        let mass = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Self::new(y, x, z, mass)
    }

    pub fn alphabets(&self) -> (&Alphabet, &Alphabet, &Alphabet) {
        (&self.y, &self.x, &self.z)
    }

    #[inline]
    pub fn prob(&self, y: usize, x: usize, z: usize) -> f64 {
        self.mass[(y * self.x.len() + x) * self.z.len() + z]
    }

    /// Joint of `(Y, X)`.
    pub fn yx(&self) -> JointDistribution {
        let (ny, nx, nz) = (self.y.len(), self.x.len(), self.z.len());
        let mass = (0..ny * nx)
            .map(|i| compensated_sum((0..nz).map(|z| self.prob(i / nx, i % nx, z))))
            .collect();
        JointDistribution {
            labels: self.y.clone(),
            features: self.x.clone(),
            mass,
        }
    }

    /// Joint of `(Y, Z)`.
    pub fn yz(&self) -> JointDistribution {
        let (ny, nx, nz) = (self.y.len(), self.x.len(), self.z.len());
        let mass = (0..ny * nz)
            .map(|i| compensated_sum((0..nx).map(|x| self.prob(i / nz, x, i % nz))))
            .collect();
        JointDistribution {
            labels: self.y.clone(),
            features: self.z.clone(),
            mass,
        }
    }

    /// Joint of `Y` and the pair `(X, Z)`.
    pub fn y_given_xz(&self) -> JointDistribution {
        JointDistribution {
            labels: self.y.clone(),
            features: self.x.product(&self.z),
            mass: self.mass.clone(),
        }
    }

    /// The triple `(Z, X, Y)`.
    pub fn swap_yz(&self) -> Self {
        self.permuted(|y, x, z| (z, x, y), [&self.z, &self.x, &self.y])
    }

    /// The triple `(Y, Z, X)`.
    pub fn swap_xz(&self) -> Self {
        self.permuted(|y, x, z| (y, z, x), [&self.y, &self.z, &self.x])
    }

    fn permuted(
        &self,
        map: impl Fn(usize, usize, usize) -> (usize, usize, usize),
        alphabets: [&Alphabet; 3],
    ) -> Self {
        let (n1, n2) = (alphabets[1].len(), alphabets[2].len());
        let mut mass = vec![0.0; self.mass.len()];
        for y in 0..self.y.len() {
            for x in 0..self.x.len() {
                for z in 0..self.z.len() {
                    let (a, b, c) = map(y, x, z);
                    mass[(a * n1 + b) * n2 + c] = self.prob(y, x, z);
                }
            }
        }
        Self {
            y: alphabets[0].clone(),
            x: alphabets[1].clone(),
            z: alphabets[2].clone(),
            mass,
        }
    }
}
