use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::distribution::{Alphabet, Distribution};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Loss families with closed-form Bayes actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum LossFunction {
    /// `−ln a(y)`, action a distribution.
    Log,
    /// `Σ a(y')² − 2a(y) + 1`, action a distribution.
    Brier,
    /// `1(y ≠ ŷ)`, action a symbol.
    ZeroOne,
    /// `α/(α−1)·(1 − a(y)^{(α−1)/α})`, action a distribution.
    Alpha(f64),
    /// `(y − ŷ)²` over integer symbols, action a real number.
    Quadratic,
}

/// Action chosen for a loss.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Distribution(Vec<f64>),
    Symbol(usize),
    Real(f64),
}

impl LossFunction {
    /// Checks the parameter and that the alphabet supports this loss.
    pub fn validate(&self, alphabet: &Alphabet) -> Result<()> {
        match *self {
            LossFunction::Alpha(a) if !(a.is_finite() && a > 0.0 && a != 1.0) => Err(
                Error::UnsupportedLoss(format!("alpha-loss needs alpha > 0, alpha != 1; got {a}")),
            ),
            LossFunction::Quadratic if alphabet.numeric_values().is_none() => Err(
                Error::UnsupportedLoss("quadratic loss needs integer label symbols".into()),
            ),
            _ => Ok(()),
        }
    }

    /// `L(y, a)`.
    pub fn loss(&self, alphabet: &Alphabet, y: usize, action: &Action) -> Result<f64> {
        let mut point = vec![0.0; alphabet.len()];
        point[y] = 1.0;
        self.expected_loss(alphabet, &point, action)
    }

    /// `E_{Y~q}[L(Y, a)]`; infinite when the action assigns zero mass where `q` does not.
    pub fn expected_loss(&self, alphabet: &Alphabet, q: &[f64], action: &Action) -> Result<f64> {
        self.validate(alphabet)?;
        let mut acc = CompensatedSum::new();
        match (self, action) {
            (LossFunction::Log, Action::Distribution(a)) => {
                for (&qy, &ay) in q.iter().zip(a) {
                    if qy > 0.0 {
                        if ay <= 0.0 {
                            return Ok(f64::INFINITY);
                        }
                        acc.add(-qy * ay.ln());
                    }
                }
            }
            (LossFunction::Brier, Action::Distribution(a)) => {
                let sq: CompensatedSum = a.iter().map(|v| v * v).collect();
                let sq = sq.value();
                for (&qy, &ay) in q.iter().zip(a) {
                    acc.add(qy * (sq - 2.0 * ay + 1.0));
                }
            }
            (LossFunction::ZeroOne, Action::Symbol(s)) => {
                for (y, &qy) in q.iter().enumerate() {
                    if y != *s {
                        acc.add(qy);
                    }
                }
            }
            (LossFunction::Alpha(alpha), Action::Distribution(a)) => {
                let e = (alpha - 1.0) / alpha;
                let k = alpha / (alpha - 1.0);
                for (&qy, &ay) in q.iter().zip(a) {
                    if qy > 0.0 {
                        let powered = ay.powf(e);
                        if !powered.is_finite() {
                            return Ok(f64::INFINITY);
                        }
                        acc.add(qy * k * (1.0 - powered));
                    }
                }
            }
            (LossFunction::Quadratic, Action::Real(a)) => {
                let ys = alphabet.numeric_values().expect("validated");
                for (&qy, y) in q.iter().zip(ys) {
                    acc.add(qy * (y - a) * (y - a));
                }
            }
            _ => {
                return Err(Error::Misuse(format!(
                    "action {action:?} does not belong to loss {self}"
                )))
            }
        }
        Ok(acc.value())
    }

    /// Bayes action for the pmf `p` and the attained minimum `H_L`.
    pub fn bayes_action_for(&self, alphabet: &Alphabet, p: &[f64]) -> Result<(Action, f64)> {
        self.validate(alphabet)?;
        Ok(match *self {
            LossFunction::Log => {
                let h: CompensatedSum = p
                    .iter()
                    .filter(|&&v| v > 0.0)
                    .map(|&v| -v * v.ln())
                    .collect();
                (Action::Distribution(p.to_vec()), h.value())
            }
            LossFunction::Brier => {
                let sq: CompensatedSum = p.iter().map(|v| v * v).collect();
                (Action::Distribution(p.to_vec()), 1.0 - sq.value())
            }
            LossFunction::ZeroOne => {
                // first index of the maximum
                let mut best = 0;
                for (i, &v) in p.iter().enumerate() {
                    if v > p[best] {
                        best = i;
                    }
                }
                let off: CompensatedSum = p
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != best)
                    .map(|(_, &v)| v)
                    .collect();
                (Action::Symbol(best), off.value())
            }
            LossFunction::Alpha(alpha) => {
                let powered: Vec<f64> = p.iter().map(|v| v.powf(alpha)).collect();
                let s: CompensatedSum = powered.iter().copied().collect();
                let s = s.value();
                let tilted = powered.iter().map(|v| v / s).collect();
                let h = alpha / (alpha - 1.0) * (1.0 - s.powf(1.0 / alpha));
                (Action::Distribution(tilted), h)
            }
            LossFunction::Quadratic => {
                let ys = alphabet.numeric_values().expect("validated");
                let mean: CompensatedSum = p.iter().zip(&ys).map(|(q, y)| q * y).collect();
                let mean = mean.value();
                let var: CompensatedSum = p
                    .iter()
                    .zip(&ys)
                    .map(|(q, y)| q * (y - mean) * (y - mean))
                    .collect();
                (Action::Real(mean), var.value())
            }
        })
    }
}

impl fmt::Display for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossFunction::Log => write!(f, "log"),
            LossFunction::Brier => write!(f, "brier"),
            LossFunction::ZeroOne => write!(f, "zero_one"),
            LossFunction::Alpha(a) => write!(f, "alpha:{a}"),
            LossFunction::Quadratic => write!(f, "quadratic"),
        }
    }
}

impl FromStr for LossFunction {
    type Err = Error;

    /// `log`, `brier`, `zero_one`, `quadratic` or `alpha:<value>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "log" => Ok(LossFunction::Log),
            "brier" => Ok(LossFunction::Brier),
            "zero_one" | "0-1" => Ok(LossFunction::ZeroOne),
            "quadratic" => Ok(LossFunction::Quadratic),
            other => {
                let alpha = other
                    .strip_prefix("alpha:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown loss `{other}`")))?;
                if !(alpha.is_finite() && alpha > 0.0 && alpha != 1.0) {
                    return Err(Error::Config(format!("alpha-loss parameter {alpha} is invalid")));
                }
                Ok(LossFunction::Alpha(alpha))
            }
        }
    }
}

impl TryFrom<String> for LossFunction {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LossFunction> for String {
    fn from(l: LossFunction) -> String {
        l.to_string()
    }
}

/// Bayes action and L-entropy of `dist`.
pub fn bayes_action(dist: &Distribution, loss: LossFunction) -> Result<(Action, f64)> {
    loss.bayes_action_for(dist.alphabet(), dist.mass())
}

/// `H_L(Y)`.
pub fn l_entropy(dist: &Distribution, loss: LossFunction) -> Result<f64> {
    Ok(bayes_action(dist, loss)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn binary(p0: f64) -> Distribution {
        Distribution::new(Alphabet::integers(2), vec![p0, 1.0 - p0]).unwrap()
    }

    #[test]
    fn reference_entropies() {
        let u = binary(0.5);
        let (a, h) = bayes_action(&u, LossFunction::Log).unwrap();
        assert_eq!(a, Action::Distribution(vec![0.5, 0.5]));
        assert!((h - std::f64::consts::LN_2).abs() < 1e-15);

        let (a, h) = bayes_action(&binary(0.7), LossFunction::ZeroOne).unwrap();
        assert_eq!(a, Action::Symbol(0));
        assert!((h - 0.3).abs() < 1e-15);

        let (a, h) = bayes_action(&u, LossFunction::Quadratic).unwrap();
        assert_eq!(a, Action::Real(0.5));
        assert_eq!(h, 0.25);

        assert!((l_entropy(&u, LossFunction::Brier).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let (a, _) = bayes_action(&binary(0.5), LossFunction::ZeroOne).unwrap();
        assert_eq!(a, Action::Symbol(0));
    }

    #[test]
    fn quadratic_needs_numbers_and_alpha_needs_valid_parameter() {
        let a = Alphabet::new(vec!["a".into(), "b".into()]).unwrap();
        let d = Distribution::uniform(a);
        assert!(matches!(
            bayes_action(&d, LossFunction::Quadratic),
            Err(Error::UnsupportedLoss(_))
        ));
        assert!(bayes_action(&binary(0.3), LossFunction::Alpha(1.0)).is_err());
        assert!(bayes_action(&binary(0.3), LossFunction::Alpha(-2.0)).is_err());
    }

    #[test]
    fn alpha_entropy_matches_expected_loss_of_tilted_action() {
        let d = Distribution::new(Alphabet::integers(3), vec![0.2, 0.5, 0.3]).unwrap();
        for alpha in [0.3, 0.5, 2.0, 7.0] {
            let loss = LossFunction::Alpha(alpha);
            let (a, h) = bayes_action(&d, loss).unwrap();
            let e = loss.expected_loss(d.alphabet(), d.mass(), &a).unwrap();
            assert!((h - e).abs() < 1e-14, "alpha {alpha}: {h} vs {e}");
        }
    }

    #[test]
    fn pointwise_losses() {
        let al = Alphabet::integers(2);
        let act = Action::Distribution(vec![0.25, 0.75]);
        let l = LossFunction::Log.loss(&al, 1, &act).unwrap();
        assert!((l + 0.75f64.ln()).abs() < 1e-15);
        let b = LossFunction::Brier.loss(&al, 0, &act).unwrap();
        assert!((b - (0.0625 + 0.5625 - 0.5 + 1.0)).abs() < 1e-15);
        assert_eq!(LossFunction::ZeroOne.loss(&al, 1, &Action::Symbol(0)).unwrap(), 1.0);
        assert_eq!(LossFunction::Quadratic.loss(&al, 1, &Action::Real(0.5)).unwrap(), 0.25);
        assert!(LossFunction::Log.loss(&al, 0, &Action::Symbol(0)).is_err());
        let zero = Action::Distribution(vec![0.0, 1.0]);
        assert_eq!(LossFunction::Log.loss(&al, 0, &zero).unwrap(), f64::INFINITY);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["log", "brier", "zero_one", "quadratic", "alpha:0.5"] {
            let l: LossFunction = s.parse().unwrap();
            assert_eq!(l.to_string(), s);
        }
        assert!("alpha:1".parse::<LossFunction>().is_err());
        assert!("hinge".parse::<LossFunction>().is_err());
        let l: LossFunction = serde_json::from_str("\"alpha:2\"").unwrap();
        assert_eq!(l, LossFunction::Alpha(2.0));
    }

    // grid over the probability simplex at resolution 1/200
    fn simplex_grid(n: usize) -> Vec<Vec<f64>> {
        const R: usize = 200;
        let mut out = Vec::new();
        match n {
            2 => {
                for i in 0..=R {
                    out.push(vec![i as f64 / R as f64, (R - i) as f64 / R as f64]);
                }
            }
            3 => {
                for i in 0..=R {
                    for j in 0..=R - i {
                        out.push(vec![
                            i as f64 / R as f64,
                            j as f64 / R as f64,
                            (R - i - j) as f64 / R as f64,
                        ]);
                    }
                }
            }
            _ => unreachable!(),
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn closed_form_beats_simplex_grid(w in prop::collection::vec(0.05f64..1.0, 2..=3), alpha in prop::sample::select(vec![0.5, 2.0, 4.0])) {
            let total: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|v| v / total).collect();
            let d = Distribution::new(Alphabet::integers(p.len()), p.clone()).unwrap();
            for loss in [LossFunction::Log, LossFunction::Brier, LossFunction::Alpha(alpha)] {
                let (_, h) = bayes_action(&d, loss).unwrap();
                let grid_min = simplex_grid(p.len())
                    .into_iter()
                    .map(|a| loss.expected_loss(d.alphabet(), &p, &Action::Distribution(a)).unwrap())
                    .fold(f64::INFINITY, f64::min);
                prop_assert!(h <= grid_min + 1e-12, "{loss}: {h} > {grid_min}");
                prop_assert!(grid_min - h <= 1e-3, "{loss}: grid {grid_min} far from {h}");
            }
        }
    }
}
