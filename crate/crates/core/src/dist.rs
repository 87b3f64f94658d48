//! Duration distributions used by the simulator and the load generator.
//!
//! Distributions are written as short expressions, all parameters in
//! milliseconds:
//!
//! ```text
//! constant(15)
//! uniform(10, 20)
//! lognormal(100, 0.4)          # median, sigma of the underlying normal
//! exponential(3)               # mean
//! mixture(0.9: lognormal(100, 0.3), 0.1: constant(5))
//! ```
//!
//! Samples are rounded to whole microseconds and never negative.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::time::{ms, Micros};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Dist {
    Constant(f64),
    Uniform(f64, f64),
    LogNormal { median: f64, sigma: f64 },
    Exponential { mean: f64 },
    Mixture(Vec<(f64, Dist)>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistError {
    #[error("cannot parse distribution `{input}`: {reason}")]
    Syntax { input: String, reason: String },
    #[error("invalid distribution `{0}`: {1}")]
    Invalid(String, &'static str),
}

impl Dist {
    pub fn constant_ms(value: f64) -> Self {
        Dist::Constant(value)
    }

    pub fn zero() -> Self {
        Dist::Constant(0.0)
    }

    pub fn lognormal(median: f64, sigma: f64) -> Self {
        Dist::LogNormal { median, sigma }
    }

    /// Draws one sample in microseconds.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Micros {
        let value_ms = self.sample_ms(rng);
        ms(value_ms).max(0)
    }

    fn sample_ms<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Dist::Constant(v) => *v,
            Dist::Uniform(a, b) => {
                if a == b {
                    *a
                } else {
                    rng.random_range(*a..=*b)
                }
            }
            Dist::LogNormal { median, sigma } => {
                if *sigma == 0.0 {
                    *median
                } else {
                    LogNormal::new(median.ln(), *sigma).expect("validated lognormal parameters").sample(rng)
                }
            }
            Dist::Exponential { mean } => {
                if *mean == 0.0 {
                    0.0
                } else {
                    Exp::new(1.0 / mean).expect("validated exponential mean").sample(rng)
                }
            }
            Dist::Mixture(parts) => {
                let total: f64 = parts.iter().map(|(w, _)| w).sum();
                let mut pick = rng.random_range(0.0..total);
                for (weight, dist) in parts {
                    if pick < *weight {
                        return dist.sample_ms(rng);
                    }
                    pick -= weight;
                }
                parts.last().map(|(_, d)| d.sample_ms(rng)).unwrap_or(0.0)
            }
        }
    }

    /// True if every sample is the same value.
    pub fn is_degenerate(&self) -> bool {
        match self {
            Dist::Constant(_) => true,
            Dist::Uniform(a, b) => a == b,
            Dist::LogNormal { sigma, .. } => *sigma == 0.0,
            Dist::Exponential { mean } => *mean == 0.0,
            Dist::Mixture(parts) => {
                let mut values = parts.iter().map(|(_, d)| d.degenerate_value());
                match values.next().flatten() {
                    Some(first) => values.all(|v| v == Some(first)),
                    None => false,
                }
            }
        }
    }

    fn degenerate_value(&self) -> Option<f64> {
        match self {
            Dist::Constant(v) => Some(*v),
            Dist::Uniform(a, b) if a == b => Some(*a),
            Dist::LogNormal { median, sigma } if *sigma == 0.0 => Some(*median),
            Dist::Exponential { mean } if *mean == 0.0 => Some(0.0),
            _ => None,
        }
    }

    /// Median in milliseconds where it has a closed form.
    pub fn median_ms(&self) -> Option<f64> {
        match self {
            Dist::Constant(v) => Some(*v),
            Dist::Uniform(a, b) => Some((a + b) / 2.0),
            Dist::LogNormal { median, .. } => Some(*median),
            Dist::Exponential { mean } => Some(mean * std::f64::consts::LN_2),
            Dist::Mixture(_) => self.degenerate_value(),
        }
    }

    pub fn validate(&self) -> Result<(), DistError> {
        let bad = |why| Err(DistError::Invalid(self.to_string(), why));
        match self {
            Dist::Constant(v) if !(v.is_finite() && *v >= 0.0) => bad("value must be finite and >= 0"),
            Dist::Uniform(a, b) if !(a.is_finite() && b.is_finite() && *a >= 0.0 && a <= b) => {
                bad("bounds must satisfy 0 <= a <= b")
            }
            Dist::LogNormal { median, sigma }
                if !(median.is_finite() && *median > 0.0 && sigma.is_finite() && *sigma >= 0.0) =>
            {
                bad("median must be > 0 and sigma >= 0")
            }
            Dist::Exponential { mean } if !(mean.is_finite() && *mean >= 0.0) => bad("mean must be >= 0"),
            Dist::Mixture(parts) => {
                if parts.is_empty() {
                    return bad("mixture needs at least one component");
                }
                if parts.iter().any(|(w, _)| !(w.is_finite() && *w > 0.0)) {
                    return bad("mixture weights must be > 0");
                }
                parts.iter().try_for_each(|(_, d)| d.validate())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Dist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dist::Constant(v) => write!(f, "constant({v})"),
            Dist::Uniform(a, b) => write!(f, "uniform({a}, {b})"),
            Dist::LogNormal { median, sigma } => write!(f, "lognormal({median}, {sigma})"),
            Dist::Exponential { mean } => write!(f, "exponential({mean})"),
            Dist::Mixture(parts) => {
                write!(f, "mixture(")?;
                for (i, (w, d)) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{w}: {d}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl From<Dist> for String {
    fn from(d: Dist) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for Dist {
    type Error = DistError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FromStr for Dist {
    type Err = DistError;

    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let mut parser = Parser { input, pos: 0 };
        let dist = parser.dist()?;
        parser.skip_ws();
        if parser.pos != input.len() {
            return Err(parser.error("trailing characters"));
        }
        dist.validate()?;
        Ok(dist)
    }
}

struct Parser<'a> {
    input: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, reason: &str) -> DistError {
        DistError::Syntax { input: self.input.to_string(), reason: format!("{reason} at offset {}", self.pos) }
    }

    fn rest(&self) -> &str {
        &self.input[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.input.len() - trimmed.len();
    }

    fn expect(&mut self, c: char) -> Result<(), DistError> {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String, DistError> {
        self.skip_ws();
        let len = self.rest().find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.error("expected distribution name"));
        }
        let name = self.rest()[..len].to_ascii_lowercase();
        self.pos += len;
        Ok(name)
    }

    fn number(&mut self) -> Result<f64, DistError> {
        self.skip_ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
            .unwrap_or(self.rest().len());
        let text = &self.rest()[..len];
        let value = text.parse::<f64>().map_err(|_| self.error("expected number"))?;
        self.pos += len;
        Ok(value)
    }

    fn args(&mut self, n: usize) -> Result<Vec<f64>, DistError> {
        self.expect('(')?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 {
                self.expect(',')?;
            }
            out.push(self.number()?);
        }
        self.expect(')')?;
        Ok(out)
    }

    fn dist(&mut self) -> Result<Dist, DistError> {
        let name = self.ident()?;
        match name.as_str() {
            "constant" | "const" => Ok(Dist::Constant(self.args(1)?[0])),
            "uniform" => {
                let a = self.args(2)?;
                Ok(Dist::Uniform(a[0], a[1]))
            }
            "lognormal" => {
                let a = self.args(2)?;
                Ok(Dist::LogNormal { median: a[0], sigma: a[1] })
            }
            "exponential" | "exp" => Ok(Dist::Exponential { mean: self.args(1)?[0] }),
            "mixture" => {
                self.expect('(')?;
                let mut parts = Vec::new();
                loop {
                    let weight = self.number()?;
                    self.expect(':')?;
                    let inner = self.dist()?;
                    parts.push((weight, inner));
                    self.skip_ws();
                    if self.rest().starts_with(',') {
                        self.pos += 1;
                        continue;
                    }
                    self.expect(')')?;
                    break;
                }
                Ok(Dist::Mixture(parts))
            }
            other => Err(self.error(&format!("unknown distribution `{other}`"))),
        }
    }
}
