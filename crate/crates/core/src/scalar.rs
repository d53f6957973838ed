//! Scalar building blocks of a model: the degradation numerator, the
//! stiffness function, the damage potential and the outer degradation map.
//!
//! Every function is a [`ScalarFnSpec`]: a family (closed form or tabulated)
//! times a positive scale. Tabulated functions use a shape-preserving
//! piecewise-cubic Hermite interpolant and clamp outside their sample range.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    UnitInterval,
    NonnegHalfline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "family")]
pub enum Family {
    /// `t^p`
    Power { p: f64 },
    /// `lambda^-2 * t^(2q)`
    ScaledPower { lambda: f64, q: f64 },
    /// `t^2`
    Quadratic,
    /// `min(1, t)`
    MinWithOne,
    /// `t / (1 + t)`
    Rational,
    Tabulated(Table),
}

/// Monotone cubic Hermite table (Fritsch-Carlson slopes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableSamples", into = "TableSamples")]
pub struct Table {
    t: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TableSamples {
    samples: Vec<(f64, f64)>,
}

impl TryFrom<TableSamples> for Table {
    type Error = Error;
    fn try_from(s: TableSamples) -> Result<Self> {
        Table::new(s.samples)
    }
}

impl From<Table> for TableSamples {
    fn from(t: Table) -> Self {
        TableSamples {
            samples: t.samples().collect(),
        }
    }
}

impl Table {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidFunction(
                "tabulated function needs at least two samples".into(),
            ));
        }
        for (i, &(t, y)) in samples.iter().enumerate() {
            if !t.is_finite() || !y.is_finite() {
                return Err(Error::InvalidFunction(format!(
                    "non-finite sample ({t}, {y}) at row {i}"
                )));
            }
            if y < 0.0 {
                return Err(Error::InvalidFunction(format!(
                    "negative value {y} at t = {t}"
                )));
            }
            if i > 0 && t <= samples[i - 1].0 {
                return Err(Error::InvalidFunction(format!(
                    "abscissae not strictly increasing at row {i} (t = {t})"
                )));
            }
        }
        let (t, y): (Vec<f64>, Vec<f64>) = samples.into_iter().unzip();
        let d = pchip_slopes(&t, &y);
        Ok(Table { t, y, d })
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.y.iter().copied())
    }

    pub fn t_min(&self) -> f64 {
        self.t[0]
    }

    pub fn t_max(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.t.len();
        if x <= self.t[0] {
            return self.y[0];
        }
        if x >= self.t[n - 1] {
            return self.y[n - 1];
        }
        let k = self.t.partition_point(|&ti| ti <= x) - 1;
        let h = self.t[k + 1] - self.t[k];
        let s = (x - self.t[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }

    /// Value and derivative of the interpolant; zero slope outside the
    /// sample range.
    pub fn eval_with_slope(&self, x: f64) -> (f64, f64) {
        let n = self.t.len();
        if x <= self.t[0] {
            return (self.y[0], 0.0);
        }
        if x >= self.t[n - 1] {
            return (self.y[n - 1], 0.0);
        }
        let k = self.t.partition_point(|&ti| ti <= x) - 1;
        let h = self.t[k + 1] - self.t[k];
        let s = (x - self.t[k]) / h;
        let s2 = s * s;
        let v = self.eval(x);
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = -d00;
        let d11 = 3.0 * s2 - 2.0 * s;
        let dv = d00 * self.y[k] + d10 * self.d[k] + d01 * self.y[k + 1] + d11 * self.d[k + 1];
        (v, dv)
    }

    /// Reads a two-column `t,value` CSV. A non-numeric first row is treated
    /// as a header.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut samples = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::InvalidFunction(format!(
                    "row {} has {} columns, expected 2",
                    row + 1,
                    rec.len()
                )));
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match parsed {
                (Ok(t), Ok(y)) => samples.push((t, y)),
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::InvalidFunction(format!(
                        "row {} is not numeric: {:?}",
                        row + 1,
                        rec
                    )))
                }
            }
        }
        Table::new(samples)
    }
}

fn pchip_slopes(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = pchip_endpoint(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = pchip_endpoint(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn pchip_endpoint(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

fn power_with_slope(t: f64, p: f64) -> (f64, f64) {
    if t <= 0.0 {
        let d = if p == 1.0 {
            1.0
        } else if p < 1.0 {
            f64::INFINITY
        } else {
            0.0
        };
        (0.0, d)
    } else {
        let v = t.powf(p);
        (v, p * v / t)
    }
}

/// Leading-order behaviour `coeff * t^exponent` as `t -> 0+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub coeff: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarFnSpec {
    #[serde(flatten)]
    pub family: Family,
    pub domain: Domain,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ScalarFnSpec {
    pub fn new(family: Family, domain: Domain) -> Self {
        ScalarFnSpec {
            family,
            domain,
            scale: 1.0,
        }
    }

    pub fn power(p: f64, domain: Domain) -> Self {
        Self::new(Family::Power { p }, domain)
    }

    pub fn scaled_power(lambda: f64, q: f64, domain: Domain) -> Self {
        Self::new(Family::ScaledPower { lambda, q }, domain)
    }

    pub fn quadratic(domain: Domain) -> Self {
        Self::new(Family::Quadratic, domain)
    }

    pub fn min_with_one() -> Self {
        Self::new(Family::MinWithOne, Domain::NonnegHalfline)
    }

    pub fn rational() -> Self {
        Self::new(Family::Rational, Domain::NonnegHalfline)
    }

    pub fn tabulated(samples: Vec<(f64, f64)>, domain: Domain) -> Result<Self> {
        Ok(Self::new(Family::Tabulated(Table::new(samples)?), domain))
    }

    pub fn scaled(mut self, c: f64) -> Self {
        self.scale *= c;
        self
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.family, Family::Tabulated(_))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidFunction(format!(
                "scale must be finite and positive, got {}",
                self.scale
            )));
        }
        match &self.family {
            Family::Power { p } if !(p.is_finite() && *p > 0.0) => Err(Error::InvalidFunction(
                format!("power exponent must be positive, got {p}"),
            )),
            Family::ScaledPower { lambda, q }
                if !(lambda.is_finite() && *lambda > 0.0 && q.is_finite() && *q > 0.0) =>
            {
                Err(Error::InvalidFunction(format!(
                    "scaled-power needs lambda > 0 and q > 0, got ({lambda}, {q})"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let v = match &self.family {
            Family::Power { p } => {
                if t <= 0.0 {
                    0.0
                } else {
                    t.powf(*p)
                }
            }
            Family::ScaledPower { lambda, q } => {
                if t <= 0.0 {
                    0.0
                } else {
                    t.powf(2.0 * q) / (lambda * lambda)
                }
            }
            Family::Quadratic => t * t,
            Family::MinWithOne => t.min(1.0),
            Family::Rational => {
                if t.is_infinite() {
                    1.0
                } else {
                    t / (1.0 + t)
                }
            }
            Family::Tabulated(tab) => tab.eval(t),
        };
        self.scale * v
    }

    /// Value and (right) derivative at `t`.
    pub fn eval_with_slope(&self, t: f64) -> (f64, f64) {
        let (v, d) = match &self.family {
            Family::Power { p } => power_with_slope(t, *p),
            Family::ScaledPower { lambda, q } => {
                let (v, d) = power_with_slope(t, 2.0 * q);
                let c = 1.0 / (lambda * lambda);
                (c * v, c * d)
            }
            Family::Quadratic => (t * t, 2.0 * t),
            Family::MinWithOne => {
                if t < 1.0 {
                    (t, 1.0)
                } else {
                    (1.0, 0.0)
                }
            }
            Family::Rational => {
                if t.is_infinite() {
                    (1.0, 0.0)
                } else {
                    let r = 1.0 / (1.0 + t);
                    (t * r, r * r)
                }
            }
            Family::Tabulated(tab) => tab.eval_with_slope(t),
        };
        (self.scale * v, self.scale * d)
    }

    /// Closed-form small-argument behaviour, when the family has one.
    pub fn leading_power(&self) -> Option<PowerLaw> {
        let (coeff, exponent) = match &self.family {
            Family::Power { p } => (1.0, *p),
            Family::ScaledPower { lambda, q } => (1.0 / (lambda * lambda), 2.0 * q),
            Family::Quadratic => (1.0, 2.0),
            Family::MinWithOne | Family::Rational => (1.0, 1.0),
            Family::Tabulated(_) => return None,
        };
        Some(PowerLaw {
            coeff: coeff * self.scale,
            exponent,
        })
    }

    /// Closed-form limit at infinity, when the family has one.
    pub fn limit_at_infinity(&self) -> Option<f64> {
        let v = match &self.family {
            Family::Power { .. } | Family::ScaledPower { .. } | Family::Quadratic => f64::INFINITY,
            Family::MinWithOne | Family::Rational => 1.0,
            Family::Tabulated(_) => return None,
        };
        Some(v * self.scale)
    }

    /// Closed-form right derivative at zero, when the family has one.
    pub fn right_derivative_at_zero(&self) -> Option<f64> {
        let law = self.leading_power()?;
        Some(if law.exponent < 1.0 {
            f64::INFINITY
        } else if law.exponent == 1.0 {
            law.coeff
        } else {
            0.0
        })
    }
}

impl fmt::Display for ScalarFnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale != 1.0 {
            write!(f, "{}*", self.scale)?;
        }
        match &self.family {
            Family::Power { p } => write!(f, "power({p})"),
            Family::ScaledPower { lambda, q } => write!(f, "scaled-power({lambda}, {q})"),
            Family::Quadratic => write!(f, "quadratic"),
            Family::MinWithOne => write!(f, "min-with-one"),
            Family::Rational => write!(f, "rational"),
            Family::Tabulated(t) => write!(f, "tabulated({} samples)", t.t.len()),
        }
    }
}
