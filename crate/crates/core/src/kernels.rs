//! Kernel families `g_t(y)` and their multiplication rules.
//!
//! Every family here is closed under multiplication, `g_t(y) g_s(y) = g_{v(t,s)}(y)`,
//! which is what lets conditional second moments of kernel values be read off
//! the conditional transform itself. The characteristic function is handled
//! only through its real `(cos, sin)` pair; products of those reduce to
//! transform values at `t ± s` via [`cf_product_indices`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `(cos(ty), sin(ty))`
    CfReal,
    /// `exp(ty)`
    Mgf,
    /// `t^y`, nonnegative observations only.
    Pgf,
    /// `exp(-ty)`
    Laplace,
    /// `y^t` for positive integers `t`.
    Moment,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 5] = [
        KernelFamily::CfReal,
        KernelFamily::Mgf,
        KernelFamily::Pgf,
        KernelFamily::Laplace,
        KernelFamily::Moment,
    ];

    /// Number of real martingale components contributed by one point.
    pub fn components_per_point(self) -> usize {
        match self {
            KernelFamily::CfReal => 2,
            _ => 1,
        }
    }

    /// The index at which the kernel is constant in `y`.
    pub fn degenerate_index(self) -> f64 {
        match self {
            KernelFamily::Pgf => 1.0,
            _ => 0.0,
        }
    }

    /// Checks that `t` is an admissible evaluation point.
    pub fn check_index(self, t: f64) -> Result<()> {
        let ok = t.is_finite()
            && t != self.degenerate_index()
            && match self {
                KernelFamily::Pgf => t > 0.0,
                KernelFamily::Moment => t >= 1.0 && t.fract() == 0.0,
                _ => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::IndexOutOfDomain { family: self, t })
        }
    }

    /// Default search window for information maximization.
    pub fn default_window(self) -> (f64, f64) {
        match self {
            KernelFamily::CfReal => (1e-3, 5.0),
            KernelFamily::Mgf => (-1.0, 1.0),
            KernelFamily::Laplace => (1e-3, 10.0),
            KernelFamily::Pgf => (1e-3, 0.999),
            KernelFamily::Moment => (1.0, 8.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KernelFamily::CfReal => "cf",
            KernelFamily::Mgf => "mgf",
            KernelFamily::Pgf => "pgf",
            KernelFamily::Laplace => "laplace",
            KernelFamily::Moment => "moment",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cf" | "cf-real" | "cf_real" => Ok(KernelFamily::CfReal),
            "mgf" => Ok(KernelFamily::Mgf),
            "pgf" => Ok(KernelFamily::Pgf),
            "laplace" => Ok(KernelFamily::Laplace),
            "moment" | "m" => Ok(KernelFamily::Moment),
            other => Err(format!("unknown kernel family '{other}'")),
        }
    }
}

/// A kernel value or kernel expectation: a scalar, or the `(cos, sin)` pair
/// for the real characteristic-function kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelValue {
    Scalar(f64),
    Pair(f64, f64),
}

impl KernelValue {
    pub fn len(&self) -> usize {
        match self {
            KernelValue::Scalar(_) => 1,
            KernelValue::Pair(..) => 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, i: usize) -> f64 {
        match (self, i) {
            (KernelValue::Scalar(v), 0) => *v,
            (KernelValue::Pair(c, _), 0) => *c,
            (KernelValue::Pair(_, s), 1) => *s,
            _ => panic!("kernel component {i} out of range"),
        }
    }

    pub fn scalar(&self) -> f64 {
        match self {
            KernelValue::Scalar(v) => *v,
            KernelValue::Pair(..) => panic!("expected a scalar kernel value"),
        }
    }

    pub fn pair(&self) -> (f64, f64) {
        match self {
            KernelValue::Pair(c, s) => (*c, *s),
            KernelValue::Scalar(_) => panic!("expected a (cos, sin) kernel value"),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            KernelValue::Scalar(v) => v.is_finite(),
            KernelValue::Pair(c, s) => c.is_finite() && s.is_finite(),
        }
    }

    pub(crate) fn zip(self, other: KernelValue, f: impl Fn(f64, f64) -> f64) -> KernelValue {
        match (self, other) {
            (KernelValue::Scalar(a), KernelValue::Scalar(b)) => KernelValue::Scalar(f(a, b)),
            (KernelValue::Pair(a, b), KernelValue::Pair(c, d)) => KernelValue::Pair(f(a, c), f(b, d)),
            _ => panic!("mismatched kernel value shapes"),
        }
    }
}

/// Evaluates `g_t(y)`.
pub fn eval(family: KernelFamily, t: f64, y: f64) -> Result<KernelValue> {
    family.check_index(t)?;
    if !y.is_finite() {
        return Err(Error::InvalidObservation { family, y });
    }
    let v = match family {
        KernelFamily::CfReal => {
            let (s, c) = (t * y).sin_cos();
            return Ok(KernelValue::Pair(c, s));
        }
        KernelFamily::Mgf => (t * y).exp(),
        KernelFamily::Laplace => (-t * y).exp(),
        KernelFamily::Pgf => {
            if y < 0.0 {
                return Err(Error::InvalidObservation { family, y });
            }
            t.powf(y)
        }
        KernelFamily::Moment => y.powi(t as i32),
    };
    if v.is_finite() {
        Ok(KernelValue::Scalar(v))
    } else {
        Err(Error::Overflow { family, t, y })
    }
}

/// The multiplication rule `v(t, s)` with `g_t g_s = g_{v(t,s)}`.
///
/// The result may be the family's degenerate index (e.g. `t + s = 0` for the
/// MGF), which is a legitimate transform argument even though it is not an
/// admissible evaluation point. Whether the result lies inside a model's
/// transform-existence region is decided by the model.
pub fn mult_rule(family: KernelFamily, t: f64, s: f64) -> Result<f64> {
    family.check_index(t)?;
    family.check_index(s)?;
    let v = match family {
        KernelFamily::Mgf | KernelFamily::Laplace | KernelFamily::Moment => t + s,
        KernelFamily::Pgf => t * s,
        KernelFamily::CfReal => return Err(Error::Unsupported(family)),
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NotClosed { t, s, v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

/// `weight * trig(index * y)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub weight: f64,
    pub func: Trig,
    pub index: f64,
}

impl TrigTerm {
    fn new(weight: f64, func: Trig, index: f64) -> Self {
        TrigTerm { weight, func, index }
    }

    pub fn eval(&self, y: f64) -> f64 {
        let x = self.index * y;
        self.weight
            * match self.func {
                Trig::Cos => x.cos(),
                Trig::Sin => x.sin(),
            }
    }

    /// Expectation of this term given the conditional `(E cos, E sin)` at `index`.
    pub fn expect(&self, cf: (f64, f64)) -> f64 {
        self.weight
            * match self.func {
                Trig::Cos => cf.0,
                Trig::Sin => cf.1,
            }
    }
}

/// Product-to-sum expansions of the real CF kernel pair at `(t, s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfProducts {
    /// `cos(tY) cos(sY)`
    pub cos_cos: [TrigTerm; 2],
    /// `sin(tY) sin(sY)`
    pub sin_sin: [TrigTerm; 2],
    /// `sin(tY) cos(sY)`
    pub sin_cos: [TrigTerm; 2],
    /// `cos(tY) sin(sY)`
    pub cos_sin: [TrigTerm; 2],
}

impl CfProducts {
    /// Every transform index the expansions refer to.
    pub fn indices(&self) -> impl Iterator<Item = f64> + '_ {
        self.cos_cos
            .iter()
            .chain(&self.sin_sin)
            .chain(&self.sin_cos)
            .chain(&self.cos_sin)
            .map(|term| term.index)
    }
}

pub fn cf_product_indices(t: f64, s: f64) -> CfProducts {
    let (d, p) = (t - s, t + s);
    CfProducts {
        cos_cos: [TrigTerm::new(0.5, Trig::Cos, d), TrigTerm::new(0.5, Trig::Cos, p)],
        sin_sin: [TrigTerm::new(0.5, Trig::Cos, d), TrigTerm::new(-0.5, Trig::Cos, p)],
        sin_cos: [TrigTerm::new(0.5, Trig::Sin, d), TrigTerm::new(0.5, Trig::Sin, p)],
        cos_sin: [TrigTerm::new(-0.5, Trig::Sin, d), TrigTerm::new(0.5, Trig::Sin, p)],
    }
}
