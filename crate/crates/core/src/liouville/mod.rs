//! Continued fractions with exact big-integer convergents and log-space
//! sandwich bounds `1/(q_{k+1}+q_k) ≤ |q_k α − p_k| ≤ 1/q_{k+1}`, used to
//! classify exponential Liouville numbers.
//!
//! Fractions are `α = [0; a_1, a_2, …]`. Partial quotients too large to hold
//! (the `c^{q_k}` rule reaches `2^{2^{4622}}` at the fifth term) stay symbolic
//! as `base^exponent`; only their logarithms enter the bounds.

mod extfloat;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

pub use extfloat::ExtFloat;

use crate::error::{Error, Result};

/// Largest quotient materialised as an integer, in bits.
const MATERIALISE_BITS: u64 = 1 << 22;

/// Flagging threshold for `min ε̂_k` over the last half of the depths.
pub const FLAG_THRESHOLD: f64 = 1e-3;

/// A partial quotient.
#[derive(Clone, Debug, PartialEq)]
pub enum Quotient {
    Exact(BigInt),
    /// `base^exponent`, too large to materialise.
    Power { base: BigInt, exponent: BigInt },
}

impl Quotient {
    fn power(base: &BigInt, exponent: &BigInt) -> Quotient {
        let bits = exponent.to_f64().unwrap_or(f64::INFINITY) * (base.bits() as f64);
        match exponent.to_u32() {
            Some(e) if bits <= MATERIALISE_BITS as f64 => Quotient::Exact(num_traits::pow(base.clone(), e as usize)),
            _ => Quotient::Power { base: base.clone(), exponent: exponent.clone() },
        }
    }

    /// `ln a` as an extended float.
    fn ln(&self) -> ExtFloat {
        match self {
            Quotient::Exact(a) => ExtFloat::from_f64(ln_big(a)),
            Quotient::Power { base, exponent } => ExtFloat::from_bigint(exponent).mul(&ExtFloat::from_f64(ln_big(base))),
        }
    }
}

/// `ln n` for `n ≥ 1` from the bit length and the top 64 bits.
pub fn ln_big(n: &BigInt) -> f64 {
    ExtFloat::from_bigint(n).ln()
}

/// Generator rules for infinite fractions.
#[derive(Clone, Debug, PartialEq)]
pub enum Rule {
    /// `a_k = b^{k!}`.
    FactorialPower(BigInt),
    /// `a_{k+1} = c^{q_k}`.
    ExpRule(BigInt),
    /// `a_k = c` for every `k`.
    Constant(BigInt),
}

/// `[0; a_1, a_2, …]`: an explicit prefix, optionally continued by a rule.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuedFraction {
    prefix: Vec<BigInt>,
    rule: Option<Rule>,
}

impl ContinuedFraction {
    /// A terminating fraction with the given quotients (all `≥ 1`).
    pub fn finite(quotients: Vec<BigInt>) -> Result<Self> {
        if quotients.iter().any(|a| a < &BigInt::one()) {
            return Err(Error::InvalidParams("partial quotients must be >= 1".into()));
        }
        Ok(Self { prefix: quotients, rule: None })
    }

    pub fn from_rule(rule: Rule) -> Result<Self> {
        let base = match &rule {
            Rule::FactorialPower(b) | Rule::ExpRule(b) => b,
            Rule::Constant(c) => c,
        };
        let min = if matches!(rule, Rule::Constant(_)) { 1 } else { 2 };
        if base < &BigInt::from(min) {
            return Err(Error::InvalidParams(format!("rule base must be >= {min}")));
        }
        Ok(Self { prefix: Vec::new(), rule: Some(rule) })
    }

    /// `ω = [10^{1!}, 10^{2!}, …]`.
    pub fn factorial_power(base: u64) -> Result<Self> {
        Self::from_rule(Rule::FactorialPower(base.into()))
    }

    /// `a_{k+1} = c^{q_k}`.
    pub fn exp_rule(c: u64) -> Result<Self> {
        Self::from_rule(Rule::ExpRule(c.into()))
    }

    /// `[0; 1, 1, 1, …] = 1/φ`.
    pub fn golden() -> Self {
        Self { prefix: Vec::new(), rule: Some(Rule::Constant(BigInt::one())) }
    }

    /// Parses `factorial-power:B`, `exp-rule:C`, `constant:C` or `golden`.
    pub fn parse_rule(text: &str) -> Result<Self> {
        let t = text.trim();
        if t == "golden" {
            return Ok(Self::golden());
        }
        let (name, arg) = t.split_once(':').ok_or_else(|| Error::Parse(format!("unknown rule {t:?}")))?;
        let v: BigInt = arg.trim().parse().map_err(|_| Error::Parse(format!("bad rule argument in {t:?}")))?;
        match name.trim() {
            "factorial-power" => Self::from_rule(Rule::FactorialPower(v)),
            "exp-rule" => Self::from_rule(Rule::ExpRule(v)),
            "constant" => Self::from_rule(Rule::Constant(v)),
            other => Err(Error::Parse(format!("unknown rule {other:?}"))),
        }
    }

    /// Quotients `a_1..a_count` (fewer if the fraction terminates), with the
    /// denominators `q_0..q_{count−1}` the exp rule needs.
    fn quotients(&self, count: usize) -> Vec<Quotient> {
        let mut out: Vec<Quotient> = self.prefix.iter().take(count).cloned().map(Quotient::Exact).collect();
        let Some(rule) = &self.rule else { return out };
        // q_{k−2}, q_{k−1} in exact arithmetic while the quotients allow
        let (mut q_prev, mut q_cur) = (BigInt::zero(), BigInt::one());
        for a in &out {
            if let Quotient::Exact(a) = a {
                let next = a * &q_cur + &q_prev;
                q_prev = std::mem::replace(&mut q_cur, next);
            }
        }
        while out.len() < count {
            let k = out.len() + 1;
            let a = match rule {
                Rule::Constant(c) => Quotient::Exact(c.clone()),
                Rule::FactorialPower(b) => Quotient::power(b, &factorial(k)),
                Rule::ExpRule(c) => Quotient::power(c, &q_cur),
            };
            match &a {
                Quotient::Exact(av) => {
                    let next = av * &q_cur + &q_prev;
                    q_prev = std::mem::replace(&mut q_cur, next);
                    out.push(a);
                }
                Quotient::Power { .. } => {
                    out.push(a);
                    break;
                }
            }
        }
        out
    }
}

fn factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::one(), |acc, i| acc * i)
}

fn ext_log<S: Serializer>(x: &ExtFloat, negate: bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    let v = x.to_f64();
    if v.is_finite() {
        s.serialize_f64(if negate { -v } else { v })
    } else {
        s.serialize_str(&format!("{}{}", if negate { "-" } else { "" }, x.to_scientific()))
    }
}

fn neg_ext<S: Serializer>(x: &ExtFloat, s: S) -> std::result::Result<S::Ok, S::Error> {
    ext_log(x, true, s)
}

fn big_str<S: Serializer>(x: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

/// Convergent `p_k/q_k` with `log|q_k α − p_k| ∈ [logLower, logUpper]`.
///
/// The logs are stored negated (`ln q_{k+1}` and `ln(q_{k+1} + q_k)`) because
/// they can exceed the double range.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ConvergentBounds {
    pub k: usize,
    #[serde(serialize_with = "big_str")]
    pub p: BigInt,
    #[serde(serialize_with = "big_str")]
    pub q: BigInt,
    /// `−logUpper = ln q_{k+1}`.
    #[serde(rename = "logUpper", serialize_with = "neg_ext")]
    pub neg_log_upper: ExtFloat,
    /// `−logLower = ln(q_{k+1} + q_k)`.
    #[serde(rename = "logLower", serialize_with = "neg_ext")]
    pub neg_log_lower: ExtFloat,
}

impl ConvergentBounds {
    /// `logUpper` as a double (`−∞` when out of range).
    pub fn log_upper(&self) -> f64 {
        -self.neg_log_upper.to_f64()
    }

    pub fn log_lower(&self) -> f64 {
        -self.neg_log_lower.to_f64()
    }
}

/// `ln(x·y + z)` for `x = a_{k+1}` given by its log, `y = q_k`, `z = q_{k−1}`.
fn ln_affine(ln_a: ExtFloat, q: &BigInt, q_prev: &BigInt) -> ExtFloat {
    let ln_q = ln_big(q);
    // ln(a q + q') = ln a + ln q + ln(1 + q'/(a q)), and q'/(a q) < 1/a
    let ln_a_f = ln_a.to_f64();
    let corr = if ln_a_f.is_finite() && ln_a_f < 700.0 {
        let aq = ln_a_f.exp() * q.to_f64().unwrap_or(f64::INFINITY);
        let qp = q_prev.to_f64().unwrap_or(0.0);
        if aq.is_finite() { (qp / aq).ln_1p() } else { 0.0 }
    } else {
        0.0
    };
    ln_a.add(&ExtFloat::from_f64(ln_q + corr))
}

/// Convergents `k = 1..=depth` with their sandwich bounds.
pub fn convergents(cf: &ContinuedFraction, depth: usize) -> Result<Vec<ConvergentBounds>> {
    if depth == 0 {
        return Err(Error::InvalidParams("depth must be >= 1".into()));
    }
    let quotients = cf.quotients(depth + 1);
    if quotients.len() < depth + 1 {
        return Err(Error::InsufficientDepth(format!(
            "depth {depth} needs {} partial quotients, only {} available",
            depth + 1,
            quotients.len()
        )));
    }
    let (mut p_prev, mut p) = (BigInt::one(), BigInt::zero());
    let (mut q_prev, mut q) = (BigInt::zero(), BigInt::one());
    let mut out = Vec::with_capacity(depth);
    for k in 1..=depth {
        let Quotient::Exact(a) = &quotients[k - 1] else {
            return Err(Error::InsufficientDepth(format!("partial quotient a_{k} is too large to materialise")));
        };
        let p_next = a * &p + &p_prev;
        let q_next = a * &q + &q_prev;
        p_prev = std::mem::replace(&mut p, p_next);
        q_prev = std::mem::replace(&mut q, q_next);
        // q_{k+1} = a_{k+1} q_k + q_{k−1}
        let ln_next = ln_affine(quotients[k].ln(), &q, &q_prev);
        // q_{k+1} + q_k = q_{k+1}(1 + q_k/q_{k+1}), with q_k/q_{k+1} ≤ 1/a_{k+1}
        let ratio = (ln_big(&q) - ln_next.to_f64()).exp();
        let ln_sum = ln_next.add(&ExtFloat::from_f64(ratio.ln_1p()));
        out.push(ConvergentBounds { k, p: p.clone(), q: q.clone(), neg_log_upper: ln_next, neg_log_lower: ln_sum });
    }
    Ok(out)
}

/// Per-depth record of the Liouville test.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DepthRecord {
    pub k: usize,
    pub q_bits: u64,
    #[serde(serialize_with = "neg_ext")]
    pub log_upper: ExtFloat,
    #[serde(serialize_with = "neg_ext")]
    pub log_lower: ExtFloat,
    /// `ε̂_k = −logUpper_k / q_k^{1/σ}`.
    pub eps_hat: f64,
}

/// `Flagged` carries `min ε̂_k` over the last half of the depths.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum LiouvilleVerdict {
    Flagged {
        #[serde(rename = "orderWitness")]
        order_witness: f64,
    },
    NotFlaggedUpToDepth,
}

/// For a tested `ε`, the first depth from which `logLower_k > −ε q_k^{1/σ}`
/// holds at every remaining depth.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EpsCertificate {
    pub eps: f64,
    pub from_depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LiouvilleReport {
    #[serde(flatten)]
    pub verdict: LiouvilleVerdict,
    pub sigma: f64,
    pub depth: usize,
    pub depths: Vec<DepthRecord>,
    pub certificates: Vec<EpsCertificate>,
    /// `ε̂_k` over the last half is nonincreasing and ends below the threshold.
    pub certified_tail: bool,
}

impl LiouvilleReport {
    pub fn is_flagged(&self) -> bool {
        matches!(self.verdict, LiouvilleVerdict::Flagged { .. })
    }
}

/// Tests the exponential Liouville inequality `|q α − p| ≤ exp(−ε q^{1/σ})`
/// along the convergents.
pub fn exp_liouville_test(cf: &ContinuedFraction, sigma: f64, depth: usize) -> Result<LiouvilleReport> {
    if depth < 3 {
        return Err(Error::InvalidParams(format!("depth must be >= 3, got {depth}")));
    }
    if !(sigma >= 1.0) || !sigma.is_finite() {
        return Err(Error::InvalidParams(format!("sigma must be >= 1, got {sigma}")));
    }
    let conv = convergents(cf, depth)?;
    let depths: Vec<DepthRecord> = conv
        .iter()
        .map(|c| {
            let scale = ExtFloat::from_bigint(&c.q).powf(1.0 / sigma);
            DepthRecord {
                k: c.k,
                q_bits: c.q.bits(),
                log_upper: c.neg_log_upper,
                log_lower: c.neg_log_lower,
                eps_hat: c.neg_log_upper.div(&scale).to_f64(),
            }
        })
        .collect();
    let tail = &depths[depth / 2..];
    let min_eps = tail.iter().map(|d| d.eps_hat).fold(f64::INFINITY, f64::min);
    let verdict = if min_eps >= FLAG_THRESHOLD {
        LiouvilleVerdict::Flagged { order_witness: min_eps }
    } else {
        LiouvilleVerdict::NotFlaggedUpToDepth
    };
    let certified_tail = tail.windows(2).all(|w| w[1].eps_hat <= w[0].eps_hat)
        && tail.last().is_some_and(|d| d.eps_hat <= FLAG_THRESHOLD);
    // logLower_k > −ε q_k^{1/σ}  ⟺  ln(q_{k+1}+q_k) / q_k^{1/σ} < ε
    let certificates = (0..=12)
        .map(|i| {
            let eps = 10f64.powf(-6.0 + 0.5 * i as f64);
            let ok: Vec<bool> = conv
                .iter()
                .map(|c| {
                    let scale = ExtFloat::from_bigint(&c.q).powf(1.0 / sigma);
                    c.neg_log_lower.div(&scale).to_f64() < eps
                })
                .collect();
            let from = (0..ok.len()).find(|&s| ok[s..].iter().all(|&b| b)).map(|s| s + 1);
            EpsCertificate { eps, from_depth: from }
        })
        .collect();
    Ok(LiouvilleReport { verdict, sigma, depth, depths, certificates, certified_tail })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict")]
pub enum VectorVerdict {
    /// 0-based index of a coordinate certified not exponential Liouville.
    VectorNotExpLiouville { coordinate: usize },
    Inconclusive,
}

/// A vector is not exponential Liouville as soon as one coordinate is not.
/// The converse fails, so no vector is ever flagged from coordinate data.
pub fn vector_coordinate_test(cfs: &[ContinuedFraction], sigma: f64, depth: usize) -> Result<VectorVerdict> {
    if cfs.is_empty() {
        return Err(Error::InvalidParams("need at least one coordinate".into()));
    }
    for (i, cf) in cfs.iter().enumerate() {
        let r = exp_liouville_test(cf, sigma, depth)?;
        if !r.is_flagged() && r.certified_tail {
            return Ok(VectorVerdict::VectorNotExpLiouville { coordinate: i });
        }
    }
    Ok(VectorVerdict::Inconclusive)
}
