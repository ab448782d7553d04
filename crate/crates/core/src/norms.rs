//! Monotone symmetric norms, proxy costs, attenuation and ordered surrogates.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::sorted_desc;

pub type NormFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Norm family with its parameters.
#[derive(Clone)]
pub enum NormKind {
    L1,
    Linf,
    Lp(f64),
    /// Sum of the `ell` largest coordinates.
    Top(usize),
    /// Weighted sum of the sorted coordinates; weights non-increasing, nonnegative.
    Ordered(Vec<f64>),
    /// Caller-supplied evaluation; must be a symmetric monotone norm.
    Oracle { name: String, eval: Arc<NormFn> },
}

impl fmt::Debug for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NormKind::L1 => write!(f, "L1"),
            NormKind::Linf => write!(f, "Linf"),
            NormKind::Lp(p) => write!(f, "Lp({p})"),
            NormKind::Top(l) => write!(f, "Top({l})"),
            NormKind::Ordered(w) => write!(f, "Ordered({w:?})"),
            NormKind::Oracle { name, .. } => write!(f, "Oracle({name})"),
        }
    }
}

/// A norm on nonnegative vectors of a fixed length.
#[derive(Clone, Debug)]
pub struct NormSpec {
    kind: NormKind,
    arity: usize,
}

/// JSON form of a parametric norm; the arity comes from context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NormJson {
    L1,
    Linf,
    Lp { p: f64 },
    Top { ell: usize },
    Ordered { weights: Vec<f64> },
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::domain("ordered weights must be finite and nonnegative"));
    }
    if w.windows(2).any(|p| p[1] > p[0]) {
        return Err(Error::domain("ordered weights must be non-increasing"));
    }
    Ok(())
}

impl NormSpec {
    pub fn l1(arity: usize) -> Self {
        NormSpec { kind: NormKind::L1, arity }
    }

    pub fn linf(arity: usize) -> Self {
        NormSpec { kind: NormKind::Linf, arity }
    }

    pub fn lp(p: f64, arity: usize) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::domain(format!("lp needs finite p >= 1, got {p}")));
        }
        Ok(NormSpec { kind: NormKind::Lp(p), arity })
    }

    pub fn top(ell: usize, arity: usize) -> Result<Self> {
        if ell == 0 || ell > arity {
            return Err(Error::domain(format!("top-{ell} needs 1 <= ell <= d = {arity}")));
        }
        Ok(NormSpec { kind: NormKind::Top(ell), arity })
    }

    /// Ordered norm; shorter weight vectors are padded with zeros.
    pub fn ordered(mut weights: Vec<f64>, arity: usize) -> Result<Self> {
        check_weights(&weights)?;
        if weights.len() > arity {
            if weights[arity..].iter().any(|&w| w != 0.0) {
                return Err(Error::domain(format!(
                    "{} ordered weights do not fit arity {arity}",
                    weights.len()
                )));
            }
            weights.truncate(arity);
        }
        weights.resize(arity, 0.0);
        Ok(NormSpec { kind: NormKind::Ordered(weights), arity })
    }

    pub fn oracle(name: impl Into<String>, arity: usize, eval: Arc<NormFn>) -> Self {
        NormSpec { kind: NormKind::Oracle { name: name.into(), eval }, arity }
    }

    pub fn from_json(j: &NormJson, arity: usize) -> Result<Self> {
        match j {
            NormJson::L1 => Ok(Self::l1(arity)),
            NormJson::Linf => Ok(Self::linf(arity)),
            NormJson::Lp { p } => Self::lp(*p, arity),
            NormJson::Top { ell } => Self::top(*ell, arity),
            NormJson::Ordered { weights } => Self::ordered(weights.clone(), arity),
        }
    }

    pub fn from_json_value(v: &Value, arity: usize) -> Result<Self> {
        let j: NormJson = serde_json::from_value(v.clone())?;
        Self::from_json(&j, arity)
    }

    pub fn to_json(&self) -> Option<NormJson> {
        Some(match &self.kind {
            NormKind::L1 => NormJson::L1,
            NormKind::Linf => NormJson::Linf,
            NormKind::Lp(p) => NormJson::Lp { p: *p },
            NormKind::Top(l) => NormJson::Top { ell: *l },
            NormKind::Ordered(w) => NormJson::Ordered { weights: w.clone() },
            NormKind::Oracle { .. } => return None,
        })
    }

    /// Same family at a different arity.
    pub fn with_arity(&self, arity: usize) -> Result<Self> {
        match &self.kind {
            NormKind::Top(l) => Self::top(*l, arity),
            NormKind::Ordered(w) => Self::ordered(w.clone(), arity),
            NormKind::Oracle { .. } if arity != self.arity => {
                Err(Error::domain("oracle norms have a fixed arity"))
            }
            kind => Ok(NormSpec { kind: kind.clone(), arity }),
        }
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Short label used in tables.
    pub fn label(&self) -> String {
        match &self.kind {
            NormKind::L1 => "l1".into(),
            NormKind::Linf => "linf".into(),
            NormKind::Lp(p) => format!("l{p}"),
            NormKind::Top(l) => format!("top{l}"),
            NormKind::Ordered(w) => {
                let ws: Vec<String> = w.iter().map(|v| format!("{v}")).collect();
                format!("ord[{}]", ws.join(" "))
            }
            NormKind::Oracle { name, .. } => name.clone(),
        }
    }

    /// Weights when the norm is exactly an ordered norm.
    pub fn ordered_weights(&self) -> Option<Vec<f64>> {
        let d = self.arity;
        match &self.kind {
            NormKind::L1 => Some(vec![1.0; d]),
            NormKind::Lp(p) if *p == 1.0 => Some(vec![1.0; d]),
            NormKind::Linf => {
                let mut w = vec![0.0; d];
                if d > 0 {
                    w[0] = 1.0;
                }
                Some(w)
            }
            NormKind::Top(l) => Some((0..d).map(|i| if i < *l { 1.0 } else { 0.0 }).collect()),
            NormKind::Ordered(w) => Some(w.clone()),
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arity {
            return Err(Error::domain(format!("vector length {} != arity {}", x.len(), self.arity)));
        }
        if x.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::domain("norm arguments must be nonnegative"));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kind {
            NormKind::L1 => x.iter().sum(),
            NormKind::Linf => x.iter().copied().fold(0.0, f64::max),
            NormKind::Lp(p) => {
                let m = x.iter().copied().fold(0.0, f64::max);
                if m == 0.0 {
                    return 0.0;
                }
                m * x.iter().map(|v| (v / m).powf(*p)).sum::<f64>().powf(1.0 / p)
            }
            NormKind::Top(l) => sorted_desc(x).iter().take(*l).sum(),
            NormKind::Ordered(w) => sorted_desc(x).iter().zip(w).map(|(a, b)| a * b).sum(),
            NormKind::Oracle { eval, .. } => eval(x),
        }
    }

    /// Value on the all-ones vector.
    pub fn at_ones(&self) -> f64 {
        self.eval_unchecked(&vec![1.0; self.arity])
    }

    /// Value on the first unit vector.
    pub fn at_unit(&self) -> f64 {
        let mut e = vec![0.0; self.arity];
        if self.arity > 0 {
            e[0] = 1.0;
        }
        self.eval_unchecked(&e)
    }
}

/// `ell * y + sum (x_i - y)^+`, an upper bound on top-ell that is tight at `y = x_(ell)`.
pub fn proxy_top(y: f64, x: &[f64], ell: usize) -> Result<f64> {
    if !(y >= 0.0) {
        return Err(Error::domain("threshold must be nonnegative"));
    }
    if ell == 0 || ell > x.len() {
        return Err(Error::domain(format!("ell = {ell} outside 1..={}", x.len())));
    }
    if x.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::domain("vector must be nonnegative"));
    }
    Ok(ell as f64 * y + x.iter().map(|v| (v - y).max(0.0)).sum::<f64>())
}

/// Weighted combination of top-ell proxies with per-level thresholds `t`.
pub fn proxy_ordered(x: &[f64], w: &[f64], t: &[f64]) -> Result<f64> {
    let d = x.len();
    if w.len() != d || t.len() != d {
        return Err(Error::domain("x, w and t must have equal length"));
    }
    check_weights(w)?;
    check_weights(t).map_err(|_| Error::domain("thresholds must be non-increasing and nonnegative"))?;
    let mut total = 0.0;
    for i in 0..d {
        let gap = w[i] - if i + 1 < d { w[i + 1] } else { 0.0 };
        if gap > 0.0 {
            total += gap * proxy_top(t[i], x, i + 1)?;
        }
    }
    Ok(total)
}

/// `(log h(1) - log h(e_1)) / log d`, in `[0,1]`.
pub fn attenuation(norm: &NormSpec) -> Result<f64> {
    let d = norm.arity();
    if d < 2 {
        return Err(Error::domain("attenuation needs arity d >= 2"));
    }
    let ones = norm.at_ones();
    let unit = norm.at_unit();
    if !(ones > 0.0 && unit > 0.0) {
        return Err(Error::NotANorm(format!("{} vanishes on a nonzero vector", norm.label())));
    }
    if let NormKind::Top(l) = norm.kind() {
        return Ok((*l as f64).log2() / (d as f64).log2());
    }
    Ok((ones.log2() - unit.log2()) / (d as f64).log2())
}

/// `(|v|_1 / d * h(1), |v|_inf * h(1))`, which bracket `h(v)`.
pub fn sandwich_bounds(norm: &NormSpec, v: &[f64]) -> Result<(f64, f64)> {
    if v.len() != norm.arity() || v.iter().any(|&c| !(c >= 0.0)) {
        return Err(Error::domain("vector must be nonnegative with the norm's arity"));
    }
    let h1 = norm.at_ones();
    let l1: f64 = v.iter().sum();
    let linf = v.iter().copied().fold(0.0, f64::max);
    Ok((l1 / norm.arity() as f64 * h1, linf * h1))
}

/// Ordered norm agreeing with a symmetric norm on all prefix-ones vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderedSurrogate {
    pub weights: Vec<f64>,
    /// Largest observed ratio between the surrogate and the source, both ways.
    pub distortion_bound: f64,
}

impl OrderedSurrogate {
    pub fn norm(&self) -> NormSpec {
        NormSpec { kind: NormKind::Ordered(self.weights.clone()), arity: self.weights.len() }
    }
}

/// Gap weights `w_i = h(1^i) - h(1^(i-1))` plus an empirical distortion estimate.
pub fn ordered_surrogate(norm: &NormSpec) -> Result<OrderedSurrogate> {
    let d = norm.arity();
    if d == 0 {
        return Err(Error::domain("arity must be positive"));
    }
    if let Some(weights) = norm.ordered_weights() {
        return Ok(OrderedSurrogate { weights, distortion_bound: 1.0 });
    }
    let mut prefix = vec![0.0; d + 1];
    let mut v = vec![0.0; d];
    for j in 1..=d {
        v[j - 1] = 1.0;
        prefix[j] = norm.eval_unchecked(&v);
    }
    let mut weights: Vec<f64> = (0..d).map(|i| prefix[i + 1] - prefix[i]).collect();
    let scale = prefix[d].abs().max(1.0);
    for i in 0..d {
        if weights[i] < -1e-12 * scale {
            return Err(Error::NotANorm(format!("prefix values of {} decrease at {}", norm.label(), i + 1)));
        }
        if i > 0 && weights[i] > weights[i - 1] + 1e-12 * scale {
            return Err(Error::NotANorm(format!(
                "prefix values of {} are not concave at {}",
                norm.label(),
                i + 1
            )));
        }
        weights[i] = weights[i].max(0.0);
        if i > 0 {
            weights[i] = weights[i].min(weights[i - 1]);
        }
    }
    let surrogate = NormSpec { kind: NormKind::Ordered(weights.clone()), arity: d };
    let mut worst = 1.0f64;
    for x in distortion_corpus(d) {
        let h = norm.eval_unchecked(&x);
        let o = surrogate.eval_unchecked(&x);
        if h > 0.0 && o > 0.0 {
            worst = worst.max(h / o).max(o / h);
        }
    }
    Ok(OrderedSurrogate { weights, distortion_bound: worst })
}

fn distortion_corpus(d: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for j in 1..=d {
        out.push((0..d).map(|i| if i < j { 1.0 } else { 0.0 }).collect());
    }
    out.push((0..d).map(|i| 0.5f64.powi(i as i32)).collect());
    out.push((0..d).map(|i| 1.0 / (i + 1) as f64).collect());
    out.push((0..d).map(|i| 1.0 / ((i + 1) as f64).sqrt()).collect());
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..512 {
        let sparse = rng.gen_bool(0.3);
        out.push(
            (0..d)
                .map(|_| if sparse && rng.gen_bool(0.6) { 0.0 } else { rng.gen::<f64>().powi(3) })
                .collect(),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_examples() {
        assert_eq!(NormSpec::top(2, 3).unwrap().eval(&[3.0, 1.0, 2.0]).unwrap(), 5.0);
        let ord = NormSpec::ordered(vec![2.0, 1.0, 1.0], 3).unwrap();
        assert_eq!(ord.eval(&[1.0, 3.0, 2.0]).unwrap(), 9.0);
        for n in [NormSpec::l1(3), NormSpec::linf(3), NormSpec::lp(3.0, 3).unwrap(), ord] {
            assert_eq!(n.eval(&[0.0; 3]).unwrap(), 0.0);
        }
        assert!(NormSpec::l1(2).eval(&[1.0, -1.0]).is_err());
        assert!(NormSpec::l1(2).eval(&[1.0]).is_err());
    }

    #[test]
    fn construction_errors() {
        assert!(NormSpec::top(0, 3).is_err());
        assert!(NormSpec::top(4, 3).is_err());
        assert!(NormSpec::lp(0.5, 3).is_err());
        assert!(NormSpec::ordered(vec![1.0, 2.0], 2).is_err());
        assert!(NormSpec::ordered(vec![1.0, 1.0, 1.0], 2).is_err());
        assert_eq!(NormSpec::ordered(vec![2.0], 3).unwrap().ordered_weights().unwrap(), vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn proxy_top_examples() {
        let x = [3.0, 1.0, 2.0];
        assert_eq!(proxy_top(2.0, &x, 2).unwrap(), 5.0);
        assert_eq!(proxy_top(0.0, &x, 2).unwrap(), 6.0);
        assert_eq!(proxy_top(10.0, &x, 2).unwrap(), 20.0);
        assert!(proxy_top(-1.0, &x, 2).is_err());
    }

    #[test]
    fn proxy_ordered_examples() {
        assert_eq!(proxy_ordered(&[3.0, 1.0], &[2.0, 1.0], &[3.0, 1.0]).unwrap(), 7.0);
        assert_eq!(proxy_ordered(&[3.0, 1.0], &[2.0, 1.0], &[0.0, 0.0]).unwrap(), 8.0);
        assert_eq!(proxy_ordered(&[3.0, 1.0], &[0.0, 0.0], &[5.0, 0.0]).unwrap(), 0.0);
        assert!(proxy_ordered(&[3.0, 1.0], &[1.0, 2.0], &[0.0, 0.0]).is_err());
        assert!(proxy_ordered(&[3.0, 1.0], &[2.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn attenuation_values() {
        for d in [2, 4, 8, 16] {
            assert_eq!(attenuation(&NormSpec::l1(d)).unwrap(), 1.0);
            assert_eq!(attenuation(&NormSpec::linf(d)).unwrap(), 0.0);
        }
        let l2 = attenuation(&NormSpec::lp(2.0, 4).unwrap()).unwrap();
        assert!((l2 - 0.5).abs() < 1e-12);
        assert_eq!(attenuation(&NormSpec::top(2, 4).unwrap()).unwrap(), 0.5);
        assert!(attenuation(&NormSpec::l1(1)).is_err());
    }

    #[test]
    fn sandwich_examples() {
        let l2 = NormSpec::lp(2.0, 4).unwrap();
        let (lo, hi) = sandwich_bounds(&l2, &[2.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 4.0).abs() < 1e-12);
        let (lo, hi) = sandwich_bounds(&l2, &[3.0; 4]).unwrap();
        assert!((lo - hi).abs() < 1e-12 && (lo - 6.0).abs() < 1e-12);
        assert_eq!(sandwich_bounds(&l2, &[0.0; 4]).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn surrogate_examples() {
        assert_eq!(ordered_surrogate(&NormSpec::l1(3)).unwrap().weights, vec![1.0; 3]);
        assert_eq!(ordered_surrogate(&NormSpec::linf(3)).unwrap().weights, vec![1.0, 0.0, 0.0]);
        let s = ordered_surrogate(&NormSpec::lp(2.0, 4).unwrap()).unwrap();
        let s2 = 2f64.sqrt();
        let s3 = 3f64.sqrt();
        let want = [1.0, s2 - 1.0, s3 - s2, 2.0 - s3];
        for (a, b) in s.weights.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(s.distortion_bound >= 1.0 && s.distortion_bound < 2.0);
    }

    #[test]
    fn surrogate_rejects_convex_prefixes() {
        // (sum of squares)^2 has prefix values 1, 4, 9
        let sq = NormSpec::oracle("sq", 3, Arc::new(|x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().powi(2)));
        assert!(matches!(ordered_surrogate(&sq), Err(Error::NotANorm(_))));
    }

    #[test]
    fn json_forms() {
        let v: Value = serde_json::from_str(r#"{"type":"top","ell":2}"#).unwrap();
        assert_eq!(NormSpec::from_json_value(&v, 4).unwrap().label(), "top2");
        let v: Value = serde_json::from_str(r#"{"type":"lp","p":3}"#).unwrap();
        assert_eq!(NormSpec::from_json_value(&v, 4).unwrap().label(), "l3");
        let v: Value = serde_json::from_str(r#"{"type":"ordered","weights":[2,1]}"#).unwrap();
        let n = NormSpec::from_json_value(&v, 3).unwrap();
        assert_eq!(n.to_json().unwrap(), NormJson::Ordered { weights: vec![2.0, 1.0, 0.0] });
        let v: Value = serde_json::from_str(r#"{"type":"nope"}"#).unwrap();
        assert!(NormSpec::from_json_value(&v, 3).is_err());
    }
}
