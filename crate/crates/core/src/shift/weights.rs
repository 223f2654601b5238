use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::special::inverse_square_sum;
use crate::tree::{Family, TreeModel, VertexId};

/// Weight rule for the non-root vertices of a tree.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightRule {
    /// Explicit values; `default` covers every vertex not listed.
    Map {
        values: BTreeMap<VertexId, f64>,
        default: Option<f64>,
    },
    Constant(f64),
    /// `exp(−scale·ratio^ℓ)` at level `ℓ ≥ start` (every level when `start` is
    /// `None`), 1 above `start`.
    Geometric {
        scale: f64,
        ratio: f64,
        start: Option<i64>,
    },
    /// `exp(−scale/(|ℓ−center|+1)²)` at level `ℓ`. On the binary tree the spine
    /// carries these values, the off-spine sibling of spine vertex `ℓ` gets
    /// `sqrt(1 − λ_ℓ²)` and every other vertex `1/√2`, which makes the shift
    /// an isometry.
    ExpRay {
        scale: f64,
        center: i64,
    },
    /// Separate rules for the integer spine and the primed ray of a fork tree.
    Rays {
        unprimed: Box<WeightRule>,
        primed: Box<WeightRule>,
    },
}

/// One of the two rays of a fork tree; paths only have the unprimed one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ray {
    Unprimed,
    Primed,
}

impl Ray {
    pub fn vertex(self, level: i64) -> VertexId {
        match self {
            Ray::Unprimed => VertexId::Int(level),
            Ray::Primed => VertexId::Primed(level as u64),
        }
    }

    fn level_of(self, v: &VertexId) -> Option<i64> {
        match (self, v) {
            (Ray::Unprimed, VertexId::Int(n)) => Some(*n),
            (Ray::Primed, VertexId::Primed(k)) => Some(*k as i64),
            _ => None,
        }
    }
}

fn in_range(l: i64, lo: Option<i64>, hi: Option<i64>) -> bool {
    lo.is_none_or(|a| l >= a) && hi.is_none_or(|b| l <= b)
}

fn range_count(lo: Option<i64>, hi: Option<i64>) -> Option<u64> {
    match (lo, hi) {
        (Some(a), Some(b)) => Some(if b < a { 0 } else { (b - a + 1) as u64 }),
        _ => None,
    }
}

fn is_empty_range(lo: Option<i64>, hi: Option<i64>) -> bool {
    matches!((lo, hi), (Some(a), Some(b)) if b < a)
}

/// `count · x`, with `count = None` meaning infinitely many.
fn repeat_log(x: f64, count: Option<u64>) -> f64 {
    match count {
        Some(n) => n as f64 * x,
        None if x == 0.0 => 0.0,
        None => x * f64::INFINITY,
    }
}

impl WeightRule {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::WeightRule(m));
        match self {
            WeightRule::Map { values, default } => {
                for (v, x) in values {
                    if !(x.is_finite() && *x > 0.0) {
                        return Err(Error::NonPositiveWeight { vertex: v.clone(), value: *x });
                    }
                }
                if let Some(d) = default {
                    if !(d.is_finite() && *d > 0.0) {
                        return bad(format!("default weight must be positive, got {d}"));
                    }
                }
            }
            WeightRule::Constant(c) => {
                if !(c.is_finite() && *c > 0.0) {
                    return bad(format!("constant weight must be positive, got {c}"));
                }
            }
            WeightRule::Geometric { scale, ratio, .. } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return bad(format!("geometric scale must be >= 0, got {scale}"));
                }
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return bad(format!("geometric ratio must lie in (0,1), got {ratio}"));
                }
            }
            WeightRule::ExpRay { scale, .. } => {
                if !(scale.is_finite() && *scale >= 0.0) {
                    return bad(format!("exp-ray scale must be >= 0, got {scale}"));
                }
            }
            WeightRule::Rays { unprimed, primed } => {
                for r in [unprimed, primed] {
                    if matches!(**r, WeightRule::Rays { .. }) {
                        return bad("ray rules cannot be nested".into());
                    }
                    r.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Rule in force on `ray`.
    pub fn on_ray(&self, ray: Ray) -> &WeightRule {
        match (self, ray) {
            (WeightRule::Rays { unprimed, .. }, Ray::Unprimed) => unprimed,
            (WeightRule::Rays { primed, .. }, Ray::Primed) => primed,
            _ => self,
        }
    }

    pub fn value(&self, model: &TreeModel, v: &VertexId) -> Result<f64> {
        match self {
            WeightRule::Map { values, default } => {
                values.get(v).copied().or(*default).ok_or_else(|| Error::MissingWeight(v.clone()))
            }
            WeightRule::Constant(c) => Ok(*c),
            WeightRule::Geometric { .. } => Ok(self.level_value(model.level(v)?)),
            WeightRule::ExpRay { scale, center } => {
                if model.family() == Some(&Family::RootlessBinary) {
                    model.level(v)?;
                    Ok(match v {
                        VertexId::Int(l) => exp_ray(*scale, *center, *l),
                        VertexId::Branch { spine, len: 1, .. } => {
                            let b = exp_ray(*scale, *center, spine + 1);
                            (1.0 - b * b).sqrt()
                        }
                        _ => std::f64::consts::FRAC_1_SQRT_2,
                    })
                } else {
                    Ok(self.level_value(model.level(v)?))
                }
            }
            WeightRule::Rays { unprimed, primed } => match v {
                VertexId::Int(_) => unprimed.value(model, v),
                VertexId::Primed(_) => primed.value(model, v),
                _ => Err(Error::WeightRule(format!("ray rule has no value at {v}"))),
            },
        }
    }

    /// Value of a level-based rule; maps and ray rules are not level-based.
    fn level_value(&self, l: i64) -> f64 {
        match self {
            WeightRule::Constant(c) => *c,
            WeightRule::Geometric { scale, ratio, start } => {
                if start.is_none_or(|s| l >= s) {
                    (-scale * ratio.powf(l as f64)).exp()
                } else {
                    1.0
                }
            }
            WeightRule::ExpRay { scale, center } => exp_ray(*scale, *center, l),
            WeightRule::Map { .. } | WeightRule::Rays { .. } => unreachable!("not level-based"),
        }
    }

    /// Weight of the ray vertex at `level`, without consulting a model.
    pub fn ray_value(&self, ray: Ray, level: i64) -> Option<f64> {
        match self.on_ray(ray) {
            WeightRule::Map { values, default } => values.get(&ray.vertex(level)).copied().or(*default),
            r => Some(r.level_value(level)),
        }
    }

    /// `Σ_{ℓ=lo}^{hi} ln λ²` along `ray`; `None` bounds are infinite. The
    /// result may be `−∞`. `None` when the rule gives no closed form.
    pub fn ray_log_sq_sum(&self, ray: Ray, lo: Option<i64>, hi: Option<i64>) -> Option<f64> {
        if is_empty_range(lo, hi) {
            return Some(0.0);
        }
        match self.on_ray(ray) {
            WeightRule::Constant(c) => Some(repeat_log(2.0 * c.ln(), range_count(lo, hi))),
            WeightRule::Geometric { scale, ratio, start } => {
                let lo = match (lo, start) {
                    (Some(a), Some(s)) => Some(a.max(*s)),
                    (None, s) => *s,
                    (a, None) => a,
                };
                if is_empty_range(lo, hi) || *scale == 0.0 {
                    return Some(0.0);
                }
                let Some(a) = lo else { return Some(f64::NEG_INFINITY) };
                let head = ratio.powf(a as f64);
                let sum = match hi {
                    Some(b) => head * (1.0 - ratio.powf((b - a + 1) as f64)) / (1.0 - ratio),
                    None => head / (1.0 - ratio),
                };
                Some(-2.0 * scale * sum)
            }
            WeightRule::ExpRay { scale, center } => {
                if *scale == 0.0 {
                    return Some(0.0);
                }
                let a = lo.map(|x| x - center);
                let b = hi.map(|x| x - center);
                let mut total = 0.0;
                // offsets m ≥ 0
                if b.is_none_or(|b| b >= 0) {
                    total += inverse_square_sum(a.map_or(0, |a| a.max(0)), b);
                }
                // offsets m ≤ −1, summed as |m|
                if a.is_none_or(|a| a <= -1) {
                    let near = b.map_or(1, |b| (-b).max(1));
                    total += inverse_square_sum(near, a.map(|a| -a));
                }
                Some(-2.0 * scale * total)
            }
            WeightRule::Map { values, default } => {
                let mut sum = 0.0;
                let mut listed = 0u64;
                for (v, x) in values {
                    if let Some(l) = ray.level_of(v) {
                        if in_range(l, lo, hi) {
                            sum += 2.0 * x.ln();
                            listed += 1;
                        }
                    }
                }
                let rest = range_count(lo, hi).map(|n| n - listed);
                match (default, rest) {
                    (_, Some(0)) => Some(sum),
                    (Some(d), rest) => Some(sum + repeat_log(2.0 * d.ln(), rest)),
                    (None, _) => None,
                }
            }
            WeightRule::Rays { .. } => unreachable!("resolved by on_ray"),
        }
    }

    /// `sup λ` along `ray` over `[lo, hi]`; 0 for an empty range.
    pub fn ray_sup(&self, ray: Ray, lo: Option<i64>, hi: Option<i64>) -> Option<f64> {
        if is_empty_range(lo, hi) {
            return Some(0.0);
        }
        match self.on_ray(ray) {
            WeightRule::Constant(c) => Some(*c),
            r @ WeightRule::Geometric { start, .. } => {
                // nondecreasing in ℓ, 1 above start
                match hi {
                    Some(b) if !start.is_some_and(|s| lo.is_none_or(|a| a < s)) => Some(r.level_value(b)),
                    _ => Some(1.0),
                }
            }
            r @ WeightRule::ExpRay { center, .. } => match (lo, hi) {
                (Some(a), Some(b)) => {
                    let far = if (a - center).abs() >= (b - center).abs() { a } else { b };
                    Some(r.level_value(far))
                }
                _ => Some(1.0),
            },
            WeightRule::Map { values, default } => {
                let mut sup: f64 = 0.0;
                let mut listed = 0u64;
                for (v, x) in values {
                    if let Some(l) = ray.level_of(v) {
                        if in_range(l, lo, hi) {
                            sup = sup.max(*x);
                            listed += 1;
                        }
                    }
                }
                let rest = range_count(lo, hi).map(|n| n - listed);
                match (default, rest) {
                    (_, Some(0)) => Some(sup),
                    (Some(d), _) => Some(sup.max(*d)),
                    (None, _) => None,
                }
            }
            WeightRule::Rays { .. } => unreachable!("resolved by on_ray"),
        }
    }

    /// Whether `λ_{k'} = λ_k` for every `k ≥ 1` on a fork tree.
    pub fn rays_agree(&self) -> bool {
        match self {
            WeightRule::Rays { unprimed, primed } => {
                matches!(
                    (&**unprimed, &**primed),
                    (a, b) if a == b && !matches!(a, WeightRule::Map { .. })
                )
            }
            WeightRule::Map { values, default } => values.iter().all(|(v, x)| {
                let twin = match v {
                    VertexId::Int(n) if *n >= 1 => VertexId::Primed(*n as u64),
                    VertexId::Primed(k) => VertexId::Int(*k as i64),
                    _ => return true,
                };
                values.get(&twin).copied().or(*default) == Some(*x)
            }),
            _ => true,
        }
    }
}

impl WeightRule {
    /// Whether `λ_{k'} = λ_k` for every `k > level` on a fork tree.
    pub fn rays_agree_beyond(&self, level: i64) -> bool {
        let beyond = |v: &VertexId| match v {
            VertexId::Int(n) => *n > level,
            VertexId::Primed(k) => *k as i64 > level,
            _ => false,
        };
        match self {
            WeightRule::Rays { unprimed, primed } => match (&**unprimed, &**primed) {
                (WeightRule::Map { values: a, default: da }, WeightRule::Map { values: b, default: db }) => {
                    da.is_some() && da == db && !a.keys().chain(b.keys()).any(beyond)
                }
                (a, b) => a == b && !matches!(a, WeightRule::Map { .. }),
            },
            WeightRule::Map { values, default } => values.iter().filter(|(v, _)| beyond(v)).all(|(v, x)| {
                let twin = match v {
                    VertexId::Int(n) => VertexId::Primed(*n as u64),
                    VertexId::Primed(k) => VertexId::Int(*k as i64),
                    _ => return true,
                };
                values.get(&twin).copied().or(*default) == Some(*x)
            }),
            _ => true,
        }
    }
}

fn exp_ray(scale: f64, center: i64, l: i64) -> f64 {
    let d = ((l - center).abs() + 1) as f64;
    (-scale / (d * d)).exp()
}

/// JSON form of a weight rule.
#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightSpec {
    Map {
        values: BTreeMap<String, f64>,
        #[serde(default)]
        default: Option<f64>,
    },
    Constant {
        value: f64,
    },
    Family {
        name: String,
        #[serde(default)]
        params: serde_json::Value,
    },
    Rays {
        unprimed: Box<WeightSpec>,
        primed: Box<WeightSpec>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometricParams {
    #[serde(default = "one")]
    scale: f64,
    ratio: f64,
    #[serde(default)]
    start: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExpRayParams {
    #[serde(default = "one")]
    scale: f64,
    #[serde(default)]
    center: i64,
}

fn one() -> f64 {
    1.0
}

fn params<T: for<'de> Deserialize<'de>>(name: &str, v: &serde_json::Value) -> Result<T> {
    let v = if v.is_null() { serde_json::Value::Object(Default::default()) } else { v.clone() };
    serde_json::from_value(v).map_err(|e| Error::WeightRule(format!("{name} params: {e}")))
}

impl WeightSpec {
    pub fn into_rule(self) -> Result<WeightRule> {
        let rule = match self {
            WeightSpec::Map { values, default } => WeightRule::Map {
                values: values.into_iter().map(|(k, x)| (VertexId::from(k.as_str()), x)).collect(),
                default,
            },
            WeightSpec::Constant { value } => WeightRule::Constant(value),
            WeightSpec::Family { name, params: p } => match name.as_str() {
                "geometric" => {
                    let g: GeometricParams = params(&name, &p)?;
                    WeightRule::Geometric { scale: g.scale, ratio: g.ratio, start: g.start }
                }
                "exp-ray" => {
                    let e: ExpRayParams = params(&name, &p)?;
                    WeightRule::ExpRay { scale: e.scale, center: e.center }
                }
                other => return Err(Error::WeightRule(format!("unknown weight family {other:?}"))),
            },
            WeightSpec::Rays { unprimed, primed } => {
                WeightRule::Rays { unprimed: Box::new(unprimed.into_rule()?), primed: Box::new(primed.into_rule()?) }
            }
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn parse(json: &str) -> Result<WeightRule> {
        let spec: WeightSpec = serde_json::from_str(json).map_err(|e| Error::Input(format!("weight spec: {e}")))?;
        spec.into_rule()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(rule: &WeightRule, ray: Ray, lo: i64, hi: i64) -> f64 {
        (lo..=hi).map(|l| 2.0 * rule.ray_value(ray, l).unwrap().ln()).sum()
    }

    #[test]
    fn log_sums_match_direct_summation() {
        let rules = [
            WeightRule::Constant(0.8),
            WeightRule::Geometric { scale: 0.7, ratio: 0.6, start: Some(2) },
            WeightRule::Geometric { scale: 0.3, ratio: 0.9, start: None },
            WeightRule::ExpRay { scale: 1.3, center: 4 },
            WeightRule::Map {
                values: [(VertexId::Int(3), 0.5), (VertexId::Int(-2), 0.25)].into_iter().collect(),
                default: Some(0.9),
            },
        ];
        for r in &rules {
            for (lo, hi) in [(-7, 9), (1, 1), (5, 40), (-30, -2)] {
                let got = r.ray_log_sq_sum(Ray::Unprimed, Some(lo), Some(hi)).unwrap();
                let want = direct(r, Ray::Unprimed, lo, hi);
                assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()), "{r:?} {lo}..{hi}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn infinite_tails() {
        let g = WeightRule::Geometric { scale: 1.0, ratio: 0.5, start: Some(1) };
        // Σ_{ℓ≥1} −2·2^{−ℓ} = −2
        assert!((g.ray_log_sq_sum(Ray::Unprimed, Some(1), None).unwrap() + 2.0).abs() < 1e-15);
        assert_eq!(g.ray_log_sq_sum(Ray::Unprimed, None, Some(0)).unwrap(), 0.0);
        let g = WeightRule::Geometric { scale: 1.0, ratio: 0.5, start: None };
        assert_eq!(g.ray_log_sq_sum(Ray::Unprimed, None, Some(0)).unwrap(), f64::NEG_INFINITY);

        let e = WeightRule::ExpRay { scale: 1.0, center: 0 };
        let tail: f64 = (1..200_000).map(|l| -2.0 / ((l + 1) as f64).powi(2)).sum();
        let got = e.ray_log_sq_sum(Ray::Unprimed, Some(1), None).unwrap();
        assert!((got - tail).abs() < 1e-5, "{got} {tail}");
        let both = e.ray_log_sq_sum(Ray::Unprimed, None, None).unwrap();
        let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((both - (-2.0 * (2.0 * pi2_6 - 1.0))).abs() < 1e-13);

        assert_eq!(WeightRule::Constant(1.0).ray_log_sq_sum(Ray::Unprimed, None, Some(3)), Some(0.0));
        assert_eq!(WeightRule::Constant(0.5).ray_log_sq_sum(Ray::Unprimed, Some(0), None), Some(f64::NEG_INFINITY));
        let m = WeightRule::Map { values: BTreeMap::new(), default: None };
        assert_eq!(m.ray_log_sq_sum(Ray::Unprimed, Some(0), None), None);
    }

    #[test]
    fn sups() {
        let e = WeightRule::ExpRay { scale: 1.0, center: 0 };
        assert_eq!(e.ray_sup(Ray::Unprimed, Some(-2), Some(1)), Some((-1.0f64 / 9.0).exp()));
        assert_eq!(e.ray_sup(Ray::Unprimed, Some(0), None), Some(1.0));
        let g = WeightRule::Geometric { scale: 1.0, ratio: 0.5, start: Some(3) };
        assert_eq!(g.ray_sup(Ray::Unprimed, Some(4), Some(6)), Some((-(0.5f64.powi(6))).exp()));
        assert_eq!(g.ray_sup(Ray::Unprimed, Some(1), Some(6)), Some(1.0));
    }

    #[test]
    fn json_specs() {
        let r = WeightSpec::parse(r#"{"kind":"map","values":{"a":0.6,"3'":0.8}}"#).unwrap();
        let WeightRule::Map { values, default: None } = r else { panic!() };
        assert_eq!(values[&VertexId::Primed(3)], 0.8);
        let r = WeightSpec::parse(r#"{"kind":"constant","value":0.625}"#).unwrap();
        assert_eq!(r, WeightRule::Constant(0.625));
        let r = WeightSpec::parse(r#"{"kind":"family","name":"exp-ray","params":{}}"#).unwrap();
        assert_eq!(r, WeightRule::ExpRay { scale: 1.0, center: 0 });
        let r = WeightSpec::parse(r#"{"kind":"family","name":"geometric","params":{"ratio":0.5,"start":1}}"#).unwrap();
        assert_eq!(r, WeightRule::Geometric { scale: 1.0, ratio: 0.5, start: Some(1) });
        assert!(WeightSpec::parse(r#"{"kind":"constant","value":0}"#).is_err());
        assert!(WeightSpec::parse(r#"{"kind":"family","name":"geometric","params":{"ratio":2}}"#).is_err());
        assert!(WeightSpec::parse(r#"{"kind":"family","name":"zeta","params":{}}"#).is_err());
        let r = WeightSpec::parse(
            r#"{"kind":"rays","unprimed":{"kind":"constant","value":0.5},"primed":{"kind":"constant","value":1}}"#,
        )
        .unwrap();
        assert_eq!(r.ray_value(Ray::Primed, 4), Some(1.0));
        assert!(!r.rays_agree());
    }
}
