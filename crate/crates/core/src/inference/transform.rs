use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Support of a single parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    /// (0, 1), mapped through log-odds.
    UnitInterval,
    /// (0, inf), mapped through the natural log.
    Positive,
    /// (lo, hi), mapped through scaled log-odds.
    Interval {
        lo: f64,
        hi: f64,
    },
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub bound: Bound,
}

/// Ordered parameter layout. Position in the list is the index into the
/// flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    params: Vec<ParamDef>,
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl ParamSpec {
    pub fn new(params: Vec<ParamDef>) -> Result<Self> {
        for p in &params {
            if let Bound::Interval { lo, hi } = p.bound {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "bounds for {} are not well ordered: ({lo}, {hi})",
                        p.name
                    )));
                }
            }
        }
        Ok(Self { params })
    }

    /// Convenience constructor from `(name, bound)` pairs.
    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, Bound)>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(name, bound)| ParamDef {
                    name: name.into(),
                    bound,
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[ParamDef] {
        &self.params
    }

    pub fn names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    fn check_len(&self, n: usize) -> Result<()> {
        if n == self.len() {
            Ok(())
        } else {
            Err(Error::LengthMismatch(self.len(), n))
        }
    }

    /// Maps a constrained point to R^n.
    pub fn to_unconstrained(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        self.params
            .iter()
            .zip(x)
            .map(|(p, &v)| {
                let oob = || Error::OutOfBounds {
                    name: p.name.clone(),
                    value: v,
                };
                match p.bound {
                    Bound::UnitInterval if v > 0.0 && v < 1.0 => Ok(logit(v)),
                    Bound::Positive if v > 0.0 && v.is_finite() => Ok(v.ln()),
                    Bound::Interval { lo, hi } if v > lo && v < hi => Ok(logit((v - lo) / (hi - lo))),
                    Bound::Unbounded if v.is_finite() => Ok(v),
                    _ => Err(oob()),
                }
            })
            .collect()
    }

    /// Inverse of [`to_unconstrained`](Self::to_unconstrained).
    pub fn from_unconstrained(&self, u: &[f64]) -> Vec<f64> {
        self.params
            .iter()
            .zip(u)
            .map(|(p, &v)| match p.bound {
                Bound::UnitInterval => sigmoid(v),
                Bound::Positive => v.exp(),
                Bound::Interval { lo, hi } => lo + (hi - lo) * sigmoid(v),
                Bound::Unbounded => v,
            })
            .collect()
    }

    /// `sum_i ln |d x_i / d u_i|` for the inverse transform.
    pub fn log_jacobian(&self, u: &[f64]) -> f64 {
        self.params
            .iter()
            .zip(u)
            .map(|(p, &v)| match p.bound {
                Bound::UnitInterval => -softplus(v) - softplus(-v),
                Bound::Positive => v,
                Bound::Interval { lo, hi } => (hi - lo).ln() - softplus(v) - softplus(-v),
                Bound::Unbounded => 0.0,
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec() -> ParamSpec {
        ParamSpec::from_pairs([
            ("a", Bound::UnitInterval),
            ("b", Bound::Positive),
            ("c", Bound::Interval { lo: 2.0, hi: 40.0 }),
            ("d", Bound::Unbounded),
        ])
        .unwrap()
    }

    #[test]
    fn symmetry_points() {
        let s = ParamSpec::from_pairs([("p", Bound::UnitInterval)]).unwrap();
        assert_eq!(s.to_unconstrained(&[0.5]).unwrap(), vec![0.0]);
        assert!((s.log_jacobian(&[0.0]) - 0.25f64.ln()).abs() < 1e-15);
        let s = ParamSpec::from_pairs([("p", Bound::Positive)]).unwrap();
        assert_eq!(s.to_unconstrained(&[1.0]).unwrap(), vec![0.0]);
        assert_eq!(s.log_jacobian(&[0.0]), 0.0);
    }

    #[test]
    fn rejects_out_of_bounds() {
        let s = spec();
        assert!(matches!(
            s.to_unconstrained(&[1.0, 1.0, 3.0, 0.0]),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(
            s.to_unconstrained(&[0.5, 0.0, 3.0, 0.0]),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(matches!(
            s.to_unconstrained(&[0.5, 1.0, 41.0, 0.0]),
            Err(Error::OutOfBounds { .. })
        ));
        assert!(ParamSpec::from_pairs([("x", Bound::Interval { lo: 1.0, hi: 1.0 })]).is_err());
    }

    #[test]
    fn jacobian_is_additive() {
        let s = spec();
        let u = [0.3, -1.2, 2.0, 5.0];
        let total = s.log_jacobian(&u);
        let parts: f64 = s
            .params()
            .iter()
            .zip(u)
            .map(|(p, v)| ParamSpec::new(vec![p.clone()]).unwrap().log_jacobian(&[v]))
            .sum();
        assert!((total - parts).abs() < 1e-14);
    }

    #[test]
    fn jacobian_matches_finite_difference() {
        let s = spec();
        let u = [0.7, -0.4, -1.1, 2.2];
        let h = 1e-6;
        let fd: f64 = (0..4)
            .map(|i| {
                let mut up = u;
                let mut dn = u;
                up[i] += h;
                dn[i] -= h;
                ((s.from_unconstrained(&up)[i] - s.from_unconstrained(&dn)[i]) / (2.0 * h))
                    .abs()
                    .ln()
            })
            .sum();
        assert!((fd - s.log_jacobian(&u)).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn bijection(a in 1e-6f64..0.999_999, b in 1e-6f64..1e6, c in 2.000_01f64..39.999_99, d in -1e6f64..1e6) {
            let s = spec();
            let x = [a, b, c, d];
            let back = s.from_unconstrained(&s.to_unconstrained(&x).unwrap());
            for (p, q) in back.iter().zip(x) {
                prop_assert!((p - q).abs() <= 1e-12 * q.abs().max(1.0));
            }
        }
    }
}
