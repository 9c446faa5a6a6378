//! Mixed p-spin coupling functions `ξ₀(r) = Σ_p c_p r^p` and the scalar
//! calculus built on them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(degree, coefficient)` pair of a mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub p: u32,
    pub coeff: f64,
}

/// Finite mixture of p-spin interactions. Degrees are at least 2, strictly
/// increasing, with non-negative coefficients, at least one of them positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    terms: Vec<Term>,
}

#[derive(Serialize, Deserialize)]
struct MixtureJson {
    terms: Vec<(u32, f64)>,
}

impl Serialize for MixtureSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MixtureJson {
            terms: self.terms.iter().map(|t| (t.p, t.coeff)).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MixtureSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MixtureJson::deserialize(d)?;
        MixtureSpec::new(raw.terms).map_err(serde::de::Error::custom)
    }
}

impl MixtureSpec {
    /// Builds a mixture from `(p, coeff)` pairs given in any order.
    pub fn new<I: IntoIterator<Item = (u32, f64)>>(terms: I) -> Result<Self> {
        let mut terms: Vec<Term> = terms
            .into_iter()
            .map(|(p, coeff)| Term { p, coeff })
            .collect();
        terms.sort_by_key(|t| t.p);
        for t in &terms {
            if t.p < 2 {
                return Err(Error::InvalidSpec(format!("degree {} < 2", t.p)));
            }
            if !(t.coeff >= 0.0 && t.coeff.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "coefficient {} of degree {} must be finite and non-negative",
                    t.coeff, t.p
                )));
            }
        }
        if terms.windows(2).any(|w| w[0].p == w[1].p) {
            return Err(Error::InvalidSpec("repeated degree".into()));
        }
        if !terms.iter().any(|t| t.coeff > 0.0) {
            return Err(Error::InvalidSpec(
                "at least one coefficient must be positive".into(),
            ));
        }
        Ok(Self { terms })
    }

    /// Sherrington–Kirkpatrick, `ξ₀(r) = r²/2`.
    pub fn sk() -> Self {
        Self::new([(2, 0.5)]).expect("valid")
    }

    /// Pure `(Cr)^p / p`.
    pub fn pure(p: u32, c: f64) -> Result<Self> {
        Self::new([(p, c.powi(p as i32) / p as f64)])
    }

    /// `r²/2 + (Cr)^p / p`, the counterexample family.
    pub fn sk_plus(p: u32, c: f64) -> Result<Self> {
        if p == 2 {
            return Self::new([(2, 0.5 + c * c / 2.0)]);
        }
        Self::new([(2, 0.5), (p, c.powi(p as i32) / p as f64)])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.last().map_or(0, |t| t.p)
    }

    /// Dense coefficient vector of the `k`-th derivative, index = power.
    fn derivative_coeffs(&self, k: u32) -> Vec<f64> {
        let top = self.max_degree();
        let mut c = vec![0.0; (top + 1) as usize];
        for t in &self.terms {
            if t.p < k {
                continue;
            }
            let falling: f64 = (0..k).map(|j| (t.p - j) as f64).product();
            c[(t.p - k) as usize] += t.coeff * falling;
        }
        c
    }

    fn horner(&self, k: u32, r: f64) -> f64 {
        self.derivative_coeffs(k)
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * r + c)
    }

    pub fn xi0(&self, r: f64) -> f64 {
        self.horner(0, r)
    }

    pub fn xi0_d1(&self, r: f64) -> f64 {
        self.horner(1, r)
    }

    pub fn xi0_d2(&self, r: f64) -> f64 {
        self.horner(2, r)
    }

    pub fn xi0_d3(&self, r: f64) -> f64 {
        self.horner(3, r)
    }

    /// `ξ'(q) = β² ξ₀'(q)`, the Gaussian variance accumulated up to `q`.
    pub fn xi_d1(&self, params: &CouplingParams, q: f64) -> f64 {
        params.beta * params.beta * self.xi0_d1(q)
    }

    /// `θ(q) = q ξ'(q) − ξ(q)` with `ξ = β² ξ₀`.
    pub fn theta(&self, params: &CouplingParams, q: f64) -> f64 {
        params.beta * params.beta * (q * self.xi0_d1(q) - self.xi0(q))
    }

    /// Convex conjugate `sup_{r ≥ 0} (a r − ξ₀(r))` and its maximizer.
    ///
    /// The maximizer solves `ξ₀'(r) = a`; Newton from the right end of a
    /// geometrically grown bracket, with bisection whenever a step leaves it.
    pub fn conjugate(&self, a: f64) -> Result<Conjugate> {
        if !a.is_finite() || a < 0.0 {
            return Err(Error::Precondition(format!(
                "conjugate needs a >= 0, got {a}"
            )));
        }
        if a == 0.0 {
            return Ok(Conjugate {
                value: 0.0,
                argmax: 0.0,
            });
        }
        const MAX_ITER: usize = 100;
        let tol = 1e-12 * a.max(1.0);

        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut grow = 0;
        while self.xi0_d1(hi) < a {
            lo = hi;
            hi *= 2.0;
            grow += 1;
            if grow > 1100 {
                return Err(Error::SolverFailure {
                    what: "conjugate bracket",
                    lo,
                    hi,
                });
            }
        }

        let mut r = hi;
        for _ in 0..MAX_ITER {
            let g = self.xi0_d1(r) - a;
            if g.abs() <= tol {
                return Ok(Conjugate {
                    value: a * r - self.xi0(r),
                    argmax: r,
                });
            }
            if g > 0.0 {
                hi = r;
            } else {
                lo = r;
            }
            let slope = self.xi0_d2(r);
            let newton = r - g / slope;
            r = if slope > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= f64::EPSILON * hi {
                return Ok(Conjugate {
                    value: a * r - self.xi0(r),
                    argmax: r,
                });
            }
        }
        Err(Error::SolverFailure {
            what: "conjugate Newton",
            lo,
            hi,
        })
    }
}

impl fmt::Display for MixtureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| format!("{}*r^{}", t.coeff, t.p))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Parses the shorthand used on the command line:
///
/// * `sk`
/// * `sk+p<P>c<C>`: `r²/2 + (Cr)^P / P`
/// * `p<P>c<C>`: `(Cr)^P / P`
/// * a JSON object `{"terms": [[p, coeff], ...]}`
impl FromStr for MixtureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| Error::InvalidSpec(e.to_string()));
        }
        let lower = s.to_ascii_lowercase();
        if lower == "sk" {
            return Ok(Self::sk());
        }
        let (with_sk, rest) = match lower.strip_prefix("sk+") {
            Some(rest) => (true, rest),
            None => (false, lower.as_str()),
        };
        let bad = || Error::InvalidSpec(format!("unrecognized mixture shorthand `{s}`"));
        let rest = rest.strip_prefix('p').ok_or_else(bad)?;
        let (p, c) = rest.split_once('c').ok_or_else(bad)?;
        let p: u32 = p.parse().map_err(|_| bad())?;
        let c: f64 = c.parse().map_err(|_| bad())?;
        if with_sk {
            Self::sk_plus(p, c)
        } else {
            Self::pure(p, c)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Conjugate {
    pub value: f64,
    pub argmax: f64,
}

/// Inverse temperature and external field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub beta: f64,
    pub h: f64,
}

impl CouplingParams {
    pub fn new(beta: f64, h: f64) -> Result<Self> {
        if !(beta * beta).is_finite() || beta < 0.0 || !h.is_finite() {
            return Err(Error::Precondition(format!(
                "need beta >= 0 with finite beta² and finite h, got ({beta:e}, {h})"
            )));
        }
        Ok(Self { beta, h })
    }

    /// `t = β²/2`.
    pub fn t(&self) -> f64 {
        0.5 * self.beta * self.beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counterexample(c: f64) -> MixtureSpec {
        MixtureSpec::sk_plus(4, c).unwrap()
    }

    #[test]
    fn sk_values() {
        let sk = MixtureSpec::sk();
        assert_eq!(sk.xi0(1.0), 0.5);
        assert_eq!(sk.xi0_d1(1.0), 1.0);
        assert_eq!(sk.xi0_d2(1.0), 1.0);
        assert_eq!(sk.xi0_d3(1.0), 0.0);
    }

    #[test]
    fn origin_is_flat() {
        for spec in [
            MixtureSpec::sk(),
            counterexample(7.0),
            MixtureSpec::pure(3, 2.0).unwrap(),
        ] {
            assert_eq!(spec.xi0(0.0), 0.0);
            assert_eq!(spec.xi0_d1(0.0), 0.0);
        }
    }

    #[test]
    fn counterexample_value() {
        assert!((counterexample(2.0).xi0(0.5) - 0.375).abs() < 1e-15);
    }

    #[test]
    fn theta_values() {
        let one = CouplingParams::new(1.0, 0.0).unwrap();
        assert!((MixtureSpec::sk().theta(&one, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(counterexample(2.0).theta(&one, 0.0), 0.0);
        assert!((counterexample(2.0).theta(&one, 1.0) - 12.5).abs() < 1e-12);
    }

    #[test]
    fn conjugate_sk() {
        let c = MixtureSpec::sk().conjugate(2.0).unwrap();
        assert!((c.value - 2.0).abs() < 1e-12);
        assert!((c.argmax - 2.0).abs() < 1e-12);
        assert_eq!(
            MixtureSpec::sk().conjugate(0.0).unwrap(),
            Conjugate {
                value: 0.0,
                argmax: 0.0
            }
        );
    }

    #[test]
    fn conjugate_pure_quartic_matches_closed_form_and_grid() {
        let spec = MixtureSpec::pure(4, 2.0).unwrap();
        let c = spec.conjugate(1.0).unwrap();
        let closed = 0.75 * 0.5f64.powf(4.0 / 3.0);
        assert!((c.value - closed).abs() < 1e-12, "{} vs {closed}", c.value);
        // (2r)^3 * 2 = 1
        assert!(((2.0 * c.argmax).powi(3) * 2.0 - 1.0).abs() < 1e-10);
        // dense grid oracle
        let grid_best = (0..=200_000)
            .map(|i| i as f64 * 1e-5)
            .map(|r| r - spec.xi0(r))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((grid_best - c.value).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_terms() {
        assert!(MixtureSpec::new([(1, 1.0)]).is_err());
        assert!(MixtureSpec::new([(2, -1.0)]).is_err());
        assert!(MixtureSpec::new([(2, 0.0)]).is_err());
        assert!(MixtureSpec::new([(2, 0.5), (2, 0.5)]).is_err());
        assert!(MixtureSpec::sk().conjugate(-1.0).is_err());
    }

    #[test]
    fn shorthand_and_json() {
        assert_eq!("sk".parse::<MixtureSpec>().unwrap(), MixtureSpec::sk());
        assert_eq!(
            "sk+p4c20".parse::<MixtureSpec>().unwrap(),
            counterexample(20.0)
        );
        assert_eq!(
            "p4c2".parse::<MixtureSpec>().unwrap(),
            MixtureSpec::pure(4, 2.0).unwrap()
        );
        let json = r#"{"terms": [[4, 0.25], [2, 0.5]]}"#;
        let spec: MixtureSpec = json.parse().unwrap();
        assert_eq!(spec.terms()[0].p, 2);
        let back = serde_json::to_string(&spec).unwrap();
        assert_eq!(back, r#"{"terms":[[2,0.5],[4,0.25]]}"#);
        assert!("sk+q4".parse::<MixtureSpec>().is_err());
    }

    #[test]
    fn fenchel_young_equality_at_argmax() {
        let spec = counterexample(3.0);
        for i in 0..=40 {
            let r = 0.1 * i as f64;
            let a = spec.xi0_d1(r);
            let conj = spec.conjugate(a).unwrap();
            let expected = r * a - spec.xi0(r);
            assert!(
                (conj.value - expected).abs() <= 1e-8 * expected.abs().max(1.0),
                "r={r}"
            );
        }
    }

    #[test]
    fn step_two_domination() {
        for p in [3u32, 4, 6] {
            for c in [1.5, 5.0, 20.0] {
                let spec = MixtureSpec::sk_plus(p, c).unwrap();
                let pf = p as f64;
                for i in 0..=50 {
                    let a = 0.2 * i as f64;
                    let bound = (pf - 1.0) / pf * (a / c).powf(pf / (pf - 1.0));
                    assert!(spec.conjugate(a).unwrap().value <= bound + 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn fenchel_young_inequality(
            c2 in 0.0f64..2.0, c4 in 0.0f64..5.0, c3 in 0.1f64..3.0,
            r in 0.0f64..4.0, frac in 0.0f64..1.0,
        ) {
            let spec = MixtureSpec::new([(2, c2), (3, c3), (4, c4)]).unwrap();
            let a = frac * spec.xi0_d1(4.0);
            let conj = spec.conjugate(a).unwrap();
            prop_assert!(a * r <= spec.xi0(r) + conj.value + 1e-10 * (1.0 + conj.value.abs()));
            let eq = a * conj.argmax - spec.xi0(conj.argmax);
            prop_assert!((eq - conj.value).abs() <= 1e-8 * (1.0 + eq.abs()));
        }

        #[test]
        fn monotone_on_positive_axis(c2 in 0.01f64..2.0, c5 in 0.0f64..2.0, r in 0.0f64..3.0, dr in 0.0f64..1.0) {
            let spec = MixtureSpec::new([(2, c2), (5, c5)]).unwrap();
            let params = CouplingParams::new(1.3, 0.0).unwrap();
            prop_assert!(spec.xi0(r + dr) >= spec.xi0(r));
            prop_assert!(spec.xi0_d1(r + dr) >= spec.xi0_d1(r));
            prop_assert!(spec.xi0_d2(r + dr) >= spec.xi0_d2(r));
            let q = r / 3.0;
            let q2 = (q + dr).min(1.0);
            prop_assert!(spec.theta(&params, q2) >= spec.theta(&params, q) - 1e-15);
        }
    }
}
