//! Gaussian expectations `E f(c + s Z)`, `Z ~ N(0, 1)`.
//!
//! [`GaussianRule`] is a probabilists' Gauss–Hermite rule. [`Expectation`]
//! wraps it with a scale-aware switch: once the scale `s` is large the
//! integrands used here (`log cosh`, `tanh²`, `sech⁴` and their Parisi
//! transforms) vary on a unit length in `y = c + s z`, which a fixed-order
//! Hermite rule cannot resolve. Those expectations go through a trapezoid
//! rule with a fixed step in `y` instead, which converges geometrically for
//! integrands analytic in the strip `|Im y| < π/2`.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 200;

/// Largest Gaussian scale the trapezoid branch accepts. Beyond it every rule
/// yields NaN instead of allocating millions of nodes.
pub const MAX_SCALE: f64 = 1e4;

/// Nodes and weights with `Σ wᵢ f(xᵢ) = E f(Z)` for polynomials of degree
/// `≤ 2n − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussianRule {
    pub fn new(n: usize) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&n) {
            return Err(Error::Precondition(format!(
                "Gauss-Hermite order must be in 1..={MAX_ORDER}, got {n}"
            )));
        }
        let (x, w) = hermite_physicists(n);
        // e^{-x²} weight → standard normal density
        let nodes = x.iter().map(|x| x * std::f64::consts::SQRT_2).collect();
        let weights = w.iter().map(|w| w / PI.sqrt()).collect();
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ wᵢ f(xᵢ)`, failing on the first non-finite value.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { node: x });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Unchecked weighted sum; used in inner loops where inputs are known
    /// to be finite.
    #[inline]
    pub fn sum<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Physicists' Gauss–Hermite nodes and weights. Starting values are the
/// eigenvalues of the Jacobi matrix; Newton on the orthonormal recurrence
/// then polishes each node and yields its Christoffel weight.
fn hermite_physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let nf = n as f64;
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut x: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    x.sort_by(|a, b| b.total_cmp(a));
    let mut w = vec![0.0; n];
    for (z, wi) in x.iter_mut().zip(w.iter_mut()) {
        let mut pp = 0.0;
        for _ in 0..20 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = *z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let step = p1 / pp;
            *z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        *wi = 2.0 / (pp * pp);
    }
    // exact symmetry
    for i in 0..n / 2 {
        let (a, b) = (0.5 * (x[i] - x[n - 1 - i]), 0.5 * (w[i] + w[n - 1 - i]));
        x[i] = a;
        x[n - 1 - i] = -a;
        w[i] = b;
        w[n - 1 - i] = b;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Tuning of [`Expectation`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSpec {
    /// Hermite order used for small scales.
    pub order: usize,
    /// Scales `s ≤ switch` use the Hermite rule.
    pub switch: f64,
    /// Trapezoid step in `y = c + s z`.
    pub step: f64,
    /// Trapezoid truncation `|z| ≤ half_width`.
    pub half_width: f64,
    /// Lower the Hermite order for small scales, where a Taylor expansion of
    /// the integrand converges fast enough that a few nodes suffice.
    pub taper: bool,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            order: 60,
            switch: 0.5,
            step: 0.25,
            half_width: 9.0,
            taper: false,
        }
    }
}

/// Scale-aware Gaussian expectation.
#[derive(Debug, Clone)]
pub struct Expectation {
    rule: GaussianRule,
    /// Rules of order `MIN_TAPER..order` for tapered small scales.
    tapered: Vec<GaussianRule>,
    spec: QuadSpec,
}

const MIN_TAPER: usize = 4;

impl Expectation {
    pub fn new(spec: QuadSpec) -> Result<Self> {
        if !(spec.step > 0.0 && spec.half_width > 0.0 && spec.switch >= 0.0) {
            return Err(Error::Precondition(format!(
                "invalid quadrature settings {spec:?}"
            )));
        }
        let tapered = if spec.taper {
            (MIN_TAPER..spec.order)
                .map(GaussianRule::new)
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        Ok(Self {
            rule: GaussianRule::new(spec.order)?,
            tapered,
            spec,
        })
    }

    /// Hermite rule used at scale `s` on the Hermite branch.
    fn hermite_for(&self, scale: f64) -> &GaussianRule {
        if self.tapered.is_empty() || scale >= 1.0 {
            return &self.rule;
        }
        // error of order s^(2n) for integrands analytic on a unit strip; aim near 1e-20
        let wanted = (23.0 / -scale.ln()).ceil() as usize + 2;
        self.tapered
            .get(wanted.max(MIN_TAPER) - MIN_TAPER)
            .unwrap_or(&self.rule)
    }

    pub fn rule(&self) -> &GaussianRule {
        &self.rule
    }

    pub fn spec(&self) -> &QuadSpec {
        &self.spec
    }

    /// Offsets `s zᵢ` and weights of the rule used at scale `s`.
    pub fn offsets(&self, scale: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        self.visit(scale, |d, w| out.push((d, w)));
        out
    }

    fn visit<G: FnMut(f64, f64)>(&self, scale: f64, mut g: G) {
        let scale = scale.abs();
        if scale <= self.spec.switch {
            let rule = self.hermite_for(scale);
            for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
                g(scale * z, w);
            }
        } else if scale.is_nan() || scale > MAX_SCALE {
            g(0.0, f64::NAN);
        } else {
            let weights = self.trapezoid_weights(scale);
            let half = (weights.len() / 2) as i64;
            for (j, w) in (-half..=half).zip(weights) {
                g(j as f64 * self.spec.step, w);
            }
        }
    }

    fn trapezoid_weights(&self, scale: f64) -> Vec<f64> {
        let hz = self.spec.step / scale;
        let half = (self.spec.half_width / hz).ceil() as i64;
        let norm = hz / (2.0 * PI).sqrt();
        (-half..=half)
            .map(|j| {
                let z = j as f64 * hz;
                norm * (-0.5 * z * z).exp()
            })
            .collect()
    }

    /// Weights of the offsets `j · step`, `j = −half..=half`, when scale `s`
    /// falls on the trapezoid branch; `None` on the Hermite branch.
    pub fn lattice_weights(&self, scale: f64) -> Option<Vec<f64>> {
        let scale = scale.abs();
        if scale.is_nan() || scale > MAX_SCALE {
            return Some(vec![f64::NAN]);
        }
        (scale > self.spec.switch).then(|| self.trapezoid_weights(scale))
    }

    /// `E f(center + scale Z)`.
    pub fn affine<F: FnMut(f64) -> f64>(&self, center: f64, scale: f64, mut f: F) -> f64 {
        if scale == 0.0 {
            return f(center);
        }
        let mut acc = 0.0;
        self.visit(scale, |d, w| acc += w * f(center + d));
        acc
    }

    /// Checked variant of [`Expectation::affine`].
    pub fn try_affine<F: FnMut(f64) -> f64>(
        &self,
        center: f64,
        scale: f64,
        mut f: F,
    ) -> Result<f64> {
        let mut acc = 0.0;
        let mut bad = None;
        self.visit(scale, |d, w| {
            let v = w * f(center + d);
            if !v.is_finite() && bad.is_none() {
                bad = Some(center + d);
            }
            acc += v;
        });
        match bad {
            Some(node) => Err(Error::NonFinite { node }),
            None => Ok(acc),
        }
    }
}

/// `log cosh x` without overflow or cancellation near zero.
#[inline]
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        let s = (0.5 * a).sinh();
        (2.0 * s * s).ln_1p()
    } else {
        a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
    }
}

#[inline]
pub fn sech4(x: f64) -> f64 {
    let c = x.cosh();
    let c2 = c * c;
    1.0 / (c2 * c2)
}

#[inline]
pub fn tanh2(x: f64) -> f64 {
    let t = x.tanh();
    t * t
}
