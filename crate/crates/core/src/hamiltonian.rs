//! Interaction Hamiltonians on `[-inf, inf)` and numeric checks of the
//! λ-exponential conditions (continuity, convexity, exponential asymptotics).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ext::ExtReal;

/// Default grid density for the deviation sup over `[-M, M]`.
pub const DEFAULT_DEVIATION_GRID: usize = 2001;

#[derive(Clone)]
enum Kind {
    Zero,
    Exponential { lambda: f64 },
    PolyExp,
    ExpPlusSquare { lambda: f64 },
    ExpMixture { lambda: f64, c0: f64, terms: Vec<(f64, f64)> },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// A continuous map `[-inf, inf) -> [0, inf)` with its value at `-inf`.
#[derive(Clone)]
pub struct Hamiltonian {
    name: String,
    kind: Kind,
    value_at_minus_infinity: f64,
    lambda: Option<f64>,
    declared_convex: bool,
}

impl fmt::Debug for Hamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Hamiltonian")
            .field("name", &self.name)
            .field("lambda", &self.lambda)
            .field("declared_convex", &self.declared_convex)
            .finish()
    }
}

impl Hamiltonian {
    /// `H ≡ 0`.
    pub fn zero() -> Self {
        Self {
            name: "zero".into(),
            kind: Kind::Zero,
            value_at_minus_infinity: 0.0,
            lambda: None,
            declared_convex: true,
        }
    }

    /// `H(x) = e^{λx}`.
    pub fn exponential(lambda: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        Ok(Self {
            name: format!("exponential:{lambda:?}"),
            kind: Kind::Exponential { lambda },
            value_at_minus_infinity: 0.0,
            lambda: Some(lambda),
            declared_convex: true,
        })
    }

    /// The KPZ-equation Hamiltonian at time `t`, `H(x) = e^{t^{1/3} x}`.
    pub fn kpz(t: f64) -> Result<Self> {
        positive("t", t)?;
        let mut h = Self::exponential(t.cbrt())?;
        h.name = format!("kpz:{t:?}");
        Ok(h)
    }

    /// `H(x) = (x² + 4) eˣ`, a λ-exponential Hamiltonian with λ = 1.
    pub fn poly_exp() -> Self {
        Self {
            name: "poly_exp".into(),
            kind: Kind::PolyExp,
            value_at_minus_infinity: 0.0,
            lambda: Some(1.0),
            declared_convex: true,
        }
    }

    /// `H(x) = e^{λx} + x² 1{x ≥ 0}`.
    pub fn exp_plus_square(lambda: f64) -> Result<Self> {
        positive("lambda", lambda)?;
        Ok(Self {
            name: format!("exp_plus_square:{lambda:?}"),
            kind: Kind::ExpPlusSquare { lambda },
            value_at_minus_infinity: 0.0,
            lambda: Some(lambda),
            declared_convex: true,
        })
    }

    /// `H(x) = c0 e^{λx} + Σ cᵢ e^{λᵢ x}` with positive coefficients and `0 ≤ λᵢ < λ`.
    pub fn exp_mixture(lambda: f64, c0: f64, terms: Vec<(f64, f64)>) -> Result<Self> {
        positive("lambda", lambda)?;
        positive("c0", c0)?;
        let mut at_minus_inf = 0.0;
        for &(c, l) in &terms {
            positive("mixture coefficient", c)?;
            if !(0.0..lambda).contains(&l) {
                return Err(Error::Domain(format!(
                    "mixture rate {l} must lie in [0, {lambda}) so that H stays finite at -inf"
                )));
            }
            if l == 0.0 {
                at_minus_inf += c;
            }
        }
        let tail: Vec<String> = terms.iter().map(|(c, l)| format!("{c:?}@{l:?}")).collect();
        let mut name = format!("exp_mixture:{lambda:?}:{c0:?}");
        for t in &tail {
            name.push(':');
            name.push_str(t);
        }
        Ok(Self {
            name,
            kind: Kind::ExpMixture { lambda, c0, terms },
            value_at_minus_infinity: at_minus_inf,
            lambda: Some(lambda),
            declared_convex: true,
        })
    }

    /// A Hamiltonian backed by an arbitrary closure. Used for diagnostics and tests.
    pub fn custom<F>(
        name: impl Into<String>,
        f: F,
        value_at_minus_infinity: f64,
        lambda: Option<f64>,
        declared_convex: bool,
    ) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            kind: Kind::Custom(Arc::new(f)),
            value_at_minus_infinity,
            lambda,
            declared_convex,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    pub fn declared_convex(&self) -> bool {
        self.declared_convex
    }

    pub fn value_at_minus_infinity(&self) -> f64 {
        self.value_at_minus_infinity
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    /// `H(x)` for extended-real `x`; `+inf` is outside the domain.
    pub fn evaluate(&self, x: ExtReal) -> Result<f64> {
        match x {
            ExtReal::NegInf => Ok(self.value_at_minus_infinity),
            ExtReal::Finite(v) => Ok(self.eval_finite(v)),
            ExtReal::PosInf => Err(Error::Domain("a Hamiltonian is not defined at +inf".into())),
        }
    }

    /// Hot-path evaluation on `f64`, where `-inf` stands for the extended real.
    ///
    /// Panics (debug) on `+inf` or NaN; callers guarantee those never arise.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(!x.is_nan() && x != f64::INFINITY, "H evaluated at {x}");
        if x == f64::NEG_INFINITY {
            return self.value_at_minus_infinity;
        }
        self.eval_finite(x)
    }

    #[inline]
    fn eval_finite(&self, x: f64) -> f64 {
        match &self.kind {
            Kind::Zero => 0.0,
            Kind::Exponential { lambda } => (lambda * x).exp(),
            Kind::PolyExp => (x * x + 4.0) * x.exp(),
            Kind::ExpPlusSquare { lambda } => {
                let sq = if x >= 0.0 { x * x } else { 0.0 };
                (lambda * x).exp() + sq
            }
            Kind::ExpMixture { lambda, c0, terms } => {
                c0 * (lambda * x).exp() + terms.iter().map(|(c, l)| c * (l * x).exp()).sum::<f64>()
            }
            Kind::Custom(f) => f(x),
        }
    }

    /// Overrides the convexity declaration (e.g. to mark a custom function convex).
    pub fn with_declared_convex(mut self, convex: bool) -> Self {
        self.declared_convex = convex;
        self
    }
}

impl FromStr for Hamiltonian {
    type Err = Error;

    /// Catalog names: `zero`, `exponential:<λ>`, `kpz:<t>`, `poly_exp`,
    /// `exp_plus_square:<λ>`, `exp_mixture:<λ>:<c0>[:<cᵢ>@<λᵢ>]*`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Parse(format!("'{s}': missing parameter {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("'{s}': {e}")))
        };
        let arity = |n: usize| -> Result<()> {
            if parts.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!("'{s}': expected {} parameter(s)", n - 1)))
            }
        };
        match parts[0] {
            "zero" => arity(1).map(|_| Hamiltonian::zero()),
            "poly_exp" => arity(1).map(|_| Hamiltonian::poly_exp()),
            "exponential" => {
                arity(2)?;
                Hamiltonian::exponential(num(1)?)
            }
            "kpz" => {
                arity(2)?;
                Hamiltonian::kpz(num(1)?)
            }
            "exp_plus_square" => {
                arity(2)?;
                Hamiltonian::exp_plus_square(num(1)?)
            }
            "exp_mixture" => {
                if parts.len() < 3 {
                    return Err(Error::Parse(format!("'{s}': expected exp_mixture:<lambda>:<c0>...")));
                }
                let terms = parts[3..]
                    .iter()
                    .map(|t| {
                        let (c, l) = t
                            .split_once('@')
                            .ok_or_else(|| Error::Parse(format!("'{t}': expected <c>@<lambda>")))?;
                        let c = c.parse::<f64>().map_err(|e| Error::Parse(format!("'{t}': {e}")))?;
                        let l = l.parse::<f64>().map_err(|e| Error::Parse(format!("'{t}': {e}")))?;
                        Ok((c, l))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Hamiltonian::exp_mixture(num(1)?, num(2)?, terms)
            }
            other => Err(Error::Parse(format!("unknown Hamiltonian '{other}'"))),
        }
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be positive and finite, got {v}")))
    }
}

fn uniform_grid(lo: f64, hi: f64, points: usize) -> impl Iterator<Item = f64> {
    let points = points.max(2);
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(move |j| if j + 1 == points { hi } else { lo + step * j as f64 })
}

/// `max_{x ∈ grid[-M, M]} |H(x + y)/H(y) - e^{λx}|`.
pub fn lambda_exponential_deviation(
    h: &Hamiltonian,
    lambda: f64,
    m: f64,
    y: f64,
    grid_points: usize,
) -> Result<f64> {
    let hy = h.eval(y);
    if hy <= 0.0 || !hy.is_finite() {
        return Err(Error::VanishingHamiltonian { y });
    }
    Ok(uniform_grid(-m, m, grid_points)
        .map(|x| (h.eval(x + y) / hy - (lambda * x).exp()).abs())
        .fold(0.0, f64::max))
}

/// Midpoint-convexity scan over all grid pairs of `[lo, hi]`.
pub fn check_convexity(h: &Hamiltonian, lo: f64, hi: f64, grid_points: usize) -> bool {
    assert!(lo < hi && grid_points >= 3, "check_convexity needs lo < hi and >= 3 points");
    let xs: Vec<f64> = uniform_grid(lo, hi, grid_points).collect();
    let hs: Vec<f64> = xs.iter().map(|&x| h.eval(x)).collect();
    for i in 0..xs.len() {
        for j in (i + 2)..xs.len() {
            let mid = h.eval(0.5 * (xs[i] + xs[j]));
            let chord = 0.5 * (hs[i] + hs[j]);
            let tol = 1e-12 * hs[i].abs().max(hs[j].abs()).max(mid.abs()).max(1.0);
            if mid > chord + tol {
                return false;
            }
        }
    }
    true
}

/// Largest jump `|H(x + step) - H(x)|` over a grid of `[lo, hi]`; tends to 0 with `step` for continuous `H`.
pub fn continuity_modulus(h: &Hamiltonian, lo: f64, hi: f64, step: f64) -> f64 {
    let points = (((hi - lo) / step).ceil() as usize).max(1) + 1;
    uniform_grid(lo, hi, points).map(|x| (h.eval(x + step) - h.eval(x)).abs()).fold(0.0, f64::max)
}

/// Minimum over a grid of `[lo, hi]`; non-negative for a valid Hamiltonian.
pub fn grid_minimum(h: &Hamiltonian, lo: f64, hi: f64, grid_points: usize) -> f64 {
    uniform_grid(lo, hi, grid_points).map(|x| h.eval(x)).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn catalog() -> Vec<Hamiltonian> {
        vec![
            Hamiltonian::exponential(1.0).unwrap(),
            Hamiltonian::exponential(2.5).unwrap(),
            Hamiltonian::kpz(8.0).unwrap(),
            Hamiltonian::poly_exp(),
            Hamiltonian::exp_plus_square(1.0).unwrap(),
            Hamiltonian::exp_mixture(2.0, 1.0, vec![(0.5, 1.0), (3.0, 0.25)]).unwrap(),
        ]
    }

    #[test]
    fn evaluate_examples() {
        let e1 = Hamiltonian::exponential(1.0).unwrap();
        assert_eq!(e1.evaluate(ExtReal::Finite(0.0)).unwrap(), 1.0);
        assert_eq!(e1.evaluate(ExtReal::NegInf).unwrap(), 0.0);
        assert!(e1.evaluate(ExtReal::PosInf).is_err());
        let k = Hamiltonian::kpz(8.0).unwrap();
        assert_relative_eq!(k.evaluate(ExtReal::Finite(1.0)).unwrap(), 2f64.exp(), max_relative = 1e-15);
    }

    #[test]
    fn deviation_exponential_vanishes() {
        let h = Hamiltonian::exponential(1.0).unwrap();
        let d = lambda_exponential_deviation(&h, 1.0, 2.0, 10.0, DEFAULT_DEVIATION_GRID).unwrap();
        assert!(d < 1e-12, "{d}");
    }

    #[test]
    fn deviation_exp_plus_square_decreases() {
        let h = Hamiltonian::exp_plus_square(1.0).unwrap();
        let ds: Vec<f64> = [10.0, 20.0, 30.0]
            .iter()
            .map(|&y| lambda_exponential_deviation(&h, 1.0, 1.0, y, DEFAULT_DEVIATION_GRID).unwrap())
            .collect();
        // Oracle: the sup of |((x+y)^2 - e^x y^2)/(e^y + y^2)| sits at an interval end.
        for (&y, &d) in [10.0f64, 20.0, 30.0].iter().zip(&ds) {
            let at = |x: f64| (((x + y) * (x + y) - x.exp() * y * y) / (y.exp() + y * y)).abs();
            assert_relative_eq!(d, at(-1.0).max(at(1.0)), max_relative = 1e-9);
        }
        assert!(ds[0] > ds[1] && ds[1] > ds[2] && ds[2] < 1e-3, "{ds:?}");
    }

    #[test]
    fn deviation_rejects_zero_hamiltonian() {
        let err = lambda_exponential_deviation(&Hamiltonian::zero(), 1.0, 1.0, 10.0, 11).unwrap_err();
        assert!(matches!(err, Error::VanishingHamiltonian { .. }));
    }

    #[test]
    fn deviation_trend_is_nonincreasing_for_catalog() {
        for h in catalog() {
            let lambda = h.lambda().unwrap();
            let ds: Vec<f64> = [10.0, 20.0, 40.0, 80.0]
                .iter()
                .map(|&y| lambda_exponential_deviation(&h, lambda, 2.0, y, DEFAULT_DEVIATION_GRID).unwrap())
                .collect();
            for w in ds.windows(2) {
                assert!(w[1] <= w[0] + 1e-9, "{}: {ds:?}", h.name());
            }
        }
    }

    #[test]
    fn convexity_examples() {
        assert!(check_convexity(&Hamiltonian::exponential(2.0).unwrap(), -10.0, 10.0, 201));
        assert!(check_convexity(&Hamiltonian::poly_exp(), -10.0, 10.0, 201));
        let bump = Hamiltonian::custom("bump", |x: f64| (-x * x).exp(), 0.0, None, false);
        assert!(!check_convexity(&bump, -2.0, 2.0, 41));
        for h in catalog() {
            assert!(check_convexity(&h, -10.0, 10.0, 101), "{}", h.name());
        }
    }

    #[test]
    fn poly_exp_second_derivative_positive() {
        // (x^2 + 4x + 6) e^x > 0 since the quadratic has negative discriminant; compare
        // with a central second difference.
        let h = Hamiltonian::poly_exp();
        for i in -40..=40 {
            let x = i as f64 * 0.25;
            let step = 1e-3;
            let fd = (h.eval(x + step) - 2.0 * h.eval(x) + h.eval(x - step)) / (step * step);
            let exact = (x * x + 4.0 * x + 6.0) * x.exp();
            assert!(fd > 0.0);
            assert_relative_eq!(fd, exact, max_relative = 1e-4);
        }
    }

    #[test]
    fn minus_infinity_limit_matches_extension() {
        let mut all = catalog();
        all.push(Hamiltonian::zero());
        all.push(Hamiltonian::exp_mixture(1.0, 2.0, vec![(0.75, 0.0)]).unwrap());
        for h in all {
            let lim = h.eval(-1e6);
            assert!((lim - h.value_at_minus_infinity()).abs() <= 1e-12, "{}", h.name());
            assert!((h.eval(-1e3) - h.value_at_minus_infinity()).abs() <= 1e-12);
            assert!(grid_minimum(&h, -50.0, 20.0, 1001) >= 0.0);
            assert!(continuity_modulus(&h, -2.0, 2.0, 1e-6) < 1e-3);
        }
    }

    #[test]
    fn parse_catalog_names() {
        for name in ["zero", "poly_exp", "exponential:1.0", "kpz:1.0", "exp_plus_square:0.5"] {
            let h: Hamiltonian = name.parse().unwrap();
            assert_eq!(h.name(), name);
        }
        let m: Hamiltonian = "exp_mixture:2.0:1.0:0.5@1.0".parse().unwrap();
        assert_eq!(m.lambda(), Some(2.0));
        assert_relative_eq!(m.eval(0.0), 1.5);
        assert!("hardwall".parse::<Hamiltonian>().is_err());
        assert!("exponential".parse::<Hamiltonian>().is_err());
        assert!("exponential:-1".parse::<Hamiltonian>().is_err());
        assert!("exp_mixture:1.0:1.0:1.0@2.0".parse::<Hamiltonian>().is_err());
    }
}
