//! Brownian bridges with unit diffusion: densities, Gaussian moments, grid
//! samplers, the maximum formula, Mills-ratio bounds, the truncated endpoint
//! pair sampler and the two-time below-level probability.

use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::adaptive_simpson;
use crate::special::{self, normal_cdf, normal_pdf, normal_quantile};

/// Constant in the two-sided Mills-ratio bound `1/(c0 (1+x)) <= R(x) <= c0/(1+x)`.
pub const MILLS_C0: f64 = 2.0;

/// Gibbs sweeps discarded before returning a truncated endpoint pair.
pub const TRUNCATED_PAIR_SWEEPS: usize = 32;

/// Standardised truncation point below which the one-dimensional sampler
/// switches from inverse-CDF to exponential-proposal rejection.
const TAIL_SWITCH: f64 = -6.0;

/// Absolute tolerance of [`two_time_below_prob`].
pub const TWO_TIME_TOL: f64 = 1e-10;

/// A Brownian bridge from `(p, x)` to `(q, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeSpec {
    pub p: f64,
    pub q: f64,
    pub x: f64,
    pub y: f64,
}

impl BridgeSpec {
    pub fn new(p: f64, q: f64, x: f64, y: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite() && x.is_finite() && y.is_finite()) {
            return Err(Error::Domain(format!("bridge data must be finite: ({p}, {q}, {x}, {y})")));
        }
        if q <= p {
            return Err(Error::Domain(format!("bridge needs q > p, got p = {p}, q = {q}")));
        }
        Ok(Self { p, q, x, y })
    }

    /// Mean of `B(t)`.
    #[inline]
    pub fn mean(&self, t: f64) -> f64 {
        self.x + (t - self.p) / (self.q - self.p) * (self.y - self.x)
    }

    /// `Cov(B(s), B(t))` for `s <= t`.
    #[inline]
    pub fn cov(&self, s: f64, t: f64) -> f64 {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        (s - self.p) * (self.q - t) / (self.q - self.p)
    }

    fn check_interior(&self, t: f64) -> Result<()> {
        if t > self.p && t < self.q {
            Ok(())
        } else {
            Err(Error::Domain(format!("time {t} is not inside ({}, {})", self.p, self.q)))
        }
    }
}

/// Interior times `c < d` and a level `r` for the event `{B(c) <= r, B(d) <= r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoTimeQuery {
    pub c: f64,
    pub d: f64,
    pub r: f64,
}

/// Gaussian transition density over time `t`.
pub fn heat_kernel(t: f64, x: f64, y: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    let d = x - y;
    Ok((-d * d / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt())
}

/// Mean vector and covariance matrix of the bridge at strictly increasing interior times.
pub fn bridge_mean_cov(spec: &BridgeSpec, times: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_increasing(times)?;
    for &t in times {
        spec.check_interior(t)?;
    }
    let mean = times.iter().map(|&t| spec.mean(t)).collect();
    let cov = DMatrix::from_fn(times.len(), times.len(), |i, j| spec.cov(times[i], times[j]));
    Ok((mean, cov))
}

fn check_increasing(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("times must be strictly increasing".into()));
    }
    Ok(())
}

/// Samples the bridge at strictly increasing interior times, endpoints excluded.
pub fn sample_bridge_on_grid<R: Rng + ?Sized>(spec: &BridgeSpec, times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    check_increasing(times)?;
    if let (Some(&first), Some(&last)) = (times.first(), times.last()) {
        spec.check_interior(first)?;
        spec.check_interior(last)?;
    }
    let mut out = Vec::with_capacity(times.len());
    fill_bridge(spec.p, spec.x, spec.q, spec.y, times, rng, &mut out);
    Ok(out)
}

/// Appends bridge values at `times` (assumed sorted inside `(p, q)`) to `out`,
/// conditioning each value on the previous one and the right endpoint.
#[inline]
pub(crate) fn fill_bridge<R: Rng + ?Sized>(p: f64, x: f64, q: f64, y: f64, times: &[f64], rng: &mut R, out: &mut Vec<f64>) {
    let (mut s, mut v) = (p, x);
    for &t in times {
        let span = q - s;
        let h = t - s;
        let mean = v + h / span * (y - v);
        let var = (h * (q - t) / span).max(0.0);
        let z: f64 = rng.sample(StandardNormal);
        v = mean + var.sqrt() * z;
        s = t;
        out.push(v);
    }
}

/// `P(max_{[0,T]} B >= β)` for a bridge from `0` to `a` on `[0, T]`.
///
/// By reflection the same value is `P(min B <= -β)` for the bridge from `0` to `-a`.
pub fn max_exceedance_prob(t: f64, a: f64, beta: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("bridge length must be positive, got {t}")));
    }
    if !(beta > a.max(0.0)) {
        return Err(Error::Domain(format!("max formula needs beta > max(a, 0); beta = {beta}, a = {a}")));
    }
    Ok((-2.0 * beta * (beta - a) / t).exp())
}

/// The Mills ratio with the bounds `1/(c0 (1+x))` and `c0/(1+x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MillsBounds {
    pub ratio: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

pub fn mills_ratio(x: f64) -> Result<MillsBounds> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("Mills ratio bounds need x >= 0, got {x}")));
    }
    Ok(MillsBounds {
        ratio: special::mills_ratio(x),
        lower_bound: 1.0 / (MILLS_C0 * (1.0 + x)),
        upper_bound: MILLS_C0 / (1.0 + x),
    })
}

/// One draw of `N(mean, sd²)` conditioned on being `<= level`.
pub fn sample_truncated_normal_below<R: Rng + ?Sized>(mean: f64, sd: f64, level: f64, rng: &mut R) -> f64 {
    let h = (level - mean) / sd;
    let z = if h >= TAIL_SWITCH {
        let u: f64 = rng.sample(Open01);
        normal_quantile(u * normal_cdf(h)).min(h)
    } else {
        // -z is a standard normal conditioned on exceeding alpha = -h.
        let alpha = -h;
        let rate = 0.5 * (alpha + (alpha * alpha + 4.0).sqrt());
        loop {
            let e: f64 = rng.sample(Exp1);
            let cand = alpha + e / rate;
            let u: f64 = rng.sample(Open01);
            let dev = cand - rate;
            if u.ln() <= -0.5 * dev * dev {
                break -cand;
            }
        }
    };
    (mean + sd * z).min(level)
}

/// Draws `(B(c), B(d))` conditioned on both lying at or below `level`.
///
/// Gibbs sampler on the bivariate Gaussian with exact truncated conditionals;
/// the chain starts from a marginal-then-conditional draw and runs
/// [`TRUNCATED_PAIR_SWEEPS`] sweeps.
pub fn sample_truncated_endpoint_pair<R: Rng + ?Sized>(
    spec: &BridgeSpec,
    c: f64,
    d: f64,
    level: f64,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let g = PairGaussian::new(spec, c, d)?;
    Ok(g.sample_below(level, TRUNCATED_PAIR_SWEEPS, rng))
}

/// The bivariate law of `(B(c), B(d))` with its two Gaussian conditionals.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairGaussian {
    mc: f64,
    md: f64,
    // Regression slopes and residual standard deviations.
    beta_c_on_d: f64,
    beta_d_on_c: f64,
    sd_c_given_d: f64,
    sd_d_given_c: f64,
    sd_d: f64,
    sd_c: f64,
    rho: f64,
}

impl PairGaussian {
    pub(crate) fn new(spec: &BridgeSpec, c: f64, d: f64) -> Result<Self> {
        spec.check_interior(c)?;
        spec.check_interior(d)?;
        if !(c < d) {
            return Err(Error::Domain(format!("need c < d, got c = {c}, d = {d}")));
        }
        let vc = spec.cov(c, c);
        let vd = spec.cov(d, d);
        let cv = spec.cov(c, d);
        // Conditional variances in closed form avoid cancellation when c, d are close to the ends.
        // Var(B(c) | B(d)) is the bridge variance on [p, d]; Var(B(d) | B(c)) the one on [c, q].
        let var_c_given_d = (c - spec.p) * (d - c) / (d - spec.p);
        let var_d_given_c = (d - c) * (spec.q - d) / (spec.q - c);
        Ok(Self {
            mc: spec.mean(c),
            md: spec.mean(d),
            beta_c_on_d: cv / vd,
            beta_d_on_c: cv / vc,
            sd_c_given_d: var_c_given_d.sqrt(),
            sd_d_given_c: var_d_given_c.sqrt(),
            sd_c: vc.sqrt(),
            sd_d: vd.sqrt(),
            rho: cv / (vc * vd).sqrt(),
        })
    }

    pub(crate) fn sample_below<R: Rng + ?Sized>(&self, level: f64, sweeps: usize, rng: &mut R) -> (f64, f64) {
        let mut vd = sample_truncated_normal_below(self.md, self.sd_d, level, rng);
        let mut vc = sample_truncated_normal_below(self.mc + self.beta_c_on_d * (vd - self.md), self.sd_c_given_d, level, rng);
        for _ in 0..sweeps {
            vd = sample_truncated_normal_below(self.md + self.beta_d_on_c * (vc - self.mc), self.sd_d_given_c, level, rng);
            vc = sample_truncated_normal_below(self.mc + self.beta_c_on_d * (vd - self.md), self.sd_c_given_d, level, rng);
        }
        (vc, vd)
    }

    /// `P(B(c) <= r, B(d) <= r)` by one-dimensional adaptive Simpson over the
    /// standardised `B(c)` with the conditional probability of `B(d)` in closed form.
    fn prob_below(&self, r: f64) -> f64 {
        let hc = (r - self.mc) / self.sd_c;
        let hd = (r - self.md) / self.sd_d;
        let rho = self.rho;
        let s = (1.0 - rho * rho).sqrt();
        let f = |z: f64| normal_pdf(z) * normal_cdf((hd - rho * z) / s);
        let upper = hc.min(40.0);
        if upper <= -40.0 {
            return 0.0;
        }
        // Breakpoints keep the Simpson refinement from skipping the Gaussian bulk.
        let mut knots = vec![-40.0];
        knots.extend([-8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0].into_iter().filter(|&k| k > -40.0 && k < upper));
        // The inner Φ changes fastest where its argument crosses zero.
        let kink = hd / rho;
        if rho > 0.0 && kink > -40.0 && kink < upper {
            knots.push(kink);
        }
        knots.push(upper);
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let tol = TWO_TIME_TOL * 1e-3 / knots.len() as f64;
        let total: f64 = knots.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], tol, 60)).sum();
        total.clamp(0.0, 1.0)
    }
}

/// Concatenates independent bridges `(p,x)→(c,v_c)→(d,v_d)→(q,y)` evaluated at `times`.
///
/// `times` must be sorted within `[p, q]` and contain `c` and `d` (up to
/// `1e-12·(q−p)`); endpoint times return the pinned values.
pub fn sample_conditioned_three_segments<R: Rng + ?Sized>(
    spec: &BridgeSpec,
    c: f64,
    d: f64,
    v_c: f64,
    v_d: f64,
    times: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(spec.p < c && c < d && d < spec.q) {
        return Err(Error::Domain(format!("need p < c < d < q, got c = {c}, d = {d}")));
    }
    let pins = [(spec.p, spec.x), (c, v_c), (d, v_d), (spec.q, spec.y)];
    sample_pinned(&pins, times, rng)
}

/// Path through the given pins with independent bridges between consecutive pins.
pub(crate) fn sample_pinned<R: Rng + ?Sized>(pins: &[(f64, f64)], times: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let (lo, hi) = (pins[0].0, pins[pins.len() - 1].0);
    let eps = 1e-12 * (hi - lo);
    if times.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::Domain("times must be sorted".into()));
    }
    if times.iter().any(|&t| t < lo - eps || t > hi + eps) {
        return Err(Error::Domain(format!("times must lie in [{lo}, {hi}]")));
    }
    for &(t, _) in &pins[1..pins.len() - 1] {
        if !times.iter().any(|&s| (s - t).abs() <= eps) {
            return Err(Error::Domain(format!("grid does not contain the pinned time {t}")));
        }
    }
    let mut out = Vec::with_capacity(times.len());
    let mut i = 0;
    for seg in pins.windows(2) {
        let ((p, x), (q, y)) = (seg[0], seg[1]);
        while i < times.len() && times[i] <= p + eps {
            out.push(x);
            i += 1;
        }
        let start = i;
        while i < times.len() && times[i] < q - eps {
            i += 1;
        }
        fill_bridge(p, x, q, y, &times[start..i], rng, &mut out);
    }
    let last = pins[pins.len() - 1].1;
    out.resize(times.len(), last);
    Ok(out)
}

/// `F(r) = P(B(c) <= r, B(d) <= r)` for the bridge `spec`, absolute error below [`TWO_TIME_TOL`].
pub fn two_time_below_prob(spec: &BridgeSpec, query: &TwoTimeQuery) -> Result<f64> {
    Ok(PairGaussian::new(spec, query.c, query.d)?.prob_below(query.r))
}
