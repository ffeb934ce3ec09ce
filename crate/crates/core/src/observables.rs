//! Parameter schedules and Monte Carlo estimators built on Brownian bridges:
//! continuum Boltzmann weights, the conditioned ratio, weight normalisation
//! on shrinking intervals, multi-curve two-time probabilities and the
//! tail-event classifier.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bridge::{fill_bridge, sample_pinned, BridgeSpec, PairGaussian, TwoTimeQuery};
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::numeric::{CompensatedSum, MeanAccumulator, MeanSummary};
use crate::rng::{parallel_chunks, StreamRng};

/// Quadrature steps on each of the short outer segments `[a_w, c_w]`, `[d_w, b_w]`.
pub const SIDE_STEPS: usize = 32;
/// Quadrature steps on `[c_w, d_w]`.
pub const MIDDLE_STEPS: usize = 512;

const TAG_NUMERATOR: u32 = 1;
const TAG_DENOMINATOR: u32 = 2;
const TAG_NORMALIZATION: u32 = 3;
const TAG_MULTI_CURVE: u32 = 4;
const TAG_TAIL: u32 = 5;

/// The times and levels attached to a probe time `t1`, index `z` and scale `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableSchedule {
    pub t1: f64,
    pub z: u32,
    pub lambda: f64,
    pub w: f64,
    pub beta: f64,
    pub level: f64,
    pub v: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Builds the schedule and checks `d − c ∈ [w^{-5/4}, w^{-3/4}]`.
pub fn schedule(t1: f64, z: u32, lambda: f64, w: f64, h: &Hamiltonian) -> Result<ObservableSchedule> {
    if z == 0 {
        return Err(Error::Domain("observable index z must be positive".into()));
    }
    if !(lambda > 0.0) || !(w > 1.0) || !t1.is_finite() {
        return Err(Error::Domain(format!("need lambda > 0, w > 1 and finite t1; got {lambda}, {w}, {t1}")));
    }
    let beta = f64::from(z) / 2.0;
    let level = w.ln() / lambda;
    let ha = h.eval(level);
    if !(ha > 0.0) {
        return Err(Error::VanishingHamiltonian { y: level });
    }
    let half = beta / ha;
    let width = 2.0 * half;
    let (lo, hi) = (w.powf(-1.25), w.powf(-0.75));
    if width < lo {
        return Err(Error::Inadmissible { w, inequality: format!("d - c = {width} < w^(-5/4) = {lo}") });
    }
    if width > hi {
        return Err(Error::Inadmissible { w, inequality: format!("d - c = {width} > w^(-3/4) = {hi}") });
    }
    let gap = w.powi(-2);
    Ok(ObservableSchedule {
        t1,
        z,
        lambda,
        w,
        beta,
        level,
        v: w.powf(-1.0 / 3.0),
        a: t1 - half - gap,
        b: t1 + half + gap,
        c: t1 - half,
        d: t1 + half,
    })
}

impl ObservableSchedule {
    /// Errors unless `[a_w, b_w]` lies inside `(lo, hi)`.
    pub fn check_within(&self, lo: f64, hi: f64) -> Result<()> {
        if self.a > lo && self.b < hi {
            Ok(())
        } else {
            Err(Error::Inadmissible {
                w: self.w,
                inequality: format!("[a_w, b_w] = [{}, {}] is not inside ({lo}, {hi})", self.a, self.b),
            })
        }
    }

    /// Piecewise-uniform quadrature nodes on `[a_w, b_w]` with `c_w`, `d_w` as nodes.
    pub fn quadrature_times(&self) -> Vec<f64> {
        piecewise_times(&[self.a, self.c, self.d, self.b], &[SIDE_STEPS, MIDDLE_STEPS, SIDE_STEPS])
    }

    /// The two-time query `{Q(c_w) <= -A_w, Q(d_w) <= -A_w}`.
    pub fn query(&self) -> TwoTimeQuery {
        TwoTimeQuery { c: self.c, d: self.d, r: -self.level }
    }
}

/// Uniform subdivision of each `[knots[i], knots[i+1]]` into `steps[i]` pieces; knots are reproduced exactly.
pub fn piecewise_times(knots: &[f64], steps: &[usize]) -> Vec<f64> {
    assert_eq!(knots.len(), steps.len() + 1, "piecewise_times: need one step count per segment");
    let mut out = vec![knots[0]];
    for (seg, &m) in knots.windows(2).zip(steps) {
        let h = (seg[1] - seg[0]) / m as f64;
        out.extend((1..m).map(|j| seg[0] + h * j as f64));
        out.push(seg[1]);
    }
    out
}

/// `exp(−z·exp(λ·L₂))`.
pub fn predicted_limit(z: f64, lambda: f64, l2: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    (-z * (lambda * l2).exp()).exp()
}

/// Left-endpoint approximation of `−∫ H(lower(u) − Q(u)) du` on the nodes `times`.
pub fn continuum_log_weight(path: &[f64], lower: &[f64], h: &Hamiltonian, times: &[f64]) -> Result<f64> {
    if path.len() != times.len() || lower.len() != times.len() {
        return Err(Error::GridMismatch(format!(
            "path has {} values, lower curve {}, quadrature grid {}",
            path.len(),
            lower.len(),
            times.len()
        )));
    }
    Ok(log_weight_unchecked(path, lower, h, times))
}

#[inline]
fn log_weight_unchecked(path: &[f64], lower: &[f64], h: &Hamiltonian, times: &[f64]) -> f64 {
    if h.is_zero() {
        return 0.0;
    }
    let mut acc = CompensatedSum::new();
    for j in 0..times.len().saturating_sub(1) {
        acc.add((times[j + 1] - times[j]) * h.eval(lower[j] - path[j]));
    }
    -acc.value()
}

/// `E[W | F] / E[W]` with its inputs and a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub numerator: MeanSummary,
    pub denominator: MeanSummary,
    pub ratio: f64,
    pub stderr: f64,
}

impl RatioEstimate {
    fn from_independent(num: MeanAccumulator, den: MeanAccumulator) -> Result<Self> {
        let (n, d) = (num.summary(), den.summary());
        if n.count == 0 || d.count == 0 {
            return Err(Error::NoSamples("ratio estimator needs samples in both expectations".into()));
        }
        if !(d.mean > 0.0) {
            return Err(Error::NoSamples("denominator expectation underflowed to zero".into()));
        }
        let ratio = n.mean / d.mean;
        let stderr = ((n.stderr / d.mean).powi(2) + (ratio * d.stderr / d.mean).powi(2)).sqrt();
        Ok(Self { numerator: n, denominator: d, ratio, stderr })
    }
}

fn merge_all(parts: Vec<MeanAccumulator>) -> MeanAccumulator {
    let mut acc = MeanAccumulator::new();
    for p in &parts {
        acc.merge(p);
    }
    acc
}

/// Estimates `P_H(Q(c_w) <= −A_w, Q(d_w) <= −A_w) / F(−A_w)` for one curve above `lower`
/// through `E_free[W | F] / E_free[W]`.
///
/// The numerator draws the endpoint pair from the truncated Gaussian and
/// completes the path with three independent bridges; the denominator uses
/// plain bridges. The two expectations use independent streams of `seed`.
pub fn estimate_conditioned_ratio<L>(
    spec: &BridgeSpec,
    sched: &ObservableSchedule,
    lower: L,
    h: &Hamiltonian,
    samples: u64,
    seed: u64,
) -> Result<RatioEstimate>
where
    L: Fn(f64) -> f64 + Sync,
{
    if (spec.p - sched.a).abs() > 1e-12 * sched.a.abs().max(1.0) || (spec.q - sched.b).abs() > 1e-12 * sched.b.abs().max(1.0) {
        return Err(Error::GridMismatch(format!(
            "bridge spans [{}, {}] but the schedule needs [{}, {}]",
            spec.p, spec.q, sched.a, sched.b
        )));
    }
    if samples == 0 {
        return Err(Error::NoSamples("sample budget is zero".into()));
    }
    let times = sched.quadrature_times();
    let lower_vals: Vec<f64> = times.iter().map(|&t| lower(t)).collect();
    let pair = PairGaussian::new(spec, sched.c, sched.d)?;
    let level = -sched.level;
    let num = parallel_chunks(seed, TAG_NUMERATOR, samples, |rng, count| {
        let mut acc = MeanAccumulator::new();
        for _ in 0..count {
            let (vc, vd) = pair.sample_below(level, crate::bridge::TRUNCATED_PAIR_SWEEPS, rng);
            let pins = [(spec.p, spec.x), (sched.c, vc), (sched.d, vd), (spec.q, spec.y)];
            let path = sample_pinned(&pins, &times, rng).expect("schedule grid contains its own nodes");
            acc.push(log_weight_unchecked(&path, &lower_vals, h, &times).exp());
        }
        acc
    });
    let den = parallel_chunks(seed, TAG_DENOMINATOR, samples, |rng, count| {
        let mut acc = MeanAccumulator::new();
        let mut path = Vec::with_capacity(times.len());
        for _ in 0..count {
            free_path(spec, &times, rng, &mut path);
            acc.push(log_weight_unchecked(&path, &lower_vals, h, &times).exp());
        }
        acc
    });
    RatioEstimate::from_independent(merge_all(num), merge_all(den))
}

/// A free bridge at `times`, which run from `spec.p` to `spec.q` inclusive.
fn free_path(spec: &BridgeSpec, times: &[f64], rng: &mut StreamRng, out: &mut Vec<f64>) {
    out.clear();
    out.push(spec.x);
    fill_bridge(spec.p, spec.x, spec.q, spec.y, &times[1..times.len() - 1], rng, out);
    out.push(spec.y);
}

/// Self-normalised estimate `E[X·W] / E[W]` with a linearised standard error.
#[derive(Debug, Default, Clone, Copy)]
struct WeightedMean {
    w: MeanAccumulator,
    xw: MeanAccumulator,
    cross: CompensatedSum,
}

impl WeightedMean {
    fn push(&mut self, x: f64, w: f64) {
        self.w.push(w);
        self.xw.push(x * w);
        self.cross.add(x * w * w);
    }

    fn merge(&mut self, o: &WeightedMean) {
        self.w.merge(&o.w);
        self.xw.merge(&o.xw);
        self.cross.add(o.cross.value());
    }

    fn summary(&self) -> Result<MeanSummary> {
        let n = self.w.count();
        if n == 0 {
            return Err(Error::NoSamples("no samples drawn".into()));
        }
        let (mw, mxw) = (self.w.mean(), self.xw.mean());
        if !(mw > 0.0) {
            return Err(Error::NoSamples("all importance weights vanished".into()));
        }
        let r = mxw / mw;
        // Var(XW − rW) / (n · E[W]²)
        let nf = n as f64;
        let cov = (self.cross.value() - nf * mxw * mw) / (nf - 1.0).max(1.0);
        let var = self.xw.variance() - 2.0 * r * cov + r * r * self.w.variance();
        Ok(MeanSummary { mean: r, stderr: (var.max(0.0) / nf).sqrt() / mw, count: n })
    }
}

/// MC estimates of `E_H[exp(−∫ H(g(u) − Q_k(u)) du)]` on `[p, p + len]` for every
/// length in `lengths`. The `k` curves start at `xs` and end at `ys`, interact
/// pairwise through `H` and see `+∞` above, so their law is the free law
/// reweighted by the pairwise interactions.
#[allow(clippy::too_many_arguments)]
pub fn normalization_limit_estimate<G>(
    p: f64,
    lengths: &[f64],
    xs: &[f64],
    ys: &[f64],
    g: G,
    h: &Hamiltonian,
    samples: u64,
    seed: u64,
) -> Result<Vec<MeanSummary>>
where
    G: Fn(f64) -> f64 + Sync,
{
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Domain("need matching non-empty entrance and exit data".into()));
    }
    const STEPS: usize = 256;
    lengths
        .iter()
        .enumerate()
        .map(|(j, &len)| {
            let spec0 = BridgeSpec::new(p, p + len, 0.0, 0.0)?;
            let times = piecewise_times(&[p, p + len], &[STEPS]);
            let gv: Vec<f64> = times.iter().map(|&t| g(t)).collect();
            let parts = parallel_chunks(seed, TAG_NORMALIZATION + ((j as u32) << 8), samples, |rng, count| {
                let mut wm = WeightedMean::default();
                let mut paths = vec![Vec::with_capacity(times.len()); xs.len()];
                for _ in 0..count {
                    for (i, path) in paths.iter_mut().enumerate() {
                        let spec = BridgeSpec { x: xs[i], y: ys[i], ..spec0 };
                        free_path(&spec, &times, rng, path);
                    }
                    let w = interaction_log_weight(&paths, h, &times).exp();
                    let x = log_weight_unchecked(&paths[paths.len() - 1], &gv, h, &times).exp();
                    wm.push(x, w);
                }
                wm
            });
            let mut total = WeightedMean::default();
            for part in &parts {
                total.merge(part);
            }
            total.summary()
        })
        .collect()
}

/// `−Σ_i ∫ H(Q_{i+1} − Q_i)` over consecutive curves.
fn interaction_log_weight(paths: &[Vec<f64>], h: &Hamiltonian, times: &[f64]) -> f64 {
    paths.windows(2).map(|pair| log_weight_unchecked(&pair[0], &pair[1], h, times)).sum()
}

/// Curves for [`multi_curve_f_estimate`]: `k` bridges on `[p, q]` with entrance `xs` and exit `ys`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiCurveData {
    pub p: f64,
    pub q: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

/// Steps of the uniform grid used by [`multi_curve_f_estimate`] (the query times are added as nodes).
pub const MULTI_CURVE_STEPS: usize = 256;

/// Importance-sampling estimate of `P_H(Q_i(c) <= r, Q_i(d) <= r for all i)` with `f = +∞`, `g = −∞`.
pub fn multi_curve_f_estimate(
    data: &MultiCurveData,
    query: &TwoTimeQuery,
    h: &Hamiltonian,
    samples: u64,
    seed: u64,
) -> Result<MeanSummary> {
    let k = data.xs.len();
    if k == 0 || data.ys.len() != k {
        return Err(Error::Domain("need k >= 1 curves with matching entrance and exit data".into()));
    }
    let spec0 = BridgeSpec::new(data.p, data.q, 0.0, 0.0)?;
    if !(data.p < query.c && query.c < query.d && query.d < data.q) {
        return Err(Error::Domain(format!("need p < c < d < q, got c = {}, d = {}", query.c, query.d)));
    }
    let mut times = piecewise_times(&[data.p, data.q], &[MULTI_CURVE_STEPS]);
    times.extend([query.c, query.d]);
    times.sort_by(f64::total_cmp);
    times.dedup();
    let ic = times.iter().position(|&t| t == query.c).expect("query time inserted");
    let id = times.iter().position(|&t| t == query.d).expect("query time inserted");
    let parts = parallel_chunks(seed, TAG_MULTI_CURVE, samples, |rng, count| {
        let mut wm = WeightedMean::default();
        let mut paths = vec![Vec::with_capacity(times.len()); k];
        for _ in 0..count {
            for (i, path) in paths.iter_mut().enumerate() {
                let spec = BridgeSpec { x: data.xs[i], y: data.ys[i], ..spec0 };
                free_path(&spec, &times, rng, path);
            }
            let below = paths.iter().all(|p| p[ic] <= query.r && p[id] <= query.r);
            let w = if k > 1 { interaction_log_weight(&paths, h, &times).exp() } else { 1.0 };
            wm.push(if below { 1.0 } else { 0.0 }, w);
        }
        wm
    });
    let mut total = WeightedMean::default();
    for part in &parts {
        total.merge(part);
    }
    total.summary()
}

/// Window of the tail-event classifier at scale `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailWindow {
    pub n: f64,
    pub lambda: f64,
    pub m: f64,
    /// Inner half-width `b_n`, in `[n^{-5/4}, n^{-3/4}]`.
    pub b: f64,
    /// Outer half-width `a_n = b_n + n^{-2}`.
    pub a: f64,
    pub level: f64,
    pub v: f64,
}

impl TailWindow {
    /// `b_n = n^{-3/4}`, `W_n = λ⁻¹ log n`, `V_n = n^{-1/3}`.
    pub fn new(n: f64, lambda: f64, m: f64) -> Result<Self> {
        Self::with_inner(n, lambda, m, n.powf(-0.75))
    }

    pub fn with_inner(n: f64, lambda: f64, m: f64, b: f64) -> Result<Self> {
        if !(n > 1.0 && lambda > 0.0 && m > 0.0) {
            return Err(Error::Domain(format!("need n > 1, lambda > 0, M > 0; got {n}, {lambda}, {m}")));
        }
        let (lo, hi) = (n.powf(-1.25), n.powf(-0.75));
        if !(b >= lo * (1.0 - 1e-12) && b <= hi * (1.0 + 1e-12)) {
            return Err(Error::Inadmissible { w: n, inequality: format!("b_n = {b} outside [{lo}, {hi}]") });
        }
        Ok(Self { n, lambda, m, b, a: b + n.powi(-2), level: n.ln() / lambda, v: n.powf(-1.0 / 3.0) })
    }
}

/// Frequencies of the failure events given the two-time conditioning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEventEstimate {
    /// `P(Aᶜ ∪ Dᶜ ∪ Eᶜ | F)`.
    pub failure: MeanSummary,
    pub a_fail: f64,
    pub d_fail: f64,
    pub e_fail: f64,
}

/// Steps on each outer segment and on the inner window for the tail classifier.
pub const TAIL_SIDE_STEPS: usize = 128;
pub const TAIL_MIDDLE_STEPS: usize = 2048;

/// Samples the bridge on `[−a_n, a_n]` from `x` to `y` conditioned on
/// `B(±b_n) <= −W_n` and classifies it against the band events on the grid.
/// `v_slack` multiplies `V_n` (1 for the plain band events).
pub fn tail_event_conditional(
    window: &TailWindow,
    x: f64,
    y: f64,
    v_slack: f64,
    samples: u64,
    seed: u64,
) -> Result<TailEventEstimate> {
    if x.abs() > window.m || y.abs() > window.m {
        return Err(Error::Domain(format!("endpoints must lie in [-M, M] = [-{0}, {0}]", window.m)));
    }
    if samples == 0 {
        return Err(Error::NoSamples("sample budget is zero".into()));
    }
    let spec = BridgeSpec::new(-window.a, window.a, x, y)?;
    let (b, a) = (window.b, window.a);
    let times = piecewise_times(&[-a, -b, b, a], &[TAIL_SIDE_STEPS, TAIL_MIDDLE_STEPS, TAIL_SIDE_STEPS]);
    let pair = PairGaussian::new(&spec, -b, b)?;
    let (lvl, band) = (window.level, 2.0 * window.v * v_slack);
    let (lo_outer, hi_outer) = (-lvl - 1.0, window.m + 1.0);
    let i_c = TAIL_SIDE_STEPS;
    let i_d = TAIL_SIDE_STEPS + TAIL_MIDDLE_STEPS;
    let parts = parallel_chunks(seed, TAG_TAIL, samples, |rng, count| {
        let mut fail = MeanAccumulator::new();
        let mut counts = [0u64; 3];
        for _ in 0..count {
            let (vc, vd) = pair.sample_below(-lvl, crate::bridge::TRUNCATED_PAIR_SWEEPS, rng);
            let pins = [(-a, x), (-b, vc), (b, vd), (a, y)];
            let path = sample_pinned(&pins, &times, rng).expect("grid contains the pinned times");
            let outside = |s: &[f64]| s.iter().any(|&v| v < lo_outer || v > hi_outer);
            let a_bad = outside(&path[..=i_c]);
            let d_bad = outside(&path[i_d..]);
            let e_bad = path[i_c..=i_d].iter().any(|&v| (v + lvl).abs() > band);
            for (c, bad) in counts.iter_mut().zip([a_bad, d_bad, e_bad]) {
                *c += u64::from(bad);
            }
            fail.push(if a_bad || d_bad || e_bad { 1.0 } else { 0.0 });
        }
        (fail, counts)
    });
    let mut fail = MeanAccumulator::new();
    let mut counts = [0u64; 3];
    for (f, c) in &parts {
        fail.merge(f);
        for (t, v) in counts.iter_mut().zip(c) {
            *t += v;
        }
    }
    let n = samples as f64;
    Ok(TailEventEstimate {
        failure: fail.summary(),
        a_fail: counts[0] as f64 / n,
        d_fail: counts[1] as f64 / n,
        e_fail: counts[2] as f64 / n,
    })
}

/// Draws `samples` bridges from `spec` at `times` and counts how many reach `beta` on the grid.
pub fn grid_max_exceedance(spec: &BridgeSpec, times: &[f64], beta: f64, samples: u64, seed: u64, tag: u32) -> MeanSummary {
    let parts = parallel_chunks(seed, tag, samples, |rng: &mut StreamRng, count| {
        let mut acc = MeanAccumulator::new();
        let mut path = Vec::with_capacity(times.len());
        for _ in 0..count {
            path.clear();
            fill_bridge(spec.p, spec.x, spec.q, spec.y, times, rng, &mut path);
            let hit = spec.x >= beta || spec.y >= beta || path.iter().any(|&v| v >= beta);
            acc.push(if hit { 1.0 } else { 0.0 });
        }
        acc
    });
    merge_all(parts).summary()
}

/// MC frequency of `{B(c) <= r, B(d) <= r}` from exact bivariate draws of `(B(c), B(d))`.
pub fn two_time_below_mc(spec: &BridgeSpec, query: &TwoTimeQuery, samples: u64, seed: u64, tag: u32) -> Result<MeanSummary> {
    if !(spec.p < query.c && query.c < query.d && query.d < spec.q) {
        return Err(Error::Domain("need p < c < d < q".into()));
    }
    let times = [query.c, query.d];
    let parts = parallel_chunks(seed, tag, samples, |rng, count| {
        let mut acc = MeanAccumulator::new();
        let mut v = Vec::with_capacity(2);
        for _ in 0..count {
            v.clear();
            fill_bridge(spec.p, spec.x, spec.q, spec.y, &times, rng, &mut v);
            acc.push(if v[0] <= query.r && v[1] <= query.r { 1.0 } else { 0.0 });
        }
        acc
    });
    Ok(merge_all(parts).summary())
}

/// Samples one curve's midpoint under the uniform law on lattice paths, for weak-convergence checks.
pub fn lattice_midpoints<R: Rng + ?Sized>(
    sampler: &crate::lattice::UniformPathSampler,
    grid: &crate::lattice::Grid,
    x_index: i64,
    y_index: i64,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mid = grid.steps() / 2;
    (0..samples)
        .map(|_| sampler.sample(x_index, y_index, rng).map(|p| p.heights()[mid] as f64 * grid.dx))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::two_time_below_prob;
    use approx::assert_relative_eq;

    fn exp1() -> Hamiltonian {
        Hamiltonian::exponential(1.0).unwrap()
    }

    #[test]
    fn schedule_arithmetic() {
        let s = schedule(0.0, 2, 1.0, 100.0, &exp1()).unwrap();
        assert_relative_eq!(s.level, 100f64.ln(), max_relative = 1e-15);
        assert_eq!(s.beta, 1.0);
        assert_relative_eq!(s.c, -0.01, max_relative = 1e-12);
        assert_relative_eq!(s.d, 0.01, max_relative = 1e-12);
        assert_relative_eq!(s.a, s.c - 1e-4, max_relative = 1e-12);
        assert!(s.a < s.c && s.c < s.t1 && s.t1 < s.d && s.d < s.b);
        // d − c = 0.02 against [0.00316, 0.03162].
        assert!(s.d - s.c > 100f64.powf(-1.25) && s.d - s.c < 100f64.powf(-0.75));
        match schedule(0.0, 2, 1.0, 10.0, &exp1()) {
            Err(Error::Inadmissible { inequality, .. }) => assert!(inequality.contains("w^(-3/4)"), "{inequality}"),
            other => panic!("expected inadmissible, got {other:?}"),
        }
        assert!(s.check_within(-1.0, 1.0).is_ok());
        assert!(s.check_within(0.0, 1.0).is_err());
    }

    #[test]
    fn quadrature_nodes() {
        let s = schedule(0.0, 2, 1.0, 1e4, &exp1()).unwrap();
        let t = s.quadrature_times();
        assert_eq!(t.len(), 2 * SIDE_STEPS + MIDDLE_STEPS + 1);
        assert_eq!((t[0], t[SIDE_STEPS], t[SIDE_STEPS + MIDDLE_STEPS], t[t.len() - 1]), (s.a, s.c, s.d, s.b));
        assert!(t.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn predicted_limit_values() {
        assert_eq!(predicted_limit(0.0, 1.0, 3.0), 1.0);
        assert_eq!(predicted_limit(2.0, 1.0, f64::NEG_INFINITY), 1.0);
        assert_relative_eq!(predicted_limit(2.0, 1.0, 0.0), (-2.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn continuum_weight_constant_configuration() {
        let len = 0.7;
        let m = 10_000;
        let times = piecewise_times(&[0.0, len], &[m]);
        let q = vec![0.0; m + 1];
        let lower = vec![-1.0; m + 1];
        let lw = continuum_log_weight(&q, &lower, &exp1(), &times).unwrap();
        assert!((lw + len * (-1.0f64).exp()).abs() < 1e-6);
        assert_eq!(continuum_log_weight(&q, &lower, &Hamiltonian::zero(), &times).unwrap(), 0.0);
        let ninf = vec![f64::NEG_INFINITY; m + 1];
        assert_eq!(continuum_log_weight(&q, &ninf, &exp1(), &times).unwrap(), 0.0);
        assert!(continuum_log_weight(&q[1..], &lower, &exp1(), &times).is_err());
    }

    #[test]
    fn continuum_weight_first_order_convergence() {
        // Q(u) = u, lower ≡ 0 on [0, 1]: exact −∫ e^{−u} du = e^{−1} − 1.
        let exact = (-1.0f64).exp() - 1.0;
        let err = |m: usize| {
            let t = piecewise_times(&[0.0, 1.0], &[m]);
            let lower = vec![0.0; m + 1];
            (continuum_log_weight(&t, &lower, &exp1(), &t).unwrap() - exact).abs()
        };
        let (e1, e2) = (err(200), err(400));
        assert!((e1 / e2 - 2.0).abs() < 0.02, "{e1} {e2}");
    }

    #[test]
    fn zero_hamiltonian_ratio_is_exactly_one() {
        let s = schedule(0.0, 2, 1.0, 100.0, &exp1()).unwrap();
        let spec = BridgeSpec::new(s.a, s.b, 0.0, 0.0).unwrap();
        let r = estimate_conditioned_ratio(&spec, &s, |_| 0.0, &Hamiltonian::zero(), 2000, 1).unwrap();
        assert_eq!(r.ratio, 1.0);
        assert_eq!(r.stderr, 0.0);
    }

    #[test]
    fn ratio_is_dominated_and_near_limit() {
        let h = exp1();
        let s = schedule(0.0, 2, 1.0, 1000.0, &h).unwrap();
        let spec = BridgeSpec::new(s.a, s.b, 0.0, 0.0).unwrap();
        let r = estimate_conditioned_ratio(&spec, &s, |_| 0.0, &h, 20_000, 7).unwrap();
        assert!(r.ratio <= 1.0 + 3.0 * r.stderr);
        assert!((r.ratio - (-2.0f64).exp()).abs() < 0.05 * (-2.0f64).exp(), "{r:?}");
        let mis = BridgeSpec::new(s.a, s.b + 0.1, 0.0, 0.0).unwrap();
        assert!(estimate_conditioned_ratio(&mis, &s, |_| 0.0, &h, 10, 7).is_err());
    }

    #[test]
    fn normalization_estimates() {
        let lens = [0.25, 0.0625, 2f64.powi(-10)];
        let z = normalization_limit_estimate(0.0, &lens, &[0.0], &[0.0], |_| 0.0, &Hamiltonian::zero(), 500, 1).unwrap();
        assert!(z.iter().all(|m| m.mean == 1.0));
        let e = normalization_limit_estimate(0.0, &lens, &[0.0], &[0.0], |_| 0.0, &exp1(), 4000, 1).unwrap();
        assert!(e.iter().all(|m| m.mean > 0.0 && m.mean <= 1.0));
        assert!(e[0].mean < e[1].mean && e[1].mean < e[2].mean && e[2].mean > 0.99, "{e:?}");
        let two = normalization_limit_estimate(0.0, &lens, &[0.5, 0.0], &[0.5, 0.0], |_| 0.0, &exp1(), 4000, 2).unwrap();
        assert!(two[2].mean > 0.99);
    }

    #[test]
    fn multi_curve_reduces_to_quadrature() {
        let data = MultiCurveData { p: 0.0, q: 1.0, xs: vec![0.0], ys: vec![0.0] };
        let q = TwoTimeQuery { c: 0.3, d: 0.6, r: 0.2 };
        let spec = BridgeSpec::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let exact = two_time_below_prob(&spec, &q).unwrap();
        let est = multi_curve_f_estimate(&data, &q, &exp1(), 40_000, 3).unwrap();
        assert!((est.mean - exact).abs() < 3.0 * est.stderr, "{est:?} vs {exact}");
        let one = multi_curve_f_estimate(&data, &TwoTimeQuery { r: 1e9, ..q }, &exp1(), 1000, 3).unwrap();
        assert_eq!(one.mean, 1.0);
    }

    #[test]
    fn multi_curve_monotone_in_entrance() {
        let q = TwoTimeQuery { c: 0.3, d: 0.6, r: 0.0 };
        let est = |x0: f64| {
            let data = MultiCurveData { p: 0.0, q: 1.0, xs: vec![x0, -0.5], ys: vec![0.0, -0.5] };
            multi_curve_f_estimate(&data, &q, &exp1(), 20_000, 11).unwrap()
        };
        let (lo, hi) = (est(0.0), est(0.8));
        assert!(hi.mean <= lo.mean + 2.0 * (lo.stderr.hypot(hi.stderr)), "{lo:?} {hi:?}");
    }

    #[test]
    fn tail_events() {
        let win = TailWindow::new(16.0, 1.0, 1.0).unwrap();
        let est = tail_event_conditional(&win, 0.0, 0.0, 1.0, 2000, 4).unwrap();
        assert!((0.0..=1.0).contains(&est.failure.mean));
        let relaxed = tail_event_conditional(&win, 0.0, 0.0, 1e6, 2000, 4).unwrap();
        assert_eq!(relaxed.e_fail, 0.0);
        assert!(relaxed.failure.mean < 1e-3);
        assert!(TailWindow::with_inner(16.0, 1.0, 1.0, 0.5).is_err());
    }
}
