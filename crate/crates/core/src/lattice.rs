//! Discrete paths on the `(dt, dx)` lattice, boundary curves, the discrete
//! Boltzmann weight and exact distributions of small ensembles.
//!
//! Path values are integer multiples of `dx`; all path arithmetic happens on
//! the integer heights and is converted to reals only when a Hamiltonian is
//! evaluated.

use std::collections::BTreeMap;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext::ExtReal;
use crate::hamiltonian::Hamiltonian;
use crate::numeric::CompensatedSum;

/// Default bound on the product state space handled by exact enumeration.
pub const DEFAULT_STATE_CAP: u128 = 1_000_000;

/// The time/space lattice on `[a, b]` at scale `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub a: f64,
    pub b: f64,
    pub n: u32,
    pub dt: f64,
    pub dx: f64,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: u32) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && b > a) {
            return Err(Error::Domain(format!("grid needs finite a < b, got [{a}, {b}]")));
        }
        if n == 0 {
            return Err(Error::Domain("grid scale n must be at least 1".into()));
        }
        let dt = (b - a) / f64::from(n).powi(2);
        Ok(Self { a, b, n, dt, dx: (1.5 * dt).sqrt() })
    }

    /// Number of time steps, `n²`.
    #[inline]
    pub fn steps(&self) -> usize {
        (self.n as usize).pow(2)
    }

    /// Grid time `a + m·dt`; the last one is exactly `b`.
    #[inline]
    pub fn time(&self, m: usize) -> f64 {
        if m == self.steps() {
            self.b
        } else {
            self.a + m as f64 * self.dt
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|m| self.time(m)).collect()
    }

    /// Lattice index of a real value, if it lies on the lattice (relative tolerance 1e-9).
    pub fn index_of(&self, value: f64) -> Option<i64> {
        let r = (value / self.dx).round();
        ((value / self.dx - r).abs() <= 1e-9 * r.abs().max(1.0)).then_some(r as i64)
    }
}

/// Shorthand for [`Grid::new`].
pub fn make_grid(a: f64, b: f64, n: u32) -> Result<Grid> {
    Grid::new(a, b, n)
}

/// A lattice path stored by its integer heights at the `n² + 1` grid times.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DiscretePath {
    heights: Vec<i64>,
}

impl DiscretePath {
    pub fn from_increments(start_index: i64, increments: &[i8]) -> Result<Self> {
        let mut heights = Vec::with_capacity(increments.len() + 1);
        heights.push(start_index);
        let mut h = start_index;
        for &s in increments {
            if !(-1..=1).contains(&s) {
                return Err(Error::Domain(format!("increment {s} is not in {{-1, 0, 1}}")));
            }
            h += i64::from(s);
            heights.push(h);
        }
        Ok(Self { heights })
    }

    pub fn from_heights(heights: Vec<i64>) -> Result<Self> {
        if heights.is_empty() {
            return Err(Error::Domain("a path needs at least one height".into()));
        }
        if heights.windows(2).any(|w| (w[1] - w[0]).abs() > 1) {
            return Err(Error::Domain("consecutive heights differ by more than one step".into()));
        }
        Ok(Self { heights })
    }

    pub fn heights(&self) -> &[i64] {
        &self.heights
    }

    pub(crate) fn heights_mut(&mut self) -> &mut [i64] {
        &mut self.heights
    }

    pub fn start_index(&self) -> i64 {
        self.heights[0]
    }

    pub fn end_index(&self) -> i64 {
        self.heights[self.heights.len() - 1]
    }

    pub fn steps(&self) -> usize {
        self.heights.len() - 1
    }

    pub fn increments(&self) -> Vec<i8> {
        self.heights.windows(2).map(|w| (w[1] - w[0]) as i8).collect()
    }

    pub fn values(&self, dx: f64) -> Vec<f64> {
        self.heights.iter().map(|&h| h as f64 * dx).collect()
    }

    /// Comma-separated heights, used as a state id.
    pub fn id(&self) -> String {
        let parts: Vec<String> = self.heights.iter().map(i64::to_string).collect();
        parts.join(",")
    }
}

/// A boundary curve sampled at the grid times. Values may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BoundaryCurve {
    Constant(ExtReal),
    Values(Vec<ExtReal>),
}

impl BoundaryCurve {
    pub fn pos_inf() -> Self {
        BoundaryCurve::Constant(ExtReal::PosInf)
    }

    pub fn neg_inf() -> Self {
        BoundaryCurve::Constant(ExtReal::NegInf)
    }

    pub fn constant(v: f64) -> Self {
        BoundaryCurve::Constant(ExtReal::from(v))
    }

    /// Samples `f` at the grid times.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> ExtReal) -> Self {
        BoundaryCurve::Values(grid.times().into_iter().map(f).collect())
    }

    /// Value at grid index `m` as an `f64` (infinities included).
    #[inline]
    pub fn at(&self, m: usize) -> f64 {
        match self {
            BoundaryCurve::Constant(v) => v.to_f64(),
            BoundaryCurve::Values(v) => v[m].to_f64(),
        }
    }

    fn validate(&self, grid: &Grid, forbidden: ExtReal, role: &str) -> Result<()> {
        let bad = match self {
            BoundaryCurve::Constant(v) => *v == forbidden,
            BoundaryCurve::Values(v) => {
                if v.len() != grid.steps() + 1 {
                    return Err(Error::GridMismatch(format!(
                        "{role} boundary has {} values, grid has {} times",
                        v.len(),
                        grid.steps() + 1
                    )));
                }
                v.contains(&forbidden)
            }
        };
        if bad {
            return Err(Error::Domain(format!("the {role} boundary may not take the value {forbidden}")));
        }
        Ok(())
    }

    /// Pointwise `self <= other` at every grid time.
    pub fn le_on(&self, other: &BoundaryCurve, grid: &Grid) -> bool {
        (0..=grid.steps()).all(|m| self.at(m) <= other.at(m))
    }
}

/// `k` lattice paths (top to bottom) with the top boundary `f` and bottom boundary `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleState {
    pub grid: Grid,
    pub paths: Vec<DiscretePath>,
    pub f: BoundaryCurve,
    pub g: BoundaryCurve,
}

impl EnsembleState {
    pub fn new(grid: Grid, paths: Vec<DiscretePath>, f: BoundaryCurve, g: BoundaryCurve) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Domain("an ensemble needs at least one curve".into()));
        }
        for (i, p) in paths.iter().enumerate() {
            if p.steps() != grid.steps() {
                return Err(Error::GridMismatch(format!(
                    "curve {} has {} steps, grid has {}",
                    i + 1,
                    p.steps(),
                    grid.steps()
                )));
            }
        }
        f.validate(&grid, ExtReal::NegInf, "top")?;
        g.validate(&grid, ExtReal::PosInf, "bottom")?;
        Ok(Self { grid, paths, f, g })
    }

    pub fn k(&self) -> usize {
        self.paths.len()
    }

    /// `Y_i(t_m)` for `i` in `0..=k+1`, where `Y_0 = f` and `Y_{k+1} = g`.
    #[inline]
    pub fn level(&self, i: usize, m: usize) -> f64 {
        if i == 0 {
            self.f.at(m)
        } else if i == self.paths.len() + 1 {
            self.g.at(m)
        } else {
            self.paths[i - 1].heights[m] as f64 * self.grid.dx
        }
    }

    /// Argument of `H` for the pair `(Y_i, Y_{i+1})` at time `m`: `Y_{i+1} - Y_i`.
    ///
    /// Between two paths the difference is formed on integer heights so that
    /// equal configurations always yield bit-identical reals.
    #[inline]
    pub fn gap(&self, i: usize, m: usize) -> f64 {
        let k = self.paths.len();
        if i >= 1 && i < k {
            (self.paths[i].heights[m] - self.paths[i - 1].heights[m]) as f64 * self.grid.dx
        } else {
            self.level(i + 1, m) - self.level(i, m)
        }
    }

    /// Ensemble id: per-curve height lists joined by `|`.
    pub fn id(&self) -> String {
        let parts: Vec<String> = self.paths.iter().map(DiscretePath::id).collect();
        parts.join("|")
    }
}

/// `log W = -Σ_{i=0}^{k} Σ_m dt·H(Y_{i+1}(t_m) - Y_i(t_m))` over all `n² + 1` grid times.
pub fn log_weight(state: &EnsembleState, h: &Hamiltonian) -> Result<f64> {
    if h.is_zero() {
        return Ok(0.0);
    }
    let mut sum = CompensatedSum::new();
    for i in 0..=state.k() {
        for m in 0..=state.grid.steps() {
            let x = state.gap(i, m);
            if x.is_nan() || x == f64::INFINITY {
                return Err(Error::Domain(format!("interaction argument {x} between curves {i} and {}", i + 1)));
            }
            sum.add(h.eval(x));
        }
    }
    Ok(-state.grid.dt * sum.value())
}

/// Number of increment sequences of length `steps` with net sum `gap`, saturating at `u128::MAX`.
pub fn count_paths(steps: usize, gap: i64) -> u128 {
    if gap.unsigned_abs() as usize > steps {
        return 0;
    }
    // counts[g + steps] after r steps
    let width = 2 * steps + 1;
    let mut counts = vec![0u128; width];
    counts[steps] = 1;
    for _ in 0..steps {
        let mut next = vec![0u128; width];
        for (j, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            for d in [j.wrapping_sub(1), j, j + 1] {
                if d < width {
                    next[d] = next[d].saturating_add(c);
                }
            }
        }
        counts = next;
    }
    counts[(gap + steps as i64) as usize]
}

/// All paths from `x_index` to `y_index`, in decreasing lexicographic order
/// under `+1 > 0 > -1`. Empty when the gap exceeds `n²`.
pub fn enumerate_paths(grid: &Grid, x_index: i64, y_index: i64) -> Vec<DiscretePath> {
    let steps = grid.steps();
    let mut out = Vec::new();
    if (y_index - x_index).unsigned_abs() as usize > steps {
        return out;
    }
    let mut heights = vec![x_index; steps + 1];
    enumerate_rec(&mut heights, 1, y_index, &mut out);
    out
}

fn enumerate_rec(heights: &mut Vec<i64>, m: usize, target: i64, out: &mut Vec<DiscretePath>) {
    let steps = heights.len() - 1;
    if m > steps {
        out.push(DiscretePath { heights: heights.clone() });
        return;
    }
    let remaining = (steps - m) as i64;
    for s in [1, 0, -1] {
        let h = heights[m - 1] + s;
        if (target - h).abs() <= remaining {
            heights[m] = h;
            enumerate_rec(heights, m + 1, target, out);
        }
    }
}

/// The lexicographically maximal path: up-steps first, at most one flat step, then down-steps.
pub fn maximal_path(grid: &Grid, x_index: i64, y_index: i64) -> Result<DiscretePath> {
    let steps = grid.steps() as i64;
    let gap = y_index - x_index;
    if gap.abs() > steps {
        return Err(Error::EmptyStateSpace(format!(
            "no path covers the index gap {gap} in {steps} steps"
        )));
    }
    let ups = (gap + steps).div_euclid(2);
    let flat = (gap + steps).rem_euclid(2);
    let downs = (steps - gap).div_euclid(2);
    let mut inc = Vec::with_capacity(steps as usize);
    inc.extend(std::iter::repeat_n(1i8, ups as usize));
    inc.extend(std::iter::repeat_n(0i8, flat as usize));
    inc.extend(std::iter::repeat_n(-1i8, downs as usize));
    DiscretePath::from_increments(x_index, &inc)
}

/// The exact Boltzmann law over the product state space.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    pub states: Vec<EnsembleState>,
    pub probabilities: Vec<f64>,
    /// `log Z`, the log of the summed (unnormalised) weights.
    pub log_partition: f64,
}

impl ExactDistribution {
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.states.iter().map(EnsembleState::id).zip(self.probabilities.iter().copied()).collect()
    }

    pub fn index_of(&self) -> BTreeMap<String, usize> {
        self.states.iter().enumerate().map(|(i, s)| (s.id(), i)).collect()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Boundary and endpoint data of an ensemble: entrance and exit heights per curve plus `f`, `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleData {
    pub grid: Grid,
    pub entrance: Vec<i64>,
    pub exit: Vec<i64>,
    pub f: BoundaryCurve,
    pub g: BoundaryCurve,
}

impl EnsembleData {
    pub fn new(grid: Grid, entrance: Vec<i64>, exit: Vec<i64>, f: BoundaryCurve, g: BoundaryCurve) -> Result<Self> {
        if entrance.is_empty() || entrance.len() != exit.len() {
            return Err(Error::Domain(format!(
                "need matching non-empty entrance/exit data, got {} and {}",
                entrance.len(),
                exit.len()
            )));
        }
        f.validate(&grid, ExtReal::NegInf, "top")?;
        g.validate(&grid, ExtReal::PosInf, "bottom")?;
        Ok(Self { grid, entrance, exit, f, g })
    }

    pub fn k(&self) -> usize {
        self.entrance.len()
    }

    /// Size of the product state space (saturating).
    pub fn state_space_size(&self) -> u128 {
        let steps = self.grid.steps();
        self.entrance
            .iter()
            .zip(&self.exit)
            .map(|(&x, &y)| count_paths(steps, y - x))
            .fold(1u128, |acc, c| acc.saturating_mul(c))
    }

    /// Every ensemble state in the product space, first curve varying slowest.
    pub fn enumerate_states(&self, cap: u128) -> Result<Vec<EnsembleState>> {
        let size = self.state_space_size();
        if size == 0 {
            return Err(Error::EmptyStateSpace(format!(
                "some entrance/exit gap exceeds {} steps",
                self.grid.steps()
            )));
        }
        if size > cap {
            return Err(Error::StateSpaceTooLarge { size, cap });
        }
        let per_curve: Vec<Vec<DiscretePath>> = self
            .entrance
            .iter()
            .zip(&self.exit)
            .map(|(&x, &y)| enumerate_paths(&self.grid, x, y))
            .collect();
        let mut states = Vec::with_capacity(size as usize);
        let mut odometer = vec![0usize; per_curve.len()];
        loop {
            let paths = odometer.iter().zip(&per_curve).map(|(&j, ps)| ps[j].clone()).collect();
            states.push(EnsembleState { grid: self.grid, paths, f: self.f.clone(), g: self.g.clone() });
            let mut i = per_curve.len();
            loop {
                if i == 0 {
                    return Ok(states);
                }
                i -= 1;
                odometer[i] += 1;
                if odometer[i] < per_curve[i].len() {
                    break;
                }
                odometer[i] = 0;
            }
        }
    }

    /// The maximal initial state: every curve at its maximal path.
    pub fn maximal_state(&self) -> Result<EnsembleState> {
        let paths = self
            .entrance
            .iter()
            .zip(&self.exit)
            .map(|(&x, &y)| maximal_path(&self.grid, x, y))
            .collect::<Result<Vec<_>>>()?;
        EnsembleState::new(self.grid, paths, self.f.clone(), self.g.clone())
    }
}

/// Exact discrete Boltzmann probabilities, normalised in log space.
pub fn exact_boltzmann(data: &EnsembleData, h: &Hamiltonian, cap: u128) -> Result<ExactDistribution> {
    let states = data.enumerate_states(cap)?;
    let log_w = states.iter().map(|s| log_weight(s, h)).collect::<Result<Vec<_>>>()?;
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rel: Vec<f64> = log_w.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = rel.iter().copied().collect::<CompensatedSum>().value();
    Ok(ExactDistribution {
        probabilities: rel.iter().map(|r| r / total).collect(),
        log_partition: max + total.ln(),
        states,
    })
}

/// Exact uniform sampler on the paths from `x` to `y` in a fixed number of
/// steps, by sequential draws against log path counts.
#[derive(Debug, Clone)]
pub struct UniformPathSampler {
    steps: usize,
    // log_counts[r][g + r] = log #(length-r sequences with sum g)
    log_counts: Vec<Vec<f64>>,
}

impl UniformPathSampler {
    pub fn new(steps: usize) -> Self {
        let mut log_counts = Vec::with_capacity(steps + 1);
        log_counts.push(vec![0.0]);
        for r in 1..=steps {
            let prev: &Vec<f64> = &log_counts[r - 1];
            let get = |g: i64| -> f64 {
                let j = g + (r as i64 - 1);
                if j < 0 || j as usize >= prev.len() {
                    f64::NEG_INFINITY
                } else {
                    prev[j as usize]
                }
            };
            let row = (-(r as i64)..=r as i64)
                .map(|g| log_sum_exp3(get(g - 1), get(g), get(g + 1)))
                .collect();
            log_counts.push(row);
        }
        Self { steps, log_counts }
    }

    fn log_count(&self, r: usize, gap: i64) -> f64 {
        if gap.unsigned_abs() as usize > r {
            f64::NEG_INFINITY
        } else {
            self.log_counts[r][(gap + r as i64) as usize]
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, x_index: i64, y_index: i64, rng: &mut R) -> Result<DiscretePath> {
        let gap = y_index - x_index;
        if gap.unsigned_abs() as usize > self.steps {
            return Err(Error::EmptyStateSpace(format!("index gap {gap} exceeds {} steps", self.steps)));
        }
        let mut heights = Vec::with_capacity(self.steps + 1);
        let mut h = x_index;
        heights.push(h);
        for m in 0..self.steps {
            let r = self.steps - m - 1;
            let need = y_index - h;
            let base = self.log_count(r + 1, need);
            let u: f64 = rng.sample(Open01);
            let mut acc = 0.0;
            let mut chosen = -1;
            for s in [1i64, 0] {
                acc += (self.log_count(r, need - s) - base).exp();
                if u < acc {
                    chosen = s;
                    break;
                }
            }
            // Rounding can leave the last branch infeasible; fall back to a feasible step.
            if (need - chosen).unsigned_abs() as usize > r {
                chosen = [1i64, 0, -1].into_iter().find(|s| ((need - s).unsigned_abs() as usize) <= r).unwrap_or(0);
            }
            h += chosen;
            heights.push(h);
        }
        Ok(DiscretePath { heights })
    }
}

fn log_sum_exp3(a: f64, b: f64, c: f64) -> f64 {
    let m = a.max(b).max(c);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp() + (c - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seed_policy;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn g2() -> Grid {
        Grid::new(0.0, 1.0, 2).unwrap()
    }

    #[test]
    fn grid_constants() {
        let g = g2();
        assert_eq!(g.dt, 0.25);
        assert_relative_eq!(g.dx, (3.0f64 / 8.0).sqrt(), max_relative = 1e-15);
        assert_relative_eq!(2.0 / 3.0 * g.dx * g.dx * 4.0, 1.0, max_relative = 1e-12);
        assert!(Grid::new(0.0, 1.0, 0).is_err());
        assert!(Grid::new(1.0, 1.0, 2).is_err());
        assert_eq!(g.times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_paths(&g2(), 0, 0).len(), 19);
        let g1 = Grid::new(0.0, 1.0, 1).unwrap();
        assert_eq!(enumerate_paths(&g1, 0, 1).len(), 1);
        assert!(enumerate_paths(&g2(), 0, 5).is_empty());
        // Brute force over all 3^4 sequences.
        let brute = (0..81).filter(|code| {
            let mut c = *code;
            let mut s = 0i64;
            for _ in 0..4 {
                s += (c % 3) as i64 - 1;
                c /= 3;
            }
            s == 0
        });
        assert_eq!(brute.count(), 19);
        assert_eq!(count_paths(4, 0), 19);
        assert_eq!(count_paths(16, 3), enumerate_paths(&Grid::new(0.0, 1.0, 4).unwrap(), 0, 3).len() as u128);
    }

    #[test]
    fn maximal_path_examples() {
        assert_eq!(maximal_path(&g2(), 0, 0).unwrap().increments(), vec![1, 1, -1, -1]);
        assert_eq!(maximal_path(&g2(), 0, 1).unwrap().increments(), vec![1, 1, 0, -1]);
        assert!(maximal_path(&g2(), 0, 5).is_err());
    }

    #[test]
    fn log_weight_examples() {
        let flat = DiscretePath::from_heights(vec![0; 5]).unwrap();
        let exp1 = Hamiltonian::exponential(1.0).unwrap();
        let s = EnsembleState::new(g2(), vec![flat.clone()], BoundaryCurve::pos_inf(), BoundaryCurve::neg_inf()).unwrap();
        assert_eq!(log_weight(&s, &exp1).unwrap(), 0.0);
        assert_eq!(log_weight(&s, &Hamiltonian::zero()).unwrap(), 0.0);
        let s = EnsembleState::new(g2(), vec![flat], BoundaryCurve::pos_inf(), BoundaryCurve::constant(-1.0)).unwrap();
        // Five grid times, each contributing 0.25·e^{-1}.
        let oracle = -(0..5).map(|_| 0.25 * (-1.0f64).exp()).sum::<f64>();
        assert_relative_eq!(log_weight(&s, &exp1).unwrap(), oracle, max_relative = 1e-15);
        assert_relative_eq!(oracle, -0.459_849_301_464_302_9, max_relative = 1e-12);
    }

    #[test]
    fn boundary_validation() {
        let flat = DiscretePath::from_heights(vec![0; 5]).unwrap();
        assert!(EnsembleState::new(g2(), vec![flat.clone()], BoundaryCurve::neg_inf(), BoundaryCurve::neg_inf()).is_err());
        assert!(EnsembleState::new(g2(), vec![flat.clone()], BoundaryCurve::pos_inf(), BoundaryCurve::pos_inf()).is_err());
        let short = BoundaryCurve::Values(vec![ExtReal::Finite(0.0); 3]);
        assert!(EnsembleState::new(g2(), vec![flat], BoundaryCurve::pos_inf(), short).is_err());
    }

    fn e1_data() -> EnsembleData {
        EnsembleData::new(g2(), vec![0], vec![0], BoundaryCurve::pos_inf(), BoundaryCurve::constant(-2.0)).unwrap()
    }

    #[test]
    fn exact_boltzmann_matches_resummation() {
        let h = Hamiltonian::exponential(1.0).unwrap();
        let dist = exact_boltzmann(&e1_data(), &h, DEFAULT_STATE_CAP).unwrap();
        assert_eq!(dist.len(), 19);
        let total: f64 = dist.probabilities.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Independent oracle: walk all 81 increment codes, weight each bridge by hand.
        let dx = (3.0f64 / 8.0).sqrt();
        let mut weights = BTreeMap::new();
        for code in 0..81u32 {
            let mut c = code;
            let mut hs = vec![0i64];
            for _ in 0..4 {
                hs.push(hs.last().unwrap() + (c % 3) as i64 - 1);
                c /= 3;
            }
            if hs[4] != 0 {
                continue;
            }
            let e: f64 = hs.iter().map(|&v| 0.25 * (-2.0 - v as f64 * dx).exp()).sum();
            let id: Vec<String> = hs.iter().map(|v| v.to_string()).collect();
            weights.insert(id.join(","), (-e).exp());
        }
        let z: f64 = weights.values().sum();
        let map = dist.to_map();
        assert_eq!(map.len(), weights.len());
        for (id, w) in &weights {
            assert_relative_eq!(map[id], w / z, max_relative = 1e-12);
        }
        assert_relative_eq!(dist.log_partition, z.ln(), max_relative = 1e-12);
    }

    #[test]
    fn zero_hamiltonian_is_uniform() {
        let data = EnsembleData::new(g2(), vec![0, 0], vec![1, -1], BoundaryCurve::pos_inf(), BoundaryCurve::neg_inf()).unwrap();
        let dist = exact_boltzmann(&data, &Hamiltonian::zero(), DEFAULT_STATE_CAP).unwrap();
        let (lo, hi) = dist.probabilities.iter().fold((1.0f64, 0.0f64), |(l, h), &p| (l.min(p), h.max(p)));
        assert_eq!(lo, hi);
        assert_eq!(dist.len() as u128, data.state_space_size());
    }

    #[test]
    fn cap_and_empty_errors() {
        let big = EnsembleData::new(Grid::new(0.0, 1.0, 4).unwrap(), vec![0, 0], vec![0, 0], BoundaryCurve::pos_inf(), BoundaryCurve::neg_inf()).unwrap();
        assert!(matches!(exact_boltzmann(&big, &Hamiltonian::zero(), 1000), Err(Error::StateSpaceTooLarge { .. })));
        let empty = EnsembleData::new(g2(), vec![0], vec![7], BoundaryCurve::pos_inf(), BoundaryCurve::neg_inf()).unwrap();
        assert!(matches!(exact_boltzmann(&empty, &Hamiltonian::zero(), 1000), Err(Error::EmptyStateSpace(_))));
    }

    #[test]
    fn gibbs_factorization_at_middle_time() {
        // Conditional law of the middle height given its neighbours equals the
        // weight restricted to the middle term, renormalised.
        let h = Hamiltonian::exponential(1.0).unwrap();
        let dist = exact_boltzmann(&e1_data(), &h, DEFAULT_STATE_CAP).unwrap();
        let dx = g2().dx;
        let mut groups: BTreeMap<(i64, i64), Vec<(i64, f64)>> = BTreeMap::new();
        for (s, &p) in dist.states.iter().zip(&dist.probabilities) {
            let hs = s.paths[0].heights();
            groups.entry((hs[1], hs[3])).or_default().push((hs[2], p));
        }
        for ((l, r), members) in groups {
            let total: f64 = members.iter().map(|m| m.1).sum();
            let local: Vec<f64> = members.iter().map(|&(mid, _)| (-0.25 * (-2.0 - mid as f64 * dx).exp()).exp()).collect();
            let ltotal: f64 = local.iter().sum();
            for ((mid, p), w) in members.iter().zip(&local) {
                assert!((mid - l).abs() <= 1 && (r - mid).abs() <= 1);
                assert_relative_eq!(p / total, w / ltotal, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn uniform_sampler_matches_enumeration() {
        let grid = g2();
        let paths = enumerate_paths(&grid, 0, 1);
        let sampler = UniformPathSampler::new(grid.steps());
        let mut rng = seed_policy(5, 0);
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        let draws = 160_000u64;
        for _ in 0..draws {
            *counts.entry(sampler.sample(0, 1, &mut rng).unwrap().id()).or_default() += 1;
        }
        assert_eq!(counts.len(), paths.len());
        let expect = draws as f64 / paths.len() as f64;
        for c in counts.values() {
            assert!((*c as f64 - expect).abs() < 5.0 * expect.sqrt(), "{c} vs {expect}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn maximal_path_is_lexicographic_max(n in 1u32..4, x in -3i64..3, y in -3i64..3) {
            let grid = Grid::new(0.0, 1.0, n).unwrap();
            let paths = enumerate_paths(&grid, x, y);
            if paths.is_empty() {
                prop_assert!(maximal_path(&grid, x, y).is_err());
            } else {
                let m = maximal_path(&grid, x, y).unwrap();
                let best = paths.iter().map(|p| p.increments()).max().unwrap();
                prop_assert_eq!(m.increments(), best);
                prop_assert_eq!(&paths[0], &m);
            }
        }

        #[test]
        fn zero_hamiltonian_has_zero_log_weight(seed in 0u64..1000, k in 1usize..4) {
            let grid = Grid::new(0.0, 2.0, 3).unwrap();
            let sampler = UniformPathSampler::new(grid.steps());
            let mut rng = seed_policy(seed, 0);
            let paths = (0..k).map(|_| sampler.sample(0, 2, &mut rng).unwrap()).collect();
            let s = EnsembleState::new(grid, paths, BoundaryCurve::constant(1.0), BoundaryCurve::constant(-1.0)).unwrap();
            prop_assert_eq!(log_weight(&s, &Hamiltonian::zero()).unwrap(), 0.0);
            prop_assert!(log_weight(&s, &Hamiltonian::exponential(1.0).unwrap()).unwrap() <= 0.0);
        }
    }
}
