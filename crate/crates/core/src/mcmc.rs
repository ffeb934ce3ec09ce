//! Metropolis dynamics on discrete ensembles.
//!
//! Every interior site `(i, r)` carries a rate-one clock. The continuous-time
//! chain is simulated through its embedded jump chain: an event picks a site
//! uniformly, proposes `δ ∈ {-1, 0, 1}` uniformly and accepts when the move
//! stays on the lattice and `U <= W'/W`. Two chains driven by the same
//! `(site, δ, U)` stream form the monotone coupling.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::lattice::{log_weight, EnsembleData, EnsembleState, ExactDistribution};
use crate::numeric::total_variation;
use crate::rng::StreamRng;

/// Largest state space handed to the dense stationary solve.
pub const DENSE_SOLVE_CAP: usize = 2048;

/// Events kept in the coupling trace ring buffer.
pub const TRACE_WINDOW: usize = 64;

/// A chain state: an ensemble whose interior heights change by accepted moves.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    state: EnsembleState,
}

/// Randomness consumed by one event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventDraw {
    /// Curve index, `1..=k`.
    pub curve: usize,
    /// Interior time index, `1..n²`.
    pub site: usize,
    pub delta: i8,
    pub u: f64,
}

/// An event and whether the move was accepted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub draw: EventDraw,
    pub accepted: bool,
}

impl ChainState {
    pub fn new(state: EnsembleState) -> Self {
        Self { state }
    }

    /// Chain started from the maximal path of every curve.
    pub fn maximal(data: &EnsembleData) -> Result<Self> {
        Ok(Self::new(data.maximal_state()?))
    }

    pub fn state(&self) -> &EnsembleState {
        &self.state
    }

    pub fn into_state(self) -> EnsembleState {
        self.state
    }

    pub fn k(&self) -> usize {
        self.state.k()
    }

    /// Number of interior sites `k·(n² − 1)`.
    pub fn interior_sites(&self) -> usize {
        self.k() * self.state.grid.steps().saturating_sub(1)
    }

    /// True when no move can ever be accepted (every curve is forced).
    pub fn is_singleton(&self) -> bool {
        let steps = self.state.grid.steps() as i64;
        self.state.paths.iter().all(|p| (p.end_index() - p.start_index()).abs() == steps)
    }

    #[inline]
    pub fn height(&self, curve: usize, site: usize) -> i64 {
        self.state.paths[curve - 1].heights()[site]
    }

    fn check_site(&self, curve: usize, site: usize) -> Result<()> {
        if curve == 0 || curve > self.k() {
            return Err(Error::Domain(format!("curve index {curve} outside 1..={}", self.k())));
        }
        if site == 0 || site >= self.state.grid.steps() {
            return Err(Error::Domain(format!(
                "site {site} is not interior (valid: 1..{})",
                self.state.grid.steps()
            )));
        }
        Ok(())
    }

    /// Candidate height after moving `(curve, site)` by `delta`, or `None` if an
    /// adjacent increment would leave `{-1, 0, 1}`.
    pub fn propose(&self, curve: usize, site: usize, delta: i8) -> Result<Option<i64>> {
        self.check_site(curve, site)?;
        Ok(self.propose_unchecked(curve, site, delta))
    }

    #[inline]
    fn propose_unchecked(&self, curve: usize, site: usize, delta: i8) -> Option<i64> {
        let hs = self.state.paths[curve - 1].heights();
        let cand = hs[site] + i64::from(delta);
        ((cand - hs[site - 1]).abs() <= 1 && (hs[site + 1] - cand).abs() <= 1).then_some(cand)
    }

    /// Interaction energy of curve `curve` at `site` if its height were `height`.
    #[inline]
    fn local_energy(&self, curve: usize, site: usize, height: i64, h: &Hamiltonian) -> f64 {
        let s = &self.state;
        let k = s.k();
        let dx = s.grid.dx;
        // Argument formed as in EnsembleState::gap so local and global sums agree bit for bit.
        let above = if curve == 1 {
            height as f64 * dx - s.f.at(site)
        } else {
            (height - s.paths[curve - 2].heights()[site]) as f64 * dx
        };
        let below = if curve == k {
            s.g.at(site) - height as f64 * dx
        } else {
            (s.paths[curve].heights()[site] - height) as f64 * dx
        };
        h.eval(above) + h.eval(below)
    }

    /// `log W(after) − log W(before)` for moving `(curve, site)` to `candidate`.
    pub fn acceptance_log_ratio(&self, curve: usize, site: usize, candidate: i64, h: &Hamiltonian) -> f64 {
        if h.is_zero() {
            return 0.0;
        }
        let old = self.height(curve, site);
        if old == candidate {
            return 0.0;
        }
        -self.state.grid.dt * (self.local_energy(curve, site, candidate, h) - self.local_energy(curve, site, old, h))
    }

    /// Draws the next event's randomness.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> EventDraw {
        draw_event(self.k(), self.state.grid.steps(), rng)
    }

    /// Applies a drawn event; returns whether the move was accepted.
    pub fn apply(&mut self, draw: &EventDraw, h: &Hamiltonian) -> bool {
        let Some(cand) = self.propose_unchecked(draw.curve, draw.site, draw.delta) else {
            return false;
        };
        if draw.delta == 0 {
            return true;
        }
        let lr = self.acceptance_log_ratio(draw.curve, draw.site, cand, h);
        let accept = lr >= 0.0 || draw.u <= lr.exp();
        if accept {
            self.state.paths[draw.curve - 1].heights_mut()[draw.site] = cand;
        }
        accept
    }

    /// One event of the jump chain.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R, h: &Hamiltonian) -> EventRecord {
        let draw = self.draw(rng);
        let accepted = self.apply(&draw, h);
        EventRecord { draw, accepted }
    }
}

/// Uniform site among `k·(steps − 1)`, uniform `δ`, and `U ~ (0, 1)`. `U` is
/// always drawn so two chains reading one stream stay aligned.
pub fn draw_event<R: Rng + ?Sized>(k: usize, steps: usize, rng: &mut R) -> EventDraw {
    let per_curve = steps.saturating_sub(1).max(1);
    let idx = rng.random_range(0..k * per_curve);
    let delta = rng.random_range(0..3u8) as i8 - 1;
    let u: f64 = rng.sample(Open01);
    EventDraw { curve: idx / per_curve + 1, site: idx % per_curve + 1, delta, u }
}

/// Event budget, burn-in and thinning of a chain run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub event_budget: u64,
    pub seed: u64,
    pub burn_in: u64,
    pub thinning: u64,
}

impl RunConfig {
    /// Defaults scaled to the ensemble: burn-in `50·k·n²`, thinning `k·n²`.
    pub fn with_defaults(k: usize, steps: usize, samples: u64, seed: u64) -> Self {
        let sweep = (k * steps) as u64;
        let burn_in = 50 * sweep;
        Self { event_budget: burn_in + samples * sweep, seed, burn_in, thinning: sweep }
    }

    pub fn validate(&self) -> Result<()> {
        if self.event_budget < self.burn_in {
            return Err(Error::Domain(format!(
                "event budget {} is below the burn-in {}",
                self.event_budget, self.burn_in
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Domain("thinning must be positive".into()));
        }
        Ok(())
    }

    pub fn samples(&self) -> u64 {
        (self.event_budget - self.burn_in) / self.thinning
    }
}

/// Runs a single chain, calling `on_sample` after burn-in every `thinning` events.
pub fn run_chain<R: Rng + ?Sized>(
    chain: &mut ChainState,
    h: &Hamiltonian,
    config: &RunConfig,
    rng: &mut R,
    mut on_sample: impl FnMut(&ChainState),
) -> Result<u64> {
    config.validate()?;
    if chain.interior_sites() == 0 {
        return Err(Error::EmptyStateSpace("the grid has no interior sites to update".into()));
    }
    let mut accepted = 0;
    for _ in 0..config.burn_in {
        accepted += u64::from(chain.step(rng, h).accepted);
    }
    for _ in 0..config.samples() {
        for _ in 0..config.thinning {
            accepted += u64::from(chain.step(rng, h).accepted);
        }
        on_sample(chain);
    }
    Ok(accepted)
}

/// Empirical law of thinned chain samples over the states of `exact`.
pub fn empirical_distribution(
    data: &EnsembleData,
    exact: &ExactDistribution,
    h: &Hamiltonian,
    config: &RunConfig,
    rng: &mut StreamRng,
) -> Result<Vec<f64>> {
    let index = exact.index_of();
    let mut counts = vec![0u64; exact.len()];
    let mut chain = ChainState::maximal(data)?;
    let mut missing = None;
    run_chain(&mut chain, h, config, rng, |c| match index.get(&c.state().id()) {
        Some(&j) => counts[j] += 1,
        None => missing = Some(c.state().id()),
    })?;
    if let Some(id) = missing {
        return Err(Error::Domain(format!("chain visited {id}, which is not in the enumerated space")));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::NoSamples("the run recorded no samples".into()));
    }
    Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Two chains with ordered data sharing one event stream.
#[derive(Debug, Clone)]
pub struct CoupledState {
    pub bottom: ChainState,
    pub top: ChainState,
}

impl CoupledState {
    /// Validates the order of entrance, exit and boundary data and of the current paths.
    pub fn new(bottom: ChainState, top: ChainState) -> Result<Self> {
        let (b, t) = (bottom.state(), top.state());
        if b.grid != t.grid || b.k() != t.k() {
            return Err(Error::GridMismatch("coupled chains need the same grid and curve count".into()));
        }
        if !b.f.le_on(&t.f, &b.grid) || !b.g.le_on(&t.g, &b.grid) {
            return Err(Error::Domain("boundary curves are not ordered (need f_b <= f_t and g_b <= g_t)".into()));
        }
        for (pb, pt) in b.paths.iter().zip(&t.paths) {
            if pb.start_index() > pt.start_index() || pb.end_index() > pt.end_index() {
                return Err(Error::Domain("entrance/exit data are not ordered".into()));
            }
            if pb.heights().iter().zip(pt.heights()).any(|(x, y)| x > y) {
                return Err(Error::Domain("initial paths are not pointwise ordered".into()));
            }
        }
        Ok(Self { bottom, top })
    }

    /// Both chains started from their maximal paths.
    pub fn maximal(bottom: &EnsembleData, top: &EnsembleData) -> Result<Self> {
        Self::new(ChainState::maximal(bottom)?, ChainState::maximal(top)?)
    }

    fn ordered_at(&self, curve: usize, site: usize) -> bool {
        self.bottom.height(curve, site) <= self.top.height(curve, site)
    }

    /// Pointwise order over every curve and time.
    pub fn is_ordered(&self) -> bool {
        self.bottom
            .state()
            .paths
            .iter()
            .zip(&self.top.state().paths)
            .all(|(b, t)| b.heights().iter().zip(t.heights()).all(|(x, y)| x <= y))
    }
}

/// Summary of a coupled run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub events: u64,
    pub violations: u64,
    pub accepted_bottom: u64,
    pub accepted_top: u64,
    pub coalesced: bool,
    pub first_violation: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
struct TraceEntry {
    event_index: u64,
    curve: usize,
    site: usize,
    delta: i8,
    u: f64,
    accepted_bottom: bool,
    accepted_top: bool,
}

#[derive(Serialize)]
struct TraceDump<'a> {
    event_index: u64,
    recent_events: &'a VecDeque<TraceEntry>,
    bottom: Vec<Vec<i64>>,
    top: Vec<Vec<i64>>,
}

/// Runs the coupled chains for `config.event_budget` events on one stream.
///
/// A Hamiltonian not declared convex is refused unless `allow_nonconvex` is
/// set; then order violations are counted instead of aborting the run. With a
/// convex Hamiltonian any violation is an error carrying a JSON trace of the
/// last [`TRACE_WINDOW`] events and both states.
pub fn run_coupled(
    coupled: &mut CoupledState,
    h: &Hamiltonian,
    config: &RunConfig,
    rng: &mut StreamRng,
    allow_nonconvex: bool,
) -> Result<CouplingReport> {
    config.validate()?;
    let strict = h.declared_convex();
    if !strict && !allow_nonconvex {
        return Err(Error::NonConvexHamiltonian(h.name().to_string()));
    }
    if !coupled.is_ordered() {
        return Err(Error::Domain("coupled chains start out of order".into()));
    }
    let (k, steps) = (coupled.bottom.k(), coupled.bottom.state().grid.steps());
    if steps < 2 {
        return Err(Error::EmptyStateSpace("the grid has no interior sites to update".into()));
    }
    let mut report = CouplingReport {
        events: 0,
        violations: 0,
        accepted_bottom: 0,
        accepted_top: 0,
        coalesced: false,
        first_violation: None,
    };
    let mut trace: VecDeque<TraceEntry> = VecDeque::with_capacity(TRACE_WINDOW);
    for event_index in 0..config.event_budget {
        let draw = draw_event(k, steps, rng);
        let ab = coupled.bottom.apply(&draw, h);
        let at = coupled.top.apply(&draw, h);
        report.accepted_bottom += u64::from(ab);
        report.accepted_top += u64::from(at);
        if trace.len() == TRACE_WINDOW {
            trace.pop_front();
        }
        trace.push_back(TraceEntry {
            event_index,
            curve: draw.curve,
            site: draw.site,
            delta: draw.delta,
            u: draw.u,
            accepted_bottom: ab,
            accepted_top: at,
        });
        // Only the touched site can change order.
        if !coupled.ordered_at(draw.curve, draw.site) {
            report.violations += 1;
            report.first_violation.get_or_insert(event_index);
            if strict {
                let heights = |c: &ChainState| c.state().paths.iter().map(|p| p.heights().to_vec()).collect();
                let dump = TraceDump {
                    event_index,
                    recent_events: &trace,
                    bottom: heights(&coupled.bottom),
                    top: heights(&coupled.top),
                };
                let trace_json = serde_json::to_string_pretty(&dump).unwrap_or_default();
                return Err(Error::CouplingViolation { event_index, trace_json });
            }
        }
    }
    report.events = config.event_budget;
    report.coalesced = coupled.bottom.state().paths == coupled.top.state().paths;
    Ok(report)
}

/// Generator of the continuous-time chain on an enumerated state space.
#[derive(Debug, Clone)]
pub struct Generator {
    pub states: Vec<EnsembleState>,
    /// Off-diagonal transitions `(from, to, rate)`.
    pub transitions: Vec<(usize, usize, f64)>,
    /// Diagonal entries, the negated exit rates.
    pub diagonal: Vec<f64>,
}

/// Builds the rate matrix: rate `(1/3)·min(1, W'/W)` for every one-site move.
pub fn build_generator(data: &EnsembleData, h: &Hamiltonian, cap: u128) -> Result<Generator> {
    let states = data.enumerate_states(cap)?;
    let index: std::collections::HashMap<String, usize> =
        states.iter().enumerate().map(|(i, s)| (s.id(), i)).collect();
    let mut transitions = Vec::new();
    let mut diagonal = vec![0.0; states.len()];
    let steps = data.grid.steps();
    for (from, s) in states.iter().enumerate() {
        let chain = ChainState::new(s.clone());
        let mut exit = crate::numeric::CompensatedSum::new();
        for curve in 1..=s.k() {
            for site in 1..steps {
                for delta in [-1i8, 1] {
                    let Some(cand) = chain.propose_unchecked(curve, site, delta) else {
                        continue;
                    };
                    let lr = chain.acceptance_log_ratio(curve, site, cand, h);
                    let rate = lr.min(0.0).exp() / 3.0;
                    let mut next = chain.clone();
                    next.state.paths[curve - 1].heights_mut()[site] = cand;
                    let to = index[&next.state.id()];
                    transitions.push((from, to, rate));
                    exit.add(rate);
                }
            }
        }
        diagonal[from] = -exit.value();
    }
    Ok(Generator { states, transitions, diagonal })
}

impl Generator {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut q = DMatrix::zeros(n, n);
        for &(i, j, r) in &self.transitions {
            q[(i, j)] += r;
        }
        for (i, &d) in self.diagonal.iter().enumerate() {
            q[(i, i)] += d;
        }
        q
    }

    /// Largest absolute row sum.
    pub fn max_row_sum(&self) -> f64 {
        let mut sums = self.diagonal.clone();
        for &(i, _, r) in &self.transitions {
            sums[i] += r;
        }
        sums.iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// `max |(Qᵀπ)_j|`.
    pub fn stationarity_residual(&self, pi: &[f64]) -> f64 {
        let mut flow: Vec<f64> = self.diagonal.iter().zip(pi).map(|(d, p)| d * p).collect();
        for &(i, j, r) in &self.transitions {
            flow[j] += pi[i] * r;
        }
        flow.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |π_s q(s,s') − π_s' q(s',s)|` over all transitions.
    pub fn detailed_balance_residual(&self, pi: &[f64]) -> f64 {
        let rates: std::collections::HashMap<(usize, usize), f64> =
            self.transitions.iter().map(|&(i, j, r)| ((i, j), r)).collect();
        self.transitions.iter().fold(0.0, |m, &(i, j, r)| {
            let back = rates.get(&(j, i)).copied().unwrap_or(0.0);
            m.max((pi[i] * r - pi[j] * back).abs())
        })
    }

    /// Null vector of `Qᵀ` normalised to a probability vector, from a dense LU solve.
    pub fn stationary_distribution(&self) -> Result<Vec<f64>> {
        let n = self.len();
        if n > DENSE_SOLVE_CAP {
            return Err(Error::StateSpaceTooLarge { size: n as u128, cap: DENSE_SOLVE_CAP as u128 });
        }
        if n == 1 {
            return Ok(vec![1.0]);
        }
        let mut a = self.dense().transpose();
        // Replace the last balance equation by the normalisation constraint.
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Domain("generator is singular beyond its null space (reducible chain)".into()))?;
        Ok(pi.iter().copied().collect())
    }
}

/// Total variation between the generator's stationary vector and an exact law.
pub fn stationary_tv(generator: &Generator, exact: &ExactDistribution) -> Result<f64> {
    let pi = generator.stationary_distribution()?;
    Ok(total_variation(&pi, &exact.probabilities))
}

/// `log W(after) − log W(before)` recomputed from full weights; a slow oracle for the local ratio.
pub fn full_log_ratio(chain: &ChainState, curve: usize, site: usize, candidate: i64, h: &Hamiltonian) -> Result<f64> {
    let before = log_weight(chain.state(), h)?;
    let mut next = chain.clone();
    next.state.paths[curve - 1].heights_mut()[site] = candidate;
    Ok(log_weight(next.state(), h)? - before)
}
