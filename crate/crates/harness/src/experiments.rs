//! The experiment catalog. Each experiment only wires configuration into the
//! library and compares the results against its pass criteria.

use gibbs_lines_core::bridge::{max_exceedance_prob, mills_ratio, two_time_below_prob, BridgeSpec, TwoTimeQuery};
use gibbs_lines_core::hamiltonian::lambda_exponential_deviation;
use gibbs_lines_core::lattice::{exact_boltzmann, UniformPathSampler};
use gibbs_lines_core::mcmc::{build_generator, empirical_distribution, run_coupled, CoupledState, RunConfig, DENSE_SOLVE_CAP};
use gibbs_lines_core::numeric::{ks_distance, lattice_ks_distance, total_variation};
use gibbs_lines_core::observables::{
    estimate_conditioned_ratio, grid_max_exceedance, lattice_midpoints, normalization_limit_estimate, piecewise_times,
    predicted_limit, schedule, tail_event_conditional, two_time_below_mc, TailWindow,
};
use gibbs_lines_core::rng::seed_policy;
use gibbs_lines_core::special::normal_cdf;
use gibbs_lines_core::Error as CoreError;
use serde::Serialize;

use crate::config::{parse_hamiltonian, ExperimentConfig, ExperimentId};
use crate::error::HarnessError;
use crate::export::{boundary_table, fmt_num, paths_table, RatioRecord, Table};
use crate::report::ExperimentReport;

// Stream ids for sequential samplers; parallel estimators use tagged chunk streams.
const STREAM_CHAIN: u64 = 0xE2;
const STREAM_COUPLING: u64 = 0xE3;
const STREAM_WEAK: u64 = 0xE7;
const TAG_BRIDGE_MAX: u32 = 0x40;
const TAG_TWO_TIME: u32 = 0x41;

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// A finished experiment: its report and the data files to write next to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub artifacts: Vec<Artifact>,
}

impl ExperimentOutput {
    fn new(report: ExperimentReport) -> Self {
        Self { report, artifacts: Vec::new() }
    }

    fn csv(&mut self, name: &str, table: &Table) {
        self.artifacts.push(Artifact { name: format!("{name}.csv"), contents: table.to_csv() });
    }

    fn json(&mut self, name: &str, value: &impl Serialize) {
        let mut contents = serde_json::to_string_pretty(value).expect("plain data serializes");
        contents.push('\n');
        self.artifacts.push(Artifact { name: format!("{name}.json"), contents });
    }
}

/// Runs the experiment named in `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentId::E1 => e1_stationarity(cfg),
        ExperimentId::E2 => e2_sampler(cfg),
        ExperimentId::E3 => e3_coupling(cfg),
        ExperimentId::E4 => e4_bridge(cfg),
        ExperimentId::E5 => e5_normalization(cfg),
        ExperimentId::E6 => e6_ratio(cfg),
        ExperimentId::E7 => e7_tail_and_weak(cfg),
        ExperimentId::Lambda => lambda_checker(cfg),
    }
}

/// Independent master seed for the `index`-th sub-run of an experiment.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn e1_stationarity(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let sec = &cfg.lattice;
    let h = cfg.hamiltonian()?;
    let grid = sec.geometry.grid()?;
    let data = sec.ensemble.data(grid)?;
    let cap = u128::from(sec.state_cap);
    let exact = exact_boltzmann(&data, &h, cap)?;
    let generator = build_generator(&data, &h, cap)?;
    let stat = generator.stationarity_residual(&exact.probabilities);
    let db = generator.detailed_balance_residual(&exact.probabilities);

    let mut rep = ExperimentReport::new(cfg);
    rep.metric("states", exact.len());
    rep.metric("log_partition", exact.log_partition);
    rep.metric("transitions", generator.transitions.len());
    rep.metric("max_exit_rate", generator.max_row_sum());
    rep.metric("stationarity_residual", stat);
    rep.metric("detailed_balance_residual", db);
    if generator.len() <= DENSE_SOLVE_CAP {
        let pi = generator.stationary_distribution()?;
        rep.metric("null_vector_tv", total_variation(&pi, &exact.probabilities));
    }
    if let Some(n) = sec.expected_states {
        rep.check("E1 state count", exact.len() as u64 == n, format!("{} states, expected {n}", exact.len()));
    }
    rep.check(
        "E1 stationarity",
        stat <= sec.stationarity_tol,
        format!("max |Q^T pi| = {stat:.3e} <= {:.0e}", sec.stationarity_tol),
    );
    rep.check(
        "E1 detailed balance",
        db <= sec.detailed_balance_tol,
        format!("residual = {db:.3e} <= {:.0e}", sec.detailed_balance_tol),
    );

    let mut table = Table::new(["state", "probability"]);
    for (s, p) in exact.states.iter().zip(&exact.probabilities) {
        table.push(vec![s.id(), fmt_num(*p)]);
    }
    let mut out = ExperimentOutput::new(rep);
    out.csv("distribution", &table);
    out.csv("boundary", &boundary_table(&grid, &data.f, &data.g));
    Ok(out)
}

fn e2_sampler(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let (sec, ch) = (&cfg.lattice, &cfg.chain);
    let h = cfg.hamiltonian()?;
    let grid = sec.geometry.grid()?;
    let data = sec.ensemble.data(grid)?;
    let exact = exact_boltzmann(&data, &h, u128::from(sec.state_cap))?;
    let run = RunConfig {
        event_budget: ch.burn_in + ch.samples * ch.thinning,
        seed: cfg.seed,
        burn_in: ch.burn_in,
        thinning: ch.thinning,
    };
    let emp = empirical_distribution(&data, &exact, &h, &run, &mut seed_policy(cfg.seed, STREAM_CHAIN))?;
    let tv = total_variation(&emp, &exact.probabilities);

    let mut rep = ExperimentReport::new(cfg);
    rep.metric("states", exact.len());
    rep.metric("samples", run.samples());
    rep.metric("events", run.event_budget);
    rep.metric("tv_distance", tv);
    rep.check("E2 sampler TV", tv < ch.tv_tol, format!("TV = {tv:.5} < {}", ch.tv_tol));

    let mut table = Table::new(["state", "exact", "empirical"]);
    for ((s, p), e) in exact.states.iter().zip(&exact.probabilities).zip(&emp) {
        table.push(vec![s.id(), fmt_num(*p), fmt_num(*e)]);
    }
    let mut out = ExperimentOutput::new(rep);
    out.csv("distribution", &table);
    Ok(out)
}

fn e3_coupling(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let sec = &cfg.coupling;
    let h = cfg.hamiltonian()?;
    let grid = sec.geometry.grid()?;
    let lower = sec.lower.data(grid)?;
    let upper = sec.upper.data(grid)?;
    let mut coupled = CoupledState::maximal(&lower, &upper)?;
    let run = RunConfig { event_budget: sec.events, seed: cfg.seed, burn_in: 0, thinning: 1 };
    let mut rep = ExperimentReport::new(cfg);
    let mut trace = None;
    match run_coupled(&mut coupled, &h, &run, &mut seed_policy(cfg.seed, STREAM_COUPLING), sec.allow_nonconvex) {
        Ok(r) => {
            rep.metric("events", r.events);
            rep.metric("violations", r.violations);
            rep.metric("accepted_lower", r.accepted_bottom);
            rep.metric("accepted_upper", r.accepted_top);
            rep.metric("coalesced", r.coalesced);
            rep.metric("first_violation", r.first_violation);
            rep.check("E3 order violations", r.violations == 0, format!("{} violations in {} events", r.violations, r.events));
        }
        Err(CoreError::CouplingViolation { event_index, trace_json }) => {
            rep.metric("violations", 1);
            rep.metric("first_violation", event_index);
            rep.check("E3 order violations", false, format!("order broken at event {event_index}; see trace.json"));
            trace = Some(trace_json);
        }
        Err(e) => return Err(e.into()),
    }

    let mut out = ExperimentOutput::new(rep);
    out.csv("lower_paths", &paths_table([coupled.bottom.state()]));
    out.csv("upper_paths", &paths_table([coupled.top.state()]));
    out.csv("lower_boundary", &boundary_table(&grid, &lower.f, &lower.g));
    out.csv("upper_boundary", &boundary_table(&grid, &upper.f, &upper.g));
    if let Some(t) = trace {
        out.artifacts.push(Artifact { name: "trace.json".into(), contents: t + "\n" });
    }
    Ok(out)
}

fn e4_bridge(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let sec = &cfg.bridge;
    let mut rep = ExperimentReport::new(cfg);

    let mx = &sec.max;
    let formula = max_exceedance_prob(mx.t, mx.a, mx.beta)?;
    let spec = BridgeSpec::new(0.0, mx.t, 0.0, mx.a)?;
    let times = piecewise_times(&[0.0, mx.t], &[mx.grid_points - 1]);
    let est = grid_max_exceedance(&spec, &times, mx.beta, mx.samples, cfg.seed, TAG_BRIDGE_MAX);
    let rel = (est.mean - formula).abs() / formula;
    rep.metric("max_formula", formula);
    rep.metric("max_estimate", est);
    rep.metric("max_relative_error", rel);
    rep.check("E4a max below formula", est.mean <= formula, format!("{:.6} <= {formula:.6}", est.mean));
    rep.check("E4a max within tolerance", rel <= mx.rel_tol, format!("relative error {rel:.4} <= {}", mx.rel_tol));

    let mut mills = Table::new(["x", "ratio", "lower_bound", "upper_bound"]);
    let mut mills_ok = true;
    for &x in &sec.mills_points {
        let m = mills_ratio(x)?;
        mills_ok &= m.lower_bound <= m.ratio && m.ratio <= m.upper_bound;
        mills.push(vec![fmt_num(x), fmt_num(m.ratio), fmt_num(m.lower_bound), fmt_num(m.upper_bound)]);
    }
    rep.metric("mills_bounds_hold", mills_ok);

    let mut two = Table::new(["p", "q", "x", "y", "c", "d", "r", "quadrature", "monte_carlo", "stderr", "z_score"]);
    for (i, case) in sec.two_time.iter().enumerate() {
        let spec = BridgeSpec::new(case.p, case.q, case.x, case.y)?;
        let query = TwoTimeQuery { c: case.c, d: case.d, r: case.r };
        let exact = two_time_below_prob(&spec, &query)?;
        let mc = two_time_below_mc(&spec, &query, sec.two_time_samples, cfg.seed, TAG_TWO_TIME + i as u32)?;
        // A frequency of 0 or 1 has zero sample variance; one count is the resolution then.
        let se = mc.stderr.max(1.0 / mc.count as f64);
        let z = (mc.mean - exact).abs() / se;
        rep.check(
            format!("E4b two-time case {}", i + 1),
            z <= sec.z_tol,
            format!("F = {exact:.6}, MC = {:.6} +- {:.1e}, |z| = {z:.2} <= {}", mc.mean, mc.stderr, sec.z_tol),
        );
        two.push(
            [case.p, case.q, case.x, case.y, case.c, case.d, case.r, exact, mc.mean, mc.stderr, z]
                .into_iter()
                .map(fmt_num)
                .collect(),
        );
    }

    let mut out = ExperimentOutput::new(rep);
    out.csv("mills", &mills);
    out.csv("two_time", &two);
    Ok(out)
}

fn e5_normalization(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let sec = &cfg.normalization;
    let h = cfg.hamiltonian()?;
    let js: Vec<u32> = (sec.j_min..=sec.j_max).collect();
    let lengths: Vec<f64> = js.iter().map(|&j| 0.5f64.powi(j as i32)).collect();
    let est = normalization_limit_estimate(0.0, &lengths, &[0.0], &[0.0], |_| 0.0, &h, sec.samples, cfg.seed)?;

    let mut rep = ExperimentReport::new(cfg);
    let mut worst = f64::NEG_INFINITY;
    for w in est.windows(2) {
        // Largest drop measured in combined standard errors.
        let se = w[0].stderr.hypot(w[1].stderr);
        worst = worst.max((w[0].mean - w[1].mean) / se.max(f64::MIN_POSITIVE));
    }
    let last = est.last().expect("at least one length");
    rep.metric("estimates", &est);
    rep.metric("max_drop_in_stderr", worst);
    rep.check("E5 nondecreasing", worst <= 2.0, format!("largest step-down = {worst:.2} stderr <= 2 (negative: every step rises)"));
    rep.check("E5 final estimate", last.mean >= sec.floor, format!("{:.5} >= {}", last.mean, sec.floor));

    let mut table = Table::new(["j", "length", "estimate", "stderr"]);
    for ((j, len), e) in js.iter().zip(&lengths).zip(&est) {
        table.push(vec![j.to_string(), fmt_num(*len), fmt_num(e.mean), fmt_num(e.stderr)]);
    }
    let mut out = ExperimentOutput::new(rep);
    out.csv("normalization", &table);
    Ok(out)
}

fn e6_ratio(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let sec = &cfg.ratio;
    let h = cfg.hamiltonian()?;
    let lambda = h
        .lambda()
        .ok_or_else(|| HarnessError::Config(format!("E6 needs a lambda-exponential Hamiltonian, got '{}'", h.name())))?;
    // The lower curve is identically 0, so L2(t1) = 0.
    let predicted = predicted_limit(f64::from(sec.z), lambda, 0.0);
    let mut records = Vec::new();
    for (i, &w) in sec.w.iter().enumerate() {
        let sched = schedule(sec.t1, sec.z, lambda, w, &h)?;
        let spec = BridgeSpec::new(sched.a, sched.b, 0.0, 0.0)?;
        let seed = derive_seed(cfg.seed, i as u64);
        let est = estimate_conditioned_ratio(&spec, &sched, |_| 0.0, &h, sec.samples, seed)?;
        records.push(RatioRecord { w, ratio: est.ratio, stderr: est.stderr, predicted, n_samples: sec.samples, seed });
    }

    let mut rep = ExperimentReport::new(cfg);
    let dev: Vec<f64> = records.iter().map(|r| (r.ratio - predicted).abs()).collect();
    let decreasing = dev.windows(2).all(|d| d[1] < d[0]);
    let last = records.last().expect("non-empty ladder");
    let tol = (sec.rel_tol * predicted).max(3.0 * last.stderr);
    let dominated = records.iter().all(|r| r.ratio <= 1.0 + 3.0 * r.stderr);
    rep.metric("predicted", predicted);
    rep.metric("deviations", &dev);
    rep.check("E6 deviation decreasing", decreasing, format!("|ratio - e^-z| = {}", join(&dev)));
    rep.check(
        "E6 final ratio",
        dev[dev.len() - 1] <= tol,
        format!("|{:.5} - {predicted:.5}| = {:.2e} <= {tol:.2e}", last.ratio, dev[dev.len() - 1]),
    );
    rep.check(
        "E6 domination",
        dominated,
        format!("ratios {} all <= 1 + 3 stderr", join(&records.iter().map(|r| r.ratio).collect::<Vec<_>>())),
    );

    let mut table = Table::new(["w", "ratio", "stderr", "predicted", "n_samples", "seed"]);
    for r in &records {
        table.push(vec![fmt_num(r.w), fmt_num(r.ratio), fmt_num(r.stderr), fmt_num(r.predicted), r.n_samples.to_string(), r.seed.to_string()]);
    }
    let mut out = ExperimentOutput::new(rep);
    out.csv("ratios", &table);
    out.json("ratios", &records);
    Ok(out)
}

fn e7_tail_and_weak(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let sec = &cfg.tail;
    let mut rep = ExperimentReport::new(cfg);

    let mut tail = Table::new(["n", "failure", "stderr", "a_fail", "d_fail", "e_fail"]);
    let mut est = Vec::new();
    for (i, &n) in sec.n.iter().enumerate() {
        let window = TailWindow::new(n, sec.lambda, sec.m)?;
        let e = tail_event_conditional(&window, 0.0, 0.0, 1.0, sec.samples, derive_seed(cfg.seed, i as u64))?;
        tail.push(vec![fmt_num(n), fmt_num(e.failure.mean), fmt_num(e.failure.stderr), fmt_num(e.a_fail), fmt_num(e.d_fail), fmt_num(e.e_fail)]);
        est.push(e);
    }
    // Each step may rise by less than two combined standard errors.
    let rises: Vec<f64> = est
        .windows(2)
        .map(|w| (w[1].failure.mean - w[0].failure.mean) / w[0].failure.stderr.hypot(w[1].failure.stderr).max(f64::MIN_POSITIVE))
        .collect();
    let freqs: Vec<f64> = est.iter().map(|e| e.failure.mean).collect();
    rep.metric("tail_failure", &freqs);
    rep.metric("tail_rise_in_stderr", &rises);
    rep.check(
        "E7a tail failure decreasing",
        rises.iter().all(|&r| r < 2.0),
        format!("failure frequencies {} over n = {}", join(&freqs), join(&sec.n)),
    );

    let grid = gibbs_lines_core::lattice::Grid::new(0.0, 1.0, sec.weak_n)?;
    let sampler = UniformPathSampler::new(grid.steps());
    let mids = lattice_midpoints(&sampler, &grid, 0, 0, sec.weak_samples as usize, &mut seed_policy(cfg.seed, STREAM_WEAK))?;
    let cdf = |x: f64| normal_cdf(x / 0.5);
    let ks = lattice_ks_distance(&mids, grid.dx, cdf);
    rep.metric("weak_lattice_ks", ks);
    rep.metric("weak_raw_ks", ks_distance(&mids, cdf));
    rep.check("E7b midpoint KS", ks < sec.ks_tol, format!("lattice KS = {ks:.5} < {}", sec.ks_tol));

    let mut weak = Table::new(["value", "empirical_cdf", "gaussian_cdf"]);
    let mut sorted = mids;
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
        weak.push(vec![fmt_num(v), fmt_num(i as f64 / n), fmt_num(cdf(v + grid.dx / 2.0))]);
    }

    let mut out = ExperimentOutput::new(rep);
    out.csv("tail", &tail);
    out.csv("midpoint_cdf", &weak);
    Ok(out)
}

fn lambda_checker(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let sec = &cfg.lambda;
    let mut rep = ExperimentReport::new(cfg);
    let mut table = Table::new(["hamiltonian", "y", "deviation"]);
    let mut run = |name: &str| -> Result<Vec<f64>, HarnessError> {
        let h = parse_hamiltonian(name)?;
        let lambda = h.lambda().ok_or_else(|| HarnessError::Config(format!("'{name}' has no lambda")))?;
        let mut devs = Vec::new();
        for &y in &sec.y {
            let d = lambda_exponential_deviation(&h, lambda, sec.m, y, sec.grid_points)?;
            table.push(vec![name.to_string(), fmt_num(y), fmt_num(d)]);
            devs.push(d);
        }
        Ok(devs)
    };
    let exact = run(&sec.exact)?;
    let asym = run(&sec.asymptotic)?;
    let exact_max = exact.iter().fold(0.0f64, |m, &d| m.max(d));
    let asym_last = asym[asym.len() - 1];
    rep.metric("exact_deviation", &exact);
    rep.metric("asymptotic_deviation", &asym);
    rep.check(
        "LAMBDA exact family",
        exact_max <= sec.exact_tol,
        format!("{}: max deviation {exact_max:.2e} <= {:.0e}", sec.exact, sec.exact_tol),
    );
    rep.check(
        "LAMBDA asymptotic at largest y",
        asym_last < sec.asymptotic_tol,
        format!("{}: deviation {asym_last:.3e} < {:.0e}", sec.asymptotic, sec.asymptotic_tol),
    );
    rep.check(
        "LAMBDA asymptotic decreasing",
        asym.windows(2).all(|w| w[1] < w[0]),
        format!("deviations {} over y = {}", join(&asym), join(&sec.y)),
    );
    let mut out = ExperimentOutput::new(rep);
    out.csv("deviation", &table);
    Ok(out)
}

fn join(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}
