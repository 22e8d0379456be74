//! Verification suite: analytic identities, simulation-versus-theory checks
//! in the stable and overloaded regimes, and brute-force oracles for the
//! state structure. Shared by `cpq verify` and the `acceptance` test target.

use std::fmt;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::{AnalyticParams, QuantileMap};
use crate::estimators::{
    least_squares_slope, occupancy_path, time_average_distribution, total_variation, BinGrid,
    InfinityMode, Metric, ReplicatedEstimate,
};
use crate::experiment::{run_experiment, ExperimentOutcome};
use crate::measure_state::{Interval, PointMeasure, PriorityLevel};
use crate::simulator::{run, run_with, EventKind, SimConfig, SnapshotPolicy};
use crate::streams::ScriptedDraws;

pub const STABLE_RHO: f64 = 0.75;
pub const OVERLOADED_RHO: f64 = 1.25;
pub const SUITE_SEED: u64 = 2017;

/// Stable regime: 3-SE band everywhere, plus this relative tolerance for
/// bins with midpoint at or above [`STABLE_REL_FROM`].
pub const STABLE_REL_TOL: f64 = 0.15;
pub const STABLE_REL_FROM: f64 = 0.125;
/// Overloaded regime: compared bins start one bin width above `p*`.
pub const OVERLOADED_REL_TOL: f64 = 0.20;
pub const OVERLOADED_MARGIN: f64 = 0.05;
/// Bins at or below this midpoint must be `inf` in include mode.
pub const STARVED_MIDPOINT_MAX: f64 = 0.15;
pub const SE_BAND: f64 = 3.0;
pub const FINAL_PASS_BAND: (f64, f64) = (0.9, 1.1);
pub const STARVED_BAND: f64 = 0.15;
pub const STARVED_SLOPE_BAND: (f64, f64) = (0.12, 0.25);
pub const GEOMETRIC_PROBE: f64 = 0.5;
pub const TV_TOL: f64 = 0.02;
pub const FD_STEP: f64 = 1e-6;
pub const FD_REL_TOL: f64 = 1e-4;
pub const QUAD_REL_TOL: f64 = 1e-6;
pub const CLOSURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    /// `T = 10^3`, 5 replications.
    Quick,
    /// `T = 10^4`, 20 replications.
    Full,
}

impl Level {
    pub fn horizon(self) -> f64 {
        match self {
            Level::Quick => 1e3,
            Level::Full => 1e4,
        }
    }

    pub fn replications(self) -> usize {
        match self {
            Level::Quick => 5,
            Level::Full => 20,
        }
    }

    /// Horizon of the single long run behind the geometric-law check.
    pub fn long_horizon(self) -> f64 {
        self.horizon() * 10.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: &'static str,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<4} {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail
        )
    }
}

/// Lazily computed experiments shared between criteria.
pub struct Suite {
    level: Level,
    stable: OnceLock<ExperimentOutcome>,
    overloaded: OnceLock<(ExperimentOutcome, Vec<f64>)>,
}

impl Suite {
    pub fn new(level: Level) -> Self {
        Suite {
            level,
            stable: OnceLock::new(),
            overloaded: OnceLock::new(),
        }
    }

    pub fn level(&self) -> Level {
        self.level
    }

    /// The stable-regime experiment (`rho = 0.75`), run on first use.
    pub fn stable(&self) -> &ExperimentOutcome {
        self.stable.get_or_init(|| {
            let config = SimConfig::new(STABLE_RHO, self.level.horizon(), SUITE_SEED);
            run_experiment(&config, self.level.replications(), |_| {})
                .expect("stable experiment config is valid")
        })
    }

    /// Overloaded experiment plus the per-replication slopes of the starved
    /// band occupancy.
    pub fn overloaded(&self) -> &(ExperimentOutcome, Vec<f64>) {
        self.overloaded.get_or_init(|| {
            let horizon = self.level.horizon();
            let config = SimConfig::new(OVERLOADED_RHO, horizon, SUITE_SEED);
            let band = Interval::closed(0.0, STARVED_BAND).expect("valid band");
            let mut slopes = Vec::new();
            let outcome = run_experiment(&config, self.level.replications(), |trace| {
                let path = occupancy_path(trace, &band);
                slopes.push(least_squares_slope(&path, horizon / 2.0, horizon));
            })
            .expect("overloaded experiment config is valid");
            (outcome, slopes)
        })
    }

    pub fn run_all(&self) -> Vec<CriterionOutcome> {
        vec![
            self.a1_analytic_identities(),
            self.a2_stable_regime(),
            self.a3_overloaded_regime(),
            self.a4_final_service_pass(),
            self.a5_starved_band_growth(),
            self.a6_geometric_law(),
            self.a7_transform_invariance(),
            self.a8_hand_traced(),
            self.a9_state_oracle(),
        ]
    }

    pub fn a1_analytic_identities(&self) -> CriterionOutcome {
        let started = Instant::now();
        let mut failures = Vec::new();
        let mut checks = 0usize;
        for rho in [0.5, 0.75, 1.0, 1.25, 2.0] {
            let params = AnalyticParams::new(rho).expect("positive rate");
            for k in 0..50 {
                let p = (k as f64 + 0.5) / 50.0;
                checks += 1;
                if let Err(e) = check_identities(&params, p) {
                    failures.push(format!("rho={rho} p={p}: {e}"));
                }
            }
        }
        let elapsed = started.elapsed().as_secs_f64();
        if elapsed >= 1.0 {
            failures.push(format!("runtime {elapsed:.3}s >= 1s"));
        }
        outcome(
            "A1",
            "analytic identities",
            failures,
            format!("{checks} probes in {elapsed:.3}s"),
        )
    }

    pub fn a2_stable_regime(&self) -> CriterionOutcome {
        let exp = self.stable();
        let mut failures = Vec::new();
        let mut lines = Vec::new();
        for metric in Metric::ALL {
            let rep = exp.replicated(metric, InfinityMode::Exclude);
            let bad = band_failures(&rep, metric, &exp.params, |p| p >= STABLE_REL_FROM, STABLE_REL_TOL, |_| true);
            lines.push(format!("{metric}: {} bad bins", bad.len()));
            failures.extend(bad.into_iter().map(|b| format!("{metric} {b}")));
        }
        outcome(
            "A2",
            "stable regime vs theory (rho=0.75)",
            failures,
            format!("{} reps, T={}; {}", exp.replications(), exp.horizon, lines.join(", ")),
        )
    }

    pub fn a3_overloaded_regime(&self) -> CriterionOutcome {
        let (exp, _) = self.overloaded();
        let critical = exp.params.critical_priority().expect("overloaded");
        let mut failures = Vec::new();
        let mut lines = Vec::new();
        for metric in Metric::ALL {
            let rep = exp.replicated(metric, InfinityMode::Exclude);
            let bad = band_failures(
                &rep,
                metric,
                &exp.params,
                |_| true,
                OVERLOADED_REL_TOL,
                |p| p >= critical + OVERLOADED_MARGIN,
            );
            lines.push(format!("{metric}: {} bad bins", bad.len()));
            failures.extend(bad.into_iter().map(|b| format!("{metric} {b}")));
        }
        let grid = BinGrid;
        for metric in [Metric::Sojourn, Metric::Waiting] {
            for (r, est) in exp.per_replication(metric, InfinityMode::Include).iter().enumerate() {
                for i in (0..grid.len()).filter(|&i| grid.midpoint(i) <= STARVED_MIDPOINT_MAX) {
                    if est.values[i] != Some(f64::INFINITY) {
                        failures.push(format!(
                            "{metric} include-mode rep {r} bin {} = {:?}, expected inf",
                            grid.midpoint(i),
                            est.values[i]
                        ));
                    }
                }
            }
        }
        outcome(
            "A3",
            "overloaded regime vs theory (rho=1.25)",
            failures,
            format!("{} reps, T={}; {}", exp.replications(), exp.horizon, lines.join(", ")),
        )
    }

    pub fn a4_final_service_pass(&self) -> CriterionOutcome {
        let exp = self.stable();
        let mut total = 0.0;
        let mut n = 0usize;
        for (s, w) in exp.sojourn_excluded.iter().zip(&exp.waiting_excluded) {
            for (sv, wv) in s.values.iter().zip(&w.values) {
                if let (Some(sv), Some(wv)) = (sv, wv) {
                    total += sv - wv;
                    n += 1;
                }
            }
        }
        let mean = if n == 0 { f64::NAN } else { total / n as f64 };
        let (lo, hi) = FINAL_PASS_BAND;
        let failures = if (lo..=hi).contains(&mean) {
            vec![]
        } else {
            vec![format!("mean(s_hat - w_hat) = {mean:.4} outside [{lo}, {hi}]")]
        };
        outcome(
            "A4",
            "s_hat - w_hat ~ 1",
            failures,
            format!("mean over {n} (rep, bin) pairs = {mean:.4}"),
        )
    }

    pub fn a5_starved_band_growth(&self) -> CriterionOutcome {
        let (exp, slopes) = self.overloaded();
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        let (lo, hi) = STARVED_SLOPE_BAND;
        let failures = if (lo..=hi).contains(&mean) {
            vec![]
        } else {
            vec![format!("mean slope {mean:.4} outside [{lo}, {hi}]")]
        };
        outcome(
            "A5",
            "divergence below p*",
            failures,
            format!(
                "LS slope of x_t([0, {STARVED_BAND}]) on [T/2, T], mean over {} reps = {mean:.4}",
                exp.replications()
            ),
        )
    }

    pub fn a6_geometric_law(&self) -> CriterionOutcome {
        let horizon = self.level.long_horizon();
        let config = SimConfig::new(STABLE_RHO, horizon, SUITE_SEED)
            .with_snapshots(SnapshotPolicy::None);
        let trace = run(&config).expect("valid config");
        let above = Interval::open_closed(GEOMETRIC_PROBE, 1.0).expect("valid interval");
        let dist = time_average_distribution(&occupancy_path(&trace, &above), horizon);
        let params = AnalyticParams::new(STABLE_RHO).expect("positive rate");
        let law = params.ccdf_equilibrium_law(PriorityLevel::new(GEOMETRIC_PROBE).expect("in range"));
        let tv = total_variation(&dist, &law);
        let failures = if tv < TV_TOL {
            vec![]
        } else {
            vec![format!("TV {tv:.5} >= {TV_TOL}")]
        };
        outcome(
            "A6",
            "geometric law of Xbar(0.5)",
            failures,
            format!("T={horizon}, TV distance = {tv:.5}"),
        )
    }

    pub fn a7_transform_invariance(&self) -> CriterionOutcome {
        let maps = [
            QuantileMap::power(3.0),
            // -ln(1 - p), clipped away from the pole at p = 1.
            QuantileMap::from_fn("-ln(1-p) clipped", |p: f64| -(-p.min(1.0 - 1e-12)).ln_1p()),
            QuantileMap::from_fn("exp(p)", f64::exp),
        ];
        let horizon = self.level.horizon();
        let mut failures = Vec::new();
        for seed in 0..5u64 {
            let base_cfg = SimConfig::new(OVERLOADED_RHO, horizon, SUITE_SEED + seed)
                .with_snapshots(SnapshotPolicy::None);
            let base = run(&base_cfg.clone().with_priority_map(QuantileMap::identity()))
                .expect("valid config");
            for map in &maps {
                let mapped = run(&base_cfg.clone().with_priority_map(map.clone())).expect("valid config");
                if let Err(e) = same_dynamics(&base, &mapped, map) {
                    failures.push(format!("seed {seed}, map {}: {e}", map.name()));
                }
            }
        }
        outcome(
            "A7",
            "monotone-transform invariance",
            failures,
            "5 seeds x {p^3, -ln(1-p), exp(p)} vs identity".to_string(),
        )
    }

    pub fn a8_hand_traced(&self) -> CriterionOutcome {
        let trace = hand_traced_trace();
        let c1 = &trace.customers[0];
        let c2 = &trace.customers[1];
        let w1 = c1.waiting();
        let s1 = c1.sojourn();
        let s2 = c2.sojourn();
        let mut failures = Vec::new();
        if w1 != Some(1.5) {
            failures.push(format!("waiting(c1) = {w1:?}"));
        }
        // 2.5 + 0.7 - 1.0 is not exactly representable as 2.2.
        if !s1.is_some_and(|s| (s - 2.2).abs() < 1e-12) {
            failures.push(format!("sojourn(c1) = {s1:?}"));
        }
        if s2 != Some(0.5) {
            failures.push(format!("sojourn(c2) = {s2:?}"));
        }
        outcome(
            "A8",
            "hand-traced preemption",
            failures,
            format!("w1={w1:?} s1={s1:?} s2={s2:?}"),
        )
    }

    pub fn a9_state_oracle(&self) -> CriterionOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
        let mut failures = Vec::new();
        let instances = 1000;
        for inst in 0..instances {
            let n = rng.random_range(0..=1000usize);
            let atoms: Vec<f64> = (0..n)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        rng.random_range(0..=20u32) as f64 / 20.0
                    } else {
                        rng.random::<f64>()
                    }
                })
                .collect();
            let m: PointMeasure = atoms
                .iter()
                .enumerate()
                .map(|(i, &p)| (PriorityLevel::new(p).expect("in range"), i as u64))
                .collect();

            let scan_max = atoms
                .iter()
                .enumerate()
                .fold(None::<(f64, u64)>, |best, (i, &p)| match best {
                    Some((bp, _)) if bp >= p => best,
                    _ => Some((p, i as u64)),
                });
            if m.peek_max().map(|(p, s)| (p.value(), s)) != scan_max {
                failures.push(format!("instance {inst}: peek_max mismatch"));
            }

            for _ in 0..5 {
                let mut a = rng.random::<f64>();
                let mut b = rng.random::<f64>();
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                if rng.random_bool(0.3) && !atoms.is_empty() {
                    a = atoms[rng.random_range(0..atoms.len())];
                    b = b.max(a);
                }
                let (lc, hc) = (rng.random_bool(0.5), rng.random_bool(0.5));
                let b_int = Interval::new(a, lc, b, hc).expect("ordered endpoints");
                let scan = atoms
                    .iter()
                    .filter(|&&p| (if lc { p >= a } else { p > a }) && (if hc { p <= b } else { p < b }))
                    .count();
                if m.interval_count(&b_int) != scan {
                    failures.push(format!("instance {inst}: interval_count{b_int} mismatch"));
                }
            }
        }
        outcome(
            "A9",
            "state structure vs linear scans",
            failures,
            format!("{instances} random instances"),
        )
    }
}

/// The two-customer scripted scenario: arrivals at t = 1 (priority 0.3) and
/// t = 2 (priority 0.7); service draws 2.0 then 0.7 for the first customer
/// and 0.5 for the second.
pub fn hand_traced_trace() -> crate::simulator::SimTrace {
    let mut script = ScriptedDraws::new(
        vec![1.0, 1.0],
        vec![0.3, 0.7],
        vec![vec![2.0, 0.7], vec![0.5]],
    );
    run_with(&SimConfig::new(1.0, 10.0, 0), &mut script).expect("scripted scenario is valid")
}

fn outcome(id: &'static str, title: &'static str, failures: Vec<String>, summary: String) -> CriterionOutcome {
    let passed = failures.is_empty();
    let detail = if passed {
        summary
    } else {
        let shown: Vec<&str> = failures.iter().take(6).map(String::as_str).collect();
        let more = failures.len().saturating_sub(shown.len());
        let mut d = format!("{summary}; {}", shown.join("; "));
        if more > 0 {
            d.push_str(&format!("; ... {more} more"));
        }
        d
    };
    CriterionOutcome {
        id,
        title,
        passed,
        detail,
    }
}

/// Bins whose cross-replication mean misses the 3-SE band or (where
/// `rel_applies`) the relative tolerance. Only bins with `compared(p)` are
/// checked.
fn band_failures(
    rep: &ReplicatedEstimate,
    metric: Metric,
    params: &AnalyticParams,
    rel_applies: impl Fn(f64) -> bool,
    rel_tol: f64,
    compared: impl Fn(f64) -> bool,
) -> Vec<String> {
    let mut bad = Vec::new();
    for i in 0..rep.grid.len() {
        let p = rep.grid.midpoint(i);
        if !compared(p) {
            continue;
        }
        let theory = metric.theory(params, PriorityLevel::new(p).expect("midpoint in range"));
        let (Some(mean), Some(se)) = (rep.mean[i], rep.stderr[i]) else {
            bad.push(format!("p={p}: no finite estimate"));
            continue;
        };
        let dev = (mean - theory).abs();
        if !(dev <= SE_BAND * se) {
            bad.push(format!("p={p}: est {mean:.4} vs {theory:.4} ({:.1} SE)", dev / se));
        } else if rel_applies(p) && !(dev <= rel_tol * theory.abs()) {
            bad.push(format!("p={p}: est {mean:.4} vs {theory:.4} ({:.1}% rel)", 100.0 * dev / theory));
        }
    }
    bad
}

fn check_identities(params: &AnalyticParams, p: f64) -> Result<(), String> {
    let rho = params.rho();
    let at = |x: f64| PriorityLevel::new(x).expect("probe in range");
    let pl = at(p);
    let divergent = (1.0 - p) * rho >= 1.0;

    let s = params.sojourn(pl);
    let w = params.waiting(pl);
    let m = params.mean_density(pl);
    let ccdf = params.mean_ccdf(pl);
    for (name, v) in [("s", s), ("w", w), ("m", m), ("E[Xbar]", ccdf)] {
        if v.is_infinite() != divergent {
            return Err(format!("{name} = {v} but divergent = {divergent}"));
        }
    }
    if divergent {
        return Ok(());
    }

    if w != s - 1.0 {
        return Err(format!("w = {w} != s - 1 = {}", s - 1.0));
    }

    let above = params.mean_sojourn_above(pl).map_err(|e| e.to_string())?;
    let closure = (1.0 - p) * rho * above;
    if (ccdf - closure).abs() > CLOSURE_TOL * ccdf.abs().max(1.0) {
        return Err(format!("E[Xbar] = {ccdf} vs (1-p) rho Sbar = {closure}"));
    }

    // Central difference of E[Xbar] where both sides are stable.
    let (lo, hi) = (p - FD_STEP, p + FD_STEP);
    if lo >= 0.0 && hi <= 1.0 && (1.0 - lo) * rho < 1.0 {
        let fd = -(params.mean_ccdf(at(hi)) - params.mean_ccdf(at(lo))) / (2.0 * FD_STEP);
        if (fd - m).abs() > FD_REL_TOL * m {
            return Err(format!("finite difference {fd} vs m = {m}"));
        }
    }

    // Quadrature of m over [p, min(p + 0.1, 1)].
    let b = (p + 0.1).min(1.0);
    if b > p {
        let quad = adaptive_simpson(&|x| params.mean_density(at(x)), p, b, 1e-13);
        let mu = params.mean_measure(&Interval::closed(p, b).expect("ordered"));
        if (quad - mu).abs() > QUAD_REL_TOL * mu.abs() {
            return Err(format!("quadrature {quad} vs mu = {mu}"));
        }
    }
    Ok(())
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 40)
}

fn same_dynamics(
    base: &crate::simulator::SimTrace,
    mapped: &crate::simulator::SimTrace,
    map: &QuantileMap,
) -> Result<(), String> {
    if base.events.len() != mapped.events.len() {
        return Err("event counts differ".into());
    }
    for (a, b) in base.events.iter().zip(&mapped.events) {
        if a.time.to_bits() != b.time.to_bits() || a.seq != b.seq || a.kind != b.kind {
            return Err(format!("event mismatch: {a:?} vs {b:?}"));
        }
    }
    let order = |t: &crate::simulator::SimTrace| -> Vec<u64> {
        t.events
            .iter()
            .filter(|e| e.kind == EventKind::Departure)
            .map(|e| e.seq)
            .collect()
    };
    if order(base) != order(mapped) {
        return Err("departure order differs".into());
    }
    let bits = |x: Option<f64>| x.map(f64::to_bits);
    for (a, b) in base.customers.iter().zip(&mapped.customers) {
        if bits(a.waiting()) != bits(b.waiting()) || bits(a.sojourn()) != bits(b.sojourn()) {
            return Err(format!("customer {} times differ", a.seq));
        }
        let expected = map.apply(PriorityLevel::new(a.priority).expect("in range"));
        if b.mapped_priority.map(f64::to_bits) != Some(expected.to_bits()) {
            return Err(format!("customer {} mapped priority not recorded", a.seq));
        }
    }
    Ok(())
}
