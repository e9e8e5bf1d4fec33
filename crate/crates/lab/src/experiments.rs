//! Seeded replica ensembles and the verification experiments built on them.
//!
//! Every replica starts from a Poisson configuration of intensity `λ`
//! anchored at the origin and runs the Atlas dynamics with unit drift. The
//! scaling experiments simulate to `s = 1/b²` and rescale only in analysis.

use atlas_core::dynamics::{run, RunSummary, TrajectoryRecorder};
use atlas_core::measure::{dstar_surrogate, EmpiricalMeasure};
use atlas_core::model::{sample_ppp_half_line, DriftSpec, ParticleSystemState};
use atlas_core::rng::ParticleStreams;
use atlas_core::stats::{
    binomial_tolerance, exponential_cdf, exponential_tail, ks_critical_1pct, ks_statistic, mean, tail_fraction,
    variance,
};
use atlas_core::stefan::{solve_kappa, StefanSolution};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentTag};
use crate::error::{LabError, Result};
use crate::report::{Verdict, VerificationRecord, VerificationReport};

/// Diffusive buffer, in units of `√T`, kept between analysis reads and the
/// rightmost initial particle.
pub const TRUNCATION_BUFFER_SIGMAS: f64 = 5.0;
/// Front-influence range, in units of `√T`, used to size `n`.
pub const TRUNCATION_RANGE_SIGMAS: f64 = 10.0;

pub const DEFAULT_SCALING_TOLERANCE: f64 = 0.05;
pub const DEFAULT_DENSITY_TOLERANCE: f64 = 0.07;
pub const DEFAULT_SPACING_TOLERANCE: f64 = 0.10;
pub const DEFAULT_Z1_MEAN_TOLERANCE: f64 = 0.10;
/// Standard errors allowed by the binomial tolerance of tail comparisons.
pub const TAIL_Z_SCORE: f64 = 3.0;
/// Mass per atom of the discretized limiting measure.
const LIMIT_ATOM_MASS: f64 = 1e-3;

/// Ranked positions of one replica at each sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRun {
    pub seed: u64,
    pub initial_rightmost: f64,
    pub times: Vec<f64>,
    pub ranked: Vec<Vec<f64>>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub lambda: f64,
    pub n: usize,
    pub horizon: f64,
    pub runs: Vec<ReplicaRun>,
}

impl Ensemble {
    pub fn seeds(&self) -> Vec<u64> {
        self.runs.iter().map(|r| r.seed).collect()
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn far_field_contacts(&self) -> u64 {
        self.runs.iter().map(|r| r.summary.far_field_contacts).sum()
    }

    /// Values of `f` on the ranked positions at sample index `k`, one per replica.
    pub fn at<T>(&self, k: usize, f: impl Fn(&[f64]) -> T) -> Vec<T> {
        self.runs.iter().map(|r| f(&r.ranked[k])).collect()
    }

    pub fn monitor(&self) -> TruncationMonitor {
        TruncationMonitor {
            horizon: self.horizon,
            rightmost: self
                .runs
                .iter()
                .map(|r| r.initial_rightmost)
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// Simulate one replica and keep the ranked positions at `sample_times`.
pub fn simulate_replica(cfg: &ExperimentConfig, seed: u64, horizon: f64, sample_times: &[f64]) -> Result<ReplicaRun> {
    let mut state = sample_ppp_half_line(cfg.lambda, cfg.n, seed)?;
    let initial_rightmost = state.rightmost();
    let mut streams = ParticleStreams::new(seed, cfg.n);
    let mut recorder = TrajectoryRecorder::new(sample_times.to_vec())?.keeping_states();
    let summary = run(
        &mut state,
        &DriftSpec::atlas(1.0),
        &cfg.step_config()?,
        horizon,
        &mut recorder,
        &mut streams,
    )?;
    let snaps = recorder.into_snapshots();
    Ok(ReplicaRun {
        seed,
        initial_rightmost,
        times: snaps.iter().map(|s| s.time).collect(),
        ranked: snaps
            .into_iter()
            .map(|s| {
                s.state
                    .as_ref()
                    .map(ParticleSystemState::ranked_positions)
                    .unwrap_or_default()
            })
            .collect(),
        summary,
    })
}

/// `cfg.replicas` independent replicas with seeds `cfg.seed + r`, run in parallel.
pub fn simulate_ensemble(cfg: &ExperimentConfig, horizon: f64, sample_times: &[f64]) -> Result<Ensemble> {
    cfg.validate()?;
    let runs = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| simulate_replica(cfg, cfg.replica_seed(r), horizon, sample_times))
        .collect::<Result<Vec<_>>>()?;
    Ok(Ensemble {
        lambda: cfg.lambda,
        n: cfg.n,
        horizon,
        runs,
    })
}

/// Ensemble at the diffusive horizon `1/b²` of the configured scale.
pub fn simulate_scaled(cfg: &ExperimentConfig) -> Result<Ensemble> {
    let s = 1.0 / (cfg.b * cfg.b);
    simulate_ensemble(cfg, s, &[s])
}

/// Checks that a finite system can stand in for the infinite one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationMonitor {
    pub horizon: f64,
    /// Smallest rightmost initial position over the replicas.
    pub rightmost: f64,
}

impl TruncationMonitor {
    pub fn buffer(&self) -> f64 {
        TRUNCATION_BUFFER_SIGMAS * self.horizon.sqrt()
    }

    /// An unscaled position read by the analysis.
    pub fn check(&self, position: f64) -> Result<()> {
        if position > self.rightmost - self.buffer() {
            return Err(LabError::Truncation {
                position,
                rightmost: self.rightmost,
                buffer: self.buffer(),
            });
        }
        Ok(())
    }
}

/// Particle count needed for horizon `t`: `λ (|κ| + 10) √t`.
pub fn required_particles(lambda: f64, kappa: f64, horizon: f64) -> usize {
    (lambda * (kappa.abs() + TRUNCATION_RANGE_SIGMAS) * horizon.sqrt()).ceil() as usize
}

fn check_particle_count(cfg: &ExperimentConfig, kappa: f64, horizon: f64) -> Result<()> {
    let need = required_particles(cfg.lambda, kappa, horizon);
    if cfg.n < need {
        return Err(LabError::Config(format!(
            "n = {} is below the truncation requirement {need}",
            cfg.n
        )));
    }
    Ok(())
}

struct Recorder<'a> {
    report: VerificationReport,
    ensemble: &'a Ensemble,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &ExperimentConfig, ensemble: &'a Ensemble) -> Self {
        Self {
            report: VerificationReport::new(cfg),
            ensemble,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn add(
        &mut self,
        claim: String,
        statement: &str,
        statistic: f64,
        target: Option<f64>,
        tolerance: Option<f64>,
        verdict: Verdict,
        detail: String,
    ) {
        self.report.push(VerificationRecord {
            claim,
            statement: statement.into(),
            statistic,
            target,
            tolerance,
            verdict,
            replicas: self.ensemble.len(),
            seeds: self.ensemble.seeds(),
            detail,
        });
    }

    fn engine_check(&mut self) {
        let contacts = self.ensemble.far_field_contacts();
        self.add(
            "engine/far-field-contacts".into(),
            "blocked far-field particles never reached the drift-carrying ranks",
            contacts as f64,
            Some(0.0),
            None,
            Verdict::from_bool(contacts == 0),
            String::new(),
        );
    }

    fn finish(mut self) -> VerificationReport {
        self.engine_check();
        self.report
    }
}

/// Report whose every claim is marked invalid.
fn invalid_report(cfg: &ExperimentConfig, ensemble: &Ensemble, claim: &str, reason: &LabError) -> VerificationReport {
    let mut rec = Recorder::new(cfg, ensemble);
    rec.add(
        claim.into(),
        "run invalidated before analysis",
        f64::NAN,
        None,
        None,
        Verdict::Invalid,
        reason.to_string(),
    );
    rec.report
}

fn guard<T>(
    cfg: &ExperimentConfig,
    ensemble: &Ensemble,
    claim: &str,
    body: impl FnOnce() -> Result<T>,
) -> std::result::Result<T, Box<VerificationReport>> {
    body().map_err(|e| Box::new(invalid_report(cfg, ensemble, claim, &e)))
}

fn sqrt_horizon(ensemble: &Ensemble) -> f64 {
    ensemble.horizon.sqrt()
}

/// `Y₁(s)/√s` against `κ`.
pub fn leftmost_scaling_report(cfg: &ExperimentConfig, ensemble: &Ensemble) -> Result<VerificationReport> {
    let sol = solve_kappa(cfg.lambda)?;
    let claim = "leftmost-scaling/mean";
    if let Err(r) = guard(cfg, ensemble, claim, || {
        check_particle_count(cfg, sol.kappa, ensemble.horizon)
    }) {
        return Ok(*r);
    }
    let root = sqrt_horizon(ensemble);
    let values = ensemble.at(0, |y| y[0] / root);
    let m = mean(&values);
    let sd = variance(&values).sqrt();
    let tol = cfg.analysis.tolerance.unwrap_or(DEFAULT_SCALING_TOLERANCE);
    let mut rec = Recorder::new(cfg, ensemble);
    rec.add(
        claim.into(),
        "leftmost particle over sqrt(s) tends to the front coefficient kappa",
        m,
        Some(sol.kappa),
        Some(tol),
        Verdict::from_bool((m - sol.kappa).abs() <= tol),
        format!(
            "replica sd {sd:.4}, standard error {:.4}",
            sd / (values.len() as f64).sqrt()
        ),
    );
    Ok(rec.finish())
}

/// Bin edges `[κ + lo, κ + hi]` in steps of the bin width.
fn window_edges(cfg: &ExperimentConfig, sol: &StefanSolution) -> Vec<f64> {
    let [lo, hi] = cfg.analysis.window;
    let w = cfg.analysis.bin_width;
    let bins = ((hi - lo) / w).round().max(1.0) as usize;
    (0..=bins).map(|i| sol.kappa + lo + i as f64 * w).collect()
}

/// Limiting measure at time 1 as atoms of small equal mass at its quantiles,
/// covering `(-∞, upto]`.
pub fn discretized_limit(sol: &StefanSolution, upto: f64) -> Result<EmpiricalMeasure> {
    let mut atoms = Vec::new();
    let total = if upto > sol.kappa {
        sol.integrated_profile(1.0, upto)?
    } else {
        0.0
    };
    let count = (total / LIMIT_ATOM_MASS).ceil() as usize + 1;
    for k in 0..count {
        atoms.push(sol.profile_quantile(1.0, LIMIT_ATOM_MASS * (k as f64 + 0.5))?);
    }
    Ok(EmpiricalMeasure::new(LIMIT_ATOM_MASS, atoms)?)
}

/// Mean surrogate distance between `Q^b(1, ·)` and the limit over replicas.
pub fn mean_dstar(ensemble: &Ensemble, b: f64, limit: &EmpiricalMeasure, r_max: usize) -> Result<f64> {
    let monitor = ensemble.monitor();
    monitor.check(r_max as f64 / b)?;
    let d: Vec<f64> = ensemble
        .runs
        .iter()
        .map(|r| {
            let m = EmpiricalMeasure::new(b, r.ranked[0].iter().map(|x| b * x).collect())?;
            Ok(dstar_surrogate(&m, limit, r_max))
        })
        .collect::<Result<_>>()?;
    Ok(mean(&d))
}

/// Pooled bin masses of `Q^b(1, ·)` against the integrated limiting density,
/// and the surrogate-distance trend over the `(b, ensemble)` sweep.
pub fn density_profile_report(
    cfg: &ExperimentConfig,
    ensemble: &Ensemble,
    sweep: &[(f64, &Ensemble)],
) -> Result<VerificationReport> {
    let sol = solve_kappa(cfg.lambda)?;
    let b = cfg.b;
    let edges = window_edges(cfg, &sol);
    let hi = *edges.last().expect("edges");
    let checks = guard(cfg, ensemble, "density-profile/bins", || {
        check_particle_count(cfg, sol.kappa, ensemble.horizon)?;
        ensemble.monitor().check(hi / b)
    });
    if let Err(r) = checks {
        return Ok(*r);
    }
    let tol = cfg.analysis.tolerance.unwrap_or(DEFAULT_DENSITY_TOLERANCE);
    let mut rec = Recorder::new(cfg, ensemble);
    for w in edges.windows(2) {
        let (x1, x2) = (w[0], w[1]);
        let masses = ensemble.at(0, |y| {
            let m = EmpiricalMeasure::new(b, y.iter().map(|x| b * x).collect()).expect("finite");
            m.mass_between(x1, x2)
        });
        let pooled = mean(&masses);
        let exact = sol.integrated_profile(1.0, x2)? - sol.integrated_profile(1.0, x1)?;
        let rel = (pooled - exact).abs() / exact;
        rec.add(
            format!("density-profile/bin[{x1:.3},{x2:.3}]"),
            "rescaled empirical mass of a bin tends to the integral of the limiting density",
            pooled,
            Some(exact),
            Some(tol),
            Verdict::from_bool(rel <= tol),
            format!("relative error {rel:.4}"),
        );
    }
    if !sweep.is_empty() {
        let r_max = cfg.analysis.dstar_r_max;
        let limit = discretized_limit(&sol, r_max as f64 + 1.0)?;
        let mut ordered: Vec<(f64, &Ensemble)> = sweep.to_vec();
        ordered.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut values = Vec::new();
        for &(bs, ens) in &ordered {
            match mean_dstar(ens, bs, &limit, r_max) {
                Ok(d) => {
                    values.push(d);
                    rec.add(
                        format!("density-profile/dstar-surrogate@b={bs}"),
                        "surrogate distance between the rescaled measure and the limit at time 1",
                        d,
                        None,
                        None,
                        Verdict::Info,
                        format!("mean over {} replicas, r_max {r_max}", ens.len()),
                    );
                }
                Err(e) => {
                    rec.add(
                        format!("density-profile/dstar-surrogate@b={bs}"),
                        "surrogate distance between the rescaled measure and the limit at time 1",
                        f64::NAN,
                        None,
                        None,
                        Verdict::Invalid,
                        e.to_string(),
                    );
                }
            }
        }
        let decreasing = values.len() == ordered.len() && values.windows(2).all(|w| w[1] < w[0]);
        rec.add(
            "density-profile/dstar-decreasing".into(),
            "surrogate distance to the limit decreases as b decreases",
            values.last().copied().unwrap_or(f64::NAN),
            None,
            None,
            if values.len() == ordered.len() {
                Verdict::from_bool(decreasing)
            } else {
                Verdict::Invalid
            },
            format!(
                "b = {:?}: {:?}",
                ordered.iter().map(|p| p.0).collect::<Vec<_>>(),
                values.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
            ),
        );
    }
    Ok(rec.finish())
}

/// Rescaled particle counts left of `x` against the integrated limiting
/// density, at the window edges.
pub fn particle_count_report(cfg: &ExperimentConfig, ensemble: &Ensemble) -> Result<VerificationReport> {
    let sol = solve_kappa(cfg.lambda)?;
    let b = cfg.b;
    let edges = window_edges(cfg, &sol);
    let hi = *edges.last().expect("edges");
    let checks = guard(cfg, ensemble, "particle-count/cdf", || {
        check_particle_count(cfg, sol.kappa, ensemble.horizon)?;
        ensemble.monitor().check(hi / b)
    });
    if let Err(r) = checks {
        return Ok(*r);
    }
    let tol = cfg.analysis.tolerance.unwrap_or(DEFAULT_DENSITY_TOLERANCE);
    let mut rec = Recorder::new(cfg, ensemble);
    for &x in &edges {
        let counts = ensemble.at(0, |y| b * y.partition_point(|&p| b * p <= x) as f64);
        let pooled = mean(&counts);
        let exact = sol.integrated_profile(1.0, x)?;
        let rel = (pooled - exact).abs() / exact;
        rec.add(
            format!("particle-count/cdf@{x:.3}"),
            "b times the number of particles left of x/b tends to the integrated limiting density",
            pooled,
            Some(exact),
            Some(tol),
            Verdict::from_bool(rel <= tol),
            format!("relative error {rel:.4}"),
        );
    }
    Ok(rec.finish())
}

/// Ranked-particle quantiles `Y_{q√s}/√s` and windowed mean spacings.
pub fn quantile_law_report(cfg: &ExperimentConfig, ensemble: &Ensemble) -> Result<VerificationReport> {
    let sol = solve_kappa(cfg.lambda)?;
    let root = sqrt_horizon(ensemble);
    let qmax = cfg.analysis.quantiles.iter().copied().fold(0.0, f64::max);
    let emax = cfg.analysis.epsilons.iter().copied().fold(0.0, f64::max);
    let top = ((qmax + emax) * root).ceil() as usize + 1;
    let checks = guard(cfg, ensemble, "quantile-law/window", || {
        check_particle_count(cfg, sol.kappa, ensemble.horizon)?;
        if top >= ensemble.n {
            return Err(LabError::Window {
                lo: 0,
                hi: top,
                n: ensemble.n,
            });
        }
        let reach = ensemble
            .runs
            .iter()
            .map(|r| r.ranked[0][top])
            .fold(f64::NEG_INFINITY, f64::max);
        ensemble.monitor().check(reach)
    });
    if let Err(r) = checks {
        return Ok(*r);
    }
    let q_tol = cfg.analysis.tolerance.unwrap_or(DEFAULT_SCALING_TOLERANCE);
    let mut rec = Recorder::new(cfg, ensemble);
    for &q in &cfg.analysis.quantiles {
        let target = sol.profile_quantile(1.0, q)?;
        // 1-based rank q√s
        let rank = ((q * root).round() as usize).max(1);
        let values = ensemble.at(0, |y| y[rank - 1] / root);
        let m = mean(&values);
        rec.add(
            format!("quantile-law/Y[q={q}]"),
            "ranked particle Y_{q sqrt(s)} over sqrt(s) tends to the profile quantile y(1,q)",
            m,
            Some(target),
            Some(q_tol),
            Verdict::from_bool((m - target).abs() <= q_tol),
            format!("rank {rank}, replica sd {:.4}", variance(&values).sqrt()),
        );
        let density = sol.u_star(1.0, target)?;
        for &eps in &cfg.analysis.epsilons {
            // Z_i = Y_{i+1} - Y_i for 1-based i in [(q-ε)√s, (q+ε)√s]
            let lo = (((q - eps) * root).ceil() as usize).max(1);
            let hi = ((q + eps) * root).floor() as usize;
            if hi < lo {
                let e = LabError::Window { lo, hi, n: ensemble.n };
                rec.add(
                    format!("quantile-law/spacing[q={q},eps={eps}]"),
                    "window holds no spacing",
                    f64::NAN,
                    None,
                    None,
                    Verdict::Invalid,
                    e.to_string(),
                );
                continue;
            }
            // mean over the hi - lo + 1 spacings actually in the window
            let count = (hi - lo + 1) as f64;
            let means = ensemble.at(0, |y| (y[hi] - y[lo - 1]) / count);
            let m = mean(&means);
            let expected = 1.0 / density;
            let rel = (m - expected).abs() / expected;
            rec.add(
                format!("quantile-law/spacing[q={q},eps={eps}]"),
                "windowed mean spacing tends to the reciprocal limiting density at y(1,q)",
                m,
                Some(expected),
                Some(DEFAULT_SPACING_TOLERANCE),
                Verdict::from_bool(rel <= DEFAULT_SPACING_TOLERANCE),
                format!("ranks {lo}..={hi}, relative error {rel:.4}"),
            );
        }
    }
    Ok(rec.finish())
}

/// First `m` spacings pooled over replicas at sample index `k`.
fn pooled_spacings(ensemble: &Ensemble, k: usize, m: usize) -> Vec<f64> {
    ensemble
        .runs
        .iter()
        .flat_map(|r| r.ranked[k].windows(2).take(m).map(|w| w[1] - w[0]).collect::<Vec<_>>())
        .collect()
}

fn spacing_monitor_check(cfg: &ExperimentConfig, ensemble: &Ensemble, m: usize) -> Result<()> {
    let kappa = solve_kappa(cfg.lambda)?.kappa;
    check_particle_count(cfg, kappa, ensemble.horizon)?;
    if m >= ensemble.n {
        return Err(LabError::Window {
            lo: 0,
            hi: m,
            n: ensemble.n,
        });
    }
    let monitor = ensemble.monitor();
    for r in &ensemble.runs {
        for y in &r.ranked {
            monitor.check(y[m])?;
        }
    }
    Ok(())
}

/// Goodness of fit of the leading spacings to Exponential(2) over time.
pub fn spacings_equilibrium_report(cfg: &ExperimentConfig, ensemble: &Ensemble) -> Result<VerificationReport> {
    let m = cfg.analysis.spacings;
    if let Err(r) = guard(cfg, ensemble, "spacings/window", || {
        spacing_monitor_check(cfg, ensemble, m)
    }) {
        return Ok(*r);
    }
    let times = &cfg.analysis.times;
    let mut rec = Recorder::new(cfg, ensemble);
    let stationary = cfg.lambda == 2.0;
    let mut stats = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let pooled = pooled_spacings(ensemble, k, m);
        let d = ks_statistic(&pooled, |x| exponential_cdf(2.0, x));
        let crit = ks_critical_1pct(pooled.len());
        stats.push((d, crit));
        rec.add(
            format!("spacings/ks@t={t}"),
            if stationary {
                "Exponential(2) spacings stay Exponential(2)"
            } else {
                "leading spacings tend in law to i.i.d. Exponential(2)"
            },
            d,
            None,
            Some(crit),
            if stationary {
                Verdict::from_bool(d < crit)
            } else {
                Verdict::Info
            },
            format!("{} pooled spacings, 1% critical value {crit:.4}", pooled.len()),
        );
    }
    if !stationary {
        let decreasing = stats.windows(2).all(|w| w[1].0 < w[0].0);
        let (last, crit) = *stats.last().expect("times");
        rec.add(
            "spacings/ks-decreasing".into(),
            "Kolmogorov-Smirnov distance to Exponential(2) decreases over time",
            last,
            None,
            None,
            Verdict::from_bool(decreasing),
            format!(
                "{:?}",
                stats.iter().map(|s| (s.0 * 1e4).round() / 1e4).collect::<Vec<_>>()
            ),
        );
        rec.add(
            "spacings/ks-final".into(),
            "leading spacings pass the 1% goodness-of-fit test at the final time",
            last,
            None,
            Some(crit),
            Verdict::from_bool(last < crit),
            String::new(),
        );
    }
    let z1 = ensemble.at(times.len() - 1, |y| y[1] - y[0]);
    let mz = mean(&z1);
    rec.add(
        "spacings/mean-first".into(),
        "mean of the first spacing tends to 1/2",
        mz,
        Some(0.5),
        Some(DEFAULT_Z1_MEAN_TOLERANCE),
        Verdict::from_bool((mz - 0.5).abs() <= DEFAULT_Z1_MEAN_TOLERANCE * 0.5),
        format!("relative error {:.4}", (mz - 0.5).abs() / 0.5),
    );
    Ok(rec.finish())
}

/// Worst excess of `lhs - rhs - tol` over a grid; nonpositive means the
/// ordering holds everywhere.
fn worst_excess(grid: &[f64], mut f: impl FnMut(f64) -> (f64, f64, f64)) -> (f64, f64) {
    grid.iter()
        .map(|&z| {
            let (lhs, rhs, tol) = f(z);
            (lhs - rhs - tol, z)
        })
        .fold((f64::NEG_INFINITY, f64::NAN), |a, b| if b.0 > a.0 { b } else { a })
}

/// Marginal tail ordering of a spacing over time and the exponential envelope.
pub fn domination_report(cfg: &ExperimentConfig, ensemble: &Ensemble) -> Result<VerificationReport> {
    let k = cfg.analysis.rank;
    if let Err(r) = guard(cfg, ensemble, "domination/window", || {
        spacing_monitor_check(cfg, ensemble, k)
    }) {
        return Ok(*r);
    }
    let times = &cfg.analysis.times;
    let grid = &cfg.analysis.z_grid;
    let lambda = cfg.lambda;
    let r = ensemble.len();
    let gap = |idx: usize| ensemble.at(idx, |y| y[k] - y[k - 1]);
    let samples: Vec<Vec<f64>> = (0..times.len()).map(gap).collect();
    let mut rec = Recorder::new(cfg, ensemble);
    // below the equilibrium density spacings shrink toward Exp(2); above it they grow
    let shrinking = lambda < 2.0;
    for w in 0..times.len().saturating_sub(1) {
        let (early, late) = (&samples[w], &samples[w + 1]);
        let (excess, z) = worst_excess(grid, |z| {
            let (pe, pl) = (tail_fraction(early, z), tail_fraction(late, z));
            let tol = binomial_tolerance(pe, r, pl, r, TAIL_Z_SCORE);
            if shrinking {
                (pl, pe, tol)
            } else {
                (pe, pl, tol)
            }
        });
        rec.add(
            format!("domination/tail-order[t={},{}]", times[w], times[w + 1]),
            if shrinking {
                "spacing tails decrease in time"
            } else {
                "spacing tails increase in time"
            },
            excess,
            Some(0.0),
            None,
            Verdict::from_bool(excess <= 0.0),
            format!("worst at z = {z}"),
        );
    }
    let (small, large) = if shrinking { (2.0, lambda) } else { (lambda, 2.0) };
    for (idx, sample) in samples.iter().enumerate() {
        let t = times[idx];
        let (lower, zl) = worst_excess(grid, |z| {
            let p = tail_fraction(sample, z);
            let reference = exponential_tail(small, z);
            (
                reference,
                p,
                binomial_tolerance(p, r, reference, usize::MAX, TAIL_Z_SCORE),
            )
        });
        let (upper, zu) = worst_excess(grid, |z| {
            let p = tail_fraction(sample, z);
            let reference = exponential_tail(large, z);
            (
                p,
                reference,
                binomial_tolerance(p, r, reference, usize::MAX, TAIL_Z_SCORE),
            )
        });
        rec.add(
            format!("domination/envelope[t={t}]"),
            "spacing tail lies between the Exponential(2) and Exponential(lambda) tails",
            lower.max(upper),
            Some(0.0),
            None,
            Verdict::from_bool(lower <= 0.0 && upper <= 0.0),
            format!("lower excess {lower:.4} at z = {zl}, upper excess {upper:.4} at z = {zu}"),
        );
    }
    Ok(rec.finish())
}

/// Simulate and analyse one experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentTag::LeftmostScaling => run_leftmost_scaling(cfg),
        ExperimentTag::DensityProfile => run_density_profile(cfg),
        ExperimentTag::ParticleCount => run_particle_count(cfg),
        ExperimentTag::QuantileLaw => run_quantile_law(cfg),
        ExperimentTag::SpacingsEquilibrium => run_spacings_equilibrium(cfg),
        ExperimentTag::Domination => run_domination(cfg),
    }
}

pub fn run_leftmost_scaling(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    leftmost_scaling_report(cfg, &simulate_scaled(cfg)?)
}

/// Main ensemble at `cfg.b` plus one ensemble per other scale of the sweep.
pub fn run_density_profile(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let main = simulate_scaled(cfg)?;
    let mut others = Vec::new();
    for &b in &cfg.analysis.b_sweep {
        if b != cfg.b {
            others.push((b, simulate_scaled(&ExperimentConfig { b, ..cfg.clone() })?));
        }
    }
    let mut sweep: Vec<(f64, &Ensemble)> = others.iter().map(|(b, e)| (*b, e)).collect();
    if cfg.analysis.b_sweep.contains(&cfg.b) {
        sweep.push((cfg.b, &main));
    }
    density_profile_report(cfg, &main, &sweep)
}

pub fn run_particle_count(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    particle_count_report(cfg, &simulate_scaled(cfg)?)
}

pub fn run_quantile_law(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    quantile_law_report(cfg, &simulate_scaled(cfg)?)
}

pub fn run_spacings_equilibrium(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let times = &cfg.analysis.times;
    spacings_equilibrium_report(cfg, &simulate_ensemble(cfg, cfg.horizon(), times)?)
}

pub fn run_domination(cfg: &ExperimentConfig) -> Result<VerificationReport> {
    let times = &cfg.analysis.times;
    domination_report(cfg, &simulate_ensemble(cfg, cfg.horizon(), times)?)
}
