//! Rank-frozen Euler–Maruyama dynamics.
//!
//! Over one step of length `dt` the particle of rank `k` (ranks taken at the
//! start of the step) moves by `γ_k dt + σ_k sqrt(dt) ξ`, where `ξ` comes from
//! the particle's own stream. The full `γ_k dt` is credited to that particle's
//! accumulated drift, so for the Atlas drift the credited total equals `γ`
//! times the elapsed time step by step. Ranks are repaired after every step.
//!
//! [`run`] can optionally block the far field: particles that are too far
//! above the deepest rank with non-default coefficients to reach it within a
//! block are advanced by one aggregated Gaussian increment per block instead
//! of one per step. Away from the active ranks every particle is a free
//! Brownian motion, so the aggregated increment has the exact law; the only
//! approximation is the event that a blocked particle would have reached the
//! active ranks, which the margin (in standard deviations of the relative
//! motion) makes negligible. Such events are counted in [`RunSummary`].

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{check_positive, Error, Result};
use crate::model::{rank_cmp, DriftSpec, ParticleSystemState};
use crate::rng::ParticleStreams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Coefficients evaluated at the ranks held at the start of the step.
    RankFrozenEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResortStrategy {
    /// Insertion repair of the previous order; linear when few ranks change.
    AdaptiveInsertion,
    /// Sort from scratch. Kept as the reference.
    FullSort,
}

/// Aggregated stepping of particles far from the active ranks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarFieldBlocking {
    /// Steps per block.
    pub block_steps: usize,
    /// Safety margin in standard deviations of the relative displacement
    /// between a far particle and the active ranks over one block.
    pub margin_sigmas: f64,
}

impl Default for FarFieldBlocking {
    fn default() -> Self {
        Self {
            block_steps: 256,
            margin_sigmas: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub resort: ResortStrategy,
    pub far_field: Option<FarFieldBlocking>,
}

impl StepConfig {
    pub const DEFAULT_DT: f64 = 1e-3;

    pub fn new(dt: f64) -> Result<Self> {
        check_positive("dt", dt)?;
        Ok(Self {
            dt,
            scheme: Scheme::RankFrozenEuler,
            resort: ResortStrategy::AdaptiveInsertion,
            far_field: None,
        })
    }

    pub fn with_resort(mut self, resort: ResortStrategy) -> Self {
        self.resort = resort;
        self
    }

    pub fn with_far_field(mut self, far_field: FarFieldBlocking) -> Self {
        self.far_field = Some(far_field);
        self
    }
}

/// Restore the ranking permutation after positions changed.
///
/// Returns the number of adjacent transpositions for the insertion strategy
/// and the number of particles whose rank changed for the full sort.
pub fn resort(state: &mut ParticleSystemState, strategy: ResortStrategy) -> usize {
    let n = state.len();
    match strategy {
        ResortStrategy::AdaptiveInsertion => {
            insertion_repair(&state.positions, &mut state.name_at_rank[..], &mut state.rank_of)
        }
        ResortStrategy::FullSort => full_sort_prefix(state, n),
    }
}

fn full_sort_prefix(state: &mut ParticleSystemState, upto: usize) -> usize {
    let positions = &state.positions;
    state.name_at_rank[..upto].sort_unstable_by(|&a, &b| rank_cmp(positions, a, b));
    let mut changed = 0;
    for rank in 0..upto {
        let name = state.name_at_rank[rank];
        if state.rank_of[name] != rank {
            state.rank_of[name] = rank;
            changed += 1;
        }
    }
    changed
}

/// Insertion sort of `order` (a prefix of `name_at_rank`) keyed by position,
/// ties by name, keeping `rank_of` in sync.
fn insertion_repair(positions: &[f64], order: &mut [usize], rank_of: &mut [usize]) -> usize {
    let mut swaps = 0;
    for i in 1..order.len() {
        let name = order[i];
        let x = positions[name];
        let mut j = i;
        while j > 0 {
            let prev = order[j - 1];
            let xp = positions[prev];
            if x < xp || (x == xp && name < prev) {
                order[j] = prev;
                rank_of[prev] = j;
                j -= 1;
            } else {
                break;
            }
        }
        if j != i {
            swaps += i - j;
            order[j] = name;
            rank_of[name] = j;
        }
    }
    swaps
}

/// Move the particles of ranks `0..upto` by one Euler step.
fn advance_ranks(
    state: &mut ParticleSystemState,
    drift: &DriftSpec,
    dt: f64,
    upto: usize,
    streams: &mut ParticleStreams,
) -> Result<()> {
    let sqrt_dt = libm::sqrt(dt);
    let depth = drift.active_depth().min(upto);
    for rank in 0..depth {
        let name = state.name_at_rank[rank];
        let gamma = drift.gamma(rank);
        let sigma = drift.sigma(rank);
        let x = state.positions[name] + gamma * dt + sigma * sqrt_dt * streams.normal(name);
        if !x.is_finite() {
            return Err(Error::NonFinite { name, position: x });
        }
        state.positions[name] = x;
        if gamma != 0.0 {
            state.accumulated_drift[name] += gamma * dt;
        }
    }
    for rank in depth..upto {
        let name = state.name_at_rank[rank];
        let x = state.positions[name] + sqrt_dt * streams.normal(name);
        if !x.is_finite() {
            return Err(Error::NonFinite { name, position: x });
        }
        state.positions[name] = x;
    }
    Ok(())
}

fn check_streams(state: &ParticleSystemState, streams: &ParticleStreams) -> Result<()> {
    if streams.len() < state.len() {
        return Err(Error::Domain("fewer noise streams than particles"));
    }
    Ok(())
}

/// One rank-frozen Euler step of the whole system.
pub fn step(
    state: &mut ParticleSystemState,
    drift: &DriftSpec,
    cfg: &StepConfig,
    streams: &mut ParticleStreams,
) -> Result<()> {
    check_positive("dt", cfg.dt)?;
    check_streams(state, streams)?;
    let n = state.len();
    advance_ranks(state, drift, cfg.dt, n, streams)?;
    resort(state, cfg.resort);
    state.sim_time += cfg.dt;
    Ok(())
}

/// A recorded sample of the trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub requested_time: f64,
    /// Time of the completed step the request snapped to.
    pub time: f64,
    pub step: u64,
    pub leftmost: f64,
    /// Positions of the tracked ranks, in the recorder's order.
    pub ranked: Vec<f64>,
    pub state: Option<ParticleSystemState>,
}

/// Collects snapshots at requested times and, optionally, the name holding
/// rank 0 during every step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecorder {
    sample_times: Vec<f64>,
    tracked_ranks: Vec<usize>,
    keep_states: bool,
    leftmost_names: Option<Vec<u32>>,
    snapshots: Vec<Snapshot>,
    dt: Option<f64>,
}

impl TrajectoryRecorder {
    /// `sample_times` must be finite, nonnegative and strictly increasing.
    pub fn new(sample_times: Vec<f64>) -> Result<Self> {
        if sample_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Domain("sample times must be finite and nonnegative"));
        }
        if sample_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("sample times must be strictly increasing"));
        }
        Ok(Self {
            sample_times,
            tracked_ranks: Vec::new(),
            keep_states: false,
            leftmost_names: None,
            snapshots: Vec::new(),
            dt: None,
        })
    }

    pub fn tracking_ranks(mut self, ranks: Vec<usize>) -> Self {
        self.tracked_ranks = ranks;
        self
    }

    pub fn keeping_states(mut self) -> Self {
        self.keep_states = true;
        self
    }

    pub fn tracking_leftmost_names(mut self) -> Self {
        self.leftmost_names = Some(Vec::new());
        self
    }

    pub fn sample_times(&self) -> &[f64] {
        &self.sample_times
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn into_snapshots(self) -> Vec<Snapshot> {
        self.snapshots
    }

    pub fn leftmost_names(&self) -> Option<&[u32]> {
        self.leftmost_names.as_deref()
    }

    fn record(&mut self, requested_time: f64, step: u64, state: &ParticleSystemState) {
        let ranked = self
            .tracked_ranks
            .iter()
            .filter(|&&r| r < state.len())
            .map(|&r| state.position_at_rank(r))
            .collect();
        self.snapshots.push(Snapshot {
            requested_time,
            time: state.sim_time,
            step,
            leftmost: state.leftmost(),
            ranked,
            state: self.keep_states.then(|| state.clone()),
        });
    }

    #[inline]
    fn note_leftmost(&mut self, state: &ParticleSystemState) {
        if let Some(h) = self.leftmost_names.as_mut() {
            h.push(state.name_at_rank[0] as u32);
        }
    }
}

/// Counters reported by [`run`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub steps: u64,
    pub swaps: u64,
    pub blocks: u64,
    /// Blocked particles that ended a block at or below the deepest active
    /// rank. Nonzero means the far-field margin was too small.
    pub far_field_contacts: u64,
}

fn snap(offset: f64, dt: f64) -> u64 {
    libm::round(offset / dt) as u64
}

/// Advance `state` to `horizon`, filling `recorder`.
///
/// The horizon and every sample time snap to the nearest step of the grid
/// `sim_time + k dt`.
pub fn run(
    state: &mut ParticleSystemState,
    drift: &DriftSpec,
    cfg: &StepConfig,
    horizon: f64,
    recorder: &mut TrajectoryRecorder,
    streams: &mut ParticleStreams,
) -> Result<RunSummary> {
    check_positive("dt", cfg.dt)?;
    check_streams(state, streams)?;
    let start = state.sim_time;
    if !(horizon >= start) || !horizon.is_finite() {
        return Err(Error::Domain("horizon precedes the current time"));
    }
    if recorder
        .sample_times
        .iter()
        .any(|&t| t < start - 0.5 * cfg.dt || t > horizon + 0.5 * cfg.dt)
    {
        return Err(Error::Domain("sample time outside [sim_time, horizon]"));
    }
    let dt = cfg.dt;
    recorder.dt = Some(dt);
    let total = snap(horizon - start, dt);
    let sample_steps: Vec<u64> = recorder
        .sample_times
        .iter()
        .map(|&t| snap(t - start, dt).min(total))
        .collect();
    let requested = recorder.sample_times.clone();

    let n = state.len();
    let track_names = recorder.leftmost_names.is_some();
    let depth = drift.active_depth().max(track_names as usize).min(n);
    let mut summary = RunSummary::default();
    let mut next_sample = 0;
    let flush_samples =
        |recorder: &mut TrajectoryRecorder, state: &ParticleSystemState, done: u64, next: &mut usize| {
            while *next < sample_steps.len() && sample_steps[*next] == done {
                recorder.record(requested[*next], done, state);
                *next += 1;
            }
        };
    flush_samples(recorder, state, 0, &mut next_sample);

    let mut done = 0u64;
    while done < total {
        let mut stop = total;
        if let Some(&s) = sample_steps.get(next_sample) {
            stop = stop.min(s);
        }
        match cfg.far_field {
            None => {
                for _ in done..stop {
                    recorder.note_leftmost(state);
                    advance_ranks(state, drift, dt, n, streams)?;
                    summary.swaps += resort(state, cfg.resort) as u64;
                    state.sim_time += dt;
                }
            }
            Some(ff) => {
                stop = stop.min(done + ff.block_steps.max(1) as u64);
                let k = stop - done;
                let tau = k as f64 * dt;
                let near = near_set_size(state, drift, depth, tau, ff.margin_sigmas);
                for _ in 0..k {
                    recorder.note_leftmost(state);
                    advance_ranks(state, drift, dt, near, streams)?;
                    summary.swaps += match cfg.resort {
                        ResortStrategy::AdaptiveInsertion => {
                            insertion_repair(&state.positions, &mut state.name_at_rank[..near], &mut state.rank_of)
                        }
                        ResortStrategy::FullSort => full_sort_prefix(state, near),
                    } as u64;
                    state.sim_time += dt;
                }
                if near < n {
                    let deepest_active = if depth > 0 {
                        state.position_at_rank(depth - 1)
                    } else {
                        f64::NEG_INFINITY
                    };
                    let scale = libm::sqrt(tau);
                    for rank in near..n {
                        let name = state.name_at_rank[rank];
                        let x = state.positions[name] + scale * streams.normal(name);
                        if !x.is_finite() {
                            return Err(Error::NonFinite { name, position: x });
                        }
                        if x <= deepest_active {
                            summary.far_field_contacts += 1;
                        }
                        state.positions[name] = x;
                    }
                }
                summary.swaps += resort(state, cfg.resort) as u64;
                summary.blocks += 1;
            }
        }
        summary.steps += stop - done;
        done = stop;
        flush_samples(recorder, state, done, &mut next_sample);
    }
    Ok(summary)
}

/// Number of leading ranks that must be stepped individually over a block of
/// length `tau`.
fn near_set_size(state: &ParticleSystemState, drift: &DriftSpec, depth: usize, tau: f64, margin_sigmas: f64) -> usize {
    if depth == 0 {
        return 0;
    }
    let reach = drift.max_abs_gamma() * tau + margin_sigmas * drift.max_sigma() * libm::sqrt(2.0 * tau);
    let threshold = state.position_at_rank(depth - 1) + reach;
    let ranks = &state.name_at_rank;
    let positions = &state.positions;
    let above =
        ranks[depth..].partition_point(|&name| positions[name].partial_cmp(&threshold) != Some(Ordering::Greater));
    depth + above
}

/// Time each particle spent at rank 0, from a recorder that tracked the
/// leftmost names.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationHistogram {
    pub dt: f64,
    /// Steps spent at rank 0, keyed by name; only names that occupied it.
    pub steps: BTreeMap<usize, u64>,
}

impl OccupationHistogram {
    pub fn time(&self, name: usize) -> f64 {
        self.steps.get(&name).copied().unwrap_or(0) as f64 * self.dt
    }

    pub fn total_steps(&self) -> u64 {
        self.steps.values().sum()
    }

    pub fn total_time(&self) -> f64 {
        self.total_steps() as f64 * self.dt
    }
}

pub fn leftmost_occupation_histogram(recorder: &TrajectoryRecorder) -> Result<OccupationHistogram> {
    let history = recorder
        .leftmost_names
        .as_ref()
        .ok_or(Error::Unsupported("recorder did not track leftmost names"))?;
    let dt = recorder.dt.ok_or(Error::Unsupported("recorder has not been run"))?;
    let mut steps = BTreeMap::new();
    for &name in history {
        *steps.entry(name as usize).or_insert(0u64) += 1;
    }
    Ok(OccupationHistogram { dt, steps })
}
