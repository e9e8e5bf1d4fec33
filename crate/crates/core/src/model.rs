//! Particle configurations, spacings and initial-law samplers.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{check_positive, Error, Result};
use crate::rng::{self, INITIAL_LAW_STREAM};

/// Rank order of two named particles: by position, ties by name.
#[inline]
pub(crate) fn rank_cmp(positions: &[f64], a: usize, b: usize) -> Ordering {
    let (xa, xb) = (positions[a], positions[b]);
    if xa < xb {
        Ordering::Less
    } else if xa > xb {
        Ordering::Greater
    } else {
        a.cmp(&b)
    }
}

/// Named positions together with the ranking permutation.
///
/// `name_at_rank[k]` is the name of the particle with rank `k` (rank 0 is the
/// leftmost) and `rank_of` is its inverse. `accumulated_drift[i]` is the total
/// drift displacement particle `i` has received so far; it is nonnegative
/// whenever the drift coefficients are.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystemState {
    pub(crate) positions: Vec<f64>,
    pub(crate) rank_of: Vec<usize>,
    pub(crate) name_at_rank: Vec<usize>,
    pub(crate) accumulated_drift: Vec<f64>,
    pub(crate) sim_time: f64,
}

impl ParticleSystemState {
    /// Rank an arbitrary named configuration at time 0.
    pub fn from_positions(positions: Vec<f64>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Parameter { name: "n", value: 0.0 });
        }
        if let Some((name, &position)) = positions.iter().enumerate().find(|(_, x)| !x.is_finite()) {
            return Err(Error::NonFinite { name, position });
        }
        let n = positions.len();
        let mut name_at_rank: Vec<usize> = (0..n).collect();
        name_at_rank.sort_unstable_by(|&a, &b| rank_cmp(&positions, a, b));
        let mut rank_of = alloc::vec![0; n];
        for (rank, &name) in name_at_rank.iter().enumerate() {
            rank_of[name] = rank;
        }
        Ok(Self {
            positions,
            rank_of,
            name_at_rank,
            accumulated_drift: alloc::vec![0.0; n],
            sim_time: 0.0,
        })
    }

    /// Rebuild a state from stored parts, checking every invariant.
    pub fn from_parts(
        positions: Vec<f64>,
        name_at_rank: Vec<usize>,
        accumulated_drift: Vec<f64>,
        sim_time: f64,
    ) -> Result<Self> {
        let n = positions.len();
        if name_at_rank.len() != n || accumulated_drift.len() != n {
            return Err(Error::Domain("state vectors have different lengths"));
        }
        let mut rank_of = alloc::vec![usize::MAX; n];
        for (rank, &name) in name_at_rank.iter().enumerate() {
            if name >= n || rank_of[name] != usize::MAX {
                return Err(Error::Domain("name_at_rank is not a permutation"));
            }
            rank_of[name] = rank;
        }
        let state = Self {
            positions,
            rank_of,
            name_at_rank,
            accumulated_drift,
            sim_time,
        };
        state.check_invariants()?;
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Move particles by name. The ranking is stale until
    /// [`resort`](crate::dynamics::resort) is called.
    pub fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn name_at_rank(&self) -> &[usize] {
        &self.name_at_rank
    }

    pub fn rank_of(&self) -> &[usize] {
        &self.rank_of
    }

    pub fn accumulated_drift(&self) -> &[f64] {
        &self.accumulated_drift
    }

    pub fn sim_time(&self) -> f64 {
        self.sim_time
    }

    /// Position of the particle holding `rank` (0-based).
    #[inline]
    pub fn position_at_rank(&self, rank: usize) -> f64 {
        self.positions[self.name_at_rank[rank]]
    }

    pub fn leftmost(&self) -> f64 {
        self.position_at_rank(0)
    }

    pub fn rightmost(&self) -> f64 {
        self.position_at_rank(self.len() - 1)
    }

    pub fn ranked_positions(&self) -> Vec<f64> {
        self.name_at_rank.iter().map(|&i| self.positions[i]).collect()
    }

    pub fn total_drift(&self) -> f64 {
        self.accumulated_drift.iter().sum()
    }

    /// Verify the permutation and ordering invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.len();
        if self.rank_of.len() != n || self.name_at_rank.len() != n {
            return Err(Error::Domain("permutation length mismatch"));
        }
        for (rank, &name) in self.name_at_rank.iter().enumerate() {
            if name >= n || self.rank_of[name] != rank {
                return Err(Error::Domain("rank_of and name_at_rank are not inverse"));
            }
        }
        for w in self.name_at_rank.windows(2) {
            if rank_cmp(&self.positions, w[0], w[1]) != Ordering::Less {
                return Err(Error::Domain("ranked positions out of order"));
            }
        }
        if self.accumulated_drift.iter().any(|d| !d.is_finite()) {
            return Err(Error::Domain("non-finite accumulated drift"));
        }
        Ok(())
    }
}

/// Gaps `Z_k = Y_{k+1} - Y_k` between consecutive ranked particles.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacingsSequence {
    pub gaps: Vec<f64>,
}

impl SpacingsSequence {
    /// Ranked positions obtained by stacking the gaps on `leftmost`.
    pub fn positions_from(&self, leftmost: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.gaps.len() + 1);
        let mut y = leftmost;
        out.push(y);
        for &z in &self.gaps {
            y += z;
            out.push(y);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }
}

pub fn spacings_of(state: &ParticleSystemState) -> SpacingsSequence {
    let gaps = state
        .name_at_rank
        .windows(2)
        .map(|w| state.positions[w[1]] - state.positions[w[0]])
        .collect();
    SpacingsSequence { gaps }
}

/// Per-rank drift and diffusion coefficients.
///
/// Ranks beyond the stored vectors use the tail values: zero drift and unit
/// diffusion.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftSpec {
    gamma: Vec<f64>,
    sigma: Vec<f64>,
}

impl DriftSpec {
    pub const TAIL_GAMMA: f64 = 0.0;
    pub const TAIL_SIGMA: f64 = 1.0;

    pub fn new(gamma: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if let Some(&g) = gamma.iter().find(|g| !g.is_finite()) {
            return Err(Error::Parameter {
                name: "gamma",
                value: g,
            });
        }
        for &s in &sigma {
            check_positive("sigma", s)?;
        }
        Ok(Self { gamma, sigma })
    }

    /// Only the leftmost particle drifts, at rate `gamma`.
    pub fn atlas(gamma: f64) -> Self {
        Self {
            gamma: alloc::vec![gamma],
            sigma: Vec::new(),
        }
    }

    /// Independent standard Brownian motions.
    pub fn harris() -> Self {
        Self {
            gamma: Vec::new(),
            sigma: Vec::new(),
        }
    }

    #[inline]
    pub fn gamma(&self, rank: usize) -> f64 {
        self.gamma.get(rank).copied().unwrap_or(Self::TAIL_GAMMA)
    }

    #[inline]
    pub fn sigma(&self, rank: usize) -> f64 {
        self.sigma.get(rank).copied().unwrap_or(Self::TAIL_SIGMA)
    }

    /// Number of leading ranks whose coefficients differ from the tail.
    /// Particles ranked at or beyond this depth move as free Brownian motions.
    pub fn active_depth(&self) -> usize {
        let g = self
            .gamma
            .iter()
            .rposition(|&g| g != Self::TAIL_GAMMA)
            .map_or(0, |i| i + 1);
        let s = self
            .sigma
            .iter()
            .rposition(|&s| s != Self::TAIL_SIGMA)
            .map_or(0, |i| i + 1);
        g.max(s)
    }

    pub fn max_abs_gamma(&self) -> f64 {
        self.gamma.iter().fold(0.0_f64, |m, g| m.max(g.abs()))
    }

    pub fn max_sigma(&self) -> f64 {
        self.sigma.iter().fold(Self::TAIL_SIGMA, |m, &s| m.max(s))
    }
}

/// Law of the initial configuration; the leftmost particle sits at 0.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw {
    /// Poisson points of intensity `lambda` on the half line, anchored at 0.
    PoissonHalfLine { lambda: f64 },
    /// Independent exponential gaps, gap `k` with rate `rates[k]`; the last
    /// rate is repeated when more gaps are needed.
    ProductExponentialSpacings { rates: Vec<f64> },
}

impl InitialLaw {
    pub fn sample(&self, n: usize, seed: u64) -> Result<ParticleSystemState> {
        match self {
            InitialLaw::PoissonHalfLine { lambda } => sample_ppp_half_line(*lambda, n, seed),
            InitialLaw::ProductExponentialSpacings { rates } => sample_spacings_law(rates, n, seed),
        }
    }
}

/// Poisson configuration of intensity `lambda` on the half line: a particle at
/// the origin followed by `n - 1` i.i.d. Exponential(`lambda`) gaps.
pub fn sample_ppp_half_line(lambda: f64, n: usize, seed: u64) -> Result<ParticleSystemState> {
    check_positive("lambda", lambda)?;
    sample_spacings_law(&[lambda], n, seed)
}

/// Independent exponential gaps with per-gap rates, leftmost particle at 0.
pub fn sample_spacings_law(rates: &[f64], n: usize, seed: u64) -> Result<ParticleSystemState> {
    if n == 0 {
        return Err(Error::Parameter { name: "n", value: 0.0 });
    }
    if n > 1 && rates.is_empty() {
        return Err(Error::Domain("no spacing rates given"));
    }
    for &r in rates {
        check_positive("rate", r)?;
    }
    let mut rng = rng::stream(seed, INITIAL_LAW_STREAM);
    let mut positions = Vec::with_capacity(n);
    let mut x = 0.0;
    positions.push(x);
    for k in 0..n - 1 {
        let rate = rates.get(k).or(rates.last()).copied().unwrap_or(1.0);
        x += rng::exponential(&mut rng, rate);
        positions.push(x);
    }
    ParticleSystemState::from_positions(positions)
}

/// Gap rates `2 - 2k/n`, `k = 1..n-1`, of the invariant spacing law of the
/// `n`-particle Atlas system with unit drift.
pub fn finite_atlas_invariant_rates(n: usize) -> Vec<f64> {
    (1..n).map(|k| 2.0 - 2.0 * k as f64 / n as f64).collect()
}

/// Gap rates `2 + k a`, `k = 1..=count`, of the one-parameter family of
/// invariant product laws of the infinite Atlas spacings.
pub fn tilted_invariant_rates(a: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| 2.0 + k as f64 * a).collect()
}
