//! Rescaled empirical measures `b Σ δ_{b X_i}`.

use alloc::vec::Vec;

use crate::error::{check_positive, Error, Result};
use crate::model::ParticleSystemState;

/// Point measure with equal mass `b` on each atom.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    b: f64,
    atoms: Vec<f64>,
}

impl EmpiricalMeasure {
    /// Atoms are sorted on construction.
    pub fn new(b: f64, mut atoms: Vec<f64>) -> Result<Self> {
        check_positive("b", b)?;
        if atoms.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("atoms must be finite"));
        }
        atoms.sort_unstable_by(|a, c| a.partial_cmp(c).unwrap());
        Ok(Self { b, atoms })
    }

    pub fn mass_per_atom(&self) -> f64 {
        self.b
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.b * self.atoms.len() as f64
    }

    /// Number of atoms `<= x`.
    pub fn count_le(&self, x: f64) -> usize {
        self.atoms.partition_point(|&a| a <= x)
    }

    /// Mass of `(-∞, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.b * self.count_le(x) as f64
    }

    /// `inf { r : cdf(r) > q }`, so `quantile(0)` is the leftmost atom.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q >= 0.0) {
            return Err(Error::Domain("quantile mass must be nonnegative"));
        }
        let total = self.total_mass();
        if q >= total {
            return Err(Error::OutOfMass { requested: q, total });
        }
        // smallest index i with b (i + 1) > q; computed with the same
        // product as `cdf` so the two stay exactly dual
        let n = self.atoms.len();
        let mut i = libm::floor(q / self.b) as usize;
        i = i.min(n - 1);
        while i > 0 && self.b * i as f64 > q {
            i -= 1;
        }
        while self.b * (i + 1) as f64 <= q {
            i += 1;
        }
        Ok(self.atoms[i])
    }

    /// Mass of `(lo, hi]`.
    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        self.b * (self.count_le(hi) - self.count_le(lo)) as f64
    }
}

/// Scale positions by `b`; each atom carries mass `b`.
///
/// The caller supplies the state at unscaled time `t / b²` to analyse scaled
/// time `t`.
pub fn rescale(state: &ParticleSystemState, b: f64) -> Result<EmpiricalMeasure> {
    check_positive("b", b)?;
    let atoms = state.ranked_positions().into_iter().map(|x| b * x).collect();
    Ok(EmpiricalMeasure { b, atoms })
}

/// Piecewise-constant density on consecutive bins `(e_i, e_{i+1}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub bin_edges: Vec<f64>,
    pub bin_density: Vec<f64>,
}

impl DensityProfile {
    pub fn bin_count(&self) -> usize {
        self.bin_density.len()
    }

    pub fn bin_mass(&self, i: usize) -> f64 {
        self.bin_density[i] * (self.bin_edges[i + 1] - self.bin_edges[i])
    }

    pub fn total_mass(&self) -> f64 {
        (0..self.bin_count()).map(|i| self.bin_mass(i)).sum()
    }

    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }
}

pub const DEFAULT_BIN_WIDTH: f64 = 0.1;

/// Histogram density over bins of width `bin_width` aligned to multiples of
/// the width and covering every atom.
pub fn density_estimate(measure: &EmpiricalMeasure, bin_width: f64) -> Result<DensityProfile> {
    check_positive("bin_width", bin_width)?;
    let (Some(&first), Some(&last)) = (measure.atoms.first(), measure.atoms.last()) else {
        return Ok(DensityProfile {
            bin_edges: Vec::new(),
            bin_density: Vec::new(),
        });
    };
    let lo = (libm::ceil(first / bin_width) - 1.0) * bin_width;
    let bins = libm::ceil((last - lo) / bin_width).max(1.0) as usize;
    density_on(measure, lo, bin_width, bins)
}

/// Histogram density on `bins` bins of width `bin_width` starting at `lo`.
pub fn density_on(measure: &EmpiricalMeasure, lo: f64, bin_width: f64, bins: usize) -> Result<DensityProfile> {
    check_positive("bin_width", bin_width)?;
    let bin_edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * bin_width).collect();
    let counts: Vec<usize> = bin_edges.iter().map(|&e| measure.count_le(e)).collect();
    let bin_density = counts
        .windows(2)
        .zip(bin_edges.windows(2))
        .map(|(c, e)| measure.b * (c[1] - c[0]) as f64 / (e[1] - e[0]))
        .collect();
    Ok(DensityProfile { bin_edges, bin_density })
}

/// `∫_{-∞}^{r} |F₁ - F₂| dx + |F₁(r) - F₂(r)|` for every integer cutoff
/// `r = 1..=r_max`.
fn cdf_gaps_at_cutoffs(m1: &EmpiricalMeasure, m2: &EmpiricalMeasure, r_max: usize) -> Vec<f64> {
    let (a, b) = (&m1.atoms, &m2.atoms);
    let (mut i, mut j) = (0usize, 0usize);
    let mut integral = 0.0;
    let mut x_prev = f64::NEG_INFINITY;
    let mut out = Vec::with_capacity(r_max);
    let gap = |i: usize, j: usize| (m1.b * i as f64 - m2.b * j as f64).abs();
    for r in 1..=r_max {
        let cutoff = r as f64;
        loop {
            let next_a = a.get(i).copied().unwrap_or(f64::INFINITY);
            let next_b = b.get(j).copied().unwrap_or(f64::INFINITY);
            let x = next_a.min(next_b);
            if x > cutoff {
                break;
            }
            if x_prev.is_finite() {
                integral += gap(i, j) * (x - x_prev);
            }
            x_prev = x;
            while i < a.len() && a[i] == x {
                i += 1;
            }
            while j < b.len() && b[j] == x {
                j += 1;
            }
        }
        if x_prev.is_finite() {
            integral += gap(i, j) * (cutoff - x_prev);
            x_prev = cutoff;
        }
        out.push(integral + gap(i, j));
    }
    out
}

/// Computable stand-in for the bounded-Lipschitz metric on locally finite
/// measures: `Σ_{r=1}^{r_max} 2^{-r} min(1, ∫_{-∞}^{r} |F₁-F₂| + |F₁(r)-F₂(r)|)`.
///
/// It is a pseudometric that vanishes iff the measures agree on
/// `(-∞, r_max]`. It is not the supremum over Lipschitz test functions.
pub fn dstar_surrogate(m1: &EmpiricalMeasure, m2: &EmpiricalMeasure, r_max: usize) -> f64 {
    cdf_gaps_at_cutoffs(m1, m2, r_max)
        .into_iter()
        .enumerate()
        .map(|(k, v)| libm::ldexp(1.0, -(k as i32 + 1)) * v.min(1.0))
        .sum()
}
