use atlas_core::measure::{density_on, rescale};
use atlas_core::model::{sample_ppp_half_line, sample_spacings_law, spacings_of, tilted_invariant_rates};
use atlas_core::stats::{
    exponential_cdf, ks_critical_1pct, ks_statistic, ks_two_sample, ks_two_sample_critical_1pct, mean,
};

#[test]
fn poisson_gaps_are_exponential() {
    let n = 10_000;
    let s = sample_ppp_half_line(2.0, n, 11).unwrap();
    assert_eq!(s.leftmost(), 0.0);
    let gaps = spacings_of(&s).gaps;
    assert_eq!(gaps.len(), n - 1);
    let m = mean(&gaps);
    assert!((m - 0.5).abs() <= 3.0 * 0.5 / ((n - 1) as f64).sqrt(), "mean {m}");
    let d = ks_statistic(&gaps, |x| exponential_cdf(2.0, x));
    assert!(d < ks_critical_1pct(n - 1), "ks {d}");
}

#[test]
fn one_gap_has_mean_one_half() {
    let reps = 100_000;
    let gaps: Vec<f64> = (0..reps)
        .map(|seed| {
            let s = sample_spacings_law(&[2.0], 2, seed).unwrap();
            s.rightmost() - s.leftmost()
        })
        .collect();
    assert!((mean(&gaps) - 0.5).abs() <= 0.01 * 0.5);
    assert!(ks_statistic(&gaps, |x| exponential_cdf(2.0, x)) < ks_critical_1pct(reps as usize));
}

#[test]
fn untilted_family_matches_flat_law() {
    // a = 0 draws the same gaps as the constant-rate law
    let flat = sample_spacings_law(&[2.0], 5, 3).unwrap();
    let tilted = sample_spacings_law(&tilted_invariant_rates(0.0, 4), 5, 3).unwrap();
    assert_eq!(flat.positions(), tilted.positions());
    // and in law across seeds
    let pooled = |rates: &[f64], base: u64| -> Vec<f64> {
        (0..2000)
            .flat_map(|seed| spacings_of(&sample_spacings_law(rates, 5, base + seed).unwrap()).gaps)
            .collect()
    };
    let a = pooled(&[2.0], 0);
    let b = pooled(&tilted_invariant_rates(0.0, 4), 10_000);
    assert!(ks_two_sample(&a, &b) < ks_two_sample_critical_1pct(a.len(), b.len()));
}

#[test]
fn tilted_gaps_follow_their_rates() {
    let rates = tilted_invariant_rates(0.5, 3);
    let reps = 4000;
    let samples: Vec<Vec<f64>> = (0..reps)
        .map(|seed| spacings_of(&sample_spacings_law(&rates, 4, seed).unwrap()).gaps)
        .collect();
    for (k, &rate) in rates.iter().enumerate() {
        let gap_k: Vec<f64> = samples.iter().map(|g| g[k]).collect();
        let d = ks_statistic(&gap_k, |x| exponential_cdf(rate, x));
        assert!(d < ks_critical_1pct(reps as usize), "gap {k}: {d}");
    }
}

#[test]
fn rescaled_poisson_cdf_is_linear() {
    let lambda = 1.0;
    let b = 1e-2;
    let m = rescale(&sample_ppp_half_line(lambda, 10_000, 5).unwrap(), b).unwrap();
    for k in 1..=10 {
        let x = 0.5 * k as f64;
        let f = m.cdf(x);
        // b times a Poisson(λx/b) count plus the atom at the origin
        let band = 3.0 * (lambda * x * b).sqrt() + b;
        assert!((f - lambda * x).abs() <= band, "x {x}: {f}");
    }
}

#[test]
fn histogram_of_poisson_points_is_flat() {
    let lambda = 2.0;
    let b = 1e-2;
    let m = rescale(&sample_ppp_half_line(lambda, 100_000, 9).unwrap(), b).unwrap();
    let p = density_on(&m, 0.0, 0.5, 40).unwrap();
    let per_bin = lambda * 0.5 / b;
    for (i, &d) in p.bin_density.iter().enumerate() {
        assert!(
            (d - lambda).abs() <= 2.0 / per_bin.sqrt() * lambda * 2.0,
            "bin {i}: {d}"
        );
    }
}
