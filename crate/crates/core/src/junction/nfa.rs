//! A-contrario significance of branches and junctions.
//!
//! Under the null hypothesis the level-line orientation at each pixel is
//! uniform and independent of its neighbours, while gradient magnitudes are
//! taken as observed. A sector's strength is then a sum of independent terms
//! `m_q * a_q` with `a_q` in [0, 1], so Hoeffding's inequality bounds the
//! probability of seeing strength `t` or more by
//! `exp(-2 (t - mu)^2 / sum m_q^2)` with `mu = E[a] * sum m_q`.

use std::f64::consts::PI;

use super::sector::SectorStats;

/// `E[max(|cos u| - |sin u|, 0)]` for `u` uniform on the circle.
pub const NULL_ALIGNMENT_MEAN: f64 = 2.0 * (std::f64::consts::SQRT_2 - 1.0) / PI;

/// `Var[max(|cos u| - |sin u|, 0)]` for `u` uniform on the circle.
pub const NULL_ALIGNMENT_VAR: f64 =
    0.5 - 1.0 / PI - NULL_ALIGNMENT_MEAN * NULL_ALIGNMENT_MEAN;

/// Expected sector strength under the null.
#[inline]
pub fn null_mean(stats: &SectorStats) -> f64 {
    NULL_ALIGNMENT_MEAN * stats.mass
}

/// Standard deviation of the sector strength under the null.
#[inline]
pub fn null_std(stats: &SectorStats) -> f64 {
    (NULL_ALIGNMENT_VAR * stats.mass_sq).sqrt()
}

/// Log of the Hoeffding bound on `P(strength >= t)` for one sector. Zero
/// (probability bound 1) when `t` does not exceed the null mean.
pub fn log_tail(t: f64, stats: &SectorStats) -> f64 {
    let excess = t - null_mean(stats);
    if excess <= 0.0 || stats.mass_sq <= 0.0 {
        0.0
    } else {
        -2.0 * excess * excess / stats.mass_sq
    }
}

/// `ln C(n, k)`.
fn ln_binomial(n: usize, k: usize) -> f64 {
    assert!(k <= n, "cannot choose {k} of {n}");
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Log of the number of tests for junctions with `branches` branches:
/// positions × scales × orientation subsets.
pub fn ln_test_count(dims: (usize, usize), n_scales: usize, bins: usize, branches: usize) -> f64 {
    ((dims.0 * dims.1) as f64).ln() + (n_scales as f64).ln() + ln_binomial(bins, branches)
}

/// Log-NFA of a junction of strength `t` whose branches have the given sector
/// statistics.
pub fn log_nfa(t: f64, branches: &[SectorStats], ln_tests: f64) -> f64 {
    ln_tests + branches.iter().map(|b| log_tail(t, b)).sum::<f64>()
}

/// NFA clamped to [0, 1].
pub fn rho_from_log(log_nfa: f64) -> f64 {
    log_nfa.min(0.0).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_moments_match_quadrature() {
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64 * 2.0 * PI;
            let a = (u.cos().abs() - u.sin().abs()).max(0.0);
            s1 += a;
            s2 += a * a;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - NULL_ALIGNMENT_MEAN).abs() < 1e-8);
        assert!((var - NULL_ALIGNMENT_VAR).abs() < 1e-8);
    }

    #[test]
    fn zero_and_null_mean_strength_are_never_meaningful() {
        let st = SectorStats { strength: 0.0, mass: 10.0, mass_sq: 6.0, count: 20 };
        let ln_n = ln_test_count((64, 64), 5, 64, 2);
        let branches = [st, st];
        assert_eq!(rho_from_log(log_nfa(0.0, &branches, ln_n)), 1.0);
        assert_eq!(rho_from_log(log_nfa(null_mean(&st), &branches, ln_n)), 1.0);
    }

    #[test]
    fn log_tail_is_monotone_in_strength() {
        let st = SectorStats { strength: 0.0, mass: 10.0, mass_sq: 6.0, count: 20 };
        let mut last = 0.0;
        for k in 0..40 {
            let v = log_tail(k as f64 * 0.25, &st);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn binomial_logs() {
        assert!((ln_binomial(64, 2) - (2016f64).ln()).abs() < 1e-12);
        assert!((ln_binomial(5, 5)).abs() < 1e-12);
    }
}
