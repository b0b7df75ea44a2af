//! Expectation-maximization for one-dimensional Gaussian mixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Component, GaussianMixture};
use crate::error::{Error, Result};

/// Lower bound on component standard deviations, in radians.
pub const MIN_STDDEV: f64 = 1e-3;
/// EM stops once the log-likelihood gains less than this.
pub const TOLERANCE: f64 = 1e-7;
pub const MAX_ITERATIONS: usize = 500;
const LLOYD_ITERATIONS: usize = 50;

/// Result of [`em_fit_traced`].
#[derive(Debug, Clone)]
pub struct EmTrace {
    pub mixture: GaussianMixture,
    /// Log-likelihood of the parameters entering each iteration, plus the final one.
    pub log_likelihood: Vec<f64>,
}

/// Fits a `k`-component mixture to `samples` (angles in (0, π]).
pub fn em_fit(samples: &[f64], k: usize, seed: u64) -> Result<GaussianMixture> {
    em_fit_traced(samples, k, seed).map(|t| t.mixture)
}

/// [`em_fit`] that also reports the log-likelihood history.
pub fn em_fit_traced(samples: &[f64], k: usize, seed: u64) -> Result<EmTrace> {
    if k == 0 {
        return Err(Error::param("mixture needs at least one component"));
    }
    if samples.len() < 10 * k {
        return Err(Error::param(format!(
            "{} samples are too few for {k} components (need at least {})",
            samples.len(),
            10 * k
        )));
    }
    if let Some(bad) = samples.iter().find(|v| !(v.is_finite() && **v > 0.0 && **v <= std::f64::consts::PI)) {
        return Err(Error::param(format!("sample {bad} is outside (0, pi]")));
    }

    let mut comps = initialize(samples, k, seed);
    let n = samples.len();
    let mut resp = vec![0.0; n * k];
    let mut history = Vec::new();
    for _ in 0..MAX_ITERATIONS {
        let ll = e_step(samples, &comps, &mut resp);
        if let Some(&prev) = history.last() {
            if ll - prev < TOLERANCE {
                history.push(ll);
                return Ok(finish(comps, history));
            }
        }
        history.push(ll);
        m_step(samples, &resp, &mut comps);
    }
    history.push(e_step(samples, &comps, &mut resp));
    Ok(finish(comps, history))
}

fn finish(components: Vec<Component>, log_likelihood: Vec<f64>) -> EmTrace {
    EmTrace { mixture: GaussianMixture { components }, log_likelihood }
}

/// k-means++ seeding refined by Lloyd iterations; the resulting clusters give
/// the initial weights, means and spreads.
fn initialize(samples: &[f64], k: usize, seed: u64) -> Vec<Component> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![samples[rng.random_range(0..samples.len())]];
    let mut d2: Vec<f64> = samples.iter().map(|&x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut idx = samples.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    idx = i;
                    break;
                }
                target -= d;
            }
            idx
        } else {
            rng.random_range(0..samples.len())
        };
        let c = samples[pick];
        centers.push(c);
        for (d, &x) in d2.iter_mut().zip(samples) {
            *d = d.min((x - c).powi(2));
        }
    }

    let nearest = |x: f64, centers: &[f64]| {
        let mut best = 0;
        for (j, &c) in centers.iter().enumerate() {
            if (x - c).abs() < (x - centers[best]).abs() {
                best = j;
            }
        }
        best
    };
    let mut assign = vec![0usize; samples.len()];
    for _ in 0..LLOYD_ITERATIONS {
        let mut changed = false;
        for (a, &x) in assign.iter_mut().zip(samples) {
            let j = nearest(x, &centers);
            changed |= *a != j;
            *a = j;
        }
        let mut sum = vec![0.0; k];
        let mut count = vec![0usize; k];
        for (&a, &x) in assign.iter().zip(samples) {
            sum[a] += x;
            count[a] += 1;
        }
        for j in 0..k {
            if count[j] > 0 {
                centers[j] = sum[j] / count[j] as f64;
            }
        }
        if !changed {
            break;
        }
    }

    let n = samples.len() as f64;
    let mean_all = samples.iter().sum::<f64>() / n;
    let std_all = (samples.iter().map(|x| (x - mean_all).powi(2)).sum::<f64>() / n).sqrt();
    let mut comps: Vec<Component> = (0..k)
        .map(|j| {
            let members: Vec<f64> = assign.iter().zip(samples).filter(|(&a, _)| a == j).map(|(_, &x)| x).collect();
            let spread = if members.len() > 1 {
                let m = centers[j];
                (members.iter().map(|x| (x - m).powi(2)).sum::<f64>() / members.len() as f64).sqrt()
            } else {
                std_all
            };
            Component { w: members.len().max(1) as f64, mu: centers[j], sigma: spread.max(MIN_STDDEV) }
        })
        .collect();
    let total: f64 = comps.iter().map(|c| c.w).sum();
    comps.iter_mut().for_each(|c| c.w /= total);
    comps
}

/// Fills `resp` with responsibilities and returns the log-likelihood.
fn e_step(samples: &[f64], comps: &[Component], resp: &mut [f64]) -> f64 {
    let k = comps.len();
    let mut ll = 0.0;
    let mut logs = vec![0.0; k];
    for (i, &x) in samples.iter().enumerate() {
        for (l, c) in logs.iter_mut().zip(comps) {
            *l = if c.w > 0.0 { c.w.ln() + c.log_density(x) } else { f64::NEG_INFINITY };
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        let lse = top + sum.ln();
        ll += lse;
        for (r, l) in resp[i * k..(i + 1) * k].iter_mut().zip(&logs) {
            *r = (l - lse).exp();
        }
    }
    ll
}

fn m_step(samples: &[f64], resp: &[f64], comps: &mut [Component]) {
    let k = comps.len();
    let n = samples.len() as f64;
    for (j, c) in comps.iter_mut().enumerate() {
        let nk: f64 = (0..samples.len()).map(|i| resp[i * k + j]).sum();
        if nk <= 0.0 {
            c.w = 0.0;
            continue;
        }
        let mu = samples.iter().enumerate().map(|(i, &x)| resp[i * k + j] * x).sum::<f64>() / nk;
        let var = samples.iter().enumerate().map(|(i, &x)| resp[i * k + j] * (x - mu).powi(2)).sum::<f64>() / nk;
        *c = Component { w: nk / n, mu, sigma: var.sqrt().max(MIN_STDDEV) };
    }
    let total: f64 = comps.iter().map(|c| c.w).sum();
    comps.iter_mut().for_each(|c| c.w /= total);
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    use rand_distr::{Distribution, Normal};

    use super::*;

    #[test]
    fn identical_samples_collapse_to_floor() {
        let m = em_fit(&[1.2; 40], 1, 17).unwrap();
        assert_eq!(m.components.len(), 1);
        assert!((m.components[0].mu - 1.2).abs() < 1e-12);
        assert_eq!(m.components[0].sigma, MIN_STDDEV);
        assert!((m.components[0].w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_small_or_invalid_samples() {
        assert!(em_fit(&[1.0; 19], 2, 17).is_err());
        assert!(em_fit(&[1.0; 20], 0, 17).is_err());
        let mut s = vec![1.0; 30];
        s[3] = 0.0;
        assert!(em_fit(&s, 1, 17).is_err());
        s[3] = 4.0;
        assert!(em_fit(&s, 1, 17).is_err());
    }

    #[test]
    fn recovers_two_components_with_monotone_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Normal::new(FRAC_PI_2, 0.05).unwrap();
        let b = Normal::new(FRAC_PI_6, 0.05).unwrap();
        let samples: Vec<f64> = (0..5000).map(|i| if i % 2 == 0 { a.sample(&mut rng) } else { b.sample(&mut rng) }).collect();
        let trace = em_fit_traced(&samples, 2, 17).unwrap();
        let mut mus: Vec<f64> = trace.mixture.components.iter().map(|c| c.mu).collect();
        mus.sort_by(f64::total_cmp);
        assert!((mus[0] - FRAC_PI_6).abs() < 0.02 && (mus[1] - FRAC_PI_2).abs() < 0.02, "{mus:?}");
        for w in trace.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
        }
        let wsum: f64 = trace.mixture.components.iter().map(|c| c.w).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let samples: Vec<f64> = (0..300).map(|i| 0.3 + (i % 37) as f64 * 0.07).collect();
        let a = em_fit(&samples, 3, 17).unwrap();
        let b = em_fit(&samples, 3, 17).unwrap();
        assert_eq!(a, b);
    }
}
