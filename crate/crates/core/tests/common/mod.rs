//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use lamp_core::{Design, Site};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Least-squares solve by SVD, independent of the crate's QR path.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone().svd(true, true).solve(b, 1e-14).expect("svd solve")
}

/// Penalized intercept fit with kernel weights `w`:
/// minimizes `Σ w²(y - μ)² + λ μ²` as an augmented least-squares problem,
/// with `σ̂²` from an unpenalized first solve and `λ = σ̂² / τ²`.
/// Returns `(μ̂, σ̂²)`.
pub fn penalized_intercept(w: &[f64], y: &[f64], tau2: f64, floor: f64) -> (f64, f64) {
    let n = w.len();
    let a = DMatrix::from_fn(n, 1, |i, _| w[i]);
    let b = DVector::from_fn(n, |i, _| w[i] * y[i]);
    let mu_tilde = lstsq(&a, &b)[0];
    let sigma2 = if n > 1 {
        let ss: f64 = (0..n).map(|i| (w[i] * (y[i] - mu_tilde)).powi(2)).sum();
        (ss / (n - 1) as f64).max(floor)
    } else {
        floor
    };
    let lambda = sigma2 / tau2;
    let a = DMatrix::from_fn(n + 1, 1, |i, _| if i < n { w[i] } else { lambda.sqrt() });
    let b = DVector::from_fn(n + 1, |i, _| if i < n { w[i] * y[i] } else { 0.0 });
    (lstsq(&a, &b)[0], sigma2)
}

/// Maximizer of `Π_c N(z; μ_c, σ_c²)^{w_c}` over a uniform grid of `points`
/// values spanning the expert means plus a margin.
pub fn density_product_argmax(experts: &[(f64, f64, f64)], points: usize) -> f64 {
    let lo = experts.iter().map(|e| e.0).fold(f64::INFINITY, f64::min) - 0.5;
    let hi = experts.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max) + 0.5;
    let log_density = |z: f64| -> f64 {
        experts
            .iter()
            .map(|&(mu, s2, w)| w * (-0.5 * (z - mu).powi(2) / s2 - 0.5 * s2.ln()))
            .sum()
    };
    let mut best = (lo, f64::NEG_INFINITY);
    for k in 0..points {
        let z = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        let v = log_density(z);
        if v > best.1 {
            best = (z, v);
        }
    }
    best.0
}

/// `∫ (F(v) - 1{y ≤ v})² dv` for the empirical CDF of `draws`, by midpoint
/// quadrature on a grid of spacing `step`.
pub fn crps_by_integration(draws: &[f64], y: f64, step: f64) -> f64 {
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0].min(y) - 1.0;
    let hi = sorted[sorted.len() - 1].max(y) + 1.0;
    let m = sorted.len() as f64;
    let steps = ((hi - lo) / step).ceil() as usize;
    let mut total = 0.0;
    let mut below = 0usize;
    for k in 0..steps {
        let v = lo + (k as f64 + 0.5) * step;
        while below < sorted.len() && sorted[below] <= v {
            below += 1;
        }
        let f = below as f64 / m;
        let ind = if y <= v { 1.0 } else { 0.0 };
        total += (f - ind).powi(2) * step;
    }
    total
}

/// Gaussian CRPS by quadrature of `(Φ(v) - 1{y ≤ v})²`.
pub fn gaussian_crps_by_integration(y: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::standard();
    let step = 1e-4;
    let mut total = 0.0;
    let mut v = -12.0;
    while v < 12.0 {
        let mid = v + 0.5 * step;
        let ind = if y <= mid { 1.0 } else { 0.0 };
        total += (n.cdf(mid) - ind).powi(2) * step;
        v += step;
    }
    total
}

/// Best single split of `x` by exhaustive search with at least `min_leaf`
/// rows on each side: `(threshold, left mean, right mean)`.
pub fn best_stump(x: &[f64], y: &[f64], min_leaf: usize) -> (f64, f64, f64) {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mean = |part: &[usize]| part.iter().map(|&i| y[i]).sum::<f64>() / part.len() as f64;
    let sse = |part: &[usize]| {
        let m = mean(part);
        part.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>()
    };
    let mut best = (f64::NAN, f64::INFINITY, 0.0, 0.0);
    for k in min_leaf..=idx.len() - min_leaf {
        let (l, r) = idx.split_at(k);
        if x[l[l.len() - 1]] == x[r[0]] {
            continue;
        }
        let total = sse(l) + sse(r);
        if total < best.1 {
            best = (0.5 * (x[l[l.len() - 1]] + x[r[0]]), total, mean(l), mean(r));
        }
    }
    (best.0, best.2, best.3)
}

/// Random sites in `[0, side]²`.
pub fn random_sites(n: usize, side: f64, rng: &mut impl Rng) -> Vec<Site> {
    (0..n)
        .map(|_| Site::new_2d(rng.random_range(0.0..side), rng.random_range(0.0..side)))
        .collect()
}

/// Intercept plus `p` standard-normal covariates.
pub fn random_design(n: usize, p: usize, rng: &mut impl Rng) -> Design {
    let names: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect())
        .collect();
    Design::with_intercept(&names, &cols, n).unwrap()
}

/// A smooth field with several bumps, for tests that need spatial signal.
pub fn smooth_field(s: &Site) -> f64 {
    let [x, y] = s.xy();
    (0.6 * x).sin() * 2.0 + (0.4 * y + 1.0).cos() * 1.5 + 0.5 * ((x - 5.0).powi(2) + (y - 5.0).powi(2)).sqrt().sin()
}
