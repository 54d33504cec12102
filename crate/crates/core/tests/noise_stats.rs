//! Empirical checks of the exact samplers against reference distributions.

use pvdp_core::groups::group_stream;
use pvdp_core::noise::{reference, NoiseSpec, RngStream, Sampler};
use pvdp_core::{GroupKey, PageRef};
use rand_chacha::ChaCha20Rng;

const N: usize = 1_000_000;

fn draws(sampler: &Sampler, seed: u64, n: usize) -> Vec<i64> {
    let mut rng: ChaCha20Rng = RngStream::new(seed, 0).rng();
    (0..n).map(|_| sampler.sample(&mut rng)).collect()
}

fn gaussian_pmf(sigma: f64, z: i64) -> f64 {
    let w = |x: i64| (-(x as f64).powi(2) / (2.0 * sigma * sigma)).exp();
    let norm: f64 = (-2000..=2000).map(w).sum();
    w(z) / norm
}

fn geometric_pmf(lambda: f64, z: i64) -> f64 {
    let a = (-1.0 / lambda).exp();
    (1.0 - a) / (1.0 + a) * a.powi(z.abs() as i32)
}

/// Each probed mass within 4 standard errors of the true pmf.
fn check_pmf(samples: &[i64], pmf: impl Fn(i64) -> f64, probe: &[i64]) {
    let n = samples.len() as f64;
    for &z in probe {
        let p = pmf(z);
        let hat = samples.iter().filter(|&&s| s == z).count() as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        assert!(
            (hat - p).abs() <= 4.0 * se,
            "z={z}: empirical {hat}, expected {p} (se {se})"
        );
    }
}

fn mean_var(samples: &[i64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = samples.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn small_sigma_gaussian_pmf() {
    for sigma in [0.5, 1.0, 3.0] {
        let s = NoiseSpec::discrete_gaussian(sigma).unwrap().sampler();
        let x = draws(&s, 1, N);
        check_pmf(&x, |z| gaussian_pmf(sigma, z), &[-4, -2, -1, 0, 1, 2, 4]);
    }
}

#[test]
fn small_lambda_geometric_pmf() {
    for lambda in [0.5, 1.0, 3.0] {
        let s = NoiseSpec::two_sided_geometric(lambda).unwrap().sampler();
        let x = draws(&s, 2, N);
        check_pmf(&x, |z| geometric_pmf(lambda, z), &[-4, -2, -1, 0, 1, 2, 4]);
    }
}

#[test]
fn production_scale_moments() {
    // Variance of the discrete Gaussian at the rounded σ² = 333.33265… and
    // of the geometric at λ = 30, both computed to high precision offline.
    let g = NoiseSpec::discrete_gaussian(18.2574).unwrap().sampler();
    let (mean, var) = mean_var(&draws(&g, 3, N));
    assert!(mean.abs() < 0.1, "mean {mean}");
    assert!((var / 333.33265476 - 1.0).abs() < 0.01, "variance {var}");

    let l = NoiseSpec::two_sided_geometric(30.0).unwrap().sampler();
    let (mean, var) = mean_var(&draws(&l, 4, N));
    assert!(mean.abs() < 0.25, "mean {mean}");
    assert!((var / 1799.83334 - 1.0).abs() < 0.015, "variance {var}");
}

#[test]
fn symmetric() {
    let g = NoiseSpec::discrete_gaussian(5.0).unwrap().sampler();
    let x = draws(&g, 5, N);
    let pos = x.iter().filter(|&&v| v > 0).count() as f64;
    let neg = x.iter().filter(|&&v| v < 0).count() as f64;
    let se = (pos + neg).sqrt();
    assert!((pos - neg).abs() < 4.0 * se);
}

#[test]
fn reference_samplers_agree_in_scale() {
    let mut rng = RngStream::new(6, 0).rng();
    let n = 200_000;
    let c: Vec<f64> = (0..n).map(|_| reference::gaussian(18.2574, &mut rng)).collect();
    let var = c.iter().map(|x| x * x).sum::<f64>() / n as f64;
    assert!((var / 333.33 - 1.0).abs() < 0.02);
    let l: Vec<f64> = (0..n).map(|_| reference::laplace(30.0, &mut rng)).collect();
    let var = l.iter().map(|x| x * x).sum::<f64>() / n as f64;
    assert!((var / 1800.0 - 1.0).abs() < 0.03);
}

#[test]
fn group_streams_uncorrelated() {
    let s = NoiseSpec::discrete_gaussian(18.2574).unwrap().sampler();
    let d = chrono::NaiveDate::from_ymd_opt(2023, 4, 2).unwrap();
    let n = 20_000u64;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..n {
        let p = PageRef::new("en.wikipedia", i).unwrap();
        let ka = GroupKey::new(&p, d, "CH".parse().unwrap());
        let kb = GroupKey::new(&p, d, "FR".parse().unwrap());
        a.push(s.sample(&mut group_stream(9, &ka).rng()) as f64);
        b.push(s.sample(&mut group_stream(9, &kb).rng()) as f64);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&a), mean(&b));
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n as f64;
    let sd = |v: &[f64], m: f64| (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    let r = cov / (sd(&a, ma) * sd(&b, mb));
    // 4 standard errors of a null correlation.
    assert!(r.abs() < 4.0 / (n as f64).sqrt(), "correlation {r}");
}

#[test]
fn same_stream_same_draws() {
    let s = NoiseSpec::two_sided_geometric(300.0).unwrap().sampler();
    assert_eq!(draws(&s, 77, 1000), draws(&s, 77, 1000));
    assert_ne!(draws(&s, 77, 1000), draws(&s, 78, 1000));
}
