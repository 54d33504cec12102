//! Exact integer noise: the discrete Gaussian and the two-sided geometric
//! (discrete Laplace) distributions.
//!
//! Sampling follows Canonne, Kamath and Steinke, "The Discrete Gaussian for
//! Differential Privacy" (2020): Bernoulli(exp(-γ)) trials built from uniform
//! integer draws, a geometric sampler built from those, discrete Laplace from
//! the geometric, and the discrete Gaussian by rejection from discrete Laplace.
//! All arithmetic is on `u128` rationals, so no floating point enters the
//! distribution once the scale has been fixed.
//!
//! Scales arrive as `f64` and are converted to a rational by rounding up to
//! the next multiple of 2^-20 (the variance for the Gaussian, λ for the
//! geometric). Rounding up only ever adds noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Largest accepted Gaussian σ; keeps every intermediate inside `u128`.
pub const MAX_SIGMA: f64 = 65_536.0;
/// Largest accepted Laplace-equivalent scale λ.
pub const MAX_LAMBDA: f64 = 4_294_967_296.0;

const SCALE_DENOM_BITS: u32 = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("invalid noise scale {0} (must be finite, positive and at most {1})")]
    InvalidScale(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    DiscreteGaussian,
    TwoSidedGeometric,
}

/// A validated noise distribution. `scale` is σ for the Gaussian and the
/// Laplace-equivalent λ for the geometric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    kind: NoiseKind,
    scale: f64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, scale: f64) -> Result<Self, NoiseError> {
        let max = match kind {
            NoiseKind::DiscreteGaussian => MAX_SIGMA,
            NoiseKind::TwoSidedGeometric => MAX_LAMBDA,
        };
        if !scale.is_finite() || scale <= 0.0 || scale > max {
            return Err(NoiseError::InvalidScale(scale, max));
        }
        Ok(NoiseSpec { kind, scale })
    }

    pub fn discrete_gaussian(sigma: f64) -> Result<Self, NoiseError> {
        Self::new(NoiseKind::DiscreteGaussian, sigma)
    }

    pub fn two_sided_geometric(lambda: f64) -> Result<Self, NoiseError> {
        Self::new(NoiseKind::TwoSidedGeometric, lambda)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sampler(&self) -> Sampler {
        match self.kind {
            NoiseKind::DiscreteGaussian => {
                Sampler::Gaussian(DiscreteGaussian::from_variance(self.scale * self.scale))
            }
            NoiseKind::TwoSidedGeometric => Sampler::Geometric(TwoSidedGeometric::from_lambda(self.scale)),
        }
    }
}

/// Seed plus stream id; the pair fully determines the sample sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Stream id derived from arbitrary bytes (first 8 bytes of SHA-256).
    pub fn stream_id(bytes: &[u8]) -> u64 {
        let digest = Sha256::digest(bytes);
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

/// Seed for replication `index` of a run seeded with `seed`.
pub fn replication_seed(seed: u64, index: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(b"pvdp-replication");
    h.update(seed.to_le_bytes());
    h.update(index.to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

/// Either exact sampler behind a [`NoiseSpec`].
#[derive(Debug, Clone, Copy)]
pub enum Sampler {
    Gaussian(DiscreteGaussian),
    Geometric(TwoSidedGeometric),
}

impl Sampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match self {
            Sampler::Gaussian(g) => g.sample(rng),
            Sampler::Geometric(g) => g.sample(rng),
        }
    }
}

/// Samples z ∈ ℤ with probability proportional to exp(−z²/(2σ²)).
pub fn sample_discrete_gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> Result<i64, NoiseError> {
    Ok(NoiseSpec::discrete_gaussian(sigma)?.sampler().sample(rng))
}

/// Samples z ∈ ℤ with probability proportional to exp(−|z|/λ).
pub fn sample_two_sided_geometric<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<i64, NoiseError> {
    Ok(NoiseSpec::two_sided_geometric(lambda)?.sampler().sample(rng))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Smallest multiple of 2^-20 that is ≥ `x`, as a reduced fraction.
fn rational_upper(x: f64) -> (u128, u128) {
    let den = 1u128 << SCALE_DENOM_BITS;
    let scaled = (x * den as f64).ceil().max(1.0);
    let num = scaled as u128;
    let g = gcd(num, den);
    (num / g, den / g)
}

fn uniform_below<R: Rng + ?Sized>(n: u128, rng: &mut R) -> u128 {
    debug_assert!(n > 0);
    if n <= u64::MAX as u128 {
        rng.random_range(0..n as u64) as u128
    } else {
        rng.random_range(0..n)
    }
}

/// Bernoulli(num/den), num ≤ den.
fn bernoulli<R: Rng + ?Sized>(num: u128, den: u128, rng: &mut R) -> bool {
    uniform_below(den, rng) < num
}

/// Bernoulli(exp(−num/den)) for num ≤ den.
fn bernoulli_exp_unit<R: Rng + ?Sized>(num: u128, den: u128, rng: &mut R) -> bool {
    let mut k: u128 = 1;
    loop {
        // k grows like a Poisson count; overflow needs k beyond 2^17 at worst.
        let d = den.checked_mul(k).expect("bernoulli denominator overflow");
        if bernoulli(num, d, rng) {
            k += 1;
        } else {
            return k % 2 == 1;
        }
    }
}

/// Bernoulli(exp(−num/den)) for any non-negative num/den.
fn bernoulli_exp<R: Rng + ?Sized>(num: u128, den: u128, rng: &mut R) -> bool {
    let whole = num / den;
    let mut i = 0;
    while i < whole {
        if !bernoulli_exp_unit(1, 1, rng) {
            return false;
        }
        i += 1;
    }
    bernoulli_exp_unit(num % den, den, rng)
}

/// Geometric with failure probability exp(−den/num) on {0, 1, ...}, i.e.
/// P(x) ∝ exp(−x·den/num). The scale of the matching Laplace is num/den.
fn geometric_of_scale<R: Rng + ?Sized>(num: u128, den: u128, rng: &mut R) -> u128 {
    let u = loop {
        let u = uniform_below(num, rng);
        if bernoulli_exp(u, num, rng) {
            break u;
        }
    };
    let mut v: u128 = 0;
    while bernoulli_exp_unit(1, 1, rng) {
        v += 1;
    }
    (u + num * v) / den
}

fn discrete_laplace<R: Rng + ?Sized>(num: u128, den: u128, rng: &mut R) -> i128 {
    loop {
        let negative = bernoulli(1, 2, rng);
        let y = geometric_of_scale(num, den, rng) as i128;
        if negative && y == 0 {
            continue;
        }
        return if negative { -y } else { y };
    }
}

/// Two-sided geometric distribution with P(z) ∝ exp(−|z|/λ), λ stored as
/// the exact rational `num/den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoSidedGeometric {
    num: u128,
    den: u128,
}

impl TwoSidedGeometric {
    fn from_lambda(lambda: f64) -> Self {
        let (num, den) = rational_upper(lambda);
        TwoSidedGeometric { num, den }
    }

    /// The λ actually sampled, after rounding to the 2^-20 grid.
    pub fn lambda(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        discrete_laplace(self.num, self.den, rng) as i64
    }
}

/// Discrete Gaussian with P(z) ∝ exp(−z²/(2σ²)), σ² stored as the exact
/// rational `var_num/var_den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscreteGaussian {
    var_num: u128,
    var_den: u128,
    /// floor(σ) + 1, the scale of the discrete Laplace proposal.
    proposal: u128,
}

impl DiscreteGaussian {
    fn from_variance(variance: f64) -> Self {
        let (var_num, var_den) = rational_upper(variance);
        let proposal = (var_num / var_den).isqrt() + 1;
        DiscreteGaussian {
            var_num,
            var_den,
            proposal,
        }
    }

    pub fn variance(&self) -> f64 {
        self.var_num as f64 / self.var_den as f64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let (a, b, t) = (self.var_num, self.var_den, self.proposal);
        // Accept y with probability exp(−(|y| − σ²/t)² / (2σ²))
        //   = exp(−(|y|·b·t − a)² / (2·a·b·t²)).
        let den = 2 * a * b * t * t;
        loop {
            let y = discrete_laplace(t, 1, rng);
            let scaled = (y.unsigned_abs()).checked_mul(b * t).map(|v| v.abs_diff(a));
            // An overflowing numerator means acceptance probability far below
            // exp(−2^60); such proposals are rejected outright.
            let Some(num) = scaled.and_then(|d| d.checked_mul(d)) else {
                continue;
            };
            if bernoulli_exp(num, den, rng) {
                return y as i64;
            }
        }
    }
}

/// Continuous samplers, kept only as reference points in tests.
pub mod reference {
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    pub fn gaussian<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
        Normal::new(0.0, sigma).expect("valid sigma").sample(rng)
    }

    /// Inverse-CDF Laplace.
    pub fn laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.random::<f64>() - 0.5;
        -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
    }
}
