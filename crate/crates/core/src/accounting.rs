//! Noise calibration and privacy accounting.
//!
//! Each daily release is accounted as a standalone budget: the protected unit
//! is one device-day (current data, ρ-zCDP) or `m` pageviews in one day
//! (historical data, ε-DP). Nothing here composes budgets across days.
//!
//! For historical data, a user with `c > m` pageviews on a day is still
//! covered, with a loss that grows linearly: group privacy gives ε·⌈c/m⌉.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccountingError {
    #[error("invalid privacy parameters: {0}")]
    InvalidParams(String),
}

fn invalid(msg: impl Into<String>) -> AccountingError {
    AccountingError::InvalidParams(msg.into())
}

fn positive(name: &str, v: f64) -> Result<f64, AccountingError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be finite and positive, got {v}")))
    }
}

fn at_least_one(name: &str, v: u64) -> Result<u64, AccountingError> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(invalid(format!("{name} must be at least 1")))
    }
}

/// Mechanism calibration inputs. Each regime carries exactly its own pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrivacyParams {
    /// ρ-zCDP per device-day, each device contributing to at most `k` cells once.
    Current { rho: f64, k: u64 },
    /// Pure ε-DP protecting `m` pageviews per day.
    Historical { epsilon: f64, m: u64 },
}

impl PrivacyParams {
    pub fn sensitivity(&self) -> Result<Sensitivity, AccountingError> {
        match *self {
            PrivacyParams::Current { k, .. } => sensitivity_current(k),
            PrivacyParams::Historical { m, .. } => sensitivity_historical(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub l1: f64,
    pub l2: f64,
}

/// σ = √(k / 2ρ): the Gaussian scale giving ρ-zCDP at L2 sensitivity √k.
pub fn gaussian_sigma(k: u64, rho: f64) -> Result<f64, AccountingError> {
    let k = at_least_one("k", k)? as f64;
    let rho = positive("rho", rho)?;
    Ok((k / (2.0 * rho)).sqrt())
}

/// λ = m / ε: the Laplace scale giving ε-DP at L1 sensitivity m.
pub fn laplace_scale(m: u64, epsilon: f64) -> Result<f64, AccountingError> {
    let m = at_least_one("m", m)? as f64;
    let epsilon = positive("epsilon", epsilon)?;
    Ok(m / epsilon)
}

/// The zCDP parameter of a Gaussian mechanism: ρ = Δ₂² / (2σ²).
pub fn rho_of(sigma: f64, l2: f64) -> f64 {
    l2 * l2 / (2.0 * sigma * sigma)
}

/// Converts ρ-zCDP to (ε, δ)-DP via ε = ρ + 2√(ρ ln(1/δ)).
pub fn zcdp_to_approx_dp(rho: f64, delta: f64) -> Result<f64, AccountingError> {
    let rho = positive("rho", rho)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt())
}

/// One device touches at most `k` cells, each by at most one.
pub fn sensitivity_current(k: u64) -> Result<Sensitivity, AccountingError> {
    let k = at_least_one("k", k)? as f64;
    Ok(Sensitivity { l1: k, l2: k.sqrt() })
}

/// `m` protected pageviews may all land in one cell, so L2 is no better than L1.
pub fn sensitivity_historical(m: u64) -> Result<Sensitivity, AccountingError> {
    let m = at_least_one("m", m)? as f64;
    Ok(Sensitivity { l1: m, l2: m })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_at_published_parameters() {
        let s = gaussian_sigma(10, 0.015).unwrap();
        assert!((s - 18.257_418_583_505_537).abs() < 1e-12);
        assert_eq!(gaussian_sigma(1, 0.5).unwrap(), 1.0);
        assert_eq!(gaussian_sigma(4, 0.5).unwrap(), 2.0);
    }

    #[test]
    fn laplace_scales() {
        assert_eq!(laplace_scale(30, 1.0).unwrap(), 30.0);
        assert_eq!(laplace_scale(300, 1.0).unwrap(), 300.0);
        assert_eq!(laplace_scale(300, 300.0).unwrap(), 1.0);
    }

    #[test]
    fn zcdp_conversion() {
        // 0.015 + 2·√(0.015·ln 10⁷), evaluated at 40 digits: 0.99840517542745...
        let eps = zcdp_to_approx_dp(0.015, 1e-7).unwrap();
        assert!((eps - 0.998_405_175_427_452_8).abs() < 1e-12);
        assert!(eps < 1.0);
        let eps = zcdp_to_approx_dp(0.5, (-2.0f64).exp()).unwrap();
        assert!((eps - 2.5).abs() < 1e-12);
        assert!(zcdp_to_approx_dp(1e-300, 1e-7).unwrap() < 1e-140);
    }

    #[test]
    fn rejects_invalid() {
        assert!(gaussian_sigma(0, 0.015).is_err());
        assert!(gaussian_sigma(10, 0.0).is_err());
        assert!(gaussian_sigma(10, f64::NAN).is_err());
        assert!(laplace_scale(0, 1.0).is_err());
        assert!(laplace_scale(30, -1.0).is_err());
        assert!(zcdp_to_approx_dp(0.015, 0.0).is_err());
        assert!(zcdp_to_approx_dp(0.015, 1.0).is_err());
        assert!(zcdp_to_approx_dp(-0.1, 0.5).is_err());
        assert!(sensitivity_current(0).is_err());
        assert!(sensitivity_historical(0).is_err());
    }

    #[test]
    fn sensitivities() {
        let s = sensitivity_current(10).unwrap();
        assert_eq!(s.l1, 10.0);
        assert!((s.l2 - 10f64.sqrt()).abs() < 1e-15);
        assert_eq!(sensitivity_current(1).unwrap(), Sensitivity { l1: 1.0, l2: 1.0 });
        assert_eq!(
            sensitivity_historical(30).unwrap(),
            Sensitivity { l1: 30.0, l2: 30.0 }
        );
        assert_eq!(
            PrivacyParams::Current { rho: 0.015, k: 10 }
                .sensitivity()
                .unwrap(),
            sensitivity_current(10).unwrap()
        );
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gaussian_calibration_round_trips(k in 1u64..10_000, rho in 1e-6f64..100.0) {
                let sigma = gaussian_sigma(k, rho).unwrap();
                let back = rho_of(sigma, (k as f64).sqrt());
                prop_assert!((back / rho - 1.0).abs() < 1e-12);
            }

            #[test]
            fn laplace_calibration_round_trips(m in 1u64..100_000, eps in 1e-4f64..100.0) {
                let lambda = laplace_scale(m, eps).unwrap();
                prop_assert!((m as f64 / lambda / eps - 1.0).abs() < 1e-12);
            }

            #[test]
            fn conversion_monotone(rho in 1e-6f64..10.0, d in 1e-12f64..0.5, f in 1.01f64..4.0) {
                let e = zcdp_to_approx_dp(rho, d).unwrap();
                prop_assert!(zcdp_to_approx_dp(rho * f, d).unwrap() > e);
                prop_assert!(zcdp_to_approx_dp(rho, (d * f).min(0.999)).unwrap() < e);
            }
        }
    }
}
