use proptest::prelude::*;
use pvdp_core::accounting::{self, gaussian_sigma, laplace_scale, rho_of, zcdp_to_approx_dp};
use pvdp_core::PrivacyParams;

proptest! {
    #[test]
    fn sigma_meets_rho(k in 1u64..1000, rho in 1e-4f64..10.0) {
        let sigma = gaussian_sigma(k, rho).unwrap();
        let s = accounting::sensitivity_current(k).unwrap();
        prop_assert!((rho_of(sigma, s.l2) / rho - 1.0).abs() < 1e-9);
    }

    #[test]
    fn laplace_scale_meets_epsilon(m in 1u64..10_000, eps in 1e-3f64..10.0) {
        let lambda = laplace_scale(m, eps).unwrap();
        let s = accounting::sensitivity_historical(m).unwrap();
        prop_assert!((s.l1 / lambda - eps).abs() < 1e-9 * eps.max(1.0));
    }

    #[test]
    fn epsilon_monotone_in_rho(a in 1e-4f64..5.0, b in 1e-4f64..5.0, delta in 1e-12f64..1e-2) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(zcdp_to_approx_dp(lo, delta).unwrap() <= zcdp_to_approx_dp(hi, delta).unwrap());
    }
}

#[test]
fn production_parameters() {
    let sigma = gaussian_sigma(10, 0.015).unwrap();
    assert!((sigma - 18.257418583505537).abs() < 1e-12);
    let eps = zcdp_to_approx_dp(0.015, 1e-7).unwrap();
    assert!((eps - 0.99840517542745).abs() < 1e-12);
    let current = PrivacyParams::Current { rho: 0.015, k: 10 }
        .sensitivity()
        .unwrap();
    assert_eq!(current.l1, 10.0);
    assert!((current.l2 - 10f64.sqrt()).abs() < 1e-15);
    assert_eq!(laplace_scale(30, 1.0).unwrap(), 30.0);
    assert_eq!(laplace_scale(300, 1.0).unwrap(), 300.0);
}
