//! Estimator behavior on flows with known exponents.

mod common;

use common::{lorenz_series, lorenz_system, LORENZ_DT};
use nmchaos::lyapunov::{benettin_max_le, wolf_max_le, BenettinConfig, EmbeddingConfig};

fn benettin(init: &[f64], horizon: f64, delta0: f64) -> f64 {
    let cfg = BenettinConfig {
        horizon,
        delta0,
        ..Default::default()
    };
    benettin_max_le(&lorenz_system(), init, &cfg)
        .unwrap()
        .final_estimate()
        .unwrap()
}

#[test]
fn lorenz_estimators_agree() {
    let (init, x) = lorenz_series();
    let wolf = wolf_max_le(&x, LORENZ_DT, &EmbeddingConfig::default())
        .unwrap()
        .final_estimate()
        .unwrap();
    let ben = benettin(&init, 500.0, 1e-8);
    assert!((0.8..=1.0).contains(&wolf), "wolf {wolf}");
    assert!((0.8..=1.0).contains(&ben), "benettin {ben}");
    assert!((wolf - ben).abs() <= 0.1);
}

#[test]
fn benettin_lorenz_self_convergence() {
    let (init, _) = lorenz_series();
    let (a, b) = (benettin(&init, 500.0, 1e-8), benettin(&init, 1000.0, 1e-8));
    assert!((a - b).abs() < 0.02, "{a} vs {b}");
}

#[test]
fn benettin_lorenz_delta0_robustness() {
    let (init, _) = lorenz_series();
    let reference = benettin(&init, 500.0, 1e-8);
    for d0 in [1e-9, 1e-7, 1e-6, 1e-5] {
        let lam = benettin(&init, 500.0, d0);
        assert!(
            (lam - reference).abs() < 0.05 * reference,
            "delta0 {d0}: {lam} vs {reference}"
        );
    }
}
