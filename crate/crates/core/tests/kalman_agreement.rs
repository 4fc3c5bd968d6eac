use nalgebra::{Complex, DMatrix, DVector};
use pgas_core::backward::ffbsi_smooth;
use pgas_core::models::degenerate::{random_stable_system, DegenerateCollapsed, DegenerateLgss};
use pgas_core::models::lgss::Lgss;
use pgas_core::oracles::kalman::{kalman_filter, LinearGaussianSystem, ScalarLgss};
use pgas_core::rng::{seeded, stream};
use pgas_core::{smc_sweep, Model, TruncationPolicy};

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (m, s)
}

#[test]
fn filter_mean_matches_kalman() {
    let (_, y) = Lgss::new(0.8, 1.0, 0.5, vec![]).unwrap().simulate(50, &mut seeded(1));
    let m = Lgss::new(0.8, 1.0, 0.5, y.clone()).unwrap();
    let (mf, _, _) = ScalarLgss::stationary(0.8, 1.0, 0.5).filter(&y);
    let est: Vec<f64> = (0..200)
        .map(|r| {
            let ps = smc_sweep(&m, 500, &mut stream(2, r)).unwrap();
            let p = ps.final_probabilities().unwrap();
            p.iter().zip(&ps.particles[49]).map(|(w, x)| w * x).sum()
        })
        .collect();
    let (mean, sd) = mean_sd(&est);
    assert!((mean - mf[49]).abs() < 3.0 * sd / (est.len() as f64).sqrt(), "{mean} vs {}", mf[49]);
}

#[test]
fn ffbsi_mean_matches_smoother() {
    let (_, y) = Lgss::new(0.8, 1.0, 0.5, vec![]).unwrap().simulate(20, &mut seeded(3));
    let m = Lgss::new(0.8, 1.0, 0.5, y.clone()).unwrap();
    let (ms, _) = ScalarLgss::stationary(0.8, 1.0, 0.5).smooth(&y);
    let runs: Vec<Vec<f64>> = (0..100)
        .map(|r| {
            let paths = ffbsi_smooth(&m, 100, 20, TruncationPolicy::Full, &mut stream(4, r)).unwrap();
            (0..20).map(|t| paths.iter().map(|p| p[t]).sum::<f64>() / paths.len() as f64).collect()
        })
        .collect();
    let mut bad = 0;
    for t in 0..20 {
        let col: Vec<f64> = runs.iter().map(|r| r[t]).collect();
        let (mean, sd) = mean_sd(&col);
        if (mean - ms[t]).abs() > 3.0 * sd / (col.len() as f64).sqrt() {
            bad += 1;
        }
    }
    assert!(bad <= 1, "{bad} coordinates outside 3 SE");
}

#[test]
fn decoupled_lgss_posterior_mean() {
    let (ms, _) = ScalarLgss::stationary(0.0, 1.0, 0.5).smooth(&[1.5, 1.5, 1.5]);
    assert!(ms.iter().all(|m| (m - 1.0).abs() < 1e-12));
}

/// Kalman filter on `[x_t; y_t] = [e_1ᵀ; C] s_t + [0; e_t]`.
fn augmented_loglik(sys: &DegenerateLgss, x: &[f64], y: &[Vec<f64>]) -> f64 {
    let full = sys.full_system();
    let d = sys.order();
    let p = sys.outputs();
    let mut h = DMatrix::zeros(p + 1, d);
    h[(0, 0)] = 1.0;
    h.view_mut((1, 0), (p, d)).copy_from(&sys.c);
    let mut r = DMatrix::zeros(p + 1, p + 1);
    r.view_mut((1, 1), (p, p)).copy_from(&full.r);
    let aug = LinearGaussianSystem {
        h,
        r,
        m0: DVector::zeros(d),
        ..full
    };
    let obs: Vec<Vec<f64>> = x.iter().zip(y).map(|(xi, yi)| std::iter::once(*xi).chain(yi.iter().copied()).collect()).collect();
    kalman_filter(&aug, &obs).unwrap().log_likelihood
}

#[test]
fn collapsed_density_matches_full_state_kalman() {
    for (d, p) in [(2, 1), (5, 2), (20, 4)] {
        for seed in 0..20 {
            let sys = random_stable_system(d, p, &mut seeded(1000 + seed)).unwrap();
            let (x, _, y) = sys.simulate(60, &mut seeded(2000 + seed));
            let m = DegenerateCollapsed::new(&sys, y.clone()).unwrap();
            let lhs = m.log_gamma(&x);
            let rhs = augmented_loglik(&sys, &x, &y);
            assert!((lhs - rhs).abs() < 1e-6, "order {d}, seed {seed}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn reference_system_collapse_is_exact() {
    let poles = [Complex::new(-0.65, 0.0), Complex::new(-0.12, 0.0), Complex::new(0.22, 0.10)];
    let sys = DegenerateLgss::from_poles(&poles, 0.1, 0.1, &mut seeded(5)).unwrap();
    let (x, _, y) = sys.simulate(200, &mut seeded(6));
    let m = DegenerateCollapsed::new(&sys, y.clone()).unwrap();
    assert!((m.log_gamma(&x) - augmented_loglik(&sys, &x, &y)).abs() < 1e-8);
}
