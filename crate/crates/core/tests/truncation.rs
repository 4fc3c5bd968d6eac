use pgas_core::models::degenerate::random_stable_system;
use pgas_core::models::synthetic::GeometricDecay;
use pgas_core::models::DegenerateCollapsed;
use pgas_core::nonmarkov::{adaptive_level, kl_divergence, AncestorEvaluator};
use pgas_core::rng::seeded;
use pgas_core::{smc_sweep, Model};

/// KL(P ‖ P̃_ℓ) for every level on the decaying toy.
fn kl_profile(model: &GeometricDecay, n: usize, t: usize) -> Vec<f64> {
    let ps = smc_sweep(model, n, &mut seeded(1)).unwrap();
    let reference = ps.extract_path(0);
    let (lw, cs) = (&ps.log_weights[t - 1], &ps.carries[t - 1]);
    let mut full = AncestorEvaluator::new(model, t, &reference, lw, cs);
    full.advance_to(full.max_level());
    let p = full.distribution().unwrap();
    let mut eval = AncestorEvaluator::new(model, t, &reference, lw, cs);
    (1..=eval.max_level())
        .map(|l| {
            eval.advance_to(l);
            kl_divergence(&p, &eval.distribution().unwrap()).unwrap()
        })
        .collect()
}

#[test]
fn truncation_error_decays_exponentially() {
    let c = 0.5;
    let model = GeometricDecay::new(40, 2.0, c);
    let kl = kl_profile(&model, 20, 1);
    assert_eq!(*kl.last().unwrap(), 0.0);
    // KL below 1e-12 is rounding noise in the normalisation.
    assert!(kl.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{kl:?}");
    let pts: Vec<(f64, f64)> = kl.iter().enumerate().filter(|(_, v)| **v > 1e-12).map(|(l, v)| ((l + 1) as f64, v.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
    assert!(slope <= -0.8 * c, "slope {slope}");
}

#[test]
fn adaptive_levels_stay_far_below_horizon() {
    let sys = random_stable_system(5, 1, &mut seeded(3)).unwrap();
    let (x, _, y) = sys.simulate(200, &mut seeded(4));
    let m = DegenerateCollapsed::new(&sys, y).unwrap();
    let ps = smc_sweep(&m, 10, &mut seeded(5)).unwrap();
    let mut total = 0;
    for t in 1..m.horizon() {
        let mut eval = AncestorEvaluator::new(&m, t, &x, &ps.log_weights[t - 1], &ps.carries[t - 1]);
        let (l, _) = adaptive_level(&mut eval, 0.1, 1e-2).unwrap();
        total += l;
    }
    let mean = total as f64 / 199.0;
    assert!(mean < 50.0, "mean level {mean}");
}
