use pgas_core::oracles::enumerate::{enumerate_kernel, fit_geometric_rate, max_entry_diff};
use pgas_core::oracles::toy::DiscreteToyModel;
use pgas_core::rng::seeded;
use pgas_core::Flavor;

const FLAVORS: [Flavor; 3] = [Flavor::Pg, Flavor::Pgas, Flavor::Pgbs];

#[test]
fn every_small_toy_is_left_invariant() {
    for states in 2..=3 {
        for horizon in 1..=3 {
            for (seed, bootstrap) in [(1, true), (2, false)] {
                let toy = DiscreteToyModel::random(states, horizon, bootstrap, &mut seeded(seed * 100 + states as u64));
                let pi = toy.posterior();
                for n in 1..=3 {
                    for f in FLAVORS {
                        let k = enumerate_kernel(&toy, f, n).unwrap();
                        assert!(k.row_sum_error() < 1e-12, "{f:?} |X|={states} T={horizon} N={n}");
                        let res = k.invariance_residual(&pi);
                        assert!(res < 1e-12, "{f:?} |X|={states} T={horizon} N={n}: residual {res:e}");
                    }
                }
            }
        }
    }
}

#[test]
fn backward_and_ancestor_sampling_coincide_under_bootstrap() {
    for seed in 0..4 {
        let toy = DiscreteToyModel::random(2 + (seed as usize % 2), 3, true, &mut seeded(seed));
        for n in 2..=3 {
            let a = enumerate_kernel(&toy, Flavor::Pgas, n).unwrap();
            let b = enumerate_kernel(&toy, Flavor::Pgbs, n).unwrap();
            assert!(max_entry_diff(&a, &b) < 1e-12);
        }
    }
}

#[test]
fn backward_and_ancestor_sampling_differ_under_other_proposals() {
    let toy = DiscreteToyModel::two_state_perturbed();
    let a = enumerate_kernel(&toy, Flavor::Pgas, 2).unwrap();
    let b = enumerate_kernel(&toy, Flavor::Pgbs, 2).unwrap();
    assert!(max_entry_diff(&a, &b) > 1e-6);
}

#[test]
fn plain_particle_gibbs_sticks_more() {
    let toy = DiscreteToyModel::two_state();
    let pi = toy.posterior();
    let pg = enumerate_kernel(&toy, Flavor::Pg, 2).unwrap();
    let pgas = enumerate_kernel(&toy, Flavor::Pgas, 2).unwrap();
    for t in 0..toy.horizon {
        assert!(pg.stay_probability(&toy, &pi, t) > pgas.stay_probability(&toy, &pi, t), "t = {t}");
    }
}

#[test]
fn distance_to_posterior_decays_geometrically() {
    let toy = DiscreteToyModel::random(3, 3, true, &mut seeded(7));
    let pi = toy.posterior();
    for f in FLAVORS {
        let k = enumerate_kernel(&toy, f, 2).unwrap();
        let tv = k.tv_decay(&pi, 12);
        assert!(tv.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        let rate = fit_geometric_rate(&tv);
        assert!(rate < 1.0, "{f:?}: rate {rate}");
    }
}
