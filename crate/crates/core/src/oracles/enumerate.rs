//! Exact kernel matrices of PG, PGAS and PGBS on tiny discrete models.
//!
//! Every random choice of one kernel application (initial draws, ancestor
//! and state draws, the reference's ancestor, the output index or backward
//! path) is integrated out exactly. Free particles are exchangeable, so each
//! step enumerates multisets of their outcomes with multinomial weights
//! instead of ordered tuples.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::kernel::Flavor;
use crate::oracles::toy::DiscreteToyModel;
use crate::par;

/// Upper bound on `|X|^T · (N·|X|·N)^T`, the size of the naive outcome space.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Row-stochastic matrix over trajectories, indexed as
/// [`DiscreteToyModel::encode`].
#[derive(Debug, Clone, PartialEq)]
pub struct ExactKernel {
    pub size: usize,
    data: Vec<f64>,
}

impl ExactKernel {
    pub fn identity(size: usize) -> Self {
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            data[i * size + i] = 1.0;
        }
        Self { size, data }
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.size + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.data[from * self.size..(from + 1) * self.size]
    }

    /// `max_i |Σ_j K_ij − 1|`.
    pub fn row_sum_error(&self) -> f64 {
        (0..self.size)
            .map(|i| {
                let mut s = Neumaier::default();
                self.row(i).iter().for_each(|v| s.add(*v));
                (s.value() - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `μᵀ K`.
    pub fn push_forward(&self, mu: &[f64]) -> Vec<f64> {
        (0..self.size)
            .map(|j| {
                let mut s = Neumaier::default();
                for (i, m) in mu.iter().enumerate() {
                    s.add(m * self.get(i, j));
                }
                s.value()
            })
            .collect()
    }

    /// `‖πᵀ K − πᵀ‖_∞`.
    pub fn invariance_residual(&self, pi: &[f64]) -> f64 {
        max_abs_diff(&self.push_forward(pi), pi)
    }

    /// `max_x TV(K^n(x, ·), π)` for `n = 1..=steps`.
    pub fn tv_decay(&self, pi: &[f64], steps: usize) -> Vec<f64> {
        let mut rows: Vec<Vec<f64>> = (0..self.size).map(|i| self.row(i).to_vec()).collect();
        let mut out = Vec::with_capacity(steps);
        for step in 0..steps {
            if step > 0 {
                rows = rows.iter().map(|r| self.push_forward(r)).collect();
            }
            let worst = rows
                .iter()
                .map(|r| 0.5 * r.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
                .fold(0.0, f64::max);
            out.push(worst);
        }
        out
    }

    /// Probability under `x' ∼ π`, `x* ∼ K(x', ·)` that coordinate `t` is
    /// unchanged.
    pub fn stay_probability(&self, toy: &DiscreteToyModel, pi: &[f64], t: usize) -> f64 {
        let mut s = Neumaier::default();
        for i in 0..self.size {
            let xi = toy.decode(i)[t];
            for j in 0..self.size {
                if toy.decode(j)[t] == xi {
                    s.add(pi[i] * self.get(i, j));
                }
            }
        }
        s.value()
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_entry_diff(a: &ExactKernel, b: &ExactKernel) -> f64 {
    max_abs_diff(&a.data, &b.data)
}

/// Geometric rate `ρ` from a least-squares fit of `ln tv_n = c + n ln ρ`,
/// ignoring values at the floating-point floor.
pub fn fit_geometric_rate(tv: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = tv
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 1e-13)
        .map(|(n, v)| ((n + 1) as f64, v.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxy / sxx).exp()
}

/// All multisets of size `m` over weighted categories, with multinomial
/// probabilities. Output lists follow the category order.
fn multisets<K: Clone>(cats: &[(K, f64)], m: usize) -> Vec<(Vec<K>, f64)> {
    fn rec<K: Clone>(cats: &[(K, f64)], start: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<(Vec<K>, f64)>) {
        if left == 0 {
            let m = cur.len();
            let mut p = (1..=m).map(|v| v as f64).product::<f64>();
            let mut run = 1;
            for w in 1..=m {
                if w < m && cur[w] == cur[w - 1] {
                    run += 1;
                } else {
                    p /= (1..=run).map(|v| v as f64).product::<f64>();
                    run = 1;
                }
            }
            for &c in cur.iter() {
                p *= cats[c].1;
            }
            out.push((cur.iter().map(|&c| cats[c].0.clone()).collect(), p));
            return;
        }
        for c in start..cats.len() {
            cur.push(c);
            rec(cats, c, left - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(cats, 0, m, &mut Vec::with_capacity(m), &mut out);
    out
}

fn naive_atoms(toy: &DiscreteToyModel, n: usize) -> u128 {
    let x = toy.states as u128;
    let t = toy.horizon as u32;
    x.saturating_pow(t).saturating_mul((n as u128 * x * n as u128).saturating_pow(t))
}

/// Exact kernel of `flavor` with `n` particles.
pub fn enumerate_kernel(toy: &DiscreteToyModel, flavor: Flavor, n: usize) -> Result<ExactKernel> {
    if n == 0 {
        return Err(Error::InvalidArgument("particle count must be at least 1".into()));
    }
    let atoms = naive_atoms(toy, n);
    if atoms > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            atoms,
            limit: ENUMERATION_LIMIT,
        });
    }
    let size = toy.num_paths();
    let rows = par::par_map(size, |i| {
        let reference = toy.decode(i);
        match flavor {
            Flavor::Pg => lineage_row(toy, &reference, n, false),
            Flavor::Pgas => lineage_row(toy, &reference, n, true),
            Flavor::Pgbs => backward_row(toy, &reference, n),
        }
    });
    Ok(ExactKernel {
        size,
        data: rows.concat(),
    })
}

type Path = Vec<usize>;

fn path_weight(toy: &DiscreteToyModel, path: &[usize]) -> f64 {
    let t = path.len() - 1;
    toy.weight(t, t.checked_sub(1).map(|s| path[s]), path[t])
}

/// Row for PG (`ancestor_sampling = false`) or PGAS. The DP state is the
/// multiset of free particle lineages plus the reference lineage.
fn lineage_row(toy: &DiscreteToyModel, reference: &[usize], n: usize, ancestor_sampling: bool) -> Vec<f64> {
    let mut states: BTreeMap<(Vec<Path>, Path), Neumaier> = BTreeMap::new();
    let init: Vec<(Path, f64)> = (0..toy.states).map(|x| (vec![x], toy.proposal_initial[x])).collect();
    for (free, p) in multisets(&init, n - 1) {
        states.entry((free, vec![reference[0]])).or_default().add(p);
    }
    for t in 1..toy.horizon {
        let mut next: BTreeMap<(Vec<Path>, Path), Neumaier> = BTreeMap::new();
        for ((free, rpath), prob) in &states {
            let prob = prob.value();
            let all: Vec<&Path> = free.iter().chain(std::iter::once(rpath)).collect();
            let w: Vec<f64> = all.iter().map(|p| path_weight(toy, p)).collect();
            let total: f64 = w.iter().sum();
            let mut ext: BTreeMap<Path, Neumaier> = BTreeMap::new();
            for (p, wi) in all.iter().zip(&w) {
                let last = p[t - 1];
                for x in 0..toy.states {
                    let mut np = (*p).clone();
                    np.push(x);
                    ext.entry(np).or_default().add(wi / total * toy.proposal[last][x]);
                }
            }
            let ext: Vec<(Path, f64)> = ext.into_iter().map(|(k, v)| (k, v.value())).collect();
            let mut ref_ext: BTreeMap<Path, Neumaier> = BTreeMap::new();
            if ancestor_sampling {
                let aw: Vec<f64> = all
                    .iter()
                    .zip(&w)
                    .map(|(p, wi)| wi * toy.transition[p[t - 1]][reference[t]])
                    .collect();
                let at: f64 = aw.iter().sum();
                for (p, a) in all.iter().zip(&aw) {
                    let mut np = (*p).clone();
                    np.push(reference[t]);
                    ref_ext.entry(np).or_default().add(a / at);
                }
            } else {
                let mut np = rpath.clone();
                np.push(reference[t]);
                ref_ext.entry(np).or_default().add(1.0);
            }
            for (ms, pm) in multisets(&ext, n - 1) {
                for (rp, pr) in &ref_ext {
                    next.entry((ms.clone(), rp.clone())).or_default().add(prob * pm * pr.value());
                }
            }
        }
        states = next;
    }
    let mut row = vec![Neumaier::default(); toy.num_paths()];
    for ((free, rpath), prob) in &states {
        let prob = prob.value();
        let all: Vec<&Path> = free.iter().chain(std::iter::once(rpath)).collect();
        let w: Vec<f64> = all.iter().map(|p| path_weight(toy, p)).collect();
        let total: f64 = w.iter().sum();
        for (p, wi) in all.iter().zip(&w) {
            row[toy.encode(p)].add(prob * wi / total);
        }
    }
    row.iter().map(Neumaier::value).collect()
}

/// A particle as seen by the backward pass: `(x_{t−1} of its ancestor, x_t)`.
type Desc = (Option<usize>, usize);

/// Row for PGBS. The DP state is the per-time multiset of all particles.
fn backward_row(toy: &DiscreteToyModel, reference: &[usize], n: usize) -> Vec<f64> {
    let weight = |t: usize, d: &Desc| toy.weight(t, d.0, d.1);
    let mut states: BTreeMap<Vec<Vec<Desc>>, Neumaier> = BTreeMap::new();
    let init: Vec<(Desc, f64)> = (0..toy.states).map(|x| ((None, x), toy.proposal_initial[x])).collect();
    for (mut free, p) in multisets(&init, n - 1) {
        free.push((None, reference[0]));
        free.sort();
        states.entry(vec![free]).or_default().add(p);
    }
    for t in 1..toy.horizon {
        let mut next: BTreeMap<Vec<Vec<Desc>>, Neumaier> = BTreeMap::new();
        for (hist, prob) in &states {
            let prob = prob.value();
            let cur = hist.last().expect("non-empty history");
            let w: Vec<f64> = cur.iter().map(|d| weight(t - 1, d)).collect();
            let total: f64 = w.iter().sum();
            let mut ext: BTreeMap<Desc, Neumaier> = BTreeMap::new();
            for (d, wi) in cur.iter().zip(&w) {
                for x in 0..toy.states {
                    ext.entry((Some(d.1), x)).or_default().add(wi / total * toy.proposal[d.1][x]);
                }
            }
            let ext: Vec<(Desc, f64)> = ext.into_iter().map(|(k, v)| (k, v.value())).collect();
            for (mut ms, pm) in multisets(&ext, n - 1) {
                ms.push((Some(reference[t - 1]), reference[t]));
                ms.sort();
                let mut h = hist.clone();
                h.push(ms);
                next.entry(h).or_default().add(prob * pm);
            }
        }
        states = next;
    }
    let mut row = vec![Neumaier::default(); toy.num_paths()];
    let last = toy.horizon - 1;
    for (hist, prob) in &states {
        let prob = prob.value();
        let w: Vec<f64> = hist[last].iter().map(|d| weight(last, d)).collect();
        let total: f64 = w.iter().sum();
        let mut path = vec![0; toy.horizon];
        for (d, wi) in hist[last].iter().zip(&w) {
            path[last] = d.1;
            backward_enumerate(toy, hist, last, prob * wi / total, &mut path, &mut row);
        }
    }
    row.iter().map(Neumaier::value).collect()
}

/// Extends a backward path whose states at `t..` are fixed in `path`.
fn backward_enumerate(
    toy: &DiscreteToyModel,
    hist: &[Vec<Desc>],
    t: usize,
    prob: f64,
    path: &mut Vec<usize>,
    row: &mut [Neumaier],
) {
    if t == 0 {
        row[toy.encode(path)].add(prob);
        return;
    }
    let s = t - 1;
    let bw: Vec<f64> = hist[s]
        .iter()
        .map(|d| toy.weight(s, d.0, d.1) * toy.transition[d.1][path[t]])
        .collect();
    let total: f64 = bw.iter().sum();
    for (d, b) in hist[s].iter().zip(&bw) {
        path[s] = d.1;
        backward_enumerate(toy, hist, s, prob * b / total, path, row);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{apply_kernel, KernelConfig};
    use crate::rng::seeded;

    #[test]
    fn multinomial_masses_sum_to_one() {
        let cats = [(0, 0.2), (1, 0.5), (2, 0.3)];
        for m in 0..4 {
            let total: f64 = multisets(&cats, m).iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
        let two = multisets(&cats, 2);
        let p01 = two.iter().find(|(k, _)| k == &vec![0, 1]).unwrap().1;
        assert!((p01 - 2.0 * 0.2 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn one_particle_gives_identity() {
        let toy = DiscreteToyModel::random(3, 2, false, &mut seeded(1));
        for f in [Flavor::Pg, Flavor::Pgas, Flavor::Pgbs] {
            assert_eq!(enumerate_kernel(&toy, f, 1).unwrap(), ExactKernel::identity(9));
        }
    }

    #[test]
    fn two_state_kernels_are_invariant() {
        let toy = DiscreteToyModel::two_state();
        let pi = toy.posterior();
        for f in [Flavor::Pg, Flavor::Pgas, Flavor::Pgbs] {
            let k = enumerate_kernel(&toy, f, 2).unwrap();
            assert!(k.row_sum_error() < 1e-12);
            assert!(k.invariance_residual(&pi) < 1e-12, "{f:?}");
        }
    }

    #[test]
    fn guard_rejects_large_models() {
        let toy = DiscreteToyModel::random(3, 3, true, &mut seeded(2));
        assert!(matches!(
            enumerate_kernel(&toy, Flavor::Pgas, 6),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn sampler_frequencies_match_enumerated_row() {
        let toy = DiscreteToyModel::random(2, 3, false, &mut seeded(3));
        let reference = toy.decode(5);
        for cfg in [KernelConfig::pgas(3), KernelConfig::pg(3), KernelConfig::pgbs(3)] {
            let exact = enumerate_kernel(&toy, cfg.flavor, 3).unwrap();
            let row = exact.row(5);
            let mut rng = seeded(4);
            let draws = 60_000;
            let mut counts = vec![0usize; toy.num_paths()];
            for _ in 0..draws {
                let (out, _) = apply_kernel(&toy, &reference, &cfg, &mut rng).unwrap();
                counts[toy.encode(&out)] += 1;
            }
            for (c, p) in counts.iter().zip(row) {
                let f = *c as f64 / draws as f64;
                let se = (p * (1.0 - p) / draws as f64).sqrt();
                assert!((f - p).abs() < 5.0 * se + 1e-12, "{:?}: {f} vs {p}", cfg.flavor);
            }
        }
    }

    #[test]
    fn neumaier_recovers_cancelled_terms() {
        let mut s = Neumaier::default();
        for v in [1.0, 1e100, 1.0, -1e100] {
            s.add(v);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn geometric_rate_fit() {
        let tv: Vec<f64> = (1..=10).map(|n| 0.7 * 0.5f64.powi(n)).collect();
        assert!((fit_geometric_rate(&tv) - 0.5).abs() < 1e-12);
    }
}
