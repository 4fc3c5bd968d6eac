//! Degenerate linear Gaussian systems and their collapse to a non-Markovian
//! model over the noise-driven coordinate.
//!
//! The full state is `s_t = (x_t, z_t)` with `x_t` scalar:
//!
//! ```text
//! s_{t+1} = A s_t + (v_t, 0),   v_t ∼ N(0, q)
//! y_t     = C s_t + e_t,        e_t ∼ N(0, r I)
//! ```
//!
//! Since `z_t` is a deterministic function of `x_{1:t}`, the collapsed model
//! keeps only `x_t` as latent state and rebuilds `z_t` through
//! `z_{t+1} = A21 x_t + A22 z_t` starting from `z_1 = 0`, with `x_1 ∼ N(0, q)`.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gauss::{log_normal, normal, std_normal, LN_2PI};
use crate::model::{MarkovOrder, Model};
use crate::oracles::kalman::LinearGaussianSystem;

/// Largest supported state dimension (a fixed stack buffer is used per step).
pub const MAX_ORDER: usize = 64;

#[derive(Debug, Clone)]
pub struct DegenerateLgss {
    /// Full `d × d` transition matrix; `A11 = a[(0, 0)]`.
    pub a: DMatrix<f64>,
    /// `p × d` output matrix.
    pub c: DMatrix<f64>,
    /// Process noise variance on `x`.
    pub q: f64,
    /// Measurement noise variance per output.
    pub r: f64,
}

impl DegenerateLgss {
    pub fn new(a: DMatrix<f64>, c: DMatrix<f64>, q: f64, r: f64) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d || !(2..=MAX_ORDER).contains(&d) {
            return Err(Error::InvalidArgument(format!(
                "transition matrix must be square with order in 2..={MAX_ORDER}, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if c.ncols() != d || c.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "output matrix must be p x {d} with p >= 1, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if !(q > 0.0 && r > 0.0) {
            return Err(Error::InvalidArgument(format!("noise variances must be positive, got Q = {q}, R = {r}")));
        }
        let sys = Self { a, c, q, r };
        let rho = sys.spectral_radius();
        if !(rho < 1.0) {
            return Err(Error::InvalidArgument(format!("transition matrix is not stable: spectral radius {rho}")));
        }
        Ok(sys)
    }

    /// System with the given poles: a real modal form under a random similarity
    /// transform, and a random output row.
    ///
    /// Complex poles must be listed once per conjugate pair (positive imaginary
    /// part).
    pub fn from_poles<R: Rng + ?Sized>(poles: &[Complex<f64>], q: f64, r: f64, rng: &mut R) -> Result<Self> {
        let d: usize = poles.iter().map(|p| if p.im == 0.0 { 1 } else { 2 }).sum();
        let mut modal = DMatrix::zeros(d, d);
        let mut k = 0;
        for p in poles {
            if p.im == 0.0 {
                modal[(k, k)] = p.re;
                k += 1;
            } else {
                modal[(k, k)] = p.re;
                modal[(k, k + 1)] = p.im;
                modal[(k + 1, k)] = -p.im;
                modal[(k + 1, k + 1)] = p.re;
                k += 2;
            }
        }
        let (s, s_inv) = loop {
            let s = DMatrix::from_fn(d, d, |_, _| std_normal(rng));
            if let Some(inv) = s.clone().try_inverse() {
                // Keep the realization reasonably conditioned.
                let cond = s.norm() * inv.norm();
                if cond < 1e3 {
                    break (s, inv);
                }
            }
        };
        let a = &s * modal * s_inv;
        let c = DMatrix::from_fn(1, d, |_, _| std_normal(rng));
        Self::new(a, c, q, r)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        spectral_radius(&self.a)
    }

    pub fn a11(&self) -> f64 {
        self.a[(0, 0)]
    }

    pub fn a12(&self) -> DMatrix<f64> {
        self.a.view((0, 1), (1, self.order() - 1)).into_owned()
    }

    pub fn a21(&self) -> DMatrix<f64> {
        self.a.view((1, 0), (self.order() - 1, 1)).into_owned()
    }

    pub fn a22(&self) -> DMatrix<f64> {
        let m = self.order() - 1;
        self.a.view((1, 1), (m, m)).into_owned()
    }

    /// Full-state linear Gaussian form, for the Kalman oracles.
    pub fn full_system(&self) -> LinearGaussianSystem {
        let d = self.order();
        let mut qf = DMatrix::zeros(d, d);
        qf[(0, 0)] = self.q;
        let p = self.outputs();
        LinearGaussianSystem {
            a: self.a.clone(),
            q: qf.clone(),
            h: self.c.clone(),
            r: DMatrix::identity(p, p) * self.r,
            m0: DVector::zeros(d),
            p0: qf,
        }
    }

    /// Draws `(x_{1:T}, s_{1:T}, y_{1:T})`.
    pub fn simulate<R: Rng + ?Sized>(&self, horizon: usize, rng: &mut R) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let d = self.order();
        let mut s = DVector::zeros(d);
        s[0] = normal(rng, 0.0, self.q.sqrt());
        let mut xs = Vec::with_capacity(horizon);
        let mut states = Vec::with_capacity(horizon);
        let mut ys = Vec::with_capacity(horizon);
        for t in 0..horizon {
            if t > 0 {
                s = &self.a * &s;
                s[0] += normal(rng, 0.0, self.q.sqrt());
            }
            let mean = &self.c * &s;
            ys.push(mean.iter().map(|m| normal(rng, *m, self.r.sqrt())).collect());
            xs.push(s[0]);
            states.push(s.iter().copied().collect());
        }
        (xs, states, ys)
    }
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Random stable system of order `d` with `p` outputs.
///
/// `A` has i.i.d. standard normal entries rescaled to a spectral radius drawn
/// uniformly from `[0.5, 0.95]`; `C` is i.i.d. standard normal. Noise
/// variances default to 0.1.
pub fn random_stable_system<R: Rng + ?Sized>(d: usize, p: usize, rng: &mut R) -> Result<DegenerateLgss> {
    if d < 2 || p < 1 {
        return Err(Error::InvalidArgument(format!("need order >= 2 and outputs >= 1, got d = {d}, p = {p}")));
    }
    loop {
        let a = DMatrix::from_fn(d, d, |_, _| std_normal(rng));
        let rho = spectral_radius(&a);
        let target = 0.5 + 0.45 * rng.random::<f64>();
        if rho < 1e-8 {
            continue;
        }
        let a = a * (target / rho);
        let c = DMatrix::from_fn(p, d, |_, _| std_normal(rng));
        if let Ok(sys) = DegenerateLgss::new(a, c, 0.1, 0.1) {
            return Ok(sys);
        }
    }
}

/// The collapsed non-Markovian model over `x_{1:T}` with a bootstrap proposal.
///
/// The carry is the full state `s_t` reconstructed along the path.
#[derive(Debug, Clone)]
pub struct DegenerateCollapsed {
    d: usize,
    p: usize,
    a: Vec<f64>,
    c: Vec<f64>,
    q: f64,
    r: f64,
    y: Vec<Vec<f64>>,
}

impl DegenerateCollapsed {
    pub fn new(sys: &DegenerateLgss, y: Vec<Vec<f64>>) -> Result<Self> {
        let d = sys.order();
        let p = sys.outputs();
        if let Some(bad) = y.iter().position(|row| row.len() != p) {
            return Err(Error::InvalidArgument(format!("observation {bad} has wrong dimension (expected {p})")));
        }
        let a = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| sys.a[(i, j)]).collect();
        let c = (0..p).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| sys.c[(i, j)]).collect();
        Ok(Self { d, p, a, c, q: sys.q, r: sys.r, y })
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.y
    }

    /// Mean of `x_t` given the carry at `t − 1`.
    #[inline]
    fn predicted_x(&self, t: usize, carry: &[f64]) -> f64 {
        if t == 0 {
            0.0
        } else {
            self.a[..self.d].iter().zip(carry).map(|(a, s)| a * s).sum()
        }
    }

    /// Replaces the carry with `(x, z_t)`.
    #[inline]
    fn step_state(&self, t: usize, carry: &mut [f64], x: f64) {
        let d = self.d;
        if t == 0 {
            carry.iter_mut().for_each(|v| *v = 0.0);
        } else {
            let mut next = [0.0; MAX_ORDER];
            for (i, out) in next.iter_mut().enumerate().take(d).skip(1) {
                let row = &self.a[i * d..(i + 1) * d];
                *out = row.iter().zip(carry.iter()).map(|(a, s)| a * s).sum();
            }
            carry[1..d].copy_from_slice(&next[1..d]);
        }
        carry[0] = x;
    }

    #[inline]
    fn log_obs(&self, t: usize, state: &[f64]) -> f64 {
        let mut sq = 0.0;
        for (k, yk) in self.y[t].iter().enumerate() {
            let row = &self.c[k * self.d..(k + 1) * self.d];
            let mean: f64 = row.iter().zip(state).map(|(c, s)| c * s).sum();
            let e = yk - mean;
            sq += e * e;
        }
        -0.5 * (self.p as f64 * (LN_2PI + self.r.ln()) + sq / self.r)
    }
}

pub fn degenerate_collapse(sys: &DegenerateLgss, y: Vec<Vec<f64>>) -> Result<DegenerateCollapsed> {
    DegenerateCollapsed::new(sys, y)
}

impl Model for DegenerateCollapsed {
    type State = f64;
    type Carry = Vec<f64>;

    fn horizon(&self) -> usize {
        self.y.len()
    }

    fn markov_order(&self) -> MarkovOrder {
        MarkovOrder::NonMarkov
    }

    fn initial_carry(&self) -> Vec<f64> {
        vec![0.0; self.d]
    }

    fn advance(&self, t: usize, carry: &mut Vec<f64>, x: &f64) -> f64 {
        let prior = log_normal(*x, self.predicted_x(t, carry), self.q);
        self.step_state(t, carry, *x);
        prior + self.log_obs(t, carry)
    }

    fn sample_proposal<R: Rng + ?Sized>(&self, t: usize, carry: &Vec<f64>, rng: &mut R) -> f64 {
        normal(rng, self.predicted_x(t, carry), self.q.sqrt())
    }

    fn log_proposal_density(&self, t: usize, carry: &Vec<f64>, x: &f64) -> f64 {
        log_normal(*x, self.predicted_x(t, carry), self.q)
    }

    fn log_weight_advance(&self, t: usize, carry: &mut Vec<f64>, x: &f64) -> f64 {
        self.step_state(t, carry, *x);
        self.log_obs(t, carry)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn reference_poles() -> Vec<Complex<f64>> {
        vec![
            Complex::new(-0.65, 0.0),
            Complex::new(-0.12, 0.0),
            Complex::new(0.22, 0.10),
        ]
    }

    #[test]
    fn pole_placement_recovers_spectrum() {
        let sys = DegenerateLgss::from_poles(&reference_poles(), 0.1, 0.1, &mut seeded(1)).unwrap();
        assert_eq!(sys.order(), 4);
        assert_eq!(sys.outputs(), 1);
        let mut mods: Vec<f64> = sys.a.complex_eigenvalues().iter().map(|z| z.norm()).collect();
        mods.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want = vec![0.65, 0.12, (0.22f64.powi(2) + 0.01).sqrt(), (0.22f64.powi(2) + 0.01).sqrt()];
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (m, w) in mods.iter().zip(&want) {
            assert!((m - w).abs() < 1e-9, "{mods:?} vs {want:?}");
        }
    }

    #[test]
    fn identity_coupling_reproduces_previous_x() {
        // A21 = 1, A22 = 0: z_{t+1} = x_t.
        let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 1.0, 0.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let sys = DegenerateLgss::new(a, c, 0.1, 0.1).unwrap();
        let m = DegenerateCollapsed::new(&sys, vec![vec![0.0]; 4]).unwrap();
        let xs = [0.3, -1.2, 2.5, 0.7];
        let mut carry = m.initial_carry();
        for (t, x) in xs.iter().enumerate() {
            m.advance(t, &mut carry, x);
            assert_eq!(carry[0], *x);
            if t > 0 {
                assert_eq!(carry[1], xs[t - 1]);
            }
        }
    }

    #[test]
    fn random_systems_are_stable_and_reproducible() {
        for d in [2, 5, 20] {
            for seed in 0..10 {
                let sys = random_stable_system(d, 1, &mut seeded(seed)).unwrap();
                let rho = sys.spectral_radius();
                assert!((0.5 - 1e-9..=0.95 + 1e-9).contains(&rho), "rho {rho}");
                let again = random_stable_system(d, 1, &mut seeded(seed)).unwrap();
                assert_eq!(sys.a, again.a);
                assert_eq!(sys.c, again.c);
            }
        }
        let sys = random_stable_system(2, 1, &mut seeded(0)).unwrap();
        assert_eq!((sys.order(), sys.outputs()), (2, 1));
    }

    #[test]
    fn weight_changes_with_early_history() {
        let sys = DegenerateLgss::from_poles(&reference_poles(), 0.1, 0.1, &mut seeded(2)).unwrap();
        let (_, _, y) = sys.simulate(5, &mut seeded(3));
        let m = DegenerateCollapsed::new(&sys, y).unwrap();
        let w1 = m.log_weight(&[0.1, 0.2, 0.3, 0.4]);
        let w2 = m.log_weight(&[1.1, 0.2, 0.3, 0.4]);
        assert!((w1 - w2).abs() > 1e-9);
    }
}
