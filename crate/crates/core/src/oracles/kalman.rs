//! Kalman filtering, modified Bryson–Frazier smoothing and exact joint
//! smoothing draws for linear Gaussian systems.
//!
//! Conventions: `s_0 ∼ N(m0, p0)`, `s_{t+1} = A s_t + w_t` with
//! `w_t ∼ N(0, Q)`, `y_t = H s_t + e_t` with `e_t ∼ N(0, R)`. `Q`, `p0` and `R`
//! may be singular as long as every innovation covariance is positive
//! definite.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gauss::{normal, LN_2PI};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianSystem {
    pub a: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub m0: DVector<f64>,
    pub p0: DMatrix<f64>,
}

impl LinearGaussianSystem {
    /// The scalar model `x_{t+1} = a x_t + v`, `y = x + e` with a stationary
    /// start.
    pub fn scalar(a: f64, q: f64, r: f64) -> Self {
        Self {
            a: DMatrix::from_element(1, 1, a),
            q: DMatrix::from_element(1, 1, q),
            h: DMatrix::from_element(1, 1, 1.0),
            r: DMatrix::from_element(1, 1, r),
            m0: DVector::zeros(1),
            p0: DMatrix::from_element(1, 1, q / (1.0 - a * a)),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn obs_dim(&self) -> usize {
        self.h.nrows()
    }
}

/// Forward pass quantities, indexed by time.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub predicted_means: Vec<DVector<f64>>,
    pub predicted_covs: Vec<DMatrix<f64>>,
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covs: Vec<DMatrix<f64>>,
    pub log_likelihood: f64,
    innovations: Vec<DVector<f64>>,
    innovation_chols: Vec<Cholesky<f64, Dyn>>,
    gains: Vec<DMatrix<f64>>,
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

pub fn kalman_filter(sys: &LinearGaussianSystem, y: &[Vec<f64>]) -> Result<FilterOutput> {
    let n = y.len();
    let d = sys.state_dim();
    let p = sys.obs_dim();
    let mut out = FilterOutput {
        predicted_means: Vec::with_capacity(n),
        predicted_covs: Vec::with_capacity(n),
        filtered_means: Vec::with_capacity(n),
        filtered_covs: Vec::with_capacity(n),
        log_likelihood: 0.0,
        innovations: Vec::with_capacity(n),
        innovation_chols: Vec::with_capacity(n),
        gains: Vec::with_capacity(n),
    };
    let mut m = sys.m0.clone();
    let mut cov = sys.p0.clone();
    let ht = sys.h.transpose();
    for (t, yt) in y.iter().enumerate() {
        if yt.len() != p {
            return Err(Error::InvalidArgument(format!("observation {t} has dimension {}, expected {p}", yt.len())));
        }
        if t > 0 {
            m = &sys.a * &m;
            cov = &sys.a * &cov * sys.a.transpose() + &sys.q;
            symmetrize(&mut cov);
        }
        let e = DVector::from_column_slice(yt) - &sys.h * &m;
        let mut s = &sys.h * &cov * &ht + &sys.r;
        symmetrize(&mut s);
        let chol = Cholesky::new(s.clone()).ok_or(Error::Numerical {
            t,
            msg: "innovation covariance is not positive definite".into(),
        })?;
        let sinv_e = chol.solve(&e);
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        out.log_likelihood += -0.5 * (p as f64 * LN_2PI + log_det + e.dot(&sinv_e));
        // K = P Hᵀ S⁻¹, computed through the solve on (H P)ᵀ.
        let gain = chol.solve(&(&sys.h * &cov)).transpose();
        let mf = &m + &gain * &e;
        let mut pf = (DMatrix::identity(d, d) - &gain * &sys.h) * &cov;
        symmetrize(&mut pf);
        if pf.diagonal().iter().any(|v| !v.is_finite() || *v < -1e-9 * (1.0 + cov.diagonal().amax())) {
            return Err(Error::Numerical {
                t,
                msg: "filtered covariance lost positive semi-definiteness".into(),
            });
        }
        out.predicted_means.push(m.clone());
        out.predicted_covs.push(cov.clone());
        out.filtered_means.push(mf.clone());
        out.filtered_covs.push(pf.clone());
        out.innovations.push(e);
        out.innovation_chols.push(chol);
        out.gains.push(gain);
        m = mf;
        cov = pf;
    }
    Ok(out)
}

/// Marginal smoothing moments.
#[derive(Debug, Clone)]
pub struct SmootherOutput {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    /// `lag_one[t] = Cov(s_{t+1}, s_t | y_{1:T})` for `t < T − 1`.
    pub lag_one: Vec<DMatrix<f64>>,
    pub log_likelihood: f64,
}

impl SmootherOutput {
    /// Posterior mean of the first state coordinate at every time.
    pub fn first_coordinate_means(&self) -> Vec<f64> {
        self.means.iter().map(|m| m[0]).collect()
    }
}

/// Modified Bryson–Frazier smoother: a backward adjoint recursion on the
/// filter's innovations, free of any covariance inversion.
pub fn kalman_smoother(sys: &LinearGaussianSystem, y: &[Vec<f64>]) -> Result<SmootherOutput> {
    let f = kalman_filter(sys, y)?;
    let n = y.len();
    let d = sys.state_dim();
    let ht = sys.h.transpose();
    let at = sys.a.transpose();
    let mut means = vec![DVector::zeros(d); n];
    let mut covs = vec![DMatrix::zeros(d, d); n];
    let mut lag_one = vec![DMatrix::zeros(d, d); n.saturating_sub(1)];
    // Adjoints after the measurement at t: λ̃_t, Λ̃_t.
    let mut lam = DVector::zeros(d);
    let mut big = DMatrix::zeros(d, d);
    for t in (0..n).rev() {
        let (lam_next, big_next) = if t + 1 < n {
            (&at * &lam, &at * &big * &sys.a)
        } else {
            (DVector::zeros(d), DMatrix::zeros(d, d))
        };
        let chol = &f.innovation_chols[t];
        let l = DMatrix::identity(d, d) - &f.gains[t] * &sys.h;
        let lt = l.transpose();
        let lam_t = &ht * chol.solve(&f.innovations[t]) + &lt * lam_next;
        let mut big_t = &ht * chol.solve(&sys.h) + &lt * big_next * &l;
        symmetrize(&mut big_t);
        let pp = &f.predicted_covs[t];
        means[t] = &f.predicted_means[t] + pp * &lam_t;
        let mut c = pp - pp * &big_t * pp;
        symmetrize(&mut c);
        if c.diagonal().iter().any(|v| !v.is_finite() || *v < -1e-8 * (1.0 + pp.diagonal().amax())) {
            return Err(Error::Numerical {
                t,
                msg: "smoothed covariance lost positive semi-definiteness".into(),
            });
        }
        covs[t] = c;
        if t + 1 < n {
            // Cov(s_{t+1}, s_t | y) = (I − P_{t+1|t} Λ̃_{t+1}) A P_{t|t}.
            let p_next = &f.predicted_covs[t + 1];
            lag_one[t] = (DMatrix::identity(d, d) - p_next * &big) * &sys.a * &f.filtered_covs[t];
        }
        lam = lam_t;
        big = big_t;
    }
    Ok(SmootherOutput {
        means,
        covs,
        lag_one,
        log_likelihood: f.log_likelihood,
    })
}

/// Scalar model `x_{t+1} = a x_t + N(0, q)`, `y_t = x_t + N(0, r)` with
/// `x_0 ∼ N(m0, p0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarLgss {
    pub a: f64,
    pub q: f64,
    pub r: f64,
    pub m0: f64,
    pub p0: f64,
}

impl ScalarLgss {
    pub fn stationary(a: f64, q: f64, r: f64) -> Self {
        Self {
            a,
            q,
            r,
            m0: 0.0,
            p0: q / (1.0 - a * a),
        }
    }

    /// Filtered means and variances plus the log-likelihood.
    pub fn filter(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let mut means = Vec::with_capacity(y.len());
        let mut vars = Vec::with_capacity(y.len());
        let (mut m, mut p) = (self.m0, self.p0);
        let mut ll = 0.0;
        for (t, &yt) in y.iter().enumerate() {
            if t > 0 {
                m *= self.a;
                p = self.a * self.a * p + self.q;
            }
            let s = p + self.r;
            let e = yt - m;
            ll += -0.5 * (LN_2PI + s.ln() + e * e / s);
            let k = p / s;
            m += k * e;
            p *= 1.0 - k;
            means.push(m);
            vars.push(p);
        }
        (means, vars, ll)
    }

    /// Smoothed means and variances (RTS form, well defined since `q > 0`).
    pub fn smooth(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (ms, ps, _) = self.smooth_with_lag(y);
        (ms, ps)
    }

    /// Smoothed means, variances and `Cov(x_{t+1}, x_t | y)` for `t < T − 1`.
    pub fn smooth_with_lag(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (mf, pf, _) = self.filter(y);
        let n = y.len();
        let mut ms = mf.clone();
        let mut ps = pf.clone();
        let mut lag = vec![0.0; n.saturating_sub(1)];
        for t in (0..n.saturating_sub(1)).rev() {
            let pp = self.a * self.a * pf[t] + self.q;
            let j = pf[t] * self.a / pp;
            ms[t] = mf[t] + j * (ms[t + 1] - self.a * mf[t]);
            ps[t] = pf[t] + j * j * (ps[t + 1] - pp);
            lag[t] = j * ps[t + 1];
        }
        (ms, ps, lag)
    }

    /// Exact draw from `p(x_{1:T} | y_{1:T})` by forward filtering, backward
    /// sampling.
    pub fn ffbs<R: Rng + ?Sized>(&self, y: &[f64], rng: &mut R) -> Vec<f64> {
        let (mf, pf, _) = self.filter(y);
        let n = y.len();
        let mut x = vec![0.0; n];
        if n == 0 {
            return x;
        }
        x[n - 1] = normal(rng, mf[n - 1], pf[n - 1].sqrt());
        for t in (0..n - 1).rev() {
            let pp = self.a * self.a * pf[t] + self.q;
            let j = pf[t] * self.a / pp;
            let mean = mf[t] + j * (x[t + 1] - self.a * mf[t]);
            let var = (pf[t] - j * self.a * pf[t]).max(0.0);
            x[t] = normal(rng, mean, var.sqrt());
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn column(y: &[f64]) -> Vec<Vec<f64>> {
        y.iter().map(|v| vec![*v]).collect()
    }

    #[test]
    fn single_observation_conjugate_mean() {
        // a = 0: the prior of x is N(0, q).
        let sys = LinearGaussianSystem::scalar(0.0, 1.0, 0.5);
        let s = kalman_smoother(&sys, &column(&[1.5])).unwrap();
        assert!((s.means[0][0] - 1.0).abs() < 1e-12);
        assert!((s.covs[0][(0, 0)] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn noise_free_limit_tracks_observations() {
        let sys = LinearGaussianSystem::scalar(0.8, 1.0, 1e-10);
        let y = [0.3, -1.0, 2.0, 0.5];
        let s = kalman_smoother(&sys, &column(&y)).unwrap();
        for (m, v) in s.first_coordinate_means().iter().zip(&y) {
            assert!((m - v).abs() < 1e-4);
        }
    }

    /// Joint covariance of `(s_{1:T}, y_{1:T})` conditioned densely.
    fn dense_posterior(sys: &LinearGaussianSystem, y: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        let n = y.len();
        let d = sys.state_dim();
        let p = sys.obs_dim();
        // s_t = A^t s_0 + Σ_{k<t} A^{t−1−k} w_k, so Cov(s_t, s_u) follows.
        let pow = |k: usize| {
            let mut m = DMatrix::identity(d, d);
            for _ in 0..k {
                m = &sys.a * m;
            }
            m
        };
        let mut css = DMatrix::zeros(n * d, n * d);
        for t in 0..n {
            for u in 0..n {
                let mut c = pow(t) * &sys.p0 * pow(u).transpose();
                for k in 0..t.min(u) {
                    c += pow(t - 1 - k) * &sys.q * pow(u - 1 - k).transpose();
                }
                css.view_mut((t * d, u * d), (d, d)).copy_from(&c);
            }
        }
        let mut hbig = DMatrix::zeros(n * p, n * d);
        let mut rbig = DMatrix::zeros(n * p, n * p);
        for t in 0..n {
            hbig.view_mut((t * p, t * d), (p, d)).copy_from(&sys.h);
            rbig.view_mut((t * p, t * p), (p, p)).copy_from(&sys.r);
        }
        let mean_s = DVector::from_iterator(n * d, (0..n).flat_map(|t| (pow(t) * &sys.m0).iter().copied().collect::<Vec<_>>()));
        let cyy = &hbig * &css * hbig.transpose() + rbig;
        let csy = &css * hbig.transpose();
        let yv = DVector::from_iterator(n * p, y.iter().flatten().copied());
        let inv = cyy.try_inverse().unwrap();
        let mean = &mean_s + &csy * &inv * (yv - &hbig * &mean_s);
        let cov = &css - &csy * inv * csy.transpose();
        (mean, cov)
    }

    #[test]
    fn smoother_matches_dense_conditioning() {
        let mut rng = seeded(4);
        let sys = LinearGaussianSystem {
            a: DMatrix::from_row_slice(2, 2, &[0.7, 0.2, -0.3, 0.5]),
            q: DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]),
            h: DMatrix::from_row_slice(1, 2, &[1.0, -0.5]),
            r: DMatrix::from_element(1, 1, 0.4),
            m0: DVector::from_vec(vec![0.2, -0.1]),
            p0: DMatrix::identity(2, 2),
        };
        let y: Vec<Vec<f64>> = (0..5).map(|_| vec![normal(&mut rng, 0.0, 1.0)]).collect();
        let s = kalman_smoother(&sys, &y).unwrap();
        let (mean, cov) = dense_posterior(&sys, &y);
        for t in 0..5 {
            for i in 0..2 {
                assert!((s.means[t][i] - mean[2 * t + i]).abs() < 1e-8);
                for j in 0..2 {
                    assert!((s.covs[t][(i, j)] - cov[(2 * t + i, 2 * t + j)]).abs() < 1e-8);
                }
            }
        }
        for t in 0..4 {
            for i in 0..2 {
                for j in 0..2 {
                    let want = cov[(2 * (t + 1) + i, 2 * t + j)];
                    assert!((s.lag_one[t][(i, j)] - want).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn log_likelihood_matches_dense_gaussian() {
        let sys = LinearGaussianSystem::scalar(0.8, 1.0, 0.5);
        let y = [0.5, -0.3, 1.2, 0.1];
        let f = kalman_filter(&sys, &column(&y)).unwrap();
        let n = y.len();
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let v = 1.0 / (1.0 - 0.64) * 0.8f64.powi((i as i32 - j as i32).abs());
            v + if i == j { 0.5 } else { 0.0 }
        });
        let yv = DVector::from_column_slice(&y);
        let chol = Cholesky::new(cov).unwrap();
        let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let want = -0.5 * (n as f64 * LN_2PI + log_det + yv.dot(&chol.solve(&yv)));
        assert!((f.log_likelihood - want).abs() < 1e-10);
    }

    #[test]
    fn scalar_and_generic_paths_agree() {
        let (_, y) = crate::models::lgss::Lgss::new(0.8, 1.0, 0.5, vec![]).unwrap().simulate(30, &mut seeded(1));
        let s = kalman_smoother(&LinearGaussianSystem::scalar(0.8, 1.0, 0.5), &column(&y)).unwrap();
        let sc = ScalarLgss::stationary(0.8, 1.0, 0.5);
        let (m, v, lag) = sc.smooth_with_lag(&y);
        let (_, _, ll) = sc.filter(&y);
        assert!((ll - s.log_likelihood).abs() < 1e-10);
        for t in 0..30 {
            assert!((m[t] - s.means[t][0]).abs() < 1e-10);
            assert!((v[t] - s.covs[t][(0, 0)]).abs() < 1e-10);
        }
        for t in 0..29 {
            assert!((lag[t] - s.lag_one[t][(0, 0)]).abs() < 1e-10);
        }
    }

    #[test]
    fn ffbs_draws_match_smoothed_moments() {
        let y = [0.4, -0.8, 1.5, 0.2, -0.1];
        let sc = ScalarLgss::stationary(0.8, 1.0, 0.5);
        let (m, v) = sc.smooth(&y);
        let mut rng = seeded(2);
        let n = 40_000;
        let mut sum = [0.0; 5];
        for _ in 0..n {
            for (s, x) in sum.iter_mut().zip(sc.ffbs(&y, &mut rng)) {
                *s += x;
            }
        }
        for t in 0..5 {
            let se = (v[t] / n as f64).sqrt();
            assert!((sum[t] / n as f64 - m[t]).abs() < 4.0 * se);
        }
    }

    #[test]
    fn non_positive_innovation_is_reported_with_time() {
        let mut sys = LinearGaussianSystem::scalar(0.5, 1.0, 0.5);
        sys.r[(0, 0)] = -10.0;
        let err = kalman_filter(&sys, &column(&[0.0, 1.0])).unwrap_err();
        assert_eq!(err.time_index(), Some(0));
    }
}
