//! Regularized linear models: losses, a trust-region Newton solver for the
//! L2 case, and a coordinate-descent solver for the L1 case.
//!
//! The parameter vector is `[w_1 .. w_d, b]` when a bias is present, `w`
//! otherwise. Row `i` contributes `c_i * loss(z_i, y_i)` with
//! `z_i = w·x_i + b + offset_i`.

use serde::{Deserialize, Serialize};

use crate::matrix::{dot, norm, sigmoid, softplus, FeatureMatrix};
use crate::par::{self, Parallelism};
use crate::{Error, Result};

/// Per-example loss with first and second derivative in the margin.
pub trait Loss: Sync {
    fn value(&self, z: f64, y: f64) -> f64;
    fn d1(&self, z: f64, y: f64) -> f64;
    /// Second derivative, or a generalized Hessian where the loss is only
    /// once differentiable.
    fn d2(&self, z: f64, y: f64) -> f64;
}

/// Logistic loss against a soft target `y ∈ [0, 1]`:
/// `y·softplus(−z) + (1 − y)·softplus(z)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Logistic;

impl Loss for Logistic {
    fn value(&self, z: f64, y: f64) -> f64 {
        let mut v = 0.0;
        if y != 0.0 {
            v += y * softplus(-z);
        }
        if y != 1.0 {
            v += (1.0 - y) * softplus(z);
        }
        v
    }

    fn d1(&self, z: f64, y: f64) -> f64 {
        sigmoid(z) - y
    }

    fn d2(&self, z: f64, _y: f64) -> f64 {
        let s = sigmoid(z);
        s * (1.0 - s)
    }
}

/// `max(0, 1 − y·z)²` for `y ∈ {−1, +1}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredHinge;

impl Loss for SquaredHinge {
    fn value(&self, z: f64, y: f64) -> f64 {
        let m = 1.0 - y * z;
        if m > 0.0 {
            m * m
        } else {
            0.0
        }
    }

    fn d1(&self, z: f64, y: f64) -> f64 {
        let m = 1.0 - y * z;
        if m > 0.0 {
            -2.0 * y * m
        } else {
            0.0
        }
    }

    fn d2(&self, z: f64, y: f64) -> f64 {
        if 1.0 - y * z > 0.0 {
            2.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    SquaredHinge,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    #[default]
    L2,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bias {
    Absent,
    /// Unpenalized.
    Free,
    /// Penalized with `strength/2 · b²`.
    Penalized(f64),
}

impl Bias {
    fn present(self) -> bool {
        !matches!(self, Bias::Absent)
    }

    fn strength(self) -> f64 {
        match self {
            Bias::Penalized(s) => s,
            _ => 0.0,
        }
    }
}

/// A weighted, offset linear loss with an L2 term `l2/2 · ||w||²`.
pub struct Problem<'a, L: Loss> {
    pub x: &'a FeatureMatrix,
    pub y: &'a [f64],
    pub sample_weight: Option<&'a [f64]>,
    pub offset: Option<&'a [f64]>,
    pub loss: L,
    pub l2: f64,
    pub bias: Bias,
    pub par: Parallelism,
}

impl<'a, L: Loss> Problem<'a, L> {
    pub fn new(x: &'a FeatureMatrix, y: &'a [f64], loss: L, l2: f64, bias: Bias) -> Self {
        Self {
            x,
            y,
            sample_weight: None,
            offset: None,
            loss,
            l2,
            bias,
            par: Parallelism::SEQUENTIAL,
        }
    }

    pub fn dim(&self) -> usize {
        self.x.cols() + usize::from(self.bias.present())
    }

    fn features(&self) -> usize {
        self.x.cols()
    }

    fn weight(&self, i: usize) -> f64 {
        self.sample_weight.map_or(1.0, |c| c[i])
    }

    fn margin(&self, theta: &[f64], i: usize) -> f64 {
        let d = self.features();
        let mut z = dot(&theta[..d], self.x.row(i));
        if self.bias.present() {
            z += theta[d];
        }
        if let Some(o) = self.offset {
            z += o[i];
        }
        z
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        let d = self.features();
        let mut p = 0.5 * self.l2 * dot(&theta[..d], &theta[..d]);
        if self.bias.present() {
            p += 0.5 * self.bias.strength() * theta[d] * theta[d];
        }
        p
    }

    /// Data term only (no penalty).
    pub fn data_loss(&self, theta: &[f64]) -> f64 {
        par::sum_chunked_scalar(self.par, self.x.rows(), |r| {
            r.map(|i| {
                let c = self.weight(i);
                if c == 0.0 {
                    0.0
                } else {
                    c * self.loss.value(self.margin(theta, i), self.y[i])
                }
            })
            .sum()
        })
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.penalty(theta) + self.data_loss(theta)
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.features();
        let has_bias = self.bias.present();
        let mut g = par::sum_chunked(self.par, self.x.rows(), self.dim(), |r, buf| {
            for i in r {
                let c = self.weight(i);
                if c == 0.0 {
                    continue;
                }
                let a = c * self.loss.d1(self.margin(theta, i), self.y[i]);
                for (b, x) in buf[..d].iter_mut().zip(self.x.row(i)) {
                    *b += a * x;
                }
                if has_bias {
                    buf[d] += a;
                }
            }
        });
        for j in 0..d {
            g[j] += self.l2 * theta[j];
        }
        if has_bias {
            g[d] += self.bias.strength() * theta[d];
        }
        g
    }

    /// Per-row curvature `c_i · loss''(z_i)` at `theta`.
    pub fn curvature(&self, theta: &[f64]) -> Vec<f64> {
        par::map_range(self.par, self.x.rows(), |i| {
            let c = self.weight(i);
            if c == 0.0 {
                0.0
            } else {
                c * self.loss.d2(self.margin(theta, i), self.y[i])
            }
        })
    }

    /// `H v` for the Hessian whose data part has per-row curvature `curv`.
    /// `extra` adds `extra · v` (damping) on every coordinate.
    pub fn hess_vec(&self, curv: &[f64], v: &[f64], extra: f64) -> Vec<f64> {
        let d = self.features();
        let has_bias = self.bias.present();
        let mut out = par::sum_chunked(self.par, self.x.rows(), self.dim(), |r, buf| {
            for i in r {
                if curv[i] == 0.0 {
                    continue;
                }
                let row = self.x.row(i);
                let mut xv = dot(&v[..d], row);
                if has_bias {
                    xv += v[d];
                }
                let a = curv[i] * xv;
                for (b, x) in buf[..d].iter_mut().zip(row) {
                    *b += a * x;
                }
                if has_bias {
                    buf[d] += a;
                }
            }
        });
        for j in 0..d {
            out[j] += (self.l2 + extra) * v[j];
        }
        if has_bias {
            out[d] += (self.bias.strength() + extra) * v[d];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop when the gradient norm drops to this value.
    pub tol: f64,
    pub max_iter: usize,
    pub max_cg: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 1000,
            max_cg: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub theta: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Steihaug conjugate gradient on the model `g·s + ½ sᵀHs` within radius
/// `delta`. Returns the step and whether it hit the boundary.
fn steihaug<F: Fn(&[f64]) -> Vec<f64>>(hv: &F, g: &[f64], delta: f64, max_cg: usize) -> (Vec<f64>, bool) {
    let n = g.len();
    let mut s = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|x| -x).collect();
    let mut d = r.clone();
    let cg_tol = 0.1 * norm(g);
    let mut rtr = dot(&r, &r);
    for _ in 0..max_cg {
        if rtr.sqrt() <= cg_tol {
            break;
        }
        let hd = hv(&d);
        let dhd = dot(&d, &hd);
        if dhd <= 0.0 {
            let tau = to_boundary(&s, &d, delta);
            axpy(tau, &d, &mut s);
            return (s, true);
        }
        let alpha = rtr / dhd;
        let mut trial = s.clone();
        axpy(alpha, &d, &mut trial);
        if norm(&trial) > delta {
            let tau = to_boundary(&s, &d, delta);
            axpy(tau, &d, &mut s);
            return (s, true);
        }
        s = trial;
        axpy(-alpha, &hd, &mut r);
        let rnew = dot(&r, &r);
        let beta = rnew / rtr;
        for (di, ri) in d.iter_mut().zip(&r) {
            *di = ri + beta * *di;
        }
        rtr = rnew;
    }
    (s, false)
}

/// Positive `tau` with `||s + tau d|| = delta`.
fn to_boundary(s: &[f64], d: &[f64], delta: f64) -> f64 {
    let std = dot(s, d);
    let sts = dot(s, s);
    let dtd = dot(d, d);
    if dtd == 0.0 {
        return 0.0;
    }
    let dsq = delta * delta;
    let rad = (std * std + dtd * (dsq - sts)).max(0.0).sqrt();
    if std >= 0.0 {
        (dsq - sts) / (std + rad)
    } else {
        (rad - std) / dtd
    }
}

/// Trust-region Newton minimization of an L2-regularized problem.
/// Radius updates follow the actual-to-predicted reduction ratio; the
/// conjugate-gradient step is replaced by the Cauchy point whenever the
/// latter achieves a larger model decrease.
pub fn tron<L: Loss>(problem: &Problem<'_, L>, init: &[f64], cfg: &SolverConfig) -> Result<Solution> {
    const ETA0: f64 = 1e-4;
    const ETA1: f64 = 0.25;
    const ETA2: f64 = 0.75;
    const SIGMA1: f64 = 0.25;
    const SIGMA2: f64 = 0.5;
    const SIGMA3: f64 = 4.0;

    assert_eq!(init.len(), problem.dim(), "initial point has wrong dimension");
    let mut w = init.to_vec();
    let mut f = problem.value(&w);
    let mut g = problem.gradient(&w);
    let mut gnorm = norm(&g);
    let mut delta = gnorm;
    let mut curv = problem.curvature(&w);
    let mut iter = 0;

    while gnorm > cfg.tol {
        if iter >= cfg.max_iter {
            return Err(Error::NonConvergence {
                iterations: iter,
                grad_norm: gnorm,
            });
        }
        let hv = |v: &[f64]| problem.hess_vec(&curv, v, 0.0);
        let (mut s, mut boundary) = steihaug(&hv, &g, delta, cfg.max_cg);

        let model = |s: &[f64], hs: &[f64]| dot(&g, s) + 0.5 * dot(s, hs);
        let mut hs = hv(&s);
        let hg = hv(&g);
        let ghg = dot(&g, &hg);
        let tau = if ghg <= 0.0 {
            1.0
        } else {
            (gnorm.powi(3) / (delta * ghg)).min(1.0)
        };
        let cauchy: Vec<f64> = g.iter().map(|x| -tau * delta / gnorm * x).collect();
        let hc: Vec<f64> = hg.iter().map(|x| -tau * delta / gnorm * x).collect();
        if model(&cauchy, &hc) < model(&s, &hs) {
            s = cauchy;
            hs = hc;
            boundary = tau >= 1.0;
        }

        let prered = -model(&s, &hs);
        let gs = dot(&g, &s);
        let mut w_new = w.clone();
        axpy(1.0, &s, &mut w_new);
        let f_new = problem.value(&w_new);
        let actred = f - f_new;
        let snorm = norm(&s);
        if iter == 0 {
            delta = delta.min(snorm);
        }
        let alpha = if f_new - f - gs <= 0.0 {
            SIGMA3
        } else {
            SIGMA1.max(-0.5 * (gs / (f_new - f - gs)))
        };
        if actred < ETA0 * prered {
            delta = (alpha * snorm).min(SIGMA2 * delta);
        } else if actred < ETA1 * prered {
            delta = (SIGMA1 * delta).max((alpha * snorm).min(SIGMA2 * delta));
        } else if actred < ETA2 * prered {
            delta = (SIGMA1 * delta).max((alpha * snorm).min(SIGMA3 * delta));
        } else if boundary {
            delta *= SIGMA3;
        } else {
            delta = delta.max((alpha * snorm).min(SIGMA3 * delta));
        }
        iter += 1;

        if actred > ETA0 * prered {
            w = w_new;
            f = f_new;
            g = problem.gradient(&w);
            gnorm = norm(&g);
            curv = problem.curvature(&w);
            continue;
        }
        // Rejected step. At the limit of floating-point resolution the
        // predicted and actual reductions both vanish.
        let flat = actred.abs() <= 1e-12 * f.abs().max(1.0) && prered.abs() <= 1e-12 * f.abs().max(1.0);
        if flat || delta < 1e-300 {
            if gnorm <= cfg.tol.sqrt() {
                log::debug!("trust region stalled at gradient norm {gnorm:.3e}; accepting");
                break;
            }
            return Err(Error::NonConvergence {
                iterations: iter,
                grad_norm: gnorm,
            });
        }
    }
    Ok(Solution {
        theta: w,
        value: f,
        iterations: iter,
        grad_norm: gnorm,
    })
}

/// Minimizes `problem + l1 · ||w||₁` (bias never L1-penalized) by cyclic
/// coordinate descent: a one-variable Newton step per coordinate with the
/// soft-threshold rule and a backtracking line search. One pass over all
/// coordinates counts as an iteration; stops when the pseudo-gradient norm
/// reaches `cfg.tol`.
pub fn l1_coordinate_descent<L: Loss>(
    problem: &Problem<'_, L>,
    l1: f64,
    init: &[f64],
    cfg: &SolverConfig,
) -> Result<Solution> {
    let d = problem.features();
    let n = problem.dim();
    assert_eq!(init.len(), n, "initial point has wrong dimension");
    let rows = problem.x.rows();
    let full = |w: &[f64]| problem.value(w) + l1 * w[..d].iter().map(|x| x.abs()).sum::<f64>();
    let mut w = init.to_vec();
    let mut z: Vec<f64> = (0..rows).map(|i| problem.margin(&w, i)).collect();
    let mut iter = 0;
    let mut previous = f64::INFINITY;
    loop {
        let pg = pseudo_gradient(&w, &problem.gradient(&w), l1, d);
        let pnorm = norm(&pg);
        let f = full(&w);
        // A pass that no longer changes the objective has hit the limit of
        // floating-point resolution.
        let stalled = previous - f <= 1e-14 * f.abs().max(1.0);
        previous = f;
        if pnorm <= cfg.tol || iter >= cfg.max_iter || stalled {
            if pnorm > cfg.tol {
                if pnorm > cfg.tol.sqrt() {
                    return Err(Error::NonConvergence {
                        iterations: iter,
                        grad_norm: pnorm,
                    });
                }
                if stalled {
                    log::debug!("coordinate descent stalled after {iter} passes at pseudo-gradient norm {pnorm:.3e}; accepting");
                } else {
                    log::warn!("coordinate descent hit {iter} passes at pseudo-gradient norm {pnorm:.3e}; accepting");
                }
            }
            return Ok(Solution {
                value: f,
                theta: w,
                iterations: iter,
                grad_norm: pnorm,
            });
        }
        iter += 1;

        for j in 0..n {
            let col = |i: usize| if j < d { problem.x.row(i)[j] } else { 1.0 };
            let (l2, lasso) = if j < d { (problem.l2, l1) } else { (problem.bias.strength(), 0.0) };
            let (mut g, mut h) = (l2 * w[j], l2);
            for i in 0..rows {
                let (c, v) = (problem.weight(i), col(i));
                if c == 0.0 || v == 0.0 {
                    continue;
                }
                g += c * problem.loss.d1(z[i], problem.y[i]) * v;
                h += c * problem.loss.d2(z[i], problem.y[i]) * v * v;
            }
            let h = h.max(1e-12);
            let step = if g + lasso <= h * w[j] {
                -(g + lasso) / h
            } else if g - lasso >= h * w[j] {
                -(g - lasso) / h
            } else {
                -w[j]
            };
            if step == 0.0 {
                continue;
            }
            // Change in the objective when w_j moves by t.
            let change = |t: f64| {
                let mut delta = 0.5 * l2 * ((w[j] + t).powi(2) - w[j].powi(2)) + lasso * ((w[j] + t).abs() - w[j].abs());
                for i in 0..rows {
                    let (c, v) = (problem.weight(i), col(i));
                    if c == 0.0 || v == 0.0 {
                        continue;
                    }
                    let y = problem.y[i];
                    delta += c * (problem.loss.value(z[i] + t * v, y) - problem.loss.value(z[i], y));
                }
                delta
            };
            let predicted = (g - l2 * w[j]) * step + 0.5 * l2 * ((w[j] + step).powi(2) - w[j].powi(2))
                + lasso * ((w[j] + step).abs() - w[j].abs());
            let mut beta = 1.0;
            for _ in 0..30 {
                let t = beta * step;
                if change(t) <= 0.01 * beta * predicted.min(0.0) {
                    w[j] += t;
                    for (i, zi) in z.iter_mut().enumerate() {
                        *zi += t * col(i);
                    }
                    break;
                }
                beta *= 0.5;
            }
        }
    }
}

fn pseudo_gradient(w: &[f64], g: &[f64], l1: f64, d: usize) -> Vec<f64> {
    (0..w.len())
        .map(|j| {
            if j >= d {
                g[j]
            } else if w[j] > 0.0 {
                g[j] + l1
            } else if w[j] < 0.0 {
                g[j] - l1
            } else if g[j] + l1 < 0.0 {
                g[j] + l1
            } else if g[j] - l1 > 0.0 {
                g[j] - l1
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn one_dimensional_fixed_point() {
        // single example, x = 1, target 1, λ = 1, no bias: w = 1 − σ(w)
        let x = FeatureMatrix::from_rows(1, &[vec![1.0]]);
        let p = Problem::new(&x, &[1.0], Logistic, 1.0, Bias::Absent);
        let s = tron(&p, &[0.0], &SolverConfig::default()).unwrap();
        let w = s.theta[0];
        assert!((w - (1.0 - sigmoid(w))).abs() <= 1e-6);
        assert!((w - 0.401_058_137_5).abs() < 1e-6);
    }

    #[test]
    fn symmetric_data_gives_zero() {
        let x = FeatureMatrix::from_rows(1, &[vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]]);
        let y = [1.0, 0.0, 0.0, 1.0];
        let p = Problem::new(&x, &y, Logistic, 1.0, Bias::Free);
        let s = tron(&p, &[0.0, 0.0], &SolverConfig::default()).unwrap();
        assert!(s.theta.iter().all(|v| v.abs() < 1e-9));
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (FeatureMatrix, Vec<f64>, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let off = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        (FeatureMatrix::from_rows(d, &rows), y, off)
    }

    #[test]
    fn initialization_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (x, y, off) = random_problem(&mut rng, 40, 5);
        let mut p = Problem::new(&x, &y, Logistic, 0.5, Bias::Free);
        p.offset = Some(&off);
        let a = tron(&p, &[0.0; 6], &SolverConfig::default()).unwrap();
        let b = tron(&p, &[3.0, -2.0, 1.0, 5.0, -4.0, 2.0], &SolverConfig::default()).unwrap();
        assert!((a.value - b.value).abs() < 1e-9);
    }

    #[test]
    fn squared_hinge_separable() {
        let x = FeatureMatrix::from_rows(1, &[vec![2.0], vec![1.0], vec![-1.0], vec![-2.0]]);
        let y = [1.0, 1.0, -1.0, -1.0];
        let p = Problem::new(&x, &y, SquaredHinge, 0.01, Bias::Free);
        let s = tron(&p, &[0.0, 0.0], &SolverConfig::default()).unwrap();
        for i in 0..4 {
            assert!(y[i] * (s.theta[0] * x.row(i)[0] + s.theta[1]) > 0.0);
        }
    }

    #[test]
    fn l1_zeroes_weak_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 200;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|r| if r[0] > 0.0 { 1.0 } else { -1.0 }).collect();
        let x = FeatureMatrix::from_rows(4, &rows);
        let p = Problem::new(&x, &y, SquaredHinge, 0.0, Bias::Free);
        let s = l1_coordinate_descent(&p, 20.0, &[0.0; 5], &SolverConfig::default()).unwrap();
        assert!(s.theta[0] > 0.5);
        assert!(s.theta[1..4].iter().filter(|v| **v == 0.0).count() >= 2);
        // optimality of the zeros: |g_j| <= l1
        let g = p.gradient(&s.theta);
        for j in 1..4 {
            if s.theta[j] == 0.0 {
                assert!(g[j].abs() <= 20.0 + 1e-6);
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (x, y, _) = random_problem(&mut rng, 2000, 6);
        let mut p = Problem::new(&x, &y, Logistic, 1.0, Bias::Free);
        let a = tron(&p, &[0.0; 7], &SolverConfig::default()).unwrap();
        p.par = Parallelism::new(4);
        let b = Parallelism::new(4).install(|| tron(&p, &[0.0; 7], &SolverConfig::default()).unwrap());
        assert_eq!(a.theta, b.theta);
    }
}
