//! Support-vector classification and ε-regression on precomputed kernels.
//!
//! Both problems are reduced to the common dual form
//!
//! ```text
//! min_a  ½ aᵀ Q a + pᵀ a    s.t.  yᵀ a = 0,  0 ≤ a_t ≤ C
//! ```
//!
//! with `Q_st = y_s y_t K_st`, and solved by two-variable SMO using the
//! maximal-violating-pair working set. The stopping rule is the KKT gap
//! `max_{I_up} -y G - min_{I_low} -y G ≤ tol`.
//!
//! * SVC: one variable per sample, `y` the ±1 labels, `p = -1`.
//! * SVR: `2m` variables `(α, α*)`, `y = (+1…, -1…)`, `p = (ε - t, ε + t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qkernel::KernelMatrix;

const TAU: f64 = 1e-12;
const PSD_TOL: f64 = 1e-8;

/// Solver knobs shared by both tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoParams {
    pub c: f64,
    /// KKT gap at which the solver stops.
    pub tol: f64,
    /// Iteration budget in passes over the variables; `None` means `10·m`
    /// passes.
    pub max_passes: Option<usize>,
}

impl SmoParams {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            tol: 1e-3,
            max_passes: None,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::config(format!("C must be positive and finite, got {}", self.c)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::config(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcModel {
    /// `α_i · y_i` per training sample.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    pub c: f64,
    pub tol: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    /// `α_i - α*_i` per training sample.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub epsilon: f64,
    pub support_indices: Vec<usize>,
    pub c: f64,
    pub tol: f64,
    pub iterations: usize,
}

/// Labels in {-1, +1} together with the raw decision values.
#[derive(Debug, Clone, PartialEq)]
pub struct SvcPredictions {
    pub labels: Vec<i8>,
    pub decision: Vec<f64>,
}

struct Problem<'a> {
    kernel: &'a KernelMatrix,
    /// Number of training samples; variables map to samples via `t % m`.
    m: usize,
    y: Vec<f64>,
    p: Vec<f64>,
    c: f64,
}

impl Problem<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    #[inline]
    fn q(&self, s: usize, t: usize) -> f64 {
        self.y[s] * self.y[t] * self.kernel.get(s % self.m, t % self.m)
    }

    fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|s| {
                self.p[s]
                    + (0..self.n())
                        .filter(|&t| alpha[t] != 0.0)
                        .map(|t| self.q(s, t) * alpha[t])
                        .sum::<f64>()
            })
            .collect()
    }

    fn in_up(&self, t: usize, a: f64) -> bool {
        (self.y[t] > 0.0 && a < self.c) || (self.y[t] < 0.0 && a > 0.0)
    }

    fn in_low(&self, t: usize, a: f64) -> bool {
        (self.y[t] > 0.0 && a > 0.0) || (self.y[t] < 0.0 && a < self.c)
    }

    /// Maximal violating pair `(i, j)` and the KKT gap `m(a) - M(a)`.
    fn select(&self, alpha: &[f64], grad: &[f64]) -> (Option<usize>, Option<usize>, f64) {
        let mut gmax = f64::NEG_INFINITY;
        let mut gmin = f64::INFINITY;
        let (mut i, mut j) = (None, None);
        for t in 0..self.n() {
            let v = -self.y[t] * grad[t];
            if self.in_up(t, alpha[t]) && v > gmax {
                gmax = v;
                i = Some(t);
            }
            if self.in_low(t, alpha[t]) && v < gmin {
                gmin = v;
                j = Some(t);
            }
        }
        let gap = if i.is_some() && j.is_some() { gmax - gmin } else { 0.0 };
        (i, j, gap)
    }

    fn objective(&self, alpha: &[f64]) -> f64 {
        let g = self.gradient(alpha);
        // ½ aᵀQa + pᵀa = ½ aᵀ(G + p)
        0.5 * alpha
            .iter()
            .zip(g.iter().zip(&self.p))
            .map(|(a, (g, p))| a * (g + p))
            .sum::<f64>()
    }

    /// Returns `(alpha, gradient, iterations)`; calls `observe` after every update.
    fn solve(&self, tol: f64, max_iter: usize, mut observe: impl FnMut(&[f64])) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let n = self.n();
        let c = self.c;
        let mut alpha = vec![0.0; n];
        let mut grad = self.p.clone();
        let mut iter = 0;
        loop {
            let (i, j, gap) = self.select(&alpha, &grad);
            let (Some(i), Some(j)) = (i, j) else { break };
            if gap <= tol {
                break;
            }
            if iter >= max_iter {
                return Err(Error::Numeric(format!(
                    "SMO did not reach KKT gap {tol} within {max_iter} iterations (gap {gap:.3e})"
                )));
            }
            iter += 1;

            let (old_i, old_j) = (alpha[i], alpha[j]);
            let (qii, qjj, qij) = (self.q(i, i), self.q(j, j), self.q(i, j));
            if self.y[i] != self.y[j] {
                let quad = (qii + qjj + 2.0 * qij).max(TAU);
                let delta = (-grad[i] - grad[j]) / quad;
                let diff = alpha[i] - alpha[j];
                alpha[i] += delta;
                alpha[j] += delta;
                if diff > 0.0 {
                    if alpha[j] < 0.0 {
                        alpha[j] = 0.0;
                        alpha[i] = diff;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = -diff;
                }
                if diff > 0.0 {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = c - diff;
                    }
                } else if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = c + diff;
                }
            } else {
                let quad = (qii + qjj - 2.0 * qij).max(TAU);
                let delta = (grad[i] - grad[j]) / quad;
                let sum = alpha[i] + alpha[j];
                alpha[i] -= delta;
                alpha[j] += delta;
                if sum > c {
                    if alpha[i] > c {
                        alpha[i] = c;
                        alpha[j] = sum - c;
                    }
                } else if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if sum > c {
                    if alpha[j] > c {
                        alpha[j] = c;
                        alpha[i] = sum - c;
                    }
                } else if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }

            let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
            for (t, g) in grad.iter_mut().enumerate() {
                *g += self.q(t, i) * di + self.q(t, j) * dj;
            }
            observe(&alpha);
        }
        Ok((alpha, grad, iter))
    }

    /// Offset `b` of the decision function `Σ coef·K + b`: averaged over free
    /// variables, else the midpoint of the KKT-feasible interval.
    fn bias(&self, alpha: &[f64], grad: &[f64]) -> f64 {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free_sum = 0.0;
        let mut n_free = 0usize;
        for t in 0..self.n() {
            let yg = self.y[t] * grad[t];
            let at_upper = alpha[t] >= self.c;
            let at_lower = alpha[t] <= 0.0;
            if at_upper {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if at_lower {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                free_sum += yg;
            }
        }
        let rho = if n_free > 0 {
            free_sum / n_free as f64
        } else {
            (ub + lb) / 2.0
        };
        -rho
    }

    fn max_iter(&self, params: &SmoParams) -> usize {
        let passes = params.max_passes.unwrap_or(10 * self.m);
        passes.saturating_mul(self.n()).max(1)
    }
}

fn check_training_kernel(k: &KernelMatrix, m: usize) -> Result<()> {
    if !k.is_square() {
        return Err(Error::Shape {
            what: "training kernel columns",
            expected: k.nrows(),
            found: k.ncols(),
        });
    }
    if k.nrows() != m {
        return Err(Error::Shape {
            what: "training kernel size vs targets",
            expected: k.nrows(),
            found: m,
        });
    }
    if m == 0 {
        return Err(Error::config("cannot train on zero samples"));
    }
    let asym = k.max_asymmetry();
    if asym > PSD_TOL {
        return Err(Error::Numeric(format!(
            "training kernel is not symmetric (max |K-Kᵀ| = {asym:.3e})"
        )));
    }
    let min_eig = k.min_eigenvalue()?;
    if min_eig < -PSD_TOL {
        return Err(Error::Numeric(format!(
            "training kernel is not positive semidefinite (min eigenvalue {min_eig:.3e})"
        )));
    }
    Ok(())
}

fn svc_problem<'a>(k: &'a KernelMatrix, y: &[f64], c: f64) -> Result<Problem<'a>> {
    check_training_kernel(k, y.len())?;
    if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(Error::config(format!("SVC labels must be -1 or +1, got {bad}")));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::config("SVC training labels contain a single class"));
    }
    Ok(Problem {
        kernel: k,
        m: y.len(),
        y: y.to_vec(),
        p: vec![-1.0; y.len()],
        c,
    })
}

fn svr_problem<'a>(k: &'a KernelMatrix, t: &[f64], c: f64, epsilon: f64) -> Result<Problem<'a>> {
    check_training_kernel(k, t.len())?;
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::config(format!("epsilon must be non-negative, got {epsilon}")));
    }
    if let Some(bad) = t.iter().find(|v| !v.is_finite()) {
        return Err(Error::config(format!("SVR targets must be finite, got {bad}")));
    }
    let m = t.len();
    let y = (0..2 * m).map(|s| if s < m { 1.0 } else { -1.0 }).collect();
    let p = (0..2 * m)
        .map(|s| if s < m { epsilon - t[s] } else { epsilon + t[s - m] })
        .collect();
    Ok(Problem { kernel: k, m, y, p, c })
}

fn support(coefs: &[f64]) -> Vec<usize> {
    coefs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(i, _)| i)
        .collect()
}

pub fn train_svc(k: &KernelMatrix, y: &[f64], params: &SmoParams) -> Result<SvcModel> {
    train_svc_observed(k, y, params, |_| {})
}

/// As [`train_svc`], calling `observe(α)` after every SMO update.
pub fn train_svc_observed(
    k: &KernelMatrix,
    y: &[f64],
    params: &SmoParams,
    observe: impl FnMut(&[f64]),
) -> Result<SvcModel> {
    params.validate()?;
    let prob = svc_problem(k, y, params.c)?;
    let (alpha, grad, iterations) = prob.solve(params.tol, prob.max_iter(params), observe)?;
    let bias = prob.bias(&alpha, &grad);
    let dual_coefs: Vec<f64> = alpha.iter().zip(y).map(|(a, y)| a * y).collect();
    Ok(SvcModel {
        support_indices: support(&dual_coefs),
        dual_coefs,
        bias,
        c: params.c,
        tol: params.tol,
        iterations,
    })
}

pub fn train_svr(k: &KernelMatrix, t: &[f64], epsilon: f64, params: &SmoParams) -> Result<SvrModel> {
    train_svr_observed(k, t, epsilon, params, |_| {})
}

/// As [`train_svr`]; `observe` receives the stacked `(α, α*)` vector.
pub fn train_svr_observed(
    k: &KernelMatrix,
    t: &[f64],
    epsilon: f64,
    params: &SmoParams,
    observe: impl FnMut(&[f64]),
) -> Result<SvrModel> {
    params.validate()?;
    let prob = svr_problem(k, t, params.c, epsilon)?;
    let (alpha, grad, iterations) = prob.solve(params.tol, prob.max_iter(params), observe)?;
    let bias = prob.bias(&alpha, &grad);
    let m = t.len();
    let dual_coefs: Vec<f64> = (0..m).map(|i| alpha[i] - alpha[i + m]).collect();
    Ok(SvrModel {
        support_indices: support(&dual_coefs),
        dual_coefs,
        bias,
        epsilon,
        c: params.c,
        tol: params.tol,
        iterations,
    })
}

fn decision(coefs: &[f64], bias: f64, k_cross: &KernelMatrix) -> Result<Vec<f64>> {
    if k_cross.ncols() != coefs.len() {
        return Err(Error::Shape {
            what: "cross kernel columns vs training size",
            expected: coefs.len(),
            found: k_cross.ncols(),
        });
    }
    Ok((0..k_cross.nrows())
        .map(|i| {
            coefs
                .iter()
                .enumerate()
                .map(|(j, c)| c * k_cross.get(i, j))
                .sum::<f64>()
                + bias
        })
        .collect())
}

/// Decision values and labels; an exact zero decision maps to `+1`.
pub fn predict_svc(model: &SvcModel, k_cross: &KernelMatrix) -> Result<SvcPredictions> {
    let decision = decision(&model.dual_coefs, model.bias, k_cross)?;
    let labels = decision.iter().map(|&d| if d >= 0.0 { 1 } else { -1 }).collect();
    Ok(SvcPredictions { labels, decision })
}

pub fn predict_svr(model: &SvrModel, k_cross: &KernelMatrix) -> Result<Vec<f64>> {
    decision(&model.dual_coefs, model.bias, k_cross)
}

fn violation(prob: &Problem<'_>, alpha: &[f64]) -> f64 {
    let grad = prob.gradient(alpha);
    let (_, _, gap) = prob.select(alpha, &grad);
    let box_viol = alpha.iter().map(|&a| (-a).max(a - prob.c).max(0.0)).fold(0.0, f64::max);
    let eq_viol: f64 = alpha.iter().zip(&prob.y).map(|(a, y)| a * y).sum::<f64>().abs();
    gap.max(0.0).max(box_viol).max(eq_viol)
}

fn svc_alpha(model: &SvcModel, y: &[f64]) -> Vec<f64> {
    model.dual_coefs.iter().zip(y).map(|(c, y)| c * y).collect()
}

fn svr_alpha(model: &SvrModel) -> Vec<f64> {
    let pos = model.dual_coefs.iter().map(|d| d.max(0.0));
    let neg = model.dual_coefs.iter().map(|d| (-d).max(0.0));
    pos.chain(neg).collect()
}

impl SvcModel {
    /// Largest KKT violation (gap, box or equality) of the stored duals.
    pub fn kkt_report(&self, k: &KernelMatrix, y: &[f64]) -> Result<f64> {
        let prob = svc_problem(k, y, self.c)?;
        Ok(violation(&prob, &svc_alpha(self, y)))
    }

    /// `Σα - ½ ΣΣ α_i α_j y_i y_j K_ij`.
    pub fn dual_objective(&self, k: &KernelMatrix, y: &[f64]) -> Result<f64> {
        let prob = svc_problem(k, y, self.c)?;
        Ok(-prob.objective(&svc_alpha(self, y)))
    }
}

impl SvrModel {
    pub fn kkt_report(&self, k: &KernelMatrix, t: &[f64]) -> Result<f64> {
        let prob = svr_problem(k, t, self.c, self.epsilon)?;
        Ok(violation(&prob, &svr_alpha(self)))
    }

    /// `-½ ΣΣ d_i d_j K_ij - ε Σ|d_i| + Σ t_i d_i` with `d = α - α*`.
    pub fn dual_objective(&self, k: &KernelMatrix, t: &[f64]) -> Result<f64> {
        let prob = svr_problem(k, t, self.c, self.epsilon)?;
        Ok(-prob.objective(&svr_alpha(self)))
    }
}
