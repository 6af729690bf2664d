//! Reference implementations that share no code with the library: dense
//! Kronecker-product circuits, derivative-free SVM dual solvers and central
//! finite differences.

#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn hadamard() -> CMat {
    let s = 1.0 / 2f64.sqrt();
    CMat::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

pub fn ry(theta: f64) -> CMat {
    let (s, co) = (theta / 2.0).sin_cos();
    CMat::from_row_slice(2, 2, &[c(co), c(-s), c(s), c(co)])
}

/// `gate` on qubit `q` of `n`, qubit 0 being the least-significant bit.
pub fn on_qubit(gate: &CMat, q: usize, n: usize) -> CMat {
    let mut m = CMat::identity(1, 1);
    for k in (0..n).rev() {
        let f = if k == q { gate.clone() } else { CMat::identity(2, 2) };
        m = kron(&m, &f);
    }
    m
}

pub fn all_qubits(gate: &CMat, n: usize) -> CMat {
    let mut m = CMat::identity(1, 1);
    for _ in 0..n {
        m = kron(&m, gate);
    }
    m
}

pub fn cx(control: usize, target: usize, n: usize) -> CMat {
    // |0⟩⟨0|_c ⊗ I + |1⟩⟨1|_c ⊗ X_t
    let p0 = CMat::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.0)]);
    let p1 = CMat::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)]);
    let x = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
    on_qubit(&p0, control, n) + on_qubit(&p1, control, n) * on_qubit(&x, target, n)
}

pub fn z_string(support: &[usize], n: usize) -> CMat {
    let mut m = CMat::identity(1 << n, 1 << n);
    for &q in support {
        m *= on_qubit(&pauli_z(), q, n);
    }
    m
}

pub fn pairs(n: usize, pattern: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    match pattern {
        "linear" => (0..n.saturating_sub(1)).for_each(|i| out.push((i, i + 1))),
        "circular" => {
            (0..n.saturating_sub(1)).for_each(|i| out.push((i, i + 1)));
            if n > 2 {
                out.push((n - 1, 0));
            }
        }
        "full" => {
            for i in 0..n {
                for j in i + 1..n {
                    out.push((i, j));
                }
            }
        }
        other => panic!("unknown pattern {other}"),
    }
    out
}

/// `exp(i [Σ x_i Z_i + Σ (π - x_i)(π - x_j) Z_i Z_j])` as a dense matrix.
pub fn encoding_unitary(x: &[f64], pairs: &[(usize, usize)]) -> CMat {
    let n = x.len();
    let dim = 1 << n;
    let mut generator = CMat::zeros(dim, dim);
    for (i, &xi) in x.iter().enumerate() {
        generator += z_string(&[i], n) * c(xi);
    }
    for &(i, j) in pairs {
        generator += z_string(&[i, j], n) * c((PI - x[i]) * (PI - x[j]));
    }
    // The generator is diagonal, so the exponential acts entrywise on it.
    let mut u = CMat::zeros(dim, dim);
    for b in 0..dim {
        assert!(generator
            .row(b)
            .iter()
            .enumerate()
            .all(|(k, v)| k == b || v.norm() == 0.0));
        u[(b, b)] = Complex64::from_polar(1.0, generator[(b, b)].re);
    }
    u
}

pub fn zero_state(n: usize) -> CVec {
    let mut v = CVec::zeros(1 << n);
    v[0] = c(1.0);
    v
}

pub fn feature_state(x: &[f64], reps: usize, pattern: &str) -> CVec {
    let n = x.len();
    let layer = encoding_unitary(x, &pairs(n, pattern)) * all_qubits(&hadamard(), n);
    let mut psi = zero_state(n);
    for _ in 0..reps {
        psi = &layer * psi;
    }
    psi
}

pub fn kernel(x: &[f64], y: &[f64], reps: usize, pattern: &str) -> f64 {
    feature_state(x, reps, pattern)
        .dotc(&feature_state(y, reps, pattern))
        .norm_sqr()
}

pub fn gram(rows: &[Vec<f64>], reps: usize, pattern: &str) -> Vec<Vec<f64>> {
    let states: Vec<CVec> = rows.iter().map(|r| feature_state(r, reps, pattern)).collect();
    states
        .iter()
        .map(|a| states.iter().map(|b| a.dotc(b).norm_sqr()).collect())
        .collect()
}

/// RY layer, then (CX block, RY layer) `reps` times; `theta[l * n + q]`.
pub fn ansatz_unitary(theta: &[f64], n: usize, reps: usize, pattern: &str) -> CMat {
    assert_eq!(theta.len(), n * (reps + 1));
    let ry_layer = |l: usize| {
        let mut m = CMat::identity(1, 1);
        for q in (0..n).rev() {
            m = kron(&m, &ry(theta[l * n + q]));
        }
        m
    };
    let mut ent = CMat::identity(1 << n, 1 << n);
    for (ctl, tgt) in pairs(n, pattern) {
        ent = cx(ctl, tgt, n) * ent;
    }
    let mut u = ry_layer(0);
    for l in 1..=reps {
        u = ry_layer(l) * &ent * u;
    }
    u
}

pub fn expectation(psi: &CVec, obs: &CMat) -> f64 {
    psi.dotc(&(obs * psi)).re
}

/// QNN output with the all-qubit Z observable.
pub fn qnn_forward(x: &[f64], theta: &[f64], reps: usize, pattern: &str) -> f64 {
    let n = x.len();
    let psi = ansatz_unitary(theta, n, reps, pattern) * feature_state(x, reps, pattern);
    let support: Vec<usize> = (0..n).collect();
    expectation(&psi, &z_string(&support, n))
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Vec<f64> {
    let mut p = at.to_vec();
    (0..at.len())
        .map(|i| {
            p[i] = at[i] + h;
            let plus = f(&p);
            p[i] = at[i] - h;
            let minus = f(&p);
            p[i] = at[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Hybrid model written out from scratch. Parameter layout: pre weights
/// (row-major `n_q × n_in`), pre bias, QNN weights, post weight, post bias.
pub struct HybridOracle {
    pub n_in: usize,
    pub n_q: usize,
    pub reps: usize,
    pub pattern: &'static str,
    pub classification: bool,
}

impl HybridOracle {
    pub fn output(&self, p: &[f64], x: &[f64]) -> f64 {
        let (n_in, n_q) = (self.n_in, self.n_q);
        let w1 = &p[..n_q * n_in];
        let b1 = &p[n_q * n_in..n_q * n_in + n_q];
        let theta = &p[n_q * n_in + n_q..p.len() - 2];
        let (w2, b2) = (p[p.len() - 2], p[p.len() - 1]);
        let angles: Vec<f64> = (0..n_q)
            .map(|k| {
                let z: f64 = (0..n_in).map(|j| w1[k * n_in + j] * x[j]).sum::<f64>() + b1[k];
                PI * sigmoid(z)
            })
            .collect();
        w2 * qnn_forward(&angles, theta, self.reps, self.pattern) + b2
    }

    pub fn loss(&self, p: &[f64], xs: &[Vec<f64>], ts: &[f64]) -> f64 {
        let total: f64 = xs
            .iter()
            .zip(ts)
            .map(|(x, &t)| {
                let o = self.output(p, x);
                if self.classification {
                    let s = sigmoid(o);
                    -(t * s.ln() + (1.0 - t) * (1.0 - s).ln())
                } else {
                    (o - t).powi(2)
                }
            })
            .sum();
        total / xs.len() as f64
    }
}

/// `½ aᵀ Q a + pᵀ a` over variables `a`, with `Q_st = y_s y_t K_st`.
pub struct DualQp {
    pub q: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub y: Vec<f64>,
    pub c: f64,
}

impl DualQp {
    pub fn svc(k: &[Vec<f64>], y: &[f64], c: f64) -> Self {
        let m = y.len();
        DualQp {
            q: (0..m)
                .map(|s| (0..m).map(|t| y[s] * y[t] * k[s][t]).collect())
                .collect(),
            p: vec![-1.0; m],
            y: y.to_vec(),
            c,
        }
    }

    /// Variables `(α_1..α_m, α*_1..α*_m)`.
    pub fn svr(k: &[Vec<f64>], t: &[f64], eps: f64, c: f64) -> Self {
        let m = t.len();
        let y: Vec<f64> = (0..2 * m).map(|s| if s < m { 1.0 } else { -1.0 }).collect();
        DualQp {
            q: (0..2 * m)
                .map(|s| (0..2 * m).map(|u| y[s] * y[u] * k[s % m][u % m]).collect())
                .collect(),
            p: (0..2 * m)
                .map(|s| if s < m { eps - t[s] } else { eps + t[s - m] })
                .collect(),
            y,
            c,
        }
    }

    pub fn value(&self, a: &[f64]) -> f64 {
        let quad: f64 = (0..a.len())
            .map(|s| (0..a.len()).map(|t| a[s] * self.q[s][t] * a[t]).sum::<f64>())
            .sum();
        0.5 * quad + self.p.iter().zip(a).map(|(p, a)| p * a).sum::<f64>()
    }

    /// Pattern search along every feasible two-variable direction until the
    /// step falls below `min_step`. Steps that would leave the box are
    /// shortened to land on it.
    pub fn refine(&self, start: Vec<f64>, step0: f64, min_step: f64) -> Vec<f64> {
        let n = start.len();
        let mut a = start;
        let mut fa = self.value(&a);
        let mut step = step0;
        while step > min_step {
            let mut improved = false;
            for s in 0..n {
                for t in s + 1..n {
                    for sign in [1.0, -1.0] {
                        // d_s = sign, d_t = -y_s y_t sign keeps yᵀa fixed.
                        let ds = sign;
                        let dt = -self.y[s] * self.y[t] * sign;
                        let room = |v: f64, d: f64| if d > 0.0 { self.c - v } else { v };
                        let len = step.min(room(a[s], ds)).min(room(a[t], dt));
                        if len <= 0.0 {
                            continue;
                        }
                        let mut cand = a.clone();
                        cand[s] = (cand[s] + ds * len).clamp(0.0, self.c);
                        cand[t] = (cand[t] + dt * len).clamp(0.0, self.c);
                        let fc = self.value(&cand);
                        if fc < fa - 1e-15 {
                            a = cand;
                            fa = fc;
                            improved = true;
                        }
                    }
                }
            }
            if !improved {
                step /= 2.0;
            }
        }
        a
    }
}

/// Brute-force SVC dual: a grid over the first `m - 1` multipliers (the
/// equality fixes the last), then pattern-search refinement of the best
/// few grid points. Returns `α`.
pub fn svc_oracle(k: &[Vec<f64>], y: &[f64], c: f64, grid: usize) -> Vec<f64> {
    let m = y.len();
    let qp = DualQp::svc(k, y, c);
    let mut points: Vec<(f64, Vec<f64>)> = Vec::new();
    let total = grid.pow((m - 1) as u32);
    for idx in 0..total {
        let mut a = vec![0.0; m];
        let mut r = idx;
        for v in a.iter_mut().take(m - 1) {
            *v = c * (r % grid) as f64 / (grid - 1) as f64;
            r /= grid;
        }
        let partial: f64 = (0..m - 1).map(|i| a[i] * y[i]).sum();
        a[m - 1] = -partial * y[m - 1];
        if a[m - 1] < -1e-12 || a[m - 1] > c + 1e-12 {
            continue;
        }
        a[m - 1] = a[m - 1].clamp(0.0, c);
        points.push((qp.value(&a), a));
    }
    best_refined(&qp, points, c / (grid - 1) as f64)
}

/// Brute-force SVR dual over `d = α - α*` with `|d_i| ≤ C` and `Σ d = 0`,
/// refined in the split `(α, α*)` form. Returns `(α, α*)`.
pub fn svr_oracle(k: &[Vec<f64>], t: &[f64], eps: f64, c: f64, grid: usize) -> Vec<f64> {
    let m = t.len();
    let qp = DualQp::svr(k, t, eps, c);
    let mut points: Vec<(f64, Vec<f64>)> = Vec::new();
    let total = grid.pow((m - 1) as u32);
    for idx in 0..total {
        let mut d = vec![0.0; m];
        let mut r = idx;
        for v in d.iter_mut().take(m - 1) {
            *v = -c + 2.0 * c * (r % grid) as f64 / (grid - 1) as f64;
            r /= grid;
        }
        d[m - 1] = -d[..m - 1].iter().sum::<f64>();
        if d[m - 1].abs() > c + 1e-12 {
            continue;
        }
        d[m - 1] = d[m - 1].clamp(-c, c);
        let a: Vec<f64> = d
            .iter()
            .map(|v| v.max(0.0))
            .chain(d.iter().map(|v| (-v).max(0.0)))
            .collect();
        points.push((qp.value(&a), a));
    }
    best_refined(&qp, points, 2.0 * c / (grid - 1) as f64)
}

fn best_refined(qp: &DualQp, mut points: Vec<(f64, Vec<f64>)>, cell: f64) -> Vec<f64> {
    assert!(!points.is_empty(), "grid produced no feasible point");
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points
        .into_iter()
        .take(4)
        .map(|(_, a)| qp.refine(a, cell, 1e-11 * qp.c.max(1.0)))
        .min_by(|a, b| qp.value(a).total_cmp(&qp.value(b)))
        .unwrap()
}

/// Interval of biases minimizing a convex piecewise-linear primal loss,
/// given its breakpoints. `loss` must be that loss.
fn argmin_interval(breaks: &[f64], loss: impl Fn(f64) -> f64, rel_tol: f64) -> (f64, f64) {
    let vals: Vec<f64> = breaks.iter().map(|&b| loss(b)).collect();
    let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = rel_tol * best.abs().max(1.0);
    let hits: Vec<f64> = breaks
        .iter()
        .zip(&vals)
        .filter(|(_, v)| **v <= best + tol)
        .map(|(b, _)| *b)
        .collect();
    let lo = hits.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = hits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Optimal-bias interval of the soft-margin primal for fixed decision
/// values `g_i = Σ_j α_j y_j K_ij`.
pub fn svc_bias_interval(g: &[f64], y: &[f64], rel_tol: f64) -> (f64, f64) {
    let breaks: Vec<f64> = g.iter().zip(y).map(|(g, y)| y - g).collect();
    argmin_interval(
        &breaks,
        |b| g.iter().zip(y).map(|(g, y)| (1.0 - y * (g + b)).max(0.0)).sum(),
        rel_tol,
    )
}

/// Optimal-bias interval of the ε-insensitive primal for fixed `g`.
pub fn svr_bias_interval(g: &[f64], t: &[f64], eps: f64, rel_tol: f64) -> (f64, f64) {
    let breaks: Vec<f64> = g.iter().zip(t).flat_map(|(g, t)| [t - g - eps, t - g + eps]).collect();
    argmin_interval(
        &breaks,
        |b| g.iter().zip(t).map(|(g, t)| ((t - g - b).abs() - eps).max(0.0)).sum(),
        rel_tol,
    )
}
