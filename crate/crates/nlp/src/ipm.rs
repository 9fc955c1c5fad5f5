//! Primal-dual interior-point method for
//!
//! ```text
//!   min f(x)   s.t.  g_l ≤ g(x) ≤ g_u,   x_l ≤ x ≤ x_u
//! ```
//!
//! Inequality rows get a slack, fixed variables are removed, and each iteration
//! solves the regularized KKT system with the sparse LDLᵀ in [`crate::ldl`].
//! Globalization is an ℓ1 exact-penalty merit function with second-order
//! corrections.

use crate::ldl::{Factor, SymCsc, Symbolic};

/// Callbacks describing a smooth NLP. Dense vectors, sparse Jacobian and
/// lower-triangle Hessian in coordinate form with a fixed structure.
pub trait NlpProblem {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// `(x_l, x_u)`; infinite entries mean no bound.
    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>);
    /// `(g_l, g_u)`; equal entries make an equality row.
    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn objective(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn constraints(&self, x: &[f64]) -> Vec<f64>;
    /// `(row, col)` pairs of the constraint Jacobian.
    fn jacobian_structure(&self) -> Vec<(usize, usize)>;
    fn jacobian_values(&self, x: &[f64]) -> Vec<f64>;
    /// `(row, col)` pairs with `row ≥ col` of the Lagrangian Hessian.
    fn hessian_structure(&self) -> Vec<(usize, usize)>;
    /// Values of `∇²(σ f + Σ λ_i g_i)` on [`NlpProblem::hessian_structure`].
    fn hessian_values(&self, x: &[f64], sigma: f64, lambda: &[f64]) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Options {
    /// Scaled optimality tolerance (stationarity, feasibility, complementarity).
    pub tol: f64,
    /// Unscaled constraint violation required at termination.
    pub constr_viol_tol: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    pub bound_push: f64,
    /// Rows and the objective are scaled down so their initial gradients stay below this.
    pub max_gradient: f64,
    pub verbose: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options { tol: 1e-6, constr_viol_tol: 1e-9, max_iter: 1500, mu_init: 0.1, bound_push: 1e-2, max_gradient: 100.0, verbose: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    MaxIterations,
    Breakdown(String),
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub z_lower: Vec<f64>,
    pub z_upper: Vec<f64>,
    pub objective: f64,
    pub status: Status,
    pub iterations: usize,
    /// Unscaled max violation of constraint rows.
    pub constraint_violation: f64,
    /// Scaled stationarity residual.
    pub dual_infeasibility: f64,
}

const NONE: usize = usize::MAX;
const KAPPA_SIGMA: f64 = 1e10;
const KAPPA_D: f64 = 1e-5;
const DELTA_C: f64 = 1e-9;
const ETA: f64 = 1e-4;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const GAMMA_ALPHA: f64 = 0.05;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;

struct Layout {
    n: usize,
    m: usize,
    nx: usize,
    nw: usize,
    free: Vec<usize>,
    col_of: Vec<usize>,
    x_template: Vec<f64>,
    slack_row: Vec<usize>,
    slack_of: Vec<usize>,
    g_lo: Vec<f64>,
    g_hi: Vec<f64>,
    lw: Vec<f64>,
    uw: Vec<f64>,
    lo_idx: Vec<usize>,
    up_idx: Vec<usize>,
    df: f64,
    dc: Vec<f64>,
}

impl Layout {
    fn x(&self, w: &[f64]) -> Vec<f64> {
        let mut x = self.x_template.clone();
        for (k, &i) in self.free.iter().enumerate() {
            x[i] = w[k];
        }
        x
    }

    fn residual(&self, g: &[f64], w: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| match self.slack_of[i] {
                NONE => self.dc[i] * (g[i] - self.g_lo[i]),
                j => self.dc[i] * g[i] - w[self.nx + j],
            })
            .collect()
    }

    fn violation(&self, g: &[f64]) -> f64 {
        (0..self.m).map(|i| (self.g_lo[i] - g[i]).max(g[i] - self.g_hi[i]).max(0.0)).fold(0.0, f64::max)
    }

    fn barrier(&self, f: f64, w: &[f64], mu: f64) -> f64 {
        let mut b = self.df * f;
        for &i in &self.lo_idx {
            b -= mu * (w[i] - self.lw[i]).ln();
            if !self.uw[i].is_finite() {
                b += KAPPA_D * mu * (w[i] - self.lw[i]);
            }
        }
        for &i in &self.up_idx {
            b -= mu * (self.uw[i] - w[i]).ln();
            if !self.lw[i].is_finite() {
                b += KAPPA_D * mu * (self.uw[i] - w[i]);
            }
        }
        b
    }

    /// Gradient of the barrier function with respect to `w`.
    fn barrier_gradient(&self, grad_f: &[f64], w: &[f64], mu: f64) -> Vec<f64> {
        let mut gb = vec![0.0; self.nw];
        for (k, &i) in self.free.iter().enumerate() {
            gb[k] = self.df * grad_f[i];
        }
        for &i in &self.lo_idx {
            gb[i] -= mu / (w[i] - self.lw[i]);
            if !self.uw[i].is_finite() {
                gb[i] += KAPPA_D * mu;
            }
        }
        for &i in &self.up_idx {
            gb[i] += mu / (self.uw[i] - w[i]);
            if !self.lw[i].is_finite() {
                gb[i] -= KAPPA_D * mu;
            }
        }
        gb
    }

    fn fraction_to_boundary(&self, w: &[f64], dw: &[f64], tau: f64) -> f64 {
        let mut a = 1.0f64;
        for &i in &self.lo_idx {
            if dw[i] < 0.0 {
                a = a.min(-tau * (w[i] - self.lw[i]) / dw[i]);
            }
        }
        for &i in &self.up_idx {
            if dw[i] > 0.0 {
                a = a.min(tau * (self.uw[i] - w[i]) / dw[i]);
            }
        }
        a
    }
}

fn push_into(v: f64, lo: f64, hi: f64, push: f64) -> f64 {
    let pl = if hi.is_finite() { (push * lo.abs().max(1.0)).min(push * (hi - lo)) } else { push * lo.abs().max(1.0) };
    let pu = if lo.is_finite() { (push * hi.abs().max(1.0)).min(push * (hi - lo)) } else { push * hi.abs().max(1.0) };
    let mut v = v;
    if lo.is_finite() {
        v = v.max(lo + pl);
    }
    if hi.is_finite() {
        v = v.min(hi - pu);
    }
    v
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn one_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Kkt {
    mat: SymCsc,
    sym: Symbolic,
    hess_slot: Vec<Option<[usize; 2]>>,
    jac_slot: Vec<Option<([usize; 2], usize)>>,
    diag_slot: Vec<[usize; 2]>,
    slack_slot: Vec<[usize; 2]>,
}

impl Kkt {
    fn new(lay: &Layout, hs: &[(usize, usize)], js: &[(usize, usize)]) -> Self {
        let nk = lay.nw + lay.m;
        let mut entries: Vec<(usize, usize)> = (0..nk).map(|i| (i, i)).collect();
        let mut hess_idx = vec![NONE; hs.len()];
        for (k, &(i, j)) in hs.iter().enumerate() {
            let (a, b) = (lay.col_of[i], lay.col_of[j]);
            if a != NONE && b != NONE {
                hess_idx[k] = entries.len();
                entries.push((a.max(b), a.min(b)));
            }
        }
        let mut jac_idx = vec![NONE; js.len()];
        for (k, &(r, c)) in js.iter().enumerate() {
            let a = lay.col_of[c];
            if a != NONE {
                jac_idx[k] = entries.len();
                entries.push((lay.nw + r, a));
            }
        }
        let slack0 = entries.len();
        for (j, &r) in lay.slack_row.iter().enumerate() {
            entries.push((lay.nw + r, lay.nx + j));
        }
        let (mat, map) = SymCsc::from_pattern(nk, &entries);
        let sym = Symbolic::analyze(&mat);
        Kkt {
            sym,
            hess_slot: hess_idx.iter().map(|&k| (k != NONE).then(|| map[k])).collect(),
            jac_slot: jac_idx.iter().zip(js).map(|(&k, &(r, _))| (k != NONE).then(|| (map[k], r))).collect(),
            diag_slot: map[..nk].to_vec(),
            slack_slot: map[slack0..].to_vec(),
            mat,
        }
    }

    /// Fills `[H + diag, Jᵀ; J, −δc I]`; `hess` may be absent.
    fn assemble(&mut self, lay: &Layout, hess: Option<&[f64]>, diag: &[f64], jac: &[f64], delta_c: f64) {
        self.mat.clear();
        if let Some(h) = hess {
            for (s, &v) in self.hess_slot.iter().zip(h) {
                if let Some(s) = s {
                    self.mat.add(*s, v);
                }
            }
        }
        for i in 0..lay.nw {
            self.mat.add(self.diag_slot[i], diag[i]);
        }
        for i in 0..lay.m {
            self.mat.add(self.diag_slot[lay.nw + i], -delta_c);
        }
        for (s, &v) in self.jac_slot.iter().zip(jac) {
            if let Some((s, r)) = s {
                self.mat.add(*s, lay.dc[*r] * v);
            }
        }
        for s in &self.slack_slot {
            self.mat.add(*s, -1.0);
        }
    }

    /// Solves with the regularized factor and refines against the matrix
    /// without the constraint-block regularization.
    fn solve(&self, f: &Factor, rhs: &[f64], nw: usize, delta_c: f64) -> Vec<f64> {
        let mut x = f.solve(rhs);
        let resid = |x: &[f64]| {
            let mut r = self.mat.mul_vec(x);
            for i in nw..r.len() {
                r[i] += delta_c * x[i];
            }
            r.iter().zip(rhs).map(|(a, b)| b - a).collect::<Vec<f64>>()
        };
        let mut r = resid(&x);
        let mut rn = inf_norm(&r);
        for _ in 0..5 {
            if rn <= 1e-14 * (1.0 + inf_norm(rhs)) {
                break;
            }
            let dx = f.solve(&r);
            let cand: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
            let rc = resid(&cand);
            let rcn = inf_norm(&rc);
            if !(rcn < 0.5 * rn) {
                break;
            }
            x = cand;
            r = rc;
            rn = rcn;
        }
        x
    }
}

struct Point {
    w: Vec<f64>,
    x: Vec<f64>,
    f: f64,
    grad: Vec<f64>,
    g: Vec<f64>,
    c: Vec<f64>,
}

fn evaluate<P: NlpProblem>(p: &P, lay: &Layout, w: Vec<f64>) -> Option<Point> {
    let x = lay.x(&w);
    let f = p.objective(&x);
    let g = p.constraints(&x);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let c = lay.residual(&g, &w);
    Some(Point { grad: Vec::new(), w, x, f, g, c })
}

/// Solves the problem from `x0`. The best (last accepted) iterate is returned
/// whatever the status.
pub fn solve<P: NlpProblem>(p: &P, x0: &[f64], opts: &Options) -> Solution {
    let n = p.num_variables();
    let m = p.num_constraints();
    assert_eq!(x0.len(), n, "initial point has the wrong dimension");
    let (xl, xu) = p.variable_bounds();
    let (g_lo, g_hi) = p.constraint_bounds();
    assert!(xl.len() == n && xu.len() == n && g_lo.len() == m && g_hi.len() == m);
    for i in 0..n {
        assert!(xl[i] <= xu[i], "variable {i} has crossed bounds");
    }
    for i in 0..m {
        assert!(g_lo[i] <= g_hi[i], "constraint {i} has crossed bounds");
    }

    let mut x_template = x0.to_vec();
    let mut col_of = vec![NONE; n];
    let mut free = vec![];
    for i in 0..n {
        if xl[i] == xu[i] {
            x_template[i] = xl[i];
        } else {
            col_of[i] = free.len();
            free.push(i);
        }
    }
    let nx = free.len();
    let mut slack_of = vec![NONE; m];
    let mut slack_row = vec![];
    for i in 0..m {
        if g_lo[i] != g_hi[i] {
            slack_of[i] = slack_row.len();
            slack_row.push(i);
        }
    }
    let nw = nx + slack_row.len();

    // gradient-based scaling at the start point
    let xs: Vec<f64> =
        (0..n).map(|i| if col_of[i] == NONE { x_template[i] } else { push_into(x0[i], xl[i], xu[i], opts.bound_push) }).collect();
    let js = p.jacobian_structure();
    let hs = p.hessian_structure();
    let g0 = p.gradient(&xs);
    let df = (opts.max_gradient / inf_norm(&g0).max(1e-300)).min(1.0);
    let mut row_max = vec![0.0f64; m];
    for (&(r, c), v) in js.iter().zip(p.jacobian_values(&xs)) {
        if col_of[c] != NONE {
            row_max[r] = row_max[r].max(v.abs());
        }
    }
    let dc: Vec<f64> = row_max.iter().map(|&r| if r > 0.0 { (opts.max_gradient / r).min(1.0) } else { 1.0 }).collect();

    let mut lw = vec![f64::NEG_INFINITY; nw];
    let mut uw = vec![f64::INFINITY; nw];
    for (k, &i) in free.iter().enumerate() {
        lw[k] = xl[i];
        uw[k] = xu[i];
    }
    for (j, &r) in slack_row.iter().enumerate() {
        lw[nx + j] = dc[r] * g_lo[r];
        uw[nx + j] = dc[r] * g_hi[r];
    }
    let lo_idx: Vec<usize> = (0..nw).filter(|&i| lw[i].is_finite()).collect();
    let up_idx: Vec<usize> = (0..nw).filter(|&i| uw[i].is_finite()).collect();
    let lay = Layout { n, m, nx, nw, free, col_of, x_template, slack_row, slack_of, g_lo, g_hi, lw, uw, lo_idx, up_idx, df, dc };

    let mut w0: Vec<f64> = lay.free.iter().map(|&i| xs[i]).collect();
    let gs = p.constraints(&xs);
    for (j, &r) in lay.slack_row.iter().enumerate() {
        let k = nx + j;
        w0.push(push_into(lay.dc[r] * gs[r], lay.lw[k], lay.uw[k], opts.bound_push));
    }
    let mut kkt = Kkt::new(&lay, &hs, &js);
    Ipm { p, lay: &lay, opts, kkt: &mut kkt }.run(w0)
}

struct Ipm<'a, P: NlpProblem> {
    p: &'a P,
    lay: &'a Layout,
    opts: &'a Options,
    kkt: &'a mut Kkt,
}

impl<'a, P: NlpProblem> Ipm<'a, P> {
    fn finish(&self, pt: &Point, lambda: &[f64], zl: &[f64], zu: &[f64], status: Status, iters: usize, du: f64) -> Solution {
        let lay = self.lay;
        let mut z_lower = vec![0.0; lay.n];
        let mut z_upper = vec![0.0; lay.n];
        for (k, &i) in lay.free.iter().enumerate() {
            z_lower[i] = zl[k] / lay.df;
            z_upper[i] = zu[k] / lay.df;
        }
        Solution {
            lambda: lambda.iter().zip(&lay.dc).map(|(l, d)| l * d / lay.df).collect(),
            x: pt.x.clone(),
            z_lower,
            z_upper,
            objective: pt.f,
            status,
            iterations: iters,
            constraint_violation: lay.violation(&pt.g),
            dual_infeasibility: du,
        }
    }

    fn jac_pairs(&self) -> Vec<(usize, usize)> {
        self.p.jacobian_structure().into_iter().map(|(r, c)| (r, self.lay.col_of[c])).collect()
    }

    fn run(&mut self, w0: Vec<f64>) -> Solution {
        let lay = self.lay;
        let opts = self.opts;
        let (nw, m) = (lay.nw, lay.m);
        let jac_pairs = self.jac_pairs();
        let jt_times = |jac: &[f64], v: &[f64]| {
            let mut out = vec![0.0; nw];
            for (k, &(row, col)) in jac_pairs.iter().enumerate() {
                if col != NONE {
                    out[col] += lay.dc[row] * jac[k] * v[row];
                }
            }
            for (j, &row) in lay.slack_row.iter().enumerate() {
                out[lay.nx + j] -= v[row];
            }
            out
        };

        let mut pt = match evaluate(self.p, lay, w0) {
            Some(pt) => pt,
            None => {
                let x = lay.x(&vec![0.0; nw]);
                return Solution {
                    x,
                    lambda: vec![0.0; m],
                    z_lower: vec![0.0; lay.n],
                    z_upper: vec![0.0; lay.n],
                    objective: f64::NAN,
                    status: Status::Breakdown("non-finite function value at the initial point".into()),
                    iterations: 0,
                    constraint_violation: f64::INFINITY,
                    dual_infeasibility: f64::INFINITY,
                };
            }
        };
        pt.grad = self.p.gradient(&pt.x);
        let mut jac = self.p.jacobian_values(&pt.x);
        let mut zl = vec![0.0; nw];
        let mut zu = vec![0.0; nw];
        for &i in &lay.lo_idx {
            zl[i] = 1.0;
        }
        for &i in &lay.up_idx {
            zu[i] = 1.0;
        }

        // least-squares multipliers
        let mut lambda = vec![0.0; m];
        if m > 0 {
            let reg = DELTA_C;
            self.kkt.assemble(lay, None, &vec![1.0; nw], &jac, reg);
            if let Ok(f) = self.kkt.sym.factor(&self.kkt.mat) {
                let mut rhs = vec![0.0; nw + m];
                let mut g0 = vec![0.0; nw];
                for (k, &i) in lay.free.iter().enumerate() {
                    g0[k] = lay.df * pt.grad[i];
                }
                for i in 0..nw {
                    rhs[i] = -(g0[i] - zl[i] + zu[i]);
                }
                let sol = self.kkt.solve(&f, &rhs, nw, reg);
                let l: Vec<f64> = sol[nw..].to_vec();
                if inf_norm(&l) <= 1e3 && l.iter().all(|v| v.is_finite()) {
                    lambda = l;
                }
            }
        }

        let mut mu = opts.mu_init;
        let theta0 = one_norm(&pt.c);
        let theta_max = 1e4 * theta0.max(1.0);
        let theta_min = 1e-4 * theta0.max(1.0);
        let mut filter: Vec<(f64, f64)> = Vec::new();
        let mut filter_mu = mu;
        let mut delta_w_last = 0.0f64;
        let mut failures = 0usize;
        let mut du_last = f64::INFINITY;
        let s_max = 100.0f64;

        for iter in 0..=opts.max_iter {
            // optimality measures
            let grad_l = {
                let mut r = jt_times(&jac, &lambda);
                for (k, &i) in lay.free.iter().enumerate() {
                    r[k] += lay.df * pt.grad[i];
                }
                for i in 0..nw {
                    r[i] += zu[i] - zl[i];
                }
                r
            };
            let zsum = one_norm(&zl) + one_norm(&zu);
            let nb = (lay.lo_idx.len() + lay.up_idx.len()).max(1) as f64;
            let s_d = (s_max.max((one_norm(&lambda) + zsum) / (m as f64 + nb))) / s_max;
            let s_c = (s_max.max(zsum / nb)) / s_max;
            let compl = |mu: f64| {
                let mut e = 0.0f64;
                for &i in &lay.lo_idx {
                    e = e.max((zl[i] * (pt.w[i] - lay.lw[i]) - mu).abs());
                }
                for &i in &lay.up_idx {
                    e = e.max((zu[i] * (lay.uw[i] - pt.w[i]) - mu).abs());
                }
                e
            };
            let du = inf_norm(&grad_l) / s_d;
            let pr = inf_norm(&pt.c);
            du_last = du;
            let e0 = du.max(pr).max(compl(0.0) / s_c);
            if e0 <= opts.tol && lay.violation(&pt.g) <= opts.constr_viol_tol {
                return self.finish(&pt, &lambda, &zl, &zu, Status::Success, iter, du);
            }
            if iter == opts.max_iter {
                break;
            }
            loop {
                let e_mu = du.max(pr).max(compl(mu) / s_c);
                if e_mu > 10.0 * mu || mu <= opts.tol / 10.0 {
                    break;
                }
                mu = (opts.tol / 10.0).max((0.2 * mu).min(mu.powf(1.5)));
            }
            let tau = 0.99f64.max(1.0 - mu);

            // Newton system
            let hess = self.p.hessian_values(&pt.x, lay.df, &lambda.iter().zip(&lay.dc).map(|(l, d)| l * d).collect::<Vec<_>>());
            let mut sigma = vec![0.0; nw];
            for &i in &lay.lo_idx {
                sigma[i] += zl[i] / (pt.w[i] - lay.lw[i]);
            }
            for &i in &lay.up_idx {
                sigma[i] += zu[i] / (lay.uw[i] - pt.w[i]);
            }
            let gb = lay.barrier_gradient(&pt.grad, &pt.w, mu);
            let mut rhs = vec![0.0; nw + m];
            for i in 0..nw {
                rhs[i] = -gb[i];
            }
            for i in 0..m {
                rhs[nw + i] = -pt.c[i];
            }

            let mut delta_w = 0.0f64;
            let factor = loop {
                let diag: Vec<f64> = sigma.iter().map(|s| s + delta_w).collect();
                self.kkt.assemble(lay, Some(&hess), &diag, &jac, DELTA_C);
                match self.kkt.sym.factor(&self.kkt.mat) {
                    Ok(f) if f.negative_pivots() == m => break Some(f),
                    _ => {}
                }
                delta_w = if delta_w == 0.0 {
                    if delta_w_last == 0.0 {
                        1e-4
                    } else {
                        (delta_w_last / 3.0).max(1e-20)
                    }
                } else if delta_w_last == 0.0 {
                    delta_w * 100.0
                } else {
                    delta_w * 8.0
                };
                if delta_w > 1e40 {
                    break None;
                }
            };
            let Some(factor) = factor else {
                return self.finish(&pt, &lambda, &zl, &zu, Status::Breakdown("inertia correction failed".into()), iter, du);
            };
            if delta_w > 0.0 {
                delta_w_last = delta_w;
            }
            let sol = self.kkt.solve(&factor, &rhs, nw, DELTA_C);
            if sol.iter().any(|v| !v.is_finite()) {
                return self.finish(&pt, &lambda, &zl, &zu, Status::Breakdown("non-finite Newton step".into()), iter, du);
            }
            let dw = sol[..nw].to_vec();
            let lambda_plus = sol[nw..].to_vec();

            // filter line search on (θ, φ) = (‖c‖₁, barrier)
            let theta = one_norm(&pt.c);
            let phi = lay.barrier(pt.f, &pt.w, mu);
            let gd = dot(&gb, &dw);
            if mu < filter_mu {
                filter.clear();
                filter_mu = mu;
            }
            let alpha_max = lay.fraction_to_boundary(&pt.w, &dw, tau);
            let alpha_min = if gd < 0.0 {
                let mut a = GAMMA_THETA.min(GAMMA_PHI * theta / -gd);
                if theta <= theta_min {
                    a = a.min(theta.powf(S_THETA) / (-gd).powf(S_PHI));
                }
                GAMMA_ALPHA * a
            } else {
                GAMMA_ALPHA * GAMMA_THETA
            };
            let small = 10.0 * f64::EPSILON * phi.abs().max(1.0);
            let tiny = dw.iter().zip(&pt.w).all(|(d, w)| d.abs() <= 10.0 * f64::EPSILON * w.abs().max(1.0));
            // Some(armijo) when acceptable; armijo marks an objective-decrease step
            let acceptable = |t: &Point, a: f64, filter: &[(f64, f64)]| -> Option<bool> {
                let th = one_norm(&t.c);
                let ph = lay.barrier(t.f, &t.w, mu);
                if !ph.is_finite() || th > theta_max {
                    return None;
                }
                let switching = gd < 0.0 && a * (-gd).powf(S_PHI) > theta.powf(S_THETA);
                if switching && theta <= theta_min {
                    return (ph <= phi + ETA * a * gd + small).then_some(true);
                }
                let decrease = th <= (1.0 - GAMMA_THETA) * theta || ph <= phi - GAMMA_PHI * theta + small;
                let in_filter = filter.iter().any(|&(tf, pf)| th >= tf && ph >= pf);
                (decrease && !in_filter).then_some(false)
            };
            let mut alpha = alpha_max;
            let mut accepted: Option<(Point, f64, bool)> = None;
            for trial_no in 0..60 {
                let w1: Vec<f64> = pt.w.iter().zip(&dw).map(|(w, d)| w + alpha * d).collect();
                if let Some(t) = evaluate(self.p, lay, w1) {
                    if tiny {
                        accepted = Some((t, alpha, true));
                        break;
                    }
                    if let Some(armijo) = acceptable(&t, alpha, &filter) {
                        accepted = Some((t, alpha, armijo));
                        break;
                    }
                    if trial_no == 0 && m > 0 && one_norm(&t.c) >= theta {
                        // second-order corrections
                        let mut c_soc: Vec<f64> = pt.c.iter().zip(&t.c).map(|(a, b)| alpha * a + b).collect();
                        let mut prev = one_norm(&t.c);
                        for _ in 0..4 {
                            let mut r2 = rhs.clone();
                            for i in 0..m {
                                r2[nw + i] = -c_soc[i];
                            }
                            let s2 = self.kkt.solve(&factor, &r2, nw, DELTA_C);
                            let d2 = &s2[..nw];
                            let a2 = lay.fraction_to_boundary(&pt.w, d2, tau);
                            let w2: Vec<f64> = pt.w.iter().zip(d2).map(|(w, d)| w + a2 * d).collect();
                            let Some(t2) = evaluate(self.p, lay, w2) else { break };
                            if let Some(armijo) = acceptable(&t2, alpha, &filter) {
                                accepted = Some((t2, alpha, armijo));
                                break;
                            }
                            let cn = one_norm(&t2.c);
                            if cn > 0.99 * prev {
                                break;
                            }
                            prev = cn;
                            c_soc = c_soc.iter().zip(&t2.c).map(|(a, b)| a2 * a + b).collect();
                        }
                        if accepted.is_some() {
                            break;
                        }
                    }
                }
                alpha *= 0.5;
                if alpha < alpha_min {
                    break;
                }
            }
            if let Some((_, _, false)) = &accepted {
                filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
            }
            if accepted.is_none() && theta > 0.0 {
                accepted = self.feasibility_step(&pt, &sigma, &jac, tau).map(|(t, a)| (t, a, false));
                if accepted.is_some() {
                    filter.clear();
                }
            }

            let (new_pt, alpha) = match accepted {
                Some((t, a, _)) => {
                    failures = 0;
                    (t, a)
                }
                None => {
                    failures += 1;
                    if failures > 10 {
                        return self.finish(&pt, &lambda, &zl, &zu, Status::Breakdown("line search failed repeatedly".into()), iter, du);
                    }
                    // take a short step anyway and let the regularization grow
                    delta_w_last = delta_w_last.max(1e-4) * 10.0;
                    filter.clear();
                    let a = alpha_max * 1e-3;
                    let w1: Vec<f64> = pt.w.iter().zip(&dw).map(|(w, d)| w + a * d).collect();
                    match evaluate(self.p, lay, w1) {
                        Some(t) => (t, a),
                        None => {
                            return self.finish(
                                &pt,
                                &lambda,
                                &zl,
                                &zu,
                                Status::Breakdown("non-finite functions along the step".into()),
                                iter,
                                du,
                            );
                        }
                    }
                }
            };

            // bound multipliers
            let mut dzl = vec![0.0; nw];
            let mut dzu = vec![0.0; nw];
            for &i in &lay.lo_idx {
                let s = pt.w[i] - lay.lw[i];
                dzl[i] = mu / s - zl[i] - zl[i] / s * dw[i];
            }
            for &i in &lay.up_idx {
                let s = lay.uw[i] - pt.w[i];
                dzu[i] = mu / s - zu[i] + zu[i] / s * dw[i];
            }
            let mut alpha_z = 1.0f64;
            for i in 0..nw {
                if dzl[i] < 0.0 {
                    alpha_z = alpha_z.min(-tau * zl[i] / dzl[i]);
                }
                if dzu[i] < 0.0 {
                    alpha_z = alpha_z.min(-tau * zu[i] / dzu[i]);
                }
            }
            for i in 0..nw {
                zl[i] += alpha_z * dzl[i];
                zu[i] += alpha_z * dzu[i];
            }
            for i in 0..m {
                lambda[i] += alpha * (lambda_plus[i] - lambda[i]);
            }
            pt = new_pt;
            pt.grad = self.p.gradient(&pt.x);
            jac = self.p.jacobian_values(&pt.x);
            for &i in &lay.lo_idx {
                let s = pt.w[i] - lay.lw[i];
                zl[i] = zl[i].clamp(mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * mu / s);
            }
            for &i in &lay.up_idx {
                let s = lay.uw[i] - pt.w[i];
                zu[i] = zu[i].clamp(mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * mu / s);
            }
            if opts.verbose {
                eprintln!(
                    "{iter:4} {:+.8e} pr {:.2e} du {:.2e} mu {:.1e} dw {:.1e} a {:.2e} amax {:.2e} filter {}",
                    pt.f,
                    pr,
                    du,
                    mu,
                    delta_w,
                    alpha,
                    alpha_max,
                    filter.len()
                );
            }
        }
        self.finish(&pt, &lambda, &zl, &zu, Status::MaxIterations, self.opts.max_iter, du_last)
    }

    /// Minimum-norm Gauss–Newton step toward `c = 0`, backtracked until the
    /// constraint violation drops.
    fn feasibility_step(&mut self, pt: &Point, sigma: &[f64], jac: &[f64], tau: f64) -> Option<(Point, f64)> {
        let lay = self.lay;
        let (nw, m) = (lay.nw, lay.m);
        let diag: Vec<f64> = sigma.iter().map(|s| s + 1.0).collect();
        self.kkt.assemble(lay, None, &diag, jac, DELTA_C);
        let f = self.kkt.sym.factor(&self.kkt.mat).ok()?;
        let mut rhs = vec![0.0; nw + m];
        for i in 0..m {
            rhs[nw + i] = -pt.c[i];
        }
        let d = self.kkt.solve(&f, &rhs, nw, DELTA_C);
        let theta = one_norm(&pt.c);
        let mut a = lay.fraction_to_boundary(&pt.w, &d[..nw], tau);
        for _ in 0..30 {
            let w1: Vec<f64> = pt.w.iter().zip(&d).map(|(w, d)| w + a * d).collect();
            if let Some(t) = evaluate(self.p, lay, w1) {
                if one_norm(&t.c) <= (1.0 - 1e-4 * a) * theta {
                    return Some((t, a));
                }
            }
            a *= 0.5;
        }
        None
    }
}
