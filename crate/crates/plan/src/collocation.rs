//! Gauss collocation on a uniform grid and the transcription of an optimal
//! control problem into an [`NlpProblem`].
//!
//! Each interval `k` carries states `x_{k,0..n_p}` at the points `c_j` and one
//! constant control `u_k`. The defects
//! `(t_f/N)·f(x_{k,i}, u_k, p) − Σ_j C_{j,i} x_{k,j}` vanish at `i = 1..n_p` and
//! `x_{k+1,0} = Σ_j D_j x_{k,j}` links the intervals.

use crate::error::PlanError;
use mobman_core::autodiff::{jacobian_unchecked, DiffFn};
use mobman_core::Scalar;
use mobman_nlp::NlpProblem;
use rayon::prelude::*;
use std::collections::HashMap;

pub const MAX_DEGREE: usize = 9;

/// Legendre polynomial `P_n(x)` and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
}

/// Gauss–Legendre nodes and weights on (0, 1), ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// `c_0 = 0` followed by the roots of the shifted Legendre polynomial of degree `n_p`.
pub fn gauss_points(n_p: usize) -> Result<Vec<f64>, PlanError> {
    if !(1..=MAX_DEGREE).contains(&n_p) {
        return Err(PlanError::UnsupportedDegree(n_p));
    }
    let mut c = vec![0.0];
    c.extend(gauss_legendre(n_p).0);
    Ok(c)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollocationScheme {
    pub n_p: usize,
    pub points: Vec<f64>,
    /// `c[j][i] = ℓ̇_j(c_i)`.
    pub c: Vec<Vec<f64>>,
    /// `d[j] = ℓ_j(1)`.
    pub d: Vec<f64>,
    /// `b[j] = ∫₀¹ ℓ_j`.
    pub b: Vec<f64>,
}

impl CollocationScheme {
    pub fn gauss(n_p: usize) -> Result<Self, PlanError> {
        basis_matrices(&gauss_points(n_p)?)
    }

    /// `ℓ_j(t)` for every `j`.
    pub fn basis(&self, t: f64) -> Vec<f64> {
        lagrange(&self.points, t)
    }
}

fn lagrange(points: &[f64], t: f64) -> Vec<f64> {
    (0..points.len())
        .map(|j| points.iter().enumerate().filter(|&(m, _)| m != j).map(|(_, &cm)| (t - cm) / (points[j] - cm)).product())
        .collect()
}

/// Differentiation matrix, continuity vector and quadrature vector of the
/// Lagrange basis on `points`.
pub fn basis_matrices(points: &[f64]) -> Result<CollocationScheme, PlanError> {
    let n = points.len();
    if n < 2 {
        return Err(PlanError::Shape("need at least two points".into()));
    }
    for i in 0..n {
        for j in 0..i {
            if (points[i] - points[j]).abs() <= 1e-14 {
                return Err(PlanError::DuplicatePoints);
            }
        }
    }
    let w: Vec<f64> = (0..n).map(|j| 1.0 / (0..n).filter(|&m| m != j).map(|m| points[j] - points[m]).product::<f64>()).collect();
    let mut c = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if j != i {
                c[j][i] = w[j] / w[i] / (points[i] - points[j]);
                diag -= c[j][i];
            }
        }
        c[i][i] = diag;
    }
    let d = lagrange(points, 1.0);
    let (qn, qw) = gauss_legendre(n);
    let mut b = vec![0.0; n];
    for (t, wq) in qn.iter().zip(&qw) {
        for (bj, l) in b.iter_mut().zip(lagrange(points, *t)) {
            *bj += wq * l;
        }
    }
    Ok(CollocationScheme { n_p: n - 1, points: points.to_vec(), c, d, b })
}

/// A continuous-time optimal control problem with optional static parameters `p`.
pub trait Ocp: Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn param_dim(&self) -> usize {
        0
    }
    fn dynamics<S: Scalar>(&self, x: &[S], u: &[S], p: &[S]) -> Vec<S>;
    /// Stage cost `c(x, u, p)`.
    fn running_cost<S: Scalar>(&self, _x: &[S], _u: &[S], _p: &[S]) -> S {
        S::zero()
    }
    /// Terminal cost `h(x_N, t_f, p)`.
    fn terminal_cost<S: Scalar>(&self, _x: &[S], _t_f: S, _p: &[S]) -> S {
        S::zero()
    }
    fn has_running_cost(&self) -> bool {
        true
    }
    /// Constraints at every collocation point `i ≥ 1`.
    fn path_constraints<S: Scalar>(&self, _x: &[S], _u: &[S], _p: &[S]) -> Vec<S> {
        Vec::new()
    }
    fn path_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![], vec![])
    }
    fn terminal_constraints<S: Scalar>(&self, _x: &[S], _p: &[S]) -> Vec<S> {
        Vec::new()
    }
    fn terminal_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![], vec![])
    }
    fn param_constraints<S: Scalar>(&self, _p: &[S]) -> Vec<S> {
        Vec::new()
    }
    fn param_constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![], vec![])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeMode {
    Fixed(f64),
    /// `t_f` becomes a decision variable.
    Free {
        init: f64,
        lo: f64,
        hi: f64,
    },
}

pub type Bounds = (Vec<f64>, Vec<f64>);

#[derive(Clone, Debug, PartialEq)]
pub struct TranscriptionSpec {
    pub n_intervals: usize,
    pub scheme: CollocationScheme,
    pub time: TimeMode,
    pub x0: Vec<f64>,
    pub state_bounds: Bounds,
    /// Bounds on `x_{N,0}`; the state bounds when absent.
    pub terminal_state_bounds: Option<Bounds>,
    pub control_bounds: Bounds,
    pub param_bounds: Bounds,
    pub param_init: Vec<f64>,
}

const NONE: usize = usize::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
enum Kind {
    Defect { k: usize, i: usize },
    Path { k: usize, i: usize },
    Cost { k: usize, j: usize },
    Terminal,
    Param,
}

/// One nonlinear piece of the NLP and where its local variables live.
#[derive(Clone, Debug)]
struct Block {
    kind: Kind,
    /// Global indices of the local vector `z` (entries may be `NONE` for constants).
    vars: Vec<usize>,
    /// First constraint row (constraint blocks only).
    row: usize,
    /// Offset of this block's dense Jacobian in the value vector.
    jac: usize,
    /// Lower-triangle local pairs `(a, b)` with their Hessian slots; local index
    /// `vars.len()` stands for `t_f` when the block is scaled by `Δ`.
    hess: Vec<(usize, usize, usize)>,
}

/// The discrete problem. Implements [`NlpProblem`].
pub struct Transcription<O: Ocp> {
    pub ocp: O,
    pub spec: TranscriptionSpec,
    sd: usize,
    cd: usize,
    pd: usize,
    block_len: usize,
    n_vars: usize,
    tf_index: usize,
    blocks: Vec<Block>,
    n_defect: usize,
    n_cont: usize,
    n_path: usize,
    path_rows: usize,
    n_term: usize,
    n_param: usize,
    jac_structure: Vec<(usize, usize)>,
    /// Linear Jacobian entries `(slot, value)` of the defects and continuity rows.
    jac_linear: Vec<(usize, f64)>,
    hess_structure: Vec<(usize, usize)>,
}

struct DynFn<'a, O>(&'a O, usize, usize);
struct PathFn<'a, O>(&'a O, usize, usize);
struct CostFn<'a, O>(&'a O, usize, usize);
struct TermFn<'a, O>(&'a O, usize);
struct ParamFn<'a, O>(&'a O);

impl<O: Ocp> DiffFn for DynFn<'_, O> {
    fn eval<S: Scalar>(&self, z: &[S]) -> Vec<S> {
        self.0.dynamics(&z[..self.1], &z[self.1..self.1 + self.2], &z[self.1 + self.2..])
    }
}
impl<O: Ocp> DiffFn for PathFn<'_, O> {
    fn eval<S: Scalar>(&self, z: &[S]) -> Vec<S> {
        self.0.path_constraints(&z[..self.1], &z[self.1..self.1 + self.2], &z[self.1 + self.2..])
    }
}
impl<O: Ocp> DiffFn for CostFn<'_, O> {
    fn eval<S: Scalar>(&self, z: &[S]) -> Vec<S> {
        vec![self.0.running_cost(&z[..self.1], &z[self.1..self.1 + self.2], &z[self.1 + self.2..])]
    }
}
/// `z = [x_N, p, t_f]`; outputs the terminal constraints followed by `h`.
impl<O: Ocp> DiffFn for TermFn<'_, O> {
    fn eval<S: Scalar>(&self, z: &[S]) -> Vec<S> {
        let sd = self.1;
        let nz = z.len();
        let mut out = self.0.terminal_constraints(&z[..sd], &z[sd..nz - 1]);
        out.push(self.0.terminal_cost(&z[..sd], z[nz - 1], &z[sd..nz - 1]));
        out
    }
}
impl<O: Ocp> DiffFn for ParamFn<'_, O> {
    fn eval<S: Scalar>(&self, z: &[S]) -> Vec<S> {
        self.0.param_constraints(z)
    }
}

/// Result of evaluating one block: values and (optionally) the dense Jacobian.
struct BlockEval {
    value: Vec<f64>,
    jac: Vec<Vec<f64>>,
}

fn check_bounds(name: &str, b: &Bounds, len: usize) -> Result<(), PlanError> {
    if b.0.len() != len || b.1.len() != len {
        return Err(PlanError::Shape(format!("{name} bounds have length {}/{}, expected {len}", b.0.len(), b.1.len())));
    }
    for i in 0..len {
        if !(b.0[i] <= b.1[i]) {
            return Err(PlanError::InfeasibleBounds(format!("{name}[{i}]: {} > {}", b.0[i], b.1[i])));
        }
    }
    Ok(())
}

/// Builds the discrete problem.
pub fn transcribe<O: Ocp>(ocp: O, spec: TranscriptionSpec) -> Result<Transcription<O>, PlanError> {
    let (sd, cd, pd) = (ocp.state_dim(), ocp.control_dim(), ocp.param_dim());
    let n = spec.n_intervals;
    let np = spec.scheme.n_p;
    if n == 0 {
        return Err(PlanError::Shape("need at least one interval".into()));
    }
    if spec.x0.len() != sd {
        return Err(PlanError::Shape(format!("x0 has length {}, expected {sd}", spec.x0.len())));
    }
    check_bounds("state", &spec.state_bounds, sd)?;
    if let Some(t) = &spec.terminal_state_bounds {
        check_bounds("terminal state", t, sd)?;
    }
    check_bounds("control", &spec.control_bounds, cd)?;
    check_bounds("parameter", &spec.param_bounds, pd)?;
    if spec.param_init.len() != pd {
        return Err(PlanError::Shape(format!("parameter guess has length {}, expected {pd}", spec.param_init.len())));
    }
    if let TimeMode::Free { lo, hi, init } = spec.time {
        if !(0.0 < lo && lo <= init && init <= hi) {
            return Err(PlanError::InfeasibleBounds(format!("final time bounds {lo} ≤ {init} ≤ {hi}")));
        }
    }
    let (pl, _) = ocp.path_bounds();
    let (tl, _) = ocp.terminal_bounds();
    let (ql, _) = ocp.param_constraint_bounds();
    let block_len = (np + 1) * sd + cd;
    let free_tf = matches!(spec.time, TimeMode::Free { .. });
    let tf_index = if free_tf { n * block_len + sd } else { NONE };
    let p0 = n * block_len + sd + usize::from(free_tf);
    let n_vars = p0 + pd;

    let xv = |k: usize, j: usize| k * block_len + j * sd;
    let uv = |k: usize| k * block_len + (np + 1) * sd;
    let pvars = (0..pd).map(|r| p0 + r);
    let local = |xs: usize, with_u: Option<usize>| {
        let mut v: Vec<usize> = (xs..xs + sd).collect();
        if let Some(u) = with_u {
            v.extend(u..u + cd);
        }
        v.extend(pvars.clone());
        v
    };

    let n_defect = n * np * sd;
    let n_cont = n * sd;
    let n_path = n * np * pl.len();
    let n_term = tl.len();
    let n_param = ql.len();

    let mut jac_structure = Vec::new();
    let mut jac_linear = Vec::new();
    let mut blocks = Vec::new();
    let mut row = 0;
    let dense = |blocks: &mut Vec<Block>, js: &mut Vec<(usize, usize)>, kind, vars: Vec<usize>, row: usize, rows: usize, tf_col: bool| {
        let jac = js.len();
        for r in 0..rows {
            for &v in &vars {
                if v != NONE {
                    js.push((row + r, v));
                }
            }
            if tf_col {
                js.push((row + r, tf_index));
            }
        }
        blocks.push(Block { kind, vars, row, jac, hess: vec![] });
    };
    for k in 0..n {
        for i in 1..=np {
            dense(&mut blocks, &mut jac_structure, Kind::Defect { k, i }, local(xv(k, i), Some(uv(k))), row, sd, free_tf);
            let width = sd + cd + pd + usize::from(free_tf);
            let jac0 = blocks.last().map(|b: &Block| b.jac).unwrap_or(0);
            for r in 0..sd {
                // x_{k,i} already has a slot in the dense block
                jac_linear.push((jac0 + r * width + r, -spec.scheme.c[i][i]));
                for j in 0..=np {
                    if j != i {
                        jac_linear.push((jac_structure.len(), -spec.scheme.c[j][i]));
                        jac_structure.push((row + r, xv(k, j) + r));
                    }
                }
            }
            row += sd;
        }
    }
    for k in 0..n {
        for r in 0..sd {
            jac_linear.push((jac_structure.len(), 1.0));
            jac_structure.push((row + r, xv(k + 1, 0) + r));
            for j in 0..=np {
                jac_linear.push((jac_structure.len(), -spec.scheme.d[j]));
                jac_structure.push((row + r, xv(k, j) + r));
            }
        }
        row += sd;
    }
    if !pl.is_empty() {
        for k in 0..n {
            for i in 1..=np {
                dense(&mut blocks, &mut jac_structure, Kind::Path { k, i }, local(xv(k, i), Some(uv(k))), row, pl.len(), false);
                row += pl.len();
            }
        }
    }
    let mut term_vars = local(xv(n, 0), None);
    term_vars.push(tf_index);
    {
        let jac = jac_structure.len();
        for r in 0..n_term {
            for &v in &term_vars[..sd + pd] {
                jac_structure.push((row + r, v));
            }
        }
        blocks.push(Block { kind: Kind::Terminal, vars: term_vars, row, jac, hess: vec![] });
        row += n_term;
    }
    if n_param > 0 {
        dense(&mut blocks, &mut jac_structure, Kind::Param, pvars.clone().collect(), row, n_param, false);
    }
    if ocp.has_running_cost() {
        for k in 0..n {
            for j in 0..=np {
                if spec.scheme.b[j].abs() > 1e-14 {
                    blocks.push(Block {
                        kind: Kind::Cost { k, j },
                        vars: local(xv(k, j), Some(uv(k))),
                        row: NONE,
                        jac: NONE,
                        hess: vec![],
                    });
                }
            }
        }
    }

    // Hessian pattern, deduplicated
    let mut slots: HashMap<(usize, usize), usize> = HashMap::new();
    let mut hess_structure = Vec::new();
    for b in blocks.iter_mut() {
        let scaled = matches!(b.kind, Kind::Defect { .. } | Kind::Cost { .. });
        let mut g: Vec<usize> = b.vars.clone();
        if scaled {
            g.push(tf_index);
        }
        for a in 0..g.len() {
            for c in 0..=a {
                let (va, vc) = (g[a], g[c]);
                if va == NONE || vc == NONE {
                    continue;
                }
                let key = (va.max(vc), va.min(vc));
                let s = *slots.entry(key).or_insert_with(|| {
                    hess_structure.push(key);
                    hess_structure.len() - 1
                });
                b.hess.push((a, c, s));
            }
        }
    }

    Ok(Transcription {
        ocp,
        spec,
        sd,
        cd,
        pd,
        block_len,
        n_vars,
        tf_index,
        blocks,
        n_defect,
        n_cont,
        n_path,
        path_rows: pl.len(),
        n_term,
        n_param,
        jac_structure,
        jac_linear,
        hess_structure,
    })
}

/// Decoded trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub scheme: CollocationScheme,
    pub t_f: f64,
    /// `states[k][j] = x_{k,j}`.
    pub states: Vec<Vec<Vec<f64>>>,
    pub x_final: Vec<f64>,
    pub controls: Vec<Vec<f64>>,
    pub params: Vec<f64>,
}

impl Trajectory {
    pub fn n_intervals(&self) -> usize {
        self.controls.len()
    }

    pub fn dt(&self) -> f64 {
        self.t_f / self.n_intervals() as f64
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.n_intervals();
        let s = (t / self.dt()).clamp(0.0, n as f64);
        let k = (s.floor() as usize).min(n - 1);
        (k, s - k as f64)
    }

    /// Interpolated state on the interval polynomial.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        if t >= self.t_f {
            return self.x_final.clone();
        }
        let (k, tau) = self.locate(t);
        let l = self.scheme.basis(tau);
        let mut x = vec![0.0; self.x_final.len()];
        for (lj, xj) in l.iter().zip(&self.states[k]) {
            for (a, b) in x.iter_mut().zip(xj) {
                *a += lj * b;
            }
        }
        x
    }

    /// Piecewise-constant control.
    pub fn control_at(&self, t: f64) -> Vec<f64> {
        self.controls[self.locate(t).0].clone()
    }

    /// Times of every `x_{k,j}` followed by `t_f`.
    pub fn time_grid(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut t: Vec<f64> = (0..self.n_intervals()).flat_map(|k| self.scheme.points.iter().map(move |c| (k as f64 + c) * dt)).collect();
        t.push(self.t_f);
        t
    }
}

fn weighted_grad<F: DiffFn>(f: &F, z: &[f64], w: &[f64]) -> Vec<f64> {
    let j = jacobian_unchecked(f, z);
    (0..z.len()).map(|c| j.matrix.iter().zip(w).map(|(row, wr)| wr * row[c]).sum()).collect()
}

/// Gradient of `wᵀF` and its Hessian from central differences of that gradient.
fn weighted_hessian<F: DiffFn>(f: &F, z: &[f64], w: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let nz = z.len();
    let g = weighted_grad(f, z, w);
    let mut h = vec![vec![0.0; nz]; nz];
    let mut zz = z.to_vec();
    for c in 0..nz {
        let step = 1e-6 * z[c].abs().max(1.0);
        zz[c] = z[c] + step;
        let gp = weighted_grad(f, &zz, w);
        zz[c] = z[c] - step;
        let gm = weighted_grad(f, &zz, w);
        zz[c] = z[c];
        for r in 0..nz {
            h[r][c] = (gp[r] - gm[r]) / (2.0 * step);
        }
    }
    for r in 0..nz {
        for c in 0..r {
            let s = 0.5 * (h[r][c] + h[c][r]);
            h[r][c] = s;
            h[c][r] = s;
        }
    }
    (g, h)
}

impl<O: Ocp> Transcription<O> {
    pub fn num_defects(&self) -> usize {
        self.n_defect
    }

    pub fn num_continuity(&self) -> usize {
        self.n_cont
    }

    pub fn num_path(&self) -> usize {
        self.n_path
    }

    pub fn num_terminal(&self) -> usize {
        self.n_term
    }

    pub fn num_param_constraints(&self) -> usize {
        self.n_param
    }

    pub fn x_index(&self, k: usize, j: usize) -> usize {
        k * self.block_len + j * self.sd
    }

    pub fn u_index(&self, k: usize) -> usize {
        k * self.block_len + (self.spec.scheme.n_p + 1) * self.sd
    }

    pub fn param_index(&self) -> usize {
        self.n_vars - self.pd
    }

    pub fn t_f(&self, w: &[f64]) -> f64 {
        match self.spec.time {
            TimeMode::Fixed(t) => t,
            TimeMode::Free { .. } => w[self.tf_index],
        }
    }

    fn z(&self, b: &Block, w: &[f64]) -> Vec<f64> {
        let tf = self.t_f(w);
        b.vars.iter().map(|&v| if v == NONE { tf } else { w[v] }).collect()
    }

    fn eval_block(&self, b: &Block, w: &[f64], derivs: bool) -> BlockEval {
        let z = self.z(b, w);
        macro_rules! run {
            ($f:expr) => {{
                let f = $f;
                if derivs {
                    let j = jacobian_unchecked(&f, &z);
                    BlockEval { value: j.value, jac: j.matrix }
                } else {
                    BlockEval { value: f.eval(&z), jac: vec![] }
                }
            }};
        }
        match b.kind {
            Kind::Defect { .. } => run!(DynFn(&self.ocp, self.sd, self.cd)),
            Kind::Path { .. } => run!(PathFn(&self.ocp, self.sd, self.cd)),
            Kind::Cost { .. } => run!(CostFn(&self.ocp, self.sd, self.cd)),
            Kind::Terminal => run!(TermFn(&self.ocp, self.sd)),
            Kind::Param => run!(ParamFn(&self.ocp)),
        }
    }

    fn eval_all(&self, w: &[f64], derivs: bool, want: impl Fn(&Kind) -> bool + Sync) -> Vec<Option<BlockEval>> {
        self.blocks.par_iter().map(|b| want(&b.kind).then(|| self.eval_block(b, w, derivs))).collect()
    }

    /// Initial guess: zeros, `x0` in the first slot, the `t_f` guess and the parameter guess.
    pub fn initial_guess(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_vars];
        w[..self.sd].copy_from_slice(&self.spec.x0);
        if let TimeMode::Free { init, .. } = self.spec.time {
            w[self.tf_index] = init;
        }
        let p0 = self.param_index();
        w[p0..].copy_from_slice(&self.spec.param_init);
        w
    }

    pub fn decode(&self, w: &[f64]) -> Trajectory {
        let n = self.spec.n_intervals;
        let np = self.spec.scheme.n_p;
        let states = (0..n).map(|k| (0..=np).map(|j| w[self.x_index(k, j)..self.x_index(k, j) + self.sd].to_vec()).collect()).collect();
        let controls = (0..n).map(|k| w[self.u_index(k)..self.u_index(k) + self.cd].to_vec()).collect();
        Trajectory {
            scheme: self.spec.scheme.clone(),
            t_f: self.t_f(w),
            states,
            x_final: w[self.x_index(n, 0)..self.x_index(n, 0) + self.sd].to_vec(),
            controls,
            params: w[self.param_index()..].to_vec(),
        }
    }

    /// Inverse of [`Transcription::decode`] for a trajectory of matching shape.
    pub fn encode(&self, t: &Trajectory) -> Result<Vec<f64>, PlanError> {
        let n = self.spec.n_intervals;
        let np = self.spec.scheme.n_p;
        if t.n_intervals() != n || t.scheme.n_p != np || t.x_final.len() != self.sd || t.params.len() != self.pd {
            return Err(PlanError::Shape("trajectory does not match the transcription".into()));
        }
        let mut w = vec![0.0; self.n_vars];
        for k in 0..n {
            for j in 0..=np {
                w[self.x_index(k, j)..self.x_index(k, j) + self.sd].copy_from_slice(&t.states[k][j]);
            }
            w[self.u_index(k)..self.u_index(k) + self.cd].copy_from_slice(&t.controls[k]);
        }
        w[self.x_index(n, 0)..self.x_index(n, 0) + self.sd].copy_from_slice(&t.x_final);
        if self.tf_index != NONE {
            w[self.tf_index] = t.t_f;
        }
        let p0 = self.param_index();
        w[p0..].copy_from_slice(&t.params);
        Ok(w)
    }

    /// Largest absolute defect and continuity residual.
    pub fn max_defect(&self, w: &[f64]) -> f64 {
        let g = self.constraints(w);
        g[..self.n_defect + self.n_cont].iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Smallest signed slack of the inequality rows (path, terminal, parameter).
    pub fn min_slack(&self, w: &[f64]) -> f64 {
        let g = self.constraints(w);
        let (lo, hi) = self.constraint_bounds();
        (self.n_defect + self.n_cont..g.len()).map(|i| (g[i] - lo[i]).min(hi[i] - g[i])).fold(f64::INFINITY, f64::min)
    }
}

impl<O: Ocp> NlpProblem for Transcription<O> {
    fn num_variables(&self) -> usize {
        self.n_vars
    }

    fn num_constraints(&self) -> usize {
        self.n_defect + self.n_cont + self.n_path + self.n_term + self.n_param
    }

    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let s = &self.spec;
        let mut lo = vec![0.0; self.n_vars];
        let mut hi = vec![0.0; self.n_vars];
        let n = s.n_intervals;
        for k in 0..n {
            for j in 0..=s.scheme.n_p {
                let a = self.x_index(k, j);
                lo[a..a + self.sd].copy_from_slice(&s.state_bounds.0);
                hi[a..a + self.sd].copy_from_slice(&s.state_bounds.1);
            }
            let a = self.u_index(k);
            lo[a..a + self.cd].copy_from_slice(&s.control_bounds.0);
            hi[a..a + self.cd].copy_from_slice(&s.control_bounds.1);
        }
        lo[..self.sd].copy_from_slice(&s.x0);
        hi[..self.sd].copy_from_slice(&s.x0);
        let tb = s.terminal_state_bounds.as_ref().unwrap_or(&s.state_bounds);
        let a = self.x_index(n, 0);
        lo[a..a + self.sd].copy_from_slice(&tb.0);
        hi[a..a + self.sd].copy_from_slice(&tb.1);
        if let TimeMode::Free { lo: l, hi: h, .. } = s.time {
            lo[self.tf_index] = l;
            hi[self.tf_index] = h;
        }
        let p0 = self.param_index();
        lo[p0..].copy_from_slice(&s.param_bounds.0);
        hi[p0..].copy_from_slice(&s.param_bounds.1);
        (lo, hi)
    }

    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let m = self.num_constraints();
        let mut lo = vec![0.0; m];
        let mut hi = vec![0.0; m];
        let mut r = self.n_defect + self.n_cont;
        let (pl, ph) = self.ocp.path_bounds();
        for _ in 0..self.n_path / pl.len().max(1) {
            lo[r..r + pl.len()].copy_from_slice(&pl);
            hi[r..r + pl.len()].copy_from_slice(&ph);
            r += pl.len();
        }
        let (tl, th) = self.ocp.terminal_bounds();
        lo[r..r + tl.len()].copy_from_slice(&tl);
        hi[r..r + th.len()].copy_from_slice(&th);
        r += tl.len();
        let (ql, qh) = self.ocp.param_constraint_bounds();
        lo[r..r + ql.len()].copy_from_slice(&ql);
        hi[r..r + qh.len()].copy_from_slice(&qh);
        (lo, hi)
    }

    fn objective(&self, w: &[f64]) -> f64 {
        let dt = self.t_f(w) / self.spec.n_intervals as f64;
        let ev = self.eval_all(w, false, |k| matches!(k, Kind::Cost { .. } | Kind::Terminal));
        let mut f = 0.0;
        for (b, e) in self.blocks.iter().zip(ev) {
            let Some(e) = e else { continue };
            match b.kind {
                Kind::Cost { j, .. } => f += dt * self.spec.scheme.b[j] * e.value[0],
                Kind::Terminal => f += e.value[self.n_term],
                _ => {}
            }
        }
        f
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.spec.n_intervals as f64;
        let dt = self.t_f(w) / n;
        let ev = self.eval_all(w, true, |k| matches!(k, Kind::Cost { .. } | Kind::Terminal));
        let mut g = vec![0.0; self.n_vars];
        for (b, e) in self.blocks.iter().zip(ev) {
            let Some(e) = e else { continue };
            match b.kind {
                Kind::Cost { j, .. } => {
                    let bj = self.spec.scheme.b[j];
                    for (v, d) in b.vars.iter().zip(&e.jac[0]) {
                        g[*v] += dt * bj * d;
                    }
                    if self.tf_index != NONE {
                        g[self.tf_index] += bj / n * e.value[0];
                    }
                }
                Kind::Terminal => {
                    for (v, d) in b.vars.iter().zip(&e.jac[self.n_term]) {
                        if *v != NONE {
                            g[*v] += d;
                        }
                    }
                }
                _ => {}
            }
        }
        g
    }

    fn constraints(&self, w: &[f64]) -> Vec<f64> {
        let s = &self.spec;
        let np = s.scheme.n_p;
        let dt = self.t_f(w) / s.n_intervals as f64;
        let mut g = vec![0.0; self.num_constraints()];
        let ev = self.eval_all(w, false, |k| !matches!(k, Kind::Cost { .. }));
        for (b, e) in self.blocks.iter().zip(ev) {
            let Some(e) = e else { continue };
            match b.kind {
                Kind::Defect { k, i } => {
                    for r in 0..self.sd {
                        let mut v = dt * e.value[r];
                        for j in 0..=np {
                            v -= s.scheme.c[j][i] * w[self.x_index(k, j) + r];
                        }
                        g[b.row + r] = v;
                    }
                }
                Kind::Terminal => g[b.row..b.row + self.n_term].copy_from_slice(&e.value[..self.n_term]),
                _ => g[b.row..b.row + e.value.len()].copy_from_slice(&e.value),
            }
        }
        let r0 = self.n_defect;
        for k in 0..s.n_intervals {
            for r in 0..self.sd {
                let mut v = w[self.x_index(k + 1, 0) + r];
                for j in 0..=np {
                    v -= s.scheme.d[j] * w[self.x_index(k, j) + r];
                }
                g[r0 + k * self.sd + r] = v;
            }
        }
        g
    }

    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        self.jac_structure.clone()
    }

    fn jacobian_values(&self, w: &[f64]) -> Vec<f64> {
        let n = self.spec.n_intervals as f64;
        let dt = self.t_f(w) / n;
        let free_tf = self.tf_index != NONE;
        let mut vals = vec![0.0; self.jac_structure.len()];
        for &(s, v) in &self.jac_linear {
            vals[s] = v;
        }
        let ev = self.eval_all(w, true, |k| !matches!(k, Kind::Cost { .. }));
        for (b, e) in self.blocks.iter().zip(ev) {
            let Some(e) = e else { continue };
            let (rows, cols) = match b.kind {
                Kind::Terminal => (self.n_term, self.sd + self.pd),
                _ => (e.value.len(), b.vars.len()),
            };
            let scaled = matches!(b.kind, Kind::Defect { .. });
            let mut p = b.jac;
            for r in 0..rows {
                for (c, &v) in b.vars[..cols].iter().enumerate() {
                    if v == NONE {
                        continue;
                    }
                    let d = e.jac[r][c];
                    vals[p] += if scaled { dt * d } else { d };
                    p += 1;
                }
                if scaled && free_tf {
                    vals[p] += e.value[r] / n;
                    p += 1;
                }
            }
        }
        vals
    }

    fn hessian_structure(&self) -> Vec<(usize, usize)> {
        self.hess_structure.clone()
    }

    fn hessian_values(&self, w: &[f64], sigma: f64, lambda: &[f64]) -> Vec<f64> {
        let n = self.spec.n_intervals as f64;
        let dt = self.t_f(w) / n;
        let parts: Vec<Vec<(usize, f64)>> = self
            .blocks
            .par_iter()
            .map(|b| {
                let (weights, scale): (Vec<f64>, f64) = match b.kind {
                    Kind::Defect { .. } => (lambda[b.row..b.row + self.sd].to_vec(), dt),
                    Kind::Path { .. } => (lambda[b.row..b.row + self.path_rows].to_vec(), 1.0),
                    Kind::Cost { j, .. } => (vec![sigma], dt * self.spec.scheme.b[j]),
                    Kind::Terminal => {
                        let mut v = lambda[b.row..b.row + self.n_term].to_vec();
                        v.push(sigma);
                        (v, 1.0)
                    }
                    Kind::Param => (lambda[b.row..b.row + self.n_param].to_vec(), 1.0),
                };
                if weights.iter().all(|&x| x == 0.0) || scale == 0.0 {
                    return vec![];
                }
                let z = self.z(b, w);
                let (g, h) = match b.kind {
                    Kind::Defect { .. } => weighted_hessian(&DynFn(&self.ocp, self.sd, self.cd), &z, &weights),
                    Kind::Path { .. } => weighted_hessian(&PathFn(&self.ocp, self.sd, self.cd), &z, &weights),
                    Kind::Cost { .. } => weighted_hessian(&CostFn(&self.ocp, self.sd, self.cd), &z, &weights),
                    Kind::Terminal => weighted_hessian(&TermFn(&self.ocp, self.sd), &z, &weights),
                    Kind::Param => weighted_hessian(&ParamFn(&self.ocp), &z, &weights),
                };
                let nz = z.len();
                // Δ-scaled blocks are linear in t_f
                let cross = scale / (dt * n);
                b.hess
                    .iter()
                    .map(|&(a, c, s)| {
                        let v = if a < nz && c < nz {
                            scale * h[a][c]
                        } else if a == nz && c < nz {
                            cross * g[c]
                        } else {
                            0.0
                        };
                        (s, v)
                    })
                    .collect()
            })
            .collect();
        let mut vals = vec![0.0; self.hess_structure.len()];
        for part in parts {
            for (s, v) in part {
                vals[s] += v;
            }
        }
        vals
    }
}
