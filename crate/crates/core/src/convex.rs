//! Log-barrier interior-point minimization of a smooth convex objective over
//! sparse linear inequalities.
//!
//! The outer loop multiplies the barrier weight `t` by 10 starting from
//! `t = 1` until the duality-gap certificate `m / t <= tol` holds (`m` =
//! number of barrier terms). Each centering step is damped Newton with
//! backtracking line search (sufficient decrease 0.01, shrink 0.5) plus a
//! step cap keeping every slack positive. Internally the centering objective
//! is scaled as `f + phi / t` so its floating-point resolution does not
//! degrade as `t` grows.
//!
//! The Newton system is solved by dense symmetric factorization per variable
//! block. Blocks are detected from the objective's declared Hessian couplings
//! and from constraint rows with small support; rows whose support would fuse
//! blocks beyond `max_block_size` (the few budget rows that couple every
//! subcarrier) are handled as low-rank corrections via the Woodbury identity.
//! For small dense problems everything lands in one block and this reduces to
//! a plain dense Newton method.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::reform::{ConstraintSystem, LinearInequality};

/// Value/gradient/Hessian contract for the inner solver. Convexity and
/// smoothness on the feasible interior are the caller's responsibility.
pub trait SmoothObjective {
    fn dim(&self) -> usize;

    /// Write the gradient into `grad` and return the value.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64;

    /// Groups of variables with potentially nonzero cross second derivatives.
    /// Singletons need not be listed. A fully dense objective returns one
    /// group with every variable.
    fn hessian_couplings(&self) -> Vec<Vec<usize>>;

    /// Accumulate Hessian entries via `add(row, col, value)` with
    /// `row <= col` (upper triangle).
    fn add_hessian(&self, x: &[f64], add: &mut dyn FnMut(usize, usize, f64));
}

/// Result of one inner solve.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub point: Vec<f64>,
    pub objective_value: f64,
    /// Infinity norm of the stationarity residual with the barrier's implied
    /// dual variables.
    pub kkt_residual: f64,
    /// Total Newton iterations over all barrier stages.
    pub barrier_iterations: usize,
    /// Barrier weight of the last completed stage.
    pub final_barrier_weight: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Blocks larger than this are never formed; offending rows become
    /// low-rank corrections.
    pub max_block_size: usize,
    pub max_newton_per_stage: usize,
    pub max_stages: usize,
    /// First barrier weight. 1 is the cold-start schedule; warm re-solves
    /// of a slowly changing objective may start higher up the ladder.
    pub initial_weight: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self { max_block_size: 512, max_newton_per_stage: 100, max_stages: 40, initial_weight: 1.0 }
    }
}

/// Default duality-gap target of the inner solver.
pub const DEFAULT_INNER_TOL: f64 = 1e-7;

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (hi, lo) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
            self.parent[lo] = hi;
            self.size[hi] += self.size[lo];
        }
    }

    fn group_size(&mut self, vars: &[usize]) -> usize {
        let mut roots: Vec<usize> = vars.iter().map(|&v| self.find(v)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.iter().map(|&r| self.size[r]).sum()
    }
}

struct BlockStructure {
    /// Variable -> (block index, offset inside block).
    var_pos: Vec<(usize, usize)>,
    /// Members of each block, ascending.
    blocks: Vec<Vec<usize>>,
    /// Barrier row indices whose support stays inside one block.
    local_rows: Vec<usize>,
    /// Barrier row indices treated as low-rank coupling corrections.
    coupling_rows: Vec<usize>,
}

fn build_blocks(
    n: usize,
    rows: &[&LinearInequality],
    couplings: &[Vec<usize>],
    max_block: usize,
) -> BlockStructure {
    let mut uf = UnionFind::new(n);
    for group in couplings {
        for w in group.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    // Small rows first so budget-style wide rows cannot absorb everything.
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&k| (rows[k].coeffs.len(), k));
    for &k in &order {
        let support: Vec<usize> = rows[k].coeffs.iter().map(|&(j, _)| j).collect();
        if support.len() < 2 {
            continue;
        }
        if uf.group_size(&support) <= max_block {
            for w in support.windows(2) {
                uf.union(w[0], w[1]);
            }
        }
    }

    let mut block_of_root = vec![usize::MAX; n];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut var_pos = vec![(0usize, 0usize); n];
    for v in 0..n {
        let root = uf.find(v);
        if block_of_root[root] == usize::MAX {
            block_of_root[root] = blocks.len();
            blocks.push(Vec::new());
        }
        let b = block_of_root[root];
        var_pos[v] = (b, blocks[b].len());
        blocks[b].push(v);
    }

    let mut local_rows = Vec::new();
    let mut coupling_rows = Vec::new();
    for (k, row) in rows.iter().enumerate() {
        let mut one_block = true;
        if row.coeffs.len() > 1 {
            let b0 = var_pos[row.coeffs[0].0].0;
            one_block = row.coeffs.iter().all(|&(j, _)| var_pos[j].0 == b0);
        }
        if one_block {
            local_rows.push(k);
        } else {
            coupling_rows.push(k);
        }
    }
    BlockStructure { var_pos, blocks, local_rows, coupling_rows }
}

/// Block-diagonal + low-rank Newton system.
struct NewtonWorkspace {
    factors: Vec<Cholesky<f64, nalgebra::Dyn>>,
}

impl NewtonWorkspace {
    /// Solve `B x = r` in place using the per-block factors.
    fn solve_block_diag(&self, structure: &BlockStructure, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; r.len()];
        for (b, members) in structure.blocks.iter().enumerate() {
            let mut rhs = DVector::zeros(members.len());
            for (off, &v) in members.iter().enumerate() {
                rhs[off] = r[v];
            }
            let sol = self.factors[b].solve(&rhs);
            for (off, &v) in members.iter().enumerate() {
                out[v] = sol[off];
            }
        }
        out
    }
}

fn factor_blocks(matrices: Vec<DMatrix<f64>>, relative_reg: f64) -> Option<NewtonWorkspace> {
    let mut factors = Vec::with_capacity(matrices.len());
    for mut mat in matrices {
        for d in 0..mat.nrows() {
            mat[(d, d)] += relative_reg * (1.0 + mat[(d, d)].abs());
        }
        match Cholesky::new(mat) {
            Some(ch) => factors.push(ch),
            None => return None,
        }
    }
    Some(NewtonWorkspace { factors })
}

struct Centering<'a> {
    obj: &'a dyn SmoothObjective,
    rows: Vec<&'a LinearInequality>,
    structure: BlockStructure,
    n: usize,
}

impl<'a> Centering<'a> {
    /// Barrier-scaled objective `f + phi / t` and its gradient; returns None
    /// if any slack is non-positive.
    fn value_grad(&self, t: f64, x: &[f64], grad: &mut [f64]) -> Option<f64> {
        let mut value = self.obj.value_grad(x, grad);
        for row in &self.rows {
            let slack = row.slack(x);
            if slack <= 0.0 {
                return None;
            }
            value -= slack.ln() / t;
            for &(j, c) in &row.coeffs {
                grad[j] += c / (t * slack);
            }
        }
        Some(value)
    }

    fn value_only(&self, t: f64, x: &[f64], scratch: &mut [f64]) -> Option<f64> {
        self.value_grad(t, x, scratch)
    }

    /// Assemble and factor the scaled Hessian `H(f) + H(phi) / t`, splitting
    /// coupling rows off for the Woodbury correction. Returns the workspace
    /// plus per-coupling-row weights.
    fn factor(
        &self,
        t: f64,
        x: &[f64],
        relative_reg: f64,
    ) -> Option<(NewtonWorkspace, Vec<f64>)> {
        let st = &self.structure;
        let mut matrices: Vec<DMatrix<f64>> =
            st.blocks.iter().map(|m| DMatrix::zeros(m.len(), m.len())).collect();
        {
            let var_pos = &st.var_pos;
            let mut add = |i: usize, j: usize, v: f64| {
                let (bi, oi) = var_pos[i];
                let (bj, oj) = var_pos[j];
                debug_assert_eq!(bi, bj, "objective Hessian entry crosses blocks");
                matrices[bi][(oi, oj)] += v;
                if oi != oj {
                    matrices[bi][(oj, oi)] += v;
                }
            };
            self.obj.add_hessian(x, &mut add);
        }
        for &k in &st.local_rows {
            let row = self.rows[k];
            let slack = row.slack(x);
            let w = 1.0 / (t * slack * slack);
            for a in 0..row.coeffs.len() {
                let (ja, ca) = row.coeffs[a];
                let (b, oa) = st.var_pos[ja];
                for bidx in a..row.coeffs.len() {
                    let (jb, cb) = row.coeffs[bidx];
                    let ob = st.var_pos[jb].1;
                    let v = w * ca * cb;
                    matrices[b][(oa, ob)] += v;
                    if oa != ob {
                        matrices[b][(ob, oa)] += v;
                    }
                }
            }
        }
        let mut weights = Vec::with_capacity(st.coupling_rows.len());
        for &k in &st.coupling_rows {
            let slack = self.rows[k].slack(x);
            weights.push(1.0 / (t * slack * slack));
        }
        factor_blocks(matrices, relative_reg).map(|ws| (ws, weights))
    }

    /// Newton direction for gradient `g`: solves `(B + U W U^T) d = -g`.
    fn direction(&self, ws: &NewtonWorkspace, weights: &[f64], g: &[f64]) -> Vec<f64> {
        let st = &self.structure;
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let v = ws.solve_block_diag(st, &neg_g);
        let k = st.coupling_rows.len();
        if k == 0 {
            return v;
        }
        // Z = B^-1 U, with U's columns the coupling rows' coefficient vectors.
        let mut z_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
        for &rk in &st.coupling_rows {
            let mut u = vec![0.0; self.n];
            for &(j, c) in &self.rows[rk].coeffs {
                u[j] = c;
            }
            z_cols.push(ws.solve_block_diag(st, &u));
        }
        // W_small = diag(1/w) + U^T Z ; y = W_small^-1 U^T v.
        let mut small = DMatrix::zeros(k, k);
        let mut rhs = DVector::zeros(k);
        for a in 0..k {
            let row_a = self.rows[st.coupling_rows[a]];
            for b in 0..k {
                let mut dot = 0.0;
                for &(j, c) in &row_a.coeffs {
                    dot += c * z_cols[b][j];
                }
                small[(a, b)] += dot;
            }
            small[(a, a)] += 1.0 / weights[a];
            let mut dot = 0.0;
            for &(j, c) in &row_a.coeffs {
                dot += c * v[j];
            }
            rhs[a] = dot;
        }
        let y = small
            .lu()
            .solve(&rhs)
            .unwrap_or_else(|| DVector::zeros(k));
        let mut d = v;
        for b in 0..k {
            let yb = y[b];
            for j in 0..self.n {
                d[j] -= z_cols[b][j] * yb;
            }
        }
        d
    }

    /// Largest step along `d` keeping every slack positive.
    fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        let mut alpha: f64 = f64::INFINITY;
        for row in &self.rows {
            let mut adot = 0.0;
            for &(j, c) in &row.coeffs {
                adot += c * d[j];
            }
            if adot > 0.0 {
                alpha = alpha.min(row.slack(x) / adot);
            }
        }
        alpha
    }
}

/// Minimize a smooth convex objective over the constraint system's rows,
/// starting from a strictly feasible point, to duality gap `tol`.
pub fn minimize(
    obj: &dyn SmoothObjective,
    cons: &ConstraintSystem,
    start: &[f64],
    tol: f64,
) -> Result<InnerSolution> {
    minimize_traced(obj, cons, start, tol, BarrierOptions::default(), None)
}

/// As [`minimize`], recording `(stage, centering objective)` after every
/// accepted Newton step when a trace buffer is supplied.
pub fn minimize_traced(
    obj: &dyn SmoothObjective,
    cons: &ConstraintSystem,
    start: &[f64],
    tol: f64,
    options: BarrierOptions,
    mut trace: Option<&mut Vec<(usize, f64)>>,
) -> Result<InnerSolution> {
    let n = obj.dim();
    if cons.n_vars != n || start.len() != n {
        return Err(Error::invalid("objective, constraints, and start dimensions disagree"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if n == 0 {
        return Ok(InnerSolution {
            point: Vec::new(),
            objective_value: obj.value_grad(&[], &mut []),
            kkt_residual: 0.0,
            barrier_iterations: 0,
            final_barrier_weight: options.initial_weight,
        });
    }
    let rows: Vec<&LinearInequality> = cons.all_rows().collect();
    for row in &rows {
        if row.slack(start) <= 0.0 {
            return Err(Error::Infeasible(format!(
                "start point is not strictly feasible (row {:?} slack {:.3e})",
                row.kind,
                row.slack(start)
            )));
        }
    }
    let couplings = obj.hessian_couplings();
    let structure = build_blocks(n, &rows, &couplings, options.max_block_size);
    let centering = Centering { obj, rows, structure, n };
    let m = centering.rows.len() as f64;

    let mut x = start.to_vec();
    let mut grad = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut total_newton = 0usize;
    let mut t = options.initial_weight.max(1.0);

    for _stage in 0..options.max_stages {
        let stage = _stage;
        // Centering at fixed t.
        let mut reg = 1e-10;
        for _iter in 0..options.max_newton_per_stage {
            let value = centering.value_grad(t, &x, &mut grad).ok_or_else(|| {
                Error::NumericalFailure {
                    message: "iterate left the feasible interior".into(),
                    barrier_weight: t,
                    newton_iterations: total_newton,
                    decrement: f64::NAN,
                }
            })?;
            if !value.is_finite() {
                return Err(Error::NumericalFailure {
                    message: "centering objective is not finite".into(),
                    barrier_weight: t,
                    newton_iterations: total_newton,
                    decrement: f64::NAN,
                });
            }
            // Factor, escalating regularization if the Hessian is numerically
            // indefinite.
            let mut factored = centering.factor(t, &x, reg);
            while factored.is_none() && reg < 1e-2 {
                reg *= 1e4;
                factored = centering.factor(t, &x, reg);
            }
            let (ws, weights) = factored.ok_or_else(|| Error::NumericalFailure {
                message: "Hessian factorization failed".into(),
                barrier_weight: t,
                newton_iterations: total_newton,
                decrement: f64::NAN,
            })?;
            let d = centering.direction(&ws, &weights, &grad);
            let lambda_sq: f64 = -grad.iter().zip(&d).map(|(g, d)| g * d).sum::<f64>();
            if !lambda_sq.is_finite() {
                return Err(Error::NumericalFailure {
                    message: "Newton decrement is not finite".into(),
                    barrier_weight: t,
                    newton_iterations: total_newton,
                    decrement: lambda_sq,
                });
            }
            if lambda_sq <= 2e-10 * (1.0 + value.abs()) {
                break;
            }
            // Backtracking with the feasibility cap.
            let alpha_cap = centering.max_step(&x, &d);
            let mut alpha = (0.99 * alpha_cap).min(1.0);
            let mut accepted = false;
            for _ in 0..60 {
                if alpha < 1e-16 {
                    break;
                }
                let cand: Vec<f64> =
                    x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
                if let Some(cand_val) = centering.value_only(t, &cand, &mut scratch) {
                    if cand_val <= value - 0.01 * alpha * lambda_sq {
                        x = cand;
                        total_newton += 1;
                        if let Some(tr) = trace.as_deref_mut() {
                            tr.push((stage, cand_val));
                        }
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // Progress is below floating-point resolution; accept the
                // current center if the decrement is small, else fail.
                if lambda_sq <= 1e-5 * (1.0 + value.abs()) {
                    break;
                }
                return Err(Error::NumericalFailure {
                    message: "line search stalled".into(),
                    barrier_weight: t,
                    newton_iterations: total_newton,
                    decrement: lambda_sq,
                });
            }
        }
        if m / t <= tol {
            break;
        }
        t *= 10.0;
    }

    if m / t > tol {
        return Err(Error::NumericalFailure {
            message: "barrier stage cap reached before gap target".into(),
            barrier_weight: t,
            newton_iterations: total_newton,
            decrement: m / t,
        });
    }

    // Stationarity residual with duals 1/(t * slack): exactly the scaled
    // centering gradient.
    let _ = centering.value_grad(t, &x, &mut grad);
    let kkt = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
    let objective_value = obj.value_grad(&x, &mut scratch);
    Ok(InnerSolution {
        point: x,
        objective_value,
        kkt_residual: kkt,
        barrier_iterations: total_newton,
        final_barrier_weight: t,
    })
}

/// Linear phase-I objective: minimize the violation bound `tau` (the last
/// coordinate of the extended variable vector).
struct PhaseOne {
    n_ext: usize,
}

impl SmoothObjective for PhaseOne {
    fn dim(&self) -> usize {
        self.n_ext
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        grad[self.n_ext - 1] = 1.0;
        x[self.n_ext - 1]
    }

    fn hessian_couplings(&self) -> Vec<Vec<usize>> {
        Vec::new()
    }

    fn add_hessian(&self, _x: &[f64], _add: &mut dyn FnMut(usize, usize, f64)) {}
}

/// Find a strictly feasible point of the system, or report infeasibility.
///
/// Pure box systems resolve to the box midpoint directly; otherwise a
/// phase-I program minimizes the worst violation until it is safely
/// negative.
pub fn find_interior_point(cons: &ConstraintSystem) -> Result<Vec<f64>> {
    let n = cons.n_vars;
    let rows: Vec<&LinearInequality> = cons.all_rows().collect();

    // Per-variable bounds implied by single-coefficient rows.
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    for row in &rows {
        if let [(j, c)] = row.coeffs[..] {
            if c > 0.0 {
                hi[j] = hi[j].min(row.rhs / c);
            } else if c < 0.0 {
                lo[j] = lo[j].max(row.rhs / c);
            }
        }
    }
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = match (lo[j].is_finite(), hi[j].is_finite()) {
            (true, true) => {
                if lo[j] >= hi[j] {
                    return Err(Error::Infeasible(format!(
                        "variable {j} box is empty: [{}, {}]",
                        lo[j], hi[j]
                    )));
                }
                0.5 * (lo[j] + hi[j])
            }
            (true, false) => lo[j] + 1.0,
            (false, true) => hi[j] - 1.0,
            (false, false) => 0.0,
        };
    }
    let scale = rows.iter().map(|r| r.rhs.abs()).fold(1.0f64, f64::max);
    let delta = 1e-6 * scale;
    if rows.iter().all(|r| r.slack(&x) >= delta) {
        return Ok(x);
    }

    // Phase I over (x, tau): every row becomes a.x - tau <= rhs, plus
    // synthetic bounds keeping the search region compact.
    let n_ext = n + 1;
    let radius = 1e4 * scale;
    let mut ext_rows: Vec<LinearInequality> = Vec::with_capacity(rows.len() + 2 * n + 1);
    for row in &rows {
        let mut coeffs = row.coeffs.clone();
        coeffs.push((n, -1.0));
        ext_rows.push(LinearInequality { coeffs, rhs: row.rhs, kind: row.kind });
    }
    for j in 0..n {
        let b_lo = if lo[j].is_finite() { lo[j] - radius } else { -radius };
        let b_hi = if hi[j].is_finite() { hi[j] + radius } else { radius };
        ext_rows.push(LinearInequality {
            coeffs: vec![(j, 1.0)],
            rhs: b_hi,
            kind: crate::reform::ConstraintKind::C5b,
        });
        ext_rows.push(LinearInequality {
            coeffs: vec![(j, -1.0)],
            rhs: -b_lo,
            kind: crate::reform::ConstraintKind::C5b,
        });
    }
    // tau bounded below so the barrier subproblem stays bounded.
    ext_rows.push(LinearInequality {
        coeffs: vec![(n, -1.0)],
        rhs: 2.0 * (1.0 + scale),
        kind: crate::reform::ConstraintKind::C5b,
    });
    let ext = ConstraintSystem { n_vars: n_ext, rows: ext_rows, bound_rows: Vec::new() };

    let worst = rows.iter().map(|r| -r.slack(&x)).fold(f64::NEG_INFINITY, f64::max);
    let mut start = x.clone();
    start.push(worst + 1.0 + scale * 1e-3);
    let objective = PhaseOne { n_ext };
    let sol = minimize(&objective, &ext, &start, 1e-3 * scale.max(1.0))?;
    let tau = sol.point[n];
    let candidate = &sol.point[..n];
    if tau < -delta && rows.iter().all(|r| r.slack(candidate) > 0.0) {
        return Ok(candidate.to_vec());
    }
    Err(Error::Infeasible(format!(
        "phase-I could not certify a strictly feasible point (best violation bound {tau:.3e})"
    )))
}
