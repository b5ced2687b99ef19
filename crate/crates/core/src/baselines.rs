//! Reference schemes: a brute-force grid oracle, the half-duplex scheme, and
//! the decoupled two-stage scheme.
//!
//! The oracle enumerates every subcarrier assignment satisfying the
//! one-pair-per-subcarrier rule together with grid-restricted powers,
//! rejecting partial enumerations that violate the power budgets and pruning
//! with an admissible value bound, so the returned allocation is exactly
//! optimal over the grid. The baselines reuse the SCA machinery on
//! restricted slot structures.

use crate::error::{Error, Result};
use crate::model::{
    check_feasibility, subcarrier_utility, system_objective, Allocation, ProblemInstance,
};
use crate::reform::{DcProgram, SlotDesc};
use crate::sca::{
    allocation_from_slots, round_and_refine_flat, solve_lifted, SolveReport, SolverConfig,
};

/// Power discretization for the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerGrid {
    pub levels_per_variable: usize,
    pub spacing: GridSpacing,
    pub includes_zero: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridSpacing {
    Linear,
    /// Geometric levels spanning four decades below the budget. Exponents
    /// live on the dyadic lattice `k / levels`, so doubling
    /// `levels_per_variable` refines a grid into a superset of itself.
    Logarithmic,
}

/// Span of the logarithmic grid in natural log units (four decades).
const LOG_GRID_SPAN: f64 = 9.210340371976184;

impl Default for PowerGrid {
    fn default() -> Self {
        Self { levels_per_variable: 32, spacing: GridSpacing::Logarithmic, includes_zero: true }
    }
}

impl PowerGrid {
    pub fn validate(&self) -> Result<()> {
        if self.levels_per_variable < 2 {
            return Err(Error::invalid("grid needs at least 2 levels"));
        }
        Ok(())
    }

    /// Grid values in ascending order (zero first when included, budget last).
    pub fn levels(&self, budget: f64) -> Vec<f64> {
        let l = self.levels_per_variable;
        let mut out = Vec::with_capacity(l + 1);
        if self.includes_zero {
            out.push(0.0);
        }
        match self.spacing {
            GridSpacing::Linear => {
                for k in 1..=l {
                    out.push(budget * k as f64 / l as f64);
                }
            }
            GridSpacing::Logarithmic => {
                for k in (0..l).rev() {
                    out.push(budget * (-LOG_GRID_SPAN * k as f64 / l as f64).exp());
                }
            }
        }
        out
    }

    /// Multiplicative step of the logarithmic spacing (1 for linear grids).
    pub fn log_step(&self) -> f64 {
        match self.spacing {
            GridSpacing::Linear => 1.0,
            GridSpacing::Logarithmic => (LOG_GRID_SPAN / self.levels_per_variable as f64).exp(),
        }
    }
}

/// Work limits for the oracle enumeration.
#[derive(Debug, Clone, Copy)]
pub struct OracleCaps {
    /// Upfront refusal threshold on the raw enumeration size estimate
    /// `(K J + 1)^N_F * levels^(2 N_F)`.
    pub raw_estimate_cap: f64,
    /// Hard cap on search nodes actually visited.
    pub node_cap: u64,
}

impl Default for OracleCaps {
    fn default() -> Self {
        Self { raw_estimate_cap: 1e18, node_cap: 200_000_000 }
    }
}

/// Raw enumeration size of an instance on a grid, before filtering/pruning.
pub fn enumeration_estimate(inst: &ProblemInstance, grid: &PowerGrid) -> f64 {
    let n = inst.n_subcarriers() as f64;
    let pairs = (inst.n_dl() * inst.n_ul()) as f64;
    let levels = (grid.levels_per_variable + usize::from(grid.includes_zero)) as f64;
    (pairs + 1.0).powf(n) * levels.powf(2.0 * n)
}

/// Grid-optimal allocation with its certified objective.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub allocation: Allocation,
    pub objective: f64,
    pub nodes_visited: u64,
    /// Upper bound on how far a continuous optimum can exceed `objective`
    /// (grid restriction slack).
    pub grid_slack_bound: f64,
}

#[derive(Debug, Clone, Copy)]
struct SubOption {
    /// None = leave the subcarrier unassigned.
    slot: Option<(usize, usize)>,
    p: f64,
    q: f64,
    value: f64,
}

/// Drop options dominated within the same slot: another option at least as
/// good in value using no more DL and no more UL power.
fn pareto_filter(mut options: Vec<(usize, usize, SubOption)>) -> Vec<SubOption> {
    // (p_idx, q_idx, option); indices ascending in power.
    options.sort_by(|a, b| {
        (a.0, a.1)
            .cmp(&(b.0, b.1))
            .then(b.2.value.partial_cmp(&a.2.value).unwrap_or(std::cmp::Ordering::Equal))
    });
    let n_q = options.iter().map(|o| o.1).max().map_or(0, |m| m + 1);
    let mut best_upto = vec![f64::NEG_INFINITY; n_q];
    let mut keep = Vec::new();
    let mut i = 0;
    while i < options.len() {
        // Process one p-level group against the state of strictly smaller p.
        let p_idx = options[i].0;
        let group_end = options[i..].iter().position(|o| o.0 != p_idx).map_or(options.len(), |k| i + k);
        for opt in &options[i..group_end] {
            let prefix = best_upto[..=opt.1].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if opt.2.value > prefix {
                keep.push(opt.2);
            }
        }
        for opt in &options[i..group_end] {
            if opt.2.value > best_upto[opt.1] {
                best_upto[opt.1] = opt.2.value;
            }
        }
        i = group_end;
    }
    keep
}

/// Best achievable value of one slot under caps on both powers: a 2-D
/// prefix-max over the level grid.
struct SlotBound {
    ul_user: usize,
    p_levels: Vec<f64>,
    q_levels: Vec<f64>,
    /// prefix_max[pi * q_levels.len() + qi] = max value with p' <= p_levels[pi],
    /// q' <= q_levels[qi].
    prefix_max: Vec<f64>,
}

impl SlotBound {
    fn query(&self, dl_budget: f64, ul_budgets: &[f64]) -> f64 {
        let pi = largest_at_most(&self.p_levels, dl_budget);
        let qi = largest_at_most(&self.q_levels, ul_budgets[self.ul_user]);
        match (pi, qi) {
            (Some(pi), Some(qi)) => self.prefix_max[pi * self.q_levels.len() + qi],
            _ => 0.0,
        }
    }
}

fn largest_at_most(levels: &[f64], cap: f64) -> Option<usize> {
    // Levels ascend; tolerate the usual float dust on the cap.
    let cap = cap + 1e-15;
    if levels.is_empty() || levels[0] > cap {
        return None;
    }
    let mut lo = 0;
    let mut hi = levels.len() - 1;
    while lo < hi {
        let mid = (lo + hi + 1) / 2;
        if levels[mid] <= cap {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Some(lo)
}

struct SubTable {
    sub: usize,
    /// Options sorted by value descending.
    options: Vec<SubOption>,
    slot_bounds: Vec<SlotBound>,
    /// `max_opt (value - lambda . usage)` for the precomputed price vector.
    priced_max: f64,
}

impl SubTable {
    /// Admissible cap on this subcarrier's value given remaining budgets
    /// (each slot may use them fully; unassigned contributes zero).
    fn box_bound(&self, dl_budget: f64, ul_budgets: &[f64]) -> f64 {
        self.slot_bounds
            .iter()
            .map(|sb| sb.query(dl_budget, ul_budgets))
            .fold(0.0, f64::max)
    }
}

/// Budget prices making the per-subcarrier decoupled bound tight: iterate
/// multiplicative subgradient steps on the total unclipped demand.
fn equilibrium_prices(tables: &[SubTable], p_budget: f64, ul_budgets: &[f64]) -> (f64, Vec<f64>) {
    let n = tables.len().max(1) as f64;
    let mut lam_dl = n / p_budget.max(1e-30);
    let mut lam_ul: Vec<f64> = ul_budgets.iter().map(|&b| n / b.max(1e-30)).collect();
    for round in 0..60 {
        let mut dl_used = 0.0;
        let mut ul_used = vec![0.0; ul_budgets.len()];
        for table in tables {
            let mut best = (0.0f64, 0.0f64, None::<usize>, 0.0f64);
            for opt in &table.options {
                let lam_q = opt.slot.map_or(0.0, |(_, r)| lam_ul[r]);
                let score = opt.value - lam_dl * opt.p - lam_q * opt.q;
                if score > best.0 {
                    best = (score, opt.p, opt.slot.map(|(_, r)| r), opt.q);
                }
            }
            dl_used += best.1;
            if let Some(r) = best.2 {
                ul_used[r] += best.3;
            }
        }
        let step = 1.0 / (1.0 + round as f64 / 10.0);
        let update = |price: &mut f64, used: f64, budget: f64| {
            let ratio = ((used / budget.max(1e-30)).max(1e-3)).min(1e3);
            *price *= ratio.powf(step).max(1e-6);
        };
        update(&mut lam_dl, dl_used, p_budget);
        for r in 0..ul_budgets.len() {
            update(&mut lam_ul[r], ul_used[r], ul_budgets[r]);
        }
    }
    (lam_dl, lam_ul)
}

struct OracleSearch<'a> {
    tables: &'a [SubTable],
    ul_budgets: &'a [f64],
    /// Dual prices for the Lagrangian bound.
    lam_dl: f64,
    lam_ul: Vec<f64>,
    /// Suffix sums of `priced_max` from each depth.
    priced_suffix: Vec<f64>,
    node_cap: u64,
    nodes: u64,
    best_value: f64,
    best_choice: Vec<usize>,
    choice: Vec<usize>,
}

impl OracleSearch<'_> {
    fn run(&mut self, depth: usize, dl_left: f64, ul_left: &mut [f64], acc: f64) -> Result<()> {
        if depth == self.tables.len() {
            // Options are lex-ordered within equal values, so comparing
            // option indices settles ties deterministically.
            let better = acc > self.best_value
                || (acc == self.best_value && self.choice < self.best_choice);
            if better {
                self.best_value = acc;
                self.best_choice = self.choice.clone();
            }
            return Ok(());
        }
        if self.bound_from(depth, acc, dl_left, ul_left) <= self.best_value {
            return Ok(());
        }
        let table = &self.tables[depth];
        for (idx, opt) in table.options.iter().enumerate() {
            self.nodes += 1;
            if self.nodes > self.node_cap {
                return Err(Error::SizeCapExceeded {
                    required: self.nodes as f64,
                    cap: self.node_cap as f64,
                });
            }
            if opt.p > dl_left + 1e-15 {
                continue;
            }
            if let Some((_, r)) = opt.slot {
                if opt.q > ul_left[r] + 1e-15 {
                    continue;
                }
            }
            // Options are value-sorted, so once even this option plus the
            // downstream bound cannot win, no later sibling can either.
            let sibling_bound = self.bound_from(depth + 1, acc + opt.value, dl_left, ul_left);
            if sibling_bound < self.best_value {
                break;
            }
            self.choice[depth] = idx;
            if let Some((_, r)) = opt.slot {
                ul_left[r] -= opt.q;
                self.run(depth + 1, dl_left - opt.p, ul_left, acc + opt.value)?;
                ul_left[r] += opt.q;
            } else {
                self.run(depth + 1, dl_left - opt.p, ul_left, acc + opt.value)?;
            }
        }
        self.choice[depth] = usize::MAX;
        Ok(())
    }

    /// Two admissible bounds on the subcarriers from `start` on: each takes
    /// the remaining budgets as if alone (box bound), or weak duality at the
    /// equilibrium prices (tight where the budgets are finely shared).
    fn bound_from(&self, start: usize, acc: f64, dl_left: f64, ul_left: &[f64]) -> f64 {
        let mut box_bound = acc;
        for table in &self.tables[start..] {
            box_bound += table.box_bound(dl_left, ul_left);
        }
        let mut priced = acc + self.priced_suffix[start] + self.lam_dl * dl_left;
        for (r, &left) in ul_left.iter().enumerate() {
            priced += self.lam_ul[r] * left;
        }
        box_bound.min(priced)
    }
}

/// Exhaustively optimal allocation over grid-restricted powers.
pub fn brute_force_oracle(inst: &ProblemInstance, grid: &PowerGrid) -> Result<OracleOutcome> {
    brute_force_oracle_with_caps(inst, grid, &OracleCaps::default())
}

pub fn brute_force_oracle_with_caps(
    inst: &ProblemInstance,
    grid: &PowerGrid,
    caps: &OracleCaps,
) -> Result<OracleOutcome> {
    grid.validate()?;
    let estimate = enumeration_estimate(inst, grid);
    if estimate > caps.raw_estimate_cap {
        return Err(Error::SizeCapExceeded { required: estimate, cap: caps.raw_estimate_cap });
    }

    let p_levels = grid.levels(inst.p_max_dl);
    let q_levels_by_r: Vec<Vec<f64>> =
        (0..inst.n_ul()).map(|r| grid.levels(inst.p_max_ul[r])).collect();

    let mut tables = Vec::with_capacity(inst.n_subcarriers());
    for i in 0..inst.n_subcarriers() {
        let mut options = vec![SubOption { slot: None, p: 0.0, q: 0.0, value: 0.0 }];
        let mut slot_bounds = Vec::with_capacity(inst.n_dl() * inst.n_ul());
        for m in 0..inst.n_dl() {
            for r in 0..inst.n_ul() {
                let q_levels = &q_levels_by_r[r];
                let mut slot_options = Vec::with_capacity(p_levels.len() * q_levels.len());
                let mut prefix_max = vec![f64::NEG_INFINITY; p_levels.len() * q_levels.len()];
                for (pi, &p) in p_levels.iter().enumerate() {
                    for (qi, &q) in q_levels.iter().enumerate() {
                        let value = subcarrier_utility(inst, i, m, r, p, q)?;
                        slot_options.push((pi, qi, SubOption { slot: Some((m, r)), p, q, value }));
                        let mut best = value;
                        if pi > 0 {
                            best = best.max(prefix_max[(pi - 1) * q_levels.len() + qi]);
                        }
                        if qi > 0 {
                            best = best.max(prefix_max[pi * q_levels.len() + qi - 1]);
                        }
                        prefix_max[pi * q_levels.len() + qi] = best;
                    }
                }
                options.extend(pareto_filter(slot_options));
                slot_bounds.push(SlotBound {
                    ul_user: r,
                    p_levels: p_levels.clone(),
                    q_levels: q_levels.clone(),
                    prefix_max,
                });
            }
        }
        // Deterministic exploration order: value descending, then the
        // lexicographically smallest (slot, powers).
        options.sort_by(|a, b| {
            b.value
                .partial_cmp(&a.value)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| {
                    let ka = (a.slot.map_or((usize::MAX, usize::MAX), |s| s), a.p.to_bits(), a.q.to_bits());
                    let kb = (b.slot.map_or((usize::MAX, usize::MAX), |s| s), b.p.to_bits(), b.q.to_bits());
                    ka.cmp(&kb)
                })
        });
        tables.push(SubTable { sub: i, options, slot_bounds, priced_max: 0.0 });
    }
    // Search harder subcarriers first (higher stand-alone maxima).
    tables.sort_by(|a, b| {
        b.box_bound(inst.p_max_dl, &inst.p_max_ul)
            .partial_cmp(&a.box_bound(inst.p_max_dl, &inst.p_max_ul))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.sub.cmp(&b.sub))
    });
    let (lam_dl, lam_ul) = equilibrium_prices(&tables, inst.p_max_dl, &inst.p_max_ul);
    for table in tables.iter_mut() {
        table.priced_max = table
            .options
            .iter()
            .map(|o| o.value - lam_dl * o.p - o.slot.map_or(0.0, |(_, r)| lam_ul[r]) * o.q)
            .fold(0.0, f64::max);
    }
    let n = tables.len();
    let mut priced_suffix = vec![0.0; n + 1];
    for depth in (0..n).rev() {
        priced_suffix[depth] = priced_suffix[depth + 1] + tables[depth].priced_max;
    }

    let mut search = OracleSearch {
        tables: &tables,
        ul_budgets: &inst.p_max_ul,
        lam_dl,
        lam_ul,
        priced_suffix,
        node_cap: caps.node_cap,
        nodes: 0,
        best_value: f64::NEG_INFINITY,
        best_choice: vec![0; n],
        choice: vec![usize::MAX; n],
    };
    let mut ul_left = search.ul_budgets.to_vec();
    search.run(0, inst.p_max_dl, &mut ul_left, 0.0)?;

    let mut allocation = Allocation::zero(inst);
    for (table, &idx) in tables.iter().zip(&search.best_choice) {
        let opt = table.options[idx];
        if let Some((m, r)) = opt.slot {
            allocation.s[[table.sub, m, r]] = 1;
            allocation.p[[table.sub, m]] = opt.p;
            allocation.q[[table.sub, r]] = opt.q;
        }
    }
    let objective = system_objective(inst, &allocation)?;
    Ok(OracleOutcome {
        allocation,
        objective,
        nodes_visited: search.nodes,
        grid_slack_bound: grid_slack_bound(inst, grid),
    })
}

/// Bound on the continuous optimum's excess over the grid optimum: per
/// subcarrier, one multiplicative snap-down of each own power plus the worst
/// value a below-grid power could have carried.
pub fn grid_slack_bound(inst: &ProblemInstance, grid: &PowerGrid) -> f64 {
    let step = grid.log_step();
    let w_max = inst.w.iter().cloned().fold(0.0, f64::max);
    let mu_max = inst.mu.iter().cloned().fold(0.0, f64::max);
    let snap_loss = (w_max + mu_max) * step.ln() / std::f64::consts::LN_2;
    let min_p = grid
        .levels(inst.p_max_dl)
        .iter()
        .cloned()
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut floor_loss: f64 = 0.0;
    for i in 0..inst.n_subcarriers() {
        for m in 0..inst.n_dl() {
            floor_loss =
                floor_loss.max(inst.w[m] * (1.0 + inst.gains.h[[i, m]] * min_p).log2());
        }
        for r in 0..inst.n_ul() {
            let min_q = grid
                .levels(inst.p_max_ul[r])
                .iter()
                .cloned()
                .filter(|&v| v > 0.0)
                .fold(f64::INFINITY, f64::min);
            floor_loss =
                floor_loss.max(inst.mu[r] * (1.0 + inst.gains.g[[i, r]] * min_q).log2());
        }
    }
    inst.n_subcarriers() as f64 * (snap_loss + floor_loss)
}

fn hd_slots(inst: &ProblemInstance) -> Vec<Vec<SlotDesc>> {
    (0..inst.n_subcarriers())
        .map(|i| {
            let mut slots = Vec::with_capacity(inst.n_dl() + inst.n_ul());
            for m in 0..inst.n_dl() {
                slots.push(SlotDesc {
                    dl: Some(m),
                    ul: None,
                    w: inst.w[m],
                    mu: 0.0,
                    h: inst.gains.h[[i, m]],
                    g: 0.0,
                    f_cci: 0.0,
                    l_si: 0.0,
                });
            }
            for r in 0..inst.n_ul() {
                slots.push(SlotDesc {
                    dl: None,
                    ul: Some(r),
                    w: 0.0,
                    mu: inst.mu[r],
                    h: 0.0,
                    g: inst.gains.g[[i, r]],
                    f_cci: 0.0,
                    l_si: 0.0,
                });
            }
            slots
        })
        .collect()
}

fn report_for(
    inst: &ProblemInstance,
    prog: &DcProgram,
    descent: crate::sca::ScaDescent,
    allocation: Allocation,
) -> Result<SolveReport> {
    let weighted_throughput = system_objective(inst, &allocation)?;
    let feasibility = check_feasibility(inst, &allocation, 1e-6)?;
    Ok(SolveReport {
        final_allocation: allocation,
        lifted_trajectory_objectives: descent.trajectory,
        iterations: descent.records,
        iterations_used: descent.iterations_used,
        converged: descent.converged,
        max_binary_deviation: prog.max_binary_deviation(&descent.x),
        weighted_throughput,
        feasibility,
    })
}

/// Half-duplex scheme: each subcarrier carries one DL user or one UL user,
/// never both, so neither self- nor co-channel interference arises. The
/// schedule and powers come from the same SCA machinery over
/// direction-exclusive slots. In the returned allocation a single-direction
/// subcarrier is encoded as a pair with the lowest partner index and zero
/// power in the inactive direction.
pub fn hd_baseline(inst: &ProblemInstance, config: &SolverConfig) -> Result<SolveReport> {
    let prog = DcProgram::lifted(
        inst.n_subcarriers(),
        inst.n_ul(),
        hd_slots(inst),
        inst.p_max_dl,
        inst.p_max_ul.clone(),
    );
    let descent = solve_lifted(&prog, config)?;
    let refined = round_and_refine_flat(&prog, &descent.x, config)?;
    let allocation = allocation_from_slots(&prog, inst, &refined.chosen);
    report_for(inst, &prog, descent, allocation)
}

/// Decoupled two-stage scheme: stage 1 assigns DL users and powers ignoring
/// the uplink entirely; stage 2 assigns UL users and powers on the fixed DL
/// power profile, treating the DL-induced self-interference as static noise.
/// The union is evaluated as a full-duplex allocation, so the co-channel
/// interference stage 2 ignored still degrades the reported throughput.
pub fn decoupled_baseline(inst: &ProblemInstance, config: &SolverConfig) -> Result<SolveReport> {
    // Stage 1: downlink-only slots.
    let dl_slots: Vec<Vec<SlotDesc>> = hd_slots(inst)
        .into_iter()
        .map(|slots| slots.into_iter().filter(|s| s.dl.is_some()).collect())
        .collect();
    let dl_prog = DcProgram::lifted(
        inst.n_subcarriers(),
        inst.n_ul(),
        dl_slots,
        inst.p_max_dl,
        inst.p_max_ul.clone(),
    );
    let dl_descent = solve_lifted(&dl_prog, config)?;
    let dl_refined = round_and_refine_flat(&dl_prog, &dl_descent.x, config)?;
    let dl_alloc = allocation_from_slots(&dl_prog, inst, &dl_refined.chosen);
    let dl_power_profile: Vec<f64> =
        (0..inst.n_subcarriers()).map(|i| dl_alloc.p.row(i).sum()).collect();

    // Stage 2: uplink-only slots with the SI of the fixed DL profile folded
    // into the effective gain.
    let ul_slots: Vec<Vec<SlotDesc>> = (0..inst.n_subcarriers())
        .map(|i| {
            (0..inst.n_ul())
                .map(|r| SlotDesc {
                    dl: None,
                    ul: Some(r),
                    w: 0.0,
                    mu: inst.mu[r],
                    h: 0.0,
                    g: inst.gains.g[[i, r]]
                        / (1.0 + inst.rho * inst.gains.l_si[i] * dl_power_profile[i]),
                    f_cci: 0.0,
                    l_si: 0.0,
                })
                .collect()
        })
        .collect();
    let ul_prog = DcProgram::lifted(
        inst.n_subcarriers(),
        inst.n_ul(),
        ul_slots,
        inst.p_max_dl,
        inst.p_max_ul.clone(),
    );
    let ul_descent = solve_lifted(&ul_prog, config)?;
    let ul_refined = round_and_refine_flat(&ul_prog, &ul_descent.x, config)?;
    let ul_alloc = allocation_from_slots(&ul_prog, inst, &ul_refined.chosen);

    // Union of the two stages as a physical FD allocation.
    let mut allocation = Allocation::zero(inst);
    for i in 0..inst.n_subcarriers() {
        let dl_pair = dl_alloc.pair_on(i);
        let ul_pair = ul_alloc.pair_on(i);
        match (dl_pair, ul_pair) {
            (Some((m, _)), Some((_, r))) => {
                allocation.s[[i, m, r]] = 1;
                allocation.p[[i, m]] = dl_alloc.p[[i, m]];
                allocation.q[[i, r]] = ul_alloc.q[[i, r]];
            }
            (Some((m, _)), None) => {
                allocation.s[[i, m, 0]] = 1;
                allocation.p[[i, m]] = dl_alloc.p[[i, m]];
            }
            (None, Some((_, r))) => {
                allocation.s[[i, 0, r]] = 1;
                allocation.q[[i, r]] = ul_alloc.q[[i, r]];
            }
            (None, None) => {}
        }
    }
    let weighted_throughput = system_objective(inst, &allocation)?;
    let feasibility = check_feasibility(inst, &allocation, 1e-6)?;
    let mut trajectory = dl_descent.trajectory.clone();
    trajectory.extend(ul_descent.trajectory.iter().cloned());
    let mut iterations = dl_descent.records.clone();
    iterations.extend(ul_descent.records.iter().cloned());
    Ok(SolveReport {
        final_allocation: allocation,
        lifted_trajectory_objectives: trajectory,
        iterations,
        iterations_used: dl_descent.iterations_used + ul_descent.iterations_used,
        converged: dl_descent.converged && ul_descent.converged,
        max_binary_deviation: dl_prog
            .max_binary_deviation(&dl_descent.x)
            .max(ul_prog.max_binary_deviation(&ul_descent.x)),
        weighted_throughput,
        feasibility,
    })
}
