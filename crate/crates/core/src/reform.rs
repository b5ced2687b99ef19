//! Lifted reformulation: big-M product decomposition, assignment-variable
//! penalty, and the difference-of-convex split.
//!
//! The physical problem multiplies powers by binary indicators. Introducing
//! per-slot auxiliary powers `p~ = s * p`, `q~ = s * q` and the big-M
//! constraints C7-C14 removes the products; relaxing `s` to `[0, 1]` and
//! penalizing `eta * sum(s - s^2)` removes the integrality. The remaining
//! objective splits into convex parts
//!
//! ```text
//! F = sum -w log2(1 + H p~ + F q~) - mu log2(1 + G q~ + rho L p~)
//! G = sum -w log2(1 + F q~)        - mu log2(1 + rho L p~)
//! H = sum s          M = sum s^2
//! ```
//!
//! with `F - G` equal to the negative lifted utility, so each outer iteration
//! minimizes `F` plus the linearizations of `G` and `M` around the current
//! anchor — a convex program over the constraint polytope.
//!
//! Variables are flattened as `[p~ | q~ | s | p | q]`, each block ordered
//! subcarrier-major with the DL index before the UL index (for the joint
//! problem: `(i, m, r)` with `i` outermost, `r` innermost).

use std::collections::BTreeSet;
use std::f64::consts::LN_2;
use std::ops::Range;

use ndarray::{Array2, Array3};

use crate::convex::SmoothObjective;
use crate::error::{Error, Result};
use crate::model::{Allocation, ProblemInstance};

/// Constraint family labels, matching the scheduling problem's numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    /// Total DL power budget (over `p~`).
    C1,
    /// Raw DL power non-negativity.
    C2,
    /// Per-UL-user power budget (over `q~`).
    C3,
    /// Raw UL power non-negativity.
    C4,
    /// Relaxed assignment box `0 <= s <= 1`.
    C5b,
    /// At most one active slot per subcarrier.
    C6,
    /// `p~ <= P_dl * s`.
    C7,
    /// `p~ <= p`.
    C8,
    /// `p~ >= p - (1 - s) P_dl`.
    C9,
    /// `p~ >= 0`.
    C10,
    /// `q~ <= P_ul_r * s`.
    C11,
    /// `q~ <= q`.
    C12,
    /// `q~ >= 0`.
    C13,
    /// `q~ >= q - (1 - s) P_ul_r`.
    C14,
}

/// One linear inequality `sum coeffs . x <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInequality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub kind: ConstraintKind,
}

impl LinearInequality {
    /// Slack `rhs - a.x` (positive inside the feasible half-space).
    pub fn slack(&self, x: &[f64]) -> f64 {
        let mut dot = 0.0;
        for &(j, c) in &self.coeffs {
            dot += c * x[j];
        }
        self.rhs - dot
    }
}

/// The linear feasible set of the lifted problem.
///
/// `rows` holds exactly the labelled inequalities C1-C14. `bound_rows` holds
/// upper bounds on the raw power variables (`p <= P_dl`, `q <= P_ul_r`),
/// folded-in box bounds that keep the feasible set bounded along the raw
/// coordinates (the labelled rows leave them free from above, and the
/// objective does not touch them). Solvers must honor both lists.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub n_vars: usize,
    pub rows: Vec<LinearInequality>,
    pub bound_rows: Vec<LinearInequality>,
}

impl ConstraintSystem {
    pub fn all_rows(&self) -> impl Iterator<Item = &LinearInequality> {
        self.rows.iter().chain(self.bound_rows.iter())
    }

    pub fn n_barrier_rows(&self) -> usize {
        self.rows.len() + self.bound_rows.len()
    }

    /// Most negative slack over all rows (negative return = infeasible).
    pub fn min_slack(&self, x: &[f64]) -> f64 {
        self.all_rows().map(|r| r.slack(x)).fold(f64::INFINITY, f64::min)
    }
}

/// One candidate pairing on one subcarrier. `dl`/`ul` are user indices;
/// either may be absent (single-direction slot, as used by the baselines).
/// Gains belong to this slot's own links; `l_si` already includes `rho`.
#[derive(Debug, Clone, Copy)]
pub struct SlotDesc {
    pub dl: Option<usize>,
    pub ul: Option<usize>,
    pub w: f64,
    pub mu: f64,
    pub h: f64,
    pub g: f64,
    pub f_cci: f64,
    pub l_si: f64,
}

impl SlotDesc {
    /// Full-duplex pair slot (m, r) of the physical instance.
    pub fn pair(inst: &ProblemInstance, i: usize, m: usize, r: usize) -> Self {
        SlotDesc {
            dl: Some(m),
            ul: Some(r),
            w: inst.w[m],
            mu: inst.mu[r],
            h: inst.gains.h[[i, m]],
            g: inst.gains.g[[i, r]],
            f_cci: inst.gains.f[[i, r, m]],
            l_si: inst.rho * inst.gains.l_si[i],
        }
    }

    /// Lifted utility of this slot at auxiliary powers (tp, tq).
    pub fn utility(&self, tp: f64, tq: f64) -> f64 {
        let dl = self.w * (self.h * tp / (self.f_cci * tq + 1.0)).ln_1p();
        let ul = self.mu * (self.g * tq / (self.l_si * tp + 1.0)).ln_1p();
        (dl + ul) / LN_2
    }
}

/// A slot with its assigned variable indices.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SlotVars {
    pub sub: usize,
    pub desc: SlotDesc,
    pub tp: Option<usize>,
    pub tq: Option<usize>,
    /// Relaxed assignment variable; absent in power-only (frozen-schedule)
    /// programs, where the slot is unconditionally active.
    pub s: Option<usize>,
}

/// Values of the four convex pieces at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcParts {
    pub f: f64,
    pub g: f64,
    pub h: f64,
    pub m: f64,
}

impl DcParts {
    pub fn penalized(&self, eta: f64) -> f64 {
        self.f - self.g + eta * (self.h - self.m)
    }
}

/// A difference-of-convex program over lifted variables: slot list, budgets,
/// variable layout, and the linear feasible set.
#[derive(Debug, Clone)]
pub(crate) struct DcProgram {
    pub n_sub: usize,
    pub n_ul_users: usize,
    pub p_budget: f64,
    pub q_budgets: Vec<f64>,
    pub slots: Vec<SlotVars>,
    /// Slot index range per subcarrier.
    pub sub_ranges: Vec<Range<usize>>,
    /// Raw DL power variables: ((subcarrier, m), var index), sorted.
    pub praw: Vec<((usize, usize), usize)>,
    /// Raw UL power variables: ((subcarrier, r), var index), sorted.
    pub qraw: Vec<((usize, usize), usize)>,
    pub n_vars: usize,
    pub system: ConstraintSystem,
    /// False for power-only programs (schedule frozen, no s or raw vars).
    pub lifted: bool,
}

impl DcProgram {
    /// The joint full-duplex program: every (m, r) pair is a slot on every
    /// subcarrier.
    pub fn full_duplex(inst: &ProblemInstance) -> Self {
        let mut slots = Vec::with_capacity(inst.n_subcarriers());
        for i in 0..inst.n_subcarriers() {
            let mut per_sub = Vec::with_capacity(inst.n_dl() * inst.n_ul());
            for m in 0..inst.n_dl() {
                for r in 0..inst.n_ul() {
                    per_sub.push(SlotDesc::pair(inst, i, m, r));
                }
            }
            slots.push(per_sub);
        }
        Self::lifted(inst.n_subcarriers(), inst.n_ul(), slots, inst.p_max_dl, inst.p_max_ul.clone())
    }

    /// Build a lifted program from explicit per-subcarrier slot lists.
    pub fn lifted(
        n_sub: usize,
        n_ul_users: usize,
        slot_descs: Vec<Vec<SlotDesc>>,
        p_budget: f64,
        q_budgets: Vec<f64>,
    ) -> Self {
        assert_eq!(slot_descs.len(), n_sub);
        assert_eq!(q_budgets.len(), n_ul_users);
        let total_slots: usize = slot_descs.iter().map(|v| v.len()).sum();

        // Variable layout: [p~ | q~ | s | p_raw | q_raw].
        let n_tp: usize = slot_descs.iter().flatten().filter(|d| d.dl.is_some()).count();
        let n_tq: usize = slot_descs.iter().flatten().filter(|d| d.ul.is_some()).count();
        let mut next_tp = 0;
        let mut next_tq = n_tp;
        let mut next_s = n_tp + n_tq;

        let mut slots = Vec::with_capacity(total_slots);
        let mut sub_ranges = Vec::with_capacity(n_sub);
        let mut praw_keys = BTreeSet::new();
        let mut qraw_keys = BTreeSet::new();
        for (i, per_sub) in slot_descs.iter().enumerate() {
            let start = slots.len();
            for desc in per_sub {
                let tp = desc.dl.map(|m| {
                    praw_keys.insert((i, m));
                    let idx = next_tp;
                    next_tp += 1;
                    idx
                });
                let tq = desc.ul.map(|r| {
                    qraw_keys.insert((i, r));
                    let idx = next_tq;
                    next_tq += 1;
                    idx
                });
                let s = Some(next_s);
                next_s += 1;
                slots.push(SlotVars { sub: i, desc: *desc, tp, tq, s });
            }
            sub_ranges.push(start..slots.len());
        }

        let mut next = n_tp + n_tq + total_slots;
        let praw: Vec<((usize, usize), usize)> = praw_keys
            .into_iter()
            .map(|k| {
                let idx = next;
                next += 1;
                (k, idx)
            })
            .collect();
        let qraw: Vec<((usize, usize), usize)> = qraw_keys
            .into_iter()
            .map(|k| {
                let idx = next;
                next += 1;
                (k, idx)
            })
            .collect();
        let n_vars = next;

        let mut prog = DcProgram {
            n_sub,
            n_ul_users,
            p_budget,
            q_budgets,
            slots,
            sub_ranges,
            praw,
            qraw,
            n_vars,
            system: ConstraintSystem { n_vars, rows: Vec::new(), bound_rows: Vec::new() },
            lifted: true,
        };
        prog.system = prog.build_lifted_system();
        prog
    }

    /// Power-only program for a frozen schedule: one active slot per listed
    /// subcarrier, variables are just that slot's auxiliary powers.
    pub fn power_only(
        n_sub: usize,
        n_ul_users: usize,
        chosen: Vec<(usize, SlotDesc)>,
        p_budget: f64,
        q_budgets: Vec<f64>,
    ) -> Self {
        let mut next = 0;
        let mut slots = Vec::with_capacity(chosen.len());
        for &(sub, desc) in &chosen {
            let tp = desc.dl.map(|_| {
                let idx = next;
                next += 1;
                idx
            });
            let tq = desc.ul.map(|_| {
                let idx = next;
                next += 1;
                idx
            });
            slots.push(SlotVars { sub, desc, tp, tq, s: None });
        }
        let n_vars = next;

        let mut rows = Vec::new();
        let tp_all: Vec<(usize, f64)> =
            slots.iter().filter_map(|s| s.tp).map(|j| (j, 1.0)).collect();
        if !tp_all.is_empty() {
            rows.push(LinearInequality { coeffs: tp_all, rhs: p_budget, kind: ConstraintKind::C1 });
        }
        for r in 0..n_ul_users {
            let coeffs: Vec<(usize, f64)> = slots
                .iter()
                .filter(|s| s.desc.ul == Some(r))
                .filter_map(|s| s.tq)
                .map(|j| (j, 1.0))
                .collect();
            if !coeffs.is_empty() {
                rows.push(LinearInequality { coeffs, rhs: q_budgets[r], kind: ConstraintKind::C3 });
            }
        }
        for s in &slots {
            if let Some(j) = s.tp {
                rows.push(LinearInequality {
                    coeffs: vec![(j, -1.0)],
                    rhs: 0.0,
                    kind: ConstraintKind::C10,
                });
            }
            if let Some(j) = s.tq {
                rows.push(LinearInequality {
                    coeffs: vec![(j, -1.0)],
                    rhs: 0.0,
                    kind: ConstraintKind::C13,
                });
            }
        }

        let sub_ranges = Vec::new();
        DcProgram {
            n_sub,
            n_ul_users,
            p_budget,
            q_budgets,
            slots,
            sub_ranges,
            praw: Vec::new(),
            qraw: Vec::new(),
            n_vars,
            system: ConstraintSystem { n_vars, rows, bound_rows: Vec::new() },
            lifted: false,
        }
    }

    fn build_lifted_system(&self) -> ConstraintSystem {
        let mut rows = Vec::new();
        let p = self.p_budget;

        // C1: sum of all p~ within the BS budget.
        let tp_all: Vec<(usize, f64)> =
            self.slots.iter().filter_map(|s| s.tp).map(|j| (j, 1.0)).collect();
        if !tp_all.is_empty() {
            rows.push(LinearInequality { coeffs: tp_all, rhs: p, kind: ConstraintKind::C1 });
        }
        // C2: raw DL powers non-negative.
        for &(_, j) in &self.praw {
            rows.push(LinearInequality { coeffs: vec![(j, -1.0)], rhs: 0.0, kind: ConstraintKind::C2 });
        }
        // C3: per-UL-user budget over q~.
        for r in 0..self.n_ul_users {
            let coeffs: Vec<(usize, f64)> = self
                .slots
                .iter()
                .filter(|s| s.desc.ul == Some(r))
                .filter_map(|s| s.tq)
                .map(|j| (j, 1.0))
                .collect();
            if !coeffs.is_empty() {
                rows.push(LinearInequality { coeffs, rhs: self.q_budgets[r], kind: ConstraintKind::C3 });
            }
        }
        // C4: raw UL powers non-negative.
        for &(_, j) in &self.qraw {
            rows.push(LinearInequality { coeffs: vec![(j, -1.0)], rhs: 0.0, kind: ConstraintKind::C4 });
        }
        // C5b: 0 <= s <= 1.
        for slot in &self.slots {
            let j = slot.s.expect("lifted program has s vars");
            rows.push(LinearInequality { coeffs: vec![(j, -1.0)], rhs: 0.0, kind: ConstraintKind::C5b });
            rows.push(LinearInequality { coeffs: vec![(j, 1.0)], rhs: 1.0, kind: ConstraintKind::C5b });
        }
        // C6: at most one active slot per subcarrier.
        for range in &self.sub_ranges {
            let coeffs: Vec<(usize, f64)> =
                self.slots[range.clone()].iter().map(|s| (s.s.unwrap(), 1.0)).collect();
            if !coeffs.is_empty() {
                rows.push(LinearInequality { coeffs, rhs: 1.0, kind: ConstraintKind::C6 });
            }
        }
        // Big-M rows for the DL products.
        let praw_of = |sub: usize, m: usize| self.praw_var(sub, m);
        let qraw_of = |sub: usize, r: usize| self.qraw_var(sub, r);
        for slot in &self.slots {
            if let Some(tp) = slot.tp {
                let s = slot.s.unwrap();
                rows.push(LinearInequality {
                    coeffs: vec![(tp, 1.0), (s, -p)],
                    rhs: 0.0,
                    kind: ConstraintKind::C7,
                });
            }
        }
        for slot in &self.slots {
            if let (Some(tp), Some(m)) = (slot.tp, slot.desc.dl) {
                rows.push(LinearInequality {
                    coeffs: vec![(tp, 1.0), (praw_of(slot.sub, m), -1.0)],
                    rhs: 0.0,
                    kind: ConstraintKind::C8,
                });
            }
        }
        for slot in &self.slots {
            if let (Some(tp), Some(m)) = (slot.tp, slot.desc.dl) {
                let s = slot.s.unwrap();
                rows.push(LinearInequality {
                    coeffs: vec![(praw_of(slot.sub, m), 1.0), (tp, -1.0), (s, p)],
                    rhs: p,
                    kind: ConstraintKind::C9,
                });
            }
        }
        for slot in &self.slots {
            if let Some(tp) = slot.tp {
                rows.push(LinearInequality {
                    coeffs: vec![(tp, -1.0)],
                    rhs: 0.0,
                    kind: ConstraintKind::C10,
                });
            }
        }
        // Big-M rows for the UL products.
        for slot in &self.slots {
            if let (Some(tq), Some(r)) = (slot.tq, slot.desc.ul) {
                let s = slot.s.unwrap();
                rows.push(LinearInequality {
                    coeffs: vec![(tq, 1.0), (s, -self.q_budgets[r])],
                    rhs: 0.0,
                    kind: ConstraintKind::C11,
                });
            }
        }
        for slot in &self.slots {
            if let (Some(tq), Some(r)) = (slot.tq, slot.desc.ul) {
                rows.push(LinearInequality {
                    coeffs: vec![(tq, 1.0), (qraw_of(slot.sub, r), -1.0)],
                    rhs: 0.0,
                    kind: ConstraintKind::C12,
                });
            }
        }
        for slot in &self.slots {
            if let Some(tq) = slot.tq {
                rows.push(LinearInequality {
                    coeffs: vec![(tq, -1.0)],
                    rhs: 0.0,
                    kind: ConstraintKind::C13,
                });
            }
        }
        for slot in &self.slots {
            if let (Some(tq), Some(r)) = (slot.tq, slot.desc.ul) {
                let s = slot.s.unwrap();
                rows.push(LinearInequality {
                    coeffs: vec![(qraw_of(slot.sub, r), 1.0), (tq, -1.0), (s, self.q_budgets[r])],
                    rhs: self.q_budgets[r],
                    kind: ConstraintKind::C14,
                });
            }
        }

        // Raw upper bounds (folded box): keep the set bounded along raw axes.
        let mut bound_rows = Vec::new();
        for &(_, j) in &self.praw {
            bound_rows.push(LinearInequality { coeffs: vec![(j, 1.0)], rhs: p, kind: ConstraintKind::C2 });
        }
        for &((_, r), j) in &self.qraw {
            bound_rows.push(LinearInequality {
                coeffs: vec![(j, 1.0)],
                rhs: self.q_budgets[r],
                kind: ConstraintKind::C4,
            });
        }

        ConstraintSystem { n_vars: self.n_vars, rows, bound_rows }
    }

    /// Evaluate the four convex pieces at a flat point.
    pub fn eval_parts(&self, x: &[f64]) -> DcParts {
        let mut parts = DcParts { f: 0.0, g: 0.0, h: 0.0, m: 0.0 };
        for slot in &self.slots {
            let d = &slot.desc;
            let tp = slot.tp.map_or(0.0, |j| x[j]);
            let tq = slot.tq.map_or(0.0, |j| x[j]);
            parts.f -= (d.w * (d.h * tp + d.f_cci * tq).ln_1p()
                + d.mu * (d.g * tq + d.l_si * tp).ln_1p())
                / LN_2;
            parts.g -= (d.w * (d.f_cci * tq).ln_1p() + d.mu * (d.l_si * tp).ln_1p()) / LN_2;
            if let Some(j) = slot.s {
                let s = x[j];
                parts.h += s;
                parts.m += s * s;
            }
        }
        parts
    }

    /// True penalized objective `F - G + eta (H - M)`.
    pub fn penalized_objective(&self, x: &[f64], eta: f64) -> f64 {
        self.eval_parts(x).penalized(eta)
    }

    /// Total lifted utility `-(F - G)` at a flat point.
    pub fn lifted_utility(&self, x: &[f64]) -> f64 {
        let parts = self.eval_parts(x);
        -(parts.f - parts.g)
    }

    /// Gradient of G into a zeroed buffer (nonzero only on p~/q~ coordinates).
    pub fn grad_g_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.n_vars);
        for slot in &self.slots {
            let d = &slot.desc;
            if let Some(j) = slot.tp {
                out[j] = -d.mu * d.l_si / ((1.0 + d.l_si * x[j]) * LN_2);
            }
            if let Some(j) = slot.tq {
                out[j] = -d.w * d.f_cci / ((1.0 + d.f_cci * x[j]) * LN_2);
            }
        }
    }

    /// Variable index of the raw DL power of user `m` on subcarrier `sub`.
    pub fn praw_var(&self, sub: usize, m: usize) -> usize {
        let pos = self
            .praw
            .binary_search_by_key(&(sub, m), |&(k, _)| k)
            .expect("raw DL power variable exists");
        self.praw[pos].1
    }

    /// Variable index of the raw UL power of user `r` on subcarrier `sub`.
    pub fn qraw_var(&self, sub: usize, r: usize) -> usize {
        let pos = self
            .qraw
            .binary_search_by_key(&(sub, r), |&(k, _)| k)
            .expect("raw UL power variable exists");
        self.qraw[pos].1
    }

    /// Largest distance of any assignment variable from {0, 1}.
    pub fn max_binary_deviation(&self, x: &[f64]) -> f64 {
        self.slots
            .iter()
            .filter_map(|slot| slot.s)
            .map(|j| x[j].min(1.0 - x[j]).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// The convex surrogate of one outer iteration: `F` plus the anchored
/// linearizations of `G` and the penalty, as a smooth objective over the
/// lifted variables.
pub(crate) struct Surrogate<'a> {
    prog: &'a DcProgram,
    lin: Vec<f64>,
    constant: f64,
}

impl<'a> Surrogate<'a> {
    pub fn new(prog: &'a DcProgram, anchor: &[f64], eta: f64) -> Self {
        assert_eq!(anchor.len(), prog.n_vars);
        let mut lin = vec![0.0; prog.n_vars];
        prog.grad_g_into(anchor, &mut lin);
        for v in lin.iter_mut() {
            *v = -*v;
        }
        let mut constant = 0.0;
        let parts = prog.eval_parts(anchor);
        // -G(a) + <grad G(a), pq(a)> + eta M(a); the s-linear part below.
        constant -= parts.g;
        for slot in &prog.slots {
            if let Some(j) = slot.tp {
                constant -= lin[j] * anchor[j];
            }
            if let Some(j) = slot.tq {
                constant -= lin[j] * anchor[j];
            }
        }
        constant += eta * parts.m;
        for slot in &prog.slots {
            if let Some(j) = slot.s {
                lin[j] = eta * (1.0 - 2.0 * anchor[j]);
            }
        }
        Surrogate { prog, lin, constant }
    }
}

impl SmoothObjective for Surrogate<'_> {
    fn dim(&self) -> usize {
        self.prog.n_vars
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.copy_from_slice(&self.lin);
        let mut value = self.constant;
        for (j, &c) in self.lin.iter().enumerate() {
            value += c * x[j];
        }
        for slot in &self.prog.slots {
            let d = &slot.desc;
            let tp = slot.tp.map_or(0.0, |j| x[j]);
            let tq = slot.tq.map_or(0.0, |j| x[j]);
            let a = 1.0 + d.h * tp + d.f_cci * tq;
            let b = 1.0 + d.g * tq + d.l_si * tp;
            value -= (d.w * a.ln() + d.mu * b.ln()) / LN_2;
            if let Some(j) = slot.tp {
                grad[j] -= (d.w * d.h / a + d.mu * d.l_si / b) / LN_2;
            }
            if let Some(j) = slot.tq {
                grad[j] -= (d.w * d.f_cci / a + d.mu * d.g / b) / LN_2;
            }
        }
        value
    }

    fn hessian_couplings(&self) -> Vec<Vec<usize>> {
        self.prog
            .slots
            .iter()
            .filter_map(|slot| match (slot.tp, slot.tq) {
                (Some(a), Some(b)) => Some(vec![a, b]),
                _ => None,
            })
            .collect()
    }

    fn add_hessian(&self, x: &[f64], add: &mut dyn FnMut(usize, usize, f64)) {
        for slot in &self.prog.slots {
            let d = &slot.desc;
            let tp = slot.tp.map_or(0.0, |j| x[j]);
            let tq = slot.tq.map_or(0.0, |j| x[j]);
            let a = 1.0 + d.h * tp + d.f_cci * tq;
            let b = 1.0 + d.g * tq + d.l_si * tp;
            let a2 = a * a;
            let b2 = b * b;
            if let Some(jp) = slot.tp {
                add(jp, jp, (d.w * d.h * d.h / a2 + d.mu * d.l_si * d.l_si / b2) / LN_2);
            }
            if let Some(jq) = slot.tq {
                add(jq, jq, (d.w * d.f_cci * d.f_cci / a2 + d.mu * d.g * d.g / b2) / LN_2);
            }
            if let (Some(jp), Some(jq)) = (slot.tp, slot.tq) {
                let cross = (d.w * d.h * d.f_cci / a2 + d.mu * d.l_si * d.g / b2) / LN_2;
                let (lo, hi) = if jp <= jq { (jp, jq) } else { (jq, jp) };
                add(lo, hi, cross);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Public full-duplex surface: dense (i, m, r)-indexed views of the lifted
// variables, and the named reformulation operations.
// ---------------------------------------------------------------------------

/// Lifted iterate of the joint problem, indexed `[i, m, r]` (auxiliary
/// powers, relaxed assignments) and `[i, m]` / `[i, r]` (raw powers).
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPoint {
    pub p_tilde: Array3<f64>,
    pub q_tilde: Array3<f64>,
    pub s: Array3<f64>,
    pub p_raw: Array2<f64>,
    pub q_raw: Array2<f64>,
}

impl LiftedPoint {
    pub fn zero(inst: &ProblemInstance) -> Self {
        let (n, k, j) = (inst.n_subcarriers(), inst.n_dl(), inst.n_ul());
        LiftedPoint {
            p_tilde: Array3::zeros((n, k, j)),
            q_tilde: Array3::zeros((n, k, j)),
            s: Array3::zeros((n, k, j)),
            p_raw: Array2::zeros((n, k)),
            q_raw: Array2::zeros((n, j)),
        }
    }

    /// Flatten into the solver's coordinate vector
    /// `[p~ | q~ | s | p_raw | q_raw]`, each block `(i, m, r)`-ordered with
    /// `i` outermost and `r` innermost.
    pub fn to_flat(&self, inst: &ProblemInstance) -> Vec<f64> {
        let (n, k, j) = (inst.n_subcarriers(), inst.n_dl(), inst.n_ul());
        let nkj = n * k * j;
        let mut x = vec![0.0; 3 * nkj + n * k + n * j];
        for i in 0..n {
            for m in 0..k {
                for r in 0..j {
                    let t = (i * k + m) * j + r;
                    x[t] = self.p_tilde[[i, m, r]];
                    x[nkj + t] = self.q_tilde[[i, m, r]];
                    x[2 * nkj + t] = self.s[[i, m, r]];
                }
                x[3 * nkj + i * k + m] = self.p_raw[[i, m]];
            }
            for r in 0..j {
                x[3 * nkj + n * k + i * j + r] = self.q_raw[[i, r]];
            }
        }
        x
    }

    pub fn from_flat(inst: &ProblemInstance, x: &[f64]) -> Self {
        let (n, k, j) = (inst.n_subcarriers(), inst.n_dl(), inst.n_ul());
        let nkj = n * k * j;
        assert_eq!(x.len(), 3 * nkj + n * k + n * j);
        let mut pt = LiftedPoint::zero(inst);
        for i in 0..n {
            for m in 0..k {
                for r in 0..j {
                    let t = (i * k + m) * j + r;
                    pt.p_tilde[[i, m, r]] = x[t];
                    pt.q_tilde[[i, m, r]] = x[nkj + t];
                    pt.s[[i, m, r]] = x[2 * nkj + t];
                }
                pt.p_raw[[i, m]] = x[3 * nkj + i * k + m];
            }
            for r in 0..j {
                pt.q_raw[[i, r]] = x[3 * nkj + n * k + i * j + r];
            }
        }
        pt
    }

    /// Largest distance of any relaxed assignment entry from {0, 1}.
    pub fn max_binary_deviation(&self) -> f64 {
        self.s.iter().map(|&s| s.min(1.0 - s).max(0.0)).fold(0.0, f64::max)
    }
}

/// Build the big-M constraint system C1-C14 of the joint problem.
pub fn build_constraints(inst: &ProblemInstance) -> ConstraintSystem {
    DcProgram::full_duplex(inst).system
}

/// Evaluate the convex pieces (F, G, H, M) of the penalized objective.
pub fn eval_dc_parts(inst: &ProblemInstance, pt: &LiftedPoint) -> DcParts {
    DcProgram::full_duplex(inst).eval_parts(&pt.to_flat(inst))
}

/// Gradient of G over the auxiliary powers, as `(d/dp~, d/dq~)` arrays.
pub fn grad_g(inst: &ProblemInstance, pt: &LiftedPoint) -> (Array3<f64>, Array3<f64>) {
    let (n, k, j) = (inst.n_subcarriers(), inst.n_dl(), inst.n_ul());
    let mut dp = Array3::zeros((n, k, j));
    let mut dq = Array3::zeros((n, k, j));
    for i in 0..n {
        for m in 0..k {
            for r in 0..j {
                let l = inst.rho * inst.gains.l_si[i];
                let f = inst.gains.f[[i, r, m]];
                dp[[i, m, r]] = -inst.mu[r] * l / ((1.0 + l * pt.p_tilde[[i, m, r]]) * LN_2);
                dq[[i, m, r]] = -inst.w[m] * f / ((1.0 + f * pt.q_tilde[[i, m, r]]) * LN_2);
            }
        }
    }
    (dp, dq)
}

/// Gradient of the penalty curvature term M(s) = sum s^2.
pub fn grad_m(pt: &LiftedPoint) -> Array3<f64> {
    pt.s.mapv(|s| 2.0 * s)
}

/// Value and gradient of the convex surrogate anchored at `anchor`, over the
/// flattened coordinates (raw power coordinates have zero gradient).
pub fn surrogate_objective(
    inst: &ProblemInstance,
    pt: &LiftedPoint,
    anchor: &LiftedPoint,
    eta: f64,
) -> (f64, Vec<f64>) {
    let prog = DcProgram::full_duplex(inst);
    let sur = Surrogate::new(&prog, &anchor.to_flat(inst), eta);
    let x = pt.to_flat(inst);
    let mut grad = vec![0.0; prog.n_vars];
    let value = sur.value_grad(&x, &mut grad);
    (value, grad)
}

/// Lift a physical allocation: `p~ = s p`, `q~ = s q`.
pub fn lift(inst: &ProblemInstance, alloc: &Allocation) -> LiftedPoint {
    let mut pt = LiftedPoint::zero(inst);
    for i in 0..inst.n_subcarriers() {
        for m in 0..inst.n_dl() {
            pt.p_raw[[i, m]] = alloc.p[[i, m]];
            for r in 0..inst.n_ul() {
                let s = f64::from(alloc.s[[i, m, r]]);
                pt.s[[i, m, r]] = s;
                pt.p_tilde[[i, m, r]] = s * alloc.p[[i, m]];
                pt.q_tilde[[i, m, r]] = s * alloc.q[[i, r]];
            }
        }
        for r in 0..inst.n_ul() {
            pt.q_raw[[i, r]] = alloc.q[[i, r]];
        }
    }
    pt
}

/// Recover a physical allocation from a near-binary lifted point. Powers on
/// inactive slots are zeroed; fails if any `s` is farther than
/// `rounding_tol` from {0, 1}.
pub fn unlift(inst: &ProblemInstance, pt: &LiftedPoint, rounding_tol: f64) -> Result<Allocation> {
    let dev = pt.max_binary_deviation();
    if dev > rounding_tol {
        return Err(Error::NotNearBinary { max_deviation: dev, tolerance: rounding_tol });
    }
    let mut alloc = Allocation::zero(inst);
    for i in 0..inst.n_subcarriers() {
        for m in 0..inst.n_dl() {
            for r in 0..inst.n_ul() {
                if pt.s[[i, m, r]] >= 0.5 {
                    alloc.s[[i, m, r]] = 1;
                    alloc.p[[i, m]] = pt.p_tilde[[i, m, r]].max(0.0);
                    alloc.q[[i, r]] = pt.q_tilde[[i, m, r]].max(0.0);
                }
            }
        }
    }
    Ok(alloc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::test_support::{random_instance, synthetic_instance};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn count_kind(system: &ConstraintSystem, kind: ConstraintKind) -> usize {
        system.rows.iter().filter(|r| r.kind == kind).count()
    }

    /// Hand tally for N_F = K = J = 1: one C1, one C2, one C3, one C4, two
    /// C5b, one C6, and one each of C7-C14: 15 labelled rows.
    #[test]
    fn constraint_count_minimal_instance() {
        let inst = synthetic_instance(1, 1.0, 1.0, 0.1, 0.1, 1.0, 1.0);
        let system = build_constraints(&inst);
        assert_eq!(system.rows.len(), 15);
        for kind in [
            ConstraintKind::C1,
            ConstraintKind::C2,
            ConstraintKind::C3,
            ConstraintKind::C4,
            ConstraintKind::C6,
            ConstraintKind::C7,
            ConstraintKind::C8,
            ConstraintKind::C9,
            ConstraintKind::C10,
            ConstraintKind::C11,
            ConstraintKind::C12,
            ConstraintKind::C13,
            ConstraintKind::C14,
        ] {
            assert_eq!(count_kind(&system, kind), 1, "{kind:?}");
        }
        assert_eq!(count_kind(&system, ConstraintKind::C5b), 2);
    }

    /// Closed-form tally at arbitrary size:
    /// 1 + N K + J + N J + 2 N K J + N + 8 N K J.
    #[test]
    fn constraint_count_formula() {
        let inst = random_instance(3, 2, 4, 30.0, 1);
        let (n, k, j) = (3.0, 2.0, 4.0);
        let expected = 1.0 + n * k + j + n * j + 2.0 * n * k * j + n + 8.0 * n * k * j;
        let system = build_constraints(&inst);
        assert_eq!(system.rows.len() as f64, expected);
        // Folded raw upper bounds come on top of the labelled rows.
        assert_eq!(system.bound_rows.len(), (n * k + n * j) as usize);
    }

    #[test]
    fn big_m_pinches_at_binary_s() {
        let inst = synthetic_instance(1, 1.0, 1.0, 0.1, 0.1, 2.0, 1.0);
        let system = build_constraints(&inst);
        // s = 1: C8 gives p~ <= p and C9 gives p~ >= p, so p~ must equal p.
        let mut pt = LiftedPoint::zero(&inst);
        pt.s[[0, 0, 0]] = 1.0;
        pt.p_raw[[0, 0]] = 1.5;
        pt.p_tilde[[0, 0, 0]] = 1.2;
        assert!(system.min_slack(&pt.to_flat(&inst)) < 0.0, "p~ != p must be infeasible at s=1");
        pt.p_tilde[[0, 0, 0]] = 1.5;
        pt.q_raw[[0, 0]] = 0.5;
        pt.q_tilde[[0, 0, 0]] = 0.5;
        assert!(system.min_slack(&pt.to_flat(&inst)) >= 0.0);

        // s = 0: C7 gives p~ <= 0 and C10 gives p~ >= 0.
        let mut pt0 = LiftedPoint::zero(&inst);
        pt0.p_raw[[0, 0]] = 1.0;
        pt0.p_tilde[[0, 0, 0]] = 0.3;
        assert!(system.min_slack(&pt0.to_flat(&inst)) < 0.0, "p~ > 0 must be infeasible at s=0");
        pt0.p_tilde[[0, 0, 0]] = 0.0;
        assert!(system.min_slack(&pt0.to_flat(&inst)) >= 0.0);
    }

    /// F - G equals the negative lifted utility; checked against the model's
    /// hand-evaluated 1.6439 case lifted with s = 1.
    #[test]
    fn dc_identity_matches_utility() {
        let inst = synthetic_instance(1, 1.0, 1.0, 1.0, 1.0, 10.0, 10.0);
        let mut pt = LiftedPoint::zero(&inst);
        pt.s[[0, 0, 0]] = 1.0;
        pt.p_raw[[0, 0]] = 3.0;
        pt.q_raw[[0, 0]] = 1.0;
        pt.p_tilde[[0, 0, 0]] = 3.0;
        pt.q_tilde[[0, 0, 0]] = 1.0;
        let parts = eval_dc_parts(&inst, &pt);
        assert!((parts.f - parts.g - (-1.6439)).abs() < 1e-4, "F-G = {}", parts.f - parts.g);
    }

    #[test]
    fn dc_parts_zero_point() {
        let inst = synthetic_instance(2, 1.0, 1.0, 1.0, 1.0, 10.0, 10.0);
        let parts = eval_dc_parts(&inst, &LiftedPoint::zero(&inst));
        assert_eq!(parts, DcParts { f: 0.0, g: 0.0, h: 0.0, m: 0.0 });
    }

    #[test]
    fn penalty_gap_at_half() {
        let inst = synthetic_instance(1, 1.0, 1.0, 1.0, 1.0, 10.0, 10.0);
        let mut pt = LiftedPoint::zero(&inst);
        pt.s[[0, 0, 0]] = 0.5;
        let parts = eval_dc_parts(&inst, &pt);
        assert!((parts.h - parts.m - 0.25).abs() < 1e-15);
    }

    #[test]
    fn grad_g_hand_value() {
        // mu = 1, rho L = 1, p~ = 1: dG/dp~ = -1 / (2 ln 2).
        let inst = synthetic_instance(1, 1.0, 1.0, 0.3, 1.0, 10.0, 10.0);
        let mut pt = LiftedPoint::zero(&inst);
        pt.p_tilde[[0, 0, 0]] = 1.0;
        let (dp, _) = grad_g(&inst, &pt);
        assert!((dp[[0, 0, 0]] + 0.7213475).abs() < 1e-5, "dG/dp~ = {}", dp[[0, 0, 0]]);
    }

    #[test]
    fn grad_g_vanishes_without_si() {
        let inst = synthetic_instance(2, 1.0, 1.0, 0.3, 0.0, 10.0, 10.0);
        let mut pt = LiftedPoint::zero(&inst);
        pt.p_tilde.fill(0.7);
        let (dp, _) = grad_g(&inst, &pt);
        assert!(dp.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grad_m_values() {
        let inst = synthetic_instance(1, 1.0, 1.0, 0.1, 0.1, 1.0, 1.0);
        let mut pt = LiftedPoint::zero(&inst);
        assert_eq!(grad_m(&pt)[[0, 0, 0]], 0.0);
        pt.s[[0, 0, 0]] = 0.5;
        assert_eq!(grad_m(&pt)[[0, 0, 0]], 1.0);
    }

    fn random_point(inst: &ProblemInstance, rng: &mut impl Rng) -> LiftedPoint {
        let mut pt = LiftedPoint::zero(inst);
        for v in pt.p_tilde.iter_mut().chain(pt.q_tilde.iter_mut()) {
            *v = rng.gen::<f64>() * 2.0;
        }
        for v in pt.s.iter_mut() {
            *v = rng.gen::<f64>();
        }
        for v in pt.p_raw.iter_mut().chain(pt.q_raw.iter_mut()) {
            *v = rng.gen::<f64>() * 2.0;
        }
        pt
    }

    /// Central finite differences of G and M agree with the analytic forms.
    #[test]
    fn gradients_match_finite_differences() {
        let inst = random_instance(2, 2, 2, 30.0, 3);
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        for _ in 0..5 {
            let pt = random_point(&inst, &mut rng);
            let (dp, dq) = grad_g(&inst, &pt);
            for i in 0..2 {
                for m in 0..2 {
                    for r in 0..2 {
                        let step = 1e-5 * (1.0 + pt.p_tilde[[i, m, r]].abs());
                        let mut hi = pt.clone();
                        hi.p_tilde[[i, m, r]] += step;
                        let mut lo = pt.clone();
                        lo.p_tilde[[i, m, r]] -= step;
                        let fd = (eval_dc_parts(&inst, &hi).g - eval_dc_parts(&inst, &lo).g)
                            / (2.0 * step);
                        let scale = fd.abs().max(dp[[i, m, r]].abs()).max(1e-12);
                        assert!(
                            (fd - dp[[i, m, r]]).abs() / scale < 1e-6,
                            "dG/dp~[{i},{m},{r}]: analytic {} vs fd {fd}",
                            dp[[i, m, r]]
                        );

                        let mut hi = pt.clone();
                        hi.q_tilde[[i, m, r]] += step;
                        let mut lo = pt.clone();
                        lo.q_tilde[[i, m, r]] -= step;
                        let fd = (eval_dc_parts(&inst, &hi).g - eval_dc_parts(&inst, &lo).g)
                            / (2.0 * step);
                        let scale = fd.abs().max(dq[[i, m, r]].abs()).max(1e-12);
                        assert!((fd - dq[[i, m, r]]).abs() / scale < 1e-6);

                        let mut hi = pt.clone();
                        hi.s[[i, m, r]] += 1e-6;
                        let mut lo = pt.clone();
                        lo.s[[i, m, r]] -= 1e-6;
                        let fd = (eval_dc_parts(&inst, &hi).m - eval_dc_parts(&inst, &lo).m)
                            / 2e-6;
                        assert!((fd - grad_m(&pt)[[i, m, r]]).abs() < 1e-7);
                    }
                }
            }
        }
    }

    /// The surrogate is exact at its anchor and dominates the true penalized
    /// objective everywhere (underestimation of G and M).
    #[test]
    fn surrogate_tight_at_anchor_and_dominates() {
        let inst = random_instance(2, 2, 2, 30.0, 5);
        let prog = DcProgram::full_duplex(&inst);
        let eta = 100.0;
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..100 {
            let anchor = random_point(&inst, &mut rng);
            let pt = random_point(&inst, &mut rng);
            let (at_anchor, _) = surrogate_objective(&inst, &anchor, &anchor, eta);
            let truth_anchor = prog.penalized_objective(&anchor.to_flat(&inst), eta);
            assert!(
                (at_anchor - truth_anchor).abs() < 1e-9 * (1.0 + truth_anchor.abs()),
                "tightness: {at_anchor} vs {truth_anchor}"
            );
            let (at_pt, _) = surrogate_objective(&inst, &pt, &anchor, eta);
            let truth_pt = prog.penalized_objective(&pt.to_flat(&inst), eta);
            assert!(
                at_pt >= truth_pt - 1e-9 * (1.0 + truth_pt.abs()),
                "domination: surrogate {at_pt} below truth {truth_pt}"
            );
        }
    }

    /// With eta = 0 and no cross-interference, G vanishes and the surrogate
    /// reduces to F exactly.
    #[test]
    fn surrogate_degenerate_split_equals_f() {
        let inst = synthetic_instance(2, 2.0, 3.0, 0.0, 0.0, 5.0, 5.0);
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let anchor = random_point(&inst, &mut rng);
        let pt = random_point(&inst, &mut rng);
        let (value, _) = surrogate_objective(&inst, &pt, &anchor, 0.0);
        let parts = eval_dc_parts(&inst, &pt);
        assert!((value - parts.f).abs() < 1e-12);
        assert_eq!(parts.g, 0.0);
    }

    /// Midpoint convexity of F, G, M along random segments.
    #[test]
    fn convexity_witnesses() {
        let inst = random_instance(2, 2, 1, 30.0, 9);
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..50 {
            let a = random_point(&inst, &mut rng);
            let b = random_point(&inst, &mut rng);
            let mut mid = LiftedPoint::zero(&inst);
            mid.p_tilde = (&a.p_tilde + &b.p_tilde) * 0.5;
            mid.q_tilde = (&a.q_tilde + &b.q_tilde) * 0.5;
            mid.s = (&a.s + &b.s) * 0.5;
            mid.p_raw = (&a.p_raw + &b.p_raw) * 0.5;
            mid.q_raw = (&a.q_raw + &b.q_raw) * 0.5;
            let (pa, pb, pm) =
                (eval_dc_parts(&inst, &a), eval_dc_parts(&inst, &b), eval_dc_parts(&inst, &mid));
            assert!(pm.f <= 0.5 * (pa.f + pb.f) + 1e-9);
            assert!(pm.g <= 0.5 * (pa.g + pb.g) + 1e-9);
            assert!(pm.m <= 0.5 * (pa.m + pb.m) + 1e-9);
        }
    }

    /// At binary schedules the lifted objective equals the physical one and
    /// the penalty vanishes.
    #[test]
    fn binary_equivalence() {
        let inst = random_instance(3, 2, 2, 30.0, 11);
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut alloc = Allocation::zero(&inst);
            for i in 0..3 {
                if rng.gen::<f64>() < 0.8 {
                    let m = rng.gen_range(0..2);
                    let r = rng.gen_range(0..2);
                    alloc.s[[i, m, r]] = 1;
                    alloc.p[[i, m]] = rng.gen::<f64>() * inst.p_max_dl / 3.0;
                    alloc.q[[i, r]] = rng.gen::<f64>() * inst.p_max_ul[r] / 3.0;
                }
            }
            let pt = lift(&inst, &alloc);
            let parts = eval_dc_parts(&inst, &pt);
            let obj = crate::model::system_objective(&inst, &alloc).unwrap();
            assert!(
                (-(parts.f - parts.g) - obj).abs() < 1e-9 * (1.0 + obj.abs()),
                "lifted {} vs physical {obj}",
                -(parts.f - parts.g)
            );
            assert!((parts.h - parts.m).abs() < 1e-12, "penalty must vanish at binary s");
        }
    }

    #[test]
    fn penalty_positive_strictly_inside() {
        let inst = synthetic_instance(1, 1.0, 1.0, 0.1, 0.1, 1.0, 1.0);
        for s in [0.1, 0.3, 0.5, 0.9, 0.999] {
            let mut pt = LiftedPoint::zero(&inst);
            pt.s[[0, 0, 0]] = s;
            let parts = eval_dc_parts(&inst, &pt);
            assert!(parts.h - parts.m > 0.0);
        }
    }

    #[test]
    fn lift_unlift_roundtrip() {
        let inst = synthetic_instance(1, 1.0, 1.0, 0.1, 0.1, 10.0, 10.0);
        let mut alloc = Allocation::zero(&inst);
        alloc.s[[0, 0, 0]] = 1;
        alloc.p[[0, 0]] = 2.0;
        alloc.q[[0, 0]] = 0.5;
        let pt = lift(&inst, &alloc);
        assert_eq!(pt.p_tilde[[0, 0, 0]], 2.0);
        let back = unlift(&inst, &pt, 1e-9).unwrap();
        assert_eq!(back, alloc);
    }

    #[test]
    fn unlift_zeroes_inactive_power() {
        let inst = synthetic_instance(1, 1.0, 1.0, 0.1, 0.1, 10.0, 10.0);
        let mut pt = LiftedPoint::zero(&inst);
        pt.p_raw[[0, 0]] = 5.0; // s = 0 slot: raw power is immaterial
        let alloc = unlift(&inst, &pt, 1e-9).unwrap();
        assert_eq!(alloc.p[[0, 0]], 0.0);
        assert_eq!(alloc.s[[0, 0, 0]], 0);
    }

    #[test]
    fn unlift_rejects_fractional_s() {
        let inst = synthetic_instance(1, 1.0, 1.0, 0.1, 0.1, 10.0, 10.0);
        let mut pt = LiftedPoint::zero(&inst);
        pt.s[[0, 0, 0]] = 0.4;
        match unlift(&inst, &pt, 1e-3) {
            Err(Error::NotNearBinary { max_deviation, .. }) => {
                assert!((max_deviation - 0.4).abs() < 1e-12)
            }
            other => panic!("expected rounding error, got {other:?}"),
        }
    }

    #[test]
    fn flat_roundtrip() {
        let inst = random_instance(2, 3, 2, 30.0, 2);
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let pt = random_point(&inst, &mut rng);
        let back = LiftedPoint::from_flat(&inst, &pt.to_flat(&inst));
        assert_eq!(pt, back);
    }
}
