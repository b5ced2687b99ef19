//! The physical optimization instance: rates, objective, feasibility.
//!
//! Rates are in bits/s/Hz per subcarrier (log base 2); all powers are linear
//! watts. The per-subcarrier utility of scheduling DL user `m` and UL user
//! `r` with powers `p` and `q` is
//!
//! ```text
//! U = w_m  * log2(1 + H p / (F q + 1))        (downlink, CCI-impaired)
//!   + mu_r * log2(1 + G q / (rho L_SI p + 1)) (uplink, SI-impaired)
//! ```

use ndarray::{Array2, Array3};

use crate::channel::ChannelGains;
use crate::error::{Error, Result};

/// Immutable optimization input: gains, weights, budgets, SI constant.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub gains: ChannelGains,
    /// DL user weights, one per DL user, each in [0, 1].
    pub w: Vec<f64>,
    /// UL user weights, one per UL user, each in [0, 1].
    pub mu: Vec<f64>,
    /// BS transmit power budget, watts.
    pub p_max_dl: f64,
    /// Per-UL-user transmit power budgets, watts.
    pub p_max_ul: Vec<f64>,
    /// Residual SI factor in [0, 1] (linear).
    pub rho: f64,
}

impl ProblemInstance {
    pub fn new(
        gains: ChannelGains,
        w: Vec<f64>,
        mu: Vec<f64>,
        p_max_dl: f64,
        p_max_ul: Vec<f64>,
        rho: f64,
    ) -> Result<Self> {
        gains.validate()?;
        if w.len() != gains.n_dl || mu.len() != gains.n_ul || p_max_ul.len() != gains.n_ul {
            return Err(Error::invalid("weight/budget vector lengths must match user counts"));
        }
        if !w.iter().chain(mu.iter()).all(|v| (0.0..=1.0).contains(v)) {
            return Err(Error::invalid("weights must lie in [0, 1]"));
        }
        if !(p_max_dl > 0.0) || !p_max_ul.iter().all(|&p| p > 0.0) {
            return Err(Error::invalid("power budgets must be positive"));
        }
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::invalid(format!("rho must lie in [0, 1], got {rho}")));
        }
        Ok(Self { gains, w, mu, p_max_dl, p_max_ul, rho })
    }

    /// Instance with unit weights for all users.
    pub fn with_unit_weights(
        gains: ChannelGains,
        p_max_dl: f64,
        p_max_ul_each: f64,
        rho: f64,
    ) -> Result<Self> {
        let w = vec![1.0; gains.n_dl];
        let mu = vec![1.0; gains.n_ul];
        let p_ul = vec![p_max_ul_each; gains.n_ul];
        Self::new(gains, w, mu, p_max_dl, p_ul, rho)
    }

    pub fn n_subcarriers(&self) -> usize {
        self.gains.n_subcarriers
    }

    pub fn n_dl(&self) -> usize {
        self.gains.n_dl
    }

    pub fn n_ul(&self) -> usize {
        self.gains.n_ul
    }
}

/// Physical decision variables. `s[[i, m, r]] = 1` schedules DL user `m` and
/// UL user `r` on subcarrier `i`; `p[[i, m]]` and `q[[i, r]]` are the
/// transmit powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub p: Array2<f64>,
    pub q: Array2<f64>,
    pub s: Array3<u8>,
}

impl Allocation {
    /// All-zero allocation (feasible: nothing scheduled, no power spent).
    pub fn zero(inst: &ProblemInstance) -> Self {
        Self {
            p: Array2::zeros((inst.n_subcarriers(), inst.n_dl())),
            q: Array2::zeros((inst.n_subcarriers(), inst.n_ul())),
            s: Array3::zeros((inst.n_subcarriers(), inst.n_dl(), inst.n_ul())),
        }
    }

    /// The scheduled (m, r) pair on subcarrier `i`, if any. When several are
    /// set (infeasible under C6) the lexicographically first is returned.
    pub fn pair_on(&self, i: usize) -> Option<(usize, usize)> {
        let (_, n_dl, n_ul) = self.s.dim();
        for m in 0..n_dl {
            for r in 0..n_ul {
                if self.s[[i, m, r]] != 0 {
                    return Some((m, r));
                }
            }
        }
        None
    }

    fn dims_match(&self, inst: &ProblemInstance) -> bool {
        self.p.dim() == (inst.n_subcarriers(), inst.n_dl())
            && self.q.dim() == (inst.n_subcarriers(), inst.n_ul())
            && self.s.dim() == (inst.n_subcarriers(), inst.n_dl(), inst.n_ul())
    }
}

/// Weighted utility of pair (m, r) on subcarrier `i` at powers (p, q),
/// without the scheduling indicator (the caller applies `s`).
pub fn subcarrier_utility(
    inst: &ProblemInstance,
    i: usize,
    m: usize,
    r: usize,
    p: f64,
    q: f64,
) -> Result<f64> {
    if i >= inst.n_subcarriers() || m >= inst.n_dl() || r >= inst.n_ul() {
        return Err(Error::invalid(format!("index (i={i}, m={m}, r={r}) out of range")));
    }
    if p < 0.0 || q < 0.0 {
        return Err(Error::invalid(format!("powers must be non-negative, got p={p}, q={q}")));
    }
    let h = inst.gains.h[[i, m]];
    let g = inst.gains.g[[i, r]];
    let f = inst.gains.f[[i, r, m]];
    let l = inst.rho * inst.gains.l_si[i];
    let dl = inst.w[m] * (h * p / (f * q + 1.0)).ln_1p() / std::f64::consts::LN_2;
    let ul = inst.mu[r] * (g * q / (l * p + 1.0)).ln_1p() / std::f64::consts::LN_2;
    Ok(dl + ul)
}

/// Weighted sum throughput of an allocation: sum of scheduled pair utilities
/// over all subcarriers.
pub fn system_objective(inst: &ProblemInstance, alloc: &Allocation) -> Result<f64> {
    if !alloc.dims_match(inst) {
        return Err(Error::invalid("allocation dimensions do not match instance"));
    }
    let mut total = 0.0;
    for i in 0..inst.n_subcarriers() {
        for m in 0..inst.n_dl() {
            for r in 0..inst.n_ul() {
                if alloc.s[[i, m, r]] != 0 {
                    total += subcarrier_utility(inst, i, m, r, alloc.p[[i, m]], alloc.q[[i, r]])?;
                }
            }
        }
    }
    Ok(total)
}

/// One violated constraint with its residual (positive = amount of violation).
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: String,
    pub residual: f64,
}

/// Result of checking C1-C6 on a candidate allocation.
#[derive(Debug, Clone, Default)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the scheduling constraints C1-C6 against `tol`. Violations are
/// reported, never thrown.
///
/// * C1: total scheduled DL power within the BS budget,
/// * C2/C4: non-negative powers,
/// * C3: per-UL-user scheduled power within that user's budget,
/// * C5: binary indicators (guaranteed by the `u8` representation; values
///   other than 0/1 are reported),
/// * C6: at most one pair per subcarrier.
pub fn check_feasibility(
    inst: &ProblemInstance,
    alloc: &Allocation,
    tol: f64,
) -> Result<FeasibilityReport> {
    if !alloc.dims_match(inst) {
        return Err(Error::invalid("allocation dimensions do not match instance"));
    }
    let mut report = FeasibilityReport::default();
    let n_sub = inst.n_subcarriers();

    let mut dl_used = 0.0;
    let mut ul_used = vec![0.0; inst.n_ul()];
    for i in 0..n_sub {
        let mut pairs = 0u32;
        for m in 0..inst.n_dl() {
            for r in 0..inst.n_ul() {
                let s = alloc.s[[i, m, r]];
                if s > 1 {
                    report.violations.push(Violation {
                        constraint: format!("C5[i={i},m={m},r={r}]"),
                        residual: f64::from(s) - 1.0,
                    });
                }
                if s != 0 {
                    pairs += 1;
                    dl_used += alloc.p[[i, m]];
                    ul_used[r] += alloc.q[[i, r]];
                }
            }
        }
        if f64::from(pairs) > 1.0 + tol {
            report.violations.push(Violation {
                constraint: format!("C6[i={i}]"),
                residual: f64::from(pairs) - 1.0,
            });
        }
    }

    if dl_used - inst.p_max_dl > tol {
        report.violations.push(Violation {
            constraint: "C1".to_string(),
            residual: dl_used - inst.p_max_dl,
        });
    }
    for (r, &used) in ul_used.iter().enumerate() {
        if used - inst.p_max_ul[r] > tol {
            report.violations.push(Violation {
                constraint: format!("C3[r={r}]"),
                residual: used - inst.p_max_ul[r],
            });
        }
    }
    for ((i, m), &p) in alloc.p.indexed_iter() {
        if p < -tol {
            report.violations.push(Violation { constraint: format!("C2[i={i},m={m}]"), residual: -p });
        }
    }
    for ((i, r), &q) in alloc.q.indexed_iter() {
        if q < -tol {
            report.violations.push(Violation { constraint: format!("C4[i={i},r={r}]"), residual: -q });
        }
    }
    Ok(report)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use ndarray::{Array1, Array2, Array3};

    /// Instance with explicitly chosen gain values, unit weights. `f_cci` and
    /// `l_si` are broadcast; `rho` multiplies `l_si` at evaluation time, so
    /// pass the desired product via `l_si` and `rho = 1`.
    pub fn synthetic_instance(
        n_sub: usize,
        h: f64,
        g: f64,
        f_cci: f64,
        rho_l_si: f64,
        p_max_dl: f64,
        p_max_ul: f64,
    ) -> ProblemInstance {
        let gains = ChannelGains {
            n_subcarriers: n_sub,
            n_dl: 1,
            n_ul: 1,
            h: Array2::from_elem((n_sub, 1), h),
            g: Array2::from_elem((n_sub, 1), g),
            f: Array3::from_elem((n_sub, 1, 1), f_cci),
            l_si: Array1::from_elem(n_sub, rho_l_si),
        };
        ProblemInstance::with_unit_weights(gains, p_max_dl, p_max_ul, 1.0).unwrap()
    }

    /// Random multi-user instance drawn from the physical channel model.
    pub fn random_instance(
        n_sub: usize,
        n_dl: usize,
        n_ul: usize,
        p_max_dl_dbm: f64,
        seed: u64,
    ) -> ProblemInstance {
        use crate::channel::{sample_channel_realization, trial_rng, CellGeometry, LargeScaleParams};
        use crate::units::dbm_to_watts;
        let geom = CellGeometry::default();
        let params = LargeScaleParams::default();
        let gains = sample_channel_realization(&geom, &params, n_sub, n_dl, n_ul, &mut trial_rng(seed, 0))
            .unwrap();
        ProblemInstance::with_unit_weights(
            gains,
            dbm_to_watts(p_max_dl_dbm),
            dbm_to_watts(18.0),
            params.rho_linear(),
        )
        .unwrap()
    }
}
