//! Random network drops and noise-normalized channel gains.
//!
//! A drop places the base station at the origin, draws user positions
//! uniformly over an annulus, applies a log-distance path-loss model, and
//! multiplies in per-subcarrier small-scale fading (Rayleigh for the user
//! links, Rician for the base station's self-interference loop). The output
//! is the set of noise-normalized gain composites consumed by the optimizer:
//!
//! * `h[i][m]`  downlink gain, BS -> DL user `m` on subcarrier `i`,
//! * `g[i][r]`  uplink gain, UL user `r` -> BS,
//! * `f[i][r][m]`  co-channel gain, UL user `r` -> DL user `m`,
//! * `l_si[i]`  self-interference loop gain (before the cancellation
//!   constant `rho` is applied).
//!
//! All gains are divided by the noise power of the receiver that sees them,
//! so transmit powers in watts multiply directly into SNR terms.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::units::{db_to_linear, dbm_to_watts};

/// Speed of light in m/s.
const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Annular cell: users live between the inner and outer radius, the base
/// station sits at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub inner_radius_m: f64,
    pub outer_radius_m: f64,
}

impl CellGeometry {
    pub fn new(inner_radius_m: f64, outer_radius_m: f64) -> Result<Self> {
        if !(inner_radius_m > 0.0 && inner_radius_m < outer_radius_m) {
            return Err(Error::invalid(format!(
                "cell geometry requires 0 < inner < outer, got inner={inner_radius_m}, outer={outer_radius_m}"
            )));
        }
        Ok(Self { inner_radius_m, outer_radius_m })
    }
}

impl Default for CellGeometry {
    /// 30 m inner / 600 m outer ring.
    fn default() -> Self {
        Self { inner_radius_m: 30.0, outer_radius_m: 600.0 }
    }
}

/// Which link a path gain is evaluated for. The base station antenna gain
/// applies to links that terminate at the base station (downlink and uplink),
/// not to the user-to-user co-channel path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkKind {
    Dl,
    Ul,
    Cci,
}

/// Large-scale propagation and radio parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeScaleParams {
    pub carrier_hz: f64,
    pub pathloss_exponent: f64,
    pub reference_distance_m: f64,
    pub bs_antenna_gain_db: f64,
    /// Noise power per subcarrier at a DL user receiver, dBm.
    pub noise_dl_dbm: f64,
    /// Noise power per subcarrier at the BS uplink receiver, dBm.
    pub noise_bs_dbm: f64,
    /// Rician K-factor of the self-interference channel, dB.
    pub rician_k_db: f64,
    /// Residual self-interference after cancellation, dB (<= 0).
    pub si_cancellation_db: f64,
    /// Mean power of the self-interference loop channel (antenna isolation
    /// and circulator leakage) before cancellation, dB.
    pub si_coupling_db: f64,
}

impl LargeScaleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pathloss_exponent > 2.0) {
            return Err(Error::invalid(format!(
                "pathloss exponent must exceed 2, got {}",
                self.pathloss_exponent
            )));
        }
        if !(self.carrier_hz > 0.0 && self.reference_distance_m > 0.0) {
            return Err(Error::invalid("carrier frequency and reference distance must be positive"));
        }
        let rho = self.rho_linear();
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::invalid(format!(
                "SI cancellation constant must satisfy 0 <= rho <= 1, got {rho}"
            )));
        }
        Ok(())
    }

    /// Residual SI factor `rho` in linear scale.
    pub fn rho_linear(&self) -> f64 {
        db_to_linear(self.si_cancellation_db)
    }

    pub fn noise_dl_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dl_dbm)
    }

    pub fn noise_bs_watts(&self) -> f64 {
        dbm_to_watts(self.noise_bs_dbm)
    }
}

impl Default for LargeScaleParams {
    /// 2.5 GHz carrier, exponent 3.6, 10 dBi BS antenna, -125 dBm noise per
    /// subcarrier on both ends, 5 dB Rician K, -90 dB residual SI.
    fn default() -> Self {
        Self {
            carrier_hz: 2.5e9,
            pathloss_exponent: 3.6,
            reference_distance_m: 1.0,
            bs_antenna_gain_db: 10.0,
            noise_dl_dbm: -125.0,
            noise_bs_dbm: -125.0,
            rician_k_db: 5.0,
            si_cancellation_db: -90.0,
            si_coupling_db: -40.0,
        }
    }
}

/// Noise-normalized channel gains for one drop.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGains {
    pub n_subcarriers: usize,
    pub n_dl: usize,
    pub n_ul: usize,
    /// `[i, m]`: downlink composite gain per watt.
    pub h: Array2<f64>,
    /// `[i, r]`: uplink composite gain per watt.
    pub g: Array2<f64>,
    /// `[i, r, m]`: co-channel (UL user r into DL user m) gain per watt.
    pub f: Array3<f64>,
    /// `[i]`: self-interference loop gain per watt, before `rho`.
    pub l_si: Array1<f64>,
}

impl ChannelGains {
    /// Check shape and value invariants (finite, non-negative, fully populated).
    pub fn validate(&self) -> Result<()> {
        if self.h.dim() != (self.n_subcarriers, self.n_dl)
            || self.g.dim() != (self.n_subcarriers, self.n_ul)
            || self.f.dim() != (self.n_subcarriers, self.n_ul, self.n_dl)
            || self.l_si.len() != self.n_subcarriers
        {
            return Err(Error::invalid("channel gain array dimensions do not match counts"));
        }
        let ok = self.h.iter().chain(self.g.iter()).chain(self.f.iter()).chain(self.l_si.iter())
            .all(|v| v.is_finite() && *v >= 0.0);
        if !ok {
            return Err(Error::invalid("channel gains must be finite and non-negative"));
        }
        Ok(())
    }

    /// Dump as CSV rows `(i, kind, m, r, value)` with `-1` in unused index
    /// slots. Indices are zero-based.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "i,kind,m,r,value")?;
        for i in 0..self.n_subcarriers {
            for m in 0..self.n_dl {
                writeln!(out, "{i},H,{m},-1,{:.12e}", self.h[[i, m]])?;
            }
            for r in 0..self.n_ul {
                writeln!(out, "{i},G,-1,{r},{:.12e}", self.g[[i, r]])?;
            }
            for r in 0..self.n_ul {
                for m in 0..self.n_dl {
                    writeln!(out, "{i},F,{m},{r},{:.12e}", self.f[[i, r, m]])?;
                }
            }
            writeln!(out, "{i},LSI,-1,-1,{:.12e}", self.l_si[i])?;
        }
        Ok(())
    }
}

/// A seeded generator for Monte Carlo trial `trial` of a run keyed by
/// `master_seed`. Distinct trials get independent ChaCha streams, so trials
/// can run in parallel and still reproduce bit-identically.
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng
}

/// Draw DL and UL user positions uniformly (by area) over the annulus.
pub fn sample_user_positions(
    geometry: &CellGeometry,
    n_dl: usize,
    n_ul: usize,
    rng: &mut impl Rng,
) -> Result<(Vec<[f64; 2]>, Vec<[f64; 2]>)> {
    CellGeometry::new(geometry.inner_radius_m, geometry.outer_radius_m)?;
    if n_dl == 0 || n_ul == 0 {
        return Err(Error::invalid("user counts must be at least 1"));
    }
    let mut draw = |n: usize| -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let v: f64 = rng.gen();
                // Area-uniform radius: r^2 uniform on [inner^2, outer^2].
                let r2 = geometry.inner_radius_m.powi(2)
                    + u * (geometry.outer_radius_m.powi(2) - geometry.inner_radius_m.powi(2));
                let r = r2.sqrt();
                let theta = 2.0 * std::f64::consts::PI * v;
                [r * theta.cos(), r * theta.sin()]
            })
            .collect()
    };
    let dl = draw(n_dl);
    let ul = draw(n_ul);
    Ok((dl, ul))
}

/// Linear large-scale power gain of a link at distance `distance_m`.
///
/// Log-distance model anchored at free space for the reference distance:
/// `gain(d) = gain(d0) * (d / d0)^(-alpha)`. Distances below the reference
/// distance are clamped to it (with a warning).
pub fn path_gain(distance_m: f64, params: &LargeScaleParams, link: LinkKind) -> f64 {
    let d0 = params.reference_distance_m;
    let d = if distance_m < d0 {
        log::warn!("path_gain: distance {distance_m} m below reference {d0} m, clamping");
        d0
    } else {
        distance_m
    };
    let fspl_d0_db = 20.0 * (4.0 * std::f64::consts::PI * d0 * params.carrier_hz / SPEED_OF_LIGHT).log10();
    let antenna_db = match link {
        LinkKind::Dl | LinkKind::Ul => params.bs_antenna_gain_db,
        LinkKind::Cci => 0.0,
    };
    let gain_d0 = db_to_linear(antenna_db - fspl_d0_db);
    gain_d0 * (d / d0).powf(-params.pathloss_exponent)
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Squared magnitude of a unit-mean-power complex Gaussian draw.
fn rayleigh_power(normal: &Normal<f64>, rng: &mut impl Rng) -> f64 {
    let re = normal.sample(rng);
    let im = normal.sample(rng);
    re * re + im * im
}

/// Squared magnitude of a unit-mean-power Rician draw with linear K-factor.
fn rician_power(k: f64, normal: &Normal<f64>, rng: &mut impl Rng) -> f64 {
    // LOS amplitude sqrt(K/(K+1)), scatter variance 1/(K+1) split over the
    // two quadrature components; total mean power is exactly 1.
    let los = (k / (k + 1.0)).sqrt();
    let scatter = (0.5 / (k + 1.0)).sqrt();
    let re = los + scatter * normal.sample(rng);
    let im = scatter * normal.sample(rng);
    re * re + im * im
}

/// Draw one full network realization: positions, path gains, per-subcarrier
/// fading, and the normalized composites.
pub fn sample_channel_realization(
    geometry: &CellGeometry,
    params: &LargeScaleParams,
    n_subcarriers: usize,
    n_dl: usize,
    n_ul: usize,
    rng: &mut impl Rng,
) -> Result<ChannelGains> {
    params.validate()?;
    if n_subcarriers == 0 {
        return Err(Error::invalid("subcarrier count must be at least 1"));
    }
    let (dl_pos, ul_pos) = sample_user_positions(geometry, n_dl, n_ul, rng)?;
    let bs = [0.0, 0.0];

    let omega: Vec<f64> = dl_pos.iter().map(|&p| path_gain(distance(bs, p), params, LinkKind::Dl)).collect();
    let varrho: Vec<f64> = ul_pos.iter().map(|&p| path_gain(distance(p, bs), params, LinkKind::Ul)).collect();
    let mut theta = Array2::<f64>::zeros((n_ul, n_dl));
    for r in 0..n_ul {
        for m in 0..n_dl {
            theta[[r, m]] = path_gain(distance(ul_pos[r], dl_pos[m]), params, LinkKind::Cci);
        }
    }

    let sigma_dl = params.noise_dl_watts();
    let sigma_bs = params.noise_bs_watts();
    let k_rician = db_to_linear(params.rician_k_db);
    let si_coupling = db_to_linear(params.si_coupling_db);
    // Standard normal scaled to variance 1/2 per quadrature component.
    let half_normal = Normal::new(0.0, (0.5_f64).sqrt()).expect("valid normal");
    let unit_normal = Normal::new(0.0, 1.0).expect("valid normal");

    let mut h = Array2::<f64>::zeros((n_subcarriers, n_dl));
    let mut g = Array2::<f64>::zeros((n_subcarriers, n_ul));
    let mut f = Array3::<f64>::zeros((n_subcarriers, n_ul, n_dl));
    let mut l_si = Array1::<f64>::zeros(n_subcarriers);

    for i in 0..n_subcarriers {
        for m in 0..n_dl {
            h[[i, m]] = omega[m] * rayleigh_power(&half_normal, rng) / sigma_dl;
        }
        for r in 0..n_ul {
            g[[i, r]] = varrho[r] * rayleigh_power(&half_normal, rng) / sigma_bs;
        }
        for r in 0..n_ul {
            for m in 0..n_dl {
                f[[i, r, m]] = theta[[r, m]] * rayleigh_power(&half_normal, rng) / sigma_dl;
            }
        }
        l_si[i] = si_coupling * rician_power(k_rician, &unit_normal, rng) / sigma_bs;
    }

    let gains = ChannelGains { n_subcarriers, n_dl, n_ul, h, g, f, l_si };
    gains.validate()?;
    Ok(gains)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_stay_inside_annulus() {
        let geom = CellGeometry::default();
        let mut rng = trial_rng(7, 0);
        let (dl, ul) = sample_user_positions(&geom, 64, 64, &mut rng).unwrap();
        for p in dl.iter().chain(ul.iter()) {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!((30.0..=600.0).contains(&r), "radius {r} outside annulus");
        }
    }

    #[test]
    fn degenerate_annulus_pins_radius() {
        let geom = CellGeometry::new(600.0 - 1e-6, 600.0).unwrap();
        let mut rng = trial_rng(1, 0);
        let (dl, _) = sample_user_positions(&geom, 100, 1, &mut rng).unwrap();
        for p in &dl {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!(r >= 600.0 - 1e-6 - 1e-9 && r <= 600.0 + 1e-9);
        }
    }

    /// Monte Carlo oracle for the area-uniform law: E[r^2] = (inner^2 + outer^2) / 2.
    #[test]
    fn radius_squared_moment_matches_area_uniform_law() {
        let geom = CellGeometry::default();
        let mut rng = trial_rng(42, 0);
        let n = 100_000;
        let (dl, _) = sample_user_positions(&geom, n, 1, &mut rng).unwrap();
        let mean_r2: f64 = dl.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() / n as f64;
        let expected = (30.0_f64.powi(2) + 600.0_f64.powi(2)) / 2.0;
        assert!(
            (mean_r2 - expected).abs() / expected < 0.01,
            "mean r^2 {mean_r2} vs expected {expected}"
        );
    }

    #[test]
    fn invalid_geometry_is_rejected() {
        assert!(CellGeometry::new(600.0, 30.0).is_err());
        assert!(CellGeometry::new(0.0, 30.0).is_err());
        let geom = CellGeometry { inner_radius_m: 600.0, outer_radius_m: 30.0 };
        let mut rng = trial_rng(0, 0);
        assert!(sample_user_positions(&geom, 1, 1, &mut rng).is_err());
    }

    #[test]
    fn path_gain_reference_distance() {
        let params = LargeScaleParams::default();
        // Free-space loss at 1 m and 2.5 GHz is about 40.4 dB.
        let g0 = path_gain(1.0, &params, LinkKind::Cci);
        let expected_db = -20.0 * (4.0 * std::f64::consts::PI * 2.5e9 / SPEED_OF_LIGHT).log10();
        assert!((10.0 * g0.log10() - expected_db).abs() < 1e-9);
        assert!((expected_db + 40.4).abs() < 0.1, "FSPL(1 m) should be ~40.4 dB, got {expected_db}");
    }

    #[test]
    fn path_gain_decade_slope() {
        let params = LargeScaleParams::default();
        let g1 = path_gain(10.0, &params, LinkKind::Dl);
        let g2 = path_gain(100.0, &params, LinkKind::Dl);
        let drop_db = 10.0 * (g1 / g2).log10();
        assert!((drop_db - 36.0).abs() < 1e-9, "36 dB per decade for alpha=3.6, got {drop_db}");
    }

    #[test]
    fn antenna_gain_applies_to_bs_links_only() {
        let params = LargeScaleParams::default();
        let d = 120.0;
        let dl = path_gain(d, &params, LinkKind::Dl);
        let ul = path_gain(d, &params, LinkKind::Ul);
        let cci = path_gain(d, &params, LinkKind::Cci);
        assert!((10.0 * (dl / cci).log10() - 10.0).abs() < 1e-9);
        assert_eq!(dl, ul);
    }

    #[test]
    fn path_gain_clamps_below_reference() {
        let params = LargeScaleParams::default();
        assert_eq!(path_gain(0.2, &params, LinkKind::Dl), path_gain(1.0, &params, LinkKind::Dl));
    }

    #[test]
    fn path_gain_monotone_in_distance() {
        let params = LargeScaleParams::default();
        let mut prev = f64::INFINITY;
        for d in [1.0, 2.0, 5.0, 30.0, 100.0, 599.0, 1200.0] {
            let g = path_gain(d, &params, LinkKind::Cci);
            assert!(g < prev);
            prev = g;
        }
    }

    #[test]
    fn rayleigh_power_is_unit_mean() {
        let mut rng = trial_rng(3, 0);
        let normal = Normal::new(0.0, (0.5_f64).sqrt()).unwrap();
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| rayleigh_power(&normal, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "Rayleigh power mean {mean}");
    }

    #[test]
    fn rician_power_is_unit_mean_with_5db_k() {
        let mut rng = trial_rng(4, 0);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let k = db_to_linear(5.0);
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| rician_power(k, &normal, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "Rician power mean {mean}");
        // LOS-to-scatter power ratio is the K-factor itself: 10^0.5.
        let los_power = k / (k + 1.0);
        let scatter_power = 1.0 / (k + 1.0);
        assert!((los_power / scatter_power - 10.0_f64.powf(0.5)).abs() < 1e-12);
    }

    #[test]
    fn small_scale_means_within_two_percent_per_link_type() {
        let geom = CellGeometry::default();
        let params = LargeScaleParams::default();
        // Normalize out the deterministic parts to isolate fading power.
        let mut rng = trial_rng(11, 0);
        let n_sub = 2_500;
        let gains = sample_channel_realization(&geom, &params, n_sub, 2, 2, &mut rng).unwrap();
        let mut rng2 = trial_rng(11, 0);
        let (dl_pos, ul_pos) = sample_user_positions(&geom, 2, 2, &mut rng2).unwrap();
        let sigma_dl = params.noise_dl_watts();
        let sigma_bs = params.noise_bs_watts();
        for m in 0..2 {
            let omega = path_gain(distance([0.0, 0.0], dl_pos[m]), &params, LinkKind::Dl);
            let mean: f64 =
                (0..n_sub).map(|i| gains.h[[i, m]] * sigma_dl / omega).sum::<f64>() / n_sub as f64;
            assert!((mean - 1.0).abs() < 0.04, "|h|^2 mean {mean}");
        }
        for r in 0..2 {
            let varrho = path_gain(distance(ul_pos[r], [0.0, 0.0]), &params, LinkKind::Ul);
            let mean: f64 =
                (0..n_sub).map(|i| gains.g[[i, r]] * sigma_bs / varrho).sum::<f64>() / n_sub as f64;
            assert!((mean - 1.0).abs() < 0.04, "|g|^2 mean {mean}");
        }
        let coupling = db_to_linear(params.si_coupling_db);
        let mean_si: f64 =
            (0..n_sub).map(|i| gains.l_si[i] * sigma_bs / coupling).sum::<f64>() / n_sub as f64;
        assert!((mean_si - 1.0).abs() < 0.04, "|l_si|^2 fading mean {mean_si}");
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let geom = CellGeometry::default();
        let params = LargeScaleParams::default();
        let a = sample_channel_realization(&geom, &params, 8, 3, 2, &mut trial_rng(99, 5)).unwrap();
        let b = sample_channel_realization(&geom, &params, 8, 3, 2, &mut trial_rng(99, 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let geom = CellGeometry::default();
        let params = LargeScaleParams::default();
        let a = sample_channel_realization(&geom, &params, 4, 1, 1, &mut trial_rng(99, 0)).unwrap();
        let b = sample_channel_realization(&geom, &params, 4, 1, 1, &mut trial_rng(99, 1)).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn csv_dump_covers_every_entry() {
        let geom = CellGeometry::default();
        let params = LargeScaleParams::default();
        let gains = sample_channel_realization(&geom, &params, 3, 2, 2, &mut trial_rng(5, 0)).unwrap();
        let mut buf = Vec::new();
        gains.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows = text.lines().count() - 1;
        assert_eq!(rows, 3 * (2 + 2 + 4 + 1));
        assert!(text.lines().nth(1).unwrap().starts_with("0,H,0,-1,"));
    }
}
