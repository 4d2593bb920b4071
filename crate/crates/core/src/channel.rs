//! Link power model: required transmit power under path loss and lognormal
//! shadowing, quantized onto the radio's discrete power levels.
//!
//! All internal arithmetic is in mW. dBm only appears in the constructors
//! and in the helpers [`dbm_to_mw`] / [`mw_to_dbm`].

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used when matching a power value against a level, so that
/// values that went through a dBm round trip still land on their level.
pub const LEVEL_RTOL: f64 = 1e-9;

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// `0 mW` maps to `-inf` dBm.
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Standard normal CDF via the complementary error function, accurate in
/// both tails.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// The finite set of transmit powers a radio can be set to, in mW.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PowerLevelSet {
    levels: Vec<f64>,
}

impl PowerLevelSet {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Config("power level set is empty".into()));
        }
        if levels.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return Err(Error::Config(format!(
                "power levels must be finite and positive: {levels:?}"
            )));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!(
                "power levels must be strictly increasing: {levels:?}"
            )));
        }
        Ok(Self { levels })
    }

    pub fn from_dbm(levels_dbm: &[f64]) -> Result<Self> {
        Self::new(levels_dbm.iter().copied().map(dbm_to_mw).collect())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.levels[0]
    }

    /// The radio's maximum transmit power.
    pub fn max(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    /// Index of the smallest level at or above `p_mw`, saturating at the top.
    pub fn quantize_index(&self, p_mw: f64) -> usize {
        self.levels
            .iter()
            .position(|&l| l * (1.0 + LEVEL_RTOL) >= p_mw)
            .unwrap_or(self.levels.len() - 1)
    }

    /// Index of the level equal to `p_mw` (up to [`LEVEL_RTOL`]).
    pub fn index_of(&self, p_mw: f64) -> Option<usize> {
        self.levels
            .iter()
            .position(|&l| (l - p_mw).abs() <= LEVEL_RTOL * l)
    }

    /// Whether `p_mw` exceeds the maximum level.
    pub fn exceeds_max(&self, p_mw: f64) -> bool {
        p_mw > self.max() * (1.0 + LEVEL_RTOL)
    }

    /// Largest `q` such that every level is an integer multiple of `q`, if
    /// one exists with at most 10^4 steps below the smallest level.
    pub fn grid_pitch(&self) -> Option<f64> {
        let min = self.min();
        (1..=10_000).find_map(|k| {
            let q = min / k as f64;
            self.levels
                .iter()
                .all(|&l| {
                    let u = l / q;
                    (u - u.round()).abs() <= 1e-6
                })
                .then_some(q)
        })
    }
}

impl TryFrom<Vec<f64>> for PowerLevelSet {
    type Error = Error;

    fn try_from(levels: Vec<f64>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<PowerLevelSet> for Vec<f64> {
    fn from(set: PowerLevelSet) -> Self {
        set.levels
    }
}

/// Smallest level at or above `p_req`; the maximum level when `p_req` exceeds
/// it. Exceeding the maximum is a failure event tracked by callers.
pub fn quantize_power(p_req: f64, levels: &PowerLevelSet) -> f64 {
    levels.levels[levels.quantize_index(p_req)]
}

/// Path-loss and shadowing parameters.
///
/// Required power for a link of `r` meters with shadowing sample `nu` dB is
/// `psi / alpha_gain * r^eta * 10^(nu/10)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub eta: f64,
    pub sigma_db: f64,
    /// Composite gain `alpha / r0^-eta`, linear (m^eta).
    pub alpha_gain: f64,
    /// Target mean received power, mW.
    pub psi_mw: f64,
    /// Minimum acceptable received power, mW.
    pub p_rcv_min_mw: f64,
    /// Step length, meters.
    pub step_m: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eta > 0.0
            && self.sigma_db >= 0.0
            && self.alpha_gain > 0.0
            && self.p_rcv_min_mw > 0.0
            && self.psi_mw > self.p_rcv_min_mw
            && self.step_m > 0.0
            && [self.eta, self.sigma_db, self.alpha_gain, self.psi_mw, self.step_m]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid channel parameters: {self:?}")))
        }
    }

    /// Median required power (shadowing sample 0 dB) at `steps` steps.
    pub fn median_power_at_steps(&self, steps: u32) -> f64 {
        self.psi_mw / self.alpha_gain * (steps as f64 * self.step_m).powf(self.eta)
    }
}

/// Transmit power needed to hit the mean received-power target over a link
/// of `r_m` meters with shadowing sample `nu_db`.
pub fn required_power(params: &ChannelParams, r_m: f64, nu_db: f64) -> Result<f64> {
    if !(r_m > 0.0) {
        return Err(Error::Domain(format!("link distance must be positive, got {r_m}")));
    }
    Ok(params.psi_mw / params.alpha_gain * r_m.powf(params.eta) * 10f64.powf(nu_db / 10.0))
}

/// Outage probability of a link whose mean received power is `psi_mw` under
/// unit-mean exponential (Rayleigh power) fading.
pub fn outage_probability(psi_mw: f64, p_rcv_min_mw: f64) -> f64 {
    -(-p_rcv_min_mw / psi_mw).exp_m1()
}

/// One sampled link measurement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkSample {
    pub required_mw: f64,
    pub level_index: usize,
    pub level_mw: f64,
    /// The continuous requirement exceeds the maximum level.
    pub failed: bool,
}

/// Per-distance pmfs `g(r, .)` of the quantized required power, for
/// `r = 1..=max_steps`. Immutable after construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkPowerModel {
    params: ChannelParams,
    levels: PowerLevelSet,
    /// `pmf[r - 1][i] = P(Gamma_r = levels[i])`.
    pmf: Vec<Vec<f64>>,
    /// `fail_prob[r - 1] = P(required power at r steps > max level)`.
    fail_prob: Vec<f64>,
}

/// Builds the pmf table for distances `1..=max_steps` steps.
pub fn build_pmf(
    params: ChannelParams,
    levels: PowerLevelSet,
    max_steps: u32,
) -> Result<LinkPowerModel> {
    params.validate()?;
    if max_steps == 0 {
        return Err(Error::Config("pmf horizon must be at least one step".into()));
    }
    let k = levels.len();
    let mut pmf = Vec::with_capacity(max_steps as usize);
    let mut fail_prob = Vec::with_capacity(max_steps as usize);
    for r in 1..=max_steps {
        let median = params.median_power_at_steps(r);
        let cdf_at = |level: f64| -> f64 {
            if params.sigma_db == 0.0 {
                if level * (1.0 + LEVEL_RTOL) >= median {
                    1.0
                } else {
                    0.0
                }
            } else {
                std_normal_cdf(10.0 * (level / median).log10() / params.sigma_db)
            }
        };
        let mut row = Vec::with_capacity(k);
        let mut prev = 0.0;
        for (i, &level) in levels.levels().iter().enumerate() {
            let c = if i + 1 == k { 1.0 } else { cdf_at(level) };
            row.push(c - prev);
            prev = c;
        }
        pmf.push(row);
        fail_prob.push(1.0 - cdf_at(levels.max()));
    }
    Ok(LinkPowerModel {
        params,
        levels,
        pmf,
        fail_prob,
    })
}

impl LinkPowerModel {
    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn levels(&self) -> &PowerLevelSet {
        &self.levels
    }

    pub fn max_steps(&self) -> u32 {
        self.pmf.len() as u32
    }

    fn check_r(&self, r: u32) -> Result<usize> {
        if r == 0 || r > self.max_steps() {
            return Err(Error::OutOfRange {
                what: "distance (steps)",
                value: r.to_string(),
                valid: format!("1..={}", self.max_steps()),
            });
        }
        Ok(r as usize - 1)
    }

    /// `g(r, .)` over the level set.
    pub fn pmf(&self, r: u32) -> Result<&[f64]> {
        Ok(&self.pmf[self.check_r(r)?])
    }

    /// `G_r(levels[i])`.
    pub fn cdf(&self, r: u32, i: usize) -> Result<f64> {
        Ok(self.pmf(r)?[..=i].iter().sum())
    }

    pub fn fail_prob(&self, r: u32) -> Result<f64> {
        Ok(self.fail_prob[self.check_r(r)?])
    }

    /// `E(Gamma_r)`.
    pub fn mean_level_power(&self, r: u32) -> Result<f64> {
        Ok(self
            .pmf(r)?
            .iter()
            .zip(self.levels.levels())
            .map(|(p, l)| p * l)
            .sum())
    }

    /// `E max{floor_mw, Gamma_r}`.
    pub fn mean_max_with(&self, r: u32, floor_mw: f64) -> Result<f64> {
        Ok(self
            .pmf(r)?
            .iter()
            .zip(self.levels.levels())
            .map(|(p, l)| p * l.max(floor_mw))
            .sum())
    }

    /// Draws the shadowing for a link of `r` steps and quantizes the
    /// resulting requirement. Valid for any `r >= 1`, including distances
    /// beyond the tabulated horizon.
    pub fn sample_required_power<R: Rng + ?Sized>(&self, r: u32, rng: &mut R) -> Result<LinkSample> {
        if r == 0 {
            return Err(Error::Domain("link distance must be at least one step".into()));
        }
        let z: f64 = rng.sample(StandardNormal);
        let required_mw = required_power(
            &self.params,
            r as f64 * self.params.step_m,
            self.params.sigma_db * z,
        )?;
        let level_index = self.levels.quantize_index(required_mw);
        Ok(LinkSample {
            required_mw,
            level_index,
            level_mw: self.levels.levels()[level_index],
            failed: self.levels.exceeds_max(required_mw),
        })
    }

    /// CSV with one row per distance: `r_steps,r_m,g_<level dBm>...,fail_prob`.
    pub fn pmf_csv(&self) -> String {
        let mut out = String::from("r_steps,r_m");
        for l in self.levels.levels() {
            let _ = write!(out, ",g_{}dBm", fmt_dbm(*l));
        }
        out.push_str(",fail_prob\n");
        for (idx, row) in self.pmf.iter().enumerate() {
            let r = idx + 1;
            let _ = write!(out, "{r},{}", r as f64 * self.params.step_m);
            for p in row {
                let _ = write!(out, ",{p:e}");
            }
            let _ = writeln!(out, ",{:e}", self.fail_prob[idx]);
        }
        out
    }
}

/// dBm rendering used in column names and CSV cells: two decimals, trailing
/// zeros trimmed, `-inf` for zero power.
pub fn fmt_dbm(mw: f64) -> String {
    if mw <= 0.0 {
        return "-inf".to_string();
    }
    let s = format!("{:.2}", mw_to_dbm(mw));
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base_params() -> ChannelParams {
        ChannelParams {
            eta: 2.5,
            sigma_db: 8.0,
            alpha_gain: 1e-3,
            psi_mw: 10f64.powf(-7.5),
            p_rcv_min_mw: 10f64.powf(-8.8),
            step_m: 2.0,
        }
    }

    fn base_levels() -> PowerLevelSet {
        PowerLevelSet::from_dbm(&[-25.0, -20.0, -15.0, -10.0, -5.0, 0.0, 3.0]).unwrap()
    }

    #[test]
    fn required_power_hand_values() {
        let p = required_power(&base_params(), 20.0, 0.0).unwrap();
        let expected = 10f64.powf(-4.5) * 20f64.powf(2.5);
        assert!((p - expected).abs() < 1e-15);
        assert!((p - 0.056569).abs() < 1e-6);

        // Solve for the shadowing that puts a 20 m link exactly at 2 mW.
        let nu = 10.0 * (2.0 / expected).log10();
        assert!((nu - 15.48).abs() < 0.01);
        let at_nu = required_power(&base_params(), 20.0, nu).unwrap();
        assert!((at_nu - 2.0).abs() < 1e-12);
    }

    #[test]
    fn required_power_rejects_nonpositive_distance() {
        assert!(matches!(required_power(&base_params(), 0.0, 0.0), Err(Error::Domain(_))));
        assert!(required_power(&base_params(), -1.0, 0.0).is_err());
    }

    #[test]
    fn required_power_monotone_in_shadowing() {
        let p = base_params();
        let a = required_power(&p, 7.0, -3.0).unwrap();
        let b = required_power(&p, 7.0, 2.5).unwrap();
        assert!(a < b);
    }

    #[test]
    fn quantization_follows_next_higher_level() {
        let s = base_levels();
        // (-5, 0] dBm -> 0 dBm
        assert_eq!(quantize_power(dbm_to_mw(-4.9), &s), dbm_to_mw(0.0));
        assert_eq!(quantize_power(1.0, &s), 1.0);
        assert_eq!(quantize_power(dbm_to_mw(-5.0) * 1.0001, &s), 1.0);
        // above the maximum saturates
        assert_eq!(quantize_power(5.0, &s), s.max());
        // below the smallest level
        assert_eq!(quantize_power(1e-9, &s), s.min());
        // ties map to the level itself
        assert_eq!(quantize_power(dbm_to_mw(-20.0), &s), dbm_to_mw(-20.0));
        assert!(s.exceeds_max(5.0));
        assert!(!s.exceeds_max(s.max()));
    }

    #[test]
    fn level_set_validation() {
        assert!(PowerLevelSet::new(vec![]).is_err());
        assert!(PowerLevelSet::new(vec![1.0, 1.0]).is_err());
        assert!(PowerLevelSet::new(vec![2.0, 1.0]).is_err());
        assert!(PowerLevelSet::new(vec![0.0, 1.0]).is_err());
        assert!(PowerLevelSet::new(vec![0.5]).is_ok());
    }

    #[test]
    fn grid_pitch_detection() {
        let grid = PowerLevelSet::new((1..=20).map(|k| k as f64 * 0.1).collect()).unwrap();
        assert!((grid.grid_pitch().unwrap() - 0.1).abs() < 1e-12);
        let odd = PowerLevelSet::new(vec![0.2, 0.3]).unwrap();
        assert!((odd.grid_pitch().unwrap() - 0.1).abs() < 1e-12);
        assert!(base_levels().grid_pitch().is_none());
    }

    #[test]
    fn outage_values() {
        let v = outage_probability(10f64.powf(-7.5), 10f64.powf(-8.8));
        let expected = 1.0 - (-10f64.powf(-1.3)).exp();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 0.0489).abs() < 1e-4);
        assert_eq!(outage_probability(1.0, 0.0), 0.0);
        assert!((outage_probability(1.0, 1.0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn pmf_rows_and_fail_prob() {
        let m = build_pmf(base_params(), base_levels(), 20).unwrap();
        for r in 1..=20 {
            let s: f64 = m.pmf(r).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "row {r} sums to {s}");
        }
        let f = m.fail_prob(10).unwrap();
        // 1 - Phi(10 log10(p_max / 0.056569) / 8), p_max = 3 dBm
        let z = 10.0 * (dbm_to_mw(3.0) / (10f64.powf(-4.5) * 20f64.powf(2.5))).log10() / 8.0;
        assert!((z - 1.935).abs() < 1e-3);
        assert!((f - (1.0 - std_normal_cdf(z))).abs() < 1e-12, "{f} vs {}", 1.0 - std_normal_cdf(z));
        assert!((0.0260..=0.0270).contains(&f), "fail_prob(10) = {f}");
        assert!(m.pmf(0).is_err());
        assert!(m.pmf(21).is_err());
    }

    #[test]
    fn degenerate_single_level() {
        let s = PowerLevelSet::new(vec![0.5]).unwrap();
        let m = build_pmf(base_params(), s, 10).unwrap();
        for r in 1..=10 {
            assert_eq!(m.pmf(r).unwrap(), &[1.0]);
            assert_eq!(m.mean_level_power(r).unwrap(), 0.5);
        }
    }

    #[test]
    fn mean_level_power_matches_quadrature() {
        // Independent route: integrate quantize(required(nu)) * phi(nu) over nu
        // with a fine midpoint rule on [-10 sigma, 10 sigma].
        let params = base_params();
        let levels = base_levels();
        let m = build_pmf(params, levels.clone(), 10).unwrap();
        for r in [1u32, 4, 10] {
            let n = 400_000;
            let (lo, hi) = (-80.0, 80.0);
            let h = (hi - lo) / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let nu = lo + (i as f64 + 0.5) * h;
                let dens = (-(nu / 8.0).powi(2) / 2.0).exp() / (8.0 * (2.0 * std::f64::consts::PI).sqrt());
                let p = required_power(&params, r as f64 * 2.0, nu).unwrap();
                acc += quantize_power(p, &levels) * dens * h;
            }
            let mean = m.mean_level_power(r).unwrap();
            assert!((acc - mean).abs() < 5e-5 * mean, "r={r}: quad {acc} vs {mean}");
        }
        // frozen from an adaptive piecewise quadrature done offline
        assert!((m.mean_level_power(1).unwrap() - 4.133_995_570_96e-3).abs() < 1e-10);
        assert!((m.mean_level_power(10).unwrap() - 0.330_882_904_231_8).abs() < 1e-10);
    }

    #[test]
    fn sigma_zero_is_deterministic() {
        let mut params = base_params();
        params.sigma_db = 0.0;
        let m = build_pmf(params, base_levels(), 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for r in 1..=10 {
            let expect = quantize_power(required_power(&params, r as f64 * 2.0, 0.0).unwrap(), m.levels());
            let s = m.sample_required_power(r, &mut rng).unwrap();
            assert_eq!(s.level_mw, expect);
            let row = m.pmf(r).unwrap();
            assert_eq!(row[m.levels().index_of(expect).unwrap()], 1.0);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = build_pmf(base_params(), base_levels(), 10).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100)
                .map(|i| m.sample_required_power(1 + i % 10, &mut rng).unwrap().required_mw)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn fmt_dbm_rendering() {
        assert_eq!(fmt_dbm(dbm_to_mw(-25.0)), "-25");
        assert_eq!(fmt_dbm(1.0), "0");
        assert_eq!(fmt_dbm(2.0), "3.01");
        assert_eq!(fmt_dbm(0.0), "-inf");
    }
}
