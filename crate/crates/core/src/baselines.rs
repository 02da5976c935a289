//! Underlay and interweave reference schemes.
//!
//! Underlay: the cognitive transmitter caps its interference at the primary
//! receiver, `p2 * s21 <= P_th`, with a peak power calibrated so the average
//! power matches the budget. Interweave: the links split time, the cognitive
//! link bursting at `P2_budget / tau` in its share.

use crate::amc::AmcTable;
use crate::channel::{sample_block_nonzero, FadingSample, Scenario};
use crate::error::{Error, Result};
use crate::eval::{evaluate_rule, BlockOutcome, BlockRule, LinkContext};
use crate::sim::{self, sharded};

/// Interweave burst power and the underlay peak are capped at this multiple
/// of the budget.
pub const BURST_CAP_FACTOR: f64 = 10.0;
pub const DEFAULT_UNDERLAY_POINTS: usize = 41;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnderlayConfig {
    /// `P_th`, watts at the primary receiver.
    pub interference_threshold: f64,
    pub peak_power: f64,
}

impl UnderlayConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.interference_threshold >= 0.0) || !(self.peak_power >= 0.0) {
            return Err(Error::InvalidScenario(format!(
                "underlay threshold and peak power must be non-negative, got {} and {}",
                self.interference_threshold, self.peak_power
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdmaConfig {
    /// Fraction of time given to the cognitive link.
    pub cognitive_share: f64,
}

impl TdmaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.cognitive_share) {
            return Err(Error::InvalidScenario(format!(
                "tdma share must lie in [0, 1], got {}",
                self.cognitive_share
            )));
        }
        Ok(())
    }
}

/// Largest power meeting the interference cap, limited by the peak.
pub fn underlay_power(s21: f64, cfg: &UnderlayConfig) -> f64 {
    if cfg.interference_threshold == 0.0 {
        0.0
    } else if s21 == 0.0 {
        cfg.peak_power
    } else {
        cfg.peak_power.min(cfg.interference_threshold / s21)
    }
}

/// `(p2, k2, k1)` for one block.
pub fn underlay_block(sample: &FadingSample, cfg: &UnderlayConfig, ctx: &LinkContext) -> (f64, f64, f64) {
    let o = ctx.simultaneous(sample, underlay_power(sample.s21(), cfg));
    (o.power, o.cognitive_rate, o.primary_rate)
}

pub struct UnderlayRule {
    pub ctx: LinkContext,
    pub cfg: UnderlayConfig,
}

impl BlockRule for UnderlayRule {
    fn outcome(&self, sample: &FadingSample) -> BlockOutcome {
        let p2 = underlay_power(sample.s21(), &self.cfg);
        debug_assert!(p2 * sample.s21() <= self.cfg.interference_threshold * (1.0 + 4.0 * f64::EPSILON));
        self.ctx.simultaneous(sample, p2)
    }
}

/// Pilot draws of `s21` for peak-power calibration.
#[derive(Debug, Clone)]
pub struct PeakCalibration {
    /// Ascending.
    s21: Vec<f64>,
    /// `inv_tail[k] = sum_{j >= k} 1 / s21[j]`.
    inv_tail: Vec<f64>,
}

impl PeakCalibration {
    pub fn new(scenario: &Scenario, n: u64, seed: u64) -> Self {
        let mut s21: Vec<f64> = sharded(n, sim::derive_seed(seed, sim::tag::UNDERLAY_CALIBRATION), |rng, k| {
            (0..k)
                .map(|_| sample_block_nonzero(scenario, rng).s21())
                .collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect();
        s21.sort_by(f64::total_cmp);
        let mut inv_tail = vec![0.0; s21.len() + 1];
        for k in (0..s21.len()).rev() {
            inv_tail[k] = inv_tail[k + 1] + 1.0 / s21[k];
        }
        PeakCalibration { s21, inv_tail }
    }

    /// Pilot average of `min(peak, pth / s21)`.
    pub fn mean_power(&self, pth: f64, peak: f64) -> f64 {
        if self.s21.is_empty() || pth == 0.0 {
            return 0.0;
        }
        // Blocks with s21 < pth / peak are capped at the peak.
        let k = self.s21.partition_point(|&s| s * peak < pth);
        let capped = if k == 0 { 0.0 } else { k as f64 * peak };
        (capped + pth * self.inv_tail[k]) / self.s21.len() as f64
    }
}

/// Peak power making the pilot average equal `budget`, at most
/// `BURST_CAP_FACTOR * budget`. Without a cap `E[pth / s21]` is infinite for
/// Rayleigh fading, so the pilot average would understate the true one.
pub fn calibrate_peak_power(cal: &PeakCalibration, pth: f64, budget: f64) -> f64 {
    let cap = BURST_CAP_FACTOR * budget;
    if budget == 0.0 || budget.is_infinite() || pth == 0.0 || cal.mean_power(pth, cap) <= budget {
        return cap;
    }
    // The mean never exceeds the peak, so `budget` is a lower bracket.
    let (mut lo, mut hi) = (budget, cap);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if cal.mean_power(pth, mid) <= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Zero followed by a log grid from 1% of the noise power to ten times the
/// budget seen through the mean cross gain.
pub fn default_interference_thresholds(scenario: &Scenario) -> Vec<f64> {
    let scale = if scenario.cognitive_power_budget.is_finite() {
        scenario.cognitive_power_budget
    } else {
        scenario.primary_power
    };
    if scale == 0.0 {
        return vec![0.0];
    }
    let lo = (0.01 * scenario.noise_power).log10();
    let hi = (10.0 * scale * scenario.mean_gain[1][0]).log10();
    let n = DEFAULT_UNDERLAY_POINTS;
    std::iter::once(0.0)
        .chain((0..n).map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (n - 1) as f64)))
        .collect()
}

/// `tau = 0, 0.05, ..., 1`.
pub fn default_tdma_shares() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 20.0).collect()
}

pub fn burst_power(budget: f64, share: f64) -> f64 {
    if share == 0.0 {
        0.0
    } else {
        (budget / share).min(BURST_CAP_FACTOR * budget)
    }
}

pub struct InterweaveRule {
    pub ctx: LinkContext,
    pub cfg: TdmaConfig,
    pub budget: f64,
}

impl BlockRule for InterweaveRule {
    fn outcome(&self, sample: &FadingSample) -> BlockOutcome {
        let ctx = &self.ctx;
        let tau = self.cfg.cognitive_share;
        let burst = burst_power(self.budget, tau);
        let (n, pv) = ctx.primary(ctx.primary_power * sample.s11() / ctx.noise_power);
        let solo = ctx.simultaneous(
            &FadingSample {
                gain: [[0.0, 0.0], [0.0, sample.s22()]],
            },
            burst,
        );
        let m_silent = if solo.cognitive_rate == 0.0 { 1.0 } else { 0.0 };
        BlockOutcome {
            primary_rate: (1.0 - tau) * ctx.table.rate(n),
            cognitive_rate: tau * solo.cognitive_rate,
            power: tau * burst,
            primary_outage: tau + (1.0 - tau) * if n == 0 { 1.0 } else { 0.0 },
            cognitive_silence: (1.0 - tau) + tau * m_silent,
            primary_violation: pv && tau < 1.0,
            cognitive_violation: solo.cognitive_violation && tau > 0.0,
        }
    }
}

/// `(primary ASE, cognitive ASE)` of one time share.
pub fn interweave_tdma(
    scenario: &Scenario,
    table: &AmcTable,
    cfg: &TdmaConfig,
    n_blocks: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    let rule = InterweaveRule {
        ctx: LinkContext::new(scenario, table)?,
        cfg: *cfg,
        budget: scenario.cognitive_power_budget,
    };
    let r = evaluate_rule(&rule, scenario, n_blocks, seed);
    Ok((r.primary_ase.mean, r.cognitive_ase.mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amc::default_table;
    use crate::channel::default_scenario;

    fn ctx() -> LinkContext {
        LinkContext::new(&default_scenario(), &default_table()).unwrap()
    }

    #[test]
    fn underlay_edges() {
        let sample = FadingSample {
            gain: [[1.0, 0.1], [0.0, 1.0]],
        };
        let cfg = UnderlayConfig {
            interference_threshold: 0.01,
            peak_power: 2.0,
        };
        assert_eq!(underlay_power(0.0, &cfg), 2.0);
        assert_eq!(underlay_power(1.0, &cfg), 0.01);
        let off = UnderlayConfig {
            interference_threshold: 0.0,
            peak_power: 2.0,
        };
        let (p2, k2, k1) = underlay_block(&sample, &off, &ctx());
        assert_eq!((p2, k2), (0.0, 0.0));
        assert_eq!(k1, default_table().top_rate());
    }

    #[test]
    fn calibration_hits_budget() {
        let scenario = default_scenario();
        let cal = PeakCalibration::new(&scenario, 50_000, 2);
        let pth = 0.05;
        let peak = calibrate_peak_power(&cal, pth, 1.0);
        assert!(peak.is_finite());
        let direct = cal.s21.iter().map(|&s| peak.min(pth / s)).sum::<f64>() / cal.s21.len() as f64;
        assert!((direct - 1.0).abs() < 1e-9, "{direct}");
        assert!((cal.mean_power(pth, peak) - direct).abs() < 1e-9);
        // A tiny threshold never reaches the budget.
        assert_eq!(calibrate_peak_power(&cal, 1e-9, 1.0), BURST_CAP_FACTOR);
    }

    #[test]
    fn burst_power_cap() {
        assert_eq!(burst_power(1.0, 0.0), 0.0);
        assert_eq!(burst_power(1.0, 0.5), 2.0);
        assert_eq!(burst_power(1.0, 0.05), 10.0);
        assert_eq!(burst_power(1.0, 1.0), 1.0);
    }

    #[test]
    fn tdma_edges() {
        let scenario = default_scenario();
        let table = default_table();
        let (p0, c0) = interweave_tdma(&scenario, &table, &TdmaConfig { cognitive_share: 0.0 }, 20_000, 4).unwrap();
        assert_eq!(c0, 0.0);
        assert!(p0 > 0.0);
        let (p1, _) = interweave_tdma(&scenario, &table, &TdmaConfig { cognitive_share: 1.0 }, 20_000, 4).unwrap();
        assert_eq!(p1, 0.0);
        assert!(TdmaConfig { cognitive_share: 1.5 }.validate().is_err());
    }

    #[test]
    fn default_grids() {
        let t = default_tdma_shares();
        assert_eq!(t.len(), 21);
        assert_eq!((t[0], t[20]), (0.0, 1.0));
        let p = default_interference_thresholds(&default_scenario());
        assert_eq!(p.len(), DEFAULT_UNDERLAY_POINTS + 1);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
    }
}
