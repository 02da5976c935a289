//! Block-fading interference channel between a primary and a cognitive link.
//!
//! Gains are indexed `gain[i][j]` for the power gain from transmitter `i+1`
//! to receiver `j+1`: `[0][0]` is the primary direct link, `[1][1]` the
//! cognitive direct link, `[1][0]` the cognitive transmitter's interference at
//! the primary receiver and `[0][1]` the primary's interference at the
//! cognitive receiver. Power gains are exponential (Rayleigh envelopes),
//! constant over a block and independent across blocks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::Exp1;

use crate::amc::BerTargets;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mean_gain: [[f64; 2]; 2],
    pub noise_power: f64,
    pub primary_power: f64,
    pub cognitive_power_budget: f64,
    pub ber_targets: BerTargets,
    /// Minimum average spectral efficiency the primary must keep (b/s/Hz).
    pub required_primary_ase: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        for row in &self.mean_gain {
            for &g in row {
                if !(g > 0.0 && g.is_finite()) {
                    return Err(Error::InvalidScenario(format!("mean gains must be positive, got {g}")));
                }
            }
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::InvalidScenario("n0 must be positive".into()));
        }
        if !(self.primary_power > 0.0) {
            return Err(Error::InvalidScenario("p1 must be positive".into()));
        }
        if !(self.cognitive_power_budget >= 0.0) {
            return Err(Error::InvalidScenario("p2_budget must be non-negative".into()));
        }
        if !(self.required_primary_ase >= 0.0) {
            return Err(Error::InvalidScenario("k1_required must be non-negative".into()));
        }
        self.ber_targets.validate()
    }

    /// Direct-link SNR of the primary when the cognitive link is silent.
    pub fn primary_solo_snr(&self, sample: &FadingSample) -> f64 {
        self.primary_power * sample.gain[0][0] / self.noise_power
    }
}

/// Realized power gains of one fading block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingSample {
    pub gain: [[f64; 2]; 2],
}

impl FadingSample {
    pub fn s11(&self) -> f64 {
        self.gain[0][0]
    }
    pub fn s12(&self) -> f64 {
        self.gain[0][1]
    }
    pub fn s21(&self) -> f64 {
        self.gain[1][0]
    }
    pub fn s22(&self) -> f64 {
        self.gain[1][1]
    }
}

/// Interference-limited SNIRs with both transmit powers factored out:
/// `alpha = s11 / s21`, `beta = s22 / s12`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledSnir {
    pub alpha: f64,
    pub beta: f64,
}

impl ScaledSnir {
    pub fn product(&self) -> f64 {
        self.alpha * self.beta
    }

    pub fn ratio(&self) -> f64 {
        self.beta / self.alpha
    }
}

/// Draws one block with exponentially distributed power gains.
pub fn sample_block<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> FadingSample {
    let mut gain = [[0.0; 2]; 2];
    for (i, row) in gain.iter_mut().enumerate() {
        for (j, g) in row.iter_mut().enumerate() {
            let e: f64 = rng.sample(Exp1);
            *g = e * scenario.mean_gain[i][j];
        }
    }
    FadingSample { gain }
}

/// Draws a block whose cross gains are both positive, redrawing otherwise.
/// Exact zeros only arise from floating-point underflow.
pub fn sample_block_nonzero<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> FadingSample {
    loop {
        let s = sample_block(scenario, rng);
        if s.s21() > 0.0 && s.s12() > 0.0 {
            return s;
        }
    }
}

/// SNIRs at both receivers with interference treated as noise.
pub fn snir(sample: &FadingSample, p1: f64, p2: f64, n0: f64) -> (f64, f64) {
    let gamma1 = p1 * sample.s11() / (p2 * sample.s21() + n0);
    let gamma2 = p2 * sample.s22() / (p1 * sample.s12() + n0);
    (gamma1, gamma2)
}

/// `None` when a cross gain is zero; callers redraw.
pub fn scaled_snirs(sample: &FadingSample) -> Option<ScaledSnir> {
    if sample.s21() > 0.0 && sample.s12() > 0.0 {
        Some(ScaledSnir {
            alpha: sample.s11() / sample.s21(),
            beta: sample.s22() / sample.s12(),
        })
    } else {
        None
    }
}

/// Transceivers on the corners of a unit-height rectangle: direct distances
/// are 1 and cross distances `sqrt(1 + d^2)` for transmitter separation `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossGeometry {
    pub exponent: f64,
    pub tx_separation: f64,
}

pub fn pathloss_means(geometry: &PathLossGeometry) -> Result<[[f64; 2]; 2]> {
    if !(geometry.exponent > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "path-loss exponent must be positive, got {}",
            geometry.exponent
        )));
    }
    if !(geometry.tx_separation >= 0.0) {
        return Err(Error::InvalidScenario(format!(
            "transmitter separation must be non-negative, got {}",
            geometry.tx_separation
        )));
    }
    let d2 = geometry.tx_separation * geometry.tx_separation;
    let cross = (1.0 + d2).powf(-geometry.exponent / 2.0);
    Ok([[1.0, cross], [cross, 1.0]])
}

const KNOWN_KEYS: &[&str] = &[
    "s11_mean",
    "s12_mean",
    "s21_mean",
    "s22_mean",
    "n0",
    "p1",
    "p2_budget",
    "b1",
    "b2",
    "design_margin",
    "k1_required",
    "pathloss_d",
    "pathloss_e",
    "underlay_pth",
    "tdma_tau",
];

/// A `key = value` scenario document. Later `set` calls override parsed
/// values. When `pathloss_d` and `pathloss_e` are both present they define
/// the mean gains and the `*_mean` keys are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioDoc {
    values: BTreeMap<String, f64>,
}

impl ScenarioDoc {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = ScenarioDoc::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::ScenarioParse { line: lineno + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            doc.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::InvalidScenario(msg) => err(msg),
                other => other,
            })?;
        }
        Ok(doc)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::InvalidScenario(format!("unknown key {key:?}")));
        }
        let v: f64 = value
            .parse()
            .map_err(|_| Error::InvalidScenario(format!("{key}: bad number {value:?}")))?;
        self.values.insert(key.to_string(), v);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    fn require(&self, key: &str) -> Result<f64> {
        self.get(key)
            .ok_or_else(|| Error::InvalidScenario(format!("missing key {key:?}")))
    }

    pub fn pathloss(&self) -> Option<PathLossGeometry> {
        match (self.get("pathloss_d"), self.get("pathloss_e")) {
            (Some(d), Some(e)) => Some(PathLossGeometry {
                exponent: e,
                tx_separation: d,
            }),
            _ => None,
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        if self.get("pathloss_d").is_some() != self.get("pathloss_e").is_some() {
            return Err(Error::InvalidScenario(
                "pathloss_d and pathloss_e must be given together".into(),
            ));
        }
        let mean_gain = match self.pathloss() {
            Some(geometry) => pathloss_means(&geometry)?,
            None => [
                [self.require("s11_mean")?, self.require("s12_mean")?],
                [self.require("s21_mean")?, self.require("s22_mean")?],
            ],
        };
        let scenario = Scenario {
            mean_gain,
            noise_power: self.require("n0")?,
            primary_power: self.require("p1")?,
            cognitive_power_budget: self.require("p2_budget")?,
            ber_targets: BerTargets {
                primary: self.require("b1")?,
                cognitive: self.require("b2")?,
                design_margin: self.get("design_margin").unwrap_or(10.0),
            },
            required_primary_ase: self.get("k1_required").unwrap_or(0.0),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn underlay_pth(&self) -> Option<f64> {
        self.get("underlay_pth")
    }

    pub fn tdma_tau(&self) -> Option<f64> {
        self.get("tdma_tau")
    }

    pub fn to_document(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Weak-interference evaluation scenario: unit direct means, 0.05 cross
/// means, 60 dB primary SNR, equal transmit power, BER 1e-3 on both links
/// with a design margin of 10.
pub const DEFAULT_SCENARIO_DOCUMENT: &str = include_str!("../data/scenario_default.txt");

pub fn default_scenario_doc() -> ScenarioDoc {
    ScenarioDoc::parse(DEFAULT_SCENARIO_DOCUMENT).expect("shipped scenario is valid")
}

pub fn default_scenario() -> Scenario {
    default_scenario_doc().scenario().expect("shipped scenario is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::stream_rng;

    fn sample(s11: f64, s12: f64, s21: f64, s22: f64) -> FadingSample {
        FadingSample {
            gain: [[s11, s12], [s21, s22]],
        }
    }

    #[test]
    fn snir_silent_cognitive() {
        let s = sample(0.8, 0.1, 0.2, 1.3);
        let (g1, g2) = snir(&s, 2.0, 0.0, 0.01);
        assert!((g1 - 2.0 * 0.8 / 0.01).abs() < 1e-9);
        assert_eq!(g2, 0.0);
    }

    #[test]
    fn snir_symmetric() {
        let s = sample(0.7, 0.3, 0.3, 0.7);
        let (g1, g2) = snir(&s, 1.5, 1.5, 0.02);
        assert_eq!(g1, g2);
    }

    #[test]
    fn snir_without_cross_gain() {
        let s = sample(0.7, 0.3, 0.0, 0.7);
        let (g1, _) = snir(&s, 1.5, 4.0, 0.02);
        assert!((g1 - 1.5 * 0.7 / 0.02).abs() < 1e-12);
    }

    #[test]
    fn scaled_snirs_equal_gains() {
        let s = sample(0.4, 0.4, 0.4, 0.4);
        let a = scaled_snirs(&s).unwrap();
        assert_eq!((a.alpha, a.beta), (1.0, 1.0));
        assert!(scaled_snirs(&sample(1.0, 0.0, 1.0, 1.0)).is_none());
    }

    #[test]
    fn pathloss_examples() {
        let m = pathloss_means(&PathLossGeometry {
            exponent: 3.0,
            tx_separation: 0.0,
        })
        .unwrap();
        assert_eq!(m, [[1.0, 1.0], [1.0, 1.0]]);
        let m = pathloss_means(&PathLossGeometry {
            exponent: 3.0,
            tx_separation: 3.0f64.sqrt(),
        })
        .unwrap();
        assert!((m[0][1] - 0.125).abs() < 1e-12);
        assert!((m[1][0] - 0.125).abs() < 1e-12);
        let mut last = f64::INFINITY;
        for d in [0.0, 0.5, 1.0, 2.0, 10.0, 1e3] {
            let m = pathloss_means(&PathLossGeometry {
                exponent: 3.0,
                tx_separation: d,
            })
            .unwrap();
            assert!(m[0][1] < last || d == 0.0);
            last = m[0][1];
        }
        assert!(last < 1e-8);
        assert!(pathloss_means(&PathLossGeometry {
            exponent: 0.0,
            tx_separation: 1.0
        })
        .is_err());
    }

    #[test]
    fn gamma_monotone_in_cognitive_power() {
        let s = sample(0.9, 0.05, 0.07, 1.1);
        let mut prev = snir(&s, 1.0, 0.0, 1e-3);
        for k in 1..50 {
            let cur = snir(&s, 1.0, k as f64 * 0.1, 1e-3);
            assert!(cur.0 < prev.0);
            assert!(cur.1 > prev.1);
            prev = cur;
        }
    }

    #[test]
    fn sample_mean_matches_direct_mean() {
        let scenario = default_scenario();
        let mut rng = stream_rng(11, 0);
        let n = 1_000_000;
        let mean = (0..n).map(|_| sample_block(&scenario, &mut rng).s11()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn direct_gains_uncorrelated() {
        let scenario = default_scenario();
        let mut rng = stream_rng(12, 0);
        let n = 100_000;
        let draws: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let s = sample_block(&scenario, &mut rng);
                (s.s11(), s.s22())
            })
            .collect();
        let nf = n as f64;
        let mx = draws.iter().map(|d| d.0).sum::<f64>() / nf;
        let my = draws.iter().map(|d| d.1).sum::<f64>() / nf;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for &(x, y) in &draws {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let rho = sxy / (sxx * syy).sqrt();
        assert!(rho.abs() < 0.02, "{rho}");
    }

    #[test]
    fn scenario_doc_roundtrip_and_overrides() {
        let mut doc = default_scenario_doc();
        let s = doc.scenario().unwrap();
        assert_eq!(s.mean_gain, [[1.0, 0.05], [0.05, 1.0]]);
        doc.set("pathloss_d", "1").unwrap();
        assert!(doc.scenario().is_err());
        doc.set("pathloss_e", "3").unwrap();
        let s = doc.scenario().unwrap();
        assert!((s.mean_gain[0][1] - 2f64.powf(-1.5)).abs() < 1e-12);
        let again = ScenarioDoc::parse(&doc.to_document()).unwrap();
        assert_eq!(again, doc);
    }

    #[test]
    fn scenario_doc_errors() {
        assert!(matches!(
            ScenarioDoc::parse("n0 = 1\nfoo = 2\n"),
            Err(Error::ScenarioParse { line: 2, .. })
        ));
        assert!(matches!(
            ScenarioDoc::parse("n0 1\n"),
            Err(Error::ScenarioParse { line: 1, .. })
        ));
        let doc = ScenarioDoc::parse("n0 = 1\n").unwrap();
        assert!(doc.scenario().unwrap_err().to_string().contains("missing key"));
        let mut doc = default_scenario_doc();
        doc.set("s12_mean", "0").unwrap();
        assert!(doc.scenario().is_err());
    }
}
