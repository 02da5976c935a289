//! Transmission-mode tables, the exponential BER model and AMC mode selection.
//!
//! Each mode `n >= 1` carries a BER fit `coeff * exp(-decay * gamma)`. Inverting
//! the fit at a BER target gives the minimum SNIR the mode needs, and a link
//! picks the fastest mode whose threshold it clears. Mode 0 is outage.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// The shipped eight-mode table (rates 0, 0.5, 0.75, 1, 1.5, 2, 3, 4 b/s/Hz).
pub const DEFAULT_TABLE_DOCUMENT: &str = include_str!("../data/amc_default.txt");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmcMode {
    pub index: usize,
    /// Spectral efficiency in b/s/Hz.
    pub rate: f64,
    /// BER fit multiplier. Zero for the outage mode.
    pub coeff: f64,
    /// BER fit exponent. Zero for the outage mode.
    pub decay: f64,
}

impl AmcMode {
    pub fn outage() -> Self {
        AmcMode {
            index: 0,
            rate: 0.0,
            coeff: 0.0,
            decay: 0.0,
        }
    }

    pub fn is_outage(&self) -> bool {
        self.index == 0
    }
}

/// Bit error rate of `mode` at linear SNIR `gamma`.
pub fn ber(gamma: f64, mode: &AmcMode) -> Result<f64> {
    if mode.is_outage() {
        return Err(Error::OutageMode(mode.index));
    }
    Ok(mode.coeff * (-mode.decay * gamma.max(0.0)).exp())
}

/// Minimum linear SNIR at which `mode` meets the BER `target`.
pub fn snir_threshold(mode: &AmcMode, target: f64) -> Result<f64> {
    if mode.is_outage() {
        return Err(Error::OutageMode(mode.index));
    }
    if !(target > 0.0 && target <= mode.coeff) {
        return Err(Error::TargetOutOfRange {
            mode: mode.index,
            target,
            coeff: mode.coeff,
        });
    }
    Ok(-(target / mode.coeff).ln() / mode.decay)
}

/// Highest-rate mode whose threshold at `target` does not exceed `gamma`.
pub fn select_mode(gamma: f64, table: &AmcTable, target: f64) -> Result<&AmcMode> {
    let thresholds = ThresholdSet::new(table, target)?;
    Ok(&table.modes()[thresholds.select(gamma)])
}

/// Least-squares fit of `ln(ber) = ln(coeff) - decay * gamma` over `(gamma, ber)` samples.
pub fn fit_mode_constants(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    for &(gamma, ber) in samples {
        if !(ber > 0.0 && ber < 1.0) || !gamma.is_finite() {
            return Err(Error::InvalidSample { gamma, ber });
        }
    }
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples);
    }
    let n = samples.len() as f64;
    let mean_x = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let mean_y = samples.iter().map(|s| s.1.ln()).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(gamma, ber) in samples {
        let dx = gamma - mean_x;
        sxx += dx * dx;
        sxy += dx * (ber.ln() - mean_y);
    }
    if sxx <= 0.0 {
        return Err(Error::InsufficientSamples);
    }
    let slope = sxy / sxx;
    let decay = -slope;
    if !(decay > 0.0) {
        return Err(Error::NonPhysicalFit(decay));
    }
    let coeff = (mean_y - slope * mean_x).exp();
    Ok((coeff, decay))
}

/// An ordered set of transmission modes, mode 0 being outage.
#[derive(Debug, Clone, PartialEq)]
pub struct AmcTable {
    modes: Vec<AmcMode>,
}

impl AmcTable {
    /// Builds a table, checking the structural invariants (consecutive indices,
    /// strictly increasing rates, positive fit constants).
    pub fn new(modes: Vec<AmcMode>) -> Result<Self> {
        if modes.len() < 2 {
            return Err(Error::InvalidTable(
                "a table needs the outage mode and at least one transmitting mode".into(),
            ));
        }
        for (i, mode) in modes.iter().enumerate() {
            if mode.index != i {
                return Err(Error::InvalidTable(format!(
                    "mode at position {i} has index {}",
                    mode.index
                )));
            }
        }
        if modes[0].rate != 0.0 {
            return Err(Error::InvalidTable("mode 0 must have rate 0".into()));
        }
        for pair in modes.windows(2) {
            if !(pair[1].rate > pair[0].rate) {
                return Err(Error::InvalidTable(format!(
                    "rates must be strictly increasing, got {} then {} (modes {} and {})",
                    pair[0].rate, pair[1].rate, pair[0].index, pair[1].index
                )));
            }
        }
        for mode in &modes[1..] {
            if !(mode.coeff > 0.0 && mode.coeff.is_finite()) {
                return Err(Error::InvalidTable(format!(
                    "mode {} has non-positive coefficient {}",
                    mode.index, mode.coeff
                )));
            }
            if !(mode.decay > 0.0 && mode.decay.is_finite()) {
                return Err(Error::InvalidTable(format!(
                    "mode {} has non-positive decay {}",
                    mode.index, mode.decay
                )));
            }
        }
        let mut modes = modes;
        modes[0] = AmcMode::outage();
        Ok(AmcTable { modes })
    }

    /// Parses a table document: one `index rate coeff decay` line per mode,
    /// `#` comments, outage written as `0 0 - -`.
    pub fn parse(doc: &str) -> Result<Self> {
        let mut modes = Vec::new();
        for (lineno, raw) in doc.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::TableParse { line: lineno + 1, msg };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err(format!("expected 4 fields, found {}", fields.len())));
            }
            let index: usize = fields[0]
                .parse()
                .map_err(|_| err(format!("bad mode index {:?}", fields[0])))?;
            let rate: f64 = fields[1]
                .parse()
                .map_err(|_| err(format!("bad rate {:?}", fields[1])))?;
            let constant = |s: &str, what: &str| -> Result<f64> {
                if s == "-" {
                    if index == 0 {
                        return Ok(0.0);
                    }
                    return Err(err(format!("mode {index} is missing its {what}")));
                }
                s.parse().map_err(|_| err(format!("bad {what} {s:?}")))
            };
            let coeff = constant(fields[2], "coefficient")?;
            let decay = constant(fields[3], "decay")?;
            if index == 0 && (fields[2] != "-" || fields[3] != "-") {
                return Err(err("mode 0 must be written as `0 0 - -`".into()));
            }
            modes.push(AmcMode {
                index,
                rate,
                coeff,
                decay,
            });
        }
        AmcTable::new(modes)
    }

    pub fn to_document(&self) -> String {
        let mut out = String::from("# index rate coeff decay\n");
        for mode in &self.modes {
            if mode.is_outage() {
                out.push_str("0 0 - -\n");
            } else {
                let _ = writeln!(out, "{} {} {:e} {:e}", mode.index, mode.rate, mode.coeff, mode.decay);
            }
        }
        out
    }

    /// Checks that `target` is usable with this table: within every mode's
    /// fit range and producing strictly increasing thresholds.
    pub fn validate_target(&self, target: f64) -> Result<()> {
        ThresholdSet::new(self, target).map(|_| ())
    }

    pub fn modes(&self) -> &[AmcMode] {
        &self.modes
    }

    pub fn mode(&self, index: usize) -> &AmcMode {
        &self.modes[index]
    }

    /// Number of transmitting modes (N).
    pub fn top_index(&self) -> usize {
        self.modes.len() - 1
    }

    pub fn top_rate(&self) -> f64 {
        self.modes[self.top_index()].rate
    }

    pub fn rates(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.rate).collect()
    }

    pub fn rate(&self, index: usize) -> f64 {
        self.modes[index].rate
    }

    pub fn min_coeff(&self) -> f64 {
        self.modes[1..].iter().map(|m| m.coeff).fold(f64::INFINITY, f64::min)
    }
}

/// Parses and validates a table document at the design targets of both links.
pub fn load_table(doc: &str, targets: &BerTargets) -> Result<AmcTable> {
    let table = AmcTable::parse(doc)?;
    table.validate_target(targets.design_primary())?;
    table.validate_target(targets.design_cognitive())?;
    Ok(table)
}

pub fn default_table() -> AmcTable {
    AmcTable::parse(DEFAULT_TABLE_DOCUMENT).expect("shipped table is valid")
}

/// Application BER targets and the design margin applied to both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerTargets {
    pub primary: f64,
    pub cognitive: f64,
    /// Designs use `target / design_margin`.
    pub design_margin: f64,
}

impl BerTargets {
    pub fn new(primary: f64, cognitive: f64, design_margin: f64) -> Result<Self> {
        let t = BerTargets {
            primary,
            cognitive,
            design_margin,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, b) in [("b1", self.primary), ("b2", self.cognitive)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidScenario(format!("{name} must lie in (0, 1), got {b}")));
            }
        }
        if !(self.design_margin >= 1.0 && self.design_margin.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "design_margin must be >= 1, got {}",
                self.design_margin
            )));
        }
        Ok(())
    }

    pub fn design_primary(&self) -> f64 {
        self.primary / self.design_margin
    }

    pub fn design_cognitive(&self) -> f64 {
        self.cognitive / self.design_margin
    }
}

/// Per-mode SNIR thresholds at one BER target. `nu[0] = 0`; the implicit
/// upper edge of the last interval is infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSet {
    target: f64,
    nu: Vec<f64>,
}

impl ThresholdSet {
    pub fn new(table: &AmcTable, target: f64) -> Result<Self> {
        let mut nu = Vec::with_capacity(table.modes.len());
        nu.push(0.0);
        for mode in &table.modes[1..] {
            nu.push(snir_threshold(mode, target)?);
        }
        for n in 1..nu.len() - 1 {
            if !(nu[n + 1] > nu[n]) {
                return Err(Error::InvalidTable(format!(
                    "thresholds at BER {target:e} are not increasing: mode {} needs {:.4}, mode {} needs {:.4}",
                    n,
                    nu[n],
                    n + 1,
                    nu[n + 1]
                )));
            }
        }
        if nu.len() > 1 && !(nu[1] > 0.0) {
            return Err(Error::InvalidTable(format!(
                "BER target {target:e} equals the coefficient of mode 1, which would make its threshold zero"
            )));
        }
        Ok(ThresholdSet { target, nu })
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    /// Threshold of mode `n`; zero for outage.
    pub fn get(&self, n: usize) -> f64 {
        self.nu[n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.nu
    }

    /// Mode index for SNIR `gamma`. Intervals are `[nu_n, nu_{n+1})`.
    pub fn select(&self, gamma: f64) -> usize {
        if !(gamma > 0.0) {
            return 0;
        }
        self.nu.partition_point(|&t| t <= gamma) - 1
    }
}

/// Design-target thresholds for both links.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkThresholds {
    pub primary: ThresholdSet,
    pub cognitive: ThresholdSet,
}

impl LinkThresholds {
    pub fn design(table: &AmcTable, targets: &BerTargets) -> Result<Self> {
        Ok(LinkThresholds {
            primary: ThresholdSet::new(table, targets.design_primary())?,
            cognitive: ThresholdSet::new(table, targets.design_cognitive())?,
        })
    }
}
