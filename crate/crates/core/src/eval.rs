//! Block-level Monte Carlo evaluation and tradeoff sweeps.
//!
//! Every scheme is reduced to a [`BlockRule`] mapping one fading block to the
//! rates, power and BER checks of that block. Designs neglect thermal noise;
//! evaluation always includes it, and BER is checked against the application
//! targets rather than the tighter design targets.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::adaptation::{
    optimize_constant_power_with, optimize_variable_power, Assignment, Averages, ConstantPowerModel, Policy,
};
use crate::amc::{ber, AmcTable, BerTargets, LinkThresholds};
use crate::baselines::{
    calibrate_peak_power, default_interference_thresholds, default_tdma_shares, InterweaveRule, PeakCalibration,
    TdmaConfig, UnderlayConfig, UnderlayRule,
};
use crate::channel::{sample_block_nonzero, scaled_snirs, snir, FadingSample, Scenario};
use crate::error::{Error, Result};
use crate::grid::{GridLayout, RegionGrid, DEFAULT_PILOT_SAMPLES};
use crate::sim::{self, sharded};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BlockOutcome {
    pub primary_rate: f64,
    pub cognitive_rate: f64,
    pub power: f64,
    /// Fraction of the block in which the primary delivers nothing.
    pub primary_outage: f64,
    /// Fraction of the block in which the cognitive link delivers nothing.
    pub cognitive_silence: f64,
    pub primary_violation: bool,
    pub cognitive_violation: bool,
}

pub trait BlockRule: Sync {
    fn outcome(&self, sample: &FadingSample) -> BlockOutcome;
}

/// Quantities every rule needs to turn powers into rates and BER checks.
#[derive(Debug, Clone)]
pub struct LinkContext {
    pub table: AmcTable,
    pub thresholds: LinkThresholds,
    pub targets: BerTargets,
    pub primary_power: f64,
    pub noise_power: f64,
}

impl LinkContext {
    pub fn new(scenario: &Scenario, table: &AmcTable) -> Result<Self> {
        Ok(LinkContext {
            table: table.clone(),
            thresholds: LinkThresholds::design(table, &scenario.ber_targets)?,
            targets: scenario.ber_targets,
            primary_power: scenario.primary_power,
            noise_power: scenario.noise_power,
        })
    }

    fn violates(&self, gamma: f64, mode: usize, target: f64) -> bool {
        mode > 0 && ber(gamma, self.table.mode(mode)).is_ok_and(|b| b > target)
    }

    /// Primary mode and violation flag at SNIR `gamma1`.
    pub fn primary(&self, gamma1: f64) -> (usize, bool) {
        let n = self.thresholds.primary.select(gamma1);
        (n, self.violates(gamma1, n, self.targets.primary))
    }

    /// Both links transmitting simultaneously, each picking its own mode.
    pub fn simultaneous(&self, sample: &FadingSample, p2: f64) -> BlockOutcome {
        let (g1, g2) = snir(sample, self.primary_power, p2, self.noise_power);
        let (n, pv) = self.primary(g1);
        let m = self.thresholds.cognitive.select(g2);
        BlockOutcome {
            primary_rate: self.table.rate(n),
            cognitive_rate: self.table.rate(m),
            power: p2,
            primary_outage: if n == 0 { 1.0 } else { 0.0 },
            cognitive_silence: if m == 0 { 1.0 } else { 0.0 },
            primary_violation: pv,
            cognitive_violation: self.violates(g2, m, self.targets.cognitive),
        }
    }
}

/// Per-region rates with threshold-inverting power.
pub struct VariableRule<'a> {
    ctx: LinkContext,
    grid: &'a RegionGrid,
    modes: &'a [usize],
}

impl<'a> VariableRule<'a> {
    pub fn new(policy: &'a Policy, grid: &'a RegionGrid, scenario: &Scenario) -> Result<Self> {
        let Assignment::Variable { cognitive_modes, .. } = &policy.assignment else {
            return Err(Error::PolicyMismatch("expected a variable-power policy".into()));
        };
        if cognitive_modes.len() != grid.region_count() {
            return Err(Error::PolicyMismatch(format!(
                "policy has {} regions, grid has {}",
                cognitive_modes.len(),
                grid.region_count()
            )));
        }
        if let Some(&m) = cognitive_modes.iter().find(|&&m| m > grid.table().top_index()) {
            return Err(Error::PolicyMismatch(format!("mode {m} is not in the table")));
        }
        if scenario.ber_targets != *grid.targets() {
            return Err(Error::PolicyMismatch(
                "scenario BER targets differ from the grid's".into(),
            ));
        }
        Ok(VariableRule {
            ctx: LinkContext::new(scenario, grid.table())?,
            grid,
            modes: cognitive_modes,
        })
    }
}

impl BlockRule for VariableRule<'_> {
    fn outcome(&self, sample: &FadingSample) -> BlockOutcome {
        let ctx = &self.ctx;
        let point = scaled_snirs(sample).expect("evaluation draws nonzero cross gains");
        let m = self.modes[self.grid.locate_region(&point)];
        if m == 0 {
            let mut out = ctx.simultaneous(sample, 0.0);
            out.cognitive_silence = 1.0;
            out.cognitive_rate = 0.0;
            return out;
        }
        let p2 = ctx.primary_power * ctx.thresholds.cognitive.get(m) / point.beta;
        let (g1, g2) = snir(sample, ctx.primary_power, p2, ctx.noise_power);
        let (n, pv) = ctx.primary(g1);
        BlockOutcome {
            primary_rate: ctx.table.rate(n),
            cognitive_rate: ctx.table.rate(m),
            power: p2,
            primary_outage: if n == 0 { 1.0 } else { 0.0 },
            cognitive_silence: 0.0,
            primary_violation: pv,
            cognitive_violation: ctx.violates(g2, m, ctx.targets.cognitive),
        }
    }
}

/// Both links adapt to their realized SNIR under a fixed cognitive power.
pub struct ConstantRule {
    pub ctx: LinkContext,
    pub power: f64,
}

impl BlockRule for ConstantRule {
    fn outcome(&self, sample: &FadingSample) -> BlockOutcome {
        self.ctx.simultaneous(sample, self.power)
    }
}

/// Sample mean and standard error of a per-block quantity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(&mut self, o: &Moments) {
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    fn estimate(&self, n: u64) -> Estimate {
        if n == 0 {
            return Estimate::default();
        }
        let nf = n as f64;
        let mean = self.sum / nf;
        let var = if n > 1 {
            ((self.sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            se: (var / nf).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally([Moments; 7]);

impl Tally {
    fn push(&mut self, o: &BlockOutcome) {
        let v = [
            o.primary_rate,
            o.cognitive_rate,
            o.power,
            o.primary_outage,
            o.cognitive_silence,
            f64::from(u8::from(o.primary_violation)),
            f64::from(u8::from(o.cognitive_violation)),
        ];
        for (m, x) in self.0.iter_mut().zip(v) {
            m.push(x);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationReport {
    pub primary_ase: Estimate,
    pub cognitive_ase: Estimate,
    pub avg_cognitive_power: Estimate,
    pub primary_outage_prob: Estimate,
    pub cognitive_silence_prob: Estimate,
    pub ber_violation_rate_primary: Estimate,
    pub ber_violation_rate_cognitive: Estimate,
    pub n_blocks: u64,
    pub seed: u64,
}

/// Runs `rule` over `n_blocks` independent blocks.
pub fn evaluate_rule<R: BlockRule>(rule: &R, scenario: &Scenario, n_blocks: u64, seed: u64) -> EvaluationReport {
    let shards = sharded(n_blocks, sim::derive_seed(seed, sim::tag::EVALUATION), |rng, k| {
        let mut t = Tally::default();
        for _ in 0..k {
            t.push(&rule.outcome(&sample_block_nonzero(scenario, rng)));
        }
        t
    });
    let mut total = Tally::default();
    for t in &shards {
        for (a, b) in total.0.iter_mut().zip(&t.0) {
            a.merge(b);
        }
    }
    let e = |k: usize| total.0[k].estimate(n_blocks);
    EvaluationReport {
        primary_ase: e(0),
        cognitive_ase: e(1),
        avg_cognitive_power: e(2),
        primary_outage_prob: e(3),
        cognitive_silence_prob: e(4),
        ber_violation_rate_primary: e(5),
        ber_violation_rate_cognitive: e(6),
        n_blocks,
        seed,
    }
}

/// Measures a variable-power (needs `grid`) or constant-power policy.
pub fn evaluate_policy(
    policy: &Policy,
    grid: Option<&RegionGrid>,
    scenario: &Scenario,
    table: &AmcTable,
    n_blocks: u64,
    seed: u64,
) -> Result<EvaluationReport> {
    match &policy.assignment {
        Assignment::Variable { .. } => {
            let grid =
                grid.ok_or_else(|| Error::PolicyMismatch("a variable-power policy needs its region grid".into()))?;
            if grid.table() != table {
                return Err(Error::PolicyMismatch("grid was built from a different table".into()));
            }
            Ok(evaluate_rule(
                &VariableRule::new(policy, grid, scenario)?,
                scenario,
                n_blocks,
                seed,
            ))
        }
        Assignment::Constant { power } => {
            let rule = ConstantRule {
                ctx: LinkContext::new(scenario, table)?,
                power: *power,
            };
            Ok(evaluate_rule(&rule, scenario, n_blocks, seed))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Variable,
    Constant,
    Underlay,
    Interweave,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Variable, Scheme::Constant, Scheme::Underlay, Scheme::Interweave];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Variable => "variable",
            Scheme::Constant => "constant",
            Scheme::Underlay => "underlay",
            Scheme::Interweave => "interweave",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown scheme '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub layout: GridLayout,
    pub pilot_samples: u64,
    /// Draws behind region statistics and the constant-power ensemble.
    pub design_samples: u64,
    pub n_blocks: u64,
    pub seed: u64,
    /// Underlay interference thresholds; a default log grid when `None`.
    pub interference_thresholds: Option<Vec<f64>>,
    /// Interweave time shares; 0 to 1 in steps of 0.05 when `None`.
    pub tdma_shares: Option<Vec<f64>>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings {
            layout: GridLayout { rays: 2, products: 50 },
            pilot_samples: DEFAULT_PILOT_SAMPLES,
            design_samples: 1_000_000,
            n_blocks: 1_000_000,
            seed: 1,
            interference_thresholds: None,
            tdma_shares: None,
        }
    }
}

/// One evaluated point of a baseline parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePoint {
    pub param: f64,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub k1_req: f64,
    pub feasible: bool,
    /// Baseline parameter that produced this point.
    pub param: Option<f64>,
    pub predicted: Option<Averages>,
    pub report: Option<EvaluationReport>,
}

#[derive(Debug, Clone)]
pub struct TradeoffCurve {
    pub scheme: Scheme,
    pub points: Vec<CurvePoint>,
    /// Underlying parameter sweep for the baselines.
    pub sweep: Vec<BaselinePoint>,
    pub grid: Option<RegionGrid>,
    /// Policies in `points` order, for the optimized schemes.
    pub policies: Vec<Policy>,
}

/// Best baseline point for a primary requirement: the largest cognitive ASE
/// among points meeting the requirement and the power budget within 3 SE.
pub fn select_baseline_point(sweep: &[BaselinePoint], k1_req: f64, budget: f64) -> Option<&BaselinePoint> {
    let mut best: Option<&BaselinePoint> = None;
    for p in sweep {
        let r = &p.report;
        let ok = r.primary_ase.mean >= k1_req && r.avg_cognitive_power.mean <= budget + 3.0 * r.avg_cognitive_power.se;
        if ok && best.is_none_or(|b| r.cognitive_ase.mean > b.report.cognitive_ase.mean) {
            best = Some(p);
        }
    }
    best
}

/// Underlay reports for each interference threshold, with calibrated peaks.
pub fn underlay_sweep(
    scenario: &Scenario,
    table: &AmcTable,
    thresholds: &[f64],
    settings: &SweepSettings,
) -> Result<Vec<BaselinePoint>> {
    let ctx = LinkContext::new(scenario, table)?;
    let calibration = PeakCalibration::new(scenario, settings.pilot_samples, settings.seed);
    thresholds
        .iter()
        .map(|&pth| {
            let cfg = UnderlayConfig {
                interference_threshold: pth,
                peak_power: calibrate_peak_power(&calibration, pth, scenario.cognitive_power_budget),
            };
            cfg.validate()?;
            let rule = UnderlayRule { ctx: ctx.clone(), cfg };
            Ok(BaselinePoint {
                param: pth,
                report: evaluate_rule(&rule, scenario, settings.n_blocks, settings.seed),
            })
        })
        .collect()
}

/// Interweave reports for each cognitive time share.
pub fn interweave_sweep(
    scenario: &Scenario,
    table: &AmcTable,
    shares: &[f64],
    settings: &SweepSettings,
) -> Result<Vec<BaselinePoint>> {
    let ctx = LinkContext::new(scenario, table)?;
    shares
        .iter()
        .map(|&tau| {
            let cfg = TdmaConfig { cognitive_share: tau };
            cfg.validate()?;
            let rule = InterweaveRule {
                ctx: ctx.clone(),
                cfg,
                budget: scenario.cognitive_power_budget,
            };
            Ok(BaselinePoint {
                param: tau,
                report: evaluate_rule(&rule, scenario, settings.n_blocks, settings.seed),
            })
        })
        .collect()
}

/// Optimizes and evaluates one point per primary requirement.
pub fn sweep_tradeoff(
    scheme: Scheme,
    scenario: &Scenario,
    table: &AmcTable,
    k1_requirements: &[f64],
    settings: &SweepSettings,
) -> Result<TradeoffCurve> {
    if k1_requirements.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidScenario(
            "primary requirements must be strictly ascending".into(),
        ));
    }
    let at = |k1: f64| Scenario {
        required_primary_ase: k1,
        ..scenario.clone()
    };
    let mut curve = TradeoffCurve {
        scheme,
        points: Vec::with_capacity(k1_requirements.len()),
        sweep: Vec::new(),
        grid: None,
        policies: Vec::new(),
    };
    match scheme {
        Scheme::Variable | Scheme::Constant => {
            let grid = if scheme == Scheme::Variable {
                Some(RegionGrid::design(
                    table,
                    scenario,
                    settings.layout,
                    settings.pilot_samples,
                    settings.design_samples,
                    settings.seed,
                )?)
            } else {
                None
            };
            let model = if scheme == Scheme::Constant {
                Some(ConstantPowerModel::new(
                    scenario,
                    table,
                    settings.design_samples,
                    settings.seed,
                )?)
            } else {
                None
            };
            // A policy feasible at some requirement is feasible at every
            // lower one, so walk downwards and keep the best seen so far.
            let mut policies = Vec::with_capacity(k1_requirements.len());
            let mut best: Option<Policy> = None;
            for &k1 in k1_requirements.iter().rev() {
                let s = at(k1);
                let mut policy = match (&grid, &model) {
                    (Some(g), _) => optimize_variable_power(g, &s)?,
                    (_, Some(m)) => optimize_constant_power_with(m, &s)?,
                    _ => unreachable!(),
                };
                if let Some(b) = &best {
                    if b.predicted.cognitive > policy.predicted.cognitive || !policy.feasible {
                        policy = Policy {
                            constraints: policy.constraints,
                            ..b.clone()
                        };
                    }
                }
                if policy.feasible {
                    best = Some(policy.clone());
                }
                policies.push(policy);
            }
            policies.reverse();
            for (&k1, policy) in k1_requirements.iter().zip(policies) {
                let s = at(k1);
                let report = if policy.feasible {
                    Some(evaluate_policy(
                        &policy,
                        grid.as_ref(),
                        &s,
                        table,
                        settings.n_blocks,
                        settings.seed,
                    )?)
                } else {
                    None
                };
                curve.points.push(CurvePoint {
                    k1_req: k1,
                    feasible: policy.feasible,
                    param: None,
                    predicted: Some(policy.predicted),
                    report,
                });
                curve.policies.push(policy);
            }
            curve.grid = grid;
        }
        Scheme::Underlay | Scheme::Interweave => {
            curve.sweep = if scheme == Scheme::Underlay {
                let pths = settings
                    .interference_thresholds
                    .clone()
                    .unwrap_or_else(|| default_interference_thresholds(scenario));
                underlay_sweep(scenario, table, &pths, settings)?
            } else {
                let taus = settings.tdma_shares.clone().unwrap_or_else(default_tdma_shares);
                interweave_sweep(scenario, table, &taus, settings)?
            };
            for &k1 in k1_requirements {
                let best = select_baseline_point(&curve.sweep, k1, scenario.cognitive_power_budget);
                curve.points.push(CurvePoint {
                    k1_req: k1,
                    feasible: best.is_some(),
                    param: best.map(|b| b.param),
                    predicted: None,
                    report: best.map(|b| b.report),
                });
            }
        }
    }
    Ok(curve)
}

const REPORT_COLUMNS: &str = "k1_ase,k2_ase,p2_avg,outage,ber_viol_p,ber_viol_c,se_k1,se_k2,n_blocks,seed";

fn write_report_fields<W: Write>(w: &mut W, r: Option<&EvaluationReport>) -> std::io::Result<()> {
    match r {
        Some(r) => write!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.primary_ase.mean,
            r.cognitive_ase.mean,
            r.avg_cognitive_power.mean,
            r.primary_outage_prob.mean,
            r.ber_violation_rate_primary.mean,
            r.ber_violation_rate_cognitive.mean,
            r.primary_ase.se,
            r.cognitive_ase.se,
            r.n_blocks,
            r.seed
        ),
        None => write!(w, ",,,,,,,,,"),
    }
}

impl TradeoffCurve {
    /// Report CSV; infeasible points keep their row with empty measurements.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "scheme,k1_req,{REPORT_COLUMNS},status")?;
        for p in &self.points {
            write!(w, "{},{},", self.scheme, p.k1_req)?;
            write_report_fields(&mut w, p.report.as_ref())?;
            writeln!(w, ",{}", if p.feasible { "feasible" } else { "infeasible" })?;
        }
        Ok(())
    }

    /// Parameter sweep CSV of a baseline.
    pub fn write_sweep_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "scheme,param,{REPORT_COLUMNS}")?;
        for p in &self.sweep {
            write!(w, "{},{},", self.scheme, p.param)?;
            write_report_fields(&mut w, Some(&p.report))?;
            writeln!(w)?;
        }
        Ok(())
    }
}
