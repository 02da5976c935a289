//! Cognitive rate and power policies.
//!
//! The variable-power scheme assigns one cognitive rate per region and
//! transmits with the power that just meets that rate's design threshold. It
//! is solved greedily: every region starts at the top rate and rates are cut,
//! one region at a time, along the steepest decision variable until both
//! average constraints hold. The constant-power scheme picks a single power
//! level by bisection on the primary's average rate.

use std::io::Write;

use crate::amc::{AmcTable, LinkThresholds};
use crate::channel::{sample_block, snir, FadingSample, Scenario};
use crate::error::{Error, Result};
use crate::grid::RegionGrid;
use crate::sim::{self, sharded};

/// Instances with `N^free` above this are refused by [`brute_force_policy`].
pub const BRUTE_FORCE_LIMIT: u64 = 10_000_000;

/// Chunk length of the deterministic parallel sums in [`ConstantPowerModel`].
const SUM_CHUNK: usize = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Averages {
    /// `k1_avg`, b/s/Hz.
    pub primary: f64,
    /// `k2_avg`, b/s/Hz.
    pub cognitive: f64,
    /// `p2_avg`, watts.
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraints {
    pub min_primary_ase: f64,
    pub power_budget: f64,
}

impl Constraints {
    pub fn from_scenario(scenario: &Scenario) -> Self {
        Constraints {
            min_primary_ase: scenario.required_primary_ase,
            power_budget: scenario.cognitive_power_budget,
        }
    }

    fn primary_violated(&self, avg: &Averages) -> bool {
        avg.primary < self.min_primary_ase
    }

    fn power_violated(&self, avg: &Averages) -> bool {
        avg.power > self.power_budget
    }

    pub fn satisfied_by(&self, avg: &Averages) -> bool {
        !self.primary_violated(avg) && !self.power_violated(avg)
    }
}

/// Per-region inputs of the discrete problem.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionTerms {
    pub prob: f64,
    pub norm_power: f64,
    /// Primary rate for each cognitive mode; entry 0 is the silent rate.
    pub primary_rates: Vec<f64>,
    /// Held at mode 0 and never a candidate for reduction.
    pub pinned: bool,
}

/// The optimization over per-region cognitive modes, detached from the grid
/// so it can be built by hand in tests.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem {
    /// `R_0 = 0, R_1, ..., R_N`.
    pub rates: Vec<f64>,
    /// Cognitive design thresholds `g(R_0) = 0, ..., g(R_N)`.
    pub power_thresholds: Vec<f64>,
    pub top_primary_rate: f64,
    pub regions: Vec<RegionTerms>,
}

impl DiscreteProblem {
    pub fn validate(&self) -> Result<()> {
        let width = self.rates.len();
        if width < 2 || self.power_thresholds.len() != width {
            return Err(Error::PolicyMismatch(
                "rates and power thresholds must have the same length, at least 2".into(),
            ));
        }
        if self.power_thresholds[0] != 0.0 || self.rates[0] != 0.0 {
            return Err(Error::PolicyMismatch("mode 0 must have zero rate and power".into()));
        }
        for (i, r) in self.regions.iter().enumerate() {
            if r.primary_rates.len() != width {
                return Err(Error::PolicyMismatch(format!(
                    "region {i} has {} primary rates, expected {width}",
                    r.primary_rates.len()
                )));
            }
            if !(r.prob >= 0.0 && r.prob.is_finite()) || !(r.norm_power >= 0.0 && r.norm_power.is_finite()) {
                return Err(Error::PolicyMismatch(format!(
                    "region {i} has invalid probability or power"
                )));
            }
        }
        Ok(())
    }

    pub fn top_mode(&self) -> usize {
        self.rates.len() - 1
    }

    /// Averages of an assignment, summed fresh in region order.
    pub fn averages(&self, modes: &[usize]) -> Averages {
        let mut avg = Averages::default();
        for (r, &m) in self.regions.iter().zip(modes) {
            avg.primary += r.primary_rates[m] * r.prob;
            avg.cognitive += self.rates[m] * r.prob;
            if m > 0 {
                avg.power += self.power_thresholds[m] * r.norm_power * r.prob;
            }
        }
        avg
    }

    fn is_free(&self, i: usize) -> bool {
        let r = &self.regions[i];
        !r.pinned && r.prob > 0.0
    }

    /// Decision variables for region `i` at cognitive mode `m`.
    pub fn region_decision(&self, i: usize, m: usize) -> RegionDecision {
        if m == 0 || !self.is_free(i) {
            return RegionDecision::SILENT;
        }
        let r = &self.regions[i];
        let k1 = &r.primary_rates;
        let g = &self.power_thresholds;
        let rates = &self.rates;
        let d2_unit = (g[m] - g[m - 1]) * r.norm_power / (rates[m] - rates[m - 1]);
        let gain_step = (1..=m).find(|&x| k1[m - x] > k1[m]);
        match gain_step {
            Some(n) if k1[m] < self.top_primary_rate => {
                let dk2 = rates[m] - rates[m - n];
                RegionDecision {
                    d1: (k1[m - n] - k1[m]) / dk2,
                    d2_unit,
                    d3: (g[m] - g[m - n]) * r.norm_power / dk2,
                    step: n,
                }
            }
            _ => RegionDecision {
                d1: 0.0,
                d2_unit,
                d3: 0.0,
                step: 1,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionDecision {
    /// Primary gain per unit of cognitive rate given up.
    pub d1: f64,
    /// Power saved per unit of cognitive rate for a one-mode cut.
    pub d2_unit: f64,
    /// Power saved per unit of cognitive rate for the `step`-mode cut;
    /// zero where the primary cannot gain.
    pub d3: f64,
    /// Modes removed by a `d1` or `d3` cut.
    pub step: usize,
}

impl RegionDecision {
    /// Silent or excluded regions are never selected.
    pub const SILENT: RegionDecision = RegionDecision {
        d1: f64::NEG_INFINITY,
        d2_unit: f64::NEG_INFINITY,
        d3: f64::NEG_INFINITY,
        step: 0,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionState {
    pub regions: Vec<RegionDecision>,
}

/// Full recompute of every region's decision variables.
pub fn compute_decisions(problem: &DiscreteProblem, modes: &[usize]) -> DecisionState {
    DecisionState {
        regions: modes
            .iter()
            .enumerate()
            .map(|(i, &m)| problem.region_decision(i, m))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Both constraints violated: argmax `d3`.
    Both,
    /// Only the primary constraint violated: argmax `d1`.
    Primary,
    /// Only the power constraint violated: argmax `d2` with one-mode cuts.
    Power,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    pub branch: Branch,
    pub region: usize,
    pub from: usize,
    pub to: usize,
    /// Running averages after the cut.
    pub averages: Averages,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Assignment {
    Variable {
        /// Cognitive mode index per region.
        cognitive_modes: Vec<usize>,
        /// Induced primary rate per region (b/s/Hz).
        primary_rates: Vec<f64>,
    },
    Constant {
        power: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub assignment: Assignment,
    pub predicted: Averages,
    pub feasible: bool,
    pub constraints: Constraints,
}

impl Policy {
    pub fn is_variable(&self) -> bool {
        matches!(self.assignment, Assignment::Variable { .. })
    }

    fn variable(problem: &DiscreteProblem, modes: Vec<usize>, constraints: Constraints) -> Policy {
        let predicted = problem.averages(&modes);
        let primary_rates = modes
            .iter()
            .zip(&problem.regions)
            .map(|(&m, r)| r.primary_rates[m])
            .collect();
        Policy {
            feasible: constraints.satisfied_by(&predicted),
            assignment: Assignment::Variable {
                cognitive_modes: modes,
                primary_rates,
            },
            predicted,
            constraints,
        }
    }

    fn all_silent(problem: &DiscreteProblem, constraints: Constraints) -> Policy {
        let mut p = Policy::variable(problem, vec![0; problem.regions.len()], constraints);
        p.feasible = false;
        p
    }

    /// CSV dump `region,k2,k1,prob,norm_power` for a variable-power policy.
    pub fn write_csv<W: Write>(&self, grid: &RegionGrid, seed: u64, mut w: W) -> Result<()> {
        let Assignment::Variable {
            cognitive_modes,
            primary_rates,
        } = &self.assignment
        else {
            return Err(Error::PolicyMismatch(
                "only variable-power policies have a region dump".into(),
            ));
        };
        if cognitive_modes.len() != grid.region_count() {
            return Err(Error::PolicyMismatch(format!(
                "policy has {} regions, grid has {}",
                cognitive_modes.len(),
                grid.region_count()
            )));
        }
        writeln!(
            w,
            "# k1_avg={} k2_avg={} p2_avg={} feasible={}",
            self.predicted.primary, self.predicted.cognitive, self.predicted.power, self.feasible
        )?;
        writeln!(
            w,
            "# k1_req={} p2_budget={} seed={} rays={} products={}",
            self.constraints.min_primary_ase,
            self.constraints.power_budget,
            seed,
            grid.rays(),
            grid.products()
        )?;
        writeln!(w, "region,k2,k1,prob,norm_power")?;
        for (r, (&m, &k1)) in grid.regions().iter().zip(cognitive_modes.iter().zip(primary_rates)) {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.index + 1,
                grid.table().rate(m),
                k1,
                r.prob,
                r.norm_power
            )?;
        }
        Ok(())
    }
}

/// Result of the greedy search together with every cut it made.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyRun {
    pub policy: Policy,
    pub trace: Vec<GreedyStep>,
}

struct GreedyState<'a> {
    problem: &'a DiscreteProblem,
    modes: Vec<usize>,
    avg: Averages,
    decisions: Vec<RegionDecision>,
}

impl GreedyState<'_> {
    fn cut(&mut self, i: usize, step: usize) -> (usize, usize) {
        let p = self.problem;
        let r = &p.regions[i];
        let m = self.modes[i];
        let t = m - step;
        self.avg.primary += (r.primary_rates[t] - r.primary_rates[m]) * r.prob;
        self.avg.cognitive -= (p.rates[m] - p.rates[t]) * r.prob;
        self.avg.power -= (p.power_thresholds[m] - p.power_thresholds[t]) * r.prob * r.norm_power;
        self.modes[i] = t;
        self.decisions[i] = p.region_decision(i, t);
        (m, t)
    }

    fn argmax(&self, key: impl Fn(&RegionDecision) -> f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, d) in self.decisions.iter().enumerate() {
            if d.step == 0 {
                continue;
            }
            let v = key(d);
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Greedy rate reduction with a record of every step.
pub fn solve_greedy(problem: &DiscreteProblem, constraints: &Constraints) -> Result<GreedyRun> {
    problem.validate()?;
    let top = problem.top_mode();
    let modes: Vec<usize> = (0..problem.regions.len())
        .map(|i| if problem.is_free(i) { top } else { 0 })
        .collect();
    let mut st = GreedyState {
        problem,
        avg: problem.averages(&modes),
        decisions: compute_decisions(problem, &modes).regions,
        modes,
    };
    let mut trace = Vec::new();
    let c = constraints;

    loop {
        let p_bad = c.primary_violated(&st.avg);
        let w_bad = c.power_violated(&st.avg);
        if !p_bad && !w_bad {
            // Incremental sums can drift from a fresh sum by rounding; only
            // stop once the fresh sum agrees.
            let fresh = problem.averages(&st.modes);
            if c.satisfied_by(&fresh) {
                break;
            }
            st.avg = fresh;
            continue;
        }
        let branch = match (p_bad, w_bad) {
            (true, true) => Branch::Both,
            (true, false) => Branch::Primary,
            _ => Branch::Power,
        };
        let exhausted = loop {
            let pick = match branch {
                Branch::Both => st.argmax(|d| d.d3),
                Branch::Primary => st.argmax(|d| d.d1).filter(|&i| st.decisions[i].d1 > 0.0),
                Branch::Power => st.argmax(|d| d.d2_unit),
            };
            let Some(i) = pick else { break true };
            let step = match branch {
                Branch::Power => 1,
                _ => st.decisions[i].step,
            };
            let (from, to) = st.cut(i, step);
            trace.push(GreedyStep {
                branch,
                region: i,
                from,
                to,
                averages: st.avg,
            });
            let still = match branch {
                Branch::Both => c.primary_violated(&st.avg) && c.power_violated(&st.avg),
                Branch::Primary => c.primary_violated(&st.avg),
                Branch::Power => c.power_violated(&st.avg),
            };
            if !still {
                break false;
            }
        };
        if exhausted {
            return Ok(GreedyRun {
                policy: Policy::all_silent(problem, *constraints),
                trace,
            });
        }
    }
    Ok(GreedyRun {
        policy: Policy::variable(problem, st.modes, *constraints),
        trace,
    })
}

/// Variable-power policy for a grid with populated statistics.
pub fn optimize_variable_power(grid: &RegionGrid, scenario: &Scenario) -> Result<Policy> {
    if grid.stats().is_none() {
        return Err(Error::InvalidGrid("region statistics have not been estimated".into()));
    }
    if scenario.ber_targets != *grid.targets() {
        return Err(Error::PolicyMismatch(
            "scenario BER targets differ from the grid's".into(),
        ));
    }
    Ok(solve_greedy(&grid.problem(), &Constraints::from_scenario(scenario))?.policy)
}

/// Exact optimum by enumerating every assignment of the free regions.
pub fn brute_force_policy(problem: &DiscreteProblem, constraints: &Constraints) -> Result<Policy> {
    problem.validate()?;
    let free: Vec<usize> = (0..problem.regions.len()).filter(|&i| problem.is_free(i)).collect();
    let base = problem.rates.len() as u64;
    // The bound is stated as N^free; the walk itself also visits silence.
    let count = (problem.top_mode() as f64).powi(free.len() as i32);
    if count > BRUTE_FORCE_LIMIT as f64 {
        return Err(Error::SearchTooLarge {
            count,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut modes = vec![0usize; problem.regions.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let avg = problem.averages(&modes);
        if constraints.satisfied_by(&avg) && best.as_ref().is_none_or(|(b, _)| avg.cognitive > *b) {
            best = Some((avg.cognitive, modes.clone()));
        }
        // Odometer over the free regions.
        let mut k = 0;
        loop {
            if k == free.len() {
                return Ok(match best {
                    Some((_, m)) => Policy::variable(problem, m, *constraints),
                    None => Policy::all_silent(problem, *constraints),
                });
            }
            let i = free[k];
            if modes[i] + 1 < base as usize {
                modes[i] += 1;
                break;
            }
            modes[i] = 0;
            k += 1;
        }
    }
}

/// Average rates of both links as functions of a constant cognitive power,
/// over one fixed fading ensemble.
#[derive(Debug, Clone)]
pub struct ConstantPowerModel {
    samples: Vec<FadingSample>,
    table: AmcTable,
    thresholds: LinkThresholds,
    primary_power: f64,
    noise_power: f64,
}

impl ConstantPowerModel {
    pub fn new(scenario: &Scenario, table: &AmcTable, n_samples: u64, seed: u64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::InvalidScenario("constant-power design needs samples".into()));
        }
        let thresholds = LinkThresholds::design(table, &scenario.ber_targets)?;
        let samples = sharded(
            n_samples,
            sim::derive_seed(seed, sim::tag::CONSTANT_DESIGN),
            |rng, k| (0..k).map(|_| sample_block(scenario, rng)).collect::<Vec<_>>(),
        )
        .into_iter()
        .flatten()
        .collect();
        Ok(ConstantPowerModel {
            samples,
            table: table.clone(),
            thresholds,
            primary_power: scenario.primary_power,
            noise_power: scenario.noise_power,
        })
    }

    fn mean_rate(&self, p2: f64, link: usize) -> f64 {
        use rayon::prelude::*;
        let partial: Vec<f64> = self
            .samples
            .par_chunks(SUM_CHUNK)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|s| {
                        let (g1, g2) = snir(s, self.primary_power, p2, self.noise_power);
                        if link == 0 {
                            self.table.rate(self.thresholds.primary.select(g1))
                        } else {
                            self.table.rate(self.thresholds.cognitive.select(g2))
                        }
                    })
                    .sum()
            })
            .collect();
        partial.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn primary_ase(&self, p2: f64) -> f64 {
        self.mean_rate(p2, 0)
    }

    pub fn cognitive_ase(&self, p2: f64) -> f64 {
        self.mean_rate(p2, 1)
    }

    /// Largest power in `[0, budget]` keeping the primary average at or above
    /// `min_primary_ase`. `None` when even zero power is not enough.
    pub fn max_feasible_power(&self, min_primary_ase: f64, budget: f64) -> Option<f64> {
        if self.primary_ase(0.0) < min_primary_ase {
            return None;
        }
        if self.primary_ase(budget) >= min_primary_ase {
            return Some(budget);
        }
        let (mut lo, mut hi) = (0.0, budget);
        while hi - lo > 1e-12 * budget {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.primary_ase(mid) >= min_primary_ase {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }
}

/// Constant-power policy from a fresh ensemble of `n_samples` blocks.
pub fn optimize_constant_power(scenario: &Scenario, table: &AmcTable, n_samples: u64, seed: u64) -> Result<Policy> {
    let model = ConstantPowerModel::new(scenario, table, n_samples, seed)?;
    optimize_constant_power_with(&model, scenario)
}

pub fn optimize_constant_power_with(model: &ConstantPowerModel, scenario: &Scenario) -> Result<Policy> {
    let constraints = Constraints::from_scenario(scenario);
    if !constraints.power_budget.is_finite() {
        return Err(Error::InvalidScenario(
            "the constant-power scheme needs a finite power budget".into(),
        ));
    }
    Ok(
        match model.max_feasible_power(constraints.min_primary_ase, constraints.power_budget) {
            Some(power) => Policy {
                assignment: Assignment::Constant { power },
                predicted: Averages {
                    primary: model.primary_ase(power),
                    cognitive: model.cognitive_ase(power),
                    power,
                },
                feasible: true,
                constraints,
            },
            None => Policy {
                assignment: Assignment::Constant { power: 0.0 },
                predicted: Averages {
                    primary: model.primary_ase(0.0),
                    cognitive: 0.0,
                    power: 0.0,
                },
                feasible: false,
                constraints,
            },
        },
    )
}
