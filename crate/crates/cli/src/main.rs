// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod run;

/// Scheme sweeps for a cognitive link sharing spectrum with an adaptive
/// primary link. Writes tradeoff curves, region and policy dumps and a
/// manifest as CSV into the output directory.
#[derive(Debug, Parser)]
#[command(name = "cradapt", version)]
pub struct Args {
    /// Scenario document (`key = value` lines); the shipped default otherwise.
    #[arg(long)]
    pub scenario: Option<PathBuf>,

    /// Mode table document; the shipped default otherwise.
    #[arg(long)]
    pub table: Option<PathBuf>,

    /// variable, constant, underlay, interweave or all.
    #[arg(long, default_value = "all")]
    pub scheme: String,

    /// Primary requirements, `a:b:step` or a comma-separated list.
    #[arg(long = "k1-req", default_value = "0:3.5:0.25")]
    pub k1_req: String,

    /// Ray sectors L; overrides the value derived from `--regions`.
    #[arg(long)]
    pub rays: Option<usize>,

    /// Product cells C; overrides the value derived from `--regions`.
    #[arg(long)]
    pub products: Option<usize>,

    /// Target region count; split into rays and product cells.
    #[arg(long, default_value_t = 100)]
    pub regions: usize,

    /// Draws for region statistics and the constant-power ensemble.
    #[arg(long = "mc-samples", default_value_t = 1_000_000)]
    pub mc_samples: u64,

    /// Draws for ray and auxiliary cut placement and underlay peak calibration.
    #[arg(long = "pilot-samples", default_value_t = 100_000)]
    pub pilot_samples: u64,

    /// Evaluation blocks per point.
    #[arg(long, default_value_t = 1_000_000)]
    pub blocks: u64,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Output directory, created if missing [default: out].
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Print the shipped table and a scenario template, or write them to
    /// `--out` when it is given explicitly, and exit.
    #[arg(long = "emit-defaults")]
    pub emit_defaults: bool,

    /// Transmitter separations; one set of curves per value.
    #[arg(long = "pathloss-d", value_delimiter = ',')]
    pub pathloss_d: Vec<f64>,

    #[arg(long = "pathloss-e")]
    pub pathloss_e: Option<f64>,

    #[arg(long = "s11-mean")]
    pub s11_mean: Option<f64>,
    #[arg(long = "s12-mean")]
    pub s12_mean: Option<f64>,
    #[arg(long = "s21-mean")]
    pub s21_mean: Option<f64>,
    #[arg(long = "s22-mean")]
    pub s22_mean: Option<f64>,
    #[arg(long)]
    pub n0: Option<f64>,
    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long = "p2-budget")]
    pub p2_budget: Option<f64>,
    #[arg(long)]
    pub b1: Option<f64>,
    #[arg(long)]
    pub b2: Option<f64>,
    #[arg(long = "design-margin")]
    pub design_margin: Option<f64>,
    /// Fixes the underlay interference threshold instead of sweeping it.
    #[arg(long = "underlay-pth")]
    pub underlay_pth: Option<f64>,
    /// Fixes the interweave time share instead of sweeping it.
    #[arg(long = "tdma-tau")]
    pub tdma_tau: Option<f64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run::run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
