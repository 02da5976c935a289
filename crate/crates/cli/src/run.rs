use std::error::Error;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use cradapt_core::amc::DEFAULT_TABLE_DOCUMENT;
use cradapt_core::channel::DEFAULT_SCENARIO_DOCUMENT;
use cradapt_core::{
    load_table, sweep_tradeoff, AmcTable, Assignment, GridLayout, Scenario, ScenarioDoc, Scheme, SweepSettings,
    TradeoffCurve,
};

use crate::Args;

type Result<T> = std::result::Result<T, Box<dyn Error>>;

pub fn run(args: &Args) -> Result<()> {
    if args.emit_defaults {
        return emit_defaults(args);
    }
    let doc = scenario_doc(args)?;
    let base = doc.scenario()?;
    let table_text = match &args.table {
        Some(p) => read(p)?,
        None => DEFAULT_TABLE_DOCUMENT.to_string(),
    };
    let table = load_table(&table_text, &base.ber_targets)?;
    let schemes = parse_schemes(&args.scheme)?;
    let k1s = parse_k1_list(&args.k1_req)?;
    for (name, v) in [
        ("--mc-samples", args.mc_samples),
        ("--pilot-samples", args.pilot_samples),
        ("--blocks", args.blocks),
        ("--regions", args.regions as u64),
    ] {
        if v == 0 {
            return Err(format!("{name} must be positive").into());
        }
    }
    let layout = layout(args, &table)?;
    let settings = SweepSettings {
        layout,
        pilot_samples: args.pilot_samples,
        design_samples: args.mc_samples,
        n_blocks: args.blocks,
        seed: args.seed,
        interference_thresholds: doc.underlay_pth().map(|p| vec![p]),
        tdma_shares: doc.tdma_tau().map(|t| vec![t]),
    };

    let mut cases: Vec<(String, ScenarioDoc)> = Vec::new();
    if args.pathloss_d.is_empty() {
        cases.push((String::new(), doc.clone()));
    } else {
        for &d in &args.pathloss_d {
            let mut case = doc.clone();
            case.set("pathloss_d", &d.to_string())?;
            case.scenario()?;
            cases.push((format!("_d{d}"), case));
        }
    }

    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).map_err(|e| format!("{}: {e}", out.display()))?;
    let mut written = Vec::new();
    for (suffix, case) in &cases {
        let scenario = case.scenario()?;
        for &scheme in &schemes {
            let start = Instant::now();
            let curve = sweep_tradeoff(scheme, &scenario, &table, &k1s, &settings)?;
            let feasible = curve.points.iter().filter(|p| p.feasible).count();
            eprintln!(
                "{scheme}{suffix}: {feasible} of {} points feasible ({:.1} s)",
                curve.points.len(),
                start.elapsed().as_secs_f64()
            );
            written.extend(write_curve(&out, suffix, case, &scenario, &settings, &curve)?);
        }
    }
    written.push("manifest.txt".into());
    let manifest = manifest(args, &doc, &table, &schemes, &k1s, &settings, &written);
    fs::write(out.join("manifest.txt"), manifest).map_err(|e| format!("manifest.txt: {e}"))?;
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Document values, then flags on top.
fn scenario_doc(args: &Args) -> Result<ScenarioDoc> {
    let mut doc = match &args.scenario {
        Some(p) => ScenarioDoc::parse(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => ScenarioDoc::parse(DEFAULT_SCENARIO_DOCUMENT)?,
    };
    let flags = [
        ("s11_mean", args.s11_mean),
        ("s12_mean", args.s12_mean),
        ("s21_mean", args.s21_mean),
        ("s22_mean", args.s22_mean),
        ("n0", args.n0),
        ("p1", args.p1),
        ("p2_budget", args.p2_budget),
        ("b1", args.b1),
        ("b2", args.b2),
        ("design_margin", args.design_margin),
        ("pathloss_e", args.pathloss_e),
        ("underlay_pth", args.underlay_pth),
        ("tdma_tau", args.tdma_tau),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            doc.set(key, &v.to_string())?;
        }
    }
    if let Some(&d) = args.pathloss_d.first() {
        // Keeps the combined document valid; each case sets its own value.
        doc.set("pathloss_d", &d.to_string())?;
    }
    Ok(doc)
}

fn emit_defaults(args: &Args) -> Result<()> {
    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|e| format!("{}: {e}", out.display()))?;
        fs::write(out.join("table.txt"), DEFAULT_TABLE_DOCUMENT)?;
        fs::write(out.join("scenario.txt"), DEFAULT_SCENARIO_DOCUMENT)?;
    } else {
        print!("{DEFAULT_TABLE_DOCUMENT}\n{DEFAULT_SCENARIO_DOCUMENT}");
    }
    Ok(())
}

fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    if s == "all" {
        return Ok(Scheme::ALL.to_vec());
    }
    s.split(',')
        .map(|name| {
            name.trim()
                .parse::<Scheme>()
                .map_err(|e| format!("--scheme: {e}").into())
        })
        .collect()
}

/// `a:b:step` inclusive of `b`, or a comma-separated list.
pub fn parse_k1_list(s: &str) -> Result<Vec<f64>> {
    let num = |t: &str| -> Result<f64> {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("--k1-req: bad number {t:?}").into())
    };
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, step] = parts[..] else {
            return Err(format!("--k1-req: expected a:b:step, got {s:?}").into());
        };
        let (a, b, step) = (num(a)?, num(b)?, num(step)?);
        if !(step > 0.0) || !(b >= a) {
            return Err(format!("--k1-req: need step > 0 and b >= a in {s:?}").into());
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        // Rounded so that 0.1 steps print as 0.3, not 0.30000000000000004.
        (0..=n).map(|k| ((a + k as f64 * step) * 1e12).round() / 1e12).collect()
    } else {
        s.split(',').map(num).collect::<Result<Vec<f64>>>()?
    };
    if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
        return Err("--k1-req: values must be finite and non-negative".into());
    }
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err("--k1-req: values must be strictly ascending".into());
    }
    Ok(values)
}

fn layout(args: &Args, table: &AmcTable) -> Result<GridLayout> {
    let n = table.top_index();
    let mut layout = GridLayout::for_region_count(args.regions, n * n + 1);
    if let Some(r) = args.rays {
        layout.rays = r;
    }
    if let Some(c) = args.products {
        layout.products = c;
    }
    if layout.rays == 0 {
        return Err("--rays must be positive".into());
    }
    if layout.products < n * n + 1 {
        return Err(format!("--products must be at least {} for this table", n * n + 1).into());
    }
    Ok(layout)
}

fn metadata(out: &mut impl Write, scheme: Scheme, case: &ScenarioDoc, s: &SweepSettings) -> Result<()> {
    writeln!(
        out,
        "# scheme={scheme} seed={} blocks={} mc_samples={} pilot_samples={} rays={} products={}",
        s.seed, s.n_blocks, s.design_samples, s.pilot_samples, s.layout.rays, s.layout.products
    )?;
    if let Some(g) = case.pathloss() {
        writeln!(out, "# pathloss_d={} pathloss_e={}", g.tx_separation, g.exponent)?;
    }
    Ok(())
}

fn write_curve(
    dir: &Path,
    suffix: &str,
    case: &ScenarioDoc,
    scenario: &Scenario,
    settings: &SweepSettings,
    curve: &TradeoffCurve,
) -> Result<Vec<String>> {
    let scheme = curve.scheme;
    let mut names = Vec::new();
    let mut open = |name: String| -> Result<BufWriter<File>> {
        let w = create(dir, &name)?;
        names.push(name);
        Ok(w)
    };

    let mut w = open(format!("tradeoff_{scheme}{suffix}.csv"))?;
    metadata(&mut w, scheme, case, settings)?;
    writeln!(w, "# p2_budget={}", scenario.cognitive_power_budget)?;
    curve.write_csv(&mut w)?;
    w.flush()?;

    if matches!(scheme, Scheme::Underlay | Scheme::Interweave) {
        let mut w = open(format!("{scheme}_sweep{suffix}.csv"))?;
        metadata(&mut w, scheme, case, settings)?;
        curve.write_sweep_csv(&mut w)?;
        w.flush()?;
    }

    if let Some(grid) = &curve.grid {
        let mut w = open(format!("grid{suffix}.csv"))?;
        grid.write_csv(&mut w)?;
        w.flush()?;
    }

    match scheme {
        Scheme::Variable => {
            let grid = curve.grid.as_ref().expect("variable curves carry their grid");
            for (p, policy) in curve.points.iter().zip(&curve.policies) {
                let mut w = open(format!("policy_variable{suffix}_k1_{}.csv", p.k1_req))?;
                policy.write_csv(grid, settings.seed, &mut w)?;
                w.flush()?;
            }
        }
        Scheme::Constant => {
            let mut w = open(format!("policy_constant{suffix}.csv"))?;
            metadata(&mut w, scheme, case, settings)?;
            writeln!(w, "k1_req,power,k1_avg,k2_avg,p2_avg,status")?;
            for (p, policy) in curve.points.iter().zip(&curve.policies) {
                let Assignment::Constant { power } = policy.assignment else {
                    unreachable!("constant curves hold constant policies")
                };
                let a = policy.predicted;
                let status = if policy.feasible { "feasible" } else { "infeasible" };
                writeln!(
                    w,
                    "{},{power},{},{},{},{status}",
                    p.k1_req, a.primary, a.cognitive, a.power
                )?;
            }
            w.flush()?;
        }
        Scheme::Underlay | Scheme::Interweave => {}
    }
    Ok(names)
}

fn manifest(
    args: &Args,
    doc: &ScenarioDoc,
    table: &AmcTable,
    schemes: &[Scheme],
    k1s: &[f64],
    s: &SweepSettings,
    files: &[String],
) -> String {
    let mut m = String::new();
    let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    let _ = writeln!(m, "# cradapt {}", env!("CARGO_PKG_VERSION"));
    let schemes: Vec<&str> = schemes.iter().map(|s| s.name()).collect();
    let _ = writeln!(m, "scheme = {}", schemes.join(","));
    let _ = writeln!(m, "k1_req = {}", list(k1s));
    let _ = writeln!(m, "rays = {}", s.layout.rays);
    let _ = writeln!(m, "products = {}", s.layout.products);
    let _ = writeln!(m, "pilot_samples = {}", s.pilot_samples);
    let _ = writeln!(m, "mc_samples = {}", s.design_samples);
    let _ = writeln!(m, "blocks = {}", s.n_blocks);
    let _ = writeln!(m, "seed = {}", s.seed);
    if !args.pathloss_d.is_empty() {
        let _ = writeln!(m, "pathloss_d = {}", list(&args.pathloss_d));
    }
    let _ = writeln!(m, "\n[scenario]");
    m.push_str(&doc.to_document());
    let _ = writeln!(m, "\n[table]");
    m.push_str(&table.to_document());
    let _ = writeln!(m, "\n[files]");
    for f in files {
        let _ = writeln!(m, "{f}");
    }
    m
}
