//! Partition of the scaled-SNIR plane into common rate regions.
//!
//! The plane of `(alpha, beta)` is cut by product boundaries `alpha * beta = z`
//! and ray boundaries `beta / alpha = w`. The products of every pair of design
//! thresholds `g1(R_n) * g2(R_m)` are the points where the set of feasible
//! rate pairs changes; extra product cuts and the rays only refine the
//! partition so that power and rate can be assigned at a finer granularity.
//!
//! Regions are numbered product-band-major: region `p * L + r` is product cell
//! `p` and ray sector `r`, both counted from zero.

use std::io::Write;

use crate::adaptation::{DiscreteProblem, RegionTerms};
use crate::amc::{AmcTable, BerTargets, LinkThresholds};
use crate::channel::{sample_block_nonzero, scaled_snirs, ScaledSnir, Scenario};
use crate::error::{Error, Result};
use crate::sim::{self, sharded};

/// Samples used to place rays and auxiliary product cuts.
pub const DEFAULT_PILOT_SAMPLES: u64 = 100_000;
pub const MIN_STATS_SAMPLES: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLayout {
    /// Ray sectors (L).
    pub rays: usize,
    /// Product cells (C), at least `N^2 + 1`.
    pub products: usize,
}

impl GridLayout {
    /// Layout with roughly `regions` cells: as few rays as possible while
    /// keeping at least `bands` product cells.
    pub fn for_region_count(regions: usize, bands: usize) -> GridLayout {
        let rays = (regions / bands.max(1)).max(1);
        let products = ((regions as f64 / rays as f64).round() as usize).max(bands);
        GridLayout { rays, products }
    }

    pub fn region_count(&self) -> usize {
        self.rays * self.products
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub index: usize,
    /// `[lo, hi)` in `alpha * beta`.
    pub product_range: (f64, f64),
    /// `[lo, hi)` in `beta / alpha`.
    pub ray_range: (f64, f64),
    pub prob: f64,
    /// `P1 * E[1 / beta | region]`.
    pub norm_power: f64,
    /// Mean primary rate when the cognitive link is silent.
    pub silent_primary_rate: f64,
    /// Primary mode for each cognitive mode. Entry 0 is unused and holds 0;
    /// a silent cognitive link uses `silent_primary_rate`.
    pub rate_map: Vec<usize>,
    /// Set where `E[1 / beta]` over the region is infinite.
    pub heavy_tailed: bool,
    pub samples: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsInfo {
    pub n_samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    table: AmcTable,
    targets: BerTargets,
    thresholds: LinkThresholds,
    rate_products: Vec<f64>,
    product_boundaries: Vec<f64>,
    ray_boundaries: Vec<f64>,
    regions: Vec<Region>,
    stats: Option<StatsInfo>,
}

/// Draws `n` scaled-SNIR points for boundary placement.
pub fn pilot_points(scenario: &Scenario, n: u64, seed: u64) -> Vec<ScaledSnir> {
    sharded(n, sim::derive_seed(seed, sim::tag::PILOT), |rng, count| {
        (0..count)
            .map(|_| scaled_snirs(&sample_block_nonzero(scenario, rng)).expect("nonzero cross gains"))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Sorted distinct products `g1(R_n) * g2(R_m)` over all transmitting modes.
pub fn rate_products(thresholds: &LinkThresholds) -> Vec<f64> {
    let g1 = thresholds.primary.as_slice();
    let g2 = thresholds.cognitive.as_slice();
    let mut z: Vec<f64> = g1[1..]
        .iter()
        .flat_map(|a| g2[1..].iter().map(move |b| a * b))
        .collect();
    z.sort_by(f64::total_cmp);
    // Products equal in exact arithmetic can differ in the last bits.
    z.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * a.abs());
    z
}

fn count_in(sorted: &[f64], lo: f64, hi: f64) -> (usize, usize) {
    let a = sorted.partition_point(|&x| x < lo);
    let b = sorted.partition_point(|&x| x < hi);
    (a, b)
}

fn split_point(sorted: &[f64], lo: f64, hi: f64) -> Option<f64> {
    let (a, b) = count_in(sorted, lo, hi);
    if b > a {
        let median = sorted[a + (b - a) / 2];
        if median > lo && median < hi {
            return Some(median);
        }
    }
    let fallback = if lo == 0.0 {
        hi / 2.0
    } else if hi.is_infinite() {
        lo * 2.0
    } else {
        (lo * hi).sqrt()
    };
    (fallback > lo && fallback < hi).then_some(fallback)
}

/// Builds the grid geometry and rate maps. Statistics stay empty until
/// [`RegionGrid::estimate_region_stats`] runs.
pub fn build_grid(
    table: &AmcTable,
    targets: &BerTargets,
    layout: GridLayout,
    pilot: &[ScaledSnir],
) -> Result<RegionGrid> {
    let thresholds = LinkThresholds::design(table, targets)?;
    let n = table.top_index();
    let nominal_bands = n * n + 1;
    if layout.rays == 0 {
        return Err(Error::InvalidGrid("at least one ray sector is needed".into()));
    }
    if layout.products < nominal_bands {
        return Err(Error::InvalidGrid(format!(
            "{} product cells requested but the table needs at least {nominal_bands}",
            layout.products
        )));
    }
    let z = rate_products(&thresholds);
    let aux = layout.products - (z.len() + 1);
    if (aux > 0 || layout.rays > 1) && pilot.is_empty() {
        return Err(Error::InvalidGrid(
            "pilot points are needed to place rays and auxiliary cuts".into(),
        ));
    }

    let mut ratios: Vec<f64> = pilot.iter().map(ScaledSnir::ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let mut ray_boundaries = Vec::with_capacity(layout.rays - 1);
    for j in 1..layout.rays {
        let w = ratios[j * ratios.len() / layout.rays];
        if !(w > 0.0 && w.is_finite()) || ray_boundaries.last().is_some_and(|&p| w <= p) {
            return Err(Error::InvalidGrid(format!(
                "ray quantile {j}/{} collapsed; use more pilot points",
                layout.rays
            )));
        }
        ray_boundaries.push(w);
    }

    let mut products: Vec<f64> = pilot.iter().map(ScaledSnir::product).collect();
    products.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = Vec::with_capacity(layout.products + 1);
    edges.push(0.0);
    edges.extend_from_slice(&z);
    edges.push(f64::INFINITY);
    for _ in 0..aux {
        let (mut best, mut best_count) = (None, 0usize);
        for c in 0..edges.len() - 1 {
            let (a, b) = count_in(&products, edges[c], edges[c + 1]);
            if (best.is_none() || b - a > best_count) && split_point(&products, edges[c], edges[c + 1]).is_some() {
                best = Some(c);
                best_count = b - a;
            }
        }
        let c = best.ok_or_else(|| Error::InvalidGrid("no product cell can be split further".into()))?;
        let at = split_point(&products, edges[c], edges[c + 1]).expect("checked above");
        edges.insert(c + 1, at);
    }

    let g1 = thresholds.primary.as_slice();
    let g2 = thresholds.cognitive.as_slice();
    let mut ray_edges = Vec::with_capacity(layout.rays + 1);
    ray_edges.push(0.0);
    ray_edges.extend_from_slice(&ray_boundaries);
    ray_edges.push(f64::INFINITY);

    let mut regions = Vec::with_capacity(layout.region_count());
    for p in 0..layout.products {
        let (lo, hi) = (edges[p], edges[p + 1]);
        let rate_map = rate_map_at(lo, g1, g2);
        for r in 0..layout.rays {
            let ray_range = (ray_edges[r], ray_edges[r + 1]);
            regions.push(Region {
                index: regions.len(),
                product_range: (lo, hi),
                ray_range,
                prob: 0.0,
                norm_power: 0.0,
                silent_primary_rate: 0.0,
                rate_map: rate_map.clone(),
                heavy_tailed: lo == 0.0 && ray_range.0 == 0.0,
                samples: 0,
            });
        }
    }

    Ok(RegionGrid {
        table: table.clone(),
        targets: *targets,
        thresholds,
        rate_products: z,
        product_boundaries: edges[1..edges.len() - 1].to_vec(),
        ray_boundaries,
        regions,
        stats: None,
    })
}

/// Primary mode supported at product level `product_lo` for each cognitive
/// mode: the highest `n` with `g1(R_n) * g2(R_m) <= product_lo`. The product
/// is formed exactly as in [`rate_products`] so band edges compare exactly.
fn rate_map_at(product_lo: f64, g1: &[f64], g2: &[f64]) -> Vec<usize> {
    let mut map = vec![0; g2.len()];
    for (m, slot) in map.iter_mut().enumerate().skip(1) {
        *slot = (1..g1.len()).rev().find(|&n| g1[n] * g2[m] <= product_lo).unwrap_or(0);
    }
    map
}

/// Primary mode for one region and cognitive rate index (`r >= 1`).
pub fn rate_pair_map(region: &Region, cognitive_mode: usize) -> usize {
    region.rate_map[cognitive_mode]
}

impl RegionGrid {
    /// Pilot placement, geometry and Monte Carlo statistics in one call.
    pub fn design(
        table: &AmcTable,
        scenario: &Scenario,
        layout: GridLayout,
        pilot_samples: u64,
        stats_samples: u64,
        seed: u64,
    ) -> Result<RegionGrid> {
        let pilot = pilot_points(scenario, pilot_samples, seed);
        let mut grid = build_grid(table, &scenario.ber_targets, layout, &pilot)?;
        grid.estimate_region_stats(scenario, stats_samples, seed)?;
        Ok(grid)
    }

    pub fn table(&self) -> &AmcTable {
        &self.table
    }

    pub fn targets(&self) -> &BerTargets {
        &self.targets
    }

    pub fn thresholds(&self) -> &LinkThresholds {
        &self.thresholds
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn rays(&self) -> usize {
        self.ray_boundaries.len() + 1
    }

    pub fn products(&self) -> usize {
        self.product_boundaries.len() + 1
    }

    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    /// `N^2 + 1`, the number of rate-set bands when all threshold products
    /// are distinct.
    pub fn nominal_bands(&self) -> usize {
        let n = self.table.top_index();
        n * n + 1
    }

    /// Bands actually separated by distinct threshold products.
    pub fn distinct_bands(&self) -> usize {
        self.rate_products.len() + 1
    }

    pub fn rate_products(&self) -> &[f64] {
        &self.rate_products
    }

    /// Interior product cuts, ascending (`C - 1` values).
    pub fn product_boundaries(&self) -> &[f64] {
        &self.product_boundaries
    }

    /// Interior ray slopes, ascending (`L - 1` values).
    pub fn ray_boundaries(&self) -> &[f64] {
        &self.ray_boundaries
    }

    pub fn stats(&self) -> Option<StatsInfo> {
        self.stats
    }

    /// Region containing `point`. Points on a boundary belong to the cell above it.
    pub fn locate_region(&self, point: &ScaledSnir) -> usize {
        let p = self.product_boundaries.partition_point(|&b| b <= point.product());
        let r = self.ray_boundaries.partition_point(|&w| w <= point.ratio());
        p * self.rays() + r
    }

    /// Fills probability, normalized power and silent primary rate of every
    /// region from `n_samples` fading draws.
    pub fn estimate_region_stats(&mut self, scenario: &Scenario, n_samples: u64, seed: u64) -> Result<()> {
        if n_samples < MIN_STATS_SAMPLES {
            return Err(Error::InvalidGrid(format!(
                "{n_samples} samples is below the minimum of {MIN_STATS_SAMPLES}"
            )));
        }
        if scenario.ber_targets != self.targets {
            return Err(Error::InvalidGrid(
                "scenario BER targets differ from the ones the grid was built for".into(),
            ));
        }
        let count = self.regions.len();
        let primary = &self.thresholds.primary;
        let table = &self.table;
        let shards = sharded(
            n_samples,
            sim::derive_seed(seed, sim::tag::REGION_STATS),
            |rng, draws| {
                let mut hits = vec![0u64; count];
                let mut inv_beta = vec![0.0; count];
                let mut silent = vec![0.0; count];
                for _ in 0..draws {
                    let sample = sample_block_nonzero(scenario, rng);
                    let point = scaled_snirs(&sample).expect("nonzero cross gains");
                    let i = self.locate_region(&point);
                    hits[i] += 1;
                    inv_beta[i] += 1.0 / point.beta;
                    silent[i] += table.rate(primary.select(scenario.primary_solo_snr(&sample)));
                }
                (hits, inv_beta, silent)
            },
        );
        let mut hits = vec![0u64; count];
        let mut inv_beta = vec![0.0; count];
        let mut silent = vec![0.0; count];
        for (h, b, s) in shards {
            for i in 0..count {
                hits[i] += h[i];
                inv_beta[i] += b[i];
                silent[i] += s[i];
            }
        }
        let n = n_samples as f64;
        for (i, region) in self.regions.iter_mut().enumerate() {
            region.samples = hits[i];
            if hits[i] == 0 {
                region.prob = 0.0;
                region.norm_power = 0.0;
                region.silent_primary_rate = 0.0;
            } else {
                let k = hits[i] as f64;
                region.prob = k / n;
                region.norm_power = scenario.primary_power * inv_beta[i] / k;
                region.silent_primary_rate = silent[i] / k;
            }
        }
        self.stats = Some(StatsInfo { n_samples, seed });
        Ok(())
    }

    /// Region statistics in the form the optimizers consume. Heavy-tailed and
    /// never-sampled regions are pinned silent.
    pub fn problem(&self) -> DiscreteProblem {
        let regions = self
            .regions
            .iter()
            .map(|r| {
                let mut primary_rates: Vec<f64> = r.rate_map.iter().map(|&n| self.table.rate(n)).collect();
                primary_rates[0] = r.silent_primary_rate;
                RegionTerms {
                    prob: r.prob,
                    norm_power: r.norm_power,
                    primary_rates,
                    pinned: r.heavy_tailed || r.samples == 0,
                }
            })
            .collect();
        DiscreteProblem {
            rates: self.table.rates(),
            power_thresholds: self.thresholds.cognitive.as_slice().to_vec(),
            top_primary_rate: self.table.top_rate(),
            regions,
        }
    }

    /// CSV dump, one row per region, region numbers starting at 1.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        if let Some(stats) = self.stats {
            writeln!(w, "# mc_samples={} seed={}", stats.n_samples, stats.seed)?;
        }
        writeln!(
            w,
            "# rays={} products={} regions={}",
            self.rays(),
            self.products(),
            self.region_count()
        )?;
        write!(w, "region,prod_lo,prod_hi,ray_lo,ray_hi,prob,norm_power,silent_rate")?;
        for m in 1..=self.table.top_index() {
            write!(w, ",k1_at_r{m}")?;
        }
        writeln!(w)?;
        for r in &self.regions {
            write!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.index + 1,
                r.product_range.0,
                r.product_range.1,
                r.ray_range.0,
                r.ray_range.1,
                r.prob,
                r.norm_power,
                r.silent_primary_rate
            )?;
            for m in 1..r.rate_map.len() {
                write!(w, ",{}", self.table.rate(r.rate_map[m]))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
