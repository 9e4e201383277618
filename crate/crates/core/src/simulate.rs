//! Monte Carlo sampling from the joint table and empirical gap estimates.
//!
//! Draws are multinomial over the flattened `(a, y, d, ŷ)` cells using the
//! alias method. The generator is ChaCha8 (`rand_chacha`): draws are
//! produced in blocks of [`BLOCK`], block `i` using the stream
//! `seed_from_u64(seed)` with `set_stream(i)`. Sharded sampling hands out
//! whole blocks, so counts do not depend on the number of shards.

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::gaps::{closed_form_gaps, GapMethod, GapReport};
use crate::matrix::SquareMatrix;
use crate::model::{joint_table, validate, Group, JointDistribution, Scenario, Tier};

/// Draws per generator stream.
pub const BLOCK: u64 = 1 << 16;

/// Standard errors below this are treated as zero.
const ZERO_SE: f64 = 1e-12;
/// Allowed difference for entries with zero standard error.
const EXACT_TOL: f64 = 1e-9;

/// Cell counts, indexed like [`JointDistribution::cells`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleCounts {
    classes: usize,
    counts: Vec<u64>,
    n: u64,
    seed: u64,
}

impl SampleCounts {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, group: Group, label: usize, memorized: bool, predicted: usize) -> u64 {
        self.counts[JointDistribution::cell_index(self.classes, group, label, memorized, predicted)]
    }
}

fn alias(table: &JointDistribution) -> Result<WeightedAliasIndex<f64>> {
    let weights: Vec<f64> = table.cells().iter().map(|p| p.max(0.0)).collect();
    WeightedAliasIndex::new(weights).map_err(|_| Error::DegenerateSlice("joint table".into()))
}

fn draw_blocks(sampler: &WeightedAliasIndex<f64>, cells: usize, n: u64, seed: u64, blocks: core::ops::Range<u64>) -> Vec<u64> {
    let mut counts = vec![0u64; cells];
    for block in blocks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block);
        let draws = BLOCK.min(n - block * BLOCK);
        for _ in 0..draws {
            counts[sampler.sample(&mut rng)] += 1;
        }
    }
    counts
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::Invalid {
            invariant: "samples.positive",
            detail: "at least one draw is required".into(),
        });
    }
    Ok(())
}

/// `n` draws from an exact table.
pub fn sample_table(table: &JointDistribution, n: u64, seed: u64) -> Result<SampleCounts> {
    check_n(n)?;
    let sampler = alias(table)?;
    Ok(SampleCounts {
        classes: table.classes(),
        counts: draw_blocks(&sampler, table.cells().len(), n, seed, 0..n.div_ceil(BLOCK)),
        n,
        seed,
    })
}

/// `n` draws from the scenario, which must pass consistent validation.
pub fn sample(scenario: &Scenario, n: u64, seed: u64) -> Result<SampleCounts> {
    validate(scenario, Tier::Consistent).into_result()?;
    sample_table(&joint_table(scenario)?, n, seed)
}

/// Like [`sample_table`], spread over `shards` threads. Gives the same counts
/// for every shard count.
#[cfg(feature = "std")]
pub fn sample_sharded(table: &JointDistribution, n: u64, seed: u64, shards: usize) -> Result<SampleCounts> {
    check_n(n)?;
    let sampler = alias(table)?;
    let blocks = n.div_ceil(BLOCK);
    let shards = (shards.max(1) as u64).min(blocks);
    let per = blocks.div_ceil(shards);
    let cells = table.cells().len();
    let parts: Vec<Vec<u64>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..shards)
            .map(|s| {
                let range = (s * per).min(blocks)..((s + 1) * per).min(blocks);
                let sampler = &sampler;
                scope.spawn(move || draw_blocks(sampler, cells, n, seed, range))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampling shard panicked")).collect()
    });
    let mut counts = vec![0u64; cells];
    for part in parts {
        for (c, p) in counts.iter_mut().zip(part) {
            *c += p;
        }
    }
    Ok(SampleCounts {
        classes: table.classes(),
        counts,
        n,
        seed,
    })
}

/// Plug-in difference of two conditional frequencies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapEstimate {
    pub value: f64,
    /// `sqrt(p₁(1−p₁)/n₁ + p₀(1−p₀)/n₀)`.
    pub std_error: f64,
}

/// Empirical gaps; `None` marks entries whose conditioning event was never
/// observed.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalGapReport {
    pub n: u64,
    pub parity: Vec<Option<GapEstimate>>,
    pub opportunity: Vec<Option<GapEstimate>>,
    /// Row-major `K × K`.
    pub odds: Vec<Option<GapEstimate>>,
}

impl EmpiricalGapReport {
    pub fn classes(&self) -> usize {
        self.parity.len()
    }

    pub fn missing(&self) -> usize {
        self.parity
            .iter()
            .chain(&self.opportunity)
            .chain(&self.odds)
            .filter(|e| e.is_none())
            .count()
    }

    /// Point estimates as a [`GapReport`], if nothing is missing.
    pub fn to_gap_report(&self) -> Option<GapReport> {
        let values = |v: &[Option<GapEstimate>]| v.iter().map(|e| e.map(|e| e.value)).collect::<Option<Vec<f64>>>();
        let k = self.classes();
        let odds = values(&self.odds)?;
        Some(GapReport {
            parity: values(&self.parity)?,
            opportunity: values(&self.opportunity)?,
            odds: SquareMatrix::from_fn(k, |r, c| odds[r * k + c]),
            method: GapMethod::Empirical,
        })
    }
}

fn estimate(hits: [f64; 2], totals: [f64; 2]) -> Option<GapEstimate> {
    if totals[0] <= 0.0 || totals[1] <= 0.0 {
        return None;
    }
    let p1 = hits[1] / totals[1];
    let p0 = hits[0] / totals[0];
    let var = p1 * (1.0 - p1) / totals[1] + p0 * (1.0 - p0) / totals[0];
    Some(GapEstimate {
        value: p1 - p0,
        std_error: libm::sqrt(var.max(0.0)),
    })
}

/// Empirical gaps from (possibly fractional) cell weights that total `n`.
pub fn empirical_gaps_from_weights(classes: usize, weights: &[f64], n: u64) -> Result<EmpiricalGapReport> {
    let k = classes;
    let expected = 2 * k * 2 * k;
    if weights.len() != expected {
        return Err(Error::Shape {
            what: "cell weights",
            expected,
            found: weights.len(),
        });
    }
    let cell = |g: Group, y: usize, yh: usize| {
        weights[JointDistribution::cell_index(k, g, y, false, yh)] + weights[JointDistribution::cell_index(k, g, y, true, yh)]
    };
    let by_group = |g: Group| -> (Vec<f64>, Vec<Vec<f64>>) {
        let rows: Vec<Vec<f64>> = (0..k).map(|y| (0..k).map(|yh| cell(g, y, yh)).collect()).collect();
        let predicted = (0..k).map(|yh| rows.iter().map(|r| r[yh]).sum()).collect();
        (predicted, rows)
    };
    let (pred_minus, rows_minus) = by_group(Group::Minus);
    let (pred_plus, rows_plus) = by_group(Group::Plus);
    let total_minus: f64 = pred_minus.iter().sum();
    let total_plus: f64 = pred_plus.iter().sum();

    let parity = (0..k)
        .map(|yh| estimate([pred_minus[yh], pred_plus[yh]], [total_minus, total_plus]))
        .collect();
    let mut odds = Vec::with_capacity(k * k);
    for y in 0..k {
        let totals = [rows_minus[y].iter().sum(), rows_plus[y].iter().sum()];
        for yh in 0..k {
            odds.push(estimate([rows_minus[y][yh], rows_plus[y][yh]], totals));
        }
    }
    Ok(EmpiricalGapReport {
        n,
        parity,
        opportunity: (0..k).map(|y| odds[y * k + y]).collect(),
        odds,
    })
}

pub fn empirical_gaps(counts: &SampleCounts) -> EmpiricalGapReport {
    let weights: Vec<f64> = counts.counts.iter().map(|&c| c as f64).collect();
    empirical_gaps_from_weights(counts.classes, &weights, counts.n).expect("counts have the table layout")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapFamily {
    Parity,
    Opportunity,
    Odds,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McEntry {
    pub family: GapFamily,
    /// `(ŷ, ŷ)` for parity, `(y, y)` for opportunity, `(y, ŷ)` for odds.
    pub index: (usize, usize),
    pub reference: f64,
    pub estimate: Option<GapEstimate>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McReport {
    pub n: u64,
    pub seed: u64,
    pub z: f64,
    pub entries: Vec<McEntry>,
    pub passed: bool,
}

impl McReport {
    pub fn failures(&self) -> impl Iterator<Item = &McEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }
}

/// Checks every reference entry against its estimate: `|ref − est| ≤ z·SE`,
/// or `≤ 1e-9` when the standard error is zero. Missing estimates fail.
pub fn compare_to_reference(reference: &GapReport, empirical: &EmpiricalGapReport, z: f64, seed: u64) -> McReport {
    let k = reference.classes();
    let check = |family, index, reference: f64, estimate: Option<GapEstimate>| {
        let passed = estimate.is_some_and(|e| {
            let diff = (reference - e.value).abs();
            if e.std_error < ZERO_SE {
                diff <= EXACT_TOL
            } else {
                diff <= z * e.std_error
            }
        });
        McEntry {
            family,
            index,
            reference,
            estimate,
            passed,
        }
    };
    let mut entries = Vec::with_capacity(k * (k + 2));
    for i in 0..k {
        entries.push(check(GapFamily::Parity, (i, i), reference.parity[i], empirical.parity[i]));
    }
    for i in 0..k {
        entries.push(check(GapFamily::Opportunity, (i, i), reference.opportunity[i], empirical.opportunity[i]));
    }
    for y in 0..k {
        for yh in 0..k {
            entries.push(check(GapFamily::Odds, (y, yh), reference.odds[(y, yh)], empirical.odds[y * k + yh]));
        }
    }
    McReport {
        n: empirical.n,
        seed,
        z,
        passed: entries.iter().all(|e| e.passed),
        entries,
    }
}

/// Samples the scenario and checks the closed-form gaps against the
/// empirical ones at `z` standard errors.
pub fn mc_verify(scenario: &Scenario, n: u64, seed: u64, z: f64) -> Result<(EmpiricalGapReport, McReport)> {
    let reference = closed_form_gaps(scenario)?;
    let counts = sample(scenario, n, seed)?;
    let empirical = empirical_gaps(&counts);
    let report = compare_to_reference(&reference, &empirical, z, seed);
    Ok((empirical, report))
}
