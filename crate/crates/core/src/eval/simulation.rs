//! Upper bounds of the down-sampling validation under hidden relevants.
//!
//! The artificial database holds `db_size` findings besides the query:
//! items `0..g_hat` are the identified relevant set `Ĝ`, the next `g_tilde`
//! items are the unidentified relevant set `G̃`, and the rest are
//! irrelevant. Three idealized systems rank a down-sampled database:
//!
//! * `omega1` puts every member of `G̃` first, then `Ĝ`, then the rest in
//!   random order; only `G̃` can push `Ĝ` down, which gives the ceiling.
//! * `omega2` and `omega3` draw the ranking by weighted sampling without
//!   replacement, members of `G = Ĝ ∪ G̃` weighted `omega2_weight` or
//!   `omega3_weight` against 1 for the rest.

use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::montecarlo::{mc_validate_with, mean_and_std, McConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub db_size: usize,
    pub g_hat: usize,
    pub g_tilde: Vec<usize>,
    pub mc_runs: usize,
    pub omega2_weight: f64,
    pub omega3_weight: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            db_size: 7000,
            g_hat: 3,
            g_tilde: vec![5, 10, 15, 20],
            mc_runs: 200,
            omega2_weight: 10.0,
            omega3_weight: 3.0,
        }
    }
}

impl SimSpec {
    pub fn validate(&self, mc: &McConfig) -> Result<()> {
        mc.validate()?;
        if self.g_hat == 0 {
            return Err(Error::Config("g_hat must be at least 1".into()));
        }
        if self.mc_runs == 0 {
            return Err(Error::Config("mc_runs must be at least 1".into()));
        }
        if self.g_tilde.is_empty() {
            return Err(Error::Config("at least one g_tilde value is required".into()));
        }
        let widest = self.g_tilde.iter().copied().max().unwrap_or(0);
        if self.g_hat + widest >= self.db_size {
            return Err(Error::Config(format!(
                "g_hat + g_tilde must stay below db_size ({} + {widest} >= {})",
                self.g_hat, self.db_size
            )));
        }
        if !(self.omega2_weight > self.omega3_weight && self.omega3_weight > 1.0) {
            return Err(Error::Config(format!(
                "bias weights must satisfy omega2 > omega3 > 1 (got {}, {})",
                self.omega2_weight, self.omega3_weight
            )));
        }
        let pool = self.db_size - self.g_hat;
        if mc.m > pool {
            return Err(Error::SampleTooLarge {
                m: mc.m,
                available: pool,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    Omega1,
    Omega2,
    Omega3,
}

impl System {
    pub const ALL: [System; 3] = [System::Omega1, System::Omega2, System::Omega3];

    pub fn name(self) -> &'static str {
        match self {
            System::Omega1 => "omega1",
            System::Omega2 => "omega2",
            System::Omega3 => "omega3",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Layout of one simulated database.
#[derive(Debug, Clone, Copy)]
struct Layout {
    g_hat: usize,
    g_tilde: usize,
}

impl Layout {
    fn is_hidden(&self, item: usize) -> bool {
        (self.g_hat..self.g_hat + self.g_tilde).contains(&item)
    }

    fn is_similar(&self, item: usize) -> bool {
        item < self.g_hat + self.g_tilde
    }
}

fn rank_omega1(layout: Layout, candidates: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut hidden = Vec::new();
    let mut identified = Vec::new();
    let mut rest = Vec::new();
    for &c in candidates {
        if layout.is_hidden(c) {
            hidden.push(c);
        } else if c < layout.g_hat {
            identified.push(c);
        } else {
            rest.push(c);
        }
    }
    hidden.shuffle(rng);
    identified.shuffle(rng);
    rest.shuffle(rng);
    hidden.extend(identified);
    hidden.extend(rest);
    hidden
}

/// Weighted sampling without replacement: sorting by `ln(u)/w` descending
/// draws items in proportion to their remaining weight.
fn rank_weighted(layout: Layout, weight: f64, candidates: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = candidates
        .iter()
        .map(|&c| {
            let u: f64 = 1.0 - rng.random::<f64>();
            let w = if layout.is_similar(c) { weight } else { 1.0 };
            (u.ln() / w, c)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, c)| c).collect()
}

/// Mean score of one system at one `|G̃|`, with standard errors across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub system: System,
    pub g_tilde: usize,
    pub map: f64,
    pub map_se: f64,
    pub mrr: f64,
    pub mrr_se: f64,
    pub runs: usize,
}

/// Runs every system at every `|G̃|` for `mc_runs` independent runs of the
/// down-sampling validation. Systems share the down-sampled databases of a
/// run, so their differences are paired.
pub fn simulate_bounds(spec: &SimSpec, mc: &McConfig) -> Result<Vec<BoundRow>> {
    spec.validate(mc)?;
    let identified: Vec<usize> = (0..spec.g_hat).collect();
    let pool: Vec<usize> = (spec.g_hat..spec.db_size).collect();
    let mut rows = Vec::with_capacity(spec.g_tilde.len() * System::ALL.len());
    for &g_tilde in &spec.g_tilde {
        let layout = Layout {
            g_hat: spec.g_hat,
            g_tilde,
        };
        for system in System::ALL {
            let ranker = move |cands: &[usize], rng: &mut ChaCha8Rng| match system {
                System::Omega1 => rank_omega1(layout, cands, rng),
                System::Omega2 => rank_weighted(layout, spec.omega2_weight, cands, rng),
                System::Omega3 => rank_weighted(layout, spec.omega3_weight, cands, rng),
            };
            let mut maps = Vec::with_capacity(spec.mc_runs);
            let mut mrrs = Vec::with_capacity(spec.mc_runs);
            for run in 0..spec.mc_runs {
                let stream = ((g_tilde as u64) << 32) | run as u64;
                let s = mc_validate_with(&pool, &identified, &ranker, mc, stream)?;
                maps.push(s.map);
                mrrs.push(s.mrr);
            }
            let root = (spec.mc_runs as f64).sqrt();
            let (map, map_sd) = mean_and_std(&maps);
            let (mrr, mrr_sd) = mean_and_std(&mrrs);
            rows.push(BoundRow {
                system,
                g_tilde,
                map,
                map_se: map_sd / root,
                mrr,
                mrr_se: mrr_sd / root,
                runs: spec.mc_runs,
            });
        }
    }
    Ok(rows)
}

pub fn write_bounds_csv(out: &mut impl Write, rows: &[BoundRow]) -> std::io::Result<()> {
    writeln!(out, "system,g_tilde,map,map_se,mrr,mrr_se")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6}",
            r.system, r.g_tilde, r.map, r.map_se, r.mrr, r.mrr_se
        )?;
    }
    Ok(())
}

/// Series per system, ready for plotting `|G̃|` against the scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub system: System,
    pub g_tilde: Vec<usize>,
    pub map: Vec<f64>,
    pub map_se: Vec<f64>,
    pub mrr: Vec<f64>,
    pub mrr_se: Vec<f64>,
}

pub fn plot_series(rows: &[BoundRow]) -> Vec<PlotSeries> {
    System::ALL
        .into_iter()
        .map(|system| {
            let mine: Vec<&BoundRow> = rows.iter().filter(|r| r.system == system).collect();
            PlotSeries {
                system,
                g_tilde: mine.iter().map(|r| r.g_tilde).collect(),
                map: mine.iter().map(|r| r.map).collect(),
                map_se: mine.iter().map(|r| r.map_se).collect(),
                mrr: mine.iter().map(|r| r.mrr).collect(),
                mrr_se: mine.iter().map(|r| r.mrr_se).collect(),
            }
        })
        .collect()
}
