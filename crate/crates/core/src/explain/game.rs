use std::collections::HashMap;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::background::{BackgroundSet, Predictor};
use super::structure::{Coalition, GroupStructure};
use crate::dataset::EncodedDataset;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_for};

pub const MAX_EXACT_SHAPLEY_PLAYERS: usize = 20;
pub const MAX_EXACT_OWEN_BLOCKS: usize = 12;
pub const MAX_EXACT_OWEN_BLOCK_SIZE: usize = 12;
pub const DEFAULT_PERMUTATIONS: usize = 2000;

/// Hybrid rows per model call.
const CHUNK_ROWS: usize = 8192;
/// Permutations whose coalitions are evaluated together.
const PERMUTATION_BATCH: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ShapleyExact,
    ShapleySampled,
    OwenExact,
    OwenSampled,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ShapleyExact => "shapley-exact",
            Method::ShapleySampled => "shapley-sampled",
            Method::OwenExact => "owen-exact",
            Method::OwenSampled => "owen-sampled",
        }
    }

    pub fn is_sampled(self) -> bool {
        matches!(self, Method::ShapleySampled | Method::OwenSampled)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Attribution {
    /// Row index of the explained instance in its dataset.
    pub instance: usize,
    pub method: Method,
    /// One value per player, in structure order.
    pub values: Vec<f64>,
    /// Standard error of each value; sampled methods only.
    pub std_errors: Option<Vec<f64>>,
    pub base_value: f64,
    pub prediction: f64,
    /// `prediction - base_value - sum(values)`.
    pub efficiency_residual: f64,
    pub n_permutations: Option<usize>,
}

fn bit(p: usize) -> Coalition {
    1 << p
}

fn mask_of(players: &[usize]) -> Coalition {
    players.iter().fold(0, |m, &p| m | bit(p))
}

/// `|S|! (n - |S| - 1)! / n!` for `|S| = 0..n`.
fn shapley_weights(n: usize) -> Vec<f64> {
    // 1 / (n * C(n-1, s))
    let mut binom = 1.0;
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        out.push(1.0 / (n as f64 * binom));
        binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
    }
    out
}

/// The coalition game of one instance, with memoized payoffs.
///
/// The hybrid row for background row `b` under coalition `S` only depends on
/// the players where `x` and `b` differ, so rows are keyed by
/// `(b, S minus the players they agree on)` and each distinct row is
/// evaluated once.
struct Game<'a, M: Predictor> {
    model: &'a M,
    structure: &'a GroupStructure,
    background: &'a BackgroundSet,
    x: Vec<f64>,
    /// Players on which each background row already equals `x`.
    agree: Vec<Coalition>,
    rows: HashMap<(usize, Coalition), f64>,
    memo: HashMap<Coalition, f64>,
}

impl<'a, M: Predictor> Game<'a, M> {
    fn new(explainer: &Explainer<'a, M>, x: ArrayView1<f64>) -> Result<Self> {
        let structure = explainer.structure;
        if x.len() != structure.width() {
            return Err(Error::shape(
                format!("{} columns", structure.width()),
                format!("{} columns", x.len()),
            ));
        }
        let agree = explainer
            .background
            .rows
            .axis_iter(Axis(0))
            .map(|b| {
                structure.players.iter().enumerate().fold(0, |m, (p, player)| {
                    let same = player.columns.iter().flat_map(|r| r.clone()).all(|c| b[c] == x[c]);
                    if same {
                        m | bit(p)
                    } else {
                        m
                    }
                })
            })
            .collect();
        Ok(Game {
            model: explainer.model,
            structure,
            background: explainer.background,
            x: x.to_vec(),
            agree,
            rows: HashMap::new(),
            memo: HashMap::new(),
        })
    }

    fn ensure(&mut self, masks: &[Coalition]) -> Result<()> {
        let mut missing: Vec<Coalition> = masks.iter().copied().filter(|m| !self.memo.contains_key(m)).collect();
        missing.sort_unstable();
        missing.dedup();
        if missing.is_empty() {
            return Ok(());
        }
        let mut keys: Vec<(usize, Coalition)> = missing
            .iter()
            .flat_map(|&m| self.agree.iter().enumerate().map(move |(b, &a)| (b, m & !a)))
            .filter(|k| !self.rows.contains_key(k))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        let width = self.structure.width();
        for chunk in keys.chunks(CHUNK_ROWS) {
            let mut hybrid = Array2::zeros((chunk.len(), width));
            for (mut row, &(b, mask)) in hybrid.axis_iter_mut(Axis(0)).zip(chunk) {
                row.assign(&self.background.rows.row(b));
                self.structure.splice(&mut row, &self.x, mask);
            }
            let out = self.model.predict_rows(hybrid.view())?;
            self.rows.extend(chunk.iter().copied().zip(out));
        }
        let full = self.structure.full();
        let n = self.agree.len() as f64;
        for mask in missing {
            let value = if mask == full && self.structure.is_complete() {
                // every column comes from x
                self.prediction()?
            } else {
                self.agree
                    .iter()
                    .enumerate()
                    .map(|(b, &a)| self.rows[&(b, mask & !a)])
                    .sum::<f64>()
                    / n
            };
            self.memo.insert(mask, value);
        }
        Ok(())
    }

    fn prediction(&self) -> Result<f64> {
        let x = ArrayView1::from(&self.x[..]).insert_axis(Axis(0));
        Ok(self.model.predict_rows(x)?[0])
    }

    fn value(&mut self, mask: Coalition) -> Result<f64> {
        self.ensure(&[mask])?;
        Ok(self.memo[&mask])
    }

    fn finish(
        &mut self,
        method: Method,
        values: Vec<f64>,
        std_errors: Option<Vec<f64>>,
        n_permutations: Option<usize>,
    ) -> Result<Attribution> {
        let base_value = self.value(0)?;
        let prediction = self.prediction()?;
        let efficiency_residual = prediction - base_value - values.iter().sum::<f64>();
        Ok(Attribution {
            instance: 0,
            method,
            values,
            std_errors,
            base_value,
            prediction,
            efficiency_residual,
            n_permutations,
        })
    }

    /// Mean marginal contribution over the given player orders.
    fn permutation_estimate(&mut self, orders: &[Vec<usize>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.structure.len();
        // Welford running mean and squared deviations per player.
        let mut mean = vec![0.0; n];
        let mut m2 = vec![0.0; n];
        let mut count = 0.0;
        for batch in orders.chunks(PERMUTATION_BATCH) {
            let masks: Vec<Coalition> = batch
                .iter()
                .flat_map(|order| {
                    order.iter().scan(0, |m: &mut Coalition, &p| {
                        *m |= bit(p);
                        Some(*m)
                    })
                })
                .chain(std::iter::once(0))
                .collect();
            self.ensure(&masks)?;
            for order in batch {
                count += 1.0;
                let mut mask = 0;
                let mut prev = self.memo[&0];
                for &p in order {
                    mask |= bit(p);
                    let cur = self.memo[&mask];
                    let d = cur - prev;
                    let delta = d - mean[p];
                    mean[p] += delta / count;
                    m2[p] += delta * (d - mean[p]);
                    prev = cur;
                }
            }
        }
        let se = m2
            .iter()
            .map(|&sq| {
                if count < 2.0 {
                    0.0
                } else {
                    (sq / (count - 1.0) / count).sqrt()
                }
            })
            .collect();
        Ok((mean, se))
    }
}

/// Attributes model outputs to the players of a [`GroupStructure`] against a
/// background set (interventional masking).
pub struct Explainer<'a, M: Predictor> {
    model: &'a M,
    structure: &'a GroupStructure,
    background: &'a BackgroundSet,
}

impl<'a, M: Predictor> Explainer<'a, M> {
    pub fn new(model: &'a M, structure: &'a GroupStructure, background: &'a BackgroundSet) -> Result<Self> {
        for (what, width) in [("model", model.input_width()), ("background", background.rows.ncols())] {
            if width != structure.width() {
                return Err(Error::shape(
                    format!("{} columns", structure.width()),
                    format!("{what} with {width} columns"),
                ));
            }
        }
        if background.is_empty() {
            return Err(Error::Config("empty background set".into()));
        }
        Ok(Explainer {
            model,
            structure,
            background,
        })
    }

    pub fn structure(&self) -> &GroupStructure {
        self.structure
    }

    /// Mean model output over background rows with the coalition's columns
    /// taken from `x`.
    pub fn value(&self, x: ArrayView1<f64>, coalition: &[usize]) -> Result<f64> {
        if let Some(&p) = coalition.iter().find(|&&p| p >= self.structure.len()) {
            return Err(Error::Reference(format!("player index {p} out of range")));
        }
        Game::new(self, x)?.value(mask_of(coalition))
    }

    pub fn shapley_exact(&self, x: ArrayView1<f64>) -> Result<Attribution> {
        let n = self.structure.len();
        if n > MAX_EXACT_SHAPLEY_PLAYERS {
            return Err(Error::Capacity(format!(
                "exact Shapley enumerates 2^{n} coalitions; use the sampled estimator above {MAX_EXACT_SHAPLEY_PLAYERS} players"
            )));
        }
        let mut game = Game::new(self, x)?;
        let all: Vec<Coalition> = (0..1u128 << n).collect();
        game.ensure(&all)?;
        let w = shapley_weights(n);
        let mut values = vec![0.0; n];
        for &s in &all {
            let size = s.count_ones() as usize;
            if size == n {
                continue;
            }
            let vs = game.memo[&s];
            for (i, v) in values.iter_mut().enumerate() {
                if s & bit(i) == 0 {
                    *v += w[size] * (game.memo[&(s | bit(i))] - vs);
                }
            }
        }
        game.finish(Method::ShapleyExact, values, None, None)
    }

    pub fn owen_exact(&self, x: ArrayView1<f64>) -> Result<Attribution> {
        let blocks = &self.structure.blocks;
        let m = blocks.len();
        if m > MAX_EXACT_OWEN_BLOCKS || blocks.iter().any(|b| b.len() > MAX_EXACT_OWEN_BLOCK_SIZE) {
            return Err(Error::Capacity(format!(
                "exact Owen supports at most {MAX_EXACT_OWEN_BLOCKS} blocks of at most \
                 {MAX_EXACT_OWEN_BLOCK_SIZE} players; use the sampled estimator"
            )));
        }
        let mut game = Game::new(self, x)?;
        let block_masks: Vec<Coalition> = blocks.iter().map(|b| mask_of(b)).collect();
        let outer = shapley_weights(m);
        let mut values = vec![0.0; self.structure.len()];
        for (k, block) in blocks.iter().enumerate() {
            let others: Vec<Coalition> = (0..m).filter(|&j| j != k).map(|j| block_masks[j]).collect();
            let unions: Vec<(usize, Coalition)> = (0..1usize << others.len())
                .map(|r| {
                    let u = (0..others.len())
                        .filter(|&j| r >> j & 1 == 1)
                        .fold(0, |acc, j| acc | others[j]);
                    (r.count_ones() as usize, u)
                })
                .collect();
            let inner = shapley_weights(block.len());
            let mut needed = Vec::new();
            let mut terms = Vec::new();
            for &i in block {
                let rest: Vec<usize> = block.iter().copied().filter(|&p| p != i).collect();
                for t in 0..1usize << rest.len() {
                    let tm = (0..rest.len())
                        .filter(|&j| t >> j & 1 == 1)
                        .fold(0, |acc, j| acc | bit(rest[j]));
                    let wt = inner[t.count_ones() as usize];
                    for &(r_size, u) in &unions {
                        let s = u | tm;
                        needed.push(s);
                        needed.push(s | bit(i));
                        terms.push((i, outer[r_size] * wt, s));
                    }
                }
            }
            game.ensure(&needed)?;
            for (i, w, s) in terms {
                values[i] += w * (game.memo[&(s | bit(i))] - game.memo[&s]);
            }
        }
        game.finish(Method::OwenExact, values, None, None)
    }

    fn check_permutations(n_permutations: usize) -> Result<()> {
        if n_permutations == 0 {
            return Err(Error::Config("n_permutations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn shapley_sampled(&self, x: ArrayView1<f64>, n_permutations: usize, seed: u64) -> Result<Attribution> {
        Self::check_permutations(n_permutations)?;
        let mut rng = rng_for(seed, "shapley-permutations", 0);
        let base: Vec<usize> = (0..self.structure.len()).collect();
        let orders: Vec<Vec<usize>> = (0..n_permutations)
            .map(|_| {
                let mut o = base.clone();
                o.shuffle(&mut rng);
                o
            })
            .collect();
        let mut game = Game::new(self, x)?;
        let (values, se) = game.permutation_estimate(&orders)?;
        game.finish(Method::ShapleySampled, values, Some(se), Some(n_permutations))
    }

    /// Orders drawn as a random block order with each block internally
    /// shuffled; unbiased for [`Self::owen_exact`].
    pub fn owen_sampled(&self, x: ArrayView1<f64>, n_permutations: usize, seed: u64) -> Result<Attribution> {
        Self::check_permutations(n_permutations)?;
        let mut rng = rng_for(seed, "owen-permutations", 0);
        let orders: Vec<Vec<usize>> = (0..n_permutations)
            .map(|_| {
                let mut blocks = self.structure.blocks.clone();
                blocks.shuffle(&mut rng);
                for b in &mut blocks {
                    b.shuffle(&mut rng);
                }
                blocks.concat()
            })
            .collect();
        let mut game = Game::new(self, x)?;
        let (values, se) = game.permutation_estimate(&orders)?;
        game.finish(Method::OwenSampled, values, Some(se), Some(n_permutations))
    }

    pub fn explain(&self, x: ArrayView1<f64>, method: Method, n_permutations: usize, seed: u64) -> Result<Attribution> {
        match method {
            Method::ShapleyExact => self.shapley_exact(x),
            Method::OwenExact => self.owen_exact(x),
            Method::ShapleySampled => self.shapley_sampled(x, n_permutations, seed),
            Method::OwenSampled => self.owen_sampled(x, n_permutations, seed),
        }
    }

    /// Explains the given rows of `ds` in parallel; results follow `rows`.
    /// Sampled methods seed each instance from `(seed, row)`.
    pub fn explain_rows(
        &self,
        ds: &EncodedDataset,
        rows: &[usize],
        method: Method,
        n_permutations: usize,
        seed: u64,
    ) -> Result<Vec<Attribution>> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= ds.len()) {
            return Err(Error::Reference(format!("row {bad} outside a {}-row dataset", ds.len())));
        }
        rows.par_iter()
            .map(|&r| {
                let mut a = self.explain(
                    ds.design.row(r),
                    method,
                    n_permutations,
                    derive_seed(seed, "instance", r as u64),
                )?;
                a.instance = r;
                Ok(a)
            })
            .collect()
    }
}
