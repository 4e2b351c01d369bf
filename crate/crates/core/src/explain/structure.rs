use std::collections::BTreeMap;
use std::ops::Range;

use ndarray::ArrayViewMut1;
use serde::Serialize;

use crate::dataset::{Code, EncodedDataset, FeatureSpan};
use crate::error::{Error, Result};

/// Coalitions are bitmasks over player indices.
pub type Coalition = u128;

pub const MAX_PLAYERS: usize = 128;

/// An attribution unit: one or more feature spans masked together.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Player {
    pub name: String,
    /// Indices into the dataset's spans.
    pub spans: Vec<usize>,
    #[serde(skip)]
    pub columns: Vec<Range<usize>>,
}

/// How a span that is not itself a player is kept consistent with the
/// spliced columns of the players it depends on.
#[derive(Debug, Clone, PartialEq)]
enum Fill {
    /// A derived view recomputed from its source span.
    View {
        span: FeatureSpan,
        source: FeatureSpan,
        mapping: BTreeMap<Code, Code>,
    },
    /// A composite span rebuilt from the views that partition it.
    Composite {
        span: FeatureSpan,
        views: Vec<FeatureSpan>,
        lookup: BTreeMap<Vec<Code>, Code>,
    },
}

/// Players, their Owen blocks, and the consistency fills for spans outside
/// the player set. Spans that are neither players nor filled always take the
/// background row's values.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStructure {
    pub players: Vec<Player>,
    pub blocks: Vec<Vec<usize>>,
    width: usize,
    fills: Vec<Fill>,
    /// Every span is a player or filled from players.
    complete: bool,
}

fn set_one_hot(row: &mut ArrayViewMut1<f64>, span: &FeatureSpan, code: Code) {
    if let Some(pos) = span.position(code) {
        for c in span.columns() {
            row[c] = 0.0;
        }
        row[span.start + pos] = 1.0;
    }
}

fn active_code(row: &ArrayViewMut1<f64>, span: &FeatureSpan) -> Option<Code> {
    span.columns()
        .position(|c| row[c] == 1.0)
        .map(|i| span.codes[i])
}

impl GroupStructure {
    /// `players` lists `(player name, span names)`; `blocks` partitions the
    /// player indices.
    pub fn new(ds: &EncodedDataset, players: &[(String, Vec<String>)], blocks: Vec<Vec<usize>>) -> Result<Self> {
        if players.is_empty() {
            return Err(Error::Config("an attribution needs at least one player".into()));
        }
        if players.len() > MAX_PLAYERS {
            return Err(Error::Capacity(format!(
                "{} players exceed the {MAX_PLAYERS}-player limit",
                players.len()
            )));
        }
        let mut owner: Vec<Option<usize>> = vec![None; ds.spans.len()];
        let mut built = Vec::with_capacity(players.len());
        for (p, (name, spans)) in players.iter().enumerate() {
            if spans.is_empty() {
                return Err(Error::Config(format!("player {name} has no spans")));
            }
            let mut idx = Vec::new();
            for s in spans {
                let (k, _) = ds
                    .span(s)
                    .ok_or_else(|| Error::Reference(format!("player {name}: unknown feature {s}")))?;
                if let Some(other) = owner[k] {
                    return Err(Error::Config(format!(
                        "feature {s} belongs to both {} and {name}",
                        players[other].0
                    )));
                }
                owner[k] = Some(p);
                idx.push(k);
            }
            built.push(Player {
                name: name.clone(),
                columns: idx.iter().map(|&k| ds.spans[k].columns()).collect(),
                spans: idx,
            });
        }
        let fills = Self::plan_fills(ds, &owner);
        let complete = owner.iter().filter(|o| o.is_some()).count() + fills.len() == ds.spans.len();
        let s = GroupStructure {
            players: built,
            blocks,
            width: ds.width(),
            fills,
            complete,
        };
        s.check_blocks()?;
        Ok(s)
    }

    fn plan_fills(ds: &EncodedDataset, owner: &[Option<usize>]) -> Vec<Fill> {
        let views_of = |src: usize| -> Vec<usize> {
            (0..ds.spans.len())
                .filter(|&k| matches!(&ds.spans[k].derived, Some(d) if d.source == src))
                .collect()
        };
        let mut fills = Vec::new();
        let mut rebuilt = vec![false; ds.spans.len()];
        // Composites first, so dependent views can be recomputed after.
        for (k, span) in ds.spans.iter().enumerate() {
            if span.derived.is_some() || owner[k].is_some() {
                continue;
            }
            let views = views_of(k);
            if views.is_empty() || views.iter().any(|&v| owner[v].is_none()) {
                continue;
            }
            let mut lookup = BTreeMap::new();
            for &code in &span.codes {
                let key: Vec<Code> = views
                    .iter()
                    .filter_map(|&v| ds.spans[v].derived.as_ref().and_then(|d| d.mapping.get(&code).copied()))
                    .collect();
                if key.len() == views.len() {
                    lookup.insert(key, code);
                }
            }
            // Only a bijection lets the views determine the composite.
            if lookup.len() == span.codes.len() {
                rebuilt[k] = true;
                fills.push(Fill::Composite {
                    span: span.clone(),
                    views: views.iter().map(|&v| ds.spans[v].clone()).collect(),
                    lookup,
                });
            }
        }
        for (k, span) in ds.spans.iter().enumerate() {
            if owner[k].is_some() {
                continue;
            }
            if let Some(d) = &span.derived {
                if owner[d.source].is_some() || rebuilt[d.source] {
                    fills.push(Fill::View {
                        span: span.clone(),
                        source: ds.spans[d.source].clone(),
                        mapping: d.mapping.clone(),
                    });
                }
            }
        }
        fills
    }

    fn check_blocks(&self) -> Result<()> {
        let mut seen = vec![false; self.players.len()];
        for block in &self.blocks {
            if block.is_empty() {
                return Err(Error::Config("empty coalition block".into()));
            }
            for &p in block {
                if p >= seen.len() || seen[p] {
                    return Err(Error::Config(format!(
                        "coalition blocks must partition the {} players",
                        seen.len()
                    )));
                }
                seen[p] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config("coalition blocks leave players out".into()));
        }
        Ok(())
    }

    /// One player per original feature, in singleton blocks; derived views
    /// follow their source.
    pub fn features(ds: &EncodedDataset) -> Result<Self> {
        let players: Vec<(String, Vec<String>)> = ds
            .spans
            .iter()
            .filter(|s| s.derived.is_none())
            .map(|s| (s.name.clone(), vec![s.name.clone()]))
            .collect();
        let blocks = (0..players.len()).map(|i| vec![i]).collect();
        Self::new(ds, &players, blocks)
    }

    /// Replaces the composite feature `source` by its derived views, grouped
    /// in one block; every other feature is a singleton block.
    pub fn with_views(ds: &EncodedDataset, source: &str) -> Result<Self> {
        let (src, _) = ds
            .span(source)
            .ok_or_else(|| Error::Reference(format!("unknown feature {source}")))?;
        let mut players = Vec::new();
        let mut blocks = Vec::new();
        let mut view_block = Vec::new();
        for (k, s) in ds.spans.iter().enumerate() {
            let is_view = matches!(&s.derived, Some(d) if d.source == src);
            if k == src || (s.derived.is_some() && !is_view) {
                continue;
            }
            if is_view {
                view_block.push(players.len());
            } else {
                blocks.push(vec![players.len()]);
            }
            players.push((s.name.clone(), vec![s.name.clone()]));
        }
        if view_block.is_empty() {
            return Err(Error::Reference(format!("feature {source} has no derived views")));
        }
        blocks.push(view_block);
        let s = Self::new(ds, &players, blocks)?;
        if !s.fills.iter().any(|f| matches!(f, Fill::Composite { span, .. } if span.name == source)) {
            return Err(Error::Config(format!(
                "the views of {source} do not determine it uniquely"
            )));
        }
        Ok(s)
    }

    pub fn with_blocks(mut self, blocks: Vec<Vec<usize>>) -> Result<Self> {
        self.blocks = blocks;
        self.check_blocks()?;
        Ok(self)
    }

    pub fn singleton_blocks(self) -> Self {
        let blocks = (0..self.players.len()).map(|i| vec![i]).collect();
        GroupStructure { blocks, ..self }
    }

    pub fn single_block(self) -> Self {
        let blocks = vec![(0..self.players.len()).collect()];
        GroupStructure { blocks, ..self }
    }

    pub fn len(&self) -> usize {
        self.players.len()
    }

    pub fn is_empty(&self) -> bool {
        self.players.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// True when the full coalition reproduces the explained row exactly.
    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn names(&self) -> Vec<&str> {
        self.players.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn player(&self, name: &str) -> Option<usize> {
        self.players.iter().position(|p| p.name == name)
    }

    pub fn full(&self) -> Coalition {
        if self.players.len() == MAX_PLAYERS {
            Coalition::MAX
        } else {
            (1 << self.players.len()) - 1
        }
    }

    /// Overwrites `row` (a background row) with the coalition's columns from
    /// `x`, then restores consistency of the filled spans.
    pub fn splice(&self, row: &mut ArrayViewMut1<f64>, x: &[f64], coalition: Coalition) {
        for (p, player) in self.players.iter().enumerate() {
            if coalition >> p & 1 == 1 {
                for cols in &player.columns {
                    for c in cols.clone() {
                        row[c] = x[c];
                    }
                }
            }
        }
        for fill in &self.fills {
            match fill {
                Fill::View { span, source, mapping } => {
                    if let Some(code) = active_code(row, source).and_then(|c| mapping.get(&c)) {
                        set_one_hot(row, span, *code);
                    }
                }
                Fill::Composite { span, views, lookup } => {
                    let key: Option<Vec<Code>> = views.iter().map(|v| active_code(row, v)).collect();
                    if let Some(code) = key.and_then(|k| lookup.get(&k)) {
                        set_one_hot(row, span, *code);
                    }
                }
            }
        }
    }
}
