use std::collections::BTreeMap;
use std::ops::Range;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use super::schema::{Code, SurveySchema};
use super::table::RawSurveyTable;

/// The one-hot block of a single categorical feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpan {
    pub name: String,
    pub start: usize,
    /// Category codes in column order; column `start + i` is hot for `codes[i]`.
    pub codes: Vec<Code>,
    /// For derived views: index of the source span and the code mapping.
    pub derived: Option<DerivedSpan>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedSpan {
    pub source: usize,
    pub mapping: BTreeMap<Code, Code>,
}

impl FeatureSpan {
    pub fn columns(&self) -> Range<usize> {
        self.start..self.start + self.codes.len()
    }

    pub fn width(&self) -> usize {
        self.codes.len()
    }

    pub fn position(&self, code: Code) -> Option<usize> {
        self.codes.iter().position(|&c| c == code)
    }

    /// Index of the hot column within this span for a one-hot row.
    pub fn active(&self, row: ArrayView1<'_, f64>) -> Option<usize> {
        (0..self.width()).find(|&i| row[self.start + i] == 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub design: Array2<f64>,
    pub labels: Vec<u8>,
    pub silo_ids: Vec<u32>,
    pub spans: Vec<FeatureSpan>,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn width(&self) -> usize {
        self.design.ncols()
    }

    pub fn span(&self, name: &str) -> Option<(usize, &FeatureSpan)> {
        self.spans.iter().enumerate().find(|(_, s)| s.name == name)
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.design.view()
    }

    pub fn rows(&self, indices: &[usize]) -> Array2<f64> {
        self.design.select(Axis(0), indices)
    }

    pub fn labels_of(&self, indices: &[usize]) -> Vec<u8> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    pub fn subset(&self, indices: &[usize]) -> EncodedDataset {
        let labels = self.labels_of(indices);
        let n_pos = labels.iter().filter(|&&y| y == 1).count();
        EncodedDataset {
            design: self.rows(indices),
            silo_ids: indices.iter().map(|&i| self.silo_ids[i]).collect(),
            spans: self.spans.clone(),
            n_pos,
            n_neg: labels.len() - n_pos,
            labels,
        }
    }

    /// Recovers each original (non-derived) feature's code by the hot column.
    pub fn decode(&self) -> Vec<Vec<Code>> {
        self.design
            .rows()
            .into_iter()
            .map(|row| {
                self.spans
                    .iter()
                    .filter(|s| s.derived.is_none())
                    .map(|s| {
                        let block = row.slice(ndarray::s![s.columns()]);
                        let best = block
                            .iter()
                            .enumerate()
                            .fold(0, |b, (i, &v)| if v > block[b] { i } else { b });
                        s.codes[best]
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn encode(table: &RawSurveyTable, schema: &SurveySchema) -> EncodedDataset {
    let mut spans = Vec::new();
    let mut start = 0;
    for f in &schema.feature_columns {
        spans.push(FeatureSpan {
            name: f.name.clone(),
            start,
            codes: f.codes.clone(),
            derived: None,
        });
        start += f.codes.len();
    }
    for view in &schema.derived_views {
        let source = schema
            .feature_columns
            .iter()
            .position(|f| f.name == view.source)
            .expect("validated schema");
        let codes = view.codes();
        let width = codes.len();
        spans.push(FeatureSpan {
            name: view.name.clone(),
            start,
            codes,
            derived: Some(DerivedSpan {
                source,
                mapping: view.mapping.clone(),
            }),
        });
        start += width;
    }

    let n = table.row_count();
    let mut design = Array2::zeros((n, start));
    let mut labels = Vec::with_capacity(n);
    let mut silo_ids = Vec::with_capacity(n);
    let target = schema.target_index();
    for (r, row) in table.rows.iter().enumerate() {
        // Original spans come first in schema order, so their index is the raw column.
        for (k, span) in spans.iter().enumerate() {
            let code = match &span.derived {
                None => row[k],
                Some(d) => d.mapping[&row[d.source]],
            };
            let pos = span.position(code).expect("filtered table");
            design[[r, span.start + pos]] = 1.0;
        }
        labels.push(u8::from(row[target] == schema.target_column.positive));
        silo_ids.push(row[schema.silo_index()] as u32);
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    EncodedDataset {
        design,
        labels,
        silo_ids,
        spans,
        n_pos,
        n_neg: n - n_pos,
    }
}
