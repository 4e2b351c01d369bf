//! Raw categorical tables: CSV loading, exclusion filtering and writing.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use super::schema::{Code, SurveySchema};
use crate::error::{Error, Result};

/// Rows of integer codes aligned to [`SurveySchema::column_names`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawSurveyTable {
    pub rows: Vec<Vec<Code>>,
    pub report: FilterReport,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FilterReport {
    /// Rows removed because a cell held an exclusion code.
    pub excluded: usize,
    /// Rows removed because a cell held a code outside its allowed set.
    pub invalid: usize,
}

impl FilterReport {
    pub fn dropped(&self) -> usize {
        self.excluded + self.invalid
    }
}

impl RawSurveyTable {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Applies exclusion codes and allowed-set checks to unfiltered rows.
    pub fn filter(rows: Vec<Vec<Code>>, schema: &SurveySchema) -> Self {
        let names = schema.column_names();
        let excluded: Vec<&[Code]> = names.iter().map(|n| schema.excluded_for(n)).collect();
        let mut report = FilterReport::default();
        let kept = rows
            .into_iter()
            .filter(|row| {
                if row.iter().zip(&excluded).any(|(c, ex)| ex.contains(c)) {
                    report.excluded += 1;
                    false
                } else if row.iter().enumerate().any(|(i, &c)| !schema.allows(i, c)) {
                    report.invalid += 1;
                    false
                } else {
                    true
                }
            })
            .collect();
        RawSurveyTable { rows: kept, report }
    }
}

pub fn load_and_filter(
    path: impl AsRef<Path>,
    schema: &SurveySchema,
    delimiter: u8,
) -> Result<RawSurveyTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_and_filter(file, schema, delimiter)
}

pub fn read_and_filter<R: Read>(
    reader: R,
    schema: &SurveySchema,
    delimiter: u8,
) -> Result<RawSurveyTable> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let positions = schema
        .column_names()
        .into_iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        // Row numbers are 1-based file lines; the header is line 1.
        let line = i + 2;
        let record = record.map_err(|e| Error::Row {
            row: line,
            message: e.to_string(),
        })?;
        let row = positions
            .iter()
            .map(|&p| {
                let cell = record.get(p).unwrap_or("").trim();
                cell.parse::<Code>().map_err(|_| Error::Row {
                    row: line,
                    message: format!("cannot parse `{cell}` in column `{}`", &header[p]),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let table = RawSurveyTable::filter(rows, schema);
    log::info!(
        "loaded {} rows ({} excluded, {} invalid)",
        table.row_count(),
        table.report.excluded,
        table.report.invalid
    );
    Ok(table)
}

/// Writes rows in the same dialect [`load_and_filter`] reads.
pub fn write_csv<W: Write>(
    writer: W,
    schema: &SurveySchema,
    rows: &[Vec<Code>],
    delimiter: u8,
) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(writer);
    wtr.write_record(schema.column_names())?;
    for row in rows {
        wtr.write_record(row.iter().map(|c| c.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}
