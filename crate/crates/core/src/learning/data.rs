use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{NeuError, Result};
use crate::geometry::Point;

/// Training, validation and optional test points of a common dimension.
///
/// Supervised data carries its responses as the trailing coordinate(s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub train: Vec<Point>,
    pub validation: Vec<Point>,
    pub test: Option<Vec<Point>>,
}

impl Dataset {
    pub fn new(train: Vec<Point>, validation: Vec<Point>, test: Option<Vec<Point>>) -> Result<Self> {
        if train.is_empty() {
            return Err(NeuError::Data("training set must not be empty".into()));
        }
        let d = train[0].len();
        let all = train.iter().chain(&validation).chain(test.iter().flatten());
        if let Some(bad) = all.map(|p| p.len()).find(|&l| l != d) {
            return Err(NeuError::DimensionMismatch { expected: d, got: bad });
        }
        Ok(Self { train, validation, test })
    }

    pub fn dim(&self) -> usize {
        self.train[0].len()
    }
}

/// Reads a headed CSV of numbers, one point per row.
pub fn read_points_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Point>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut points = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let values: Vec<f64> = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>().map_err(|_| {
                    NeuError::Data(format!("row {}, column {}: '{cell}' is not a number", row + 2, col + 1))
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != header.len() {
            return Err(NeuError::Data(format!("row {} has {} fields, expected {}", row + 2, values.len(), header.len())));
        }
        points.push(Point::from_vec(values));
    }
    Ok((header, points))
}

pub fn write_points_csv<W: Write>(writer: W, header: &[String], points: &[Point]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header)?;
    for p in points {
        w.write_record(p.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
