use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::NeuronIndex;
use crate::output::{fmt_f64, write_rows};

/// Trajectories of a set of neurons (or mean-field paths) on a common time
/// grid. Values are stored row-major: one row per recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    times: Vec<f64>,
    columns: Vec<NeuronIndex>,
    values: Vec<f64>,
}

impl PathEnsemble {
    pub fn new(columns: Vec<NeuronIndex>) -> Self {
        PathEnsemble {
            times: Vec::new(),
            columns,
            values: Vec::new(),
        }
    }

    pub fn push_row(&mut self, t: f64, row: impl IntoIterator<Item = f64>) {
        let before = self.values.len();
        self.values.extend(row);
        debug_assert_eq!(self.values.len() - before, self.columns.len());
        self.times.push(t);
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn columns(&self) -> &[NeuronIndex] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.columns.len();
        &self.values[k * w..(k + 1) * w]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let w = self.columns.len();
        (0..self.times.len()).map(move |k| self.values[k * w + j])
    }

    pub fn column_of(&self, idx: NeuronIndex) -> Option<usize> {
        self.columns.iter().position(|&c| c == idx)
    }

    /// Largest absolute value over all recorded entries.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, x| f64::max(m, x.abs()))
    }

    /// CSV with a `t` column followed by one column per path labelled `i_a_p`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.columns.iter().map(NeuronIndex::label));
        let rows = (0..self.len()).map(|k| {
            std::iter::once(self.times[k])
                .chain(self.row(k).iter().copied())
                .map(fmt_f64)
                .collect()
        });
        write_rows(out, &header, rows)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(input);
        let header = reader.headers()?.clone();
        if header.get(0) != Some("t") {
            return Err(Error::Io("first column must be `t`".into()));
        }
        let columns = header
            .iter()
            .skip(1)
            .map(parse_label)
            .collect::<Result<Vec<_>>>()?;
        let mut ensemble = PathEnsemble::new(columns);
        for record in reader.records() {
            let record = record?;
            let nums = record
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Io(format!("bad number {f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if nums.len() != ensemble.columns.len() + 1 {
                return Err(Error::Io("ragged row".into()));
            }
            ensemble.push_row(nums[0], nums[1..].iter().copied());
        }
        Ok(ensemble)
    }
}

fn parse_label(label: &str) -> Result<NeuronIndex> {
    let bad = || Error::Io(format!("bad column label {label:?}"));
    // Groups and slots may be negative, so split from the left on '_' only
    // where it separates fields.
    let mut parts = label.splitn(3, '_');
    let group: i64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let population: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let slot: i64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    if population == 0 {
        return Err(bad());
    }
    Ok(NeuronIndex::new(group, population - 1, slot))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_lossless() {
        let cols = vec![NeuronIndex::new(-1, 0, 0), NeuronIndex::new(2, 1, -3)];
        let mut e = PathEnsemble::new(cols);
        e.push_row(0.0, [0.1, -1.0 / 3.0]);
        e.push_row(0.5, [f64::MIN_POSITIVE, 1e300]);
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,-1_1_0,2_2_-3\n"));
        let back = PathEnsemble::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.column(1).collect::<Vec<_>>(), vec![-1.0 / 3.0, 1e300]);
        assert_eq!(back.column_of(NeuronIndex::new(2, 1, -3)), Some(1));
        assert_eq!(back.max_abs(), 1e300);
    }

    #[test]
    fn rejects_bad_labels() {
        assert!(PathEnsemble::read_csv("t,0_0_0\n1,2\n".as_bytes()).is_err());
        assert!(PathEnsemble::read_csv("x,0_1_0\n1,2\n".as_bytes()).is_err());
    }
}
