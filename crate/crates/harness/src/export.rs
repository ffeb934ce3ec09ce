//! CSV and JSON output formats.
//!
//! Path files have the header `time,curve_1,...,curve_k` and one row per grid
//! time, ascending; a stream of states is written as consecutive blocks of
//! `n² + 1` rows under a single header. Numbers use the shortest decimal that
//! parses back to the same `f64`; infinities are written `inf` and `-inf`.

use gibbs_lines_core::lattice::{BoundaryCurve, EnsembleState, Grid};
use gibbs_lines_core::ExtReal;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// An in-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("write to memory");
        for r in &self.rows {
            w.write_record(r).expect("write to memory");
        }
        String::from_utf8(w.into_inner().expect("flush to memory")).expect("CSV is UTF-8")
    }
}

/// Shortest round-trip decimal, with `inf`/`-inf` for infinities.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        ExtReal::from(x).to_string()
    }
}

pub fn parse_num(s: &str) -> Result<f64, HarnessError> {
    s.parse::<ExtReal>().map(ExtReal::to_f64).map_err(HarnessError::from)
}

/// Paths of each state at the grid times.
pub fn paths_table<'a>(states: impl IntoIterator<Item = &'a EnsembleState>) -> Table {
    let mut states = states.into_iter().peekable();
    let k = states.peek().map_or(0, |s| s.k());
    let mut t = Table::new(std::iter::once("time".to_string()).chain((1..=k).map(|i| format!("curve_{i}"))));
    for s in states {
        let dx = s.grid.dx;
        for (m, time) in s.grid.times().into_iter().enumerate() {
            let mut row = vec![fmt_num(time)];
            row.extend(s.paths.iter().map(|p| fmt_num(p.heights()[m] as f64 * dx)));
            t.push(row);
        }
    }
    t
}

/// Boundary curves at the grid times, header `time,top,bottom`.
pub fn boundary_table(grid: &Grid, top: &BoundaryCurve, bottom: &BoundaryCurve) -> Table {
    let mut t = Table::new(["time", "top", "bottom"]);
    for (m, time) in grid.times().into_iter().enumerate() {
        t.push(vec![fmt_num(time), fmt_num(top.at(m)), fmt_num(bottom.at(m))]);
    }
    t
}

/// Parses a path CSV back into lattice heights, one `Vec` of curves per state.
pub fn read_paths_csv(text: &str, grid: &Grid) -> Result<Vec<Vec<Vec<i64>>>, HarnessError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("time") || header.iter().skip(1).enumerate().any(|(i, h)| h != format!("curve_{}", i + 1)) {
        return Err(HarnessError::Config(format!("unexpected path CSV header: {header:?}")));
    }
    let k = header.len() - 1;
    let rows_per_state = grid.steps() + 1;
    let mut states = Vec::new();
    let mut current: Vec<Vec<i64>> = vec![Vec::with_capacity(rows_per_state); k];
    for (row_idx, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let m = row_idx % rows_per_state;
        let time = parse_num(&rec[0])?;
        if time != grid.time(m) {
            return Err(HarnessError::Config(format!("row {row_idx}: time {time} is not grid time {m}")));
        }
        for (i, curve) in current.iter_mut().enumerate() {
            let v = parse_num(&rec[i + 1])?;
            let idx = grid
                .index_of(v)
                .ok_or_else(|| HarnessError::Config(format!("row {row_idx}: {v} is not on the lattice")))?;
            curve.push(idx);
        }
        if m + 1 == rows_per_state {
            states.push(std::mem::replace(&mut current, vec![Vec::with_capacity(rows_per_state); k]));
        }
    }
    if current.iter().any(|c| !c.is_empty()) {
        return Err(HarnessError::Config("path CSV ends in the middle of a state".into()));
    }
    Ok(states)
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Config(format!("malformed CSV: {e}"))
}

/// One line of the ratio output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub w: f64,
    pub ratio: f64,
    pub stderr: f64,
    pub predicted: f64,
    pub n_samples: u64,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use gibbs_lines_core::lattice::DiscretePath;

    fn state(heights: Vec<Vec<i64>>, grid: Grid) -> EnsembleState {
        let paths = heights.into_iter().map(|h| DiscretePath::from_heights(h).unwrap()).collect();
        EnsembleState::new(grid, paths, BoundaryCurve::pos_inf(), BoundaryCurve::neg_inf()).unwrap()
    }

    #[test]
    fn single_curve_n2_has_five_rows() {
        let grid = Grid::new(0.0, 1.0, 2).unwrap();
        let csv = paths_table([&state(vec![vec![0, 1, 0, -1, 0]], grid)]).to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "time,curve_1");
        assert_eq!(lines.len(), 6);
    }

    #[test]
    fn round_trip_recovers_indices() {
        let grid = Grid::new(-0.5, 2.0, 3).unwrap();
        let a = state(vec![vec![3, 4, 3, 2, 3, 4, 5, 4, 3, 2], vec![0, -1, -2, -1, 0, 1, 0, -1, 0, 1]], grid);
        let b = state(vec![vec![3, 2, 1, 2, 3, 2, 3, 4, 3, 2], vec![0, 1, 0, -1, -2, -1, 0, 1, 0, 1]], grid);
        let csv = paths_table([&a, &b]).to_csv();
        let back = read_paths_csv(&csv, &grid).unwrap();
        let heights = |s: &EnsembleState| s.paths.iter().map(|p| p.heights().to_vec()).collect::<Vec<_>>();
        assert_eq!(back, vec![heights(&a), heights(&b)]);
    }

    #[test]
    fn infinite_boundaries_use_tokens() {
        let grid = Grid::new(0.0, 1.0, 1).unwrap();
        let csv = boundary_table(&grid, &BoundaryCurve::pos_inf(), &BoundaryCurve::neg_inf()).to_csv();
        assert_eq!(csv, "time,top,bottom\n0.0,inf,-inf\n1.0,inf,-inf\n");
        assert_eq!(parse_num("-inf").unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, -2.5e-17, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(parse_num(&fmt_num(x)).unwrap().to_bits(), x.to_bits());
        }
    }

    proptest::proptest! {
        #[test]
        fn csv_round_trip_is_exact(
            n in 1u32..5,
            a in -3.0f64..3.0,
            len in 0.1f64..5.0,
            steps in proptest::collection::vec(proptest::collection::vec(-1i8..=1, 25), 1..4),
            start in -20i64..20,
        ) {
            let grid = Grid::new(a, a + len, n).unwrap();
            let m = grid.steps();
            let heights: Vec<Vec<i64>> = steps
                .iter()
                .enumerate()
                .map(|(i, inc)| {
                    let mut h = vec![start - 40 * i as i64];
                    for d in &inc[..m] {
                        h.push(h[h.len() - 1] + i64::from(*d));
                    }
                    h
                })
                .collect();
            let s = state(heights.clone(), grid);
            let back = read_paths_csv(&paths_table([&s]).to_csv(), &grid).unwrap();
            proptest::prop_assert_eq!(back, vec![heights]);
        }
    }
}
