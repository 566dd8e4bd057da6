//! Per-run summary rows for strategy comparisons.
//!
//! Everything here is computed from the training CSV alone, so a summary can
//! be rebuilt offline from a comparison directory.

use std::fmt::Write as _;

use adagan::textfmt::fmt_f64;
use adagan::train::{best_eval, first_iter_reaching, IterationRecord};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.5, 0.3, 0.2];
const MISSING: &str = "*";

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub seed: u64,
    /// First evaluated iteration at or below each threshold.
    pub first: Vec<Option<usize>>,
    pub best: Option<(usize, f64)>,
    pub u_g: u64,
    pub u_d: u64,
}

impl SummaryRow {
    pub fn from_records(
        name: &str,
        seed: u64,
        records: &[IterationRecord],
        thresholds: &[f64],
    ) -> Self {
        let last = records.last();
        Self {
            name: name.to_string(),
            seed,
            first: thresholds
                .iter()
                .map(|&t| first_iter_reaching(records, t))
                .collect(),
            best: best_eval(records),
            u_g: last.map_or(0, |r| r.u_g),
            u_d: last.map_or(0, |r| r.u_d),
        }
    }

    pub fn csv_row(&self) -> String {
        let mut out = format!("{},{}", self.name, self.seed);
        for f in &self.first {
            match f {
                Some(i) => write!(out, ",{i}"),
                None => write!(out, ",{MISSING}"),
            }
            .expect("writing to a String");
        }
        match self.best {
            Some((iter, w)) => write!(out, ",{},{iter}", fmt_f64(w)),
            None => write!(out, ",{MISSING},{MISSING}"),
        }
        .expect("writing to a String");
        write!(out, ",{},{}", self.u_g, self.u_d).expect("writing to a String");
        out
    }
}

pub fn header(thresholds: &[f64]) -> String {
    let mut h = String::from("name,seed");
    for t in thresholds {
        let _ = write!(h, ",first_iter_at_{t}");
    }
    h.push_str(",best_sliced_w,best_iter,u_g,u_d");
    h
}

/// Header plus rows sorted by name, then seed.
pub fn to_csv(rows: &[SummaryRow], thresholds: &[f64]) -> String {
    let mut sorted: Vec<&SummaryRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.name.cmp(&b.name).then(a.seed.cmp(&b.seed)));
    let mut out = header(thresholds);
    out.push('\n');
    for r in sorted {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use adagan::UpdateTarget;

    fn rec(iter: usize, w: Option<f64>) -> IterationRecord {
        IterationRecord {
            iter,
            target: UpdateTarget::Generator,
            l_g: 0.0,
            l_d: 0.0,
            r_g: 0.0,
            r_d: 0.0,
            u_g: iter as u64 + 1,
            u_d: 0,
            sliced_w: w,
        }
    }

    #[test]
    fn unreached_thresholds_render_as_star() {
        let records = vec![
            rec(0, None),
            rec(1, Some(0.6)),
            rec(2, None),
            rec(3, Some(0.4)),
        ];
        let row = SummaryRow::from_records("a", 3, &records, &DEFAULT_THRESHOLDS);
        assert_eq!(row.first, vec![Some(3), None, None]);
        assert_eq!(row.csv_row(), format!("a,3,3,*,*,{},3,4,0", fmt_f64(0.4)));
    }

    #[test]
    fn no_evaluations_at_all() {
        let row = SummaryRow::from_records("b", 1, &[rec(0, None)], &[0.5]);
        assert_eq!(row.csv_row(), "b,1,*,*,*,1,0");
    }

    #[test]
    fn rows_sorted_by_name_then_seed() {
        let mk = |n: &str, s| SummaryRow::from_records(n, s, &[rec(0, Some(1.0))], &[0.5]);
        let csv = to_csv(&[mk("b", 1), mk("a", 2), mk("a", 1)], &[0.5]);
        let keys: Vec<&str> = csv.lines().skip(1).map(|l| &l[..3]).collect();
        assert_eq!(keys, ["a,1", "a,2", "b,1"]);
        assert_eq!(
            csv.lines().next().unwrap(),
            "name,seed,first_iter_at_0.5,best_sliced_w,best_iter,u_g,u_d"
        );
    }
}
