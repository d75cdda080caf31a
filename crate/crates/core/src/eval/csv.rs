use std::collections::BTreeMap;
use std::fmt::Write;

use super::{mean_std, AblationRow, CellResult, ResultTable};
use crate::error::{Error, Result};
use crate::selection::Method;

pub const CELL_HEADER: &str = "method,rate,seed,accuracy";
pub const SUMMARY_HEADER: &str = "method,rate,mean,std,n";
pub const CLASS_HEADER: &str = "method,rate,seed,class,accuracy";

/// Three sections separated by blank lines: per-seed accuracies, per-cell
/// summaries, per-class accuracies.
pub(super) fn results_csv(table: &ResultTable) -> String {
    let mut s = String::new();
    s.push_str(CELL_HEADER);
    s.push('\n');
    for c in &table.cells {
        let _ = writeln!(s, "{},{},{},{}", c.method, c.rate, c.seed, c.accuracy);
    }
    s.push('\n');
    s.push_str(SUMMARY_HEADER);
    s.push('\n');
    for r in table.summary() {
        let _ = writeln!(s, "{},{},{},{},{}", r.method, r.rate, r.mean, r.std, r.n);
    }
    s.push('\n');
    s.push_str(CLASS_HEADER);
    s.push('\n');
    for c in &table.cells {
        for (name, acc) in table.class_names.iter().zip(&c.per_class) {
            let _ = writeln!(s, "{},{},{},{},{}", c.method, c.rate, c.seed, name, acc);
        }
    }
    s
}

fn field<T: std::str::FromStr>(origin: &str, line: usize, raw: &str, what: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        path: origin.to_string(),
        line,
        msg: format!("bad {what} `{raw}`"),
    })
}

/// Reads the per-seed and per-class sections back. Coreset sizes and
/// digests are not part of the CSV and come back empty; the summary section
/// is checked against the recomputed one.
pub fn parse_results_csv(origin: &str, text: &str) -> Result<ResultTable> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut sections: Vec<Vec<(usize, &str)>> = vec![Vec::new()];
    for (k, line) in text.lines().enumerate() {
        if line.is_empty() {
            sections.push(Vec::new());
        } else {
            sections.last_mut().unwrap().push((k + 1, line));
        }
    }
    sections.retain(|s| !s.is_empty());
    let headers = [CELL_HEADER, SUMMARY_HEADER, CLASS_HEADER];
    if sections.len() != 3 {
        return Err(perr(1, format!("expected 3 sections, found {}", sections.len())));
    }
    for (sec, h) in sections.iter().zip(headers) {
        if sec[0].1 != h {
            return Err(perr(sec[0].0, format!("expected header `{h}`")));
        }
    }

    let mut cells = Vec::new();
    let mut repeats: BTreeMap<(Method, u64), usize> = BTreeMap::new();
    let mut by_seed: BTreeMap<(Method, u64, u64), usize> = BTreeMap::new();
    for &(line, row) in &sections[0][1..] {
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 4 {
            return Err(perr(line, format!("expected 4 fields, found {}", f.len())));
        }
        let method: Method = f[0].parse().map_err(|e: Error| perr(line, e.to_string()))?;
        let rate: f64 = field(origin, line, f[1], "rate")?;
        let seed: u64 = field(origin, line, f[2], "seed")?;
        let accuracy: f64 = field(origin, line, f[3], "accuracy")?;
        if !(0.0..=1.0).contains(&accuracy) {
            return Err(perr(line, format!("accuracy {accuracy} outside [0,1]")));
        }
        let r = repeats.entry((method, rate.to_bits())).or_default();
        if by_seed.insert((method, rate.to_bits(), seed), cells.len()).is_some() {
            return Err(perr(line, "duplicate (method, rate, seed)".into()));
        }
        cells.push(CellResult {
            method,
            rate,
            repeat: *r,
            seed,
            accuracy,
            per_class: Vec::new(),
            coreset_size: 0,
            coreset_digest: String::new(),
        });
        *r += 1;
    }

    let mut class_names: Vec<String> = Vec::new();
    for &(line, row) in &sections[2][1..] {
        let f: Vec<&str> = row.split(',').collect();
        if f.len() != 5 {
            return Err(perr(line, format!("expected 5 fields, found {}", f.len())));
        }
        let method: Method = f[0].parse().map_err(|e: Error| perr(line, e.to_string()))?;
        let rate: f64 = field(origin, line, f[1], "rate")?;
        let seed: u64 = field(origin, line, f[2], "seed")?;
        let acc: f64 = field(origin, line, f[4], "accuracy")?;
        let &k = by_seed
            .get(&(method, rate.to_bits(), seed))
            .ok_or_else(|| perr(line, "per-class row for an unknown cell".into()))?;
        let cell = &mut cells[k];
        let idx = cell.per_class.len();
        match class_names.get(idx) {
            Some(name) if name != f[3] => {
                return Err(perr(line, format!("expected class `{name}`, found `{}`", f[3])));
            }
            None => class_names.push(f[3].to_string()),
            _ => {}
        }
        cell.per_class.push(acc);
    }

    let table = ResultTable { class_names, cells };
    let summary = table.summary();
    if summary.len() != sections[1].len() - 1 {
        return Err(perr(sections[1][0].0, "summary rows do not match the per-seed section".into()));
    }
    for (&(line, row), s) in sections[1][1..].iter().zip(&summary) {
        let expect = format!("{},{},{},{},{}", s.method, s.rate, s.mean, s.std, s.n);
        if row != expect {
            return Err(perr(line, format!("summary row disagrees with per-seed values (expected `{expect}`)")));
        }
    }
    Ok(table)
}

/// Per-run rows, then per-(components, rate) means.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("components,rate,seed,coreset_digest,accuracy\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.mask.label(), r.rate, r.seed, r.coreset_digest, r.accuracy);
    }
    s.push_str("\ncomponents,rate,mean,std,n\n");
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut acc: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.mask.label(), r.rate.to_bits());
        acc.entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.accuracy);
    }
    for key in order {
        let v = &acc[&key];
        let (mean, std) = mean_std(v);
        let _ = writeln!(s, "{},{},{},{},{}", key.0, f64::from_bits(key.1), mean, std, v.len());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ResultTable {
        let cell = |method, rate, repeat, seed, accuracy: f64| CellResult {
            method,
            rate,
            repeat,
            seed,
            accuracy,
            per_class: vec![accuracy, 1.0 - accuracy],
            coreset_size: 0,
            coreset_digest: String::new(),
        };
        ResultTable {
            class_names: vec!["BPSK".into(), "QPSK".into()],
            cells: vec![
                cell(Method::Foqus, 0.01, 0, 11, 0.5),
                cell(Method::Foqus, 0.01, 1, 12, 0.75),
                cell(Method::Uniform, 0.01, 0, 13, 0.25),
                cell(Method::Uniform, 0.01, 1, 14, 0.125),
            ],
        }
    }

    #[test]
    fn layout() {
        let csv = table().to_csv();
        let expected = "method,rate,seed,accuracy\n\
foqus,0.01,11,0.5\nfoqus,0.01,12,0.75\nuniform,0.01,13,0.25\nuniform,0.01,14,0.125\n\n\
method,rate,mean,std,n\n\
foqus,0.01,0.625,0.1767766952966369,2\nuniform,0.01,0.1875,0.08838834764831845,2\n\n\
method,rate,seed,class,accuracy\n\
foqus,0.01,11,BPSK,0.5\nfoqus,0.01,11,QPSK,0.5\nfoqus,0.01,12,BPSK,0.75\nfoqus,0.01,12,QPSK,0.25\n\
uniform,0.01,13,BPSK,0.25\nuniform,0.01,13,QPSK,0.75\nuniform,0.01,14,BPSK,0.125\nuniform,0.01,14,QPSK,0.875\n";
        assert_eq!(csv, expected);
    }

    #[test]
    fn round_trip() {
        let t = table();
        assert_eq!(parse_results_csv("r.csv", &t.to_csv()).unwrap(), t);
    }

    #[test]
    fn tampered_summary_rejected() {
        let csv = table().to_csv().replace("0.625", "0.7");
        let err = parse_results_csv("r.csv", &csv).unwrap_err();
        assert!(err.to_string().starts_with("r.csv:8:"), "{err}");
    }
}
