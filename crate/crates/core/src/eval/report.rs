use std::collections::BTreeMap;
use std::fmt::Write;

use super::ResultTable;
use crate::selection::Method;

/// Published reference point: accuracy of the tiered method and of uniform
/// sampling at a 1% rate (RML2016.10a, CNN1D).
pub const REFERENCE_POINT: (f64, f64, f64) = (0.01, 0.5410, 0.2907);

fn pct(rate: f64) -> String {
    format!("{}%", (rate * 1000.0).round() / 10.0)
}

/// Mean +- std per method and rate, the foqus-minus-uniform delta per rate,
/// and the published reference point for comparison.
pub fn render_report(table: &ResultTable) -> String {
    let summary = table.summary();
    let mut rates: Vec<f64> = summary.iter().map(|r| r.rate).collect();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    let mut methods: Vec<Method> = Vec::new();
    for r in &summary {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    let cell: BTreeMap<(Method, u64), (f64, f64, usize)> = summary
        .iter()
        .map(|r| ((r.method, r.rate.to_bits()), (r.mean, r.std, r.n)))
        .collect();

    let mut s = String::new();
    let _ = write!(s, "{:<18}", "method");
    for &r in &rates {
        let _ = write!(s, "{:>17}", pct(r));
    }
    s.push('\n');
    for &m in &methods {
        let _ = write!(s, "{:<18}", m.name());
        for &r in &rates {
            match cell.get(&(m, r.to_bits())) {
                Some((mean, std, _)) => {
                    let _ = write!(s, "{:>17}", format!("{mean:.4} ± {std:.4}"));
                }
                None => {
                    let _ = write!(s, "{:>17}", "-");
                }
            }
        }
        s.push('\n');
    }

    let delta = |r: f64| {
        let f = cell.get(&(Method::Foqus, r.to_bits()))?;
        let u = cell.get(&(Method::Uniform, r.to_bits()))?;
        Some(f.0 - u.0)
    };
    if rates.iter().any(|&r| delta(r).is_some()) {
        s.push('\n');
        let _ = write!(s, "{:<18}", "foqus - uniform");
        for &r in &rates {
            let d = delta(r).map_or("-".to_string(), |d| format!("{d:+.4}"));
            let _ = write!(s, "{d:>17}");
        }
        s.push('\n');
        let best = rates
            .iter()
            .filter_map(|&r| delta(r).map(|d| (r, d)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((r, d)) = best {
            let _ = writeln!(s, "largest gain over uniform here: {d:+.4} at {}", pct(r));
        }
    }
    let (r, f, u) = REFERENCE_POINT;
    let _ = writeln!(
        s,
        "published reference (RML2016.10a, CNN1D, {}): foqus {f:.4} vs uniform {u:.4} ({:+.4}); \
         the published gain is largest at the lowest rate. Small synthetic runs are not expected \
         to match these magnitudes.",
        pct(r),
        f - u
    );
    s
}
