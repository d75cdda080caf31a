//! Exit criteria. Runs as a plain binary: one PASS/FAIL line per
//! criterion, nonzero exit if any fails.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use foqus_core::config::{load_config, ArchKind, ExperimentConfig, ModelConfig};
use foqus_core::dynamics::{TrajectoryMeta, TrajectoryRecord, TrajectoryStore};
use foqus_core::eval::{
    cell_coreset, cell_seed, render_report, run_ablation, run_experiment, train_and_eval, untrained_accuracy,
    Experiment,
};
use foqus_core::nn::{finite_diff_check, small_cnn1d, small_mlp, ModelSpec};
use foqus_core::scoring::{foqus_score, quality_score, score_dataset, transition_scores, ComponentMask, ScoreTable};
use foqus_core::selection::{select, tier_sizes, rank_by_score, Method, SelectionConfig, EQUAL_TIERS};
use rand::Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// ---- scoring ----

fn score_oracle() -> Outcome {
    let start = Instant::now();
    for seed in 0..20 {
        let store = common::random_store(1000 + seed, 500, 25, 6, &[18], 4);
        let table = score_dataset(&store, None).map_err(|e| e.to_string())?;
        check(table.rows.len() == 500, "row count")?;
        for (row, r) in table.rows.iter().zip(&store.records) {
            let t = r.correctness.len();
            let mut forget = 0usize;
            let mut persist = 0usize;
            for k in 1..t {
                match (r.correctness[k - 1], r.correctness[k]) {
                    (true, false) => forget += 1,
                    (false, false) => persist += 1,
                    _ => {}
                }
            }
            let mut accum = 0.0f64;
            for &l in &r.losses {
                accum += l;
            }
            let count = r.correctness.iter().filter(|&&b| b).count();
            let tf = t as f64;
            let quality = count as f64 / tf - 0.1 * accum / tf;
            let total = forget as f64 / (tf - 1.0) + persist as f64 / (tf - 1.0) + quality;
            let same = row.sample_id == r.sample_id
                && row.s_forget == forget
                && row.s_persist == persist
                && row.l_count == count
                && row.l_accum.to_bits() == accum.to_bits()
                && row.s_quality.to_bits() == quality.to_bits()
                && row.s_foqus.to_bits() == total.to_bits();
            check(same, format!("store {seed}, sample {} differs from recomputation", r.sample_id))?;
        }
    }
    let el = start.elapsed();
    check(el < Duration::from_secs(10), format!("took {}", secs(el)))?;
    Ok(format!("20 stores x 500 rows x T=25 bit-exact in {}", secs(el)))
}

fn transition_fuzz() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(2024);
    for case in 0..10_000 {
        let t = rng.random_range(2..=100);
        let bits: Vec<bool> = (0..t).map(|_| rng.random()).collect();
        let (f, p) = transition_scores(&bits).map_err(|e| e.to_string())?;
        let ones = bits.iter().filter(|&&b| b).count();
        let mut nf = 0;
        let mut np = 0;
        for k in 0..t - 1 {
            if bits[k] && !bits[k + 1] {
                nf += 1;
            }
            if !bits[k] && !bits[k + 1] {
                np += 1;
            }
        }
        check(f + p <= t - 1, format!("case {case}: {f} + {p} > T-1"))?;
        check(f <= ones, format!("case {case}: forget {f} > ones {ones}"))?;
        check((f, p) == (nf, np), format!("case {case}: naive scan disagrees"))?;
    }
    let el = start.elapsed();
    check(el < Duration::from_secs(5), format!("took {}", secs(el)))?;
    Ok(format!("10^4 bit strings, T in [2,100], in {}", secs(el)))
}

fn hand_vector() -> Outcome {
    let bits = [false, false, true, false, false];
    let losses = [2.0, 1.5, 0.5, 1.2, 1.8];
    let (f, p) = transition_scores(&bits).map_err(|e| e.to_string())?;
    let q = quality_score(&losses, &bits, 0.1).map_err(|e| e.to_string())?;
    let s = foqus_score(f, p, q.s_quality, 5).map_err(|e| e.to_string())?;
    let got = (f, p, q.l_accum, q.l_count, q.s_quality, s);
    let ok = f == 1
        && p == 2
        && (q.l_accum - 7.0).abs() <= 1e-12
        && q.l_count == 1
        && (q.s_quality - 0.06).abs() <= 1e-12
        && (s - 0.81).abs() <= 1e-12;
    check(ok, format!("got {got:?}"))?;
    Ok(format!("{got:?}"))
}

// ---- nn ----

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut worst = Vec::new();
    for (name, spec) in [("mlp", small_mlp()), ("cnn1d", small_cnn1d())] {
        let mut max: f64 = 0.0;
        for seed in 0..3 {
            max = max.max(finite_diff_check(&spec, seed).map_err(|e| e.to_string())?);
        }
        check(max < 1e-3, format!("{name}: max relative error {max:e}"))?;
        worst.push(format!("{name} {max:.2e}"));
    }
    let el = start.elapsed();
    check(el < Duration::from_secs(30), format!("took {}", secs(el)))?;
    Ok(format!("max relative error {} in {}", worst.join(", "), secs(el)))
}

// ---- selection ----

fn fuzz_table(rng: &mut impl Rng, case: u64) -> (TrajectoryStore, ScoreTable, f64) {
    let classes = rng.random_range(1..=6);
    let n = rng.random_range(classes * 4..=300);
    let t = rng.random_range(2..=30);
    let snrs: &[i32] = if rng.random() { &[18] } else { &[0, 10, 18] };
    let store = common::random_store(case, n, t, classes, snrs, 3);
    let table = score_dataset(&store, None).unwrap();
    let lo = classes as f64 / n as f64;
    let rate = rng.random_range(lo..=1.0);
    (store, table, rate)
}

fn selection_invariants() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(77);
    let mut stochastic_pairs = 0usize;
    let mut stochastic_differ = 0usize;
    let cases = 200;
    for case in 0..cases {
        let (store, table, rate) = fuzz_table(&mut rng, 5000 + case);
        let n = table.rows.len();
        let labels: BTreeMap<u64, usize> = table.rows.iter().map(|r| (r.sample_id, r.label)).collect();
        let class_sizes = {
            let mut m = BTreeMap::new();
            for r in &table.rows {
                *m.entry(r.label).or_insert(0usize) += 1;
            }
            m
        };
        let budget = (rate * n as f64).round() as usize;
        for m in Method::ALL {
            let seed = rng.random::<u64>();
            let cfg = SelectionConfig {
                tiers: if m == Method::Foqus { random_tiers(&mut rng) } else { EQUAL_TIERS },
                ..SelectionConfig::new(m, rate, seed)
            };
            let c = match select(&table, Some(&store), &cfg) {
                Ok(c) => c,
                // A class smaller than its equal share is a legitimate rejection.
                Err(foqus_core::Error::InsufficientSamples { .. }) => {
                    let share = budget.div_ceil(class_sizes.len());
                    check(
                        class_sizes.values().any(|&s| s < share),
                        format!("case {case} {m}: spurious insufficient-samples error"),
                    )?;
                    continue;
                }
                Err(e) => return Err(format!("case {case} {m}: {e}")),
            };
            check(c.len() == budget, format!("case {case} {m}: {} selected, budget {budget}", c.len()))?;
            let uniq: HashSet<u64> = c.indices.iter().copied().collect();
            check(uniq.len() == c.len(), format!("case {case} {m}: duplicate ids"))?;
            check(c.indices.iter().all(|id| labels.contains_key(id)), format!("case {case} {m}: foreign id"))?;
            let mut per: BTreeMap<usize, usize> = class_sizes.keys().map(|&k| (k, 0)).collect();
            for id in &c.indices {
                *per.get_mut(&labels[id]).unwrap() += 1;
            }
            let (lo, hi) = (per.values().min().unwrap(), per.values().max().unwrap());
            check(hi - lo <= 1, format!("case {case} {m}: class counts {per:?}"))?;
            let again = select(&table, Some(&store), &cfg).unwrap();
            check(again == c, format!("case {case} {m}: not deterministic"))?;
            if m.is_stochastic() && budget < n {
                let other = select(&table, Some(&store), &SelectionConfig { seed: seed ^ 1, ..cfg.clone() }).unwrap();
                stochastic_pairs += 1;
                if other.indices != c.indices {
                    stochastic_differ += 1;
                }
            }
            if m == Method::Foqus {
                tier_partition(&table, &c, case)?;
                let mut shifted = table.clone();
                for r in &mut shifted.rows {
                    r.s_foqus = 2.0 * r.s_foqus + 7.0;
                }
                let moved = select(&shifted, None, &cfg).unwrap();
                check(moved.indices == c.indices, format!("case {case}: not rank invariant"))?;
            }
        }
    }
    // Different seeds almost always give different coresets.
    let frac = stochastic_differ as f64 / stochastic_pairs.max(1) as f64;
    check(frac >= 0.9, format!("only {stochastic_differ}/{stochastic_pairs} seed pairs differ"))?;
    let el = start.elapsed();
    check(el < Duration::from_secs(60), format!("took {}", secs(el)))?;
    Ok(format!(
        "{cases} fuzzed tables x 9 selectors; {stochastic_differ}/{stochastic_pairs} reseeded draws differ; {}",
        secs(el)
    ))
}

fn random_tiers(rng: &mut impl Rng) -> [f64; 3] {
    let a: f64 = rng.random();
    let b: f64 = rng.random::<f64>() * (1.0 - a);
    [a, b, 1.0 - a - b]
}

/// Tiers are contiguous rank ranges of near-equal size covering each group,
/// and the per-tier draws recorded in the manifest match the coreset.
fn tier_partition(table: &ScoreTable, c: &foqus_core::selection::Coreset, case: u64) -> Result<(), String> {
    let chosen: HashSet<u64> = c.indices.iter().copied().collect();
    for d in &c.manifest.tier_draws {
        let members: Vec<usize> = (0..table.rows.len())
            .filter(|&k| Some(table.rows[k].label) == d.label && (d.snr_db.is_none() || Some(table.rows[k].snr_db) == d.snr_db))
            .collect();
        let sizes = tier_sizes(members.len());
        check(sizes == d.tier_sizes, format!("case {case}: tier sizes {:?} vs {sizes:?}", d.tier_sizes))?;
        check(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1, "uneven tiers")?;
        check(sizes.iter().sum::<usize>() == members.len(), "tiers do not cover the group")?;
        let ranked = rank_by_score(&table.rows, &members);
        let mut start = 0;
        for i in 0..3 {
            let tier = &ranked[start..start + sizes[i]];
            if let (Some(&last), Some(&next)) = (tier.last(), ranked.get(start + sizes[i])) {
                check(table.rows[last].s_foqus >= table.rows[next].s_foqus, "tiers not in rank order")?;
            }
            let got = tier.iter().filter(|&&k| chosen.contains(&table.rows[k].sample_id)).count();
            check(got == d.draws[i], format!("case {case}: tier {i} holds {got}, manifest says {}", d.draws[i]))?;
            start += sizes[i];
        }
    }
    Ok(())
}

fn geometry_store(points: &[f64]) -> TrajectoryStore {
    TrajectoryStore {
        meta: TrajectoryMeta {
            version: 1,
            epochs: 2,
            num_classes: 1,
            embedding_dim: 1,
            model_digest: String::new(),
            config_digest: String::new(),
            dataset_digest: String::new(),
        },
        records: points
            .iter()
            .enumerate()
            .map(|(k, &x)| TrajectoryRecord {
                sample_id: k as u64,
                label: 0,
                snr_db: 18,
                correctness: vec![true, true],
                losses: vec![0.1, 0.1],
                final_probs: vec![1.0],
                final_embedding: vec![x],
                epoch_probs: None,
            })
            .collect(),
    }
}

fn geometry() -> Outcome {
    let pick = |points: &[f64], m: Method, budget: usize| -> Result<Vec<f64>, String> {
        let store = geometry_store(points);
        let table = score_dataset(&store, None).map_err(|e| e.to_string())?;
        let rate = budget as f64 / points.len() as f64;
        let c = select(&table, Some(&store), &SelectionConfig::new(m, rate, 0)).map_err(|e| e.to_string())?;
        Ok(c.indices.iter().map(|&i| points[i as usize]).collect())
    };
    let kc = pick(&[0.0, 1.0, 10.0], Method::Kcenter, 2)?;
    check(kc == vec![1.0, 10.0], format!("kcenter picked {kc:?}"))?;
    let hd = pick(&[-1.0, 0.0, 1.0], Method::Herding, 1)?;
    check(hd == vec![0.0], format!("herding picked {hd:?}"))?;
    Ok(format!("kcenter {{0,1,10}} -> {kc:?}; herding {{-1,0,1}} -> {hd:?}"))
}

// ---- default experiment ----

struct DefaultRun {
    cfg: ExperimentConfig,
    first: Experiment,
    second_csv: String,
    elapsed: Duration,
}

fn default_run() -> &'static DefaultRun {
    static RUN: OnceLock<DefaultRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let cfg = load_config("default").expect("shipped config");
        let start = Instant::now();
        let first = run_experiment(&cfg).expect("default experiment");
        let elapsed = start.elapsed();
        let second_csv = run_experiment(&cfg).expect("default experiment").table.to_csv();
        DefaultRun {
            cfg,
            first,
            second_csv,
            elapsed,
        }
    })
}

fn determinism() -> Outcome {
    let run = default_run();
    let csv = run.first.table.to_csv();
    check(csv == run.second_csv, "two runs produced different CSV bytes")?;
    let cells = run.first.table.cells.len();
    check(cells == 9 * 5 * 3, format!("{cells} cells"))?;
    check(run.elapsed < Duration::from_secs(15 * 60), format!("took {}", secs(run.elapsed)))?;
    Ok(format!(
        "{cells} cells, identical CSV bytes ({} bytes), one run {} on {} thread(s)",
        csv.len(),
        secs(run.elapsed),
        rayon::current_num_threads()
    ))
}

fn learning_sanity() -> Outcome {
    let cfg = load_config("default").map_err(|e| e.to_string())?;
    let ds = foqus_core::eval::load_dataset(&cfg).map_err(|e| e.to_string())?;
    let ids: Vec<u64> = ds.train().map(|f| f.sample_id).collect();
    let spec = cfg.evaluation_model(ds.frame_len, ds.num_classes()).map_err(|e| e.to_string())?;
    let seed = 0;
    let full = train_and_eval(&ds, &ids, &spec, &cfg.retrain.with_seed(seed)).map_err(|e| e.to_string())?;
    let untrained = untrained_accuracy(&ds, &spec, seed).map_err(|e| e.to_string())?;
    // Not gated: the convolutional reference architecture on the same data.
    let cnn = ModelSpec::cnn1d(ds.frame_len, ds.num_classes());
    let cnn_full = train_and_eval(&ds, &ids, &cnn, &cfg.retrain.with_seed(seed)).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} full-data {:.4} (need >= 0.85), untrained {:.4} (need 1/6 +- 0.05); cnn1d full-data {:.4} [not gated]",
        match ModelConfig::of(ArchKind::Mlp) == cfg.eval_model {
            true => "mlp",
            false => "eval model",
        },
        full.accuracy,
        untrained.accuracy,
        cnn_full.accuracy
    );
    check((untrained.accuracy - 1.0 / 6.0).abs() <= 0.05, detail.clone())?;
    check(full.accuracy >= 0.85, detail.clone())?;
    Ok(detail)
}

fn rate_monotonicity() -> Outcome {
    let run = default_run();
    let t = &run.first.table;
    let mut lines = Vec::new();
    let mut bad = Vec::new();
    for &m in &run.cfg.methods {
        let lo = t.mean(m, 0.01).ok_or("missing 1% cell")?;
        let hi = t.mean(m, 0.30).ok_or("missing 30% cell")?;
        lines.push(format!("{m} {lo:.4}->{hi:.4}"));
        if hi < lo - 0.01 {
            bad.push(format!("{m}: 30% mean {hi:.4} < 1% mean {lo:.4} - 0.01"));
        }
    }
    check(bad.is_empty(), bad.join("; "))?;
    Ok(lines.join(", "))
}

fn comparison_table() -> Outcome {
    let run = default_run();
    let report = render_report(&run.first.table);
    println!("{report}");
    check(report.contains("foqus - uniform"), "no delta row")?;
    check(report.contains("0.5410") && report.contains("0.2907"), "no reference point")?;
    let deltas: Vec<String> = run
        .cfg
        .rates
        .iter()
        .map(|&r| {
            let d = run.first.table.mean(Method::Foqus, r).unwrap() - run.first.table.mean(Method::Uniform, r).unwrap();
            format!("{}%: {d:+.4}", r * 100.0)
        })
        .collect();
    Ok(format!("reported (diagnostic) foqus-uniform {}", deltas.join(", ")))
}

fn ablation_grid() -> Outcome {
    let run = default_run();
    let cfg = &run.cfg;
    let rows = run_ablation(cfg, &run.first.prepared).map_err(|e| e.to_string())?;
    let combos: HashSet<String> = rows.iter().map(|r| r.mask.label()).collect();
    check(combos.len() == 7, format!("{} combinations", combos.len()))?;
    let mut compared = 0;
    for r in rows.iter().filter(|r| r.mask == ComponentMask::ALL) {
        let main = cell_coreset(cfg, &run.first.prepared, Method::Foqus, r.rate, r.repeat).map_err(|e| e.to_string())?;
        check(main.digest() == r.coreset_digest, format!("rate {} repeat {}: coresets differ", r.rate, r.repeat))?;
        check(r.seed == cell_seed(cfg.base_seed, Method::Foqus, r.rate, r.repeat), "seed mismatch")?;
        let cell = run
            .first
            .table
            .cells
            .iter()
            .find(|c| c.method == Method::Foqus && c.rate == r.rate && c.repeat == r.repeat)
            .ok_or("missing main cell")?;
        check(cell.coreset_digest == r.coreset_digest, "grid coreset differs")?;
        compared += 1;
    }
    Ok(format!("7 combinations, {} runs; all-three coreset identical to main in {compared}/{compared}", rows.len()))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 11] = [
        ("AC1", "score oracle equivalence", score_oracle),
        ("AC2", "transition-score fuzz", transition_fuzz),
        ("AC3", "hand-traced vector", hand_vector),
        ("AC4", "gradient correctness", gradients),
        ("AC5", "selection invariants", selection_invariants),
        ("AC6", "geometry oracles", geometry),
        ("AC7", "end-to-end determinism", determinism),
        ("AC8", "learning sanity", learning_sanity),
        ("AC9", "rate monotonicity", rate_monotonicity),
        ("AC10", "comparison table (diagnostic)", comparison_table),
        ("AC11", "ablation grid integrity", ablation_grid),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    for (id, name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| id == p || name.contains(p.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("{id} PASS {name}: {detail}"),
            Err(why) => {
                println!("{id} FAIL {name}: {why}");
                failed.push(id);
            }
        }
    }
    if !failed.is_empty() {
        println!("acceptance: {} failing ({})", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
    println!("acceptance: all criteria pass");
}
