use std::path::PathBuf;

use foqus_core::config::*;
use foqus_core::dataset::ModulationClass;
use foqus_core::selection::Method;
use proptest::prelude::*;

fn model() -> impl Strategy<Value = ModelConfig> {
    prop_oneof![
        (prop::option::of(1usize..256), prop::option::of(1usize..128)).prop_map(|(hidden, e)| ModelConfig {
            hidden,
            embedding_dim: e,
            ..ModelConfig::of(ArchKind::Mlp)
        }),
        (
            prop::option::of([1usize..32, 1usize..32]),
            prop::option::of(1usize..9),
            prop::option::of(1usize..4),
        )
            .prop_map(|(channels, kernel, stride)| ModelConfig {
                channels,
                kernel,
                stride,
                ..ModelConfig::of(ArchKind::Cnn1d)
            }),
    ]
}

fn train() -> impl Strategy<Value = TrainSection> {
    (2usize..100, 1usize..256, 0.0f64..1.0, 0.0f64..0.99, any::<bool>()).prop_map(|(epochs, batch_size, lr, m, shuffle)| {
        TrainSection {
            epochs,
            batch_size,
            learning_rate: lr,
            momentum: m,
            shuffle,
        }
    })
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        prop::sample::subsequence(Method::ALL.to_vec(), 1..=9),
        prop::collection::vec(1e-6f64..=1.0, 1..6),
        1usize..5,
        0u64..i64::MAX as u64,
        0.0f64..3.0,
        (0.0f64..1.0, 0.0f64..1.0),
        (any::<bool>(), any::<bool>()),
        prop::option::of("[a-z]{1,8}\\.jsonl"),
        prop::sample::subsequence(ModulationClass::ALL.to_vec(), 1..=6),
        (model(), model(), train(), train()),
    )
        .prop_map(
            |(methods, rates, repeats, base_seed, beta, (a, b), (cb, ss), path, classes, (sm, em, rec, ret))| {
                let mut cfg = ExperimentConfig {
                    dataset_path: path.map(PathBuf::from),
                    methods,
                    rates,
                    repeats,
                    base_seed,
                    beta,
                    class_balanced: cb,
                    snr_stratified: ss,
                    select_model: sm,
                    eval_model: em,
                    record: rec,
                    retrain: ret,
                    ..ExperimentConfig::default()
                };
                let p1 = a * (1.0 - b);
                let p2 = (1.0 - a) * (1.0 - b);
                cfg.tiers = [p1, p2, 1.0 - p1 - p2];
                cfg.dataset.classes = classes;
                cfg
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn toml_round_trip(cfg in config()) {
        prop_assume!(cfg.validate().is_ok());
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn relative_dataset_path_follows_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    std::fs::write(&path, "dataset_path = \"data.jsonl\"\nrepeats = 1\n").unwrap();
    let cfg = load_config(path.to_str().unwrap()).unwrap();
    assert_eq!(cfg.dataset_path, Some(dir.path().join("data.jsonl")));
    assert_eq!(cfg.repeats, 1);
}

#[test]
fn shipped_config_matches_documented_grid() {
    let cfg = load_config("default").unwrap();
    assert_eq!(cfg.methods, Method::ALL.to_vec());
    assert_eq!(cfg.repeats, 3);
    assert_eq!(cfg.dataset.snr_grid_db, vec![18]);
    assert_eq!(cfg.select_model.kind, ArchKind::Mlp);
    assert_eq!(cfg.eval_model.kind, ArchKind::Mlp);
}
