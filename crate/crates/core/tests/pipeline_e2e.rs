use ferbench::pipeline::{run_all, run_stage, synthetic_run, RunPaths, Selection, Stage};

#[test]
fn synthetic_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = synthetic_run(tmp.path(), 11).unwrap();
    cfg.jobs = 4;
    run_all(&cfg, &Selection::default()).unwrap();
    let paths = RunPaths::new(&cfg.output_root);
    let table = std::fs::read_to_string(paths.report().join("local_global_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    let results = std::fs::read_to_string(paths.root.join("results/results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 3 * 2 * 3);
    for fig in ["image_counts", "user_counts", "paired_similarity_heatmap", "local_global_tiny"] {
        assert!(paths.report().join("figures").join(format!("{fig}.csv")).exists(), "{fig}");
    }

    // Rerunning a stage and rebuilding a deleted stage give identical bytes.
    let metrics = paths.metrics().join("local_global.csv");
    let before = std::fs::read(&metrics).unwrap();
    run_stage(Stage::Metrics, &cfg, &Selection::default()).unwrap();
    assert_eq!(std::fs::read(&metrics).unwrap(), before);
    let stats = paths.stats().join("class_distribution.csv");
    let before = std::fs::read(&stats).unwrap();
    std::fs::remove_dir_all(paths.stats()).unwrap();
    run_stage(Stage::Stats, &cfg, &Selection::default()).unwrap();
    assert_eq!(std::fs::read(&stats).unwrap(), before);
}

#[test]
fn stage_without_inputs_names_the_missing_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synthetic_run(tmp.path(), 1).unwrap();
    let err = run_stage(Stage::Annotate, &cfg, &Selection::default()).unwrap_err();
    assert!(err.to_string().contains("unify-classes"), "{err}");
}

#[test]
fn dry_run_lists_training_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synthetic_run(tmp.path(), 1).unwrap();
    let sel = Selection {
        datasets: vec!["GlyphClean".into()],
        dry_run: true,
        ..Default::default()
    };
    let out = run_stage(Stage::Train, &cfg, &sel).unwrap();
    assert_eq!(out.planned, vec!["train tiny on GlyphClean fold 0", "train tiny on GlyphClean fold 1"]);
    assert!(!cfg.output_root.join("models").exists());
}

#[test]
fn unknown_dataset_filter_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synthetic_run(tmp.path(), 1).unwrap();
    let sel = Selection {
        datasets: vec!["Nope".into()],
        ..Default::default()
    };
    assert!(run_stage(Stage::Ingest, &cfg, &sel).is_err());
}
