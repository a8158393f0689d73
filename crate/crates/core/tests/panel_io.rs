use stockcast_core::{
    chronological_split, lag_align, load_panel, synth_generate, SynthConfig, VariableCatalog, PAPER_SEVEN,
};

#[test]
fn synthetic_panel_survives_csv_round_trip() {
    let catalog = VariableCatalog::default();
    let config = SynthConfig { seed: 12, n_companies: 6, n_months: 10, ..Default::default() };
    let panel = synth_generate(&config, &catalog).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    panel.write_csv(&path).unwrap();
    let loaded = load_panel(&path, &catalog).unwrap();
    assert_eq!(loaded, panel);
    assert_eq!(loaded.dropped_rows(), 0);
}

#[test]
fn lagged_set_and_split_sizes() {
    let catalog = VariableCatalog::default();
    let config = SynthConfig { seed: 1, n_companies: 5, n_months: 12, ..Default::default() };
    let panel = synth_generate(&config, &catalog).unwrap();
    assert_eq!(panel.len(), 60);
    let set = lag_align(&panel, &PAPER_SEVEN).unwrap();
    assert_eq!(set.len(), 5 * 11);
    assert_eq!(set.n_features(), 7);

    let (train, test) = chronological_split(&set, 0.2).unwrap();
    assert_eq!(test.len(), 11);
    assert_eq!(train.len() + test.len(), set.len());
    let last_train = train.rows.iter().map(|r| r.month).max().unwrap();
    let first_test = test.rows.iter().map(|r| r.month).min().unwrap();
    assert!(last_train <= first_test);
}

#[test]
fn different_seeds_give_different_panels() {
    let catalog = VariableCatalog::default();
    let a = synth_generate(&SynthConfig { seed: 1, n_companies: 2, n_months: 4, ..Default::default() }, &catalog);
    let b = synth_generate(&SynthConfig { seed: 2, n_companies: 2, n_months: 4, ..Default::default() }, &catalog);
    assert_ne!(a.unwrap(), b.unwrap());
}
