use demograph_core::experiment::{run_sensitivity, ExperimentGrid, SensitivityInput};
use demograph_core::labelprop::Strategy;
use demograph_core::synth::{generate, PlantedGraphSpec};

fn within_sigmas(count: usize, trials: f64, p: f64, sigmas: f64) -> bool {
    let sd = (trials * p * (1.0 - p)).sqrt();
    (count as f64 - trials * p).abs() <= sigmas * sd
}

#[test]
fn edge_counts_follow_the_planted_rates() {
    for (seed, p, q) in [(1, 0.05, 0.005), (2, 0.02, 0.01), (3, 0.1, 0.1)] {
        let spec = PlantedGraphSpec { per_class: 300, classes: 3, p, q, rng_seed: seed, ..PlantedGraphSpec::default() };
        let data = generate(&spec).unwrap();
        let n = spec.node_count() as f64;
        let intra_pairs = 3.0 * 300.0 * 299.0 / 2.0;
        let inter_pairs = n * (n - 1.0) / 2.0 - intra_pairs;
        let intra = data.edges.iter().filter(|&&(u, v)| data.truth[u] == data.truth[v]).count();
        let inter = data.edges.len() - intra;
        assert!(within_sigmas(intra, intra_pairs, p, 4.0), "seed {seed}: intra {intra}");
        assert!(within_sigmas(inter, inter_pairs, q, 4.0), "seed {seed}: inter {inter}");
        assert_eq!(data.seeds.len(), (0.2 * n).round() as usize);
    }
}

#[test]
fn seeds_cover_classes_evenly() {
    let data = generate(&PlantedGraphSpec { per_class: 1000, p: 0.0, q: 0.0, ..PlantedGraphSpec::default() }).unwrap();
    let ones = data.seeds.iter().filter(|&&i| data.truth[i] == 1).count();
    // Hypergeometric draw of 400 from 2000; binomial sd bounds it from above.
    assert!(within_sigmas(ones, data.seeds.len() as f64, 0.5, 4.0), "{ones}");
}

#[test]
fn propagation_recovers_planted_classes() {
    let data = generate(&PlantedGraphSpec { per_class: 1000, ..PlantedGraphSpec::default() }).unwrap();
    let input = SensitivityInput::from_synth(&data);
    let grid = ExperimentGrid {
        strategies: vec![Strategy::Alpha(0.3)],
        iterations: vec![3],
        repetitions: 1,
        rng_seed: 1,
        workers: 0,
    };
    let report = run_sensitivity(&input, &grid).unwrap();
    let auc = report.mean_auc(Strategy::Alpha(0.3), 3).unwrap();
    assert!(auc >= 0.9, "auc {auc}");
}

#[test]
fn written_files_round_trip_through_the_readers() {
    let data = generate(&PlantedGraphSpec { per_class: 50, p: 0.2, q: 0.02, ..PlantedGraphSpec::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    data.write(dir.path()).unwrap();
    let block = demograph_core::model::FeatureBlock::read_csv(dir.path().join("cumf.csv")).unwrap();
    assert_eq!(block, data.feature_block(&block.name));
    let edges = std::fs::read_to_string(dir.path().join("edges.tsv")).unwrap();
    assert_eq!(edges.lines().count(), 2 * data.edges.len());
}
