use std::path::Path;

use pmlp::bench::{
    aggregate, emit_plot_data, emit_tables, load_model, run_campaign, save_model, write_outputs,
    AggregateReport, ExperimentConfig, Model, RatioPoint, RunRecord, SeriesSource, SeriesSummary,
    TableFormat, TableRow, Variant,
};
use pmlp::metrics::box_stats;
use pmlp::optim::{initialize, Termination};
use pmlp::prune::{two_stage_train, TwoStageConfig};
use pmlp::series::{embed_lags, split, synth_series, Scaler, Scaling, SeriesKind, SplitSpec};
use pmlp::{ConnectionMask, Error, Network, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn one_series(kind: SeriesKind, n_runs: usize) -> ExperimentConfig {
    ExperimentConfig {
        n_runs,
        series: vec![SeriesSource::synthetic(kind, 1)],
        ..Default::default()
    }
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn single_series_single_run() {
    let campaign = run_campaign(&one_series(SeriesKind::Temperature, 1)).unwrap();
    assert_eq!(campaign.records.len(), 2);
    assert_eq!(campaign.records[0].variant, Variant::Mlp);
    assert_eq!(campaign.records[1].variant, Variant::Pmlp);

    let dir = tempfile::tempdir().unwrap();
    emit_tables(&campaign.report, TableFormat::AlignedText, dir.path()).unwrap();
    assert_eq!(read(dir.path(), "minima_table.txt").lines().count(), 2);
    assert_eq!(read(dir.path(), "means_table.txt").lines().count(), 2);

    emit_plot_data(&campaign.report, dir.path()).unwrap();
    let trace = read(dir.path(), "trace_Tem_S1.csv");
    assert_eq!(trace.lines().count(), 1 + 400);
    assert!(trace.starts_with("hour,measured,mlp,pmlp\n"));
}

#[test]
fn repeated_campaign_is_byte_identical() {
    let mut cfg = one_series(SeriesKind::Humidity, 2);
    cfg.split = SplitSpec {
        n_train: 800,
        n_test: 200,
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files = write_outputs(&run_campaign(&cfg).unwrap(), a.path()).unwrap();
    write_outputs(&run_campaign(&cfg).unwrap(), b.path()).unwrap();
    for f in files {
        let name = f.file_name().unwrap();
        assert_eq!(
            std::fs::read(&f).unwrap(),
            std::fs::read(b.path().join(name)).unwrap()
        );
    }
}

#[test]
fn campaign_aggregates_match_records() {
    let mut cfg = one_series(SeriesKind::WindSpeed, 3);
    cfg.split = SplitSpec {
        n_train: 800,
        n_test: 200,
    };
    let c = run_campaign(&cfg).unwrap();
    let rebuilt = aggregate(&c.records, c.report.traces.clone()).unwrap();
    assert_eq!(rebuilt, c.report);
    let pm: Vec<&RunRecord> = c
        .records
        .iter()
        .filter(|r| r.variant == Variant::Pmlp)
        .collect();
    let mean_ratio = pm.iter().map(|r| r.pruning_ratio).sum::<f64>() / 3.0;
    assert!((c.report.series[0].means.pruning_ratio - mean_ratio).abs() < 1e-15);
    let min_nrmse = pm.iter().map(|r| r.nrmse).fold(f64::INFINITY, f64::min);
    assert_eq!(c.report.series[0].minima.pmlp_nrmse, min_nrmse);
}

fn report_with(rows: Vec<SeriesSummary>, ratios: Vec<f64>) -> AggregateReport {
    let boxes = aggregate(
        &[Variant::Mlp, Variant::Pmlp].map(|variant| RunRecord {
            series: "x".into(),
            data: "x".into(),
            site: "x".into(),
            run: 0,
            variant,
            nrmse: 1.0,
            nmae: 1.0,
            pruning_ratio: 0.0,
            seed: 0,
            iterations: 0,
            termination: Termination::MaxIters,
        }),
        vec![],
    )
    .unwrap()
    .boxes;
    AggregateReport {
        series: rows,
        boxes,
        ratios: ratios
            .into_iter()
            .enumerate()
            .map(|(run, ratio)| RatioPoint {
                series: "x".into(),
                run,
                ratio,
            })
            .collect(),
        grand_mean_pruning_ratio: 0.0,
        grand_mean_nrmse_ratio: 1.0,
        traces: vec![],
    }
}

#[test]
fn fixture_row_marks_pruned_network() {
    let row = TableRow::new(0.765, 0.463, 0.27, 0.762, 0.461);
    let report = report_with(
        vec![SeriesSummary {
            series: "WD_Aja".into(),
            data: "WD".into(),
            site: "Aja".into(),
            minima: row,
            means: row,
        }],
        vec![1.0],
    );
    let dir = tempfile::tempdir().unwrap();
    emit_tables(&report, TableFormat::AlignedText, dir.path()).unwrap();
    let text = read(dir.path(), "minima_table.txt");
    let line = text.lines().nth(1).unwrap();
    let cells: Vec<&str> = line.split_whitespace().collect();
    assert_eq!(
        cells,
        ["WD", "Aja", "0.765", "0.463", "0.270", "0.762*", "0.461*"]
    );

    emit_tables(&report, TableFormat::Json, dir.path()).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&read(dir.path(), "minima_table.json")).unwrap();
    assert_eq!(json[0]["marks"]["pmlp_nrmse"], true);
    assert_eq!(json[0]["marks"]["mlp_nmae"], false);
    assert_eq!(json[0]["mlp_nrmse"], 0.765);

    let tie = TableRow::new(0.3041, 0.2, 0.2, 0.3039, 0.2);
    assert!(
        tie.marks.mlp_nrmse && tie.marks.pmlp_nrmse && tie.marks.mlp_nmae && tie.marks.pmlp_nmae
    );
}

#[test]
fn plot_data_delegates_and_keeps_reference_line() {
    let report = report_with(vec![], vec![1.0; 9]);
    let dir = tempfile::tempdir().unwrap();
    emit_plot_data(&report, dir.path()).unwrap();
    let ratios = read(dir.path(), "ratios.csv");
    assert_eq!(ratios.lines().count(), 10);
    for line in ratios.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[3], "1");
        assert_eq!(cols[4], "1");
    }

    let values = [0.3, 1.2, 0.9, 5.0, 1.1, 1.0, 0.95];
    let expected = box_stats(&values).unwrap();
    let mut report = report_with(vec![], values.to_vec());
    report.boxes[2].stats = expected.clone();
    emit_plot_data(&report, dir.path()).unwrap();
    let json: Vec<serde_json::Value> =
        serde_json::from_str(&read(dir.path(), "boxstats.json")).unwrap();
    let parsed: pmlp::metrics::BoxStats = serde_json::from_value(json[2]["stats"].clone()).unwrap();
    assert_eq!(parsed, expected);
    let csv = read(dir.path(), "boxstats.csv");
    let ratio_line = csv.lines().find(|l| l.starts_with("ratio,")).unwrap();
    let q1: f64 = ratio_line.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(q1, expected.q1);
}

#[test]
fn model_file_round_trip_is_bit_exact() {
    let topo = Topology::new(7, 2).unwrap();
    let mut mask = ConnectionMask::all_active(&topo);
    for i in [2, 9, 15] {
        mask.0[i] = false;
    }
    let model = Model {
        network: Network::masked(topo, initialize(&topo, 31), mask).unwrap(),
        scaler: Scaler {
            offset: 17.3,
            scale: 9.1,
        },
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    save_model(&model, &path).unwrap();
    assert!(read(dir.path(), "m.txt").starts_with("pmlp-model 1\n"));
    let loaded = load_model(&path).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let x: Vec<f64> = (0..7).map(|_| rng.random_range(-40.0..60.0)).collect();
        assert_eq!(
            model.forward(&x).unwrap().to_bits(),
            loaded.forward(&x).unwrap().to_bits()
        );
    }
}

#[test]
fn model_file_load_errors() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    };
    let short_mask = write(
        "a",
        "pmlp-model 1\ntopology 1 1\nscaler 0 1\nmask 1 1 1\nparams 1 2 0 4\n",
    );
    assert!(matches!(
        load_model(short_mask),
        Err(Error::MaskShape {
            expected: 4,
            got: 3
        })
    ));
    let good = "pmlp-model 1\ntopology 1 1\nscaler 0 1\nmask 1 1 0 1\nparams 1 2 0 4\n";
    assert!(load_model(write("b", good)).is_ok());
    let nonzero = good.replace("params 1 2 0 4", "params 1 2 3 4");
    assert!(matches!(
        load_model(write("c", &nonzero)),
        Err(Error::InvariantViolation(_))
    ));
    let future = good.replace("pmlp-model 1", "pmlp-model 9");
    assert!(matches!(
        load_model(write("d", &future)),
        Err(Error::VersionMismatch { .. })
    ));
    let garbled = good.replace("scaler 0 1", "scaler 0 -1");
    assert!(matches!(
        load_model(write("e", &garbled)),
        Err(Error::CorruptedField { .. })
    ));
}

#[test]
fn two_stage_rarely_diverges_on_synthetic_series() {
    let topo = Topology::new(7, 2).unwrap();
    let series = synth_series(SeriesKind::Temperature, 3607, 0.8, 11);
    let (train, _) = split(&embed_lags(&series, 7).unwrap(), SplitSpec::default()).unwrap();
    let train = Scaler::fit(Scaling::MinMax, &train).unwrap().apply(&train);
    let ok = (0..20)
        .filter(|&seed| {
            two_stage_train(&topo, &train, &TwoStageConfig::default(), seed)
                .map(|o| o.outcome.termination != Termination::Diverged)
                .unwrap_or(false)
        })
        .count();
    assert!(ok >= 19, "{ok}/20");
}
