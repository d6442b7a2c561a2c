use iawf::allocator::Allocator;
use iawf::harness::{reconstruct_demo, run_experiment, write_outputs, ChannelModel, ExperimentConfig};
use iawf::partitioner::Criterion;
use iawf::pixel_source::load_image;
use iawf::scene::synthetic_scene;

fn small(model: ChannelModel, trials: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.source.size = Some([48, 40]);
    cfg.channel.model = model;
    cfg.experiment.trials = trials;
    cfg.experiment.snr_db = vec![4.0, 10.0];
    cfg.experiment.gain_snr_db = Some(10.0);
    cfg
}

#[test]
fn same_seed_gives_identical_reports() {
    let mut cfg = small(ChannelModel::Rayleigh, 4);
    let a = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
    cfg.experiment.threads = 1;
    let b = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    cfg.experiment.seed += 1;
    let c = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
    assert_ne!(a, c);
}

#[test]
fn allocators_do_not_perturb_each_other() {
    let cfg = small(ChannelModel::Rayleigh, 3);
    let mut alone = cfg.clone();
    alone.experiment.allocators = vec![Allocator::Equal];
    alone.experiment.gain_snr_db = None;
    let all = run_experiment(&cfg).unwrap();
    let one = run_experiment(&alone).unwrap();
    for (t_all, t_one) in all.trials.iter().zip(&one.trials) {
        for c in Criterion::ALL {
            for snr in [4.0, 10.0] {
                let x = t_all.outcome(c, snr, Allocator::Equal).unwrap();
                let y = t_one.outcome(c, snr, Allocator::Equal).unwrap();
                assert_eq!(x.powers, y.powers);
                assert_eq!(x.report, y.report);
            }
        }
    }
}

#[test]
fn awgn_sp_i_ma_and_equal_match() {
    let mut cfg = small(ChannelModel::Awgn, 2);
    cfg.experiment.criteria = vec![Criterion::SpI];
    let s = run_experiment(&cfg).unwrap();
    for t in &s.trials {
        for snr in [4.0, 10.0] {
            let ma = t.outcome(Criterion::SpI, snr, Allocator::Ma).unwrap();
            let eq = t.outcome(Criterion::SpI, snr, Allocator::Equal).unwrap();
            assert_eq!(ma.powers, eq.powers);
            assert_eq!(ma.report, eq.report);
        }
    }
}

#[test]
fn budget_is_respected_and_spent() {
    let s = run_experiment(&small(ChannelModel::Rayleigh, 3)).unwrap();
    for t in &s.trials {
        for p in &t.points {
            for o in &p.outcomes {
                assert!(o.budget_ratio <= 1.0 + 1e-9, "{}", o.budget_ratio);
                assert!(o.budget_ratio >= 1.0 - 1e-9, "{}", o.budget_ratio);
                assert!(o.powers.iter().flatten().all(|&x| x >= 0.0));
            }
        }
    }
}

#[test]
fn measured_imse_tracks_prediction() {
    // With few multi-bit pixel errors the realized IMSE averages to the model.
    let mut cfg = small(ChannelModel::Awgn, 40);
    cfg.experiment.snr_db = vec![8.0];
    cfg.experiment.gain_snr_db = None;
    let s = run_experiment(&cfg).unwrap();
    for c in Criterion::ALL {
        for a in Allocator::ALL {
            let (mut measured, mut predicted) = (0.0, 0.0);
            for t in &s.trials {
                let o = t.outcome(c, 8.0, a).unwrap();
                measured += o.report.imse;
                predicted += o.predicted_imse;
            }
            let rel = (measured - predicted).abs() / predicted;
            assert!(rel < 0.1, "{c} {a}: measured {measured} predicted {predicted}");
        }
    }
}

#[test]
fn output_tables_have_expected_columns() {
    let cfg = small(ChannelModel::Rayleigh, 2);
    let s = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_outputs(&s, &cfg, dir.path()).unwrap();
    let header = |f: &str| {
        std::fs::read_to_string(dir.path().join(f))
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .to_string()
    };
    assert_eq!(
        header("curves.csv"),
        "snr_db,criterion,allocator,mean_norm_imse_db,ci95"
    );
    assert_eq!(header("gains.csv"), "trial,criterion,gain_db");
    assert_eq!(header("gains_predicted.csv"), "trial,criterion,gain_db");
    assert!(header("trials.csv").starts_with("trial,seed,snr_db,criterion,allocator"));
    let rows = csv::Reader::from_path(dir.path().join("curves.csv"))
        .unwrap()
        .records()
        .count();
    assert_eq!(rows, 3 * 2 * 3);
    let gains = csv::Reader::from_path(dir.path().join("gains.csv"))
        .unwrap()
        .records()
        .count();
    assert_eq!(gains, 2 * 3);
    let reread = ExperimentConfig::load(dir.path().join("config.toml")).unwrap();
    assert_eq!(reread.experiment, cfg.experiment);
}

#[test]
fn demo_is_clean_at_high_snr_and_drops_background_at_low_snr() {
    let mut cfg = small(ChannelModel::Awgn, 1);
    cfg.experiment.snr_db = vec![-6.0, 40.0];
    cfg.experiment.gain_snr_db = None;
    let dir = tempfile::tempdir().unwrap();
    let manifest = reconstruct_demo(&cfg, dir.path()).unwrap();
    assert_eq!(manifest.entries.len(), 3 * 3 * 2);
    let original = load_image(dir.path().join(&manifest.original)).unwrap();
    for e in &manifest.entries {
        let img = load_image(dir.path().join(&e.file)).unwrap();
        assert_eq!(img.dims(), original.dims());
        if e.snr_db == 40.0 {
            assert_eq!(e.bit_errors, 0, "{}", e.file);
            assert_eq!(img, original);
        }
    }
    let low = manifest
        .entries
        .iter()
        .find(|e| e.criterion == Criterion::SsI && e.allocator == Allocator::Proposed && e.snr_db == -6.0)
        .unwrap();
    assert!(low.zero_power_streams > 0);
    let img = load_image(dir.path().join(&low.file)).unwrap();
    let scene = synthetic_scene(48, 40);
    let background = 2;
    for p in 0..img.pixel_count() {
        if scene.segmap.label(p) == background {
            assert!((0..3).all(|c| img.get_linear(p, c) == 0));
        }
    }
}
