use std::sync::OnceLock;

use qutritcr::calibration::CalibrationOptions;
use qutritcr::device::Subspace;
use qutritcr::experiments::{cmd_bell, cmd_calibrate, cmd_rabi, linspace, sample_shots, CalibrationStore, ExperimentConfig, StoreStatus, CSV_HEADER, STORE_KEYS};

/// Loose settings so the store round trips run in seconds.
fn quick_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.calibration = CalibrationOptions {
        beta_points: 5,
        single_max_evals: 20,
        single_min_fidelity: 0.0,
        cr_scan_points: 16,
        cr_max_evals: 10,
        cr_min_fidelity: 0.0,
        ..cfg.calibration
    };
    cfg.shots = 2000;
    cfg
}

fn quick_store() -> &'static CalibrationStore {
    static STORE: OnceLock<CalibrationStore> = OnceLock::new();
    STORE.get_or_init(|| {
        let cfg = quick_config();
        CalibrationStore::calibrate(&cfg.device, &cfg.calibration).unwrap()
    })
}

#[test]
fn store_holds_every_gate() {
    let s = quick_store();
    for k in STORE_KEYS {
        assert_eq!(s.gates[k].name, k);
    }
    assert_eq!(s.gate("csx12").unwrap().name, "CSX12");
    assert_eq!(s.gate("cr01").unwrap().name, "CR01(π)");
    assert_eq!(s.gate("x12pi2").unwrap().name, "X12π(2)");
    assert!(s.gate("cz").is_err());
    assert_eq!(s.fidelity_table().lines().count(), 1 + STORE_KEYS.len());
}

#[test]
fn store_reuse_and_regeneration() {
    let cfg = quick_config();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cal.json");
    quick_store().save(&path).unwrap();
    let before = std::fs::read(&path).unwrap();
    let (_, status) = cmd_calibrate(&cfg, &path).unwrap();
    assert_eq!(status, StoreStatus::Reused);
    assert_eq!(std::fs::read(&path).unwrap(), before);

    std::fs::write(&path, "{ not json").unwrap();
    let (store, status) = cmd_calibrate(&cfg, &path).unwrap();
    assert!(matches!(status, StoreStatus::Regenerated(_)), "{status:?}");
    assert_eq!(&store, quick_store());
    assert_eq!(std::fs::read(&path).unwrap(), before);

    let other = ExperimentConfig {
        calibration: CalibrationOptions {
            cr_max_evals: 11,
            ..cfg.calibration
        },
        ..cfg.clone()
    };
    assert!(quick_store().mismatch(&other.device, &other.calibration).unwrap().is_some());
}

#[test]
fn rabi_csv_has_one_row_per_point() {
    let cfg = quick_config();
    let prep = quick_store().control_prep().unwrap();
    for n in [1, 7, 20] {
        let grid = linspace(300.0, n).unwrap();
        let run = cmd_rabi(&cfg, Subspace::S01, 1, 0.5, &grid, &prep).unwrap();
        let mut lines = run.csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), n);
        for r in rows {
            assert_eq!(r.split(',').count(), 10);
        }
        assert_eq!(run.result.fits.len(), 3);
    }
}

#[test]
fn rabi_rejects_bad_control() {
    let cfg = quick_config();
    let prep = quick_store().control_prep().unwrap();
    assert!(cmd_rabi(&cfg, Subspace::S01, 3, 0.5, &[0.0, 10.0], &prep).is_err());
}

#[test]
fn bell_result_is_reproducible() {
    let cfg = quick_config();
    let a = cmd_bell(&cfg, quick_store()).unwrap();
    let b = cmd_bell(&cfg, quick_store()).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(a.metrics.len(), 4);
    assert!(a.duration_ns > 0.0);
    let reseeded = cmd_bell(&ExperimentConfig { seed: 8, ..cfg }, quick_store()).unwrap();
    assert_eq!(reseeded.metrics[0], a.metrics[0]);
    assert_ne!(reseeded.metrics[2], a.metrics[2]);
}

#[test]
fn shots_sum_to_total() {
    let p = [0.05, 0.1, 0.15, 0.2, 0.0, 0.1, 0.1, 0.2, 0.1];
    for shots in [1, 10, 12345] {
        assert_eq!(sample_shots(&p, shots, 4).unwrap().iter().sum::<u64>(), shots);
    }
    let c = sample_shots(&p, 1000, 4).unwrap();
    assert_eq!(c[4], 0);
}
