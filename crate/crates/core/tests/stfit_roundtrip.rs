mod common;

use common::checks::{realistic_tensor, stejskal_tanner_round_trip};
use common::ORDERS;
use hotfield::dataio::{read_signal_file, write_signal_file, SignalHeader};
use hotfield::stfit::{fibonacci_hemisphere, fit_hot, fit_record, synthesize, GradientScheme, SignalRecord};
use hotfield::{Order, SymmetricHOT};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn noiseless_round_trip_at_acquisition_scale() {
    for l in ORDERS {
        let err = stejskal_tanner_round_trip(l, 20, l as u64);
        assert!(err < 1e-6, "order {l}: {err:e}");
    }
}

#[test]
fn six_directions_determine_a_rank2_tensor() {
    let dirs: Vec<Vector3<f64>> = [
        [1.0, 1.0, 0.0],
        [1.0, -1.0, 0.0],
        [1.0, 0.0, 1.0],
        [1.0, 0.0, -1.0],
        [0.0, 1.0, 1.0],
        [0.0, 1.0, -1.0],
    ]
    .iter()
    .map(|v| Vector3::from(*v).normalize())
    .collect();
    let scheme = GradientScheme::new(dirs, 1000.0, 1.0).unwrap();
    let t = SymmetricHOT::new(Order::new(2).unwrap(), vec![1.7e-3, 1e-4, -2e-4, 3e-4, 5e-5, 4e-4]).unwrap();
    let fit = fit_hot(&synthesize(&t, &scheme), &scheme, t.order()).unwrap();
    for (a, b) in fit.coeffs().iter().zip(t.coeffs()) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn signal_file_pipeline_recovers_the_field() {
    let order = Order::new(4).unwrap();
    let scheme = GradientScheme::new(fibonacci_hemisphere(90), 1000.0, 250.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let sites: Vec<[f64; 2]> = (0..6).map(|k| [(k % 3) as f64 * 0.5, (k / 3) as f64]).collect();
    let truth: Vec<SymmetricHOT> = sites.iter().map(|_| realistic_tensor(order, &mut rng)).collect();
    let record = SignalRecord {
        sites: sites.clone(),
        signals: truth.iter().map(|t| synthesize(t, &scheme)).collect(),
    };
    let header = SignalHeader {
        order: 4,
        n_directions: 90,
        b: 1000.0,
        s0: 250.0,
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("signals.txt");
    write_signal_file(&path, &header, &record).unwrap();
    let (h, r) = read_signal_file(&path).unwrap();
    assert_eq!(h, header);
    let field = fit_record(&r, &scheme, order).unwrap();
    assert_eq!((field.nx(), field.ny()), (3, 2));
    for (fit, t) in field.tensors().iter().zip(&truth) {
        for (a, b) in fit.coeffs().iter().zip(t.coeffs()) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
