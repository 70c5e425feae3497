use proxbcd::bcd::{train, Hyperparams};
use proxbcd::data::make_blobs;
use proxbcd::model::{Dataset, NetworkSpec};
use proxbcd::numerics::RngStream;
use proxbcd::prox::ActivationKind;
use proxbcd::sgd::{sgd_train, SgdConfig};

fn blobs(seed: u64) -> (NetworkSpec, Dataset) {
    let data = make_blobs(334, 3, 20, 0.1, &mut RngStream::new(seed).substream(1)).unwrap();
    let spec = NetworkSpec::new(vec![20, 32, 32, 3], ActivationKind::ReluProjection).unwrap();
    (spec, data)
}

#[test]
fn bcd_fits_blobs_in_twenty_epochs() {
    let (spec, data) = blobs(0);
    let hp = Hyperparams::uniform(&spec, 0.1, 0.1, 0.1, 0.95);
    let (_, m) = train(&spec, &data, None, &hp, &mut RngStream::new(0)).unwrap();
    assert_eq!(m.rows.len(), 20);
    assert!(m.rows.windows(2).all(|w| w[1].epoch == w[0].epoch + 1));
    assert!(m.last().unwrap().train_acc >= 0.95, "{:?}", m.last());
}

#[test]
fn sgd_fits_blobs_in_hundred_epochs() {
    let (spec, data) = blobs(0);
    let cfg = SgdConfig { batch_size: 32, epochs: 100, ..SgdConfig::default() };
    let (_, m) = sgd_train(&spec, &data, None, &cfg, &mut RngStream::new(0)).unwrap();
    assert!(m.last().unwrap().train_acc >= 0.95, "{:?}", m.last());
}

#[test]
fn sgd_is_deterministic() {
    let (spec, data) = blobs(3);
    let cfg = SgdConfig { batch_size: 50, epochs: 3, shuffle_seed: 9, ..SgdConfig::default() };
    let run = || sgd_train(&spec, &data, None, &cfg, &mut RngStream::new(4)).unwrap();
    let (p1, m1) = run();
    let (p2, m2) = run();
    assert_eq!(p1, p2);
    assert_eq!(m1.to_csv(&[], false), m2.to_csv(&[], false));
}
