use hypns_wasm::core::{heat_decay, identity_orders, pressure_ladder};

#[test]
fn heat_decay_layout() {
    let d = heat_decay("scalar", 48, 16, 4.0, 0.5, 0.01).unwrap();
    assert_eq!(d.len() % 6, 0);
    assert_eq!(&d[..6], &[0.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
    let last = &d[d.len() - 6..];
    assert!((last[0] - 0.5).abs() < 1e-12);
    assert!(last[2] < 1.0 && last[2] > 0.0);
    assert!(heat_decay("vector", 48, 16, 4.0, 0.5, 0.01).is_err());
    assert!(heat_decay("scalar", 512, 16, 4.0, 0.5, 0.01).is_err());
    assert!(heat_decay("scalar", 48, 16, 4.0, 5.0, 0.01).is_err());
}

#[test]
fn stokes_decay_runs() {
    let d = heat_decay("stokes", 32, 16, 4.0, 0.2, 0.02).unwrap();
    assert!(d[d.len() - 4] < 1.0);
}

#[test]
fn pressure_ladder_separates_profiles() {
    let grow = pressure_ladder("const1", 192, 128, 12.0).unwrap();
    let flat = pressure_ladder("expm2", 192, 128, 12.0).unwrap();
    assert_eq!(grow.len(), 17);
    assert!(grow[0] > 1.5);
    assert!(flat[0] < 1.05);
    assert!((grow[15] - 11.0).abs() < 1e-12);
    assert!((grow[1] - 4.0).abs() < 1e-12);
    assert!(pressure_ladder("cosh", 192, 128, 12.0).is_err());
    assert!(pressure_ladder("exp2", 192, 128, 2.0).is_err());
}

#[test]
fn identity_orders_layout() {
    let d = identity_orders("swirl", 48, 32).unwrap();
    assert_eq!(d.len(), 18);
    assert!(d[4] < d[0] && d[8] < d[4]);
    assert!(d[12..].iter().all(|o| *o > 1.5), "{:?}", &d[12..]);
    assert!(identity_orders("nope", 48, 32).unwrap_err().contains("unknown field"));
}
