use nsdb::config::{buoyant_cavity, preset, RunConfig, ScalarExpr, SigmaSpec};
use nsdb::experiments::validate_config;
use proptest::prelude::*;

#[test]
fn presets_validate() {
    for name in ["buoyant_cavity", "buoyant_cavity_quasistatic", "diffusion_eigenmode", "zero", "manufactured"] {
        let cfg = preset(name).unwrap();
        cfg.check().unwrap();
        validate_config(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    assert!(preset("nope").is_none());
}

#[test]
fn unknown_keys_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&buoyant_cavity(1.0, 4).to_json()).unwrap();
    v["scheme"]["dleta"] = 0.1.into();
    assert!(RunConfig::from_json(&v.to_string()).is_err());
    let mut v: serde_json::Value = serde_json::from_str(&buoyant_cavity(1.0, 4).to_json()).unwrap();
    v["extra"] = true.into();
    assert!(RunConfig::from_json(&v.to_string()).is_err());
}

#[test]
fn structural_errors_are_config_errors() {
    let mut cfg = buoyant_cavity(1.0, 4);
    cfg.geometry.ny_m = 0;
    assert!(matches!(RunConfig::from_json(&cfg.to_json()), Err(nsdb::Error::Config(_))));
    let mut cfg = buoyant_cavity(1.0, 4);
    cfg.scheme.sigma = SigmaSpec::Value(-1.0);
    assert!(cfg.check().is_err());
    let mut cfg = buoyant_cavity(1.0, 4);
    cfg.initial.u_f.x = ScalarExpr::Eigenmode { amplitude: 1.0 };
    assert!(cfg.check().is_err());
}

#[test]
fn sigma_accepts_auto_and_numbers() {
    let text = buoyant_cavity(1.0, 4).to_json();
    assert!(text.contains("\"sigma\": \"auto\""));
    let cfg = RunConfig::from_json(&text.replace("\"sigma\": \"auto\"", "\"sigma\": 2.5")).unwrap();
    assert_eq!(cfg.scheme.sigma, SigmaSpec::Value(2.5));
}

#[test]
fn hash_is_stable_and_sensitive() {
    let a = buoyant_cavity(1.0, 8);
    let b = RunConfig::from_json(&a.to_json()).unwrap();
    assert_eq!(a.hash(), b.hash());
    assert_eq!(a.hash().len(), 64);
    let mut c = a.clone();
    c.scheme.delta *= 0.5;
    assert_ne!(a.hash(), c.hash());
}

proptest! {
    #[test]
    fn json_round_trip(delta in 1e-4f64..1.0, xi in 0.0f64..1.0, nx in 1usize..64, varpi in prop::sample::select(vec![0.0, 1.0]), stride in 0usize..20) {
        let mut cfg = buoyant_cavity(varpi, nx.max(2));
        cfg.scheme.delta = delta;
        cfg.scheme.xi = xi;
        cfg.output.snapshot_stride = stride;
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}
