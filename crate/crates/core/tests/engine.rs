use pairscatter_core::analysis::{enhancement_ratio, Profile};
use pairscatter_core::{
    make_grid, DiffuserSpec, Engine, EnsembleSpec, GeometrySpec, PumpSpec, ScatterConfig, Variant,
};

const THETA0: f64 = 0.5;
const D: f64 = 400.0;

fn config(variant: Variant, z: f64, realizations: usize, seed: u64) -> ScatterConfig {
    let diffuser = DiffuserSpec::new(THETA0, 1.0).unwrap();
    ScatterConfig {
        grid: make_grid(1, 8192, diffuser.xi0() / 4.0, 1.0).unwrap(),
        geometry: GeometrySpec::new(D, z, variant).unwrap(),
        pump: PumpSpec::new(100.0 * diffuser.xi0()).unwrap(),
        diffuser,
        ensemble: EnsembleSpec::new(realizations, seed),
        theta_window: Some(3.0 * THETA0),
    }
}

#[test]
fn thread_count_is_invisible() {
    let engine = Engine::new(config(Variant::Minus, -1.0, 96, 5)).unwrap();
    let one = engine.average_cut(0.0, 1).unwrap();
    let three = engine.average_cut(0.0, 3).unwrap();
    assert_eq!(one, three);
}

#[test]
fn amplitudes_are_symmetric_under_exchange() {
    for (variant, z) in [(Variant::Plus, D / 4.0), (Variant::Minus, -2.0)] {
        let engine = Engine::new(config(variant, z, 1, 9)).unwrap();
        let g = engine.grid();
        let pairs = [(0, 37), (8192 - 80, 121), (15, 8192 - 160)]
            .map(|(a, b)| (g.momentum(a), g.momentum(b)));
        assert!(engine.reciprocity_error(3, &pairs).unwrap() < 1e-10);
    }
}

#[test]
fn peak_doubles_background_at_zero_offset() {
    for variant in [Variant::Plus, Variant::Minus] {
        let curve = Engine::new(config(variant, 0.0, 600, 11))
            .unwrap()
            .average_cut(0.0, 2)
            .unwrap();
        let width = 1.18 / (D * THETA0);
        let ratio = enhancement_ratio(&Profile::from(&curve), width, THETA0)
            .unwrap()
            .value;
        assert!((ratio - 2.0).abs() < 0.3, "{variant:?}: {ratio}");
    }
}

#[test]
fn crystal_past_half_depth_is_rejected() {
    assert!(GeometrySpec::new(D, 0.6 * D, Variant::Plus).is_err());
    assert!(GeometrySpec::new(D, 1.0, Variant::Minus).is_err());
}
