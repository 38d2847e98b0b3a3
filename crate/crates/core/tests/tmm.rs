use num_complex::Complex64;
use proptest::prelude::*;
use qdot_core::tmm::{self, CavityRecipe, Layer, LayerStack, MaterialTable};

fn design(top: usize, bottom: usize) -> LayerStack {
    tmm::build_stack(&CavityRecipe::new(top, bottom, 925.0), &MaterialTable::default()).unwrap()
}

#[test]
fn lossless_stack_conserves_energy_and_is_reciprocal() {
    let stack = design(14, 28);
    let back = stack.reversed();
    let half = tmm::stopband_half_width(925.0, 3.5, 3.0);
    for w in tmm::wavelength_grid(925.0 - 1.5 * half, 925.0 + 1.5 * half, 3001).unwrap() {
        let fwd = tmm::response(&stack, w).unwrap();
        let rev = tmm::response(&back, w).unwrap();
        assert!((fwd.reflectance + fwd.transmittance - 1.0).abs() < 1e-9, "{w} nm");
        assert!((fwd.transmittance - rev.transmittance).abs() < 1e-9, "{w} nm");
    }
}

#[test]
fn quality_factor_grows_with_mirror_pairs() {
    let mut last = 0.0;
    for pairs in [6, 9, 12, 14] {
        let mode = tmm::cavity_mode(&design(pairs, 2 * pairs)).unwrap();
        assert!((mode.resonance - 925.0).abs() < 1.0);
        assert!(
            mode.quality_factor > 1.5 * last,
            "{pairs} pairs: Q {}",
            mode.quality_factor
        );
        last = mode.quality_factor;
    }
}

#[test]
fn field_profile_converges_with_resolution() {
    let stack = design(14, 28);
    let w = tmm::cavity_mode(&stack).unwrap().resonance;
    let coarse = tmm::field_profile(&stack, w, 2.0).unwrap();
    let fine = tmm::field_profile(&stack, w, 0.1).unwrap();
    let rel = (coarse.peak().1 - fine.peak().1).abs() / fine.peak().1;
    assert!(rel < 1e-3, "peak moved by {rel}");
    // interfaces are always sampled, so their values agree exactly
    let bounds = stack.boundaries();
    for z in bounds.iter().skip(1) {
        let at = |p: &tmm::FieldProfile| p.max_in(z - 1e-9, z + 1e-9);
        assert!((at(&coarse) - at(&fine)).abs() <= 1e-9 * at(&fine), "interface at {z}");
    }
}

#[test]
fn emitter_sits_on_an_antinode_only_on_resonance() {
    let stack = design(14, 28);
    let mode = tmm::cavity_mode(&stack).unwrap();
    let z = stack.emitter_depth.unwrap();
    let at_emitter = |w: f64| tmm::field_profile(&stack, w, 0.5).unwrap().max_in(z - 20.0, z + 20.0);
    let on = at_emitter(mode.resonance);
    let (_, global) = tmm::field_profile(&stack, mode.resonance, 0.5).unwrap().peak();
    assert!(on > (1.0 - 1e-4) * global);
    for offset in [-5.0, 5.0] {
        let off = at_emitter(mode.resonance + offset);
        assert!(on > 10.0 * off, "only {:.1}x at {offset:+} nm", on / off);
    }
}

#[test]
fn symmetric_mirrors_into_matched_media_split_evenly() {
    let mut recipe = CavityRecipe::new(10, 10, 925.0).without_barrier();
    recipe.superstrate = "GaAs".into();
    let mode = tmm::cavity_mode(&tmm::build_stack(&recipe, &MaterialTable::default()).unwrap()).unwrap();
    assert!((mode.eta_top - 0.5).abs() < 1e-9, "{}", mode.eta_top);
}

proptest! {
    #[test]
    fn random_dielectric_stacks_conserve_energy(
        layers in prop::collection::vec((1.0f64..4.0, 5.0f64..400.0), 1..12),
        ns in 1.0f64..4.0,
        w in 400.0f64..1600.0,
    ) {
        let layers: Vec<Layer> = layers
            .iter()
            .map(|&(n, d)| Layer::new("x", Complex64::new(n, 0.0), d).unwrap())
            .collect();
        let stack = LayerStack::new(layers, 925.0, Complex64::new(1.0, 0.0), Complex64::new(ns, 0.0)).unwrap();
        let r = tmm::response(&stack, w).unwrap();
        prop_assert!((r.reflectance + r.transmittance - 1.0).abs() < 1e-9);
        let rev = tmm::response(&stack.reversed(), w).unwrap();
        prop_assert!((r.transmittance - rev.transmittance).abs() < 1e-9);
    }

    #[test]
    fn absorbing_layers_lose_energy(k in 1e-3f64..0.5, d in 10.0f64..500.0) {
        let stack = LayerStack::new(
            vec![Layer::new("lossy", Complex64::new(3.5, k), d).unwrap()],
            925.0,
            Complex64::new(1.0, 0.0),
            Complex64::new(3.5, 0.0),
        ).unwrap();
        let r = tmm::response(&stack, 925.0).unwrap();
        prop_assert!(r.reflectance + r.transmittance < 1.0);
    }
}
