//! Benchmark fixtures shared by the criterion targets.

use domeseg::synth::SplitMix64;
use domeseg::{gen_scene, SceneSpec, ThermalRaster};

/// Square raster of smooth-ish noise: a few integer levels so plateaus occur.
pub fn random_raster(side: usize, seed: u64) -> ThermalRaster {
    let mut rng = SplitMix64::new(seed);
    ThermalRaster::from_fn(side, side, |_, _| (rng.next_u64() % 8) as f64 + 0.25 * rng.next_normal())
        .expect("valid raster")
}

/// The 256x256 two-blob ramp scene.
pub fn standard_scene() -> ThermalRaster {
    gen_scene(&SceneSpec::standard(42)).expect("valid spec").0
}
