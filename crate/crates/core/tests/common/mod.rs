#![allow(dead_code)]

use std::sync::OnceLock;

use cre_rom_core::microstructure::SplitMix64;
use cre_rom_core::{build_offline, OfflineBuild, OfflineConfig, ParameterDomain, ParameterPoint};

/// 32×32 mesh, 20 training points, seed 42.
pub fn default_build() -> &'static OfflineBuild {
    static BUILD: OnceLock<OfflineBuild> = OnceLock::new();
    BUILD.get_or_init(|| build_offline(&OfflineConfig::default()).expect("default offline build"))
}

/// 12×12 mesh, 12 training points: fast enough for property tests.
pub fn small_build() -> &'static OfflineBuild {
    static BUILD: OnceLock<OfflineBuild> = OnceLock::new();
    BUILD.get_or_init(|| {
        build_offline(&OfflineConfig {
            mesh_n: 12,
            n_samples: 12,
            ..OfflineConfig::default()
        })
        .expect("small build")
    })
}

/// Uniform random points of `domain`, reproducible from `seed`.
pub fn random_points(domain: &ParameterDomain, n: usize, seed: u64) -> Vec<ParameterPoint> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|_| {
            let mut p = [0.0; 4];
            for (v, b) in p.iter_mut().zip(&domain.bounds) {
                *v = rng.uniform(b[0], b[1]);
            }
            ParameterPoint(p)
        })
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
