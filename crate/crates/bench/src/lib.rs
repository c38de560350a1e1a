//! Benchmark fixtures shared by the criterion targets.

use cre_rom_core::{build_offline, OfflineBuild, OfflineConfig, ParameterPoint};

/// Offline build on an `n × n` mesh with the default training set.
pub fn fixture(mesh_n: usize) -> OfflineBuild {
    build_offline(&OfflineConfig {
        mesh_n,
        ..OfflineConfig::default()
    })
    .expect("offline build")
}

/// A spread of points over the default domain, interior and corners.
pub fn probe_points() -> Vec<ParameterPoint> {
    vec![
        ParameterPoint::new(1.6, 0.0, 0.0, 1.0),
        ParameterPoint::new(0.1, -1.0, 1.0, -1.0),
        ParameterPoint::new(10.0, 1.0, -1.0, 1.0),
        ParameterPoint::new(4.2, 0.3, 0.7, -0.2),
    ]
}
