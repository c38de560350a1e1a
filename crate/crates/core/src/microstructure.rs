//! Random circular inclusions and phase tagging.
//!
//! Inclusions are placed by random sequential addition driven by SplitMix64
//! (state `+= 0x9E3779B97F4A7C15`, output mixed by the two multiply-xorshift
//! rounds of the reference implementation). Uniform variates use the top 53
//! bits: `(x >> 11) * 2^-53`. For each circle the radius is drawn first,
//! then the centre `(cx, cy)` inside `[r, 1 - r]²`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Phase};

/// Default attempt budget per circle.
pub const DEFAULT_ATTEMPTS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Circle {
    pub fn contains_strictly(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy < self.radius * self.radius
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InclusionSet {
    pub circles: Vec<Circle>,
    pub seed: u64,
}

/// Placement settings; the defaults reproduce the reference microstructure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingConfig {
    pub seed: u64,
    pub count: usize,
    pub radius_range: [f64; 2],
    pub gap: f64,
    pub attempts_per_circle: usize,
}

impl Default for PackingConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            count: 20,
            radius_range: [0.04, 0.08],
            gap: 0.01,
            attempts_per_circle: DEFAULT_ATTEMPTS,
        }
    }
}

pub fn generate_inclusions(config: &PackingConfig) -> Result<InclusionSet> {
    let [r_min, r_max] = config.radius_range;
    if !(r_min > 0.0 && r_min <= r_max && r_max < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "radius range [{r_min}, {r_max}] must satisfy 0 < r_min <= r_max < 0.5"
        )));
    }
    if !(config.gap >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gap must be non-negative, got {}",
            config.gap
        )));
    }
    let mut rng = SplitMix64::new(config.seed);
    let mut circles: Vec<Circle> = Vec::with_capacity(config.count);
    while circles.len() < config.count {
        let mut placed = false;
        for _ in 0..config.attempts_per_circle {
            let radius = rng.uniform(r_min, r_max);
            let cx = rng.uniform(radius, 1.0 - radius);
            let cy = rng.uniform(radius, 1.0 - radius);
            let candidate = Circle {
                center: [cx, cy],
                radius,
            };
            if circles.iter().all(|c| !overlaps(c, &candidate, config.gap)) {
                circles.push(candidate);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PackingFailure {
                achieved: circles.len(),
                requested: config.count,
            });
        }
    }
    Ok(InclusionSet {
        circles,
        seed: config.seed,
    })
}

fn overlaps(a: &Circle, b: &Circle, gap: f64) -> bool {
    let dx = a.center[0] - b.center[0];
    let dy = a.center[1] - b.center[1];
    (dx * dx + dy * dy).sqrt() < a.radius + b.radius + gap
}

/// Tags a triangle as inclusion iff its centroid lies strictly inside a circle.
pub fn tag_elements(mesh: &Mesh, inclusions: &InclusionSet) -> Mesh {
    let phase = (0..mesh.triangle_count())
        .map(|e| {
            let c = mesh.centroid(e);
            if inclusions
                .circles
                .iter()
                .any(|circle| circle.contains_strictly(c))
            {
                Phase::Inclusion
            } else {
                Phase::Matrix
            }
        })
        .collect();
    mesh.with_phases(phase)
        .expect("phase count matches triangle count")
}

/// Area fraction of inclusion-tagged triangles.
pub fn volume_fraction(mesh: &Mesh) -> f64 {
    let inc: f64 = (0..mesh.triangle_count())
        .filter(|&e| mesh.phases()[e] == Phase::Inclusion)
        .map(|e| mesh.area(e))
        .sum();
    inc / mesh.total_area()
}

#[derive(Serialize, Deserialize)]
struct InclusionFile {
    version: u32,
    seed: u64,
    circles: Vec<[f64; 3]>,
}

impl InclusionSet {
    pub fn to_json(&self) -> Result<String> {
        let file = InclusionFile {
            version: 1,
            seed: self.seed,
            circles: self
                .circles
                .iter()
                .map(|c| [c.center[0], c.center[1], c.radius])
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InclusionFile = serde_json::from_str(text)?;
        if file.version != 1 {
            return Err(Error::Format(format!(
                "unsupported inclusion file version {}",
                file.version
            )));
        }
        Ok(Self {
            seed: file.seed,
            circles: file
                .circles
                .iter()
                .map(|c| Circle {
                    center: [c[0], c[1]],
                    radius: c[2],
                })
                .collect(),
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_structured_mesh;

    #[test]
    fn splitmix_reference_output() {
        // first outputs of the reference SplitMix64 seeded with 0
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(r.next_u64(), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn empty_set() {
        let set = generate_inclusions(&PackingConfig {
            count: 0,
            ..Default::default()
        })
        .unwrap();
        assert!(set.circles.is_empty());
        let mesh = tag_elements(&build_structured_mesh(4).unwrap(), &set);
        assert!(mesh.phases().iter().all(|p| *p == Phase::Matrix));
        assert_eq!(volume_fraction(&mesh), 0.0);
    }

    #[test]
    fn deterministic() {
        let a = generate_inclusions(&PackingConfig::default()).unwrap();
        let b = generate_inclusions(&PackingConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn default_packing_respects_gap() {
        let set = generate_inclusions(&PackingConfig::default()).unwrap();
        assert_eq!(set.circles.len(), 20);
        for (i, a) in set.circles.iter().enumerate() {
            assert!(a.radius >= 0.04 && a.radius <= 0.08);
            for k in 0..2 {
                assert!(a.center[k] >= a.radius && a.center[k] <= 1.0 - a.radius);
            }
            for b in &set.circles[i + 1..] {
                let d = ((a.center[0] - b.center[0]).powi(2) + (a.center[1] - b.center[1]).powi(2))
                    .sqrt();
                assert!(d >= a.radius + b.radius + 0.01);
            }
        }
    }

    #[test]
    fn impossible_packing_reports_progress() {
        let cfg = PackingConfig {
            count: 50,
            radius_range: [0.2, 0.2],
            gap: 0.0,
            attempts_per_circle: 200,
            seed: 1,
        };
        match generate_inclusions(&cfg) {
            Err(Error::PackingFailure {
                achieved,
                requested,
            }) => {
                assert!(achieved >= 1 && achieved < 50);
                assert_eq!(requested, 50);
            }
            other => panic!("expected packing failure, got {other:?}"),
        }
    }

    #[test]
    fn bad_radius_range() {
        let cfg = PackingConfig {
            radius_range: [0.1, 0.6],
            ..Default::default()
        };
        assert!(matches!(
            generate_inclusions(&cfg),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn centred_disc_area() {
        let set = InclusionSet {
            circles: vec![Circle {
                center: [0.5, 0.5],
                radius: 0.2,
            }],
            seed: 0,
        };
        let mesh = tag_elements(&build_structured_mesh(32).unwrap(), &set);
        let exact = std::f64::consts::PI * 0.04;
        let vf = volume_fraction(&mesh);
        assert!((vf - exact).abs() <= 0.1 * exact, "{vf} vs {exact}");
    }

    #[test]
    fn tagged_area_converges_under_refinement() {
        let set = generate_inclusions(&PackingConfig::default()).unwrap();
        let exact: f64 = set
            .circles
            .iter()
            .map(|c| std::f64::consts::PI * c.radius * c.radius)
            .sum();
        let errors: Vec<f64> = [4usize, 16, 64]
            .iter()
            .map(|&n| {
                (volume_fraction(&tag_elements(&build_structured_mesh(n).unwrap(), &set)) - exact)
                    .abs()
            })
            .collect();
        assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
    }

    #[test]
    fn json_round_trip() {
        let set = generate_inclusions(&PackingConfig {
            count: 3,
            ..Default::default()
        })
        .unwrap();
        let back = InclusionSet::from_json(&set.to_json().unwrap()).unwrap();
        assert_eq!(back, set);
    }
}
