//! Unscrambled Sobol points in four dimensions.
//!
//! Direction numbers are the first four dimensions of the Joe-Kuo table
//! `new-joe-kuo-6.21201` (dimension 1 is the van der Corput sequence).

use crate::parameter::{ParameterDomain, ParameterPoint};

const BITS: usize = 32;

/// Identifier stored with sampled models.
pub const DIRECTION_NUMBERS: &str = "joe-kuo-6.21201";

/// `(s, a, m_1..m_s)` per dimension after the first.
const JOE_KUO: [(u32, u32, &[u32]); 3] = [(1, 0, &[1]), (2, 1, &[1, 3]), (3, 1, &[1, 3, 1])];

fn direction_numbers() -> [[u32; BITS]; 4] {
    let mut v = [[0u32; BITS]; 4];
    for (k, vk) in v[0].iter_mut().enumerate() {
        *vk = 1 << (31 - k);
    }
    for (dim, &(s, a, m)) in JOE_KUO.iter().enumerate() {
        let s = s as usize;
        let vd = &mut v[dim + 1];
        for k in 0..s.min(BITS) {
            vd[k] = m[k] << (31 - k);
        }
        for k in s..BITS {
            let mut x = vd[k - s] ^ (vd[k - s] >> s);
            for j in 1..s {
                if (a >> (s - 1 - j)) & 1 == 1 {
                    x ^= vd[k - j];
                }
            }
            vd[k] = x;
        }
    }
    v
}

/// The point of index `index` in `[0,1)^4`.
pub fn sobol_point(index: u32) -> [f64; 4] {
    let v = direction_numbers();
    // Gray-code ordering, as in the Antonov-Saleev recurrence
    let gray = index ^ (index >> 1);
    let mut out = [0.0; 4];
    for (d, vd) in v.iter().enumerate() {
        let mut x = 0u32;
        for (bit, vb) in vd.iter().enumerate() {
            if (gray >> bit) & 1 == 1 {
                x ^= vb;
            }
        }
        out[d] = x as f64 / (1u64 << 32) as f64;
    }
    out
}

/// `n` Sobol points mapped onto `domain`, starting after the `skip` leading
/// points (the origin is skipped with `skip = 1`).
pub fn sobol_sample_skip(domain: &ParameterDomain, n: usize, skip: u32) -> Vec<ParameterPoint> {
    (0..n as u32)
        .map(|i| domain.from_unit(sobol_point(i + skip)))
        .collect()
}

/// `n` Sobol points mapped onto `domain`, skipping the index-0 origin.
pub fn sobol_sample(domain: &ParameterDomain, n: usize) -> Vec<ParameterPoint> {
    sobol_sample_skip(domain, n, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_points() {
        // reference values from an independent unscrambled Sobol generator
        let reference: [(u32, [f64; 4]); 6] = [
            (0, [0.0, 0.0, 0.0, 0.0]),
            (1, [0.5, 0.5, 0.5, 0.5]),
            (2, [0.75, 0.25, 0.25, 0.25]),
            (4, [0.375, 0.375, 0.625, 0.875]),
            (9, [0.6875, 0.8125, 0.4375, 0.9375]),
            (31, [0.03125, 0.53125, 0.90625, 0.96875]),
        ];
        for (i, p) in reference {
            assert_eq!(sobol_point(i), p, "index {i}");
        }
        assert_eq!(sobol_point(17), [0.59375, 0.96875, 0.96875, 0.15625]);
    }

    #[test]
    fn first_sample_is_domain_centre() {
        let pts = sobol_sample(&ParameterDomain::default(), 3);
        assert_eq!(pts[0].0, [5.05, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn deterministic_and_inside() {
        let d = ParameterDomain::default();
        let a = sobol_sample(&d, 50);
        let b = sobol_sample(&d, 50);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| d.contains(p)));
    }

    #[test]
    fn coordinate_means_are_central() {
        let pts: Vec<[f64; 4]> = (1..=1024).map(sobol_point).collect();
        for k in 0..4 {
            let mean = pts.iter().map(|p| p[k]).sum::<f64>() / pts.len() as f64;
            assert!((mean - 0.5).abs() < 0.02, "dimension {k}: mean {mean}");
        }
    }
}
