//! Point-cloud distances.

use num_complex::Complex64;
use rayon::prelude::*;

/// Distance from `q` to the nearest point of `cloud` (infinite for an empty cloud).
pub fn nearest_distance(cloud: &[Complex64], q: Complex64) -> f64 {
    cloud.iter().map(|p| (p - q).norm_sqr()).fold(f64::INFINITY, f64::min).sqrt()
}

/// `max_{a in A} min_{b in B} |a - b|`.
pub fn directed_hausdorff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.par_iter().map(|p| nearest_distance(b, *p)).reduce(|| 0.0, f64::max)
}

/// Symmetric Hausdorff distance between two nonempty clouds.
pub fn hausdorff_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Largest nearest-neighbour distance within one cloud.
pub fn max_nearest_gap(points: &[Complex64]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let q = points[i];
            points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, p)| (p - q).norm_sqr())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .reduce(|| 0.0, f64::max)
}
