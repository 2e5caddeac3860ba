//! Named sequences used by examples, configs and tests.

use num_complex::Complex64;

use crate::polyseq::{Bounds, PolySpec, Rule, SequenceSpec};

/// Douady rabbit parameter.
pub const RABBIT_C: Complex64 = Complex64 { re: -0.123, im: 0.745 };

/// The rabbit parameter with real and imaginary parts exchanged, as it appears in
/// some printed sources. Its critical orbit escapes, so its Julia set is a Cantor set.
pub const RABBIT_C_AS_PRINTED: Complex64 = Complex64 { re: -0.745, im: 0.123 };

pub fn quadratic_bounds() -> Bounds {
    Bounds { d: 2, k: 1.0, m: 1.0 }
}

/// Constant `z^2 + c` with bounds (2, 1, 1).
pub fn quadratic(c: Complex64) -> SequenceSpec {
    SequenceSpec { rule: Rule::Constant { poly: PolySpec::quadratic(c) }, bounds: quadratic_bounds() }
}

/// Constant `z^2` with bounds (2, 1, 0).
pub fn squaring() -> SequenceSpec {
    SequenceSpec {
        rule: Rule::Constant { poly: PolySpec::quadratic(Complex64::new(0.0, 0.0)) },
        bounds: Bounds { d: 2, k: 1.0, m: 0.0 },
    }
}

pub fn rabbit() -> SequenceSpec {
    quadratic(RABBIT_C)
}

/// `z^2 + c_m` with `c_m` uniform in the disk of the given radius about the rabbit parameter.
pub fn perturbed_rabbit(radius: f64, seed: u64) -> SequenceSpec {
    perturbed_quadratic(RABBIT_C, radius, seed, None)
}

pub fn perturbed_quadratic(c: Complex64, radius: f64, seed: u64, until: Option<u64>) -> SequenceSpec {
    SequenceSpec {
        rule: Rule::SeededPerturbation { base: PolySpec::quadratic(c), radii: vec![radius], seed, until },
        bounds: quadratic_bounds(),
    }
}

/// Repelling fixed point `(1 - sqrt(1 - 4c)) / 2` of `z^2 + c`.
pub fn alpha_fixed_point(c: Complex64) -> Complex64 {
    (1.0 - (1.0 - 4.0 * c).sqrt()) / 2.0
}

/// Fixed point `(1 + sqrt(1 - 4c)) / 2` of `z^2 + c`, landing point of the zero ray.
pub fn beta_fixed_point(c: Complex64) -> Complex64 {
    (1.0 + (1.0 - 4.0 * c).sqrt()) / 2.0
}
