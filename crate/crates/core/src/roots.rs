//! Simultaneous polynomial root finding (Aberth-Ehrlich iteration).

use num_complex::Complex64;

fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All roots of `sum coeffs[k] z^k`, with multiplicity. Trailing zero coefficients are ignored.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut n = coeffs.len();
    while n > 0 && coeffs[n - 1].norm() == 0.0 {
        n -= 1;
    }
    if n <= 1 {
        return Vec::new();
    }
    let coeffs = &coeffs[..n];
    let deg = n - 1;
    let lead = coeffs[deg];
    if deg == 1 {
        return vec![-coeffs[0] / lead];
    }
    // Cauchy bound for the initial circle.
    let radius = 1.0 + coeffs[..deg].iter().map(|c| (c / lead).norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..deg)
        .map(|k| Complex64::from_polar(0.5 * radius, std::f64::consts::TAU * (k as f64 + 0.25) / deg as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..deg {
            let (p, dp) = horner(coeffs, z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..deg {
                if j != i {
                    s += 1.0 / (z[i] - z[j]);
                }
            }
            let w = ratio / (1.0 - ratio * s);
            if w.re.is_finite() && w.im.is_finite() {
                z[i] -= w;
                moved = moved.max(w.norm() / z[i].norm().max(1e-300));
            }
        }
        if moved < 1e-15 {
            break;
        }
    }
    // Newton polish; harmless near multiple roots because steps shrink with p.
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(coeffs, *zi);
            if dp.norm() == 0.0 {
                break;
            }
            let step = p / dp;
            let cand = *zi - step;
            if horner(coeffs, cand).0.norm() < p.norm() {
                *zi = cand;
            } else {
                break;
            }
        }
    }
    z
}

/// Residual `|p(z)|` scaled by `sum |c_k| max(1, |z|)^k`.
pub fn relative_residual(coeffs: &[Complex64], z: Complex64) -> f64 {
    let p = horner(coeffs, z).0.norm();
    let r = z.norm().max(1.0);
    let scale: f64 = coeffs.iter().enumerate().map(|(k, c)| c.norm() * r.powi(k as i32)).sum();
    if scale == 0.0 {
        0.0
    } else {
        p / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn expand(roots: &[Complex64]) -> Vec<Complex64> {
        let mut p = vec![c(1.0, 0.0)];
        for r in roots {
            let mut q = vec![c(0.0, 0.0); p.len() + 1];
            for (k, a) in p.iter().enumerate() {
                q[k + 1] += a;
                q[k] -= a * r;
            }
            p = q;
        }
        p
    }

    fn matched(found: &[Complex64], want: &[Complex64], tol: f64) -> bool {
        let mut used = vec![false; found.len()];
        want.iter().all(|w| {
            let best = found
                .iter()
                .enumerate()
                .filter(|(i, _)| !used[*i])
                .min_by(|a, b| (a.1 - w).norm().partial_cmp(&(b.1 - w).norm()).unwrap());
            match best {
                Some((i, f)) if (f - w).norm() < tol => {
                    used[i] = true;
                    true
                }
                _ => false,
            }
        })
    }

    #[test]
    fn recovers_known_roots() {
        let want = [c(1.0, 0.0), c(-0.5, 0.3), c(0.2, -1.1), c(2.0, 2.0)];
        let found = polynomial_roots(&expand(&want));
        assert_eq!(found.len(), 4);
        assert!(matched(&found, &want, 1e-12));
    }

    #[test]
    fn monomial_derivative_has_zero_roots() {
        // 3 z^2
        let found = polynomial_roots(&[c(0.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(found.len(), 2);
        assert!(found.iter().all(|z| z.norm() < 1e-6));
    }

    #[test]
    fn linear_and_constant() {
        assert_eq!(polynomial_roots(&[c(2.0, 0.0), c(2.0, 0.0)]), vec![c(-1.0, 0.0)]);
        assert!(polynomial_roots(&[c(2.0, 0.0)]).is_empty());
    }

    #[test]
    fn residuals_small_on_random_quintics() {
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..50 {
            let coeffs: Vec<Complex64> = (0..6).map(|_| c(next(), next())).collect();
            for z in polynomial_roots(&coeffs) {
                assert!(relative_residual(&coeffs, z) < 1e-12, "{z}");
            }
        }
    }
}
