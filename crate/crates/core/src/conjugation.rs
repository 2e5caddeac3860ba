//! Monic normalization by linear conjugacy `chi_j(z) = alpha_j z`.
//!
//! With `alpha_j = prod_{n > j} a_n^{1/D_{j,n}}` (one fixed argument branch for every
//! leading coefficient), `P~_j = chi_j o P_j o chi_{j-1}^{-1}` is monic.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DynError, Result};
use crate::polyseq::{Bounds, PolySpec, Rule, SeqCache, SequenceSpec};

const IDENTITY_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonicConjugacy {
    /// `alpha_j` for `j = 0 .. alphas.len()`; repeats with `period` when present.
    pub alphas: Vec<Complex64>,
    /// Last index whose leading coefficient entered the product.
    pub horizon: u64,
    /// Bound on `|log alpha_j(truncated) - log alpha_j(full)|`.
    pub tail_bound: f64,
    /// Direction (degrees) of the argument branch cut; `None` for the identity.
    pub branch_cut_deg: Option<f64>,
    pub period: Option<usize>,
    /// Branch-fixed logarithms of the leading coefficients `a_1 ..= a_horizon`
    /// (one period for periodic rules).
    pub lead_logs: Vec<Complex64>,
    pub degrees: Vec<usize>,
}

impl MonicConjugacy {
    /// `alpha_j`.
    pub fn alpha(&self, j: u64) -> Result<Complex64> {
        match self.period {
            Some(p) => Ok(self.alphas[(j % p as u64) as usize]),
            None => self
                .alphas
                .get(j as usize)
                .copied()
                .ok_or(DynError::IndexBeyondHorizon { index: j, horizon: self.alphas.len() as u64 - 1 }),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.branch_cut_deg.is_none()
    }

    fn lead_log(&self, n: u64) -> Complex64 {
        match self.period {
            Some(p) => self.lead_logs[((n - 1) % p as u64) as usize],
            None => self.lead_logs[(n - 1) as usize],
        }
    }

    fn degree(&self, n: u64) -> usize {
        match self.period {
            Some(p) => self.degrees[((n - 1) % p as u64) as usize],
            None => self.degrees[(n - 1) as usize],
        }
    }

    /// The root `a_n^{1/D_{j,n}}` used inside `alpha_j` (`j < n`).
    pub fn lead_root(&self, n: u64, j: u64) -> Complex64 {
        let mut inv = 1.0;
        for i in j + 1..=n {
            inv /= self.degree(i) as f64;
        }
        (self.lead_log(n) * inv).exp()
    }

    /// `chi_j(z)`.
    pub fn chi(&self, j: u64, z: Complex64) -> Result<Complex64> {
        Ok(self.alpha(j)? * z)
    }
}

fn angular_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Compute the scale factors `alpha_0 ..= alpha_{m_max}` (all of one period for periodic rules).
pub fn monic_rescale(spec: &SequenceSpec, m_max: u64, horizon: u64, tol: f64) -> Result<MonicConjugacy> {
    if !(tol > 0.0) {
        return Err(DynError::InvalidInput("tolerance must be positive".into()));
    }
    let k = spec.bounds.k;
    let period = spec.period();
    let mut cache = SeqCache::new(spec);
    let first = match period {
        Some(p) => p as u64,
        None => m_max + 1,
    };
    // Leads up to the point where the tail mass is below tol for every needed j.
    let span = match period {
        Some(p) => p as u64 - 1,
        None => m_max,
    };
    let mut h = horizon.max(first);
    let per_term = k.ln() + TAU;
    loop {
        cache.ensure(h)?;
        let mut inv = 1.0;
        for i in span + 1..=h {
            inv /= cache.get(i).degree() as f64;
        }
        if per_term * inv <= tol || h > 4096 {
            break;
        }
        h += 8;
    }
    cache.ensure(h)?;
    let leads: Vec<Complex64> = (1..=h).map(|n| cache.get(n).lead()).collect();
    let degrees: Vec<usize> = (1..=h).map(|n| cache.get(n).degree()).collect();

    if leads.iter().all(|a| (a - 1.0).norm() <= IDENTITY_TOL) {
        let count = match period {
            Some(p) => p,
            None => m_max as usize + 1,
        };
        return Ok(MonicConjugacy {
            alphas: vec![Complex64::new(1.0, 0.0); count],
            horizon: h,
            tail_bound: 0.0,
            branch_cut_deg: None,
            period,
            lead_logs: vec![Complex64::new(0.0, 0.0); leads.len()],
            degrees,
        });
    }

    // Branch cut: the one-degree ray with the largest clearance from every leading argument.
    let args: Vec<f64> = leads.iter().map(|a| a.arg()).collect();
    let mut best = (0.0f64, -1.0f64);
    for deg in 1..360 {
        let phi = (deg as f64).to_radians();
        let clearance = args.iter().map(|a| angular_gap(*a, phi)).fold(PI, f64::min);
        if clearance > best.1 {
            best = (deg as f64, clearance);
        }
    }
    if best.1 < 0.25f64.to_radians() {
        return Err(DynError::BranchObstruction { horizon: h });
    }
    let phi = best.0.to_radians();
    let lead_logs: Vec<Complex64> = leads
        .iter()
        .map(|a| {
            let mut t = a.arg();
            while t >= phi {
                t -= TAU;
            }
            while t < phi - TAU {
                t += TAU;
            }
            Complex64::new(a.norm().ln(), t)
        })
        .collect();

    let count = match period {
        Some(p) => p,
        None => m_max as usize + 1,
    };
    let mut alphas = Vec::with_capacity(count);
    let mut tail_bound = 0.0f64;
    for j in 0..count as u64 {
        let mut inv = 1.0;
        let mut acc = Complex64::new(0.0, 0.0);
        for n in j + 1..=h {
            inv /= degrees[(n - 1) as usize] as f64;
            acc += lead_logs[(n - 1) as usize] * inv;
        }
        tail_bound = tail_bound.max(per_term * inv);
        alphas.push(acc.exp());
    }
    let (lead_logs, degrees) = match period {
        Some(p) => (lead_logs[..p].to_vec(), degrees[..p].to_vec()),
        None => (lead_logs, degrees),
    };
    Ok(MonicConjugacy { alphas, horizon: h, tail_bound, branch_cut_deg: Some(best.0), period, lead_logs, degrees })
}

/// `P~_j(w) = alpha_j P_j(w / alpha_{j-1})`.
pub fn conjugate_poly(p: &PolySpec, alpha_prev: Complex64, alpha: Complex64) -> PolySpec {
    let inv = 1.0 / alpha_prev;
    let mut scale = alpha;
    let coeffs: Vec<Complex64> = p
        .coeffs()
        .iter()
        .map(|c| {
            let out = c * scale;
            scale *= inv;
            out
        })
        .collect();
    PolySpec::new(coeffs).expect("conjugation preserves degree")
}

/// The conjugated sequence. Periodic input stays periodic; other rules become a
/// truncated rule covering the indices `1 ..= alphas.len() - 1`.
pub fn conjugate_sequence(spec: &SequenceSpec, conj: &MonicConjugacy) -> Result<SequenceSpec> {
    if conj.is_identity() {
        return Ok(spec.clone());
    }
    let count = match conj.period {
        Some(p) => p as u64,
        None => conj.alphas.len() as u64 - 1,
    };
    if count == 0 {
        return Err(DynError::IndexBeyondHorizon { index: 1, horizon: 0 });
    }
    let mut cache = SeqCache::new(spec);
    let mut polys = Vec::with_capacity(count as usize);
    for j in 1..=count {
        let p = cache.poly(j)?;
        polys.push(conjugate_poly(p, conj.alpha(j - 1)?, conj.alpha(j)?));
    }
    let d = polys.iter().map(|p| p.degree()).max().unwrap_or(2);
    let m = polys
        .iter()
        .flat_map(|p| p.coeffs()[..p.degree()].iter().map(|c| c.norm()))
        .fold(0.0, f64::max);
    let bounds = Bounds { d, k: 1.0, m: m * (1.0 + 1e-12) };
    let rule = match conj.period {
        Some(1) => Rule::Constant { poly: polys.pop().unwrap() },
        Some(_) => Rule::Periodic { polys },
        None => Rule::Truncated { polys },
    };
    Ok(SequenceSpec { rule, bounds })
}

/// Largest `|lead - 1|` over indices `1 ..= upto` of a conjugated sequence.
pub fn max_lead_deviation(spec: &SequenceSpec, upto: u64) -> Result<f64> {
    let mut cache = SeqCache::new(spec);
    let mut worst = 0.0f64;
    for j in 1..=upto {
        worst = worst.max((cache.poly(j)?.lead() - 1.0).norm());
    }
    Ok(worst)
}

/// Upper bound for the non-leading coefficients after conjugation, `K^{d} M`.
pub fn conjugated_m_bound(bounds: &Bounds) -> f64 {
    bounds.k.powi(bounds.d as i32) * bounds.m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyseq::compose_eval;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn two_three() -> SequenceSpec {
        let p2 = PolySpec::unicritical(2, c(2.0, 0.0), c(0.0, 0.0));
        let p3 = PolySpec::unicritical(3, c(3.0, 0.0), c(0.1, 0.0));
        SequenceSpec::periodic(vec![p2, p3], Bounds::new(3, 3.0, 0.1).unwrap()).unwrap()
    }

    #[test]
    fn monic_input_is_identity() {
        let s = crate::presets::rabbit();
        let conj = monic_rescale(&s, 5, 10, 1e-14).unwrap();
        assert!(conj.is_identity());
        assert!(conj.alphas.iter().all(|a| *a == c(1.0, 0.0)));
        assert_eq!(conjugate_sequence(&s, &conj).unwrap(), s);
    }

    #[test]
    fn four_z_squared() {
        let s = SequenceSpec::constant(PolySpec::unicritical(2, c(4.0, 0.0), c(0.0, 0.0)), Bounds::new(2, 4.0, 0.0).unwrap())
            .unwrap();
        let conj = monic_rescale(&s, 3, 10, 1e-14).unwrap();
        assert!((conj.alpha(0).unwrap() - 4.0).norm() < 1e-13);
        assert!((conj.alpha(7).unwrap() - 4.0).norm() < 1e-13);
        let out = conjugate_sequence(&s, &conj).unwrap();
        let p = out.polynomial_at(1).unwrap();
        assert!((p.lead() - 1.0).norm() < 1e-13);
        assert!(p.coeffs()[0].norm() < 1e-15);
    }

    #[test]
    fn periodic_two_three() {
        let s = two_three();
        let conj = monic_rescale(&s, 20, 10, 1e-14).unwrap();
        let a0 = conj.alpha(0).unwrap().norm();
        assert!((1.0 / 3.0..=3.0).contains(&a0));
        for j in 0..4 {
            let a = conj.alpha(j).unwrap().norm();
            assert!(a >= 1.0 / 3.0 - 1e-12 && a <= 3.0 + 1e-12);
        }
        let out = conjugate_sequence(&s, &conj).unwrap();
        assert!(max_lead_deviation(&out, 20).unwrap() <= 1e-10);
        assert!(out.bounds.m <= conjugated_m_bound(&s.bounds) * (1.0 + 1e-9));
    }

    #[test]
    fn conjugacy_identity_on_samples() {
        let s = two_three();
        let conj = monic_rescale(&s, 20, 10, 1e-14).unwrap();
        let out = conjugate_sequence(&s, &conj).unwrap();
        for (i, z) in [c(0.3, 0.1), c(-0.7, 0.4), c(1.1, -0.2)].iter().enumerate() {
            let n = 3 + i as u64;
            let lhs = conj.chi(n, compose_eval(&s, 0, n, *z).unwrap().value).unwrap();
            let rhs = compose_eval(&out, 0, n, conj.chi(0, *z).unwrap()).unwrap().value;
            assert!((lhs - rhs).norm() <= 1e-8 * lhs.norm().max(1.0));
        }
    }

    #[test]
    fn negative_lead_uses_consistent_branch() {
        let s = SequenceSpec::constant(PolySpec::unicritical(2, c(-2.0, 0.0), c(0.1, 0.0)), Bounds::new(2, 2.0, 0.1).unwrap())
            .unwrap();
        let conj = monic_rescale(&s, 2, 10, 1e-14).unwrap();
        let out = conjugate_sequence(&s, &conj).unwrap();
        assert!(max_lead_deviation(&out, 5).unwrap() < 1e-12);
        for n in 2..8u64 {
            let r = conj.lead_root(n, 0);
            let r2 = conj.lead_root(n, 1);
            assert!((r * r - r2).norm() < 1e-12);
        }
    }

    #[test]
    fn surrounded_origin_is_obstruction() {
        let polys: Vec<PolySpec> = (0..720)
            .map(|k| PolySpec::unicritical(2, Complex64::from_polar(1.5, k as f64 * 0.5f64.to_radians()), c(0.0, 0.0)))
            .collect();
        let s = SequenceSpec::periodic(polys, Bounds::new(2, 2.0, 0.0).unwrap()).unwrap();
        assert!(matches!(monic_rescale(&s, 2, 10, 1e-14), Err(DynError::BranchObstruction { .. })));
    }

    #[test]
    fn nonperiodic_output_is_truncated() {
        let rule = Rule::SeededPerturbation {
            base: PolySpec::unicritical(2, c(1.5, 0.0), c(0.1, 0.0)),
            radii: vec![0.0, 0.0, 0.2],
            seed: 4,
            until: None,
        };
        let s = SequenceSpec::new(rule, Bounds::new(2, 2.0, 0.1).unwrap()).unwrap();
        let conj = monic_rescale(&s, 10, 10, 1e-14).unwrap();
        let out = conjugate_sequence(&s, &conj).unwrap();
        assert!(max_lead_deviation(&out, 10).unwrap() < 1e-12);
        assert!(matches!(out.polynomial_at(11), Err(DynError::IndexBeyondHorizon { .. })));
        assert!(matches!(conj.alpha(11), Err(DynError::IndexBeyondHorizon { .. })));
    }
}
