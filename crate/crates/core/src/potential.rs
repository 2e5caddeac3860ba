//! Green's functions, Böttcher coordinates and their inverses for monic sequences.
//!
//! Near the Julia set `phi_m` is evaluated through the lifted identity
//! `phi_n(Q_{m,n}(z)) = phi_m(z)^{D_{m,n}}` at a level `n` where the orbit has escaped,
//! so every logarithm is taken at moderate modulus and `1/D_{m,n}` only rescales.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angle::ExternalAngle;
use crate::error::{DynError, Result};
use crate::polyseq::{SeqCache, SequenceSpec, OVERFLOW_MODULUS};

/// Leading coefficients must be this close to 1.
pub const MONIC_TOL: f64 = 1e-12;
pub const DEFAULT_HORIZON: u64 = 1000;
/// Smallest potential accepted by [`inverse_bottcher`].
pub const MIN_WORKABLE_POTENTIAL: f64 = 1e-4;
const MAX_LEVEL: u64 = 4000;
const NEWTON_ITERS: usize = 40;
const STEP_CONVERGED: f64 = 1e-14;
const STEP_NOISE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialResult {
    pub green: f64,
    pub bottcher: Complex64,
    /// Steps until the orbit first exceeded R_0.
    pub n_escape: u64,
    /// Steps of correction factors included.
    pub n_used: u64,
    /// `|last correction factor - 1|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayPoint {
    pub z: Complex64,
    pub potential: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenValue {
    pub value: f64,
    pub n_escape: u64,
    pub n_used: u64,
}

fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// `G_m(z)`, or `None` when the orbit stays within R_0 for `horizon` steps.
pub fn green(spec: &SequenceSpec, m: u64, z: Complex64, horizon: u64) -> Result<Option<GreenValue>> {
    let mut f = Field::new(spec, m)?;
    f.green(z, horizon)
}

/// Böttcher coordinate `phi_m(z)`, or `None` when `z` does not escape within `horizon` steps.
pub fn bottcher(spec: &SequenceSpec, m: u64, z: Complex64, horizon: u64) -> Result<Option<PotentialResult>> {
    let mut f = Field::new(spec, m)?;
    f.bottcher(z, horizon)
}

/// `psi_m(w)`: the point with `phi_m(z) = w`, by continuation from `|w| = 4 R_0`.
pub fn inverse_bottcher(spec: &SequenceSpec, m: u64, w: Complex64, tol: f64) -> Result<Complex64> {
    let t = w.norm().ln();
    if !(t >= MIN_WORKABLE_POTENTIAL) {
        return Err(DynError::InvalidInput(format!(
            "inverse_bottcher needs log|w| >= {MIN_WORKABLE_POTENTIAL}, got {t}"
        )));
    }
    let mut f = Field::new(spec, m)?;
    let theta = AngleTarget::Float((w.arg() / TAU).rem_euclid(1.0));
    let t_far = (4.0 * f.r0).ln();
    let z_far = Complex64::from_polar(4.0 * f.r0, w.arg());
    let mut z = f
        .solve_anchored(t_far, &theta, z_far)
        .ok_or(DynError::ContinuationStall { potential: t_far })?
        .z;
    let shrink: f64 = 0.65;
    let mut tc = t_far;
    let mut prev_gap = None;
    while (tc - t).abs() > 0.0 {
        let next = if t < tc { (tc * shrink).max(t) } else { (tc / shrink).min(t) };
        let zn = f.step(&theta, z, tc, next, prev_gap, 0).ok_or(DynError::ContinuationStall { potential: next })?;
        prev_gap = Some(((zn - z).norm(), (tc / next).ln().abs()));
        z = zn;
        tc = next;
    }
    let check = f.bottcher(z, DEFAULT_HORIZON)?;
    if let Some(r) = check {
        if (r.bottcher - w).norm() > tol * w.norm() {
            // one more correction at the final potential
            let again = f.solve_anchored(t, &theta, z).ok_or(DynError::ContinuationStall { potential: t })?;
            return Ok(again.z);
        }
    }
    Ok(z)
}

/// A target argument, exact or floating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AngleTarget {
    Exact(ExternalAngle),
    Float(f64),
}

impl AngleTarget {
    pub fn turns(&self) -> f64 {
        match self {
            AngleTarget::Exact(a) => a.turns(),
            AngleTarget::Float(x) => *x,
        }
    }

    fn times(&self, d: usize) -> AngleTarget {
        match self {
            AngleTarget::Exact(a) => AngleTarget::Exact(a.times(d as u64)),
            AngleTarget::Float(x) => AngleTarget::Float((x * d as f64).rem_euclid(1.0)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Eval {
    /// `log phi_n(Q_{m,n}(z))`, equal to `D_{m,n} log phi_m(z)` modulo `2 pi i`.
    pub log_phi: Complex64,
    /// `d/dz log phi_m(z)`.
    pub dlog: Complex64,
    pub residual: f64,
    pub n_used: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct Solved {
    pub z: Complex64,
    /// Length of the first Newton step.
    pub predicted: f64,
}

/// Evaluation state for one sequence and time index.
pub struct Field<'a> {
    cache: SeqCache<'a>,
    m: u64,
    pub r0: f64,
    /// Level threshold: `D_{m,n} t >= tstar`.
    pub tstar: f64,
    /// `ln D_{m,m+j}`.
    log_d: Vec<f64>,
    checked: u64,
    pub subdivisions: u64,
}

impl<'a> Field<'a> {
    pub fn new(spec: &'a SequenceSpec, m: u64) -> Result<Self> {
        let r0 = spec.escape_radius();
        Ok(Field {
            cache: SeqCache::new(spec),
            m,
            r0,
            tstar: 2.0 * (r0.ln() + 1.0),
            log_d: vec![0.0],
            checked: 0,
            subdivisions: 0,
        })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// Ensure `P_{m+1} ..= P_n` exist and are monic.
    fn ensure(&mut self, n: u64) -> Result<()> {
        if n <= self.checked {
            return Ok(());
        }
        self.cache.ensure(n)?;
        for k in self.checked.max(self.m) + 1..=n {
            let p = self.cache.get(k);
            if !p.is_monic(MONIC_TOL) {
                let lead = p.lead();
                return Err(DynError::NonMonic { m: k, lead_re: lead.re, lead_im: lead.im });
            }
        }
        self.checked = n;
        Ok(())
    }

    fn ensure_level(&mut self, j: u64) -> Result<()> {
        self.ensure(self.m + j)?;
        while (self.log_d.len() as u64) <= j {
            let k = self.m + self.log_d.len() as u64;
            let d = self.cache.get(k).degree() as f64;
            let last = *self.log_d.last().unwrap();
            self.log_d.push(last + d.ln());
        }
        Ok(())
    }

    /// Smallest `j` with `D_{m,m+j} t >= tstar`.
    pub fn level_for(&mut self, t: f64) -> Option<u64> {
        let target = (self.tstar / t).ln();
        let mut j = 0;
        loop {
            if self.ensure_level(j).is_err() {
                return None;
            }
            if self.log_d[j as usize] >= target {
                return Some(j);
            }
            j += 1;
            if j > MAX_LEVEL {
                return None;
            }
        }
    }

    /// Bound on `|log(1 + u)|` and `|w u' / (1 + u)|` for any in-bounds monic map at `|w|`.
    fn tail_bound(&self, w: f64) -> f64 {
        let b = self.cache.spec().bounds.m / (w - 1.0);
        if w > 1.0 && b < 0.5 {
            2.0 * b
        } else {
            f64::INFINITY
        }
    }

    fn degree(&self, k: u64) -> usize {
        self.cache.get(k).degree()
    }

    pub fn d_times(&self, j: u64, t: f64) -> f64 {
        (self.log_d[j as usize] + t.ln()).exp()
    }

    pub fn inv_d(&self, j: u64) -> f64 {
        (-self.log_d[j as usize]).exp()
    }

    /// Lifted log-Böttcher at level `m + j`; `None` if the orbit is not past R_0 there.
    /// Corrections stop at absolute index `cap` when given.
    pub fn eval(&mut self, z: Complex64, j: u64, cap: Option<u64>) -> Option<Eval> {
        self.ensure_level(j).ok()?;
        let n = self.m + j;
        let mut w = z;
        let mut g = Complex64::new(1.0, 0.0);
        for k in self.m + 1..=n {
            let p = self.cache.get(k);
            let (pw, dpw) = p.eval_with_derivative(w);
            g *= dpw / p.degree() as f64;
            w = pw;
            if !(w.norm() <= OVERFLOW_MODULUS) {
                return None;
            }
        }
        if !(w.norm() > self.r0) || !g.re.is_finite() || !g.im.is_finite() {
            return None;
        }
        let wn = w;
        let mut sum = Complex64::new(0.0, 0.0);
        let mut dsum = Complex64::new(0.0, 0.0);
        let mut lambda = Complex64::new(1.0, 0.0);
        let mut inv = 1.0;
        let mut residual = 0.0;
        let mut k = n;
        loop {
            if cap.map_or(false, |c| k >= c) || w.norm() > OVERFLOW_MODULUS || self.tail_bound(w.norm()) < 1e-18 {
                break;
            }
            if self.ensure(k + 1).is_err() {
                break;
            }
            k += 1;
            let p = self.cache.get(k);
            let d = p.degree() as f64;
            let (u, du) = p.tail_ratio_with_derivative(w);
            let one_u = 1.0 + u;
            inv /= d;
            let term = one_u.ln() * inv;
            sum += term;
            let wdu = w * du / (one_u * d);
            dsum += wdu * lambda;
            lambda *= 1.0 + wdu;
            residual = (term.exp() - 1.0).norm();
            w = p.eval(w);
        }
        let log_phi = wn.ln() + sum;
        let dlog = (1.0 + dsum) / wn * g;
        Some(Eval { log_phi, dlog, residual, n_used: k - self.m })
    }

    /// Newton on `log phi_{m+j}(Q(z)) = target` in log-z coordinates.
    ///
    /// Rounding in the lifted residual grows like `D_{m,m+j}`, so convergence is judged
    /// on the relative step `|dz / z|` rather than on the residual.
    pub fn newton(&mut self, j: u64, target: Complex64, seed: Complex64) -> Option<Solved> {
        let inv_d = self.inv_d(j);
        let mut z = seed;
        let mut ev = self.eval(z, j, None)?;
        let resid = |e: &Eval| {
            let r = e.log_phi - target;
            Complex64::new(r.re, wrap_pi(r.im))
        };
        let mut r = resid(&ev);
        let mut predicted = None;
        let mut last_step = f64::INFINITY;
        for _ in 0..NEWTON_ITERS {
            if z.norm() == 0.0 {
                return None;
            }
            let st = r * inv_d / (ev.dlog * z);
            if !st.re.is_finite() || !st.im.is_finite() {
                return None;
            }
            if predicted.is_none() {
                predicted = Some((z * st).norm());
            }
            last_step = st.norm();
            if last_step < STEP_CONVERGED {
                break;
            }
            let mut scale = 1.0;
            let mut accepted = None;
            for _ in 0..8 {
                let cand = z * (-(st * scale)).exp();
                if let Some(e) = self.eval(cand, j, None) {
                    let rc = resid(&e);
                    if rc.norm() < r.norm() {
                        accepted = Some((cand, e, rc));
                        break;
                    }
                }
                scale *= 0.5;
            }
            match accepted {
                Some((cand, e, rc)) => {
                    z = cand;
                    ev = e;
                    r = rc;
                }
                None => break,
            }
        }
        if last_step <= STEP_NOISE || r.norm() <= 1e-12 {
            Some(Solved { z, predicted: predicted.unwrap_or(0.0) })
        } else {
            None
        }
    }

    /// Target angle pushed to level `j`.
    pub fn angle_at(&mut self, theta: &AngleTarget, j: u64) -> AngleTarget {
        let mut a = *theta;
        for k in self.m + 1..=self.m + j {
            a = a.times(self.degree(k));
        }
        a
    }

    /// Solve `G_m = t`, `arg phi_m = 2 pi theta` from a seed.
    pub fn solve_anchored(&mut self, t: f64, theta: &AngleTarget, seed: Complex64) -> Option<Solved> {
        let j = self.level_for(t)?;
        let a = self.angle_at(theta, j);
        let target = Complex64::new(self.d_times(j, t), TAU * a.turns());
        self.newton(j, target, seed)
    }

    /// Move along the ray of angle `theta` from potential `ta` (at `z`) to `tb`, subdividing
    /// the potential step on failure. `prev` is the previous step's (length, |log ratio|).
    pub fn step(
        &mut self,
        theta: &AngleTarget,
        z: Complex64,
        ta: f64,
        tb: f64,
        prev: Option<(f64, f64)>,
        depth: u32,
    ) -> Option<Complex64> {
        if let Some(s) = self.solve_anchored(tb, theta, z) {
            let moved = (s.z - z).norm();
            let span = (ta / tb).ln().abs();
            let by_history = prev.map_or(f64::INFINITY, |(g, l)| if l > 0.0 { 2.0 * g * span / l } else { f64::INFINITY });
            let slack = 1e-12 * z.norm().max(1.0);
            let ok = moved <= 6.0 * s.predicted + slack && (moved <= by_history.max(2.0 * s.predicted) + slack);
            if ok {
                return Some(s.z);
            }
        }
        if depth >= 12 {
            return None;
        }
        self.subdivisions += 1;
        let mid = (ta * tb).sqrt();
        let zm = self.step(theta, z, ta, mid, prev, depth + 1)?;
        self.step(theta, zm, mid, tb, prev, depth + 1)
    }

    /// Move along the field line through `z` from potential `ta` to `tb` keeping `arg phi_m` fixed.
    fn step_relative(&mut self, z: Complex64, ta: f64, tb: f64, depth: u32) -> Option<Complex64> {
        let attempt = (|| {
            let j = self.level_for(ta.min(tb))?;
            let here = self.eval(z, j, None)?;
            let target = here.log_phi + Complex64::new(self.d_times(j, tb) - self.d_times(j, ta), 0.0);
            let s = self.newton(j, target, z)?;
            let moved = (s.z - z).norm();
            if moved <= 6.0 * s.predicted + 1e-12 * z.norm().max(1.0) {
                Some(s.z)
            } else {
                None
            }
        })();
        if attempt.is_some() {
            return attempt;
        }
        if depth >= 16 {
            return None;
        }
        self.subdivisions += 1;
        let mid = (ta * tb).sqrt();
        let zm = self.step_relative(z, ta, mid, depth + 1)?;
        self.step_relative(zm, mid, tb, depth + 1)
    }

    pub fn green(&mut self, z: Complex64, horizon: u64) -> Result<Option<GreenValue>> {
        self.ensure(self.m + 1)?;
        let mut w = z;
        let mut k = self.m;
        let mut inv = 1.0f64;
        while w.norm() <= self.r0 {
            if k - self.m >= horizon {
                return Ok(None);
            }
            self.ensure(k + 1)?;
            k += 1;
            let p = self.cache.get(k);
            inv /= p.degree() as f64;
            w = p.eval(w);
        }
        if !w.re.is_finite() || !w.im.is_finite() {
            return Err(DynError::InvalidInput("non-finite point".into()));
        }
        let n_escape = k - self.m;
        let mut t = inv * w.norm().ln();
        while k - self.m < horizon && w.norm() <= OVERFLOW_MODULUS {
            if 0.5 * inv * self.tail_bound(w.norm()) <= 1e-14 * t.abs().max(1e-300) {
                break;
            }
            self.ensure(k + 1)?;
            k += 1;
            let p = self.cache.get(k);
            let u = p.tail_ratio(w);
            inv /= p.degree() as f64;
            let inc = inv * (1.0 + u).norm().ln();
            t += inc;
            w = p.eval(w);
        }
        Ok(Some(GreenValue { value: t, n_escape, n_used: k - self.m }))
    }

    pub fn bottcher(&mut self, z: Complex64, horizon: u64) -> Result<Option<PotentialResult>> {
        let g = match self.green(z, horizon)? {
            Some(g) => g,
            None => return Ok(None),
        };
        let cap = Some(self.m + horizon);
        if g.n_escape == 0 {
            let ev = self.eval(z, 0, cap).ok_or(DynError::BranchLoss { re: z.re, im: z.im })?;
            let phi = ev.log_phi.exp();
            return Ok(Some(PotentialResult {
                green: ev.log_phi.re,
                bottcher: phi,
                n_escape: 0,
                n_used: ev.n_used,
                residual: ev.residual,
            }));
        }
        let loss = DynError::BranchLoss { re: z.re, im: z.im };
        let t0 = g.value;
        // Ascend along the field line until phi_m is principal.
        let t_top = self.tstar.max(t0);
        let mut zc = z;
        let mut tc = t0;
        while tc < t_top {
            let next = (tc / 0.65).min(t_top);
            zc = self.step_relative(zc, tc, next, 0).ok_or(loss.clone())?;
            tc = next;
        }
        let top = self.eval(zc, 0, None).ok_or(loss.clone())?;
        let arg_top = top.log_phi.im;
        let j = self.level_for(t0).ok_or(loss.clone())?;
        let ev = self.eval(z, j, cap).ok_or(loss)?;
        let inv_d = self.inv_d(j);
        let base = ev.log_phi.im * inv_d;
        let d = self.d_times(j, 1.0);
        let arg = if d < 1e12 {
            let k = ((arg_top - base) * d / TAU).round();
            base + TAU * k * inv_d
        } else {
            arg_top
        };
        let green = ev.log_phi.re * inv_d;
        Ok(Some(PotentialResult {
            green,
            bottcher: Complex64::from_polar(green.exp(), arg),
            n_escape: g.n_escape,
            n_used: ev.n_used,
            residual: ev.residual,
        }))
    }
}
