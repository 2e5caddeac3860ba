//! Heuristic hyperbolicity certificates: Julia samples, postcritical distance,
//! expansion constants and doubling time.
//!
//! Every quantity is a finite-horizon estimate on finite samples; a `Pass` is
//! evidence, not a proof.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::ExternalAngle;
use crate::cloud::{max_nearest_gap, nearest_distance};
use crate::error::{DynError, Result};
use crate::polyseq::{escape_time_cached, PolySpec, SeqCache, SequenceSpec};
use crate::rays::{trace_ray, RayConfig, RayStatus};
use crate::roots::{polynomial_roots, relative_residual};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleMethod {
    /// Landing points of `count` equally spaced angles.
    RayLandings { count: usize },
    /// Boundary points between bounded and escaping vertices of a `grid x grid` lattice over `|z| <= R_0`.
    Bisection { grid: usize },
    /// Union of both.
    Combined { count: usize, grid: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JuliaSample {
    pub m: u64,
    pub points: Vec<Complex64>,
    pub method: SampleMethod,
    /// Largest nearest-neighbour distance in the sample.
    pub quality: f64,
    /// Rays that ended as `Diverged` (ray methods only).
    pub diverged: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub method: SampleMethod,
    /// Escape horizon used to call a point bounded.
    pub horizon: u64,
    /// Bisection stops below this segment length.
    pub refine_tol: f64,
    pub ray: RayConfig,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            method: SampleMethod::Combined { count: 128, grid: 160 },
            horizon: 500,
            refine_tol: 1e-12,
            ray: RayConfig::default(),
        }
    }
}

/// Ray-landing sample of `count` equally spaced angles.
pub fn julia_sample(spec: &SequenceSpec, m: u64, count: usize, horizon: u64) -> Result<JuliaSample> {
    let cfg = SampleConfig { method: SampleMethod::RayLandings { count }, horizon, ..SampleConfig::default() };
    julia_sample_with(spec, m, &cfg)
}

pub fn julia_sample_with(spec: &SequenceSpec, m: u64, cfg: &SampleConfig) -> Result<JuliaSample> {
    let (count, grid) = match cfg.method {
        SampleMethod::RayLandings { count } => (count, 0),
        SampleMethod::Bisection { grid } => (0, grid),
        SampleMethod::Combined { count, grid } => (count, grid),
    };
    if count == 0 && grid == 0 {
        return Err(DynError::InvalidInput("julia_sample needs count >= 1 or grid >= 2".into()));
    }
    let mut points = Vec::new();
    let mut diverged = 0;
    if count > 0 {
        let (pts, div) = ray_landing_points(spec, m, count, &cfg.ray)?;
        if div * 20 > count {
            return Err(DynError::SamplingFailed { diverged: div, total: count });
        }
        points.extend(pts);
        diverged = div;
    }
    if grid > 0 {
        points.extend(bisection_points(spec, m, grid.max(2), cfg.horizon, cfg.refine_tol)?);
    }
    let quality = max_nearest_gap(&points);
    Ok(JuliaSample { m, points, method: cfg.method, quality, diverged })
}

fn ray_landing_points(spec: &SequenceSpec, m: u64, count: usize, cfg: &RayConfig) -> Result<(Vec<Complex64>, usize)> {
    let traces: Vec<_> = (0..count)
        .into_par_iter()
        .map(|k| trace_ray(spec, m, ExternalAngle::new(k as u64, count as u64), cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut pts = Vec::with_capacity(count);
    let mut diverged = 0;
    for t in traces {
        match t.status {
            RayStatus::Diverged => diverged += 1,
            _ => {
                if let Some(p) = t.endpoint() {
                    pts.push(p);
                }
            }
        }
    }
    Ok((pts, diverged))
}

/// Boundary witnesses on lattice edges whose endpoints classify differently.
/// Each returned point is bounded at `horizon` and lies within `tol` of an escaping point.
pub fn bisection_points(spec: &SequenceSpec, m: u64, grid: usize, horizon: u64, tol: f64) -> Result<Vec<Complex64>> {
    let r0 = spec.escape_radius();
    let mut base = SeqCache::new(spec);
    base.ensure(m + horizon)?;
    let h = 2.0 * r0 / (grid - 1) as f64;
    let at = |i: usize, j: usize| Complex64::new(-r0 + i as f64 * h, -r0 + j as f64 * h);
    let bounded: Vec<Vec<bool>> = (0..grid)
        .into_par_iter()
        .map_init(
            || base.clone(),
            |cache, j| {
                (0..grid)
                    .map(|i| !escape_time_cached(cache, m, at(i, j), r0, horizon).map(|e| e.escaped()).unwrap_or(true))
                    .collect()
            },
        )
        .collect();
    let mut edges = Vec::new();
    for j in 0..grid {
        for i in 0..grid {
            if i + 1 < grid && bounded[j][i] != bounded[j][i + 1] {
                edges.push(((i, j), (i + 1, j)));
            }
            if j + 1 < grid && bounded[j][i] != bounded[j + 1][i] {
                edges.push(((i, j), (i, j + 1)));
            }
        }
    }
    let pts = edges
        .par_iter()
        .map_init(
            || base.clone(),
            |cache, &(a, b)| {
                let (mut inside, mut outside) =
                    if bounded[a.1][a.0] { (at(a.0, a.1), at(b.0, b.1)) } else { (at(b.0, b.1), at(a.0, a.1)) };
                while (inside - outside).norm() > tol {
                    let mid = (inside + outside) * 0.5;
                    let esc = escape_time_cached(cache, m, mid, r0, horizon).map(|e| e.escaped()).unwrap_or(true);
                    if esc {
                        outside = mid;
                    } else {
                        inside = mid;
                    }
                }
                inside
            },
        )
        .collect();
    Ok(pts)
}

/// Critical points of one polynomial (degree at most 5).
pub fn critical_points(p: &PolySpec) -> Result<Vec<Complex64>> {
    if p.degree() > 5 {
        return Err(DynError::DegreeCap { degree: p.degree() });
    }
    let dp = p.derivative_coeffs();
    let roots = polynomial_roots(&dp);
    for z in &roots {
        let r = relative_residual(&dp, *z);
        if r > 1e-12 {
            return Err(DynError::InvalidInput(format!("critical point residual {r} at {z}")));
        }
    }
    Ok(roots)
}

/// Estimated postcritical distance: min over `m <= m_max < n <= n_max` of the distance from
/// `C_{m,n} = U_{k=m+1..n} Q_{k,n}(critical values of P_k)` to the sample at time `n`.
pub fn postcritical_distance<'s>(
    spec: &SequenceSpec,
    m_max: u64,
    n_max: u64,
    samples: &dyn Fn(u64) -> &'s [Complex64],
) -> Result<f64> {
    let mut cache = SeqCache::new(spec);
    cache.ensure(n_max)?;
    // (origin k, current point at time n)
    let mut post: Vec<(u64, Complex64)> = Vec::new();
    let mut best = f64::INFINITY;
    for n in 1..=n_max {
        let p = cache.get(n).clone();
        for (_, v) in post.iter_mut() {
            *v = p.eval(*v);
        }
        post.retain(|(_, v)| v.norm() < 1e12);
        for c in critical_points(&p)? {
            post.push((n, p.eval(c)));
        }
        let sample = samples(n);
        if sample.is_empty() {
            return Err(DynError::InvalidInput(format!("empty Julia sample at time {n}")));
        }
        for m in 0..=m_max.min(n - 1) {
            for (k, v) in &post {
                if *k > m {
                    best = best.min(nearest_distance(sample, *v));
                }
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub c: f64,
    pub mu: f64,
    /// `e_i` for `i = 1 ..= i_max`.
    pub e: Vec<f64>,
}

/// `min_{m,z} log |Q'_{m,m+i}(z)|` for `i = 1 ..= upto`.
pub fn min_log_derivatives(spec: &SequenceSpec, samples: &[(u64, &[Complex64])], upto: usize) -> Result<Vec<f64>> {
    let max_m = samples.iter().map(|s| s.0).max().unwrap_or(0);
    let mut base = SeqCache::new(spec);
    base.ensure(max_m + upto as u64)?;
    let pairs: Vec<(u64, Complex64)> = samples.iter().flat_map(|(m, pts)| pts.iter().map(move |z| (*m, *z))).collect();
    if pairs.is_empty() {
        return Err(DynError::InvalidInput("no samples".into()));
    }
    let mins = pairs
        .par_iter()
        .map(|&(m, z)| {
            let mut out = vec![0.0; upto];
            let mut w = z;
            let mut acc = 0.0;
            for (i, slot) in out.iter_mut().enumerate() {
                let (pw, dpw) = base.get(m + i as u64 + 1).eval_with_derivative(w);
                acc += dpw.norm().ln();
                *slot = acc;
                w = pw;
            }
            out
        })
        .reduce(
            || vec![f64::INFINITY; upto],
            |a, b| a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect(),
        );
    Ok(mins)
}

/// Fit `e_i >= log C + i log mu`: least squares, then shifted down to a lower bound.
pub fn fit_expansion(e: &[f64]) -> Expansion {
    let n = e.len() as f64;
    let xs: Vec<f64> = (1..=e.len()).map(|i| i as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = e.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(e).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = xs.iter().zip(e).map(|(x, y)| y - slope * x).fold(f64::INFINITY, f64::min);
    Expansion { c: intercept.exp(), mu: slope.exp(), e: e.to_vec() }
}

pub fn expansion_constants(spec: &SequenceSpec, samples: &[(u64, &[Complex64])], i_max: usize) -> Result<Expansion> {
    Ok(fit_expansion(&min_log_derivatives(spec, samples, i_max)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    pub m_max: u64,
    pub n_max: u64,
    pub i_max: usize,
    pub n0_max: usize,
    pub delta_min: f64,
    pub mu_min: f64,
    pub sample: SampleConfig,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            m_max: 8,
            n_max: 24,
            i_max: 12,
            n0_max: 64,
            delta_min: 1e-3,
            mu_min: 1.02,
            sample: SampleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    Postcritical,
    Expansion,
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail(FailReason),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityCert {
    pub delta: f64,
    pub c: f64,
    pub mu: f64,
    pub n0: Option<usize>,
    pub horizons: (u64, u64, usize),
    /// Sample sizes by time index.
    pub samples: BTreeMap<u64, usize>,
    pub e: Vec<f64>,
    pub verdict: Verdict,
    pub config: CertifyConfig,
}

impl HyperbolicityCert {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Radius of the shadowing discs.
    pub fn disc_radius(&self) -> f64 {
        0.25 * self.delta
    }
}

/// Samples for times `0 ..= upto`, reusing one per residue class for periodic rules.
pub fn sample_times(spec: &SequenceSpec, upto: u64, cfg: &SampleConfig) -> Result<BTreeMap<u64, JuliaSample>> {
    let distinct: Vec<u64> = match spec.period() {
        Some(p) => (0..(p as u64).min(upto + 1)).collect(),
        None => (0..=upto).collect(),
    };
    let computed: Vec<JuliaSample> =
        distinct.par_iter().map(|&m| julia_sample_with(spec, m, cfg)).collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for n in 0..=upto {
        let src = match spec.period() {
            Some(p) => &computed[(n % p as u64) as usize],
            None => &computed[n as usize],
        };
        let mut s = src.clone();
        s.m = n;
        out.insert(n, s);
    }
    Ok(out)
}

pub fn certify(spec: &SequenceSpec, cfg: &CertifyConfig) -> Result<HyperbolicityCert> {
    if cfg.i_max == 0 || cfg.n_max == 0 || cfg.n0_max == 0 {
        return Err(DynError::InvalidInput("certify horizons must be positive".into()));
    }
    let upto = cfg.m_max.max(cfg.n_max);
    let samples = sample_times(spec, upto, &cfg.sample)?;
    let delta = postcritical_distance(spec, cfg.m_max, cfg.n_max, &|n| samples[&n].points.as_slice())?;
    let slices: Vec<(u64, &[Complex64])> = (0..=cfg.m_max).map(|m| (m, samples[&m].points.as_slice())).collect();
    let depth = cfg.i_max.max(cfg.n0_max);
    let mins = min_log_derivatives(spec, &slices, depth)?;
    let exp = fit_expansion(&mins[..cfg.i_max]);
    let two = 2f64.ln() - 1e-9;
    let n0 = mins.iter().position(|e| *e >= two).map(|i| i + 1);
    let verdict = if !(delta >= cfg.delta_min.max(1e-3)) {
        Verdict::Fail(FailReason::Postcritical)
    } else if !(exp.mu >= cfg.mu_min) || !(exp.mu > 1.0) {
        Verdict::Fail(FailReason::Expansion)
    } else if n0.map_or(true, |n| n > cfg.n0_max) {
        Verdict::Fail(FailReason::Doubling)
    } else {
        Verdict::Pass
    };
    Ok(HyperbolicityCert {
        delta,
        c: exp.c,
        mu: exp.mu,
        n0,
        horizons: (cfg.m_max, cfg.n_max, cfg.i_max),
        samples: samples.iter().map(|(k, v)| (*k, v.points.len())).collect(),
        e: exp.e,
        verdict,
        config: *cfg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn squaring_sample_is_roots_of_unity() {
        let s = julia_sample(&presets::squaring(), 0, 8, 500).unwrap();
        assert_eq!(s.points.len(), 8);
        for (k, p) in s.points.iter().enumerate() {
            let want = Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 8.0);
            assert!((p - want).norm() < 1e-8);
        }
    }

    #[test]
    fn bisection_points_are_boundary_witnesses() {
        let spec = presets::rabbit();
        let pts = bisection_points(&spec, 0, 40, 300, 1e-9).unwrap();
        assert!(!pts.is_empty());
        let r0 = spec.escape_radius();
        for p in pts.iter().take(50) {
            assert!(!crate::polyseq::escape_time(&spec, 0, *p, r0, 300).unwrap().escaped());
        }
    }

    #[test]
    fn critical_points_of_cubic() {
        // z^3 - 3z has critical points +-1
        let p = PolySpec::new(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(-3.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ])
        .unwrap();
        let mut c = critical_points(&p).unwrap();
        c.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((c[0] + 1.0).norm() < 1e-12 && (c[1] - 1.0).norm() < 1e-12);
        let big = PolySpec::unicritical(6, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
        assert!(matches!(critical_points(&big), Err(DynError::DegreeCap { degree: 6 })));
    }

    #[test]
    fn fit_is_a_lower_bound() {
        let e = [0.5, 1.4, 2.0, 2.9, 3.6];
        let f = fit_expansion(&e);
        for (i, v) in e.iter().enumerate() {
            assert!(f.c.ln() + (i as f64 + 1.0) * f.mu.ln() <= v + 1e-12);
        }
    }
}
