//! External rays: tracing, landing, co-landing groups and tail lengths.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::ExternalAngle;
use crate::error::{DynError, Result};
use crate::polyseq::{SeqCache, SequenceSpec};
use crate::potential::{AngleTarget, Field, RayPoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RayConfig {
    /// Starting potential; `None` means `ln(4 R_0)`.
    pub t_start: Option<f64>,
    /// Potential below which landing is estimated.
    pub t_min: f64,
    pub shrink: f64,
    /// Required landing radius for `Landed`.
    pub landing_tol: f64,
    /// Deepest potential attempted.
    pub t_floor: f64,
    pub max_points: usize,
}

impl Default for RayConfig {
    fn default() -> Self {
        RayConfig { t_start: None, t_min: 1e-5, shrink: 0.65, landing_tol: 1e-8, t_floor: 1e-250, max_points: 4000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RayStatus {
    Landed,
    Truncated,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayTrace {
    pub m: u64,
    pub theta: ExternalAngle,
    pub points: Vec<RayPoint>,
    pub landing: Option<Complex64>,
    pub landing_radius: f64,
    pub status: RayStatus,
    pub subdivisions: u64,
}

impl RayTrace {
    pub fn last(&self) -> Option<Complex64> {
        self.points.last().map(|p| p.z)
    }

    /// Landing estimate, or the deepest point when no estimate exists.
    pub fn endpoint(&self) -> Option<Complex64> {
        self.landing.or_else(|| self.last())
    }
}

/// `(estimate, radius)` from the geometric decay of the last five gaps.
fn landing_estimate(points: &[RayPoint]) -> Option<(Complex64, f64)> {
    if points.len() < 7 {
        return None;
    }
    let k = points.len() - 1;
    let gaps: Vec<f64> = (k - 5..k).map(|i| (points[i + 1].z - points[i].z).norm()).collect();
    let last = gaps[4];
    if last == 0.0 {
        return Some((points[k].z, 0.0));
    }
    if gaps[0] == 0.0 {
        return None;
    }
    let r = (last / gaps[0]).powf(0.25);
    if !(r < 1.0) {
        return None;
    }
    let top = gaps.iter().cloned().fold(0.0, f64::max);
    let factor = r / (1.0 - r);
    let delta = points[k].z - points[k - 1].z;
    Some((points[k].z + delta * factor, top * factor))
}

/// Trace `R_{theta,m}` down a geometric potential schedule.
pub fn trace_ray(spec: &SequenceSpec, m: u64, theta: ExternalAngle, cfg: &RayConfig) -> Result<RayTrace> {
    let mut field = Field::new(spec, m)?;
    let r0 = field.r0;
    let t_start = cfg.t_start.unwrap_or((4.0 * r0).ln());
    if !(t_start >= (2.0 * r0).ln() - 1e-12) || !(cfg.t_min > 0.0 && cfg.t_min < t_start) || !(cfg.shrink > 0.0 && cfg.shrink < 1.0)
    {
        return Err(DynError::InvalidInput(format!(
            "trace_ray needs t_start >= ln(2 R_0) = {}, 0 < t_min < t_start, 0 < shrink < 1",
            (2.0 * r0).ln()
        )));
    }
    // surface monic/bounds errors before tracing
    field.level_for(t_start.min(cfg.t_min)).ok_or(DynError::InvalidInput("level out of range".into()))?;
    SeqCache::new(spec).ensure(m + 1)?;
    let target = AngleTarget::Exact(theta);
    let turns = theta.turns();
    let seed = Complex64::from_polar(t_start.exp(), std::f64::consts::TAU * turns);
    let mut out = RayTrace {
        m,
        theta,
        points: Vec::new(),
        landing: None,
        landing_radius: f64::INFINITY,
        status: RayStatus::Diverged,
        subdivisions: 0,
    };
    let first = match field.solve_anchored(t_start, &target, seed) {
        Some(s) => s.z,
        None => return Ok(out),
    };
    out.points.push(RayPoint { z: first, potential: t_start, angle: turns });
    let span = -cfg.shrink.ln();
    let mut prev: Option<(f64, f64)> = None;
    let mut k = 0i32;
    loop {
        let last = *out.points.last().unwrap();
        k += 1;
        let t = t_start * cfg.shrink.powi(k);
        if t < cfg.t_floor || out.points.len() >= cfg.max_points {
            out.status = RayStatus::Truncated;
            break;
        }
        match field.step(&target, last.z, last.potential, t, prev, 0) {
            Some(z) => {
                prev = Some(((z - last.z).norm(), span));
                out.points.push(RayPoint { z, potential: t, angle: turns });
            }
            None => {
                out.status = RayStatus::Diverged;
                break;
            }
        }
        if t <= cfg.t_min {
            if let Some((l, r)) = landing_estimate(&out.points) {
                out.landing = Some(l);
                out.landing_radius = r;
                if r <= cfg.landing_tol {
                    out.status = RayStatus::Landed;
                    break;
                }
            }
        }
    }
    if out.status != RayStatus::Landed {
        if let Some((l, r)) = landing_estimate(&out.points) {
            out.landing = Some(l);
            out.landing_radius = r;
        }
    }
    out.subdivisions = field.subdivisions;
    Ok(out)
}

/// Trace many angles in parallel.
pub fn trace_rays(spec: &SequenceSpec, m: u64, angles: &[ExternalAngle], cfg: &RayConfig) -> Vec<Result<RayTrace>> {
    angles.par_iter().map(|a| trace_ray(spec, m, *a, cfg)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandingGroup {
    pub angles: Vec<ExternalAngle>,
    pub point: Complex64,
    pub diameter: f64,
}

/// Partition `angles` by landing point.
pub fn co_landing_groups(
    spec: &SequenceSpec,
    m: u64,
    angles: &[ExternalAngle],
    tol: f64,
    cfg: &RayConfig,
) -> Result<Vec<LandingGroup>> {
    let traces: Vec<RayTrace> = trace_rays(spec, m, angles, cfg).into_iter().collect::<Result<_>>()?;
    group_traces(&traces, tol)
}

/// Single-linkage clustering of landed traces with a diameter guard.
pub fn group_traces(traces: &[RayTrace], tol: f64) -> Result<Vec<LandingGroup>> {
    let unlanded: Vec<String> =
        traces.iter().filter(|t| t.status != RayStatus::Landed).map(|t| t.theta.to_string()).collect();
    if !unlanded.is_empty() {
        return Err(DynError::UnlandedRay { angles: unlanded });
    }
    let n = traces.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(p: &mut Vec<usize>, mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let li = traces[i].landing.unwrap();
            let lj = traces[j].landing.unwrap();
            if (li - lj).norm() <= tol + traces[i].landing_radius + traces[j].landing_radius {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = root(&mut parent, i);
        match groups.iter_mut().find(|(k, _)| *k == r) {
            Some((_, v)) => v.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    let mut out = Vec::new();
    for (_, members) in groups {
        let pts: Vec<Complex64> = members.iter().map(|&i| traces[i].landing.unwrap()).collect();
        let mut diameter = 0.0f64;
        for a in &pts {
            for b in &pts {
                diameter = diameter.max((a - b).norm());
            }
        }
        let angles: Vec<ExternalAngle> = members.iter().map(|&i| traces[i].theta).collect();
        if diameter > 3.0 * tol {
            return Err(DynError::ClusterTooWide {
                diameter,
                limit: 3.0 * tol,
                angles: angles.iter().map(|a| a.to_string()).collect(),
            });
        }
        let point = pts.iter().sum::<Complex64>() / pts.len() as f64;
        out.push(LandingGroup { angles, point, diameter });
    }
    Ok(out)
}

/// `D_{m,n} theta mod 1`.
pub fn pushforward_angle(spec: &SequenceSpec, m: u64, n: u64, theta: ExternalAngle) -> Result<ExternalAngle> {
    if m > n {
        return Err(DynError::InvalidInput(format!("pushforward_angle needs m <= n (m={m}, n={n})")));
    }
    let mut cache = SeqCache::new(spec);
    cache.ensure(n)?;
    Ok(theta.pushforward((m + 1..=n).map(|k| cache.get(k).degree() as u64)))
}

/// Polyline length of the trace below potential `from`, plus the landing radius when landed.
pub fn ray_tail_length(trace: &RayTrace, from: f64) -> f64 {
    let pts = &trace.points;
    let mut total = 0.0;
    for i in 0..pts.len().saturating_sub(1) {
        let (a, b) = (pts[i], pts[i + 1]);
        if a.potential <= from {
            total += (b.z - a.z).norm();
        } else if b.potential < from {
            // partial segment, proportional in log potential
            let f = (from / b.potential).ln() / (a.potential / b.potential).ln();
            total += f * (b.z - a.z).norm();
        }
    }
    if trace.status == RayStatus::Landed {
        total += trace.landing_radius;
    }
    total
}

/// Fit `l(t) <= C t^alpha` over schedule potentials in `[t_lo, t_hi]`:
/// least squares in log-log, then `C` raised so that every sample satisfies the bound.
pub fn fit_tail_bound(trace: &RayTrace, t_lo: f64, t_hi: f64) -> Option<(f64, f64)> {
    let samples: Vec<(f64, f64)> = trace
        .points
        .iter()
        .filter(|p| p.potential >= t_lo && p.potential <= t_hi)
        .map(|p| (p.potential.ln(), ray_tail_length(trace, p.potential).ln()))
        .collect();
    if samples.len() < 3 {
        return None;
    }
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.0).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.1).sum::<f64>() / n;
    let sxx: f64 = samples.iter().map(|s| (s.0 - mx).powi(2)).sum();
    let sxy: f64 = samples.iter().map(|s| (s.0 - mx) * (s.1 - my)).sum();
    let alpha = sxy / sxx;
    let log_c = samples.iter().map(|s| s.1 - alpha * s.0).fold(f64::NEG_INFINITY, f64::max);
    Some((log_c.exp(), alpha))
}
