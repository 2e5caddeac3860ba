//! Continuation of Julia-set points under parameter changes: backward shadowing,
//! ray-landing motion and Hausdorff drift.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::ExternalAngle;
use crate::error::{DynError, Result};
use crate::hyperbolicity::{certify, CertifyConfig, HyperbolicityCert};
use crate::polyseq::{PolySpec, Rule, SeqCache, SequenceSpec};
use crate::rays::{group_traces, trace_rays, LandingGroup, RayConfig, RayStatus, RayTrace};
use crate::roots::polynomial_roots;

pub use crate::cloud::hausdorff_distance;

/// Forward drift allowed before the base orbit is cut, as a fraction of the disc radius.
const DRIFT_FRACTION: f64 = 1e-2;
/// Largest shadowing depth in steps.
const MAX_DEPTH: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShadowConfig {
    /// The base orbit has length `depth_k * N0`, subject to the drift cap.
    pub depth_k: usize,
    /// Assumed error of the input point; sets the drift cap.
    pub point_tol: f64,
}

impl Default for ShadowConfig {
    fn default() -> Self {
        ShadowConfig { depth_k: 16, point_tol: 1e-10 }
    }
}

/// Orbit `z_0 = z, z_j = P_{m+j}(z_{j-1})` for `j <= depth_k * n0`, cut once
/// `point_tol * |Q'_{m,m+j}|` exceeds the drift budget.
pub fn base_orbit(
    spec: &SequenceSpec,
    m: u64,
    z: Complex64,
    n0: usize,
    radius: f64,
    cfg: &ShadowConfig,
) -> Result<Vec<Complex64>> {
    let want = (cfg.depth_k.max(1) * n0.max(1)).min(MAX_DEPTH);
    let mut cache = SeqCache::new(spec);
    cache.ensure(m + want as u64)?;
    let budget = DRIFT_FRACTION * radius;
    let eps = cfg.point_tol.max(f64::EPSILON * (1.0 + z.norm()));
    let mut orbit = vec![z];
    let mut w = z;
    let mut deriv = 1.0f64;
    for j in 1..=want {
        let (pw, dp) = cache.get(m + j as u64).eval_with_derivative(w);
        deriv *= dp.norm();
        if eps * deriv > budget && j > 1 {
            break;
        }
        w = pw;
        orbit.push(w);
    }
    Ok(orbit)
}

/// Pull `guide[K]` back along `spec` from time `m + K` to `m`, taking at every step
/// the unique preimage within `radius` of the guide point.
pub fn pull_back(spec: &SequenceSpec, m: u64, guide: &[Complex64], radius: f64) -> Result<Vec<Complex64>> {
    let k = guide.len() - 1;
    let mut cache = SeqCache::new(spec);
    cache.ensure(m + k as u64)?;
    let mut out = vec![Complex64::new(0.0, 0.0); k + 1];
    out[k] = guide[k];
    for j in (1..=k).rev() {
        let p = cache.get(m + j as u64);
        let mut coeffs = p.coeffs().to_vec();
        coeffs[0] -= out[j];
        let target = guide[j - 1];
        let roots = polynomial_roots(&coeffs);
        let mut inside = roots.iter().filter(|r| (*r - target).norm() <= radius);
        let first = inside.next().copied();
        if inside.next().is_some() {
            return Err(DynError::AmbiguousPreimage { step: m + j as u64 - 1 });
        }
        match first {
            Some(r) => out[j - 1] = polish_preimage(p, r, out[j]),
            None => {
                let nearest = roots.iter().map(|r| (r - target).norm()).fold(f64::INFINITY, f64::min);
                return Err(DynError::NoPreimageInDisc { step: m + j as u64 - 1, nearest, radius });
            }
        }
    }
    Ok(out)
}

fn polish_preimage(p: &PolySpec, mut x: Complex64, w: Complex64) -> Complex64 {
    for _ in 0..3 {
        let (v, d) = p.eval_with_derivative(x);
        if d.norm() == 0.0 {
            break;
        }
        let step = (v - w) / d;
        x -= step;
        if step.norm() <= 1e-17 * (1.0 + x.norm()) {
            break;
        }
    }
    x
}

/// Shadow of `z` (a point of `J_{spec0,m}`) in `J_{spec1,m}`.
pub fn shadow_conjugate(
    spec0: &SequenceSpec,
    spec1: &SequenceSpec,
    m: u64,
    z: Complex64,
    depth_k: usize,
    cert: &HyperbolicityCert,
) -> Result<Complex64> {
    let cfg = ShadowConfig { depth_k, ..ShadowConfig::default() };
    shadow_conjugate_with(spec0, spec1, m, z, cert, &cfg)
}

pub fn shadow_conjugate_with(
    spec0: &SequenceSpec,
    spec1: &SequenceSpec,
    m: u64,
    z: Complex64,
    cert: &HyperbolicityCert,
    cfg: &ShadowConfig,
) -> Result<Complex64> {
    let n0 = cert_n0(cert)?;
    let radius = cert.disc_radius();
    let guide = base_orbit(spec0, m, z, n0, radius, cfg)?;
    Ok(pull_back(spec1, m, &guide, radius)?[0])
}

fn cert_n0(cert: &HyperbolicityCert) -> Result<usize> {
    if !cert.passed() {
        return Err(DynError::InvalidInput(format!("shadowing needs a passing certificate, got {:?}", cert.verdict)));
    }
    cert.n0.ok_or_else(|| DynError::InvalidInput("certificate has no doubling time".into()))
}

/// `(k, z'(k))` for `k` in `ks`.
pub fn depth_sweep(
    spec0: &SequenceSpec,
    spec1: &SequenceSpec,
    m: u64,
    z: Complex64,
    cert: &HyperbolicityCert,
    ks: &[usize],
    point_tol: f64,
) -> Result<Vec<(usize, Complex64)>> {
    ks.iter()
        .map(|&k| {
            let cfg = ShadowConfig { depth_k: k, point_tol };
            Ok((k, shadow_conjugate_with(spec0, spec1, m, z, cert, &cfg)?))
        })
        .collect()
}

/// How slot times are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotMode {
    /// Slot `(t, i)` overrides coefficient i of `P_t` only.
    #[default]
    Prefix,
    /// Slot `(t, i)` overrides coefficient i of the t-th generating map of a Constant or Periodic base,
    /// so every time index in that residue class changes.
    Generator,
}

/// A piecewise-linear family varying finitely many `(time, coefficient index)` slots of a base spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPath {
    pub base: SequenceSpec,
    pub slots: Vec<(u64, usize)>,
    pub waypoints: Vec<Vec<Complex64>>,
    pub max_step: f64,
    #[serde(default)]
    pub mode: SlotMode,
}

impl ParamPath {
    pub fn new(base: SequenceSpec, slots: Vec<(u64, usize)>, waypoints: Vec<Vec<Complex64>>, max_step: f64) -> Result<Self> {
        let path = ParamPath { base, slots, waypoints, max_step, mode: SlotMode::Prefix };
        path.validate()?;
        Ok(path)
    }

    /// Path whose slots index the generating maps of a Constant or Periodic base.
    pub fn generator(base: SequenceSpec, slots: Vec<(u64, usize)>, waypoints: Vec<Vec<Complex64>>, max_step: f64) -> Result<Self> {
        let path = ParamPath { base, slots, waypoints, max_step, mode: SlotMode::Generator };
        path.validate()?;
        Ok(path)
    }

    /// Generator path along the segment from the base values to `target`.
    pub fn generator_linear(base: SequenceSpec, slots: Vec<(u64, usize)>, target: Vec<Complex64>, max_step: f64) -> Result<Self> {
        let waypoints = segment(&slot_values(&base, &slots)?, &target, max_step)?;
        Self::generator(base, slots, waypoints, max_step)
    }

    pub fn validate(&self) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(DynError::InvalidInput("path needs at least one waypoint".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(DynError::InvalidInput(format!("max_step must be positive, got {}", self.max_step)));
        }
        if self.mode == SlotMode::Generator {
            let p = self.base.period().ok_or_else(|| {
                DynError::InvalidInput("generator slots need a Constant or Periodic base".into())
            })?;
            if let Some(&(t, _)) = self.slots.iter().find(|s| s.0 as usize > p) {
                return Err(DynError::InvalidInput(format!("generator slot time {t} exceeds period {p}")));
            }
        }
        for &(t, i) in &self.slots {
            if t == 0 {
                return Err(DynError::InvalidInput("slot times start at 1".into()));
            }
            let deg = self.base.polynomial_at(t)?.degree();
            if i > deg {
                return Err(DynError::InvalidInput(format!("slot ({t}, {i}) beyond degree {deg}")));
            }
        }
        for (k, w) in self.waypoints.iter().enumerate() {
            if w.len() != self.slots.len() {
                return Err(DynError::InvalidInput(format!("waypoint {k} has {} values for {} slots", w.len(), self.slots.len())));
            }
            let spec = self.spec_at(w)?;
            for &(t, _) in &self.slots {
                spec.polynomial_at(t)?;
            }
            if k > 0 {
                let step = max_norm(&self.waypoints[k - 1], w);
                if step > self.max_step {
                    return Err(DynError::InvalidInput(format!("waypoints {} and {k} differ by {step} > {}", k - 1, self.max_step)));
                }
            }
        }
        Ok(())
    }

    /// Straight segment from the base values to `target` values, split so that steps are at most `max_step`.
    pub fn linear(base: SequenceSpec, slots: Vec<(u64, usize)>, target: Vec<Complex64>, max_step: f64) -> Result<Self> {
        let waypoints = segment(&slot_values(&base, &slots)?, &target, max_step)?;
        Self::new(base, slots, waypoints, max_step)
    }

    /// Path from `base` to `target` over all coefficients of the first `horizon` maps.
    pub fn tail_perturbation(base: &SequenceSpec, target: &SequenceSpec, horizon: u64, max_step: f64) -> Result<Self> {
        let mut slots = Vec::new();
        for t in 1..=horizon {
            for i in 0..=base.polynomial_at(t)?.degree() {
                slots.push((t, i));
            }
        }
        let values = slot_values(target, &slots)?;
        Self::linear(base.clone(), slots, values, max_step)
    }

    /// Base spec with the slot values replaced.
    pub fn spec_at(&self, values: &[Complex64]) -> Result<SequenceSpec> {
        if self.mode == SlotMode::Generator {
            let p = self.base.period().unwrap_or(1);
            let mut polys: Vec<PolySpec> = (1..=p as u64).map(|t| self.base.polynomial_at(t)).collect::<Result<_>>()?;
            override_slots(&mut polys, &self.slots, values)?;
            let rule = if p == 1 { Rule::Constant { poly: polys.remove(0) } } else { Rule::Periodic { polys } };
            return SequenceSpec::new(rule, self.base.bounds);
        }
        let top = self.slots.iter().map(|s| s.0).max().unwrap_or(0);
        let mut prefix: Vec<PolySpec> = (1..=top).map(|t| self.base.polynomial_at(t)).collect::<Result<_>>()?;
        override_slots(&mut prefix, &self.slots, values)?;
        let rule = Rule::PrefixThenTail { prefix, tail: Box::new(self.base.rule.clone()) };
        SequenceSpec::new(rule, self.base.bounds)
    }

    pub fn waypoint_spec(&self, k: usize) -> Result<SequenceSpec> {
        self.spec_at(&self.waypoints[k])
    }

    pub fn end(&self) -> Result<SequenceSpec> {
        self.waypoint_spec(self.waypoints.len() - 1)
    }
}

fn override_slots(polys: &mut [PolySpec], slots: &[(u64, usize)], values: &[Complex64]) -> Result<()> {
    for (&(t, i), v) in slots.iter().zip(values) {
        let poly = &mut polys[t as usize - 1];
        let mut coeffs = poly.coeffs().to_vec();
        coeffs[i] = *v;
        *poly = PolySpec::new(coeffs)?;
    }
    Ok(())
}

fn segment(start: &[Complex64], target: &[Complex64], max_step: f64) -> Result<Vec<Vec<Complex64>>> {
    if target.len() != start.len() {
        return Err(DynError::InvalidInput("target length differs from slot count".into()));
    }
    if !(max_step > 0.0) {
        return Err(DynError::InvalidInput(format!("max_step must be positive, got {max_step}")));
    }
    let pieces = (max_norm(start, target) / max_step).ceil().max(1.0) as usize;
    Ok((0..=pieces).map(|k| lerp(start, target, k as f64 / pieces as f64)).collect())
}

fn slot_values(spec: &SequenceSpec, slots: &[(u64, usize)]) -> Result<Vec<Complex64>> {
    slots
        .iter()
        .map(|&(t, i)| {
            let p = spec.polynomial_at(t)?;
            p.coeffs()
                .get(i)
                .copied()
                .ok_or_else(|| DynError::InvalidInput(format!("slot ({t}, {i}) beyond degree {}", p.degree())))
        })
        .collect()
}

fn max_norm(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn lerp(a: &[Complex64], b: &[Complex64], s: f64) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| x + (y - x) * s).collect()
}

/// Certificates of every waypoint, with the combined disc radius and doubling time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCert {
    pub certs: Vec<HyperbolicityCert>,
    pub delta: f64,
    pub n0: usize,
}

impl PathCert {
    pub fn disc_radius(&self) -> f64 {
        0.25 * self.delta
    }
}

pub fn certify_path(path: &ParamPath, cfg: &CertifyConfig) -> Result<PathCert> {
    let certs: Vec<HyperbolicityCert> = (0..path.waypoints.len())
        .into_par_iter()
        .map(|k| certify(&path.waypoint_spec(k)?, cfg))
        .collect::<Result<_>>()?;
    for (k, c) in certs.iter().enumerate() {
        if !c.passed() {
            return Err(DynError::PathNotContinuable {
                segment: k,
                cause: format!("waypoint {k} fails certification: {:?}", c.verdict),
            });
        }
    }
    let delta = certs.iter().map(|c| c.delta).fold(f64::INFINITY, f64::min);
    let n0 = certs.iter().filter_map(|c| c.n0).max().unwrap_or(1);
    Ok(PathCert { certs, delta, n0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub shadow: ShadowConfig,
    pub max_bisections: u32,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig { shadow: ShadowConfig::default(), max_bisections: 12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Continued {
    pub point: Complex64,
    /// Shadowing depth in steps.
    pub depth: usize,
    pub subdivisions: usize,
}

/// Continue `z` along `path` with the default certification and shadowing settings.
pub fn continue_along_path(path: &ParamPath, m: u64, z: Complex64, depth_k: usize) -> Result<Continued> {
    let cert = certify_path(path, &CertifyConfig::default())?;
    let cfg = PathConfig { shadow: ShadowConfig { depth_k, ..ShadowConfig::default() }, ..PathConfig::default() };
    continue_with(path, &cert, m, z, &cfg)
}

/// Fold the shadowing map over consecutive waypoints, bisecting segments whose step is too coarse.
/// Each segment uses the previous shadow orbit as its guide.
pub fn continue_with(path: &ParamPath, cert: &PathCert, m: u64, z: Complex64, cfg: &PathConfig) -> Result<Continued> {
    let radius = cert.disc_radius();
    let mut guide = base_orbit(&path.waypoint_spec(0)?, m, z, cert.n0, radius, &cfg.shadow)?;
    let mut subdivisions = 0;
    for seg in 1..path.waypoints.len() {
        let a = path.waypoints[seg - 1].clone();
        let b = path.waypoints[seg].clone();
        guide = advance(path, m, guide, &a, &b, radius, 0, cfg.max_bisections, seg - 1, &mut subdivisions)?;
    }
    Ok(Continued { point: guide[0], depth: guide.len() - 1, subdivisions })
}

#[allow(clippy::too_many_arguments)]
fn advance(
    path: &ParamPath,
    m: u64,
    guide: Vec<Complex64>,
    a: &[Complex64],
    b: &[Complex64],
    radius: f64,
    level: u32,
    max_level: u32,
    segment: usize,
    subdivisions: &mut usize,
) -> Result<Vec<Complex64>> {
    let spec = path.spec_at(b)?;
    match pull_back(&spec, m, &guide, radius) {
        Ok(orbit) => Ok(orbit),
        Err(e @ (DynError::AmbiguousPreimage { .. } | DynError::NoPreimageInDisc { .. })) => {
            if level >= max_level {
                return Err(DynError::PathNotContinuable { segment, cause: e.to_string() });
            }
            *subdivisions += 1;
            let mid = lerp(a, b, 0.5);
            let g = advance(path, m, guide, a, &mid, radius, level + 1, max_level, segment, subdivisions)?;
            advance(path, m, g, &mid, b, radius, level + 1, max_level, segment, subdivisions)
        }
        Err(e) => Err(e),
    }
}

/// Common landing point of `angles` under `spec1`, after checking that they co-land under `spec0`.
pub fn ray_landing_motion(
    spec0: &SequenceSpec,
    spec1: &SequenceSpec,
    m: u64,
    angles: &[ExternalAngle],
    tol: f64,
    cfg: &RayConfig,
) -> Result<Complex64> {
    if angles.is_empty() {
        return Err(DynError::InvalidInput("empty angle set".into()));
    }
    let base: Vec<RayTrace> = trace_rays(spec0, m, angles, cfg).into_iter().collect::<Result<_>>()?;
    let groups = group_traces(&base, tol)?;
    if groups.len() != 1 {
        return Err(DynError::InvalidInput(format!("angles land at {} points under the base spec", groups.len())));
    }
    let moved: Vec<RayTrace> = trace_rays(spec1, m, angles, cfg).into_iter().collect::<Result<_>>()?;
    common_landing(&moved, tol)
}

fn common_landing(traces: &[RayTrace], tol: f64) -> Result<Complex64> {
    let groups = match group_traces(traces, tol) {
        Ok(g) => g,
        Err(DynError::ClusterTooWide { .. }) => vec![],
        Err(e) => return Err(e),
    };
    if groups.len() == 1 {
        return Ok(groups[0].point);
    }
    let mut pairs = Vec::new();
    for (i, a) in traces.iter().enumerate() {
        for b in &traces[i + 1..] {
            let d = (a.landing.unwrap() - b.landing.unwrap()).norm();
            if d > tol {
                pairs.push((a.theta.to_string(), b.theta.to_string(), d));
            }
        }
    }
    Err(DynError::CoLandingBroken { pairs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPair {
    pub z: Complex64,
    pub shadow: Complex64,
    pub ray: Complex64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionReport {
    pub pairs: Vec<MotionPair>,
    pub path: ParamPath,
    pub depth: usize,
    pub subdivisions: usize,
}

impl MotionReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.pairs.iter().map(|p| p.discrepancy).fold(0.0, f64::max)
    }
}

/// Continue each landing point of `angle_sets` along `path` by shadowing and by rays, and compare.
pub fn compare_motions(
    path: &ParamPath,
    cert: &PathCert,
    m: u64,
    angle_sets: &[Vec<ExternalAngle>],
    tol: f64,
    ray_cfg: &RayConfig,
    cfg: &PathConfig,
) -> Result<MotionReport> {
    let spec0 = path.waypoint_spec(0)?;
    let spec1 = path.end()?;
    let mut pairs = Vec::new();
    let mut depth = 0;
    let mut subdivisions = 0;
    for angles in angle_sets {
        let base: Vec<RayTrace> = trace_rays(&spec0, m, angles, ray_cfg).into_iter().collect::<Result<_>>()?;
        let z = common_landing(&base, tol)?;
        let c = continue_with(path, cert, m, z, cfg)?;
        let ray = ray_landing_motion(&spec0, &spec1, m, angles, tol, ray_cfg)?;
        depth = depth.max(c.depth);
        subdivisions += c.subdivisions;
        pairs.push(MotionPair { z, shadow: c.point, ray, discrepancy: (c.point - ray).norm() });
    }
    Ok(MotionReport { pairs, path: path.clone(), depth, subdivisions })
}

/// Outcome of the co-landing check for one spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rigidity {
    /// Landing group containing the target angles.
    pub group: LandingGroup,
    /// Probe angles that joined the target group.
    pub extra: Vec<ExternalAngle>,
    pub holds: bool,
}

/// Checks that `angles` co-land within `tol` at time m and that no angle of `probes` joins them.
pub fn rigidity_check(
    spec: &SequenceSpec,
    m: u64,
    angles: &[ExternalAngle],
    probes: &[ExternalAngle],
    tol: f64,
    cfg: &RayConfig,
) -> Result<Rigidity> {
    if angles.is_empty() {
        return Err(DynError::InvalidInput("empty angle set".into()));
    }
    let mut all: Vec<ExternalAngle> = angles.to_vec();
    for p in probes {
        if !all.contains(p) {
            all.push(*p);
        }
    }
    let traces: Vec<RayTrace> = trace_rays(spec, m, &all, cfg).into_iter().collect::<Result<_>>()?;
    let target = common_landing(&traces[..angles.len()], tol)?;
    let near = |t: &RayTrace| t.landing.map_or(false, |p| (p - target).norm() <= tol + t.landing_radius);
    let unlanded: Vec<String> =
        traces.iter().filter(|t| t.status != RayStatus::Landed).map(|t| t.theta.to_string()).collect();
    if !unlanded.is_empty() {
        return Err(DynError::UnlandedRay { angles: unlanded });
    }
    let extra: Vec<ExternalAngle> = traces[angles.len()..].iter().filter(|t| near(t)).map(|t| t.theta).collect();
    let members: Vec<&RayTrace> = traces.iter().filter(|t| near(t)).collect();
    let mut diameter = 0.0f64;
    for a in &members {
        for b in &members {
            diameter = diameter.max((a.landing.unwrap() - b.landing.unwrap()).norm());
        }
    }
    let group = LandingGroup { angles: members.iter().map(|t| t.theta).collect(), point: target, diameter };
    Ok(Rigidity { holds: extra.is_empty(), group, extra })
}
