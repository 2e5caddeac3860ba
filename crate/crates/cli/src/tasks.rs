//! Task runners: each returns the report payload and writes its artifacts.

use nonauto::conjugation::{conjugate_sequence, max_lead_deviation, monic_rescale};
use nonauto::hyperbolicity::{certify, julia_sample_with};
use nonauto::motion::{certify_path, compare_motions, rigidity_check, ParamPath, PathConfig};
use nonauto::potential::{bottcher, green};
use nonauto::rays::{trace_rays, RayTrace};
use nonauto::render::{overlay_rays, render_escape, Viewport};
use nonauto::{Complex64, DynError, ExternalAngle, Rule, SequenceSpec};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{set_seed, ExperimentConfig, Task};
use crate::traces;

/// Failure of a task before its report could be written.
#[derive(Debug)]
pub enum TaskError {
    Numeric(DynError),
    Io(std::io::Error),
}

impl From<DynError> for TaskError {
    fn from(e: DynError) -> Self {
        TaskError::Numeric(e)
    }
}

impl From<std::io::Error> for TaskError {
    fn from(e: std::io::Error) -> Self {
        TaskError::Io(e)
    }
}

pub type TaskResult = Result<Value, TaskError>;

pub fn run_task(cfg: &ExperimentConfig) -> TaskResult {
    match cfg.task {
        Task::Render => render(cfg),
        Task::Green => green_task(cfg),
        Task::Bottcher => bottcher_task(cfg),
        Task::TraceRay => trace_ray_task(cfg),
        Task::Certify => certify_task(cfg),
        Task::Rigidity => rigidity_task(cfg),
        Task::Motion => motion_task(cfg),
        Task::Hausdorff => hausdorff_task(cfg),
        Task::ConjugateMonic => conjugate_task(cfg),
    }
}

fn render(cfg: &ExperimentConfig) -> TaskResult {
    let p = &cfg.render;
    let vp = Viewport::new(p.center, p.width, p.pixels)?;
    let r0 = p.radius.unwrap_or_else(|| cfg.spec.escape_radius());
    let mut raster = render_escape(&cfg.spec, cfg.m, &vp, p.horizon, r0)?;
    let mut rays = Vec::new();
    if !p.overlay.is_empty() {
        let traces = collect_traces(&cfg.spec, cfg.m, &p.overlay, &cfg.rays.config)?;
        rays = traces.iter().map(trace_summary).collect();
        raster = overlay_rays(raster, &traces)?;
    }
    let files = raster.write_all(&cfg.out, &p.stem).map_err(TaskError::Numeric)?;
    let ppm = raster.to_ppm();
    Ok(json!({
        "files": files.iter().map(|f| f.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "pixels": [raster.width(), raster.height()],
        "bounded_pixels": raster.bounded_count(),
        "bounded_area": raster.bounded_area(),
        "ppm_sha256": hex_digest(&ppm),
        "rays": rays,
        "meta": raster.meta,
    }))
}

fn hex_digest(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    format!("{:x}", Sha256::digest(bytes))
}

fn collect_traces(spec: &SequenceSpec, m: u64, angles: &[ExternalAngle], ray: &nonauto::rays::RayConfig) -> Result<Vec<RayTrace>, DynError> {
    trace_rays(spec, m, angles, ray).into_iter().collect()
}

fn trace_summary(t: &RayTrace) -> Value {
    json!({
        "theta": t.theta,
        "status": t.status,
        "landing": t.landing,
        "landing_radius": t.landing_radius,
        "points": t.points.len(),
        "subdivisions": t.subdivisions,
    })
}

fn green_task(cfg: &ExperimentConfig) -> TaskResult {
    let p = &cfg.points;
    let rows: Vec<Value> = p
        .points
        .par_iter()
        .map(|z| {
            Ok(match green(&cfg.spec, cfg.m, *z, p.horizon)? {
                Some(g) => json!({"z": z, "green": g.value, "n_escape": g.n_escape, "n_used": g.n_used}),
                None => json!({"z": z, "green": Value::Null, "bounded_through": p.horizon}),
            })
        })
        .collect::<Result<_, DynError>>()?;
    Ok(json!({ "m": cfg.m, "values": rows }))
}

fn bottcher_task(cfg: &ExperimentConfig) -> TaskResult {
    let p = &cfg.points;
    let rows: Vec<Value> = p
        .points
        .par_iter()
        .map(|z| {
            Ok(match bottcher(&cfg.spec, cfg.m, *z, p.horizon)? {
                Some(r) => json!({
                    "z": z, "phi": r.bottcher, "green": r.green,
                    "n_escape": r.n_escape, "n_used": r.n_used, "residual": r.residual,
                }),
                None => json!({"z": z, "phi": Value::Null, "bounded_through": p.horizon}),
            })
        })
        .collect::<Result<_, DynError>>()?;
    Ok(json!({ "m": cfg.m, "values": rows }))
}

fn trace_ray_task(cfg: &ExperimentConfig) -> TaskResult {
    let traces = collect_traces(&cfg.spec, cfg.m, &cfg.rays.angles, &cfg.rays.config)?;
    std::fs::create_dir_all(&cfg.out)?;
    let mut out = Vec::new();
    for t in &traces {
        let name = format!("ray_m{}_{}_{}.csv", cfg.m, t.theta.num(), t.theta.den());
        traces::write(&cfg.out.join(&name), &traces::rows(t))?;
        let mut s = trace_summary(t);
        s["csv"] = json!(name);
        out.push(s);
    }
    Ok(json!({ "m": cfg.m, "rays": out }))
}

fn certify_task(cfg: &ExperimentConfig) -> TaskResult {
    let cert = certify(&cfg.spec, &cfg.certify)?;
    Ok(json!({ "certificate": cert }))
}

fn probe_angles(dens: &[u64]) -> Vec<ExternalAngle> {
    let mut out: Vec<ExternalAngle> = Vec::new();
    for &q in dens {
        for k in 0..q {
            let a = ExternalAngle::new(k, q);
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
    out
}

fn rigidity_task(cfg: &ExperimentConfig) -> TaskResult {
    let p = &cfg.rigidity;
    let seeds: Vec<Option<u64>> =
        if p.seeds.is_empty() { vec![None] } else { p.seeds.iter().map(|s| Some(*s)).collect() };
    let probes = probe_angles(&p.probe_denominators);
    let runs: Vec<Value> = seeds
        .iter()
        .map(|seed| {
            let mut spec = cfg.spec.clone();
            if let Some(s) = seed {
                set_seed(&mut spec.rule, *s);
            }
            match rigidity_one(&spec, cfg, &probes) {
                Ok(v) => json!({ "seed": seed, "outcome": v }),
                Err(e) => json!({ "seed": seed, "error": e.name(), "message": e.to_string() }),
            }
        })
        .collect();
    let co_landed = runs.iter().filter(|r| r["outcome"]["co_landed"] == json!(true)).count();
    let certified = runs.iter().filter(|r| r["outcome"]["verdict"] == json!({"verdict": "pass"})).count();
    let payload = json!({
        "m": cfg.m,
        "angles": p.angles,
        "runs": runs,
        "summary": { "total": runs.len(), "co_landed": co_landed, "certified": certified },
    });
    Ok(payload)
}

fn rigidity_one(spec: &SequenceSpec, cfg: &ExperimentConfig, probes: &[ExternalAngle]) -> Result<Value, DynError> {
    let p = &cfg.rigidity;
    let cert = certify(spec, &cfg.certify)?;
    let r = rigidity_check(spec, cfg.m, &p.angles, probes, p.tol, &p.ray)?;
    Ok(json!({
        "verdict": cert.verdict,
        "delta": cert.delta,
        "mu": cert.mu,
        "c": cert.c,
        "n0": cert.n0,
        "point": r.group.point,
        "diameter": r.group.diameter,
        "extra_angles": r.extra,
        "co_landed": r.holds && r.group.diameter <= p.tol,
    }))
}

/// Path from `base` to `target`: generator slots when both are periodic with one period, else the first `horizon` maps.
pub fn motion_path(base: &SequenceSpec, target: &SequenceSpec, horizon: Option<u64>, max_step: f64) -> Result<ParamPath, DynError> {
    let generators = |r: &Rule| match r {
        Rule::Constant { poly } => Some(vec![poly.clone()]),
        Rule::Periodic { polys } => Some(polys.clone()),
        _ => None,
    };
    if let (None, Some(a), Some(b)) = (horizon, generators(&base.rule), generators(&target.rule)) {
        if a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.degree() == y.degree()) {
            let mut slots = Vec::new();
            let mut values = Vec::new();
            for (t, poly) in b.iter().enumerate() {
                for (i, c) in poly.coeffs().iter().enumerate() {
                    slots.push((t as u64 + 1, i));
                    values.push(*c);
                }
            }
            return ParamPath::generator_linear(base.clone(), slots, values, max_step);
        }
    }
    let h = horizon.ok_or_else(|| DynError::InvalidInput("motion.horizon is required for this pair of specs".into()))?;
    ParamPath::tail_perturbation(base, target, h, max_step)
}

fn motion_task(cfg: &ExperimentConfig) -> TaskResult {
    let p = cfg.motion.as_ref().expect("validated");
    let path = motion_path(&cfg.spec, &p.target, p.horizon, p.max_step)?;
    let cert = certify_path(&path, &cfg.certify)?;
    let pc = PathConfig { shadow: p.shadow, max_bisections: p.max_bisections };
    let report = compare_motions(&path, &cert, cfg.m, &p.angle_sets, p.tol, &p.ray, &pc)?;
    let agree = report.max_discrepancy() <= p.tol;
    Ok(json!({
        "pairs": report.pairs,
        "depth": report.depth,
        "subdivisions": report.subdivisions,
        "waypoints": path.waypoints.len(),
        "disc_radius": cert.disc_radius(),
        "doubling_time": cert.n0,
        "max_discrepancy": report.max_discrepancy(),
        "agree": agree,
    }))
}

fn hausdorff_task(cfg: &ExperimentConfig) -> TaskResult {
    let p = cfg.hausdorff.as_ref().expect("validated");
    let a = julia_sample_with(&cfg.spec, cfg.m, &p.sample)?;
    let b = julia_sample_with(&p.other, cfg.m, &p.sample)?;
    Ok(json!({
        "distance": nonauto::motion::hausdorff_distance(&a.points, &b.points),
        "sizes": [a.points.len(), b.points.len()],
        "quality": [a.quality, b.quality],
    }))
}

fn conjugate_task(cfg: &ExperimentConfig) -> TaskResult {
    let p = &cfg.conjugate;
    let conj = monic_rescale(&cfg.spec, p.m_max, p.horizon, p.tol)?;
    let monic = conjugate_sequence(&cfg.spec, &conj)?;
    let lead_dev = max_lead_deviation(&monic, p.m_max.max(1))?;
    let residual = conjugacy_residual(&cfg.spec, &monic, &conj, p.m_max, p.samples)?;
    Ok(json!({
        "alphas": conj.alphas.iter().take(p.m_max as usize + 1).collect::<Vec<_>>(),
        "horizon": conj.horizon,
        "tail_bound": conj.tail_bound,
        "identity": conj.is_identity(),
        "max_lead_deviation": lead_dev,
        "max_residual": residual,
        "conjugated": monic,
    }))
}

/// `max |P~_j(chi_{j-1}(z)) - chi_j(P_j(z))| / max(1, |chi_j(P_j(z))|)` over deterministic test points.
fn conjugacy_residual(
    spec: &SequenceSpec,
    monic: &SequenceSpec,
    conj: &nonauto::conjugation::MonicConjugacy,
    m_max: u64,
    samples: usize,
) -> Result<f64, DynError> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut worst = 0.0f64;
    for j in 1..=m_max.max(1) {
        let p = spec.polynomial_at(j)?;
        let q = monic.polynomial_at(j)?;
        for k in 0..samples {
            let r = 0.2 + 1.8 * (k as f64 + 0.5) / samples as f64;
            let z = Complex64::from_polar(r, golden * k as f64);
            let lhs = q.eval(conj.chi(j - 1, z)?);
            let rhs = conj.chi(j, p.eval(z))?;
            worst = worst.max((lhs - rhs).norm() / rhs.norm().max(1.0));
        }
    }
    Ok(worst)
}

/// First per-seed error recorded in a payload.
pub fn first_run_error(payload: &Value) -> Option<(String, String)> {
    payload["runs"].as_array()?.iter().find_map(|r| {
        let name = r["error"].as_str()?;
        Some((name.to_string(), r["message"].as_str().unwrap_or_default().to_string()))
    })
}
