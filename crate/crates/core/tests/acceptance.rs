use std::f64::consts::{LN_2, TAU};
use std::process::ExitCode;
use std::time::Instant;

use nonauto::conjugation::{conjugate_sequence, max_lead_deviation, monic_rescale};
use nonauto::hyperbolicity::{certify, julia_sample_with, CertifyConfig, SampleConfig, SampleMethod, Verdict};
use nonauto::motion::{
    continue_with, hausdorff_distance, ray_landing_motion, rigidity_check, ParamPath, PathCert, PathConfig,
    ShadowConfig,
};
use nonauto::polyseq::{compose_log_abs, escape_radius};
use nonauto::potential::{bottcher, green};
use nonauto::presets::{self, RABBIT_C};
use nonauto::rays::{fit_tail_bound, ray_tail_length, trace_ray, trace_rays, RayConfig, RayStatus};
use nonauto::{Bounds, Complex64, DynError, ExternalAngle, PolySpec, SequenceSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), DynError>;

fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rabbit_angles() -> Vec<ExternalAngle> {
    vec![ExternalAngle::new(1, 7), ExternalAngle::new(2, 7), ExternalAngle::new(4, 7)]
}

fn figure2_spec(seed: u64) -> SequenceSpec {
    presets::perturbed_quadratic(RABBIT_C, 0.06, seed, Some(12))
}

fn unit_disk(rng: &mut ChaCha8Rng, r: f64) -> Complex64 {
    loop {
        let z = cx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if z.norm_sqr() <= 1.0 {
            return z * r;
        }
    }
}

fn criterion_1() -> Outcome {
    let s = presets::squaring();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut g_err, mut phi_err) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let r = rng.gen_range(1.1..100.0);
        let z = Complex64::from_polar(r, rng.gen_range(0.0..TAU));
        let g = green(&s, 0, z, 1000)?.expect("escapes").value;
        g_err = g_err.max((g - r.ln()).abs());
        let phi = bottcher(&s, 0, z, 1000)?.expect("escapes").bottcher;
        phi_err = phi_err.max((phi - z).norm());
    }
    let mut ray_err = 0.0f64;
    for a in [ExternalAngle::ZERO, ExternalAngle::new(1, 7), ExternalAngle::new(1, 3), ExternalAngle::new(49, 100)] {
        let tr = trace_ray(&s, 0, a, &RayConfig::default())?;
        let land = tr.landing.unwrap_or(cx(f64::NAN, f64::NAN));
        ray_err = ray_err.max((land - Complex64::from_polar(1.0, TAU * a.turns())).norm());
    }
    let cert = certify(&s, &CertifyConfig::default())?;
    let ok = g_err <= 1e-10
        && phi_err <= 1e-10
        && ray_err <= 1e-8
        && (cert.delta - 1.0).abs() <= 1e-6
        && (cert.mu - 2.0).abs() <= 1e-6
        && cert.n0 == Some(1);
    Ok((
        ok,
        format!(
            "max|G-log|z||={g_err:.2e} max|phi-z|={phi_err:.2e} ray err={ray_err:.2e} delta={:.9} mu={:.9} N0={:?}",
            cert.delta, cert.mu, cert.n0
        ),
    ))
}

fn random_monic_spec(rng: &mut ChaCha8Rng) -> SequenceSpec {
    let m_bound = rng.gen_range(0.1..=1.0);
    let len = rng.gen_range(1..=3);
    let polys = (0..len)
        .map(|_| {
            let d = rng.gen_range(2..=3);
            let mut coeffs: Vec<Complex64> = (0..d).map(|_| unit_disk(rng, m_bound)).collect();
            coeffs.push(cx(1.0, 0.0));
            PolySpec::new(coeffs).unwrap()
        })
        .collect();
    SequenceSpec::periodic(polys, Bounds::new(3, 1.0, m_bound).unwrap()).unwrap()
}

/// Degrees `d_1..d_n` of the first n maps.
fn degrees(spec: &SequenceSpec, n: u64) -> Result<Vec<u64>, DynError> {
    (1..=n).map(|k| Ok(spec.polynomial_at(k)?.degree() as u64)).collect()
}

fn big_d(deg: &[u64], m: u64, n: u64) -> f64 {
    (m + 1..=n).map(|k| deg[k as usize - 1] as f64).product()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut sandwich, mut green_v, mut trunc) = (0usize, 0usize, 0usize);
    let (mut n_sandwich, mut n_green, mut n_trunc) = (0usize, 0usize, 0usize);
    let mut worst_trunc = f64::NEG_INFINITY;
    for _ in 0..20 {
        let spec = random_monic_spec(&mut rng);
        let r0 = escape_radius(&spec.bounds);
        let deg = degrees(&spec, 40)?;
        for i in 0..1000 {
            let m = rng.gen_range(0..6u64);
            let n = m + rng.gen_range(1..=6u64);
            let r = [r0, 2.0 * r0, 10.0 * r0][i % 3];
            let z = Complex64::from_polar(r, rng.gen_range(0.0..TAU));
            let dmn = big_d(&deg, m, n);
            let sum: f64 = (m + 1..=n).map(|i| big_d(&deg, i, n)).sum();
            let l = compose_log_abs(&spec, m, n, z)?;
            let lo = -(1.0 + sum) * LN_2 + dmn * r.ln();
            let hi = (1.0 + sum) * 1.5f64.ln() + dmn * r.ln();
            n_sandwich += 1;
            if l < lo - 1e-9 || l > hi + 1e-9 {
                sandwich += 1;
            }
            let g = green(&spec, m, z, 1000)?.expect("outside R_0").value;
            n_green += 1;
            if g < r.ln() - 0.5 * LN_2 - 1e-9 || g > r.ln() + 0.5 * 1.5f64.ln() + 1e-9 {
                green_v += 1;
            }
        }
        for _ in 0..50 {
            let m = rng.gen_range(0..6u64);
            let z = Complex64::from_polar(r0, rng.gen_range(0.0..TAU));
            for n in m + 1..=m + 30 {
                let excess = compose_log_abs(&spec, m, n, z)? / big_d(&deg, m, n) - r0.ln() - 0.5 * 1.5f64.ln();
                worst_trunc = worst_trunc.max(excess);
                n_trunc += 1;
                if excess > 1e-9 {
                    trunc += 1;
                }
            }
        }
    }
    Ok((
        sandwich + green_v + trunc == 0,
        format!(
            "violations: sandwich {sandwich}/{n_sandwich}, green {green_v}/{n_green}, truncation {trunc}/{n_trunc} \
             (max log excess {worst_trunc:.3})"
        ),
    ))
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut specs = vec![
        ("rabbit", presets::rabbit()),
        ("perturbed rabbit", figure2_spec(0)),
        (
            "periodic z^2, z^3+0.05",
            SequenceSpec::periodic(
                vec![PolySpec::unicritical(2, cx(1.0, 0.0), cx(0.0, 0.0)), PolySpec::unicritical(3, cx(1.0, 0.0), cx(0.05, 0.0))],
                Bounds::new(3, 1.0, 0.05).unwrap(),
            )
            .unwrap(),
        ),
    ];
    specs.push(("random cubic", random_monic_spec(&mut ChaCha8Rng::seed_from_u64(33))));
    let mut details = Vec::new();
    let mut ok = true;
    for (name, spec) in &specs {
        let (mut g_worst, mut b_worst, mut count) = (0.0f64, 0.0f64, 0usize);
        while count < 1000 {
            let m = rng.gen_range(0..8u64);
            let z = unit_disk(&mut rng, 2.0);
            let Some(g0) = green(spec, m, z, 1000)? else { continue };
            let p = spec.polynomial_at(m + 1)?;
            let w = p.eval(z);
            let d = p.degree() as f64;
            let g1 = green(spec, m + 1, w, 1000)?.expect("image escapes").value;
            g_worst = g_worst.max((g1 - d * g0.value).abs() / g0.value.max(1.0));
            let phi0 = bottcher(spec, m, z, 1000)?.expect("escapes").bottcher;
            let phi1 = bottcher(spec, m + 1, w, 1000)?.expect("image escapes").bottcher;
            let lhs = phi0.powu(p.degree() as u32);
            b_worst = b_worst.max((phi1 - lhs).norm() / lhs.norm());
            count += 1;
        }
        ok &= g_worst <= 1e-8 && b_worst <= 1e-6;
        details.push(format!("{name}: green {g_worst:.1e}, bottcher {b_worst:.1e}"));
    }
    Ok((ok, details.join("; ")))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let spec = presets::rabbit();
    let traces = trace_rays(&spec, 0, &rabbit_angles(), &RayConfig::default());
    let alpha = presets::alpha_fixed_point(RABBIT_C);
    let mut pts = Vec::new();
    for t in traces {
        let t = t?;
        if t.status != RayStatus::Landed {
            return Ok((false, format!("ray {} did not land", t.theta)));
        }
        pts.push(t.landing.unwrap());
    }
    let mut spread = 0.0f64;
    for a in &pts {
        for b in &pts {
            spread = spread.max((a - b).norm());
        }
    }
    let to_alpha = pts.iter().map(|p| (p - alpha).norm()).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    Ok((
        spread <= 1e-6 && to_alpha <= 1e-6 && secs < 10.0,
        format!("c = {RABBIT_C}: spread {spread:.1e}, max distance to alpha {to_alpha:.1e}, {secs:.2} s"),
    ))
}

fn probes() -> Vec<ExternalAngle> {
    let mut out: Vec<ExternalAngle> = Vec::new();
    for q in [7u64, 63] {
        for k in 0..q {
            let a = ExternalAngle::new(k, q);
            if !out.contains(&a) && !rabbit_angles().contains(&a) {
                out.push(a);
            }
        }
    }
    out
}

struct Seeded {
    spec: SequenceSpec,
    cert: nonauto::hyperbolicity::HyperbolicityCert,
}

fn criterion_5(seeded: &[Seeded]) -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    let probes = probes();
    for (seed, s) in seeded.iter().enumerate() {
        if !s.cert.passed() {
            ok = false;
            lines.push(format!("seed {seed}: certify {:?}", s.cert.verdict));
            continue;
        }
        match rigidity_check(&s.spec, 0, &rabbit_angles(), &probes, 1e-5, &RayConfig::default()) {
            Ok(r) => {
                ok &= r.holds;
                if !r.holds {
                    lines.push(format!("seed {seed}: extra angles {:?}", r.extra));
                }
            }
            Err(e) => {
                ok = false;
                lines.push(format!("seed {seed}: {e}"));
            }
        }
    }
    let deltas: Vec<f64> = seeded.iter().map(|s| s.cert.delta).collect();
    let lo = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = deltas.iter().cloned().fold(0.0, f64::max);
    if lines.is_empty() {
        lines.push(format!("10/10 seeds certified (delta in [{lo:.3}, {hi:.3}]) and co-landed with no extra probe angle"));
    }
    Ok((ok, lines.join("; ")))
}

fn criterion_6(base_cert: &nonauto::hyperbolicity::HyperbolicityCert, seeded: &[Seeded]) -> Outcome {
    let base = presets::rabbit();
    let alpha = presets::alpha_fixed_point(RABBIT_C);
    let mut worst = 0.0f64;
    let mut errors = Vec::new();
    for (seed, s) in seeded.iter().enumerate() {
        if !s.cert.passed() {
            errors.push(format!("seed {seed}: not certified"));
            continue;
        }
        let path = ParamPath::tail_perturbation(&base, &s.spec, 12, 0.12)?;
        let cert = path_cert(base_cert, &s.cert);
        let shadow = continue_with(&path, &cert, 0, alpha, &PathConfig::default());
        let ray = ray_landing_motion(&base, &s.spec, 0, &rabbit_angles(), 1e-6, &RayConfig::default());
        match (shadow, ray) {
            (Ok(c), Ok(r)) => worst = worst.max((c.point - r).norm()),
            (Err(e), _) | (_, Err(e)) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    // depth sweep on a persistent perturbation, where deeper orbits see new maps
    let mut worst_rate = 0.0f64;
    let mut worst_step = 0.0f64;
    for seed in 0..10u64 {
        let target = presets::perturbed_quadratic(RABBIT_C, 0.03, seed, None);
        let tcert = certify(&target, &CertifyConfig::default())?;
        if !tcert.passed() {
            errors.push(format!("sweep seed {seed}: target not certified"));
            continue;
        }
        let path = ParamPath::tail_perturbation(&base, &target, 512, 0.12)?;
        let cert = path_cert(base_cert, &tcert);
        let mut pts = Vec::new();
        for k in 2..=9 {
            let cfg = PathConfig { shadow: ShadowConfig { depth_k: k, ..ShadowConfig::default() }, ..PathConfig::default() };
            pts.push(continue_with(&path, &cert, 0, alpha, &cfg)?.point);
        }
        let diffs: Vec<f64> = pts.windows(2).map(|w| (w[0] - w[1]).norm()).collect();
        for w in diffs.windows(2) {
            worst_step = worst_step.max(w[1] / w[0]);
        }
        worst_rate = worst_rate.max(geometric_rate(&diffs));
    }
    let ok = errors.is_empty() && worst <= 1e-6 && worst_rate <= 0.5;
    let mut detail = format!(
        "max |shadow - ray| = {worst:.1e}; depth sweep k=2..9 fitted contraction per k <= {worst_rate:.3} \
         (largest single-step ratio {worst_step:.2})"
    );
    if !errors.is_empty() {
        detail.push_str(&format!("; errors: {}", errors.join(", ")));
    }
    Ok((ok, detail))
}

fn path_cert(a: &nonauto::hyperbolicity::HyperbolicityCert, b: &nonauto::hyperbolicity::HyperbolicityCert) -> PathCert {
    PathCert {
        delta: a.delta.min(b.delta),
        n0: a.n0.unwrap_or(1).max(b.n0.unwrap_or(1)),
        certs: vec![a.clone(), b.clone()],
    }
}

/// `exp` of the least-squares slope of `ln diffs[k]` against k.
fn geometric_rate(diffs: &[f64]) -> f64 {
    let n = diffs.len() as f64;
    let xs: Vec<f64> = (0..diffs.len()).map(|i| i as f64).collect();
    let ys: Vec<f64> = diffs.iter().map(|d| d.max(1e-300).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    (sxy / sxx).exp()
}

fn criterion_7() -> Outcome {
    let cfg = SampleConfig { method: SampleMethod::Combined { count: 256, grid: 600 }, ..SampleConfig::default() };
    let base = julia_sample_with(&presets::rabbit(), 0, &cfg)?;
    let mut ds = Vec::new();
    for eps in [0.05, 0.025, 0.0125] {
        let s = presets::perturbed_quadratic(RABBIT_C, eps, 0, Some(12));
        let b = julia_sample_with(&s, 0, &cfg)?;
        ds.push(hausdorff_distance(&base.points, &b.points));
    }
    let ok = ds[0] > ds[1] && ds[1] > ds[2] && ds[2] < 0.05;
    Ok((ok, format!("d_H at eps 0.05, 0.025, 0.0125 = {:.4}, {:.4}, {:.4}", ds[0], ds[1], ds[2])))
}

fn criterion_8() -> Outcome {
    let mixed = SequenceSpec::periodic(
        vec![PolySpec::unicritical(2, cx(1.0, 0.0), cx(0.0, 0.0)), PolySpec::unicritical(3, cx(1.0, 0.0), cx(0.05, 0.0))],
        Bounds::new(3, 1.0, 0.05).unwrap(),
    )?;
    let angles = [
        ExternalAngle::ZERO,
        ExternalAngle::new(1, 7),
        ExternalAngle::new(2, 7),
        ExternalAngle::new(4, 7),
        ExternalAngle::new(1, 3),
        ExternalAngle::new(1, 5),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, spec) in [("rabbit", presets::rabbit()), ("periodic z^2, z^3+0.05", mixed)] {
        let mut min_alpha = f64::INFINITY;
        let mut violations = 0usize;
        let mut samples = 0usize;
        for t in trace_rays(&spec, 0, &angles, &RayConfig::default()) {
            let t = t?;
            let Some((c, a)) = fit_tail_bound(&t, 1e-4, 1e-1) else {
                ok = false;
                details.push(format!("{name} ray {}: too few samples", t.theta));
                continue;
            };
            min_alpha = min_alpha.min(a);
            for p in t.points.iter().filter(|p| p.potential >= 1e-4 && p.potential <= 1e-1) {
                samples += 1;
                if ray_tail_length(&t, p.potential) > c * p.potential.powf(a) * (1.0 + 1e-12) {
                    violations += 1;
                }
            }
        }
        ok &= min_alpha > 0.0 && violations == 0;
        details.push(format!("{name}: min alpha {min_alpha:.3}, bound violations {violations}/{samples}"));
    }
    Ok((ok, details.join("; ")))
}

fn criterion_9() -> Outcome {
    let spec = SequenceSpec::periodic(
        vec![PolySpec::unicritical(2, cx(2.0, 0.0), cx(0.0, 0.0)), PolySpec::unicritical(3, cx(3.0, 0.0), cx(0.1, 0.0))],
        Bounds::new(3, 3.0, 0.1).unwrap(),
    )?;
    let conj = monic_rescale(&spec, 8, 64, 1e-12)?;
    let monic = conjugate_sequence(&spec, &conj)?;
    let lead = max_lead_deviation(&monic, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut residual = 0.0f64;
    for _ in 0..100 {
        let z = unit_disk(&mut rng, 2.0);
        for j in 1..=8u64 {
            let lhs = monic.polynomial_at(j)?.eval(conj.chi(j - 1, z)?);
            let rhs = conj.chi(j, spec.polynomial_at(j)?.eval(z))?;
            residual = residual.max((lhs - rhs).norm() / rhs.norm().max(1.0));
        }
    }
    Ok((lead <= 1e-10 && residual <= 1e-8, format!("max |lead - 1| = {lead:.1e}, max conjugacy residual {residual:.1e}")))
}

fn criterion_10() -> Outcome {
    let parabolic = certify(&presets::quadratic(cx(0.25, 0.0)), &CertifyConfig::default())?;
    let failed = matches!(parabolic.verdict, Verdict::Fail(_));
    let base = presets::rabbit();
    let path = ParamPath::generator(base, vec![(1, 0)], vec![vec![RABBIT_C], vec![cx(0.3, 0.0)]], 1.0)?;
    let outcome = match certify_and_continue(&path) {
        Err(DynError::PathNotContinuable { segment, cause }) => {
            (true, format!("PathNotContinuable at segment {segment} ({cause})"))
        }
        Err(e) => (false, format!("unexpected error {e}")),
        Ok(p) => (false, format!("path continued to {p}")),
    };
    Ok((
        failed && parabolic.mu <= 1.01 && outcome.0,
        format!("z^2+1/4: {:?}, mu {:.5}; rabbit to 0.3: {}", parabolic.verdict, parabolic.mu, outcome.1),
    ))
}

fn certify_and_continue(path: &ParamPath) -> Result<Complex64, DynError> {
    let cert = nonauto::motion::certify_path(path, &CertifyConfig::default())?;
    let alpha = presets::alpha_fixed_point(RABBIT_C);
    Ok(continue_with(path, &cert, 0, alpha, &PathConfig::default())?.point)
}

fn report(n: usize, outcome: Outcome, started: Instant, failures: &mut usize) {
    let secs = started.elapsed().as_secs_f64();
    let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error {}: {e}", e.name())));
    if !ok {
        *failures += 1;
    }
    println!("criterion {n} {}: {detail} [{secs:.1} s]", if ok { "PASS" } else { "FAIL" });
}

fn main() -> ExitCode {
    let mut failures = 0;
    let t = Instant::now();
    report(1, criterion_1(), t, &mut failures);
    let t = Instant::now();
    report(2, criterion_2(), t, &mut failures);
    let t = Instant::now();
    report(3, criterion_3(), t, &mut failures);
    let t = Instant::now();
    report(4, criterion_4(), t, &mut failures);

    let t = Instant::now();
    let seeded: Result<Vec<Seeded>, DynError> = (0..10u64)
        .map(|seed| {
            let spec = figure2_spec(seed);
            let cert = certify(&spec, &CertifyConfig::default())?;
            Ok(Seeded { spec, cert })
        })
        .collect();
    match seeded {
        Ok(seeded) => {
            report(5, criterion_5(&seeded), t, &mut failures);
            let t = Instant::now();
            let six = certify(&presets::rabbit(), &CertifyConfig::default()).and_then(|c| criterion_6(&c, &seeded));
            report(6, six, t, &mut failures);
        }
        Err(e) => {
            report(5, Err(e.clone()), t, &mut failures);
            report(6, Err(e), t, &mut failures);
        }
    }
    let t = Instant::now();
    report(7, criterion_7(), t, &mut failures);
    let t = Instant::now();
    report(8, criterion_8(), t, &mut failures);
    let t = Instant::now();
    report(9, criterion_9(), t, &mut failures);
    let t = Instant::now();
    report(10, criterion_10(), t, &mut failures);
    println!("acceptance: {} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
