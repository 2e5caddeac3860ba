//! Bounded polynomial sequences: coefficient rules, compositions, escape radius.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DynError, Result};

/// Values beyond this modulus count as escaped to numeric infinity.
pub const OVERFLOW_MODULUS: f64 = 1e150;
const EXACT_D_LIMIT: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub d: usize,
    pub k: f64,
    pub m: f64,
}

impl Bounds {
    pub fn new(d: usize, k: f64, m: f64) -> Result<Self> {
        let b = Bounds { d, k, m };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || !(self.k >= 1.0) || !(self.m >= 0.0) || !self.k.is_finite() || !self.m.is_finite() {
            return Err(DynError::InvalidInput(format!(
                "bounds need d >= 2, K >= 1, M >= 0 (got d={}, K={}, M={})",
                self.d, self.k, self.m
            )));
        }
        Ok(())
    }
}

/// Coefficients `a_0 .. a_d` of one polynomial, lowest degree first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct PolySpec {
    coeffs: Vec<Complex64>,
}

impl PolySpec {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() < 3 {
            return Err(DynError::InvalidInput("polynomial degree must be at least 2".into()));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(DynError::InvalidInput("non-finite coefficient".into()));
        }
        if coeffs.last().map_or(true, |c| c.norm() == 0.0) {
            return Err(DynError::InvalidInput("leading coefficient is zero".into()));
        }
        Ok(PolySpec { coeffs })
    }

    /// `z^2 + c`.
    pub fn quadratic(c: Complex64) -> Self {
        PolySpec { coeffs: vec![c, Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)] }
    }

    /// `lead * z^d + c`.
    pub fn unicritical(d: usize, lead: Complex64, c: Complex64) -> Self {
        assert!(d >= 2 && lead.norm() > 0.0);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); d + 1];
        coeffs[0] = c;
        coeffs[d] = lead;
        PolySpec { coeffs }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn lead(&self) -> Complex64 {
        self.coeffs[self.degree()]
    }

    pub fn is_monic(&self, tol: f64) -> bool {
        (self.lead() - 1.0).norm() <= tol
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    /// Value and derivative by Horner.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// `u = sum_{j<d} (a_j/a_d) w^{j-d}`, so that `P(w) = a_d w^d (1 + u)`.
    pub fn tail_ratio(&self, w: Complex64) -> Complex64 {
        let d = self.degree();
        let inv = 1.0 / w;
        let lead = self.lead();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..d {
            acc = (acc + self.coeffs[j] / lead) * inv;
        }
        acc
    }

    /// `u` together with `du/dw`.
    pub fn tail_ratio_with_derivative(&self, w: Complex64) -> (Complex64, Complex64) {
        let d = self.degree();
        let inv = 1.0 / w;
        let lead = self.lead();
        let mut u = Complex64::new(0.0, 0.0);
        let mut du = Complex64::new(0.0, 0.0);
        for j in 0..d {
            let e = (j as f64) - (d as f64);
            let term = self.coeffs[j] / lead * inv.powi(d as i32 - j as i32);
            u += term;
            du += term * e * inv;
        }
        (u, du)
    }

    pub fn derivative_coeffs(&self) -> Vec<Complex64> {
        self.coeffs.iter().enumerate().skip(1).map(|(k, c)| c * k as f64).collect()
    }

    /// Check the attached bounds; `m` is only used in the error.
    pub fn check(&self, bounds: &Bounds, m: u64) -> Result<()> {
        let d = self.degree();
        if d > bounds.d {
            return Err(DynError::BoundsViolation { m, what: format!("degree {d} exceeds d={}", bounds.d) });
        }
        let slack = 1e-12;
        let lead = self.lead().norm();
        if lead < 1.0 / bounds.k - slack || lead > bounds.k + slack {
            return Err(DynError::BoundsViolation { m, what: format!("|lead| = {lead} outside [1/K, K], K={}", bounds.k) });
        }
        for (i, c) in self.coeffs[..d].iter().enumerate() {
            if c.norm() > bounds.m + slack {
                return Err(DynError::BoundsViolation {
                    m,
                    what: format!("|a_{i}| = {} exceeds M={}", c.norm(), bounds.m),
                });
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<[f64; 2]>> for PolySpec {
    type Error = DynError;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self> {
        PolySpec::new(v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

impl From<PolySpec> for Vec<[f64; 2]> {
    fn from(p: PolySpec) -> Self {
        p.coeffs.iter().map(|c| [c.re, c.im]).collect()
    }
}

/// How the m-th polynomial is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    Constant { poly: PolySpec },
    /// `P_m = polys[(m - 1) % len]`.
    Periodic { polys: Vec<PolySpec> },
    /// `P_m = prefix[m - 1]` for `m <= prefix.len()`, then the tail rule at the absolute index m.
    PrefixThenTail { prefix: Vec<PolySpec>, tail: Box<Rule> },
    /// Coefficient i of `P_m` is `base_i + radii_i * u(seed, m, i)`, u uniform in the unit disk.
    /// With `until = Some(h)` only indices `m <= h` are perturbed.
    SeededPerturbation {
        base: PolySpec,
        radii: Vec<f64>,
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        until: Option<u64>,
    },
    /// Finitely many maps; indices past the end are an error.
    Truncated { polys: Vec<PolySpec> },
}

/// Uniform draw from the closed unit disk, a pure function of `(seed, m, index)`.
pub fn disk_draw(seed: u64, m: u64, index: u64) -> Complex64 {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&m.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(b"diskdraw");
    let mut rng = ChaCha8Rng::from_seed(key);
    loop {
        let x: f64 = rng.gen_range(-1.0..=1.0);
        let y: f64 = rng.gen_range(-1.0..=1.0);
        if x * x + y * y <= 1.0 {
            return Complex64::new(x, y);
        }
    }
}

impl Rule {
    fn at(&self, m: u64) -> Result<PolySpec> {
        match self {
            Rule::Constant { poly } => Ok(poly.clone()),
            Rule::Periodic { polys } => {
                if polys.is_empty() {
                    return Err(DynError::InvalidInput("empty periodic rule".into()));
                }
                Ok(polys[((m - 1) % polys.len() as u64) as usize].clone())
            }
            Rule::PrefixThenTail { prefix, tail } => {
                if m as usize <= prefix.len() {
                    Ok(prefix[m as usize - 1].clone())
                } else {
                    tail.at(m)
                }
            }
            Rule::SeededPerturbation { base, radii, seed, until } => {
                if until.map_or(false, |h| m > h) {
                    return Ok(base.clone());
                }
                let mut coeffs = base.coeffs.clone();
                for (i, r) in radii.iter().enumerate().take(coeffs.len()) {
                    if *r != 0.0 {
                        coeffs[i] += disk_draw(*seed, m, i as u64) * *r;
                    }
                }
                PolySpec::new(coeffs)
            }
            Rule::Truncated { polys } => {
                if m as usize > polys.len() {
                    return Err(DynError::IndexBeyondHorizon { index: m, horizon: polys.len() as u64 });
                }
                Ok(polys[m as usize - 1].clone())
            }
        }
    }

    /// Exact period of the index map when the rule is periodic from m = 1.
    pub fn period(&self) -> Option<usize> {
        match self {
            Rule::Constant { .. } => Some(1),
            Rule::Periodic { polys } => Some(polys.len()),
            Rule::SeededPerturbation { radii, .. } if radii.iter().all(|r| *r == 0.0) => Some(1),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub rule: Rule,
    pub bounds: Bounds,
}

impl SequenceSpec {
    pub fn new(rule: Rule, bounds: Bounds) -> Result<Self> {
        bounds.validate()?;
        Ok(SequenceSpec { rule, bounds })
    }

    pub fn constant(poly: PolySpec, bounds: Bounds) -> Result<Self> {
        Self::new(Rule::Constant { poly }, bounds)
    }

    pub fn periodic(polys: Vec<PolySpec>, bounds: Bounds) -> Result<Self> {
        if polys.is_empty() {
            return Err(DynError::InvalidInput("empty periodic rule".into()));
        }
        Self::new(Rule::Periodic { polys }, bounds)
    }

    /// `P_m` for `m >= 1`.
    pub fn polynomial_at(&self, m: u64) -> Result<PolySpec> {
        if m == 0 {
            return Err(DynError::InvalidInput("polynomial index starts at 1".into()));
        }
        let p = self.rule.at(m)?;
        p.check(&self.bounds, m)?;
        Ok(p)
    }

    pub fn period(&self) -> Option<usize> {
        self.rule.period()
    }

    pub fn escape_radius(&self) -> f64 {
        escape_radius(&self.bounds)
    }

    /// Stable textual digest used in raster metadata.
    pub fn digest(&self) -> String {
        let text = format!("{:?}", self);
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// Lazily materialized window of a sequence. Not shared between threads.
#[derive(Debug, Clone)]
pub struct SeqCache<'a> {
    spec: &'a SequenceSpec,
    period: Option<usize>,
    polys: Vec<PolySpec>,
}

impl<'a> SeqCache<'a> {
    pub fn new(spec: &'a SequenceSpec) -> Self {
        SeqCache { spec, period: spec.period(), polys: Vec::new() }
    }

    pub fn spec(&self) -> &'a SequenceSpec {
        self.spec
    }

    /// Make `P_1 .. P_n` available.
    pub fn ensure(&mut self, n: u64) -> Result<()> {
        let want = match self.period {
            Some(p) => (n as usize).min(p),
            None => n as usize,
        };
        while self.polys.len() < want {
            let m = self.polys.len() as u64 + 1;
            self.polys.push(self.spec.polynomial_at(m)?);
        }
        Ok(())
    }

    /// `P_m`; `ensure(m)` must have succeeded.
    pub fn get(&self, m: u64) -> &PolySpec {
        match self.period {
            Some(p) => &self.polys[((m - 1) % p as u64) as usize],
            None => &self.polys[(m - 1) as usize],
        }
    }

    pub fn poly(&mut self, m: u64) -> Result<&PolySpec> {
        self.ensure(m)?;
        Ok(self.get(m))
    }

    pub fn degree(&mut self, m: u64) -> Result<usize> {
        Ok(self.poly(m)?.degree())
    }
}

/// `D_{m,n}` in three forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeLedger {
    pub log_d: f64,
    pub inv_d: f64,
    pub exact_d: Option<u64>,
}

impl Default for DegreeLedger {
    fn default() -> Self {
        DegreeLedger { log_d: 0.0, inv_d: 1.0, exact_d: Some(1) }
    }
}

impl DegreeLedger {
    pub fn push(&mut self, d: usize) {
        self.exact_d = self
            .exact_d
            .and_then(|e| e.checked_mul(d as u64))
            .filter(|e| *e <= EXACT_D_LIMIT);
        match self.exact_d {
            Some(e) => {
                self.log_d = (e as f64).ln();
                self.inv_d = 1.0 / e as f64;
            }
            None => {
                self.log_d += (d as f64).ln();
                self.inv_d /= d as f64;
            }
        }
    }

    /// `D` as a float (may be infinite).
    pub fn degree(&self) -> f64 {
        match self.exact_d {
            Some(e) => e as f64,
            None => self.log_d.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Composition {
    pub value: Complex64,
    pub ledger: DegreeLedger,
    /// Step index k at which `|Q_{m,k}(z)|` first exceeded the overflow modulus; iteration stopped there.
    pub overflow_at: Option<u64>,
}

/// `Q_{m,n}(z) = P_n(...P_{m+1}(z))`.
pub fn compose_eval(spec: &SequenceSpec, m: u64, n: u64, z: Complex64) -> Result<Composition> {
    let mut cache = SeqCache::new(spec);
    compose_eval_cached(&mut cache, m, n, z)
}

pub fn compose_eval_cached(cache: &mut SeqCache, m: u64, n: u64, z: Complex64) -> Result<Composition> {
    if m > n {
        return Err(DynError::InvalidInput(format!("compose_eval needs m <= n (m={m}, n={n})")));
    }
    cache.ensure(n)?;
    let mut w = z;
    let mut ledger = DegreeLedger::default();
    for k in m + 1..=n {
        let p = cache.get(k);
        w = p.eval(w);
        ledger.push(p.degree());
        if !(w.norm() <= OVERFLOW_MODULUS) {
            return Ok(Composition { value: w, ledger, overflow_at: Some(k) });
        }
    }
    Ok(Composition { value: w, ledger, overflow_at: None })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitDerivative {
    pub derivative: Complex64,
    pub value: Complex64,
    pub overflow_at: Option<u64>,
}

/// `Q'_{m,n}(z)` by the chain rule.
pub fn orbit_derivative(spec: &SequenceSpec, m: u64, n: u64, z: Complex64) -> Result<OrbitDerivative> {
    let mut cache = SeqCache::new(spec);
    orbit_derivative_cached(&mut cache, m, n, z)
}

pub fn orbit_derivative_cached(cache: &mut SeqCache, m: u64, n: u64, z: Complex64) -> Result<OrbitDerivative> {
    if m > n {
        return Err(DynError::InvalidInput(format!("orbit_derivative needs m <= n (m={m}, n={n})")));
    }
    cache.ensure(n)?;
    let mut w = z;
    let mut der = Complex64::new(1.0, 0.0);
    for k in m + 1..=n {
        let (p, dp) = cache.get(k).eval_with_derivative(w);
        der *= dp;
        w = p;
        if !(w.norm() <= OVERFLOW_MODULUS) || !(der.norm() <= OVERFLOW_MODULUS) {
            return Ok(OrbitDerivative { derivative: der, value: w, overflow_at: Some(k) });
        }
    }
    Ok(OrbitDerivative { derivative: der, value: w, overflow_at: None })
}

/// `log |Q_{m,n}(z)|` without overflow, for `z != 0` orbits that stay away from 0.
pub fn compose_log_abs(spec: &SequenceSpec, m: u64, n: u64, z: Complex64) -> Result<f64> {
    let mut cache = SeqCache::new(spec);
    cache.ensure(n)?;
    let mut w = z;
    let mut k = m;
    while k < n {
        k += 1;
        let p = cache.get(k);
        if w.norm() > 1e100 {
            // Continue in log-polar form: w = exp(l) * e^{i a}.
            let mut l = w.norm().ln();
            let mut a = w.arg();
            let mut kk = k;
            loop {
                let p = cache.get(kk);
                let d = p.degree() as f64;
                let inv = Complex64::from_polar((-l).exp(), -a);
                let lead = p.lead();
                let mut u = Complex64::new(0.0, 0.0);
                for j in 0..p.degree() {
                    u = (u + p.coeffs()[j] / lead) * inv;
                }
                let f = lead * (1.0 + u);
                l = d * l + f.norm().ln();
                a = (d * a + f.arg()).rem_euclid(std::f64::consts::TAU);
                if kk == n {
                    return Ok(l);
                }
                kk += 1;
            }
        }
        w = p.eval(w);
    }
    Ok(w.norm().ln())
}

/// Smallest `R >= 2K` with `R^{d'} >= 2 K M sum_{i<d'} R^i` for every `2 <= d' <= d`.
pub fn escape_radius(bounds: &Bounds) -> f64 {
    let km = bounds.k * bounds.m;
    let mut r0 = 2.0 * bounds.k;
    for dp in 2..=bounds.d {
        if km == 0.0 {
            break;
        }
        // ratio R^{d'} / sum_{i<d'} R^i is increasing in R
        let f = |r: f64| {
            let s: f64 = (0..dp).map(|i| r.powi(i as i32)).sum();
            r.powi(dp as i32) - 2.0 * km * s
        };
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        while f(hi) < 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > 1e-12 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if f(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        r0 = r0.max(hi);
    }
    r0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EscapeTime {
    /// Number of steps taken to exceed R_0.
    Escaped(u64),
    /// Stayed within R_0 through the horizon.
    Bounded(u64),
}

impl EscapeTime {
    pub fn escaped(&self) -> bool {
        matches!(self, EscapeTime::Escaped(_))
    }
}

/// First `k <= horizon` with `|Q_{m,m+k}(z)| > R_0`.
pub fn escape_time(spec: &SequenceSpec, m: u64, z: Complex64, r0: f64, horizon: u64) -> Result<EscapeTime> {
    let mut cache = SeqCache::new(spec);
    escape_time_cached(&mut cache, m, z, r0, horizon)
}

pub fn escape_time_cached(cache: &mut SeqCache, m: u64, z: Complex64, r0: f64, horizon: u64) -> Result<EscapeTime> {
    let r2 = r0 * r0;
    let mut w = z;
    if w.norm_sqr() > r2 {
        return Ok(EscapeTime::Escaped(0));
    }
    cache.ensure(m + horizon)?;
    for k in 1..=horizon {
        w = cache.get(m + k).eval(w);
        if !(w.norm_sqr() <= r2) {
            return Ok(EscapeTime::Escaped(k));
        }
    }
    Ok(EscapeTime::Bounded(horizon))
}
