//! Exponent functions `p(·)` and estimation of their regularity classes:
//! local log-Hölder continuity (LH₀), log-Hölder decay at infinity (LH_∞)
//! and the Gaussian-adapted decay class `P^∞_{γ_d}` given by
//! `|p(x) - p_∞| ≤ C_{γ_d} / |x|²`.
//!
//! Class constants are estimated as sampled suprema on configurable point
//! sets; `passed` compares the estimate against the claimed constant with a
//! small relative slack.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{dist, norm};
use crate::{Error, Result};

/// Relative slack applied to claimed constants when deciding `passed`.
pub const CLASS_TOL: f64 = 1e-6;

type Oracle = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// How the exponent was declared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExponentFamily {
    Constant,
    RadialRational,
    UserExpression,
}

/// An exponent function with its claimed class metadata.
///
/// Exponents with `p_plus = ∞` are rejected at construction; every theorem
/// exercised here needs `p_+ < ∞`, so the `Ω_∞` part of the modular never
/// arises.
#[derive(Clone)]
pub struct ExponentFunction {
    eval: Oracle,
    pub family: ExponentFamily,
    pub p_inf: f64,
    pub c_gamma: f64,
    pub lh0_const: f64,
    pub p_minus: f64,
    pub p_plus: f64,
}

impl std::fmt::Debug for ExponentFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExponentFunction")
            .field("family", &self.family)
            .field("p_inf", &self.p_inf)
            .field("c_gamma", &self.c_gamma)
            .field("lh0_const", &self.lh0_const)
            .field("p_minus", &self.p_minus)
            .field("p_plus", &self.p_plus)
            .finish()
    }
}

impl ExponentFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// Constant exponent `p ≡ p0`.
    pub fn constant(p0: f64) -> Result<Self> {
        if !(p0 > 1.0) || !p0.is_finite() {
            return Err(Error::InvalidInput(format!("constant exponent must satisfy 1 < p < ∞, got {p0}")));
        }
        Ok(ExponentFunction {
            eval: Arc::new(move |_| p0),
            family: ExponentFamily::Constant,
            p_inf: p0,
            c_gamma: 0.0,
            lh0_const: 0.0,
            p_minus: p0,
            p_plus: p0,
        })
    }

    /// Radial rational exponent `p(x) = p_∞ + a / (1 + |x|²)`.
    ///
    /// Its `P^∞_{γ_d}` constant is exactly `|a|` (the supremum of
    /// `|x|²/(1+|x|²)` is 1); the local log-Hölder constant is estimated on
    /// radial pairs at construction.
    pub fn radial_rational(p_inf: f64, amplitude: f64) -> Result<Self> {
        let lo = p_inf.min(p_inf + amplitude);
        let hi = p_inf.max(p_inf + amplitude);
        if !(lo > 1.0) || !hi.is_finite() {
            return Err(Error::InvalidInput(format!(
                "radial rational exponent out of (1, ∞): range [{lo}, {hi}]"
            )));
        }
        let p = move |x: &[f64]| p_inf + amplitude / (1.0 + crate::geometry::norm_sq(x));
        // worst log-Hölder pairs for a radial profile are radial; scan them
        let mut lh0: f64 = 0.0;
        let radii: Vec<f64> = (0..400).map(|i| 50.0 * (i as f64 + 0.5) / 400.0).collect();
        for (i, &r) in radii.iter().enumerate() {
            for &s in &radii[i + 1..] {
                let v = (p(&[r]) - p(&[s])).abs() * (std::f64::consts::E + 1.0 / (s - r).abs()).ln();
                lh0 = lh0.max(v);
            }
        }
        Ok(ExponentFunction {
            eval: Arc::new(move |x| p(x)),
            family: ExponentFamily::RadialRational,
            p_inf,
            c_gamma: amplitude.abs(),
            lh0_const: lh0,
            p_minus: lo,
            p_plus: hi,
        })
    }

    /// Exponent from an arbitrary oracle with explicitly claimed metadata.
    pub fn from_oracle(
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        p_inf: f64,
        c_gamma: f64,
        lh0_const: f64,
        p_minus: f64,
        p_plus: f64,
    ) -> Result<Self> {
        if !(p_minus > 1.0) || !p_plus.is_finite() || p_minus > p_plus {
            return Err(Error::InvalidInput(format!(
                "exponent bounds must satisfy 1 < p_- <= p_+ < ∞, got [{p_minus}, {p_plus}]"
            )));
        }
        if p_inf < p_minus || p_inf > p_plus {
            return Err(Error::InvalidInput(format!(
                "p_inf = {p_inf} outside [p_-, p_+] = [{p_minus}, {p_plus}]"
            )));
        }
        Ok(ExponentFunction {
            eval: Arc::new(eval),
            family: ExponentFamily::UserExpression,
            p_inf,
            c_gamma,
            lh0_const,
            p_minus,
            p_plus,
        })
    }

    /// Check `p_minus ≤ p(x) ≤ p_plus` on the given samples.
    pub fn check_bounds(&self, samples: &[Vec<f64>]) -> Result<()> {
        for x in samples {
            let v = self.eval(x);
            if !(v >= self.p_minus - 1e-12 && v <= self.p_plus + 1e-12) {
                return Err(Error::Verification {
                    message: format!("p(x) = {v} outside claimed [{}, {}]", self.p_minus, self.p_plus),
                    witness: x.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Pointwise conjugate exponent `p'(·)` with `1/p + 1/p' = 1`.
///
/// Metadata transforms along: `p'_∞ = p_∞/(p_∞-1)`, the `P^∞_{γ_d}` constant
/// picks up the factor `1/((p_- - 1)(p_∞ - 1))` and the LH₀ constant the
/// factor `1/(p_- - 1)²`, both from `|p' - q'| = |p - q|/((p-1)(q-1))`.
pub fn dual_exponent(p: &ExponentFunction) -> Result<ExponentFunction> {
    if !(p.p_minus > 1.0) {
        return Err(Error::InvalidInput("dual exponent unbounded: p_minus must exceed 1".into()));
    }
    let inner = p.eval.clone();
    let dual = move |x: &[f64]| {
        let v = inner(x);
        v / (v - 1.0)
    };
    Ok(ExponentFunction {
        eval: Arc::new(dual),
        family: p.family,
        p_inf: p.p_inf / (p.p_inf - 1.0),
        c_gamma: p.c_gamma / ((p.p_minus - 1.0) * (p.p_inf - 1.0)),
        lh0_const: p.lh0_const / ((p.p_minus - 1.0) * (p.p_minus - 1.0)),
        p_minus: p.p_plus / (p.p_plus - 1.0),
        p_plus: p.p_minus / (p.p_minus - 1.0),
    })
}

/// Which regularity class a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassName {
    Lh0,
    LhInfinity,
    PGammaInf,
}

/// Result of a sampled class-membership check.
#[derive(Debug, Clone)]
pub struct ClassReport {
    pub class_name: ClassName,
    pub estimated_constant: f64,
    /// Worst-case point(s): two for LH₀ pairs, one otherwise.
    pub witness: Vec<Vec<f64>>,
    pub passed: bool,
    pub note: Option<String>,
}

/// Local log-Hölder estimate: `max |α(x)-α(y)| · log(e + 1/|x-y|)` over the
/// sample pairs.
pub fn check_lh0(
    target: impl Fn(&[f64]) -> f64,
    sample_pairs: &[(Vec<f64>, Vec<f64>)],
    claimed: f64,
) -> Result<ClassReport> {
    if sample_pairs.is_empty() {
        return Err(Error::InvalidInput("check_lh0 needs a nonempty pair set".into()));
    }
    let mut best = 0.0f64;
    let mut witness = Vec::new();
    for (x, y) in sample_pairs {
        let r = dist(x, y);
        if r == 0.0 {
            return Err(Error::InvalidInput("check_lh0 pairs must have x != y".into()));
        }
        let v = (target(x) - target(y)).abs() * (std::f64::consts::E + 1.0 / r).ln();
        if v > best {
            best = v;
            witness = vec![x.clone(), y.clone()];
        }
    }
    Ok(ClassReport {
        class_name: ClassName::Lh0,
        estimated_constant: best,
        witness,
        passed: best <= claimed * (1.0 + CLASS_TOL),
        note: None,
    })
}

/// Log-Hölder-at-infinity estimate: `max |α(x)-α_∞| · log(e + |x-x₀|)`.
///
/// When `alpha_inf` is not supplied it is fitted as the median of the target
/// on the outermost radial shell of the samples; a large spread on that
/// shell means no limit exists and the report is flagged.
pub fn check_lh_infinity(
    target: impl Fn(&[f64]) -> f64,
    base_point: &[f64],
    samples: &[Vec<f64>],
    alpha_inf: Option<f64>,
    claimed: f64,
) -> Result<ClassReport> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("check_lh_infinity needs a nonempty sample set".into()));
    }
    let radii: Vec<f64> = samples.iter().map(|x| dist(x, base_point)).collect();
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let (a_inf, note) = match alpha_inf {
        Some(v) => (v, None),
        None => {
            let mut shell: Vec<f64> = samples
                .iter()
                .zip(&radii)
                .filter(|(_, &r)| r >= 0.9 * rmax)
                .map(|(x, _)| target(x))
                .collect();
            shell.sort_by(f64::total_cmp);
            let median = shell[shell.len() / 2];
            let spread = shell.last().unwrap() - shell.first().unwrap();
            let all: Vec<f64> = samples.iter().map(|x| target(x)).collect();
            let total_spread = all.iter().cloned().fold(f64::MIN, f64::max)
                - all.iter().cloned().fold(f64::MAX, f64::min);
            if spread > 1e-6 && spread > 0.3 * total_spread {
                (median, Some("no limit detected".to_string()))
            } else {
                (median, None)
            }
        }
    };
    let mut best = 0.0f64;
    let mut witness = Vec::new();
    for x in samples {
        let v = (target(x) - a_inf).abs() * (std::f64::consts::E + dist(x, base_point)).ln();
        if v > best {
            best = v;
            witness = vec![x.clone()];
        }
    }
    let failed_fit = note.is_some();
    Ok(ClassReport {
        class_name: ClassName::LhInfinity,
        estimated_constant: best,
        witness,
        passed: !failed_fit && best <= claimed * (1.0 + CLASS_TOL),
        note,
    })
}

/// `P^∞_{γ_d}` estimate: `sup |x|² · |p(x) - p_∞|` over the samples.
pub fn check_p_gamma_inf(p: &ExponentFunction, samples: &[Vec<f64>]) -> Result<ClassReport> {
    let mut best = 0.0f64;
    let mut witness = Vec::new();
    for x in samples {
        let nsq = crate::geometry::norm_sq(x);
        if nsq == 0.0 {
            return Err(Error::InvalidInput("P^inf_gamma samples must exclude the origin".into()));
        }
        let v = nsq * (p.eval(x) - p.p_inf).abs();
        if v > best {
            best = v;
            witness = vec![x.clone()];
        }
    }
    Ok(ClassReport {
        class_name: ClassName::PGammaInf,
        estimated_constant: best,
        witness,
        passed: best <= p.c_gamma * (1.0 + CLASS_TOL),
        note: None,
    })
}

/// The equivalent exponential bounds and their constants
/// `C₁ = e^{C_{γ_d}/p_∞}` and `C₂ = e^{C_{γ_d}(p_-)'/p_∞}`.
#[derive(Debug, Clone)]
pub struct LemmaEquivReport {
    pub c1: f64,
    pub c2: f64,
    pub verified: bool,
    /// First sample violating either two-sided bound, if any.
    pub violation: Option<Vec<f64>>,
}

/// Compute `C₁, C₂` and verify the two-sided exponential bounds
/// `C₁⁻¹ ≤ e^{-|x|²(p(x)/p_∞ - 1)} ≤ C₁` (and the `C₂` analogue for `p'`)
/// on the samples.
pub fn lemma_equiv_constants(p: &ExponentFunction, samples: &[Vec<f64>]) -> Result<LemmaEquivReport> {
    if !(p.p_minus > 1.0) {
        return Err(Error::InvalidInput("lemma constants need p_minus > 1".into()));
    }
    let gamma_report = check_p_gamma_inf(p, samples)?;
    if !gamma_report.passed {
        return Err(Error::Verification {
            message: format!(
                "exponent is not in P^inf_gamma: sampled constant {} exceeds claimed {}",
                gamma_report.estimated_constant, p.c_gamma
            ),
            witness: gamma_report.witness.first().cloned().unwrap_or_default(),
        });
    }
    let p_minus_dual = p.p_minus / (p.p_minus - 1.0);
    let c1 = (p.c_gamma / p.p_inf).exp();
    let c2 = (p.c_gamma * p_minus_dual / p.p_inf).exp();
    let p_inf_dual = p.p_inf / (p.p_inf - 1.0);
    let slack = 1.0 + CLASS_TOL;
    let mut violation = None;
    for x in samples {
        let nsq = crate::geometry::norm_sq(x);
        let px = p.eval(x);
        let e1 = (-nsq * (px / p.p_inf - 1.0)).exp();
        let pdx = px / (px - 1.0);
        let e2 = (-nsq * (pdx / p_inf_dual - 1.0)).exp();
        if e1 > c1 * slack || e1 < 1.0 / (c1 * slack) || e2 > c2 * slack || e2 < 1.0 / (c2 * slack) {
            violation = Some(x.clone());
            break;
        }
    }
    Ok(LemmaEquivReport { c1, c2, verified: violation.is_none(), violation })
}

/// Default class-check point set: a tensor grid on `[-20, 20]^d` plus 1000
/// radial samples reaching `|x| = 50` in seeded random directions.
pub fn default_class_points(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_axis = match dim {
        1 => 201,
        2 => 41,
        _ => 13,
    };
    let mut pts = Vec::new();
    let mut idx = vec![0usize; dim];
    for _ in 0..per_axis_pow(per_axis, dim) {
        let p: Vec<f64> = idx
            .iter()
            .map(|&k| -20.0 + 40.0 * k as f64 / (per_axis - 1) as f64)
            .collect();
        if norm(&p) > 1e-9 {
            pts.push(p);
        }
        advance(&mut idx, per_axis);
    }
    for i in 0..1000 {
        let r = 50.0 * (i as f64 + 1.0) / 1000.0;
        let dir = random_direction(dim, &mut rng);
        pts.push(dir.iter().map(|u| r * u).collect());
    }
    pts
}

/// Default LH₀ pair set: for each scale `δ ∈ {1e-6, …, 1}` (log-spaced),
/// pairs `(x, x + δu)` at seeded random points and directions.
pub fn default_class_pairs(dim: usize, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let scales: Vec<f64> = (0..13).map(|k| 10f64.powf(-6.0 + 0.5 * k as f64)).collect();
    let mut pairs = Vec::with_capacity(count);
    while pairs.len() < count {
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let delta = scales[pairs.len() % scales.len()];
        let u = random_direction(dim, &mut rng);
        let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + delta * b).collect();
        pairs.push((x, y));
    }
    pairs
}

fn per_axis_pow(n: usize, d: usize) -> usize {
    n.pow(d as u32)
}

fn advance(idx: &mut [usize], n: usize) {
    for k in (0..idx.len()).rev() {
        idx[k] += 1;
        if idx[k] < n {
            return;
        }
        idx[k] = 0;
    }
}

fn random_direction(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|u| u / n).collect();
        }
    }
}
