//! Gaussian-measure geometry: admissible (hyperbolic) balls, the
//! local/global splitting of point pairs, the global-region quantities
//! `a, b, t₀, u₀`, and covering families with bounded overlap.

use crate::quad::{MeasureKind, QuadratureScheme, SchemeKind};
use crate::{Error, Result};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Admissibility radius `m(x) = 1 ∧ 1/|x|`.
pub fn admissibility_radius(x: &[f64]) -> f64 {
    let n = norm(x);
    if n <= 1.0 {
        1.0
    } else {
        1.0 / n
    }
}

/// A ball `B(c, C_d · m(c))`, the scale on which `e^{-|x|²}` is essentially
/// constant.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub scale_const: f64,
}

impl AdmissibleBall {
    pub fn new(center: Vec<f64>, scale_const: f64) -> Self {
        let radius = scale_const * admissibility_radius(&center);
        AdmissibleBall { center, radius, scale_const }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        dist(&self.center, x) < self.radius
    }

    /// Extremes of `e^{-|x|²}` over the closed ball (attained on the ray
    /// through the center), as a max/min ratio.
    pub fn gaussian_oscillation(&self) -> f64 {
        let c = norm(&self.center);
        let hi = (c + self.radius).powi(2);
        let lo = (c - self.radius).max(0.0).powi(2);
        (hi - lo).exp()
    }
}

/// Which side of the admissible-ball split a pair `(x, y)` falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    Local,
    Global,
}

/// Local iff `|x - y| < C_d · m(x)`; the boundary belongs to the global
/// (closed) region.
pub fn classify_pair(x: &[f64], y: &[f64], scale_const: f64) -> PairClass {
    if dist(x, y) < scale_const * admissibility_radius(x) {
        PairClass::Local
    } else {
        PairClass::Global
    }
}

/// The profile `u(t) = |y - √(1-t) x|² / t` whose minimum over `(0, 1]`
/// drives the global kernel bound.
pub fn u_profile(x: &[f64], y: &[f64], t: f64) -> f64 {
    let s = (1.0 - t).sqrt();
    let mut nsq = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let v = yi - s * xi;
        nsq += v * v;
    }
    nsq / t
}

/// Global-region quantities of a pair: `a = |x|² + |y|²`, `b = 2⟨x,y⟩`,
/// the minimizer `t₀ = 2√(a²-b²)/(a+√(a²-b²))` and the minimum value
/// `u₀ = (|y|² - |x|² + |x+y||x-y|)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalQuantities {
    pub a: f64,
    pub b: f64,
    pub t0: f64,
    pub u0: f64,
}

impl GlobalQuantities {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let a = norm_sq(x) + norm_sq(y);
        if a == 0.0 {
            return Err(Error::InvalidInput("global quantities undefined at x = y = 0".into()));
        }
        let b = 2.0 * dot(x, y);
        // √(a² - b²) = |x+y| |x-y|, computed in the stable product form
        let sum: Vec<f64> = x.iter().zip(y).map(|(u, v)| u + v).collect();
        let diff: Vec<f64> = x.iter().zip(y).map(|(u, v)| u - v).collect();
        let q = norm(&sum) * norm(&diff);
        let t0 = 2.0 * q / (a + q);
        let u0 = 0.5 * (norm_sq(y) - norm_sq(x) + q);
        Ok(GlobalQuantities { a, b, t0, u0 })
    }
}

/// Gaussian measure of a region given by an indicator oracle, together with
/// the γ-mass the scheme cannot see (truncation defect).
pub fn gaussian_measure(region: impl Fn(&[f64]) -> bool, scheme: &QuadratureScheme) -> Result<(f64, f64)> {
    if scheme.measure() != MeasureKind::Gaussian {
        return Err(Error::InvalidInput("gaussian_measure needs a Gaussian-weighted scheme".into()));
    }
    if let SchemeKind::GaussHermiteTensor = scheme.kind {
        return Err(Error::InvalidInput(
            "indicator integrands need a truncated uniform scheme, not Gauss-Hermite".into(),
        ));
    }
    let mut mass = 0.0;
    for i in 0..scheme.len() {
        if region(scheme.node(i)) {
            mass += scheme.weight(i);
        }
    }
    let defect = (1.0 - scheme.total_weight()).max(0.0);
    Ok((mass.min(1.0), defect))
}

/// A finite family of admissible balls whose doubles, together with
/// `B(0, 1)`, cover the ball of radius `coverage_radius`.
#[derive(Debug, Clone)]
pub struct CoveringFamily {
    pub balls: Vec<AdmissibleBall>,
    /// Max number of family balls containing any verification-grid point.
    pub overlap_bound: usize,
    /// Same count for the doubled balls `2B`.
    pub overlap_bound_doubled: usize,
    pub coverage_radius: f64,
    /// Smallest dilation factor `Ĉ` observed such that `B_h(x) ⊂ Ĉ·B` for
    /// sampled `x ∈ B` (the paper leaves this constant unspecified).
    pub hat_dilation: f64,
    /// Max over balls of the `e^{-|x|²}` oscillation ratio.
    pub max_gaussian_oscillation: f64,
}

impl CoveringFamily {
    /// True when every grid point of `[-R, R]^d` with `|p| ≤ R` lies in
    /// `B(0,1)` or in some doubled ball.
    pub fn covers_grid(&self, grid_n: usize) -> bool {
        let d = self.balls.first().map(|b| b.center.len()).unwrap_or(2);
        let r = self.coverage_radius;
        grid_points(d, r, grid_n).into_iter().all(|p| {
            if norm(&p) > r {
                return true;
            }
            if norm(&p) < 1.0 {
                return true;
            }
            self.balls.iter().any(|b| dist(&b.center, &p) < 2.0 * b.radius)
        })
    }
}

fn grid_points(dim: usize, radius: f64, n: usize) -> Vec<Vec<f64>> {
    let h = 2.0 * radius / n as f64;
    let axis: Vec<f64> = (0..n).map(|i| -radius + (i as f64 + 0.5) * h).collect();
    let mut out = Vec::with_capacity(n.pow(dim as u32));
    let mut idx = vec![0usize; dim];
    for _ in 0..n.pow(dim as u32) {
        out.push(idx.iter().map(|&k| axis[k]).collect());
        for k in (0..dim).rev() {
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

/// Points spread over the sphere of radius `rho`: endpoints for d=1, a
/// uniform circle for d=2, a Fibonacci lattice for d=3. Spacing ≈ `sep`.
fn shell_points(dim: usize, rho: f64, sep: f64) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![-rho], vec![rho]],
        2 => {
            let count = ((2.0 * std::f64::consts::PI * rho / sep).ceil() as usize).max(6);
            (0..count)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                    vec![rho * th.cos(), rho * th.sin()]
                })
                .collect()
        }
        3 => {
            let count = ((4.0 * std::f64::consts::PI * rho * rho / (sep * sep)).ceil() as usize).max(14);
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * k as f64;
                    vec![rho * r * th.cos(), rho * r * th.sin(), rho * z]
                })
                .collect()
        }
        _ => unreachable!("dimension checked by caller"),
    }
}

/// Build a covering family on nested radial shells with spacing proportional
/// to `m(shell radius)`, then certify its properties on a verification grid.
pub fn build_covering(dim: usize, coverage_radius: f64, scale_const: f64, grid_n: usize) -> Result<CoveringFamily> {
    if dim < 1 || dim > 3 {
        return Err(Error::InvalidInput(format!("covering dimension {dim} not in 1..=3")));
    }
    if !(coverage_radius > 0.0) || !(scale_const > 0.0) {
        return Err(Error::InvalidInput("coverage radius and scale constant must be positive".into()));
    }
    let sep_factor = 0.75;
    let mut balls = vec![AdmissibleBall::new(vec![0.0; dim], scale_const)];
    let mut rho = 0.0;
    loop {
        // shell step σ C_d m(ρ + Δ), solved by two fixed-point sweeps so the
        // spacing is measured at the outer edge of the gap
        let m_at = |r: f64| 1.0_f64.min(1.0 / r.max(1e-12));
        let mut delta = sep_factor * scale_const * m_at(rho);
        for _ in 0..2 {
            delta = sep_factor * scale_const * m_at(rho + delta);
        }
        rho += delta;
        if rho > coverage_radius + scale_const {
            break;
        }
        let sep = sep_factor * scale_const * 1.0_f64.min(1.0 / rho);
        for c in shell_points(dim, rho, sep) {
            balls.push(AdmissibleBall::new(c, scale_const));
        }
        if balls.len() > 2_000_000 {
            return Err(Error::Numerical("covering family exploded; check radius/scale".into()));
        }
    }
    if balls.len() <= 1 {
        return Err(Error::Numerical("covering construction produced empty shells".into()));
    }

    // certify overlap and coverage on the verification grid
    let mut overlap = 0usize;
    let mut overlap2 = 0usize;
    for p in grid_points(dim, coverage_radius, grid_n) {
        let mut c1 = 0usize;
        let mut c2 = 0usize;
        for b in &balls {
            let dd = dist(&b.center, &p);
            if dd < b.radius {
                c1 += 1;
            }
            if dd < 2.0 * b.radius {
                c2 += 1;
            }
        }
        overlap = overlap.max(c1);
        overlap2 = overlap2.max(c2);
    }

    // measure the smallest dilation Ĉ with B_h(x) ⊂ Ĉ·B for sampled x ∈ B
    let mut hat = 0.0f64;
    for b in &balls {
        for frac in [0.0, 0.5, 0.999] {
            for dir in shell_points(dim, 1.0, 0.35) {
                let x: Vec<f64> = b
                    .center
                    .iter()
                    .zip(&dir)
                    .map(|(c, u)| c + frac * b.radius * u)
                    .collect();
                let needed = (dist(&x, &b.center) + scale_const * admissibility_radius(&x)) / b.radius;
                hat = hat.max(needed);
            }
        }
    }

    let max_osc = balls
        .iter()
        .map(|b| b.gaussian_oscillation())
        .fold(0.0f64, f64::max);

    Ok(CoveringFamily {
        balls,
        overlap_bound: overlap,
        overlap_bound_doubled: overlap2,
        coverage_radius,
        hat_dilation: hat,
        max_gaussian_oscillation: max_osc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::QuadratureScheme;

    #[test]
    fn admissibility_radius_examples() {
        assert_eq!(admissibility_radius(&[0.0, 0.0]), 1.0);
        assert_eq!(admissibility_radius(&[2.0, 0.0]), 0.5);
        assert_eq!(admissibility_radius(&[0.5, 0.0]), 1.0);
    }

    #[test]
    fn classify_pair_examples() {
        // |x-y| = 0.4 < C_d m(x) = 2 * 0.5 = 1
        assert_eq!(classify_pair(&[2.0, 0.0], &[2.4, 0.0], 2.0), PairClass::Local);
        assert_eq!(classify_pair(&[0.0, 0.0], &[3.0, 0.0], 2.0), PairClass::Global);
        // boundary goes to the closed global region
        assert_eq!(classify_pair(&[0.0, 0.0], &[2.0, 0.0], 2.0), PairClass::Global);
    }

    #[test]
    fn global_quantities_collinear() {
        let g = GlobalQuantities::new(&[1.0, 0.0], &[2.0, 0.0]).unwrap();
        assert!((g.a - 5.0).abs() < 1e-15);
        assert!((g.b - 4.0).abs() < 1e-15);
        assert!((g.t0 - 0.75).abs() < 1e-15);
        assert!((g.u0 - 3.0).abs() < 1e-15);
        // independent check: u(t0) = u0
        assert!((u_profile(&[1.0, 0.0], &[2.0, 0.0], g.t0) - g.u0).abs() < 1e-12);
    }

    #[test]
    fn global_quantities_orthogonal_and_diagonal() {
        let g = GlobalQuantities::new(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((g.t0 - 1.0).abs() < 1e-15);
        assert!((g.u0 - 1.0).abs() < 1e-15);
        assert!((u_profile(&[1.0, 0.0], &[0.0, 1.0], 1.0) - 1.0).abs() < 1e-15);

        let gd = GlobalQuantities::new(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((gd.t0 - 0.0).abs() < 1e-15);
        assert!((gd.u0 - 0.0).abs() < 1e-15);

        assert!(GlobalQuantities::new(&[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn sqrt_identity_matches_product_form() {
        // |x+y||x-y| = √(a² - b²)
        let x = [0.3, -1.2, 0.7];
        let y = [2.0, 0.4, -0.9];
        let g = GlobalQuantities::new(&x, &y).unwrap();
        let q = (g.a * g.a - g.b * g.b).sqrt();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        assert!((norm(&sum) * norm(&diff) - q).abs() < 1e-12);
    }

    #[test]
    fn gaussian_measure_basics() {
        let s = QuadratureScheme::truncated_uniform(1, 6.0, 24000, MeasureKind::Gaussian);
        let (all, defect) = gaussian_measure(|_| true, &s).unwrap();
        assert!((all - 1.0).abs() < 1e-8 + defect);
        let (half, _) = gaussian_measure(|x| x[0] > 0.0, &s).unwrap();
        assert!((half - 0.5).abs() < 1e-8);
        // erf(1): grid spacing divides 1 exactly so the boundary is clean
        let (e1, _) = gaussian_measure(|x| x[0].abs() < 1.0, &s).unwrap();
        assert!((e1 - 0.842_700_792_949_714_9).abs() < 1e-7, "got {e1}");
    }

    #[test]
    fn admissible_ball_radius_relation() {
        let b = AdmissibleBall::new(vec![3.0, 0.0], 2.0);
        assert!((b.radius * norm(&b.center) - 2.0).abs() < 1e-15);
        let b0 = AdmissibleBall::new(vec![0.3, 0.0], 2.0);
        assert_eq!(b0.radius, 2.0);
    }

    #[test]
    fn covering_covers_and_overlaps() {
        let fam = build_covering(2, 4.0, 2.0, 150).unwrap();
        assert!(fam.covers_grid(150));
        assert!(fam.overlap_bound >= 1);
        assert!(fam.max_gaussian_oscillation <= (2.0f64 * 2.0 * (1.0 + 2.0)).exp());
    }
}
