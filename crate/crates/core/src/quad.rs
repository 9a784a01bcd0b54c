//! Quadrature schemes and adaptive integration primitives.
//!
//! Everything downstream integrates against one of two measures: the
//! Gaussian probability measure `γ_d(dx) = π^{-d/2} e^{-|x|²} dx` or the
//! Lebesgue measure on a truncated box. Schemes store flat node/weight
//! arrays; weights always embody the measure, so an integral is a plain
//! weighted sum of point evaluations.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use gauss_quad::legendre::GaussLegendre;

use crate::{Error, Result};

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// One-dimensional rule: nodes and matching weights.
#[derive(Debug, Clone)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn rule_cache() -> &'static Mutex<HashMap<(u8, usize), Rule1d>> {
    static CACHE: OnceLock<Mutex<HashMap<(u8, usize), Rule1d>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Physicists' Gauss–Hermite rule: integrates `e^{-x²} f(x)` over the line.
///
/// Nodes and weights come from Newton iteration on the orthonormal Hermite
/// recurrence rather than a tridiagonal eigensolver: the recurrence gives
/// every weight full *relative* accuracy, which matters when the integrand
/// grows like `e^{x²/2}` and the far nodes carry weights near 1e-60.
pub fn hermite_rule(order: usize) -> Rule1d {
    assert!(order >= 2, "Gauss-Hermite order must be >= 2");
    let key = (0u8, order);
    if let Some(r) = rule_cache().lock().unwrap().get(&key) {
        return r.clone();
    }
    let n = order;
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let half = n.div_ceil(2);
    let mut x = 0.0f64;
    for i in 0..half {
        // initial guesses for the i-th root from the top (Stroud/Secrest)
        x = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => x - 1.14 * (n as f64).powf(0.426) / x,
            2 => 1.86 * x - 0.86 * nodes[0],
            3 => 1.91 * x - 0.91 * nodes[1],
            _ => 2.0 * x - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            // orthonormal recurrence: H̃_{j} built up at the current x
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = x * (2.0 / j as f64).sqrt() * p2 - ((j as f64 - 1.0) / j as f64).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() <= 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = 2.0 / (pp * pp);
        weights[n - 1 - i] = weights[i];
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    let rule = Rule1d { nodes, weights };
    rule_cache().lock().unwrap().insert(key, rule.clone());
    rule
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn legendre_rule(order: usize) -> Rule1d {
    let key = (1u8, order);
    if let Some(r) = rule_cache().lock().unwrap().get(&key) {
        return r.clone();
    }
    let gl = GaussLegendre::new(order).expect("Gauss-Legendre order must be >= 2");
    let rule = Rule1d {
        nodes: gl.nodes().copied().collect(),
        weights: gl.weights().copied().collect(),
    };
    rule_cache().lock().unwrap().insert(key, rule.clone());
    rule
}

/// Physicists' Hermite polynomial `H_n(x)` (orthogonal for `e^{-x²} dx`),
/// by the recurrence `H_{n+1} = 2x H_n - 2n H_{n-1}`.
pub fn hermite_poly(n: usize, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0 * x,
        _ => {
            let mut prev = 1.0;
            let mut cur = 2.0 * x;
            for k in 1..n {
                let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// `H_n'(x) = 2n H_{n-1}(x)`.
pub fn hermite_poly_deriv(n: usize, x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        2.0 * n as f64 * hermite_poly(n - 1, x)
    }
}

/// Which measure the node weights embody.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    Gaussian,
    Lebesgue,
}

/// Scheme flavor, mirroring how the nodes were laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    GaussHermiteTensor,
    TruncatedUniform(MeasureKind),
}

/// A d-dimensional quadrature scheme with nodes stored flat (`dim` strides).
#[derive(Debug, Clone)]
pub struct QuadratureScheme {
    pub kind: SchemeKind,
    pub dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    pub truncation_radius: Option<f64>,
}

impl QuadratureScheme {
    /// Tensor Gauss–Hermite scheme for `γ_d`; weights are normalized so they
    /// sum to 1 (probability measure).
    pub fn gauss_hermite(dim: usize, order: usize) -> Self {
        assert!(dim >= 1 && dim <= 3, "supported dimensions are 1..=3");
        let rule = hermite_rule(order);
        let n1 = rule.nodes.len();
        let total = n1.pow(dim as u32);
        let mut nodes = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut w = 1.0;
            for k in 0..dim {
                nodes.push(rule.nodes[idx[k]]);
                w *= rule.weights[idx[k]] / SQRT_PI;
            }
            weights.push(w);
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < n1 {
                    break;
                }
                idx[k] = 0;
            }
        }
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        QuadratureScheme {
            kind: SchemeKind::GaussHermiteTensor,
            dim,
            nodes,
            weights,
            log_weights,
            truncation_radius: None,
        }
    }

    /// Uniform midpoint grid on `[-radius, radius]^d`, weighted either by the
    /// Gaussian density times the cell volume or by the cell volume alone.
    pub fn truncated_uniform(dim: usize, radius: f64, n_per_axis: usize, measure: MeasureKind) -> Self {
        assert!(dim >= 1 && dim <= 3, "supported dimensions are 1..=3");
        assert!(radius > 0.0 && n_per_axis > 0);
        let h = 2.0 * radius / n_per_axis as f64;
        let axis: Vec<f64> = (0..n_per_axis)
            .map(|i| -radius + (i as f64 + 0.5) * h)
            .collect();
        let total = n_per_axis.pow(dim as u32);
        let cell = h.powi(dim as i32);
        let mut nodes = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut nsq = 0.0;
            for k in 0..dim {
                let v = axis[idx[k]];
                nodes.push(v);
                nsq += v * v;
            }
            let w = match measure {
                MeasureKind::Gaussian => (-nsq).exp() * cell / SQRT_PI.powi(dim as i32),
                MeasureKind::Lebesgue => cell,
            };
            weights.push(w);
            for k in (0..dim).rev() {
                idx[k] += 1;
                if idx[k] < n_per_axis {
                    break;
                }
                idx[k] = 0;
            }
        }
        let log_weights = weights.iter().map(|w: &f64| w.ln()).collect();
        QuadratureScheme {
            kind: SchemeKind::TruncatedUniform(measure),
            dim,
            nodes,
            weights,
            log_weights,
            truncation_radius: Some(radius),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn log_weight(&self, i: usize) -> f64 {
        self.log_weights[i]
    }

    pub fn measure(&self) -> MeasureKind {
        match self.kind {
            SchemeKind::GaussHermiteTensor => MeasureKind::Gaussian,
            SchemeKind::TruncatedUniform(m) => m,
        }
    }

    /// Total weight; 1 (within roundoff) for Gaussian schemes covering the mass.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Integrate a function by the plain weighted sum.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|i| self.weight(i) * f(self.node(i))).sum()
    }
}

// ---------------------------------------------------------------------------
// Adaptive Gauss–Kronrod integration
// ---------------------------------------------------------------------------

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
const XGK: [f64; 15] = [
    -0.991455371120813,
    -0.949107912342759,
    -0.864864423359769,
    -0.741531185599394,
    -0.586087235467691,
    -0.405845151377397,
    -0.207784955007898,
    0.0,
    0.207784955007898,
    0.405845151377397,
    0.586087235467691,
    0.741531185599394,
    0.864864423359769,
    0.949107912342759,
    0.991455371120813,
];
const WGK: [f64; 15] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
    0.204432940075298,
    0.190350578064785,
    0.169004726639267,
    0.140653259715525,
    0.104790010322250,
    0.063092092629979,
    0.022935322010529,
];
const WG7: [f64; 7] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
    0.381830050505119,
    0.279705391489277,
    0.129484966168870,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = 0.0;
    let mut g = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let v = f(c + h * x);
        k += wk * v;
        if i % 2 == 1 {
            g += WG7[i / 2] * v;
        }
    }
    Panel {
        a,
        b,
        value: h * k,
        error: (h * (k - g)).abs(),
    }
}

/// Globally adaptive GK15 integration over a union of segments. The worst
/// panel is bisected until the summed error estimate drops below
/// `tol_abs + tol_rel * |value|` or the panel budget runs out.
pub fn integrate_adaptive(
    mut f: impl FnMut(f64) -> f64,
    segments: &[(f64, f64)],
    tol_rel: f64,
    tol_abs: f64,
    max_panels: usize,
) -> AdaptiveResult {
    let mut panels: Vec<Panel> = segments
        .iter()
        .filter(|(a, b)| b > a)
        .map(|&(a, b)| gk15(&mut f, a, b))
        .collect();
    if panels.is_empty() {
        return AdaptiveResult { value: 0.0, error: 0.0, panels: 0, converged: true };
    }
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= tol_abs + tol_rel * value.abs() {
            return AdaptiveResult { value, error, panels: panels.len(), converged: true };
        }
        if panels.len() >= max_panels {
            return AdaptiveResult { value, error, panels: panels.len(), converged: false };
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .unwrap();
        let Panel { a, b, .. } = panels[worst];
        let mid = 0.5 * (a + b);
        panels[worst] = gk15(&mut f, a, mid);
        panels.push(gk15(&mut f, mid, b));
    }
}

/// Fixed Gauss–Legendre integration of `f` over `[a, b]`.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, order: usize) -> f64 {
    let rule = legendre_rule(order);
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    rule.nodes
        .iter()
        .zip(rule.weights.iter())
        .map(|(&x, &w)| w * f(c + h * x))
        .sum::<f64>()
        * h
}

// ---------------------------------------------------------------------------
// Uniform grids (midpoint cells), used by the maximal function and the
// distribution-function sampling.
// ---------------------------------------------------------------------------

/// Uniform midpoint grid on `[-radius, radius]^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub n_per_axis: usize,
    pub radius: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n_per_axis: usize, radius: f64) -> Result<Self> {
        if dim < 1 || dim > 3 {
            return Err(Error::InvalidInput(format!("grid dimension {dim} not in 1..=3")));
        }
        if n_per_axis == 0 || !(radius > 0.0) {
            return Err(Error::InvalidInput("grid needs n_per_axis > 0 and radius > 0".into()));
        }
        Ok(GridSpec { dim, n_per_axis, radius })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / self.n_per_axis as f64
    }

    pub fn len(&self) -> usize {
        self.n_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell-center coordinates of the flat index `i`.
    pub fn point(&self, i: usize) -> Vec<f64> {
        let h = self.spacing();
        let mut out = Vec::with_capacity(self.dim);
        let mut rem = i;
        for _ in 0..self.dim {
            let k = rem % self.n_per_axis;
            rem /= self.n_per_axis;
            out.push(-self.radius + (k as f64 + 0.5) * h);
        }
        out
    }

    /// Gaussian mass of the cell around point `i` (midpoint approximation).
    pub fn gamma_weight(&self, i: usize) -> f64 {
        let p = self.point(i);
        let nsq: f64 = p.iter().map(|v| v * v).sum();
        (-nsq).exp() * self.spacing().powi(self.dim as i32) / SQRT_PI.powi(self.dim as i32)
    }
}

/// Field values materialized on a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct GridField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..spec.len()).map(|i| f(&spec.point(i))).collect();
        GridField { spec, values }
    }
}
