//! Uniform meshes, sampled functions and periodic signals.
//!
//! Two sampled-function types cover every state this crate works with:
//! [`GridFn`] for functions on a closed interval (both endpoints stored) and
//! [`PeriodicSignal`] for periodic functions sampled over one period with the
//! right endpoint excluded. Both evaluate between nodes with local cubic
//! Hermite interpolation; node derivatives are estimated with fourth-order
//! finite differences so that the interpolant and the segment quadrature
//! below stay consistent to O(h^4).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("grid span must be positive (start {start}, end {end})")]
    EmptySpan { start: f64, end: f64 },
    #[error("dimension must be positive")]
    ZeroDim,
    #[error("value buffer has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("symmetric grid needs an odd node count, got {got}")]
    EvenSymmetric { got: usize },
    #[error("period must be positive and finite, got {got}")]
    BadPeriod { got: f64 },
    #[error("evaluation point {t} outside grid [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
}

/// Uniform 1-D mesh including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    t_start: f64,
    t_end: f64,
    n_nodes: usize,
}

impl UniformGrid {
    pub fn new(t_start: f64, t_end: f64, n_nodes: usize) -> Result<Self, GridError> {
        if n_nodes < 2 {
            return Err(GridError::TooFewNodes { min: 2, got: n_nodes });
        }
        if !(t_end > t_start) || !t_start.is_finite() || !t_end.is_finite() {
            return Err(GridError::EmptySpan { start: t_start, end: t_end });
        }
        Ok(Self { t_start, t_end, n_nodes })
    }

    /// Grid on `(-half_length, half_length)` with an odd node count, so the
    /// midpoint t = 0 is a node.
    pub fn symmetric(half_length: f64, n_nodes: usize) -> Result<Self, GridError> {
        if n_nodes % 2 == 0 {
            return Err(GridError::EvenSymmetric { got: n_nodes });
        }
        Self::new(-half_length, half_length, n_nodes)
    }

    pub fn start(&self) -> f64 {
        self.t_start
    }

    pub fn end(&self) -> f64 {
        self.t_end
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_nodes - 1) as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.step()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes).map(move |k| self.node(k))
    }

    /// Index of the node equal to `t` within a relative tolerance, if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let h = self.step();
        let k = ((t - self.t_start) / h).round();
        if k < 0.0 || k >= self.n_nodes as f64 {
            return None;
        }
        let k = k as usize;
        let tol = 1e-9 * h.max(self.t_end.abs()).max(self.t_start.abs()).max(1.0);
        ((t - self.node(k)).abs() <= tol).then_some(k)
    }
}

/// Fourth-order finite-difference estimate of the first derivative at node
/// `k` of uniformly sampled data. Falls back to second order when fewer than
/// five samples are available.
fn node_derivative(get: impl Fn(usize) -> f64, n: usize, k: usize, h: f64) -> f64 {
    if n < 5 {
        return if k == 0 {
            (get(1) - get(0)) / h
        } else if k == n - 1 {
            (get(n - 1) - get(n - 2)) / h
        } else {
            (get(k + 1) - get(k - 1)) / (2.0 * h)
        };
    }
    let d = |i: usize| get(i);
    if k >= 2 && k + 2 < n {
        (d(k - 2) - 8.0 * d(k - 1) + 8.0 * d(k + 1) - d(k + 2)) / (12.0 * h)
    } else if k == 0 {
        (-25.0 * d(0) + 48.0 * d(1) - 36.0 * d(2) + 16.0 * d(3) - 3.0 * d(4)) / (12.0 * h)
    } else if k == 1 {
        (-3.0 * d(0) - 10.0 * d(1) + 18.0 * d(2) - 6.0 * d(3) + d(4)) / (12.0 * h)
    } else if k == n - 2 {
        (3.0 * d(n - 1) + 10.0 * d(n - 2) - 18.0 * d(n - 3) + 6.0 * d(n - 4) - d(n - 5))
            / (12.0 * h)
    } else {
        (25.0 * d(n - 1) - 48.0 * d(n - 2) + 36.0 * d(n - 3) - 16.0 * d(n - 4) + 3.0 * d(n - 5))
            / (12.0 * h)
    }
}

fn node_derivative_periodic(get: impl Fn(usize) -> f64, n: usize, k: usize, h: f64) -> f64 {
    let at = |off: isize| {
        let i = (k as isize + off).rem_euclid(n as isize) as usize;
        get(i)
    };
    if n < 5 {
        return (at(1) - at(-1)) / (2.0 * h);
    }
    (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h)
}

/// Cubic Hermite value on a unit-parameter segment.
fn hermite(theta: f64, y0: f64, y1: f64, d0: f64, d1: f64, h: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + theta;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Exact integral of the Hermite cubic over one segment of width `h`.
pub(crate) fn hermite_segment_integral(y0: f64, y1: f64, d0: f64, d1: f64, h: f64) -> f64 {
    0.5 * h * (y0 + y1) + h * h * (d0 - d1) / 12.0
}

/// Values of a (possibly vector-valued) function on a uniform mesh.
///
/// Storage is node-major: `values[k * dim + c]` holds component `c` at node
/// `k`. This is the discrete stand-in for sup-normed function-space states.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    grid: UniformGrid,
    dim: usize,
    values: Vec<f64>,
}

impl GridFn {
    pub fn zeros(grid: UniformGrid, dim: usize) -> Self {
        Self { grid, dim, values: vec![0.0; grid.n_nodes() * dim] }
    }

    pub fn from_values(grid: UniformGrid, dim: usize, values: Vec<f64>) -> Result<Self, GridError> {
        if dim == 0 {
            return Err(GridError::ZeroDim);
        }
        let expected = grid.n_nodes() * dim;
        if values.len() != expected {
            return Err(GridError::LengthMismatch { expected, got: values.len() });
        }
        Ok(Self { grid, dim, values })
    }

    pub fn from_scalar_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, dim: 1, values }
    }

    pub fn from_fn(grid: UniformGrid, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Self {
        let mut values = vec![0.0; grid.n_nodes() * dim];
        for (k, t) in grid.nodes().enumerate() {
            f(t, &mut values[k * dim..(k + 1) * dim]);
        }
        Self { grid, dim, values }
    }

    pub fn constant(grid: UniformGrid, value: &[f64]) -> Self {
        let dim = value.len();
        let values = (0..grid.n_nodes()).flat_map(|_| value.iter().copied()).collect();
        Self { grid, dim, values }
    }

    pub fn grid(&self) -> UniformGrid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn value(&self, node: usize, comp: usize) -> f64 {
        self.values[node * self.dim + comp]
    }

    pub fn set(&mut self, node: usize, comp: usize, v: f64) {
        self.values[node * self.dim + comp] = v;
    }

    pub fn node_values(&self, node: usize) -> &[f64] {
        &self.values[node * self.dim..(node + 1) * self.dim]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_dist(&self, other: &GridFn) -> f64 {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Trapezoid-rule average per component.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.n_nodes();
        let mut out = vec![0.0; self.dim];
        for c in 0..self.dim {
            let mut sum = 0.5 * (self.value(0, c) + self.value(n - 1, c));
            for k in 1..n - 1 {
                sum += self.value(k, c);
            }
            out[c] = sum / (n - 1) as f64;
        }
        out
    }

    /// `self = alpha * self + beta * other`, entrywise.
    pub fn lin_comb(&mut self, alpha: f64, beta: f64, other: &GridFn) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a = alpha * *a + beta * *b;
        }
    }

    pub fn add_scalar(&mut self, shift: &[f64]) {
        debug_assert_eq!(shift.len(), self.dim);
        for chunk in self.values.chunks_mut(self.dim) {
            for (v, s) in chunk.iter_mut().zip(shift) {
                *v += s;
            }
        }
    }

    fn derivative_at(&self, comp: usize, k: usize) -> f64 {
        node_derivative(
            |i| self.value(i, comp),
            self.n_nodes(),
            k,
            self.grid.step(),
        )
    }

    /// Piecewise-cubic evaluation of one component. Node hits are exact.
    pub fn eval_comp(&self, t: f64, comp: usize) -> f64 {
        let g = &self.grid;
        let h = g.step();
        let span_tol = 1e-9 * (g.end() - g.start());
        let t = t.clamp(g.start() - span_tol, g.end() + span_tol);
        let raw = (t - g.start()) / h;
        let near = raw.round();
        if (raw - near).abs() <= 1e-9 && near >= 0.0 && (near as usize) < g.n_nodes() {
            return self.value(near as usize, comp);
        }
        let j = (raw.floor() as usize).min(g.n_nodes() - 2);
        let theta = raw - j as f64;
        hermite(
            theta,
            self.value(j, comp),
            self.value(j + 1, comp),
            self.derivative_at(comp, j),
            self.derivative_at(comp, j + 1),
            h,
        )
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        for c in 0..self.dim {
            out[c] = self.eval_comp(t, c);
        }
    }

    /// One-sided fourth-order derivative estimates at the two endpoints,
    /// per component: `(left, right)`.
    pub fn end_derivatives(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_nodes();
        let mut left = vec![0.0; self.dim];
        let mut right = vec![0.0; self.dim];
        for c in 0..self.dim {
            left[c] = node_derivative(|i| self.value(i, c), n, 0, self.grid.step());
            right[c] = node_derivative(|i| self.value(i, c), n, n - 1, self.grid.step());
        }
        (left, right)
    }

    /// Central second difference of one component at an interior node.
    pub fn second_difference(&self, node: usize, comp: usize) -> f64 {
        debug_assert!(node >= 1 && node + 1 < self.n_nodes());
        let h = self.grid.step();
        (self.value(node - 1, comp) - 2.0 * self.value(node, comp) + self.value(node + 1, comp))
            / (h * h)
    }

    /// Central first difference of one component at an interior node.
    pub fn first_difference(&self, node: usize, comp: usize) -> f64 {
        debug_assert!(node >= 1 && node + 1 < self.n_nodes());
        (self.value(node + 1, comp) - self.value(node - 1, comp)) / (2.0 * self.grid.step())
    }
}

/// An ω-periodic function stored as samples over `[0, ω)`.
///
/// The right endpoint is excluded; evaluation wraps around, and the mean is
/// the plain sample average (the rectangle rule, spectrally accurate for
/// smooth periodic integrands).
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicSignal {
    period: f64,
    dim: usize,
    samples: Vec<f64>,
}

impl PeriodicSignal {
    pub fn new(period: f64, dim: usize, samples: Vec<f64>) -> Result<Self, GridError> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(GridError::BadPeriod { got: period });
        }
        if dim == 0 {
            return Err(GridError::ZeroDim);
        }
        if samples.len() < 4 * dim || samples.len() % dim != 0 {
            return Err(GridError::TooFewNodes { min: 4, got: samples.len() / dim.max(1) });
        }
        Ok(Self { period, dim, samples })
    }

    pub fn from_scalar_fn(period: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        let samples = (0..n).map(|k| f(k as f64 * period / n as f64)).collect();
        Self::new(period, 1, samples)
    }

    pub fn constant(period: f64, n: usize, value: f64) -> Result<Self, GridError> {
        Self::new(period, 1, vec![value; n])
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn step(&self) -> f64 {
        self.period / self.n_samples() as f64
    }

    pub fn sample_time(&self, k: usize) -> f64 {
        k as f64 * self.step()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample(&self, k: usize, comp: usize) -> f64 {
        self.samples[k * self.dim + comp]
    }

    /// Rectangle-rule average per component.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.n_samples();
        let mut out = vec![0.0; self.dim];
        for c in 0..self.dim {
            out[c] = (0..n).map(|k| self.sample(k, c)).sum::<f64>() / n as f64;
        }
        out
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_sample(&self, comp: usize) -> f64 {
        (0..self.n_samples()).fold(f64::INFINITY, |m, k| m.min(self.sample(k, comp)))
    }

    fn derivative_at(&self, comp: usize, k: usize) -> f64 {
        node_derivative_periodic(
            |i| self.sample(i, comp),
            self.n_samples(),
            k,
            self.step(),
        )
    }

    /// Periodic cubic evaluation of one component; `t` is taken mod ω.
    pub fn eval_comp(&self, t: f64, comp: usize) -> f64 {
        let n = self.n_samples();
        let h = self.step();
        let mut u = (t / self.period).fract();
        if u < 0.0 {
            u += 1.0;
        }
        let raw = u * n as f64;
        let near = raw.round();
        if (raw - near).abs() <= 1e-9 {
            return self.sample(near as usize % n, comp);
        }
        let j = (raw.floor() as usize).min(n - 1);
        let theta = raw - j as f64;
        let j1 = (j + 1) % n;
        hermite(
            theta,
            self.sample(j, comp),
            self.sample(j1, comp),
            self.derivative_at(comp, j),
            self.derivative_at(comp, j1),
            h,
        )
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        for c in 0..self.dim {
            out[c] = self.eval_comp(t, c);
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> PeriodicSignal {
        PeriodicSignal {
            period: self.period,
            dim: self.dim,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &PeriodicSignal, f: impl Fn(f64, f64) -> f64) -> PeriodicSignal {
        debug_assert_eq!(self.samples.len(), other.samples.len());
        PeriodicSignal {
            period: self.period,
            dim: self.dim,
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Cumulative integral of one component at the sample nodes, with the
    /// full-period value appended (`n + 1` entries). Uses exact integrals of
    /// the Hermite interpolant segment by segment.
    pub fn cumulative_integral(&self, comp: usize) -> Vec<f64> {
        let n = self.n_samples();
        let h = self.step();
        let mut out = Vec::with_capacity(n + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for k in 0..n {
            let k1 = (k + 1) % n;
            acc += hermite_segment_integral(
                self.sample(k, comp),
                self.sample(k1, comp),
                self.derivative_at(comp, k),
                self.derivative_at(comp, k1),
                h,
            );
            out.push(acc);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn grid_nodes_and_step() {
        let g = UniformGrid::symmetric(1.0, 401).unwrap();
        assert_abs_diff_eq!(g.step(), 0.005, epsilon = 1e-15);
        assert_eq!(g.index_of(0.0), Some(200));
        assert!(g.index_of(0.0024).is_none());
        assert!(UniformGrid::symmetric(1.0, 400).is_err());
        assert!(UniformGrid::new(1.0, 1.0, 10).is_err());
    }

    #[test]
    fn mean_of_constant_is_constant() {
        let s = PeriodicSignal::constant(2.0, 64, 3.5).unwrap();
        assert_abs_diff_eq!(s.mean()[0], 3.5, epsilon = 1e-15);
        let g = UniformGrid::new(0.0, 1.0, 11).unwrap();
        let f = GridFn::constant(g, &[3.5]);
        assert_abs_diff_eq!(f.mean()[0], 3.5, epsilon = 1e-15);
    }

    #[test]
    fn periodic_means_match_closed_forms() {
        let omega = 2.0;
        let s = PeriodicSignal::from_scalar_fn(omega, 64, |t| (2.0 * PI * t / omega).sin()).unwrap();
        assert_abs_diff_eq!(s.mean()[0], 0.0, epsilon = 1e-12);
        let s2 =
            PeriodicSignal::from_scalar_fn(omega, 64, |t| (2.0 * PI * t / omega).sin().powi(2))
                .unwrap();
        assert_abs_diff_eq!(s2.mean()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn interpolation_is_node_exact_and_accurate() {
        let g = UniformGrid::new(0.0, 1.0, 101).unwrap();
        let f = GridFn::from_scalar_fn(g, |t| (2.0 * t).sin());
        for (k, t) in g.nodes().enumerate() {
            assert_eq!(f.eval_comp(t, 0), f.value(k, 0));
        }
        let mut worst: f64 = 0.0;
        for i in 0..500 {
            let t = i as f64 / 499.0;
            worst = worst.max((f.eval_comp(t, 0) - (2.0 * t).sin()).abs());
        }
        assert!(worst < 1e-8, "interp error {worst}");
    }

    #[test]
    fn periodic_interpolation_wraps() {
        let omega = 3.0;
        let s = PeriodicSignal::from_scalar_fn(omega, 128, |t| (2.0 * PI * t / omega).cos()).unwrap();
        for i in 0..200 {
            let t = -4.0 + i as f64 * 0.05;
            let exact = (2.0 * PI * t / omega).cos();
            assert_abs_diff_eq!(s.eval_comp(t, 0), exact, epsilon = 1e-7);
        }
    }

    #[test]
    fn cumulative_integral_of_smooth_signal() {
        let omega = 1.0;
        let s = PeriodicSignal::from_scalar_fn(omega, 256, |t| (2.0 * PI * t).sin() + 2.0).unwrap();
        let cum = s.cumulative_integral(0);
        // exact cumulative: (1 - cos(2 pi t)) / (2 pi) + 2 t
        for (k, &v) in cum.iter().enumerate() {
            let t = k as f64 / 256.0;
            let exact = (1.0 - (2.0 * PI * t).cos()) / (2.0 * PI) + 2.0 * t;
            assert_abs_diff_eq!(v, exact, epsilon = 2e-9);
        }
        assert_abs_diff_eq!(cum[256], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn end_derivatives_fourth_order() {
        let g = UniformGrid::new(0.0, 1.0, 201).unwrap();
        let f = GridFn::from_scalar_fn(g, |t| (3.0 * t).sin());
        let (l, r) = f.end_derivatives();
        assert_abs_diff_eq!(l[0], 3.0, epsilon = 1e-7);
        assert_abs_diff_eq!(r[0], 3.0 * (3.0f64).cos(), epsilon = 1e-7);
    }
}
