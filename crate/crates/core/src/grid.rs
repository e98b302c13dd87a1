//! Uniform discretization of the square Ω = (−1, 1)² and of the angle
//! interval, plus boundary enumeration with outward normals.
//!
//! Nodes are indexed row-major: `node = j * n_x + i`, where `i` runs along x
//! and `j` along y, both zero-based.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform `n_x × n_x` grid over (−1, 1)².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    n_x: usize,
    dx: f64,
}

impl Grid2D {
    pub fn new(n_x: usize) -> Result<Self> {
        if n_x < 3 {
            return Err(Error::invalid(format!("n_x must be at least 3, got {n_x}")));
        }
        Ok(Self {
            n_x,
            dx: 2.0 / (n_x - 1) as f64,
        })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Total node count `n_x²`.
    pub fn len(&self) -> usize {
        self.n_x * self.n_x
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of the `i`-th node along either axis. Endpoints are exact.
    pub fn coord(&self, i: usize) -> f64 {
        let last = (self.n_x - 1) as f64;
        (2.0 * i as f64 - last) / last
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.n_x + i
    }

    pub fn ij(&self, node: usize) -> (usize, usize) {
        (node % self.n_x, node / self.n_x)
    }

    pub fn xy(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.ij(node);
        (self.coord(i), self.coord(j))
    }

    /// Index of the node nearest to `(x, y)`, clamped into the grid.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let snap = |v: f64| -> usize {
            let t = ((v + 1.0) / self.dx).round();
            t.clamp(0.0, (self.n_x - 1) as f64) as usize
        };
        self.node(snap(x), snap(y))
    }

    /// Number of node layers between `node` and the closest edge (0 on ∂Ω).
    pub fn layer(&self, node: usize) -> usize {
        let (i, j) = self.ij(node);
        let last = self.n_x - 1;
        i.min(j).min(last - i).min(last - j)
    }

    pub fn interior_count(&self) -> usize {
        (self.n_x - 2) * (self.n_x - 2)
    }

    pub fn boundary(&self) -> BoundaryDescriptor {
        BoundaryDescriptor::new(*self)
    }
}

/// Uniform grid on `[theta_min, theta_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleGrid {
    n_theta: usize,
    theta_min: f64,
    theta_max: f64,
    d_theta: f64,
}

impl AngleGrid {
    pub fn new(n_theta: usize, theta_min: f64, theta_max: f64) -> Result<Self> {
        if n_theta < 3 {
            return Err(Error::invalid(format!("n_theta must be at least 3, got {n_theta}")));
        }
        if !(theta_max > theta_min) || !theta_min.is_finite() || !theta_max.is_finite() {
            return Err(Error::invalid(format!(
                "degenerate angle interval [{theta_min}, {theta_max}]"
            )));
        }
        Ok(Self {
            n_theta,
            theta_min,
            theta_max,
            d_theta: (theta_max - theta_min) / (n_theta - 1) as f64,
        })
    }

    /// The full aperture `[0, 2π]`.
    pub fn full(n_theta: usize) -> Result<Self> {
        Self::new(n_theta, 0.0, 2.0 * std::f64::consts::PI)
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn theta_min(&self) -> f64 {
        self.theta_min
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn d_theta(&self) -> f64 {
        self.d_theta
    }

    pub fn length(&self) -> f64 {
        self.theta_max - self.theta_min
    }

    /// Midpoint θ₀ of the interval.
    pub fn theta0(&self) -> f64 {
        0.5 * (self.theta_min + self.theta_max)
    }

    pub fn theta(&self, l: usize) -> f64 {
        if l + 1 == self.n_theta {
            return self.theta_max;
        }
        let last = (self.n_theta - 1) as f64;
        self.theta_min + (self.theta_max - self.theta_min) * (l as f64 / last)
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta).map(|l| self.theta(l)).collect()
    }

    /// Composite trapezoid weights on the grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        trapezoid_weights(self.n_theta, self.d_theta)
    }

    /// Refined grid with `refine · (n_theta − 1) + 1` points on the same interval.
    pub fn refined(&self, refine: usize) -> Result<Self> {
        if refine == 0 {
            return Err(Error::invalid("refine factor must be at least 1"));
        }
        Self::new(refine * (self.n_theta - 1) + 1, self.theta_min, self.theta_max)
    }
}

pub(crate) fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] = 0.5 * h;
    w[n - 1] = 0.5 * h;
    w
}

/// One of the four sides of the square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Edge {
    Bottom,
    Right,
    Top,
    Left,
}

impl Edge {
    pub fn normal(self) -> [i32; 2] {
        match self {
            Edge::Bottom => [0, -1],
            Edge::Right => [1, 0],
            Edge::Top => [0, 1],
            Edge::Left => [-1, 0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Edge::Bottom => "bottom",
            Edge::Right => "right",
            Edge::Top => "top",
            Edge::Left => "left",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bottom" => Ok(Edge::Bottom),
            "right" => Ok(Edge::Right),
            "top" => Ok(Edge::Top),
            "left" => Ok(Edge::Left),
            other => Err(Error::invalid(format!("unknown edge '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryNode {
    pub node: usize,
    pub i: usize,
    pub j: usize,
    /// Edge owning this node; corners belong to the edge that reaches them first.
    pub edge: Edge,
}

impl BoundaryNode {
    pub fn normal(&self) -> [i32; 2] {
        self.edge.normal()
    }

    pub fn normal_f64(&self) -> [f64; 2] {
        let [a, b] = self.normal();
        [a as f64, b as f64]
    }

    /// Node reached by stepping `depth` cells inward along the normal.
    pub fn inward(&self, grid: &Grid2D, depth: usize) -> usize {
        let [nx, ny] = self.normal();
        let i = self.i as i64 - nx as i64 * depth as i64;
        let j = self.j as i64 - ny as i64 * depth as i64;
        grid.node(i as usize, j as usize)
    }

    pub fn is_corner(&self, grid: &Grid2D) -> bool {
        let last = grid.n_x() - 1;
        (self.i == 0 || self.i == last) && (self.j == 0 || self.j == last)
    }
}

/// Ordered boundary traversal: bottom edge left→right, right edge
/// bottom→top, top edge right→left, left edge top→bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDescriptor {
    grid: Grid2D,
    nodes: Vec<BoundaryNode>,
}

impl BoundaryDescriptor {
    fn new(grid: Grid2D) -> Self {
        let n = grid.n_x();
        let last = n - 1;
        let mut nodes = Vec::with_capacity(4 * n - 4);
        let mut push = |i: usize, j: usize, edge: Edge| {
            nodes.push(BoundaryNode {
                node: grid.node(i, j),
                i,
                j,
                edge,
            })
        };
        for i in 0..n {
            push(i, 0, Edge::Bottom);
        }
        for j in 1..n {
            push(last, j, Edge::Right);
        }
        for i in (0..last).rev() {
            push(i, last, Edge::Top);
        }
        for j in (1..last).rev() {
            push(0, j, Edge::Left);
        }
        Self { grid, nodes }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[BoundaryNode] {
        &self.nodes
    }

    pub fn get(&self, b: usize) -> &BoundaryNode {
        &self.nodes[b]
    }

    /// Boundary indices lying on `edge` geometrically, corners included,
    /// ordered by increasing coordinate along the edge.
    pub fn edge_indices(&self, edge: Edge) -> Vec<usize> {
        let last = self.grid.n_x() - 1;
        let mut idx: Vec<(usize, usize)> = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(b, bn)| {
                let on = match edge {
                    Edge::Bottom => bn.j == 0,
                    Edge::Top => bn.j == last,
                    Edge::Left => bn.i == 0,
                    Edge::Right => bn.i == last,
                };
                let along = match edge {
                    Edge::Bottom | Edge::Top => bn.i,
                    Edge::Left | Edge::Right => bn.j,
                };
                on.then_some((along, b))
            })
            .collect();
        idx.sort_unstable();
        idx.into_iter().map(|(_, b)| b).collect()
    }
}

/// Complex samples of a function on every grid node, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    grid: Grid2D,
    values: Vec<Complex64>,
}

impl ScalarField2D {
    pub fn new(grid: Grid2D, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                context: "scalar field",
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid2D) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn constant(grid: Grid2D, value: f64) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(value, 0.0); grid.len()],
        }
    }

    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|node| {
                let (x, y) = grid.xy(node);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub fn from_real(grid: Grid2D, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn max_real(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn trace(&self, boundary: &BoundaryDescriptor) -> BoundaryTrace {
        BoundaryTrace {
            boundary: boundary.clone(),
            values: boundary.nodes().iter().map(|b| self.values[b.node]).collect(),
        }
    }
}

/// Complex values attached to the ordered boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    pub boundary: BoundaryDescriptor,
    pub values: Vec<Complex64>,
}
