//! Error bounds for approximating a smooth 2D field by its value at each cell mid-point,
//! plus a quadrature oracle for the true error.
//!
//! Over a partition with `B` cells of at most `l_x` by `l_y`, the summed absolute
//! per-cell error is at most `B / 24 * (max|f_xx| l_x^3 l_y + max|f_yy| l_x l_y^3)`.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Quadrature points per cell axis used by [`midpoint_error`].
pub const QUADRATURE_POINTS: usize = 64;

/// Derivative maxima are sampled at this many points per smallest cell edge.
pub const DEFAULT_SAMPLES_PER_CELL: usize = 10;

/// A twice continuously differentiable `f(x, y)`.
pub trait SmoothField: Sync {
    fn value(&self, x: f64, y: f64) -> f64;
    fn fxx(&self, x: f64, y: f64) -> f64;
    fn fyy(&self, x: f64, y: f64) -> f64;
}

/// `a * x^2 + b * y^2`.
#[derive(Clone, Copy, Debug)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
}

impl SmoothField for Quadratic {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.a * x * x + self.b * y * y
    }
    fn fxx(&self, _: f64, _: f64) -> f64 {
        2.0 * self.a
    }
    fn fyy(&self, _: f64, _: f64) -> f64 {
        2.0 * self.b
    }
}

/// The imaging model: `background + amplitude * exp(-|p - center|^2 / (2 sigma^2))`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianSpot {
    pub center: (f64, f64),
    pub sigma: f64,
    pub amplitude: f64,
    pub background: f64,
}

impl GaussianSpot {
    fn bump(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        self.amplitude * (-(dx * dx + dy * dy) / (2.0 * self.sigma * self.sigma)).exp()
    }

    fn second(&self, d: f64, bump: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        bump * (d * d / (s2 * s2) - 1.0 / s2)
    }
}

impl SmoothField for GaussianSpot {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.background + self.bump(x, y)
    }
    fn fxx(&self, x: f64, y: f64) -> f64 {
        self.second(x - self.center.0, self.bump(x, y))
    }
    fn fyy(&self, x: f64, y: f64) -> f64 {
        self.second(y - self.center.1, self.bump(x, y))
    }
}

/// `sin(x) * sin(y)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct SinSin;

impl SmoothField for SinSin {
    fn value(&self, x: f64, y: f64) -> f64 {
        x.sin() * y.sin()
    }
    fn fxx(&self, x: f64, y: f64) -> f64 {
        -x.sin() * y.sin()
    }
    fn fyy(&self, x: f64, y: f64) -> f64 {
        -x.sin() * y.sin()
    }
}

/// Rectangular domain split into a tensor grid of cells given by their edges.
#[derive(Clone, Debug, PartialEq)]
pub struct DomainPartition {
    x_edges: Vec<f64>,
    y_edges: Vec<f64>,
}

fn check_edges(name: &'static str, edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::invalid(name, "need at least two edges"));
    }
    if !edges.iter().all(|e| e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(name, "edges must be finite and strictly increasing"));
    }
    Ok(())
}

fn uniform_edges(lo: f64, hi: f64, l: f64) -> Vec<f64> {
    // a trailing sliver narrower than 1e-9 cells is absorbed into the last cell
    let n = ((hi - lo) / l - 1e-9).ceil().max(1.0) as usize;
    (0..=n).map(|i| if i == n { hi } else { lo + i as f64 * l }).collect()
}

impl DomainPartition {
    pub fn new(x_edges: Vec<f64>, y_edges: Vec<f64>) -> Result<Self> {
        check_edges("x_edges", &x_edges)?;
        check_edges("y_edges", &y_edges)?;
        Ok(Self { x_edges, y_edges })
    }

    /// Cells of `lx` by `ly` from the lower-left corner; the last row/column is cut at the domain edge.
    pub fn uniform(x: (f64, f64), y: (f64, f64), lx: f64, ly: f64) -> Result<Self> {
        if !(lx > 0.0 && ly > 0.0) {
            return Err(Error::invalid("cell size", format!("must be > 0, got {lx} x {ly}")));
        }
        if !(x.1 > x.0 && y.1 > y.0) {
            return Err(Error::invalid("domain", "empty domain"));
        }
        Self::new(uniform_edges(x.0, x.1, lx), uniform_edges(y.0, y.1, ly))
    }

    pub fn square(x: (f64, f64), y: (f64, f64), l: f64) -> Result<Self> {
        Self::uniform(x, y, l, l)
    }

    pub fn x_edges(&self) -> &[f64] {
        &self.x_edges
    }

    pub fn y_edges(&self) -> &[f64] {
        &self.y_edges
    }

    pub fn cell_count(&self) -> usize {
        (self.x_edges.len() - 1) * (self.y_edges.len() - 1)
    }

    pub fn domain(&self) -> ((f64, f64), (f64, f64)) {
        let (x, y) = (&self.x_edges, &self.y_edges);
        ((x[0], x[x.len() - 1]), (y[0], y[y.len() - 1]))
    }

    /// Largest cell width and height.
    pub fn max_cell(&self) -> (f64, f64) {
        (max_gap(&self.x_edges), max_gap(&self.y_edges))
    }

    fn min_cell(&self) -> f64 {
        let m = |e: &[f64]| e.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        m(&self.x_edges).min(m(&self.y_edges))
    }

    /// `(x0, x1, y0, y1)` of cell `(col, row)`.
    pub fn cell(&self, col: usize, row: usize) -> (f64, f64, f64, f64) {
        (self.x_edges[col], self.x_edges[col + 1], self.y_edges[row], self.y_edges[row + 1])
    }
}

fn max_gap(e: &[f64]) -> f64 {
    e.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
}

/// `max|f_xx|` and `max|f_yy|` over the partition's domain, sampled on a regular grid whose
/// spacing is at most the smallest cell edge divided by `samples_per_cell`.
pub fn derivative_maxima<F: SmoothField + ?Sized>(
    field: &F,
    part: &DomainPartition,
    samples_per_cell: usize,
) -> (f64, f64) {
    let ((x0, x1), (y0, y1)) = part.domain();
    let step = part.min_cell() / samples_per_cell.max(1) as f64;
    let nx = ((x1 - x0) / step).ceil() as usize;
    let ny = ((y1 - y0) / step).ceil() as usize;
    let (mut mxx, mut myy) = (0.0f64, 0.0f64);
    for j in 0..=ny {
        let y = y0 + (y1 - y0) * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = x0 + (x1 - x0) * i as f64 / nx as f64;
            mxx = mxx.max(field.fxx(x, y).abs());
            myy = myy.max(field.fyy(x, y).abs());
        }
    }
    (mxx, myy)
}

/// Bound on the summed per-cell mid-point error for a rectangular partition.
pub fn rect_bound<F: SmoothField + ?Sized>(field: &F, part: &DomainPartition) -> f64 {
    rect_bound_sampled(field, part, DEFAULT_SAMPLES_PER_CELL)
}

pub fn rect_bound_sampled<F: SmoothField + ?Sized>(
    field: &F,
    part: &DomainPartition,
    samples_per_cell: usize,
) -> f64 {
    let (mxx, myy) = derivative_maxima(field, part, samples_per_cell);
    let (lx, ly) = part.max_cell();
    part.cell_count() as f64 / 24.0 * (mxx * lx.powi(3) * ly + myy * lx * ly.powi(3))
}

/// Bound for square cells of edge `l` tiling `domain`.
pub fn square_bound<F: SmoothField + ?Sized>(field: &F, l: f64, domain: ((f64, f64), (f64, f64))) -> Result<f64> {
    let part = DomainPartition::square(domain.0, domain.1, l)?;
    let (mxx, myy) = derivative_maxima(field, &part, DEFAULT_SAMPLES_PER_CELL);
    let l = part.max_cell().0.max(part.max_cell().1);
    Ok(part.cell_count() as f64 * l.powi(4) / 24.0 * (mxx + myy))
}

/// Per-cell absolute error of the mid-point approximation, summed:
/// `sum_k |integral over cell k of (f - f(mid_k))|`, by tensor Gauss-Legendre quadrature.
pub fn midpoint_error<F: SmoothField + ?Sized>(field: &F, part: &DomainPartition, exec: Execution) -> f64 {
    let rule = GaussLegendre::new(NonZeroUsize::new(QUADRATURE_POINTS).expect("nonzero"));
    let nodes = rule.as_node_weight_pairs();
    let cols = part.x_edges.len() - 1;
    let per_cell = exec.map(part.cell_count(), |k| {
        let (x0, x1, y0, y1) = part.cell(k % cols, k / cols);
        let (hx, hy) = ((x1 - x0) / 2.0, (y1 - y0) / 2.0);
        let (mx, my) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
        let mid = field.value(mx, my);
        let mut acc = 0.0;
        for &(v, wv) in nodes {
            let y = my + hy * v;
            let mut row = 0.0;
            for &(u, wu) in nodes {
                row += wu * (field.value(mx + hx * u, y) - mid);
            }
            acc += wv * row;
        }
        (acc * hx * hy).abs()
    });
    per_cell.iter().sum()
}

/// One row of the bounds study.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsRow {
    pub field: String,
    pub cell_size: f64,
    pub true_error: f64,
    pub rect_bound: f64,
    pub square_bound: f64,
}

/// Domain shared by the built-in study fields.
pub const STUDY_DOMAIN: ((f64, f64), (f64, f64)) = ((0.0, 4.0), (0.0, 4.0));

/// Cell edges swept by the study.
pub const STUDY_CELL_SIZES: [f64; 4] = [1.0, 0.5, 0.25, 0.125];

/// The built-in fields on [`STUDY_DOMAIN`]: quadratic, a small-object spot and sin*sin.
pub fn study_fields() -> Vec<(&'static str, Box<dyn SmoothField>)> {
    vec![
        ("quadratic", Box::new(Quadratic { a: 1.0, b: 1.0 })),
        (
            "gaussian",
            Box::new(GaussianSpot {
                center: (2.0, 2.0),
                sigma: 1.16,
                amplitude: 22.97,
                background: 10.0,
            }),
        ),
        ("sinsin", Box::new(SinSin)),
    ]
}

/// True error and both bounds for every built-in field and cell size.
pub fn bounds_study(cell_sizes: &[f64], exec: Execution) -> Result<Vec<BoundsRow>> {
    let (dx, dy) = STUDY_DOMAIN;
    let mut rows = Vec::new();
    for (name, field) in study_fields() {
        for &l in cell_sizes {
            let part = DomainPartition::square(dx, dy, l)?;
            rows.push(BoundsRow {
                field: name.to_string(),
                cell_size: l,
                true_error: midpoint_error(field.as_ref(), &part, exec),
                rect_bound: rect_bound(field.as_ref(), &part),
                square_bound: square_bound(field.as_ref(), l, STUDY_DOMAIN)?,
            });
        }
    }
    Ok(rows)
}
