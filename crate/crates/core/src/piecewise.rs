//! Piecewise-constant importance weighting (pcSIR).
//!
//! Particles are binned on their spatial components. Each occupied cell gets one dummy
//! particle, the likelihood is evaluated once at that dummy, and every member's weight is
//! multiplied by the same value. Binning ignores velocity and intensity; the dummy
//! carries their mean.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::filter::{self, FilterConfig, Likelihood, Trajectory};
use crate::imaging::ImageFrame;
use crate::state::{DynamicsParams, ParticleSet, StateVector};

/// Column/row of a grid cell. Orders row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex {
    pub row: u64,
    pub col: u64,
}

impl CellIndex {
    pub fn new(col: u64, row: u64) -> Self {
        Self { row, col }
    }
}

/// Axis-aligned bounds of one cell, `[x0, x1) x [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellGeometry {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl CellGeometry {
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
    }
}

/// Uniform rectangular cells tiling `[origin, origin + extent * cell_size)`.
///
/// Points outside the extent map to the nearest boundary cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinGrid {
    origin: (f64, f64),
    cell_width: f64,
    cell_height: f64,
    n_cols: u64,
    n_rows: u64,
}

impl BinGrid {
    pub fn new(origin: (f64, f64), cell_width: f64, cell_height: f64, n_cols: u64, n_rows: u64) -> Result<Self> {
        if !(cell_width > 0.0 && cell_width.is_finite() && cell_height > 0.0 && cell_height.is_finite()) {
            return Err(Error::invalid(
                "cell size",
                format!("must be positive, got {cell_width} x {cell_height}"),
            ));
        }
        if n_cols == 0 || n_rows == 0 {
            return Err(Error::invalid("grid extent", "need at least one column and one row"));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::invalid("grid origin", "must be finite"));
        }
        Ok(Self {
            origin,
            cell_width,
            cell_height,
            n_cols,
            n_rows,
        })
    }

    /// Square cells of edge `cell` covering a `width x height` image, with cell edges on
    /// pixel edges.
    pub fn over_frame(width: usize, height: usize, cell: f64) -> Result<Self> {
        if !(cell > 0.0 && cell.is_finite()) {
            return Err(Error::invalid("cell size", format!("must be positive, got {cell}")));
        }
        let cols = (width as f64 / cell).ceil().max(1.0) as u64;
        let rows = (height as f64 / cell).ceil().max(1.0) as u64;
        Self::new((-0.5, -0.5), cell, cell, cols, rows)
    }

    /// `subdivisions x subdivisions` cells per image pixel: `1` gives pcSIR-1x1, `2` gives pcSIR-2x2.
    pub fn pixel_aligned(width: usize, height: usize, subdivisions: u32) -> Result<Self> {
        if subdivisions == 0 {
            return Err(Error::invalid("subdivisions", "must be >= 1"));
        }
        Self::over_frame(width, height, 1.0 / subdivisions as f64)
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (self.cell_width, self.cell_height)
    }

    pub fn extent(&self) -> (u64, u64) {
        (self.n_cols, self.n_rows)
    }

    fn axis_index(v: f64, origin: f64, size: f64, count: u64) -> u64 {
        let f = ((v - origin) / size).floor();
        if f.is_nan() || f <= 0.0 {
            0
        } else if f >= (count - 1) as f64 {
            count - 1
        } else {
            f as u64
        }
    }

    /// Cell containing `(x, y)`; lower edges inclusive, upper edges exclusive.
    pub fn cell_of(&self, x: f64, y: f64) -> CellIndex {
        CellIndex {
            col: Self::axis_index(x, self.origin.0, self.cell_width, self.n_cols),
            row: Self::axis_index(y, self.origin.1, self.cell_height, self.n_rows),
        }
    }

    pub fn geometry(&self, cell: CellIndex) -> CellGeometry {
        let x0 = self.origin.0 + cell.col as f64 * self.cell_width;
        let y0 = self.origin.1 + cell.row as f64 * self.cell_height;
        CellGeometry {
            x0,
            x1: x0 + self.cell_width,
            y0,
            y1: y0 + self.cell_height,
        }
    }
}

/// Where the dummy particle of a cell sits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DummyPlacement {
    /// Mean of the member states (pcSIR-CoM).
    CenterOfMass,
    /// Geometric cell center; non-spatial components are the member mean (pcSIR-CoC).
    CellCenter,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcConfig {
    pub grid: BinGrid,
    pub placement: DummyPlacement,
    /// Weight member states by their current importance weights when averaging.
    /// Off by default: the dummy is the plain mean.
    pub weighted_mean: bool,
}

impl PcConfig {
    pub fn new(grid: BinGrid, placement: DummyPlacement) -> Self {
        Self {
            grid,
            placement,
            weighted_mean: false,
        }
    }
}

/// Partition of particle indices by occupied cell.
///
/// Cells are in row-major order; members of a cell are in ascending particle index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinOccupancy {
    cells: Vec<CellIndex>,
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl BinOccupancy {
    /// Number of occupied cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, k: usize) -> CellIndex {
        self.cells[k]
    }

    pub fn members(&self, k: usize) -> &[usize] {
        &self.order[self.starts[k]..self.starts[k + 1]]
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellIndex, &[usize])> + '_ {
        (0..self.len()).map(|k| (self.cells[k], self.members(k)))
    }

    pub fn particle_count(&self) -> usize {
        self.order.len()
    }

    fn from_sorted(order: Vec<usize>, keys: &[CellIndex]) -> Self {
        let mut cells = Vec::new();
        let mut starts = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            if cells.last() != Some(&keys[i]) {
                cells.push(keys[i]);
                starts.push(pos);
            }
        }
        starts.push(order.len());
        Self { cells, starts, order }
    }
}

/// Bins every particle by its `(x, y)` position.
pub fn assign_bins(set: &ParticleSet, grid: &BinGrid) -> BinOccupancy {
    let keys: Vec<CellIndex> = set
        .particles()
        .iter()
        .map(|p| grid.cell_of(p.state.x, p.state.y))
        .collect();
    group_by_cell(&keys)
}

fn group_by_cell(keys: &[CellIndex]) -> BinOccupancy {
    let n = keys.len();
    let (mut c0, mut c1, mut r0, mut r1) = (u64::MAX, 0, u64::MAX, 0);
    for k in keys {
        c0 = c0.min(k.col);
        c1 = c1.max(k.col);
        r0 = r0.min(k.row);
        r1 = r1.max(k.row);
    }
    let span = (c1 - c0 + 1) as u128 * (r1 - r0 + 1) as u128;

    if span <= (4 * n + 64) as u128 {
        // counting sort over the occupied bounding box: stable and O(N + span)
        let w = c1 - c0 + 1;
        let local = |k: &CellIndex| ((k.row - r0) * w + (k.col - c0)) as usize;
        let mut counts = vec![0usize; span as usize + 1];
        for k in keys {
            counts[local(k) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut order = vec![0usize; n];
        for (i, k) in keys.iter().enumerate() {
            let slot = &mut counts[local(k)];
            order[*slot] = i;
            *slot += 1;
        }
        BinOccupancy::from_sorted(order, keys)
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_unstable_by_key(|&i| (keys[i], i));
        BinOccupancy::from_sorted(order, keys)
    }
}

fn mean_state<'a>(members: impl Iterator<Item = (&'a StateVector, f64)>) -> StateVector {
    let mut acc = [0.0; 5];
    let mut total = 0.0;
    for (s, w) in members {
        for (a, c) in acc.iter_mut().zip(s.to_array()) {
            *a += w * c;
        }
        total += w;
    }
    StateVector::from_array(acc.map(|a| a / total))
}

fn place(mean: StateVector, cell: &CellGeometry, placement: DummyPlacement) -> StateVector {
    match placement {
        DummyPlacement::CenterOfMass => mean,
        DummyPlacement::CellCenter => {
            let (x, y) = cell.center();
            StateVector { x, y, ..mean }
        }
    }
}

/// Representative particle of an occupied cell.
///
/// # Panics
/// If `members` is empty; only occupied cells have dummies.
pub fn make_dummy(members: &[StateVector], cell: &CellGeometry, placement: DummyPlacement) -> StateVector {
    assert!(!members.is_empty(), "dummy of an empty cell");
    place(mean_state(members.iter().map(|s| (s, 1.0))), cell, placement)
}

fn cell_dummy(set: &ParticleSet, members: &[usize], cell: &CellGeometry, pc: &PcConfig) -> StateVector {
    let ps = set.particles();
    let mean = if pc.weighted_mean && members.iter().any(|&i| ps[i].weight > 0.0) {
        mean_state(members.iter().map(|&i| (&ps[i].state, ps[i].weight)))
    } else {
        mean_state(members.iter().map(|&i| (&ps[i].state, 1.0)))
    };
    place(mean, cell, pc.placement)
}

/// Dummy particle of every occupied cell, in occupancy order.
pub fn dummies(set: &ParticleSet, occupancy: &BinOccupancy, pc: &PcConfig) -> Vec<StateVector> {
    occupancy
        .iter()
        .map(|(cell, members)| cell_dummy(set, members, &pc.grid.geometry(cell), pc))
        .collect()
}

/// Piecewise-constant weight update: one likelihood evaluation per occupied cell,
/// broadcast as a multiplier onto every member's own weight.
/// Returns the number of evaluations (occupied cells).
pub fn weight_piecewise<L: Likelihood + ?Sized>(
    set: &mut ParticleSet,
    frame: &ImageFrame,
    lik: &L,
    pc: &PcConfig,
    exec: Execution,
) -> Result<u64> {
    let occupancy = assign_bins(set, &pc.grid);
    let multipliers = {
        let set: &ParticleSet = set;
        let occ = &occupancy;
        exec.map(occ.len(), |k| {
            let dummy = cell_dummy(set, occ.members(k), &pc.grid.geometry(occ.cell(k)), pc);
            lik.evaluate(&dummy, frame)
        })
    };
    let particles = set.particles_mut();
    let mut any_positive = false;
    for (k, m) in multipliers.iter().enumerate() {
        for &i in occupancy.members(k) {
            particles[i].weight *= m;
            any_positive |= particles[i].weight > 0.0;
        }
    }
    if !any_positive {
        return Err(Error::DegenerateWeights { frame: None });
    }
    Ok(occupancy.len() as u64)
}

/// One piecewise-constant SIS step. Consumes the random stream exactly like
/// [`filter::sis_step`], so both filters see the same propagation noise.
pub fn pc_sis_step<L: Likelihood + ?Sized, R: Rng + ?Sized>(
    set: &mut ParticleSet,
    frame: &ImageFrame,
    lik: &L,
    dynamics: &DynamicsParams,
    pc: &PcConfig,
    exec: Execution,
    rng: &mut R,
) -> Result<u64> {
    let step_key = rng.random::<u64>();
    filter::propagate_all(set, dynamics, step_key, exec);
    let evals = weight_piecewise(set, frame, lik, pc, exec)?;
    set.advance();
    Ok(evals)
}

/// pcSIR over `frames`; resampling is identical to [`filter::sir_track`].
pub fn pcsir_track<L: Likelihood + ?Sized, R: Rng + ?Sized>(
    frames: &[ImageFrame],
    lik: &L,
    cfg: &FilterConfig,
    pc: &PcConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    filter::track_with(frames, cfg, rng, |set, frame, rng| {
        pc_sis_step(set, frame, lik, &cfg.dynamics, pc, cfg.execution, rng)
    })
}
