//! Gaussian-PSF appearance model and the windowed Gaussian-residual likelihood.
//!
//! Pixel `(i, j)` has its center at integer coordinates `(i, j)`; a frame of width `W`
//! covers `[-0.5, W - 0.5)` horizontally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::Likelihood;
use crate::state::StateVector;

/// Default physical pixel edge length.
pub const DEFAULT_PIXEL_SIZE_NM: f64 = 67.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsfParams {
    /// PSF standard deviation in pixels.
    pub sigma_psf: f64,
    /// Background intensity.
    pub i_bg: f64,
}

impl PsfParams {
    pub fn new(sigma_psf: f64, i_bg: f64) -> Result<Self> {
        let p = Self { sigma_psf, i_bg };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_psf > 0.0 && self.sigma_psf.is_finite()) {
            return Err(Error::invalid("sigma_psf", format!("must be > 0, got {}", self.sigma_psf)));
        }
        if !(self.i_bg >= 0.0 && self.i_bg.is_finite()) {
            return Err(Error::invalid("i_bg", format!("must be >= 0, got {}", self.i_bg)));
        }
        Ok(())
    }
}

/// One movie frame: row-major nonnegative intensities.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageFrame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    pub pixel_size_nm: f64,
}

impl ImageFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("frame size", "width and height must be >= 1"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(
                "frame pixels",
                format!("expected {} values, got {}", width * height, pixels.len()),
            ));
        }
        if let Some(bad) = pixels.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid("frame pixels", format!("intensity {bad} is not finite and >= 0")));
        }
        Ok(Self {
            width,
            height,
            pixels,
            pixel_size_nm: DEFAULT_PIXEL_SIZE_NM,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    /// Mutable access for generators; callers keep values finite and nonnegative.
    pub(crate) fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }
}

/// Object intensity at `at` for an object at `pos` with peak amplitude `i0`.
#[inline]
pub fn render_object(pos: (f64, f64), i0: f64, psf: &PsfParams, at: (f64, f64)) -> f64 {
    let dx = at.0 - pos.0;
    let dy = at.1 - pos.1;
    i0 * (-(dx * dx + dy * dy) / (2.0 * psf.sigma_psf * psf.sigma_psf)).exp() + psf.i_bg
}

/// Noise-free frame of a single object.
pub fn render_frame(width: usize, height: usize, object: &StateVector, psf: &PsfParams) -> Result<ImageFrame> {
    let mut pixels = Vec::with_capacity(width * height);
    for j in 0..height {
        for i in 0..width {
            pixels.push(render_object(
                object.position(),
                object.intensity,
                psf,
                (i as f64, j as f64),
            ));
        }
    }
    ImageFrame::new(width, height, pixels)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodParams {
    /// Residual scale; smaller is peakier.
    pub sigma_xi: f64,
    /// The window spans `2 * window_halfwidth + 1` pixels per axis.
    pub window_halfwidth: usize,
}

impl LikelihoodParams {
    /// Half-width `ceil(3 * sigma_psf)`.
    pub fn for_psf(sigma_xi: f64, psf: &PsfParams) -> Self {
        Self {
            sigma_xi,
            window_halfwidth: (3.0 * psf.sigma_psf).ceil() as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_xi > 0.0 && self.sigma_xi.is_finite()) {
            return Err(Error::invalid("sigma_xi", format!("must be > 0, got {}", self.sigma_xi)));
        }
        Ok(())
    }
}

/// Inclusive pixel ranges of a likelihood window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl Window {
    pub fn width(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    pub fn pixel_count(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

fn clamp_index(v: f64, len: usize) -> usize {
    let r = v.round();
    if r.is_nan() || r <= 0.0 {
        0
    } else if r >= (len - 1) as f64 {
        len - 1
    } else {
        r as usize
    }
}

/// Window centered on the pixel nearest `(x, y)`, truncated at the frame border.
///
/// A state outside the frame uses the window around the nearest border pixel.
pub fn window(x: f64, y: f64, frame: &ImageFrame, halfwidth: usize) -> Window {
    let cx = clamp_index(x, frame.width);
    let cy = clamp_index(y, frame.height);
    Window {
        x0: cx.saturating_sub(halfwidth),
        x1: (cx + halfwidth).min(frame.width - 1),
        y0: cy.saturating_sub(halfwidth),
        y1: (cy + halfwidth).min(frame.height - 1),
    }
}

const STACK_ROW: usize = 129;

/// Sum of squared residuals between `frame` and the object predicted by `state`
/// over the window around the state's position.
pub fn sum_squared_residuals(
    state: &StateVector,
    frame: &ImageFrame,
    psf: &PsfParams,
    halfwidth: usize,
) -> f64 {
    let w = window(state.x, state.y, frame, halfwidth);
    let inv = 1.0 / (2.0 * psf.sigma_psf * psf.sigma_psf);
    let n = w.width();

    // The PSF is separable: exp(-(dx^2 + dy^2) k) = exp(-dx^2 k) * exp(-dy^2 k).
    let mut stack = [0.0f64; STACK_ROW];
    let mut heap = Vec::new();
    let gx: &mut [f64] = if n <= STACK_ROW {
        &mut stack[..n]
    } else {
        heap.resize(n, 0.0);
        &mut heap
    };
    for (g, i) in gx.iter_mut().zip(w.x0..=w.x1) {
        let dx = i as f64 - state.x;
        *g = (-dx * dx * inv).exp();
    }

    let bg = psf.i_bg;
    let mut ssr = 0.0;
    for j in w.y0..=w.y1 {
        let dy = j as f64 - state.y;
        let amp = state.intensity * (-dy * dy * inv).exp();
        let row = &frame.row(j)[w.x0..=w.x1];
        let mut acc = 0.0;
        for (&z, &g) in row.iter().zip(gx.iter()) {
            let r = z - (amp * g + bg);
            acc += r * r;
        }
        ssr += acc;
    }
    ssr
}

/// Unnormalized likelihood `exp(-SSR / (2 sigma_xi^2))`.
pub fn likelihood(state: &StateVector, frame: &ImageFrame, psf: &PsfParams, lp: &LikelihoodParams) -> f64 {
    (-sum_squared_residuals(state, frame, psf, lp.window_halfwidth) / (2.0 * lp.sigma_xi * lp.sigma_xi)).exp()
}

/// The image likelihood as a filter [`Likelihood`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianPsfLikelihood {
    pub psf: PsfParams,
    pub params: LikelihoodParams,
}

impl GaussianPsfLikelihood {
    pub fn new(psf: PsfParams, params: LikelihoodParams) -> Result<Self> {
        psf.validate()?;
        params.validate()?;
        Ok(Self { psf, params })
    }
}

impl Likelihood for GaussianPsfLikelihood {
    fn evaluate(&self, state: &StateVector, frame: &ImageFrame) -> f64 {
        likelihood(state, frame, &self.psf, &self.params)
    }
}
