//! Stroke-painting environment: a grayscale canvas, a brush with pressure
//! and size levels, and quadratic Bezier strokes.
//!
//! An action picks the stroke's end point and control point on an NxN grid,
//! a pressure level (10), a brush size (4), and a paint/skip flag. The
//! stroke runs from the current brush position through the control point to
//! the end point; ink is deposited by max-compositing, so repeated strokes
//! saturate instead of overflowing.

use super::{cell_center, EnvError};
use crate::graph::Tensor;

pub const CANVAS: usize = 64;
pub const PRESSURE_LEVELS: u64 = 10;
pub const SIZE_LEVELS: u64 = 4;
pub const FLAG_LEVELS: u64 = 2;

/// One brush action. Grid cells are `(x, y)` with the origin at the top
/// left; the flat cell index is `y * grid + x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PaintAction {
    pub end: (u16, u16),
    pub control: (u16, u16),
    pub pressure: u8,
    pub size: u8,
    pub paint: bool,
}

/// Total number of distinct actions on a `grid` x `grid` layout.
/// At the full 32x32 grid this is 83,886,080.
pub fn action_space_size(grid: u16) -> u64 {
    let cells = grid as u64 * grid as u64;
    FLAG_LEVELS * cells * cells * PRESSURE_LEVELS * SIZE_LEVELS
}

/// Flat-index bijection:
/// `index = (((flag * G^2 + control) * G^2 + end) * 10 + pressure) * 4 + size`
/// with `G^2` the cell count and control/end as flat cell indices.
pub fn encode_action(a: &PaintAction, grid: u16) -> Result<u64, EnvError> {
    validate(a, grid)?;
    let cells = grid as u64 * grid as u64;
    let control = a.control.1 as u64 * grid as u64 + a.control.0 as u64;
    let end = a.end.1 as u64 * grid as u64 + a.end.0 as u64;
    let flag = a.paint as u64;
    Ok((((flag * cells + control) * cells + end) * PRESSURE_LEVELS + a.pressure as u64)
        * SIZE_LEVELS
        + a.size as u64)
}

pub fn decode_action(index: u64, grid: u16) -> Result<PaintAction, EnvError> {
    if index >= action_space_size(grid) {
        return Err(EnvError::Range(format!(
            "paint action index {index} out of range (max {})",
            action_space_size(grid) - 1
        )));
    }
    let cells = grid as u64 * grid as u64;
    let size = (index % SIZE_LEVELS) as u8;
    let rest = index / SIZE_LEVELS;
    let pressure = (rest % PRESSURE_LEVELS) as u8;
    let rest = rest / PRESSURE_LEVELS;
    let end = rest % cells;
    let rest = rest / cells;
    let control = rest % cells;
    let flag = rest / cells;
    Ok(PaintAction {
        end: ((end % grid as u64) as u16, (end / grid as u64) as u16),
        control: ((control % grid as u64) as u16, (control / grid as u64) as u16),
        pressure,
        size,
        paint: flag == 1,
    })
}

fn validate(a: &PaintAction, grid: u16) -> Result<(), EnvError> {
    if a.end.0 >= grid || a.end.1 >= grid || a.control.0 >= grid || a.control.1 >= grid {
        return Err(EnvError::Range(format!("cell out of {grid}x{grid} grid: {a:?}")));
    }
    if a.pressure as u64 >= PRESSURE_LEVELS {
        return Err(EnvError::Range(format!("pressure {} > 9", a.pressure)));
    }
    if a.size as u64 >= SIZE_LEVELS {
        return Err(EnvError::Range(format!("size {} > 3", a.size)));
    }
    Ok(())
}

/// Canvas state: intensities in `[0,1]`, continuous brush position, and the
/// number of steps taken. Evolves only through [`PaintEnv::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct CanvasState {
    pub canvas: Vec<f32>,
    pub brush: (f64, f64),
    pub step_count: u32,
}

/// Brush stamp masks for the four sizes (base widths 1, 2, 3, 5 pixels).
/// Size 0 paints the pixel containing the sample; size 1 the 2x2 block
/// around it; sizes 2 and 3 paint a 3x3 block and a radius-2.5 disc around
/// the nearest pixel. Integer masks keep rasterization parity-stable.
fn stamp(canvas: &mut [f32], cx: f64, cy: f64, size: u8, intensity: f32) {
    let paint_px = |canvas: &mut [f32], x: i64, y: i64| {
        if (0..CANVAS as i64).contains(&x) && (0..CANVAS as i64).contains(&y) {
            let idx = y as usize * CANVAS + x as usize;
            if canvas[idx] < intensity {
                canvas[idx] = intensity;
            }
        }
    };
    match size {
        0 => paint_px(canvas, cx.floor() as i64, cy.floor() as i64),
        1 => {
            let (x0, y0) = (cx.floor() as i64, cy.floor() as i64);
            for dy in 0..2 {
                for dx in 0..2 {
                    paint_px(canvas, x0 + dx, y0 + dy);
                }
            }
        }
        2 => {
            let (x0, y0) = ((cx + 0.5).floor() as i64, (cy + 0.5).floor() as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    paint_px(canvas, x0 + dx, y0 + dy);
                }
            }
        }
        _ => {
            let (x0, y0) = ((cx + 0.5).floor() as i64, (cy + 0.5).floor() as i64);
            for dy in -2i64..=2 {
                for dx in -2i64..=2 {
                    if (dx * dx + dy * dy) as f64 <= 6.25 {
                        paint_px(canvas, x0 + dx, y0 + dy);
                    }
                }
            }
        }
    }
}

pub struct PaintEnv {
    grid: u16,
    state: CanvasState,
}

impl PaintEnv {
    /// `grid` must evenly divide the 64-pixel canvas (8, 16, 32, ...).
    pub fn new(grid: u16) -> Self {
        assert!(grid > 0 && CANVAS % grid as usize == 0, "grid {grid} must divide {CANVAS}");
        PaintEnv {
            grid,
            state: blank_state(),
        }
    }

    pub fn grid(&self) -> u16 {
        self.grid
    }

    /// Blank canvas, brush at the canvas center, step count zero.
    pub fn reset(&mut self) -> &CanvasState {
        self.state = blank_state();
        &self.state
    }

    pub fn state(&self) -> &CanvasState {
        &self.state
    }

    /// Executes one action. Skip actions only move the brush; paint actions
    /// rasterize a quadratic Bezier from the current brush position through
    /// the control cell to the end cell, at 64 fixed parameter steps,
    /// depositing `(pressure+1)/10` intensity with max-compositing. The
    /// brush always ends at the end cell.
    pub fn step(&mut self, action: &PaintAction) -> Result<(), EnvError> {
        validate(action, self.grid)?;
        let p0 = self.state.brush;
        let p1 = (
            cell_center(action.control.0, self.grid, CANVAS),
            cell_center(action.control.1, self.grid, CANVAS),
        );
        let p2 = (
            cell_center(action.end.0, self.grid, CANVAS),
            cell_center(action.end.1, self.grid, CANVAS),
        );
        if action.paint {
            let intensity = (action.pressure as f32 + 1.0) / 10.0;
            for i in 0..64 {
                let t = i as f64 / 63.0;
                let u = 1.0 - t;
                let x = u * u * p0.0 + 2.0 * u * t * p1.0 + t * t * p2.0;
                let y = u * u * p0.1 + 2.0 * u * t * p1.1 + t * t * p2.1;
                stamp(&mut self.state.canvas, x, y, action.size, intensity);
            }
        }
        self.state.brush = p2;
        self.state.step_count += 1;
        Ok(())
    }

    /// Pure function of the state: the canvas as a `[64, 64, 1]` tensor.
    pub fn render(&self) -> Tensor<f32> {
        render_state(&self.state)
    }
}

fn blank_state() -> CanvasState {
    let c = (CANVAS as f64 - 1.0) / 2.0;
    CanvasState {
        canvas: vec![0.0; CANVAS * CANVAS],
        brush: (c, c),
        step_count: 0,
    }
}

pub fn render_state(state: &CanvasState) -> Tensor<f32> {
    Tensor::from_vec(vec![CANVAS, CANVAS, 1], state.canvas.clone())
}

/// Script row layout: `end control pressure size flag` with flat cell ids.
pub fn action_from_script_row(row: &[u64; 5], grid: u16) -> Result<PaintAction, EnvError> {
    let cells = grid as u64 * grid as u64;
    let check_cell = |v: u64, what: &str| {
        if v >= cells {
            Err(EnvError::Range(format!("{what} cell {v} out of {cells}")))
        } else {
            Ok(((v % grid as u64) as u16, (v / grid as u64) as u16))
        }
    };
    let end = check_cell(row[0], "end")?;
    let control = check_cell(row[1], "control")?;
    if row[2] >= PRESSURE_LEVELS || row[3] >= SIZE_LEVELS || row[4] >= FLAG_LEVELS {
        return Err(EnvError::Range(format!("bad pressure/size/flag in {row:?}")));
    }
    Ok(PaintAction {
        end,
        control,
        pressure: row[2] as u8,
        size: row[3] as u8,
        paint: row[4] == 1,
    })
}

pub fn action_to_script_row(a: &PaintAction, grid: u16) -> [u64; 5] {
    [
        a.end.1 as u64 * grid as u64 + a.end.0 as u64,
        a.control.1 as u64 * grid as u64 + a.control.0 as u64,
        a.pressure as u64,
        a.size as u64,
        a.paint as u64,
    ]
}
