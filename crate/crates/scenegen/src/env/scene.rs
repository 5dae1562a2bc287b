//! Scene-construction environment: an ordered object list edited by
//! add/change/no-op actions and rendered as flat-shaded 2.5D sprites.
//!
//! The renderer draws objects back to front by grid row (ties broken by
//! insertion order, later on top), each as a sprite: cubes are squares with
//! two shaded faces, spheres are radially-shaded discs, cylinders are
//! rectangles with a lighter elliptical cap. Everything is fixed-rule
//! arithmetic, so renders are bit-identical across platforms.

use super::{cell_center, EnvError};
use crate::graph::Tensor;

pub const CANVAS: usize = 64;
pub const BACKGROUND: [f32; 3] = [0.80, 0.80, 0.80];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Cube,
    Sphere,
    Cylinder,
}

impl Shape {
    pub const ALL: [Shape; 3] = [Shape::Cube, Shape::Sphere, Shape::Cylinder];
    pub fn name(self) -> &'static str {
        match self {
            Shape::Cube => "cube",
            Shape::Sphere => "sphere",
            Shape::Cylinder => "cylinder",
        }
    }
    pub fn index(self) -> u8 {
        Shape::ALL.iter().position(|s| *s == self).unwrap() as u8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Size {
    Small,
    Large,
}

impl Size {
    pub const ALL: [Size; 2] = [Size::Small, Size::Large];
    pub fn name(self) -> &'static str {
        match self {
            Size::Small => "small",
            Size::Large => "large",
        }
    }
    pub fn index(self) -> u8 {
        Size::ALL.iter().position(|s| *s == self).unwrap() as u8
    }
    /// Sprite half-extent in pixels.
    pub fn half_extent(self) -> f64 {
        match self {
            Size::Small => 4.0,
            Size::Large => 7.0,
        }
    }
}

/// Eight named colors with fixed RGB values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Color {
    Gray,
    Red,
    Blue,
    Green,
    Brown,
    Purple,
    Cyan,
    Yellow,
}

impl Color {
    pub const ALL: [Color; 8] = [
        Color::Gray,
        Color::Red,
        Color::Blue,
        Color::Green,
        Color::Brown,
        Color::Purple,
        Color::Cyan,
        Color::Yellow,
    ];
    pub fn name(self) -> &'static str {
        match self {
            Color::Gray => "gray",
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Green => "green",
            Color::Brown => "brown",
            Color::Purple => "purple",
            Color::Cyan => "cyan",
            Color::Yellow => "yellow",
        }
    }
    pub fn index(self) -> u8 {
        Color::ALL.iter().position(|c| *c == self).unwrap() as u8
    }
    pub fn rgb(self) -> [f32; 3] {
        let v = match self {
            Color::Gray => [87, 87, 87],
            Color::Red => [173, 35, 35],
            Color::Blue => [42, 75, 215],
            Color::Green => [29, 105, 20],
            Color::Brown => [129, 74, 25],
            Color::Purple => [129, 38, 192],
            Color::Cyan => [41, 208, 208],
            Color::Yellow => [255, 238, 51],
        };
        [v[0] as f32 / 255.0, v[1] as f32 / 255.0, v[2] as f32 / 255.0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SceneFlag {
    AddNew,
    ChangePrevious,
    NoOp,
}

impl SceneFlag {
    pub const ALL: [SceneFlag; 3] = [SceneFlag::AddNew, SceneFlag::ChangePrevious, SceneFlag::NoOp];
    pub fn index(self) -> u8 {
        SceneFlag::ALL.iter().position(|f| *f == self).unwrap() as u8
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SceneAction {
    pub location: (u16, u16),
    pub shape: Shape,
    pub size: Size,
    pub color: Color,
    pub flag: SceneFlag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SceneObject {
    pub shape: Shape,
    pub size: Size,
    pub color: Color,
    pub location: (u16, u16),
}

/// Ordered object list; the order is insertion order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SceneState {
    objects: Vec<SceneObject>,
    pub step_count: u32,
}

impl SceneState {
    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }
}

/// Total number of distinct actions: `3 * G^2 * 3 * 2 * 8`
/// (147,456 at the full 32x32 grid).
pub fn action_space_size(grid: u16) -> u64 {
    let cells = grid as u64 * grid as u64;
    3 * cells * 3 * 2 * 8
}

/// Flat-index bijection mirroring the paint layout (flag outermost):
/// `index = (((flag * G^2 + location) * 3 + shape) * 2 + size) * 8 + color`.
pub fn encode_action(a: &SceneAction, grid: u16) -> Result<u64, EnvError> {
    if a.location.0 >= grid || a.location.1 >= grid {
        return Err(EnvError::Range(format!("cell out of {grid}x{grid} grid: {a:?}")));
    }
    let cells = grid as u64 * grid as u64;
    let loc = a.location.1 as u64 * grid as u64 + a.location.0 as u64;
    Ok((((a.flag.index() as u64 * cells + loc) * 3 + a.shape.index() as u64) * 2
        + a.size.index() as u64)
        * 8
        + a.color.index() as u64)
}

pub fn decode_action(index: u64, grid: u16) -> Result<SceneAction, EnvError> {
    if index >= action_space_size(grid) {
        return Err(EnvError::Range(format!(
            "scene action index {index} out of range (max {})",
            action_space_size(grid) - 1
        )));
    }
    let cells = grid as u64 * grid as u64;
    let color = Color::ALL[(index % 8) as usize];
    let rest = index / 8;
    let size = Size::ALL[(rest % 2) as usize];
    let rest = rest / 2;
    let shape = Shape::ALL[(rest % 3) as usize];
    let rest = rest / 3;
    let loc = rest % cells;
    let flag = SceneFlag::ALL[(rest / cells) as usize];
    Ok(SceneAction {
        location: ((loc % grid as u64) as u16, (loc / grid as u64) as u16),
        shape,
        size,
        color,
        flag,
    })
}

pub struct SceneEnv {
    grid: u16,
    state: SceneState,
}

impl SceneEnv {
    pub fn new(grid: u16) -> Self {
        assert!(grid > 0 && CANVAS % grid as usize == 0, "grid {grid} must divide {CANVAS}");
        SceneEnv {
            grid,
            state: SceneState::default(),
        }
    }

    pub fn grid(&self) -> u16 {
        self.grid
    }

    pub fn reset(&mut self) -> &SceneState {
        self.state = SceneState::default();
        &self.state
    }

    pub fn state(&self) -> &SceneState {
        &self.state
    }

    /// `AddNew` appends an object; `ChangePrevious` replaces the most
    /// recently added object (a silent no-op on an empty scene); `NoOp`
    /// leaves the object list untouched. The step count always advances.
    pub fn step(&mut self, a: &SceneAction) -> Result<(), EnvError> {
        if a.location.0 >= self.grid || a.location.1 >= self.grid {
            return Err(EnvError::Range(format!(
                "cell out of {0}x{0} grid: {a:?}",
                self.grid
            )));
        }
        let obj = SceneObject {
            shape: a.shape,
            size: a.size,
            color: a.color,
            location: a.location,
        };
        match a.flag {
            SceneFlag::AddNew => self.state.objects.push(obj),
            SceneFlag::ChangePrevious => {
                if let Some(last) = self.state.objects.last_mut() {
                    *last = obj;
                }
            }
            SceneFlag::NoOp => {}
        }
        self.state.step_count += 1;
        Ok(())
    }

    pub fn render(&self) -> Tensor<f32> {
        render_state(&self.state, self.grid)
    }
}

/// Pure render of a scene state on a `grid`-cell layout.
pub fn render_state(state: &SceneState, grid: u16) -> Tensor<f32> {
    let mut img = Vec::with_capacity(CANVAS * CANVAS * 3);
    for _ in 0..CANVAS * CANVAS {
        img.extend_from_slice(&BACKGROUND);
    }
    // back-to-front by grid row; later insertions occlude at equal depth
    let mut order: Vec<usize> = (0..state.objects.len()).collect();
    order.sort_by_key(|&i| (state.objects[i].location.1, i));
    for i in order {
        draw_object(&mut img, &state.objects[i], grid);
    }
    Tensor::from_vec(vec![CANVAS, CANVAS, 3], img)
}

fn put(img: &mut [f32], x: i64, y: i64, rgb: [f32; 3], shade: f32) {
    if (0..CANVAS as i64).contains(&x) && (0..CANVAS as i64).contains(&y) {
        let idx = (y as usize * CANVAS + x as usize) * 3;
        for c in 0..3 {
            img[idx + c] = (rgb[c] * shade).clamp(0.0, 1.0);
        }
    }
}

fn draw_object(img: &mut [f32], o: &SceneObject, grid: u16) {
    let cx = cell_center(o.location.0, grid, CANVAS);
    let cy = cell_center(o.location.1, grid, CANVAS);
    let e = o.size.half_extent();
    let rgb = o.color.rgb();
    let (x0, x1) = ((cx - e).floor() as i64, (cx + e).ceil() as i64);
    let (y0, y1) = ((cy - e).floor() as i64, (cy + e).ceil() as i64);
    match o.shape {
        Shape::Cube => {
            // square, split into two faces across the main diagonal
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    if dx.abs() <= e && dy.abs() <= e {
                        let shade = if dx + dy <= 0.0 { 1.0 } else { 0.72 };
                        put(img, x, y, rgb, shade);
                    }
                }
            }
        }
        Shape::Sphere => {
            // disc with radial shading, brightest at the center
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    let d2 = (dx * dx + dy * dy) / (e * e);
                    if d2 <= 1.0 {
                        let shade = 0.60 + 0.40 * (1.0 - d2) as f32;
                        put(img, x, y, rgb, shade);
                    }
                }
            }
        }
        Shape::Cylinder => {
            // body rectangle (70% of the extent wide) + lighter top cap
            let w = 0.7 * e;
            let cap_ry = 0.35 * e;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    let in_body = dx.abs() <= w && dy.abs() <= e;
                    let cap = (dx / w) * (dx / w) + ((dy + e) / cap_ry) * ((dy + e) / cap_ry);
                    if cap <= 1.0 {
                        put(img, x, y, rgb, 1.18);
                    } else if in_body {
                        let shade = 0.70 + 0.30 * (1.0 - dx.abs() / w) as f32;
                        put(img, x, y, rgb, shade);
                    }
                }
            }
        }
    }
}

/// True iff some object in the scene matches the constraint. Reads state,
/// never pixels, so correctness evaluation is exact.
pub fn check_constraint(state: &SceneState, constraint: &crate::instructions::Constraint) -> bool {
    constraint.check_scene(state)
}

/// Script row layout: `location shape size color flag` with a flat cell id.
pub fn action_from_script_row(row: &[u64; 5], grid: u16) -> Result<SceneAction, EnvError> {
    let cells = grid as u64 * grid as u64;
    if row[0] >= cells || row[1] >= 3 || row[2] >= 2 || row[3] >= 8 || row[4] >= 3 {
        return Err(EnvError::Range(format!("bad scene script row {row:?}")));
    }
    Ok(SceneAction {
        location: ((row[0] % grid as u64) as u16, (row[0] / grid as u64) as u16),
        shape: Shape::ALL[row[1] as usize],
        size: Size::ALL[row[2] as usize],
        color: Color::ALL[row[3] as usize],
        flag: SceneFlag::ALL[row[4] as usize],
    })
}

pub fn action_to_script_row(a: &SceneAction, grid: u16) -> [u64; 5] {
    [
        a.location.1 as u64 * grid as u64 + a.location.0 as u64,
        a.shape.index() as u64,
        a.size.index() as u64,
        a.color.index() as u64,
        a.flag.index() as u64,
    ]
}
