//! Dense 2D grids and the two grid primitives every other module leans on:
//! ray traversal through cells and the Euclidean distance transform.
//!
//! Cell `(x, y)` lives at `data[y * width + x]`; `y = 0` is the bottom row
//! (smallest world y).

use std::ops::ControlFlow;

/// Row-major dense grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "grid data length mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_mut(&mut self, x: usize, y: usize) -> &mut T {
        &mut self.data[y * self.width + x]
    }

    #[inline]
    pub fn try_get(&self, x: i64, y: i64) -> Option<&T> {
        if self.in_bounds(x, y) {
            Some(&self.data[y as usize * self.width + x as usize])
        } else {
            None
        }
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// 4-connected neighbors inside the grid.
    pub fn neighbors4(&self, x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        const D: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        D.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            self.in_bounds(nx, ny).then_some((nx as usize, ny as usize))
        })
    }

    /// 8-connected neighbors inside the grid.
    pub fn neighbors8(&self, x: usize, y: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        const D: [(i64, i64); 8] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ];
        D.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            self.in_bounds(nx, ny).then_some((nx as usize, ny as usize))
        })
    }
}

impl Grid<bool> {
    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Visits every cell crossed by a ray, in order, starting with the cell that
/// contains `start`.
///
/// Coordinates are in cell units (cell `(i, j)` spans `[i, i+1) x [j, j+1)`).
/// `direction` need not be normalized; `t` passed to the visitor is the
/// distance in cell units from `start` to the point where the ray enters the
/// cell (0 for the start cell). Traversal stops once the entry distance
/// exceeds `max_t` or the visitor breaks.
pub fn traverse_ray<B>(
    start: (f64, f64),
    direction: (f64, f64),
    max_t: f64,
    mut visit: impl FnMut(i64, i64, f64) -> ControlFlow<B>,
) -> Option<B> {
    let norm = direction.0.hypot(direction.1);
    if norm == 0.0 || !norm.is_finite() {
        return match visit(start.0.floor() as i64, start.1.floor() as i64, 0.0) {
            ControlFlow::Break(b) => Some(b),
            ControlFlow::Continue(()) => None,
        };
    }
    let (dx, dy) = (direction.0 / norm, direction.1 / norm);
    let mut cx = start.0.floor() as i64;
    let mut cy = start.1.floor() as i64;

    let (step_x, mut next_x, delta_x) = axis_setup(start.0, dx);
    let (step_y, mut next_y, delta_y) = axis_setup(start.1, dy);

    let mut t = 0.0;
    loop {
        if let ControlFlow::Break(b) = visit(cx, cy, t) {
            return Some(b);
        }
        if next_x < next_y {
            t = next_x;
            next_x += delta_x;
            cx += step_x;
        } else {
            t = next_y;
            next_y += delta_y;
            cy += step_y;
        }
        if t > max_t {
            return None;
        }
    }
}

/// Returns (cell step, distance to first boundary crossing, distance between
/// crossings) for one axis.
fn axis_setup(origin: f64, d: f64) -> (i64, f64, f64) {
    if d > 0.0 {
        let boundary = origin.floor() + 1.0;
        (1, (boundary - origin) / d, 1.0 / d)
    } else if d < 0.0 {
        let boundary = origin.floor();
        (-1, (origin - boundary) / -d, -1.0 / d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

const EDT_INF: f64 = 1e20;

/// Squared Euclidean distance (in cells, center to center) from every cell to
/// the nearest `source` cell. Cells are `EDT_INF`-far when there is no source.
///
/// Two-pass separable transform of Felzenszwalb & Huttenlocher.
pub fn squared_distance_transform(source: &Grid<bool>) -> Grid<f64> {
    let (w, h) = (source.width(), source.height());
    let mut out = source.map(|&s| if s { 0.0 } else { EDT_INF });
    let n = w.max(h);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for x in 0..w {
        for y in 0..h {
            f[y] = *out.get(x, y);
        }
        dt_1d(&f[..h], &mut d[..h], &mut v, &mut z);
        for y in 0..h {
            out.set(x, y, d[y]);
        }
    }
    for y in 0..h {
        for x in 0..w {
            f[x] = *out.get(x, y);
        }
        dt_1d(&f[..w], &mut d[..w], &mut v, &mut z);
        for x in 0..w {
            out.set(x, y, d[x]);
        }
    }
    out
}

fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64);
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *out = diff * diff + f[p];
    }
}

/// Euclidean distance transform in cells (square root of the squared one).
pub fn distance_transform(source: &Grid<bool>) -> Grid<f64> {
    squared_distance_transform(source).map(|&d| if d >= EDT_INF { f64::INFINITY } else { d.sqrt() })
}

/// Labels 4-connected components of `mask`; returns labels (0 = not in mask)
/// and the number of components.
pub fn label_components4(mask: &Grid<bool>) -> (Grid<u32>, u32) {
    let mut labels = Grid::new(mask.width(), mask.height(), 0u32);
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..mask.len() {
        if !mask.data()[start] || labels.data()[start] != 0 {
            continue;
        }
        next += 1;
        labels.data_mut()[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = mask.coords(i);
            for (nx, ny) in mask.neighbors4(x, y) {
                let j = mask.index(nx, ny);
                if mask.data()[j] && labels.data()[j] == 0 {
                    labels.data_mut()[j] = next;
                    stack.push(j);
                }
            }
        }
    }
    (labels, next)
}

/// 4-connected flood fill of `mask` from `seed`.
pub fn flood_fill4(mask: &Grid<bool>, seed: (usize, usize)) -> Grid<bool> {
    let mut out = Grid::new(mask.width(), mask.height(), false);
    if !*mask.get(seed.0, seed.1) {
        return out;
    }
    let mut stack = vec![seed];
    out.set(seed.0, seed.1, true);
    while let Some((x, y)) = stack.pop() {
        for (nx, ny) in mask.neighbors4(x, y) {
            if *mask.get(nx, ny) && !*out.get(nx, ny) {
                out.set(nx, ny, true);
                stack.push((nx, ny));
            }
        }
    }
    out
}
