//! Free-space tracking with the maximal-rectangles method.

use serde::{Deserialize, Serialize};

/// Axis-aligned empty region: corner `(x, y)`, extent `length` along x and `width` along y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FreeRect {
    pub x: usize,
    pub y: usize,
    pub length: usize,
    pub width: usize,
}

impl FreeRect {
    pub fn new(x: usize, y: usize, length: usize, width: usize) -> Self {
        Self { x, y, length, width }
    }

    fn x_end(&self) -> usize {
        self.x + self.length
    }

    fn y_end(&self) -> usize {
        self.y + self.width
    }

    pub fn fits(&self, length: usize, width: usize) -> bool {
        length <= self.length && width <= self.width
    }

    pub fn intersects(&self, other: &FreeRect) -> bool {
        self.x < other.x_end() && other.x < self.x_end() && self.y < other.y_end() && other.y < self.y_end()
    }

    pub fn contains(&self, other: &FreeRect) -> bool {
        self.x <= other.x && self.y <= other.y && self.x_end() >= other.x_end() && self.y_end() >= other.y_end()
    }
}

/// Maximal free rectangles of one board, kept sorted and free of contained duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxRects {
    length: usize,
    width: usize,
    free: Vec<FreeRect>,
}

impl MaxRects {
    pub fn new(length: usize, width: usize) -> Self {
        let free = if length > 0 && width > 0 { vec![FreeRect::new(0, 0, length, width)] } else { Vec::new() };
        Self { length, width, free }
    }

    pub fn free_rects(&self) -> &[FreeRect] {
        &self.free
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.length, self.width)
    }

    /// Bottom-left feasible corner: the lexicographically smallest `(x, y)` among free
    /// rectangles that can hold the piece.
    pub fn find_position(&self, length: usize, width: usize) -> Option<(usize, usize)> {
        self.free.iter().filter(|r| r.fits(length, width)).map(|r| (r.x, r.y)).min()
    }

    /// Place the piece at its bottom-left position. The free set is untouched on failure.
    pub fn insert(&mut self, length: usize, width: usize) -> Option<(usize, usize)> {
        let (x, y) = self.find_position(length, width)?;
        self.occupy(FreeRect::new(x, y, length, width));
        Some((x, y))
    }

    /// Remove `used` from the free space, splitting every intersected rectangle into its
    /// maximal residuals and pruning anything contained in another rectangle.
    pub fn occupy(&mut self, used: FreeRect) {
        let mut next = Vec::with_capacity(self.free.len() + 4);
        for r in &self.free {
            if !r.intersects(&used) {
                next.push(*r);
                continue;
            }
            if used.x > r.x {
                next.push(FreeRect::new(r.x, r.y, used.x - r.x, r.width));
            }
            if used.x_end() < r.x_end() {
                next.push(FreeRect::new(used.x_end(), r.y, r.x_end() - used.x_end(), r.width));
            }
            if used.y > r.y {
                next.push(FreeRect::new(r.x, r.y, r.length, used.y - r.y));
            }
            if used.y_end() < r.y_end() {
                next.push(FreeRect::new(r.x, used.y_end(), r.length, r.y_end() - used.y_end()));
            }
        }
        next.sort_unstable();
        next.dedup();
        let pruned: Vec<FreeRect> = next
            .iter()
            .enumerate()
            .filter(|&(i, r)| !next.iter().enumerate().any(|(j, o)| i != j && o.contains(r)))
            .map(|(_, r)| *r)
            .collect();
        self.free = pruned;
    }
}
