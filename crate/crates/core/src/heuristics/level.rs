//! Level (shelf) packing for the decreasing-height heuristics.
//!
//! Levels stack along the length axis `x`. A level's height is the footprint length of the
//! piece that opened it; pieces fill a level left to right along `y`.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Level {
    pub x: usize,
    pub height: usize,
    pub used_width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelRule {
    /// Only the most recent level is open.
    NextFit,
    /// Any level may take the piece; the one left with the least spare width wins.
    BestFit,
}

/// Where a piece would go: an existing level index or a new level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LevelSlot {
    Existing(usize),
    New,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelBoard {
    length: usize,
    width: usize,
    levels: Vec<Level>,
}

impl LevelBoard {
    pub fn new(length: usize, width: usize) -> Self {
        Self { length, width, levels: Vec::new() }
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    fn next_level_x(&self) -> usize {
        self.levels.last().map_or(0, |l| l.x + l.height)
    }

    fn level_fits(&self, level: &Level, length: usize, width: usize) -> bool {
        length <= level.height && level.used_width + width <= self.width
    }

    pub fn find(&self, rule: LevelRule, length: usize, width: usize) -> Option<(LevelSlot, (usize, usize))> {
        let existing = match rule {
            LevelRule::NextFit => self
                .levels
                .len()
                .checked_sub(1)
                .filter(|&i| self.level_fits(&self.levels[i], length, width)),
            LevelRule::BestFit => self
                .levels
                .iter()
                .enumerate()
                .filter(|(_, l)| self.level_fits(l, length, width))
                .min_by_key(|&(i, l)| (self.width - l.used_width - width, i))
                .map(|(i, _)| i),
        };
        if let Some(i) = existing {
            let l = &self.levels[i];
            return Some((LevelSlot::Existing(i), (l.x, l.used_width)));
        }
        let x = self.next_level_x();
        (x + length <= self.length && width <= self.width).then_some((LevelSlot::New, (x, 0)))
    }

    pub fn commit(&mut self, slot: LevelSlot, length: usize, width: usize) {
        match slot {
            LevelSlot::Existing(i) => self.levels[i].used_width += width,
            LevelSlot::New => {
                let x = self.next_level_x();
                self.levels.push(Level { x, height: length, used_width: width });
            }
        }
    }

    pub fn insert(&mut self, rule: LevelRule, length: usize, width: usize) -> Option<(usize, usize)> {
        let (slot, pos) = self.find(rule, length, width)?;
        self.commit(slot, length, width);
        Some(pos)
    }
}
