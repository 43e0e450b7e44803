//! Classical packing baselines.
//!
//! Every heuristic produces a list of placements that is replayed through
//! [`PackingEnv`] to compute rewards and coverage, so heuristic numbers always agree with
//! the environment's semantics.

mod level;
mod maxrects;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use level::{Level, LevelBoard, LevelRule, LevelSlot};
pub use maxrects::{FreeRect, MaxRects};

use crate::env::{check_height, Action, EnvConfig, PackingEnv, PieceType, StepOutcome, NUM_BOARDS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderingStrategy {
    /// Catalogue order, each type expanded by its quantity.
    None,
    /// Physical height descending, then footprint area descending.
    DescHeightDescArea,
    /// Physical height ascending, then footprint area descending.
    AscHeightDescArea,
}

impl OrderingStrategy {
    pub const ALL: [OrderingStrategy; 3] =
        [OrderingStrategy::None, OrderingStrategy::DescHeightDescArea, OrderingStrategy::AscHeightDescArea];

    pub fn name(self) -> &'static str {
        match self {
            OrderingStrategy::None => "none",
            OrderingStrategy::DescHeightDescArea => "desc-height",
            OrderingStrategy::AscHeightDescArea => "asc-height",
        }
    }
}

impl fmt::Display for OrderingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OrderingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(OrderingStrategy::None),
            "desc-height" | "desc_height_desc_area" => Ok(OrderingStrategy::DescHeightDescArea),
            "asc-height" | "asc_height_desc_area" => Ok(OrderingStrategy::AscHeightDescArea),
            other => Err(Error::Usage(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeuristicKind {
    MaxrectBl,
    Bfdh,
    Nfdh,
}

impl HeuristicKind {
    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::MaxrectBl => "maxrect-bl",
            HeuristicKind::Bfdh => "bfdh",
            HeuristicKind::Nfdh => "nfdh",
        }
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maxrect-bl" => Ok(HeuristicKind::MaxrectBl),
            "bfdh" => Ok(HeuristicKind::Bfdh),
            "nfdh" => Ok(HeuristicKind::Nfdh),
            other => Err(Error::Usage(format!("unknown heuristic '{other}'"))),
        }
    }
}

/// How a heuristic chooses between the two boards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoardRule {
    /// Boards in index order; the first one with room for the footprint takes the piece,
    /// and the piece is skipped if that board is too short for it.
    FirstFit,
    /// Boards in index order, but only boards tall enough for the piece are considered.
    HeightAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    pub piece: usize,
    pub board: usize,
    pub x: usize,
    pub y: usize,
}

impl Placement {
    pub fn action(&self) -> Action {
        Action::new(self.x, self.y, self.board, self.piece)
    }

    /// `piece board x y`, the line format used by placement files.
    pub fn to_line(&self) -> String {
        format!("{} {} {} {}", self.piece, self.board, self.x, self.y)
    }

    pub fn parse_line(line: &str) -> Result<Self> {
        let parts: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Usage(format!("bad placement line '{line}'"))))
            .collect::<Result<_>>()?;
        match parts[..] {
            [piece, board, x, y] => Ok(Placement { piece, board, x, y }),
            _ => Err(Error::Usage(format!("placement line needs 4 fields: '{line}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingResult {
    pub heuristic: HeuristicKind,
    pub strategy: OrderingStrategy,
    pub placements: Vec<Placement>,
    /// Piece ids that were not placed, in processing order.
    pub skipped: Vec<usize>,
    pub coverage: [f64; NUM_BOARDS],
    pub placement_rate: f64,
    /// Sum of environment rewards over the replay, including the terminal reward when the
    /// replay ends the episode.
    pub total_reward: f64,
}

impl PackingResult {
    pub fn placements_text(&self) -> String {
        self.placements.iter().map(|p| p.to_line() + "\n").collect()
    }
}

/// Expand quantities into a processing order. Ties fall back to ascending piece id.
pub fn order_pieces(catalogue: &[PieceType], quantities: &[usize], strategy: OrderingStrategy) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..catalogue.len()).collect();
    match strategy {
        OrderingStrategy::None => {}
        OrderingStrategy::DescHeightDescArea => {
            ids.sort_by_key(|&i| (std::cmp::Reverse(catalogue[i].height), std::cmp::Reverse(catalogue[i].area()), i))
        }
        OrderingStrategy::AscHeightDescArea => {
            ids.sort_by_key(|&i| (catalogue[i].height, std::cmp::Reverse(catalogue[i].area()), i))
        }
    }
    ids.into_iter().flat_map(|i| std::iter::repeat_n(i, quantities[i])).collect()
}

/// Step every placement through a fresh environment and return the environment plus the
/// per-step rewards. A terminal step is appended when the placements end the episode.
pub fn replay(config: &EnvConfig, placements: &[Placement]) -> Result<(PackingEnv, Vec<f64>)> {
    let mut env = PackingEnv::new(config.clone())?;
    let mut rewards = Vec::with_capacity(placements.len() + 1);
    for p in placements {
        if env.is_done() {
            break;
        }
        rewards.push(env.step(p.action())?.reward);
    }
    if !env.is_done() && env.is_terminal() {
        let r = env.step(Action::new(0, 0, 0, 0))?;
        debug_assert_eq!(r.info.outcome, StepOutcome::Terminal);
        rewards.push(r.reward);
    }
    Ok((env, rewards))
}

trait BoardPacker {
    fn find(&self, length: usize, width: usize) -> Option<(usize, usize)>;
    fn place(&mut self, length: usize, width: usize) -> (usize, usize);
}

impl BoardPacker for MaxRects {
    fn find(&self, length: usize, width: usize) -> Option<(usize, usize)> {
        self.find_position(length, width)
    }

    fn place(&mut self, length: usize, width: usize) -> (usize, usize) {
        self.insert(length, width).expect("position was found")
    }
}

struct Leveled {
    board: LevelBoard,
    rule: LevelRule,
}

impl BoardPacker for Leveled {
    fn find(&self, length: usize, width: usize) -> Option<(usize, usize)> {
        self.board.find(self.rule, length, width).map(|(_, pos)| pos)
    }

    fn place(&mut self, length: usize, width: usize) -> (usize, usize) {
        self.board.insert(self.rule, length, width).expect("position was found")
    }
}

fn pack<P: BoardPacker>(
    config: &EnvConfig,
    order: &[usize],
    rule: BoardRule,
    boards: &mut [P; NUM_BOARDS],
) -> (Vec<Placement>, Vec<usize>) {
    let mut placements = Vec::new();
    let mut skipped = Vec::new();
    for &id in order {
        let piece = &config.pieces[id];
        let mut placed = false;
        for (b, packer) in boards.iter_mut().enumerate() {
            let tall_enough = check_height(piece.height, config.boards[b].height_limit) >= 0;
            if rule == BoardRule::HeightAware && !tall_enough {
                continue;
            }
            if packer.find(piece.length, piece.width).is_none() {
                continue;
            }
            if tall_enough {
                let (x, y) = packer.place(piece.length, piece.width);
                placements.push(Placement { piece: id, board: b, x, y });
                placed = true;
            }
            break;
        }
        if !placed {
            skipped.push(id);
        }
    }
    (placements, skipped)
}

fn finish(
    config: &EnvConfig,
    heuristic: HeuristicKind,
    strategy: OrderingStrategy,
    placements: Vec<Placement>,
    skipped: Vec<usize>,
) -> Result<PackingResult> {
    let (env, rewards) = replay(config, &placements)?;
    let total = config.total_pieces();
    Ok(PackingResult {
        heuristic,
        strategy,
        coverage: env.coverage(),
        placement_rate: if total == 0 { 0.0 } else { placements.len() as f64 / total as f64 },
        total_reward: rewards.iter().sum(),
        placements,
        skipped,
    })
}

fn initial_quantities(config: &EnvConfig) -> Vec<usize> {
    config.pieces.iter().map(|p| p.initial_qty).collect()
}

/// MaxRects with bottom-left placement over both boards, using [`BoardRule::FirstFit`].
pub fn run_maxrect_bl(config: &EnvConfig, strategy: OrderingStrategy) -> Result<PackingResult> {
    run_maxrect_bl_with(config, strategy, BoardRule::FirstFit)
}

pub fn run_maxrect_bl_with(config: &EnvConfig, strategy: OrderingStrategy, rule: BoardRule) -> Result<PackingResult> {
    config.validate()?;
    let order = order_pieces(&config.pieces, &initial_quantities(config), strategy);
    let mut boards = config.boards.map(|b| MaxRects::new(b.length, b.width));
    let (placements, skipped) = pack(config, &order, rule, &mut boards);
    finish(config, HeuristicKind::MaxrectBl, strategy, placements, skipped)
}

/// Level order for BFDH and NFDH: physical height, then footprint length, then area, all
/// descending.
fn level_order(config: &EnvConfig) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..config.pieces.len()).collect();
    ids.sort_by_key(|&i| {
        let p = &config.pieces[i];
        (std::cmp::Reverse((p.height, p.length, p.area())), i)
    });
    ids.into_iter().flat_map(|i| std::iter::repeat_n(i, config.pieces[i].initial_qty)).collect()
}

fn run_level(config: &EnvConfig, rule: LevelRule, kind: HeuristicKind) -> Result<PackingResult> {
    config.validate()?;
    let order = level_order(config);
    let mut boards = config.boards.map(|b| Leveled { board: LevelBoard::new(b.length, b.width), rule });
    let (placements, skipped) = pack(config, &order, BoardRule::HeightAware, &mut boards);
    finish(config, kind, OrderingStrategy::DescHeightDescArea, placements, skipped)
}

pub fn run_bfdh(config: &EnvConfig) -> Result<PackingResult> {
    run_level(config, LevelRule::BestFit, HeuristicKind::Bfdh)
}

pub fn run_nfdh(config: &EnvConfig) -> Result<PackingResult> {
    run_level(config, LevelRule::NextFit, HeuristicKind::Nfdh)
}

pub fn run_heuristic(config: &EnvConfig, kind: HeuristicKind, strategy: OrderingStrategy) -> Result<PackingResult> {
    match kind {
        HeuristicKind::MaxrectBl => run_maxrect_bl(config, strategy),
        HeuristicKind::Bfdh => run_bfdh(config),
        HeuristicKind::Nfdh => run_nfdh(config),
    }
}
