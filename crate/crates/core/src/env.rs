//! Two-board packing environment with height-aware rewards.
//!
//! Coordinates follow one convention everywhere in the crate: `x` indexes rows along the
//! board length, `y` indexes columns along the board width. A piece described as `2x1`
//! has length 2 (rows) and width 1 (column). Grids are stored row-major, `x * width + y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of boards in every environment.
pub const NUM_BOARDS: usize = 2;
/// Number of piece types in every catalogue.
pub const NUM_PIECES: usize = 4;
/// Reward for any rejected action.
pub const INVALID_REWARD: f64 = -8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceType {
    pub id: usize,
    /// Footprint extent along the board width (columns).
    pub width: usize,
    /// Footprint extent along the board length (rows).
    pub length: usize,
    /// Physical height in centimetres.
    pub height: u32,
    pub initial_qty: usize,
}

impl PieceType {
    pub fn area(&self) -> usize {
        self.width * self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoardSpec {
    pub width: usize,
    pub length: usize,
    /// Height limit in centimetres.
    pub height_limit: u32,
}

impl BoardSpec {
    pub fn cells(&self) -> usize {
        self.width * self.length
    }
}

/// Everything needed to build an environment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub boards: [BoardSpec; NUM_BOARDS],
    pub pieces: [PieceType; NUM_PIECES],
    /// Step cap; defaults to four times the total piece count.
    pub max_steps: Option<usize>,
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        for (b, spec) in self.boards.iter().enumerate() {
            if spec.width == 0 || spec.length == 0 {
                return Err(Error::Config(format!("board {b} has a zero dimension")));
            }
            if spec.height_limit == 0 {
                return Err(Error::Config(format!("board {b} has zero height limit")));
            }
        }
        for (p, piece) in self.pieces.iter().enumerate() {
            if piece.id != p {
                return Err(Error::Config(format!("piece at index {p} has id {}", piece.id)));
            }
            if piece.width == 0 || piece.length == 0 {
                return Err(Error::Config(format!("piece {p} has a zero dimension")));
            }
            if piece.height == 0 {
                return Err(Error::Config(format!("piece {p} has zero height")));
            }
        }
        if self.max_steps == Some(0) && self.total_pieces() > 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn total_pieces(&self) -> usize {
        self.pieces.iter().map(|p| p.initial_qty).sum()
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps.unwrap_or(4 * self.total_pieces())
    }

    /// Length of the flat observation vector.
    pub fn observation_len(&self) -> usize {
        self.boards.iter().map(BoardSpec::cells).sum::<usize>() + NUM_PIECES
    }

    /// Sizes of the four action components: x, y, board, piece.
    ///
    /// Position heads span the largest board so one policy can address either board.
    pub fn action_dims(&self) -> [usize; 4] {
        let length = self.boards.iter().map(|b| b.length).max().unwrap_or(1);
        let width = self.boards.iter().map(|b| b.width).max().unwrap_or(1);
        [length, width, NUM_BOARDS, NUM_PIECES]
    }
}

/// Height score of a piece on a board: 0, 1, 2 for ratios up to 50%, 80%, 100%, and -2 above.
pub fn check_height(piece_h: u32, board_h: u32) -> i32 {
    let scaled = 100 * u64::from(piece_h);
    let board = u64::from(board_h);
    if scaled <= 50 * board {
        0
    } else if scaled <= 80 * board {
        1
    } else if scaled <= 100 * board {
        2
    } else {
        -2
    }
}

/// Clamp a placement corner so the whole footprint lies on the board.
pub fn clip_coords(x: usize, y: usize, piece: &PieceType, spec: &BoardSpec) -> Result<(usize, usize)> {
    if piece.length > spec.length || piece.width > spec.width {
        return Err(Error::InfeasiblePiece {
            piece: piece.id,
            length: piece.length,
            width: piece.width,
            board_length: spec.length,
            board_width: spec.width,
        });
    }
    Ok((x.min(spec.length - piece.length), y.min(spec.width - piece.width)))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoardState {
    pub width: usize,
    pub length: usize,
    /// 0 or 1 per cell.
    pub occupancy: Vec<u8>,
    /// Accumulated piece height per cell, in centimetres.
    pub height_map: Vec<u32>,
    /// `piece id + 1` per occupied cell, 0 when empty. Used for rendering.
    pub piece_map: Vec<u8>,
}

impl BoardState {
    pub fn new(spec: &BoardSpec) -> Self {
        let cells = spec.cells();
        Self {
            width: spec.width,
            length: spec.length,
            occupancy: vec![0; cells],
            height_map: vec![0; cells],
            piece_map: vec![0; cells],
        }
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        x * self.width + y
    }

    pub fn occupied_cells(&self) -> usize {
        self.occupancy.iter().filter(|&&c| c != 0).count()
    }

    pub fn empty_cells(&self) -> usize {
        self.occupancy.len() - self.occupied_cells()
    }

    pub fn is_free(&self, x: usize, y: usize, length: usize, width: usize) -> bool {
        if x + length > self.length || y + width > self.width {
            return false;
        }
        (x..x + length).all(|i| (y..y + width).all(|j| self.occupancy[self.index(i, j)] == 0))
    }

    /// Lines of '.' and piece digits. Each text line is one column `y`; characters run
    /// along the length axis `x`, so a piece's length reads left to right.
    pub fn render_lines(&self) -> Vec<String> {
        (0..self.width)
            .map(|y| {
                (0..self.length)
                    .map(|x| match self.piece_map[self.index(x, y)] {
                        0 => '.',
                        id => char::from_digit(u32::from(id), 36).unwrap_or('#'),
                    })
                    .collect()
            })
            .collect()
    }
}

/// Percentage of occupied cells, in `[0, 100]`.
pub fn board_coverage(board: &BoardState) -> f64 {
    if board.occupancy.is_empty() {
        return 0.0;
    }
    100.0 * board.occupied_cells() as f64 / board.occupancy.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub x: usize,
    pub y: usize,
    pub board: usize,
    pub piece: usize,
}

impl Action {
    pub fn new(x: usize, y: usize, board: usize, piece: usize) -> Self {
        Self { x, y, board, piece }
    }

    pub fn to_array(self) -> [usize; 4] {
        [self.x, self.y, self.board, self.piece]
    }

    pub fn from_array(a: [usize; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// What happened during one call to [`PackingEnv::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepOutcome {
    Placed,
    Overlap,
    TooTall,
    /// The footprint is larger than the chosen board.
    DoesNotFit,
    Exhausted,
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub placement_valid: bool,
    pub r_height: i32,
    pub clipped_xy: (usize, usize),
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackingEnv {
    config: EnvConfig,
    boards: [BoardState; NUM_BOARDS],
    remaining: [usize; NUM_PIECES],
    steps_taken: usize,
    placed: usize,
    done: bool,
}

impl PackingEnv {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let boards = [BoardState::new(&config.boards[0]), BoardState::new(&config.boards[1])];
        let remaining = config.pieces.map(|p| p.initial_qty);
        Ok(Self { config, boards, remaining, steps_taken: 0, placed: 0, done: false })
    }

    /// Restore the initial state and return the first observation.
    pub fn reset(&mut self) -> Vec<f64> {
        self.boards = [BoardState::new(&self.config.boards[0]), BoardState::new(&self.config.boards[1])];
        self.remaining = self.config.pieces.map(|p| p.initial_qty);
        self.steps_taken = 0;
        self.placed = 0;
        self.done = false;
        self.observation()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn boards(&self) -> &[BoardState; NUM_BOARDS] {
        &self.boards
    }

    pub fn remaining(&self) -> [usize; NUM_PIECES] {
        self.remaining
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Number of valid placements so far in this episode.
    pub fn placed(&self) -> usize {
        self.placed
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Fraction of all catalogue pieces validly placed, `0` for an empty catalogue.
    pub fn placement_rate(&self) -> f64 {
        match self.config.total_pieces() {
            0 => 0.0,
            n => self.placed as f64 / n as f64,
        }
    }

    pub fn coverage(&self) -> [f64; NUM_BOARDS] {
        [board_coverage(&self.boards[0]), board_coverage(&self.boards[1])]
    }

    /// True when the next step will end the episode regardless of the action.
    pub fn is_terminal(&self) -> bool {
        self.remaining.iter().sum::<usize>() == 0
            || self.boards.iter().all(|b| b.empty_cells() == 0)
            || self.steps_taken >= self.config.max_steps()
    }

    pub fn observation(&self) -> Vec<f64> {
        encode_observation(self)
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::Usage("step called on a finished episode".into()));
        }
        let dims = self.config.action_dims();
        for (value, (dim, name)) in action.to_array().iter().zip(dims.iter().zip(["x", "y", "board", "piece"])) {
            if value >= dim {
                return Err(Error::Usage(format!("action component {name}={value} out of range 0..{dim}")));
            }
        }

        if self.is_terminal() {
            self.done = true;
            let cov = self.coverage();
            return Ok(self.result(
                (cov[0] + cov[1]) / 2.0,
                StepInfo { placement_valid: false, r_height: 0, clipped_xy: (action.x, action.y), outcome: StepOutcome::Terminal },
            ));
        }

        // Every non-terminal step counts toward max_steps, including exhausted selections.
        self.steps_taken += 1;
        if self.remaining[action.piece] == 0 {
            return Ok(self.result(
                INVALID_REWARD,
                StepInfo { placement_valid: false, r_height: 0, clipped_xy: (action.x, action.y), outcome: StepOutcome::Exhausted },
            ));
        }

        let piece = self.config.pieces[action.piece];
        let spec = self.config.boards[action.board];
        let r_height = check_height(piece.height, spec.height_limit);
        self.remaining[action.piece] -= 1;

        let Ok((x, y)) = clip_coords(action.x, action.y, &piece, &spec) else {
            return Ok(self.result(
                INVALID_REWARD,
                StepInfo { placement_valid: false, r_height, clipped_xy: (action.x, action.y), outcome: StepOutcome::DoesNotFit },
            ));
        };

        let board = &mut self.boards[action.board];
        let snapshot = (board.occupancy.clone(), board.height_map.clone());
        let mut overlap = false;
        for i in 0..piece.length {
            for j in 0..piece.width {
                let idx = board.index(x + i, y + j);
                board.occupancy[idx] += 1;
                board.height_map[idx] += piece.height;
                overlap |= board.occupancy[idx] > 1;
            }
        }

        let outcome = if overlap {
            StepOutcome::Overlap
        } else if r_height < 0 {
            StepOutcome::TooTall
        } else {
            StepOutcome::Placed
        };
        let reward = if outcome == StepOutcome::Placed {
            for i in 0..piece.length {
                for j in 0..piece.width {
                    let idx = board.index(x + i, y + j);
                    board.piece_map[idx] = (piece.id + 1) as u8;
                }
            }
            self.placed += 1;
            (piece.area() as i64 * i64::from(r_height)) as f64
        } else {
            board.occupancy = snapshot.0;
            board.height_map = snapshot.1;
            INVALID_REWARD
        };
        Ok(self.result(
            reward,
            StepInfo { placement_valid: outcome == StepOutcome::Placed, r_height, clipped_xy: (x, y), outcome },
        ))
    }

    fn result(&self, reward: f64, info: StepInfo) -> StepResult {
        StepResult { observation: self.observation(), reward, done: self.done, info }
    }
}

/// Both occupancy grids row-major, then remaining/initial per piece type (0/0 reads as 0).
pub fn encode_observation(env: &PackingEnv) -> Vec<f64> {
    let mut obs = Vec::with_capacity(env.config.observation_len());
    for board in &env.boards {
        obs.extend(board.occupancy.iter().map(|&c| f64::from(c)));
    }
    for (piece, &left) in env.config.pieces.iter().zip(&env.remaining) {
        obs.push(if piece.initial_qty == 0 { 0.0 } else { left as f64 / piece.initial_qty as f64 });
    }
    obs
}

/// One block per board: a header line followed by one line per column.
pub fn render_ascii(env: &PackingEnv) -> String {
    let mut out = String::new();
    for (b, board) in env.boards.iter().enumerate() {
        let spec = &env.config.boards[b];
        out.push_str(&format!(
            "board {b} ({}x{}, h={}) coverage {:.2}%\n",
            spec.length,
            spec.width,
            spec.height_limit,
            board_coverage(board)
        ));
        for line in board.render_lines() {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}
