//! Experiment definitions and their text file format.
//!
//! ```toml
//! id = 2
//! name = "exp2"
//! seeds = [0, 1, 2]
//! max_steps = 192          # optional, default 4 x total pieces
//! uniform_height = false   # informational flag carried into reports
//!
//! [[boards]]
//! width = 8
//! length = 8
//! height_limit = 120
//! # second [[boards]] entry ...
//!
//! [[pieces]]               # exactly four entries, in id order
//! width = 2
//! length = 2
//! height = 115
//! quantity = 8
//!
//! [ppo]                    # optional per-agent training overrides
//! total_steps = 200000
//! [a2c]
//! clip_epsilon = "none"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{BoardSpec, EnvConfig, PieceType, NUM_BOARDS, NUM_PIECES};
use crate::error::{Error, Result};
use crate::rl::{Agent, TrainConfig};

/// Footprints of the four catalogue pieces as (width, length).
pub const PIECE_FOOTPRINTS: [(usize, usize); NUM_PIECES] = [(2, 2), (2, 2), (1, 2), (1, 2)];
/// Physical heights of the four catalogue pieces, in cm.
pub const PIECE_HEIGHTS: [u32; NUM_PIECES] = [115, 75, 115, 75];
/// Height used for every piece in the uniform-height experiments.
pub const UNIFORM_HEIGHT: u32 = 100;

/// Board dimension and heights per experiment id 1..=6.
pub const BOARD_SETUPS: [(usize, [u32; NUM_BOARDS]); 6] =
    [(8, [100, 100]), (8, [120, 80]), (8, [80, 120]), (7, [100, 100]), (7, [120, 80]), (7, [80, 120])];
/// Piece quantities per experiment id 1..=6.
pub const PIECE_QUANTITIES: [[usize; NUM_PIECES]; 6] =
    [[8, 8, 16, 16], [8, 8, 16, 16], [8, 8, 16, 16], [6, 6, 9, 9], [6, 6, 9, 9], [6, 6, 9, 9]];

/// Full-scale fill rates (mean %, std %) reported for each experiment, PPO then A2C.
pub const REFERENCE_FILL_RATES: [((f64, f64), (f64, f64)); 6] = [
    ((96.0, 3.0), (88.0, 6.0)),
    ((96.0, 5.0), (34.0, 23.0)),
    ((94.0, 5.0), (74.0, 5.0)),
    ((97.0, 3.0), (82.0, 8.0)),
    ((97.0, 3.0), (88.0, 4.0)),
    ((97.0, 4.0), (81.0, 8.0)),
];

pub fn reference_fill_rate(id: u32, agent: Agent) -> Option<(f64, f64)> {
    let row = REFERENCE_FILL_RATES.get((id as usize).checked_sub(1)?)?;
    Some(match agent {
        Agent::Ppo => row.0,
        Agent::A2c => row.1,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// 1..=6 for the built-in experiments, 0 for the mini instance, anything for files.
    pub id: u32,
    pub name: String,
    pub env: EnvConfig,
    /// All piece heights were overridden to the board height.
    pub uniform_height: bool,
    pub ppo: TrainConfig,
    pub a2c: TrainConfig,
    pub seeds: Vec<u64>,
}

impl ExperimentConfig {
    pub fn train_config(&self, agent: Agent) -> &TrainConfig {
        match agent {
            Agent::Ppo => &self.ppo,
            Agent::A2c => &self.a2c,
        }
    }

    /// Training config for one seed.
    pub fn seeded(&self, agent: Agent, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.train_config(agent).clone() }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ExperimentFile = toml::from_str(text)?;
        file.into_config()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&ExperimentFile::from_config(self)).expect("experiment serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// `1`..`6`, `mini`, or a path to a config file.
    pub fn resolve(spec: &str) -> Result<Self> {
        if spec == "mini" {
            return Ok(mini_instance());
        }
        if let Ok(id) = spec.parse::<u32>() {
            return builtin_experiment(id);
        }
        Self::load(Path::new(spec))
    }
}

fn catalogue(quantities: [usize; NUM_PIECES], heights: [u32; NUM_PIECES]) -> [PieceType; NUM_PIECES] {
    std::array::from_fn(|i| PieceType {
        id: i,
        width: PIECE_FOOTPRINTS[i].0,
        length: PIECE_FOOTPRINTS[i].1,
        height: heights[i],
        initial_qty: quantities[i],
    })
}

pub fn builtin_experiment(id: u32) -> Result<ExperimentConfig> {
    let idx = match id {
        1..=6 => id as usize - 1,
        _ => return Err(Error::Config(format!("unknown experiment id {id} (expected 1..6)"))),
    };
    let (dim, heights) = BOARD_SETUPS[idx];
    let uniform = heights[0] == heights[1];
    let piece_heights = if uniform { [UNIFORM_HEIGHT; NUM_PIECES] } else { PIECE_HEIGHTS };
    Ok(ExperimentConfig {
        id,
        name: format!("exp{id}"),
        env: EnvConfig {
            boards: heights.map(|h| BoardSpec { width: dim, length: dim, height_limit: h }),
            pieces: catalogue(PIECE_QUANTITIES[idx], piece_heights),
            max_steps: None,
        },
        uniform_height: uniform,
        ppo: TrainConfig::ppo(),
        a2c: TrainConfig::a2c(),
        seeds: (0..10).collect(),
    })
}

/// 4x4 boards, uniform heights, quantities 2/2/4/4: exactly two full boards.
pub fn mini_instance() -> ExperimentConfig {
    ExperimentConfig {
        id: 0,
        name: "mini".into(),
        env: EnvConfig {
            boards: [BoardSpec { width: 4, length: 4, height_limit: UNIFORM_HEIGHT }; NUM_BOARDS],
            pieces: catalogue([2, 2, 4, 4], [UNIFORM_HEIGHT; NUM_PIECES]),
            max_steps: None,
        },
        uniform_height: true,
        ppo: TrainConfig::ppo(),
        a2c: TrainConfig::a2c(),
        seeds: (0..10).collect(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoardEntry {
    width: usize,
    length: usize,
    height_limit: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PieceEntry {
    width: usize,
    length: usize,
    height: u32,
    quantity: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    id: u32,
    name: Option<String>,
    #[serde(default)]
    seeds: Vec<u64>,
    max_steps: Option<usize>,
    #[serde(default)]
    uniform_height: bool,
    boards: Vec<BoardEntry>,
    pieces: Vec<PieceEntry>,
    ppo: Option<toml::Table>,
    a2c: Option<toml::Table>,
}

fn apply_overrides(base: TrainConfig, overrides: Option<toml::Table>) -> Result<TrainConfig> {
    let Some(overrides) = overrides else { return Ok(base) };
    let mut table = toml::Table::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
    table.extend(overrides);
    let cfg: TrainConfig = table.try_into()?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentFile {
    fn into_config(self) -> Result<ExperimentConfig> {
        let boards: [BoardEntry; NUM_BOARDS] = self
            .boards
            .try_into()
            .map_err(|b: Vec<_>| Error::Config(format!("expected {NUM_BOARDS} boards, found {}", b.len())))?;
        let pieces: [PieceEntry; NUM_PIECES] = self
            .pieces
            .try_into()
            .map_err(|p: Vec<_>| Error::Config(format!("expected {NUM_PIECES} pieces, found {}", p.len())))?;
        let env = EnvConfig {
            boards: boards.map(|b| BoardSpec { width: b.width, length: b.length, height_limit: b.height_limit }),
            pieces: {
                let mut i = 0;
                pieces.map(|p| {
                    let piece = PieceType { id: i, width: p.width, length: p.length, height: p.height, initial_qty: p.quantity };
                    i += 1;
                    piece
                })
            },
            max_steps: self.max_steps,
        };
        env.validate()?;
        Ok(ExperimentConfig {
            id: self.id,
            name: self.name.unwrap_or_else(|| format!("exp{}", self.id)),
            env,
            uniform_height: self.uniform_height,
            ppo: apply_overrides(TrainConfig::ppo(), self.ppo)?,
            a2c: apply_overrides(TrainConfig::a2c(), self.a2c)?,
            seeds: if self.seeds.is_empty() { vec![0] } else { self.seeds },
        })
    }

    fn from_config(cfg: &ExperimentConfig) -> Self {
        let table = |c: &TrainConfig| toml::Table::try_from(c).expect("train config serializes");
        ExperimentFile {
            id: cfg.id,
            name: Some(cfg.name.clone()),
            seeds: cfg.seeds.clone(),
            max_steps: cfg.env.max_steps,
            uniform_height: cfg.uniform_height,
            boards: cfg
                .env
                .boards
                .iter()
                .map(|b| BoardEntry { width: b.width, length: b.length, height_limit: b.height_limit })
                .collect(),
            pieces: cfg
                .env
                .pieces
                .iter()
                .map(|p| PieceEntry { width: p.width, length: p.length, height: p.height, quantity: p.initial_qty })
                .collect(),
            ppo: Some(table(&cfg.ppo)),
            a2c: Some(table(&cfg.a2c)),
        }
    }
}
