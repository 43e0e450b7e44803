use pack2d::env::{BoardSpec, EnvConfig, PieceType};
use pack2d::heuristics::{replay, run_heuristic, FreeRect, HeuristicKind, MaxRects, OrderingStrategy};
use proptest::prelude::*;

/// Every empty rectangle of the grid that cannot be extended in any direction.
fn maximal_empty_rects(grid: &[Vec<bool>], length: usize, width: usize) -> Vec<FreeRect> {
    let empty = |x0: usize, y0: usize, l: usize, w: usize| {
        x0 + l <= length && y0 + w <= width && (x0..x0 + l).all(|x| (y0..y0 + w).all(|y| !grid[x][y]))
    };
    let mut out = Vec::new();
    for x in 0..length {
        for y in 0..width {
            for l in 1..=length - x {
                for w in 1..=width - y {
                    if !empty(x, y, l, w) {
                        continue;
                    }
                    let grow_down = empty(x, y, l + 1, w);
                    let grow_right = empty(x, y, l, w + 1);
                    let grow_up = x > 0 && empty(x - 1, y, l + 1, w);
                    let grow_left = y > 0 && empty(x, y - 1, l, w + 1);
                    if !(grow_down || grow_right || grow_up || grow_left) {
                        out.push(FreeRect::new(x, y, l, w));
                    }
                }
            }
        }
    }
    out.sort_by_key(|r| (r.x, r.y, r.length, r.width));
    out
}

fn sorted(rects: &[FreeRect]) -> Vec<FreeRect> {
    let mut v = rects.to_vec();
    v.sort_by_key(|r| (r.x, r.y, r.length, r.width));
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn free_set_is_exactly_the_maximal_empty_rectangles(
        length in 1usize..=6,
        width in 1usize..=6,
        pieces in prop::collection::vec((1usize..4, 1usize..4), 1..20),
    ) {
        let mut packer = MaxRects::new(length, width);
        let mut grid = vec![vec![false; width]; length];
        prop_assert_eq!(sorted(packer.free_rects()), maximal_empty_rects(&grid, length, width));
        for (l, w) in pieces {
            // Bottom-left: the lexicographically smallest (x, y) where the footprint fits.
            let feasible = (0..length)
                .flat_map(|x| (0..width).map(move |y| (x, y)))
                .find(|&(x, y)| x + l <= length && y + w <= width && (x..x + l).all(|i| (y..y + w).all(|j| !grid[i][j])));
            let got = packer.insert(l, w);
            prop_assert_eq!(got, feasible);
            if let Some((x, y)) = got {
                for row in grid.iter_mut().skip(x).take(l) {
                    for cell in row.iter_mut().skip(y).take(w) {
                        *cell = true;
                    }
                }
            }
            prop_assert_eq!(sorted(packer.free_rects()), maximal_empty_rects(&grid, length, width));
        }
    }

    #[test]
    fn heuristic_placements_replay_without_invalid_steps(
        dims in [(2usize..9, 2usize..9), (2usize..9, 2usize..9)],
        heights in [40u32..160, 40u32..160],
        pieces in prop::array::uniform4((1usize..4, 1usize..4, 20u32..160, 0usize..10)),
    ) {
        let cfg = EnvConfig {
            boards: std::array::from_fn(|b| BoardSpec { width: dims[b].0, length: dims[b].1, height_limit: heights[b] }),
            pieces: std::array::from_fn(|i| {
                let (width, length, height, initial_qty) = pieces[i];
                PieceType { id: i, width, length, height, initial_qty }
            }),
            max_steps: None,
        };
        for kind in [HeuristicKind::MaxrectBl, HeuristicKind::Bfdh, HeuristicKind::Nfdh] {
            for strategy in OrderingStrategy::ALL {
                let result = run_heuristic(&cfg, kind, strategy).unwrap();
                prop_assert_eq!(result.placements.len() + result.skipped.len(), cfg.total_pieces());
                let (env, rewards) = replay(&cfg, &result.placements).unwrap();
                prop_assert!(rewards.iter().all(|&r| r >= 0.0), "{kind} {strategy}: {rewards:?}");
                prop_assert_eq!(env.placed(), result.placements.len());
                // Rendered cells equal the placed area: nothing overlapped.
                let area: usize = result.placements.iter().map(|p| cfg.pieces[p.piece].area()).sum();
                let cells: usize = env.boards().iter().map(|b| b.occupied_cells()).sum();
                prop_assert_eq!(area, cells);
                prop_assert_eq!(result.coverage, env.coverage());
            }
        }
    }

    #[test]
    fn heuristics_are_deterministic(seed_qty in prop::array::uniform4(0usize..12)) {
        let mut cfg = pack2d::experiments::builtin_experiment(5).unwrap().env;
        for (p, q) in cfg.pieces.iter_mut().zip(seed_qty) {
            p.initial_qty = q;
        }
        for kind in [HeuristicKind::MaxrectBl, HeuristicKind::Bfdh, HeuristicKind::Nfdh] {
            let a = run_heuristic(&cfg, kind, OrderingStrategy::DescHeightDescArea).unwrap();
            let b = run_heuristic(&cfg, kind, OrderingStrategy::DescHeightDescArea).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
