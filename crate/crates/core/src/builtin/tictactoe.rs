//! Tic-Tac-Toe against a built-in opponent, seen through a one-cell-per-step
//! observation stream.
//!
//! The agent is X and always moves first; its action is a cell index 0..9.
//! After every big step the world shows the content of a single cell
//! (0 empty, 1 X, 2 O), advancing the scanned cell by one each step. When a
//! game ends the shown cell is read from the final board and the board is
//! cleared for the next game.

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::Rng;

use crate::rng::Stream;
use crate::world::{ActionId, GameSignal, Observation, World, WorldError};

pub const CELLS: usize = 9;
const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

pub const EMPTY: u8 = 0;
pub const X: u8 = 1;
pub const O: u8 = 2;

pub type Board = [u8; CELLS];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Opponent {
    UniformRandom,
    Minimax,
}

impl Opponent {
    pub fn parse(s: &str) -> Option<Opponent> {
        match s {
            "random" | "uniform_random" => Some(Opponent::UniformRandom),
            "minimax" => Some(Opponent::Minimax),
            _ => None,
        }
    }
}

pub fn winner(board: &Board) -> Option<u8> {
    LINES.iter().find_map(|&[a, b, c]| {
        (board[a] != EMPTY && board[a] == board[b] && board[b] == board[c]).then_some(board[a])
    })
}

fn full(board: &Board) -> bool {
    board.iter().all(|&c| c != EMPTY)
}

fn encode(board: &Board) -> u32 {
    board.iter().fold(0, |acc, &c| acc * 3 + u32::from(c))
}

/// Game value from X's point of view (+1 X wins, 0 draw, -1 O wins) under
/// perfect play, `to_move` moving next.
fn value(board: &mut Board, to_move: u8, memo: &mut HashMap<(u32, u8), i8>) -> i8 {
    if let Some(w) = winner(board) {
        return if w == X { 1 } else { -1 };
    }
    if full(board) {
        return 0;
    }
    let key = (encode(board), to_move);
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let next = if to_move == X { O } else { X };
    let mut best = if to_move == X { -2 } else { 2 };
    for cell in 0..CELLS {
        if board[cell] != EMPTY {
            continue;
        }
        board[cell] = to_move;
        let v = value(board, next, memo);
        board[cell] = EMPTY;
        if (to_move == X && v > best) || (to_move == O && v < best) {
            best = v;
        }
    }
    memo.insert(key, best);
    best
}

fn memo() -> &'static HashMap<(u32, u8), i8> {
    static MEMO: OnceLock<HashMap<(u32, u8), i8>> = OnceLock::new();
    MEMO.get_or_init(|| {
        let mut memo = HashMap::new();
        value(&mut [EMPTY; CELLS], X, &mut memo);
        value(&mut [EMPTY; CELLS], O, &mut memo);
        memo
    })
}

fn solved_value(board: &Board, to_move: u8) -> i8 {
    if let Some(w) = winner(board) {
        return if w == X { 1 } else { -1 };
    }
    if full(board) {
        return 0;
    }
    memo()[&(encode(board), to_move)]
}

/// The minimax opponent's reply: the lowest-indexed cell minimizing X's value.
pub fn minimax_move(board: &Board) -> Option<usize> {
    let mut best: Option<(usize, i8)> = None;
    for cell in 0..CELLS {
        if board[cell] != EMPTY {
            continue;
        }
        let mut b = *board;
        b[cell] = O;
        let v = solved_value(&b, X);
        if best.is_none_or(|(_, bv)| v < bv) {
            best = Some((cell, v));
        }
    }
    best.map(|(c, _)| c)
}

#[derive(Debug, Clone)]
pub struct TicTacToeWorld {
    opponent: Opponent,
    board: Board,
    scan: usize,
}

impl TicTacToeWorld {
    pub fn new(opponent: Opponent) -> Self {
        TicTacToeWorld {
            opponent,
            board: [EMPTY; CELLS],
            scan: 0,
        }
    }

    pub fn board(&self) -> &Board {
        &self.board
    }

    fn opponent_move(&self, rng: &mut Stream) -> usize {
        match self.opponent {
            Opponent::UniformRandom => {
                let free: Vec<usize> = (0..CELLS).filter(|&c| self.board[c] == EMPTY).collect();
                free[rng.random_range(0..free.len())]
            }
            Opponent::Minimax => minimax_move(&self.board).expect("board has a free cell"),
        }
    }

    fn play(&mut self, cell: usize, rng: &mut Stream) -> GameSignal {
        if self.board[cell] != EMPTY {
            return GameSignal::Loss;
        }
        self.board[cell] = X;
        if winner(&self.board) == Some(X) {
            return GameSignal::Win;
        }
        if full(&self.board) {
            return GameSignal::Draw;
        }
        let reply = self.opponent_move(rng);
        self.board[reply] = O;
        if winner(&self.board) == Some(O) {
            return GameSignal::Loss;
        }
        if full(&self.board) {
            return GameSignal::Draw;
        }
        GameSignal::NoSignal
    }
}

impl World for TicTacToeWorld {
    fn action_count(&self) -> usize {
        CELLS
    }

    fn obs_alphabet(&self) -> usize {
        3
    }

    fn step(&mut self, action: ActionId, rng: &mut Stream) -> Result<Observation, WorldError> {
        if action.0 >= CELLS {
            return Err(WorldError::Contract(format!("cell {action} out of range")));
        }
        let signal = self.play(action.0, rng);
        let obs = Observation::new(u32::from(self.board[self.scan]), signal);
        self.scan = (self.scan + 1) % CELLS;
        if signal != GameSignal::NoSignal {
            self.board = [EMPTY; CELLS];
        }
        Ok(obs)
    }

    fn decoded_view(&self) -> Option<String> {
        Some(render(&self.board))
    }
}

/// Three rows of `.`, `X` and `O` separated by `/`.
pub fn render(board: &Board) -> String {
    board
        .chunks(3)
        .map(|row| {
            row.iter()
                .map(|&c| match c {
                    X => 'X',
                    O => 'O',
                    _ => '.',
                })
                .collect::<String>()
        })
        .collect::<Vec<_>>()
        .join("/")
}
