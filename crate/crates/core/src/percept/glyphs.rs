//! 16×16 sign bitmaps shared by the renderer and the dataset generator.
//!
//! `.` is transparent; `R`, `W`, `B`, `K` are red, white, blue and black.

use crate::world::{Rgb, SignClass};

pub const GLYPH_SIZE: usize = 16;

pub const RED: Rgb = [200, 30, 30];
pub const WHITE: Rgb = [250, 250, 250];
pub const BLUE: Rgb = [30, 60, 200];
pub const BLACK: Rgb = [20, 20, 20];

pub type Glyph = [[Option<Rgb>; GLYPH_SIZE]; GLYPH_SIZE];

const STOP: [&str; 16] = [
    ".....RRRRRR.....",
    "....RRRRRRRR....",
    "...RRRRRRRRRR...",
    "..RRRRRRRRRRRR..",
    ".RRRRRRRRRRRRRR.",
    "RWWWRWWWRWWWRWWW",
    "RWRRRRWRRWRWRWRW",
    "RWWWRRWRRWRWRWWW",
    "RRRWRRWRRWRWRWRR",
    "RWWWRRWRRWWWRWRR",
    "RRRRRRRRRRRRRRRR",
    ".RRRRRRRRRRRRRR.",
    "..RRRRRRRRRRRR..",
    "...RRRRRRRRRR...",
    "....RRRRRRRR....",
    ".....RRRRRR.....",
];

const YIELD: [&str; 16] = [
    "RRRRRRRRRRRRRRRR",
    "RRRRRRRRRRRRRRRR",
    ".RRWWWWWWWWWWRR.",
    ".RRWWWWWWWWWWRR.",
    "..RRWWWWWWWWRR..",
    "..RRWWWWWWWWRR..",
    "...RRWWWWWWRR...",
    "...RRWWWWWWRR...",
    "....RRWWWWRR....",
    "....RRWWWWRR....",
    ".....RRWWRR.....",
    ".....RRWWRR.....",
    "......RRRR......",
    "......RRRR......",
    ".......RR.......",
    ".......RR.......",
];

const SPEED30: [&str; 16] = [
    ".....RRRRRR.....",
    "...RRRRRRRRRR...",
    "..RRRWWWWWWRRR..",
    ".RRWWWWWWWWWWRR.",
    ".RKKKKKWKKKKKWR.",
    "RRKKKKKWKKKKKWRR",
    "RWWWWKKWKKWKKWWR",
    "RWWKKKKWKKWKKWWR",
    "RWWKKKKWKKWKKWWR",
    "RWWWWKKWKKWKKWWR",
    "RRKKKKKWKKKKKWRR",
    ".RKKKKKWKKKKKWR.",
    ".RRWWWWWWWWWWRR.",
    "..RRRWWWWWWRRR..",
    "...RRRRRRRRRR...",
    ".....RRRRRR.....",
];

const SPEED50: [&str; 16] = [
    ".....RRRRRR.....",
    "...RRRRRRRRRR...",
    "..RRRWWWWWWRRR..",
    ".RRWWWWWWWWWWRR.",
    ".RKKKKKWKKKKKWR.",
    "RRKKKKKWKKKKKWRR",
    "RWKKWWWWKKWKKWWR",
    "RWKKKKKWKKWKKWWR",
    "RWKKKKKWKKWKKWWR",
    "RWWWWKKWKKWKKWWR",
    "RRKKKKKWKKKKKWRR",
    ".RKKKKKWKKKKKWR.",
    ".RRWWWWWWWWWWRR.",
    "..RRRWWWWWWRRR..",
    "...RRRRRRRRRR...",
    ".....RRRRRR.....",
];

const TURN_LEFT: [&str; 16] = [
    ".....BBBBBB.....",
    "...BBBBBBBBBB...",
    "..BBBBBBBBBBBB..",
    ".BBBBBBBBBBBBBB.",
    ".BBBBBWBBBBBBBB.",
    "BBBBBWWBBBBBBBBB",
    "BBBBWWWBBBBBBBBB",
    "BBBWWWWWWWWWWBBB",
    "BBBWWWWWWWWWWBBB",
    "BBBBWWWBBBBBBBBB",
    "BBBBBWWBBBBBBBBB",
    ".BBBBBWBBBBBBBB.",
    ".BBBBBBBBBBBBBB.",
    "..BBBBBBBBBBBB..",
    "...BBBBBBBBBB...",
    ".....BBBBBB.....",
];

const NO_ENTRY: [&str; 16] = [
    ".....RRRRRR.....",
    "...RRRRRRRRRR...",
    "..RRRRRRRRRRRR..",
    ".RRRRRRRRRRRRRR.",
    ".RRRRRRRRRRRRRR.",
    "RRRRRRRRRRRRRRRR",
    "RRRWWWWWWWWWWRRR",
    "RRRWWWWWWWWWWRRR",
    "RRRWWWWWWWWWWRRR",
    "RRRWWWWWWWWWWRRR",
    "RRRRRRRRRRRRRRRR",
    ".RRRRRRRRRRRRRR.",
    ".RRRRRRRRRRRRRR.",
    "..RRRRRRRRRRRR..",
    "...RRRRRRRRRR...",
    ".....RRRRRR.....",
];

fn parse(rows: &[&str; 16], mirror: bool) -> Glyph {
    let mut g = [[None; GLYPH_SIZE]; GLYPH_SIZE];
    for (y, row) in rows.iter().enumerate() {
        for (x, ch) in row.bytes().enumerate() {
            let col = if mirror { GLYPH_SIZE - 1 - x } else { x };
            g[y][col] = match ch {
                b'R' => Some(RED),
                b'W' => Some(WHITE),
                b'B' => Some(BLUE),
                b'K' => Some(BLACK),
                _ => None,
            };
        }
    }
    g
}

/// Bitmap for a placeable class; `None` for [`SignClass::None`].
pub fn glyph(class: SignClass) -> Option<Glyph> {
    Some(match class {
        SignClass::Stop => parse(&STOP, false),
        SignClass::Yield => parse(&YIELD, false),
        SignClass::SpeedLimit30 => parse(&SPEED30, false),
        SignClass::SpeedLimit50 => parse(&SPEED50, false),
        SignClass::TurnLeft => parse(&TURN_LEFT, false),
        SignClass::TurnRight => parse(&TURN_LEFT, true),
        SignClass::NoEntry => parse(&NO_ENTRY, false),
        SignClass::None => return None,
    })
}
