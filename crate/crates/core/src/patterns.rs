//! 5×5 binary symbols, perturbed training libraries and their target times.

use std::collections::HashSet;
use std::fmt;

use rand::seq::index;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::PS;

pub const GRID_SIDE: usize = 5;
pub const GRID_CELLS: usize = GRID_SIDE * GRID_SIDE;

const SYMBOL_FIXTURE: &str = include_str!("../data/symbols.txt");

/// Row-major 5×5 black/white pixel grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolGrid {
    pub label: String,
    pixels: [bool; GRID_CELLS],
}

impl SymbolGrid {
    pub fn new(label: impl Into<String>, pixels: [bool; GRID_CELLS]) -> Self {
        Self {
            label: label.into(),
            pixels,
        }
    }

    pub fn blank(label: impl Into<String>) -> Self {
        Self::new(label, [false; GRID_CELLS])
    }

    /// Parse 25 cells of `#` (black) and `.` (white); whitespace is ignored.
    pub fn from_art(label: impl Into<String>, art: &str) -> Result<Self> {
        let cells: Vec<char> = art.chars().filter(|c| !c.is_whitespace()).collect();
        if cells.len() != GRID_CELLS {
            return Err(Error::parse(
                "symbol",
                format!("expected {GRID_CELLS} cells, found {}", cells.len()),
            ));
        }
        let mut pixels = [false; GRID_CELLS];
        for (p, c) in pixels.iter_mut().zip(cells) {
            *p = match c {
                '#' => true,
                '.' => false,
                other => return Err(Error::parse("symbol", format!("unexpected cell {other:?}"))),
            };
        }
        Ok(Self::new(label, pixels))
    }

    pub fn pixels(&self) -> &[bool; GRID_CELLS] {
        &self.pixels
    }

    pub fn is_black(&self, idx: usize) -> bool {
        self.pixels[idx]
    }

    pub fn black_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    pub fn flip(&mut self, idx: usize) {
        self.pixels[idx] = !self.pixels[idx];
    }

    pub fn hamming(&self, other: &SymbolGrid) -> usize {
        self.pixels
            .iter()
            .zip(other.pixels.iter())
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Pixels black here but white in `reference`, and the reverse.
    pub fn added_and_missing(&self, reference: &SymbolGrid) -> (usize, usize) {
        self.pixels
            .iter()
            .zip(reference.pixels.iter())
            .fold((0, 0), |(a, m), (&p, &r)| match (p, r) {
                (true, false) => (a + 1, m),
                (false, true) => (a, m + 1),
                _ => (a, m),
            })
    }

    /// `#`/`.` cells on one line, row by row.
    pub fn to_compact(&self) -> String {
        self.pixels.iter().map(|&p| if p { '#' } else { '.' }).collect()
    }
}

impl fmt::Display for SymbolGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.pixels.chunks(GRID_SIDE) {
            let line: String = row.iter().map(|&p| if p { '#' } else { '.' }).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

/// Parse a glyph file: `:label` line, five rows of five cells, blank-line separated.
pub fn parse_symbols(text: &str) -> Result<Vec<SymbolGrid>> {
    let mut out = Vec::new();
    let mut lines = text.lines().map(str::trim_end).peekable();
    while let Some(line) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        let label = line
            .strip_prefix(':')
            .ok_or_else(|| Error::parse("symbol file", format!("expected ':label', got {line:?}")))?
            .trim();
        let mut art = String::new();
        for _ in 0..GRID_SIDE {
            let row = lines
                .next()
                .ok_or_else(|| Error::parse("symbol file", format!("glyph {label} is truncated")))?;
            if row.trim().chars().count() != GRID_SIDE {
                return Err(Error::parse(
                    "symbol file",
                    format!("glyph {label}: row {row:?} is not {GRID_SIDE} cells"),
                ));
            }
            art.push_str(row.trim());
        }
        out.push(SymbolGrid::from_art(label, &art)?);
    }
    let mut seen = HashSet::new();
    for s in &out {
        if !seen.insert(s.label.as_str()) {
            return Err(Error::parse("symbol file", format!("duplicate label {}", s.label)));
        }
    }
    Ok(out)
}

/// The glyphs shipped with the crate (Z, O, X, +, T, L, H).
pub fn builtin_symbols() -> Vec<SymbolGrid> {
    parse_symbols(SYMBOL_FIXTURE).expect("bundled symbol fixture is valid")
}

pub fn builtin_symbol(label: &str) -> Option<SymbolGrid> {
    builtin_symbols().into_iter().find(|s| s.label == label)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibraryEntry {
    pub grid: SymbolGrid,
    /// Desired output spike time (s).
    pub target: f64,
}

/// The correct symbol and its perturbed variants, each with a target time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLibrary {
    pub correct: SymbolGrid,
    pub variants: Vec<LibraryEntry>,
    /// Target of the correct symbol (s).
    pub base_time: f64,
    /// Target moves this much earlier per differing pixel (s).
    pub shift_per_pixel: f64,
    /// Same for pixels the variant lacks; equal to `shift_per_pixel` unless
    /// changed with [`with_missing_shift`](Self::with_missing_shift).
    /// Negative values move the target later.
    pub missing_shift_per_pixel: f64,
}

pub const DEFAULT_BASE_TIME: f64 = 100.0 * PS;
pub const DEFAULT_SHIFT_PER_PIXEL: f64 = 10.0 * PS;
pub const DEFAULT_LIBRARY_SIZE: usize = 20;
pub const DEFAULT_MAX_FLIPS: usize = 3;

impl TrainingLibrary {
    pub fn len(&self) -> usize {
        self.variants.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Correct symbol first, then the variants in generation order.
    pub fn entries(&self) -> Vec<LibraryEntry> {
        std::iter::once(LibraryEntry {
            grid: self.correct.clone(),
            target: self.base_time,
        })
        .chain(self.variants.iter().cloned())
        .collect()
    }

    /// Re-target the variants with a separate shift for missing pixels.
    pub fn with_missing_shift(mut self, shift: f64) -> Self {
        self.missing_shift_per_pixel = shift;
        for i in 0..self.variants.len() {
            let t = target_time(&self.variants[i].grid, &self);
            self.variants[i].target = t;
        }
        self
    }

    /// Structured text form: one `[[entry]]` table per symbol.
    pub fn to_text(&self) -> String {
        #[derive(Serialize)]
        struct Entry<'a> {
            label: &'a str,
            pixels: String,
            hamming: usize,
            target_ps: f64,
        }
        #[derive(Serialize)]
        struct File<'a> {
            correct: &'a str,
            base_time_ps: f64,
            shift_per_pixel_ps: f64,
            missing_shift_per_pixel_ps: f64,
            entry: Vec<Entry<'a>>,
        }
        let entries = self.entries();
        let file = File {
            correct: &self.correct.label,
            base_time_ps: self.base_time / PS,
            shift_per_pixel_ps: self.shift_per_pixel / PS,
            missing_shift_per_pixel_ps: self.missing_shift_per_pixel / PS,
            entry: entries
                .iter()
                .map(|e| Entry {
                    label: &e.grid.label,
                    pixels: e.grid.to_compact(),
                    hamming: e.grid.hamming(&self.correct),
                    target_ps: (e.target / PS * 1e6).round() / 1e6,
                })
                .collect(),
        };
        toml::to_string(&file).expect("library serialises")
    }
}

/// `base_time − shift_per_pixel × Hamming(variant, correct)` when missing
/// pixels count like added ones (the default).
pub fn target_time(variant: &SymbolGrid, library: &TrainingLibrary) -> f64 {
    let (added, missing) = variant.added_and_missing(&library.correct);
    library.base_time
        - library.shift_per_pixel * added as f64
        - library.missing_shift_per_pixel * missing as f64
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
}

/// Build a library of `size` symbols: the correct one plus `size − 1`
/// distinct variants with 1..=`max_flips` pixels flipped either way.
pub fn make_library(
    correct: &SymbolGrid,
    size: usize,
    max_flips: usize,
    seed: u64,
) -> Result<TrainingLibrary> {
    make_library_with(correct, size, max_flips, seed, DEFAULT_BASE_TIME, DEFAULT_SHIFT_PER_PIXEL)
}

pub fn make_library_with(
    correct: &SymbolGrid,
    size: usize,
    max_flips: usize,
    seed: u64,
    base_time: f64,
    shift_per_pixel: f64,
) -> Result<TrainingLibrary> {
    if size < 2 {
        return Err(Error::InvalidParameter(format!("library size must be >= 2, got {size}")));
    }
    if !(1..=GRID_CELLS).contains(&max_flips) {
        return Err(Error::InvalidParameter(format!(
            "max_flips must be in 1..={GRID_CELLS}, got {max_flips}"
        )));
    }
    let wanted = size - 1;
    let available: u128 = (1..=max_flips).map(|d| binomial(GRID_CELLS, d)).sum();
    if (wanted as u128) > available {
        return Err(Error::Unsatisfiable { wanted, max_flips });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen: HashSet<[bool; GRID_CELLS]> = HashSet::new();
    seen.insert(correct.pixels);
    let mut library = TrainingLibrary {
        correct: correct.clone(),
        variants: Vec::with_capacity(wanted),
        base_time,
        shift_per_pixel,
        missing_shift_per_pixel: shift_per_pixel,
    };
    while library.variants.len() < wanted {
        let flips = rng.random_range(1..=max_flips);
        let mut grid = correct.clone();
        for idx in index::sample(&mut rng, GRID_CELLS, flips).iter() {
            grid.flip(idx);
        }
        if !seen.insert(grid.pixels) {
            continue;
        }
        grid.label = format!("{}~{:02}", correct.label, library.variants.len() + 1);
        let target = target_time(&grid, &library);
        library.variants.push(LibraryEntry { grid, target });
    }
    Ok(library)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn o() -> SymbolGrid {
        builtin_symbol("O").unwrap()
    }

    #[test]
    fn missing_pixels_can_move_targets_later() {
        let lib = make_library(&o(), 20, 3, 1).unwrap().with_missing_shift(-10.0 * PS);
        for e in &lib.variants {
            let (a, m) = e.grid.added_and_missing(&lib.correct);
            let expect = lib.base_time - 10.0 * PS * a as f64 + 10.0 * PS * m as f64;
            assert!((e.target - expect).abs() < 1e-18);
        }
        let same = make_library(&o(), 20, 3, 1).unwrap();
        assert_eq!(same.clone().with_missing_shift(same.shift_per_pixel), same);
    }

    #[test]
    fn builtin_glyphs_are_complete_and_unique() {
        let all = builtin_symbols();
        for label in ["Z", "O", "X", "+", "T"] {
            assert!(all.iter().any(|s| s.label == label), "missing {label}");
        }
        let labels: HashSet<_> = all.iter().map(|s| &s.label).collect();
        assert_eq!(labels.len(), all.len());
        for s in &all {
            assert_eq!(s.pixels().len(), GRID_CELLS);
        }
    }

    #[test]
    fn o_is_ring_without_corners() {
        let o = o();
        assert_eq!(o.to_compact(), ".###.#...##...##...#.###.");
        assert_eq!(o.black_count(), 12);
    }

    #[test]
    fn malformed_fixture_is_rejected() {
        assert!(parse_symbols(":A\n#####\n#####\n").is_err());
        assert!(parse_symbols("A\n#####\n").is_err());
        assert!(parse_symbols(":A\n####\n#####\n#####\n#####\n#####\n").is_err());
        let dup = ":A\n#####\n#####\n#####\n#####\n#####\n\n:A\n.....\n.....\n.....\n.....\n.....\n";
        assert!(parse_symbols(dup).is_err());
    }

    #[test]
    fn target_times_follow_hamming_distance() {
        let lib = make_library(&o(), 2, 1, 0).unwrap();
        assert!((target_time(&o(), &lib) - 100.0 * PS).abs() < 1e-18);
        assert_eq!(target_time(&o(), &lib), lib.base_time);

        let mut extra2 = o();
        extra2.flip(12); // centre
        extra2.flip(0); // corner
        assert!((target_time(&extra2, &lib) - 80.0 * PS).abs() < 1e-18);

        let mut missing1 = o();
        missing1.flip(1);
        assert!((target_time(&missing1, &lib) - 90.0 * PS).abs() < 1e-18);

        let mut extra1 = o();
        extra1.flip(12);
        assert_eq!(target_time(&extra1, &lib), target_time(&missing1, &lib));
    }

    #[test]
    fn library_of_twenty_is_distinct_and_within_flip_budget() {
        let lib = make_library(&o(), 20, 3, 1).unwrap();
        assert_eq!(lib.len(), 20);
        let entries = lib.entries();
        let distinct: HashSet<_> = entries.iter().map(|e| e.grid.pixels).collect();
        assert_eq!(distinct.len(), 20);
        assert_eq!(entries[0].grid, o());
        assert_eq!(entries[0].target, lib.base_time);
        for e in &entries[1..] {
            let d = e.grid.hamming(&o());
            assert!((1..=3).contains(&d));
            let expect = lib.base_time - lib.shift_per_pixel * d as f64;
            assert!((e.target - expect).abs() < 1e-18);
        }
    }

    #[test]
    fn minimal_library_has_one_single_flip_variant() {
        let lib = make_library(&o(), 2, 1, 7).unwrap();
        assert_eq!(lib.variants.len(), 1);
        assert_eq!(lib.variants[0].grid.hamming(&o()), 1);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = make_library(&o(), 20, 3, 42).unwrap().to_text();
        let b = make_library(&o(), 20, 3, 42).unwrap().to_text();
        assert_eq!(a, b);
        let c = make_library(&o(), 20, 3, 43).unwrap().to_text();
        assert_ne!(a, c);
    }

    #[test]
    fn impossible_library_is_unsatisfiable() {
        assert!(matches!(
            make_library(&o(), 27, 1, 0),
            Err(Error::Unsatisfiable { wanted: 26, .. })
        ));
        assert!(make_library(&o(), 26, 1, 0).is_ok());
        assert!(make_library(&o(), 1, 1, 0).is_err());
        assert!(make_library(&o(), 5, 0, 0).is_err());
    }
}
