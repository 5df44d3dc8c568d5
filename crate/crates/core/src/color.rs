//! Finite colorings of `[1..N]`: random generation, monochromatic FS-set and
//! quadruple searches, and an exhaustive 2-coloring scan.

use serde::Serialize;

use crate::detect::{extend_fs_witness, Membership, MAX_SEARCH_LEN};
use crate::error::{Error, Result};
use crate::model::uniform_bits_u64;
use crate::patterns::quadruple_values;

/// Derivation tag separating color draws from subset membership.
pub const COLOR_TAG: u64 = 0xc010_4ed5_eed5_7a65;

pub const MAX_COLORS: u8 = 36;

pub const MAX_SCAN_N: u64 = 30;

const DIGITS: &[u8; 36] = b"0123456789abcdefghijklmnopqrstuvwxyz";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coloring {
    c: u8,
    /// `colors[i - 1]` is the color of `i`.
    colors: Vec<u8>,
}

impl Coloring {
    pub fn new(c: u8, colors: Vec<u8>) -> Result<Self> {
        if !(2..=MAX_COLORS).contains(&c) {
            return Err(Error::domain(format!("color count must lie in 2..={MAX_COLORS}, got {c}")));
        }
        if colors.is_empty() {
            return Err(Error::domain("a coloring needs N >= 1"));
        }
        if let Some(bad) = colors.iter().find(|&&v| v >= c) {
            return Err(Error::domain(format!("color {bad} out of range for c = {c}")));
        }
        Ok(Coloring { c, colors })
    }

    pub fn from_fn(n: u64, c: u8, f: impl Fn(u64) -> u8) -> Result<Self> {
        Coloring::new(c, (1..=n).map(f).collect())
    }

    pub fn n(&self) -> u64 {
        self.colors.len() as u64
    }

    pub fn c(&self) -> u8 {
        self.c
    }

    pub fn colors(&self) -> &[u8] {
        &self.colors
    }

    /// Color of `x`, `None` outside `[1..N]`.
    pub fn color(&self, x: u64) -> Option<u8> {
        if x == 0 {
            return None;
        }
        self.colors.get(x as usize - 1).copied()
    }

    /// One line of base-`c` digits, position `i` holding the color of `i + 1`.
    pub fn to_digits(&self) -> String {
        self.colors.iter().map(|&v| DIGITS[v as usize] as char).collect()
    }

    pub fn from_digits(text: &str, c: u8) -> Result<Self> {
        let colors = text
            .trim()
            .chars()
            .map(|ch| {
                ch.to_digit(36)
                    .map(|d| d as u8)
                    .ok_or_else(|| Error::domain(format!("invalid color digit {ch:?}")))
            })
            .collect::<Result<Vec<u8>>>()?;
        Coloring::new(c, colors)
    }

    fn all_same(&self, xs: &[u64]) -> Option<u8> {
        let first = self.color(xs[0])?;
        xs[1..].iter().all(|&x| self.color(x) == Some(first)).then_some(first)
    }
}

/// Each `i` in `[1..N]` colored uniformly from the tagged hash stream.
pub fn random_coloring(n: u64, c: u8, seed: u64) -> Result<Coloring> {
    if n == 0 {
        return Err(Error::domain("N must be >= 1"));
    }
    if !(2..=MAX_COLORS).contains(&c) {
        return Err(Error::domain(format!("color count must lie in 2..={MAX_COLORS}, got {c}")));
    }
    let stream = seed ^ COLOR_TAG;
    Coloring::from_fn(n, c, |i| ((uniform_bits_u64(stream, i) as u128 * c as u128) >> 64) as u8)
}

struct ColorClass<'a> {
    coloring: &'a Coloring,
    color: u8,
}

impl Membership for ColorClass<'_> {
    fn is_member(&self, n: u64) -> bool {
        self.coloring.color(n) == Some(self.color)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MonoFs {
    pub witness: Vec<u64>,
    pub color: u8,
}

/// Lexicographically least `x_1 < ... < x_len` whose whole FS-set lies in one
/// color class inside `[1..N]`.
pub fn find_mono_fs(coloring: &Coloring, len: u32) -> Result<Option<MonoFs>> {
    if len == 0 || len > MAX_SEARCH_LEN {
        return Err(Error::Size { what: "sumset search length", got: len as u64, limit: MAX_SEARCH_LEN as u64 });
    }
    let n = coloring.n();
    let rest = len as u64 - 1;
    for x1 in 1..=n {
        if len as u64 * x1 + rest * (rest + 1) / 2 > n {
            break;
        }
        let color = coloring.colors[x1 as usize - 1];
        let class = ColorClass { coloring, color };
        let mut prefix = vec![x1];
        let mut sums = vec![x1];
        if extend_fs_witness(&class, n, len as usize, &mut prefix, &mut sums) {
            return Ok(Some(MonoFs { witness: prefix, color }));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MonoQuadruple {
    pub x: u64,
    pub y: u64,
    pub color: u8,
}

/// Least `(x, y)` in lexicographic order with `{x, y, x+y, xy}` inside
/// `[1..N]` and monochromatic. `strict` additionally demands four distinct
/// values; otherwise the distinct-element set is tested.
pub fn find_mono_quadruple(coloring: &Coloring, strict: bool) -> Option<MonoQuadruple> {
    in_range_pairs(coloring.n()).find_map(|(x, y)| {
        let (v, d) = quadruple_values(x, y);
        if strict && d < 4 {
            return None;
        }
        coloring.all_same(&v[..d]).map(|color| MonoQuadruple { x, y, color })
    })
}

/// Ordered pairs with every value of the quadruple in `[1..n]`.
fn in_range_pairs(n: u64) -> impl Iterator<Item = (u64, u64)> {
    (1..n).flat_map(move |x| {
        (1..n)
            .take_while(move |&y| x + y <= n && x * y <= n)
            .map(move |y| (x, y))
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ScanResult {
    /// A 2-coloring of `[1..N]` with no monochromatic quadruple.
    Avoiding { coloring: String },
    /// Every 2-coloring contains one.
    Forced,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanOutcome {
    pub n: u64,
    pub strict: bool,
    pub nodes: u64,
    #[serde(flatten)]
    pub result: ScanResult,
}

impl ScanOutcome {
    pub fn avoiding(&self) -> Option<Coloring> {
        match &self.result {
            ScanResult::Avoiding { coloring } => Some(Coloring::from_digits(coloring, 2).expect("scan emits valid digits")),
            ScanResult::Forced => None,
        }
    }
}

struct Scan {
    order: Vec<usize>,
    /// Quadruple element masks touching each element.
    touching: Vec<Vec<u32>>,
    assigned: [u32; 2],
    nodes: u64,
}

impl Scan {
    fn search(&mut self, depth: usize) -> bool {
        if depth == self.order.len() {
            return true;
        }
        let v = self.order[depth];
        let colors: &[usize] = if depth == 0 { &[0] } else { &[0, 1] };
        for &col in colors {
            self.nodes += 1;
            let set = self.assigned[col] | 1 << v;
            if self.touching[v].iter().any(|&m| m & !set == 0) {
                continue;
            }
            self.assigned[col] = set;
            if self.search(depth + 1) {
                return true;
            }
            self.assigned[col] &= !(1 << v);
        }
        false
    }
}

/// Backtracking over 2-colorings of `[1..N]`, `N <= 30`. Elements are colored
/// in decreasing order of how many quadruples involve them, the first one
/// fixed to color 0 by symmetry.
pub fn exhaustive_2coloring_scan(n: u64, strict: bool) -> Result<ScanOutcome> {
    if n == 0 || n > MAX_SCAN_N {
        return Err(Error::domain(format!("exhaustive scan needs 1 <= N <= {MAX_SCAN_N}, got {n}")));
    }
    let mut masks: Vec<u32> = in_range_pairs(n)
        .filter_map(|(x, y)| {
            let (v, d) = quadruple_values(x, y);
            (!strict || d == 4).then(|| v[..d].iter().fold(0u32, |m, &e| m | 1 << (e - 1)))
        })
        .collect();
    masks.sort_unstable();
    masks.dedup();
    let size = n as usize;
    let mut touching = vec![Vec::new(); size];
    for &m in &masks {
        for (i, t) in touching.iter_mut().enumerate() {
            if m >> i & 1 == 1 {
                t.push(m);
            }
        }
    }
    let mut order: Vec<usize> = (0..size).filter(|&i| !touching[i].is_empty()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(touching[i].len()), i));
    let mut scan = Scan { order, touching, assigned: [0, 0], nodes: 0 };
    let result = if scan.search(0) {
        let ones = scan.assigned[1];
        let digits = (0..size).map(|i| if ones >> i & 1 == 1 { '1' } else { '0' }).collect();
        ScanResult::Avoiding { coloring: digits }
    } else {
        ScanResult::Forced
    };
    Ok(ScanOutcome { n, strict, nodes: scan.nodes, result })
}

/// A monochromatic FS witness packaged as a parent sequence for the CLT tools.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HindmanSequence {
    pub terms: Vec<u64>,
    pub color: Option<u8>,
}

impl HindmanSequence {
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.terms.iter().map(|&t| t as f64).collect()
    }
}

/// Empty when the coloring has no monochromatic FS-set of length `len`.
pub fn hindman_sequence(coloring: &Coloring, len: u32) -> Result<HindmanSequence> {
    Ok(match find_mono_fs(coloring, len)? {
        Some(w) => HindmanSequence { terms: w.witness, color: Some(w.color) },
        None => HindmanSequence { terms: Vec::new(), color: None },
    })
}
