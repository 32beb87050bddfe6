//! Site states, finite boxes of `Z^d` and configurations.
//!
//! A site carries one of four codes: `0` empty, `1` wild only, `2` sterile
//! only, `3` wild and sterile. The comparison order used by every coupling
//! statement is `2 < 0 < 3 < 1`.
//!
//! Sites of a box are linearised row-major: the last axis varies fastest, so
//! in 2D the site `(i, j)` has index `i * L + j`. Event logs refer to these
//! indices, which keeps them replayable.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("site index {index} outside box of {sites} sites")]
    IndexOutOfBox { index: usize, sites: usize },
    #[error("configurations live on different boxes")]
    GeometryMismatch,
    #[error("invalid site state code {0}")]
    InvalidState(u8),
    #[error("invalid box geometry: {0}")]
    InvalidGeometry(String),
    #[error("malformed snapshot: {0}")]
    Parse(String),
}

/// State of a single site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum SiteState {
    Empty = 0,
    Wild = 1,
    Sterile = 2,
    Mixed = 3,
}

impl SiteState {
    pub const ALL: [SiteState; 4] = [
        SiteState::Empty,
        SiteState::Wild,
        SiteState::Sterile,
        SiteState::Mixed,
    ];

    /// States listed from smallest to largest in the comparison order.
    pub const ASCENDING: [SiteState; 4] = [
        SiteState::Sterile,
        SiteState::Empty,
        SiteState::Mixed,
        SiteState::Wild,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self, LatticeError> {
        match code {
            0 => Ok(SiteState::Empty),
            1 => Ok(SiteState::Wild),
            2 => Ok(SiteState::Sterile),
            3 => Ok(SiteState::Mixed),
            other => Err(LatticeError::InvalidState(other)),
        }
    }

    /// Position in the order `2 < 0 < 3 < 1` (the letters `A < B < C < D`).
    pub fn rank(self) -> u8 {
        match self {
            SiteState::Sterile => 0,
            SiteState::Empty => 1,
            SiteState::Mixed => 2,
            SiteState::Wild => 3,
        }
    }

    pub fn from_rank(rank: u8) -> Option<Self> {
        Self::ASCENDING.get(rank as usize).copied()
    }

    pub fn letter(self) -> char {
        (b'A' + self.rank()) as char
    }

    /// Wild individuals present (states 1 and 3).
    pub fn is_wild(self) -> bool {
        matches!(self, SiteState::Wild | SiteState::Mixed)
    }

    /// Sterile individuals present (states 2 and 3).
    pub fn is_sterile(self) -> bool {
        matches!(self, SiteState::Sterile | SiteState::Mixed)
    }

    pub fn from_components(wild: bool, sterile: bool) -> Self {
        match (wild, sterile) {
            (false, false) => SiteState::Empty,
            (true, false) => SiteState::Wild,
            (false, true) => SiteState::Sterile,
            (true, true) => SiteState::Mixed,
        }
    }
}

impl From<SiteState> for u8 {
    fn from(s: SiteState) -> u8 {
        s.code()
    }
}

impl TryFrom<u8> for SiteState {
    type Error = LatticeError;
    fn try_from(code: u8) -> Result<Self, Self::Error> {
        SiteState::from_code(code)
    }
}

impl fmt::Display for SiteState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

impl PartialOrd for SiteState {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SiteState {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank().cmp(&other.rank())
    }
}

pub fn compare_states(a: SiteState, b: SiteState) -> Ordering {
    a.cmp(&b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Opposite faces identified.
    Periodic,
    /// Everything outside the box is permanently empty.
    EmptyExterior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxGeometry {
    pub dimension: usize,
    pub side: usize,
    pub boundary: Boundary,
}

impl BoxGeometry {
    pub fn new(dimension: usize, side: usize, boundary: Boundary) -> Result<Self, LatticeError> {
        if dimension == 0 {
            return Err(LatticeError::InvalidGeometry("dimension must be positive".into()));
        }
        if side == 0 {
            return Err(LatticeError::InvalidGeometry("side length must be positive".into()));
        }
        side.checked_pow(dimension as u32)
            .ok_or_else(|| LatticeError::InvalidGeometry("site count overflows".into()))?;
        Ok(Self { dimension, side, boundary })
    }

    pub fn periodic(dimension: usize, side: usize) -> Result<Self, LatticeError> {
        Self::new(dimension, side, Boundary::Periodic)
    }

    pub fn sites(&self) -> usize {
        self.side.pow(self.dimension as u32)
    }

    /// Neighbour slots per site, `2d`.
    pub fn degree(&self) -> usize {
        2 * self.dimension
    }

    pub fn coords(&self, index: usize) -> Vec<usize> {
        let mut c = vec![0; self.dimension];
        let mut rest = index;
        for axis in (0..self.dimension).rev() {
            c[axis] = rest % self.side;
            rest /= self.side;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().fold(0, |acc, &c| acc * self.side + c)
    }

    /// Site in the middle of the box; plays the role of the origin.
    pub fn center(&self) -> usize {
        self.index(&vec![self.side / 2; self.dimension])
    }

    pub fn check(&self, index: usize) -> Result<(), LatticeError> {
        if index < self.sites() {
            Ok(())
        } else {
            Err(LatticeError::IndexOutOfBox { index, sites: self.sites() })
        }
    }

    /// Neighbour in slot `slot`: axis `slot / 2`, direction `-1` for even
    /// slots and `+1` for odd ones. `None` when the slot leaves an
    /// empty-exterior box.
    pub fn neighbor(&self, index: usize, slot: usize) -> Option<usize> {
        let axis = slot / 2;
        let stride = self.side.pow((self.dimension - 1 - axis) as u32);
        let c = (index / stride) % self.side;
        let up = slot % 2 == 1;
        let next = match (up, self.boundary) {
            (true, _) if c + 1 < self.side => c + 1,
            (false, _) if c > 0 => c - 1,
            (true, Boundary::Periodic) => 0,
            (false, Boundary::Periodic) => self.side - 1,
            (_, Boundary::EmptyExterior) => return None,
        };
        Some(index - c * stride + next * stride)
    }

    /// Flattened `sites x 2d` neighbour table.
    pub fn neighbor_table(&self) -> Vec<Option<usize>> {
        let deg = self.degree();
        let mut table = Vec::with_capacity(self.sites() * deg);
        for x in 0..self.sites() {
            for slot in 0..deg {
                table.push(self.neighbor(x, slot));
            }
        }
        table
    }

    /// Translate a site by a displacement vector (periodic boxes wrap).
    pub fn translate(&self, index: usize, shift: &[i64]) -> Option<usize> {
        let side = self.side as i64;
        let mut c = self.coords(index);
        for (axis, s) in shift.iter().enumerate() {
            let v = c[axis] as i64 + s;
            c[axis] = match self.boundary {
                Boundary::Periodic => v.rem_euclid(side) as usize,
                Boundary::EmptyExterior if (0..side).contains(&v) => v as usize,
                Boundary::EmptyExterior => return None,
            };
        }
        Some(self.index(&c))
    }
}

/// Coordinate-wise comparison outcome of two configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfigOrdering {
    /// First configuration below the second at every site, strictly somewhere.
    Below,
    /// First configuration above the second at every site, strictly somewhere.
    Above,
    Equal,
    Incomparable,
}

impl ConfigOrdering {
    /// `c1 <= c2` in the coordinate-wise order.
    pub fn is_le(self) -> bool {
        matches!(self, ConfigOrdering::Below | ConfigOrdering::Equal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    geometry: BoxGeometry,
    states: Vec<SiteState>,
}

impl Configuration {
    pub fn filled(geometry: BoxGeometry, state: SiteState) -> Self {
        Self { geometry, states: vec![state; geometry.sites()] }
    }

    pub fn empty(geometry: BoxGeometry) -> Self {
        Self::filled(geometry, SiteState::Empty)
    }

    /// `1_A`: wild-only on `A`, empty elsewhere.
    pub fn wild_on<I: IntoIterator<Item = usize>>(
        geometry: BoxGeometry,
        sites: I,
    ) -> Result<Self, LatticeError> {
        let mut c = Self::empty(geometry);
        for x in sites {
            c.set(x, SiteState::Wild)?;
        }
        Ok(c)
    }

    pub fn from_states(geometry: BoxGeometry, states: Vec<SiteState>) -> Result<Self, LatticeError> {
        if states.len() != geometry.sites() {
            return Err(LatticeError::InvalidGeometry(format!(
                "{} states for a box of {} sites",
                states.len(),
                geometry.sites()
            )));
        }
        Ok(Self { geometry, states })
    }

    pub fn from_codes(geometry: BoxGeometry, codes: &[u8]) -> Result<Self, LatticeError> {
        let states = codes
            .iter()
            .map(|&c| SiteState::from_code(c))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_states(geometry, states)
    }

    pub fn geometry(&self) -> &BoxGeometry {
        &self.geometry
    }

    pub fn states(&self) -> &[SiteState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, x: usize) -> Result<SiteState, LatticeError> {
        self.geometry.check(x)?;
        Ok(self.states[x])
    }

    pub fn set(&mut self, x: usize, state: SiteState) -> Result<SiteState, LatticeError> {
        self.geometry.check(x)?;
        Ok(std::mem::replace(&mut self.states[x], state))
    }

    /// Unchecked access for hot loops; `x` must be a valid index.
    #[inline]
    pub(crate) fn at(&self, x: usize) -> SiteState {
        self.states[x]
    }

    #[inline]
    pub(crate) fn put(&mut self, x: usize, state: SiteState) {
        self.states[x] = state;
    }

    pub fn codes(&self) -> Vec<u8> {
        self.states.iter().map(|s| s.code()).collect()
    }

    pub fn wild_count(&self) -> usize {
        self.states.iter().filter(|s| s.is_wild()).count()
    }

    /// Whether every state lies in `{0, 1}`.
    pub fn is_binary(&self) -> bool {
        self.states
            .iter()
            .all(|s| matches!(s, SiteState::Empty | SiteState::Wild))
    }

    /// Shift by `shift` (periodic boxes only make this a bijection).
    pub fn translated(&self, shift: &[i64]) -> Self {
        let mut out = Self::empty(self.geometry);
        for (x, &s) in self.states.iter().enumerate() {
            if let Some(y) = self.geometry.translate(x, shift) {
                out.states[y] = s;
            }
        }
        out
    }

    /// `index,state` CSV with the geometry as a JSON comment header.
    pub fn to_snapshot(&self) -> String {
        let mut out = String::with_capacity(8 * self.states.len() + 64);
        out.push_str("# ");
        out.push_str(&serde_json::to_string(&self.geometry).expect("geometry serialises"));
        out.push_str("\nindex,state\n");
        for (i, s) in self.states.iter().enumerate() {
            out.push_str(&format!("{i},{s}\n"));
        }
        out
    }

    pub fn from_snapshot(text: &str) -> Result<Self, LatticeError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| LatticeError::Parse("missing geometry header".into()))?;
        let geometry: BoxGeometry = serde_json::from_str(header.trim())
            .map_err(|e| LatticeError::Parse(e.to_string()))?;
        let geometry = BoxGeometry::new(geometry.dimension, geometry.side, geometry.boundary)?;
        let mut states = vec![None; geometry.sites()];
        for line in lines {
            let line = line.trim();
            if line.is_empty() || line == "index,state" {
                continue;
            }
            let (i, s) = line
                .split_once(',')
                .ok_or_else(|| LatticeError::Parse(format!("bad row `{line}`")))?;
            let i: usize = i.trim().parse().map_err(|_| LatticeError::Parse(format!("bad index `{i}`")))?;
            let s: u8 = s.trim().parse().map_err(|_| LatticeError::Parse(format!("bad state `{s}`")))?;
            geometry.check(i)?;
            states[i] = Some(SiteState::from_code(s)?);
        }
        let states = states
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| LatticeError::Parse(format!("site {i} missing"))))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_states(geometry, states)
    }
}

/// Number of neighbours of `x` in state 1 and in state 3.
pub fn neighbor_counts(config: &Configuration, x: usize) -> Result<(u32, u32), LatticeError> {
    let g = config.geometry();
    g.check(x)?;
    let mut n1 = 0;
    let mut n3 = 0;
    for slot in 0..g.degree() {
        match g.neighbor(x, slot).map(|y| config.at(y)) {
            Some(SiteState::Wild) => n1 += 1,
            Some(SiteState::Mixed) => n3 += 1,
            _ => {}
        }
    }
    Ok((n1, n3))
}

pub fn compare_configs(c1: &Configuration, c2: &Configuration) -> Result<ConfigOrdering, LatticeError> {
    if c1.geometry != c2.geometry {
        return Err(LatticeError::GeometryMismatch);
    }
    let mut below = false;
    let mut above = false;
    for (a, b) in c1.states.iter().zip(&c2.states) {
        match a.cmp(b) {
            Ordering::Less => below = true,
            Ordering::Greater => above = true,
            Ordering::Equal => {}
        }
        if below && above {
            return Ok(ConfigOrdering::Incomparable);
        }
    }
    Ok(match (below, above) {
        (false, false) => ConfigOrdering::Equal,
        (true, false) => ConfigOrdering::Below,
        (false, true) => ConfigOrdering::Above,
        (true, true) => unreachable!(),
    })
}

/// Sites holding wild individuals, `{x : state(x) in {1, 3}}`.
pub fn wild_set(config: &Configuration) -> BTreeSet<usize> {
    config
        .states
        .iter()
        .enumerate()
        .filter(|(_, s)| s.is_wild())
        .map(|(i, _)| i)
        .collect()
}
