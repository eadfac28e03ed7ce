//! Fock states of two-species fermions on an open or closed chain.
//!
//! A state is stored as two site masks, one per species. Modes are ordered
//! site-major with `Up` before `Down` on each site, so mode `2 * site + spin`.
//! The compact integer key packs the masks as `(down << sites) | up`.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::SparseOperator;

/// Largest chain length representable by the two 64-bit masks.
pub const MAX_SITES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteOccupation {
    Empty,
    Up,
    Down,
    Doublon,
}

impl SiteOccupation {
    pub fn n_up(self) -> usize {
        matches!(self, SiteOccupation::Up | SiteOccupation::Doublon) as usize
    }

    pub fn n_down(self) -> usize {
        matches!(self, SiteOccupation::Down | SiteOccupation::Doublon) as usize
    }

    pub fn symbol(self) -> char {
        match self {
            SiteOccupation::Empty => '.',
            SiteOccupation::Up => 'u',
            SiteOccupation::Down => 'd',
            SiteOccupation::Doublon => 'D',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            '.' => Some(SiteOccupation::Empty),
            'u' => Some(SiteOccupation::Up),
            'd' => Some(SiteOccupation::Down),
            'D' => Some(SiteOccupation::Doublon),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Up = 0,
    Down = 1,
}

impl Spin {
    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

/// A single-particle mode `(site, spin)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mode {
    pub site: usize,
    pub spin: Spin,
}

impl Mode {
    pub fn new(site: usize, spin: Spin) -> Self {
        Mode { site, spin }
    }

    pub fn up(site: usize) -> Self {
        Mode::new(site, Spin::Up)
    }

    pub fn down(site: usize) -> Self {
        Mode::new(site, Spin::Down)
    }

    /// Position in the site-major ordering.
    pub fn ordinal(self) -> usize {
        2 * self.site + self.spin as usize
    }
}

/// How exchange signs are assigned when moving a particle between modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignMode {
    /// Jordan-Wigner parity of occupied modes strictly between source and target.
    #[default]
    Fermionic,
    /// Every hop carries sign +1.
    HardcoreBoson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
    /// Periodic ring with an extra factor -1 on the wrap-around bond.
    Antiperiodic,
}

impl Boundary {
    /// Nearest-neighbour bonds `(left, right, twist)`, where `right` follows
    /// `left` along the chain and `twist` multiplies any amplitude on the bond.
    /// Closed rings need at least three sites to avoid a doubled bond.
    pub fn bonds(self, sites: usize) -> Vec<(usize, usize, f64)> {
        let mut bonds: Vec<_> = (0..sites.saturating_sub(1)).map(|j| (j, j + 1, 1.0)).collect();
        if sites >= 3 {
            match self {
                Boundary::Open => {}
                Boundary::Periodic => bonds.push((sites - 1, 0, 1.0)),
                Boundary::Antiperiodic => bonds.push((sites - 1, 0, -1.0)),
            }
        }
        bonds
    }

    pub fn name(self) -> &'static str {
        match self {
            Boundary::Open => "open",
            Boundary::Periodic => "periodic",
            Boundary::Antiperiodic => "antiperiodic",
        }
    }
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Boundary::Open),
            "periodic" => Ok(Boundary::Periodic),
            "antiperiodic" => Ok(Boundary::Antiperiodic),
            other => Err(Error::Parameter(format!("unknown boundary '{other}'"))),
        }
    }
}

#[inline]
fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Occupations of an `sites`-long chain, one bit per species and site.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct FockState {
    sites: usize,
    up: u64,
    down: u64,
}

impl FockState {
    pub fn vacuum(sites: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::Parameter(format!(
                "site count must be in 1..={MAX_SITES}, got {sites}"
            )));
        }
        Ok(FockState { sites, up: 0, down: 0 })
    }

    pub fn from_masks(sites: usize, up: u64, down: u64) -> Result<Self> {
        let s = FockState::vacuum(sites)?;
        let mask = low_mask(sites);
        if up & !mask != 0 || down & !mask != 0 {
            return Err(Error::Parameter("occupation mask exceeds the site count".into()));
        }
        Ok(FockState { up, down, ..s })
    }

    pub fn from_occupations(occupations: &[SiteOccupation]) -> Result<Self> {
        let mut s = FockState::vacuum(occupations.len())?;
        for (j, &occ) in occupations.iter().enumerate() {
            s.set(j, occ);
        }
        Ok(s)
    }

    /// Inverse of [`FockState::key`].
    pub fn from_key(sites: usize, key: u128) -> Result<Self> {
        FockState::vacuum(sites)?;
        let mask = low_mask(sites) as u128;
        if sites < 64 && key >> (2 * sites) != 0 {
            return Err(Error::Parameter(format!("key {key} out of range for {sites} sites")));
        }
        FockState::from_masks(sites, (key & mask) as u64, (key >> sites) as u64)
    }

    pub fn key(&self) -> u128 {
        ((self.down as u128) << self.sites) | self.up as u128
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn up_mask(&self) -> u64 {
        self.up
    }

    pub fn down_mask(&self) -> u64 {
        self.down
    }

    pub fn occupation(&self, site: usize) -> SiteOccupation {
        match (self.up >> site & 1, self.down >> site & 1) {
            (0, 0) => SiteOccupation::Empty,
            (1, 0) => SiteOccupation::Up,
            (0, 1) => SiteOccupation::Down,
            _ => SiteOccupation::Doublon,
        }
    }

    pub fn occupations(&self) -> Vec<SiteOccupation> {
        (0..self.sites).map(|j| self.occupation(j)).collect()
    }

    pub fn set(&mut self, site: usize, occ: SiteOccupation) {
        let bit = 1u64 << site;
        self.up = (self.up & !bit) | if occ.n_up() == 1 { bit } else { 0 };
        self.down = (self.down & !bit) | if occ.n_down() == 1 { bit } else { 0 };
    }

    #[inline]
    pub fn is_occupied(&self, mode: Mode) -> bool {
        let mask = match mode.spin {
            Spin::Up => self.up,
            Spin::Down => self.down,
        };
        mask >> mode.site & 1 == 1
    }

    #[inline]
    pub fn n_up_at(&self, site: usize) -> u32 {
        (self.up >> site & 1) as u32
    }

    #[inline]
    pub fn n_down_at(&self, site: usize) -> u32 {
        (self.down >> site & 1) as u32
    }

    pub fn n_up(&self) -> usize {
        self.up.count_ones() as usize
    }

    pub fn n_down(&self) -> usize {
        self.down.count_ones() as usize
    }

    pub fn n_atoms(&self) -> usize {
        self.n_up() + self.n_down()
    }

    pub fn doublons(&self) -> usize {
        (self.up & self.down).count_ones() as usize
    }

    /// Number of occupied modes whose ordinal is below `ordinal`.
    #[inline]
    fn occupied_below(&self, ordinal: usize) -> u32 {
        let site = ordinal / 2;
        let below = low_mask(site);
        let mut n = (self.up & below).count_ones() + (self.down & below).count_ones();
        if ordinal % 2 == 1 {
            n += self.n_up_at(site);
        }
        n
    }

    /// Sign picked up by moving a particle from `from` to `to`: parity of the
    /// occupied modes strictly between the two ordinals.
    #[inline]
    pub fn exchange_sign(&self, from: Mode, to: Mode) -> f64 {
        let (a, b) = (from.ordinal(), to.ordinal());
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if hi <= lo + 1 {
            return 1.0;
        }
        let lo_mode = Mode::new(lo / 2, if lo % 2 == 0 { Spin::Up } else { Spin::Down });
        let between = self.occupied_below(hi) - self.occupied_below(lo) - self.is_occupied(lo_mode) as u32;
        if between.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    fn toggle(&mut self, mode: Mode) {
        let bit = 1u64 << mode.site;
        match mode.spin {
            Spin::Up => self.up ^= bit,
            Spin::Down => self.down ^= bit,
        }
    }

    /// Applies `a†_to a_from`. Returns `None` when the result vanishes.
    #[inline]
    pub fn hop(&self, from: Mode, to: Mode, signs: SignMode) -> Option<(FockState, f64)> {
        if from == to {
            return self.is_occupied(from).then_some((*self, 1.0));
        }
        if !self.is_occupied(from) || self.is_occupied(to) {
            return None;
        }
        let sign = match signs {
            SignMode::Fermionic => self.exchange_sign(from, to),
            SignMode::HardcoreBoson => 1.0,
        };
        let mut next = *self;
        next.toggle(from);
        next.toggle(to);
        Some((next, sign))
    }

    /// Applies `a†_mode`.
    pub fn create(&self, mode: Mode, signs: SignMode) -> Option<(FockState, f64)> {
        if self.is_occupied(mode) {
            return None;
        }
        let sign = match signs {
            SignMode::Fermionic if self.occupied_below(mode.ordinal()) % 2 == 1 => -1.0,
            _ => 1.0,
        };
        let mut next = *self;
        next.toggle(mode);
        Some((next, sign))
    }

    /// Applies `a_mode`.
    pub fn annihilate(&self, mode: Mode, signs: SignMode) -> Option<(FockState, f64)> {
        if !self.is_occupied(mode) {
            return None;
        }
        let sign = match signs {
            SignMode::Fermionic if self.occupied_below(mode.ordinal()) % 2 == 1 => -1.0,
            _ => 1.0,
        };
        let mut next = *self;
        next.toggle(mode);
        Some((next, sign))
    }

    /// Sites in ascending order whose occupation differs from `Empty`.
    pub fn occupied_sites(&self) -> Vec<usize> {
        let mut m = self.up | self.down;
        let mut out = Vec::with_capacity(m.count_ones() as usize);
        while m != 0 {
            out.push(m.trailing_zeros() as usize);
            m &= m - 1;
        }
        out
    }

    /// Mirror image `j -> sites - 1 - j`.
    pub fn reflected(&self) -> FockState {
        let shift = 64 - self.sites as u32;
        FockState {
            sites: self.sites,
            up: self.up.reverse_bits() >> shift,
            down: self.down.reverse_bits() >> shift,
        }
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in 0..self.sites {
            write!(f, "{}", self.occupation(j).symbol())?;
        }
        Ok(())
    }
}

impl fmt::Debug for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{self}>")
    }
}

impl FromStr for FockState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_loadout(s)
    }
}

/// Parses a loadout string over `.`, `u`, `d`, `D` (empty, up, down, doublon).
pub fn parse_loadout(spec: &str) -> Result<FockState> {
    let occupations = spec
        .chars()
        .enumerate()
        .map(|(position, c)| {
            SiteOccupation::from_symbol(c).ok_or_else(|| Error::Parse {
                position,
                message: format!("illegal character '{c}' (expected one of . u d D)"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if occupations.is_empty() {
        return Err(Error::Parse { position: 0, message: "empty loadout".into() });
    }
    FockState::from_occupations(&occupations)
}

/// An ordered, indexed set of Fock states sharing a site count.
#[derive(Debug, Clone)]
pub struct Basis {
    sites: usize,
    atoms: Option<usize>,
    boundary: Boundary,
    states: Vec<FockState>,
    index: HashMap<u128, usize>,
}

impl Basis {
    /// Builds a basis from arbitrary states, sorted by key with duplicates removed.
    pub fn from_states(sites: usize, boundary: Boundary, states: impl IntoIterator<Item = FockState>) -> Result<Self> {
        FockState::vacuum(sites)?;
        let mut states: Vec<FockState> = states.into_iter().collect();
        if let Some(bad) = states.iter().find(|s| s.sites() != sites) {
            return Err(Error::Parameter(format!("state {bad} does not have {sites} sites")));
        }
        states.sort_by_key(|s| s.key());
        states.dedup();
        let atoms = match states.first() {
            Some(first) if states.iter().all(|s| s.n_atoms() == first.n_atoms()) => Some(first.n_atoms()),
            None => None,
            _ => None,
        };
        let index = states.iter().enumerate().map(|(i, s)| (s.key(), i)).collect();
        Ok(Basis { sites, atoms, boundary, states, index })
    }

    /// Every state of the `sites`-site chain, all atom numbers (`4^sites` states).
    pub fn all_sectors(sites: usize, boundary: Boundary) -> Result<Self> {
        if sites > 12 {
            return Err(Error::Parameter(format!("mixed-sector basis limited to 12 sites, got {sites}")));
        }
        let n = 1u128 << (2 * sites);
        Basis::from_states(sites, boundary, (0..n).map(|k| FockState::from_key(sites, k).unwrap()))
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Common atom number, or `None` for a mixed-sector basis.
    pub fn atoms(&self) -> Option<usize> {
        self.atoms
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> FockState {
        self.states[i]
    }

    pub fn index_of(&self, s: &FockState) -> Option<usize> {
        if s.sites() != self.sites {
            return None;
        }
        self.index.get(&s.key()).copied()
    }

    pub fn contains(&self, s: &FockState) -> bool {
        self.index_of(s).is_some()
    }

    /// Index of `s`, or a parameter error naming the missing state.
    pub fn require(&self, s: &FockState) -> Result<usize> {
        self.index_of(s)
            .ok_or_else(|| Error::Parameter(format!("state {s} is not in the basis")))
    }

    /// Writes the header `sites atoms boundary` followed by one decimal key per line.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let atoms = self.atoms.map_or_else(|| "mixed".to_string(), |n| n.to_string());
        writeln!(w, "{} {} {}", self.sites, atoms, self.boundary.name())?;
        for s in &self.states {
            writeln!(w, "{}", s.key())?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse { position: 0, message: "missing header".into() })??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse { position: 0, message: format!("bad header '{header}'") });
        }
        let sites: usize = fields[0]
            .parse()
            .map_err(|_| Error::Parse { position: 0, message: "bad site count".into() })?;
        let boundary: Boundary = fields[2].parse()?;
        let mut states = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let key: u128 = line
                .trim()
                .parse()
                .map_err(|_| Error::Parse { position: i + 1, message: format!("bad key '{line}'") })?;
            states.push(FockState::from_key(sites, key)?);
        }
        Basis::from_states(sites, boundary, states)
    }
}

/// All states with `atoms` particles on `sites` sites, in ascending key order.
pub fn enumerate_basis(sites: usize, atoms: usize, boundary: Boundary) -> Result<Basis> {
    FockState::vacuum(sites)?;
    if sites >= MAX_SITES {
        return Err(Error::Parameter(format!("enumeration supports at most {} sites", MAX_SITES - 1)));
    }
    if atoms > 2 * sites {
        return Err(Error::Parameter(format!(
            "atom number {atoms} exceeds the {} available modes",
            2 * sites
        )));
    }
    let width = 2 * sites as u32;
    let mut states = Vec::new();
    if atoms == 0 {
        states.push(FockState::vacuum(sites)?);
    } else {
        // Gosper's hack walks all `width`-bit words with `atoms` set bits in ascending order.
        let limit = 1u128 << width;
        let mut word: u128 = (1u128 << atoms) - 1;
        while word < limit {
            states.push(FockState::from_key(sites, word)?);
            let c = word & word.wrapping_neg();
            let r = word + c;
            word = (((r ^ word) >> 2) / c) | r;
        }
    }
    let index = states.iter().enumerate().map(|(i, s)| (s.key(), i)).collect();
    Ok(Basis { sites, atoms: Some(atoms), boundary, states, index })
}

/// Breadth-first closure of `seeds` under a neighbour relation. Returned in
/// discovery order.
pub fn explore<F>(seeds: &[FockState], mut neighbours: F) -> Vec<FockState>
where
    F: FnMut(&FockState) -> Vec<FockState>,
{
    let mut seen: HashMap<u128, ()> = HashMap::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    for s in seeds {
        if seen.insert(s.key(), ()).is_none() {
            queue.push_back(*s);
        }
    }
    while let Some(s) = queue.pop_front() {
        order.push(s);
        for n in neighbours(&s) {
            if seen.insert(n.key(), ()).is_none() {
                queue.push_back(n);
            }
        }
    }
    order
}

/// Connected component of `seeds` in the adjacency graph of `h` (nonzero
/// off-diagonal elements), as a sub-basis of `basis`.
pub fn reachable_subspace(h: &SparseOperator, basis: &Basis, seeds: &[FockState]) -> Result<Basis> {
    if h.dim() != basis.len() {
        return Err(Error::Dimension { expected: basis.len(), found: h.dim() });
    }
    let seeds = seeds.iter().map(|s| basis.require(s).map(|_| *s)).collect::<Result<Vec<_>>>()?;
    let states = explore(&seeds, |s| {
        let i = basis.index_of(s).expect("explored states come from the basis");
        h.row(i)
            .filter(|&(j, v)| j != i && v.norm() != 0.0)
            .map(|(j, _)| basis.state(j))
            .collect()
    });
    Basis::from_states(basis.sites(), basis.boundary(), states)
}

/// Number of distinct basis states coupled to `state` by a nonzero element of `h`.
pub fn connectivity(state: &FockState, h: &SparseOperator, basis: &Basis) -> Result<usize> {
    let i = basis.require(state)?;
    Ok(h.row(i).filter(|&(j, v)| j != i && v.norm() != 0.0).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loadout_parsing() {
        let s = parse_loadout("..uuu..").unwrap();
        assert_eq!(s.sites(), 7);
        assert_eq!(s.n_up(), 3);
        assert_eq!(s.to_string(), "..uuu..");

        let s = parse_loadout("uu...d.").unwrap();
        assert_eq!(s.occupation(5), SiteOccupation::Down);
        assert_eq!(s.n_atoms(), 3);

        match parse_loadout("x") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 0),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_loadout("u.uX") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_loadout("").is_err());
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(enumerate_basis(2, 1, Boundary::Open).unwrap().len(), 4);
        assert_eq!(enumerate_basis(2, 2, Boundary::Open).unwrap().len(), 6);
        assert_eq!(enumerate_basis(8, 6, Boundary::Periodic).unwrap().len(), 8008);
        assert_eq!(enumerate_basis(3, 0, Boundary::Open).unwrap().len(), 1);
        assert_eq!(enumerate_basis(3, 6, Boundary::Open).unwrap().len(), 1);
        assert!(enumerate_basis(3, 7, Boundary::Open).is_err());
        assert!(enumerate_basis(0, 0, Boundary::Open).is_err());
    }

    #[test]
    fn basis_is_key_ordered() {
        let b = enumerate_basis(5, 3, Boundary::Open).unwrap();
        assert!(b.states().windows(2).all(|w| w[0].key() < w[1].key()));
        for (i, s) in b.states().iter().enumerate() {
            assert_eq!(b.index_of(s), Some(i));
            assert_eq!(s.n_atoms(), 3);
        }
    }

    #[test]
    fn wide_chains_fit() {
        let s = FockState::from_masks(64, 1 << 63, 1).unwrap();
        assert_eq!(FockState::from_key(64, s.key()).unwrap(), s);
        assert_eq!(enumerate_basis(40, 1, Boundary::Open).unwrap().len(), 80);
    }

    #[test]
    fn hop_signs() {
        // |u, u> : moving the site-1 up atom onto site 0 as down crosses no occupied mode.
        let s = parse_loadout("uu").unwrap();
        let (t, sign) = s.hop(Mode::up(1), Mode::down(0), SignMode::Fermionic).unwrap();
        assert_eq!(t.to_string(), "D.");
        assert_eq!(sign, 1.0);
        // Moving the site-0 up atom onto site 1 as down crosses the up mode of site 1.
        let (t, sign) = s.hop(Mode::up(0), Mode::down(1), SignMode::Fermionic).unwrap();
        assert_eq!(t.to_string(), ".D");
        assert_eq!(sign, -1.0);
        let (_, sign) = s.hop(Mode::up(0), Mode::down(1), SignMode::HardcoreBoson).unwrap();
        assert_eq!(sign, 1.0);
        // Pauli blocking and empty source.
        assert!(s.hop(Mode::up(0), Mode::up(1), SignMode::Fermionic).is_none());
        assert!(s.hop(Mode::down(0), Mode::down(1), SignMode::Fermionic).is_none());
    }

    #[test]
    fn creation_matches_hop_sign() {
        // a†_to a_from |s> computed two ways.
        let s = parse_loadout("uDdu.").unwrap();
        let from = Mode::up(0);
        let to = Mode::down(4);
        let (mid, s1) = s.annihilate(from, SignMode::Fermionic).unwrap();
        let (end, s2) = mid.create(to, SignMode::Fermionic).unwrap();
        let (direct, s3) = s.hop(from, to, SignMode::Fermionic).unwrap();
        assert_eq!(end, direct);
        assert_eq!(s1 * s2, s3);
    }

    #[test]
    fn reflection() {
        let s = parse_loadout("uD..d").unwrap();
        assert_eq!(s.reflected().to_string(), "d..Du");
    }

    #[test]
    fn basis_export_roundtrip() {
        let b = enumerate_basis(4, 2, Boundary::Periodic).unwrap();
        let mut buf = Vec::new();
        b.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("4 2 periodic\n"));
        let back = Basis::read_from(&buf[..]).unwrap();
        assert_eq!(back.states(), b.states());
        assert_eq!(back.boundary(), Boundary::Periodic);
    }

    fn arb_state() -> impl Strategy<Value = FockState> {
        (1usize..=20).prop_flat_map(|l| {
            let m = low_mask(l);
            (Just(l), any::<u64>(), any::<u64>())
                .prop_map(move |(l, u, d)| FockState::from_masks(l, u & m, d & m).unwrap())
        })
    }

    proptest! {
        #[test]
        fn key_roundtrip(s in arb_state()) {
            prop_assert_eq!(FockState::from_key(s.sites(), s.key()).unwrap(), s);
            prop_assert_eq!(parse_loadout(&s.to_string()).unwrap(), s);
        }

        #[test]
        fn hop_then_reverse_is_identity(s in arb_state(), a in 0usize..40, b in 0usize..40) {
            let l = s.sites();
            let ma = Mode::new(a % l, if a % 2 == 0 { Spin::Up } else { Spin::Down });
            let mb = Mode::new(b % l, if b % 3 == 0 { Spin::Up } else { Spin::Down });
            if let Some((t, s1)) = s.hop(ma, mb, SignMode::Fermionic) {
                let (back, s2) = t.hop(mb, ma, SignMode::Fermionic).unwrap();
                prop_assert_eq!(back, s);
                prop_assert_eq!(s1 * s2, 1.0);
            }
        }
    }
}
