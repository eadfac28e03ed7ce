//! Product eigenstates of the resonant model in the sector without down
//! singlons: transfer-matrix counting and brute-force enumeration.

use std::io::Write;

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Boundary, FockState, SiteOccupation};
use crate::hamiltonians::{apply_merged, Effective, ModelParams};

/// Largest chain handled by [`enumerate_frozen_states`] (`3^12` candidates).
pub const MAX_ENUMERATION_SITES: usize = 12;

/// Frozen product states of length `L`, split by the occupation of the last site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScarCountVector {
    pub up: u128,
    pub empty: u128,
    pub doublon: u128,
}

impl ScarCountVector {
    pub fn total(&self) -> u128 {
        self.up + self.empty + self.doublon
    }

    /// Tallies `states` by their last site. Fails on a down singlon there.
    pub fn tally(states: &[FockState]) -> Result<Self> {
        let mut v = ScarCountVector::default();
        for s in states {
            match s.occupation(s.sites() - 1) {
                SiteOccupation::Up => v.up += 1,
                SiteOccupation::Empty => v.empty += 1,
                SiteOccupation::Doublon => v.doublon += 1,
                SiteOccupation::Down => return Err(Error::Parameter(format!("{s} ends in a down singlon"))),
            }
        }
        Ok(v)
    }
}

/// Extends a frozen chain by one site. Rows are the new last site (up, empty,
/// doublon) and columns the old one: an up atom may not follow an up atom,
/// and a doublon and an empty site may not be neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferMatrix;

impl TransferMatrix {
    pub const ENTRIES: [[u128; 3]; 3] = [[0, 1, 1], [1, 1, 0], [1, 0, 1]];

    pub fn apply(&self, v: ScarCountVector) -> ScarCountVector {
        let x = [v.up, v.empty, v.doublon];
        let row = |r: [u128; 3]| r.iter().zip(&x).map(|(a, b)| a * b).sum::<u128>();
        let m = Self::ENTRIES;
        ScarCountVector { up: row(m[0]), empty: row(m[1]), doublon: row(m[2]) }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let m = Matrix3::from_fn(|i, j| Self::ENTRIES[i][j] as f64);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2]]
    }
}

/// Number of frozen product states on an open chain of `sites >= 2` sites,
/// from `(2, 2, 2)` at two sites.
pub fn scar_count(sites: usize) -> Result<ScarCountVector> {
    if sites < 2 {
        return Err(Error::Parameter(format!("scar counting needs at least 2 sites, got {sites}")));
    }
    if sites > 120 {
        return Err(Error::Parameter(format!("count for {sites} sites overflows 128 bits")));
    }
    let mut v = ScarCountVector { up: 2, empty: 2, doublon: 2 };
    for _ in 2..sites {
        v = TransferMatrix.apply(v);
    }
    Ok(v)
}

/// Whether the resonant model annihilates `s` on an open chain.
pub fn is_frozen(s: &FockState) -> bool {
    let model = Effective(ModelParams::new(s.sites(), Boundary::Open));
    apply_merged(&model, s).is_empty()
}

/// All states over {empty, up, doublon}^L annihilated by the resonant model on
/// an open chain, in ascending key order.
pub fn enumerate_frozen_states(sites: usize) -> Result<Vec<FockState>> {
    if !(1..=MAX_ENUMERATION_SITES).contains(&sites) {
        return Err(Error::Parameter(format!(
            "brute-force enumeration supports 1..={MAX_ENUMERATION_SITES} sites, got {sites}"
        )));
    }
    let candidates = 3usize.pow(sites as u32);
    let alphabet = [SiteOccupation::Empty, SiteOccupation::Up, SiteOccupation::Doublon];
    let mut frozen: Vec<FockState> = (0..candidates)
        .into_par_iter()
        .filter_map(|mut code| {
            let mut s = FockState::vacuum(sites).ok()?;
            for j in 0..sites {
                s.set(j, alphabet[code % 3]);
                code /= 3;
            }
            is_frozen(&s).then_some(s)
        })
        .collect();
    frozen.sort_by_key(|s| s.key());
    Ok(frozen)
}

/// Writes `L,count_up,count_empty,count_doublon,total` rows for each length.
pub fn write_counts_csv<W: Write>(mut w: W, lengths: &[usize]) -> Result<()> {
    writeln!(w, "L,count_up,count_empty,count_doublon,total")?;
    for &l in lengths {
        let v = scar_count(l)?;
        writeln!(w, "{l},{},{},{},{}", v.up, v.empty, v.doublon, v.total())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::parse_loadout;

    #[test]
    fn two_sites() {
        let found: Vec<String> = enumerate_frozen_states(2).unwrap().iter().map(|s| s.to_string()).collect();
        let mut expected: Vec<String> = ["u.", ".u", "..", "uD", "Du", "DD"]
            .iter()
            .map(|l| parse_loadout(l).unwrap().to_string())
            .collect();
        let mut found_sorted = found.clone();
        found_sorted.sort();
        expected.sort();
        assert_eq!(found_sorted, expected);
        assert!(!is_frozen(&parse_loadout("uu").unwrap()));
    }

    #[test]
    fn counts_match_enumeration() {
        for l in 2..=8 {
            let states = enumerate_frozen_states(l).unwrap();
            assert_eq!(ScarCountVector::tally(&states).unwrap(), scar_count(l).unwrap(), "L = {l}");
        }
        assert_eq!(scar_count(3).unwrap().total(), 12);
        assert_eq!(scar_count(6).unwrap().total(), 96);
    }

    #[test]
    fn closed_form_and_spectrum() {
        for l in 2..=100 {
            assert_eq!(scar_count(l).unwrap().total(), 6u128 << (l - 2));
        }
        let ev = TransferMatrix.eigenvalues();
        for (a, b) in ev.iter().zip([-1.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(scar_count(1).is_err());
        assert!(enumerate_frozen_states(13).is_err());
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        write_counts_csv(&mut buf, &[2, 3]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "L,count_up,count_empty,count_doublon,total\n2,2,2,2,6\n3,4,4,4,12\n");
    }
}
