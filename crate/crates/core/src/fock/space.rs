use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::pairing::Sheet;
use crate::{Error, Result};

/// Largest truncated space we are willing to enumerate.
pub const MAX_DIMENSION: usize = 2_000_000;

/// Positive-frequency (`a`) or negative-frequency (`b`) quanta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    A,
    B,
}

impl Sector {
    pub fn sheet(self) -> Sheet {
        match self {
            Sector::A => Sheet::Positive,
            Sector::B => Sheet::Negative,
        }
    }
}

/// Occupation-number basis with total excitation at most `cutoff`.
///
/// Modes `0..a_modes` belong to the `a` sector and the rest to `b`. Basis
/// states are listed in lexicographic order of their occupation tuples, so the
/// vacuum is state 0.
#[derive(Debug, Clone)]
pub struct FockSpace {
    a_modes: usize,
    b_modes: usize,
    cutoff: usize,
    states: Vec<Vec<u16>>,
    index: HashMap<Vec<u16>, usize>,
}

/// `C(n, k)` in floating point.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl FockSpace {
    pub fn new(a_modes: usize, b_modes: usize, cutoff: usize) -> Result<Self> {
        let modes = a_modes + b_modes;
        if modes == 0 {
            return Err(Error::InvalidParameter("Fock space needs at least one mode".into()));
        }
        if cutoff > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!("excitation cutoff {cutoff} too large")));
        }
        let dim = binomial(cutoff + modes, modes);
        if dim > MAX_DIMENSION as f64 {
            return Err(Error::InvalidParameter(format!(
                "truncated space of dimension {dim:.0} exceeds the limit {MAX_DIMENSION}"
            )));
        }
        let mut states = Vec::with_capacity(dim as usize);
        let mut current = vec![0u16; modes];
        enumerate(&mut current, 0, cutoff, &mut states);
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(FockSpace { a_modes, b_modes, cutoff, states, index })
    }

    pub fn a_modes(&self) -> usize {
        self.a_modes
    }

    pub fn b_modes(&self) -> usize {
        self.b_modes
    }

    pub fn modes(&self) -> usize {
        self.a_modes + self.b_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &[u16] {
        &self.states[i]
    }

    pub fn index_of(&self, occupation: &[u16]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    /// Total excitation of basis state `i`.
    pub fn level(&self, i: usize) -> usize {
        self.states[i].iter().map(|&n| n as usize).sum()
    }

    pub fn sector_level(&self, i: usize, sector: Sector) -> usize {
        let s = &self.states[i];
        let part = match sector {
            Sector::A => &s[..self.a_modes],
            Sector::B => &s[self.a_modes..],
        };
        part.iter().map(|&n| n as usize).sum()
    }

    pub fn sector_modes(&self, sector: Sector) -> usize {
        match sector {
            Sector::A => self.a_modes,
            Sector::B => self.b_modes,
        }
    }

    /// Global mode index of sector mode `alpha`.
    pub fn mode_index(&self, sector: Sector, alpha: usize) -> usize {
        match sector {
            Sector::A => alpha,
            Sector::B => self.a_modes + alpha,
        }
    }
}

fn enumerate(current: &mut Vec<u16>, pos: usize, remaining: usize, out: &mut Vec<Vec<u16>>) {
    if pos == current.len() {
        out.push(current.clone());
        return;
    }
    for n in 0..=remaining {
        current[pos] = n as u16;
        enumerate(current, pos + 1, remaining - n, out);
    }
    current[pos] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_matches_binomial() {
        for (a, b, n) in [(1, 0, 5), (1, 1, 4), (2, 2, 12), (3, 1, 6)] {
            let s = FockSpace::new(a, b, n).unwrap();
            assert_eq!(s.dim() as f64, binomial(n + a + b, a + b));
        }
    }

    #[test]
    fn enumeration_is_lexicographic_and_indexed() {
        let s = FockSpace::new(2, 1, 3).unwrap();
        assert_eq!(s.state(0), &[0, 0, 0]);
        for i in 1..s.dim() {
            assert!(s.state(i - 1) < s.state(i));
            assert!(s.level(i) <= 3);
        }
        for i in 0..s.dim() {
            assert_eq!(s.index_of(s.state(i)), Some(i));
        }
        let i = s.index_of(&[1, 0, 2]).unwrap();
        assert_eq!(s.sector_level(i, Sector::A), 1);
        assert_eq!(s.sector_level(i, Sector::B), 2);
        assert_eq!(s.mode_index(Sector::B, 0), 2);
    }

    #[test]
    fn rejects_empty_mode_set() {
        assert!(FockSpace::new(0, 0, 3).is_err());
    }
}
