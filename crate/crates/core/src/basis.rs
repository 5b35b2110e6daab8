//! Fixed-particle-number bases of hardcore-boson occupation states.
//!
//! Sites are labelled rung-major: site `(j, p)` with rung `j` in `1..=L` and
//! leg `p` in `{1, 2}` has flat index `k = 2(j-1) + (p-1)`, so the two ends
//! of a rung are adjacent bits. States within a sector are stored in
//! increasing order of their occupation word and ranked with the
//! combinatorial number system.

use crate::error::{Error, Result};

/// Largest rung count a sector basis can address (one bit per site in a `u64`).
pub const MAX_RUNGS: usize = 31;

/// A lattice site `(rung, leg)`, both 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SiteIndex {
    rung: usize,
    leg: usize,
}

impl SiteIndex {
    pub fn new(rung: usize, leg: usize) -> Result<Self> {
        if rung == 0 {
            return Err(Error::invalid("rung index is 1-based"));
        }
        if leg != 1 && leg != 2 {
            return Err(Error::invalid(format!("leg must be 1 or 2, got {leg}")));
        }
        Ok(Self { rung, leg })
    }

    pub fn from_flat(k: usize) -> Self {
        Self { rung: k / 2 + 1, leg: k % 2 + 1 }
    }

    #[inline]
    pub fn rung(self) -> usize {
        self.rung
    }

    #[inline]
    pub fn leg(self) -> usize {
        self.leg
    }

    #[inline]
    pub fn flat(self) -> usize {
        2 * (self.rung - 1) + (self.leg - 1)
    }
}

/// Occupation word: bit `k` is set iff flat site `k` holds a boson.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationState(pub u64);

impl OccupationState {
    #[inline]
    pub fn bits(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn occupied(self, site: usize) -> bool {
        (self.0 >> site) & 1 == 1
    }

    #[inline]
    pub fn particles(self) -> usize {
        self.0.count_ones() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Create,
    Annihilate,
}

/// Moves a boson from `from` to `to`. `None` when the source is empty or the
/// target is occupied. Bosons carry no exchange sign.
#[inline]
pub fn hop(state: OccupationState, from: usize, to: usize) -> Option<OccupationState> {
    debug_assert_ne!(from, to);
    if state.occupied(from) && !state.occupied(to) {
        Some(OccupationState(state.0 ^ (1 << from) ^ (1 << to)))
    } else {
        None
    }
}

/// Applies `a†` or `a` on `site`; `None` when the hardcore constraint or an
/// empty site forbids it.
#[inline]
pub fn raise_lower(
    state: OccupationState,
    site: usize,
    direction: Direction,
) -> Option<OccupationState> {
    match (direction, state.occupied(site)) {
        (Direction::Create, false) | (Direction::Annihilate, true) => {
            Some(OccupationState(state.0 ^ (1 << site)))
        }
        _ => None,
    }
}

/// Pascal's triangle up to `n` choose `n`, stored row-major.
#[derive(Clone, Debug)]
struct BinomialTable {
    n: usize,
    table: Vec<u64>,
}

impl BinomialTable {
    fn new(n: usize) -> Self {
        let w = n + 1;
        let mut table = vec![0u64; w * w];
        for i in 0..=n {
            table[i * w] = 1;
            for k in 1..=i {
                table[i * w + k] = table[(i - 1) * w + k - 1] + table[(i - 1) * w + k];
            }
        }
        Self { n, table }
    }

    #[inline]
    fn get(&self, n: usize, k: usize) -> u64 {
        if k > n || n > self.n {
            0
        } else {
            self.table[n * (self.n + 1) + k]
        }
    }
}

/// `n` choose `k` as `u64`; exact for the sizes used here.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u64 / (i + 1) as u64;
    }
    acc
}

/// All occupation states of `2L` sites holding exactly `N` bosons.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    rungs: usize,
    particles: usize,
    states: Vec<OccupationState>,
    binom: BinomialTable,
}

impl SectorBasis {
    pub fn enumerate(rungs: usize, particles: usize) -> Result<Self> {
        if rungs == 0 {
            return Err(Error::invalid("a ladder needs at least one rung"));
        }
        if rungs > MAX_RUNGS {
            return Err(Error::capacity(format!(
                "sector bases support at most {MAX_RUNGS} rungs, got {rungs}"
            )));
        }
        let sites = 2 * rungs;
        if particles > sites {
            return Err(Error::invalid(format!(
                "{particles} particles do not fit on {sites} sites"
            )));
        }
        let dim = binomial(sites, particles) as usize;
        let mut states = Vec::with_capacity(dim);
        if particles == 0 {
            states.push(OccupationState(0));
        } else {
            // Gosper's hack walks same-weight words in increasing order.
            let mut word: u64 = (1u64 << particles) - 1;
            let limit: u64 = 1u64 << sites;
            while word < limit {
                states.push(OccupationState(word));
                let c = word & word.wrapping_neg();
                let r = word + c;
                word = (((r ^ word) >> 2) / c) | r;
            }
        }
        debug_assert_eq!(states.len(), dim);
        Ok(Self { rungs, particles, states, binom: BinomialTable::new(sites) })
    }

    #[inline]
    pub fn rungs(&self) -> usize {
        self.rungs
    }

    #[inline]
    pub fn sites(&self) -> usize {
        2 * self.rungs
    }

    #[inline]
    pub fn particles(&self) -> usize {
        self.particles
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    #[inline]
    pub fn states(&self) -> &[OccupationState] {
        &self.states
    }

    #[inline]
    pub fn unrank(&self, index: usize) -> OccupationState {
        self.states[index]
    }

    /// Position of `state` in the sector, `None` if it belongs elsewhere.
    pub fn rank(&self, state: OccupationState) -> Option<usize> {
        if state.particles() != self.particles || state.0 >> self.sites() != 0 {
            return None;
        }
        let mut bits = state.0;
        let mut idx = 0u64;
        let mut i = 1;
        while bits != 0 {
            let pos = bits.trailing_zeros() as usize;
            idx += self.binom.get(pos, i);
            bits &= bits - 1;
            i += 1;
        }
        Some(idx as usize)
    }

    /// Recomputes the `index`-th state from the combinatorial number system
    /// without consulting the stored list.
    pub fn unrank_combinatorial(&self, index: usize) -> Option<OccupationState> {
        if index >= self.dim() {
            return None;
        }
        let mut rest = index as u64;
        let mut word = 0u64;
        let mut upper = self.sites();
        for i in (1..=self.particles).rev() {
            let mut c = upper - 1;
            while self.binom.get(c, i) > rest {
                c -= 1;
            }
            rest -= self.binom.get(c, i);
            word |= 1 << c;
            upper = c;
        }
        Some(OccupationState(word))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sectors() {
        let b = SectorBasis::enumerate(1, 1).unwrap();
        assert_eq!(b.states(), &[OccupationState(0b01), OccupationState(0b10)]);
        assert_eq!(SectorBasis::enumerate(7, 7).unwrap().dim(), 3432);
        assert_eq!(SectorBasis::enumerate(10, 2).unwrap().dim(), 190);
        assert_eq!(SectorBasis::enumerate(3, 0).unwrap().dim(), 1);
        assert_eq!(SectorBasis::enumerate(3, 6).unwrap().states(), &[OccupationState(0b111111)]);
    }

    #[test]
    fn bad_arguments() {
        assert!(matches!(SectorBasis::enumerate(0, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(SectorBasis::enumerate(2, 5), Err(Error::InvalidArgument(_))));
        assert!(SiteIndex::new(0, 1).is_err());
        assert!(SiteIndex::new(1, 3).is_err());
    }

    #[test]
    fn site_labels() {
        let s = SiteIndex::new(3, 2).unwrap();
        assert_eq!(s.flat(), 5);
        assert_eq!(SiteIndex::from_flat(5), s);
        assert_eq!(SiteIndex::from_flat(0), SiteIndex::new(1, 1).unwrap());
    }

    #[test]
    fn hopping_rules() {
        assert_eq!(hop(OccupationState(0b01), 0, 1), Some(OccupationState(0b10)));
        assert_eq!(hop(OccupationState(0b11), 0, 1), None);
        assert_eq!(hop(OccupationState(0b00), 0, 1), None);
    }

    #[test]
    fn creation_annihilation() {
        use Direction::*;
        assert_eq!(raise_lower(OccupationState(1), 0, Annihilate), Some(OccupationState(0)));
        assert_eq!(raise_lower(OccupationState(1), 0, Create), None);
        assert_eq!(raise_lower(OccupationState(0), 0, Create), Some(OccupationState(1)));
        assert_eq!(raise_lower(OccupationState(0), 0, Annihilate), None);
    }

    #[test]
    fn foreign_states_have_no_rank() {
        let b = SectorBasis::enumerate(2, 2).unwrap();
        assert_eq!(b.rank(OccupationState(0b111)), None);
        assert_eq!(b.rank(OccupationState(1 << 5 | 1)), None);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(14, 7), 3432);
        assert_eq!(binomial(28, 14), 40_116_600);
        assert_eq!(binomial(3, 5), 0);
    }
}
