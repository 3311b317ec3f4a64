//! Capture histories: the contingency table of inclusion patterns implied by
//! a coreference partition.
//!
//! Patterns are stored as integers with bit `k - 1` standing for list `k`.
//! In files they are written as `K`-character 0/1 strings with list 1 at the
//! left.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linkage::PartitionLabeling;

pub const MAX_LISTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContingencyTable {
    k: usize,
    /// `n_h` for observed patterns; zero counts are not stored and the
    /// all-zero pattern never appears.
    counts: BTreeMap<u32, u64>,
}

fn check_k(k: usize) -> Result<()> {
    if k < 1 || k > MAX_LISTS {
        return Err(Error::Invalid(format!("tables need 1 to {MAX_LISTS} lists, got {k}")));
    }
    Ok(())
}

pub fn pattern_string(h: u32, k: usize) -> String {
    (0..k).map(|b| if h >> b & 1 == 1 { '1' } else { '0' }).collect()
}

pub fn parse_pattern(s: &str, k: usize) -> Result<u32> {
    if s.len() != k {
        return Err(Error::Parse(format!("pattern `{s}` should have {k} characters")));
    }
    let mut h = 0;
    for (b, c) in s.chars().enumerate() {
        match c {
            '1' => h |= 1 << b,
            '0' => {}
            _ => return Err(Error::Parse(format!("pattern `{s}` is not a 0/1 string"))),
        }
    }
    Ok(h)
}

impl ContingencyTable {
    pub fn new(k: usize) -> Result<Self> {
        check_k(k)?;
        Ok(ContingencyTable {
            k,
            counts: BTreeMap::new(),
        })
    }

    pub fn from_counts(k: usize, counts: impl IntoIterator<Item = (u32, u64)>) -> Result<Self> {
        let mut t = Self::new(k)?;
        for (h, n) in counts {
            t.add(h, n)?;
        }
        Ok(t)
    }

    /// Dense counts indexed by pattern, `n_0` excluded (reads 0).
    pub fn from_dense(k: usize, dense: &[u64]) -> Result<Self> {
        Self::from_counts(k, dense.iter().enumerate().skip(1).map(|(h, &n)| (h as u32, n)))
    }

    pub fn add(&mut self, h: u32, n: u64) -> Result<()> {
        if h == 0 || h >> self.k != 0 {
            return Err(Error::Invalid(format!("pattern {h:#b} is not observable with {} lists", self.k)));
        }
        if n > 0 {
            *self.counts.entry(h).or_insert(0) += n;
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, h: u32) -> u64 {
        self.counts.get(&h).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&h, &n)| (h, n))
    }

    pub fn n_obs(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Counts for all `2^K` patterns with `n_0` set to zero.
    pub fn dense(&self) -> Vec<u64> {
        let mut d = vec![0; 1 << self.k];
        for (h, n) in self.iter() {
            d[h as usize] = n;
        }
        d
    }

    /// Restricts to the lists in `subset` (1-based, in the order given),
    /// summing over the others. Patterns that vanish on the subset are
    /// dropped.
    pub fn marginalize(&self, subset: &[usize]) -> Result<ContingencyTable> {
        if subset.is_empty() {
            return Err(Error::Invalid("empty list subset".into()));
        }
        let mut seen = 0u32;
        for &l in subset {
            if l < 1 || l > self.k || seen >> (l - 1) & 1 == 1 {
                return Err(Error::Invalid(format!(
                    "bad list subset {subset:?} for {} lists",
                    self.k
                )));
            }
            seen |= 1 << (l - 1);
        }
        let mut out = ContingencyTable::new(subset.len())?;
        for (h, n) in self.iter() {
            let g = subset
                .iter()
                .enumerate()
                .fold(0u32, |g, (b, &l)| g | (h >> (l - 1) & 1) << b);
            if g != 0 {
                out.add(g, n)?;
            }
        }
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_impl(path, None)
    }

    /// Writes every pattern, including the all-zero cell with count `n0`.
    pub fn write_complete_csv(&self, path: &Path, n0: u64) -> Result<()> {
        self.write_csv_impl(path, Some(n0))
    }

    fn write_csv_impl(&self, path: &Path, n0: Option<u64>) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["pattern", "count"]).map_err(|e| Error::csv(path, e))?;
        let start = if n0.is_some() { 0 } else { 1 };
        for h in start..(1u32 << self.k) {
            let n = if h == 0 { n0.unwrap_or(0) } else { self.get(h) };
            w.write_record([pattern_string(h, self.k), n.to_string()])
                .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a `pattern,count` file. An all-zero row, if present, is
    /// returned separately.
    pub fn read_csv(path: &Path) -> Result<(ContingencyTable, Option<u64>)> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
        for name in ["pattern", "count"] {
            if !headers.iter().any(|h| h == name) {
                return Err(Error::MissingColumn {
                    path: path.to_path_buf(),
                    name: name.into(),
                });
            }
        }
        let pi = headers.iter().position(|h| h == "pattern").unwrap();
        let ci = headers.iter().position(|h| h == "count").unwrap();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let count: u64 = rec[ci]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("{}: bad count `{}`", path.display(), &rec[ci])))?;
            rows.push((rec[pi].trim().to_string(), count));
        }
        let k = rows
            .first()
            .map(|r| r.0.len())
            .ok_or_else(|| Error::Parse(format!("{}: empty table", path.display())))?;
        let mut table = ContingencyTable::new(k)?;
        let mut n0 = None;
        for (p, n) in rows {
            let h = parse_pattern(&p, k)?;
            if h == 0 {
                n0 = Some(n);
            } else {
                table.add(h, n)?;
            }
        }
        Ok((table, n0))
    }
}

/// One inclusion pattern per cluster of `z`; `membership[i]` is the 0-based
/// list of record `i`.
pub fn capture_histories(
    z: &PartitionLabeling,
    membership: &[usize],
    k: usize,
) -> Result<ContingencyTable> {
    check_k(k)?;
    if membership.len() != z.num_records() {
        return Err(Error::Invalid(format!(
            "{} list memberships for {} records",
            membership.len(),
            z.num_records()
        )));
    }
    if let Some(&bad) = membership.iter().find(|&&l| l >= k) {
        return Err(Error::Invalid(format!("record in list {} but K = {k}", bad + 1)));
    }
    let mut bits: BTreeMap<usize, u32> = BTreeMap::new();
    for (i, &c) in z.labels().iter().enumerate() {
        *bits.entry(c).or_insert(0) |= 1 << membership[i];
    }
    let mut table = ContingencyTable::new(k)?;
    for h in bits.into_values() {
        table.add(h, 1)?;
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_list_example() {
        // records A1, A2 | B1 with A1 and B1 coreferent
        let z = PartitionLabeling::from_labels(&[1, 2, 1]);
        let t = capture_histories(&z, &[0, 0, 1], 2).unwrap();
        assert_eq!(t.get(0b11), 1);
        assert_eq!(t.get(0b01), 1);
        assert_eq!(t.get(0b10), 0);
        assert_eq!(t.n_obs(), 2);
    }

    #[test]
    fn singletons_are_one_hot() {
        let z = PartitionLabeling::singletons(5);
        let t = capture_histories(&z, &[0, 1, 2, 2, 0], 3).unwrap();
        assert_eq!(t.n_obs(), 5);
        assert!(t.iter().all(|(h, _)| h.count_ones() == 1));
    }

    #[test]
    fn marginal_sums() {
        let t = ContingencyTable::from_counts(3, [(0b011, 4), (0b111, 2), (0b100, 7), (0b001, 1)]).unwrap();
        let m = t.marginalize(&[1, 2]).unwrap();
        assert_eq!(m.get(0b11), 6);
        assert_eq!(m.get(0b01), 1);
        assert_eq!(m.n_obs(), 7);
        assert_eq!(t.marginalize(&[1, 2, 3]).unwrap(), t);
        assert!(t.marginalize(&[]).is_err());
        assert!(t.marginalize(&[1, 1]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let t = ContingencyTable::from_counts(3, [(0b011, 4), (0b100, 7)]).unwrap();
        t.write_csv(&p).unwrap();
        assert_eq!(ContingencyTable::read_csv(&p).unwrap(), (t.clone(), None));
        t.write_complete_csv(&p, 12).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("pattern,count\n000,12\n100,0\n010,0\n110,4\n"));
        assert_eq!(ContingencyTable::read_csv(&p).unwrap(), (t, Some(12)));
    }

    fn random_partition(r: usize, seeds: &[usize]) -> PartitionLabeling {
        PartitionLabeling::from_labels(&seeds[..r].iter().map(|s| s % r).collect::<Vec<_>>())
    }

    proptest! {
        #[test]
        fn histories_match_bit_or(seeds in proptest::collection::vec(0usize..30, 30),
                                  lists in proptest::collection::vec(0usize..3, 30)) {
            let z = random_partition(30, &seeds);
            let t = capture_histories(&z, &lists, 3).unwrap();
            let mut oracle = [0u64; 8];
            for c in z.clusters() {
                let h = c.iter().fold(0usize, |h, &i| h | 1 << lists[i]);
                oracle[h] += 1;
            }
            prop_assert_eq!(t.dense(), oracle.to_vec());
            prop_assert_eq!(t.n_obs() as usize, z.num_clusters());
        }

        #[test]
        fn marginalize_matches_brute_force(counts in proptest::collection::vec(0u64..20, 7),
                                          more in proptest::collection::vec(0u64..20, 7)) {
            let a = ContingencyTable::from_dense(3, &[&[0], &counts[..]].concat()).unwrap();
            let b = ContingencyTable::from_dense(3, &[&[0], &more[..]].concat()).unwrap();
            let m = a.marginalize(&[2, 3]).unwrap();
            let mut oracle = [0u64; 4];
            for h in 1..8usize {
                let g = (h >> 1) & 0b11;
                if g != 0 {
                    oracle[g] += a.get(h as u32);
                }
            }
            prop_assert_eq!(m.dense(), oracle.to_vec());

            let sum: Vec<u64> = a.dense().iter().zip(b.dense()).map(|(x, y)| x + y).collect();
            let s = ContingencyTable::from_dense(3, &sum).unwrap();
            let lhs = s.marginalize(&[2, 3]).unwrap().dense();
            let rhs: Vec<u64> = m.dense().iter().zip(b.marginalize(&[2, 3]).unwrap().dense()).map(|(x, y)| x + y).collect();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
