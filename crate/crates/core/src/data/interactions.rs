//! Implicit-feedback interaction matrix with split tags.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::num::RngStream;

/// Split tag of one interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// One observed (user, item) interaction.
#[derive(Debug, Clone, Copy)]
pub struct Entry {
    pub user: u32,
    pub item: u32,
    pub value: f64,
    pub split: Split,
}

/// Mapping between raw string ids and dense 0-based indices, in first
/// appearance order.
#[derive(Debug, Clone, Default)]
pub struct IndexMap {
    raw_to_dense: std::collections::HashMap<String, u32>,
    dense_to_raw: Vec<String>,
}

impl IndexMap {
    pub fn intern(&mut self, raw: &str) -> u32 {
        if let Some(&i) = self.raw_to_dense.get(raw) {
            return i;
        }
        let i = self.dense_to_raw.len() as u32;
        self.raw_to_dense.insert(raw.to_owned(), i);
        self.dense_to_raw.push(raw.to_owned());
        i
    }

    pub fn get(&self, raw: &str) -> Option<u32> {
        self.raw_to_dense.get(raw).copied()
    }

    pub fn raw(&self, dense: u32) -> &str {
        &self.dense_to_raw[dense as usize]
    }

    pub fn len(&self) -> usize {
        self.dense_to_raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dense_to_raw.is_empty()
    }

    /// TSV dump: `raw_id<TAB>dense_index`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (i, raw) in self.dense_to_raw.iter().enumerate() {
            writeln!(out, "{raw}\t{i}").expect("string write");
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut map = IndexMap::default();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let raw = parts.next().unwrap_or_default();
            let idx: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: "expected raw_id<TAB>dense_index".into(),
                })?;
            if idx != map.dense_to_raw.len() {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("dense index {idx} out of order"),
                });
            }
            map.intern(raw);
        }
        Ok(map)
    }
}

/// Sparse user-item matrix of binarized implicit feedback.
#[derive(Debug, Clone)]
pub struct Interactions {
    n_users: usize,
    n_items: usize,
    entries: Vec<Entry>,
    /// entry indices per user
    per_user: Vec<Vec<usize>>,
    /// all interacted items per user, any split (membership checks)
    interacted: Vec<HashSet<u32>>,
    /// train-positive items per user; filled by the split
    train_items: Vec<HashSet<u32>>,
    eval_excluded: Vec<bool>,
    split_done: bool,
}

/// Loader outcome: the matrix plus id maps and dedup statistics.
#[derive(Debug, Clone)]
pub struct LoadedInteractions {
    pub data: Interactions,
    pub user_ids: IndexMap,
    pub item_ids: IndexMap,
    pub duplicate_count: usize,
}

impl Interactions {
    /// Builds from dense-indexed pairs; values are binarized to 1.
    /// Duplicate (user, item) pairs keep the first occurrence.
    pub fn from_pairs(n_users: usize, n_items: usize, pairs: &[(u32, u32)]) -> (Self, usize) {
        let mut seen = HashSet::new();
        let mut entries = Vec::with_capacity(pairs.len());
        let mut duplicates = 0;
        for &(u, i) in pairs {
            assert!((u as usize) < n_users && (i as usize) < n_items, "index out of range");
            if seen.insert((u, i)) {
                entries.push(Entry {
                    user: u,
                    item: i,
                    value: 1.0,
                    split: Split::Train,
                });
            } else {
                duplicates += 1;
            }
        }
        let mut per_user = vec![Vec::new(); n_users];
        let mut interacted = vec![HashSet::new(); n_users];
        for (k, e) in entries.iter().enumerate() {
            per_user[e.user as usize].push(k);
            interacted[e.user as usize].insert(e.item);
        }
        (
            Self {
                n_users,
                n_items,
                entries,
                per_user,
                interacted,
                train_items: vec![HashSet::new(); n_users],
                eval_excluded: vec![true; n_users],
                split_done: false,
            },
            duplicates,
        )
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_entries(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn user_entries(&self, user: u32) -> impl Iterator<Item = &Entry> {
        self.per_user[user as usize].iter().map(|&k| &self.entries[k])
    }

    pub fn has_interacted(&self, user: u32, item: u32) -> bool {
        self.interacted[user as usize].contains(&item)
    }

    pub fn interacted_count(&self, user: u32) -> usize {
        self.interacted[user as usize].len()
    }

    pub fn is_train_positive(&self, user: u32, item: u32) -> bool {
        self.train_items[user as usize].contains(&item)
    }

    pub fn train_positive_count(&self, user: u32) -> usize {
        self.train_items[user as usize].len()
    }

    /// True once a leave-one-out split has been applied.
    pub fn is_split(&self) -> bool {
        self.split_done
    }

    /// Users excluded from evaluation (fewer than 3 interactions).
    pub fn is_eval_excluded(&self, user: u32) -> bool {
        self.eval_excluded[user as usize]
    }

    pub fn eval_user_count(&self) -> usize {
        self.eval_excluded.iter().filter(|&&x| !x).count()
    }

    /// Indices of train entries, in storage order.
    pub fn train_entry_indices(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.split == Split::Train)
            .map(|(k, _)| k)
            .collect()
    }

    /// The single held-out entry of a user for the given split, if any.
    pub fn held_out(&self, user: u32, split: Split) -> Option<u32> {
        self.user_entries(user)
            .find(|e| e.split == split)
            .map(|e| e.item)
    }

    /// Tags one test and one validation interaction per user, chosen
    /// uniformly. Users with fewer than 3 interactions keep everything in
    /// train and are flagged eval-excluded.
    pub fn split_leave_one_out(&mut self, rng: &mut RngStream) -> Result<()> {
        if self.split_done {
            return Err(Error::Config("interactions already split".into()));
        }
        for u in 0..self.n_users {
            let idxs = &self.per_user[u];
            if idxs.len() < 3 {
                self.eval_excluded[u] = true;
                continue;
            }
            self.eval_excluded[u] = false;
            let test_pos = rng.index(idxs.len());
            let mut val_pos = rng.index(idxs.len() - 1);
            if val_pos >= test_pos {
                val_pos += 1;
            }
            self.entries[idxs[test_pos]].split = Split::Test;
            self.entries[idxs[val_pos]].split = Split::Validation;
        }
        for u in 0..self.n_users {
            let items: HashSet<u32> = self
                .user_entries(u as u32)
                .filter(|e| e.split == Split::Train)
                .map(|e| e.item)
                .collect();
            self.train_items[u] = items;
        }
        self.split_done = true;
        Ok(())
    }

    /// Parses the interactions TSV contract:
    /// `user_id<TAB>item_id[<TAB>rating]`, `#`-prefixed lines ignored.
    /// All observed values are binarized to 1.
    pub fn load(path: &Path) -> Result<LoadedInteractions> {
        let text = fs::read_to_string(path)?;
        let mut users = IndexMap::default();
        let mut items = IndexMap::default();
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 || fields[0].is_empty() || fields[1].is_empty()
            {
                return Err(Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: "expected user_id<TAB>item_id[<TAB>rating]".into(),
                });
            }
            if let Some(r) = fields.get(2) {
                r.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    msg: format!("rating '{r}' is not a number"),
                })?;
            }
            let u = users.intern(fields[0]);
            let i = items.intern(fields[1]);
            pairs.push((u, i));
        }
        let (data, duplicate_count) = Interactions::from_pairs(users.len(), items.len(), &pairs);
        Ok(LoadedInteractions {
            data,
            user_ids: users,
            item_ids: items,
            duplicate_count,
        })
    }

    /// Writes the same TSV contract back out (raw ids taken from the maps).
    pub fn save(&self, path: &Path, user_ids: &IndexMap, item_ids: &IndexMap) -> Result<()> {
        let mut out = String::new();
        for e in &self.entries {
            writeln!(out, "{}\t{}", user_ids.raw(e.user), item_ids.raw(e.item))
                .expect("string write");
        }
        fs::write(path, out)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_line_file() {
        let f = write_tmp("a\tx\na\ty\nb\tx\n");
        let loaded = Interactions::load(f.path()).unwrap();
        assert_eq!(loaded.data.n_users(), 2);
        assert_eq!(loaded.data.n_items(), 2);
        assert_eq!(loaded.data.n_entries(), 3);
        assert!(loaded.data.entries().iter().all(|e| e.value == 1.0));
        assert_eq!(loaded.duplicate_count, 0);
    }

    #[test]
    fn ratings_are_binarized() {
        let f = write_tmp("a\tx\t5\na\ty\t1\nb\tx\t3\n");
        let loaded = Interactions::load(f.path()).unwrap();
        assert!(loaded.data.entries().iter().all(|e| e.value == 1.0));
    }

    #[test]
    fn comments_and_duplicates() {
        let f = write_tmp("# header\na\tx\na\tx\nb\ty\n");
        let loaded = Interactions::load(f.path()).unwrap();
        assert_eq!(loaded.data.n_entries(), 2);
        assert_eq!(loaded.duplicate_count, 1);
    }

    #[test]
    fn malformed_line_reports_number() {
        let f = write_tmp("a\tx\nbroken\n");
        match Interactions::load(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let f2 = write_tmp("a\tx\tnotanumber\n");
        assert!(Interactions::load(f2.path()).is_err());
    }

    #[test]
    fn loading_twice_is_identical() {
        let f = write_tmp("a\tx\t4\nb\ty\t2\nc\tx\n");
        let a = Interactions::load(f.path()).unwrap();
        let b = Interactions::load(f.path()).unwrap();
        assert_eq!(a.data.n_entries(), b.data.n_entries());
        for (x, y) in a.data.entries().iter().zip(b.data.entries()) {
            assert_eq!((x.user, x.item, x.value.to_bits()), (y.user, y.item, y.value.to_bits()));
        }
    }

    #[test]
    fn split_counts_per_user() {
        let pairs: Vec<(u32, u32)> = (0..5).map(|i| (0, i)).collect();
        let (mut data, _) = Interactions::from_pairs(1, 5, &pairs);
        data.split_leave_one_out(&mut RngStream::new(3)).unwrap();
        let train = data.user_entries(0).filter(|e| e.split == Split::Train).count();
        let val = data
            .user_entries(0)
            .filter(|e| e.split == Split::Validation)
            .count();
        let test = data.user_entries(0).filter(|e| e.split == Split::Test).count();
        assert_eq!((train, val, test), (3, 1, 1));
        assert!(!data.is_eval_excluded(0));
    }

    #[test]
    fn degenerate_user_is_excluded() {
        let (mut data, _) = Interactions::from_pairs(1, 5, &[(0, 1), (0, 2)]);
        data.split_leave_one_out(&mut RngStream::new(3)).unwrap();
        assert!(data.is_eval_excluded(0));
        assert!(data
            .user_entries(0)
            .all(|e| e.split == Split::Train));
    }

    #[test]
    fn split_is_deterministic() {
        let pairs: Vec<(u32, u32)> = (0..4).flat_map(|u| (0..6).map(move |i| (u, i))).collect();
        let (mut a, _) = Interactions::from_pairs(4, 6, &pairs);
        let (mut b, _) = Interactions::from_pairs(4, 6, &pairs);
        a.split_leave_one_out(&mut RngStream::new(9)).unwrap();
        b.split_leave_one_out(&mut RngStream::new(9)).unwrap();
        for (x, y) in a.entries().iter().zip(b.entries()) {
            assert_eq!(x.split, y.split);
        }
    }

    #[test]
    fn split_twice_is_an_error() {
        let (mut data, _) = Interactions::from_pairs(1, 5, &[(0, 1)]);
        data.split_leave_one_out(&mut RngStream::new(1)).unwrap();
        assert!(data.split_leave_one_out(&mut RngStream::new(1)).is_err());
    }

    #[test]
    fn split_is_a_partition() {
        let pairs: Vec<(u32, u32)> = (0..10)
            .flat_map(|u| (0..7).map(move |i| (u, (u + i) % 12)))
            .collect();
        let (mut data, _) = Interactions::from_pairs(10, 12, &pairs);
        let before = data.n_entries();
        data.split_leave_one_out(&mut RngStream::new(5)).unwrap();
        assert_eq!(data.n_entries(), before);
        for u in 0..10u32 {
            let vals = data
                .user_entries(u)
                .filter(|e| e.split == Split::Validation)
                .count();
            let tests = data.user_entries(u).filter(|e| e.split == Split::Test).count();
            assert_eq!((vals, tests), (1, 1));
        }
    }

    #[test]
    fn index_map_roundtrip() {
        let mut m = IndexMap::default();
        m.intern("alpha");
        m.intern("beta");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("map.tsv");
        m.save(&p).unwrap();
        let m2 = IndexMap::load(&p).unwrap();
        assert_eq!(m2.get("alpha"), Some(0));
        assert_eq!(m2.get("beta"), Some(1));
        assert_eq!(m2.len(), 2);
    }
}
