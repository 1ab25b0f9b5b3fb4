use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// The finite ground set `U`. Items are named; all algorithms work on the
/// positional index, and iteration order is the construction order.
#[derive(Clone, PartialEq, Eq)]
pub struct GroundSet {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl GroundSet {
    pub fn new<I, S>(items: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let items: Vec<String> = items.into_iter().map(Into::into).collect();
        if items.is_empty() {
            return Err(Error::param("ground set must be nonempty"));
        }
        let mut index = HashMap::with_capacity(items.len());
        for (i, name) in items.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::param(format!("duplicate item identifier `{name}`")));
            }
        }
        Ok(Self { items, index })
    }

    /// A ground set of `n` generated names: `a`, `b`, ... for `n <= 26`,
    /// zero-padded `e000`, `e001`, ... otherwise (so string order agrees with
    /// index order in both cases).
    pub fn with_size(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("ground set must be nonempty"));
        }
        let names: Vec<String> = if n <= 26 {
            (0..n).map(|i| char::from(b'a' + i as u8).to_string()).collect()
        } else {
            let width = (n - 1).to_string().len();
            (0..n).map(|i| format!("e{i:0width$}")).collect()
        };
        Self::new(names)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn name(&self, index: usize) -> &str {
        &self.items[index]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownItem(name.to_string()))
    }

    /// Resolve item names to an [`ItemSet`].
    pub fn resolve<I, S>(&self, names: I) -> Result<ItemSet>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let idx = names
            .into_iter()
            .map(|s| self.index_of(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(ItemSet::from_indices(idx))
    }

    pub fn names(&self, set: &ItemSet) -> Vec<String> {
        set.iter().map(|i| self.items[i].clone()).collect()
    }
}

impl fmt::Debug for GroundSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("GroundSet").field(&self.items).finish()
    }
}

/// A subset of the ground set, stored as sorted distinct indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemSet(Vec<usize>);

impl ItemSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn from_mask(mask: u64) -> Self {
        Self((0..64).filter(|&i| mask >> i & 1 == 1).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, item: usize) -> bool {
        self.0.binary_search(&item).is_ok()
    }

    pub fn insert(&mut self, item: usize) {
        if let Err(pos) = self.0.binary_search(&item) {
            self.0.insert(pos, item);
        }
    }

    pub fn with(&self, item: usize) -> Self {
        let mut out = self.clone();
        out.insert(item);
        out
    }

    /// Bitmask representation; only valid for indices below 64.
    pub fn mask(&self) -> u64 {
        self.0.iter().fold(0u64, |m, &i| m | 1 << i)
    }

    pub(crate) fn max_index(&self) -> Option<usize> {
        self.0.last().copied()
    }
}

impl FromIterator<usize> for ItemSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Self::from_indices(iter)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_duplicates() {
        assert!(GroundSet::new(Vec::<String>::new()).is_err());
        assert!(GroundSet::new(["a", "b", "a"]).is_err());
    }

    #[test]
    fn generated_names_sort_like_indices() {
        let g = GroundSet::with_size(30).unwrap();
        let mut sorted = g.items().to_vec();
        sorted.sort();
        assert_eq!(sorted, g.items());
        assert_eq!(GroundSet::with_size(3).unwrap().items(), ["a", "b", "c"]);
    }

    #[test]
    fn resolve_and_unknown_item() {
        let g = GroundSet::with_size(3).unwrap();
        let s = g.resolve(["c", "a", "c"]).unwrap();
        assert_eq!(s.as_slice(), &[0, 2]);
        assert!(matches!(g.resolve(["z"]), Err(Error::UnknownItem(_))));
    }

    #[test]
    fn item_set_ops() {
        let mut s = ItemSet::from_indices([3, 1, 1]);
        assert_eq!(s.as_slice(), &[1, 3]);
        s.insert(2);
        s.insert(2);
        assert_eq!(s.as_slice(), &[1, 2, 3]);
        assert_eq!(s.mask(), 0b1110);
        assert_eq!(ItemSet::from_mask(0b101).as_slice(), &[0, 2]);
        assert!(s.contains(3) && !s.contains(0));
    }
}
