use crate::error::{Error, Result};

use super::ground::{GroundSet, ItemSet};

/// A set function over `{0, .., n-1}`, evaluated on sorted distinct indices.
///
/// This is what the exhaustive checkers consume; the learning algorithms use
/// [`SubmodularOracle`] directly.
pub trait SetFunction {
    fn ground_size(&self) -> usize;

    /// Value on a set of sorted, distinct, in-range indices.
    fn value(&self, items: &[usize]) -> f64;
}

/// The closed-form families.
#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `f(S) = 1 - prod_{a in S}(1 - p_a)`.
    Coverage { p: Vec<f64> },
    /// `f(S) = min(cap, sum_{a in S} w_a)`.
    CappedModular { w: Vec<f64>, cap: f64 },
}

/// One round's monotone submodular function `f_t : 2^U -> [0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SubmodularOracle {
    family: Family,
}

impl SubmodularOracle {
    pub fn coverage(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::param("coverage needs at least one item"));
        }
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(format!(
                "coverage probability for item {i} is {v}, outside [0, 1]"
            )));
        }
        Ok(Self {
            family: Family::Coverage { p },
        })
    }

    pub fn capped_modular(w: Vec<f64>, cap: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::param("capped modular needs at least one item"));
        }
        if !(cap > 0.0 && cap <= 1.0) {
            return Err(Error::param(format!("cap {cap} outside (0, 1]")));
        }
        if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::param(format!("weight for item {i} is {v}, must be >= 0")));
        }
        Ok(Self {
            family: Family::CappedModular { w, cap },
        })
    }

    /// Coverage oracle from named probabilities; items not mentioned get 0.
    pub fn coverage_named<'a, I>(ground: &GroundSet, p: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut dense = vec![0.0; ground.len()];
        for (name, v) in p {
            dense[ground.index_of(name)?] = v;
        }
        Self::coverage(dense)
    }

    pub fn capped_modular_named<'a, I>(ground: &GroundSet, w: I, cap: f64) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, f64)>,
    {
        let mut dense = vec![0.0; ground.len()];
        for (name, v) in w {
            dense[ground.index_of(name)?] = v;
        }
        Self::capped_modular(dense, cap)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn len(&self) -> usize {
        match &self.family {
            Family::Coverage { p } => p.len(),
            Family::CappedModular { w, .. } => w.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_range(&self, set: &ItemSet) -> Result<()> {
        match set.max_index() {
            Some(m) if m >= self.len() => Err(Error::UnknownItem(format!("#{m}"))),
            _ => Ok(()),
        }
    }

    /// `f(S)`.
    pub fn eval(&self, set: &ItemSet) -> Result<f64> {
        self.check_range(set)?;
        Ok(self.value(set.as_slice()))
    }

    /// `f(S)` for a set given by item names.
    pub fn eval_named<I, S>(&self, ground: &GroundSet, names: I) -> Result<f64>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if ground.len() != self.len() {
            return Err(Error::Dimension {
                expected: ground.len(),
                got: self.len(),
            });
        }
        self.eval(&ground.resolve(names)?)
    }

    /// Marginal gains `f(P + a) - f(P)` for every item `a`; zero for `a` in
    /// the prefix.
    pub fn marginal_vector(&self, prefix: &ItemSet) -> Result<Vec<f64>> {
        self.check_range(prefix)?;
        let mut out = vec![0.0; self.len()];
        self.marginals_into(prefix.as_slice(), &mut out);
        Ok(out)
    }

    /// Closed-form marginals, written into `out` (length n). `prefix` must be
    /// sorted, distinct and in range.
    pub(crate) fn marginals_into(&self, prefix: &[usize], out: &mut [f64]) {
        match &self.family {
            Family::Coverage { p } => {
                let miss: f64 = prefix.iter().map(|&a| 1.0 - p[a]).product();
                for (a, o) in out.iter_mut().enumerate() {
                    *o = miss * p[a];
                }
            }
            Family::CappedModular { w, cap } => {
                let s: f64 = prefix.iter().map(|&a| w[a]).sum();
                let base = s.min(*cap);
                for (a, o) in out.iter_mut().enumerate() {
                    *o = ((s + w[a]).min(*cap) - base).max(0.0);
                }
            }
        }
        for &a in prefix {
            out[a] = 0.0;
        }
    }
}

impl SetFunction for SubmodularOracle {
    fn ground_size(&self) -> usize {
        self.len()
    }

    fn value(&self, items: &[usize]) -> f64 {
        match &self.family {
            Family::Coverage { p } => 1.0 - items.iter().map(|&a| 1.0 - p[a]).product::<f64>(),
            Family::CappedModular { w, cap } => items.iter().map(|&a| w[a]).sum::<f64>().min(*cap),
        }
    }
}

/// A set function given by an explicit table of `2^n` values indexed by
/// bitmask. Only used to build counterexamples for the checkers.
#[derive(Clone, Debug, PartialEq)]
pub struct TableFunction {
    n: usize,
    values: Vec<f64>,
}

impl TableFunction {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if n > 20 {
            return Err(Error::Size(format!("table function over {n} items")));
        }
        if values.len() != 1 << n {
            return Err(Error::Dimension {
                expected: 1 << n,
                got: values.len(),
            });
        }
        Ok(Self { n, values })
    }

    /// Table that is zero everywhere except the listed `(mask, value)` entries.
    pub fn sparse(n: usize, entries: &[(u64, f64)]) -> Result<Self> {
        let mut values = vec![0.0; 1 << n];
        for &(mask, v) in entries {
            let slot = values
                .get_mut(mask as usize)
                .ok_or_else(|| Error::param(format!("mask {mask:#b} outside 2^{n}")))?;
            *slot = v;
        }
        Self::new(n, values)
    }
}

impl SetFunction for TableFunction {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn value(&self, items: &[usize]) -> f64 {
        let mask = items.iter().fold(0usize, |m, &i| m | 1 << i);
        self.values[mask]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ground3() -> GroundSet {
        GroundSet::with_size(3).unwrap()
    }

    #[test]
    fn coverage_values() {
        let g = GroundSet::with_size(2).unwrap();
        let f = SubmodularOracle::coverage_named(&g, [("a", 0.5), ("b", 0.5)]).unwrap();
        assert_eq!(f.eval_named(&g, ["a", "b"]).unwrap(), 0.75);
        assert_eq!(f.eval(&ItemSet::empty()).unwrap(), 0.0);

        let g = ground3();
        let f = SubmodularOracle::coverage_named(&g, [("a", 0.9), ("b", 0.1), ("c", 0.5)]).unwrap();
        assert!((f.eval_named(&g, ["a", "c"]).unwrap() - 0.95).abs() < 1e-15);
    }

    #[test]
    fn empty_set_is_zero_for_both_families() {
        let f = SubmodularOracle::capped_modular(vec![0.3, 0.9, 0.2], 0.7).unwrap();
        assert_eq!(f.eval(&ItemSet::empty()).unwrap(), 0.0);
    }

    #[test]
    fn unknown_item_is_rejected() {
        let g = ground3();
        let f = SubmodularOracle::coverage(vec![0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(f.eval_named(&g, ["q"]), Err(Error::UnknownItem(_))));
        assert!(f.eval(&ItemSet::from_indices([5])).is_err());
        assert!(SubmodularOracle::coverage_named(&g, [("zz", 0.5)]).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(SubmodularOracle::coverage(vec![0.5, 1.5]).is_err());
        assert!(SubmodularOracle::capped_modular(vec![0.5], 0.0).is_err());
        assert!(SubmodularOracle::capped_modular(vec![0.5], 1.2).is_err());
        assert!(SubmodularOracle::capped_modular(vec![-0.1], 1.0).is_err());
    }

    #[test]
    fn marginal_vector_examples() {
        let f = SubmodularOracle::coverage(vec![0.5, 0.5]).unwrap();
        assert_eq!(f.marginal_vector(&ItemSet::empty()).unwrap(), vec![0.5, 0.5]);
        let m = f.marginal_vector(&ItemSet::from_indices([0])).unwrap();
        assert_eq!(m, vec![0.0, 0.25]);

        let f = SubmodularOracle::capped_modular(vec![0.6, 0.6], 1.0).unwrap();
        let m = f.marginal_vector(&ItemSet::from_indices([0])).unwrap();
        assert_eq!(m[0], 0.0);
        assert!((m[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn table_function_lookup() {
        let t = TableFunction::sparse(2, &[(0b01, 0.2), (0b10, 0.2), (0b11, 1.0)]).unwrap();
        assert_eq!(t.value(&[]), 0.0);
        assert_eq!(t.value(&[0, 1]), 1.0);
        assert!(TableFunction::new(2, vec![0.0; 3]).is_err());
    }
}
