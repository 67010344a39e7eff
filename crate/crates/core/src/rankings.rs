//! Complete and incomplete rankings, their embedding on the unit sphere, and
//! compatibility classes of incomplete rankings.
//!
//! A [`Ranking`] stores ranks per item: `ranks[i]` is the rank given to item
//! `i`, with rank 1 the most preferred. Items are indexed from 0 in code.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `t` for which `t!`-sized enumeration is allowed.
pub const MAX_ENUMERATION_T: usize = 10;

pub(crate) fn check_enumerable(t: usize) -> Result<()> {
    if t > MAX_ENUMERATION_T {
        Err(Error::TooLarge { t, max: MAX_ENUMERATION_T })
    } else {
        Ok(())
    }
}

/// A complete ranking of `t >= 2` items.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Ranking {
    ranks: Vec<usize>,
}

impl Ranking {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        let t = ranks.len();
        if t < 2 {
            return Err(Error::InvalidRanking(format!("need at least 2 items, got {t}")));
        }
        let mut seen = vec![false; t];
        for &r in &ranks {
            if r == 0 || r > t {
                return Err(Error::InvalidRanking(format!("rank {r} outside 1..={t}")));
            }
            if std::mem::replace(&mut seen[r - 1], true) {
                return Err(Error::InvalidRanking(format!("rank {r} appears more than once")));
            }
        }
        Ok(Self { ranks })
    }

    /// The identity ranking `(1, 2, ..., t)`.
    pub fn identity(t: usize) -> Result<Self> {
        Self::new((1..=t).collect())
    }

    /// Builds a ranking from items listed from most to least preferred.
    pub fn from_order(order: &[usize]) -> Result<Self> {
        let t = order.len();
        let mut ranks = vec![0; t];
        for (pos, &item) in order.iter().enumerate() {
            if item >= t || ranks[item] != 0 {
                return Err(Error::InvalidRanking(format!("order is not a permutation of 0..{t}")));
            }
            ranks[item] = pos + 1;
        }
        Self::new(ranks)
    }

    /// Recovers the ranking whose standardized form is closest to `scores`
    /// (the item with the smallest score gets rank 1). Ties break by item index.
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        Self::from_order(&order)
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.ranks.len()
    }

    #[inline]
    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Items from most to least preferred.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.t()];
        for (item, &r) in self.ranks.iter().enumerate() {
            order[r - 1] = item;
        }
        order
    }

    pub fn standardize(&self) -> StandardizedRanking {
        standardize(self)
    }

    /// Drops the given items and re-ranks the rest, producing a subset ranking.
    pub fn drop_items(&self, missing: &[usize]) -> Result<IncompleteRanking> {
        let mut observed: Vec<Option<usize>> = self.ranks.iter().map(|&r| Some(r)).collect();
        for &item in missing {
            let slot = observed
                .get_mut(item)
                .ok_or_else(|| Error::InvalidRanking(format!("item {item} out of range")))?;
            *slot = None;
        }
        IncompleteRanking::new(IncompleteKind::Subset, observed)
    }

    /// Keeps only the `k` most preferred items, producing a top-k ranking.
    pub fn top_k(&self, k: usize) -> Result<IncompleteRanking> {
        let observed = self.ranks.iter().map(|&r| (r <= k).then_some(r)).collect();
        IncompleteRanking::new(IncompleteKind::TopK, observed)
    }
}

impl TryFrom<Vec<usize>> for Ranking {
    type Error = Error;

    fn try_from(ranks: Vec<usize>) -> Result<Self> {
        Self::new(ranks)
    }
}

impl From<Ranking> for Vec<usize> {
    fn from(r: Ranking) -> Self {
        r.ranks
    }
}

/// Centered, unit-norm embedding `y = (R - (t+1)/2) / √(t(t²-1)/12)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedRanking {
    y: Vec<f64>,
}

impl StandardizedRanking {
    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.y.len()
    }

    /// Inverts the embedding.
    pub fn to_ranking(&self) -> Ranking {
        Ranking::from_scores(&self.y).expect("standardized vectors come from valid rankings")
    }
}

impl AsRef<[f64]> for StandardizedRanking {
    fn as_ref(&self) -> &[f64] {
        &self.y
    }
}

#[inline]
pub(crate) fn standardization(t: usize) -> (f64, f64) {
    let tf = t as f64;
    (0.5 * (tf + 1.0), (tf * (tf * tf - 1.0) / 12.0).sqrt())
}

pub fn standardize(r: &Ranking) -> StandardizedRanking {
    let (center, scale) = standardization(r.t());
    StandardizedRanking {
        y: r.ranks.iter().map(|&x| (x as f64 - center) / scale).collect(),
    }
}

pub(crate) fn standardize_into(ranks: &[usize], out: &mut [f64]) {
    let (center, scale) = standardization(ranks.len());
    for (o, &r) in out.iter_mut().zip(ranks) {
        *o = (r as f64 - center) / scale;
    }
}

/// Calls `f` once for each of the `t!` rankings of `t` items (Heap's algorithm).
pub fn for_each_ranking<F: FnMut(&[usize])>(t: usize, mut f: F) -> Result<()> {
    check_enumerable(t)?;
    let mut ranks: Vec<usize> = (1..=t).collect();
    let mut c = vec![0usize; t];
    f(&ranks);
    let mut i = 1;
    while i < t {
        if c[i] < i {
            if i % 2 == 0 {
                ranks.swap(0, i);
            } else {
                ranks.swap(c[i], i);
            }
            f(&ranks);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(())
}

/// All `t!` standardized rankings of `t` items.
pub fn enumerate_standardized(t: usize) -> Result<Vec<StandardizedRanking>> {
    if t < 2 {
        return Err(Error::InvalidRanking(format!("need at least 2 items, got {t}")));
    }
    check_enumerable(t)?;
    let mut out = Vec::with_capacity((1..=t).product());
    for_each_ranking(t, |ranks| {
        let mut y = vec![0.0; t];
        standardize_into(ranks, &mut y);
        out.push(StandardizedRanking { y });
    })?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IncompleteKind {
    /// Unranked items may take any relative position.
    Subset,
    /// Unranked items rank below all `k` ranked items.
    TopK,
}

/// A partially observed ranking.
///
/// Subset rankings are stored re-ranked to `1..=k` over the ranked items, so
/// only their relative order is kept.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IncompleteRanking {
    kind: IncompleteKind,
    observed: Vec<Option<usize>>,
    k: usize,
}

impl IncompleteRanking {
    pub fn new(kind: IncompleteKind, observed: Vec<Option<usize>>) -> Result<Self> {
        let t = observed.len();
        if t < 2 {
            return Err(Error::InvalidRanking(format!("need at least 2 items, got {t}")));
        }
        let mut ranked: Vec<(usize, usize)> = observed
            .iter()
            .enumerate()
            .filter_map(|(item, r)| r.map(|r| (r, item)))
            .collect();
        let k = ranked.len();
        if k == 0 {
            return Err(Error::InvalidRanking("no ranked items".into()));
        }
        ranked.sort_unstable();
        if ranked.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidRanking("tied ranks are not supported".into()));
        }
        if ranked[0].0 == 0 {
            return Err(Error::InvalidRanking("ranks start at 1".into()));
        }
        let mut normalized = vec![None; t];
        match kind {
            IncompleteKind::Subset => {
                if ranked.last().map(|r| r.0).unwrap_or(0) > t {
                    return Err(Error::InvalidRanking(format!("rank exceeds t = {t}")));
                }
                for (pos, &(_, item)) in ranked.iter().enumerate() {
                    normalized[item] = Some(pos + 1);
                }
            }
            IncompleteKind::TopK => {
                for (pos, &(r, item)) in ranked.iter().enumerate() {
                    if r != pos + 1 {
                        return Err(Error::InvalidRanking(format!(
                            "top-k ranks must be exactly 1..={k}, found rank {r}"
                        )));
                    }
                    normalized[item] = Some(r);
                }
            }
        }
        Ok(Self { kind, observed: normalized, k })
    }

    /// Wraps a complete ranking as a fully observed incomplete ranking.
    pub fn from_complete(r: &Ranking, kind: IncompleteKind) -> Self {
        Self {
            kind,
            observed: r.ranks().iter().map(|&x| Some(x)).collect(),
            k: r.t(),
        }
    }

    #[inline]
    pub fn kind(&self) -> IncompleteKind {
        self.kind
    }

    #[inline]
    pub fn t(&self) -> usize {
        self.observed.len()
    }

    /// Number of ranked items.
    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn observed(&self) -> &[Option<usize>] {
        &self.observed
    }

    /// True when the compatibility class has a single member.
    pub fn is_complete(&self) -> bool {
        self.k == self.t() || (self.kind == IncompleteKind::TopK && self.k + 1 == self.t())
    }

    /// Ranked items from most to least preferred.
    pub fn ranked_order(&self) -> Vec<usize> {
        let mut order = vec![0; self.k];
        for (item, r) in self.observed.iter().enumerate() {
            if let Some(r) = r {
                order[r - 1] = item;
            }
        }
        order
    }

    pub fn unranked_items(&self) -> Vec<usize> {
        (0..self.t()).filter(|&i| self.observed[i].is_none()).collect()
    }

    /// Size of the compatibility class: `t!/k!` (subset) or `(t-k)!` (top-k).
    pub fn compatible_count(&self) -> f64 {
        let t = self.t();
        match self.kind {
            IncompleteKind::Subset => ((self.k + 1)..=t).map(|x| x as f64).product(),
            IncompleteKind::TopK => (1..=(t - self.k)).map(|x| x as f64).product(),
        }
    }
}

/// Whether `complete` preserves every order relation implied by `partial`.
pub fn is_compatible(complete: &Ranking, partial: &IncompleteRanking) -> Result<bool> {
    if complete.t() != partial.t() {
        return Err(Error::DimensionMismatch { expected: partial.t(), found: complete.t() });
    }
    let ranks = complete.ranks();
    Ok(match partial.kind {
        IncompleteKind::TopK => partial
            .observed
            .iter()
            .zip(ranks)
            .all(|(obs, &r)| match obs {
                Some(o) => *o == r,
                None => r > partial.k,
            }),
        IncompleteKind::Subset => partial
            .ranked_order()
            .windows(2)
            .all(|w| ranks[w[0]] < ranks[w[1]]),
    })
}

/// Every complete ranking compatible with `partial`.
pub fn compatible_set(partial: &IncompleteRanking) -> Result<Vec<Ranking>> {
    let t = partial.t();
    check_enumerable(t)?;
    let mut out = Vec::with_capacity(partial.compatible_count() as usize);
    match partial.kind {
        IncompleteKind::Subset => {
            let missing = partial.unranked_items();
            let mut order = partial.ranked_order();
            insert_all(&mut order, &missing, &mut out);
        }
        IncompleteKind::TopK => {
            let mut rest = partial.unranked_items();
            let head = partial.ranked_order();
            permute_all(&mut rest, 0, &mut |tail| {
                let order: Vec<usize> = head.iter().chain(tail.iter()).copied().collect();
                out.push(Ranking::from_order(&order).expect("valid order"));
            });
        }
    }
    Ok(out)
}

fn insert_all(order: &mut Vec<usize>, missing: &[usize], out: &mut Vec<Ranking>) {
    match missing.split_first() {
        None => out.push(Ranking::from_order(order).expect("valid order")),
        Some((&item, rest)) => {
            for pos in 0..=order.len() {
                order.insert(pos, item);
                insert_all(order, rest, out);
                order.remove(pos);
            }
        }
    }
}

fn permute_all<F: FnMut(&[usize])>(items: &mut [usize], start: usize, f: &mut F) {
    if start + 1 >= items.len() {
        f(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute_all(items, start + 1, f);
        items.swap(start, i);
    }
}

/// A uniform draw from the compatibility class of `partial`.
///
/// Subset rankings insert each missing item at a uniformly chosen position of
/// the growing preference order; top-k rankings shuffle the unranked items
/// into the bottom positions.
pub fn sample_compatible<R: Rng + ?Sized>(partial: &IncompleteRanking, rng: &mut R) -> Ranking {
    let mut order = partial.ranked_order();
    let mut missing = partial.unranked_items();
    match partial.kind {
        IncompleteKind::Subset => {
            order.reserve(missing.len());
            for item in missing {
                let pos = rng.random_range(0..=order.len());
                order.insert(pos, item);
            }
        }
        IncompleteKind::TopK => {
            missing.shuffle(rng);
            order.extend(missing);
        }
    }
    Ranking::from_order(&order).expect("compatible completion is a permutation")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{HashMap, HashSet};

    fn subset_example() -> IncompleteRanking {
        IncompleteRanking::new(IncompleteKind::Subset, vec![Some(2), None, Some(3), Some(4), Some(1)]).unwrap()
    }

    fn top2_example() -> IncompleteRanking {
        IncompleteRanking::new(IncompleteKind::TopK, vec![Some(2), None, None, None, Some(1)]).unwrap()
    }

    fn rk(v: &[usize]) -> Ranking {
        Ranking::new(v.to_vec()).unwrap()
    }

    #[test]
    fn standardize_small_cases() {
        let y = rk(&[1, 2, 3]).standardize();
        let s = 0.5_f64.sqrt();
        for (a, b) in y.as_slice().iter().zip([-s, 0.0, s]) {
            assert!((a - b).abs() < 1e-12);
        }
        let y = rk(&[2, 1]).standardize();
        assert!((y.as_slice()[0] - s).abs() < 1e-12);
        assert!((y.as_slice()[1] + s).abs() < 1e-12);
    }

    #[test]
    fn enumeration_sizes_and_guard() {
        assert_eq!(enumerate_standardized(3).unwrap().len(), 6);
        assert_eq!(enumerate_standardized(5).unwrap().len(), 120);
        assert!(matches!(enumerate_standardized(11), Err(Error::TooLarge { t: 11, .. })));
        let mut seen = HashSet::new();
        for_each_ranking(6, |r| {
            assert!(seen.insert(r.to_vec()));
        })
        .unwrap();
        assert_eq!(seen.len(), 720);
    }

    #[test]
    fn rejects_invalid_rankings() {
        assert!(Ranking::new(vec![1, 1, 2]).is_err());
        assert!(Ranking::new(vec![0, 1, 2]).is_err());
        assert!(Ranking::new(vec![1]).is_err());
        assert!(IncompleteRanking::new(IncompleteKind::Subset, vec![Some(1), Some(1), None]).is_err());
        assert!(IncompleteRanking::new(IncompleteKind::TopK, vec![Some(1), Some(3), None]).is_err());
        assert!(IncompleteRanking::new(IncompleteKind::Subset, vec![None, None]).is_err());
    }

    #[test]
    fn subset_is_reranked() {
        let p = IncompleteRanking::new(IncompleteKind::Subset, vec![Some(7), None, Some(3)]);
        assert!(p.is_err(), "rank above t");
        let p = IncompleteRanking::new(IncompleteKind::Subset, vec![Some(3), None, Some(1)]).unwrap();
        assert_eq!(p.observed(), &[Some(2), None, Some(1)]);
    }

    #[test]
    fn compatibility_examples() {
        let p = subset_example();
        assert!(is_compatible(&rk(&[2, 5, 3, 4, 1]), &p).unwrap());
        assert!(!is_compatible(&rk(&[5, 2, 3, 4, 1]), &p).unwrap());
        assert!(is_compatible(&rk(&[2, 3, 4, 5, 1]), &top2_example()).unwrap());
        assert!(!is_compatible(&rk(&[3, 2, 4, 5, 1]), &top2_example()).unwrap());
        assert!(is_compatible(&rk(&[1, 2]), &p).is_err());
    }

    #[test]
    fn compatible_set_matches_listing() {
        let got: HashSet<Ranking> = compatible_set(&subset_example()).unwrap().into_iter().collect();
        let want: HashSet<Ranking> = [
            [2, 5, 3, 4, 1],
            [2, 4, 3, 5, 1],
            [2, 3, 4, 5, 1],
            [3, 2, 4, 5, 1],
            [3, 1, 4, 5, 2],
        ]
        .iter()
        .map(|r| rk(r))
        .collect();
        assert_eq!(got, want);
        assert_eq!(compatible_set(&top2_example()).unwrap().len(), 6);
    }

    #[test]
    fn compatible_set_is_exact_class() {
        // exhaustive check at t = 6 over a few partials of each kind
        let partials = vec![
            IncompleteRanking::new(IncompleteKind::Subset, vec![Some(3), None, Some(1), None, Some(2), None]).unwrap(),
            IncompleteRanking::new(IncompleteKind::Subset, vec![None, Some(1), None, None, None, Some(2)]).unwrap(),
            IncompleteRanking::new(IncompleteKind::TopK, vec![None, Some(1), None, Some(3), None, Some(2)]).unwrap(),
            IncompleteRanking::new(IncompleteKind::TopK, vec![None, None, None, Some(1), None, None]).unwrap(),
        ];
        for p in partials {
            let set: HashSet<Ranking> = compatible_set(&p).unwrap().into_iter().collect();
            assert_eq!(set.len() as f64, p.compatible_count());
            for_each_ranking(6, |r| {
                let r = rk(r);
                assert_eq!(set.contains(&r), is_compatible(&r, &p).unwrap());
            })
            .unwrap();
        }
    }

    #[test]
    fn one_missing_item_gives_t_completions() {
        let p = rk(&[4, 2, 5, 1, 3, 6]).drop_items(&[2]).unwrap();
        assert_eq!(compatible_set(&p).unwrap().len(), 6);
    }

    fn chi_square(counts: &HashMap<Ranking, usize>, support: &[Ranking], n: usize) -> f64 {
        let e = n as f64 / support.len() as f64;
        support
            .iter()
            .map(|r| {
                let o = *counts.get(r).unwrap_or(&0) as f64;
                (o - e) * (o - e) / e
            })
            .sum()
    }

    #[test]
    fn sampling_is_uniform_over_class() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // chi-square critical values at alpha = 0.01 for 4 and 5 degrees of freedom
        for (p, crit) in [(subset_example(), 13.277), (top2_example(), 15.086)] {
            let support = compatible_set(&p).unwrap();
            let n = 100_000;
            let mut counts = HashMap::new();
            for _ in 0..n {
                let r = sample_compatible(&p, &mut rng);
                assert!(is_compatible(&r, &p).unwrap());
                *counts.entry(r).or_insert(0) += 1;
            }
            assert_eq!(counts.len(), support.len());
            let stat = chi_square(&counts, &support, n);
            assert!(stat < crit, "chi2 = {stat}");
        }
    }

    #[test]
    fn top_k_helpers() {
        let r = rk(&[2, 3, 4, 5, 1]);
        let p = r.top_k(2).unwrap();
        assert_eq!(p, top2_example());
        assert!(is_compatible(&r, &p).unwrap());
        assert_eq!(p.compatible_count(), 6.0);
        assert_eq!(subset_example().compatible_count(), 5.0);
    }

    proptest::proptest! {
        #[test]
        fn standardized_round_trip(seed in 0u64..10_000, t in 2usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..t).collect();
            order.shuffle(&mut rng);
            let r = Ranking::from_order(&order).unwrap();
            let y = r.standardize();
            proptest::prop_assert!((norm(y.as_slice()) - 1.0).abs() < 1e-12);
            proptest::prop_assert!(y.as_slice().iter().sum::<f64>().abs() < 1e-12);
            proptest::prop_assert_eq!(y.to_ranking(), r);
        }

        #[test]
        fn samples_always_compatible(seed in 0u64..10_000, t in 3usize..30, frac in 0.05f64..0.95, topk in proptest::bool::ANY) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (0..t).collect();
            order.shuffle(&mut rng);
            let full = Ranking::from_order(&order).unwrap();
            let k = ((t as f64 * frac) as usize).clamp(1, t - 1);
            let p = if topk {
                full.top_k(k).unwrap()
            } else {
                let missing: Vec<usize> = order[..t - k].to_vec();
                full.drop_items(&missing).unwrap()
            };
            proptest::prop_assert!(is_compatible(&full, &p).unwrap());
            let s = sample_compatible(&p, &mut rng);
            proptest::prop_assert!(is_compatible(&s, &p).unwrap());
        }
    }
}
