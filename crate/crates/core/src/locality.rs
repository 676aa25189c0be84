//! Which window positions get resampled after verification.
//!
//! Given the rejected positions `R_T` of a draft window `[n, n + L)` and the
//! first rejection `t0 = min(R_T)`:
//!
//! * raster-scan rejection resamples every window position `>= t0`;
//! * naive local rejection resamples exactly `R_T`;
//! * local expansion resamples the union of the Chebyshev balls of radius `l`
//!   around each rejected position, restricted to `[t0, n + L)`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridShape;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum RejectionMode {
    RasterScan,
    LocalNaive,
    LocalExpand { radius: usize },
}

impl fmt::Display for RejectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectionMode::RasterScan => f.write_str("raster"),
            RejectionMode::LocalNaive => f.write_str("naive"),
            RejectionMode::LocalExpand { radius } => write!(f, "expand:{radius}"),
        }
    }
}

impl FromStr for RejectionMode {
    type Err = Error;

    /// Accepts `raster`, `naive` and `expand:<l>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "raster" | "raster-scan" => Ok(RejectionMode::RasterScan),
            "naive" | "local-naive" => Ok(RejectionMode::LocalNaive),
            other => other
                .strip_prefix("expand:")
                .and_then(|l| l.parse().ok())
                .map(|radius| RejectionMode::LocalExpand { radius })
                .ok_or_else(|| Error::Config(format!("unknown rejection mode {other:?}"))),
        }
    }
}

/// Half-open range of raster positions drafted in one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub len: usize,
}

impl Window {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.start..self.end()).contains(&t)
    }
}

/// Rejection bookkeeping for one verified window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowRejection {
    pub window: Window,
    /// `R_T`, ascending.
    pub rejected: Vec<usize>,
    /// `R_X`, ascending.
    pub expanded: Vec<usize>,
}

impl WindowRejection {
    pub fn new(window: Window, rejected: Vec<usize>, mode: RejectionMode, shape: GridShape) -> Result<Self> {
        let expanded = expand_rejections(&rejected, mode, shape, window)?;
        Ok(Self {
            window,
            rejected,
            expanded,
        })
    }

    /// First rejected position, `t0`.
    pub fn first(&self) -> usize {
        self.rejected[0]
    }
}

/// `{ u : |i_u - i_t| <= l, |j_u - j_t| <= l, u >= t0 }` over valid cells, ascending.
pub fn neighborhood(t: usize, radius: usize, shape: GridShape, t0: usize) -> Result<Vec<usize>> {
    if t < t0 {
        return Err(Error::Contract(format!("position {t} precedes first rejection {t0}")));
    }
    let (it, jt) = shape.raster_to_coord(t)?;
    shape.raster_to_coord(t0)?;
    let rows = it.saturating_sub(radius)..=(it + radius).min(shape.height - 1);
    let cols = jt.saturating_sub(radius)..=(jt + radius).min(shape.width - 1);
    let mut out = Vec::new();
    for i in rows {
        for j in cols.clone() {
            let u = i * shape.width + j;
            if u >= t0 {
                out.push(u);
            }
        }
    }
    Ok(out)
}

/// Expands `R_T` into the set `R_X` of positions to resample.
pub fn expand_rejections(
    rejected: &[usize],
    mode: RejectionMode,
    shape: GridShape,
    window: Window,
) -> Result<Vec<usize>> {
    let Some(&t0) = rejected.first() else {
        return Err(Error::Contract("no rejected positions to expand".into()));
    };
    if window.end() > shape.len() {
        return Err(Error::Index(format!(
            "window [{}, {}) exceeds {shape} grid",
            window.start,
            window.end()
        )));
    }
    if rejected.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("rejected positions must be strictly ascending".into()));
    }
    if let Some(t) = rejected.iter().find(|t| !window.contains(**t)) {
        return Err(Error::Contract(format!(
            "rejected position {t} outside window [{}, {})",
            window.start,
            window.end()
        )));
    }
    match mode {
        RejectionMode::RasterScan => Ok((t0..window.end()).collect()),
        RejectionMode::LocalNaive => Ok(rejected.to_vec()),
        RejectionMode::LocalExpand { radius } => {
            let mut set = BTreeSet::new();
            for &t in rejected {
                set.extend(
                    neighborhood(t, radius, shape, t0)?
                        .into_iter()
                        .filter(|u| *u < window.end()),
                );
            }
            Ok(set.into_iter().collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shape(h: usize, w: usize) -> GridShape {
        GridShape::new(h, w).unwrap()
    }

    #[test]
    fn neighborhood_examples() {
        let s = shape(4, 4);
        assert_eq!(neighborhood(5, 1, s, 5).unwrap(), vec![5, 6, 8, 9, 10]);
        assert_eq!(neighborhood(9, 0, s, 2).unwrap(), vec![9]);
        assert_eq!(neighborhood(6, 4, s, 6).unwrap(), (6..16).collect::<Vec<_>>());
        assert!(neighborhood(3, 1, s, 4).is_err());
    }

    #[test]
    fn raster_scan_is_suffix() {
        let w = Window { start: 4, len: 8 };
        let rx = expand_rejections(&[7], RejectionMode::RasterScan, shape(4, 4), w).unwrap();
        assert_eq!(rx, vec![7, 8, 9, 10, 11]);
    }

    #[test]
    fn naive_keeps_rejections() {
        let w = Window { start: 0, len: 16 };
        let rx = expand_rejections(&[3, 9], RejectionMode::LocalNaive, shape(4, 4), w).unwrap();
        assert_eq!(rx, vec![3, 9]);
    }

    #[test]
    fn expansion_is_clamped_to_window() {
        // 4x4 grid, window covers rows 0-1; rejection at (1,2) may not spill into row 2.
        let w = Window { start: 0, len: 8 };
        let rx = expand_rejections(&[6], RejectionMode::LocalExpand { radius: 1 }, shape(4, 4), w).unwrap();
        assert_eq!(rx, vec![6, 7]);
    }

    #[test]
    fn invalid_inputs() {
        let s = shape(4, 4);
        let w = Window { start: 4, len: 8 };
        assert!(expand_rejections(&[], RejectionMode::RasterScan, s, w).is_err());
        assert!(expand_rejections(&[2], RejectionMode::RasterScan, s, w).is_err());
        assert!(expand_rejections(&[8, 5], RejectionMode::LocalNaive, s, w).is_err());
        assert!(expand_rejections(&[5], RejectionMode::LocalNaive, s, Window { start: 10, len: 8 }).is_err());
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("raster".parse::<RejectionMode>().unwrap(), RejectionMode::RasterScan);
        assert_eq!("naive".parse::<RejectionMode>().unwrap(), RejectionMode::LocalNaive);
        assert_eq!(
            "expand:3".parse::<RejectionMode>().unwrap(),
            RejectionMode::LocalExpand { radius: 3 }
        );
        assert!("expand:x".parse::<RejectionMode>().is_err());
        for m in [RejectionMode::RasterScan, RejectionMode::LocalNaive, RejectionMode::LocalExpand { radius: 2 }] {
            assert_eq!(m.to_string().parse::<RejectionMode>().unwrap(), m);
        }
    }

    /// Every non-empty subset of `0..n` with at most `max` elements.
    fn subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(start: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if !cur.is_empty() {
                out.push(cur.clone());
            }
            if cur.len() == max {
                return;
            }
            for x in start..n {
                cur.push(x);
                rec(x + 1, n, max, cur, out);
                cur.pop();
            }
        }
        rec(0, n, max, &mut cur, &mut out);
        out
    }

    #[test]
    fn modes_nest_exhaustively() {
        for h in 1..=4 {
            for w in 1..=4 {
                let s = shape(h, w);
                let win = Window { start: 0, len: s.len() };
                for rt in subsets(s.len(), 3) {
                    let naive = expand_rejections(&rt, RejectionMode::LocalNaive, s, win).unwrap();
                    let raster = expand_rejections(&rt, RejectionMode::RasterScan, s, win).unwrap();
                    let mut prev: BTreeSet<usize> = naive.iter().copied().collect();
                    for l in 0..=h.max(w) {
                        let rx = expand_rejections(&rt, RejectionMode::LocalExpand { radius: l }, s, win).unwrap();
                        assert!(rx.windows(2).all(|p| p[0] < p[1]));
                        assert_eq!(rx[0], rt[0]);
                        let set: BTreeSet<usize> = rx.iter().copied().collect();
                        assert!(prev.is_subset(&set));
                        prev = set;
                    }
                    assert_eq!(prev.into_iter().collect::<Vec<_>>(), raster);
                }
            }
        }
    }

    #[test]
    fn raster_and_naive_are_idempotent() {
        let s = shape(5, 5);
        let win = Window { start: 5, len: 15 };
        for rt in [vec![6], vec![7, 12, 19], vec![5, 18]] {
            for mode in [RejectionMode::RasterScan, RejectionMode::LocalNaive] {
                let once = expand_rejections(&rt, mode, s, win).unwrap();
                let twice = expand_rejections(&once, mode, s, win).unwrap();
                assert_eq!(once, twice);
            }
        }
    }
    fn arb_case() -> impl Strategy<Value = (GridShape, Window, Vec<usize>, usize)> {
        (1usize..=7, 1usize..=7)
            .prop_flat_map(|(h, w)| {
                let n = h * w;
                (Just(h), Just(w), 0..n).prop_flat_map(move |(h, w, start)| {
                    (Just(h), Just(w), Just(start), 1..=n - start)
                })
            })
            .prop_flat_map(|(h, w, start, len)| {
                let picks = proptest::collection::btree_set(start..start + len, 1..=4);
                (Just(shape(h, w)), Just(Window { start, len }), picks, 0usize..8)
            })
            .prop_map(|(s, win, picks, l)| (s, win, picks.into_iter().collect(), l))
    }

    proptest! {
        #[test]
        fn expansion_stays_in_clamped_window((s, win, rt, l) in arb_case()) {
            let t0 = rt[0];
            let naive = expand_rejections(&rt, RejectionMode::LocalNaive, s, win).unwrap();
            let small = expand_rejections(&rt, RejectionMode::LocalExpand { radius: l }, s, win).unwrap();
            let big = expand_rejections(&rt, RejectionMode::LocalExpand { radius: l + 1 }, s, win).unwrap();
            let raster = expand_rejections(&rt, RejectionMode::RasterScan, s, win).unwrap();
            prop_assert_eq!(&naive, &rt);
            for rx in [&small, &big, &raster] {
                prop_assert_eq!(rx[0], t0);
                prop_assert!(rx.windows(2).all(|p| p[0] < p[1]));
                prop_assert!(*rx.last().unwrap() < win.end());
            }
            let as_set = |v: &Vec<usize>| v.iter().copied().collect::<BTreeSet<_>>();
            prop_assert!(as_set(&naive).is_subset(&as_set(&small)));
            prop_assert!(as_set(&small).is_subset(&as_set(&big)));
            prop_assert!(as_set(&big).is_subset(&as_set(&raster)));
        }
    }
}
