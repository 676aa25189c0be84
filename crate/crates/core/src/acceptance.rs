//! Acceptance rules for draft tokens and the distributions used on rejection.
//!
//! * `Exact`: accept with `min(1, p(x) / q(x))`, resample from
//!   `norm(max(0, p - q))`. The output law equals `p`.
//! * `PooledRatio`: the numerator becomes the mass pooled over a
//!   TVD-bounded latent neighborhood of the draft.
//! * `PooledThreshold`: deterministic accept iff the pooled mass reaches `τ`.

use serde::{Deserialize, Serialize};

use crate::categorical::{Categorical, NORMALIZATION_TOLERANCE};
use crate::codebook::Codebook;
use crate::error::{Error, Result};
use crate::grid::VocabId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum AcceptanceRule {
    Exact,
    PooledRatio { k: usize, delta: f64 },
    PooledThreshold { k: usize, delta: f64, tau: f64 },
}

impl AcceptanceRule {
    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        let (k, delta, tau) = match *self {
            AcceptanceRule::Exact => return Ok(()),
            AcceptanceRule::PooledRatio { k, delta } => (k, delta, 0.0),
            AcceptanceRule::PooledThreshold { k, delta, tau } => (k, delta, tau),
        };
        if k == 0 || k > vocab_size {
            return Err(Error::Parameter(format!("k = {k} outside [1, {vocab_size}]")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::Parameter(format!("delta = {delta} outside [0, 1]")));
        }
        if tau.is_nan() || tau < 0.0 {
            return Err(Error::Parameter(format!("tau = {tau} must be >= 0")));
        }
        Ok(())
    }
}

/// The neighborhood `A ⊆ B_k(center)` whose mass is pooled onto the center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodMass {
    pub center: VocabId,
    /// Center first, then the admitted neighbors in ascending-distance order.
    pub members: Vec<VocabId>,
    /// Total target mass over `members`.
    pub pooled: f64,
    /// Target mass of `members` other than the center; equals the TVD
    /// between the relaxed and the original distribution.
    pub moved: f64,
}

impl NeighborhoodMass {
    /// The relaxed distribution: members' mass aggregated onto the center.
    pub fn relaxed(&self, p: &Categorical) -> Result<Categorical> {
        let mut mass = p.masses().to_vec();
        for m in self.members.iter().skip(1) {
            mass[m.0] = 0.0;
        }
        mass[self.center.0] = self.pooled;
        Categorical::new(mass)
    }
}

/// `min(1, p(draft) / q(draft))`.
pub fn exact_accept_prob(p: &Categorical, q: &Categorical, draft: VocabId) -> Result<f64> {
    ratio_accept_prob(p.prob(draft), q, draft)
}

/// `min(1, pooled / q(draft))`.
pub fn pooled_ratio_accept_prob(
    q: &Categorical,
    draft: VocabId,
    neighborhood: &NeighborhoodMass,
) -> Result<f64> {
    if neighborhood.center != draft {
        return Err(Error::Contract(format!(
            "neighborhood centered at {} used for draft {draft}",
            neighborhood.center
        )));
    }
    ratio_accept_prob(neighborhood.pooled, q, draft)
}

fn ratio_accept_prob(numerator: f64, q: &Categorical, draft: VocabId) -> Result<f64> {
    let qd = q.prob(draft);
    if qd <= 0.0 {
        return Err(Error::Contract(format!(
            "draft {draft} has zero drafter mass and cannot have been sampled"
        )));
    }
    Ok((numerator / qd).min(1.0))
}

/// `norm(max(0, p - q))`.
pub fn residual_distribution(p: &Categorical, q: &Categorical) -> Result<Categorical> {
    if p.vocab_size() != q.vocab_size() {
        return Err(Error::Contract(format!(
            "vocabulary mismatch: {} vs {}",
            p.vocab_size(),
            q.vocab_size()
        )));
    }
    let positive: Vec<f64> = p
        .masses()
        .iter()
        .zip(q.masses())
        .map(|(a, b)| (a - b).max(0.0))
        .collect();
    let total: f64 = positive.iter().sum();
    if total <= NORMALIZATION_TOLERANCE {
        return Err(Error::DegenerateResidual);
    }
    Categorical::new(positive.into_iter().map(|m| m / total).collect())
}

/// Greedy nearest-first construction of `A_{k,δ}`: walk `B_k(center)` in
/// ascending distance, admitting a candidate iff the moved mass stays `<= δ`.
pub fn build_bounded_neighborhood(
    p: &Categorical,
    center: VocabId,
    codebook: &Codebook,
    k: usize,
    delta: f64,
) -> Result<NeighborhoodMass> {
    if codebook.vocab_size() != p.vocab_size() {
        return Err(Error::Contract("codebook and distribution vocabularies differ".into()));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Parameter(format!("delta = {delta} outside [0, 1]")));
    }
    let ball = codebook.nearest_neighbors(center, k)?;
    Ok(greedy_neighborhood(p, &ball, delta))
}

/// Greedy walk over an explicit ascending-distance candidate list whose first
/// element is the center.
pub fn greedy_neighborhood(p: &Categorical, ball: &[VocabId], delta: f64) -> NeighborhoodMass {
    let center = ball[0];
    let mut members = vec![center];
    let mut moved = 0.0;
    for &x in &ball[1..] {
        let m = p.prob(x);
        if moved + m <= delta {
            moved += m;
            members.push(x);
        }
    }
    NeighborhoodMass {
        center,
        members,
        pooled: p.prob(center) + moved,
        moved,
    }
}

/// Deterministic threshold rule: accept iff `pooled >= τ`.
pub fn threshold_accept(draft: VocabId, neighborhood: &NeighborhoodMass, tau: f64) -> Result<bool> {
    if neighborhood.center != draft {
        return Err(Error::Contract(format!(
            "neighborhood centered at {} used for draft {draft}",
            neighborhood.center
        )));
    }
    Ok(neighborhood.pooled >= tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::categorical::tvd;
    use crate::rng::RandomSource;
    use proptest::prelude::*;

    fn cat(m: &[f64]) -> Categorical {
        Categorical::new(m.to_vec()).unwrap()
    }

    fn ids(v: &[usize]) -> Vec<VocabId> {
        v.iter().copied().map(VocabId).collect()
    }

    #[test]
    fn exact_examples() {
        let p = cat(&[0.3, 0.7]);
        let q = cat(&[0.6, 0.4]);
        assert!((exact_accept_prob(&p, &q, VocabId(0)).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(exact_accept_prob(&p, &q, VocabId(1)).unwrap(), 1.0);
        for d in 0..2 {
            assert_eq!(exact_accept_prob(&p, &p, VocabId(d)).unwrap(), 1.0);
        }
        let q0 = cat(&[1.0, 0.0]);
        assert!(matches!(exact_accept_prob(&p, &q0, VocabId(1)), Err(Error::Contract(_))));
    }

    #[test]
    fn residual_examples() {
        let r = residual_distribution(&cat(&[0.5, 0.3, 0.2]), &cat(&[0.2, 0.5, 0.3])).unwrap();
        assert_eq!(r.masses(), &[1.0, 0.0, 0.0]);
        let r = residual_distribution(&cat(&[0.6, 0.4]), &cat(&[0.2, 0.8])).unwrap();
        assert_eq!(r.masses(), &[1.0, 0.0]);
        let p = cat(&[0.25; 4]);
        assert!(matches!(residual_distribution(&p, &p), Err(Error::DegenerateResidual)));
    }

    #[test]
    fn greedy_walk_examples() {
        let p = cat(&[0.4, 0.3, 0.2, 0.1]);
        let n = greedy_neighborhood(&p, &ids(&[3, 2, 1, 0]), 0.25);
        assert_eq!(n.members, ids(&[3, 2]));
        assert!((n.pooled - 0.3).abs() < 1e-15);
        assert!((n.moved - 0.2).abs() < 1e-15);

        let n = greedy_neighborhood(&p, &ids(&[3, 2, 1, 0]), 0.0);
        assert_eq!(n.members, ids(&[3]));
        assert_eq!(n.pooled, 0.1);

        let n = greedy_neighborhood(&p, &ids(&[3, 2, 1, 0]), 1.0);
        assert_eq!(n.members.len(), 4);
        assert!((n.pooled - 1.0).abs() < 1e-12);
    }

    #[test]
    fn neighborhood_from_codebook() {
        // 1-d codebook placing ids in the order 3, 2, 1, 0 around id 3.
        let cb = Codebook::new(vec![vec![0.0], vec![1.0], vec![2.5], vec![4.0]]).unwrap();
        let p = cat(&[0.4, 0.3, 0.2, 0.1]);
        let n = build_bounded_neighborhood(&p, VocabId(3), &cb, 4, 0.25).unwrap();
        assert_eq!(n.members, ids(&[3, 2]));
        let n = build_bounded_neighborhood(&p, VocabId(3), &cb, 1, 1.0).unwrap();
        assert_eq!(n.members, ids(&[3]));
        assert!(build_bounded_neighborhood(&p, VocabId(3), &cb, 5, 0.1).is_err());
    }

    #[test]
    fn pooled_ratio_examples() {
        let q = cat(&[0.6, 0.4]);
        let n = NeighborhoodMass {
            center: VocabId(0),
            members: ids(&[0, 1]),
            pooled: 0.3,
            moved: 0.1,
        };
        assert!((pooled_ratio_accept_prob(&q, VocabId(0), &n).unwrap() - 0.5).abs() < 1e-15);
        let n = NeighborhoodMass { pooled: 0.9, ..n };
        assert_eq!(pooled_ratio_accept_prob(&q, VocabId(0), &n).unwrap(), 1.0);
        assert!(pooled_ratio_accept_prob(&q, VocabId(1), &n).is_err());
    }

    #[test]
    fn threshold_examples() {
        let n = NeighborhoodMass {
            center: VocabId(1),
            members: ids(&[1]),
            pooled: 0.3,
            moved: 0.0,
        };
        assert!(threshold_accept(VocabId(1), &n, 0.2).unwrap());
        assert!(threshold_accept(VocabId(1), &n, 0.0).unwrap());
        assert!(!threshold_accept(VocabId(1), &n, 1.0 + 1e-9).unwrap());
        let zero = NeighborhoodMass { pooled: 0.0, ..n.clone() };
        assert!(threshold_accept(VocabId(1), &zero, 0.0).unwrap());
    }

    #[test]
    fn rule_validation() {
        assert!(AcceptanceRule::PooledRatio { k: 0, delta: 0.1 }.validate(4).is_err());
        assert!(AcceptanceRule::PooledRatio { k: 5, delta: 0.1 }.validate(4).is_err());
        assert!(AcceptanceRule::PooledRatio { k: 4, delta: 1.1 }.validate(4).is_err());
        assert!(AcceptanceRule::PooledThreshold { k: 2, delta: 0.1, tau: -1.0 }
            .validate(4)
            .is_err());
        assert!(AcceptanceRule::PooledThreshold { k: 2, delta: 0.1, tau: 2.0 }
            .validate(4)
            .is_ok());
    }

    /// Closed-form one-step law of accept-or-residual, summed over all drafts.
    fn one_step_law(p: &Categorical, q: &Categorical) -> Vec<f64> {
        let v = p.vocab_size();
        let mut law = vec![0.0; v];
        let mut reject = 0.0;
        for (d, &qd) in q.masses().iter().enumerate() {
            if qd == 0.0 {
                continue;
            }
            let a = exact_accept_prob(p, q, VocabId(d)).unwrap();
            law[d] += qd * a;
            reject += qd * (1.0 - a);
        }
        if reject > 0.0 {
            let r = residual_distribution(p, q).unwrap();
            for (l, m) in law.iter_mut().zip(r.masses()) {
                *l += reject * m;
            }
        }
        law
    }

    #[test]
    fn accept_then_residual_recovers_target() {
        let mut rng = RandomSource::new(77);
        let mut random_cat = |v: usize, sparse: bool| loop {
            let w: Vec<f64> = (0..v)
                .map(|_| {
                    let u = rng.uniform();
                    if sparse && u < 0.3 { 0.0 } else { u + 1e-3 }
                })
                .collect();
            if let Ok(c) = Categorical::from_weights(w) {
                break c;
            }
        };
        for trial in 0..2000 {
            let v = 2 + trial % 5;
            let p = random_cat(v, trial % 3 == 0);
            let q = random_cat(v, trial % 4 == 0);
            if tvd(&p, &q).unwrap() < 1e-12 {
                continue;
            }
            let law = one_step_law(&p, &q);
            for (a, b) in law.iter().zip(p.masses()) {
                assert!((a - b).abs() < 1e-12, "trial {trial}: {law:?} vs {p:?}");
            }
        }
    }

    fn arb_cat(v: usize) -> impl Strategy<Value = Categorical> {
        proptest::collection::vec(0.0f64..1.0, v)
            .prop_filter_map("zero", |w| Categorical::from_weights(w).ok())
    }

    proptest! {
        #[test]
        fn relaxation_is_tvd_bounded(
            seed in any::<u64>(),
            (p, center, k) in (2usize..10).prop_flat_map(|v| (arb_cat(v), 0..v, 1..=v)),
            delta in 0.0f64..=1.0,
        ) {
            let cb = Codebook::random(seed, p.vocab_size(), 2).unwrap();
            let n = build_bounded_neighborhood(&p, VocabId(center), &cb, k, delta).unwrap();
            let ball = cb.nearest_neighbors(VocabId(center), k).unwrap();
            prop_assert_eq!(n.members[0], VocabId(center));
            prop_assert!(n.members.iter().all(|m| ball.contains(m)));
            prop_assert!(n.moved <= delta);
            let relaxed = n.relaxed(&p).unwrap();
            prop_assert!(tvd(&relaxed, &p).unwrap() <= delta + 1e-12);
        }

        #[test]
        fn pooled_mass_monotone_in_delta(
            seed in any::<u64>(),
            (p, center, k) in (2usize..10).prop_flat_map(|v| (arb_cat(v), 0..v, 1..=v)),
            d1 in 0.0f64..=1.0,
            d2 in 0.0f64..=1.0,
        ) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let cb = Codebook::random(seed, p.vocab_size(), 2).unwrap();
            let a = build_bounded_neighborhood(&p, VocabId(center), &cb, k, lo).unwrap();
            let b = build_bounded_neighborhood(&p, VocabId(center), &cb, k, hi).unwrap();
            prop_assert!(a.pooled <= b.pooled + 1e-15);
        }

        #[test]
        fn threshold_monotone_in_tau(pooled in 0.0f64..=1.0, t1 in 0.0f64..1.5, t2 in 0.0f64..1.5) {
            let n = NeighborhoodMass { center: VocabId(0), members: vec![VocabId(0)], pooled, moved: 0.0 };
            let (hi, lo) = if t1 >= t2 { (t1, t2) } else { (t2, t1) };
            if threshold_accept(VocabId(0), &n, hi).unwrap() {
                prop_assert!(threshold_accept(VocabId(0), &n, lo).unwrap());
            }
        }

        #[test]
        fn k1_reduces_to_exact(
            seed in any::<u64>(),
            (p, q, d) in (2usize..8).prop_flat_map(|v| (arb_cat(v), arb_cat(v), 0..v)),
            delta in 0.0f64..=1.0,
        ) {
            prop_assume!(q.prob(VocabId(d)) > 0.0);
            let cb = Codebook::random(seed, p.vocab_size(), 2).unwrap();
            let n = build_bounded_neighborhood(&p, VocabId(d), &cb, 1, delta).unwrap();
            prop_assert_eq!(
                pooled_ratio_accept_prob(&q, VocabId(d), &n).unwrap(),
                exact_accept_prob(&p, &q, VocabId(d)).unwrap()
            );
        }
    }
}
