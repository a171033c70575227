use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::default_damping;
use crate::model::{Fraction, Orientation, ReviewObject};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnreviewedPolicy {
    #[default]
    RankAfterScored,
}

/// Parameters of the review-weighted score.
///
/// Ties are broken by earliest certificate date (newest first), then by
/// fingerprint; that order is fixed and not configurable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankingSpec {
    pub damping: Fraction,
    pub max_depth: u32,
    #[serde(default)]
    pub unreviewed: UnreviewedPolicy,
}

impl Default for RankingSpec {
    fn default() -> Self {
        RankingSpec { damping: default_damping(), max_depth: 3, unreviewed: UnreviewedPolicy::RankAfterScored }
    }
}

impl RankingSpec {
    pub fn is_valid(&self) -> bool {
        self.max_depth >= 1 && self.damping.numer() > 0 && self.damping <= Fraction::new(1, 1).expect("1/1")
    }
}

/// Mean of a review's grades, each normalized to [0, 1] with lower-is-better
/// grades inverted. `None` for a review without grades.
pub fn review_grade(review: &ReviewObject) -> Option<BigRational> {
    if review.grades.is_empty() {
        return None;
    }
    let mut sum = BigRational::zero();
    for g in &review.grades {
        let x = BigRational::new(BigInt::from(g.value), BigInt::from(g.scale_max.max(1)));
        sum += match g.orientation {
            Orientation::HigherIsBetter => x,
            Orientation::LowerIsBetter => BigRational::one() - x,
        };
    }
    Some(sum / BigRational::from_integer(BigInt::from(review.grades.len())))
}

/// Callbacks the weight recursion needs from the graph.
pub(crate) trait ReviewSource {
    fn dismissed(&self, review: &crate::canonical::Fingerprint) -> bool;
    fn grade(&self, review: &crate::canonical::Fingerprint) -> Option<BigRational>;
    fn meta_reviews(&self, target: &crate::canonical::Fingerprint) -> Vec<crate::canonical::Fingerprint>;
}

/// `w(r, k) = 0` if dismissed; `1` at `k = 0`; otherwise
/// `max(0, 1 + λ Σ_m (2 g(m) − 1) w(m, k − 1))` over graded meta-reviews `m`
/// not already on the path.
pub(crate) fn weight<S: ReviewSource>(
    src: &S,
    review: &crate::canonical::Fingerprint,
    remaining: u32,
    lambda: &BigRational,
    path: &mut BTreeSet<crate::canonical::Fingerprint>,
) -> BigRational {
    if src.dismissed(review) {
        return BigRational::zero();
    }
    if remaining == 0 {
        return BigRational::one();
    }
    path.insert(*review);
    let two = BigRational::from_integer(BigInt::from(2));
    let mut adj = BigRational::zero();
    for m in src.meta_reviews(review) {
        if path.contains(&m) {
            continue;
        }
        let Some(gm) = src.grade(&m) else { continue };
        let wm = weight(src, &m, remaining - 1, lambda, path);
        adj += (&two * gm - BigRational::one()) * wm;
    }
    path.remove(review);
    let w = BigRational::one() + lambda * adj;
    if w < BigRational::zero() {
        BigRational::zero()
    } else {
        w
    }
}
