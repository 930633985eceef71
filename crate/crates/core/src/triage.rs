//! Thresholding of doubt scores and Dice-crossed quadrant classification.

use serde::{Deserialize, Serialize};

use crate::doubt::Doubt;
use crate::error::{Error, Result};
use crate::ingest::CaseReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriageConfig {
    pub doubt_threshold: f64,
    pub dice_threshold: f64,
}

impl TriageConfig {
    pub const DEFAULT_DICE_THRESHOLD: f64 = 0.75;

    pub fn new(doubt_threshold: f64) -> Result<Self> {
        Self::with_dice(doubt_threshold, Self::DEFAULT_DICE_THRESHOLD)
    }

    pub fn with_dice(doubt_threshold: f64, dice_threshold: f64) -> Result<Self> {
        if !doubt_threshold.is_finite() || doubt_threshold < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "doubt threshold must be a nonnegative number, got {doubt_threshold}"
            )));
        }
        if !(0.0..=1.0).contains(&dice_threshold) {
            return Err(Error::InvalidConfig(format!(
                "dice threshold must lie in [0, 1], got {dice_threshold}"
            )));
        }
        Ok(TriageConfig {
            doubt_threshold,
            dice_threshold,
        })
    }
}

/// Position of a case in the doubt/Dice plane. "Positive" means flagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    TruePositive,
    FalsePositive,
    FalseNegative,
    TrueNegative,
}

impl Quadrant {
    pub fn name(self) -> &'static str {
        match self {
            Quadrant::TruePositive => "TruePositive",
            Quadrant::FalsePositive => "FalsePositive",
            Quadrant::FalseNegative => "FalseNegative",
            Quadrant::TrueNegative => "TrueNegative",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Quadrant::TruePositive,
            Quadrant::FalsePositive,
            Quadrant::FalseNegative,
            Quadrant::TrueNegative,
        ]
        .into_iter()
        .find(|q| q.name() == s)
    }
}

/// Strictly above the threshold; the sentinel always flags.
pub fn flag(doubt: Doubt, cfg: &TriageConfig) -> bool {
    match doubt {
        Doubt::Sentinel => true,
        Doubt::Score(v) => v > cfg.doubt_threshold,
    }
}

/// Dice below the threshold counts as a failed segmentation; equality is good.
pub fn quadrant(doubt: Doubt, dice: f64, cfg: &TriageConfig) -> Quadrant {
    let bad = dice < cfg.dice_threshold;
    match (flag(doubt, cfg), bad) {
        (true, true) => Quadrant::TruePositive,
        (true, false) => Quadrant::FalsePositive,
        (false, true) => Quadrant::FalseNegative,
        (false, false) => Quadrant::TrueNegative,
    }
}

/// Fills `flagged` and `quadrant` on every report that has a doubt score.
pub fn apply(reports: &mut [CaseReport], cfg: &TriageConfig) {
    for r in reports {
        r.doubt_threshold = Some(cfg.doubt_threshold);
        r.dice_threshold = Some(cfg.dice_threshold);
        r.flagged = r.doubt.map(|d| flag(d, cfg));
        r.quadrant = match (r.doubt, r.dice) {
            (Some(d), Some(dice)) => Some(quadrant(d, dice, cfg)),
            _ => None,
        };
    }
}

/// Descending by doubt with the sentinel first, ties broken by case id.
/// Reports without a doubt score go last, by case id.
pub fn rank_by_doubt(reports: &[CaseReport]) -> Vec<CaseReport> {
    let mut out = reports.to_vec();
    out.sort_by(|a, b| {
        let key = |r: &CaseReport| r.doubt.map(Doubt::as_f64);
        match (key(a), key(b)) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then_with(|| a.case_id.cmp(&b.case_id))
    });
    for (i, r) in out.iter_mut().enumerate() {
        r.rank = Some(i + 1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn report(id: &str, doubt: Option<Doubt>) -> CaseReport {
        CaseReport {
            doubt,
            ..CaseReport::new(id)
        }
    }

    #[test]
    fn flag_boundaries() {
        let cfg = TriageConfig::new(10.0).unwrap();
        assert!(!flag(Doubt::Score(10.0), &cfg));
        assert!(flag(Doubt::Score(10.0 + 1e-9), &cfg));
        assert!(flag(Doubt::Sentinel, &cfg));
    }

    #[test]
    fn quadrants() {
        let cfg = TriageConfig::new(10.0).unwrap();
        assert_eq!(
            quadrant(Doubt::Score(50.0), 0.60, &cfg),
            Quadrant::TruePositive
        );
        assert_eq!(
            quadrant(Doubt::Score(1.0), 0.90, &cfg),
            Quadrant::TrueNegative
        );
        assert_eq!(
            quadrant(Doubt::Score(50.0), 0.90, &cfg),
            Quadrant::FalsePositive
        );
        assert_eq!(
            quadrant(Doubt::Score(1.0), 0.60, &cfg),
            Quadrant::FalseNegative
        );
        assert_eq!(
            quadrant(Doubt::Score(1.0), 0.75, &cfg),
            Quadrant::TrueNegative
        );
    }

    #[test]
    fn config_validation() {
        assert!(TriageConfig::new(-1.0).is_err());
        assert!(TriageConfig::new(f64::NAN).is_err());
        assert!(TriageConfig::with_dice(1.0, 1.5).is_err());
        assert_eq!(TriageConfig::new(2.0).unwrap().dice_threshold, 0.75);
    }

    #[test]
    fn ranking_examples() {
        assert!(rank_by_doubt(&[]).is_empty());
        let r = rank_by_doubt(&[
            report("a", Some(Doubt::Score(3.0))),
            report("b", Some(Doubt::Score(5.0))),
        ]);
        assert_eq!(r[0].case_id, "b");
        assert_eq!(r[0].rank, Some(1));
        let r = rank_by_doubt(&[
            report("c", Some(Doubt::Score(1.0))),
            report("a", Some(Doubt::Score(1.0))),
            report("z", None),
            report("s", Some(Doubt::Sentinel)),
        ]);
        let ids: Vec<_> = r.iter().map(|r| r.case_id.as_str()).collect();
        assert_eq!(ids, ["s", "a", "c", "z"]);
    }

    proptest! {
        #[test]
        fn quadrant_consistent_with_flag(d in 0.0f64..100.0, dice in 0.0f64..=1.0, t in 0.0f64..100.0) {
            let cfg = TriageConfig::new(t).unwrap();
            let q = quadrant(Doubt::Score(d), dice, &cfg);
            let positive = matches!(q, Quadrant::TruePositive | Quadrant::FalsePositive);
            prop_assert_eq!(positive, flag(Doubt::Score(d), &cfg));
        }

        #[test]
        fn raising_threshold_never_adds_flags(d in 0.0f64..100.0, t in 0.0f64..100.0, dt in 0.0f64..50.0) {
            let lo = TriageConfig::new(t).unwrap();
            let hi = TriageConfig::new(t + dt).unwrap();
            prop_assert!(!(flag(Doubt::Score(d), &hi) && !flag(Doubt::Score(d), &lo)));
        }

        #[test]
        fn ranking_is_permutation_invariant(
            doubts in prop::collection::vec(prop::option::of(0u8..5), 0..12),
            seed in any::<u64>(),
        ) {
            let reports: Vec<_> = doubts
                .iter()
                .enumerate()
                .map(|(i, d)| report(&format!("case{:02}", i), d.map(|v| Doubt::Score(v as f64))))
                .collect();
            let mut shuffled = reports.clone();
            let n = shuffled.len();
            if n > 1 {
                let mut s = seed;
                for i in (1..n).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    shuffled.swap(i, (s >> 33) as usize % (i + 1));
                }
            }
            prop_assert_eq!(rank_by_doubt(&reports), rank_by_doubt(&shuffled));
        }
    }
}
