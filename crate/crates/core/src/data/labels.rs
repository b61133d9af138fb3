use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuous self-reported ratings for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialLabels {
    pub valence: f64,
    pub arousal: f64,
    pub liking: Option<f64>,
    pub scale_midpoint: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    Low,
    High,
}

impl ClassLabel {
    pub fn index(self) -> usize {
        match self {
            ClassLabel::Low => 0,
            ClassLabel::High => 1,
        }
    }
}

/// Circumplex quadrant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EmotionClass {
    #[serde(rename = "HVHA")]
    Hvha,
    #[serde(rename = "LVHA")]
    Lvha,
    #[serde(rename = "LVLA")]
    Lvla,
    #[serde(rename = "HVLA")]
    Hvla,
}

impl EmotionClass {
    pub const ALL: [EmotionClass; 4] = [
        EmotionClass::Hvha,
        EmotionClass::Lvha,
        EmotionClass::Lvla,
        EmotionClass::Hvla,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The (valence, arousal) pair this quadrant stands for.
    pub fn components(self) -> (ClassLabel, ClassLabel) {
        use ClassLabel::*;
        match self {
            EmotionClass::Hvha => (High, High),
            EmotionClass::Lvha => (Low, High),
            EmotionClass::Lvla => (Low, Low),
            EmotionClass::Hvla => (High, Low),
        }
    }
}

impl fmt::Display for EmotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            EmotionClass::Hvha => "HVHA",
            EmotionClass::Lvha => "LVHA",
            EmotionClass::Lvla => "LVLA",
            EmotionClass::Hvla => "HVLA",
        };
        f.write_str(s)
    }
}

/// High iff `rating > midpoint`; a rating exactly at the midpoint is Low.
///
/// `scale` is the (min, max) rating range used to reject out-of-range input.
pub fn binarize(rating: f64, midpoint: f64, scale: (f64, f64)) -> Result<ClassLabel> {
    let (min, max) = scale;
    if !(rating >= min && rating <= max) {
        return Err(Error::RatingOutOfScale { rating, min, max });
    }
    Ok(if rating > midpoint {
        ClassLabel::High
    } else {
        ClassLabel::Low
    })
}

pub fn emotion_class(valence: ClassLabel, arousal: ClassLabel) -> EmotionClass {
    use ClassLabel::*;
    match (valence, arousal) {
        (High, High) => EmotionClass::Hvha,
        (Low, High) => EmotionClass::Lvha,
        (Low, Low) => EmotionClass::Lvla,
        (High, Low) => EmotionClass::Hvla,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    const NINE: (f64, f64) = (1.0, 9.0);
    const FIVE: (f64, f64) = (1.0, 5.0);

    #[test]
    fn binarize_examples() {
        assert_eq!(binarize(7.0, 5.0, NINE).unwrap(), ClassLabel::High);
        assert_eq!(binarize(5.0, 5.0, NINE).unwrap(), ClassLabel::Low);
        assert_eq!(binarize(3.0, 3.0, FIVE).unwrap(), ClassLabel::Low);
        assert_eq!(binarize(3.5, 3.0, FIVE).unwrap(), ClassLabel::High);
    }

    #[test]
    fn binarize_rejects_out_of_scale() {
        assert!(matches!(binarize(9.5, 5.0, NINE), Err(Error::RatingOutOfScale { .. })));
        assert!(binarize(0.0, 3.0, FIVE).is_err());
        assert!(binarize(f64::NAN, 5.0, NINE).is_err());
    }

    #[test]
    fn emotion_class_quadrants() {
        use ClassLabel::*;
        assert_eq!(emotion_class(High, High), EmotionClass::Hvha);
        assert_eq!(emotion_class(Low, Low), EmotionClass::Lvla);
        assert_eq!(emotion_class(Low, High), EmotionClass::Lvha);
        assert_eq!(emotion_class(High, Low), EmotionClass::Hvla);

        let mut seen = HashSet::new();
        for v in [Low, High] {
            for a in [Low, High] {
                let e = emotion_class(v, a);
                assert_eq!(e.components(), (v, a));
                seen.insert(e);
            }
        }
        assert_eq!(seen.len(), 4);
    }

    proptest::proptest! {
        #[test]
        fn binarize_is_monotone(a in 1.0f64..=9.0, b in 1.0f64..=9.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let l = binarize(lo, 5.0, NINE).unwrap();
            let h = binarize(hi, 5.0, NINE).unwrap();
            proptest::prop_assert!(l <= h);
        }

        #[test]
        fn quadrant_agrees_with_componentwise_binarize(v in 1.0f64..=9.0, a in 1.0f64..=9.0) {
            let e = emotion_class(binarize(v, 5.0, NINE).unwrap(), binarize(a, 5.0, NINE).unwrap());
            proptest::prop_assert_eq!(e.components().0 == ClassLabel::High, v > 5.0);
            proptest::prop_assert_eq!(e.components().1 == ClassLabel::High, a > 5.0);
        }
    }
}
