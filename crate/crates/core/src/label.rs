use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The seven expression classes in network output order: output node
/// `Y1` is anger, `Y7` neutral.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expression {
    Anger,
    Fear,
    Surprise,
    Sadness,
    Happiness,
    Disgust,
    Neutral,
}

pub const NUM_CLASSES: usize = 7;

impl Expression {
    pub const ALL: [Expression; NUM_CLASSES] = [
        Expression::Anger,
        Expression::Fear,
        Expression::Surprise,
        Expression::Sadness,
        Expression::Happiness,
        Expression::Disgust,
        Expression::Neutral,
    ];

    /// Zero-based output index.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Expression> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Expression::Anger => "anger",
            Expression::Fear => "fear",
            Expression::Surprise => "surprise",
            Expression::Sadness => "sadness",
            Expression::Happiness => "happiness",
            Expression::Disgust => "disgust",
            Expression::Neutral => "neutral",
        }
    }

    /// Capitalized name for report tables.
    pub fn title(self) -> &'static str {
        match self {
            Expression::Anger => "Anger",
            Expression::Fear => "Fear",
            Expression::Surprise => "Surprise",
            Expression::Sadness => "Sadness",
            Expression::Happiness => "Happiness",
            Expression::Disgust => "Disgust",
            Expression::Neutral => "Neutral",
        }
    }

    /// Two-letter expression code used in JAFFE file names.
    pub fn jaffe_code(self) -> &'static str {
        match self {
            Expression::Anger => "AN",
            Expression::Fear => "FE",
            Expression::Surprise => "SU",
            Expression::Sadness => "SA",
            Expression::Happiness => "HA",
            Expression::Disgust => "DI",
            Expression::Neutral => "NE",
        }
    }

    /// One-hot training target.
    pub fn one_hot(self) -> Vec<f64> {
        let mut t = vec![0.0; NUM_CLASSES];
        t[self.index()] = 1.0;
        t
    }

    /// Label from a JAFFE-style file name such as `KA.AN1.39.tiff`: the
    /// first dot-separated field after the subject whose first two letters
    /// are a known code.
    pub fn from_jaffe_filename(name: &str) -> Option<Expression> {
        let base = name.rsplit(['/', '\\']).next().unwrap_or(name);
        base.split('.').skip(1).find_map(|field| {
            let code = field.get(..2)?.to_ascii_uppercase();
            Self::ALL.into_iter().find(|e| e.jaffe_code() == code)
        })
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Expression {
    type Err = Error;

    /// Accepts names (any case), common synonyms and the two-letter codes.
    fn from_str(s: &str) -> Result<Self, Error> {
        let lower = s.trim().to_ascii_lowercase();
        let e = match lower.as_str() {
            "anger" | "angry" | "an" => Expression::Anger,
            "fear" | "afraid" | "fe" => Expression::Fear,
            "surprise" | "surprised" | "su" => Expression::Surprise,
            "sadness" | "sad" | "sa" => Expression::Sadness,
            "happiness" | "happy" | "joy" | "ha" => Expression::Happiness,
            "disgust" | "disgusted" | "di" => Expression::Disgust,
            "neutral" | "ne" => Expression::Neutral,
            _ => return Err(Error::UnknownLabel(s.to_string())),
        };
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_order() {
        let names: Vec<_> = Expression::ALL.iter().map(|e| e.as_str()).collect();
        assert_eq!(
            names,
            [
                "anger",
                "fear",
                "surprise",
                "sadness",
                "happiness",
                "disgust",
                "neutral"
            ]
        );
        assert_eq!(Expression::from_index(2), Some(Expression::Surprise));
        assert_eq!(Expression::from_index(7), None);
        assert_eq!(
            Expression::Neutral.one_hot(),
            vec![0., 0., 0., 0., 0., 0., 1.]
        );
    }

    #[test]
    fn parse_names_and_codes() {
        for e in Expression::ALL {
            assert_eq!(e.as_str().parse::<Expression>().unwrap(), e);
            assert_eq!(e.jaffe_code().parse::<Expression>().unwrap(), e);
        }
        assert_eq!("Joy".parse::<Expression>().unwrap(), Expression::Happiness);
        assert!("contempt".parse::<Expression>().is_err());
    }

    #[test]
    fn jaffe_names() {
        assert_eq!(
            Expression::from_jaffe_filename("jaffe/KA.AN1.39.tiff"),
            Some(Expression::Anger)
        );
        assert_eq!(
            Expression::from_jaffe_filename("YM.NE2.50.pgm"),
            Some(Expression::Neutral)
        );
        assert_eq!(
            Expression::from_jaffe_filename("TM.SU1.36.pgm"),
            Some(Expression::Surprise)
        );
        assert_eq!(Expression::from_jaffe_filename("face.pgm"), None);
    }
}
