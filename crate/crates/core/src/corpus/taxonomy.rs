//! The slop taxonomy: eleven granular codes grouped under three themes and
//! collapsed to seven final codes for analysis.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Granular annotation code as exported by annotators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GranularCode {
    /// Information density.
    IU1,
    /// Information relevance.
    IU2,
    /// Factuality.
    IQ1,
    /// Bias (subjectivity).
    IQ2,
    /// Repetition.
    SQ1,
    /// Templatedness.
    SQ2,
    /// Coherence.
    SQ3,
    /// Fluency / language naturalness.
    SQ4,
    /// Verbosity.
    SQ5,
    /// Word complexity.
    SQ6,
    /// Tone.
    SQ7,
}

impl GranularCode {
    pub const ALL: [GranularCode; 11] = [
        GranularCode::IU1,
        GranularCode::IU2,
        GranularCode::IQ1,
        GranularCode::IQ2,
        GranularCode::SQ1,
        GranularCode::SQ2,
        GranularCode::SQ3,
        GranularCode::SQ4,
        GranularCode::SQ5,
        GranularCode::SQ6,
        GranularCode::SQ7,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            GranularCode::IU1 => "IU1",
            GranularCode::IU2 => "IU2",
            GranularCode::IQ1 => "IQ1",
            GranularCode::IQ2 => "IQ2",
            GranularCode::SQ1 => "SQ1",
            GranularCode::SQ2 => "SQ2",
            GranularCode::SQ3 => "SQ3",
            GranularCode::SQ4 => "SQ4",
            GranularCode::SQ5 => "SQ5",
            GranularCode::SQ6 => "SQ6",
            GranularCode::SQ7 => "SQ7",
        }
    }

    /// Human-readable code name.
    pub fn name(self) -> &'static str {
        match self {
            GranularCode::IU1 => "Density",
            GranularCode::IU2 => "Relevance",
            GranularCode::IQ1 => "Factuality",
            GranularCode::IQ2 => "Bias",
            GranularCode::SQ1 => "Repetition",
            GranularCode::SQ2 => "Templatedness",
            GranularCode::SQ3 => "Coherence",
            GranularCode::SQ4 => "Fluency",
            GranularCode::SQ5 => "Verbosity",
            GranularCode::SQ6 => "Word Complexity",
            GranularCode::SQ7 => "Tone",
        }
    }

    /// The final (7-way) code this granular code collapses to.
    pub fn collapsed(self) -> CollapsedCode {
        match self {
            GranularCode::IU1 => CollapsedCode::Density,
            GranularCode::IU2 => CollapsedCode::Relevance,
            GranularCode::IQ1 => CollapsedCode::Factuality,
            GranularCode::IQ2 => CollapsedCode::Bias,
            GranularCode::SQ1 | GranularCode::SQ2 => CollapsedCode::Structure,
            GranularCode::SQ3 => CollapsedCode::Coherence,
            GranularCode::SQ4 | GranularCode::SQ5 | GranularCode::SQ6 | GranularCode::SQ7 => {
                CollapsedCode::Tone
            }
        }
    }
}

impl fmt::Display for GranularCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GranularCode {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        GranularCode::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| CorpusError::UnknownCode {
                line: 0,
                code: s.to_string(),
            })
    }
}

/// Final code after the 7-way collapse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CollapsedCode {
    Density,
    Relevance,
    Factuality,
    Bias,
    Structure,
    Coherence,
    Tone,
}

impl CollapsedCode {
    pub const ALL: [CollapsedCode; 7] = [
        CollapsedCode::Density,
        CollapsedCode::Relevance,
        CollapsedCode::Factuality,
        CollapsedCode::Bias,
        CollapsedCode::Structure,
        CollapsedCode::Coherence,
        CollapsedCode::Tone,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CollapsedCode::Density => "Density",
            CollapsedCode::Relevance => "Relevance",
            CollapsedCode::Factuality => "Factuality",
            CollapsedCode::Bias => "Bias",
            CollapsedCode::Structure => "Structure",
            CollapsedCode::Coherence => "Coherence",
            CollapsedCode::Tone => "Tone",
        }
    }

    /// Position in [`CollapsedCode::ALL`]; used to index count vectors.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn theme(self) -> Theme {
        match self {
            CollapsedCode::Density | CollapsedCode::Relevance => Theme::InformationUtility,
            CollapsedCode::Factuality | CollapsedCode::Bias => Theme::InformationQuality,
            CollapsedCode::Structure | CollapsedCode::Coherence | CollapsedCode::Tone => {
                Theme::StyleQuality
            }
        }
    }
}

impl fmt::Display for CollapsedCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Theme {
    InformationUtility,
    InformationQuality,
    StyleQuality,
}

impl Theme {
    pub const ALL: [Theme; 3] = [
        Theme::InformationUtility,
        Theme::InformationQuality,
        Theme::StyleQuality,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Theme::InformationUtility => "Information Utility",
            Theme::InformationQuality => "Information Quality",
            Theme::StyleQuality => "Style Quality",
        }
    }

    pub fn codes(self) -> impl Iterator<Item = CollapsedCode> {
        CollapsedCode::ALL.into_iter().filter(move |c| c.theme() == self)
    }
}

/// Image of a granular code set under the collapse map.
pub fn collapse<'a, I>(codes: I) -> BTreeSet<CollapsedCode>
where
    I: IntoIterator<Item = &'a GranularCode>,
{
    codes.into_iter().map(|c| c.collapsed()).collect()
}
