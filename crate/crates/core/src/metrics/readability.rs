use crate::corpus::{count_syllables, Document, TokenKind};

use super::MetricsError;

/// Word, sentence, syllable and complex-word totals for one document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadabilityCounts {
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
    /// Words with three or more syllables.
    pub complex_words: usize,
}

impl ReadabilityCounts {
    pub fn of(doc: &Document) -> Result<Self, MetricsError> {
        let mut counts = ReadabilityCounts {
            words: 0,
            sentences: doc.sentences.len(),
            syllables: 0,
            complex_words: 0,
        };
        for tok in doc.words() {
            // numbers count as one syllable and are never complex
            let syl = match tok.kind {
                TokenKind::Word => count_syllables(&tok.surface)?,
                _ => 1,
            };
            counts.words += 1;
            counts.syllables += syl;
            if syl >= 3 {
                counts.complex_words += 1;
            }
        }
        if counts.words == 0 || counts.sentences == 0 {
            return Err(MetricsError::EmptyDocument);
        }
        Ok(counts)
    }

    pub fn words_per_sentence(&self) -> f64 {
        self.words as f64 / self.sentences as f64
    }

    pub fn syllables_per_word(&self) -> f64 {
        self.syllables as f64 / self.words as f64
    }

    pub fn fre(&self) -> f64 {
        206.835 - 1.015 * self.words_per_sentence() - 84.6 * self.syllables_per_word()
    }

    pub fn fkgl(&self) -> f64 {
        0.39 * self.words_per_sentence() + 11.8 * self.syllables_per_word() - 15.59
    }

    pub fn gfi(&self) -> f64 {
        let complex = self.complex_words as f64 / self.words as f64;
        0.4 * (self.words_per_sentence() + 100.0 * complex)
    }
}

/// Flesch Reading Ease.
pub fn flesch_reading_ease(doc: &Document) -> Result<f64, MetricsError> {
    Ok(ReadabilityCounts::of(doc)?.fre())
}

/// Flesch-Kincaid Grade Level.
pub fn flesch_kincaid_grade(doc: &Document) -> Result<f64, MetricsError> {
    Ok(ReadabilityCounts::of(doc)?.fkgl())
}

/// Gunning Fog Index.
pub fn gunning_fog(doc: &Document) -> Result<f64, MetricsError> {
    Ok(ReadabilityCounts::of(doc)?.gfi())
}
