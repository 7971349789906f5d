use unicode_general_category::{get_general_category, GeneralCategory as Gc};

use crate::error::{Error, Result};

/// Longest caption kept, in tokens (excluding BOS/EOS).
pub const MAX_CAPTION_TOKENS: usize = 30;

fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        Gc::ConnectorPunctuation
            | Gc::DashPunctuation
            | Gc::OpenPunctuation
            | Gc::ClosePunctuation
            | Gc::InitialPunctuation
            | Gc::FinalPunctuation
            | Gc::OtherPunctuation
    )
}

/// Strips punctuation, lowercases, splits on whitespace and truncates.
pub fn preprocess_caption(text: &str) -> Result<Vec<String>> {
    let cleaned: String = text
        .chars()
        .filter(|&c| !is_punctuation(c))
        .flat_map(char::to_lowercase)
        .collect();
    let tokens: Vec<String> = cleaned
        .split_whitespace()
        .take(MAX_CAPTION_TOKENS)
        .map(str::to_string)
        .collect();
    if tokens.is_empty() {
        return Err(Error::EmptyCaption(text.to_string()));
    }
    Ok(tokens)
}
