use serde::{Deserialize, Serialize};

/// Coarse token classes distinguished by the tokenizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Word,
    Hashtag,
    Mention,
    Url,
    Number,
    Punct,
}

impl TokenKind {
    /// Kinds that count as words for length and n-gram purposes.
    pub fn is_wordlike(self) -> bool {
        matches!(
            self,
            TokenKind::Word | TokenKind::Hashtag | TokenKind::Mention | TokenKind::Number
        )
    }
}

/// A token with character (not byte) offsets into the tweet text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
    pub capitalized: bool,
}

impl Token {
    /// Surface with a leading `#` removed for hashtags.
    pub fn stripped(&self) -> &str {
        match self.kind {
            TokenKind::Hashtag => &self.surface[1..],
            _ => &self.surface,
        }
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn starts_with_at(chars: &[char], i: usize, prefix: &str) -> bool {
    let mut j = i;
    for p in prefix.chars() {
        match chars.get(j) {
            Some(c) if c.to_ascii_lowercase() == p => j += 1,
            _ => return false,
        }
    }
    true
}

fn is_url_start(chars: &[char], i: usize) -> bool {
    starts_with_at(chars, i, "http://")
        || starts_with_at(chars, i, "https://")
        || starts_with_at(chars, i, "www.")
}

/// Length of a run of word characters starting at `i`, allowing apostrophes
/// between letters ("don't").
fn word_run(chars: &[char], i: usize) -> usize {
    let mut j = i;
    while j < chars.len() {
        let c = chars[j];
        let inner_apostrophe = is_apostrophe(c)
            && j > i
            && chars[j - 1].is_alphabetic()
            && chars.get(j + 1).is_some_and(|n| n.is_alphabetic());
        if is_word_char(c) || inner_apostrophe {
            j += 1;
        } else {
            break;
        }
    }
    j - i
}

/// Digits with optional `.`/`,` separated digit groups ("3.5", "1,000").
fn number_run(chars: &[char], i: usize) -> usize {
    let mut j = i;
    while j < chars.len() && chars[j].is_ascii_digit() {
        j += 1;
    }
    while j + 1 < chars.len()
        && (chars[j] == '.' || chars[j] == ',')
        && chars[j + 1].is_ascii_digit()
    {
        j += 1;
        while j < chars.len() && chars[j].is_ascii_digit() {
            j += 1;
        }
    }
    j - i
}

/// Splits tweet text into tokens.
///
/// Precedence is Url > Mention > Hashtag > Number > Word > Punct. Whitespace
/// is skipped; every other character belongs to exactly one token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let (len, kind) = if is_url_start(&chars, i) {
            let mut j = i;
            while j < chars.len() && !chars[j].is_whitespace() {
                j += 1;
            }
            (j - i, TokenKind::Url)
        } else if (c == '@' || c == '#') && chars.get(i + 1).is_some_and(|&n| is_word_char(n)) {
            let mut j = i + 1;
            while j < chars.len() && is_word_char(chars[j]) {
                j += 1;
            }
            let kind = if c == '@' {
                TokenKind::Mention
            } else {
                TokenKind::Hashtag
            };
            (j - i, kind)
        } else if c.is_ascii_digit() {
            let n = number_run(&chars, i);
            if chars.get(i + n).is_some_and(|&x| is_word_char(x)) {
                // digits glued to letters ("2day") fall through to the word rule
                let w = word_run(&chars, i);
                let all_digits = chars[i..i + w].iter().all(|ch| ch.is_ascii_digit());
                if all_digits {
                    (w, TokenKind::Number)
                } else {
                    (w, TokenKind::Word)
                }
            } else {
                (n, TokenKind::Number)
            }
        } else if is_word_char(c) {
            (word_run(&chars, i), TokenKind::Word)
        } else {
            (1, TokenKind::Punct)
        };
        let surface: String = chars[i..i + len].iter().collect();
        let capitalized = surface.chars().next().is_some_and(char::is_uppercase);
        tokens.push(Token {
            surface,
            start: i,
            end: i + len,
            kind,
            capitalized,
        });
        i += len;
    }
    tokens
}

/// Number of word-like tokens (Word, Hashtag, Mention, Number).
pub fn word_count(tokens: &[Token]) -> usize {
    tokens.iter().filter(|t| t.kind.is_wordlike()).count()
}
