//! Tweet-oriented tokenization.
//!
//! Tokens are case-folded. URLs, @-mentions and hashtags stay whole, HTML
//! entities (including numeric emoji escapes, with or without the closing
//! `;`) are decoded into a single token, contractions keep their apostrophe
//! and any other punctuation is split into one token per character. Every
//! token keeps the byte span it came from in the raw text.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Url,
    Mention,
    Hashtag,
    Emoji,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub span: Span,
    pub kind: TokenKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NormalizeError {
    #[error("invalid UTF-8 at byte offset {offset}")]
    InvalidUtf8 { offset: usize },
}

static TOKEN_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?x)
        (?P<url>(?i:https?://|www\.)\S+)
        |(?P<mention>@[\p{L}\p{N}_]+)
        |(?P<hashtag>\#[\p{L}\p{N}_]+)
        |(?P<entity>&(?:\#[0-9]{1,7};?|\#[xX][0-9a-fA-F]{1,6};?|(?i:amp|lt|gt|quot|apos|nbsp);))
        |(?P<word>[\p{L}\p{N}\p{M}_]+(?:(?:['’]|\*+)[\p{L}\p{N}\p{M}_]+)*)
        |(?P<emoji>\p{Extended_Pictographic}[\p{Emoji_Modifier}\x{FE0F}]*(?:\x{200D}\p{Extended_Pictographic}[\p{Emoji_Modifier}\x{FE0F}]*)*)
        |(?P<other>\S)
        ",
    )
    .expect("token regex")
});

const URL_TRAILING: &[char] = &['.', ',', '!', '?', ';', ':', ')', ']', '"', '\'', '…'];

/// Decodes raw bytes, reporting the first invalid byte offset.
pub fn decode_utf8(raw: &[u8]) -> Result<&str, NormalizeError> {
    std::str::from_utf8(raw).map_err(|e| NormalizeError::InvalidUtf8 { offset: e.valid_up_to() })
}

/// Byte-level entry point: validates UTF-8, then tokenizes.
pub fn normalize_bytes(raw: &[u8]) -> Result<Vec<Token>, NormalizeError> {
    decode_utf8(raw).map(normalize)
}

pub fn normalize(raw: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut pos = 0;
    while let Some(caps) = TOKEN_RE.captures_at(raw, pos) {
        let whole = caps.get(0).expect("group 0");
        let (start, mut end) = (whole.start(), whole.end());
        let token = if caps.name("url").is_some() {
            let trimmed = raw[start..end].trim_end_matches(URL_TRAILING);
            // "www." alone is not a URL; fall back to a word.
            if trimmed.len() <= 4 {
                end = start + trimmed.len().max(1);
                word_or_punct(raw, start, end)
            } else {
                end = start + trimmed.len();
                Token { text: trimmed.to_lowercase(), span: Span::new(start, end), kind: TokenKind::Url }
            }
        } else if caps.name("mention").is_some() {
            folded(raw, start, end, TokenKind::Mention)
        } else if caps.name("hashtag").is_some() {
            folded(raw, start, end, TokenKind::Hashtag)
        } else if caps.name("entity").is_some() {
            decode_entity(&raw[start..end], Span::new(start, end))
        } else if caps.name("word").is_some() {
            folded(raw, start, end, TokenKind::Word)
        } else if caps.name("emoji").is_some() {
            Token { text: raw[start..end].to_owned(), span: Span::new(start, end), kind: TokenKind::Emoji }
        } else {
            folded(raw, start, end, TokenKind::Punct)
        };
        tokens.push(token);
        pos = end;
    }
    tokens
}

fn folded(raw: &str, start: usize, end: usize, kind: TokenKind) -> Token {
    Token { text: raw[start..end].to_lowercase(), span: Span::new(start, end), kind }
}

fn word_or_punct(raw: &str, start: usize, end: usize) -> Token {
    let is_word = raw[start..end].chars().all(char::is_alphanumeric);
    folded(raw, start, end, if is_word { TokenKind::Word } else { TokenKind::Punct })
}

fn decode_entity(entity: &str, span: Span) -> Token {
    let body = entity.trim_start_matches('&').trim_end_matches(';');
    let decoded = if let Some(num) = body.strip_prefix("#x").or_else(|| body.strip_prefix("#X")) {
        u32::from_str_radix(num, 16).ok().and_then(char::from_u32)
    } else if let Some(num) = body.strip_prefix('#') {
        num.parse::<u32>().ok().and_then(char::from_u32)
    } else {
        match body.to_ascii_lowercase().as_str() {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            "nbsp" => Some('\u{a0}'),
            _ => None,
        }
    };
    match decoded {
        Some(c) => {
            let kind = if c.is_alphanumeric() {
                TokenKind::Word
            } else if is_pictographic(c) {
                TokenKind::Emoji
            } else {
                TokenKind::Punct
            };
            Token { text: c.to_lowercase().collect(), span, kind }
        }
        // Invalid code points are kept verbatim as a single symbol.
        None => Token { text: entity.to_lowercase(), span, kind: TokenKind::Punct },
    }
}

fn is_pictographic(c: char) -> bool {
    static EMOJI: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\p{Extended_Pictographic}$").expect("emoji regex"));
    let mut buf = [0u8; 4];
    EMOJI.is_match(c.encode_utf8(&mut buf))
}

pub fn is_sentence_terminator(token: &Token) -> bool {
    token.kind == TokenKind::Punct && matches!(token.text.as_str(), "." | "!" | "?" | "…")
}

/// Splits a token stream into sentences.
///
/// A sentence ends after a run of terminators (`.`, `!`, `?`, `…`) or
/// before a token separated from its predecessor by a line break.
pub fn sentence_ranges(raw: &str, tokens: &[Token]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..tokens.len() {
        let ends_here =
            is_sentence_terminator(&tokens[i]) && tokens.get(i + 1).is_none_or(|next| !is_sentence_terminator(next));
        let breaks_after =
            tokens.get(i + 1).is_some_and(|next| raw[tokens[i].span.end..next.span.start].contains('\n'));
        if ends_here || breaks_after {
            out.push(start..i + 1);
            start = i + 1;
        }
    }
    if start < tokens.len() {
        out.push(start..tokens.len());
    }
    out
}
