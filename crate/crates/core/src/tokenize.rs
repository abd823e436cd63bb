//! The four parallel token spaces.
//!
//! `Base` is lowercase alphanumeric runs with no stemming and no stopword
//! list. The other three channels are derived from the base stream:
//! 5-character prefixes, adjacent-token bigrams joined by `_`, and
//! character 3-grams taken inside each token.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub const PREFIX_LEN: usize = 5;
pub const MICRO_GRAM: usize = 3;
pub const BIGRAM_SEP: char = '_';

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenChannel {
    Base,
    Prefix,
    Bigram,
    Micro,
}

impl TokenChannel {
    pub const ALL: [TokenChannel; 4] = [
        TokenChannel::Base,
        TokenChannel::Prefix,
        TokenChannel::Bigram,
        TokenChannel::Micro,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TokenChannel::Base => "base",
            TokenChannel::Prefix => "prefix",
            TokenChannel::Bigram => "bigram",
            TokenChannel::Micro => "micro",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            TokenChannel::Base => 0,
            TokenChannel::Prefix => 1,
            TokenChannel::Bigram => 2,
            TokenChannel::Micro => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        TokenChannel::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for TokenChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TokenChannel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(TokenChannel::Base),
            "prefix" | "pfx" => Ok(TokenChannel::Prefix),
            "bigram" | "bi" => Ok(TokenChannel::Bigram),
            "micro" | "mic" => Ok(TokenChannel::Micro),
            other => Err(format!("unknown token channel `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenStream {
    pub channel: TokenChannel,
    pub tokens: Vec<String>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(String::as_str)
    }
}

pub fn tokenize_base(text: &str) -> TokenStream {
    let tokens = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect();
    TokenStream {
        channel: TokenChannel::Base,
        tokens,
    }
}

pub fn tokenize_prefix(base: &TokenStream) -> TokenStream {
    let tokens = base
        .iter()
        .map(|t| match t.char_indices().nth(PREFIX_LEN) {
            Some((cut, _)) => t[..cut].to_owned(),
            None => t.to_owned(),
        })
        .collect();
    TokenStream {
        channel: TokenChannel::Prefix,
        tokens,
    }
}

pub fn tokenize_bigram(base: &TokenStream) -> TokenStream {
    let tokens = base
        .tokens
        .windows(2)
        .map(|w| format!("{}{BIGRAM_SEP}{}", w[0], w[1]))
        .collect();
    TokenStream {
        channel: TokenChannel::Bigram,
        tokens,
    }
}

pub fn tokenize_micro(base: &TokenStream) -> TokenStream {
    let mut tokens = Vec::new();
    for t in base.iter() {
        let chars: Vec<char> = t.chars().collect();
        if chars.len() < MICRO_GRAM {
            tokens.push(t.to_owned());
        } else {
            tokens.extend(chars.windows(MICRO_GRAM).map(|w| w.iter().collect::<String>()));
        }
    }
    TokenStream {
        channel: TokenChannel::Micro,
        tokens,
    }
}

/// Derives a channel's stream from an already tokenized base stream.
pub fn derive(base: &TokenStream, channel: TokenChannel) -> TokenStream {
    match channel {
        TokenChannel::Base => base.clone(),
        TokenChannel::Prefix => tokenize_prefix(base),
        TokenChannel::Bigram => tokenize_bigram(base),
        TokenChannel::Micro => tokenize_micro(base),
    }
}

pub fn tokenize(text: &str, channel: TokenChannel) -> TokenStream {
    derive(&tokenize_base(text), channel)
}
