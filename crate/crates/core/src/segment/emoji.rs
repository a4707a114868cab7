use std::path::Path;
use std::sync::LazyLock;

use super::SegmentError;

pub const DEFAULT_EMOJI_RANGES: &str = include_str!("../../data/emoji_ranges.txt");

/// Sorted, merged codepoint intervals.
#[derive(Debug, Clone)]
pub struct EmojiRanges(Vec<(u32, u32)>);

static BUILTIN: LazyLock<EmojiRanges> =
    LazyLock::new(|| EmojiRanges::parse(DEFAULT_EMOJI_RANGES).expect("built-in emoji ranges"));

impl EmojiRanges {
    pub fn builtin() -> &'static EmojiRanges {
        &BUILTIN
    }

    /// Lines of `HHHH` or `HHHH..HHHH`, `#` starts a comment.
    pub fn parse(src: &str) -> Result<Self, String> {
        let mut ranges = Vec::new();
        for (n, line) in src.lines().enumerate() {
            let body = line.split('#').next().unwrap().trim();
            if body.is_empty() {
                continue;
            }
            let hex = |s: &str| u32::from_str_radix(s.trim(), 16).map_err(|e| format!("line {}: {e}", n + 1));
            let (lo, hi) = match body.split_once("..") {
                Some((a, b)) => (hex(a)?, hex(b)?),
                None => (hex(body)?, hex(body)?),
            };
            if lo > hi {
                return Err(format!("line {}: empty range", n + 1));
            }
            ranges.push((lo, hi));
        }
        ranges.sort_unstable();
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(ranges.len());
        for (lo, hi) in ranges {
            match merged.last_mut() {
                Some(last) if lo <= last.1.saturating_add(1) => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(EmojiRanges(merged))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, SegmentError> {
        let path = path.as_ref();
        let src = std::fs::read_to_string(path)
            .map_err(|e| SegmentError::FileUnreadable { path: path.display().to_string(), source: e })?;
        Self::parse(&src).map_err(|reason| SegmentError::FileUnreadable {
            path: path.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, reason),
        })
    }

    pub fn contains(&self, c: char) -> bool {
        let cp = c as u32;
        let i = self.0.partition_point(|&(_, hi)| hi < cp);
        self.0.get(i).is_some_and(|&(lo, _)| lo <= cp)
    }

    pub fn strip(&self, text: &str) -> String {
        text.chars().filter(|&c| !self.contains(c)).collect()
    }
}

/// Removes emoji and pictographic symbols using the shipped ranges.
pub fn strip_emoji(text: &str) -> String {
    BUILTIN.strip(text)
}
