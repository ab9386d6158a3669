//! Web-content ingestion primitives: boilerplate-stripping text
//! extraction, quality gates, and sentence-aware trimming.
//!
//! Extraction is best effort over possibly malformed markup and never
//! fails; the quality gates are pure predicates over the extracted text.
//! Character counts are Unicode scalar values throughout.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum extracted-text length for a document to be usable.
pub const MIN_CONTENT_CHARS: usize = 100;
/// Maximum source-text length after trimming.
pub const MAX_CONTENT_CHARS: usize = 4000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("query text is empty")]
    EmptyQueryText,
    #[error("source text exceeds {limit} characters ({len})")]
    SourceTooLong { len: usize, limit: usize },
    #[error("optimized text present but empty")]
    EmptyOptimizedText,
}

/// A natural-language user query within one domain subcategory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub subcategory: String,
    pub text: String,
}

impl QueryRecord {
    pub fn new(id: &str, subcategory: &str, text: &str) -> Result<Self, CorpusError> {
        if text.trim().is_empty() {
            return Err(CorpusError::EmptyQueryText);
        }
        Ok(QueryRecord {
            id: id.to_string(),
            subcategory: subcategory.to_string(),
            text: text.to_string(),
        })
    }
}

/// Quality-gate verdict for a fetched document. Mutually exclusive, with
/// precedence `excluded_domain > blocked > too_short`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocStatus {
    Usable,
    Blocked,
    TooShort,
    ExcludedDomain,
}

/// A fetched page tied to the query that retrieved it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WebDocument {
    pub query_id: String,
    pub url: String,
    pub raw_payload: String,
    pub extracted_text: String,
    pub char_count: usize,
    pub status: DocStatus,
    /// Set when the fetch itself signalled denial (robots block, 403, ...).
    pub fetch_denied: bool,
}

impl WebDocument {
    /// Extract text from the raw payload and populate the derived fields.
    /// The status starts as `Blocked`/`TooShort` and is finalised by
    /// [`quality_filter`] once the exclusion list is known.
    pub fn from_fetch(
        query_id: &str,
        url: &str,
        raw_payload: String,
        fetch_denied: bool,
        config: &ExtractConfig,
    ) -> Self {
        let extracted_text = extract_text(&raw_payload, config);
        let char_count = extracted_text.chars().count();
        let mut doc = WebDocument {
            query_id: query_id.to_string(),
            url: url.to_string(),
            raw_payload,
            extracted_text,
            char_count,
            status: DocStatus::TooShort,
            fetch_denied,
        };
        doc.status = quality_filter(&doc, &BTreeSet::new(), MIN_CONTENT_CHARS);
        doc
    }
}

/// A raw text and its optimised counterpart for one (query, url) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentPair {
    pub query_id: String,
    pub url: String,
    pub source_text: String,
    pub optimized_text: Option<String>,
}

impl ContentPair {
    pub fn validate(&self, max_chars: usize) -> Result<(), CorpusError> {
        let len = self.source_text.chars().count();
        if len > max_chars {
            return Err(CorpusError::SourceTooLong {
                len,
                limit: max_chars,
            });
        }
        if let Some(text) = &self.optimized_text {
            if text.is_empty() {
                return Err(CorpusError::EmptyOptimizedText);
            }
        }
        Ok(())
    }
}

/// Deny-lists steering boilerplate removal. The defaults drop the usual
/// chrome: navigation, ads, footers, social widgets, cookie banners.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractConfig {
    /// Elements whose whole subtree is dropped.
    pub excluded_tags: BTreeSet<String>,
    /// Class/id name tokens (split on `-`/`_`) that drop the subtree.
    pub excluded_name_tokens: BTreeSet<String>,
    /// `role` attribute values that drop the subtree.
    pub excluded_roles: BTreeSet<String>,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        fn set(words: &[&str]) -> BTreeSet<String> {
            words.iter().map(|w| w.to_string()).collect()
        }
        ExtractConfig {
            excluded_tags: set(&[
                "script", "style", "noscript", "template", "head", "title", "nav",
                "footer", "header", "aside", "form", "iframe", "svg", "canvas",
                "button", "select", "option", "textarea", "dialog", "menu",
            ]),
            excluded_name_tokens: set(&[
                "nav", "navbar", "navigation", "menu", "footer", "header", "ad",
                "ads", "advert", "advertisement", "adsense", "sponsor", "sponsored",
                "promo", "banner", "social", "share", "sharing", "widget",
                "sidebar", "cookie", "consent", "breadcrumb", "breadcrumbs",
                "comment", "comments", "newsletter", "subscribe", "popup", "modal",
            ]),
            excluded_roles: set(&[
                "navigation",
                "banner",
                "contentinfo",
                "complementary",
                "search",
                "form",
                "dialog",
            ]),
        }
    }
}

const VOID_TAGS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta",
    "param", "source", "track", "wbr",
];

const BLOCK_TAGS: &[&str] = &[
    "p", "div", "br", "h1", "h2", "h3", "h4", "h5", "h6", "li", "ul", "ol",
    "table", "tr", "section", "article", "main", "blockquote", "pre", "figure",
    "figcaption", "dl", "dt", "dd", "hr", "address", "details", "summary",
];

/// Raw-text elements: their content is not markup and must be skipped
/// verbatim up to the matching close tag.
const RAW_TEXT_TAGS: &[&str] = &["script", "style", "textarea", "title"];

struct TagToken {
    name: String,
    attrs: String,
    self_closing: bool,
    closing: bool,
}

/// Best-effort visible-text extraction from markup.
///
/// Script/style content vanishes, deny-listed blocks are dropped whole,
/// entities are decoded, runs of whitespace collapse to single spaces and
/// block boundaries become newline separators. Malformed markup degrades
/// to best-effort text; this function never fails.
pub fn extract_text(raw_payload: &str, config: &ExtractConfig) -> String {
    let bytes = raw_payload.as_bytes();
    let mut pos = 0usize;
    let mut paragraphs: Vec<String> = Vec::new();
    let mut current = String::new();
    let mut pending_space = false;
    let mut skip_stack: Vec<String> = Vec::new();

    fn flush_paragraph(paragraphs: &mut Vec<String>, current: &mut String, pending: &mut bool) {
        if !current.is_empty() {
            paragraphs.push(core::mem::take(current));
            *pending = false;
        }
    }

    while pos < bytes.len() {
        if bytes[pos] == b'<' {
            if raw_payload[pos..].starts_with("<!--") {
                pos = match raw_payload[pos..].find("-->") {
                    Some(end) => pos + end + 3,
                    None => bytes.len(),
                };
                continue;
            }
            if raw_payload[pos..].starts_with("<!") || raw_payload[pos..].starts_with("<?") {
                pos = match raw_payload[pos..].find('>') {
                    Some(end) => pos + end + 1,
                    None => bytes.len(),
                };
                continue;
            }
            match parse_tag(raw_payload, pos) {
                Some((tag, next)) => {
                    pos = next;
                    if tag.closing {
                        if let Some(last_match) =
                            skip_stack.iter().rposition(|open| *open == tag.name)
                        {
                            skip_stack.truncate(last_match);
                        } else if skip_stack.is_empty() && is_block_tag(&tag.name) {
                            flush_paragraph(&mut paragraphs, &mut current, &mut pending_space);
                        }
                        continue;
                    }
                    let excluded = config.excluded_tags.contains(&tag.name)
                        || attrs_excluded(&tag.attrs, config);
                    let void = tag.self_closing || VOID_TAGS.contains(&tag.name.as_str());
                    if excluded && RAW_TEXT_TAGS.contains(&tag.name.as_str()) {
                        pos = skip_raw_text(raw_payload, pos, &tag.name);
                        continue;
                    }
                    if excluded {
                        if !void {
                            skip_stack.push(tag.name.clone());
                        }
                        continue;
                    }
                    if skip_stack.is_empty() && is_block_tag(&tag.name) {
                        flush_paragraph(&mut paragraphs, &mut current, &mut pending_space);
                    }
                }
                None => {
                    // Stray `<` that opens no tag: treat literally.
                    if skip_stack.is_empty() {
                        if pending_space && !current.is_empty() {
                            current.push(' ');
                        }
                        pending_space = false;
                        current.push('<');
                    }
                    pos += 1;
                }
            }
            continue;
        }

        let text_end = raw_payload[pos..]
            .find('<')
            .map(|off| pos + off)
            .unwrap_or(bytes.len());
        if skip_stack.is_empty() {
            append_text(
                &decode_entities(&raw_payload[pos..text_end]),
                &mut current,
                &mut pending_space,
            );
        }
        pos = text_end;
    }
    flush_paragraph(&mut paragraphs, &mut current, &mut pending_space);
    paragraphs.join("\n")
}

fn is_block_tag(name: &str) -> bool {
    BLOCK_TAGS.contains(&name)
}

fn append_text(text: &str, current: &mut String, pending_space: &mut bool) {
    for ch in text.chars() {
        if ch.is_whitespace() {
            *pending_space = true;
        } else {
            if *pending_space && !current.is_empty() {
                current.push(' ');
            }
            *pending_space = false;
            current.push(ch);
        }
    }
}

/// Parse one tag starting at `pos` (which points at `<`). Returns the
/// token and the position just past the closing `>`, or `None` when no
/// well-formed tag starts here.
fn parse_tag(input: &str, pos: usize) -> Option<(TagToken, usize)> {
    let rest = &input[pos + 1..];
    let mut chars = rest.char_indices().peekable();
    let mut closing = false;
    if let Some((_, '/')) = chars.peek().copied() {
        closing = true;
        chars.next();
    }
    match chars.peek() {
        Some((_, c)) if c.is_ascii_alphabetic() => {}
        _ => return None,
    }
    let mut name = String::new();
    let mut body_start = rest.len();
    for (i, c) in chars.by_ref() {
        if c.is_ascii_alphanumeric() || c == '-' || c == ':' {
            name.push(c.to_ascii_lowercase());
        } else {
            body_start = i;
            break;
        }
    }
    // Find the closing '>', honouring quoted attribute values.
    let mut quote: Option<char> = None;
    let mut end = None;
    for (i, c) in rest.char_indices().skip(body_start.min(rest.len())) {
        match (quote, c) {
            (None, '"') | (None, '\'') => quote = Some(c),
            (Some(q), c2) if q == c2 => quote = None,
            (None, '>') => {
                end = Some(i);
                break;
            }
            _ => {}
        }
    }
    let end = end?;
    let attrs = rest[body_start.min(end)..end].trim().to_string();
    let self_closing = attrs.ends_with('/');
    Some((
        TagToken {
            name,
            attrs,
            self_closing,
            closing,
        },
        pos + 1 + end + 1,
    ))
}

/// Skip a raw-text element body up to and past its close tag.
fn skip_raw_text(input: &str, mut pos: usize, name: &str) -> usize {
    let lower = input.to_lowercase();
    let needle = alloc::format!("</{name}");
    while let Some(off) = lower[pos..].find(&needle) {
        let close_start = pos + off;
        match input[close_start..].find('>') {
            Some(gt) => return close_start + gt + 1,
            None => {
                pos = close_start + needle.len();
            }
        }
    }
    input.len()
}

fn attrs_excluded(attrs: &str, config: &ExtractConfig) -> bool {
    for (key, value) in parse_attrs(attrs) {
        match key.as_str() {
            "class" | "id" => {
                for word in value.split_whitespace() {
                    for token in word.split(['-', '_']) {
                        if config.excluded_name_tokens.contains(&token.to_lowercase()) {
                            return true;
                        }
                    }
                }
            }
            "role" => {
                if config.excluded_roles.contains(&value.to_lowercase()) {
                    return true;
                }
            }
            _ => {}
        }
    }
    false
}

fn parse_attrs(attrs: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut rest = attrs.trim_start();
    while !rest.is_empty() {
        let name_end = rest
            .find(|c: char| c == '=' || c.is_whitespace())
            .unwrap_or(rest.len());
        let name = rest[..name_end].to_lowercase();
        rest = rest[name_end..].trim_start();
        let mut value = String::new();
        if let Some(stripped) = rest.strip_prefix('=') {
            let v = stripped.trim_start();
            if let Some(q) = v.chars().next().filter(|c| *c == '"' || *c == '\'') {
                let inner = &v[1..];
                let end = inner.find(q).unwrap_or(inner.len());
                value = inner[..end].to_string();
                rest = &inner[(end + 1).min(inner.len())..];
            } else {
                let end = v
                    .find(|c: char| c.is_whitespace() || c == '>')
                    .unwrap_or(v.len());
                value = v[..end].to_string();
                rest = &v[end..];
            }
        }
        if !name.is_empty() {
            out.push((name, value));
        }
        rest = rest.trim_start();
        if rest == "/" {
            break;
        }
    }
    out
}

fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c != '&' {
            out.push(c);
            continue;
        }
        let rest = &text[i + 1..];
        let semi = rest.find(';').filter(|off| *off <= 10);
        let Some(semi) = semi else {
            out.push('&');
            continue;
        };
        let entity = &rest[..semi];
        let decoded: Option<char> = match entity {
            "amp" => Some('&'),
            "lt" => Some('<'),
            "gt" => Some('>'),
            "quot" => Some('"'),
            "apos" => Some('\''),
            "nbsp" => Some(' '),
            _ => entity.strip_prefix('#').and_then(|num| {
                let code = if let Some(hex) = num.strip_prefix(['x', 'X']) {
                    u32::from_str_radix(hex, 16).ok()
                } else {
                    num.parse::<u32>().ok()
                };
                code.and_then(char::from_u32)
            }),
        };
        match decoded {
            Some(ch) => {
                out.push(ch);
                for _ in 0..=semi {
                    chars.next();
                }
            }
            None => out.push('&'),
        }
    }
    out
}

/// Final quality-gate verdict, precedence `excluded_domain > blocked >
/// too_short > usable`. The length gate applies to the extracted text.
pub fn quality_filter(
    doc: &WebDocument,
    excluded_domains: &BTreeSet<String>,
    min_chars: usize,
) -> DocStatus {
    if let Some(host) = host_of(&doc.url) {
        let listed = excluded_domains
            .iter()
            .any(|d| host == *d || host.ends_with(&alloc::format!(".{d}")));
        if listed {
            return DocStatus::ExcludedDomain;
        }
    }
    if doc.fetch_denied {
        return DocStatus::Blocked;
    }
    if doc.char_count < min_chars {
        return DocStatus::TooShort;
    }
    DocStatus::Usable
}

/// Lowercased host part of a URL, without scheme, credentials or port.
pub fn host_of(url: &str) -> Option<String> {
    let after_scheme = url.split_once("://").map(|(_, r)| r).unwrap_or(url);
    let authority = after_scheme
        .split(['/', '?', '#'])
        .next()
        .unwrap_or(after_scheme);
    let host = authority.rsplit_once('@').map(|(_, h)| h).unwrap_or(authority);
    let host = host.split(':').next().unwrap_or(host);
    if host.is_empty() {
        None
    } else {
        Some(host.to_lowercase())
    }
}

/// Cut text to at most `limit` characters, preferring the last sentence
/// boundary at or before the limit, then the last whitespace, then a hard
/// cut. Identity for text already within the limit, hence idempotent.
pub fn trim_content(text: &str, limit: usize) -> &str {
    let mut count = 0usize;
    let mut window_bytes = text.len();
    for (byte_idx, _) in text.char_indices() {
        if count == limit {
            window_bytes = byte_idx;
            break;
        }
        count += 1;
    }
    if count < limit || window_bytes == text.len() {
        return text;
    }
    let window = &text[..window_bytes];

    let mut boundary = None;
    for (i, c) in window.char_indices() {
        if matches!(c, '.' | '!' | '?') {
            let next = text[i + c.len_utf8()..].chars().next();
            if next.is_none_or(char::is_whitespace) {
                boundary = Some(i + c.len_utf8());
            }
        }
    }
    if let Some(end) = boundary {
        return text[..end].trim_end();
    }
    if let Some(ws) = window.rfind(char::is_whitespace) {
        let cut = window[..ws].trim_end();
        if !cut.is_empty() {
            return cut;
        }
    }
    window
}
