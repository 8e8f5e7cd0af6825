//! Term grammar.
//!
//! Canonical form: `family`, `family(attr=NAME)` or `family(decay=X)`.
//! The lenient parser additionally accepts the spellings chat models tend
//! to produce (`gwesp(0.5, fixed=TRUE)`, `nodematch("club")`, `kstar(2)`).

use thiserror::Error;

use super::{Family, Term};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot parse term `{input}`: {reason}")]
pub struct ParseTermError {
    pub input: String,
    pub reason: String,
}

fn err(input: &str, reason: impl Into<String>) -> ParseTermError {
    ParseTermError {
        input: input.to_owned(),
        reason: reason.into(),
    }
}

pub(crate) fn valid_attribute_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

/// Decay used when a geometrically weighted term arrives without one.
pub const DEFAULT_DECAY: f64 = 0.5;

pub(crate) fn parse_canonical(input: &str) -> Result<Term, ParseTermError> {
    let (name, args) = match input.find('(') {
        None => (input, None),
        Some(open) => {
            let inner = input[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| err(input, "missing closing parenthesis"))?;
            (&input[..open], Some(inner))
        }
    };
    let family = Family::from_name(name).ok_or_else(|| err(input, "unknown family"))?;
    let (attr, decay) = match args {
        None => (None, None),
        Some(inner) => {
            let (key, value) = inner
                .split_once('=')
                .ok_or_else(|| err(input, "expected key=value"))?;
            match key {
                "attr" if valid_attribute_name(value) => (Some(value), None),
                "attr" => return Err(err(input, "invalid attribute name")),
                "decay" => {
                    let d: f64 = value
                        .parse()
                        .map_err(|_| err(input, "decay is not a number"))?;
                    (None, Some(d))
                }
                _ => return Err(err(input, format!("unknown key `{key}`"))),
            }
        }
    };
    Term::from_parts(family, attr, decay)
        .ok_or_else(|| err(input, "arguments do not match the family"))
}

/// Splits a spec list on `,` or `+` outside parentheses.
pub(crate) fn split_terms(list: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in list.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' | '+' if depth == 0 => {
                out.push(list[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(list[start..].trim());
    out.retain(|s| !s.is_empty());
    out
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['"', '\''] {
        if let Some(inner) = s.strip_prefix(q).and_then(|r| r.strip_suffix(q)) {
            return inner;
        }
    }
    s
}

/// Canonicalises a loosely written term.
pub fn parse_lenient(raw: &str) -> Result<Term, ParseTermError> {
    let compact: String = raw.chars().filter(|c| !c.is_whitespace()).collect();
    if let Ok(t) = parse_canonical(&compact) {
        return Ok(t);
    }
    let (name, args) = match compact.find('(') {
        None => (compact.as_str(), ""),
        Some(open) => {
            let inner = compact[open + 1..]
                .strip_suffix(')')
                .ok_or_else(|| err(raw, "missing closing parenthesis"))?;
            (&compact[..open], inner)
        }
    };
    let lname = name.to_ascii_lowercase();
    let args: Vec<&str> = if args.is_empty() {
        Vec::new()
    } else {
        args.split(',').collect()
    };
    let family = match lname.as_str() {
        "triangles" => Family::Triangle,
        "kstar" | "2-star" | "twostar" | "kstar2" => {
            if lname == "kstar" && args.first().map(|a| unquote(a)) != Some("2") {
                return Err(err(raw, "only kstar(2) is in the catalog"));
            }
            return Ok(Term::Twopath);
        }
        other => Family::from_name(other).ok_or_else(|| err(raw, "unknown family"))?,
    };

    let mut attr: Option<String> = None;
    let mut decay: Option<f64> = None;
    for arg in &args {
        let (key, value) = match arg.split_once('=') {
            Some((k, v)) => (Some(k.to_ascii_lowercase()), unquote(v)),
            None => (None, unquote(arg)),
        };
        match key.as_deref() {
            Some("fixed") => {}
            Some("attr") | Some("attrname") => attr = Some(value.to_owned()),
            Some("decay") | Some("alpha") => {
                decay = Some(
                    value
                        .parse()
                        .map_err(|_| err(raw, "decay is not a number"))?,
                )
            }
            Some(k) => return Err(err(raw, format!("unsupported argument `{k}`"))),
            None if family.is_geometric() => {
                decay = Some(
                    value
                        .parse()
                        .map_err(|_| err(raw, "decay is not a number"))?,
                )
            }
            None if family.attribute_kind().is_some() => attr = Some(value.to_owned()),
            None => return Err(err(raw, "family takes no arguments")),
        }
    }
    if family.is_geometric() && decay.is_none() {
        decay = Some(DEFAULT_DECAY);
    }
    if let Some(a) = &attr {
        if !valid_attribute_name(a) {
            return Err(err(raw, "invalid attribute name"));
        }
    }
    Term::from_parts(family, attr.as_deref(), decay)
        .ok_or_else(|| err(raw, "arguments do not match the family"))
}
