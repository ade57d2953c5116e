//! Bracketed triple lists: `[subject: a, object: b, relation: r]; [...]`.
//!
//! Keys are case-insensitive and whitespace around tokens is ignored. The
//! literal `None` (any case, optionally bracketed) means "no triples".
//! Inside values a backslash escapes the next char; rendering escapes
//! `\`, `[`, `]`, `;` and `,`.

use crate::corpus::Triple;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedTriples {
    pub triples: Vec<Triple>,
    pub warnings: Vec<String>,
}

const ESCAPED: [char; 5] = ['\\', '[', ']', ';', ','];

fn is_none_literal(s: &str) -> bool {
    let s = s.trim().trim_end_matches('.').trim();
    let inner = s
        .strip_prefix('[')
        .and_then(|x| x.strip_suffix(']'))
        .unwrap_or(s)
        .trim();
    inner.eq_ignore_ascii_case("none")
}

/// Lenient parse. Malformed records are skipped and reported as warnings.
/// `source_doc` is left empty for the caller to fill.
pub fn parse_triples(raw: &str) -> ParsedTriples {
    let mut out = ParsedTriples::default();
    if raw.trim().is_empty() || is_none_literal(raw) {
        return out;
    }
    let chars: Vec<char> = raw.chars().collect();
    let mut i = 0;
    let mut records = 0usize;
    while i < chars.len() {
        match chars[i] {
            '\\' => i += 2,
            '[' => {
                let start = i + 1;
                let mut j = start;
                let mut end = None;
                while j < chars.len() {
                    match chars[j] {
                        '\\' => j += 2,
                        ']' => {
                            end = Some(j);
                            break;
                        }
                        '[' => break,
                        _ => j += 1,
                    }
                }
                records += 1;
                match end {
                    Some(e) => {
                        let body: String = chars[start..e].iter().collect();
                        if !is_none_literal(&body) {
                            match parse_record(&body) {
                                Ok(t) => out.triples.push(t),
                                Err(msg) => out.warnings.push(format!("record {records}: {msg}")),
                            }
                        }
                        i = e + 1;
                    }
                    None => {
                        let body: String = chars[start..j.min(chars.len())].iter().collect();
                        out.warnings
                            .push(format!("record {records}: unterminated `[{body}`"));
                        i = j;
                    }
                }
            }
            _ => i += 1,
        }
    }
    if records == 0 {
        out.warnings
            .push(format!("no triple records found in `{}`", raw.trim()));
    }
    out
}

/// Split on an unescaped separator, keeping escapes intact.
fn split_unescaped(s: &str, sep: char, limit: Option<usize>) -> Vec<String> {
    let mut parts = vec![String::new()];
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            parts.last_mut().unwrap().push(c);
            if let Some(n) = chars.next() {
                parts.last_mut().unwrap().push(n);
            }
        } else if c == sep && limit.is_none_or(|l| parts.len() < l) {
            parts.push(String::new());
        } else {
            parts.last_mut().unwrap().push(c);
        }
    }
    parts
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            if let Some(n) = chars.next() {
                out.push(n);
            }
        } else {
            out.push(c);
        }
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if ESCAPED.contains(&c) {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

fn parse_record(body: &str) -> Result<Triple, String> {
    let mut fields: Vec<(String, String)> = Vec::new();
    for part in split_unescaped(body, ',', None) {
        let kv = split_unescaped(&part, ':', Some(2));
        if kv.len() == 2 {
            fields.push((kv[0].trim().to_lowercase(), kv[1].clone()));
        } else if let Some(last) = fields.last_mut() {
            // An unescaped comma inside a value.
            last.1.push(',');
            last.1.push_str(&part);
        } else {
            return Err(format!("expected `key: value`, got `{}`", part.trim()));
        }
    }
    let mut subject = None;
    let mut object = None;
    let mut relation = None;
    for (key, value) in fields {
        let slot = match key.as_str() {
            "subject" => &mut subject,
            "object" => &mut object,
            "relation" => &mut relation,
            _ => continue,
        };
        if slot.is_some() {
            return Err(format!("duplicate key `{key}`"));
        }
        let value = unescape(value.trim());
        if value.trim().is_empty() {
            return Err(format!("empty `{key}`"));
        }
        *slot = Some(value.trim().to_string());
    }
    match (subject, object, relation) {
        (Some(s), Some(o), Some(r)) => Ok(Triple::new(s, o, r)),
        (s, o, r) => {
            let missing: Vec<&str> = [
                ("subject", s.is_none()),
                ("object", o.is_none()),
                ("relation", r.is_none()),
            ]
            .into_iter()
            .filter_map(|(k, m)| m.then_some(k))
            .collect();
            Err(format!("missing {}", missing.join(", ")))
        }
    }
}

/// Render triples; an empty list renders as `None`.
pub fn render_triples(ts: &[Triple]) -> String {
    if ts.is_empty() {
        return "None".to_string();
    }
    ts.iter()
        .map(|t| {
            format!(
                "[subject: {}, object: {}, relation: {}]",
                escape(&t.subject),
                escape(&t.object),
                escape(&t.relation)
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}
