use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use super::{
    DeltaModification, DeltaPlan, DeltaSummary, DiffBlock, ParsedResponse, DIVIDER_MARKER,
    PLAN_END, PLAN_START, REPLACE_MARKER, SEARCH_MARKER, SUMMARY_END, SUMMARY_START,
};

/// Every variant means the response must be rejected and the candidate
/// regenerated.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("MissingDeltaSummary: no {SUMMARY_START} delimiter")]
    MissingDeltaSummary,
    #[error("MissingDeltaPlan: no {PLAN_START} delimiter")]
    MissingDeltaPlan,
    #[error("MissingDiff: no SEARCH/REPLACE block")]
    MissingDiff,
    #[error("MalformedSection at byte {offset}: expected `{delimiter}` ({reason})")]
    MalformedSection {
        offset: usize,
        delimiter: String,
        reason: String,
    },
}

static MODIFICATION_HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^[\s#*_]*\[\s*modification\s+(\d+)\s*\]").expect("static regex")
});

#[derive(Debug, Clone, Copy)]
struct Line<'a> {
    offset: usize,
    text: &'a str,
}

fn split_lines(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for raw in text.split('\n') {
        out.push(Line { offset, text: raw.strip_suffix('\r').unwrap_or(raw) });
        offset += raw.len() + 1;
    }
    out
}

/// Delimiter lines match case-insensitively, ignoring markdown heading or
/// emphasis characters and surrounding whitespace.
fn is_delimiter(line: &str, delimiter: &str) -> bool {
    let name = delimiter.trim_start_matches('#');
    let noise = |c: char| c.is_whitespace() || matches!(c, '#' | '*' | '_');
    let t = line.trim_start_matches(noise).trim_end_matches(noise);
    t.eq_ignore_ascii_case(name)
}

fn find_section<'a>(
    lines: &[Line<'a>],
    start: &str,
    end: &str,
) -> Option<Result<Vec<Line<'a>>, ParseError>> {
    let open = lines.iter().position(|l| is_delimiter(l.text, start))?;
    let close = lines[open + 1..].iter().position(|l| is_delimiter(l.text, end));
    Some(match close {
        Some(c) => Ok(lines[open + 1..open + 1 + c].to_vec()),
        None => Err(ParseError::MalformedSection {
            offset: lines[open].offset,
            delimiter: end.to_string(),
            reason: format!("section opened by {start} is never closed"),
        }),
    })
}

/// Matches `KEY:` at the start of a line (case-insensitive, `_` and space
/// interchangeable, markdown emphasis tolerated) and returns the remainder.
fn match_key<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.trim_start_matches([' ', '\t', '*', '_', '-']);
    let head = rest.get(..key.len())?;
    let same = head
        .bytes()
        .zip(key.bytes())
        .all(|(a, b)| a.eq_ignore_ascii_case(&b) || (a == b' ' && b == b'_'));
    if !same {
        return None;
    }
    let after = rest[key.len()..].trim_start_matches(['*', '_', ' ', '\t']);
    after.strip_prefix(':').map(|v| v.trim_start())
}

fn match_any_key<'a>(line: &'a str, keys: &[&str]) -> Option<(usize, &'a str)> {
    keys.iter()
        .enumerate()
        .find_map(|(i, k)| match_key(line, k).map(|v| (i, v)))
}

/// Collects multi-line keyed values. A value runs until the next recognised
/// key or until the caller starts a new record.
struct KeyedValues<const N: usize> {
    values: [Option<String>; N],
    current: Option<usize>,
}

impl<const N: usize> KeyedValues<N> {
    fn new() -> Self {
        Self { values: std::array::from_fn(|_| None), current: None }
    }

    fn feed(&mut self, line: &str, keys: &[&str; N]) {
        if let Some((idx, value)) = match_any_key(line, keys) {
            self.values[idx] = Some(value.to_string());
            self.current = Some(idx);
        } else if let Some(idx) = self.current {
            let v = self.values[idx].get_or_insert_with(String::new);
            v.push('\n');
            v.push_str(line);
        }
    }

    fn finish(self) -> [String; N] {
        self.values.map(|v| v.map(|s| s.trim().to_string()).unwrap_or_default())
    }
}

const SUMMARY_KEYS: [&str; 2] = ["FROM", "TO"];
const PLAN_KEYS: [&str; 4] = ["COMPONENT", "OLD_LOGIC", "NEW_LOGIC", "HYPOTHESIS"];

/// Parses the body of a summary section (the text between its delimiters,
/// or a level-1 rendering). Absent keys come back as empty strings.
pub fn parse_summary_section(body: &str) -> DeltaSummary {
    let mut acc = KeyedValues::<2>::new();
    for line in split_lines(body) {
        acc.feed(line.text, &SUMMARY_KEYS);
    }
    let [from_strategy, to_strategy] = acc.finish();
    DeltaSummary { from_strategy, to_strategy }
}

/// Parses the body of a plan section (or a level-2 rendering). Text before
/// the first `[Modification 1]` header is ignored.
pub fn parse_plan_section(body: &str) -> Result<DeltaPlan, ParseError> {
    parse_plan_lines(&split_lines(body))
}

fn parse_plan_lines(lines: &[Line<'_>]) -> Result<DeltaPlan, ParseError> {
    let mut modifications = Vec::new();
    let mut current: Option<KeyedValues<4>> = None;
    let flush = |acc: KeyedValues<4>, out: &mut Vec<DeltaModification>| {
        let [component, old_logic, new_logic, hypothesis] = acc.finish();
        out.push(DeltaModification { component, old_logic, new_logic, hypothesis });
    };
    for line in lines {
        if let Some(caps) = MODIFICATION_HEADER.captures(line.text) {
            let expected = modifications.len() + usize::from(current.is_some()) + 1;
            let index: Option<usize> = caps[1].parse().ok();
            if index != Some(expected) {
                return Err(ParseError::MalformedSection {
                    offset: line.offset,
                    delimiter: format!("[Modification {expected}]"),
                    reason: format!("found [Modification {}]", &caps[1]),
                });
            }
            if let Some(acc) = current.take() {
                flush(acc, &mut modifications);
            }
            current = Some(KeyedValues::new());
        } else if let Some(acc) = current.as_mut() {
            acc.feed(line.text, &PLAN_KEYS);
        }
    }
    if let Some(acc) = current.take() {
        flush(acc, &mut modifications);
    }
    Ok(DeltaPlan { modifications })
}

fn parse_diffs(lines: &[Line<'_>]) -> Result<Vec<DiffBlock>, ParseError> {
    let mut diffs = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].text.trim() != SEARCH_MARKER {
            i += 1;
            continue;
        }
        let open = lines[i];
        let collect = |from: usize, marker: &str| -> Result<(String, usize), ParseError> {
            let end = lines[from..]
                .iter()
                .position(|l| l.text.trim() == marker)
                .ok_or_else(|| ParseError::MalformedSection {
                    offset: open.offset,
                    delimiter: marker.to_string(),
                    reason: "unterminated SEARCH/REPLACE block".into(),
                })?;
            let body: Vec<&str> = lines[from..from + end].iter().map(|l| l.text).collect();
            Ok((body.join("\n"), from + end + 1))
        };
        let (search, next) = collect(i + 1, DIVIDER_MARKER)?;
        let (replace, next) = collect(next, REPLACE_MARKER)?;
        if search.is_empty() {
            return Err(ParseError::MalformedSection {
                offset: open.offset,
                delimiter: SEARCH_MARKER.to_string(),
                reason: "empty SEARCH text".into(),
            });
        }
        diffs.push(DiffBlock { search, replace });
        i = next;
    }
    Ok(diffs)
}

/// Extracts diff blocks and both delta sections from raw model output.
pub fn parse_response(text: &str) -> Result<ParsedResponse, ParseError> {
    let lines = split_lines(text);

    let summary_lines =
        find_section(&lines, SUMMARY_START, SUMMARY_END).ok_or(ParseError::MissingDeltaSummary)??;
    let mut acc = KeyedValues::<2>::new();
    for l in &summary_lines {
        acc.feed(l.text, &SUMMARY_KEYS);
    }
    let [from_strategy, to_strategy] = acc.finish();

    let plan_lines =
        find_section(&lines, PLAN_START, PLAN_END).ok_or(ParseError::MissingDeltaPlan)??;
    let plan = parse_plan_lines(&plan_lines)?;

    let diffs = parse_diffs(&lines)?;
    if diffs.is_empty() {
        return Err(ParseError::MissingDiff);
    }

    Ok(ParsedResponse {
        diffs,
        summary: DeltaSummary { from_strategy, to_strategy },
        plan,
        raw_text: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIFF: &str = "<<<<<<< SEARCH\nx = 1\n=======\nx = 2\n>>>>>>> REPLACE\n";

    fn wrap(summary: &str, plan: &str) -> String {
        format!(
            "{DIFF}\n#DELTA-SUMMARY-START\n{summary}\n#DELTA-SUMMARY-END\n\
             #DELTA-PLAN-DETAILS-START\n{plan}\n#DELTA-PLAN-DETAILS-END\n"
        )
    }

    const PLAN: &str = "[Modification 1]\nCOMPONENT: Loop\nOLD_LOGIC: a\nNEW_LOGIC: b\nHYPOTHESIS: c";

    #[test]
    fn empty_text_is_missing_summary() {
        assert_eq!(parse_response(""), Err(ParseError::MissingDeltaSummary));
    }

    #[test]
    fn missing_plan_and_missing_diff() {
        let no_plan = format!("{DIFF}#DELTA-SUMMARY-START\nFROM: a\nTO: b\n#DELTA-SUMMARY-END\n");
        assert_eq!(parse_response(&no_plan), Err(ParseError::MissingDeltaPlan));

        let no_diff = wrap("FROM: a\nTO: b", PLAN).replace(DIFF, "");
        assert_eq!(parse_response(&no_diff), Err(ParseError::MissingDiff));
    }

    #[test]
    fn unclosed_summary_reports_offset() {
        let text = "preamble\n#DELTA-SUMMARY-START\nFROM: a\n";
        match parse_response(text) {
            Err(ParseError::MalformedSection { offset, delimiter, .. }) => {
                assert_eq!(offset, 9);
                assert_eq!(delimiter, SUMMARY_END);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unterminated_diff_is_malformed() {
        let text = wrap("FROM: a\nTO: b", PLAN).replace(">>>>>>> REPLACE\n", "");
        assert!(matches!(
            parse_response(&text),
            Err(ParseError::MalformedSection { delimiter, .. }) if delimiter == REPLACE_MARKER
        ));
    }

    #[test]
    fn noisy_delimiters_are_tolerated() {
        let text = format!(
            "{DIFF}## #delta-summary-start   \nfrom: a\nTo: b\n**#Delta-Summary-End**\n\
             ### #DELTA-PLAN-DETAILS-START\n{PLAN}\n#DELTA-PLAN-DETAILS-END  \n"
        );
        let parsed = parse_response(&text).unwrap();
        assert_eq!(parsed.summary.from_strategy, "a");
        assert_eq!(parsed.summary.to_strategy, "b");
        assert_eq!(parsed.plan.modifications.len(), 1);
    }

    #[test]
    fn multiline_values_stop_at_next_key() {
        let plan = "[Modification 1]\nCOMPONENT: Step size\nOLD_LOGIC: fixed\n  step 0.1\n\
                    NEW_LOGIC: adaptive\nHYPOTHESIS: faster\n\n[Modification 2] (If applicable)\n\
                    component: Restart\nold logic: none\nNEW_LOGIC: restart\nHYPOTHESIS: escape";
        let parsed = parse_response(&wrap("FROM: a\nTO: b", plan)).unwrap();
        let mods = &parsed.plan.modifications;
        assert_eq!(mods.len(), 2);
        assert_eq!(mods[0].old_logic, "fixed\n  step 0.1");
        assert_eq!(mods[0].hypothesis, "faster");
        assert_eq!(mods[1].component, "Restart");
        assert_eq!(mods[1].old_logic, "none");
    }

    #[test]
    fn gap_in_modification_numbers_is_malformed() {
        let plan = "[Modification 1]\nCOMPONENT: a\n[Modification 3]\nCOMPONENT: b";
        assert!(matches!(
            parse_response(&wrap("FROM: a\nTO: b", plan)),
            Err(ParseError::MalformedSection { delimiter, .. }) if delimiter == "[Modification 2]"
        ));
    }

    #[test]
    fn key_prefix_does_not_match_longer_words() {
        assert_eq!(match_key("TOTAL: 5", "TO"), None);
        assert_eq!(match_key("**TO**: b", "TO"), Some("b"));
    }

    #[test]
    fn diffs_keep_document_order_and_allow_deletion() {
        let text = format!(
            "<<<<<<< SEARCH\na\n=======\n>>>>>>> REPLACE\n{}",
            wrap("FROM: a\nTO: b", PLAN)
        );
        let parsed = parse_response(&text).unwrap();
        assert_eq!(parsed.diffs.len(), 2);
        assert_eq!(parsed.diffs[0], DiffBlock { search: "a".into(), replace: String::new() });
        assert_eq!(parsed.diffs[1].search, "x = 1");
    }

    #[test]
    fn empty_search_is_malformed() {
        let text = format!(
            "<<<<<<< SEARCH\n=======\nnew\n>>>>>>> REPLACE\n{}",
            wrap("FROM: a\nTO: b", PLAN)
        );
        assert!(matches!(parse_response(&text), Err(ParseError::MalformedSection { .. })));
    }
}
