//! Heading-based segmentation of a normalized body.
//!
//! Every ATX (`#`..`######`) or setext (`===` / `---` underline) heading
//! opens a section whose content runs to the next heading of any depth.
//! Headings inside fenced code blocks are ignored. The resulting spans tile
//! the body exactly: prefix, then heading/content pairs in document order.

use std::ops::Range;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionNode {
    pub name: String,
    pub depth: u8,
    /// Heading line(s), including the trailing newline.
    pub heading: Range<usize>,
    /// Everything from after the heading up to the next heading.
    pub content: Range<usize>,
    /// `content` with surrounding whitespace trimmed; the section body.
    pub body: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SectionTree {
    /// Text before the first heading (belongs to no section).
    pub prefix: Range<usize>,
    pub sections: Vec<SectionNode>,
}

impl SectionTree {
    /// Concatenates prefix, headings and contents; equals the source body.
    pub fn reconstruct(&self, body: &str) -> String {
        let mut out = String::with_capacity(body.len());
        out.push_str(&body[self.prefix.clone()]);
        for s in &self.sections {
            out.push_str(&body[s.heading.clone()]);
            out.push_str(&body[s.content.clone()]);
        }
        out
    }
}

struct Line<'a> {
    start: usize,
    end: usize,
    text: &'a str,
}

fn leading_spaces(s: &str) -> usize {
    s.bytes().take_while(|b| *b == b' ').count()
}

/// `(fence char, run length)` when the line opens or closes a code fence.
fn fence(text: &str) -> Option<(char, usize)> {
    let indent = leading_spaces(text);
    if indent > 3 {
        return None;
    }
    let rest = &text[indent..];
    let c = rest.chars().next()?;
    if c != '`' && c != '~' {
        return None;
    }
    let n = rest.chars().take_while(|x| *x == c).count();
    (n >= 3).then_some((c, n))
}

fn atx(text: &str) -> Option<(u8, String)> {
    let indent = leading_spaces(text);
    if indent > 3 {
        return None;
    }
    let rest = text[indent..].trim_end_matches(['\n', '\r']);
    let hashes = rest.bytes().take_while(|b| *b == b'#').count();
    if !(1..=6).contains(&hashes) {
        return None;
    }
    let after = &rest[hashes..];
    if !after.is_empty() && !after.starts_with([' ', '\t']) {
        return None;
    }
    let mut name = after.trim();
    // optional closing sequence
    let stripped = name.trim_end_matches('#');
    if stripped.len() != name.len() && (stripped.is_empty() || stripped.ends_with([' ', '\t'])) {
        name = stripped.trim_end();
    }
    if name.is_empty() {
        return None;
    }
    Some((hashes as u8, name.to_string()))
}

fn setext_underline(text: &str) -> Option<u8> {
    let indent = leading_spaces(text);
    if indent > 3 {
        return None;
    }
    let t = text[indent..].trim_end();
    let c = t.chars().next()?;
    if (c == '=' || c == '-') && t.chars().all(|x| x == c) {
        return Some(if c == '=' { 1 } else { 2 });
    }
    None
}

fn is_blank(text: &str) -> bool {
    text.trim().is_empty()
}

fn blocks_setext(text: &str) -> bool {
    let t = text.trim_start();
    t.starts_with(['|', '>', '-', '*', '+'])
        || t.chars().take_while(|c| c.is_ascii_digit()).count() > 0
            && t.trim_start_matches(|c: char| c.is_ascii_digit())
                .starts_with(['.', ')'])
}

struct Heading {
    first_line: usize,
    last_line: usize,
    depth: u8,
    name: String,
}

pub fn segment_sections(body: &str) -> SectionTree {
    let mut lines = Vec::new();
    let mut pos = 0;
    for text in body.split_inclusive('\n') {
        lines.push(Line {
            start: pos,
            end: pos + text.len(),
            text,
        });
        pos += text.len();
    }

    let mut headings: Vec<Heading> = Vec::new();
    let mut open_fence: Option<(char, usize)> = None;
    let mut fence_line = vec![false; lines.len()];
    for (i, line) in lines.iter().enumerate() {
        if let Some((c, n)) = open_fence {
            fence_line[i] = true;
            if let Some((c2, n2)) = fence(line.text) {
                let only_fence = line.text.trim().chars().all(|x| x == c);
                if c2 == c && n2 >= n && only_fence {
                    open_fence = None;
                }
            }
            continue;
        }
        if let Some(f) = fence(line.text) {
            fence_line[i] = true;
            open_fence = Some(f);
            continue;
        }
        if let Some((depth, name)) = atx(line.text) {
            headings.push(Heading {
                first_line: i,
                last_line: i,
                depth,
                name,
            });
            continue;
        }
        if let Some(depth) = setext_underline(line.text) {
            if i == 0 {
                continue;
            }
            let prev = &lines[i - 1];
            let prev_is_heading = headings.last().is_some_and(|h| h.last_line == i - 1);
            let single_line_para = i == 1
                || is_blank(lines[i - 2].text)
                || headings.last().is_some_and(|h| h.last_line == i - 2);
            if !fence_line[i - 1]
                && !prev_is_heading
                && !is_blank(prev.text)
                && !blocks_setext(prev.text)
                && single_line_para
            {
                headings.push(Heading {
                    first_line: i - 1,
                    last_line: i,
                    depth,
                    name: prev.text.trim().to_string(),
                });
            }
        }
    }

    let first_start = headings
        .first()
        .map_or(body.len(), |h| lines[h.first_line].start);
    let mut sections = Vec::with_capacity(headings.len());
    for (k, h) in headings.iter().enumerate() {
        let heading = lines[h.first_line].start..lines[h.last_line].end;
        let content_end = headings
            .get(k + 1)
            .map_or(body.len(), |n| lines[n.first_line].start);
        let content = heading.end..content_end;
        let slice = &body[content.clone()];
        let lead = slice.len() - slice.trim_start().len();
        let trimmed_len = slice.trim().len();
        let body_range = if trimmed_len == 0 {
            content.start..content.start
        } else {
            content.start + lead..content.start + lead + trimmed_len
        };
        sections.push(SectionNode {
            name: h.name.clone(),
            depth: h.depth,
            heading,
            content,
            body: body_range,
        });
    }
    SectionTree {
        prefix: 0..first_start,
        sections,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat(body: &str) -> Vec<(String, u8, String)> {
        segment_sections(body)
            .sections
            .iter()
            .map(|s| (s.name.clone(), s.depth, body[s.body.clone()].to_string()))
            .collect()
    }

    #[test]
    fn atx_headings_flat() {
        let body = "# A\n\nt1\n\n## B\n\nt2";
        assert_eq!(
            flat(body),
            vec![("A".into(), 1, "t1".into()), ("B".into(), 2, "t2".into())]
        );
    }

    #[test]
    fn no_headings_gives_empty_tree() {
        let t = segment_sections("just text\nno headings\n");
        assert!(t.sections.is_empty());
        assert_eq!(t.prefix, 0..22);
    }

    #[test]
    fn prefix_and_numbered_names() {
        let body = "Title block\n\n# 1. Introduction\nIntro text.\n### 1.1 Scope ###\nscope\n";
        let t = segment_sections(body);
        assert_eq!(&body[t.prefix.clone()], "Title block\n\n");
        assert_eq!(t.sections[0].name, "1. Introduction");
        assert_eq!(t.sections[1].name, "1.1 Scope");
        assert_eq!(t.sections[1].depth, 3);
        assert_eq!(t.reconstruct(body), body);
    }

    #[test]
    fn fenced_headings_ignored() {
        let body =
            "# Real\n\n```\n# fake\n```\n\n~~~~\n## fake too\n~~~\nstill code\n~~~~\n## Next\nx";
        let names: Vec<_> = flat(body).into_iter().map(|(n, _, _)| n).collect();
        assert_eq!(names, ["Real", "Next"]);
    }

    #[test]
    fn setext_headings() {
        let body = "Intro\n=====\n\ntext\n\nDetails\n---\nmore\n\n- item\n---\n\n---\n";
        let got = flat(body);
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].0, "Intro");
        assert_eq!(got[0].1, 1);
        assert_eq!(got[1].0, "Details");
        assert_eq!(got[1].1, 2);
        assert!(got[1].2.starts_with("more"));
    }

    #[test]
    fn not_headings() {
        assert!(flat("#hashtag\n").is_empty());
        assert!(flat("#\n").is_empty());
        assert!(flat("    # indented code\n").is_empty());
        assert!(flat("####### seven\n").is_empty());
    }

    #[test]
    fn empty_section_body() {
        let body = "# A\n\n# B\nb";
        let t = segment_sections(body);
        assert_eq!(t.sections[0].body.len(), 0);
        assert_eq!(&body[t.sections[1].body.clone()], "b");
    }

    fn fuzz_line() -> impl Strategy<Value = String> {
        prop_oneof![
            "[a-z ]{0,12}",
            "#{1,7}[ ]?[a-zA-Z0-9 .#]{0,10}",
            "[=-]{1,5}",
            Just("```".to_string()),
            Just("~~~".to_string()),
            Just(String::new()),
            "[ ]{0,5}#{1,3} [a-z]{1,5}",
            "[|>*+-] [a-z]{1,4}",
        ]
    }

    proptest! {
        #[test]
        fn spans_tile_the_body(lines in prop::collection::vec(fuzz_line(), 0..40), crlf in any::<bool>()) {
            let sep = if crlf { "\r\n" } else { "\n" };
            let body = lines.join(sep);
            let t = segment_sections(&body);
            prop_assert_eq!(t.reconstruct(&body), body.clone());
            let mut cursor = t.prefix.end;
            for s in &t.sections {
                prop_assert_eq!(s.heading.start, cursor);
                prop_assert_eq!(s.heading.end, s.content.start);
                prop_assert!(s.body.start >= s.content.start && s.body.end <= s.content.end);
                prop_assert!((1..=6).contains(&s.depth));
                prop_assert!(!s.name.is_empty());
                cursor = s.content.end;
            }
            prop_assert_eq!(cursor, body.len());
        }
    }
}
