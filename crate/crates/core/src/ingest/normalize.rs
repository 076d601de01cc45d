//! HTML main-content extraction and markdown normalization.
//!
//! The HTML path drops navigation-like subtrees, then picks the content root
//! as the deepest element that still holds at least 80% of the page's
//! paragraph text and every heading of its parent. Headings become `#`
//! markers of matching depth; lists and tables flatten to text lines.

use scraper::node::Node;
use scraper::{ElementRef, Html};

use super::acquire::{ArtifactKind, SourceArtifact};
use super::IngestError;

const DOMINANT_SHARE: f64 = 0.8;

const BOILERPLATE_TAGS: &[&str] = &[
    "nav", "header", "footer", "aside", "script", "style", "noscript", "form", "button", "iframe",
    "svg", "template", "head", "title", "meta", "link",
];
const BOILERPLATE_TOKENS: &[&str] = &[
    "nav",
    "navbar",
    "navigation",
    "footer",
    "sidebar",
    "menu",
    "breadcrumb",
    "breadcrumbs",
    "cookie",
    "banner",
    "toolbar",
    "masthead",
];
const BOILERPLATE_ROLES: &[&str] = &[
    "navigation",
    "banner",
    "contentinfo",
    "complementary",
    "menu",
];

fn is_boilerplate(el: &ElementRef<'_>) -> bool {
    let v = el.value();
    if BOILERPLATE_TAGS.contains(&v.name()) {
        return true;
    }
    if v.attr("role")
        .is_some_and(|r| BOILERPLATE_ROLES.contains(&r))
    {
        return true;
    }
    let tokens = v
        .attr("class")
        .into_iter()
        .chain(v.attr("id"))
        .flat_map(|s| s.split(|c: char| !c.is_ascii_alphanumeric()))
        .map(|t| t.to_ascii_lowercase());
    for t in tokens {
        if BOILERPLATE_TOKENS.contains(&t.as_str()) {
            return true;
        }
    }
    false
}

fn heading_level(name: &str) -> Option<usize> {
    match name {
        "h1" => Some(1),
        "h2" => Some(2),
        "h3" => Some(3),
        "h4" => Some(4),
        "h5" => Some(5),
        "h6" => Some(6),
        _ => None,
    }
}

fn element_children<'a>(el: ElementRef<'a>) -> impl Iterator<Item = ElementRef<'a>> {
    el.children()
        .filter_map(ElementRef::wrap)
        .filter(|c| !is_boilerplate(c))
}

/// Characters of `<p>` text under `el`, skipping boilerplate subtrees.
fn paragraph_chars(el: ElementRef<'_>) -> usize {
    if el.value().name() == "p" {
        return inline_text(el).chars().count();
    }
    element_children(el).map(paragraph_chars).sum()
}

fn heading_count(el: ElementRef<'_>) -> usize {
    let own = usize::from(heading_level(el.value().name()).is_some());
    own + element_children(el).map(heading_count).sum::<usize>()
}

fn content_root(body: ElementRef<'_>) -> ElementRef<'_> {
    let total = paragraph_chars(body);
    if total == 0 {
        return body;
    }
    let mut current = body;
    loop {
        let headings_here = heading_count(current);
        let next = element_children(current)
            .map(|c| (paragraph_chars(c), c))
            .max_by_key(|(chars, _)| *chars)
            .filter(|(chars, c)| {
                *chars as f64 >= DOMINANT_SHARE * total as f64 && heading_count(*c) == headings_here
            });
        match next {
            Some((_, child)) => current = child,
            None => return current,
        }
    }
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn collect_inline(el: ElementRef<'_>, out: &mut String) {
    for child in el.children() {
        match child.value() {
            Node::Text(t) => out.push_str(t),
            Node::Element(e) => {
                let Some(child_el) = ElementRef::wrap(child) else {
                    continue;
                };
                if is_boilerplate(&child_el) {
                    continue;
                }
                match e.name() {
                    "br" => out.push(' '),
                    "math" => match e.attr("alttext") {
                        Some(alt) => out.push_str(alt),
                        None => collect_inline(child_el, out),
                    },
                    "img" => {}
                    _ => collect_inline(child_el, out),
                }
            }
            _ => {}
        }
    }
}

fn inline_text(el: ElementRef<'_>) -> String {
    let mut s = String::new();
    collect_inline(el, &mut s);
    collapse_ws(&s)
}

struct Renderer {
    blocks: Vec<String>,
    pending: String,
}

impl Renderer {
    fn flush(&mut self) {
        let text = collapse_ws(&self.pending);
        self.pending.clear();
        self.push_paragraph(text);
    }

    fn push_paragraph(&mut self, text: String) {
        if text.is_empty() {
            return;
        }
        // keep literal '#' text from being read as a heading
        if text.starts_with('#') {
            self.blocks.push(format!("\\{text}"));
        } else {
            self.blocks.push(text);
        }
    }

    fn list(&mut self, el: ElementRef<'_>, ordered: bool, lines: &mut Vec<String>) {
        let mut n = 0;
        for item in element_children(el) {
            match item.value().name() {
                "li" => {
                    n += 1;
                    let mut own = String::new();
                    let mut nested = Vec::new();
                    for c in item.children() {
                        match c.value() {
                            Node::Text(t) => own.push_str(t),
                            Node::Element(e) => {
                                let Some(ce) = ElementRef::wrap(c) else {
                                    continue;
                                };
                                if is_boilerplate(&ce) {
                                    continue;
                                }
                                match e.name() {
                                    "ul" => self.list(ce, false, &mut nested),
                                    "ol" => self.list(ce, true, &mut nested),
                                    _ => {
                                        own.push(' ');
                                        collect_inline(ce, &mut own);
                                        own.push(' ');
                                    }
                                }
                            }
                            _ => {}
                        }
                    }
                    let text = collapse_ws(&own);
                    if !text.is_empty() {
                        let marker = if ordered {
                            format!("{n}.")
                        } else {
                            "-".to_string()
                        };
                        lines.push(format!("{marker} {text}"));
                    }
                    lines.extend(nested);
                }
                "ul" => self.list(item, false, lines),
                "ol" => self.list(item, true, lines),
                _ => {}
            }
        }
    }

    fn table(&mut self, el: ElementRef<'_>) {
        let rows: Vec<String> = el
            .descendants()
            .filter_map(ElementRef::wrap)
            .filter(|e| e.value().name() == "tr")
            .map(|tr| {
                tr.children()
                    .filter_map(ElementRef::wrap)
                    .filter(|c| matches!(c.value().name(), "td" | "th"))
                    .map(inline_text)
                    .collect::<Vec<_>>()
                    .join(" | ")
            })
            .filter(|r| !r.trim().is_empty())
            .collect();
        if !rows.is_empty() {
            self.blocks.push(rows.join("\n"));
        }
    }

    fn render(&mut self, el: ElementRef<'_>) {
        for child in el.children() {
            match child.value() {
                Node::Text(t) => self.pending.push_str(t),
                Node::Element(e) => {
                    let Some(ce) = ElementRef::wrap(child) else {
                        continue;
                    };
                    if is_boilerplate(&ce) {
                        continue;
                    }
                    let name = e.name();
                    if let Some(level) = heading_level(name) {
                        self.flush();
                        let text = inline_text(ce);
                        if !text.is_empty() {
                            self.blocks.push(format!("{} {}", "#".repeat(level), text));
                        }
                        continue;
                    }
                    match name {
                        "p" | "figcaption" | "caption" | "dt" | "dd" => {
                            self.flush();
                            let text = inline_text(ce);
                            self.push_paragraph(text);
                        }
                        "ul" | "ol" => {
                            self.flush();
                            let mut lines = Vec::new();
                            self.list(ce, name == "ol", &mut lines);
                            if !lines.is_empty() {
                                self.blocks.push(lines.join("\n"));
                            }
                        }
                        "table" => {
                            self.flush();
                            self.table(ce);
                        }
                        "pre" => {
                            self.flush();
                            let code: String = ce.text().collect();
                            let code = code.trim_matches('\n');
                            if !code.trim().is_empty() {
                                self.blocks.push(format!("```\n{code}\n```"));
                            }
                        }
                        "br" => self.pending.push(' '),
                        "img" | "hr" => {}
                        "math" => match e.attr("alttext") {
                            Some(alt) => self.pending.push_str(alt),
                            None => collect_inline(ce, &mut self.pending),
                        },
                        "a" | "span" | "em" | "strong" | "b" | "i" | "code" | "sub" | "sup"
                        | "cite" | "small" | "abbr" | "mark" | "q" | "u" | "s" | "time" | "var"
                        | "kbd" => {
                            collect_inline(ce, &mut self.pending);
                        }
                        _ => {
                            self.flush();
                            self.render(ce);
                            self.flush();
                        }
                    }
                }
                _ => {}
            }
        }
    }
}

/// Extracts the main content of an HTML page as markdown-flavored text.
pub fn normalize_html(html: &str) -> Result<String, IngestError> {
    let doc = Html::parse_document(html);
    let root = doc.root_element();
    let body = root
        .children()
        .filter_map(ElementRef::wrap)
        .find(|e| e.value().name() == "body")
        .unwrap_or(root);
    let content = content_root(body);
    let mut r = Renderer {
        blocks: Vec::new(),
        pending: String::new(),
    };
    r.render(content);
    r.flush();
    normalize_markdown(&r.blocks.join("\n\n"))
}

/// LF line endings; runs of more than two blank lines collapse to two.
pub fn normalize_markdown(text: &str) -> Result<String, IngestError> {
    let text = text.replace("\r\n", "\n").replace('\r', "\n");
    let mut out = String::with_capacity(text.len());
    let mut blank_run = 0;
    for line in text.split_inclusive('\n') {
        if line.trim().is_empty() && line.ends_with('\n') {
            blank_run += 1;
            if blank_run > 2 {
                continue;
            }
        } else {
            blank_run = 0;
        }
        out.push_str(line);
    }
    if out.trim().is_empty() {
        return Err(IngestError::EmptyContent);
    }
    Ok(out)
}

pub fn normalize(artifact: &SourceArtifact) -> Result<String, IngestError> {
    match artifact.kind {
        ArtifactKind::Html => normalize_html(&artifact.content),
        ArtifactKind::Markdown => normalize_markdown(&artifact.content),
    }
}
