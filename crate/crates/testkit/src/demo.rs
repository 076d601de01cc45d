//! The fully enriched demo record served without a token.

use paperdesk_core::enrich::{aggregate_trending, SocialSearch};
use paperdesk_core::ingest::segment_sections;
use paperdesk_core::record::{
    AuthorEntry, ExternalContext, Provenance, RecordDraft, ResourceKind, ResourceLink,
    SectionDraft, SourceType,
};
use paperdesk_core::{PaperId, PaperRecord, Timestamp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::gen::TOPICS;

pub const DEMO_ID: &str = "2409.05591";

/// Section layout: name, first sentence, filler paragraphs, token count as
/// reported by the upstream tokenizer.
const SECTIONS: &[(&str, &str, usize, usize)] = &[
    (
        "1. Introduction",
        "MemoRAG pairs a light global memory model with a retriever so that long inputs can be searched through clues drafted from memory.",
        10,
        1661,
    ),
    ("2. Related Work", "Prior retrieval augmentation relies on explicit queries over short chunks.", 9, 2400),
    ("3. MemoRAG", "The memory model compresses the whole input into a global memory and drafts retrieval clues.", 14, 5200),
    ("4. Experiments", "We evaluate on long-context question answering and summarization benchmarks.", 12, 4100),
    ("5. Results", "Global memory guided retrieval outperforms standard retrieval augmentation on most tasks.", 14, 6300),
    ("6. Conclusion", "A global memory makes retrieval augmentation practical for long and implicit information needs.", 4, 1200),
];

pub fn demo_record(social: &dyn SocialSearch) -> PaperRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(2409_05591);
    let topic = &TOPICS[11];
    let mut body = String::from("Preprint.\n\n");
    for (name, first, paragraphs, _) in SECTIONS {
        body.push_str(&format!("# {name}\n\n{first} "));
        for _ in 0..*paragraphs {
            let sentences: Vec<String> = (0..6)
                .map(|_| crate::gen::sentence(&mut rng, topic))
                .collect();
            body.push_str(&sentences.join(" "));
            body.push_str("\n\n");
        }
        if *name == "6. Conclusion" {
            body.push_str("Code is available at https://github.com/qhjqhj00/MemoRAG.\n\n");
        }
    }
    let body = body.trim_end().to_string();
    let tree = segment_sections(&body);
    assert_eq!(tree.sections.len(), SECTIONS.len());
    let sections = tree
        .sections
        .iter()
        .zip(SECTIONS)
        .map(|(node, (_, first, _, tokens))| SectionDraft {
            name: node.name.clone(),
            depth: node.depth,
            byte_range: node.body.clone(),
            tldr: Some(first.to_string()),
            token_count: *tokens,
        })
        .collect();

    let id = PaperId::arxiv(DEMO_ID).unwrap();
    let publish_at: Timestamp = "2024-09-09T00:00:00".parse().unwrap();
    let now: Timestamp = "2025-01-15T00:00:00".parse().unwrap();
    let trending = aggregate_trending(&id, social, None, now).ok();
    let draft = RecordDraft {
        paper_id: id,
        src_url: format!("https://arxiv.org/pdf/{DEMO_ID}"),
        title: "MemoRAG: Boosting Long Context Processing with Global Memory-Enhanced Retrieval Augmentation".into(),
        abstract_text: "Long inputs strain the context window of large language models. MemoRAG builds a global memory \
                        of the whole input, lets that memory draft clues, and retrieves evidence guided by those clues. \
                        Across long-context benchmarks this global memory approach improves answer quality over \
                        standard retrieval augmentation."
            .into(),
        authors: vec![AuthorEntry {
            name: "Hongjin Qian".into(),
            orgs: vec!["Beijing Academy of Artificial Intelligence".into()],
        }],
        categories: vec!["cs.CL".into(), "cs.AI".into()],
        publish_at,
        update_at: publish_at,
        body,
        sections,
        token_count: 23311,
        tldr: Some(
            "[research paper] MemoRAG builds a global memory over a long input and uses clues drafted from it to guide retrieval."
                .into(),
        ),
        keywords: vec![
            "global memory augmentation".into(),
            "long-context retrieval".into(),
            "retrieval-augmented generation".into(),
            "clue generation".into(),
            "memory model".into(),
        ],
        resource_links: vec![ResourceLink { url: "https://github.com/qhjqhj00/MemoRAG".into(), kind: ResourceKind::Github }],
        external: Some(ExternalContext {
            citations: Some(63),
            venue: Some("The Web Conference".into()),
            journal_name: Some("Proceedings of the ACM on Web Conference 2025".into()),
            linked_source: "fixture-scholarly".into(),
        }),
        trending,
        provenance: Provenance {
            source_type: SourceType::Html,
            extraction_time: now,
            update_time: publish_at,
            pipeline_version: paperdesk_core::ingest::PIPELINE_VERSION.into(),
        },
    };
    PaperRecord::new(draft).expect("demo record is valid")
}
