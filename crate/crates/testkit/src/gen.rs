//! Synthetic paper generator.

use std::collections::HashSet;

use paperdesk_core::ingest::MetadataEntry;
use paperdesk_core::record::AuthorEntry;
use paperdesk_core::{PaperId, Timestamp};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Topic {
    pub name: &'static str,
    pub categories: &'static [&'static str],
    pub terms: &'static [&'static str],
}

pub const TOPICS: &[Topic] = &[
    Topic {
        name: "retrieval augmentation",
        categories: &["cs.CL", "cs.IR"],
        terms: &[
            "retrieval",
            "passage",
            "corpus",
            "reranking",
            "evidence",
            "query",
        ],
    },
    Topic {
        name: "graph representation learning",
        categories: &["cs.LG"],
        terms: &[
            "graph",
            "node",
            "message",
            "neighborhood",
            "embedding",
            "edge",
        ],
    },
    Topic {
        name: "protein structure modeling",
        categories: &["q-bio.QM", "cs.LG"],
        terms: &[
            "protein",
            "residue",
            "folding",
            "structure",
            "contact",
            "sequence",
        ],
    },
    Topic {
        name: "image segmentation",
        categories: &["cs.CV"],
        terms: &[
            "pixel",
            "mask",
            "segmentation",
            "boundary",
            "region",
            "encoder",
        ],
    },
    Topic {
        name: "reinforcement learning",
        categories: &["cs.LG", "cs.AI"],
        terms: &[
            "policy",
            "reward",
            "agent",
            "rollout",
            "value",
            "exploration",
        ],
    },
    Topic {
        name: "speech recognition",
        categories: &["eess.AS", "cs.CL"],
        terms: &[
            "acoustic",
            "phoneme",
            "decoder",
            "utterance",
            "spectrogram",
            "speaker",
        ],
    },
    Topic {
        name: "time series forecasting",
        categories: &["stat.ML", "cs.LG"],
        terms: &["horizon", "seasonal", "forecast", "lag", "trend", "series"],
    },
    Topic {
        name: "code generation",
        categories: &["cs.SE", "cs.CL"],
        terms: &[
            "program",
            "synthesis",
            "compiler",
            "repository",
            "function",
            "test",
        ],
    },
    Topic {
        name: "recommender systems",
        categories: &["cs.IR"],
        terms: &[
            "user",
            "item",
            "interaction",
            "ranking",
            "preference",
            "session",
        ],
    },
    Topic {
        name: "causal inference",
        categories: &["stat.ME", "stat.ML"],
        terms: &[
            "treatment",
            "confounder",
            "outcome",
            "effect",
            "instrument",
            "estimator",
        ],
    },
    Topic {
        name: "quantum chemistry",
        categories: &["physics.chem-ph"],
        terms: &[
            "orbital", "electron", "energy", "molecule", "basis", "density",
        ],
    },
    Topic {
        name: "long-context modeling",
        categories: &["cs.CL", "cs.AI"],
        terms: &[
            "context",
            "memory",
            "attention",
            "window",
            "token",
            "document",
        ],
    },
];

pub const METRICS: &[&str] = &[
    "accuracy",
    "F1 score",
    "recall@10",
    "BLEU score",
    "exact match",
    "AUROC",
];

const SYLLABLES: &[&str] = &[
    "va", "lor", "ke", "tri", "mon", "zu", "pha", "rel", "dix", "quo", "ne", "sa", "bri", "tor",
    "gal", "ven", "mi", "ox", "ra", "lu", "pe", "dor", "fi", "nax",
];
const GIVEN: &[&str] = &[
    "Alina", "Bruno", "Chen", "Dara", "Emeka", "Farah", "Goran", "Hana", "Ivo", "Jun", "Keira",
    "Luis", "Mei", "Nils", "Olu", "Priya", "Quinn", "Rosa", "Sami", "Tomas",
];
const FAMILY: &[&str] = &[
    "Abara",
    "Berg",
    "Castillo",
    "Dube",
    "Eriksen",
    "Fujita",
    "Gallo",
    "Haddad",
    "Ivanova",
    "Jensen",
    "Kowal",
    "Lindqvist",
    "Moreau",
    "Nakamura",
    "Okafor",
    "Petrov",
    "Quispe",
    "Rossi",
    "Sato",
    "Tanaka",
];
const ORGS: &[&str] = &[
    "Northfield Institute of Technology",
    "Lakeshore University",
    "Meridian Research Lab",
    "Eastbrook College",
    "Harbor AI Institute",
];
const GENERIC: &[&str] = &[
    "framework",
    "module",
    "baseline",
    "objective",
    "representation",
    "pipeline",
    "component",
    "variant",
    "procedure",
    "estimate",
    "schedule",
    "layer",
];
const ADJ: &[&str] = &[
    "robust",
    "efficient",
    "scalable",
    "lightweight",
    "hierarchical",
    "adaptive",
    "modular",
    "principled",
    "stable",
    "compact",
];
const VERBS: &[&str] = &[
    "improves",
    "stabilizes",
    "simplifies",
    "extends",
    "regularizes",
    "accelerates",
    "constrains",
    "summarizes",
];

/// One generated arXiv or PMC paper with the facts planted in its text.
#[derive(Debug, Clone)]
pub struct FixturePaper {
    pub meta: MetadataEntry,
    pub markdown: String,
    pub html: Option<String>,
    pub topic: usize,
    pub method: String,
    pub dataset: String,
    pub metric: String,
    /// Main result, as printed in the results section.
    pub value: String,
    pub repo_url: Option<String>,
    /// Extra abstract sentence planted for search tasks.
    pub planted_phrase: Option<String>,
}

pub(crate) struct Names {
    used: HashSet<String>,
}

impl Names {
    pub(crate) fn new() -> Self {
        Names {
            used: HashSet::new(),
        }
    }

    fn fresh(&mut self, rng: &mut ChaCha8Rng, parts: usize) -> String {
        loop {
            let mut s = String::new();
            for _ in 0..parts {
                s.push_str(SYLLABLES.choose(rng).unwrap());
            }
            let mut c = s.chars();
            let name: String = c.next().unwrap().to_uppercase().chain(c).collect();
            if self.used.insert(name.to_lowercase()) {
                return name;
            }
        }
    }

    pub(crate) fn method(&mut self, rng: &mut ChaCha8Rng) -> String {
        self.fresh(rng, 3)
    }

    pub(crate) fn dataset(&mut self, rng: &mut ChaCha8Rng) -> String {
        format!("{}-Bench", self.fresh(rng, 2))
    }
}

pub(crate) fn sentence(rng: &mut ChaCha8Rng, topic: &Topic) -> String {
    let t = *topic.terms.choose(rng).unwrap();
    let t2 = *topic.terms.choose(rng).unwrap();
    let g = *GENERIC.choose(rng).unwrap();
    let g2 = *GENERIC.choose(rng).unwrap();
    let a = *ADJ.choose(rng).unwrap();
    let v = *VERBS.choose(rng).unwrap();
    let n = rng.random_range(2..9);
    match rng.random_range(0..8) {
        0 => format!("The {a} {g} {v} the {t} {g2} across {n} settings."),
        1 => format!("We observe that the {t} {g} remains {a} when the {t2} budget grows."),
        2 => format!("Prior work treats {t} and {t2} separately, which limits the {a} {g}."),
        3 => format!("In practice, the {g} relies on a {a} estimate of each {t}."),
        4 => format!("A {a} {t} {g} {v} training without extra {t2} supervision."),
        5 => format!("Each {t} is mapped to a {g} that {v} the downstream {t2} {g2}."),
        6 => format!("Ablating the {t} {g} lowers quality in {n} of the studied cases."),
        _ => format!("The {t2} {g2} is computed once and reused by every {a} {g}."),
    }
}

fn paragraph(rng: &mut ChaCha8Rng, topic: &Topic, sentences: usize) -> String {
    (0..sentences)
        .map(|_| sentence(rng, topic))
        .collect::<Vec<_>>()
        .join(" ")
}

fn filler(rng: &mut ChaCha8Rng, topic: &Topic, paragraphs: usize) -> String {
    (0..paragraphs)
        .map(|_| {
            let n = rng.random_range(4..8);
            paragraph(rng, topic, n)
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

pub(crate) struct PaperSpec {
    pub id: PaperId,
    pub topic: usize,
    pub publish_at: Timestamp,
    pub method: String,
    pub dataset: String,
}

pub(crate) fn generate_paper(rng: &mut ChaCha8Rng, spec: PaperSpec) -> FixturePaper {
    let topic = &TOPICS[spec.topic];
    let method = spec.method;
    let dataset = spec.dataset;
    let metric = METRICS.choose(rng).unwrap().to_string();
    let value = format!("{:.1}", rng.random_range(400..950) as f64 / 10.0);
    let baseline = format!("{:.1}", rng.random_range(200..399) as f64 / 10.0);
    let aux = format!("{:.1}", rng.random_range(200..399) as f64 / 10.0);
    let adj = *ADJ.choose(rng).unwrap();
    let g = *GENERIC.choose(rng).unwrap();
    let t0 = topic.terms[0];
    let t1 = topic.terms[1];

    let title = format!(
        "{method}: {} {} for {}",
        capitalize(adj),
        capitalize(g),
        title_case(topic.name)
    );
    let abstract_text = format!(
        "{method} is a {adj} {g} for {}. {} {} Experiments on {dataset} show consistent gains in {metric}.",
        topic.name,
        sentence(rng, topic),
        sentence(rng, topic),
    );

    let repo_url = rng.random_bool(0.5).then(|| {
        let owner = format!("{}-lab", method.to_lowercase());
        format!("https://github.com/{owner}/{method}")
    });
    let code_line = match &repo_url {
        Some(u) => format!("Code is available at {u}."),
        None => "Our implementation builds on https://github.com/pytorch/pytorch.".to_string(),
    };

    let mut md = String::new();
    md.push_str("Preprint. Under review.\n\n");
    md.push_str(&format!(
        "# 1. Introduction\n\n{method} addresses {} with a {adj} {g}. {}\n\n{}\n\n",
        topic.name,
        paragraph(rng, topic, 3),
        filler(rng, topic, 8)
    ));
    md.push_str(&format!(
        "# 2. Related Work\n\nResearch on {} spans {t0} and {t1} methods. {}\n\n{}\n\n",
        topic.name,
        paragraph(rng, topic, 3),
        filler(rng, topic, 7)
    ));
    md.push_str(&format!(
        "# 3. Method\n\n{method} combines a {adj} {t0} encoder with a {t1} objective.\n\n\
         ## 3.1 Architecture\n\nThe architecture stacks a {t0} {g} on a shared {t1} layer. {}\n\n{}\n\n\
         ## 3.2 Training\n\nTraining alternates between {t0} and {t1} updates. {}\n\n{}\n\n",
        paragraph(rng, topic, 3),
        filler(rng, topic, 6),
        paragraph(rng, topic, 3),
        filler(rng, topic, 6)
    ));
    md.push_str(&format!(
        "# 4. Experimental Setup\n\nThis section lists datasets, baselines and training details. {}\n\n{}\n\n",
        paragraph(rng, topic, 3),
        filler(rng, topic, 6)
    ));
    md.push_str(&format!(
        "# 5. Results\n\nWe report {metric} on {dataset} against five baselines. {}\n\n\
         On {dataset}, {method} reaches a {metric} of {value}, ahead of the strongest baseline at {baseline}. \
         On the auxiliary benchmarks, it reaches a {metric} of {aux}.\n\n{}\n\n",
        paragraph(rng, topic, 2),
        filler(rng, topic, 6)
    ));
    md.push_str(&format!(
        "# 6. Conclusion\n\n{method} shows that a {adj} {t0} {g} is practical. {code_line} {}\n",
        paragraph(rng, topic, 3)
    ));

    let authors = (0..rng.random_range(2..5))
        .map(|_| AuthorEntry {
            name: format!(
                "{} {}",
                GIVEN.choose(rng).unwrap(),
                FAMILY.choose(rng).unwrap()
            ),
            orgs: vec![ORGS.choose(rng).unwrap().to_string()],
        })
        .collect();
    let update_at = spec.publish_at.plus_secs(86_400 * rng.random_range(0..20));
    let meta = MetadataEntry {
        src_url: spec.id.landing_url(),
        paper_id: spec.id,
        title,
        abstract_text,
        authors,
        categories: topic.categories.iter().map(|c| c.to_string()).collect(),
        publish_at: spec.publish_at,
        update_at,
    };
    FixturePaper {
        meta,
        markdown: md,
        html: None,
        topic: spec.topic,
        method,
        dataset,
        metric,
        value,
        repo_url,
        planted_phrase: None,
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn title_case(s: &str) -> String {
    s.split(' ').map(capitalize).collect::<Vec<_>>().join(" ")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Wraps the markdown's headings and paragraphs in a page layout with
/// navigation and footer boilerplate.
pub fn render_html(title: &str, markdown: &str) -> String {
    let mut body = String::new();
    for block in markdown.split("\n\n") {
        let block = block.trim();
        if block.is_empty() {
            continue;
        }
        let hashes = block.chars().take_while(|c| *c == '#').count();
        if (1..=6).contains(&hashes) && block[hashes..].starts_with(' ') {
            let text = escape(block[hashes..].trim());
            body.push_str(&format!("<h{hashes}>{text}</h{hashes}>\n"));
        } else {
            body.push_str(&format!("<p>{}</p>\n", escape(block)));
        }
    }
    format!(
        "<!DOCTYPE html>\n<html><head><title>{t}</title></head><body>\n\
         <nav class=\"navbar\"><a href=\"/\">Home</a> | <a href=\"/list\">Listing</a></nav>\n\
         <header><div class=\"ltx_page_header\">{t}</div></header>\n\
         <main><article class=\"ltx_document\">\n{body}</article></main>\n\
         <footer>Rendered from source. Terms of use apply.</footer>\n</body></html>\n",
        t = escape(title),
    )
}
