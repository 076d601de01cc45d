//! Additive enrichment of assembled records: summaries, keywords,
//! affiliations, repository links, external context, attention signals and
//! budget counts. Each step degrades independently; a failing dependency
//! leaves its fields unset (or at their previous value) and never blocks
//! publication.

pub mod external;
pub mod generator;
pub mod links;

use std::sync::Arc;

use thiserror::Error;

pub use external::{
    aggregate_trending, fetch_external_context, FixtureScholarly, FixtureSocial, ScholarlyClient,
    ScholarlyRecord, SocialPost, SocialSearch,
};
pub use generator::{
    generate_summaries, GeneratorOutput, GeneratorRequest, GeneratorTask, ReferenceGenerator,
    SubprocessGenerator, Summaries, TextGenerator, DEFAULT_CONTEXT_TOKENS,
};
pub use links::{
    extract_resource_links, validate_resource_link, Denylist, ResourceCandidate, Validation,
};

use crate::record::{BudgetHints, PaperRecord};
use crate::time::Timestamp;
use crate::tokens::{TokenEstimator, WordPunctEstimator};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnrichError {
    #[error("generator unavailable: {0}")]
    GeneratorUnavailable(String),
    #[error("upstream unavailable: {0}")]
    UpstreamUnavailable(String),
}

/// Budget counts recomputed from the body with `estimator`.
pub fn compute_budget_hints(
    record: &PaperRecord,
    estimator: &dyn TokenEstimator,
    preview_len: usize,
) -> BudgetHints {
    let total_chars = record.body().chars().count();
    BudgetHints {
        total_token_count: estimator.estimate(record.body()),
        total_chars,
        per_section_tokens: record
            .sections()
            .iter()
            .map(|s| estimator.estimate(s.body()))
            .collect(),
        is_truncatable: total_chars > preview_len,
    }
}

#[derive(Debug, Clone, Default)]
pub struct EnrichReport {
    pub warnings: Vec<String>,
    /// Link candidates the validator could not judge this run.
    pub pending_links: Vec<ResourceCandidate>,
}

#[derive(Clone)]
pub struct Enricher {
    pub generator: Arc<dyn TextGenerator>,
    pub validator: Arc<dyn TextGenerator>,
    pub estimator: Arc<dyn TokenEstimator>,
    pub denylist: Denylist,
    pub scholarly: Option<Arc<dyn ScholarlyClient>>,
    pub social: Option<Arc<dyn SocialSearch>>,
    pub context_tokens: usize,
}

impl Default for Enricher {
    fn default() -> Self {
        Self {
            generator: Arc::new(ReferenceGenerator),
            validator: Arc::new(ReferenceGenerator),
            estimator: Arc::new(WordPunctEstimator),
            denylist: Denylist::default(),
            scholarly: None,
            social: None,
            context_tokens: DEFAULT_CONTEXT_TOKENS,
        }
    }
}

impl Enricher {
    /// Runs every enrichment step. `previous` is the stored version of the
    /// same paper, used to carry values across transient outages.
    pub fn enrich(
        &self,
        record: &mut PaperRecord,
        previous: Option<&PaperRecord>,
        now: Timestamp,
    ) -> EnrichReport {
        let mut report = EnrichReport::default();
        record.recount_tokens(self.estimator.as_ref());

        if let Err(e) = generate_summaries(
            record,
            self.generator.as_ref(),
            self.estimator.as_ref(),
            self.context_tokens,
        ) {
            tracing::warn!(paper = %record.paper_id(), error = %e, "summaries skipped");
            report.warnings.push(format!("summaries: {e}"));
            if let Some(prev) = previous {
                record.set_tldr(prev.tldr().map(str::to_string));
                record.set_keywords(prev.keywords().to_vec());
                if prev
                    .sections()
                    .iter()
                    .map(|s| s.name())
                    .eq(record.sections().iter().map(|s| s.name()))
                {
                    record.set_section_tldrs(
                        prev.sections()
                            .iter()
                            .map(|s| s.tldr().map(str::to_string))
                            .collect(),
                    );
                }
            }
        }

        let mut accepted = Vec::new();
        for mut cand in extract_resource_links(record.body(), &self.denylist) {
            cand.validated = validate_resource_link(
                &cand,
                record.title(),
                record.abstract_text(),
                self.validator.as_ref(),
            );
            match cand.validated {
                Validation::Accepted => accepted.push(cand.to_link()),
                Validation::Rejected => {}
                Validation::Pending => {
                    if let Some(old) =
                        previous.and_then(|p| p.resource_links().iter().find(|l| l.url == cand.url))
                    {
                        accepted.push(old.clone());
                    }
                    report.pending_links.push(cand);
                }
            }
        }
        if !report.pending_links.is_empty() {
            report.warnings.push(format!(
                "{} link(s) pending validation",
                report.pending_links.len()
            ));
        }
        record.set_resource_links(accepted);

        if let Some(client) = &self.scholarly {
            match fetch_external_context(record.paper_id(), client.as_ref()) {
                Ok(ctx) => record.set_external(ctx),
                Err(e) => {
                    report.warnings.push(format!("external context: {e}"));
                    record.set_external(previous.and_then(|p| p.external().cloned()));
                }
            }
        } else if let Some(prev) = previous {
            record.set_external(prev.external().cloned());
        }

        let prev_trending = previous.and_then(|p| p.trending());
        if let Some(social) = &self.social {
            match aggregate_trending(record.paper_id(), social.as_ref(), prev_trending, now) {
                Ok(t) => record.set_trending(Some(t)),
                Err(e) => {
                    report.warnings.push(format!("trending: {e}"));
                    record.set_trending(prev_trending.cloned());
                }
            }
        } else {
            record.set_trending(prev_trending.cloned());
        }
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::tests::sample_draft;
    use crate::record::{ExternalContext, TrendingSignal};

    struct Down;
    impl TextGenerator for Down {
        fn generate(&self, _: &GeneratorRequest) -> Result<GeneratorOutput, EnrichError> {
            Err(EnrichError::GeneratorUnavailable("down".into()))
        }
    }
    impl ScholarlyClient for Down {
        fn provider(&self) -> &str {
            "down"
        }
        fn lookup(&self, _: &crate::PaperId) -> Result<Option<ScholarlyRecord>, EnrichError> {
            Err(EnrichError::UpstreamUnavailable("down".into()))
        }
    }
    impl SocialSearch for Down {
        fn search(&self, _: &str) -> Result<Vec<SocialPost>, EnrichError> {
            Err(EnrichError::UpstreamUnavailable("down".into()))
        }
    }

    fn with_link() -> PaperRecord {
        let mut d = sample_draft();
        d.title = "Widget: things".into();
        d.body.push_str(
            "\n\nCode: https://github.com/acme/widget and https://github.com/pytorch/pytorch.",
        );
        let len = d.body.len();
        d.sections.last_mut().unwrap().byte_range.end = len;
        PaperRecord::new(d).unwrap()
    }

    #[test]
    fn full_enrichment_with_reference_components() {
        let mut r = with_link();
        let e = Enricher::default();
        let rep = e.enrich(&mut r, None, Timestamp::from_unix(0));
        assert!(rep.warnings.is_empty(), "{:?}", rep.warnings);
        assert!(r.tldr().unwrap().starts_with("[research paper] "));
        assert_eq!(r.github_url(), Some("https://github.com/acme/widget"));
        assert_eq!(r.resource_links().len(), 1);
        let hints = compute_budget_hints(&r, &WordPunctEstimator, 10);
        assert_eq!(hints, r.budget(10));
    }

    #[test]
    fn outages_keep_previous_values_and_still_publish() {
        let mut prev = with_link();
        Enricher::default().enrich(&mut prev, None, Timestamp::from_unix(0));
        prev.set_external(Some(ExternalContext {
            citations: Some(3),
            venue: None,
            journal_name: None,
            linked_source: "x".into(),
        }));
        prev.set_trending(Some(TrendingSignal {
            total_views: 7,
            total_likes: 1,
            total_reposts: 0,
            as_of: None,
        }));

        let e = Enricher {
            generator: Arc::new(Down),
            validator: Arc::new(Down),
            scholarly: Some(Arc::new(Down)),
            social: Some(Arc::new(Down)),
            ..Enricher::default()
        };
        let mut r = with_link();
        let rep = e.enrich(&mut r, Some(&prev), Timestamp::from_unix(0));
        assert_eq!(rep.pending_links.len(), 1);
        assert_eq!(r.tldr(), prev.tldr());
        assert_eq!(r.resource_links(), prev.resource_links());
        assert_eq!(r.external(), prev.external());
        assert_eq!(r.trending(), prev.trending());

        let mut fresh = with_link();
        let rep = e.enrich(&mut fresh, None, Timestamp::from_unix(0));
        assert!(rep.warnings.len() >= 3);
        assert!(
            fresh.tldr().is_none()
                && fresh.keywords().is_empty()
                && fresh.resource_links().is_empty()
        );
    }
}
