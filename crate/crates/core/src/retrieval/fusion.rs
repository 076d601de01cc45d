use std::collections::HashMap;

use crate::id::PaperId;

pub const RRF_K: f64 = 60.0;

/// Reciprocal-rank fusion: each document scores Σ 1/(k + rank) over the
/// rankings it appears in (ranks 1-based). Sorted by score descending, then
/// id ascending.
pub fn reciprocal_rank_fusion(rankings: &[&[PaperId]], k: f64) -> Vec<(PaperId, f64)> {
    let mut scores: HashMap<&PaperId, f64> = HashMap::new();
    for ranking in rankings {
        for (i, id) in ranking.iter().enumerate() {
            *scores.entry(id).or_insert(0.0) += 1.0 / (k + (i + 1) as f64);
        }
    }
    let mut fused: Vec<(PaperId, f64)> =
        scores.into_iter().map(|(id, s)| (id.clone(), s)).collect();
    sort_ranking(&mut fused);
    fused
}

/// Scores equal to this resolution count as ties. Mathematically equal
/// scores (e.g. cosines of different vectors) can differ in the last bits.
pub const SCORE_RESOLUTION: f64 = 1e-9;

fn score_key(s: f64) -> i64 {
    (s / SCORE_RESOLUTION).round() as i64
}

/// Score descending, ties by id ascending.
pub fn sort_ranking(r: &mut [(PaperId, f64)]) {
    r.sort_by(|a, b| {
        score_key(b.1)
            .cmp(&score_key(a.1))
            .then_with(|| a.0.cmp(&b.0))
    });
}
