//! Hierarchical Bayesian estimation: model variants, log posterior,
//! No-U-Turn sampling, diagnostics and posterior summaries.

pub mod diagnostics;
pub mod draws;
pub mod dual;
pub mod nuts;
pub mod posterior;
pub mod summary;
pub mod transform;
pub mod variant;

pub use diagnostics::{ess_bulk, hdi, rhat};
pub use draws::{ChainMeta, DrawsMeta, DrawsReader, PosteriorDraws};
pub use nuts::{run_chain, run_chains, ChainOutput, LogDensity, SamplerConfig};
pub use posterior::{Posterior, PROB_FLOOR};
pub use summary::{
    extract_correlations, posterior_predictive, prob_statement, summarize, with_derived, CorrelationSummary,
    PredictiveConfig, PredictiveMode, PredictivePoint, SummaryRow,
};
pub use variant::{Layout, ModelSpec, Role, Variant};

use crate::error::Result;
use crate::simulate::ChoiceDataset;

/// Post-warmup divergence rate above which a fit carries a warning.
pub const DIVERGENCE_WARN_RATE: f64 = 0.10;

/// Fits `spec` to `data` and returns constrained draws with metadata.
pub fn sample(spec: ModelSpec, data: &ChoiceDataset, config: &SamplerConfig) -> Result<PosteriorDraws> {
    let post = Posterior::new(spec, data)?;
    sample_posterior(&post, config)
}

/// Runs the sampler on a prepared posterior.
pub fn sample_posterior(post: &Posterior, config: &SamplerConfig) -> Result<PosteriorDraws> {
    let chains = run_chains(post, config)?;
    let dim = post.dim();
    let mut values = Vec::with_capacity(config.chains * config.draws * dim);
    for c in &chains {
        for x in c.draws.chunks_exact(dim) {
            values.extend(post.constrain(x));
        }
    }

    let chain_meta: Vec<ChainMeta> = chains
        .iter()
        .map(|c| {
            let n = c.stats.len().max(1) as f64;
            ChainMeta {
                step_size: c.step_size,
                inv_metric_min: c.inv_metric.iter().copied().fold(f64::INFINITY, f64::min),
                inv_metric_max: c.inv_metric.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                divergences: c.divergences(),
                warmup_divergences: c.warmup_divergences,
                max_depth_hits: c.max_depth_hits(config.max_depth),
                mean_tree_depth: c.stats.iter().map(|s| s.tree_depth as f64).sum::<f64>() / n,
                mean_accept_stat: c.stats.iter().map(|s| s.accept_stat).sum::<f64>() / n,
            }
        })
        .collect();
    let divergent: usize = chain_meta.iter().map(|c| c.divergences).sum();
    let divergence_rate = divergent as f64 / (config.chains * config.draws) as f64;
    let mut warnings = Vec::new();
    if divergence_rate > DIVERGENCE_WARN_RATE {
        warnings.push(format!(
            "{:.1}% of post-warmup transitions diverged",
            100.0 * divergence_rate
        ));
    }
    let depth_hits: usize = chain_meta.iter().map(|c| c.max_depth_hits).sum();
    if depth_hits > 0 {
        warnings.push(format!("{depth_hits} transitions hit the maximum tree depth"));
    }

    let mut draws = PosteriorDraws::new(post.constrained_names(), config.chains, config.draws, values)?;
    draws.meta = Some(DrawsMeta {
        spec: *post.spec(),
        config: *config,
        participant_ids: post.participant_ids().to_vec(),
        groups: post.groups().to_vec(),
        n_records: post.n_records(),
        chains: chain_meta,
        divergence_rate,
        warnings,
    });
    Ok(draws)
}
