//! Asymmetric back-translation rollouts: K documentation samples per snippet,
//! one reconstruction per surviving doc, and the rewards for both directions.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{
    ensure_cardinality, Backend, BackendError, GenRequest, RequestFormat, DEFAULT_MAX_TOKENS,
};
use crate::buffer::{BufferEntry, Direction};
use crate::docgate::{gate, DocVerdict, GatedDoc};
use crate::lex::CodeSnippet;
use crate::prompt::{render_code_prompt, render_doc_prompt};
use crate::similarity::{similarity_weighted, SimilarityError, SimilarityScore, SimilarityWeights};

pub const DEFAULT_K_SAMPLES: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RolloutError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("expected {expected} item(s) for the valid docs, got {got}")]
    CardinalityMismatch { expected: usize, got: usize },
    #[error("k_samples must be at least 1")]
    NoSamples,
    #[error("code snippet is blank")]
    BlankSnippet,
    #[error("corpus is empty")]
    EmptyCorpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub temp_stage1: f64,
    pub temp_stage2: f64,
    pub max_tokens_stage1: u32,
    pub max_tokens_stage2: u32,
    pub stage1_format: RequestFormat,
    pub stage2_format: RequestFormat,
    pub weights: SimilarityWeights,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            temp_stage1: 1.0,
            temp_stage2: 1.0,
            max_tokens_stage1: DEFAULT_MAX_TOKENS,
            max_tokens_stage2: DEFAULT_MAX_TOKENS,
            stage1_format: RequestFormat::Chat,
            stage2_format: RequestFormat::Completion,
            weights: SimilarityWeights::default(),
        }
    }
}

/// Uniform, seed-replayable draws from a code corpus.
#[derive(Debug, Clone)]
pub struct CorpusSampler {
    snippets: Vec<CodeSnippet>,
    rng: ChaCha8Rng,
}

impl CorpusSampler {
    pub fn new(snippets: Vec<CodeSnippet>, seed: u64) -> Result<Self, RolloutError> {
        if snippets.is_empty() {
            return Err(RolloutError::EmptyCorpus);
        }
        if snippets.iter().any(CodeSnippet::is_blank) {
            return Err(RolloutError::BlankSnippet);
        }
        Ok(Self {
            snippets,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn snippets(&self) -> &[CodeSnippet] {
        &self.snippets
    }

    /// Index of the next snippet.
    pub fn draw_index(&mut self) -> usize {
        self.rng.random_range(0..self.snippets.len())
    }

    pub fn draw(&mut self) -> &CodeSnippet {
        let i = self.draw_index();
        &self.snippets[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Code2DocTrajectory {
    /// The stage-1 prompt the doc was sampled from.
    pub prompt: String,
    pub doc: GatedDoc,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Doc2CodeTrajectory {
    /// Position of the source doc within the group's `code2doc` list.
    pub doc_index: usize,
    pub doc: GatedDoc,
    /// Raw stage-2 output.
    pub continuation: String,
    /// Signature block of the doc followed by the continuation.
    pub reconstruction: CodeSnippet,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup {
    pub code: CodeSnippet,
    pub k_samples: usize,
    pub code2doc: Vec<Code2DocTrajectory>,
    pub doc2code: Vec<Doc2CodeTrajectory>,
}

impl RolloutGroup {
    /// True when every trajectory of both directions earned exactly zero.
    pub fn all_zero(&self) -> bool {
        self.code2doc.iter().all(|t| t.reward == 0.0)
            && self.doc2code.iter().all(|t| t.reward == 0.0)
    }

    /// Buffer entries in store order: each doc's stage-1 entry, followed by
    /// its stage-2 entry when it has one.
    pub fn buffer_entries(&self, group_id: u64) -> Vec<BufferEntry> {
        let mut out = Vec::with_capacity(self.code2doc.len() + self.doc2code.len());
        let mut stage2 = self.doc2code.iter().peekable();
        for (k, t) in self.code2doc.iter().enumerate() {
            out.push(BufferEntry::new(
                Direction::Code2Doc,
                &t.prompt,
                t.doc.raw(),
                t.reward,
                group_id,
            ));
            if let Some(d) = stage2.next_if(|d| d.doc_index == k) {
                let input = d.doc.rewritten().unwrap_or_default();
                out.push(BufferEntry::new(
                    Direction::Doc2Code,
                    input,
                    &d.continuation,
                    d.reward,
                    group_id,
                ));
            }
        }
        out
    }
}

/// A group whose docs are gated and reconstructed but not yet scored.
#[derive(Debug, Clone, PartialEq)]
pub struct PendingGroup {
    pub code: CodeSnippet,
    pub prompt: String,
    pub docs: Vec<GatedDoc>,
    /// One `(continuation, reconstruction)` per non-Invalid doc, in doc order.
    pub reconstructions: Vec<(String, CodeSnippet)>,
}

/// Per-doc rewards: the stage-1 reward and, for valid docs, the stage-2 reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardPair {
    pub code2doc: f64,
    pub doc2code: Option<f64>,
}

/// Reward arithmetic for one group. `similarities` holds one score per
/// non-Invalid verdict, in order. Invalid docs earn 0 and no stage-2 reward;
/// valid docs earn `sim · format_reward` for stage 1 and `sim` for stage 2.
pub fn reward_table(
    verdicts: &[DocVerdict],
    similarities: &[SimilarityScore],
) -> Result<Vec<RewardPair>, RolloutError> {
    let valid = verdicts.iter().filter(|v| v.is_valid()).count();
    if valid != similarities.len() {
        return Err(RolloutError::CardinalityMismatch {
            expected: valid,
            got: similarities.len(),
        });
    }
    let mut sims = similarities.iter();
    Ok(verdicts
        .iter()
        .map(|&verdict| match verdict {
            DocVerdict::Invalid => RewardPair {
                code2doc: 0.0,
                doc2code: None,
            },
            _ => {
                let sim = sims.next().map_or(0.0, |s| s.value());
                RewardPair {
                    code2doc: sim * verdict.format_reward(),
                    doc2code: Some(sim),
                }
            }
        })
        .collect())
}

pub fn assign_rewards(
    pending: PendingGroup,
    similarities: &[SimilarityScore],
) -> Result<RolloutGroup, RolloutError> {
    let verdicts: Vec<DocVerdict> = pending.docs.iter().map(GatedDoc::verdict).collect();
    let table = reward_table(&verdicts, similarities)?;
    if pending.reconstructions.len() != similarities.len() {
        return Err(RolloutError::CardinalityMismatch {
            expected: similarities.len(),
            got: pending.reconstructions.len(),
        });
    }
    let k_samples = pending.docs.len();
    let mut code2doc = Vec::with_capacity(k_samples);
    let mut doc2code = Vec::with_capacity(similarities.len());
    let mut recon = pending.reconstructions.into_iter();
    for (doc_index, (doc, rewards)) in pending.docs.into_iter().zip(table).enumerate() {
        if let Some(reward) = rewards.doc2code {
            if let Some((continuation, reconstruction)) = recon.next() {
                doc2code.push(Doc2CodeTrajectory {
                    doc_index,
                    doc: doc.clone(),
                    continuation,
                    reconstruction,
                    reward,
                });
            }
        }
        code2doc.push(Code2DocTrajectory {
            prompt: pending.prompt.clone(),
            doc,
            reward: rewards.code2doc,
        });
    }
    Ok(RolloutGroup {
        code: pending.code,
        k_samples,
        code2doc,
        doc2code,
    })
}

/// Candidate function: the doc's signature block with the stage-2 output appended.
pub fn reconstruct(doc: &GatedDoc, continuation: &str) -> Option<CodeSnippet> {
    let mut source = String::from(doc.signature_block()?);
    source.push_str(continuation);
    Some(CodeSnippet::new(source, doc.language()))
}

/// Runs one group: K stage-1 samples in a single request, gating, one stage-2
/// sample per surviving doc, similarity scoring and reward assignment.
pub fn run_rollout<B: Backend + ?Sized>(
    code: &CodeSnippet,
    k_samples: usize,
    backend: &B,
    config: &RolloutConfig,
) -> Result<RolloutGroup, RolloutError> {
    if k_samples == 0 {
        return Err(RolloutError::NoSamples);
    }
    if code.is_blank() {
        return Err(RolloutError::BlankSnippet);
    }
    let prompt = render_doc_prompt(code);
    let request = GenRequest::new(prompt.clone(), k_samples)
        .with_temperature(config.temp_stage1)
        .with_max_tokens(config.max_tokens_stage1)
        .with_format(config.stage1_format);
    let response = backend.generate(&request)?;
    ensure_cardinality(&response, k_samples)?;

    let docs: Vec<GatedDoc> = response
        .completions
        .iter()
        .map(|raw| gate(raw, code.language))
        .collect();

    let mut reconstructions = Vec::new();
    let mut similarities = Vec::new();
    for doc in docs.iter().filter(|d| d.verdict().is_valid()) {
        let Ok(prefix) = render_code_prompt(doc) else {
            continue;
        };
        let request = GenRequest::new(prefix, 1)
            .with_temperature(config.temp_stage2)
            .with_max_tokens(config.max_tokens_stage2)
            .with_format(config.stage2_format);
        let response = backend.generate(&request)?;
        ensure_cardinality(&response, 1)?;
        let continuation = response.completions.into_iter().next().unwrap_or_default();
        let Some(candidate) = reconstruct(doc, &continuation) else {
            continue;
        };
        similarities.push(similarity_weighted(code, &candidate, config.weights)?);
        reconstructions.push((continuation, candidate));
    }

    assign_rewards(
        PendingGroup {
            code: code.clone(),
            prompt,
            docs,
            reconstructions,
        },
        &similarities,
    )
}
