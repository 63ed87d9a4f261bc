//! A closed back-translation loop with a tabular policy standing in for the
//! language model.
//!
//! Each [`ToyTask`] offers a finite menu of raw documentation generations for
//! its target code and, for every doc that survives gating, a menu of
//! function-body continuations. The policy picks from these menus; everything
//! downstream of the choice (gating, reconstruction, similarity, rewards,
//! buffer, dynamic filtering, loss and gradient) is the production path.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{
    dynamic_filter, BufferError, Direction, ReplayBuffer, StatsScope, DEFAULT_CAPACITY, DEFAULT_EPS,
};
use crate::docgate::{gate, DocVerdict, GatedDoc};
use crate::lex::CodeSnippet;
use crate::optim::{
    gradient, loss_parts, step, ActionId, ContextId, OptimError, ReferencePolicy, ToyPolicy,
    UpdateBatch, UpdateItem, TOY_LEARNING_RATE,
};
use crate::prompt::render_doc_prompt;
use crate::rollout::{
    assign_rewards, reconstruct, PendingGroup, RolloutError, RolloutGroup, DEFAULT_K_SAMPLES,
};
use crate::similarity::{similarity_weighted, SimilarityError, SimilarityWeights};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToyError {
    #[error("no tasks given")]
    NoTasks,
    #[error("task {task}: {reason}")]
    BadTask { task: usize, reason: String },
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("trajectory does not belong to this world: {0}")]
    UnknownTrajectory(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyTask {
    pub target_code: CodeSnippet,
    /// Raw stage-1 generations the policy can choose from.
    pub doc_actions: Vec<String>,
    /// Stage-2 continuations, keyed by the index of a non-Invalid doc.
    pub code_actions: BTreeMap<usize, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub k_samples: usize,
    pub learning_rate: f64,
    pub kl_beta: f64,
    pub minibatch_size: usize,
    pub buffer_capacity: usize,
    pub eps_std: f64,
    pub stats_scope: StatsScope,
    pub weights: SimilarityWeights,
    /// Re-snapshot the KL reference every this many steps; 0 keeps it frozen.
    pub reference_refresh_steps: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            k_samples: DEFAULT_K_SAMPLES,
            learning_rate: TOY_LEARNING_RATE,
            kl_beta: 0.0,
            minibatch_size: 32,
            buffer_capacity: DEFAULT_CAPACITY,
            eps_std: DEFAULT_EPS,
            stats_scope: StatsScope::Buffer,
            weights: SimilarityWeights::default(),
            reference_refresh_steps: 0,
        }
    }
}

/// One line of the training-metrics log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub mean_reward_code2doc: f64,
    pub mean_reward_doc2code: f64,
    pub loss: f64,
    pub kl: f64,
    pub filtered_groups: usize,
}

#[derive(Debug, Clone)]
struct Context {
    input: String,
    actions: Vec<String>,
}

/// Context/action tables derived from a task set.
#[derive(Debug, Clone)]
pub struct ToyWorld {
    tasks: Vec<ToyTask>,
    contexts: Vec<Context>,
    by_input: BTreeMap<(Direction, String), ContextId>,
    stage1: Vec<ContextId>,
    /// Gated doc per (stage-1 context, action).
    gated: BTreeMap<(ContextId, ActionId), GatedDoc>,
}

impl ToyWorld {
    pub fn new(tasks: Vec<ToyTask>, weights: SimilarityWeights) -> Result<Self, ToyError> {
        if tasks.is_empty() {
            return Err(ToyError::NoTasks);
        }
        let mut world = Self {
            tasks: Vec::new(),
            contexts: Vec::new(),
            by_input: BTreeMap::new(),
            stage1: Vec::new(),
            gated: BTreeMap::new(),
        };
        for (i, task) in tasks.iter().enumerate() {
            world.add_task(i, task, weights)?;
        }
        world.tasks = tasks;
        Ok(world)
    }

    fn context_for(&mut self, direction: Direction, input: &str) -> ContextId {
        let key = (direction, String::from(input));
        if let Some(&id) = self.by_input.get(&key) {
            return id;
        }
        let id = self.contexts.len();
        self.contexts.push(Context {
            input: key.1.clone(),
            actions: Vec::new(),
        });
        self.by_input.insert(key, id);
        id
    }

    fn add_action(&mut self, ctx: ContextId, output: &str) -> ActionId {
        let actions = &mut self.contexts[ctx].actions;
        match actions.iter().position(|a| a == output) {
            Some(i) => i,
            None => {
                actions.push(output.into());
                actions.len() - 1
            }
        }
    }

    fn add_task(
        &mut self,
        index: usize,
        task: &ToyTask,
        weights: SimilarityWeights,
    ) -> Result<(), ToyError> {
        let bad = |reason: &str| ToyError::BadTask {
            task: index,
            reason: reason.into(),
        };
        if task.target_code.is_blank() {
            return Err(bad("target code is blank"));
        }
        let lang = task.target_code.language;
        let ctx1 = self.context_for(Direction::Code2Doc, &render_doc_prompt(&task.target_code));
        self.stage1.push(ctx1);
        let mut saw_invalid = false;
        let mut best = 0.0f64;
        for (d, raw) in task.doc_actions.iter().enumerate() {
            let doc = gate(raw, lang);
            let a1 = self.add_action(ctx1, raw);
            let continuations = task.code_actions.get(&d);
            match (doc.verdict(), continuations) {
                (DocVerdict::Invalid, None) => saw_invalid = true,
                (DocVerdict::Invalid, Some(_)) => {
                    return Err(bad("code actions attached to an Invalid doc"));
                }
                (_, None) => return Err(bad("a valid doc has no code actions")),
                (_, Some(list)) if list.is_empty() => {
                    return Err(bad("a valid doc has no code actions"))
                }
                (_, Some(list)) => {
                    let rewritten = doc.rewritten().unwrap_or_default();
                    let ctx2 = self.context_for(Direction::Doc2Code, rewritten);
                    for cont in list {
                        self.add_action(ctx2, cont);
                        if let Some(candidate) = reconstruct(&doc, cont) {
                            let s = similarity_weighted(&task.target_code, &candidate, weights)?;
                            best = best.max(s.value());
                        }
                    }
                }
            }
            self.gated.insert((ctx1, a1), doc);
        }
        if task
            .code_actions
            .keys()
            .any(|&k| k >= task.doc_actions.len())
        {
            return Err(bad("code actions reference a missing doc"));
        }
        if !saw_invalid {
            return Err(bad("no doc action gates as Invalid"));
        }
        if best < 1.0 {
            return Err(bad("no (doc, code) pair reconstructs the target exactly"));
        }
        Ok(())
    }

    pub fn tasks(&self) -> &[ToyTask] {
        &self.tasks
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn actions_per_context(&self) -> Vec<usize> {
        self.contexts.iter().map(|c| c.actions.len()).collect()
    }

    pub fn stage1_context(&self, task: usize) -> ContextId {
        self.stage1[task]
    }

    pub fn stage2_context(&self, doc: &GatedDoc) -> Option<ContextId> {
        self.by_input
            .get(&(Direction::Doc2Code, String::from(doc.rewritten()?)))
            .copied()
    }

    pub fn gated_doc(&self, context: ContextId, action: ActionId) -> Option<&GatedDoc> {
        self.gated.get(&(context, action))
    }

    pub fn action_text(&self, context: ContextId, action: ActionId) -> Option<&str> {
        self.contexts
            .get(context)?
            .actions
            .get(action)
            .map(String::as_str)
    }

    /// Maps a stored trajectory back to the policy's (context, action).
    pub fn locate(
        &self,
        direction: Direction,
        input: &str,
        output: &str,
    ) -> Option<(ContextId, ActionId)> {
        let ctx = *self.by_input.get(&(direction, String::from(input)))?;
        let action = self.contexts[ctx]
            .actions
            .iter()
            .position(|a| a == output)?;
        Some((ctx, action))
    }
}

fn sample_action<R: Rng + ?Sized>(
    policy: &ToyPolicy,
    ctx: ContextId,
    rng: &mut R,
) -> Result<ActionId, OptimError> {
    let probs = policy.probs(ctx)?;
    let dist = WeightedIndex::new(&probs).map_err(|_| OptimError::NonFiniteParameter(ctx))?;
    Ok(dist.sample(rng))
}

/// Outcome of one parameter update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutcome {
    pub filtered_groups: usize,
    pub loss: f64,
    pub kl: f64,
    pub updated: bool,
}

pub struct ToyTrainer {
    world: ToyWorld,
    policy: ToyPolicy,
    reference: ReferencePolicy,
    buffer: ReplayBuffer,
    config: ToyConfig,
    rng: ChaCha8Rng,
    next_group: u64,
    steps: usize,
}

impl ToyTrainer {
    pub fn new(tasks: Vec<ToyTask>, seed: u64, config: ToyConfig) -> Result<Self, ToyError> {
        if config.k_samples == 0 {
            return Err(RolloutError::NoSamples.into());
        }
        let world = ToyWorld::new(tasks, config.weights)?;
        let policy = ToyPolicy::uniform(&world.actions_per_context())?;
        let reference = policy.freeze();
        let buffer = ReplayBuffer::new(config.buffer_capacity)?
            .with_eps(config.eps_std)
            .with_scope(config.stats_scope);
        Ok(Self {
            world,
            policy,
            reference,
            buffer,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_group: 0,
            steps: 0,
        })
    }

    pub fn world(&self) -> &ToyWorld {
        &self.world
    }

    pub fn policy(&self) -> &ToyPolicy {
        &self.policy
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    /// Replaces the KL anchor with a snapshot of the current policy.
    pub fn refresh_reference(&mut self) {
        self.reference = self.policy.freeze();
    }

    /// Samples one rollout group for `task` from the current policy.
    pub fn rollout(&mut self, task: usize) -> Result<RolloutGroup, ToyError> {
        let target = self.world.tasks[task].target_code.clone();
        let ctx1 = self.world.stage1_context(task);
        let prompt = self.world.contexts[ctx1].input.clone();
        let mut docs = Vec::with_capacity(self.config.k_samples);
        let mut reconstructions = Vec::new();
        let mut sims = Vec::new();
        for _ in 0..self.config.k_samples {
            let a1 = sample_action(&self.policy, ctx1, &mut self.rng)?;
            let doc = self
                .world
                .gated_doc(ctx1, a1)
                .cloned()
                .ok_or_else(|| ToyError::UnknownTrajectory(prompt.clone()))?;
            if let Some(ctx2) = self.world.stage2_context(&doc) {
                let a2 = sample_action(&self.policy, ctx2, &mut self.rng)?;
                let cont = String::from(self.world.action_text(ctx2, a2).unwrap_or_default());
                if let Some(candidate) = reconstruct(&doc, &cont) {
                    sims.push(similarity_weighted(
                        &target,
                        &candidate,
                        self.config.weights,
                    )?);
                    reconstructions.push((cont, candidate));
                }
            }
            docs.push(doc);
        }
        let group = assign_rewards(
            PendingGroup {
                code: target,
                prompt,
                docs,
                reconstructions,
            },
            &sims,
        )?;
        Ok(group)
    }

    /// Filters `groups`, stores the survivors and takes one gradient step on a
    /// minibatch from the buffer. With no survivors the policy is untouched.
    pub fn update(&mut self, groups: Vec<RolloutGroup>) -> Result<UpdateOutcome, ToyError> {
        let total = groups.len();
        let kept = dynamic_filter(groups);
        let filtered_groups = total - kept.len();
        if kept.is_empty() {
            return Ok(UpdateOutcome {
                filtered_groups,
                loss: 0.0,
                kl: 0.0,
                updated: false,
            });
        }
        for group in &kept {
            self.buffer.push_group(group, self.next_group)?;
            self.next_group += 1;
        }
        let size = self.config.minibatch_size.min(self.buffer.len());
        let picked = self.buffer.sample_minibatch_with(size, &mut self.rng)?;
        let mut items = Vec::with_capacity(picked.len());
        for (entry, advantage) in picked {
            let (context, action) = self
                .world
                .locate(entry.direction, &entry.input, &entry.output)
                .ok_or_else(|| ToyError::UnknownTrajectory(entry.output.clone()))?;
            items.push(UpdateItem {
                direction: entry.direction,
                context,
                action,
                advantage,
            });
        }
        let batch = UpdateBatch::new(items)?;
        let parts = loss_parts(&batch, &self.policy, &self.reference, self.config.kl_beta)?;
        let grad = gradient(&batch, &self.policy, &self.reference, self.config.kl_beta)?;
        step(&mut self.policy, &grad, self.config.learning_rate)?;
        Ok(UpdateOutcome {
            filtered_groups,
            loss: parts.total,
            kl: parts.kl,
            updated: true,
        })
    }

    /// Draws a task, rolls it out, and updates.
    pub fn train_step(&mut self) -> Result<StepMetrics, ToyError> {
        let task = self.rng.random_range(0..self.world.tasks.len());
        let group = self.rollout(task)?;
        let mean = |xs: &mut dyn Iterator<Item = f64>| {
            let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        };
        let mean_reward_code2doc = mean(&mut group.code2doc.iter().map(|t| t.reward));
        let mean_reward_doc2code = mean(&mut group.doc2code.iter().map(|t| t.reward));
        let outcome = self.update(vec![group])?;
        let metrics = StepMetrics {
            step: self.steps,
            mean_reward_code2doc,
            mean_reward_doc2code,
            loss: outcome.loss,
            kl: outcome.kl,
            filtered_groups: outcome.filtered_groups,
        };
        self.steps += 1;
        let every = self.config.reference_refresh_steps;
        if every > 0 && self.steps.is_multiple_of(every) {
            self.refresh_reference();
        }
        Ok(metrics)
    }

    /// Total probability the stage-1 policy puts on Invalid docs, averaged
    /// over tasks.
    pub fn invalid_doc_mass(&self) -> Result<f64, ToyError> {
        let mut total = 0.0;
        for task in 0..self.world.tasks.len() {
            let ctx = self.world.stage1_context(task);
            let probs = self.policy.probs(ctx)?;
            total += probs
                .iter()
                .enumerate()
                .filter(|&(a, _)| {
                    self.world
                        .gated_doc(ctx, a)
                        .is_some_and(|d| d.verdict() == DocVerdict::Invalid)
                })
                .map(|(_, p)| p)
                .sum::<f64>();
        }
        Ok(total / self.world.tasks.len() as f64)
    }

    /// Exact expected (code2doc, doc2code) reward of the current policy,
    /// averaged uniformly over tasks. The doc2code expectation is conditional
    /// on the doc being valid.
    pub fn expected_rewards(&self) -> Result<(f64, f64), ToyError> {
        let mut c2d = 0.0;
        let mut d2c = 0.0;
        for (task, spec) in self.world.tasks.iter().enumerate() {
            let ctx1 = self.world.stage1_context(task);
            let p1 = self.policy.probs(ctx1)?;
            let mut valid_mass = 0.0;
            let mut d2c_task = 0.0;
            for (a1, p_doc) in p1.iter().enumerate() {
                let Some(doc) = self.world.gated_doc(ctx1, a1) else {
                    continue;
                };
                let Some(ctx2) = self.world.stage2_context(doc) else {
                    continue;
                };
                let p2 = self.policy.probs(ctx2)?;
                let mut sim = 0.0;
                for (a2, p_code) in p2.iter().enumerate() {
                    let cont = self.world.action_text(ctx2, a2).unwrap_or_default();
                    if let Some(candidate) = reconstruct(doc, cont) {
                        sim += p_code
                            * similarity_weighted(
                                &spec.target_code,
                                &candidate,
                                self.config.weights,
                            )?
                            .value();
                    }
                }
                c2d += p_doc * sim * doc.format_reward();
                d2c_task += p_doc * sim;
                valid_mass += p_doc;
            }
            if valid_mass > 0.0 {
                d2c += d2c_task / valid_mass;
            }
        }
        let n = self.world.tasks.len() as f64;
        Ok((c2d / n, d2c / n))
    }
}

/// Runs `steps` training steps and returns one metrics record per step.
pub fn run_toy_training(
    tasks: Vec<ToyTask>,
    steps: usize,
    seed: u64,
    config: ToyConfig,
) -> Result<Vec<StepMetrics>, ToyError> {
    let mut trainer = ToyTrainer::new(tasks, seed, config)?;
    (0..steps).map(|_| trainer.train_step()).collect()
}
