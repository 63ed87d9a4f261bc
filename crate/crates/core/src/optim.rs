//! Tabular softmax policy with exact log-probabilities, the joint two-direction
//! policy-gradient loss with optional KL penalty, its analytic gradient, and a
//! finite-difference checker.
//!
//! The loss over a batch is
//!
//! ```text
//! L = -mean_{code2doc}(A · log π(a|s)) - mean_{doc2code}(A · log π(a|s)) + β · Σ_s KL(π(·|s) ‖ π_ref(·|s))
//! ```
//!
//! where the KL sum runs over the distinct contexts present in the batch.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::buffer::{BufferError, Direction, ReplayBuffer};

pub type ContextId = usize;
pub type ActionId = usize;

pub const TOY_LEARNING_RATE: f64 = 0.2;
pub const EXPORT_LEARNING_RATE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OptimError {
    #[error("unknown context {0}")]
    UnknownContext(ContextId),
    #[error("unknown action {action} in context {context}")]
    UnknownAction {
        context: ContextId,
        action: ActionId,
    },
    #[error("advantage of batch item {0} is not finite")]
    NonFiniteAdvantage(usize),
    #[error("context {0} has no actions")]
    EmptyContext(ContextId),
    #[error("parameter {0} is not finite")]
    NonFiniteParameter(ContextId),
    #[error("gradient shape does not match the policy")]
    ShapeMismatch,
}

/// Ragged matrix of logits: one row per context, one entry per action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    rows: Vec<Vec<f64>>,
}

impl ToyPolicy {
    /// Uniform policy with the given action count per context.
    pub fn uniform(actions_per_context: &[usize]) -> Result<Self, OptimError> {
        Self::from_rows(actions_per_context.iter().map(|&n| vec![0.0; n]).collect())
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, OptimError> {
        for (ctx, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(OptimError::EmptyContext(ctx));
            }
            if !row.iter().all(|x| x.is_finite()) {
                return Err(OptimError::NonFiniteParameter(ctx));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn num_contexts(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, context: ContextId) -> Result<&[f64], OptimError> {
        self.rows
            .get(context)
            .map(Vec::as_slice)
            .ok_or(OptimError::UnknownContext(context))
    }

    pub fn log_probs(&self, context: ContextId) -> Result<Vec<f64>, OptimError> {
        Ok(log_softmax(self.row(context)?))
    }

    pub fn probs(&self, context: ContextId) -> Result<Vec<f64>, OptimError> {
        Ok(self
            .log_probs(context)?
            .into_iter()
            .map(libm::exp)
            .collect())
    }

    pub fn logprob(&self, context: ContextId, action: ActionId) -> Result<f64, OptimError> {
        let row = self.row(context)?;
        if action >= row.len() {
            return Err(OptimError::UnknownAction { context, action });
        }
        Ok(row[action] - log_sum_exp(row))
    }

    /// Frozen copy to serve as the KL anchor.
    pub fn freeze(&self) -> ReferencePolicy {
        ReferencePolicy(self.clone())
    }

    pub(crate) fn param_mut(&mut self, context: ContextId, action: ActionId) -> &mut f64 {
        &mut self.rows[context][action]
    }
}

pub fn logprob(
    policy: &ToyPolicy,
    context: ContextId,
    action: ActionId,
) -> Result<f64, OptimError> {
    policy.logprob(context, action)
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + libm::log(row.iter().map(|x| libm::exp(x - max)).sum::<f64>())
}

fn log_softmax(row: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(row);
    row.iter().map(|x| x - lse).collect()
}

/// An immutable snapshot of a policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePolicy(ToyPolicy);

impl ReferencePolicy {
    pub fn policy(&self) -> &ToyPolicy {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateItem {
    pub direction: Direction,
    pub context: ContextId,
    pub action: ActionId,
    pub advantage: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateBatch {
    items: Vec<UpdateItem>,
}

impl UpdateBatch {
    pub fn new(items: Vec<UpdateItem>) -> Result<Self, OptimError> {
        if let Some(i) = items.iter().position(|it| !it.advantage.is_finite()) {
            return Err(OptimError::NonFiniteAdvantage(i));
        }
        Ok(Self { items })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn items(&self) -> &[UpdateItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contexts(&self) -> BTreeSet<ContextId> {
        self.items.iter().map(|it| it.context).collect()
    }

    fn direction_count(&self, direction: Direction) -> usize {
        self.items
            .iter()
            .filter(|it| it.direction == direction)
            .count()
    }
}

/// Loss split into its policy-gradient and KL parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub code2doc: f64,
    pub doc2code: f64,
    pub kl: f64,
    pub total: f64,
}

/// Exact categorical KL(π ‖ π_ref) summed over `contexts`.
pub fn kl_divergence(
    policy: &ToyPolicy,
    reference: &ReferencePolicy,
    contexts: impl IntoIterator<Item = ContextId>,
) -> Result<f64, OptimError> {
    let mut total = 0.0;
    for ctx in contexts {
        total += context_kl(policy, reference, ctx)?;
    }
    Ok(total)
}

fn context_kl(
    policy: &ToyPolicy,
    reference: &ReferencePolicy,
    ctx: ContextId,
) -> Result<f64, OptimError> {
    let lp = policy.log_probs(ctx)?;
    let lq = reference.policy().log_probs(ctx)?;
    if lp.len() != lq.len() {
        return Err(OptimError::ShapeMismatch);
    }
    // Clamp tiny negative round-off.
    Ok(lp
        .iter()
        .zip(&lq)
        .map(|(p, q)| libm::exp(*p) * (p - q))
        .sum::<f64>()
        .max(0.0))
}

pub fn loss_parts(
    batch: &UpdateBatch,
    policy: &ToyPolicy,
    reference: &ReferencePolicy,
    beta: f64,
) -> Result<LossParts, OptimError> {
    let mut sums = [0.0f64; 2];
    for it in batch.items() {
        let lp = policy.logprob(it.context, it.action)?;
        let slot = match it.direction {
            Direction::Code2Doc => 0,
            Direction::Doc2Code => 1,
        };
        sums[slot] += it.advantage * lp;
    }
    let mean = |sum: f64, dir| match batch.direction_count(dir) {
        0 => 0.0,
        n => -(sum / n as f64),
    };
    let code2doc = mean(sums[0], Direction::Code2Doc);
    let doc2code = mean(sums[1], Direction::Doc2Code);
    let kl = kl_divergence(policy, reference, batch.contexts())?;
    let mut total = code2doc + doc2code;
    if beta != 0.0 {
        total += beta * kl;
    }
    Ok(LossParts {
        code2doc,
        doc2code,
        kl,
        total,
    })
}

pub fn loss(
    batch: &UpdateBatch,
    policy: &ToyPolicy,
    reference: &ReferencePolicy,
    beta: f64,
) -> Result<f64, OptimError> {
    loss_parts(batch, policy, reference, beta).map(|p| p.total)
}

/// Analytic gradient of [`loss`] with respect to every logit.
pub fn gradient(
    batch: &UpdateBatch,
    policy: &ToyPolicy,
    reference: &ReferencePolicy,
    beta: f64,
) -> Result<Vec<Vec<f64>>, OptimError> {
    let mut grad: Vec<Vec<f64>> = policy.rows().iter().map(|r| vec![0.0; r.len()]).collect();
    let counts = [
        batch.direction_count(Direction::Code2Doc),
        batch.direction_count(Direction::Doc2Code),
    ];
    for it in batch.items() {
        let probs = policy.probs(it.context)?;
        if it.action >= probs.len() {
            return Err(OptimError::UnknownAction {
                context: it.context,
                action: it.action,
            });
        }
        let n = match it.direction {
            Direction::Code2Doc => counts[0],
            Direction::Doc2Code => counts[1],
        } as f64;
        let scale = -it.advantage / n;
        let row = &mut grad[it.context];
        for (j, (g, p)) in row.iter_mut().zip(&probs).enumerate() {
            let indicator = if j == it.action { 1.0 } else { 0.0 };
            *g += scale * (indicator - p);
        }
    }
    if beta != 0.0 {
        for ctx in batch.contexts() {
            let lp = policy.log_probs(ctx)?;
            let lq = reference.policy().log_probs(ctx)?;
            if lp.len() != lq.len() {
                return Err(OptimError::ShapeMismatch);
            }
            let kl: f64 = lp
                .iter()
                .zip(&lq)
                .map(|(p, q)| libm::exp(*p) * (p - q))
                .sum();
            for (j, g) in grad[ctx].iter_mut().enumerate() {
                let p = libm::exp(lp[j]);
                *g += beta * p * ((lp[j] - lq[j]) - kl);
            }
        }
    }
    Ok(grad)
}

/// Largest relative error between the analytic gradient and central finite
/// differences of the loss, over parameters whose analytic gradient exceeds
/// 1e-10 in magnitude. Returns 0 when no parameter qualifies.
pub fn fd_check(
    batch: &UpdateBatch,
    policy: &ToyPolicy,
    reference: &ReferencePolicy,
    beta: f64,
    h: f64,
) -> Result<f64, OptimError> {
    let analytic = gradient(batch, policy, reference, beta)?;
    let mut probe = policy.clone();
    let mut worst = 0.0f64;
    for (ctx, row) in analytic.iter().enumerate() {
        for (a, &g) in row.iter().enumerate() {
            let base = policy.rows()[ctx][a];
            *probe.param_mut(ctx, a) = base + h;
            let plus = loss(batch, &probe, reference, beta)?;
            *probe.param_mut(ctx, a) = base - h;
            let minus = loss(batch, &probe, reference, beta)?;
            *probe.param_mut(ctx, a) = base;
            let numeric = (plus - minus) / (2.0 * h);
            if libm::fabs(g) > 1e-10 {
                worst = worst.max(libm::fabs(g - numeric) / libm::fabs(g));
            }
        }
    }
    Ok(worst)
}

/// `θ ← θ − lr · ∇L`, in place.
pub fn step(
    policy: &mut ToyPolicy,
    gradient: &[Vec<f64>],
    learning_rate: f64,
) -> Result<(), OptimError> {
    if gradient.len() != policy.rows.len()
        || gradient
            .iter()
            .zip(&policy.rows)
            .any(|(g, r)| g.len() != r.len())
    {
        return Err(OptimError::ShapeMismatch);
    }
    for (row, grow) in policy.rows.iter_mut().zip(gradient) {
        for (theta, g) in row.iter_mut().zip(grow) {
            *theta -= learning_rate * g;
        }
    }
    Ok(())
}

/// One exported training example for an external trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub direction: Direction,
    pub prompt: alloc::string::String,
    pub completion: alloc::string::String,
    pub advantage: f64,
}

/// Buffer entries at `selection` (indices into residency order) with their
/// advantages computed against the current buffer statistics.
pub fn export_records(
    buffer: &ReplayBuffer,
    selection: &[usize],
) -> Result<Vec<ExportRecord>, BufferError> {
    selection
        .iter()
        .map(|&i| {
            let entry = buffer.get(i).ok_or(BufferError::Underfull {
                requested: i + 1,
                resident: buffer.len(),
            })?;
            Ok(ExportRecord {
                direction: entry.direction,
                prompt: entry.input.clone(),
                completion: entry.output.clone(),
                advantage: buffer.advantage(entry)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(direction: Direction, context: usize, action: usize, advantage: f64) -> UpdateItem {
        UpdateItem {
            direction,
            context,
            action,
            advantage,
        }
    }

    #[test]
    fn uniform_logprob() {
        let p = ToyPolicy::uniform(&[4]).unwrap();
        assert!((p.logprob(0, 2).unwrap() - (-1.386_294_361_119_890_6)).abs() < 1e-15);
        assert_eq!(p.logprob(1, 0), Err(OptimError::UnknownContext(1)));
        assert_eq!(
            p.logprob(0, 4),
            Err(OptimError::UnknownAction {
                context: 0,
                action: 4
            })
        );
    }

    #[test]
    fn peaked_logprob() {
        let p = ToyPolicy::from_rows(vec![vec![10.0, 0.0]]).unwrap();
        // ln(e^10 / (e^10 + 1)) = -ln(1 + e^-10)
        let expected = -4.539_889_921_686_464e-5;
        assert!((p.logprob(0, 0).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn probabilities_normalize() {
        let p = ToyPolicy::from_rows(vec![vec![3.0, -1.0, 0.5, 700.0]]).unwrap();
        let s: f64 = p.probs(0).unwrap().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_item_loss_and_gradient() {
        let p = ToyPolicy::uniform(&[2]).unwrap();
        let r = p.freeze();
        let b = UpdateBatch::new(vec![item(Direction::Code2Doc, 0, 0, 1.0)]).unwrap();
        assert!((loss(&b, &p, &r, 0.0).unwrap() - core::f64::consts::LN_2).abs() < 1e-15);
        let g = gradient(&b, &p, &r, 0.0).unwrap();
        assert_eq!(g, vec![vec![-0.5, 0.5]]);
    }

    #[test]
    fn kl_vanishes_at_reference() {
        let p = ToyPolicy::from_rows(vec![vec![0.3, -0.2, 1.0], vec![2.0, 0.0]]).unwrap();
        let r = p.freeze();
        let b = UpdateBatch::new(vec![
            item(Direction::Doc2Code, 0, 1, 0.0),
            item(Direction::Code2Doc, 1, 0, 0.0),
        ])
        .unwrap();
        let parts = loss_parts(&b, &p, &r, 0.7).unwrap();
        assert_eq!(parts.kl, 0.0);
        let g = gradient(&b, &p, &r, 0.7).unwrap();
        assert!(g.iter().flatten().all(|x| x.abs() < 1e-16));
    }

    #[test]
    fn zero_advantages_zero_gradient() {
        let p = ToyPolicy::from_rows(vec![vec![0.3, -0.2]]).unwrap();
        let b = UpdateBatch::new(vec![item(Direction::Code2Doc, 0, 1, 0.0)]).unwrap();
        assert_eq!(
            gradient(&b, &p, &p.freeze(), 0.0).unwrap(),
            vec![vec![0.0, 0.0]]
        );
    }

    #[test]
    fn rejects_non_finite_advantages() {
        let r = UpdateBatch::new(vec![item(Direction::Code2Doc, 0, 0, f64::NAN)]);
        assert_eq!(r, Err(OptimError::NonFiniteAdvantage(0)));
    }

    #[test]
    fn step_moves_toward_positive_advantage() {
        let mut p = ToyPolicy::uniform(&[3]).unwrap();
        let b = UpdateBatch::new(vec![item(Direction::Code2Doc, 0, 1, 1.0)]).unwrap();
        let before = p.logprob(0, 1).unwrap();
        let g = gradient(&b, &p, &p.freeze(), 0.0).unwrap();
        step(&mut p, &g, 0.1).unwrap();
        assert!(p.logprob(0, 1).unwrap() > before);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut p = ToyPolicy::from_rows(vec![vec![0.1, -0.3], vec![-0.0, 5.5]]).unwrap();
        let orig = p.clone();
        let g = vec![vec![1.0, -2.0], vec![3.0, 0.25]];
        step(&mut p, &g, 0.0).unwrap();
        assert_eq!(p.rows()[0][0].to_bits(), orig.rows()[0][0].to_bits());
        assert_eq!(p.rows()[1][0].to_bits(), orig.rows()[1][0].to_bits());
        assert_eq!(p, orig);
        assert_eq!(
            step(&mut p, &[vec![0.0]], 0.1),
            Err(OptimError::ShapeMismatch)
        );
    }

    #[test]
    fn empty_batch_fd_is_zero() {
        let p = ToyPolicy::uniform(&[2, 3]).unwrap();
        assert_eq!(
            fd_check(&UpdateBatch::empty(), &p, &p.freeze(), 0.0, 1e-5).unwrap(),
            0.0
        );
    }
}
