use backtrans_core::buffer::Direction;
use backtrans_core::optim::{
    fd_check, gradient, loss, loss_parts, step, ToyPolicy, UpdateBatch, UpdateItem,
};
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Config {
    policy: ToyPolicy,
    reference: ToyPolicy,
    batch: UpdateBatch,
}

fn config() -> impl Strategy<Value = Config> {
    prop::collection::vec(2usize..7, 1..5)
        .prop_flat_map(|shape| {
            let rows = |shape: &[usize]| {
                shape
                    .iter()
                    .map(|&n| prop::collection::vec(-3.0f64..3.0, n))
                    .collect::<Vec<_>>()
            };
            let items = prop::collection::vec(
                (
                    0..shape.len(),
                    any::<prop::sample::Index>(),
                    any::<bool>(),
                    -2.5f64..2.5,
                ),
                1..40,
            );
            (rows(&shape), rows(&shape), items, Just(shape))
        })
        .prop_map(|(p, r, items, shape)| {
            let items = items
                .into_iter()
                .map(|(context, action, c2d, advantage)| UpdateItem {
                    direction: if c2d {
                        Direction::Code2Doc
                    } else {
                        Direction::Doc2Code
                    },
                    context,
                    action: action.index(shape[context]),
                    advantage,
                })
                .collect();
            Config {
                policy: ToyPolicy::from_rows(p).unwrap(),
                reference: ToyPolicy::from_rows(r).unwrap(),
                batch: UpdateBatch::new(items).unwrap(),
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn analytic_gradient_matches_finite_differences(c in config(), beta in prop::sample::select(vec![0.0, 0.1])) {
        let err = fd_check(&c.batch, &c.policy, &c.reference.freeze(), beta, 1e-5).unwrap();
        prop_assert!(err < 1e-5, "relative error {err}");
    }

    #[test]
    fn zero_beta_loss_ignores_reference(c in config()) {
        let a = loss(&c.batch, &c.policy, &c.reference.freeze(), 0.0).unwrap();
        let b = loss(&c.batch, &c.policy, &c.policy.freeze(), 0.0).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        let parts = loss_parts(&c.batch, &c.policy, &c.reference.freeze(), 0.0).unwrap();
        prop_assert_eq!(parts.total.to_bits(), (parts.code2doc + parts.doc2code).to_bits());
    }

    #[test]
    fn zero_learning_rate_is_a_no_op(c in config()) {
        let g = gradient(&c.batch, &c.policy, &c.reference.freeze(), 0.1).unwrap();
        let mut p = c.policy.clone();
        step(&mut p, &g, 0.0).unwrap();
        prop_assert_eq!(p, c.policy);
    }

    #[test]
    fn positive_advantages_gain_probability(c in config()) {
        let items: Vec<UpdateItem> = c.batch.items().iter().map(|it| UpdateItem { advantage: 1.0, ..*it }).collect();
        let batch = UpdateBatch::new(items).unwrap();
        let reference = c.policy.freeze();
        let total = |p: &ToyPolicy| batch.items().iter().map(|it| p.logprob(it.context, it.action).unwrap()).sum::<f64>();
        let before = total(&c.policy);
        let g = gradient(&batch, &c.policy, &reference, 0.0).unwrap();
        let mut p = c.policy.clone();
        step(&mut p, &g, 0.01).unwrap();
        prop_assert!(total(&p) > before);
    }
}
