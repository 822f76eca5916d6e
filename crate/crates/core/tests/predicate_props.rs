mod common;

use bun_core::predicate::{blame, evaluate, holds, parse_predicate, BindingEnv, Entity};
use bun_core::Literal;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ALL: [Entity; 4] = [Entity::Subject, Entity::Object, Entity::Op, Entity::Context];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn print_parse_fixed_point(seed in any::<u64>(), budget in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ast = common::expr(&mut rng, &ALL, budget);
        let text = ast.to_string();
        let back = parse_predicate(&text).unwrap();
        prop_assert_eq!(back.to_string(), text);
        prop_assert_eq!(back, ast);
    }

    #[test]
    fn string_literals_survive_quoting(s in "\\PC*") {
        let lit = Literal::Str(s);
        prop_assert_eq!(Literal::parse(&lit.to_string()), Some(lit));
    }

    #[test]
    fn numbers_survive_printing(n in any::<i64>(), mantissa in -1_000_000i64..1_000_000, scale in 0u32..6) {
        let i = Literal::Int(n);
        prop_assert_eq!(Literal::parse(&i.to_string()), Some(i));
        let d = Literal::Dec(bun_core::Decimal::new(mantissa, scale));
        prop_assert_eq!(Literal::parse(&d.to_string()), Some(d));
    }

    #[test]
    fn evaluation_agrees_with_oracle_and_blame_is_sound(seed in any::<u64>(), budget in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let expr = common::expr(&mut rng, &ALL, budget);
        let (s, o, op, c) = (common::subject(&mut rng), common::object(&mut rng), common::op(&mut rng), common::context(&mut rng));
        let env = BindingEnv { subject: &s, object: &o, op: &op, context: &c };
        let oracle = common::Oracle { subject: &s, object: &o, op: &op, context: &c };
        let ev = evaluate(&expr, &env);
        prop_assert_eq!(ev.value, oracle.holds(&expr));
        prop_assert_eq!(ev.value, holds(&expr, &env));
        prop_assert_eq!(ev.trace.len(), expr.atoms().len());
        let blamed = blame(&expr, &env);
        if ev.value {
            prop_assert!(blamed.is_empty());
        }
        for f in blamed {
            prop_assert_eq!(oracle.atom(&f.atom), f.negated);
        }
    }
}

#[test]
fn malformed_predicates_report_position() {
    let e = parse_predicate("(and (has_role subject admin) (>= object.state.x))").unwrap_err();
    assert!(e.column > 1, "{e}");
    assert!(parse_predicate("(frobnicate subject x)").is_err());
    assert!(parse_predicate("(and (exists object.id)").is_err());
}
