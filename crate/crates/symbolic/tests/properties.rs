use harnack_symbolic::catalogue::identity_difference;
use harnack_symbolic::{Coeff, Exponent, Factor, Idx, RewriteSystem, TensorExpr, Term, IDENTITY_NAMES};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

const I: Idx = Idx::named('i');
const J: Idx = Idx::named('j');

/// Factor shapes with their slot counts; indices are filled in afterwards.
#[derive(Clone, Copy)]
enum Shape {
    Pow,
    Kron,
    Ric,
    Riem,
    Deriv(usize),
}

fn slots(s: Shape) -> usize {
    match s {
        Shape::Pow => 0,
        Shape::Kron | Shape::Ric => 2,
        Shape::Riem => 4,
        Shape::Deriv(k) => k,
    }
}

/// A random monomial with free indices `{i, j}` and every other index paired.
fn random_term(rng: &mut StdRng) -> Term {
    let mut shapes: Vec<Shape> = (0..rng.gen_range(1..=4))
        .map(|_| match rng.gen_range(0..5) {
            0 => Shape::Pow,
            1 => Shape::Kron,
            2 => Shape::Ric,
            3 => Shape::Riem,
            _ => Shape::Deriv(rng.gen_range(1..=3)),
        })
        .collect();
    let mut total: usize = shapes.iter().map(|&s| slots(s)).sum();
    while total < 2 || total % 2 == 1 {
        shapes.push(Shape::Deriv(1));
        total += 1;
    }
    let mut names = vec![I, J];
    for d in 0..(total - 2) / 2 {
        // letters from 'n' on, so they never clash with i, j
        let idx = Idx::named(char::from(b'n' + d as u8));
        names.push(idx);
        names.push(idx);
    }
    names.shuffle(rng);
    let mut it = names.into_iter();
    let mut take = |k: usize| -> Vec<Idx> { (&mut it).take(k).collect() };
    let factors = shapes
        .into_iter()
        .map(|s| match s {
            Shape::Pow => Factor::GPow(Exponent::alpha(rng.gen_range(-2..=1), rng.gen_range(0..=2))),
            Shape::Kron => {
                let v = take(2);
                Factor::Kron([v[0], v[1]])
            }
            Shape::Ric => {
                let v = take(2);
                Factor::Ric([v[0], v[1]])
            }
            Shape::Riem => {
                let v = take(4);
                Factor::Riem([v[0], v[1], v[2], v[3]])
            }
            Shape::Deriv(k) => Factor::DerivG(take(k)),
        })
        .collect();
    let coeff = Coeff::int(rng.gen_range(-3..=3)) + Coeff::rational(rng.gen_range(-2..=2), 3) * Coeff::alpha();
    Term::new(coeff, factors)
}

fn random_expr(seed: u64) -> TensorExpr {
    let mut rng = StdRng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4);
    TensorExpr::from_terms((0..n).map(|_| random_term(&mut rng)).collect())
}

/// Same tensor, different presentation: symmetry moves on each factor with the
/// matching sign, and a fresh set of dummy names.
fn represent(e: &TensorExpr, seed: u64) -> TensorExpr {
    let mut rng = StdRng::seed_from_u64(seed);
    let terms = e
        .terms()
        .iter()
        .map(|t| {
            let mut coeff = t.coeff.clone();
            let factors = t
                .factors
                .iter()
                .map(|f| match f {
                    Factor::Kron([a, b]) if rng.gen() => Factor::Kron([*b, *a]),
                    Factor::Ric([a, b]) if rng.gen() => Factor::Ric([*b, *a]),
                    Factor::Riem([a, b, c, d]) => {
                        let mut s = [*a, *b, *c, *d];
                        if rng.gen() {
                            s.swap(0, 1);
                            coeff = -coeff.clone();
                        }
                        if rng.gen() {
                            s.swap(2, 3);
                            coeff = -coeff.clone();
                        }
                        if rng.gen() {
                            s = [s[2], s[3], s[0], s[1]];
                        }
                        Factor::Riem(s)
                    }
                    Factor::DerivG(s) if s.len() >= 2 && rng.gen() => {
                        let mut s = s.clone();
                        s.swap(0, 1);
                        Factor::DerivG(s)
                    }
                    other => other.clone(),
                })
                .collect();
            let dummies = t.dummies();
            let mut targets: Vec<u32> = (0..dummies.len() as u32).map(|k| 'A' as u32 + k).collect();
            targets.shuffle(&mut rng);
            Term::new(coeff, factors).relabel(&|x| match dummies.binary_search(&x) {
                Ok(p) => Idx(targets[p]),
                Err(_) => x,
            })
        })
        .collect();
    TensorExpr::from_terms(terms)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn normalize_is_idempotent(seed in any::<u64>()) {
        let once = random_expr(seed).normalize().unwrap();
        prop_assert_eq!(once.normalize().unwrap(), once);
    }

    #[test]
    fn normalize_ignores_presentation(seed in any::<u64>(), shuffle in any::<u64>()) {
        let e = random_expr(seed);
        prop_assert_eq!(represent(&e, shuffle).normalize().unwrap(), e.normalize().unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn reduce_is_idempotent(seed in any::<u64>()) {
        let sys = RewriteSystem::default();
        let once = sys.reduce(&random_expr(seed)).unwrap();
        prop_assert_eq!(sys.reduce(&once).unwrap(), once);
    }

    #[test]
    fn reduce_ignores_presentation(seed in any::<u64>(), shuffle in any::<u64>()) {
        let sys = RewriteSystem::general_function();
        let e = random_expr(seed);
        prop_assert_eq!(sys.reduce(&represent(&e, shuffle)).unwrap(), sys.reduce(&e).unwrap());
    }

    #[test]
    fn reduce_is_linear(a in any::<u64>(), b in any::<u64>()) {
        let sys = RewriteSystem::default();
        let (x, y) = (random_expr(a), random_expr(b));
        let sum = sys.reduce(&(x.clone() + y.clone())).unwrap();
        let parts = sys.reduce(&(sys.reduce(&x).unwrap() + sys.reduce(&y).unwrap())).unwrap();
        prop_assert_eq!(sum, parts);
    }
}

#[test]
fn catalogue_is_confluent_under_random_rule_order() {
    for name in IDENTITY_NAMES {
        let (base, sys) = identity_difference(name, None).unwrap();
        let reference = sys.reduce(&base).unwrap();
        for seed in 0..4 {
            let (diff, sys) = identity_difference(name, Some(seed)).unwrap();
            let r = sys.reduce(&diff).unwrap();
            assert_eq!(r, reference, "{name} seed {seed}");
            assert!(r.is_zero(), "{name}");
        }
    }
}
