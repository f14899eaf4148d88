//! Component-level tests: parsing and printing, desugaring conventions,
//! finite domains, semiring primitives, and hand-sized elimination graphs.

use num_rational::BigRational;
use num_traits::Zero;
use perpl::core::Type;
use perpl::domain::{domain_size, enumerate_domain, SemValue};
use perpl::dr::{greedy_order, has_acyclic_labeling, AbstractDrGraph};
use perpl::oracle::Oracle;
use perpl::parser::parse_program;
use perpl::pipeline;
use perpl::pretty::print_surface;
use perpl::solver::{matrix_star, Exact, Weight};
use perpl::typecheck::Mode;
use std::collections::BTreeSet;

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

// --- parsing and printing --------------------------------------------------

#[test]
fn printing_is_idempotent_on_the_corpus() {
    for src in [
        include_str!("../../../corpus/flip.ppl"),
        include_str!("../../../corpus/fair.ppl"),
        include_str!("../../../corpus/cfg.ppl"),
        include_str!("../../../corpus/pda.ppl"),
        include_str!("../../../corpus/epda.ppl"),
    ] {
        let once = print_surface(&parse_program(src).unwrap());
        let twice = print_surface(&parse_program(&once).unwrap());
        assert_eq!(once, twice);
    }
}

#[test]
fn application_binds_tighter_than_comparison() {
    // `f x == g y` must parse as `(f x) == (g y)`.
    let src = "define f (b: Bool) : Bool = b;\nf true == f false";
    let p = parse_program(src).unwrap();
    let printed = print_surface(&p);
    let reparsed = print_surface(&parse_program(&printed).unwrap());
    assert_eq!(printed, reparsed);
    let tp = pipeline::check_source(src, Mode::Affine).unwrap();
    let r = Oracle::new(&tp.program).explore(50);
    assert_eq!(r.weight_of("(2, ())"), ratio(1, 1), "true == false is false");
}

#[test]
fn comments_and_rational_literals() {
    let src = "(* a (* nested *) comment *) factor 2/3 in ()";
    let tp = pipeline::check_source(src, Mode::Affine).unwrap();
    let r = Oracle::new(&tp.program).explore(10);
    assert_eq!(r.weight_of("()"), ratio(2, 3));
}

#[test]
fn parse_errors_carry_positions() {
    let err = parse_program("define f : Bool =\n  case true of").unwrap_err();
    let msg = format!("{err}");
    assert!(msg.contains("2:"), "diagnostic without line info: {msg}");
}

// --- desugaring conventions ------------------------------------------------

#[test]
fn booleans_are_the_first_and_second_injection() {
    let tp = pipeline::check_source("true", Mode::Affine).unwrap();
    let r = Oracle::new(&tp.program).explore(5);
    assert_eq!(r.weight_of("(1, ())"), ratio(1, 1));
    assert_eq!(SemValue::bool_true().to_string(), "(1, ())");
    assert_eq!(SemValue::bool_false().to_string(), "(2, ())");
}

#[test]
fn additive_tuples_defer_their_components() {
    // Only the projected component of an additive tuple runs, so the other
    // branch's `fail` must not zero the result.
    let src = "<fail, true>.2";
    let tp = pipeline::check_source(src, Mode::Affine).unwrap();
    let r = Oracle::new(&tp.program).explore(20);
    assert_eq!(r.weight_of("(1, ())"), ratio(1, 1));
    assert!(r.residual.is_zero());
}

#[test]
fn case_arms_must_cover_all_constructors() {
    let src = "data T = A | B\ncase A of A => ()";
    assert!(pipeline::check_source(src, Mode::Affine).is_err());
}

// --- finite domains --------------------------------------------------------

#[test]
fn domain_sizes_multiply_and_add() {
    let boolean = Type::Sum(vec![Type::unit(), Type::unit()]);
    assert_eq!(domain_size(&boolean), Some(2));
    let pair = Type::Tensor(vec![boolean.clone(), boolean.clone()]);
    assert_eq!(domain_size(&pair), Some(4));
    let triple_sum = Type::Sum(vec![boolean.clone(), pair.clone(), Type::unit()]);
    assert_eq!(domain_size(&triple_sum), Some(7));
    assert_eq!(enumerate_domain(&pair).len(), 4);
    // A function denotes a weighted relation: one entry per
    // argument/result pair.
    let arrow = Type::Arrow(Box::new(boolean.clone()), Box::new(boolean));
    assert_eq!(domain_size(&arrow), Some(4));
    // Recursive types have no finite domain.
    let rec = Type::Mu { tag: 0, body: Box::new(Type::Var(0)) };
    assert_eq!(domain_size(&rec), None);
}

#[test]
fn enumeration_renders_distinct_values() {
    let boolean = Type::Sum(vec![Type::unit(), Type::unit()]);
    let pair = Type::Tensor(vec![boolean.clone(), boolean]);
    let rendered: BTreeSet<String> = enumerate_domain(&pair)
        .iter()
        .map(|v| v.to_string())
        .collect();
    assert_eq!(rendered.len(), 4, "values must render distinctly: {rendered:?}");
}

// --- semiring primitives ---------------------------------------------------

#[test]
fn star_is_the_geometric_series() {
    assert_eq!(Weight::star(&0.5f64), 2.0);
    assert_eq!(Weight::star(&0.0f64), 1.0);
    assert!(Weight::star(&1.0f64).is_infinite());
    assert_eq!(Exact::Finite(ratio(1, 2)).star(), Exact::Finite(ratio(2, 1)));
    assert_eq!(Exact::Finite(ratio(1, 1)).star(), Exact::Inf);
    assert_eq!(Exact::Inf.star(), Exact::Inf);
}

#[test]
fn truncated_subtraction_handles_infinity() {
    assert_eq!(f64::INFINITY.sub_trunc(&3.0), f64::INFINITY);
    assert_eq!(3.0f64.sub_trunc(&5.0), 0.0);
    assert_eq!(
        Exact::Inf.sub_trunc(&Exact::Finite(ratio(3, 1))),
        Exact::Inf
    );
}

#[test]
fn matrix_star_solves_a_two_state_chain() {
    // States 0 <-> 1 with transition weight 1/2 each way:
    // (A*)[0][0] = sum over round trips = 1 / (1 - 1/4) = 4/3.
    let half = Exact::Finite(ratio(1, 2));
    let zero = Exact::zero();
    let a = vec![
        vec![zero.clone(), half.clone()],
        vec![half, zero],
    ];
    let st = matrix_star(&a);
    assert_eq!(st[0][0], Exact::Finite(ratio(4, 3)));
    assert_eq!(st[0][1], Exact::Finite(ratio(2, 3)));
}

#[test]
fn compensated_residual_matches_plain_evaluation_when_benign() {
    // z = 0.3 + 0.2 z^2 at z = 0.4: residual = 0.3 + 0.032 - 0.4 = -0.068,
    // clamped to zero; at z = 0.3 it is 0.018.
    let terms: [(f64, &[usize]); 2] = [(0.3, &[]), (0.2, &[0, 0])];
    let r = <f64 as Weight>::eval_residual(&terms, &[0.4], &0.4);
    assert_eq!(r, 0.0);
    let r = <f64 as Weight>::eval_residual(&terms, &[0.3], &0.3);
    assert!((r - 0.018).abs() < 1e-15, "residual {r}");
}

// --- elimination graphs ----------------------------------------------------

fn graph(n: usize, d: &[(usize, usize)], r: &[(usize, usize)]) -> AbstractDrGraph {
    let mut g = AbstractDrGraph {
        n,
        d: vec![Default::default(); n],
        r: vec![Default::default(); n],
    };
    for &(i, j) in d {
        g.d[i].insert(j);
    }
    for &(i, j) in r {
        g.r[i].insert(j);
    }
    g
}

#[test]
fn self_loops_block_exactly_their_own_label() {
    // A D-self-loop forces refunctionalization; both self-loops are fatal.
    let only_d = graph(1, &[(0, 0)], &[]);
    assert!(greedy_order(&only_d).is_some());
    assert!(has_acyclic_labeling(&only_d));
    let both = graph(1, &[(0, 0)], &[(0, 0)]);
    assert!(greedy_order(&both).is_none());
    assert!(!has_acyclic_labeling(&both));
}

#[test]
fn two_node_cycle_needs_mixed_labels() {
    // Each node depends on the other under either label: every labeling
    // keeps the 0 <-> 1 cycle.
    let g = graph(2, &[(0, 1), (1, 0)], &[(0, 1), (1, 0)]);
    assert!(!has_acyclic_labeling(&g));
    assert!(greedy_order(&g).is_none());
    // Dropping one direction from the R side opens an order: label 0 with R
    // (no outgoing edges) and eliminate it first.
    let g = graph(2, &[(0, 1), (1, 0)], &[(1, 0)]);
    assert!(has_acyclic_labeling(&g));
    assert!(greedy_order(&g).is_some());
}
