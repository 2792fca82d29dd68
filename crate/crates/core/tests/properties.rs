use proptest::prelude::*;
use std::collections::BTreeSet;

use treegraph::constituency::{self as cons, build_chart, read_tree};
use treegraph::dependency::init_flat;
use treegraph::propbank::{materialize, NodeRef, Proposition};
use treegraph::{AnnotationGraph, ArcId, ArcType, TreeNode};

const LABELS: [&str; 4] = ["S", "NP", "VP", "PP"];

/// Random trees whose leaves are numbered words, with an occasional trace
/// and unary chains allowed.
fn tree(max_leaves: usize) -> impl Strategy<Value = TreeNode> {
    let leaf = prop_oneof![
        8 => Just(TreeNode::word("w")),
        1 => Just(TreeNode::trace("*", None)),
    ];
    leaf.prop_recursive(4, max_leaves as u32, 4, |inner| {
        (
            prop::sample::select(LABELS.to_vec()),
            any::<bool>(),
            prop::collection::vec(inner, 1..4),
        )
            .prop_map(|(label, labeled, children)| {
                if labeled {
                    TreeNode::phrase(label, children)
                } else {
                    TreeNode::unlabeled(children)
                }
            })
    })
    .prop_map(|t| match t {
        TreeNode::Phrase { .. } => t,
        leaf => TreeNode::phrase("S", vec![leaf]),
    })
    .prop_map(number_words)
}

fn number_words(mut t: TreeNode) -> TreeNode {
    fn walk(t: &mut TreeNode, next: &mut usize) {
        match t {
            TreeNode::Phrase { children, .. } => children.iter_mut().for_each(|c| walk(c, next)),
            TreeNode::Word { fields } => {
                *next += 1;
                fields.insert("form".into(), format!("w{next}"));
            }
            TreeNode::Trace { .. } => {}
        }
    }
    walk(&mut t, &mut 0);
    t
}

fn syntactic(g: &AnnotationGraph) -> Vec<ArcId> {
    g.arcs().filter(|a| a.kind.family() == treegraph::graph::Family::Syntax).map(|a| a.id).collect()
}

type Op = fn(&mut AnnotationGraph, ArcId) -> Result<(), cons::EditError>;

fn ops() -> Vec<(&'static str, Op)> {
    vec![
        ("move_down", |g, n| cons::move_down(g, n).map(drop)),
        ("move_up", cons::move_up),
        ("promote_right", cons::promote_right),
        ("promote_left", cons::promote_left),
        ("demote_right", cons::demote_right),
        ("demote_left", cons::demote_left),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn chart_roundtrip(t in tree(8)) {
        let (g, root) = build_chart(&t).unwrap();
        prop_assert!(g.validate().is_empty());
        prop_assert_eq!(read_tree(&g, root).unwrap(), t);
    }

    #[test]
    fn operations_keep_the_string_and_the_selection(t in tree(8)) {
        let (g, _) = build_chart(&t).unwrap();
        let terminals = g.terminals();
        for n in syntactic(&g) {
            for (name, op) in ops() {
                let mut h = g.clone();
                let before = h.arc(n).unwrap().clone();
                match op(&mut h, n) {
                    Ok(()) => {
                        prop_assert_eq!(h.terminals(), terminals.clone(), "{} on {}", name, n);
                        prop_assert!(h.validate().is_empty(), "{} on {}", name, n);
                        let after = h.arc(n).unwrap();
                        prop_assert_eq!(after.kind, before.kind);
                        prop_assert_eq!(&after.fields, &before.fields);
                    }
                    Err(_) => prop_assert_eq!(&h, &g, "failed {} left changes", name),
                }
            }
        }
    }

    #[test]
    fn inverse_pairs(t in tree(8)) {
        let (g, _) = build_chart(&t).unwrap();
        let pairs: [(Op, Op); 5] = [
            (|g, n| cons::move_down(g, n).map(drop), cons::move_up),
            (cons::demote_left, cons::promote_right),
            (cons::promote_right, cons::demote_left),
            (cons::demote_right, cons::promote_left),
            (cons::promote_left, cons::demote_right),
        ];
        for n in syntactic(&g) {
            for (i, (first, second)) in pairs.iter().enumerate() {
                let mut h = g.clone();
                if first(&mut h, n).is_ok() {
                    second(&mut h, n).unwrap();
                    prop_assert_eq!(&h, &g, "pair {} on {}", i, n);
                }
            }
        }
    }

    #[test]
    fn move_subtree_never_makes_cycles(
        n in 1usize..6,
        moves in prop::collection::vec((0usize..6, 0usize..7), 0..20),
    ) {
        let words: Vec<String> = (1..=n).map(|i| format!("w{i}")).collect();
        let refs: Vec<&str> = words.iter().map(String::as_str).collect();
        let (mut g, view) = init_flat(&refs).unwrap();
        let ids = view.words(&g);
        for (s, t) in moves {
            let source = ids[s % n];
            let target = if t >= n { view.root } else { ids[t] };
            let before = g.clone();
            let cyclic = source == target || g.is_ancestor(source, target);
            let result = view.move_subtree(&mut g, source, target);
            prop_assert_eq!(result.is_err(), cyclic);
            if cyclic {
                prop_assert_eq!(&g, &before);
            }
            for w in &ids {
                prop_assert!(g.ancestors(*w).contains(&view.root));
            }
            prop_assert_eq!(g.surface(), words.clone());
        }
    }

    #[test]
    fn proposition_arcs_are_hulls(
        t in tree(8),
        picks in prop::collection::vec(prop::collection::btree_set(0usize..40, 1..4), 1..4),
    ) {
        let (mut g, _) = build_chart(&t).unwrap();
        let nodes = syntactic(&g);
        let sets: Vec<BTreeSet<ArcId>> = picks
            .iter()
            .map(|p| p.iter().map(|i| nodes[i % nodes.len()]).collect())
            .collect();
        let mut p = Proposition::new();
        let refs = |s: &BTreeSet<ArcId>| s.iter().map(|a| NodeRef::Arc(*a)).collect::<Vec<_>>();
        p.tag_predicate(&g, &refs(&sets[0])).unwrap();
        for (i, s) in sets[1..].iter().enumerate() {
            p.tag_argument(&g, &format!("Arg{i}"), &refs(s)).unwrap();
        }
        let made = materialize(&mut g, &p).unwrap();
        let expected: Vec<&BTreeSet<ArcId>> = sets.iter().collect();
        for (arc, members) in made.iter().zip(expected) {
            let lo = members.iter().map(|m| g.span(*m).unwrap().0).min().unwrap();
            let hi = members.iter().map(|m| g.span(*m).unwrap().1).max().unwrap();
            prop_assert_eq!(g.span(*arc).unwrap(), (lo, hi));
        }
        prop_assert_eq!(g.arc(made[0]).unwrap().kind, ArcType::Pred);
        prop_assert!(g.validate().is_empty());
    }
}
