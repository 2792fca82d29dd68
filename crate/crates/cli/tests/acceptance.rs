//! Acceptance suite: one pass/fail line per criterion. Every expected value
//! comes from an oracle written here, independently of the library.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use treegraph::constituency::{self as cons, build_chart, read_tree};
use treegraph::dependency::init_flat;
use treegraph::formats::penn::{canonical_whitespace, read_penn, write_penn};
use treegraph::formats::{self, FormatId, Sentence};
use treegraph::graph::Family;
use treegraph::propbank::{extract, materialize, NodeCoordinate, NodeRef, Proposition};
use treegraph::{AnnotationGraph, ArcId, ArcType, TreeNode};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn core_fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn cli_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn by_form(g: &AnnotationGraph, form: &str) -> Result<ArcId, String> {
    g.arcs()
        .find(|a| a.form() == Some(form))
        .map(|a| a.id)
        .ok_or_else(|| format!("no arc with form {form:?}"))
}

// ---------------------------------------------------------------- 1

fn fixture_roundtrips() -> Check {
    for name in ["yields.mrg", "switchboard.mrg", "plo.mrg"] {
        let src = core_fixture(name);
        let sentences = read_penn(&src).map_err(|e| format!("{name}: {e}"))?;
        let out = write_penn(&sentences).map_err(|e| format!("{name}: {e}"))?;
        ensure(canonical_whitespace(&out) == canonical_whitespace(&src), || {
            format!("{name} does not roundtrip:\n{out}")
        })?;
    }
    let s = read_penn(&core_fixture("yields.mrg")).map_err(|e| e.to_string())?;
    let g = &s[0].graph;
    let trace = g
        .arcs()
        .find(|a| a.kind == ArcType::Trace && a.form() == Some("*"))
        .ok_or("no * trace")?;
    let tag = trace.field("coindex").ok_or("trace has no coindex")?;
    let antecedents: Vec<_> = g
        .arcs()
        .filter(|a| a.kind == ArcType::Phrasal && a.field("coindex") == Some(tag))
        .collect();
    ensure(tag == "1", || format!("coindex is {tag}"))?;
    ensure(antecedents.len() == 1 && antecedents[0].label() == Some("NP-SBJ"), || {
        format!("antecedents: {antecedents:?}")
    })
}

// ---------------------------------------------------------------- 2

const LABELS: [&str; 5] = ["S", "NP", "VP", "PP", "SBAR"];

/// A random tree over at most `max` terminals, built top down by splitting
/// the terminal count among children. Unary chains and traces occur.
fn random_tree(rng: &mut StdRng, max: usize) -> TreeNode {
    fn node(rng: &mut StdRng, n: usize, depth: usize) -> TreeNode {
        if n == 1 && (depth > 0 && rng.gen_bool(0.6)) {
            return if rng.gen_bool(0.1) {
                TreeNode::trace("*", None)
            } else {
                TreeNode::word("w")
            };
        }
        let parts = if n == 1 { 1 } else { rng.gen_range(1..=n.min(4)) };
        let mut sizes = vec![1; parts];
        for _ in parts..n {
            let i = rng.gen_range(0..parts);
            sizes[i] += 1;
        }
        let children = sizes.into_iter().map(|k| node(rng, k, depth + 1)).collect();
        if rng.gen_bool(0.2) {
            TreeNode::unlabeled(children)
        } else {
            TreeNode::phrase(LABELS[rng.gen_range(0..LABELS.len())], children)
        }
    }
    let n = rng.gen_range(1..=max);
    let mut t = node(rng, n, 0);
    let mut i = 0;
    number(&mut t, &mut i);
    t
}

fn number(t: &mut TreeNode, next: &mut usize) {
    match t {
        TreeNode::Phrase { children, .. } => children.iter_mut().for_each(|c| number(c, next)),
        TreeNode::Word { fields } => {
            *next += 1;
            fields.insert("form".into(), format!("w{next}"));
        }
        TreeNode::Trace { .. } => {}
    }
}

type Op = fn(&mut AnnotationGraph, ArcId) -> Result<(), cons::EditError>;

fn move_down(g: &mut AnnotationGraph, n: ArcId) -> Result<(), cons::EditError> {
    cons::move_down(g, n).map(drop)
}

const OPS: [(&str, Op); 6] = [
    ("move_down", move_down),
    ("move_up", cons::move_up),
    ("promote_right", cons::promote_right),
    ("promote_left", cons::promote_left),
    ("demote_right", cons::demote_right),
    ("demote_left", cons::demote_left),
];

/// Inverse pairs, in both orders.
const INVERSES: [(&str, Op, Op); 5] = [
    ("move_down;move_up", move_down, cons::move_up),
    ("demote_left;promote_right", cons::demote_left, cons::promote_right),
    ("promote_right;demote_left", cons::promote_right, cons::demote_left),
    ("demote_right;promote_left", cons::demote_right, cons::promote_left),
    ("promote_left;demote_right", cons::promote_left, cons::demote_right),
];

fn syntactic(g: &AnnotationGraph) -> Vec<ArcId> {
    g.arcs().filter(|a| a.kind.family() == Family::Syntax).map(|a| a.id).collect()
}

/// Terminal forms in order, read straight off the arcs sorted by start anchor.
fn terminal_string(g: &AnnotationGraph) -> Vec<String> {
    let mut leaves: Vec<_> = g
        .arcs()
        .filter(|a| matches!(a.kind, ArcType::Word | ArcType::Trace))
        .map(|a| (g.span(a.id).unwrap(), a.form().unwrap_or("").to_string()))
        .collect();
    leaves.sort();
    leaves.into_iter().map(|(_, f)| f).collect()
}

fn operation_laws() -> Check {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let started = Instant::now();
    let (mut applied, mut pairs) = (0usize, 0usize);
    for case in 0..1000 {
        let tree = random_tree(&mut rng, 8);
        let (g, _) = build_chart(&tree).map_err(|e| e.to_string())?;
        let surface = terminal_string(&g);
        for n in syntactic(&g) {
            let before = g.arc(n).unwrap().clone();
            for (name, op) in OPS {
                let mut h = g.clone();
                if op(&mut h, n).is_err() {
                    ensure(h == g, || format!("case {case}: refused {name} on {n} changed the graph"))?;
                    continue;
                }
                applied += 1;
                ensure(terminal_string(&h) == surface, || {
                    format!("case {case}: {name} on {n} changed the terminal string of {tree}")
                })?;
                let after = h.arc(n).map_err(|e| format!("case {case}: {name} lost {n}: {e}"))?;
                ensure(after.kind == before.kind && after.fields == before.fields, || {
                    format!("case {case}: {name} altered {n}")
                })?;
            }
            for (name, first, second) in INVERSES {
                let mut h = g.clone();
                if first(&mut h, n).is_ok() {
                    pairs += 1;
                    second(&mut h, n).map_err(|e| format!("case {case}: {name} on {n}: {e}"))?;
                    ensure(h == g, || format!("case {case}: {name} on {n} is not the identity in {tree}"))?;
                }
            }
        }
    }
    let elapsed = started.elapsed();
    ensure(applied > 1000 && pairs > 1000, || format!("too few applications: {applied}, {pairs}"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    println!("    {applied} operations and {pairs} inverse pairs in {elapsed:.2?}");
    Ok(())
}

// ---------------------------------------------------------------- 3

/// All ordered rooted trees with exactly `n` nodes, as child-count lists in
/// preorder.
fn shapes(n: usize) -> Vec<Vec<usize>> {
    fn forests(n: usize) -> Vec<Vec<Vec<usize>>> {
        // forests with n nodes in total, as lists of trees
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for first in 1..=n {
            for t in shapes(first) {
                for rest in forests(n - first) {
                    let mut f = vec![t.clone()];
                    f.extend(rest);
                    out.push(f);
                }
            }
        }
        out
    }
    if n == 0 {
        return vec![];
    }
    forests(n - 1)
        .into_iter()
        .map(|f| {
            let mut pre = vec![f.len()];
            for t in f {
                pre.extend(t);
            }
            pre
        })
        .collect()
}

#[derive(Clone, Copy)]
enum Labels {
    Distinct,
    Same,
    None,
}

/// Builds a tree from a preorder child-count list. Leaves are words unless
/// their bit in `traces` is set.
fn tree_from_shape(pre: &[usize], labels: Labels, traces: u32) -> TreeNode {
    fn go(pre: &[usize], at: &mut usize, labels: Labels, traces: u32, leaf: &mut u32, inner: &mut u8) -> TreeNode {
        let k = pre[*at];
        *at += 1;
        if k == 0 {
            let i = *leaf;
            *leaf += 1;
            return if traces & (1 << i) != 0 {
                TreeNode::trace("*T*", Some(&i.to_string()))
            } else {
                TreeNode::word(&format!("w{i}"))
            };
        }
        let name = (b'A' + *inner) as char;
        *inner += 1;
        let children = (0..k).map(|_| go(pre, at, labels, traces, leaf, inner)).collect();
        match labels {
            Labels::Distinct => TreeNode::phrase(&name.to_string(), children),
            Labels::Same => TreeNode::phrase("X", children),
            Labels::None => TreeNode::unlabeled(children),
        }
    }
    go(pre, &mut 0, labels, traces, &mut 0, &mut 0)
}

fn chart_bijection() -> Check {
    let mut checked = 0;
    let mut per_size = Vec::new();
    for n in 1..=5 {
        let all = shapes(n);
        // Catalan(n - 1) ordered trees with n nodes
        let catalan = [1, 1, 2, 5, 14][n - 1];
        ensure(all.len() == catalan, || format!("{} shapes with {n} nodes", all.len()))?;
        per_size.push(all.len());
        for pre in all {
            let leaves = pre.iter().filter(|k| **k == 0).count() as u32;
            for labels in [Labels::Distinct, Labels::Same, Labels::None] {
                for traces in 0..(1u32 << leaves) {
                    let t = tree_from_shape(&pre, labels, traces);
                    let (g, root) = build_chart(&t).map_err(|e| format!("{t}: {e}"))?;
                    let back = read_tree(&g, root).map_err(|e| format!("{t}: {e}"))?;
                    ensure(back == t, || format!("{t} came back as {back}"))?;
                    ensure(g.arc_count() == n, || format!("{t}: {} arcs", g.arc_count()))?;
                    checked += 1;
                }
            }
        }
    }
    println!("    {checked} labeled trees over shapes {per_size:?}");
    Ok(())
}

// ---------------------------------------------------------------- 4

/// Every tree over w1..w4 in which no phrase has a single phrasal child,
/// rendered with `•` for the unlabeled phrases.
fn oracle_trees(words: &[&str]) -> BTreeSet<String> {
    // phrases over words[i..j]; a child phrase never spans all of its parent
    fn phrases(words: &[&str], i: usize, j: usize) -> Vec<String> {
        sequences(words, i, j, (i, j))
            .into_iter()
            .map(|seq| format!("(• {})", seq.join(" ")))
            .collect()
    }
    // ordered child sequences covering words[i..j] inside a phrase over `outer`
    fn sequences(words: &[&str], i: usize, j: usize, outer: (usize, usize)) -> Vec<Vec<String>> {
        if i == j {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for k in i + 1..=j {
            let mut firsts = if (i, k) == outer { vec![] } else { phrases(words, i, k) };
            if k == i + 1 {
                firsts.push(words[i].to_string());
            }
            for f in firsts {
                for rest in sequences(words, k, j, outer) {
                    let mut s = vec![f.clone()];
                    s.extend(rest);
                    out.push(s);
                }
            }
        }
        out
    }
    phrases(words, 0, words.len()).into_iter().collect()
}

fn well_formed(t: &TreeNode) -> bool {
    match t {
        TreeNode::Phrase { children, .. } => {
            let unary_over_phrase = children.len() == 1 && matches!(children[0], TreeNode::Phrase { .. });
            !children.is_empty() && !unary_over_phrase && children.iter().all(well_formed)
        }
        _ => true,
    }
}

fn phrase_count(t: &TreeNode) -> usize {
    match t {
        TreeNode::Phrase { children, .. } => 1 + children.iter().map(phrase_count).sum::<usize>(),
        _ => 0,
    }
}

fn closure() -> Check {
    let words = ["w1", "w2", "w3", "w4"];
    let oracle = oracle_trees(&words);
    // the largest well-formed tree: every word in its own phrase, binary above
    let cap = oracle
        .iter()
        .map(|s| s.matches('(').count())
        .max()
        .unwrap_or(0);
    let flat = TreeNode::unlabeled(words.iter().map(|w| TreeNode::word(w)).collect());
    let (g, root) = build_chart(&flat).map_err(|e| e.to_string())?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut reached: BTreeSet<String> = BTreeSet::new();
    let mut queue = VecDeque::from([(g, root)]);
    while let Some((g, root)) = queue.pop_front() {
        let tree = read_tree(&g, root).map_err(|e| e.to_string())?;
        if !seen.insert(tree.to_string()) {
            continue;
        }
        if well_formed(&tree) {
            reached.insert(tree.to_string());
        }
        for n in syntactic(&g) {
            for (_, op) in OPS {
                let mut h = g.clone();
                if op(&mut h, n).is_err() {
                    continue;
                }
                let top = cons::find_root(&h).ok_or("no root after an edit")?;
                let next = read_tree(&h, top).map_err(|e| e.to_string())?;
                ensure(next.surface() == words, || format!("surface changed: {next}"))?;
                if phrase_count(&next) <= cap && !seen.contains(&next.to_string()) {
                    queue.push_back((h, top));
                }
            }
        }
    }
    let missing: Vec<_> = oracle.difference(&reached).collect();
    let extra: Vec<_> = reached.difference(&oracle).collect();
    ensure(missing.is_empty() && extra.is_empty(), || {
        format!("missing {missing:?}, unexpected {extra:?}")
    })?;
    println!(
        "    {} well-formed trees reached; {} states explored",
        reached.len(),
        seen.len()
    );
    Ok(())
}

// ---------------------------------------------------------------- 5

/// Parent of each word as an index: 0 is the root, i is word i.
type Parents = Vec<usize>;

fn acyclic_parent_functions(n: usize) -> BTreeSet<Parents> {
    let mut out = BTreeSet::new();
    let total = (n + 1).pow(n as u32);
    for code in 0..total {
        let mut p = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            p.push(c % (n + 1));
            c /= n + 1;
        }
        let reaches_root = (1..=n).all(|w| {
            let mut at = w;
            for _ in 0..=n {
                if at == 0 {
                    return true;
                }
                at = p[at - 1];
            }
            false
        });
        if reaches_root {
            out.insert(p);
        }
    }
    out
}

fn parents_of(g: &AnnotationGraph, root: ArcId, words: &[ArcId]) -> Parents {
    words
        .iter()
        .map(|w| match g.parent(*w) {
            Some(p) if p == root => 0,
            Some(p) => words.iter().position(|x| *x == p).map(|i| i + 1).unwrap_or(usize::MAX),
            None => usize::MAX,
        })
        .collect()
}

/// Whether `t` lies in the subtree of `s` under parent function `p`.
fn in_subtree(p: &Parents, s: usize, t: usize) -> bool {
    let mut at = t;
    while at != 0 {
        if at == s {
            return true;
        }
        at = p[at - 1];
    }
    false
}

fn cli() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_treegraph"));
    c.env_remove("TREEGRAPH_FORMAT");
    c
}

fn dependency_reachability() -> Check {
    for n in 1..=4 {
        let names: Vec<String> = (1..=n).map(|i| format!("w{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let (g, view) = init_flat(&refs).map_err(|e| e.to_string())?;
        let words = view.words(&g);
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([g]);
        let mut rejected = 0;
        while let Some(g) = queue.pop_front() {
            let p = parents_of(&g, view.root, &words);
            if !seen.insert(p.clone()) {
                continue;
            }
            for s in 1..=n {
                for t in 0..=n {
                    let target = if t == 0 { view.root } else { words[t - 1] };
                    let mut h = g.clone();
                    let result = view.move_subtree(&mut h, words[s - 1], target);
                    if t != 0 && in_subtree(&p, s, t) {
                        rejected += 1;
                        ensure(result.is_err() && h == g, || format!("cycle {p:?}: w{s} -> w{t} accepted"))?;
                    } else {
                        result.map_err(|e| format!("{p:?}: w{s} -> {t}: {e}"))?;
                        ensure(h.surface() == names, || "word order changed".into())?;
                        queue.push_back(h);
                    }
                }
            }
        }
        let oracle = acyclic_parent_functions(n);
        ensure(seen == oracle, || {
            format!("n={n}: reached {} of {} trees", seen.len(), oracle.len())
        })?;
        // (n+1)^(n-1) rooted labeled trees
        ensure(oracle.len() == (n + 1).pow(n as u32 - 1), || format!("oracle size {}", oracle.len()))?;
        println!("    {n} words: {} trees reached, {rejected} cycle attempts rejected", seen.len());
    }
    figure_tree_sequence()
}

fn figure_tree_sequence() -> Check {
    // parents read off the figures; C is the inserted constituent
    let expected: [(&str, &[(&str, &str)]); 4] = [
        ("tree1_to_2.script", &[("w1", "w4"), ("w2", "ROOT"), ("w3", "w4"), ("w4", "ROOT")]),
        (
            "tree2_to_3.script",
            &[("w1", "ROOT"), ("w2", "ROOT"), ("w3", "C"), ("C", "ROOT"), ("w4", "ROOT")],
        ),
        (
            "tree3_to_4.script",
            &[("w1", "w3"), ("w2", "ROOT"), ("w3", "C"), ("w4", "C"), ("C", "ROOT")],
        ),
        ("tree4_to_5.script", &[("w1", "w3"), ("w2", "ROOT"), ("w3", "ROOT"), ("w4", "ROOT")]),
    ];
    let dir = std::env::temp_dir().join(format!("treegraph-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let tree1 = cli_fixture("tree1.tut");
    let first = formats::read(FormatId::Turin, &std::fs::read_to_string(&tree1).unwrap())
        .map_err(|e| e.to_string())?;
    check_parents(&first[0].graph, &[("w1", "ROOT"), ("w2", "ROOT"), ("w3", "w4"), ("w4", "ROOT")], "Tree 1")?;
    let mut input = tree1;
    for (i, (script, parents)) in expected.iter().enumerate() {
        let output = dir.join(format!("tree{}.json", i + 2));
        let status = cli()
            .arg("edit")
            .arg("--script")
            .arg(cli_fixture(script))
            .arg(&input)
            .arg(&output)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(status.success(), || format!("{script}: {status}"))?;
        let text = std::fs::read_to_string(&output).map_err(|e| e.to_string())?;
        let s = formats::read(FormatId::Native, &text).map_err(|e| e.to_string())?;
        let g = &s[0].graph;
        ensure(g.validate().is_empty(), || format!("Tree {}: {:?}", i + 2, g.validate()))?;
        check_parents(g, parents, &format!("Tree {}", i + 2))?;
        if i == 2 {
            // in Tree 4 the constituent stretches over w3 and w4
            let c = g.arcs().find(|a| a.label() == Some("C")).ok_or("no C")?;
            ensure(g.span(c.id).unwrap() == (2, 4), || format!("C spans {:?}", g.span(c.id)))?;
        }
        input = output;
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}

fn check_parents(g: &AnnotationGraph, expected: &[(&str, &str)], tree: &str) -> Check {
    let name = |id: ArcId| {
        let a = g.arc(id).unwrap();
        a.form().or(a.label()).unwrap_or("?").to_string()
    };
    let mut got = BTreeMap::new();
    for a in g.arcs().filter(|a| a.kind != ArcType::Root) {
        got.insert(name(a.id), a.parent.map(name).unwrap_or_default());
    }
    let want: BTreeMap<String, String> = expected.iter().map(|(c, p)| (c.to_string(), p.to_string())).collect();
    ensure(got == want, || format!("{tree}: parents {got:?}, expected {want:?}"))
}

// ---------------------------------------------------------------- 6

fn propbank_hulls() -> Check {
    let s = read_penn("(S (NP John) (VP belongs (PP to (NP the club))))").map_err(|e| e.to_string())?;
    let mut g = s[0].graph.clone();
    let (belongs, to) = (by_form(&g, "belongs")?, by_form(&g, "to")?);
    let np = |g: &AnnotationGraph, first: &str| -> Result<ArcId, String> {
        let w = by_form(g, first)?;
        g.ancestors(w)
            .into_iter()
            .find(|a| g.arc(*a).unwrap().label() == Some("NP"))
            .ok_or_else(|| format!("no NP over {first}"))
    };
    let (john, club) = (np(&g, "John")?, np(&g, "the")?);
    let mut p = Proposition::new();
    p.tag_predicate(&g, &[NodeRef::Arc(belongs), NodeRef::Arc(to)]).map_err(|e| e.to_string())?;
    p.tag_argument(&g, "Arg0", &[NodeRef::Arc(john)]).map_err(|e| e.to_string())?;
    p.tag_argument(&g, "Arg1", &[NodeRef::Arc(club)]).map_err(|e| e.to_string())?;
    let made = materialize(&mut g, &p).map_err(|e| e.to_string())?;
    let pred = g.arc(made[0]).unwrap();
    // anchors α1..α6 sit at positions 0..5
    ensure(pred.kind == ArcType::Pred && g.span(pred.id).unwrap() == (1, 3), || {
        format!("pred spans {:?}", g.span(pred.id))
    })?;
    ensure(pred.refs[..2] == [belongs, to], || format!("pred refs {:?}", pred.refs))?;
    let arg1 = g.arc(made[2]).unwrap();
    ensure(arg1.label() == Some("Arg1") && g.span(arg1.id).unwrap() == (3, 5), || {
        format!("Arg1 spans {:?}", g.span(arg1.id))
    })?;
    ensure(pred.refs[2..] == [made[1], made[2]], || "pred does not point at its roles".into())?;

    // the swim proposition, by node coordinates
    let s = read_penn("(S (NP-1 John) (VP wants (S (NP *-1) (VP to swim))))").map_err(|e| e.to_string())?;
    let mut g = s[0].graph.clone();
    let c = |k, h| NodeRef::Coord(NodeCoordinate::new(k, h));
    let mut p = Proposition::new();
    p.tag_predicate(&g, &[c(3, 0)]).map_err(|e| e.to_string())?;
    p.tag_argument(&g, "Arg0", &[c(2, 0)]).map_err(|e| e.to_string())?;
    p.add_equivalence(&g, c(2, 0), c(0, 0)).map_err(|e| e.to_string())?;
    // John wants *-1 to swim: the lower VP starts at terminal 3
    let vp = g.arcs().find(|a| a.label() == Some("VP") && g.span(a.id).unwrap().0 == 3).ok_or("no VP(3,0)")?;
    ensure(p.predicate == BTreeSet::from([vp.id]), || "(3,0) is not the lower VP".into())?;
    materialize(&mut g, &p).map_err(|e| e.to_string())?;
    let back = extract(&g).map_err(|e| e.to_string())?;
    ensure(back == vec![p.clone()], || format!("extracted {back:?}"))?;

    // hull law against brute force over covered terminals
    let mut rng = StdRng::seed_from_u64(0xa11);
    for case in 0..500 {
        let tree = random_tree(&mut rng, 8);
        let (mut g, _) = build_chart(&tree).map_err(|e| e.to_string())?;
        let nodes = syntactic(&g);
        let terminals: Vec<_> = g.arcs().filter(|a| a.kind.is_terminal()).map(|a| a.id).collect();
        // the positions a node covers, found by walking up from each terminal
        let covered = |g: &AnnotationGraph, n: ArcId| -> Vec<(usize, usize)> {
            terminals
                .iter()
                .filter(|t| **t == n || g.ancestors(**t).contains(&n))
                .map(|t| g.span(*t).unwrap())
                .collect()
        };
        let pick = |rng: &mut StdRng| -> BTreeSet<ArcId> {
            let k = rng.gen_range(1..=3);
            (0..k).map(|_| nodes[rng.gen_range(0..nodes.len())]).collect()
        };
        let mut p = Proposition::new();
        let sets: Vec<BTreeSet<ArcId>> = (0..rng.gen_range(1..=4)).map(|_| pick(&mut rng)).collect();
        let as_refs = |s: &BTreeSet<ArcId>| s.iter().map(|a| NodeRef::Arc(*a)).collect::<Vec<_>>();
        p.tag_predicate(&g, &as_refs(&sets[0])).map_err(|e| e.to_string())?;
        let mut n_args = 0;
        for (i, s) in sets[1..].iter().enumerate() {
            if rng.gen_bool(0.7) {
                p.tag_argument(&g, &format!("Arg{i}"), &as_refs(s)).map_err(|e| e.to_string())?;
                n_args += 1;
            } else {
                p.tag_modifier(&g, &format!("ArgM-{i}"), &as_refs(s)).map_err(|e| e.to_string())?;
            }
        }
        let expected: Vec<(usize, usize)> = std::iter::once(&sets[0])
            .chain(&sets[1..])
            .map(|s| {
                let spans: Vec<_> = s.iter().flat_map(|n| covered(&g, *n)).collect();
                (spans.iter().map(|x| x.0).min().unwrap(), spans.iter().map(|x| x.1).max().unwrap())
            })
            .collect();
        let made = materialize(&mut g, &p).map_err(|e| e.to_string())?;
        // arguments come before modifiers among the role arcs
        let mut role_sets: Vec<&BTreeSet<ArcId>> = p.arguments.values().collect();
        role_sets.extend(p.modifiers.values());
        ensure(made.len() == sets.len() && n_args == p.arguments.len(), || format!("case {case}: {} arcs", made.len()))?;
        for (arc, set) in made[1..].iter().zip(role_sets) {
            let i = sets[1..].iter().position(|s| s == set).unwrap() + 1;
            ensure(g.span(*arc).unwrap() == expected[i], || {
                format!("case {case}: {} spans {:?}, oracle {:?}", arc, g.span(*arc), expected[i])
            })?;
        }
        ensure(g.span(made[0]).unwrap() == expected[0], || {
            format!("case {case}: pred spans {:?}, oracle {:?}", g.span(made[0]), expected[0])
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------- 7

fn parse(format: FormatId, name: &str) -> Result<Vec<Sentence>, String> {
    let s = formats::read(format, &core_fixture(name)).map_err(|e| format!("{name}: {e}"))?;
    for (i, x) in s.iter().enumerate() {
        let v = x.graph.validate();
        ensure(v.is_empty(), || format!("{name} sentence {}: {v:?}", i + 1))?;
    }
    Ok(s)
}

fn format_conformance() -> Check {
    // Turin: heads and relations as annotated, including the fused 13.1
    let s = parse(FormatId::Turin, "turin.txt")?;
    let g = &s[0].graph;
    let by_index = |i: &str| g.arcs().find(|a| a.field("index") == Some(i)).ok_or(format!("no token {i}"));
    for (idx, head, rel) in [
        ("1", "0", "TOP-VERB"),
        ("2", "1", "PREDCOMPL-SUBJ"),
        ("3", "1", "OPEN-PARENTHETICAL"),
        ("4", "1", "PREPMOD"),
        ("5", "4", "PREPARG"),
        ("6", "5", "COORD"),
        ("7", "6", "COORD-2ND"),
        ("8", "1", "CLOSE-PARENTHETICAL"),
        ("9", "1", "SUBJ"),
        ("10", "11", "ADJCMOD-ORDIN"),
        ("11", "9", "NBAR"),
        ("12", "11", "ADJCMOD-QUALIF"),
        ("13", "11", "PREPMOD-LOC-SPEC"),
        ("13.1", "13", "PREPARG"),
        ("14", "13.1", "NBAR"),
    ] {
        let w = by_index(idx)?;
        let want = if head == "0" { s[0].root } else { by_index(head)?.id };
        ensure(w.parent == Some(want) && w.field("rel") == Some(rel), || {
            format!("turin {idx}: parent {:?} rel {:?}", w.parent, w.field("rel"))
        })?;
    }

    // TIGER: n1_500 is an S over the two words
    let s = parse(FormatId::TigerXml, "tiger.xml")?;
    let g = &s[0].graph;
    let root = g.arc(s[0].root).unwrap();
    ensure(root.label() == Some("S"), || format!("tiger root {:?}", root.label()))?;
    let kids: Vec<_> = g.children_in_order(root.id).iter().map(|k| g.arc(*k).unwrap().form()).collect();
    ensure(kids == [Some("the"), Some("boy")], || format!("tiger children {kids:?}"))?;

    // UAM: the subject carries ID-1 and the empty subject REF-1
    let s = parse(FormatId::BracketRecord, "uam.rec")?;
    let g = &s[0].graph;
    let el = g.arc(by_form(g, "El")?).unwrap();
    ensure(el.field("lemma") == Some("el") && el.field("pos") == Some("ART"), || format!("El: {:?}", el.fields))?;
    let linked = g.arcs().filter(|a| a.field("coindex") == Some("1")).count();
    let trace = g.arcs().find(|a| a.kind == ArcType::Trace).ok_or("no trace in UAM")?;
    ensure(linked == 2 && trace.parent.is_some(), || format!("{linked} coindexed arcs"))?;

    // Floresta: depth from the = prefix
    let s = parse(FormatId::Floresta, "floresta.txt")?;
    let g = &s[0].graph;
    let tree = read_tree(g, s[0].root).map_err(|e| e.to_string())?.to_string();
    ensure(
        tree == "(fcl (np O 7_e_Meio) é (np um ex-libris (pp de (np a noite algarvia))) .)",
        || format!("floresta: {tree}"),
    )?;
    let e = g.arc(by_form(g, "é")?).unwrap();
    ensure(e.field("function") == Some("P") && e.field("pos") == Some("v-fin"), || format!("é: {:?}", e.fields))?;

    // French: element nesting becomes constituency
    let s = parse(FormatId::NestedXml, "french.xml")?;
    let tree = read_tree(&s[0].graph, s[0].root).map_err(|e| e.to_string())?.to_string();
    ensure(
        tree == "(S (NP The proportion (PP of students)) (PP compared to (NP the population (PP of (NP our country)))) (PONCT ,))",
        || format!("french: {tree}"),
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("fixture roundtrips", fixture_roundtrips),
        ("elementary-operation laws", operation_laws),
        ("chart bijection", chart_bijection),
        ("closure", closure),
        ("dependency reachability and safety", dependency_reachability),
        ("propbank hulls", propbank_hulls),
        ("format conformance", format_conformance),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(()) => println!("criterion {}: pass ({name})", i + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {}: FAIL ({name}): {e}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
