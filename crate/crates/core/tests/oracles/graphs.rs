//! Reference graph algorithms for checking planner and state-driver output.

use protomodel::state::{StateGraph, Transition};

pub const UNREACHABLE: usize = usize::MAX;

/// State graph over `S0..S{n-1}` with `S0` renamed `INITIAL`. Each edge
/// `(from, to, label)` gets input `i{label}`; duplicates of a (from, input)
/// pair are dropped, keeping the first.
pub fn state_graph(n: usize, edges: &[(usize, usize, usize)]) -> StateGraph {
    let name = |i: usize| {
        if i == 0 {
            "INITIAL".to_string()
        } else {
            format!("S{i}")
        }
    };
    let mut transitions: Vec<Transition> = Vec::new();
    for &(a, b, l) in edges {
        let t = Transition {
            from: name(a % n),
            input: format!("i{l}"),
            to: name(b % n),
        };
        if !transitions
            .iter()
            .any(|u| u.from == t.from && u.input == t.input)
        {
            transitions.push(t);
        }
    }
    StateGraph {
        states: (0..n).map(name).collect(),
        transitions,
        initial: name(0),
    }
}

/// Floyd-Warshall over the graph's states, unit edge weights.
pub fn apsp(g: &StateGraph) -> Vec<Vec<usize>> {
    let n = g.states.len();
    let idx = |s: &str| g.states.iter().position(|x| x == s).expect("state listed");
    let mut d = vec![vec![UNREACHABLE; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for t in &g.transitions {
        let (a, b) = (idx(&t.from), idx(&t.to));
        d[a][b] = d[a][b].min(1);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] != UNREACHABLE && d[k][j] != UNREACHABLE && d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

/// Follows `inputs` from the initial state using the listed transitions.
pub fn walk<'a>(g: &'a StateGraph, inputs: &[String]) -> Option<&'a str> {
    let mut s = g.initial.as_str();
    for i in inputs {
        s = g
            .transitions
            .iter()
            .find(|t| t.from == s && &t.input == i)
            .map(|t| t.to.as_str())?;
    }
    Some(s)
}

/// Acyclic edge list from arbitrary pairs: an edge `(a, b)` is kept as caller `max` -> callee
/// `min`, so no cycle can form.
pub fn dag_edges(raw: &[(usize, usize)], n: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = raw
        .iter()
        .map(|&(a, b)| (a % n, b % n))
        .filter(|(a, b)| a != b)
        .map(|(a, b)| (a.max(b), a.min(b)))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Whether every callee precedes its caller in `order`.
pub fn respects(order: &[String], edges: &[(String, String)]) -> bool {
    let pos = |n: &str| order.iter().position(|o| o == n);
    edges
        .iter()
        .all(|(caller, callee)| match (pos(caller), pos(callee)) {
            (Some(a), Some(b)) => b < a,
            _ => false,
        })
}

/// Whether `path` (first == last) walks only existing caller -> callee edges.
pub fn is_cycle(path: &[String], edges: &[(String, String)]) -> bool {
    path.len() >= 2
        && path.first() == path.last()
        && path
            .windows(2)
            .all(|w| edges.iter().any(|(a, b)| *a == w[0] && *b == w[1]))
}
