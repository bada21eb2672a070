mod oracles;

use oracles::graphs::{apsp, dag_edges, is_cycle, respects, state_graph, walk, UNREACHABLE};
use proptest::prelude::*;
use protomodel::graph::{
    build_graph, synthesize_plan, ArgSpec, FunctionModule, GraphError, ProtocolModule,
};
use protomodel::state::{input_prefix, PrefixError};
use protomodel::SemanticType;

fn module(i: usize) -> ProtocolModule {
    FunctionModule::new(
        format!("m{i}"),
        format!("Module {i}."),
        vec![
            ArgSpec::new("x", SemanticType::Boolean, "Input."),
            ArgSpec::new("result", SemanticType::Boolean, "Output."),
        ],
    )
    .into()
}

fn call_edges(edges: &[(usize, usize)]) -> Vec<(String, Vec<String>)> {
    let mut out: Vec<(String, Vec<String>)> = Vec::new();
    for &(a, b) in edges {
        let caller = format!("m{a}");
        match out.iter_mut().find(|(c, _)| *c == caller) {
            Some((_, cs)) => cs.push(format!("m{b}")),
            None => out.push((caller, vec![format!("m{b}")])),
        }
    }
    out
}

fn named(edges: &[(usize, usize)]) -> Vec<(String, String)> {
    edges
        .iter()
        .map(|&(a, b)| (format!("m{a}"), format!("m{b}")))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn topo_order_respects_calls(n in 1usize..=20, raw in prop::collection::vec((0usize..20, 0usize..20), 0..40)) {
        let edges = dag_edges(&raw, n);
        let g = build_graph((0..n).map(module).collect(), vec![], call_edges(&edges)).unwrap();
        let order = g.topo_order().unwrap();
        prop_assert_eq!(order.len(), n);
        prop_assert!(respects(&order, &named(&edges)));
        let main = format!("m{}", n - 1);
        if let Ok(plan) = synthesize_plan(&g, Some(&main)) {
            let names: Vec<String> = plan.assembly_order.iter().map(|s| s.to_string()).collect();
            let reachable: Vec<(String, String)> = named(&edges)
                .into_iter()
                .filter(|(a, b)| names.contains(a) && names.contains(b))
                .collect();
            prop_assert!(respects(&names, &reachable));
        }
    }

    #[test]
    fn back_edge_cycle_is_named(n in 2usize..=20, raw in prop::collection::vec((0usize..20, 0usize..20), 1..40)) {
        let mut edges = dag_edges(&raw, n);
        prop_assume!(!edges.is_empty());
        let (a, b) = edges[0];
        edges.push((b, a));
        match build_graph((0..n).map(module).collect(), vec![], call_edges(&edges)) {
            Err(GraphError::Cycle { path, .. }) => prop_assert!(is_cycle(&path, &named(&edges)), "{:?}", path),
            other => prop_assert!(false, "expected a cycle, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn bfs_prefix_is_shortest(n in 1usize..=12, edges in prop::collection::vec((0usize..12, 0usize..12, 0usize..4), 0..40)) {
        let g = state_graph(n, &edges);
        let d = apsp(&g);
        for (j, s) in g.states.iter().enumerate() {
            match input_prefix(&g, s) {
                Ok(p) => {
                    prop_assert_eq!(p.len(), d[0][j]);
                    prop_assert_eq!(walk(&g, &p), Some(s.as_str()));
                }
                Err(PrefixError::Unreachable(_)) => prop_assert_eq!(d[0][j], UNREACHABLE),
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }
}
