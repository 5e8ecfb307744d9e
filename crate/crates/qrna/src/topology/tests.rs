use std::collections::BTreeMap;

use proptest::prelude::*;

use super::routing::build_table;
use super::*;

/// The bundled three-network internetwork: the minimal topology consistent
/// with the expected routing tables of Node11 and Node51.
pub const SMALLNET: &str = include_str!("../../fixtures/smallnet.topo");

fn smallnet() -> Topology {
    Topology::parse(SMALLNET).unwrap()
}

fn entries(t: &RoutingTable) -> Vec<(String, String)> {
    t.entries
        .iter()
        .map(|(d, e)| (d.clone(), e.to_string()))
        .collect()
}

#[test]
fn parse_smallnet() {
    let topo = smallnet();
    assert_eq!(topo.nodes().count(), 7);
    assert!(topo.is_network("Net5"));
    assert_eq!(
        topo.gateways_of("Net5").unwrap(),
        vec!["Node51".to_string()]
    );
    assert_eq!(topo.depth("Node51"), 1);
    assert_eq!(topo.links().len(), 6);
}

#[test]
fn parse_link_attributes() {
    let topo = Topology::parse(
        "net N\nnode A in N\nnode B in N\nlink A B cost=2.5 flink=0.9 pgen=0.8 cdelay=1.5\n",
    )
    .unwrap();
    let link = topo.link_between("A", "B").unwrap();
    assert_eq!(link.cost, 2.5);
    assert_eq!(link.f_link, 0.9);
    assert_eq!(link.p_gen, 0.8);
    assert_eq!(link.c_delay, 1.5);
}

#[test]
fn parse_rejects_malformed_lines() {
    let err = Topology::parse("node Lonely\n").unwrap_err();
    assert!(matches!(err, TopologyError::Parse { line: 1, .. }));
    let err = Topology::parse("net N\nnode A in N\nlink A A\n").unwrap_err();
    assert!(matches!(err, TopologyError::Parse { line: 3, .. }));
    let err = Topology::parse("net N\nnode A in N\nnode B in N\nlink A B flink=0.2\n").unwrap_err();
    assert!(matches!(err, TopologyError::Parse { line: 4, .. }));
}

#[test]
fn node11_table_has_expected_entries() {
    let topo = smallnet();
    let table = build_table(&topo, "Node11", &link_cost).unwrap();
    assert_eq!(
        entries(&table),
        vec![
            ("Net1".to_string(), "local".to_string()),
            ("Net5".to_string(), "via Node19".to_string()),
            ("Net7".to_string(), "via Net5".to_string()),
            ("Node19".to_string(), "direct".to_string()),
        ]
    );
}

#[test]
fn node51_table_has_expected_entries() {
    let topo = smallnet();
    let table = build_table(&topo, "Node51", &link_cost).unwrap();
    assert_eq!(
        entries(&table),
        vec![
            ("Net1".to_string(), "via Node19".to_string()),
            ("Net5".to_string(), "process-locally".to_string()),
            ("Net7".to_string(), "via Node71".to_string()),
            ("Node52".to_string(), "direct".to_string()),
            ("Node55".to_string(), "via Node52".to_string()),
        ]
    );
}

#[test]
fn triangle_routes_all_direct() {
    let topo = Topology::parse(
        "net N\nnode A in N\nnode B in N\nnode C in N\nlink A B\nlink B C\nlink A C\n",
    )
    .unwrap();
    let tables = build_tables(&topo, &link_cost).unwrap();
    for (owner, table) in &tables {
        for (dest, entry) in &table.entries {
            if dest != "N" {
                assert_eq!(entry, &RouteEntry::Direct, "{owner} -> {dest}");
            }
        }
    }
}

#[test]
fn disconnected_topology_reported() {
    let topo = Topology::parse("net N\nnode A in N\nnode B in N\nnode C in N\nlink A B\n").unwrap();
    let err = build_tables(&topo, &link_cost).unwrap_err();
    assert!(matches!(err, TopologyError::Disconnected { .. }));
}

#[test]
fn resolve_collapses_foreign_nodes() {
    let topo = smallnet();
    assert_eq!(
        resolve_destination(&topo, "Node11", "Node55").unwrap(),
        "Net5"
    );
    assert_eq!(
        resolve_destination(&topo, "Node11", "Node19").unwrap(),
        "Node19"
    );
    assert_eq!(
        resolve_destination(&topo, "Node51", "Node77").unwrap(),
        "Net7"
    );
    assert_eq!(
        resolve_destination(&topo, "Node51", "Net5").unwrap(),
        "Net5"
    );
}

#[test]
fn resolve_is_idempotent() {
    let topo = smallnet();
    for viewer in ["Node11", "Node19", "Node51", "Node55", "Node77"] {
        for target in topo.element_names().map(str::to_string).collect::<Vec<_>>() {
            let once = resolve_destination(&topo, viewer, &target).unwrap();
            let twice = resolve_destination(&topo, viewer, &once).unwrap();
            assert_eq!(once, twice, "viewer {viewer} target {target}");
        }
    }
}

#[test]
fn resolve_unknown_destination() {
    let topo = smallnet();
    assert!(matches!(
        resolve_destination(&topo, "Node11", "Node99"),
        Err(TopologyError::UnknownDestination { .. })
    ));
}

#[test]
fn select_path_adjacent_nodes() {
    let topo = smallnet();
    assert_eq!(
        select_path(&topo, "Node11", "Node19", &link_cost).unwrap(),
        vec!["Node11", "Node19"]
    );
}

#[test]
fn select_path_across_networks() {
    let topo = smallnet();
    assert_eq!(
        select_path(&topo, "Node11", "Net7", &link_cost).unwrap(),
        vec!["Net1", "Net5", "Net7"]
    );
}

#[test]
fn select_path_unreachable() {
    let topo = Topology::parse("net N\nnode A in N\nnode B in N\n").unwrap();
    assert!(matches!(
        select_path(&topo, "A", "B", &link_cost),
        Err(TopologyError::Unreachable { .. })
    ));
}

#[test]
fn physical_path_spans_gateways() {
    let topo = smallnet();
    assert_eq!(
        physical_path(&topo, "Node51", "Node11", &link_cost).unwrap(),
        vec!["Node51", "Node19", "Node11"]
    );
    assert_eq!(
        physical_path(&topo, "Node11", "Node77", &link_cost).unwrap(),
        vec!["Node11", "Node19", "Node51", "Node71", "Node77"]
    );
}

#[test]
fn center_of_worked_example_is_net5() {
    let topo = smallnet();
    let targets = vec![
        "Node11".to_string(),
        "Node55".to_string(),
        "Node77".to_string(),
    ];
    assert_eq!(
        select_center(&topo, "Node11", &targets, &link_cost).unwrap(),
        "Net5"
    );
}

#[test]
fn center_of_symmetric_pair_breaks_ties_lexicographically() {
    let topo = smallnet();
    let targets = vec!["Node11".to_string(), "Node19".to_string()];
    assert_eq!(
        select_center(&topo, "Node11", &targets, &link_cost).unwrap(),
        "Node11"
    );
}

#[test]
fn center_of_path_graph_is_median() {
    let topo =
        Topology::parse("net N\nnode A in N\nnode B in N\nnode C in N\nlink A B\nlink B C\n")
            .unwrap();
    let targets = vec!["A".to_string(), "B".to_string(), "C".to_string()];
    assert_eq!(
        select_center(&topo, "A", &targets, &link_cost).unwrap(),
        "B"
    );
}

#[test]
fn swap_order_single_middle() {
    let chain: Vec<String> = ["A", "B", "C"].iter().map(|s| s.to_string()).collect();
    let plan = swap_order(&chain);
    let SwapPlan::Swap { at, left, right } = &plan else {
        panic!("expected a swap");
    };
    assert_eq!(at, "B");
    assert!(matches!(**left, SwapPlan::Link { .. }));
    assert!(matches!(**right, SwapPlan::Link { .. }));
}

#[test]
fn swap_order_five_chain_doubles() {
    let chain: Vec<String> = ["A", "B", "C", "D", "E"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let plan = swap_order(&chain);
    let SwapPlan::Swap { at, left, right } = &plan else {
        panic!("expected a swap");
    };
    assert_eq!(at, "C");
    let SwapPlan::Swap { at: la, .. } = &**left else {
        panic!("expected left swap");
    };
    let SwapPlan::Swap { at: ra, .. } = &**right else {
        panic!("expected right swap");
    };
    assert_eq!(la, "B");
    assert_eq!(ra, "D");
}

#[test]
fn swap_order_single_link_has_no_swaps() {
    let chain: Vec<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
    let plan = swap_order(&chain);
    assert_eq!(
        plan,
        SwapPlan::Link {
            a: "A".into(),
            b: "B".into()
        }
    );
    assert_eq!(plan.swap_count(), 0);
}

#[test]
fn nested_networks_route_through_both_levels() {
    let topo = Topology::parse(include_str!("../../fixtures/nested.topo")).unwrap();
    let tables = build_tables(&topo, &link_cost).unwrap();

    // W11 sits two levels deep: its lab precisely, the peer lab opaquely,
    // and the far campus delegated to the peer lab
    assert_eq!(
        entries(&tables["W11"]),
        vec![
            ("East".to_string(), "via Lab2".to_string()),
            ("Lab1".to_string(), "local".to_string()),
            ("Lab2".to_string(), "via W19".to_string()),
            ("W19".to_string(), "direct".to_string()),
            ("West".to_string(), "local".to_string()),
        ]
    );
    // W21 gateways both its lab and the whole campus
    assert_eq!(
        entries(&tables["W21"]),
        vec![
            ("East".to_string(), "via E31".to_string()),
            ("Lab1".to_string(), "via W19".to_string()),
            ("Lab2".to_string(), "process-locally".to_string()),
            ("W29".to_string(), "direct".to_string()),
            ("West".to_string(), "process-locally".to_string()),
        ]
    );

    // visibility collapses two levels for foreign leaves
    assert_eq!(resolve_destination(&topo, "W11", "E39").unwrap(), "East");
    assert_eq!(resolve_destination(&topo, "E39", "W11").unwrap(), "West");
    assert_eq!(resolve_destination(&topo, "W11", "W29").unwrap(), "Lab2");

    // forwarding crosses both boundaries and terminates
    let mut at = "W11".to_string();
    let mut trail = vec![at.clone()];
    while let Some(next) = next_physical_hop(&topo, &tables, &at, "E39").unwrap() {
        at = next;
        trail.push(at.clone());
    }
    assert_eq!(trail, vec!["W11", "W19", "W21", "E31", "E39"]);
}

#[test]
fn forwarding_by_tables_terminates_everywhere() {
    let topo = smallnet();
    let tables = build_tables(&topo, &link_cost).unwrap();
    let nodes: Vec<String> = topo.nodes().map(|e| e.name.clone()).collect();
    let bound = nodes.len();
    for src in &nodes {
        for dst in &nodes {
            let mut at = src.clone();
            let mut hops = 0;
            while let Some(next) = next_physical_hop(&topo, &tables, &at, dst).unwrap() {
                assert!(
                    topo.link_between(&at, &next).is_some(),
                    "{at} -> {next} is not a physical link"
                );
                at = next;
                hops += 1;
                assert!(hops <= bound, "loop routing {src} -> {dst}");
            }
            assert_eq!(&at, dst, "routing {src} -> {dst} stalled at {at}");
        }
    }
}

#[test]
fn forwarding_toward_network_stops_at_gateway() {
    let topo = smallnet();
    let tables = build_tables(&topo, &link_cost).unwrap();
    let mut at = "Node11".to_string();
    let mut trail = vec![at.clone()];
    while let Some(next) = next_physical_hop(&topo, &tables, &at, "Net5").unwrap() {
        at = next;
        trail.push(at.clone());
    }
    assert_eq!(trail, vec!["Node11", "Node19", "Node51"]);
}

/// Exhaustive simple-path enumeration, the independent check for Dijkstra.
fn brute_force_best(
    graph: &BTreeMap<String, Vec<(String, f64)>>,
    src: &str,
    dst: &str,
) -> Option<(f64, Vec<String>)> {
    fn explore(
        graph: &BTreeMap<String, Vec<(String, f64)>>,
        at: &str,
        dst: &str,
        cost: f64,
        path: &mut Vec<String>,
        best: &mut Option<(f64, Vec<String>)>,
    ) {
        if at == dst {
            let better = match best {
                None => true,
                Some((bc, bp)) => cost < *bc - 1e-12 || ((cost - *bc).abs() <= 1e-12 && path < bp),
            };
            if better {
                *best = Some((cost, path.clone()));
            }
            return;
        }
        for (next, w) in graph.get(at).into_iter().flatten() {
            if path.contains(next) {
                continue;
            }
            path.push(next.clone());
            explore(graph, next, dst, cost + w, path, best);
            path.pop();
        }
    }
    let mut best = None;
    let mut path = vec![src.to_string()];
    explore(graph, src, dst, 0.0, &mut path, &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Random flat graphs of up to 8 nodes: select_path must agree with the
    /// brute-force enumeration on both cost and tie-broken path.
    #[test]
    fn select_path_matches_brute_force(
        n in 2usize..=8,
        edges in prop::collection::vec((0usize..8, 0usize..8, 1u8..4), 1..20),
    ) {
        let names: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
        let mut text = String::from("net Top\n");
        for name in &names {
            text.push_str(&format!("node {name} in Top\n"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (a, b, c) in edges {
            let (a, b) = (a % n, b % n);
            if a == b || !seen.insert((a.min(b), a.max(b))) {
                continue;
            }
            text.push_str(&format!("link {} {} cost={}\n", names[a], names[b], c));
        }
        let topo = Topology::parse(&text).unwrap();
        let graph = topo.node_graph(&link_cost);
        for src in &names {
            for dst in &names {
                if src == dst { continue; }
                let expected = brute_force_best(&graph, src, dst);
                let actual = select_path(&topo, src, dst, &link_cost);
                match expected {
                    None => prop_assert!(actual.is_err()),
                    Some((cost, path)) => {
                        let got = actual.unwrap();
                        prop_assert_eq!(&got, &path);
                        let got_cost: f64 = got.windows(2).map(|w| {
                            topo.link_between(&w[0], &w[1]).unwrap().cost
                        }).sum();
                        prop_assert!((got_cost - cost).abs() < 1e-9);
                    }
                }
            }
        }
    }

    /// Swap plans have chain-length minus two swaps and enumerate the
    /// chain's links in order.
    #[test]
    fn swap_order_structure(len in 2usize..10) {
        let chain: Vec<String> = (0..len).map(|i| format!("R{i}")).collect();
        let plan = swap_order(&chain);
        prop_assert_eq!(plan.swap_count(), len - 2);
        let leaves = plan.leaves();
        prop_assert_eq!(leaves.len(), len - 1);
        for (i, (a, b)) in leaves.iter().enumerate() {
            prop_assert_eq!(a, &chain[i]);
            prop_assert_eq!(b, &chain[i + 1]);
        }
        let (start, end) = plan.endpoints();
        prop_assert_eq!(start, chain[0].clone());
        prop_assert_eq!(end, chain[len - 1].clone());
    }
}
