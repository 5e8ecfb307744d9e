use super::*;
use crate::link::{Mode, SimConfig};
use crate::request::QubitAddress;
use crate::topology::{build_tables, link_cost};

const SMALLNET: &str = include_str!("../../fixtures/smallnet.topo");
const SMALLNET_F90: &str = include_str!("../../fixtures/smallnet_f90.topo");
const TWOHOP: &str = include_str!("../../fixtures/twohop.topo");

fn cluster_request(f_min: f64, s_max: f64) -> StateRequest {
    StateRequest {
        id: 1,
        spec: StateSpec::Named(NamedState::LinearCluster(3)),
        f_min,
        s_max,
        targets: vec![
            QubitAddress::new("Node11", 1000),
            QubitAddress::new("Node55", 1000),
            QubitAddress::new("Node77", 1000),
        ],
        encoding: Encoding::Raw,
    }
}

struct Fixture {
    topo: Topology,
    tables: BTreeMap<String, RoutingTable>,
}

impl Fixture {
    fn new(text: &str) -> Fixture {
        let topo = Topology::parse(text).unwrap();
        let tables = build_tables(&topo, &link_cost).unwrap();
        Fixture { topo, tables }
    }

    fn ctx(&self, cfg: SimConfig) -> SimContext {
        SimContext::new(cfg)
    }

    fn submit(&self, ctx: &mut SimContext, request: Request, origin: &str) -> Response {
        let prov = Provenance::new(origin, request.id());
        let mut env = Env::new(&self.topo, &self.tables, ctx);
        deliver(&mut env, request, &prov, "client", origin, 0)
    }
}

fn det_cfg() -> SimConfig {
    SimConfig::default()
}

#[test]
fn local_only_request_succeeds_in_place() {
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let req = StateRequest {
        id: 1,
        spec: StateSpec::Named(NamedState::BellPhiPlus),
        f_min: 0.99,
        s_max: 0.1,
        targets: vec![
            QubitAddress::new("Node51", 1),
            QubitAddress::new("Node51", 2),
        ],
        encoding: Encoding::Raw,
    };
    let resp = fx.submit(&mut ctx, Request::State(req), "Node51");
    assert_eq!(resp.status, Status::Ok);
    assert!((resp.measured_f - 1.0).abs() < 1e-12);
    // no transport machinery involved
    assert_eq!(ctx.counters.pairs_generated, 0);
    assert_eq!(ctx.counters.teleports, 0);
}

#[test]
fn worked_example_delivers_perfect_cluster() {
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let resp = fx.submit(
        &mut ctx,
        Request::State(cluster_request(0.99, 0.1)),
        "Node11",
    );
    assert_eq!(resp.status, Status::Ok);
    assert!((resp.measured_f - 1.0).abs() < 1e-9);
    assert!(resp.measured_s < 1e-9);
    // three end-to-end pairs, three teleports, three swaps along 2-hop paths
    assert_eq!(ctx.counters.teleports, 3);
    assert_eq!(ctx.counters.pairs_generated, 6);
    assert_eq!(ctx.counters.swaps, 3);
    // delivered qubits remain bound under the application's own names
    let expected: Vec<BoundId> = cluster_request(0.99, 0.1)
        .targets
        .iter()
        .map(|t| BoundId::new(t.node.clone(), FullVirtualId::new("Node11", 1, t.vaddr)))
        .collect();
    ctx.store.audit(&expected).unwrap();
    ctx.trace.check_well_formed().unwrap();
}

#[test]
fn unknown_node_fails_cleanly() {
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let req = StateRequest {
        id: 3,
        spec: StateSpec::Named(NamedState::BellPhiPlus),
        f_min: 0.5,
        s_max: 1.0,
        targets: vec![
            QubitAddress::new("Node11", 1),
            QubitAddress::new("Node99", 2),
        ],
        encoding: Encoding::Raw,
    };
    let resp = fx.submit(&mut ctx, Request::State(req), "Node11");
    assert_eq!(resp.status, Status::Fail);
    ctx.store.audit(&[]).unwrap();
}

#[test]
fn decompose_worked_example_into_seven() {
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let mut env = Env::new(&fx.topo, &fx.tables, &mut ctx);
    let state = cluster_request(0.99, 0.1);
    let prov = Provenance::new("Node11", 1);
    let dag = decompose(&mut env, &state, &prov, "Node11", &Strategy::default()).unwrap();

    assert_eq!(dag.nodes.len(), 7);
    assert_eq!(dag.namespace, Provenance::new("Node11", 1));
    // 1 creation at the center
    let Request::State(creation) = &dag.nodes[0].request else {
        panic!("first sub-request must be the creation");
    };
    assert_eq!(dag.nodes[0].executor, "Net5");
    assert!(creation.targets.iter().all(|t| t.node == "Net5"));
    assert_eq!(creation.targets.len(), 3);
    assert!(matches!(
        creation.spec,
        StateSpec::Named(NamedState::LinearCluster(3))
    ));
    // 3 Bell pairs and 3 teleports
    let pairs: Vec<&StateRequest> = dag
        .nodes
        .iter()
        .skip(1)
        .filter_map(|n| match &n.request {
            Request::State(s) => Some(s),
            _ => None,
        })
        .collect();
    let teleports: Vec<&ActionRequest> = dag
        .nodes
        .iter()
        .filter_map(|n| match &n.request {
            Request::Action(a) => Some(a),
            _ => None,
        })
        .collect();
    assert_eq!(pairs.len(), 3);
    assert_eq!(teleports.len(), 3);
    for (pair, far) in pairs.iter().zip(["Node11", "Node55", "Node77"]) {
        assert!(matches!(
            pair.spec,
            StateSpec::Named(NamedState::BellPhiPlus)
        ));
        assert_eq!(pair.targets[0].node, "Net5");
        assert_eq!(pair.targets[1].node, far);
    }
    // each teleport depends on the creation and its own pair
    assert_eq!(dag.edges.len(), 6);
    for (i, _) in teleports.iter().enumerate() {
        let teleport_idx = 2 + 2 * i;
        let pair_idx = 1 + 2 * i;
        assert!(dag.edges.contains(&(0, teleport_idx)));
        assert!(dag.edges.contains(&(pair_idx, teleport_idx)));
    }
    // fresh virtual addresses mint above the request's own
    for node in &dag.nodes {
        for t in node.request.targets() {
            assert!(t.vaddr > 1000);
        }
    }
}

#[test]
fn decompose_counts_follow_colocation() {
    // two targets, center lands on one of them: creation + 1 pair + 1
    // teleport
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let mut env = Env::new(&fx.topo, &fx.tables, &mut ctx);
    let state = StateRequest {
        id: 4,
        spec: StateSpec::Named(NamedState::BellPhiPlus),
        f_min: 0.9,
        s_max: 0.5,
        targets: vec![
            QubitAddress::new("Node51", 1),
            QubitAddress::new("Node52", 2),
        ],
        encoding: Encoding::Raw,
    };
    // viewed from inside Net5 the center resolves to a concrete node
    let prov = Provenance::new("Node51", 4);
    let dag = decompose(&mut env, &state, &prov, "Node51", &Strategy::default()).unwrap();
    assert_eq!(dag.nodes.len(), 3);
}

#[test]
fn decompose_all_inside_center_forwards_whole_request() {
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let mut env = Env::new(&fx.topo, &fx.tables, &mut ctx);
    let state = StateRequest {
        id: 9,
        spec: StateSpec::Named(NamedState::Ghz(3)),
        f_min: 0.9,
        s_max: 0.5,
        targets: vec![
            QubitAddress::new("Node51", 1),
            QubitAddress::new("Node52", 2),
            QubitAddress::new("Node55", 3),
        ],
        encoding: Encoding::Raw,
    };
    let prov = Provenance::new("Node11", 9);
    let dag = decompose(&mut env, &state, &prov, "Node11", &Strategy::default()).unwrap();
    assert_eq!(dag.nodes.len(), 1);
    assert_eq!(dag.nodes[0].executor, "Net5");
    assert_eq!(dag.nodes[0].request.targets(), state.targets.as_slice());
    assert!(dag.delivery.is_empty());
    // forwarded requests keep the parent namespace
    assert_eq!(dag.namespace, prov);
}

#[test]
fn teleport_gates_strategy_rejected() {
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let mut env = Env::new(&fx.topo, &fx.tables, &mut ctx);
    let state = cluster_request(0.99, 0.1);
    let prov = Provenance::new("Node11", 1);
    let err = decompose(
        &mut env,
        &state,
        &prov,
        "Node11",
        &Strategy {
            kind: StrategyKind::TeleportGates,
        },
    )
    .unwrap_err();
    assert!(matches!(
        err,
        ProtoError::UnsupportedStrategy(StrategyKind::TeleportGates)
    ));
}

#[test]
fn map_boundary_retargets_network_names() {
    let fx = Fixture::new(SMALLNET);
    let req = Request::State(StateRequest {
        id: 5,
        spec: StateSpec::Named(NamedState::Ghz(3)),
        f_min: 0.9,
        s_max: 0.5,
        targets: vec![
            QubitAddress::new("Net5", 1000),
            QubitAddress::new("Net5", 1001),
            QubitAddress::new("Net5", 1002),
        ],
        encoding: Encoding::Raw,
    });
    let mapped = map_boundary(&fx.topo, req, "Net5", Some("Node51")).unwrap();
    assert!(mapped.targets().iter().all(|t| t.node == "Node51"));
    assert_eq!(
        mapped.targets().iter().map(|t| t.vaddr).collect::<Vec<_>>(),
        vec![1000, 1001, 1002]
    );
}

#[test]
fn map_boundary_without_network_names_is_identity() {
    let fx = Fixture::new(SMALLNET);
    let req = Request::State(cluster_request(0.99, 0.1));
    let mapped = map_boundary(&fx.topo, req.clone(), "Net5", Some("Node51")).unwrap();
    assert_eq!(mapped, req);
}

#[test]
fn map_boundary_empty_network_rejected() {
    let topo = Topology::parse("net Empty\nnet Other\nnode A in Other\n").unwrap();
    let req = Request::State(StateRequest {
        id: 5,
        spec: StateSpec::Named(NamedState::BellPhiPlus),
        f_min: 0.9,
        s_max: 0.5,
        targets: vec![QubitAddress::new("Empty", 1), QubitAddress::new("A", 2)],
        encoding: Encoding::Raw,
    });
    let err = map_boundary(&topo, req, "Empty", None).unwrap_err();
    assert!(matches!(err, ProtoError::NoEligibleMember(_)));
}

fn bell_between(id: u64, a: &str, b: &str, f_min: f64) -> StateRequest {
    StateRequest {
        id,
        spec: StateSpec::Named(NamedState::BellPhiPlus),
        f_min,
        s_max: 2.0,
        targets: vec![QubitAddress::new(a, 1), QubitAddress::new(b, 2)],
        encoding: Encoding::Raw,
    }
}

#[test]
fn pair_over_adjacent_perfect_link() {
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let resp = fx.submit(
        &mut ctx,
        Request::State(bell_between(7, "Node51", "Node52", 0.99)),
        "Node51",
    );
    assert_eq!(resp.status, Status::Ok);
    assert!((resp.measured_f - 1.0).abs() < 1e-12);
    assert_eq!(ctx.counters.pairs_generated, 1);
    assert_eq!(ctx.counters.purify_attempts, 0);
    assert_eq!(ctx.counters.swaps, 0);
}

#[test]
fn pair_over_two_hops_matches_swap_composition() {
    let fx = Fixture::new(TWOHOP);
    let mut ctx = fx.ctx(SimConfig {
        purify_rounds: 0,
        ..det_cfg()
    });
    let resp = fx.submit(
        &mut ctx,
        Request::State(bell_between(7, "NodeA", "NodeC", 0.5)),
        "NodeA",
    );
    assert_eq!(resp.status, Status::Ok);
    let expected = 0.95 * 0.95 + (0.05 * 0.05) / 3.0;
    assert!((resp.measured_f - expected).abs() < 1e-12);
    assert_eq!(ctx.counters.swaps, 1);
}

#[test]
fn pair_budget_infeasible_reports_constraint_violation() {
    // two 0.9 links cannot reach 0.99 within three purification rounds
    let topo_text = "net Lab\nnode NodeA in Lab\nnode NodeB in Lab\nnode NodeC in Lab\n\
                     link NodeA NodeB flink=0.9\nlink NodeB NodeC flink=0.9\n";
    let fx = Fixture::new(topo_text);
    let mut ctx = fx.ctx(SimConfig {
        purify_rounds: 3,
        pair_cap: 16,
        ..det_cfg()
    });
    let resp = fx.submit(
        &mut ctx,
        Request::State(bell_between(7, "NodeA", "NodeC", 0.99)),
        "NodeA",
    );
    assert_eq!(resp.status, Status::ConstraintViolation);
    assert!(resp.measured_f < 0.99);
    assert!(ctx.counters.purify_attempts > 0);
}

#[test]
fn pair_purification_meets_reachable_budget() {
    let fx = Fixture::new(TWOHOP);
    let mut ctx = fx.ctx(SimConfig {
        purify_rounds: 2,
        ..det_cfg()
    });
    let resp = fx.submit(
        &mut ctx,
        Request::State(bell_between(7, "NodeA", "NodeC", 0.93)),
        "NodeA",
    );
    assert_eq!(resp.status, Status::Ok, "f={}", resp.measured_f);
    assert!(resp.measured_f >= 0.93);
    assert!(ctx.counters.purify_successes >= 2); // one round per link
}

#[test]
fn forced_generation_failure_fails_root() {
    let topo_text = "net Lab\nnode NodeA in Lab\nnode NodeB in Lab\nlink NodeA NodeB pgen=0\n";
    let fx = Fixture::new(topo_text);
    let mut ctx = fx.ctx(SimConfig {
        mode: Mode::Stochastic,
        seed: 1,
        retry_cap: 0,
        ..det_cfg()
    });
    let resp = fx.submit(
        &mut ctx,
        Request::State(bell_between(7, "NodeA", "NodeB", 0.5)),
        "NodeA",
    );
    assert_eq!(resp.status, Status::Fail);
    ctx.store.audit(&[]).unwrap();
}

#[test]
fn recursive_request_into_inner_network() {
    // all targets inside Net5, submitted from Node11: the request forwards
    // whole to Net5, whose gateway re-plans it locally
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let req = StateRequest {
        id: 2,
        spec: StateSpec::Named(NamedState::Ghz(3)),
        f_min: 0.99,
        s_max: 0.1,
        targets: vec![
            QubitAddress::new("Node51", 1),
            QubitAddress::new("Node52", 2),
            QubitAddress::new("Node55", 3),
        ],
        encoding: Encoding::Raw,
    };
    let resp = fx.submit(&mut ctx, Request::State(req.clone()), "Node11");
    assert_eq!(resp.status, Status::Ok);
    assert!((resp.measured_f - 1.0).abs() < 1e-9);
    // a nested decomposition happened at the gateway
    let decomposes: Vec<_> = ctx
        .trace
        .events()
        .iter()
        .filter(|e| e.kind == EventKind::Decompose)
        .collect();
    assert_eq!(decomposes.len(), 1);
    assert_eq!(decomposes[0].node, "Node51");
    let expected: Vec<BoundId> = req
        .targets
        .iter()
        .map(|t| BoundId::new(t.node.clone(), FullVirtualId::new("Node11", 2, t.vaddr)))
        .collect();
    ctx.store.audit(&expected).unwrap();
}

#[test]
fn pair_across_two_nesting_levels() {
    let fx = Fixture::new(include_str!("../../fixtures/nested.topo"));
    let mut ctx = fx.ctx(det_cfg());
    let resp = fx.submit(
        &mut ctx,
        Request::State(bell_between(4, "W11", "E39", 0.99)),
        "W11",
    );
    assert_eq!(resp.status, Status::Ok);
    assert!((resp.measured_f - 1.0).abs() < 1e-9);
    // four elementary links, three swaps, delivered across both boundaries
    assert_eq!(ctx.counters.pairs_generated, 4);
    assert_eq!(ctx.counters.swaps, 3);
    let expected: Vec<BoundId> = [("W11", 1u64), ("E39", 2u64)]
        .iter()
        .map(|(n, v)| BoundId::new(*n, FullVirtualId::new("W11", 4, *v)))
        .collect();
    ctx.store.audit(&expected).unwrap();
}

#[test]
fn ghz_across_nested_networks() {
    let fx = Fixture::new(include_str!("../../fixtures/nested.topo"));
    let mut ctx = fx.ctx(det_cfg());
    let req = StateRequest {
        id: 9,
        spec: StateSpec::Named(NamedState::Ghz(3)),
        f_min: 0.99,
        s_max: 0.1,
        targets: vec![
            QubitAddress::new("W11", 1),
            QubitAddress::new("W29", 2),
            QubitAddress::new("E39", 3),
        ],
        encoding: Encoding::Raw,
    };
    let resp = fx.submit(&mut ctx, Request::State(req), "W11");
    assert_eq!(resp.status, Status::Ok, "f={}", resp.measured_f);
    assert!((resp.measured_f - 1.0).abs() < 1e-9);
    assert!(resp.measured_s < 1e-9);
}

#[test]
fn noisy_links_degrade_cluster_to_constraint_violation() {
    let fx = Fixture::new(SMALLNET_F90);
    let mut ctx = fx.ctx(SimConfig {
        purify_rounds: 0,
        ..det_cfg()
    });
    let resp = fx.submit(
        &mut ctx,
        Request::State(cluster_request(0.99, 0.1)),
        "Node11",
    );
    assert_eq!(resp.status, Status::ConstraintViolation);
    // each delivered qubit rode a two-link swapped Werner channel
    let g = 0.9f64 * 0.9 + (0.1f64 * 0.1) / 3.0;
    let u = (1.0 - g) / 3.0;
    let expected = g.powi(3) + 3.0 * g * u * u + 4.0 * u.powi(3);
    assert!(
        (resp.measured_f - expected).abs() < 1e-9,
        "{} vs {expected}",
        resp.measured_f
    );
    assert!(resp.measured_f < 0.99);
}

#[test]
fn execute_dag_rejects_cycles() {
    let dag = SubRequestDag {
        namespace: Provenance::new("X", 1),
        nodes: vec![
            DagNode {
                executor: "X".into(),
                request: Request::State(bell_between(1, "A", "B", 0.5)),
            },
            DagNode {
                executor: "X".into(),
                request: Request::State(bell_between(2, "A", "B", 0.5)),
            },
        ],
        edges: vec![(0, 1), (1, 0)],
        delivery: Vec::new(),
    };
    assert!(matches!(
        topological_order(&dag),
        Err(ProtoError::CycleDetected)
    ));
}

#[test]
fn single_node_dag_is_equivalent_to_deliver() {
    let fx = Fixture::new(SMALLNET);
    let local = StateRequest {
        id: 5,
        spec: StateSpec::Named(NamedState::BellPhiPlus),
        f_min: 0.9,
        s_max: 0.1,
        targets: vec![
            QubitAddress::new("Node52", 1),
            QubitAddress::new("Node52", 2),
        ],
        encoding: Encoding::Raw,
    };
    let prov = Provenance::new("Node52", 5);

    let mut ctx_dag = fx.ctx(det_cfg());
    let mut env = Env::new(&fx.topo, &fx.tables, &mut ctx_dag);
    let dag = SubRequestDag {
        namespace: prov.clone(),
        nodes: vec![DagNode {
            executor: "Node52".into(),
            request: Request::State(local.clone()),
        }],
        edges: Vec::new(),
        delivery: Vec::new(),
    };
    let responses = execute_dag(&mut env, &dag, "Node52", 0).unwrap();

    let mut ctx_direct = fx.ctx(det_cfg());
    let direct = fx.submit(&mut ctx_direct, Request::State(local), "Node52");

    assert_eq!(responses[0].status, direct.status);
    assert!((responses[0].measured_f - direct.measured_f).abs() < 1e-12);
    assert!(responses[0].rho.max_abs_diff(&direct.rho).unwrap() < 1e-12);
}

#[test]
fn dag_execution_order_does_not_change_delivered_state() {
    let fx = Fixture::new(SMALLNET);

    let run_with = |order_pick: Option<Vec<usize>>| {
        let mut ctx = fx.ctx(det_cfg());
        let mut env = Env::new(&fx.topo, &fx.tables, &mut ctx);
        let state = cluster_request(0.99, 0.1);
        let prov = Provenance::new("Node11", 1);
        let dag = decompose(&mut env, &state, &prov, "Node11", &Strategy::default()).unwrap();
        let order = order_pick.unwrap_or_else(|| topological_order(&dag).unwrap());
        execute_dag_in_order(&mut env, &dag, "Node11", 0, &order).unwrap();
        let bids: Vec<BoundId> = dag
            .delivery
            .iter()
            .map(|(va, node, _)| BoundId::new(node.clone(), dag.namespace.id(*va)))
            .collect();
        env.ctx.store.reduced_state(&bids).unwrap()
    };

    // teleports only depend on the creation and their own pair, so the pair
    // groups may run in any relative order
    let natural = run_with(None);
    let shuffled = run_with(Some(vec![0, 5, 6, 3, 4, 1, 2]));
    assert!(natural.max_abs_diff(&shuffled).unwrap() < 1e-12);
}

#[test]
fn deliver_is_deterministic_bytes() {
    let fx = Fixture::new(SMALLNET);
    let run = || {
        let mut ctx = fx.ctx(det_cfg());
        let _ = fx.submit(
            &mut ctx,
            Request::State(cluster_request(0.99, 0.1)),
            "Node11",
        );
        ctx.trace.render()
    };
    assert_eq!(run(), run());
}

#[test]
fn stochastic_deliver_is_seed_deterministic() {
    let fx = Fixture::new(TWOHOP);
    let run = |seed: u64| {
        let mut ctx = fx.ctx(SimConfig {
            mode: Mode::Stochastic,
            seed,
            purify_rounds: 1,
            ..det_cfg()
        });
        let _ = fx.submit(
            &mut ctx,
            Request::State(bell_between(7, "NodeA", "NodeC", 0.9)),
            "NodeA",
        );
        ctx.trace.render()
    };
    assert_eq!(run(11), run(11));
}

#[test]
fn recursion_limit_fails_request() {
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let prov = Provenance::new("Node11", 1);
    let mut env = Env::new(&fx.topo, &fx.tables, &mut ctx);
    let resp = deliver(
        &mut env,
        Request::State(cluster_request(0.99, 0.1)),
        &prov,
        "client",
        "Node11",
        17,
    );
    assert_eq!(resp.status, Status::Fail);
}

#[test]
fn fanout_pair_delivery() {
    // a two-node fanout whose amplitudes are not balanced
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let req = StateRequest {
        id: 6,
        spec: StateSpec::Named(NamedState::Fanout {
            alpha: num_complex::Complex64::new(0.6, 0.0),
            beta: num_complex::Complex64::new(0.8, 0.0),
            n: 2,
        }),
        f_min: 0.99,
        s_max: 0.1,
        targets: vec![
            QubitAddress::new("Node11", 1),
            QubitAddress::new("Node55", 2),
        ],
        encoding: Encoding::Raw,
    };
    let resp = fx.submit(&mut ctx, Request::State(req), "Node11");
    assert_eq!(resp.status, Status::Ok);
    assert!((resp.measured_f - 1.0).abs() < 1e-9);
}

#[test]
fn generic_action_circuit_executes_and_replays() {
    // a caller holding the namespace of an earlier delivery can run further
    // operations on those qubits: disentangle a local pair by measurement
    // with a classically conditioned correction
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let prov = Provenance::new("Node51", 5);

    let create = StateRequest {
        id: 5,
        spec: StateSpec::Named(NamedState::BellPhiPlus),
        f_min: 0.9,
        s_max: 0.1,
        targets: vec![
            QubitAddress::new("Node51", 1),
            QubitAddress::new("Node51", 2),
        ],
        encoding: Encoding::Raw,
    };
    {
        let mut env = Env::new(&fx.topo, &fx.tables, &mut ctx);
        let resp = deliver(
            &mut env,
            Request::State(create),
            &prov,
            "client",
            "Node51",
            0,
        );
        assert_eq!(resp.status, Status::Ok);
    }

    // CNOT then H then measure one half: the survivor collapses to |0>
    let action = ActionRequest {
        id: 6,
        circuit: vec![
            CircuitItem::Gate(crate::engine::gate::cnot(1u64, 2u64)),
            CircuitItem::Gate(crate::engine::gate::h(1u64)),
            CircuitItem::Measure(2),
            CircuitItem::CorrectX { target: 1, cond: 2 },
        ],
        f_min: 0.0,
        s_max: 2.0,
        targets: vec![
            QubitAddress::new("Node51", 1),
            QubitAddress::new("Node51", 2),
        ],
        encoding: Encoding::Raw,
    };
    let resp = {
        let mut env = Env::new(&fx.topo, &fx.tables, &mut ctx);
        deliver(
            &mut env,
            Request::Action(action),
            &prov,
            "client",
            "Node51",
            0,
        )
    };
    assert_eq!(resp.status, Status::Ok);
    assert_eq!(resp.rho.n_qubits(), 1);
    // disentangling the Bell pair leaves the survivor pure
    assert!(resp.measured_s < 1e-9, "s = {}", resp.measured_s);

    // the composite action event replays exactly
    let rows = crate::harness::replay(&ctx.trace).unwrap();
    for row in &rows {
        assert!(
            row.deviation() <= 1e-9,
            "request {} deviates",
            row.request_id
        );
    }
    let survivor = BoundId::new("Node51", prov.id(1));
    ctx.store.audit(std::slice::from_ref(&survivor)).unwrap();
}

#[test]
fn action_on_unbound_addresses_fails() {
    let fx = Fixture::new(SMALLNET);
    let mut ctx = fx.ctx(det_cfg());
    let action = ActionRequest {
        id: 8,
        circuit: vec![CircuitItem::Gate(crate::engine::gate::h(1u64))],
        f_min: 0.5,
        s_max: 2.0,
        targets: vec![QubitAddress::new("Node51", 1)],
        encoding: Encoding::Raw,
    };
    let resp = fx.submit(&mut ctx, Request::Action(action), "Node51");
    assert_eq!(resp.status, Status::Fail);
}
