//! Routing over the recursive topology: per-node tables built with
//! shortest-path-first at every hierarchy level, destination resolution,
//! path and center selection, and swap-order planning.
//!
//! A node's table covers exactly what it is allowed to see: sibling elements
//! of its own network precisely, each enclosing network itself, and the peer
//! networks of each enclosing network as single opaque names. Deeper
//! external structure never appears.

use std::collections::{BTreeMap, BTreeSet};

use super::{CostFn, Topology, TopologyError};

/// One routing-table entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RouteEntry {
    /// Destination is a directly linked neighbor.
    Direct,
    /// Forward toward the named element.
    Via(String),
    /// Destination is an enclosing network of this node.
    Local,
    /// Destination is an enclosing network this node gateways for; requests
    /// addressed to it are handled here.
    ProcessLocally,
}

impl std::fmt::Display for RouteEntry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RouteEntry::Direct => write!(f, "direct"),
            RouteEntry::Via(next) => write!(f, "via {next}"),
            RouteEntry::Local => write!(f, "local"),
            RouteEntry::ProcessLocally => write!(f, "process-locally"),
        }
    }
}

/// All destinations visible to one node, each with exactly one route.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTable {
    pub owner: String,
    pub entries: BTreeMap<String, RouteEntry>,
}

impl std::fmt::Display for RoutingTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "table {}", self.owner)?;
        for (dest, entry) in &self.entries {
            writeln!(f, "{dest} {entry}")?;
        }
        Ok(())
    }
}

/// Dijkstra over a small adjacency map, tracking full best paths so that
/// cost ties break on the lexicographically smallest path.
fn dijkstra(
    graph: &BTreeMap<String, Vec<(String, f64)>>,
    src: &str,
) -> BTreeMap<String, (f64, Vec<String>)> {
    let mut best: BTreeMap<String, (f64, Vec<String>)> = BTreeMap::new();
    let mut done: BTreeSet<String> = BTreeSet::new();
    best.insert(src.to_string(), (0.0, vec![src.to_string()]));
    loop {
        let next = best
            .iter()
            .filter(|(name, _)| !done.contains(*name))
            .min_by(|(_, (ca, pa)), (_, (cb, pb))| {
                ca.partial_cmp(cb).unwrap().then_with(|| pa.cmp(pb))
            })
            .map(|(name, _)| name.clone());
        let Some(u) = next else { break };
        done.insert(u.clone());
        let (cost_u, path_u) = best[&u].clone();
        for (v, w) in graph.get(&u).into_iter().flatten() {
            let cand_cost = cost_u + w;
            let mut cand_path = path_u.clone();
            cand_path.push(v.clone());
            let better = match best.get(v) {
                None => true,
                Some((c, p)) => {
                    cand_cost < c - 1e-12 || ((cand_cost - c).abs() <= 1e-12 && cand_path < *p)
                }
            };
            if better {
                best.insert(v.clone(), (cand_cost, cand_path));
            }
        }
    }
    best
}

/// The minimum-cost crossing link between two members of the same level;
/// returns (endpoint inside `from`, endpoint inside `to`). Ties break on the
/// lexicographically smallest endpoint pair.
fn crossing_link(
    topo: &Topology,
    level: Option<&str>,
    from: &str,
    to: &str,
    cost: &CostFn,
) -> Option<(String, String)> {
    let mut cands: Vec<(f64, String, String)> = Vec::new();
    for link in topo.links() {
        let Some(ma) = topo.member_containing(level, &link.a) else {
            continue;
        };
        let Some(mb) = topo.member_containing(level, &link.b) else {
            continue;
        };
        if ma == from && mb == to {
            cands.push((cost(link), link.a.clone(), link.b.clone()));
        } else if mb == from && ma == to {
            cands.push((cost(link), link.b.clone(), link.a.clone()));
        }
    }
    cands
        .into_iter()
        .min_by(|x, y| {
            x.0.partial_cmp(&y.0)
                .unwrap()
                .then_with(|| (&x.1, &x.2).cmp(&(&y.1, &y.2)))
        })
        .map(|(_, a, b)| (a, b))
}

/// Map any element name to the name the viewer actually sees: siblings and
/// enclosing networks keep their names, anything deeper inside a foreign
/// network collapses to that network's name at the viewer's horizon.
pub fn resolve_destination(
    topo: &Topology,
    viewer: &str,
    target: &str,
) -> Result<String, TopologyError> {
    topo.element(viewer)?;
    if !topo.contains_element(target) {
        return Err(TopologyError::UnknownDestination {
            viewer: viewer.to_string(),
            target: target.to_string(),
        });
    }
    if target == viewer || topo.is_within(viewer, target) {
        // the viewer itself or one of its enclosing networks
        return Ok(target.to_string());
    }
    // lowest enclosing level of the viewer that also contains the target
    let mut levels: Vec<Option<String>> = topo.ancestors(viewer).into_iter().map(Some).collect();
    levels.push(None);
    for level in levels {
        if let Some(member) = topo.member_containing(level.as_deref(), target) {
            return Ok(member);
        }
    }
    Err(TopologyError::UnknownDestination {
        viewer: viewer.to_string(),
        target: target.to_string(),
    })
}

/// Build the routing table of a single leaf node.
pub fn build_table(
    topo: &Topology,
    owner: &str,
    cost: &CostFn,
) -> Result<RoutingTable, TopologyError> {
    if !topo.is_node(owner) {
        return Err(TopologyError::NotANode(owner.to_string()));
    }
    let mut entries = BTreeMap::new();
    let mut missing = Vec::new();
    let ancestors = topo.ancestors(owner);
    let own_net = ancestors.first().cloned();

    // siblings inside the node's own network
    let own_graph = topo.member_graph(own_net.as_deref(), cost)?;
    let own_paths = dijkstra(&own_graph, owner);
    for sibling in topo.members_of(own_net.as_deref())? {
        if sibling == owner {
            continue;
        }
        match own_paths.get(&sibling) {
            Some((_, path)) if path.len() == 2 => {
                entries.insert(sibling, RouteEntry::Direct);
            }
            Some((_, path)) => {
                entries.insert(sibling, RouteEntry::Via(path[1].clone()));
            }
            None => missing.push(sibling),
        }
    }

    // each enclosing network, then its peers at the parent level
    for (k, anc) in ancestors.iter().enumerate() {
        let entry = if topo.crosses_boundary(owner, anc) {
            RouteEntry::ProcessLocally
        } else {
            RouteEntry::Local
        };
        entries.insert(anc.clone(), entry);

        let parent_level = ancestors.get(k + 1).map(|s| s.as_str());
        let level_graph = topo.member_graph(parent_level, cost)?;
        let level_paths = dijkstra(&level_graph, anc);
        for peer in topo.members_of(parent_level)? {
            if peer == *anc {
                continue;
            }
            let Some((_, path)) = level_paths.get(&peer) else {
                missing.push(peer);
                continue;
            };
            let first = &path[1];
            let entry = if first == &peer {
                // adjacent peer network: route via the concrete crossing
                let (g_local, g_remote) = crossing_link(topo, parent_level, anc, &peer, cost)
                    .ok_or_else(|| TopologyError::NoLink(anc.clone(), peer.clone()))?;
                if g_local == owner {
                    RouteEntry::Via(g_remote)
                } else {
                    RouteEntry::Via(next_hop_name(topo, owner, &g_local, &own_paths)?)
                }
            } else {
                RouteEntry::Via(first.clone())
            };
            entries.insert(peer, entry);
        }
    }

    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(TopologyError::Disconnected {
            owner: owner.to_string(),
            missing,
        });
    }
    Ok(RoutingTable {
        owner: owner.to_string(),
        entries,
    })
}

/// The name `owner` forwards to when heading for `inside_target`, a node
/// somewhere inside its own network (first hop of the intra-net path) or
/// beyond (the visible delegating name).
fn next_hop_name(
    topo: &Topology,
    owner: &str,
    target: &str,
    own_paths: &BTreeMap<String, (f64, Vec<String>)>,
) -> Result<String, TopologyError> {
    let own_net = topo.ancestors(owner).first().cloned();
    if let Some(member) = topo.member_containing(own_net.as_deref(), target) {
        if member == owner {
            return Ok(owner.to_string());
        }
        return match own_paths.get(&member) {
            Some((_, path)) => Ok(path[1].clone()),
            None => Err(TopologyError::Unreachable {
                from: owner.to_string(),
                to: target.to_string(),
            }),
        };
    }
    resolve_destination(topo, owner, target)
}

/// Routing tables for every leaf node.
pub fn build_tables(
    topo: &Topology,
    cost: &CostFn,
) -> Result<BTreeMap<String, RoutingTable>, TopologyError> {
    let mut out = BTreeMap::new();
    for node in topo.nodes() {
        out.insert(node.name.clone(), build_table(topo, &node.name, cost)?);
    }
    Ok(out)
}

/// Minimal-cost chain of co-level element names between two elements,
/// computed inside their lowest common enclosing network.
pub fn select_path(
    topo: &Topology,
    src: &str,
    dst: &str,
    cost: &CostFn,
) -> Result<Vec<String>, TopologyError> {
    topo.element(src)?;
    topo.element(dst)?;
    if src == dst {
        return Ok(vec![src.to_string()]);
    }
    // lowest level containing both
    let mut levels: Vec<Option<String>> = topo.ancestors(src).into_iter().map(Some).collect();
    levels.push(None);
    for level in levels {
        let sm = topo.member_containing(level.as_deref(), src);
        let dm = topo.member_containing(level.as_deref(), dst);
        if let (Some(sm), Some(dm)) = (sm, dm) {
            if sm == dm {
                return Ok(vec![sm]);
            }
            let graph = topo.member_graph(level.as_deref(), cost)?;
            let paths = dijkstra(&graph, &sm);
            return paths.get(&dm).map(|(_, p)| p.clone()).ok_or_else(|| {
                TopologyError::Unreachable {
                    from: src.to_string(),
                    to: dst.to_string(),
                }
            });
        }
    }
    Err(TopologyError::Unreachable {
        from: src.to_string(),
        to: dst.to_string(),
    })
}

/// Shortest chain of physical repeater nodes between two leaf nodes, over
/// node-to-node links only.
pub fn physical_path(
    topo: &Topology,
    src: &str,
    dst: &str,
    cost: &CostFn,
) -> Result<Vec<String>, TopologyError> {
    for n in [src, dst] {
        if !topo.is_node(n) {
            return Err(TopologyError::NotANode(n.to_string()));
        }
    }
    if src == dst {
        return Ok(vec![src.to_string()]);
    }
    let graph = topo.node_graph(cost);
    let paths = dijkstra(&graph, src);
    paths
        .get(dst)
        .map(|(_, p)| p.clone())
        .ok_or_else(|| TopologyError::Unreachable {
            from: src.to_string(),
            to: dst.to_string(),
        })
}

/// Total physical path cost from each leaf node to every target; the center
/// is the argmin node (ties lexicographic), reported as the name the viewer
/// sees for it.
pub fn select_center(
    topo: &Topology,
    viewer: &str,
    targets: &[String],
    cost: &CostFn,
) -> Result<String, TopologyError> {
    if targets.is_empty() {
        return Err(TopologyError::UnknownElement("<no targets>".into()));
    }
    let graph = topo.node_graph(cost);
    let mut totals: BTreeMap<String, f64> = topo.nodes().map(|e| (e.name.clone(), 0.0)).collect();
    for t in targets {
        if !topo.is_node(t) {
            return Err(TopologyError::NotANode(t.clone()));
        }
        let from_t = dijkstra(&graph, t);
        for (node, total) in totals.iter_mut() {
            match from_t.get(node) {
                Some((c, _)) => *total += c,
                None => *total = f64::INFINITY,
            }
        }
    }
    let best = totals
        .into_iter()
        .filter(|(_, c)| c.is_finite())
        .min_by(|(na, ca), (nb, cb)| ca.partial_cmp(cb).unwrap().then_with(|| na.cmp(nb)))
        .map(|(n, _)| n)
        .ok_or_else(|| TopologyError::Unreachable {
            from: viewer.to_string(),
            to: targets.join(","),
        })?;
    resolve_destination(topo, viewer, &best)
}

/// One classical forwarding step toward `dest` (a node or network name):
/// `Some(next)` names the physically adjacent node to hand the request to,
/// `None` means `at` itself handles it (arrived, or it gateways the
/// destination network).
pub fn next_physical_hop(
    topo: &Topology,
    tables: &BTreeMap<String, RoutingTable>,
    at: &str,
    dest: &str,
) -> Result<Option<String>, TopologyError> {
    if at == dest {
        return Ok(None);
    }
    let table = tables
        .get(at)
        .ok_or_else(|| TopologyError::UnknownElement(at.to_string()))?;
    let mut target = resolve_destination(topo, at, dest)?;
    for _ in 0..table.entries.len() + 2 {
        if target == at {
            return Ok(None);
        }
        if topo.is_node(&target) && topo.link_between(at, &target).is_some() {
            return Ok(Some(target));
        }
        match table.entries.get(&target) {
            Some(RouteEntry::Local) | Some(RouteEntry::ProcessLocally) => return Ok(None),
            Some(RouteEntry::Direct) => {
                return if topo.is_node(&target) {
                    Ok(Some(target))
                } else {
                    // direct links to abstract network elements carry no
                    // physical endpoint to hand off to
                    Err(TopologyError::NotANode(target))
                };
            }
            Some(RouteEntry::Via(next)) => target = next.clone(),
            None => {
                return Err(TopologyError::UnknownDestination {
                    viewer: at.to_string(),
                    target,
                })
            }
        }
    }
    Err(TopologyError::Unreachable {
        from: at.to_string(),
        to: dest.to_string(),
    })
}

/// Nesting plan for entanglement swapping along a repeater chain: split at
/// the middle repeater recursively, left-biased on even splits, leaves being
/// the chain's elementary links in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SwapPlan {
    Link {
        a: String,
        b: String,
    },
    Swap {
        at: String,
        left: Box<SwapPlan>,
        right: Box<SwapPlan>,
    },
}

impl SwapPlan {
    /// Number of swap operations in the plan.
    pub fn swap_count(&self) -> usize {
        match self {
            SwapPlan::Link { .. } => 0,
            SwapPlan::Swap { left, right, .. } => 1 + left.swap_count() + right.swap_count(),
        }
    }

    /// Elementary links in chain order.
    pub fn leaves(&self) -> Vec<(String, String)> {
        match self {
            SwapPlan::Link { a, b } => vec![(a.clone(), b.clone())],
            SwapPlan::Swap { left, right, .. } => {
                let mut out = left.leaves();
                out.extend(right.leaves());
                out
            }
        }
    }

    /// The chain's two end elements.
    pub fn endpoints(&self) -> (String, String) {
        let leaves = self.leaves();
        (leaves[0].0.clone(), leaves[leaves.len() - 1].1.clone())
    }
}

/// Balanced swap nesting over a chain of at least two elements.
pub fn swap_order(chain: &[String]) -> SwapPlan {
    assert!(chain.len() >= 2, "swap_order needs a chain of length >= 2");
    if chain.len() == 2 {
        return SwapPlan::Link {
            a: chain[0].clone(),
            b: chain[1].clone(),
        };
    }
    let mid = (chain.len() - 1) / 2;
    SwapPlan::Swap {
        at: chain[mid].clone(),
        left: Box::new(swap_order(&chain[..=mid])),
        right: Box::new(swap_order(&chain[mid..])),
    }
}
