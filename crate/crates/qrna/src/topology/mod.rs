//! Recursive network model: networks abstract to single nodes at the
//! enclosing layer, so an element is either a leaf node (repeater/host) or a
//! network of elements. Links join elements at equal depth, possibly across
//! network boundaries.
//!
//! Text format, one declaration per line (`#` comments):
//!
//! ```text
//! net <name> [in <parent>]
//! node <name> in <net> [gateway]
//! link <a> <b> [cost=<dec>] [flink=<dec>] [pgen=<dec>]
//! ```

pub mod routing;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use routing::{
    build_tables, next_physical_hop, physical_path, resolve_destination, select_center,
    select_path, swap_order, RouteEntry, RoutingTable, SwapPlan,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    Repeater,
    Host,
    Network,
}

#[derive(Debug, Clone)]
pub struct Element {
    pub name: String,
    pub kind: ElementKind,
    pub parent: Option<String>,
    /// Direct members, for networks.
    pub members: BTreeSet<String>,
    /// Declared gateway members, for networks.
    pub gateways: BTreeSet<String>,
}

/// A physical or abstracted channel between two co-level elements.
#[derive(Debug, Clone)]
pub struct Link {
    pub a: String,
    pub b: String,
    pub cost: f64,
    /// Werner fidelity of elementary pairs generated over this link.
    pub f_link: f64,
    /// Success probability of one generation attempt.
    pub p_gen: f64,
    /// Classical message delay over this link. Without a decoherence model
    /// it has no physical effect; reserved for a timing model.
    pub c_delay: f64,
}

impl Link {
    pub fn other(&self, end: &str) -> &str {
        if self.a == end {
            &self.b
        } else {
            &self.a
        }
    }

    pub fn touches(&self, name: &str) -> bool {
        self.a == name || self.b == name
    }
}

/// Cost function over links; hop count by default.
pub type CostFn<'a> = dyn Fn(&Link) -> f64 + 'a;

/// The default link cost: the per-link `cost` field (1 unless overridden).
pub fn link_cost(l: &Link) -> f64 {
    l.cost
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown element {0:?}")]
    UnknownElement(String),
    #[error("{0:?} is not a leaf node")]
    NotANode(String),
    #[error("no route from {from} to {to}")]
    Unreachable { from: String, to: String },
    #[error("{viewer} cannot resolve destination {target:?}")]
    UnknownDestination { viewer: String, target: String },
    #[error("routing from {owner}: unreachable destinations {missing:?}")]
    Disconnected { owner: String, missing: Vec<String> },
    #[error("no direct link between {0} and {1}")]
    NoLink(String, String),
}

#[derive(Debug, Clone, Default)]
pub struct Topology {
    elements: BTreeMap<String, Element>,
    links: Vec<Link>,
    roots: BTreeSet<String>,
}

impl Topology {
    /// Parse the line-oriented topology format.
    pub fn parse(text: &str) -> Result<Topology, TopologyError> {
        let mut topo = Topology::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let err = |message: String| TopologyError::Parse {
                line: line_no,
                message,
            };
            match words.next().unwrap() {
                "net" => {
                    let name = words
                        .next()
                        .ok_or_else(|| err("net needs a name".into()))?
                        .to_string();
                    let parent = match words.next() {
                        None => None,
                        Some("in") => Some(
                            words
                                .next()
                                .ok_or_else(|| err("expected parent after 'in'".into()))?
                                .to_string(),
                        ),
                        Some(w) => return Err(err(format!("unexpected token {w:?}"))),
                    };
                    topo.add_element(name, ElementKind::Network, parent)
                        .map_err(&err)?;
                }
                "node" => {
                    let name = words
                        .next()
                        .ok_or_else(|| err("node needs a name".into()))?
                        .to_string();
                    if words.next() != Some("in") {
                        return Err(err("expected 'in <net>'".into()));
                    }
                    let parent = words
                        .next()
                        .ok_or_else(|| err("expected parent network".into()))?
                        .to_string();
                    let mut gateway = false;
                    for w in words.by_ref() {
                        match w {
                            "gateway" => gateway = true,
                            other => return Err(err(format!("unexpected token {other:?}"))),
                        }
                    }
                    topo.add_element(name.clone(), ElementKind::Repeater, Some(parent.clone()))
                        .map_err(&err)?;
                    if gateway {
                        topo.elements
                            .get_mut(&parent)
                            .expect("parent checked")
                            .gateways
                            .insert(name);
                    }
                }
                "link" => {
                    let a = words
                        .next()
                        .ok_or_else(|| err("link needs two endpoints".into()))?
                        .to_string();
                    let b = words
                        .next()
                        .ok_or_else(|| err("link needs two endpoints".into()))?
                        .to_string();
                    let mut link = Link {
                        a,
                        b,
                        cost: 1.0,
                        f_link: 1.0,
                        p_gen: 1.0,
                        c_delay: 0.0,
                    };
                    for w in words {
                        let (key, value) = w
                            .split_once('=')
                            .ok_or_else(|| err(format!("expected key=value, got {w:?}")))?;
                        let value: f64 = value
                            .parse()
                            .map_err(|e| err(format!("bad value for {key}: {e}")))?;
                        match key {
                            "cost" => link.cost = value,
                            "flink" => link.f_link = value,
                            "pgen" => link.p_gen = value,
                            "cdelay" => link.c_delay = value,
                            other => return Err(err(format!("unknown link attribute {other:?}"))),
                        }
                    }
                    topo.add_link(link).map_err(&err)?;
                }
                other => return Err(err(format!("unknown declaration {other:?}"))),
            }
        }
        Ok(topo)
    }

    fn add_element(
        &mut self,
        name: String,
        kind: ElementKind,
        parent: Option<String>,
    ) -> Result<(), String> {
        if self.elements.contains_key(&name) {
            return Err(format!("duplicate element {name:?}"));
        }
        if !crate::request::valid_name(&name) {
            return Err(format!("invalid element name {name:?}"));
        }
        if let Some(p) = &parent {
            let pe = self
                .elements
                .get_mut(p)
                .ok_or_else(|| format!("unknown parent network {p:?}"))?;
            if pe.kind != ElementKind::Network {
                return Err(format!("parent {p:?} is not a network"));
            }
            pe.members.insert(name.clone());
        } else {
            self.roots.insert(name.clone());
        }
        self.elements.insert(
            name.clone(),
            Element {
                name,
                kind,
                parent,
                members: BTreeSet::new(),
                gateways: BTreeSet::new(),
            },
        );
        Ok(())
    }

    fn add_link(&mut self, link: Link) -> Result<(), String> {
        if link.a == link.b {
            return Err("link endpoints must be distinct".into());
        }
        for end in [&link.a, &link.b] {
            if !self.elements.contains_key(end) {
                return Err(format!("unknown element {end:?}"));
            }
        }
        if self.depth(&link.a) != self.depth(&link.b) {
            return Err(format!(
                "link {}~{} joins elements at different hierarchy depths",
                link.a, link.b
            ));
        }
        if link.cost <= 0.0 || !link.cost.is_finite() {
            return Err(format!("link cost {} must be positive", link.cost));
        }
        if !(link.f_link > 0.25 && link.f_link <= 1.0) {
            return Err(format!("link fidelity {} outside (0.25,1]", link.f_link));
        }
        if !(0.0..=1.0).contains(&link.p_gen) {
            return Err(format!(
                "generation probability {} outside [0,1]",
                link.p_gen
            ));
        }
        if link.c_delay < 0.0 || !link.c_delay.is_finite() {
            return Err(format!(
                "classical delay {} must be nonnegative",
                link.c_delay
            ));
        }
        self.links.push(link);
        Ok(())
    }

    pub fn element(&self, name: &str) -> Result<&Element, TopologyError> {
        self.elements
            .get(name)
            .ok_or_else(|| TopologyError::UnknownElement(name.to_string()))
    }

    pub fn contains_element(&self, name: &str) -> bool {
        self.elements.contains_key(name)
    }

    pub fn is_node(&self, name: &str) -> bool {
        self.elements
            .get(name)
            .map(|e| e.kind != ElementKind::Network)
            .unwrap_or(false)
    }

    pub fn is_network(&self, name: &str) -> bool {
        self.elements
            .get(name)
            .map(|e| e.kind == ElementKind::Network)
            .unwrap_or(false)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    /// The single link between two elements, if present (smallest cost, then
    /// lexicographic, when parallel links exist).
    pub fn link_between(&self, a: &str, b: &str) -> Option<&Link> {
        self.links
            .iter()
            .filter(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
            .min_by(|x, y| x.cost.partial_cmp(&y.cost).unwrap())
    }

    /// Leaf nodes, in name order.
    pub fn nodes(&self) -> impl Iterator<Item = &Element> {
        self.elements
            .values()
            .filter(|e| e.kind != ElementKind::Network)
    }

    /// All element names, in name order.
    pub fn element_names(&self) -> impl Iterator<Item = &str> {
        self.elements.keys().map(|s| s.as_str())
    }

    pub fn depth(&self, name: &str) -> usize {
        let mut d = 0;
        let mut cur = name;
        while let Some(p) = self.elements.get(cur).and_then(|e| e.parent.as_deref()) {
            d += 1;
            cur = p;
        }
        d
    }

    /// Enclosing networks from the immediate parent outwards.
    pub fn ancestors(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = name;
        while let Some(p) = self.elements.get(cur).and_then(|e| e.parent.as_deref()) {
            out.push(p.to_string());
            cur = p;
        }
        out
    }

    /// Is `name` equal to or nested anywhere inside `container`?
    pub fn is_within(&self, name: &str, container: &str) -> bool {
        if name == container {
            return true;
        }
        self.ancestors(name).iter().any(|a| a == container)
    }

    /// The direct member of `net` (or of the root level for `None`) whose
    /// subtree contains `name`.
    pub fn member_containing(&self, net: Option<&str>, name: &str) -> Option<String> {
        let mut cur = name.to_string();
        loop {
            let parent = self.elements.get(&cur)?.parent.clone();
            match (parent.as_deref(), net) {
                (None, None) => return Some(cur),
                (Some(p), Some(n)) if p == n => return Some(cur),
                (None, Some(_)) => return None,
                _ => cur = parent.unwrap(),
            }
        }
    }

    /// Direct members of a network, or the root-level elements for `None`.
    pub fn members_of(&self, net: Option<&str>) -> Result<Vec<String>, TopologyError> {
        match net {
            None => Ok(self.roots.iter().cloned().collect()),
            Some(n) => {
                let e = self.element(n)?;
                if e.kind != ElementKind::Network {
                    return Err(TopologyError::NotANode(n.to_string()));
                }
                Ok(e.members.iter().cloned().collect())
            }
        }
    }

    /// Leaf nodes inside an element (the element itself if it is a node).
    pub fn nodes_within(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![name.to_string()];
        while let Some(cur) = stack.pop() {
            if let Some(e) = self.elements.get(&cur) {
                if e.kind == ElementKind::Network {
                    stack.extend(e.members.iter().cloned());
                } else {
                    out.push(cur);
                }
            }
        }
        out.sort();
        out
    }

    /// Does this element have a link whose far end lies outside `boundary`?
    pub fn crosses_boundary(&self, name: &str, boundary: &str) -> bool {
        self.links.iter().any(|l| {
            (l.a == name && !self.is_within(&l.b, boundary))
                || (l.b == name && !self.is_within(&l.a, boundary))
        })
    }

    /// The adjacency graph seen inside one network level: vertices are the
    /// direct members, edges are induced by links whose endpoints lie in two
    /// different members.
    pub fn member_graph(
        &self,
        net: Option<&str>,
        cost: &CostFn,
    ) -> Result<BTreeMap<String, Vec<(String, f64)>>, TopologyError> {
        let members = self.members_of(net)?;
        let mut graph: BTreeMap<String, Vec<(String, f64)>> =
            members.iter().map(|m| (m.clone(), Vec::new())).collect();
        for link in &self.links {
            let ma = self.member_containing(net, &link.a);
            let mb = self.member_containing(net, &link.b);
            if let (Some(ma), Some(mb)) = (ma, mb) {
                if ma != mb {
                    let c = cost(link);
                    graph.get_mut(&ma).unwrap().push((mb.clone(), c));
                    graph.get_mut(&mb).unwrap().push((ma.clone(), c));
                }
            }
        }
        for adj in graph.values_mut() {
            adj.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.partial_cmp(&y.1).unwrap()));
        }
        Ok(graph)
    }

    /// The flat leaf-node graph used for physical path selection; only
    /// node-to-node links appear.
    pub fn node_graph(&self, cost: &CostFn) -> BTreeMap<String, Vec<(String, f64)>> {
        let mut graph: BTreeMap<String, Vec<(String, f64)>> =
            self.nodes().map(|e| (e.name.clone(), Vec::new())).collect();
        for link in &self.links {
            if self.is_node(&link.a) && self.is_node(&link.b) {
                let c = cost(link);
                graph.get_mut(&link.a).unwrap().push((link.b.clone(), c));
                graph.get_mut(&link.b).unwrap().push((link.a.clone(), c));
            }
        }
        graph
    }

    /// Declared gateway nodes of a network, name-ordered.
    pub fn gateways_of(&self, net: &str) -> Result<Vec<String>, TopologyError> {
        Ok(self.element(net)?.gateways.iter().cloned().collect())
    }
}

#[cfg(test)]
pub mod tests;
