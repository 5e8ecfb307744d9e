//! The global quantum state store.
//!
//! Owns the factored global density matrix (one factor per entangled group),
//! every node's virtual-address map and slot pool, and the bookkeeping that
//! ties a (node, virtual id) pair to a concrete engine qubit. All gate
//! application goes through [`StateStore::apply_gate_at`], which enforces the
//! LOCC discipline: a multi-qubit gate only ever acts on qubits co-located
//! at one node.

use std::collections::BTreeMap;

use crate::engine::{
    DensityMatrix, EngineError, GateKind, GateOp, NoiseChannel, OutcomeSelect, QubitLabel,
    QubitSlot, StateVector, DEFAULT_QUBIT_CAP,
};
use crate::request::{FullVirtualId, VirtualMap, VmapError};

use super::LinkError;

/// A virtual qubit id bound at a specific node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct BoundId {
    pub node: String,
    pub id: FullVirtualId,
}

impl BoundId {
    pub fn new(node: impl Into<String>, id: FullVirtualId) -> BoundId {
        BoundId {
            node: node.into(),
            id,
        }
    }
}

impl std::fmt::Display for BoundId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{}", self.id, self.node)
    }
}

#[derive(Debug, Clone, Copy)]
struct QubitLoc {
    factor: usize,
    label: QubitLabel,
}

#[derive(Debug, Clone, Default)]
struct SlotPool {
    free: Vec<u32>,
    next: u32,
}

impl SlotPool {
    fn take(&mut self) -> u32 {
        // freed slots are reused lowest-index first
        if let Some(pos) = self
            .free
            .iter()
            .enumerate()
            .min_by_key(|(_, v)| **v)
            .map(|(i, _)| i)
        {
            self.free.swap_remove(pos)
        } else {
            let s = self.next;
            self.next += 1;
            s
        }
    }

    fn give_back(&mut self, slot: u32) {
        self.free.push(slot);
    }
}

#[derive(Debug, Clone)]
pub struct StateStore {
    factors: Vec<Option<DensityMatrix>>,
    locs: BTreeMap<BoundId, QubitLoc>,
    vmaps: BTreeMap<String, VirtualMap>,
    pools: BTreeMap<String, SlotPool>,
    next_label: u64,
    qubit_cap: usize,
}

impl Default for StateStore {
    fn default() -> Self {
        StateStore::new(DEFAULT_QUBIT_CAP)
    }
}

impl StateStore {
    pub fn new(qubit_cap: usize) -> StateStore {
        StateStore {
            factors: Vec::new(),
            locs: BTreeMap::new(),
            vmaps: BTreeMap::new(),
            pools: BTreeMap::new(),
            next_label: 0,
            qubit_cap,
        }
    }

    pub fn qubit_cap(&self) -> usize {
        self.qubit_cap
    }

    fn mint_label(&mut self) -> QubitLabel {
        let l = QubitLabel(self.next_label);
        self.next_label += 1;
        l
    }

    fn loc(&self, bid: &BoundId) -> Result<QubitLoc, LinkError> {
        self.locs
            .get(bid)
            .copied()
            .ok_or_else(|| LinkError::UnknownQubit(bid.clone()))
    }

    /// The node's virtual map (created on first use).
    pub fn vmap(&mut self, node: &str) -> &mut VirtualMap {
        self.vmaps
            .entry(node.to_string())
            .or_insert_with(|| VirtualMap::new(node))
    }

    pub fn vmaps(&self) -> impl Iterator<Item = &VirtualMap> {
        self.vmaps.values()
    }

    pub fn is_bound(&self, bid: &BoundId) -> bool {
        self.locs.contains_key(bid)
    }

    pub fn bound_ids(&self) -> impl Iterator<Item = &BoundId> {
        self.locs.keys()
    }

    fn bind_slot(&mut self, bid: &BoundId) -> Result<QubitSlot, VmapError> {
        let index = self.pools.entry(bid.node.clone()).or_default().take();
        let slot = QubitSlot {
            register: bid.node.clone(),
            index,
        };
        match self.vmap(&bid.node).bind(bid.id.clone(), slot.clone()) {
            Ok(()) => Ok(slot),
            Err(e) => {
                self.pools.get_mut(&bid.node).unwrap().give_back(index);
                Err(e)
            }
        }
    }

    /// Allocate fresh co-located qubits holding the given pure state.
    pub fn alloc_pure(&mut self, bids: &[BoundId], psi: &StateVector) -> Result<(), LinkError> {
        if bids.len() != psi.n_qubits() {
            return Err(LinkError::Engine(EngineError::Shape(format!(
                "{} ids for a {}-qubit state",
                bids.len(),
                psi.n_qubits()
            ))));
        }
        self.check_unbound(bids)?;
        let labels: Vec<QubitLabel> = (0..bids.len()).map(|_| self.mint_label()).collect();
        let factor = DensityMatrix::from_pure(&labels, psi)?;
        self.admit(bids, labels, factor)
    }

    /// Allocate fresh |0> qubits.
    pub fn alloc_zero(&mut self, bids: &[BoundId]) -> Result<(), LinkError> {
        self.check_unbound(bids)?;
        let labels: Vec<QubitLabel> = (0..bids.len()).map(|_| self.mint_label()).collect();
        let factor = DensityMatrix::zero_state_with_cap(&labels, self.qubit_cap)?;
        self.admit(bids, labels, factor)
    }

    /// Allocate a fresh Werner pair across two nodes.
    pub fn alloc_werner(&mut self, a: &BoundId, b: &BoundId, f: f64) -> Result<(), LinkError> {
        self.check_unbound(&[a.clone(), b.clone()])?;
        let la = self.mint_label();
        let lb = self.mint_label();
        let factor = DensityMatrix::werner_pair([la, lb], f)?;
        self.admit(&[a.clone(), b.clone()], vec![la, lb], factor)
    }

    fn check_unbound(&self, bids: &[BoundId]) -> Result<(), LinkError> {
        for (i, bid) in bids.iter().enumerate() {
            if self.locs.contains_key(bid) || bids[i + 1..].contains(bid) {
                return Err(LinkError::Vmap(VmapError::DoubleBind(bid.id.clone())));
            }
        }
        Ok(())
    }

    fn admit(
        &mut self,
        bids: &[BoundId],
        labels: Vec<QubitLabel>,
        factor: DensityMatrix,
    ) -> Result<(), LinkError> {
        factor.validate()?;
        let idx = self.factors.len();
        self.factors.push(Some(factor));
        for (bid, label) in bids.iter().zip(labels) {
            self.bind_slot(bid).map_err(LinkError::Vmap)?;
            self.locs
                .insert(bid.clone(), QubitLoc { factor: idx, label });
        }
        Ok(())
    }

    /// Merge the factors holding all the given qubits into one; returns its
    /// index. Errors if the merged register would exceed the qubit cap.
    fn merge(&mut self, bids: &[&BoundId]) -> Result<usize, LinkError> {
        let mut indices: Vec<usize> = Vec::new();
        for bid in bids {
            let loc = self.loc(bid)?;
            if !indices.contains(&loc.factor) {
                indices.push(loc.factor);
            }
        }
        indices.sort();
        let target = indices[0];
        for &idx in &indices[1..] {
            let other = self.factors[idx].take().expect("live factor");
            let base = self.factors[target].take().expect("live factor");
            if base.n_qubits() + other.n_qubits() > self.qubit_cap {
                return Err(LinkError::Engine(EngineError::ResourceLimit {
                    requested: base.n_qubits() + other.n_qubits(),
                    cap: self.qubit_cap,
                }));
            }
            let merged = base.tensor(&other)?;
            self.factors[target] = Some(merged);
            for loc in self.locs.values_mut() {
                if loc.factor == idx {
                    loc.factor = target;
                }
            }
        }
        Ok(target)
    }

    /// Apply a gate whose targets must all be bound at `node`.
    pub fn apply_gate_at(
        &mut self,
        node: &str,
        kind: GateKind,
        targets: &[&BoundId],
    ) -> Result<(), LinkError> {
        for bid in targets {
            if bid.node != node {
                return Err(LinkError::Locc {
                    node: node.to_string(),
                    qubit: (*bid).clone(),
                });
            }
        }
        let factor_idx = self.merge(targets)?;
        let labels: Vec<QubitLabel> = targets
            .iter()
            .map(|b| self.loc(b).map(|l| l.label))
            .collect::<Result<_, _>>()?;
        let gate = GateOp::new(kind, labels)?;
        let factor = self.factors[factor_idx].take().expect("live factor");
        let next = factor.apply_gate(&gate)?;
        next.validate()?;
        self.factors[factor_idx] = Some(next);
        Ok(())
    }

    /// Single-qubit depolarizing noise on a bound qubit.
    pub fn apply_depolarizing(&mut self, bid: &BoundId, p: f64) -> Result<(), LinkError> {
        if p == 0.0 {
            return Ok(());
        }
        let loc = self.loc(bid)?;
        let factor = self.factors[loc.factor].take().expect("live factor");
        let next = factor.apply_channel(NoiseChannel::Depolarizing { p }, &[loc.label])?;
        next.validate()?;
        self.factors[loc.factor] = Some(next);
        Ok(())
    }

    /// Z-measure a qubit, then discard it and free its slot and binding.
    pub fn measure_and_release(
        &mut self,
        bid: &BoundId,
        select: OutcomeSelect,
    ) -> Result<(bool, f64), LinkError> {
        let loc = self.loc(bid)?;
        let factor = self.factors[loc.factor].take().expect("live factor");
        let (outcome, prob, post) = factor.measure_z(loc.label, select)?;
        post.validate()?;
        self.factors[loc.factor] = Some(post);
        self.drop_qubit(bid)?;
        Ok((outcome, prob))
    }

    /// Discard a qubit without measuring (trace it out of its factor).
    pub fn release(&mut self, bid: &BoundId) -> Result<(), LinkError> {
        self.loc(bid)?;
        self.drop_qubit(bid)
    }

    fn drop_qubit(&mut self, bid: &BoundId) -> Result<(), LinkError> {
        let loc = self.loc(bid)?;
        let factor = self.factors[loc.factor].take().expect("live factor");
        if factor.n_qubits() == 1 {
            // factor disappears entirely
        } else {
            let reduced = factor.discard(loc.label)?;
            reduced.validate()?;
            self.factors[loc.factor] = Some(reduced);
        }
        self.locs.remove(bid);
        let slot = self
            .vmap(&bid.node)
            .release(&bid.id)
            .map_err(LinkError::Vmap)?;
        self.pools.get_mut(&bid.node).unwrap().give_back(slot.index);
        Ok(())
    }

    /// Rename a bound qubit (same node); the physical state stays put.
    pub fn relabel(&mut self, old: &BoundId, new: &BoundId) -> Result<(), LinkError> {
        if old == new {
            self.loc(old)?;
            return Ok(());
        }
        if old.node != new.node {
            return Err(LinkError::Locc {
                node: new.node.clone(),
                qubit: old.clone(),
            });
        }
        if self.locs.contains_key(new) {
            return Err(LinkError::Vmap(VmapError::DoubleBind(new.id.clone())));
        }
        let loc = self.loc(old)?;
        let slot = self
            .vmap(&old.node)
            .release(&old.id)
            .map_err(LinkError::Vmap)?;
        self.vmap(&new.node)
            .bind(new.id.clone(), slot)
            .map_err(LinkError::Vmap)?;
        self.locs.remove(old);
        self.locs.insert(new.clone(), loc);
        Ok(())
    }

    /// Reduced state over the given qubits, tensor factors ordered to match,
    /// with labels normalized to 0..k in that order.
    pub fn reduced_state(&self, bids: &[BoundId]) -> Result<DensityMatrix, LinkError> {
        if bids.is_empty() {
            return Ok(DensityMatrix::scalar());
        }
        let mut factor_order: Vec<usize> = Vec::new();
        for bid in bids {
            let loc = self.loc(bid)?;
            if !factor_order.contains(&loc.factor) {
                factor_order.push(loc.factor);
            }
        }
        let mut joined: Option<DensityMatrix> = None;
        for idx in factor_order {
            let factor = self.factors[idx].as_ref().expect("live factor");
            let keep: Vec<QubitLabel> = factor
                .qubit_order()
                .iter()
                .copied()
                .filter(|l| {
                    bids.iter().any(|b| {
                        self.locs
                            .get(b)
                            .map(|loc| loc.factor == idx && loc.label == *l)
                            .unwrap_or(false)
                    })
                })
                .collect();
            let part = factor.partial_trace(&keep)?;
            joined = Some(match joined {
                None => part,
                Some(j) => j.tensor(&part)?,
            });
        }
        let joined = joined.expect("at least one qubit");
        let wanted: Vec<QubitLabel> = bids
            .iter()
            .map(|b| self.loc(b).map(|l| l.label))
            .collect::<Result<_, _>>()?;
        let ordered = joined.permuted(&wanted)?;
        // normalize labels to positions for the caller
        let normalized: Vec<QubitLabel> = (0..bids.len() as u64).map(QubitLabel).collect();
        Ok(ordered.relabeled(&normalized))
    }

    /// Fidelity of a cross-node pair with |Phi+>.
    pub fn pair_fidelity(&self, a: &BoundId, b: &BoundId) -> Result<f64, LinkError> {
        let rho = self.reduced_state(&[a.clone(), b.clone()])?;
        let r = num_complex::Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let bell = StateVector::fanout(r, r, 2)?;
        Ok(rho.fidelity(&bell)?)
    }

    /// Validate every live factor (trace, Hermiticity, positivity).
    pub fn validate_all(&self) -> Result<(), LinkError> {
        for factor in self.factors.iter().flatten() {
            factor.validate()?;
        }
        Ok(())
    }

    /// Leak check: the set of live bindings must equal `expected`, every
    /// virtual map must be injective, and factor bookkeeping must agree.
    pub fn audit(&self, expected: &[BoundId]) -> Result<(), String> {
        let live: Vec<&BoundId> = self.locs.keys().collect();
        let mut want: Vec<&BoundId> = expected.iter().collect();
        want.sort();
        if live != want {
            return Err(format!(
                "leaked or missing bindings: live {live:?}, expected {want:?}"
            ));
        }
        for vmap in self.vmaps.values() {
            if !vmap.check_injective() {
                return Err(format!("virtual map of {} lost injectivity", vmap.owner()));
            }
        }
        let mut total = 0usize;
        for (idx, factor) in self.factors.iter().enumerate() {
            if let Some(f) = factor {
                let holders = self.locs.values().filter(|loc| loc.factor == idx).count();
                if holders != f.n_qubits() {
                    return Err(format!(
                        "factor {idx} has {} qubits but {holders} bindings",
                        f.n_qubits()
                    ));
                }
                total += f.n_qubits();
            }
        }
        if total != self.locs.len() {
            return Err("binding/factor count mismatch".into());
        }
        Ok(())
    }
}
