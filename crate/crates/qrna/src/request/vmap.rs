//! Per-node binding of virtual qubit names to physical slots.
//!
//! Each node keeps the virtual-to-physical mapping private: requests talk
//! about [`FullVirtualId`]s, the node alone decides which slot holds the
//! logical state, and it may move the state between slots without telling
//! anyone.

use std::collections::BTreeMap;

use thiserror::Error;

use super::FullVirtualId;
use crate::engine::QubitSlot;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VmapError {
    #[error("{0} is already bound")]
    DoubleBind(FullVirtualId),
    #[error("no binding for {0}")]
    UnknownAddress(FullVirtualId),
    #[error("slot {0} is occupied")]
    SlotBusy(QubitSlot),
    #[error("slot {slot} belongs to register {expected:?}, not this node")]
    ForeignSlot { slot: QubitSlot, expected: String },
}

/// Bidirectionally injective map FullVirtualId <-> QubitSlot for one node.
#[derive(Debug, Clone, Default)]
pub struct VirtualMap {
    owner: String,
    forward: BTreeMap<FullVirtualId, QubitSlot>,
    reverse: BTreeMap<QubitSlot, FullVirtualId>,
}

impl VirtualMap {
    pub fn new(owner: impl Into<String>) -> VirtualMap {
        VirtualMap {
            owner: owner.into(),
            forward: BTreeMap::new(),
            reverse: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    fn check_slot(&self, slot: &QubitSlot) -> Result<(), VmapError> {
        if slot.register != self.owner {
            return Err(VmapError::ForeignSlot {
                slot: slot.clone(),
                expected: self.owner.clone(),
            });
        }
        Ok(())
    }

    /// Bind an unbound id to a free slot.
    pub fn bind(&mut self, id: FullVirtualId, slot: QubitSlot) -> Result<(), VmapError> {
        self.check_slot(&slot)?;
        if self.forward.contains_key(&id) {
            return Err(VmapError::DoubleBind(id));
        }
        if self.reverse.contains_key(&slot) {
            return Err(VmapError::SlotBusy(slot));
        }
        self.reverse.insert(slot.clone(), id.clone());
        self.forward.insert(id, slot);
        Ok(())
    }

    /// Look up the slot bound to an id.
    pub fn resolve(&self, id: &FullVirtualId) -> Result<&QubitSlot, VmapError> {
        self.forward
            .get(id)
            .ok_or_else(|| VmapError::UnknownAddress(id.clone()))
    }

    /// Look up the id bound to a slot.
    pub fn resolve_slot(&self, slot: &QubitSlot) -> Option<&FullVirtualId> {
        self.reverse.get(slot)
    }

    /// Move a bound logical qubit to a different free slot.
    pub fn rebind(&mut self, id: &FullVirtualId, new_slot: QubitSlot) -> Result<(), VmapError> {
        self.check_slot(&new_slot)?;
        if !self.forward.contains_key(id) {
            return Err(VmapError::UnknownAddress(id.clone()));
        }
        if let Some(holder) = self.reverse.get(&new_slot) {
            if holder != id {
                return Err(VmapError::SlotBusy(new_slot));
            }
            return Ok(()); // already there
        }
        let old = self.forward.insert(id.clone(), new_slot.clone()).unwrap();
        self.reverse.remove(&old);
        self.reverse.insert(new_slot, id.clone());
        Ok(())
    }

    /// Drop a binding, freeing its slot for reuse. Returns the freed slot.
    pub fn release(&mut self, id: &FullVirtualId) -> Result<QubitSlot, VmapError> {
        let slot = self
            .forward
            .remove(id)
            .ok_or_else(|| VmapError::UnknownAddress(id.clone()))?;
        self.reverse.remove(&slot);
        Ok(slot)
    }

    pub fn bindings(&self) -> impl Iterator<Item = (&FullVirtualId, &QubitSlot)> {
        self.forward.iter()
    }

    /// Both directions stay injective; violated only by a bug.
    pub fn check_injective(&self) -> bool {
        self.forward.len() == self.reverse.len()
            && self
                .forward
                .iter()
                .all(|(id, slot)| self.reverse.get(slot) == Some(id))
    }
}
