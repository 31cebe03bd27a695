use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fixed::FixedFormat;

/// Default bound on the total number of qubits in a layout.
pub const DEFAULT_MAX_QUBITS: u32 = 40;

/// Widest single register; labels are stored as `u64`.
pub const MAX_REGISTER_WIDTH: u32 = 62;

/// Stable handle to a register. Handles survive the removal of other
/// registers from the layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RegId(u32);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegisterKind {
    /// Computational index (node, feature, eigenvector, ...).
    Index,
    /// Single ancilla qubit.
    Flag,
    /// Phase-estimation readout; labels read as `pi * signed(y) / 2^q`.
    Phase,
    /// Signed fixed-point value.
    FixedPoint(FixedFormat),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Register {
    id: RegId,
    name: String,
    width: u32,
    kind: RegisterKind,
}

impl Register {
    pub fn id(&self) -> RegId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn kind(&self) -> RegisterKind {
        self.kind
    }

    /// Number of basis labels, `2^width`.
    pub fn dim(&self) -> usize {
        1usize << self.width
    }

    pub fn format(&self) -> Option<FixedFormat> {
        match self.kind {
            RegisterKind::FixedPoint(f) => Some(f),
            _ => None,
        }
    }
}

/// Ordered register list of a multi-register state.
#[derive(Clone, Debug, PartialEq)]
pub struct RegisterLayout {
    registers: Vec<Register>,
    max_qubits: u32,
    next_id: u32,
}

impl Default for RegisterLayout {
    fn default() -> Self {
        Self::new()
    }
}

impl RegisterLayout {
    pub fn new() -> Self {
        Self::with_max_qubits(DEFAULT_MAX_QUBITS)
    }

    pub fn with_max_qubits(max_qubits: u32) -> Self {
        Self { registers: Vec::new(), max_qubits, next_id: 0 }
    }

    pub fn max_qubits(&self) -> u32 {
        self.max_qubits
    }

    pub fn total_qubits(&self) -> u32 {
        self.registers.iter().map(|r| r.width).sum()
    }

    pub fn len(&self) -> usize {
        self.registers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Register> {
        self.registers.iter()
    }

    /// Appends a register. Flags are one qubit wide and fixed-point registers
    /// take the width of their format.
    pub fn add(&mut self, name: &str, width: u32, kind: RegisterKind) -> Result<RegId> {
        if self.registers.iter().any(|r| r.name == name) {
            return Err(Error::DuplicateRegister(name.to_string()));
        }
        let width_ok = match kind {
            RegisterKind::Flag => width == 1,
            RegisterKind::FixedPoint(f) => width == f.width(),
            RegisterKind::Phase => width >= 1,
            RegisterKind::Index => true,
        };
        if !width_ok || width > MAX_REGISTER_WIDTH {
            return Err(Error::InvalidRegisterKind(name.to_string()));
        }
        let needed = self.total_qubits() + width;
        if needed > self.max_qubits {
            return Err(Error::LayoutTooWide { needed, max: self.max_qubits });
        }
        let id = RegId(self.next_id);
        self.next_id += 1;
        self.registers.push(Register { id, name: name.to_string(), width, kind });
        Ok(id)
    }

    /// Convenience for [`RegisterKind::FixedPoint`] registers.
    pub fn add_fixed(&mut self, name: &str, format: FixedFormat) -> Result<RegId> {
        self.add(name, format.width(), RegisterKind::FixedPoint(format))
    }

    pub fn position(&self, id: RegId) -> Result<usize> {
        self.registers
            .iter()
            .position(|r| r.id == id)
            .ok_or_else(|| Error::UnknownRegister(alloc::format!("#{}", id.0)))
    }

    pub fn register(&self, id: RegId) -> Result<&Register> {
        Ok(&self.registers[self.position(id)?])
    }

    pub fn by_name(&self, name: &str) -> Option<RegId> {
        self.registers.iter().find(|r| r.name == name).map(|r| r.id)
    }

    pub(crate) fn at(&self, pos: usize) -> &Register {
        &self.registers[pos]
    }

    pub(crate) fn remove(&mut self, id: RegId) -> Result<usize> {
        let pos = self.position(id)?;
        self.registers.remove(pos);
        Ok(pos)
    }

    pub(crate) fn name_of(&self, id: RegId) -> String {
        self.register(id)
            .map(|r| r.name.clone())
            .unwrap_or_else(|_| alloc::format!("#{}", id.0))
    }
}
