//! The global store.
//!
//! Every piece of protocol state lives here as a named integer cell, a
//! fixed-length array (one entry per user slot) or a square matrix (one entry
//! per ordered pair of slots). Entries are laid out in one flat vector, ordered
//! by name, so two stores over the same schema compare and serialize
//! canonically without any sorting at run time.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64;

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellId(u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArrayId {
    offset: u32,
    len: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MatrixId {
    offset: u32,
    n: u32,
}

impl ArrayId {
    pub fn len(self) -> usize {
        self.len as usize
    }

    pub fn is_empty(self) -> bool {
        self.len == 0
    }
}

impl MatrixId {
    pub fn dim(self) -> usize {
        self.n as usize
    }
}

/// What a name in the schema refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entry {
    Cell(CellId),
    Array(ArrayId),
    Matrix(MatrixId),
}

#[derive(Debug, Clone)]
enum Decl {
    Cell(i64),
    Array(Vec<i64>),
    Matrix(usize, Vec<i64>),
}

/// Collects declarations; offsets are assigned in name order by [`SchemaBuilder::build`].
#[derive(Debug, Default, Clone)]
pub struct SchemaBuilder {
    decls: BTreeMap<String, Decl>,
}

impl SchemaBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cell(&mut self, name: impl Into<String>, init: i64) -> &mut Self {
        self.decls.insert(name.into(), Decl::Cell(init));
        self
    }

    pub fn array(&mut self, name: impl Into<String>, init: Vec<i64>) -> &mut Self {
        self.decls.insert(name.into(), Decl::Array(init));
        self
    }

    /// `init` is row-major, `n * n` entries.
    pub fn matrix(&mut self, name: impl Into<String>, n: usize, init: Vec<i64>) -> &mut Self {
        assert_eq!(init.len(), n * n, "matrix initializer must be n*n");
        self.decls.insert(name.into(), Decl::Matrix(n, init));
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.decls.contains_key(name)
    }

    pub fn build(self) -> Arc<Schema> {
        let mut entries = BTreeMap::new();
        let mut initial = Vec::new();
        for (name, decl) in self.decls {
            let offset = initial.len() as u32;
            let entry = match decl {
                Decl::Cell(v) => {
                    initial.push(v);
                    Entry::Cell(CellId(offset))
                }
                Decl::Array(vs) => {
                    let len = vs.len() as u32;
                    initial.extend(vs);
                    Entry::Array(ArrayId { offset, len })
                }
                Decl::Matrix(n, vs) => {
                    initial.extend(vs);
                    Entry::Matrix(MatrixId { offset, n: n as u32 })
                }
            };
            entries.insert(name, entry);
        }
        Arc::new(Schema { entries, initial })
    }
}

/// Name-to-layout map plus the initial values of every entry.
#[derive(Debug, PartialEq, Eq)]
pub struct Schema {
    entries: BTreeMap<String, Entry>,
    initial: Vec<i64>,
}

impl Schema {
    pub fn empty() -> Arc<Schema> {
        SchemaBuilder::new().build()
    }

    pub fn width(&self) -> usize {
        self.initial.len()
    }

    pub fn lookup(&self, name: &str) -> Option<Entry> {
        self.entries.get(name).copied()
    }

    pub fn cell(&self, name: &str) -> Result<CellId, ModelError> {
        match self.lookup(name) {
            Some(Entry::Cell(c)) => Ok(c),
            _ => Err(ModelError::UndefinedCell(name.to_string())),
        }
    }

    pub fn array(&self, name: &str) -> Result<ArrayId, ModelError> {
        match self.lookup(name) {
            Some(Entry::Array(a)) => Ok(a),
            _ => Err(ModelError::UndefinedCell(name.to_string())),
        }
    }

    pub fn matrix(&self, name: &str) -> Result<MatrixId, ModelError> {
        match self.lookup(name) {
            Some(Entry::Matrix(m)) => Ok(m),
            _ => Err(ModelError::UndefinedCell(name.to_string())),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = (&str, Entry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Live global state. Cloning is cheap enough to do once per explored transition.
#[derive(Clone)]
pub struct Store {
    schema: Arc<Schema>,
    values: Vec<i64>,
    block: u64,
}

/// Immutable copy of a store taken before an atomic step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot(Store);

impl Snapshot {
    pub fn restore(&self) -> Store {
        self.0.clone()
    }

    pub fn canonical_hash(&self) -> u64 {
        self.0.canonical_hash()
    }
}

#[derive(Serialize)]
struct CanonicalRef<'a> {
    block: u64,
    values: &'a [i64],
}

#[derive(Deserialize)]
struct CanonicalOwned {
    block: u64,
    values: Vec<i64>,
}

impl Store {
    pub fn new(schema: Arc<Schema>) -> Self {
        let values = schema.initial.clone();
        Self {
            schema,
            values,
            block: 0,
        }
    }

    pub fn empty() -> Self {
        Self::new(Schema::empty())
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn block_number(&self) -> u64 {
        self.block
    }

    pub fn set_block_number(&mut self, block: u64) {
        self.block = block;
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot(self.clone())
    }

    pub fn restore(&mut self, snapshot: &Snapshot) {
        *self = snapshot.restore();
    }

    pub fn get(&self, cell: CellId) -> i64 {
        self.values[cell.0 as usize]
    }

    pub fn set(&mut self, cell: CellId, value: i64) {
        self.values[cell.0 as usize] = value;
    }

    fn elem_index(array: ArrayId, index: i64) -> Result<usize, ModelError> {
        if index < 0 || index >= array.len as i64 {
            return Err(ModelError::IndexOutOfRange {
                index,
                len: array.len as usize,
            });
        }
        Ok(array.offset as usize + index as usize)
    }

    fn matrix_index(m: MatrixId, row: i64, col: i64) -> Result<usize, ModelError> {
        for i in [row, col] {
            if i < 0 || i >= m.n as i64 {
                return Err(ModelError::IndexOutOfRange {
                    index: i,
                    len: m.n as usize,
                });
            }
        }
        Ok(m.offset as usize + row as usize * m.n as usize + col as usize)
    }

    pub fn elem(&self, array: ArrayId, index: i64) -> Result<i64, ModelError> {
        Ok(self.values[Self::elem_index(array, index)?])
    }

    pub fn set_elem(&mut self, array: ArrayId, index: i64, value: i64) -> Result<(), ModelError> {
        let i = Self::elem_index(array, index)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn matrix_elem(&self, m: MatrixId, row: i64, col: i64) -> Result<i64, ModelError> {
        Ok(self.values[Self::matrix_index(m, row, col)?])
    }

    pub fn set_matrix_elem(
        &mut self,
        m: MatrixId,
        row: i64,
        col: i64,
        value: i64,
    ) -> Result<(), ModelError> {
        let i = Self::matrix_index(m, row, col)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn slice(&self, array: ArrayId) -> &[i64] {
        let start = array.offset as usize;
        &self.values[start..start + array.len as usize]
    }

    pub fn sum(&self, array: ArrayId) -> Result<i64, ModelError> {
        self.slice(array)
            .iter()
            .try_fold(0i64, |acc, v| acc.checked_add(*v))
            .ok_or(ModelError::Overflow)
    }

    /// Looks a scalar up by name; `blockNumber` is always defined.
    pub fn get_named(&self, name: &str) -> Result<i64, ModelError> {
        if name == BLOCK_NUMBER {
            return Ok(self.block as i64);
        }
        Ok(self.get(self.schema.cell(name)?))
    }

    /// Order-stable serialization: block number then every value in schema order.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        postcard::to_allocvec(&CanonicalRef {
            block: self.block,
            values: &self.values,
        })
        .expect("serializing integers cannot fail")
    }

    pub fn from_canonical(schema: Arc<Schema>, bytes: &[u8]) -> Result<Self, ModelError> {
        let owned: CanonicalOwned =
            postcard::from_bytes(bytes).map_err(|e| ModelError::Decode(e.to_string()))?;
        if owned.values.len() != schema.width() {
            return Err(ModelError::Decode(format!(
                "expected {} values, found {}",
                schema.width(),
                owned.values.len()
            )));
        }
        Ok(Self {
            schema,
            values: owned.values,
            block: owned.block,
        })
    }

    pub fn canonical_hash(&self) -> u64 {
        xxh3_64(&self.canonical_bytes())
    }
}

/// Reserved name for the block height in expressions.
pub const BLOCK_NUMBER: &str = "blockNumber";

impl PartialEq for Store {
    fn eq(&self, other: &Self) -> bool {
        self.block == other.block
            && self.values == other.values
            && (Arc::ptr_eq(&self.schema, &other.schema) || self.schema == other.schema)
    }
}

impl Eq for Store {}

impl fmt::Debug for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        map.entry(&BLOCK_NUMBER, &self.block);
        for (name, entry) in self.schema.names() {
            match entry {
                Entry::Cell(c) => map.entry(&name, &self.get(c)),
                Entry::Array(a) => map.entry(&name, &self.slice(a)),
                Entry::Matrix(m) => {
                    let start = m.offset as usize;
                    let n = m.n as usize;
                    map.entry(&name, &&self.values[start..start + n * n])
                }
            };
        }
        map.finish()
    }
}
