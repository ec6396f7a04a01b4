//! Visited set and parent links.

use rustc_hash::FxHashMap;

use crate::kernel::Action;

pub(crate) const ROOT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Node {
    pub parent: u32,
    pub action: Action,
}

/// States are identified by their canonical key. Keys with equal hashes are
/// chained and compared in full, unless `bitstate` is set, in which case
/// only the hash is kept and collisions silently merge states.
#[derive(Debug, Default)]
pub(crate) struct Graph {
    bitstate: bool,
    heads: FxHashMap<u64, u32>,
    chain: Vec<u32>,
    arena: Vec<u8>,
    ends: Vec<usize>,
    pub nodes: Vec<Node>,
}

impl Graph {
    pub fn new(bitstate: bool) -> Self {
        Self {
            bitstate,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn key(&self, id: u32) -> Option<&[u8]> {
        if self.bitstate {
            return None;
        }
        let end = self.ends[id as usize];
        let start = if id == 0 { 0 } else { self.ends[id as usize - 1] };
        Some(&self.arena[start..end])
    }

    /// Inserts a state; returns its new id, or `None` if already present.
    pub fn insert(&mut self, hash: u64, key: &[u8], node: Node) -> Option<u32> {
        let id = self.nodes.len() as u32;
        match self.heads.get(&hash).copied() {
            Some(_) if self.bitstate => return None,
            Some(mut cur) => loop {
                if self.key(cur) == Some(key) {
                    return None;
                }
                let next = self.chain[cur as usize];
                if next == ROOT {
                    self.chain[cur as usize] = id;
                    break;
                }
                cur = next;
            },
            None => {
                self.heads.insert(hash, id);
            }
        }
        self.chain.push(ROOT);
        if !self.bitstate {
            self.arena.extend_from_slice(key);
            self.ends.push(self.arena.len());
        }
        self.nodes.push(node);
        Some(id)
    }

    /// Actions from the root to `id`.
    pub fn path(&self, mut id: u32) -> Vec<Action> {
        let mut out = Vec::new();
        while id != 0 {
            let n = self.nodes[id as usize];
            out.push(n.action);
            id = n.parent;
        }
        out.reverse();
        out
    }
}
