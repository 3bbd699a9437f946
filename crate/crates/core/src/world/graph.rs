use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::{ObjectId, RelationKind, WorldState};
use crate::error::Result;

/// Object-centric scene graph: nodes are object ids in canonical order and
/// `neighbors[j][o]` lists the node indices `o'` with an edge `j(o, o')`.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneGraph {
    pub nodes: Vec<ObjectId>,
    pub neighbors: [Vec<Vec<usize>>; 4],
}

impl SceneGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &ObjectId) -> Option<usize> {
        self.nodes.binary_search(id).ok()
    }

    /// Neighbor ids of `id` under relation `kind`.
    pub fn neighbor_ids(&self, kind: RelationKind, id: &ObjectId) -> Vec<&ObjectId> {
        match self.index_of(id) {
            Some(i) => self.neighbors[kind.index()][i].iter().map(|&j| &self.nodes[j]).collect(),
            None => Vec::new(),
        }
    }

    pub fn edge_count(&self, kind: RelationKind) -> usize {
        self.neighbors[kind.index()].iter().map(Vec::len).sum()
    }
}

/// Builds the scene graph of a valid state. Node order is sorted by id, so the
/// graph is a pure function of the state's content.
pub fn build_scene_graph(state: &WorldState) -> Result<SceneGraph> {
    state.validate()?;
    let nodes = state.sorted_ids();
    let index: BTreeMap<&ObjectId, usize> = nodes.iter().enumerate().map(|(i, id)| (id, i)).collect();
    let n = nodes.len();
    let mut neighbors = [vec![Vec::new(); n], vec![Vec::new(); n], vec![Vec::new(); n], vec![Vec::new(); n]];
    // relations iterate in sorted order, so neighbor lists come out sorted
    for e in &state.relations {
        neighbors[e.kind.index()][index[&e.src]].push(index[&e.dst]);
    }
    Ok(SceneGraph { nodes, neighbors })
}
