use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::world::{build_scene_graph, Action, AttributeVocabulary, Goal, InteractionType, ObjectId, WorldState};

/// Pose (4) plus size (3).
pub const METRIC_WIDTH: usize = 7;

/// Network inputs for one world state. Rows follow `ids`, which is sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneFeatures {
    pub ids: Vec<ObjectId>,
    pub classes: Vec<String>,
    /// N×29 attribute flags.
    pub attributes: Tensor,
    /// N×q class embeddings.
    pub embeddings: Tensor,
    /// N×7 normalized pose and size.
    pub metric: Tensor,
    /// `neighbors[j][o]`: rows linked from `o` by relation `j`.
    pub neighbors: [Vec<Vec<usize>>; 4],
}

impl SceneFeatures {
    pub fn from_state(state: &WorldState, table: &EmbeddingTable) -> Result<Self> {
        let graph = build_scene_graph(state)?;
        if graph.is_empty() {
            return Err(Error::EmptyScene);
        }
        let vocab = AttributeVocabulary::default();
        let n = graph.len();
        let mut attributes = Vec::with_capacity(n);
        let mut embeddings = Vec::with_capacity(n);
        let mut metric = Vec::with_capacity(n);
        let mut classes = Vec::with_capacity(n);
        for id in &graph.nodes {
            let obj = state.require(id)?;
            attributes.push(vocab.attribute_vector(obj));
            embeddings.push(table.embed(&obj.class));
            let mut m = state.normalized_pose(obj).to_vec();
            m.extend_from_slice(&state.normalized_size(obj));
            metric.push(m);
            classes.push(obj.class.clone());
        }
        Ok(Self {
            ids: graph.nodes,
            classes,
            attributes: Tensor::from_rows(&attributes)?,
            embeddings: Tensor::from_rows(&embeddings)?,
            metric: Tensor::from_rows(&metric)?,
            neighbors: graph.neighbors,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &ObjectId) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Reorders rows so that new row `i` is old row `perm[i]`. Ids travel
    /// with their rows.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || core::mem::replace(&mut seen[p], true)) {
            return Err(Error::Config("not a permutation".into()));
        }
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let rows = |t: &Tensor| Tensor::from_rows(&perm.iter().map(|&p| t.row(p).to_vec()).collect::<Vec<_>>());
        let nb = |part: &Vec<Vec<usize>>| -> Vec<Vec<usize>> {
            perm.iter().map(|&p| part[p].iter().map(|&o| inverse[o]).collect()).collect()
        };
        Ok(Self {
            ids: perm.iter().map(|&p| self.ids[p].clone()).collect(),
            classes: perm.iter().map(|&p| self.classes[p].clone()).collect(),
            attributes: rows(&self.attributes)?,
            embeddings: rows(&self.embeddings)?,
            metric: rows(&self.metric)?,
            neighbors: [nb(&self.neighbors[0]), nb(&self.neighbors[1]), nb(&self.neighbors[2]), nb(&self.neighbors[3])],
        })
    }
}

/// Goal encodings: mean embedding of the relation tokens and of the goal
/// objects' class tokens. An empty partition gives zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalFeatures {
    pub relations: Vec<f64>,
    pub objects: Vec<f64>,
}

impl GoalFeatures {
    pub fn from_goal(goal: &Goal, table: &EmbeddingTable) -> Self {
        let rel = goal.relation_tokens();
        let objs = goal.objects();
        let classes: Vec<&str> = objs.iter().map(ObjectId::class_token).collect();
        Self { relations: table.mean(&rel), objects: table.mean(&classes) }
    }
}

/// `[one-hot interaction; C(o1); C(o2) or zeros]`.
pub fn encode_action(action: &Action, table: &EmbeddingTable) -> Vec<f64> {
    let q = table.dim;
    let mut out = vec![0.0; InteractionType::COUNT + 2 * q];
    out[action.interaction().index()] = 1.0;
    out[InteractionType::COUNT..InteractionType::COUNT + q].copy_from_slice(&table.embed(action.o1().class_token()));
    if let Some(o2) = action.o2() {
        out[InteractionType::COUNT + q..].copy_from_slice(&table.embed(o2.class_token()));
    }
    out
}

/// Width of [`encode_action`] for embedding size `q`.
pub fn action_width(q: usize) -> usize {
    InteractionType::COUNT + 2 * q
}

/// Demonstrated action resolved to row indices of a scene.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionTarget {
    pub interaction: usize,
    pub o1: usize,
    pub o2: Option<usize>,
}

impl ActionTarget {
    pub fn resolve(action: &Action, scene: &SceneFeatures) -> Result<Self> {
        let find = |id: &ObjectId| scene.index_of(id).ok_or_else(|| Error::DemoObjectMissing(id.to_string()));
        Ok(Self {
            interaction: action.interaction().index(),
            o1: find(action.o1())?,
            o2: action.o2().map(find).transpose()?,
        })
    }
}
