use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub enum Split {
    /// `x <= threshold` goes left.
    Numeric { feature: usize, threshold: f64 },
    /// Categories in `left` (sorted ascending) go left; everything else,
    /// including categories never seen in training, goes right.
    Categorical { feature: usize, left: Vec<u32> },
}

impl Split {
    pub fn feature(&self) -> usize {
        match self {
            Split::Numeric { feature, .. } | Split::Categorical { feature, .. } => *feature,
        }
    }

    #[inline]
    pub fn goes_left(&self, row: &[f64]) -> bool {
        match self {
            Split::Numeric { feature, threshold } => row[*feature] <= *threshold,
            Split::Categorical { feature, left } => {
                let v = row[*feature];
                v >= 0.0 && left.binary_search(&(v as u32)).is_ok()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf { value: f64 },
    Internal { split: Split, left: u32, right: u32 },
}

/// Binary tree stored as a flat node list with the root at index 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        debug_assert!(!nodes.is_empty());
        Self { nodes }
    }

    pub fn single_leaf(value: f64) -> Self {
        Self { nodes: alloc::vec![Node::Leaf { value }] }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Index of the leaf node `row` is routed to.
    pub fn leaf_for(&self, row: &[f64]) -> usize {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { .. } => return idx,
                Node::Internal { split, left, right } => {
                    idx = if split.goes_left(row) { *left as usize } else { *right as usize };
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match &self.nodes[self.leaf_for(row)] {
            Node::Leaf { value } => *value,
            Node::Internal { .. } => unreachable!("leaf_for returns a leaf"),
        }
    }

    /// Checks child indices point forward and every node is reachable once.
    pub fn is_well_formed(&self) -> bool {
        let mut parents = alloc::vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            if let Node::Internal { left, right, .. } = n {
                for c in [*left as usize, *right as usize] {
                    if c <= i || c >= self.nodes.len() {
                        return false;
                    }
                    parents[c] += 1;
                }
            }
        }
        parents[0] == 0 && parents[1..].iter().all(|&p| p == 1)
    }
}
