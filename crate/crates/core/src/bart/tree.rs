//! Binary regression trees stored in an arena with a free list.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        mu: f64,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= value` go left.
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Option<Node>>,
    parent: Vec<Option<usize>>,
    depth: Vec<usize>,
    #[serde(skip)]
    free: Vec<usize>,
}

pub const ROOT: usize = 0;

impl Default for DecisionTree {
    fn default() -> Self {
        Self::stump(0.0)
    }
}

impl DecisionTree {
    pub fn stump(mu: f64) -> Self {
        DecisionTree {
            nodes: vec![Some(Node::Leaf { mu })],
            parent: vec![None],
            depth: vec![0],
            free: Vec::new(),
        }
    }

    pub fn node(&self, id: usize) -> Node {
        self.nodes[id].expect("live node")
    }

    pub fn depth_of(&self, id: usize) -> usize {
        self.depth[id]
    }

    pub fn parent_of(&self, id: usize) -> Option<usize> {
        self.parent[id]
    }

    pub fn is_stump(&self) -> bool {
        matches!(self.node(ROOT), Node::Leaf { .. })
    }

    fn alloc(&mut self, node: Node, parent: usize) -> usize {
        let depth = self.depth[parent] + 1;
        if let Some(id) = self.free.pop() {
            self.nodes[id] = Some(node);
            self.parent[id] = Some(parent);
            self.depth[id] = depth;
            id
        } else {
            self.nodes.push(Some(node));
            self.parent.push(Some(parent));
            self.depth.push(depth);
            self.nodes.len() - 1
        }
    }

    fn live(&self) -> impl Iterator<Item = (usize, Node)> + '_ {
        self.nodes.iter().enumerate().filter_map(|(i, n)| n.map(|n| (i, n)))
    }

    pub fn leaves(&self) -> Vec<usize> {
        self.live()
            .filter(|(_, n)| matches!(n, Node::Leaf { .. }))
            .map(|(i, _)| i)
            .collect()
    }

    /// Internal nodes whose two children are both leaves.
    pub fn nog_nodes(&self) -> Vec<usize> {
        self.live()
            .filter(|(_, n)| match n {
                Node::Split { left, right, .. } => self.is_leaf(*left) && self.is_leaf(*right),
                Node::Leaf { .. } => false,
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        matches!(self.node(id), Node::Leaf { .. })
    }

    /// Turns leaf `id` into a split with two fresh leaves; returns the children.
    pub fn grow(&mut self, id: usize, feature: usize, value: f64) -> (usize, usize) {
        debug_assert!(self.is_leaf(id));
        let left = self.alloc(Node::Leaf { mu: 0.0 }, id);
        let right = self.alloc(Node::Leaf { mu: 0.0 }, id);
        self.nodes[id] = Some(Node::Split {
            feature,
            value,
            left,
            right,
        });
        (left, right)
    }

    /// Collapses a nog node back into a leaf.
    pub fn prune(&mut self, id: usize) {
        if let Node::Split { left, right, .. } = self.node(id) {
            debug_assert!(self.is_leaf(left) && self.is_leaf(right));
            for c in [left, right] {
                self.nodes[c] = None;
                self.parent[c] = None;
                self.free.push(c);
            }
            self.nodes[id] = Some(Node::Leaf { mu: 0.0 });
        }
    }

    pub fn set_rule(&mut self, id: usize, feature: usize, value: f64) {
        if let Some(Node::Split {
            feature: f,
            value: v,
            ..
        }) = self.nodes[id].as_mut()
        {
            *f = feature;
            *v = value;
        }
    }

    pub fn set_mu(&mut self, id: usize, mu: f64) {
        if let Some(Node::Leaf { mu: m }) = self.nodes[id].as_mut() {
            *m = mu;
        }
    }

    /// Leaf reached by a row accessed through `x(feature)`.
    pub fn find_leaf(&self, x: impl Fn(usize) -> f64) -> usize {
        let mut id = ROOT;
        loop {
            match self.node(id) {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    value,
                    left,
                    right,
                } => id = if x(feature) <= value { left } else { right },
            }
        }
    }

    pub fn predict(&self, x: impl Fn(usize) -> f64) -> f64 {
        match self.node(self.find_leaf(x)) {
            Node::Leaf { mu } => mu,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Maximum leaf depth; a stump has depth 0.
    pub fn max_depth(&self) -> usize {
        self.leaves().iter().map(|&l| self.depth[l]).max().unwrap_or(0)
    }

    pub fn n_splits(&self) -> usize {
        self.live().filter(|(_, n)| matches!(n, Node::Split { .. })).count()
    }

    /// Adds this tree's split counts to `per_feature` and its parent-child
    /// split pairs to the symmetric `pairs` matrix (row-major, `p x p`).
    pub fn count_splits(&self, p: usize, per_feature: &mut [u32], pairs: &mut [u32]) {
        for (_, node) in self.live() {
            if let Node::Split {
                feature,
                left,
                right,
                ..
            } = node
            {
                per_feature[feature] += 1;
                for child in [left, right] {
                    if let Node::Split { feature: cf, .. } = self.node(child) {
                        pairs[feature * p + cf] += 1;
                        if cf != feature {
                            pairs[cf * p + feature] += 1;
                        }
                    }
                }
            }
        }
    }

    /// Copy without free slots, node ids renumbered in depth-first order.
    pub fn compacted(&self) -> DecisionTree {
        let mut out = DecisionTree {
            nodes: Vec::new(),
            parent: Vec::new(),
            depth: Vec::new(),
            free: Vec::new(),
        };
        fn visit(src: &DecisionTree, id: usize, parent: Option<usize>, out: &mut DecisionTree) -> usize {
            let new_id = out.nodes.len();
            out.nodes.push(None);
            out.parent.push(parent);
            out.depth.push(src.depth[id]);
            let node = match src.node(id) {
                leaf @ Node::Leaf { .. } => leaf,
                Node::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    let l = visit(src, left, Some(new_id), out);
                    let r = visit(src, right, Some(new_id), out);
                    Node::Split {
                        feature,
                        value,
                        left: l,
                        right: r,
                    }
                }
            };
            out.nodes[new_id] = Some(node);
            new_id
        }
        visit(self, ROOT, None, &mut out);
        out
    }
}
