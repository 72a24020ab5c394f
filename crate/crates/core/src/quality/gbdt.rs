use crate::vecmath::sigmoid;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GbdtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub min_leaf: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_trees: 50,
            learning_rate: 0.1,
            max_depth: 5,
            max_leaves: 10,
            min_leaf: 10,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("gbdt learning rate must be in (0, 1]");
        }
        if self.max_depth == 0 || self.max_leaves < 2 || self.min_leaf == 0 {
            return bad("gbdt needs max_depth ≥ 1, max_leaves ≥ 2, min_leaf ≥ 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf(f64),
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GbdtModel {
    /// Log-odds of the training base rate.
    pub base: f64,
    pub params: GbdtParams,
    pub trees: Vec<Tree>,
}

impl GbdtModel {
    pub fn logit(&self, x: &[f64]) -> f64 {
        self.base + self.trees.iter().map(|t| self.params.learning_rate * t.predict(x)).sum::<f64>()
    }
}

pub fn gbdt_predict(model: &GbdtModel, x: &[f64]) -> f64 {
    sigmoid(model.logit(x))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Best variance-reduction split of `rows` on residuals `r`, leaving at
/// least `min_leaf` rows per side. Thresholds sit halfway between adjacent
/// distinct values. Ties keep the lowest feature and the lowest threshold.
pub fn best_split(x: &[Vec<f64>], r: &[f64], rows: &[usize], min_leaf: usize) -> Option<SplitChoice> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = rows.iter().map(|&i| r[i]).sum();
    let parent = total * total / n as f64;
    let features = x.first().map_or(0, Vec::len);
    let mut best: Option<SplitChoice> = None;
    let mut order = rows.to_vec();
    for f in 0..features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left = 0.0;
        for k in 0..n - 1 {
            left += r[order[k]];
            let nl = k + 1;
            if nl < min_leaf || n - nl < min_leaf || x[order[k]][f] == x[order[k + 1]][f] {
                continue;
            }
            let right = total - left;
            let gain = left * left / nl as f64 + right * right / (n - nl) as f64 - parent;
            if best.is_none_or(|b| gain > b.gain) {
                let (lo, hi) = (x[order[k]][f], x[order[k + 1]][f]);
                best = Some(SplitChoice {
                    feature: f,
                    threshold: lo + (hi - lo) / 2.0,
                    gain,
                });
            }
        }
    }
    best.filter(|b| b.gain > 1e-12)
}

struct OpenLeaf {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
    split: Option<SplitChoice>,
}

fn newton_value(rows: &[usize], r: &[f64], h: &[f64]) -> f64 {
    let g: f64 = rows.iter().map(|&i| r[i]).sum();
    let hs: f64 = rows.iter().map(|&i| h[i]).sum();
    g / (hs + 1e-6)
}

fn grow_tree(x: &[Vec<f64>], r: &[f64], h: &[f64], params: &GbdtParams) -> Tree {
    let all: Vec<usize> = (0..x.len()).collect();
    let mut nodes = vec![Node::Leaf(newton_value(&all, r, h))];
    let split = best_split(x, r, &all, params.min_leaf);
    let mut open = vec![OpenLeaf {
        node: 0,
        rows: all,
        depth: 0,
        split,
    }];
    let mut leaves = 1;
    while leaves < params.max_leaves {
        // Best-first: expand the open leaf with the largest gain.
        let pick = open
            .iter()
            .enumerate()
            .filter(|(_, l)| l.depth < params.max_depth && l.split.is_some())
            .max_by(|(ia, a), (ib, b)| {
                a.split.unwrap().gain.total_cmp(&b.split.unwrap().gain).then(ib.cmp(ia))
            })
            .map(|(i, _)| i);
        let Some(pick) = pick else { break };
        let leaf = open.swap_remove(pick);
        let s = leaf.split.unwrap();
        let (lrows, rrows): (Vec<usize>, Vec<usize>) = leaf.rows.iter().partition(|&&i| x[i][s.feature] <= s.threshold);
        let (li, ri) = (nodes.len(), nodes.len() + 1);
        nodes.push(Node::Leaf(newton_value(&lrows, r, h)));
        nodes.push(Node::Leaf(newton_value(&rrows, r, h)));
        nodes[leaf.node] = Node::Split {
            feature: s.feature,
            threshold: s.threshold,
            left: li,
            right: ri,
        };
        for (node, rows) in [(li, lrows), (ri, rrows)] {
            let split = best_split(x, r, &rows, params.min_leaf);
            open.push(OpenLeaf {
                node,
                rows,
                depth: leaf.depth + 1,
                split,
            });
        }
        open.sort_by_key(|l| l.node);
        leaves += 1;
    }
    Tree { nodes }
}

/// Boosted regression trees on logistic loss.
pub fn gbdt_train(x: &[Vec<f64>], y: &[bool], params: &GbdtParams) -> Result<GbdtModel> {
    params.validate()?;
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::Degenerate("gbdt training data has a single class".into()));
    }
    let width = x[0].len();
    if x.iter().any(|row| row.len() != width || row.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument("gbdt rows must be finite and equally wide".into()));
    }
    let rate = positives as f64 / y.len() as f64;
    let mut model = GbdtModel {
        base: (rate / (1.0 - rate)).ln(),
        params: *params,
        trees: Vec::with_capacity(params.n_trees),
    };
    let mut logits = vec![model.base; x.len()];
    for _ in 0..params.n_trees {
        let p: Vec<f64> = logits.iter().map(|&f| sigmoid(f)).collect();
        let r: Vec<f64> = p.iter().zip(y).map(|(p, &t)| f64::from(u8::from(t)) - p).collect();
        let h: Vec<f64> = p.iter().map(|p| p * (1.0 - p)).collect();
        let tree = grow_tree(x, &r, &h, params);
        for (f, row) in logits.iter_mut().zip(x) {
            *f += params.learning_rate * tree.predict(row);
        }
        model.trees.push(tree);
    }
    Ok(model)
}
