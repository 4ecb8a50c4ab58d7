//! Agglomerative clustering on the correlation metric `d = sqrt(2(1 - rho))`.
//!
//! Node ids follow the usual convention: leaves are `0..n`, the cluster made
//! by merge `i` is `n + i`. Ties in the merge distance go to the pair whose
//! smallest leaf indices are lexicographically first, which makes the output
//! a pure function of the distance matrix.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ingest::SampleKey;
use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    /// Cluster distance is the largest member distance.
    #[default]
    Complete,
    /// Cluster distance is the smallest member distance.
    Single,
}

/// `d_ij = sqrt(2 (1 - rho_ij))`, with an exact zero diagonal.
pub fn distance_matrix(rho: &Matrix) -> Matrix {
    let n = rho.n();
    Matrix::from_fn(n, |i, j| {
        if i == j {
            0.0
        } else {
            (2.0 * (1.0 - rho.get(i, j))).max(0.0).sqrt()
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Merge {
    /// Node containing the smaller leaf index.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Leaves under the new node.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram {
    pub leaves: Vec<String>,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
    /// In-order leaf sequence for display.
    pub leaf_order: Vec<usize>,
}

fn check_distances(d: &Matrix) -> Result<()> {
    let n = d.n();
    if d.max_asymmetry() > 1e-12 {
        return Err(Error::NotSymmetric(d.max_asymmetry()));
    }
    for i in 0..n {
        if d.get(i, i) != 0.0 {
            return Err(Error::Invariant(format!("nonzero self distance at {i}")));
        }
        for j in 0..n {
            let v = d.get(i, j);
            if !(v >= 0.0) {
                return Err(Error::Invariant(format!("distance {v} at ({i},{j})")));
            }
        }
    }
    Ok(())
}

pub fn complete_linkage(d: &Matrix, leaves: Vec<String>) -> Result<Dendrogram> {
    linkage(d, leaves, Linkage::Complete)
}

/// Agglomerative clustering by repeated merging of the closest pair.
pub fn linkage(d: &Matrix, leaves: Vec<String>, method: Linkage) -> Result<Dendrogram> {
    let n = d.n();
    if leaves.len() != n {
        return Err(Error::Invariant(format!("{} labels for {n} leaves", leaves.len())));
    }
    if n < 2 {
        return Err(Error::TrivialDendrogram(n));
    }
    check_distances(d)?;

    // Slot i holds the cluster whose smallest leaf is i.
    let mut dist = d.clone();
    let mut active = vec![true; n];
    let mut node = (0..n).collect::<Vec<_>>();
    let mut size = vec![1usize; n];
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(usize, usize, f64)> = None;
        for a in (0..n).filter(|&a| active[a]) {
            for b in (a + 1..n).filter(|&b| active[b]) {
                let v = dist.get(a, b);
                if best.is_none_or(|(_, _, h)| v < h) {
                    best = Some((a, b, v));
                }
            }
        }
        let (a, b, h) = best.expect("at least two active clusters");
        if let Some(prev) = merges.last().map(|m: &Merge| m.height) {
            if method == Linkage::Complete && h < prev {
                return Err(Error::Invariant(format!(
                    "merge height decreased from {prev} to {h}"
                )));
            }
        }
        merges.push(Merge {
            left: node[a],
            right: node[b],
            height: h,
            size: size[a] + size[b],
        });
        for x in (0..n).filter(|&x| active[x] && x != a && x != b) {
            let (da, db) = (dist.get(a, x), dist.get(b, x));
            let v = match method {
                Linkage::Complete => da.max(db),
                Linkage::Single => da.min(db),
            };
            dist.set(a, x, v);
            dist.set(x, a, v);
        }
        active[b] = false;
        node[a] = n + step;
        size[a] += size[b];
    }

    let mut dend = Dendrogram {
        leaves,
        linkage: method,
        merges,
        leaf_order: Vec::new(),
    };
    dend.leaf_order = dend.compute_leaf_order();
    Ok(dend)
}

/// A partition of the leaves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterCut {
    /// Merges strictly below this height are applied.
    pub height: f64,
    /// Cluster id per leaf; ids are ordered by smallest member.
    pub labels: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
    /// Set only when the cut has exactly two clusters.
    pub majority: Option<usize>,
    pub minority: Option<usize>,
}

impl ClusterCut {
    pub fn minority_members(&self) -> Option<&[usize]> {
        self.minority.map(|c| self.clusters[c].as_slice())
    }
}

/// A cut together with the sample and codes it was computed for.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledCut {
    pub key: SampleKey,
    pub codes: Vec<String>,
    pub cut: ClusterCut,
}

impl LabeledCut {
    pub fn minority_codes(&self) -> Vec<&str> {
        self.cut
            .minority_members()
            .unwrap_or_default()
            .iter()
            .map(|&i| self.codes[i].as_str())
            .collect()
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl Dendrogram {
    pub fn n(&self) -> usize {
        self.leaves.len()
    }

    /// Children of every internal node, indexed by `node - n`.
    fn children(&self) -> Vec<(usize, usize)> {
        self.merges.iter().map(|m| (m.left, m.right)).collect()
    }

    /// Leaf sets of the first `applied` merges, as a cut.
    fn partition(&self, applied: usize, height: f64, codes: &[String]) -> ClusterCut {
        let n = self.n();
        let mut parent: Vec<usize> = (0..2 * n).collect();
        for (i, m) in self.merges.iter().take(applied).enumerate() {
            let id = n + i;
            let l = find(&mut parent, m.left);
            let r = find(&mut parent, m.right);
            parent[l] = id;
            parent[r] = id;
        }
        let mut root_to_cluster = std::collections::HashMap::new();
        let mut labels = vec![0; n];
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for (leaf, label) in labels.iter_mut().enumerate() {
            let root = find(&mut parent, leaf);
            let c = *root_to_cluster.entry(root).or_insert_with(|| {
                clusters.push(Vec::new());
                clusters.len() - 1
            });
            clusters[c].push(leaf);
            *label = c;
        }
        let (majority, minority) = if clusters.len() == 2 {
            let (s0, s1) = (clusters[0].len(), clusters[1].len());
            if s0 != s1 {
                if s0 > s1 {
                    (Some(0), Some(1))
                } else {
                    (Some(1), Some(0))
                }
            } else {
                let smallest = |c: &Vec<usize>| c.iter().map(|&i| &codes[i]).min().cloned();
                if smallest(&clusters[0]) <= smallest(&clusters[1]) {
                    (Some(0), Some(1))
                } else {
                    (Some(1), Some(0))
                }
            }
        } else {
            (None, None)
        };
        ClusterCut {
            height,
            labels,
            clusters,
            majority,
            minority,
        }
    }

    /// Connected components of the merges strictly below `height`.
    pub fn cut(&self, height: f64) -> ClusterCut {
        let applied = self.merges.iter().take_while(|m| m.height < height).count();
        self.partition(applied, height, &self.leaves)
    }

    /// Exactly `k` clusters: the last `k - 1` merges are undone. For `k = 2`
    /// the smaller cluster is the minority; equal sizes make the cluster
    /// holding the lexicographically smallest code the majority.
    pub fn cut_k(&self, k: usize) -> Result<ClusterCut> {
        let n = self.n();
        if k == 0 || k > n {
            return Err(Error::Config(format!("cluster count {k} outside 1..={n}")));
        }
        let applied = n - k;
        let height = self
            .merges
            .get(applied)
            .map_or(f64::INFINITY, |m| m.height);
        Ok(self.partition(applied, height, &self.leaves))
    }

    fn compute_leaf_order(&self) -> Vec<usize> {
        let n = self.n();
        let children = self.children();
        let mut out = Vec::with_capacity(n);
        let mut stack = vec![n + self.merges.len() - 1];
        while let Some(node) = stack.pop() {
            if node < n {
                out.push(node);
            } else {
                let (l, r) = children[node - n];
                stack.push(r);
                stack.push(l);
            }
        }
        out
    }

    /// Merge list: one row per merge with node ids and readable labels.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let n = self.n();
        let label = |id: usize| {
            if id < n {
                self.leaves[id].clone()
            } else {
                format!("node{id}")
            }
        };
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "step",
            "left",
            "right",
            "height",
            "size",
            "left_label",
            "right_label",
        ])?;
        for (i, m) in self.merges.iter().enumerate() {
            wtr.write_record([
                i.to_string(),
                m.left.to_string(),
                m.right.to_string(),
                format!("{:.12}", m.height),
                m.size.to_string(),
                label(m.left),
                label(m.right),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Fraction of leaf pairs on which two partitions agree.
pub fn rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 1.0;
    }
    let mut agree = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[i] == a[j]) == (b[i] == b[j]) {
                agree += 1;
            }
        }
    }
    agree as f64 / (n * (n - 1) / 2) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("L{i}")).collect()
    }

    fn three_leaf() -> Dendrogram {
        let d = Matrix::from_rows(&[
            vec![0.0, 0.2, 1.0],
            vec![0.2, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ]);
        complete_linkage(&d, vec!["a".into(), "b".into(), "c".into()]).unwrap()
    }

    #[test]
    fn metric_transform() {
        let rho = Matrix::from_rows(&[
            vec![1.0, -1.0, 0.0],
            vec![-1.0, 1.0, 0.5],
            vec![0.0, 0.5, 1.0],
        ]);
        let d = distance_matrix(&rho);
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.get(0, 1), 2.0);
        assert!((d.get(0, 2) - 2f64.sqrt()).abs() < 1e-15);
        assert!((d.get(1, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_leaves() {
        let d = Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]);
        let g = complete_linkage(&d, labels(2)).unwrap();
        assert_eq!(
            g.merges,
            vec![Merge {
                left: 0,
                right: 1,
                height: 0.5,
                size: 2
            }]
        );
        assert_eq!(g.leaf_order, vec![0, 1]);
    }

    #[test]
    fn three_leaves_by_hand() {
        let g = three_leaf();
        assert_eq!(g.merges.len(), 2);
        assert_eq!((g.merges[0].left, g.merges[0].right, g.merges[0].height), (0, 1, 0.2));
        assert_eq!((g.merges[1].left, g.merges[1].right, g.merges[1].height), (3, 2, 1.0));
        assert_eq!(g.leaf_order, vec![0, 1, 2]);
        let c = g.cut(0.5);
        assert_eq!(c.clusters, vec![vec![0, 1], vec![2]]);
        assert_eq!(c.minority_members(), Some(&[2][..]));
    }

    #[test]
    fn cuts_at_extremes() {
        let g = three_leaf();
        assert_eq!(g.cut(5.0).clusters.len(), 1);
        assert_eq!(g.cut(0.0).clusters.len(), 3);
        assert_eq!(g.cut_k(1).unwrap().clusters, vec![vec![0, 1, 2]]);
        assert_eq!(g.cut_k(3).unwrap().clusters.len(), 3);
        assert!(g.cut_k(0).is_err());
        assert!(g.cut_k(4).is_err());
    }

    #[test]
    fn zero_distances_merge_first() {
        let d = Matrix::from_rows(&[
            vec![0.0, 0.7, 0.0],
            vec![0.7, 0.0, 0.7],
            vec![0.0, 0.7, 0.0],
        ]);
        let g = complete_linkage(&d, labels(3)).unwrap();
        assert_eq!((g.merges[0].left, g.merges[0].right, g.merges[0].height), (0, 2, 0.0));
        assert_eq!(g.leaf_order, vec![0, 2, 1]);
    }

    #[test]
    fn equal_sized_halves_break_ties_by_code() {
        let d = Matrix::from_rows(&[
            vec![0.0, 1.9, 0.1, 1.9],
            vec![1.9, 0.0, 1.9, 0.1],
            vec![0.1, 1.9, 0.0, 1.9],
            vec![1.9, 0.1, 1.9, 0.0],
        ]);
        let codes = vec!["z".into(), "b".into(), "y".into(), "c".into()];
        let g = complete_linkage(&d, codes).unwrap();
        let c = g.cut_k(2).unwrap();
        assert_eq!(c.clusters, vec![vec![0, 2], vec![1, 3]]);
        // {b, c} holds the smallest code "b"
        assert_eq!(c.majority, Some(1));
        assert_eq!(c.minority, Some(0));
    }

    #[test]
    fn single_linkage_flag() {
        let d = Matrix::from_rows(&[
            vec![0.0, 1.0, 3.0],
            vec![1.0, 0.0, 1.5],
            vec![3.0, 1.5, 0.0],
        ]);
        let s = linkage(&d, labels(3), Linkage::Single).unwrap();
        assert_eq!(s.merges[1].height, 1.5);
        let c = complete_linkage(&d, labels(3)).unwrap();
        assert_eq!(c.merges[1].height, 3.0);
    }

    #[test]
    fn input_validation() {
        let d = Matrix::from_rows(&[vec![0.0]]);
        assert!(matches!(
            complete_linkage(&d, labels(1)),
            Err(Error::TrivialDendrogram(1))
        ));
        let bad = Matrix::from_rows(&[vec![0.0, -0.1], vec![-0.1, 0.0]]);
        assert!(complete_linkage(&bad, labels(2)).is_err());
        let asym = Matrix::from_rows(&[vec![0.0, 0.1], vec![0.2, 0.0]]);
        assert!(complete_linkage(&asym, labels(2)).is_err());
    }

    #[test]
    fn rand_index_cases() {
        assert_eq!(rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        assert_eq!(rand_index(&[0, 0, 0], &[0, 1, 2]), 0.0);
        assert!((rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) - 2.0 / 6.0).abs() < 1e-15);
    }
}
