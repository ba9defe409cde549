//! Static 2D kd-tree for k-nearest-neighbor queries over edge pixels.
//!
//! Built once over the full point set (median splits, alternating axes),
//! immutable afterwards. Equidistant candidates rank by insertion order,
//! which keeps query results deterministic regardless of tree layout.

#[derive(Debug, Clone, Copy)]
struct Node {
    p: [f64; 2],
    /// Position in the original input slice.
    idx: u32,
    left: i32,
    right: i32,
    axis: u8,
}

#[derive(Debug, Clone, Default)]
pub struct KdTree2 {
    nodes: Vec<Node>,
    root: i32,
}

/// Query result: squared distance plus the point's insertion index and
/// coordinates, ordered nearest-first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub dist_sq: f64,
    pub index: usize,
    pub point: [f64; 2],
}

fn dist_sq(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

impl KdTree2 {
    pub fn build(points: &[[f64; 2]]) -> KdTree2 {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut tree = KdTree2 {
            nodes: Vec::with_capacity(points.len()),
            root: -1,
        };
        tree.root = tree.build_rec(points, &mut order, 0);
        tree
    }

    fn build_rec(&mut self, points: &[[f64; 2]], order: &mut [u32], depth: u8) -> i32 {
        if order.is_empty() {
            return -1;
        }
        let axis = depth % 2;
        let mid = order.len() / 2;
        // Ties on the split coordinate settle by insertion index so the
        // tree shape is input-order deterministic.
        order.select_nth_unstable_by(mid, |&a, &b| {
            let ka = (points[a as usize][axis as usize], a);
            let kb = (points[b as usize][axis as usize], b);
            ka.partial_cmp(&kb).expect("finite coordinates")
        });
        let pivot = order[mid];
        let node_id = self.nodes.len() as i32;
        self.nodes.push(Node {
            p: points[pivot as usize],
            idx: pivot,
            left: -1,
            right: -1,
            axis,
        });
        let (lo, hi) = order.split_at_mut(mid);
        let left = self.build_rec(points, lo, depth + 1);
        let right = self.build_rec(points, &mut hi[1..], depth + 1);
        self.nodes[node_id as usize].left = left;
        self.nodes[node_id as usize].right = right;
        node_id
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// The `k` nearest points to `query`, nearest first. Returns fewer
    /// only when the tree holds fewer than `k` points.
    pub fn knn(&self, query: [f64; 2], k: usize) -> Vec<Neighbor> {
        let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.search(self.root, query, k, &mut best);
        }
        best
    }

    fn search(&self, node_id: i32, query: [f64; 2], k: usize, best: &mut Vec<Neighbor>) {
        if node_id < 0 {
            return;
        }
        let node = &self.nodes[node_id as usize];
        let cand = Neighbor {
            dist_sq: dist_sq(node.p, query),
            index: node.idx as usize,
            point: node.p,
        };
        let key = |n: &Neighbor| (n.dist_sq, n.index);
        let pos = best.partition_point(|n| key(n) < key(&cand));
        if pos < k {
            best.insert(pos, cand);
            best.truncate(k);
        }
        let diff = query[node.axis as usize] - node.p[node.axis as usize];
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.search(near, query, k, best);
        // Descend the far side on exact plane-distance ties too: an
        // equidistant point with a lower insertion index may live there.
        if best.len() < k || diff * diff <= best[best.len() - 1].dist_sq {
            self.search(far, query, k, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn brute_force(points: &[[f64; 2]], query: [f64; 2], k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = points
            .iter()
            .enumerate()
            .map(|(i, &p)| Neighbor {
                dist_sq: dist_sq(p, query),
                index: i,
                point: p,
            })
            .collect();
        all.sort_by(|a, b| {
            (a.dist_sq, a.index)
                .partial_cmp(&(b.dist_sq, b.index))
                .unwrap()
        });
        all.truncate(k);
        all
    }

    #[test]
    fn member_query_returns_itself() {
        let points = [[3.0, 4.0], [10.0, 2.0], [-1.0, 0.5]];
        let tree = KdTree2::build(&points);
        for (i, p) in points.iter().enumerate() {
            let res = tree.knn(*p, 1);
            assert_eq!(res.len(), 1);
            assert_eq!(res[0].index, i);
            assert_eq!(res[0].dist_sq, 0.0);
        }
    }

    #[test]
    fn matches_brute_force_on_random_points() {
        let mut rng = StdRng::seed_from_u64(101);
        let points: Vec<[f64; 2]> = (0..100)
            .map(|_| [rng.random_range(0.0..64.0), rng.random_range(0.0..64.0)])
            .collect();
        let tree = KdTree2::build(&points);
        for _ in 0..200 {
            let q = [rng.random_range(-5.0..70.0), rng.random_range(-5.0..70.0)];
            assert_eq!(tree.knn(q, 5), brute_force(&points, q, 5));
        }
    }

    #[test]
    fn duplicate_points_rank_by_insertion_order() {
        // Grid coordinates collide constantly; ties must be stable.
        let points = [[2.0, 2.0], [5.0, 5.0], [2.0, 2.0], [3.0, 3.0], [2.0, 2.0]];
        let tree = KdTree2::build(&points);
        let res = tree.knn([2.0, 2.0], 4);
        let idx: Vec<usize> = res.iter().map(|n| n.index).collect();
        assert_eq!(idx, vec![0, 2, 4, 3]);
        assert_eq!(res, brute_force(&points, [2.0, 2.0], 4));
    }

    #[test]
    fn equidistant_ring_matches_oracle() {
        // Four points at exactly distance 1 from the query.
        let points = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        let tree = KdTree2::build(&points);
        let res = tree.knn([0.0, 0.0], 2);
        assert_eq!(res, brute_force(&points, [0.0, 0.0], 2));
        assert_eq!(res[0].index, 0);
        assert_eq!(res[1].index, 1);
    }

    #[test]
    fn oversized_k_saturates_sorted() {
        let points = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        let tree = KdTree2::build(&points);
        let res = tree.knn([0.9, 0.0], 10);
        assert_eq!(res.len(), 3);
        assert_eq!(res, brute_force(&points, [0.9, 0.0], 10));
    }

    #[test]
    fn empty_tree_returns_nothing() {
        let tree = KdTree2::build(&[]);
        assert!(tree.is_empty());
        assert!(tree.knn([0.0, 0.0], 3).is_empty());
    }
}
