//! Static 3-d tree over point positions.
//!
//! Built by median splits on an index permutation, so the tree is implicit:
//! node `[lo, hi)` has its split point at `(lo + hi) / 2`. Distances are
//! compared squared, with the same arithmetic a linear scan would use.

#[inline]
pub fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    /// Permutation of point indices laid out as the implicit tree.
    order: Vec<usize>,
    /// Split axis per node, keyed by the node's middle slot.
    axis: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[[f64; 3]]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axis = vec![0u8; points.len()];
        build(points, &mut order, &mut axis, 0);
        Self {
            points: points.to_vec(),
            order,
            axis,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Nearest point as `(index, squared distance)`. Ties go to the lower index.
    pub fn nearest(&self, q: &[f64; 3]) -> Option<(usize, f64)> {
        self.knn(q, 1, None).into_iter().next()
    }

    /// The `k` nearest points sorted by `(squared distance, index)`,
    /// optionally skipping one index (usually the query point itself).
    pub fn knn(&self, q: &[f64; 3], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.knn_rec(0, self.order.len(), q, k, exclude, &mut best);
        }
        best
    }

    fn knn_rec(
        &self,
        lo: usize,
        hi: usize,
        q: &[f64; 3],
        k: usize,
        exclude: Option<usize>,
        best: &mut Vec<(usize, f64)>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        if Some(idx) != exclude {
            let d = dist2(q, &self.points[idx]);
            let key = (d, idx);
            if best.len() < k || key < (best[k - 1].1, best[k - 1].0) {
                let pos = best.partition_point(|&(i, bd)| (bd, i) < key);
                best.insert(pos, (idx, d));
                best.truncate(k);
            }
        }
        let ax = self.axis[mid] as usize;
        let diff = q[ax] - self.points[idx][ax];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_rec(near.0, near.1, q, k, exclude, best);
        if best.len() < k || diff * diff <= best[k - 1].1 {
            self.knn_rec(far.0, far.1, q, k, exclude, best);
        }
    }

    /// Indices with squared distance `<= radius²`, ascending.
    pub fn within_radius(&self, q: &[f64; 3], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.radius_rec(0, self.order.len(), q, radius * radius, &mut |i| out.push(i));
        out.sort_unstable();
        out
    }

    pub fn count_within(&self, q: &[f64; 3], radius: f64) -> usize {
        let mut n = 0;
        self.radius_rec(0, self.order.len(), q, radius * radius, &mut |_| n += 1);
        n
    }

    fn radius_rec(&self, lo: usize, hi: usize, q: &[f64; 3], r2: f64, visit: &mut impl FnMut(usize)) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let idx = self.order[mid];
        if dist2(q, &self.points[idx]) <= r2 {
            visit(idx);
        }
        let ax = self.axis[mid] as usize;
        let diff = q[ax] - self.points[idx][ax];
        if diff <= 0.0 || diff * diff <= r2 {
            self.radius_rec(lo, mid, q, r2, visit);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.radius_rec(mid + 1, hi, q, r2, visit);
        }
    }
}

fn build(points: &[[f64; 3]], order: &mut [usize], axis: &mut [u8], offset: usize) {
    if order.len() <= 1 {
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let ax = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][ax].total_cmp(&points[b][ax]).then(a.cmp(&b)));
    axis[offset + mid] = ax as u8;
    let (left, right) = order.split_at_mut(mid);
    build(points, left, axis, offset);
    build(points, &mut right[1..], axis, offset + mid + 1);
}
