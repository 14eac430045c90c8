//! Envelope (skyline) Cholesky factorisation for the nodal Schur complement.
//!
//! The matrix `A12ᵀ G⁻¹ A12` has the sparsity of the junction adjacency
//! graph. A reverse Cuthill-McKee ordering keeps its profile narrow, and the
//! profile never changes between Newton iterations, so the structure is
//! computed once per network.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub(crate) struct Skyline {
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// `inv[old] = new`.
    inv: Vec<usize>,
    /// First stored column of each (permuted) row.
    first: Vec<usize>,
    /// Offset of row `i` in the value array; entry `(i, j)` lives at `start[i] + j - first[i]`.
    start: Vec<usize>,
    len: usize,
}

impl Skyline {
    /// Build the profile for a symmetric pattern given as undirected edges.
    pub(crate) fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (old, list) in adj.iter().enumerate() {
            let i = inv[old];
            for &nb in list {
                let j = inv[nb];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut start = Vec::with_capacity(n);
        let mut len = 0;
        for i in 0..n {
            start.push(len);
            len += i - first[i] + 1;
        }
        Skyline {
            perm,
            inv,
            first,
            start,
            len,
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.perm.len()
    }

    pub(crate) fn zeroed(&self) -> Vec<f64> {
        vec![0.0; self.len]
    }

    /// Add `v` to entry `(a, b)` (original indices) of the lower triangle.
    pub(crate) fn add(&self, values: &mut [f64], a: usize, b: usize, v: f64) {
        let (i, j) = {
            let (x, y) = (self.inv[a], self.inv[b]);
            if x >= y {
                (x, y)
            } else {
                (y, x)
            }
        };
        debug_assert!(j >= self.first[i]);
        values[self.start[i] + j - self.first[i]] += v;
    }

    /// In-place Cholesky `L Lᵀ`. Returns the permuted index of the first
    /// non-positive pivot on failure.
    pub(crate) fn factor(&self, values: &mut [f64]) -> Result<(), usize> {
        let n = self.dim();
        let mut max_diag: f64 = 0.0;
        for i in 0..n {
            max_diag = max_diag.max(values[self.start[i] + i - self.first[i]].abs());
        }
        let floor = max_diag * 1e-13;
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let sj = self.start[j];
                let k0 = fi.max(fj);
                let mut sum = values[si + j - fi];
                for k in k0..j {
                    sum -= values[si + k - fi] * values[sj + k - fj];
                }
                values[si + j - fi] = sum / values[sj + j - fj];
            }
            let mut d = values[si + i - fi];
            for k in fi..i {
                let l = values[si + k - fi];
                d -= l * l;
            }
            if !(d > floor) {
                return Err(i);
            }
            values[si + i - fi] = d.sqrt();
        }
        Ok(())
    }

    /// Solve with a factor produced by [`Skyline::factor`]; `rhs` uses original indices.
    pub(crate) fn solve(&self, values: &[f64], rhs: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            let mut s = y[i];
            for k in fi..i {
                s -= values[si + k - fi] * y[k];
            }
            y[i] = s / values[si + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            y[i] /= values[si + i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= values[si + k - fi] * yi;
            }
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = y[new];
        }
        out
    }

    pub(crate) fn original_index(&self, permuted: usize) -> usize {
        self.perm[permuted]
    }
}

fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (adj[v].len(), v));
    for &root in &by_degree {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_path_laplacian_plus_identity() {
        // Tridiagonal (−1, 3, −1) on a path of 6 nodes, labelled out of order.
        let labels = [3, 0, 5, 1, 4, 2];
        let edges: Vec<(usize, usize)> = labels.windows(2).map(|w| (w[0], w[1])).collect();
        let sky = Skyline::new(6, &edges);
        let mut vals = sky.zeroed();
        for v in 0..6 {
            sky.add(&mut vals, v, v, 3.0);
        }
        for &(a, b) in &edges {
            sky.add(&mut vals, a, b, -1.0);
        }
        let x_true = [1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let mut rhs = vec![0.0; 6];
        for v in 0..6 {
            rhs[v] += 3.0 * x_true[v];
        }
        for &(a, b) in &edges {
            rhs[a] -= x_true[b];
            rhs[b] -= x_true[a];
        }
        sky.factor(&mut vals).unwrap();
        let x = sky.solve(&vals, &rhs);
        for v in 0..6 {
            assert!((x[v] - x_true[v]).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_singular_matrix() {
        let sky = Skyline::new(2, &[(0, 1)]);
        let mut vals = sky.zeroed();
        for (a, b, v) in [(0, 0, 1.0), (1, 1, 1.0), (0, 1, -1.0)] {
            sky.add(&mut vals, a, b, v);
        }
        assert!(sky.factor(&mut vals).is_err());
    }
}
