//! Fixed-radius neighbor search on a hashed uniform cell grid.

/// Particles bucketed by integer cell coordinates of side `cell`.
///
/// Cells are hashed into a power-of-two table; bucket collisions are filtered
/// by comparing stored cell coordinates, so every neighbor is visited once.
pub struct CellList {
    dim: usize,
    cell: f64,
    coords: Vec<[i64; 3]>,
    starts: Vec<u32>,
    entries: Vec<u32>,
    mask: usize,
}

fn hash_cell(c: &[i64; 3]) -> u64 {
    (c[0].wrapping_mul(73_856_093) ^ c[1].wrapping_mul(19_349_663) ^ c[2].wrapping_mul(83_492_791)) as u64
}

impl CellList {
    pub fn new(positions: &[f64], dim: usize, cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive");
        assert!((1..=3).contains(&dim));
        let n = positions.len() / dim;
        let table = (2 * n).next_power_of_two().max(16);
        let mask = table - 1;
        let coords: Vec<[i64; 3]> = positions
            .chunks_exact(dim)
            .map(|p| {
                let mut c = [0i64; 3];
                for (a, &x) in p.iter().enumerate() {
                    c[a] = (x / cell).floor() as i64;
                }
                c
            })
            .collect();
        // counting sort keeps particle order inside each bucket
        let mut counts = vec![0u32; table + 1];
        let keys: Vec<usize> = coords.iter().map(|c| hash_cell(c) as usize & mask).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for k in 0..table {
            counts[k + 1] += counts[k];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut entries = vec![0u32; n];
        for (i, &k) in keys.iter().enumerate() {
            entries[fill[k] as usize] = i as u32;
            fill[k] += 1;
        }
        CellList {
            dim,
            cell,
            coords,
            starts,
            entries,
            mask,
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Calls `f(j, d²)` for every `j != i` with `‖p_i − p_j‖ < radius`.
    ///
    /// `radius` must not exceed the cell size. Visit order is deterministic:
    /// neighbor cells in lexicographic offset order, ascending index inside a
    /// cell.
    pub fn for_each_neighbor(&self, positions: &[f64], i: usize, radius: f64, mut f: impl FnMut(usize, f64)) {
        debug_assert!(radius <= self.cell * (1.0 + 1e-12));
        let d = self.dim;
        let r2 = radius * radius;
        let pi = &positions[i * d..(i + 1) * d];
        let ci = self.coords[i];
        let span = |a: usize| if a < d { -1..=1 } else { 0..=0 };
        for dx in span(0) {
            for dy in span(1) {
                for dz in span(2) {
                    let c = [ci[0] + dx, ci[1] + dy, ci[2] + dz];
                    let k = hash_cell(&c) as usize & self.mask;
                    let (s, e) = (self.starts[k] as usize, self.starts[k + 1] as usize);
                    for &j in &self.entries[s..e] {
                        let j = j as usize;
                        if j == i || self.coords[j] != c {
                            continue;
                        }
                        let pj = &positions[j * d..(j + 1) * d];
                        let d2: f64 = pi.iter().zip(pj).map(|(a, b)| (a - b) * (a - b)).sum();
                        if d2 < r2 {
                            f(j, d2);
                        }
                    }
                }
            }
        }
    }
}

/// Directed edges `(sender, receiver)` for every ordered pair closer than
/// `radius` (strict), sorted by `(receiver, sender)`.
pub fn find_neighbors(positions: &[f64], dim: usize, radius: f64) -> Vec<(usize, usize)> {
    assert!(radius > 0.0, "connectivity radius must be positive");
    let n = positions.len() / dim;
    let grid = CellList::new(positions, dim, radius);
    let mut edges = Vec::new();
    for recv in 0..n {
        let start = edges.len();
        grid.for_each_neighbor(positions, recv, radius, |send, _| edges.push((send, recv)));
        edges[start..].sort_unstable();
    }
    edges
}

/// O(N²) reference used by tests and tiny inputs.
pub fn find_neighbors_brute(positions: &[f64], dim: usize, radius: f64) -> Vec<(usize, usize)> {
    let n = positions.len() / dim;
    let mut edges = Vec::new();
    for recv in 0..n {
        for send in 0..n {
            if send == recv {
                continue;
            }
            let d2: f64 = (0..dim)
                .map(|a| positions[send * dim + a] - positions[recv * dim + a])
                .map(|x| x * x)
                .sum();
            if d2 < radius * radius {
                edges.push((send, recv));
            }
        }
    }
    edges
}
