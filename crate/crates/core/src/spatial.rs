//! Uniform-grid cell list over a box, used for exact fixed-radius searches.

use crate::window::Bounds;

#[derive(Debug, Clone)]
pub struct CellList {
    dim: usize,
    lower: Vec<f64>,
    cell_width: Vec<f64>,
    cells_per_axis: Vec<usize>,
    /// CSR layout: points of cell `c` are `entries[starts[c]..starts[c + 1]]`.
    starts: Vec<usize>,
    entries: Vec<usize>,
}

impl CellList {
    /// Cells have edge length at least `min_edge` along every axis, so a
    /// search of radius `<= min_edge` only needs the `3^n` surrounding cells.
    pub fn new(coords: &[f64], bounds: &Bounds, min_edge: f64) -> Self {
        let dim = bounds.dim();
        assert!(min_edge > 0.0, "cell edge must be positive");
        let cells_per_axis: Vec<usize> = (0..dim)
            .map(|k| ((bounds.side(k) / min_edge).floor() as usize).clamp(1, 1 << 20))
            .collect();
        let cell_width: Vec<f64> = (0..dim)
            .map(|k| bounds.side(k) / cells_per_axis[k] as f64)
            .collect();
        let total: usize = cells_per_axis.iter().product();
        let mut list = Self {
            dim,
            lower: bounds.lower.clone(),
            cell_width,
            cells_per_axis,
            starts: vec![0; total + 1],
            entries: Vec::new(),
        };
        let n = coords.len() / dim;
        let owner: Vec<usize> = coords.chunks_exact(dim).map(|p| list.cell_of(p)).collect();
        for &c in &owner {
            list.starts[c + 1] += 1;
        }
        for c in 0..total {
            list.starts[c + 1] += list.starts[c];
        }
        let mut fill = list.starts.clone();
        list.entries = vec![0; n];
        for (i, &c) in owner.iter().enumerate() {
            list.entries[fill[c]] = i;
            fill[c] += 1;
        }
        list
    }

    fn axis_cell(&self, k: usize, v: f64) -> usize {
        let c = ((v - self.lower[k]) / self.cell_width[k]).floor();
        if c <= 0.0 {
            0
        } else {
            (c as usize).min(self.cells_per_axis[k] - 1)
        }
    }

    fn cell_of(&self, p: &[f64]) -> usize {
        let mut idx = 0;
        for k in (0..self.dim).rev() {
            idx = idx * self.cells_per_axis[k] + self.axis_cell(k, p[k]);
        }
        idx
    }

    pub fn cell_count(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn cell_width(&self) -> &[f64] {
        &self.cell_width
    }

    /// Calls `visit(j)` for every stored point `j` in the cells adjacent to
    /// (and including) the cell containing `p`. Candidates still need a
    /// distance check.
    pub fn for_each_candidate(&self, p: &[f64], mut visit: impl FnMut(usize)) {
        let center: Vec<usize> = (0..self.dim).map(|k| self.axis_cell(k, p[k])).collect();
        let lo: Vec<usize> = center.iter().map(|&c| c.saturating_sub(1)).collect();
        let hi: Vec<usize> = center
            .iter()
            .zip(&self.cells_per_axis)
            .map(|(&c, &n)| (c + 1).min(n - 1))
            .collect();
        let mut cur = lo.clone();
        loop {
            let mut idx = 0;
            for k in (0..self.dim).rev() {
                idx = idx * self.cells_per_axis[k] + cur[k];
            }
            for &j in &self.entries[self.starts[idx]..self.starts[idx + 1]] {
                visit(j);
            }
            // odometer over the neighbourhood
            let mut k = 0;
            loop {
                if k == self.dim {
                    return;
                }
                if cur[k] < hi[k] {
                    cur[k] += 1;
                    break;
                }
                cur[k] = lo[k];
                k += 1;
            }
        }
    }
}
