//! Uniform bucket grid over 2-D points (1-D data lives on the x axis).

pub(crate) struct GridIndex {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    starts: Vec<u32>,
    items: Vec<u32>,
    points: Vec<[f64; 2]>,
}

impl GridIndex {
    /// Builds a grid with roughly `cell` sized buckets. The cell is enlarged
    /// when needed to keep the bucket count proportional to the point count.
    pub fn new(points: Vec<[f64; 2]>, cell: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        if points.is_empty() {
            lo = [0.0; 2];
            hi = [0.0; 2];
        }
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
        let mut cell = if cell.is_finite() && cell > 0.0 {
            cell
        } else {
            extent.max(1.0)
        };
        let max_cells = 4 * points.len() + 16;
        loop {
            let nx = ((hi[0] - lo[0]) / cell).floor() as usize + 1;
            let ny = ((hi[1] - lo[1]) / cell).floor() as usize + 1;
            if nx.saturating_mul(ny) <= max_cells {
                break;
            }
            cell *= 2.0;
        }
        let nx = ((hi[0] - lo[0]) / cell).floor() as usize + 1;
        let ny = ((hi[1] - lo[1]) / cell).floor() as usize + 1;

        let mut grid = GridIndex {
            origin: lo,
            cell,
            nx,
            ny,
            starts: vec![0; nx * ny + 1],
            items: vec![0; points.len()],
            points: Vec::new(),
        };
        let cells: Vec<usize> = points.iter().map(|p| grid.cell_of(p)).collect();
        for &c in &cells {
            grid.starts[c + 1] += 1;
        }
        for c in 0..nx * ny {
            grid.starts[c + 1] += grid.starts[c];
        }
        let mut fill = grid.starts.clone();
        for (i, &c) in cells.iter().enumerate() {
            grid.items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        grid.points = points;
        grid
    }

    fn coord_cell(&self, p: &[f64; 2]) -> (usize, usize) {
        let cx = ((p[0] - self.origin[0]) / self.cell).floor();
        let cy = ((p[1] - self.origin[1]) / self.cell).floor();
        let cx = if cx.is_nan() { 0.0 } else { cx };
        let cy = if cy.is_nan() { 0.0 } else { cy };
        (
            cx.clamp(0.0, (self.nx - 1) as f64) as usize,
            cy.clamp(0.0, (self.ny - 1) as f64) as usize,
        )
    }

    fn cell_of(&self, p: &[f64; 2]) -> usize {
        let (cx, cy) = self.coord_cell(p);
        cy * self.nx + cx
    }

    fn bucket(&self, cx: usize, cy: usize) -> &[u32] {
        let c = cy * self.nx + cx;
        &self.items[self.starts[c] as usize..self.starts[c + 1] as usize]
    }

    /// Appends to `out` the indices of all points within distance `radius` of `q`.
    pub fn within(&self, q: [f64; 2], radius: f64, out: &mut Vec<usize>) {
        let r2 = radius * radius;
        let (x0, y0) = self.coord_cell(&[q[0] - radius, q[1] - radius]);
        let (x1, y1) = self.coord_cell(&[q[0] + radius, q[1] + radius]);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                for &i in self.bucket(cx, cy) {
                    if dist2(&self.points[i as usize], &q) <= r2 {
                        out.push(i as usize);
                    }
                }
            }
        }
    }

    /// Nearest point to `q`; ties go to the lowest index.
    pub fn nearest(&self, q: [f64; 2]) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let (cx, cy) = self.coord_cell(&q);
        let mut best: Option<(f64, usize)> = None;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            let xlo = cx as isize - ring as isize;
            let xhi = cx as isize + ring as isize;
            let ylo = cy as isize - ring as isize;
            let yhi = cy as isize + ring as isize;
            for gy in ylo.max(0)..=yhi.min(self.ny as isize - 1) {
                for gx in xlo.max(0)..=xhi.min(self.nx as isize - 1) {
                    let on_ring = gx == xlo || gx == xhi || gy == ylo || gy == yhi;
                    if !on_ring {
                        continue;
                    }
                    for &i in self.bucket(gx as usize, gy as usize) {
                        let d = dist2(&self.points[i as usize], &q);
                        let i = i as usize;
                        best = match best {
                            Some((bd, bi)) if bd < d || (bd == d && bi < i) => Some((bd, bi)),
                            _ => Some((d, i)),
                        };
                    }
                }
            }
            if let Some((bd, _)) = best {
                let reach = ring as f64 * self.cell;
                if bd < reach * reach {
                    break;
                }
            }
        }
        best.map(|(d, i)| (i, d.sqrt()))
    }
}

#[inline]
pub(crate) fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}
