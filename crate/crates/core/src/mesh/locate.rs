use super::{Mesh, Point};

/// Uniform bucket grid over the mesh bounding box.
#[derive(Debug, Clone)]
pub(super) struct Locator {
    origin: Point,
    cell: f64,
    n: usize,
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    pub(super) fn new(mesh: &Mesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in mesh.nodes() {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let n = ((mesh.num_triangles() as f64 / 2.0).sqrt().ceil() as usize).clamp(1, 512);
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
        let cell = extent / n as f64 * (1.0 + 1e-12);
        let mut buckets = vec![Vec::new(); n * n];
        let clamp = |v: f64| (v.max(0.0) as usize).min(n - 1);
        for (ti, t) in mesh.triangles().iter().enumerate() {
            let ps = t.map(|i| mesh.nodes()[i]);
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in ps {
                for d in 0..2 {
                    a[d] = a[d].min(p[d]);
                    b[d] = b[d].max(p[d]);
                }
            }
            let (i0, i1) = (clamp((a[0] - lo[0]) / cell), clamp((b[0] - lo[0]) / cell));
            let (j0, j1) = (clamp((a[1] - lo[1]) / cell), clamp((b[1] - lo[1]) / cell));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * n + i].push(ti as u32);
                }
            }
        }
        Self {
            origin: lo,
            cell,
            n,
            buckets,
        }
    }

    pub(super) fn locate(&self, mesh: &Mesh, x: Point) -> Option<(usize, [f64; 3])> {
        let fi = (x[0] - self.origin[0]) / self.cell;
        let fj = (x[1] - self.origin[1]) / self.cell;
        if !(fi >= -1e-9 && fj >= -1e-9 && fi <= self.n as f64 + 1e-9 && fj <= self.n as f64 + 1e-9) {
            return None;
        }
        let i = (fi.max(0.0) as usize).min(self.n - 1);
        let j = (fj.max(0.0) as usize).min(self.n - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[j * self.n + i] {
            let t = t as usize;
            let b = barycentric(mesh, t, x);
            let worst = b[0].min(b[1]).min(b[2]);
            if best.as_ref().is_none_or(|(_, _, w)| worst > *w) {
                best = Some((t, b, worst));
            }
        }
        match best {
            Some((t, b, w)) if w >= -1e-10 => Some((t, b)),
            _ => None,
        }
    }
}

pub(super) fn barycentric(mesh: &Mesh, t: usize, x: Point) -> [f64; 3] {
    let tri = mesh.triangles()[t];
    let g = &mesh.geometry()[t];
    let p0 = mesh.nodes()[tri[0]];
    let d = [x[0] - p0[0], x[1] - p0[1]];
    let l1 = g.grad[1][0] * d[0] + g.grad[1][1] * d[1];
    let l2 = g.grad[2][0] * d[0] + g.grad[2][1] * d[1];
    [1.0 - l1 - l2, l1, l2]
}
