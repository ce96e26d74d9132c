use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use rayon::prelude::*;

use super::manifold::{Axis, ParamManifold};
use crate::{Error, Result};

/// Minimum chart grid resolution accepted by [`build_mesh`].
pub const MIN_RESOLUTION: usize = 8;
/// Initial neighbour count of the k-NN graph.
pub const DEFAULT_K: usize = 8;
/// Meshes up to this many nodes keep the full geodesic matrix in memory.
pub const DENSE_GEODESIC_LIMIT: usize = 4096;

/// Quadrature mesh with a k-nearest-neighbour graph whose edge lengths are
/// ambient chords, so graph distance never undercuts Euclidean distance.
#[derive(Clone, Debug)]
pub struct ManifoldMesh {
    intrinsic_dim: usize,
    ambient_dim: usize,
    resolution: usize,
    nodes: Vec<f64>,
    points: Vec<f64>,
    weights: Vec<f64>,
    spacing: f64,
    k0: usize,
    graph: OnceLock<Graph>,
    geodesic: OnceLock<Option<Vec<f64>>>,
}

#[derive(Clone, Debug)]
struct Graph {
    k: usize,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    lengths: Vec<f64>,
}

pub fn build_mesh(m: &ParamManifold, resolution: usize) -> Result<ManifoldMesh> {
    build_mesh_with_k(m, resolution, DEFAULT_K)
}

pub fn build_mesh_with_k(m: &ParamManifold, resolution: usize, k: usize) -> Result<ManifoldMesh> {
    let mesh = build_quadrature(m, resolution)?.with_neighbours(k)?;
    mesh.graph();
    Ok(mesh)
}

/// Chart-grid nodes and weights only; the neighbour graph is built on first
/// use of a geodesic query.
pub fn build_quadrature(m: &ParamManifold, resolution: usize) -> Result<ManifoldMesh> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::param(format!(
            "mesh resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    let axes = m.axes();
    let dp = axes.len();
    let n = resolution
        .checked_pow(dp as u32)
        .filter(|n| *n <= 1 << 22)
        .ok_or_else(|| Error::param(format!("{resolution}^{dp} nodes is too many")))?;
    let steps: Vec<f64> = axes.iter().map(|a| a.length() / resolution as f64).collect();
    let cell: f64 = steps.iter().product();
    let coord = |axis: Axis, i: usize, h: f64| match axis {
        Axis::Periodic => i as f64 * h,
        Axis::Latitude => -std::f64::consts::FRAC_PI_2 + (i as f64 + 0.5) * h,
    };

    let d = m.ambient_dim;
    let mut nodes = Vec::with_capacity(n * dp);
    let mut points = vec![0.0; n * d];
    let mut weights = Vec::with_capacity(n);
    let mut idx = vec![0usize; dp];
    for p in 0..n {
        let start = nodes.len();
        for a in 0..dp {
            nodes.push(coord(axes[a], idx[a], steps[a]));
        }
        let theta = &nodes[start..];
        m.embed_into(theta, &mut points[p * d..(p + 1) * d]);
        weights.push(m.volume_density(theta) * cell);
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < resolution {
                break;
            }
            *slot = 0;
        }
    }

    // Spacing: the largest chord between grid neighbours along any axis.
    let mut spacing: f64 = 0.0;
    let mut shifted = vec![0.0; d];
    for p in 0..n {
        let theta = &nodes[p * dp..(p + 1) * dp];
        for a in 0..dp {
            let mut t = theta.to_vec();
            t[a] += steps[a];
            if axes[a] == Axis::Latitude && t[a] > std::f64::consts::FRAC_PI_2 {
                continue;
            }
            m.embed_into(&t, &mut shifted);
            spacing = spacing.max(chord(&points[p * d..(p + 1) * d], &shifted));
        }
    }

    ManifoldMesh::assemble(dp, d, resolution, nodes, points, weights, Some(spacing))
}

fn chord(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Copy, Clone, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}
impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl ManifoldMesh {
    /// Mesh from explicit nodes. Spacing is the largest nearest-neighbour
    /// chord.
    pub fn from_points(
        intrinsic_dim: usize,
        ambient_dim: usize,
        nodes: Vec<f64>,
        points: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let mut mesh = Self::assemble(intrinsic_dim, ambient_dim, 0, nodes, points, weights, None)?;
        let g = mesh.graph();
        mesh.spacing = (0..mesh.len())
            .map(|i| (g.offsets[i]..g.offsets[i + 1]).map(|e| g.lengths[e]).fold(f64::INFINITY, f64::min))
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max);
        Ok(mesh)
    }

    fn assemble(
        intrinsic_dim: usize,
        ambient_dim: usize,
        resolution: usize,
        nodes: Vec<f64>,
        points: Vec<f64>,
        weights: Vec<f64>,
        spacing: Option<f64>,
    ) -> Result<Self> {
        let n = weights.len();
        if n == 0 || ambient_dim == 0 {
            return Err(Error::Mesh("mesh needs at least one node".into()));
        }
        if points.len() != n * ambient_dim || nodes.len() != n * intrinsic_dim {
            return Err(Error::Size(format!(
                "mesh arrays disagree: {n} weights, {} points, {} chart coordinates",
                points.len(),
                nodes.len()
            )));
        }
        if !weights.iter().all(|w| w.is_finite() && *w > 0.0) {
            return Err(Error::Mesh("quadrature weights must be positive".into()));
        }
        if !points.iter().all(|p| p.is_finite()) {
            return Err(Error::Mesh("mesh points must be finite".into()));
        }
        Ok(ManifoldMesh {
            intrinsic_dim,
            ambient_dim,
            resolution,
            nodes,
            points,
            weights,
            spacing: spacing.unwrap_or(0.0),
            k0: DEFAULT_K,
            graph: OnceLock::new(),
            geodesic: OnceLock::new(),
        })
    }

    /// Sets the initial neighbour count; discards any graph built so far.
    pub fn with_neighbours(mut self, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("neighbour count must be positive"));
        }
        self.k0 = k;
        self.graph = OnceLock::new();
        self.geodesic = OnceLock::new();
        Ok(self)
    }

    /// Symmetrised k-NN graph, doubling `k` until it is connected. With
    /// `k = n - 1` the graph is complete, so this always terminates.
    fn graph(&self) -> &Graph {
        self.graph.get_or_init(|| {
            let n = self.len();
            let d = self.ambient_dim;
            let row = |i: usize| &self.points[i * d..(i + 1) * d];
            if n == 1 {
                return Graph { k: 0, offsets: vec![0, 0], targets: vec![], lengths: vec![] };
            }
            let mut k = self.k0.min(n - 1);
            loop {
                let sorted: Vec<Vec<(f64, usize)>> = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let mut all: Vec<(f64, usize)> =
                            (0..n).filter(|j| *j != i).map(|j| (chord(row(i), row(j)), j)).collect();
                        if k < all.len() {
                            all.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
                            all.truncate(k);
                        }
                        all
                    })
                    .collect();
                let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
                for (i, nbrs) in sorted.iter().enumerate() {
                    for &(dist, j) in nbrs {
                        adj[i].push((j, dist));
                        adj[j].push((i, dist));
                    }
                }
                for list in &mut adj {
                    list.sort_by(|a, b| a.0.cmp(&b.0));
                    list.dedup_by_key(|e| e.0);
                }
                if connected(&adj) || k >= n - 1 {
                    let mut offsets = vec![0];
                    let mut targets = Vec::new();
                    let mut lengths = Vec::new();
                    for list in adj {
                        for (j, l) in list {
                            targets.push(j);
                            lengths.push(l);
                        }
                        offsets.push(targets.len());
                    }
                    return Graph { k, offsets, targets, lengths };
                }
                k = (2 * k).min(n - 1);
            }
        })
    }

    fn dense(&self) -> Option<&[f64]> {
        self.geodesic
            .get_or_init(|| {
                let n = self.len();
                (n <= DENSE_GEODESIC_LIMIT).then(|| {
                    let rows: Vec<Vec<f64>> =
                        (0..n).into_par_iter().map(|i| self.dijkstra(i, f64::INFINITY)).collect();
                    let mut g = vec![0.0; n * n];
                    for i in 0..n {
                        for j in i..n {
                            g[i * n + j] = rows[i][j];
                            g[j * n + i] = rows[i][j];
                        }
                    }
                    g
                })
            })
            .as_deref()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    /// Nodes per chart axis; 0 for meshes built from explicit points.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Neighbour count the graph settled on.
    pub fn neighbours(&self) -> usize {
        self.graph().k
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.intrinsic_dim..(i + 1) * self.intrinsic_dim]
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Full geodesic matrix when the mesh is small enough to hold it.
    pub fn geodesic_matrix(&self) -> Option<&[f64]> {
        self.dense()
    }

    pub fn geodesic(&self, i: usize, j: usize) -> f64 {
        match self.dense() {
            Some(g) => g[i * self.len() + j],
            None => self.dijkstra(i.min(j), f64::INFINITY)[i.max(j)],
        }
    }

    /// Graph distances from `source`, truncated at `limit` (farther nodes
    /// are left at infinity).
    pub fn dijkstra(&self, source: usize, limit: f64) -> Vec<f64> {
        let n = self.len();
        let g = self.graph();
        let mut dist = vec![f64::INFINITY; n];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(Entry(0.0, source));
        while let Some(Entry(du, u)) = heap.pop() {
            if du > dist[u] {
                continue;
            }
            for e in g.offsets[u]..g.offsets[u + 1] {
                let v = g.targets[e];
                let dv = du + g.lengths[e];
                if dv < dist[v] && dv <= limit {
                    dist[v] = dv;
                    heap.push(Entry(dv, v));
                }
            }
        }
        dist
    }

    /// Nodes within geodesic distance `radius` of `center`, with distances.
    pub fn ball(&self, center: usize, radius: f64) -> Vec<(usize, f64)> {
        match self.dense() {
            Some(g) => {
                let n = self.len();
                g[center * n..(center + 1) * n]
                    .iter()
                    .enumerate()
                    .filter(|(_, d)| **d <= radius)
                    .map(|(j, d)| (j, *d))
                    .collect()
            }
            None => self
                .dijkstra(center, radius)
                .into_iter()
                .enumerate()
                .filter(|(_, d)| *d <= radius)
                .collect(),
        }
    }

    /// Largest graph distance between any two nodes.
    pub fn diameter(&self) -> f64 {
        match self.dense() {
            Some(g) => g.iter().copied().fold(0.0, f64::max),
            None => (0..self.len())
                .into_par_iter()
                .map(|i| self.dijkstra(i, f64::INFINITY).into_iter().fold(0.0, f64::max))
                .reduce(|| 0.0, f64::max),
        }
    }

    /// CSV with `node_index, theta_*, x_*, weight`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = vec!["node_index".to_string()];
        header.extend((0..self.intrinsic_dim).map(|a| format!("theta_{a}")));
        header.extend((0..self.ambient_dim).map(|a| format!("x_{a}")));
        header.push("weight".into());
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            write!(w, "{i}")?;
            for v in self.node(i).iter().chain(self.point(i)) {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", self.weights[i])?;
        }
        Ok(())
    }

    /// Row-major little-endian dump of the geodesic matrix behind an
    /// `(n, n)` header of two `u64`s.
    pub fn write_geodesic_bin<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.len();
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&(n as u64).to_le_bytes())?;
        for i in 0..n {
            let row = match self.dense() {
                Some(g) => g[i * n..(i + 1) * n].to_vec(),
                None => self.dijkstra(i, f64::INFINITY),
            };
            for v in row {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn export(&self, dir: &Path, with_geodesic: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut csv = std::io::BufWriter::new(std::fs::File::create(dir.join("mesh.csv"))?);
        self.write_csv(&mut csv)?;
        csv.flush()?;
        if with_geodesic {
            let mut bin = std::io::BufWriter::new(std::fs::File::create(dir.join("geodesic.bin"))?);
            self.write_geodesic_bin(&mut bin)?;
            bin.flush()?;
        }
        Ok(())
    }
}

/// Reads a geodesic dump written by [`ManifoldMesh::write_geodesic_bin`].
pub fn read_geodesic_bin(bytes: &[u8]) -> Result<(usize, Vec<f64>)> {
    let word = |i: usize| -> Result<[u8; 8]> {
        bytes
            .get(i * 8..(i + 1) * 8)
            .and_then(|s| s.try_into().ok())
            .ok_or_else(|| Error::Size("truncated geodesic dump".into()))
    };
    let rows = u64::from_le_bytes(word(0)?) as usize;
    let cols = u64::from_le_bytes(word(1)?) as usize;
    if rows != cols || bytes.len() != 16 + rows * cols * 8 {
        return Err(Error::Size(format!("bad geodesic dump header {rows} x {cols}")));
    }
    let data = (0..rows * cols)
        .map(|i| word(i + 2).map(f64::from_le_bytes))
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, data))
}

fn connected(adj: &[Vec<(usize, f64)>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == adj.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn circle_volume_and_diameter() {
        let m = ParamManifold::circle(1.0, 3).unwrap();
        let mesh = build_mesh(&m, 64).unwrap();
        assert!((mesh.total_volume() - 2.0 * PI).abs() < 0.01 * 2.0 * PI);
        assert!((mesh.diameter() - PI).abs() < 0.02 * PI);
    }

    #[test]
    fn resolution_floor() {
        let m = ParamManifold::circle(1.0, 2).unwrap();
        assert!(build_mesh(&m, 7).is_err());
    }

    #[test]
    fn single_node() {
        let mesh = ManifoldMesh::from_points(1, 2, vec![0.0], vec![1.0, 0.0], vec![1.0]).unwrap();
        assert_eq!(mesh.diameter(), 0.0);
        assert_eq!(mesh.geodesic(0, 0), 0.0);
    }

    #[test]
    fn disconnected_clusters_are_joined_by_raising_k() {
        // Two tight clusters of 10 points far apart: k = 8 leaves them split.
        let mut pts = Vec::new();
        for c in [0.0, 100.0] {
            for i in 0..10 {
                pts.extend([c + 0.01 * i as f64, 0.0]);
            }
        }
        let mesh = ManifoldMesh::from_points(0, 2, vec![], pts, vec![1.0; 20]).unwrap();
        assert!(mesh.neighbours() > 8);
        assert!(mesh.diameter() > 100.0);
    }

    #[test]
    fn dense_and_on_demand_agree() {
        let m = ParamManifold::embedded_torus(1.0, 3.0, 3).unwrap();
        let mesh = build_mesh(&m, 16).unwrap();
        let g = mesh.geodesic_matrix().unwrap();
        let n = mesh.len();
        for i in [0, 17, 200] {
            let row = mesh.dijkstra(i, f64::INFINITY);
            for j in 0..n {
                assert!((row[j] - g[i * n + j]).abs() < 1e-12);
            }
        }
        let ball = mesh.ball(5, 0.9);
        let bounded = mesh.dijkstra(5, 0.9);
        assert_eq!(ball.len(), bounded.iter().filter(|d| d.is_finite()).count());
    }

    #[test]
    fn binary_dump_round_trip() {
        let m = ParamManifold::circle(1.0, 2).unwrap();
        let mesh = build_mesh(&m, 10).unwrap();
        let mut buf = Vec::new();
        mesh.write_geodesic_bin(&mut buf).unwrap();
        let (n, data) = read_geodesic_bin(&buf).unwrap();
        assert_eq!(n, 10);
        assert_eq!(data.as_slice(), mesh.geodesic_matrix().unwrap());
        let mut csv = Vec::new();
        mesh.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("node_index,theta_0,x_0,x_1,weight\n"));
        assert_eq!(text.lines().count(), 11);
    }
}
