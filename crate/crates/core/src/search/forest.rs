//! Random-projection forest for approximate nearest-neighbour search.
//!
//! Each tree splits its points by the perpendicular bisector of two randomly
//! chosen members until at most `leaf_cap` remain. A query walks all trees at
//! once, best-first: a subtree's priority is the smallest signed margin seen
//! on the path to it, so leaves on the query's side of every split come
//! first. Traversal stops once the candidate budget is met; candidates are
//! then re-scored exactly against the store.
//!
//! Serialized layout (little-endian, inside the store's LZ4-compressed ANN
//! section):
//!
//! ```text
//! "RPFT" | version u32
//! dimension u32 | precision u8 | byte_width u8 | 0u16
//! vector_count u64 | n_trees u32 | leaf_cap u32 | seed u64 | node_count u64
//! roots: n_trees × u32 node index
//! nodes: tag u8, then
//!   0 split: left u32 | right u32 | offset f32 | normal: dimension codes
//!   1 leaf:  count varint | delta-varint ordinals (ascending)
//! ```
//!
//! A split whose normal codes are all zero is a balanced random partition
//! used where the bisector failed to separate the points.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use super::exact::{to_hits, PreparedQuery, Scored, TopK};
use super::SearchHit;
use crate::error::{Error, Result};
use crate::format::{Ordinal, StoreReader};
use crate::hashing::SplitMix64;
use crate::quantize::QuantizationSpec;
use crate::vector::{normalize_f64, EmbeddingVector};

const FOREST_MAGIC: [u8; 4] = *b"RPFT";
const FOREST_VERSION: u32 = 1;

/// Indexed, fixed-dimension vectors a forest can be built from.
pub trait RowSource {
    fn len(&self) -> usize;
    fn dimension(&self) -> usize;
    /// Writes row `index` into `out` (`out.len() == dimension()`).
    fn row_into(&self, index: usize, out: &mut [f32]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl RowSource for StoreReader {
    fn len(&self) -> usize {
        self.key_count() as usize
    }

    fn dimension(&self) -> usize {
        StoreReader::dimension(self)
    }

    fn row_into(&self, index: usize, out: &mut [f32]) {
        StoreReader::row_into(self, index as Ordinal, out).expect("row index in range")
    }
}

/// Plain in-memory rows, one `Vec` per vector.
impl RowSource for [Vec<f32>] {
    fn len(&self) -> usize {
        <[Vec<f32>]>::len(self)
    }

    fn dimension(&self) -> usize {
        self.first().map_or(0, Vec::len)
    }

    fn row_into(&self, index: usize, out: &mut [f32]) {
        out.copy_from_slice(&self[index]);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Split {
        left: u32,
        right: u32,
        offset: f32,
        /// Index of this split's normal in `normals`.
        normal: u32,
    },
    Leaf {
        start: u32,
        len: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionForest {
    dimension: usize,
    vector_count: usize,
    leaf_cap: usize,
    seed: u64,
    quant: QuantizationSpec,
    roots: Vec<u32>,
    nodes: Vec<Node>,
    /// Quantized normals, `dimension × byte_width` bytes each.
    normals: Vec<u8>,
    leaf_ordinals: Vec<Ordinal>,
}

/// Shape of a built forest.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestStats {
    pub n_trees: usize,
    pub nodes: usize,
    pub leaves: usize,
    pub mean_leaf_depth: f64,
    pub max_leaf_depth: usize,
    pub max_leaf_size: usize,
    /// Splits that fell back to a random balanced partition.
    pub fallback_splits: usize,
}

/// One tree under construction; node indices are local until merged.
#[derive(Default)]
struct TreeBuf {
    nodes: Vec<Node>,
    normals: Vec<u8>,
    leaf_ordinals: Vec<Ordinal>,
}

struct Builder<'a> {
    points: &'a [f32],
    dim: usize,
    leaf_cap: usize,
    quant: QuantizationSpec,
}

impl Builder<'_> {
    fn point(&self, i: Ordinal) -> &[f32] {
        let i = i as usize;
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn build_tree(&self, seed: u64) -> Result<TreeBuf> {
        let mut rng = SplitMix64::new(seed);
        let n = self.points.len() / self.dim;
        let mut idx: Vec<Ordinal> = (0..n as Ordinal).collect();
        let mut tree = TreeBuf::default();
        let mut normal = vec![0.0f32; self.dim];
        let mut codes = Vec::with_capacity(self.dim * self.quant.byte_width());
        let mut left = Vec::new();
        let mut right = Vec::new();

        // (node index, range in idx)
        tree.nodes.push(Node::Leaf { start: 0, len: 0 });
        let mut stack = vec![(0usize, 0usize, n)];
        while let Some((node, lo, hi)) = stack.pop() {
            let members = &mut idx[lo..hi];
            if members.len() <= self.leaf_cap {
                members.sort_unstable();
                tree.nodes[node] = Node::Leaf {
                    start: tree.leaf_ordinals.len() as u32,
                    len: members.len() as u32,
                };
                tree.leaf_ordinals.extend_from_slice(members);
                continue;
            }

            codes.clear();
            let offset = self.try_bisector(members, &mut rng, &mut codes, &mut normal)?;
            let mut split_at = None;
            if let Some(offset) = offset {
                left.clear();
                right.clear();
                for &m in members.iter() {
                    if margin(&normal, offset, self.point(m)) > 0.0 {
                        right.push(m);
                    } else {
                        left.push(m);
                    }
                }
                if !left.is_empty() && !right.is_empty() {
                    members[..left.len()].copy_from_slice(&left);
                    members[left.len()..].copy_from_slice(&right);
                    split_at = Some((left.len(), offset));
                }
            }
            let (mid, offset) = split_at.unwrap_or_else(|| {
                rng.shuffle(members);
                codes.clear();
                codes.resize(self.dim * self.quant.byte_width(), 0);
                (members.len() / 2, 0.0)
            });

            let normal_index = (tree.normals.len() / codes.len()) as u32;
            tree.normals.extend_from_slice(&codes);
            let l = tree.nodes.len();
            tree.nodes.push(Node::Leaf { start: 0, len: 0 });
            tree.nodes.push(Node::Leaf { start: 0, len: 0 });
            tree.nodes[node] = Node::Split {
                left: l as u32,
                right: l as u32 + 1,
                offset,
                normal: normal_index,
            };
            stack.push((l + 1, lo + mid, hi));
            stack.push((l, lo, lo + mid));
        }
        Ok(tree)
    }

    /// Quantized perpendicular bisector of two random members. Returns the
    /// offset, with the codes and dequantized normal written out, or `None`
    /// when the two points coincide.
    fn try_bisector(
        &self,
        members: &[Ordinal],
        rng: &mut SplitMix64,
        codes: &mut Vec<u8>,
        normal: &mut [f32],
    ) -> Result<Option<f32>> {
        let i = rng.below(members.len());
        let mut j = rng.below(members.len() - 1);
        if j >= i {
            j += 1;
        }
        let (a, b) = (self.point(members[i]), self.point(members[j]));
        let diff: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x as f64 - y as f64).collect();
        let Ok(unit) = normalize_f64(&diff) else {
            return Ok(None);
        };
        let q = self.quant.quantize_f64(&unit)?;
        if q.iter().all(|&c| c == 0) {
            return Ok(None);
        }
        self.quant.encode_codes(&q, codes);
        self.quant.decode_row(codes, normal);
        let offset: f64 = normal
            .iter()
            .zip(a.iter().zip(b))
            .map(|(&n, (&x, &y))| n as f64 * ((x as f64 + y as f64) / 2.0))
            .sum();
        Ok(Some(offset as f32))
    }
}

#[inline]
fn margin(normal: &[f32], offset: f32, x: &[f32]) -> f64 {
    let d: f64 = normal.iter().zip(x).map(|(&n, &v)| n as f64 * v as f64).sum();
    d - offset as f64
}

/// Builds `n_trees` trees over `rows`. Split normals are stored at the
/// precision of `quant`. The result depends only on the rows and `seed`.
pub fn build_forest<R: RowSource + ?Sized>(
    rows: &R,
    n_trees: usize,
    leaf_cap: usize,
    seed: u64,
    quant: QuantizationSpec,
) -> Result<ProjectionForest> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::TooFewVectors(n));
    }
    if n > Ordinal::MAX as usize {
        return Err(Error::InvalidArgument(format!("{n} vectors exceed the ordinal range")));
    }
    if n_trees == 0 || leaf_cap == 0 {
        return Err(Error::InvalidArgument("n_trees and leaf_cap must be >= 1".into()));
    }
    let dim = rows.dimension();
    if dim == 0 {
        return Err(Error::EmptyVector);
    }
    let mut points = vec![0.0f32; n * dim];
    for (i, chunk) in points.chunks_exact_mut(dim).enumerate() {
        rows.row_into(i, chunk);
    }
    let builder = Builder {
        points: &points,
        dim,
        leaf_cap,
        quant,
    };

    let mut seeds = SplitMix64::new(seed);
    let tree_seeds: Vec<u64> = (0..n_trees).map(|_| seeds.next_u64()).collect();
    let threads = std::thread::available_parallelism()
        .map_or(1, |p| p.get())
        .min(n_trees);
    let mut built: Vec<Option<Result<TreeBuf>>> = (0..n_trees).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunk = n_trees.div_ceil(threads);
        for (slots, seeds) in built.chunks_mut(chunk).zip(tree_seeds.chunks(chunk)) {
            let builder = &builder;
            s.spawn(move || {
                for (slot, &seed) in slots.iter_mut().zip(seeds) {
                    *slot = Some(builder.build_tree(seed));
                }
            });
        }
    });

    let mut forest = ProjectionForest {
        dimension: dim,
        vector_count: n,
        leaf_cap,
        seed,
        quant,
        roots: Vec::with_capacity(n_trees),
        nodes: Vec::new(),
        normals: Vec::new(),
        leaf_ordinals: Vec::with_capacity(n * n_trees),
    };
    let normal_len = dim * quant.byte_width();
    // Lay normals and leaf lists out in node order, which is also the order
    // `from_bytes` produces.
    for tree in built {
        let tree = tree.expect("every tree built")?;
        let node_base = forest.nodes.len() as u32;
        forest.roots.push(node_base);
        for node in tree.nodes {
            forest.nodes.push(match node {
                Node::Split {
                    left,
                    right,
                    offset,
                    normal,
                } => {
                    let at = normal as usize * normal_len;
                    let index = (forest.normals.len() / normal_len) as u32;
                    forest
                        .normals
                        .extend_from_slice(&tree.normals[at..at + normal_len]);
                    Node::Split {
                        left: left + node_base,
                        right: right + node_base,
                        offset,
                        normal: index,
                    }
                }
                Node::Leaf { start, len } => {
                    let new_start = forest.leaf_ordinals.len() as u32;
                    forest.leaf_ordinals.extend_from_slice(
                        &tree.leaf_ordinals[start as usize..(start + len) as usize],
                    );
                    Node::Leaf {
                        start: new_start,
                        len,
                    }
                }
            });
        }
    }
    Ok(forest)
}

/// Max-heap entry for best-first traversal.
#[derive(PartialEq)]
struct Frontier {
    priority: f64,
    node: u32,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl ProjectionForest {
    pub fn n_trees(&self) -> usize {
        self.roots.len()
    }

    pub fn leaf_cap(&self) -> usize {
        self.leaf_cap
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vector_count(&self) -> usize {
        self.vector_count
    }

    fn normal_into(&self, index: u32, out: &mut [f32]) {
        let len = self.dimension * self.quant.byte_width();
        let at = index as usize * len;
        self.quant.decode_row(&self.normals[at..at + len], out);
    }

    /// Ordinals of each leaf of tree `t`, in traversal order.
    pub fn leaves(&self, t: usize) -> Vec<&[Ordinal]> {
        let mut out = Vec::new();
        let mut stack = vec![self.roots[t]];
        while let Some(n) = stack.pop() {
            match self.nodes[n as usize] {
                Node::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
                Node::Leaf { start, len } => {
                    out.push(&self.leaf_ordinals[start as usize..(start + len) as usize])
                }
            }
        }
        out
    }

    pub fn stats(&self) -> ForestStats {
        let mut leaves = 0;
        let mut depth_sum = 0usize;
        let mut max_depth = 0;
        let mut max_size = 0;
        let mut fallback = 0;
        let normal_len = self.dimension * self.quant.byte_width();
        for &root in &self.roots {
            let mut stack = vec![(root, 0usize)];
            while let Some((n, depth)) = stack.pop() {
                match self.nodes[n as usize] {
                    Node::Split {
                        left,
                        right,
                        normal,
                        ..
                    } => {
                        let at = normal as usize * normal_len;
                        if self.normals[at..at + normal_len].iter().all(|&b| b == 0) {
                            fallback += 1;
                        }
                        stack.push((left, depth + 1));
                        stack.push((right, depth + 1));
                    }
                    Node::Leaf { len, .. } => {
                        leaves += 1;
                        depth_sum += depth;
                        max_depth = max_depth.max(depth);
                        max_size = max_size.max(len as usize);
                    }
                }
            }
        }
        ForestStats {
            n_trees: self.roots.len(),
            nodes: self.nodes.len(),
            leaves,
            mean_leaf_depth: depth_sum as f64 / leaves.max(1) as f64,
            max_leaf_depth: max_depth,
            max_leaf_size: max_size,
            fallback_splits: fallback,
        }
    }

    /// Up to `budget` distinct candidate ordinals (more if the last leaf
    /// overshoots), gathered best-first across all trees. `q` should be unit
    /// length.
    pub fn candidates(&self, q: &[f32], budget: usize) -> Vec<Ordinal> {
        let mut seen = vec![0u64; self.vector_count.div_ceil(64)];
        let mut out = Vec::with_capacity(budget + self.leaf_cap);
        let mut heap: BinaryHeap<Frontier> = self
            .roots
            .iter()
            .map(|&node| Frontier {
                priority: f64::INFINITY,
                node,
            })
            .collect();
        let mut normal = vec![0.0f32; self.dimension];
        while out.len() < budget {
            let Some(Frontier { priority, node }) = heap.pop() else {
                break;
            };
            match self.nodes[node as usize] {
                Node::Split {
                    left,
                    right,
                    offset,
                    normal: ni,
                } => {
                    self.normal_into(ni, &mut normal);
                    let m = margin(&normal, offset, q);
                    heap.push(Frontier {
                        priority: priority.min(m),
                        node: right,
                    });
                    heap.push(Frontier {
                        priority: priority.min(-m),
                        node: left,
                    });
                }
                Node::Leaf { start, len } => {
                    for &o in &self.leaf_ordinals[start as usize..(start + len) as usize] {
                        let (word, bit) = (o as usize / 64, 1u64 << (o % 64));
                        if seen[word] & bit == 0 {
                            seen[word] |= bit;
                            out.push(o);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(64 + self.normals.len() + self.leaf_ordinals.len() * 2);
        b.extend_from_slice(&FOREST_MAGIC);
        b.extend_from_slice(&FOREST_VERSION.to_le_bytes());
        b.extend_from_slice(&(self.dimension as u32).to_le_bytes());
        b.push(self.quant.precision() as u8);
        b.push(self.quant.byte_width() as u8);
        b.extend_from_slice(&0u16.to_le_bytes());
        b.extend_from_slice(&(self.vector_count as u64).to_le_bytes());
        b.extend_from_slice(&(self.roots.len() as u32).to_le_bytes());
        b.extend_from_slice(&(self.leaf_cap as u32).to_le_bytes());
        b.extend_from_slice(&self.seed.to_le_bytes());
        b.extend_from_slice(&(self.nodes.len() as u64).to_le_bytes());
        for r in &self.roots {
            b.extend_from_slice(&r.to_le_bytes());
        }
        let normal_len = self.dimension * self.quant.byte_width();
        for node in &self.nodes {
            match *node {
                Node::Split {
                    left,
                    right,
                    offset,
                    normal,
                } => {
                    b.push(0);
                    b.extend_from_slice(&left.to_le_bytes());
                    b.extend_from_slice(&right.to_le_bytes());
                    b.extend_from_slice(&offset.to_le_bytes());
                    let at = normal as usize * normal_len;
                    b.extend_from_slice(&self.normals[at..at + normal_len]);
                }
                Node::Leaf { start, len } => {
                    b.push(1);
                    crate::format::write_varint(len as u64, &mut b);
                    crate::format::write_delta_list(
                        &self.leaf_ordinals[start as usize..(start + len) as usize],
                        &mut b,
                    );
                }
            }
        }
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let mut c = Cursor { b, pos: 0 };
        if c.take(4)? != FOREST_MAGIC {
            return Err(c.err("bad forest magic"));
        }
        let version = c.u32()?;
        if version != FOREST_VERSION {
            return Err(c.err(format!("unsupported forest version {version}")));
        }
        let dimension = c.u32()? as usize;
        let precision = c.take(1)?[0] as u32;
        let byte_width = c.take(1)?[0] as usize;
        c.take(2)?;
        let quant = QuantizationSpec::new(precision)?;
        if quant.byte_width() != byte_width || dimension == 0 {
            return Err(c.err("inconsistent forest header"));
        }
        let vector_count = c.u64()? as usize;
        let n_trees = c.u32()? as usize;
        let leaf_cap = c.u32()? as usize;
        let seed = c.u64()?;
        let node_count = c.u64()? as usize;
        if node_count > b.len() || n_trees > node_count || vector_count > Ordinal::MAX as usize {
            return Err(c.err("implausible forest counts"));
        }
        let mut roots = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            roots.push(c.u32()?);
        }
        let normal_len = dimension * byte_width;
        let mut nodes = Vec::with_capacity(node_count);
        let mut normals = Vec::new();
        let mut leaf_ordinals = Vec::new();
        for _ in 0..node_count {
            match c.take(1)?[0] {
                0 => {
                    let left = c.u32()?;
                    let right = c.u32()?;
                    let offset = f32::from_le_bytes(c.take(4)?.try_into().expect("4 bytes"));
                    let normal = (normals.len() / normal_len) as u32;
                    normals.extend_from_slice(c.take(normal_len)?);
                    nodes.push(Node::Split {
                        left,
                        right,
                        offset,
                        normal,
                    });
                }
                1 => {
                    let len = crate::format::read_varint(b, &mut c.pos)? as usize;
                    if len > vector_count {
                        return Err(c.err("leaf larger than the vector count"));
                    }
                    let start = leaf_ordinals.len() as u32;
                    let list = crate::format::read_delta_list(b, &mut c.pos, len)?;
                    if list.iter().any(|&o| o as usize >= vector_count) {
                        return Err(c.err("leaf ordinal out of range"));
                    }
                    leaf_ordinals.extend_from_slice(&list);
                    nodes.push(Node::Leaf {
                        start,
                        len: len as u32,
                    });
                }
                tag => return Err(c.err(format!("unknown node tag {tag}"))),
            }
        }
        if c.pos != b.len() {
            return Err(c.err("trailing bytes after forest"));
        }
        let in_range = |i: u32| (i as usize) < nodes.len();
        let links_ok = roots.iter().all(|&r| in_range(r))
            && nodes.iter().all(|n| match *n {
                Node::Split { left, right, .. } => in_range(left) && in_range(right),
                Node::Leaf { .. } => true,
            });
        if !links_ok {
            return Err(c.err("node reference out of range"));
        }
        Ok(Self {
            dimension,
            vector_count,
            leaf_cap,
            seed,
            quant,
            roots,
            nodes,
            normals,
            leaf_ordinals,
        })
    }
}

struct Cursor<'a> {
    b: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::CorruptSection {
            section: "ann",
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let out = self
            .b
            .get(self.pos..self.pos + n)
            .ok_or_else(|| self.err("forest payload ends early"))?;
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Number of candidates inspected for a query: `max(k, ⌈effort · β ·
/// n_trees · k⌉)`.
pub fn search_budget(effort: f32, beta: f32, n_trees: usize, k: usize) -> usize {
    // In f32 so that decimal efforts such as 0.1 do not overshoot by one.
    let scaled = (effort * (beta * n_trees as f32 * k as f32)).ceil();
    k.max(scaled as usize)
}

/// Approximate top-`k` by `f`, re-scored exactly against `r`.
///
/// `effort` in `[0, 1]` scales the number of candidates inspected; see
/// [`search_budget`]. β comes from the reader's options.
pub fn approx_topk(
    f: &ProjectionForest,
    r: &StoreReader,
    q: &EmbeddingVector,
    k: usize,
    effort: f32,
) -> Result<Vec<SearchHit>> {
    approx_topk_excluding(f, r, q, k, effort, &[])
}

pub(crate) fn approx_topk_excluding(
    f: &ProjectionForest,
    r: &StoreReader,
    q: &EmbeddingVector,
    k: usize,
    effort: f32,
    exclude: &[&str],
) -> Result<Vec<SearchHit>> {
    if !r.tier().has_ann() {
        return Err(Error::TierUnsupported {
            operation: "approximate search",
            tier: r.tier(),
        });
    }
    if !(0.0..=1.0).contains(&effort) {
        return Err(Error::EffortOutOfRange(effort));
    }
    if q.dimension() != r.dimension() {
        return Err(Error::DimensionMismatch {
            expected: r.dimension(),
            actual: q.dimension(),
        });
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let excluded: HashSet<Ordinal> = exclude.iter().filter_map(|k| r.lookup_key(k)).collect();
    let budget = search_budget(effort, r.ann_beta(), f.n_trees(), k) + excluded.len();

    // Split offsets assume unit-length points.
    let unit: Vec<f32> = match normalize_f64(&q.iter().map(|&x| x as f64).collect::<Vec<_>>()) {
        Ok(u) => u.into_iter().map(|x| x as f32).collect(),
        Err(_) => q.to_vec(),
    };
    let mut pq = PreparedQuery::new(q);
    let mut top = TopK::new(k);
    for o in f.candidates(&unit, budget) {
        if excluded.contains(&o) {
            continue;
        }
        top.offer(Scored {
            sim: pq.score(r, o),
            ordinal: o,
        });
    }
    to_hits(r, top.into_sorted())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hashing::prvg;

    fn random_rows(n: usize, d: usize) -> Vec<Vec<f32>> {
        (0..n)
            .map(|i| {
                let v = normalize_f64(&prvg(i as u32 + 1, d)).unwrap();
                v.into_iter().map(|x| x as f32).collect()
            })
            .collect()
    }

    #[test]
    fn leaves_partition_every_tree() {
        let rows = random_rows(100, 8);
        let f = build_forest(rows.as_slice(), 4, 10, 7, QuantizationSpec::new(7).unwrap()).unwrap();
        for t in 0..4 {
            let mut all: Vec<Ordinal> = f.leaves(t).concat();
            assert!(f.leaves(t).iter().all(|l| l.len() <= 10 && !l.is_empty()));
            all.sort_unstable();
            assert_eq!(all, (0..100).collect::<Vec<_>>());
        }
    }

    #[test]
    fn deterministic_and_round_trips() {
        let rows = random_rows(300, 16);
        let q = QuantizationSpec::new(4).unwrap();
        let a = build_forest(rows.as_slice(), 5, 8, 99, q).unwrap();
        let b = build_forest(rows.as_slice(), 5, 8, 99, q).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let c = build_forest(rows.as_slice(), 5, 8, 100, q).unwrap();
        assert_ne!(a.to_bytes(), c.to_bytes());
        let back = ProjectionForest::from_bytes(&a.to_bytes()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn identical_points_fall_back_to_balanced_splits() {
        let rows = vec![vec![0.6f32, 0.8]; 40];
        let f = build_forest(rows.as_slice(), 1, 4, 1, QuantizationSpec::new(7).unwrap()).unwrap();
        let s = f.stats();
        assert!(s.fallback_splits > 0);
        assert!(s.max_leaf_size <= 4);
        assert!(s.max_leaf_depth <= 4);
    }

    #[test]
    fn too_few_vectors() {
        let rows = random_rows(1, 4);
        assert!(matches!(
            build_forest(rows.as_slice(), 1, 4, 1, QuantizationSpec::new(7).unwrap()),
            Err(Error::TooFewVectors(1))
        ));
    }

    #[test]
    fn corrupt_payloads_rejected() {
        let rows = random_rows(50, 4);
        let bytes = build_forest(rows.as_slice(), 2, 5, 3, QuantizationSpec::new(2).unwrap())
            .unwrap()
            .to_bytes();
        assert!(ProjectionForest::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(ProjectionForest::from_bytes(&bad).is_err());
    }

    #[test]
    fn budget_formula() {
        assert_eq!(search_budget(0.0, 32.0, 16, 10), 10);
        assert_eq!(search_budget(1.0, 32.0, 16, 10), 5120);
        assert_eq!(search_budget(0.1, 32.0, 16, 10), 512);
    }

    #[test]
    fn candidates_respect_budget_and_are_distinct() {
        let rows = random_rows(500, 8);
        let f = build_forest(rows.as_slice(), 6, 10, 5, QuantizationSpec::new(7).unwrap()).unwrap();
        let c = f.candidates(&rows[0], 50);
        assert!(c.len() >= 50 && c.len() < 60);
        let unique: HashSet<_> = c.iter().collect();
        assert_eq!(unique.len(), c.len());
        assert!(c.contains(&0));
    }
}
