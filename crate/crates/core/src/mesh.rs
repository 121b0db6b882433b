//! Structured grids on intervals, rectangles and L-shaped domains, and the
//! labeling of their boundary nodes by condition type.
//!
//! Nodes are numbered lexicographically with the first axis running fastest.
//! An L-shaped grid is the bounding rectangle with the open lower-right quadrant
//! `{x1 > mid1, x2 < mid2}` removed; the reentrant corner `(mid1, mid2)` is a
//! boundary node, so both axes need an odd interior count.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarFn;

static NEXT_GRID_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Rectangle,
    LShape,
}

impl DomainKind {
    pub fn dim(self) -> usize {
        match self {
            DomainKind::Interval => 1,
            DomainKind::Rectangle | DomainKind::LShape => 2,
        }
    }
}

/// Straight pieces of the boundary. For the L-shape, `InnerVertical` is the cut
/// `x1 = mid1, x2 <= mid2` and `InnerHorizontal` is `x2 = mid2, x1 >= mid1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    West,
    East,
    South,
    North,
    InnerVertical,
    InnerHorizontal,
}

impl Side {
    /// Axis of the tangential coordinate along this side.
    fn tangent_axis(self) -> usize {
        match self {
            Side::West | Side::East | Side::InnerVertical => 1,
            Side::South | Side::North | Side::InnerHorizontal => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub lattice: [usize; 2],
    pub x: [f64; 2],
    /// Sides the node lies on; empty for interior nodes.
    pub sides: Vec<Side>,
}

impl Node {
    pub fn is_boundary(&self) -> bool {
        !self.sides.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Grid {
    id: u64,
    kind: DomainKind,
    extents: Vec<(f64, f64)>,
    n: Vec<usize>,
    h: Vec<f64>,
    dims: [usize; 2],
    nodes: Vec<Node>,
    lattice_to_node: Vec<Option<usize>>,
    boundary: Vec<usize>,
}

impl Grid {
    pub fn build(kind: DomainKind, extents: &[(f64, f64)], n: &[usize]) -> Result<Self> {
        let dim = kind.dim();
        if extents.len() != dim || n.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{kind:?} needs {dim} extents and counts, got {} and {}",
                extents.len(),
                n.len()
            )));
        }
        for (axis, (&(lo, hi), &na)) in extents.iter().zip(n).enumerate() {
            if na < 1 {
                return Err(Error::InvalidGrid(format!("axis {axis}: n must be at least 1")));
            }
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: extents ({lo}, {hi}) are inverted or degenerate"
                )));
            }
            if kind == DomainKind::LShape && na % 2 == 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: an L-shape needs an odd interior count so the reentrant corner is a node"
                )));
            }
        }
        let h: Vec<f64> = extents
            .iter()
            .zip(n)
            .map(|(&(lo, hi), &na)| (hi - lo) / (na + 1) as f64)
            .collect();
        let dims = [n[0] + 2, if dim == 2 { n[1] + 2 } else { 1 }];
        let coord = |axis: usize, k: usize| {
            let (lo, hi) = extents[axis];
            if k == n[axis] + 1 {
                hi
            } else {
                lo + (hi - lo) * k as f64 / (n[axis] + 1) as f64
            }
        };
        let mid = [(dims[0] - 1) / 2, (dims[1].max(2) - 1) / 2];

        let mut nodes = Vec::new();
        let mut lattice_to_node = vec![None; dims[0] * dims[1]];
        let mut boundary = Vec::new();
        for j in 0..dims[1] {
            for i in 0..dims[0] {
                if kind == DomainKind::LShape && i > mid[0] && j < mid[1] {
                    continue;
                }
                let mut sides = Vec::new();
                match kind {
                    DomainKind::Interval => {
                        if i == 0 {
                            sides.push(Side::West);
                        }
                        if i == dims[0] - 1 {
                            sides.push(Side::East);
                        }
                    }
                    DomainKind::Rectangle | DomainKind::LShape => {
                        let l = kind == DomainKind::LShape;
                        if i == 0 {
                            sides.push(Side::West);
                        }
                        if i == dims[0] - 1 && (!l || j >= mid[1]) {
                            sides.push(Side::East);
                        }
                        if j == 0 && (!l || i <= mid[0]) {
                            sides.push(Side::South);
                        }
                        if j == dims[1] - 1 {
                            sides.push(Side::North);
                        }
                        if l && i == mid[0] && j <= mid[1] {
                            sides.push(Side::InnerVertical);
                        }
                        if l && j == mid[1] && i >= mid[0] {
                            sides.push(Side::InnerHorizontal);
                        }
                    }
                }
                let x = [coord(0, i), if dim == 2 { coord(1, j) } else { 0.0 }];
                let id = nodes.len();
                if !sides.is_empty() {
                    boundary.push(id);
                }
                lattice_to_node[j * dims[0] + i] = Some(id);
                nodes.push(Node {
                    lattice: [i, j],
                    x,
                    sides,
                });
            }
        }
        Ok(Self {
            id: NEXT_GRID_ID.fetch_add(1, Ordering::Relaxed),
            kind,
            extents: extents.to_vec(),
            n: n.to_vec(),
            h,
            dims,
            nodes,
            lattice_to_node,
            boundary,
        })
    }

    pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::build(DomainKind::Interval, &[(lo, hi)], &[n])
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64), n: [usize; 2]) -> Result<Self> {
        Self::build(DomainKind::Rectangle, &[x, y], &n)
    }

    pub fn l_shape(x: (f64, f64), y: (f64, f64), n: [usize; 2]) -> Result<Self> {
        Self::build(DomainKind::LShape, &[x, y], &n)
    }

    /// Process-unique identity used to match fields and operators to this grid.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn extents(&self) -> &[(f64, f64)] {
        &self.extents
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| !n.is_boundary())
            .map(|(i, _)| i)
    }

    pub fn num_interior(&self) -> usize {
        self.nodes.len() - self.boundary.len()
    }

    pub fn lattice_dims(&self) -> [usize; 2] {
        self.dims
    }

    /// Node at lattice position `(i, j)`, if it belongs to the domain.
    pub fn node_at(&self, i: isize, j: isize) -> Option<usize> {
        if i < 0 || j < 0 || i as usize >= self.dims[0] || j as usize >= self.dims[1] {
            return None;
        }
        self.lattice_to_node[j as usize * self.dims[0] + i as usize]
    }

    /// Neighbor of `node` one step along `axis` in direction `dir` (±1).
    pub fn neighbor(&self, node: usize, axis: usize, dir: isize) -> Option<usize> {
        let [i, j] = self.nodes[node].lattice;
        let (i, j) = (i as isize, j as isize);
        if axis == 0 {
            self.node_at(i + dir, j)
        } else {
            self.node_at(i, j + dir)
        }
    }

    /// Closed tangential coordinate range covered by `side`, or `None` if the
    /// grid has no such side.
    pub fn side_range(&self, side: Side) -> Option<(f64, f64)> {
        let l = self.kind == DomainKind::LShape;
        let mid = |axis: usize| 0.5 * (self.extents[axis].0 + self.extents[axis].1);
        match self.kind {
            DomainKind::Interval => match side {
                Side::West | Side::East => Some((0.0, 0.0)),
                _ => None,
            },
            _ => {
                let (x, y) = (self.extents[0], self.extents[1]);
                match side {
                    Side::West | Side::North => Some(if side == Side::West { y } else { x }),
                    Side::East => Some(if l { (mid(1), y.1) } else { y }),
                    Side::South => Some(if l { (x.0, mid(0)) } else { x }),
                    Side::InnerVertical if l => Some((y.0, mid(1))),
                    Side::InnerHorizontal if l => Some((mid(0), x.1)),
                    _ => None,
                }
            }
        }
    }

    pub fn tangential_coordinate(&self, node: usize, side: Side) -> f64 {
        if self.kind == DomainKind::Interval {
            return 0.0;
        }
        self.nodes[node].x[side.tangent_axis()]
    }

    fn coordinate_tolerance(&self) -> f64 {
        1e-9 * self.h.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn dump(&self, labeling: Option<&BoundaryLabeling>) -> GridDump {
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| {
                let (segment, condition) = match labeling.and_then(|l| l.segment_of(id)) {
                    Some(s) => {
                        let seg = &labeling.unwrap().spec().segments()[s];
                        (Some(seg.id.clone()), Some(seg.condition.kind()))
                    }
                    None => (None, None),
                };
                NodeDump {
                    id,
                    x1: n.x[0],
                    x2: n.x[1],
                    boundary: n.is_boundary(),
                    sides: n.sides.clone(),
                    segment,
                    condition,
                }
            })
            .collect();
        GridDump {
            domain_kind: self.kind,
            extents: self.extents.clone(),
            n: self.n.clone(),
            h: self.h.clone(),
            nodes,
        }
    }
}

/// Serializable snapshot of a grid and its labels.
#[derive(Debug, Clone, Serialize)]
pub struct GridDump {
    pub domain_kind: DomainKind,
    pub extents: Vec<(f64, f64)>,
    pub n: Vec<usize>,
    pub h: Vec<f64>,
    pub nodes: Vec<NodeDump>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeDump {
    pub id: usize,
    pub x1: f64,
    pub x2: f64,
    pub boundary: bool,
    pub sides: Vec<Side>,
    pub segment: Option<String>,
    pub condition: Option<ConditionKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    Neumann,
    Signorini,
    Dirichlet,
}

/// Boundary data. Neumann data is the outward conormal flux; the Signorini
/// condition constrains the trace from below, `u >= gap`.
#[derive(Debug, Clone)]
pub enum BoundaryCondition {
    Dirichlet(ScalarFn),
    Neumann(ScalarFn),
    Signorini(ScalarFn),
}

impl BoundaryCondition {
    pub fn kind(&self) -> ConditionKind {
        match self {
            BoundaryCondition::Dirichlet(_) => ConditionKind::Dirichlet,
            BoundaryCondition::Neumann(_) => ConditionKind::Neumann,
            BoundaryCondition::Signorini(_) => ConditionKind::Signorini,
        }
    }

    pub fn data(&self) -> &ScalarFn {
        match self {
            BoundaryCondition::Dirichlet(f)
            | BoundaryCondition::Neumann(f)
            | BoundaryCondition::Signorini(f) => f,
        }
    }
}

/// Which boundary nodes a segment claims. Ranges are closed intervals of the
/// tangential coordinate along the side. `All` is a catch-all: it claims the
/// nodes no other segment claims and competes by priority at the endpoints of
/// the other segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Selector {
    All,
    Side(Side),
    SideRange { side: Side, lo: f64, hi: f64 },
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub id: String,
    pub selector: Selector,
    pub condition: BoundaryCondition,
}

#[derive(Debug, Clone, Default)]
pub struct BoundarySpec {
    segments: Vec<Segment>,
}

impl BoundarySpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, id: &str, selector: Selector, condition: BoundaryCondition) -> Self {
        self.segments.push(Segment {
            id: id.to_string(),
            selector,
            condition,
        });
        self
    }

    /// Every boundary node Dirichlet with the given data.
    pub fn dirichlet_everywhere(data: impl Into<ScalarFn>) -> Self {
        Self::new().with("boundary", Selector::All, BoundaryCondition::Dirichlet(data.into()))
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment_index(&self, id: &str) -> Option<usize> {
        self.segments.iter().position(|s| s.id == id)
    }
}

/// Result of labeling: one segment per boundary node.
#[derive(Debug, Clone)]
pub struct BoundaryLabeling {
    grid_id: u64,
    spec: BoundarySpec,
    node_segment: Vec<Option<usize>>,
    counts: Vec<usize>,
}

impl BoundaryLabeling {
    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn spec(&self) -> &BoundarySpec {
        &self.spec
    }

    pub fn segment_of(&self, node: usize) -> Option<usize> {
        self.node_segment[node]
    }

    pub fn condition_of(&self, node: usize) -> Option<&BoundaryCondition> {
        self.node_segment[node].map(|s| &self.spec.segments[s].condition)
    }

    pub fn kind_of(&self, node: usize) -> Option<ConditionKind> {
        self.condition_of(node).map(BoundaryCondition::kind)
    }

    /// Node counts per segment, in declaration order.
    pub fn counts(&self) -> Vec<(&str, usize)> {
        self.spec
            .segments
            .iter()
            .zip(&self.counts)
            .map(|(s, &c)| (s.id.as_str(), c))
            .collect()
    }

    pub fn count_of(&self, kind: ConditionKind) -> usize {
        self.node_segment
            .iter()
            .flatten()
            .filter(|&&s| self.spec.segments[s].condition.kind() == kind)
            .count()
    }

    /// Nodes labeled by segment `id`.
    pub fn nodes_of(&self, id: &str) -> Result<Vec<usize>> {
        let s = self
            .spec
            .segment_index(id)
            .ok_or_else(|| Error::UnknownSegment(id.to_string()))?;
        Ok(self
            .node_segment
            .iter()
            .enumerate()
            .filter(|(_, seg)| **seg == Some(s))
            .map(|(n, _)| n)
            .collect())
    }
}

/// Assigns every boundary node to exactly one segment.
///
/// A node claimed by several segments is resolved by condition priority
/// (Dirichlet, then Signorini, then Neumann) and then declaration order. Two
/// claims are an error only when the node lies strictly inside both claimed
/// pieces, i.e. the segments genuinely overlap rather than meet.
pub fn label_boundary(grid: &Grid, spec: &BoundarySpec) -> Result<BoundaryLabeling> {
    let eps = grid.coordinate_tolerance();
    for seg in &spec.segments {
        let side = match seg.selector {
            Selector::All => continue,
            Selector::Side(s) | Selector::SideRange { side: s, .. } => s,
        };
        if grid.side_range(side).is_none() {
            return Err(Error::InvalidGrid(format!(
                "segment `{}` refers to side {side:?}, which a {:?} grid does not have",
                seg.id,
                grid.kind()
            )));
        }
    }
    let mut node_segment = vec![None; grid.num_nodes()];
    let mut counts = vec![0; spec.segments.len()];
    for &node in grid.boundary_nodes() {
        // (segment index, node is an endpoint of the claimed piece)
        let mut claims: Vec<(usize, bool)> = Vec::new();
        let mut covered: Vec<Side> = Vec::new();
        for (k, seg) in spec.segments.iter().enumerate() {
            if let Some(endpoint) = claim(grid, node, &seg.selector, eps) {
                if let Selector::Side(s) | Selector::SideRange { side: s, .. } = seg.selector {
                    claims.push((k, endpoint));
                    covered.push(s);
                }
            }
        }
        // the catch-all competes where the node sits on a side that no
        // explicit piece claims it through
        if grid.node(node).sides.iter().any(|s| !covered.contains(s)) {
            claims.extend(
                spec.segments
                    .iter()
                    .position(|seg| seg.selector == Selector::All)
                    .map(|k| (k, true)),
            );
        }
        if claims.is_empty() {
            let x = grid.node(node).x;
            return Err(Error::UncoveredBoundaryNode {
                node,
                x1: x[0],
                x2: x[1],
            });
        }
        for (a, &(ka, ea)) in claims.iter().enumerate() {
            for &(kb, eb) in &claims[a + 1..] {
                if !ea && !eb {
                    return Err(Error::OverlappingSegments {
                        node,
                        first: spec.segments[ka].id.clone(),
                        second: spec.segments[kb].id.clone(),
                    });
                }
            }
        }
        let winner = claims
            .iter()
            .map(|&(k, _)| k)
            .max_by(|&a, &b| {
                let ka = spec.segments[a].condition.kind();
                let kb = spec.segments[b].condition.kind();
                ka.cmp(&kb).then(b.cmp(&a))
            })
            .unwrap();
        node_segment[node] = Some(winner);
        counts[winner] += 1;
    }
    Ok(BoundaryLabeling {
        grid_id: grid.id(),
        spec: spec.clone(),
        node_segment,
        counts,
    })
}

/// `Some(is_endpoint)` if the selector claims the node.
fn claim(grid: &Grid, node: usize, selector: &Selector, eps: f64) -> Option<bool> {
    let n = grid.node(node);
    let at_side_end = |side: Side| {
        let (a, b) = grid.side_range(side).unwrap();
        let t = grid.tangential_coordinate(node, side);
        (t - a).abs() <= eps || (t - b).abs() <= eps
    };
    match *selector {
        Selector::All => Some(true),
        Selector::Side(side) => n.sides.contains(&side).then(|| at_side_end(side)),
        Selector::SideRange { side, lo, hi } => {
            if !n.sides.contains(&side) {
                return None;
            }
            let t = grid.tangential_coordinate(node, side);
            if t < lo - eps || t > hi + eps {
                return None;
            }
            Some((t - lo).abs() <= eps || (t - hi).abs() <= eps || at_side_end(side))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_nodes_and_spacing() {
        let g = Grid::interval(0.0, 1.0, 3).unwrap();
        let xs: Vec<f64> = g.nodes().iter().map(|n| n.x[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.h(), &[0.25]);
        let interior: Vec<f64> = g.interior_nodes().map(|i| g.node(i).x[0]).collect();
        assert_eq!(interior, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn rectangle_counts() {
        let g = Grid::rectangle((0.0, 1.0), (0.0, 1.0), [2, 2]).unwrap();
        assert_eq!(g.num_interior(), 4);
        assert_eq!(g.boundary_nodes().len(), 12);
    }

    #[test]
    fn l_shape_matches_point_in_domain_filter() {
        let g = Grid::l_shape((-1.0, 1.0), (-1.0, 1.0), [5, 5]).unwrap();
        let h = 2.0 / 6.0;
        let mut expected_interior = Vec::new();
        let mut expected_all = 0;
        for j in 0..7 {
            for i in 0..7 {
                let (x1, x2) = (-1.0 + i as f64 * h, -1.0 + j as f64 * h);
                let removed = x1 > 1e-12 && x2 < -1e-12;
                if removed {
                    continue;
                }
                expected_all += 1;
                let on_outer = i == 0 || i == 6 || j == 0 || j == 6;
                let on_cut = (x1.abs() < 1e-12 && x2 <= 1e-12) || (x2.abs() < 1e-12 && x1 >= -1e-12);
                if !on_outer && !on_cut {
                    expected_interior.push((i, j));
                }
            }
        }
        assert_eq!(g.num_nodes(), expected_all);
        let got: Vec<(usize, usize)> = g
            .interior_nodes()
            .map(|k| (g.node(k).lattice[0], g.node(k).lattice[1]))
            .collect();
        assert_eq!(got, expected_interior);
        let corner = g.node_at(3, 3).unwrap();
        assert!(g.node(corner).is_boundary());
        assert_eq!(g.node(corner).x, [0.0, 0.0]);
        assert!(g.interior_nodes().all(|k| !(g.node(k).x[0] > 0.0 && g.node(k).x[1] < 0.0)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Grid::interval(0.0, 1.0, 0).is_err());
        assert!(Grid::interval(1.0, 0.0, 3).is_err());
        assert!(Grid::l_shape((-1.0, 1.0), (-1.0, 1.0), [4, 5]).is_err());
        assert!(Grid::build(DomainKind::Rectangle, &[(0.0, 1.0)], &[3]).is_err());
    }

    #[test]
    fn rebuild_is_deterministic() {
        let a = Grid::l_shape((-1.0, 1.0), (-1.0, 1.0), [7, 7]).unwrap();
        let b = Grid::l_shape((-1.0, 1.0), (-1.0, 1.0), [7, 7]).unwrap();
        assert_eq!(a.nodes(), b.nodes());
        assert_ne!(a.id(), b.id());
    }

    #[test]
    fn interval_dirichlet_labels() {
        let g = Grid::interval(0.0, 1.0, 3).unwrap();
        let l = label_boundary(&g, &BoundarySpec::dirichlet_everywhere(0.0)).unwrap();
        assert_eq!(l.count_of(ConditionKind::Dirichlet), 2);
    }

    #[test]
    fn kinderlehrer_layout() {
        let g = Grid::rectangle((-1.0, 1.0), (0.0, 1.0), [7, 3]).unwrap();
        let spec = BoundarySpec::new()
            .with(
                "contact",
                Selector::SideRange { side: Side::South, lo: -1.0, hi: 0.0 },
                BoundaryCondition::Signorini(0.0.into()),
            )
            .with(
                "free",
                Selector::SideRange { side: Side::South, lo: 0.0, hi: 1.0 },
                BoundaryCondition::Neumann(0.0.into()),
            )
            .with("west", Selector::Side(Side::West), BoundaryCondition::Dirichlet(0.0.into()))
            .with("east", Selector::Side(Side::East), BoundaryCondition::Dirichlet(0.0.into()))
            .with("north", Selector::Side(Side::North), BoundaryCondition::Dirichlet(0.0.into()));
        let l = label_boundary(&g, &spec).unwrap();
        // south row: x = -1, -0.75, ..., 1; corners go to Dirichlet,
        // the switching point x1 = 0 to Signorini.
        let contact = l.nodes_of("contact").unwrap();
        let xs: Vec<f64> = contact.iter().map(|&k| g.node(k).x[0]).collect();
        assert_eq!(xs, vec![-0.75, -0.5, -0.25, 0.0]);
        assert_eq!(l.nodes_of("free").unwrap().len(), 3);
        assert_eq!(l.count_of(ConditionKind::Dirichlet), 2 * 4 + 9);
    }

    #[test]
    fn south_signorini_rest_dirichlet() {
        let g = Grid::rectangle((0.0, 1.0), (0.0, 1.0), [4, 4]).unwrap();
        let spec = BoundarySpec::new()
            .with("contact", Selector::Side(Side::South), BoundaryCondition::Signorini(0.0.into()))
            .with("w", Selector::Side(Side::West), BoundaryCondition::Dirichlet(0.0.into()))
            .with("e", Selector::Side(Side::East), BoundaryCondition::Dirichlet(0.0.into()))
            .with("n", Selector::Side(Side::North), BoundaryCondition::Dirichlet(0.0.into()));
        let l = label_boundary(&g, &spec).unwrap();
        assert_eq!(l.count_of(ConditionKind::Signorini), 4);
        let counts = l.counts();
        assert_eq!(counts[0], ("contact", 4));
    }

    #[test]
    fn uncovered_and_overlapping_are_errors() {
        let g = Grid::rectangle((0.0, 1.0), (0.0, 1.0), [3, 3]).unwrap();
        let partial = BoundarySpec::new().with(
            "w",
            Selector::Side(Side::West),
            BoundaryCondition::Dirichlet(0.0.into()),
        );
        assert!(matches!(
            label_boundary(&g, &partial),
            Err(Error::UncoveredBoundaryNode { .. })
        ));
        let overlap = BoundarySpec::dirichlet_everywhere(0.0)
            .with("s", Selector::Side(Side::South), BoundaryCondition::Signorini(0.0.into()))
            .with(
                "s2",
                Selector::SideRange { side: Side::South, lo: 0.2, hi: 0.8 },
                BoundaryCondition::Neumann(0.0.into()),
            );
        assert!(matches!(
            label_boundary(&g, &overlap),
            Err(Error::OverlappingSegments { .. })
        ));
    }
}
