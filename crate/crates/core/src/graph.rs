//! Exact level-`m` approximations `V_m` of the gasket.
//!
//! Coordinates are dyadic rationals in the basis `(1, √3)`: a point is stored
//! as `(x, y)` meaning `(x, y·√3)`. Midpoints coincide exactly, so vertices
//! are deduplicated by exact key.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use crate::cell::CellWord;
use crate::error::{usage, Error, Result};
use crate::MAX_LEVEL;

/// A point `(x, y·√3)` with exact rational `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub x: Rational64,
    /// Coefficient of `√3` in the second coordinate.
    pub y_sqrt3: Rational64,
}

impl Coord {
    pub fn new(x: Rational64, y_sqrt3: Rational64) -> Self {
        Coord { x, y_sqrt3 }
    }

    /// The boundary vertex `p_i`, `i ∈ {1,2,3}`.
    pub fn corner(i: u8) -> Coord {
        let half = Rational64::new(1, 2);
        match i {
            1 => Coord::new(Rational64::zero(), Rational64::zero()),
            2 => Coord::new(Rational64::from_integer(1), Rational64::zero()),
            3 => Coord::new(half, half),
            _ => panic!("corner index {i} outside 1..=3"),
        }
    }

    pub fn midpoint(&self, other: &Coord) -> Coord {
        let half = Rational64::new(1, 2);
        Coord::new((self.x + other.x) * half, (self.y_sqrt3 + other.y_sqrt3) * half)
    }

    /// The contraction `F_i(z) = (z + p_i)/2`.
    pub fn contract(&self, i: u8) -> Coord {
        self.midpoint(&Coord::corner(i))
    }

    /// Exact squared Euclidean distance.
    pub fn dist2(&self, other: &Coord) -> Rational64 {
        let dx = self.x - other.x;
        let dy = self.y_sqrt3 - other.y_sqrt3;
        dx * dx + Rational64::from_integer(3) * dy * dy
    }

    pub fn to_f64(&self) -> (f64, f64) {
        let x = self.x.to_f64().unwrap_or(f64::NAN);
        let y = self.y_sqrt3.to_f64().unwrap_or(f64::NAN);
        (x, y * SQRT_3)
    }
}

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// A vertex of `V_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: usize,
    pub coord: Coord,
    /// Member of `V_0`.
    pub boundary: bool,
}

/// `V_m` with its edges and cells. Immutable after construction.
#[derive(Debug, Clone)]
pub struct LevelGraph {
    level: u8,
    vertices: Vec<Vertex>,
    index: BTreeMap<Coord, usize>,
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
    cells: Vec<[u32; 3]>,
    vertex_cells: Vec<[u32; 2]>,
}

const NO_CELL: u32 = u32::MAX;

impl LevelGraph {
    /// Builds `V_m`. Vertex ids 0, 1, 2 are `p1, p2, p3`; the remaining ids
    /// follow the first appearance of each corner when cells are visited in
    /// lexicographic word order.
    pub fn build(level: u8) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::Capacity(alloc::format!(
                "level {level} exceeds the memory guard {MAX_LEVEL}"
            )));
        }

        // Corner coordinates of every cell, refined level by level; the
        // corners of child i of a cell with corners q are (q_i + q_j)/2.
        let mut cell_coords: Vec<[Coord; 3]> =
            alloc::vec![[Coord::corner(1), Coord::corner(2), Coord::corner(3)]];
        for _ in 0..level {
            let mut next = Vec::with_capacity(cell_coords.len() * 3);
            for q in &cell_coords {
                for i in 0..3 {
                    next.push([q[i].midpoint(&q[0]), q[i].midpoint(&q[1]), q[i].midpoint(&q[2])]);
                }
            }
            cell_coords = next;
        }

        let mut vertices = Vec::with_capacity(vertex_count(level));
        let mut index = BTreeMap::new();
        for i in 1..=3u8 {
            let coord = Coord::corner(i);
            index.insert(coord, vertices.len());
            vertices.push(Vertex { id: vertices.len(), coord, boundary: true });
        }

        let mut cells = Vec::with_capacity(cell_coords.len());
        for q in &cell_coords {
            let mut ids = [0u32; 3];
            for (slot, c) in ids.iter_mut().zip(q.iter()) {
                let id = *index.entry(*c).or_insert_with(|| {
                    vertices.push(Vertex { id: vertices.len(), coord: *c, boundary: false });
                    vertices.len() - 1
                });
                *slot = id as u32;
            }
            cells.push(ids);
        }

        let mut edges = Vec::with_capacity(cells.len() * 3);
        let mut adjacency = alloc::vec![Vec::with_capacity(4); vertices.len()];
        let mut vertex_cells = alloc::vec![[NO_CELL; 2]; vertices.len()];
        for (ci, c) in cells.iter().enumerate() {
            for (a, b) in [(c[0], c[1]), (c[0], c[2]), (c[1], c[2])] {
                edges.push((a.min(b), a.max(b)));
                adjacency[a as usize].push(b);
                adjacency[b as usize].push(a);
            }
            for &v in c {
                let slot = &mut vertex_cells[v as usize];
                if slot[0] == NO_CELL {
                    slot[0] = ci as u32;
                } else {
                    slot[1] = ci as u32;
                }
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }

        Ok(LevelGraph { level, vertices, index, edges, adjacency, cells, vertex_cells })
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex(&self, id: usize) -> Result<&Vertex> {
        self.vertices.get(id).ok_or_else(|| usage!("unknown vertex id {id}"))
    }

    pub fn is_boundary(&self, id: usize) -> bool {
        id < 3
    }

    pub fn vertex_at(&self, coord: &Coord) -> Option<usize> {
        self.index.get(coord).copied()
    }

    /// Unordered edges `(i, j)` with `i < j`, grouped by cell.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Corner ids of every cell in lexicographic word order.
    pub fn cells(&self) -> &[[u32; 3]] {
        &self.cells
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Vertices sharing a level-`m` cell with `v` (all at distance `2^{-m}`),
    /// sorted by id. Points facing each other across a removed triangle are
    /// also `2^{-m}` apart from level 2 on, but are not neighbours.
    pub fn neighbors(&self, v: usize) -> Result<&[u32]> {
        self.adjacency.get(v).map(|a| a.as_slice()).ok_or_else(|| usage!("unknown vertex id {v}"))
    }

    /// Indices of the level-`m` cells containing `v` (one or two).
    pub fn cells_of_vertex(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.vertex_cells[v].iter().filter(|&&c| c != NO_CELL).map(|&c| c as usize)
    }

    /// `(F_[w](p1), F_[w](p2), F_[w](p3))` as vertex ids.
    pub fn cell_corners(&self, word: &CellWord) -> Result<[usize; 3]> {
        if word.len() != self.level as usize {
            return Err(usage!(
                "cell word {word} has length {} but the graph has level {}",
                word.len(),
                self.level
            ));
        }
        let c = self.cells[word.index()];
        Ok([c[0] as usize, c[1] as usize, c[2] as usize])
    }

    /// For `self` at level `m+1` and `coarse` at level `m`: the id in `self`
    /// of `F_i(x)` for every vertex `x` of `coarse`, i.e. the pull-back map
    /// turning a table `u` on `V_{m+1}` into `u ∘ F_i` on `V_m`.
    pub fn pullback(&self, coarse: &LevelGraph, i: u8) -> Result<Vec<usize>> {
        if self.level != coarse.level + 1 {
            return Err(usage!("pullback needs consecutive levels"));
        }
        coarse
            .vertices
            .iter()
            .map(|v| {
                self.vertex_at(&v.coord.contract(i))
                    .ok_or_else(|| usage!("F_{i} image of vertex {} missing", v.id))
            })
            .collect()
    }

    /// Ids in `self` of the vertices of a coarser graph (`V_k ⊂ V_m`).
    pub fn embed(&self, coarse: &LevelGraph) -> Result<Vec<usize>> {
        if coarse.level > self.level {
            return Err(usage!("cannot embed a finer graph into a coarser one"));
        }
        coarse
            .vertices
            .iter()
            .map(|v| self.vertex_at(&v.coord).ok_or_else(|| usage!("vertex {} missing", v.id)))
            .collect()
    }

    /// Step size `2^{-m}` squared.
    pub fn edge_length2(&self) -> Rational64 {
        Rational64::new(1, 1i64 << (2 * self.level as u32))
    }
}

/// `|V_m| = (3^{m+1} + 3) / 2`.
pub fn vertex_count(level: u8) -> usize {
    (3usize.pow(level as u32 + 1) + 3) / 2
}

/// `|E_m| = 3^{m+1}`.
pub fn edge_count(level: u8) -> usize {
    3usize.pow(level as u32 + 1)
}
