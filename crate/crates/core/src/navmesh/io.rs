//! Plain-text readers and writers for meshes, scenes, and target sets.
//!
//! All three formats are line-oriented: `#` starts a comment, blank lines are
//! ignored, and numbers on a line are whitespace-separated. Saving a loaded
//! file reproduces it byte for byte.

use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::Point;
use crate::navmesh::{validate, Mesh, Scene};

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

/// Cursor over the meaningful lines of a file, remembering physical line
/// numbers for error reporting.
struct Lines<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    eof_line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Lines<'a> {
        let mut lines = Vec::new();
        let mut count = 0;
        for (i, raw) in text.lines().enumerate() {
            count = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if !content.is_empty() {
                lines.push((i + 1, content));
            }
        }
        Lines { lines, pos: 0, eof_line: count + 1 }
    }

    fn next(&mut self, expected: &str) -> Result<(usize, &'a str), ParseError> {
        match self.lines.get(self.pos) {
            Some(&(no, s)) => {
                self.pos += 1;
                Ok((no, s))
            }
            None => Err(ParseError {
                line: self.eof_line,
                message: format!("unexpected end of file, expected {expected}"),
            }),
        }
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.lines.get(self.pos) {
            Some(&(no, s)) => {
                Err(ParseError { line: no, message: format!("unexpected trailing content: {s}") })
            }
            None => Ok(()),
        }
    }
}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, message: message.into() }
}

fn parse_tokens<T: std::str::FromStr>(
    line: usize,
    s: &str,
    expected: usize,
    what: &str,
) -> Result<Vec<T>, ParseError> {
    let tokens: Vec<&str> = s.split_whitespace().collect();
    if tokens.len() != expected {
        return Err(err(line, format!("expected {expected} {what}, found {}", tokens.len())));
    }
    tokens
        .iter()
        .map(|t| t.parse::<T>().map_err(|_| err(line, format!("invalid {what}: {t}"))))
        .collect()
}

fn parse_point(line: usize, s: &str) -> Result<Point, ParseError> {
    let v: Vec<f64> = parse_tokens(line, s, 2, "coordinates")?;
    let p = Point::new(v[0], v[1]);
    if !p.is_finite() {
        return Err(err(line, "coordinates must be finite"));
    }
    Ok(p)
}

fn expect_header(cursor: &mut Lines, kind: &str) -> Result<(), ParseError> {
    let (no, s) = cursor.next(&format!("`{kind} 1` header"))?;
    if s != format!("{kind} 1") {
        return Err(err(no, format!("expected `{kind} 1` header, found `{s}`")));
    }
    Ok(())
}

fn parse_count(line: usize, token: &str, what: &str) -> Result<usize, ParseError> {
    token.parse::<usize>().map_err(|_| err(line, format!("invalid {what} count: {token}")))
}

/// Parses the `mesh 1` format, assembles the mesh, and checks every mesh
/// invariant; violations surface as parse errors at the offending polygon's
/// line.
pub fn load_mesh(text: &str) -> Result<Mesh, ParseError> {
    let mut cursor = Lines::new(text);
    expect_header(&mut cursor, "mesh")?;
    let (no, s) = cursor.next("vertex and polygon counts")?;
    let counts: Vec<&str> = s.split_whitespace().collect();
    if counts.len() != 2 {
        return Err(err(no, format!("expected `<vertices> <polygons>`, found `{s}`")));
    }
    let nv = parse_count(no, counts[0], "vertex")?;
    let np = parse_count(no, counts[1], "polygon")?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, s) = cursor.next("a vertex line")?;
        vertices.push(parse_point(no, s)?);
    }

    let mut polygons = Vec::with_capacity(np);
    let mut polygon_lines = Vec::with_capacity(np);
    for _ in 0..np {
        let (no, s) = cursor.next("a polygon line")?;
        let tokens: Vec<&str> = s.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(err(no, "empty polygon line"));
        }
        let ring_len = parse_count(no, tokens[0], "ring length")?;
        if ring_len < 3 {
            return Err(err(no, format!("polygon ring length must be at least 3, found {ring_len}")));
        }
        if tokens.len() != 1 + 2 * ring_len {
            return Err(err(
                no,
                format!(
                    "polygon with ring length {ring_len} needs {} values, found {}",
                    2 * ring_len,
                    tokens.len() - 1
                ),
            ));
        }
        let mut ring = Vec::with_capacity(ring_len);
        for t in &tokens[1..1 + ring_len] {
            let v: u32 =
                t.parse().map_err(|_| err(no, format!("invalid vertex index: {t}")))?;
            ring.push(v);
        }
        let mut neighbors = Vec::with_capacity(ring_len);
        for t in &tokens[1 + ring_len..] {
            let n: i64 =
                t.parse().map_err(|_| err(no, format!("invalid neighbor index: {t}")))?;
            if n < -1 || n > u32::MAX as i64 {
                return Err(err(no, format!("neighbor index out of range: {n}")));
            }
            neighbors.push(if n < 0 { None } else { Some(n as u32) });
        }
        polygons.push((ring, neighbors));
        polygon_lines.push(no);
    }
    cursor.finish()?;

    let mesh = Mesh::assemble(vertices, polygons).map_err(|e| {
        let line = match &e {
            crate::navmesh::MeshBuildError::VertexOutOfRange { polygon, .. }
            | crate::navmesh::MeshBuildError::RingTooShort { polygon, .. }
            | crate::navmesh::MeshBuildError::NeighborCountMismatch { polygon, .. }
            | crate::navmesh::MeshBuildError::DegenerateEdge { polygon, .. } => {
                polygon_lines[*polygon]
            }
            _ => polygon_lines.last().copied().unwrap_or(1),
        };
        err(line, e.to_string())
    })?;
    if let Some(issue) = validate(&mesh).first() {
        let line = match issue {
            crate::navmesh::ValidationIssue::RingTooShort { polygon }
            | crate::navmesh::ValidationIssue::NeighborCountMismatch { polygon }
            | crate::navmesh::ValidationIssue::VertexOutOfRange { polygon, .. }
            | crate::navmesh::ValidationIssue::DuplicateRingVertex { polygon, .. }
            | crate::navmesh::ValidationIssue::WoundClockwise { polygon }
            | crate::navmesh::ValidationIssue::NotConvex { polygon, .. }
            | crate::navmesh::ValidationIssue::NeighborOutOfRange { polygon, .. }
            | crate::navmesh::ValidationIssue::SelfNeighbor { polygon }
            | crate::navmesh::ValidationIssue::AsymmetricAdjacency { polygon, .. }
            | crate::navmesh::ValidationIssue::NeighborWithoutSharedEdge { polygon, .. } => {
                polygon_lines.get(*polygon).copied().unwrap_or(1)
            }
        };
        return Err(err(line, issue.to_string()));
    }
    Ok(mesh)
}

pub fn save_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    out.push_str("mesh 1\n");
    let _ = writeln!(out, "{} {}", mesh.vertices.len(), mesh.polygons.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{} {}", v.x, v.y);
    }
    for p in &mesh.polygons {
        let _ = write!(out, "{}", p.vertices.len());
        for &v in &p.vertices {
            let _ = write!(out, " {v}");
        }
        for &n in &p.neighbors {
            match n {
                Some(id) => {
                    let _ = write!(out, " {id}");
                }
                None => out.push_str(" -1"),
            }
        }
        out.push('\n');
    }
    out
}

/// One polygon ring on a line: `ringlen x y x y ...`.
fn parse_ring(no: usize, s: &str) -> Result<Vec<Point>, ParseError> {
    let tokens: Vec<&str> = s.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(err(no, "empty polygon line"));
    }
    let ring_len = parse_count(no, tokens[0], "ring length")?;
    if ring_len < 3 {
        return Err(err(no, format!("polygon ring length must be at least 3, found {ring_len}")));
    }
    if tokens.len() != 1 + 2 * ring_len {
        return Err(err(
            no,
            format!(
                "polygon with ring length {ring_len} needs {} coordinates, found {}",
                2 * ring_len,
                tokens.len() - 1
            ),
        ));
    }
    let mut ring = Vec::with_capacity(ring_len);
    for pair in tokens[1..].chunks(2) {
        let x: f64 =
            pair[0].parse().map_err(|_| err(no, format!("invalid coordinate: {}", pair[0])))?;
        let y: f64 =
            pair[1].parse().map_err(|_| err(no, format!("invalid coordinate: {}", pair[1])))?;
        ring.push(Point::new(x, y));
    }
    Ok(ring)
}

/// Parses the `scene 1` format: boundary box, obstacle rings, targets.
pub fn load_scene(text: &str) -> Result<Scene, ParseError> {
    let mut cursor = Lines::new(text);
    expect_header(&mut cursor, "scene")?;
    let (no, s) = cursor.next("boundary `xmin ymin xmax ymax`")?;
    let b: Vec<f64> = parse_tokens(no, s, 4, "boundary coordinates")?;
    let boundary = (Point::new(b[0], b[1]), Point::new(b[2], b[3]));

    let (no, s) = cursor.next("obstacle count")?;
    let n_obstacles = parse_count(no, s, "obstacle")?;
    let mut obstacles = Vec::with_capacity(n_obstacles);
    for _ in 0..n_obstacles {
        let (no, s) = cursor.next("an obstacle line")?;
        obstacles.push(parse_ring(no, s)?);
    }

    let (no, s) = cursor.next("target count")?;
    let n_targets = parse_count(no, s, "target")?;
    let mut targets = Vec::with_capacity(n_targets);
    for _ in 0..n_targets {
        let (no, s) = cursor.next("a target line")?;
        targets.push(parse_point(no, s)?);
    }
    cursor.finish()?;

    Scene::new(boundary, obstacles, targets).map_err(|e| err(1, e.to_string()))
}

pub fn save_scene(scene: &Scene) -> String {
    let mut out = String::new();
    out.push_str("scene 1\n");
    let (lo, hi) = scene.boundary;
    let _ = writeln!(out, "{} {} {} {}", lo.x, lo.y, hi.x, hi.y);
    let _ = writeln!(out, "{}", scene.obstacles.len());
    for ring in &scene.obstacles {
        let _ = write!(out, "{}", ring.len());
        for p in ring {
            let _ = write!(out, " {} {}", p.x, p.y);
        }
        out.push('\n');
    }
    let _ = writeln!(out, "{}", scene.targets.len());
    for t in &scene.targets {
        let _ = writeln!(out, "{} {}", t.x, t.y);
    }
    out
}

/// Parses the `targets 1` format: a count line, then one `x y` per line.
pub fn load_targets(text: &str) -> Result<Vec<Point>, ParseError> {
    let mut cursor = Lines::new(text);
    expect_header(&mut cursor, "targets")?;
    let (no, s) = cursor.next("target count")?;
    let n = parse_count(no, s, "target")?;
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let (no, s) = cursor.next("a target line")?;
        targets.push(parse_point(no, s)?);
    }
    cursor.finish()?;
    Ok(targets)
}

pub fn save_targets(targets: &[Point]) -> String {
    let mut out = String::new();
    out.push_str("targets 1\n");
    let _ = writeln!(out, "{}", targets.len());
    for t in targets {
        let _ = writeln!(out, "{} {}", t.x, t.y);
    }
    out
}

/// Parses the `polys 1` format: a count line, then one ring per line as
/// `ringlen x y x y ...`, the raw material for tiled map generation.
pub fn load_polygons(text: &str) -> Result<Vec<Vec<Point>>, ParseError> {
    let mut cursor = Lines::new(text);
    expect_header(&mut cursor, "polys")?;
    let (no, s) = cursor.next("polygon count")?;
    let n = parse_count(no, s, "polygon")?;
    let mut polys = Vec::with_capacity(n);
    for _ in 0..n {
        let (no, s) = cursor.next("a polygon line")?;
        polys.push(parse_ring(no, s)?);
    }
    cursor.finish()?;
    Ok(polys)
}

pub fn save_polygons(polys: &[Vec<Point>]) -> String {
    let mut out = String::new();
    out.push_str("polys 1\n");
    let _ = writeln!(out, "{}", polys.len());
    for ring in polys {
        let _ = write!(out, "{}", ring.len());
        for p in ring {
            let _ = write!(out, " {} {}", p.x, p.y);
        }
        out.push('\n');
    }
    out
}
