//! Triangle meshes with per-vertex colors, OBJ I/O, and the bundled
//! procedural shapes used by tests, benchmarks, and recovery targets.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::{norm3, normalize3, scale3, Vec3};

pub const DEFAULT_GRAY: Vec3 = [0.7, 0.7, 0.7];

/// Triangle mesh: the optimization variable of the whole pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    /// Per-vertex RGB in [0, 1]; same length as `vertices`.
    pub colors: Vec<Vec3>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, colors: Vec<Vec3>) -> Result<Self> {
        if colors.len() != vertices.len() {
            return Err(Error::InvalidConfig(format!(
                "colors length {} != vertex count {}",
                colors.len(),
                vertices.len()
            )));
        }
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i >= vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        line: 0,
                        index: i,
                        n_vertices: vertices.len(),
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidConfig(format!(
                    "face {fi} repeats a vertex index: {f:?}"
                )));
            }
        }
        Ok(Mesh { vertices, faces, colors })
    }

    pub fn with_uniform_color(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, color: Vec3) -> Result<Self> {
        let colors = vec![color; vertices.len()];
        Mesh::new(vertices, faces, colors)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    /// Largest vertex Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        self.vertices.iter().map(|v| norm3(*v)).fold(0.0, f64::max)
    }

    /// Uniformly scale so the maximum vertex norm is exactly 1.
    pub fn scale_to_unit_norm(&mut self) {
        let m = self.max_norm();
        if m > 0.0 {
            for v in &mut self.vertices {
                *v = scale3(*v, 1.0 / m);
            }
        }
    }

    /// Apply a 3x3 linear map to every vertex.
    pub fn transform(&mut self, m: &crate::math::Mat3) {
        for v in &mut self.vertices {
            *v = crate::math::mat3_mul_vec3(m, *v);
        }
    }

    /// Vertex adjacency sets (sorted, deduplicated), used by the Laplacian loss.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.vertices.len()];
        for f in &self.faces {
            for k in 0..3 {
                let a = f[k];
                let b = f[(k + 1) % 3];
                nbrs[a].push(b);
                nbrs[b].push(a);
            }
        }
        for n in &mut nbrs {
            n.sort_unstable();
            n.dedup();
        }
        nbrs
    }

    /// Interior edges as (v_lo, v_hi, face_a, face_b); edges with exactly two
    /// incident faces. Boundary and non-manifold edges are omitted.
    pub fn interior_edges(&self) -> Vec<(usize, usize, usize, usize)> {
        use std::collections::HashMap;
        let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                by_edge.entry(key).or_default().push(fi);
            }
        }
        let mut edges: Vec<_> = by_edge
            .into_iter()
            .filter(|(_, faces)| faces.len() == 2)
            .map(|((a, b), faces)| (a, b, faces[0], faces[1]))
            .collect();
        edges.sort_unstable();
        edges
    }
}

/// Load an ASCII OBJ file. Supports `v x y z [r g b]` and (fan-triangulated)
/// `f` records; indices are converted to 0-based. Vertices without the
/// color extension default to 0.7 gray.
pub fn load_obj(path: &Path) -> Result<Mesh> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut colors: Vec<Vec3> = Vec::new();
    let mut faces: Vec<([usize; 3], usize)> = Vec::new();
    let mut any_color = false;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let nums: Vec<f64> = tok
                    .map(|s| {
                        s.parse::<f64>().map_err(|_| Error::Parse {
                            line: lineno,
                            msg: format!("bad number '{s}' in vertex record"),
                        })
                    })
                    .collect::<Result<_>>()?;
                match nums.len() {
                    3 => {
                        vertices.push([nums[0], nums[1], nums[2]]);
                        colors.push(DEFAULT_GRAY);
                    }
                    6 => {
                        vertices.push([nums[0], nums[1], nums[2]]);
                        colors.push([
                            nums[3].clamp(0.0, 1.0),
                            nums[4].clamp(0.0, 1.0),
                            nums[5].clamp(0.0, 1.0),
                        ]);
                        any_color = true;
                    }
                    n => {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("vertex record has {n} numbers, expected 3 or 6"),
                        })
                    }
                }
            }
            Some("f") => {
                let idx: Vec<usize> = tok
                    .map(|s| {
                        let head = s.split('/').next().unwrap_or("");
                        head.parse::<i64>()
                            .ok()
                            .filter(|&i| i > 0)
                            .map(|i| (i - 1) as usize)
                            .ok_or_else(|| Error::Parse {
                                line: lineno,
                                msg: format!("bad face index '{s}' (expected positive integer)"),
                            })
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("face has {} indices, expected at least 3", idx.len()),
                    });
                }
                for k in 1..idx.len() - 1 {
                    faces.push(([idx[0], idx[k], idx[k + 1]], lineno));
                }
            }
            _ => {} // comments, normals, texcoords, groups
        }
    }

    if vertices.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no vertex records".into() });
    }
    if faces.is_empty() {
        return Err(Error::Parse { line: 0, msg: "no face records".into() });
    }
    for (f, lineno) in &faces {
        for &i in f {
            if i >= vertices.len() {
                return Err(Error::IndexOutOfRange {
                    line: *lineno,
                    index: i + 1,
                    n_vertices: vertices.len(),
                });
            }
        }
    }
    let _ = any_color;
    Mesh::new(vertices, faces.into_iter().map(|(f, _)| f).collect(), colors)
}

/// Write an OBJ with the 6-float vertex-color extension.
pub fn save_obj(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (v, c) in mesh.vertices.iter().zip(&mesh.colors) {
        writeln!(out, "v {} {} {} {} {} {}", v[0], v[1], v[2], c[0], c[1], c[2])?;
    }
    for f in &mesh.faces {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

/// Axis-aligned cube with half-edge `h`, 8 vertices / 12 faces,
/// outward-oriented, corner-keyed vertex colors.
pub fn cube(h: f64) -> Mesh {
    let mut vertices = Vec::with_capacity(8);
    let mut colors = Vec::with_capacity(8);
    for i in 0..8 {
        let x = if i & 1 == 0 { -h } else { h };
        let y = if i & 2 == 0 { -h } else { h };
        let z = if i & 4 == 0 { -h } else { h };
        vertices.push([x, y, z]);
        colors.push([
            0.25 + 0.5 * ((i & 1) as f64),
            0.25 + 0.5 * (((i >> 1) & 1) as f64),
            0.25 + 0.5 * (((i >> 2) & 1) as f64),
        ]);
    }
    #[rustfmt::skip]
    let faces: Vec<[usize; 3]> = vec![
        [0, 2, 1], [1, 2, 3], // z = -h
        [4, 5, 6], [5, 7, 6], // z = +h
        [0, 1, 4], [1, 5, 4], // y = -h
        [2, 6, 3], [3, 6, 7], // y = +h
        [0, 4, 2], [2, 4, 6], // x = -h
        [1, 3, 5], [3, 7, 5], // x = +h
    ];
    Mesh::new(vertices, faces, colors).expect("cube construction is valid")
}

/// UV sphere with `sectors` longitudinal and `stacks` latitudinal divisions.
/// Vertex count is `sectors * (stacks - 1) + 2`, face count `2 * sectors * (stacks - 1)`.
/// `uv_sphere(45, 31)` gives the 1352-vertex / 2700-face deformation template.
pub fn uv_sphere(sectors: usize, stacks: usize) -> Mesh {
    assert!(sectors >= 3 && stacks >= 2);
    let mut vertices = Vec::new();
    vertices.push([0.0, 1.0, 0.0]); // north pole (y-up)
    for i in 1..stacks {
        let phi = std::f64::consts::PI * i as f64 / stacks as f64;
        let (sp, cp) = phi.sin_cos();
        for j in 0..sectors {
            let theta = 2.0 * std::f64::consts::PI * j as f64 / sectors as f64;
            let (st, ct) = theta.sin_cos();
            vertices.push([sp * ct, cp, sp * st]);
        }
    }
    vertices.push([0.0, -1.0, 0.0]); // south pole
    let south = vertices.len() - 1;

    let ring = |i: usize, j: usize| 1 + (i - 1) * sectors + (j % sectors);
    let mut faces = Vec::new();
    for j in 0..sectors {
        faces.push([0, ring(1, j + 1), ring(1, j)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..sectors {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j), ring(i + 1, j + 1));
            faces.push([a, b, c]);
            faces.push([b, d, c]);
        }
    }
    for j in 0..sectors {
        faces.push([south, ring(stacks - 1, j), ring(stacks - 1, j + 1)]);
    }
    Mesh::with_uniform_color(vertices, faces, DEFAULT_GRAY).expect("uv sphere is valid")
}

/// Icosahedron, 12 vertices / 20 faces, unit circumradius.
pub fn icosahedron() -> Mesh {
    let phi = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let s = 1.0 / (1.0 + phi * phi).sqrt();
    let (a, b) = (s, phi * s);
    let vertices: Vec<Vec3> = vec![
        [-a, b, 0.0], [a, b, 0.0], [-a, -b, 0.0], [a, -b, 0.0],
        [0.0, -a, b], [0.0, a, b], [0.0, -a, -b], [0.0, a, -b],
        [b, 0.0, -a], [b, 0.0, a], [-b, 0.0, -a], [-b, 0.0, a],
    ];
    #[rustfmt::skip]
    let faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    Mesh::with_uniform_color(vertices, faces, DEFAULT_GRAY).expect("icosahedron is valid")
}

/// Icosphere: icosahedron subdivided `subdiv` times and reprojected to the
/// unit sphere. Face count is 20 * 4^subdiv (subdiv 3 -> 1280 faces).
pub fn icosphere(subdiv: usize) -> Mesh {
    use std::collections::HashMap;
    let mut mesh = icosahedron();
    for _ in 0..subdiv {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut vertices = mesh.vertices.clone();
        let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let m = normalize3([
                    (vertices[a][0] + vertices[b][0]) / 2.0,
                    (vertices[a][1] + vertices[b][1]) / 2.0,
                    (vertices[a][2] + vertices[b][2]) / 2.0,
                ]);
                vertices.push(m);
                vertices.len() - 1
            })
        };
        for f in &mesh.faces {
            let ab = mid(f[0], f[1], &mut vertices);
            let bc = mid(f[1], f[2], &mut vertices);
            let ca = mid(f[2], f[0], &mut vertices);
            faces.push([f[0], ab, ca]);
            faces.push([f[1], bc, ab]);
            faces.push([f[2], ca, bc]);
            faces.push([ab, bc, ca]);
        }
        mesh = Mesh::with_uniform_color(vertices, faces, DEFAULT_GRAY).expect("subdivision is valid");
    }
    mesh
}

/// Low-poly stand-in for a cow-like test subject: an ellipsoidal body with a
/// head bulge, built as a star-shaped radial displacement of an icosphere.
/// 162 vertices / 320 faces, scaled to unit max norm, smoothly colored.
pub fn cow_proxy() -> Mesh {
    let base = icosphere(2);
    let head_dir = normalize3([0.8, 0.45, 0.0]);
    let mut vertices = Vec::with_capacity(base.n_vertices());
    let mut colors = Vec::with_capacity(base.n_vertices());
    for n in &base.vertices {
        // radial distance to an ellipsoid with semi-axes (0.95, 0.55, 0.5)
        let q = (n[0] / 0.95).powi(2) + (n[1] / 0.55).powi(2) + (n[2] / 0.5).powi(2);
        let r_body = 1.0 / q.sqrt();
        let ang = crate::math::dot3(*n, head_dir).clamp(-1.0, 1.0).acos();
        let r_head = 0.38 * (-(ang * ang) / (2.0 * 0.45_f64.powi(2))).exp();
        let r = r_body + r_head;
        vertices.push(scale3(*n, r));
        // brown back fading to a pale belly
        let s = ((0.5 - n[1]) * 0.9).clamp(0.0, 1.0);
        colors.push([
            0.45 + 0.40 * s,
            0.27 + 0.48 * s,
            0.15 + 0.55 * s,
        ]);
    }
    let mut mesh = Mesh::new(vertices, base.faces, colors).expect("cow proxy is valid");
    mesh.scale_to_unit_norm();
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_counts() {
        let m = cube(0.5);
        assert_eq!(m.n_vertices(), 8);
        assert_eq!(m.n_faces(), 12);
    }

    #[test]
    fn obj_roundtrip_cube() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.obj");
        let m = cube(0.5);
        save_obj(&m, &path).unwrap();
        let loaded = load_obj(&path).unwrap();
        assert_eq!(loaded.n_vertices(), 8);
        assert_eq!(loaded.n_faces(), 12);
        assert_eq!(loaded.faces, m.faces);
        for (a, b) in loaded.vertices.iter().zip(&m.vertices) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn obj_out_of_range_index() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.obj");
        let mut text = String::new();
        for _ in 0..8 {
            text.push_str("v 0 0 0\n");
        }
        text.push_str("f 1 2 9\n");
        std::fs::write(&path, text).unwrap();
        match load_obj(&path) {
            Err(Error::IndexOutOfRange { line, index, n_vertices }) => {
                assert_eq!(line, 9);
                assert_eq!(index, 9);
                assert_eq!(n_vertices, 8);
            }
            other => panic!("expected index error, got {other:?}"),
        }
    }

    #[test]
    fn obj_parse_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.obj");
        std::fs::write(&path, "v 0 0 0\nv 0 0 zero\n").unwrap();
        match load_obj(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn sphere_template_dimensions() {
        // deformation template: 1352 vertices, 2700 faces
        let m = uv_sphere(45, 31);
        assert_eq!(m.n_vertices(), 1352);
        assert_eq!(m.n_faces(), 2700);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sphere.obj");
        save_obj(&m, &path).unwrap();
        let loaded = load_obj(&path).unwrap();
        assert_eq!(loaded.n_vertices(), 1352);
        assert_eq!(loaded.n_faces(), 2700);
    }

    #[test]
    fn icosphere_face_counts() {
        assert_eq!(icosphere(0).n_faces(), 20);
        assert_eq!(icosphere(2).n_faces(), 320);
        assert_eq!(icosphere(3).n_faces(), 1280);
        let m = icosphere(3);
        assert_eq!(m.n_vertices(), 642);
        for v in &m.vertices {
            assert!((norm3(*v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_index_rejected() {
        let r = Mesh::with_uniform_color(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 1]],
            DEFAULT_GRAY,
        );
        assert!(r.is_err());
    }

    #[test]
    fn cow_proxy_is_unit_norm() {
        let m = cow_proxy();
        assert_eq!(m.n_faces(), 320);
        assert!((m.max_norm() - 1.0).abs() < 1e-9);
    }
}
