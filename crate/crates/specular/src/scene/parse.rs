//! Scene file loader.
//!
//! Grammar (line-oriented; `#` starts a comment, blank lines are ignored;
//! a block keyword starts a block, indented or not — block membership is by
//! order, not indentation):
//!
//! ```text
//! camera                      # exactly one
//!   position X Y Z
//!   look_at X Y Z
//!   up X Y Z                  # optional, default 0 1 0
//!   fov_y DEG                 # optional, default 45
//!   resolution W H            # optional, default 256 256
//!
//! light                       # zero or more
//!   position X Y Z
//!   power R G B               # optional, default 1 1 1
//!
//! specular                    # zero or more
//!   mode interpolated|face    # optional, default interpolated
//!   eta ETA_OUT ETA_IN        # optional, default 1 1 (mirror); eta_out is
//!                             # the medium the geometric normal points into
//!   vertex X Y Z NX NY NZ     # exactly three (position + shading normal)
//!
//! occluder                    # zero or more; diffuse geometry / receivers
//!   albedo R G B              # optional, default 0.5 0.5 0.5
//!   vertex X Y Z              # exactly three
//!
//! occluder_mesh PATH          # zero or more; PATH relative to the scene
//!                             # file, one triangle per line as 9 floats
//! ```
//!
//! Commented example fixtures for each chain type live in the repository's
//! `scenes/` directory (r_mirror.scn, t_interface.scn, rr_periscope.scn).

use std::path::Path;

use super::{
    Camera, NormalMode, PointLight, Scene, SceneError, SpecularTriangle, Triangle, Vec3,
};

struct Cursor<'a> {
    lines: std::iter::Peekable<std::vec::IntoIter<(usize, &'a str)>>,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                let l = l.split('#').next().unwrap_or("").trim();
                (i + 1, l)
            })
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Cursor { lines: lines.into_iter().peekable() }
    }

    fn peek(&mut self) -> Option<(usize, &'a str)> {
        self.lines.peek().copied()
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        self.lines.next()
    }
}

fn err(line: usize, msg: impl Into<String>) -> SceneError {
    SceneError::Parse { line, msg: msg.into() }
}

fn parse_floats(line: usize, rest: &str, n: usize) -> Result<Vec<f64>, SceneError> {
    let vals: Result<Vec<f64>, _> = rest.split_whitespace().map(str::parse::<f64>).collect();
    let vals = vals.map_err(|e| err(line, format!("expected {n} numbers: {e}")))?;
    if vals.len() != n {
        return Err(err(line, format!("expected {n} numbers, found {}", vals.len())));
    }
    if let Some(bad) = vals.iter().find(|v| !v.is_finite()) {
        return Err(err(line, format!("non-finite value {bad}")));
    }
    Ok(vals)
}

fn vec3(line: usize, rest: &str) -> Result<Vec3, SceneError> {
    let v = parse_floats(line, rest, 3)?;
    Ok(Vec3::new(v[0], v[1], v[2]))
}

const BLOCK_KEYWORDS: [&str; 5] = ["camera", "light", "specular", "occluder", "occluder_mesh"];

fn split_keyword(line: &str) -> (&str, &str) {
    match line.split_once(char::is_whitespace) {
        Some((k, rest)) => (k, rest.trim()),
        None => (line, ""),
    }
}

/// Loads and fully validates a scene file. Parse and validation errors carry
/// the offending line number.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut cur = Cursor::new(&text);

    let mut camera: Option<Camera> = None;
    let mut lights = Vec::new();
    let mut speculars: Vec<(usize, SpecularTriangle)> = Vec::new();
    let mut occluders: Vec<(usize, Triangle)> = Vec::new();

    while let Some((line, l)) = cur.next() {
        let (kw, rest) = split_keyword(l);
        match kw {
            "camera" => {
                if camera.is_some() {
                    return Err(err(line, "duplicate camera block"));
                }
                camera = Some(parse_camera(&mut cur, line)?);
            }
            "light" => lights.push(parse_light(&mut cur, line)?),
            "specular" => speculars.push((line, parse_specular(&mut cur, line)?)),
            "occluder" => occluders.push((line, parse_occluder(&mut cur, line)?)),
            "occluder_mesh" => {
                if rest.is_empty() {
                    return Err(err(line, "occluder_mesh requires a path"));
                }
                let mesh_path = path.parent().unwrap_or(Path::new(".")).join(rest);
                let mesh_text = std::fs::read_to_string(&mesh_path).map_err(|e| {
                    err(line, format!("cannot read occluder mesh {}: {e}", mesh_path.display()))
                })?;
                for (i, ml) in mesh_text.lines().enumerate() {
                    let ml = ml.split('#').next().unwrap_or("").trim();
                    if ml.is_empty() {
                        continue;
                    }
                    let v = parse_floats(i + 1, ml, 9)?;
                    occluders.push((
                        line,
                        Triangle {
                            positions: [
                                Vec3::new(v[0], v[1], v[2]),
                                Vec3::new(v[3], v[4], v[5]),
                                Vec3::new(v[6], v[7], v[8]),
                            ],
                            albedo: [0.5; 3],
                        },
                    ));
                }
            }
            other => return Err(err(line, format!("unknown block keyword '{other}'"))),
        }
    }

    let camera = camera.ok_or(SceneError::MissingCamera)?;
    let spec_lines: Vec<usize> = speculars.iter().map(|(l, _)| *l).collect();
    let occ_lines: Vec<usize> = occluders.iter().map(|(l, _)| *l).collect();
    let scene = Scene::new(
        speculars.into_iter().map(|(_, t)| t).collect(),
        occluders.into_iter().map(|(_, t)| t).collect(),
        lights,
        camera,
    );
    // attach line context to per-triangle validation failures
    scene.map_err(|e| match e {
        SceneError::DegenerateTriangle { index } => {
            err(spec_lines[index], "degenerate specular triangle (area below eps_geom)")
        }
        SceneError::InconsistentNormal { index } => err(
            spec_lines[index],
            "shading normal opposes the geometric normal",
        ),
        SceneError::BadIor { index } => err(spec_lines[index], "non-positive refractive index"),
        SceneError::DegenerateOccluder { index } => {
            err(occ_lines[index], "degenerate occluder triangle (area below eps_geom)")
        }
        other => other,
    })
}

/// Consume `key value` lines until the next block keyword; dispatch by key.
fn each_field(
    cur: &mut Cursor,
    mut f: impl FnMut(usize, &str, &str) -> Result<(), SceneError>,
) -> Result<(), SceneError> {
    while let Some((line, l)) = cur.peek() {
        let (kw, rest) = split_keyword(l);
        if BLOCK_KEYWORDS.contains(&kw) {
            break;
        }
        cur.next();
        f(line, kw, rest)?;
    }
    Ok(())
}

fn parse_camera(cur: &mut Cursor, start: usize) -> Result<Camera, SceneError> {
    let mut position = None;
    let mut look_at = None;
    let mut up = Vec3::new(0.0, 1.0, 0.0);
    let mut fov_y_deg = 45.0;
    let mut resolution = (256u32, 256u32);
    each_field(cur, |line, kw, rest| {
        match kw {
            "position" => position = Some(vec3(line, rest)?),
            "look_at" => look_at = Some(vec3(line, rest)?),
            "up" => up = vec3(line, rest)?,
            "fov_y" => fov_y_deg = parse_floats(line, rest, 1)?[0],
            "resolution" => {
                let v = parse_floats(line, rest, 2)?;
                if v[0] < 1.0 || v[1] < 1.0 || v[0].fract() != 0.0 || v[1].fract() != 0.0 {
                    return Err(err(line, "resolution must be positive integers"));
                }
                resolution = (v[0] as u32, v[1] as u32);
            }
            other => return Err(err(line, format!("unknown camera field '{other}'"))),
        }
        Ok(())
    })?;
    Ok(Camera {
        position: position.ok_or_else(|| err(start, "camera block missing 'position'"))?,
        look_at: look_at.ok_or_else(|| err(start, "camera block missing 'look_at'"))?,
        up,
        fov_y_deg,
        resolution,
    })
}

fn parse_light(cur: &mut Cursor, start: usize) -> Result<PointLight, SceneError> {
    let mut position = None;
    let mut power = [1.0; 3];
    each_field(cur, |line, kw, rest| {
        match kw {
            "position" => position = Some(vec3(line, rest)?),
            "power" => {
                let v = parse_floats(line, rest, 3)?;
                power = [v[0], v[1], v[2]];
            }
            other => return Err(err(line, format!("unknown light field '{other}'"))),
        }
        Ok(())
    })?;
    Ok(PointLight {
        position: position.ok_or_else(|| err(start, "light block missing 'position'"))?,
        power,
    })
}

fn parse_specular(cur: &mut Cursor, start: usize) -> Result<SpecularTriangle, SceneError> {
    let mut mode = NormalMode::Interpolated;
    let mut eta = (1.0, 1.0);
    let mut verts: Vec<(Vec3, Vec3)> = Vec::new();
    each_field(cur, |line, kw, rest| {
        match kw {
            "mode" => {
                mode = match rest {
                    "interpolated" => NormalMode::Interpolated,
                    "face" => NormalMode::Face,
                    other => return Err(err(line, format!("unknown mode '{other}'"))),
                }
            }
            "eta" => {
                let v = parse_floats(line, rest, 2)?;
                eta = (v[0], v[1]);
            }
            "vertex" => {
                let v = parse_floats(line, rest, 6)?;
                verts.push((Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5])));
            }
            other => return Err(err(line, format!("unknown specular field '{other}'"))),
        }
        Ok(())
    })?;
    if verts.len() != 3 {
        return Err(err(start, format!("specular block needs 3 vertices, found {}", verts.len())));
    }
    Ok(SpecularTriangle {
        positions: [verts[0].0, verts[1].0, verts[2].0],
        shading_normals: [verts[0].1, verts[1].1, verts[2].1],
        normal_mode: mode,
        eta_out: eta.0,
        eta_in: eta.1,
    })
}

fn parse_occluder(cur: &mut Cursor, start: usize) -> Result<Triangle, SceneError> {
    let mut albedo = [0.5; 3];
    let mut verts: Vec<Vec3> = Vec::new();
    each_field(cur, |line, kw, rest| {
        match kw {
            "albedo" => {
                let v = parse_floats(line, rest, 3)?;
                albedo = [v[0], v[1], v[2]];
            }
            "vertex" => verts.push(vec3(line, rest)?),
            other => return Err(err(line, format!("unknown occluder field '{other}'"))),
        }
        Ok(())
    })?;
    if verts.len() != 3 {
        return Err(err(start, format!("occluder block needs 3 vertices, found {}", verts.len())));
    }
    Ok(Triangle { positions: [verts[0], verts[1], verts[2]], albedo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_scene(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    const MINIMAL: &str = "\
# minimal: one mirror triangle, one light, a camera
camera
  position 0 0 5
  look_at 0 0 0
light
  position 0 3 0
specular
  vertex 0 0 0  0 0 1
  vertex 1 0 0  0 0 1
  vertex 0 1 0  0 0 1
";

    #[test]
    fn minimal_scene_loads() {
        let f = write_scene(MINIMAL);
        let scene = load_scene(f.path()).unwrap();
        assert_eq!(scene.triangles.len(), 1);
        assert_eq!(scene.lights.len(), 1);
        assert_eq!(scene.camera.resolution, (256, 256));
    }

    #[test]
    fn zero_area_triangle_reports_line() {
        let text = "\
camera
  position 0 0 5
  look_at 0 0 0
specular
  vertex 0 0 0  0 0 1
  vertex 1 0 0  0 0 1
  vertex 1 0 0  0 0 1
";
        let f = write_scene(text);
        match load_scene(f.path()) {
            Err(SceneError::Parse { line, msg }) => {
                assert_eq!(line, 4);
                assert!(msg.contains("degenerate"));
            }
            other => panic!("expected degenerate error, got {other:?}"),
        }
    }

    #[test]
    fn missing_camera_is_an_error() {
        let text = "light\n  position 0 3 0\n";
        let f = write_scene(text);
        assert!(matches!(load_scene(f.path()), Err(SceneError::MissingCamera)));
    }

    #[test]
    fn unknown_keyword_reports_line() {
        let text = "camera\n  position 0 0 5\n  look_at 0 0 0\nwibble\n";
        let f = write_scene(text);
        match load_scene(f.path()) {
            Err(SceneError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn occluder_mesh_reference() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("floor.tris"),
            "# two triangles\n-5 -5 0  5 -5 0  5 5 0\n-5 -5 0  5 5 0  -5 5 0\n",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("scene.scn"),
            "camera\n  position 0 0 5\n  look_at 0 0 0\noccluder_mesh floor.tris\n",
        )
        .unwrap();
        let scene = load_scene(dir.path().join("scene.scn")).unwrap();
        assert_eq!(scene.occluders.len(), 2);
    }
}
