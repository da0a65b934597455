//! Binary little-endian PLY in the 3D Gaussian splatting layout.
//!
//! Vertex properties, all `float`:
//! `x y z nx ny nz f_dc_0..2 f_rest_0..(3K-1) opacity scale_0..2 rot_0..3`
//! where `K = (degree + 1)^2 - 1` and `f_rest` is channel-major (all red
//! coefficients first). Opacity is a logit, scales are logs, rotation is
//! `(w, x, y, z)`. Readers accept the properties in any order and also accept
//! `double` storage; normals are optional.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::{sh_coeff_count, Gaussian3D, GaussianScene, MAX_SH_DEGREE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct Header {
    vertex_count: usize,
    /// property name -> (byte offset within a vertex record, type)
    properties: HashMap<String, (usize, ScalarType)>,
    stride: usize,
    data_start: usize,
}

fn parse_error(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut offset = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| parse_error(offset, "unterminated header"))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| parse_error(offset, "header is not valid utf-8"))?
            .trim_end_matches('\r');
        lines.push((offset, line));
        offset += end + 1;
        if line == "end_header" {
            break;
        }
    }

    let mut iter = lines.into_iter();
    match iter.next() {
        Some((_, "ply")) => {}
        _ => return Err(parse_error(0, "missing `ply` magic")),
    }

    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut properties = HashMap::new();
    let mut stride = 0;
    let mut format_seen = false;
    for (line_offset, line) in iter {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", "binary_little_endian", "1.0"] => format_seen = true,
            ["format", other, ..] => {
                return Err(parse_error(
                    line_offset,
                    format!("unsupported format `{other}`"),
                ))
            }
            ["comment", ..] | ["obj_info", ..] | ["end_header"] => {}
            ["element", name, count] => {
                if vertex_count.is_some() && in_vertex {
                    // elements after the vertex block are ignored
                    in_vertex = false;
                    continue;
                }
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(count.parse::<usize>().map_err(|_| {
                        parse_error(line_offset, format!("bad element count `{count}`"))
                    })?);
                } else if vertex_count.is_none() {
                    return Err(parse_error(
                        line_offset,
                        format!("element `{name}` before vertex is not supported"),
                    ));
                }
            }
            ["property", "list", ..] if in_vertex => {
                return Err(parse_error(line_offset, "list properties are not supported"))
            }
            ["property", ty, name] => {
                if in_vertex {
                    let ty = ScalarType::parse(ty).ok_or_else(|| {
                        parse_error(line_offset, format!("unknown property type `{ty}`"))
                    })?;
                    properties.insert(name.to_string(), (stride, ty));
                    stride += ty.size();
                }
            }
            _ => return Err(parse_error(line_offset, format!("unexpected header line `{line}`"))),
        }
    }
    if !format_seen {
        return Err(parse_error(0, "missing `format binary_little_endian 1.0`"));
    }
    let vertex_count = vertex_count.ok_or_else(|| parse_error(0, "missing vertex element"))?;
    Ok(Header {
        vertex_count,
        properties,
        stride,
        data_start: offset,
    })
}

pub fn load_scene_ply(path: &Path) -> Result<GaussianScene> {
    parse_scene_ply(&fs::read(path)?)
}

pub fn parse_scene_ply(bytes: &[u8]) -> Result<GaussianScene> {
    let header = parse_header(bytes)?;
    let lookup = |name: &str| {
        header
            .properties
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("missing vertex property `{name}`")))
    };

    let rest_count = (0..)
        .take_while(|i| header.properties.contains_key(&format!("f_rest_{i}")))
        .count();
    let sh_degree = (0..=MAX_SH_DEGREE)
        .find(|&d| 3 * (sh_coeff_count(d) - 1) == rest_count)
        .ok_or_else(|| {
            Error::Schema(format!(
                "{rest_count} f_rest properties do not match any sh degree"
            ))
        })?;
    let per_channel = sh_coeff_count(sh_degree) - 1;

    let pos = ["x", "y", "z"].map(lookup);
    let dc = ["f_dc_0", "f_dc_1", "f_dc_2"].map(lookup);
    let scale = ["scale_0", "scale_1", "scale_2"].map(lookup);
    let rot = ["rot_0", "rot_1", "rot_2", "rot_3"].map(lookup);
    let rest = (0..rest_count)
        .map(|i| lookup(&format!("f_rest_{i}")))
        .collect::<Result<Vec<_>>>()?;
    let pos = collect3(pos)?;
    let dc = collect3(dc)?;
    let scale = collect3(scale)?;
    let rot = {
        let [a, b, c, d] = rot;
        [a?, b?, c?, d?]
    };
    let opacity = lookup("opacity")?;

    let needed = header.vertex_count * header.stride;
    let data = &bytes[header.data_start..];
    if data.len() < needed {
        return Err(parse_error(
            header.data_start + data.len(),
            format!("expected {needed} bytes of vertex data, found {}", data.len()),
        ));
    }

    let mut gaussians = Vec::with_capacity(header.vertex_count);
    for record in data[..needed].chunks_exact(header.stride.max(1)).take(header.vertex_count) {
        let get = |(off, ty): (usize, ScalarType)| ty.read(&record[off..]);
        let mut sh = vec![[0.0; 3]; per_channel + 1];
        sh[0] = dc.map(get);
        for c in 0..3 {
            for k in 0..per_channel {
                sh[k + 1][c] = get(rest[c * per_channel + k]);
            }
        }
        gaussians.push(Gaussian3D {
            position: pos.map(get),
            rotation: rot.map(get),
            log_scale: scale.map(get),
            opacity_logit: get(opacity),
            sh,
        });
    }
    GaussianScene::new(gaussians, sh_degree)
}

fn collect3<T>(a: [Result<T>; 3]) -> Result<[T; 3]> {
    let [x, y, z] = a;
    Ok([x?, y?, z?])
}

pub fn scene_to_ply_bytes(scene: &GaussianScene) -> Vec<u8> {
    let per_channel = sh_coeff_count(scene.sh_degree()) - 1;
    let mut header = String::from("ply\nformat binary_little_endian 1.0\n");
    header += &format!("element vertex {}\n", scene.len());
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..3 * per_channel).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    for n in &names {
        header += &format!("property float {n}\n");
    }
    header += "end_header\n";

    let mut out = header.into_bytes();
    out.reserve(scene.len() * names.len() * 4);
    let mut push = |v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
    for g in scene.gaussians() {
        g.position.iter().for_each(|&v| push(v));
        (0..3).for_each(|_| push(0.0));
        g.sh[0].iter().for_each(|&v| push(v));
        for c in 0..3 {
            for k in 0..per_channel {
                push(g.sh[k + 1][c]);
            }
        }
        push(g.opacity_logit);
        g.log_scale.iter().for_each(|&v| push(v));
        g.rotation.iter().for_each(|&v| push(v));
    }
    out
}

pub fn save_scene_ply(scene: &GaussianScene, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    f.write_all(&scene_to_ply_bytes(scene))?;
    f.flush()?;
    Ok(())
}

/// ASCII PLY with `x y z` floats and `red green blue` bytes.
pub fn point_cloud_to_ascii_ply(points: impl ExactSizeIterator<Item = ([f64; 3], [f64; 3])>) -> String {
    let mut s = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        points.len()
    );
    for (p, c) in points {
        let [r, g, b] = c.map(crate::imaging::quantize);
        s += &format!("{} {} {} {r} {g} {b}\n", p[0] as f32, p[1] as f32, p[2] as f32);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(degree: usize) -> GaussianScene {
        let gs = (0..3)
            .map(|i| {
                let f = i as f64;
                let mut g = Gaussian3D::isotropic([f, -f * 0.5, 2.0 + f], 0.05 * (f + 1.0), 0.3, [0.2, 0.4, 0.6], degree);
                g.rotation = [0.9, 0.1 * f, -0.2, 0.05];
                for (k, c) in g.sh.iter_mut().enumerate().skip(1) {
                    *c = [0.01 * k as f64, -0.02 * k as f64, 0.03 * f];
                }
                g
            })
            .collect();
        GaussianScene::new(gs, degree).unwrap()
    }

    fn roundtrip(scene: &GaussianScene) -> GaussianScene {
        parse_scene_ply(&scene_to_ply_bytes(scene)).unwrap()
    }

    #[test]
    fn empty_scene() {
        let s = GaussianScene::empty(0);
        let bytes = scene_to_ply_bytes(&s);
        assert!(String::from_utf8_lossy(&bytes).contains("element vertex 0"));
        let back = parse_scene_ply(&bytes).unwrap();
        assert!(back.is_empty());
        assert!(back.bounds().is_empty());
    }

    #[test]
    fn degree_zero_has_no_rest() {
        let bytes = scene_to_ply_bytes(&fixture(0));
        assert!(!String::from_utf8_lossy(&bytes).contains("f_rest"));
    }

    #[test]
    fn single_vertex_zero_logit() {
        let mut g = Gaussian3D::isotropic([0.0; 3], 1.0, 0.5, [0.5; 3], 0);
        g.opacity_logit = 0.0;
        let s = roundtrip(&GaussianScene::new(vec![g], 0).unwrap());
        assert_eq!(s.gaussians()[0].opacity(), 0.5);
        assert_eq!(s.gaussians()[0].rotation, [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn fixture_round_trip_all_degrees() {
        for d in 0..=3 {
            let s = fixture(d);
            let back = roundtrip(&s);
            assert_eq!(back.sh_degree(), d);
            assert_eq!(back.len(), 3);
            for (a, b) in s.gaussians().iter().zip(back.gaussians()) {
                let fa = flatten(a);
                let fb = flatten(b);
                assert!(fa.iter().zip(&fb).all(|(x, y)| (x - y).abs() <= 1e-6 * x.abs().max(1.0)));
            }
            // re-save of the reloaded scene is byte-identical
            assert_eq!(scene_to_ply_bytes(&back), scene_to_ply_bytes(&roundtrip(&back)));
        }
    }

    fn flatten(g: &Gaussian3D) -> Vec<f64> {
        let mut v = g.position.to_vec();
        v.extend(g.rotation);
        v.extend(g.log_scale);
        v.push(g.opacity_logit);
        v.extend(g.sh.iter().flatten());
        v
    }

    #[test]
    fn missing_property_is_schema_error() {
        let text = "ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
        match parse_scene_ply(text.as_bytes()) {
            Err(Error::Schema(m)) => assert!(m.contains("f_dc_0")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_header_reports_offset() {
        let text = "ply\nformat binary_little_endian 1.0\nelement vertex 0\nbogus line\nend_header\n";
        match parse_scene_ply(text.as_bytes()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 53),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_scene_ply(b"not a ply"),
            Err(Error::Parse { offset: 0, .. })
        ));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = scene_to_ply_bytes(&fixture(1));
        bytes.truncate(bytes.len() - 5);
        assert!(matches!(parse_scene_ply(&bytes), Err(Error::Parse { .. })));
    }

    #[test]
    fn reads_reordered_double_properties() {
        let header = "ply\nformat binary_little_endian 1.0\nelement vertex 1\n\
            property double opacity\nproperty float rot_0\nproperty float rot_1\nproperty float rot_2\nproperty float rot_3\n\
            property float scale_0\nproperty float scale_1\nproperty float scale_2\n\
            property float f_dc_0\nproperty float f_dc_1\nproperty float f_dc_2\n\
            property float z\nproperty float y\nproperty float x\nend_header\n";
        let mut bytes = header.as_bytes().to_vec();
        bytes.extend_from_slice(&1.5f64.to_le_bytes());
        for v in [1.0f32, 0.0, 0.0, 0.0, -1.0, -2.0, -3.0, 0.1, 0.2, 0.3, 7.0, 8.0, 9.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let s = parse_scene_ply(&bytes).unwrap();
        let g = &s.gaussians()[0];
        assert_eq!(g.position, [9.0, 8.0, 7.0]);
        assert_eq!(g.opacity_logit, 1.5);
        assert_eq!(g.log_scale, [-1.0, -2.0, -3.0]);
    }

    #[test]
    fn ascii_point_cloud() {
        let s = point_cloud_to_ascii_ply(vec![([1.0, 2.0, 3.0], [1.0, 0.0, 0.5])].into_iter());
        assert!(s.contains("element vertex 1"));
        assert!(s.ends_with("1 2 3 255 0 128\n"));
    }
}
