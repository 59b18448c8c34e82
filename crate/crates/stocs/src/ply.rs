//! PLY point clouds: ASCII and binary little-endian, vertex positions with
//! optional normals. Other elements are parsed and skipped.

use std::path::Path;

use stocs_core::geometry::{Point3, PointCloud, UnitVector3, Vector3};

use crate::bytes::Cursor;
use crate::error::{read_file, write_file, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn read(self, c: &mut Cursor) -> Option<f64> {
        Some(match self {
            Scalar::I8 => c.u8()? as i8 as f64,
            Scalar::U8 => c.u8()? as f64,
            Scalar::I16 => c.u16()? as i16 as f64,
            Scalar::U16 => c.u16()? as f64,
            Scalar::I32 => c.u32()? as i32 as f64,
            Scalar::U32 => c.u32()? as f64,
            Scalar::F32 => c.f32()? as f64,
            Scalar::F64 => c.f64()?,
        })
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(Scalar, Scalar),
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Ascii,
    BinaryLe,
}

struct Header {
    encoding: Encoding,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(path: &Path, data: &[u8]) -> Result<Header> {
    let bad = |reason: &str| Error::malformed(path, reason);
    let mut encoding = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut pos = 0;
    let mut first = true;
    loop {
        let end = data[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("PLY header is not terminated"))?;
        let line = std::str::from_utf8(&data[pos..pos + end]).map_err(|_| bad("PLY header is not UTF-8"))?;
        let line = line.trim_end_matches('\r').trim();
        pos += end + 1;
        if first {
            if line != "ply" {
                return Err(bad("missing `ply` magic line"));
            }
            first = false;
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["format", "ascii", _] => encoding = Some(Encoding::Ascii),
            ["format", "binary_little_endian", _] => encoding = Some(Encoding::BinaryLe),
            ["format", other, _] => return Err(bad(&format!("unsupported PLY encoding `{other}`"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad("bad element count"))?,
                properties: Vec::new(),
            }),
            ["property", "list", count_ty, item_ty, _] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                let c = Scalar::parse(count_ty).ok_or_else(|| bad("unknown property type"))?;
                let i = Scalar::parse(item_ty).ok_or_else(|| bad("unknown property type"))?;
                el.properties.push(Property::List(c, i));
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                let t = Scalar::parse(ty).ok_or_else(|| bad("unknown property type"))?;
                el.properties.push(Property::Scalar(name.to_string(), t));
            }
            _ => return Err(bad(&format!("unrecognized header line `{line}`"))),
        }
    }
    Ok(Header {
        encoding: encoding.ok_or_else(|| bad("missing format line"))?,
        elements,
        body_offset: pos,
    })
}

/// Reads the vertex element of a PLY file. Normals are kept when all three
/// of `nx`, `ny`, `nz` are present; they are renormalized.
pub fn read_ply(path: &Path) -> Result<PointCloud> {
    let data = read_file(path)?;
    let header = parse_header(path, &data)?;
    let body = &data[header.body_offset..];
    let bad = |reason: &str| Error::malformed(path, reason);

    let mut vertex_rows: Vec<Vec<f64>> = Vec::new();
    let mut vertex_props: Vec<String> = Vec::new();
    match header.encoding {
        Encoding::BinaryLe => {
            let mut c = Cursor::new(body);
            for el in &header.elements {
                let is_vertex = el.name == "vertex";
                for _ in 0..el.count {
                    let mut row = Vec::new();
                    for p in &el.properties {
                        match p {
                            Property::Scalar(_, t) => row.push(t.read(&mut c).ok_or_else(|| Error::truncated(path))?),
                            Property::List(ct, it) => {
                                let n = ct.read(&mut c).ok_or_else(|| Error::truncated(path))? as usize;
                                for _ in 0..n {
                                    it.read(&mut c).ok_or_else(|| Error::truncated(path))?;
                                }
                            }
                        }
                    }
                    if is_vertex {
                        vertex_rows.push(row);
                    }
                }
            }
        }
        Encoding::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| bad("PLY body is not UTF-8"))?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            for el in &header.elements {
                let is_vertex = el.name == "vertex";
                for _ in 0..el.count {
                    let line = lines.next().ok_or_else(|| Error::truncated(path))?;
                    if !is_vertex {
                        continue;
                    }
                    let mut row = line
                        .split_whitespace()
                        .map(str::parse::<f64>)
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("non-numeric vertex value"))?;
                    if row.len() < el.properties.len() {
                        return Err(bad("vertex line has too few values"));
                    }
                    // a `float` property holds the f32 nearest to its text
                    for (v, p) in row.iter_mut().zip(&el.properties) {
                        if matches!(p, Property::Scalar(_, Scalar::F32)) {
                            *v = *v as f32 as f64;
                        }
                    }
                    vertex_rows.push(row);
                }
            }
        }
    }
    if let Some(el) = header.elements.iter().find(|e| e.name == "vertex") {
        for p in &el.properties {
            match p {
                Property::Scalar(name, _) => vertex_props.push(name.clone()),
                Property::List(..) => return Err(bad("list property on vertex element")),
            }
        }
    } else {
        return Err(bad("no vertex element"));
    }

    let col = |name: &str| vertex_props.iter().position(|p| p == name);
    let (Some(x), Some(y), Some(z)) = (col("x"), col("y"), col("z")) else {
        return Err(bad("vertex element lacks x, y, z"));
    };
    let normals = match (col("nx"), col("ny"), col("nz")) {
        (Some(a), Some(b), Some(c)) => Some((a, b, c)),
        _ => None,
    };
    let points: Vec<Point3> = vertex_rows.iter().map(|r| Point3::new(r[x], r[y], r[z])).collect();
    let cloud = match normals {
        Some((a, b, c)) => {
            let normals = vertex_rows
                .iter()
                .map(|r| {
                    let v = Vector3::new(r[a], r[b], r[c]);
                    UnitVector3::try_new(v, 1e-12).ok_or_else(|| bad("zero-length normal"))
                })
                .collect::<Result<Vec<_>>>()?;
            PointCloud::with_normals(points, normals)?
        }
        None => PointCloud::from_points(points)?,
    };
    Ok(cloud)
}

/// Writes positions (and normals when present) as float32 properties.
pub fn write_ply(path: &Path, cloud: &PointCloud, binary: bool) -> Result<()> {
    let with_normals = cloud.has_normals();
    let mut out = String::from("ply\n");
    out += if binary {
        "format binary_little_endian 1.0\n"
    } else {
        "format ascii 1.0\n"
    };
    out += &format!("element vertex {}\n", cloud.len());
    for p in ["x", "y", "z"] {
        out += &format!("property float {p}\n");
    }
    if with_normals {
        for p in ["nx", "ny", "nz"] {
            out += &format!("property float {p}\n");
        }
    }
    out += "end_header\n";
    let mut bytes = out.into_bytes();
    for (i, p) in cloud.points.iter().enumerate() {
        let mut row = vec![p.x, p.y, p.z];
        if with_normals {
            row.extend(cloud.normals[i].iter());
        }
        if binary {
            for v in row {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        } else {
            let line: Vec<String> = row.iter().map(|v| (*v as f32).to_string()).collect();
            bytes.extend_from_slice(line.join(" ").as_bytes());
            bytes.push(b'\n');
        }
    }
    write_file(path, &bytes)
}
