use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Point3, PointCloud};
use crate::error::{Error, Result};
use crate::fmt::g17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointFormat {
    Xyz,
    PlyAscii,
}

impl PointFormat {
    /// Guesses the format from a file extension (`.ply` or anything else).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("ply") => PointFormat::PlyAscii,
            _ => PointFormat::Xyz,
        }
    }
}

pub fn load_points(path: &Path, format: PointFormat) -> Result<PointCloud> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
        line: 0,
        message: "file is not UTF-8 text (binary PLY is not supported)".into(),
    })?;
    let points = match format {
        PointFormat::Xyz => parse_xyz(&text)?,
        PointFormat::PlyAscii => parse_ply_ascii(&text)?,
    };
    PointCloud::new(points, path.display().to_string())
}

fn parse_coord(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| Error::Parse {
        line,
        message: format!("not a number: {tok:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("non-finite coordinate {tok:?}"),
        });
    }
    Ok(v)
}

/// One `x y z` triple per line; blank lines and `#` comments are skipped.
pub fn parse_xyz(text: &str) -> Result<Vec<Point3>> {
    let mut points = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        points.push([
            parse_coord(fields[0], line)?,
            parse_coord(fields[1], line)?,
            parse_coord(fields[2], line)?,
        ]);
    }
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(points)
}

/// ASCII PLY; only the x/y/z properties of the vertex element are read.
pub fn parse_ply_ascii(text: &str) -> Result<Vec<Point3>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing 'ply' magic".into(),
            })
        }
    }
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    // elements declared before "vertex" whose rows must be skipped
    let mut skip_rows = 0usize;
    let mut seen_vertex = false;
    loop {
        let (no, raw) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: "unterminated PLY header".into(),
        })?;
        let line = no + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", ..] => {}
            ["format", other, ..] => {
                return Err(Error::Parse {
                    line,
                    message: format!("unsupported PLY format {other:?}; only ascii is read"),
                })
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count: usize = count.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("bad element count {count:?}"),
                })?;
                in_vertex = *name == "vertex";
                if in_vertex {
                    vertex_count = Some(count);
                    seen_vertex = true;
                } else if !seen_vertex {
                    skip_rows += count;
                }
            }
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(Error::Parse {
                        line,
                        message: "list properties on vertices are not supported".into(),
                    });
                }
            }
            ["property", _ty, name] => {
                if in_vertex {
                    props.push(name.to_string());
                }
            }
            ["end_header"] => break,
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("unrecognized header line {raw:?}"),
                })
            }
        }
    }
    let n = vertex_count.ok_or(Error::Parse {
        line: 0,
        message: "no 'element vertex' in header".into(),
    })?;
    let col = |name: &str| {
        props.iter().position(|p| p == name).ok_or(Error::Parse {
            line: 0,
            message: format!("vertex element lacks property {name}"),
        })
    };
    let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);
    let mut points = Vec::with_capacity(n);
    let mut skipped = 0;
    for (no, raw) in lines {
        if points.len() == n {
            break;
        }
        let line = no + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if skipped < skip_rows {
            skipped += 1;
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.len() != props.len() {
            return Err(Error::Parse {
                line,
                message: format!(
                    "expected {} vertex fields, found {}",
                    props.len(),
                    toks.len()
                ),
            });
        }
        points.push([
            parse_coord(toks[cx], line)?,
            parse_coord(toks[cy], line)?,
            parse_coord(toks[cz], line)?,
        ]);
    }
    if points.len() < n {
        return Err(Error::Parse {
            line: 0,
            message: format!("header declares {n} vertices, found {}", points.len()),
        });
    }
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(points)
}

pub fn write_xyz<W: Write>(cloud: &PointCloud, mut w: W) -> Result<()> {
    for p in cloud.points() {
        writeln!(w, "{} {} {}", g17(p[0]), g17(p[1]), g17(p[2]))?;
    }
    Ok(())
}

pub fn save_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_xyz(cloud, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xyz_basic() {
        let pts = parse_xyz("0 0 0\n1 0 0").unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[1], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn xyz_comments_and_tabs() {
        let pts = parse_xyz("# header\n1\t2   3\n\n4 5 6\n").unwrap();
        assert_eq!(pts, vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
    }

    #[test]
    fn xyz_reports_line_number() {
        match parse_xyz("0 0 0\n1 1 1\n1 2\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_xyz("# only comments\n"),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn ply_matches_xyz() {
        let ply = "ply\nformat ascii 1.0\ncomment made by hand\nelement vertex 5\n\
                   property float x\nproperty float y\nproperty float z\nproperty uchar red\n\
                   element face 0\nproperty list uchar int vertex_indices\nend_header\n\
                   0 0 0 255\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0.5 0.25 -2 0\n";
        let xyz = "0 0 0\n1 0 0\n0 1 0\n0 0 1\n0.5 0.25 -2\n";
        assert_eq!(parse_ply_ascii(ply).unwrap(), parse_xyz(xyz).unwrap());
    }

    #[test]
    fn ply_rejects_binary() {
        let ply = "ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nend_header\n";
        assert!(matches!(parse_ply_ascii(ply), Err(Error::Parse { .. })));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.xyz");
        let cloud = PointCloud::new(vec![[0.1, -1.0 / 3.0, 2e-9], [1e10, 7.0, -0.0]], "c").unwrap();
        save_xyz(&cloud, &path).unwrap();
        let back = load_points(&path, PointFormat::Xyz).unwrap();
        assert_eq!(back.points(), cloud.points());
    }
}
