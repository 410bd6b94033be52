//! File formats: IFS spec JSON, point-cloud CSV, and region strings.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Closure, ConvexRegion, PointCloud, Rotation, Vector, Window};
use crate::ifs::{validate_ifs, IfsSystem, Similitude};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub ratio: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<Vec<f64>>>,
    pub shift: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsSpec {
    pub dim: usize,
    pub maps: Vec<MapSpec>,
}

impl IfsSpec {
    pub fn from_system(system: &IfsSystem) -> Self {
        IfsSpec {
            dim: system.dim(),
            maps: system
                .maps()
                .iter()
                .map(|m| MapSpec {
                    ratio: m.ratio(),
                    rotation: (!m.rot().is_identity()).then(|| m.rot().rows()),
                    shift: m.shift().as_slice().to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_system(&self) -> Result<IfsSystem> {
        let mut maps = Vec::with_capacity(self.maps.len());
        for (i, m) in self.maps.iter().enumerate() {
            let field = |name: &str, err: Error| Error::Spec {
                context: format!("maps[{i}].{name}"),
                message: err.to_string(),
            };
            if m.shift.len() != self.dim {
                return Err(field(
                    "shift",
                    Error::DimensionMismatch {
                        expected: self.dim,
                        found: m.shift.len(),
                    },
                ));
            }
            let rot = match &m.rotation {
                None => Rotation::identity(self.dim),
                Some(rows) => {
                    if rows.len() != self.dim {
                        return Err(field(
                            "rotation",
                            Error::DimensionMismatch {
                                expected: self.dim,
                                found: rows.len(),
                            },
                        ));
                    }
                    Rotation::from_rows(rows).map_err(|e| field("rotation", e))?
                }
            };
            let map = Similitude::new(m.ratio, rot, Vector::new(m.shift.clone())).map_err(|e| {
                let name = if matches!(e, Error::NotAContraction { .. }) {
                    "ratio"
                } else {
                    "rotation"
                };
                field(name, e)
            })?;
            maps.push(map);
        }
        validate_ifs(maps).map_err(|e| Error::Spec {
            context: "maps".into(),
            message: e.to_string(),
        })
    }
}

/// Parses spec text; `source` names the input in error messages.
pub fn parse_ifs_str(text: &str, source: &str) -> Result<IfsSystem> {
    let spec: IfsSpec = serde_json::from_str(text).map_err(|e| Error::Spec {
        context: format!("{source} line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    spec.to_system().map_err(|e| match e {
        Error::Spec { context, message } => Error::Spec {
            context: format!("{source}: {context}"),
            message,
        },
        other => other,
    })
}

pub fn parse_ifs_spec(path: &Path) -> Result<IfsSystem> {
    let text = std::fs::read_to_string(path)?;
    parse_ifs_str(&text, &path.display().to_string())
}

/// Writes `# d=<dim> covering_radius=<ε>`, any extra comment lines, then one row per point.
pub fn write_cloud_csv<W: Write>(
    out: W,
    cloud: &PointCloud,
    weights: Option<&[f64]>,
    comments: &[String],
) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != cloud.len() {
            return Err(Error::DimensionMismatch {
                expected: cloud.len(),
                found: w.len(),
            });
        }
    }
    let mut out = out;
    writeln!(out, "# d={} covering_radius={}", cloud.dim(), cloud.covering_radius())?;
    for c in comments {
        for line in c.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let mut row: Vec<String> = Vec::with_capacity(cloud.dim() + 1);
    for (i, p) in cloud.points().iter().enumerate() {
        row.clear();
        row.extend(p.as_slice().iter().map(|v| v.to_string()));
        if let Some(w) = weights {
            row.push(w[i].to_string());
        }
        writer.write_record(&row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

/// Reads a cloud written by [`write_cloud_csv`]; a `d + 1`-th column is read as weights.
pub fn read_cloud_csv<R: Read>(input: R) -> Result<(PointCloud, Option<Vec<f64>>)> {
    let mut text = String::new();
    let mut input = input;
    input.read_to_string(&mut text)?;
    let header = text
        .lines()
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty cloud file".into()))?;
    let field = |key: &str| -> Result<&str> {
        header
            .split_whitespace()
            .find_map(|t| t.strip_prefix(key))
            .ok_or_else(|| Error::InvalidArgument(format!("cloud header lacks {key}")))
    };
    let dim: usize = field("d=")?
        .parse()
        .map_err(|_| Error::InvalidArgument("bad d= in cloud header".into()))?;
    let radius: f64 = field("covering_radius=")?
        .parse()
        .map_err(|_| Error::InvalidArgument("bad covering_radius= in cloud header".into()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let values = record
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::InvalidArgument(format!("row {}: {e}", line + 1)))?;
        match values.len() {
            n if n == dim => points.push(Vector::new(values)),
            n if n == dim + 1 => {
                weights.push(values[dim]);
                points.push(Vector::new(values[..dim].to_vec()));
            }
            n => {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: n,
                })
            }
        }
    }
    if !weights.is_empty() && weights.len() != points.len() {
        return Err(Error::InvalidArgument("weight column present on some rows only".into()));
    }
    let cloud = PointCloud::new(dim, points, radius)?;
    Ok((cloud, (!weights.is_empty()).then_some(weights)))
}

/// `box lo_1 … lo_d hi_1 … hi_d` (closed) or `ball c_1 … c_d r`.
pub fn parse_region(text: &str, dim: usize) -> Result<ConvexRegion> {
    let mut parts = text.split_whitespace();
    let kind = parts
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty region".into()))?;
    let nums = parts
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<Vec<f64>, _>>()
        .map_err(|e| Error::InvalidArgument(format!("region: {e}")))?;
    match kind {
        "box" if nums.len() == 2 * dim => Ok(ConvexRegion::Window(Window::new(
            Vector::new(nums[..dim].to_vec()),
            Vector::new(nums[dim..].to_vec()),
            Closure::Closed,
        )?)),
        "ball" if nums.len() == dim + 1 => ConvexRegion::ball(Vector::new(nums[..dim].to_vec()), nums[dim]),
        "box" | "ball" => Err(Error::InvalidArgument(format!(
            "region '{kind}' needs {} numbers in dimension {dim}, got {}",
            if kind == "box" { 2 * dim } else { dim + 1 },
            nums.len()
        ))),
        other => Err(Error::InvalidArgument(format!("unknown region kind '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        let cantor = r#"{"dim": 1, "maps": [{"ratio": 0.3333333333333333, "shift": [0]}, {"ratio": 0.3333333333333333, "shift": [0.6666666666666666]}]}"#;
        let sys = parse_ifs_str(cantor, "cantor.json").unwrap();
        assert_eq!(sys.len(), 2);

        let bad = r#"{"dim": 1, "maps": [{"ratio": 1.0, "shift": [0]}, {"ratio": 0.5, "shift": [0.5]}]}"#;
        let err = parse_ifs_str(bad, "bad.json").unwrap_err().to_string();
        assert!(
            err.contains("maps[0].ratio") && err.contains("not a contraction"),
            "{err}"
        );

        let rot = r#"{"dim": 2, "maps": [
            {"ratio": 0.4, "rotation": [[0, -1], [1, 0]], "shift": [0, 0]},
            {"ratio": 0.4, "shift": [0.6, 0]}]}"#;
        let sys = parse_ifs_str(rot, "rot.json").unwrap();
        assert!(!sys.map(0).rot().is_identity());

        let skew = r#"{"dim": 2, "maps": [
            {"ratio": 0.4, "rotation": [[1, 0.1], [0, 1]], "shift": [0, 0]},
            {"ratio": 0.4, "shift": [0.6, 0]}]}"#;
        let err = parse_ifs_str(skew, "skew.json").unwrap_err().to_string();
        assert!(
            err.contains("maps[0].rotation") && err.contains("not orthogonal"),
            "{err}"
        );

        let malformed = "{\"dim\": 1,\n \"maps\": [oops]}";
        let err = parse_ifs_str(malformed, "m.json").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn spec_round_trip() {
        let rot = r#"{"dim": 2, "maps": [
            {"ratio": 0.4, "rotation": [[0, -1], [1, 0]], "shift": [0, 0]},
            {"ratio": 0.4, "shift": [0.6, 0]}]}"#;
        let sys = parse_ifs_str(rot, "rot.json").unwrap();
        let text = serde_json::to_string(&IfsSpec::from_system(&sys)).unwrap();
        let again = parse_ifs_str(&text, "again").unwrap();
        assert_eq!(IfsSpec::from_system(&again), IfsSpec::from_system(&sys));
    }

    #[test]
    fn cloud_round_trip() {
        let cloud = PointCloud::new(
            2,
            vec![Vector::new(vec![0.1, 1.0 / 3.0]), Vector::new(vec![-2.5, 1e-17])],
            0.01,
        )
        .unwrap();
        let weights = [0.25, 0.75];
        let mut buf = Vec::new();
        write_cloud_csv(&mut buf, &cloud, Some(&weights), &["manifest=abc".into()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# d=2 covering_radius=0.01\n# manifest=abc\n"));
        let (back, w) = read_cloud_csv(buf.as_slice()).unwrap();
        assert_eq!(back, cloud);
        assert_eq!(w.unwrap(), weights);
    }

    #[test]
    fn region_examples() {
        assert!(matches!(
            parse_region("box 0 0.333333", 1).unwrap(),
            ConvexRegion::Window(_)
        ));
        assert!(matches!(
            parse_region("ball 0 0 1", 2).unwrap(),
            ConvexRegion::Ball { .. }
        ));
        assert!(parse_region("box 0", 1).is_err());
        assert!(parse_region("slab 0 1", 1).is_err());
    }
}
