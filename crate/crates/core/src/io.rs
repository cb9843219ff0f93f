//! File formats: JSON instances, TOML configs, CSV tables.

use std::io::{Read, Write};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::consistency::{Instance, NoiseModel, Observation};
use crate::error::{Error, Result};
use crate::geometry::{Camera, ImagePoint};
use crate::sim::{DecayCurve, DecayRecord, ExperimentConfig};
use crate::toy2d::Toy2dConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub f: f64,
    #[serde(default)]
    pub principal_point: [f64; 2],
    /// Row-major rotation.
    #[serde(rename = "R")]
    pub r: [f64; 9],
    #[serde(rename = "C")]
    pub c: [f64; 3],
    pub x: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub noise: NoiseModel,
    pub cameras: Vec<CameraRecord>,
}

impl InstanceFile {
    pub fn to_instance(&self) -> Result<Instance> {
        let noise = NoiseModel::new(self.noise.q, self.noise.delta)?;
        let observations = self
            .cameras
            .iter()
            .map(|c| {
                let camera = Camera::new(
                    c.f,
                    c.principal_point,
                    Matrix3::from_row_slice(&c.r),
                    Vector3::from_row_slice(&c.c),
                )?;
                Ok(Observation {
                    point: ImagePoint::new(c.x[0], c.x[1]),
                    camera,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Instance::new(observations, noise)
    }

    pub fn from_instance(inst: &Instance) -> Self {
        Self {
            noise: inst.noise(),
            cameras: inst
                .observations()
                .iter()
                .map(|o| {
                    let r = o.camera.rotation();
                    CameraRecord {
                        f: o.camera.focal_length(),
                        principal_point: o.camera.principal_point(),
                        r: std::array::from_fn(|k| r[(k / 3, k % 3)]),
                        c: std::array::from_fn(|k| o.camera.centre()[k]),
                        x: [o.point.x, o.point.y],
                    }
                })
                .collect(),
        }
    }
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("instance: {e}")))?;
    file.to_instance()
}

pub fn instance_to_json(inst: &Instance) -> String {
    serde_json::to_string_pretty(&InstanceFile::from_instance(inst)).expect("instance serializes")
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_toy2d_config(text: &str) -> Result<Toy2dConfig> {
    let cfg: Toy2dConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn config_to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// Write rows as CSV with a header, preceded by `# comment` when given.
pub fn write_csv<W: Write, T: Serialize>(
    mut out: W,
    rows: &[T],
    comment: Option<&str>,
) -> Result<()> {
    if let Some(c) = comment {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a curve as CSV, preceded by `# comment` when given.
pub fn write_decay_csv<W: Write>(out: W, curve: &DecayCurve, comment: Option<&str>) -> Result<()> {
    write_csv(out, &curve.records, comment)
}

/// Read a curve written by [`write_decay_csv`]; `#` lines are skipped and
/// only the `M` and `mean_sq_err` columns are required.
pub fn read_decay_csv<R: Read>(input: R) -> Result<DecayCurve> {
    #[derive(Deserialize)]
    struct Row {
        #[serde(rename = "M")]
        m: usize,
        mean_sq_err: f64,
        #[serde(default)]
        stderr: f64,
        #[serde(default)]
        trials: usize,
        #[serde(default)]
        excluded: usize,
        #[serde(default)]
        fell_back: usize,
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let records = reader
        .deserialize::<Row>()
        .map(|row| {
            let r = row.map_err(csv_error)?;
            Ok(DecayRecord {
                m: r.m,
                mean_sq_err: r.mean_sq_err,
                stderr: r.stderr,
                trials: r.trials,
                excluded: r.excluded,
                fell_back: r.fell_back,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayCurve {
        algorithm: None,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::NormKind;
    use crate::sim::Setup;

    #[test]
    fn instance_round_trip() {
        let text = r#"{
            "noise": {"q": "inf", "delta": 0.01},
            "cameras": [
                {"f": 1.0, "principal_point": [0, 0], "R": [1,0,0, 0,1,0, 0,0,1], "C": [-1,0,0], "x": [0.2, 0.0]},
                {"f": 1.0, "R": [1,0,0, 0,1,0, 0,0,1], "C": [1,0,0], "x": [-0.2, 0.0]}
            ]
        }"#;
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.len(), 2);
        assert_eq!(inst.noise().q, NormKind::Linf);
        let again = parse_instance(&instance_to_json(&inst)).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn bad_instances() {
        assert!(matches!(parse_instance("{"), Err(Error::Parse(_))));
        let bad_rotation = r#"{"noise": {"q": "2", "delta": 0.1}, "cameras": [
            {"f": 1, "R": [1,0,0, 0,1,0, 0,0,2], "C": [0,0,0], "x": [0,0]},
            {"f": 1, "R": [1,0,0, 0,1,0, 0,0,1], "C": [1,0,0], "x": [0,0]}]}"#;
        assert!(matches!(
            parse_instance(bad_rotation),
            Err(Error::InvalidCamera(_))
        ));
    }

    #[test]
    fn config_round_trip() {
        let text = r#"
            setup = "circular_array"
            roi_radius = 1.0
            outer_radius = 10.0
            camera_count_schedule = [4, 8, 16]
            trials_per_M = 20
            noise = { q = "inf", delta = 0.01 }
            focal_length = 1.0
            sensor_halfwidth = 1.0
            rng_seed = 42
        "#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.setup, Setup::CircularArray);
        assert_eq!(cfg.trials_per_m, 20);
        assert!(cfg.planar_points);
        assert_eq!(parse_config(&config_to_toml(&cfg)).unwrap(), cfg);
        assert!(matches!(parse_config("setup = 3"), Err(Error::Config(_))));
        assert!(matches!(
            parse_config(&text.replace("[4, 8, 16]", "[8, 4]")),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let curve = DecayCurve::from_points(&[(4, 0.5), (8, 0.125)]);
        let mut buf = Vec::new();
        write_decay_csv(&mut buf, &curve, Some("seed=1")).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# seed=1\nM,mean_sq_err,stderr,trials,excluded,fell_back\n"));
        let back = read_decay_csv(text.as_bytes()).unwrap();
        assert_eq!(back.records, curve.records);
        let minimal = read_decay_csv("M,mean_sq_err\n2,1.0\n".as_bytes()).unwrap();
        assert_eq!(minimal.records[0].m, 2);
    }
}
