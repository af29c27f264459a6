//! Kinematic features of a repetition.
//!
//! Fifteen per-frame series are computed for the active arm and each is reduced
//! to a few summary statistics, giving a fixed-length named vector:
//!
//! | series | definition |
//! |---|---|
//! | `elbow_flexion` | 180° minus the shoulder–elbow–wrist angle (0° = straight arm) |
//! | `shoulder_flexion` | upper-arm elevation in the sagittal plane, from trunk-down toward forward |
//! | `elbow_extension` | shoulder–elbow–wrist angle, i.e. 180° − elbow flexion; its max is 180° − min flexion |
//! | `shoulder_abduction` | upper-arm elevation in the frontal plane, from trunk-down toward lateral |
//! | `head_tilt`, `spine_tilt` | Neck→Head and SpineBase→SpineShoulder against the up axis |
//! | `shoulder_tilt` | passive→active shoulder line against the up axis (90° when level) |
//! | `{wrist,elbow}_{speed,accel,jerk}` | norm of the 1st/2nd/3rd time derivative of the joint position |
//! | `head{wrist,elbow}_dist` | ‖Head − joint‖ divided by the trunk length |
//!
//! The sagittal and frontal planes are built from the trunk and shoulder line of
//! each frame, so every angle is invariant to rigid motion of the skeleton.

mod derivative;
mod normalize;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use derivative::derivative_series;
pub use normalize::{apply_zscore, fit_zscore, NormParams, STD_FLOOR};

use crate::error::{Error, Result};
use crate::geometry::{self, cross, dot, norm, normalize as unit, scale, sub, Vec3};
use crate::motion::{Dataset, Exercise, JointName, MotionRepetition, Side};
use crate::synth::Arm;

/// Summary statistic applied to a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Summary {
    Max,
    Min,
    Range,
    Mean,
    Std,
}

impl Summary {
    pub fn name(self) -> &'static str {
        match self {
            Summary::Max => "max",
            Summary::Min => "min",
            Summary::Range => "range",
            Summary::Mean => "mean",
            Summary::Std => "std",
        }
    }

    fn apply(self, xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = xs.iter().sum::<f64>() / n;
        match self {
            Summary::Max => max,
            Summary::Min => min,
            Summary::Range => max - min,
            Summary::Mean => mean,
            Summary::Std => (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt(),
        }
    }
}

/// Feedback family a series belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Rom,
    Smoothness,
    Compensation,
    Speed,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Rom, Family::Smoothness, Family::Compensation, Family::Speed];

    pub fn name(self) -> &'static str {
        match self {
            Family::Rom => "rom",
            Family::Smoothness => "smoothness",
            Family::Compensation => "compensation",
            Family::Speed => "speed",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// The per-frame series, in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    ElbowFlexion,
    ShoulderFlexion,
    ElbowExtension,
    ShoulderAbduction,
    HeadTilt,
    SpineTilt,
    ShoulderTilt,
    WristSpeed,
    WristAccel,
    WristJerk,
    ElbowSpeed,
    ElbowAccel,
    ElbowJerk,
    HeadWristDist,
    HeadElbowDist,
}

impl Series {
    pub const ALL: [Series; 15] = [
        Series::ElbowFlexion,
        Series::ShoulderFlexion,
        Series::ElbowExtension,
        Series::ShoulderAbduction,
        Series::HeadTilt,
        Series::SpineTilt,
        Series::ShoulderTilt,
        Series::WristSpeed,
        Series::WristAccel,
        Series::WristJerk,
        Series::ElbowSpeed,
        Series::ElbowAccel,
        Series::ElbowJerk,
        Series::HeadWristDist,
        Series::HeadElbowDist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Series::ElbowFlexion => "elbow_flexion",
            Series::ShoulderFlexion => "shoulder_flexion",
            Series::ElbowExtension => "elbow_extension",
            Series::ShoulderAbduction => "shoulder_abduction",
            Series::HeadTilt => "head_tilt",
            Series::SpineTilt => "spine_tilt",
            Series::ShoulderTilt => "shoulder_tilt",
            Series::WristSpeed => "wrist_speed",
            Series::WristAccel => "wrist_accel",
            Series::WristJerk => "wrist_jerk",
            Series::ElbowSpeed => "elbow_speed",
            Series::ElbowAccel => "elbow_accel",
            Series::ElbowJerk => "elbow_jerk",
            Series::HeadWristDist => "headwrist_dist",
            Series::HeadElbowDist => "headelbow_dist",
        }
    }

    pub fn family(self) -> Family {
        match self {
            Series::ElbowFlexion
            | Series::ShoulderFlexion
            | Series::ElbowExtension
            | Series::ShoulderAbduction
            | Series::HeadWristDist
            | Series::HeadElbowDist => Family::Rom,
            Series::HeadTilt | Series::SpineTilt | Series::ShoulderTilt => Family::Compensation,
            Series::WristSpeed | Series::ElbowSpeed => Family::Speed,
            Series::WristAccel | Series::WristJerk | Series::ElbowAccel | Series::ElbowJerk => Family::Smoothness,
        }
    }

    pub fn is_geometric(self) -> bool {
        !matches!(self.family(), Family::Speed | Family::Smoothness)
    }
}

/// Family of a feature name such as `"headwrist_dist.range"`.
pub fn feature_family(name: &str) -> Option<Family> {
    let series = name.split('.').next()?;
    Series::ALL.iter().find(|s| s.name() == series).map(|s| s.family())
}

fn default_summaries() -> Vec<Summary> {
    vec![Summary::Max, Summary::Range, Summary::Mean, Summary::Std]
}

fn default_trunk() -> (JointName, JointName) {
    (JointName::SpineBase, JointName::SpineShoulder)
}

fn default_up() -> Vec3 {
    [0.0, 1.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    /// Arm to analyse; `None` resolves it from the repetition's side.
    #[serde(default)]
    pub arm: Option<Arm>,
    #[serde(default = "default_summaries")]
    pub summaries: Vec<Summary>,
    /// Joint pair whose distance normalizes the relative-distance series.
    #[serde(default = "default_trunk")]
    pub trunk_norm_joints: (JointName, JointName),
    /// Vertical direction in the camera frame.
    #[serde(default = "default_up")]
    pub up_axis: Vec3,
    /// Centered moving average (window 5) on joint positions before extraction.
    #[serde(default)]
    pub smoothing: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { arm: None, summaries: default_summaries(), trunk_norm_joints: default_trunk(), up_axis: default_up(), smoothing: false }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.summaries.is_empty() {
            return Err(Error::Config("at least one summary statistic is required".into()));
        }
        if unit(self.up_axis).is_none() {
            return Err(Error::Config("up_axis must be non-zero".into()));
        }
        if self.trunk_norm_joints.0 == self.trunk_norm_joints.1 {
            return Err(Error::Config("trunk_norm_joints must name two different joints".into()));
        }
        Ok(())
    }

    /// Summaries in canonical order without duplicates.
    pub fn canonical_summaries(&self) -> Vec<Summary> {
        let mut s = self.summaries.clone();
        s.sort();
        s.dedup();
        s
    }

    pub fn feature_names(&self) -> Vec<String> {
        let summaries = self.canonical_summaries();
        Series::ALL.iter().flat_map(|series| summaries.iter().map(move |s| format!("{}.{}", series.name(), s.name()))).collect()
    }

    pub fn dim(&self) -> usize {
        Series::ALL.len() * self.canonical_summaries().len()
    }

    fn arm_for(&self, side: Side) -> Arm {
        self.arm.unwrap_or_else(|| Arm::for_side(side))
    }
}

/// Named feature values with an optional acquisition mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    names: Arc<[String]>,
    values: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl FeatureVector {
    pub fn new(names: Vec<String>, values: Vec<f64>) -> Self {
        assert_eq!(names.len(), values.len(), "one value per feature name");
        Self { names: names.into(), values, mask: None }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    /// Mask with absent meaning fully acquired.
    pub fn effective_mask(&self) -> Vec<bool> {
        self.mask.clone().unwrap_or_else(|| vec![true; self.dim()])
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.dim() {
            return Err(Error::LengthMismatch { expected: self.dim(), got: mask.len() });
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.dim());
        Self { names: Arc::clone(&self.names), values, mask: self.mask.clone() }
    }
}

fn moving_average(rep: &MotionRepetition) -> Vec<[Vec3; JointName::COUNT]> {
    let n = rep.frames.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            let w = (hi - lo + 1) as f64;
            std::array::from_fn(|j| {
                let mut acc = [0.0; 3];
                for f in &rep.frames[lo..=hi] {
                    acc = geometry::add(acc, f.joints()[j]);
                }
                scale(acc, 1.0 / w)
            })
        })
        .collect()
}

fn degenerate(frame: usize, reason: &str) -> Error {
    Error::DegenerateGeometry { frame, reason: reason.to_string() }
}

fn at_frame<T>(frame: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::DegenerateGeometry { reason, .. } => Error::DegenerateGeometry { frame, reason },
        other => other,
    })
}

struct Poses {
    joints: Vec<[Vec3; JointName::COUNT]>,
}

impl Poses {
    fn of(rep: &MotionRepetition, cfg: &FeatureConfig) -> Self {
        let joints = if cfg.smoothing { moving_average(rep) } else { rep.frames.iter().map(|f| *f.joints()).collect() };
        Self { joints }
    }

    fn at(&self, i: usize, j: JointName) -> Vec3 {
        self.joints[i][j.index()]
    }

    fn path(&self, j: JointName) -> Vec<Vec3> {
        self.joints.iter().map(|f| f[j.index()]).collect()
    }
}

/// Per-frame ‖Head − joint‖ over the trunk normalization length.
pub fn relative_distance_series(rep: &MotionRepetition, joint: JointName, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    relative_distance(&Poses::of(rep, cfg), joint, cfg)
}

fn relative_distance(poses: &Poses, joint: JointName, cfg: &FeatureConfig) -> Result<Vec<f64>> {
    let (a, b) = cfg.trunk_norm_joints;
    (0..poses.joints.len())
        .map(|i| {
            let trunk = geometry::distance(poses.at(i, a), poses.at(i, b));
            if trunk <= 1e-6 {
                return Err(degenerate(i, "trunk normalization length below 1e-6 m"));
            }
            Ok(geometry::distance(poses.at(i, JointName::Head), poses.at(i, joint)) / trunk)
        })
        .collect()
}

/// Norm of the `order`-th time derivative of a 3D path.
fn derivative_magnitude(path: &[Vec3], ts: &[f64], order: usize) -> Result<Vec<f64>> {
    let axis = |k: usize| -> Result<Vec<f64>> {
        let xs: Vec<f64> = path.iter().map(|p| p[k]).collect();
        derivative_series(&xs, ts, order)
    };
    let (dx, dy, dz) = (axis(0)?, axis(1)?, axis(2)?);
    Ok((0..path.len()).map(|i| norm([dx[i], dy[i], dz[i]])).collect())
}

/// Elevation angles of the upper arm in the trunk's sagittal and frontal planes.
fn shoulder_angles(poses: &Poses, i: usize, arm: Arm) -> Result<(f64, f64)> {
    let down = unit(sub(poses.at(i, JointName::SpineBase), poses.at(i, JointName::SpineShoulder)))
        .ok_or_else(|| degenerate(i, "collapsed trunk"))?;
    let right_raw = sub(poses.at(i, JointName::ShoulderRight), poses.at(i, JointName::ShoulderLeft));
    let right = unit(sub(right_raw, scale(down, dot(right_raw, down)))).ok_or_else(|| degenerate(i, "shoulder line parallel to trunk"))?;
    let up = scale(down, -1.0);
    let forward = cross(right, up);
    let lateral = match arm {
        Arm::Right => right,
        Arm::Left => scale(right, -1.0),
    };
    let upper = sub(poses.at(i, arm.elbow()), poses.at(i, arm.shoulder()));
    if norm(upper) < geometry::MIN_RAY_LENGTH {
        return Err(degenerate(i, "zero-length upper arm"));
    }
    let d = dot(upper, down);
    let flexion = dot(upper, forward).atan2(d).to_degrees();
    let abduction = dot(upper, lateral).atan2(d).to_degrees();
    Ok((flexion, abduction))
}

/// Computes the fifteen raw series of a repetition.
pub fn extract_series(rep: &MotionRepetition, cfg: &FeatureConfig) -> Result<Vec<(Series, Vec<f64>)>> {
    cfg.validate()?;
    let arm = cfg.arm_for(rep.side);
    let poses = Poses::of(rep, cfg);
    let n = poses.joints.len();
    let ts = rep.times();
    let up = unit(cfg.up_axis).expect("validated up axis");

    let mut elbow_flex = Vec::with_capacity(n);
    let mut elbow_ext = Vec::with_capacity(n);
    let mut sh_flex = Vec::with_capacity(n);
    let mut sh_abd = Vec::with_capacity(n);
    let mut head_tilt = Vec::with_capacity(n);
    let mut spine_tilt = Vec::with_capacity(n);
    let mut shoulder_tilt = Vec::with_capacity(n);
    for i in 0..n {
        let interior = at_frame(i, geometry::joint_angle(poses.at(i, arm.shoulder()), poses.at(i, arm.elbow()), poses.at(i, arm.wrist())))?;
        elbow_flex.push(180.0 - interior);
        elbow_ext.push(interior);
        let (f, a) = shoulder_angles(&poses, i, arm)?;
        sh_flex.push(f);
        sh_abd.push(a);
        head_tilt.push(at_frame(i, geometry::tilt_angle(poses.at(i, JointName::Head), poses.at(i, JointName::Neck), up))?);
        spine_tilt.push(at_frame(i, geometry::tilt_angle(poses.at(i, JointName::SpineShoulder), poses.at(i, JointName::SpineBase), up))?);
        shoulder_tilt.push(at_frame(i, geometry::tilt_angle(poses.at(i, arm.shoulder()), poses.at(i, arm.other().shoulder()), up))?);
    }

    let wrist = poses.path(arm.wrist());
    let elbow = poses.path(arm.elbow());
    let mut out = vec![
        (Series::ElbowFlexion, elbow_flex),
        (Series::ShoulderFlexion, sh_flex),
        (Series::ElbowExtension, elbow_ext),
        (Series::ShoulderAbduction, sh_abd),
        (Series::HeadTilt, head_tilt),
        (Series::SpineTilt, spine_tilt),
        (Series::ShoulderTilt, shoulder_tilt),
    ];
    for (series, path, order) in [
        (Series::WristSpeed, &wrist, 1),
        (Series::WristAccel, &wrist, 2),
        (Series::WristJerk, &wrist, 3),
        (Series::ElbowSpeed, &elbow, 1),
        (Series::ElbowAccel, &elbow, 2),
        (Series::ElbowJerk, &elbow, 3),
    ] {
        out.push((series, derivative_magnitude(path, &ts, order)?));
    }
    out.push((Series::HeadWristDist, relative_distance(&poses, arm.wrist(), cfg)?));
    out.push((Series::HeadElbowDist, relative_distance(&poses, arm.elbow(), cfg)?));
    debug_assert!(out.iter().map(|(s, _)| *s).eq(Series::ALL));
    Ok(out)
}

/// Summarizes every series into the fixed-length feature vector.
pub fn extract_features(rep: &MotionRepetition, cfg: &FeatureConfig) -> Result<FeatureVector> {
    let series = extract_series(rep, cfg)?;
    let summaries = cfg.canonical_summaries();
    let values: Vec<f64> = series.iter().flat_map(|(_, xs)| summaries.iter().map(move |s| s.apply(xs))).collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("feature {} is not finite", cfg.feature_names()[i])));
    }
    Ok(FeatureVector::new(cfg.feature_names(), values))
}

/// Metadata plus features of one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub subject_id: String,
    pub exercise: Exercise,
    pub side: Side,
    pub rep: usize,
    pub label: Option<bool>,
    pub features: FeatureVector,
}

/// Features for every repetition of a dataset, in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn extract(ds: &Dataset, cfg: &FeatureConfig) -> Result<Self> {
        let rows = ds
            .repetitions()
            .par_iter()
            .map(|rep| {
                Ok(FeatureRow {
                    subject_id: rep.subject_id.clone(),
                    exercise: rep.exercise,
                    side: rep.side,
                    rep: rep.rep,
                    label: rep.label.as_ref().map(|l| l.overall),
                    features: extract_features(rep, cfg)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { names: cfg.feature_names(), rows })
    }

    pub fn filter(&self, pred: impl Fn(&FeatureRow) -> bool) -> FeatureTable {
        FeatureTable { names: self.names.clone(), rows: self.rows.iter().filter(|r| pred(r)).cloned().collect() }
    }

    /// Writes the CSV export: metadata columns, then one column per feature.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["subject".to_string(), "exercise".into(), "side".into(), "rep".into(), "label".into()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.subject_id.clone(),
                r.exercise.code().to_string(),
                r.side.as_str().to_string(),
                r.rep.to_string(),
                r.label.map(|l| u8::from(l).to_string()).unwrap_or_default(),
            ];
            rec.extend(r.features.values().iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::JointFrame;
    use crate::synth::{synth_repetition, ImpairmentSpec};

    #[test]
    fn default_dimension_and_names() {
        let cfg = FeatureConfig::default();
        assert_eq!(cfg.dim(), 60);
        let names = cfg.feature_names();
        assert_eq!(names[0], "elbow_flexion.max");
        assert!(names.contains(&"headwrist_dist.range".to_string()));
        let (rep, _) = synth_repetition(Exercise::E1Cup, ImpairmentSpec::NONE, 2.0, 3).unwrap();
        let fv = extract_features(&rep, &cfg).unwrap();
        assert_eq!(fv.dim(), 60);
        assert!(fv.effective_mask().iter().all(|&m| m));
        assert_eq!(fv.names(), names.as_slice());
    }

    #[test]
    fn summary_order_is_canonical() {
        let a = FeatureConfig { summaries: vec![Summary::Std, Summary::Max], ..Default::default() };
        let b = FeatureConfig { summaries: vec![Summary::Max, Summary::Std, Summary::Max], ..Default::default() };
        assert_eq!(a.feature_names(), b.feature_names());
        assert_eq!(a.dim(), 30);
    }

    #[test]
    fn reduced_rom_shrinks_head_wrist_range() {
        let cfg = FeatureConfig::default();
        let (full, _) = synth_repetition(Exercise::E1Cup, ImpairmentSpec::NONE, 2.0, 11).unwrap();
        let (half, _) = synth_repetition(Exercise::E1Cup, ImpairmentSpec::new(0.5, 0.0, 0.0).unwrap(), 2.0, 11).unwrap();
        let a = extract_features(&full, &cfg).unwrap().get("headwrist_dist.range").unwrap();
        let b = extract_features(&half, &cfg).unwrap().get("headwrist_dist.range").unwrap();
        assert!(a > b, "{a} <= {b}");
    }

    #[test]
    fn static_pose_has_zero_derivatives() {
        let (rep, _) = synth_repetition(Exercise::E2Light, ImpairmentSpec::NONE, 2.0, 0).unwrap();
        let first = rep.frames[0].clone();
        let mut still = rep.clone();
        for (i, f) in still.frames.iter_mut().enumerate() {
            *f = JointFrame::new(rep.frames[i].t, *first.joints());
        }
        let fv = extract_features(&still, &FeatureConfig::default()).unwrap();
        for (name, v) in fv.names().iter().zip(fv.values()) {
            if feature_family(name).is_some_and(|f| matches!(f, Family::Speed | Family::Smoothness)) {
                assert_eq!(*v, 0.0, "{name}");
            }
        }
    }

    #[test]
    fn relative_distance_definition() {
        let (mut rep, _) = synth_repetition(Exercise::E1Cup, ImpairmentSpec::NONE, 2.0, 0).unwrap();
        let cfg = FeatureConfig::default();
        for f in rep.frames.iter_mut() {
            f.set_joint(JointName::SpineBase, [0.0, 0.0, 0.0]);
            f.set_joint(JointName::SpineShoulder, [0.0, 0.5, 0.0]);
            f.set_joint(JointName::Head, [0.0, 1.0, 0.0]);
            f.set_joint(JointName::WristRight, [0.0, 1.0, 0.5]);
        }
        let d = relative_distance_series(&rep, JointName::WristRight, &cfg).unwrap();
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-12));
        for f in rep.frames.iter_mut() {
            let h = f.joint(JointName::Head);
            f.set_joint(JointName::WristRight, h);
        }
        let d = relative_distance_series(&rep, JointName::WristRight, &cfg).unwrap();
        assert!(d.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn relative_distance_is_translation_invariant() {
        let (rep, _) = synth_repetition(Exercise::E3Cane, ImpairmentSpec::NONE, 2.0, 4).unwrap();
        let mut moved = rep.clone();
        moved.frames = rep.frames.iter().map(|f| f.map_joints(|p| geometry::add(p, [1.0, 2.0, 3.0]))).collect();
        let cfg = FeatureConfig::default();
        let a = relative_distance_series(&rep, JointName::WristRight, &cfg).unwrap();
        let b = relative_distance_series(&moved, JointName::WristRight, &cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn collapsed_trunk_reports_frame() {
        let (mut rep, _) = synth_repetition(Exercise::E1Cup, ImpairmentSpec::NONE, 2.0, 0).unwrap();
        let p = rep.frames[4].joint(JointName::SpineBase);
        rep.frames[4].set_joint(JointName::SpineShoulder, p);
        match extract_features(&rep, &FeatureConfig::default()) {
            Err(Error::DegenerateGeometry { frame, .. }) => assert_eq!(frame, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn families_cover_all_series() {
        assert_eq!(feature_family("spine_tilt.max"), Some(Family::Compensation));
        assert_eq!(feature_family("wrist_jerk.mean"), Some(Family::Smoothness));
        assert_eq!(feature_family("elbow_speed.std"), Some(Family::Speed));
        assert_eq!(feature_family("headwrist_dist.range"), Some(Family::Rom));
        assert_eq!(feature_family("nope.max"), None);
    }

    #[test]
    fn csv_header_has_metadata_then_features() {
        let spec = crate::synth::CorpusSpec {
            n_patients: 1,
            n_healthy: 0,
            reps_per_patient_side: 1,
            exercises: vec![Exercise::E1Cup],
            ..Default::default()
        };
        let ds = crate::synth::synth_dataset(&spec).unwrap();
        let table = FeatureTable::extract(&ds, &FeatureConfig::default()).unwrap();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
        assert_eq!(&header[..5], &["subject", "exercise", "side", "rep", "label"]);
        assert_eq!(header.len(), 65);
        assert_eq!(text.lines().count(), 3);
    }
}
