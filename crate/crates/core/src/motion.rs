//! Data model for subjects, exercise repetitions and quality labels, plus the
//! JSON Lines corpus format.
//!
//! One line of the corpus file holds one pre-segmented repetition together with
//! the metadata of the subject who performed it:
//!
//! ```text
//! {"subject":"P01","cohort":"patient","fugl_meyer":37,"exercise":"E1","side":"affected",
//!  "label":{"overall":1,"components":{"rom":1,"smoothness":1,"compensation":1}},
//!  "frames":[{"t":0.0,"joints":{"Head":[x,y,z], ...}}, ...]}
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Minimum number of frames in a repetition.
pub const MIN_FRAMES: usize = 15;
/// Allowed repetition duration in seconds.
pub const MIN_DURATION: f64 = 0.5;
pub const MAX_DURATION: f64 = 30.0;
/// Nominal sensor rate.
pub const FRAME_RATE_HZ: f64 = 30.0;

pub const COMPONENT_ROM: &str = "rom";
pub const COMPONENT_SMOOTHNESS: &str = "smoothness";
pub const COMPONENT_COMPENSATION: &str = "compensation";
pub const DEFAULT_COMPONENTS: [&str; 3] = [COMPONENT_ROM, COMPONENT_SMOOTHNESS, COMPONENT_COMPENSATION];

/// The upper-body joints carried by every frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JointName {
    Head,
    Neck,
    SpineShoulder,
    SpineMid,
    SpineBase,
    ShoulderLeft,
    ShoulderRight,
    ElbowLeft,
    ElbowRight,
    WristLeft,
    WristRight,
}

impl JointName {
    pub const COUNT: usize = 11;

    pub const ALL: [JointName; Self::COUNT] = [
        JointName::Head,
        JointName::Neck,
        JointName::SpineShoulder,
        JointName::SpineMid,
        JointName::SpineBase,
        JointName::ShoulderLeft,
        JointName::ShoulderRight,
        JointName::ElbowLeft,
        JointName::ElbowRight,
        JointName::WristLeft,
        JointName::WristRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JointName::Head => "Head",
            JointName::Neck => "Neck",
            JointName::SpineShoulder => "SpineShoulder",
            JointName::SpineMid => "SpineMid",
            JointName::SpineBase => "SpineBase",
            JointName::ShoulderLeft => "ShoulderLeft",
            JointName::ShoulderRight => "ShoulderRight",
            JointName::ElbowLeft => "ElbowLeft",
            JointName::ElbowRight => "ElbowRight",
            JointName::WristLeft => "WristLeft",
            JointName::WristRight => "WristRight",
        }
    }
}

impl fmt::Display for JointName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JointName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        JointName::ALL.iter().copied().find(|j| j.as_str() == s).ok_or_else(|| format!("unknown joint '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Exercise {
    /// Bring a cup to the mouth.
    #[serde(rename = "E1")]
    E1Cup,
    /// Switch a light on.
    #[serde(rename = "E2")]
    E2Light,
    /// Move forward a cane.
    #[serde(rename = "E3")]
    E3Cane,
}

impl Exercise {
    pub const ALL: [Exercise; 3] = [Exercise::E1Cup, Exercise::E2Light, Exercise::E3Cane];

    pub fn code(self) -> &'static str {
        match self {
            Exercise::E1Cup => "E1",
            Exercise::E2Light => "E2",
            Exercise::E3Cane => "E3",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Exercise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Exercise {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "E1" | "e1" => Ok(Exercise::E1Cup),
            "E2" | "e2" => Ok(Exercise::E2Light),
            "E3" | "e3" => Ok(Exercise::E3Cane),
            other => Err(format!("unknown exercise '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Affected,
    Unaffected,
    Dominant,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Affected => "affected",
            Side::Unaffected => "unaffected",
            Side::Dominant => "dominant",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cohort {
    Patient,
    Healthy,
}

/// One skeleton sample.
#[derive(Debug, Clone, PartialEq)]
pub struct JointFrame {
    pub t: f64,
    joints: [Vec3; JointName::COUNT],
}

impl JointFrame {
    pub fn new(t: f64, joints: [Vec3; JointName::COUNT]) -> Self {
        Self { t, joints }
    }

    pub fn joint(&self, j: JointName) -> Vec3 {
        self.joints[j.index()]
    }

    pub fn set_joint(&mut self, j: JointName, p: Vec3) {
        self.joints[j.index()] = p;
    }

    pub fn joints(&self) -> &[Vec3; JointName::COUNT] {
        &self.joints
    }

    pub fn map_joints(&self, f: impl Fn(Vec3) -> Vec3) -> Self {
        Self { t: self.t, joints: self.joints.map(f) }
    }
}

/// Binary quality of a repetition, optionally broken down into components.
///
/// When components are present the overall label is their conjunction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QualityLabel {
    pub overall: bool,
    pub components: Option<BTreeMap<String, bool>>,
}

impl QualityLabel {
    pub fn overall_only(overall: bool) -> Self {
        Self { overall, components: None }
    }

    pub fn from_components(components: BTreeMap<String, bool>) -> Self {
        let overall = components.values().all(|&v| v);
        Self { overall, components: Some(components) }
    }

    pub fn component(&self, name: &str) -> Option<bool> {
        self.components.as_ref().and_then(|c| c.get(name).copied())
    }

    pub fn as_u8(&self) -> u8 {
        u8::from(self.overall)
    }

    fn is_consistent(&self) -> bool {
        match &self.components {
            Some(c) => c.values().all(|&v| v) == self.overall,
            None => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionRepetition {
    pub subject_id: String,
    pub exercise: Exercise,
    pub side: Side,
    /// Index of this repetition among the subject's (exercise, side) repetitions.
    pub rep: usize,
    pub frames: Vec<JointFrame>,
    pub label: Option<QualityLabel>,
}

impl MotionRepetition {
    pub fn duration(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    pub fn joint_path(&self, j: JointName) -> Vec<Vec3> {
        self.frames.iter().map(|f| f.joint(j)).collect()
    }

    pub fn key(&self) -> (String, Exercise, Side, usize) {
        (self.subject_id.clone(), self.exercise, self.side, self.rep)
    }
}

/// A broken repetition invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TooFewFrames(usize),
    NegativeTime(usize),
    NonMonotoneTime(usize),
    DurationOutOfRange(f64),
    NonFiniteCoordinate { frame: usize, joint: JointName },
    InconsistentLabel,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewFrames(n) => write!(f, "too few frames ({n} < {MIN_FRAMES})"),
            Violation::NegativeTime(i) => write!(f, "negative time at frame {i}"),
            Violation::NonMonotoneTime(i) => write!(f, "non-monotone time at frame {i}"),
            Violation::DurationOutOfRange(d) => {
                write!(f, "duration out of range ({d:.3} s not in [{MIN_DURATION}, {MAX_DURATION}])")
            }
            Violation::NonFiniteCoordinate { frame, joint } => {
                write!(f, "non-finite coordinate for {joint} at frame {frame}")
            }
            Violation::InconsistentLabel => write!(f, "overall label is not the conjunction of its components"),
        }
    }
}

/// Checks every repetition invariant; an empty list means the repetition is valid.
pub fn validate_repetition(rep: &MotionRepetition) -> Vec<Violation> {
    let mut out = Vec::new();
    if rep.frames.len() < MIN_FRAMES {
        out.push(Violation::TooFewFrames(rep.frames.len()));
    }
    for (i, fr) in rep.frames.iter().enumerate() {
        if fr.t < 0.0 {
            out.push(Violation::NegativeTime(i));
            break;
        }
    }
    if let Some(i) = rep.frames.windows(2).position(|w| w[1].t <= w[0].t || w[1].t.is_nan()) {
        out.push(Violation::NonMonotoneTime(i + 1));
    }
    let d = rep.duration();
    if !(MIN_DURATION..=MAX_DURATION).contains(&d) {
        out.push(Violation::DurationOutOfRange(d));
    }
    'frames: for (i, fr) in rep.frames.iter().enumerate() {
        for j in JointName::ALL {
            if fr.joint(j).iter().any(|c| !c.is_finite()) {
                out.push(Violation::NonFiniteCoordinate { frame: i, joint: j });
                break 'frames;
            }
        }
    }
    if let Some(l) = &rep.label {
        if !l.is_consistent() {
            out.push(Violation::InconsistentLabel);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectMeta {
    pub subject_id: String,
    pub cohort: Cohort,
    pub fugl_meyer: Option<u8>,
}

/// A validated collection of subjects and their repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    subjects: Vec<SubjectMeta>,
    repetitions: Vec<MotionRepetition>,
}

impl Dataset {
    /// Builds a dataset, enforcing the cross-record invariants.
    pub fn new(subjects: Vec<SubjectMeta>, repetitions: Vec<MotionRepetition>) -> Result<Self> {
        let schema = |reason: String| Error::Schema { line: 0, reason };
        let mut by_id = HashMap::new();
        for s in &subjects {
            check_subject(s).map_err(schema)?;
            if by_id.insert(s.subject_id.as_str(), s).is_some() {
                return Err(schema(format!("duplicate subject '{}'", s.subject_id)));
            }
        }
        let mut keys = BTreeSet::new();
        for rep in &repetitions {
            let meta = by_id
                .get(rep.subject_id.as_str())
                .ok_or_else(|| schema(format!("repetition refers to unknown subject '{}'", rep.subject_id)))?;
            check_side(meta.cohort, rep.side).map_err(schema)?;
            if let Some(v) = validate_repetition(rep).first() {
                return Err(schema(format!("{} rep {}: {v}", rep.subject_id, rep.rep)));
            }
            if !keys.insert(rep.key()) {
                return Err(schema(format!("duplicate repetition ({}, {}, {}, {})", rep.subject_id, rep.exercise, rep.side, rep.rep)));
            }
        }
        Ok(Self { subjects, repetitions })
    }

    pub fn subjects(&self) -> &[SubjectMeta] {
        &self.subjects
    }

    pub fn repetitions(&self) -> &[MotionRepetition] {
        &self.repetitions
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectMeta> {
        self.subjects.iter().find(|s| s.subject_id == id)
    }

    pub fn subject_ids(&self) -> Vec<&str> {
        self.subjects.iter().map(|s| s.subject_id.as_str()).collect()
    }

    pub fn exercises(&self) -> Vec<Exercise> {
        let set: BTreeSet<Exercise> = self.repetitions.iter().map(|r| r.exercise).collect();
        set.into_iter().collect()
    }

    /// Repetitions of one exercise; subjects without any such repetition are dropped.
    pub fn for_exercise(&self, ex: Exercise) -> Dataset {
        let repetitions: Vec<_> = self.repetitions.iter().filter(|r| r.exercise == ex).cloned().collect();
        let present: BTreeSet<&str> = repetitions.iter().map(|r| r.subject_id.as_str()).collect();
        let subjects = self.subjects.iter().filter(|s| present.contains(s.subject_id.as_str())).cloned().collect();
        Dataset { subjects, repetitions }
    }

    /// Reads a JSON Lines corpus.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut subjects: Vec<SubjectMeta> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut counters: HashMap<(String, Exercise, Side), usize> = HashMap::new();
        let mut keys = BTreeSet::new();
        let mut repetitions = Vec::new();

        for (lineno, line) in text.lines().enumerate() {
            let line_no = lineno + 1;
            if line.trim().is_empty() {
                continue;
            }
            let schema = |reason: String| Error::Schema { line: line_no, reason };
            let rec: Record = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
            let meta = SubjectMeta { subject_id: rec.subject.clone(), cohort: rec.cohort, fugl_meyer: rec.fugl_meyer };
            check_subject(&meta).map_err(schema)?;
            match index.get(&rec.subject) {
                Some(&i) if subjects[i] != meta => {
                    return Err(schema(format!("subject '{}' metadata differs from earlier records", rec.subject)))
                }
                Some(_) => {}
                None => {
                    index.insert(rec.subject.clone(), subjects.len());
                    subjects.push(meta.clone());
                }
            }
            check_side(meta.cohort, rec.side).map_err(schema)?;

            let counter = counters.entry((rec.subject.clone(), rec.exercise, rec.side)).or_insert(0);
            let rep_idx = rec.rep.unwrap_or(*counter);
            *counter = (*counter).max(rep_idx) + 1;

            let label = rec.label.map(|l| l.into_label()).transpose().map_err(schema)?;
            let frames = rec.frames.into_iter().map(FrameRecord::into_frame).collect::<std::result::Result<Vec<_>, _>>().map_err(schema)?;
            let rep = MotionRepetition { subject_id: rec.subject, exercise: rec.exercise, side: rec.side, rep: rep_idx, frames, label };
            let violations = validate_repetition(&rep);
            if !violations.is_empty() {
                let msg: Vec<String> = violations.iter().map(ToString::to_string).collect();
                return Err(schema(msg.join("; ")));
            }
            if !keys.insert(rep.key()) {
                return Err(schema(format!("duplicate repetition ({}, {}, {}, {})", rep.subject_id, rep.exercise, rep.side, rep.rep)));
            }
            repetitions.push(rep);
        }
        if repetitions.is_empty() {
            return Err(Error::Schema { line: 0, reason: "no records".into() });
        }
        Ok(Self { subjects, repetitions })
    }

    /// Serializes to JSON Lines, one repetition per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rep in &self.repetitions {
            let meta = self.subject(&rep.subject_id).expect("validated dataset");
            let rec = Record::from_parts(meta, rep);
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

fn check_subject(s: &SubjectMeta) -> std::result::Result<(), String> {
    match (s.cohort, s.fugl_meyer) {
        (Cohort::Healthy, Some(_)) => Err(format!("fugl_meyer given for healthy subject '{}'", s.subject_id)),
        (Cohort::Patient, Some(fm)) if fm > 66 => Err(format!("fugl_meyer {fm} outside 0..=66")),
        _ => Ok(()),
    }
}

fn check_side(cohort: Cohort, side: Side) -> std::result::Result<(), String> {
    match (cohort, side) {
        (Cohort::Patient, Side::Dominant) => Err("side 'dominant' is only valid for healthy subjects".into()),
        (Cohort::Healthy, Side::Affected | Side::Unaffected) => Err(format!("side '{side}' is only valid for patients")),
        _ => Ok(()),
    }
}

/// Reads and validates a corpus file.
pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    Dataset::from_jsonl(&text)
}

/// Splits off every repetition of `held_out` as the test set.
pub fn split_by_subject(ds: &Dataset, held_out: &str) -> Result<(Dataset, Dataset)> {
    if ds.subject(held_out).is_none() {
        return Err(Error::UnknownSubject(held_out.to_string()));
    }
    let (test_reps, train_reps): (Vec<_>, Vec<_>) = ds.repetitions.iter().cloned().partition(|r| r.subject_id == held_out);
    let (test_subj, train_subj): (Vec<_>, Vec<_>) = ds.subjects.iter().cloned().partition(|s| s.subject_id == held_out);
    Ok((Dataset { subjects: train_subj, repetitions: train_reps }, Dataset { subjects: test_subj, repetitions: test_reps }))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    subject: String,
    cohort: Cohort,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fugl_meyer: Option<u8>,
    exercise: Exercise,
    side: Side,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rep: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<LabelRecord>,
    frames: Vec<FrameRecord>,
}

impl Record {
    fn from_parts(meta: &SubjectMeta, rep: &MotionRepetition) -> Self {
        Record {
            subject: rep.subject_id.clone(),
            cohort: meta.cohort,
            fugl_meyer: meta.fugl_meyer,
            exercise: rep.exercise,
            side: rep.side,
            rep: Some(rep.rep),
            label: rep.label.as_ref().map(|l| LabelRecord {
                overall: l.as_u8(),
                components: l.components.as_ref().map(|c| c.iter().map(|(k, &v)| (k.clone(), u8::from(v))).collect()),
            }),
            frames: rep
                .frames
                .iter()
                .map(|f| FrameRecord { t: f.t, joints: JointName::ALL.iter().map(|&j| (j.as_str().to_string(), f.joint(j))).collect() })
                .collect(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRecord {
    overall: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    components: Option<BTreeMap<String, u8>>,
}

fn bit(v: u8, what: &str) -> std::result::Result<bool, String> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(format!("{what} must be 0 or 1, got {other}")),
    }
}

impl LabelRecord {
    fn into_label(self) -> std::result::Result<QualityLabel, String> {
        let overall = bit(self.overall, "label.overall")?;
        let components = self
            .components
            .map(|c| {
                c.into_iter()
                    .map(|(k, v)| bit(v, &format!("label component '{k}'")).map(|b| (k, b)))
                    .collect::<std::result::Result<BTreeMap<_, _>, _>>()
            })
            .transpose()?;
        let label = QualityLabel { overall, components };
        if !label.is_consistent() {
            return Err("overall label is not the conjunction of its components".into());
        }
        Ok(label)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    t: f64,
    joints: BTreeMap<String, Vec3>,
}

impl FrameRecord {
    fn into_frame(self) -> std::result::Result<JointFrame, String> {
        let mut joints = [[f64::NAN; 3]; JointName::COUNT];
        let mut seen = [false; JointName::COUNT];
        for (name, p) in self.joints {
            let j: JointName = name.parse()?;
            joints[j.index()] = p;
            seen[j.index()] = true;
        }
        if let Some(missing) = JointName::ALL.iter().find(|j| !seen[j.index()]) {
            return Err(format!("missing joint '{missing}' at t={}", self.t));
        }
        Ok(JointFrame::new(self.t, joints))
    }
}
