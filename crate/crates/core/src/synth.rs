//! Deterministic synthetic motion corpus.
//!
//! Healthy motion is a point-to-point minimum-jerk reach of the wrist (out and
//! back), with the elbow placed by two-link inverse kinematics. Impairments are
//! injected along three axes:
//!
//! * `rom_scale` shrinks the wrist excursion toward the start pose,
//! * `jerk_noise_amp` adds three random-phase sinusoids in the 2–6 Hz band,
//! * `trunk_lean_deg` tilts the whole upper body toward the reach direction.
//!
//! Oracle labels come from fixed thresholds on those axes.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{add, cross, dot, lerp, norm, normalize, scale, sub, Rotation, Vec3};
use crate::motion::{
    Cohort, Dataset, Exercise, JointFrame, JointName, MotionRepetition, QualityLabel, Side, SubjectMeta, COMPONENT_COMPENSATION,
    COMPONENT_ROM, COMPONENT_SMOOTHNESS, FRAME_RATE_HZ,
};
use crate::seeding::{derive_seed, rng_from};

/// Smallest `rom_scale` still labelled a full range of motion.
pub const ROM_THRESHOLD: f64 = 0.8;
/// Largest noise amplitude (m) still labelled smooth.
pub const JERK_NOISE_THRESHOLD: f64 = 0.01;
/// Largest trunk lean (deg) not labelled compensation.
pub const TRUNK_LEAN_THRESHOLD: f64 = 5.0;

const NOISE_COMPONENTS: usize = 3;
const NOISE_BAND_HZ: (f64, f64) = (2.0, 6.0);

/// Minimum-jerk interpolation `x0 + (xf - x0)(10τ³ - 15τ⁴ + 6τ⁵)`.
pub fn min_jerk_scalar(x0: f64, xf: f64, tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("tau {tau} outside [0, 1]")));
    }
    Ok(x0 + (xf - x0) * min_jerk_profile(tau))
}

fn min_jerk_profile(tau: f64) -> f64 {
    let t3 = tau * tau * tau;
    t3 * (10.0 - 15.0 * tau + 6.0 * tau * tau)
}

/// Out-and-back profile over a repetition: 0 → 1 in the first half, back to 0.
fn reach_profile(phase: f64) -> f64 {
    if phase <= 0.5 {
        min_jerk_profile(2.0 * phase)
    } else {
        min_jerk_profile(2.0 - 2.0 * phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpairmentSpec {
    pub rom_scale: f64,
    pub jerk_noise_amp: f64,
    pub trunk_lean_deg: f64,
}

impl ImpairmentSpec {
    pub const NONE: ImpairmentSpec = ImpairmentSpec { rom_scale: 1.0, jerk_noise_amp: 0.0, trunk_lean_deg: 0.0 };

    pub fn new(rom_scale: f64, jerk_noise_amp: f64, trunk_lean_deg: f64) -> Result<Self> {
        let spec = Self { rom_scale, jerk_noise_amp, trunk_lean_deg };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rom_scale > 0.0 && self.rom_scale <= 1.0) {
            return Err(Error::Domain(format!("rom_scale {} outside (0, 1]", self.rom_scale)));
        }
        if !(self.jerk_noise_amp >= 0.0 && self.jerk_noise_amp.is_finite()) {
            return Err(Error::Domain(format!("jerk_noise_amp {} must be >= 0", self.jerk_noise_amp)));
        }
        if !(0.0..=60.0).contains(&self.trunk_lean_deg) {
            return Err(Error::Domain(format!("trunk_lean_deg {} outside [0, 60]", self.trunk_lean_deg)));
        }
        Ok(())
    }

    pub fn rom_ok(&self) -> bool {
        self.rom_scale >= ROM_THRESHOLD
    }

    pub fn smooth_ok(&self) -> bool {
        self.jerk_noise_amp <= JERK_NOISE_THRESHOLD
    }

    pub fn compensation_ok(&self) -> bool {
        self.trunk_lean_deg <= TRUNK_LEAN_THRESHOLD
    }

    /// Oracle label implied by the thresholds.
    pub fn label(&self) -> QualityLabel {
        QualityLabel::from_components(BTreeMap::from([
            (COMPONENT_ROM.to_string(), self.rom_ok()),
            (COMPONENT_SMOOTHNESS.to_string(), self.smooth_ok()),
            (COMPONENT_COMPENSATION.to_string(), self.compensation_ok()),
        ]))
    }
}

impl Default for ImpairmentSpec {
    fn default() -> Self {
        Self::NONE
    }
}

/// Which arm performs the exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Left,
    Right,
}

impl Arm {
    /// Side convention used throughout: affected and dominant arms are right.
    pub fn for_side(side: Side) -> Arm {
        match side {
            Side::Affected | Side::Dominant => Arm::Right,
            Side::Unaffected => Arm::Left,
        }
    }

    pub fn shoulder(self) -> JointName {
        match self {
            Arm::Left => JointName::ShoulderLeft,
            Arm::Right => JointName::ShoulderRight,
        }
    }

    pub fn elbow(self) -> JointName {
        match self {
            Arm::Left => JointName::ElbowLeft,
            Arm::Right => JointName::ElbowRight,
        }
    }

    pub fn wrist(self) -> JointName {
        match self {
            Arm::Left => JointName::WristLeft,
            Arm::Right => JointName::WristRight,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Left => Arm::Right,
            Arm::Right => Arm::Left,
        }
    }

    /// +1 toward the subject's right.
    fn lateral_sign(self) -> f64 {
        match self {
            Arm::Right => 1.0,
            Arm::Left => -1.0,
        }
    }
}

/// Anthropometry and placement of one synthetic subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyShape {
    /// SpineBase position in the camera frame.
    pub origin: Vec3,
    /// Rotation of the body about the vertical axis, degrees.
    pub yaw_deg: f64,
    pub trunk: f64,
    pub neck: f64,
    pub head: f64,
    pub shoulder_half_width: f64,
    pub upper_arm: f64,
    pub forearm: f64,
    /// Per-subject offset of every reach target, body frame (lateral-out, up, forward).
    pub target_offset: Vec3,
}

impl Default for BodyShape {
    fn default() -> Self {
        Self {
            origin: [0.0, 0.0, 2.5],
            yaw_deg: 0.0,
            trunk: 0.5,
            neck: 0.08,
            head: 0.15,
            shoulder_half_width: 0.18,
            upper_arm: 0.30,
            forearm: 0.27,
            target_offset: [0.0; 3],
        }
    }
}

impl BodyShape {
    fn sample(rng: &mut impl Rng) -> Self {
        let h = rng.gen_range(0.95..1.05);
        let mut jit = |base: f64| base * h * rng.gen_range(0.98..1.02);
        let trunk = jit(0.5);
        let neck = jit(0.08);
        let head = jit(0.15);
        let shoulder_half_width = jit(0.18);
        let upper_arm = jit(0.30);
        let forearm = jit(0.27);
        Self {
            origin: [rng.gen_range(-0.2..0.2), rng.gen_range(-0.1..0.1), rng.gen_range(2.2..2.8)],
            yaw_deg: rng.gen_range(-10.0..10.0),
            trunk,
            neck,
            head,
            shoulder_half_width,
            upper_arm,
            forearm,
            target_offset: [rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02), rng.gen_range(-0.02..0.02)],
        }
    }
}

/// Body frame: x toward the subject's right, y up, z toward where the subject faces.
struct BodyFrame {
    yaw: Rotation,
    origin: Vec3,
}

impl BodyFrame {
    fn new(body: &BodyShape) -> Self {
        Self { yaw: Rotation::about_axis([0.0, 1.0, 0.0], body.yaw_deg.to_radians()), origin: body.origin }
    }

    /// Subject faces the camera (−z in the camera frame); their right is camera −x.
    fn to_camera(&self, p: Vec3) -> Vec3 {
        add(self.origin, self.yaw.apply([-p[0], p[1], -p[2]]))
    }
}

/// Start and target wrist positions relative to the active shoulder,
/// in (lateral-out, up, forward) coordinates.
fn exercise_targets(ex: Exercise) -> (Vec3, Vec3) {
    match ex {
        Exercise::E1Cup => ([0.02, -0.50, 0.15], [-0.12, 0.15, 0.12]),
        Exercise::E2Light => ([0.02, -0.50, 0.15], [0.15, 0.05, 0.45]),
        Exercise::E3Cane => ([0.05, -0.46, 0.15], [0.05, -0.36, 0.40]),
    }
}

const REST_WRIST: Vec3 = [0.02, -0.50, 0.12];

#[derive(Debug, Clone, Copy)]
struct NoiseComponent {
    freq_hz: f64,
    phase: f64,
    dir: Vec3,
}

fn sample_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let n = norm(v);
        if n > 0.1 && n <= 1.0 {
            return scale(v, 1.0 / n);
        }
    }
}

/// Places the elbow for a shoulder/wrist pair; returns the (possibly clamped) wrist too.
fn two_link_ik(shoulder: Vec3, wrist: Vec3, upper: f64, fore: f64, pole: Vec3) -> (Vec3, Vec3) {
    let reach = sub(wrist, shoulder);
    let max_d = (upper + fore) * 0.995;
    let min_d = (upper - fore).abs() + 1e-3;
    let d_raw = norm(reach);
    let d = d_raw.clamp(min_d, max_d);
    let n = normalize(reach).unwrap_or([0.0, -1.0, 0.0]);
    let wrist = add(shoulder, scale(n, d));
    let along = (upper * upper - fore * fore + d * d) / (2.0 * d);
    let radius = (upper * upper - along * along).max(0.0).sqrt();
    let perp = sub(pole, scale(n, dot(pole, n)));
    let e = normalize(perp).unwrap_or_else(|| normalize(cross(n, [1.0, 0.0, 0.0])).unwrap_or([0.0, 0.0, -1.0]));
    (add(add(shoulder, scale(n, along)), scale(e, radius)), wrist)
}

/// Everything needed to synthesize one repetition.
#[derive(Debug, Clone)]
pub struct RepetitionSpec {
    pub subject_id: String,
    pub exercise: Exercise,
    pub side: Side,
    pub rep: usize,
    pub body: BodyShape,
    pub impairment: ImpairmentSpec,
    /// Seconds, within [1, 10].
    pub duration: f64,
    /// Per-repetition scale of both wrist waypoints about the active shoulder.
    pub reach_scale: f64,
    pub seed: u64,
}

impl RepetitionSpec {
    pub fn new(exercise: Exercise, impairment: ImpairmentSpec, duration: f64, seed: u64) -> Self {
        Self {
            subject_id: "SYN".into(),
            exercise,
            side: Side::Affected,
            rep: 0,
            body: BodyShape::default(),
            impairment,
            duration,
            reach_scale: 1.0,
            seed,
        }
    }
}

/// Synthesizes one repetition with the default body on the affected (right) side.
pub fn synth_repetition(
    exercise: Exercise,
    impairment: ImpairmentSpec,
    duration: f64,
    seed: u64,
) -> Result<(MotionRepetition, QualityLabel)> {
    synth_repetition_with(&RepetitionSpec::new(exercise, impairment, duration, seed))
}

pub fn synth_repetition_with(spec: &RepetitionSpec) -> Result<(MotionRepetition, QualityLabel)> {
    spec.impairment.validate()?;
    if !(1.0..=10.0).contains(&spec.duration) {
        return Err(Error::Domain(format!("duration {} s outside [1, 10]", spec.duration)));
    }
    let mut rng = rng_from(spec.seed);
    let noise: Vec<NoiseComponent> = (0..NOISE_COMPONENTS)
        .map(|_| NoiseComponent {
            freq_hz: rng.gen_range(NOISE_BAND_HZ.0..NOISE_BAND_HZ.1),
            phase: rng.gen_range(0.0..std::f64::consts::TAU),
            dir: sample_unit(&mut rng),
        })
        .collect();

    let body = &spec.body;
    let frame = BodyFrame::new(body);
    let arm = Arm::for_side(spec.side);
    let sign = arm.lateral_sign();
    // body-frame helpers: lateral-out/up/forward for the active arm → x/y/z
    let active = |p: Vec3| [sign * p[0], p[1], p[2]];
    let passive = |p: Vec3| [-sign * p[0], p[1], p[2]];

    let spine_base = [0.0, 0.0, 0.0];
    let spine_mid = [0.0, body.trunk * 0.5, 0.0];
    let spine_shoulder = [0.0, body.trunk, 0.0];
    let neck = [0.0, body.trunk + body.neck, 0.0];
    let head = [0.0, body.trunk + body.neck + body.head, 0.0];
    let shoulder_active = add(spine_shoulder, active([body.shoulder_half_width, 0.0, 0.0]));
    let shoulder_passive = add(spine_shoulder, passive([body.shoulder_half_width, 0.0, 0.0]));

    let arm_scale = (body.upper_arm + body.forearm) / 0.57;
    let (start_rel, target_rel) = exercise_targets(spec.exercise);
    let k = spec.reach_scale;
    let start = add(shoulder_active, active(scale(start_rel, arm_scale * k)));
    let full_target = add(shoulder_active, active(scale(add(scale(target_rel, arm_scale), body.target_offset), k)));
    let target = lerp(start, full_target, spec.impairment.rom_scale);

    let rest_passive_wrist = add(shoulder_passive, passive(scale(REST_WRIST, arm_scale)));
    let pole_active = active([0.5, -1.0, -0.5]);
    let pole_passive = passive([0.5, -1.0, -0.5]);
    let (elbow_passive, rest_passive_wrist) = two_link_ik(shoulder_passive, rest_passive_wrist, body.upper_arm, body.forearm, pole_passive);

    // lean toward the horizontal reach direction
    let reach = sub(full_target, start);
    let horiz = normalize([reach[0], 0.0, reach[2]]).unwrap_or([0.0, 0.0, 1.0]);
    let lean_axis = cross([0.0, 1.0, 0.0], horiz);

    let n_frames = (spec.duration * FRAME_RATE_HZ).round() as usize + 1;
    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let t = i as f64 / FRAME_RATE_HZ;
        let phase = (t / spec.duration).min(1.0);
        let s = reach_profile(phase);
        let mut wrist = lerp(start, target, s);
        for c in &noise {
            let a = spec.impairment.jerk_noise_amp * (std::f64::consts::TAU * c.freq_hz * t + c.phase).sin();
            wrist = add(wrist, scale(c.dir, a));
        }
        let (elbow, wrist) = two_link_ik(shoulder_active, wrist, body.upper_arm, body.forearm, pole_active);

        let lean = Rotation::about_axis(lean_axis, (spec.impairment.trunk_lean_deg * s).to_radians());
        let tilt = |p: Vec3| add(spine_base, lean.apply(sub(p, spine_base)));

        let mut joints = [[0.0; 3]; JointName::COUNT];
        let mut put = |j: JointName, p: Vec3| joints[j.index()] = frame.to_camera(p);
        put(JointName::SpineBase, spine_base);
        put(JointName::SpineMid, tilt(spine_mid));
        put(JointName::SpineShoulder, tilt(spine_shoulder));
        put(JointName::Neck, tilt(neck));
        put(JointName::Head, tilt(head));
        put(arm.shoulder(), tilt(shoulder_active));
        put(arm.elbow(), tilt(elbow));
        put(arm.wrist(), tilt(wrist));
        put(arm.other().shoulder(), tilt(shoulder_passive));
        put(arm.other().elbow(), tilt(elbow_passive));
        put(arm.other().wrist(), tilt(rest_passive_wrist));
        frames.push(JointFrame::new(t, joints));
    }

    let label = spec.impairment.label();
    let rep = MotionRepetition {
        subject_id: spec.subject_id.clone(),
        exercise: spec.exercise,
        side: spec.side,
        rep: spec.rep,
        frames,
        label: Some(label.clone()),
    };
    Ok((rep, label))
}

fn default_n_patients() -> usize {
    15
}
fn default_n_healthy() -> usize {
    11
}
fn default_reps_patient() -> usize {
    10
}
fn default_reps_healthy() -> usize {
    15
}
fn default_exercises() -> Vec<Exercise> {
    Exercise::ALL.to_vec()
}

/// Shape of a synthetic corpus. Defaults follow the clinical study design:
/// 15 patients × 10 repetitions × 2 sides and 11 healthy subjects × 15 repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    #[serde(default = "default_n_patients")]
    pub n_patients: usize,
    #[serde(default = "default_n_healthy")]
    pub n_healthy: usize,
    #[serde(default = "default_reps_patient")]
    pub reps_per_patient_side: usize,
    #[serde(default = "default_reps_healthy")]
    pub reps_per_healthy: usize,
    #[serde(default = "default_exercises")]
    pub exercises: Vec<Exercise>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            n_patients: default_n_patients(),
            n_healthy: default_n_healthy(),
            reps_per_patient_side: default_reps_patient(),
            reps_per_healthy: default_reps_healthy(),
            exercises: default_exercises(),
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients + self.n_healthy == 0 {
            return Err(Error::Config("corpus needs at least one subject".into()));
        }
        if self.reps_per_patient_side == 0 || self.reps_per_healthy == 0 {
            return Err(Error::Config("repetition counts must be >= 1".into()));
        }
        if self.exercises.is_empty() {
            return Err(Error::Config("at least one exercise is required".into()));
        }
        Ok(())
    }

    /// Number of repetitions `synth_dataset` will produce for each exercise.
    pub fn reps_per_exercise(&self) -> usize {
        self.n_patients * self.reps_per_patient_side * 2 + self.n_healthy * self.reps_per_healthy
    }
}

/// Per-patient impairment profile for the affected side.
///
/// Each axis is impaired independently with probability 1/2. Impaired values sit
/// well past the label threshold and unimpaired values well inside it, so the
/// oracle label is unambiguous.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatientProfile {
    pub impairment: ImpairmentSpec,
    pub fugl_meyer: u8,
}

fn sample_patient(rng: &mut impl Rng) -> PatientProfile {
    let rom_bad = rng.gen_bool(0.5);
    let jerk_bad = rng.gen_bool(0.5);
    let lean_bad = rng.gen_bool(0.5);
    let impairment = ImpairmentSpec {
        rom_scale: if rom_bad { rng.gen_range(0.4..0.65) } else { rng.gen_range(0.95..=1.0) },
        jerk_noise_amp: if jerk_bad { rng.gen_range(0.02..0.05) } else { 0.0 },
        trunk_lean_deg: if lean_bad { rng.gen_range(12.0..25.0) } else { 0.0 },
    };
    let n_bad = u8::from(rom_bad) + u8::from(jerk_bad) + u8::from(lean_bad);
    let fugl_meyer = 66 - 14 * n_bad - rng.gen_range(0..8u8);
    PatientProfile { impairment, fugl_meyer }
}

/// Small per-repetition variation that never crosses a label threshold.
fn jitter_impairment(base: ImpairmentSpec, rng: &mut impl Rng) -> ImpairmentSpec {
    let rom_scale = if base.rom_ok() {
        (base.rom_scale + rng.gen_range(-0.02..0.02)).clamp(0.9, 1.0)
    } else {
        (base.rom_scale + rng.gen_range(-0.03..0.03)).clamp(0.35, 0.7)
    };
    let jerk_noise_amp = if base.jerk_noise_amp > 0.0 { base.jerk_noise_amp * rng.gen_range(0.9..1.1) } else { 0.0 };
    let trunk_lean_deg = if base.trunk_lean_deg > 0.0 { (base.trunk_lean_deg + rng.gen_range(-1.5..1.5)).clamp(8.0, 60.0) } else { 0.0 };
    ImpairmentSpec { rom_scale, jerk_noise_amp, trunk_lean_deg }
}

/// The synthetic subjects of a corpus, in output order.
#[derive(Debug, Clone)]
pub struct SyntheticSubject {
    pub meta: SubjectMeta,
    pub body: BodyShape,
    pub patient: Option<PatientProfile>,
    index: u64,
}

pub fn synth_subjects(spec: &CorpusSpec) -> Vec<SyntheticSubject> {
    let mut out = Vec::with_capacity(spec.n_patients + spec.n_healthy);
    for i in 0..spec.n_patients {
        let mut rng = rng_from(derive_seed(spec.seed, &[1, i as u64]));
        let body = BodyShape::sample(&mut rng);
        let profile = sample_patient(&mut rng);
        out.push(SyntheticSubject {
            meta: SubjectMeta { subject_id: format!("P{:02}", i + 1), cohort: Cohort::Patient, fugl_meyer: Some(profile.fugl_meyer) },
            body,
            patient: Some(profile),
            index: i as u64,
        });
    }
    for i in 0..spec.n_healthy {
        let mut rng = rng_from(derive_seed(spec.seed, &[2, i as u64]));
        out.push(SyntheticSubject {
            meta: SubjectMeta { subject_id: format!("H{:02}", i + 1), cohort: Cohort::Healthy, fugl_meyer: None },
            body: BodyShape::sample(&mut rng),
            patient: None,
            index: 1000 + i as u64,
        });
    }
    out
}

/// Repetition spec for one (subject, exercise, side, rep) cell of a corpus.
pub fn repetition_spec(corpus_seed: u64, subject: &SyntheticSubject, exercise: Exercise, side: Side, rep: usize) -> RepetitionSpec {
    let side_idx = match side {
        Side::Affected => 0,
        Side::Unaffected => 1,
        Side::Dominant => 2,
    };
    let key = [3, subject.index, exercise.index() as u64, side_idx, rep as u64];
    let mut rng = rng_from(derive_seed(corpus_seed, &key));
    // per (subject, exercise) tempo, shared by both sides
    let mut tempo_rng = rng_from(derive_seed(corpus_seed, &[4, subject.index, exercise.index() as u64]));
    let base_duration = tempo_rng.gen_range(1.8..2.6);
    // Repetitions of one subject differ only in how far the reach extends.
    let extent: f64 = rng.gen_range(-1.0..1.0);
    let impairment = match (side, subject.patient) {
        (Side::Affected, Some(p)) => jitter_impairment(p.impairment, &mut rng),
        _ => ImpairmentSpec::NONE,
    };
    RepetitionSpec {
        subject_id: subject.meta.subject_id.clone(),
        exercise,
        side,
        rep,
        body: subject.body,
        impairment,
        // whole number of frame intervals so the last frame lands on the end of the motion
        duration: (base_duration * FRAME_RATE_HZ).round() / FRAME_RATE_HZ,
        reach_scale: 1.0 + 0.05 * extent,
        seed: rng.gen(),
    }
}

/// Generates a full labelled corpus; identical specs give identical datasets.
pub fn synth_dataset(spec: &CorpusSpec) -> Result<Dataset> {
    spec.validate()?;
    let subjects = synth_subjects(spec);
    let mut reps = Vec::with_capacity(spec.reps_per_exercise() * spec.exercises.len());
    for subject in &subjects {
        let sides: &[Side] = match subject.meta.cohort {
            Cohort::Patient => &[Side::Affected, Side::Unaffected],
            Cohort::Healthy => &[Side::Dominant],
        };
        let n_reps = match subject.meta.cohort {
            Cohort::Patient => spec.reps_per_patient_side,
            Cohort::Healthy => spec.reps_per_healthy,
        };
        for &exercise in &spec.exercises {
            for &side in sides {
                for rep in 0..n_reps {
                    let rs = repetition_spec(spec.seed, subject, exercise, side, rep);
                    reps.push(synth_repetition_with(&rs)?.0);
                }
            }
        }
    }
    Dataset::new(subjects.into_iter().map(|s| s.meta).collect(), reps)
}
