//! Deviation of a repetition from the subject's normal motion, rendered as
//! corrective messages.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{feature_family, Family, FeatureRow, FeatureVector, NormParams};
use crate::motion::{Exercise, Side};

pub const DEFAULT_THRESHOLD: f64 = 2.0;
pub const MIN_NORMALS: usize = 3;
pub const DEFAULT_TEMPLATES: &str = include_str!("../templates/feedback.txt");

/// Where the normal repetitions of a profile came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalSource {
    UnaffectedSide,
    HealthyCohort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalProfile {
    pub stats: NormParams,
    pub count: usize,
    pub source: Option<NormalSource>,
}

pub fn fit_normal_profile(normals: &[&FeatureVector]) -> Result<NormalProfile> {
    if normals.len() < MIN_NORMALS {
        return Err(Error::InsufficientNormals { needed: MIN_NORMALS, got: normals.len() });
    }
    let names = normals[0].names();
    if normals.iter().any(|fv| fv.names() != names) {
        return Err(Error::NameOrderMismatch);
    }
    let rows: Vec<&[f64]> = normals.iter().map(|fv| fv.values()).collect();
    Ok(NormalProfile { stats: NormParams::fit_rows(names.to_vec(), &rows)?, count: normals.len(), source: None })
}

/// Normal repetitions for `subject` on `exercise`: their own unaffected side when
/// at least three exist, otherwise every healthy repetition of other subjects.
pub fn normal_pool<'a>(rows: &'a [FeatureRow], subject: &str, exercise: Exercise) -> (Vec<&'a FeatureVector>, NormalSource) {
    let own: Vec<&FeatureVector> = rows
        .iter()
        .filter(|r| r.subject_id == subject && r.exercise == exercise && r.side == Side::Unaffected)
        .map(|r| &r.features)
        .collect();
    if own.len() >= MIN_NORMALS {
        return (own, NormalSource::UnaffectedSide);
    }
    let healthy = rows
        .iter()
        .filter(|r| r.subject_id != subject && r.exercise == exercise && r.side == Side::Dominant)
        .map(|r| &r.features)
        .collect();
    (healthy, NormalSource::HealthyCohort)
}

pub fn profile_for(rows: &[FeatureRow], subject: &str, exercise: Exercise) -> Result<NormalProfile> {
    let (pool, source) = normal_pool(rows, subject, exercise);
    let mut p = fit_normal_profile(&pool)?;
    p.source = Some(source);
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationScore {
    pub index: usize,
    pub feature: String,
    pub z: f64,
}

/// z-scores of the acquired features (mask bit set) against the profile.
pub fn deviation_scores(profile: &NormalProfile, fv: &FeatureVector, mask: &[bool]) -> Result<Vec<DeviationScore>> {
    if fv.names() != profile.stats.names.as_slice() {
        return Err(Error::NameOrderMismatch);
    }
    if mask.len() != fv.dim() {
        return Err(Error::LengthMismatch { expected: fv.dim(), got: mask.len() });
    }
    Ok((0..fv.dim())
        .filter(|&i| mask[i])
        .map(|i| DeviationScore {
            index: i,
            feature: fv.names()[i].clone(),
            z: (fv.values()[i] - profile.stats.mean[i]) / profile.stats.std[i],
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Above,
    Below,
}

impl Direction {
    /// Zero counts as above.
    pub fn of(z: f64) -> Self {
        if z >= 0.0 {
            Direction::Above
        } else {
            Direction::Below
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Above => "above",
            Direction::Below => "below",
        }
    }
}

/// Message templates keyed by `family.direction`, `encouragement` and `neutral`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    entries: BTreeMap<String, String>,
}

impl Default for Templates {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATES).expect("bundled templates parse")
    }
}

impl Templates {
    /// Parses `key = message` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("template line {}: expected `key = message`", i + 1)))?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.entries.get(key).map(String::as_str).ok_or_else(|| Error::MissingTemplate(key.to_string()))
    }

    pub fn without(mut self, key: &str) -> Self {
        self.entries.remove(key);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackItem {
    pub feature: String,
    pub z: f64,
    pub direction: Direction,
    pub flagged: bool,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub predicted_label: u8,
    pub threshold: f64,
    /// Scored features, largest |z| first.
    pub items: Vec<FeedbackItem>,
    pub messages: Vec<String>,
}

impl FeedbackReport {
    pub fn flagged_families(&self) -> Vec<Family> {
        let mut f: Vec<Family> = self.items.iter().filter(|i| i.flagged).filter_map(|i| feature_family(&i.feature)).collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let verdict = if self.predicted_label == 1 { "correct" } else { "incorrect" };
        let _ = writeln!(out, "Predicted quality: {verdict}");
        let _ = writeln!(out, "Feedback:");
        for m in &self.messages {
            let _ = writeln!(out, "  - {m}");
        }
        if !self.items.is_empty() {
            let _ = writeln!(out, "Features (|z| > {:.1} flagged):", self.threshold);
            let width = self.items.iter().map(|i| i.feature.len()).max().unwrap_or(0);
            for i in &self.items {
                let mark = if i.flagged { "*" } else { " " };
                let _ = writeln!(out, "  {mark} {:<width$}  z = {:+.2}  {}", i.feature, i.z, i.direction.name());
            }
        }
        out
    }

    pub fn render_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn fill(template: &str, feature: &str, z: f64) -> String {
    template.replace("{feature}", feature).replace("{z}", &format!("{z:+.2}"))
}

/// Flags features with |z| above `threshold` and writes at most one message per
/// feature family, ordered by |z|.
pub fn generate_feedback(scores: &[DeviationScore], predicted_label: u8, templates: &Templates, threshold: f64) -> Result<FeedbackReport> {
    let mut sorted: Vec<&DeviationScore> = scores.iter().collect();
    sorted.sort_by(|a, b| b.z.abs().total_cmp(&a.z.abs()).then(a.index.cmp(&b.index)));
    let mut seen = Vec::new();
    let mut items = Vec::with_capacity(sorted.len());
    let mut messages = Vec::new();
    for s in sorted {
        let direction = Direction::of(s.z);
        let flagged = s.z.abs() > threshold;
        let mut message = None;
        if flagged {
            let family = feature_family(&s.feature).ok_or_else(|| Error::MissingTemplate(s.feature.clone()))?;
            if !seen.contains(&family) {
                seen.push(family);
                let m = fill(templates.get(&format!("{}.{}", family.name(), direction.name()))?, &s.feature, s.z);
                messages.push(m.clone());
                message = Some(m);
            }
        }
        items.push(FeedbackItem { feature: s.feature.clone(), z: s.z, direction, flagged, message });
    }
    if messages.is_empty() {
        let key = if predicted_label == 1 { "encouragement" } else { "neutral" };
        messages.push(templates.get(key)?.to_string());
    }
    Ok(FeedbackReport { predicted_label, threshold, items, messages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(names: &[&str], vals: &[f64]) -> FeatureVector {
        FeatureVector::new(names.iter().map(|s| s.to_string()).collect(), vals.to_vec())
    }

    fn score(name: &str, z: f64, index: usize) -> DeviationScore {
        DeviationScore { index, feature: name.into(), z }
    }

    #[test]
    fn profile_examples() {
        let n = ["a"];
        let (a, b, c) = (fv(&n, &[1.0]), fv(&n, &[2.0]), fv(&n, &[3.0]));
        let p = fit_normal_profile(&[&a, &b, &c]).unwrap();
        assert_eq!(p.stats.mean[0], 2.0);
        assert!((p.stats.std[0] - 0.816496580927726).abs() < 1e-12);
        let z = deviation_scores(&p, &fv(&n, &[0.5]), &[true]).unwrap();
        assert!((z[0].z + 1.8371173070873836).abs() < 1e-9);
        let same = fit_normal_profile(&[&a, &a, &a]).unwrap();
        assert_eq!(same.stats.std[0], 1e-8);
        assert!(matches!(fit_normal_profile(&[&a, &b]), Err(Error::InsufficientNormals { needed: 3, got: 2 })));
    }

    #[test]
    fn unmasked_features_are_omitted() {
        let n = ["a", "b"];
        let rows = [fv(&n, &[0.0, 1.0]), fv(&n, &[2.0, 3.0]), fv(&n, &[4.0, 5.0])];
        let p = fit_normal_profile(&rows.iter().collect::<Vec<_>>()).unwrap();
        let z = deviation_scores(&p, &fv(&n, &[2.0, 9.0]), &[true, false]).unwrap();
        assert_eq!(z.len(), 1);
        assert_eq!(z[0].z, 0.0);
        assert!(matches!(deviation_scores(&p, &fv(&["b", "a"], &[0.0, 0.0]), &[true, true]), Err(Error::NameOrderMismatch)));
    }

    #[test]
    fn encouragement_when_nothing_flagged() {
        let t = Templates::default();
        let r = generate_feedback(&[score("wrist_jerk.max", 1.5, 0), score("head_tilt.max", -2.0, 1)], 1, &t, 2.0).unwrap();
        assert_eq!(r.messages, vec![t.get("encouragement").unwrap().to_string()]);
        assert!(r.items.iter().all(|i| !i.flagged));
    }

    #[test]
    fn rom_below_message() {
        let t = Templates::default();
        let r = generate_feedback(&[score("headwrist_dist.range", -3.1, 0)], 0, &t, 2.0).unwrap();
        assert_eq!(r.flagged_families(), vec![Family::Rom]);
        assert_eq!(r.items[0].direction, Direction::Below);
        assert!(r.messages[0].starts_with("Try to reach a bit further"));
        assert!(r.messages[0].contains("-3.10"));
    }

    #[test]
    fn one_message_per_family_ordered_by_magnitude() {
        let t = Templates::default();
        let s = [
            score("headwrist_dist.range", -3.0, 0),
            score("elbow_flexion.max", -4.0, 1),
            score("head_tilt.max", 5.0, 2),
            score("wrist_jerk.std", 0.5, 3),
        ];
        let r = generate_feedback(&s, 0, &t, 2.0).unwrap();
        assert_eq!(r.messages.len(), 2);
        assert!(r.messages[0].contains("head_tilt.max"));
        assert!(r.messages[1].contains("elbow_flexion.max"));
        assert_eq!(r.items.iter().filter(|i| i.message.is_some()).count(), 2);
        assert_eq!(r.items.iter().map(|i| i.feature.as_str()).collect::<Vec<_>>()[0], "head_tilt.max");
    }

    #[test]
    fn missing_template() {
        let t = Templates::default().without("smoothness.above");
        let r = generate_feedback(&[score("wrist_jerk.max", 3.0, 0)], 0, &t, 2.0);
        assert!(matches!(r, Err(Error::MissingTemplate(k)) if k == "smoothness.above"));
    }

    #[test]
    fn rendering_is_pure() {
        let t = Templates::default();
        let s = [score("head_tilt.max", 2.5, 0), score("wrist_speed.mean", -0.3, 1)];
        let a = generate_feedback(&s, 0, &t, 2.0).unwrap();
        let b = generate_feedback(&s, 0, &t, 2.0).unwrap();
        assert_eq!(a.render_text(), b.render_text());
        assert_eq!(a.render_json().unwrap(), b.render_json().unwrap());
        let json: serde_json::Value = serde_json::from_str(&a.render_json().unwrap()).unwrap();
        assert_eq!(json["items"][0]["feature"], "head_tilt.max");
        assert_eq!(json["items"][0]["direction"], "above");
    }

    #[test]
    fn bundled_templates_cover_every_family() {
        let t = Templates::default();
        for f in Family::ALL {
            for d in ["above", "below"] {
                assert!(t.get(&format!("{}.{d}", f.name())).is_ok());
            }
        }
        assert!(Templates::parse("no equals sign").is_err());
    }

    proptest! {
        #[test]
        fn z_scores_are_affine_invariant(
            vals in prop::collection::vec(-10.0..10.0f64, 5),
            x in -10.0..10.0f64,
            a in 0.1..10.0f64,
            b in -100.0..100.0f64,
        ) {
            let spread: f64 = vals.iter().map(|v| (v - vals[0]).abs()).sum();
            prop_assume!(spread > 1e-3);
            let n = ["f"];
            let raw: Vec<FeatureVector> = vals.iter().map(|&v| fv(&n, &[v])).collect();
            let moved: Vec<FeatureVector> = vals.iter().map(|&v| fv(&n, &[a * v + b])).collect();
            let p1 = fit_normal_profile(&raw.iter().collect::<Vec<_>>()).unwrap();
            let p2 = fit_normal_profile(&moved.iter().collect::<Vec<_>>()).unwrap();
            let z1 = deviation_scores(&p1, &fv(&n, &[x]), &[true]).unwrap()[0].z;
            let z2 = deviation_scores(&p2, &fv(&n, &[a * x + b]), &[true]).unwrap()[0].z;
            prop_assert!((z1 - z2).abs() <= 1e-6 * (1.0 + z1.abs()));
        }
    }
}
