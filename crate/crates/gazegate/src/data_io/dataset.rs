//! The dataset manifest and the in-memory dataset it describes.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::recording::{read_recording, write_recording};
use super::{DataIoError, ManifestError, ManifestViolation};
use crate::evaluation::Aoi;
use crate::gaze::GazeSeries;

/// Manifest schema version this build reads and writes.
pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// One stimulus: an id, how long it was shown, and its areas of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusInfo {
    pub id: String,
    pub duration_s: f64,
    pub aois: Vec<Aoi>,
}

/// One recording file, keyed by who watched what.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingRef {
    pub subject_id: String,
    pub stimulus_id: String,
    /// Relative to the manifest's directory, with `/` separators.
    pub path: String,
}

/// The JSON document at the root of a dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub name: String,
    pub rate_hz: f64,
    pub subjects: Vec<String>,
    pub stimuli: Vec<StimulusInfo>,
    pub recordings: Vec<RecordingRef>,
}

impl DatasetManifest {
    /// Checks every manifest rule and returns all violations at once.
    pub fn validate(&self) -> Vec<ManifestViolation> {
        let mut v = Vec::new();
        if self.format_version != MANIFEST_FORMAT_VERSION {
            v.push(ManifestViolation::UnsupportedVersion { found: self.format_version });
        }
        if !self.rate_hz.is_finite() || self.rate_hz <= 0.0 {
            v.push(ManifestViolation::InvalidRate { rate: self.rate_hz });
        }

        let mut subjects = HashSet::new();
        for s in &self.subjects {
            if !subjects.insert(s.as_str()) {
                v.push(ManifestViolation::DuplicateSubject { subject: s.clone() });
            }
        }
        let mut stimuli = HashSet::new();
        for stim in &self.stimuli {
            if !stimuli.insert(stim.id.as_str()) {
                v.push(ManifestViolation::DuplicateStimulus { stimulus: stim.id.clone() });
            }
            if !stim.duration_s.is_finite() || stim.duration_s <= 0.0 {
                v.push(ManifestViolation::InvalidDuration {
                    stimulus: stim.id.clone(),
                    duration: stim.duration_s,
                });
            }
            let mut aoi_ids = HashSet::new();
            for aoi in &stim.aois {
                if let Err(e) = aoi.validate() {
                    v.push(ManifestViolation::InvalidAoi {
                        stimulus: stim.id.clone(),
                        reason: e.to_string(),
                    });
                }
                if !aoi_ids.insert(aoi.id.as_str()) {
                    v.push(ManifestViolation::InvalidAoi {
                        stimulus: stim.id.clone(),
                        reason: format!("AOI id '{}' appears more than once", aoi.id),
                    });
                }
            }
        }

        let mut paths = HashSet::new();
        let mut pairs = HashSet::new();
        for r in &self.recordings {
            if !subjects.contains(r.subject_id.as_str()) {
                v.push(ManifestViolation::UnknownSubject {
                    path: r.path.clone(),
                    subject: r.subject_id.clone(),
                });
            }
            if !stimuli.contains(r.stimulus_id.as_str()) {
                v.push(ManifestViolation::UnknownStimulus {
                    path: r.path.clone(),
                    stimulus: r.stimulus_id.clone(),
                });
            }
            if !paths.insert(r.path.as_str()) {
                v.push(ManifestViolation::DuplicatePath { path: r.path.clone() });
            }
            if !pairs.insert((r.subject_id.as_str(), r.stimulus_id.as_str())) {
                v.push(ManifestViolation::DuplicateRecording {
                    subject: r.subject_id.clone(),
                    stimulus: r.stimulus_id.clone(),
                });
            }
        }
        v
    }
}

/// A fully loaded dataset: declared subjects and stimuli plus one series
/// per (subject, stimulus) recording.
///
/// Recordings live in an ordered map keyed by `(subject_id, stimulus_id)`,
/// so two datasets assembled in different orders compare equal and
/// serialize identically.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub rate_hz: f64,
    pub subjects: Vec<String>,
    pub stimuli: Vec<StimulusInfo>,
    recordings: BTreeMap<(String, String), GazeSeries>,
}

impl Dataset {
    /// An empty dataset with declared membership; fill it with
    /// [`Dataset::insert`].
    pub fn new(
        name: impl Into<String>,
        rate_hz: f64,
        subjects: Vec<String>,
        stimuli: Vec<StimulusInfo>,
    ) -> Self {
        Dataset { name: name.into(), rate_hz, subjects, stimuli, recordings: BTreeMap::new() }
    }

    /// Adds a recording under its own `(subject_id, stimulus_id)` key.
    /// Both ids must be declared and the slot must be empty.
    pub fn insert(&mut self, series: GazeSeries) -> Result<(), DataIoError> {
        let subject = series.subject_id().to_string();
        let stimulus = series.stimulus_id().to_string();
        if !self.subjects.iter().any(|s| *s == subject) {
            return Err(DataIoError::Dataset {
                reason: format!("subject '{subject}' is not declared in the dataset"),
            });
        }
        if !self.stimuli.iter().any(|s| s.id == stimulus) {
            return Err(DataIoError::Dataset {
                reason: format!("stimulus '{stimulus}' is not declared in the dataset"),
            });
        }
        let key = (subject, stimulus);
        if self.recordings.contains_key(&key) {
            return Err(DataIoError::Dataset {
                reason: format!(
                    "subject '{}' already has a recording for stimulus '{}'",
                    key.0, key.1
                ),
            });
        }
        self.recordings.insert(key, series);
        Ok(())
    }

    pub fn get(&self, subject_id: &str, stimulus_id: &str) -> Option<&GazeSeries> {
        self.recordings.get(&(subject_id.to_string(), stimulus_id.to_string()))
    }

    /// Recordings in `(subject_id, stimulus_id)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), &GazeSeries)> {
        self.recordings.iter()
    }

    pub fn recordings(&self) -> impl Iterator<Item = &GazeSeries> {
        self.recordings.values()
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    pub fn stimulus(&self, stimulus_id: &str) -> Option<&StimulusInfo> {
        self.stimuli.iter().find(|s| s.id == stimulus_id)
    }

    /// Applies a transform to every recording, keeping membership intact.
    ///
    /// When all transformed recordings agree on one sampling rate the
    /// dataset rate follows them (a rate-changing transform shifts the
    /// whole dataset uniformly); otherwise the original rate is kept.
    pub fn try_map<E>(
        &self,
        f: impl Fn(&GazeSeries) -> Result<GazeSeries, E>,
    ) -> Result<Dataset, E> {
        let mut recordings = BTreeMap::new();
        for (key, series) in &self.recordings {
            recordings.insert(key.clone(), f(series)?);
        }
        let mut rates: Vec<f64> = recordings.values().map(|s| s.sampling_rate_hz()).collect();
        rates.dedup();
        let rate_hz = if rates.len() == 1 { rates[0] } else { self.rate_hz };
        Ok(Dataset {
            name: self.name.clone(),
            rate_hz,
            subjects: self.subjects.clone(),
            stimuli: self.stimuli.clone(),
            recordings,
        })
    }

    /// The manifest this dataset would be saved under, with recordings in
    /// canonical order and paths of the form
    /// `recordings/<subject>/<stimulus>.csv`.
    pub fn manifest(&self) -> DatasetManifest {
        let recordings = self
            .recordings
            .keys()
            .map(|(subject, stimulus)| RecordingRef {
                subject_id: subject.clone(),
                stimulus_id: stimulus.clone(),
                path: format!("recordings/{subject}/{stimulus}.csv"),
            })
            .collect();
        DatasetManifest {
            format_version: MANIFEST_FORMAT_VERSION,
            name: self.name.clone(),
            rate_hz: self.rate_hz,
            subjects: self.subjects.clone(),
            stimuli: self.stimuli.clone(),
            recordings,
        }
    }
}

/// Ids become path components on save, so they are restricted to a
/// conservative portable set.
fn check_path_safe(kind: &str, id: &str) -> Result<(), DataIoError> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    if ok {
        Ok(())
    } else {
        Err(DataIoError::Dataset {
            reason: format!(
                "{kind} id '{id}' is not filesystem-safe (use ASCII letters, digits, '.', '_', '-')"
            ),
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataIoError + '_ {
    move |source| DataIoError::Io { path: path.to_path_buf(), source }
}

/// Writes `dataset` under `dir` as `manifest.json` plus one CSV per
/// recording, and returns the manifest path. Saving the same dataset twice
/// produces byte-identical trees.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf, DataIoError> {
    for ((subject, stimulus), series) in dataset.iter() {
        check_path_safe("subject", subject)?;
        check_path_safe("stimulus", stimulus)?;
        if series.sampling_rate_hz() != dataset.rate_hz {
            return Err(DataIoError::Dataset {
                reason: format!(
                    "recording ({subject}, {stimulus}) has rate {} but the dataset declares {}",
                    series.sampling_rate_hz(),
                    dataset.rate_hz
                ),
            });
        }
    }
    let manifest = dataset.manifest();
    let violations = manifest.validate();
    if !violations.is_empty() {
        return Err(ManifestError { violations }.into());
    }

    for ((subject, stimulus), series) in dataset.iter() {
        let subject_dir = dir.join("recordings").join(subject);
        std::fs::create_dir_all(&subject_dir).map_err(io_err(&subject_dir))?;
        write_recording(series, &subject_dir.join(format!("{stimulus}.csv")))?;
    }

    let mut text =
        serde_json::to_string_pretty(&manifest).expect("manifest of plain data serializes");
    text.push('\n');
    let manifest_path = dir.join("manifest.json");
    std::fs::write(&manifest_path, &text).map_err(io_err(&manifest_path))?;
    Ok(manifest_path)
}

/// Loads and fully validates the dataset a manifest describes.
///
/// Manifest rule violations and unreadable or malformed recordings are
/// collected and reported together in one [`ManifestError`]. Recording
/// files are read in parallel; the result never depends on manifest order
/// or thread timing.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, DataIoError> {
    let text = std::fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| DataIoError::Parse {
            path: manifest_path.to_path_buf(),
            line: e.line(),
            reason: e.to_string(),
        })?;
    let violations = manifest.validate();
    if !violations.is_empty() {
        return Err(ManifestError { violations }.into());
    }

    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let results: Vec<Result<((String, String), GazeSeries), ManifestViolation>> = manifest
        .recordings
        .par_iter()
        .map(|r| {
            let unreadable = |reason: String| ManifestViolation::UnreadableRecording {
                path: r.path.clone(),
                reason,
            };
            let series = read_recording(&base.join(&r.path)).map_err(|e| unreadable(e.to_string()))?;
            let series = GazeSeries::new(
                series.into_samples(),
                manifest.rate_hz,
                &r.subject_id,
                &r.stimulus_id,
            )
            .map_err(|e| unreadable(e.to_string()))?;
            Ok(((r.subject_id.clone(), r.stimulus_id.clone()), series))
        })
        .collect();

    let mut recordings = BTreeMap::new();
    let mut violations = Vec::new();
    for result in results {
        match result {
            Ok((key, series)) => {
                recordings.insert(key, series);
            }
            Err(v) => violations.push(v),
        }
    }
    if !violations.is_empty() {
        return Err(ManifestError { violations }.into());
    }
    Ok(Dataset {
        name: manifest.name,
        rate_hz: manifest.rate_hz,
        subjects: manifest.subjects,
        stimuli: manifest.stimuli,
        recordings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaze::{EventLabel, GazeSample};

    fn sample_series(subject: &str, stimulus: &str, offset: f64) -> GazeSeries {
        let samples = (0..10)
            .map(|i| {
                GazeSample::new(
                    100.0 + offset + 0.125 * i as f64,
                    90.0 - 0.0625 * i as f64,
                    8.0 * i as f64,
                    EventLabel::Unlabeled,
                )
            })
            .collect();
        GazeSeries::new(samples, 125.0, subject, stimulus).unwrap()
    }

    fn sample_dataset() -> Dataset {
        let aoi = Aoi::new("center", 90.0, 270.0, 45.0, 135.0).unwrap();
        let stimuli = vec![
            StimulusInfo { id: "stim1".into(), duration_s: 25.0, aois: vec![aoi.clone()] },
            StimulusInfo { id: "stim2".into(), duration_s: 25.0, aois: vec![aoi] },
        ];
        let mut ds =
            Dataset::new("demo", 125.0, vec!["s01".into(), "s02".into()], stimuli);
        for (i, subject) in ["s01", "s02"].iter().enumerate() {
            for (j, stimulus) in ["stim1", "stim2"].iter().enumerate() {
                ds.insert(sample_series(subject, stimulus, (i * 2 + j) as f64)).unwrap();
            }
        }
        ds
    }

    #[test]
    fn save_then_load_is_identity() {
        let ds = sample_dataset();
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = save_dataset(&ds, dir.path()).unwrap();
        let loaded = load_dataset(&manifest_path).unwrap();
        assert_eq!(ds, loaded);
        let series = loaded.get("s02", "stim1").unwrap();
        assert_eq!(series.sampling_rate_hz(), 125.0);
        assert_eq!(series.subject_id(), "s02");
    }

    #[test]
    fn saving_twice_produces_identical_bytes() {
        let ds = sample_dataset();
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        save_dataset(&ds, d1.path()).unwrap();
        save_dataset(&ds, d2.path()).unwrap();
        for rel in
            ["manifest.json", "recordings/s01/stim1.csv", "recordings/s02/stim2.csv"]
        {
            let a = std::fs::read(d1.path().join(rel)).unwrap();
            let b = std::fs::read(d2.path().join(rel)).unwrap();
            assert_eq!(a, b, "file {rel}");
        }
    }

    #[test]
    fn loading_is_order_independent() {
        let ds = sample_dataset();
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = save_dataset(&ds, dir.path()).unwrap();
        let mut manifest: DatasetManifest =
            serde_json::from_str(&std::fs::read_to_string(&manifest_path).unwrap()).unwrap();
        manifest.recordings.reverse();
        std::fs::write(&manifest_path, serde_json::to_string(&manifest).unwrap()).unwrap();
        let loaded = load_dataset(&manifest_path).unwrap();
        assert_eq!(ds, loaded);
    }

    #[test]
    fn missing_recording_is_named() {
        let ds = sample_dataset();
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = save_dataset(&ds, dir.path()).unwrap();
        std::fs::remove_file(dir.path().join("recordings/s01/stim2.csv")).unwrap();
        match load_dataset(&manifest_path) {
            Err(DataIoError::Manifest(e)) => {
                assert_eq!(e.violations.len(), 1);
                match &e.violations[0] {
                    ManifestViolation::UnreadableRecording { path, .. } => {
                        assert_eq!(path, "recordings/s01/stim2.csv");
                    }
                    other => panic!("unexpected violation {other:?}"),
                }
                assert!(e.to_string().contains("recordings/s01/stim2.csv"));
            }
            other => panic!("expected ManifestError, got {other:?}"),
        }
    }

    #[test]
    fn violations_are_aggregated() {
        let manifest = DatasetManifest {
            format_version: 1,
            name: "broken".into(),
            rate_hz: 120.0,
            subjects: vec!["s01".into(), "s01".into()],
            stimuli: vec![StimulusInfo {
                id: "stim1".into(),
                duration_s: -3.0,
                aois: vec![Aoi {
                    id: "bad".into(),
                    x_min: 20.0,
                    x_max: 10.0,
                    y_min: 0.0,
                    y_max: 5.0,
                }],
            }],
            recordings: vec![
                RecordingRef {
                    subject_id: "ghost".into(),
                    stimulus_id: "stim1".into(),
                    path: "a.csv".into(),
                },
                RecordingRef {
                    subject_id: "s01".into(),
                    stimulus_id: "nope".into(),
                    path: "a.csv".into(),
                },
            ],
        };
        let violations = manifest.validate();
        let expect = [
            ManifestViolation::DuplicateSubject { subject: "s01".into() },
            ManifestViolation::InvalidDuration { stimulus: "stim1".into(), duration: -3.0 },
            ManifestViolation::UnknownSubject { path: "a.csv".into(), subject: "ghost".into() },
            ManifestViolation::UnknownStimulus { path: "a.csv".into(), stimulus: "nope".into() },
            ManifestViolation::DuplicatePath { path: "a.csv".into() },
        ];
        for want in &expect {
            assert!(violations.contains(want), "missing {want:?} in {violations:?}");
        }
        assert!(violations
            .iter()
            .any(|v| matches!(v, ManifestViolation::InvalidAoi { .. })));
        assert_eq!(violations.len(), 6);
    }

    #[test]
    fn duplicate_subject_stimulus_pair_is_rejected() {
        let manifest = DatasetManifest {
            format_version: 1,
            name: "dup".into(),
            rate_hz: 120.0,
            subjects: vec!["s01".into()],
            stimuli: vec![StimulusInfo { id: "stim1".into(), duration_s: 1.0, aois: vec![] }],
            recordings: vec![
                RecordingRef {
                    subject_id: "s01".into(),
                    stimulus_id: "stim1".into(),
                    path: "a.csv".into(),
                },
                RecordingRef {
                    subject_id: "s01".into(),
                    stimulus_id: "stim1".into(),
                    path: "b.csv".into(),
                },
            ],
        };
        assert_eq!(
            manifest.validate(),
            vec![ManifestViolation::DuplicateRecording {
                subject: "s01".into(),
                stimulus: "stim1".into()
            }]
        );
    }

    #[test]
    fn future_format_version_is_rejected() {
        let ds = sample_dataset();
        let dir = tempfile::tempdir().unwrap();
        let manifest_path = save_dataset(&ds, dir.path()).unwrap();
        let text = std::fs::read_to_string(&manifest_path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 2");
        std::fs::write(&manifest_path, text).unwrap();
        match load_dataset(&manifest_path) {
            Err(DataIoError::Manifest(e)) => {
                assert_eq!(
                    e.violations,
                    vec![ManifestViolation::UnsupportedVersion { found: 2 }]
                );
            }
            other => panic!("expected ManifestError, got {other:?}"),
        }
    }

    #[test]
    fn insert_enforces_membership_and_uniqueness() {
        let mut ds = sample_dataset();
        let unknown_subject = sample_series("s99", "stim1", 0.0);
        assert!(matches!(ds.insert(unknown_subject), Err(DataIoError::Dataset { .. })));
        let unknown_stimulus = sample_series("s01", "stim9", 0.0);
        assert!(matches!(ds.insert(unknown_stimulus), Err(DataIoError::Dataset { .. })));
        let duplicate = sample_series("s01", "stim1", 0.0);
        assert!(matches!(ds.insert(duplicate), Err(DataIoError::Dataset { .. })));
    }

    #[test]
    fn try_map_follows_a_uniform_rate_change() {
        let ds = sample_dataset();
        let halved = ds
            .try_map(|s| s.with_rate(s.sampling_rate_hz() / 2.0))
            .unwrap();
        assert_eq!(halved.rate_hz, 62.5);
        assert_eq!(halved.len(), ds.len());
        // Identity transform keeps everything, including the rate.
        let same = ds.try_map::<std::convert::Infallible>(|s| Ok(s.clone())).unwrap();
        assert_eq!(same, ds);
    }

    #[test]
    fn save_rejects_inconsistent_rates_and_hostile_ids() {
        let mut ds = sample_dataset();
        let dir = tempfile::tempdir().unwrap();
        // One recording at a different rate than the dataset declares.
        let slow = sample_series("s01", "stim1", 0.0).with_rate(60.0).unwrap();
        ds.recordings_mut_for_tests().insert(("s01".into(), "stim1".into()), slow);
        assert!(matches!(save_dataset(&ds, dir.path()), Err(DataIoError::Dataset { .. })));

        let mut evil = Dataset::new(
            "evil",
            125.0,
            vec!["../escape".into()],
            vec![StimulusInfo { id: "stim1".into(), duration_s: 1.0, aois: vec![] }],
        );
        evil.recordings_mut_for_tests()
            .insert(("../escape".into(), "stim1".into()), sample_series("any", "any", 0.0));
        match save_dataset(&evil, dir.path()) {
            Err(DataIoError::Dataset { reason }) => {
                assert!(reason.contains("filesystem-safe"), "reason: {reason}")
            }
            other => panic!("expected Dataset error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_manifest_json_reports_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(&path, "{\n  \"format_version\": 1,\n  oops\n}\n").unwrap();
        match load_dataset(&path) {
            Err(DataIoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected Parse error, got {other:?}"),
        }
    }

    impl Dataset {
        /// Test-only back door for constructing invalid states.
        fn recordings_mut_for_tests(&mut self) -> &mut BTreeMap<(String, String), GazeSeries> {
            &mut self.recordings
        }
    }
}
