use std::path::{Path, PathBuf};

use latchflow::dsp::{read_wav, resample_3to1, white_noise_gaussian, AudioBuffer, DspError};
use latchflow::robotics::{tof_for_distance, RawEcho, SweepConfig};
use latchflow::skills::Entities;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sample rate every pipeline stage after the source runs at.
pub const PIPELINE_RATE_HZ: u32 = 16_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tone {
    pub start_s: f64,
    pub end_s: f64,
    pub freq_hz: f64,
    pub amplitude: f64,
}

/// Seeded Gaussian background noise plus optional tone bursts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticAudio {
    pub duration_s: f64,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: u32,
    #[serde(default)]
    pub noise_std: f64,
    #[serde(default)]
    pub tones: Vec<Tone>,
}

fn default_rate() -> u32 {
    PIPELINE_RATE_HZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AudioSourceSpec {
    /// Path to a 16-bit PCM WAV, relative to the scenario file.
    Wav(PathBuf),
    Synthetic(SyntheticAudio),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default)]
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedIntent {
    pub skill_id: String,
    #[serde(default)]
    pub entities: Entities,
    #[serde(default = "full_confidence")]
    pub confidence: f64,
}

fn full_confidence() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedInterpretation {
    pub trigger_window_index: u64,
    pub interpretation: ScriptedIntent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEcho {
    pub theta_deg: f64,
    /// `None` means nothing reflects within range.
    #[serde(default)]
    pub distance_m: Option<f64>,
}

impl SceneEcho {
    pub fn to_raw(&self, config: &SweepConfig) -> RawEcho {
        RawEcho {
            theta_deg: self.theta_deg,
            tof_s: self.distance_m.map(|d| tof_for_distance(d, config.c_air_mps)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub audio_source: AudioSourceSpec,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub interpreter_script: Vec<ScriptedInterpretation>,
    #[serde(default)]
    pub ultrasonic_scene: Vec<SceneEcho>,
    pub time_limit_s: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("audio: {0}")]
    Audio(#[from] DspError),
    #[error("unsupported source rate {0} Hz (need 16000 or 48000)")]
    Rate(u32),
    #[error("annotation {index} [{start_s}, {end_s}] lies outside the {duration_s} s of audio")]
    Annotation {
        index: usize,
        start_s: f64,
        end_s: f64,
        duration_s: f64,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// Parses JSON, reporting the dotted path of any offending key.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, (String, String)> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| (e.path().to_string(), e.into_inner().to_string()))
}

impl ScenarioScript {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let s: Self = parse_json(text).map_err(|(path, message)| ScenarioError::Schema { path, message })?;
        if !(s.time_limit_s.is_finite() && s.time_limit_s > 0.0) {
            return Err(ScenarioError::Invalid(format!("time_limit_s must be > 0, got {}", s.time_limit_s)));
        }
        for (i, a) in s.annotations.iter().enumerate() {
            if !(a.start_s >= 0.0 && a.start_s < a.end_s) {
                return Err(ScenarioError::Invalid(format!("annotation {i} needs 0 <= start_s < end_s")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for e in &s.interpreter_script {
            if !seen.insert(e.trigger_window_index) {
                return Err(ScenarioError::Invalid(format!(
                    "window {} has more than one scripted interpretation",
                    e.trigger_window_index
                )));
            }
        }
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Decodes or synthesizes the audio at 16 kHz. 48 kHz sources are
    /// resampled; samples are clamped to [-1, 1].
    pub fn load_audio(&self, base_dir: &Path, seed: u64) -> Result<AudioBuffer, ScenarioError> {
        let raw = match &self.audio_source {
            AudioSourceSpec::Wav(p) => read_wav(base_dir.join(p))?,
            AudioSourceSpec::Synthetic(spec) => synthesize(spec, seed)?,
        };
        let mut audio = match raw.sample_rate_hz {
            PIPELINE_RATE_HZ => raw,
            48_000 => resample_3to1(&raw)?,
            other => return Err(ScenarioError::Rate(other)),
        };
        audio.samples.iter_mut().for_each(|x| *x = x.clamp(-1.0, 1.0));
        let duration = audio.duration_s();
        for (index, a) in self.annotations.iter().enumerate() {
            if a.end_s > duration + 1e-9 {
                return Err(ScenarioError::Annotation {
                    index,
                    start_s: a.start_s,
                    end_s: a.end_s,
                    duration_s: duration,
                });
            }
        }
        Ok(audio)
    }
}

pub fn synthesize(spec: &SyntheticAudio, seed: u64) -> Result<AudioBuffer, DspError> {
    let rate = spec.sample_rate_hz;
    let n = (spec.duration_s * rate as f64).round() as usize;
    let mut buf = if spec.noise_std > 0.0 {
        white_noise_gaussian(n, spec.noise_std, rate, &mut ChaCha8Rng::seed_from_u64(seed))?
    } else {
        AudioBuffer::new(vec![0.0; n], rate)
    };
    for tone in &spec.tones {
        let lo = ((tone.start_s * rate as f64).round() as usize).min(n);
        let hi = ((tone.end_s * rate as f64).round() as usize).min(n);
        let w = 2.0 * std::f64::consts::PI * tone.freq_hz / rate as f64;
        for i in lo..hi {
            buf.samples[i] += tone.amplitude * (w * (i - lo) as f64).sin();
        }
    }
    Ok(buf)
}
