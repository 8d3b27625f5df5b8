//! Prognostic models: MNLR, POLR, DeepMN, DeepOR, APM_MN, APM_OR.

pub mod heads;
pub mod linear;
pub mod network;
pub mod optim;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::error::{Error, Result};
use crate::outcome::{CategoryDistribution, ThresholdProfile, N_THRESHOLDS};
pub use linear::{LinearOptions, MnlrModel, PolrModel};
pub use network::{Input, InputSpec, MlpConfig, NeuralModel, OutputEncoding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "MNLR")]
    Mnlr,
    #[serde(rename = "POLR")]
    Polr,
    #[serde(rename = "DeepMN")]
    DeepMn,
    #[serde(rename = "DeepOR")]
    DeepOr,
    #[serde(rename = "APM_MN")]
    ApmMn,
    #[serde(rename = "APM_OR")]
    ApmOr,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] =
        [ModelKind::Mnlr, ModelKind::Polr, ModelKind::DeepMn, ModelKind::DeepOr, ModelKind::ApmMn, ModelKind::ApmOr];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mnlr => "MNLR",
            ModelKind::Polr => "POLR",
            ModelKind::DeepMn => "DeepMN",
            ModelKind::DeepOr => "DeepOR",
            ModelKind::ApmMn => "APM_MN",
            ModelKind::ApmOr => "APM_OR",
        }
    }

    pub fn is_token_model(self) -> bool {
        matches!(self, ModelKind::ApmMn | ModelKind::ApmOr)
    }

    pub fn is_tuned(self) -> bool {
        !matches!(self, ModelKind::Mnlr | ModelKind::Polr)
    }

    pub fn encoding(self) -> OutputEncoding {
        match self {
            ModelKind::Mnlr | ModelKind::DeepMn | ModelKind::ApmMn => OutputEncoding::Multinomial,
            _ => OutputEncoding::Ordinal,
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidSpec(format!("unknown model '{s}'")))
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Model output for one patient. Multinomial models also carry the full
/// category distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub profile: ThresholdProfile,
    pub distribution: Option<CategoryDistribution>,
}

impl Prediction {
    pub fn from_distribution(d: CategoryDistribution) -> Self {
        Prediction { profile: d.to_threshold_profile(), distribution: Some(d) }
    }

    pub fn from_profile(q: ThresholdProfile) -> Self {
        Prediction { profile: q, distribution: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    Mnlr(MnlrModel),
    Polr(PolrModel),
    Neural(NeuralModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Mnlr(_) => ModelKind::Mnlr,
            TrainedModel::Polr(_) => ModelKind::Polr,
            TrainedModel::Neural(m) => match (m.input, m.encoding()) {
                (InputSpec::Features { .. }, OutputEncoding::Multinomial) => ModelKind::DeepMn,
                (InputSpec::Features { .. }, OutputEncoding::Ordinal) => ModelKind::DeepOr,
                (InputSpec::Tokens { .. }, OutputEncoding::Multinomial) => ModelKind::ApmMn,
                (InputSpec::Tokens { .. }, OutputEncoding::Ordinal) => ModelKind::ApmOr,
            },
        }
    }

    pub fn predict(&self, input: Input) -> Result<Prediction> {
        match (self, input) {
            (TrainedModel::Mnlr(m), Input::Features(x)) => Ok(Prediction::from_distribution(m.distribution(x)?)),
            (TrainedModel::Polr(m), Input::Features(x)) => Ok(Prediction::from_profile(m.profile(x)?)),
            (TrainedModel::Neural(m), i) => m.predict(i),
            _ => Err(Error::Invalid("linear models take feature vectors".into())),
        }
    }

    /// Serialises as {"kind","config","scale","parameters","metadata"}.
    pub fn envelope(&self, scale: &str) -> ModelEnvelope {
        let mut parameters = BTreeMap::new();
        let (config, metadata) = match self {
            TrainedModel::Mnlr(m) => {
                parameters.insert("weights".to_string(), m.weights.concat());
                (json!({"dim": m.dim()}), serde_json::to_value(&m.info).unwrap())
            }
            TrainedModel::Polr(m) => {
                parameters.insert("beta".to_string(), m.beta.clone());
                parameters.insert("thresholds".to_string(), m.thresholds.to_vec());
                (json!({"dim": m.dim()}), serde_json::to_value(&m.info).unwrap())
            }
            TrainedModel::Neural(m) => {
                for (i, (name, v)) in m.named_parameters().into_iter().enumerate() {
                    parameters.insert(format!("{i:02}.{name}"), v);
                }
                (
                    json!({"network": m.config, "input": m.input}),
                    serde_json::to_value(&m.metadata).unwrap(),
                )
            }
        };
        ModelEnvelope { kind: self.kind(), config, scale: scale.to_string(), parameters, metadata }
    }

    pub fn from_envelope(env: &ModelEnvelope) -> Result<Self> {
        let block = |name: &str| {
            env.parameters.get(name).cloned().ok_or_else(|| Error::Invalid(format!("missing parameter block '{name}'")))
        };
        let bad = |e: serde_json::Error| Error::Invalid(format!("model envelope: {e}"));
        match env.kind {
            ModelKind::Mnlr => {
                let w = block("weights")?;
                let d = env.config["dim"].as_u64().ok_or_else(|| Error::Invalid("missing dim".into()))? as usize;
                if w.len() != 6 * (d + 1) {
                    return Err(Error::DimensionMismatch { expected: 6 * (d + 1), got: w.len() });
                }
                Ok(TrainedModel::Mnlr(MnlrModel {
                    weights: w.chunks(d + 1).map(<[f64]>::to_vec).collect(),
                    info: serde_json::from_value(env.metadata.clone()).map_err(bad)?,
                }))
            }
            ModelKind::Polr => {
                let th = block("thresholds")?;
                let thresholds: [f64; N_THRESHOLDS] = th
                    .as_slice()
                    .try_into()
                    .map_err(|_| Error::DimensionMismatch { expected: N_THRESHOLDS, got: th.len() })?;
                Ok(TrainedModel::Polr(PolrModel {
                    beta: block("beta")?,
                    thresholds,
                    info: serde_json::from_value(env.metadata.clone()).map_err(bad)?,
                }))
            }
            _ => {
                let cfg: MlpConfig = serde_json::from_value(env.config["network"].clone()).map_err(bad)?;
                let input: InputSpec = serde_json::from_value(env.config["input"].clone()).map_err(bad)?;
                let mut m = NeuralModel::init(&cfg, input)?;
                let flat: Vec<f64> = env.parameters.values().flatten().copied().collect();
                m.set_params(&flat)?;
                m.metadata = serde_json::from_value(env.metadata.clone()).map_err(bad)?;
                let model = TrainedModel::Neural(m);
                if model.kind() != env.kind {
                    return Err(Error::Invalid(format!("envelope kind {} does not match network", env.kind)));
                }
                Ok(model)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEnvelope {
    pub kind: ModelKind,
    pub config: Json,
    pub scale: String,
    pub parameters: BTreeMap<String, Vec<f64>>,
    pub metadata: Json,
}

impl ModelEnvelope {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::Category;

    fn data() -> (Vec<Vec<f64>>, Vec<Category>) {
        let x: Vec<Vec<f64>> = (0..70).map(|i| vec![(i % 10) as f64 / 5.0 - 1.0, ((i * 7) % 13) as f64 / 6.0 - 1.0]).collect();
        let y = (0..70).map(|i| Category::new((i + i / 10) % 7).unwrap()).collect();
        (x, y)
    }

    #[test]
    fn envelope_round_trip_all_kinds() {
        let (x, y) = data();
        let toks: Vec<Vec<u32>> = (0..70).map(|i| vec![1 + (i % 4) as u32, 5 + (i % 3) as u32]).collect();
        let mut cfg = MlpConfig::new(vec![4, 3], 0.2, OutputEncoding::Ordinal);
        cfg.max_epochs = 3;
        let models = vec![
            TrainedModel::Mnlr(linear::train_mnlr(&x, &y, LinearOptions::default()).unwrap()),
            TrainedModel::Polr(linear::train_polr(&x, &y, LinearOptions::default()).unwrap()),
            TrainedModel::Neural(network::train_deep(&x, &y, &[], &[], &cfg).unwrap()),
            TrainedModel::Neural(network::train_apm(&toks, &y, &[], &[], 8, &cfg).unwrap()),
        ];
        let dir = tempfile::tempdir().unwrap();
        for m in models {
            let path = dir.path().join("m.json");
            m.envelope("all").save(&path).unwrap();
            let back = TrainedModel::from_envelope(&ModelEnvelope::load(&path).unwrap()).unwrap();
            assert_eq!(back.kind(), m.kind());
            let input = if m.kind().is_token_model() { Input::Tokens(&toks[3]) } else { Input::Features(&x[3]) };
            assert_eq!(back.predict(input).unwrap(), m.predict(input).unwrap());
        }
    }

    #[test]
    fn kind_names_parse() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("GBM".parse::<ModelKind>().is_err());
    }
}
