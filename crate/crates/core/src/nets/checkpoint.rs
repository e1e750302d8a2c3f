//! Checkpoint directories: `arch.json` describes the model, `weights.bin` holds
//! every parameter as little-endian `f64`, in parameter visiting order.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::models::{Classifier, ClassifierSpec, Discriminator, DiscriminatorSpec, Generator, GeneratorSpec};
use super::param::Parameterized;
use crate::error::{Error, IoContext, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Classifier(ClassifierSpec),
    Generator(GeneratorSpec),
    Discriminator(DiscriminatorSpec),
}

#[derive(Debug, Serialize, Deserialize)]
struct ArchFile {
    #[serde(flatten)]
    spec: ModelSpec,
    n_params: usize,
    weights_dtype: String,
}

pub fn save_checkpoint<A: Scalar, M: Parameterized<A>>(
    dir: impl AsRef<Path>,
    spec: ModelSpec,
    model: &M,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).at(dir)?;
    let arch = ArchFile {
        spec,
        n_params: model.n_params(),
        weights_dtype: "f64le".into(),
    };
    let path = dir.join("arch.json");
    let text = serde_json::to_string_pretty(&arch).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    fs::write(&path, text).at(&path)?;

    let mut blob = Vec::with_capacity(arch.n_params * 8);
    for v in model.flat_values() {
        blob.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    let path = dir.join("weights.bin");
    fs::write(&path, blob).at(&path)
}

fn read_arch(dir: &Path) -> Result<(ArchFile, Vec<f64>)> {
    let path = dir.join("arch.json");
    let text = fs::read_to_string(&path).at(&path)?;
    let arch: ArchFile = serde_json::from_str(&text).map_err(|source| Error::Json { path, source })?;
    if arch.weights_dtype != "f64le" {
        return Err(Error::Checkpoint(format!(
            "unsupported weights dtype `{}`",
            arch.weights_dtype
        )));
    }
    let path = dir.join("weights.bin");
    let raw = fs::read(&path).at(&path)?;
    if raw.len() != arch.n_params * 8 {
        return Err(Error::Checkpoint(format!(
            "{} holds {} bytes for {} parameters",
            path.display(),
            raw.len(),
            arch.n_params
        )));
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((arch, values))
}

fn fill<A: Scalar, M: Parameterized<A>>(model: &mut M, values: &[f64]) -> Result<()> {
    let vals: Vec<A> = values.iter().map(|&v| A::lit(v)).collect();
    if !model.load_flat(&vals) {
        return Err(Error::Checkpoint(format!(
            "architecture expects {} parameters, weights hold {}",
            model.n_params(),
            vals.len()
        )));
    }
    Ok(())
}

pub fn load_classifier<A: Scalar>(dir: impl AsRef<Path>) -> Result<Classifier<A>> {
    let (arch, values) = read_arch(dir.as_ref())?;
    let ModelSpec::Classifier(spec) = arch.spec else {
        return Err(Error::Checkpoint("checkpoint is not a classifier".into()));
    };
    let mut model = Classifier::new(spec, &mut ChaCha8Rng::seed_from_u64(0));
    fill(&mut model, &values)?;
    Ok(model)
}

pub fn load_generator<A: Scalar>(dir: impl AsRef<Path>) -> Result<Generator<A>> {
    let (arch, values) = read_arch(dir.as_ref())?;
    let ModelSpec::Generator(spec) = arch.spec else {
        return Err(Error::Checkpoint("checkpoint is not a generator".into()));
    };
    let mut model = Generator::new(spec, &mut ChaCha8Rng::seed_from_u64(0));
    fill(&mut model, &values)?;
    Ok(model)
}

pub fn load_discriminator<A: Scalar>(dir: impl AsRef<Path>) -> Result<Discriminator<A>> {
    let (arch, values) = read_arch(dir.as_ref())?;
    let ModelSpec::Discriminator(spec) = arch.spec else {
        return Err(Error::Checkpoint("checkpoint is not a discriminator".into()));
    };
    let mut model = Discriminator::new(spec, &mut ChaCha8Rng::seed_from_u64(0));
    fill(&mut model, &values)?;
    Ok(model)
}
