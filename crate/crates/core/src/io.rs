//! JSON files for instances, transcripts, generator sets and expressions.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cbkap::{Instance, Transcript};
use crate::{Error, Result};

/// Parses JSON, prefixing errors with the file name. Unknown fields are
/// rejected by the types themselves; serde reports line and column.
pub fn from_json_str<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Malformed(format!("{origin}: {e}")))
}

pub fn load<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    from_json_str(&text, &path.display().to_string())
}

pub fn save<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let inst: Instance = load(path)?;
    inst.validate()?;
    Ok(inst)
}

/// Checks that a transcript fits an instance (sizes and modulus).
pub fn check_transcript(inst: &Instance, tr: &Transcript) -> Result<()> {
    for state in [&tr.alice_pub, &tr.bob_pub] {
        if state.m.n() != inst.n || state.sigma.degree_n() != inst.n {
            return Err(Error::SizeMismatch(state.m.n(), inst.n));
        }
        if state.m.p() != inst.p {
            return Err(Error::ModulusMismatch(state.m.p(), inst.p));
        }
    }
    if let Some(s) = &tr.secrets {
        if s.shared.n() != inst.n || s.shared.p() != inst.p {
            return Err(Error::Malformed("shared key does not match the instance".into()));
        }
    }
    Ok(())
}

pub fn load_transcript(path: impl AsRef<Path>, inst: &Instance) -> Result<Transcript> {
    let tr: Transcript = load(path)?;
    check_transcript(inst, &tr)?;
    Ok(tr)
}
