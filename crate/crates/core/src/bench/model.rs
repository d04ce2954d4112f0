use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::net::{ConnectionMask, Network, ParameterVector, Topology};
use crate::series::{Dataset, Scaler};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "pmlp-model";

/// A trained network together with the scaling of its inputs and output.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub network: Network,
    pub scaler: Scaler,
}

impl Model {
    /// Predictions in the units of `dataset`.
    pub fn predict(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        let scaled = self.network.predict(&self.scaler.apply(dataset))?;
        Ok(scaled.into_iter().map(|y| self.scaler.inverse(y)).collect())
    }

    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        let x: Vec<f64> = input.iter().map(|&v| self.scaler.forward(v)).collect();
        Ok(self.scaler.inverse(self.network.forward(&x)?))
    }
}

/// Write a model as versioned `key value...` lines.
///
/// ```text
/// pmlp-model 1
/// topology 7 2
/// scaler <offset> <scale>
/// mask 1 1 0 ...
/// params <m values>
/// ```
pub fn save_model(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render(model)).map_err(|e| Error::io(path, e))
}

fn render(model: &Model) -> String {
    let net = &model.network;
    let t = net.topology();
    let mut s = format!("{MAGIC} {MODEL_FORMAT_VERSION}\n");
    let _ = writeln!(s, "topology {} {}", t.n_inputs(), t.n_hidden());
    let _ = writeln!(s, "scaler {} {}", model.scaler.offset, model.scaler.scale);
    let mask: Vec<&str> = net
        .mask()
        .0
        .iter()
        .map(|&a| if a { "1" } else { "0" })
        .collect();
    let _ = writeln!(s, "mask {}", mask.join(" "));
    let params: Vec<String> = net.params().0.iter().map(f64::to_string).collect();
    let _ = writeln!(s, "params {}", params.join(" "));
    s
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}

fn corrupted(field: &str, message: impl Into<String>) -> Error {
    Error::CorruptedField {
        field: field.into(),
        message: message.into(),
    }
}

fn numbers<T: std::str::FromStr>(field: &str, values: &[&str]) -> Result<Vec<T>> {
    values
        .iter()
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| corrupted(field, format!("not a number: {v:?}")))
        })
        .collect()
}

fn take<'a>(value: Option<Vec<&'a str>>, field: &str) -> Result<Vec<&'a str>> {
    value.ok_or_else(|| corrupted(field, "missing"))
}

fn parse(text: &str) -> Result<Model> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    match header.as_slice() {
        [MAGIC, v] if *v == MODEL_FORMAT_VERSION.to_string() => {}
        [MAGIC, v] => {
            return Err(Error::VersionMismatch {
                expected: MODEL_FORMAT_VERSION,
                found: v.to_string(),
            })
        }
        _ => {
            return Err(corrupted(
                "header",
                format!("expected `{MAGIC} {MODEL_FORMAT_VERSION}`"),
            ))
        }
    }

    let mut fields: [Option<Vec<&str>>; 4] = Default::default();
    const KEYS: [&str; 4] = ["topology", "scaler", "mask", "params"];
    for line in lines {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or("");
        let Some(slot) = KEYS.iter().position(|k| *k == key) else {
            return Err(corrupted(key, "unknown field"));
        };
        if fields[slot].is_some() {
            return Err(corrupted(key, "repeated field"));
        }
        fields[slot] = Some(parts.collect());
    }
    let [topology, scaler, mask, params] = fields;

    let topology = numbers::<usize>("topology", &take(topology, "topology")?)?;
    let [n_inputs, n_hidden] = topology[..] else {
        return Err(corrupted("topology", "expected two integers"));
    };
    let topology =
        Topology::new(n_inputs, n_hidden).map_err(|e| corrupted("topology", e.to_string()))?;

    let scaler = numbers::<f64>("scaler", &take(scaler, "scaler")?)?;
    let [offset, scale] = scaler[..] else {
        return Err(corrupted("scaler", "expected offset and scale"));
    };
    let scaler = Scaler { offset, scale };
    if !scaler.is_valid() {
        return Err(corrupted("scaler", "scale must be finite and positive"));
    }

    let mask = take(mask, "mask")?
        .iter()
        .map(|v| match *v {
            "1" => Ok(true),
            "0" => Ok(false),
            other => Err(corrupted("mask", format!("expected 0 or 1, got {other:?}"))),
        })
        .collect::<Result<Vec<bool>>>()?;
    let params = numbers::<f64>("params", &take(params, "params")?)?;
    if params.len() != topology.n_params() {
        return Err(corrupted(
            "params",
            format!(
                "expected {} values, got {}",
                topology.n_params(),
                params.len()
            ),
        ));
    }
    if params.iter().any(|v| !v.is_finite()) {
        return Err(corrupted("params", "non-finite value"));
    }
    let network = Network::new(topology, ParameterVector(params), ConnectionMask(mask))?;
    Ok(Model { network, scaler })
}
