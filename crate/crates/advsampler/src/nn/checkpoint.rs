//! Network checkpoint files.
//!
//! Format: one JSON header line (layer sizes and activations, newline
//! terminated), followed by the raw parameter payload as a flat little-endian
//! `f64` array. Parameters are laid out layer by layer: the weight matrix in
//! row-major order, then the bias vector.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::mlp::{MlpNetwork, OutputActivation};
use crate::error::{Error, Result};
use crate::seed::{stream_rng, Stream};

#[derive(Serialize, Deserialize)]
struct Header {
    layer_sizes: Vec<usize>,
    hidden_activation: String,
    output_activation: OutputActivation,
    param_count: usize,
}

pub fn save(net: &MlpNetwork, path: &Path) -> Result<()> {
    let header = Header {
        layer_sizes: net.layer_sizes().to_vec(),
        hidden_activation: "relu".to_string(),
        output_activation: net.output_activation(),
        param_count: net.param_count(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for (w, b) in net.weights().iter().zip(net.biases()) {
        for &v in w.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
        for &v in b.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<MlpNetwork> {
    let mut input = BufReader::new(File::open(path)?);
    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        input.read_exact(&mut byte).map_err(|_| {
            Error::Config(format!("{}: missing checkpoint header line", path.display()))
        })?;
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
    }
    let header: Header = serde_json::from_slice(&header_bytes)?;
    if header.hidden_activation != "relu" {
        return Err(Error::Config(format!(
            "unsupported hidden activation {:?}",
            header.hidden_activation
        )));
    }

    let mut values = vec![0.0f64; header.param_count];
    let mut buf = [0u8; 8];
    for v in values.iter_mut() {
        input.read_exact(&mut buf).map_err(|_| {
            Error::Config(format!("{}: truncated checkpoint payload", path.display()))
        })?;
        *v = f64::from_le_bytes(buf);
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric(format!(
            "{}: checkpoint holds non-finite parameters",
            path.display()
        )));
    }

    // Build a network of the right shape, then overwrite its parameters.
    let mut rng = stream_rng(0, Stream::GeneratorInit);
    let mut net = MlpNetwork::init(&header.layer_sizes, header.output_activation, &mut rng)?;
    if net.param_count() != header.param_count {
        return Err(Error::Config(format!(
            "{}: header param_count {} does not match layer sizes",
            path.display(),
            header.param_count
        )));
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    let mut offset = 0;
    for pair in header.layer_sizes.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let w = Array2::from_shape_vec(
            (n_in, n_out),
            values[offset..offset + n_in * n_out].to_vec(),
        )
        .expect("shape arithmetic is consistent");
        offset += n_in * n_out;
        let b = Array1::from_vec(values[offset..offset + n_out].to_vec());
        offset += n_out;
        weights.push(w);
        biases.push(b);
    }
    net.set_params(weights, biases)?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn round_trip_is_bitwise() {
        let mut rng = stream_rng(13, Stream::GeneratorInit);
        let net = MlpNetwork::init(&[3, 16, 2], OutputActivation::Tanh, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save(&net, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(net.layer_sizes(), loaded.layer_sizes());
        assert_eq!(net.weights(), loaded.weights());
        assert_eq!(net.biases(), loaded.biases());
        assert_eq!(net.output_activation(), loaded.output_activation());

        // The loaded network computes the same function.
        let x = ndarray::Array2::from_shape_fn((5, 3), |_| rng.random_range(-1.0..1.0));
        assert_eq!(
            net.forward(x.view()).unwrap(),
            loaded.forward(x.view()).unwrap()
        );
    }

    #[test]
    fn truncated_file_is_rejected() {
        let mut rng = stream_rng(13, Stream::GeneratorInit);
        let net = MlpNetwork::init(&[2, 4, 1], OutputActivation::Linear, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save(&net, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(load(&path).is_err());
    }
}
