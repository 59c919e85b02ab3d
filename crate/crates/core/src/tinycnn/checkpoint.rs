//! Checkpoints: an ASCII header of `key=value` lines closed by `end`, then
//! every parameter as little-endian `f64` in declared order.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::config::Plan;
use super::model::CnnModel;
use super::{CnnConfig, CnnError, Tensor};

const MAGIC: &str = "skelimg-cnn v1";

fn join<T: ToString>(values: &[T]) -> String {
    values
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn save_model(model: &CnnModel) -> Vec<u8> {
    let c = model.config();
    let (h, w, ch) = c.input_shape;
    let mut header = String::new();
    let _ = writeln!(header, "{MAGIC}");
    let _ = writeln!(header, "input_shape={h},{w},{ch}");
    let _ = writeln!(header, "conv_filters={}", join(&c.conv_filters));
    let _ = writeln!(header, "kernel={}", c.kernel);
    let _ = writeln!(header, "conv_strides={}", join(&c.conv_strides));
    let _ = writeln!(header, "pool={}", c.pool);
    let _ = writeln!(header, "hidden_units={}", c.hidden_units);
    let _ = writeln!(header, "num_classes={}", c.num_classes);
    let _ = writeln!(header, "dropout_rate={}", c.dropout_rate);
    let _ = writeln!(header, "learning_rate={}", c.learning_rate);
    let _ = writeln!(header, "momentum={}", c.momentum);
    let _ = writeln!(header, "batch_size={}", c.batch_size);
    let _ = writeln!(header, "epochs={}", c.epochs);
    let _ = writeln!(header, "seed={}", c.seed);
    let _ = writeln!(header, "param_values={}", model.param_count());
    let _ = writeln!(header, "end");

    let mut out = header.into_bytes();
    out.reserve(model.param_count() * 8);
    for p in model.params() {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn corrupt(msg: impl Into<String>) -> CnnError {
    CnnError::CorruptCheckpoint(msg.into())
}

fn parse_list<const N: usize>(s: &str) -> Result<[usize; N], CnnError> {
    let values: Vec<usize> = s
        .split(',')
        .map(|v| v.trim().parse().map_err(|_| corrupt(format!("bad list {s:?}"))))
        .collect::<Result<_, _>>()?;
    values
        .try_into()
        .map_err(|_| corrupt(format!("expected {N} values in {s:?}")))
}

pub fn load_model(bytes: &[u8]) -> Result<CnnModel, CnnError> {
    let mut fields = HashMap::new();
    let mut offset = 0;
    let mut first = true;
    loop {
        let rest = &bytes[offset..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| corrupt("header not terminated"))?;
        let line = std::str::from_utf8(&rest[..nl]).map_err(|_| corrupt("header not UTF-8"))?;
        offset += nl + 1;
        if first {
            if line != MAGIC {
                return Err(corrupt(format!("unknown header {line:?}")));
            }
            first = false;
            continue;
        }
        if line == "end" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| corrupt(format!("bad header line {line:?}")))?;
        fields.insert(k.to_string(), v.to_string());
    }

    let get = |k: &str| {
        fields
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| corrupt(format!("missing {k}")))
    };
    fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T, CnnError> {
        v.parse().map_err(|_| corrupt(format!("bad {k} value {v:?}")))
    }
    let [h, w, c] = parse_list::<3>(get("input_shape")?)?;
    let config = CnnConfig {
        input_shape: (h, w, c),
        conv_filters: parse_list(get("conv_filters")?)?,
        kernel: num("kernel", get("kernel")?)?,
        conv_strides: parse_list(get("conv_strides")?)?,
        pool: num("pool", get("pool")?)?,
        hidden_units: num("hidden_units", get("hidden_units")?)?,
        num_classes: num("num_classes", get("num_classes")?)?,
        dropout_rate: num("dropout_rate", get("dropout_rate")?)?,
        learning_rate: num("learning_rate", get("learning_rate")?)?,
        momentum: num("momentum", get("momentum")?)?,
        batch_size: num("batch_size", get("batch_size")?)?,
        epochs: num("epochs", get("epochs")?)?,
        seed: num("seed", get("seed")?)?,
    };
    let declared: usize = num("param_values", get("param_values")?)?;

    let plan = Plan::new(&config).map_err(|e| corrupt(e.to_string()))?;
    let shapes = plan.param_shapes();
    let expected: usize = shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    if declared != expected {
        return Err(corrupt(format!(
            "header declares {declared} values, config implies {expected}"
        )));
    }
    let payload = &bytes[offset..];
    if payload.len() != expected * 8 {
        return Err(corrupt(format!(
            "payload is {} bytes, config implies {}",
            payload.len(),
            expected * 8
        )));
    }

    let mut values = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));
    let params = shapes
        .into_iter()
        .map(|shape| {
            let n = shape.iter().product();
            Tensor::new(shape, values.by_ref().take(n).collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    CnnModel::from_params(config, params)
}
