use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use skelimg_core::CnnConfig;

/// `key = value` record of one run, written as `manifest.txt` in the output
/// directory.
pub struct Manifest {
    lines: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        let args: Vec<String> = std::env::args().collect();
        let mut m = Manifest { lines: Vec::new() };
        m.set("tool", format!("skelimg {}", env!("CARGO_PKG_VERSION")));
        m.set("command", command);
        m.set("argv", args.join(" "));
        m.set("seed", seed);
        m.set("threads", rayon::current_num_threads());
        m.set("tensor_format", "skelimg v1");
        m.set("checkpoint_format", "skelimg-cnn v1");
        m.set("score_format", "source_name,true_label,p1..pK");
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string().replace('\n', " ");
        match self.lines.iter_mut().find(|(k, _)| k == key) {
            Some(line) => line.1 = value,
            None => self.lines.push((key.to_string(), value)),
        }
        self
    }

    pub fn set_cnn(&mut self, prefix: &str, c: &CnnConfig) -> &mut Self {
        let (h, w, ch) = c.input_shape;
        self.set(&format!("{prefix}.input_shape"), format!("{h},{w},{ch}"));
        self.set(&format!("{prefix}.conv_filters"), format!("{:?}", c.conv_filters));
        self.set(&format!("{prefix}.hidden_units"), c.hidden_units);
        self.set(&format!("{prefix}.num_classes"), c.num_classes);
        self.set(&format!("{prefix}.dropout_rate"), c.dropout_rate);
        self.set(&format!("{prefix}.learning_rate"), c.learning_rate);
        self.set(&format!("{prefix}.momentum"), c.momentum);
        self.set(&format!("{prefix}.batch_size"), c.batch_size);
        self.set(&format!("{prefix}.epochs"), c.epochs);
        self.set(&format!("{prefix}.seed"), c.seed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.txt");
        std::fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}
