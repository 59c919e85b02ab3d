use super::CnnError;

/// Network hyperparameters.
///
/// Layout: three 3x3 convolutions (strides 1, 1, 2) with ReLU, 2x2 max
/// pooling after the first two, then a ReLU hidden layer with dropout and a
/// linear output layer. Filter counts and hidden width are defaults of this
/// crate, not values taken from any published model.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnConfig {
    /// Height, width, channels.
    pub input_shape: (usize, usize, usize),
    pub conv_filters: [usize; 3],
    pub kernel: usize,
    pub conv_strides: [usize; 3],
    /// Max-pool window and stride after conv1 and conv2.
    pub pool: usize,
    pub hidden_units: usize,
    pub num_classes: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    /// Zero gives plain SGD.
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl CnnConfig {
    pub fn new(input_shape: (usize, usize, usize), num_classes: usize) -> Self {
        CnnConfig {
            input_shape,
            conv_filters: [32, 64, 128],
            kernel: 3,
            conv_strides: [1, 1, 2],
            pool: 2,
            hidden_units: 256,
            num_classes,
            dropout_rate: 0.5,
            learning_rate: 0.001,
            momentum: 0.0,
            batch_size: 1000,
            epochs: 30,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), CnnError> {
        let bad = |msg: String| Err(CnnError::InvalidConfig(msg));
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.num_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.num_classes));
        }
        if self.kernel == 0 || self.pool == 0 || self.conv_strides.contains(&0) {
            return bad("kernel, pool and strides must be positive".into());
        }
        if self.conv_filters.contains(&0) || self.hidden_units == 0 {
            return bad("layer widths must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return bad(format!("bad learning rate {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        Ok(())
    }
}

/// Geometry of one "same"-padded convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_h: usize,
    pub in_w: usize,
    pub in_c: usize,
    pub out_c: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
    pub out_h: usize,
    pub out_w: usize,
}

fn same_padding(input: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(input);
    (out, total / 2)
}

impl ConvGeom {
    /// Output size is `ceil(in / stride)`; any odd padding goes to the
    /// bottom/right edge.
    pub fn same(in_h: usize, in_w: usize, in_c: usize, out_c: usize, kernel: usize, stride: usize) -> Self {
        let (out_h, pad_top) = same_padding(in_h, kernel, stride);
        let (out_w, pad_left) = same_padding(in_w, kernel, stride);
        ConvGeom {
            in_h,
            in_w,
            in_c,
            out_c,
            kernel,
            stride,
            pad_top,
            pad_left,
            out_h,
            out_w,
        }
    }

    /// Rows of the im2col matrix.
    pub fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.in_c
    }

    pub fn out_pixels(&self) -> usize {
        self.out_h * self.out_w
    }

    pub fn in_len(&self) -> usize {
        self.in_h * self.in_w * self.in_c
    }

    pub fn out_len(&self) -> usize {
        self.out_pixels() * self.out_c
    }
}

/// Non-overlapping max pooling with floor division.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGeom {
    pub in_h: usize,
    pub in_w: usize,
    pub channels: usize,
    pub size: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl PoolGeom {
    pub fn in_len(&self) -> usize {
        self.in_h * self.in_w * self.channels
    }

    pub fn out_len(&self) -> usize {
        self.out_h * self.out_w * self.channels
    }
}

/// Resolved layer shapes for a config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plan {
    pub conv: [ConvGeom; 3],
    pub pool: [PoolGeom; 2],
    /// Width of the flattened conv3 output feeding the hidden layer.
    pub flat: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl Plan {
    pub fn new(cfg: &CnnConfig) -> Result<Self, CnnError> {
        cfg.validate()?;
        let (h, w, c) = cfg.input_shape;
        if h == 0 || w == 0 || c == 0 {
            return Err(CnnError::InvalidConfig(format!(
                "empty input shape {:?}",
                cfg.input_shape
            )));
        }
        let collapse = |stage: &str, h: usize, w: usize| {
            CnnError::InvalidConfig(format!(
                "input {:?} collapses to {h}x{w} at {stage}",
                cfg.input_shape
            ))
        };
        let pool = |g: &ConvGeom, stage: &str| -> Result<PoolGeom, CnnError> {
            let (out_h, out_w) = (g.out_h / cfg.pool, g.out_w / cfg.pool);
            if out_h == 0 || out_w == 0 {
                return Err(collapse(stage, out_h, out_w));
            }
            Ok(PoolGeom {
                in_h: g.out_h,
                in_w: g.out_w,
                channels: g.out_c,
                size: cfg.pool,
                out_h,
                out_w,
            })
        };
        let [f1, f2, f3] = cfg.conv_filters;
        let [s1, s2, s3] = cfg.conv_strides;
        let c1 = ConvGeom::same(h, w, c, f1, cfg.kernel, s1);
        let p1 = pool(&c1, "pool1")?;
        let c2 = ConvGeom::same(p1.out_h, p1.out_w, f1, f2, cfg.kernel, s2);
        let p2 = pool(&c2, "pool2")?;
        let c3 = ConvGeom::same(p2.out_h, p2.out_w, f2, f3, cfg.kernel, s3);
        Ok(Plan {
            conv: [c1, c2, c3],
            pool: [p1, p2],
            flat: c3.out_len(),
            hidden: cfg.hidden_units,
            classes: cfg.num_classes,
        })
    }

    /// Shapes of the parameter tensors in declared order: conv weights are
    /// `[k, k, in, out]`, dense weights `[in, out]`, each followed by its bias.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let mut shapes = Vec::with_capacity(10);
        for g in &self.conv {
            shapes.push(vec![g.kernel, g.kernel, g.in_c, g.out_c]);
            shapes.push(vec![g.out_c]);
        }
        shapes.push(vec![self.flat, self.hidden]);
        shapes.push(vec![self.hidden]);
        shapes.push(vec![self.hidden, self.classes]);
        shapes.push(vec![self.classes]);
        shapes
    }
}

pub const PARAM_NAMES: [&str; 10] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "conv3.weight",
    "conv3.bias",
    "fc1.weight",
    "fc1.bias",
    "fc2.weight",
    "fc2.bias",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_sizes() {
        let g = ConvGeom::same(49, 100, 12, 8, 3, 1);
        assert_eq!((g.out_h, g.out_w, g.pad_top, g.pad_left), (49, 100, 1, 1));
        let g = ConvGeom::same(12, 25, 16, 32, 3, 2);
        assert_eq!((g.out_h, g.out_w, g.pad_top, g.pad_left), (6, 13, 0, 1));
    }

    #[test]
    fn collapse_is_rejected() {
        let cfg = CnnConfig::new((2, 2, 1), 3);
        assert!(matches!(Plan::new(&cfg), Err(CnnError::InvalidConfig(_))));
    }

    #[test]
    fn bad_dropout_rejected() {
        let mut cfg = CnnConfig::new((49, 100, 3), 3);
        cfg.dropout_rate = 1.0;
        assert!(cfg.validate().is_err());
    }
}
