use candle_core::{Module, ModuleT, Result, Tensor, D};
use candle_nn::{batch_norm, conv2d_no_bias, BatchNorm, BatchNormConfig, Conv2d, Conv2dConfig, VarBuilder};
use serde::{Deserialize, Serialize};

/// Feature extractor topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BackboneKind {
    /// ResNet-18 with a 3x3 stride-1 stem for small images. `width` is the
    /// channel count of the first stage (64 is full width).
    Resnet18 { width: usize },
    /// Three conv-bn-relu-maxpool stages with `width`, `2 * width` and
    /// `4 * width` channels.
    Reduced { width: usize },
}

impl Default for BackboneKind {
    fn default() -> Self {
        BackboneKind::Resnet18 { width: 64 }
    }
}

impl BackboneKind {
    pub fn feature_dim(&self) -> usize {
        match *self {
            BackboneKind::Resnet18 { width } => 8 * width,
            BackboneKind::Reduced { width } => 4 * width,
        }
    }
}

pub(crate) struct ConvBn {
    conv: Conv2d,
    bn: BatchNorm,
}

impl ConvBn {
    fn new(cin: usize, cout: usize, k: usize, stride: usize, vb: VarBuilder) -> Result<Self> {
        let cfg = Conv2dConfig {
            padding: k / 2,
            stride,
            ..Default::default()
        };
        Ok(Self {
            conv: conv2d_no_bias(cin, cout, k, cfg, vb.pp("conv"))?,
            bn: batch_norm(cout, BatchNormConfig::default(), vb.pp("bn"))?,
        })
    }

    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        self.bn.forward_t(&self.conv.forward(x)?, train)
    }
}

pub(crate) struct BasicBlock {
    first: ConvBn,
    second: ConvBn,
    shortcut: Option<ConvBn>,
}

impl BasicBlock {
    fn new(cin: usize, cout: usize, stride: usize, vb: VarBuilder) -> Result<Self> {
        let shortcut = if stride != 1 || cin != cout {
            Some(ConvBn::new(cin, cout, 1, stride, vb.pp("shortcut"))?)
        } else {
            None
        };
        Ok(Self {
            first: ConvBn::new(cin, cout, 3, stride, vb.pp("c1"))?,
            second: ConvBn::new(cout, cout, 3, 1, vb.pp("c2"))?,
            shortcut,
        })
    }

    fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let y = self.first.forward(x, train)?.relu()?;
        let y = self.second.forward(&y, train)?;
        let skip = match &self.shortcut {
            Some(s) => s.forward(x, train)?,
            None => x.clone(),
        };
        (y + skip)?.relu()
    }
}

pub(crate) enum Backbone {
    Resnet { stem: ConvBn, blocks: Vec<BasicBlock> },
    Reduced { stages: Vec<ConvBn> },
}

impl Backbone {
    pub(crate) fn new(kind: BackboneKind, in_channels: usize, vb: VarBuilder) -> Result<Self> {
        match kind {
            BackboneKind::Resnet18 { width } => {
                let stem = ConvBn::new(in_channels, width, 3, 1, vb.pp("stem"))?;
                let mut blocks = Vec::new();
                let mut cin = width;
                for (stage, mult) in [1usize, 2, 4, 8].into_iter().enumerate() {
                    let cout = width * mult;
                    for b in 0..2 {
                        let stride = if stage > 0 && b == 0 { 2 } else { 1 };
                        blocks.push(BasicBlock::new(cin, cout, stride, vb.pp(format!("layer{}.{b}", stage + 1)))?);
                        cin = cout;
                    }
                }
                Ok(Backbone::Resnet { stem, blocks })
            }
            BackboneKind::Reduced { width } => {
                let mut stages = Vec::new();
                let mut cin = in_channels;
                for (i, mult) in [1usize, 2, 4].into_iter().enumerate() {
                    stages.push(ConvBn::new(cin, width * mult, 3, 1, vb.pp(format!("stage{i}")))?);
                    cin = width * mult;
                }
                Ok(Backbone::Reduced { stages })
            }
        }
    }

    /// Image batch `N x C x H x W` to pooled features `N x feature_dim`.
    pub(crate) fn forward(&self, x: &Tensor, train: bool) -> Result<Tensor> {
        let maps = match self {
            Backbone::Resnet { stem, blocks } => {
                let mut h = stem.forward(x, train)?.relu()?;
                for block in blocks {
                    h = block.forward(&h, train)?;
                }
                h
            }
            Backbone::Reduced { stages } => {
                let mut h = x.clone();
                for stage in stages {
                    h = stage.forward(&h, train)?.relu()?;
                    if h.dim(D::Minus1)? >= 2 && h.dim(D::Minus2)? >= 2 {
                        h = h.max_pool2d(2)?;
                    }
                }
                h
            }
        };
        maps.mean(D::Minus1)?.mean(D::Minus1)
    }
}
