use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::nn::{
    Conv2d, Dense, Dropout, Flatten, GlobalAvgPool, Inception, MaxPool2, MbConv, Relu, Sequential,
};

use super::ModelError;

/// The three classifier families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArchId {
    CustomCnn,
    MiniInception,
    MiniEffnet,
}

impl ArchId {
    pub const ALL: [ArchId; 3] = [ArchId::CustomCnn, ArchId::MiniInception, ArchId::MiniEffnet];

    pub fn name(self) -> &'static str {
        match self {
            ArchId::CustomCnn => "custom_cnn",
            ArchId::MiniInception => "mini_inception",
            ArchId::MiniEffnet => "mini_effnet",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            ArchId::CustomCnn => 1,
            ArchId::MiniInception => 2,
            ArchId::MiniEffnet => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.code() == code)
    }
}

impl fmt::Display for ArchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| ModelError::UnknownArch(s.to_string()))
    }
}

/// Network body for `arch` on a single-channel `height × width` input.
pub(crate) fn build_net(arch: ArchId, height: usize, width: usize, seed: u64) -> Result<Sequential, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;
    match arch {
        ArchId::CustomCnn => {
            if !height.is_multiple_of(8) || !width.is_multiple_of(8) || height == 0 || width == 0 {
                return Err(ModelError::UnsupportedInput { arch, height, width });
            }
            let flat = 64 * (height / 8) * (width / 8);
            Ok(Sequential::new()
                .with(Conv2d::new("conv1", 1, 16, 3, 1, 1, rng))
                .with(Relu::new())
                .with(MaxPool2::new())
                .with(Conv2d::new("conv2", 16, 32, 3, 1, 1, rng))
                .with(Relu::new())
                .with(MaxPool2::new())
                .with(Conv2d::new("conv3", 32, 64, 3, 1, 1, rng))
                .with(Relu::new())
                .with(MaxPool2::new())
                .with(Flatten::new())
                .with(Dense::new("fc1", flat, 128, rng))
                .with(Relu::new())
                .with(Dropout::new(0.5))
                .with(Dense::zeroed("fc2", 128, 2)))
        }
        ArchId::MiniInception => {
            if !height.is_multiple_of(4) || !width.is_multiple_of(4) || height == 0 || width == 0 {
                return Err(ModelError::UnsupportedInput { arch, height, width });
            }
            Ok(Sequential::new()
                .with(Conv2d::new("stem", 1, 16, 3, 1, 1, rng))
                .with(Relu::new())
                .with(MaxPool2::new())
                .with(Inception::new("inception1", 16, 8, rng))
                .with(MaxPool2::new())
                .with(Inception::new("inception2", 32, 8, rng))
                .with(GlobalAvgPool::new())
                .with(Dense::zeroed("head", 32, 2)))
        }
        ArchId::MiniEffnet => {
            if height < 4 || width < 4 {
                return Err(ModelError::UnsupportedInput { arch, height, width });
            }
            Ok(Sequential::new()
                .with(Conv2d::new("stem", 1, 16, 3, 2, 1, rng).with_floor_extent())
                .with(Relu::new())
                .with(MbConv::new("mbconv1", 16, 16, 4, 1, 4, rng))
                .with(MbConv::new("mbconv2", 16, 32, 4, 2, 4, rng))
                .with(GlobalAvgPool::new())
                .with(Dense::zeroed("head", 32, 2)))
        }
    }
}
