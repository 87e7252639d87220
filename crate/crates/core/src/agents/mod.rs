//! Policy learners and the preference-learning training loop.

pub mod collect;
pub mod explore;
pub mod ppo;
pub mod replay;
pub mod sac;
pub mod train;

pub use collect::{evaluate, Collector, Evaluation};
pub use explore::{intrinsic_reward, intrinsic_rewards, ExploreConfig};
pub use ppo::{gae, PpoAgent, PpoConfig};
pub use replay::ReplayBuffer;
pub use sac::{ActionScaler, SacAgent, SacBatch, SacConfig, SacLosses};
pub use train::{pretrain_ppo, pretrain_sac, train_preference_rl, with_teacher, Algo, SessionLog, TrainConfig, TrainOutput};
