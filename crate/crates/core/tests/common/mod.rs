#![allow(dead_code)]

use prefrl_core::agents::{Algo, TrainConfig};

/// A point-mass run small enough for debug-speed tests.
pub fn tiny(algo: Algo) -> TrainConfig {
    let mut c = TrainConfig {
        algo,
        budget: 12,
        session_period: 300,
        total_steps: 1200,
        eval_every: 300,
        eval_episodes: 2,
        segment_len: 10,
        ..TrainConfig::default()
    };
    c.explore.pretrain_steps = 300;
    c.explore.seed_steps = 100;
    c.sac.hidden = vec![16, 16];
    c.sac.batch_size = 32;
    c.ppo.hidden = vec![16, 16];
    c.ppo.rollout_len = 100;
    c.ppo.epochs = 2;
    c.ppo.minibatch = 50;
    c.reward_model.hidden = vec![16, 16];
    c.reward_model.epochs = 5;
    c
}
