use fairdyn::causal::GroupLabel;
use fairdyn::envs::*;
use fairdyn::model::*;
fn main() {
    let mut env = AllocationEnv::new(AllocationParams::unfair_dynamics());
    let mut policy = UniformRandomPolicy { menu_size: 11 };
    let config = EnsembleConfig {
        ensemble_size: 3,
        hidden_layers: vec![24, 24],
        epochs: 35,
        ..EnsembleConfig::default()
    };
    let mut model = EnsembleModel::new(1, 1, config, 5).unwrap();
    // warm-started fits on a growing buffer, like the learn loop would do
    for epoch in 0..12u64 {
        let data = rollout(&mut env, &mut policy, 77, 3 + epoch as usize).unwrap();
        model.fit(&data, 6 + epoch).unwrap();
    }
    for (s, a) in [(6.0, 4.0), (6.0, 6.0), (4.0, 3.0), (2.0, 2.0)] {
        let mut d_r = 0.0;
        let mut d_s = 0.0;
        for b in 0..model.ensemble_size() {
            let p1 = model.predict(b, GroupLabel::Z1, &[s], &[a]);
            let p0 = model.predict(b, GroupLabel::Z0, &[s], &[a]);
            d_r += (p1.reward_mean - p0.reward_mean) / 3.0;
            d_s += (p1.next_mean[0] - p0.next_mean[0]) / 3.0;
        }
        println!("s={s} a={a}: model dr = {d_r:+.4} (true ~ +0.1..0.2), ds' = {d_s:+.4} (true ~ -0.005)");
    }
}
