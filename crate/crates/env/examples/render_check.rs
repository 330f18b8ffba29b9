use mvmwm_env::{EnvConfig, TaskKind, ToyEnv};
fn main() {
    let mut cfg = EnvConfig::default();
    cfg.task = TaskKind::ReachPlace;
    cfg.seed = 4;
    cfg.image_size = 96;
    let mut env = ToyEnv::new(cfg).unwrap();
    let obs = env.reset().unwrap();
    for (i, (v, k)) in obs.views.iter().zip(&obs.view_kinds).enumerate() {
        let buf: image::RgbImage = image::ImageBuffer::from_raw(v.side as u32, v.side as u32, v.data.clone()).unwrap();
        buf.save(format!("/tmp/view_{i}_{}.png", k.name())).unwrap();
    }
    // step the expert a few times and save again
    for _ in 0..12 { let a = env.expert_action(); env.step(a).unwrap(); }
    let obs = env.observe();
    for (i, (v, k)) in obs.views.iter().zip(&obs.view_kinds).enumerate() {
        let buf: image::RgbImage = image::ImageBuffer::from_raw(v.side as u32, v.side as u32, v.data.clone()).unwrap();
        buf.save(format!("/tmp/view_{i}_{}_later.png", k.name())).unwrap();
    }
    println!("saved");
}
