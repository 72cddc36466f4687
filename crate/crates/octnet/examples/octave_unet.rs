//! Builds the octave-convolution encoder/decoder network, runs one forward
//! pass and a few Adam steps on a toy target.

use octnet::graph::{Graph, Mode};
use octnet::{Adam, AdamConfig, Fcn, FcnConfig, ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> octnet::Result<()> {
    let mut store = ParamStore::new(0);
    let cfg = FcnConfig::new(3, 4, 3, 8).with_alpha(0.25);
    let net = Fcn::new(&mut store, cfg)?;
    println!("trainable parameters: {}", store.trainable_count());

    let x = Tensor::randn(&[2, 3, 32, 32], 1.0, &mut ChaCha8Rng::seed_from_u64(1));
    let y = net.predict(&store, &x)?;
    println!("input {:?} -> output {:?}", x.shape(), y.shape());

    // regress the output onto a fixed random target with an L1 loss
    let target = Tensor::randn(y.shape(), 0.5, &mut ChaCha8Rng::seed_from_u64(2));
    let mut opt = Adam::new(AdamConfig { lr: 1e-2, ..Default::default() });
    for step in 0..10 {
        let (loss, grads, updates) = {
            let mut g = Graph::new(&store, Mode::Train);
            let xi = g.input(x.clone());
            let out = net.forward(&mut g, xi)?;
            let t = g.input(target.clone());
            let diff = g.sub(out, t);
            let abs = g.abs(diff);
            let loss = g.mean(abs);
            (g.value(loss).data()[0], g.backward(loss), g.take_stat_updates())
        };
        opt.step(&mut store, &grads);
        octnet::optim::apply_stat_updates(&mut store, &updates, octnet::layers::BN_MOMENTUM);
        println!("step {step}: L1 {loss:.4}");
    }
    Ok(())
}
