use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scpgan::autonn::{flatten_grads, unflatten_grads, ParamSet, Tape, Tensor, Var};
use scpgan::surgery::GradVector;

struct TwoLayer {
    params: ParamSet,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl TwoLayer {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand = |n: usize| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let params = ParamSet::new(vec![
            ("w1".into(), Tensor::new(rand(12), &[3, 4], true).unwrap()),
            ("b1".into(), Tensor::new(rand(4), &[1, 4], true).unwrap()),
            ("w2".into(), Tensor::new(rand(8), &[4, 2], true).unwrap()),
        ])
        .unwrap();
        Self {
            params,
            x: rand(15),
            y: rand(10),
        }
    }

    /// Mean-square loss of `sigmoid(x·w1 + b1)·w2` against `y`, per row.
    fn loss(&self, tape: &mut Tape, vars: &[Var], scale: f64) -> Var {
        let mut total = None;
        for r in 0..5 {
            let x = tape.constant(self.x[3 * r..3 * r + 3].to_vec(), &[1, 3]).unwrap();
            let y = tape.constant(self.y[2 * r..2 * r + 2].to_vec(), &[1, 2]).unwrap();
            let h = tape.matmul(x, vars[0]).unwrap();
            let h = tape.add(h, vars[1]).unwrap();
            let h = tape.sigmoid(h).unwrap();
            let o = tape.matmul(h, vars[2]).unwrap();
            let d = tape.sub(o, y).unwrap();
            let sq = tape.square(d).unwrap();
            let m = tape.mean(sq).unwrap();
            total = Some(match total {
                None => m,
                Some(t) => tape.add(t, m).unwrap(),
            });
        }
        tape.scale(total.unwrap(), scale).unwrap()
    }

    fn value(&self, params: &ParamSet) -> f64 {
        let mut tape = Tape::new();
        let vars = params.bind(&mut tape, false).unwrap();
        let l = self.loss(&mut tape, &vars, 1.0);
        tape.scalar(l)
    }

    fn grad(&self, scale: f64) -> Vec<f64> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, true).unwrap();
        let l = self.loss(&mut tape, &vars, scale);
        let g = tape.backward(l).unwrap();
        let mut p = self.params.clone();
        p.load_grads(&g, &vars).unwrap();
        flatten_grads(&p).unwrap().into_inner()
    }
}

#[test]
fn two_layer_net_matches_central_differences() {
    for seed in 0..5 {
        let net = TwoLayer::new(seed);
        let analytic = net.grad(1.0);
        let base = net.params.flat_values();
        let h = 1e-4;
        for i in 0..base.len() {
            let mut p = net.params.clone();
            let mut v = base.clone();
            v[i] += h;
            p.set_flat_values(&v).unwrap();
            let fp = net.value(&p);
            v[i] -= 2.0 * h;
            p.set_flat_values(&v).unwrap();
            let fm = net.value(&p);
            let numeric = (fp - fm) / (2.0 * h);
            let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-8);
            assert!(err < 1e-4, "seed {seed} coord {i}: {} vs {numeric}", analytic[i]);
        }
    }
}

#[test]
fn gradient_is_linear_in_the_loss() {
    let net = TwoLayer::new(9);
    let g1 = net.grad(1.0);
    let g3 = net.grad(-2.5);
    for (a, b) in g1.iter().zip(&g3) {
        assert!((-2.5 * a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }
}

#[test]
fn flatten_round_trips() {
    let mut net = TwoLayer::new(1);
    let g: Vec<f64> = (0..net.params.numel()).map(|i| i as f64 * 0.5 - 3.0).collect();
    unflatten_grads(&mut net.params, &GradVector::new(g.clone()).unwrap()).unwrap();
    assert_eq!(flatten_grads(&net.params).unwrap().into_inner(), g);
    let short = GradVector::new(vec![0.0; 3]).unwrap();
    assert!(unflatten_grads(&mut net.params, &short).is_err());
}

#[test]
fn identical_seeds_give_identical_nets() {
    use scpgan::autonn::{DiscriminatorNet, GeneratorNet, NetConfig};
    let mk = || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        (GeneratorNet::new(NetConfig::default(), &mut rng), DiscriminatorNet::new(NetConfig::default(), &mut rng))
    };
    assert_eq!(mk(), mk());
}
