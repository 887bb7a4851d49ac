use bev_core::neuralnet::{
    adam_update, backward, forward, mse_loss, predict, train, Activation, Hyper, LayerSpec, Mode, NetInput,
    NetworkSpec, NetworkState, TrainSet,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ACTIVATIONS: [Activation; 3] = [Activation::Relu, Activation::Tanh, Activation::Linear];

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

fn random_spec(rng: &mut ChaCha8Rng) -> NetworkSpec {
    loop {
        let act = |rng: &mut ChaCha8Rng| ACTIVATIONS[rng.random_range(0..3)];
        let main = rng.random_range(1..4);
        let side = rng.random_range(0..4);
        let code = rng.random_range(1..5);
        let hidden = rng.random_range(1..6);
        let out = rng.random_range(1..4);
        let p = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 0.3 } else { 0.0 };
        let spec = NetworkSpec {
            branch: vec![LayerSpec::new(main, code, act(rng), p(rng))],
            side_dim: side,
            trunk: vec![
                LayerSpec::new(side + code, hidden, act(rng), p(rng)),
                LayerSpec::new(hidden, out, act(rng), 0.0),
            ],
        };
        if spec.param_count() <= 200 {
            return spec;
        }
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn analytic_gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let h = 1e-5;
    for _ in 0..25 {
        let spec = random_spec(&mut rng);
        let mut state = NetworkState::init(spec.clone(), &mut rng).unwrap();
        for l in &mut state.layers {
            l.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let batch = 3;
        let x = random_matrix(batch, spec.input_dim(), &mut rng);
        let side = (spec.side_dim > 0).then(|| random_matrix(batch, spec.side_dim, &mut rng));
        let upstream = random_matrix(batch, spec.output_dim(), &mut rng);

        let (_, cache) = forward(
            &state,
            NetInput::new(x.view(), side.as_ref().map(|s| s.view())),
            Mode::Train(&mut rng),
        )
        .unwrap();
        let masks = cache.masks();
        let grads = backward(&state, &cache, upstream.view()).unwrap();

        // Scalar objective sum(out * upstream) under the same dropout masks.
        let objective = |st: &NetworkState, x: &Array2<f64>, side: &Option<Array2<f64>>| {
            let (out, _) = forward(
                st,
                NetInput::new(x.view(), side.as_ref().map(|s| s.view())),
                Mode::FixedMasks(&masks),
            )
            .unwrap();
            (&out * &upstream).sum()
        };

        for li in 0..state.layers.len() {
            for idx in 0..state.layers[li].weight.len() {
                let (r, c) = (idx / state.layers[li].weight.ncols(), idx % state.layers[li].weight.ncols());
                let mut plus = state.clone();
                plus.layers[li].weight[(r, c)] += h;
                let mut minus = state.clone();
                minus.layers[li].weight[(r, c)] -= h;
                let num = (objective(&plus, &x, &side) - objective(&minus, &x, &side)) / (2.0 * h);
                let ana = grads.layers[li].weight[(r, c)];
                assert!(rel_err(ana, num) < 1e-4, "layer {li} w[{r},{c}]: {ana} vs {num}");
            }
            for j in 0..state.layers[li].bias.len() {
                let mut plus = state.clone();
                plus.layers[li].bias[j] += h;
                let mut minus = state.clone();
                minus.layers[li].bias[j] -= h;
                let num = (objective(&plus, &x, &side) - objective(&minus, &x, &side)) / (2.0 * h);
                let ana = grads.layers[li].bias[j];
                assert!(rel_err(ana, num) < 1e-4, "layer {li} b[{j}]: {ana} vs {num}");
            }
        }
        let gx = grads.main_input.as_ref().unwrap();
        for idx in 0..x.len() {
            let (r, c) = (idx / x.ncols(), idx % x.ncols());
            let mut xp = x.clone();
            xp[(r, c)] += h;
            let mut xm = x.clone();
            xm[(r, c)] -= h;
            let num = (objective(&state, &xp, &side) - objective(&state, &xm, &side)) / (2.0 * h);
            assert!(rel_err(gx[(r, c)], num) < 1e-4);
        }
        if let Some(side) = &side {
            let gs = grads.side_input.as_ref().unwrap();
            for idx in 0..side.len() {
                let (r, c) = (idx / side.ncols(), idx % side.ncols());
                let mut sp = side.clone();
                sp[(r, c)] += h;
                let mut sm = side.clone();
                sm[(r, c)] -= h;
                let num = (objective(&state, &x, &Some(sp)) - objective(&state, &x, &Some(sm))) / (2.0 * h);
                assert!(rel_err(gs[(r, c)], num) < 1e-4);
            }
        } else {
            assert!(grads.side_input.is_none());
        }
    }
}

#[test]
fn adam_matches_scalar_recurrence() {
    let hyper = Hyper::default();
    let mut theta = [2.0f64];
    let (mut m, mut v) = ([0.0], [0.0]);
    let (mut t_ref, mut m_ref, mut v_ref) = (2.0f64, 0.0f64, 0.0f64);
    for t in 1..=10u64 {
        // f(θ) = (θ - 3)² + sin θ
        let g_ref = 2.0 * (t_ref - 3.0) + t_ref.cos();
        let g = [2.0 * (theta[0] - 3.0) + theta[0].cos()];
        adam_update(&mut theta, &g, &mut m, &mut v, t, &hyper);

        m_ref = 0.9 * m_ref + 0.1 * g_ref;
        v_ref = 0.999 * v_ref + 0.001 * g_ref * g_ref;
        let mh = m_ref / (1.0 - 0.9f64.powi(t as i32));
        let vh = v_ref / (1.0 - 0.999f64.powi(t as i32));
        t_ref -= 0.001 * mh / (vh.sqrt() + 1e-8);
        assert!((theta[0] - t_ref).abs() < 1e-12);
    }
}

fn identity_task(n: usize, seed: u64) -> TrainSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_matrix(n, 4, &mut rng).mapv(|v| v * 0.8);
    TrainSet {
        main: x.clone(),
        side: None,
        target: x,
    }
}

fn small_net() -> NetworkSpec {
    NetworkSpec::mlp(vec![
        LayerSpec::new(4, 32, Activation::Relu, 0.0),
        LayerSpec::new(32, 32, Activation::Relu, 0.0),
        LayerSpec::new(32, 4, Activation::Tanh, 0.0),
    ])
}

#[test]
fn training_learns_identity() {
    let train_set = identity_task(2000, 1);
    let val = identity_task(200, 2);
    let hyper = Hyper {
        lr: 0.003,
        batch_size: 32,
        max_epochs: 60,
        patience: 10,
        ..Hyper::default()
    };
    let out = train(small_net(), &train_set, &val, &hyper).unwrap();
    let first = out.history[0].train_loss;
    let best = out.history[out.best_epoch - 1].val_loss;
    assert!(best < first);
    let pred = predict(&out.state, val.input()).unwrap();
    let (mse, _) = mse_loss(pred.view(), val.target.view()).unwrap();
    assert!(mse < 2e-3, "{mse}");
    assert_eq!(mse, best);
}

#[test]
fn training_is_deterministic() {
    let data = identity_task(300, 3);
    let hyper = Hyper {
        max_epochs: 3,
        batch_size: 16,
        rng_seed: 9,
        ..Hyper::default()
    };
    let mut spec = small_net();
    spec.trunk[0].dropout_p = 0.25;
    let a = train(spec.clone(), &data, &data, &hyper).unwrap();
    let b = train(spec.clone(), &data, &data, &hyper).unwrap();
    assert_eq!(a.state.layers, b.state.layers);
    assert_eq!(a.history, b.history);
    let c = train(spec, &data, &data, &Hyper { rng_seed: 10, ..hyper }).unwrap();
    assert_ne!(a.state.layers, c.state.layers);
}

#[test]
fn tanh_head_stays_in_range() {
    let spec = small_net();
    let mut state = NetworkState::init(spec, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    state.layers[2].weight.mapv_inplace(|w| w * 100.0);
    let x = random_matrix(500, 4, &mut ChaCha8Rng::seed_from_u64(5)).mapv(|v| v * 50.0);
    let out = predict(&state, NetInput::new(x.view(), None)).unwrap();
    assert!(out.iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn linear_net_fits_identity_to_high_precision() {
    let data = identity_task(256, 6);
    let spec = NetworkSpec::mlp(vec![LayerSpec::new(4, 4, Activation::Linear, 0.0)]);
    let hyper = Hyper {
        lr: 0.01,
        batch_size: 32,
        max_epochs: 200,
        patience: 200,
        ..Hyper::default()
    };
    let out = train(spec, &data, &data, &hyper).unwrap();
    let last = out.history.last().unwrap();
    assert!(out.history.len() <= 200);
    assert!(last.train_loss < 1e-6, "{}", last.train_loss);
}
