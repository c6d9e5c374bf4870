use plasticity_control::control::{eval_gradient, eval_objective, ControlProblem, ObjectiveSpec};
use plasticity_control::mesh::{DirichletRule, FieldP0, FieldP1, Mesh, Side};
use plasticity_control::solver::{PlasticityModel, State, TimeGrid};
use plasticity_control::tensor::{ElasticityTensor, SymTensor};
use plasticity_control::yield_set::{RegularizationParams, YieldSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn plastifying_problem(n: usize, steps: usize, lambda: f64) -> ControlProblem {
    let mesh = Mesh::rect(n, n, &DirichletRule::new(&[Side::Left, Side::Right])).unwrap();
    let model = PlasticityModel::new(&mesh, ElasticityTensor::new(1.0, 1.0).unwrap(), YieldSet::new(0.3).unwrap()).unwrap();
    let grid = TimeGrid::new(0.5, steps).unwrap();
    let rp = RegularizationParams::new(lambda, 0.05).unwrap();
    let mut spec = ObjectiveSpec::new(&mesh, &grid, rp);
    spec.alpha = 1e-2;
    spec.huber_eps_obj = 1e-2;
    for k in 0..=steps {
        spec.mu_target[k] = FieldP0::constant(&mesh, SymTensor::from_components(2, &[0.5, -0.2, 0.3]).unwrap());
        spec.v_target[k] = FieldP1::interpolate(&mesh, |x| [x[0] * 0.4, 0.1 * x[1]]);
    }
    ControlProblem::new(model, grid, State::zero(&mesh), spec).unwrap()
}

fn shear_control(p: &ControlProblem) -> plasticity_control::control::ControlParam {
    let mut cp = p.initial_control();
    for (k, t) in p.grid.times().iter().enumerate() {
        cp.ud[k] = FieldP1::interpolate(p.mesh(), |x| [1.5 * t * x[0], 1.2 * t * x[0] * (1.0 - x[1])]);
        if k == 0 { continue; }
        for i in 0..cp.ell[k].data.len() {
            if !p.model.system.is_fixed(i) { cp.ell[k].data[i] = 0.01 * t * ((i as f64) * 0.7).sin(); }
        }
    }
    cp
}

#[test]
fn adjoint_matches_finite_differences() {
    let p = plastifying_problem(4, 5, 0.05);
    let cp = shear_control(&p);
    let (eval, g) = eval_gradient(&p, &cp).unwrap();
    assert!(eval.trajectory.substeps > 1, "substeps {}", eval.trajectory.substeps);
    let gx = p.pack(&g);
    let x = p.pack(&cp);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..5 {
        let d: Vec<f64> = (0..x.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dn = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
        let h = 1e-6 * xn / dn;
        let f = |s: f64| {
            let xs: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + s * b).collect();
            eval_objective(&p, &p.unpack(&xs).unwrap()).unwrap().value
        };
        let fd = (f(h) - f(-h)) / (2.0 * h);
        let ad: f64 = gx.iter().zip(&d).map(|(a, b)| a * b).sum();
        let rel = (fd - ad).abs() / ad.abs().max(1e-12);
        println!("fd {fd:e} ad {ad:e} rel {rel:e}");
        assert!(rel < 1e-5);
    }
}
