use std::f64::consts::PI;

use hyperconsensus::analysis::{
    classify, disagreement, twisted_configuration, ClassifyOptions, Outcome, TwistedSpec,
};
use hyperconsensus::dynamics::{Configuration, VectorFieldKind};
use hyperconsensus::geometry::sampling::{near_consensus, random_configuration, random_rotation, random_spd, tangent_perturbation};
use hyperconsensus::geometry::{Point, Surface, Telescope};
use hyperconsensus::graph::Graph;
use hyperconsensus::integrator::{simulate, IntegratorSettings, Termination};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_connected_graph(n: usize, rng: &mut ChaCha8Rng) -> Graph {
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.5) {
                    edges.push((i, j, rng.random_range(0.2..2.0)));
                }
            }
        }
        let g = Graph::from_edges(n, edges).unwrap();
        if g.is_connected() {
            return g;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn disagreement_is_invariant_under_rigid_motions(seed in any::<u64>(), dim in 2usize..6, n in 2usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected_graph(n, &mut rng);
        let x: Vec<Point> = (0..n).map(|_| Point::from_fn(dim, |_, _| rng.random_range(-3.0..3.0))).collect();
        let q = random_rotation(dim, &mut rng);
        let shift = Point::from_fn(dim, |_, _| rng.random_range(-10.0..10.0));
        let moved: Vec<Point> = x.iter().map(|p| &q * p + &shift).collect();
        let (a, b) = (disagreement(&g, &x), disagreement(&g, &moved));
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn gradient_flow_never_increases_disagreement(seed in any::<u64>(), n in 2usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let surfaces = [
            Surface::sphere(rng.random_range(1..4)).unwrap(),
            Surface::ellipsoid(random_spd(rng.random_range(2..5), 50.0, &mut rng)).unwrap(),
        ];
        for s in surfaces {
            let g = random_connected_graph(n, &mut rng);
            let x0 = Configuration::new(random_configuration(&s, n, &mut rng).unwrap()).unwrap();
            let traj = simulate(&VectorFieldKind::gradient_flow(), &s, &g, &x0, &IntegratorSettings::new(0.01, 2.0)).unwrap();
            prop_assert_eq!(&traj.termination, &Termination::Completed);
            for w in traj.diagnostics.windows(2) {
                prop_assert!(w[1].disagreement <= w[0].disagreement + 1e-10);
            }
        }
    }

    #[test]
    fn telescope_agents_stay_in_their_band(seed in any::<u64>(), k in 1u32..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = Telescope::default();
        let s = Surface::Telescope(t);
        let (lo, hi) = Telescope::band_bounds(k);
        let (plateau_lo, plateau_hi) = t.plateau(k);
        let n = rng.random_range(3..8);
        let agents = (0..n)
            .map(|_| s.revolution_point(rng.random_range(plateau_lo..plateau_hi), rng.random_range(-PI..PI)).unwrap())
            .collect();
        let g = Graph::cycle(n).unwrap();
        let x0 = Configuration::new(agents).unwrap();
        let traj = simulate(&VectorFieldKind::gradient_flow(), &s, &g, &x0, &IntegratorSettings::new(0.01, 20.0)).unwrap();
        prop_assert_eq!(&traj.termination, &Termination::Completed);
        for x in &traj.states {
            for p in x.iter() {
                prop_assert!(p[2] >= lo - 1e-9 && p[2] <= hi + 1e-9, "z={} outside [{lo}, {hi}]", p[2]);
            }
        }
    }
}

#[test]
fn near_consensus_on_the_sphere_converges() {
    let s = Surface::sphere(2).unwrap();
    let g = Graph::cycle(6).unwrap();
    let kind = VectorFieldKind::gradient_flow();
    let settings = IntegratorSettings::new(0.01, 60.0).record_every(1000);
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = Configuration::new(near_consensus(&s, 6, 0.09, &mut rng).unwrap()).unwrap();
        assert!(disagreement(&g, &x0) < 0.1);
        let traj = simulate(&kind, &s, &g, &x0, &settings).unwrap();
        let c = classify(&traj, &kind, &s, &g, &ClassifyOptions::default());
        assert_eq!(c.outcome, Outcome::Consensus, "seed {seed}: V={}", c.terminal_disagreement);
    }
}

#[test]
fn telescope_twisted_states_are_not_attracted_to_consensus() {
    let s = Surface::Telescope(Telescope::default());
    let g = Graph::cycle(8).unwrap();
    let kind = VectorFieldKind::gradient_flow();
    for k in 4..=8 {
        let spec = TwistedSpec { q: 1, theta: 0.0, u: Telescope::band_center(k), n_agents: 8 };
        let x0 = twisted_configuration(&s, &spec).unwrap();
        assert!(disagreement(&g, &x0) < 2f64.powi(3 - k as i32));
        let traj = simulate(&kind, &s, &g, &x0, &IntegratorSettings::new(0.01, 30.0).record_every(100)).unwrap();
        let c = classify(&traj, &kind, &s, &g, &ClassifyOptions::default());
        assert_ne!(c.outcome, Outcome::Consensus, "band {k}");
    }
}

#[test]
fn perturbed_great_circle_twist_on_the_sphere_escapes() {
    let s = Surface::sphere(2).unwrap();
    let n = 6;
    let g = Graph::cycle(n).unwrap();
    let kind = VectorFieldKind::gradient_flow();
    let spec = TwistedSpec { q: 1, theta: 0.0, u: PI / 2.0, n_agents: n };
    let twisted = twisted_configuration(&s, &spec).unwrap();
    let v_twisted = disagreement(&g, &twisted);
    assert!((v_twisted - 2.0 * n as f64 * (PI / n as f64).sin().powi(2)).abs() < 1e-12);
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agents = twisted
            .iter()
            .map(|p| s.retract(&(p + tangent_perturbation(&s, p, 1e-3, &mut rng).unwrap())).unwrap())
            .collect();
        let x0 = Configuration::new(agents).unwrap();
        let traj = simulate(&kind, &s, &g, &x0, &IntegratorSettings::new(0.01, 100.0).record_every(1000)).unwrap();
        let v_end = traj.last_diagnostics().disagreement;
        assert!(v_end < 0.5 * v_twisted, "seed {seed}: V stayed at {v_end}");
    }
}

#[test]
fn twisted_states_on_the_circle_are_equilibria() {
    let s = Surface::sphere(1).unwrap();
    for n in 3..10 {
        let g = Graph::cycle(n).unwrap();
        let kind = VectorFieldKind::gradient_flow();
        for q in 0..n as i64 {
            let spec = TwistedSpec { q, theta: 0.2, u: 0.0, n_agents: n };
            let x0 = twisted_configuration(&s, &spec).unwrap();
            let traj = simulate(&kind, &s, &g, &x0, &IntegratorSettings::new(0.05, 1.0)).unwrap();
            for (a, b) in traj.last_state().iter().zip(x0.iter()) {
                assert!((a - b).norm() < 1e-12, "n={n} q={q}");
            }
        }
    }
}
