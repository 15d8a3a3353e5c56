use faer::Mat;
use num_complex::Complex64 as C64;
use qdcav::fock_algebra::HilbertLayout;
use qdcav::fock_algebra::OperatorMatrix;
use qdcav::generator_builder::{build_generator, Engine, ModelConfig, PumpMode};
use qdcav::phonon_kernel::{BathParams, PhononKernel};
use qdcav::photon_rate_reduction::reduce;
use qdcav::steady_state::{evolve, solve_steady, EvolveOptions};

fn kernel(t: f64) -> PhononKernel {
    PhononKernel::new(BathParams { temperature: t, ..Default::default() }).unwrap()
}

fn vacuum(l: HilbertLayout) -> OperatorMatrix {
    let d = l.dim();
    OperatorMatrix::from_mat(l, Mat::from_fn(d, d, |i, j| if i == 0 && j == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) }))
}

#[test]
fn engines_agree_on_detuned_incoherent_points() {
    let k = kernel(5.0);
    for delta in [-2.0, 0.0, 1.5] {
        let c = ModelConfig { eta1: 0.35, eta2: 0.35, delta1: delta, delta2: delta, n_max: 14, ..Default::default() };
        let full = solve_steady(&build_generator(&c, &k, Engine::FullMe).unwrap()).unwrap();
        let sme = solve_steady(&build_generator(&c, &k, Engine::Sme).unwrap()).unwrap();
        assert!(full.populations.max_abs_diff(&sme.populations) < 0.02, "Δ={delta}");
        assert!((full.mean_n - sme.mean_n).abs() < 0.05 * sme.mean_n, "Δ={delta}: {} vs {}", full.mean_n, sme.mean_n);
    }
}

#[test]
fn relaxation_from_vacuum_matches_algebraic_state() {
    let c = ModelConfig { eta1: 0.35, eta2: 0.35, n_max: 14, ..Default::default() };
    let gen = build_generator(&c, &kernel(5.0), Engine::Sme).unwrap();
    let ss = solve_steady(&gen).unwrap();
    let tr = evolve(&gen, &vacuum(c.layout()), 600.0, &EvolveOptions::default()).unwrap();
    assert!((tr.final_state.mean_n - ss.mean_n).abs() < 1e-4, "{} vs {}", tr.final_state.mean_n, ss.mean_n);
    assert!(tr.snapshots.windows(2).all(|w| w[1].t > w[0].t));
}

#[test]
fn coherent_generators_conserve_and_reduce() {
    let k = kernel(5.0);
    let c = ModelConfig {
        pump_mode: PumpMode::Coherent,
        eta1: 1.9,
        eta2: 1.9,
        g2: -1.0,
        delta1p: -13.5,
        delta2p: -13.5,
        delta_cp: -14.0,
        n_max: 8,
        ..Default::default()
    };
    for engine in [Engine::FullMe, Engine::Sme] {
        let gen = build_generator(&c, &k, engine).unwrap();
        assert!(gen.trace_defect() < 1e-10);
        let ss = solve_steady(&gen).unwrap();
        assert!(ss.min_eigenvalue > -1e-7, "{engine:?}: {}", ss.min_eigenvalue);
        let m = reduce(&gen, c.kappa, 4).unwrap();
        assert!(m.column_sum_defect() < 1e-8);
        for i in 0..c.layout().dim() {
            assert!((m.diag_steady[i] - ss.rho.get(i, i).re).abs() < 1e-8);
        }
    }
}
