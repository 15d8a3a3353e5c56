use qdcav::phonon_kernel::*;

fn bath(t: f64) -> BathParams {
    BathParams { temperature: t, ..Default::default() }
}

#[test]
fn calibration_hits_quoted_factors() {
    let g1_abs = calibrate_g1_abs(&bath(5.0), 5.0, 0.9).unwrap();
    let cal = |t: f64| franck_condon(&BathParams { g1_abs, ..bath(t) }).unwrap();
    assert!((cal(5.0) - 0.9).abs() < 1e-8);
    for (t, quoted) in [(10.0, 0.84), (20.0, 0.73)] {
        assert!((cal(t) - quoted).abs() < 0.02, "T={t}: {}", cal(t));
    }
    let closed = (-0.5 * 1.42e-3 * 100.0f64).exp();
    assert!((cal(0.0) - closed).abs() < 1e-6 * closed);
}

#[test]
fn franck_condon_decreases_with_temperature() {
    let mut prev = 1.0;
    for t in [0.0, 1.0, 5.0, 10.0, 20.0, 40.0] {
        let b = franck_condon(&bath(t)).unwrap();
        assert!(b > 0.0 && b <= prev, "T={t}: {b}");
        prev = b;
    }
}

#[test]
fn rates_scale_with_coupling_squared() {
    let k = PhononKernel::new(bath(5.0)).unwrap();
    let a = rates_incoherent(1.0, 1.0, 0.7, -0.3, &k);
    let b = rates_incoherent(1.7, 1.0, 0.7, -0.3, &k);
    for s in [PLUS, MINUS] {
        assert!((b.gamma_pm[0][s] - 1.7f64.powi(2) * a.gamma_pm[0][s]).abs() < 1e-14 * b.gamma_pm[0][s].abs());
        assert_eq!(b.gamma_pm[1][s], a.gamma_pm[1][s]);
        assert!((b.omega_pm[s] - a.omega_pm[s] * 1.7).norm() < 1e-14);
    }
}

#[test]
fn zero_temperature_feeds_cavity_only_downhill() {
    // PLUS multiplies L[σ⁻a†]: exciton above the cavity can shed Δ into phonons.
    let k = PhononKernel::new(bath(0.0)).unwrap();
    for d in [0.5, 2.0, 8.0] {
        let r = rates_incoherent(1.0, 1.0, d, d, &k);
        let m = rates_incoherent(1.0, 1.0, -d, -d, &k);
        for i in 0..2 {
            assert!(r.gamma_pm[i][PLUS] > 1e3 * r.gamma_pm[i][MINUS], "Δ={d}: {:?}", r.gamma_pm[i]);
            assert!((r.gamma_pm[i][PLUS] - m.gamma_pm[i][MINUS]).abs() < 1e-12);
        }
    }
}

#[test]
fn incoherent_rates_are_nonnegative_on_figure_grids() {
    for t in [5.0, 20.0] {
        let k = PhononKernel::new(bath(t)).unwrap();
        for step in 0..=32 {
            let d = -4.0 + 0.25 * step as f64;
            let r = rates_incoherent(1.0, 1.0, d, d, &k);
            assert!(r.gamma_pm.iter().flatten().all(|&g| g >= 0.0), "T={t} Δ={d}");
        }
    }
}

#[test]
fn coherent_pump_fields() {
    let k = PhononKernel::new(bath(5.0)).unwrap();
    let off = rates_coherent(1.0, 1.0, 0.0, 0.0, -13.5, -13.5, &k);
    assert!(off.gamma_p_sigma_pm.iter().flatten().all(|&g| g == 0.0));
    assert!(off.gamma_p_sigsig.iter().flatten().flatten().flatten().all(|g| g.norm() == 0.0));
    assert_eq!(off.omega_p_pp.norm(), 0.0);

    let on = rates_coherent(1.0, 1.0, 3.0, 3.0, -13.5, -13.5, &k);
    assert!(on.gamma_p_sigma_pm.iter().flatten().all(|&g| g >= 0.0));
    for a in 0..2 {
        for b in 0..2 {
            let s = on.gamma_p_sigsig[a][b];
            assert_eq!(s[0][1], s[1][0]);
        }
    }
}

#[test]
fn resonant_identical_dots_have_balanced_rates() {
    let k = PhononKernel::new(bath(5.0)).unwrap();
    let r = rates_incoherent(1.0, 1.0, 0.0, 0.0, &k);
    for i in 0..2 {
        assert_eq!(r.gamma_pm[i][PLUS], r.gamma_pm[i][MINUS]);
    }
    // Ω± reduce to i·g₁g₂·Im K₊(0): a Hermitian exchange, equal for both signs.
    assert_eq!(r.omega_pm[PLUS], r.omega_pm[MINUS]);
    assert!(r.omega_pm[PLUS].re.abs() < 1e-15);
}
