use mcs_vortex::background::{bind_background, VortexConfig};
use mcs_vortex::barrier::{build_barrier, find_lambda0};
use mcs_vortex::energy::{recover_v, residual_system};
use mcs_vortex::grid::Grid;
use mcs_vortex::profile::{ModelParams, Profile};
use mcs_vortex::solver::{
    floor_tolerance, minimize_constrained, mountain_pass, newton_refine, Functional,
};

#[test]
fn probe_system_residual_anatomy() {
    for (tag, pos, neg) in [
        ("m1n0", vec![[0.5_f64, 0.5_f64]], vec![]),
        ("m2n1", vec![[0.3, 0.3], [0.7, 0.7]], vec![[0.5, 0.2]]),
    ] {
        let cfg = VortexConfig::new(pos, neg).unwrap();
        let grid = Grid::new(64).unwrap();
        let bg = bind_background(&cfg, &grid).unwrap();
        let mut barrier = build_barrier(&bg, Profile::Cp1, 0.0).unwrap();
        let l0 = find_lambda0(&barrier, &bg).unwrap();
        barrier.lambda0 = Some(l0);
        let params = ModelParams::new(1.2 * l0, 1e-2, 0.0, Profile::Cp1).unwrap();
        let coarse = minimize_constrained(
            &bg,
            &params,
            &barrier,
            None,
            Functional::Full,
            1e-8,
            20_000,
        )
        .unwrap();
        let u1 = newton_refine(
            &coarse.u,
            &bg,
            &params,
            Functional::Full,
            Some(&barrier),
            floor_tolerance(64, 1e-2),
            60,
        )
        .unwrap();
        let u2 = mountain_pass(&u1.u, &bg, &params, 1e-8, 17).unwrap();
        let n_masked = bg.mask().iter().filter(|m| !**m).count();
        println!(
            "[{tag}] lambda0={l0:.6} masked-out nodes={} of {}",
            n_masked,
            64 * 64
        );
        for (name, rep) in [("u1", &u1), ("u2", &u2)] {
            let v = recover_v(&rep.u, &bg, &params).unwrap();
            let s = residual_system(&rep.u, &v, &bg, &params).unwrap();
            println!(
                "[{tag}] {name}: r1 abs={:.3e} scale={:.3e} rel={:.3e} | r2 abs={:.3e} scale={:.3e} rel={:.3e} | cross={:.3e} | pde_masked={:.3e}",
                s.r1.masked_l2,
                s.r1_scale,
                s.r1_relative(),
                s.r2.masked_l2,
                s.r2_scale,
                s.r2_relative(),
                s.r2_cross_gap,
                rep.residuals.masked_l2
            );
            println!(
                "[{tag}] {name}: r1 linf={:.3e} r2 linf={:.3e} r1 global_l2={:.3e} r2 global_l2={:.3e}",
                s.r1.linf_masked, s.r2.linf_masked, s.r1.global_l2, s.r2.global_l2
            );
        }
    }
}
