use mfa_core::cgra::config::{default_patterns, peak_gflops, MacroOpPattern};
use mfa_core::cgra::dag::{Op, Routine};
use mfa_core::cgra::fuse::macro_counts;
use mfa_core::cgra::schedule::{routine_segments, schedule_overlap};
use mfa_core::cgra::workload::{kf_step_flops, mfa_flops};
use mfa_core::cgra::{
    fuse, gemm_workload, kf_workload, lower, mfa_workload, schedule, simulate_grid, simulate_pe,
    GridConfig, GridJob, InstrDag, Mode, PeConfig, SimConfig, Workload,
};

fn scalar_arith(d: &InstrDag) -> usize {
    d.count(|o| matches!(o, Op::Mul(..) | Op::Add(..) | Op::Sub(..)))
}

#[test]
fn peak_rates() {
    assert_eq!(peak_gflops(&PeConfig::base()), 1.4);
    assert_eq!(peak_gflops(&PeConfig::rdp()), 4.9);
}

#[test]
fn gemm_2x2_lowers_to_8_muls_and_4_adds() {
    let low = lower(&gemm_workload(2, 1).unwrap(), &PeConfig::base()).unwrap();
    let muls = low.dag.count(|o| matches!(o, Op::Mul(..)));
    let adds = low.dag.count(|o| matches!(o, Op::Add(..) | Op::Sub(..)));
    assert_eq!((muls, adds), (8, 4));
    assert_eq!(low.dag.flops(), 12);
}

#[test]
fn gemm_4x4_dot4_absorbs_most_scalar_nodes() {
    let low = lower(&gemm_workload(4, 2).unwrap(), &PeConfig::rdp()).unwrap();
    let dot4 = [MacroOpPattern::new("dot4", 1, 4, 0)];
    let fused = fuse(&low.dag, &dot4);
    let before = scalar_arith(&low.dag);
    let absorbed = before - scalar_arith(&fused);
    // 16 inner products of length 4: 4 muls and 3 adds each.
    assert_eq!(before, 16 * 7);
    assert!(absorbed * 4 >= before * 3, "{absorbed}/{before}");
    assert_eq!(macro_counts(&fused, &dot4)["dot4"], 16);
    assert_eq!(fused.flops(), low.dag.flops());
}

/// Six chained adds in call 0 and eight independent adds in call 1.
fn chain_and_fillers() -> InstrDag {
    let mut d = InstrDag::default();
    let x = d.push(Op::Input(1.0), Routine::Geqrf, 0);
    let mut acc = x;
    for _ in 0..6 {
        acc = d.push(Op::Add(acc, x), Routine::Geqrf, 0);
    }
    let y = d.push(Op::Input(2.0), Routine::Gemm, 1);
    for _ in 0..8 {
        d.push(Op::Add(y, y), Routine::Gemm, 1);
    }
    d
}

#[test]
fn overlap_micro_dag_saves_exactly_eight_cycles() {
    let d = chain_and_fillers();
    let cfg = PeConfig::base();
    let serial = schedule(&d, &cfg).unwrap();
    // Chain: issues at 0, 3, ..., 15 and completes at 18 with 10 empty
    // slots; the fillers follow at 16..23 and the last completes at 26.
    assert_eq!(serial.cycles, 26);
    let merged = schedule_overlap(&d, &cfg, 2).unwrap();
    assert_eq!(merged.cycles, 18);
    assert_eq!(serial.cycles - merged.cycles, 8);
    assert_eq!(merged.filled_stalls, 8);
    assert_eq!(d.evaluate(), d.evaluate());
}

#[test]
fn single_cycle_fillers_fill_every_slot() {
    let cfg = PeConfig {
        add_latency: 1,
        ..PeConfig::base()
    };
    let mut d = InstrDag::default();
    let x = d.push(Op::Input(1.5), Routine::Geqrf, 0);
    let mut acc = x;
    for _ in 0..5 {
        acc = d.push(Op::Mul(acc, x), Routine::Geqrf, 0);
    }
    let primary = schedule(&d, &cfg).unwrap();
    let s = primary.stall_cycles;
    assert_eq!((primary.cycles, s), (20, 12));
    let y = d.push(Op::Input(0.5), Routine::Getrf, 1);
    for _ in 0..s {
        d.push(Op::Add(y, y), Routine::Getrf, 1);
    }
    let merged = schedule_overlap(&d, &cfg, 2).unwrap();
    assert_eq!(merged.cycles, primary.cycles);
    assert_eq!(merged.filled_stalls, s);
}

#[test]
fn empty_secondary_changes_nothing() {
    let mut d = InstrDag::default();
    let x = d.push(Op::Input(1.0), Routine::Gemm, 0);
    let a = d.push(Op::Mul(x, x), Routine::Gemm, 0);
    d.push(Op::Add(a, x), Routine::Gemm, 0);
    assert_eq!(routine_segments(&d).len(), 1);
    let cfg = PeConfig::base();
    let (s, o) = (
        schedule(&d, &cfg).unwrap(),
        schedule_overlap(&d, &cfg, 4).unwrap(),
    );
    assert_eq!((s.cycles, s.stall_cycles), (o.cycles, o.stall_cycles));
    assert_eq!(o.filled_stalls, 0);
}

#[test]
fn kf_step_flops_match_the_closed_form() {
    // predict 4n³ + 2n², update 337 for n = 4, m = 2.
    assert_eq!(kf_step_flops(4, 2), 625);
    let w = kf_workload(4, 7).unwrap();
    for mode in Mode::ALL {
        let r = simulate_pe(&w, &SimConfig::default(), mode).unwrap();
        assert_eq!(r.flops, 625, "{mode}");
    }
    let r = simulate_pe(
        &mfa_workload(5, 3, 2, 1).unwrap(),
        &SimConfig::default(),
        Mode::Hw,
    )
    .unwrap();
    assert_eq!(r.flops, mfa_flops(5, 3, 2, false));
}

#[test]
fn mfa_modes_are_ordered() {
    let cfg = SimConfig::default();
    for n in [8, 16, 32] {
        let w = mfa_workload(n, n, n, 11).unwrap();
        let [base, hw, sw] = Mode::ALL.map(|m| simulate_pe(&w, &cfg, m).unwrap());
        assert!(base.cycles >= hw.cycles && hw.cycles >= sw.cycles, "n={n}");
        assert!(sw.stall_cycles <= hw.stall_cycles, "n={n}");
        assert!(hw.utilization > base.utilization, "n={n}");
        assert!(base.flops == hw.flops && hw.flops == sw.flops);
        for r in [&base, &hw, &sw] {
            assert!(r.utilization > 0.0 && r.utilization <= 1.0);
        }
    }
}

#[test]
fn more_tiles_never_cost_more_cycles() {
    let cfg = SimConfig::default();
    let grids = [
        GridConfig::config1(),
        GridConfig::config2(),
        GridConfig::config3(),
    ];
    let jobs = [
        GridJob::Mfa {
            n: 32,
            k: 32,
            p: 32,
            seed: 3,
        },
        GridJob::Gemm { n: 32, seed: 3 },
        GridJob::Batch(
            (0..12)
                .map(|s| kf_workload(8, s).unwrap())
                .collect::<Vec<Workload>>(),
        ),
    ];
    for job in &jobs {
        let r: Vec<_> = grids
            .iter()
            .map(|g| simulate_grid(job, g, &cfg, Mode::Sw).unwrap())
            .collect();
        assert!(
            r[0].cycles >= r[1].cycles && r[1].cycles >= r[2].cycles,
            "{}",
            job.name()
        );
        assert!(r
            .iter()
            .all(|x| x.utilization > 0.0 && x.utilization <= 1.0));
    }
}

#[test]
fn reports_are_deterministic() {
    let cfg = SimConfig::default();
    let w = kf_workload(8, 4).unwrap();
    for mode in Mode::ALL {
        assert_eq!(
            simulate_pe(&w, &cfg, mode).unwrap(),
            simulate_pe(&w, &cfg, mode).unwrap()
        );
    }
    let job = GridJob::Mfa {
        n: 16,
        k: 8,
        p: 8,
        seed: 1,
    };
    let g = GridConfig::config2();
    assert_eq!(
        simulate_grid(&job, &g, &cfg, Mode::Hw).unwrap(),
        simulate_grid(&job, &g, &cfg, Mode::Hw).unwrap()
    );
}

#[test]
fn empty_and_default_patterns_fit_the_rdp() {
    let rdp = PeConfig::rdp();
    assert!(default_patterns().iter().all(|p| p.fits(&rdp)));
    let w = Workload::empty();
    let r = simulate_pe(&w, &SimConfig::default(), Mode::Sw).unwrap();
    assert_eq!((r.cycles, r.flops), (0, 0));
    assert_eq!(r.utilization, 0.0);
}
