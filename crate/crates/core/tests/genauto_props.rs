//! Precision maps under random, adversarial raise sequences.

mod common;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tvar::bitvec3::{TBit, TBitVec};
use tvar::genauto::{AbstractGA, Fault, Strategy};
use tvar::sysir::SystemIR;

fn all(width: u32) -> Vec<TBitVec> {
    let mut out = Vec::new();
    for unknown in 0..(1u64 << width) {
        for value in (0..(1u64 << width)).filter(|v| v & unknown == 0) {
            out.push(TBitVec::from_masks(width, value, unknown).unwrap());
        }
    }
    out
}

fn random_state(rng: &mut ChaCha8Rng, w: u32) -> TBitVec {
    let bits: Vec<TBit> = (0..w)
        .map(|_| [TBit::Zero, TBit::One, TBit::Unknown][rng.gen_range(0..3)])
        .collect();
    TBitVec::from_bits(&bits).unwrap()
}

/// Raises random bits at random keys, often at states covered by earlier
/// keys so that the closures matter.
fn random_raises(rng: &mut ChaCha8Rng, aga: &mut AbstractGA, count: usize) {
    let ir = aga.ir().clone();
    let (w, y) = (ir.state_width(), ir.input_width());
    let mut keys: Vec<TBitVec> = Vec::new();
    for _ in 0..count {
        let key = match keys.last() {
            Some(prev) if rng.gen_bool(0.5) => {
                let mut k = *prev;
                for b in 0..w {
                    if k.bit(b) == TBit::Unknown && rng.gen_bool(0.5) {
                        k = k.with_bit(b, TBit::from_bool(rng.gen())).unwrap();
                    }
                }
                k
            }
            _ => random_state(rng, w),
        };
        keys.push(key);
        if rng.gen_bool(0.5) {
            aga.pq_mut().raise(&key, rng.gen_range(0..y)).unwrap();
        } else {
            aga.pf_mut().raise(&key, rng.gen_range(0..w)).unwrap();
        }
    }
}

fn systems() -> Vec<SystemIR> {
    let mut rng = common::rng(5);
    (0..20).map(|_| common::random_system(&mut rng, 4, 3)).collect()
}

fn check_exactly_one(aga: &AbstractGA) {
    let (w, y) = (aga.ir().state_width(), aga.ir().input_width());
    for s in all(w) {
        let q = aga.qualified_inputs(&s);
        for i in 0..(1u64 << y) {
            let i = TBitVec::concrete(y, i).unwrap();
            let n = q.iter().filter(|c| c.covers(&i).unwrap()).count();
            assert_eq!(n, 1, "{s} {i} {q:?}");
        }
    }
}

fn check_step_sound_and_monotone(aga: &AbstractGA) -> Result<(), String> {
    let ir = aga.ir();
    let (w, y) = (ir.state_width(), ir.input_width());
    let inputs = all(y);
    for s in all(w) {
        for i in &inputs {
            let next = aga.abstract_step(&s, i);
            for sc in s.concretizations() {
                for ic in i.concretizations() {
                    if !next.gamma_contains(ir.concrete_next(sc, ic)).unwrap() {
                        return Err(format!("6d at {s} {i}"));
                    }
                }
            }
            for b in (0..w).filter(|&b| s.bit(b) != TBit::Unknown) {
                let coarse = s.with_bit(b, TBit::Unknown).unwrap();
                if !aga.abstract_step(&coarse, i).covers(&next).unwrap() {
                    return Err(format!("7b at {coarse} ⊒ {s}, {i}"));
                }
            }
            for b in (0..y).filter(|&b| i.bit(b) != TBit::Unknown) {
                let coarse = i.with_bit(b, TBit::Unknown).unwrap();
                if !aga.abstract_step(&s, &coarse).covers(&next).unwrap() {
                    return Err(format!("7b at {s}, {coarse} ⊒ {i}"));
                }
            }
        }
    }
    Ok(())
}

#[test]
fn qualified_inputs_partition() {
    let mut rng = common::rng(1);
    for ir in systems() {
        for strategy in Strategy::ALL {
            let mut aga = AbstractGA::new(ir.clone().into_shared(), strategy);
            check_exactly_one(&aga);
            random_raises(&mut rng, &mut aga, 6);
            check_exactly_one(&aga);
        }
    }
}

#[test]
fn step_sound_and_monotone_under_adversarial_maps() {
    let mut rng = common::rng(2);
    for ir in systems() {
        for strategy in Strategy::ALL {
            let mut aga = AbstractGA::new(ir.clone().into_shared(), strategy);
            check_step_sound_and_monotone(&aga).unwrap();
            for _ in 0..4 {
                random_raises(&mut rng, &mut aga, 3);
                check_step_sound_and_monotone(&aga).unwrap();
            }
        }
    }
}

#[test]
fn raising_only_sharpens() {
    let mut rng = common::rng(3);
    for ir in systems() {
        let (w, y) = (ir.state_width(), ir.input_width());
        let mut aga = AbstractGA::new(ir.into_shared(), Strategy::Decay);
        for _ in 0..8 {
            let before = aga.clone();
            random_raises(&mut rng, &mut aga, 1);
            aga.pq().check_extends(before.pq()).unwrap();
            aga.pf().check_extends(before.pf()).unwrap();
            for s in all(w) {
                for i in all(y) {
                    let old = before.abstract_step(&s, &i);
                    assert!(old.covers(&aga.abstract_step(&s, &i)).unwrap());
                }
                // every new qualified input lies inside an old one
                let old_q = before.qualified_inputs(&s);
                for q in aga.qualified_inputs(&s) {
                    assert!(old_q.iter().any(|o| o.covers(&q).unwrap()));
                }
            }
        }
    }
}

#[test]
fn dropping_the_closure_breaks_monotonicity() {
    let mut rng = common::rng(4);
    let mut caught = 0;
    for ir in systems() {
        let mut aga = AbstractGA::new(ir.into_shared(), Strategy::Decay);
        random_raises(&mut rng, &mut aga, 8);
        check_step_sound_and_monotone(&aga).unwrap();
        let faulty = aga.with_fault(Fault::DropDecayClosure);
        if check_step_sound_and_monotone(&faulty).is_err() {
            caught += 1;
        }
    }
    assert!(caught > 0);
}

#[test]
fn full_precision_is_exact_on_singletons() {
    for ir in systems() {
        let (w, y) = (ir.state_width(), ir.input_width());
        let aga = AbstractGA::new(ir.clone().into_shared(), Strategy::Naive);
        for s in 0..(1u64 << w) {
            let s = TBitVec::concrete(w, s).unwrap();
            assert!(aga.qualified_inputs(&s).iter().all(TBitVec::is_concrete));
            assert_eq!(aga.qualified_inputs(&s).len(), 1 << y);
            for i in aga.qualified_inputs(&s) {
                assert!(aga.abstract_step(&s, &i).is_concrete());
            }
            assert!(aga.labels(&s).iter().all(Option::is_some));
        }
    }
}
