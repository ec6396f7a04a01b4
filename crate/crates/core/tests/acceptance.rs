//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::cell::Cell;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestError, TestRunner};
use rand::{rngs::StdRng, seq::SliceRandom, Rng, SeedableRng};

use defimc::checker::{self, replay, Direction, ExploreConfig, Status, Verdict};
use defimc::compound::{accrue, exchange_rate, Market, MarketParams, RateModel};
use defimc::curve::math::{ann, get_d, get_y};
use defimc::harness::model::{DEPOSITOR_LOSS, DEPOSITOR_PROFIT};
use defimc::harness::{build_model, default_scenario, load_scenario, Model, Role, ScenarioConfig};
use defimc::kernel::{
    run_atomic, Alternative, Assign, AssignOp, Expr, LValue, ProcessTable, ProcessTerm, Program, SchemaBuilder,
    Step, Store, System, TxResult, REVERT_EVENT,
};
use defimc::ledger::{Token, TokenNames};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn scenario_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/compound_curve.scn")
}

fn proptest_config(cases: u32) -> Config {
    Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    }
}

fn runner_outcome<T: std::fmt::Debug>(r: Result<(), TestError<T>>, ok: String) -> Outcome {
    match r {
        Ok(()) => Ok(ok),
        Err(TestError::Fail(why, case)) => Err(format!("{why} on {case:?}")),
        Err(TestError::Abort(why)) => Err(format!("aborted: {why}")),
    }
}

// 1. Verdicts on the shipped scenario

const EXPECTED: [(&str, &str); 5] = [
    ("balance_invariants", "Valid"),
    ("proportional_exchange", "Valid"),
    ("exchange_rate_monotone", "Valid"),
    ("nonnegative_profit", "Invalid"),
    ("bounded_loss", "Invalid"),
];

fn verdicts(model: &Model) -> Result<Vec<Verdict>, String> {
    let props = model.properties().map_err(|e| e.to_string())?;
    checker::explore(&model.system, &props, &ExploreConfig::default()).map_err(|e| e.to_string())
}

fn criterion_1(model: &Model, vs: &[Verdict], total: Duration) -> Outcome {
    let shipped = load_scenario(&scenario_path()).map_err(|e| e.to_string())?;
    ensure(shipped == default_scenario(), || "shipped scenario differs from the built-in one".into())?;
    for (name, want) in EXPECTED {
        let v = vs
            .iter()
            .find(|v| v.property == name)
            .ok_or_else(|| format!("{name} not checked"))?;
        ensure(v.status.name() == want, || format!("{name}: {} (want {want})", v.status.name()))?;
        if let Some(t) = v.trace() {
            replay(&model.system, t).map_err(|e| format!("{name}: {e}"))?;
            let prop = model.property(name).map_err(|e| e.to_string())?;
            let bad = checker::violates(&model.system, &prop.spec, t).map_err(|e| e.to_string())?;
            ensure(bad, || format!("{name}: witness does not violate"))?;
            ensure(v.stats.wall_time < Duration::from_secs(5), || {
                format!("{name}: violation took {:?}", v.stats.wall_time)
            })?;
        }
    }
    ensure(total <= Duration::from_secs(300), || format!("full run took {total:?}"))?;
    let detail: Vec<String> = vs
        .iter()
        .map(|v| format!("{}={} ({} states)", v.property, v.status.name(), v.stats.states_visited))
        .collect();
    Ok(format!("{}; total {:.1}s", detail.join(", "), total.as_secs_f64()))
}

// 2. Witness structure

fn criterion_2(model: &Model, vs: &[Verdict]) -> Outcome {
    let cfg = &model.config;
    let trace_of = |name: &str| {
        vs.iter()
            .find(|v| v.property == name)
            .and_then(Verdict::trace)
            .ok_or_else(|| format!("{name} has no witness"))
    };
    let borrower = cfg.user_with(Role::CompoundBorrower).ok_or("no borrower")?;
    let cdep = cfg.user_with(Role::CompoundDepositor).ok_or("no compound depositor")?;
    let t4 = trace_of("nonnegative_profit")?;
    let borrow = t4
        .labels
        .iter()
        .position(|l| l.user == borrower && l.events.iter().any(|e| e.name == "borrow.cUSDC"))
        .ok_or("row 4: no borrow step")?;
    // the borrow must drain the pool's cash
    let (_, after) = checker::replay_actions(&model.system, &t4.actions()[..=borrow]).map_err(|e| e.to_string())?;
    let cash = model
        .contracts
        .market("cUSDC")
        .cash(&after.store)
        .map_err(|e| e.to_string())?;
    ensure(cash == 0, || format!("row 4: pool keeps {cash} cash after the borrow"))?;
    let failed = t4
        .labels
        .iter()
        .position(|l| l.user == cdep && l.reverted)
        .ok_or("row 4: no failed redeem")?;
    ensure(borrow < failed, || "row 4: redeem fails before the borrow".into())?;

    let exch = cfg.user_with(Role::CurveExchanger).ok_or("no exchanger")?;
    let dep = cfg.user_with(Role::CurveDepositor).ok_or("no curve depositor")?;
    let t5 = trace_of("bounded_loss")?;
    let add = t5
        .labels
        .iter()
        .position(|l| l.events.iter().any(|e| e.name == "AddLiquidity"))
        .ok_or("row 5: no AddLiquidity")?;
    let withdraw = t5
        .labels
        .iter()
        .rposition(|l| l.user == dep && (l.reverted || l.events.iter().any(|e| e.name == "RemoveLiquidityOne")))
        .ok_or("row 5: no withdrawal")?;
    let trade = t5.labels[add..withdraw]
        .iter()
        .any(|l| l.user == exch && l.events.iter().any(|e| e.name == "TokenExchange"));
    ensure(trade, || "row 5: no exchange between deposit and withdrawal".into())?;
    Ok(format!(
        "row 4: borrow at step {}, failed redeem at step {}; row 5: deposit at {}, withdrawal at {}",
        borrow + 1,
        failed + 1,
        add + 1,
        withdraw + 1
    ))
}

// 3. Token ledger invariants

#[derive(Debug, Clone)]
enum LedgerOp {
    Approve(usize, i64, i64, i64),
    Transfer(usize, i64, i64, i64),
    TransferFrom(usize, i64, i64, i64, i64),
    Mint(usize, i64, i64),
    Burn(usize, i64, i64),
}

fn ledger_op() -> impl Strategy<Value = LedgerOp> {
    let who = 0i64..4;
    let tok = 0usize..2;
    let v = -3i64..400;
    prop_oneof![
        (tok.clone(), who.clone(), who.clone(), v.clone()).prop_map(|(t, a, b, v)| LedgerOp::Approve(t, a, b, v)),
        (tok.clone(), who.clone(), who.clone(), v.clone()).prop_map(|(t, a, b, v)| LedgerOp::Transfer(t, a, b, v)),
        (tok.clone(), who.clone(), who.clone(), v.clone(), who.clone())
            .prop_map(|(t, a, b, v, s)| LedgerOp::TransferFrom(t, a, b, v, s)),
        (tok.clone(), who.clone(), v.clone()).prop_map(|(t, a, v)| LedgerOp::Mint(t, a, v)),
        (tok, who, v).prop_map(|(t, a, v)| LedgerOp::Burn(t, a, v)),
    ]
}

fn ledger_store() -> (Store, [Token; 2]) {
    let mut b = SchemaBuilder::new();
    let names = [TokenNames::for_token("USDC", false), TokenNames::for_token("cUSDC", true)];
    Token::declare(&mut b, &names[0], vec![500, 100, 0, 0]);
    Token::declare(&mut b, &names[1], vec![0, 0, 300, 50]);
    let schema = b.build();
    let tokens = [
        Token::bind(&schema, "USDC", &names[0]).unwrap(),
        Token::bind(&schema, "cUSDC", &names[1]).unwrap(),
    ];
    (Store::new(schema), tokens)
}

fn criterion_3() -> Outcome {
    let (initial, tokens) = ledger_store();
    let tokens = Arc::new(tokens);
    let mut runner = TestRunner::new(proptest_config(10_000));
    let (reverted, committed) = (Cell::new(0u64), Cell::new(0u64));
    let r = runner.run(&prop::collection::vec(ledger_op(), 1..25), |ops| {
        let mut store = initial.clone();
        for op in ops {
            let t = tokens.clone();
            let mut table = ProcessTable::new();
            table.native("op", 0, move |tx, _| -> TxResult<()> {
                match op {
                    LedgerOp::Approve(k, o, s, v) => t[k].approve(tx, o, s, v),
                    LedgerOp::Transfer(k, f, to, v) => t[k].transfer(tx, f, to, v),
                    LedgerOp::TransferFrom(k, f, to, v, s) => t[k].transfer_from(tx, f, to, v, s),
                    LedgerOp::Mint(k, to, v) => t[k].mint(tx, to, v),
                    LedgerOp::Burn(k, f, v) => t[k].burn(tx, f, v),
                }
            });
            let out = run_atomic(&table, store, &ProcessTerm::call("op", vec![])).unwrap();
            if out.is_reverted() {
                reverted.set(reverted.get() + 1);
            } else {
                committed.set(committed.get() + 1);
            }
            store = out.store().clone();
            for t in tokens.iter() {
                prop_assert!(t.supply_matches_balances(&store).unwrap(), "{}: supply drifted", t.name);
                prop_assert!(t.non_negative(&store), "{}: negative entry", t.name);
            }
        }
        Ok(())
    });
    runner_outcome(
        r,
        format!("10000 sequences, {} committed and {} reverted operations, no violations", committed.get(), reverted.get()),
    )
}

// 4. StableSwap math against bisection

fn oracle_d(x: i64, y: i64, amp: i64) -> i64 {
    let (bx, by, ann) = (BigInt::from(x), BigInt::from(y), BigInt::from(ann(amp)));
    let g = |d: i64| -> BigInt {
        let d = BigInt::from(d);
        &d * &d * &d + BigInt::from(4) * &bx * &by * ((&ann - 1) * &d - &ann * (&bx + &by))
    };
    bisect(0, 2 * (x + y) + 2, |d| !g(d).is_positive())
}

fn oracle_y(x: i64, d: i64, amp: i64) -> i64 {
    let (bx, bd, ann) = (BigInt::from(x), BigInt::from(d), BigInt::from(ann(amp)));
    let h = |y: i64| -> BigInt {
        let y = BigInt::from(y);
        BigInt::from(4) * &bx * &ann * &y * &y + BigInt::from(4) * &bx * &y * (&ann * &bx + &bd - &ann * &bd)
            - &bd * &bd * &bd
    };
    bisect(0, 2 * d + 2, |y| !h(y).is_positive())
}

/// Largest `v` in `[lo, hi)` with `ok(v)`, for a monotone predicate true at `lo`.
fn bisect(mut lo: i64, mut hi: i64, ok: impl Fn(i64) -> bool) -> i64 {
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            lo = mid
        } else {
            hi = mid
        }
    }
    lo
}

fn criterion_4() -> Outcome {
    let mut runner = TestRunner::new(proptest_config(1000));
    let r = runner.run(
        &(1i64..1_000_000_000, 1i64..1_000_000_000, 0i64..1_000_000_000, 1i64..2000),
        |(x, y, dx, amp)| {
            let d = get_d([x, y], amp).unwrap();
            let od = oracle_d(x, y, amp);
            prop_assert!((d - od).abs() <= 1, "D={d} oracle={od}");
            let got = get_y(0, 1, x + dx, [x, y], amp).unwrap();
            let oy = oracle_y(x + dx, d, amp);
            prop_assert!((got - oy).abs() <= 1, "y={got} oracle={oy}");
            Ok(())
        },
    );
    let summary = runner_outcome(r, "1000 (balances, A) instances within 1 unit".into())?;

    // fee-free trades keep D, on pools where neither side is below a tenth of D
    let mut runner = TestRunner::new(Config {
        max_global_rejects: 100_000,
        ..proptest_config(1000)
    });
    let worst = Cell::new(0);
    let r = runner.run(
        &(1000i64..1_000_000_000, 8i64..=64, 0i64..=1000, 1i64..2000),
        |(x, eighths, frac, amp)| {
            let y = x * eighths / 8;
            let d0 = get_d([x, y], amp).unwrap();
            prop_assume!(x.min(y) >= d0 / 10);
            let dx = (x + y) * frac / 1000;
            let y_new = get_y(0, 1, x + dx, [x, y], amp).unwrap();
            prop_assume!(y_new >= d0 / 10);
            // the pool pays out `y - y_new - 1`
            let dy = (y - y_new - 1).max(0);
            let d1 = get_d([x + dx, y - dy], amp).unwrap();
            worst.set(worst.get().max((d1 - d0).abs()));
            prop_assert!((d1 - d0).abs() <= 2, "D0={d0} D1={d1}");
            Ok(())
        },
    );
    runner_outcome(r, format!("{summary}; fee-free trades move D by at most {}", worst.get()))
}

// 5. Interest accrual against exact rationals

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn floor(r: BigRational) -> i64 {
    r.floor().to_integer().to_i64().expect("fits")
}

struct OracleMarket {
    borrows: i64,
    reserves: i64,
    index: i64,
}

fn oracle_accrue(m: &Market, block: u64, p: &MarketParams) -> OracleMarket {
    let s = rat(p.scale);
    let (cash, borrows) = (rat(m.cash), rat(m.total_borrows));
    let util = if m.cash + m.total_borrows == 0 {
        0
    } else {
        floor(&borrows * &s / (&cash + &borrows))
    };
    let rate = p.rate_model.base_rate_per_block + floor(rat(p.rate_model.multiplier_per_block) * rat(util) / &s);
    let delta = rat((block - m.accrual_block) as i64);
    let interest = floor(rat(rate) * &delta * &borrows / &s);
    OracleMarket {
        borrows: m.total_borrows + interest,
        reserves: m.total_reserves + floor(rat(p.reserve_factor) * rat(interest) / &s),
        index: m.borrow_index + floor(rat(m.borrow_index) * rat(rate) * &delta / &s),
    }
}

fn oracle_rate(cash: i64, borrows: i64, reserves: i64, supply: i64, p: &MarketParams) -> i64 {
    if supply == 0 {
        return p.initial_exchange_rate;
    }
    floor((rat(cash) + rat(borrows) - rat(reserves)) * rat(p.scale) / rat(supply))
}

fn criterion_5() -> Outcome {
    let mut runner = TestRunner::new(proptest_config(2000));
    let grew = Cell::new(0u32);
    let strategy = (
        (0i64..200, 0i64..20_000, 0i64..=10_000),
        (0i64..10_000_000, 0i64..10_000_000, 0i64..1_000_000, 1i64..10_000_000),
        (10_000i64..100_000, 0u64..50, 0u64..200),
    );
    let r = runner.run(
        &strategy,
        |((base, mult, rf), (cash, borrows, reserves, supply), (index, start, delta))| {
            let p = MarketParams {
                scale: 10_000,
                rate_model: RateModel {
                    base_rate_per_block: base,
                    multiplier_per_block: mult,
                },
                reserve_factor: rf,
                initial_exchange_rate: 10_000,
                literal_redeem_supply: false,
            };
            let reserves = reserves.min(cash + borrows);
            let m = Market {
                cash,
                total_borrows: borrows,
                total_reserves: reserves,
                borrow_index: index,
                accrual_block: start,
            };
            let got = accrue(m, start + delta, &p).unwrap();
            let want = oracle_accrue(&m, start + delta, &p);
            prop_assert_eq!(got.total_borrows, want.borrows);
            prop_assert_eq!(got.total_reserves, want.reserves);
            prop_assert_eq!(got.borrow_index, want.index);
            prop_assert_eq!(got.accrual_block, start + delta);
            let before = exchange_rate(cash, borrows, reserves, supply, &p).unwrap();
            let after = exchange_rate(cash, got.total_borrows, got.total_reserves, supply, &p).unwrap();
            prop_assert_eq!(before, oracle_rate(cash, borrows, reserves, supply, &p));
            prop_assert_eq!(after, oracle_rate(cash, want.borrows, want.reserves, supply, &p));
            prop_assert!(after >= before, "rate fell from {} to {}", before, after);
            if after > before {
                grew.set(grew.get() + 1);
            }
            Ok(())
        },
    );
    runner_outcome(r, format!("2000 instances exact; rate grew in {}, never fell", grew.get()))
}

// 6. Rollback of reverted atomic steps

fn criterion_6() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    for case in 0..1000 {
        let mut b = SchemaBuilder::new();
        let cells = rng.gen_range(1..5);
        for c in 0..cells {
            b.cell(format!("c{c}"), rng.gen_range(-50..50));
        }
        let len = rng.gen_range(1..5);
        b.array("arr", (0..len).map(|_| rng.gen_range(0..100)).collect());
        b.matrix("mat", 2, (0..4).map(|_| rng.gen_range(0..100)).collect());
        let schema = b.build();
        let mut store = Store::new(schema.clone());
        store.set_block_number(rng.gen_range(0..10));
        let arr = schema.array("arr").unwrap();
        let mat = schema.matrix("mat").unwrap();

        let random_update = |rng: &mut StdRng| {
            let target = match rng.gen_range(0..4) {
                0 => LValue::Name(format!("c{}", rng.gen_range(0..cells))),
                1 => LValue::Elem(arr, Expr::Const(rng.gen_range(0..len as i64))),
                2 => LValue::MatrixElem(mat, Expr::Const(rng.gen_range(0..2)), Expr::Const(rng.gen_range(0..2))),
                _ => LValue::Block,
            };
            // blocks only move forward
            let op = if target == LValue::Block {
                AssignOp::Add
            } else {
                *[AssignOp::Set, AssignOp::Add, AssignOp::Sub].choose(rng).unwrap()
            };
            Assign {
                target,
                op,
                value: Expr::Const(rng.gen_range(0..1000)),
            }
        };
        let mut table = ProcessTable::new();
        table.native("scribble", 0, move |tx, _| -> TxResult<()> {
            tx.store.set_elem(arr, 0, 424_242)?;
            tx.emit("Scribbled", vec![1]);
            Ok(())
        });
        table.native("fail", 0, move |tx, _| -> TxResult<()> {
            tx.store.set_elem(arr, 0, -1)?;
            defimc::kernel::revert("forced")
        });
        let mut parts = Vec::new();
        for _ in 0..rng.gen_range(0..6) {
            parts.push(match rng.gen_range(0..3) {
                0 => ProcessTerm::tau(vec![random_update(&mut rng)], ProcessTerm::Skip),
                1 => ProcessTerm::event("Touched", vec![Expr::Const(case)], vec![random_update(&mut rng)], ProcessTerm::Skip),
                _ => ProcessTerm::call("scribble", vec![]),
            });
        }
        parts.push(if rng.gen_bool(0.5) {
            ProcessTerm::Revert
        } else {
            ProcessTerm::call("fail", vec![])
        });
        let body = ProcessTerm::seq(parts);

        let before = store.canonical_bytes();
        let out = run_atomic(&table, store.clone(), &body).map_err(|e| format!("case {case}: {e}"))?;
        ensure(out.is_reverted(), || format!("case {case}: body committed"))?;
        ensure(out.store().canonical_bytes() == before && *out.store() == store, || {
            format!("case {case}: store changed by a reverted step")
        })?;

        // the same body as a program step: only the REVERT event survives
        let sys = System::new(
            schema.clone(),
            table.clone(),
            vec![Program::new("u", vec![Step::single(Alternative::new("step", body))])],
        );
        let mut init = sys.initial_state();
        init.store = store.clone();
        let (label, next) = sys
            .apply_action(&init, defimc::kernel::Action { user: 0, alt: 0 })
            .map_err(|e| format!("case {case}: {e}"))?;
        ensure(label.reverted && label.events.len() == 1 && label.events[0].name == REVERT_EVENT, || {
            format!("case {case}: label {label:?}")
        })?;
        ensure(next.store.canonical_bytes() == before, || format!("case {case}: system step leaked writes"))?;
    }
    Ok("1000 forced reverts, stores bit-identical, only REVERT emitted".into())
}

// 7. Worker count and seed never change results

fn random_scenario(rng: &mut StdRng) -> ScenarioConfig {
    let mut cfg = default_scenario();
    let p = &mut cfg.params;
    p.amp = *[10, 85, 200].choose(rng).unwrap();
    p.swap_fee = rng.gen_range(0..10);
    p.multiplier = *[50, 100, 1000].choose(rng).unwrap();
    p.reserve_factor = *[0, 1000].choose(rng).unwrap();
    p.max_blocks = rng.gen_range(0..=2);
    let m = &mut cfg.menus;
    m.curve_deposit = vec![*[100, 200].choose(rng).unwrap()];
    if rng.gen_bool(0.3) {
        m.curve_deposit.push(50);
    }
    let trade = *[500, 1000, 1500].choose(rng).unwrap();
    m.exchange = vec![0, trade, -trade];
    m.exchange_steps = rng.gen_range(1..=2);
    m.compound_deposit = vec![*[100, 200].choose(rng).unwrap()];
    for role in [Role::CurveExchanger, Role::CompoundBorrower, Role::CompoundDepositor] {
        if rng.gen_bool(0.25) {
            cfg = cfg.without_role(role);
        }
    }
    let pool = rng.gen_range(500..2000);
    for coin in ["cUSDC", "cDAI"] {
        cfg.balances.get_mut(coin).unwrap().insert("curveSwap".into(), pool);
    }
    let usdc = cfg.balances.get_mut("USDC").unwrap();
    usdc.insert("compCUSDC".into(), 2500 + rng.gen_range(0..1000));
    usdc.insert("dave".into(), rng.gen_range(0..1000));
    cfg
}

fn criterion_7() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let mut checked = 0;
    for case in 0..20 {
        let cfg = random_scenario(&mut rng);
        let model = build_model(&cfg).map_err(|e| format!("scenario {case}: {e}"))?;
        let mut props = model.properties().map_err(|e| e.to_string())?;
        for (name, f) in [("max_loss", "max depositorLoss"), ("min_profit", "min depositorProfit")] {
            props.push(model.parse_property(name, f).map_err(|e| e.to_string())?);
        }
        let one = checker::explore(&model.system, &props, &ExploreConfig::default()).map_err(|e| e.to_string())?;
        let four = checker::explore(
            &model.system,
            &props,
            &ExploreConfig {
                workers: 4,
                seed: Some(rng.gen()),
                ..ExploreConfig::default()
            },
        )
        .map_err(|e| e.to_string())?;
        for (a, b) in one.iter().zip(&four) {
            let what = || format!("scenario {case}, {}", a.property);
            ensure(a.status.name() == b.status.name(), || format!("{}: status differs", what()))?;
            ensure(a.trace().map(|t| t.len()) == b.trace().map(|t| t.len()), || {
                format!("{}: witness lengths differ", what())
            })?;
            if let (Status::Extremum { value: x, .. }, Status::Extremum { value: y, .. }) = (&a.status, &b.status) {
                ensure(x == y, || format!("{}: {x} vs {y}", what()))?;
            }
            ensure(a.stats.states_visited == b.stats.states_visited, || format!("{}: state counts differ", what()))?;
            checked += 1;
        }
    }
    Ok(format!("20 scenarios, {checked} verdicts identical for 1 and 4 workers"))
}

// 8. Every witness replays through the CLI

fn criterion_8() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_defimc");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = Command::new(bin)
        .arg("verify")
        .arg(scenario_path())
        .arg("--all")
        .arg("--trace-dir")
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.code() == Some(1), || format!("verify exited {:?}", out.status.code()))?;
    let mut files: Vec<_> = std::fs::read_dir(dir.path())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    ensure(files.len() == 2, || format!("{} trace files written", files.len()))?;
    let mut replayed = Vec::new();
    for f in &files {
        let out = Command::new(bin)
            .args(["replay", "--format", "json"])
            .arg(f)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.code() == Some(1), || format!("{}: replay exited {:?}", f.display(), out.status.code()))?;
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
        let name = f.file_name().unwrap().to_string_lossy().replace(".trace.json", "");
        ensure(v["property"] == name.as_str() && v["reproduced"] == true, || format!("{name}: {v}"))?;
        replayed.push(name);
    }
    Ok(format!("replay exit 1 for {}", replayed.join(", ")))
}

// 9. Closed system has neither loss nor profit

fn criterion_9() -> Outcome {
    let mut cfg = default_scenario()
        .without_role(Role::CompoundBorrower)
        .without_role(Role::CurveExchanger);
    cfg.params.max_blocks = 0;
    let model = build_model(&cfg).map_err(|e| e.to_string())?;
    let schema = model.schema();
    let cell = |n: &str| schema.cell(n).map(Expr::Cell).map_err(|e| e.to_string());
    let mut found = Vec::new();
    for name in [DEPOSITOR_LOSS, DEPOSITOR_PROFIT] {
        let v = checker::reach_extremum(&model.system, cell(name)?, Direction::Max, &ExploreConfig::default())
            .map_err(|e| e.to_string())?;
        let Status::Extremum { value, .. } = v.status else {
            return Err(format!("max {name}: {}", v.status.name()));
        };
        ensure(value == 0, || format!("max {name} = {value}"))?;
        found.push(format!("max {name} = {value}"));
    }
    Ok(found.join(", "))
}

fn main() {
    let started = Instant::now();
    let model = build_model(&default_scenario()).expect("default scenario builds");
    let vs = verdicts(&model);
    let total = started.elapsed();
    let with_verdicts = |f: &dyn Fn(&[Verdict]) -> Outcome| match &vs {
        Ok(vs) => f(vs),
        Err(e) => Err(e.clone()),
    };
    let criteria: Vec<Criterion> = vec![
        ("verdicts on the default scenario", Box::new(|| with_verdicts(&|v| criterion_1(&model, v, total)))),
        ("counterexample structure", Box::new(|| with_verdicts(&|v| criterion_2(&model, v)))),
        ("token invariant suite", Box::new(criterion_3)),
        ("StableSwap oracle equivalence", Box::new(criterion_4)),
        ("lending oracle equivalence", Box::new(criterion_5)),
        ("atomic rollback", Box::new(criterion_6)),
        ("determinism across workers", Box::new(criterion_7)),
        ("replay closure", Box::new(criterion_8)),
        ("extremum sanity", Box::new(criterion_9)),
    ];
    let mut failed = 0;
    for (i, (title, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = std::panic::catch_unwind(std::panic::AssertUnwindSafe(run))
            .unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("criterion {}: PASS  {title} [{secs:.1}s]: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {title} [{secs:.1}s]: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
