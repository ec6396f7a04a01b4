//! Turns a scenario into a closed [`System`]: store layout, contract
//! natives, ghost cells and one program per user.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::scenario::{Role, ScenarioConfig, COMP_CDAI, COMP_CUSDC, CURVE_DEPOSIT, CURVE_SWAP, TOKENS};
use super::HarnessError;
use crate::compound::{exchange_rate, CTokenPool, MarketNames, MarketParams, RateGhosts, RateModel};
use crate::curve::{DepositZap, SwapParams, SwapPool};
use crate::kernel::{
    Alternative, Assign, AssignOp, CellId, Expr, LValue, ModelError, ProcessTable, ProcessTerm, Program, Schema,
    SchemaBuilder, Step, System, TxResult, REVERT_EVENT,
};
use crate::ledger::{Slot, Token, TokenNames};

pub const SUPPLIED_TOKENS: &str = "suppliedTokens";
pub const MINTED_CTOKENS: &str = "mintedCTokens";
pub const MINTED_CCRV: &str = "mintedCCrvTokens";
pub const DEPOSITOR_PROFIT: &str = "depositorProfit";
pub const COMPOUND_SUPPLIED: &str = "compoundSupplied";
pub const DEPOSITOR_LOSS: &str = "depositorLoss";
pub const PREV_RATE: &str = "prevExchangeRate";
pub const NEW_RATE: &str = "newExchangeRate";

/// Per-mille loss recorded when a withdrawal cannot go through at all.
pub const TOTAL_LOSS: i64 = 1000;

#[derive(Debug, Clone, Copy)]
pub struct Ghosts {
    pub supplied_tokens: CellId,
    pub minted_ctokens: CellId,
    pub minted_ccrv: CellId,
    pub depositor_profit: CellId,
    pub compound_supplied: CellId,
    pub depositor_loss: CellId,
    pub prev_rate: CellId,
    pub new_rate: CellId,
}

impl Ghosts {
    fn declare(b: &mut SchemaBuilder, rate: i64) {
        for g in [SUPPLIED_TOKENS, MINTED_CTOKENS, MINTED_CCRV, DEPOSITOR_PROFIT, COMPOUND_SUPPLIED, DEPOSITOR_LOSS] {
            b.cell(g, 0);
        }
        b.cell(PREV_RATE, rate).cell(NEW_RATE, rate);
    }

    fn bind(s: &Schema) -> Result<Self, ModelError> {
        Ok(Self {
            supplied_tokens: s.cell(SUPPLIED_TOKENS)?,
            minted_ctokens: s.cell(MINTED_CTOKENS)?,
            minted_ccrv: s.cell(MINTED_CCRV)?,
            depositor_profit: s.cell(DEPOSITOR_PROFIT)?,
            compound_supplied: s.cell(COMPOUND_SUPPLIED)?,
            depositor_loss: s.cell(DEPOSITOR_LOSS)?,
            prev_rate: s.cell(PREV_RATE)?,
            new_rate: s.cell(NEW_RATE)?,
        })
    }
}

/// Everything the natives act on.
#[derive(Debug)]
pub struct Contracts {
    pub tokens: BTreeMap<String, Token>,
    pub zap: DepositZap,
    pub ghosts: Ghosts,
}

impl Contracts {
    pub fn token(&self, name: &str) -> &Token {
        &self.tokens[name]
    }

    pub fn swap(&self) -> &SwapPool {
        &self.zap.swap
    }

    pub fn market(&self, ctoken: &str) -> &CTokenPool {
        self.zap
            .markets
            .iter()
            .find(|m| m.ctoken.name == ctoken)
            .expect("known market")
    }
}

pub struct Model {
    pub config: ScenarioConfig,
    pub system: System,
    pub contracts: Arc<Contracts>,
    pub slots: Vec<String>,
    /// Named constants usable in formulas: limits and slot indices.
    pub constants: BTreeMap<String, i64>,
    pub events: Vec<String>,
}

impl Model {
    pub fn schema(&self) -> &Arc<Schema> {
        &self.system.schema
    }

    pub fn slot(&self, name: &str) -> Option<Slot> {
        self.slots.iter().position(|s| s == name).map(|i| i as Slot)
    }
}

fn compound_style(token: &str) -> bool {
    token.starts_with('c') && token != "cCrv"
}

fn c(v: i64) -> Expr {
    Expr::Const(v)
}

fn call(name: &str, args: Vec<Expr>) -> ProcessTerm {
    ProcessTerm::call(name, args)
}

fn set(cell: CellId, value: Expr) -> Assign {
    Assign {
        target: LValue::Cell(cell),
        op: AssignOp::Set,
        value,
    }
}

fn atomic(body: ProcessTerm) -> ProcessTerm {
    ProcessTerm::atomic(body)
}

pub fn build_model(config: &ScenarioConfig) -> Result<Model, HarnessError> {
    config.validate()?;
    let p = &config.params;
    let slots = config.slots();
    let n = slots.len();
    let slot = |name: &str| slots.iter().position(|s| s == name).expect("contract slot") as Slot;

    let mut b = SchemaBuilder::new();
    let mut names = BTreeMap::new();
    for t in TOKENS {
        let tn = TokenNames::for_token(t, compound_style(t));
        Token::declare(&mut b, &tn, config.balance_vector(t));
        names.insert(t, tn);
    }
    for ct in ["cUSDC", "cDAI"] {
        MarketNames::for_ctoken(ct).declare(&mut b, n, p.scale);
    }
    SwapPool::declare(
        &mut b,
        [config.balance("cUSDC", CURVE_SWAP), config.balance("cDAI", CURVE_SWAP)],
    );
    let market_params = MarketParams {
        scale: p.scale,
        rate_model: RateModel {
            base_rate_per_block: p.base_rate,
            multiplier_per_block: p.multiplier,
        },
        reserve_factor: p.reserve_factor,
        initial_exchange_rate: p.initial_exchange_rate,
        literal_redeem_supply: p.literal_redeem,
    };
    let opening_rate = exchange_rate(
        config.balance("USDC", COMP_CUSDC),
        0,
        0,
        config.balance_vector("cUSDC").iter().sum(),
        &market_params,
    )?;
    Ghosts::declare(&mut b, opening_rate);
    let schema = b.build();

    let tokens: BTreeMap<String, Token> = TOKENS
        .iter()
        .map(|t| Ok((t.to_string(), Token::bind(&schema, t, &names[t])?)))
        .collect::<Result<_, ModelError>>()?;
    let ghosts = Ghosts::bind(&schema)?;
    let mut cusdc = CTokenPool::bind(
        &schema,
        tokens["USDC"].clone(),
        tokens["cUSDC"].clone(),
        slot(COMP_CUSDC),
        market_params,
    )?;
    cusdc.rate_ghosts = Some(RateGhosts {
        prev: ghosts.prev_rate,
        new: ghosts.new_rate,
    });
    let cdai = CTokenPool::bind(
        &schema,
        tokens["DAI"].clone(),
        tokens["cDAI"].clone(),
        slot(COMP_CDAI),
        market_params,
    )?;
    let swap = SwapPool::bind(
        &schema,
        [tokens["cUSDC"].clone(), tokens["cDAI"].clone()],
        tokens["cCrv"].clone(),
        slot(CURVE_SWAP),
        SwapParams {
            amp: p.amp,
            fee: p.swap_fee,
            scale: p.scale,
        },
    )?;
    let contracts = Arc::new(Contracts {
        tokens,
        zap: DepositZap {
            contract: slot(CURVE_DEPOSIT),
            markets: [cusdc, cdai],
            swap,
        },
        ghosts,
    });

    let procs = natives(&contracts);
    let programs = config
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| {
            if u.enabled {
                build_user_program(u.role, i as Slot, config, &contracts)
            } else {
                Program::new(u.name.clone(), Vec::new())
            }
        })
        .collect();
    let system = System::new(schema, procs, programs);

    let mut constants: BTreeMap<String, i64> = slots
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i as i64))
        .collect();
    constants.insert("ADMISSIBLE_LOSS".into(), p.admissible_loss);
    constants.insert("SCALE".into(), p.scale);

    Ok(Model {
        config: config.clone(),
        system,
        contracts,
        slots,
        constants,
        events: event_names(),
    })
}

fn event_names() -> Vec<String> {
    let mut out = Vec::new();
    for t in TOKENS {
        for e in ["transfer", "approve", "issue", "burn"] {
            out.push(format!("{e}.{t}"));
        }
    }
    for ct in ["cUSDC", "cDAI"] {
        for e in ["Mint", "mint", "redeem", "borrow", "repayBorrow", "AccrueInterest"] {
            out.push(format!("{e}.{ct}"));
        }
    }
    for e in ["AddLiquidity", "TokenExchange", "RemoveLiquidityOne", "IncreaseBlockNum", REVERT_EVENT] {
        out.push(e.to_string());
    }
    out
}

fn natives(k: &Arc<Contracts>) -> ProcessTable {
    let mut t = ProcessTable::new();
    for name in TOKENS {
        let tok = k.token(name).clone();
        let t1 = tok.clone();
        t.native(format!("{name}_approve"), 3, move |tx, a| t1.approve(tx, a[2], a[0], a[1]));
        let t2 = tok.clone();
        t.native(format!("{name}_transfer"), 3, move |tx, a| t2.transfer(tx, a[2], a[0], a[1]));
        t.native(format!("{name}_transferFrom"), 4, move |tx, a| {
            tok.transfer_from(tx, a[0], a[1], a[2], a[3])
        });
    }
    for ct in ["cUSDC", "cDAI"] {
        let m = || k.market(ct).clone();
        let m1 = m();
        t.native(format!("{ct}_mint"), 2, move |tx, a| m1.mint(tx, a[0], a[1]).map(drop));
        let m2 = m();
        t.native(format!("{ct}_redeem"), 2, move |tx, a| m2.redeem(tx, a[0], a[1]).map(drop));
        let m3 = m();
        t.native(format!("{ct}_borrow"), 2, move |tx, a| m3.borrow(tx, a[0], a[1]));
        let m4 = m();
        t.native(format!("{ct}_repayBorrow"), 1, move |tx, a| m4.repay_borrow(tx, a[0]).map(drop));
        let m5 = m();
        t.native(format!("{ct}_accrueInterest"), 0, move |tx, _| m5.accrue_interest(tx));
    }
    let swap = k.swap().clone();
    let s1 = swap.clone();
    t.native("Curve_exchange", 5, move |tx, a| {
        s1.exchange(tx, a[0], a[1], a[2], a[3], a[4]).map(drop)
    });
    let s2 = swap.clone();
    t.native("Curve_add_liquidity", 4, move |tx, a| {
        s2.add_liquidity(tx, [a[0], a[1]], a[2], a[3]).map(drop)
    });
    t.native("Curve_remove_liquidity_one_coin", 4, move |tx, a| {
        swap.remove_liquidity_one_coin(tx, a[0], a[1], a[2], a[3]).map(drop)
    });
    let z = k.zap.clone();
    t.native("curveDeposit_add_liquidity", 4, move |tx, a| {
        z.add_liquidity(tx, [a[0], a[1]], a[2], a[3]).map(drop)
    });
    let z = k.zap.clone();
    t.native("curveDeposit_remove_liquidity_one_coin", 3, move |tx, a| {
        z.remove_liquidity_one_coin(tx, a[0], a[1], a[2], true).map(drop)
    });

    // instrumented role steps
    let kc = k.clone();
    t.native("CurveDepositor_deposit", 3, move |tx, a| -> TxResult<()> {
        let (user, amount, min_mint) = (a[0], a[1], a[2]);
        let dep = kc.zap.add_liquidity(tx, [amount, 0], min_mint, user)?;
        tx.store.set(kc.ghosts.minted_ctokens, dep.c_amounts[0]);
        tx.store.set(kc.ghosts.minted_ccrv, dep.minted);
        Ok(())
    });
    let kc = k.clone();
    t.native("CurveDepositor_withdraw", 1, move |tx, a| -> TxResult<()> {
        let g = kc.ghosts;
        let lp = tx.store.get(g.minted_ccrv);
        let out = kc.zap.remove_liquidity_one_coin(tx, lp, 0, a[0], true)?;
        let supplied = tx.store.get(g.supplied_tokens);
        tx.store.set(g.depositor_loss, loss_per_mille(supplied, out));
        Ok(())
    });
    let kc = k.clone();
    t.native("CompoundDepositor_redeem", 1, move |tx, a| -> TxResult<()> {
        let m = kc.market("cUSDC");
        let tokens = m.ctoken.balance_of(&tx.store, a[0])?;
        let out = m.redeem(tx, a[0], tokens)?;
        let supplied = tx.store.get(kc.ghosts.compound_supplied);
        tx.store.set(kc.ghosts.depositor_profit, out - supplied);
        Ok(())
    });
    t
}

/// `max(0, deposit - withdrawn) * 1000 / deposit`.
pub fn loss_per_mille(deposit: i64, withdrawn: i64) -> i64 {
    if deposit <= 0 {
        return 0;
    }
    (deposit - withdrawn).max(0) * 1000 / deposit
}

fn step(alts: Vec<Alternative>) -> Step {
    Step { alternatives: alts }
}

/// The finite program of one user. Every step is atomic; menu entries
/// become alternatives of a step.
pub fn build_user_program(role: Role, user: Slot, config: &ScenarioConfig, k: &Contracts) -> Program {
    let slots = config.slots();
    let name = slots[user as usize].clone();
    let at = |s: &str| c(slots.iter().position(|x| x == s).expect("contract slot") as i64);
    let me = c(user);
    let g = k.ghosts;
    let label = |what: String| format!("{name}: {what}");
    let menus = &config.menus;
    let steps = match role {
        Role::CurveDepositor => vec![
            step(
                menus
                    .curve_deposit
                    .iter()
                    .map(|&a| {
                        Alternative::new(
                            label(format!("USDC_approve({CURVE_DEPOSIT}, {a})")),
                            atomic(ProcessTerm::tau(
                                vec![set(g.supplied_tokens, c(a))],
                                call(
                                    "USDC_approve",
                                    vec![at(CURVE_DEPOSIT), Expr::Cell(g.supplied_tokens), me.clone()],
                                ),
                            )),
                        )
                    })
                    .collect(),
            ),
            step(
                menus
                    .min_mint
                    .iter()
                    .map(|&m| {
                        Alternative::new(
                            label(format!("{CURVE_DEPOSIT}.add_liquidity(min_mint {m})")),
                            atomic(call(
                                "CurveDepositor_deposit",
                                vec![me.clone(), Expr::Cell(g.supplied_tokens), c(m)],
                            )),
                        )
                    })
                    .collect(),
            ),
            Step::single(Alternative::new(
                label(format!("cCrv_approve({CURVE_DEPOSIT})")),
                atomic(call(
                    "cCrv_approve",
                    vec![at(CURVE_DEPOSIT), Expr::Cell(g.minted_ccrv), me.clone()],
                )),
            )),
            Step::single(
                Alternative::new(
                    label(format!("{CURVE_DEPOSIT}.remove_liquidity_one_coin")),
                    atomic(call("CurveDepositor_withdraw", vec![me.clone()])),
                )
                .with_reverting(ProcessTerm::tau(
                    vec![set(g.depositor_loss, c(TOTAL_LOSS))],
                    ProcessTerm::Skip,
                )),
            ),
        ],
        Role::CurveExchanger => (0..menus.exchange_steps)
            .map(|_| {
                step(
                    menus
                        .exchange
                        .iter()
                        .map(|&a| {
                            let (i, j, coin) = if a >= 0 { (0, 1, "cUSDC") } else { (1, 0, "cDAI") };
                            let dx = a.abs();
                            if dx == 0 {
                                return Alternative::new(label("idle".into()), ProcessTerm::Skip);
                            }
                            let other = if i == 0 { "cDAI" } else { "cUSDC" };
                            Alternative::new(
                                label(format!("exchange {dx} {coin} for {other}")),
                                atomic(ProcessTerm::seq([
                                    call(&format!("{coin}_approve"), vec![at(CURVE_SWAP), c(dx), me.clone()]),
                                    call("Curve_exchange", vec![c(i), c(j), c(dx), c(0), me.clone()]),
                                ])),
                            )
                        })
                        .collect(),
                )
            })
            .collect(),
        Role::CompoundDepositor => vec![
            step(
                menus
                    .compound_deposit
                    .iter()
                    .map(|&a| {
                        Alternative::new(
                            label(format!("USDC_approve({COMP_CUSDC}, {a})")),
                            atomic(ProcessTerm::tau(
                                vec![set(g.compound_supplied, c(a))],
                                call(
                                    "USDC_approve",
                                    vec![at(COMP_CUSDC), Expr::Cell(g.compound_supplied), me.clone()],
                                ),
                            )),
                        )
                    })
                    .collect(),
            ),
            Step::single(Alternative::new(
                label("cUSDC_mint".into()),
                atomic(call("cUSDC_mint", vec![me.clone(), Expr::Cell(g.compound_supplied)])),
            )),
            Step::single(
                Alternative::new(
                    label("cUSDC_redeem(all)".into()),
                    atomic(call("CompoundDepositor_redeem", vec![me.clone()])),
                )
                .with_reverting(ProcessTerm::tau(
                    vec![set(g.depositor_profit, Expr::Neg(Box::new(Expr::Cell(g.compound_supplied))))],
                    ProcessTerm::Skip,
                )),
            ),
        ],
        Role::CompoundBorrower => {
            let cash = Expr::elem(k.token("USDC").balances, at(COMP_CUSDC));
            vec![
                Step::single(Alternative::new(
                    label("cUSDC_borrow(all cash)".into()),
                    atomic(call("cUSDC_borrow", vec![me.clone(), cash])),
                )),
                Step::single(Alternative::new(
                    label("cUSDC_repayBorrow".into()),
                    atomic(call("cUSDC_repayBorrow", vec![me.clone()])),
                )),
            ]
        }
        Role::BlockProducer => (0..config.params.max_blocks)
            .map(|_| {
                Step::single(Alternative::new(
                    label("IncreaseBlockNum".into()),
                    atomic(ProcessTerm::event(
                        "IncreaseBlockNum",
                        vec![],
                        vec![Assign {
                            target: LValue::Block,
                            op: AssignOp::Add,
                            value: c(1),
                        }],
                        ProcessTerm::Skip,
                    )),
                ))
            })
            .collect(),
    };
    Program::new(name, steps)
}
