//! Scenario files: a `scnver 1` header, then `[section]`s of `key = value`
//! lines. `#` starts a comment line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use super::HarnessError;

pub const VERSION: u32 = 1;

pub const TOKENS: [&str; 5] = ["USDC", "DAI", "cUSDC", "cDAI", "cCrv"];
pub const CURVE_DEPOSIT: &str = "curveDeposit";
pub const CURVE_SWAP: &str = "curveSwap";
pub const COMP_CUSDC: &str = "compCUSDC";
pub const COMP_CDAI: &str = "compCDAI";
/// Contract slots, placed after the users.
pub const CONTRACTS: [&str; 4] = [CURVE_DEPOSIT, CURVE_SWAP, COMP_CUSDC, COMP_CDAI];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    CurveDepositor,
    CurveExchanger,
    CompoundDepositor,
    CompoundBorrower,
    BlockProducer,
}

impl Role {
    pub const ALL: [Role; 5] = [
        Role::CurveDepositor,
        Role::CurveExchanger,
        Role::CompoundDepositor,
        Role::CompoundBorrower,
        Role::BlockProducer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Role::CurveDepositor => "CurveDepositor",
            Role::CurveExchanger => "CurveExchanger",
            Role::CompoundDepositor => "CompoundDepositor",
            Role::CompoundBorrower => "CompoundBorrower",
            Role::BlockProducer => "BlockProducer",
        }
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Role::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown role `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Params {
    pub scale: i64,
    pub amp: i64,
    pub swap_fee: i64,
    pub base_rate: i64,
    pub multiplier: i64,
    pub reserve_factor: i64,
    pub initial_exchange_rate: i64,
    pub max_blocks: u32,
    /// Per-mille of the deposit.
    pub admissible_loss: i64,
    pub state_budget: Option<usize>,
    pub literal_redeem: bool,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            scale: 10_000,
            amp: 85,
            swap_fee: 4,
            base_rate: 0,
            multiplier: 100,
            reserve_factor: 0,
            initial_exchange_rate: 10_000,
            max_blocks: 3,
            admissible_loss: 200,
            state_budget: None,
            literal_redeem: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Menus {
    pub curve_deposit: Vec<i64>,
    pub min_mint: Vec<i64>,
    /// Signed: positive sells cUSDC for cDAI, negative the other way.
    pub exchange: Vec<i64>,
    pub exchange_steps: u32,
    pub compound_deposit: Vec<i64>,
}

impl Default for Menus {
    fn default() -> Self {
        Self {
            curve_deposit: vec![200],
            min_mint: vec![0],
            exchange: vec![0, 1500, -1500],
            exchange_steps: 2,
            compound_deposit: vec![200],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct User {
    pub name: String,
    pub role: Role,
    /// A disabled user keeps its slot and holdings but never acts.
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioConfig {
    pub params: Params,
    pub users: Vec<User>,
    pub menus: Menus,
    /// Opening balances per token, by slot name. Missing slots hold 0.
    pub balances: BTreeMap<String, BTreeMap<String, i64>>,
    /// Stated total supplies; each must equal the sum of balances.
    pub supplies: BTreeMap<String, i64>,
    /// Named properties in the formula grammar, in file order.
    pub properties: Vec<(String, String)>,
}

impl ScenarioConfig {
    /// Slot names: users in order, then the contracts.
    pub fn slots(&self) -> Vec<String> {
        self.users
            .iter()
            .map(|u| u.name.clone())
            .chain(CONTRACTS.iter().map(|c| c.to_string()))
            .collect()
    }

    /// Slot of the enabled user playing `role`.
    pub fn user_with(&self, role: Role) -> Option<usize> {
        self.users.iter().position(|u| u.role == role && u.enabled)
    }

    pub fn balance(&self, token: &str, slot: &str) -> i64 {
        self.balances
            .get(token)
            .and_then(|b| b.get(slot))
            .copied()
            .unwrap_or(0)
    }

    pub fn balance_vector(&self, token: &str) -> Vec<i64> {
        self.slots().iter().map(|s| self.balance(token, s)).collect()
    }

    /// Disables every user playing `role`.
    pub fn without_role(mut self, role: Role) -> Self {
        for u in self.users.iter_mut().filter(|u| u.role == role) {
            u.enabled = false;
        }
        self
    }

    pub fn property(&self, name: &str) -> Option<&str> {
        self.properties
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, f)| f.as_str())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Scenario { line: 0, msg: m });
        let p = &self.params;
        if p.scale <= 0 || p.amp <= 0 || p.initial_exchange_rate <= 0 {
            return bad("scale, amp and initial_exchange_rate must be positive".into());
        }
        if [p.swap_fee, p.base_rate, p.multiplier, p.reserve_factor, p.admissible_loss]
            .iter()
            .any(|v| *v < 0)
        {
            return bad("rates, fees and admissible_loss must be non-negative".into());
        }
        let slots = self.slots();
        for (i, u) in self.users.iter().enumerate() {
            if CONTRACTS.contains(&u.name.as_str()) || slots[..i].contains(&u.name) {
                return bad(format!("duplicate slot name `{}`", u.name));
            }
            if !is_identifier(&u.name) {
                return bad(format!("`{}` is not a valid user name", u.name));
            }
            if u.enabled && self.users[..i].iter().any(|v| v.enabled && v.role == u.role) {
                return bad(format!("more than one {}", u.role.name()));
            }
        }
        let m = &self.menus;
        for (name, menu) in [
            ("curve_deposit", &m.curve_deposit),
            ("min_mint", &m.min_mint),
            ("exchange", &m.exchange),
            ("compound_deposit", &m.compound_deposit),
        ] {
            if menu.is_empty() {
                return bad(format!("menu `{name}` is empty"));
            }
            if name != "exchange" && menu.iter().any(|v| *v < 0) {
                return bad(format!("menu `{name}` has a negative amount"));
            }
        }
        for (token, bal) in &self.balances {
            if !TOKENS.contains(&token.as_str()) {
                return bad(format!("unknown token `{token}`"));
            }
            for (slot, v) in bal {
                if !slots.contains(slot) {
                    return bad(format!("unknown slot `{slot}` in {token} balances"));
                }
                if *v < 0 {
                    return bad(format!("negative {token} balance for `{slot}`"));
                }
            }
        }
        for (token, ts) in &self.supplies {
            let sum: i64 = self.balance_vector(token).iter().sum();
            if *ts != sum {
                return bad(format!("{token} supply {ts} differs from the sum of balances {sum}"));
            }
        }
        let mut seen = Vec::new();
        for (name, _) in &self.properties {
            if seen.contains(&name) {
                return bad(format!("duplicate property `{name}`"));
            }
            seen.push(name);
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        Parser::default().run(text)
    }

    /// Normal form: fixed section and key order, zero balances omitted.
    pub fn to_text(&self) -> String {
        let mut s = format!("scnver {VERSION}\n\n[params]\n");
        let p = &self.params;
        for (k, v) in [
            ("scale", p.scale),
            ("amp", p.amp),
            ("swap_fee", p.swap_fee),
            ("base_rate", p.base_rate),
            ("multiplier", p.multiplier),
            ("reserve_factor", p.reserve_factor),
            ("initial_exchange_rate", p.initial_exchange_rate),
            ("max_blocks", p.max_blocks as i64),
            ("admissible_loss", p.admissible_loss),
        ] {
            let _ = writeln!(s, "{k} = {v}");
        }
        if let Some(b) = p.state_budget {
            let _ = writeln!(s, "state_budget = {b}");
        }
        let _ = writeln!(s, "literal_redeem = {}", p.literal_redeem);
        s.push_str("\n[users]\n");
        for u in &self.users {
            let off = if u.enabled { "" } else { " disabled" };
            let _ = writeln!(s, "{} = {}{off}", u.name, u.role.name());
        }
        let m = &self.menus;
        let list = |v: &[i64]| v.iter().map(i64::to_string).collect::<Vec<_>>().join(" ");
        let _ = write!(
            s,
            "\n[menus]\ncurve_deposit = {}\nmin_mint = {}\nexchange = {}\nexchange_steps = {}\ncompound_deposit = {}\n",
            list(&m.curve_deposit),
            list(&m.min_mint),
            list(&m.exchange),
            m.exchange_steps,
            list(&m.compound_deposit)
        );
        s.push_str("\n[balances]\n");
        let slots = self.slots();
        for token in TOKENS {
            let entries: Vec<String> = slots
                .iter()
                .filter_map(|slot| match self.balance(token, slot) {
                    0 => None,
                    v => Some(format!("{slot}:{v}")),
                })
                .collect();
            if !entries.is_empty() {
                let _ = writeln!(s, "{token} = {}", entries.join(" "));
            }
        }
        if !self.supplies.is_empty() {
            s.push_str("\n[supplies]\n");
            for token in TOKENS {
                if let Some(v) = self.supplies.get(token) {
                    let _ = writeln!(s, "{token} = {v}");
                }
            }
        }
        if !self.properties.is_empty() {
            s.push_str("\n[properties]\n");
            for (n, f) in &self.properties {
                let _ = writeln!(s, "{n} = {f}");
            }
        }
        s
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Default)]
struct Parser {
    line: usize,
}

impl Parser {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, HarnessError> {
        Err(HarnessError::Scenario {
            line: self.line,
            msg: msg.into(),
        })
    }

    fn int<T: FromStr>(&self, key: &str, v: &str) -> Result<T, HarnessError> {
        v.parse().or_else(|_| self.err(format!("`{key}` expects an integer, got `{v}`")))
    }

    fn ints(&self, key: &str, v: &str) -> Result<Vec<i64>, HarnessError> {
        v.split_whitespace().map(|x| self.int(key, x)).collect()
    }

    fn run(mut self, text: &str) -> Result<ScenarioConfig, HarnessError> {
        let mut cfg = ScenarioConfig {
            params: Params::default(),
            users: Vec::new(),
            menus: Menus::default(),
            balances: BTreeMap::new(),
            supplies: BTreeMap::new(),
            properties: Vec::new(),
        };
        let mut section: Option<String> = None;
        let mut versioned = false;
        for (i, raw) in text.lines().enumerate() {
            self.line = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !versioned {
                match line.split_whitespace().collect::<Vec<_>>().as_slice() {
                    ["scnver", v] if *v == VERSION.to_string() => versioned = true,
                    ["scnver", v] => return self.err(format!("unsupported scenario version {v}")),
                    _ => return self.err(format!("expected `scnver {VERSION}` header")),
                }
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if !["params", "users", "menus", "balances", "supplies", "properties"].contains(&name) {
                    return self.err(format!("unknown section [{name}]"));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return self.err(format!("expected `key = value`, got `{line}`"));
            };
            let (key, value) = (key.trim(), value.trim());
            match section.as_deref() {
                None => return self.err("entry before any section"),
                Some("params") => self.param(&mut cfg.params, key, value)?,
                Some("users") => {
                    let (role, enabled) = match value.split_whitespace().collect::<Vec<_>>().as_slice() {
                        [role] => (*role, true),
                        [role, "disabled"] => (*role, false),
                        _ => return self.err(format!("expected `<Role>` or `<Role> disabled`, got `{value}`")),
                    };
                    cfg.users.push(User {
                        name: key.to_string(),
                        role: role.parse().or_else(|e: String| self.err(e))?,
                        enabled,
                    });
                }
                Some("menus") => self.menu(&mut cfg.menus, key, value)?,
                Some("balances") => {
                    let entry = cfg.balances.entry(key.to_string()).or_default();
                    for item in value.split_whitespace() {
                        let Some((slot, amount)) = item.split_once(':') else {
                            return self.err(format!("expected `slot:amount`, got `{item}`"));
                        };
                        let amount = self.int(key, amount)?;
                        if entry.insert(slot.to_string(), amount).is_some() {
                            return self.err(format!("`{slot}` listed twice for {key}"));
                        }
                    }
                }
                Some("supplies") => {
                    let v = self.int(key, value)?;
                    cfg.supplies.insert(key.to_string(), v);
                }
                Some(_) => cfg.properties.push((key.to_string(), value.to_string())),
            }
        }
        if !versioned {
            return self.err(format!("missing `scnver {VERSION}` header"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn param(&self, p: &mut Params, key: &str, v: &str) -> Result<(), HarnessError> {
        match key {
            "scale" => p.scale = self.int(key, v)?,
            "amp" => p.amp = self.int(key, v)?,
            "swap_fee" => p.swap_fee = self.int(key, v)?,
            "base_rate" => p.base_rate = self.int(key, v)?,
            "multiplier" => p.multiplier = self.int(key, v)?,
            "reserve_factor" => p.reserve_factor = self.int(key, v)?,
            "initial_exchange_rate" => p.initial_exchange_rate = self.int(key, v)?,
            "max_blocks" => p.max_blocks = self.int(key, v)?,
            "admissible_loss" => p.admissible_loss = self.int(key, v)?,
            "state_budget" => p.state_budget = Some(self.int(key, v)?),
            "literal_redeem" => {
                p.literal_redeem = v
                    .parse()
                    .or_else(|_| self.err(format!("`{key}` expects true or false")))?
            }
            _ => return self.err(format!("unknown parameter `{key}`")),
        }
        Ok(())
    }

    fn menu(&self, m: &mut Menus, key: &str, v: &str) -> Result<(), HarnessError> {
        match key {
            "curve_deposit" => m.curve_deposit = self.ints(key, v)?,
            "min_mint" => m.min_mint = self.ints(key, v)?,
            "exchange" => m.exchange = self.ints(key, v)?,
            "exchange_steps" => m.exchange_steps = self.int(key, v)?,
            "compound_deposit" => m.compound_deposit = self.ints(key, v)?,
            _ => return self.err(format!("unknown menu `{key}`")),
        }
        Ok(())
    }
}

/// The shipped desk-scale scenario.
pub fn default_scenario() -> ScenarioConfig {
    let users = [
        ("alice", Role::CurveDepositor),
        ("bob", Role::CurveExchanger),
        ("carol", Role::CompoundDepositor),
        ("dave", Role::CompoundBorrower),
        ("miner", Role::BlockProducer),
    ];
    let balances = [
        ("USDC", vec![("alice", 200), ("carol", 200), ("dave", 1000), (COMP_CUSDC, 2500)]),
        ("DAI", vec![(COMP_CDAI, 2500)]),
        ("cUSDC", vec![("bob", 1500), (CURVE_SWAP, 1000)]),
        ("cDAI", vec![("bob", 1500), (CURVE_SWAP, 1000)]),
        ("cCrv", vec![("bob", 2000)]),
    ];
    ScenarioConfig {
        params: Params::default(),
        users: users
            .iter()
            .map(|(n, r)| User {
                name: n.to_string(),
                role: *r,
                enabled: true,
            })
            .collect(),
        menus: Menus::default(),
        balances: balances
            .iter()
            .map(|(t, b)| (t.to_string(), b.iter().map(|(s, v)| (s.to_string(), *v)).collect()))
            .collect(),
        supplies: BTreeMap::new(),
        properties: TABLE_PROPERTIES
            .iter()
            .map(|(n, f)| (n.to_string(), f.to_string()))
            .collect(),
    }
}

pub const TABLE_PROPERTIES: [(&str, &str); 5] = [
    (
        "balance_invariants",
        "G (sum(cCrv_balances) == cCrv_totalSupply && sum(cDAI_accountTokens) == cDAI_totalSupply \
         && sum(cUSDC_accountTokens) == cUSDC_totalSupply && sum(USDC_balances) == USDC_totalSupply \
         && sum(DAI_balances) == DAI_totalSupply)",
    ),
    (
        "proportional_exchange",
        "G (suppliedTokens > 0 -> F (mintedCTokens > 0 && mintedCCrvTokens > 0))",
    ),
    ("exchange_rate_monotone", "G (prevExchangeRate <= newExchangeRate)"),
    ("nonnegative_profit", "G (Mint.cUSDC -> G (depositorProfit >= 0))"),
    ("bounded_loss", "G (AddLiquidity -> G (depositorLoss <= ADMISSIBLE_LOSS))"),
];
