//! Named instances with known answers, random generators, and the expected
//! maximum of i.i.d. Poisson variables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_cap, Error, Result};
use crate::model::{Instance, SetFunction, SubsetMask};
use crate::robust::{Decision, DecisionSpace};

pub const MAX_UFL_CLIENTS: usize = 12;
pub const MAX_UFL_FACILITIES: usize = 8;
pub const MAX_RANDOM_COVERAGE_N: usize = 10;

/// Premium over the calibrated bound in the first-stage price of the set-cover
/// extension.
pub const SET_COVER_EPSILON: f64 = 0.1;

/// Two-stage capacity purchase on `n` sinks, one decision per first-stage
/// capacity `x = 0..=n`, every sink active with probability 1/2.
pub fn example1_minflow(n: usize) -> Result<DecisionSpace> {
    if !(2..=12).contains(&n) {
        return Err(Error::TooLarge { what: "min-flow example (2 <= n)", n, cap: 12 });
    }
    let decisions = (0..=n)
        .map(|x| Decision { label: format!("x={x}"), function: SetFunction::TwoStageFlow { n, x }, supermodular: true })
        .collect();
    DecisionSpace::new(decisions, vec![0.5; n])
}

/// `K^2` elements split into `K` blocks of `K`; `c(S) = max_k |S ∩ A_k|`,
/// every marginal `1/K`.
pub fn example2_setcover(k: usize) -> Result<Instance> {
    check_setcover_k(k)?;
    let f = SetFunction::coverage_max(k * k, setcover_blocks(k))?;
    Instance::uniform(f, 1.0 / k as f64)
}

fn check_setcover_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("set-cover example needs K >= 1"));
    }
    ensure_cap("set-cover example (K)", k, 4)
}

fn setcover_blocks(k: usize) -> Vec<Vec<usize>> {
    (0..k).map(|b| (b * k..(b + 1) * k).collect()).collect()
}

/// First-stage price of one covering set: `(1 + eps) * bound / K`, where the
/// bound is the expected maximum of `K` i.i.d. Poisson(1) variables.
pub fn setcover_first_stage_price(k: usize) -> Result<f64> {
    check_setcover_k(k)?;
    Ok((1.0 + SET_COVER_EPSILON) * poisson_max_expectation(k as u64)?.expectation / k as f64)
}

/// Two-stage extension: decision `j` buys `j` disjoint covering sets up
/// front, which covers the first `j` elements of every block.
pub fn example2_two_stage(k: usize) -> Result<DecisionSpace> {
    let price = setcover_first_stage_price(k)?;
    let blocks = setcover_blocks(k);
    let decisions = (0..=k)
        .map(|j| Decision {
            label: format!("buy {j}"),
            function: SetFunction::CoverageMax {
                n: k * k,
                partition: blocks.clone(),
                covered: blocks.iter().flat_map(|b| b[..j].iter().copied()).collect(),
                fixed_cost: price * j as f64,
            },
            supermodular: false,
        })
        .collect();
    DecisionSpace::new(decisions, vec![1.0 / k as f64; k * k])
}

/// `f(S) = 1` for nonempty `S`, every marginal `1/n`.
pub fn example3_tightness(n: usize) -> Result<Instance> {
    if n == 0 {
        return Err(Error::invalid("threshold example needs n >= 1"));
    }
    ensure_cap("threshold example", n, crate::model::MAX_EXACT_N)?;
    let f = SetFunction::from_fn(n, |s| (!s.is_empty()) as u8 as f64)?;
    Instance::uniform(f, 1.0 / n as f64)
}

/// Six goods in two groups of three with value 2 for a single good, 3 for one
/// good from each group, and 4 once a group contributes two goods.
pub fn integrality_gap_function() -> SetFunction {
    let a = SubsetMask::from_elements([0, 1, 2]);
    let b = SubsetMask::from_elements([3, 4, 5]);
    SetFunction::from_fn(6, |s| {
        let (x, y) = (s.intersection(a).len(), s.intersection(b).len());
        match (x, y) {
            (0, 0) => 0.0,
            _ if x >= 2 || y >= 2 => 4.0,
            (1, 1) => 3.0,
            _ => 2.0,
        }
    })
    .expect("six elements fit the table cap")
}

/// `E[max of K i.i.d. Binomial(trials, p)] = sum_{t >= 0} (1 - F(t)^K)`.
pub fn expected_max_of_binomials(count: usize, trials: usize, p: f64) -> f64 {
    let mut pmf = vec![0.0; trials + 1];
    for (t, slot) in pmf.iter_mut().enumerate() {
        *slot = binomial(trials, t) * p.powi(t as i32) * (1.0 - p).powi((trials - t) as i32);
    }
    let mut cdf = 0.0;
    let mut total = 0.0;
    for &mass in &pmf[..trials] {
        cdf += mass;
        total += 1.0 - cdf.powi(count as i32);
    }
    total
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonMax {
    pub m: u64,
    /// `E[max of M i.i.d. Poisson(1)]`.
    pub expectation: f64,
    /// `ln M / ln ln M`, defined for `M >= 3`.
    pub growth: Option<f64>,
    pub ratio: Option<f64>,
}

const POISSON_TAIL_CUTOFF: f64 = 1e-15;
const POISSON_TERMS: usize = 180;

/// `E[Z] = sum_{k >= 0} (1 - F(k)^M)` for `Z` the maximum of `M` i.i.d.
/// Poisson(1) variables, stopping at the first term below `1e-15`.
///
/// `F(k)^M` is evaluated as `exp(M ln(1 - G(k)))` with the upper tail `G(k)`
/// summed directly, so neither large `M` nor `F(k)` close to one loses
/// precision.
pub fn poisson_max_expectation(m: u64) -> Result<PoissonMax> {
    if m == 0 || m > 1_000_000_000 {
        return Err(Error::invalid(format!("M must lie in 1..=1e9, got {m}")));
    }
    let mut pmf = vec![0.0f64; POISSON_TERMS];
    pmf[0] = (-1.0f64).exp();
    for j in 1..POISSON_TERMS {
        pmf[j] = pmf[j - 1] / j as f64;
    }
    // tail[k] = P(Z_1 > k)
    let mut tail = vec![0.0f64; POISSON_TERMS];
    for k in (0..POISSON_TERMS - 1).rev() {
        tail[k] = tail[k + 1] + pmf[k + 1];
    }
    let mf = m as f64;
    let mut expectation = 0.0;
    for &g in &tail {
        let term = -(mf * (-g).ln_1p()).exp_m1();
        if term < POISSON_TAIL_CUTOFF {
            break;
        }
        expectation += term;
    }
    let growth = (m >= 3).then(|| mf.ln() / mf.ln().ln());
    Ok(PoissonMax { m, expectation, growth, ratio: growth.map(|g| expectation / g) })
}

/// Random weighted coverage function: `n` elements over `m <= 2n` items, each
/// element covering each item with probability 0.35, weights in `[0.1, 2)`.
/// Monotone and submodular with `f(∅) = 0`.
pub fn random_coverage_submodular(seed: u64, n: usize) -> Result<SetFunction> {
    if n == 0 {
        return Err(Error::invalid("coverage generator needs n >= 1"));
    }
    ensure_cap("random coverage", n, MAX_RANDOM_COVERAGE_N)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.gen_range(1..=2 * n);
    let weights: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..2.0)).collect();
    let covers = (0..n).map(|_| (0..m).filter(|_| rng.gen_bool(0.35)).collect()).collect();
    Ok(SetFunction::WeightedCoverage { covers, weights })
}

/// `f(S) = g(|S|) + sum_{i in S} w_i + c` with `g` convex (nondecreasing
/// increments in `[0, 1)` steps), `w_i` in `[-1, 1)` and `c` in `[0, 1)`.
/// Supermodular by construction.
pub fn random_supermodular(seed: u64, n: usize) -> Result<SetFunction> {
    ensure_cap("random supermodular", n, crate::model::MAX_EXACT_N)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = vec![0.0f64; n + 1];
    let mut step = 0.0;
    for m in 1..=n {
        step += rng.gen::<f64>();
        g[m] = g[m - 1] + step;
    }
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let c: f64 = rng.gen();
    SetFunction::from_fn(n, |s| g[s.len()] + s.elements().map(|i| w[i]).sum::<f64>() + c)
}

/// `f(S) = max_{T ⊆ S} r(T)` for i.i.d. uniform `r`; monotone, otherwise
/// unstructured.
pub fn random_monotone(seed: u64, n: usize) -> Result<SetFunction> {
    ensure_cap("random monotone", n, crate::model::MAX_EXACT_N)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<f64> = (0..1usize << n).map(|_| rng.gen()).collect();
    for s in 1..values.len() {
        for i in SubsetMask(s as u32).elements() {
            values[s] = values[s].max(values[s & !(1 << i)]);
        }
    }
    SetFunction::explicit(n, values)
}

/// Independent uniform marginals in `[0.05, 0.95)`.
pub fn random_marginals(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0.05..0.95)).collect()
}

/// Random two-stage facility location. Clients and facilities are uniform
/// points in the unit square with Euclidean distances; facility `j` costs
/// `w2_j` in `[0.5, 1.5)` on demand and `w1_j = r_j * w2_j`, `r_j` in
/// `[0.3, 0.7)`, up front. Decisions are the facility subsets bought up front,
/// in mask order, truncated to `max_decisions` if given. Client marginals are
/// uniform in `[0.05, 0.95)`.
pub fn random_ufl_instance(
    seed: u64,
    clients: usize,
    facilities: usize,
    max_decisions: Option<usize>,
) -> Result<DecisionSpace> {
    ensure_cap("facility-location clients", clients, MAX_UFL_CLIENTS)?;
    ensure_cap("facility-location facilities", facilities, MAX_UFL_FACILITIES)?;
    if clients == 0 || facilities == 0 {
        return Err(Error::invalid("facility location needs at least one client and one facility"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut point = || (rng.gen::<f64>(), rng.gen::<f64>());
    let client_pts: Vec<(f64, f64)> = (0..clients).map(|_| point()).collect();
    let facility_pts: Vec<(f64, f64)> = (0..facilities).map(|_| point()).collect();
    let distances: Vec<Vec<f64>> = client_pts
        .iter()
        .map(|c| facility_pts.iter().map(|f| ((c.0 - f.0).powi(2) + (c.1 - f.1).powi(2)).sqrt()).collect())
        .collect();
    let second: Vec<f64> = (0..facilities).map(|_| rng.gen_range(0.5..1.5)).collect();
    let first: Vec<f64> = second.iter().map(|w| w * rng.gen_range(0.3..0.7)).collect();
    let marginals: Vec<f64> = (0..clients).map(|_| rng.gen_range(0.05..0.95)).collect();

    let limit = max_decisions.unwrap_or(usize::MAX);
    let decisions = (0..1u32 << facilities)
        .take(limit)
        .map(|bits| {
            let x = SubsetMask(bits);
            Decision {
                label: format!("open {x:?}"),
                function: SetFunction::FacilityLocation {
                    open_costs: second.clone(),
                    distances: distances.clone(),
                    pre_open: x.elements().collect(),
                    fixed_cost: x.elements().map(|j| first[j]).sum(),
                },
                supermodular: false,
            }
        })
        .collect();
    DecisionSpace::new(decisions, marginals)
}

/// A quantity that [`crate::verify`] knows how to recompute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantity {
    WorstCase,
    Independent,
    Kappa,
    /// Worst-case objective of decision `x`.
    RobustValue { x: usize },
    /// Independent objective of decision `x`.
    IndependentValue { x: usize },
    KappaAt { x: usize },
    RobustChoice,
    IndependentChoice,
    RobustRatio,
    WelfareOpt { k: usize },
    WelfareUpperBound { k: usize },
    /// 1 when the property holds, 0 otherwise.
    Monotone,
    Submodular,
    Supermodular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedFact {
    pub quantity: Quantity,
    pub expected: f64,
    pub tol: f64,
    /// How the expected value was obtained.
    pub basis: String,
}

fn fact(quantity: Quantity, expected: f64, tol: f64, basis: &str) -> ExpectedFact {
    ExpectedFact { quantity, expected, tol, basis: basis.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "data", rename_all = "snake_case")]
pub enum Payload {
    Instance(Instance),
    Space(DecisionSpace),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedInstance {
    pub name: String,
    pub description: String,
    pub payload: Payload,
    pub facts: Vec<ExpectedFact>,
}

/// Built-in names, a one-line description, and the parameters each accepts.
pub const BUILTINS: &[(&str, &str)] = &[
    ("example1", "two-stage capacity purchase with exponential gap; --n (default 4)"),
    ("example2", "block-maximum cover cost, n = K^2, p = 1/K; --k (default 4)"),
    ("example2_two_stage", "first-stage purchase of covering sets for example2; --k (default 3)"),
    ("example3", "threshold function, p = 1/n; --n (default 3)"),
    ("integrality_gap", "six goods, three identical submodular players"),
    ("ufl", "random two-stage facility location; --n clients (default 5), --k facilities (default 3), --seed (default 1)"),
    ("coverage", "random weighted coverage at random marginals; --n (default 6), --seed (default 1)"),
];

#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinParams {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
}

pub fn builtin(name: &str, params: BuiltinParams) -> Result<NamedInstance> {
    let named = |description: String, payload: Payload, facts: Vec<ExpectedFact>| NamedInstance {
        name: name.to_string(),
        description,
        payload,
        facts,
    };
    match name {
        "example1" => {
            let n = params.n.unwrap_or(4);
            let space = example1_minflow(n)?;
            let g_xi = (1u64 << (n - 1)) as f64 + (n - 1) as f64;
            let g_xr = (n + 2) as f64;
            let facts = vec![
                fact(Quantity::IndependentValue { x: n - 1 }, n as f64, 1e-9, "expected cost n at x = n-1"),
                fact(Quantity::RobustValue { x: n - 1 }, g_xi, 1e-6, "2^(n-1) + n - 1"),
                fact(Quantity::RobustValue { x: n }, g_xr, 1e-6, "first-stage cost n + 2, constant in S"),
                fact(Quantity::IndependentChoice, (n - 1) as f64, 0.0, "x_I = n - 1"),
                fact(Quantity::RobustChoice, n as f64, 0.0, "x_R = n"),
                fact(Quantity::RobustRatio, g_xi / g_xr, 1e-6, "(2^(n-1) + n - 1) / (n + 2)"),
            ];
            Ok(named(format!("capacity purchase, n = {n}"), Payload::Space(space), facts))
        }
        "example2" => {
            let k = params.k.unwrap_or(4);
            let inst = example2_setcover(k)?;
            let indep = expected_max_of_binomials(k, k, 1.0 / k as f64);
            let mut facts = vec![
                fact(Quantity::WorstCase, k as f64, 1e-6, "one block per scenario"),
                fact(Quantity::Independent, indep, 1e-9, "max of K i.i.d. Binomial(K, 1/K)"),
                fact(Quantity::Kappa, k as f64 / indep, 1e-6, "ratio of the two"),
            ];
            if k >= 2 {
                facts.push(fact(Quantity::Submodular, 0.0, 0.0, "adding a second element of a block can gain more"));
            }
            Ok(named(format!("block-maximum cover, K = {k}"), Payload::Instance(inst), facts))
        }
        "example2_two_stage" => {
            let k = params.k.unwrap_or(3);
            let space = example2_two_stage(k)?;
            let price = setcover_first_stage_price(k)?;
            let facts = vec![
                fact(Quantity::RobustValue { x: 0 }, k as f64, 1e-6, "no purchase: one block per scenario"),
                fact(Quantity::RobustValue { x: k }, price * k as f64, 1e-9, "full purchase: first-stage cost only"),
                fact(Quantity::RobustChoice, k as f64, 0.0, "buying everything is robust-optimal"),
            ];
            Ok(named(format!("two-stage block cover, K = {k}"), Payload::Space(space), facts))
        }
        "example3" => {
            let n = params.n.unwrap_or(3);
            let inst = example3_tightness(n)?;
            let indep = 1.0 - (1.0 - 1.0 / n as f64).powi(n as i32);
            let facts = vec![
                fact(Quantity::WorstCase, 1.0, 1e-9, "singletons with mass 1/n"),
                fact(Quantity::Independent, indep, 1e-9, "1 - (1 - 1/n)^n"),
                fact(Quantity::Kappa, 1.0 / indep, 1e-9, "ratio of the two"),
                fact(Quantity::Monotone, 1.0, 0.0, "threshold"),
                fact(Quantity::Submodular, 1.0, 0.0, "threshold"),
            ];
            Ok(named(format!("threshold, n = {n}"), Payload::Instance(inst), facts))
        }
        "integrality_gap" => {
            let inst = Instance::uniform(integrality_gap_function(), 1.0 / 3.0)?;
            let facts = vec![
                fact(Quantity::WelfareOpt { k: 3 }, 11.0, 1e-9, "best integral allocation"),
                fact(Quantity::WelfareUpperBound { k: 3 }, 12.0, 1e-9, "half mass on each within-group pair"),
                fact(Quantity::Monotone, 1.0, 0.0, "case analysis"),
                fact(Quantity::Submodular, 1.0, 0.0, "case analysis"),
            ];
            Ok(named("six goods, three players".into(), Payload::Instance(inst), facts))
        }
        "ufl" => {
            let clients = params.n.unwrap_or(5);
            let facilities = params.k.unwrap_or(3);
            let seed = params.seed.unwrap_or(1);
            let space = random_ufl_instance(seed, clients, facilities, None)?;
            let all = space.decisions.len() - 1;
            let facts = vec![fact(Quantity::KappaAt { x: all }, 1.0, 1e-9, "all facilities open: modular cost")];
            Ok(named(
                format!("facility location, {clients} clients, {facilities} facilities, seed {seed}"),
                Payload::Space(space),
                facts,
            ))
        }
        "coverage" => {
            let n = params.n.unwrap_or(6);
            let seed = params.seed.unwrap_or(1);
            let f = random_coverage_submodular(seed, n)?;
            let marginals = random_marginals(seed ^ 0x9e37_79b9_7f4a_7c15, n);
            let inst = Instance::new(f, marginals)?;
            let facts = vec![
                fact(Quantity::Monotone, 1.0, 0.0, "coverage"),
                fact(Quantity::Submodular, 1.0, 0.0, "coverage"),
            ];
            Ok(named(format!("weighted coverage, n = {n}, seed {seed}"), Payload::Instance(inst), facts))
        }
        other => Err(Error::invalid(format!("unknown built-in instance {other:?}"))),
    }
}
