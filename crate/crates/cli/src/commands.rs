//! Experiment configs and runners, one per subcommand.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use bondlimit::dissociation::{
    gamma_limit_lower_bound, gamma_value, h2_study, heteronuclear_study, minimize_geps_direct, optimal_allocation,
    staylocal_check, MassAllocation,
};
use bondlimit::functionals::{hydrogen_exact, kinetic, minimize_noninteracting, potential, EnergyParams, TrialFamily};
use bondlimit::gb::{gb_analytic, gb_solve_n2, gb_tabulate, gb_tabulate_cached, GbSearch, GbTable, TabulateOptions};
use bondlimit::measures::{total_mass, Measure};
use bondlimit::mmot::{
    check_bounds, comotion_cost_n2, default_cost_cap, mmot_entropic, mmot_exact, radial_line_surrogate, Method,
    MmotResult,
};
use bondlimit::optim::SearchConfig;
use bondlimit::partial::{
    copies_excess_constant, default_directions, envelope_mass, partial_transport, relaxed_envelope_upper,
    translated_copies,
};
use bondlimit::tolerances::{GB_NUM_TOL, TOL_MARGINAL};
use bondlimit::{DiscreteMeasure, NucleiConfig, Point3};

use crate::{Context, Failure, Outcome};

type Run = Result<Outcome, Failure>;

fn parse<T: DeserializeOwned + Default>(ctx: &Context) -> Result<T, Failure> {
    match &ctx.config {
        None => Ok(T::default()),
        Some(text) => parse_text(text),
    }
}

fn parse_required<T: DeserializeOwned>(ctx: &Context, what: &str) -> Result<T, Failure> {
    match &ctx.config {
        None => Err(Failure::Config(format!("this command needs --config with {what}"))),
        Some(text) => parse_text(text),
    }
}

fn parse_text<T: DeserializeOwned>(text: &str) -> Result<T, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Failure::Config(format!("at `{}`: {}", e.path(), e.inner())))
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

/// A number with the method that produced it and its tolerance.
fn tagged(value: f64, method: &str, tolerance: f64) -> Value {
    json!({ "value": value, "method": method, "tolerance": tolerance })
}

fn search(seed: u64, restarts: usize, max_iters: u64) -> SearchConfig {
    SearchConfig {
        restarts,
        max_iters,
        seed,
    }
}

fn default_alphas() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct HydrogenConfig {
    #[serde(rename = "Z")]
    z: f64,
    epsilon: f64,
    components: usize,
    restarts: usize,
    max_iters: u64,
}

impl Default for HydrogenConfig {
    fn default() -> Self {
        Self {
            z: 1.0,
            epsilon: 1.0,
            components: 1,
            restarts: 20,
            max_iters: 2000,
        }
    }
}

pub fn hydrogen(ctx: &Context) -> Run {
    let mut cfg: HydrogenConfig = parse(ctx)?;
    if let Some(z) = ctx.z {
        cfg.z = z;
    }
    if !(cfg.z > 0.0) {
        return Err(Failure::Config(format!("at `Z`: charge must be positive, got {}", cfg.z)));
    }
    let nuclei = NucleiConfig::single(cfg.z)?;
    let family = TrialFamily {
        components: cfg.components,
        search: search(ctx.seed, cfg.restarts, cfg.max_iters),
    };
    let fit = minimize_noninteracting(&nuclei, cfg.epsilon, &family)?;
    let (exact, density) = hydrogen_exact(cfg.z)?;
    let t = kinetic(&density)?;
    let u = potential(&Measure::Radial(density), &nuclei);
    let analytic = t - u;
    let tol = 1e-3;
    let csv = format!(
        "quantity,value,method,tolerance\nminimized,{},direct_search_hydrogenic,{tol}\nanalytic_density,{analytic},radial_grid_quadrature,{tol}\nexact,{exact},closed_form,0\n",
        fit.value
    );
    Ok(Outcome {
        config: to_value(&cfg),
        results: json!({
            "minimized": tagged(fit.value, "direct_search_hydrogenic", tol),
            "minimizer": {
                "exponents": fit.clusters[0].exponents,
                "weights": fit.clusters[0].weights,
                "stagnated": fit.stagnated,
            },
            "analytic_density": {
                "kinetic": t,
                "potential": u,
                "energy": tagged(analytic, "radial_grid_quadrature", tol),
            },
            "exact": tagged(exact, "closed_form", 0.0),
            "checks": {
                "minimized_within_tol": (fit.value - exact).abs() <= tol,
                "analytic_within_tol": (analytic - exact).abs() <= tol,
            },
        }),
        csv,
        log: vec![format!("minimized {} analytic {analytic} exact {exact}", fit.value)],
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MmotConfig {
    rho: Measure,
    #[serde(rename = "N", default = "two")]
    n: usize,
    #[serde(default)]
    method: Option<Method>,
    #[serde(default = "default_reg")]
    reg: f64,
    #[serde(default)]
    cost_cap: Option<f64>,
    #[serde(default = "default_lp_nodes")]
    lp_check_nodes: usize,
}

fn two() -> usize {
    2
}

fn default_reg() -> f64 {
    0.05
}

fn default_lp_nodes() -> usize {
    30
}

fn plan_csv(res: &MmotResult) -> String {
    let mut s = String::from("tuple,weight\n");
    for (t, w) in &res.plan.entries {
        let idx: Vec<String> = t.iter().map(|i| i.to_string()).collect();
        s.push_str(&format!("{},{w}\n", idx.join(";")));
    }
    s
}

pub fn mmot(ctx: &Context) -> Run {
    let cfg: MmotConfig = parse_required(ctx, "a measure under `rho`")?;
    let n = cfg.n;
    let (results, res) = match &cfg.rho {
        Measure::Discrete(rho) => {
            let method = cfg.method.unwrap_or(Method::ExactLp);
            match method {
                Method::ExactLp => {
                    let res = mmot_exact(rho, n)?;
                    let bounds = check_bounds(rho, n, res.cost)?;
                    let v = json!({
                        "cost": tagged(res.cost, "exact_lp", TOL_MARGINAL),
                        "plan": res.plan.entries,
                        "bounds": bounds,
                    });
                    (v, res)
                }
                Method::Entropic => {
                    let cap = cfg.cost_cap.unwrap_or_else(|| default_cost_cap(rho));
                    let res = mmot_entropic(rho, n, cfg.reg, cap)?;
                    let v = json!({
                        "cost": tagged(res.cost, "entropic", res.gap_estimate),
                        "regularization": cfg.reg,
                        "cost_cap": cap,
                        "gap_estimate": res.gap_estimate,
                        "plan": res.plan.entries,
                    });
                    (v, res)
                }
                Method::Comotion => {
                    return Err(Failure::Config("at `method`: comotion needs a radial measure".into()));
                }
            }
        }
        Measure::Radial(rho) => {
            if n != 2 || cfg.method.is_some_and(|m| m != Method::Comotion) {
                return Err(Failure::Config(
                    "at `method`: radial measures use comotion with N = 2".into(),
                ));
            }
            let res = comotion_cost_n2(rho)?;
            let lp = mmot_exact(&radial_line_surrogate(rho, cfg.lp_check_nodes)?, 2)?.cost;
            let v = json!({
                "cost": tagged(res.cost, "comotion", 0.0),
                "lp_check": {
                    "nodes": cfg.lp_check_nodes,
                    "cost": tagged(lp, "exact_lp_line_surrogate", TOL_MARGINAL),
                    "relative_difference": (lp - res.cost).abs() / res.cost,
                },
            });
            (v, res)
        }
    };
    Ok(Outcome {
        config: to_value(&cfg),
        csv: plan_csv(&res),
        log: vec![format!("mass {} cost {}", total_mass(&cfg.rho), res.cost)],
        results,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    rho: DiscreteMeasure,
    m: f64,
    #[serde(rename = "N", default = "two")]
    n: usize,
}

fn weight_at(mu: &DiscreteMeasure, p: &Point3) -> f64 {
    mu.points()
        .iter()
        .zip(mu.weights())
        .filter(|(q, _)| bondlimit::measures::dist(p, q) < bondlimit::tolerances::MERGE_DISTANCE)
        .map(|(_, w)| *w)
        .sum()
}

pub fn partial(ctx: &Context) -> Run {
    let cfg: PartialConfig = parse_required(ctx, "`rho` and `m`")?;
    let res = partial_transport(&cfg.rho, cfg.m, cfg.n)?;
    let mut csv = String::from("index,x,y,z,rho,mu\n");
    let mut mu = Vec::with_capacity(cfg.rho.len());
    for (i, (p, w)) in cfg.rho.points().iter().zip(cfg.rho.weights()).enumerate() {
        let wm = weight_at(&res.mu, p);
        mu.push(wm);
        csv.push_str(&format!("{i},{},{},{},{w},{wm}\n", p[0], p[1], p[2]));
    }
    Ok(Outcome {
        config: to_value(&cfg),
        results: json!({
            "cost": tagged(res.cost, "joint_lp", TOL_MARGINAL),
            "mu": mu,
            "plan": res.plan.entries,
        }),
        csv,
        log: vec![format!("C(rho, {}) = {}", cfg.m, res.cost)],
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeConfig {
    rho: DiscreteMeasure,
    #[serde(rename = "N", default = "two")]
    n: usize,
    #[serde(default = "default_copies")]
    copies: Vec<usize>,
    #[serde(default)]
    directions: Option<Vec<Point3>>,
}

fn default_copies() -> Vec<usize> {
    vec![10, 20, 40]
}

pub fn envelope(ctx: &Context) -> Run {
    let cfg: EnvelopeConfig = parse_required(ctx, "`rho`")?;
    let n = cfg.n;
    let mass = cfg.rho.total_mass();
    let m = envelope_mass(mass, n);
    let value = relaxed_envelope_upper(&cfg.rho, n)?;
    let kind = if n == 2 { "joint_lp_exact" } else { "joint_lp_upper_bound" };
    let mut rows = Vec::new();
    let mut csv = String::from("n,cost,excess,bound\n");
    let mut constant = None;
    if value.is_finite() {
        let pr = partial_transport(&cfg.rho, m, n)?;
        let dirs = cfg.directions.clone().unwrap_or_else(|| default_directions(&cfg.rho, n));
        if dirs.len() + 1 != n {
            return Err(Failure::Config(format!("at `directions`: need {} directions", n - 1)));
        }
        let k = copies_excess_constant(mass - m, &dirs);
        constant = Some(k);
        let mut prev: Option<f64> = None;
        for &c in &cfg.copies {
            let rn = translated_copies(&cfg.rho, &pr.mu, c, &dirs)?;
            let cost = mmot_exact(&rn, n)?.cost;
            let excess = cost - value;
            let bound = k / c as f64;
            rows.push(json!({
                "n": c,
                "cost": tagged(cost, "exact_lp", TOL_MARGINAL),
                "excess": excess,
                "bound": bound,
                "ratio_to_previous": prev.map(|p| excess / p),
            }));
            csv.push_str(&format!("{c},{cost},{excess},{bound}\n"));
            prev = Some(excess);
        }
    }
    Ok(Outcome {
        config: to_value(&cfg),
        results: json!({
            "mass": mass,
            "envelope_mass": m,
            "envelope": tagged(value, kind, TOL_MARGINAL),
            "copies_constant": constant,
            "copies": rows,
        }),
        csv,
        log: vec![format!("envelope {value} at sub-mass {m}")],
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GbConfig {
    #[serde(rename = "Z")]
    z: f64,
    b: f64,
    #[serde(rename = "N")]
    n: usize,
    alphas: Vec<f64>,
    components: usize,
    restarts: usize,
    max_iters: u64,
    ball_radii: Vec<f64>,
    lp_check_nodes: Option<usize>,
    cache_dir: Option<String>,
}

impl Default for GbConfig {
    fn default() -> Self {
        Self {
            z: 1.0,
            b: 0.5,
            n: 2,
            alphas: default_alphas(),
            components: 3,
            restarts: 20,
            max_iters: 2000,
            ball_radii: TabulateOptions::default().ball_radii,
            lp_check_nodes: Some(30),
            cache_dir: None,
        }
    }
}

fn table_options(seed: u64, components: usize, restarts: usize, max_iters: u64, ball_radii: &[f64]) -> TabulateOptions {
    TabulateOptions {
        search: GbSearch {
            components,
            search: search(seed, restarts, max_iters),
            ..GbSearch::default()
        },
        ball_radii: ball_radii.to_vec(),
    }
}

fn tabulate(cfg: &GbConfig, seed: u64) -> Result<GbTable, Failure> {
    let opts = table_options(seed, cfg.components, cfg.restarts, cfg.max_iters, &cfg.ball_radii);
    Ok(match &cfg.cache_dir {
        Some(dir) => gb_tabulate_cached(std::path::Path::new(dir), cfg.z, cfg.b, cfg.n, &cfg.alphas, &opts)?,
        None => gb_tabulate(cfg.z, cfg.b, cfg.n, &cfg.alphas, &opts)?,
    })
}

fn table_json(t: &GbTable) -> Value {
    let margins: Vec<Value> = t
        .alphas
        .iter()
        .zip(&t.values)
        .filter(|(a, _)| gb_analytic(t.z, **a, t.n).is_none())
        .map(|(a, v)| {
            let margin = v + t.z * t.z * a / 4.0;
            json!({ "alpha": a, "margin": margin, "exceeds_3x_tol": margin > 3.0 * GB_NUM_TOL })
        })
        .collect();
    let (arg, min) = t.argmin();
    json!({
        "table": t,
        "validated": true,
        "margins_above_lower_bound": margins,
        "argmin": { "alpha": arg, "value": min },
    })
}

pub fn gb_table(ctx: &Context) -> Run {
    let mut cfg: GbConfig = parse(ctx)?;
    if let Some(z) = ctx.z {
        cfg.z = z;
    }
    if let Some(b) = ctx.b {
        cfg.b = b;
    }
    let table = tabulate(&cfg, ctx.seed)?;
    let mut results = table_json(&table);
    if let (Some(nodes), 2) = (cfg.lp_check_nodes, cfg.n) {
        let last = *cfg.alphas.last().expect("nonempty grid");
        if last > 0.5 {
            let mut s = table_options(ctx.seed, cfg.components, cfg.restarts, cfg.max_iters, &cfg.ball_radii).search;
            s.lp_check_nodes = Some(nodes);
            let r = gb_solve_n2(cfg.z, cfg.b, last, &s)?;
            results["lp_check"] = json!({ "alpha": last, "check": r.lp_check });
        }
    }
    Ok(Outcome {
        config: to_value(&cfg),
        results,
        csv: table.to_csv(),
        log: vec![format!("tabulated {} entries", table.alphas.len())],
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DissociateConfig {
    nuclei: NucleiConfig,
    #[serde(default = "half")]
    b: f64,
    #[serde(rename = "N", default = "two")]
    n: usize,
    #[serde(default)]
    epsilons: Vec<f64>,
    #[serde(default = "default_alphas")]
    alpha_grid: Vec<f64>,
    #[serde(default = "three")]
    components: usize,
    #[serde(default = "twenty")]
    restarts: usize,
    #[serde(default = "iters")]
    max_iters: u64,
    #[serde(default)]
    cache_dir: Option<String>,
}

fn half() -> f64 {
    0.5
}

fn three() -> usize {
    3
}

fn twenty() -> usize {
    20
}

fn iters() -> u64 {
    2000
}

#[allow(clippy::too_many_arguments)]
fn tables_for(charges: &[f64], b: f64, n: usize, alphas: &[f64], cfg_seed: u64, components: usize, restarts: usize, max_iters: u64, cache: &Option<String>) -> Result<Vec<GbTable>, Failure> {
    let mut done: Vec<GbTable> = Vec::new();
    let mut out = Vec::with_capacity(charges.len());
    for &z in charges {
        if let Some(t) = done.iter().find(|t| t.z == z) {
            out.push(t.clone());
            continue;
        }
        let cfg = GbConfig {
            z,
            b,
            n,
            alphas: alphas.to_vec(),
            components,
            restarts,
            max_iters,
            cache_dir: cache.clone(),
            ..GbConfig::default()
        };
        let t = tabulate(&cfg, cfg_seed)?;
        done.push(t.clone());
        out.push(t);
    }
    Ok(out)
}

fn gamma_csv(tables: &[GbTable], alphas: &[f64], n: usize) -> Result<String, Failure> {
    let mut csv = String::from("alpha,gamma_value\n");
    for &a in alphas {
        let alloc = MassAllocation::new(vec![a, 1.0 - a], n)?;
        csv.push_str(&format!("{a},{}\n", gamma_value(&alloc, tables)?));
    }
    Ok(csv)
}

pub fn dissociate(ctx: &Context) -> Run {
    let mut cfg: DissociateConfig = parse_required(ctx, "`nuclei`")?;
    if let Some(b) = ctx.b {
        cfg.b = b;
    }
    let charges = cfg.nuclei.charges().to_vec();
    let tables = tables_for(
        &charges,
        cfg.b,
        cfg.n,
        &cfg.alpha_grid,
        ctx.seed,
        cfg.components,
        cfg.restarts,
        cfg.max_iters,
        &cfg.cache_dir,
    )?;
    let (alloc, value) = optimal_allocation(&tables)?;
    let bound = gamma_limit_lower_bound(&alloc, &charges, cfg.n, Some(&tables))?;
    let hetero = if charges.len() == 2 && cfg.n == 2 && charges[0] != charges[1] {
        let (i, j) = if charges[0] > charges[1] { (0, 1) } else { (1, 0) };
        Some(heteronuclear_study(
            charges[i],
            charges[j],
            cfg.b,
            &[tables[i].clone(), tables[j].clone()],
        )?)
    } else {
        None
    };
    let direct = if cfg.epsilons.is_empty() {
        None
    } else {
        let params = EnergyParams::new(cfg.epsilons[0], cfg.b, cfg.n)?;
        let family = TrialFamily {
            components: 1,
            search: search(ctx.seed, cfg.restarts, cfg.max_iters),
        };
        Some(minimize_geps_direct(&cfg.nuclei, &params, &family, &cfg.epsilons)?)
    };
    let csv = if charges.len() == 2 && cfg.n == 2 {
        gamma_csv(&tables, &cfg.alpha_grid, cfg.n)?
    } else {
        let mut s = String::from("nucleus,Z,alpha\n");
        for (k, (z, a)) in charges.iter().zip(&alloc.alphas).enumerate() {
            s.push_str(&format!("{k},{z},{a}\n"));
        }
        s
    };
    Ok(Outcome {
        config: to_value(&cfg),
        results: json!({
            "allocation": alloc,
            "gamma_min": tagged(value, "piecewise_linear_water_filling", bondlimit::tolerances::CONV_TOL),
            "closed_form": bound,
            "heteronuclear": hetero,
            "direct": direct,
            "tables": tables.iter().map(table_json).collect::<Vec<_>>(),
        }),
        csv,
        log: vec![format!("allocation {:?} value {value}", alloc.alphas)],
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct H2Config {
    b: f64,
    separation: f64,
    alpha_grid: Vec<f64>,
    epsilons: Vec<f64>,
    direct: bool,
    components: usize,
    restarts: usize,
    max_iters: u64,
    cache_dir: Option<String>,
}

impl Default for H2Config {
    fn default() -> Self {
        Self {
            b: 0.5,
            separation: 1.0,
            alpha_grid: default_alphas(),
            epsilons: vec![0.1, 0.05, 0.02],
            direct: false,
            components: 3,
            restarts: 20,
            max_iters: 2000,
            cache_dir: None,
        }
    }
}

pub fn h2(ctx: &Context) -> Run {
    let mut cfg: H2Config = parse(ctx)?;
    if let Some(b) = ctx.b {
        cfg.b = b;
    }
    let tables = tables_for(
        &[1.0, 1.0],
        cfg.b,
        2,
        &cfg.alpha_grid,
        ctx.seed,
        cfg.components,
        cfg.restarts,
        cfg.max_iters,
        &cfg.cache_dir,
    )?;
    let report = h2_study(cfg.b, &tables, cfg.separation, &cfg.epsilons)?;
    let direct = if cfg.direct && !cfg.epsilons.is_empty() {
        let h = 0.5 * cfg.separation;
        let nuclei = NucleiConfig::new(vec![[-h, 0.0, 0.0], [h, 0.0, 0.0]], vec![1.0, 1.0])?;
        let params = EnergyParams::new(cfg.epsilons[0], cfg.b, 2)?;
        let family = TrialFamily {
            components: 1,
            search: search(ctx.seed, cfg.restarts, cfg.max_iters),
        };
        Some(minimize_geps_direct(&nuclei, &params, &family, &cfg.epsilons)?)
    } else {
        None
    };
    Ok(Outcome {
        config: to_value(&cfg),
        results: json!({
            "allocation": report.allocation.alphas,
            "gamma_min": tagged(report.gamma_min, "piecewise_linear_water_filling", bondlimit::tolerances::CONV_TOL),
            "limit_energy": tagged(report.limit_energy, "analytic_small_alpha", GB_NUM_TOL),
            "hydrogen_reference": report.hydrogen_reference,
            "difference": report.difference,
            "nuclear_terms": report.nuclear_terms,
            "direct": direct,
            "table": table_json(&tables[0]),
        }),
        csv: gamma_csv(&tables, &cfg.alpha_grid, 2)?,
        log: vec![format!("limit energy {}", report.limit_energy)],
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StayConfig {
    rho: DiscreteMeasure,
    delta: f64,
    #[serde(rename = "N", default = "two")]
    n: usize,
}

pub fn staylocal(ctx: &Context) -> Run {
    let cfg: StayConfig = parse_required(ctx, "`rho` and `delta`")?;
    let report = match staylocal_check(&cfg.rho, cfg.delta, cfg.n) {
        Err(bondlimit::Error::ConfigurationRejected(m)) => return Err(Failure::Config(format!("at `delta`: {m}"))),
        r => r?,
    };
    let mut csv = String::from("cluster,mass,within,expected\n");
    for (k, c) in report.clusters.iter().enumerate() {
        csv.push_str(&format!("{k},{},{},{}\n", c.mass, c.within, c.expected));
    }
    if !report.all_match {
        return Err(Failure::Run(bondlimit::Error::InvariantViolation(format!(
            "within-cluster plan masses {:?} differ from the expected values",
            report.clusters.iter().map(|c| c.within).collect::<Vec<_>>()
        ))));
    }
    Ok(Outcome {
        config: to_value(&cfg),
        results: json!({
            "cost": tagged(report.cost, "exact_lp", TOL_MARGINAL),
            "report": report,
        }),
        csv,
        log: vec!["within-cluster masses match".into()],
    })
}
