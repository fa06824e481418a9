use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use tcg_core::balanced::{
    balanced_stats, build_balanced_capped, extremal_sequence, sweep_conditions, DegreeSequence,
};
use tcg_core::cost::{fairness_ratio, social_cost};
use tcg_core::enumeration::{equilibrium_catalogue, find_equilibria_with, EnumerationConfig, EquilibriumReport};
use tcg_core::equilibrium::{is_nash, random_spanning_tree, run_dynamics, Policy};
use tcg_core::metrics::{balanced_pos_check, quality_summary};
use tcg_core::path_game::{
    is_path_nash_with, pair_coalition_improving_with, path_equilibrium_search_with, PathProfile, PathSearchConfig,
};
use tcg_core::report::{emit_report, quality_csv, report_json};
use tcg_core::structure_checks::{audit_equilibrium, StructureAudit};
use tcg_core::tree_model::{canonical_code, compute_stats};
use tcg_core::{CanonicalCode, Error, RootedProfile};

use crate::{Cli, Command, Failure, ProfileInput};

type Outcome = Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Enumerate { n, out, no_audit } => enumerate(cli, *n, out.as_deref(), !no_audit),
        Command::Verify { input, audit } => verify(cli, input, *audit),
        Command::Dynamics { n, profile, code, policy, seed, runs, max_steps, out } => {
            let start = match n {
                Some(n) => Start::Random(*n),
                None => Start::Fixed(load_profile(profile.as_deref(), code.as_deref())?),
            };
            dynamics(start, *policy, *seed, *runs, *max_steps, out.as_deref())
        }
        Command::Balanced { seq, extremal, verify, stats, sweep, out } => {
            let seq = match (seq, extremal) {
                (Some(s), _) => s.parse::<DegreeSequence>()?,
                (None, Some(h)) => extremal_sequence(*h),
                (None, None) => return Err(Failure::Usage("balanced needs --seq or --extremal".into())),
            };
            balanced(cli, &seq, *verify, *stats, *sweep, out.as_deref())
        }
        Command::Metrics { range, out, csv } => metrics(cli, *range, out.as_deref(), csv.as_deref()),
        Command::PathVerify { profile, paths, pairs } => path_verify(cli, profile.as_deref(), paths.as_deref(), *pairs),
        Command::PathSearch { n } => path_search(cli, *n),
        Command::Report { range, out, formats } => {
            let reports = catalogue(cli, *range)?;
            let written = emit_report(&reports, out, formats)?;
            if cli.json {
                let files: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
                print_json(&json!({ "written": files }));
            } else {
                for r in &reports {
                    println!("n={} trees={} equilibria={}", r.n, r.trees_scanned, r.count());
                }
                println!("wrote {} files to {}", written.len(), out.display());
            }
            Ok(())
        }
    }
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::Core(Error::Io { path: path.display().to_string(), message: e.to_string() }))
}

fn load_profile(path: Option<&Path>, code: Option<&str>) -> Result<RootedProfile, Failure> {
    match (path, code) {
        (Some(p), _) => Ok(RootedProfile::from_json(&read_file(p)?)?),
        (None, Some(c)) => Ok(CanonicalCode::parse(c)?.to_profile()),
        (None, None) => Err(Failure::Usage("a profile is required (--profile or --code)".into())),
    }
}

fn enum_config(cli: &Cli, audit: bool) -> EnumerationConfig {
    EnumerationConfig { cap: cli.caps.enum_cap, jobs: None, audit }
}

fn catalogue(cli: &Cli, (a, b): (usize, usize)) -> Result<Vec<EquilibriumReport>, Failure> {
    Ok(equilibrium_catalogue(a, b, &enum_config(cli, true))?)
}

fn print_audit(audit: &StructureAudit) {
    for c in &audit.checks {
        let status = serde_json::to_value(c.status).expect("status serializes");
        print!("  {:<24} {}", c.name, status.as_str().unwrap_or_default());
        match &c.witness {
            Some(w) => println!("  at {:?}: {}", w.nodes, w.detail),
            None => println!(),
        }
    }
}

fn enumerate(cli: &Cli, n: usize, out: Option<&Path>, audit: bool) -> Outcome {
    let report = find_equilibria_with(n, &enum_config(cli, audit))?;
    if let Some(dir) = out {
        emit_report(std::slice::from_ref(&report), dir, &Default::default())?;
    }
    if cli.json {
        print!("{}", report_json(std::slice::from_ref(&report)));
        return Ok(());
    }
    println!("n={} trees={} equilibria={}", n, report.trees_scanned, report.count());
    for e in &report.equilibria {
        let audit = match &e.audit {
            Some(a) if a.all_passed() => " audit=pass",
            Some(_) => " audit=FAIL",
            None => "",
        };
        println!("  {} sc={} fr={}{}", e.code, e.social_cost, e.fairness_ratio, audit);
    }
    Ok(())
}

fn verify(cli: &Cli, input: &ProfileInput, audit: bool) -> Outcome {
    let profile = load_profile(input.profile.as_deref(), input.code.as_deref())?;
    let verdict = is_nash(&profile);
    let stats = compute_stats(&profile).ok();
    let audit = match (audit, &stats) {
        (true, Some(_)) => Some(audit_equilibrium(&profile)?),
        _ => None,
    };
    if cli.json {
        let mut v = json!({ "n": profile.n(), "stable": verdict.stable, "witness": verdict.witness });
        if let Some(st) = &stats {
            v["spanning_tree"] = json!(true);
            v["social_cost"] = json!(social_cost(st));
            v["code"] = json!(canonical_code(&profile)?.as_str());
            v["fairness_ratio"] = json!(fairness_ratio(&profile, st));
        } else {
            v["spanning_tree"] = json!(false);
        }
        if let Some(a) = &audit {
            v["audit"] = serde_json::to_value(a).expect("audit serializes");
        }
        print_json(&v);
    } else {
        println!("{}", if verdict.stable { "STABLE" } else { "UNSTABLE" });
        match &stats {
            Some(st) => println!("n={} sc={} code={}", profile.n(), social_cost(st), canonical_code(&profile)?),
            None => println!("n={} not a spanning tree", profile.n()),
        }
        if let Some(w) = &verdict.witness {
            println!("witness: {w}");
        }
        if let Some(a) = &audit {
            print_audit(a);
        }
    }
    if verdict.stable {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}

enum Start {
    Random(usize),
    Fixed(RootedProfile),
}

/// Prints each outcome as JSON: one object, or an array for several runs.
fn dynamics(
    start: Start,
    policy: Policy,
    seed: u64,
    runs: u64,
    max_steps: usize,
    out: Option<&Path>,
) -> Outcome {
    let mut rows = Vec::new();
    let mut last = None;
    for s in seed..seed.saturating_add(runs.max(1)) {
        let initial = match &start {
            Start::Fixed(p) => p.clone(),
            Start::Random(n) => random_spanning_tree(*n, s),
        };
        let o = run_dynamics(&initial, policy, s, max_steps)?;
        let mut row = serde_json::to_value(&o).expect("outcome serializes");
        row["seed"] = json!(s);
        row["policy"] = json!(policy);
        row["start"] = json!(initial);
        rows.push(row);
        last = Some(o.final_profile);
    }
    match rows.len() {
        1 => print_json(&rows[0]),
        _ => print_json(&Value::Array(rows)),
    }
    if let (Some(path), Some(p)) = (out, last) {
        write_file(path, &format!("{}\n", p.to_json()))?;
    }
    Ok(())
}

fn balanced(cli: &Cli, seq: &DegreeSequence, verify: bool, show_stats: bool, sweep: bool, out: Option<&Path>) -> Outcome {
    let stats = balanced_stats(seq);
    let pos = balanced_pos_check(seq).ok();
    let built = if verify || sweep || out.is_some() {
        Some(build_balanced_capped(seq, cli.caps.construction_cap)?)
    } else {
        None
    };
    let stable = verify.then(|| is_nash(built.as_ref().expect("built when verifying")).stable);
    let sweeps = match (&built, sweep) {
        (Some(p), true) => Some(sweep_conditions(p)?),
        _ => None,
    };
    if let (Some(path), Some(p)) = (out, &built) {
        write_file(path, &format!("{}\n", p.to_json()))?;
    }
    if cli.json {
        let mut v = json!({
            "sequence": seq,
            "admissible": seq.admissible_for_theorem(),
            "agents": stats.agents().to_string(),
            "stats": stats,
        });
        if let Some(p) = &pos {
            v["ratio"] = json!(p.ratio);
        }
        if let Some(s) = stable {
            v["stable"] = json!(s);
        }
        if let Some(s) = &sweeps {
            v["conditions"] = serde_json::to_value(s).expect("sweeps serialize");
        }
        print_json(&v);
    } else {
        if let Some(s) = stable {
            println!("{}", if s { "STABLE" } else { "UNSTABLE" });
        }
        println!("sequence={} height={} admissible={}", seq, seq.height(), seq.admissible_for_theorem());
        println!("n={} SC={} avg_cost={}", stats.agents(), stats.sc, stats.avg_cost);
        if show_stats {
            println!("subtree_sizes={}", join(&stats.sizes));
            println!("subtree_sc={}", join(&stats.subtree_sc));
            if let Some(p) = &pos {
                let within = p.within_pos_ceiling.map_or("n/a".to_string(), |b| b.to_string());
                println!("sc_per_agent={} within_2.83={within}", p.ratio);
            }
        }
        if let Some(s) = &sweeps {
            for c in s {
                println!(
                    "  {:<28} positions={} hypothesis={} violations={}",
                    c.name, c.positions, c.hypothesis_held, c.violations
                );
            }
        }
    }
    let violated = sweeps.iter().flatten().any(|c| c.violations > 0);
    if stable == Some(false) || violated {
        return Err(Failure::Verdict);
    }
    Ok(())
}

fn metrics(cli: &Cli, range: (usize, usize), out: Option<&Path>, csv: Option<&Path>) -> Outcome {
    let reports = catalogue(cli, range)?;
    if let Some(path) = out {
        write_file(path, &report_json(&reports))?;
    }
    if let Some(path) = csv {
        write_file(path, &quality_csv(&reports))?;
    }
    let quality: Vec<_> = reports.iter().map(quality_summary).collect();
    if cli.json {
        print_json(&serde_json::to_value(&quality).expect("quality serializes"));
        return Ok(());
    }
    let show = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    for q in &quality {
        println!(
            "n={} equilibria={} opt={} best={} worst={} pos={} poa={} max_cost={} fr_in_bounds={}",
            q.n,
            q.equilibria,
            q.opt_sc,
            show(q.best_sc.map(|v| v.to_string())),
            show(q.worst_sc.map(|v| v.to_string())),
            show(q.pos_ratio.as_ref().map(|v| v.to_string())),
            show(q.poa_ratio.as_ref().map(|v| v.to_string())),
            show(q.max_agent_cost.as_ref().map(|v| v.to_string())),
            show(q.fr_within_bounds.map(|v| v.to_string())),
        );
    }
    Ok(())
}

fn path_verify(cli: &Cli, profile: Option<&Path>, paths: Option<&Path>, pairs: bool) -> Outcome {
    let pp = match (profile, paths) {
        (_, Some(p)) => PathProfile::from_json(&read_file(p)?)?,
        (Some(p), None) => PathProfile::from_tree(&RootedProfile::from_json(&read_file(p)?)?)?,
        (None, None) => return Err(Failure::Usage("path-verify needs --profile or --paths".into())),
    };
    let config = PathSearchConfig { cap: cli.caps.path_cap, budget: cli.caps.search_budget };
    let verdict = is_path_nash_with(&pp, &config)?;
    let mut coalition = None;
    if pairs {
        'outer: for i in 0..pp.n() {
            for j in i + 1..pp.n() {
                if let Some(d) = pair_coalition_improving_with(&pp, i, j, &config)? {
                    coalition = Some(d);
                    break 'outer;
                }
            }
        }
    }
    if cli.json {
        let mut v = json!({ "n": pp.n(), "stable": verdict.stable, "witness": verdict.witness });
        if pairs {
            v["pair_deviation"] = serde_json::to_value(&coalition).expect("deviation serializes");
        }
        print_json(&v);
    } else {
        println!("{}", if verdict.stable { "STABLE" } else { "UNSTABLE" });
        if let Some(w) = &verdict.witness {
            println!("witness: agent {} path {:?}: {} -> {}", w.agent, w.path, w.old_cost, w.new_cost);
        }
        if pairs {
            match &coalition {
                Some(d) => println!(
                    "pair: agents {:?} paths {:?} / {:?}: {} -> {}, {} -> {}",
                    d.agents, d.paths.0, d.paths.1, d.old_costs.0, d.new_costs.0, d.old_costs.1, d.new_costs.1
                ),
                None => println!("pair: none"),
            }
        }
    }
    if verdict.stable {
        Ok(())
    } else {
        Err(Failure::Verdict)
    }
}

fn path_search(cli: &Cli, n: usize) -> Outcome {
    let codes = path_equilibrium_search_with(n, cli.caps.path_search_cap, cli.caps.search_budget)?;
    if cli.json {
        let list: Vec<&str> = codes.iter().map(|c| c.as_str()).collect();
        print_json(&json!({ "n": n, "count": codes.len(), "codes": list }));
    } else {
        println!("n={} path_stable={}", n, codes.len());
        for c in &codes {
            println!("  {c}");
        }
    }
    Ok(())
}
