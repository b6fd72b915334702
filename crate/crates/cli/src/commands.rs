use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Duration;

use anyhow::{bail, Context as _, Result};
use otswitch_core::analysis::{
    bus_classes, cardinal_csv, cardinal_distances, cross_evaluate, feasibility_report, loocv, stability_probe,
    topology_census, FeasibilityReport,
};
use otswitch_core::dcots::{
    build_dcots_mip, congestion_stats, evaluate_topology, relative_gap, solve_dcots, DcotsInstance, DispatchReport,
    DispatchSolution, Topology,
};
use otswitch_core::heuristics::{greedy_local_search, knn_heuristic, HeuristicResult, KnnConfig, Norm};
use otswitch_core::instances::{generate_instances, split_indices, train_to_file};
use otswitch_core::network::{validate, Network};
use otswitch_lp::write_lp_format;
use serde::Serialize;

use crate::args::{AnalyzeCommand, Command, Common, Data, HeuristicCommand, KnnArgs};
use crate::context::{usage, Context, InstanceFile, InstanceRow};

pub fn run(cmd: Command, argv: &[String]) -> Result<()> {
    match cmd {
        Command::Parse { common, validate } => parse(&common, argv, validate),
        Command::Generate { common, count, test_count } => generate(&common, argv, count, test_count),
        Command::Train { common, data } => train(&common, argv, &data),
        Command::Solve { common, instances, index, dump_lp } => solve(&common, argv, instances, index, dump_lp),
        Command::Heuristic { method } => match method {
            HeuristicCommand::Knn { common, data, knn } => heuristic(&common, argv, &data, Some(&knn)),
            HeuristicCommand::Greedy { common, data } => heuristic(&common, argv, &data, None),
        },
        Command::Benchmark { common, data, knn } => benchmark(&common, argv, &data, &knn),
        Command::Analyze { study } => analyze(study, argv),
        Command::Report { common } => report(&common, argv),
    }
}

fn knn_config(args: &KnnArgs) -> Result<KnnConfig> {
    if args.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let norm = Norm::from_str(&args.norm).map_err(|e| usage(e.to_string()))?;
    Ok(KnnConfig { k: args.k, norm })
}

fn time_limit(ctx: &Context) -> Option<Duration> {
    let t = ctx.config.time_limit_s;
    (t.is_finite() && t > 0.0).then(|| Duration::from_secs_f64(t))
}

fn ids(topo: &Topology) -> String {
    topo.open_lines().iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ")
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn parse(common: &Common, argv: &[String], check: bool) -> Result<()> {
    let mut ctx = Context::new("parse", argv, common)?;
    let (net, warnings) = ctx.network_with_warnings()?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", net.summary());
    let diagnostics: Vec<String> = if check { validate(&net).iter().map(|d| d.to_string()).collect() } else { vec![] };
    #[derive(Serialize)]
    struct ParseSummary<'a> {
        name: &'a str,
        base_mva: f64,
        buses: usize,
        generators: usize,
        lines: usize,
        switchable_lines: usize,
        fingerprint: String,
        warnings: &'a [String],
        validated: bool,
        diagnostics: &'a [String],
    }
    ctx.write_json(
        "parse.json",
        &ParseSummary {
            name: net.name(),
            base_mva: net.base_mva(),
            buses: net.buses().len(),
            generators: net.generators().len(),
            lines: net.lines().len(),
            switchable_lines: net.switchable_lines().count(),
            fingerprint: net.fingerprint(),
            warnings: &warnings,
            validated: check,
            diagnostics: &diagnostics,
        },
    )?;
    ctx.finish()?;
    if !diagnostics.is_empty() {
        for d in &diagnostics {
            eprintln!("invalid: {d}");
        }
        bail!("{} validation problem(s)", diagnostics.len());
    }
    Ok(())
}

fn generate(common: &Common, argv: &[String], count: Option<usize>, test_count: Option<usize>) -> Result<()> {
    let mut ctx = Context::new("generate", argv, common)?;
    if let Some(c) = count {
        ctx.config.count = c;
    }
    if let Some(t) = test_count {
        ctx.config.test_count = t;
    }
    let net = ctx.network()?;
    let spec = ctx.config.generation_spec();
    let instances = generate_instances(&net, &spec, None)?;
    let split = split_indices(&spec)?;
    let file = InstanceFile {
        network_fingerprint: net.fingerprint(),
        spec,
        instances: instances
            .iter()
            .enumerate()
            .map(|(index, i)| InstanceRow { index, demand: i.demand().to_vec(), gen_cost: i.gen_cost().to_vec() })
            .collect(),
        split,
    };
    ctx.write_json("instances.json", &file)?;
    println!("{} instances ({} train, {} test)", file.instances.len(), file.split.train.len(), file.split.test.len());
    ctx.finish()
}

fn train(common: &Common, argv: &[String], data: &Data) -> Result<()> {
    let mut ctx = Context::new("train", argv, common)?;
    let net = ctx.network()?;
    let path = ctx.instance_path(data.instances.as_ref());
    let (file, all) = ctx.load_instances(&path, &net)?;
    let instances: Vec<DcotsInstance> = file.split.train.iter().map(|&i| all[i].clone()).collect();
    let mut opts = ctx.config.train_options();
    opts.record_time = !ctx.no_timing;
    let path = ctx.train_path(data.train.as_ref());
    let set = train_to_file(&path, &instances, &opts)?;
    if path.parent() == Some(ctx.out.as_path()) {
        ctx.record(&path.file_name().unwrap_or_default().to_string_lossy());
    } else {
        ctx.record(&path.display().to_string());
    }
    println!("{} entries, {} failures -> {}", set.entries.len(), set.failures.len(), path.display());
    ctx.finish()
}

#[derive(Serialize)]
struct MipSummary {
    status: String,
    objective: f64,
    best_bound: f64,
    gap: f64,
    nodes: usize,
    lp_iterations: usize,
    wall_time: f64,
}

fn solve(
    common: &Common,
    argv: &[String],
    instances: Option<std::path::PathBuf>,
    index: Option<usize>,
    dump_lp: Option<std::path::PathBuf>,
) -> Result<()> {
    let mut ctx = Context::new("solve", argv, common)?;
    let net = ctx.network()?;
    let inst = match index {
        Some(i) => {
            let path = ctx.instance_path(instances.as_ref());
            let (_, all) = ctx.load_instances(&path, &net)?;
            all.get(i).cloned().with_context(|| format!("instance index {i} out of range ({} instances)", all.len()))?
        }
        None if instances.is_some() => return Err(usage("--instances needs --index")),
        None => ctx.nominal(&net)?,
    };
    if let Some(path) = &dump_lp {
        let model = build_dcots_mip(&inst)?;
        std::fs::write(path, write_lp_format(&model.mip)).with_context(|| format!("writing {}", path.display()))?;
        ctx.record(&path.display().to_string());
    }
    let sol = solve_dcots(&inst, ctx.config.rel_gap, time_limit(&ctx), None)?;
    let mut report = sol.dispatch.report(net.base_mva());
    report.solve_seconds = ctx.seconds(report.solve_seconds);
    #[derive(Serialize)]
    struct SolveOutput {
        instance: Option<usize>,
        cardinality: Option<usize>,
        rel_gap: f64,
        open_lines: Vec<usize>,
        result: DispatchReport,
        mip: MipSummary,
    }
    let m = &sol.mip;
    let out = SolveOutput {
        instance: index,
        cardinality: inst.cardinality(),
        rel_gap: ctx.config.rel_gap,
        open_lines: sol.topology.open_lines().iter().copied().collect(),
        result: report,
        mip: MipSummary {
            status: format!("{:?}", m.status).to_lowercase(),
            objective: m.objective_value,
            best_bound: m.best_bound,
            gap: m.gap,
            nodes: m.nodes,
            lp_iterations: m.lp_iterations,
            wall_time: ctx.seconds(m.wall_time),
        },
    };
    ctx.write_json("solve.json", &out)?;
    println!("open lines [{}], objective {:.6}, {:?}", ids(&sol.topology), out.result.total_objective, m.status);
    ctx.finish()
}

#[derive(Serialize)]
struct HeuristicRow {
    instance: usize,
    #[serde(flatten)]
    result: DispatchReport,
    candidate_count: usize,
    lp_solves: usize,
    source_entry: Option<usize>,
    wall_time: f64,
}

fn heuristic_row(ctx: &Context, net: &Network, instance: usize, r: &HeuristicResult) -> HeuristicRow {
    let mut result = r.dispatch.report(net.base_mva());
    result.solve_seconds = ctx.seconds(result.solve_seconds);
    HeuristicRow {
        instance,
        result,
        candidate_count: r.candidate_count,
        lp_solves: r.lp_solves,
        source_entry: r.source_entry,
        wall_time: ctx.seconds(r.wall_time),
    }
}

fn heuristic_csv(rows: &[HeuristicRow]) -> String {
    let mut s = String::from("instance,open_lines,total_objective,load_shed_mw,over_generation_mw,candidate_count,lp_solves,wall_time\n");
    for r in rows {
        let open: Vec<String> = r.result.open_lines.iter().map(|l| l.to_string()).collect();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.instance,
            open.join(" "),
            r.result.total_objective,
            r.result.load_shed_mw,
            r.result.over_generation_mw,
            r.candidate_count,
            r.lp_solves,
            r.wall_time
        );
    }
    s
}

fn heuristic(common: &Common, argv: &[String], data: &Data, knn: Option<&KnnArgs>) -> Result<()> {
    let name = if knn.is_some() { "heuristic-knn" } else { "heuristic-greedy" };
    let mut ctx = Context::new(name, argv, common)?;
    let cfg = knn.map(knn_config).transpose()?;
    let net = ctx.network()?;
    let train = match cfg {
        Some(_) => Some(ctx.load_training(data.train.as_ref())?),
        None => None,
    };
    let tests = ctx.test_instances(data.instances.as_ref(), &net)?;
    let mut rows = Vec::with_capacity(tests.len());
    for (i, inst) in &tests {
        let r = match (&cfg, &train) {
            (Some(cfg), Some(train)) => knn_heuristic(inst, train, cfg)?,
            _ => greedy_local_search(inst)?,
        };
        rows.push(heuristic_row(&ctx, &net, *i, &r));
    }
    #[derive(Serialize)]
    struct Output<'a> {
        method: &'a str,
        k: Option<usize>,
        norm: Option<String>,
        cardinality: Option<usize>,
        results: &'a [HeuristicRow],
    }
    let out = Output {
        method: if cfg.is_some() { "knn" } else { "greedy" },
        k: cfg.map(|c| c.k),
        norm: cfg.map(|c| c.norm.to_string()),
        cardinality: ctx.config.cardinality,
        results: &rows,
    };
    ctx.write_json(&format!("{name}.json"), &out)?;
    ctx.write(&format!("{name}.csv"), heuristic_csv(&rows))?;
    let objs: Vec<f64> = rows.iter().map(|r| r.result.total_objective).collect();
    println!("{}: {} instance(s), mean objective {:.6}", out.method, rows.len(), mean(&objs));
    ctx.finish()
}

#[derive(Serialize)]
struct MethodSummary {
    method: &'static str,
    mean_gap: f64,
    min_gap: f64,
    max_gap: f64,
    feasibility: FeasibilityReport,
}

fn benchmark(common: &Common, argv: &[String], data: &Data, knn: &KnnArgs) -> Result<()> {
    let mut ctx = Context::new("benchmark", argv, common)?;
    let cfg = knn_config(knn)?;
    let net = ctx.network()?;
    let train = ctx.load_training(data.train.as_ref())?;
    let path = ctx.instance_path(data.instances.as_ref());
    let (file, all) = ctx.load_instances(&path, &net)?;
    let tests: Vec<DcotsInstance> = file.split.test.iter().map(|&i| all[i].clone()).collect();
    let methods = ["exact", "knn", "greedy", "all_closed"];
    let mut results: Vec<Vec<(DispatchSolution, usize, f64)>> = vec![Vec::new(); methods.len()];
    for inst in &tests {
        let exact = solve_dcots(inst, ctx.config.rel_gap, time_limit(&ctx), None)?;
        let wall = exact.mip.wall_time;
        results[0].push((exact.dispatch, exact.mip.nodes, wall));
        let k = knn_heuristic(inst, &train, &cfg)?;
        results[1].push((k.dispatch, k.lp_solves, k.wall_time));
        let g = greedy_local_search(inst)?;
        results[2].push((g.dispatch, g.lp_solves, g.wall_time));
        let c = evaluate_topology(inst, &Topology::all_closed())?;
        let secs = c.solve_seconds;
        results[3].push((c, 1, secs));
    }
    let exact_objs: Vec<f64> = results[0].iter().map(|r| r.0.total_objective).collect();
    let matrix = cross_evaluate(&train, &tests, Some(&exact_objs))?;
    let best: Vec<f64> = (0..tests.len())
        .map(|t| results.iter().map(|m| m[t].0.total_objective).fold(matrix.best_known[t], f64::min))
        .collect();
    let mut csv = String::from(
        "test,instance,method,open_lines,total_objective,gap,load_shed_mw,over_generation_mw,work,seconds\n",
    );
    let mut feas = String::from("method,index,load_shed_mw,over_generation_mw\n");
    let mut summaries = Vec::new();
    for (m, name) in methods.iter().enumerate() {
        let mut gaps = Vec::new();
        for (t, (sol, work, secs)) in results[m].iter().enumerate() {
            let gap = relative_gap(sol.total_objective, best[t])?;
            gaps.push(gap);
            let _ = writeln!(
                csv,
                "{t},{},{name},{},{},{gap},{},{},{work},{}",
                file.split.test[t],
                ids(&sol.topology),
                sol.total_objective,
                sol.load_shed_mw(net.base_mva()),
                sol.over_generation_mw(net.base_mva()),
                ctx.seconds(*secs)
            );
        }
        let sols: Vec<DispatchSolution> = results[m].iter().map(|r| r.0.clone()).collect();
        let report = feasibility_report(&sols, net.base_mva());
        for (i, (u, v)) in report.shed_mw.iter().zip(&report.over_generation_mw).enumerate() {
            let _ = writeln!(feas, "{name},{i},{u},{v}");
        }
        summaries.push(MethodSummary {
            method: name,
            mean_gap: mean(&gaps),
            min_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
            max_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            feasibility: report,
        });
    }
    #[derive(Serialize)]
    struct Output<'a> {
        tests: usize,
        k: usize,
        norm: String,
        rel_gap: f64,
        cardinality: Option<usize>,
        best_known: &'a [f64],
        methods: &'a [MethodSummary],
    }
    ctx.write("benchmark.csv", csv)?;
    ctx.write("feasibility.csv", feas)?;
    ctx.write_json(
        "benchmark.json",
        &Output {
            tests: tests.len(),
            k: cfg.k,
            norm: cfg.norm.to_string(),
            rel_gap: ctx.config.rel_gap,
            cardinality: ctx.config.cardinality,
            best_known: &best,
            methods: &summaries,
        },
    )?;
    for s in &summaries {
        println!("{:<10} mean gap {:.4}%  max gap {:.4}%", s.method, 100.0 * s.mean_gap, 100.0 * s.max_gap);
    }
    ctx.finish()
}

fn parse_radii(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|r| r.trim().parse::<f64>().map_err(|_| usage(format!("bad radius '{r}' in --radii"))))
        .collect()
}

fn analyze(study: AnalyzeCommand, argv: &[String]) -> Result<()> {
    match study {
        AnalyzeCommand::Census { common, data } => {
            let mut ctx = Context::new("analyze-census", argv, &common)?;
            let train = ctx.load_training(data.train.as_ref())?;
            if train.entries.is_empty() {
                bail!("empty training set");
            }
            let census = topology_census(&train);
            ctx.write("census.csv", census.to_csv())?;
            ctx.write("census_pairs.csv", census.pairs_csv())?;
            #[derive(Serialize)]
            struct Unique<'a> {
                open_lines: &'a [usize],
                count: usize,
            }
            #[derive(Serialize)]
            struct Output<'a> {
                entries: usize,
                unique_count: usize,
                unique: Vec<Unique<'a>>,
            }
            let unique = census.unique.iter().map(|(s, c)| Unique { open_lines: s, count: *c }).collect();
            ctx.write_json("census.json", &Output { entries: census.entries, unique_count: census.unique_count, unique })?;
            println!("{} entries, {} unique topologies", census.entries, census.unique_count);
            ctx.finish()
        }
        AnalyzeCommand::Crosseval { common, data } => {
            let mut ctx = Context::new("analyze-crosseval", argv, &common)?;
            let net = ctx.network()?;
            let train = ctx.load_training(data.train.as_ref())?;
            let tests: Vec<DcotsInstance> =
                ctx.test_instances(data.instances.as_ref(), &net)?.into_iter().map(|t| t.1).collect();
            let m = cross_evaluate(&train, &tests, None)?;
            ctx.write("gap_matrix.csv", m.to_csv())?;
            let col_min: Vec<Option<f64>> = (0..tests.len()).map(|t| m.column_min_gap(t)).collect();
            let errors = m.cells.iter().flatten().filter(|c| c.error.is_some()).count();
            ctx.write_json(
                "crosseval.json",
                &serde_json::json!({
                    "rows": m.topologies.len(),
                    "tests": tests.len(),
                    "best_known": m.best_known,
                    "column_min_gap": col_min,
                    "cell_errors": errors,
                }),
            )?;
            println!("{} unique topologies x {} tests", m.topologies.len(), tests.len());
            ctx.finish()
        }
        AnalyzeCommand::Cardinal { common, data, epsilon } => {
            let mut ctx = Context::new("analyze-cardinal", argv, &common)?;
            let net = ctx.network()?;
            let train = ctx.load_training(data.train.as_ref())?;
            let tests: Vec<DcotsInstance> =
                ctx.test_instances(data.instances.as_ref(), &net)?.into_iter().map(|t| t.1).collect();
            let m = cross_evaluate(&train, &tests, None)?;
            let recs = cardinal_distances(&train, &tests, &m, epsilon)?;
            ctx.write("cardinal.csv", cardinal_csv(&recs))?;
            let within = recs.iter().filter(|r| r.rank_of_first_within_epsilon.is_some_and(|k| k <= 10)).count();
            let share = within as f64 / recs.len().max(1) as f64;
            ctx.write_json(
                "cardinal.json",
                &serde_json::json!({ "epsilon": epsilon, "share_within_rank_10": share, "records": recs }),
            )?;
            println!("{:.1}% of tests have an epsilon-optimal entry among the 10 nearest", 100.0 * share);
            ctx.finish()
        }
        AnalyzeCommand::Loocv { common, data, knn } => {
            let mut ctx = Context::new("analyze-loocv", argv, &common)?;
            let cfg = knn_config(&knn)?;
            let net = ctx.network()?;
            let train = ctx.load_training(data.train.as_ref())?;
            let s = loocv(&net, &train, &cfg, train.cardinality)?;
            ctx.write_json("loocv.json", &s)?;
            println!("loocv k={} mean {:.4}% min {:.4}% max {:.4}%", s.k, 100.0 * s.mean, 100.0 * s.min, 100.0 * s.max);
            ctx.finish()
        }
        AnalyzeCommand::Classes { common, delta } => {
            let mut ctx = Context::new("analyze-classes", argv, &common)?;
            if common.cardinality.is_none() {
                ctx.config.cardinality = Some(5);
            }
            let net = ctx.network()?;
            let c = bus_classes(&net, delta, ctx.config.cardinality, ctx.config.rel_gap)?;
            ctx.write_json("classes.json", &c)?;
            println!("{} classes over {} buses", c.classes.len(), net.buses().len());
            ctx.finish()
        }
        AnalyzeCommand::Stability { common, directions, radii } => {
            let mut ctx = Context::new("analyze-stability", argv, &common)?;
            let radii = parse_radii(&radii)?;
            let net = ctx.network()?;
            let inst = ctx.nominal(&net)?;
            let rep = stability_probe(&inst, directions, &radii, ctx.config.seed)?;
            ctx.write_json("stability.json", &rep)?;
            if rep.unique_optimum {
                println!("empirical radius {} p.u. ({} directions)", rep.radius, rep.directions);
            } else {
                println!("optimum is not unique; radius 0");
            }
            ctx.finish()
        }
        AnalyzeCommand::Congestion { common, instances } => {
            let mut ctx = Context::new("analyze-congestion", argv, &common)?;
            let net = ctx.network()?;
            let tests = ctx.test_instances(instances.as_ref(), &net)?;
            let mut csv = String::from("instance,tight_line_fraction,all_closed_objective,best_known,all_closed_gap\n");
            let mut stats = Vec::new();
            for (i, inst) in &tests {
                let s = congestion_stats(inst, None)?;
                let _ = writeln!(
                    csv,
                    "{i},{},{},{},{}",
                    s.tight_line_fraction, s.all_closed_objective, s.best_known, s.all_closed_gap
                );
                stats.push(s);
            }
            ctx.write("congestion.csv", csv)?;
            let gaps: Vec<f64> = stats.iter().map(|s| s.all_closed_gap).collect();
            let tight: Vec<f64> = stats.iter().map(|s| s.tight_line_fraction).collect();
            ctx.write_json(
                "congestion.json",
                &serde_json::json!({ "instances": stats.len(), "mean_tight_line_fraction": mean(&tight), "mean_all_closed_gap": mean(&gaps) }),
            )?;
            println!("mean tight-line fraction {:.3}, mean all-closed gap {:.4}%", mean(&tight), 100.0 * mean(&gaps));
            ctx.finish()
        }
    }
}

fn report(common: &Common, argv: &[String]) -> Result<()> {
    let mut ctx = Context::new("report", argv, common)?;
    let mut found = serde_json::Map::new();
    for name in ["benchmark", "loocv", "census", "cardinal", "crosseval", "classes", "stability", "congestion"] {
        let path = ctx.out.join(format!("{name}.json"));
        if let Ok(text) = std::fs::read_to_string(&path) {
            let value: serde_json::Value =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            found.insert(name.to_string(), value);
        }
    }
    if found.is_empty() {
        bail!("no analysis artifacts in {}", ctx.out.display());
    }
    let mut text = String::new();
    if let Some(methods) = found.get("benchmark").and_then(|b| b["methods"].as_array()) {
        for m in methods {
            let pct = |k: &str| 100.0 * m[k].as_f64().unwrap_or(f64::NAN);
            let _ = writeln!(
                text,
                "{:<10} mean gap {:.4}%  max gap {:.4}%",
                m["method"].as_str().unwrap_or("?"),
                pct("mean_gap"),
                pct("max_gap")
            );
        }
    }
    if let Some(l) = found.get("loocv") {
        let pct = |k: &str| 100.0 * l[k].as_f64().unwrap_or(f64::NAN);
        let _ = writeln!(text, "loocv      mean gap {:.4}%  min {:.4}%  max {:.4}%", pct("mean"), pct("min"), pct("max"));
    }
    if let Some(c) = found.get("census") {
        let _ = writeln!(text, "census     {} unique topologies over {} entries", c["unique_count"], c["entries"]);
    }
    if let Some(s) = found.get("stability") {
        let _ = writeln!(text, "stability  radius {} p.u.", s["radius"]);
    }
    print!("{text}");
    let keys: Vec<String> = found.keys().cloned().collect();
    ctx.write_json("report.json", &serde_json::json!({ "sources": keys, "summaries": found }))?;
    ctx.finish()
}
