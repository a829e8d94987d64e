use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use rrr_analysis::{pr_ae, pr_afs, pr_alv, pr_bfs, pr_blv, quorum_sweep, sci4, throughput, ThroughputInputs};
use rrr_core::chain::{verify_branch, ChainDump};
use rrr_sim::adversary::{bias_monte_carlo, BiasConfig};
use rrr_sim::{SimReport, Simulation, Strategy};

use crate::config::{RunConfig, Source, SweepCase, SweepFile};
use crate::{Analyze, BiasArgs, RunArgs, SweepArgs};

pub fn analyze(a: Analyze) -> anyhow::Result<()> {
    let p = match a {
        Analyze::PrBfs(t) => pr_bfs(t.ne, t.q, t.alpha, t.beta)?,
        Analyze::PrAfs {
            tail: t,
            depth,
            log2_leaves,
        } => pr_afs(t.ne, t.q, t.alpha, t.beta, depth, log2_leaves)?,
        Analyze::PrBlv { ne, q, beta } => pr_blv(ne, q, beta)?,
        Analyze::PrAlv(t) => pr_alv(t.ne, t.q, t.alpha, t.beta)?,
        Analyze::PrAe { ne, na, ta, alpha } => pr_ae(ne, na, ta, alpha)?,
        Analyze::Throughput(t) => {
            let out = throughput(&ThroughputInputs {
                round_secs: t.tr,
                block_bytes: t.block,
                header_bytes: t.header,
                n_endorsers: t.ne,
                confirm_bytes: t.confirm_bytes,
                n_enroll: t.enrolls,
                enroll_bytes: t.enroll_bytes,
                tx_bytes: t.tx,
            })?;
            println!("tps={:.1}", out.tps);
            println!("tx_fraction={:.4}", out.tx_fraction);
            return Ok(());
        }
    };
    println!("{}", sci4(p));
    Ok(())
}

fn sweep_cases(a: &SweepArgs) -> anyhow::Result<Vec<SweepCase>> {
    let mut cases = match &a.config {
        Some(path) => Source::read(path)?.parse::<SweepFile>()?.cases,
        None => {
            let (Some(ne), Some(alpha), Some(beta), Some(depth), Some(s)) = (a.ne, a.alpha, a.beta, a.depth, a.s)
            else {
                bail!("without --config, --ne, --alpha, --beta, --depth and --s are all required");
            };
            vec![SweepCase {
                n_endorsers: ne,
                alpha,
                beta,
                depth,
                liveness_rounds: s,
                q_min: None,
                q_max: None,
                log2_leaves: None,
                afs_threshold: None,
                alv_threshold: None,
            }]
        }
    };
    if cases.is_empty() {
        bail!("the sweep config has no cases");
    }
    for c in &mut cases {
        c.n_endorsers = a.ne.unwrap_or(c.n_endorsers);
        c.alpha = a.alpha.unwrap_or(c.alpha);
        c.beta = a.beta.unwrap_or(c.beta);
        c.depth = a.depth.unwrap_or(c.depth);
        c.liveness_rounds = a.s.unwrap_or(c.liveness_rounds);
        c.q_min = a.q_min.or(c.q_min);
        c.q_max = a.q_max.or(c.q_max);
        c.log2_leaves = a.log2_leaves.or(c.log2_leaves);
    }
    Ok(cases)
}

pub fn sweep(a: SweepArgs) -> anyhow::Result<()> {
    let mut csv = String::new();
    let mut summary = Vec::new();
    for (i, case) in sweep_cases(&a)?.iter().enumerate() {
        let s = quorum_sweep(&case.to_sweep()).with_context(|| format!("case {i}"))?;
        csv.push_str(&s.to_csv(i == 0));
        summary.push(format!(
            "case {i}: n_endorsers={} alpha={} beta={} depth={} s={} recommended_q={}",
            case.n_endorsers,
            case.alpha,
            case.beta,
            case.depth,
            case.liveness_rounds,
            s.recommended.map_or("none".to_string(), |q| q.to_string())
        ));
    }
    match &a.output {
        Some(path) => {
            write_file(path, csv.as_bytes())?;
            for l in &summary {
                println!("{l}");
            }
        }
        None => {
            print!("{csv}");
            for l in &summary {
                eprintln!("{l}");
            }
        }
    }
    Ok(())
}

fn load_run(a: &RunArgs) -> anyhow::Result<(RunConfig, Option<Source>)> {
    let (mut cfg, src) = match &a.config {
        Some(path) => {
            let src = Source::read(path)?;
            (src.parse::<RunConfig>()?, Some(src))
        }
        None => (RunConfig::default(), None),
    };
    if let Some(r) = a.rounds {
        cfg.rounds = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = Some(s);
    }
    if let Some(n) = a.nodes {
        cfg.net.nodes = n;
    }
    if let Some(b) = a.beta {
        cfg.net.beta = b;
    }
    if let Some(x) = a.alpha {
        cfg.adversary.alpha = x;
    }
    if let Some(kind) = &a.strategy {
        cfg.adversary.strategy = serde_json::from_value(serde_json::json!({ "kind": kind }))
            .with_context(|| format!("--strategy {kind}"))?;
    }
    if let Some(d) = &a.out_dir {
        cfg.output.dir = d.clone();
    }
    if let Some(n) = &a.name {
        cfg.output.name = n.clone();
    }
    cfg.output.dump |= a.dump;
    Ok((cfg, src))
}

fn invalid(src: &Option<Source>, msg: String) -> anyhow::Error {
    match src {
        Some(s) => s.locate(msg).into(),
        None => anyhow::anyhow!("invalid configuration: {msg}"),
    }
}

pub fn simulate(a: RunArgs, attack: bool) -> anyhow::Result<()> {
    let (cfg, src) = load_run(&a)?;
    if attack && cfg.adversary.strategy == Strategy::None {
        return Err(invalid(&src, "strategy must be set for an attack run".into()));
    }
    let mut sim_cfg = cfg.sim();
    if cfg.output.dump {
        // Keep every block so the whole chain can be saved.
        sim_cfg.retain_depth = sim_cfg.retain_depth.max(sim_cfg.rounds + 2);
    }
    let msg = |e: rrr_sim::ConfigError| match e {
        rrr_sim::ConfigError::Params(p) => p.to_string(),
        rrr_sim::ConfigError::Inconsistent(m) => m,
    };
    sim_cfg.validate().map_err(|e| invalid(&src, msg(e)))?;
    let sim = Simulation::new(sim_cfg.clone()).map_err(|e| invalid(&src, msg(e)))?;
    let genesis = sim.ledger().genesis().state.genesis().clone();
    let (report, chain) = sim.run_with_chain().map_err(|e| invalid(&src, msg(e)))?;

    let dir = &cfg.output.dir;
    let name = &cfg.output.name;
    let mut written = vec![
        write_file(&dir.join(format!("{name}.rounds.csv")), report.to_csv().as_bytes())?,
        write_file(&dir.join(format!("{name}.report.json")), report.to_json().as_bytes())?,
    ];
    if cfg.output.dump {
        let path = dir.join(format!("{name}.chain"));
        ChainDump {
            genesis,
            params: sim_cfg.params.clone(),
            blocks: chain,
        }
        .save(&path)
        .with_context(|| format!("saving {}", path.display()))?;
        written.push(path);
    }
    print_summary(&report)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn print_summary(r: &SimReport) -> anyhow::Result<()> {
    let c = &r.config;
    let p = &c.params;
    let mut out = std::io::stdout().lock();
    writeln!(out, "rounds={} blocks={} skips={}", r.rounds(), r.blocks, r.skips)?;
    writeln!(out, "skip_rate={:.4}", r.skip_rate())?;
    writeln!(out, "fork_rounds={} fork_rate={:.4}", r.fork_rounds, r.fork_rate())?;
    writeln!(
        out,
        "max_fork_depth={} max_reorg_depth={} finality_violations={}",
        r.max_fork_depth, r.max_reorg_depth, r.finality_violations
    )?;
    writeln!(
        out,
        "adversary_nodes={} adversary_block_share={:.4}",
        r.adversary_nodes.len(),
        r.adversary_block_share()
    )?;
    writeln!(out, "equivocation_evidence={}", r.equivocation_evidence)?;
    let (alpha, beta) = (c.adversary.alpha, c.net.beta);
    if let (Ok(alv), Ok(bfs)) = (
        pr_alv(p.n_endorsers, p.quorum, alpha, beta),
        pr_bfs(p.n_endorsers, p.quorum, alpha, beta),
    ) {
        writeln!(out, "analytic pr_alv={} pr_bfs={}", sci4(alv), sci4(bfs))?;
    }
    Ok(())
}

pub fn bias_demo(a: BiasArgs) -> anyhow::Result<()> {
    if !(0.0..1.0).contains(&a.alpha) {
        bail!("--alpha must lie in [0, 1)");
    }
    if a.initial == 0 || a.r#final <= a.initial {
        bail!("--final must exceed --initial, which must be positive");
    }
    let mut cfg = BiasConfig::new(a.alpha, a.initial, a.r#final);
    cfg.exploit = !a.control;
    cfg.window = a.window.unwrap_or(cfg.window);
    let t = bias_monte_carlo(&cfg, a.runs.max(1), a.seed);
    let end = t.final_point();
    let summary = format!(
        "initial_block_rate={:.4} final_adv_stake_share={:.4} final_adv_block_share={:.4}",
        t.initial_rate(cfg.window as usize),
        end.adv_stake_share,
        end.adv_block_share
    );
    match &a.output {
        Some(path) => {
            write_file(path, t.to_csv().as_bytes())?;
            println!("{summary}");
        }
        None => {
            print!("{}", t.to_csv());
            eprintln!("{summary}");
        }
    }
    Ok(())
}

pub fn verify(dir: &Path) -> anyhow::Result<bool> {
    let dump = ChainDump::load(dir).with_context(|| format!("loading {}", dir.display()))?;
    match verify_branch(Arc::new(dump.genesis), &dump.params, &dump.blocks) {
        Ok(state) => {
            println!("valid: {} blocks, tip {}", dump.blocks.len(), state.tip.to_hex());
            Ok(true)
        }
        Err(e) => {
            println!("invalid: {e}");
            Ok(false)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<PathBuf> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(path.to_owned())
}
