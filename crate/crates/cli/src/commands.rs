use std::io::Write;
use std::time::Instant;

use iface_core::awareness::{compute_s_reduced, expand_sitaware};
use iface_core::powergrid::{case118, configuration_with, AlternateParity, SwingParams};
use iface_core::solver::regime_for;
use iface_core::{
    solve, AwarenessFamily, EnumerateOptions, Error, GammaOracle, OracleOptions, Regime, Result,
    SensorSet, SolutionRecord, SolveOptions, Task, TrustLevel,
};
use serde::Serialize;

use crate::source::{self, Loaded};
use crate::{Cli, Command, Common, Format, Level, Parity};

/// Reduced pools above this size take hours to enumerate; the grid gates them.
const LONG_REDUCED: usize = 20;

pub fn run(cli: &Cli) -> Result<()> {
    let c = &cli.common;
    match &cli.command {
        Command::Gamma { ids } => gamma(c, ids),
        Command::Enumerate {
            aggressive_prune,
            expand_limit,
        } => enumerate(c, *aggressive_prune, *expand_limit),
        Command::Solve {
            k_trust,
            alt_heuristic,
            aggressive_prune,
        } => solve_cmd(c, *k_trust, *alt_heuristic, *aggressive_prune),
        Command::Grid {
            config,
            level,
            k_trust,
            include_long,
            alt_heuristic,
            aggressive_prune,
        } => grid(
            c,
            GridRun {
                config: *config,
                level: *level,
                k_trust: *k_trust,
                include_long: *include_long,
                alt_heuristic: *alt_heuristic,
                aggressive_prune: *aggressive_prune,
            },
        ),
    }
}

fn parity(c: &Common) -> AlternateParity {
    match c.parity {
        Parity::Odd => AlternateParity::Odd,
        Parity::Even => AlternateParity::Even,
    }
}

fn oracle(c: &Common, l: &Loaded) -> GammaOracle {
    let options = OracleOptions {
        cache_cap: c.cache_cap,
        ..Default::default()
    };
    GammaOracle::with_options(&l.system, &l.pool, options)
}

fn enumerate_options(aggressive_prune: bool) -> EnumerateOptions {
    EnumerateOptions {
        aggressive_prune,
        partitions: rayon::current_num_threads(),
        ..Default::default()
    }
}

fn emit(c: &Common, json: &impl Serialize, csv_rows: &[impl Serialize]) -> Result<()> {
    let mut buf = Vec::new();
    match c.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut buf, json)?;
            buf.push(b'\n');
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut buf);
            for r in csv_rows {
                w.serialize(r)
                    .map_err(|e| Error::Input(format!("csv: {e}")))?;
            }
            w.flush()?;
        }
    }
    match &c.out {
        Some(path) => std::fs::write(path, buf)?,
        None => std::io::stdout().lock().write_all(&buf)?,
    }
    Ok(())
}

fn join_ids(s: SensorSet) -> String {
    s.ids().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

fn parse_ids(text: &str, pool_size: usize) -> Result<SensorSet> {
    let mut set = SensorSet::EMPTY;
    for tok in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let id: usize = tok.parse().map_err(|_| {
            Error::Input(format!("sensor id {tok:?} is not a non-negative integer"))
        })?;
        if id >= pool_size {
            return Err(Error::Input(format!(
                "sensor id {id} is outside the pool; valid ids are 0..{}",
                pool_size - 1
            )));
        }
        set = set.with(id);
    }
    Ok(set)
}

#[derive(Serialize)]
struct GammaReport {
    instance: String,
    ids: SensorSet,
    task: SensorSet,
    gamma: usize,
    gamma_union_task: usize,
}

fn gamma(c: &Common, ids: &str) -> Result<()> {
    let l = source::load(&c.instance, parity(c))?;
    let set = parse_ids(ids, l.pool.len())?;
    let o = oracle(c, &l);
    let report = GammaReport {
        instance: l.label.clone(),
        ids: set,
        task: l.task.sensors,
        gamma: o.gamma(set),
        gamma_union_task: o.gamma_union_task(set, &l.task),
    };
    #[derive(Serialize)]
    struct Row {
        instance: String,
        ids: String,
        gamma: usize,
        gamma_union_task: usize,
    }
    let row = Row {
        instance: report.instance.clone(),
        ids: join_ids(set),
        gamma: report.gamma,
        gamma_union_task: report.gamma_union_task,
    };
    emit(c, &report, &[row])
}

#[derive(Serialize)]
struct EnumerateReport {
    instance: String,
    pool_size: usize,
    task: SensorSet,
    gamma_task: usize,
    s_reduced: SensorSet,
    family_size: usize,
    sitaware_reduced: Vec<SensorSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expanded_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    expanded: Option<Vec<SensorSet>>,
    wall_time_ms: f64,
}

fn enumerate(c: &Common, aggressive_prune: bool, expand_limit: Option<usize>) -> Result<()> {
    let l = source::load(&c.instance, parity(c))?;
    let o = oracle(c, &l);
    let start = Instant::now();
    let family = AwarenessFamily::compute(&o, &l.task, enumerate_options(aggressive_prune))?;
    let expanded = expand_limit.map(|limit| expand_sitaware(&family, &l.pool, limit));
    let report = EnumerateReport {
        instance: l.label.clone(),
        pool_size: l.pool.len(),
        task: l.task.sensors,
        gamma_task: family.gamma_task,
        s_reduced: family.s_reduced,
        family_size: family.len(),
        expanded_size: expanded.as_ref().map(Vec::len),
        sitaware_reduced: family.sitaware_reduced,
        expanded,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    #[derive(Serialize)]
    struct Row {
        family: &'static str,
        cardinality: usize,
        ids: String,
    }
    let rows: Vec<Row> = report
        .sitaware_reduced
        .iter()
        .map(|&s| ("reduced", s))
        .chain(report.expanded.iter().flatten().map(|&s| ("expanded", s)))
        .map(|(family, s)| Row {
            family,
            cardinality: s.len(),
            ids: join_ids(s),
        })
        .collect();
    emit(c, &report, &rows)
}

/// One trust cell of a solve, shaped like a row of the experiment table.
#[derive(Debug, Clone, Serialize)]
struct Cell {
    configuration: String,
    k_trust: usize,
    regime: String,
    family_size: Option<usize>,
    cardinality: Option<usize>,
    delta: Option<f64>,
    solution_ids: String,
    time_s: f64,
}

#[derive(Serialize)]
struct SolveReport {
    instance: String,
    k_trust: usize,
    gamma_pool: usize,
    gamma_task: usize,
    s_reduced: SensorSet,
    family_size: Option<usize>,
    cardinality: usize,
    solution: SolutionRecord,
    family_time_ms: f64,
}

struct Solved {
    family_size: Option<usize>,
    s_reduced: SensorSet,
    family_time_s: f64,
    record: SolutionRecord,
}

/// Builds the family only when the regime reads it.
fn solve_with(
    o: &GammaOracle,
    task: &Task,
    k: usize,
    family: &mut Option<(AwarenessFamily, f64)>,
    options: SolveOptions,
    aggressive_prune: bool,
) -> Result<Solved> {
    let gamma_pool = o.gamma(o.pool());
    let gamma_task = o.gamma(task.sensors);
    let needs_family = (1..=gamma_pool).contains(&k)
        && regime_for(k, gamma_task, gamma_pool) != Regime::NoTrustGreedy;
    if needs_family && family.is_none() {
        let start = Instant::now();
        let f = AwarenessFamily::compute(o, task, enumerate_options(aggressive_prune))?;
        *family = Some((f, start.elapsed().as_secs_f64()));
    }
    let (sol, family_size, family_time_s, s_reduced) =
        match family.as_ref().filter(|_| needs_family) {
            Some((f, t)) => (
                solve(o, task, f, TrustLevel(k), options)?,
                Some(f.len()),
                *t,
                f.s_reduced,
            ),
            None => {
                // the no-trust greedy never reads the family
                let empty = AwarenessFamily {
                    s_reduced: compute_s_reduced(o, task),
                    sitaware_reduced: Vec::new(),
                    gamma_task,
                };
                (
                    solve(o, task, &empty, TrustLevel(k), options)?,
                    None,
                    0.0,
                    empty.s_reduced,
                )
            }
        };
    Ok(Solved {
        family_size,
        s_reduced,
        family_time_s,
        record: sol.record(gamma_pool),
    })
}

fn cell(configuration: String, k: usize, s: &Solved) -> Cell {
    let r = &s.record;
    Cell {
        configuration,
        k_trust: k,
        regime: r.regime.as_str().into(),
        family_size: s.family_size,
        cardinality: Some(r.selected.len()),
        delta: if r.is_optimal {
            Some(1.0)
        } else {
            r.bound_delta
        },
        solution_ids: r
            .selected
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" "),
        time_s: r.wall_time_ms / 1e3 + s.family_time_s,
    }
}

fn solve_cmd(c: &Common, k_trust: Option<usize>, alt: bool, aggressive_prune: bool) -> Result<()> {
    let l = source::load(&c.instance, parity(c))?;
    let k = k_trust.or(l.k_trust).ok_or_else(|| {
        Error::Input(format!(
            "--k-trust is required for the built-in instance {}",
            l.label
        ))
    })?;
    let o = oracle(c, &l);
    let mut family = None;
    let s = solve_with(
        &o,
        &l.task,
        k,
        &mut family,
        SolveOptions { alt_heuristic: alt },
        aggressive_prune,
    )?;
    let row = cell(l.label.clone(), k, &s);
    let report = SolveReport {
        instance: l.label.clone(),
        k_trust: k,
        gamma_pool: o.gamma(o.pool()),
        gamma_task: o.gamma(l.task.sensors),
        s_reduced: s.s_reduced,
        family_size: s.family_size,
        cardinality: s.record.selected.len(),
        solution: s.record,
        family_time_ms: s.family_time_s * 1e3,
    };
    emit(c, &report, &[row])
}

struct GridRun {
    config: Option<u8>,
    level: Option<Level>,
    k_trust: Option<usize>,
    include_long: bool,
    alt_heuristic: bool,
    aggressive_prune: bool,
}

#[derive(Serialize)]
struct GridCell {
    level: Option<&'static str>,
    k_trust: usize,
    status: &'static str,
    regime: String,
    family_size: Option<usize>,
    cardinality: Option<usize>,
    delta: Option<f64>,
    selected: Option<Vec<usize>>,
    gamma_value: Option<usize>,
    time_s: f64,
}

#[derive(Serialize)]
struct GridConfigReport {
    id: u8,
    description: &'static str,
    generators: usize,
    task: SensorSet,
    gamma_task: usize,
    gamma_pool: usize,
    s_reduced: SensorSet,
    cells: Vec<GridCell>,
}

#[derive(Serialize)]
struct GridReport {
    case: &'static str,
    configurations: Vec<GridConfigReport>,
}

fn level_name(l: Level) -> &'static str {
    match l {
        Level::High => "high",
        Level::Mid => "mid",
        Level::None => "none",
    }
}

/// Trust levels ten below and ten above Γ(S_task), and Γ(pool).
fn level_k(l: Level, gamma_task: usize, gamma_pool: usize) -> usize {
    match l {
        Level::High => gamma_task.saturating_sub(10).max(1),
        Level::Mid => (gamma_task + 10).min(gamma_pool.saturating_sub(1)).max(1),
        Level::None => gamma_pool,
    }
}

fn grid(c: &Common, run: GridRun) -> Result<()> {
    let ids: Vec<u8> = match run.config {
        Some(id @ 1..=4) => vec![id],
        Some(id) => {
            return Err(Error::Input(format!(
                "--config must be 1, 2, 3 or 4, got {id}"
            )))
        }
        None => vec![1, 2, 3, 4],
    };
    let case = case118()?;
    let options = SolveOptions {
        alt_heuristic: run.alt_heuristic,
    };
    let mut configurations = Vec::new();
    let mut rows = Vec::new();
    for id in ids {
        let g = configuration_with(&case, &SwingParams::default(), id, parity(c))?;
        let o = GammaOracle::with_options(
            &g.system,
            &g.pool,
            OracleOptions {
                cache_cap: c.cache_cap,
                ..Default::default()
            },
        );
        let gamma_pool = o.gamma(o.pool());
        let gamma_task = o.gamma(g.task.sensors);
        let s_reduced = compute_s_reduced(&o, &g.task);
        let long = s_reduced.len() > LONG_REDUCED;
        let cells: Vec<(Option<Level>, usize)> = match (run.k_trust, run.level) {
            (Some(k), _) => vec![(None, k)],
            (None, Some(l)) => vec![(Some(l), level_k(l, gamma_task, gamma_pool))],
            (None, None) => [Level::High, Level::Mid, Level::None]
                .into_iter()
                .map(|l| (Some(l), level_k(l, gamma_task, gamma_pool)))
                .collect(),
        };
        let mut family = None;
        let mut out = Vec::new();
        for (level, k) in cells {
            let regime = regime_for(k, gamma_task, gamma_pool);
            let label = format!("cfg{id}");
            if long && regime != Regime::NoTrustGreedy && !run.include_long {
                out.push(GridCell {
                    level: level.map(level_name),
                    k_trust: k,
                    status: "skipped_long",
                    regime: regime.as_str().into(),
                    family_size: None,
                    cardinality: None,
                    delta: None,
                    selected: None,
                    gamma_value: None,
                    time_s: 0.0,
                });
                rows.push(Cell {
                    configuration: label,
                    k_trust: k,
                    regime: regime.as_str().into(),
                    family_size: None,
                    cardinality: None,
                    delta: None,
                    solution_ids: "skipped (--include-long)".into(),
                    time_s: 0.0,
                });
                continue;
            }
            let s = solve_with(&o, &g.task, k, &mut family, options, run.aggressive_prune)?;
            let row = cell(label, k, &s);
            out.push(GridCell {
                level: level.map(level_name),
                k_trust: k,
                status: "done",
                regime: row.regime.clone(),
                family_size: row.family_size,
                cardinality: row.cardinality,
                delta: row.delta,
                selected: Some(s.record.selected.clone()),
                gamma_value: Some(s.record.gamma_value),
                time_s: row.time_s,
            });
            rows.push(row);
        }
        configurations.push(GridConfigReport {
            id,
            description: g.description,
            generators: g.network.len(),
            task: g.task.sensors,
            gamma_task,
            gamma_pool,
            s_reduced,
            cells: out,
        });
    }
    emit(
        c,
        &GridReport {
            case: "case118",
            configurations,
        },
        &rows,
    )
}
