//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod support;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracecheck::cli::{self, Report};
use tracecheck::formula::{parse_formula, Atom, Formula};
use tracecheck::kripke::StateId;
use tracecheck::mc::{check, ltl_to_buchi, sat_states};
use tracecheck::pipeline::{run_pipeline, PipelineOptions, TraceSource};
use tracecheck::tracemodel::{build_model, parse_trace_str, ModelBuilder, TraceOptions};

use support::{eval_propositional, eval_word, random_path, random_sequences, random_state_formula, random_structure, render_trace, Oracle};

const TABLE1_LIMIT: Duration = Duration::from_secs(1);
const TABLE1_EXPECTED: [bool; 6] = [false, true, true, true, false, true];
const ORACLE_CASES: usize = 1000;
const ORACLE_MAX_STATES: usize = 4;
const ORACLE_MAX_TEMPORAL: usize = 2;
const ORACLE_LIMIT: Duration = Duration::from_secs(60);
const BUCHI_MAX_PREFIX: usize = 3;
const BUCHI_MAX_CYCLE: usize = 3;
const CORPORA: usize = 100;
const PIPELINE_TRANSITIONS: usize = 10_000;
const PIPELINE_LIMIT: Duration = Duration::from_secs(10);
const WITNESS_CASES: usize = 200;

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cli::run(std::iter::once("tracecheck").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn table1() -> Outcome {
    let (model, props) = (fixture("drone.json"), fixture("drone.ctl"));
    let start = Instant::now();
    let (code, out, err) = run_cli(&["check", "-m", model.to_str().unwrap(), "-p", props.to_str().unwrap(), "--json"]);
    let elapsed = start.elapsed();
    let report: Report = serde_json::from_str(&out).map_err(|e| format!("bad report ({e}): {out}{err}"))?;
    let got: Vec<bool> = report.rows.iter().map(|r| r.result).collect();
    ensure(got == TABLE1_EXPECTED, || format!("results {got:?}, expected {TABLE1_EXPECTED:?}"))?;
    ensure(code == 1, || format!("exit code {code}, expected 1"))?;
    ensure(elapsed < TABLE1_LIMIT, || format!("took {elapsed:?}"))?;
    let shown: Vec<&str> = got.iter().map(|b| if *b { "T" } else { "F" }).collect();
    Ok(format!("phi1..phi6 = {} in {:?} (limit {:?})", shown.join(","), elapsed, TABLE1_LIMIT))
}

fn fig6() -> Outcome {
    let text = fs::read_to_string(fixture("fig6.log")).unwrap();
    ensure(text.lines().count() == 30, || "fixture is not 30 lines".into())?;
    let parsed = parse_trace_str(&text, TraceOptions::default());
    ensure(parsed.diagnostics.is_empty(), || format!("diagnostics: {:?}", parsed.diagnostics))?;
    ensure(parsed.sequences.len() >= 2, || format!("{} sequences", parsed.sequences.len()))?;
    let find = |a: &str, b: &str| {
        parsed
            .sequences
            .iter()
            .find(|s| s.pairs().any(|(x, y)| x.as_str() == a && y.as_str() == b))
    };
    let left = find("TAKEOFF", "LEFT").ok_or("no (TAKEOFF, LEFT)")?;
    let right = find("TAKEOFF", "RIGHT").ok_or("no (TAKEOFF, RIGHT)")?;
    ensure(left.input("index_finger_left_frames__Tello_TEST") == Some(10), || "left frame input != 10".into())?;
    ensure(right.input("index_finger_right_frames__Tello_TEST") == Some(14), || "right frame input != 14".into())?;
    let k = build_model(&parsed.sequences, "current_state");
    let expected: BTreeSet<StateId> = ["TAKEOFF", "LEFT", "RIGHT"].into_iter().map(StateId::from).collect();
    ensure(k.states.is_superset(&expected), || format!("S = {:?}", k.states))?;
    ensure(k.transitions.len() == 2, || format!("|R| = {}", k.transitions.len()))?;
    Ok(format!(
        "{} sequences, S = {{{}}}, |R| = {}",
        parsed.sequences.len(),
        k.states.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "),
        k.transitions.len()
    ))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c71);
    let start = Instant::now();
    for case in 0..ORACLE_CASES {
        let k = random_structure(&mut rng, ORACLE_MAX_STATES);
        let f = random_state_formula(&mut rng, 4, ORACLE_MAX_TEMPORAL);
        let got: BTreeSet<StateId> = sat_states(&k, &f).map_err(|e| e.to_string())?.members;
        let oracle = Oracle::new(&k);
        let want: BTreeSet<StateId> = oracle.sat(&f).into_iter().map(|i| oracle.names[i].clone()).collect();
        ensure(got == want, || {
            format!(
                "case {case}: {f} on {}: checker {got:?}, oracle {want:?}",
                tracecheck::kripke::to_portable(&k)
            )
        })?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < ORACLE_LIMIT, || format!("took {elapsed:?}"))?;
    Ok(format!("{ORACLE_CASES}/{ORACLE_CASES} cases agree in {elapsed:?} (limit {ORACLE_LIMIT:?})"))
}

fn buchi() -> Outcome {
    let formulas = ["X p", "F p", "G p", "p U q", "F G p", "G F p"];
    let atoms = [Atom::new("p").unwrap(), Atom::new("q").unwrap()];
    // letters are bitmasks over (p, q)
    let words = |max_len: usize, min_len: usize| -> Vec<Vec<u8>> {
        let mut all = Vec::new();
        for len in min_len..=max_len {
            for code in 0..(1usize << (2 * len)) {
                all.push((0..len).map(|i| ((code >> (2 * i)) & 3) as u8).collect());
            }
        }
        all
    };
    let (prefixes, cycles) = (words(BUCHI_MAX_PREFIX, 0), words(BUCHI_MAX_CYCLE, 1));
    let mut checked = 0;
    for text in formulas {
        let psi = parse_formula(text).unwrap();
        let aut = ltl_to_buchi(&psi).map_err(|e| e.to_string())?;
        let letter_has = |l: &u8, a: &Atom| atoms.iter().position(|x| x == a).is_some_and(|i| l & (1 << i) != 0);
        for prefix in &prefixes {
            for cycle in &cycles {
                let by_automaton = aut.accepts_lasso(prefix, cycle, letter_has);
                let direct = eval_word(&psi, prefix, cycle, &|l, g| eval_propositional(g, &|a| letter_has(l, a)));
                ensure(by_automaton == direct, || {
                    format!("{text} on {prefix:?}({cycle:?})^w: automaton {by_automaton}, direct {direct}")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked}/{checked} lasso words agree over {} formulas", formulas.len()))
}

fn algorithm1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa1);
    for corpus in 0..CORPORA {
        let count = rng.gen_range(0..12);
        let states = rng.gen_range(1..8);
        let seqs = random_sequences(&mut rng, count, states, 6);
        let batch = build_model(&seqs, "current_state");

        let mut shuffled = seqs.clone();
        shuffled.shuffle(&mut rng);
        ensure(build_model(&shuffled, "current_state") == batch, || format!("corpus {corpus}: order dependent"))?;

        let mut builder = ModelBuilder::new("current_state");
        for s in &seqs {
            builder.add_sequence(s).unwrap();
        }
        ensure(builder.finalize() == batch, || format!("corpus {corpus}: incremental differs from batch"))?;

        let doubled: Vec<_> = seqs.iter().chain(seqs.iter()).cloned().collect();
        let again = build_model(&doubled, "current_state");
        ensure(again.transitions.len() == batch.transitions.len() && again == batch, || {
            format!("corpus {corpus}: repeated records changed the model")
        })?;
    }
    Ok(format!("{CORPORA}/{CORPORA} corpora: order independent, incremental = batch, repeats deduplicated"))
}

fn pipeline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9191);
    let mut seqs = Vec::new();
    let mut total = 0;
    while total < PIPELINE_TRANSITIONS {
        let mut batch = random_sequences(&mut rng, 1, 60, 20);
        let seq = batch.pop().unwrap();
        total += seq.transitions.len();
        seqs.push(seq);
    }
    let start = Instant::now();
    let single = vec![TraceSource::Inline {
        name: "all".into(),
        text: render_trace(&seqs),
    }];
    let quarter = seqs.len().div_ceil(4);
    let split: Vec<TraceSource> = seqs
        .chunks(quarter)
        .enumerate()
        .map(|(i, c)| TraceSource::Inline {
            name: format!("part{i}"),
            text: render_trace(c),
        })
        .collect();
    let one = run_pipeline(single, &[], PipelineOptions { jobs: 1, ..Default::default() }).map_err(|e| e.to_string())?;
    let four = run_pipeline(split, &[], PipelineOptions { jobs: 4, ..Default::default() }).map_err(|e| e.to_string())?;
    ensure(one.model.states == four.model.states, || "S differs between 1 and 4 sources".into())?;
    ensure(one.model.transitions == four.model.transitions, || "R differs between 1 and 4 sources".into())?;
    let ingested: usize = four.ingest_stats.iter().map(|s| s.transitions).sum();
    ensure(ingested == total, || format!("ingested {ingested} of {total} records"))?;

    // same comparison through the command line, --jobs 1 vs --jobs 4
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut paths = Vec::new();
    for (i, c) in seqs.chunks(quarter).enumerate() {
        let p = dir.path().join(format!("part{i}.log"));
        fs::write(&p, render_trace(c)).unwrap();
        paths.push(p.to_str().unwrap().to_string());
    }
    let props = dir.path().join("p.ctl");
    fs::write(&props, "reach: E(F current_state=S0)\nsafe: AG !current_state=S59\n").unwrap();
    let cli_report = |jobs: &str| {
        let mut args = vec!["run", "--jobs", jobs, "--close-deadlocks", "--json", "-p", props.to_str().unwrap(), "-t"];
        args.extend(paths.iter().map(String::as_str));
        run_cli(&args)
    };
    let (c1, r1, e1) = cli_report("1");
    let (c4, r4, _) = cli_report("4");
    ensure(c1 != 2 && c1 == c4 && r1 == r4, || format!("reports differ (exit {c1} vs {c4}): {e1}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < PIPELINE_LIMIT, || format!("took {elapsed:?}"))?;
    let w = four.wall_times;
    Ok(format!(
        "{total} transitions, |S| = {}, |R| = {}, jobs 1 = jobs 4; 4-way wall time ingest {} ms, build {} ms; total {elapsed:?} (limit {PIPELINE_LIMIT:?})",
        four.model.states.len(),
        four.model.transitions.len(),
        w.ingest_ms,
        w.build_ms
    ))
}

fn witnesses() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3117);
    let mut with_witness = 0;
    for case in 0..WITNESS_CASES {
        let k = random_structure(&mut rng, ORACLE_MAX_STATES);
        let psi = random_path(&mut rng, 3, &mut ORACLE_MAX_TEMPORAL.clone());
        let f = Formula::exists(psi.clone());
        let r = check(&k, &f, true).map_err(|e| e.to_string())?;
        let oracle = Oracle::new(&k);
        match (&r.witness, r.holds) {
            (Some(w), true) => {
                ensure(w.is_path_of(&k), || format!("case {case}: {w} is not a path"))?;
                ensure(Some(w.start()) == k.initial.iter().next(), || format!("case {case}: {w} starts elsewhere"))?;
                let idx = |s: &StateId| oracle.names.iter().position(|x| x == s).unwrap();
                let prefix: Vec<usize> = w.prefix.iter().map(idx).collect();
                let cycle: Vec<usize> = w.cycle.iter().map(idx).collect();
                ensure(oracle.path_holds(&psi, &prefix, &cycle), || {
                    format!("case {case}: {w} violates {psi} on {}", tracecheck::kripke::to_portable(&k))
                })?;
                with_witness += 1;
            }
            (None, false) => {}
            (w, holds) => return Err(format!("case {case}: holds = {holds} but witness = {w:?}")),
        }
    }
    Ok(format!("{with_witness} witnesses over {WITNESS_CASES} checks, all valid paths satisfying the formula"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 7] = [
        ("table1", table1),
        ("fig6-parse", fig6),
        ("oracle-equivalence", oracle_equivalence),
        ("buchi-correctness", buchi),
        ("algorithm1-properties", algorithm1),
        ("pipeline-determinism", pipeline),
        ("witness-soundness", witnesses),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match std::panic::catch_unwind(run) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
