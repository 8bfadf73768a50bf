//! End-to-end acceptance run: one PASS/FAIL line per criterion, each with
//! its time limit. Exits nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use leafwise::derham::{cohomology_dims, verify_decomposition_identities};
use leafwise::gysin::product_splitting_dims;
use leafwise::hochschild::{e1_to_e2, e2_dims, hh0_and_top, hh_dims_assuming_collapse, hp_dims};
use leafwise::model::{Component, ModeWindow, Model};
use leafwise::poisson::{verify_hom_can, verify_star_delta_identity};
use leafwise::specseq::verify_poisson_collapse;
use leafwise::symbols::{verify_traces_and_collapse, SymbolsConfig};
use leafwise::Scalar;

type Outcome = Result<String, String>;

/// Name, time limit in seconds, check.
type Criterion = (&'static str, Option<u64>, fn() -> Outcome);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn torus(alpha: &[&str]) -> Arc<Model> {
    Model::torus(alpha.iter().map(|a| Scalar::parse(a).unwrap()).collect(), None).unwrap()
}

fn t2() -> Arc<Model> {
    torus(&["1", "sqrt2"])
}

fn t3() -> Arc<Model> {
    torus(&["1", "sqrt2", "sqrt3"])
}

fn conic() -> Arc<Model> {
    Model::conic_dual(&t2()).unwrap()
}

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn torus_table() -> Outcome {
    let r = cohomology_dims(&t2(), Component::DF, &ModeWindow::modes(3)).map_err(err)?;
    for k in -1..=3 {
        for h in -1..=3 {
            let want = usize::from((0..=1).contains(&k) && (0..=1).contains(&h));
            let got = r.dims.at(k, h);
            ensure(got == want, format!("H^{{{k},{h}}} = {got}, expected {want}"))?;
        }
    }
    Ok("H^{k,h} = 1 on {0,1}^2 and 0 elsewhere at B = 3".into())
}

fn hochschild_dims() -> Outcome {
    let a = hh_dims_assuming_collapse(&t2(), 2).map_err(err)?;
    let b = hh_dims_assuming_collapse(&t3(), 2).map_err(err)?;
    ensure(a == [2, 6, 6, 2, 0], format!("n = 2: {a:?}"))?;
    ensure(b == [2, 8, 12, 8, 2, 0], format!("n = 3: {b:?}"))?;
    Ok(format!("n = 2: {:?}, n = 3: {:?}", &a[..4], &b[..5]))
}

fn identity_suites() -> Outcome {
    let one = Scalar::one();
    let so3 = Model::lie_frame(3, &[(1, 2, 3, one.clone()), (2, 3, 1, one.clone()), (3, 1, 2, one.clone())], &[3])
        .map_err(err)?;
    let heis = Model::lie_frame(3, &[(1, 2, 3, one.clone())], &[3]).map_err(err)?;
    for (name, m, boundary) in [("T^2", t2(), true), ("so(3)", so3, false), ("Heisenberg", heis, false)] {
        let r = verify_decomposition_identities(&m, 32, 1);
        let bad: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        ensure(bad.is_empty(), format!("{name}: {bad:?}"))?;
        ensure(r.boundary_vanishes == boundary, format!("{name}: boundary vanishes = {}", r.boundary_vanishes))?;
    }
    let broken = Model::lie_frame_unchecked(3, &[(1, 2, 3, one.clone()), (1, 3, 1, one)], &[3]).map_err(err)?;
    let r = verify_decomposition_identities(&broken, 8, 1);
    ensure(!r.all_passed(), "the corrupted Jacobi control passed")?;
    Ok("all identities hold on three models; corrupted Jacobi rejected".into())
}

fn star_duality() -> Outcome {
    let w = ModeWindow::new(2, -2, 2).map_err(err)?;
    let r = verify_star_delta_identity(&conic(), &w).map_err(err)?;
    let c = r.get("delta_F = (-1)^(r+1) *_F d_F *_F").ok_or("missing check")?;
    ensure(c.passed, format!("{:?}", c.counterexample))?;
    ensure(r.all_passed(), "another star or delta identity failed")?;
    Ok(format!("{} basis monomials", c.checked))
}

fn homology_triangle() -> Outcome {
    let w = ModeWindow::new(1, -2, 2).map_err(err)?;
    let r = verify_hom_can(&conic(), &w).map_err(err)?;
    for k in 0..=3 {
        for l in -1..=1 {
            let row = r.rows.iter().find(|x| x.k == k && x.l == l).ok_or(format!("no row ({k}, {l})"))?;
            ensure(row.agree, format!("(k, l) = ({k}, {l}): {row:?}"))?;
        }
    }
    ensure(r.all_agree && r.vanishing_outside, "disagreement or no vanishing for |l| > 1")?;
    let total: usize = r.rows.iter().map(|x| x.delta).sum();
    Ok(format!("{} cells agree, total dimension {total}", r.rows.len()))
}

fn spectral_collapse() -> Outcome {
    let w = ModeWindow::new(1, -2, 2).map_err(err)?;
    for k in 0..=3 {
        let r = verify_poisson_collapse(&conic(), k, &w).map_err(err)?;
        ensure(r.passed(), format!("k = {k}: {r:?}"))?;
    }
    Ok("single E^1 row, d_r = 0, limit = delta-homology for k = 0..3".into())
}

fn gysin_splitting() -> Outcome {
    for h in 0..=1 {
        let t = product_splitting_dims(&t2(), 1, h, &ModeWindow::modes(2)).map_err(err)?;
        ensure(t.all_passed(), format!("h = {h}: {t:?}"))?;
        ensure(t.short_exact == Some(true), format!("h = {h}: not short exact"))?;
        ensure(t.rows.iter().all(|r| r.direct == Some(r.predicted)), format!("h = {h}: direct dims missing"))?;
    }
    Ok("direct dims [1, 2, 1] match the splitting for h = 0, 1".into())
}

fn e1_bridge() -> Outcome {
    let r = e1_to_e2(&t2(), &ModeWindow::new(1, -2, 2).map_err(err)?).map_err(err)?;
    let closed = e2_dims(&t2(), 1).map_err(err)?;
    for c in &r.cells {
        ensure(c.e2 == c.predicted && c.predicted == closed.get(c.k, c.h), format!("cell {c:?}"))?;
    }
    ensure(r.agree, "report disagrees")?;
    Ok(format!("{} cells", r.cells.len()))
}

fn symbols_report() -> Result<leafwise::symbols::SymbolsReport, String> {
    verify_traces_and_collapse(&t2(), &SymbolsConfig { trials: 100, depth: 12, seed: 0, mode_bound: 2, corrupt: false })
        .map_err(err)
}

fn residue_traces() -> Outcome {
    let r = symbols_report()?;
    let c = r.get("trace property tau_pm([a, b]) = 0").ok_or("missing trace check")?;
    ensure(c.passed && c.checked >= 100, format!("{c:?}"))?;
    let hh0 = hh0_and_top(&t2(), 2).map_err(err)?.hh0;
    ensure(r.independence[0].rank == 2 && hh0 == 2 && r.traces_match_hh0, "trace space is not 2-dimensional")?;
    Ok(format!("{} pairs, rank(tau_+, tau_-) = 2 = hh0", c.checked))
}

fn collapse_certificate() -> Outcome {
    let r = symbols_report()?;
    let cob = r.get("Hochschild coboundary of i_D..i_D tau_pm vanishes (l <= 2)").ok_or("missing coboundary check")?;
    ensure(cob.passed, format!("{cob:?}"))?;
    let hh = hh_dims_assuming_collapse(&t2(), 2).map_err(err)?;
    for row in &r.independence {
        let want = 2 * binom(3, row.l);
        ensure(row.cocycles == want && row.rank == want && hh[row.l] == want, format!("{row:?}"))?;
    }
    ensure(r.collapse_certified, "certificate not set")?;
    let ranks: Vec<usize> = r.independence.iter().map(|x| x.rank).collect();
    Ok(format!("ranks {ranks:?}"))
}

fn periodic_cyclic() -> Outcome {
    let a = hp_dims(&t2()).map_err(err)?;
    let b = hp_dims(&t3()).map_err(err)?;
    ensure(a == (8, 8) && b == (16, 16), format!("{a:?}, {b:?}"))?;
    Ok(format!("{a:?}, {b:?}"))
}

fn run_all(model: &Path, out: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_leafwise"))
        .args(["run", "all", "--seed", "11", "--trials", "100", "--format", "markdown"])
        .arg("--model")
        .arg(model)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(err)?;
    ensure(o.status.success(), format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let model = dir.path().join("t2.json");
    std::fs::write(&model, r#"{"family": "kronecker_torus", "alpha": ["1", "sqrt2"]}"#).map_err(err)?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_all(&model, &a)?;
    run_all(&model, &b)?;
    let mut names: Vec<_> = std::fs::read_dir(&a).map_err(err)?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    ensure(names.len() == 14, format!("expected 14 report files, found {}", names.len()))?;
    for n in &names {
        let x = std::fs::read(a.join(n)).map_err(err)?;
        let y = std::fs::read(b.join(n)).map_err(err)?;
        ensure(x == y, format!("{} differs", n.to_string_lossy()))?;
    }
    Ok(format!("{} files byte-identical", names.len()))
}

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        ("torus cohomology table", Some(5), torus_table),
        ("Hochschild dimensions", Some(30), hochschild_dims),
        ("decomposition identity suites", Some(10), identity_suites),
        ("star duality for delta_F", None, star_duality),
        ("homogeneous homology triangle", None, homology_triangle),
        ("spectral sequence collapse", None, spectral_collapse),
        ("product circle bundle splitting", None, gysin_splitting),
        ("E^1 to E^2 bridge", None, e1_bridge),
        ("residue traces", Some(60), residue_traces),
        ("collapse certificate", None, collapse_certificate),
        ("periodic cyclic dimensions", None, periodic_cyclic),
        ("deterministic run all", None, determinism),
    ];
    let mut failures = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let res = f();
        let took = start.elapsed();
        let res = match (res, limit) {
            (Ok(_), Some(s)) if took > Duration::from_secs(s) => Err(format!("took {took:.2?}, limit {s} s")),
            (r, _) => r,
        };
        match res {
            Ok(detail) => println!("PASS {:>2}. {name} ({took:.2?}): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2}. {name} ({took:.2?}): {detail}", i + 1);
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
