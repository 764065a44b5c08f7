use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use soergel::bimodule::{split_check, split_form_check, BSWord, BimoduleError};
use soergel::cells::{distinguished_involutions, jring_verify, CellData, CellError, Status};
use soergel::coxeter::{CoxeterError, CoxeterMatrix, CoxeterSystem};
use soergel::exact::{Mat, NumberField, Scalar};
use soergel::hecke::{HeckeError, KLTable};
use soergel::laurent::LaurentPoly;
use soergel::perverse::{block_signature_check, ModelCache, PerverseError, SignatureReport};
use soergel::realization::{Realization, RealizationError};

use crate::report::{pass_word, Report};
use crate::{Command, Failure, Opts};

impl From<CoxeterError> for Failure {
    fn from(e: CoxeterError) -> Failure {
        match e {
            CoxeterError::CapExceeded(_) | CoxeterError::NeedsBound => Failure::Cap(e.to_string()),
            _ => Failure::Parse(e.to_string()),
        }
    }
}

impl From<HeckeError> for Failure {
    fn from(e: HeckeError) -> Failure {
        match e {
            HeckeError::Coxeter(c) => c.into(),
            HeckeError::Truncated(_) => Failure::Cap(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<PerverseError> for Failure {
    fn from(e: PerverseError) -> Failure {
        match e {
            PerverseError::Hecke(h) => h.into(),
            PerverseError::Coxeter(c) => c.into(),
            PerverseError::Cap { .. } | PerverseError::Realization(RealizationError::Infinite) => Failure::Cap(e.to_string()),
            PerverseError::ScalarCount { .. } | PerverseError::NoFactors => Failure::Parse(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<BimoduleError> for Failure {
    fn from(e: BimoduleError) -> Failure {
        match e {
            BimoduleError::WordTooLong(_) => Failure::Cap(e.to_string()),
            BimoduleError::BadLetter { .. } | BimoduleError::Parse(_) | BimoduleError::NotEndingIn(_) => Failure::Parse(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<CellError> for Failure {
    fn from(e: CellError) -> Failure {
        match e {
            CellError::Infinite => Failure::Cap(e.to_string()),
            _ => Failure::Other(e.to_string()),
        }
    }
}

impl From<RealizationError> for Failure {
    fn from(e: RealizationError) -> Failure {
        match e {
            RealizationError::Parse(_) => Failure::Parse(e.to_string()),
            _ => Failure::Cap(e.to_string()),
        }
    }
}

fn system(opts: &Opts) -> Result<CoxeterSystem, Failure> {
    let matrix = match (&opts.kind, &opts.matrix) {
        (Some(name), None) => CoxeterMatrix::preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(v) => CoxeterMatrix::from_json(&v)?,
                Err(_) => {
                    let rows: Result<Vec<Vec<u32>>, _> =
                        text.lines().filter(|l| !l.trim().is_empty()).map(|l| l.split_whitespace().map(str::parse).collect()).collect();
                    let rows = rows.map_err(|_| Failure::Parse(format!("{}: not a Coxeter matrix", path.display())))?;
                    let refs: Vec<&[u32]> = rows.iter().map(Vec::as_slice).collect();
                    CoxeterMatrix::from_ints(&refs)?
                }
            }
        }
        _ => return Err(Failure::Parse("give exactly one of --type or --matrix".into())),
    };
    Ok(CoxeterSystem::new(matrix))
}

fn kl_table(opts: &Opts, w: &CoxeterSystem) -> Result<KLTable, Failure> {
    if let Some(path) = opts.cache.as_ref().filter(|p| p.exists()) {
        return KLTable::load(path, w.matrix()).map_err(|e| Failure::Other(format!("{}: {e}", path.display())));
    }
    Ok(KLTable::for_system(w, opts.max_length)?)
}

fn need<'a>(v: &'a Option<String>, flag: &str) -> Result<&'a str, Failure> {
    v.as_deref().ok_or_else(|| Failure::Parse(format!("--{flag} is required")))
}

fn elem(kl: &KLTable, text: &str) -> Result<usize, Failure> {
    Ok(kl.table().parse(text)?)
}

fn scalars(field: &'static NumberField, text: &str) -> Result<Vec<Scalar>, Failure> {
    text.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| Scalar::parse(field, t).map_err(|e| Failure::Parse(format!("bad scalar `{t}`: {e}"))))
        .collect()
}

/// Lefschetz scalar tuples to run: the given (or all-ones) tuple, plus one
/// random positive tuple drawn from the seed.
fn scalar_runs(opts: &Opts, field: &'static NumberField, gaps: usize) -> Result<Vec<Vec<Scalar>>, Failure> {
    let first = match &opts.a {
        Some(t) => scalars(field, t)?,
        None => vec![field.one(); gaps],
    };
    if first.len() != gaps {
        return Err(Failure::Parse(format!("{gaps} Lefschetz scalars needed, got {}", first.len())));
    }
    if first.iter().any(|c| !c.is_positive()) {
        return Err(Failure::Parse("Lefschetz scalars must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random = (0..gaps).map(|_| &field.int(rng.gen_range(1..=9)) * &field.int(rng.gen_range(1..=4)).inv()).collect();
    Ok(vec![first, random])
}

pub fn run(cmd: &Command, opts: &Opts) -> Result<Report, Failure> {
    match cmd {
        Command::Blocksig { trials } => return blocksig(opts, *trials),
        Command::Splitcheck => return splitcheck(opts),
        _ => {}
    }
    let w = system(opts)?;
    let kl = kl_table(opts, &w)?;
    match cmd {
        Command::Kl => kl_row(opts, &kl),
        Command::Mu => mu(opts, &kl),
        Command::Unimodal => unimodal(opts, &kl),
        Command::Cells | Command::Afn | Command::Gamma | Command::Jcheck => cells(cmd, opts, &kl),
        Command::Decompose { bs } => decompose(opts, &kl, *bs),
        Command::Rhl => lefschetz(opts, &kl, false),
        Command::Rhr => lefschetz(opts, &kl, true),
        Command::RhrMulti => rhr_multi(opts, &kl),
        Command::Cache { action } => cache(opts, &kl, action),
        Command::Blocksig { .. } | Command::Splitcheck => unreachable!(),
    }
}

fn kl_row(opts: &Opts, kl: &KLTable) -> Result<Report, Failure> {
    let t = kl.table();
    let x = elem(kl, need(&opts.x, "x")?)?;
    let mut rep = Report::new(&["y", "h"]);
    rep.set("x", t.text(x));
    for y in 0..kl.len() {
        let h = kl.h(y, x);
        if h.is_zero() {
            continue;
        }
        rep.line(format!("h[{}, {}] = {h}", t.text(y), t.text(x)));
        rep.push(json!({"y": t.text(y), "h": h.to_string()}));
    }
    Ok(rep)
}

fn mu(opts: &Opts, kl: &KLTable) -> Result<Report, Failure> {
    let t = kl.table();
    let (x, y) = (elem(kl, need(&opts.x, "x")?)?, elem(kl, need(&opts.y, "y")?)?);
    let mut rep = Report::new(&["z", "mu"]);
    rep.set("x", t.text(x));
    rep.set("y", t.text(y));
    for (z, p) in kl.mu(x, y)? {
        rep.line(format!("mu[{}, {} -> {}] = {p}", t.text(x), t.text(y), t.text(z)));
        rep.push(json!({"z": t.text(z), "mu": p.to_string()}));
    }
    Ok(rep)
}

/// `(pass, {"a_m": n})` for one structure constant.
fn unimodal_entry(p: &LaurentPoly) -> (bool, serde_json::Map<String, Value>, String) {
    match p.quantum_decompose() {
        Ok(d) => {
            let mut m = serde_json::Map::new();
            let mut parts = Vec::new();
            for (k, c) in d.entries() {
                m.insert(format!("a_{k}"), json!(c.to_string().parse::<i64>().unwrap_or(0)));
                parts.push(format!("a_{k}: {c}"));
            }
            (d.is_nonnegative() && !d.mixed_parity, m, format!("{{{}}}", parts.join(", ")))
        }
        Err(_) => (false, serde_json::Map::new(), "{}".into()),
    }
}

fn unimodal(opts: &Opts, kl: &KLTable) -> Result<Report, Failure> {
    let t = kl.table();
    let mut rep = Report::new(&["x", "y", "z", "mu", "a_m", "pass"]);
    if !opts.exhaustive {
        let (x, y, z) = (elem(kl, need(&opts.x, "x")?)?, elem(kl, need(&opts.y, "y")?)?, elem(kl, need(&opts.z, "z")?)?);
        let p = kl.mu(x, y)?.remove(&z).unwrap_or_default();
        let (ok, am, text) = unimodal_entry(&p);
        rep.line(format!("mu = {p}"));
        rep.line(format!("a = {text}, {}", pass_word(ok)));
        rep.push(json!({"x": t.text(x), "y": t.text(y), "z": t.text(z), "mu": p.to_string(), "a_m": am, "pass": ok}));
        rep.ok = ok;
        return Ok(rep);
    }
    let n = kl.len();
    let rows: Vec<Vec<(usize, usize, LaurentPoly)>> = (0..n)
        .into_par_iter()
        .map(|x| {
            kl.products_row(x)
                .into_iter()
                .enumerate()
                .flat_map(|(y, prod)| prod.map(|p| p.terms().map(|(z, q)| (y, z, q.clone())).collect::<Vec<_>>()).unwrap_or_default())
                .collect()
        })
        .collect();
    let (mut checked, mut failures) = (0usize, 0usize);
    'scan: for (x, row) in rows.iter().enumerate() {
        for (y, z, p) in row {
            let (ok, am, _) = unimodal_entry(p);
            checked += 1;
            if !ok {
                failures += 1;
                rep.line(format!("FAIL {} {} {}: {p}", t.text(x), t.text(*y), t.text(*z)));
            }
            rep.push(json!({"x": t.text(x), "y": t.text(*y), "z": t.text(*z), "mu": p.to_string(), "a_m": am, "pass": ok}));
            if !ok && opts.fail_fast {
                break 'scan;
            }
        }
    }
    let triples = n * n * n;
    rep.set("triples", triples);
    rep.set("nonzero", checked);
    rep.set("failures", failures);
    rep.line(format!("{triples} triples, {checked} nonzero, {failures} failures"));
    rep.ok = failures == 0;
    Ok(rep)
}

fn cells(cmd: &Command, opts: &Opts, kl: &KLTable) -> Result<Report, Failure> {
    let t = kl.table();
    let data = CellData::compute(kl)?;
    match cmd {
        Command::Afn => {
            let mut rep = Report::new(&["element", "length", "a"]);
            for x in 0..t.len() {
                rep.line(format!("a({}) = {}", t.text(x), data.a[x]));
                rep.push(json!({"element": t.text(x), "length": t.length(x), "a": data.a[x]}));
            }
            Ok(rep)
        }
        Command::Cells => {
            let mut rep = Report::new(&["element", "left", "right", "two_sided"]);
            for (label, side) in [("left", &data.cells.left), ("right", &data.cells.right), ("two-sided", &data.cells.two_sided)] {
                rep.line(format!("{} {label} cells", side.cells.len()));
                for c in &side.cells {
                    rep.line(format!("  {{{}}}", c.iter().map(|&x| t.text(x)).collect::<Vec<_>>().join(", ")));
                }
            }
            let c = &data.cells;
            for x in 0..t.len() {
                rep.push(json!({"element": t.text(x), "left": c.left.cell_of[x], "right": c.right.cell_of[x], "two_sided": c.two_sided.cell_of[x]}));
            }
            Ok(rep)
        }
        Command::Gamma => {
            let (x, y) = (elem(kl, need(&opts.x, "x")?)?, elem(kl, need(&opts.y, "y")?)?);
            let zs: Vec<usize> = match &opts.z {
                Some(z) => vec![elem(kl, z)?],
                None => (0..t.len()).collect(),
            };
            let mut rep = Report::new(&["z", "gamma"]);
            rep.set("x", t.text(x));
            rep.set("y", t.text(y));
            for z in zs {
                let g = data.gamma.gamma(x, y, z);
                if g.is_zero() && opts.z.is_none() {
                    continue;
                }
                rep.line(format!("gamma[{}, {}, {}] = {g}", t.text(x), t.text(y), t.text(z)));
                rep.push(json!({"z": t.text(z), "gamma": g.to_string()}));
            }
            Ok(rep)
        }
        _ => {
            let mut rep = Report::new(&["check", "scope", "status", "witness"]);
            let dist = distinguished_involutions(t, &data.gamma, &data.cells)?;
            rep.set("distinguished", dist.iter().map(|&d| t.text(d)).collect::<Vec<_>>());
            for r in jring_verify(t, &data.products, &data.gamma, &data.cells, &dist) {
                let ok = r.status == Status::Pass;
                rep.ok &= ok;
                rep.line(format!("{} {} [{}]{}", pass_word(ok), r.check, r.scope, r.witness.as_ref().map(|w| format!(": {w}")).unwrap_or_default()));
                rep.push(serde_json::to_value(&r).expect("serializable"));
            }
            Ok(rep)
        }
    }
}

fn factors_of(opts: &Opts, kl: &KLTable) -> Result<Vec<usize>, Failure> {
    let mut out = vec![elem(kl, need(&opts.x, "x")?)?];
    if let Some(y) = &opts.y {
        out.push(elem(kl, y)?);
    }
    Ok(out)
}

fn decompose(opts: &Opts, kl: &KLTable, bs: bool) -> Result<Report, Failure> {
    let t = kl.table();
    let factors = if bs {
        let word = soergel::coxeter::parse_word(need(&opts.x, "x")?)?;
        kl.system().check(&word)?;
        word.iter().map(|&s| t.index_of_word(&[s]).expect("generator")).collect()
    } else {
        factors_of(opts, kl)?
    };
    let mut cache = ModelCache::new(kl)?;
    let d = cache.decompose(&factors)?;
    let expected = kl_multiplicities(kl, &factors)?;
    let ok = d.is_complete() && d.multiplicities() == expected;
    let mut rep = Report::new(&["z", "shift"]);
    rep.set("factors", factors.iter().map(|&x| t.text(x)).collect::<Vec<_>>());
    rep.set("pass", ok);
    let mut parts = Vec::new();
    for s in &d.summands {
        parts.push(format!("B_{}({:+})", t.text(s.z), s.shift));
        rep.push(json!({"z": t.text(s.z), "shift": s.shift}));
    }
    rep.line(parts.join(" + "));
    rep.line(format!("matches KL multiplicities: {}", pass_word(ok)));
    rep.ok = ok;
    Ok(rep)
}

fn kl_multiplicities(kl: &KLTable, factors: &[usize]) -> Result<std::collections::BTreeMap<usize, std::collections::BTreeMap<i32, usize>>, Failure> {
    Ok(soergel::perverse::expected_multiplicities(kl, factors)?
        .into_iter()
        .map(|(z, m)| (z, m.into_iter().map(|(e, c)| (-e, c)).collect()))
        .collect())
}

fn lefschetz(opts: &Opts, kl: &KLTable, rhr: bool) -> Result<Report, Failure> {
    let t = kl.table();
    let factors = vec![elem(kl, need(&opts.x, "x")?)?, elem(kl, need(&opts.y, "y")?)?];
    let mut cache = ModelCache::new(kl)?;
    let runs = scalar_runs(opts, cache.field(), 1)?;
    let cols: &[&'static str] = if rhr { &["a", "z", "d", "rank", "signature", "epsilon", "pass"] } else { &["a", "z", "d", "dim", "rank", "pass"] };
    let mut rep = Report::new(cols);
    rep.set("x", t.text(factors[0]));
    rep.set("y", t.text(factors[1]));
    rep.set("a", runs[0].iter().map(|c| c.to_string()).collect::<Vec<_>>());
    let mut runs_json = Vec::new();
    for a in runs {
        if rhr {
            let r = cache.check_rhr(&factors, &a)?;
            signature_lines(&mut rep, &r);
            runs_json.push(serde_json::to_value(&r).expect("serializable"));
        } else {
            let r = cache.check_rhl(&factors, &a)?;
            let a_text = r.a.join(",");
            rep.line(format!("a = ({a_text})"));
            for e in &r.results {
                rep.ok &= e.pass;
                rep.line(format!("  z = {}, d = {}: dim {}, rank {} {}", e.z, e.d, e.dim, e.rank, pass_word(e.pass)));
                rep.push(json!({"a": a_text, "z": e.z, "d": e.d, "dim": e.dim, "rank": e.rank, "pass": e.pass}));
            }
            runs_json.push(serde_json::to_value(&r).expect("serializable"));
        }
    }
    rep.set("runs", runs_json);
    rep.line(pass_word(rep.ok));
    Ok(rep)
}

fn signature_lines(rep: &mut Report, r: &SignatureReport) {
    let a_text = r.a.join(",");
    rep.line(format!("a = ({a_text})"));
    for e in &r.results {
        rep.ok &= e.pass;
        rep.line(format!(
            "  z = {}, d = {}: rank {}, signature {}, primitive {}/{}, epsilon {} {}",
            e.z,
            e.d,
            e.rank,
            e.signature,
            e.primitive_signature,
            e.primitive_dim,
            e.epsilon,
            pass_word(e.pass)
        ));
        rep.push(json!({"a": a_text, "z": e.z, "d": e.d, "rank": e.rank, "signature": e.signature, "epsilon": e.epsilon, "pass": e.pass}));
    }
}

fn rhr_multi(opts: &Opts, kl: &KLTable) -> Result<Report, Failure> {
    let t = kl.table();
    let list = need(&opts.x, "x")?;
    let factors: Vec<usize> = list.split([',', ';']).map(|w| elem(kl, w.trim())).collect::<Result<_, _>>()?;
    let mut cache = ModelCache::new(kl)?;
    let runs = scalar_runs(opts, cache.field(), factors.len().saturating_sub(1))?;
    let mut rep = Report::new(&["a", "z", "d", "rank", "signature", "epsilon", "pass"]);
    rep.set("factors", factors.iter().map(|&x| t.text(x)).collect::<Vec<_>>());
    for a in runs {
        let r = cache.check_rhr_multi(&factors, &a)?;
        signature_lines(&mut rep, &r);
    }
    // conjectural territory: the outcome is reported, and a failure is still a failure
    rep.line(pass_word(rep.ok));
    Ok(rep)
}

fn splitcheck(opts: &Opts) -> Result<Report, Failure> {
    let w = system(opts)?;
    let r = Realization::new(&w)?;
    let x = BSWord::parse(need(&opts.x, "x")?, r.rank())?;
    let s = *x.letters().last().ok_or_else(|| Failure::Parse("--x must be nonempty".into()))? as usize;
    let mut rep = Report::new(&["check", "checked", "pass"]);
    let m = split_check(&r, &x, s)?;
    rep.line(format!("splitting matrix on {x}: {} elements, {}", m.checked, pass_word(m.matrix_ok)));
    rep.push(json!({"check": "matrix", "checked": m.checked, "pass": m.matrix_ok}));
    rep.ok &= m.matrix_ok;
    if let Some(y) = &opts.y {
        let y = BSWord::parse(y, r.rank())?;
        let vars: Vec<_> = (0..r.rank()).map(|t| r.var(t)).collect();
        let f = split_form_check(&r, &x, &y, &vars)?;
        rep.line(format!("form formula with rho in the gap: {}", pass_word(f.literal_holds)));
        rep.line(format!("form formula with rho + s(rho) in the gap: {}", pass_word(f.corrected_holds)));
        rep.push(json!({"check": "form_literal", "checked": f.checked, "pass": f.literal_holds}));
        rep.push(json!({"check": "form_corrected", "checked": f.checked, "pass": f.corrected_holds}));
        // the literal reading is known to fail on some words; only the corrected one gates the exit code
        rep.ok &= f.corrected_holds;
    }
    Ok(rep)
}

fn random_symmetric(rng: &mut ChaCha8Rng, f: &'static NumberField, n: usize) -> Mat {
    let mut m = Mat::zeros(f, n, n);
    for i in 0..n {
        for j in i..n {
            let v = f.int(rng.gen_range(-5..=5));
            m[(i, j)] = v.clone();
            m[(j, i)] = v;
        }
    }
    m
}

fn blocksig(opts: &Opts, trials: usize) -> Result<Report, Failure> {
    let f = NumberField::rationals();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rep = Report::new(&["trial", "n", "two_block", "three_block", "q_signature", "pass"]);
    let mut trial = 0;
    while trial < trials {
        let n = rng.gen_range(1..=6);
        let r = random_symmetric(&mut rng, f, n);
        if r.determinant().is_zero() {
            continue;
        }
        let m = rng.gen_range(0..=3);
        let q = random_symmetric(&mut rng, f, m);
        let b = block_signature_check(&r, &q).map_err(|e| Failure::Other(e.to_string()))?;
        rep.ok &= b.pass;
        rep.push(json!({"trial": trial, "n": n, "two_block": b.two_block, "three_block": b.three_block, "q_signature": b.q_signature, "pass": b.pass}));
        if !b.pass {
            rep.line(format!("trial {trial}: FAIL (n = {n})"));
        }
        trial += 1;
    }
    rep.line(format!("{trials} trials: {}", pass_word(rep.ok)));
    Ok(rep)
}

fn cache(opts: &Opts, kl: &KLTable, action: &str) -> Result<Report, Failure> {
    let path = opts.cache.as_ref().ok_or_else(|| Failure::Parse("--cache FILE is required".into()))?;
    let mut rep = Report::new(&[]);
    match action {
        "save" => {
            kl.save(path).map_err(|e| Failure::Other(e.to_string()))?;
            rep.line(format!("saved {} rows to {}", kl.len(), path.display()));
        }
        "load" => {
            let loaded = KLTable::load(path, kl.system().matrix()).map_err(|e| Failure::Other(e.to_string()))?;
            let fresh = KLTable::for_system(kl.system(), opts.max_length)?;
            let same = loaded.len() == fresh.len() && (0..fresh.len()).all(|x| (0..fresh.len()).all(|y| loaded.h(y, x) == fresh.h(y, x)));
            rep.ok = same;
            rep.line(format!("loaded {} rows; agrees with a fresh computation: {}", loaded.len(), pass_word(same)));
        }
        _ => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::Other(e.to_string()))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Parse(e.to_string()))?;
            for key in ["version", "coxeter", "max_length", "complete"] {
                rep.set(key, v.get(key).cloned().unwrap_or(Value::Null));
            }
            let rows = v.get("rows").and_then(Value::as_object).map_or(0, |r| r.len());
            rep.set("rows", rows);
            rep.line(format!("version {}, {rows} rows, complete: {}", v["version"], v["complete"]));
        }
    }
    Ok(rep)
}
