//! `eqrel`: command-line front end. Every subcommand prints a short summary
//! and, with `--json-out`, writes a self-contained result document carrying
//! the SHA-256 of each input file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eqrel::amalgam::{amalgamate, default_rule, AmalgamProblem, AmalgamRule};
use eqrel::eppa::{
    canonical_failure_instance, color_expand, eppa_search, orderless_analogue, permorphism_search, verify_certificate, verify_eppa_failure,
    EppaCertificate, PartialMap,
};
use eqrel::generic::{
    check_extension_property, enumerate_members, sample_one_point_extension, saturate_with, EnumerationLimits, Realization,
};
use eqrel::iso::{copies, embeddings, first_embedding, Constraints};
use eqrel::json::{self, StructureDoc};
use eqrel::ramsey::{build_witness_b, check_no_mono, e1_classes_convex, enumeration_coloring, forbidden_triple_scan, verify_z4, z4_find};
use eqrel::{validate, ClassSpec, Error, FinStructure};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "eqrel", version, about = "Finite structures with equivalence relations on n-subsets")]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the result document here.
    #[arg(long, global = true)]
    json_out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct SpecArgs {
    /// Class spec as JSON (`{"ordered_arities": [...], "max_arity": k}`).
    #[arg(long, conflicts_with_all = ["ordered", "max_arity", "point_order"])]
    spec: Option<PathBuf>,
    /// Ordered arities, comma separated.
    #[arg(long, value_delimiter = ',')]
    ordered: Option<Vec<usize>>,
    #[arg(long)]
    max_arity: Option<usize>,
    /// Require a linear order on points.
    #[arg(long)]
    point_order: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    K0,
    Kp,
}

#[derive(Clone, Copy, ValueEnum)]
enum RealizationArg {
    Reuse,
    Finest,
}

#[derive(Subcommand)]
enum Command {
    /// Check a structure document against the class axioms.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Decide isomorphism of two structures.
    Iso {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// List embeddings of A into C.
    Embed {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        c: PathBuf,
        /// Embeddings to include in the document.
        #[arg(long, default_value_t = 100)]
        limit: usize,
    },
    /// Amalgamate B1 and B2 over A (jointly embed them without --a).
    Amalgamate {
        #[arg(long)]
        a: Option<PathBuf>,
        #[arg(long)]
        b1: PathBuf,
        #[arg(long)]
        b2: PathBuf,
        /// Images of A's points in B1, comma separated.
        #[arg(long, value_delimiter = ',')]
        glue1: Vec<usize>,
        /// Images of A's points in B2, comma separated.
        #[arg(long, value_delimiter = ',')]
        glue2: Vec<usize>,
        #[arg(long, value_enum)]
        rule: Option<RuleArg>,
    },
    /// Build a k-saturated approximation of the generic structure.
    Generic {
        #[command(flatten)]
        spec: SpecArgs,
        /// Start from this structure instead of the empty one.
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        k: usize,
        #[arg(long, default_value_t = 200)]
        budget: usize,
        #[arg(long, value_enum, default_value = "reuse")]
        realization: RealizationArg,
        #[arg(long, default_value_t = 8)]
        candidates: usize,
    },
    /// Report one-point extensions over copies of size < k that are missing.
    CheckEp {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        k: usize,
    },
    /// Enumerate members of a given size up to isomorphism.
    Enumerate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        size: usize,
    },
    /// Search for an extension where given partial isomorphisms become automorphisms.
    Eppa {
        /// Orderless structure; its classes are colored one color each.
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON list of `{"pairs": [[x, y], ...], "chi": {"n": [..]}}`.
        #[arg(long)]
        maps: PathBuf,
        /// Largest extension size (default |A| + 6).
        #[arg(long)]
        bound: Option<usize>,
        /// Allow color permutations given by each map's chi.
        #[arg(long)]
        permorphism: bool,
    },
    /// Certify that the order witness map extends to no automorphism.
    EppaFail {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Points allowed beyond the 3n witness points.
        #[arg(long, default_value_t = 8)]
        bound: usize,
        /// Run the orderless counterpart instead, which should extend.
        #[arg(long)]
        orderless: bool,
    },
    /// Color copies of the Ramsey witness pattern in generated structures.
    RamseyDemo {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Size of each generated C containing the witness.
        #[arg(long, default_value_t = 10)]
        csize: usize,
        #[arg(long, default_value_t = 5)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        enumerations: usize,
    },
    /// Compare convexity of E_1-classes with the forbidden-triple scan.
    Convexity {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Search for increasing sequences of type Z/4Z.
    Z4 {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        limit: usize,
    },
}

/// Result of one command: document body, summary lines, and verdict.
struct Outcome {
    verdict: bool,
    summary: Vec<String>,
    result: Value,
}

struct Inputs(Vec<Value>);

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<Vec<u8>, Error> {
        let bytes = std::fs::read(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.0.push(json!({ "path": path.display().to_string(), "sha256": hex }));
        Ok(bytes)
    }

    fn structure(&mut self, path: &Path) -> Result<FinStructure, Error> {
        let bytes = self.read(path)?;
        json::decode(&bytes, None)
    }
}

impl SpecArgs {
    fn resolve(&self, inputs: &mut Inputs, default: ClassSpec) -> Result<ClassSpec, Error> {
        if let Some(path) = &self.spec {
            return Ok(serde_json::from_slice(&inputs.read(path)?)?);
        }
        if self.ordered.is_none() && self.max_arity.is_none() && !self.point_order {
            return Ok(default);
        }
        let ordered = self.ordered.clone().unwrap_or_default();
        let max_arity = self.max_arity.unwrap_or_else(|| ordered.iter().copied().max().unwrap_or(0).max(default.max_arity()));
        ClassSpec::new(ordered, max_arity, self.point_order)
    }
}

fn doc(s: &FinStructure) -> Value {
    serde_json::to_value(StructureDoc::from(s)).expect("structure documents serialize")
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn run(cmd: &Command, seed: u64, inputs: &mut Inputs) -> Result<Outcome, Error> {
    match cmd {
        Command::Validate { input } => {
            let s = inputs.structure(input)?;
            let report = validate(&s, s.spec());
            let summary = if report.ok {
                vec![format!("valid: {} points", s.size())]
            } else {
                report.violations.iter().map(|v| format!("violation: {v:?}")).collect()
            };
            Ok(Outcome { verdict: report.ok, summary, result: serde_json::to_value(&report)? })
        }
        Command::Iso { a, b } => {
            let (a, b) = (inputs.structure(a)?, inputs.structure(b)?);
            let map = if a.size() == b.size() { first_embedding(&a, &b, &Constraints::default()) } else { None };
            let line = match &map {
                Some(m) => format!("isomorphic via {m:?}"),
                None => "not isomorphic".into(),
            };
            Ok(Outcome { verdict: map.is_some(), summary: vec![line], result: json!({ "isomorphic": map.is_some(), "map": map }) })
        }
        Command::Embed { a, c, limit } => {
            let (a, c) = (inputs.structure(a)?, inputs.structure(c)?);
            let all = embeddings(&a, &c);
            let n_copies = copies(&a, &c).len();
            let shown: Vec<&Vec<usize>> = all.iter().take(*limit).collect();
            Ok(Outcome {
                verdict: !all.is_empty(),
                summary: vec![format!("{} embeddings, {n_copies} copies", all.len())],
                result: json!({ "embeddings": all.len(), "copies": n_copies, "listed": shown }),
            })
        }
        Command::Amalgamate { a, b1, b2, glue1, glue2, rule } => {
            let b1 = inputs.structure(b1)?;
            let b2 = inputs.structure(b2)?;
            let problem = match a {
                Some(a) => AmalgamProblem { a: inputs.structure(a)?, b1, b2, glue1: glue1.clone(), glue2: glue2.clone() },
                None if glue1.is_empty() && glue2.is_empty() => AmalgamProblem::joint(b1, b2),
                None => return Err(Error::Input("glue maps given without --a".into())),
            };
            let rule = match rule {
                Some(RuleArg::K0) => AmalgamRule::K0,
                Some(RuleArg::Kp) => AmalgamRule::Kp,
                None => default_rule(problem.b1.spec()),
            };
            let am = amalgamate(&problem, rule)?;
            Ok(Outcome {
                verdict: true,
                summary: vec![format!("amalgam with {} points ({rule:?})", am.structure.size())],
                result: json!({ "rule": rule, "structure": doc(&am.structure), "embed1": am.embed1, "embed2": am.embed2 }),
            })
        }
        Command::Generic { spec, from, k, budget, realization, candidates } => {
            let start = match from {
                Some(p) => inputs.structure(p)?,
                None => FinStructure::empty(spec.resolve(inputs, ClassSpec::kp([3], 3)?)?),
            };
            let how = match realization {
                RealizationArg::Reuse => Realization::Reuse { seed, candidates: *candidates },
                RealizationArg::Finest => Realization::Finest(default_rule(start.spec())),
            };
            let g = saturate_with(&start, *k, *budget, how)?;
            let line = match g.saturation_level {
                Some(l) => format!("certified {l}-saturated with {} points", g.structure.size()),
                None => format!("budget exhausted at {} points, {} extensions missing", g.structure.size(), g.missing.len()),
            };
            Ok(Outcome {
                verdict: g.is_certified(),
                summary: vec![line],
                result: json!({
                    "k": k,
                    "budget": budget,
                    "saturation_level": g.saturation_level,
                    "missing": g.missing,
                    "build_log": g.build_log,
                    "structure": doc(&g.structure),
                }),
            })
        }
        Command::CheckEp { input, k } => {
            let s = inputs.structure(input)?;
            let missing = check_extension_property(&s, *k);
            Ok(Outcome {
                verdict: missing.is_empty(),
                summary: vec![format!("{} missing one-point extensions at k = {k}", missing.len())],
                result: json!({ "k": k, "missing": missing }),
            })
        }
        Command::Enumerate { spec, size } => {
            let spec = spec.resolve(inputs, ClassSpec::k0(3))?;
            let members = enumerate_members(&spec, *size, EnumerationLimits::default())?;
            Ok(Outcome {
                verdict: true,
                summary: vec![format!("{} isomorphism types of size {size}", members.len())],
                result: json!({ "size": size, "count": members.len(), "members": members.iter().map(doc).collect::<Vec<_>>() }),
            })
        }
        Command::Eppa { input, maps, bound, permorphism } => {
            let a = color_expand(&inputs.structure(input)?)?;
            let maps: Vec<PartialMap> = serde_json::from_slice(&inputs.read(maps)?)?;
            let bound = bound.unwrap_or(a.size() + 6);
            let cert = if *permorphism { permorphism_search(&a, &maps, bound)? } else { eppa_search(&a, &maps, bound)? };
            let verified = verify_certificate(&a, &maps, &cert)?;
            let (line, result) = match &cert {
                EppaCertificate::Found { structure, extensions } => (
                    format!("found an extension with {} points (re-verified: {verified})", structure.size()),
                    json!({
                        "status": "found",
                        "verified": verified,
                        "structure": doc(structure.base()),
                        "colors": structure.colors(),
                        "palette": structure.palette(),
                        "extensions": extensions,
                    }),
                ),
                EppaCertificate::Exhausted { bound } => {
                    (format!("no extension with at most {bound} points"), json!({ "status": "exhausted", "bound": bound }))
                }
                EppaCertificate::Refuted { reason } => (format!("refuted: {reason}"), json!({ "status": "refuted", "reason": reason })),
            };
            Ok(Outcome { verdict: cert.is_found() && verified, summary: vec![line], result })
        }
        Command::EppaFail { spec, n, bound, orderless } => {
            if *orderless {
                let max_arity = spec.max_arity.unwrap_or(*n);
                let cert = orderless_analogue(max_arity, *n, 3 * n + bound)?;
                let found = cert.is_found();
                let result = match &cert {
                    EppaCertificate::Found { structure, extensions } => {
                        json!({ "status": "found", "structure": doc(structure.base()), "extensions": extensions })
                    }
                    other => json!({ "status": format!("{other:?}") }),
                };
                let line = if found { "orderless witness map extends to an automorphism" } else { "orderless witness map did not extend" };
                return Ok(Outcome { verdict: found, summary: vec![line.into()], result });
            }
            let spec = spec.resolve(inputs, ClassSpec::kp([*n], *n)?)?;
            let (m, witness) = canonical_failure_instance(&spec, *n)?;
            let fail = verify_eppa_failure(&m, &witness, *bound)?;
            let line = format!(
                "{}: {} substructures, {} automorphisms checked (rigidity {}, no extension {})",
                if fail.certified() { "failure certified" } else { "failure NOT certified" },
                fail.substructures,
                fail.automorphisms_checked,
                fail.analytic,
                fail.exhaustive
            );
            Ok(Outcome { verdict: fail.certified(), summary: vec![line], result: json!({ "failure": fail, "structure": doc(&m) }) })
        }
        Command::RamseyDemo { spec, n, csize, count, enumerations } => {
            let default = if *n == 1 { ClassSpec::k0(2).with_point_order() } else { ClassSpec::kp([*n], 2 * n)? };
            let spec = spec.resolve(inputs, default)?;
            let w = build_witness_b(&spec, *n)?;
            if *csize < w.structure.size() {
                return Err(Error::Input(format!("--csize must be at least {}", w.structure.size())));
            }
            let mut r = rng(seed);
            let mut verdicts = Vec::new();
            let mut all_ok = true;
            let mut summary = Vec::new();
            for i in 0..*count {
                let mut c = w.structure.clone();
                while c.size() < *csize {
                    c = sample_one_point_extension(&c, &mut r);
                }
                let k = c.class_count(2 * n) as u32;
                let mut enums: Vec<Vec<u32>> = vec![(0..k).collect(), (0..k).rev().collect()];
                while enums.len() < *enumerations {
                    let mut e: Vec<u32> = (0..k).collect();
                    e.shuffle(&mut r);
                    enums.push(e);
                }
                enums.truncate(*enumerations);
                let mut runs = Vec::new();
                for en in &enums {
                    let coloring = enumeration_coloring(&c, &w.pattern, *n, en)?;
                    let verdict = check_no_mono(&c, &w, &coloring)?;
                    all_ok &= verdict.no_monochromatic_copy();
                    runs.push(json!({
                        "enumeration": en,
                        "copies": coloring.colors.len(),
                        "red": coloring.red_count(),
                        "embeddings_checked": verdict.embeddings_checked,
                        "no_monochromatic_copy": verdict.no_monochromatic_copy(),
                        "violation": verdict.violation,
                    }));
                }
                let ok = runs.iter().all(|r| r["no_monochromatic_copy"] == true);
                summary.push(format!("C{i}: {} points, {} enumerations, no monochromatic B-copy: {ok}", c.size(), runs.len()));
                verdicts.push(json!({ "structure": doc(&c), "runs": runs }));
            }
            Ok(Outcome { verdict: all_ok, summary, result: json!({ "n": n, "witness": doc(&w.structure), "verdicts": verdicts }) })
        }
        Command::Convexity { input } => {
            let s = inputs.structure(input)?;
            let triples = forbidden_triple_scan(&s)?;
            let convex = e1_classes_convex(&s)?;
            let agree = convex == triples.is_empty();
            Ok(Outcome {
                verdict: convex && agree,
                summary: vec![format!("E1-classes convex: {convex}; forbidden triples: {}", triples.len())],
                result: json!({ "convex": convex, "forbidden_triples": triples, "consistent": agree }),
            })
        }
        Command::Z4 { input, n, limit } => {
            let s = inputs.structure(input)?;
            let found = z4_find(&s, *n, None, *limit)?;
            let verified = found.iter().all(|q| verify_z4(&s, q, None));
            Ok(Outcome {
                verdict: !found.is_empty() && verified,
                summary: vec![format!("{} Z/4Z-increasing sequences found (re-verified: {verified})", found.len())],
                result: json!({ "n": n, "sequences": found, "verified": verified }),
            })
        }
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Validate { .. } => "validate",
        Command::Iso { .. } => "iso",
        Command::Embed { .. } => "embed",
        Command::Amalgamate { .. } => "amalgamate",
        Command::Generic { .. } => "generic",
        Command::CheckEp { .. } => "check-ep",
        Command::Enumerate { .. } => "enumerate",
        Command::Eppa { .. } => "eppa",
        Command::EppaFail { .. } => "eppa-fail",
        Command::RamseyDemo { .. } => "ramsey-demo",
        Command::Convexity { .. } => "convexity",
        Command::Z4 { .. } => "z4",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let mut inputs = Inputs(Vec::new());
    let outcome = match run(&cli.command, cli.seed, &mut inputs) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    for line in &outcome.summary {
        println!("{line}");
    }
    if let Some(path) = &cli.json_out {
        let document = json!({
            "command": command_name(&cli.command),
            "version": env!("CARGO_PKG_VERSION"),
            "seed": cli.seed,
            "argv": std::env::args().skip(1).collect::<Vec<_>>(),
            "inputs": inputs.0,
            "verdict": outcome.verdict,
            "result": outcome.result,
        });
        let mut text = serde_json::to_string_pretty(&document).expect("documents serialize");
        text.push('\n');
        if let Err(e) = std::fs::write(path, text) {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    if outcome.verdict {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    }
}
