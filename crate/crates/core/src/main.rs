use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use isocodec::bits::BitString;
use isocodec::coset::{canonical_rep, normal_form, CosetIndexing};
use isocodec::cost::{BlockedParams, CompiledCosets, CosetSpace, CostModel, Description, OrbitSampler, C_MACHINE};
use isocodec::error::{Error, Result};
use isocodec::flat::{build_scheme, max_entropy};
use isocodec::fq::{gl_order, gl_rank, gl_unrank, MatrixFq};
use isocodec::group::{format_generator_list, parse_generator_list, PermGroup};
use isocodec::iso::{IsoInstance, Kind, OrbitTable, UniverseElement};
use isocodec::perm::Permutation;
use isocodec::reduction::{
    aut_generators, decide, default_block, derive_seed, log_orbit_overestimate, reduce, run_experiment, write_csv,
    AutStrategy, DecideConfig, ExperimentConfig, Mode, DEFAULT_BUDGET,
};

const FORMATS: &str = "\
Indices are 1-based unless --zero-based is given.

Text formats (a FILE argument of '-' reads stdin):
  permutation     space-separated 1-based images, e.g. \"3 1 2\"
  generator list  header \"n k\", then k permutation lines
  matrix          header \"rows cols q\", then rows of residues mod q
  graph           \"n\", then n rows of n adjacency bits
  linear code     a matrix (generator matrix, full row rank)
  subgroup        a generator list
  matrix space    \"d\", then d n-by-n matrices
  instance        kind line (graph | linear-code | perm-group-conjugacy |
                  matrix-subspace), object, blank line, object
  description     one line: codec params-bits index-bits index
                  (params-bits is '-' when empty; index in decimal)
  experiment      key=value lines: instance, random_graph_pairs, n,
                  pair_seed, t, b, seeds, mode, strategy, budget, c_machine

Exit codes: 0 success, 1 usage or input error, 2 invariant violation.";

#[derive(Parser)]
#[command(name = "isocodec", version, about = "Coset codecs, group normal forms and the entropy-gap isomorphism reduction", after_help = FORMATS)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Copy)]
struct Base {
    /// Read and print 0-based indices.
    #[arg(long)]
    zero_based: bool,
}

impl Base {
    fn show(&self, k: &BigUint) -> BigUint {
        if self.zero_based {
            k.clone()
        } else {
            k + 1u8
        }
    }

    fn take(&self, k: &BigUint) -> Result<BigUint> {
        if self.zero_based {
            Ok(k.clone())
        } else if k.is_zero() {
            Err(domain("indices are 1-based; 0 is not an index"))
        } else {
            Ok(k - 1u8)
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Rank of a permutation in S_n, or of its coset in H/Γ.
    Rank {
        #[arg(long)]
        perm: String,
        /// Generator list of H (coset rank).
        #[arg(long, requires = "gamma")]
        h: Option<PathBuf>,
        /// Generator list of Γ (coset rank).
        #[arg(long, requires = "h")]
        gamma: Option<PathBuf>,
        #[command(flatten)]
        base: Base,
    },
    /// Permutation of a given rank in S_n, or canonical coset representative.
    Unrank {
        #[arg(long, required_unless_present = "h")]
        n: Option<usize>,
        #[arg(long)]
        k: BigUint,
        #[arg(long, requires = "gamma")]
        h: Option<PathBuf>,
        #[arg(long, requires = "h")]
        gamma: Option<PathBuf>,
        #[command(flatten)]
        base: Base,
    },
    /// Lexicographically least element of the coset perm·Γ.
    Canonical {
        #[arg(long)]
        perm: String,
        #[arg(long)]
        gamma: PathBuf,
    },
    /// Normal-form generator list of a subgroup.
    NormalForm { file: PathBuf },
    /// Rank of an invertible matrix in GL_n(F_q).
    GlRank {
        file: PathBuf,
        #[command(flatten)]
        base: Base,
    },
    /// Matrix of a given rank in GL_n(F_q).
    GlUnrank {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: u64,
        #[arg(long)]
        k: BigUint,
        #[command(flatten)]
        base: Base,
    },
    /// |GL_n(F_q)|.
    GlOrder {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: u64,
    },
    /// Reduced row echelon form.
    Rref { file: PathBuf },
    /// Index of an isomorphic copy of an object.
    Encode {
        #[arg(long)]
        kind: Kind,
        /// The base object.
        #[arg(long)]
        object: PathBuf,
        /// The copy to encode.
        #[arg(long)]
        copy: PathBuf,
        #[command(flatten)]
        codec: CodecArgs,
        #[command(flatten)]
        base: Base,
    },
    /// Isomorphic copy of an object with a given index.
    Decode {
        #[arg(long)]
        kind: Kind,
        #[arg(long)]
        object: PathBuf,
        #[arg(long)]
        index: BigUint,
        #[command(flatten)]
        codec: CodecArgs,
        #[command(flatten)]
        base: Base,
    },
    /// Description cost of a bit string, or the counting audit.
    Cost {
        /// File holding the bit string ('0'/'1' characters).
        #[arg(required_unless_present = "audit")]
        input: Option<PathBuf>,
        /// Description files to consider.
        #[arg(long)]
        hint: Vec<PathBuf>,
        #[arg(long, default_value_t = C_MACHINE)]
        c_machine: usize,
        /// Run the counting audit for cost bound C.
        #[arg(long, value_name = "C")]
        audit: Option<usize>,
        /// String length for the audit.
        #[arg(long, default_value_t = 64)]
        ell: usize,
    },
    /// Draw the reduction's samples for an instance.
    Reduce {
        instance: PathBuf,
        #[arg(long)]
        t: usize,
        /// Block size; default ⌈√t⌉.
        #[arg(long)]
        b: Option<usize>,
        /// Entropy estimate; computed from the instance when absent.
        #[arg(long)]
        s_tilde: Option<f64>,
        #[arg(long)]
        seed: u64,
    },
    /// Decide an isomorphism instance.
    Decide {
        instance: PathBuf,
        #[arg(long, default_value = "zero-error")]
        mode: Mode,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1024)]
        t: usize,
        #[arg(long)]
        b: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long, default_value = "sampling")]
        strategy: AutStrategy,
        #[arg(long, default_value_t = C_MACHINE)]
        c_machine: usize,
        /// Print the decision trace to stderr.
        #[arg(long)]
        verbose: bool,
    },
    /// Run an experiment sweep and print CSV.
    Experiment {
        config: PathBuf,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CodecArgs {
    /// "coset" (exact orbit indexing) or "flat" (hash encoding; needs --seed).
    #[arg(long, default_value = "coset")]
    codec: String,
    #[arg(long)]
    seed: Option<u64>,
}

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn read_input(path: &Path) -> Result<String> {
    let mut s = String::new();
    if path == Path::new("-") {
        io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| domain(format!("stdin: {e}")))?;
    } else {
        s = fs::read_to_string(path).map_err(|e| domain(format!("{}: {e}", path.display())))?;
    }
    Ok(s)
}

fn group_file(path: &Path) -> Result<PermGroup> {
    PermGroup::parse(&read_input(path)?)
}

fn coset_indexing(h: &Path, gamma: &Path) -> Result<CosetIndexing> {
    CosetIndexing::new(group_file(h)?, group_file(gamma)?)
}

fn parse_description(text: &str) -> Result<Description> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    let [codec, params, width, index] = fields[..] else {
        return Err(Error::Parse {
            line: 1,
            msg: "expected 'codec params-bits index-bits index'".into(),
        });
    };
    let params = if params == "-" { BitString::new() } else { BitString::parse(params)? };
    let bad = |msg: &str| Error::Parse { line: 1, msg: msg.into() };
    Ok(Description {
        codec: codec.to_string(),
        params,
        index_bits: width.parse().map_err(|_| bad("bad index width"))?,
        index: index.parse().map_err(|_| bad("bad index"))?,
    })
}

/// Single-sample orbit codec for `--codec coset`.
fn orbit_codec(obj: &UniverseElement) -> Result<(BlockedParams, CompiledCosets)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let aut = aut_generators(obj, AutStrategy::Exhaustive, &mut rng)?;
    let params = BlockedParams {
        space: CosetSpace::Orbits {
            bases: vec![(obj.clone(), aut)],
        },
        b: 1,
        t: 1,
    };
    let compiled = CompiledCosets::new(&params)?;
    Ok((params, compiled))
}

fn flat_seed(codec: &CodecArgs) -> Result<u64> {
    codec.seed.ok_or_else(|| Error::Domain("--codec flat is randomized and needs --seed".into()))
}

fn object_file(kind: Kind, path: &Path) -> Result<UniverseElement> {
    UniverseElement::parse(kind, &read_input(path)?)
}

fn run(cmd: Cmd, out: &mut impl Write) -> Result<()> {
    let mut emit = |s: String| -> Result<()> { writeln!(out, "{s}").map_err(|e| Error::Invariant(format!("stdout: {e}"))) };
    match cmd {
        Cmd::Rank { perm, h, gamma, base } => {
            let p: Permutation = perm.parse()?;
            let k = match (h, gamma) {
                (Some(h), Some(g)) => coset_indexing(&h, &g)?.rank(&p)?,
                _ => p.lehmer_rank(),
            };
            emit(base.show(&k).to_string())
        }
        Cmd::Unrank { n, k, h, gamma, base } => {
            let k = base.take(&k)?;
            let p = match (h, gamma) {
                (Some(h), Some(g)) => coset_indexing(&h, &g)?.unrank(&k)?,
                _ => Permutation::lehmer_unrank(&k, n.unwrap())?,
            };
            emit(p.to_string())
        }
        Cmd::Canonical { perm, gamma } => {
            let p: Permutation = perm.parse()?;
            emit(canonical_rep(&p, &group_file(&gamma)?)?.to_string())
        }
        Cmd::NormalForm { file } => {
            let (n, gens) = parse_generator_list(&read_input(&file)?)?;
            let nf = normal_form(n, &gens)?;
            emit(format_generator_list(n, &nf).trim_end().to_string())
        }
        Cmd::GlRank { file, base } => {
            let m = MatrixFq::parse(&read_input(&file)?)?;
            emit(base.show(&gl_rank(&m)?).to_string())
        }
        Cmd::GlUnrank { n, q, k, base } => emit(gl_unrank(&base.take(&k)?, n, q)?.to_string().trim_end().to_string()),
        Cmd::GlOrder { n, q } => emit(gl_order(n, q)?.to_string()),
        Cmd::Rref { file } => {
            let m = MatrixFq::parse(&read_input(&file)?)?;
            emit(m.rref().to_string().trim_end().to_string())
        }
        Cmd::Encode {
            kind,
            object,
            copy,
            codec,
            base,
        } => {
            let obj = object_file(kind, &object)?;
            let copy = object_file(kind, &copy)?;
            if copy.dims() != obj.dims() {
                return Err(domain("copy and object live in different universes"));
            }
            let target = copy.invariant();
            let k = match codec.codec.as_str() {
                "coset" => {
                    let (_, compiled) = orbit_codec(&obj)?;
                    let table = OrbitTable::build(&obj)?;
                    let g = table
                        .first_preimage(&target)
                        .ok_or_else(|| domain("the copy is not isomorphic to the object"))?;
                    compiled.value(0, g)?
                }
                "flat" => {
                    let mut rng = ChaCha8Rng::seed_from_u64(flat_seed(&codec)?);
                    let sampler = OrbitSampler::new(obj.clone());
                    let scheme = build_scheme(&sampler, max_entropy(&sampler)?, &mut rng)?;
                    scheme
                        .encode(&sampler, &target)
                        .map_err(|_| domain("the copy is not isomorphic to the object"))?
                }
                other => return Err(domain(format!("unknown codec {other:?}"))),
            };
            emit(base.show(&k).to_string())
        }
        Cmd::Decode {
            kind,
            object,
            index,
            codec,
            base,
        } => {
            let obj = object_file(kind, &object)?;
            let k = base.take(&index)?;
            let bits = match codec.codec.as_str() {
                "coset" => {
                    let (_, compiled) = orbit_codec(&obj)?;
                    if &k >= compiled.radix() {
                        return Err(Error::Range(format!("index must be below the orbit size {}", compiled.radix())));
                    }
                    compiled.decode(&k, compiled.index_bits())?
                }
                "flat" => {
                    let mut rng = ChaCha8Rng::seed_from_u64(flat_seed(&codec)?);
                    let sampler = OrbitSampler::new(obj.clone());
                    let scheme = build_scheme(&sampler, max_entropy(&sampler)?, &mut rng)?;
                    if k >= scheme.index_range() {
                        return Err(Error::Range(format!("index must be below {}", scheme.index_range())));
                    }
                    scheme.decode(&sampler, &k)?
                }
                other => return Err(domain(format!("unknown codec {other:?}"))),
            };
            let copy = UniverseElement::from_invariant(obj.dims(), &bits)?;
            emit(copy.to_string().trim_end().to_string())
        }
        Cmd::Cost {
            input,
            hint,
            c_machine,
            audit,
            ell,
        } => {
            let model = CostModel::with_c_machine(c_machine);
            if let Some(c) = audit {
                return emit(model.counting_audit(c, ell)?.to_string());
            }
            let y = BitString::parse(read_input(&input.unwrap())?.trim())?;
            let hints = hint
                .iter()
                .map(|p| parse_description(&read_input(p)?))
                .collect::<Result<Vec<_>>>()?;
            let report = model.cost(&y, &hints);
            for (codec, why) in &report.rejected {
                eprintln!("rejected {codec}: {why}");
            }
            emit(report.best.to_string())
        }
        Cmd::Reduce {
            instance,
            t,
            b,
            s_tilde,
            seed,
        } => {
            let inst = IsoInstance::parse(&read_input(&instance)?)?;
            let b = b.unwrap_or_else(|| default_block(t));
            let (s, source) = match s_tilde {
                Some(s) => (s, "given".to_string()),
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 1]));
                    let s0 = log_orbit_overestimate(&inst.x0, AutStrategy::Sampling, &mut rng)?.0.value;
                    let s1 = log_orbit_overestimate(&inst.x1, AutStrategy::Sampling, &mut rng)?.0.value;
                    (s0.min(s1), "log-orbit-overestimate/sampling".to_string())
                }
            };
            let r = reduce(&inst, t, s, b, seed)?;
            emit(format!("t {}\nb {}\ns_tilde {:.6} {source}\ntheta {:.6}\nseed {}", r.t, r.b, r.s_tilde, r.theta, seed))?;
            emit(format!("y {}", r.y))?;
            let group = inst.group();
            for (i, (side, h)) in r.transcript.choices.iter().enumerate() {
                emit(format!("sample {} r {} h {}", i + 1, side, group.rank(h)? + BigUint::one()))?;
            }
            Ok(())
        }
        Cmd::Decide {
            instance,
            mode,
            seed,
            t,
            b,
            budget,
            strategy,
            c_machine,
            verbose,
        } => {
            let inst = IsoInstance::parse(&read_input(&instance)?)?;
            let cfg = DecideConfig {
                t,
                b,
                budget,
                strategy,
                c_machine,
            };
            let d = decide(&inst, mode, &cfg, seed)?;
            if verbose {
                eprintln!("s_tilde {:.6} theta {:.6} cost {:?} b {}", d.s_tilde, d.theta, d.cost, d.b);
                for line in &d.trace {
                    eprintln!("{line}");
                }
            }
            emit(d.verdict.to_string())
        }
        Cmd::Experiment { config, out: path } => {
            let text = read_input(&config)?;
            let dir = config.parent().map(Path::to_path_buf).unwrap_or_default();
            let cfg = ExperimentConfig::parse(&text, |p| fs::read_to_string(dir.join(p)))?;
            let rows = run_experiment(&cfg)?;
            match path {
                Some(p) => {
                    let f = fs::File::create(&p).map_err(|e| domain(format!("{}: {e}", p.display())))?;
                    write_csv(&rows, f)?;
                }
                None => {
                    let mut buf = Vec::new();
                    write_csv(&rows, &mut buf)?;
                    emit(String::from_utf8(buf).unwrap().trim_end().to_string())?;
                }
            }
            let bad = rows.iter().filter(|r| r.violation()).count();
            if bad > 0 {
                return Err(Error::Invariant(format!("{bad} verdicts contradict the ground truth")));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli.cmd, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            match e {
                Error::Invariant(_) | Error::Audit(_) | Error::Build(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
