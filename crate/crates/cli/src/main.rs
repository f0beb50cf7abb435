use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sigdex::importers::{self, Slp, SlpQueries};
use sigdex::updater::{self, EditOp};
use sigdex::{Builder, Engine, EngineConfig, QueryStats};

#[derive(Parser)]
#[command(name = "sigdex", version, about = "Compressed dynamic strings on signature encodings")]
struct Cli {
    /// Largest text the engine must hold; sets M = 4 * max-len.
    #[arg(long, global = true, default_value_t = 1 << 20)]
    max_len: u64,
    /// Print the operation counters as key=value lines after the answer.
    #[arg(long, global = true)]
    stats: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum From {
    Text,
    Lz77,
    Slp,
}

#[derive(Clone, Copy, ValueEnum)]
enum BuilderArg {
    Naive,
    Linear,
    Gfact,
    Levelwise,
}

impl BuilderArg {
    fn get(self) -> Builder {
        match self {
            BuilderArg::Naive => Builder::Naive,
            BuilderArg::Linear => Builder::Linear,
            BuilderArg::Gfact => Builder::Gfact,
            BuilderArg::Levelwise => Builder::Levelwise,
        }
    }
}

#[derive(Args)]
struct DagArg {
    /// Engine dump to read.
    #[arg(long)]
    dag: PathBuf,
}

#[derive(Args)]
struct EditArgs {
    #[arg(long)]
    dag: PathBuf,
    /// Where to write the edited engine (defaults to --dag).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build an engine from a text, LZ77 or SLP file.
    Build {
        #[arg(long, value_enum, default_value = "text")]
        from: From,
        #[arg(long, value_enum)]
        builder: Option<BuilderArg>,
        /// Load an SLP as given instead of parsing its text.
        #[arg(long)]
        verbatim: bool,
        /// Treat INPUT as the literal text.
        #[arg(long)]
        inline: bool,
        input: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Longest common extension of the suffixes at I and J.
    Lce {
        #[command(flatten)]
        d: DagArg,
        /// Extend to the left from I and J instead.
        #[arg(long)]
        backward: bool,
        i: u64,
        j: u64,
    },
    /// LCP of two substrings (I LEN J LEN), or of two SLP variables with --slp.
    Lcp {
        #[arg(long, conflicts_with = "slp")]
        dag: Option<PathBuf>,
        #[arg(long)]
        slp: Option<PathBuf>,
        args: Vec<u64>,
    },
    /// LCS of two substrings (I LEN J LEN), or of two SLP variables with --slp.
    Lcs {
        #[arg(long, conflicts_with = "slp")]
        dag: Option<PathBuf>,
        #[arg(long)]
        slp: Option<PathBuf>,
        args: Vec<u64>,
    },
    /// Insert a string (escaped as in edit scripts) at position I.
    Insert {
        #[command(flatten)]
        e: EditArgs,
        i: u64,
        y: String,
    },
    /// Insert a copy of T[J..J+Y) at position I.
    InsertCopy {
        #[command(flatten)]
        e: EditArgs,
        j: u64,
        y: u64,
        i: u64,
    },
    /// Delete T[J..J+Y).
    Delete {
        #[command(flatten)]
        e: EditArgs,
        j: u64,
        y: u64,
    },
    /// All occurrences of a pattern, ascending.
    Search {
        #[command(flatten)]
        d: DagArg,
        /// Print primary occurrences (offset and expanded node) instead.
        #[arg(long)]
        primary: bool,
        pattern: String,
    },
    /// Variables of an SLP in lexicographic order of their values.
    SortVars { slp: PathBuf },
    /// Write the grammar as a plain SLP.
    ExportSlp {
        #[command(flatten)]
        d: DagArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the engine dump, or the text with --text.
    Dump {
        #[command(flatten)]
        d: DagArg,
        #[arg(long)]
        text: bool,
    },
    /// Read a dump, check it and store it under OUT.
    Load {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every audit; exits 1 on the first violation.
    Verify {
        #[command(flatten)]
        d: DagArg,
        /// Also build and audit the pattern index.
        #[arg(long)]
        index: bool,
    },
    /// Text length and number of signatures.
    Stats {
        #[arg(long)]
        dag: Option<PathBuf>,
    },
    /// Timed operations as CSV: op,input_size,answer,nodes_visited,micros.
    Bench {
        #[command(flatten)]
        d: DagArg,
        /// Edit script to replay (else random LCE queries).
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Report 0 micros so the output is reproducible.
        #[arg(long)]
        no_time: bool,
        /// Save the engine after the script.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(p: &Path) -> Result<Vec<u8>> {
    fs::read(p).with_context(|| format!("reading {}", p.display()))
}

fn read_str(p: &Path) -> Result<String> {
    String::from_utf8(read(p)?).with_context(|| format!("{} is not UTF-8", p.display()))
}

fn load(p: &Path) -> Result<Engine> {
    Ok(Engine::load(&read_str(p)?)?)
}

fn save(e: &Engine, p: &Path) -> Result<()> {
    fs::write(p, e.dump()).with_context(|| format!("writing {}", p.display()))
}

fn stats_lines(out: &mut String, s: &QueryStats) {
    out.push_str(&s.to_lines());
}

/// Small deterministic generator for bench queries.
struct SplitMix(u64);

impl SplitMix {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

fn affix_query(cli: &Cli, dag: &Option<PathBuf>, slp: &Option<PathBuf>, args: &[u64], suffix: bool, out: &mut String) -> Result<()> {
    match (dag, slp) {
        (Some(d), None) => {
            let [i, a, j, b] = args[..] else { bail!("expected I LEN J LEN") };
            let mut e = load(d)?;
            let v = if suffix { e.lcs(i, a, j, b)? } else { e.lcp(i, a, j, b)? };
            writeln!(out, "{v}")?;
            if cli.stats {
                stats_lines(out, &e.last);
            }
        }
        (None, Some(s)) => {
            let [i, j] = args[..] else { bail!("expected two variable indices") };
            let slp = Slp::parse(&read_str(s)?)?;
            let mut e = Engine::new(&EngineConfig::with_max_len(cli.max_len));
            let q = SlpQueries::new(&mut e.dag, &e.params, &slp)?;
            let v = if suffix { q.variable_lcs(i as usize, j as usize)? } else { q.variable_lcp(i as usize, j as usize)? };
            writeln!(out, "{v}")?;
        }
        _ => bail!("give exactly one of --dag or --slp"),
    }
    Ok(())
}

fn edit(cli: &Cli, a: &EditArgs, op: EditOp, out: &mut String) -> Result<()> {
    let mut e = load(&a.dag)?;
    e.apply(&op)?;
    save(&e, a.out.as_ref().unwrap_or(&a.dag))?;
    writeln!(out, "{}", e.stats_line())?;
    if cli.stats {
        stats_lines(out, &e.last);
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<String> {
    let mut out = String::new();
    let cfg = EngineConfig::with_max_len(cli.max_len);
    match &cli.cmd {
        Cmd::Build { from, builder, verbatim, inline, input, out: dst } => {
            let raw = if *inline { input.as_bytes().to_vec() } else { read(Path::new(input))? };
            let mut e = Engine::new(&cfg);
            match from {
                From::Text => {
                    if *verbatim {
                        bail!("--verbatim applies to SLP input only");
                    }
                    e.build_text(&raw, builder.map_or(Builder::Linear, BuilderArg::get))?;
                }
                From::Lz77 => {
                    let f = importers::parse_lz77(std::str::from_utf8(&raw)?)?;
                    e.build_lz77(&f, builder.map_or(Builder::Naive, BuilderArg::get))?;
                }
                From::Slp => {
                    let slp = Slp::parse(std::str::from_utf8(&raw)?)?;
                    if *verbatim {
                        if builder.is_some() {
                            bail!("--verbatim takes no builder");
                        }
                        e = Engine::from_raw_slp(&cfg, &slp)?;
                    } else {
                        e.build_slp(&slp, builder.map_or(Builder::Levelwise, BuilderArg::get))?;
                    }
                }
            }
            save(&e, dst)?;
            writeln!(out, "{}", e.stats_line())?;
            if cli.stats {
                stats_lines(&mut out, &e.last);
            }
        }
        Cmd::Lce { d, backward, i, j } => {
            let mut e = load(&d.dag)?;
            let v = if *backward { e.lce_backward(*i, *j)? } else { e.lce(*i, *j)? };
            writeln!(out, "{v}")?;
            if cli.stats {
                stats_lines(&mut out, &e.last);
            }
        }
        Cmd::Lcp { dag, slp, args } => affix_query(cli, dag, slp, args, false, &mut out)?,
        Cmd::Lcs { dag, slp, args } => affix_query(cli, dag, slp, args, true, &mut out)?,
        Cmd::Insert { e, i, y } => edit(cli, e, EditOp::Insert { y: updater::unescape(y)?, i: *i }, &mut out)?,
        Cmd::InsertCopy { e, j, y, i } => edit(cli, e, EditOp::InsertCopy { j: *j, y: *y, i: *i }, &mut out)?,
        Cmd::Delete { e, j, y } => edit(cli, e, EditOp::Delete { j: *j, y: *y }, &mut out)?,
        Cmd::Search { d, primary, pattern } => {
            let mut e = load(&d.dag)?;
            let p = updater::unescape(pattern)?;
            if *primary {
                for o in e.primary_occurrences(&p)? {
                    writeln!(out, "{} {}", o.offset, updater::escape(&e.dag.expand_all(o.sig)))?;
                }
            } else {
                let occ = e.occurrences(&p)?;
                let s: Vec<String> = occ.iter().map(u64::to_string).collect();
                writeln!(out, "{}", s.join(" "))?;
            }
        }
        Cmd::SortVars { slp } => {
            let slp = Slp::parse(&read_str(slp)?)?;
            let mut e = Engine::new(&cfg);
            let order = e.sort_variables_of(&slp)?;
            let s: Vec<String> = order.iter().map(usize::to_string).collect();
            writeln!(out, "{}", s.join(" "))?;
        }
        Cmd::ExportSlp { d, out: dst } => {
            let e = load(&d.dag)?;
            let s = e.export_slp()?.format();
            match dst {
                Some(p) => fs::write(p, s)?,
                None => out.push_str(&s),
            }
        }
        Cmd::Dump { d, text } => {
            let e = load(&d.dag)?;
            if *text {
                out.push_str(&updater::escape(&e.text()));
                out.push('\n');
            } else {
                out.push_str(&e.dump());
            }
        }
        Cmd::Load { input, out: dst } => {
            let e = load(input)?;
            e.verify()?;
            save(&e, dst)?;
            writeln!(out, "{}", e.stats_line())?;
        }
        Cmd::Verify { d, index } => {
            let mut e = load(&d.dag)?;
            if *index {
                e.enable_index();
            }
            e.verify()?;
            if let Some(r) = e.root() {
                if e.dag.expand_all(r).len() as u64 != e.len() {
                    bail!("root does not expand to its recorded length");
                }
            }
            writeln!(out, "ok")?;
        }
        Cmd::Stats { dag } => {
            let e = match dag {
                Some(p) => load(p)?,
                None => Engine::new(&cfg),
            };
            writeln!(out, "{}", e.stats_line())?;
        }
        Cmd::Bench { d, script, queries, seed, no_time, out: dst } => {
            let mut e = load(&d.dag)?;
            out.push_str("op,input_size,answer,nodes_visited,micros\n");
            let timed = |t: Instant| if *no_time { 0 } else { t.elapsed().as_micros() };
            match script {
                Some(s) => {
                    for op in updater::parse_script(&read_str(s)?)? {
                        let t = Instant::now();
                        e.apply(&op)?;
                        let us = timed(t);
                        let name = match op {
                            EditOp::Insert { .. } => "insert",
                            EditOp::InsertCopy { .. } => "insert-copy",
                            EditOp::Delete { .. } => "delete",
                        };
                        writeln!(out, "{name},{},{},{},{us}", op.size(), e.len(), e.last.nodes_visited)?;
                    }
                    if let Some(p) = dst {
                        save(&e, p)?;
                    }
                }
                None => {
                    let n = e.len();
                    if n == 0 {
                        return Err(anyhow!("empty text"));
                    }
                    let mut rng = SplitMix(*seed);
                    for _ in 0..*queries {
                        let (i, j) = (rng.below(n) + 1, rng.below(n) + 1);
                        let t = Instant::now();
                        let v = e.lce(i, j)?;
                        let us = timed(t);
                        writeln!(out, "lce,{n},{v},{},{us}", e.last.nodes_visited)?;
                    }
                }
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(s) => {
            print!("{s}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sigdex: {e:#}");
            ExitCode::from(1)
        }
    }
}
