use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use luk_core::bounds::{exact_extrema_with, Budget, Target, Value};
use luk_core::construct::{construct, roundtrip_with};
use luk_core::equiv::{grid_equal, sample_equal, FormulaFn, TruthFunction, Verdict};
use luk_core::extract::{extract_graph_with, ExtractOptions, Flavor};
use luk_core::graph::SubstitutionGraph;
use luk_core::rewrite::{catalog, parse_trace, render_symmetry, show_pattern, rewrite_graph, Catalog};
use luk_core::{Formula, Network, NodeRef};

/// Exact ReLU network / Lukasiewicz formula toolkit.
#[derive(Parser)]
#[command(name = "luk", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Extract a substitution graph from a network.
    Extract {
        net: PathBuf,
        /// integer, rational (dmv) or real (rmv)
        #[arg(long, default_value = "integer")]
        flavor: Flavor,
        /// Fail unless the network output stays in [0, 1].
        #[arg(long)]
        check_range: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Build a ReLU network from a normal substitution graph.
    Construct {
        graph: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Extract then construct; succeeds if the network comes back unchanged.
    Roundtrip {
        net: PathBuf,
        /// Accept a result that differs by a permutation of hidden nodes.
        #[arg(long)]
        permutation: bool,
    },
    /// Apply a JSON-lines rewrite trace to a graph.
    Rewrite {
        graph: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Axiom set the trace refers to.
        #[arg(long, default_value = "MV")]
        set: Catalog,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare two networks, graphs or formulas.
    CheckEquiv {
        a: PathBuf,
        b: PathBuf,
        /// Grid resolution k: points {0, 1/k, ..., 1}^n.
        #[arg(long, default_value_t = 12)]
        grid: u32,
        /// Also compare at this many random rational points.
        #[arg(long)]
        samples: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// List an axiom set.
    Axioms {
        /// MV, MVk:<k>, DMV:<n>, RMV or RMV:<r>,<r>,...
        #[arg(long, default_value = "MV")]
        set: Catalog,
        /// Print both sides in ReLU form.
        #[arg(long)]
        render_symmetry: bool,
    },
    /// Exact range of a node over the unit cube.
    Bounds {
        net: PathBuf,
        /// Node as layer,index (1-based); the output node by default.
        #[arg(long, value_parser = parse_node)]
        node: Option<NodeRef>,
        /// Bound the value before the activation.
        #[arg(long)]
        pre: bool,
    },
}

fn parse_node(s: &str) -> Result<NodeRef, String> {
    let (j, i) = s.split_once(',').ok_or("expected layer,index")?;
    let j = j.trim().parse().map_err(|_| format!("bad layer {j:?}"))?;
    let i = i.trim().parse().map_err(|_| format!("bad index {i:?}"))?;
    Ok(NodeRef::new(j, i))
}

/// A failed run: exit code and message.
struct Fail(u8, String);

fn usage(msg: impl ToString) -> Fail {
    Fail(2, msg.to_string())
}

fn negative(msg: impl ToString) -> Fail {
    Fail(1, msg.to_string())
}

fn read(path: &Path) -> Result<String, Fail> {
    fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<Network, Fail> {
    Network::from_json(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<SubstitutionGraph, Fail> {
    SubstitutionGraph::from_json(&read(path)?).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Fail> {
    match output {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn budget() -> Result<Budget, Fail> {
    Budget::from_env().map_err(usage)
}

enum Input {
    Net(Network),
    Graph(SubstitutionGraph),
    Formula(Formula),
}

impl Input {
    fn load(path: &Path) -> Result<Input, Fail> {
        let text = read(path)?;
        let ctx = |e: &dyn std::fmt::Display| usage(format!("{}: {e}", path.display()));
        match serde_json::from_str::<serde_json::Value>(&text) {
            Ok(serde_json::Value::Object(o)) if o.contains_key("input_dim") => {
                Network::from_json(&text).map(Input::Net).map_err(|e| ctx(&e))
            }
            Ok(serde_json::Value::Object(o)) if o.contains_key("widths") => {
                SubstitutionGraph::from_json(&text).map(Input::Graph).map_err(|e| ctx(&e))
            }
            Ok(serde_json::Value::String(s)) => Formula::parse(&s).map(Input::Formula).map_err(|e| ctx(&e)),
            Ok(serde_json::Value::Object(_)) => Err(ctx(&"expected an \"input_dim\" or \"widths\" key")),
            _ => Formula::parse(text.trim()).map(Input::Formula).map_err(|e| ctx(&e)),
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Input::Net(n) => Some(n.input_dim()),
            Input::Graph(g) => Some(g.input_dim()),
            Input::Formula(_) => None,
        }
    }

    fn into_fn(self, arity: usize) -> Box<dyn TruthFunction> {
        match self {
            Input::Net(n) => Box::new(n),
            Input::Graph(g) => Box::new(g),
            Input::Formula(f) => Box::new(FormulaFn::with_arity(f, arity)),
        }
    }

    fn max_var(&self) -> usize {
        match self {
            Input::Formula(f) => f.max_var() as usize,
            _ => 0,
        }
    }
}

fn report(kind: &str, v: Verdict) -> Result<(), Fail> {
    match v {
        Verdict::Equal => {
            println!("equal ({kind})");
            Ok(())
        }
        Verdict::Counterexample { point, lhs, rhs } => {
            let pt: Vec<String> = point.iter().map(ToString::to_string).collect();
            Err(negative(format!(
                "counterexample ({kind}) at ({}): {lhs} vs {rhs}",
                pt.join(", ")
            )))
        }
    }
}

fn run(cli: Cli) -> Result<(), Fail> {
    match cli.cmd {
        Cmd::Extract {
            net,
            flavor,
            check_range,
            output,
        } => {
            let n = load_network(&net)?;
            let opts = ExtractOptions {
                flavor,
                budget: budget()?,
                check_range,
            };
            let g = extract_graph_with(&n, opts).map_err(negative)?;
            emit(&g.to_json(), output.as_deref())
        }
        Cmd::Construct { graph, output } => {
            let g = load_graph(&graph)?;
            let n = construct(&g, budget()?).map_err(negative)?;
            emit(&n.to_json(), output.as_deref())
        }
        Cmd::Roundtrip { net, permutation } => {
            let n = load_network(&net)?;
            let back = roundtrip_with(&n, budget()?).map_err(negative)?;
            if back == n || (permutation && n.equal_up_to_permutation(&back)) {
                println!("roundtrip ok");
                return Ok(());
            }
            for line in n.diff(&back) {
                eprintln!("{line}");
            }
            Err(negative("roundtrip changed the network"))
        }
        Cmd::Rewrite {
            graph,
            trace,
            set,
            output,
        } => {
            let g = load_graph(&graph)?;
            let steps = parse_trace(&read(&trace)?).map_err(|e| usage(format!("{}: {e}", trace.display())))?;
            let out = rewrite_graph(&catalog(&set), &g, &steps).map_err(negative)?;
            emit(&out.to_json(), output.as_deref())
        }
        Cmd::CheckEquiv {
            a,
            b,
            grid,
            samples,
            seed,
        } => {
            if grid == 0 {
                return Err(usage("--grid must be positive"));
            }
            let (a, b) = (Input::load(&a)?, Input::load(&b)?);
            let arity = match (a.arity(), b.arity()) {
                (Some(x), Some(y)) if x != y => {
                    return Err(usage(format!("input dimensions differ: {x} vs {y}")))
                }
                (Some(x), _) | (_, Some(x)) => x,
                (None, None) => a.max_var().max(b.max_var()).max(1),
            };
            if a.max_var().max(b.max_var()) > arity {
                return Err(usage(format!("formula mentions variables beyond x{arity}")));
            }
            let (f, g) = (a.into_fn(arity), b.into_fn(arity));
            let v = grid_equal(f.as_ref(), g.as_ref(), grid).map_err(usage)?;
            report(&format!("grid I_{grid}^{arity}"), v)?;
            if let Some(n) = samples {
                let v = sample_equal(f.as_ref(), g.as_ref(), n, seed).map_err(usage)?;
                report(&format!("{n} samples, seed {seed}"), v)?;
            }
            Ok(())
        }
        Cmd::Axioms {
            set,
            render_symmetry: rho,
        } => {
            for a in catalog(&set) {
                match (rho, render_symmetry(&a)) {
                    (true, Some((l, r))) => println!("{}: {l} = {r}", a.id),
                    _ => println!("{}: {} = {}", a.id, show_pattern(&a.lhs), show_pattern(&a.rhs)),
                }
            }
            Ok(())
        }
        Cmd::Bounds { net, node, pre } => {
            let n = load_network(&net)?;
            let target = node.map_or(Target::Output, Target::Node);
            let value = if pre { Value::Pre } else { Value::Post };
            let r = exact_extrema_with(&n, target, value, budget()?).map_err(|e| match e {
                luk_core::bounds::BoundsError::InvalidNode(_) => usage(e),
                _ => negative(e),
            })?;
            println!("[{}, {}]", r.lo, r.hi);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail(code, msg)) => {
            eprintln!("luk: {msg}");
            ExitCode::from(code)
        }
    }
}
