use std::collections::BTreeMap;
use std::fmt;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use govcore::agent_runtime::TopologyView;
use govcore::calibration::{
    assign_governance_level, classify_autonomy, layer_activation, oversight_posture, AutonomyEvidence, DecisionScope,
    DomainCriticality, HumanInvolvement, SystemProfile,
};
use govcore::catalog::{
    parse_catalog, trace_backward, trace_forward, validate_catalog, Catalog, Framework, ObligationRef,
};
use govcore::city::{publish_disclosure, render_explanation, CaseId, DisclosureTier, GovernanceBasis, Registry};
use govcore::orchestration::baseline_deadline;
use govcore::sim::{self, load_scenario, summarize, RunMode, Scenario, SimError, TraceFormat};
use govcore::{AgentId, MeasureId, Minutes, RecordId};

#[derive(Parser)]
#[command(name = "govctl", version, about = "Governance control plane for interacting city AI agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check catalog integrity; exits 1 if there are findings.
    Validate {
        #[arg(long)]
        catalog: Option<String>,
    },
    /// Look up obligations for a measure, or measures for an obligation.
    TraceQuery {
        #[arg(long)]
        catalog: Option<String>,
        #[arg(long, conflicts_with = "obligation", required_unless_present = "obligation")]
        measure: Option<MeasureId>,
        /// FRAMEWORK:LOCATOR, e.g. "EU AI Act:Art. 9"
        #[arg(long)]
        obligation: Option<String>,
    },
    /// Classify autonomy and assign a governance level.
    Classify {
        #[arg(long)]
        scope: DecisionScope,
        #[arg(long)]
        human: HumanInvolvement,
        #[arg(long)]
        criticality: DomainCriticality,
        #[arg(long)]
        endangers: bool,
        #[arg(long)]
        crossorg: bool,
        #[arg(long)]
        ecosystem: bool,
    },
    /// Per-regime notification deadlines and the strictest baseline.
    Deadlines {
        #[arg(long)]
        t0: Minutes,
        /// NAME=MINUTES, repeatable
        #[arg(long = "regime", required = true)]
        regimes: Vec<String>,
    },
    /// City AI registry queries.
    Registry {
        #[command(subcommand)]
        action: RegistryAction,
    },
    /// Publish a tiered disclosure package for one system.
    Disclose {
        #[arg(long)]
        system: AgentId,
        #[arg(long)]
        tier: DisclosureTier,
        #[arg(long)]
        registry: Option<String>,
    },
    /// Open a contestation case for a decision record of a scenario run.
    Contest {
        /// Record id (rec-00012) or scenario decision id (fine-0001).
        #[arg(long)]
        decision: String,
        #[arg(long, default_value = "corridor_cascade")]
        scenario: String,
    },
    /// Render a contestation case explanation.
    Explain {
        #[arg(long)]
        case: CaseId,
        #[arg(long)]
        lang: String,
        #[arg(long, default_value = "corridor_cascade")]
        scenario: String,
    },
    /// Run a scenario file or shipped fixture.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        trace_out: Option<String>,
        #[arg(long)]
        summary: bool,
        #[arg(long, default_value = "tsv")]
        format: String,
    },
}

#[derive(Subcommand)]
enum RegistryAction {
    List {
        #[arg(long)]
        basis: Option<GovernanceBasis>,
        #[arg(long)]
        registry: Option<String>,
    },
}

/// Marks input that failed to parse against its schema (exit code 2).
#[derive(Debug)]
struct SchemaFailure(String);

impl fmt::Display for SchemaFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SchemaFailure {}

fn schema(e: impl fmt::Display) -> anyhow::Error {
    SchemaFailure(e.to_string()).into()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<SchemaFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn read(path: &str) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {path}"))
}

fn catalog(path: Option<&str>) -> Result<Catalog> {
    match path {
        None => Ok(Catalog::shipped()),
        Some(p) => parse_catalog(&read(p)?).map_err(schema),
    }
}

fn registry(path: Option<&str>) -> Result<Registry> {
    match path {
        None => Ok(Registry::shipped()),
        Some(p) => Registry::parse(&read(p)?).map_err(schema),
    }
}

fn scenario(name: &str) -> Result<Scenario> {
    load_scenario(name).map_err(|e| match e {
        SimError::Schema(_) | SimError::DanglingReference(_) | SimError::Invalid(_) => schema(e),
        other => anyhow!(other),
    })
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Validate { catalog: path } => {
            let c = catalog(path.as_deref())?;
            let report = validate_catalog(&c);
            for f in &report.findings {
                println!("{f}");
            }
            if report.is_clean() {
                println!("catalog ok: {} measures, {} rules", c.measures.len(), c.rules.len());
                Ok(ExitCode::SUCCESS)
            } else {
                println!("{} finding(s)", report.findings.len());
                Ok(ExitCode::FAILURE)
            }
        }
        Command::TraceQuery { catalog: path, measure, obligation } => {
            let c = catalog(path.as_deref())?;
            if let Some(id) = measure {
                for o in trace_backward(&c, id)? {
                    println!("{o}");
                }
            } else if let Some(spec) = obligation {
                let (fw, loc) =
                    spec.split_once(':').ok_or_else(|| anyhow!("expected FRAMEWORK:LOCATOR, got `{spec}`"))?;
                let fw: Framework = fw.trim().parse().map_err(|_| anyhow!("unknown framework `{fw}`"))?;
                for m in trace_forward(&c, &ObligationRef::new(fw, loc.trim())) {
                    println!("{m}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Classify { scope, human, criticality, endangers, crossorg, ecosystem } => {
            let evidence =
                AutonomyEvidence { decision_scope: scope, human_involvement: human, domain_criticality: criticality };
            let profile = SystemProfile {
                id: AgentId::from("cli"),
                authority: String::new(),
                domain: String::new(),
                evidence,
                endangers_essential_services: endangers,
                cross_org_dependencies: crossorg,
                multi_agent_ecosystem: ecosystem,
            };
            let autonomy = classify_autonomy(&evidence);
            let level = assign_governance_level(&profile);
            println!("autonomy\t{}", autonomy.level);
            println!("rationale\t{}", autonomy.rationale);
            println!("governance\t{level}");
            println!("layers\t{}", layer_activation(level));
            println!("posture\t{}", oversight_posture(level));
            Ok(ExitCode::SUCCESS)
        }
        Command::Deadlines { t0, regimes } => {
            let mut windows = BTreeMap::new();
            for r in &regimes {
                let (name, w) = r.split_once('=').ok_or_else(|| anyhow!("expected NAME=MINUTES, got `{r}`"))?;
                let w: Minutes = w.parse().with_context(|| format!("bad window in `{r}`"))?;
                if windows.insert(name.to_string(), w).is_some() {
                    bail!("regime {name} given twice");
                }
            }
            println!("regime\twindow\tdeadline");
            for (name, w) in &windows {
                println!("{name}\t{w}\t{}", t0 + w);
            }
            let base = baseline_deadline(&windows).expect("at least one regime");
            println!("baseline\t{base}\t{}", t0 + base);
            Ok(ExitCode::SUCCESS)
        }
        Command::Registry { action: RegistryAction::List { basis, registry: path } } => {
            let reg = registry(path.as_deref())?;
            println!("system\tname\tauthority\tdomain\tautonomy\tgovernance\tlevel\tkey_metric");
            for e in reg.entries().filter(|e| basis.is_none_or(|b| e.governance_basis == b)) {
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    e.profile.id,
                    e.name,
                    e.profile.authority,
                    e.profile.domain,
                    e.autonomy,
                    e.governance_basis,
                    e.level(),
                    e.key_metric
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Disclose { system, tier, registry: path } => {
            let reg = registry(path.as_deref())?;
            let pkg = publish_disclosure(&reg, &system, tier)?;
            println!("tier\t{}", pkg.tier);
            for (k, v) in &pkg.fields {
                println!("{k}\t{v}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Contest { decision, scenario: name } => {
            let sc = scenario(&name)?;
            let mut session = sim::run_session(&sc, &[]);
            let record = match decision.parse::<RecordId>() {
                Ok(r) => r,
                Err(_) => {
                    *session.decisions.get(&decision).ok_or_else(|| anyhow!("no decision `{decision}` in {name}"))?
                }
            };
            let authorities = session.authorities(&sc);
            let version = session.topology.version();
            let case = session.cases.open_contestation(record, &session.trail, version, &authorities)?;
            println!("case\t{}", case.case_id);
            println!("decision\t{} ({})", case.decision, case.decision_summary);
            println!("agents\t{}", join(case.agents().iter()));
            println!("authorities\t{}", join(case.authorities.iter()));
            println!("review_path\t{}", case.review_path);
            println!("remedy\t{}", case.remedy);
            println!("status\t{}", case.status);
            Ok(ExitCode::SUCCESS)
        }
        Command::Explain { case, lang, scenario: name } => {
            let sc = scenario(&name)?;
            let session = sim::run_session(&sc, &[]);
            let c = session.cases.get(case).ok_or_else(|| anyhow!("no case {case} in {name}"))?;
            print!("{}", render_explanation(c, &lang)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { scenario: name, baseline, trace_out, summary, format } => {
            let format = TraceFormat::parse_name(&format)?;
            let sc = scenario(&name)?;
            let mode = if baseline { RunMode::Baseline } else { RunMode::WithFramework };
            let trace = sim::run(&sc, mode);
            let rendered = sim::emit_trace(&trace, format);
            match trace_out {
                Some(path) => std::fs::write(&path, rendered).with_context(|| format!("writing {path}"))?,
                None => print!("{rendered}"),
            }
            if summary {
                print!("{}", summarize(&trace));
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn join<T: fmt::Display>(items: impl Iterator<Item = T>) -> String {
    items.map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}
