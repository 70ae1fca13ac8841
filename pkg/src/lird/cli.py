"""Command-line orchestration of the pipeline stages.

Each subcommand reads its prerequisites from the output directory, echoes
its fully-resolved configuration next to its outputs, and is idempotent
for fixed inputs and seeds.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import agent as agent_mod
from . import data, embed as embed_mod, evaluation, sim as sim_mod
from .config import Config
from .embed import EmbeddingTable
from .net import load_checkpoint, save_checkpoint
from .sim import Simulator


def _resolve_config(config_path, seed, **overrides) -> Config:
    if seed is not None:
        overrides["seed"] = seed
    return Config.load(config_path, overrides)


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise click.ClickException(
            f"missing {path.name}: run `lird {produced_by}` first"
        )
    return path


def _echo_config(cfg: Config, out: Path, command: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    cfg.dump(out / f"{command}.config.json")


common_options = [
    click.option("--config", "config_path", type=click.Path(exists=True),
                 default=None, help="JSON config file."),
    click.option("--seed", type=int, default=None, help="Master seed override."),
    click.option("--out", type=click.Path(), default="out",
                 help="Artifact directory."),
]


def with_common(f):
    for opt in reversed(common_options):
        f = opt(f)
    return f


@click.group()
def main():
    """Desk-scale list-wise RL recommendation lab."""


@main.command()
@with_common
@click.option("--sessions", "n_sessions", type=int, default=None,
              help="Number of synthetic sessions.")
@click.option("--clusters", type=int, default=None)
@click.option("--catalog-size", type=int, default=None)
def gen(config_path, seed, out, n_sessions, clusters, catalog_size):
    """Generate the synthetic session log and catalog."""
    cfg = _resolve_config(config_path, seed, n_sessions=n_sessions,
                          n_clusters=clusters, catalog_size=catalog_size)
    out = Path(out)
    _echo_config(cfg, out, "gen")
    sessions = data.generate_synthetic(
        cfg.catalog_size, cfg.n_sessions, cfg.n_clusters,
        seed=cfg.stage_seed("gen"),
        events_per_session=cfg.events_per_session, prior_len=cfg.n_state,
    )
    data.save_sessions(sessions, out / "sessions.tsv")
    data.save_catalog(data.Catalog(cfg.catalog_size), out / "catalog.txt")
    click.echo(f"wrote {len(sessions)} sessions to {out / 'sessions.tsv'}")


@main.command()
@with_common
def embed(config_path, seed, out):
    """Train item embeddings from the training split of the session log."""
    cfg = _resolve_config(config_path, seed)
    out = Path(out)
    _echo_config(cfg, out, "embed")
    sessions = data.load_sessions(_require(out / "sessions.tsv", "gen"),
                                  cfg.catalog_size)
    train_sessions, _ = data.split_sessions(sessions, cfg.train_fraction)
    table, losses = embed_mod.train_embeddings(
        train_sessions, cfg.catalog_size, d=cfg.d, window=cfg.window,
        n_negative=cfg.n_negative, epochs=cfg.embed_epochs,
        lr=cfg.embed_lr, seed=cfg.stage_seed("embed"),
    )
    table.save(out / "embeddings.txt")
    click.echo(f"embedding loss per epoch: {['%.4f' % l for l in losses]}")
    click.echo(f"wrote {out / 'embeddings.txt'}")


@main.command("build-sim")
@with_common
def build_sim(config_path, seed, out):
    """Build and cache the simulator memory from the training split."""
    cfg = _resolve_config(config_path, seed)
    out = Path(out)
    _echo_config(cfg, out, "build-sim")
    sessions = data.load_sessions(_require(out / "sessions.tsv", "gen"),
                                  cfg.catalog_size)
    table = EmbeddingTable.load(_require(out / "embeddings.txt", "embed"))
    train_sessions, _ = data.split_sessions(sessions, cfg.train_fraction)
    memory = sim_mod.build_memory(train_sessions, table, cfg.n_state,
                                  cfg.k_list, cfg.reward_map)
    sim_mod.save_memory(out / "memory.npz", memory, table)
    groups = sim_mod.build_groups(memory)
    click.echo(f"{len(memory)} memory triples in {len(groups)} reward groups")


def _load_simulator(cfg: Config, out: Path) -> tuple[EmbeddingTable, Simulator]:
    table = EmbeddingTable.load(_require(out / "embeddings.txt", "embed"))
    memory = sim_mod.load_memory(_require(out / "memory.npz", "build-sim"), table)
    return table, Simulator.from_memory(table, memory, cfg.sim_config())


@main.command()
@with_common
@click.option("--episodes", type=int, default=None)
@click.option("--k", "k_list", type=int, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--gamma", type=float, default=None)
def train(config_path, seed, out, episodes, k_list, alpha, gamma):
    """Train the actor-critic agent against the simulator."""
    cfg = _resolve_config(config_path, seed, episodes=episodes,
                          k_list=k_list, alpha=alpha, gamma=gamma)
    out = Path(out)
    _echo_config(cfg, out, "train")
    sessions = data.load_sessions(_require(out / "sessions.tsv", "gen"),
                                  cfg.catalog_size)
    train_sessions, _ = data.split_sessions(sessions, cfg.train_fraction)
    table, simulator = _load_simulator(cfg, out)

    actor, critic, logs = agent_mod.train(
        train_sessions, simulator, cfg.agent_config(),
        seed=cfg.stage_seed("train"), catalog_size=cfg.catalog_size,
    )
    save_checkpoint(
        out / "checkpoint.npz",
        {"actor": actor.params, "actor_target": actor.target_params,
         "critic": critic.params, "critic_target": critic.target_params},
        meta={"n_state": cfg.n_state, "k_list": cfg.k_list, "d": cfg.d,
              "seed": cfg.seed},
    )
    with open(out / "training_log.tsv", "w", encoding="ascii") as fh:
        fh.write("episode\tcumulative_reward\tcritic_loss\tmean_q\n")
        for log in logs:
            fh.write(log.to_line() + "\n")
    click.echo(f"trained {cfg.episodes} episodes; "
               f"final cumulative reward {logs[-1].cumulative_reward:.3f}")


def _load_agent(cfg: Config, out: Path, table: EmbeddingTable):
    expect = {
        "actor": [cfg.n_state * cfg.d, *cfg.hidden, cfg.k_list * cfg.d],
        "critic": [(cfg.n_state + cfg.k_list) * cfg.d, *cfg.hidden, 1],
    }
    nets, meta = load_checkpoint(_require(out / "checkpoint.npz", "train"),
                                 expect=expect)
    actor = agent_mod.Actor(nets["actor"], cfg.k_list, cfg.d)
    actor.target_params = nets["actor_target"]
    critic = agent_mod.Critic(nets["critic"])
    critic.target_params = nets["critic_target"]
    return actor, critic, meta


@main.command("eval")
@with_common
@click.option("--length-class", type=click.Choice(["short", "long", "both"]),
              default="both")
@click.option("--policies", default="lird,random,popularity",
              help="Comma-separated policy names.")
@click.option("--sessions", "max_sessions", type=int, default=None,
              help="Cap on evaluated test sessions.")
def eval_cmd(config_path, seed, out, length_class, policies, max_sessions):
    """Run the testing protocol for the trained agent and baselines."""
    cfg = _resolve_config(config_path, seed, eval_sessions=max_sessions)
    out = Path(out)
    _echo_config(cfg, out, "eval")
    sessions = data.load_sessions(_require(out / "sessions.tsv", "gen"),
                                  cfg.catalog_size)
    train_sessions, test_sessions = data.split_sessions(sessions,
                                                        cfg.train_fraction)
    table, simulator = _load_simulator(cfg, out)
    agent_cfg = cfg.agent_config()

    policy_names = [p.strip() for p in policies.split(",") if p.strip()]
    classes = ["short", "long"] if length_class == "both" else [length_class]

    built: dict[str, evaluation.Policy] = {}
    for name in policy_names:
        if name == "lird":
            actor, critic, _ = _load_agent(cfg, out, table)
            built[name] = evaluation.LirdPolicy(actor, critic, table,
                                                agent_cfg, cfg.catalog_size)
        elif name == "random":
            built[name] = evaluation.RandomPolicy(cfg.catalog_size,
                                                  cfg.k_list, table)
        elif name == "popularity":
            built[name] = evaluation.PopularityPolicy(train_sessions,
                                                      cfg.catalog_size,
                                                      cfg.k_list, table)
        elif name == "itemwise_dqn":
            built[name] = evaluation.train_itemwise_dqn(
                train_sessions, simulator, agent_cfg,
                seed=cfg.stage_seed("dqn"), catalog_size=cfg.catalog_size,
                episodes=cfg.dqn_episodes,
            )
        else:
            raise click.ClickException(f"unknown policy {name!r}")

    eval_seed = cfg.stage_seed("eval")
    rows = [evaluation.EvalReport.CSV_HEADER]
    traces = {}
    for name in policy_names:
        for cls_name in classes:
            report, trace = evaluation.run_test_protocol(
                built[name], test_sessions, simulator, cls_name, cfg.n_state,
                seed=eval_seed[0] * 31 + eval_seed[1],
                max_sessions=cfg.eval_sessions,
            )
            rows.append(report.to_row())
            traces[f"{name}/{cls_name}"] = trace
            click.echo(rows[-1])
    with open(out / "reports.csv", "w", encoding="ascii") as fh:
        fh.write("\n".join(rows) + "\n")
    with open(out / "protocol_trace.json", "w", encoding="ascii") as fh:
        json.dump(traces, fh, indent=0, sort_keys=True)
    click.echo(f"wrote {out / 'reports.csv'}")


@main.command()
@with_common
@click.option("--param", type=click.Choice(["K", "alpha"]), required=True)
@click.option("--values", required=True,
              help="Comma-separated sweep values, e.g. 1,2,4,8.")
def sweep(config_path, seed, out, param, values):
    """Train and test once per swept value of K or alpha."""
    cfg = _resolve_config(config_path, seed)
    out = Path(out)
    _echo_config(cfg, out, "sweep")
    parsed = [float(v) if param == "alpha" else int(v)
              for v in values.split(",") if v.strip() != ""]
    sessions = None
    sessions_file = out / "sessions.tsv"
    if sessions_file.exists():
        sessions = data.load_sessions(sessions_file, cfg.catalog_size)
    rows = evaluation.sweep(param, parsed, cfg, sessions=sessions)
    csv_text = evaluation.sweep_rows_to_csv(rows)
    path = out / f"sweep_{param}.csv"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(csv_text)
    click.echo(csv_text.rstrip("\n"))
    click.echo(f"wrote {path}")


@main.command()
@with_common
def report(config_path, seed, out):
    """Summarize evaluation and sweep outputs."""
    cfg = _resolve_config(config_path, seed)
    out = Path(out)
    _echo_config(cfg, out, "report")
    lines = ["# Run summary", ""]
    reports_file = _require(out / "reports.csv", "eval")
    lines.append("## Policy comparison")
    lines.append("")
    lines.extend(reports_file.read_text().rstrip("\n").split("\n"))
    lines.append("")
    for param in ("K", "alpha"):
        path = out / f"sweep_{param}.csv"
        if path.exists():
            lines.append(f"## Sweep over {param}")
            lines.append("")
            body = path.read_text().rstrip("\n").split("\n")
            lines.extend(body)
            # Peak location is reported, not asserted: it is data-dependent.
            best = max(body[1:], key=lambda r: float(r.split(",")[5]))
            lines.append("")
            lines.append(f"best ndcg row: {best}")
            lines.append("")
    text = "\n".join(lines) + "\n"
    (out / "summary.md").write_text(text)
    click.echo(text)


if __name__ == "__main__":
    main()
