"""Synthetic-agent campaigns: generation, manifest, loading."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..partition_model import PartitionModelSpec, Trajectory, canonical_catalog, simulate_agent
from ..stimulus import build_five_four_set, generate_context_sequence
from .config import ExperimentConfig
from .io import ingest_trajectory_csv, write_json, write_trajectory_csv
from .parallel import parallel_map

MANIFEST = "manifest.json"


def default_generator_theta(spec: PartitionModelSpec, n: int) -> np.ndarray:
    """0.03 sqrt(n) in every cell; OnePerItem uses (0.003 + 0.007 k) sqrt(n) on cell k."""
    root = math.sqrt(n)
    if spec.name == "OnePerItem":
        return spec.theta((0.003 + 0.007 * np.arange(spec.D)) * root)
    return spec.theta(np.full((spec.D, spec.dim), 0.03 * root))


def agent_seed(master_seed: int, generator: str, agent: int) -> int:
    """64-bit seed from (master seed, generator name, agent index)."""
    name_key = int.from_bytes(hashlib.sha256(generator.encode()).digest()[:8], "little")
    state = np.random.SeedSequence([int(master_seed), name_key, int(agent)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def build_catalog(cfg: ExperimentConfig, names=None) -> list[PartitionModelSpec]:
    """Catalog restricted to ``cfg.models`` unless ``names`` is given."""
    names = cfg.models if names is None else names
    return canonical_catalog(build_five_four_set(), cfg.cell_kind, None, cfg.n, cfg.sign, names)


def generator_theta(cfg: ExperimentConfig, spec: PartitionModelSpec) -> np.ndarray:
    if spec.name in cfg.generator_theta:
        return spec.theta(cfg.generator_theta[spec.name])
    return default_generator_theta(spec, cfg.n)


@dataclass
class CampaignEntry:
    file: str
    generator: Optional[str]
    theta: Optional[list]
    seed: Optional[int]
    n: int
    K: int
    schedule: Optional[dict]

    @property
    def id(self) -> str:
        return Path(self.file).with_suffix("").as_posix().replace("/", "__")

    def to_json(self) -> dict:
        return {
            "file": self.file, "generator": self.generator, "theta": self.theta,
            "seed": self.seed, "n": self.n, "K": self.K, "schedule": self.schedule,
        }


def _simulate_one(args):
    spec, theta, contexts, seed = args
    stimuli = build_five_four_set()
    return simulate_agent(spec, theta, contexts, stimuli.reward, seed, stimuli.n_actions)


def simulate_campaign(cfg: ExperimentConfig) -> list[tuple[CampaignEntry, Trajectory]]:
    """All synthetic agents in (generator, agent index) order, in memory."""
    stimuli = build_five_four_set()
    schedule = cfg.context_schedule()
    contexts = generate_context_sequence(stimuli, schedule)
    jobs, entries = [], []
    for spec in build_catalog(cfg):
        theta = generator_theta(cfg, spec)
        for i in range(cfg.agents_per_model):
            seed = agent_seed(cfg.master_seed, spec.name, i)
            jobs.append((spec, theta, contexts, seed))
            entries.append(CampaignEntry(
                f"{spec.name}/agent_{i:03d}.csv", spec.name, theta.tolist(), seed,
                cfg.n, stimuli.n_actions, schedule.to_dict(),
            ))
    trajs = parallel_map(_simulate_one, jobs, cfg.workers)
    return list(zip(entries, trajs))


def generate_campaign(cfg: ExperimentConfig, out_dir) -> list[tuple[CampaignEntry, Trajectory]]:
    """Simulate and write every agent CSV plus ``manifest.json`` and ``objects.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    items = simulate_campaign(cfg)
    for entry, traj in items:
        path = out / entry.file
        path.parent.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(traj, path)
    build_five_four_set().to_csv(out / "objects.csv")
    write_json(
        {
            "master_seed": cfg.master_seed,
            "n": cfg.n,
            "K": 2,
            "cell_kind": cfg.cell_kind,
            "sign": cfg.sign,
            "trajectories": [e.to_json() for e, _ in items],
        },
        out / MANIFEST,
    )
    return items


def load_campaign(campaign_dir) -> list[tuple[CampaignEntry, Trajectory]]:
    """Read a campaign back; raises FileNotFoundError naming every missing file."""
    root = Path(campaign_dir)
    manifest_path = root / MANIFEST
    if not manifest_path.exists():
        raise FileNotFoundError(f"campaign manifest not found: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    entries = [CampaignEntry(**e) for e in manifest["trajectories"]]
    missing = [e.file for e in entries if not (root / e.file).exists()]
    if missing:
        raise FileNotFoundError(f"{len(missing)} campaign file(s) missing: {', '.join(missing)}")
    items = []
    for e in entries:
        traj = ingest_trajectory_csv(root / e.file, e.K)
        traj.generator_tag = {"model": e.generator, "theta": e.theta, "seed": e.seed}
        items.append((e, traj))
    return items


def load_trajectory_files(paths, n_actions: int = 2) -> list[tuple[CampaignEntry, Trajectory]]:
    items = []
    for p in paths:
        traj = ingest_trajectory_csv(p, n_actions)
        items.append((CampaignEntry(Path(p).name, None, None, None, traj.n, n_actions, None), traj))
    return items
