"""Behavioral cloning: demonstration recording, the steering policy network,
training, and closed-loop rollouts."""

from .dataset import Demo, DemoSample, load_demo_dir, read_demo_csv, write_demo_csv
from .model import PolicyNet, infer, load_policy, save_policy, train
from .rollout import record_demos, rollout, run_bc_pipeline, scripted_demo

__all__ = [
    "Demo", "DemoSample", "load_demo_dir", "read_demo_csv", "write_demo_csv",
    "PolicyNet", "infer", "load_policy", "save_policy", "train",
    "record_demos", "rollout", "run_bc_pipeline", "scripted_demo",
]
