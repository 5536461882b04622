"""Minimal HTTP wrapper around the experiment runner.

Exposes the same entry points as the CLI for programmatic use: POST a
configuration, get back the run summary with artifact paths. Long-running
figure sweeps execute synchronously; this service is a thin adapter, not a
job queue.
"""

from __future__ import annotations

from typing import Dict, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .experiments import ConfigError, ExperimentConfig, run_experiment
from .spectral import SolverConvergenceError

app = FastAPI(title="qfpme", version="0.1.0")


class ExperimentRequest(BaseModel):
    tag: str = Field(description="steady, grid, traj, ft, or fig2..fig6")
    overrides: Dict[str, str] = Field(default_factory=dict)
    threads: int = 1
    config_path: Optional[str] = None


@app.get("/health")
def health() -> Dict[str, str]:
    return {"status": "ok"}


@app.post("/run")
def run(request: ExperimentRequest) -> Dict:
    try:
        cfg = ExperimentConfig.from_file(
            request.config_path, request.tag, request.overrides
        )
        return run_experiment(cfg, threads=request.threads)
    except (ConfigError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except (SolverConvergenceError, RuntimeError) as exc:
        raise HTTPException(status_code=500, detail=str(exc))
