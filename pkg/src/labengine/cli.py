"""Command line entry point.

    lab new "study X" --mode Explore      create a project and run it
    lab watch <project>                   tail a project's event journal
    lab rollback <project> <seq>          rewind to an earlier event
    lab resume <project>                  continue an interrupted project
    lab eval --papers papers.json ...     score manuscripts and report gains
    lab serve                             start the HTTP control plane

Exit codes: 0 success, 2 validation problem, 3 budget exhausted,
4 conflicting concurrent access.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .config import LabConfig
from .errors import (
    BudgetExhausted,
    Conflict,
    EmptyPrompt,
    HarnessBusy,
    InvalidTarget,
    LabError,
    TargetAheadOfHead,
    UnknownProject,
    ValidationFailed,
    WriterConflict,
)
from .pipeline import ProjectEngine

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3
EXIT_CONFLICT = 4


def _engine(args: argparse.Namespace) -> ProjectEngine:
    home = Path(args.home)
    config = LabConfig.from_file(args.config) if args.config else LabConfig()
    return ProjectEngine(home, config=config)


def cmd_new(args: argparse.Namespace) -> int:
    engine = _engine(args)
    project_id = engine.create_project(args.prompt, args.mode,
                                       project_id=args.project_id)
    print(f"created {project_id}")
    if args.no_run:
        return EXIT_OK
    state = engine.run_project(project_id)
    print(f"stage: {state.current_stage}  completed: {state.completed}")
    if state.manuscript_ref:
        print(f"manuscript: {state.manuscript_ref}")
    return EXIT_OK


def cmd_watch(args: argparse.Namespace) -> int:
    engine = _engine(args)
    log = engine.open_log(args.project_id)
    if not log.exists():
        raise UnknownProject(args.project_id)
    cursor = args.since
    try:
        while True:
            for rec in log.read():
                if rec.seq > cursor:
                    cursor = rec.seq
                    print(json.dumps(rec.to_doc(), ensure_ascii=False))
            if not args.follow or log.resume().completed:
                break
            time.sleep(0.5)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def cmd_rollback(args: argparse.Namespace) -> int:
    engine = _engine(args)
    marker = engine.rollback(args.project_id, args.target_seq)
    print(json.dumps(marker, ensure_ascii=False))
    return EXIT_OK


def cmd_resume(args: argparse.Namespace) -> int:
    engine = _engine(args)
    state = engine.run_project(args.project_id)
    print(f"stage: {state.current_stage}  completed: {state.completed}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    engine = _engine(args)
    papers = json.loads(Path(args.papers).read_text(encoding="utf-8"))
    result = engine.evaluate(papers, args.baseline, args.candidate)
    print(json.dumps(result, indent=2, ensure_ascii=False))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(_engine(args))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lab",
        description="event-sourced orchestration for autonomous research projects",
        epilog="exit codes: 0 success, 2 validation, 3 budget, 4 conflict")
    parser.add_argument("--home", default=os.environ.get("LAB_HOME", "./lab_home"),
                        help="engine home directory (default: $LAB_HOME or ./lab_home)")
    parser.add_argument("--config", default=None, help="path to a JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("new", help="create a project and run it to completion")
    p.add_argument("prompt")
    p.add_argument("--mode", default="Explore",
                   choices=["Explore", "Discussion", "Reproduce"])
    p.add_argument("--project-id", default=None)
    p.add_argument("--no-run", action="store_true",
                   help="create only; do not run the pipeline")
    p.set_defaults(func=cmd_new)

    p = sub.add_parser("watch", help="print a project's events as NDJSON")
    p.add_argument("project_id")
    p.add_argument("--since", type=int, default=0)
    p.add_argument("--follow", action="store_true")
    p.set_defaults(func=cmd_watch)

    p = sub.add_parser("rollback", help="rewind a project to an event seq")
    p.add_argument("project_id")
    p.add_argument("target_seq", type=int)
    p.set_defaults(func=cmd_rollback)

    p = sub.add_parser("resume", help="continue an interrupted project")
    p.add_argument("project_id")
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("eval", help="review manuscripts and report gains")
    p.add_argument("--papers", required=True,
                   help="JSON file: [{paper_id, systems: {name: [text, ...]}}]")
    p.add_argument("--baseline", required=True)
    p.add_argument("--candidate", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="start the HTTP control plane")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rc = args.func(args)
        # flush here so a closed pipe surfaces as a catchable error instead
        # of an "Exception ignored" message during interpreter shutdown
        sys.stdout.flush()
        return rc
    except BrokenPipeError:
        # downstream pager/head closed the pipe; not an error
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 0
    except BudgetExhausted as exc:
        print(f"budget: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (Conflict, WriterConflict, HarnessBusy) as exc:
        print(f"conflict: {exc}", file=sys.stderr)
        return EXIT_CONFLICT
    except (EmptyPrompt, ValidationFailed, InvalidTarget, TargetAheadOfHead,
            UnknownProject, ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
