"""``maxent-lab`` command line.

Exit codes: 0 success, 1 validation error (bad flags, config or data),
2 numerical non-convergence, 3 I/O error. A suite run with a failing
check also exits 1.
"""
import argparse
import json
import sys
import time

from maxent_lab import config as cfgmod
from maxent_lab.discrete_prob import SampleSet
from maxent_lab.equivalence_lab import (
    Instance,
    generate_equiv_instance,
    generate_violating_instance,
    verify_equivalence_theorem,
    verify_inequality_chain,
    xor_instance,
)
from maxent_lab.errors import LabError, NonConvergence, ParseError, RejectionBudgetExceeded, ValidationError
from maxent_lab.harness import OutputDir, RunRecord
from maxent_lab.info_plane import plane_svg, verify_ib_corollary
from maxent_lab.maxent_core import solve_original_me, train_feature_softmax
from maxent_lab.recursive_net import bits_task, init_stack, train, xor_samples
from maxent_lab.suite import BITS_HIDDEN, info_plane_run, run_suite, table_csv

EXIT_OK, EXIT_INVALID, EXIT_NONCONV, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    return vals


def _str_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _common(p):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out-dir", help="output directory (overrides $MAXENT_LAB_OUT and the config)")


def _generator_flags(p):
    p.add_argument("--instance", help="read the instance from this JSON file instead of generating one")
    p.add_argument("--seed", type=int, dest="generator.seed")
    p.add_argument("--n", type=int, dest="generator.n_features")
    p.add_argument("--y", type=int, dest="generator.y_size")
    p.add_argument("--kind", choices=cfgmod.GENERATOR_KINDS, dest="generator.kind")


def _solver_flags(p, prefix):
    p.add_argument("--lr", type=float, dest=f"{prefix}.learning_rate")
    p.add_argument("--max-iters", type=int, dest=f"{prefix}.max_iters")
    p.add_argument("--grad-tol", type=float, dest=f"{prefix}.grad_tol")


def build_parser():
    parser = _Parser(prog="maxent-lab", description="Maximum-entropy / layer-stack laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="emit an instance as JSON")
    _common(p)
    _generator_flags(p)
    p.add_argument("--name", default="instance.json")

    p = sub.add_parser("solve-me", help="solve the original ME model on an instance's joint")
    _common(p)
    _generator_flags(p)
    _solver_flags(p, "me_solver")

    p = sub.add_parser("train", help="train a feature softmax or a layer stack")
    _common(p)
    _generator_flags(p)
    p.add_argument("--model", choices=("softmax", "stack"), default="stack")
    p.add_argument("--task", choices=cfgmod.NET_TASKS, dest="net.task")
    p.add_argument("--hidden", type=_int_list, dest="net.hidden")
    p.add_argument("--net-seed", type=int, dest="net.seed")
    p.add_argument("--mode", choices=("backprop", "coordinate"), dest="net.mode")
    p.add_argument("--sweeps", type=int, dest="net.sweeps")
    p.add_argument("--inner-iters", type=int, dest="net.inner_iters")
    p.add_argument("--order", choices=("top_down", "bottom_up"), dest="net.order")
    p.add_argument("--beta", type=float, dest="net.beta")
    p.add_argument("--l2", type=float, dest="net.l2")
    _solver_flags(p, "net")

    p = sub.add_parser("verify", help="equivalence report, inequality chain and IB corollary")
    _common(p)
    _generator_flags(p)
    _solver_flags(p, "solver")

    p = sub.add_parser("infoplane", help="train the 12-bit task and emit its information plane")
    _common(p)
    p.add_argument("--seed", type=int, dest="suite.seed")
    p.add_argument("--iters", type=int, dest="suite.bits_iters")
    p.add_argument("--bins", type=int, dest="estimator.bins")
    p.add_argument("--samples", type=int, dest="estimator.n_samples")
    p.add_argument("--hidden", type=_int_list, default=list(BITS_HIDDEN))

    p = sub.add_parser("suite", help="run the acceptance battery")
    _common(p)
    p.add_argument("--seed", type=int, dest="suite.seed")
    p.add_argument("--checks", type=_str_list, dest="suite.checks")
    p.add_argument("--theorem-tv-tol", type=float, dest="suite.theorem_tv_tol")
    return parser


def _apply_overrides(cfg, args):
    """Copy the ``section.field`` flags that were given onto the config."""
    for key, value in vars(args).items():
        if value is not None and "." in key:
            section, name = key.split(".")
            setattr(getattr(cfg, section), name, value)
    return cfg.validate()


def _instance(cfg, args):
    if getattr(args, "instance", None):
        with open(args.instance, "r", encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(exc.msg, exc.lineno, exc.colno) from None
        return Instance.from_json(obj)
    g = cfg.generator
    if g.kind == "equiv":
        return generate_equiv_instance(g.seed, g.n_features, g.y_size)
    if g.kind == "xor":
        return xor_instance()
    return generate_violating_instance(g.seed, g.kind)


# -- subcommands ---------------------------------------------------------

def cmd_gen(cfg, args, out):
    inst = _instance(cfg, args)
    out.write_json(args.name, inst.to_json())
    return {"n_features": inst.n_features, "y_size": inst.y_size}, cfg.generator.seed


def cmd_solve_me(cfg, args, out):
    inst = _instance(cfg, args)
    params, cond = solve_original_me(inst.joint, cfg.me_solver.train_config())
    out.write_json("me_solution.json", {**params.to_json(), "conditional": cond.tolist()})
    return {"x_size": inst.joint.dims[0], "y_size": inst.y_size}, cfg.generator.seed


def _stack_data(cfg):
    if cfg.net.task == "xor":
        return xor_samples()
    return bits_task(cfg.net.seed, n_samples=cfg.estimator.n_samples)


def cmd_train(cfg, args, out):
    if args.model == "softmax":
        inst = _instance(cfg, args)
        data = SampleSet.from_joint(inst.joint, inst.features)
        params = train_feature_softmax(data, cfg.solver.train_config())
        out.write_json("softmax.json", params.to_json())
        return {"n_features": inst.n_features, "y_size": inst.y_size}, cfg.generator.seed
    data = _stack_data(cfg)
    net0 = init_stack([data.dim] + list(cfg.net.hidden), data.y_size, cfg.net.seed)
    net, trace = train(net0, data, cfg.net.train_config())
    out.write_json("stack_init.json", net0.to_json())
    out.write_json("stack.json", net.to_json())
    out.write_text("trace.csv", trace.to_csv())
    final = trace.final
    summary = {
        "final_loss": final.loss,
        "final_train_error": final.train_error,
        "converged": trace.converged,
        "records": len(trace.records),
    }
    return summary, cfg.net.seed


def cmd_verify(cfg, args, out):
    inst = _instance(cfg, args)
    rep = verify_equivalence_theorem(inst, cfg.solver.train_config(), me_cfg=cfg.me_solver.train_config())
    chain = verify_inequality_chain(inst) if inst.n_features >= 2 else None
    ib = verify_ib_corollary(inst)
    text = rep.to_csv()
    out.write_text("verify.csv", text)
    out.write_json("verify.json", {"equivalence": rep.to_json(), "inequality_chain": chain, "ib": ib})
    sys.stdout.write(text)
    return {"pass": rep.passed, "tv": rep.tv_distance, "ib_gap": ib["gap"]}, cfg.generator.seed


def cmd_infoplane(cfg, args, out):
    traj, trace, _ = info_plane_run(cfg, args.hidden)
    out.write_text("infoplane.csv", traj.to_csv())
    out.write_text("infoplane.svg", plane_svg(traj))
    return {"points": len(traj.points), "final_train_error": trace.final.train_error}, cfg.suite.seed


def cmd_suite(cfg, args, out):
    record, rows = run_suite(cfg, out)
    sys.stdout.write(table_csv(rows))
    return record, cfg.suite.seed


COMMANDS = {
    "gen": cmd_gen,
    "solve-me": cmd_solve_me,
    "train": cmd_train,
    "verify": cmd_verify,
    "infoplane": cmd_infoplane,
    "suite": cmd_suite,
}


def run(argv):
    """Parse and execute; returns (exit code, RunRecord or None)."""
    args = build_parser().parse_args(argv)
    cfg = cfgmod.load_config(args.config) if args.config else cfgmod.ExperimentConfig()
    cfg = _apply_overrides(cfg, args)
    out = OutputDir.resolve(cfg.output.dir, args.out_dir)
    t0 = time.perf_counter()
    result, seed = COMMANDS[args.command](cfg, args, out)
    if isinstance(result, RunRecord):
        record = result
        record.outputs = list(out.written)
    else:
        record = RunRecord(args.command, cfg.config_hash(), int(seed), outputs=list(out.written), summary=result)
    record.wall_time_ms = 1000.0 * (time.perf_counter() - t0)
    out.write_json("run.json", record.to_json(with_time=False))
    print(f"{args.command}: {record.wall_time_ms:.0f} ms, outputs in {out.root}", file=sys.stderr)
    code = EXIT_OK
    if args.command == "suite" and not record.summary["all_passed"]:
        print("failing checks: " + ", ".join(record.summary["failed_checks"]), file=sys.stderr)
        code = EXIT_INVALID
    return code, record


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return run(argv)[0]
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except ParseError as exc:
        print(f"error: parse error at line {exc.line}, column {exc.column}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NonConvergence, RejectionBudgetExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except (ValidationError, LabError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
