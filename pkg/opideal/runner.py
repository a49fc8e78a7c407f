import logging
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .config import Command, Lemma, RunConfig
from .constructions import (
    build_T_M, build_S_M, build_J_VW, build_net_embedding, build_non_fss_diagonal, join_masks, schedule_check,
)
from .error import ConfigError
from .factorization import (
    Witness, factor_K_through_witnessed_T, factor_identity_through_T_n, factor_through_embedding, factor_through_L,
    factor_through_formal_identity, minimal_m_cols,
)
from .fss_probe import corollary_witness, fss_profile, l1_to_lq_profile
from .opnorm import NormRequest, op_norm
from .parallel import child_seeds, parallel_map
from .rip import RipFamily, certify_almost_on, certify_besselian, gen_family
from .separation import dual_transport_gap, remark_experiment, separation_experiment
from .serializers import profile_to_csv, serialize_matrix
from .spaces import adjoint, compose
from .types import (
    TWO, BlockSpace, DenseOperator, ExperimentReport, FssProfile, NormBound, RipCertificate, Verdict, VerdictStatus,
    l2, linf,
)

__all__ = ['ExperimentRunner', 'run', 'write_report', 'tool_version', 'EXACT_TOLERANCE', 'NORM_SLACK']

logger = logging.getLogger(__name__)

EXACT_TOLERANCE = 1e-12
RESIDUAL_TOLERANCE = 1e-9
NORM_SLACK = 1e-6
EMBEDDING_ROWS = 16
EMBEDDING_TARGET_ROWS = 4


def tool_version() -> str:
    try:
        return version("opideal")
    except PackageNotFoundError:
        return "0.0.0+unknown"


def _ids(certificates: Iterable[RipCertificate]) -> List[str]:
    return [c.id for c in certificates]


class ExperimentRunner:
    def __init__(self, config: RunConfig):
        self.config = config
        self.schedule = config.param_schedule()
        config.masks_within(self.schedule.count)
        self.certificates: List[RipCertificate] = []
        self.verdicts: List[Verdict] = []
        self.results: Dict[str, Any] = {}
        self.profile: Optional[FssProfile] = None
        self._family: Optional[RipFamily] = None
        self._handlers: Dict[Command, Callable[[], None]] = {
            Command.RIP_GEN: self.rip_gen,
            Command.RIP_CERTIFY: self.rip_certify,
            Command.BUILD: self.build,
            Command.FACTORIZE: self.factorize,
            Command.SEPARATE: self.separate,
            Command.REMARK: self.remark,
            Command.FSS_PROBE: self.fss_probe,
            Command.SCHEDULE_CHECK: self.check_schedule,
        }

    @property
    def family(self) -> RipFamily:
        if self._family is None:
            self._family = gen_family(self.schedule.levels, self.config.seed)
        return self._family

    def run(self) -> ExperimentReport:
        started = time.perf_counter()
        logger.info("running %s on schedule %s", self.config.command.value, self.schedule.name or "explicit")
        self._handlers[self.config.command]()
        return ExperimentReport(
            command=self.config.command.value,
            config=self.config.model_dump(mode='json'),
            tool_version=tool_version(),
            certificates=self.certificates,
            results=self.results,
            verdicts=self.verdicts,
            wall_clock_ms=(time.perf_counter() - started) * 1000.0,
        )

    def verdict(self, name: str, passed: Optional[bool], relies_on: Sequence[RipCertificate] = (),
                detail: str = "", certified: bool = True):
        if passed is None:
            status = VerdictStatus.INFORMATIONAL
        elif not certified:
            status = VerdictStatus.CONDITIONAL
        else:
            status = VerdictStatus.PASSED if passed else VerdictStatus.FAILED
        self.verdicts.append(Verdict(name=name, status=status, relies_on=_ids(relies_on), detail=detail))

    def certify(self, level: int, order: int, besselian: bool) -> RipCertificate:
        budgets = self.config.budgets
        certify = certify_besselian if besselian else certify_almost_on
        seed = np.random.SeedSequence([self.config.seed, level, order])
        certificate = certify(self.family, level, min(order, self.schedule.v(level)),
                              budget=budgets.subsets, samples=budgets.rip_samples, seed=seed,
                              threads=self.config.threads)
        self.certificates.append(certificate)
        return certificate

    def seeds(self, count: int) -> list:
        return child_seeds(self.config.seed, count)

    def norm(self, op: DenseOperator) -> NormBound:
        """Closed form when one exists, else bounds with ``norm_restarts`` ascent restarts."""
        return op_norm(op, NormRequest.AUTO, self.config.budgets.norm_restarts, seed=self.config.seed)

    # commands

    def rip_gen(self):
        levels = []
        deviation = 0.0
        for n, level in enumerate(self.family.levels, start=1):
            deviation = max(deviation, float(np.abs(np.linalg.norm(level.columns, axis=0) - 1).max()))
            levels.append({
                "level": n,
                "u": level.u,
                "v": level.v,
                "coherence": level.coherence(),
                "columns": serialize_matrix(level.columns),
            })
        self.results["levels"] = levels
        self.verdict("unit-columns", deviation <= EXACT_TOLERANCE, detail=f"max deviation {deviation:.3g}")

    def rip_certify(self):
        orders = self.config.orders
        if orders is not None and len(orders) != self.schedule.count:
            raise ConfigError(f"{len(orders)} orders given for {self.schedule.count} levels")
        default = self.schedule.s(1).value + 1
        for n in self.schedule.level_indices:
            order = orders[n - 1] if orders else default
            c = self.certify(n, order, besselian=False)
            self.verdict(f"spectrum:level={n}", -EXACT_TOLERANCE <= c.lambda_min and c.lambda_max <= c.order + 1e-9,
                         [c], detail=f"[{c.lambda_min:.6g}, {c.lambda_max:.6g}] over {c.samples} subsets")
            self.verdict(f"almost-on:level={n}", None, [c],
                         detail=f"{'holds' if c.holds else 'fails'} ({c.mode.value})")

    def build(self):
        schedule, family = self.schedule, self.family
        mask = self.config.mask_m or schedule.level_indices
        T_M = build_T_M(schedule, family, mask).realized
        norm = self.norm(T_M)
        self.results["t_m"] = {"shape": list(T_M.shape), "norm": norm.dict()}
        block_norms = {}
        for n in schedule.level_indices:
            block_norms[n] = self.norm(build_T_M(schedule, family, [n]).realized).upper
        self.results["block_norms"] = block_norms
        self.verdict("block-norms", all(abs(block_norms[n] - 1) <= EXACT_TOLERANCE for n in mask),
                     detail="||T_n|| = 1 on every level of the mask")

        S_M = build_S_M(schedule, family, mask)
        transported = compose(build_J_VW(schedule), T_M)
        self.verdict("adjoint-identity", bool(np.array_equal(adjoint(S_M).matrix, transported.matrix)))
        gaps = dual_transport_gap(schedule, family, mask)
        self.results["dual_transport_gap"] = gaps
        self.verdict("dual-transport", max(gaps.values()) <= EXACT_TOLERANCE)
        if self.config.mask_n:
            self.verdict("join", join_masks(schedule, family, mask, self.config.mask_n))

    def factorize(self):
        handlers = {
            Lemma.FORMAL_IDENTITY: self.factor_formal_identity,
            Lemma.IDENTITY: self.factor_identity,
            Lemma.EMBEDDING: self.factor_embedding,
            Lemma.LARGE_IDEAL: self.factor_large_ideal,
            Lemma.WITNESSED: self.factor_witnessed,
        }
        handlers[self.config.lemma]()

    def factor_formal_identity(self):
        schedule, family, config = self.schedule, self.family, self.config
        m = config.m or 1
        levels = config.mask_n or [n for n in schedule.level_indices if n > m]
        if not levels or any(n <= m for n in levels):
            raise ConfigError(f"the lemma needs target levels above m = {m}, got {levels}")
        s_m = schedule.s(m).value
        certificates = [self.certify(n, s_m + 1, besselian=True) for n in levels]
        certified = all(c.certifies for c in certificates)
        target = BlockSpace.uniform(TWO, [schedule.u(n) for n in levels], schedule.p)

        def sample(child):
            rng = np.random.default_rng(child)
            B = DenseOperator(rng.standard_normal((target.total_dim, schedule.u(m))), l2(schedule.u(m)), target)
            return factor_through_formal_identity(B.scaled(1.0 / self.norm(B).upper), schedule, family, m, levels,
                                                  config.budgets.lp_tolerance)

        found = parallel_map(sample, self.seeds(config.budgets.samples), config.threads)
        if not found:
            raise ConfigError("the lemma run needs at least one sample")
        residual = max(f.residual_norm for f in found)
        size = max(f.size for f in found)
        p_norm = max(f.P_norm.upper for f in found)
        r_norm = max(f.R_norm.upper for f in found)
        self.results["formal_identity"] = {
            "m": m, "levels": levels, "samples": len(found), "max_residual": residual, "max_size": size,
            "max_p_norm": p_norm, "max_r_norm": r_norm, "first": found[0].record().model_dump(mode='json'),
        }
        self.verdict("residual", residual <= 1.0 / m + RESIDUAL_TOLERANCE, certificates, certified=certified,
                     detail=f"max ||DB - RIP|| = {residual:.6g}")
        self.verdict("index-budget", size <= s_m, certificates, certified=certified, detail=f"max {size} <= {s_m}")
        self.verdict("p-norm", p_norm <= 2.0 + RESIDUAL_TOLERANCE, certificates, certified=certified)
        self.verdict("r-norm", r_norm <= 1.0 + RESIDUAL_TOLERANCE, certificates, certified=certified)

    def factor_identity(self):
        schedule, config = self.schedule, self.config
        m = config.m or 2
        level = config.level or schedule.count
        m_cols = config.m_cols or minimal_m_cols(m)
        runs = [factor_identity_through_T_n(self.family, m, level, m_cols, seed, config.budgets.max_tries)
                for seed in self.seeds(config.budgets.trials)]
        self.results["identity"] = [r.record().model_dump(mode='json') for r in runs]
        error = max(r.reconstruction_error for r in runs)
        self.verdict("reconstruction", error <= RESIDUAL_TOLERANCE, detail=f"max error {error:.3g}")
        self.verdict("a-norm", max(r.A_norm for r in runs) <= 2.0 + RESIDUAL_TOLERANCE)
        self.verdict("b-norm", max(r.B_norm for r in runs) <= 2.0 + RESIDUAL_TOLERANCE)

    def factor_embedding(self):
        config = self.config
        net = build_net_embedding(TWO, 2, 2.0, rows=EMBEDDING_ROWS)

        def sample(child):
            matrix = np.random.default_rng(child).standard_normal((EMBEDDING_TARGET_ROWS, 2))
            return factor_through_embedding(net, DenseOperator(matrix, l2(2), linf(EMBEDDING_TARGET_ROWS)),
                                            tol=config.budgets.lp_tolerance)

        found = parallel_map(sample, self.seeds(config.budgets.samples), config.threads)
        self.results["embedding"] = [f.record().model_dump(mode='json') for f in found]
        self.verdict("reconstruction", all(f.max_error <= RESIDUAL_TOLERANCE for f in found))
        self.verdict("a-norm", all(f.A_norm <= f.T_norm * (1 + NORM_SLACK) for f in found),
                     detail="||A|| <= ||T|| on every sample")

    def factor_large_ideal(self):
        T = build_non_fss_diagonal(self.schedule.p, self.config.dims or [1, 2])
        result = factor_through_L(T, tol=self.config.budgets.lp_tolerance, threads=self.config.threads)
        self.results["large_ideal"] = {"a_norm": result.A_norm, "t_norm": result.T_norm,
                                       "max_error": result.max_error, "rows": result.L.shape[0]}
        self.verdict("reconstruction", result.max_error <= RESIDUAL_TOLERANCE)
        self.verdict("a-norm", result.A_norm <= result.T_norm * (1 + NORM_SLACK))

    def factor_witnessed(self):
        dims = self.config.dims or [1, 2]
        T = build_non_fss_diagonal(TWO, dims)
        witnesses = []
        for index, dim in enumerate(dims):
            embedding = np.zeros((T.domain.total_dim, dim))
            embedding[T.domain.block_slice(index)] = 2.0 * np.eye(dim)
            witnesses.append(Witness(embedding, 0.5, index + 1))
        result = factor_K_through_witnessed_T(T, witnesses, tol=self.config.budgets.lp_tolerance)
        self.results["witnessed"] = {"a_norms": list(result.A_norms), "b_norm": result.B_norm,
                                     "uniform_bound": result.uniform_bound, "max_error": result.max_error}
        self.verdict("reconstruction", result.max_error <= RESIDUAL_TOLERANCE)
        self.verdict("uniform-bound", result.within_bound)

    def separate(self):
        schedule, config = self.schedule, self.config
        if not config.mask_m:
            raise ConfigError("separation needs a non-empty mask M")
        candidates = [n for n in config.mask_m if n not in config.mask_n]
        m = config.m or (candidates[0] if candidates else None)
        if m is None or m not in candidates:
            raise ConfigError(f"m must lie in M \\ N, M={config.mask_m}, N={config.mask_n}")
        order = schedule.s(m).value + 1
        certificates = [self.certify(n, order, besselian=True) for n in config.mask_n if n > m]
        certificates.append(self.certify(m, 19 * m * m, besselian=False))
        report = separation_experiment(schedule, self.family, config.mask_m, config.mask_n, m,
                                       config.budgets.samples, config.seed, config.threads, certificates,
                                       config.margin)
        self.results["separation"] = report.model_dump(mode='json')
        self.verdict("phi-t-m", abs(report.phi_t_m - 1) <= EXACT_TOLERANCE, detail=f"{report.phi_t_m!r}")
        self.verdict("identity-composite", abs(report.identity_composite) <= EXACT_TOLERANCE)
        self.verdict("unit-norm", report.within_unit_norm, detail=f"max {report.max_adversarial:.6g}")
        self.verdicts.append(Verdict(name="bound-6-over-m", status=report.bound_status, relies_on=_ids(certificates),
                                     detail="; ".join(report.notes)))
        if report.within_margin is not None:
            self.verdict("margin", None, detail=f"within margin: {report.within_margin}")
        gaps = dual_transport_gap(schedule, self.family, config.mask_m)
        self.results["dual_transport_gap"] = gaps
        self.verdict("dual-transport", max(gaps.values()) <= EXACT_TOLERANCE)

    def remark(self):
        report = remark_experiment(self.schedule, self.family, self.config.m or 1, self.config.budgets.samples,
                                   self.config.seed, self.config.threads)
        self.results["remark"] = report.model_dump(mode='json')
        self.verdict("psi-inclusion", abs(report.psi_inclusion - 1) <= EXACT_TOLERANCE)
        self.verdict("decay", None, detail=f"non-increasing: {report.non_increasing}. {report.note}".strip())

    def fss_probe(self):
        schedule, config = self.schedule, self.config
        mask = config.mask_m or schedule.level_indices
        T = build_T_M(schedule, self.family, mask).realized
        dims = config.dims or list(range(1, min(4, T.domain.total_dim) + 1))
        self.profile = fss_profile(T, dims, config.budgets.trials, config.seed, config.threads)
        upper = self.norm(T).upper
        self.results["profile"] = self.profile.model_dump(mode='json')
        self.verdict("profile-range", all(0 <= p.estimate <= upper + RESIDUAL_TOLERANCE for p in self.profile.points))

        m = config.m or 1
        certificates = [self.certify(n, schedule.s(m).value + 1, besselian=True) for n in mask if n > m]
        record = corollary_witness(schedule, self.family, mask, m, config.seed,
                                   milman_budget=config.budgets.milman)
        self.results["corollary"] = record.model_dump(mode='json')
        certified = record.certified and all(c.certifies for c in certificates)
        self.verdict("corollary-bound", record.bound_holds, certificates, certified=certified,
                     detail=f"||T_M B x|| = {record.image_norm:.6g} vs {record.bound:.6g}")
        if config.q is not None:
            demo = l1_to_lq_profile(config.lq_dim, config.q, [d for d in dims if d <= config.lq_dim],
                                    config.budgets.trials, config.seed, config.threads)
            self.results["l1_to_lq"] = demo.model_dump(mode='json')

    def check_schedule(self):
        report = schedule_check(self.schedule)
        self.results["schedule"] = report.model_dump(mode='json')
        for check in report.levels:
            self.verdict(f"growth:level={check.level}", None,
                         detail=f"{'holds' if check.growth_holds else 'fails'}, needs 10^{check.growth_required_log10:.3f}")
            self.verdict(f"width:level={check.level}", None,
                         detail=f"{'holds' if check.width_holds else 'fails'}, needs {check.width_required}")
            self.verdict(f"ordered:level={check.level}", None, detail=str(check.ordered))


def write_report(report: ExperimentReport, path: str):
    Path(path).write_text(report.model_dump_json(indent=2) + "\n")


def run(config: RunConfig) -> ExperimentReport:
    runner = ExperimentRunner(config)
    report = runner.run()
    if config.out:
        write_report(report, config.out)
    if config.csv and runner.profile is not None:
        Path(config.csv).write_text(profile_to_csv(runner.profile))
    logger.info("%s finished with exit code %d", config.command.value, report.exit_code)
    return report
