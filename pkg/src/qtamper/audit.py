"""Seeded numerical audits of the tamper-evidence results.

Each registered case runs a batch of checks and returns an
:class:`AuditReport`.  Identity checks pass when the residual is within
tolerance; inequality checks ``lhs <= rhs`` pass when ``rhs - lhs`` is at
least minus the tolerance.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field
from importlib import metadata
from typing import Callable

import numpy as np

from . import attacks as atk
from . import constructions as cons
from .channels import ChannelKind, KrausChannel, cgm_of_channel, structured_channel
from .circuits import Circuit, DimensionCapError, dim_cap
from .qmath import (
    SpaceShape,
    basis_projector,
    bound_eval,
    helstrom_pair,
    kron_all,
    labeled_blocks,
    partial_trace,
    td_pure,
    trace_distance,
    trace_norm,
)
from .randomness import (
    ginibre,
    make_rng,
    random_aqecm,
    random_channel,
    random_classical_output,
    random_density,
    random_distribution,
    random_hermitian,
    random_qecmr,
)
from .schemes import (
    QmScheme,
    conditioned_state,
    correctness_gap,
    dbar_circuit,
    encrypt_then,
    encryption_gap,
    qm_forgery_value,
    revocation_profile,
    revoked_state,
    tamper_profile,
    vbar_circuit,
)

IDENTITY_TOL = 1e-10
INEQUALITY_TOL = 1e-9
MAX_DIM_CAP = 256


def artifact_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass(frozen=True)
class Check:
    name: str
    kind: str
    lhs: float
    rhs: float
    slack: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class AuditCase:
    id: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    dim_cap: int = MAX_DIM_CAP

    def __post_init__(self) -> None:
        if self.id not in REGISTRY:
            raise KeyError(f"unknown audit {self.id!r}")
        if not 1 <= self.dim_cap <= MAX_DIM_CAP:
            raise ValueError(f"dim_cap must be in [1, {MAX_DIM_CAP}]")


@dataclass
class AuditReport:
    case_id: str
    tag: str
    seed: int
    dim_cap: int
    params: dict
    checks: list[Check]
    values: dict
    wall_time: float
    version: str
    error: str | None = None

    @property
    def n_pass(self) -> int:
        return sum(c.passed for c in self.checks)

    @property
    def n_fail(self) -> int:
        return len(self.checks) - self.n_pass

    @property
    def passed(self) -> bool:
        return self.error is None and self.n_fail == 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(passed=self.passed, n_pass=self.n_pass, n_fail=self.n_fail)
        return d


class _Log:
    def __init__(self) -> None:
        self.checks: list[Check] = []
        self.values: dict = {}

    def close(self, name: str, lhs: float, rhs: float, tol: float = IDENTITY_TOL) -> bool:
        lhs, rhs = float(lhs), float(rhs)
        res = abs(lhs - rhs)
        ok = res <= tol
        self.checks.append(Check(name, "identity", lhs, rhs, -res, tol, ok))
        return ok

    def residual(self, name: str, r: float, tol: float = IDENTITY_TOL) -> bool:
        return self.close(name, float(r), 0.0, tol)

    def leq(self, name: str, lhs: float, rhs: float, tol: float = INEQUALITY_TOL) -> bool:
        lhs, rhs = float(lhs), float(rhs)
        slack = rhs - lhs
        ok = slack >= -tol
        self.checks.append(Check(name, "inequality", lhs, rhs, slack, tol, ok))
        return ok

    def worst_residual(self, name: str, residuals, tol: float = IDENTITY_TOL) -> bool:
        return self.residual(name, max(residuals, default=0.0), tol)

    def worst_slack(self, name: str, pairs, tol: float = INEQUALITY_TOL) -> bool:
        """One inequality record for the tightest of many ``(lhs, rhs)`` pairs."""
        pairs = list(pairs)
        if not pairs:
            return self.leq(name, 0.0, 0.0, tol)
        lhs, rhs = min(pairs, key=lambda p: p[1] - p[0])
        return self.leq(name, lhs, rhs, tol)

    def value(self, name: str, v) -> None:
        self.values[name] = float(v) if isinstance(v, (float, np.floating, int, np.integer)) else v


@dataclass(frozen=True)
class _Entry:
    id: str
    tag: str
    title: str
    defaults: dict
    fn: Callable


REGISTRY: dict[str, _Entry] = {}


def _audit(case_id: str, tag: str, title: str, **defaults):
    def deco(fn):
        REGISTRY[case_id] = _Entry(case_id, tag, title, defaults, fn)
        return fn
    return deco


def list_audits() -> list[dict]:
    return [{"id": e.id, "tag": e.tag, "title": e.title, "defaults": dict(e.defaults)}
            for e in REGISTRY.values()]


# ------------------------------------------------------------ dense helpers


def _accept_ops(ch: KrausChannel) -> np.ndarray:
    """Kraus family of the accept branch of a dense decoder ``C -> M (x) F``."""
    k = ch.kraus
    r, dout, din = k.shape
    return k.reshape(r, dout // 2, 2, din)[:, :, 1, :]


def _accept_effect(ch: KrausChannel) -> np.ndarray:
    """``X`` with ``Tr(Dbar(rho)) = Tr(X rho)``."""
    a = _accept_ops(ch)
    return np.einsum("iba,ibc->ac", a.conj(), a)


def _outcome_table(ch: KrausChannel, rho: np.ndarray) -> np.ndarray:
    """Joint distribution ``P[message, flag]`` of a dense decoder on ``rho``."""
    out = ch.apply(rho)
    return np.real(np.diag(out)).reshape(-1, 2)


def _functional_effect(circ: Circuit) -> np.ndarray:
    """``X`` with ``circ(rho) = Tr(X rho)`` for a scalar-output circuit."""
    return circ.choi().T


# ------------------------------------------------------------ T01..T06: distances


@_audit("T01", "helstrom-saturation", "Helstrom projectors saturate the trace norm",
        trials=200, max_dim=8)
def _t01(rng, p, log):
    sat, ident = [], []
    for _ in range(p["trials"]):
        d = int(rng.integers(1, p["max_dim"] + 1))
        a, b = random_hermitian(rng, d), random_hermitian(rng, d)
        hp = helstrom_pair(a, b)
        sat.append(abs(hp.saturation - trace_norm(a - b)))
        ident.append(float(np.max(np.abs(hp.positive + hp.negative - np.eye(d)))))
    log.worst_residual("saturation equals trace norm", sat, 1e-9)
    log.worst_residual("projectors sum to identity", ident, 1e-10)
    a = basis_projector(2, 0)
    log.close("footnote instance ||A - A/2||_1", trace_norm(a - a / 2), 0.5, 1e-15)


@_audit("T02", "pure-state-distance", "Closed form for rank-one trace distance", trials=200, max_dim=8)
def _t02(rng, p, log):
    res = []
    for _ in range(p["trials"]):
        d = int(rng.integers(1, p["max_dim"] + 1))
        psi = ginibre(rng, d, 1)[:, 0]
        phi = ginibre(rng, d, 1)[:, 0]
        psi *= rng.uniform(0.05, 1.0) / np.linalg.norm(psi)
        phi *= rng.uniform(0.05, 1.0) / np.linalg.norm(phi)
        res.append(abs(td_pure(psi, phi) - trace_distance(np.outer(psi, psi.conj()),
                                                          np.outer(phi, phi.conj()))))
    log.worst_residual("closed form matches trace distance", res, 1e-9)
    plus = np.array([1, 1]) / math.sqrt(2)
    minus = np.array([1, -1]) / math.sqrt(2)
    log.close("plus/minus distance", td_pure(plus, minus), 1.0, 1e-12)


@_audit("T03", "copies-bound", "t-copy distance lower bound", trials=50, max_t=4)
def _t03(rng, p, log):
    pairs = []
    for _ in range(p["trials"]):
        rho, sigma = random_density(rng, 2), random_density(rng, 2)
        d = trace_distance(rho, sigma)
        for t in range(1, p["max_t"] + 1):
            actual = trace_distance(kron_all(*[rho] * t), kron_all(*[sigma] * t))
            pairs.append((bound_eval("copies_lb", t=t, d=d), actual))
    log.worst_slack("bound <= t-copy distance", pairs, 1e-9)


@_audit("T04", "block-additivity", "Trace norm of classically labeled blocks", trials=100, max_blocks=4, max_dim=4)
def _t04(rng, p, log):
    res = []
    for _ in range(p["trials"]):
        n = int(rng.integers(1, p["max_blocks"] + 1))
        d = int(rng.integers(1, p["max_dim"] + 1))
        diffs = [ginibre(rng, d, d) - ginibre(rng, d, d) for _ in range(n)]
        res.append(abs(trace_norm(labeled_blocks(diffs)) - sum(trace_norm(x) for x in diffs)))
    log.worst_residual("block norm equals sum of norms", res, 1e-9)


@_audit("T05", "gentle-measurement", "Coherent gentle measurement properties", trials=200, max_dim=6)
def _t05(rng, p, log):
    res2, pairs = [], []
    for _ in range(p["trials"]):
        din = int(rng.integers(2, p["max_dim"] + 1))
        n_out = int(rng.integers(2, 4))
        phi = random_classical_output(rng, SpaceShape.of(("X", din)), n_out, int(rng.integers(1, 4)))
        cgm = cgm_of_channel(phi)
        # property 2 on an arbitrary operator
        x = ginibre(rng, din, din)
        lhs = np.diag(partial_trace(cgm.apply(x), (din, n_out), [1]))
        rhs = np.diag(phi.apply(x))
        res2.append(float(np.max(np.abs(lhs - rhs))))
        # property 1 on a subnormalized state
        rho = random_density(rng, din, trace=rng.uniform(0.1, 1.0))
        y = int(rng.integers(n_out))
        dist = trace_distance(cgm.apply(rho), np.kron(rho, basis_projector(n_out, y)))
        tr = np.trace(rho).real
        py = phi.apply(rho)[y, y].real
        pairs.append((dist, math.sqrt(max(tr * tr - py * py, 0.0))))
    log.worst_residual("partial trace after dephasing equals dephased channel", res2, 1e-10)
    log.worst_slack("disturbance bound", pairs, 1e-9)
    deph = structured_channel(ChannelKind.DEPHASE, shape=SpaceShape.of(("X", 2)))
    cgm = cgm_of_channel(deph)
    plus = np.full((2, 2), 0.5, dtype=complex)
    dist = trace_distance(cgm.apply(plus), np.kron(plus, basis_projector(2, 0)))
    bound = math.sqrt(1 - deph.apply(plus)[0, 0].real ** 2)
    log.close("equality case distance", dist, math.sqrt(3) / 2, 1e-9)
    log.close("equality case bound", bound, math.sqrt(3) / 2, 1e-9)


@_audit("T06", "subnormalized-scaling", "Scaled trace distance lower bound", trials=200, max_dim=4)
def _t06(rng, p, log):
    pairs = []
    for _ in range(p["trials"]):
        d = int(rng.integers(1, p["max_dim"] + 1))
        r0, r1 = random_density(rng, d), random_density(rng, d)
        t0, t1 = rng.uniform(0, 1, size=2)
        pairs.append((bound_eval("scaled_td_lb", t0=t0, t1=t1, d=trace_distance(r0, r1)),
                      trace_distance(t0 * r0, t1 * r1)))
    log.worst_slack("scaled bound <= distance", pairs, 1e-9)


# ------------------------------------------------------------ T07..T11: encryption / money


def _baseline_pool():
    return [cons.baseline_scheme(k) for k in ("otp_accept", "id_accept", "triv_reject", "qotp_accept")] + [
        cons.conj_parity_pad(2)]


@_audit("T07", "parallel-composition", "Correctness, accept-branch factorization and hybrid lift",
        pairs=20, random_pairs=4)
def _t07(rng, p, log):
    pool = _baseline_pool()
    pool_eps = [correctness_gap(s).value for s in pool]
    pairs = []
    for _ in range(p["pairs"]):
        i, j = (int(x) for x in rng.integers(len(pool), size=2))
        par = cons.parallel_compose(pool[i], pool[j])
        pairs.append((correctness_gap(par).value, pool_eps[i] + pool_eps[j]))
    log.worst_slack("eps(S1 || S2) <= eps1 + eps2", pairs, 1e-10)
    fact, lift = [], []
    for _ in range(p["random_pairs"]):
        s1 = random_aqecm(rng, cipher_dim=2)
        s2 = random_aqecm(rng, cipher_dim=2)
        par = cons.parallel_compose(s1, s2)
        d1, d2 = s1.cipher_shape.dim, s2.cipher_shape.dim
        for k1, k2 in itertools.product(s1.keys.keys, s2.keys.keys):
            rho = random_density(rng, d1 * d2)
            a1, a2 = _accept_ops(s1.dec(k1)), _accept_ops(s2.dec(k2))
            direct = sum(np.kron(x, y) @ rho @ np.kron(x, y).conj().T for x in a1 for y in a2)
            fact.append(float(np.max(np.abs(dbar_circuit(par, (k1, k2)).apply(rho) - direct))))
        attack = random_channel(rng, par.cipher_shape, par.cipher_shape + SpaceShape.of(("A", 2)))
        for (k1, k2), m1, m2 in itertools.product(par.keys.keys, s1.messages, s2.messages):
            lifted = atk.lift_hybrid_attack(attack, s2, k2, m2)
            rho = conditioned_state(par, (k1, k2), attack, par.message_state((m1, m2)))
            st = encrypt_then(s1, k1, m1, lifted)
            post = Circuit(lifted.out_shape).on(s1.dec(k1), range(s1.n_cipher), 0)
            post = post.select([s1.flag_pos], [1]).trace(range(s1.n_msg))
            sigma = post.run(st).to_dense()
            da = rho.shape[0]
            lift.append(float(np.max(np.abs(sigma[da:, da:] - rho))))
    log.worst_residual("accept branch factorizes", fact, 1e-10)
    log.worst_residual("hybrid lift identity", lift, 1e-10)


@_audit("T08", "distinguisher-breaks-tamper-evidence", "Gentle distinguisher against non-encrypting schemes")
def _t08(rng, p, log):
    s = cons.baseline_scheme("id_accept")
    prof = tamper_profile(s, atk.cgm_distinguisher_attack(s, 0, 1), 0, 1)
    log.close("identity scheme: min key distance", prof.distances.min(), 1.0, 1e-9)
    log.close("identity scheme: max key distance", prof.distances.max(), 1.0, 1e-9)
    for s in (s, cons.baseline_scheme("id_accept", (0, 1, 2))):
        alpha, eps = encryption_gap(s).value, correctness_gap(s).value
        witness = max(tamper_profile(s, atk.cgm_distinguisher_attack(s, a, b), a, b).min_delta()
                      for a, b in itertools.combinations(s.messages, 2))
        bound = 1 - (4 * (1 - alpha)) ** (1 / 3) - math.sqrt(2 * eps)
        log.leq(f"{s.name}/{len(s.messages)}: bound <= attack delta", bound, witness)
    for s in (cons.baseline_scheme("otp_accept"), cons.otp_with_te_key(cons.conj_parity_pad(2))):
        a = atk.cgm_distinguisher_attack(s, 0, 1)
        alpha = encryption_gap(s).value
        success = 0.0
        for b in (0, 1):
            for k, pk in s.keys.support():
                out = Circuit(a.out_shape).trace(range(s.n_cipher)).run(encrypt_then(s, k, b, a)).to_dense()
                success += 0.5 * pk * out[b, b].real
        log.close(f"{s.name}: guess success equals (1 + alpha) / 2", success, 0.5 * (1 + alpha), 1e-9)


def _s_plus(n: int):
    return cons.otp_with_te_key(cons.conj_parity_pad(n))


@_audit("T09", "tamper-evidence-implies-encryption", "Encryption gap versus best-attack delta",
        ns=(2, 3, 4), n_random=2)
def _t09(rng, p, log):
    alphas = []
    for n in p["ns"]:
        s = _s_plus(n)
        eps = correctness_gap(s).value
        alpha = encryption_gap(s).value
        gallery = atk.attack_gallery(s, p["n_random"], rng)
        delta, best = atk.best_attack_delta(s, gallery)
        log.value(f"n={n}: eps", eps)
        log.value(f"n={n}: alpha", alpha)
        log.value(f"n={n}: delta_lb", delta)
        log.value(f"n={n}: best attack", best)
        log.leq(f"n={n}: alpha <= sqrt(19 (delta + sqrt(2 eps)))", alpha,
                math.sqrt(19 * (delta + math.sqrt(2 * max(eps, 0.0)))))
        alphas.append(alpha)
    for (n0, a0), (n1, a1) in zip(zip(p["ns"], alphas), zip(p["ns"][1:], alphas[1:])):
        log.leq(f"alpha(n={n1}) <= alpha(n={n0})", a1, a0)


@_audit("T10", "money-correctness", "Money from encryption is gamma-correct",
        gammas=(0.0, 0.1, 0.3, 0.6), random_schemes=4)
def _t10(rng, p, log):
    schemes = [cons.conj_parity_pad(2), cons.baseline_scheme("otp_accept"),
               cons.baseline_scheme("triv_reject")]
    schemes += [random_aqecm(rng, cipher_dim=2) for _ in range(p["random_schemes"])]
    for s in schemes:
        eps = correctness_gap(s).value
        for g in p["gammas"]:
            qm = cons.qm_of(s, g)
            log.leq(f"{s.name}: eps(QM_{g:g}) <= {g:g}", correctness_gap(qm).value, g)
        good = cons.good_pairs(s, math.sqrt(eps))
        p_good = sum(s.keys.prob(k) for k, _ in good) / len(s.messages)
        log.leq(f"{s.name}: Pr[G] >= 1 - sqrt(eps)", 1 - math.sqrt(eps), p_good)


def _copy_attack(shape: SpaceShape) -> KrausChannel:
    from .channels import classical_channel
    return classical_channel(shape, shape + shape, lambda *x: x + x)


def _share_split_oracle(comp, m):
    """Exact half-acceptance, half-decode and forgery probabilities of the share split.

    Enumerates keys and pads with dense decoders only.
    """
    msgs = comp.messages
    nmsg = len(msgs)
    junk = np.eye(comp.cipher_shape.dim) / comp.cipher_shape.dim
    acc = [0.0, 0.0]
    dec = [0.0, 0.0]
    forge = 0.0
    support = comp.keys.support()
    for (k0, p0), (k1, p1) in itertools.product(support, support):
        t_junk0 = _outcome_table(comp.dec(k0), junk)
        t_junk1 = _outcome_table(comp.dec(k1), junk)
        for pad in range(nmsg):
            share1 = (pad + m) % nmsg
            t0 = _outcome_table(comp.dec(k0), encrypt_then(comp, k0, msgs[pad]).to_dense())
            t1 = _outcome_table(comp.dec(k1), encrypt_then(comp, k1, msgs[share1]).to_dense())
            halves = []
            for first, second in ((t0, t_junk1), (t_junk0, t1)):
                a_ok = ok = 0.0
                for (x, f1), (y, f2) in itertools.product(np.ndindex(first.shape), np.ndindex(second.shape)):
                    w = first[x, f1] * second[y, f2]
                    if f1 or f2:
                        a_ok += w
                        if (y - x) % nmsg == m:
                            ok += w
                halves.append((a_ok, ok))
            w = p0 * p1 / nmsg
            for h in (0, 1):
                acc[h] += w * halves[h][0]
                dec[h] += w * halves[h][1]
            forge += w * halves[0][1] * halves[1][1]
    return acc, dec, forge


@_audit("T11", "money-counterfeiting", "Counterfeiting attacks against money from encryption", n=2)
def _t11(rng, p, log):
    s = cons.baseline_scheme("id_accept")
    qm = cons.qm_of(s, 0.0)
    log.close("identity scheme: copy forgery succeeds", qm_forgery_value(qm, _copy_attack(qm.note_shape)), 1.0)
    comp = cons.conj_parity_pad(p["n"])
    star = cons.star_of(comp, comp)
    split = atk.share_split(star.cipher_shape, comp.n_cipher)
    nc = comp.n_cipher
    nm = len(star.messages)
    for m in star.messages:
        acc, dec, forge = _share_split_oracle(comp, m)
        got_acc, got_dec = [0.0, 0.0], [0.0, 0.0]
        for key, pk in star.keys.support():
            st = encrypt_then(star, key, m, split)
            for h in (0, 1):
                post = Circuit(split.out_shape).on(star.dec(key), range(h * 2 * nc, (h + 1) * 2 * nc), 0)
                post = post.trace(range(2, 2 + 2 * nc)).trace([0])
                got_acc[h] += pk * post.run(st).to_dense()[1, 1].real
                post = Circuit(split.out_shape).on(star.dec(key), range(h * 2 * nc, (h + 1) * 2 * nc), 0)
                post = post.trace(range(2, 2 + 2 * nc)).select([0, 1], [star.msg_index(m), 1])
                got_dec[h] += pk * post.run(st).trace().real
        for h in (0, 1):
            log.close(f"m={m} half {h}: accept probability", got_acc[h], 1.0, 1e-10)
            log.close(f"m={m} half {h}: accept oracle", acc[h], 1.0, 1e-10)
            log.close(f"m={m} half {h}: decodes m and accepts", got_dec[h], dec[h], 1e-9)
            log.close(f"m={m} half {h}: oracle decode probability", dec[h], 1 / nm, 1e-12)
        qm = cons.qm_of(star, 0.0)
        sub = QmScheme(qm.name, _restrict(qm.keys, lambda key: key[1] == m), qm.note_shape, qm.mint, qm.ver)
        value = qm_forgery_value(sub, split)
        log.close(f"m={m}: forgery value matches oracle", value, forge, 1e-9)
        log.leq(f"m={m}: forgery value < 1", value, 1.0 - 1e-6, 0.0)
        log.value(f"share split forgery m={m}", value)


def _restrict(keys, pred):
    from .schemes import KeyDist
    items = [(k, p) for k, p in keys.items() if pred(k)]
    total = sum(p for _, p in items)
    return KeyDist(tuple(k for k, _ in items), tuple(p / total for _, p in items))


# ------------------------------------------------------------ T12..T15: lemmas, revocation


@_audit("T12", "set-discrimination", "Guessing a message from near-identical states", trials=1000)
def _t12(rng, p, log):
    pairs = []
    for _ in range(p["trials"]):
        nm = int(rng.integers(2, 5))
        d = int(rng.integers(2, 5))
        rhos = [random_density(rng, d, trace=rng.uniform(0.05, 1.0)) for _ in range(nm)]
        delta = max(trace_distance(a, b) for a, b in itertools.combinations(rhos, 2))
        mu = random_distribution(rng, nm)
        phi = random_channel(rng, SpaceShape.of(("H", d)), SpaceShape.of(("M", nm)), 2)
        lhs = sum(mu[m] * phi.apply(rhos[m])[m, m].real for m in range(nm))
        pairs.append((lhs, mu.max() * (1 - 2 * delta) + 2 * delta))
    log.worst_slack("expected guess <= pmax (1 - 2 delta) + 2 delta", pairs, 1e-12)


def _random_game(rng, s, mem_dim: int = 2, b_dim: int = 2):
    mem = SpaceShape.of(("A", mem_dim))
    prep_shape = s.msg_shape + s.msg_shape + mem
    rho = random_density(rng, prep_shape.dim)
    from .circuits import prepared
    prep = prepared(rho, prep_shape)
    mid = random_channel(rng, s.cipher_shape + mem, s.token_shape + SpaceShape.of(("B", b_dim)))
    kshape = SpaceShape.of(("K", len(s.keys.support()), True))
    guess = random_classical_output(rng, kshape + SpaceShape.of(("B", b_dim)), 2, 2, "G")
    return atk.RevocationGame(prep, mid, guess)


@_audit("T13", "revocation-game-translation", "Revocation attacks versus revocation games", trials=10)
def _t13(rng, p, log):
    flip, convex, gap = [], [], []
    for _ in range(p["trials"]):
        s = random_qecmr(rng, n_keys=int(rng.integers(1, 4)))
        a = random_channel(rng, s.cipher_shape, s.token_shape + SpaceShape.of(("A", 2)))
        a0, a1, a2, a2f = atk.game_from_rev(a, s, 0, 1)
        v = atk.game_value(atk.RevocationGame(a0, a1, a2), s)
        vf = atk.game_value(atk.RevocationGame(a0, a1, a2f), s)
        diff = s.message_state(0) - s.message_state(1)
        norm = sum(pk * trace_norm(revoked_state(s, k, a, diff)) for k, pk in s.keys.support())
        flip.append(abs(v + vf - norm))
        gap.append((max(v, vf), norm / 2))
        g = _random_game(rng, s)
        value = atk.game_value(g, s)
        bound = 0.0
        for (m, m2), (pm, attack) in atk.rev_from_game(g, s).items():
            if m == m2:
                continue
            dm = s.message_state(m) - s.message_state(m2)
            bound += pm * sum(pk * trace_norm(revoked_state(s, k, attack, dm)) for k, pk in s.keys.support())
        convex.append((value, bound))
    log.worst_residual("flip-pair sum equals expected trace norm", flip, 1e-9)
    # the better of the two guessers reaches at least half the attack norm; report how close to the norm
    log.value("largest game value", max(g for g, _ in gap))
    log.value("largest half attack norm", max(h for _, h in gap))
    log.value("smallest game value / half attack norm", min(g / h for g, h in gap if h > 0))
    log.worst_slack("game value <= convex combination of attack norms", convex, 1e-9)


def _rev_te_pairs(rng, n_random: int):
    out = [cons.rev_of(cons.conj_parity_pad(2))]
    out += [random_qecmr(rng, n_keys=2) for _ in range(n_random)]
    return out


@_audit("T14", "revocation-to-tamper-evidence", "Correctness and attack chain for TE(S)", random_schemes=3)
def _t14(rng, p, log):
    for s in _rev_te_pairs(rng, p["random_schemes"]):
        te = cons.te_of(s)
        eps_s = correctness_gap(s).value
        eps_te = correctness_gap(te).value
        log.value(f"{s.name}: eps", eps_s)
        log.leq(f"{s.name}: eps(TE) <= 2 eps^(1/4)", eps_te, 2 * max(eps_s, 0.0) ** 0.25)
        gallery = [("identity", atk.builtin_attack("identity", te.cipher_shape))]
        gallery.append(("random", atk.random_isometry(te.cipher_shape, 2, rng)))
        if te.cipher_shape.dim <= 4:
            gallery.append(("measure", atk.full_measure(te.cipher_shape, [0])))
        for label, a in gallery:
            lhs = tamper_profile(te, a, 0, 1).expectation()
            rhs = revocation_profile(s, atk.tamper_from_rev(a, s), 0, 1).expectation()
            log.close(f"{s.name}/{label}: tamper expectation equals revocation expectation", lhs, rhs, 1e-9)


@_audit("T15", "gentle-verification-lemma", "Accept branch of TE(S) equals verified revocation", random_schemes=3)
def _t15(rng, p, log):
    for s in _rev_te_pairs(rng, p["random_schemes"]):
        te = cons.te_of(s)
        res = []
        for k in s.keys.keys:
            lhs = _functional_effect(dbar_circuit(te, k).trace(range(te.n_msg)))
            rhs = _functional_effect(s.rev.as_circuit().then(vbar_circuit(s, k)))
            res.append(float(np.max(np.abs(lhs - rhs))))
        log.worst_residual(f"{s.name}: Tr_M Dbar' = Vbar R", res, 1e-10)


# ------------------------------------------------------------ T16..T21: separations, lemmas


@_audit("T16", "malleability", "Bit flip on the one-time-padded share", n=3)
def _t16(rng, p, log):
    s = _s_plus(p["n"])
    flip = atk.bitflip(s.cipher_shape)
    succ, comm = [], []
    for k, _ in s.keys.support():
        for b in s.messages:
            st = encrypt_then(s, k, b, flip)
            succ.append(abs(dbar_circuit(s, k).select([0], [1 - b]).run(st).trace().real - 1.0))
            comm.append(float(np.max(np.abs(st.to_dense() - encrypt_then(s, k, 1 - b).to_dense()))))
    log.worst_residual("flipped message decoded and accepted with certainty", succ, 1e-10)
    log.worst_residual("attack maps E(b) to E(1 - b)", comm, 1e-10)


@_audit("T17", "not-quantum-encryption", "Plus and minus inputs are perfectly distinguishable", n=2)
def _t17(rng, p, log):
    s = _s_plus(p["n"])
    plus = np.full((2, 2), 0.5, dtype=complex)
    minus = np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex)
    enc_p = {k: s.enc(k).as_circuit().apply(plus) for k in s.keys.keys}
    enc_m = {k: s.enc(k).as_circuit().apply(minus) for k in s.keys.keys}
    res = [abs(trace_distance(enc_p[k], enc_m[k2]) - 1.0) for k, k2 in itertools.product(s.keys.keys, repeat=2)]
    log.worst_residual("all key pairs at distance 1", res, 1e-9)


def _double_split_oracle(comp, m) -> float:
    """Forgery probability of the double split, by dense enumeration over key pairs."""
    junk = np.eye(comp.cipher_shape.dim) / comp.cipher_shape.dim
    mi = comp.msg_index(m)
    good, junk_acc = {}, {}
    for k, _ in comp.keys.support():
        good[k] = _outcome_table(comp.dec(k), encrypt_then(comp, k, m).to_dense())[mi, 1]
        junk_acc[k] = _outcome_table(comp.dec(k), junk)[:, 1].sum()
    total = 0.0
    for (k0, p0), (k1, p1) in itertools.product(comp.keys.support(), repeat=2):
        total += p0 * p1 * (good[k0] * junk_acc[k1]) * (junk_acc[k0] * good[k1])
    return total


@_audit("T18", "tamper-evidence-without-uncloneability", "Double split yields two decodable halves", n=3)
def _t18(rng, p, log):
    comp = cons.conj_parity_pad(p["n"])
    d = cons.double_of(comp)
    split = atk.double_split(d.cipher_shape)
    nc = d.n_cipher
    qm = cons.qm_of(d, 0.0)
    halves_worst = 1.0
    for m in d.messages:
        mi = d.msg_index(m)
        forged = 0.0
        total_p = 0.0
        for key, pk in d.keys.support():
            st = encrypt_then(d, key, m, split)
            for h in (0, 1):
                post = Circuit(split.out_shape).on(d.dec(key), range(h * nc, (h + 1) * nc), 0)
                post = post.trace([1]).trace(range(1, 1 + nc)).select([0], [mi])
                halves_worst = min(halves_worst, post.run(st).trace().real)
            post = Circuit(split.out_shape).on(qm.ver((key, m)), range(nc), 0)
            post = post.on(qm.ver((key, m)), range(1, 1 + nc), 1).select([0, 1], [1, 1])
            forged += pk * post.run(st).trace().real
            total_p += pk
        forged /= total_p
        oracle = _double_split_oracle(comp, m)
        log.close(f"m={m}: forgery value matches oracle", forged, oracle, 1e-9)
        log.leq(f"m={m}: forgery value < 1", forged, 1.0 - 1e-6, 0.0)
        log.value(f"double split forgery m={m}", forged)
    log.close("each half decodes m with certainty (worst case)", halves_worst, 1.0, 1e-9)


@_audit("T19", "secret-sharing-inclusion-exclusion", "Accept effect of S*S' by inclusion-exclusion",
        random_schemes=2)
def _t19(rng, p, log):
    comps = [cons.conj_parity_pad(2), cons.baseline_scheme("otp_accept"), cons.baseline_scheme("triv_reject")]
    comps += [random_aqecm(rng, cipher_dim=2) for _ in range(p["random_schemes"])]
    for s1, s2 in itertools.product(comps, repeat=2):
        if s1.cipher_shape.dim * s2.cipher_shape.dim > 16:
            continue
        star = cons.star_of(s1, s2)
        res = []
        for k1, k2 in itertools.product(s1.keys.keys, s2.keys.keys):
            lhs = _functional_effect(dbar_circuit(star, (k1, k2)).trace([0]))
            e1 = _accept_effect(s1.dec(k1).to_kraus())
            e2 = _accept_effect(s2.dec(k2).to_kraus())
            i1, i2 = np.eye(e1.shape[0]), np.eye(e2.shape[0])
            rhs = np.kron(e1, i2) + np.kron(i1, e2) - np.kron(e1, e2)
            res.append(float(np.max(np.abs(lhs - rhs))))
        log.worst_residual(f"{s1.name} * {s2.name}", res, 1e-10)


@_audit("T20", "baseline-schemes", "Baseline correctness, encryption and always-reject profiles", n_random=4)
def _t20(rng, p, log):
    for msgs in ((0, 1), (0, 1, 2)):
        otp = cons.baseline_scheme("otp_accept", msgs)
        ident = cons.baseline_scheme("id_accept", msgs)
        log.residual(f"otp_accept |M|={len(msgs)}: eps", correctness_gap(otp).value)
        log.residual(f"otp_accept |M|={len(msgs)}: alpha", encryption_gap(otp).value)
        log.close(f"id_accept |M|={len(msgs)}: alpha", encryption_gap(ident).value, 1.0)
    for msgs in ((0, 1), (0, 1, 2)):
        s = cons.baseline_scheme("triv_reject", msgs)
        gallery = atk.attack_gallery(s, p["n_random"], rng)
        worst = 0.0
        for _, a in gallery:
            for m0, m1 in itertools.combinations(s.messages, 2):
                worst = max(worst, tamper_profile(s, a, m0, m1).max_distance())
        log.residual(f"triv_reject |M|={len(msgs)}: largest distance", worst, 0.0)
        rho = random_density(rng, s.cipher_shape.dim)
        log.residual(f"triv_reject |M|={len(msgs)}: accept branch is zero",
                     float(np.max(np.abs(dbar_circuit(s, ()).apply(rho)))), 0.0)


@_audit("T21", "probability-lemmas", "Markov, bounded concentration and conditioning", trials=1000)
def _t21(rng, p, log):
    markov, conc, cond = [], [], []
    for _ in range(p["trials"]):
        n = int(rng.integers(1, 7))
        x = rng.exponential(size=n)
        px = random_distribution(rng, n)
        ex = float(px @ x)
        alpha = rng.uniform(0.01, 1.5 * x.max())
        markov.append((float(px[x >= alpha].sum()), bound_eval("markov_ub", expect=ex, alpha=alpha)))
        beta = x.max() * rng.uniform(1.0, 1.5)
        a2 = rng.uniform(0.0, beta)
        if 0 < a2 < beta:
            conc.append((bound_eval("conc_lb", expect=ex, alpha=a2, beta=beta), float(px[x > a2].sum())))
        f = rng.exponential(size=n)
        mask = rng.random(n) < 0.6
        mask[int(rng.integers(n))] = True
        pb = px[mask].sum()
        lhs = abs(float(px @ f) - float(px[mask] @ f[mask]) / pb)
        cond.append((lhs, float(f.max()) * float(px[~mask].sum())))
    log.worst_slack("Pr[X >= a] <= E X / a", markov, 1e-12)
    log.worst_slack("Pr[X > a] >= (E X - a) / (b - a)", conc, 1e-12)
    log.worst_slack("conditioning shifts expectation by at most max f Pr[not B]", cond, 1e-12)


# ------------------------------------------------------------ runner


def _case_index(case_id: str) -> int:
    return list(REGISTRY).index(case_id)


def run_audit(case: AuditCase) -> AuditReport:
    entry = REGISTRY[case.id]
    params = {**entry.defaults, **case.params}
    rng = make_rng(case.seed, _case_index(case.id))
    log = _Log()
    error = None
    start = time.perf_counter()
    try:
        with dim_cap(case.dim_cap):
            entry.fn(rng, params, log)
    except DimensionCapError as e:
        error = f"dimension cap exceeded: {e}"
    wall = time.perf_counter() - start
    return AuditReport(case.id, entry.tag, case.seed, case.dim_cap, _jsonable(params), log.checks,
                       _jsonable(log.values), wall, artifact_version(), error)


def run_all(seed: int = 0, dim_cap: int = MAX_DIM_CAP, overrides: dict | None = None) -> list[AuditReport]:
    overrides = overrides or {}
    return [run_audit(AuditCase(cid, overrides.get(cid, {}), seed, dim_cap)) for cid in REGISTRY]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


_CSV_FIELDS = ["case_id", "tag", "seed", "check", "kind", "lhs", "rhs", "slack", "tolerance", "passed"]


def emit_report(report: AuditReport | list[AuditReport], fmt: str = "json") -> bytes:
    """Render one report (or a list) as ``json``, ``csv`` or ``text``."""
    reports = report if isinstance(report, list) else [report]
    if fmt == "json":
        body = [r.to_dict() for r in reports]
        return json.dumps(body if isinstance(report, list) else body[0], indent=2).encode()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(_CSV_FIELDS)
        for r in reports:
            for c in r.checks:
                w.writerow([r.case_id, r.tag, r.seed, c.name, c.kind, repr(c.lhs), repr(c.rhs),
                            repr(c.slack), repr(c.tolerance), c.passed])
        return buf.getvalue().encode()
    if fmt == "text":
        lines = []
        for r in reports:
            status = "PASS" if r.passed else "FAIL"
            lines.append(f"{r.case_id} {r.tag}  [{status}]  {r.n_pass}/{len(r.checks)} checks  "
                         f"seed={r.seed}  {r.wall_time:.2f}s")
            if r.error:
                lines.append(f"  error: {r.error}")
            for c in r.checks:
                mark = "ok " if c.passed else "BAD"
                lines.append(f"  {mark} {c.name:<60.60} lhs={c.lhs:<12.6g} rhs={c.rhs:<12.6g} "
                             f"slack={c.slack:.3e}")
            for k, v in r.values.items():
                lines.append(f"  value {k} = {v}")
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown format {fmt!r}")
