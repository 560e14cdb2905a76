"""JSON encodings of the result types and atomic file output.

Floats are written with Python's shortest round-trip repr, so a value read
back is bit-identical to the value written.  Complex numbers nested inside
structures are written as {"re": x, "im": y}.
"""
from __future__ import annotations

import json
import os
import tempfile
from fractions import Fraction
from pathlib import Path

from .address import Address
from .hyperbolicity import GrowthReport, NonRecurrence, OrbitSample, StartGrowth
from .params import ParamRaySample, ParamRayTrace, Verdict, WakeMethod, WakeVerdict
from .polynomial import DAdicAngle, PairComparison, PolyRayTrace, PolySample
from .puzzle import (Distinguished, Equivalent, NonRecurrenceCertificate, PuzzlePiece,
                     RayGraph, Undecided)
from .rays import (LandingResult, LandingStatus, OrbitType, PeriodicOrbit, RaySample,
                   RayTrace)


def cplx(z) -> dict | None:
    if z is None:
        return None
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def uncplx(d) -> complex | None:
    if d is None:
        return None
    return complex(d["re"], d["im"])


def _addr(s) -> str:
    return str(s)


# dynamic rays

def ray_trace_to_json(tr: RayTrace) -> dict:
    return {
        "kind": "RayTrace",
        "c": cplx(tr.c),
        "address": _addr(tr.address),
        "depth": tr.depth,
        "samples": [{"t": s.t, "re": s.z.real, "im": s.z.imag, "err": s.err}
                    for s in tr.samples],
    }


def ray_trace_from_json(d: dict) -> RayTrace:
    return RayTrace(uncplx(d["c"]), Address.parse(d["address"]),
                    tuple(RaySample(s["t"], complex(s["re"], s["im"]), s["err"])
                          for s in d["samples"]),
                    d["depth"])


def landing_to_json(res: LandingResult) -> dict:
    p, m = res.point, res.multiplier
    return {
        "kind": "LandingResult",
        "status": res.status.value,
        "re": None if p is None else p.real,
        "im": None if p is None else p.imag,
        "residual": res.residual,
        "mult_re": None if m is None else m.real,
        "mult_im": None if m is None else m.imag,
        "t_last": res.t_last,
        "note": res.note,
    }


def landing_from_json(d: dict) -> LandingResult:
    point = None if d["re"] is None else complex(d["re"], d["im"])
    mult = None if d["mult_re"] is None else complex(d["mult_re"], d["mult_im"])
    return LandingResult(LandingStatus(d["status"]), point, d["residual"], mult,
                         d.get("t_last"), d.get("note", ""))


def orbit_to_json(o: PeriodicOrbit) -> dict:
    return {
        "period": o.period,
        "minimal_period": o.minimal_period,
        "points": [cplx(z) for z in o.points],
        "multiplier": cplx(o.multiplier),
        "abs_multiplier": abs(o.multiplier),
        "classification": o.classification.value,
        "residual": o.residual,
    }


def orbit_from_json(d: dict) -> PeriodicOrbit:
    return PeriodicOrbit(d["period"], tuple(uncplx(z) for z in d["points"]),
                         uncplx(d["multiplier"]), OrbitType(d["classification"]),
                         d["minimal_period"], d["residual"])


# puzzles

def graph_to_json(g: RayGraph, with_curves: bool = False) -> dict:
    out = {
        "kind": "RayGraph",
        "c": cplx(g.c),
        "graph_id": g.graph_id,
        "addresses": [_addr(a) for a in g.addresses],
        "landing": {_addr(a): landing_to_json(g.landings[a]) for a in g.addresses},
        "colanding_classes": [[_addr(a) for a in cl] for cl in g.classes],
    }
    if with_curves:
        out["curves"] = {_addr(a): [[z.real, z.imag] for z in g.curves[a].points]
                         for a in g.addresses}
    return out


def piece_to_json(p: PuzzlePiece) -> dict:
    return {"level": p.level, "label": p.label,
            "bounding_addresses": [_addr(a) for a in p.bounding_addresses],
            "witness": cplx(p.witness)}


def piece_from_json(d: dict) -> PuzzlePiece:
    return PuzzlePiece(d["level"], d["label"],
                       tuple(Address.parse(a) for a in d["bounding_addresses"]),
                       uncplx(d["witness"]))


def level_to_json(level, with_curves: bool = False) -> dict:
    out = {"kind": "PuzzleLevel", "c": cplx(level.c), **level.export()}
    if with_curves:
        out["curves"] = {_addr(a): [[z.real, z.imag] for z in cv.points]
                         for a, cv in sorted(level.curves.items())}
    return out


def certificate_to_json(cert) -> dict:
    if isinstance(cert, Undecided):
        return {"kind": "Undecided", "reason": cert.reason, "levels_tried": cert.levels_tried}
    return {
        "kind": "NonRecurrenceCertificate",
        "level": cert.level,
        "graph_id": cert.graph_id,
        "singular_piece": piece_to_json(cert.singular_piece),
        "horizon": cert.horizon,
        "min_margin": cert.min_margin,
        "orbit_pieces": list(cert.orbit_pieces),
    }


def certificate_from_json(d: dict):
    if d["kind"] == "Undecided":
        return Undecided(d["reason"], d["levels_tried"])
    return NonRecurrenceCertificate(d["level"], d["graph_id"], piece_from_json(d["singular_piece"]),
                                    d["horizon"], d["min_margin"], tuple(d["orbit_pieces"]))


def equivalence_to_json(r) -> dict:
    if isinstance(r, Equivalent):
        return {"kind": "Equivalent", "levels": r.levels}
    if isinstance(r, Distinguished):
        return {"kind": "Distinguished", "level": r.level,
                "witness": [_addr(a) for a in r.witness]}
    return {"kind": "Undecided", "reason": r.reason, "levels_tried": r.levels_tried}


def equivalence_from_json(d: dict):
    if d["kind"] == "Equivalent":
        return Equivalent(d["levels"])
    if d["kind"] == "Distinguished":
        return Distinguished(d["level"], tuple(Address.parse(a) for a in d["witness"]))
    return Undecided(d["reason"], d["levels_tried"])


# parameter plane

def param_trace_to_json(tr: ParamRayTrace) -> dict:
    return {
        "kind": "ParamRayTrace",
        "address": _addr(tr.address),
        "samples": [{"t": s.t, "c_re": s.c.real, "c_im": s.c.imag, "err": s.err}
                    for s in tr.samples],
        "iterations": list(tr.iterations),
    }


def param_trace_from_json(d: dict) -> ParamRayTrace:
    return ParamRayTrace(Address.parse(d["address"]),
                         tuple(ParamRaySample(s["t"], complex(s["c_re"], s["c_im"]), s["err"])
                               for s in d["samples"]),
                         tuple(d.get("iterations", ())))


def _evidence(v):
    if isinstance(v, complex):
        return cplx(v)
    if isinstance(v, (list, tuple)):
        return [_evidence(x) for x in v]
    return v


def wake_to_json(w: WakeVerdict) -> dict:
    return {"kind": "WakeVerdict", "inside": w.inside.value, "method": w.method.value,
            "evidence": {k: _evidence(v) for k, v in w.evidence.items()}}


def wake_from_json(d: dict) -> WakeVerdict:
    return WakeVerdict(Verdict(d["inside"]), WakeMethod(d["method"]), dict(d["evidence"]))


# metric analysis

def orbit_sample_to_json(s: OrbitSample) -> dict:
    return {
        "kind": "OrbitSample",
        "c": cplx(s.c),
        "horizon": s.horizon,
        "points": [cplx(z) for z in s.points],
        "escaped": s.escaped,
        "escape_iterate": s.escape_iterate,
        "min_re": s.min_re,
        "min_distance": s.min_distance,
        "tags": list(s.tags),
        "disk_exponent": s.disk_exponent,
    }


def orbit_sample_from_json(d: dict) -> OrbitSample:
    return OrbitSample(uncplx(d["c"]), d["horizon"], tuple(uncplx(z) for z in d["points"]),
                       d["escaped"], d["escape_iterate"], d["min_re"], d["min_distance"],
                       tuple(d["tags"]), d["disk_exponent"])


def nonrecurrence_to_json(r: NonRecurrence) -> dict:
    return {"kind": "NonRecurrence", "distance": r.distance, "m_star": r.m_star,
            "min_re": r.min_re, "argmin": r.argmin, "recurrent": r.recurrent}


def growth_to_json(r: GrowthReport) -> dict:
    return {
        "kind": "GrowthReport",
        "c": cplx(r.c),
        "k_max": r.k_max,
        "k_bar": r.k_bar,
        "eta": r.eta,
        "per_start": [{"z": cplx(p.z), "S": list(p.sums), "escaped": p.escaped}
                      for p in r.per_start],
        "violations": [{"z": cplx(z), "k": k} for z, k in r.violations],
    }


def growth_from_json(d: dict) -> GrowthReport:
    return GrowthReport(uncplx(d["c"]), d["k_max"],
                        tuple(StartGrowth(uncplx(p["z"]), tuple(p["S"]), p["escaped"])
                              for p in d["per_start"]),
                        d["k_bar"], d["eta"],
                        tuple((uncplx(v["z"]), v["k"]) for v in d["violations"]))


# polynomial bridge

def angle_to_json(a: DAdicAngle) -> dict:
    return {"kind": "DAdicAngle", "D": a.D, "theta": str(a.theta), "address": _addr(a.digits),
            "boundary_digits": list(a.boundary_digits)}


def angle_from_json(d: dict) -> DAdicAngle:
    return DAdicAngle(d["D"], Fraction(d["theta"]), Address.parse(d["address"]),
                      tuple(d["boundary_digits"]))


def poly_trace_to_json(tr: PolyRayTrace) -> dict:
    return {
        "kind": "PolyRayTrace",
        "D": tr.D,
        "c": cplx(tr.c),
        "angle": str(tr.angle),
        "samples": [{"t": s.t, "re": s.z.real, "im": s.z.imag, "err": s.err}
                    for s in tr.samples],
    }


def poly_trace_from_json(d: dict) -> PolyRayTrace:
    return PolyRayTrace(d["D"], uncplx(d["c"]), Fraction(d["angle"]),
                        tuple(PolySample(s["t"], complex(s["re"], s["im"]), s["err"])
                              for s in d["samples"]))


def pair_comparison_to_json(r: PairComparison) -> dict:
    return {"pair": [_addr(a) for a in r.pair], "poly_colands": r.poly_colands,
            "exp_colands": r.exp_colands, "poly_distance": r.poly_distance,
            "exp_distance": r.exp_distance, "agree": r.agree, "error": r.error}


def pair_comparison_from_json(d: dict) -> PairComparison:
    return PairComparison(tuple(Address.parse(a) for a in d["pair"]), d["poly_colands"],
                          d["exp_colands"], d["poly_distance"], d["exp_distance"], d["error"])


DECODERS = {
    "RayTrace": ray_trace_from_json,
    "LandingResult": landing_from_json,
    "ParamRayTrace": param_trace_from_json,
    "WakeVerdict": wake_from_json,
    "OrbitSample": orbit_sample_from_json,
    "GrowthReport": growth_from_json,
    "DAdicAngle": angle_from_json,
    "PolyRayTrace": poly_trace_from_json,
    "NonRecurrenceCertificate": certificate_from_json,
}


ENCODERS = {
    RayTrace: ray_trace_to_json,
    LandingResult: landing_to_json,
    ParamRayTrace: param_trace_to_json,
    WakeVerdict: wake_to_json,
    OrbitSample: orbit_sample_to_json,
    GrowthReport: growth_to_json,
    DAdicAngle: angle_to_json,
    PolyRayTrace: poly_trace_to_json,
    NonRecurrenceCertificate: certificate_to_json,
    PeriodicOrbit: orbit_to_json,
    PuzzlePiece: piece_to_json,
    PairComparison: pair_comparison_to_json,
}


def encode(obj) -> dict:
    fn = ENCODERS.get(type(obj))
    if fn is None:
        raise TypeError(f"no JSON encoding for {type(obj).__name__}")
    return fn(obj)


def decode(d: dict):
    """Rebuild the typed object of a JSON artifact from its "kind" field."""
    kind = d.get("kind")
    if kind not in DECODERS:
        raise ValueError(f"no decoder for artifact kind {kind!r}")
    return DECODERS[kind](d)


# files

def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1)


def atomic_write_bytes(path, data: bytes) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def write_json(path, obj) -> None:
    atomic_write_bytes(path, (dumps(obj) + "\n").encode())


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
