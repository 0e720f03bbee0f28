"""Synthetic connection records in NSL-KDD text format.

The generator is a loose caricature of the real traffic: normal sessions are
mostly logged-in SF connections with few same-host connections, DOS records
are bursts of short half-open (neptune-like) or icmp echo (smurf-like)
connections, and probes sweep many services with rejected connections. A
slice of normal traffic looks DOS-like (short connections to ``private``)
so that classifiers trained on it make Normal->DOS mistakes worth explaining.
It exists for tests and demos; it is not a stand-in for the real data.
"""

import numpy as np

from .nslkdd import COLUMN_NAMES

NORMAL_SERVICES = ("http", "smtp", "ftp_data", "domain_u", "ftp", "telnet", "private", "other")
NORMAL_SERVICE_P = (0.40, 0.14, 0.12, 0.10, 0.06, 0.05, 0.08, 0.05)
PROBE_SERVICES = ("private", "other", "http", "ftp_data", "telnet", "eco_i", "ecr_i", "finger", "domain_u")
DOS_ATTACKS = ("neptune", "smurf", "back", "teardrop")
PROBE_ATTACKS = ("satan", "portsweep", "ipsweep", "nmap")


def _rate(rng, center, spread=0.05):
    return float(np.clip(center + rng.normal(0, spread), 0.0, 1.0))


def _fmt(v):
    if isinstance(v, str):
        return v
    if float(v).is_integer():
        return str(int(v))
    return f"{v:.2f}"


def _base():
    return dict.fromkeys(COLUMN_NAMES, 0)


def _normal(rng, suspicious):
    r = _base()
    r["protocol_type"] = rng.choice(["tcp", "udp", "icmp"], p=[0.82, 0.15, 0.03])
    if suspicious:
        r["service"] = "private"
        r["flag"] = rng.choice(["SF", "S0", "REJ"], p=[0.5, 0.3, 0.2])
        r["duration"] = 0
        r["count"] = int(rng.integers(60, 260))
        r["srv_count"] = int(rng.integers(1, 20))
        r["logged_in"] = 0
        r["src_bytes"] = int(rng.integers(0, 60))
        r["serror_rate"] = _rate(rng, 0.4, 0.3)
        r["same_srv_rate"] = _rate(rng, 0.15, 0.1)
        r["diff_srv_rate"] = _rate(rng, 0.05, 0.03)
        r["dst_host_count"] = int(rng.integers(150, 256))
        r["dst_host_srv_count"] = int(rng.integers(1, 40))
        r["dst_host_same_src_port_rate"] = _rate(rng, 0.3, 0.2)
    else:
        r["service"] = rng.choice(NORMAL_SERVICES, p=NORMAL_SERVICE_P)
        r["flag"] = rng.choice(["SF", "S1", "RSTO", "REJ"], p=[0.9, 0.04, 0.03, 0.03])
        r["duration"] = 0 if rng.random() < 0.6 else int(rng.exponential(300))
        r["count"] = int(rng.integers(1, 30))
        r["srv_count"] = int(rng.integers(1, 30))
        r["logged_in"] = int(rng.random() < 0.75)
        r["is_guest_login"] = int(rng.random() < 0.02)
        r["num_root"] = int(rng.random() < 0.05) * int(rng.integers(1, 5))
        r["hot"] = int(rng.random() < 0.1) * int(rng.integers(1, 6))
        r["src_bytes"] = int(rng.lognormal(5.5, 1.2))
        r["dst_bytes"] = int(rng.lognormal(7.0, 1.5))
        r["serror_rate"] = _rate(rng, 0.0, 0.03)
        r["same_srv_rate"] = _rate(rng, 0.95, 0.08)
        r["diff_srv_rate"] = _rate(rng, 0.1, 0.1)
        r["dst_host_count"] = int(rng.integers(1, 256))
        r["dst_host_srv_count"] = int(rng.integers(20, 256))
        r["dst_host_same_src_port_rate"] = _rate(rng, 0.05, 0.05)
    r["srv_serror_rate"] = r["serror_rate"]
    r["rerror_rate"] = _rate(rng, 0.02, 0.03)
    r["srv_rerror_rate"] = r["rerror_rate"]
    r["dst_host_same_srv_rate"] = _rate(rng, r["same_srv_rate"], 0.1)
    r["dst_host_diff_srv_rate"] = _rate(rng, r["diff_srv_rate"], 0.05)
    r["dst_host_serror_rate"] = _rate(rng, r["serror_rate"], 0.05)
    r["dst_host_srv_serror_rate"] = r["dst_host_serror_rate"]
    r["dst_host_rerror_rate"] = _rate(rng, r["rerror_rate"], 0.03)
    r["dst_host_srv_rerror_rate"] = r["dst_host_rerror_rate"]
    return r, "normal"


def _dos(rng):
    r = _base()
    attack = rng.choice(DOS_ATTACKS, p=[0.6, 0.2, 0.1, 0.1])
    if attack == "smurf":
        r.update(protocol_type="icmp", service="ecr_i", flag="SF", src_bytes=1032,
                 count=int(rng.integers(300, 512)))
        r["srv_count"] = r["count"]
        r["same_srv_rate"] = 1.0
    elif attack == "teardrop":
        r.update(protocol_type="udp", service="private", flag="SF", src_bytes=28, wrong_fragment=3,
                 count=int(rng.integers(20, 120)))
        r["same_srv_rate"] = _rate(rng, 0.9)
    elif attack == "back":
        r.update(protocol_type="tcp", service="http", flag="SF", src_bytes=54540,
                 dst_bytes=int(rng.integers(7000, 9000)), logged_in=1, hot=2, duration=int(rng.integers(0, 3)),
                 count=int(rng.integers(1, 20)))
        r["same_srv_rate"] = 1.0
    else:
        r.update(protocol_type="tcp", service=rng.choice(["private", "other", "telnet", "ftp"], p=[0.7, 0.1, 0.1, 0.1]),
                 flag=rng.choice(["S0", "REJ"], p=[0.75, 0.25]), count=int(rng.integers(100, 512)))
        r["serror_rate"] = 1.0 if r["flag"] == "S0" else 0.0
        r["rerror_rate"] = 1.0 - r["serror_rate"]
        r["same_srv_rate"] = _rate(rng, 0.05, 0.04)
        r["diff_srv_rate"] = _rate(rng, 0.06, 0.02)
    r["srv_count"] = r["srv_count"] or int(rng.integers(1, 30))
    r["srv_serror_rate"] = r["serror_rate"]
    r["srv_rerror_rate"] = r["rerror_rate"]
    r["dst_host_count"] = 255
    r["dst_host_srv_count"] = int(rng.integers(1, 30)) if attack == "neptune" else 255
    r["dst_host_same_srv_rate"] = _rate(rng, r["same_srv_rate"], 0.05)
    r["dst_host_diff_srv_rate"] = _rate(rng, 0.06, 0.02)
    r["dst_host_same_src_port_rate"] = _rate(rng, 0.6 if attack == "smurf" else 0.2, 0.2)
    r["dst_host_serror_rate"] = r["serror_rate"]
    r["dst_host_srv_serror_rate"] = r["serror_rate"]
    r["dst_host_rerror_rate"] = r["rerror_rate"]
    r["dst_host_srv_rerror_rate"] = r["rerror_rate"]
    return r, attack


def _probe(rng):
    r = _base()
    attack = rng.choice(PROBE_ATTACKS, p=[0.35, 0.3, 0.25, 0.1])
    if attack == "ipsweep":
        r.update(protocol_type="icmp", service=rng.choice(["eco_i", "ecr_i"]), flag="SF", src_bytes=8)
    else:
        r.update(protocol_type=rng.choice(["tcp", "udp"], p=[0.9, 0.1]),
                 service=rng.choice(PROBE_SERVICES),
                 flag=rng.choice(["REJ", "RSTR", "SF", "RSTO", "SH"], p=[0.35, 0.25, 0.2, 0.1, 0.1]))
    r["duration"] = 0 if rng.random() < 0.9 else int(rng.integers(1, 30))
    r["count"] = int(rng.integers(1, 200))
    r["srv_count"] = int(rng.integers(1, 10))
    r["rerror_rate"] = _rate(rng, 0.6, 0.3)
    r["srv_rerror_rate"] = r["rerror_rate"]
    r["same_srv_rate"] = _rate(rng, 0.1, 0.1)
    r["diff_srv_rate"] = _rate(rng, 0.7, 0.2)
    r["srv_diff_host_rate"] = _rate(rng, 0.4, 0.3)
    r["dst_host_count"] = int(rng.integers(1, 256))
    r["dst_host_srv_count"] = int(rng.integers(1, 20))
    r["dst_host_same_srv_rate"] = _rate(rng, 0.05, 0.05)
    r["dst_host_diff_srv_rate"] = _rate(rng, 0.7, 0.2)
    r["dst_host_same_src_port_rate"] = _rate(rng, 0.8, 0.2)
    r["dst_host_rerror_rate"] = _rate(rng, 0.6, 0.3)
    r["dst_host_srv_rerror_rate"] = r["dst_host_rerror_rate"]
    return r, attack


def generate_lines(n, seed=0, class_p=(0.53, 0.37, 0.10), suspicious_normal=0.06, r2l_p=0.0,
                   extra_services=()):
    """Yield ``n`` NSL-KDD formatted lines (with a trailing difficulty column)."""
    rng = np.random.default_rng(seed)
    lines = []
    for _ in range(n):
        if r2l_p and rng.random() < r2l_p:
            rec, label = _normal(rng, False)
            label = "guess_passwd"
        else:
            c = rng.choice(3, p=class_p)
            if c == 0:
                rec, label = _normal(rng, rng.random() < suspicious_normal)
            elif c == 1:
                rec, label = _dos(rng)
            else:
                rec, label = _probe(rng)
        if extra_services and rng.random() < 0.02:
            rec["service"] = rng.choice(extra_services)
        fields = [_fmt(rec[name]) for name in COLUMN_NAMES] + [label, str(int(rng.integers(5, 22)))]
        lines.append(",".join(fields))
    return lines


def write_split(path, n, seed, **kwargs):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(generate_lines(n, seed, **kwargs)) + "\n")
